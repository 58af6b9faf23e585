#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试公共夹具
"""
import json
import os
import sys

import numpy as np
import pytest
from hypothesis import strategies as st

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.models.box_models import Box
from app.services.logger_service import get_logger_service


def random_box(rng: np.random.Generator, min_extent: float = 0.05, max_extent: float = 0.6) -> Box:
    """满足边界条件的随机归一化框"""
    w = float(rng.uniform(min_extent, max_extent))
    h = float(rng.uniform(min_extent, max_extent))
    return Box(
        cx=float(rng.uniform(w / 2.0, 1.0 - w / 2.0)),
        cy=float(rng.uniform(h / 2.0, 1.0 - h / 2.0)),
        w=w,
        h=h,
    )


@st.composite
def feasible_boxes(draw, min_extent: float = 0.02, max_extent: float = 0.9):
    """hypothesis 策略：满足边界条件的归一化框"""
    w = draw(st.floats(min_value=min_extent, max_value=max_extent))
    h = draw(st.floats(min_value=min_extent, max_value=max_extent))
    fx = draw(st.floats(min_value=0.0, max_value=1.0))
    fy = draw(st.floats(min_value=0.0, max_value=1.0))
    return Box(cx=w / 2.0 + fx * (1.0 - w), cy=h / 2.0 + fy * (1.0 - h), w=w, h=h)


@pytest.fixture(autouse=True)
def reset_logging():
    """每个用例结束后撤销 init_logging 安装的处理器"""
    yield
    get_logger_service().reset()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def write_json(tmp_path):
    """把对象写成 JSON 文件并返回路径"""
    def _write(name, data):
        path = tmp_path / name
        path.write_text(json.dumps(data, ensure_ascii=False), encoding='utf-8')
        return str(path)
    return _write


@pytest.fixture
def coco_fixture():
    """两张图像、两个类别的小型 COCO 标注"""
    return {
        'images': [
            {'id': 1, 'width': 100, 'height': 100},
            {'id': 2, 'width': 200, 'height': 100},
        ],
        'annotations': [
            {'id': 1, 'image_id': 1, 'category_id': 1, 'bbox': [10, 10, 20, 20]},
            {'id': 2, 'image_id': 1, 'category_id': 2, 'bbox': [50, 40, 30, 40]},
            {'id': 3, 'image_id': 2, 'category_id': 1, 'bbox': [20, 10, 60, 50]},
            {'id': 4, 'image_id': 2, 'category_id': 1, 'bbox': [120, 30, 50, 40]},
        ],
        'categories': [{'id': 1, 'name': 'cat'}, {'id': 2, 'name': 'dog'}],
    }
