#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
边界框数据模型
归一化中心坐标形式的轴对齐边界框及其几何摘要
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from app.utils.exceptions import BoxError

# 最小宽高，小于该值视为退化框
MIN_EXTENT = 1e-8


@dataclass(frozen=True)
class Box:
    """
    轴对齐边界框（中心形式，坐标为图像宽高的比例）

    直接构造不做 [0,1] 截断，用于优化过程中的中间状态；
    需要满足边界条件时使用 geometry.clamp_to_bounds。
    """
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        values = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in values):
            raise BoxError(f"边界框参数必须是有限值: {values}")
        if self.w < MIN_EXTENT or self.h < MIN_EXTENT:
            raise BoxError(f"边界框宽高必须为正 (w={self.w}, h={self.h})")

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> 'Box':
        """由角点形式 (x1, y1, x2, y2) 构造"""
        return cls(cx=(x1 + x2) / 2.0, cy=(y1 + y2) / 2.0, w=x2 - x1, h=y2 - y1)

    @classmethod
    def from_array(cls, values) -> 'Box':
        cx, cy, w, h = (float(v) for v in values)
        return cls(cx, cy, w, h)

    @property
    def corners(self) -> Tuple[float, float, float, float]:
        """角点视图 (x1, y1, x2, y2)"""
        half_w = self.w / 2.0
        half_h = self.h / 2.0
        return (self.cx - half_w, self.cy - half_h, self.cx + half_w, self.cy + half_h)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=np.float64)

    def within_bounds(self, tol: float = 1e-12) -> bool:
        """
        是否满足边界条件 0<w<1, 0<h<1, w/2<=cx<=1-w/2, h/2<=cy<=1-h/2

        Args:
            tol: 浮点容差

        Returns:
            bool: 是否可行
        """
        if not (0.0 < self.w < 1.0 and 0.0 < self.h < 1.0):
            return False
        x1, y1, x2, y2 = self.corners
        return x1 >= -tol and y1 >= -tol and x2 <= 1.0 + tol and y2 <= 1.0 + tol

    def to_dict(self) -> Dict[str, float]:
        """转换为字典"""
        return {'cx': self.cx, 'cy': self.cy, 'w': self.w, 'h': self.h}


@dataclass(frozen=True)
class GeometrySummary:
    """
    预测框与真值框之间的几何量

    enclosure_excess 为 |C\\(B∪B^gt)|/|C|，center_dist_sq 与 diag_sq 保持平方形式
    """
    iou: float
    enclosure_excess: float
    center_dist_sq: float
    diag_sq: float
    v: float

    @property
    def distance_ratio(self) -> float:
        """ρ²/c²，两框重合时 c² 为 0，此时定义为 0"""
        if self.diag_sq <= 0.0:
            return 0.0
        return self.center_dist_sq / self.diag_sq

    def to_dict(self) -> Dict[str, float]:
        return {
            'iou': self.iou,
            'enclosure_excess': self.enclosure_excess,
            'center_dist_sq': self.center_dist_sq,
            'diag_sq': self.diag_sq,
            'v': self.v,
        }


@dataclass(frozen=True)
class GeometryGrad:
    """几何量对预测框 (cx, cy, w, h) 的偏导数，每项为长度 4 的向量"""
    iou: np.ndarray = field(default_factory=lambda: np.zeros(4))
    enclosure_excess: np.ndarray = field(default_factory=lambda: np.zeros(4))
    center_dist_sq: np.ndarray = field(default_factory=lambda: np.zeros(4))
    diag_sq: np.ndarray = field(default_factory=lambda: np.zeros(4))
    v: np.ndarray = field(default_factory=lambda: np.zeros(4))
