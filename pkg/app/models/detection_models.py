#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
检测评估数据模型
"""
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

from app.models.box_models import Box
from app.utils.exceptions import DatasetError

Identifier = Union[int, str]


def threshold_key(t: float) -> str:
    """阈值的字符串形式，两位小数可精确表示时补齐为 0.50 形式"""
    return f"{t:.2f}" if round(t, 2) == t else f"{t:g}"


@dataclass(frozen=True)
class GroundTruth:
    """真值标注（归一化坐标）"""
    image_id: Identifier
    category: Identifier
    box: Box

    def to_dict(self) -> Dict[str, Any]:
        return {
            'image_id': self.image_id,
            'category': self.category,
            'box': self.box.to_dict(),
        }


@dataclass(frozen=True)
class Detection:
    """检测结果，score 为 [0,1] 内的置信度"""
    image_id: Identifier
    category: Identifier
    box: Box
    score: float

    def __post_init__(self):
        if not isinstance(self.score, (int, float)) or not math.isfinite(self.score) \
                or not (0.0 <= self.score <= 1.0):
            raise DatasetError(f"检测置信度必须在 [0,1] 范围内: {self.score}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'image_id': self.image_id,
            'category': self.category,
            'box': self.box.to_dict(),
            'score': self.score,
        }


@dataclass
class EvalReport:
    """
    检测评估报告

    ap_per_threshold 包含 0.50..0.95 十个标准阈值以及调用方额外指定的阈值；
    iou_histogram 为 0.5 阈值下 TP 匹配 IoU ≥ 各桶阈值的计数（嵌套计数）。
    """
    ap_per_threshold: Dict[float, float]
    map_50_95: float
    map_75_95: float
    iou_histogram: Dict[float, int]
    n_gt: int = 0
    n_dets: int = 0
    n_categories: int = 0

    def ap_at(self, threshold: float) -> float:
        """按阈值取 AP（按 10 位小数对齐）"""
        return self.ap_per_threshold[round(threshold, 10)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'ap_per_threshold': {threshold_key(t): ap for t, ap in sorted(self.ap_per_threshold.items())},
            'map_50_95': self.map_50_95,
            'map_75_95': self.map_75_95,
            'iou_histogram': {threshold_key(t): n for t, n in sorted(self.iou_histogram.items())},
            'n_gt': self.n_gt,
            'n_dets': self.n_dets,
            'n_categories': self.n_categories,
        }


@dataclass
class DatasetBundle:
    """
    标注数据集

    images: image_id → (宽像素, 高像素)；dets 为 None 表示未加载检测结果。
    clamped/dropped 为加载时越界截断与丢弃退化框的计数，不参与相等比较。
    """
    images: Dict[Identifier, Tuple[float, float]] = field(default_factory=dict)
    gts: List[GroundTruth] = field(default_factory=list)
    dets: Optional[List[Detection]] = None
    categories: List[Dict[str, Any]] = field(default_factory=list)
    clamped: int = field(default=0, compare=False)
    dropped: int = field(default=0, compare=False)

    def gts_by_image(self) -> Dict[Identifier, List[GroundTruth]]:
        """按 image_id 分组的真值（保持文件顺序）"""
        grouped: Dict[Identifier, List[GroundTruth]] = {}
        for gt in self.gts:
            grouped.setdefault(gt.image_id, []).append(gt)
        return grouped

    def to_dict(self) -> Dict[str, Any]:
        return {
            'images': len(self.images),
            'gts': len(self.gts),
            'dets': None if self.dets is None else len(self.dets),
            'clamped': self.clamped,
            'dropped': self.dropped,
        }
