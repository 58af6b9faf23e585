#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
损失函数数据模型
损失类型、损失规格（α₁、α₂）以及损失值与梯度的计算结果
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from app.utils.exceptions import LossSpecError

# log(IoU) 的默认截断下限
LOG_EPS = 1e-7


class LossKind(str, Enum):
    """α-IoU 损失族成员"""
    ALPHA_IOU = 'alpha_iou'
    ALPHA_GIOU = 'alpha_giou'
    ALPHA_DIOU = 'alpha_diou'
    ALPHA_CIOU = 'alpha_ciou'
    LOG_IOU = 'log_iou'

    @classmethod
    def parse(cls, value) -> 'LossKind':
        """
        解析损失类型，兼容 'AlphaGIoU'、'alpha-giou'、'giou' 等写法

        Args:
            value: LossKind 或字符串

        Returns:
            LossKind: 损失类型
        """
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace('-', '_')
        aliases = {
            'alphaiou': 'alpha_iou', 'iou': 'alpha_iou',
            'alphagiou': 'alpha_giou', 'giou': 'alpha_giou',
            'alphadiou': 'alpha_diou', 'diou': 'alpha_diou',
            'alphaciou': 'alpha_ciou', 'ciou': 'alpha_ciou',
            'logiou': 'log_iou', 'log': 'log_iou',
        }
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            valid = ', '.join(k.value for k in cls)
            raise LossSpecError(f"未知的损失类型: {value}（可选: {valid}）")

    @property
    def has_penalty(self) -> bool:
        return self in (LossKind.ALPHA_GIOU, LossKind.ALPHA_DIOU, LossKind.ALPHA_CIOU)


@dataclass(frozen=True)
class LossSpec:
    """
    损失规格

    alpha2 缺省时取 alpha1（IoU 项与惩罚项幂次一致）；
    box_cox 为 True 时 IoU 项按 (1 − IoU^α₁)/α₁ 缩放；
    log_eps 为 LogIoU 中 IoU 的截断下限。
    """
    kind: LossKind = LossKind.ALPHA_IOU
    alpha1: float = 1.0
    alpha2: Optional[float] = None
    box_cox: bool = False
    log_eps: float = LOG_EPS

    def __post_init__(self):
        object.__setattr__(self, 'kind', LossKind.parse(self.kind))
        if self.alpha2 is None:
            object.__setattr__(self, 'alpha2', self.alpha1)
        for name in ('alpha1', 'alpha2'):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
                raise LossSpecError(f"{name} 必须是正数: {value}")
            object.__setattr__(self, name, float(value))
        if not (0.0 < self.log_eps < 1.0):
            raise LossSpecError(f"log_eps 必须在(0,1)范围内: {self.log_eps}")
        object.__setattr__(self, 'log_eps', float(self.log_eps))

    def label(self) -> str:
        """用于日志与报表的简短标签"""
        if self.kind == LossKind.LOG_IOU:
            return 'log_iou'
        if self.alpha1 == self.alpha2:
            return f"{self.kind.value}(α={self.alpha1:g})"
        return f"{self.kind.value}(α₁={self.alpha1:g},α₂={self.alpha2:g})"

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'alpha1': self.alpha1,
            'alpha2': self.alpha2,
            'box_cox': self.box_cox,
            'log_eps': self.log_eps,
        }


@dataclass(frozen=True)
class LossEval:
    """
    损失值与梯度

    d_iou 为 ∂L/∂IoU（其他几何量视为常数），grad_pred 为对预测框 (cx, cy, w, h) 的完整梯度
    """
    value: float
    d_iou: float
    grad_pred: np.ndarray

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.grad_pred))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'value': self.value,
            'd_iou': self.d_iou,
            'grad_pred': [float(g) for g in self.grad_pred],
        }
