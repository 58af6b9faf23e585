#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
实验运行数据模型
梯度检验报告、边界框回归轨迹、噪声配置
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from app.models.box_models import Box
from app.models.loss_models import LossSpec
from app.utils.exceptions import DatasetError


@dataclass(frozen=True)
class GradReport:
    """有限差分梯度检验报告"""
    max_abs_err: float
    max_rel_err: float
    worst_case: Tuple[LossSpec, Box, Box]
    n_checked: int
    min_grad_norm: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        spec, pred, gt = self.worst_case
        return {
            'max_abs_err': self.max_abs_err,
            'max_rel_err': self.max_rel_err,
            'worst_case': {
                'spec': spec.to_dict(),
                'pred': pred.to_dict(),
                'gt': gt.to_dict(),
            },
            'n_checked': self.n_checked,
            'min_grad_norm': self.min_grad_norm,
        }


@dataclass(frozen=True)
class TrajectoryPoint:
    """回归轨迹上的一个点"""
    step: int
    iou: float
    loss: float
    grad_norm: float


@dataclass
class RegressionRun:
    """
    单次梯度下降回归记录

    trajectory 长度为 steps+1（含初始状态）；clamp_events 记录发生越界截断的步号
    """
    spec: LossSpec
    lr: float
    steps: int
    trajectory: List[TrajectoryPoint] = field(default_factory=list)
    converged_at: Optional[int] = None
    final_box: Optional[Box] = None
    clamp_events: List[int] = field(default_factory=list)

    def first_step_reaching(self, iou_threshold: float) -> Optional[int]:
        """
        第一个 IoU 达到阈值的步号

        Args:
            iou_threshold: IoU 阈值

        Returns:
            int: 步号，始终未达到时返回 None
        """
        for point in self.trajectory:
            if point.iou >= iou_threshold:
                return point.step
        return None

    def to_rows(self) -> List[Dict[str, Any]]:
        """转换为 CSV 行（step, alpha, iou, loss, grad_norm）"""
        return [
            {
                'step': p.step,
                'alpha': self.spec.alpha1,
                'iou': p.iou,
                'loss': p.loss,
                'grad_norm': p.grad_norm,
            }
            for p in self.trajectory
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'spec': self.spec.to_dict(),
            'lr': self.lr,
            'steps': self.steps,
            'converged_at': self.converged_at,
            'final_box': self.final_box.to_dict() if self.final_box else None,
            'clamp_events': list(self.clamp_events),
            'final_iou': self.trajectory[-1].iou if self.trajectory else None,
        }


@dataclass(frozen=True)
class NoiseConfig:
    """
    噪声配置

    eta 为噪声率，扰动服从 [−ηw, ηw] 与 [−ηh, ηh] 上的均匀分布
    """
    eta: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.eta <= 0.5):
            raise DatasetError(f"噪声率 eta 必须在 [0, 0.5] 范围内: {self.eta}")

    def to_dict(self) -> Dict[str, Any]:
        return {'eta': self.eta, 'seed': self.seed}
