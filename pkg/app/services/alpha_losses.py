#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
α-IoU 损失服务
损失值、对 IoU 与对边界框参数的解析梯度、相对/绝对重加权函数、转折点与曲线采样
"""
import math
import os
import sys
from typing import Dict, Iterable, List, Optional, Union

import numpy as np

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.models.box_models import Box, GeometrySummary
from app.models.loss_models import LOG_EPS, LossKind, LossSpec, LossEval
from app.services.geometry import summarize, summarize_with_grad
from app.utils.exceptions import LossSpecError
from app.utils.logger import get_logger

# |α − 1| 不超过该值时转折点取极限 1/e
TURNING_POINT_TOL = 1e-9

logger = get_logger('alpha_losses', category='business')


def _power(base: float, exponent: float) -> float:
    """base^exponent，base 非正时取 0"""
    if base <= 0.0:
        return 0.0
    return base ** exponent


def _power_grad(base: float, exponent: float, d_base: np.ndarray) -> np.ndarray:
    """d(base^exponent) = exponent·base^(exponent−1)·d_base，base 非正时取次梯度 0"""
    if base <= 0.0:
        return np.zeros(4)
    return exponent * base ** (exponent - 1.0) * d_base


def ciou_beta(summary: GeometrySummary) -> float:
    """CIoU 权衡系数 β = v/((1−IoU)+v)，分母为 0 时取 0"""
    denom = (1.0 - summary.iou) + summary.v
    if denom <= 0.0:
        return 0.0
    return summary.v / denom


def _iou_term(spec: LossSpec, iou: float) -> float:
    if spec.kind == LossKind.LOG_IOU:
        return max(0.0, -math.log(max(iou, spec.log_eps)))
    if iou <= 0.0:
        term = 1.0
    else:
        term = -math.expm1(spec.alpha1 * math.log(iou))
    if spec.box_cox:
        term /= spec.alpha1
    return term


def _penalty_term(spec: LossSpec, summary: GeometrySummary, beta: float) -> float:
    if spec.kind == LossKind.ALPHA_GIOU:
        return _power(summary.enclosure_excess, spec.alpha2)
    if spec.kind == LossKind.ALPHA_DIOU:
        return _power(summary.distance_ratio, spec.alpha2)
    if spec.kind == LossKind.ALPHA_CIOU:
        return _power(summary.distance_ratio, spec.alpha2) + _power(beta * summary.v, spec.alpha2)
    return 0.0


def loss_from_summary(spec: LossSpec, summary: GeometrySummary,
                      frozen_beta: Optional[float] = None) -> float:
    """
    由几何摘要计算损失值

    Args:
        spec: 损失规格
        summary: 几何摘要
        frozen_beta: CIoU 的 β 固定值（梯度检验使用），None 表示按当前几何量计算

    Returns:
        float: 损失值
    """
    beta = ciou_beta(summary) if frozen_beta is None else frozen_beta
    return _iou_term(spec, summary.iou) + _penalty_term(spec, summary, beta)


def loss_value(spec: LossSpec, pred: Box, gt: Box, frozen_beta: Optional[float] = None) -> float:
    """
    计算损失值

    AlphaIoU: 1−IoU^α₁；AlphaGIoU: 加 (|C\\(B∪B^gt)|/|C|)^α₂；
    AlphaDIoU: 加 (ρ²/c²)^α₂；AlphaCIoU: 再加 (βv)^α₂；LogIoU: −log(max(IoU, ε))

    Args:
        spec: 损失规格
        pred: 预测框
        gt: 真值框
        frozen_beta: CIoU 的 β 固定值（可选）

    Returns:
        float: 非负损失值
    """
    return loss_from_summary(spec, summarize(pred, gt), frozen_beta)


def loss_eval(spec: LossSpec, pred: Box, gt: Box) -> LossEval:
    """
    计算损失值、∂L/∂IoU 以及对预测框参数的梯度

    CIoU 的 β 不参与求导；d_iou 只对显式 IoU 项求导，惩罚项视为与 IoU 无关。

    Args:
        spec: 损失规格
        pred: 预测框
        gt: 真值框

    Returns:
        LossEval: 损失值与梯度
    """
    summary, geo_grad = summarize_with_grad(pred, gt)
    iou = summary.iou
    beta = ciou_beta(summary)
    value = loss_from_summary(spec, summary, beta)

    # IoU 项
    if spec.kind == LossKind.LOG_IOU:
        d_iou = -1.0 / max(iou, spec.log_eps)
        grad = d_iou * geo_grad.iou if iou >= spec.log_eps else np.zeros(4)
    else:
        alpha = spec.alpha1
        if iou > 0.0:
            d_iou = -alpha * iou ** (alpha - 1.0)
            grad = d_iou * geo_grad.iou
        else:
            # 不相交时 IoU 局部恒为 0，链式项为 0
            d_iou = -relative_grad_weight(alpha, 0.0)
            grad = np.zeros(4)
        if spec.box_cox:
            d_iou /= alpha
            grad = grad / alpha

    # 惩罚项
    if spec.kind == LossKind.ALPHA_GIOU:
        grad = grad + _power_grad(summary.enclosure_excess, spec.alpha2, geo_grad.enclosure_excess)
    elif spec.kind in (LossKind.ALPHA_DIOU, LossKind.ALPHA_CIOU):
        if summary.diag_sq > 0.0:
            c2 = summary.diag_sq
            d_ratio = (geo_grad.center_dist_sq * c2 - summary.center_dist_sq * geo_grad.diag_sq) / (c2 * c2)
            grad = grad + _power_grad(summary.distance_ratio, spec.alpha2, d_ratio)
        if spec.kind == LossKind.ALPHA_CIOU:
            grad = grad + _power_grad(beta * summary.v, spec.alpha2, beta * geo_grad.v)

    return LossEval(value=value, d_iou=d_iou, grad_pred=grad)


def box_cox_loss(alpha: float, iou: float) -> float:
    """
    Box-Cox 形式的 α-IoU 损失 (1 − IoU^α)/α，α → 0 时为 −log(IoU)

    Args:
        alpha: 幂参数，≥ 0（0 表示极限情形）
        iou: 交并比，[0,1]

    Returns:
        float: 损失值（IoU=0 且 α=0 时为 +∞）
    """
    _check_iou(iou)
    if alpha < 0:
        raise LossSpecError(f"alpha 不能为负: {alpha}")
    if alpha == 0:
        return math.inf if iou == 0.0 else -math.log(iou)
    if iou == 0.0:
        return 1.0 / alpha
    return -math.expm1(alpha * math.log(iou)) / alpha


def relative_loss_weight(alpha: float, iou: float) -> float:
    """
    相对损失权重 w_Lr = (1−IoU^α)/(1−IoU) = 1 + (IoU−IoU^α)/(1−IoU)

    Args:
        alpha: 幂参数，> 0
        iou: 交并比，[0,1]；IoU=1 时返回解析极限 α

    Returns:
        float: 相对损失权重
    """
    _check_alpha(alpha)
    _check_iou(iou)
    if iou == 1.0:
        return float(alpha)
    if iou == 0.0:
        return 1.0
    gap = 1.0 - iou
    return -math.expm1(alpha * math.log1p(-gap)) / gap


def relative_grad_weight(alpha: float, iou: float) -> float:
    """
    相对梯度权重 w_∇r = α·IoU^(α−1)

    Args:
        alpha: 幂参数，> 0
        iou: 交并比，[0,1]

    Returns:
        float: 相对梯度权重，IoU=0 且 α<1 时为 +∞
    """
    _check_alpha(alpha)
    _check_iou(iou)
    if iou == 0.0:
        if alpha < 1.0:
            return math.inf
        return 1.0 if alpha == 1.0 else 0.0
    return alpha * iou ** (alpha - 1.0)


def absolute_loss_weight(alpha: float, iou: float) -> float:
    """绝对损失权重 w_La = IoU − IoU^α"""
    _check_alpha(alpha)
    _check_iou(iou)
    return iou - iou ** alpha


def absolute_grad_weight(alpha: float, iou: float) -> float:
    """绝对梯度权重 w_∇a = α·IoU^(α−1) − 1"""
    return relative_grad_weight(alpha, iou) - 1.0


def turning_point(alpha: float) -> float:
    """
    梯度转折点 IoU = α^(1/(1−α))，即 w_∇r = 1 的位置

    Args:
        alpha: 幂参数，> 0

    Returns:
        float: 转折点；α 与 1 相差不超过 1e-9 时返回极限 1/e
    """
    _check_alpha(alpha)
    if abs(alpha - 1.0) <= TURNING_POINT_TOL:
        return math.exp(-1.0)
    return math.exp(math.log1p(alpha - 1.0) / (1.0 - alpha))


def curve_samples(kind: Union[LossKind, str], alphas: Iterable[float], n_points: int,
                  box_cox: bool = False, log_eps: float = LOG_EPS) -> List[Dict[str, float]]:
    """
    采样损失值与梯度幅值随 IoU 变化的曲线

    惩罚项不是 IoU 的函数，带惩罚项的类型只输出 IoU 项；LogIoU 只输出一组，alpha 记为 0。

    Args:
        kind: 损失类型
        alphas: α 列表
        n_points: [0,1] 上均匀采样点数，≥ 2
        box_cox: 是否使用 (1−IoU^α)/α 缩放
        log_eps: LogIoU 的截断下限，(0,1)

    Returns:
        list: 行字典列表，字段 iou, alpha, loss, grad_mag；梯度发散处为 +∞
    """
    kind = LossKind.parse(kind)
    if n_points < 2:
        raise LossSpecError(f"采样点数至少为 2: {n_points}")
    grid = np.linspace(0.0, 1.0, n_points)

    rows: List[Dict[str, float]] = []
    if kind == LossKind.LOG_IOU:
        if not (0.0 < log_eps < 1.0):
            raise LossSpecError(f"log_eps 必须在(0,1)范围内: {log_eps}")
        clipped = np.maximum(grid, log_eps)
        loss = -np.log(clipped)
        grad = 1.0 / clipped
        for i in range(n_points):
            rows.append({'iou': float(grid[i]), 'alpha': 0.0, 'loss': float(loss[i]), 'grad_mag': float(grad[i])})
        return rows

    alphas = [float(a) for a in alphas]
    if not alphas:
        raise LossSpecError("至少需要一个 α")
    for alpha in alphas:
        _check_alpha(alpha)
        with np.errstate(divide='ignore'):
            loss = 1.0 - grid ** alpha
            grad = alpha * grid ** (alpha - 1.0)
        if box_cox:
            loss = loss / alpha
            grad = grad / alpha
        for i in range(n_points):
            rows.append({'iou': float(grid[i]), 'alpha': alpha, 'loss': float(loss[i]), 'grad_mag': float(grad[i])})

    if kind.has_penalty:
        logger.debug(f"{kind.value} 的惩罚项与 IoU 无关，曲线仅包含 IoU 项")
    return rows


def check_alpha_range(alpha: float, alpha_min: float = 0.1, alpha_max: float = 10.0) -> float:
    """
    校验命令行给出的 α 是否在允许范围内

    Returns:
        float: 校验后的 α
    """
    alpha = float(alpha)
    if not (alpha_min <= alpha <= alpha_max):
        raise LossSpecError(f"α 必须在 [{alpha_min:g}, {alpha_max:g}] 范围内: {alpha:g}")
    return alpha


def _check_alpha(alpha: float):
    if not math.isfinite(alpha) or alpha <= 0:
        raise LossSpecError(f"alpha 必须是正数: {alpha}")


def _check_iou(iou: float):
    if not (0.0 <= iou <= 1.0):
        raise LossSpecError(f"IoU 必须在 [0,1] 范围内: {iou}")
