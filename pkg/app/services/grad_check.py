#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
梯度检验服务
用中心差分独立验证解析梯度，并对随机样本做批量检验
"""
import os
import sys
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.models.box_models import Box
from app.models.loss_models import LossKind, LossSpec
from app.models.run_models import GradReport
from app.services.alpha_losses import ciou_beta, loss_eval, loss_value
from app.services.geometry import summarize
from app.utils.exceptions import BoxError, GradientCheckError
from app.utils.logger import get_logger, log_function_call

DEFAULT_STEP = 1e-6
TIE_MARGIN = 1e-4
# 采样时的最小 IoU 与惩罚项底数下限（避开 base^α₂ 在 0 附近的尖点）
MIN_SAMPLE_IOU = 0.05
PENALTY_MARGIN = 1e-3
MAX_REROLLS = 10000

logger = get_logger('grad_check', category='business')


def fd_gradient(spec: LossSpec, pred: Box, gt: Box, step: float = DEFAULT_STEP) -> np.ndarray:
    """
    中心差分计算损失对预测框 (cx, cy, w, h) 的梯度

    CIoU 的 β 固定在未扰动点的取值，与解析梯度的约定一致。
    扰动导致退化框时步长缩小一次（÷10），仍退化则报错。

    Args:
        spec: 损失规格
        pred: 预测框
        gt: 真值框
        step: 差分步长，> 0

    Returns:
        np.ndarray: 长度为 4 的梯度向量
    """
    if step <= 0:
        raise GradientCheckError(f"差分步长必须大于0: {step}")

    frozen_beta = None
    if spec.kind == LossKind.ALPHA_CIOU:
        frozen_beta = ciou_beta(summarize(pred, gt))

    base = pred.as_array()
    for attempt in range(2):
        try:
            return _central_difference(spec, base, gt, step, frozen_beta)
        except BoxError:
            if attempt == 0:
                logger.debug(f"差分扰动产生退化框，步长缩小为 {step / 10:g}")
                step /= 10.0
    raise GradientCheckError(f"差分扰动后边界框退化（步长 {step:g}）: {pred.to_dict()}")


def _central_difference(spec: LossSpec, base: np.ndarray, gt: Box, step: float,
                        frozen_beta: Optional[float]) -> np.ndarray:
    grad = np.zeros(4)
    for j in range(4):
        plus = base.copy()
        minus = base.copy()
        plus[j] += step
        minus[j] -= step
        f_plus = loss_value(spec, Box.from_array(plus), gt, frozen_beta)
        f_minus = loss_value(spec, Box.from_array(minus), gt, frozen_beta)
        grad[j] = (f_plus - f_minus) / (2.0 * step)
    return grad


def gradient_error(analytic: np.ndarray, numeric: np.ndarray) -> Tuple[float, float]:
    """
    解析梯度与差分梯度的误差

    Returns:
        tuple: (最大绝对误差, 相对误差)，相对误差分母为 max(‖a‖∞, ‖fd‖∞, 1e-8)
    """
    abs_err = float(np.max(np.abs(analytic - numeric)))
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), 1e-8)
    return abs_err, abs_err / scale


@log_function_call
def sweep_check(n_random: int, seed: int, kinds: Optional[Iterable] = None,
                alpha_range: Tuple[float, float] = (0.5, 5.0), mode: str = 'overlapping',
                step: float = DEFAULT_STEP, tie_margin: float = TIE_MARGIN) -> GradReport:
    """
    随机样本批量梯度检验

    每个样本使用由 SeedSequence(seed).spawn 派生的独立生成器，结果与执行顺序无关。

    Args:
        n_random: 样本数，≥ 1
        seed: 随机种子
        kinds: 参与检验的损失类型（默认全部）
        alpha_range: α₁、α₂ 的采样区间
        mode: 'overlapping' 采样相交框对，'disjoint' 采样不相交框对
        step: 差分步长
        tie_margin: 角点间距小于该值的样本重新采样

    Returns:
        GradReport: 最坏误差报告
    """
    if n_random < 1:
        raise GradientCheckError(f"样本数至少为 1: {n_random}")
    if mode not in ('overlapping', 'disjoint'):
        raise GradientCheckError(f"未知的采样模式: {mode}")
    kind_list = [LossKind.parse(k) for k in kinds] if kinds else list(LossKind)

    max_abs = 0.0
    max_rel = -1.0
    worst = None
    min_norm = np.inf
    for child in np.random.SeedSequence(seed).spawn(n_random):
        rng = np.random.default_rng(child)
        spec, pred, gt = sample_case(rng, kind_list, alpha_range, mode, tie_margin)
        analytic = loss_eval(spec, pred, gt).grad_pred
        numeric = fd_gradient(spec, pred, gt, step)
        abs_err, rel_err = gradient_error(analytic, numeric)
        max_abs = max(max_abs, abs_err)
        min_norm = min(min_norm, float(np.linalg.norm(analytic)))
        if rel_err > max_rel:
            max_rel = rel_err
            worst = (spec, pred, gt)

    report = GradReport(
        max_abs_err=max_abs,
        max_rel_err=max_rel,
        worst_case=worst,
        n_checked=n_random,
        min_grad_norm=float(min_norm),
    )
    logger.info(f"梯度检验完成: {n_random} 个样本, 最大相对误差 {max_rel:.3e}, 最坏情形 {worst[0].label()}")
    return report


def sample_case(rng: np.random.Generator, kinds: Sequence[LossKind],
                alpha_range: Tuple[float, float], mode: str,
                tie_margin: float = TIE_MARGIN) -> Tuple[LossSpec, Box, Box]:
    """
    采样一个 (规格, 预测框, 真值框) 三元组，避开 max/min 并列与惩罚项尖点

    Returns:
        tuple: (LossSpec, pred, gt)
    """
    lo, hi = alpha_range
    for _ in range(MAX_REROLLS):
        kind = kinds[int(rng.integers(len(kinds)))]
        alpha1 = float(rng.uniform(lo, hi))
        alpha2 = alpha1 if rng.random() < 0.5 else float(rng.uniform(lo, hi))
        spec = LossSpec(kind=kind, alpha1=alpha1, alpha2=alpha2)

        gt = _random_box(rng)
        if mode == 'overlapping':
            pred = Box(
                cx=gt.cx + float(rng.uniform(-0.5, 0.5)) * gt.w,
                cy=gt.cy + float(rng.uniform(-0.5, 0.5)) * gt.h,
                w=gt.w * float(rng.uniform(0.5, 1.6)),
                h=gt.h * float(rng.uniform(0.5, 1.6)),
            )
        else:
            w = float(rng.uniform(0.05, 0.4))
            h = float(rng.uniform(0.05, 0.4))
            sign = 1.0 if rng.random() < 0.5 else -1.0
            gap = float(rng.uniform(0.02, 0.2))
            pred = Box(
                cx=gt.cx + sign * (gt.w / 2.0 + w / 2.0 + gap),
                cy=gt.cy + float(rng.uniform(-0.3, 0.3)),
                w=w,
                h=h,
            )
        if _acceptable(spec, pred, gt, mode, tie_margin):
            return spec, pred, gt
    raise GradientCheckError("无法采样到满足条件的样本")


def _random_box(rng: np.random.Generator) -> Box:
    w = float(rng.uniform(0.1, 0.5))
    h = float(rng.uniform(0.1, 0.5))
    return Box(
        cx=float(rng.uniform(w / 2.0, 1.0 - w / 2.0)),
        cy=float(rng.uniform(h / 2.0, 1.0 - h / 2.0)),
        w=w,
        h=h,
    )


def near_tie(pred: Box, gt: Box, margin: float) -> bool:
    """任意一对边（同侧或异侧）的间距小于 margin 时视为并列"""
    px1, py1, px2, py2 = pred.corners
    gx1, gy1, gx2, gy2 = gt.corners
    pairs = [
        (px1, gx1), (px2, gx2), (px1, gx2), (px2, gx1),
        (py1, gy1), (py2, gy2), (py1, gy2), (py2, gy1),
    ]
    return any(abs(a - b) < margin for a, b in pairs)


def _acceptable(spec: LossSpec, pred: Box, gt: Box, mode: str, margin: float) -> bool:
    if near_tie(pred, gt, margin):
        return False
    summary = summarize(pred, gt)
    if mode == 'overlapping' and summary.iou < MIN_SAMPLE_IOU:
        return False
    if mode == 'disjoint' and summary.iou > 0.0:
        return False

    bases = []
    if spec.kind == LossKind.ALPHA_GIOU:
        bases.append(summary.enclosure_excess)
    elif spec.kind == LossKind.ALPHA_DIOU:
        bases.append(summary.distance_ratio)
    elif spec.kind == LossKind.ALPHA_CIOU:
        bases.append(summary.distance_ratio)
        bases.append(ciou_beta(summary) * summary.v)
    return all(b == 0.0 or b >= PENALTY_MARGIN for b in bases)
