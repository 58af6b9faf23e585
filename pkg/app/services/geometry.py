#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
几何计算服务
交并比、最小外接框、中心距离、外接框对角线、宽高比一致性项及其解析梯度
"""
import math
import os
import sys
from typing import Tuple

import numpy as np

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.models.box_models import Box, GeometrySummary, GeometryGrad, MIN_EXTENT

# 宽高比项系数 4/π²
V_COEF = 4.0 / (math.pi ** 2)


def iou(a: Box, b: Box) -> float:
    """
    计算两个框的交并比

    Args:
        a: 边界框
        b: 边界框

    Returns:
        float: |a∩b| / |a∪b|，范围 [0,1]
    """
    ax1, ay1, ax2, ay2 = a.corners
    bx1, by1, bx2, by2 = b.corners
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = _corner_area(a.corners) + _corner_area(b.corners) - inter
    return min(1.0, inter / union)


def _corner_area(corners) -> float:
    """由角点计算面积，与交集使用同一套舍入，重合框的 IoU 恰为 1"""
    x1, y1, x2, y2 = corners
    return (x2 - x1) * (y2 - y1)


def _aspect_delta(pred: Box, gt: Box) -> float:
    return math.atan(gt.w / gt.h) - math.atan(pred.w / pred.h)


def aspect_term(pred: Box, gt: Box) -> float:
    """宽高比一致性项 v = (4/π²)(arctan(w^gt/h^gt) − arctan(w/h))²"""
    delta = _aspect_delta(pred, gt)
    return V_COEF * delta * delta


def summarize(pred: Box, gt: Box) -> GeometrySummary:
    """
    计算损失函数所需的全部几何量

    Args:
        pred: 预测框
        gt: 真值框

    Returns:
        GeometrySummary: iou、外接框冗余比例、中心距离平方、对角线平方、宽高比项
    """
    summary, _ = _summarize(pred, gt, with_grad=False)
    return summary


def summarize_with_grad(pred: Box, gt: Box) -> Tuple[GeometrySummary, GeometryGrad]:
    """
    计算几何量及其对预测框 (cx, cy, w, h) 的偏导数

    max/min 组合处不可导，取预测框一侧的次梯度；两框重合时 IoU 的梯度取 0。

    Returns:
        tuple: (GeometrySummary, GeometryGrad)
    """
    return _summarize(pred, gt, with_grad=True)


def _summarize(pred: Box, gt: Box, with_grad: bool):
    px1, py1, px2, py2 = pred.corners
    gx1, gy1, gx2, gy2 = gt.corners

    # 交集
    iw = min(px2, gx2) - max(px1, gx1)
    ih = min(py2, gy2) - max(py1, gy1)
    overlap = iw > 0.0 and ih > 0.0
    inter = iw * ih if overlap else 0.0
    union = _corner_area((px1, py1, px2, py2)) + _corner_area((gx1, gy1, gx2, gy2)) - inter
    iou_value = min(1.0, inter / union)

    # 最小外接框
    cw = max(px2, gx2) - min(px1, gx1)
    ch = max(py2, gy2) - min(py1, gy1)
    c_area = cw * ch
    excess = max(0.0, (c_area - union) / c_area)
    diag_sq = cw * cw + ch * ch

    dx = pred.cx - gt.cx
    dy = pred.cy - gt.cy
    center_dist_sq = dx * dx + dy * dy

    v = aspect_term(pred, gt)

    summary = GeometrySummary(
        iou=iou_value,
        enclosure_excess=excess,
        center_dist_sq=center_dist_sq,
        diag_sq=diag_sq,
        v=v,
    )
    if not with_grad:
        return summary, None

    # 角点顺序 (x1, y1, x2, y2)
    d_inter = np.zeros(4)
    if overlap:
        if px1 >= gx1:
            d_inter[0] = -ih
        if py1 >= gy1:
            d_inter[1] = -iw
        if px2 <= gx2:
            d_inter[2] = ih
        if py2 <= gy2:
            d_inter[3] = iw
    d_area = np.array([-pred.h, -pred.w, pred.h, pred.w])
    d_union = d_area - d_inter
    if iou_value >= 1.0:
        # 重合时 IoU 取得最大值，次梯度取 0
        d_iou = np.zeros(4)
    else:
        d_iou = (d_inter * union - inter * d_union) / (union * union)

    d_cw = np.array([-1.0 if px1 <= gx1 else 0.0, 0.0, 1.0 if px2 >= gx2 else 0.0, 0.0])
    d_ch = np.array([0.0, -1.0 if py1 <= gy1 else 0.0, 0.0, 1.0 if py2 >= gy2 else 0.0])
    d_c_area = d_cw * ch + cw * d_ch
    d_excess = -(d_union * c_area - union * d_c_area) / (c_area * c_area)
    d_diag = 2.0 * cw * d_cw + 2.0 * ch * d_ch

    # 中心距离与宽高比项直接在中心坐标下求导
    d_center = np.array([2.0 * dx, 2.0 * dy, 0.0, 0.0])
    delta = _aspect_delta(pred, gt)
    norm_sq = pred.w * pred.w + pred.h * pred.h
    d_v = np.array([
        0.0,
        0.0,
        -2.0 * V_COEF * delta * pred.h / norm_sq,
        2.0 * V_COEF * delta * pred.w / norm_sq,
    ])

    grad = GeometryGrad(
        iou=corner_to_center_grad(d_iou),
        enclosure_excess=corner_to_center_grad(d_excess),
        center_dist_sq=d_center,
        diag_sq=corner_to_center_grad(d_diag),
        v=d_v,
    )
    return summary, grad


def corner_to_center_grad(g: np.ndarray) -> np.ndarray:
    """
    将对角点 (x1, y1, x2, y2) 的梯度换算为对 (cx, cy, w, h) 的梯度

    x1 = cx − w/2, x2 = cx + w/2
    """
    return np.array([
        g[0] + g[2],
        g[1] + g[3],
        (g[2] - g[0]) / 2.0,
        (g[3] - g[1]) / 2.0,
    ])


def clamp_to_bounds(b: Box, eps: float = MIN_EXTENT) -> Box:
    """
    将边界框约束到图像范围内

    先截断宽高到 (eps, 1−eps)，再把中心截断到 [w/2, 1−w/2] 与 [h/2, 1−h/2]，
    宽高确定后中心的可行区间总是非空。

    Args:
        b: 宽高为正但可能越界的边界框
        eps: 最小宽高

    Returns:
        Box: 满足边界条件的边界框
    """
    w = min(max(b.w, eps), 1.0 - eps)
    h = min(max(b.h, eps), 1.0 - eps)
    cx = min(max(b.cx, w / 2.0), 1.0 - w / 2.0)
    cy = min(max(b.cy, h / 2.0), 1.0 - h / 2.0)
    if (cx, cy, w, h) == (b.cx, b.cy, b.w, b.h):
        return b
    return Box(cx, cy, w, h)
