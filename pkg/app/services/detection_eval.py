#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
检测评估服务
贪心 NMS、按 IoU 阈值匹配、101 点插值 AP、mAP50:95 / mAP75:95 与匹配 IoU 直方图
"""
import os
import sys
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.models.detection_models import Detection, EvalReport, GroundTruth
from app.services.geometry import iou
from app.utils.exceptions import DatasetError
from app.utils.logger import get_logger, log_function_call

STANDARD_THRESHOLDS = [round(0.5 + 0.05 * i, 10) for i in range(10)]
HIGH_THRESHOLDS = [t for t in STANDARD_THRESHOLDS if t >= 0.75]
HISTOGRAM_BUCKETS = [0.5, 0.6, 0.7, 0.8, 0.9]
DEFAULT_NMS_IOU = 0.5
# 召回率采样点 0, 0.01, ..., 1.00（i/100 与 tp/n_gt 同为正确舍入的商，可精确比较）
RECALL_GRID = np.arange(101) / 100.0
# 阈值比较容差
MATCH_TOL = 1e-12

logger = get_logger('detection_eval', category='business')


def _score_order(dets: Sequence[Detection]) -> List[int]:
    """按置信度降序的下标，置信度相同时原始顺序在前"""
    return sorted(range(len(dets)), key=lambda i: -dets[i].score)


def nms(dets: Sequence[Detection], iou_thresh: float = DEFAULT_NMS_IOU) -> List[Detection]:
    """
    贪心非极大值抑制（单张图像、单个类别）

    Args:
        dets: 检测结果
        iou_thresh: 抑制阈值，(0,1]；与已保留框 IoU 大于该值的检测被抑制

    Returns:
        list: 保留的检测，按置信度降序
    """
    if not (0.0 < iou_thresh <= 1.0):
        raise DatasetError(f"NMS 阈值必须在 (0,1] 范围内: {iou_thresh}")
    kept: List[Detection] = []
    for i in _score_order(dets):
        candidate = dets[i]
        if all(iou(candidate.box, k.box) <= iou_thresh for k in kept):
            kept.append(candidate)
    return kept


def match(dets: Sequence[Detection], gts: Sequence[GroundTruth],
          iou_threshold: float) -> Tuple[List[bool], List[Optional[float]]]:
    """
    贪心一对一匹配

    dets 需已按置信度降序排列。每个检测与同一图像、同一类别中尚未匹配且 IoU 最大的真值配对，
    IoU ≥ 阈值记为 TP，否则为 FP；每个真值最多匹配一次。

    Args:
        dets: 检测结果
        gts: 真值
        iou_threshold: 匹配阈值

    Returns:
        tuple: (每个检测的 TP 标志, TP 的匹配 IoU，FP 为 None)
    """
    pools: Dict[Tuple, List[int]] = {}
    for j, gt in enumerate(gts):
        pools.setdefault((gt.image_id, gt.category), []).append(j)
    matched = [False] * len(gts)

    flags: List[bool] = []
    matched_ious: List[Optional[float]] = []
    for det in dets:
        best_j = -1
        best_iou = -1.0
        for j in pools.get((det.image_id, det.category), []):
            if matched[j]:
                continue
            value = iou(det.box, gts[j].box)
            if value > best_iou:
                best_j, best_iou = j, value
        if best_j >= 0 and best_iou >= iou_threshold - MATCH_TOL:
            matched[best_j] = True
            flags.append(True)
            matched_ious.append(best_iou)
        else:
            flags.append(False)
            matched_ious.append(None)
    return flags, matched_ious


def average_precision(flags: Sequence[bool], scores: Sequence[float], n_gt: int) -> float:
    """
    101 点插值 AP

    检测按置信度降序（相同置信度保持原顺序）累计 TP/FP 得到 PR 曲线，
    每个召回率采样点 r 取召回率 ≥ r 的最大精度，再对 101 个点取平均。

    Args:
        flags: 每个检测的 TP 标志
        scores: 对应置信度
        n_gt: 真值数量，> 0

    Returns:
        float: AP ∈ [0,1]
    """
    if n_gt <= 0:
        raise DatasetError(f"真值数量为 {n_gt}，AP 无定义")
    if len(flags) != len(scores):
        raise DatasetError(f"TP 标志与置信度数量不一致: {len(flags)} != {len(scores)}")
    if not flags:
        return 0.0

    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind='stable')
    tp = np.asarray(flags, dtype=np.float64)[order]
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(1.0 - tp)
    recall = tp_cum / n_gt
    precision = tp_cum / (tp_cum + fp_cum)

    # 精度包络：每个位置之后的最大精度
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_GRID, side='left')
    sampled = np.zeros(len(RECALL_GRID))
    valid = idx < len(recall)
    sampled[valid] = envelope[idx[valid]]
    return float(np.mean(sampled))


def _normalize_thresholds(thresholds: Optional[Iterable[float]]) -> List[float]:
    values = set(STANDARD_THRESHOLDS)
    for t in thresholds or []:
        t = round(float(t), 10)
        if not (0.0 < t <= 1.0):
            raise DatasetError(f"IoU 阈值必须在 (0,1] 范围内: {t}")
        values.add(t)
    return sorted(values)


@log_function_call
def evaluate(dets: Sequence[Detection], gts: Sequence[GroundTruth],
             thresholds: Optional[Iterable[float]] = None, nms_iou: float = DEFAULT_NMS_IOU,
             histogram_buckets: Iterable[float] = HISTOGRAM_BUCKETS) -> EvalReport:
    """
    完整检测评估

    每个 (图像, 类别) 先做 NMS，然后在每个阈值下按类别匹配并计算 AP，
    对有真值的类别取平均。十个标准阈值 0.50..0.95 总会计算。

    Args:
        dets: 全部检测
        gts: 全部真值
        thresholds: 额外的 IoU 阈值
        nms_iou: NMS 阈值
        histogram_buckets: 直方图桶阈值

    Returns:
        EvalReport: 评估报告
    """
    threshold_list = _normalize_thresholds(thresholds)
    buckets = sorted(round(float(b), 10) for b in histogram_buckets)

    # NMS（按图像与类别分组，组内保持输入顺序）
    groups: Dict[Tuple, List[Detection]] = {}
    for det in dets:
        groups.setdefault((det.image_id, det.category), []).append(det)
    kept: List[Detection] = []
    for group in groups.values():
        kept.extend(nms(group, nms_iou))

    gts_by_cat: Dict = {}
    for gt in gts:
        gts_by_cat.setdefault(gt.category, []).append(gt)
    if not gts_by_cat:
        raise DatasetError("没有任何类别包含真值，AP 无定义")

    dets_by_cat: Dict = {}
    for det in kept:
        dets_by_cat.setdefault(det.category, []).append(det)
    for category, cat_dets in dets_by_cat.items():
        dets_by_cat[category] = [cat_dets[i] for i in _score_order(cat_dets)]

    ap_per_threshold: Dict[float, float] = {}
    for thr in threshold_list:
        aps = []
        for category, cat_gts in gts_by_cat.items():
            cat_dets = dets_by_cat.get(category, [])
            flags, _ = match(cat_dets, cat_gts, thr)
            aps.append(average_precision(flags, [d.score for d in cat_dets], len(cat_gts)))
        ap_per_threshold[thr] = sum(aps) / len(aps)

    matched_ious: List[float] = []
    for category, cat_gts in gts_by_cat.items():
        _, ious = match(dets_by_cat.get(category, []), cat_gts, 0.5)
        matched_ious.extend(v for v in ious if v is not None)
    histogram = {b: sum(1 for v in matched_ious if v >= b - MATCH_TOL) for b in buckets}

    map_50_95 = sum(ap_per_threshold[t] for t in STANDARD_THRESHOLDS) / len(STANDARD_THRESHOLDS)
    map_75_95 = sum(ap_per_threshold[t] for t in HIGH_THRESHOLDS) / len(HIGH_THRESHOLDS)

    report = EvalReport(
        ap_per_threshold=ap_per_threshold,
        map_50_95=map_50_95,
        map_75_95=map_75_95,
        iou_histogram=histogram,
        n_gt=len(gts),
        n_dets=len(kept),
        n_categories=len(gts_by_cat),
    )
    logger.info(
        f"评估完成: 真值 {len(gts)}, 检测 {len(dets)} (NMS 后 {len(kept)}), "
        f"mAP50:95={map_50_95:.4f}, mAP75:95={map_75_95:.4f}"
    )
    return report
