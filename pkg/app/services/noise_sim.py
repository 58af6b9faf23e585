#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
标注噪声模拟服务
对归一化真值框施加均匀扰动并截断到图像范围，统计噪声标注与干净标注的平均 IoU
"""
import os
import sys
from dataclasses import replace
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.models.box_models import Box
from app.models.detection_models import DatasetBundle, GroundTruth, Identifier
from app.models.run_models import NoiseConfig
from app.services.geometry import clamp_to_bounds, iou
from app.utils.exceptions import DatasetError
from app.utils.logger import get_logger, log_function_call

logger = get_logger('noise_sim', category='business')

Annotations = Union[Mapping[Identifier, Sequence[GroundTruth]], Sequence[GroundTruth]]


def perturb(box: Box, cfg: NoiseConfig, draw: Sequence[float]) -> Box:
    """
    扰动单个边界框

    draw 为 [−1,1] 内的 4 个均匀样本，顺序 (u_cx, u_w, u_cy, u_h)：
    cx' = cx + u₁·ηw, w' = w + u₂·ηw, cy' = cy + u₃·ηh, h' = h + u₄·ηh，
    随后截断到图像范围（先宽高后中心）。

    Args:
        box: 满足边界条件的归一化边界框
        cfg: 噪声配置
        draw: 4 个均匀样本

    Returns:
        Box: 满足边界条件的扰动后边界框
    """
    if len(draw) != 4:
        raise DatasetError(f"扰动样本必须为 4 个: {len(draw)}")
    u1, u2, u3, u4 = (float(u) for u in draw)
    if any(abs(u) > 1.0 for u in (u1, u2, u3, u4)):
        raise DatasetError(f"扰动样本必须在 [-1,1] 范围内: {list(draw)}")

    eta = cfg.eta
    if eta == 0.0:
        return box
    noisy = Box(
        cx=box.cx + u1 * eta * box.w,
        cy=box.cy + u3 * eta * box.h,
        w=box.w + u2 * eta * box.w,
        h=box.h + u4 * eta * box.h,
    )
    return clamp_to_bounds(noisy)


def _flatten(annotations: Annotations) -> List[GroundTruth]:
    if isinstance(annotations, Mapping):
        return [gt for gts in annotations.values() for gt in gts]
    return list(annotations)


@log_function_call
def degrade_dataset(annotations: Annotations, cfg: NoiseConfig) -> Tuple[Annotations, float]:
    """
    对整个数据集施加标注噪声

    所有框按标注顺序从同一个 PCG64 随机流（种子 cfg.seed）依次取 4 个样本，
    输出与输入结构一致（按 image_id 分组的字典或真值列表）。

    Args:
        annotations: image_id → 真值列表，或真值列表
        cfg: 噪声配置

    Returns:
        tuple: (噪声标注, 噪声框与干净框的平均 IoU)
    """
    flat = _flatten(annotations)
    if not flat:
        raise DatasetError("数据集为空，无法施加噪声")
    infeasible = [gt for gt in flat if not gt.box.within_bounds()]
    if infeasible:
        raise DatasetError(f"有 {len(infeasible)} 个真值框超出图像范围")

    rng = np.random.default_rng(cfg.seed)
    draws = rng.uniform(-1.0, 1.0, size=(len(flat), 4))
    noisy_flat = [replace(gt, box=perturb(gt.box, cfg, draw)) for gt, draw in zip(flat, draws)]
    mean_iou = float(np.mean([iou(n.box, c.box) for n, c in zip(noisy_flat, flat)]))

    logger.info(f"噪声模拟完成: eta={cfg.eta:g}, seed={cfg.seed}, 框数={len(flat)}, 平均IoU={mean_iou:.4f}")

    if isinstance(annotations, Mapping):
        noisy: Dict[Identifier, List[GroundTruth]] = {}
        it = iter(noisy_flat)
        for image_id, gts in annotations.items():
            noisy[image_id] = [next(it) for _ in gts]
        return noisy, mean_iou
    return noisy_flat, mean_iou


def degrade_bundle(bundle: DatasetBundle, cfg: NoiseConfig) -> Tuple[DatasetBundle, float]:
    """对 DatasetBundle 的真值施加噪声，图像与类别信息保持不变"""
    noisy_gts, mean_iou = degrade_dataset(bundle.gts, cfg)
    return replace(bundle, gts=noisy_gts, dets=None, clamped=0, dropped=0), mean_iou


def eta_sweep(annotations: Annotations, etas: Iterable[float],
              seeds: Iterable[int] = (0,)) -> List[Dict[str, Any]]:
    """
    多个噪声率、多个种子下的平均 IoU

    Returns:
        list: 每个 eta 一行 {eta, seeds, mean_iou_per_seed, mean_iou}
    """
    seeds = list(seeds)
    if not seeds:
        raise DatasetError("种子列表不能为空")
    rows = []
    for eta in etas:
        per_seed = [degrade_dataset(annotations, NoiseConfig(eta=float(eta), seed=s))[1] for s in seeds]
        rows.append({
            'eta': float(eta),
            'seeds': seeds,
            'mean_iou_per_seed': per_seed,
            'mean_iou': float(np.mean(per_seed)),
        })
    return rows
