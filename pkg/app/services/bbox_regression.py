#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
边界框回归模拟服务
在 (cx, cy, w, h) 上做固定步长梯度下降，记录各 α 下的 IoU 轨迹
"""
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.models.box_models import Box, MIN_EXTENT
from app.models.loss_models import LOG_EPS, LossKind, LossSpec
from app.models.run_models import RegressionRun, TrajectoryPoint
from app.services.alpha_losses import loss_eval
from app.services.geometry import clamp_to_bounds, iou
from app.utils.exceptions import LossSpecError, RegressionError
from app.utils.logger import get_logger

DEFAULT_LR = 0.01
DEFAULT_STEPS = 2000
DEFAULT_CONVERGE_IOU = 0.99

logger = get_logger('bbox_regression', category='business')


def regress(spec: LossSpec, init: Box, gt: Box, lr: float = DEFAULT_LR, steps: int = DEFAULT_STEPS,
            converge_iou: float = DEFAULT_CONVERGE_IOU) -> RegressionRun:
    """
    用梯度下降把预测框拉向真值框

    每一步: box ← box − lr·∇L，宽高低于 ε 时取 ε，再截断到图像范围；
    发生下限截断或边界截断的步号记入 clamp_events。
    不相交初值下 AlphaIoU 梯度为 0，轨迹停留在 IoU=0。

    Args:
        spec: 损失规格
        init: 初始预测框
        gt: 真值框
        lr: 学习率，> 0
        steps: 迭代步数，≥ 0
        converge_iou: 记为收敛的 IoU 阈值

    Returns:
        RegressionRun: 含初始状态的 steps+1 个轨迹点
    """
    if not (lr > 0 and math.isfinite(lr)):
        raise RegressionError(f"学习率必须为正数: {lr}")
    if steps < 0:
        raise RegressionError(f"迭代步数不能为负: {steps}")

    run = RegressionRun(spec=spec, lr=lr, steps=steps)
    box = init
    current = loss_eval(spec, box, gt)
    current_iou = iou(box, gt)
    run.trajectory.append(TrajectoryPoint(0, current_iou, current.value, current.grad_norm))
    if current_iou >= converge_iou:
        run.converged_at = 0

    for t in range(1, steps + 1):
        grad = current.grad_pred
        if not np.all(np.isfinite(grad)):
            raise RegressionError(f"第{t}步梯度出现非有限值: {spec.label()}")
        params = box.as_array() - lr * grad

        floored = bool(params[2] < MIN_EXTENT or params[3] < MIN_EXTENT)
        params[2:] = np.maximum(params[2:], MIN_EXTENT)
        stepped = Box.from_array(params)
        box = clamp_to_bounds(stepped)
        if floored or box is not stepped:
            run.clamp_events.append(t)

        current = loss_eval(spec, box, gt)
        current_iou = iou(box, gt)
        run.trajectory.append(TrajectoryPoint(t, current_iou, current.value, current.grad_norm))
        if run.converged_at is None and current_iou >= converge_iou:
            run.converged_at = t

        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(f"{spec.label()} 第{t}步: iou={current_iou:.6f} loss={current.value:.6f}")

    run.final_box = box
    logger.info(
        f"回归完成 {spec.label()}: lr={lr:g}, steps={steps}, 最终IoU={current_iou:.4f}, "
        f"收敛步={run.converged_at}, 截断次数={len(run.clamp_events)}"
    )
    return run


def compare_alphas(kind: Union[LossKind, str], alphas: Iterable[float], init: Box, gt: Box,
                   lr: float = DEFAULT_LR, steps: int = DEFAULT_STEPS,
                   alpha2: Optional[float] = None, box_cox: bool = False,
                   converge_iou: float = DEFAULT_CONVERGE_IOU, workers: int = 1,
                   log_eps: float = LOG_EPS) -> List[RegressionRun]:
    """
    相同初值、学习率与步数下比较多个 α

    Args:
        kind: 损失类型
        alphas: α₁ 列表，均 > 0
        init: 初始预测框
        gt: 真值框
        lr: 学习率
        steps: 迭代步数
        alpha2: 惩罚项幂次（None 表示与 α₁ 相同）
        box_cox: 是否使用 Box-Cox 缩放
        converge_iou: 收敛阈值
        workers: 并行线程数
        log_eps: LogIoU 的截断下限

    Returns:
        list: 与 alphas 顺序一致的 RegressionRun 列表
    """
    alpha_list = [float(a) for a in alphas]
    if not alpha_list:
        raise LossSpecError("alpha 列表不能为空")
    specs = [LossSpec(kind=kind, alpha1=a, alpha2=alpha2, box_cox=box_cox, log_eps=log_eps) for a in alpha_list]

    def run_one(spec: LossSpec) -> RegressionRun:
        return regress(spec, init, gt, lr=lr, steps=steps, converge_iou=converge_iou)

    if workers > 1 and len(specs) > 1:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix='RegressionWorker') as executor:
            return list(executor.map(run_one, specs))
    return [run_one(spec) for spec in specs]


def trajectories_to_rows(runs: Iterable[RegressionRun]) -> List[Dict[str, Any]]:
    """多条轨迹展开为 step,alpha,iou,loss,grad_norm 行"""
    rows: List[Dict[str, Any]] = []
    for run in runs:
        rows.extend(run.to_rows())
    return rows


def summarize_runs(runs: Iterable[RegressionRun], thresholds: Iterable[float] = (0.95, 0.99)) -> List[Dict[str, Any]]:
    """
    每个 α 的首次达到各 IoU 阈值的步号与最终 IoU
    """
    thresholds = list(thresholds)
    summary = []
    for run in runs:
        row = {
            'alpha': run.spec.alpha1,
            'alpha2': run.spec.alpha2,
            'final_iou': run.trajectory[-1].iou,
            'final_loss': run.trajectory[-1].loss,
            'converged_at': run.converged_at,
            'clamp_events': len(run.clamp_events),
        }
        for thr in thresholds:
            row[f'steps_to_{thr:g}'] = run.first_step_reaching(thr)
        summary.append(row)
    return summary
