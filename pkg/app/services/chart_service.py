#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
图表服务
使用matplotlib生成损失曲线、匹配IoU直方图与回归轨迹图
"""
import os
import sys
from typing import Dict, Iterable, List, Sequence

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.models.detection_models import EvalReport
from app.models.run_models import RegressionRun
from app.utils.exceptions import ReportError
from app.utils.logger import get_logger

logger = get_logger('chart_service', category='business')


def _pyplot():
    """导入 pyplot（非交互式后端）"""
    try:
        import matplotlib
        matplotlib.use('Agg')  # 使用非交互式后端
        import matplotlib.pyplot as plt
    except ImportError:
        raise ReportError("matplotlib未安装，无法生成图表")
    plt.rcParams['font.sans-serif'] = ['DejaVu Sans', 'Arial']
    plt.rcParams['axes.unicode_minus'] = False
    return plt


def _save(fig, plt, path: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fig.tight_layout()
        fig.savefig(path, dpi=150, bbox_inches='tight')
    except OSError as e:
        raise ReportError(f"保存图表失败 {path}: {e}")
    finally:
        plt.close(fig)
    logger.info(f"图表已保存: {path}")
    return path


def plot_loss_curves(samples: Sequence[Dict[str, float]], path: str, title: str = 'alpha-IoU') -> str:
    """
    损失值与梯度幅值随 IoU 的变化（每个 α 一条曲线）

    Args:
        samples: curve_samples 的输出
        path: 输出图片路径
        title: 图标题

    Returns:
        str: 图片路径
    """
    plt = _pyplot()
    by_alpha: Dict[float, List[Dict[str, float]]] = {}
    for row in samples:
        by_alpha.setdefault(row['alpha'], []).append(row)

    fig, (ax_loss, ax_grad) = plt.subplots(1, 2, figsize=(12, 5))
    colors = plt.cm.viridis([i / max(len(by_alpha) - 1, 1) for i in range(len(by_alpha))])
    for color, (alpha, rows) in zip(colors, sorted(by_alpha.items())):
        label = 'log' if alpha == 0.0 else f'alpha={alpha:g}'
        ious = [r['iou'] for r in rows]
        ax_loss.plot(ious, [r['loss'] for r in rows], label=label, color=color, linewidth=2)
        # 梯度在 IoU=0 处可能发散，跳过非有限值
        finite = [(r['iou'], r['grad_mag']) for r in rows if r['grad_mag'] != float('inf')]
        ax_grad.plot([p[0] for p in finite], [p[1] for p in finite], label=label, color=color, linewidth=2)

    ax_loss.set_xlabel('IoU', fontsize=12)
    ax_loss.set_ylabel('loss', fontsize=12)
    ax_loss.set_title(f'{title} loss', fontsize=14, fontweight='bold')
    ax_grad.set_xlabel('IoU', fontsize=12)
    ax_grad.set_ylabel('|dL/dIoU|', fontsize=12)
    ax_grad.set_title(f'{title} gradient', fontsize=14, fontweight='bold')
    # α<1 时梯度在 IoU→0 处发散，纵轴上限取 IoU=1 处的最大梯度
    top = max([r['grad_mag'] for r in samples if r['iou'] == 1.0] + [1.0])
    ax_grad.set_ylim(0, 1.2 * top)
    for ax in (ax_loss, ax_grad):
        ax.legend(loc='best')
        ax.grid(True, alpha=0.3)
    return _save(fig, plt, path)


def plot_iou_histogram(report: EvalReport, path: str) -> str:
    """匹配检测的 IoU 分布（各桶为 IoU ≥ 阈值的嵌套计数）"""
    plt = _pyplot()
    buckets = sorted(report.iou_histogram)
    counts = [report.iou_histogram[b] for b in buckets]

    fig, ax = plt.subplots(figsize=(8, 5))
    bars = ax.bar([f'{b:.1f}' for b in buckets], counts, color='#3498db')
    for bar, value in zip(bars, counts):
        ax.text(bar.get_x() + bar.get_width() / 2, value, str(value), va='bottom', ha='center', fontsize=9)
    ax.set_xlabel('IoU >=', fontsize=12)
    ax.set_ylabel('matched detections', fontsize=12)
    ax.set_title(f'IoU distribution (mAP50:95 = {report.map_50_95:.3f})', fontsize=14, fontweight='bold')
    ax.grid(True, alpha=0.3, axis='y')
    return _save(fig, plt, path)


def plot_trajectories(runs: Iterable[RegressionRun], path: str) -> str:
    """回归过程中 IoU 随步数的变化（每个 α 一条曲线）"""
    plt = _pyplot()
    runs = list(runs)
    fig, ax = plt.subplots(figsize=(10, 5))
    for run in runs:
        ax.plot([p.step for p in run.trajectory], [p.iou for p in run.trajectory],
                label=run.spec.label(), linewidth=2)
    ax.set_xlabel('step', fontsize=12)
    ax.set_ylabel('IoU', fontsize=12)
    ax.set_ylim(0, 1.02)
    ax.set_title('bbox regression', fontsize=14, fontweight='bold')
    ax.legend(loc='lower right')
    ax.grid(True, alpha=0.3)
    return _save(fig, plt, path)

