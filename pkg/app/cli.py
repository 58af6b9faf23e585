#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
命令行入口
子命令: loss-curve, check-grad, regress, perturb, eval

退出码: 0 成功；1 业务错误（数据、配置、梯度检验未通过）；2 用法错误
"""
import argparse
import os
import sys
from typing import Callable, Dict, List, Optional

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.models.box_models import Box
from app.models.loss_models import LossKind
from app.models.run_models import NoiseConfig
from app.services import report_service
from app.services.alpha_losses import check_alpha_range, curve_samples
from app.services.annotation_io import (
    annotations_to_dict, load_annotations, load_detections, save_annotations
)
from app.services.bbox_regression import compare_alphas, summarize_runs, trajectories_to_rows
from app.services.config_manager import (
    get_float, get_int, get_section, load_config_file, parse_threshold_range, validate_config
)
from app.services.detection_eval import evaluate
from app.services.grad_check import sweep_check
from app.services.logger_service import init_logging
from app.services.noise_sim import degrade_bundle, eta_sweep
from app.utils.exceptions import AlphaIoUError, ConfigError
from app.utils.logger import get_logger

logger = get_logger('cli', category='business')
error_logger = get_logger('cli', category='error')


def _float_list(text: str) -> List[float]:
    try:
        values = [float(p) for p in text.split(',') if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"需要逗号分隔的数字列表: {text}")
    if not values:
        raise argparse.ArgumentTypeError("列表不能为空")
    return values


def _int_list(text: str) -> List[int]:
    try:
        values = [int(p) for p in text.split(',') if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"需要逗号分隔的整数列表: {text}")
    if not values:
        raise argparse.ArgumentTypeError("列表不能为空")
    return values


def _box(text: str) -> Box:
    values = _float_list(text)
    if len(values) != 4:
        raise argparse.ArgumentTypeError(f"边界框格式为 cx,cy,w,h: {text}")
    try:
        return Box.from_array(values)
    except AlphaIoUError as e:
        raise argparse.ArgumentTypeError(str(e))


def _kind(text: str) -> LossKind:
    try:
        return LossKind.parse(text)
    except AlphaIoUError as e:
        raise argparse.ArgumentTypeError(str(e))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='alpha-iou', description="α-IoU 边界框回归损失工具")
    parser.add_argument("-c", "--config", default=None, help="配置文件路径 (默认: app/config/alpha_iou_config.ini)")
    parser.add_argument("-d", "--debug", action="store_true", help="启用调试日志")
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    p = sub.add_parser('loss-curve', help="输出损失与梯度幅值随 IoU 变化的曲线 CSV")
    p.add_argument("--kind", type=_kind, default=LossKind.ALPHA_IOU, help="损失类型 (默认: alpha_iou)")
    p.add_argument("--alphas", type=_float_list, default=[0.5, 1.0, 2.0, 3.0], help="α 列表，逗号分隔")
    p.add_argument("--points", type=int, default=101, help="IoU 采样点数 (默认: 101)")
    p.add_argument("--box-cox", action="store_true", help="使用 (1−IoU^α)/α 形式")
    p.add_argument("--out", default=None, help="CSV 输出路径 (默认: 标准输出)")
    p.add_argument("--plot", default=None, help="曲线图输出路径 (.png)")

    p = sub.add_parser('check-grad', help="有限差分检验解析梯度，输出 JSON 报告")
    p.add_argument("--n", type=int, default=None, help="随机样本数")
    p.add_argument("--seed", type=int, default=None, help="随机种子")
    p.add_argument("--kinds", default=None, help="损失类型列表，逗号分隔 (默认: 全部)")
    p.add_argument("--mode", choices=['overlapping', 'disjoint'], default='overlapping', help="框对采样模式")
    p.add_argument("--alpha-min", type=float, default=0.5, help="α 采样下限 (默认: 0.5)")
    p.add_argument("--alpha-max", type=float, default=5.0, help="α 采样上限 (默认: 5)")
    p.add_argument("--step", type=float, default=None, help="差分步长")
    p.add_argument("--rel-tol", type=float, default=None, help="最大相对误差容限")
    p.add_argument("--out", default=None, help="JSON 输出路径 (默认: 标准输出)")

    p = sub.add_parser('regress', help="梯度下降回归模拟，输出轨迹 CSV")
    p.add_argument("--kind", type=_kind, default=LossKind.ALPHA_IOU, help="损失类型 (默认: alpha_iou)")
    p.add_argument("--alphas", type=_float_list, default=[1.0, 3.0], help="α 列表，逗号分隔")
    p.add_argument("--alpha2", type=float, default=None, help="惩罚项幂次 (默认: 与 α 相同)")
    p.add_argument("--box-cox", action="store_true", help="使用 (1−IoU^α)/α 形式")
    p.add_argument("--init", type=_box, required=True, help="初始预测框 cx,cy,w,h")
    p.add_argument("--gt", type=_box, required=True, help="真值框 cx,cy,w,h")
    p.add_argument("--lr", type=float, default=None, help="学习率")
    p.add_argument("--steps", type=int, default=None, help="迭代步数")
    p.add_argument("--converge-iou", type=float, default=None, help="收敛 IoU 阈值")
    p.add_argument("--workers", type=int, default=None, help="并行线程数")
    p.add_argument("--out", default=None, help="轨迹 CSV 输出路径 (默认: 标准输出)")
    p.add_argument("--summary", default=None, help="各 α 汇总 JSON 输出路径")
    p.add_argument("--plot", default=None, help="轨迹图输出路径 (.png)")

    p = sub.add_parser('perturb', help="对标注施加均匀噪声")
    p.add_argument("--eta", type=_float_list, default=None, help="噪声率，可为逗号分隔的列表")
    p.add_argument("--seed", type=int, default=None, help="随机种子")
    p.add_argument("--seeds", type=_int_list, default=None, help="多个随机种子（输出各 η 的平均 IoU 汇总）")
    p.add_argument("--in", dest='input', required=True, help="输入标注文件 (COCO JSON)")
    p.add_argument("--out", default=None, help="噪声标注输出路径；汇总模式下为汇总 JSON 路径")

    p = sub.add_parser('eval', help="检测评估，输出 JSON 报告")
    p.add_argument("--gt", required=True, help="真值标注文件 (COCO JSON)")
    p.add_argument("--dets", required=True, help="检测结果文件 (COCO 结果 JSON)")
    p.add_argument("--thresholds", default=None, help="IoU 阈值 start:stop:step 或逗号列表")
    p.add_argument("--nms-iou", type=float, default=None, help="NMS 阈值")
    p.add_argument("--out", default=None, help="报告 JSON 输出路径 (默认: 标准输出)")
    p.add_argument("--histogram", default=None, help="IoU 直方图 CSV 输出路径")
    p.add_argument("--xlsx", default=None, help="Excel 报表输出路径")
    p.add_argument("--plot", default=None, help="IoU 直方图输出路径 (.png)")

    return parser


def _pick(value, section: Dict[str, str], key: str, getter: Callable):
    """命令行参数优先，其次配置文件/默认值"""
    return value if value is not None else getter(section, key)


def _alpha_bounds(config) -> Callable[[float], float]:
    losses = get_section('losses', config)
    alpha_min = get_float(losses, 'alpha_min')
    alpha_max = get_float(losses, 'alpha_max')
    return lambda a: check_alpha_range(a, alpha_min, alpha_max)


def _log_eps(config) -> float:
    return get_float(get_section('losses', config), 'log_eps')


def _cmd_loss_curve(args, config) -> int:
    check = _alpha_bounds(config)
    alphas = [check(a) for a in args.alphas]
    rows = curve_samples(args.kind, alphas, args.points, box_cox=args.box_cox, log_eps=_log_eps(config))
    report_service.write_csv(rows, report_service.CURVE_FIELDS, args.out)
    if args.plot:
        from app.services.chart_service import plot_loss_curves
        plot_loss_curves(rows, args.plot, title=args.kind.value)
    return 0


def _cmd_check_grad(args, config) -> int:
    section = get_section('grad_check', config)
    n_random = _pick(args.n, section, 'n_random', get_int)
    seed = _pick(args.seed, section, 'seed', get_int)
    step = _pick(args.step, section, 'step', get_float)
    rel_tol = _pick(args.rel_tol, section, 'rel_tol', get_float)
    tie_margin = get_float(section, 'tie_margin')
    kinds = [k for k in args.kinds.split(',') if k.strip()] if args.kinds else None

    report = sweep_check(n_random, seed, kinds=kinds, alpha_range=(args.alpha_min, args.alpha_max),
                         mode=args.mode, step=step, tie_margin=tie_margin)
    report_service.write_json(report, args.out)
    if report.max_rel_err > rel_tol:
        error_logger.error(f"梯度检验未通过: 最大相对误差 {report.max_rel_err:.3e} > {rel_tol:g}")
        print(f"错误: 梯度检验未通过 (最大相对误差 {report.max_rel_err:.3e} > {rel_tol:g})", file=sys.stderr)
        return 1
    return 0


def _cmd_regress(args, config) -> int:
    section = get_section('regression', config)
    check = _alpha_bounds(config)
    alphas = [check(a) for a in args.alphas]
    alpha2 = check(args.alpha2) if args.alpha2 is not None else None

    runs = compare_alphas(
        args.kind, alphas, args.init, args.gt,
        lr=_pick(args.lr, section, 'lr', get_float),
        steps=_pick(args.steps, section, 'steps', get_int),
        alpha2=alpha2,
        box_cox=args.box_cox,
        converge_iou=_pick(args.converge_iou, section, 'converge_iou', get_float),
        workers=_pick(args.workers, section, 'workers', get_int),
        log_eps=_log_eps(config),
    )
    report_service.write_csv(trajectories_to_rows(runs), report_service.TRAJECTORY_FIELDS, args.out)
    if args.summary:
        report_service.write_json(summarize_runs(runs), args.summary)
    if args.plot:
        from app.services.chart_service import plot_trajectories
        plot_trajectories(runs, args.plot)
    return 0


def _cmd_perturb(args, config) -> int:
    section = get_section('noise', config)
    etas = args.eta if args.eta is not None else [get_float(section, 'eta')]
    bundle = load_annotations(args.input)

    if len(etas) == 1 and args.seeds is None:
        cfg = NoiseConfig(eta=etas[0], seed=_pick(args.seed, section, 'seed', get_int))
        noisy, mean_iou = degrade_bundle(bundle, cfg)
        if args.out is None:
            report_service.write_json(annotations_to_dict(noisy))
        else:
            save_annotations(noisy, args.out)
            report_service.write_json({'eta': cfg.eta, 'seed': cfg.seed, 'boxes': len(noisy.gts),
                                       'mean_iou': mean_iou})
        return 0

    seeds = args.seeds if args.seeds is not None else [_pick(args.seed, section, 'seed', get_int)]
    rows = eta_sweep(bundle.gts, etas, seeds)
    report_service.write_json(rows, args.out)
    return 0


def _cmd_eval(args, config) -> int:
    section = get_section('eval', config)
    thresholds = parse_threshold_range(args.thresholds or section['thresholds'])
    buckets = parse_threshold_range(section['histogram_buckets'])
    nms_iou = _pick(args.nms_iou, section, 'nms_iou', get_float)

    bundle = load_annotations(args.gt)
    bundle = load_detections(args.dets, bundle)
    report = evaluate(bundle.dets, bundle.gts, thresholds, nms_iou=nms_iou, histogram_buckets=buckets)

    report_service.write_json(report, args.out)
    if args.histogram:
        report_service.write_csv(report_service.histogram_rows(report), report_service.HISTOGRAM_FIELDS,
                                 args.histogram)
    if args.xlsx:
        report_service.export_eval_excel(report, args.xlsx)
    if args.plot:
        from app.services.chart_service import plot_iou_histogram
        plot_iou_histogram(report, args.plot)
    return 0


COMMANDS = {
    'loss-curve': _cmd_loss_curve,
    'check-grad': _cmd_check_grad,
    'regress': _cmd_regress,
    'perturb': _cmd_perturb,
    'eval': _cmd_eval,
}


def _setup(args) -> Dict[str, Dict[str, str]]:
    """加载并校验配置，初始化日志"""
    config = load_config_file(args.config)
    is_valid, message = validate_config(config)
    if not is_valid:
        raise ConfigError(f"配置无效: {message}")
    logging_config = get_section('logging', config)
    if args.debug:
        logging_config['log_level'] = 'DEBUG'
    init_logging(logging_config)
    return config


def main(argv: Optional[List[str]] = None) -> int:
    """
    解析参数并执行子命令

    Args:
        argv: 参数列表（默认取 sys.argv[1:]）

    Returns:
        int: 退出码
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code is None else int(e.code)

    try:
        config = _setup(args)
        logger.debug(f"执行子命令: {args.command}")
        return COMMANDS[args.command](args, config)
    except AlphaIoUError as e:
        error_logger.error(f"{args.command} 失败: {e}")
        print(f"错误: {e}", file=sys.stderr)
        return 1


cli_dispatch = main


if __name__ == '__main__':
    sys.exit(main())
