#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
配置文件管理工具
提供配置文件的读取、分段访问与校验功能
"""
import os
import sys
import configparser
from typing import Any, Dict, List, Optional, Tuple

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.utils.exceptions import ConfigError

SECTIONS = ['logging', 'losses', 'grad_check', 'regression', 'noise', 'eval']

# 硬编码默认值（优先级：命令行参数 > 配置文件 > 默认值）
DEFAULTS: Dict[str, Dict[str, str]] = {
    'logging': {
        'log_level': 'INFO',
        'log_format': 'text',
        'log_dir': './logs',
        'log_max_bytes': '10',
        'log_backup_count': '30',
        'log_rotation': 'size',
        'log_to_console': 'true',
        'log_to_file': 'false',
    },
    'losses': {
        'log_eps': '1e-7',
        'alpha_min': '0.1',
        'alpha_max': '10',
    },
    'grad_check': {
        'step': '1e-6',
        'tie_margin': '1e-4',
        'n_random': '1000',
        'seed': '0',
        'rel_tol': '1e-4',
    },
    'regression': {
        'lr': '0.01',
        'steps': '2000',
        'converge_iou': '0.99',
        'workers': '1',
    },
    'noise': {
        'eta': '0.1',
        'seed': '0',
    },
    'eval': {
        'nms_iou': '0.5',
        'thresholds': '0.5:0.95:0.05',
        'histogram_buckets': '0.5,0.6,0.7,0.8,0.9',
    },
}


def get_config_file_path() -> str:
    """
    获取配置文件路径，环境变量 ALPHA_IOU_CONFIG 优先
    """
    config_file = os.getenv("ALPHA_IOU_CONFIG")
    if not config_file:
        config_file = os.path.join(
            os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))),
            "app",
            "config",
            "alpha_iou_config.ini"
        )
    return config_file


def load_config_file(config_file_path: Optional[str] = None) -> Dict[str, Dict[str, str]]:
    """
    读取配置文件

    Args:
        config_file_path: 配置文件路径（如果为None，则使用默认路径）

    Returns:
        dict: {段名: {键: 值}}，文件不存在时各段为空字典
    """
    if config_file_path is None:
        config_file_path = get_config_file_path()

    sections: Dict[str, Dict[str, str]] = {name: {} for name in SECTIONS}
    if not os.path.exists(config_file_path):
        return sections

    config = configparser.ConfigParser(inline_comment_prefixes=('#', ';'))
    try:
        config.read(config_file_path, encoding='utf-8')
    except (configparser.Error, UnicodeDecodeError) as e:
        raise ConfigError(f"无法读取配置文件 {config_file_path}: {e}")

    for name in config.sections():
        sections[name] = dict(config[name])

    return sections


def get_section(name: str, config: Optional[Dict[str, Dict[str, str]]] = None) -> Dict[str, str]:
    """
    获取合并默认值之后的配置段

    Args:
        name: 段名
        config: 已加载的配置（如果为None，则从配置文件读取）

    Returns:
        dict: 配置段
    """
    if config is None:
        config = load_config_file()
    merged = dict(DEFAULTS.get(name, {}))
    merged.update(config.get(name, {}))
    # 环境变量 ALPHA_IOU_LOG 覆盖日志级别
    if name == 'logging' and os.getenv("ALPHA_IOU_LOG"):
        merged['log_level'] = os.getenv("ALPHA_IOU_LOG").strip().upper()
    return merged


def get_float(section: Dict[str, str], key: str) -> float:
    try:
        return float(section[key])
    except (KeyError, ValueError):
        raise ConfigError(f"配置项 {key} 必须是有效的数字: {section.get(key)}")


def get_int(section: Dict[str, str], key: str) -> int:
    try:
        return int(section[key])
    except (KeyError, ValueError):
        raise ConfigError(f"配置项 {key} 必须是有效的整数: {section.get(key)}")


def get_bool(section: Dict[str, Any], key: str, default: bool = False) -> bool:
    value = section.get(key)
    if value is None:
        return default
    return str(value).strip().lower() in ['true', '1', 'yes']


def parse_threshold_range(text: str) -> List[float]:
    """
    解析阈值范围 start:stop:step（含端点）或逗号列表

    Args:
        text: 例如 "0.5:0.95:0.05" 或 "0.5,0.75"

    Returns:
        list: 升序阈值列表，保留 10 位小数
    """
    text = str(text).strip()
    try:
        if ':' in text:
            start, stop, step = (float(p) for p in text.split(':'))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            values = [round(start + i * step, 10) for i in range(count)]
        else:
            values = [round(float(p), 10) for p in text.split(',') if p.strip()]
    except ValueError:
        raise ConfigError(f"阈值范围格式无效（应为 start:stop:step 或逗号列表）: {text}")
    if not values or any(not (0.0 < v <= 1.0) for v in values):
        raise ConfigError(f"阈值必须在 (0,1] 范围内: {text}")
    return sorted(set(values))


def validate_config(config: Dict[str, Dict[str, str]]) -> Tuple[bool, Optional[str]]:
    """
    验证配置的有效性

    Args:
        config: load_config_file 返回的配置

    Returns:
        tuple: (is_valid, error_message)
    """
    errors = []

    logging_config = get_section('logging', config)
    log_level = logging_config.get('log_level', 'INFO').upper()
    valid_levels = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
    if log_level not in valid_levels:
        errors.append(f"logging.log_level必须是以下之一: {', '.join(valid_levels)}")
    if logging_config.get('log_format', 'text').lower() not in ['json', 'text', 'both']:
        errors.append("logging.log_format必须是: json, text, 或 both")
    if logging_config.get('log_rotation', 'size').lower() not in ['size', 'time', 'both']:
        errors.append("logging.log_rotation必须是: size, time, 或 both")

    def check(section_name: str, key: str, predicate, message: str, as_int: bool = False):
        section = get_section(section_name, config)
        try:
            value = get_int(section, key) if as_int else get_float(section, key)
        except ConfigError as e:
            errors.append(f"{section_name}.{e}")
            return
        if not predicate(value):
            errors.append(f"{section_name}.{key}{message}")

    check('losses', 'log_eps', lambda v: 0 < v < 1, "必须在(0,1)范围内")
    check('losses', 'alpha_min', lambda v: v > 0, "必须大于0")
    check('losses', 'alpha_max', lambda v: v > 0, "必须大于0")
    check('grad_check', 'step', lambda v: v > 0, "必须大于0")
    check('grad_check', 'tie_margin', lambda v: v >= 0, "不能为负")
    check('grad_check', 'n_random', lambda v: v >= 1, "必须大于0", as_int=True)
    check('grad_check', 'rel_tol', lambda v: v > 0, "必须大于0")
    check('regression', 'lr', lambda v: v > 0, "必须大于0")
    check('regression', 'steps', lambda v: v >= 1, "必须大于0", as_int=True)
    check('regression', 'converge_iou', lambda v: 0 < v <= 1, "必须在(0,1]范围内")
    check('regression', 'workers', lambda v: v >= 1, "必须大于0", as_int=True)
    check('noise', 'eta', lambda v: 0 <= v <= 0.5, "必须在[0,0.5]范围内")
    check('eval', 'nms_iou', lambda v: 0 < v <= 1, "必须在(0,1]范围内")

    losses = get_section('losses', config)
    try:
        if get_float(losses, 'alpha_min') > get_float(losses, 'alpha_max'):
            errors.append("losses.alpha_min不能大于alpha_max")
    except ConfigError:
        pass

    eval_config = get_section('eval', config)
    for key in ('thresholds', 'histogram_buckets'):
        try:
            parse_threshold_range(eval_config[key])
        except ConfigError as e:
            errors.append(f"eval.{key}: {e}")

    if errors:
        return False, "; ".join(errors)

    return True, None
