#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
异常定义
工具包内所有业务异常的基类与子类，CLI 层统一捕获并转换为退出码
"""
from typing import List, Optional


class AlphaIoUError(Exception):
    """工具包异常基类"""


class BoxError(AlphaIoUError, ValueError):
    """边界框参数非法（宽高不为正、非有限值）"""


class LossSpecError(AlphaIoUError, ValueError):
    """损失函数规格非法（α 不为正、未知损失类型、超出允许范围）"""


class GradientCheckError(AlphaIoUError, ValueError):
    """有限差分扰动后边界框退化"""


class RegressionError(AlphaIoUError, ValueError):
    """回归参数非法（学习率不为正、步数为负）或梯度出现非有限值"""


class DatasetError(AlphaIoUError, ValueError):
    """数据集为空或无法计算指标"""


class ConfigError(AlphaIoUError):
    """配置文件无法读取或配置无效"""


class AnnotationFormatError(AlphaIoUError, ValueError):
    """
    标注/检测文件格式错误

    Args:
        message: 错误信息
        path: 文件路径
        line: JSON 解析出错的行号（可选）
        column: JSON 解析出错的列号（可选）
        offenders: 引用了未知 image_id 的编号列表（可选）
    """

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None,
                 column: Optional[int] = None, offenders: Optional[List] = None):
        self.path = path
        self.line = line
        self.column = column
        self.offenders = sorted(offenders, key=str) if offenders else []

        details = []
        if path:
            details.append(f"文件: {path}")
        if line is not None:
            details.append(f"位置: 第{line}行 第{column}列")
        if self.offenders:
            details.append(f"未知image_id: {', '.join(str(o) for o in self.offenders)}")

        full_message = message if not details else f"{message} ({'; '.join(details)})"
        super().__init__(full_message)


class ReportError(AlphaIoUError):
    """图表或报表文件生成失败（缺少绘图/表格库、输出路径不可写）"""
