#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
报表服务
CSV/JSON 输出以及评估报告的 Excel 导出
"""
import csv
import json
import math
import os
import sys
from typing import Any, Dict, IO, Iterable, List, Optional, Sequence

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.models.detection_models import EvalReport, threshold_key
from app.utils.exceptions import ReportError
from app.utils.logger import get_logger

logger = get_logger('report_service', category='business')

CURVE_FIELDS = ['iou', 'alpha', 'loss', 'grad_mag']
TRAJECTORY_FIELDS = ['step', 'alpha', 'iou', 'loss', 'grad_norm']
HISTOGRAM_FIELDS = ['bucket', 'count']


def _open_output(path: Optional[str], stream: Optional[IO[str]]):
    if path is None or path == '-':
        return stream or sys.stdout, False
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        return open(path, 'w', encoding='utf-8', newline=''), True
    except OSError as e:
        raise ReportError(f"无法写入输出文件 {path}: {e}")


def _json_default(value: Any):
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    if hasattr(value, 'tolist'):
        return value.tolist()
    if hasattr(value, 'item'):
        return value.item()
    raise TypeError(f"无法序列化类型: {type(value).__name__}")


def _sanitize(value: Any) -> Any:
    """非有限浮点数转为字符串，保证输出为合法 JSON"""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    return value


def write_csv(rows: Iterable[Dict[str, Any]], fieldnames: Sequence[str],
              path: Optional[str] = None, stream: Optional[IO[str]] = None) -> int:
    """
    写出 CSV（UTF-8，带表头）

    Args:
        rows: 行字典
        fieldnames: 列名
        path: 输出路径，None 或 '-' 表示写到 stream
        stream: 默认输出流

    Returns:
        int: 写出的数据行数
    """
    out, owned = _open_output(path, stream)
    count = 0
    try:
        writer = csv.DictWriter(out, fieldnames=list(fieldnames), extrasaction='ignore', lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ('' if v is None else v) for k, v in row.items()})
            count += 1
    finally:
        if owned:
            out.close()
    if owned:
        logger.info(f"CSV 已保存: {path} ({count} 行)")
    return count


def write_json(data: Any, path: Optional[str] = None, stream: Optional[IO[str]] = None):
    """写出 JSON（UTF-8，缩进 2）"""
    if hasattr(data, 'to_dict'):
        data = data.to_dict()
    out, owned = _open_output(path, stream)
    try:
        json.dump(_sanitize(data), out, ensure_ascii=False, indent=2, default=_json_default)
        out.write('\n')
    finally:
        if owned:
            out.close()
    if owned:
        logger.info(f"JSON 已保存: {path}")


def histogram_rows(report: EvalReport) -> List[Dict[str, Any]]:
    """IoU 直方图转换为 CSV 行"""
    return [{'bucket': threshold_key(b), 'count': n} for b, n in sorted(report.iou_histogram.items())]


def export_eval_excel(report: EvalReport, output_path: str, title: str = '检测评估报告'):
    """
    导出评估报告为 Excel

    工作表包含各阈值 AP、mAP 汇总与匹配 IoU 直方图

    Args:
        report: 评估报告
        output_path: 输出文件路径（.xlsx）
        title: 标题
    """
    try:
        from openpyxl import Workbook
        from openpyxl.styles import Font, Alignment, PatternFill, Border, Side
    except ImportError:
        raise ReportError("openpyxl未安装，无法生成Excel报表")

    wb = Workbook()
    ws = wb.active
    ws.title = "评估摘要"

    # 标题样式
    title_font = Font(name='Arial', size=16, bold=True)
    section_font = Font(name='Arial', size=14, bold=True)
    header_fill = PatternFill(start_color="3498db", end_color="3498db", fill_type="solid")
    header_font = Font(name='Arial', size=12, bold=True, color="FFFFFF")
    border = Border(
        left=Side(style='thin'),
        right=Side(style='thin'),
        top=Side(style='thin'),
        bottom=Side(style='thin')
    )

    ws['A1'] = title
    ws['A1'].font = title_font
    ws.merge_cells('A1:C1')
    ws['A1'].alignment = Alignment(horizontal='center', vertical='center')

    def write_table(start_row: int, heading: str, headers: List[str], data: List[List[Any]]) -> int:
        ws[f'A{start_row}'] = heading
        ws[f'A{start_row}'].font = section_font
        row = start_row + 1
        for col, header in enumerate(headers, 1):
            cell = ws.cell(row=row, column=col)
            cell.value = header
            cell.fill = header_fill
            cell.font = header_font
            cell.border = border
            cell.alignment = Alignment(horizontal='center', vertical='center')
        row += 1
        for data_row in data:
            for col, value in enumerate(data_row, 1):
                cell = ws.cell(row=row, column=col)
                cell.value = value
                cell.border = border
                cell.alignment = Alignment(horizontal='left', vertical='center')
            row += 1
        return row + 1

    row = write_table(3, "汇总指标", ['指标', '数值'], [
        ['mAP50:95', report.map_50_95],
        ['mAP75:95', report.map_75_95],
        ['真值数', report.n_gt],
        ['检测数（NMS后）', report.n_dets],
        ['类别数', report.n_categories],
    ])
    row = write_table(row, "各阈值AP", ['IoU阈值', 'AP'],
                      [[threshold_key(t), ap] for t, ap in sorted(report.ap_per_threshold.items())])
    write_table(row, "匹配IoU分布", ['IoU ≥', '检测数'],
                [[threshold_key(b), n] for b, n in sorted(report.iou_histogram.items())])

    # 调整列宽
    ws.column_dimensions['A'].width = 20
    ws.column_dimensions['B'].width = 20
    ws.column_dimensions['C'].width = 15

    directory = os.path.dirname(os.path.abspath(output_path))
    try:
        os.makedirs(directory, exist_ok=True)
        wb.save(output_path)
    except OSError as e:
        raise ReportError(f"保存Excel报表失败 {output_path}: {e}")
    logger.info(f"Excel 报表已保存: {output_path}")
