#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
标注与检测文件读写服务
COCO 风格 JSON：像素 bbox [x, y, w, h] 与图像宽高换算为归一化中心形式
"""
import json
import os
import sys
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.models.box_models import Box
from app.models.detection_models import DatasetBundle, Detection, GroundTruth, Identifier
from app.services.geometry import clamp_to_bounds
from app.utils.exceptions import AlphaIoUError, AnnotationFormatError, ReportError
from app.utils.logger import get_logger

logger = get_logger('annotation_io', category='business')


def _read_json(path: str) -> Any:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise AnnotationFormatError(f"无法读取文件: {e.strerror or e}", path=path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise AnnotationFormatError(f"JSON 格式错误: {e.msg}", path=path, line=e.lineno, column=e.colno)


def _write_json(data: Any, path: str):
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, ensure_ascii=False, indent=2)
    except OSError as e:
        raise ReportError(f"无法写入输出文件 {path}: {e}")


def _require_list(data: Dict[str, Any], key: str, path: str) -> List[Any]:
    value = data.get(key, [])
    if not isinstance(value, list):
        raise AnnotationFormatError(f"字段 {key} 必须是数组", path=path)
    return value


def pixel_to_box(bbox: Sequence[float], width: float, height: float) -> Tuple[Optional[Box], bool]:
    """
    像素 bbox [x, y, w, h] 换算为归一化中心形式

    Args:
        bbox: 左上角坐标与宽高（像素）
        width: 图像宽（像素）
        height: 图像高（像素）

    Returns:
        tuple: (Box，退化框为 None；是否因越界被截断)
    """
    x, y, w, h = (float(v) for v in bbox)
    if w <= 0 or h <= 0:
        return None, False
    if x >= 0 and y >= 0 and x + w <= width and y + h <= height:
        box = Box(cx=(x + w / 2.0) / width, cy=(y + h / 2.0) / height, w=w / width, h=h / height)
        # 占满整幅的框宽高会被收到 1−ε
        clamped = clamp_to_bounds(box)
        return clamped, clamped is not box

    x1 = min(max(x / width, 0.0), 1.0)
    y1 = min(max(y / height, 0.0), 1.0)
    x2 = min(max((x + w) / width, 0.0), 1.0)
    y2 = min(max((y + h) / height, 0.0), 1.0)
    if x2 - x1 <= 0 or y2 - y1 <= 0:
        return None, True
    return clamp_to_bounds(Box.from_corners(x1, y1, x2, y2)), True


def box_to_pixel(box: Box, width: float, height: float) -> List[float]:
    """归一化中心形式换算为像素 bbox [x, y, w, h]"""
    x1, y1, _, _ = box.corners
    return [x1 * width, y1 * height, box.w * width, box.h * height]


def _entry_box(entry: Dict[str, Any], size: Tuple[float, float], path: str) -> Tuple[Optional[Box], bool]:
    """bbox_norm 优先（精确往返），否则按像素 bbox 换算"""
    try:
        norm = entry.get('bbox_norm')
        if norm is not None:
            box = Box.from_array(norm)
            if box.within_bounds():
                return box, False
            return clamp_to_bounds(box), True
        bbox = entry['bbox']
        if len(bbox) != 4:
            raise ValueError(f"bbox 长度为 {len(bbox)}")
        return pixel_to_box(bbox, size[0], size[1])
    except AlphaIoUError:
        return None, False
    except (KeyError, TypeError, ValueError) as e:
        raise AnnotationFormatError(f"bbox 字段无效: {entry.get('bbox')} ({e})", path=path)


def _parse_images(data: Dict[str, Any], path: str) -> Dict[Identifier, Tuple[float, float]]:
    images: Dict[Identifier, Tuple[float, float]] = {}
    for image in _require_list(data, 'images', path):
        try:
            image_id = image['id']
            width, height = image['width'], image['height']
        except (KeyError, TypeError):
            raise AnnotationFormatError(f"图像条目缺少 id/width/height: {image}", path=path)
        if not isinstance(width, (int, float)) or not isinstance(height, (int, float)) \
                or width <= 0 or height <= 0:
            raise AnnotationFormatError(f"图像 {image_id} 的宽高必须为正数", path=path)
        images[image_id] = (width, height)
    return images


def load_annotations(path: str) -> DatasetBundle:
    """
    读取 COCO 风格标注文件

    越界框截断到图像范围并计入 clamped，宽高非正的框丢弃并计入 dropped。

    Args:
        path: 标注文件路径

    Returns:
        DatasetBundle: 不含检测结果的数据集

    Raises:
        AnnotationFormatError: JSON 格式错误（含行列号）、字段缺失或引用未知 image_id
    """
    data = _read_json(path)
    if not isinstance(data, dict):
        raise AnnotationFormatError("标注文件顶层必须是对象", path=path)
    images = _parse_images(data, path)
    categories = _require_list(data, 'categories', path)

    gts: List[GroundTruth] = []
    offenders = set()
    clamped = dropped = 0
    for entry in _require_list(data, 'annotations', path):
        if not isinstance(entry, dict) or 'image_id' not in entry or 'category_id' not in entry:
            raise AnnotationFormatError(f"标注条目缺少 image_id/category_id: {entry}", path=path)
        image_id = entry['image_id']
        if image_id not in images:
            offenders.add(image_id)
            continue
        box, was_clamped = _entry_box(entry, images[image_id], path)
        clamped += int(was_clamped)
        if box is None:
            dropped += 1
            continue
        gts.append(GroundTruth(image_id=image_id, category=entry['category_id'], box=box))

    if offenders:
        raise AnnotationFormatError("标注引用了未知的图像", path=path, offenders=list(offenders))
    if clamped or dropped:
        logger.warning(f"{path}: {clamped} 个标注框越界已截断, {dropped} 个退化框已丢弃")
    logger.info(f"已加载标注 {path}: 图像 {len(images)}, 真值框 {len(gts)}")
    return DatasetBundle(images=images, gts=gts, dets=None, categories=categories,
                         clamped=clamped, dropped=dropped)


def load_detections(path: str, bundle: DatasetBundle) -> DatasetBundle:
    """
    读取检测结果并附加到数据集

    支持 COCO 结果数组，或带 annotations/detections 数组的对象；
    缺少 score 的条目置信度取 1.0（可直接把噪声标注当作伪检测评估）。

    Args:
        path: 检测文件路径
        bundle: 已加载的标注数据集（提供图像宽高）

    Returns:
        DatasetBundle: 附加了 dets 的新数据集
    """
    data = _read_json(path)
    if isinstance(data, dict):
        key = 'detections' if 'detections' in data else 'annotations'
        entries = _require_list(data, key, path)
    elif isinstance(data, list):
        entries = data
    else:
        raise AnnotationFormatError("检测文件顶层必须是数组或对象", path=path)

    dets: List[Detection] = []
    offenders = set()
    clamped = dropped = 0
    for entry in entries:
        if not isinstance(entry, dict) or 'image_id' not in entry or 'category_id' not in entry:
            raise AnnotationFormatError(f"检测条目缺少 image_id/category_id: {entry}", path=path)
        image_id = entry['image_id']
        if image_id not in bundle.images:
            offenders.add(image_id)
            continue
        box, was_clamped = _entry_box(entry, bundle.images[image_id], path)
        clamped += int(was_clamped)
        if box is None:
            dropped += 1
            continue
        score = entry.get('score', 1.0)
        try:
            dets.append(Detection(image_id=image_id, category=entry['category_id'], box=box, score=score))
        except AlphaIoUError as e:
            raise AnnotationFormatError(str(e), path=path)

    if offenders:
        raise AnnotationFormatError("检测结果引用了未知的图像", path=path, offenders=list(offenders))
    if clamped or dropped:
        logger.warning(f"{path}: {clamped} 个检测框越界已截断, {dropped} 个退化框已丢弃")
    logger.info(f"已加载检测结果 {path}: {len(dets)} 个")
    return replace(bundle, dets=dets, clamped=bundle.clamped + clamped, dropped=bundle.dropped + dropped)


def _category_entries(bundle: DatasetBundle) -> List[Dict[str, Any]]:
    if bundle.categories:
        return list(bundle.categories)
    seen: List[Identifier] = []
    for gt in bundle.gts:
        if gt.category not in seen:
            seen.append(gt.category)
    return [{'id': c, 'name': str(c)} for c in seen]


def annotations_to_dict(bundle: DatasetBundle) -> Dict[str, Any]:
    """
    转换为 COCO 风格标注对象

    每个标注同时写入像素 bbox 与归一化 bbox_norm，重新加载时以 bbox_norm 为准。
    """
    annotations = []
    for i, gt in enumerate(bundle.gts, start=1):
        width, height = bundle.images[gt.image_id]
        bbox = box_to_pixel(gt.box, width, height)
        annotations.append({
            'id': i,
            'image_id': gt.image_id,
            'category_id': gt.category,
            'bbox': bbox,
            'bbox_norm': [gt.box.cx, gt.box.cy, gt.box.w, gt.box.h],
            'area': bbox[2] * bbox[3],
            'iscrowd': 0,
        })
    data = {
        'images': [{'id': image_id, 'width': w, 'height': h} for image_id, (w, h) in bundle.images.items()],
        'annotations': annotations,
        'categories': _category_entries(bundle),
    }
    return data


def save_annotations(bundle: DatasetBundle, path: str):
    """保存为 COCO 风格标注文件"""
    _write_json(annotations_to_dict(bundle), path)
    logger.info(f"已保存标注 {path}: {len(bundle.gts)} 个")


def save_detections(bundle: DatasetBundle, path: str):
    """保存检测结果为 COCO 结果数组"""
    entries = []
    for det in bundle.dets or []:
        width, height = bundle.images[det.image_id]
        entries.append({
            'image_id': det.image_id,
            'category_id': det.category,
            'bbox': box_to_pixel(det.box, width, height),
            'bbox_norm': [det.box.cx, det.box.cy, det.box.w, det.box.h],
            'score': det.score,
        })
    _write_json(entries, path)
    logger.info(f"已保存检测结果 {path}: {len(entries)} 个")


def gts_as_detections(gts: Sequence[GroundTruth], score: float = 1.0) -> List[Detection]:
    """把真值当作置信度固定的伪检测"""
    return [Detection(image_id=g.image_id, category=g.category, box=g.box, score=score) for g in gts]
