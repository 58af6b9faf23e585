#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
日志服务
按分类（business / error / all）建立日志记录器，控制台输出写到 stderr，可选写入滚动日志文件
"""
import os
import sys
import json
import logging
from dataclasses import dataclass
from logging.handlers import RotatingFileHandler, TimedRotatingFileHandler
from datetime import datetime, timezone
from typing import Dict, Any, Optional

# 添加项目根目录到路径
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.services.config_manager import get_bool

# 分类 → 日志记录器名称
CATEGORY_LOGGERS = {
    'business': 'alpha_iou_business',
    'error': 'alpha_iou_error',
    'all': 'alpha_iou',
}
UNINITIALIZED_PREFIX = 'alpha_iou'


class JSONFormatter(logging.Formatter):
    """JSON格式日志格式化器，每条记录一行"""

    def format(self, record):
        log_data = {
            "timestamp": datetime.fromtimestamp(record.created, timezone.utc).isoformat().replace('+00:00', 'Z'),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
            "thread": record.threadName,
        }
        for attr, key in (('category', 'category'), ('extra_data', 'extra')):
            if hasattr(record, attr):
                log_data[key] = getattr(record, attr)
        if record.exc_info:
            log_data['exception'] = self.formatException(record.exc_info)
        # numpy 标量等无法直接序列化的值按字符串输出
        return json.dumps(log_data, ensure_ascii=False, default=str)


class TextFormatter(logging.Formatter):
    """文本格式：时间戳 [级别] [分类] [日志器] 消息"""

    DATEFMT = '%Y-%m-%d %H:%M:%S'

    def __init__(self, include_category: bool = True):
        super().__init__()
        self.include_category = include_category
        self._with_category = logging.Formatter(
            '%(asctime)s [%(levelname)s] [%(category)s] [%(name)s] %(message)s', datefmt=self.DATEFMT)
        self._plain = logging.Formatter('%(asctime)s [%(levelname)s] [%(name)s] %(message)s', datefmt=self.DATEFMT)

    def format(self, record):
        if self.include_category and hasattr(record, 'category'):
            return self._with_category.format(record)
        return self._plain.format(record)


@dataclass
class LogOptions:
    """[logging] 配置段解析结果"""
    level: int = logging.INFO
    fmt: str = 'text'
    log_dir: str = './logs'
    max_bytes: int = 10 * 1024 * 1024
    backup_count: int = 30
    rotation: str = 'size'
    to_console: bool = True
    to_file: bool = False

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> 'LogOptions':
        return cls(
            level=getattr(logging, str(config.get('log_level', 'INFO')).upper(), logging.INFO),
            fmt=str(config.get('log_format', 'text')).lower(),
            log_dir=config.get('log_dir', './logs'),
            max_bytes=int(config.get('log_max_bytes', 10)) * 1024 * 1024,  # MB 转换为字节
            backup_count=int(config.get('log_backup_count', 30)),
            rotation=str(config.get('log_rotation', 'size')).lower(),
            to_console=get_bool(config, 'log_to_console', default=True),
            to_file=get_bool(config, 'log_to_file'),
        )


class LoggerService:
    """日志服务类"""

    CATEGORIES = list(CATEGORY_LOGGERS)

    def __init__(self):
        self.log_dir: Optional[str] = None
        self.loggers: Dict[str, logging.Logger] = {}
        self.handlers: Dict[str, logging.Handler] = {}
        self.initialized = False

    def _console_handler(self, options: LogOptions) -> logging.Handler:
        # stdout 留给 CSV/JSON 结果
        handler = logging.StreamHandler(sys.stderr)
        handler.setLevel(options.level)
        handler.setFormatter(JSONFormatter() if options.fmt == 'json' else TextFormatter())
        return handler

    def _file_handler(self, options: LogOptions, logger_name: str) -> logging.Handler:
        log_file = os.path.join(self.log_dir, f'{logger_name}.log')
        if options.rotation == 'size':
            handler = RotatingFileHandler(log_file, maxBytes=options.max_bytes,
                                          backupCount=options.backup_count, encoding='utf-8')
        else:  # time / both
            handler = TimedRotatingFileHandler(log_file, when='midnight', interval=1,
                                               backupCount=options.backup_count, encoding='utf-8')
        handler.setLevel(options.level)
        handler.setFormatter(JSONFormatter() if options.fmt in ('json', 'both') else TextFormatter())
        return handler

    def init_logging(self, config: Dict[str, Any]):
        """
        初始化日志系统，重复调用时替换已有处理器

        Args:
            config: 日志配置字典（[logging] 段）
        """
        try:
            options = LogOptions.from_config(config)
            if options.to_file:
                self.log_dir = os.path.abspath(options.log_dir)
                os.makedirs(self.log_dir, exist_ok=True)

            for logger_name in CATEGORY_LOGGERS.values():
                logger = logging.getLogger(logger_name)
                logger.setLevel(options.level)
                logger.propagate = False
                self._close_handlers(logger)

                if options.to_console:
                    logger.addHandler(self._console_handler(options))
                if options.to_file:
                    file_handler = self._file_handler(options, logger_name)
                    logger.addHandler(file_handler)
                    self.handlers[logger_name] = file_handler

                self.loggers[logger_name] = logger

            self.initialized = True

        except Exception as e:
            print(f"[日志服务] 初始化失败: {e}", file=sys.stderr)

    @staticmethod
    def _close_handlers(logger: logging.Logger):
        for handler in list(logger.handlers):
            handler.close()
        logger.handlers.clear()

    def reset(self):
        """撤销 init_logging：关闭处理器并恢复向根记录器传播"""
        for logger in self.loggers.values():
            self._close_handlers(logger)
            logger.propagate = True
            logger.setLevel(logging.NOTSET)
        self.loggers.clear()
        self.handlers.clear()
        self.initialized = False

    def get_logger(self, name: str, category: str = 'business') -> logging.Logger:
        """
        获取日志记录器

        未初始化时返回 alpha_iou.<name>（传播到根记录器）；
        初始化后返回对应分类记录器的子记录器，通过传播使用分类记录器的处理器。

        Args:
            name: 日志记录器名称
            category: 日志分类 (business, error)

        Returns:
            logging.Logger: 日志记录器
        """
        if not self.initialized:
            return logging.getLogger(f'{UNINITIALIZED_PREFIX}.{name}')

        base_name = CATEGORY_LOGGERS.get(category, CATEGORY_LOGGERS['all'])
        base_logger = self.loggers.get(base_name, logging.getLogger(base_name))
        logger = logging.getLogger(f'{base_logger.name}.{name}')
        logger.setLevel(base_logger.level)
        return logger


# 全局日志服务实例
_logger_service = None


def get_logger_service() -> LoggerService:
    """获取全局日志服务实例"""
    global _logger_service
    if _logger_service is None:
        _logger_service = LoggerService()
    return _logger_service


def init_logging(config: Dict[str, Any]):
    """初始化日志系统（便捷函数）"""
    get_logger_service().init_logging(config)
