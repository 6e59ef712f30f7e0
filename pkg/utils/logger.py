"""
Structured logging for experiment runs.
Provides main, audit and performance streams with JSON payloads attached to messages.
"""

import logging
import logging.handlers
import json
from datetime import datetime
from typing import Dict, Optional, Any
from pathlib import Path
from dataclasses import dataclass

from utils.helpers import get_env_variable, to_builtin


@dataclass
class LogEntry:
    """Structured log entry."""
    timestamp: datetime
    level: str
    component: str
    message: str
    data: Optional[Dict[str, Any]] = None
    session_id: Optional[str] = None


class StructuredLogger:
    """Logger writing run summaries, verification audits and timings to rotating files."""

    STREAMS = ('main', 'audit', 'performance')

    def __init__(self, config: Dict[str, Any], session_id: str = None):
        """
        Initialize structured logger.

        Args:
            config: System configuration (uses the logging section)
            session_id: Unique session identifier
        """
        self.config = config
        self.session_id = session_id or datetime.now().strftime('%Y%m%d_%H%M%S')

        log_config = config.get('logging', {})
        self.log_dir = Path(get_env_variable('REJECTSCHED_LOG_DIR') or log_config.get('log_dir', 'log'))
        self.log_dir.mkdir(parents=True, exist_ok=True)
        (self.log_dir / 'audit').mkdir(exist_ok=True)

        self._setup_loggers()
        self.entries_written = 0

    def _setup_loggers(self):
        """Setup one logger per stream."""
        log_config = self.config.get('logging', {})
        level = getattr(logging, str(log_config.get('level', 'INFO')).upper())

        self.main_logger = logging.getLogger('rejectsched.main')
        self.main_logger.setLevel(level)
        self.audit_logger = logging.getLogger('rejectsched.audit')
        self.audit_logger.setLevel(logging.INFO)
        self.audit_logger.propagate = False
        self.perf_logger = logging.getLogger('rejectsched.performance')
        self.perf_logger.setLevel(logging.INFO)
        self.perf_logger.propagate = False

        self._setup_file_handlers()

    def _setup_file_handlers(self):
        """Setup rotating file handlers."""
        log_config = self.config.get('logging', {})
        max_bytes = self._parse_size(str(log_config.get('max_file_size', '10MB')))
        backup_count = log_config.get('backup_count', 5)

        targets = {
            'main': (self.main_logger, self.log_dir / f'main_{self.session_id}.log'),
            'audit': (self.audit_logger, self.log_dir / 'audit' / f'audit_{self.session_id}.log'),
            'performance': (self.perf_logger, self.log_dir / f'performance_{self.session_id}.log'),
        }
        for stream, (logger, path) in targets.items():
            for handler in list(logger.handlers):
                logger.removeHandler(handler)
                handler.close()
            handler = logging.handlers.RotatingFileHandler(path, maxBytes=max_bytes,
                                                           backupCount=backup_count)
            handler.setFormatter(self._get_formatter(stream))
            logger.addHandler(handler)

    def _get_formatter(self, logger_type: str = 'main') -> logging.Formatter:
        """Get formatter for specific logger type."""
        if logger_type == 'audit':
            return logging.Formatter(
                '%(asctime)s | %(levelname)s | %(funcName)s | %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            )
        return logging.Formatter(
            '%(asctime)s | %(name)s | %(levelname)s | %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

    def _parse_size(self, size_str: str) -> int:
        """Parse size string like '10MB' to bytes."""
        size_str = size_str.upper()
        if size_str.endswith('KB'):
            return int(size_str[:-2]) * 1024
        elif size_str.endswith('MB'):
            return int(size_str[:-2]) * 1024 * 1024
        elif size_str.endswith('GB'):
            return int(size_str[:-2]) * 1024 * 1024 * 1024
        else:
            return int(size_str)

    def _write_log_entry(self, entry: LogEntry):
        """Write log entry to the logger of its stream."""
        logger_map = {
            'main': self.main_logger,
            'audit': self.audit_logger,
            'performance': self.perf_logger
        }
        logger = logger_map.get(entry.component, self.main_logger)
        level = getattr(logging, entry.level, logging.INFO)

        message = entry.message
        if entry.data:
            message += f" | Data: {json.dumps(to_builtin(entry.data), default=str, sort_keys=True)}"
        logger.log(level, message)
        self.entries_written += 1

    def log(self, level: str, component: str, message: str,
            data: Optional[Dict[str, Any]] = None):
        """
        Log message with structured data.

        Args:
            level: Log level name
            component: Stream name (main, audit, performance)
            message: Log message
            data: Additional structured data
        """
        self._write_log_entry(LogEntry(
            timestamp=datetime.now(),
            level=level.upper(),
            component=component,
            message=message,
            data=data,
            session_id=self.session_id
        ))

    def log_run(self, summary: Dict[str, Any]):
        """Log an engine run summary."""
        message = (f"Run {summary.get('engine', '?')}: n={summary.get('n')}, "
                   f"cost={summary.get('alg_cost')}")
        self.log('INFO', 'main', message, summary)

    def log_verification(self, target: str, report: Dict[str, Any]):
        """Record a verification report on the audit stream."""
        status = 'certified' if report.get('certified') else f"{len(report.get('violations', []))} violations"
        self.log('INFO' if report.get('certified') else 'WARNING', 'audit',
                 f"Verify {target}: {status} ({report.get('checked_count')} checks)",
                 {'target': target, 'certified': report.get('certified'),
                  'checked_count': report.get('checked_count'),
                  'min_slack': report.get('min_slack'),
                  'violations': report.get('violations', [])[:20]})

    def log_performance(self, metrics: Dict[str, Any]):
        """
        Log batch timings.

        Args:
            metrics: instances, threads, processing_time and violations of one batch
        """
        labels = {'instances': "{} instances", 'threads': "{} threads",
                  'processing_time': "{:.2f}s", 'violations': "{} with violations"}
        parts = [label.format(metrics[key]) for key, label in labels.items() if key in metrics]
        self.log('INFO', 'performance', "Batch: " + ", ".join(parts), metrics)

    def get_log_summary(self) -> Dict[str, Any]:
        return {
            'session_id': self.session_id,
            'log_dir': str(self.log_dir),
            'entries_written': self.entries_written,
            'log_files': {
                'main': str(self.log_dir / f'main_{self.session_id}.log'),
                'audit': str(self.log_dir / 'audit' / f'audit_{self.session_id}.log'),
                'performance': str(self.log_dir / f'performance_{self.session_id}.log')
            }
        }


# Convenience functions for global logger
_global_logger: Optional[StructuredLogger] = None


def initialize_global_logger(config: Dict[str, Any], session_id: str = None) -> StructuredLogger:
    """Initialize global logger instance."""
    global _global_logger
    _global_logger = StructuredLogger(config, session_id)
    return _global_logger


def get_logger() -> Optional[StructuredLogger]:
    """Get global logger instance."""
    return _global_logger


def log_run(summary: Dict[str, Any]):
    if _global_logger:
        _global_logger.log_run(summary)


def log_verification(target: str, report: Dict[str, Any]):
    if _global_logger:
        _global_logger.log_verification(target, report)


def log_performance(metrics: Dict[str, Any]):
    """Convenience function to log performance."""
    if _global_logger:
        _global_logger.log_performance(metrics)
