import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional


LOGGER_NAME = "nehari_localizer"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class RunLogger:
    """Configures the package logger and keeps structured run events."""

    def __init__(self, log_dir: Optional[str] = None, level: str = "INFO"):
        """Initialize the run logger.

        Args:
            log_dir: Directory for run.log and the event log; console only when None.
            level: Console log level name.
        """
        self.log_dir = Path(log_dir) if log_dir else None
        if self.log_dir:
            self.log_dir.mkdir(parents=True, exist_ok=True)

        self.logger = logging.getLogger(LOGGER_NAME)
        self.logger.setLevel(logging.DEBUG)
        self._setup_handlers(level)

        self.errors: List[Dict[str, Any]] = []
        self.warnings: List[Dict[str, Any]] = []
        self.failures: List[Dict[str, Any]] = []

    def _setup_handlers(self, level: str) -> None:
        console = next(
            (h for h in self.logger.handlers if getattr(h, "_run_logger_console", False)), None
        )
        if console is None:
            console = logging.StreamHandler(sys.stderr)
            console._run_logger_console = True
            console.setFormatter(logging.Formatter(LOG_FORMAT))
            self.logger.addHandler(console)
        else:
            console.stream = sys.stderr
        console.setLevel(getattr(logging, level.upper(), logging.INFO))

        if self.log_dir is None:
            return
        log_file = (self.log_dir / "run.log").resolve()
        for handler in self.logger.handlers:
            if isinstance(handler, logging.FileHandler) and Path(handler.baseFilename) == log_file:
                return
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        self.logger.addHandler(file_handler)

    def _event(self, event_type: str, message: str, details: Optional[Dict[str, Any]]) -> Dict[str, Any]:
        return {
            "timestamp": datetime.now().isoformat(),
            "type": event_type,
            "message": message,
            "details": details or {},
        }

    def log_error(self, error_type: str, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        """Record an error (configuration, shape or unexpected exception)."""
        self.errors.append(self._event(error_type, message, details))
        self.logger.error(f"{error_type}: {message}")
        if details:
            self.logger.debug(f"Error details: {json.dumps(details, indent=2, default=str)}")

    def log_warning(self, warning_type: str, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        self.warnings.append(self._event(warning_type, message, details))
        self.logger.warning(f"{warning_type}: {message}")

    def log_failure(self, failure_type: str, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        """Record a failed check or certificate."""
        self.failures.append(self._event(failure_type, message, details))
        self.logger.info(f"{failure_type}: {message}")

    def get_event_summary(self) -> Dict[str, Any]:
        return {
            "total_errors": len(self.errors),
            "total_warnings": len(self.warnings),
            "total_failures": len(self.failures),
            "error_types": self._count_types(self.errors),
            "warning_types": self._count_types(self.warnings),
            "failure_types": self._count_types(self.failures),
        }

    def _count_types(self, items: List[Dict[str, Any]]) -> Dict[str, int]:
        type_counts: Dict[str, int] = {}
        for item in items:
            type_counts[item["type"]] = type_counts.get(item["type"], 0) + 1
        return type_counts

    def save_event_log(self, filename: str = "events.json") -> Optional[str]:
        """Write all events as JSON into the log directory.

        Returns:
            Path of the written file, or None without a log directory.
        """
        if self.log_dir is None:
            return None
        path = self.log_dir / filename
        with open(path, "w") as f:
            json.dump(
                {
                    "timestamp": datetime.now().isoformat(),
                    "summary": self.get_event_summary(),
                    "errors": self.errors,
                    "warnings": self.warnings,
                    "failures": self.failures,
                },
                f,
                indent=2,
                default=str,
            )
        return str(path)

    def close(self) -> None:
        """Detach and close the file handler of this run."""
        if self.log_dir is None:
            return
        log_file = (self.log_dir / "run.log").resolve()
        for handler in list(self.logger.handlers):
            if isinstance(handler, logging.FileHandler) and Path(handler.baseFilename) == log_file:
                self.logger.removeHandler(handler)
                handler.close()
