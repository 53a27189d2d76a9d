"""Run logger - appends every API solve and sweep to a CSV for later analysis"""

import csv
import logging
import shutil
import threading
from datetime import datetime
from pathlib import Path
from typing import Optional

from app.config import get_settings

logger = logging.getLogger(__name__)

HEADER = [
    "timestamp",
    "endpoint",
    "chain",
    "M0",
    "M1",
    "N",
    "L",
    "tail_mass",
    "elapsed_ms",
    "cached",
    "verdicts",
]


class RunLogger:
    """Logs solve/sweep runs to a CSV file"""

    _instance: Optional["RunLogger"] = None
    _lock = threading.Lock()

    def __new__(cls, path: Optional[Path] = None):
        """Singleton for the default path; explicit paths get their own logger."""
        if path is not None:
            instance = super().__new__(cls)
            instance._initialized = False
            return instance
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
                    cls._instance._initialized = False
        return cls._instance

    def __init__(self, path: Optional[Path] = None):
        if self._initialized:
            return

        self._initialized = True
        self._file_lock = threading.Lock()
        self.path = Path(path) if path is not None else get_settings().run_log_file
        self.path.parent.mkdir(parents=True, exist_ok=True)

        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as f:
                first = f.readline().strip().split(",")
            if first != HEADER:
                # Older column layout: keep it aside and start fresh
                backup = self.path.with_suffix(".backup.csv")
                shutil.copy(self.path, backup)
                logger.info(f"Backed up old run log to {backup}")
                self._write_header()
        else:
            self._write_header()

        logger.info(f"Run logger initialized: {self.path}")

    def _write_header(self):
        with open(self.path, "w", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow(HEADER)

    def log(
        self,
        endpoint: str,
        chain: str,
        M0: int,
        M1: int,
        N: int,
        L: Optional[int] = None,
        tail_mass: Optional[float] = None,
        elapsed_ms: Optional[float] = None,
        cached: bool = False,
        verdicts: Optional[dict] = None,
    ):
        """Append one run"""
        verdict_text = ";".join(f"{k}={v}" for k, v in sorted((verdicts or {}).items()))
        with self._file_lock:
            try:
                with open(self.path, "a", newline="", encoding="utf-8") as f:
                    csv.writer(f).writerow([
                        datetime.now().isoformat(),
                        endpoint,
                        chain,
                        M0,
                        M1,
                        N,
                        "" if L is None else L,
                        "" if tail_mass is None else format(tail_mass, ".17g"),
                        "" if elapsed_ms is None else elapsed_ms,
                        cached,
                        verdict_text,
                    ])
            except OSError as e:
                logger.error(f"Failed to log run: {e}")

    def get_log_path(self) -> Path:
        return self.path

    def get_stats(self) -> dict:
        """Get logging statistics"""
        if not self.path.exists():
            return {"total_logged": 0, "file": str(self.path)}

        with open(self.path, "r", encoding="utf-8") as f:
            line_count = sum(1 for _ in f) - 1

        return {
            "total_logged": max(0, line_count),
            "file": str(self.path),
            "size_kb": self.path.stat().st_size / 1024,
        }

    def clear(self):
        """Clear log file"""
        with self._file_lock:
            self._write_header()
            logger.info("Run log cleared")


def get_run_logger() -> RunLogger:
    """Get the process-wide run logger"""
    return RunLogger()
