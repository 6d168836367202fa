"""
Structured JSON logging for batch runs.
Outputs one JSON object per line to stderr so stdout stays free for command output.
"""
import json
import sys
from datetime import datetime, timezone
from typing import Optional
import uuid

from harmonic_flow.config import settings

_LEVELS = {"DEBUG": 10, "INFO": 20, "WARN": 30, "WARNING": 30, "ERROR": 40}


class StructuredLogger:
    """Logger that outputs structured JSON logs to stderr"""

    SERVICE = "harmonic-flow"

    def _enabled(self, level: str) -> bool:
        threshold = _LEVELS.get(settings.log_level.upper(), 30)
        return _LEVELS.get(level, 40) >= threshold

    def _log(
        self,
        level: str,
        event: str,
        run_id: Optional[str] = None,
        network: Optional[str] = None,
        order: Optional[int] = None,
        status: Optional[str] = None,
        error: Optional[str] = None,
        **kwargs
    ):
        """Internal method to write structured log entry"""
        if not self._enabled(level):
            return

        if run_id is None:
            run_id = str(uuid.uuid4())

        log_entry = {
            "ts": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
            "level": level,
            "service": self.SERVICE,
            "run_id": run_id,
            "event": event
        }

        if network is not None:
            log_entry["network"] = network
        if order is not None:
            log_entry["order"] = order
        if status is not None:
            log_entry["status"] = status
        if error is not None:
            log_entry["error"] = error

        # Add any additional kwargs
        log_entry.update({key: value for key, value in kwargs.items() if value is not None})

        print(json.dumps(log_entry, ensure_ascii=False, default=str), file=sys.stderr, flush=True)

    def log_solve(
        self,
        event: str,
        status: str,
        network: Optional[str] = None,
        order: Optional[int] = None,
        iterations: Optional[int] = None,
        mismatch: Optional[float] = None,
        residual: Optional[float] = None,
        run_id: Optional[str] = None,
        error: Optional[str] = None
    ):
        """Log power flow and per-order solve events"""
        level = "DEBUG" if status == "ok" else "ERROR"
        self._log(
            level=level,
            event=event,
            run_id=run_id,
            network=network,
            order=order,
            status=status,
            error=error,
            iterations=iterations,
            mismatch=mismatch,
            residual=residual
        )

    def log_study(
        self,
        event: str,
        status: str,
        study: str,
        network: Optional[str] = None,
        cells: Optional[int] = None,
        cell: Optional[str] = None,
        run_id: Optional[str] = None,
        error: Optional[str] = None
    ):
        """Log sweep, coupling and comparison studies (start, end, failures)"""
        if status in ("start", "end"):
            level = "INFO"
        else:
            level = "ERROR"

        self._log(
            level=level,
            event=event,
            run_id=run_id,
            network=network,
            status=status,
            error=error,
            study=study,
            cells=cells,
            cell=cell
        )

    def log_internal(
        self,
        level: str,
        event: str,
        run_id: Optional[str] = None,
        network: Optional[str] = None,
        error: Optional[str] = None,
        **kwargs
    ):
        """Log internal events (file loading, CLI failures, unexpected errors)"""
        self._log(
            level=level,
            event=event,
            run_id=run_id,
            network=network,
            status="error" if level in ["WARN", "WARNING", "ERROR"] else "ok",
            error=error,
            **kwargs
        )


# Global logger instance
logger = StructuredLogger()
