"""Error types, error log and budget escalation for the toolkit."""

import json
import logging
import traceback
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

log = logging.getLogger(__name__)


class ErrorSeverity(Enum):
    """Error severity levels"""
    LOW = 1
    MEDIUM = 2
    HIGH = 3
    CRITICAL = 4


class ToolkitError(Exception):
    """Root of every error raised by the toolkit."""

    severity = ErrorSeverity.MEDIUM
    exit_status = 1

    def __init__(self, message: str, context: Optional[str] = None, **details: Any):
        super().__init__(message)
        self.context = context
        self.details = details


class InputError(ToolkitError, ValueError):
    """Rejected input: bad parameters, malformed configs, violated preconditions."""

    severity = ErrorSeverity.LOW
    exit_status = 2


class UnsupportedDimensionError(InputError):
    pass


class GeometryError(ToolkitError):
    """A geometric invariant failed on a constructed object."""

    severity = ErrorSeverity.HIGH


class DegenerateSetError(GeometryError):
    pass


class CoverageError(GeometryError):
    """A point or cube lies outside the truncated coverage of a decomposition."""

    severity = ErrorSeverity.LOW


class CorkscrewError(GeometryError):
    def __init__(self, message: str, best_constant: float, **details: Any):
        super().__init__(message, best_constant=best_constant, **details)
        self.best_constant = best_constant


class ChainNotFoundError(GeometryError):
    def __init__(self, message: str, cube_id: Any, **details: Any):
        super().__init__(message, cube_id=cube_id, **details)
        self.cube_id = cube_id


class FieldEvaluationError(ToolkitError):
    """A field returned non-finite values on quadrature nodes."""

    severity = ErrorSeverity.HIGH


class HypothesisUnsatisfiable(InputError):
    """The John-Nirenberg hypothesis cannot be met below the configured cap."""


class VerdictFailure(ToolkitError):
    severity = ErrorSeverity.HIGH
    exit_status = 1


class BudgetEscalation:
    """Retry a computation with a geometrically growing budget.

    ``func(budget)`` is called with ``base``, ``base*factor``, ... until it
    stops raising one of ``retry_on`` or ``max_attempts`` is exhausted.
    """

    def __init__(
        self,
        base: float,
        factor: float = 2.0,
        max_attempts: int = 4,
        retry_on: tuple = (ChainNotFoundError, CorkscrewError),
    ):
        if base <= 0 or factor <= 1 or max_attempts < 1:
            raise InputError("budget escalation needs base > 0, factor > 1, attempts >= 1")
        self.base = base
        self.factor = factor
        self.max_attempts = max_attempts
        self.retry_on = retry_on

    def budget(self, attempt: int) -> float:
        return self.base * self.factor ** attempt

    def run(self, func: Callable[[float], Any]) -> Any:
        last_error = None
        for attempt in range(self.max_attempts):
            budget = self.budget(attempt)
            try:
                result = func(budget)
                if attempt > 0:
                    log.debug("succeeded after %d escalations (budget %.4g)", attempt, budget)
                return result
            except self.retry_on as e:
                last_error = e
                log.debug("attempt %d/%d failed at budget %.4g: %s",
                          attempt + 1, self.max_attempts, budget, e)
        raise last_error


class ErrorHandler:
    """Error log kept next to the experiment artifacts."""

    SUGGESTIONS = {
        "InputError": "Check the config values and flags against their documented ranges",
        "UnsupportedDimensionError": "Only planar sets (n = 1) have exact region boundaries",
        "HypothesisUnsatisfiable": "Raise jn.n_cap or relax jn.alpha",
        "CoverageError": "Increase the Whitney depth or shrink the window",
        "ChainNotFoundError": "Increase the chain budget or check the window covers the corkscrew",
        "CorkscrewError": "The set may be pathological at this scale; inspect the best constant",
        "DegenerateSetError": "The set has zero measure on the sampled window",
        "FieldEvaluationError": "Check that the field's domain tag covers the structure's Whitney region",
        "VerdictFailure": "An empirical inequality failed; inspect the report rows",
    }

    def __init__(self, workspace_dir: str = "out"):
        self.workspace_dir = Path(workspace_dir)
        self.error_log_file = self.workspace_dir / ".toolkit" / "error_log.json"
        self.error_history: List[Dict[str, Any]] = []
        self.load_error_history()

    def log_error(self, error: Exception, context: str) -> Dict[str, Any]:
        severity = getattr(error, "severity", ErrorSeverity.CRITICAL)
        recoverable = isinstance(error, InputError)
        error_entry = {
            "timestamp": datetime.now().isoformat(),
            "error_type": type(error).__name__,
            "error_message": str(error),
            "severity": severity.name,
            "context": context,
            "recoverable": recoverable,
            "recovery_action": self.get_recovery_suggestion(type(error).__name__),
            "details": {k: repr(v) for k, v in getattr(error, "details", {}).items()},
            "traceback": "".join(traceback.format_exception(type(error), error, error.__traceback__)),
        }
        self.error_history.append(error_entry)
        self._save_error_log()
        log.error("%s in %s: %s", error_entry["error_type"], context, error)
        return error_entry

    def exit_status(self, error: Exception) -> int:
        return getattr(error, "exit_status", 1)

    def _save_error_log(self):
        try:
            self.error_log_file.parent.mkdir(parents=True, exist_ok=True)
            with open(self.error_log_file, "w", encoding="utf-8") as f:
                json.dump(self.error_history, f, indent=2)
        except OSError as e:
            log.warning("could not save error log: %s", e)

    def load_error_history(self):
        if self.error_log_file.exists():
            try:
                with open(self.error_log_file, "r", encoding="utf-8") as f:
                    self.error_history = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                log.warning("could not load error history: %s", e)

    def get_recovery_suggestion(self, error_type: str) -> str:
        return self.SUGGESTIONS.get(error_type, "Unexpected error. Check logs for details")
