import json

import pytest

from core.errors import (BudgetEscalation, ChainNotFoundError, ErrorHandler, GeometryError,
                         HypothesisUnsatisfiable, InputError)
from core.worker_pool import RuntimeStats, WorkerPool, chunked


def test_pool_keeps_submission_order():
    pool = WorkerPool(workers=4)
    assert pool.map(lambda x: x * x, range(20), label="square") == [x * x for x in range(20)]
    assert pool.stats.tasks["square"]["items"] == 20


def test_pool_rejects_zero_workers():
    with pytest.raises(ValueError):
        WorkerPool(workers=0)


def test_runtime_stats_are_saved(tmp_path):
    stats = RuntimeStats()
    stats.record("walks", 0.5, 10)
    stats.save(tmp_path / "runtime.json")
    saved = json.loads((tmp_path / "runtime.json").read_text())
    assert saved["tasks"]["walks"] == {"calls": 1, "items": 10, "seconds": 0.5}


def test_chunked_covers_the_range():
    assert chunked(5, 2) == [slice(0, 2), slice(2, 4), slice(4, 5)]


def test_escalation_retries_until_success():
    seen = []

    def attempt(budget):
        seen.append(budget)
        if budget < 4:
            raise ChainNotFoundError("too short", cube_id=(0, 0))
        return budget

    assert BudgetEscalation(1.0, factor=2.0, max_attempts=4).run(attempt) == 4.0
    assert seen == [1.0, 2.0, 4.0]


def test_escalation_gives_up():
    def attempt(budget):
        raise ChainNotFoundError("never", cube_id=(1, 0))

    with pytest.raises(ChainNotFoundError):
        BudgetEscalation(1.0, max_attempts=2).run(attempt)
    with pytest.raises(InputError):
        BudgetEscalation(1.0, factor=1.0)


def test_error_log_and_exit_status(tmp_path):
    handler = ErrorHandler(str(tmp_path))
    entry = handler.log_error(HypothesisUnsatisfiable("N above cap", N=4.0), "jn")
    assert entry["recoverable"]
    assert entry["recovery_action"] == ErrorHandler.SUGGESTIONS["HypothesisUnsatisfiable"]
    assert handler.exit_status(InputError("bad")) == 2
    assert handler.exit_status(GeometryError("broken")) == 1
    saved = json.loads((tmp_path / ".toolkit" / "error_log.json").read_text())
    assert saved[0]["error_type"] == "HypothesisUnsatisfiable"
    assert len(ErrorHandler(str(tmp_path)).error_history) == 1
