from __future__ import annotations

import threading
from typing import Any, ClassVar, Dict

import structlog


logger = structlog.get_logger(__name__)


class Metrics:
    """Very lightweight in-process counter helper.

    In lieu of a metrics backend, increments are logged as structured events while
    in-memory counters stay available for inspection in tests. Safe to call from
    worker threads.

    Counters: trials_completed, states_evaluated, sir_denominator_floored,
    campaigns_completed.
    """

    _counters: ClassVar[Dict[str, int]] = {}
    _lock: ClassVar[threading.Lock] = threading.Lock()

    @classmethod
    def inc(cls, name: str, amount: int = 1, **labels: Any) -> None:
        with cls._lock:
            cls._counters[name] = cls._counters.get(name, 0) + amount
        logger.debug(
            "metric_increment",
            metric=name,
            amount=amount,
            **({"labels": labels} if labels else {}),
        )

    @classmethod
    def get(cls, name: str) -> int:
        return int(cls._counters.get(name, 0))

    @classmethod
    def reset(cls) -> None:
        with cls._lock:
            cls._counters.clear()
