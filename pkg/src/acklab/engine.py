"""Deterministic continuous-time simulation of online acknowledgment policies.

The simulator owns event ordering (arrivals before acks at equal times) and
end-of-input flushing; algorithms own their trigger logic and expose it via
the :class:`OnlineAlgorithm` contract.  :class:`SimulationDriver` is the
incremental core so adaptive adversaries can interleave releases with the
algorithm's reactions; :func:`simulate` replays a fixed instance through it.
"""

from __future__ import annotations

import copy
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable

from .cost import DelayModelSpec
from .model import Instance, Schedule
from .tolerance import tol_at

log = logging.getLogger(__name__)

EXPANSION_CAP = 2.0 ** 64
_MAX_SOLVE_STEPS = 500


class EngineError(RuntimeError):
    """An algorithm violated the simulation contract."""


@dataclass(frozen=True)
class TraceEvent:
    """One timestamped simulation event with a model-specific payload."""

    time: float
    kind: str
    detail: dict

    def to_json_line(self) -> str:
        return json.dumps({"time": self.time, "kind": self.kind, "detail": self.detail})


class OnlineAlgorithm(ABC):
    """Behavioral contract for deterministic online acknowledgment policies.

    Implementations must be deterministic functions of the observation
    sequence, must never plan an ack in the past, and may only use arrivals
    observed so far.  ``snapshot``/``restore`` produce an independent copy of
    the full state, which the engine uses for look-ahead simulation.
    """

    spec: DelayModelSpec

    def __init__(self, spec: DelayModelSpec):
        self.spec = spec
        self._pending: list[tuple[int, float]] = []  # (packet index, arrival time)
        self._events: list[tuple[str, dict]] = []
        self.last_arrival_index: int | None = None
        self.last_arrival_time: float | None = None

    # -- observation / commitment ------------------------------------------

    @abstractmethod
    def observe_arrival(self, time: float, index: int) -> None:
        """Called when packet ``index`` arrives at ``time``."""

    @abstractmethod
    def planned_ack_time(self) -> float | None:
        """Next self-triggered ack time, or None if no ack is planned."""

    def commit_ack(self, time: float) -> list[int]:
        """Acknowledge all pending packets at ``time``; returns their indices."""
        acked = [idx for idx, _ in self._pending]
        self._pending.clear()
        self._after_ack(time)
        return acked

    def flush_request(self, time: float) -> list[int]:
        """End-of-input: serve whatever is still pending at ``time``."""
        return self.commit_ack(time)

    def _after_ack(self, time: float) -> None:
        """Hook for state transitions once a batch has been served."""

    # -- shared bookkeeping --------------------------------------------------

    def _register_arrival(self, time: float, index: int) -> None:
        self._pending.append((index, float(time)))
        self.last_arrival_index = index
        self.last_arrival_time = float(time)

    @property
    def has_pending(self) -> bool:
        return bool(self._pending)

    @property
    def pending_arrivals(self) -> list[float]:
        return [a for _, a in self._pending]

    # -- cloning -------------------------------------------------------------

    def snapshot(self) -> dict:
        return copy.deepcopy(self.__dict__)

    def restore(self, state: dict) -> None:
        self.__dict__.clear()
        self.__dict__.update(copy.deepcopy(state))

    # -- tracing -------------------------------------------------------------

    def _emit(self, kind: str, **detail) -> None:
        self._events.append((kind, detail))

    def pop_events(self) -> list[tuple[str, dict]]:
        out, self._events = self._events, []
        return out


class SimulationDriver:
    """Incremental event loop around one algorithm instance.

    Callers deliver arrivals in time order; the driver commits the
    algorithm's planned acks that fall strictly before each delivery, so an
    arrival and an ack at the same instant process the arrival first.
    """

    def __init__(self, algorithm: OnlineAlgorithm):
        self.algorithm = algorithm
        self.now = 0.0
        self.ack_times: list[float] = []
        self.ack_batches: list[list[int]] = []
        self.trace: list[TraceEvent] = []

    def _drain(self) -> None:
        for kind, detail in self.algorithm.pop_events():
            self.trace.append(TraceEvent(self.now, kind, detail))

    def _planned(self) -> float | None:
        t = self.algorithm.planned_ack_time()
        if t is not None and t < self.now - tol_at(self.now):
            raise EngineError(f"algorithm planned ack at {t!r} in the past of {self.now!r}")
        return t

    def _commit(self, t: float) -> list[int]:
        self.now = max(self.now, t)
        acked = self.algorithm.commit_ack(t)
        if not acked:
            raise EngineError(f"ack at {t!r} served no pending packet")
        if self.ack_times and t <= self.ack_times[-1]:
            raise EngineError(f"ack times not strictly increasing at {t!r}")
        self.ack_times.append(t)
        self.ack_batches.append(acked)
        self.trace.append(TraceEvent(t, "ack", {"indices": acked}))
        self._drain()
        return acked

    def run_until(self, t_limit: float) -> None:
        """Commit planned acks strictly before ``t_limit``."""
        while True:
            t = self._planned()
            if t is None or t >= t_limit:
                return
            self._commit(t)

    def deliver(self, time: float, index: int) -> None:
        """Advance to ``time`` and hand the arrival to the algorithm."""
        if time < self.now - tol_at(self.now):
            raise EngineError(f"arrival at {time!r} is in the past of {self.now!r}")
        self.run_until(time)
        self.now = max(self.now, time)
        self.trace.append(TraceEvent(time, "arrival", {"index": index}))
        self.algorithm.observe_arrival(time, index)
        self._drain()

    def finish(self, horizon: float) -> None:
        """Run remaining planned acks (possibly past the horizon), then flush.

        The algorithm never learns the input ended; if it has pending packets
        but no planned ack, the driver issues one flush ack at
        ``max(horizon, now)`` — the earliest legal time.
        """
        while True:
            t = self._planned()
            if t is None:
                break
            self._commit(t)
        if self.algorithm.has_pending:
            t = max(horizon, self.now)
            if self.ack_times and t <= self.ack_times[-1]:
                raise EngineError(f"flush at {t!r} collides with an earlier ack")
            self.now = t
            self.trace.append(TraceEvent(t, "flush", {}))
            acked = self.algorithm.flush_request(t)
            if not acked:
                raise EngineError("flush served no packet despite pending packets")
            self.ack_times.append(t)
            self.ack_batches.append(acked)
            self.trace.append(TraceEvent(t, "ack", {"indices": acked}))
            self._drain()
        if self.algorithm.has_pending:
            raise EngineError("algorithm left packets unacknowledged after flush")


def simulate(
    instance: Instance, algorithm: OnlineAlgorithm
) -> tuple[Schedule, list[TraceEvent]]:
    """Run the algorithm over the instance; returns its schedule and trace."""
    if algorithm.spec != instance.model:
        raise EngineError("algorithm was built for a different delay model")
    driver = SimulationDriver(algorithm)
    for index, a in enumerate(instance.arrivals):
        driver.deliver(a, index)
    driver.finish(instance.effective_horizon)
    served = sum(len(b) for b in driver.ack_batches)
    if served != instance.n:
        raise EngineError(f"schedule served {served} of {instance.n} packets")
    return Schedule(tuple(driver.ack_times)), driver.trace


# ---------------------------------------------------------------------------
# Threshold root solving
# ---------------------------------------------------------------------------

def solve_threshold_time(
    evaluator: Callable[[float], float],
    t_lo: float,
    target: float,
    value_sup: float | None = None,
    expansion_cap: float = EXPANSION_CAP,
) -> float | None:
    """Earliest ``t >= t_lo`` with ``evaluator(t) >= target`` (right-continuous).

    The evaluator must be monotone non-decreasing.  Returns ``t_lo`` when the
    target is already met there.  Returns None when the target is provably out
    of reach (``value_sup`` below the target) or when exponential expansion
    exceeds ``expansion_cap`` scaled by ``max(1, |t_lo|)`` without a crossing;
    the two cases are distinguished in the debug log only.
    """
    tol_v = tol_at(target)
    if value_sup is not None and value_sup < target - tol_v:
        return None
    f_lo = evaluator(t_lo)
    if f_lo >= target - tol_v:
        return t_lo
    scale = max(1.0, abs(t_lo))
    step = 1e-6 * scale
    lo, hi = t_lo, t_lo + step
    f_hi = evaluator(hi)
    steps = 0
    while f_hi < target - tol_v:
        if f_hi < f_lo - tol_at(f_lo):
            raise EngineError("evaluator decreased during expansion; model contract violated")
        if step > expansion_cap * scale or steps > _MAX_SOLVE_STEPS:
            log.debug("threshold expansion cap hit without crossing (target=%r)", target)
            return None
        lo, f_lo = hi, f_hi
        step *= 2.0
        hi = t_lo + step
        f_hi = evaluator(hi)
        steps += 1
    # Bisect: refine time to tolerance, and value too wherever the evaluator
    # is continuous at the crossing (jumps bottom out at machine precision).
    floor = 4e-16 * max(1.0, abs(hi))
    for _ in range(_MAX_SOLVE_STEPS):
        if hi - lo <= floor:
            break
        if hi - lo <= tol_at(hi) and f_hi <= target + tol_v:
            break
        mid = 0.5 * (lo + hi)
        f_mid = evaluator(mid)
        if f_mid < f_lo - tol_at(f_lo) or f_mid > f_hi + tol_at(f_hi):
            raise EngineError("evaluator not monotone during bisection; model contract violated")
        if f_mid >= target - tol_v:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    return hi


def next_threshold(algorithm: OnlineAlgorithm) -> float | None:
    """Time at which the most recent packet gets acknowledged absent arrivals.

    Clones the algorithm state (taken right after the latest arrival was
    observed), runs it forward with no further input, and reports when the
    latest packet's batch is served; None if it never would be without a
    flush.  The live algorithm state is untouched.
    """
    target = algorithm.last_arrival_index
    if target is None:
        raise EngineError("next_threshold needs at least one observed arrival")
    snap = algorithm.snapshot()
    try:
        for _ in range(100_000):
            t = algorithm.planned_ack_time()
            if t is None:
                return None
            acked = algorithm.commit_ack(t)
            if target in acked:
                return t
        raise EngineError("look-ahead did not converge")
    finally:
        algorithm.restore(snap)
