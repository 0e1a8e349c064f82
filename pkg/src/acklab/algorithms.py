"""Online acknowledgment policies.

Four policies plus one adversary-harness variant:

* :class:`GreedyTau` — ack when the pending batch's delay cost reaches a
  fixed threshold (tau = 1 is the classic greedy).
* :class:`GreedyMaxMonotone` — for max-aggregated objectives: the i-th ack
  fires when the pending batch's delay cost reaches i.
* :class:`GreedyBatchOblivious` — for vector objectives: ack whenever the
  global delay cost has grown by 1 since the last ack.
* :class:`SumMonotonePhases` — budget/buffer phase algorithm driven by the
  offline suffix DP; logarithmically competitive for sum-aggregated models.
* :class:`VectorThresholdGreedy` — fixed-threshold greedy over the pending
  packets' vector cost; used by the concave lower-bound driver.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cost import (
    DelayModelSpec,
    Objective,
    batch_delay_fn,
    bdelay,
    bdelay_limit,
    f_vector,
)
from .engine import OnlineAlgorithm, solve_threshold_time
from .offline import longest_critical_suffix
from .tolerance import tol_at


def _require(spec: DelayModelSpec, objective: Objective, who: str) -> None:
    if spec.objective is not objective:
        raise ValueError(
            f"{who} needs a {objective.value}-aggregated model, got {spec.kind!r}/{spec.objective.value}"
        )


class GreedyTau(OnlineAlgorithm):
    """Acknowledge once the pending batch's delay cost reaches ``tau``."""

    def __init__(self, spec: DelayModelSpec, tau: float = 1.0):
        _require(spec, Objective.SUM_BATCH, "greedy_tau")
        if not tau > 0:
            raise ValueError("tau must be positive")
        super().__init__(spec)
        self.tau = float(tau)
        self._planned: float | None = None

    def observe_arrival(self, time: float, index: int) -> None:
        self._register_arrival(time, index)
        batch = self.pending_arrivals
        self._planned = solve_threshold_time(
            batch_delay_fn(self.spec, batch),
            time,
            self.tau,
            value_sup=bdelay_limit(self.spec, batch),
        )

    def planned_ack_time(self) -> float | None:
        return self._planned

    def _after_ack(self, time: float) -> None:
        self._planned = None


class GreedyMaxMonotone(OnlineAlgorithm):
    """For max-aggregated objectives: the i-th batch is held until its delay
    cost reaches i, so each ack raises the total cost by exactly one."""

    def __init__(self, spec: DelayModelSpec):
        _require(spec, Objective.MAX_BATCH, "max-monotone greedy")
        super().__init__(spec)
        self.acks_made = 0
        self._planned: float | None = None

    @property
    def _target(self) -> float:
        return float(self.acks_made + 1)

    def observe_arrival(self, time: float, index: int) -> None:
        self._register_arrival(time, index)
        batch = self.pending_arrivals
        self._planned = solve_threshold_time(
            batch_delay_fn(self.spec, batch),
            time,
            self._target,
            value_sup=bdelay_limit(self.spec, batch),
        )

    def planned_ack_time(self) -> float | None:
        return self._planned

    def _after_ack(self, time: float) -> None:
        self.acks_made += 1
        self._planned = None


class GreedyBatchOblivious(OnlineAlgorithm):
    """For vector objectives: ack whenever the delay cost grows by 1.

    Delays of served packets are frozen at their ack time; the trigger level
    is the cost at the last ack plus one.  A new arrival can jump the cost
    past the trigger (new coordinate), in which case the ack fires at the
    arrival itself.
    """

    def __init__(self, spec: DelayModelSpec):
        _require(spec, Objective.VECTOR, "batch-oblivious greedy")
        super().__init__(spec)
        self.frozen: dict[int, float] = {}
        self.baseline = 0.0
        self._planned: float | None = None

    def _cost_at(self, t: float) -> float:
        d = list(self.frozen.values())
        d.extend(max(0.0, t - a) for _, a in self._pending)
        return f_vector(self.spec, d)

    def observe_arrival(self, time: float, index: int) -> None:
        self._register_arrival(time, index)
        self._planned = solve_threshold_time(self._cost_at, time, self.baseline + 1.0)

    def planned_ack_time(self) -> float | None:
        return self._planned

    def commit_ack(self, time: float) -> list[int]:
        for idx, a in self._pending:
            self.frozen[idx] = max(0.0, time - a)
        return super().commit_ack(time)

    def _after_ack(self, time: float) -> None:
        self.baseline = f_vector(self.spec, list(self.frozen.values()))
        self._planned = None


class VectorThresholdGreedy(OnlineAlgorithm):
    """Fixed-threshold greedy over the pending packets' vector cost.

    The vector-model counterpart of :class:`GreedyTau`: served packets drop
    out of the cost entirely and the trigger level stays ``tau``.
    """

    def __init__(self, spec: DelayModelSpec, tau: float = 1.0):
        _require(spec, Objective.VECTOR, "vector threshold greedy")
        if not tau > 0:
            raise ValueError("tau must be positive")
        super().__init__(spec)
        self.tau = float(tau)
        self._planned: float | None = None

    def _cost_at(self, t: float) -> float:
        return f_vector(self.spec, [max(0.0, t - a) for _, a in self._pending])

    def observe_arrival(self, time: float, index: int) -> None:
        self._register_arrival(time, index)
        self._planned = solve_threshold_time(self._cost_at, time, self.tau)

    def planned_ack_time(self) -> float | None:
        return self._planned

    def _after_ack(self, time: float) -> None:
        self._planned = None


@dataclass(frozen=True)
class ServiceState:
    """Inspectable snapshot of the phase algorithm's runtime state."""

    kind: str                   # "idle" | "budget" | "buffer"
    buffer_index: int           # 1..3 when kind == "buffer", else 0
    suffix_start: int | None    # start index of the current critical batch
    suffix_stop: int | None
    serve_cost: float           # bserve of the critical batch when assigned
    budget: float
    critical_time: float | None


class SumMonotonePhases(OnlineAlgorithm):
    """Phase-based policy for sum-aggregated monotone batch costs.

    Every arrival recomputes the longest critical suffix of all packets seen
    so far; its single-ack serve cost sets a budget.  A budget service acks
    once the pending delay cost reaches the budget and is followed by up to
    three buffer services at twice the budget, which promote back to a budget
    service only when a fresh critical suffix costs at least twice the
    recorded one.  Budgets are reassigned only when the critical batch is;
    the critical time is re-solved on every arrival.
    """

    IDLE, BUDGET, BUFFER = "idle", "budget", "buffer"

    def __init__(self, spec: DelayModelSpec):
        _require(spec, Objective.SUM_BATCH, "phase algorithm")
        super().__init__(spec)
        self.seen: list[float] = []
        self.kind = self.IDLE
        self.buffer_index = 0
        self.suffix_start: int | None = None
        self.suffix_stop: int | None = None
        self.serve_cost = 0.0
        self.budget = 0.0
        self._planned: float | None = None

    @property
    def service_state(self) -> ServiceState:
        return ServiceState(
            self.kind,
            self.buffer_index,
            self.suffix_start,
            self.suffix_stop,
            self.serve_cost,
            self.budget,
            self._planned,
        )

    def _assign_critical(self, start: int, serve_cost: float) -> None:
        self.suffix_start = start
        self.suffix_stop = len(self.seen)
        self.serve_cost = serve_cost
        self.budget = 2.0 * serve_cost

    def observe_arrival(self, time: float, index: int) -> None:
        self._register_arrival(time, index)
        self.seen.append(float(time))
        start = longest_critical_suffix(self.seen, self.spec)
        serve = bdelay(self.spec, self.seen[start:], time) + 1.0

        if self.kind == self.IDLE:
            self.kind = self.BUDGET
            self.buffer_index = 0
            self._assign_critical(start, serve)
            self._emit(
                "service_start",
                service="budget",
                budget=self.budget,
                serve_cost=serve,
                suffix_start=start,
            )
        elif self.kind == self.BUDGET:
            if self.suffix_start is not None and start <= self.suffix_start:
                old = self.budget
                self._assign_critical(start, serve)
                self._emit("budget_update", old=old, new=self.budget, serve_cost=serve)
        else:  # buffer service
            if serve >= 2.0 * self.serve_cost - tol_at(2.0 * self.serve_cost):
                self._assign_critical(start, serve)
                self.kind = self.BUDGET
                self.buffer_index = 0
                self._emit(
                    "promotion",
                    budget=self.budget,
                    serve_cost=serve,
                    suffix_start=start,
                )
        self._replan(time)

    def _replan(self, now: float) -> None:
        if not self._pending:
            self._planned = None
            return
        batch = self.pending_arrivals
        # Service ends when bserve(pending, t) = bdelay + 1 reaches the budget.
        self._planned = solve_threshold_time(
            batch_delay_fn(self.spec, batch),
            now,
            self.budget - 1.0,
            value_sup=bdelay_limit(self.spec, batch),
        )

    def planned_ack_time(self) -> float | None:
        return self._planned

    def _after_ack(self, time: float) -> None:
        self._planned = None
        if self.kind == self.BUDGET:
            self.kind = self.BUFFER
            self.buffer_index = 1
            old = self.budget
            self.budget = 2.0 * old
            self._emit(
                "service_start",
                service="buffer",
                index=1,
                budget=self.budget,
                serve_cost=self.serve_cost,
            )
        elif self.kind == self.BUFFER and self.buffer_index < 3:
            self.buffer_index += 1
            self._emit(
                "service_start",
                service="buffer",
                index=self.buffer_index,
                budget=self.budget,
                serve_cost=self.serve_cost,
            )
        else:
            self.kind = self.IDLE
            self.buffer_index = 0
            self.suffix_start = None
            self.suffix_stop = None
            self.serve_cost = 0.0
            self.budget = 0.0


ALGORITHM_NAMES = ("greedy_tau", "max_mono", "vector_greedy", "phases", "greedy_tau_vector")


def make_algorithm(alg_spec: dict, model: DelayModelSpec) -> OnlineAlgorithm:
    """Build an algorithm from its JSON selector, validating model fit."""
    if not isinstance(alg_spec, dict) or "alg" not in alg_spec:
        raise ValueError("algorithm spec must be an object with an 'alg' field")
    name = alg_spec["alg"]
    if name == "greedy_tau":
        return GreedyTau(model, tau=float(alg_spec.get("tau", 1.0)))
    if name == "max_mono":
        return GreedyMaxMonotone(model)
    if name == "vector_greedy":
        return GreedyBatchOblivious(model)
    if name == "phases":
        return SumMonotonePhases(model)
    if name == "greedy_tau_vector":
        return VectorThresholdGreedy(model, tau=float(alg_spec.get("tau", 1.0)))
    raise ValueError(f"unknown algorithm {name!r}; expected one of {ALGORITHM_NAMES}")
