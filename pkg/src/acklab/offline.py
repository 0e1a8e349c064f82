"""Exact offline solvers for the acknowledgment batching problem.

* :func:`dp_optimal` — O(n^2) prefix DP for sum-aggregated batch models,
  acknowledging each batch at its last packet's arrival (WLOG for monotone
  batch costs: moving an ack earlier onto the batch's last arrival never
  increases cost).
* :func:`suffix_opt` / :func:`longest_critical_suffix` — the same recurrence
  run right-to-left, used by the phase-based online algorithm to find the
  longest suffix whose optimum is a single acknowledgment.
* :func:`brute_force_optimal` — enumeration over all contiguous partitions;
  the independent oracle for every objective kind (and the only exact one for
  max- and vector-aggregated objectives).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .cost import DelayModelSpec, Objective, bdelay, f_vector, plf_eval_array
from .model import Schedule


class BruteForceInfeasibleError(ValueError):
    """Instance too large for exhaustive partition enumeration."""


_VECTORIZED_KINDS = ("linear_sum", "capped_linear", "max_wait", "max_wait_pow", "permit_plf")


def _require_sum_batch(spec: DelayModelSpec, what: str) -> None:
    if spec.objective is not Objective.SUM_BATCH:
        raise ValueError(f"{what} requires a sum-aggregated batch model, got {spec.kind!r}/{spec.objective.value}")


def _blocks_ending_at(
    spec: DelayModelSpec, arr: np.ndarray, prefix: np.ndarray, i: int
) -> np.ndarray:
    """bdelay(arr[j..i], arr[i]) for every block start j in 0..i."""
    a_i = arr[i]
    if spec.kind == "linear_sum" or spec.kind == "capped_linear":
        counts = np.arange(i + 1, 0, -1, dtype=float)
        vals = a_i * counts - (prefix[i + 1] - prefix[: i + 1])
        if spec.kind == "capped_linear":
            vals = np.minimum(vals, spec.tau)
    elif spec.kind == "max_wait":
        vals = a_i - arr[: i + 1]
    elif spec.kind == "max_wait_pow":
        vals = (a_i - arr[: i + 1]) ** spec.p
    elif spec.kind == "permit_plf":
        vals = plf_eval_array(np.maximum(a_i - arr[: i + 1], 0.0), spec.num_classes) - 1.0
    else:
        vals = np.array(
            [bdelay(spec, arr[j : i + 1], a_i) for j in range(i + 1)], dtype=float
        )
    return np.maximum(vals, 0.0)


def _starting_rows(spec: DelayModelSpec, arr: np.ndarray, prefix: np.ndarray):
    """Row factory: ``row(p)[q - p] = bdelay(arr[p..q], arr[q])`` for q >= p.

    Shared precomputation is hoisted out so the suffix DP's inner loop pays
    only a couple of vector operations per row.
    """
    kind = spec.kind
    n = arr.size
    if kind in ("linear_sum", "capped_linear"):
        # (q - p + 1) * a_q - (prefix[q+1] - prefix[p])  ==  u_q - p * a_q + prefix[p]
        u = arr * np.arange(1.0, n + 1.0) - prefix[1:]
        tau = spec.tau

        def row(p: int) -> np.ndarray:
            vals = np.maximum(u[p:] - p * arr[p:] + prefix[p], 0.0)
            if tau is not None:
                vals = np.minimum(vals, tau)
            return vals

        return row
    if kind == "max_wait":
        return lambda p: arr[p:] - arr[p]
    if kind == "max_wait_pow":
        exponent = spec.p
        return lambda p: (arr[p:] - arr[p]) ** exponent
    if kind == "permit_plf":
        classes = spec.num_classes
        return lambda p: plf_eval_array(arr[p:] - arr[p], classes) - 1.0

    def generic(p: int) -> np.ndarray:
        return np.array(
            [bdelay(spec, arr[p : q + 1], arr[q]) for q in range(p, n)], dtype=float
        )

    return generic


class DpTable:
    """Prefix DP values and back-pointers.

    ``values[i]`` is the optimal cost of serving the first ``i`` packets;
    ``choice[i]`` is the start index of the last batch in that optimum.
    """

    def __init__(self, values: np.ndarray, choice: np.ndarray):
        self.values = values
        self.choice = choice


def dp_table(arrivals: Sequence[float], spec: DelayModelSpec) -> DpTable:
    _require_sum_batch(spec, "dp_optimal")
    arr = np.asarray(arrivals, dtype=float)
    n = arr.size
    values = np.zeros(n + 1)
    choice = np.zeros(n + 1, dtype=int)
    prefix = np.concatenate(([0.0], np.cumsum(arr)))
    for i in range(n):
        cand = values[: i + 1] + _blocks_ending_at(spec, arr, prefix, i) + 1.0
        j = int(np.argmin(cand))  # first minimum: ties prefer the larger batch
        values[i + 1] = cand[j]
        choice[i + 1] = j
    return DpTable(values, choice)


def dp_optimal(
    arrivals: Sequence[float], spec: DelayModelSpec
) -> tuple[float, Schedule]:
    """Optimal cost and a realizing schedule for sum-aggregated batch models."""
    table = dp_table(arrivals, spec)
    arr = tuple(float(a) for a in arrivals)
    acks: list[float] = []
    i = len(arr)
    while i > 0:
        acks.append(arr[i - 1])
        i = int(table.choice[i])
    # Exactly tied arrivals across a batch boundary collapse into one ack.
    schedule = Schedule(tuple(sorted(set(acks))))
    return float(table.values[len(arr)]), schedule


def _suffix_capped(arr: np.ndarray, prefix: np.ndarray, tau: float) -> np.ndarray:
    """Suffix DP for the capped-linear model in O(n * window).

    ``min(lin, tau)`` distributes over the DP minimum, so blocks whose linear
    delay already exceeds the cap are all dominated by ``tau + 1 + min G``
    (a running minimum), and only the short prefix of blocks still under the
    cap needs explicit scanning.  The block delay grows with the block end,
    so that window boundary moves monotonically (two pointers).
    """
    n = arr.size
    a = arr.tolist()
    s = prefix.tolist()
    G = [0.0] * (n + 1)
    run_min = math.inf
    qmax = n - 1
    for p in range(n - 1, -1, -1):
        gp1 = G[p + 1]
        if gp1 < run_min:
            run_min = gp1
        if qmax < p:
            qmax = p
        sp = s[p]
        while qmax > p and a[qmax] * (qmax - p + 1) - (s[qmax + 1] - sp) >= tau:
            qmax -= 1
        best = tau + 1.0 + run_min
        for q in range(p, qmax + 1):
            lin = a[q] * (q - p + 1) - (s[q + 1] - sp)
            if lin < 0.0:
                lin = 0.0
            v = lin + 1.0 + G[q + 1]
            if v < best:
                best = v
        G[p] = best
    return np.asarray(G)


def _suffix_permit(arr: np.ndarray, num_classes: int) -> np.ndarray:
    """Suffix DP for the permit price curve in O(n * classes).

    The serve cost of a block is ``min_k (2**k + span * 2**-k)``, a minimum
    of affine functions of the span, so the DP splits per class into a
    running minimum over block ends.  Classes above ``log4(max span) + 1``
    can never attain the minimum for any span in range and are skipped.
    """
    n = arr.size
    a = arr.tolist()
    span = a[-1] - a[0]
    keff = 0
    while 4.0 ** keff < span:
        keff += 1
    keff = min(num_classes, keff + 1)
    costs = [2.0 ** k for k in range(keff + 1)]
    slopes = [2.0 ** (-k) for k in range(keff + 1)]
    class_min = [math.inf] * (keff + 1)
    G = [0.0] * (n + 1)
    ks = range(keff + 1)
    for p in range(n - 1, -1, -1):
        gp1 = G[p + 1]
        ap = a[p]
        best = math.inf
        for k in ks:
            scaled = ap * slopes[k]
            t = scaled + gp1
            if t < class_min[k]:
                class_min[k] = t
            v = costs[k] + class_min[k] - scaled
            if v < best:
                best = v
        G[p] = best
    return np.asarray(G)


def _suffix_table(spec: DelayModelSpec, arr: np.ndarray, prefix: np.ndarray) -> np.ndarray:
    n = arr.size
    if n == 0:
        return np.zeros(1)
    if spec.kind == "capped_linear":
        return _suffix_capped(arr, prefix, spec.tau)
    # The permit class decomposition mixes absolute times across block ends;
    # at huge time scales that cancellation loses precision, so fall back to
    # the row scan (which subtracts same-scale times first) beyond 1e6.
    if spec.kind == "permit_plf" and arr[-1] <= 1e6:
        return _suffix_permit(arr, spec.num_classes)
    row = _starting_rows(spec, arr, prefix)
    G = np.zeros(n + 1)
    for p in range(n - 1, -1, -1):
        G[p] = float(np.min(row(p) + G[p + 1 :])) + 1.0
    return G


def suffix_opt(arrivals: Sequence[float], spec: DelayModelSpec) -> np.ndarray:
    """Optimal cost of serving each suffix of the arrival prefix.

    Returns ``G`` of length ``n + 1`` with ``G[p]`` the optimal cost of
    serving packets ``p..n-1`` on their own and ``G[n] = 0``.
    """
    _require_sum_batch(spec, "suffix_opt")
    arr = np.asarray(arrivals, dtype=float)
    if arr.size == 0:
        return np.zeros(1)
    prefix = np.concatenate(([0.0], np.cumsum(arr)))
    return _suffix_table(spec, arr, prefix)


def longest_critical_suffix(arrivals: Sequence[float], spec: DelayModelSpec) -> int:
    """Start index of the longest suffix whose optimum is one acknowledgment.

    A suffix starting at ``p`` is critical when serving it with a single ack
    at its last packet's arrival is offline-optimal (ties count as critical).
    The singleton suffix always qualifies, so the result is well defined.

    The capped and permit models take their fast suffix kernels plus one
    vectorized criticality pass.  The remaining built-ins scan right-to-left
    and prune using the fact that their zero-delay batches cost nothing, so
    the packets in ``p'..p-1`` can always be absorbed for at most one ack per
    tied-arrival group (``G[p'] <= (p - p') + G[p]``) while the single-ack
    cost only grows as the suffix extends: once the single-ack slack exceeds
    ``p``, no earlier start can be critical.  Pruning never changes the
    answer.
    """
    arr = np.asarray(arrivals, dtype=float)
    n = arr.size
    if n == 0:
        raise ValueError("empty arrival prefix has no critical suffix")
    prefix = np.concatenate(([0.0], np.cumsum(arr)))
    single = _blocks_ending_at(spec, arr, prefix, n - 1) + 1.0
    if spec.kind == "capped_linear" or (spec.kind == "permit_plf" and arr[-1] <= 1e6):
        G = _suffix_table(spec, arr, prefix)
        tol = np.maximum(np.abs(G[:n]), 1.0) * 1e-9
        hits = np.nonzero(single - G[:n] <= tol)[0]
        if hits.size == 0:
            raise AssertionError("no critical suffix found; DP inconsistency")
        return int(hits[0])
    prunable = spec.kind in _VECTORIZED_KINDS
    # single[0] bounds every G[p], so this margin dominates the criticality
    # tolerance at every earlier start and pruning never changes the answer.
    margin = 1e-9 * max(1.0, float(single[0]))
    row = _starting_rows(spec, arr, prefix)
    G = np.zeros(n + 1)
    best = None
    for p in range(n - 1, -1, -1):
        G[p] = float(np.min(row(p) + G[p + 1 :])) + 1.0
        slack = float(single[p]) - G[p]
        if slack <= 1e-9 * max(1.0, abs(G[p])):
            best = p
        elif prunable and slack > p + margin:
            break
    if best is None:  # the singleton suffix is always critical
        raise AssertionError("no critical suffix found; DP inconsistency")
    return best


def brute_force_optimal(
    arrivals: Sequence[float], spec: DelayModelSpec
) -> tuple[float, Schedule]:
    """Exhaustive minimum over all contiguous partitions (any objective).

    Each block is acknowledged at its last packet's arrival.  Partitions
    whose induced ack times collide (exactly tied arrivals across a block
    boundary) are skipped; the merged partition is always enumerated too and
    costs no more under the built-in models.
    """
    arr = tuple(float(a) for a in arrivals)
    n = len(arr)
    if n == 0:
        return 0.0, Schedule(())
    if n > 22:
        raise BruteForceInfeasibleError(
            f"brute force enumerates 2^(n-1) partitions; n={n} exceeds the n<=22 guard"
        )
    objective = spec.objective
    best_cost = None
    best_acks: tuple[float, ...] = ()
    for mask in range(1 << (n - 1)):
        cuts = [i + 1 for i in range(n - 1) if mask >> i & 1]
        bounds = [0] + cuts + [n]
        acks = [arr[b - 1] for b in bounds[1:]]
        if any(acks[i] >= acks[i + 1] for i in range(len(acks) - 1)):
            continue
        k = len(acks)
        if objective is Objective.VECTOR:
            d: list[float] = []
            for lo, hi, t in zip(bounds, bounds[1:], acks):
                d.extend(t - arr[j] for j in range(lo, hi))
            delay = f_vector(spec, d)
        else:
            per = [
                bdelay(spec, arr[lo:hi], t)
                for lo, hi, t in zip(bounds, bounds[1:], acks)
            ]
            delay = sum(per) if objective is Objective.SUM_BATCH else max(per)
        cost = k + delay
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best_acks = tuple(acks)
    assert best_cost is not None
    return float(best_cost), Schedule(best_acks)
