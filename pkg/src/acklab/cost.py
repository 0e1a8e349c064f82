"""Delay-cost model catalog.

Two families of models are supported:

* batch models, evaluated per acknowledged batch via :func:`bdelay`
  (``linear_sum``, ``max_wait``, ``max_wait_pow``, ``capped_linear``,
  ``permit_plf``), aggregated as a sum or a max across batches;
* vector models, evaluated once over the per-packet delay vector via
  :func:`f_vector` (``lp``, ``top_k``, ``ordered``, ``concave_two_piece``,
  ``sum_vector``).

The module also provides the piecewise-linear permit cost curve
:func:`plf_eval` and randomized property testers for monotonicity and the
lattice (continuous-submodularity) inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .tolerance import tol_at


class Objective(str, Enum):
    """How per-batch or per-packet delay costs aggregate into the objective."""

    SUM_BATCH = "sum"
    MAX_BATCH = "max"
    VECTOR = "vector"


BATCH_KINDS = ("linear_sum", "max_wait", "max_wait_pow", "capped_linear", "permit_plf")
VECTOR_KINDS = ("lp", "top_k", "ordered", "concave_two_piece", "sum_vector")

_DEFAULT_OBJECTIVE = {
    "linear_sum": Objective.SUM_BATCH,
    "max_wait": Objective.MAX_BATCH,
    "max_wait_pow": Objective.MAX_BATCH,
    "capped_linear": Objective.SUM_BATCH,
    "permit_plf": Objective.SUM_BATCH,
}

DEFAULT_PERMIT_CLASSES = 32


@dataclass(frozen=True)
class DelayModelSpec:
    """Immutable description of a delay-cost model.

    Only the fields relevant to ``kind`` are set; the rest stay ``None``.
    """

    kind: str
    objective: Objective
    p: float | None = None                      # exponent: max_wait_pow, lp
    tau: float | None = None                    # cap: capped_linear
    num_classes: int | None = None              # permit classes: permit_plf
    k: int | None = None                        # top_k
    weights: tuple[float, ...] | None = None    # ordered norm (non-increasing)
    prefix_len: int | None = None               # concave_two_piece split point
    eps: float | None = None                    # concave_two_piece small slope
    dim: int | None = None                      # concave_two_piece nominal size

    def __post_init__(self) -> None:
        if self.kind in BATCH_KINDS:
            if self.objective not in (Objective.SUM_BATCH, Objective.MAX_BATCH):
                raise ValueError(f"batch model {self.kind!r} needs a sum or max objective")
        elif self.kind in VECTOR_KINDS:
            if self.objective is not Objective.VECTOR:
                raise ValueError(f"vector model {self.kind!r} needs the vector objective")
        else:
            raise ValueError(f"unknown delay model kind {self.kind!r}")

        if self.kind == "max_wait_pow":
            if self.p is None or self.p < 1 or int(self.p) != self.p:
                raise ValueError("max_wait_pow needs an integer exponent p >= 1")
        if self.kind == "capped_linear":
            if self.tau is None or not self.tau > 0:
                raise ValueError("capped_linear needs a cap tau > 0")
        if self.kind == "permit_plf":
            if self.num_classes is None or self.num_classes < 1:
                raise ValueError("permit_plf needs num_classes >= 1")
        if self.kind == "lp":
            if self.p is None or self.p < 1:
                raise ValueError("lp norm needs p >= 1 (math.inf allowed)")
        if self.kind == "top_k":
            if self.k is None or self.k < 1:
                raise ValueError("top_k needs k >= 1")
        if self.kind == "ordered":
            w = self.weights
            if not w or any(x < 0 for x in w):
                raise ValueError("ordered norm needs non-negative weights")
            if any(w[i] < w[i + 1] for i in range(len(w) - 1)):
                raise ValueError("ordered norm weights must be non-increasing")
        if self.kind == "concave_two_piece":
            if self.prefix_len is None or self.prefix_len < 1:
                raise ValueError("concave_two_piece needs prefix_len >= 1")
            if self.eps is None or self.eps < 0:
                raise ValueError("concave_two_piece needs eps >= 0")
            if self.dim is None or self.dim < self.prefix_len:
                raise ValueError("concave_two_piece needs dim >= prefix_len")

    @property
    def is_batch_kind(self) -> bool:
        return self.kind in BATCH_KINDS


def linear_sum(objective: Objective = Objective.SUM_BATCH) -> DelayModelSpec:
    """Total waiting time of the batch."""
    return DelayModelSpec("linear_sum", objective)


def max_wait(objective: Objective = Objective.MAX_BATCH) -> DelayModelSpec:
    """Largest waiting time in the batch."""
    return DelayModelSpec("max_wait", objective)


def max_wait_pow(p: int, objective: Objective = Objective.MAX_BATCH) -> DelayModelSpec:
    """Largest waiting time in the batch, raised to an integer power."""
    return DelayModelSpec("max_wait_pow", objective, p=p)


def capped_linear(tau: float, objective: Objective = Objective.SUM_BATCH) -> DelayModelSpec:
    """Total waiting time, saturated at ``tau``."""
    return DelayModelSpec("capped_linear", objective, tau=tau)


def permit_plf(
    num_classes: int = DEFAULT_PERMIT_CLASSES,
    objective: Objective = Objective.SUM_BATCH,
) -> DelayModelSpec:
    """Batch cost driven by the permit price curve over the batch's age span.

    ``num_classes`` bounds the permit classes the curve minimizes over; the
    default covers spans up to ``4**32``.
    """
    return DelayModelSpec("permit_plf", objective, num_classes=num_classes)


def lp_norm(p: float) -> DelayModelSpec:
    """lp norm of the delay vector (``math.inf`` gives the max entry)."""
    return DelayModelSpec("lp", Objective.VECTOR, p=p)


def top_k(k: int) -> DelayModelSpec:
    """Sum of the k largest delays."""
    return DelayModelSpec("top_k", Objective.VECTOR, k=k)


def ordered_norm(weights: Sequence[float]) -> DelayModelSpec:
    """Weighted sum of sorted delays, weights non-increasing."""
    return DelayModelSpec("ordered", Objective.VECTOR, weights=tuple(float(w) for w in weights))


def concave_two_piece(prefix_len: int, eps: float, dim: int) -> DelayModelSpec:
    """Minimum of two linear functionals split at ``prefix_len`` coordinates."""
    return DelayModelSpec(
        "concave_two_piece", Objective.VECTOR, prefix_len=prefix_len, eps=eps, dim=dim
    )


def sum_vector() -> DelayModelSpec:
    """Plain sum of the delay vector (the linear model, vector form)."""
    return DelayModelSpec("sum_vector", Objective.VECTOR)


# ---------------------------------------------------------------------------
# JSON wire format
# ---------------------------------------------------------------------------

def model_to_json(spec: DelayModelSpec) -> dict:
    out: dict = {"kind": spec.kind}
    if spec.kind in ("max_wait_pow", "lp"):
        out["p"] = spec.p if spec.p != math.inf else "inf"
    if spec.kind == "capped_linear":
        out["tau"] = spec.tau
    if spec.kind == "permit_plf":
        out["K"] = spec.num_classes
    if spec.kind == "top_k":
        out["k"] = spec.k
    if spec.kind == "ordered":
        out["w"] = list(spec.weights or ())
    if spec.kind == "concave_two_piece":
        out["ell"] = spec.prefix_len
        out["eps"] = spec.eps
        out["n"] = spec.dim
    if spec.kind in BATCH_KINDS and spec.objective is not _DEFAULT_OBJECTIVE[spec.kind]:
        out["objective"] = spec.objective.value
    return out


def model_from_json(obj: dict) -> DelayModelSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError("model spec must be an object with a 'kind' field")
    kind = obj["kind"]
    if kind in BATCH_KINDS:
        objective = Objective(obj.get("objective", _DEFAULT_OBJECTIVE[kind].value))
    elif kind in VECTOR_KINDS:
        objective = Objective(obj.get("objective", Objective.VECTOR.value))
    else:
        raise ValueError(f"unknown delay model kind {kind!r}")
    p = obj.get("p")
    if p == "inf":
        p = math.inf
    return DelayModelSpec(
        kind,
        objective,
        p=p,
        tau=obj.get("tau"),
        num_classes=obj.get("K"),
        k=obj.get("k"),
        weights=tuple(obj["w"]) if "w" in obj else None,
        prefix_len=obj.get("ell"),
        eps=obj.get("eps"),
        dim=obj.get("n"),
    )


# ---------------------------------------------------------------------------
# Permit price curve
# ---------------------------------------------------------------------------

def plf_eval(x: float, num_classes: int | None = DEFAULT_PERMIT_CLASSES) -> float:
    """Cheapest cost of covering a span of ``x`` with one permit class.

    Evaluates ``min_k 2**k + x * 2**-k`` over ``0 <= k <= num_classes``
    (all ``k >= 0`` when ``num_classes`` is None).  The minimand is convex
    in ``k``, so only classes adjacent to ``log4(x)`` can attain the
    minimum; they are probed directly rather than enumerating every class.
    """
    if x < 0:
        raise ValueError("span must be non-negative")
    if x == 0.0:
        return 1.0
    base = math.floor(0.5 * math.log2(x))
    best = math.inf
    for cand in (base - 1, base, base + 1):
        k = min(max(cand, 0), num_classes) if num_classes is not None else max(cand, 0)
        best = min(best, 2.0 ** k + x * 2.0 ** (-k))
    return best


def plf_eval_array(
    xs: np.ndarray, num_classes: int | None = DEFAULT_PERMIT_CLASSES
) -> np.ndarray:
    """Vectorized :func:`plf_eval`.

    Clamping the log argument up to 1 pins ``base`` at 0 for spans below 1,
    where class 0 is the (clipped) minimizer anyway, so the two candidate
    classes ``{base, base + 1}`` always include the discrete argmin.
    """
    x = np.asarray(xs, dtype=float)
    if x.size == 0:
        return np.zeros(0)
    if float(x.min()) < 0.0:
        raise ValueError("span must be non-negative")
    base = np.floor(0.5 * np.log2(np.maximum(x, 1.0)))
    if num_classes is not None:
        base = np.minimum(base, float(num_classes) - 1.0)
    w = np.exp2(base)
    best = np.minimum(w + x / w, 2.0 * w + 0.5 * (x / w))
    return best


# ---------------------------------------------------------------------------
# Batch evaluators
# ---------------------------------------------------------------------------

def bdelay(spec: DelayModelSpec, batch_arrivals: Sequence[float], t: float) -> float:
    """Delay cost of acknowledging the given batch at time ``t``.

    Empty batches cost 0; ``t`` must not precede any arrival in the batch.
    """
    if not spec.is_batch_kind:
        raise ValueError(f"{spec.kind!r} is a vector model; use f_vector")
    if len(batch_arrivals) == 0:
        return 0.0
    last = max(batch_arrivals)
    if t < last - tol_at(last):
        raise ValueError(f"ack time {t!r} precedes an arrival in the batch")
    return batch_delay_fn(spec, batch_arrivals)(t)


def batch_delay_fn(
    spec: DelayModelSpec, batch_arrivals: Sequence[float]
) -> Callable[[float], float]:
    """Precompiled ``t -> bdelay(spec, batch, t)`` for a fixed batch.

    The returned closure is O(1) per call; it is what the online algorithms
    hand to the threshold solver.
    """
    if not spec.is_batch_kind:
        raise ValueError(f"{spec.kind!r} is a vector model; use f_vector")
    if len(batch_arrivals) == 0:
        return lambda t: 0.0
    kind = spec.kind
    if kind == "linear_sum":
        m, s = len(batch_arrivals), math.fsum(batch_arrivals)
        return lambda t: max(0.0, m * t - s)
    if kind == "capped_linear":
        m, s, tau = len(batch_arrivals), math.fsum(batch_arrivals), spec.tau
        return lambda t: min(max(0.0, m * t - s), tau)
    if kind == "max_wait":
        first = min(batch_arrivals)
        return lambda t: max(0.0, t - first)
    if kind == "max_wait_pow":
        first, p = min(batch_arrivals), spec.p
        return lambda t: max(0.0, t - first) ** p
    if kind == "permit_plf":
        first, classes = min(batch_arrivals), spec.num_classes
        return lambda t: plf_eval(max(0.0, t - first), classes) - 1.0
    raise AssertionError(kind)


def bdelay_limit(spec: DelayModelSpec, batch_arrivals: Sequence[float]) -> float:
    """Supremum of ``bdelay(spec, batch, t)`` over all ack times ``t``.

    Lets threshold solves short-circuit when a target is provably out of
    reach (e.g. the capped model with the cap below the target).
    """
    if len(batch_arrivals) == 0:
        return 0.0
    if spec.kind == "capped_linear":
        return float(spec.tau)
    return math.inf


# ---------------------------------------------------------------------------
# Vector evaluators
# ---------------------------------------------------------------------------

def f_vector(spec: DelayModelSpec, delays: Sequence[float]) -> float:
    """Delay cost of the full per-packet delay vector."""
    if spec.is_batch_kind:
        raise ValueError(f"{spec.kind!r} is a batch model; use bdelay")
    d = np.asarray(delays, dtype=float)
    if d.size and float(d.min()) < 0.0:
        raise ValueError("delay vector entries must be non-negative")
    kind = spec.kind
    if kind == "sum_vector":
        return float(d.sum())
    if kind == "lp":
        if d.size == 0:
            return 0.0
        if spec.p == math.inf:
            return float(d.max())
        if spec.p == 1:
            return float(d.sum())
        return float((d ** spec.p).sum() ** (1.0 / spec.p))
    if kind == "top_k":
        if d.size == 0:
            return 0.0
        top = np.sort(d)[::-1][: spec.k]
        return float(top.sum())
    if kind == "ordered":
        if d.size == 0:
            return 0.0
        w = np.asarray(spec.weights, dtype=float)
        m = min(w.size, d.size)
        s = np.sort(d)[::-1][:m]
        return float(np.dot(w[:m], s))
    if kind == "concave_two_piece":
        ell = spec.prefix_len
        head = float(d[:ell].sum())
        tail = float(d[ell:].sum())
        return min(spec.eps * head + tail, (spec.dim / ell) * head + spec.eps * tail)
    raise AssertionError(kind)


# ---------------------------------------------------------------------------
# Property testers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PropertyReport:
    """Outcome of a randomized property check; counterexamples are data."""

    name: str
    passed: bool
    samples: int
    counterexample: dict | None = None

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        extra = "" if self.passed else f" counterexample={self.counterexample}"
        return f"{self.name}: {status} ({self.samples} samples){extra}"


def _log_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    # Entries span [1e-3, 1e3] to stress tolerance behavior at both scales.
    return 10.0 ** rng.uniform(-3.0, 3.0, size)


def check_monotone(
    model: DelayModelSpec | Callable[[Sequence[float], float], float],
    samples: int = 10_000,
    seed: int = 0,
) -> PropertyReport:
    """Sample nested batches and ordered times; flag any cost decrease.

    ``model`` may be a spec or a raw ``(batch, t) -> cost`` callable (useful
    for probing deliberately broken models).
    """
    if isinstance(model, DelayModelSpec):
        fn = lambda batch, t: bdelay(model, batch, t)  # noqa: E731
        name = f"monotone:{model.kind}"
    else:
        fn = model
        name = "monotone:<callable>"
    rng = np.random.default_rng(seed)
    for i in range(samples):
        m = int(rng.integers(1, 9))
        sup = np.sort(_log_uniform(rng, m))
        keep = rng.random(m) < 0.6
        keep[int(rng.integers(m))] = True
        sub = sup[keep]
        gap = float(_log_uniform(rng, 1)[0]) if rng.random() < 0.8 else 0.0
        t_hi = float(sup[-1]) + gap
        t_lo = float(sub[-1]) + (t_hi - float(sub[-1])) * float(rng.random())
        lo = fn(tuple(sub), t_lo)
        hi = fn(tuple(sup), t_hi)
        if lo > hi + tol_at(hi):
            return PropertyReport(
                name,
                False,
                i + 1,
                {
                    "batch": [float(a) for a in sub],
                    "super_batch": [float(a) for a in sup],
                    "t": t_lo,
                    "t_super": t_hi,
                    "value": float(lo),
                    "super_value": float(hi),
                },
            )
    return PropertyReport(name, True, samples)


def check_continuous_submodular(
    model: DelayModelSpec | Callable[[Sequence[float]], float],
    dimension: int = 5,
    samples: int = 10_000,
    seed: int = 0,
) -> PropertyReport:
    """Sample vector pairs and test the lattice inequality
    ``f(x v y) + f(x ^ y) <= f(x) + f(y)``.
    """
    if isinstance(model, DelayModelSpec):
        fn = lambda v: f_vector(model, v)  # noqa: E731
        name = f"submodular:{model.kind}"
    else:
        fn = model
        name = "submodular:<callable>"
    rng = np.random.default_rng(seed)
    for i in range(samples):
        x = _log_uniform(rng, dimension)
        y = _log_uniform(rng, dimension)
        x[rng.random(dimension) < 0.15] = 0.0
        y[rng.random(dimension) < 0.15] = 0.0
        join = np.maximum(x, y)
        meet = np.minimum(x, y)
        lhs = fn(join) + fn(meet)
        rhs = fn(x) + fn(y)
        if lhs > rhs + tol_at(rhs):
            return PropertyReport(
                name,
                False,
                i + 1,
                {
                    "x": [float(v) for v in x],
                    "y": [float(v) for v in y],
                    "lhs": float(lhs),
                    "rhs": float(rhs),
                },
            )
    return PropertyReport(name, True, samples)
