"""Benchmark harness: instance generators, ratio sweeps, CSV/JSON/SVG output,
and the self-check property suite behind ``ack verify``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import adversary as adv
from .algorithms import SumMonotonePhases, make_algorithm
from .cost import (
    DelayModelSpec,
    Objective,
    PropertyReport,
    capped_linear,
    check_continuous_submodular,
    check_monotone,
    linear_sum,
    lp_norm,
    max_wait,
    max_wait_pow,
    model_from_json,
    ordered_norm,
    permit_plf,
    plf_eval,
    sum_vector,
    top_k,
)
from .engine import simulate
from .model import Instance, evaluate_schedule
from .offline import brute_force_optimal, dp_optimal
from .tolerance import tol_at

DEFAULT_SEED = 94021


def base_seed() -> int:
    """Default RNG seed, overridable via the ACK_SEED environment variable."""
    raw = os.environ.get("ACK_SEED")
    return int(raw) if raw else DEFAULT_SEED


# ---------------------------------------------------------------------------
# Instance generators
# ---------------------------------------------------------------------------

def gen_uniform(n: int, rate: float, rng: np.random.Generator) -> tuple[float, ...]:
    """Arrivals as cumulative sums of exponential gaps with the given rate."""
    gaps = rng.exponential(scale=1.0 / rate, size=n)
    return tuple(np.cumsum(gaps))


def gen_bursty(
    n: int,
    cluster_rate: float,
    burst_mean: float,
    intra_scale: float,
    rng: np.random.Generator,
) -> tuple[float, ...]:
    """Clusters of geometric size at exponential cluster gaps."""
    out: list[float] = []
    t = 0.0
    while len(out) < n:
        t += rng.exponential(scale=1.0 / cluster_rate)
        size = int(rng.geometric(p=min(1.0, 1.0 / burst_mean)))
        s = t
        for _ in range(min(size, n - len(out))):
            out.append(s)
            s += rng.exponential(scale=intra_scale)
    return tuple(sorted(out[:n]))


def generate_instance(
    gen_spec: dict, n: int, model: DelayModelSpec, seed: int
) -> Instance:
    kind = gen_spec.get("kind", "uniform")
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        arrivals = gen_uniform(n, float(gen_spec.get("rate", 1.0)), rng)
    elif kind == "bursty":
        arrivals = gen_bursty(
            n,
            float(gen_spec.get("cluster_rate", 0.25)),
            float(gen_spec.get("burst_mean", 4.0)),
            float(gen_spec.get("intra_scale", 0.01)),
            rng,
        )
    elif kind == "greedy_tau_hard":
        tau = float(gen_spec.get("tau", 1.0))
        eps = float(gen_spec.get("eps", 1e-3))
        return Instance(
            adv.gen_greedy_tau_hard(n, tau, eps).arrivals, model
        )
    else:
        raise ValueError(f"unknown generator kind {kind!r}")
    return Instance(arrivals, model)


# ---------------------------------------------------------------------------
# Bench sweep
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    "instance_id",
    "n",
    "model_kind",
    "alg_spec",
    "alg_cost",
    "opt_cost",
    "oracle",
    "ratio",
    "runtime_ms",
    "seed",
)


@dataclass(frozen=True)
class BenchRow:
    instance_id: str
    n: int
    model_kind: str
    alg_spec: str
    alg_cost: float
    opt_cost: float
    oracle: str
    ratio: float
    runtime_ms: float
    seed: int


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _optimum(instance: Instance, oracle: str) -> tuple[float, str]:
    if oracle == "dp" or (
        oracle == "auto" and instance.model.objective is Objective.SUM_BATCH
    ):
        cost, _ = dp_optimal(instance.arrivals, instance.model)
        return cost, "dp"
    cost, _ = brute_force_optimal(instance.arrivals, instance.model)
    return cost, "brute"


def run_bench(config: dict) -> list[BenchRow]:
    """Run the configured sweep; rows come out in deterministic order."""
    generators = config.get("generators", [{"kind": "uniform", "rate": 1.0}])
    models = [model_from_json(m) for m in config.get("models", [])]
    algorithms = config.get("algorithms", [])
    sizes = config.get("n", [])
    seeds = config.get("seeds", 1)
    oracle = config.get("oracle", "auto")
    if isinstance(seeds, int):
        seeds = list(range(base_seed(), base_seed() + seeds))
    rows: list[BenchRow] = []
    for gen_spec in generators:
        for model in models:
            for alg_json in algorithms:
                for n in sizes:
                    for seed in seeds:
                        instance = generate_instance(gen_spec, n, model, seed)
                        alg = make_algorithm(alg_json, model)
                        start = time.perf_counter()
                        schedule, _ = simulate(instance, alg)
                        alg_cost = evaluate_schedule(instance, schedule).total
                        opt_cost, used = _optimum(instance, oracle)
                        elapsed = (time.perf_counter() - start) * 1000.0
                        ratio = alg_cost / opt_cost if opt_cost > 0 else math.inf
                        instance_id = (
                            f"{gen_spec.get('kind', 'uniform')}-{model.kind}"
                            f"-{alg_json['alg']}-n{n}-s{seed}"
                        )
                        rows.append(
                            BenchRow(
                                instance_id,
                                n,
                                model.kind,
                                json.dumps(alg_json, sort_keys=True),
                                alg_cost,
                                opt_cost,
                                used,
                                ratio,
                                elapsed,
                                seed,
                            )
                        )
    return rows


def rows_to_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(
            (
                r.instance_id,
                r.n,
                r.model_kind,
                r.alg_spec,
                _fmt(r.alg_cost),
                _fmt(r.opt_cost),
                r.oracle,
                _fmt(r.ratio),
                _fmt(r.runtime_ms),
                r.seed,
            )
        )
    return buf.getvalue()


def summarize(rows: Sequence[BenchRow]) -> dict:
    """Max and mean ratio per (model, algorithm, n)."""
    groups: dict[tuple[str, str, int], list[float]] = {}
    for r in rows:
        groups.setdefault((r.model_kind, r.alg_spec, r.n), []).append(r.ratio)
    out = []
    for (model_kind, alg_spec, n), ratios in sorted(groups.items()):
        out.append(
            {
                "model": model_kind,
                "alg": alg_spec,
                "n": n,
                "max_ratio": max(ratios),
                "mean_ratio": sum(ratios) / len(ratios),
                "count": len(ratios),
            }
        )
    return {"groups": out}


def svg_ratio_chart(rows: Sequence[BenchRow], width: int = 640, height: int = 400) -> str:
    """Minimal ratio-vs-n line chart (one polyline per model/alg series)."""
    series: dict[tuple[str, str], dict[int, list[float]]] = {}
    for r in rows:
        series.setdefault((r.model_kind, r.alg_spec), {}).setdefault(r.n, []).append(
            r.ratio
        )
    margin = 40
    xs = sorted({r.n for r in rows})
    max_ratio = max((r.ratio for r in rows), default=1.0)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - 10}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{margin}" y2="10" stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 8}" font-size="12">n</text>',
        f'<text x="4" y="{height // 2}" font-size="12">ratio</text>',
    ]
    if xs:
        xmin, xmax = min(xs), max(xs)
        xspan = max(1, xmax - xmin)

        def px(n: int) -> float:
            return margin + (n - xmin) / xspan * (width - margin - 20)

        def py(ratio: float) -> float:
            return (height - margin) - ratio / max(max_ratio, 1e-12) * (height - margin - 20)

        palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
        for idx, ((model_kind, alg_spec), by_n) in enumerate(sorted(series.items())):
            pts = " ".join(
                f"{px(n):.1f},{py(sum(v) / len(v)):.1f}" for n, v in sorted(by_n.items())
            )
            color = palette[idx % len(palette)]
            parts.append(f'<polyline fill="none" stroke="{color}" points="{pts}"/>')
            parts.append(
                f'<text x="{margin + 4}" y="{16 + 14 * idx}" font-size="11" '
                f'fill="{color}">{model_kind} {alg_spec}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Property suite (ack verify)
# ---------------------------------------------------------------------------

def _report(name: str, passed: bool, detail: str = "") -> PropertyReport:
    return PropertyReport(name, passed, 1, None if passed else {"detail": detail})


def _check_oracle_equivalence(seed: int) -> PropertyReport:
    rng = np.random.default_rng(seed)
    specs = [linear_sum(), capped_linear(1.0), permit_plf()]
    worst = 0.0
    for i in range(60):
        n = int(rng.integers(1, 9))
        arrivals = tuple(sorted(rng.uniform(0.0, 10.0, n)))
        spec = specs[i % len(specs)]
        dp_cost, dp_sched = dp_optimal(arrivals, spec)
        bf_cost, _ = brute_force_optimal(arrivals, spec)
        worst = max(worst, abs(dp_cost - bf_cost))
        if abs(dp_cost - bf_cost) > tol_at(bf_cost):
            return _report(
                "oracle:dp-vs-brute",
                False,
                f"n={n} {spec.kind}: dp={dp_cost} brute={bf_cost}",
            )
        realized = evaluate_schedule(Instance(arrivals, spec), dp_sched).total
        if abs(realized - dp_cost) > tol_at(dp_cost):
            return _report(
                "oracle:dp-vs-brute", False, f"dp schedule realizes {realized} != {dp_cost}"
            )
    return _report("oracle:dp-vs-brute", True)


def _check_plf_concavity(seed: int) -> PropertyReport:
    rng = np.random.default_rng(seed)
    for _ in range(5000):
        x1, x2 = sorted(rng.uniform(0.0, 4.0 ** 10, 2))
        mid = plf_eval((x1 + x2) / 2.0)
        chord = (plf_eval(x1) + plf_eval(x2)) / 2.0
        if mid < chord - tol_at(chord):
            return _report("plf:concavity", False, f"x1={x1} x2={x2}")
    return _report("plf:concavity", True)


def _check_roundup(seed: int) -> PropertyReport:
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, 4.0 ** 10, 10_000)
    for x in xs:
        k = adv.plf_round_up(float(x))  # postconditions asserted inside
        if not (4 ** k >= x and 2 ** k <= 2.0 * plf_eval(float(x), num_classes=None)):
            return _report("plf:round-up", False, f"x={x} k={k}")
    return _report("plf:round-up", True)


def _check_greedy_hard_family(seed: int) -> PropertyReport:
    instance = adv.gen_greedy_tau_hard(25, 1.0, 1e-3)
    alg = make_algorithm({"alg": "greedy_tau", "tau": 1.0}, instance.model)
    schedule, _ = simulate(instance, alg)
    alg_cost = evaluate_schedule(instance, schedule).total
    opt_cost, _ = dp_optimal(instance.arrivals, instance.model)
    ratio = alg_cost / opt_cost
    ok = abs(ratio - 25.0) <= 1e-6
    return _report("adversary:greedy-hard", ok, f"ratio={ratio}")


def _check_permit_charging(seed: int) -> PropertyReport:
    rng = np.random.default_rng(seed)
    for _ in range(50):
        m = int(rng.integers(1, 12))
        gaps = rng.integers(1, 50, m)
        times = np.cumsum(gaps)
        cost, permits = adv.permit_cover_optimal([int(t) for t in times])
        schedule = adv.permits_to_tcp_schedule(permits, [int(t) for t in times])
        spec = permit_plf(num_classes=64)
        total = evaluate_schedule(
            Instance(tuple(float(t) for t in times), spec), schedule
        ).total
        if total > 2.0 * cost + tol_at(2.0 * cost):
            return _report(
                "adversary:permit-charging", False, f"tcp={total} > 2*permit={cost}"
            )
    return _report("adversary:permit-charging", True)


def _check_determinism(seed: int) -> PropertyReport:
    spec = linear_sum()
    rng = np.random.default_rng(seed)
    arrivals = gen_uniform(40, 1.0, rng)
    instance = Instance(arrivals, spec)
    outs = []
    for _ in range(2):
        alg = SumMonotonePhases(spec)
        schedule, trace = simulate(instance, alg)
        outs.append(
            json.dumps(list(schedule.ack_times))
            + "".join(ev.to_json_line() for ev in trace)
        )
    return _report("engine:determinism", outs[0] == outs[1])


def _builtin_batch_models() -> list[DelayModelSpec]:
    return [
        linear_sum(),
        max_wait(),
        max_wait_pow(2),
        capped_linear(1.0),
        permit_plf(),
    ]


def _builtin_vector_models() -> list[DelayModelSpec]:
    return [
        lp_norm(1.0),
        lp_norm(2.0),
        lp_norm(math.inf),
        top_k(3),
        ordered_norm((3.0, 2.0, 1.0, 1.0, 0.5)),
        sum_vector(),
    ]


def verify_suite(only: str | None = None, samples: int = 10_000, seed: int | None = None) -> list[PropertyReport]:
    """Run the named property checks (filtered by substring) and report."""
    seed = base_seed() if seed is None else seed
    checks: list[tuple[str, Callable[[], PropertyReport]]] = []
    for spec in _builtin_batch_models():
        checks.append(
            (
                f"monotone:{spec.kind}",
                lambda s=spec: check_monotone(s, samples=samples, seed=seed),
            )
        )
    for spec in _builtin_vector_models():
        checks.append(
            (
                f"submodular:{spec.kind}-p{spec.p}" if spec.kind == "lp" else f"submodular:{spec.kind}",
                lambda s=spec: check_continuous_submodular(s, samples=samples, seed=seed),
            )
        )

    def planted_square() -> PropertyReport:
        rep = check_continuous_submodular(
            lambda d: float(sum(d)) ** 2, samples=samples, seed=seed
        )
        # The squared sum is superadditive, so the tester must reject it.
        return PropertyReport(
            "submodular:planted-square-rejected",
            not rep.passed,
            rep.samples,
            rep.counterexample,
        )

    checks.append(("submodular:planted-square-rejected", planted_square))

    def planted_decreasing() -> PropertyReport:
        rep = check_monotone(
            lambda batch, t: 1.0 / (1.0 + t), samples=samples, seed=seed
        )
        return PropertyReport(
            "monotone:planted-decreasing-rejected",
            not rep.passed,
            rep.samples,
            rep.counterexample,
        )

    checks.append(("monotone:planted-decreasing-rejected", planted_decreasing))
    checks.append(("oracle:dp-vs-brute", lambda: _check_oracle_equivalence(seed)))
    checks.append(("plf:concavity", lambda: _check_plf_concavity(seed)))
    checks.append(("plf:round-up", lambda: _check_roundup(seed)))
    checks.append(("adversary:greedy-hard", lambda: _check_greedy_hard_family(seed)))
    checks.append(("adversary:permit-charging", lambda: _check_permit_charging(seed)))
    checks.append(("engine:determinism", lambda: _check_determinism(seed)))

    reports = []
    for name, fn in checks:
        if only and only not in name:
            continue
        rep = fn()
        # Keep the registered name so --only filters match the output.
        reports.append(PropertyReport(name, rep.passed, rep.samples, rep.counterexample))
    return reports
