import numpy as np
import pytest

from acklab import (
    BruteForceInfeasibleError,
    Instance,
    Objective,
    brute_force_optimal,
    capped_linear,
    dp_optimal,
    dp_table,
    evaluate_schedule,
    linear_sum,
    longest_critical_suffix,
    max_wait,
    max_wait_pow,
    permit_plf,
    suffix_opt,
    top_k,
)
from acklab.offline import _blocks_ending_at, _starting_rows
from acklab.cost import bdelay


def naive_suffix(arrivals, spec):
    arr = np.asarray(arrivals, float)
    n = arr.size
    G = np.zeros(n + 1)
    if n == 0:
        return G
    prefix = np.concatenate(([0.0], np.cumsum(arr)))
    row = _starting_rows(spec, arr, prefix)
    for p in range(n - 1, -1, -1):
        G[p] = float(np.min(row(p) + G[p + 1 :])) + 1.0
    return G


class TestDpOptimal:
    def test_linear_example(self):
        cost, sched = dp_optimal([0, 0.5, 3], linear_sum())
        assert cost == pytest.approx(2.5, abs=1e-12)
        assert sched.ack_times == (0.5, 3.0)

    def test_single_packet(self):
        cost, sched = dp_optimal([5], linear_sum())
        assert cost == 1.0 and sched.ack_times == (5.0,)

    def test_capped_hard_instance(self):
        cost, sched = dp_optimal([1.001, 2.002, 3.003], capped_linear(1.0))
        assert cost == pytest.approx(2.0, abs=1e-12)
        assert sched.ack_times == (3.003,)

    def test_rejects_non_sum_objective(self):
        with pytest.raises(ValueError):
            dp_optimal([0, 1], max_wait())

    def test_empty(self):
        cost, sched = dp_optimal([], linear_sum())
        assert cost == 0.0 and sched.ack_times == ()

    def test_values_non_decreasing_and_schedule_realizes_cost(self):
        rng = np.random.default_rng(0)
        for spec in (linear_sum(), capped_linear(1.0), permit_plf()):
            for _ in range(40):
                arrivals = tuple(sorted(rng.uniform(0, 10, rng.integers(1, 12))))
                table = dp_table(arrivals, spec)
                assert all(
                    table.values[i] <= table.values[i + 1] + 1e-12
                    for i in range(len(arrivals))
                )
                cost, sched = dp_optimal(arrivals, spec)
                realized = evaluate_schedule(Instance(arrivals, spec), sched).total
                assert realized == pytest.approx(cost, abs=1e-9)


class TestSuffixOpt:
    def test_two_packets(self):
        assert suffix_opt([0, 0.1], linear_sum()) == pytest.approx([1.1, 1.0, 0.0])

    def test_gap_forces_split(self):
        G = suffix_opt([0, 0.1, 10], linear_sum())
        assert G[1] == pytest.approx(2.0, abs=1e-12)

    def test_single(self):
        assert suffix_opt([7], linear_sum()) == pytest.approx([1.0, 0.0])

    def test_empty(self):
        assert suffix_opt([], linear_sum()) == pytest.approx([0.0])

    def test_prefix_value_matches_dp(self):
        rng = np.random.default_rng(1)
        for spec in (linear_sum(), capped_linear(0.5), permit_plf()):
            for _ in range(30):
                arrivals = tuple(sorted(rng.uniform(0, 10, rng.integers(1, 12))))
                assert suffix_opt(arrivals, spec)[0] == pytest.approx(
                    dp_optimal(arrivals, spec)[0], abs=1e-9
                )

    def test_fast_kernels_match_row_scan(self):
        rng = np.random.default_rng(2)
        specs = [capped_linear(0.5), capped_linear(2.0), permit_plf(), permit_plf(num_classes=3)]
        for i in range(200):
            n = int(rng.integers(1, 40))
            if i % 3 == 0:  # heavy arrival ties
                arrivals = tuple(sorted(np.repeat(rng.uniform(0, 5, max(1, n // 3)), 3)[:n]))
            else:
                arrivals = tuple(sorted(rng.uniform(0, 20, n)))
            spec = specs[i % len(specs)]
            got = suffix_opt(arrivals, spec)
            assert np.allclose(got, naive_suffix(arrivals, spec), rtol=1e-12, atol=1e-12)


class TestCriticalSuffix:
    def test_whole_sequence_critical(self):
        assert longest_critical_suffix([0, 0.1], linear_sum()) == 0

    def test_gap_breaks_criticality(self):
        assert longest_critical_suffix([0, 0.1, 10], linear_sum()) == 2

    def test_single(self):
        assert longest_critical_suffix([7], linear_sum()) == 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            longest_critical_suffix([], linear_sum())

    def test_matches_unpruned_scan(self):
        rng = np.random.default_rng(3)
        specs = [
            linear_sum(),
            capped_linear(1.0),
            permit_plf(),
            max_wait(Objective.SUM_BATCH),
            max_wait_pow(2, Objective.SUM_BATCH),
        ]
        for i in range(300):
            n = int(rng.integers(1, 35))
            arrivals = tuple(sorted(rng.uniform(0, 10, n)))
            spec = specs[i % len(specs)]
            G = naive_suffix(arrivals, spec)
            arr = np.asarray(arrivals)
            prefix = np.concatenate(([0.0], np.cumsum(arr)))
            single = _blocks_ending_at(spec, arr, prefix, n - 1) + 1.0
            expected = next(
                p
                for p in range(n)
                if single[p] - G[p] <= 1e-9 * max(1.0, abs(G[p]))
            )
            assert longest_critical_suffix(arrivals, spec) == expected


class TestBruteForce:
    def test_partition_count_small(self):
        # n=4 enumerates exactly 8 partitions; spot-check via the optimum.
        cost, _ = brute_force_optimal([0, 1, 2, 3], linear_sum())
        assert cost == pytest.approx(dp_optimal([0, 1, 2, 3], linear_sum())[0])

    def test_matches_dp_example(self):
        cost, sched = brute_force_optimal([0, 0.5, 3], linear_sum())
        assert cost == pytest.approx(2.5) and sched.ack_times == (0.5, 3.0)

    def test_max_objective(self):
        cost, sched = brute_force_optimal([0, 10], max_wait())
        assert cost == pytest.approx(2.0)
        assert sched.ack_times == (0.0, 10.0)

    def test_vector_objective(self):
        # hand enumeration of the 4 partitions: {1,2}@0.5 + {3}@3 wins with
        # delay vector (0.5, 0, 0) -> top-1 = 0.5, total 2.5
        cost, sched = brute_force_optimal([0, 0.5, 3], top_k(1))
        assert cost == pytest.approx(2.5)
        assert sched.ack_times == (0.5, 3.0)

    def test_size_guard(self):
        with pytest.raises(BruteForceInfeasibleError):
            brute_force_optimal(list(range(23)), linear_sum())

    def test_dp_equivalence_random(self):
        rng = np.random.default_rng(4)
        specs = [linear_sum(), capped_linear(0.5), capped_linear(1.0), permit_plf()]
        for i in range(120):
            arrivals = tuple(sorted(rng.uniform(0, 10, rng.integers(1, 10))))
            spec = specs[i % len(specs)]
            assert dp_optimal(arrivals, spec)[0] == pytest.approx(
                brute_force_optimal(arrivals, spec)[0], abs=1e-9
            )


def test_vectorized_blocks_match_scalar_bdelay():
    rng = np.random.default_rng(5)
    specs = [
        linear_sum(),
        capped_linear(1.0),
        permit_plf(),
        max_wait(Objective.SUM_BATCH),
        max_wait_pow(3, Objective.SUM_BATCH),
    ]
    for spec in specs:
        for _ in range(30):
            n = int(rng.integers(1, 10))
            arr = np.sort(rng.uniform(0, 10, n))
            prefix = np.concatenate(([0.0], np.cumsum(arr)))
            i = int(rng.integers(n))
            ending = _blocks_ending_at(spec, arr, prefix, i)
            for j in range(i + 1):
                assert ending[j] == pytest.approx(
                    bdelay(spec, arr[j : i + 1], arr[i]), rel=1e-12, abs=1e-12
                )
            row = _starting_rows(spec, arr, prefix)(i)
            for q in range(i, n):
                assert row[q - i] == pytest.approx(
                    bdelay(spec, arr[i : q + 1], arr[q]), rel=1e-12, abs=1e-12
                )
