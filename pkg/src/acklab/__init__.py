"""acklab: a simulation laboratory for online acknowledgment batching under
general delay costs — pluggable cost models, exact offline solvers, online
policies, adversarial lower-bound drivers, and a benchmark harness."""

from .cost import (
    DelayModelSpec,
    Objective,
    PropertyReport,
    bdelay,
    capped_linear,
    check_continuous_submodular,
    check_monotone,
    concave_two_piece,
    f_vector,
    linear_sum,
    lp_norm,
    max_wait,
    max_wait_pow,
    model_from_json,
    model_to_json,
    ordered_norm,
    permit_plf,
    plf_eval,
    sum_vector,
    top_k,
)
from .model import (
    Batch,
    CostBreakdown,
    Instance,
    InvalidScheduleError,
    Schedule,
    batches_from_acks,
    delay_vector_of,
    evaluate_schedule,
    instance_from_json,
    instance_to_json,
    validate_schedule,
)
from .offline import (
    BruteForceInfeasibleError,
    DpTable,
    brute_force_optimal,
    dp_optimal,
    dp_table,
    longest_critical_suffix,
    suffix_opt,
)
from .engine import (
    EngineError,
    OnlineAlgorithm,
    SimulationDriver,
    TraceEvent,
    next_threshold,
    simulate,
    solve_threshold_time,
)
from .algorithms import (
    GreedyBatchOblivious,
    GreedyMaxMonotone,
    GreedyTau,
    ServiceState,
    SumMonotonePhases,
    VectorThresholdGreedy,
    make_algorithm,
)
from .adversary import (
    ConcaveAdversaryReport,
    FixedClassStrategy,
    Permit,
    PermitAccount,
    ProtocolViolation,
    TcpPermitAdapter,
    gen_greedy_tau_hard,
    permit_cover_optimal,
    permits_to_tcp_schedule,
    plf_round_up,
    run_concave_adversary,
    run_pp_adversary,
    tcp_to_permit,
)

__version__ = "0.1.0"
