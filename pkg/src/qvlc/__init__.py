"""Queue-aware variable-length coding: delay-power tradeoffs for a URLLC link."""
from .fbl_power import (
    CodingParams,
    PowerTable,
    achievable_packets,
    build_power_table,
    gaussian_q,
    inverse_q,
    power_for_batch,
    solve_gamma_for_batch,
)
from .lp_tradeoff import (
    InfeasibleError,
    NotThresholdForm,
    ThresholdDescriptor,
    TradeoffCurve,
    TradeoffPoint,
    build_degenerate_lp,
    build_full_lp,
    extract_threshold,
    min_feasible_power,
    recover_degenerate_policy,
    recover_policy,
    solve_lp,
    solve_tradeoff,
    tradeoff_curve,
)
from .oracle import brute_force_tradeoff
from .queue_model import (
    NotUnichain,
    SystemConfig,
    action_bounds,
    average_delay,
    average_power,
    classify_states,
    queue_step,
    stationary_distribution,
    transition_matrix,
    validate_policy,
)
from .simulator import SimulationSpec, batch_simulate, simulate

__version__ = "0.1.0"
