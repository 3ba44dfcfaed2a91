"""Simulation and verification toolkit for disordered discrete-time quantum trajectories."""

from .cltstats import (
    CLTReport,
    clt_report,
    estimate_mu,
    estimate_sigma2_batch,
    estimate_sigma2_series,
    normality_test,
    normalized_sums,
    skew_mixing_bound,
    summability_report,
    variance_convergence_check,
)
from .coupling import (
    BlockCoupling,
    CoalescenceStats,
    LabelMap,
    admissibility_discrepancy,
    build_block_coupling,
    check_A1,
    check_A1_env,
    maximal_label_coupling,
    overlap_criterion,
    simulate_coalescence,
    terminal_label_law,
)
from .environment import (
    DisorderProcess,
    MixingProfile,
    dobrushin_coefficient,
    instrument_at,
    markov_beta_mixing_bound,
)
from .instrument import (
    KrausInstrument,
    apply_channel,
    apply_selective,
    channel_superoperator,
    compose_channels,
    esp_probe,
    instrument_from_json,
    instrument_to_json,
    outcome_probabilities,
    posterior,
    povm_cylinder_element,
    strict_positivity_check,
    validate,
)
from .linalg import (
    basis_state,
    cone_gauge_m,
    contraction_coefficient_lower_bound,
    maximally_mixed,
    projective_distance,
    trace_norm,
)
from .models import (
    MODELS,
    ConstructionError,
    EnvSpec,
    ModelSpec,
    construct,
    validate_group_hypotheses,
)
from .stationary import (
    ForgettingEstimate,
    StationaryStateSolution,
    estimate_beta,
    group_rate_bound,
    label_transition_matrix,
    solve_stationary_state,
    verify_stationarity,
)
from .trajectory import (
    TrajectorySample,
    exact_cylinder_distribution,
    exact_pattern_moments,
    parse_pattern,
    pattern_count,
    pattern_indicators,
    sample_annealed,
    sample_quenched,
    sample_records,
)

__version__ = "0.1.0"
