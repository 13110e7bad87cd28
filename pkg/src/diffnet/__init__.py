"""Diffusion LMS over networks with noisy information exchange.

Simulation (Monte-Carlo learning curves) and closed-form analysis (stability,
bias, steady-state MSD/EMSE, tracking) of distributed adaptation where nodes
exchange estimates, intermediate estimates, and raw data over noisy links.
"""

from .combine import (
    AdaptiveWeightState,
    adaptive_update,
    matrices_from_rules,
    metropolis,
    relative_variance,
    relative_variance_gamma2,
    uniform,
    weights_from_gamma2,
)
from .network import (
    CombinationMatrices,
    LinkNoiseProfile,
    NetworkModel,
    NodeProfile,
    Topology,
    ValidationReport,
    VarianceRanges,
    WeightTrajectory,
    link_index,
    load_network,
    network_from_dict,
    network_to_dict,
    random_network,
    save_network,
    validate,
)
from .simulate import (
    DiffusionState,
    LearningCurve,
    RngPolicy,
    SimulationOptions,
    StepData,
    curve_to_csv,
    diffusion_step,
    perturb_exchange,
    run_monte_carlo,
    sample_data,
    steady_state_level,
    trajectory_to_csv,
)
from .theory import (
    InstabilityError,
    MeanDynamics,
    NoiseMoments,
    StabilityInfo,
    StepSizeBounds,
    TheoryReport,
    TrackingMetrics,
    assemble_mean_dynamics,
    assemble_noise_moments,
    bias,
    block_max_norm,
    network_emse,
    network_metrics,
    network_msd,
    series_emse,
    series_msd,
    stability_report,
    steady_state_metric,
    step_size_bounds,
    theory_report,
    tracking_metrics,
)

__version__ = "0.1.0"
