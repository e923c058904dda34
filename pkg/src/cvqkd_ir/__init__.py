"""Monte Carlo simulation of coherent-state CV-QKD under partial intercept-resend attacks."""
from .attacks import (
    AttackSpec,
    Block,
    ChannelParams,
    PulseRecord,
    channel_bs,
    channel_ir,
    equivalent_gaussian,
    simulate_block,
    simulate_pulse,
)
from .estimation import (
    ChannelEstimator,
    EstimationError,
    EstimationResult,
    RevealedSubset,
    eps_confidence,
    estimate_channel,
    reveal_subset,
)
from .experiment import BlockConfig, Calibration, SweepSpec, run_block
from .optics import (
    DetectorModel,
    ModulationParams,
    Quadrature,
    QuadraturePair,
    RngStream,
    detect_realistic,
    draw_alice_state,
    heterodyne,
    homodyne,
)
from .rates import (
    AttackModel,
    NoCrossingError,
    QuadratureError,
    RateInputs,
    RateReport,
    i_ab_gaussian,
    i_ab_nongaussian,
    i_be_bs,
    i_be_gaussian,
    i_be_ir,
    i_be_partial,
    key_rate,
    mi_monte_carlo,
    rate_report,
    tolerable_excess_noise,
)

__version__ = "0.1.0"
