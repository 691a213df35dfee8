"""Double-Gaussian biphoton propagation, turbulence, and EPR certification."""

__version__ = "0.1.0"

from .errors import (
    BiphotonError,
    ConfigError,
    DegenerateFitError,
    FitError,
    FormatError,
    GridError,
    InsufficientDataError,
    ParameterDomainError,
    RefinementError,
    SamplingError,
    SaturationError,
)
from .optics import (
    BeamWidths,
    ExperimentParams,
    JointDistribution2D,
    ScalingRegime,
    UncertaintyEstimate,
    beam_widths,
    conditional_momentum_sigma,
    conditional_position_sigma,
    default_position_grid,
    derive_params,
    joint_position_pd,
    momentum_sigma_from_fourier_plane,
    position_scaling_regime,
)
from .angular import (
    UNIFORM_CIRCULAR_STDDEV,
    AngleKernelCoeffs,
    PolarJointPD,
    angle_grid,
    angle_kernel_coeffs,
    conditional_angle_sigma,
    conditional_angle_slice,
    joint_angle_pd_closed_form,
    joint_angle_pd_quadrature,
)
from .oam import (
    DEFAULT_LMAX,
    OamDistribution,
    OamNoiseModel,
    conditional_oam_clean,
    fit_oam_model,
    joint_oam_clean,
    oam_model_distribution,
    oam_uncertainty,
)
from .turbulence import (
    PropagatedSignalCSD,
    TurbulenceParams,
    conditional_angle_sigma_turbulent,
    derive_turbulence,
    joint_angle_pd_turbulent,
    oam_spectrum_turbulent,
    propagate_signal_csd,
    sample_tilt_kicks,
)
from .frames import (
    CleanPairSampler,
    FrameGeometry,
    FrameStack,
    TurbulentPairSampler,
    clean_pair_sampler,
    generate_frames,
    read_stack,
    turbulent_pair_sampler,
    write_stack,
)
from .coincidence import (
    AngleFitParams,
    CoincidenceMap,
    PositionFitParams,
    coincidence_pixels,
    coincidence_sectors,
    coincidence_strips,
    fit_angle_map,
    fit_position_map,
)
from .certify import (
    BASES,
    ENTANGLEMENT_BOUND,
    Crossing,
    EprProduct,
    ScanResult,
    epr_product,
    epr_scan,
    find_revival,
)

__all__ = [
    "__version__",
    # errors
    "BiphotonError",
    "ConfigError",
    "DegenerateFitError",
    "FitError",
    "FormatError",
    "GridError",
    "InsufficientDataError",
    "ParameterDomainError",
    "RefinementError",
    "SamplingError",
    "SaturationError",
    # optics
    "BeamWidths",
    "ExperimentParams",
    "JointDistribution2D",
    "ScalingRegime",
    "UncertaintyEstimate",
    "beam_widths",
    "conditional_momentum_sigma",
    "conditional_position_sigma",
    "default_position_grid",
    "derive_params",
    "joint_position_pd",
    "momentum_sigma_from_fourier_plane",
    "position_scaling_regime",
    # angular
    "UNIFORM_CIRCULAR_STDDEV",
    "AngleKernelCoeffs",
    "PolarJointPD",
    "angle_grid",
    "angle_kernel_coeffs",
    "conditional_angle_sigma",
    "conditional_angle_slice",
    "joint_angle_pd_closed_form",
    "joint_angle_pd_quadrature",
    # oam
    "DEFAULT_LMAX",
    "OamDistribution",
    "OamNoiseModel",
    "conditional_oam_clean",
    "fit_oam_model",
    "joint_oam_clean",
    "oam_model_distribution",
    "oam_uncertainty",
    # turbulence
    "PropagatedSignalCSD",
    "TurbulenceParams",
    "conditional_angle_sigma_turbulent",
    "derive_turbulence",
    "joint_angle_pd_turbulent",
    "oam_spectrum_turbulent",
    "propagate_signal_csd",
    "sample_tilt_kicks",
    # frames
    "CleanPairSampler",
    "FrameGeometry",
    "FrameStack",
    "TurbulentPairSampler",
    "clean_pair_sampler",
    "generate_frames",
    "read_stack",
    "turbulent_pair_sampler",
    "write_stack",
    # coincidence
    "AngleFitParams",
    "CoincidenceMap",
    "PositionFitParams",
    "coincidence_pixels",
    "coincidence_sectors",
    "coincidence_strips",
    "fit_angle_map",
    "fit_position_map",
    # certify
    "BASES",
    "ENTANGLEMENT_BOUND",
    "Crossing",
    "EprProduct",
    "ScanResult",
    "epr_product",
    "epr_scan",
    "find_revival",
]
