"""Separation of independent, auto-correlated signal components from
noisy multi-channel measurements, with calibrated uncertainties."""

__version__ = "0.1.0"

from .cg import CgConfig, CgStats, ConjugateGradientBreakdown, cg_solve
from .fields import (
    Field,
    Grid,
    HarmonicCovariance,
    MultiField,
    PowerSpectrum,
    apply_covariance,
    apply_inverse_covariance,
    covariance_from_spectrum,
    draw_prior_sample,
    harmonic_adjoint,
    harmonic_forward,
)
from .inference import (
    InferenceFailure,
    PosteriorState,
    Schedule,
    Trace,
    initial_mixture,
    rms_deviation,
    run_inference,
    run_map,
    sampled_kl,
)
from .mixture import (
    AlignmentResult,
    align_to_reference,
    map_mixture_update,
    mixture_update,
    normalize_columns,
)
from .operators import (
    DataSet,
    MixtureMatrix,
    NoiseCovariance,
    Response,
    adjoint,
    apply_noise_inverse,
    apply_posterior_precision,
    forward,
)
from .sampler import SampleSet, SamplingError, draw_posterior_sample, draw_sample_set
from .synth import (
    Scenario,
    ScenarioSpec,
    component_spectrum,
    generate_scenario,
    mask_blocks,
    scenario1_spec,
    scenario2_spec,
)
from .wiener import WienerProblem, information_source, posterior_variance, wiener_mean

__all__ = [
    "AlignmentResult",
    "CgConfig",
    "CgStats",
    "ConjugateGradientBreakdown",
    "DataSet",
    "Field",
    "Grid",
    "HarmonicCovariance",
    "InferenceFailure",
    "MixtureMatrix",
    "MultiField",
    "NoiseCovariance",
    "PosteriorState",
    "PowerSpectrum",
    "Response",
    "SampleSet",
    "SamplingError",
    "Scenario",
    "ScenarioSpec",
    "Schedule",
    "Trace",
    "WienerProblem",
    "adjoint",
    "align_to_reference",
    "apply_covariance",
    "apply_inverse_covariance",
    "apply_noise_inverse",
    "apply_posterior_precision",
    "cg_solve",
    "component_spectrum",
    "covariance_from_spectrum",
    "draw_posterior_sample",
    "draw_prior_sample",
    "draw_sample_set",
    "forward",
    "generate_scenario",
    "harmonic_adjoint",
    "harmonic_forward",
    "information_source",
    "initial_mixture",
    "map_mixture_update",
    "mask_blocks",
    "mixture_update",
    "normalize_columns",
    "posterior_variance",
    "rms_deviation",
    "run_inference",
    "run_map",
    "sampled_kl",
    "scenario1_spec",
    "scenario2_spec",
    "wiener_mean",
]
