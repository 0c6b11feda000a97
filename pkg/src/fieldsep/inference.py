"""The alternating inference loop: Wiener mean, posterior samples,
mixture update, gauge fixing; plus the metrics used to monitor it."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .cg import CgConfig
from .fields import HarmonicCovariance, MultiField, prior_inverse_apply
from .mixture import (
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
    apply_noise_inverse,
    forward,
)
from .sampler import SampleSet, draw_sample_set
from .wiener import WienerProblem, wiener_mean

__all__ = [
    "Schedule",
    "Trace",
    "PosteriorState",
    "InferenceFailure",
    "initial_mixture",
    "rms_deviation",
    "sampled_kl",
    "run_inference",
    "run_map",
]

logger = logging.getLogger(__name__)

_INIT_KEY = (0,)


class InferenceFailure(RuntimeError):
    """The outer loop hit an unrecoverable solver failure."""


@dataclass(frozen=True)
class Schedule:
    """Per-iteration sample counts and solver tolerances.

    The defaults keep a single sample per iteration through the early
    phase and then grow the count geometrically, while the solver
    tolerance tightens over the same stretch.
    """

    sample_counts: np.ndarray
    cg_rel_tols: np.ndarray
    cg_abs_tol: float = 0.0
    max_cg_iter: int = 5000
    early_stop: bool = False
    plateau_window: int = 20
    plateau_rel_change: float = 1e-4

    def __post_init__(self):
        counts = np.asarray(self.sample_counts, dtype=int)
        tols = np.asarray(self.cg_rel_tols, dtype=float)
        if counts.shape != tols.shape or counts.ndim != 1:
            raise ValueError("sample counts and tolerances must be 1-d and aligned")
        if counts.size and np.any(counts < 1):
            raise ValueError("sample counts must be at least 1")
        if counts.size and np.any(np.diff(counts) < 0):
            raise ValueError("sample counts must be nondecreasing")
        if counts.size and (np.any(tols <= 0) or np.any(np.diff(tols) > 0)):
            raise ValueError("tolerances must be positive and nonincreasing")
        if self.max_cg_iter < 1:
            raise ValueError("max_cg_iter must be positive")
        object.__setattr__(self, "sample_counts", counts)
        object.__setattr__(self, "cg_rel_tols", tols)

    @property
    def total_iterations(self) -> int:
        return int(self.sample_counts.size)

    @classmethod
    def default(
        cls,
        total_iterations: int = 300,
        final_samples: int = 25,
        growth_start: float = 0.6,
        tol_early: float = 1e-4,
        tol_final: float = 1e-7,
        max_cg_iter: int = 5000,
        early_stop: bool = False,
    ) -> "Schedule":
        if total_iterations < 0:
            raise ValueError("total_iterations must be nonnegative")
        if not 0.0 <= growth_start <= 1.0:
            raise ValueError("growth_start must lie in [0, 1]")
        if final_samples < 1:
            raise ValueError("final_samples must be at least 1")
        t = int(total_iterations)
        counts = np.ones(t, dtype=int)
        tols = np.full(t, float(tol_early))
        start = int(np.floor(growth_start * t))
        span = max(t - 1 - start, 1)
        for i in range(start, t):
            frac = (i - start) / span
            counts[i] = int(round(final_samples**frac))
            tols[i] = tol_early * (tol_final / tol_early) ** frac
        if t:
            counts = np.maximum.accumulate(counts)
            tols = np.minimum.accumulate(tols)
            counts[-1] = max(counts[-1], final_samples if t > start else counts[-1])
        return cls(counts, tols, max_cg_iter=max_cg_iter, early_stop=early_stop)


@dataclass
class Trace:
    """One record per outer iteration."""

    iterations: list[int] = field(default_factory=list)
    rms_deviations: list[float] = field(default_factory=list)
    sampled_kls: list[float] = field(default_factory=list)
    sample_counts: list[int] = field(default_factory=list)
    cg_iterations: list[int] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)

    def append(self, iteration, rms_dev, kl, n_samples, cg_iters, wall):
        self.iterations.append(int(iteration))
        self.rms_deviations.append(float(rms_dev))
        self.sampled_kls.append(float(kl))
        self.sample_counts.append(int(n_samples))
        self.cg_iterations.append(int(cg_iters))
        self.wall_ms.append(float(wall))

    def __len__(self) -> int:
        return len(self.iterations)


@dataclass
class PosteriorState:
    """Final state of a run: mean, mixture, and the last sample set (if any)."""

    mean: MultiField
    mixture: MixtureMatrix
    samples: Optional[SampleSet]
    iteration: int


def initial_mixture(
    n_channels: int, n_components: int, rng: np.random.Generator
) -> MixtureMatrix:
    """Random starting mixture: standard normal entries, unit-norm columns."""
    matrix = rng.standard_normal((n_channels, n_components))
    norms = np.linalg.norm(matrix, axis=0)
    if np.any(norms == 0):  # pragma: no cover - probability zero
        raise ValueError("degenerate random mixture draw")
    return MixtureMatrix(matrix / norms)


def rms_deviation(estimate: MultiField, reference: MultiField) -> float:
    """Root-mean-square pixel deviation, pooled over all components."""
    if estimate.values.shape != reference.values.shape:
        raise ValueError("estimate and reference must have the same layout")
    return float(np.sqrt(np.mean((estimate.values - reference.values) ** 2)))


def sampled_kl(
    mixture: MixtureMatrix,
    mean: MultiField,
    samples: Iterable[MultiField],
    response: Response,
    noise: NoiseCovariance,
    data: DataSet,
    priors: Sequence[HarmonicCovariance],
) -> float:
    """Sample-averaged variational objective, up to state-independent terms.

    Monitoring quantity: the noise-weighted data misfit averaged over the
    sample set plus the prior penalty of the mean.  Decreases are expected
    but only the mixture update is guaranteed to lower it on a fixed
    sample set.
    """
    samples = list(samples)
    if len(samples) < 1:
        raise ValueError("need at least one sample")
    quad = 0.0
    cross = 0.0
    for s in samples:
        predicted = forward(response, mixture, s)
        weighted = apply_noise_inverse(noise, predicted)
        quad += 0.5 * float(np.sum(predicted.values * weighted.values))
        cross += float(np.sum(data.values * weighted.values))
    prior_term = 0.5 * mean.grid.pixel_volume * float(
        np.sum(mean.values * prior_inverse_apply(priors, mean))
    )
    return (quad - cross) / len(samples) + prior_term


def _aligned_rms(mean: MultiField, mixture: MixtureMatrix, truth: MultiField) -> float:
    return align_to_reference(mixture, mean, components_ref=truth).rms_deviation


def _starting_mixture(response: Response, n_components: int, seed: int) -> MixtureMatrix:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=_INIT_KEY))
    return initial_mixture(response.n_channels, n_components, rng)


def _plateau(kls: list[float], window: int, rel_change: float) -> bool:
    if len(kls) < 2 * window:
        return False
    recent = np.mean(kls[-window:])
    previous = np.mean(kls[-2 * window : -window])
    scale = max(abs(previous), 1e-30)
    return abs(recent - previous) / scale < rel_change


def run_inference(
    data: DataSet,
    response: Response,
    noise: NoiseCovariance,
    priors: Sequence[HarmonicCovariance],
    n_components: int,
    schedule: Schedule,
    seed: int,
    ground_truth: Optional[MultiField] = None,
    start_mixture: Optional[MixtureMatrix] = None,
) -> tuple[PosteriorState, Trace]:
    """Alternate Wiener means, posterior sampling, and mixture updates.

    Every iteration redraws its sample set around the current mean, so
    sample noise stays independent across iterations.  The returned trace
    carries one record per iteration; the deviation column is NaN when no
    ground truth is supplied.  ``start_mixture`` replaces the seed-derived
    random starting point; the sample streams still follow ``seed``.
    """
    priors = tuple(priors)
    if start_mixture is None:
        mixture = _starting_mixture(response, n_components, seed)
    else:
        if start_mixture.matrix.shape != (response.n_channels, n_components):
            raise ValueError("start_mixture shape does not match channels x components")
        mixture = start_mixture
    trace = Trace()
    total = schedule.total_iterations
    if total == 0:
        problem = WienerProblem(response, mixture, noise, priors, data)
        mean, stats = wiener_mean(problem, CgConfig(max_iter=schedule.max_cg_iter))
        if not stats.converged:
            raise InferenceFailure("initial solve did not converge")
        return PosteriorState(mean, mixture, None, 0), trace

    mean: Optional[MultiField] = None
    samples: Optional[SampleSet] = None
    for t in range(total):
        started = time.perf_counter()
        cfg = CgConfig(
            abs_tol=schedule.cg_abs_tol,
            rel_tol=float(schedule.cg_rel_tols[t]),
            max_iter=schedule.max_cg_iter,
        )
        problem = WienerProblem(response, mixture, noise, priors, data)
        mean, stats = wiener_mean(problem, cfg, x0=mean)
        if not stats.converged:
            raise InferenceFailure(
                f"mean solve did not converge at iteration {t + 1} "
                f"(residual {stats.residual_norm:.3e}, target {stats.target:.3e})"
            )
        try:
            samples = draw_sample_set(
                problem, mean, int(schedule.sample_counts[t]), cfg, seed, iteration=t
            )
        except Exception as err:
            raise InferenceFailure(f"sampling failed at iteration {t + 1}: {err}") from err
        updated = mixture_update(samples, response, noise, data)
        mixture, mean, norms = normalize_columns(updated, mean)
        samples = samples.scale_components(norms)
        kl = sampled_kl(mixture, mean, samples, response, noise, data, priors)
        rms = (
            _aligned_rms(mean, mixture, ground_truth)
            if ground_truth is not None
            else float("nan")
        )
        wall = (time.perf_counter() - started) * 1e3
        trace.append(
            t + 1,
            rms,
            kl,
            len(samples),
            stats.iterations + samples.total_cg_iterations,
            wall,
        )
        if (t + 1) % 25 == 0 or t == total - 1:
            logger.info(
                "iteration %d/%d: kl=%.6g samples=%d%s",
                t + 1,
                total,
                kl,
                len(samples),
                f" rms={rms:.4g}" if ground_truth is not None else "",
            )
        if schedule.early_stop and _plateau(
            trace.sampled_kls, schedule.plateau_window, schedule.plateau_rel_change
        ):
            logger.info("objective plateau reached at iteration %d", t + 1)
            break

    return PosteriorState(mean, mixture, samples, trace.iterations[-1]), trace


def run_map(
    data: DataSet,
    response: Response,
    noise: NoiseCovariance,
    priors: Sequence[HarmonicCovariance],
    n_components: int,
    schedule: Schedule,
    seed: int,
    ground_truth: Optional[MultiField] = None,
    start_mixture: Optional[MixtureMatrix] = None,
) -> tuple[PosteriorState, Trace]:
    """Maximum-a-posteriori variant of :func:`run_inference`.

    Identical loop, but the mixture update sees only the current mean
    instead of a posterior sample set, so no component uncertainty feeds
    back into the estimate.  Shares the starting mixture of
    :func:`run_inference` for equal seeds.
    """
    priors = tuple(priors)
    if start_mixture is None:
        mixture = _starting_mixture(response, n_components, seed)
    else:
        if start_mixture.matrix.shape != (response.n_channels, n_components):
            raise ValueError("start_mixture shape does not match channels x components")
        mixture = start_mixture
    trace = Trace()
    total = schedule.total_iterations
    if total == 0:
        problem = WienerProblem(response, mixture, noise, priors, data)
        mean, stats = wiener_mean(problem, CgConfig(max_iter=schedule.max_cg_iter))
        if not stats.converged:
            raise InferenceFailure("initial solve did not converge")
        return PosteriorState(mean, mixture, None, 0), trace

    mean: Optional[MultiField] = None
    for t in range(total):
        started = time.perf_counter()
        cfg = CgConfig(
            abs_tol=schedule.cg_abs_tol,
            rel_tol=float(schedule.cg_rel_tols[t]),
            max_iter=schedule.max_cg_iter,
        )
        problem = WienerProblem(response, mixture, noise, priors, data)
        mean, stats = wiener_mean(problem, cfg, x0=mean)
        if not stats.converged:
            raise InferenceFailure(
                f"mean solve did not converge at iteration {t + 1} "
                f"(residual {stats.residual_norm:.3e}, target {stats.target:.3e})"
            )
        updated = map_mixture_update(mean, response, noise, data)
        mixture, mean, _ = normalize_columns(updated, mean)
        kl = sampled_kl(mixture, mean, [mean], response, noise, data, priors)
        rms = (
            _aligned_rms(mean, mixture, ground_truth)
            if ground_truth is not None
            else float("nan")
        )
        wall = (time.perf_counter() - started) * 1e3
        trace.append(t + 1, rms, kl, 0, stats.iterations, wall)
        if (t + 1) % 25 == 0 or t == total - 1:
            logger.info("map iteration %d/%d: kl=%.6g", t + 1, total, kl)

    return PosteriorState(mean, mixture, None, trace.iterations[-1]), trace
