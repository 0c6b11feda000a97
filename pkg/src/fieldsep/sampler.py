"""Posterior sampling for a fixed mixture matrix.

A sample is built from a prior draw and a mock-data Wiener solve: the
prior fluctuation that the filter cannot explain is carried over to the
actual posterior mean, which yields a draw with exactly the posterior
covariance (up to the solver tolerance).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from .cg import CgConfig
from .fields import MultiField, draw_prior_sample
from .operators import DataSet, forward
from .wiener import WienerProblem, wiener_mean

__all__ = ["SampleSet", "SamplingError", "draw_posterior_sample", "draw_sample_set"]


class SamplingError(RuntimeError):
    """A sample draw failed (its inner solver did not converge)."""


@dataclass
class SampleSet:
    """Posterior samples plus the bookkeeping needed to reproduce them."""

    samples: list[MultiField]
    iteration: int
    seed_keys: tuple[tuple[int, int], ...]
    cg_iterations: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[MultiField]:
        return iter(self.samples)

    def scale_components(self, factors: np.ndarray) -> "SampleSet":
        """Rescale every sample component-wise (gauge change of the mixture)."""
        factors = np.asarray(factors, dtype=float)
        shape = (-1,) + (1,) * self.samples[0].grid.dim
        scaled = [
            MultiField(s.grid, s.values * factors.reshape(shape), check=False)
            for s in self.samples
        ]
        return SampleSet(scaled, self.iteration, self.seed_keys, self.cg_iterations)

    @property
    def total_cg_iterations(self) -> int:
        return int(sum(self.cg_iterations))


def _draw_noise(problem: WienerProblem, rng: np.random.Generator) -> np.ndarray:
    """Noise realization on the measured points only; masked points stay 0."""
    mask = problem.response.mask
    values = np.zeros_like(mask)
    measured = mask > 0
    values[measured] = rng.standard_normal(int(measured.sum())) * np.sqrt(
        problem.noise.variance[measured]
    )
    return values


def draw_posterior_sample(
    problem: WienerProblem,
    mean: MultiField,
    cfg: CgConfig,
    rng: np.random.Generator,
) -> tuple[MultiField, int]:
    """One posterior draw; returns the sample and the inner CG iteration count.

    The generator is consumed in a fixed order: one prior draw per
    component, then the noise realization channel by channel.
    """
    prior_draw = MultiField.from_fields(
        [draw_prior_sample(cov, rng) for cov in problem.priors]
    )
    mock_values = (
        forward(problem.response, problem.mixture, prior_draw).values
        + _draw_noise(problem, rng)
    )
    mock_problem = replace(problem, data=DataSet(problem.grid, mock_values))
    mock_mean, stats = wiener_mean(mock_problem, cfg)
    if not stats.converged:
        raise SamplingError(
            f"mock-data solve did not converge within {cfg.max_iter} iterations "
            f"(residual {stats.residual_norm:.3e}, target {stats.target:.3e})"
        )
    values = prior_draw.values - mock_mean.values + mean.values
    return MultiField(mean.grid, values, check=False), stats.iterations


def draw_sample_set(
    problem: WienerProblem,
    mean: MultiField,
    count: int,
    cfg: CgConfig,
    seed: int,
    iteration: int = 0,
) -> SampleSet:
    """Draw ``count`` independent posterior samples.

    Each sample gets its own generator, keyed by ``(iteration, index)``
    under the master ``seed``, so results do not depend on the order in
    which samples are produced.
    """
    if count < 1:
        raise ValueError("sample count must be at least 1")
    keys = tuple((iteration, index) for index in range(count))
    samples = []
    cg_iters = []
    for key in keys:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
        try:
            sample, iters = draw_posterior_sample(problem, mean, cfg, rng)
        except SamplingError as err:
            raise SamplingError(
                f"sample {key[1]} of iteration {key[0]} failed: {err}"
            ) from err
        samples.append(sample)
        cg_iters.append(iters)
    return SampleSet(samples, iteration, keys, tuple(cg_iters))
