"""Wiener filtering: the posterior mean and variance of the component
fields for a fixed mixture matrix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .cg import CgConfig, CgStats, cg_solve
from .fields import HarmonicCovariance, MultiField
from .operators import (
    DataSet,
    MixtureMatrix,
    NoiseCovariance,
    Response,
    adjoint,
    apply_noise_inverse,
    apply_posterior_precision,
)

__all__ = ["WienerProblem", "information_source", "wiener_mean", "posterior_variance"]


@dataclass(frozen=True)
class WienerProblem:
    """A linear Gaussian inference problem with a fixed mixture matrix."""

    response: Response
    mixture: MixtureMatrix
    noise: NoiseCovariance
    priors: tuple[HarmonicCovariance, ...]
    data: DataSet

    def __post_init__(self):
        priors = tuple(self.priors)
        object.__setattr__(self, "priors", priors)
        grid = self.data.grid
        if self.response.grid != grid or self.noise.grid != grid:
            raise ValueError("response, noise and data must share one grid")
        if any(cov.grid != grid for cov in priors):
            raise ValueError("prior covariances must live on the data grid")
        channels = {
            self.response.n_channels,
            self.noise.n_channels,
            self.data.n_channels,
            self.mixture.n_channels,
        }
        if len(channels) != 1:
            raise ValueError("channel counts of all model pieces must agree")
        if len(priors) != self.mixture.n_components:
            raise ValueError("need one prior covariance per component")
        if not all(cov.strictly_positive for cov in priors):
            raise ValueError("prior spectra must be strictly positive")

    @property
    def grid(self):
        return self.data.grid

    @property
    def n_components(self) -> int:
        return self.mixture.n_components

    def apply_precision(self, m: MultiField) -> MultiField:
        return apply_posterior_precision(
            self.response, self.mixture, self.noise, self.priors, m
        )


def information_source(problem: WienerProblem) -> MultiField:
    """Noise-weighted data pulled back to component space."""
    weighted = apply_noise_inverse(problem.noise, problem.data)
    return adjoint(problem.response, problem.mixture, weighted)


def wiener_mean(
    problem: WienerProblem,
    cfg: CgConfig = CgConfig(),
    x0: Optional[MultiField] = None,
) -> tuple[MultiField, CgStats]:
    """Posterior mean of the components, by conjugate gradients.

    Returns the mean together with the solver statistics; on
    non-convergence the best iterate is returned with
    ``stats.converged == False`` and the caller decides how to proceed.
    """
    return cg_solve(problem.apply_precision, information_source(problem), x0, cfg)


def posterior_variance(samples: Iterable[MultiField], mean: MultiField) -> MultiField:
    """Per-pixel posterior variance estimated from samples about a known mean.

    The mean is not re-estimated, so the average of squared residuals is
    taken without a degrees-of-freedom correction.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("need at least two samples to estimate a variance")
    acc = np.zeros_like(mean.values)
    for s in samples:
        acc += (s.values - mean.values) ** 2
    return MultiField(mean.grid, acc / len(samples), check=False)
