"""Measurement model: instrument response, noise covariance, and the
mixing of signal components into data channels.

Data live on the same grid as the fields (point-wise sampling), with a
0/1 mask per channel marking measured points.  The adjoint of the
measurement injects data back onto the grid with an inverse pixel-volume
weight, so that it is the adjoint with respect to the plain sum in data
space and the box-measure inner product in field space.  With that
pairing the posterior precision below is exactly the inverse covariance
of the pixel-value posterior implied by the prior sampler.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fields import Grid, HarmonicCovariance, MultiField, prior_inverse_apply

__all__ = [
    "Response",
    "NoiseCovariance",
    "MixtureMatrix",
    "DataSet",
    "forward",
    "adjoint",
    "apply_noise_inverse",
    "apply_posterior_precision",
]


@dataclass(frozen=True)
class Response:
    """Point-sampling instrument response with a 0/1 mask per channel."""

    grid: Grid
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=float)
        if mask.ndim != self.grid.dim + 1 or mask.shape[1:] != self.grid.shape:
            raise ValueError(
                f"mask must have shape (channels, {self.grid.shape}), got {mask.shape}"
            )
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise ValueError("mask entries must be 0 or 1")
        object.__setattr__(self, "mask", mask)

    @classmethod
    def identity(cls, grid: Grid, n_channels: int) -> "Response":
        """Full-coverage response: every point of every channel measured."""
        return cls(grid, np.ones((n_channels,) + grid.shape))

    @property
    def n_channels(self) -> int:
        return self.mask.shape[0]

    def measured_fraction(self) -> np.ndarray:
        return self.mask.reshape(self.n_channels, -1).mean(axis=1)


@dataclass(frozen=True)
class NoiseCovariance:
    """Uncorrelated Gaussian noise: one positive variance per data point."""

    grid: Grid
    variance: np.ndarray = field(repr=False)

    def __post_init__(self):
        variance = np.asarray(self.variance, dtype=float)
        if variance.ndim != self.grid.dim + 1 or variance.shape[1:] != self.grid.shape:
            raise ValueError(
                f"variance must have shape (channels, {self.grid.shape}), got {variance.shape}"
            )
        if not np.all(np.isfinite(variance)) or np.any(variance <= 0):
            raise ValueError("noise variances must be positive and finite")
        object.__setattr__(self, "variance", variance)

    @classmethod
    def uniform(cls, grid: Grid, n_channels: int, variance: float) -> "NoiseCovariance":
        return cls(grid, np.full((n_channels,) + grid.shape, float(variance)))

    @property
    def n_channels(self) -> int:
        return self.variance.shape[0]


@dataclass(frozen=True)
class MixtureMatrix:
    """Mixing weights of each signal component in each data channel.

    Rows index channels, columns index components.
    """

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError("mixture must be a 2-d array (channels x components)")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("mixture entries must be finite")
        if matrix.shape[0] < matrix.shape[1]:
            warnings.warn(
                "fewer channels than components: the separation is underdetermined",
                RuntimeWarning,
                stacklevel=2,
            )
        object.__setattr__(self, "matrix", matrix)

    @property
    def n_channels(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_components(self) -> int:
        return self.matrix.shape[1]

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.matrix, axis=0)


@dataclass(frozen=True)
class DataSet:
    """Per-channel measurements on the grid; unmeasured points carry 0."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != self.grid.dim + 1 or values.shape[1:] != self.grid.shape:
            raise ValueError(
                f"data must have shape (channels, {self.grid.shape}), got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("data values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]


def forward(response: Response, mixture: MixtureMatrix, s: MultiField) -> DataSet:
    """Mix components into channels and sample at the measured points."""
    if mixture.n_components != s.n_components:
        raise ValueError("mixture columns must match the number of components")
    if mixture.n_channels != response.n_channels:
        raise ValueError("mixture rows must match the number of channels")
    mixed = np.tensordot(mixture.matrix, s.values, axes=(1, 0))
    return DataSet(s.grid, mixed * response.mask)


def adjoint(response: Response, mixture: MixtureMatrix, d: DataSet) -> MultiField:
    """Adjoint of :func:`forward`: inject, then project onto components.

    Satisfies ``sum(d * forward(s)) == adjoint(d).dot(s)`` with the
    box-measure field inner product.
    """
    if mixture.n_channels != response.n_channels or d.n_channels != response.n_channels:
        raise ValueError("channel counts of response, mixture and data must agree")
    injected = d.values * response.mask / d.grid.pixel_volume
    comps = np.tensordot(mixture.matrix.T, injected, axes=(1, 0))
    return MultiField(d.grid, comps, check=False)


def apply_noise_inverse(noise: NoiseCovariance, d: DataSet) -> DataSet:
    """Weight data by the inverse noise variance, point by point."""
    if noise.n_channels != d.n_channels:
        raise ValueError("noise and data channel counts must agree")
    return DataSet(d.grid, d.values / noise.variance)


def apply_posterior_precision(
    response: Response,
    mixture: MixtureMatrix,
    noise: NoiseCovariance,
    priors: Sequence[HarmonicCovariance],
    m: MultiField,
) -> MultiField:
    """Inverse posterior covariance applied to a multi-component field.

    The sum of the noise-weighted measurement normal operator and the
    inverse prior covariance of each component.  Self-adjoint and positive
    definite whenever every prior spectrum is strictly positive.
    """
    likelihood = adjoint(
        response, mixture, apply_noise_inverse(noise, forward(response, mixture, m))
    )
    prior_part = prior_inverse_apply(priors, m)
    return MultiField(m.grid, likelihood.values + prior_part, check=False)
