"""Real fields on periodic regular grids, their harmonic representation,
and covariance operators defined by an isotropic power spectrum.

Conventions
-----------
The harmonic coefficient of a field ``f`` at integer mode ``k`` is the
Riemann sum of ``integral f(x) exp(+2 pi i k x / L) dx`` over the box,
i.e. the pixel values weighted by the pixel volume.  Real fields are
stored in position space; harmonic arrays keep only the independent half
of the modes (``numpy.fft.rfftn`` layout).  Covariances of statistically
homogeneous fields are diagonal in this basis, with eigenvalues given by
the power spectrum evaluated at the wavenumber magnitude in cycles per
unit length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "MultiField",
    "PowerSpectrum",
    "HarmonicCovariance",
    "harmonic_forward",
    "harmonic_adjoint",
    "covariance_from_spectrum",
    "apply_covariance",
    "apply_inverse_covariance",
    "draw_prior_sample",
]


@dataclass(frozen=True)
class Grid:
    """Regular periodic grid on a box.

    Parameters
    ----------
    shape : tuple of int
        Number of pixels along each axis; every entry must be >= 2.
    lengths : tuple of float, optional
        Box side lengths.  Defaults to 1.0 per axis.
    """

    shape: tuple[int, ...]
    lengths: tuple[float, ...] = ()

    def __post_init__(self):
        shape = tuple(int(n) for n in np.atleast_1d(np.asarray(self.shape)))
        if len(shape) < 1:
            raise ValueError("grid needs at least one axis")
        if any(n < 2 for n in shape):
            raise ValueError(f"grid shape entries must be >= 2, got {shape}")
        lengths = self.lengths
        if lengths is None or len(lengths) == 0:
            lengths = (1.0,) * len(shape)
        lengths = tuple(float(x) for x in np.atleast_1d(np.asarray(lengths)))
        if len(lengths) != len(shape):
            raise ValueError("lengths must match the number of axes")
        if any(x <= 0 for x in lengths):
            raise ValueError(f"box lengths must be positive, got {lengths}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lengths", lengths)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n_pixels(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def pixel_volume(self) -> float:
        return self.volume / self.n_pixels

    @property
    def harmonic_shape(self) -> tuple[int, ...]:
        """Shape of the stored (half-spectrum) harmonic coefficient array."""
        return self.shape[:-1] + (self.shape[-1] // 2 + 1,)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Euclidean wavenumber magnitude per stored mode, cycles per unit length."""
        axes = [
            np.fft.fftfreq(n, d=length / n)
            for n, length in zip(self.shape[:-1], self.lengths[:-1])
        ]
        axes.append(
            np.fft.rfftfreq(self.shape[-1], d=self.lengths[-1] / self.shape[-1])
        )
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.sqrt(sum(k**2 for k in mesh))

    @cached_property
    def positions(self) -> list[np.ndarray]:
        """Pixel coordinates along each axis (lower-left pixel corners)."""
        return [
            np.arange(n) * (length / n)
            for n, length in zip(self.shape, self.lengths)
        ]


def _check_values(grid: Grid, values: np.ndarray, expected_shape) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != expected_shape:
        raise ValueError(f"expected values of shape {expected_shape}, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("field values must be finite")
    return values


class Field:
    """A single real scalar field sampled on a :class:`Grid`."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values, *, check: bool = True):
        if check:
            values = _check_values(grid, values, grid.shape)
        self.grid = grid
        self.values = values

    def dot(self, other: "Field") -> float:
        """Box-measure inner product: pixel volume times the pixel-wise sum."""
        return self.grid.pixel_volume * float(
            np.dot(self.values.ravel(), other.values.ravel())
        )

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), check=False)

    def __repr__(self):  # pragma: no cover
        return f"Field(shape={self.grid.shape})"


class MultiField:
    """An ordered collection of fields (one per signal component) on a shared grid.

    Values are stored as one array of shape ``(n_components, *grid.shape)``.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values, *, check: bool = True):
        if check:
            values = np.asarray(values, dtype=float)
            if values.ndim != grid.dim + 1 or values.shape[1:] != grid.shape:
                raise ValueError(
                    f"expected values of shape (c, {grid.shape}), got {values.shape}"
                )
            if values.shape[0] < 1:
                raise ValueError("need at least one component")
            if not np.all(np.isfinite(values)):
                raise ValueError("field values must be finite")
        self.grid = grid
        self.values = values

    @classmethod
    def from_fields(cls, fields: Sequence[Field]) -> "MultiField":
        if len(fields) < 1:
            raise ValueError("need at least one component")
        grid = fields[0].grid
        if any(f.grid != grid for f in fields):
            raise ValueError("all components must share one grid")
        return cls(grid, np.stack([f.values for f in fields]), check=False)

    @classmethod
    def zeros(cls, grid: Grid, n_components: int) -> "MultiField":
        return cls(grid, np.zeros((n_components,) + grid.shape), check=False)

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    @property
    def components(self) -> tuple[Field, ...]:
        return tuple(Field(self.grid, v, check=False) for v in self.values)

    def dot(self, other: "MultiField") -> float:
        return self.grid.pixel_volume * float(
            np.dot(self.values.ravel(), other.values.ravel())
        )

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    def copy(self) -> "MultiField":
        return MultiField(self.grid, self.values.copy(), check=False)

    def __repr__(self):  # pragma: no cover
        return f"MultiField(n_components={self.n_components}, shape={self.grid.shape})"


@dataclass(frozen=True)
class PowerSpectrum:
    """Isotropic power spectrum: a map from wavenumber magnitude to power."""

    evaluate: Callable[[np.ndarray], np.ndarray]

    def __call__(self, k) -> np.ndarray:
        return np.asarray(self.evaluate(np.asarray(k, dtype=float)), dtype=float)


@dataclass(frozen=True)
class HarmonicCovariance:
    """Covariance of a homogeneous field, diagonal in the harmonic basis.

    ``diag`` holds the (nonnegative) eigenvalues on the stored half-spectrum
    modes; Hermitian partner modes share eigenvalues by construction because
    the spectrum depends on ``|k|`` only.
    """

    grid: Grid
    diag: np.ndarray = field(repr=False)

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        if diag.shape != self.grid.harmonic_shape:
            raise ValueError(
                f"diagonal must have shape {self.grid.harmonic_shape}, got {diag.shape}"
            )
        if not np.all(np.isfinite(diag)):
            raise ValueError("covariance eigenvalues must be finite")
        if np.any(diag < 0):
            raise ValueError("covariance eigenvalues must be nonnegative")
        object.__setattr__(self, "diag", diag)

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.diag > 0))


def harmonic_forward(f: Field) -> np.ndarray:
    """Harmonic coefficients of a real field (half-spectrum layout).

    The coefficient at integer mode ``k`` is the pixel-volume-weighted sum
    ``sum_m f_m exp(+2 pi i k . x_m / L)``, the Riemann discretization of
    the box Fourier integral.
    """
    if not np.all(np.isfinite(f.values)):
        raise ValueError("field values must be finite")
    return np.conj(np.fft.rfftn(f.values)) * f.grid.pixel_volume


def harmonic_adjoint(coefficients: np.ndarray, grid: Grid) -> Field:
    """Inverse of :func:`harmonic_forward`; reproduces the field to round-off."""
    axes = tuple(range(grid.dim))
    values = np.fft.irfftn(np.conj(coefficients), s=grid.shape, axes=axes) / grid.pixel_volume
    return Field(grid, values, check=False)


def covariance_from_spectrum(grid: Grid, spectrum: PowerSpectrum) -> HarmonicCovariance:
    """Tabulate a spectrum on the grid's modes as a diagonal covariance."""
    diag = spectrum(grid.wavenumbers)
    if diag.shape != grid.harmonic_shape:
        raise ValueError("spectrum must evaluate elementwise on the mode array")
    return HarmonicCovariance(grid, diag)


def _spectral_apply(values: np.ndarray, diag: np.ndarray, grid: Grid) -> np.ndarray:
    # Round-trip normalization cancels: adjoint(diag * forward(f)) reduces to
    # an rfft, a diagonal multiply, and an irfft.
    axes = tuple(range(values.ndim - grid.dim, values.ndim))
    modes = np.fft.rfftn(values, axes=axes)
    modes *= diag
    return np.fft.irfftn(modes, s=grid.shape, axes=axes)


def apply_covariance(cov: HarmonicCovariance, f: Field) -> Field:
    """Apply the covariance operator: scale each harmonic mode by its eigenvalue."""
    if f.grid != cov.grid:
        raise ValueError("field and covariance live on different grids")
    return Field(cov.grid, _spectral_apply(f.values, cov.diag, cov.grid), check=False)


def apply_inverse_covariance(cov: HarmonicCovariance, f: Field) -> Field:
    """Apply the inverse covariance; rejects spectra with zero-power modes."""
    if f.grid != cov.grid:
        raise ValueError("field and covariance live on different grids")
    if not cov.strictly_positive:
        raise ValueError("inverse covariance undefined: spectrum has zero-power modes")
    return Field(cov.grid, _spectral_apply(f.values, 1.0 / cov.diag, cov.grid), check=False)


def prior_inverse_apply(
    priors: Sequence[HarmonicCovariance], mf: MultiField
) -> np.ndarray:
    """Inverse-covariance application for every component at once."""
    grid = mf.grid
    if len(priors) != mf.n_components:
        raise ValueError("need one prior covariance per component")
    diags = np.stack([cov.diag for cov in priors])
    if np.any(diags <= 0):
        raise ValueError("inverse covariance undefined: spectrum has zero-power modes")
    return _spectral_apply(mf.values, 1.0 / diags, grid)


def draw_prior_sample(cov: HarmonicCovariance, rng: np.random.Generator) -> Field:
    """Draw one zero-mean field whose harmonic modes carry the covariance eigenvalues.

    White pixel noise is transformed, weighted mode-wise by the square root
    of the eigenvalues, and transformed back; Hermitian symmetry (including
    the purely real zero and Nyquist modes) is inherited from the transform
    of the real noise field.
    """
    grid = cov.grid
    axes = tuple(range(grid.dim))
    white = rng.standard_normal(grid.shape)
    weight = np.sqrt(cov.diag / grid.pixel_volume)
    values = np.fft.irfftn(np.fft.rfftn(white, axes=axes) * weight, s=grid.shape, axes=axes)
    return Field(grid, values, check=False)
