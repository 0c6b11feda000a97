"""Mixture-matrix estimation from posterior samples, gauge fixing, and
the evaluation-only alignment against a reference."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .fields import MultiField
from .operators import DataSet, MixtureMatrix, NoiseCovariance, Response

__all__ = [
    "mixture_update",
    "map_mixture_update",
    "normalize_columns",
    "AlignmentResult",
    "align_to_reference",
]

_RIDGE = 1e-10
_COND_LIMIT = 1e12
_MAX_ALIGN_COMPONENTS = 8


def _channel_systems(
    samples: Iterable[MultiField],
    response: Response,
    noise: NoiseCovariance,
    data: DataSet,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample-averaged normal equations, one small system per channel.

    For channel ``i``: ``A[i][j, k]`` is the noise-weighted overlap of the
    measured components ``j`` and ``k``, and ``b[i][j]`` the overlap of the
    data with component ``j``.  Both are plain data-space sums, so the
    systems of different channels decouple.
    """
    samples = list(samples)
    if len(samples) < 1:
        raise ValueError("need at least one sample")
    n_channels = response.n_channels
    n_comp = samples[0].n_components
    weight = (response.mask / noise.variance).reshape(n_channels, -1)
    data_w = (data.values.reshape(n_channels, -1)) * weight
    a = np.zeros((n_channels, n_comp, n_comp))
    b = np.zeros((n_channels, n_comp))
    for s in samples:
        flat = s.values.reshape(n_comp, -1)
        a += np.einsum("in,jn,kn->ijk", weight, flat, flat, optimize=True)
        b += data_w @ flat.T
    return a / len(samples), b / len(samples)


def _solve_row(a: np.ndarray, b: np.ndarray, channel: int) -> np.ndarray:
    finite = np.all(np.isfinite(a)) and np.all(np.isfinite(b))
    if not finite:
        raise ValueError(f"non-finite normal equations for channel {channel}")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        scale = np.trace(a) / a.shape[0]
        if scale <= 0:
            scale = 1.0
        warnings.warn(
            f"near-singular mixture system for channel {channel} "
            f"(cond={cond:.2e}); adding ridge {_RIDGE * scale:.2e}",
            RuntimeWarning,
            stacklevel=3,
        )
        a = a + _RIDGE * scale * np.eye(a.shape[0])
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(a, b, rcond=None)[0]


def mixture_update(
    samples: Iterable[MultiField],
    response: Response,
    noise: NoiseCovariance,
    data: DataSet,
) -> MixtureMatrix:
    """Sample-averaged mixture estimate.

    Solves, channel by channel, the stationarity condition of the
    sample-averaged objective in the mixture entries.  Averaging over
    posterior samples (rather than plugging in the mean alone) makes the
    component uncertainty act as a regularizer on the estimate.
    """
    a, b = _channel_systems(samples, response, noise, data)
    rows = [_solve_row(a[i], b[i], i) for i in range(a.shape[0])]
    return MixtureMatrix(np.vstack(rows))


def map_mixture_update(
    mean: MultiField,
    response: Response,
    noise: NoiseCovariance,
    data: DataSet,
) -> MixtureMatrix:
    """Maximum-a-posteriori variant: the sample set collapses to the mean."""
    return mixture_update([mean], response, noise, data)


def normalize_columns(
    mixture: MixtureMatrix, mean: MultiField
) -> tuple[MixtureMatrix, MultiField, np.ndarray]:
    """Rescale each mixture column to unit norm, compensating in the mean.

    The product of mixture and components is left invariant; the applied
    column norms are returned so callers can rescale samples the same way.
    """
    norms = mixture.column_norms()
    if np.any(norms == 0):
        raise ValueError("cannot normalize a zero mixture column")
    scaled = mixture.matrix / norms
    shape = (-1,) + (1,) * mean.grid.dim
    mean_scaled = mean.values * norms.reshape(shape)
    return (
        MixtureMatrix(scaled),
        MultiField(mean.grid, mean_scaled, check=False),
        norms,
    )


@dataclass(frozen=True)
class AlignmentResult:
    permutation: tuple[int, ...]
    signs: np.ndarray
    mixture: MixtureMatrix
    mean: MultiField
    rms_deviation: float


def align_to_reference(
    mixture: MixtureMatrix,
    mean: MultiField,
    mixture_ref: Optional[MixtureMatrix] = None,
    components_ref: Optional[MultiField] = None,
) -> AlignmentResult:
    """Resolve the sign and ordering ambiguity against a reference.

    Exhaustively searches all component permutations (the optimal sign of
    each component decouples and is picked directly) and returns the
    candidate with the smallest root-mean-square deviation from the
    reference components; if only a reference mixture is given, the
    Frobenius deviation of the mixture is minimized instead.  Evaluation
    only: inference itself never consults a reference.
    """
    c = mixture.n_components
    if c > _MAX_ALIGN_COMPONENTS:
        raise ValueError(
            f"exhaustive alignment supports at most {_MAX_ALIGN_COMPONENTS} components"
        )
    if components_ref is not None:
        if components_ref.n_components != c:
            raise ValueError("reference component count mismatch")
        ref = components_ref.values.reshape(c, -1)
        cand = mean.values.reshape(c, -1)
        size = float(c * ref.shape[1])
    elif mixture_ref is not None:
        if mixture_ref.n_components != c:
            raise ValueError("reference mixture column count mismatch")
        ref = mixture_ref.matrix.T
        cand = mixture.matrix.T
        size = float(mixture.matrix.size)
    else:
        raise ValueError("need a reference: components, mixture, or both")

    # Squared deviation of (sign * candidate[source]) from ref[target]
    # decomposes into the three tables below; signs decouple per slot.
    cross = ref @ cand.T
    cand_sq = np.sum(cand**2, axis=1)
    ref_sq = np.sum(ref**2, axis=1)

    best: tuple[float, tuple[int, ...], np.ndarray] | None = None
    for perm in itertools.permutations(range(c)):
        cols = np.fromiter(perm, dtype=int)
        gains = cross[np.arange(c), cols]
        signs = np.where(gains >= 0, 1.0, -1.0)
        sse = float(np.sum(ref_sq + cand_sq[cols] - 2.0 * np.abs(gains)))
        if best is None or sse < best[0]:
            best = (sse, perm, signs)

    sse, perm, signs = best
    cols = list(perm)
    shape = (-1,) + (1,) * mean.grid.dim
    aligned_mean = MultiField(
        mean.grid, mean.values[cols] * signs.reshape(shape), check=False
    )
    aligned_mixture = MixtureMatrix(mixture.matrix[:, cols] * signs)
    if components_ref is not None:
        rms = float(
            np.sqrt(
                np.mean((aligned_mean.values - components_ref.values) ** 2)
            )
        )
    else:
        # cancellation can push an exact match a hair below zero
        rms = float(np.sqrt(max(sse, 0.0) / size))
    return AlignmentResult(perm, signs, aligned_mixture, aligned_mean, rms)
