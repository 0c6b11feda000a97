"""Matrix-free conjugate gradients for self-adjoint positive definite operators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fields import MultiField

__all__ = ["CgConfig", "CgStats", "ConjugateGradientBreakdown", "cg_solve"]


class ConjugateGradientBreakdown(RuntimeError):
    """Raised when the iteration encounters NaNs or a non-positive curvature."""


@dataclass(frozen=True)
class CgConfig:
    """Stopping rule: |A x - b| <= max(abs_tol, rel_tol * |A x0 - b|)."""

    abs_tol: float = 0.0
    rel_tol: float = 1e-7
    max_iter: int = 1000

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise ValueError("at least one of abs_tol, rel_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class CgStats:
    converged: bool
    iterations: int
    residual_norm: float
    target: float


def cg_solve(
    apply_a: Callable[[MultiField], MultiField],
    b: MultiField,
    x0: Optional[MultiField] = None,
    cfg: CgConfig = CgConfig(),
    precond: Optional[Callable[[MultiField], MultiField]] = None,
    callback: Optional[Callable[[MultiField], None]] = None,
) -> tuple[MultiField, CgStats]:
    """Solve ``A x = b`` for a self-adjoint positive definite operator.

    Non-convergence within ``max_iter`` is not an exception: the best
    iterate seen (smallest residual norm) is returned together with
    ``CgStats(converged=False, ...)`` and the caller decides.  NaNs or a
    direction of non-positive curvature raise
    :class:`ConjugateGradientBreakdown`.

    Parameters
    ----------
    precond : callable, optional
        Application of an approximate inverse of ``A`` (must itself be
        self-adjoint positive definite).  Plain CG when omitted.
    callback : callable, optional
        Invoked with the current iterate after every update.
    """
    grid = b.grid
    dv = grid.pixel_volume

    def wrap(values):
        return MultiField(grid, values, check=False)

    def dot(u, v):
        return dv * float(np.dot(u.ravel(), v.ravel()))

    x = np.zeros_like(b.values) if x0 is None else x0.values.copy()
    r = b.values - apply_a(wrap(x)).values
    r0_norm = np.sqrt(dot(r, r))
    target = max(cfg.abs_tol, cfg.rel_tol * r0_norm)
    if r0_norm <= target:
        return wrap(x), CgStats(True, 0, r0_norm, target)

    z = precond(wrap(r)).values if precond is not None else r
    p = z.copy()
    rz = dot(r, z)
    best_x = x.copy()
    best_norm = r0_norm

    for iteration in range(1, cfg.max_iter + 1):
        ap = apply_a(wrap(p)).values
        pap = dot(p, ap)
        if not np.isfinite(pap):
            raise ConjugateGradientBreakdown(
                f"non-finite curvature at iteration {iteration}"
            )
        if pap <= 0:
            raise ConjugateGradientBreakdown(
                f"non-positive curvature ({pap:.3e}) at iteration {iteration}: "
                "operator is not positive definite"
            )
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        r_norm = np.sqrt(dot(r, r))
        if not np.isfinite(r_norm):
            raise ConjugateGradientBreakdown(
                f"non-finite residual at iteration {iteration}"
            )
        if callback is not None:
            callback(wrap(x))
        if r_norm < best_norm:
            best_norm = r_norm
            best_x = x.copy()
        if r_norm <= target:
            return wrap(x), CgStats(True, iteration, r_norm, target)
        z = precond(wrap(r)).values if precond is not None else r
        rz_new = dot(r, z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p

    return wrap(best_x), CgStats(False, cfg.max_iter, best_norm, target)
