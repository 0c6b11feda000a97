import numpy as np
import pytest

from fieldsep.cg import CgConfig, CgStats, ConjugateGradientBreakdown, cg_solve
from fieldsep.fields import Grid, MultiField


def spd_operator(grid, rng, n_components=1, cond=50.0):
    """Random SPD matrix acting on flattened multifield values."""
    n = n_components * grid.n_pixels
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.geomspace(1.0, cond, n)
    a = q @ np.diag(eig) @ q.T

    def apply(mf):
        out = a @ mf.values.reshape(-1)
        return MultiField(grid, out.reshape(mf.values.shape), check=False)

    return a, apply


def test_solves_small_system(rng):
    grid = Grid(shape=(8,))
    a, apply = spd_operator(grid, rng, n_components=2)
    x_true = rng.standard_normal(16)
    b = MultiField(grid, (a @ x_true).reshape(2, 8), check=False)
    x, stats = cg_solve(apply, b, cfg=CgConfig(rel_tol=1e-12, max_iter=200))
    assert stats.converged
    np.testing.assert_allclose(x.values.reshape(-1), x_true, rtol=1e-8)


def test_residual_meets_target(rng):
    grid = Grid(shape=(8,))
    a, apply = spd_operator(grid, rng)
    b = MultiField(grid, rng.standard_normal((1, 8)))
    cfg = CgConfig(rel_tol=1e-6, max_iter=200)
    x, stats = cg_solve(apply, b, cfg=cfg)
    residual = a @ x.values.reshape(-1) - b.values.reshape(-1)
    r_norm = np.sqrt(grid.pixel_volume) * np.linalg.norm(residual)
    assert r_norm <= stats.target * (1 + 1e-12)
    assert stats.residual_norm == pytest.approx(r_norm, rel=1e-6)


def test_warm_start_converges_immediately(rng):
    grid = Grid(shape=(8,))
    a, apply = spd_operator(grid, rng)
    x_true = rng.standard_normal(8)
    b = MultiField(grid, (a @ x_true).reshape(1, 8), check=False)
    x0 = MultiField(grid, x_true.reshape(1, 8), check=False)
    x, stats = cg_solve(apply, b, x0=x0, cfg=CgConfig(abs_tol=1e-10, rel_tol=0.0))
    assert stats.converged
    assert stats.iterations == 0
    np.testing.assert_array_equal(x.values, x0.values)


def test_non_convergence_returns_best_iterate(rng):
    grid = Grid(shape=(8,))
    a, apply = spd_operator(grid, rng, cond=1e6)
    b = MultiField(grid, rng.standard_normal((1, 8)))
    x, stats = cg_solve(apply, b, cfg=CgConfig(rel_tol=1e-14, max_iter=3))
    assert isinstance(stats, CgStats)
    assert not stats.converged
    assert stats.iterations == 3
    assert np.all(np.isfinite(x.values))


def test_indefinite_operator_raises(rng):
    grid = Grid(shape=(8,))

    def negate(mf):
        return MultiField(grid, -mf.values, check=False)

    b = MultiField(grid, rng.standard_normal((1, 8)))
    with pytest.raises(ConjugateGradientBreakdown):
        cg_solve(negate, b, cfg=CgConfig(rel_tol=1e-8))


def test_nan_breakdown(rng):
    grid = Grid(shape=(8,))

    def bad(mf):
        out = mf.values.copy()
        out[0, 0] = np.nan
        return MultiField(grid, out, check=False)

    b = MultiField(grid, rng.standard_normal((1, 8)))
    with pytest.raises(ConjugateGradientBreakdown):
        cg_solve(bad, b, cfg=CgConfig(rel_tol=1e-8))


def test_config_validation():
    with pytest.raises(ValueError):
        CgConfig(abs_tol=0.0, rel_tol=0.0)
    with pytest.raises(ValueError):
        CgConfig(rel_tol=-1.0)
    with pytest.raises(ValueError):
        CgConfig(max_iter=0)


def test_preconditioner_reduces_iterations(rng):
    grid = Grid(shape=(16,))
    a, apply = spd_operator(grid, rng, cond=1e4)

    a_inv = np.linalg.inv(a)

    def precond(mf):
        out = a_inv @ mf.values.reshape(-1)
        return MultiField(grid, out.reshape(mf.values.shape), check=False)

    b = MultiField(grid, rng.standard_normal((1, 16)))
    _, plain = cg_solve(apply, b, cfg=CgConfig(rel_tol=1e-10, max_iter=500))
    _, fancy = cg_solve(apply, b, cfg=CgConfig(rel_tol=1e-10, max_iter=500), precond=precond)
    assert fancy.iterations < plain.iterations


def test_callback_sees_every_iterate(rng):
    grid = Grid(shape=(8,))
    a, apply = spd_operator(grid, rng)
    b = MultiField(grid, rng.standard_normal((1, 8)))
    seen = []
    _, stats = cg_solve(
        apply, b, cfg=CgConfig(rel_tol=1e-8, max_iter=100), callback=lambda x: seen.append(x)
    )
    assert len(seen) == stats.iterations


def test_terminates_within_dimension_many_iterations(rng):
    # exact-arithmetic CG finishes in n steps; rounding erodes that for
    # spread spectra, but clustered eigenvalues keep the finite-termination
    # behaviour intact across the whole well-conditioned range
    for n, cond in ((16, 30.0), (48, 400.0), (64, 900.0)):
        grid = Grid(shape=(n,))
        centers = np.geomspace(1.0, cond, 3)
        eig = np.sort(
            np.concatenate(
                [c * (1.0 + 1e-4 * rng.standard_normal(n // 3 + 1)) for c in centers]
            )[:n]
        )
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        a = q @ np.diag(eig) @ q.T

        def apply(mf):
            out = a @ mf.values.reshape(-1)
            return MultiField(grid, out.reshape(mf.values.shape), check=False)

        b = MultiField(grid, rng.standard_normal((1, n)))
        x, stats = cg_solve(apply, b, cfg=CgConfig(rel_tol=1e-8, max_iter=n))
        assert stats.converged
        assert stats.iterations <= n
        residual = a @ x.values.reshape(-1) - b.values.reshape(-1)
        assert np.linalg.norm(residual) <= 1e-8 * np.linalg.norm(b.values) * (1 + 1e-6)


def test_error_decreases_monotonically_in_the_a_norm(rng):
    grid = Grid(shape=(24,))
    a, apply = spd_operator(grid, rng, cond=300.0)
    x_true = rng.standard_normal(24)
    b = MultiField(grid, (a @ x_true).reshape(1, 24), check=False)

    errors = []

    def record(x):
        e = x.values.reshape(-1) - x_true
        errors.append(float(e @ a @ e))

    cg_solve(apply, b, cfg=CgConfig(rel_tol=1e-10, max_iter=200), callback=record)
    assert len(errors) > 2
    assert all(later <= earlier * (1 + 1e-12) for earlier, later in zip(errors, errors[1:]))
