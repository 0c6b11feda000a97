import numpy as np
import pytest

from fieldsep.cg import CgConfig
from fieldsep.sampler import SamplingError, draw_posterior_sample, draw_sample_set
from fieldsep.wiener import WienerProblem, wiener_mean

from conftest import random_problem
from oracles import dense_posterior_pixel_covariance

TIGHT = CgConfig(rel_tol=1e-11, max_iter=2000)


def make_problem(grid, n_channels, n_components, rng, masked=False):
    response, mixture, noise, priors, data = random_problem(
        grid, n_channels, n_components, rng, masked=masked
    )
    return WienerProblem(response, mixture, noise, priors, data)


def test_residual_moments_match_dense_posterior(rng, grid16_unit_box):
    p = make_problem(grid16_unit_box, 3, 2, rng, masked=True)
    mean, _ = wiener_mean(p, TIGHT)
    sample_set = draw_sample_set(p, mean, 3000, TIGHT, seed=11)
    resid = np.stack([s.values.reshape(-1) - mean.values.reshape(-1) for s in sample_set])
    want = dense_posterior_pixel_covariance(p.response, p.mixture, p.noise, p.priors, p.grid)
    got = resid.T @ resid / resid.shape[0]
    frob = np.linalg.norm(got - want) / np.linalg.norm(want)
    assert frob < 0.15
    sigma = np.sqrt(np.diag(want) / resid.shape[0])
    assert np.max(np.abs(resid.mean(axis=0)) / sigma) < 5.0


def test_sample_set_is_deterministic(rng, grid16):
    p = make_problem(grid16, 3, 2, rng)
    mean, _ = wiener_mean(p, TIGHT)
    a = draw_sample_set(p, mean, 4, TIGHT, seed=7, iteration=3)
    b = draw_sample_set(p, mean, 4, TIGHT, seed=7, iteration=3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.values, y.values)
    assert a.seed_keys == b.seed_keys == tuple((3, i) for i in range(4))


def test_sample_draws_do_not_depend_on_count(rng, grid16):
    # sample i is keyed by (iteration, i), so a longer set extends a shorter one
    p = make_problem(grid16, 3, 2, rng)
    mean, _ = wiener_mean(p, TIGHT)
    short = draw_sample_set(p, mean, 2, TIGHT, seed=7)
    long = draw_sample_set(p, mean, 5, TIGHT, seed=7)
    for x, y in zip(short, long):
        np.testing.assert_array_equal(x.values, y.values)


def test_iteration_key_changes_the_draws(rng, grid16):
    p = make_problem(grid16, 3, 2, rng)
    mean, _ = wiener_mean(p, TIGHT)
    a = draw_sample_set(p, mean, 1, TIGHT, seed=7, iteration=0)
    b = draw_sample_set(p, mean, 1, TIGHT, seed=7, iteration=1)
    assert not np.array_equal(a.samples[0].values, b.samples[0].values)


def test_scale_components(rng, grid16):
    p = make_problem(grid16, 3, 2, rng)
    mean, _ = wiener_mean(p, TIGHT)
    ss = draw_sample_set(p, mean, 2, TIGHT, seed=3)
    scaled = ss.scale_components(np.array([2.0, 0.5]))
    np.testing.assert_allclose(scaled.samples[0].values[0], 2.0 * ss.samples[0].values[0])
    np.testing.assert_allclose(scaled.samples[1].values[1], 0.5 * ss.samples[1].values[1])


def test_failed_inner_solve_raises(rng, grid16):
    p = make_problem(grid16, 3, 2, rng)
    mean, _ = wiener_mean(p, TIGHT)
    starved = CgConfig(rel_tol=1e-13, max_iter=1)
    with pytest.raises(SamplingError, match="iteration"):
        draw_sample_set(p, mean, 1, starved, seed=0)


def test_sample_count_validated(rng, grid16):
    p = make_problem(grid16, 3, 2, rng)
    mean, _ = wiener_mean(p, TIGHT)
    with pytest.raises(ValueError):
        draw_sample_set(p, mean, 0, TIGHT, seed=0)


def test_single_draw_uses_only_measured_noise(rng, grid16):
    # all channels fully masked except a few points: the mock data must
    # vanish exactly on the unmeasured points
    mask = np.zeros((2, 16))
    mask[:, :3] = 1.0
    response, mixture, noise, priors, data = random_problem(grid16, 2, 2, rng)
    from fieldsep.operators import DataSet, Response

    p = WienerProblem(
        Response(grid16, mask), mixture, noise, priors,
        DataSet(grid16, data.values * mask),
    )
    mean, _ = wiener_mean(p, TIGHT)
    rng2 = np.random.default_rng(0)
    sample, iters = draw_posterior_sample(p, mean, TIGHT, rng2)
    assert iters >= 1
    assert np.all(np.isfinite(sample.values))


def test_draw_order_of_streams_does_not_matter(rng, grid16):
    # each sample owns the stream keyed by its index, so drawing the set
    # back to front reproduces the forward-order draws exactly
    p = make_problem(grid16, 3, 2, rng)
    mean, _ = wiener_mean(p, TIGHT)
    ordered = draw_sample_set(p, mean, 3, TIGHT, seed=19, iteration=2)

    reversed_draws = {}
    for index in (2, 1, 0):
        stream = np.random.default_rng(np.random.SeedSequence(19, spawn_key=(2, index)))
        sample, _ = draw_posterior_sample(p, mean, TIGHT, stream)
        reversed_draws[index] = sample

    for index, sample in enumerate(ordered):
        np.testing.assert_array_equal(reversed_draws[index].values, sample.values)
