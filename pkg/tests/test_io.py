import numpy as np
import pytest

from fieldsep.fields import Grid, MultiField
from fieldsep.inference import Trace
from fieldsep.io import (
    load_matrix,
    load_multifield,
    load_scenario,
    load_trace,
    save_matrix,
    save_multifield,
    save_scenario,
    save_trace,
)
from fieldsep.synth import generate_scenario, scenario2_spec


def test_multifield_round_trip_is_exact(tmp_path, rng):
    grid = Grid((12,), (3.5,))
    mf = MultiField(grid, rng.standard_normal((3, 12)))
    path = tmp_path / "field.csv"
    save_multifield(path, mf)
    back = load_multifield(path)
    assert back.grid == grid
    np.testing.assert_array_equal(back.values, mf.values)


def test_multifield_header_is_commented_csv(tmp_path, rng):
    grid = Grid((4,), (1.0,))
    path = tmp_path / "field.csv"
    save_multifield(path, MultiField(grid, rng.standard_normal((2, 4))))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# fieldsep-field v1")
    assert "shape=4" in lines[1] and "components=2" in lines[1]
    assert len(lines) == 2 + 4  # header + one row per pixel


def test_multifield_rejects_wrong_row_count(tmp_path, rng):
    grid = Grid((8,), (1.0,))
    path = tmp_path / "field.csv"
    save_multifield(path, MultiField(grid, rng.standard_normal((1, 8))))
    text = path.read_text().splitlines()
    (path).write_text("\n".join(text[:-2]) + "\n")
    with pytest.raises(ValueError, match="rows"):
        load_multifield(path)


def test_matrix_round_trip(tmp_path, rng):
    matrix = rng.standard_normal((5, 2))
    path = tmp_path / "mix.csv"
    save_matrix(path, matrix)
    np.testing.assert_array_equal(load_matrix(path), matrix)


def test_trace_round_trip(tmp_path):
    trace = Trace()
    trace.append(1, 0.5, -10.25, 1, 40, 12.5)
    trace.append(2, float("nan"), -11.5, 3, 55, 9.0)
    path = tmp_path / "trace.csv"
    save_trace(path, trace)
    back = load_trace(path)
    assert back.iterations == [1, 2]
    assert back.rms_deviations[0] == 0.5
    assert np.isnan(back.rms_deviations[1])
    assert back.sampled_kls == [-10.25, -11.5]
    assert back.sample_counts == [1, 3]
    assert back.cg_iterations == [40, 55]


def test_scenario_bundle_round_trip(tmp_path):
    scen = generate_scenario(scenario2_spec(seed=4))
    save_scenario(tmp_path / "bundle", scen)
    names = {p.name for p in (tmp_path / "bundle").iterdir()}
    assert {
        "meta.json",
        "components_true.csv",
        "mixture_true.csv",
        "mask.csv",
        "noise_variance.csv",
    } <= names
    assert {f"data_ch{i}.csv" for i in range(5)} <= names

    back = load_scenario(tmp_path / "bundle")
    assert back.spec == scen.spec
    np.testing.assert_array_equal(back.components_true.values, scen.components_true.values)
    np.testing.assert_array_equal(back.mixture_true.matrix, scen.mixture_true.matrix)
    np.testing.assert_array_equal(back.response.mask, scen.response.mask)
    np.testing.assert_array_equal(back.noise.variance, scen.noise.variance)
    np.testing.assert_array_equal(back.data.values, scen.data.values)
    np.testing.assert_array_equal(back.noise_factors, scen.noise_factors)
    np.testing.assert_array_equal(back.priors[0].diag, scen.priors[0].diag)
