"""On-disk formats: CSV columns of 64-bit floats with a small commented
header, plus JSON metadata files.

A field file starts with comment lines ``# fieldsep-field v1`` and
``# dim=<d> shape=<n0[,n1...]> lengths=<l0[,l1...]>`` followed by one
CSV column per component (pixels in row-major order).  Matrices carry a
``# fieldsep-matrix v1`` header with their shape.  Values are printed
with 17 significant digits, so round trips are exact for doubles.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fields import Grid, MultiField
from .inference import Trace
from .operators import DataSet, MixtureMatrix, NoiseCovariance, Response
from .synth import Scenario, ScenarioSpec

__all__ = [
    "save_multifield",
    "load_multifield",
    "save_matrix",
    "load_matrix",
    "save_trace",
    "load_trace",
    "save_scenario",
    "load_scenario",
]

_FLOAT_FMT = "%.17g"


def _grid_header(grid: Grid) -> str:
    shape = ",".join(str(n) for n in grid.shape)
    lengths = ",".join(repr(x) for x in grid.lengths)
    return f"dim={grid.dim} shape={shape} lengths={lengths}"


def _read_header(path: Path) -> dict[str, str]:
    fields: dict[str, str] = {}
    with open(path) as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            for token in line[1:].split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    fields[key] = value
    return fields


def _parse_grid(header: dict[str, str]) -> Grid:
    try:
        shape = tuple(int(x) for x in header["shape"].split(","))
        lengths = tuple(float(x) for x in header["lengths"].split(","))
    except KeyError as err:
        raise ValueError(f"missing grid header field: {err}") from err
    return Grid(shape, lengths)


def save_multifield(path, mf: MultiField, label: str = "field") -> None:
    path = Path(path)
    header = (
        f"fieldsep-field v1 kind={label}\n"
        f"{_grid_header(mf.grid)} components={mf.n_components}"
    )
    columns = mf.values.reshape(mf.n_components, -1).T
    np.savetxt(path, columns, fmt=_FLOAT_FMT, delimiter=",", header=header)


def load_multifield(path) -> MultiField:
    path = Path(path)
    header = _read_header(path)
    grid = _parse_grid(header)
    columns = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if columns.shape[0] != grid.n_pixels:
        raise ValueError(
            f"{path}: expected {grid.n_pixels} rows, found {columns.shape[0]}"
        )
    values = columns.T.reshape((-1,) + grid.shape)
    return MultiField(grid, values)


def save_matrix(path, matrix: np.ndarray, label: str = "matrix") -> None:
    matrix = np.asarray(matrix, dtype=float)
    header = f"fieldsep-matrix v1 kind={label} rows={matrix.shape[0]} cols={matrix.shape[1]}"
    np.savetxt(Path(path), matrix, fmt=_FLOAT_FMT, delimiter=",", header=header)


def load_matrix(path) -> np.ndarray:
    return np.loadtxt(Path(path), delimiter=",", comments="#", ndmin=2)


_TRACE_COLUMNS = "iteration,rms_deviation,sampled_kl,sample_count,cg_iterations,wall_ms"


def save_trace(path, trace: Trace) -> None:
    with open(Path(path), "w") as handle:
        handle.write(_TRACE_COLUMNS + "\n")
        for i in range(len(trace)):
            handle.write(
                f"{trace.iterations[i]},{trace.rms_deviations[i]:.17g},"
                f"{trace.sampled_kls[i]:.17g},{trace.sample_counts[i]},"
                f"{trace.cg_iterations[i]},{trace.wall_ms[i]:.3f}\n"
            )


def load_trace(path) -> Trace:
    rows = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    trace = Trace()
    for row in rows:
        trace.append(int(row[0]), row[1], row[2], int(row[3]), int(row[4]), row[5])
    return trace


def _channel_table(values: np.ndarray, n_channels: int) -> np.ndarray:
    return values.reshape(n_channels, -1).T


def save_scenario(directory, scenario: Scenario) -> None:
    """Write a scenario bundle: data per channel, mask, variances, truth, metadata."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grid = scenario.grid
    spec = scenario.spec

    meta = {
        "format": "fieldsep-scenario v1",
        "seed": spec.seed,
        "grid": {"shape": list(grid.shape), "lengths": list(grid.lengths)},
        "n_channels": spec.n_channels,
        "n_components": spec.n_components,
        "spectrum": {
            "family": "inverse-quadratic",
            "coefficient": spec.spectrum_coefficient,
        },
        "noise_variance": spec.noise_variance,
        "noise_factor_range": list(spec.noise_factor_range)
        if spec.noise_factor_range
        else None,
        "noise_factors": [float(x) for x in scenario.noise_factors],
        "mask_fraction": spec.mask_fraction,
        "mask_block_length": spec.mask_block_length,
    }
    with open(directory / "meta.json", "w") as handle:
        json.dump(meta, handle, indent=2)
        handle.write("\n")

    save_multifield(directory / "components_true.csv", scenario.components_true, "truth")
    save_matrix(directory / "mixture_true.csv", scenario.mixture_true.matrix, "mixture")
    header = _grid_header(grid)
    np.savetxt(
        directory / "mask.csv",
        _channel_table(scenario.response.mask, spec.n_channels),
        fmt="%d",
        delimiter=",",
        header=f"fieldsep-mask v1\n{header} channels={spec.n_channels}",
    )
    np.savetxt(
        directory / "noise_variance.csv",
        _channel_table(scenario.noise.variance, spec.n_channels),
        fmt=_FLOAT_FMT,
        delimiter=",",
        header=f"fieldsep-variance v1\n{header} channels={spec.n_channels}",
    )
    for i in range(spec.n_channels):
        np.savetxt(
            directory / f"data_ch{i}.csv",
            scenario.data.values[i].reshape(-1, 1),
            fmt=_FLOAT_FMT,
            delimiter=",",
            header=f"fieldsep-data v1 channel={i}\n{header}",
        )


def load_scenario(directory) -> Scenario:
    directory = Path(directory)
    with open(directory / "meta.json") as handle:
        meta = json.load(handle)
    grid = Grid(tuple(meta["grid"]["shape"]), tuple(meta["grid"]["lengths"]))
    if grid.dim != 1:
        raise ValueError("scenario bundles are defined on 1-d grids")
    factor_range = meta.get("noise_factor_range")
    spec = ScenarioSpec(
        n_pixels=grid.shape[0],
        length=grid.lengths[0],
        n_channels=meta["n_channels"],
        n_components=meta["n_components"],
        spectrum_coefficient=meta["spectrum"]["coefficient"],
        noise_variance=meta["noise_variance"],
        noise_factor_range=tuple(factor_range) if factor_range else None,
        mask_fraction=meta["mask_fraction"],
        mask_block_length=meta["mask_block_length"],
        seed=meta["seed"],
    )
    components = load_multifield(directory / "components_true.csv")
    mixture = MixtureMatrix(load_matrix(directory / "mixture_true.csv"))
    mask = np.loadtxt(directory / "mask.csv", delimiter=",", comments="#", ndmin=2)
    variance = np.loadtxt(
        directory / "noise_variance.csv", delimiter=",", comments="#", ndmin=2
    )
    n_channels = spec.n_channels
    response = Response(grid, mask.T.reshape((n_channels,) + grid.shape))
    noise = NoiseCovariance(grid, variance.T.reshape((n_channels,) + grid.shape))
    data_values = np.stack(
        [
            np.loadtxt(directory / f"data_ch{i}.csv", delimiter=",", comments="#").reshape(
                grid.shape
            )
            for i in range(n_channels)
        ]
    )
    data = DataSet(grid, data_values)
    factors = np.asarray(meta["noise_factors"], dtype=float)
    return Scenario(spec, grid, components, mixture, response, noise, data, factors)
