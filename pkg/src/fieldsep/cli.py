"""Command-line interface.

Subcommands
-----------
``generate``   write a synthetic scenario bundle to a directory.
``infer-kl``   run the sample-averaged inference loop on a bundle.
``infer-map``  run the maximum-a-posteriori variant.
``evaluate``   compare a result directory against its scenario and render
               the report (JSON + CSV + figures).

Relative output directories are created under ``$FIELDSEP_OUTPUT_ROOT``
when that variable is set.  Exit status is zero only if every requested
artifact was written.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .inference import Schedule, run_inference, run_map
from .mixture import align_to_reference
from .wiener import posterior_variance
from . import io as fio
from .synth import ScenarioSpec, generate_scenario, scenario1_spec, scenario2_spec

logger = logging.getLogger("fieldsep")

_OUTPUT_ROOT_VAR = "FIELDSEP_OUTPUT_ROOT"


def _resolve_out(raw: str) -> Path:
    path = Path(raw)
    root = os.environ.get(_OUTPUT_ROOT_VAR)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _add_generate(sub):
    p = sub.add_parser("generate", help="write a synthetic scenario bundle")
    p.add_argument("--preset", choices=["scenario1", "scenario2"], default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--pixels", type=int, default=None)
    p.add_argument("--channels", type=int, default=None)
    p.add_argument("--components", type=int, default=None)
    p.add_argument("--noise-variance", type=float, default=None)
    p.add_argument("--mask-fraction", type=float, default=None)
    p.add_argument("--mask-block-length", type=int, default=None)
    p.add_argument("--spectrum-coefficient", type=float, default=None)


def _add_infer(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--samples-final", type=int, default=25)
    p.add_argument("--growth-start", type=float, default=0.6)
    p.add_argument("--cg-tol-early", type=float, default=1e-4)
    p.add_argument("--cg-tol-final", type=float, default=1e-7)
    p.add_argument("--max-cg-iter", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--early-stop", action="store_true")


def _add_evaluate(sub):
    p = sub.add_parser("evaluate", help="score results against their scenario")
    p.add_argument("--results", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldsep",
        description="separate auto-correlated components from noisy multi-channel data",
    )
    parser.add_argument("--version", action="version", version=f"fieldsep {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_infer(sub, "infer-kl", "run the sample-averaged inference loop")
    _add_infer(sub, "infer-map", "run the maximum-a-posteriori loop")
    _add_evaluate(sub)
    return parser


def _cmd_generate(args) -> int:
    if args.preset == "scenario2":
        spec = scenario2_spec(seed=args.seed)
    elif args.preset == "scenario1":
        spec = scenario1_spec(seed=args.seed)
    else:
        spec = ScenarioSpec(seed=args.seed)
    overrides = {}
    for attr, flag in [
        ("n_pixels", "pixels"),
        ("n_channels", "channels"),
        ("n_components", "components"),
        ("noise_variance", "noise_variance"),
        ("mask_fraction", "mask_fraction"),
        ("mask_block_length", "mask_block_length"),
        ("spectrum_coefficient", "spectrum_coefficient"),
    ]:
        value = getattr(args, flag)
        if value is not None:
            overrides[attr] = value
    if overrides:
        spec = replace(spec, **overrides)
    out = _resolve_out(args.out)
    scenario = generate_scenario(spec)
    fio.save_scenario(out, scenario)
    logger.info("scenario written to %s", out)
    print(out)
    return 0


def _run_config(args, mode: str, scenario) -> dict:
    return {
        "mode": mode,
        "version": __version__,
        "seed": args.seed,
        "scenario": str(Path(args.scenario).resolve()),
        "scenario_seed": scenario.spec.seed,
        "iterations": args.iterations,
        "samples_final": args.samples_final,
        "growth_start": args.growth_start,
        "cg_tol_early": args.cg_tol_early,
        "cg_tol_final": args.cg_tol_final,
        "max_cg_iter": args.max_cg_iter,
        "early_stop": bool(args.early_stop),
    }


def _cmd_infer(args, mode: str) -> int:
    scenario = fio.load_scenario(args.scenario)
    out = _resolve_out(args.out)
    schedule = Schedule.default(
        total_iterations=args.iterations,
        final_samples=args.samples_final,
        growth_start=args.growth_start,
        tol_early=args.cg_tol_early,
        tol_final=args.cg_tol_final,
        max_cg_iter=args.max_cg_iter,
        early_stop=args.early_stop,
    )
    config = _run_config(args, mode, scenario)
    runner = run_inference if mode == "kl" else run_map
    try:
        state, trace = runner(
            scenario.data,
            scenario.response,
            scenario.noise,
            scenario.priors,
            scenario.spec.n_components,
            schedule,
            args.seed,
            ground_truth=scenario.components_true,
        )
    except Exception as err:
        config["status"] = "failed"
        config["error"] = str(err)
        _write_json(out / "config.json", config)
        logger.error("inference failed: %s", err)
        return 1

    fio.save_multifield(out / "mean.csv", state.mean, "mean")
    fio.save_matrix(out / "mixture.csv", state.mixture.matrix, "mixture")
    fio.save_trace(out / "trace.csv", trace)
    if state.samples is not None and len(state.samples) >= 2:
        variance = posterior_variance(state.samples, state.mean)
        std = variance.copy()
        std.values[:] = np.sqrt(variance.values)
        fio.save_multifield(out / "sqrt_dxx.csv", std, "posterior-std")
    alignment = align_to_reference(
        state.mixture,
        state.mean,
        mixture_ref=scenario.mixture_true,
        components_ref=scenario.components_true,
    )
    fio.save_multifield(out / "mean_aligned.csv", alignment.mean, "mean-aligned")
    fio.save_matrix(out / "mixture_aligned.csv", alignment.mixture.matrix, "mixture-aligned")
    config["status"] = "ok"
    config["iterations_run"] = state.iteration
    config["alignment"] = {
        "permutation": list(alignment.permutation),
        "signs": [float(s) for s in alignment.signs],
    }
    config["final_rms_deviation"] = alignment.rms_deviation
    _write_json(out / "config.json", config)
    logger.info("results written to %s", out)
    print(out)
    return 0


def _cmd_evaluate(args) -> int:
    from . import plots

    results = Path(args.results)
    scenario = fio.load_scenario(args.scenario)
    out = _resolve_out(args.out) if args.out else results
    mean = fio.load_multifield(results / "mean.csv")
    mixture_est = fio.load_matrix(results / "mixture.csv")

    from .operators import MixtureMatrix

    alignment = align_to_reference(
        MixtureMatrix(mixture_est),
        mean,
        mixture_ref=scenario.mixture_true,
        components_ref=scenario.components_true,
    )
    truth = scenario.components_true
    cols = list(alignment.permutation)

    std_path = results / "sqrt_dxx.csv"
    std_aligned = None
    floor = None
    coverage = None
    if std_path.exists():
        std = fio.load_multifield(std_path)
        std_aligned = std.copy()
        std_aligned.values[:] = std.values[cols]
        floor = float(np.sqrt(np.mean(std_aligned.values**2)))
        coverage = float(
            np.mean(
                np.abs(alignment.mean.values - truth.values) <= std_aligned.values
            )
        )

    trace_path = results / "trace.csv"
    trace = fio.load_trace(trace_path) if trace_path.exists() else None

    report = {
        "results": str(results.resolve()),
        "scenario": str(Path(args.scenario).resolve()),
        "final_rms_deviation": alignment.rms_deviation,
        "first_rms_deviation": trace.rms_deviations[0]
        if trace and len(trace)
        else None,
        "uncertainty_floor": floor,
        "coverage_fraction": coverage,
        "mixture_frobenius_deviation": float(
            np.linalg.norm(alignment.mixture.matrix - scenario.mixture_true.matrix)
        ),
        "alignment": {
            "permutation": cols,
            "signs": [float(s) for s in alignment.signs],
        },
        "iterations": len(trace) if trace else None,
    }
    _write_json(out / "report.json", report)
    keys = [
        "final_rms_deviation",
        "first_rms_deviation",
        "uncertainty_floor",
        "coverage_fraction",
        "mixture_frobenius_deviation",
        "iterations",
    ]
    with open(out / "report.csv", "w") as handle:
        handle.write(",".join(keys) + "\n")
        handle.write(
            ",".join("" if report[k] is None else f"{report[k]}" for k in keys) + "\n"
        )

    if not args.no_figures:
        plots.plot_data(scenario.data, scenario.response, out / "data.png")
        plots.plot_components(
            alignment.mean, truth, std_aligned, out / "components.png"
        )
        plots.plot_mixture(
            alignment.mixture.matrix,
            scenario.mixture_true.matrix,
            out / "mixture.png",
        )
        if trace is not None and len(trace):
            deviations = np.asarray(trace.rms_deviations, dtype=float)
            floors = [("uncertainty floor", floor)] if floor else []
            plots.plot_convergence(
                [("rms deviation", deviations)], floors, out / "convergence.png"
            )
    logger.info("report written to %s", out)
    print(out / "report.json")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    import matplotlib

    matplotlib.use("Agg")
    try:
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "infer-kl":
            return _cmd_infer(args, "kl")
        if args.command == "infer-map":
            return _cmd_infer(args, "map")
        if args.command == "evaluate":
            return _cmd_evaluate(args)
    except Exception as err:  # pragma: no cover - defensive top level
        logger.error("%s", err)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
