"""Command-line interface.

Subcommands::

    fockcert herald               model state and success probability at one point
    fockcert oracle-check         closed form against the Kraus-operator reference
    fockcert mc                   Monte Carlo campaign and certification at one point
    fockcert sweep                loss-plane tile map, feasibility contour and figures
    fockcert thresholds-validate  check threshold-curve files

Losses are given as ``1 - transmittance``. Exit codes: 2 invalid parameters,
3 degenerate herald, 4 oracle tolerance or truncation failure, 5 too few
samples, 6 missing or invalid threshold file.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .certify import certify, load_threshold_curve, load_threshold_set
from .detectors import DetectorModel, cap_weight, herald_probability, herald_state
from .exceptions import (
    DegenerateHeraldError,
    DomainError,
    InsufficientSamplesError,
    ThresholdCurveError,
    TruncationError,
)
from .fock import ExperimentParams, SqueezeParam, db_to_rate
from .montecarlo import CampaignConfig, per_run_samples, simulate_ensemble
from .oracle import DEFAULT_ORACLE_CUTOFF, oracle_heralded, oracle_povm_heralded

EXIT_INVALID = 2
EXIT_DEGENERATE = 3
EXIT_ORACLE = 4
EXIT_SAMPLES = 5
EXIT_THRESHOLDS = 6

ORACLE_DIAG_TOL = 1e-10
ORACLE_PROB_TOL = 1e-12

PROFILES = {
    "full": {"repetitions": 10**8, "runs": 1000},
    "fast": {"repetitions": 10**6, "runs": 100},
}

SWEEP_DEFAULTS = {
    "m": 3,
    "detector": "pnr",
    "n": None,
    "loss1": "0:0.4:0.05",
    "loss2": "0:0.4:0.05",
    "db_step": 0.25,
    "db_max": 10.0,
    "profile": "fast",
    "repetitions": None,
    "runs": None,
    "seed": 0,
    "sample_cutoff": 20,
    "workers": 1,
}

ORACLE_GRID = {
    "lambda2": (0.1, 0.3, 0.5),
    "zeta1": (0.6, 0.8, 1.0),
    "zeta2": (0.6, 0.8, 1.0),
    "m": (0, 1, 2, 3, 4, 5),
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- parameter plumbing ------------------------------------------------------


def _squeeze_from_args(args) -> SqueezeParam:
    if args.db is not None and args.lambda2 is not None:
        raise DomainError("give either --db or --lambda2, not both")
    if args.lambda2 is not None:
        return SqueezeParam.from_lambda2(args.lambda2)
    if args.db is not None:
        return db_to_rate(args.db)
    raise DomainError("squeezing is required: --db or --lambda2")


def _detector_from_args(args) -> DetectorModel:
    if args.detector == "cap":
        return DetectorModel.cap(args.n if args.n is not None else -1)
    if args.n is not None:
        raise DomainError("--n only applies to --detector cap")
    return DetectorModel()


def _params_from_args(args) -> ExperimentParams:
    if args.m is None:
        raise DomainError("--m is required")
    return ExperimentParams.from_losses(_squeeze_from_args(args), args.loss1, args.loss2, args.m)


def _point_config(args, params: ExperimentParams, det: DetectorModel) -> dict:
    return {
        "m": params.m,
        "db": params.squeeze.db,
        "r": params.squeeze.r,
        "lambda2": params.lambda2,
        "loss1": args.loss1,
        "loss2": args.loss2,
        **det.to_dict(),
    }


def _manifest(command: str, config: dict, seed=None) -> dict:
    return {"command": command, "config": config, "seed": seed, "version": __version__}


def _emit(report: dict, as_json: bool, text: str) -> None:
    if as_json:
        sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)


def _fmt_probs(probs) -> str:
    return "\n".join(f"  {k:3d}  {p:.12e}" for k, p in enumerate(probs))


# -- herald ------------------------------------------------------------------


def cmd_herald(args) -> int:
    params = _params_from_args(args)
    det = _detector_from_args(args)
    det.check_outcome(params.m)
    prob = herald_probability(params, det)
    state = herald_state(params, det, args.cutoff)
    x, y = state.witness(params.m)
    report = {
        "manifest": _manifest("herald", {**_point_config(args, params, det), "cutoff": args.cutoff}),
        "success_probability": prob,
        "diagonals": state.probs.tolist(),
        "tail_mass": state.tail_mass,
        "fidelity": state.fidelity(params.m),
        "witness": {"x": x, "y": y},
    }
    text = (
        f"detector            {det.label()}\n"
        f"m                   {params.m}\n"
        f"squeezing           {params.squeeze.db:.6g} dB (r={params.squeeze.r:.9g}, lambda^2={params.lambda2:.9g})\n"
        f"loss1, loss2        {args.loss1:.6g}, {args.loss2:.6g}\n"
        f"success probability {prob:.12e}\n"
        f"fidelity <m|rho|m>  {state.fidelity(params.m):.12f}\n"
        f"witness (x, y)      ({x:.12f}, {y:.12f})\n"
        f"tail mass (k>={args.cutoff}) {state.tail_mass:.3e}\n"
        f"diagonals:\n{_fmt_probs(state.probs)}\n"
    )
    _emit(report, args.json, text)
    return 0


# -- oracle-check ------------------------------------------------------------


def _oracle_compare(params: ExperimentParams, det: DetectorModel, cutoff: int, oracle_cutoff: int) -> dict:
    if det.is_cap:
        prob_o, state_o = oracle_povm_heralded(
            params, lambda a: cap_weight(a, params.m, det.n), oracle_cutoff
        )
    else:
        prob_o, state_o = oracle_heralded(params, oracle_cutoff)
    prob = herald_probability(params, det)
    state = herald_state(params, det, cutoff)
    width = min(cutoff, state_o.cutoff)
    diag_dev = float(np.max(np.abs(state.probs[:width] - state_o.probs[:width])))
    return {
        "lambda2": params.lambda2,
        "zeta1": params.zeta1,
        "zeta2": params.zeta2,
        "m": params.m,
        "probability_deviation": abs(prob - prob_o),
        "diagonal_deviation": diag_dev,
    }


def cmd_oracle_check(args) -> int:
    det = _detector_from_args(args)
    single = args.m is not None or args.db is not None or args.lambda2 is not None
    if single:
        points = [_params_from_args(args)]
    else:
        points = [
            ExperimentParams(SqueezeParam.from_lambda2(l2), z1, z2, m)
            for l2 in ORACLE_GRID["lambda2"]
            for z1 in ORACLE_GRID["zeta1"]
            for z2 in ORACLE_GRID["zeta2"]
            for m in ORACLE_GRID["m"]
        ]
    rows = []
    for params in points:
        det.check_outcome(params.m)
        try:
            rows.append(_oracle_compare(params, det, args.cutoff, args.oracle_cutoff))
        except TruncationError as exc:
            raise CliError(EXIT_ORACLE, f"truncation insufficient: {exc}") from exc
    max_prob = max(r["probability_deviation"] for r in rows)
    max_diag = max(r["diagonal_deviation"] for r in rows)
    ok = max_diag <= ORACLE_DIAG_TOL and max_prob <= ORACLE_PROB_TOL
    config = {"detector": det.to_dict(), "cutoff": args.cutoff, "oracle_cutoff": args.oracle_cutoff}
    report = {
        "manifest": _manifest("oracle-check", config),
        "points": len(rows),
        "max_probability_deviation": max_prob,
        "max_diagonal_deviation": max_diag,
        "tolerances": {"probability": ORACLE_PROB_TOL, "diagonal": ORACLE_DIAG_TOL},
        "pass": ok,
        "rows": rows if single or args.json else [],
    }
    text = (
        f"points checked            {len(rows)}\n"
        f"max |P - P_oracle|        {max_prob:.3e}  (tol {ORACLE_PROB_TOL:.0e})\n"
        f"max |rho_kk - oracle_kk|  {max_diag:.3e}  (tol {ORACLE_DIAG_TOL:.0e})\n"
        f"result                    {'PASS' if ok else 'FAIL'}\n"
    )
    _emit(report, args.json, text)
    return 0 if ok else EXIT_ORACLE


# -- mc ----------------------------------------------------------------------


def _campaign_from_args(args) -> CampaignConfig:
    profile = PROFILES[args.profile]
    return CampaignConfig(
        repetitions=args.repetitions if args.repetitions is not None else profile["repetitions"],
        runs=args.runs if args.runs is not None else profile["runs"],
        sample_cutoff=args.cutoff,
        seed=args.seed,
    )


def _load_curve(thresholds, m: int):
    if thresholds is None:
        raise CliError(EXIT_THRESHOLDS, "a threshold directory is required (--thresholds)")
    try:
        return load_threshold_set(thresholds, orders=(m,), required=(m,))[m]
    except ThresholdCurveError as exc:
        raise CliError(EXIT_THRESHOLDS, str(exc)) from exc


def cmd_mc(args) -> int:
    params = _params_from_args(args)
    det = _detector_from_args(args)
    det.check_outcome(params.m)
    campaign = _campaign_from_args(args)
    started = time.perf_counter()
    try:
        per_run_samples(params, det, campaign)
    except InsufficientSamplesError as exc:
        raise CliError(EXIT_SAMPLES, f"insufficient samples: {exc}") from exc
    curve = _load_curve(args.thresholds, params.m)
    stats = simulate_ensemble(params, det, campaign)
    verdict = certify(stats, curve)
    config = {**_point_config(args, params, det), **campaign.to_dict(), "thresholds": str(args.thresholds)}
    report = {
        "manifest": _manifest("mc", config, seed=campaign.seed),
        "success_probability": herald_probability(params, det),
        "stats": stats.to_dict(),
        "verdict": verdict.to_dict(),
    }
    text = (
        f"m={stats.m}  runs={stats.runs}  samples/run={stats.n_samples}  seed={campaign.seed}\n"
        f"x_m  mean {stats.mean_x:.9f}  sd {stats.sd_x:.3e}\n"
        f"y_m  mean {stats.mean_y:.9f}  sd {stats.sd_y:.3e}\n"
        f"box bottom {verdict.box_bottom:.9f}  curve max {verdict.curve_max:.9f}  margin {verdict.margin_y:+.3e}\n"
        f"verdict    {'PASS' if verdict.passed else 'FAIL'} ({verdict.curve_id})\n"
    )
    _emit(report, args.json, text)
    if args.out is not None:
        from .plotting import render_certification

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "mc.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        render_certification(verdict, curve, out / "certification.svg")
        _write_manifest(out, report["manifest"], ["mc.json", "certification.svg"], started, "complete")
    return 0


# -- sweep -------------------------------------------------------------------


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` grammar; ``#`` starts a comment, blank lines are ignored."""
    config = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in SWEEP_DEFAULTS and key != "thresholds":
            raise DomainError(f"config line {lineno}: unknown key {key!r}")
        config[key] = value.strip('"').strip("'")
    return config


def parse_values(spec) -> tuple[float, ...]:
    """``"a:b:step"`` (inclusive range) or a comma-separated list."""
    if isinstance(spec, (list, tuple)):
        return tuple(float(v) for v in spec)
    spec = str(spec).strip()
    if ":" in spec:
        start, stop, step = (float(v) for v in spec.split(":"))
        if step <= 0:
            raise DomainError(f"range step must be positive in {spec!r}")
        count = int(round((stop - start) / step))
        return tuple(round(start + i * step, 12) for i in range(count + 1))
    return tuple(float(v) for v in spec.split(",") if v.strip())


def _coerce(config: dict) -> dict:
    out = dict(config)
    for key in ("m", "seed", "sample_cutoff", "workers"):
        out[key] = int(out[key])
    for key in ("repetitions", "runs", "n"):
        if out.get(key) not in (None, "", "None"):
            out[key] = int(float(out[key]))
        else:
            out[key] = None
    for key in ("db_step", "db_max"):
        out[key] = float(out[key])
    out["loss1"] = list(parse_values(out["loss1"]))
    out["loss2"] = list(parse_values(out["loss2"]))
    if out["profile"] not in PROFILES:
        raise DomainError(f"unknown profile {out['profile']!r}")
    profile = PROFILES[out["profile"]]
    if out["repetitions"] is None:
        out["repetitions"] = profile["repetitions"]
    if out["runs"] is None:
        out["runs"] = profile["runs"]
    return out


def resolve_sweep_config(args) -> dict:
    if args.from_manifest is not None:
        manifest = json.loads(Path(args.from_manifest).read_text())
        config = dict(manifest["config"])
    else:
        config = dict(SWEEP_DEFAULTS)
        if args.config is not None:
            config.update(parse_config_text(Path(args.config).read_text()))
    overrides = {
        "m": args.m,
        "detector": args.detector,
        "n": args.n,
        "loss1": args.loss1_values,
        "loss2": args.loss2_values,
        "db_step": args.db_step,
        "profile": args.profile,
        "repetitions": args.repetitions,
        "runs": args.runs,
        "seed": args.seed,
        "workers": args.workers,
        "thresholds": args.thresholds,
    }
    if args.profile is not None and args.repetitions is None:
        config["repetitions"] = None
    if args.profile is not None and args.runs is None:
        config["runs"] = None
    for key, value in overrides.items():
        if value is not None:
            config[key] = value
    if config.get("detector") == "pnr":
        config["n"] = None
    resolved = _coerce(config)
    if resolved.get("thresholds") is None:
        raise CliError(EXIT_THRESHOLDS, "a threshold directory is required (--thresholds or config key)")
    resolved["thresholds"] = str(resolved["thresholds"])
    return resolved


def _write_manifest(out: Path, manifest: dict, outputs: list[str], started: float, status: str, error: str | None = None) -> None:
    body = {
        **manifest,
        "outputs": outputs,
        "status": status,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    if error is not None:
        body["error"] = error
    (out / "manifest.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def cmd_sweep(args) -> int:
    from .plotting import render_contours, render_tile_heatmap
    from .sweep import SweepGrid, contour_to_csv, default_db_grid, extract_thresholds, run_sweep, tiles_to_csv

    started = time.perf_counter()
    config = resolve_sweep_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest("sweep", config, seed=config["seed"])
    _write_manifest(out, manifest, [], started, "running")
    written: list[str] = []
    try:
        det = DetectorModel("cap", config["n"]) if config["detector"] == "cap" else DetectorModel()
        curve = _load_curve(config["thresholds"], config["m"])
        campaign = CampaignConfig(
            repetitions=config["repetitions"],
            runs=config["runs"],
            sample_cutoff=config["sample_cutoff"],
            seed=config["seed"],
        )
        grid = SweepGrid(
            loss1_values=tuple(config["loss1"]),
            loss2_values=tuple(config["loss2"]),
            db_grid=default_db_grid(config["db_step"], config["db_max"]),
            m=config["m"],
            detector=det,
            campaign=campaign,
        )
        tile_map = run_sweep(grid, curve, workers=config["workers"])
        contour = extract_thresholds(tile_map, m=config["m"], detector=det)
        (out / "tiles.csv").write_text(tiles_to_csv(tile_map))
        (out / "contour.csv").write_text(contour_to_csv(contour))
        written += ["tiles.csv", "contour.csv"]
        title = f"m={config['m']}, {det.label().upper()}"
        render_tile_heatmap(tile_map, "best_probability", out / "heatmap_probability.svg", title)
        render_tile_heatmap(tile_map, "fidelity", out / "heatmap_fidelity.svg", title)
        render_contours([contour], out / "contour.svg", title)
        written += ["heatmap_probability.svg", "heatmap_fidelity.svg", "contour.svg"]
    except Exception as exc:
        _write_manifest(out, manifest, written, started, "failed", error=str(exc))
        raise
    manifest["flagged_monotonicity"] = [list(c) for c in tile_map.flagged]
    manifest["increasing_contour_steps"] = contour.increasing_steps()
    _write_manifest(out, manifest, written, started, "complete")
    counts = {}
    for tile in tile_map:
        counts[tile.status] = counts.get(tile.status, 0) + 1
    summary = {
        "manifest": manifest,
        "tiles": counts,
        "contour": [[a, b] for a, b in contour.boundary],
        "out": str(out),
    }
    text = (
        f"tiles      {sum(counts.values())}  "
        + "  ".join(f"{k}={v}" for k, v in sorted(counts.items()))
        + f"\nflagged    {len(tile_map.flagged)} monotonicity exception(s)\n"
        + "contour    "
        + ", ".join(f"{a:g}:{'-' if b is None else f'{b:g}'}" for a, b in contour.boundary)
        + f"\nwritten to {out}\n"
    )
    _emit(summary, args.json, text)
    return 0


# -- thresholds-validate -----------------------------------------------------


def cmd_thresholds_validate(args) -> int:
    paths = [Path(p) for p in args.files]
    if args.thresholds is not None:
        if args.thresholds == "synthetic":
            from .certify import synthetic_threshold_dir

            directory = synthetic_threshold_dir()
        else:
            directory = Path(args.thresholds)
        if not directory.is_dir():
            raise CliError(EXIT_THRESHOLDS, f"threshold directory {directory} does not exist")
        paths += sorted(directory.glob("f*.csv"))
    if not paths:
        raise CliError(EXIT_THRESHOLDS, "no threshold files given")
    results = []
    ok = True
    for path in paths:
        try:
            curve = load_threshold_curve(path)
            results.append({
                "file": str(path),
                "valid": True,
                "m": curve.m,
                "samples": int(curve.xs.size),
                "direction": "increasing" if curve.direction > 0 else "decreasing",
            })
        except ThresholdCurveError as exc:
            ok = False
            results.append({"file": str(path), "valid": False, "error": str(exc)})
    text = "".join(
        f"{r['file']}: ok (m={r['m']}, {r['samples']} samples, {r['direction']})\n"
        if r["valid"]
        else f"{r['file']}: INVALID: {r['error']}\n"
        for r in results
    )
    _emit({"manifest": _manifest("thresholds-validate", {"files": [str(p) for p in paths]}), "files": results, "pass": ok}, args.json, text)
    return 0 if ok else EXIT_THRESHOLDS


# -- parser ------------------------------------------------------------------


def _add_point_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--m", type=int, help="herald outcome (photons or clicks)")
    sq = p.add_mutually_exclusive_group()
    sq.add_argument("--db", type=float, help="two-mode squeezing in dB")
    sq.add_argument("--lambda2", type=float, help="squeezing as lambda^2 = tanh(r)^2")
    p.add_argument("--loss1", type=float, default=0.0, help="heralding-mode loss 1 - zeta1")
    p.add_argument("--loss2", type=float, default=0.0, help="signal-mode loss 1 - zeta2")
    _add_detector_args(p)


def _add_detector_args(p: argparse.ArgumentParser, default: str | None = "pnr") -> None:
    p.add_argument("--detector", choices=("pnr", "cap"), default=default)
    p.add_argument("--n", type=int, help="diodes in a cascaded detector")


def _add_campaign_args(p: argparse.ArgumentParser, profile_default: str | None) -> None:
    p.add_argument("--repetitions", type=int, help="shot budget per run (default from profile)")
    p.add_argument("--runs", type=int, help="ensemble size (default from profile)")
    p.add_argument("--seed", type=int, default=None if profile_default is None else 0)
    p.add_argument("--profile", choices=tuple(PROFILES), default=profile_default)
    p.add_argument("--thresholds", help="directory holding f3.csv, f4.csv, f5.csv, or 'synthetic'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fockcert", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("herald", help="heralded state and success probability")
    _add_point_args(p)
    p.add_argument("--cutoff", type=int, default=25, help="number of Fock diagonals reported")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_herald)

    p = sub.add_parser("oracle-check", help="compare closed form against the Kraus reference")
    _add_point_args(p)
    p.add_argument("--cutoff", type=int, default=25)
    p.add_argument("--oracle-cutoff", type=int, default=DEFAULT_ORACLE_CUTOFF)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("mc", help="Monte Carlo campaign and certification at one point")
    _add_point_args(p)
    _add_campaign_args(p, profile_default="full")
    p.add_argument("--cutoff", type=int, default=20, help="histogram bins below the overflow bin")
    p.add_argument("--out", help="also write the report, figure and manifest here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("sweep", help="loss-plane sweep with figures")
    p.add_argument("--config", help="flat key = value grid file")
    p.add_argument("--from-manifest", help="rerun the configuration recorded in a manifest.json")
    p.add_argument("--m", type=int)
    _add_detector_args(p, default=None)
    p.add_argument("--loss1-values", help="heralding losses: 'a:b:step' or comma list")
    p.add_argument("--loss2-values", help="characterization losses: 'a:b:step' or comma list")
    p.add_argument("--db-step", type=float)
    _add_campaign_args(p, profile_default=None)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("thresholds-validate", help="validate threshold curve files")
    p.add_argument("files", nargs="*")
    p.add_argument("--thresholds", help="directory of f<m>.csv files, or 'synthetic'")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_thresholds_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DegenerateHeraldError as exc:
        print(f"error: degenerate herald: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except InsufficientSamplesError as exc:
        print(f"error: insufficient samples: {exc}", file=sys.stderr)
        return EXIT_SAMPLES
    except ThresholdCurveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_THRESHOLDS
    except TruncationError as exc:
        print(f"error: truncation insufficient: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (DomainError, ValueError) as exc:
        print(f"error: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
