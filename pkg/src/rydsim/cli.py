"""Command-line front end.

Subcommands: ``cz-solve``, ``simulate``, ``estimate``, ``blockade-fit`` and
``magic-check``. Exit codes: 0 on success, 1 on a computational failure
(non-convergence, failed or ill-conditioned fit), 2 on a usage, config or
input-data error. Set ``RYDSIM_LOG`` (e.g. ``INFO`` or ``DEBUG``) for
diagnostics on stderr.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import physics
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, config_from_dict, load_config
from .errors import ConvergenceError, FitError, InvalidParameterError
from .experiments import run_experiment
from .gates import solve_cz_parameters
from .shots import aggregate_pairs, estimate_from_splits, read_shot_records

log = logging.getLogger("rydsim")
TWO_PI = 2 * math.pi


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if hasattr(obj, "item"):  # numpy scalar
        return _clean(obj.item())
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else str(obj)
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def table_text(columns, rows, fmt: str) -> str:
    if fmt == "json":
        return dumps([dict(zip(columns, r)) for r in rows])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _flatten(prefix: str, obj, out: list) -> None:
    if isinstance(obj, dict):
        if set(obj) == {"value", "sigma"}:
            out.append((prefix, obj["value"], obj["sigma"]))
            return
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], out)
    elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
        out.append((prefix, obj, ""))


def emit(report: dict, args, stem: str, table=None) -> None:
    """Write ``report`` (and an optional ``(columns, rows)`` table).

    Without ``--out`` the JSON report goes to stdout, or with ``--format csv``
    the table (a flattened report when there is none). With ``--out DIR`` the
    table is written to ``DIR/<stem>.<format>`` and the report to
    ``DIR/<stem>_summary.json``.
    """
    fmt = args.format or "csv"
    if args.out is None:
        if args.format != "csv":
            sys.stdout.write(dumps(report))
        elif table is not None:
            sys.stdout.write(table_text(*table, "csv"))
        else:
            rows: list = []
            _flatten("", _clean(report), rows)
            sys.stdout.write(table_text(("quantity", "value", "sigma"), rows, "csv"))
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if table is not None:
        (out / f"{stem}.{fmt}").write_text(table_text(*table, fmt))
    (out / f"{stem}_summary.json").write_text(dumps(report))
    log.info("wrote results to %s", out)


def _load_cfg(args, experiment: Optional[str] = None) -> Optional[ExperimentConfig]:
    if args.config is None:
        return None
    return load_config(args.config, experiment)


# -- subcommands -----------------------------------------------------------


def cmd_cz_solve(args) -> int:
    cfg = _load_cfg(args, "cz-solve")
    tol = args.tol if args.tol is not None else float(cfg.option("tol", 1e-6) if cfg else 1e-6)
    args.tol = tol
    try:
        params = solve_cz_parameters(tol)
    except ConvergenceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        emit({"converged": False, "tol": args.tol, "residual": exc.residual}, args, "cz_params")
        return 1
    report = {
        "converged": True,
        "tol": args.tol,
        "residual": params.residual,
        "delta_over_omega": params.delta_over_omega,
        "xi": params.xi,
        "tau_omega": params.tau_omega,
        "phi01": params.phi01,
        "phi11": params.phi11,
        "phase_identity_error": params.phase_identity_error(),
    }
    emit(report, args, "cz_params")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_cfg(args, args.experiment)
    if cfg is None:
        if args.experiment is None:
            raise ConfigError("simulate needs --config or --experiment")
        cfg = config_from_dict({"experiment": args.experiment})
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out is None and cfg.output_dir is not None:
        args.out = cfg.output_dir
    if args.out is not None and args.format is None:
        args.format = cfg.output_format
    log.info("running %s (seed %s)", cfg.experiment, cfg.seed)
    result = run_experiment(cfg)
    emit(result.summary, args, cfg.experiment.replace("-", "_"), (result.columns, result.rows))
    return 0


def cmd_estimate(args) -> int:
    cfg = _load_cfg(args, "estimate")
    opts = cfg.options if cfg is not None else {}

    def pick(name, default=None):
        value = getattr(args, name)
        return opts.get(name, default) if value is None else value

    shots = pick("shots")
    if shots is None:
        raise ConfigError("estimate needs --shots PATH (or options.shots in the config)")
    mode = pick("mode", "bell")
    loss = pick("loss")
    loss = None if loss is None else (float(loss), float(pick("loss_sigma", 0.0)))
    contrast = pick("contrast")
    contrast = None if contrast is None else (float(contrast), float(pick("contrast_sigma", 0.0)))
    seed = args.seed if args.seed is not None else (cfg.seed if cfg is not None else None)
    bootstrap = int(pick("bootstrap", 0))
    if bootstrap and seed is None:
        raise ConfigError("bootstrap resampling needs --seed")
    try:
        records = read_shot_records(shots)
    except OSError as exc:
        raise ConfigError(f"cannot read shot file {shots}: {exc.strerror}") from exc
    splits = aggregate_pairs(records)
    report = estimate_from_splits(splits, mode, contrast, loss, pick("bdd_upper"), bootstrap, seed)
    emit(report, args, f"estimate_{mode}")
    return 0


def read_blockade_csv(path) -> list[tuple[float, float, float]]:
    """Rows ``(spacing_um, freq_mhz, sigma_mhz)`` from a CSV with that header."""
    need = ("spacing_um", "freq_mhz", "sigma_mhz")
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            fieldnames = reader.fieldnames or []
            raw = list(reader)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    missing = [c for c in need if c not in fieldnames]
    if missing:
        raise ConfigError(f"{path}: missing columns {', '.join(missing)}")
    try:
        return [tuple(float(row[c]) for c in need) for row in raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def cmd_blockade_fit(args) -> int:
    cfg = _load_cfg(args, "blockade-fit")
    rabi_mhz = args.rabi_mhz
    if rabi_mhz is None:
        rabi_mhz = cfg.constants.rabi_mhz if cfg is not None else 0.63
    rows = read_blockade_csv(args.data)
    if len(rows) < 4:
        raise ConfigError(f"blockade fit needs at least 4 rows, got {len(rows)}")
    omega = TWO_PI * 1e6 * rabi_mhz
    data = physics.BlockadeDataset(
        tuple(r[0] for r in rows),
        tuple(TWO_PI * 1e6 * r[1] for r in rows),
        tuple(TWO_PI * 1e6 * r[2] for r in rows),
        omega,
    )
    fit = physics.fit_blockade_radius(data, args.magnification)
    report = fit.to_dict()
    report["c6_unit"] = "THz um^6"
    emit(report, args, "blockade_fit")
    return 0


def cmd_magic_check(args) -> int:
    pair = physics.LightShiftPair(args.du0, args.du1, args.ground)
    res = physics.hyperfine_shift_projection(pair)
    scale = max(abs(args.du0), abs(args.du1), 1e-300)
    report = {
        "inputs": {"dU0": args.du0, "dU1": args.du1, "ground": args.ground},
        "shift_m_half": res.shift_half,
        "shift_m_three_half": res.shift_three_half,
        "differential_m_half": res.diff_half,
        "differential_m_three_half": res.diff_three_half,
        "magic_residual": res.magic_residual,
        "ratio_dU0_dU1": args.du0 / args.du1 if args.du1 else None,
        "is_magic": abs(res.magic_residual) <= args.tol * scale,
    }
    emit(report, args, "magic_check")
    return 0


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment configuration")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    common.add_argument("--out", metavar="DIR", help="write result files into DIR instead of stdout")
    common.add_argument("--format", choices=("csv", "json"),
                        help="table format (default csv); on stdout, csv prints the table instead of the JSON report")

    parser = argparse.ArgumentParser(prog="rydsim", description="Rydberg-blockade gate simulator and estimators")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cz-solve", parents=[common], help="solve the CZ pulse parameters")
    p.add_argument("--tol", type=float, help="residual tolerance in (0, 1e-3] (default 1e-6)")
    p.set_defaults(func=cmd_cz_solve)

    p = sub.add_parser("simulate", parents=[common], help="run a simulated experiment")
    p.add_argument("--experiment", choices=EXPERIMENTS, help="experiment name (overrides the config)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="fidelity estimate from a shot-record CSV")
    p.add_argument("--shots", metavar="PATH", help="shot-record CSV")
    p.add_argument("--mode", choices=("bell", "suppressed"))
    p.add_argument("--loss", type=float, help="per-atom loss probability for the SPAM correction")
    p.add_argument("--loss-sigma", dest="loss_sigma", type=float)
    p.add_argument("--contrast", type=float, help="parity contrast, if not measured in the shot file")
    p.add_argument("--contrast-sigma", dest="contrast_sigma", type=float)
    p.add_argument("--bdd-upper", dest="bdd_upper", type=float,
                   help="treat B_dd as unknown in [0, BDD_UPPER]")
    p.add_argument("--bootstrap", type=int, nargs="?", const=1000, metavar="N",
                   help="bootstrap the uncertainties with N resamples (default 1000 when given; needs --seed)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("blockade-fit", parents=[common], help="fit C6 and the blockade radius")
    p.add_argument("--data", required=True, metavar="PATH", help="CSV with spacing_um, freq_mhz, sigma_mhz")
    p.add_argument("--rabi-mhz", dest="rabi_mhz", type=float, help="single-atom Rabi frequency (default 0.63)")
    p.add_argument("--magnification", type=float, default=0.1, help="fractional spacing-scale uncertainty")
    p.set_defaults(func=cmd_blockade_fit)

    p = sub.add_parser("magic-check", parents=[common], help="hyperfine light-shift projection")
    p.add_argument("--du0", type=float, required=True, help="differential shift of the pi transition")
    p.add_argument("--du1", type=float, required=True, help="differential shift of the sigma transition")
    p.add_argument("--ground", type=float, default=0.0, help="ground-state shift (same unit)")
    p.add_argument("--tol", type=float, default=1e-9, help="relative tolerance for the magic verdict")
    p.set_defaults(func=cmd_magic_check)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("RYDSIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, InvalidParameterError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (ConvergenceError, FitError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
