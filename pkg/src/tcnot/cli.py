"""Command-line front end: ``run``, ``sweep``, ``fit`` and ``lssa``.

Every option may also come from a flat ``key = value`` file given with
``--config``; command-line flags override the file.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import ExperimentStats, LssaSpec, LSSA_KINDS, binomial_ci, fit_threshold, lssa, run_experiment
from .config import ConfigError, RunConfig, load_config

CSV_COLUMNS = (
    "experiment", "decoder", "d", "p", "r_e", "erasure_kind", "noise_model", "shots",
    "failures_x", "failures_z", "failures_total", "p_l", "ci_low", "ci_high", "seed",
)
EXIT_CONFIG = 2
EXIT_FIT = 3
_KEY_COLUMNS = ("experiment", "decoder", "d", "p", "r_e", "erasure_kind", "noise_model", "shots", "seed")


def point_seed(base: int, d: int, p: float) -> int:
    """Seed of one sweep point, fixed by (base seed, d, p)."""
    ss = np.random.SeedSequence([int(base), int(d), int(round(p * 1e9))])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _row_key(row: dict) -> tuple:
    out = []
    for k in _KEY_COLUMNS:
        v = row[k]
        out.append(float(v) if k in ("p", "r_e") else (int(v) if k in ("d", "shots", "seed") else str(v)))
    return tuple(out)


def read_rows(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def append_result(path: Path, stats: ExperimentStats):
    path.parent.mkdir(parents=True, exist_ok=True)
    new = not path.exists() or path.stat().st_size == 0
    row = stats.row()
    with path.open("a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(CSV_COLUMNS)
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {"version": __version__, "columns": list(CSV_COLUMNS), "rows": []}
    meta["rows"].append(
        {
            "key": [_fmt(row[k]) for k in _KEY_COLUMNS],
            "config": stats.config.as_dict(),
            "observable_failures": stats.observable_failures,
            "low_statistics": stats.low_statistics,
            "wall_time": round(stats.wall_time, 3),
        }
    )
    side.write_text(json.dumps(meta, indent=1))


def _summary(stats: ExperimentStats) -> str:
    c = stats.config
    flag = "  (low statistics)" if stats.low_statistics else ""
    return (
        f"{c.experiment}/{c.decoder} d={c.d} p={c.p:g} shots={stats.shots}: "
        f"p_L={stats.p_l:.4g} [{stats.ci_low:.4g}, {stats.ci_high:.4g}] "
        f"x={stats.failures_x} z={stats.failures_z} total={stats.failures_total}{flag}"
    )


# ---------------------------------------------------------------------------
# argument parsing

_RUN_OPTIONS = {
    "experiment": str, "decoder": str, "d": int, "rounds": int, "p": float, "p_grid": str, "d_list": str,
    "noise_model": str, "r_e": float, "erasure_kind": str, "erasure_qubit": str, "b": int, "shots": int,
    "seed": int, "threads": int, "output": str,
}


def _add_run_options(ap: argparse.ArgumentParser):
    ap.add_argument("--config", help="flat key = value file")
    for k, t in _RUN_OPTIONS.items():
        ap.add_argument("--" + k.replace("_", "-"), dest=k, type=t, default=None)


def _config(args) -> RunConfig:
    overrides = {k: getattr(args, k) for k in _RUN_OPTIONS if getattr(args, k) is not None}
    return load_config(args.config, overrides)


def cmd_run(args) -> int:
    cfg = _config(args)
    stats = run_experiment(cfg)
    append_result(cfg.output_path(), stats)
    print(_summary(stats))
    return 0


def sweep_configs(cfg: RunConfig) -> list[RunConfig]:
    ds = cfg.d_list or (cfg.d,)
    ps = cfg.p_grid or (cfg.p,)
    return [cfg.with_(d=d, p=p, seed=point_seed(cfg.seed, d, p), d_list=(), p_grid=()) for d in ds for p in ps]


def cmd_sweep(args) -> int:
    cfg = _config(args)
    path = cfg.output_path()
    done = {_row_key(r) for r in read_rows(path)}
    todo = sweep_configs(cfg)
    for point in todo:
        key = _row_key({**point.as_dict(), "shots": point.shots, "noise_model": point.noise_model})
        if key in done:
            print(f"skip d={point.d} p={point.p:g} (already in {path})")
            continue
        stats = run_experiment(point)
        append_result(path, stats)
        print(_summary(stats), flush=True)
    return 0


def _observable_counts(path: Path) -> dict:
    side = sidecar_path(path)
    if not side.exists():
        return {}
    meta = json.loads(side.read_text())
    return {tuple(r["key"]): r["observable_failures"] for r in meta["rows"]}


def fit_points(rows, metric: str = "total", observable_counts: Optional[dict] = None, p_min=None, p_max=None):
    """(d, p, rate, sigma) per row for ``metric``: total, x, z or an observable name."""
    out = []
    for r in rows:
        d, p, n = int(r["d"]), float(r["p"]), int(r["shots"])
        if p_min is not None and p < p_min or p_max is not None and p > p_max:
            continue
        if metric == "total":
            rate = float(r["p_l"])
            sigma = (float(r["ci_high"]) - float(r["ci_low"])) / (2 * 1.96)
            if sigma == 0:
                sigma = math.sqrt(max(rate * (1 - rate), 1.0 / n) / n)
        else:
            if metric in ("x", "z"):
                k = int(r["failures_" + metric])
            else:
                key = tuple(_fmt(v) for v in _row_key(r))
                counts = (observable_counts or {}).get(key)
                if counts is None or metric not in counts:
                    raise KeyError(f"no per-observable count {metric!r} for row d={d} p={p}")
                k = int(counts[metric])
            rate, lo, hi = binomial_ci(k, n)
            sigma = math.sqrt(max(rate * (1 - rate), 1.0 / n) / n)
        out.append((d, p, rate, sigma))
    return out


def _filter(rows, args):
    for k in ("experiment", "decoder", "erasure_kind", "noise_model"):
        v = getattr(args, k, None)
        if v is not None:
            rows = [r for r in rows if r[k] == v]
    if getattr(args, "r_e", None) is not None:
        rows = [r for r in rows if float(r["r_e"]) == args.r_e]
    return rows


def cmd_fit(args) -> int:
    path = Path(args.csv)
    rows = _filter(read_rows(path), args)
    groups = {(r["experiment"], r["decoder"], r["noise_model"], r["erasure_kind"], r["r_e"]) for r in rows}
    if len(groups) > 1:
        print(f"CSV mixes {len(groups)} configurations; filter with --experiment/--decoder/...", file=sys.stderr)
        return EXIT_CONFIG
    try:
        pts = fit_points(rows, args.metric, _observable_counts(path), args.p_min, args.p_max)
    except KeyError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    fit = fit_threshold(pts) if pts else fit_threshold([])
    report = {"csv": str(path), "metric": args.metric, "points": len(pts), **asdict(fit)}
    Path(args.report or str(path) + ".fit.json").write_text(json.dumps(report, indent=1))
    if not fit.success:
        print(f"fit failed: {fit.message}")
        return EXIT_FIT
    nu = f"{fit.nu:.3f} (fixed)" if fit.fixed_nu else f"{fit.nu:.3f} +- {fit.nu_err:.3f}"
    print(
        f"p_t = {100 * fit.p_t:.4f}% +- {100 * fit.p_t_err:.4f}%  nu = {nu}  "
        f"window = [{100 * fit.window[0]:.3g}%, {100 * fit.window[1]:.3g}%]  chi2/dof = {fit.chi2_red:.3g}"
    )
    return 0


def cmd_lssa(args) -> int:
    res = lssa(LssaSpec(args.kind, args.d, args.b, args.n))
    print(f"{args.kind}: LSSA = {res.lssa} ({float(res.lssa):.6g})  identity = {res.identity}  "
          f"ratio = {res.ratio} ({float(res.ratio):.6g})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tcnot", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (("run", cmd_run, "one Monte Carlo point"), ("sweep", cmd_sweep, "d x p grid, resumable")):
        sp = sub.add_parser(name, help=help_)
        _add_run_options(sp)
        sp.set_defaults(func=fn)
    sp = sub.add_parser("fit", help="finite-size-scaling threshold fit of a sweep CSV")
    sp.add_argument("csv")
    sp.add_argument("--metric", default="total", help="total, x, z or an observable name")
    sp.add_argument("--p-min", type=float)
    sp.add_argument("--p-max", type=float)
    sp.add_argument("--experiment")
    sp.add_argument("--decoder")
    sp.add_argument("--erasure-kind", dest="erasure_kind")
    sp.add_argument("--noise-model", dest="noise_model")
    sp.add_argument("--r-e", dest="r_e", type=float)
    sp.add_argument("--report", help="JSON report path (default: <csv>.fit.json)")
    sp.set_defaults(func=cmd_fit)
    sp = sub.add_parser("lssa", help="exact logical spacetime surface area ratio")
    sp.add_argument("kind", choices=LSSA_KINDS)
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--b", type=int, default=1)
    sp.add_argument("--n", type=int, default=1)
    sp.set_defaults(func=cmd_lssa)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        if args.command == "lssa":
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        raise


if __name__ == "__main__":
    sys.exit(main())
