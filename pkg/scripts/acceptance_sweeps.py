"""Monte Carlo sweeps behind the acceptance checks.

Writes one resumable CSV per sweep into ``results/acceptance`` (or the
directory given with ``--out``).  Rerunning skips finished points.

    python scripts/acceptance_sweeps.py            # everything
    python scripts/acceptance_sweeps.py memory xx  # selected sweeps
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from tcnot.analysis import run_experiment
from tcnot.cli import _row_key, append_result, read_rows, sweep_configs
from tcnot.config import RunConfig


def grid(lo, hi, step):
    return tuple(float(round(x, 6)) for x in np.arange(lo, hi + step / 2, step))


PAULI = grid(0.005, 0.013, 0.001)
LOW_P = grid(0.002, 0.006, 0.001)
D357 = (3, 5, 7)

SWEEPS = {
    "memory": RunConfig("2scqm", "mwpm", d_list=D357, p_grid=PAULI, shots=100_000),
    "single_update": RunConfig("tcnot", "single_update", d_list=D357, p_grid=grid(0.003, 0.009, 0.001), shots=100_000),
    "ordered": RunConfig("tcnot", "ordered", d_list=D357, p_grid=PAULI, shots=100_000),
    "teleport": RunConfig("teleport", "teleport", d_list=D357, p_grid=grid(0.006, 0.014, 0.001), shots=100_000),
    "phenomenological": RunConfig(
        "tcnot", "ordered", noise_model="phenomenological", d_list=D357, p_grid=grid(0.02, 0.036, 0.002), shots=100_000
    ),
    "xx": RunConfig("ls_xx", "mwpm", d_list=(3, 5), p_grid=LOW_P, shots=100_000),
    "memory_low": RunConfig("2scqm", "mwpm", d_list=(3, 5), p_grid=LOW_P, shots=100_000),
    "ordered_low": RunConfig("tcnot", "ordered", d_list=(3, 5), p_grid=LOW_P, shots=100_000),
    "erasure_biased_memory": RunConfig(
        "2scqm", "mwpm", r_e=1.0, erasure_kind="biased", d_list=D357, p_grid=grid(0.08, 0.2, 0.02), shots=10_000
    ),
    "erasure_biased_ordered": RunConfig(
        "tcnot", "ordered", r_e=1.0, erasure_kind="biased", d_list=D357, p_grid=grid(0.06, 0.2, 0.02), shots=10_000
    ),
    "erasure_conventional_memory": RunConfig(
        "2scqm", "mwpm", r_e=1.0, erasure_kind="conventional", d_list=D357, p_grid=grid(0.03, 0.11, 0.01), shots=10_000
    ),
    "erasure_conventional_ordered": RunConfig(
        "tcnot", "ordered", r_e=1.0, erasure_kind="conventional", d_list=D357, p_grid=grid(0.03, 0.11, 0.01), shots=10_000
    ),
}


def run_sweep(name: str, out: Path, seed: int = 2024):
    path = out / f"{name}.csv"
    base = SWEEPS[name].with_(seed=seed, output=str(path))
    done = {_row_key(r) for r in read_rows(path)}
    for point in sweep_configs(base):
        if _row_key(point.as_dict()) in done:
            continue
        t = time.perf_counter()
        stats = run_experiment(point)
        append_result(path, stats)
        print(f"[{name}] d={point.d} p={point.p:.4f} p_L={stats.p_l:.4g} ({time.perf_counter() - t:.0f}s)", flush=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("sweeps", nargs="*", help=f"subset of: {', '.join(SWEEPS)}")
    ap.add_argument("--out", default="results/acceptance")
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    unknown = set(args.sweeps) - set(SWEEPS)
    if unknown:
        ap.error(f"unknown sweeps: {sorted(unknown)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.sweeps or list(SWEEPS):
        run_sweep(name, out, args.seed)


if __name__ == "__main__":
    main()
