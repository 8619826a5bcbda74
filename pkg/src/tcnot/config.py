"""Run configuration: flat ``key = value`` files with command-line overrides."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

EXPERIMENTS = ("scqm", "2scqm", "tcnot", "teleport", "ls_xx")
DECODERS_FOR = {
    "scqm": ("mwpm",),
    "2scqm": ("mwpm",),
    "ls_xx": ("mwpm",),
    "tcnot": ("single_update", "ordered"),
    "teleport": ("teleport",),
}
DEFAULT_DECODER = {"scqm": "mwpm", "2scqm": "mwpm", "ls_xx": "mwpm", "tcnot": "ordered", "teleport": "teleport"}
OUTPUT_ENV = "TCNOT_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


def _floats(v) -> tuple[float, ...]:
    if isinstance(v, (list, tuple)):
        return tuple(float(x) for x in v)
    return tuple(float(x) for x in str(v).replace(" ", "").split(",") if x)


def _ints(v) -> tuple[int, ...]:
    if isinstance(v, (list, tuple)):
        return tuple(int(x) for x in v)
    return tuple(int(x) for x in str(v).replace(" ", "").split(",") if x)


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "2scqm"
    decoder: Optional[str] = None
    d: int = 3
    rounds: Optional[int] = None
    p: float = 0.01
    p_grid: tuple[float, ...] = ()
    d_list: tuple[int, ...] = ()
    noise_model: str = "circuit"
    r_e: float = 0.0
    erasure_kind: str = "none"
    erasure_qubit: str = "uniform"
    b: int = 1
    shots: int = 10_000
    seed: int = 0
    threads: int = 1
    output: Optional[str] = None

    def __post_init__(self):
        if self.decoder is None:
            object.__setattr__(self, "decoder", DEFAULT_DECODER.get(self.experiment, "mwpm"))
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.decoder not in DECODERS_FOR[self.experiment]:
            raise ConfigError(
                f"decoder {self.decoder!r} does not apply to {self.experiment}; use one of {DECODERS_FOR[self.experiment]}"
            )
        for d in (self.d,) + tuple(self.d_list):
            if d < 3 or d % 2 == 0:
                raise ConfigError(f"d must be an odd integer >= 3, got {d}")
        for p in (self.p,) + tuple(self.p_grid):
            if not 0.0 <= p <= 0.5:
                raise ConfigError(f"p must lie in [0, 0.5], got {p}")
        if self.noise_model not in ("circuit", "phenomenological"):
            raise ConfigError(f"noise_model must be circuit or phenomenological, got {self.noise_model!r}")
        if self.noise_model == "phenomenological" and self.experiment != "tcnot" and self.experiment not in ("scqm", "2scqm"):
            raise ConfigError("phenomenological noise is defined for memory and tCNOT experiments")
        if not 0.0 <= self.r_e <= 1.0:
            raise ConfigError("r_e must lie in [0, 1]")
        if self.erasure_kind not in ("none", "conventional", "biased"):
            raise ConfigError("erasure_kind must be none, conventional or biased")
        if self.erasure_qubit not in ("uniform", "control", "target", "both"):
            raise ConfigError("erasure_qubit must be uniform, control, target or both")
        if self.r_e > 0 and self.erasure_kind == "none":
            raise ConfigError("r_e > 0 needs erasure_kind conventional or biased")
        if self.r_e > 0 and self.noise_model != "circuit":
            raise ConfigError("erasures need the circuit noise model")
        if self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.b < 1:
            raise ConfigError("b must be >= 1")
        if self.rounds is not None and self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.rounds is not None and self.experiment == "teleport":
            raise ConfigError("teleportation uses d rounds before the gate and d after; rounds is fixed")

    def with_(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    def output_path(self) -> Path:
        if self.output:
            return Path(self.output)
        return Path(os.environ.get(OUTPUT_ENV, "results")) / "results.csv"

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["p_grid"] = list(self.p_grid)
        out["d_list"] = list(self.d_list)
        return out


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_CONVERT = {
    "experiment": str,
    "decoder": str,
    "d": int,
    "rounds": int,
    "p": float,
    "p_grid": _floats,
    "d_list": _ints,
    "noise_model": str,
    "r_e": float,
    "erasure_kind": str,
    "erasure_qubit": str,
    "b": int,
    "shots": int,
    "seed": int,
    "threads": int,
    "output": str,
}


def parse_pairs(pairs: dict) -> dict:
    out = {}
    for key, value in pairs.items():
        k = key.strip().replace("-", "_")
        if k not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        if value is None:
            continue
        try:
            out[k] = _CONVERT[k](value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    return out


def read_config_file(path: str | os.PathLike) -> dict:
    pairs = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        pairs[k.strip()] = v.strip()
    return parse_pairs(pairs)


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    values = read_config_file(path) if path else {}
    values.update(parse_pairs(overrides or {}))
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
