"""Fault sites for circuit-level Pauli/erasure noise and phenomenological noise."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .circuit import Circuit

PAULIS_1Q = ("I", "X", "Y", "Z")
PAULIS_2Q = tuple(
    (a, b) for a, b in itertools.product(PAULIS_1Q, PAULIS_1Q) if (a, b) != ("I", "I")
)
NOISE_MODELS = ("circuit", "phenomenological")
ERASURE_KINDS = ("none", "conventional", "biased")
ERASURE_QUBITS = ("uniform", "control", "target", "both")


@dataclass(frozen=True)
class NoiseParams:
    """Gate error rate ``p`` split into Pauli faults and heralded erasures.

    A fraction ``r_e`` of the per-gate error budget is an erasure, the rest
    uniform two-qubit depolarizing noise.  ``erasure_qubit`` picks which leg
    of a gate is erased: ``"uniform"`` (one leg, chosen at random),
    ``"control"``, ``"target"`` or ``"both"`` (both legs, one shared herald).
    """

    p: float
    model: str = "circuit"
    r_e: float = 0.0
    erasure_kind: str = "none"
    erasure_qubit: str = "uniform"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not 0.0 <= self.r_e <= 1.0:
            raise ValueError(f"r_e must lie in [0, 1], got {self.r_e}")
        if self.model not in NOISE_MODELS:
            raise ValueError(f"noise model must be one of {NOISE_MODELS}")
        if self.erasure_kind not in ERASURE_KINDS:
            raise ValueError(f"erasure kind must be one of {ERASURE_KINDS}")
        if self.erasure_kind == "none" and self.r_e > 0:
            raise ValueError("r_e > 0 needs an erasure kind")
        if self.model == "phenomenological" and self.r_e > 0:
            raise ValueError("erasures are only defined for circuit noise")
        if self.erasure_qubit not in ERASURE_QUBITS:
            raise ValueError(f"erasure_qubit must be one of {ERASURE_QUBITS}")

    @property
    def p_e(self) -> float:
        return self.p * self.r_e

    @property
    def p_pauli(self) -> float:
        return self.p * (1.0 - self.r_e)


@dataclass(frozen=True)
class FaultOutcome:
    """One branch of a fault site, with its probability given the site fired."""

    probability: float
    paulis: tuple[tuple[int, str], ...] = ()
    flips: tuple[int, ...] = ()  # measurement indices flipped directly
    herald: Optional[int] = None


@dataclass(frozen=True)
class FaultSite:
    index: int
    position: int  # the fault acts right after ops[position]
    step: int
    qubits: tuple[int, ...]
    kind: str  # pauli | measurement_flip | erasure
    probability: float
    outcomes: tuple[FaultOutcome, ...]

    @property
    def heralded(self) -> bool:
        return self.kind == "erasure"


@dataclass
class NoisyCircuit:
    circuit: Circuit
    params: NoiseParams
    sites: tuple[FaultSite, ...]
    heralds: tuple[tuple[int, int], ...]  # herald id -> (site index, qubit); qubit -1: both legs

    @property
    def num_heralds(self) -> int:
        return len(self.heralds)


def erasure_channel(kind: str, gate_role: str) -> dict[str, float]:
    """Twirled single-qubit Pauli mixture left behind by a heralded erasure."""
    if kind == "conventional":
        return {"I": 0.25, "X": 0.25, "Y": 0.25, "Z": 0.25}
    if kind == "biased":
        if gate_role in ("control", "cz"):
            return {"I": 0.5, "Z": 0.5}
        if gate_role == "target":
            return {"I": 0.5, "X": 0.5}
        raise ValueError(f"unknown gate role {gate_role!r}")
    raise ValueError(f"no erasure channel for kind {kind!r}")


def _pauli_outcomes(qubits):
    w = 1.0 / 15.0
    return tuple(
        FaultOutcome(w, tuple((q, P) for q, P in zip(qubits, pp) if P != "I")) for pp in PAULIS_2Q
    )


def apply_circuit_noise(circuit: Circuit, params: NoiseParams) -> NoisyCircuit:
    """Attach a depolarizing site and (if r_e > 0) an erasure site after every CNOT."""
    if params.model != "circuit":
        raise ValueError("apply_circuit_noise needs circuit-model parameters")
    sites: list[FaultSite] = []
    heralds: list[tuple[int, int]] = []
    legs = {"uniform": (0, 1), "control": (0,), "target": (1,), "both": ()}[params.erasure_qubit]
    for k, op in enumerate(circuit.ops):
        if op.name != "cnot":
            continue
        if params.p_pauli > 0:
            sites.append(
                FaultSite(len(sites), k, op.step, op.qubits, "pauli", params.p_pauli, _pauli_outcomes(op.qubits))
            )
        if params.p_e > 0:
            idx = len(sites)
            outcomes = []
            if not legs:
                h = len(heralds)
                heralds.append((idx, -1))
                c, t = op.qubits
                for Pc, wc in erasure_channel(params.erasure_kind, "control").items():
                    for Pt, wt in erasure_channel(params.erasure_kind, "target").items():
                        paulis = tuple((q, P) for q, P in ((c, Pc), (t, Pt)) if P != "I")
                        outcomes.append(FaultOutcome(wc * wt, paulis, (), h))
            for leg in legs:
                q = op.qubits[leg]
                h = len(heralds)
                heralds.append((idx, q))
                role = "control" if leg == 0 else "target"
                for P, w in erasure_channel(params.erasure_kind, role).items():
                    paulis = () if P == "I" else ((q, P),)
                    outcomes.append(FaultOutcome(w / len(legs), paulis, (), h))
            sites.append(FaultSite(idx, k, op.step, op.qubits, "erasure", params.p_e, tuple(outcomes)))
    return NoisyCircuit(circuit, params, tuple(sites), tuple(heralds))


def apply_phenomenological_noise(circuit: Circuit, params: NoiseParams) -> NoisyCircuit:
    """Bit flips on every data qubit before each round, plus Z-check readout flips.

    Only X errors are drawn, so the X-check graphs stay empty.
    """
    if params.model != "phenomenological":
        raise ValueError("apply_phenomenological_noise needs phenomenological parameters")
    sites: list[FaultSite] = []
    if params.p == 0:
        return NoisyCircuit(circuit, params, (), ())
    data_of = {}
    for label, block in circuit.codes.items():
        data_of[label] = [
            _data_qubit(circuit, block.space, q) for q in sorted(block.layout.data_qubits)
        ]
    meas_op = {}
    j = 0
    for k, op in enumerate(circuit.ops):
        if op.name.startswith("measure"):
            meas_op[j] = k
            j += 1
    for start, rnd, labels in circuit.meta["round_starts"]:
        for label in labels:
            for q in data_of[label]:
                sites.append(
                    FaultSite(
                        len(sites), start - 1, circuit.ops[start].step, (q,), "pauli", params.p,
                        (FaultOutcome(1.0, ((q, "X"),)),),
                    )
                )
    for m in circuit.measurements:
        if m.key[0] == "check" and m.basis == "Z":
            k = meas_op[m.index]
            sites.append(
                FaultSite(
                    len(sites), k - 1, circuit.ops[k].step, (m.qubit,), "measurement_flip", params.p,
                    (FaultOutcome(1.0, (), (m.index,)),),
                )
            )
    sites.sort(key=lambda s: (s.position, s.index))
    sites = [FaultSite(i, *_astuple(s)[1:]) for i, s in enumerate(sites)]
    return NoisyCircuit(circuit, params, tuple(sites), ())


def apply_noise(circuit: Circuit, params: NoiseParams) -> NoisyCircuit:
    if params.model == "phenomenological":
        return apply_phenomenological_noise(circuit, params)
    return apply_circuit_noise(circuit, params)


def _astuple(s: FaultSite):
    return (s.index, s.position, s.step, s.qubits, s.kind, s.probability, s.outcomes)


def _data_qubit(circuit: Circuit, space: str, q) -> int:
    target = (2 * q[0] + 1, 2 * q[1] + 1)
    for i, info in enumerate(circuit.qubits):
        if info.space == space and info.role != "ancilla" and info.coord == target:
            return i
    raise KeyError((space, q))
