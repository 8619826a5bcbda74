"""Experiment circuits as flat, time-stepped operation lists.

Every experiment is closed in time: data qubits start in a perfect code state
and end with a transversal readout, so check values can be reconstructed at
both time boundaries.  ``basis="both"`` records a virtual Z and X readout of
every data qubit; this is only meaningful for Pauli-frame simulation, where it
lets one noisy run expose both the bit-flip and phase-flip sectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .lattice import CodeLayout, Coord, build_patch, doubled

OP_NAMES = ("prepare_z", "prepare_x", "cnot", "measure_z", "measure_x")
BASES = ("Z", "X", "both")


@dataclass(frozen=True)
class Op:
    name: str
    qubits: tuple[int, ...]
    step: int
    block: str
    tag: str = ""


@dataclass(frozen=True)
class QubitInfo:
    space: str
    role: str  # data | ancilla | bridge
    coord: Coord  # doubled integer coordinate


@dataclass(frozen=True)
class Measurement:
    index: int
    qubit: int
    basis: str
    code: str
    round: int
    key: tuple  # ("check", basis, face) or ("data", coord)


@dataclass(frozen=True)
class ObservableDef:
    """A logical outcome defined as the parity of a set of measurements.

    ``sector`` is the check type that detects the errors flipping it: a
    logical X readout is flipped by Z errors, like an X check.  ``frame_update``
    names the observables XORed into this one when the checks are tracked
    through the transversal CNOT (e.g. X_C picks up X_T).
    """

    name: str
    sector: str
    measurements: tuple[int, ...]
    block: str
    frame_update: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.measurements:
            raise ValueError(f"observable {self.name} has no measurements")


@dataclass(frozen=True)
class LatticeSurgeryLayout:
    d: int
    b: int
    left: CodeLayout
    right: CodeLayout
    merged: CodeLayout
    bridge_qubits: frozenset[Coord]

    @classmethod
    def build(cls, d: int, b: int = 1) -> "LatticeSurgeryLayout":
        if b < 1:
            raise ValueError("bridge width b must be >= 1")
        left = build_patch(d, d, 0)
        right = build_patch(d, d, d + b)
        merged = build_patch(d, 2 * d + b, 0)
        bridge = frozenset((r, c) for r in range(d) for c in range(d, d + b))
        assert not bridge & left.data_qubits and not bridge & right.data_qubits
        return cls(d, b, left, right, merged, bridge)


@dataclass(frozen=True)
class CodeBlock:
    """One code as it appears in the record: which rounds it was measured in."""

    label: str
    layout: CodeLayout
    space: str
    rounds: tuple[int, ...]


@dataclass
class Circuit:
    kind: str
    d: int
    ops: tuple[Op, ...]
    qubits: tuple[QubitInfo, ...]
    measurements: tuple[Measurement, ...]
    observables: tuple[ObservableDef, ...]
    codes: dict[str, CodeBlock]
    prep_basis: dict[str, str]
    readout_basis: dict[str, str]
    meta: dict = field(default_factory=dict)
    _records: dict = field(default_factory=dict, repr=False)

    @property
    def num_measurements(self) -> int:
        return len(self.measurements)

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)

    def record(self, code: str, basis: str, face: Coord, rnd: int) -> Optional[int]:
        """Measurement index of a check outcome, or None if it was not measured."""
        self._index()
        return self._records.get(("check", code, basis, face, rnd))

    def data_record(self, space: str, q: Coord, basis: str) -> Optional[int]:
        self._index()
        return self._records.get(("data", space, q, basis))

    def _index(self):
        if self._records:
            return
        for m in self.measurements:
            if m.key[0] == "check":
                _, basis, face = m.key
                self._records[("check", m.code, basis, face, m.round)] = m.index
            else:
                space = self.qubits[m.qubit].space
                self._records[("data", space, m.key[1], m.basis)] = m.index

    def observable(self, name: str) -> ObservableDef:
        for o in self.observables:
            if o.name == name:
                return o
        raise KeyError(name)

    def cnot_ops(self) -> list[int]:
        return [i for i, op in enumerate(self.ops) if op.name == "cnot"]

    def dump(self) -> str:
        """One op per line: ``step name coords block [tag]``."""
        lines = []
        for op in self.ops:
            coords = " ".join(
                f"{self.qubits[q].space}:{self.qubits[q].coord[0]},{self.qubits[q].coord[1]}"
                for q in op.qubits
            )
            lines.append(f"{op.step} {op.name} {coords} {op.block} {op.tag}".rstrip())
        return "\n".join(lines) + "\n"


class _Builder:
    def __init__(self):
        self.qubits: list[QubitInfo] = []
        self.qid: dict[tuple, int] = {}
        self.ops: list[Op] = []
        self.meas: list[Measurement] = []
        self.step = 0
        self.bridge: set[tuple[str, Coord]] = set()
        self.round_starts: list[tuple[int, int, tuple[str, ...]]] = []

    def qubit(self, space: str, role: str, coord: Coord) -> int:
        key = (space, role if role == "ancilla" else "data", coord)
        if key not in self.qid:
            if role == "data" and (space, coord) in self.bridge:
                role = "bridge"
            self.qid[key] = len(self.qubits)
            self.qubits.append(QubitInfo(space, role, coord))
        return self.qid[key]

    def data(self, space: str, q: Coord) -> int:
        return self.qubit(space, "data", doubled(q))

    def op(self, name, qubits, block, tag="", step=None):
        self.ops.append(Op(name, tuple(qubits), self.step if step is None else step, block, tag))

    def measure(self, basis, qubit, block, code, rnd, key, step=None, tag=""):
        idx = len(self.meas)
        self.op("measure_" + basis.lower(), (qubit,), block, tag, step)
        self.meas.append(Measurement(idx, qubit, basis, code, rnd, key))
        return idx

    def prepare_data(self, space, layout, basis, block, qubits=None):
        name = "prepare_x" if basis == "X" else "prepare_z"
        for q in sorted(layout.data_qubits if qubits is None else qubits):
            self.op(name, (self.data(space, q),), block, "prep")

    def round(self, codes: list[tuple[str, CodeLayout, str]], rnd: int):
        """Measure every check of each (label, layout, space) once, in parallel."""
        s = self.step
        self.round_starts.append((len(self.ops), rnd, tuple(lab for lab, _, _ in codes)))
        for label, layout, space in codes:
            for ch in layout.checks:
                a = self.qubit(space, "ancilla", ch.face)
                self.op("prepare_x" if ch.basis == "X" else "prepare_z", (a,), label, "extract", s)
        for k in range(4):
            for label, layout, space in codes:
                for ch in layout.checks:
                    q = ch.slots[k]
                    if q is None:
                        continue
                    a = self.qubit(space, "ancilla", ch.face)
                    dq = self.data(space, q)
                    pair = (a, dq) if ch.basis == "X" else (dq, a)
                    self.op("cnot", pair, label, "extract", s + 1 + k)
        for label, layout, space in codes:
            for ch in layout.checks:
                a = self.qubit(space, "ancilla", ch.face)
                self.measure(ch.basis, a, label, label, rnd, ("check", ch.basis, ch.face), s + 5, "extract")
        self.step = s + 6

    def readout(self, space, layout, basis, block, rnd, qubits=None):
        """Transversal data readout; returns {basis: {coord: index}}."""
        out: dict[str, dict[Coord, int]] = {}
        bases = ("Z", "X") if basis == "both" else (basis,)
        for k, b in enumerate(bases):
            out[b] = {}
            for q in sorted(layout.data_qubits if qubits is None else qubits):
                out[b][q] = self.measure(
                    b, self.data(space, q), block, block, rnd, ("data", q), self.step + k, "readout"
                )
        self.step += len(bases)
        return out

    def finish(self, kind, d, observables, codes, prep, readout, meta) -> Circuit:
        return Circuit(
            kind=kind,
            d=d,
            ops=tuple(self.ops),
            qubits=tuple(self.qubits),
            measurements=tuple(self.meas),
            observables=tuple(observables),
            codes=codes,
            prep_basis=prep,
            readout_basis=readout,
            meta={**meta, "round_starts": tuple(self.round_starts)},
        )


def _n_bases(basis: str) -> int:
    return 2 if basis == "both" else 1


def _prep_basis(basis: str) -> str:
    return "X" if basis == "X" else "Z"


def _logical_obs(name, sector, reads, support, block, frame_update=()):
    return ObservableDef(name, sector, tuple(sorted(reads[sector][q] for q in support)), block, frame_update)


def build_memory(layout: CodeLayout, rounds: int, basis: str = "both", copies: int = 1) -> Circuit:
    """``copies`` disjoint patches measured for ``rounds`` rounds then read out in ``basis``."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if copies not in (1, 2):
        raise ValueError("copies must be 1 or 2")
    if basis not in BASES:
        raise ValueError(f"basis must be one of {BASES}")
    bld = _Builder()
    labels = [f"M{i}" for i in range(copies)]
    for lab in labels:
        bld.prepare_data(lab, layout, _prep_basis(basis), lab)
    bld.step += 1
    for r in range(1, rounds + 1):
        bld.round([(lab, layout, lab) for lab in labels], r)
    observables = []
    for lab in labels:
        reads = bld.readout(lab, layout, basis, lab, rounds + 1)
        for sector, support in (("Z", layout.logical_z_support), ("X", layout.logical_x_support)):
            if sector in reads:
                observables.append(_logical_obs(f"logical_{sector}_{lab}", sector, reads, support, lab))
        bld.step -= len(reads)
    bld.step += _n_bases(basis)
    codes = {lab: CodeBlock(lab, layout, lab, tuple(range(1, rounds + 1))) for lab in labels}
    return bld.finish(
        "memory",
        layout.d,
        observables,
        codes,
        {lab: basis for lab in labels},
        {lab: basis for lab in labels},
        {"rounds": rounds},
    )


def _tcnot_layer(bld: _Builder, layout: CodeLayout):
    for q in sorted(layout.data_qubits):
        bld.op("cnot", (bld.data("C", q), bld.data("T", q)), "CT", "tcnot")
    bld.step += 1


def build_tcnot_gadget(
    layout: CodeLayout, rounds_pre: Optional[int] = None, rounds_post: Optional[int] = None, basis: str = "both"
) -> Circuit:
    """Control C and target T: pre rounds, one transversal CNOT layer, post rounds, readout."""
    d = layout.d
    rounds_pre = d if rounds_pre is None else rounds_pre
    rounds_post = d if rounds_post is None else rounds_post
    if rounds_pre < 1 or rounds_post < 1:
        raise ValueError("rounds_pre and rounds_post must be >= 1")
    if basis not in BASES:
        raise ValueError(f"basis must be one of {BASES}")
    bld = _Builder()
    for lab in ("C", "T"):
        bld.prepare_data(lab, layout, _prep_basis(basis), lab)
    bld.step += 1
    both = [("C", layout, "C"), ("T", layout, "T")]
    for r in range(1, rounds_pre + 1):
        bld.round(both, r)
    _tcnot_layer(bld, layout)
    total = rounds_pre + rounds_post
    for r in range(rounds_pre + 1, total + 1):
        bld.round(both, r)
    reads = {}
    for lab in ("C", "T"):
        reads[lab] = bld.readout(lab, layout, basis, lab, total + 1)
        bld.step -= len(reads[lab])
    bld.step += _n_bases(basis)
    updates = {
        "logical_X_C": ("logical_X_T",),
        "logical_Z_T": ("logical_Z_C",),
    }
    observables = []
    for sector, support in (("X", layout.logical_x_support), ("Z", layout.logical_z_support)):
        for lab in ("C", "T"):
            if sector in reads[lab]:
                name = f"logical_{sector}_{lab}"
                observables.append(_logical_obs(name, sector, reads[lab], support, lab, updates.get(name, ())))
    codes = {
        lab: CodeBlock(lab, layout, lab, tuple(range(1, total + 1))) for lab in ("C", "T")
    }
    return bld.finish(
        "tcnot",
        d,
        observables,
        codes,
        {"C": basis, "T": basis},
        {"C": basis, "T": basis},
        {"gate_round": rounds_pre, "rounds": total},
    )


def build_teleportation(layout: CodeLayout, control_basis: str = "both") -> Circuit:
    """d rounds on C and T, transversal CNOT, immediate Z readout of T, d more rounds on C.

    Both blocks start in the same (perfect) code state basis; T is only read in Z.
    """
    d = layout.d
    bld = _Builder()
    bld.prepare_data("C", layout, _prep_basis(control_basis), "C")
    bld.prepare_data("T", layout, _prep_basis(control_basis), "T")
    bld.step += 1
    both = [("C", layout, "C"), ("T", layout, "T")]
    for r in range(1, d + 1):
        bld.round(both, r)
    _tcnot_layer(bld, layout)
    t_reads = bld.readout("T", layout, "Z", "T", d + 1)
    for r in range(d + 1, 2 * d + 1):
        bld.round([("C", layout, "C")], r)
    c_reads = bld.readout("C", layout, control_basis, "C", 2 * d + 1)
    observables = [_logical_obs("logical_Z_target", "Z", t_reads, layout.logical_z_support, "T")]
    if "X" in c_reads:
        observables.append(_logical_obs("logical_X_control", "X", c_reads, layout.logical_x_support, "C"))
    if "Z" in c_reads:
        observables.append(_logical_obs("logical_Z_control", "Z", c_reads, layout.logical_z_support, "C"))
    codes = {
        "C": CodeBlock("C", layout, "C", tuple(range(1, 2 * d + 1))),
        "T": CodeBlock("T", layout, "T", tuple(range(1, d + 1))),
    }
    return bld.finish(
        "teleport",
        d,
        observables,
        codes,
        {"C": control_basis, "T": control_basis},
        {"C": control_basis, "T": "Z"},
        {"gate_round": d, "rounds": 2 * d},
    )


def build_ls_xx(
    layout: CodeLayout,
    ls: Optional[LatticeSurgeryLayout] = None,
    rounds_per_phase: Optional[int] = None,
    basis: str = "both",
) -> Circuit:
    """XX joint measurement: buffer rounds, merged rounds, split rounds, readout.

    ``basis`` is the patches' preparation/readout basis; ``"X"`` is the
    physical |+>|+> experiment, ``"both"`` the frame-closed one used for
    sampling both sectors at once.
    """
    d = layout.d
    ls = LatticeSurgeryLayout.build(d, 1) if ls is None else ls
    if ls.d != d:
        raise ValueError("lattice-surgery layout distance does not match the patch")
    n = d if rounds_per_phase is None else rounds_per_phase
    if n < 1:
        raise ValueError("rounds_per_phase must be >= 1")
    bld = _Builder()
    bld.bridge = {("S", doubled(q)) for q in ls.bridge_qubits}
    patches = [("L", ls.left, "S"), ("R", ls.right, "S")]
    for lab, lay, _ in patches:
        bld.prepare_data("S", lay, _prep_basis(basis), lab)
    bld.step += 1
    for r in range(1, n + 1):
        bld.round(patches, r)
    bld.prepare_data("S", ls.merged, "Z", "bridge", ls.bridge_qubits)
    bld.step += 1
    for r in range(n + 1, 2 * n + 1):
        bld.round([("LR", ls.merged, "S")], r)
    bridge_reads = bld.readout("S", ls.merged, "Z", "bridge", 2 * n + 1, ls.bridge_qubits)
    for r in range(2 * n + 1, 3 * n + 1):
        bld.round(patches, r)
    reads = {}
    for lab, lay, _ in patches:
        reads[lab] = bld.readout("S", lay, basis, lab, 3 * n + 1)
        bld.step -= len(reads[lab])
    bld.step += _n_bases(basis)

    new_x = [
        ch
        for ch in ls.merged.x_checks
        if ls.left.check_at("X", ch.face) is None and ls.right.check_at("X", ch.face) is None
    ]
    observables = []
    if "X" in reads["L"]:
        first = tuple(sorted(bld_record(bld, "LR", "X", ch.face, n + 1) for ch in new_x))
        observables.append(ObservableDef("logical_XX", "X", first, "LR"))
        for lab, lay, _ in patches:
            observables.append(_logical_obs(f"logical_X_{lab}", "X", reads[lab], lay.logical_x_support, lab))
    if "Z" in reads["L"]:
        zz = tuple(
            sorted(
                [reads["L"]["Z"][q] for q in ls.left.logical_z_support]
                + [reads["R"]["Z"][q] for q in ls.right.logical_z_support]
                # the merged code only preserves Z_L Z_R times the bridge part of the row
                + [bridge_reads["Z"][q] for q in ls.bridge_qubits if q[0] == 0]
            )
        )
        observables.append(ObservableDef("logical_ZZ", "Z", zz, "LR"))
    codes = {
        "L": CodeBlock("L", ls.left, "S", tuple(range(1, n + 1)) + tuple(range(2 * n + 1, 3 * n + 1))),
        "R": CodeBlock("R", ls.right, "S", tuple(range(1, n + 1)) + tuple(range(2 * n + 1, 3 * n + 1))),
        "LR": CodeBlock("LR", ls.merged, "S", tuple(range(n + 1, 2 * n + 1))),
    }
    meta = {
        "phase_rounds": n,
        "rounds": 3 * n,
        "b": ls.b,
        "ls": ls,
        "bridge_reads": bridge_reads["Z"],
        "new_x_faces": tuple(ch.face for ch in new_x),
    }
    return bld.finish(
        "ls_xx", d, observables, codes, {"L": basis, "R": basis}, {"L": basis, "R": basis}, meta
    )


def bld_record(bld: _Builder, code: str, basis: str, face: Coord, rnd: int) -> int:
    for m in reversed(bld.meas):
        if m.code == code and m.round == rnd and m.key == ("check", basis, face):
            return m.index
    raise KeyError((code, basis, face, rnd))
