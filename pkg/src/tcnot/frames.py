"""Detector definitions in the static, dynamic and hybrid frames.

A detector is a parity of measurement outcomes that is deterministic in the
absence of noise.  The three frames differ only in how the checks of the two
codes are compared across the transversal CNOT:

* static: every check is compared with its own previous value;
* dynamic: after the gate the dependent checks (X checks of the control,
  Z checks of the target) are tracked as products with the matching check of
  the other code, for every later round;
* hybrid: static everywhere except the first post-gate comparison of each
  dependent check, which absorbs the other code's pre-gate value.

Only the hybrid frame keeps every single fault graphlike within each sector
pass, which is what the teleportation decoder needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .circuit import Circuit
from .lattice import Check, Coord

FRAMES = ("static", "dynamic", "hybrid")


@dataclass(frozen=True)
class Detector:
    id: int
    code: str
    basis: str  # check type, which is also the sector
    face: Coord
    round: int
    measurements: tuple[int, ...]
    continuation: bool = False


@dataclass
class DetectorSet:
    frame: str
    detectors: tuple[Detector, ...]
    observables: tuple  # ObservableDef, in column order
    _by_key: dict = field(default_factory=dict, repr=False)

    @property
    def num_detectors(self) -> int:
        return len(self.detectors)

    @property
    def num_observables(self) -> int:
        return len(self.observables)

    def ids(self, code: Optional[str] = None, basis: Optional[str] = None, continuation=None) -> list[int]:
        return [
            det.id
            for det in self.detectors
            if (code is None or det.code == code)
            and (basis is None or det.basis == basis)
            and (continuation is None or det.continuation == continuation)
        ]

    def find(self, code: str, basis: str, face: Coord, rnd: int) -> Optional[Detector]:
        if not self._by_key:
            for det in self.detectors:
                self._by_key[(det.code, det.basis, det.face, det.round)] = det
        return self._by_key.get((code, basis, face, rnd))

    def observable_index(self, name: str) -> int:
        for k, o in enumerate(self.observables):
            if o.name == name:
                return k
        raise KeyError(name)

    def sector_observables(self, sector: str) -> list[int]:
        return [k for k, o in enumerate(self.observables) if o.sector == sector]


class _Collector:
    def __init__(self):
        self.dets: list[Detector] = []

    def add(self, code, basis, face, rnd, meas, continuation=False):
        meas = tuple(sorted(meas))
        if not meas:
            raise AssertionError(f"empty detector {code} {basis} {face} {rnd}")
        self.dets.append(Detector(len(self.dets), code, basis, face, rnd, meas, continuation))


def _xor(*sets) -> set[int]:
    out: set[int] = set()
    for s in sets:
        out ^= set(s)
    return out


def _recon(circuit: Circuit, space: str, check: Check, basis: str) -> Optional[set[int]]:
    """Check value rebuilt from the transversal readout, if that basis was read."""
    out = set()
    for q in check.qubits:
        m = circuit.data_record(space, q, basis)
        if m is None:
            return None
        out.add(m)
    return out


def _reads(basis_setting: str, basis: str) -> bool:
    return basis_setting in (basis, "both")


def _chain(col, circuit, code, check, rounds, first, final, extra=None, continuation_after=None):
    """Compare consecutive values of one check; ``extra[r]`` is XORed into round r."""
    prev = first
    extra = extra or {}
    for r in rounds:
        cur = {circuit.record(code, check.basis, check.face, r)}
        if prev is not None:
            cont = continuation_after is not None and r > continuation_after
            col.add(code, check.basis, check.face, r, _xor(prev, cur, extra.get(r, ())), cont)
        prev = cur
    if final is not None and prev is not None:
        r = rounds[-1] + 1
        cont = continuation_after is not None and r > continuation_after
        col.add(code, check.basis, check.face, r, _xor(prev, final, extra.get(r, ())), cont)


def _memory(circuit: Circuit, frame: str) -> list[Detector]:
    if frame != "static":
        raise ValueError("memory experiments only have a static frame")
    col = _Collector()
    for label, block in circuit.codes.items():
        for ch in block.layout.checks:
            first = set() if _reads(circuit.prep_basis[label], ch.basis) else None
            final = (
                _recon(circuit, block.space, ch, ch.basis)
                if _reads(circuit.readout_basis[label], ch.basis)
                else None
            )
            _chain(col, circuit, label, ch, block.rounds, first, final)
    return col.dets


# (dependent code, independent code) per check basis
_DEPENDENT = {"X": ("C", "T"), "Z": ("T", "C")}


def _tcnot(circuit: Circuit, frame: str) -> list[Detector]:
    g = circuit.meta["gate_round"]
    total = circuit.meta["rounds"]
    col = _Collector()
    layout = circuit.codes["C"].layout
    for basis in ("X", "Z"):
        dep, ind = _DEPENDENT[basis]
        for label in (ind, dep):
            for ch in layout.checks_of(basis):
                first = set() if _reads(circuit.prep_basis[label], basis) else None
                reads = _reads(circuit.readout_basis[label], basis)
                final = _recon(circuit, label, ch, basis) if reads else None
                rounds = tuple(range(1, total + 1))
                if label == ind or frame == "static":
                    _chain(col, circuit, label, ch, rounds, first, final)
                elif frame == "hybrid":
                    extra = {g + 1: {circuit.record(ind, basis, ch.face, g)}}
                    _chain(col, circuit, label, ch, rounds, first, final, extra)
                else:
                    _dynamic_chain(col, circuit, dep, ind, ch, g, total, first, final)
    return col.dets


def _dynamic_chain(col, circuit, dep, ind, ch, g, total, first, final):
    basis, face = ch.basis, ch.face

    def value(r):
        s = {circuit.record(dep, basis, face, r)}
        if r > g:
            s.add(circuit.record(ind, basis, face, r))
        return s

    prev = first
    for r in range(1, total + 1):
        cur = value(r)
        if prev is not None:
            col.add(dep, basis, face, r, _xor(prev, cur))
        prev = cur
    if final is not None:
        other = _recon(circuit, ind, ch, basis)
        if other is None:
            return
        col.add(dep, basis, face, total + 1, _xor(prev, final, other))


def _teleport(circuit: Circuit, frame: str, continuation: bool) -> list[Detector]:
    if frame == "dynamic":
        raise ValueError("teleportation is decoded in the static or hybrid frame")
    d = circuit.meta["gate_round"]
    layout = circuit.codes["C"].layout
    col = _Collector()
    c_prep, c_read = circuit.prep_basis["C"], circuit.readout_basis["C"]
    pre = tuple(range(1, d + 1))
    full = tuple(range(1, 2 * d + 1))
    # Z sector: target checks closed by its Z readout, control checks up to the gate.
    for ch in layout.z_checks:
        extra = {d + 1: {circuit.record("C", "Z", ch.face, d)}} if frame == "hybrid" else None
        first = set() if _reads(circuit.prep_basis["T"], "Z") else None
        _chain(col, circuit, "T", ch, pre, first, _recon(circuit, "T", ch, "Z"), extra)
    for ch in layout.z_checks:
        first = set() if _reads(c_prep, "Z") else None
        final = _recon(circuit, "C", ch, "Z") if _reads(c_read, "Z") else None
        rounds = full if continuation else pre
        _chain(col, circuit, "C", ch, rounds, first, final if continuation else None, None, d)
    # X sector: target X checks are never read out after the gate.
    t_first = set() if _reads(circuit.prep_basis["T"], "X") else None
    for ch in layout.x_checks:
        _chain(col, circuit, "T", ch, pre, t_first, None)
    for ch in layout.x_checks:
        first = set() if _reads(c_prep, "X") else None
        final = _recon(circuit, "C", ch, "X") if _reads(c_read, "X") else None
        extra = {d + 1: {circuit.record("T", "X", ch.face, d)}} if frame == "hybrid" else None
        _chain(col, circuit, "C", ch, full, first, final, extra)
    return col.dets


def _ls_xx(circuit: Circuit, frame: str) -> list[Detector]:
    if frame != "static":
        raise ValueError("lattice surgery is decoded in the static frame")
    n = circuit.meta["phase_rounds"]
    ls = circuit.meta["ls"]
    bridge_reads = circuit.meta["bridge_reads"]
    prep, read = circuit.prep_basis["L"], circuit.readout_basis["L"]
    col = _Collector()

    def patch_of(basis, face):
        for lab, lay in (("L", ls.left), ("R", ls.right)):
            ch = lay.check_at(basis, face)
            if ch is not None:
                return lab, ch
        return None, None

    def bridge_part(check):
        return {bridge_reads[q] for q in check.qubits if q in ls.bridge_qubits}

    for mch in ls.merged.checks:
        basis, face = mch.basis, mch.face
        lab, pch = patch_of(basis, face)
        only_bridge = all(q in ls.bridge_qubits for q in mch.qubits)
        prev: Optional[set[int]] = None
        if pch is not None:
            prev = set() if _reads(prep, basis) else None
            for r in range(1, n + 1):
                cur = {circuit.record(lab, basis, face, r)}
                if prev is not None:
                    col.add(lab, basis, face, r, _xor(prev, cur))
                prev = cur
            if basis == "X" and set(pch.qubits) != set(mch.qubits):
                prev = None
        elif basis == "Z" and only_bridge:
            prev = set()
        for r in range(n + 1, 2 * n + 1):
            cur = {circuit.record("LR", basis, face, r)}
            if prev is not None:
                col.add("LR", basis, face, r, _xor(prev, cur))
            prev = cur
        if pch is None:
            if basis == "Z" and only_bridge:
                col.add("LR", basis, face, 2 * n + 1, _xor(prev, bridge_part(mch)))
            continue
        # split back into the two patches
        if basis == "Z":
            prev = _xor(prev, bridge_part(mch))
        elif set(pch.qubits) != set(mch.qubits):
            prev = None
        for r in range(2 * n + 1, 3 * n + 1):
            cur = {circuit.record(lab, basis, face, r)}
            if prev is not None:
                col.add(lab, basis, face, r, _xor(prev, cur))
            prev = cur
        if _reads(read, basis):
            col.add(lab, basis, face, 3 * n + 1, _xor(prev, _recon(circuit, "S", pch, basis)))
    # Patch checks that the merged code does not contain (none for the standard layout).
    for lab, lay in (("L", ls.left), ("R", ls.right)):
        for ch in lay.checks:
            if ls.merged.check_at(ch.basis, ch.face) is None:
                raise ValueError(f"patch check {ch.basis}{ch.face} missing from the merged code")
    return col.dets


def define_detectors(circuit: Circuit, frame: str = "static", continuation: bool = True) -> DetectorSet:
    """Detectors of ``circuit`` in ``frame``.

    ``continuation`` only matters for teleportation: it adds the control's
    post-gate Z detectors, which a decoder handles in a separate stage.
    """
    if frame not in FRAMES:
        raise ValueError(f"frame must be one of {FRAMES}, got {frame!r}")
    if circuit.kind == "memory":
        dets = _memory(circuit, frame)
    elif circuit.kind == "tcnot":
        dets = _tcnot(circuit, frame)
    elif circuit.kind == "teleport":
        dets = _teleport(circuit, frame, continuation)
    elif circuit.kind == "ls_xx":
        dets = _ls_xx(circuit, frame)
    else:
        raise ValueError(f"unknown circuit kind {circuit.kind!r}")
    return DetectorSet(frame, tuple(dets), circuit.observables)


@dataclass(frozen=True)
class Partition:
    """Detector ids split into independent and dependent parts, per sector."""

    independent: dict[str, tuple[int, ...]]
    dependent: dict[str, tuple[int, ...]]


def partition_subgraphs(dets: DetectorSet, circuit: Circuit) -> Partition:
    """Independent/dependent split used by the ordered and teleportation decoders.

    tCNOT: X sector independent = target, dependent = control; Z sector the
    reverse.  Teleportation: the dependent part of the Z sector is the
    control's post-gate continuation.  Other experiments have no dependent part.
    """
    ind: dict[str, tuple[int, ...]] = {}
    dep: dict[str, tuple[int, ...]] = {}
    for basis in ("X", "Z"):
        if circuit.kind == "tcnot":
            d_code, i_code = _DEPENDENT[basis]
            ind[basis] = tuple(dets.ids(i_code, basis))
            dep[basis] = tuple(dets.ids(d_code, basis))
        elif circuit.kind == "teleport" and basis == "Z":
            ind[basis] = tuple(dets.ids(None, basis, continuation=False))
            dep[basis] = tuple(dets.ids(None, basis, continuation=True))
        else:
            ind[basis] = tuple(dets.ids(None, basis))
            dep[basis] = ()
    return Partition(ind, dep)
