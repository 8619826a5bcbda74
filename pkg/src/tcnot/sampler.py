"""Fault propagation, detector error models and Monte Carlo sampling.

Symptoms of every fault outcome are obtained in one backward sweep over the
circuit: for each qubit we keep the set of detector/observable columns an X
(resp. Z) error at the current point would flip, as a Python-int bitset.
``propagate_fault`` pushes a single fault forward instead and serves as the
independent check of the sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
import scipy.sparse as sp

from .circuit import Circuit
from .frames import DetectorSet
from .noise import FaultOutcome, FaultSite, NoisyCircuit

CHUNK_SHOTS = 1024


def bits_of(x: int) -> list[int]:
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


def merge_probability(p1: float, p2: float) -> float:
    """Probability that exactly one of two independent mechanisms fires."""
    return p1 + p2 - 2.0 * p1 * p2


def _columns(circuit: Circuit, dets: DetectorSet) -> list[int]:
    col = [0] * circuit.num_measurements
    for det in dets.detectors:
        for m in det.measurements:
            col[m] ^= 1 << det.id
    base = dets.num_detectors
    for k, obs in enumerate(dets.observables):
        for m in obs.measurements:
            col[m] ^= 1 << (base + k)
    return col


def _sector_masks(dets: DetectorSet) -> dict[str, int]:
    masks = {"X": 0, "Z": 0}
    for det in dets.detectors:
        masks[det.basis] |= 1 << det.id
    base = dets.num_detectors
    for k, obs in enumerate(dets.observables):
        masks[obs.sector] |= 1 << (base + k)
    return masks


@dataclass
class SymptomTable:
    """Column bitsets of every (site, outcome), plus their single-qubit parts.

    ``parts[row]`` lists the symptoms of each single-qubit X or Z component
    and of each direct measurement flip; their XOR is ``total[row]``.
    """

    num_detectors: int
    num_observables: int
    row_of: list[list[int]]  # site index -> outcome -> row
    total: list[int]
    parts: list[tuple[int, ...]]
    heralds: list[Optional[int]]

    @property
    def num_columns(self) -> int:
        return self.num_detectors + self.num_observables


def compute_symptoms(noisy: NoisyCircuit, dets: DetectorSet) -> SymptomTable:
    circuit = noisy.circuit
    col = _columns(circuit, dets)
    nq = circuit.num_qubits
    sx = [0] * nq  # columns flipped by an X error here
    sz = [0] * nq
    meas_of_op = {}
    j = 0
    for k, op in enumerate(circuit.ops):
        if op.name.startswith("measure"):
            meas_of_op[k] = j
            j += 1
    by_pos: dict[int, list[FaultSite]] = {}
    for s in noisy.sites:
        if not -1 <= s.position < len(circuit.ops):
            raise ValueError(f"fault site {s.index} outside the circuit")
        by_pos.setdefault(s.position, []).append(s)

    row_of: list[list[int]] = [[] for _ in noisy.sites]
    total: list[int] = []
    parts: list[tuple[int, ...]] = []
    heralds: list[Optional[int]] = []

    def capture(site: FaultSite):
        rows = []
        for out in site.outcomes:
            ps = []
            for q, P in out.paulis:
                if P in ("X", "Y"):
                    ps.append(sx[q])
                if P in ("Z", "Y"):
                    ps.append(sz[q])
            for m in out.flips:
                ps.append(col[m])
            t = 0
            for v in ps:
                t ^= v
            rows.append(len(total))
            total.append(t)
            parts.append(tuple(v for v in ps if v))
            heralds.append(out.herald)
        row_of[site.index] = rows

    for k in range(len(circuit.ops) - 1, -1, -1):
        for s in by_pos.get(k, ()):
            capture(s)
        op = circuit.ops[k]
        name = op.name
        if name == "cnot":
            c, t = op.qubits
            sx[c] ^= sx[t]
            sz[t] ^= sz[c]
        elif name == "measure_z":
            sx[op.qubits[0]] ^= col[meas_of_op[k]]
        elif name == "measure_x":
            sz[op.qubits[0]] ^= col[meas_of_op[k]]
        else:  # prepare_z / prepare_x
            q = op.qubits[0]
            sx[q] = 0
            sz[q] = 0
    for s in by_pos.get(-1, ()):
        capture(s)
    return SymptomTable(dets.num_detectors, dets.num_observables, row_of, total, parts, heralds)


def propagate_fault(
    circuit: Circuit, fault: FaultSite | FaultOutcome, dets: DetectorSet, position: Optional[int] = None
) -> tuple[frozenset[int], frozenset[int]]:
    """Push one Pauli fault forward through the circuit (reference route).

    ``fault`` is a single-outcome FaultSite or a FaultOutcome together with
    the op ``position`` it follows.
    """
    if isinstance(fault, FaultSite):
        if len(fault.outcomes) != 1:
            raise ValueError("propagate_fault needs a site with a single outcome")
        position = fault.position
        fault = fault.outcomes[0]
    if position is None or not -1 <= position < len(circuit.ops):
        raise ValueError("fault position outside the circuit")
    x = np.zeros(circuit.num_qubits, dtype=bool)
    z = np.zeros(circuit.num_qubits, dtype=bool)
    for q, P in fault.paulis:
        if P in ("X", "Y"):
            x[q] ^= True
        if P in ("Z", "Y"):
            z[q] ^= True
    flipped = set(fault.flips)
    midx = sum(1 for op in circuit.ops[: position + 1] if op.name.startswith("measure"))
    for op in circuit.ops[position + 1 :]:
        if op.name == "cnot":
            c, t = op.qubits
            x[t] ^= x[c]
            z[c] ^= z[t]
        elif op.name.startswith("prepare"):
            x[op.qubits[0]] = z[op.qubits[0]] = False
        else:
            q = op.qubits[0]
            if (op.name == "measure_z" and x[q]) or (op.name == "measure_x" and z[q]):
                flipped ^= {midx}
            midx += 1
    detset = frozenset(d.id for d in dets.detectors if len(flipped.intersection(d.measurements)) % 2)
    obsset = frozenset(
        k for k, o in enumerate(dets.observables) if len(flipped.intersection(o.measurements)) % 2
    )
    return detset, obsset


@dataclass(frozen=True)
class FaultMechanism:
    """A merged, single-sector fault mechanism.

    ``components`` are the (detectors, observables) of its single-qubit
    parts; they XOR to the mechanism's own sets.
    """

    id: int
    sector: str
    detectors: frozenset[int]
    observables: frozenset[int]
    probability: float
    components: tuple[tuple[frozenset[int], frozenset[int]], ...]
    source_sites: tuple[int, ...]
    erasure_group: Optional[int] = None
    hyperedge: bool = False


@dataclass
class DetectorErrorModel:
    detectors: DetectorSet
    mechanisms: tuple[FaultMechanism, ...]

    @property
    def num_detectors(self) -> int:
        return self.detectors.num_detectors

    @property
    def num_observables(self) -> int:
        return self.detectors.num_observables

    @property
    def hyperedges(self) -> list[FaultMechanism]:
        return [m for m in self.mechanisms if m.hyperedge]

    def sector(self, s: str) -> list[FaultMechanism]:
        return [m for m in self.mechanisms if m.sector == s]

    def dump(self) -> str:
        """``p D.. L.. [H] [E<herald>]``, one mechanism per line, sorted."""
        lines = []
        for m in sorted(
            self.mechanisms, key=lambda m: (m.sector, sorted(m.detectors), sorted(m.observables), m.erasure_group or -1)
        ):
            toks = [f"{m.probability:.6e}", m.sector]
            toks += [f"D{i}" for i in sorted(m.detectors)]
            toks += [f"L{i}" for i in sorted(m.observables)]
            if m.hyperedge:
                toks.append("H")
            if m.erasure_group is not None:
                toks.append(f"E{m.erasure_group}")
            lines.append(" ".join(toks))
        return "\n".join(lines) + ("\n" if lines else "")


def _split(bitset: int, nd: int) -> tuple[frozenset[int], frozenset[int]]:
    b = bits_of(bitset)
    return frozenset(i for i in b if i < nd), frozenset(i - nd for i in b if i >= nd)


def build_dem(noisy: NoisyCircuit, dets: DetectorSet, table: Optional[SymptomTable] = None) -> DetectorErrorModel:
    """Per-sector mechanisms, merged over identical (detectors, observables, herald)."""
    table = compute_symptoms(noisy, dets) if table is None else table
    masks = _sector_masks(dets)
    nd = dets.num_detectors
    acc: dict[tuple, list] = {}
    for site in noisy.sites:
        for out, row in zip(site.outcomes, table.row_of[site.index]):
            p = site.probability * out.probability
            if p <= 0:
                continue
            for sector in ("X", "Z"):
                sym = table.total[row] & masks[sector]
                if not sym:
                    continue
                key = (sector, sym, table.heralds[row])
                comps = tuple(v & masks[sector] for v in table.parts[row] if v & masks[sector])
                entry = acc.get(key)
                if entry is None:
                    acc[key] = [p, comps, [site.index]]
                else:
                    entry[0] = merge_probability(entry[0], p)
                    if entry[2][-1] != site.index:
                        entry[2].append(site.index)
                    if _undecomposable(entry[1], nd) and not _undecomposable(comps, nd):
                        entry[1] = comps
    mechs = []
    for (sector, sym, herald), (p, comps, srcs) in acc.items():
        dset, oset = _split(sym, nd)
        components = tuple(_split(c, nd) for c in comps)
        hyper = len(dset) >= 3 and _undecomposable(comps, nd)
        mechs.append(
            FaultMechanism(len(mechs), sector, dset, oset, p, components, tuple(srcs), herald, hyper)
        )
    return DetectorErrorModel(dets, tuple(mechs))


def _undecomposable(comps: tuple[int, ...], nd: int) -> bool:
    mask = (1 << nd) - 1
    return any(bin(c & mask).count("1") > 2 for c in comps)


@dataclass
class SampleBatch:
    """Shots ``shot_offset .. shot_offset + n`` of one seeded stream."""

    seed: int
    shot_offset: int
    detectors: np.ndarray  # (n, num_detectors) uint8
    observables: np.ndarray  # (n, num_observables) uint8
    heralds: np.ndarray  # (n, num_heralds) uint8

    @property
    def num_shots(self) -> int:
        return self.detectors.shape[0]

    def sample(self, i: int) -> "DetectionSample":
        return DetectionSample(
            self.detectors[i], self.heralds[i], self.observables[i], self.shot_offset + i, self.seed
        )


@dataclass(frozen=True)
class DetectionSample:
    detector_bits: np.ndarray
    herald_bits: np.ndarray
    true_observable_flips: np.ndarray
    shot_index: int
    seed: int


@dataclass
class Sampler:
    """Exact fault-site sampler over a precomputed symptom matrix.

    Shots come in fixed chunks of ``CHUNK_SHOTS``, each with its own RNG
    stream derived from ``(seed, chunk index)``, so a shot's bits never depend
    on how many shots were requested or on how chunks are scheduled.
    """

    noisy: NoisyCircuit
    dets: DetectorSet
    table: Optional[SymptomTable] = None
    _groups: list = field(default_factory=list, repr=False)
    _matrix: Optional[sp.csr_matrix] = field(default=None, repr=False)
    _herald_of_row: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.table is None:
            self.table = compute_symptoms(self.noisy, self.dets)
        t = self.table
        ncols = t.num_columns
        indptr = [0]
        indices: list[int] = []
        for v in t.total:
            b = bits_of(v)
            indices.extend(b)
            indptr.append(len(indices))
        data = np.ones(len(indices), dtype=np.uint8)
        self._matrix = sp.csr_matrix(
            (data, np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
            shape=(len(t.total), ncols),
        )
        self._herald_of_row = np.array([-1 if h is None else h for h in t.heralds], dtype=np.int64)
        groups: dict[tuple, list[int]] = {}
        for s in self.noisy.sites:
            if s.probability <= 0:
                continue
            key = (s.probability, tuple(o.probability for o in s.outcomes))
            groups.setdefault(key, []).append(s.index)
        self._groups = []
        for (p, probs), idx in sorted(groups.items()):
            rows = np.array([t.row_of[i] for i in idx], dtype=np.int64)
            self._groups.append((p, np.asarray(probs) / sum(probs), rows))

    def _chunk(self, seed: int, chunk: int) -> SampleBatch:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chunk,)))
        n = CHUNK_SHOTS
        shots_all = []
        rows_all = []
        for p, probs, rows in self._groups:
            m = rows.shape[0]
            total = m * n
            k = rng.binomial(total, p)
            if k == 0:
                continue
            pos = rng.choice(total, size=k, replace=False, shuffle=False)
            shot, site = np.divmod(pos, m)
            if len(probs) == 1:
                out = np.zeros(k, dtype=np.int64)
            else:
                out = rng.choice(len(probs), size=k, p=probs)
            shots_all.append(shot)
            rows_all.append(rows[site, out])
        nd, no = self.dets.num_detectors, self.dets.num_observables
        nh = self.noisy.num_heralds
        heralds = np.zeros((n, nh), dtype=np.uint8)
        if shots_all:
            shot = np.concatenate(shots_all)
            rows = np.concatenate(rows_all)
            fire = sp.csr_matrix(
                (np.ones(len(shot), dtype=np.uint8), (shot, rows)), shape=(n, self._matrix.shape[0])
            )
            bits = (fire @ self._matrix).toarray() & 1
            h = self._herald_of_row[rows]
            sel = h >= 0
            heralds[shot[sel], h[sel]] = 1
        else:
            bits = np.zeros((n, nd + no), dtype=np.uint8)
        bits = bits.astype(np.uint8)
        return SampleBatch(seed, chunk * n, bits[:, :nd], bits[:, nd:], heralds)

    def batches(self, n_shots: int, seed: int, start_chunk: int = 0) -> Iterator[SampleBatch]:
        if n_shots < 1:
            raise ValueError("n_shots must be >= 1")
        n_chunks = -(-n_shots // CHUNK_SHOTS)
        for c in range(start_chunk, n_chunks):
            b = self._chunk(seed, c)
            keep = min(CHUNK_SHOTS, n_shots - c * CHUNK_SHOTS)
            if keep < CHUNK_SHOTS:
                b = SampleBatch(b.seed, b.shot_offset, b.detectors[:keep], b.observables[:keep], b.heralds[:keep])
            yield b

    def chunk(self, seed: int, index: int) -> SampleBatch:
        return self._chunk(seed, index)


def sample_shots(noisy: NoisyCircuit, dets: DetectorSet, n_shots: int, seed: int) -> Iterator[DetectionSample]:
    """Per-shot stream; see ``Sampler.batches`` for the batched form."""
    for batch in Sampler(noisy, dets).batches(n_shots, seed):
        for i in range(batch.num_shots):
            yield batch.sample(i)
