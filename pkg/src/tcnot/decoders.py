"""Decoders for tCNOT experiments, built as sequences of matching passes.

Every strategy is a list of passes.  A pass matches the defects of one
detector subset and reports "fault ids": the first block of ids are
observable parities, the rest are detectors of later passes that the matched
errors also flip (their *effects*).

* ``mwpm``: one pass per sector over all detectors.
* ``single_update``: dynamic frame; the independent and dependent graphs are
  matched separately and the dependent logical status picks up the
  independent prediction.
* ``ordered``: static frame; the independent graph is matched first, its
  correction is pushed into the dependent graph's detectors and logicals,
  then the dependent graph is matched on the residual.
* ``teleport``: hybrid frame; the Z sector runs as ordered decoding with the
  control's post-gate rounds as the dependent stage, the X sector is a
  single pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .circuit import Circuit
from .frames import DetectorSet, Partition, partition_subgraphs
from .matching import DecodingGraph, Edge, Matcher
from .sampler import DetectorErrorModel, SampleBatch, merge_probability

STRATEGIES = ("mwpm", "single_update", "ordered", "teleport")
FRAME_OF = {"mwpm": "static", "single_update": "dynamic", "ordered": "static", "teleport": "hybrid"}


class HyperedgeError(RuntimeError):
    """A mechanism could not be reduced to edges where the strategy requires it."""


@dataclass
class DecoderPass:
    name: str
    sector: str
    phase: int
    graph: DecodingGraph
    contributions: np.ndarray  # (num observable fault ids, num observables) uint8
    effect_detectors: tuple[int, ...]  # global detector ids flipped by fault ids after the observables
    dropped: int = 0
    _matcher: Optional[Matcher] = field(default=None, repr=False)

    @property
    def matcher(self) -> Matcher:
        if self._matcher is None:
            self._matcher = Matcher(self.graph)
        return self._matcher

    @property
    def detector_ids(self) -> np.ndarray:
        return np.asarray(self.graph.detector_ids, dtype=np.int64)


@dataclass
class DecoderGraphs:
    strategy: str
    dem: DetectorErrorModel
    partition: Partition
    passes: tuple[DecoderPass, ...]

    @property
    def dets(self) -> DetectorSet:
        return self.dem.detectors


@dataclass
class DecodeOutcome:
    predicted: np.ndarray  # (shots, observables)
    true_flips: np.ndarray
    propagated: np.ndarray  # observable flips contributed by independent passes (L')
    trace: tuple[str, ...]

    @property
    def failures(self) -> np.ndarray:
        return self.predicted ^ self.true_flips

    def sector_failures(self, dets: DetectorSet, sector: str) -> np.ndarray:
        cols = dets.sector_observables(sector)
        if not cols:
            return np.zeros(self.predicted.shape[0], dtype=bool)
        return self.failures[:, cols].any(axis=1)


def _obs_specs(strategy: str, dets: DetectorSet, sector: str, role: str):
    """(detected observable set, contributed observable set) for each observable fault id."""
    names = {o.name: k for k, o in enumerate(dets.observables)}
    obs = [k for k in dets.sector_observables(sector)]
    if strategy != "single_update":
        return [({k}, {k}) for k in obs]
    updates = {k: {names[u] for u in dets.observables[k].frame_update if u in names} for k in obs}
    dependent = {k for k in obs if updates[k]}
    if role == "ind":
        return [({k}, {k} | {j for j in dependent if k in updates[j]}) for k in obs if k not in dependent]
    return [({k} | updates[k], {k}) for k in obs if k in dependent]


class _EdgeAccumulator:
    """Merge units by detector pair; keep the most likely (fault ids) class as representative."""

    def __init__(self):
        self.groups: dict[tuple, dict[tuple, list]] = {}

    def add(self, key, label, p, herald, source):
        g = self.groups.setdefault(key, {})
        entry = g.get(label)
        if entry is None:
            entry = g[label] = [0.0, 0.0, set(), []]
        if herald is None:
            entry[0] = merge_probability(entry[0], p)
        else:
            entry[2].add(herald)
        entry[1] = merge_probability(entry[1], p)
        entry[3].append(source)

    def representative(self, key):
        g = self.groups[key]
        return max(g.items(), key=lambda kv: (kv[1][1], kv[0]))[0]

    def edges(self, to_fault_ids):
        out = []
        for key, g in sorted(self.groups.items(), key=lambda kv: (kv[0][0], -1 if kv[0][1] is None else kv[0][1])):
            label = self.representative(key)
            p = 0.0
            heralds: set = set()
            sources: list = []
            for entry in g.values():
                p = merge_probability(p, entry[0])
                heralds |= entry[2]
                sources += entry[3]
            u, v = key
            out.append(
                Edge(u, v, p, frozenset(to_fault_ids(label)), tuple(sorted(set(sources))), frozenset(heralds))
            )
        return out


def _units(mech, restrictions):
    if all(len(mech.detectors & r) <= 2 for r in restrictions):
        return [(mech.detectors, mech.observables)]
    return list(mech.components)


def _build_sector(strategy, dem, sector, ind, dep, phase0):
    dets = dem.detectors
    ind_set, dep_set = frozenset(ind), frozenset(dep)
    ordered = strategy in ("ordered", "teleport") and bool(dep)
    specs_ind = _obs_specs(strategy, dets, sector, "ind")
    specs_dep = _obs_specs(strategy, dets, sector, "dep")

    def obs_label(obs, specs):
        return tuple(i for i, (detect, _) in enumerate(specs) if len(obs & detect) % 2)

    loc_ind = {g: i for i, g in enumerate(ind)}
    loc_dep = {g: i for i, g in enumerate(dep)}

    def key_of(ds, loc):
        nodes = sorted(loc[x] for x in ds)
        return (nodes[0], nodes[1] if len(nodes) == 2 else None)

    acc_ind, acc_dep = _EdgeAccumulator(), _EdgeAccumulator()
    dropped = {"ind": 0, "dep": 0}
    units = []
    for mech in dem.sector(sector):
        for ds, os_ in _units(mech, (ind_set, dep_set)):
            units.append((mech, ds, os_))
            di = ds & ind_set
            if not di:
                continue
            if len(di) > 2:
                dropped["ind"] += 1
                continue
            eff = tuple(sorted(ds & dep_set)) if ordered else ()
            acc_ind.add(key_of(di, loc_ind), (obs_label(os_, specs_ind), eff), mech.probability, mech.erasure_group, mech.id)

    effect_dets = sorted({x for g in acc_ind.groups.values() for (_, eff) in g for x in eff})
    eff_pos = {x: len(specs_ind) + i for i, x in enumerate(effect_dets)}
    obs_of_label = {}
    for key, g in acc_ind.groups.items():
        obs_of_label[key] = acc_ind.representative(key)

    if dep:
        for mech, ds, os_ in units:
            dd = set(ds & dep_set)
            obs = set(os_)
            di = ds & ind_set
            if ordered and di and len(di) <= 2:
                (ids, eff) = obs_of_label[key_of(di, loc_ind)]
                dd ^= set(eff)
                for i in ids:
                    obs ^= specs_ind[i][1]
            if not dd:
                continue
            if len(dd) > 2:
                dropped["dep"] += 1
                continue
            acc_dep.add(key_of(dd, loc_dep), (obs_label(frozenset(obs), specs_dep), ()), mech.probability, mech.erasure_group, mech.id)

    def contrib(specs):
        m = np.zeros((len(specs), dets.num_observables), dtype=np.uint8)
        for i, (_, c) in enumerate(specs):
            for k in c:
                m[i, k] = 1
        return m

    passes = []
    g_ind = DecodingGraph(
        tuple(ind),
        tuple(acc_ind.edges(lambda lab: lab[0] + tuple(eff_pos[x] for x in lab[1]))),
        len(specs_ind) + len(effect_dets),
    )
    role = "ind" if dep else "all"
    passes.append(DecoderPass(f"{sector}:{role}", sector, phase0, g_ind, contrib(specs_ind), tuple(effect_dets), dropped["ind"]))
    if dep:
        g_dep = DecodingGraph(tuple(dep), tuple(acc_dep.edges(lambda lab: lab[0])), len(specs_dep))
        passes.append(DecoderPass(f"{sector}:dep", sector, phase0 + 1, g_dep, contrib(specs_dep), (), dropped["dep"]))
    return passes


def build_decoder_graphs(strategy: str, dem: DetectorErrorModel, circuit: Circuit) -> DecoderGraphs:
    if strategy not in STRATEGIES:
        raise ValueError(f"decoder must be one of {STRATEGIES}, got {strategy!r}")
    dets = dem.detectors
    if strategy == "mwpm" and circuit.kind not in ("memory", "ls_xx"):
        raise ValueError("plain MWPM is for memory and lattice-surgery circuits")
    if strategy in ("single_update", "ordered") and circuit.kind != "tcnot":
        raise ValueError(f"{strategy} decoding needs a tCNOT circuit")
    if strategy == "teleport" and circuit.kind != "teleport":
        raise ValueError("teleport decoding needs a teleportation circuit")
    if dets.frame != FRAME_OF[strategy]:
        raise ValueError(f"{strategy} decoding needs the {FRAME_OF[strategy]} frame, got {dets.frame}")
    part = partition_subgraphs(dets, circuit)
    passes = []
    for sector in ("X", "Z"):
        ind, dep = part.independent[sector], part.dependent[sector]
        if strategy == "mwpm":
            ind, dep = tuple(sorted(ind + dep)), ()
        if not ind and not dep:
            continue
        passes += _build_sector(strategy, dem, sector, ind, dep, 0)
    if strategy == "teleport":
        bad = sum(p.dropped for p in passes if p.name != "Z:dep")
        if bad:
            raise HyperedgeError(f"{bad} mechanisms do not reduce to edges in the teleportation stages")
    return DecoderGraphs(strategy, dem, part, tuple(passes))


def decode(graphs: DecoderGraphs, batch: SampleBatch, matchers: Optional[Sequence[Matcher]] = None) -> DecodeOutcome:
    """Run all passes in order; later passes see the effects of earlier ones.

    ``matchers`` (one per pass, same order as ``graphs.passes``) lets threads
    use private pymatching instances.
    """
    n = batch.num_shots
    nobs = graphs.dets.num_observables
    syndrome = batch.detectors.astype(np.uint8, copy=True)
    predicted = np.zeros((n, nobs), dtype=np.uint8)
    propagated = np.zeros((n, nobs), dtype=np.uint8)
    trace = []
    ms = [ps.matcher for ps in graphs.passes] if matchers is None else list(matchers)
    for i in sorted(range(len(graphs.passes)), key=lambda i: graphs.passes[i].phase):
        ps = graphs.passes[i]
        out = ms[i].decode_batch(syndrome[:, ps.detector_ids], batch.heralds)
        k = ps.contributions.shape[0]
        flips = (out[:, :k].astype(np.int64) @ ps.contributions.astype(np.int64)) & 1
        predicted ^= flips.astype(np.uint8)
        if ps.effect_detectors:
            syndrome[:, np.asarray(ps.effect_detectors)] ^= out[:, k : k + len(ps.effect_detectors)]
            propagated ^= flips.astype(np.uint8)
        trace.append(ps.name)
    return DecodeOutcome(predicted, batch.observables.astype(np.uint8), propagated, tuple(trace))


def _expect(graphs: DecoderGraphs, strategy: str):
    if graphs.strategy != strategy:
        raise ValueError(f"graphs were built for {graphs.strategy}, not {strategy}")


def decode_scqm(graphs: DecoderGraphs, batch: SampleBatch) -> DecodeOutcome:
    _expect(graphs, "mwpm")
    return decode(graphs, batch)


def decode_single_update(graphs: DecoderGraphs, batch: SampleBatch) -> DecodeOutcome:
    _expect(graphs, "single_update")
    return decode(graphs, batch)


def decode_ordered(graphs: DecoderGraphs, batch: SampleBatch) -> DecodeOutcome:
    _expect(graphs, "ordered")
    return decode(graphs, batch)


def decode_teleportation(graphs: DecoderGraphs, batch: SampleBatch) -> DecodeOutcome:
    _expect(graphs, "teleport")
    return decode(graphs, batch)


def single_fault_batch(dem: DetectorErrorModel, mechanisms=None) -> SampleBatch:
    """One shot per mechanism, with exactly that mechanism fired."""
    mechs = dem.mechanisms if mechanisms is None else mechanisms
    n = len(mechs)
    det = np.zeros((n, dem.num_detectors), dtype=np.uint8)
    obs = np.zeros((n, dem.num_observables), dtype=np.uint8)
    for i, m in enumerate(mechs):
        det[i, list(m.detectors)] = 1
        obs[i, list(m.observables)] = 1
    return SampleBatch(0, 0, det, obs, np.zeros((n, 0), dtype=np.uint8))
