import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stim_bridge import sector_ids, stim_mechanisms, to_stim
from tcnot.circuit import LatticeSurgeryLayout, build_ls_xx, build_memory, build_tcnot_gadget, build_teleportation
from tcnot.frames import define_detectors
from tcnot.lattice import build_rotated_code
from tcnot.noise import NoiseParams, apply_noise
from tcnot.sampler import (
    CHUNK_SHOTS,
    Sampler,
    bits_of,
    build_dem,
    compute_symptoms,
    merge_probability,
    propagate_fault,
)

L3 = build_rotated_code(3)
CASES = {
    "memory": (build_memory(L3, 3), "static"),
    "2scqm": (build_memory(L3, 6, copies=2), "static"),
    "tcnot_static": (build_tcnot_gadget(L3), "static"),
    "tcnot_dynamic": (build_tcnot_gadget(L3), "dynamic"),
    "tcnot_hybrid": (build_tcnot_gadget(L3), "hybrid"),
    "teleport": (build_teleportation(L3), "hybrid"),
    "ls_xx": (build_ls_xx(L3, LatticeSurgeryLayout.build(3)), "static"),
}
NOISE = [
    NoiseParams(0.01),
    NoiseParams(0.02, r_e=0.5, erasure_kind="biased"),
    NoiseParams(0.02, r_e=1.0, erasure_kind="conventional"),
]


@given(st.integers(0, 2**40))
def test_bits_of(x):
    assert sum(1 << b for b in bits_of(x)) == x


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_merge_probability_is_xor(a, b, c):
    assert math.isclose(merge_probability(a, b), merge_probability(b, a))
    assert math.isclose(
        merge_probability(merge_probability(a, b), c), merge_probability(a, merge_probability(b, c)), abs_tol=1e-12
    )
    assert merge_probability(a, 0.0) == a


PHEN = NoiseParams(0.02, model="phenomenological")
SWEEP_CASES = [(n, p) for n in CASES for p in NOISE] + [(n, PHEN) for n in CASES if CASES[n][0].kind in ("memory", "tcnot")]


@pytest.mark.parametrize("name,params", SWEEP_CASES)
def test_backward_sweep_matches_forward_propagation(name, params):
    circuit, frame = CASES[name]
    dets = define_detectors(circuit, frame)
    noisy = apply_noise(circuit, params)
    table = compute_symptoms(noisy, dets)
    nd = dets.num_detectors
    rng = random.Random(0)
    picks = rng.sample(range(len(noisy.sites)), min(40, len(noisy.sites)))
    for i in picks:
        site = noisy.sites[i]
        for out, row in zip(site.outcomes, table.row_of[i]):
            dset, oset = propagate_fault(circuit, out, dets, site.position)
            bits = set(bits_of(table.total[row]))
            assert {b for b in bits if b < nd} == dset
            assert {b - nd for b in bits if b >= nd} == oset


def _in_basis(name, basis):
    if name == "memory":
        return build_memory(L3, 3, basis)
    if name == "2scqm":
        return build_memory(L3, 6, basis, copies=2)
    if name.startswith("tcnot"):
        return build_tcnot_gadget(L3, 3, 3, basis)
    if name == "teleport":
        return build_teleportation(L3, basis)
    return build_ls_xx(L3, LatticeSurgeryLayout.build(3), None, basis)


@pytest.mark.parametrize("name", ["memory", "2scqm", "tcnot_static", "tcnot_dynamic", "tcnot_hybrid", "teleport", "ls_xx"])
@pytest.mark.parametrize("sector", ["X", "Z"])
def test_dem_matches_stim(name, sector):
    frame = CASES[name][1]
    circuit = _in_basis(name, sector)
    dets = define_detectors(circuit, frame)
    p = 0.01
    ours = {}
    for m in build_dem(apply_noise(circuit, NoiseParams(p)), dets).sector(sector):
        ours[(m.detectors, m.observables)] = m.probability
    dmap, omap = sector_ids(dets, sector)
    mapped = {
        (frozenset(dmap[x] for x in ds), frozenset(omap[x] for x in os_)): q for (ds, os_), q in ours.items()
    }
    theirs = stim_mechanisms(to_stim(circuit, dets, p, sector))
    assert set(mapped) == set(theirs)
    # stim rewrites each DEPOLARIZE2 as independent channels; we XOR the 15
    # disjoint branches, so merged rates agree to O(p^2) only.
    for k, q in mapped.items():
        assert math.isclose(q, theirs[k], rel_tol=0.02), k


def test_detector_marginals_match_dem():
    circuit, frame = CASES["tcnot_hybrid"]
    dets = define_detectors(circuit, frame)
    noisy = apply_noise(circuit, NoiseParams(0.02))
    dem = build_dem(noisy, dets)
    prod = np.ones(dets.num_detectors)
    for m in dem.mechanisms:
        for x in m.detectors:
            prod[x] *= 1 - 2 * m.probability
    expect = (1 - prod) / 2
    n = 20 * CHUNK_SHOTS
    got = np.concatenate([b.detectors for b in Sampler(noisy, dets).batches(n, seed=3)]).mean(axis=0)
    sigma = np.sqrt(expect * (1 - expect) / n)
    assert np.all(np.abs(got - expect) < 5 * sigma + 1e-4)


def test_observable_marginal_matches_dem():
    circuit, frame = CASES["memory"]
    dets = define_detectors(circuit, frame)
    noisy = apply_noise(circuit, NoiseParams(0.03))
    dem = build_dem(noisy, dets)
    prod = np.ones(dets.num_observables)
    for m in dem.mechanisms:
        for x in m.observables:
            prod[x] *= 1 - 2 * m.probability
    expect = (1 - prod) / 2
    n = 20 * CHUNK_SHOTS
    got = np.concatenate([b.observables for b in Sampler(noisy, dets).batches(n, seed=5)]).mean(axis=0)
    assert np.all(np.abs(got - expect) < 5 * np.sqrt(expect * (1 - expect) / n))


def test_erasure_heralds_sampled_at_rate():
    circuit, frame = CASES["memory"]
    dets = define_detectors(circuit, frame)
    noisy = apply_noise(circuit, NoiseParams(0.05, r_e=1.0, erasure_kind="biased"))
    n = 10 * CHUNK_SHOTS
    h = np.concatenate([b.heralds for b in Sampler(noisy, dets).batches(n, seed=1)])
    rate = h.sum() / (n * len(noisy.sites))
    assert abs(rate - 0.05) < 5 * math.sqrt(0.05 / (n * len(noisy.sites)))
    # exactly one leg per erased gate under the default convention
    pairs = h.reshape(n, len(noisy.sites), 2)
    assert pairs.sum(axis=2).max() <= 1


def test_shots_do_not_depend_on_request_size():
    circuit, frame = CASES["memory"]
    dets = define_detectors(circuit, frame)
    s = Sampler(apply_noise(circuit, NoiseParams(0.02)), dets)
    a = np.concatenate([b.detectors for b in s.batches(3000, seed=9)])
    b = np.concatenate([b.detectors for b in s.batches(5000, seed=9)])
    assert a.shape[0] == 3000
    assert np.array_equal(a, b[:3000])
    c = next(s.batches(5000, seed=9, start_chunk=2))
    assert c.shot_offset == 2 * CHUNK_SHOTS
    assert np.array_equal(c.detectors, b[2 * CHUNK_SHOTS : 3 * CHUNK_SHOTS])
    other = np.concatenate([b.detectors for b in s.batches(3000, seed=10)])
    assert not np.array_equal(a, other)


def test_hyperedges_by_frame():
    tc = build_dem(apply_noise(*[CASES["tcnot_hybrid"][0]], NoiseParams(0.01)), define_detectors(*CASES["tcnot_hybrid"]))
    assert len(tc.hyperedges) >= 1
    for m in tc.hyperedges:
        assert len(m.detectors) >= 3 and any(len(c[0]) > 2 for c in m.components)
    tel = CASES["teleport"][0]
    noisy = apply_noise(tel, NoiseParams(0.01))
    assert build_dem(noisy, define_detectors(tel, "hybrid", continuation=False)).hyperedges == []
    # with the control's continuation rounds, the only hyperedges straddle the
    # two decoding stages and split into edges there
    dets = define_detectors(tel, "hybrid")
    cont = set(dets.ids(continuation=True))
    for m in build_dem(noisy, dets).hyperedges:
        assert len(m.detectors - cont) <= 2 and len(m.detectors & cont) <= 2


def test_mechanism_components_xor_to_total():
    circuit, frame = CASES["tcnot_static"]
    dem = build_dem(apply_noise(circuit, NoiseParams(0.01)), define_detectors(circuit, frame))
    for m in dem.mechanisms:
        ds, os_ = frozenset(), frozenset()
        for cd, co in m.components:
            ds ^= cd
            os_ ^= co
        assert (ds, os_) == (m.detectors, m.observables)


def test_dem_dump_format():
    circuit, frame = CASES["memory"]
    dem = build_dem(apply_noise(circuit, NoiseParams(0.02, r_e=0.5, erasure_kind="biased")), define_detectors(circuit, frame))
    lines = dem.dump().splitlines()
    assert len(lines) == len(dem.mechanisms)
    assert any(" E" in line for line in lines)
    for line in lines:
        toks = line.split()
        assert 0 < float(toks[0]) <= 0.5 and toks[1] in "XZ"


def test_propagate_fault_rejects_bad_position():
    circuit, frame = CASES["memory"]
    dets = define_detectors(circuit, frame)
    site = apply_noise(circuit, NoiseParams(0.01)).sites[0]
    with pytest.raises(ValueError):
        propagate_fault(circuit, site, dets)
    with pytest.raises(ValueError):
        propagate_fault(circuit, site.outcomes[0], dets, len(circuit.ops))
