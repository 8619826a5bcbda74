import pytest

from tcnot.circuit import LatticeSurgeryLayout, build_ls_xx, build_memory, build_tcnot_gadget, build_teleportation
from tcnot.frames import define_detectors, partition_subgraphs
from tcnot.lattice import build_rotated_code

L3 = build_rotated_code(3)


def test_memory_counts():
    dets = define_detectors(build_memory(L3, 3))
    # 8 checks, 3 rounds plus the readout comparison each
    assert dets.num_detectors == 8 * 4
    assert len(dets.ids(basis="X")) == len(dets.ids(basis="Z")) == 16
    assert [d.id for d in dets.detectors] == list(range(dets.num_detectors))


def test_single_basis_memory_drops_other_sector():
    dets = define_detectors(build_memory(L3, 3, "Z"))
    # X checks are random at first and never read out, so only round-to-round pairs remain
    assert len(dets.ids(basis="X")) == 4 * 2
    assert len(dets.ids(basis="Z")) == 4 * 4
    assert [o.name for o in dets.observables] == ["logical_Z_M0"]


def test_frames_only_change_dependent_checks():
    c = build_tcnot_gadget(L3)
    static = define_detectors(c, "static")
    g = c.meta["gate_round"]
    for frame in ("dynamic", "hybrid"):
        other = define_detectors(c, frame)
        assert other.num_detectors == static.num_detectors
        for a, b in zip(static.detectors, other.detectors):
            assert (a.code, a.basis, a.face, a.round) == (b.code, b.basis, b.face, b.round)
            dependent = (a.basis, a.code) in {("X", "C"), ("Z", "T")}
            if a.measurements != b.measurements:
                assert dependent and a.round > g
                if frame == "hybrid":
                    assert a.round == g + 1


def test_partition_is_disjoint_cover():
    for c, frame in (
        (build_tcnot_gadget(L3), "static"),
        (build_teleportation(L3), "hybrid"),
        (build_ls_xx(L3, LatticeSurgeryLayout.build(3)), "static"),
    ):
        dets = define_detectors(c, frame)
        part = partition_subgraphs(dets, c)
        for basis in "XZ":
            ind, dep = set(part.independent[basis]), set(part.dependent[basis])
            assert not ind & dep
            assert ind | dep == set(dets.ids(basis=basis))


def test_tcnot_partition_roles():
    c = build_tcnot_gadget(L3)
    dets = define_detectors(c, "static")
    part = partition_subgraphs(dets, c)
    assert {dets.detectors[i].code for i in part.independent["X"]} == {"T"}
    assert {dets.detectors[i].code for i in part.dependent["X"]} == {"C"}
    assert {dets.detectors[i].code for i in part.independent["Z"]} == {"C"}
    assert {dets.detectors[i].code for i in part.dependent["Z"]} == {"T"}


def test_teleport_continuation():
    c = build_teleportation(L3)
    with_c = define_detectors(c, "hybrid", continuation=True)
    without = define_detectors(c, "hybrid", continuation=False)
    cont = with_c.ids(continuation=True)
    assert cont and all(with_c.detectors[i].code == "C" and with_c.detectors[i].basis == "Z" for i in cont)
    assert without.ids(continuation=True) == []
    assert without.num_detectors == with_c.num_detectors - len(cont)


@pytest.mark.parametrize("frame", ["bogus"])
def test_bad_frame(frame):
    with pytest.raises(ValueError):
        define_detectors(build_memory(L3, 1), frame)
    with pytest.raises(ValueError):
        define_detectors(build_memory(L3, 1), "dynamic")
    with pytest.raises(ValueError):
        define_detectors(build_teleportation(L3), "dynamic")
