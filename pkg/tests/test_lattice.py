import itertools

import pytest
from hypothesis import given, strategies as st

from tcnot.lattice import X_ORDER, Z_ORDER, GadgetSchedule, build_patch, build_rotated_code, extraction_schedule

odd_d = st.sampled_from([3, 5, 7, 9])


def _commute(a, b):
    return len(set(a.qubits) & set(b.qubits)) % 2 == 0


@given(odd_d)
def test_counts(d):
    code = build_rotated_code(d)
    assert len(code.data_qubits) == d * d
    assert len(code.x_checks) == len(code.z_checks) == (d * d - 1) // 2
    assert sorted(c.weight for c in code.checks).count(2) == 2 * (d - 1)


@given(odd_d)
def test_checks_commute_and_logicals(d):
    code = build_rotated_code(d)
    for a in code.x_checks:
        for b in code.z_checks:
            assert _commute(a, b)
    lx, lz = code.logical_x_support, code.logical_z_support
    assert len(lx) == len(lz) == d
    assert len(lx & lz) % 2 == 1
    for c in code.z_checks:
        assert len(set(c.qubits) & lx) % 2 == 0
    for c in code.x_checks:
        assert len(set(c.qubits) & lz) % 2 == 0


def test_boundary_orientation():
    code = build_rotated_code(5)
    # weight-2 X checks on top and bottom rows, weight-2 Z checks on left and right
    for c in code.x_checks:
        if c.weight == 2:
            assert {q[0] for q in c.qubits} <= {0, 4} and len({q[0] for q in c.qubits}) == 1
    for c in code.z_checks:
        if c.weight == 2:
            assert len({q[1] for q in c.qubits}) == 1


def test_schedule_no_collisions():
    code = build_rotated_code(5)
    sched = extraction_schedule(code)
    for step in range(4):
        used = [s[step] for s in sched.values() if s[step] is not None]
        assert len(used) == len(set(used))
    assert X_ORDER != Z_ORDER and sorted(X_ORDER) == sorted(Z_ORDER)


def test_patch_offsets_and_validation():
    p = build_patch(3, 7, 0)
    assert len(p.data_qubits) == 21
    q = build_patch(3, 3, 4)
    assert min(c for _, c in q.data_qubits) == 4
    with pytest.raises(ValueError):
        build_rotated_code(4)
    with pytest.raises(ValueError):
        build_rotated_code(1)


def test_gadget_schedule_fixed():
    g = GadgetSchedule.fixed(5)
    assert (g.r, g.W, g.g, g.m) == (5, 5, 1, 1)
    with pytest.raises(ValueError):
        GadgetSchedule(r=3, W=5)
