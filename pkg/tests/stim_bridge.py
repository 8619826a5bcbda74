"""Export Z- or X-basis circuits to stim for independent cross-checks."""

from __future__ import annotations

import stim

from tcnot.circuit import Circuit
from tcnot.frames import DetectorSet

_GATE = {"prepare_z": "R", "prepare_x": "RX", "measure_z": "M", "measure_x": "MX", "cnot": "CX"}


def to_stim(circuit: Circuit, dets: DetectorSet, p: float, sector: str) -> stim.Circuit:
    """Circuit with DEPOLARIZE2(p) after every CNOT; only ``sector`` detectors are declared."""
    out = stim.Circuit()
    for k, op in enumerate(circuit.ops):
        out.append(_GATE[op.name], list(op.qubits))
        if op.name == "cnot" and p > 0:
            out.append("DEPOLARIZE2", list(op.qubits), p)
    n = circuit.num_measurements
    keep = [det for det in dets.detectors if det.basis == sector]
    for det in keep:
        out.append("DETECTOR", [stim.target_rec(m - n) for m in det.measurements])
    obs = [o for o in dets.observables if o.sector == sector]
    for k, o in enumerate(obs):
        out.append("OBSERVABLE_INCLUDE", [stim.target_rec(m - n) for m in o.measurements], k)
    return out


def sector_ids(dets: DetectorSet, sector: str):
    """Maps from our detector / observable ids to the exported stim indices."""
    dmap = {det.id: i for i, det in enumerate(d for d in dets.detectors if d.basis == sector)}
    omap = {}
    j = 0
    for k, o in enumerate(dets.observables):
        if o.sector == sector:
            omap[k] = j
            j += 1
    return dmap, omap


def stim_mechanisms(c: stim.Circuit) -> dict[tuple[frozenset, frozenset], float]:
    out = {}
    for inst in c.detector_error_model(decompose_errors=False).flattened():
        if inst.type != "error":
            continue
        ds = frozenset(t.val for t in inst.targets_copy() if t.is_relative_detector_id())
        os_ = frozenset(t.val for t in inst.targets_copy() if t.is_logical_observable_id())
        p = inst.args_copy()[0]
        key = (ds, os_)
        q = out.get(key, 0.0)
        out[key] = q + p - 2 * q * p
    return out
