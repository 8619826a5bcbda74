"""Rotated surface code geometry.

Data qubits sit on an integer ``(row, col)`` grid.  Checks live on faces,
which are addressed by doubled coordinates ``(2i, 2j)``; the face ``(2i, 2j)``
touches the data qubits at rows ``i-1, i`` and columns ``j-1, j``.  A face is
X-type when ``i + j`` is even.  Weight-2 X checks sit on the top and bottom
boundaries, weight-2 Z checks on the left and right boundaries, so logical X
runs down a column and logical Z along a row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

Coord = tuple[int, int]

# Neighbour offsets (data row, data col) relative to face (i, j), in the order
# the entangling gates are applied.  X checks sweep NW, NE, SW, SE and Z checks
# NW, SW, NE, SE, so each ancilla's hook error lands perpendicular to the
# logical operator it could otherwise shorten.
X_ORDER: tuple[Coord, ...] = ((-1, -1), (-1, 0), (0, -1), (0, 0))
Z_ORDER: tuple[Coord, ...] = ((-1, -1), (0, -1), (-1, 0), (0, 0))


@dataclass(frozen=True)
class Check:
    basis: str
    face: Coord
    qubits: tuple[Coord, ...]
    # One entry per entangling step; None where a boundary check idles.
    slots: tuple[Optional[Coord], ...]

    @property
    def weight(self) -> int:
        return len(self.qubits)


@dataclass(frozen=True)
class CodeLayout:
    """Geometry of one rotated surface code patch (or a rectangular merge)."""

    d: int
    rows: int
    col_start: int
    cols: int
    data_qubits: frozenset[Coord]
    x_checks: tuple[Check, ...]
    z_checks: tuple[Check, ...]
    logical_x_support: frozenset[Coord]
    logical_z_support: frozenset[Coord]
    _by_face: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def checks(self) -> tuple[Check, ...]:
        return self.x_checks + self.z_checks

    def checks_of(self, basis: str) -> tuple[Check, ...]:
        return self.x_checks if basis == "X" else self.z_checks

    def check_at(self, basis: str, face: Coord) -> Optional[Check]:
        if not self._by_face:
            for c in self.checks:
                self._by_face[(c.basis, c.face)] = c
        return self._by_face.get((basis, face))

    def sorted_data(self) -> list[Coord]:
        return sorted(self.data_qubits)


@dataclass(frozen=True)
class GadgetSchedule:
    """Rounds after each gadget (r), window depth (W), gates per gadget (g), window gadget depth (m)."""

    r: int
    W: int
    g: int = 1
    m: int = 1

    @classmethod
    def fixed(cls, d: int) -> "GadgetSchedule":
        return cls(r=d, W=d, g=1, m=1)

    def __post_init__(self):
        if self.g != 1 or self.m != 1 or self.r != self.W:
            raise ValueError("only r = W, g = 1, m = 1 gadgets are supported")


def _face_type(i: int, j: int) -> str:
    return "X" if (i + j) % 2 == 0 else "Z"


def _faces(rows: int, col_start: int, cols: int) -> Iterator[tuple[int, int, str]]:
    col_end = col_start + cols
    for i in range(rows + 1):
        for j in range(col_start, col_end + 1):
            kind = _face_type(i, j)
            top_or_bottom = i in (0, rows)
            left_or_right = j in (col_start, col_end)
            if top_or_bottom and left_or_right:
                continue
            if top_or_bottom and kind != "X":
                continue
            if left_or_right and kind != "Z":
                continue
            yield i, j, kind


def build_patch(d: int, cols: Optional[int] = None, col_start: int = 0) -> CodeLayout:
    """Build a ``d``-row rotated patch spanning ``cols`` data columns from ``col_start``.

    Face types follow a global checkerboard, so patches built at different
    column offsets tile consistently into a merged rectangle.
    """
    if d < 3 or d % 2 == 0:
        raise ValueError(f"code distance must be an odd integer >= 3, got {d}")
    cols = d if cols is None else cols
    if cols < 1:
        raise ValueError("patch needs at least one column")
    data = frozenset(
        (r, c) for r in range(d) for c in range(col_start, col_start + cols)
    )
    xs: list[Check] = []
    zs: list[Check] = []
    for i, j, kind in _faces(d, col_start, cols):
        order = X_ORDER if kind == "X" else Z_ORDER
        slots = tuple(
            (i + dr, j + dc) if (i + dr, j + dc) in data else None for dr, dc in order
        )
        qubits = tuple(q for q in slots if q is not None)
        if len(qubits) < 2:
            continue
        check = Check(kind, (2 * i, 2 * j), qubits, slots)
        (xs if kind == "X" else zs).append(check)
    lx = frozenset((r, col_start) for r in range(d))
    lz = frozenset((0, c) for c in range(col_start, col_start + cols))
    return CodeLayout(
        d=d,
        rows=d,
        col_start=col_start,
        cols=cols,
        data_qubits=data,
        x_checks=tuple(xs),
        z_checks=tuple(zs),
        logical_x_support=lx,
        logical_z_support=lz,
    )


def build_rotated_code(d: int) -> CodeLayout:
    """Square distance-``d`` rotated surface code."""
    if not isinstance(d, int) or d < 3 or d % 2 == 0:
        raise ValueError(f"code distance must be an odd integer >= 3, got {d!r}")
    return build_patch(d)


def extraction_schedule(layout: CodeLayout) -> dict[tuple[str, Coord], tuple[Optional[Coord], ...]]:
    """Per-check data qubit for each of the four entangling steps (None = idle)."""
    return {(c.basis, c.face): c.slots for c in layout.checks}


def doubled(q: Coord) -> Coord:
    """Doubled-integer coordinate of a data qubit."""
    return (2 * q[0] + 1, 2 * q[1] + 1)
