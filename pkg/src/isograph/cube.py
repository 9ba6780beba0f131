"""Cell-level cuboid graph: corner indexing, node states, face taxonomy.

A grid cell is treated as a graph on its 8 corners and 12 edges, with a
label in [0, 1] per corner and an iso-level c in (0, 1).  Corners are
ordered (i, j, k)-lexicographically, so corner n has offsets
(n >> 2 & 1, n >> 1 & 1, n & 1) and every edge/face incidence table below
is a module-level constant.

Node states form an exact trichotomy after labels have been snapped to c
(see ``snap_labels``): SUB (< c), ISO (= c), DISP (> c).  A cell's state
code packs the 8 states base-3; all structural classification (face
classes, L-faces, reducibility) is a pure function of that code.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

SUB, ISO, DISP = 0, 1, 2

#: Default absolute tolerance for deciding label == c.
DEFAULT_ISO_SNAP = 1e-12


class NodeState(IntEnum):
    SUB = 0
    ISO = 1
    DISP = 2


class FaceClass(IntEnum):
    DISPERSE = 0
    CONTINUOUS = 1
    REGULAR = 2
    SINGULAR = 3
    TRIVIAL_L = 4
    NONTRIVIAL_L = 5


# ---------------------------------------------------------------------------
# static incidence tables
# ---------------------------------------------------------------------------

CORNER_OFFSETS = tuple((n >> 2 & 1, n >> 1 & 1, n & 1) for n in range(8))

# neighbor of corner n along axis a is n ^ (4 >> a); axes are (x, y, z)
_AXIS_BIT = (4, 2, 1)
CORNER_NEIGHBORS = tuple(tuple(n ^ b for b in _AXIS_BIT) for n in range(8))

EDGES = tuple(sorted((a, a ^ b) for a in range(8) for b in _AXIS_BIT if a < (a ^ b)))
EDGE_INDEX = {e: i for i, e in enumerate(EDGES)}
EDGE_AXIS = tuple(_AXIS_BIT.index(a ^ b) for a, b in EDGES)

# face f = 2*axis + side; cycle lists the 4 corners around the face boundary,
# so diagonal pairs sit at cycle positions (0, 2) and (1, 3)
FACE_CYCLES = (
    (0, 1, 3, 2),  # x = 0
    (4, 5, 7, 6),  # x = 1
    (0, 1, 5, 4),  # y = 0
    (2, 3, 7, 6),  # y = 1
    (0, 2, 6, 4),  # z = 0
    (1, 3, 7, 5),  # z = 1
)
FACE_AXIS = (0, 0, 1, 1, 2, 2)
FACE_SIDE = (0, 1, 0, 1, 0, 1)
PARALLEL_FACE = (1, 0, 3, 2, 5, 4)

FACES_OF_CORNER = tuple(
    tuple(f for f in range(6) if n in FACE_CYCLES[f]) for n in range(8)
)

_FACE_BY_CORNERSET = {}
for _f, _cyc in enumerate(FACE_CYCLES):
    _s = frozenset(_cyc)
    _FACE_BY_CORNERSET[_s] = _f
    for _skip in _cyc:
        _FACE_BY_CORNERSET[frozenset(_s - {_skip})] = _f


def face_through(corners) -> int:
    """Face id of the unique face containing 3 or 4 given corners."""
    return _FACE_BY_CORNERSET[frozenset(corners)]


def decode_code(code: int) -> tuple:
    """Unpack a base-3 state code into the 8 per-corner states."""
    out = []
    for _ in range(8):
        out.append(code % 3)
        code //= 3
    return tuple(out)


def encode_states(states) -> int:
    code = 0
    for n in range(7, -1, -1):
        code = code * 3 + states[n]
    return code


_POW3 = tuple(3**n for n in range(8))

ALL_SUB_CODE = 0
ALL_DISP_CODE = sum(2 * p for p in _POW3)


# ---------------------------------------------------------------------------
# labels -> states
# ---------------------------------------------------------------------------

def snap_labels(labels, c: float, tol: float = DEFAULT_ISO_SNAP):
    """Snap labels within ``tol`` of c to exactly c.

    The downstream case analysis is exact on the trichotomy < c, == c, > c,
    so near-ties are resolved once here rather than with per-comparison
    tolerances.
    """
    arr = np.asarray(labels, dtype=np.float64).copy()
    arr[np.abs(arr - c) <= tol] = c
    return arr


def states_of_labels(labels, c: float) -> tuple:
    """Exact per-node trichotomy; assumes labels already snapped."""
    return tuple(DISP if v > c else (ISO if v == c else SUB) for v in labels)


# ---------------------------------------------------------------------------
# face and graph classification
# ---------------------------------------------------------------------------

def classify_face_cycle(s0: int, s1: int, s2: int, s3: int) -> FaceClass:
    """Classify a face from its 4 corner states in boundary-cycle order."""
    nd = (s0 == DISP) + (s1 == DISP) + (s2 == DISP) + (s3 == DISP)
    if nd == 4:
        return FaceClass.DISPERSE
    if nd == 0:
        return FaceClass.CONTINUOUS
    if nd == 2:
        if s0 == DISP and s2 == DISP:
            return FaceClass.TRIVIAL_L if (s1 == ISO and s3 == ISO) else FaceClass.NONTRIVIAL_L
        if s1 == DISP and s3 == DISP:
            return FaceClass.TRIVIAL_L if (s0 == ISO and s2 == ISO) else FaceClass.NONTRIVIAL_L
        return FaceClass.REGULAR
    if nd == 3:
        other = s0 if s0 != DISP else (s1 if s1 != DISP else (s2 if s2 != DISP else s3))
        return FaceClass.SINGULAR if other == ISO else FaceClass.REGULAR
    return FaceClass.REGULAR


def face_class_of_states(states, f: int) -> FaceClass:
    a, b, c_, d = FACE_CYCLES[f]
    return classify_face_cycle(states[a], states[b], states[c_], states[d])


def l_faces_of_states(states):
    """All L-faces as (face id, is_trivial) in face-id order."""
    out = []
    for f in range(6):
        fc = face_class_of_states(states, f)
        if fc == FaceClass.TRIVIAL_L:
            out.append((f, True))
        elif fc == FaceClass.NONTRIVIAL_L:
            out.append((f, False))
    return out


def singular_faces_of_states(states):
    return [f for f in range(6) if face_class_of_states(states, f) == FaceClass.SINGULAR]


# local T/F pattern predicates (state level); F2 needs neighbour labels and
# lives in rules.py

def t1_corners(states):
    """Corners that are iso-nodes with all three neighbours disperse."""
    return [
        n for n in range(8)
        if states[n] == ISO and all(states[m] == DISP for m in CORNER_NEIGHBORS[n])
    ]


def t2_edges(states):
    """Edges with two iso-node endpoints and at most one non-disperse node elsewhere."""
    out = []
    for a, b in EDGES:
        if states[a] == ISO and states[b] == ISO:
            nd = sum(1 for m in range(8) if m not in (a, b) and states[m] != DISP)
            if nd <= 1:
                out.append((a, b))
    return out


def f1_matches(states) -> bool:
    """Four iso-nodes forming two antipodal parallel edges, all others disperse.

    The separating element of such a cell has disperse nodes on both sides,
    so it bounds no phase region and is dropped.
    """
    if sum(1 for s in states if s == ISO) != 4:
        return False
    if sum(1 for s in states if s == DISP) != 4:
        return False
    iso = frozenset(n for n in range(8) if states[n] == ISO)
    for n in iso:
        inside = sum(1 for m in CORNER_NEIGHBORS[n] if m in iso)
        if inside != 1:
            return False
    return True


def f2_candidate_face(states):
    """Face index of a potential shared-face membrane, or None.

    The cell-local half of the pattern: one face entirely iso-nodes, the
    opposite four corners all disperse.  Whether it fires depends on the
    face neighbour's far corners.
    """
    for f in range(6):
        cyc = FACE_CYCLES[f]
        if all(states[n] == ISO for n in cyc) and all(
            states[n] == DISP for n in range(8) if n not in cyc
        ):
            return f
    return None


def has_t_pattern(states) -> bool:
    return bool(t1_corners(states)) or bool(t2_edges(states))


def strip_t_fixpoint(states) -> tuple:
    """Promote singular-touch iso-nodes to disperse until none remain."""
    st = list(states)
    changed = True
    while changed:
        changed = False
        for n in range(8):
            if st[n] == ISO and all(st[m] == DISP for m in CORNER_NEIGHBORS[n]):
                st[n] = DISP
                changed = True
        for a, b in EDGES:
            if st[a] == ISO and st[b] == ISO:
                nd = sum(1 for m in range(8) if m not in (a, b) and st[m] != DISP)
                if nd <= 1:
                    st[a] = DISP
                    st[b] = DISP
                    changed = True
    return tuple(st)


@dataclass(frozen=True)
class ConfigSignature:
    """Canonical per-cell state code with derived counts.

    Two cells with equal codes receive identical classification and rule
    selection; label magnitudes on the same side of c never matter.
    """

    code: int
    n_disperse: int
    n_l_faces: int

    @property
    def states(self):
        return decode_code(self.code)


@dataclass
class GraphClassification:
    n_disperse: int
    l_faces: list          # [(face id, is_trivial)]
    singular: list         # [face id]
    is_disperse: bool
    is_continuous: bool
    is_regular: bool       # no local T/F pattern, not disperse/continuous
    reducible: bool


@dataclass
class LabeledCuboidGraph:
    """One grid cell: 8 corner positions, 8 labels, and the iso-level.

    ``positions[n]`` is the corner with offsets ``CORNER_OFFSETS[n]``.
    Labels are snapped to the iso-level on construction so that the state
    trichotomy is exact.
    """

    positions: np.ndarray
    labels: np.ndarray
    iso_level: float
    cell: tuple = (0, 0, 0)
    snap_tol: float = DEFAULT_ISO_SNAP

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(8, 3)
        if not 0.0 < self.iso_level < 1.0:
            raise ValueError(f"iso-level must lie in (0, 1), got {self.iso_level}")
        lab = snap_labels(self.labels, self.iso_level, self.snap_tol)
        if np.any(lab < 0.0) or np.any(lab > 1.0):
            raise ValueError("labels must lie in [0, 1]")
        self.labels = lab

    @classmethod
    def unit(cls, labels, c, cell=(0, 0, 0)):
        pos = np.array(CORNER_OFFSETS, dtype=np.float64)
        return cls(pos, np.asarray(labels, dtype=np.float64), c, cell)

    def states(self) -> tuple:
        return states_of_labels(self.labels, self.iso_level)

    def code(self) -> int:
        return encode_states(self.states())


def classify_nodes(g: LabeledCuboidGraph):
    """Exact node trichotomy for one cell."""
    return tuple(NodeState(s) for s in g.states())


def classify_face(g: LabeledCuboidGraph, face: int) -> FaceClass:
    if not 0 <= face < 6:
        raise ValueError(f"face index must be 0..5, got {face}")
    return face_class_of_states(g.states(), face)


def _adjacent(a: int, b: int) -> bool:
    return b in CORNER_NEIGHBORS[a]


def classify_states(states, f2_neighbor: bool = False) -> GraphClassification:
    nd = sum(1 for s in states if s == DISP)
    lf = l_faces_of_states(states)
    sing = singular_faces_of_states(states)
    is_disp = nd == 8
    is_cont = nd == 0
    regular = (
        not is_disp
        and not is_cont
        and not has_t_pattern(states)
        and not f1_matches(states)
        and not f2_neighbor
    )
    reducible = False
    if regular:
        if lf:
            reducible = True
        elif nd == 2:
            d = [n for n in range(8) if states[n] == DISP]
            reducible = not _adjacent(d[0], d[1])
        elif nd == 6:
            cont = [n for n in range(8) if states[n] != DISP]
            if not _adjacent(cont[0], cont[1]):
                # the strictly-sub node of the pair carries the peelable corner
                reducible = any(
                    states[n] == SUB and all(states[m] == DISP for m in CORNER_NEIGHBORS[n])
                    for n in cont
                )
    return GraphClassification(
        n_disperse=nd,
        l_faces=lf,
        singular=sing,
        is_disperse=is_disp,
        is_continuous=is_cont,
        is_regular=regular,
        reducible=reducible,
    )


def classify_graph(g: LabeledCuboidGraph) -> GraphClassification:
    return classify_states(g.states())


def signature(g: LabeledCuboidGraph) -> ConfigSignature:
    st = g.states()
    return ConfigSignature(
        code=encode_states(st),
        n_disperse=sum(1 for s in st if s == DISP),
        n_l_faces=len(l_faces_of_states(st)),
    )
