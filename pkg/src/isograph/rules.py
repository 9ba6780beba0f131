"""Label-rewrite rules that drive per-cell iso-path computation.

Two rule families operate on a cell's labels without ever moving a label
across the iso-level except to the saturation values 0 and 1:

* T/F rules delete degenerate surface pieces.  T1/T2 remove zero-area
  touches at a vertex or an edge; F1/F2 remove a membrane whose two sides
  are both disperse (F2 is the shared-face variant and needs the face
  neighbour's labels).
* S rules peel one inner iso-path off a reducible cell (S1: isolated
  disperse corner, S2: disperse edge pair, S3: isolated sub-level corner),
  leaving an irreducible rest graph.  Which S rule applies, and how many
  times, is a pure function of the disperse count and the L-face layout
  (``select_s_rule``).

C rules (the single chord on a regular face) have no rewrite effect and
are realised directly by the path assembly in :mod:`isograph.extract`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .cube import (
    CORNER_NEIGHBORS,
    DISP,
    EDGES,
    FACE_CYCLES,
    ISO,
    PARALLEL_FACE,
    SUB,
    GraphClassification,
    LabeledCuboidGraph,
    classify_states,
    f1_matches,
    f2_candidate_face,
    l_faces_of_states,
    strip_t_fixpoint,
    t1_corners,
    t2_edges,
)


class ClassificationError(RuntimeError):
    """Raised when a cell falls outside the rule-selection table's domain."""


class PatternError(RuntimeError):
    """Raised when a rewrite is applied to a cell that no longer matches."""


class RuleKind(str, Enum):
    T1 = "T1"
    T2 = "T2"
    F1 = "F1"
    F2 = "F2"
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    C1 = "C1"
    C2 = "C2"
    C3 = "C3"


# relabel selectors: q0 saturates the disperse side to 0, q1 saturates the
# continuous side to 1; both are idempotent and keep the iso-level fixed
def q0(x: float, c: float) -> float:
    return 0.0 if x > c else x


def q1(x: float, c: float) -> float:
    return 1.0 if x <= c else x


_Q_OF_KIND = {
    RuleKind.T1: q1,
    RuleKind.T2: q1,
    RuleKind.F1: q1,
    RuleKind.F2: q1,
    RuleKind.S1: q0,
    RuleKind.S2: q0,
    RuleKind.S3: q1,
}


@dataclass(frozen=True)
class RewriteRule:
    kind: RuleKind
    target: tuple  # node subset W

    @property
    def saturates_to(self) -> int:
        return 0 if _Q_OF_KIND[self.kind] is q0 else 1


@dataclass(frozen=True)
class SubgraphPattern:
    pattern_id: str
    nodes: tuple
    neighbor_face: int = -1  # face id toward the paired cell, F2 only


def s2_flanks(a: int, b: int):
    """Side nodes of the edge (a, b): ((u1, u2), (v1, v2)) with u_i ~ v_i."""
    axis_bit = a ^ b
    other = [bit for bit in (4, 2, 1) if bit != axis_bit]
    u = (a ^ other[0], a ^ other[1])
    return u, (b ^ other[0], b ^ other[1])


def _subgraph_nodes_s2(a: int, b: int) -> tuple:
    (u1, u2), (v1, v2) = s2_flanks(a, b)
    return (a, b, u1, u2, v1, v2)


# ---------------------------------------------------------------------------
# pattern detection
# ---------------------------------------------------------------------------

def _corner_patterns(states, center_state, ring_pred, pid):
    out = []
    for n in range(8):
        if states[n] == center_state and all(ring_pred(states[m]) for m in CORNER_NEIGHBORS[n]):
            out.append(SubgraphPattern(pid, (n,) + CORNER_NEIGHBORS[n]))
    return out


def find_patterns(g: LabeledCuboidGraph, neighbor_faces=None):
    """All T/F/S and basic-subgraph matches, deterministically ordered.

    ``neighbor_faces`` maps a face id to the neighbour cell's 8 labels (or
    None at the domain boundary); it is only consulted for F2.
    """
    st = g.states()
    out = []
    out += _corner_patterns(st, ISO, lambda s: s == DISP, "T1sub")
    for a, b in t2_edges(st):
        nodes = tuple([a, b] + [m for m in range(8) if m not in (a, b) and st[m] == DISP][:5])
        out.append(SubgraphPattern("T2sub", nodes))
    if f1_matches(st):
        out.append(SubgraphPattern("F1graph", tuple(n for n in range(8) if st[n] == ISO)))
    f2f = f2_candidate_face(st)
    if f2f is not None and neighbor_faces is not None:
        nb = neighbor_faces(f2f) if callable(neighbor_faces) else neighbor_faces.get(f2f)
        if nb is not None and _f2_neighbor_far_disperse(nb, f2f, g.iso_level):
            out.append(SubgraphPattern("F2graph", tuple(FACE_CYCLES[f2f]), neighbor_face=f2f))
    out += _corner_patterns(st, DISP, lambda s: s != DISP, "S1sub")
    for a, b in EDGES:
        if st[a] == DISP and st[b] == DISP:
            nodes = _subgraph_nodes_s2(a, b)
            if all(st[m] != DISP for m in nodes[2:]):
                out.append(SubgraphPattern("S2sub", nodes))
    out += _corner_patterns(st, SUB, lambda s: s == DISP, "S3sub")
    # basic positive / zero subgraphs used by the reducibility analysis
    out += [SubgraphPattern("g1", p.nodes) for p in _corner_patterns(st, DISP, lambda s: s != DISP, "_")]
    for a, b in EDGES:
        if st[a] == DISP and st[b] == DISP:
            nodes = _subgraph_nodes_s2(a, b)
            if all(st[m] != DISP for m in nodes[2:]):
                out.append(SubgraphPattern("g2", nodes))
    out += [SubgraphPattern("g3", p.nodes) for p in _corner_patterns(st, SUB, lambda s: s == DISP, "_")]
    out += [SubgraphPattern("ghat1", p.nodes) for p in _corner_patterns(st, ISO, lambda s: s == DISP, "_")]
    for a, b in EDGES:
        if st[a] == ISO and st[b] == ISO:
            nodes = _subgraph_nodes_s2(a, b)
            if all(st[m] == DISP for m in nodes[2:]):
                out.append(SubgraphPattern("ghat2", nodes))
    out.sort(key=lambda p: (p.pattern_id, min(p.nodes)))
    return out


def _f2_neighbor_far_disperse(neighbor_labels, face: int, c: float) -> bool:
    """True if the neighbour's four corners away from the shared face are > c.

    The neighbour's copy of the shared face equals ours (same lattice
    nodes), so only its far corners decide the match.
    """
    lab = np.asarray(neighbor_labels, dtype=np.float64)
    axis, side = face // 2, face % 2
    bit = (4, 2, 1)[axis]
    # the neighbour's corners away from the shared face carry the same
    # axis-bit as our face's side
    far = [n for n in range(8) if (1 if n & bit else 0) == side]
    return all(lab[n] > c for n in far)


# ---------------------------------------------------------------------------
# applying rules
# ---------------------------------------------------------------------------

def _pattern_holds(states, rule: RewriteRule) -> bool:
    k, W = rule.kind, rule.target
    if k == RuleKind.T1:
        n = W[0]
        return states[n] == ISO and all(states[m] == DISP for m in CORNER_NEIGHBORS[n])
    if k == RuleKind.T2:
        a, b = W[0], W[1]
        return (a, b) in t2_edges(states) or (b, a) in t2_edges(states)
    if k == RuleKind.F1:
        return f1_matches(states)
    if k == RuleKind.F2:
        return f2_candidate_face(states) is not None
    if k == RuleKind.S1:
        n = W[0]
        return states[n] == DISP and all(states[m] != DISP for m in CORNER_NEIGHBORS[n])
    if k == RuleKind.S2:
        a, b = W[0], W[1]
        return (
            states[a] == DISP
            and states[b] == DISP
            and all(states[m] != DISP for m in _subgraph_nodes_s2(a, b)[2:])
        )
    if k == RuleKind.S3:
        n = W[0]
        return states[n] == SUB and all(states[m] == DISP for m in CORNER_NEIGHBORS[n])
    raise ValueError(f"{k} is not a label-rewriting rule")


def apply_rule(g: LabeledCuboidGraph, rule: RewriteRule) -> LabeledCuboidGraph:
    """Rewrite labels on the rule's target set only; idempotent."""
    if not _pattern_holds(g.states(), rule):
        raise PatternError(f"{rule.kind.value} target {rule.target} not present")
    q = _Q_OF_KIND[rule.kind]
    lab = g.labels.copy()
    for n in rule.target:
        lab[n] = q(lab[n], g.iso_level)
    return LabeledCuboidGraph(g.positions, lab, g.iso_level, g.cell, g.snap_tol)


def strip_states(states, f2_fires: bool = False) -> tuple:
    """State-level Step-1 strip: F rules if they match, else the T fixpoint."""
    if f2_fires or f1_matches(states):
        return tuple(DISP if s != DISP else s for s in states)
    return strip_t_fixpoint(states)


def strip_singular_and_isolated(g: LabeledCuboidGraph, neighbor_faces=None) -> LabeledCuboidGraph:
    """Remove all zero-area touches and phase-enclosing membranes.

    Rewrites a private copy; iso-nodes taking part in a removed piece are
    saturated to 1.  If the result is all-disperse the cell carries no
    iso-path at all.
    """
    st = g.states()
    lab = g.labels.copy()
    f2f = f2_candidate_face(st)
    f2 = False
    if f2f is not None and neighbor_faces is not None:
        nb = neighbor_faces(f2f) if callable(neighbor_faces) else neighbor_faces.get(f2f)
        f2 = nb is not None and _f2_neighbor_far_disperse(nb, f2f, g.iso_level)
    target = strip_states(st, f2_fires=f2)
    for n in range(8):
        if st[n] != target[n]:
            lab[n] = 1.0
    return LabeledCuboidGraph(g.positions, lab, g.iso_level, g.cell, g.snap_tol)


# ---------------------------------------------------------------------------
# rule selection (removing L-faces) and decomposition
# ---------------------------------------------------------------------------

def _l_parallel(l_face_ids) -> bool:
    return len(l_face_ids) == 2 and PARALLEL_FACE[l_face_ids[0]] == l_face_ids[1]


def select_s_rule(cls: GraphClassification):
    """Rule kind and multiplicity for a regular cell, or None if irreducible.

    With L-faces present the choice depends only on the disperse count, the
    number of L-faces and (for two L-faces) their parallelism.  Without
    L-faces only the two space-diagonal cases are reducible.
    """
    d = cls.n_disperse
    lf = [f for f, _ in cls.l_faces]
    if lf:
        nl = len(lf)
        if d == 2 and nl == 1:
            return RuleKind.S1, 1
        if d == 3 and nl == 1:
            return RuleKind.S1, 1
        if d == 3 and nl == 3:
            return RuleKind.S1, 2
        if d == 4 and nl == 2:
            return (RuleKind.S2, 1) if _l_parallel(lf) else (RuleKind.S1, 1)
        if d == 4 and nl == 6:
            return RuleKind.S1, 3
        if d == 5 and nl == 1:
            return RuleKind.S3, 1
        if d == 5 and nl == 3:
            return RuleKind.S1, 1
        if d == 6 and nl == 1:
            return RuleKind.S3, 1
        raise ClassificationError(f"no rule column for D={d}, |L|={nl}")
    if not cls.reducible:
        return None
    if d == 2:
        return RuleKind.S1, 1
    if d == 6:
        return RuleKind.S3, 1
    raise ClassificationError(f"reducible without L-faces at D={d}")


def _find_target(states, kind: RuleKind):
    """Lowest-node-index matching S-subgraph target, or None."""
    if kind == RuleKind.S1:
        for n in range(8):
            if states[n] == DISP and all(states[m] != DISP for m in CORNER_NEIGHBORS[n]):
                return (n,) + CORNER_NEIGHBORS[n]
    elif kind == RuleKind.S2:
        for a, b in EDGES:
            if states[a] == DISP and states[b] == DISP:
                nodes = _subgraph_nodes_s2(a, b)
                if all(states[m] != DISP for m in nodes[2:]):
                    return nodes
    elif kind == RuleKind.S3:
        for n in range(8):
            if states[n] == SUB and all(states[m] == DISP for m in CORNER_NEIGHBORS[n]):
                return (n,) + CORNER_NEIGHBORS[n]
    return None


def _apply_peel_states(states, kind: RuleKind, target) -> tuple:
    st = list(states)
    if kind in (RuleKind.S1, RuleKind.S2):
        for n in target:
            if st[n] == DISP:
                st[n] = SUB  # saturated to 0
    else:
        st[target[0]] = DISP  # saturated to 1
    return tuple(st)


def peel_sequence(states):
    """Iterate rule selection until irreducible.

    Returns (peels, rest_states) where each peel is (kind, target_nodes,
    states_before).  Terminates in at most three steps; L-faces are never
    created by a peel.
    """
    st = tuple(states)
    peels = []
    while True:
        cls = classify_states(st)
        if cls.is_disperse or cls.is_continuous:
            break
        sel = select_s_rule(cls)
        if sel is None:
            break
        kind, n = sel
        before_l = {f for f, _ in cls.l_faces}
        for _ in range(n):
            target = _find_target(st, kind)
            if target is None:
                raise ClassificationError(f"{kind.value} selected but no target in {st}")
            peels.append((kind, target, st))
            st = _apply_peel_states(st, kind, target)
        after_l = {f for f, _ in l_faces_of_states(st)}
        if not after_l <= before_l:
            raise ClassificationError("peel created a new L-face")
        if len(peels) > 3:
            raise ClassificationError("decomposition did not terminate in three steps")
    return peels, st


def piece_disperse_mask(kind: RuleKind, target) -> int:
    """Disperse corners of the isolated cuboid graph a peel corresponds to.

    S1/S2 pieces embed the peeled pattern in an otherwise sub-level cell,
    S3 in an otherwise disperse cell.
    """
    if kind == RuleKind.S1:
        return 1 << target[0]
    if kind == RuleKind.S2:
        return (1 << target[0]) | (1 << target[1])
    return 0xFF ^ (1 << target[0])


@dataclass
class GraphDecomposition:
    """Peeled single-path cuboid graphs plus the irreducible rest graph."""

    pieces: list            # LabeledCuboidGraph, one inner iso-path each
    rest: LabeledCuboidGraph
    peel_kinds: list        # RuleKind per piece


def decompose(g: LabeledCuboidGraph) -> GraphDecomposition:
    """Split a stripped regular cell into single-path cells and a rest graph."""
    st = g.states()
    if has_t_or_f(st):
        raise PatternError("decompose requires a stripped (regular) cell")
    peels, rest_states = peel_sequence(st)
    pieces = []
    kinds = []
    lab = g.labels.copy()
    for kind, target, _before in peels:
        fill = 0.0 if kind in (RuleKind.S1, RuleKind.S2) else 1.0
        piece = np.full(8, fill)
        for n in target:
            piece[n] = lab[n]
        pieces.append(LabeledCuboidGraph(g.positions, piece, g.iso_level, g.cell, g.snap_tol))
        for n in target:
            lab[n] = q0(lab[n], g.iso_level) if kind in (RuleKind.S1, RuleKind.S2) else q1(lab[n], g.iso_level)
        kinds.append(kind)
    rest = LabeledCuboidGraph(g.positions, lab, g.iso_level, g.cell, g.snap_tol)
    assert rest.states() == rest_states
    return GraphDecomposition(pieces=pieces, rest=rest, peel_kinds=kinds)


def has_t_or_f(states) -> bool:
    return bool(t1_corners(states)) or bool(t2_edges(states)) or f1_matches(states)
