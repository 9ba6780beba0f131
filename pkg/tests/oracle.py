"""Independent brute-force oracle for single-cell iso-path extraction.

Deliberately written from scratch against the method's definitions, with
no shared code with the package: adjacency is derived from corner
coordinates, patterns are found by exhaustive subset enumeration, the
rule-selection table is plain data, and cycles are assembled by walking
per-face chords.  Everything returns hashable canonical forms so tests
can compare cycle multisets.

Point keys: ("n", corner) for iso-points on a vertex, ("e", frozenset
of the two corner ids) for points interior to an edge.  A cycle is a
frozenset of lines; a line is a frozenset of two point keys.
"""

from itertools import combinations

CORNERS = [(i, j, k) for i in (0, 1) for j in (0, 1) for k in (0, 1)]
INDEX = {c: n for n, c in enumerate(CORNERS)}


def _adjacent(a, b):
    return sum(1 for x, y in zip(CORNERS[a], CORNERS[b]) if x != y) == 1


NEIGHBORS = {n: [m for m in range(8) if _adjacent(n, m)] for n in range(8)}
ALL_EDGES = [frozenset((a, b)) for a in range(8) for b in NEIGHBORS[a] if a < b]


def _face_sets():
    faces = []
    for axis in range(3):
        for side in (0, 1):
            faces.append(frozenset(n for n in range(8) if CORNERS[n][axis] == side))
    return faces


FACES = _face_sets()


def _face_cycle(face):
    nodes = sorted(face)
    cyc = [nodes[0]]
    while len(cyc) < 4:
        nxt = [m for m in face if m not in cyc and _adjacent(cyc[-1], m)]
        cyc.append(min(nxt))
    return cyc


FACE_CYCLES_O = [_face_cycle(f) for f in FACES]


def _diag_pairs(face):
    cyc = _face_cycle(face)
    return [frozenset((cyc[0], cyc[2])), frozenset((cyc[1], cyc[3]))]


def states(labels, c):
    return ["d" if x > c else ("i" if x == c else "s") for x in labels]


# ---------------------------------------------------------------------------
# stripping (zero-area and membrane removal)
# ---------------------------------------------------------------------------

def _f1_subset(st):
    iso = [n for n in range(8) if st[n] == "i"]
    if len(iso) != 4 or any(st[n] != "d" for n in range(8) if n not in iso):
        return None
    for sub in combinations(iso, 4):
        ok = all(sum(1 for m in NEIGHBORS[p] if m in sub) == 1 for p in sub)
        if ok:
            return iso
    return None


def _f2_face(st, neighbor_labels, c):
    for face in FACES:
        if all(st[n] == "i" for n in face) and all(
            st[n] == "d" for n in range(8) if n not in face
        ):
            if neighbor_labels is None:
                return None
            nb = neighbor_labels(face)
            if nb is not None and all(x > c for x in nb):
                return face
    return None


def stripped_labels(labels, c, neighbor_labels=None):
    work = list(labels)
    st = states(work, c)
    f1 = _f1_subset(st)
    f2 = _f2_face(st, neighbor_labels, c)
    if f1 is not None or f2 is not None:
        for n in range(8):
            if st[n] == "i":
                work[n] = 1.0
        return work
    changed = True
    while changed:
        changed = False
        st = states(work, c)
        for n in range(8):
            if st[n] == "i" and all(st[m] == "d" for m in NEIGHBORS[n]):
                work[n] = 1.0
                changed = True
                st = states(work, c)
        for e in ALL_EDGES:
            a, b = sorted(e)
            if st[a] == "i" and st[b] == "i":
                rest = [m for m in range(8) if m not in e]
                if sum(1 for m in rest if st[m] != "d") <= 1:
                    work[a] = work[b] = 1.0
                    changed = True
                    st = states(work, c)
    return work


# ---------------------------------------------------------------------------
# face taxonomy
# ---------------------------------------------------------------------------

def face_kind(st, face):
    vals = [st[n] for n in face]
    nd = vals.count("d")
    if nd == 4:
        return "disperse"
    if nd == 0:
        return "continuous"
    if nd == 2:
        disp = frozenset(n for n in face if st[n] == "d")
        if disp in _diag_pairs(face):
            others = [n for n in face if st[n] != "d"]
            if all(st[n] == "i" for n in others):
                return "trivial-L"
            return "L"
        return "regular"
    if nd == 3:
        other = next(n for n in face if st[n] != "d")
        return "singular" if st[other] == "i" else "regular"
    return "regular"


def l_face_list(st):
    return [f for f in FACES if face_kind(st, f) in ("L", "trivial-L")]


# ---------------------------------------------------------------------------
# iso-point keys (positions interpolate the pre-strip labels, so a node
# that was exactly at the level hosts its point even after promotion)
# ---------------------------------------------------------------------------

def _point_key(raw_states, d_node, cont_node):
    if raw_states[cont_node] == "i":
        return ("n", cont_node)
    if raw_states[d_node] == "i":
        return ("n", d_node)
    return ("e", frozenset((d_node, cont_node)))


def _face_points(work_st, raw_st, face):
    cyc = _face_cycle(face)
    pts = []
    for t in range(4):
        a, b = cyc[t], cyc[(t + 1) % 4]
        da, db = work_st[a] == "d", work_st[b] == "d"
        if da and not db:
            pts.append(_point_key(raw_st, a, b))
        elif db and not da:
            pts.append(_point_key(raw_st, b, a))
    uniq = []
    for p in pts:
        if p not in uniq:
            uniq.append(p)
    return uniq


# ---------------------------------------------------------------------------
# rule selection and peeling
# ---------------------------------------------------------------------------

RULE_TABLE = {
    # (disperse count, number of L-faces) -> rule kind (parallel handled below)
    (2, 1): "S1",
    (3, 1): "S1",
    (3, 3): "S1",
    (4, 6): "S1",
    (5, 1): "S3",
    (5, 3): "S1",
    (6, 1): "S3",
}


def _select_rule(st):
    nd = st.count("d")
    lf = l_face_list(st)
    if lf:
        if nd == 4 and len(lf) == 2:
            parallel = not (lf[0] & lf[1])
            return "S2" if parallel else "S1"
        return RULE_TABLE[(nd, len(lf))]
    if nd == 2:
        d = [n for n in range(8) if st[n] == "d"]
        if not _adjacent(d[0], d[1]):
            return "S1"
    if nd == 6:
        cont = [n for n in range(8) if st[n] != "d"]
        if not _adjacent(cont[0], cont[1]) and any(st[n] == "s" for n in cont):
            return "S3"
    return None


def _find_s_target(st, kind):
    if kind == "S1":
        for n in range(8):
            if st[n] == "d" and all(st[m] != "d" for m in NEIGHBORS[n]):
                return n
    elif kind == "S3":
        for n in range(8):
            if st[n] == "s" and all(st[m] == "d" for m in NEIGHBORS[n]):
                return n
    else:
        for e in sorted(ALL_EDGES, key=sorted):
            a, b = sorted(e)
            if st[a] == "d" and st[b] == "d":
                flank = set()
                for p in (a, b):
                    flank.update(m for m in NEIGHBORS[p] if m not in e)
                if all(st[m] != "d" for m in flank):
                    return (a, b)
    raise AssertionError(f"no {kind} target in {st}")


def _corner_triangle(raw_st, center, kind):
    nbrs = sorted(NEIGHBORS[center])
    if kind == "S1":
        pts = [_point_key(raw_st, center, m) for m in nbrs]
    else:
        pts = [_point_key(raw_st, m, center) for m in nbrs]
    return _cycle_of_points(pts)


def _edge_quad(raw_st, a, b):
    ua = sorted(m for m in NEIGHBORS[a] if m != b)
    pts = []
    for u in ua:
        v = next(m for m in NEIGHBORS[b] if m != a and _adjacent(m, u))
        pts.append((_point_key(raw_st, a, u), _point_key(raw_st, b, v)))
    cycle = [pts[0][0], pts[0][1], pts[1][1], pts[1][0]]
    return _cycle_of_points(cycle)


def _cycle_of_points(pts):
    lines = set()
    m = len(pts)
    for i in range(m):
        lines.add(frozenset((pts[i], pts[(i + 1) % m])))
    return frozenset(lines)


def _apply_peel(work, c, kind, target):
    if kind in ("S1", "S2"):
        nodes = (target,) if kind == "S1" else target
        for n in nodes:
            if work[n] > c:
                work[n] = 0.0
    else:
        work[target] = 1.0


def _rest_cycle(work_st, raw_st):
    chords = []
    for face in FACES:
        if face_kind(work_st, face) == "regular":
            pts = _face_points(work_st, raw_st, face)
            assert len(pts) == 2, f"regular face with {len(pts)} points"
            chords.append(frozenset(pts))
    if not chords:
        return None
    incident = {}
    for ch in chords:
        for p in ch:
            incident.setdefault(p, []).append(ch)
    for p, lst in incident.items():
        assert len(lst) == 2, "open chord chain in rest graph"
    return frozenset(chords)


def cell_cycles(labels, c, neighbor_labels=None):
    """All inner iso-path cycles of one cell, as canonical line sets."""
    raw_st = states(labels, c)
    work = stripped_labels(labels, c, neighbor_labels)
    cycles = []
    while True:
        st = states(work, c)
        nd = st.count("d")
        if nd in (0, 8):
            return cycles
        kind = _select_rule(st)
        if kind is None:
            break
        target = _find_s_target(st, kind)
        if kind == "S2":
            cycles.append(_edge_quad(raw_st, *target))
        else:
            cycles.append(_corner_triangle(raw_st, target, kind))
        _apply_peel(work, c, kind, target)
    rest = _rest_cycle(states(work, c), raw_st)
    if rest is not None:
        cycles.append(rest)
    return cycles
