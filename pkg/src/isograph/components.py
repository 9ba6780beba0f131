"""Disperse connectedness, iso-line pairing, and surface components.

Several iso-paths can share one iso-line (up to 8 on a lattice edge, 4 on
a face diagonal).  Component decomposition needs every such bundle split
into pairs so that, inside a component, each interior iso-line borders
exactly two elements.  Two paths pair at a shared line when they are the
only two there, when they quote a common corresponding disperse node, or
when a path of disperse lattice edges inside the local cell neighbourhood
joins their corresponding disperse nodes.  The resulting matching is
unique on well-formed surfaces; the audit reports any line where it is
not.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from .cube import DISP, EDGES, decode_code
from .extract import IsoSurface, NODE_HOST


@dataclass
class GraphNeighborhood:
    """Face- and edge-neighbours of a cell (19 cells for interior cells)."""

    center: tuple
    cells: list       # (ci, cj, ck) including the centre
    truncated: bool   # smaller than 19 because of the domain boundary


_NBR_OFFSETS = [
    (di, dj, dk)
    for di in (-1, 0, 1) for dj in (-1, 0, 1) for dk in (-1, 0, 1)
    if abs(di) + abs(dj) + abs(dk) <= 2
]


def build_neighborhood(cell, part) -> GraphNeighborhood:
    ci, cj, ck = cell
    nx, ny, nz = part.dims
    cells = []
    truncated = False
    for di, dj, dk in _NBR_OFFSETS:
        x, y, z = ci + di, cj + dj, ck + dk
        if 0 <= x < nx and 0 <= y < ny and 0 <= z < nz:
            cells.append((x, y, z))
        else:
            truncated = True
    return GraphNeighborhood(center=tuple(cell), cells=cells, truncated=truncated)


@dataclass
class DispersePath:
    """Open simple path of lattice edges whose endpoints are all disperse."""

    vertices: list

    @property
    def n_edges(self) -> int:
        return len(self.vertices) - 1

    def is_valid(self) -> bool:
        return self.n_edges >= 2 and len(set(self.vertices)) == len(self.vertices)


@dataclass
class EdgeIncidenceRecord:
    key: tuple
    incidents: list        # (path id, edge index)
    kind: str              # "lattice-edge" | "diagonal" | "chord"
    on_boundary: bool

    @property
    def count(self) -> int:
        return len(self.incidents)


@dataclass
class SurfaceComponent:
    component_id: int
    elements: list
    closed: bool


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _key_vertex(key: int):
    return key >> 2 if (key & 3) == NODE_HOST else None


def edge_kind(surface: IsoSurface, ek) -> str:
    va = _key_vertex(ek[0])
    vb = _key_vertex(ek[1])
    if va is None or vb is None:
        return "chord"
    nx, ny, nz = surface.part.dims
    sy, sx = nz + 1, (ny + 1) * (nz + 1)
    d = abs(va - vb)
    return "lattice-edge" if d in (1, sy, sx) else "diagonal"


def _point_on_boundary(surface: IsoSurface, idx: int) -> bool:
    part = surface.part
    p = surface.points[idx]
    for axis in range(3):
        lo = part.origin[axis]
        hi = part.origin[axis] + part.dims[axis] * part.spacing[axis]
        if p[axis] == lo or p[axis] == hi:
            return True
    return False


def _line_on_boundary(surface: IsoSurface, pi: int, ei: int) -> bool:
    p = surface.paths[pi]
    a = p.pts[ei]
    b = p.pts[(ei + 1) % len(p.pts)]
    part = surface.part
    pa, pb = surface.points[a], surface.points[b]
    for axis in range(3):
        lo = part.origin[axis]
        hi = part.origin[axis] + part.dims[axis] * part.spacing[axis]
        if (pa[axis] == lo and pb[axis] == lo) or (pa[axis] == hi and pb[axis] == hi):
            return True
    return False


def _cells_of_neighborhoods(surface: IsoSurface, path_ids):
    part = surface.part
    out = set()
    for pi in path_ids:
        cell = surface.cell_of_flat(surface.paths[pi].cell)
        out.update(build_neighborhood(cell, part).cells)
    return out


def _disperse_adjacency(surface: IsoSurface, cells, exclude=frozenset()):
    """Union of the disperse lattice edges of the given cells' working copies."""
    nx, ny, nz = surface.part.dims
    sy, sx = nz + 1, (ny + 1) * (nz + 1)
    corner_vid = tuple(di * sx + dj * sy + dk for di in (0, 1) for dj in (0, 1) for dk in (0, 1))
    adj = {}
    for (ci, cj, ck) in cells:
        work = decode_code(int(surface.stripped[ci, cj, ck]))
        base = ci * sx + cj * sy + ck
        for a, b in EDGES:
            if work[a] == DISP and work[b] == DISP:
                va = base + corner_vid[a]
                vb = base + corner_vid[b]
                if va in exclude or vb in exclude:
                    continue
                adj.setdefault(va, set()).add(vb)
                adj.setdefault(vb, set()).add(va)
    return adj


def _bfs_connected(adj, src, dst) -> bool:
    if src & dst:
        return True
    seen = set(src)
    frontier = list(src)
    while frontier:
        nxt = []
        for v in frontier:
            for w in adj.get(v, ()):
                if w in seen:
                    continue
                if w in dst:
                    return True
                seen.add(w)
                nxt.append(w)
        frontier = nxt
    return False


def disperse_path_between(surface: IsoSurface, src, dst, cells, exclude=frozenset()):
    """Breadth-first search over disperse edges; returns a DispersePath or None."""
    src = set(src)
    dst = set(dst)
    if not src or not dst:
        return None
    adj = _disperse_adjacency(surface, cells, exclude=exclude)
    frontier = sorted(src)
    prev = {v: None for v in frontier}
    while frontier:
        nxt = []
        for v in frontier:
            for w in sorted(adj.get(v, ())):
                if w in prev:
                    continue
                prev[w] = v
                if w in dst:
                    path = [w]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return DispersePath(path[::-1])
                nxt.append(w)
        frontier = nxt
    return None


def _corr_sets(surface: IsoSurface, rec):
    pi, ei = rec
    _ek, cd, cc = surface.paths[pi].edges[ei]
    return frozenset(cd), cc


def disperse_connected(surface: IsoSurface, rec1, rec2, ek, n_at_line=None) -> bool:
    """Are two iso-paths disperse connected at their shared iso-line?

    Condition 1: they are the only two paths at the line.  Condition 2a: a
    shared corresponding disperse node.  Condition 2b: a disperse path in
    the local neighbourhood joins their corresponding disperse nodes; the
    path may circle around the line but not run through its endpoints.
    Symmetric in the two paths.
    """
    if n_at_line is None:
        em = surface.edge_map()
        n_at_line = len(em.get(ek, ()))
    if n_at_line == 2:
        return True
    c1, _ = _corr_sets(surface, rec1)
    c2, _ = _corr_sets(surface, rec2)
    if c1 & c2:
        return True
    if not c1 or not c2:
        return False
    exclude = frozenset(v for v in (_key_vertex(ek[0]), _key_vertex(ek[1])) if v is not None)
    cells = _cells_of_neighborhoods(surface, [rec1[0], rec2[0]])
    return disperse_path_between(surface, c1, c2, cells, exclude=exclude) is not None


def _perfect_matchings(nodes, compat):
    """All perfect matchings of the given record indices under ``compat``."""
    if not nodes:
        return [[]]
    out = []
    first = nodes[0]
    for j in nodes[1:]:
        if compat(first, j):
            rest = [k for k in nodes if k not in (first, j)]
            for sub in _perfect_matchings(rest, compat):
                out.append([(first, j)] + sub)
    return out


def unique_perfect_matching(n, compat):
    """The unique perfect matching of 0..n-1, or (None, issue)."""
    matchings = _perfect_matchings(list(range(n)), compat)
    if not matchings:
        return None, f"no disperse-connected matching of {n} paths"
    if len(matchings) > 1:
        uniq = {frozenset(m) for m in matchings}
        if len(uniq) > 1:
            return None, f"ambiguous matching of {n} paths"
        matchings = [sorted(uniq.pop())]
    return matchings[0], None


def _ring_cells_of_lattice_edge(surface: IsoSurface, ek):
    """The up-to-four cells around a lattice-edge iso-line."""
    va = _key_vertex(ek[0])
    vb = _key_vertex(ek[1])
    nx, ny, nz = surface.part.dims
    sy, sx = nz + 1, (ny + 1) * (nz + 1)
    lo = min(va, vb)
    d = abs(va - vb)
    axis = {1: 2, sy: 1, sx: 0}[d]
    i, r = divmod(lo, sx)
    j, k = divmod(r, sy)
    out = []
    deltas = [(0, 0), (-1, 0), (0, -1), (-1, -1)]
    ua, ub = [a for a in range(3) if a != axis]
    for da, db in deltas:
        cell = [i, j, k]
        cell[ua] += da
        cell[ub] += db
        if 0 <= cell[0] < nx and 0 <= cell[1] < ny and 0 <= cell[2] < nz:
            out.append(tuple(cell))
    return out, (va, vb)


def pair_at_edge(surface: IsoSurface, ek, incidents):
    """Unique perfect matching of the paths at one iso-line.

    Two paths always pair when they are the only two at the line.  Bundles
    pair by a shared corresponding disperse node; on lattice-edge lines a
    pair may also connect through ring cells that carry no path at the
    line and are at least seven-disperse, via a disperse-edge path that
    avoids the line's own endpoints.  Returns (pairs, issue) with pairs a
    list of ((pi, ei), (qj, ej)).
    """
    n = len(incidents)
    if n == 0:
        return [], None
    if n == 1:
        return [], None if _line_on_boundary(surface, *incidents[0]) else "open interior iso-line"
    if n == 2:
        return [tuple(incidents)], None
    if n % 2:
        return [], f"odd incidence {n}"
    corr = [_corr_sets(surface, r)[0] for r in incidents]
    kind = edge_kind(surface, ek)
    adj = None
    exclude = frozenset()
    if kind == "lattice-edge":
        ring, endpoints = _ring_cells_of_lattice_edge(surface, ek)
        cells_with_recs = {
            surface.cell_of_flat(surface.paths[pi].cell) for pi, _ei in incidents
        }
        conducting = []
        for cell in ring:
            if cell in cells_with_recs:
                continue
            work = decode_code(int(surface.stripped[cell]))
            if sum(1 for s in work if s == DISP) >= 7:
                conducting.append(cell)
        exclude = frozenset(endpoints)
        adj = _disperse_adjacency(surface, conducting, exclude=exclude)
    cache = {}

    def compat(i, j):
        key = (i, j) if i < j else (j, i)
        hit = cache.get(key)
        if hit is None:
            if corr[i] & corr[j]:
                hit = True
            elif not corr[i] or not corr[j] or adj is None:
                hit = False
            else:
                hit = _bfs_connected(adj, corr[i], corr[j])
            cache[key] = hit
        return hit

    pairs, issue = unique_perfect_matching(n, compat)
    if pairs is None:
        return [], issue
    return [(incidents[i], incidents[j]) for i, j in pairs], None


def build_matching(surface: IsoSurface):
    """Matching over all iso-lines: (edge key, path id) -> partner path id.

    Also returns the per-line incidence records and any pairing issues.
    """
    em = surface.edge_map()
    matching = {}
    records = {}
    issues = []
    for ek in em:
        incidents = em[ek]
        pairs, issue = pair_at_edge(surface, ek, incidents)
        kind = edge_kind(surface, ek)
        records[ek] = EdgeIncidenceRecord(
            key=ek, incidents=incidents, kind=kind,
            on_boundary=_line_on_boundary(surface, *incidents[0]),
        )
        if issue:
            issues.append((ek, issue))
        for (pa, _ea), (pb, _eb) in pairs:
            matching[(ek, pa)] = pb
            matching[(ek, pb)] = pa
    return matching, records, issues


# ---------------------------------------------------------------------------
# components
# ---------------------------------------------------------------------------

class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def decompose_components(surface: IsoSurface, matching=None):
    """Partition the elements into disperse-connected components.

    Adjacency is the matched pairing only; two components may share
    isolated points or segments but never an element.  Component ids are
    the smallest member element id.
    """
    if matching is None:
        matching, _records, _issues = build_matching(surface)
    n = len(surface.paths)
    uf = _UnionFind(n)
    for (ek, pa), pb in matching.items():
        uf.union(pa, pb)
    groups = {}
    for pi in range(n):
        groups.setdefault(uf.find(pi), []).append(pi)
    comps = []
    for root in sorted(groups, key=lambda r: min(groups[r])):
        members = sorted(groups[root])
        cid = members[0]
        closed = True
        for pi in members:
            surface.paths[pi].component = cid
            for ei in range(len(surface.paths[pi].edges)):
                ek = surface.paths[pi].edges[ei][0]
                if (ek, pi) not in matching:
                    closed = False
        comps.append(SurfaceComponent(component_id=cid, elements=members, closed=closed))
    return comps


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

@dataclass
class AuditReport:
    violations: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def render(self) -> str:
        lines = list(self.violations)
        lines.append("# summary")
        for k in sorted(self.counts):
            lines.append(f"# {k} = {self.counts[k]}")
        return "\n".join(lines) + "\n"


_PARITY_ALLOWED = {
    "lattice-edge": {2, 4, 6, 8},
    "diagonal": {2, 4},
    "chord": {2},
}


def audit_connectivity(surface: IsoSurface, *, check_rings: bool = True) -> AuditReport:
    """Verify incidence parity, matching, and one-ring bounds.

    Iso-lines and iso-points on the domain boundary are exempt; every
    violation becomes one report line.
    """
    from .geometry import neighbor_ring

    report = AuditReport()
    matching, records, issues = build_matching(surface)
    for ek, issue in issues:
        report.violations.append(f"line {ek}: {issue}")
    n_interior = 0
    for ek, rec in records.items():
        if _line_on_boundary(surface, *rec.incidents[0]):
            continue
        n_interior += 1
        if rec.count < 2:
            report.violations.append(f"line {ek}: interior incidence {rec.count} < 2")
            continue
        if rec.count not in _PARITY_ALLOWED[rec.kind]:
            report.violations.append(
                f"line {ek}: {rec.kind} incidence {rec.count} not allowed"
            )
    ring_hist = {}
    if check_rings:
        seen = set()
        for pi, p in enumerate(surface.paths):
            for key, idx in zip(p.keys, p.pts):
                if idx in seen:
                    continue
                seen.add(idx)
                if _point_on_boundary(surface, idx):
                    continue
                ring = neighbor_ring(surface, matching, key, pi)
                if not ring.closed:
                    report.violations.append(f"point {key}: open ring")
                    continue
                nring = len(ring.paths)
                ring_hist[nring] = ring_hist.get(nring, 0) + 1
                if not 4 <= nring <= 8:
                    report.violations.append(f"point {key}: ring size {nring}")
    report.counts = {
        "paths": len(surface.paths),
        "iso_lines": len(records),
        "interior_iso_lines": n_interior,
        "violations": len(report.violations),
        **{f"ring_{k}": v for k, v in sorted(ring_hist.items())},
    }
    return report
