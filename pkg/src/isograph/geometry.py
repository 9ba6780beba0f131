"""Oriented triangle fans, pseudo-normals, one-rings and mean curvature.

Element orientation never consults the label gradient: the pseudo-normal
of an element's owning single-path piece is the sum of all vectors from
its disperse corners to its continuous corners, which points from the
disperse into the continuous phase.  A closed-form identity (the double
sum equals |N_d| * sum of all corners - 8 * sum of disperse corners) makes
it cheap; both routes are exposed so they can be checked against each
other exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import CORNER_OFFSETS, LabeledCuboidGraph
from .extract import IsoSurface


class NoInterfaceError(RuntimeError):
    pass


@dataclass
class PseudoNormal:
    vector: np.ndarray
    disperse: tuple     # corner indices with label > c
    continuous: tuple
    degenerate: bool    # zero vector (symmetric configurations)


def pseudo_normal_double_sum(positions, mask: int) -> np.ndarray:
    """Sum over disperse corners j and continuous corners i of (C_i - D_j)."""
    pos = np.asarray(positions, dtype=np.float64).reshape(8, 3)
    d = [n for n in range(8) if mask >> n & 1]
    c = [n for n in range(8) if not mask >> n & 1]
    out = np.zeros(3)
    for j in d:
        for i in c:
            out += pos[i] - pos[j]
    return out


def pseudo_normal_closed_form(positions, mask: int) -> np.ndarray:
    pos = np.asarray(positions, dtype=np.float64).reshape(8, 3)
    nd = bin(mask & 0xFF).count("1")
    sum_all = pos.sum(axis=0)
    sum_d = np.zeros(3)
    for n in range(8):
        if mask >> n & 1:
            sum_d += pos[n]
    return nd * sum_all - 8.0 * sum_d


def pseudo_normal(g_or_positions, mask: int = None) -> PseudoNormal:
    """Pseudo-normal of a cell or of an explicit (positions, disperse mask).

    Requires 1 <= |N_d| <= 7; a cell with no interface has no normal.
    """
    if isinstance(g_or_positions, LabeledCuboidGraph):
        st = g_or_positions.states()
        mask = 0
        for n in range(8):
            if st[n] == 2:
                mask |= 1 << n
        pos = g_or_positions.positions
    else:
        pos = np.asarray(g_or_positions, dtype=np.float64).reshape(8, 3)
    nd = bin(mask & 0xFF).count("1")
    if nd in (0, 8):
        raise NoInterfaceError(f"|N_d| = {nd}: no interface in this cell")
    vec = pseudo_normal_closed_form(pos, mask)
    return PseudoNormal(
        vector=vec,
        disperse=tuple(n for n in range(8) if mask >> n & 1),
        continuous=tuple(n for n in range(8) if not mask >> n & 1),
        degenerate=bool(np.all(vec == 0.0)),
    )


# ---------------------------------------------------------------------------
# orientation
# ---------------------------------------------------------------------------

def _cell_corner_positions(surface: IsoSurface, flat: int):
    part = surface.part
    nx, ny, nz = part.dims
    ci, r = divmod(flat, ny * nz)
    cj, ck = divmod(r, nz)
    org = np.asarray(part.origin)
    sp = np.asarray(part.spacing)
    return org + sp * (np.array(CORNER_OFFSETS) + (ci, cj, ck))


def path_area_vector(surface: IsoSurface, pi: int) -> np.ndarray:
    pts = surface.path_points(pi)
    m = len(pts)
    acc = np.zeros(3)
    for i in range(m):
        acc += np.cross(pts[i], pts[(i + 1) % m])
    return 0.5 * acc


def orient_elements(surface: IsoSurface) -> int:
    """Fix every path's traversal so triangle normals point out of the
    disperse phase; returns the number of paths that needed the neighbour
    fallback (pseudo-normal exactly zero).

    Idempotent; sets ``flip`` on each path.
    """
    if getattr(surface, "_oriented", False):
        return getattr(surface, "_n_degenerate", 0)
    degenerate = []
    for pi, p in enumerate(surface.paths):
        if p.normal_hint is not None:
            ref = p.normal_hint
        elif p.mask not in (0, 0xFF):
            ref = pseudo_normal_closed_form(
                _cell_corner_positions(surface, p.cell), p.mask
            )
        else:
            ref = np.zeros(3)
        a = path_area_vector(surface, pi)
        s = float(np.dot(a, ref))
        if s == 0.0:
            degenerate.append(pi)
        else:
            p.flip = s < 0.0
    if degenerate:
        _propagate_orientation(surface, degenerate)
    surface._oriented = True
    surface._n_degenerate = len(degenerate)
    return len(degenerate)


def _propagate_orientation(surface: IsoSurface, degenerate):
    """Inherit orientation across shared iso-lines, breadth-first.

    Two consistently oriented elements traverse a shared edge in opposite
    directions.
    """
    em = surface.edge_map()
    todo = set(degenerate)
    changed = True
    while todo and changed:
        changed = False
        for pi in sorted(todo):
            p = surface.paths[pi]
            for ei, (ek, _cd, _cc) in enumerate(p.edges):
                partner = next(
                    (qi for qi, _qe in em.get(ek, []) if qi != pi and qi not in todo),
                    None,
                )
                if partner is None:
                    continue
                q = surface.paths[partner]
                same = _same_direction(surface, pi, ei, partner, ek)
                p.flip = (not q.flip) if same else q.flip
                todo.discard(pi)
                changed = True
                break
    # an isolated degenerate element stays flagged
    surface._unoriented = sorted(todo)


def _same_direction(surface, pi, ei, qi, ek):
    p, q = surface.paths[pi], surface.paths[qi]
    a = p.keys[ei]
    qe = next(j for j, (k, _d, _c) in enumerate(q.edges) if k == ek)
    b = q.keys[qe]
    return a == b


# ---------------------------------------------------------------------------
# one-rings and surface regions
# ---------------------------------------------------------------------------

@dataclass
class NeighborRing:
    """Cyclic sequence of iso-paths around one iso-point."""

    point: int            # welded point index
    paths: list           # path ids, cyclic
    ring_points: list     # welded point index of the other end of each shared line
    closed: bool


def _edges_at_point(path, key):
    out = []
    m = len(path.keys)
    for i, k in enumerate(path.keys):
        if k == key:
            out.append((i - 1) % m)  # edge arriving at the point
            out.append(i)            # edge leaving it
    return out


def neighbor_ring(surface: IsoSurface, matching: dict, point_key, start_path: int):
    """Walk the fan of paths around an iso-point via matched shared lines.

    ``matching`` maps (iso-line key, path id) -> partner path id.  The walk
    is closed with 4..8 paths at interior points of a well-formed surface;
    an open walk marks a boundary point (or an extraction defect).
    """
    p0 = surface.paths[start_path]
    e0, e1 = _edges_at_point(p0, point_key)[:2]

    def other_end(pi, ei):
        p = surface.paths[pi]
        a, b = p.pts[ei], p.pts[(ei + 1) % len(p.pts)]
        here = surface.paths[start_path].pts[
            surface.paths[start_path].keys.index(point_key)
        ]
        return b if a == here else a

    paths = [start_path]
    ring_pts = []
    cur, cur_edge = start_path, e1
    for _ in range(16):
        p = surface.paths[cur]
        ek = p.edges[cur_edge][0]
        ring_pts.append(other_end(cur, cur_edge))
        partner = matching.get((ek, cur))
        if partner is None:
            return NeighborRing(p0.pts[p0.keys.index(point_key)], paths, ring_pts, False)
        if partner == start_path:
            return NeighborRing(p0.pts[p0.keys.index(point_key)], paths, ring_pts, True)
        paths.append(partner)
        q = surface.paths[partner]
        qedges = _edges_at_point(q, point_key)
        qe = next(j for j in qedges if q.edges[j][0] != ek)
        cur, cur_edge = partner, qe
    return NeighborRing(p0.pts[p0.keys.index(point_key)], paths, ring_pts, False)


@dataclass
class SurfaceRegion:
    """One-ring patch around an iso-point, for curvature estimation."""

    center: np.ndarray
    boundary: list        # cyclic boundary vertex positions
    triangles: list       # (center, a, b) per patch triangle
    n_paths: int
    valid: bool


def surface_region(surface: IsoSurface, ring: NeighborRing) -> SurfaceRegion:
    """Patch the ring per element: one triangle across triangular or
    face-resident elements, two centre-linked triangles otherwise."""
    if not ring.closed:
        return SurfaceRegion(surface.points[ring.point], [], [], len(ring.paths), False)
    P = surface.points[ring.point]
    n = len(ring.paths)
    boundary = []
    for i in range(n):
        # sector crossed by ring.paths[i] lies between shared lines i-1 and i
        prev_pt = surface.points[ring.ring_points[(i - 1) % n]]
        path = surface.paths[ring.paths[i]]
        boundary.append(prev_pt)
        if len(path.pts) > 3 and path.kind != "outer":
            boundary.append(surface.path_center(ring.paths[i]))
    tris = []
    m = len(boundary)
    for i in range(m):
        tris.append((P, boundary[i], boundary[(i + 1) % m]))
    return SurfaceRegion(P, boundary, tris, n, True)


@dataclass
class CurvatureEstimate:
    mean_curvature: float   # total curvature (sum of principal curvatures)
    area: float
    valid: bool


def fan_triangles(surface: IsoSurface):
    """Global fan triangulation (oriented) and the center-vertex mapping.

    Returns (vertices, triangles, center_index) where centres are appended
    after the welded iso-points and center_index maps a path id to its
    centre vertex id (paths with more than three points only).
    """
    orient_elements(surface)
    npts = len(surface.points)
    centers = []
    tris = []
    center_index = {}
    for pi, p in enumerate(surface.paths):
        idx = list(p.pts) if not p.flip else list(p.pts[::-1])
        m = len(idx)
        if m == 3:
            tris.append(idx)
            continue
        cid = npts + len(centers)
        center_index[pi] = cid
        centers.append(surface.path_points(pi).mean(axis=0))
        for i in range(m):
            tris.append([idx[i], idx[(i + 1) % m], cid])
    verts = np.vstack([surface.points] + ([np.asarray(centers)] if centers else []))
    return verts, np.asarray(tris, dtype=np.int64).reshape(-1, 3), center_index


def vertex_normals(verts, tris, smoothing_rounds: int = 0):
    """Area-weighted, oriented vertex normals, optionally averaged with
    their mesh neighbours (one round damps the lattice-scale wiggle of the
    extracted points)."""
    fn = np.cross(verts[tris[:, 1]] - verts[tris[:, 0]],
                  verts[tris[:, 2]] - verts[tris[:, 0]])
    acc = np.zeros_like(verts)
    for col in range(3):
        np.add.at(acc, tris[:, col], fn)
    nn = np.linalg.norm(acc, axis=1)
    nn[nn == 0.0] = 1.0
    normals = acc / nn[:, None]
    for _ in range(smoothing_rounds):
        acc = normals.copy()
        for a_col, b_col in ((0, 1), (1, 2), (2, 0)):
            np.add.at(acc, tris[:, a_col], normals[tris[:, b_col]])
            np.add.at(acc, tris[:, b_col], normals[tris[:, a_col]])
        nn = np.linalg.norm(acc, axis=1)
        nn[nn == 0.0] = 1.0
        normals = acc / nn[:, None]
    return normals


def _normal_quotient_h(P, nP, ring_pts, ring_normals):
    """Total curvature from the normal-difference quotient over one ring.

    kappa along each spoke is ((n_j - n_P) . dx) / |dx|^2, which is exact
    on a sphere; spokes are weighted by their adjacent fan area.
    """
    m = len(ring_pts)
    num = 0.0
    den = 0.0
    for t in range(m):
        dx = ring_pts[t] - P
        L2 = float(dx @ dx)
        if L2 <= 0.0:
            continue
        kj = float((ring_normals[t] - nP) @ dx) / L2
        a = ring_pts[(t - 1) % m] - P
        b = ring_pts[(t + 1) % m] - P
        w = (np.linalg.norm(np.cross(ring_pts[t] - P, a))
             + np.linalg.norm(np.cross(b, ring_pts[t] - P)))
        num += w * kj
        den += w
    if den <= 0.0:
        return None
    return 2.0 * num / den


def curvature_field(surface: IsoSurface, matching=None, *,
                    strategy: str = "normal-quotient",
                    normal_smoothing: int = 1):
    """Discrete mean curvature at every interior iso-point and fan centre.

    The default strategy differences once-averaged vertex normals along
    the spokes of each iso-point's one-ring (robust against the
    lattice-scale wiggle of extracted points); ``strategy="cotan"``
    applies the cotangent operator over each surface region instead.
    Returns (values, valid) arrays indexed like ``fan_triangles`` vertices.
    """
    from .components import build_matching
    if matching is None:
        matching, _records, _issues = build_matching(surface)
    verts, tris, center_index = fan_triangles(surface)
    normals = vertex_normals(verts, tris,
                             normal_smoothing if strategy == "normal-quotient" else 0)
    values = np.zeros(len(verts))
    valid = np.zeros(len(verts), dtype=bool)
    seen = set()
    for pi, p in enumerate(surface.paths):
        for key, idx in zip(p.keys, p.pts):
            if idx in seen:
                continue
            seen.add(idx)
            ring = neighbor_ring(surface, matching, key, pi)
            if not ring.closed:
                continue
            if strategy == "cotan":
                region = surface_region(surface, ring)
                est = mean_curvature(region, orientation_ref=normals[idx])
                values[idx], valid[idx] = est.mean_curvature, est.valid
                continue
            ring_ids = ring.ring_points
            h = _normal_quotient_h(verts[idx], normals[idx],
                                   [verts[q] for q in ring_ids],
                                   [normals[q] for q in ring_ids])
            if h is not None:
                values[idx], valid[idx] = h, True
    # fan centres: quotient against the element's own boundary cycle
    for pi, cid in center_index.items():
        ring_ids = list(surface.paths[pi].pts)
        h = _normal_quotient_h(verts[cid], normals[cid],
                               [verts[q] for q in ring_ids],
                               [normals[q] for q in ring_ids])
        if h is not None:
            values[cid], valid[cid] = h, True
    return values, valid


def mean_curvature(region: SurfaceRegion, orientation_ref=None) -> CurvatureEstimate:
    """Cotangent-weighted discrete mean curvature over the surface region.

    One-third of the patch area normalises the integrated Laplacian; the
    sign follows the element orientation (positive when the surface bends
    toward the continuous phase).  Returns the sum of the two principal
    curvatures (2/R on a sphere of disperse phase).
    """
    if not region.valid or len(region.boundary) < 3:
        return CurvatureEstimate(0.0, 0.0, False)
    P = region.center
    ring = np.asarray(region.boundary)
    m = len(ring)
    area = 0.0
    normal = np.zeros(3)
    for i in range(m):
        a, b = ring[i], ring[(i + 1) % m]
        cr = np.cross(a - P, b - P)
        area += 0.5 * np.linalg.norm(cr)
        normal += 0.5 * cr
    if area <= 0.0:
        return CurvatureEstimate(0.0, 0.0, False)
    if orientation_ref is not None and float(np.dot(normal, orientation_ref)) < 0.0:
        normal = -normal
    nn = np.linalg.norm(normal)
    if nn == 0.0:
        return CurvatureEstimate(0.0, area, False)
    normal /= nn
    acc = np.zeros(3)
    for i in range(m):
        xj = ring[i]
        xa = ring[(i - 1) % m]
        xb = ring[(i + 1) % m]
        ca = _cot(P - xa, xj - xa)
        cb = _cot(P - xb, xj - xb)
        acc += (ca + cb) * (P - xj)
    # integrated Laplacian over one third of the patch area; its magnitude
    # is k1 + k2 and it points along the outward normal on a convex bulge
    k_vec = acc / (2.0 * (area / 3.0))
    h_total = float(np.dot(k_vec, normal))
    return CurvatureEstimate(h_total, area, True)


def _cot(u, v):
    cr = np.linalg.norm(np.cross(u, v))
    if cr < 1e-300:
        return 0.0
    return float(np.dot(u, v)) / cr
