"""Cuboid partition, vertex labeling, and the volume-conserving iso-level.

Cell-centered volume fractions become vertex labels by averaging over the
cells incident to each lattice vertex.  The iso-level is then chosen so
that the volume enclosed by the extracted surface matches the fraction
field's total volume: the residual

    gamma(c) = 1 - enclosed_volume(c) / sum_i v(C_i) |C_i|

is non-decreasing in c (the enclosed volume shrinks as the level rises)
and may jump where the label field attains c on whole edges, so the
solver is a derivative-free bisection that reports non-attainment when a
jump straddles zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cube import (
    CORNER_OFFSETS,
    DEFAULT_ISO_SNAP,
    DISP,
    FACE_CYCLES,
    SUB,
    FaceClass,
    classify_face_cycle,
    decode_code,
)
from .extract import IsoSurface, _table_kind, extract_grid
from .rules import RuleKind


class InputError(ValueError):
    """Malformed or inconsistent user input."""


class NoInterfaceError(RuntimeError):
    """The fraction field encloses no volume, so no iso-level exists."""


@dataclass(frozen=True)
class CuboidPartition:
    """Axis-aligned partition of a box into nx*ny*nz cuboid cells.

    Vertex (i, j, k) sits at origin + (i dx, j dy, k dz); two cells share
    exactly a face, an edge, a vertex, or nothing.
    """

    dims: tuple
    origin: tuple = (0.0, 0.0, 0.0)
    spacing: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "spacing", tuple(float(x) for x in self.spacing))
        if any(d < 1 for d in dims):
            raise InputError(f"dims must all be >= 1, got {dims}")
        if any(s <= 0 for s in self.spacing):
            raise InputError(f"spacing must be positive, got {self.spacing}")

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def cell_volume(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    @property
    def total_volume(self) -> float:
        return self.cell_volume * self.n_cells

    @property
    def vertex_dims(self) -> tuple:
        return tuple(d + 1 for d in self.dims)

    def vertex_positions_axis(self, axis: int) -> np.ndarray:
        n = self.dims[axis] + 1
        return self.origin[axis] + self.spacing[axis] * np.arange(n)

    def boundary_mask(self) -> np.ndarray:
        nx, ny, nz = self.dims
        m = np.zeros((nx, ny, nz), dtype=bool)
        m[0, :, :] = m[-1, :, :] = True
        m[:, 0, :] = m[:, -1, :] = True
        m[:, :, 0] = m[:, :, -1] = True
        return m


@dataclass
class VolumeFractionField:
    """Cell-centered fractions of the disperse phase, each in [0, 1]."""

    values: np.ndarray
    part: CuboidPartition

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.part.dims:
            raise InputError(f"field shape {v.shape} does not match dims {self.part.dims}")
        if np.any(v < 0.0) or np.any(v > 1.0):
            bad = np.argwhere((v < 0.0) | (v > 1.0))[0]
            raise InputError(f"fraction out of [0, 1] at cell {tuple(int(x) for x in bad)}")
        self.values = v

    @property
    def target_volume(self) -> float:
        return float(self.values.sum()) * self.part.cell_volume


@dataclass
class NodeLabeling:
    """Per-vertex labels on the (nx+1, ny+1, nz+1) lattice, each in [0, 1]."""

    values: np.ndarray
    part: CuboidPartition

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.part.vertex_dims:
            raise InputError(
                f"label lattice {v.shape} does not match vertex dims {self.part.vertex_dims}"
            )
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise InputError("vertex label out of [0, 1]")
        self.values = v


def label_vertices(field: VolumeFractionField, part: CuboidPartition = None) -> NodeLabeling:
    """Average the fractions of all cells incident to each lattice vertex.

    Interior vertices see 8 cells, face/edge/corner boundary vertices see
    4/2/1; the result is independent of enumeration order.
    """
    part = part or field.part
    if part.dims != field.part.dims:
        raise InputError("field and partition dims disagree")
    nx, ny, nz = part.dims
    acc = np.zeros((nx + 1, ny + 1, nz + 1), dtype=np.float64)
    cnt = np.zeros_like(acc)
    v = field.values
    for di, dj, dk in CORNER_OFFSETS:
        acc[di:di + nx, dj:dj + ny, dk:dk + nz] += v
        cnt[di:di + nx, dj:dj + ny, dk:dk + nz] += 1.0
    return NodeLabeling(acc / cnt, part)


# ---------------------------------------------------------------------------
# enclosed volume
# ---------------------------------------------------------------------------

def _oriented_triangle_flux(surface: IsoSurface) -> float:
    """Sum of signed tetrahedron volumes over all oriented fan triangles."""
    from .geometry import orient_elements
    orient_elements(surface)
    total = 0.0
    pts = surface.points
    for p in surface.paths:
        idx = p.pts if not p.flip else p.pts[::-1]
        m = len(idx)
        if m == 3:
            a, b, c = pts[idx[0]], pts[idx[1]], pts[idx[2]]
            total += np.dot(a, np.cross(b, c))
            continue
        pc = pts[idx].mean(axis=0)
        for i in range(m):
            a, b = pts[idx[i]], pts[idx[(i + 1) % m]]
            total += np.dot(a, np.cross(b, pc))
    return total / 6.0


def _face_crossing_pos(ctx_pos, lab, c, t_a, t_b):
    """Crossing point on the face edge between cycle positions t_a, t_b."""
    la, lb = lab[t_a], lab[t_b]
    pa, pb = ctx_pos[t_a], ctx_pos[t_b]
    if la == c:
        return pa
    if lb == c:
        return pb
    t = (c - la) / (lb - la)
    return pa + (pb - pa) * t


def _tri_area(p, a, b):
    return 0.5 * np.linalg.norm(np.cross(a - p, b - p))


def _corner_triangle_area(pos, lab, c, t):
    a = _face_crossing_pos(pos, lab, c, (t - 1) % 4, t)
    b = _face_crossing_pos(pos, lab, c, t, (t + 1) % 4)
    return _tri_area(pos[t], a, b)


def _boundary_face_disperse_area(work_face, raw_lab, pos, c, kind):
    """Area of the disperse part of one domain-boundary face.

    ``work_face`` are the stripped corner states in cycle order, ``raw_lab``
    the pre-strip labels (positions interpolate these, matching the emitted
    chords), ``kind`` the cell's rule selection for L-face resolution.
    """
    fc = classify_face_cycle(*work_face)
    full = _tri_area(pos[0], pos[1], pos[2]) + _tri_area(pos[0], pos[2], pos[3])
    if fc in (FaceClass.DISPERSE, FaceClass.SINGULAR, FaceClass.TRIVIAL_L):
        return full
    if fc == FaceClass.CONTINUOUS:
        return 0.0
    if fc == FaceClass.REGULAR:
        nd = sum(1 for s in work_face if s == DISP)
        if nd == 1:
            t = work_face.index(DISP)
            return _corner_triangle_area(pos, raw_lab, c, t)
        if nd == 2:
            return _two_disp_area(work_face, raw_lab, pos, c)
        # nd == 3: everything except the cut around the continuous corner
        t = next(t for t in range(4) if work_face[t] != DISP)
        return full - _corner_triangle_area(pos, raw_lab, c, t)
    # non-trivial L-face: resolved by the cell's rule kind
    if kind in (RuleKind.S1, RuleKind.S2):
        return sum(
            _corner_triangle_area(pos, raw_lab, c, t)
            for t in range(4) if work_face[t] == DISP
        )
    return full - sum(
        _corner_triangle_area(pos, raw_lab, c, t)
        for t in range(4) if work_face[t] == SUB
    )


def _two_disp_area(work_face, raw_lab, pos, c):
    ts = [t for t in range(4) if work_face[t] == DISP]
    t0, t1 = ts
    if (t1 - t0) % 4 == 3:
        t0, t1 = t1, t0
    a = _face_crossing_pos(pos, raw_lab, c, (t0 - 1) % 4, t0)
    b = _face_crossing_pos(pos, raw_lab, c, t1, (t1 + 1) % 4)
    quad = [pos[t0], pos[t1], b, a]
    return _tri_area(quad[0], quad[1], quad[2]) + _tri_area(quad[0], quad[2], quad[3])


def _boundary_cap_flux(surface: IsoSurface) -> float:
    """x.n flux over the disperse parts of the six domain boundary planes."""
    part = surface.part
    nx, ny, nz = part.dims
    lab = surface.labels
    stripped = surface.stripped
    sp = np.asarray(part.spacing)
    org = np.asarray(part.origin)
    total = 0.0
    for axis in range(3):
        for side in (0, 1):
            f = 2 * axis + side
            cyc = FACE_CYCLES[f]
            plane = org[axis] + (part.dims[axis] if side else 0) * sp[axis]
            sign = 1.0 if side else -1.0
            cells = _side_cells(part.dims, axis, side)
            for ci, cj, ck in cells:
                sc = int(stripped[ci, cj, ck])
                if sc == 0:
                    continue
                work = decode_code(sc)
                wf = tuple(work[n] for n in cyc)
                if all(s != DISP for s in wf):
                    continue
                pos, rl = [], []
                for n in cyc:
                    oi, oj, ok = CORNER_OFFSETS[n]
                    pos.append(org + sp * (ci + oi, cj + oj, ck + ok))
                    rl.append(lab[ci + oi, cj + oj, ck + ok])
                area = _boundary_face_disperse_area(wf, rl, pos, surface.c, _table_kind(sc))
                total += sign * plane * area
    return total / 3.0


def _side_cells(dims, axis, side):
    nx, ny, nz = dims
    idx = [np.arange(nx), np.arange(ny), np.arange(nz)]
    idx[axis] = np.array([dims[axis] - 1 if side else 0])
    g = np.meshgrid(*idx, indexing="ij")
    return np.stack([a.ravel() for a in g], axis=1)


def enclosed_volume(labels, part: CuboidPartition, c: float,
                    *, snap_tol: float = DEFAULT_ISO_SNAP,
                    surface: IsoSurface = None) -> float:
    """Volume on the disperse side of the extracted surface.

    Computed exactly by the divergence theorem: signed flux over the
    oriented triangle fans plus the disperse parts of the domain boundary
    (so fields whose phase touches the boundary are still measured).
    Non-increasing in c.
    """
    if not 0.0 < c < 1.0:
        raise InputError(f"iso-level must lie in (0, 1), got {c}")
    if surface is None:
        surface = extract_grid(labels, part, c, snap_tol=snap_tol)
    vol = _oriented_triangle_flux(surface) + _boundary_cap_flux(surface)
    return max(vol, 0.0)


@dataclass
class IsoLevelSolve:
    """Result of the volume-conserving iso-level search."""

    c: float
    residual: float
    volume: float
    eps: float
    bracket: tuple
    iterations: int
    attained: bool


def gamma_residual(labels, part: CuboidPartition, field: VolumeFractionField,
                   c: float, *, snap_tol: float = DEFAULT_ISO_SNAP) -> float:
    target = field.target_volume
    if target <= 0.0:
        raise NoInterfaceError("fraction field has zero total volume")
    return 1.0 - enclosed_volume(labels, part, c, snap_tol=snap_tol) / target


def solve_iso_level(labels, part: CuboidPartition, field: VolumeFractionField,
                    eps: float = 1e-9, *, snap_tol: float = DEFAULT_ISO_SNAP,
                    max_iterations: int = 200) -> IsoLevelSolve:
    """Bisect the volume residual over (0, 1).

    The residual is monotone but can be flat or jump, so the solver is
    derivative-free; if the bracket collapses onto a jump that straddles
    zero without reaching ``eps``, the level minimising the absolute
    residual is returned with ``attained=False``.
    """
    if eps <= 0.0:
        raise InputError("eps must be positive")
    target = field.target_volume
    if target <= 0.0:
        raise NoInterfaceError("fraction field has zero total volume")

    def gam(c):
        return 1.0 - enclosed_volume(labels, part, c, snap_tol=snap_tol) / target

    lo, hi = 1e-12, 1.0 - 1e-12
    glo, ghi = gam(lo), gam(hi)
    iterations = 2
    attained = False
    c_best, g_best = (lo, glo) if abs(glo) <= abs(ghi) else (hi, ghi)
    if abs(g_best) < eps:
        attained = True
    elif glo <= 0.0 <= ghi:
        while iterations < max_iterations and hi - lo > 1e-14:
            mid = 0.5 * (lo + hi)
            g = gam(mid)
            iterations += 1
            if abs(g) < eps:
                c_best, g_best, attained = mid, g, True
                break
            if g < 0.0:
                lo, glo = mid, g
            else:
                hi, ghi = mid, g
        if not attained:
            # the residual jumps across the root: report the level that
            # minimises it over the final bracket
            if abs(glo) < abs(ghi):
                c_best, g_best = lo, glo
            elif abs(ghi) < abs(glo):
                c_best, g_best = hi, ghi
            else:
                c_best, g_best = 0.5 * (lo + hi), gam(0.5 * (lo + hi))
                iterations += 1
    vol = target * (1.0 - g_best)
    return IsoLevelSolve(
        c=c_best, residual=g_best, volume=vol, eps=eps,
        bracket=(lo, hi), iterations=iterations, attained=attained,
    )
