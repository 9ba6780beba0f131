"""Iso-point interpolation and per-cell iso-path extraction.

The per-grid algorithm is cell-parallel and O(N):

1. snap labels and classify every lattice vertex (< c, = c, > c),
2. per cell, strip zero-area and membrane pieces (T/F rules; the shared
   face membrane consults the face neighbour),
3. peel inner iso-paths off reducible cells (S rules per the selection
   table), then assemble the rest graph's single path from the chords of
   its regular faces (C rules),
4. a second pass emits the planar face-resident paths that live on
   shared non-trivial L-faces when the two sides' rule kinds disagree.

Every cell's combinatorial work is a pure function of its 8-corner state
code, so step 2/3 compile once per code into a ``CellProgram`` template
that the grid loop merely instantiates.  Iso-points are keyed by their
host lattice edge (or vertex), which makes coincident points bitwise
identical across cells without any tolerance-based merge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import (
    ALL_DISP_CODE,
    CORNER_OFFSETS,
    DEFAULT_ISO_SNAP,
    DISP,
    EDGES,
    EDGE_AXIS,
    EDGE_INDEX,
    FACE_AXIS,
    FACE_CYCLES,
    FACE_SIDE,
    ISO,
    SUB,
    FaceClass,
    LabeledCuboidGraph,
    classify_states,
    decode_code,
    encode_states,
    face_class_of_states,
    face_through,
    f2_candidate_face,
    snap_labels,
)
from .rules import (
    ClassificationError,
    RuleKind,
    peel_sequence,
    piece_disperse_mask,
    s2_flanks,
    select_s_rule,
    strip_states,
)

NODE_HOST = 3  # host-key tag for iso-points sitting exactly on a vertex

_EDGE_LOWER = tuple(e[0] for e in EDGES)


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IsoPoint:
    position: np.ndarray
    host: tuple            # ("e", edge index) or ("n", corner index), cell-local
    f0: float
    f1: float
    is_node: bool


def interpolate_edge(x0, x1, f0: float, f1: float, c: float):
    """Iso-point on the segment x0-x1, or None when the level is not crossed.

    The crossing condition is half-open (f0 <= c < f1 or f1 <= c < f0), so
    an endpoint that sits exactly at the level yields that endpoint and the
    opposite endpoint never does; two cells sharing the edge agree.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if f0 <= c < f1 or f1 <= c < f0:
        if f0 == c:
            return IsoPoint(x0.copy(), ("x0",), f0, f1, True)
        if f1 == c:
            return IsoPoint(x1.copy(), ("x1",), f0, f1, True)
        t = (c - f0) / (f1 - f0)
        return IsoPoint(x0 + (x1 - x0) * t, ("t", t), f0, f1, False)
    return None


# ---------------------------------------------------------------------------
# compiled per-code cell programs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathTemplate:
    hosts: tuple     # (tag, id): tag 0 -> local edge id, tag 1 -> corner id
    faces: tuple     # face id per path edge i -> (i, i+1)
    corr_disp: tuple # tuple of local corner tuples per path edge
    corr_cont: tuple # local corner or -1 per path edge
    mask: int        # disperse corners of the single-path piece


@dataclass(frozen=True)
class CellProgram:
    raw_code: int
    stripped_code: int
    n_disperse: int
    paths: tuple          # PathTemplate
    ntl_faces: tuple      # faces that are non-trivial L-faces after stripping
    table_kind: object    # RuleKind or None


def _host_of_crossing(work, raw, disp_node: int, cont_node: int):
    """Host of the iso-point on a crossing edge of the working graph.

    Positions always interpolate the pre-strip labels so that cells weld
    with neighbours that did not rewrite; a disperse endpoint that was an
    iso-node before stripping therefore hosts the point exactly.
    """
    if work[cont_node] == ISO:
        return (1, cont_node)
    if raw[disp_node] == ISO:
        return (1, disp_node)
    a, b = (disp_node, cont_node) if disp_node < cont_node else (cont_node, disp_node)
    return (0, EDGE_INDEX[(a, b)])


def _face_isopoint_hosts(work, raw, f: int):
    """Deduped iso-point hosts on one face, in boundary-cycle order."""
    cyc = FACE_CYCLES[f]
    hosts = []
    for t in range(4):
        a, b = cyc[t], cyc[(t + 1) % 4]
        sa, sb = work[a], work[b]
        if sa == DISP and sb != DISP:
            hosts.append(_host_of_crossing(work, raw, a, b))
        elif sb == DISP and sa != DISP:
            hosts.append(_host_of_crossing(work, raw, b, a))
    out = []
    for h in hosts:
        if h not in out:
            out.append(h)
    return out


def _peel_template(kind: RuleKind, target, work, raw) -> PathTemplate:
    if kind in (RuleKind.S1, RuleKind.S3):
        v = target[0]
        nbrs = sorted(target[1:])
        hosts = tuple(
            _host_of_crossing(work, raw, *((v, m) if kind == RuleKind.S1 else (m, v)))
            for m in nbrs
        )
        faces, cd, cc = [], [], []
        for i in range(3):
            m1, m2 = nbrs[i], nbrs[(i + 1) % 3]
            f = face_through((v, m1, m2))
            faces.append(f)
            if kind == RuleKind.S1:
                cd.append((v,))
                cc.append(-1)
            else:
                diag = next(x for x in FACE_CYCLES[f] if x not in (v, m1, m2))
                if work[diag] == DISP:
                    cd.append((m1, m2, diag))
                    cc.append(-1)
                else:
                    cd.append(())
                    cc.append(v)
        return PathTemplate(hosts, tuple(faces), tuple(cd), tuple(cc),
                            piece_disperse_mask(kind, target))
    # S2: quad around the disperse edge (a, b)
    a, b = target[0], target[1]
    (u1, u2), (v1, v2) = s2_flanks(a, b)
    hosts = (
        _host_of_crossing(work, raw, a, u1),
        _host_of_crossing(work, raw, b, v1),
        _host_of_crossing(work, raw, b, v2),
        _host_of_crossing(work, raw, a, u2),
    )
    faces = (
        face_through((a, b, u1, v1)),
        face_through((b, v1, v2)),
        face_through((a, b, u2, v2)),
        face_through((a, u1, u2)),
    )
    cd = ((a, b), (b,), (a, b), (a,))
    cc = (-1, -1, -1, -1)
    return PathTemplate(hosts, faces, cd, cc, piece_disperse_mask(kind, target))


def _rest_template(work, raw) -> PathTemplate | None:
    """Single inner path of an irreducible cell, walked from its face chords."""
    chords = []
    for f in range(6):
        fc = face_class_of_states(work, f)
        if fc == FaceClass.REGULAR:
            hosts = _face_isopoint_hosts(work, raw, f)
            if len(hosts) != 2:
                raise ClassificationError(f"regular face {f} carries {len(hosts)} iso-points")
            disp = tuple(n for n in FACE_CYCLES[f] if work[n] == DISP)
            chords.append((hosts[0], hosts[1], f, disp))
        elif fc in (FaceClass.TRIVIAL_L, FaceClass.NONTRIVIAL_L):
            raise ClassificationError("rest graph still has an L-face")
    if not chords:
        return None
    incident = {}
    for idx, ch in enumerate(chords):
        incident.setdefault(ch[0], []).append(idx)
        incident.setdefault(ch[1], []).append(idx)
    for h, lst in incident.items():
        if len(lst) != 2:
            raise ClassificationError(f"iso-point {h} on {len(lst)} chords in rest graph")
    hosts = [chords[0][0]]
    faces, cd = [], []
    used = set()
    cur, at = 0, chords[0][0]
    while True:
        used.add(cur)
        h0, h1, f, disp = chords[cur]
        nxt = h1 if at == h0 else h0
        faces.append(f)
        cd.append(disp)
        if nxt == hosts[0]:
            break
        hosts.append(nxt)
        a, b = incident[nxt]
        cur = b if a == cur else a
        if cur in used:
            raise ClassificationError("rest-graph chords do not close into one cycle")
        at = nxt
    if len(used) != len(chords):
        raise ClassificationError("rest-graph chords form more than one cycle")
    if not 3 <= len(hosts) <= 6:
        raise ClassificationError(f"inner path with {len(hosts)} points")
    mask = 0
    for n in range(8):
        if work[n] == DISP:
            mask |= 1 << n
    return PathTemplate(tuple(hosts), tuple(faces), tuple(cd),
                        tuple([-1] * len(faces)), mask)


_PROGRAM_CACHE: dict = {}


def compile_program(raw_code: int) -> CellProgram:
    """Path templates and face metadata for one raw state code.

    Stripping happens inside; hosts are resolved against the raw states so
    that iso-points of rewritten cells stay welded to their neighbours.
    The shared-face membrane (which needs neighbour labels) is not applied
    here; callers drop the cell's paths when it fires.
    """
    prog = _PROGRAM_CACHE.get(raw_code)
    if prog is not None:
        return prog
    raw = decode_code(raw_code)
    work = strip_states(raw)
    stripped_code = encode_states(work)
    nd = sum(1 for s in work if s == DISP)
    paths = []
    kind = None
    if 1 <= nd <= 7:
        cls = classify_states(work)
        sel = select_s_rule(cls)
        kind = sel[0] if sel else None
        peels, rest = peel_sequence(work)
        for k, target, before in peels:
            paths.append(_peel_template(k, target, before, raw))
        rest_tpl = _rest_template(rest, raw)
        if rest_tpl is not None:
            paths.append(rest_tpl)
    ntl = tuple(
        f for f in range(6)
        if face_class_of_states(work, f) == FaceClass.NONTRIVIAL_L
    )
    prog = CellProgram(raw_code, stripped_code, nd, tuple(paths), ntl, kind)
    _PROGRAM_CACHE[raw_code] = prog
    return prog


_TABLE_KIND_CACHE: dict = {}


def _table_kind(stripped_code: int):
    hit = _TABLE_KIND_CACHE.get(stripped_code, "?")
    if hit != "?":
        return hit
    states = decode_code(stripped_code)
    nd = sum(1 for s in states if s == DISP)
    kind = None
    if 1 <= nd <= 7:
        sel = select_s_rule(classify_states(states))
        kind = sel[0] if sel else None
    _TABLE_KIND_CACHE[stripped_code] = kind
    return kind


_STRIP_CACHE: dict = {}


def strip_code(code: int) -> tuple:
    """(stripped code, f2 candidate face or None) for one raw code."""
    hit = _STRIP_CACHE.get(code)
    if hit is not None:
        return hit
    states = decode_code(code)
    f2f = f2_candidate_face(states)
    out = (encode_states(strip_states(states)), f2f)
    _STRIP_CACHE[code] = out
    return out


# ---------------------------------------------------------------------------
# grid extraction
# ---------------------------------------------------------------------------

class IsoPath:
    """One iso-path: welded point indices plus per-edge pairing metadata.

    Host keys and edge records derive lazily from the shared prepared
    template and the cell's base vertex, which keeps the per-path memory
    footprint small on large grids.
    """

    __slots__ = ("cell", "kind", "pts", "base", "prep", "normal_hint",
                 "flip", "component", "_keys", "_edges")

    def __init__(self, cell, kind, pts, base, prep, normal_hint=None):
        self.cell = cell          # flat cell index
        self.kind = kind          # "inner" | "outer"
        self.pts = pts            # welded point indices, cyclic order
        self.base = base          # vertex id of the cell's corner 0
        self.prep = prep          # (key offsets, edge meta, piece mask)
        self.normal_hint = normal_hint  # fixed normal for outer paths
        self.flip = False
        self.component = -1
        self._keys = None
        self._edges = None

    @property
    def keys(self):
        k = self._keys
        if k is None:
            b4 = self.base * 4
            k = self._keys = [b4 + o for o in self.prep[0]]
        return k

    @property
    def edges(self):
        e = self._edges
        if e is None:
            keys = self.keys
            base = self.base
            m = len(keys)
            e = []
            for i in range(m):
                ka = keys[i]
                kb = keys[i + 1] if i + 1 < m else keys[0]
                ek = (ka, kb) if ka < kb else (kb, ka)
                cd, cc = self.prep[1][i]
                e.append((ek, tuple(base + x for x in cd),
                          -1 if cc < 0 else base + cc))
            self._edges = e
        return e

    @property
    def mask(self) -> int:
        return self.prep[2]

    def __len__(self):
        return len(self.pts)


@dataclass
class IsoSurface:
    """All iso-elements of a grid at one iso-level."""

    part: object
    c: float
    labels: np.ndarray          # snapped vertex labels
    points: np.ndarray          # welded iso-point positions
    point_keys: list
    paths: list
    codes: np.ndarray           # raw per-cell state codes
    stripped: np.ndarray        # per-cell stripped codes

    def edge_map(self):
        """iso-line key -> list of (path index, edge index)."""
        out = {}
        for pi, p in enumerate(self.paths):
            for ei, (ek, _cd, _cc) in enumerate(p.edges):
                out.setdefault(ek, []).append((pi, ei))
        return out

    def path_points(self, pi: int) -> np.ndarray:
        return self.points[self.paths[pi].pts]

    def path_center(self, pi: int) -> np.ndarray:
        return self.path_points(pi).mean(axis=0)

    def cell_of_flat(self, flat: int):
        nx, ny, nz = self.part.dims
        return (flat // (ny * nz), (flat // nz) % ny, flat % nz)


def states_grid(labels: np.ndarray, c: float) -> np.ndarray:
    st = np.zeros(labels.shape, dtype=np.int8)
    st[labels > c] = DISP
    st[labels == c] = ISO
    return st


def codes_grid(states: np.ndarray) -> np.ndarray:
    nx = states.shape[0] - 1
    ny = states.shape[1] - 1
    nz = states.shape[2] - 1
    codes = np.zeros((nx, ny, nz), dtype=np.int32)
    for n in range(8):
        di, dj, dk = CORNER_OFFSETS[n]
        codes += (3**n) * states[di:di + nx, dj:dj + ny, dk:dk + nz].astype(np.int32)
    return codes


def _vertex_key(vid: int) -> int:
    return vid * 4 + NODE_HOST


def _edge_key(vid: int, axis: int) -> int:
    return vid * 4 + axis


class _GridContext:
    """Precomputed strides and label access for fast host resolution."""

    def __init__(self, part, labels: np.ndarray, c: float):
        self.part = part
        self.c = c
        nx, ny, nz = part.dims
        self.sy = nz + 1
        self.sx = (ny + 1) * (nz + 1)
        self._prepared = {}
        self.labels_flat = np.ascontiguousarray(labels).reshape(-1)
        self.origin = tuple(float(x) for x in part.origin)
        self.spacing = tuple(float(x) for x in part.spacing)
        self.corner_vid = tuple(
            di * self.sx + dj * self.sy + dk for (di, dj, dk) in CORNER_OFFSETS
        )
        sp = self.spacing
        self.corner_dpos = tuple(
            (di * sp[0], dj * sp[1], dk * sp[2]) for (di, dj, dk) in CORNER_OFFSETS
        )
        self.vid_stride = (self.sx, self.sy, 1)
        # local edge id -> (lower vid offset, axis, lower corner local pos)
        self.edge_info = tuple(
            (self.corner_vid[EDGES[e][0]], EDGE_AXIS[e], self.corner_dpos[EDGES[e][0]])
            for e in range(12)
        )

    def vid(self, ci, cj, ck) -> int:
        return ci * self.sx + cj * self.sy + ck

    def cell_base_pos(self, ci, cj, ck):
        o, s = self.origin, self.spacing
        return (o[0] + ci * s[0], o[1] + cj * s[1], o[2] + ck * s[2])

    def prepare(self, tpl: PathTemplate):
        """Fold the grid strides into one template, once per template."""
        cache = self._prepared
        hit = cache.get(id(tpl))
        if hit is not None:
            return hit
        koffs = []
        for tag, hid in tpl.hosts:
            if tag == 1:
                koffs.append(self.corner_vid[hid] * 4 + NODE_HOST)
            else:
                off, axis, _dp = self.edge_info[hid]
                koffs.append(off * 4 + axis)
        edges = []
        for i in range(len(tpl.hosts)):
            cd = tuple(self.corner_vid[n] for n in tpl.corr_disp[i])
            cc = tpl.corr_cont[i]
            edges.append((cd, -1 if cc < 0 else self.corner_vid[cc]))
        out = (tuple(koffs), tuple(edges), tpl.mask)
        cache[id(tpl)] = out
        return out

    def vertex_pos(self, vid: int) -> tuple:
        i, r = divmod(vid, self.sx)
        j, k = divmod(r, self.sy)
        o, s = self.origin, self.spacing
        return (o[0] + i * s[0], o[1] + j * s[1], o[2] + k * s[2])

    def resolve(self, base_vid: int, host):
        """(key, position) of a host descriptor anchored at a cell corner 0."""
        tag, hid = host
        if tag == 1:
            vid = base_vid + self.corner_vid[hid]
            return _vertex_key(vid), self.vertex_pos(vid)
        off, axis, _dp = self.edge_info[hid]
        vid = base_vid + off
        f0 = self.labels_flat[vid]
        f1 = self.labels_flat[vid + self.vid_stride[axis]]
        t = (self.c - f0) / (f1 - f0)
        pos = list(self.vertex_pos(vid))
        pos[axis] += t * self.spacing[axis]
        return _edge_key(vid, axis), tuple(pos)


def _raw_cell_states(codes, ci, cj, ck):
    return decode_code(int(codes[ci, cj, ck]))


def _stripped_code_grid(codes: np.ndarray, states: np.ndarray, dims) -> np.ndarray:
    """Per-cell stripped codes, resolving shared-face membranes via neighbours."""
    nx, ny, nz = dims
    out = np.empty_like(codes)
    flat_in = codes.reshape(-1)
    flat_out = out.reshape(-1)
    cache = {}
    f2_cells = []
    for idx in range(flat_in.size):
        code = int(flat_in[idx])
        hit = cache.get(code)
        if hit is None:
            hit = strip_code(code)
            cache[code] = hit
        flat_out[idx] = hit[0]
        if hit[1] is not None:
            f2_cells.append((idx, hit[1]))
    for idx, f in f2_cells:
        ci, r = divmod(idx, ny * nz)
        cj, ck = divmod(r, nz)
        axis, side = FACE_AXIS[f], FACE_SIDE[f]
        step = 1 if side == 1 else -1
        nb = [ci, cj, ck]
        nb[axis] += step
        if not (0 <= nb[axis] < dims[axis]):
            continue
        far = FACE_CYCLES[2 * axis + side]
        di, dj, dk = nb
        fire = True
        for n in far:
            oi, oj, ok = CORNER_OFFSETS[n]
            if states[di + oi, dj + oj, dk + ok] != DISP:
                fire = False
                break
        if fire:
            out[ci, cj, ck] = ALL_DISP_CODE
            out[di, dj, dk] = ALL_DISP_CODE
    return out


def _emit_cell(flat, ci, cj, ck, prog: CellProgram, ctx: _GridContext, sink):
    base = ctx.vid(ci, cj, ck)
    for tpl in prog.paths:
        sink.append((flat, 0, base, ctx.prepare(tpl), None))


_NTL_COVER_CACHE: dict = {}


def _ntl_coverage(stripped_code: int, f: int):
    """Cycle positions of the face corners whose cut chord this cell traverses.

    Positions refer to FACE_CYCLES[f]; paired faces of neighbouring cells
    list the same lattice vertex at the same position, so coverage sets
    from the two sides of a face can be united directly.
    """
    key = (stripped_code, f)
    hit = _NTL_COVER_CACHE.get(key)
    if hit is not None:
        return hit
    states = decode_code(stripped_code)
    fc = face_class_of_states(states, f)
    cyc = FACE_CYCLES[f]
    covered = frozenset()
    if fc == FaceClass.NONTRIVIAL_L:
        kind = _table_kind(stripped_code)
        if kind in (RuleKind.S1, RuleKind.S2):
            covered = frozenset(t for t in range(4) if states[cyc[t]] == DISP)
        elif kind == RuleKind.S3:
            covered = frozenset(t for t in range(4) if states[cyc[t]] == SUB)
    elif fc == FaceClass.REGULAR:
        # a raw L-face whose iso corner was promoted: the single chord cuts
        # the remaining continuous corner
        nd = sum(1 for n in cyc if states[n] == DISP)
        if nd == 3:
            covered = frozenset(t for t in range(4) if states[cyc[t]] != DISP)
    _NTL_COVER_CACHE[key] = covered
    return covered


def _face_path_layout(raw: tuple):
    """Hosts and cut corners of the face path over raw corner states.

    ``raw`` lists the 4 corner states in cycle position order.  Returns
    (hosts, cuts) where hosts[i] is (tag, position or edge slot) in face
    terms and cuts[i] is the cycle position cut by the chord from host i to
    host i+1, or None when the layout carries no closed path.
    """
    items = []  # (coordinate along the cycle, host placeholder)
    for t in range(4):
        sa, sb = raw[t], raw[(t + 1) % 4]
        if (sa == DISP) == (sb == DISP):
            continue
        t_cont = (t + 1) % 4 if sa == DISP else t
        if raw[t_cont] == ISO:
            items.append((float(t_cont), (1, t_cont)))
        else:
            items.append((t + 0.5, (0, t)))
    uniq = []
    for it in items:
        if it not in uniq:
            uniq.append(it)
    uniq.sort(key=lambda it: it[0])
    m = len(uniq)
    if m < 3:
        return None
    hosts = [h for _, h in uniq]
    cuts = []
    for i in range(m):
        a = uniq[i][0]
        b = uniq[(i + 1) % m][0]
        between = [t for t in range(4)
                   if (a < t < b) or (b < a and (t > a or t < b))]
        if len(between) != 1:
            return None
        cuts.append(between[0])
    return hosts, cuts


def _outer_paths_pass(part, stripped, ctx: _GridContext, sink):
    """Emit face-resident paths on shared non-trivial L-faces.

    A face path exists exactly when the two sides together cover a chord
    around every non-iso corner of the face; ownership goes to the lower
    cell.  A non-trivial L-face on the domain boundary emits nothing.
    """
    nx, ny, nz = part.dims
    flat = stripped.reshape(-1)
    ntl_cache = {}
    seen = set()
    for idx in range(flat.size):
        sc = int(flat[idx])
        hit = ntl_cache.get(sc)
        if hit is None:
            states = decode_code(sc)
            hit = tuple(
                f for f in range(6)
                if face_class_of_states(states, f) == FaceClass.NONTRIVIAL_L
            )
            ntl_cache[sc] = hit
        if not hit:
            continue
        ci, r = divmod(idx, ny * nz)
        cj, ck = divmod(r, nz)
        for f in hit:
            axis, side = FACE_AXIS[f], FACE_SIDE[f]
            step = 1 if side == 1 else -1
            nb = [ci, cj, ck]
            nb[axis] += step
            if not 0 <= nb[axis] < part.dims[axis]:
                continue
            lo = (ci, cj, ck) if step == 1 else tuple(nb)
            fkey = (lo, axis)
            if fkey in seen:
                continue
            seen.add(fkey)
            _try_emit_outer(part, stripped, ctx, sink, lo, axis)


def _try_emit_outer(part, stripped, ctx: _GridContext, sink, lo, axis):
    ci, cj, ck = lo
    hi = [ci, cj, ck]
    hi[axis] += 1
    f_lo = 2 * axis + 1          # face of the lower cell toward the upper
    f_hi = 2 * axis              # the same face seen from the upper cell
    cyc_lo = FACE_CYCLES[f_lo]
    base = ctx.vid(ci, cj, ck)
    raw = []
    for n in cyc_lo:
        lab = ctx.labels_flat[base + ctx.corner_vid[n]]
        raw.append(DISP if lab > ctx.c else (ISO if lab == ctx.c else SUB))
    raw = tuple(raw)
    from .cube import classify_face_cycle
    if classify_face_cycle(*raw) != FaceClass.NONTRIVIAL_L:
        return
    sc_lo = int(stripped[ci, cj, ck])
    sc_hi = int(stripped[hi[0], hi[1], hi[2]])
    covered = _ntl_coverage(sc_lo, f_lo) | _ntl_coverage(sc_hi, f_hi)
    needed = frozenset(t for t in range(4) if raw[t] != ISO)
    if not needed <= covered:
        return
    layout = _face_path_layout(raw)
    if layout is None:
        return
    hosts, cuts = layout
    koffs = []
    for tag, slot in hosts:
        if tag == 1:
            koffs.append(ctx.corner_vid[cyc_lo[slot]] * 4 + NODE_HOST)
        else:
            a, b = cyc_lo[slot], cyc_lo[(slot + 1) % 4]
            lo_c, hi_c = (a, b) if a < b else (b, a)
            off, eaxis, _dp = ctx.edge_info[EDGE_INDEX[(lo_c, hi_c)]]
            koffs.append(off * 4 + eaxis)
    emeta = []
    for cut in cuts:
        voff = ctx.corner_vid[cyc_lo[cut]]
        if raw[cut] == DISP:
            emeta.append(((voff,), -1))
        else:
            emeta.append(((), voff))
    lo_covers_q = any(raw[t] == DISP for t in _ntl_coverage(sc_lo, f_lo))
    n_hint = np.zeros(3)
    n_hint[axis] = -1.0 if lo_covers_q else 1.0
    nx, ny, nz = part.dims
    flat = (ci * ny + cj) * nz + ck
    sink.append((flat, 1, base, (tuple(koffs), tuple(emeta), 0), tuple(n_hint)))


def extract_grid(labels, part, c: float, *, snap_tol: float = DEFAULT_ISO_SNAP,
                 threads: int = 1) -> IsoSurface:
    """Extract all iso-elements of the grid at iso-level c.

    O(N) in the cell count; output ordering is cell-major with each cell's
    peel paths before its rest path, and face-resident paths owned by the
    lower of the two sharing cells.
    """
    if not 0.0 < c < 1.0:
        raise ValueError(f"iso-level must lie in (0, 1), got {c}")
    lab = np.asarray(getattr(labels, "values", labels), dtype=np.float64)
    nx, ny, nz = part.dims
    if lab.shape != (nx + 1, ny + 1, nz + 1):
        raise ValueError(f"label lattice {lab.shape} does not match dims {part.dims}")
    lab = snap_labels(lab, c, snap_tol)
    st = states_grid(lab, c)
    codes = codes_grid(st)
    stripped = _stripped_code_grid(codes, st, part.dims)
    ctx = _GridContext(part, lab, c)

    import gc
    active = np.argwhere((stripped != 0) & (stripped != ALL_DISP_CODE))
    raw_sink = []
    progs = _PROGRAM_CACHE
    order = np.lexsort((active[:, 2], active[:, 1], active[:, 0]))
    cells = active[order].tolist()
    gc_was_on = gc.isenabled()
    gc.disable()

    def emit_range(rows, out):
        for ci, cj, ck in rows:
            if int(stripped[ci, cj, ck]) == ALL_DISP_CODE:
                continue  # shared-face membrane removed the cell's paths
            rc = int(codes[ci, cj, ck])
            prog = progs.get(rc)
            if prog is None:
                prog = compile_program(rc)
            if prog.paths:
                flat = (ci * ny + cj) * nz + ck
                _emit_cell(flat, ci, cj, ck, prog, ctx, out)

    try:
        if threads > 1 and len(cells) > 4096:
            from concurrent.futures import ThreadPoolExecutor
            nchunks = threads * 4
            step = max(1, (len(cells) + nchunks - 1) // nchunks)
            chunks = [cells[i:i + step] for i in range(0, len(cells), step)]
            outs = [[] for _ in chunks]
            with ThreadPoolExecutor(max_workers=threads) as ex:
                list(ex.map(emit_range, chunks, outs))
            for o in outs:
                raw_sink.extend(o)
        else:
            emit_range(cells, raw_sink)

        _outer_paths_pass(part, stripped, ctx, raw_sink)
        raw_sink.sort(key=lambda r: (r[0], r[1]))

        flat_keys = []
        for rec in raw_sink:
            b4 = rec[2] * 4
            flat_keys.extend([b4 + o for o in rec[3][0]])
        karr = np.asarray(flat_keys, dtype=np.int64).reshape(-1)
        del flat_keys
        uniq, inv = np.unique(karr, return_inverse=True)
        pts = _positions_of_keys(uniq, ctx)
        inv = inv.tolist()
        paths = []
        cursor = 0
        for flat, kindcode, base, prep, nhint in raw_sink:
            m = len(prep[0])
            paths.append(IsoPath(
                flat, "inner" if kindcode == 0 else "outer",
                inv[cursor:cursor + m], base, prep,
                None if nhint is None else np.asarray(nhint),
            ))
            cursor += m
    finally:
        if gc_was_on:
            gc.enable()
    return IsoSurface(part=part, c=c, labels=lab, points=pts,
                      point_keys=uniq.tolist(), paths=paths, codes=codes,
                      stripped=stripped)


def _positions_of_keys(keys: np.ndarray, ctx: _GridContext) -> np.ndarray:
    """Positions of welded iso-points, computed once per unique host key."""
    tag = keys & 3
    vid = keys >> 2
    sx, sy = ctx.sx, ctx.sy
    i, r = np.divmod(vid, sx)
    j, k = np.divmod(r, sy)
    o, s = ctx.origin, ctx.spacing
    pos = np.empty((len(keys), 3), dtype=np.float64)
    pos[:, 0] = o[0] + i * s[0]
    pos[:, 1] = o[1] + j * s[1]
    pos[:, 2] = o[2] + k * s[2]
    lab = ctx.labels_flat
    for axis in range(3):
        sel = np.nonzero(tag == axis)[0]
        if len(sel) == 0:
            continue
        v = vid[sel]
        f0 = lab[v]
        f1 = lab[v + ctx.vid_stride[axis]]
        t = (ctx.c - f0) / (f1 - f0)
        pos[sel, axis] += t * s[axis]
    return pos


# ---------------------------------------------------------------------------
# single-cell object API
# ---------------------------------------------------------------------------

@dataclass
class IsoLine:
    p0: np.ndarray
    p1: np.ndarray
    face: int
    kind: str  # "chord" | "diagonal" | "lattice-edge"


@dataclass
class CellPath:
    """Inner iso-path of a standalone cell, with its triangle fan."""

    points: np.ndarray       # (m, 3), cyclic
    hosts: tuple
    faces: tuple
    corr_disp: tuple
    corr_cont: tuple
    mask: int
    kind: str = "inner"

    @property
    def center(self):
        return self.points.mean(axis=0)

    def triangles(self):
        m = len(self.points)
        if m == 3:
            return [tuple(self.points)]
        pc = self.center
        return [(self.points[i], self.points[(i + 1) % m], pc) for i in range(m)]


def _instantiate_local(g: LabeledCuboidGraph, tpl: PathTemplate) -> CellPath:
    pts = []
    for tag, hid in tpl.hosts:
        if tag == 1:
            pts.append(g.positions[hid])
        else:
            a, b = EDGES[hid]
            f0, f1 = g.labels[a], g.labels[b]
            t = (g.iso_level - f0) / (f1 - f0)
            pts.append(g.positions[a] + (g.positions[b] - g.positions[a]) * t)
    return CellPath(np.asarray(pts), tpl.hosts, tpl.faces, tpl.corr_disp,
                    tpl.corr_cont, tpl.mask)


def inner_isopath(g: LabeledCuboidGraph) -> CellPath:
    """The unique inner iso-path of an irreducible cell."""
    st = g.states()
    cls = classify_states(st)
    if not cls.is_regular or cls.reducible:
        raise ClassificationError("inner_isopath requires an irreducible cell")
    tpl = _rest_template(st, st)
    if tpl is None:
        raise ClassificationError("cell carries no iso-path")
    return _instantiate_local(g, tpl)


def extract_cell(g: LabeledCuboidGraph, neighbor_faces=None):
    """All inner iso-paths of one (unstripped) cell: steps 1-3 for one cell."""
    from .rules import _f2_neighbor_far_disperse
    st = g.states()
    f2f = f2_candidate_face(st)
    if f2f is not None and neighbor_faces is not None:
        nb = neighbor_faces(f2f) if callable(neighbor_faces) else neighbor_faces.get(f2f)
        if nb is not None and _f2_neighbor_far_disperse(nb, f2f, g.iso_level):
            return []
    prog = compile_program(encode_states(st))
    return [_instantiate_local(g, tpl) for tpl in prog.paths]


def outer_isopath(face_axis: int, g_lo: LabeledCuboidGraph, g_hi: LabeledCuboidGraph,
                  raw_face_states=None):
    """Face-resident path on the shared face of two stripped cells, if any.

    ``g_lo`` owns the face 2*axis+1 and supplies positions.  The shared raw
    corner states (before stripping) are reconstructed from the two copies
    unless given: a corner is iso if either side still says iso.
    Returns a CellPath with kind "outer" or None.
    """
    st_lo = g_lo.states()
    st_hi = g_hi.states()
    sc_lo = encode_states(st_lo)
    sc_hi = encode_states(st_hi)
    f_lo = 2 * face_axis + 1
    f_hi = 2 * face_axis
    cyc_lo = FACE_CYCLES[f_lo]
    cyc_hi = FACE_CYCLES[f_hi]
    if raw_face_states is None:
        raw = tuple(
            ISO if (st_lo[cyc_lo[t]] == ISO or st_hi[cyc_hi[t]] == ISO)
            else st_lo[cyc_lo[t]]
            for t in range(4)
        )
    else:
        raw = tuple(raw_face_states)
    from .cube import classify_face_cycle
    if classify_face_cycle(*raw) != FaceClass.NONTRIVIAL_L:
        return None
    covered = _ntl_coverage(sc_lo, f_lo) | _ntl_coverage(sc_hi, f_hi)
    needed = frozenset(t for t in range(4) if raw[t] != ISO)
    if not needed <= covered:
        return None
    layout = _face_path_layout(raw)
    if layout is None:
        return None
    hosts, cuts = layout
    pts = []
    local_hosts = []
    for tag, slot in hosts:
        if tag == 1:
            local_hosts.append((1, cyc_lo[slot]))
            pts.append(g_lo.positions[cyc_lo[slot]])
        else:
            a, b = cyc_lo[slot], cyc_lo[(slot + 1) % 4]
            lo_c, hi_c = (a, b) if a < b else (b, a)
            local_hosts.append((0, EDGE_INDEX[(lo_c, hi_c)]))
            f0, f1 = g_lo.labels[lo_c], g_lo.labels[hi_c]
            t = (g_lo.iso_level - f0) / (f1 - f0)
            pts.append(g_lo.positions[lo_c] + (g_lo.positions[hi_c] - g_lo.positions[lo_c]) * t)
    m = len(hosts)
    cd = tuple((cyc_lo[cuts[i]],) if raw[cuts[i]] == DISP else () for i in range(m))
    cc = tuple(-1 if raw[cuts[i]] == DISP else cyc_lo[cuts[i]] for i in range(m))
    return CellPath(np.asarray(pts), tuple(local_hosts), (f_lo,) * m, cd, cc, 0,
                    kind="outer")
