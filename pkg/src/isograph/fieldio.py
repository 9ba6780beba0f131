"""Volume-fraction file formats and surface mesh export.

Field input comes in two equivalent encodings:

* binary: magic ``ISOG``, version u32, dims 3xu64, then nx*ny*nz cell
  values as row-major little-endian f64.  The binary container carries no
  geometry; unit spacing and zero origin apply.
* text: first line ``nx ny nz dx dy dz ox oy oz``, then whitespace
  separated cell values in row-major order.

Meshes export as OBJ (v/vn/f, 1-based, one group per component) or
binary little-endian PLY with per-face ``component_id`` and an optional
per-vertex ``curvature`` channel.  Both start with a comment carrying the
tool version, the iso-level and the volume tolerance for provenance.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .grid import CuboidPartition, InputError, VolumeFractionField

MAGIC = b"ISOG"
VERSION = 1


def write_field_binary(field: VolumeFractionField, path):
    nx, ny, nz = field.part.dims
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<3Q", nx, ny, nz))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def write_field_text(field: VolumeFractionField, path):
    part = field.part
    nx, ny, nz = part.dims
    with open(path, "w") as fh:
        dx, dy, dz = (float(x) for x in part.spacing)
        ox, oy, oz = (float(x) for x in part.origin)
        fh.write(f"{nx} {ny} {nz} {dx!r} {dy!r} {dz!r} {ox!r} {oy!r} {oz!r}\n")
        flat = field.values.reshape(nx, -1)
        for row in flat:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_field(path):
    """Load a fraction field; the container is sniffed from the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return _read_binary(path)
    return _read_text(path)


def _read_binary(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 + 4 + 24:
        raise InputError(f"{path}: truncated header")
    if data[:4] != MAGIC:
        raise InputError(f"{path}: bad magic {data[:4]!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise InputError(f"{path}: unsupported version {version}")
    nx, ny, nz = struct.unpack_from("<3Q", data, 8)
    need = 32 + 8 * nx * ny * nz
    if len(data) < need:
        raise InputError(f"{path}: truncated payload ({len(data)} < {need} bytes)")
    values = np.frombuffer(data, dtype="<f8", count=nx * ny * nz, offset=32)
    part = CuboidPartition((nx, ny, nz))
    _check_range(values, (nx, ny, nz), path)
    return VolumeFractionField(values.reshape(nx, ny, nz).copy(), part), part


def _read_text(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 9:
            raise InputError(f"{path}: header needs 9 fields, got {len(header)}")
        try:
            nx, ny, nz = (int(x) for x in header[:3])
            dx, dy, dz, ox, oy, oz = (float(x) for x in header[3:])
        except ValueError as e:
            raise InputError(f"{path}: malformed header: {e}") from None
        values = np.loadtxt(fh, dtype=np.float64).reshape(-1)
    if values.size != nx * ny * nz:
        raise InputError(
            f"{path}: expected {nx * ny * nz} values, got {values.size}"
        )
    part = CuboidPartition((nx, ny, nz), (ox, oy, oz), (dx, dy, dz))
    _check_range(values, (nx, ny, nz), path)
    return VolumeFractionField(values.reshape(nx, ny, nz), part), part


def _check_range(values, dims, path):
    bad = np.nonzero((values < 0.0) | (values > 1.0))[0]
    if bad.size:
        idx = int(bad[0])
        nx, ny, nz = dims
        cell = (idx // (ny * nz), (idx // nz) % ny, idx % nz)
        raise InputError(
            f"{path}: value {float(values[idx])!r} out of [0, 1] at cell {cell}"
        )


# ---------------------------------------------------------------------------
# surface mesh
# ---------------------------------------------------------------------------

@dataclass
class SurfaceMesh:
    """Welded triangle mesh with per-face component ids."""

    vertices: np.ndarray        # (V, 3)
    triangles: np.ndarray       # (F, 3) int
    component_ids: np.ndarray   # (F,) int
    normals: np.ndarray         # (V, 3) unit, area-averaged
    curvature: np.ndarray = None  # (V,) optional

    def validate(self):
        if self.triangles.size and self.triangles.max() >= len(self.vertices):
            raise InputError("triangle index out of range")
        used = np.zeros(len(self.vertices), dtype=bool)
        used[self.triangles.reshape(-1)] = True
        if not used.all():
            raise InputError("unreferenced vertices present")


def build_mesh(surface, components=None, with_curvature=False) -> SurfaceMesh:
    """Triangulate all iso-elements into one welded, oriented mesh.

    Fan centres are appended after the welded iso-points; orientation and
    component decomposition run first if they have not already.
    """
    from .components import decompose_components
    from .geometry import curvature_field, fan_triangles, vertex_normals

    if components is None:
        components = decompose_components(surface)
    verts, tris, _center_index = fan_triangles(surface)
    comp = []
    for p in surface.paths:
        m = len(p.pts)
        comp.extend([p.component] * (1 if m == 3 else m))
    comp = np.asarray(comp, dtype=np.int64)
    normals = vertex_normals(verts, tris)
    curvature = None
    if with_curvature:
        values, _valid = curvature_field(surface)
        curvature = values
    mesh = SurfaceMesh(verts, tris, comp, normals, curvature)
    mesh.validate()
    return mesh


def _provenance(surface, eps):
    from . import __version__
    parts = [f"isograph {__version__}", f"iso-level c={float(surface.c)!r}"]
    if eps is not None:
        parts.append(f"eps={eps!r}")
    return "; ".join(parts)


def write_mesh(mesh: SurfaceMesh, fmt: str, path, *, surface=None, eps=None):
    if fmt == "obj":
        write_obj(mesh, path, surface=surface, eps=eps)
    elif fmt == "ply":
        write_ply(mesh, path, surface=surface, eps=eps)
    else:
        raise InputError(f"unknown mesh format {fmt!r} (use obj or ply)")


def write_obj(mesh: SurfaceMesh, path, *, surface=None, eps=None):
    with open(path, "w") as fh:
        if surface is not None:
            fh.write(f"# {_provenance(surface, eps)}\n")
        for v in mesh.vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for n in mesh.normals:
            fh.write(f"vn {float(n[0])!r} {float(n[1])!r} {float(n[2])!r}\n")
        last_comp = None
        for t, cid in zip(mesh.triangles, mesh.component_ids):
            if cid != last_comp:
                fh.write(f"g component_{cid}\n")
                last_comp = cid
            a, b, c = (int(x) + 1 for x in t)
            fh.write(f"f {a}//{a} {b}//{b} {c}//{c}\n")


def write_ply(mesh: SurfaceMesh, path, *, surface=None, eps=None):
    n_v = len(mesh.vertices)
    n_f = len(mesh.triangles)
    has_curv = mesh.curvature is not None
    header = ["ply", "format binary_little_endian 1.0"]
    if surface is not None:
        header.append(f"comment {_provenance(surface, eps)}")
    header += [
        f"element vertex {n_v}",
        "property double x", "property double y", "property double z",
        "property double nx", "property double ny", "property double nz",
    ]
    if has_curv:
        header.append("property double curvature")
    header += [
        f"element face {n_f}",
        "property list uchar int vertex_indices",
        "property int component_id",
        "end_header",
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        cols = [mesh.vertices, mesh.normals]
        if has_curv:
            cols.append(mesh.curvature[:, None])
        vdata = np.hstack(cols).astype("<f8")
        fh.write(vdata.tobytes())
        for t, cid in zip(mesh.triangles, mesh.component_ids):
            fh.write(struct.pack("<B3ii", 3, int(t[0]), int(t[1]), int(t[2]), int(cid)))


def read_ply_summary(path):
    """Minimal PLY reader for round-trip checks: header fields and counts."""
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.index(b"end_header\n") + len(b"end_header\n")
    header = data[:end].decode("ascii").splitlines()
    counts = {}
    props = {}
    current = None
    for line in header:
        tok = line.split()
        if tok and tok[0] == "element":
            current = tok[1]
            counts[current] = int(tok[2])
            props[current] = []
        elif tok and tok[0] == "property" and current:
            props[current].append(tok[-1])
    return {"counts": counts, "properties": props, "payload": data[end:]}
