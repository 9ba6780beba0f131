import subprocess
import sys

import numpy as np
import pytest

import isograph as ig
from isograph.fieldio import (
    build_mesh,
    read_field,
    read_ply_summary,
    write_field_binary,
    write_field_text,
    write_mesh,
)
from isograph.grid import InputError
from conftest import sphere_fractions, extract_for


@pytest.fixture(scope="module")
def small_sphere(tmp_path_factory):
    field, part = sphere_fractions(10, sub=8)
    d = tmp_path_factory.mktemp("fields")
    binpath = d / "sphere.isog"
    txtpath = d / "sphere.txt"
    write_field_binary(field, binpath)
    write_field_text(field, txtpath)
    return {"field": field, "part": part, "bin": str(binpath), "txt": str(txtpath)}


def test_binary_roundtrip_bitwise(small_sphere):
    field2, part2 = read_field(small_sphere["bin"])
    assert np.array_equal(field2.values, small_sphere["field"].values)
    assert part2.dims == small_sphere["part"].dims


def test_text_roundtrip_bitwise(small_sphere):
    field2, part2 = read_field(small_sphere["txt"])
    assert np.array_equal(field2.values, small_sphere["field"].values)
    assert part2.spacing == small_sphere["part"].spacing
    assert part2.origin == small_sphere["part"].origin


def test_text_and_binary_load_identically(small_sphere):
    fb, _ = read_field(small_sphere["bin"])
    ft, _ = read_field(small_sphere["txt"])
    assert np.array_equal(fb.values, ft.values)


def test_out_of_range_value_names_cell(tmp_path):
    part = ig.CuboidPartition((2, 2, 2))
    field = ig.VolumeFractionField(np.full((2, 2, 2), 0.5), part)
    path = tmp_path / "bad.isog"
    write_field_binary(field, path)
    raw = bytearray(path.read_bytes())
    import struct
    bad = struct.pack("<d", 1.5)
    idx = 5  # cell (1, 0, 1)
    raw[32 + 8 * idx: 32 + 8 * (idx + 1)] = bad
    path.write_bytes(bytes(raw))
    with pytest.raises(InputError, match=r"\(1, 0, 1\)"):
        read_field(path)


def test_truncated_binary(tmp_path):
    part = ig.CuboidPartition((2, 2, 2))
    field = ig.VolumeFractionField(np.full((2, 2, 2), 0.5), part)
    path = tmp_path / "trunc.isog"
    write_field_binary(field, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(InputError, match="truncated"):
        read_field(path)


def test_obj_single_triangle(tmp_path):
    # one disperse corner in a single cell grid: one triangular element
    part = ig.CuboidPartition((2, 2, 2))
    labels = np.zeros(part.vertex_dims)
    labels[1, 1, 1] = 1.0
    surface = ig.extract_grid(labels, part, 0.5)
    # eight triangles (one per cell), but write only the mesh for a corner
    part1 = ig.CuboidPartition((1, 1, 1))
    lab1 = np.zeros(part1.vertex_dims)
    lab1[0, 0, 0] = 1.0
    s1 = ig.extract_grid(lab1, part1, 0.5)
    mesh = build_mesh(s1)
    out = tmp_path / "tri.obj"
    write_mesh(mesh, "obj", out, surface=s1, eps=None)
    lines = out.read_text().splitlines()
    assert sum(1 for l in lines if l.startswith("v ")) == 3
    assert sum(1 for l in lines if l.startswith("f ")) == 1
    assert lines[0].startswith("# isograph")


def test_ply_component_property(small_sphere, tmp_path):
    field, part = small_sphere["field"], small_sphere["part"]
    surface, _ = extract_for(field, part)
    mesh = build_mesh(surface, with_curvature=True)
    out = tmp_path / "m.ply"
    write_mesh(mesh, "ply", out, surface=surface, eps=1e-9)
    info = read_ply_summary(out)
    assert info["counts"]["vertex"] == len(mesh.vertices)
    assert info["counts"]["face"] == len(mesh.triangles)
    assert "component_id" in info["properties"]["face"]
    assert "curvature" in info["properties"]["vertex"]
    # payload size: vertices (7 doubles) + faces (1 + 3*4 + 4 bytes)
    expected = len(mesh.vertices) * 7 * 8 + len(mesh.triangles) * (1 + 16)
    assert len(info["payload"]) == expected


def test_mesh_validates_indices(small_sphere):
    field, part = small_sphere["field"], small_sphere["part"]
    surface, _ = extract_for(field, part)
    mesh = build_mesh(surface)
    mesh.validate()
    assert mesh.triangles.min() >= 0
    assert len(mesh.component_ids) == len(mesh.triangles)
    norms = np.linalg.norm(mesh.normals, axis=1)
    assert np.allclose(norms, 1.0)


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "isograph.cli", *args],
        capture_output=True, text=True,
    )


def test_cli_extract_solve(small_sphere, tmp_path):
    out = tmp_path / "out.ply"
    r = run_cli("extract", small_sphere["bin"], "-o", str(out),
                "--solve-volume", "--eps", "1e-9")
    assert r.returncode == 0, r.stderr
    assert "solve:" in r.stdout and "attained" in r.stdout
    gamma = float(r.stdout.split("|gamma|=")[1].split()[0])
    assert gamma < 1e-9
    assert out.exists()


def test_cli_extract_deterministic(small_sphere, tmp_path):
    a = tmp_path / "a.obj"
    b = tmp_path / "b.obj"
    r1 = run_cli("extract", small_sphere["txt"], "-o", str(a), "--iso", "0.5",
                 "--threads", "1")
    r2 = run_cli("extract", small_sphere["txt"], "-o", str(b), "--iso", "0.5",
                 "--threads", "4")
    assert r1.returncode == 0 and r2.returncode == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_bad_iso_level_usage_error(small_sphere, tmp_path):
    r = run_cli("extract", small_sphere["bin"], "-o", str(tmp_path / "x.obj"),
                "--iso", "1.5")
    assert r.returncode != 0
    assert "iso-level" in r.stderr


def test_cli_stats(small_sphere):
    r = run_cli("stats", small_sphere["txt"], "--iso", "0.5")
    assert r.returncode == 0
    assert "components = 1" in r.stdout
    assert "enclosed_volume" in r.stdout and "gamma_residual" in r.stdout


def test_cli_config_defaults(small_sphere, tmp_path):
    cfg = tmp_path / "isograph.cfg"
    cfg.write_text("iso = 0.5\nformat = obj\n")
    out = tmp_path / "cfg.mesh"
    r = run_cli("--config", str(cfg), "extract", small_sphere["txt"],
                "-o", str(out))
    assert r.returncode == 0, r.stderr
    assert out.read_text().splitlines()[0].startswith("# isograph")


def test_cli_verify_quick():
    r = run_cli("verify", "--ring-samples", "2000")
    assert r.returncode == 0, r.stdout + r.stderr
    assert "# result = ok" in r.stdout
