"""Command-line surface: extract, verify, stats."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np


def _load_config(path):
    out = {}
    if not path:
        return out
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SystemExit(f"config: expected key=value, got {line!r}")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _default_threads():
    env = os.environ.get("ISOGRAPH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _iso_level(value):
    c = float(value)
    if not 0.0 < c < 1.0:
        raise argparse.ArgumentTypeError(f"iso-level must lie in (0, 1), got {c}")
    return c


def build_parser():
    p = argparse.ArgumentParser(
        prog="isograph",
        description="Connected iso-surface extraction from volume fractions "
                    "on cuboid grids.",
    )
    p.add_argument("--config", help="defaults file with key=value lines")
    sub = p.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="extract an iso-surface mesh")
    ex.add_argument("field", help="fraction field (.isog binary or text)")
    ex.add_argument("-o", "--output", required=True, help="mesh output path")
    grp = ex.add_mutually_exclusive_group()
    grp.add_argument("--iso", type=_iso_level, help="fixed iso-level in (0, 1)")
    grp.add_argument("--solve-volume", action="store_true",
                     help="choose the iso-level that conserves the phase volume")
    ex.add_argument("--eps", type=float, default=None,
                    help="volume-conservation tolerance (default 1e-9)")
    ex.add_argument("--format", choices=("obj", "ply"), default=None)
    ex.add_argument("--curvature", action="store_true",
                    help="attach per-vertex mean curvature (PLY channel)")
    ex.add_argument("--threads", type=int, default=None)

    vf = sub.add_parser("verify", help="run the built-in theorem checks")
    vf.add_argument("--seed", type=int, default=None)
    vf.add_argument("--ring-samples", type=int, default=100_000)

    st = sub.add_parser("stats", help="component count, area, enclosed volume")
    st.add_argument("field")
    st.add_argument("--iso", type=_iso_level, required=True)
    return p


def cmd_extract(args, cfg):
    from . import (
        decompose_components, extract_grid, label_vertices, solve_iso_level,
    )
    from .fieldio import build_mesh, read_field, write_mesh

    field, part = read_field(args.field)
    labels = label_vertices(field)
    eps = args.eps if args.eps is not None else float(cfg.get("eps", 1e-9))
    threads = args.threads if args.threads is not None else int(
        cfg.get("threads", _default_threads())
    )
    fmt = args.format or cfg.get("format")
    if fmt is None:
        fmt = "ply" if args.output.endswith(".ply") else "obj"

    if args.iso is not None:
        c = args.iso
    elif args.solve_volume or "iso" not in cfg:
        sol = solve_iso_level(labels.values, part, field, eps)
        c = sol.c
        status = "attained" if sol.attained else "NOT attained (residual jump)"
        print(f"solve: c={sol.c:.12g} |gamma|={abs(sol.residual):.3e} "
              f"({status}, {sol.iterations} evaluations)")
    else:
        c = _iso_level(cfg["iso"])

    surface = extract_grid(labels.values, part, c, threads=threads)
    comps = decompose_components(surface)
    mesh = build_mesh(surface, comps, with_curvature=args.curvature)
    write_mesh(mesh, fmt, args.output, surface=surface, eps=eps)
    print(f"extract: {len(surface.paths)} elements, {len(mesh.vertices)} vertices, "
          f"{len(comps)} component(s) -> {args.output}")
    return 0


def cmd_verify(args, cfg):
    from .verify import DEFAULT_SEED, check_all

    seed = args.seed if args.seed is not None else int(cfg.get("seed", DEFAULT_SEED))
    report = check_all(ring_samples=args.ring_samples, seed=seed)
    sys.stdout.write(report.render())
    return 0 if report.ok else 1


def cmd_stats(args, cfg):
    from . import decompose_components, enclosed_volume, extract_grid, label_vertices
    from .fieldio import read_field

    field, part = read_field(args.field)
    labels = label_vertices(field)
    surface = extract_grid(labels.values, part, args.iso)
    comps = decompose_components(surface)
    vol = enclosed_volume(labels.values, part, args.iso, surface=surface)
    target = field.target_volume
    gamma = 1.0 - vol / target if target > 0 else float("nan")
    area = 0.0
    pts = surface.points
    for pi, p in enumerate(surface.paths):
        xs = pts[p.pts]
        m = len(xs)
        if m == 3:
            area += 0.5 * np.linalg.norm(np.cross(xs[1] - xs[0], xs[2] - xs[0]))
        else:
            pc = xs.mean(axis=0)
            for i in range(m):
                area += 0.5 * np.linalg.norm(
                    np.cross(xs[i] - pc, xs[(i + 1) % m] - pc)
                )
    print(f"cells = {part.n_cells}")
    print(f"elements = {len(surface.paths)}")
    print(f"components = {len(comps)}")
    print(f"area = {area:.12g}")
    print(f"enclosed_volume = {vol:.12g}")
    print(f"gamma_residual = {gamma:.6e}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _load_config(args.config)
    try:
        if args.command == "extract":
            return cmd_extract(args, cfg)
        if args.command == "verify":
            return cmd_verify(args, cfg)
        if args.command == "stats":
            return cmd_stats(args, cfg)
    except Exception as e:  # surface I/O and validation errors as exit codes
        print(f"isograph: error: {e}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
