import numpy as np
import pytest

import isograph as ig


def sphere_fractions(n, R=0.3, center=(0.5, 0.5, 0.5), sub=16):
    """Fractions of each cell inside a sphere; only mixed cells subsample."""
    h = 1.0 / n
    idx = (np.arange(n) + 0.5) * h
    X, Y, Z = np.meshgrid(idx, idx, idx, indexing="ij")
    d = np.sqrt((X - center[0]) ** 2 + (Y - center[1]) ** 2 + (Z - center[2]) ** 2)
    v = (d < R).astype(np.float64)
    mixed = np.abs(d - R) <= np.sqrt(3) / 2 * h
    off = (np.arange(sub) + 0.5) / sub * h
    OX, OY, OZ = np.meshgrid(off, off, off, indexing="ij")
    OX, OY, OZ = OX.ravel(), OY.ravel(), OZ.ravel()
    cx, cy, cz = center
    for ci, cj, ck in np.argwhere(mixed):
        x0, y0, z0 = ci * h, cj * h, ck * h
        v[ci, cj, ck] = (
            ((x0 + OX - cx) ** 2 + (y0 + OY - cy) ** 2 + (z0 + OZ - cz) ** 2) < R * R
        ).mean()
    part = ig.CuboidPartition((n, n, n), (0, 0, 0), (h, h, h))
    return ig.VolumeFractionField(v, part), part


def two_spheres_fractions(n=24, R=0.13):
    h = 1.0 / n
    part = ig.CuboidPartition((n, n, n), (0, 0, 0), (h, h, h))
    f1, _ = sphere_fractions(n, R, center=(0.28, 0.5, 0.5), sub=8)
    f2, _ = sphere_fractions(n, R, center=(0.72, 0.5, 0.5), sub=8)
    v = np.clip(f1.values + f2.values, 0.0, 1.0)
    return ig.VolumeFractionField(v, part), part


def edge_touching_cubes_fractions(n=8, nz=4):
    """Two full-height square columns touching along one lattice-edge line.

    The corner cell column of each block is softened to 1/2 so the shared
    line's vertices average to exactly 1/4 while the flanking vertices stay
    strictly above: at iso-level 0.25 the two surfaces touch along the
    contact segment but remain two components.  The columns run the whole
    height, so the contact is the only interior degeneracy.
    """
    v = np.zeros((n, n, nz))
    v[1:4, 1:4, :] = 1.0
    v[4:7, 4:7, :] = 1.0
    v[3, 3, :] = 0.5
    v[4, 4, :] = 0.5
    part = ig.CuboidPartition((n, n, nz))
    return ig.VolumeFractionField(v, part), part


def random_field(n, seed):
    rng = np.random.default_rng(seed)
    part = ig.CuboidPartition((n, n, n), (0, 0, 0), (1.0 / n,) * 3)
    return ig.VolumeFractionField(rng.random((n, n, n)), part), part


def extract_for(field, part, c=0.5):
    labels = ig.label_vertices(field)
    return ig.extract_grid(labels.values, part, c), labels


@pytest.fixture(scope="session")
def sphere16():
    field, part = sphere_fractions(16)
    surface, labels = extract_for(field, part)
    return {"field": field, "part": part, "surface": surface, "labels": labels}


@pytest.fixture(scope="session")
def sphere32():
    field, part = sphere_fractions(32)
    surface, labels = extract_for(field, part)
    return {"field": field, "part": part, "surface": surface, "labels": labels}


@pytest.fixture(scope="session")
def slab16():
    n = 16
    v = np.zeros((n, n, n))
    v[:, :, : n // 2] = 1.0
    part = ig.CuboidPartition((n, n, n), (0, 0, 0), (1.0 / n,) * 3)
    field = ig.VolumeFractionField(v, part)
    surface, labels = extract_for(field, part, c=0.4)
    return {"field": field, "part": part, "surface": surface, "labels": labels}
