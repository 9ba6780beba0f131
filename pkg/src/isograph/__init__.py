"""Connected iso-surface extraction from volume fractions on cuboid grids.

The extraction is graph-theoretical: each grid cell is a labeled cuboid
graph, per-cell rewrite rules delete degenerate surface pieces and peel
the cell into single-path pieces, and the resulting surface is provably
connected (up to the domain boundary) and decomposes into oriented
components on which discrete mean curvature is well defined.
"""

from .cube import (
    ConfigSignature,
    FaceClass,
    LabeledCuboidGraph,
    NodeState,
    classify_face,
    classify_graph,
    classify_nodes,
    signature,
)
from .grid import (
    CuboidPartition,
    InputError,
    IsoLevelSolve,
    NoInterfaceError,
    NodeLabeling,
    VolumeFractionField,
    enclosed_volume,
    label_vertices,
    solve_iso_level,
)
from .extract import (
    IsoSurface,
    extract_cell,
    extract_grid,
    inner_isopath,
    interpolate_edge,
    outer_isopath,
)
from .rules import (
    GraphDecomposition,
    RewriteRule,
    RuleKind,
    SubgraphPattern,
    apply_rule,
    decompose,
    find_patterns,
    select_s_rule,
    strip_singular_and_isolated,
)
from .components import (
    AuditReport,
    SurfaceComponent,
    audit_connectivity,
    build_matching,
    build_neighborhood,
    decompose_components,
    disperse_connected,
    pair_at_edge,
)
from .geometry import (
    CurvatureEstimate,
    NeighborRing,
    PseudoNormal,
    SurfaceRegion,
    mean_curvature,
    neighbor_ring,
    orient_elements,
    pseudo_normal,
    surface_region,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
