# manifolds/__init__.py

from .chart_space import (
    ManifoldDescriptor,
    ChartPoint,
    normalize,
    normalize_coords,
    displacement,
    dist,
    dist_coords,
    hausdorff_distance,
    sample_grid,
    hyperbolic_eigendata,
)
from .system_zoo import (
    DynamicalSystem,
    make_skew_product,
    make_suspension_time1,
    make_suspension_flow_map,
    make_hhu_map,
    make_hhu_quotient_map,
    perturb,
    build_system,
    resolve_system,
    SYSTEM_CATALOG,
)
