# analytics/__init__.py

from .cone_hyperbolicity import (
    Splitting,
    ConeField,
    RateReport,
    estimate_splitting,
    verify_cone_invariance,
    certify_partial_hyperbolicity,
    estimate_rates,
    nearly_euclidean_scale,
    derive_scale_cascade,
)
from .leaf_numerics import (
    LineField,
    ConstantLineField,
    LeafArc,
    Plaque,
    leaf_fields,
    integrate_leaf,
    local_intersection,
    holonomy_transport,
    hsu_transport,
)
