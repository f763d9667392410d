# continuation/__init__.py

from .graph_transform import (
    TubularFrame,
    FrameChain,
    GraphSection,
    build_tubular_frame,
    trace_closed_leaf,
    zero_section,
    transform_step,
    iterate_to_fixed_point,
    continuation_leaf,
    continue_immersion,
)
from .conjugacy import (
    LeafConjugacyData,
    build_h1,
    smooth_to_h,
    build_rho_and_residual,
    injectivity_probe,
)
