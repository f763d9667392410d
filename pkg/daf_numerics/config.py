# ==============================================================================
# CONFIGURATION FILE
# Defines default numerical parameters, tolerances and budgets used across the
# toolkit. Functions read these at call time, so tests and the CLI can override
# them per run.
# ==============================================================================

# --- Console Output ---

VERBOSE: bool = True
"""If False, colored console logging is suppressed (the CLI turns it off in --json mode)."""

PROGRESS_BARS: bool = False
"""Show tqdm progress bars over seed grids and leaf batches."""


# ------------------------------------------------------------------------------
# 1. Geometry & Tolerances
# ------------------------------------------------------------------------------

ROUNDTRIP_TOL: float = 1e-9
"""Maximum allowed |forward(inverse(p)) - p| for cataloged systems."""

JACOBIAN_FD_STEP: float = 1e-6
"""Step h of the central-difference Jacobian (fallback and cross-check oracle)."""

JACOBIAN_FD_TOL: float = 1e-5
"""Operator-norm agreement required between analytic and central-difference Jacobians."""

ANGLE_TOL: float = 1e-6
"""theta_tol: angular tolerance (radians) for invariance and convergence of bundles."""


# ------------------------------------------------------------------------------
# 2. Invariant Splitting
# ------------------------------------------------------------------------------

SPLITTING_ITERATIONS: int = 60
"""Default power-iteration length n (must be >= 20)."""

MIN_SPLITTING_ITERATIONS: int = 20
"""Lower bound on n accepted by estimate_splitting."""


# ------------------------------------------------------------------------------
# 3. Cones & Rates
# ------------------------------------------------------------------------------

CONE_OPENING: float = 0.5
"""Default opening ratio alpha of the standard cones."""

CONE_RAYS: int = 16
"""Number of extreme rays used to approximate a cone with 2-D complement."""

CONE_MARGIN_TOL: float = 1e-9
"""A containment margin must exceed this value to count as strict."""

RATE_HEADROOM: float = 1.01
"""Multiplicative safety headroom applied to sampled lambda and kappa."""

RATE_REFINE_TOL: float = 1e-3
"""Grid refinement stops once lambda and kappa move by less than this fraction."""

RATE_MAX_GRID: int = 64
"""Largest grid (per axis) the rate refinement loop will reach."""


# ------------------------------------------------------------------------------
# 4. Nearly-Euclidean Scale
# ------------------------------------------------------------------------------

DELTA_CAP: float = 0.05
"""Upper cap of the dyadic delta search; keeps tubes inside chart validity."""

DELTA_FLOOR: float = 1e-6
"""Resolution floor of the dyadic search."""

NEARLY_EUCLIDEAN_EPS: float = 1.0 / 16.0
"""Default epsilon for the nearly-euclidean scale."""

NEIGHBOUR_RADIUS_FACTOR: float = 20.0
"""Pairs within this multiple of delta are compared by the scale search."""

P5_DENOMINATOR: float = 64.0
"""delta' < delta / (P5_DENOMINATOR * kappa^2) * (1 - lambda) is required for acceptance."""


# ------------------------------------------------------------------------------
# 5. Leaf Integration
# ------------------------------------------------------------------------------

LEAF_STEP: float = 1e-2
"""Default arc-length step of the RK4 leaf integrator."""

LEAF_H_MIN: float = 1e-4
LEAF_H_MAX: float = 1e-2
"""Bounds on consecutive parameter gaps of a LeafArc."""

TANGENT_TURN_LIMIT: float = 0.9
"""Consecutive unit tangents with |cos| below this abort the integration (cone exit)."""

INTERSECTION_TOL: float = 1e-10
"""Residual distance required of local_intersection results."""

TRANSVERSAL_SAMPLES: int = 5
"""Samples per axis of a transversal disc."""


# ------------------------------------------------------------------------------
# 6. Graph Transform
# ------------------------------------------------------------------------------

CENTER_SAMPLES: int = 400
"""Default number of center-parameter samples of a tubular frame."""

TRANSVERSE_SAMPLES: int = 21
"""Transverse offsets per strip fibre (odd, so the zero offset is a node)."""

GRAPH_TOL: float = 1e-11
"""Successive sup-distance at which iterate_to_fixed_point stops."""

GRAPH_MAX_ITER: int = 200
"""Iteration budget of iterate_to_fixed_point."""

GEOMETRIC_SLACK: float = 0.10
"""Allowed relative excess of the convergence history over its geometric bound."""

TANGENCY_FACTOR: float = 10.0
"""Continuation leaves must be tangent to E^c_g within TANGENCY_FACTOR * ANGLE_TOL."""

NEWTON_STEPS: int = 4
"""Newton iterations of the tube-parameter projection."""


# ------------------------------------------------------------------------------
# 7. Conjugacy
# ------------------------------------------------------------------------------

WINDOW_MIN_SAMPLES: int = 20
"""Minimum Psi_1 samples per smoothing window of width delta_3."""

INVERSION_TOL: float = 1e-12
"""Bisection tolerance of the monotone inversion of Psi."""

SEMI_CONJUGACY_TOL: float = 1e-8
"""Required sup of d(h(rho(f x)), g(h x))."""


# ------------------------------------------------------------------------------
# 8. DAF Probes
# ------------------------------------------------------------------------------

SEARCH_LENGTH: float = 4.0
"""Arc-length budget when locating f(x) on the center leaf of x."""

CAPTURE_FACTOR: float = 5.0
"""Samples closer than CAPTURE_FACTOR * step to a target start a local refinement."""

LOCATE_TOL: float = 1e-7
"""A refined leaf point closer than this to its target counts as found."""

CLOSURE_TOL: float = 1e-7
"""Closure tolerance of compact center leaves."""

QI_GROWTH_TOL: float = 0.05
"""Growth rates (per iterate, log scale) below this are read as quasi-isometric."""

QI_SLACK: float = 0.05
"""Relative slack when comparing image lengths with the tau prediction."""

PLAQUE_JUMPS: int = 5
"""Center offsets per step in the pseudo-orbit search."""

PLAQUE_MAX_HORIZON: int = 30
"""Largest horizon accepted by the plaque expansivity test."""

PLAQUE_NODE_BUDGET: int = 2_000_000
"""Explored-node budget of the pseudo-orbit search."""

PLAQUE_BEAM: int = 4096
"""Maximum surviving branches kept per level."""

COHERENCE_TOL: float = 1e-6
"""Tolerance of the saturation containment test."""

WINDING_MAX_ANGLE_STEP: float = 1.5707963267948966
"""Consecutive boundary angle steps above pi/2 make a winding number unreliable."""

FIXED_POINT_TOL: float = 1e-10
"""Size at which quadrant bisection stops."""

PROBE_GRID: int = 3
"""Default grid (per axis) of sample points for the DAF probes."""

GENERIC_OFFSET: float = 0.6180339887498949
"""Fractional cell offset that keeps probe grids off rational (periodic) points."""

QI_ARC_LENGTH: float = 0.1
"""Radius l of the center arcs pushed by qi_check when no tau field is given."""

QI_ITERATES: int = 3
"""Default iterate range |n| <= N of qi_check."""

COHERENCE_SCALE: float = 0.05
"""Default scale delta of the saturation containment test."""

ESCAPE_EPSILON: float = 0.05
"""Default escape threshold of the cu-expansivity probe."""

ESCAPE_BUDGET: int = 20
"""Default iterate budget T of the topological Anosov probes."""

BRANCH_BUDGET: float = 0.5
"""Arc length of the curves compared by the unique integrability probe."""

BRANCH_DETOUR: float = 0.1
"""Arc length followed inside the cu-torus before a branch exits."""

TORUS_LIFT: float = 1e-10
"""Normal offset used to leave the cu-torus along an exiting center curve."""

BRANCH_FACTOR: float = 10.0
"""Separation must exceed this multiple of the integration error to count as branching."""

UNIQUENESS_TOL: float = 1e-7
"""Hausdorff distance below which two integrations are read as the same curve."""

RETURN_EPSILON: float = 0.05
"""Recurrence threshold epsilon' of the compact leaf search."""

RETURN_BUDGET: int = 8
"""Largest return time k tried by the compact leaf search."""

RECTANGLE_RADIUS: float = 0.05
"""Half-size of the su-rectangle around the seed."""

WINDING_SAMPLES: int = 16
"""Boundary samples per side of a rectangle when computing winding numbers."""

WINDING_MAX_REFINE: int = 4
"""Boundary doublings tried before a winding number is declared unresolved."""


# ------------------------------------------------------------------------------
# 9. Artifacts
# ------------------------------------------------------------------------------

CSV_FLOAT_FORMAT: str = "%.17g"
"""Bit-exact decimal rendering of CSV floats."""

DEFAULT_SEED: int = 12345
"""Seed for randomized sampling when the experiment config gives none."""


# ------------------------------------------------------------------------------
# 10. Pipelines
# ------------------------------------------------------------------------------

PIPELINE_DELTA: float = 0.1
"""delta used by the continuation pipelines when the experiment config gives none."""

PARTNER_KIND: str = "fiber-shear"
"""Perturbation that builds the partner g of f in two-map pipelines."""

PARTNER_EPSILON: float = 1e-4
"""Amplitude of the default partner perturbation."""

CERTIFY_GRID: int = 8
"""Grid resolution of the certify-ph pipeline."""

PLAQUE_DELTA: float = 0.01
"""delta of the plaque-expansivity pipeline."""

PLAQUE_HORIZON: int = 15
"""Horizon of the plaque-expansivity pipeline."""
