# daf_numerics/primitives/pipeline_runner.py

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import yaml

from .. import __version__, config
from ..analytics import (
    LineField,
    certify_partial_hyperbolicity,
    derive_scale_cascade,
    estimate_rates,
    estimate_splitting,
    nearly_euclidean_scale,
)
from ..continuation import (
    FrameChain,
    build_h1,
    build_rho_and_residual,
    continuation_leaf,
    injectivity_probe,
    smooth_to_h,
    trace_closed_leaf,
)
from ..daf import (
    center_displacement,
    find_compact_periodic_center_leaf,
    plaque_expansivity_test,
    qi_check,
    recover_tau,
    tau_floor_check,
    unique_integrability_probe,
)
from ..manifolds import SYSTEM_CATALOG, DynamicalSystem, perturb, resolve_system
from ..utils import ANSI, colorize, log_verdict, to_jsonable, write_csv, write_json
from ..utils.artifact_io import dumps_sorted
from ..utils.color_log import INCONCLUSIVE_VERDICTS
from ..utils.errors import DafNumericsError, InvalidInputError, ModelViolationError, UsageError

FAILING_VERDICTS = {"fail", "rejected"}

Tables = Dict[str, pd.DataFrame]
PipelineResult = Tuple[str, Dict[str, Any], Tables]


# ==============================================================================
# EXPERIMENT CONFIG
# ==============================================================================


@dataclass
class ExperimentConfig:
    """
    One pipeline run. Keys of a config file that are not fields here are
    collected into ``params`` and read by the individual pipelines
    (``x``, ``y``, ``length``, ``iterates``, ``samples``, ...).
    """

    system: Union[str, Dict[str, Any]] = "skew"
    pipeline: Optional[str] = None
    partner: Dict[str, Any] = field(default_factory=dict)
    delta: Optional[float] = None
    grid: Optional[int] = None
    budget: Optional[int] = None
    seed: int = config.DEFAULT_SEED
    out: Optional[str] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.delta is not None and not (np.isfinite(self.delta) and self.delta > 0):
            raise InvalidInputError("delta must be positive.")
        if self.grid is not None and int(self.grid) < 1:
            raise InvalidInputError("grid must be a positive integer.")
        if self.budget is not None and int(self.budget) < 0:
            raise InvalidInputError("budget must be nonnegative.")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise InvalidInputError("seed must be an integer.")
        try:
            epsilon = float(self.partner.get("epsilon", config.PARTNER_EPSILON))
        except (TypeError, ValueError) as exc:
            raise InvalidInputError("Partner epsilon must be a number.") from exc
        if not (np.isfinite(epsilon) and epsilon >= 0):
            raise InvalidInputError("Partner epsilon must be nonnegative.")
        for key, value in self.params.items():
            if key.endswith("tol") and not (isinstance(value, (int, float)) and value > 0):
                raise InvalidInputError(f"Tolerance '{key}' must be positive.")

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        """Precedence: overrides (command-line flags) > config file > defaults."""
        data: Dict[str, Any] = {}
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise InvalidInputError(f"Config file '{path}' does not exist.")
            try:
                loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
            except yaml.YAMLError as exc:
                raise InvalidInputError(f"Malformed config file '{path}': {exc}") from exc
            if loaded is None:
                loaded = {}
            if not isinstance(loaded, dict):
                raise InvalidInputError("A config file must hold a flat mapping of keys.")
            data.update(loaded)
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})

        names = {f.name for f in fields(cls)}
        params = dict(data.pop("params", None) or {})
        params.update({k: data.pop(k) for k in list(data) if k not in names})
        return cls(**data, params=params)

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable(asdict(self))


# ==============================================================================
# HELPERS
# ==============================================================================


def _catalog_entry(system: Union[str, Dict[str, Any]]) -> Dict[str, Any]:
    name = system["name"] if isinstance(system, dict) else str(system)
    return SYSTEM_CATALOG.get(name.split(":", 1)[-1], {})


def _partner(f: DynamicalSystem, cfg: ExperimentConfig) -> DynamicalSystem:
    kind = cfg.partner.get("kind", config.PARTNER_KIND)
    epsilon = float(cfg.partner.get("epsilon", config.PARTNER_EPSILON))
    return perturb(f, kind=kind, epsilon=epsilon)


def _point(cfg: ExperimentConfig, key: str, default) -> np.ndarray:
    value = np.asarray(cfg.params.get(key, default), dtype=float)
    if value.shape != (3,):
        raise InvalidInputError(f"'{key}' must be a point with 3 coordinates.")
    return value


def _sample_points(f: DynamicalSystem, cfg: ExperimentConfig) -> Optional[np.ndarray]:
    """``samples`` random fundamental-domain points drawn from the config seed, or None for the grid."""
    count = cfg.params.get("samples")
    if count is None:
        return None
    rng = np.random.default_rng(cfg.seed)
    m = f.manifold
    uv = rng.random((int(count), 3))
    uv[:, 2] = m.theta_origin + m.period * uv[:, 2]
    return uv


def _rates(f: DynamicalSystem, g: DynamicalSystem, cfg: ExperimentConfig):
    split = estimate_splitting(f, grid=cfg.grid or config.CERTIFY_GRID)
    lam, kappa = estimate_rates(f, split, cfg.grid)
    delta = cfg.delta if cfg.delta is not None else config.PIPELINE_DELTA
    rates = derive_scale_cascade(delta, kappa, f, g, lam)
    if not rates.accepted:
        raise ModelViolationError(
            f"Partner rejected at delta = {delta:g}: delta' = {rates.delta_prime:.3e} >= {rates.p5_bound:.3e}.",
            witness=rates.to_dict(),
        )
    return rates


def _base_leaf(f: DynamicalSystem, cfg: ExperimentConfig):
    m = f.manifold
    x = _point(cfg, "x", [0.0, 0.0, m.theta_origin])
    length = float(cfg.params.get("length", m.period))
    return trace_closed_leaf(LineField(f, "c"), x, length)


# ==============================================================================
# PIPELINES
# ==============================================================================


def run_certify_ph(f: DynamicalSystem, cfg: ExperimentConfig) -> PipelineResult:
    grid = cfg.grid or config.CERTIFY_GRID
    iterates = int(cfg.budget or _catalog_entry(cfg.system).get("certify_iterates", 1))
    cones = certify_partial_hyperbolicity(f, iterates=iterates, grid=grid)
    split = estimate_splitting(f, grid=grid, strict=False)
    lam, kappa = estimate_rates(f, split, grid)
    delta = cfg.delta if cfg.delta is not None else nearly_euclidean_scale(f, split)
    report = {
        "lambda": lam,
        "kappa": kappa,
        "delta": delta,
        "iterates": iterates,
        "worst_margin": cones["worst_margin"],
        "worst_cell": cones["worst_cell"],
        "splitting": split.to_dict(),
    }
    table = pd.DataFrame(
        np.hstack([split.points, split.e_s, split.e_c, split.e_u]),
        columns=["x", "y", "theta", "es_x", "es_y", "es_theta", "ec_x", "ec_y", "ec_theta", "eu_x", "eu_y", "eu_theta"],
    )
    return ("pass" if cones["pass"] else "fail"), report, {"splitting": table}


def run_continue_foliation(f: DynamicalSystem, cfg: ExperimentConfig) -> PipelineResult:
    g = _partner(f, cfg)
    rates = _rates(f, g, cfg)
    L = _base_leaf(f, cfg)
    prime, report = continuation_leaf(f, g, L, rates)
    ok = report["tangency_ok"] and report.get("equivariance_ok", True)
    report = {"rates": rates, "leaf": L, "leaf_prime": prime, **report}
    return ("complete" if ok else "fail"), report, {"leaf": L.to_frame(), "leaf_prime": prime.to_frame()}


def run_leaf_conjugacy(f: DynamicalSystem, cfg: ExperimentConfig) -> PipelineResult:
    g = _partner(f, cfg)
    rates = _rates(f, g, cfg)
    L = _base_leaf(f, cfg)
    chain = FrameChain(f, L, rates)
    prime, continuation = continuation_leaf(f, g, L, rates, chain=chain)
    data = smooth_to_h(build_h1(f, g, chain.level(0), prime, rates))
    residual = build_rho_and_residual(f, g, [data], rates)
    injectivity = injectivity_probe([data], rates.delta, plaque_verdict=cfg.params.get("plaque_verdict"))
    ok = residual["semi_conjugacy_sup"] < config.SEMI_CONJUGACY_TOL and residual["rho_to_identity_sup"] < rates.delta
    report = {
        **residual,
        "rates": rates,
        "continuation": continuation,
        "leaf": data,
        "injectivity": injectivity,
    }
    table = pd.DataFrame({"t": data.t, "psi1": data.psi1, "psi": data.psi, "dpsi": data.dpsi})
    return ("pass" if ok else "fail"), report, {"conjugacy": table}


def run_daf_detect(f: DynamicalSystem, cfg: ExperimentConfig) -> PipelineResult:
    points = _sample_points(f, cfg)
    displacement = center_displacement(f, grid=cfg.grid, points=points)
    if displacement["verdict"] != "center-fixing":
        return displacement["verdict"], displacement, {}
    tau = recover_tau(f, grid=cfg.grid, points=points)
    report: Dict[str, Any] = {**displacement, "tau": tau, "qi": qi_check(f, grid=cfg.grid, points=points, tau=tau)}
    if cfg.delta is not None:
        report["tau_floor"] = tau_floor_check(tau, cfg.delta)
    return displacement["verdict"], report, {"tau": tau.to_frame()}


def run_plaque_expansivity(f: DynamicalSystem, cfg: ExperimentConfig) -> PipelineResult:
    delta = cfg.delta if cfg.delta is not None else config.PLAQUE_DELTA
    horizon = int(cfg.budget) if cfg.budget is not None else config.PLAQUE_HORIZON
    report = plaque_expansivity_test(f, delta=delta, horizon=horizon, grid=cfg.grid, points=_sample_points(f, cfg))
    tables = {}
    if report.get("witness"):
        w = report["witness"]
        tables["witness"] = pd.DataFrame(
            np.hstack([np.asarray(w["x"]), np.asarray(w["y"])]),
            columns=["x_x", "x_y", "x_theta", "y_x", "y_y", "y_theta"],
        )
    return report["verdict"], report, tables


def run_integrability_probe(f: DynamicalSystem, cfg: ExperimentConfig) -> PipelineResult:
    x = _point(cfg, "x", [0.1, 0.2, 0.0])
    budget = cfg.params.get("arc_budget")
    report = unique_integrability_probe(f, x, budget=budget)
    tables = {f"curve_{k}": arc.to_frame() for k, arc in report["curves"].items()}
    return report["verdict"], report, tables


def run_find_compact_leaf(f: DynamicalSystem, cfg: ExperimentConfig) -> PipelineResult:
    m = f.manifold
    x0 = _point(cfg, "x", [0.004, 0.003, m.theta_origin + 0.3 * m.period])
    report = find_compact_periodic_center_leaf(f, x0, epsilon=cfg.params.get("epsilon"), k_budget=cfg.budget)
    tables = {"leaf": report["leaf"].to_frame()} if report["verdict"] == "found" else {}
    return report["verdict"], report, tables


def run_qi_check(f: DynamicalSystem, cfg: ExperimentConfig) -> PipelineResult:
    points = _sample_points(f, cfg)
    tau = recover_tau(f, grid=cfg.grid, points=points) if cfg.params.get("with_tau") else None
    report = qi_check(f, grid=cfg.grid, points=points, n_iter=cfg.budget, tau=tau)
    curve = pd.DataFrame({"n": list(report["growth_curve"]), "radius": list(report["growth_curve"].values())})
    return report["verdict"], report, {"growth": curve}


def pipeline_runners() -> Dict[str, Callable[[DynamicalSystem, ExperimentConfig], PipelineResult]]:
    return {
        "certify-ph": run_certify_ph,
        "continue-foliation": run_continue_foliation,
        "leaf-conjugacy": run_leaf_conjugacy,
        "daf-detect": run_daf_detect,
        "plaque-expansivity": run_plaque_expansivity,
        "integrability-probe": run_integrability_probe,
        "find-compact-leaf": run_find_compact_leaf,
        "qi-check": run_qi_check,
    }


# ==============================================================================
# ENTRY POINTS
# ==============================================================================


def exit_code_for(verdict: str) -> int:
    if verdict in INCONCLUSIVE_VERDICTS:
        return 3
    if verdict in FAILING_VERDICTS:
        return 2
    return 0


def run(pipeline: Optional[str], cfg: ExperimentConfig) -> Tuple[int, Dict[str, Any]]:
    """
    Executes one pipeline and writes ``<out>/<pipeline>.json`` plus one CSV per
    data table. Errors that escape a pipeline are reported in the summary
    and mapped to their exit codes.
    """
    pipeline = pipeline or cfg.pipeline
    runners = pipeline_runners()
    if pipeline not in runners:
        error = UsageError(f"Unknown pipeline '{pipeline}'. Options: {sorted(runners)}")
        return error.exit_code, {"pipeline": pipeline, "verdict": "usage-error", "error": str(error)}

    if config.VERBOSE:
        print(f"\n--- Running {colorize(pipeline, ANSI.B_YELLOW)} on {colorize(str(cfg.system), ANSI.CYAN)} ---")

    summary: Dict[str, Any] = {"pipeline": pipeline, "config": cfg.to_dict(), "version": __version__, "seed": cfg.seed}
    tables: Tables = {}
    try:
        f = resolve_system(cfg.system)
        summary["system"] = f.recipe()
        verdict, report, tables = runners[pipeline](f, cfg)
        summary.update({"verdict": verdict, "report": report})
        code = exit_code_for(verdict)
    except DafNumericsError as exc:
        code = exc.exit_code
        summary.update({"verdict": "error", "error": f"{type(exc).__name__}: {exc}", "witness": exc.witness})

    summary["exit_code"] = code
    summary = to_jsonable(summary)
    if cfg.out is not None:
        out = Path(cfg.out)
        summary["artifacts"] = sorted(f"{pipeline}_{name}.csv" for name in tables)
        for name, frame in sorted(tables.items()):
            write_csv(out / f"{pipeline}_{name}.csv", frame)
        write_json(out / f"{pipeline}.json", summary)

    log_verdict(pipeline, summary["verdict"], {"exit code": code})
    return code, summary


def list_systems(as_json: bool = False) -> List[Dict[str, Any]]:
    """Catalog names, default parameters and the construction each entry instantiates."""
    entries = [
        {"name": name, "defaults": to_jsonable(entry["defaults"]), "anchor": entry["anchor"]}
        for name, entry in sorted(SYSTEM_CATALOG.items())
    ]
    if as_json:
        print(dumps_sorted({"systems": entries}))
    else:
        for entry in entries:
            print(f"{colorize(entry['name'], ANSI.B_YELLOW)}: {entry['anchor']}")
            print(f"     | defaults: {colorize(str(entry['defaults']), ANSI.B_CYAN)}")
    return entries
