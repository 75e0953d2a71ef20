"""Scenario runner: validated configuration, task dispatch, artifacts.

A run takes a single configuration (TOML file or equivalent mapping),
executes one task, and writes manifest.json (config echo, versions,
timings), report.json (task output, schema-versioned), and task-specific
CSV files into the output directory.
"""

import csv
import json
import platform
import time
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from . import __version__
from .bcs import BoundaryConditionSet, apply_bcs
from .energy import (MaterialParams, ReducedLoads, VolumetricLoads,
                     reduce_loads, total_energy)
from .expressions import ExpressionError, compile_callable, compile_profile
from .geometry import DomainError, MeshError, build_mesh, rectangle
from .spaces import SpaceH1, SpaceH2, interpolate_displacement
from .expressions import compile_scalar_field

SCHEMA_VERSION = 1
TASKS = ("energy", "minimize", "rigidity", "identities", "counterexample",
         "blowup", "convex_weight")


class ConfigError(ValueError):
    """Invalid configuration; maps to exit status 2."""


class NumericalError(RuntimeError):
    """Numerical failure during a task; maps to exit status 3."""


class DomainConfig(BaseModel):
    kind: str = "rectangle"
    a: float = 0.0
    b: float = 1.0
    c: float = 0.0
    d: float = 1.0
    vertices: Optional[list] = None

    @field_validator("kind")
    @classmethod
    def _kind(cls, v):
        if v not in ("rectangle", "convex_polygon", "general_polygon"):
            raise ValueError(f"unknown domain kind {v!r}")
        return v


class MeshConfig(BaseModel):
    n1: int = Field(16, ge=1)
    n2: int = Field(16, ge=1)


class MaterialConfig(BaseModel):
    lam: float = 1.0
    mu: float = 1.0
    epsilon: float = 0.1


class LoadConfig(BaseModel):
    # reduced loads (expressions over y1, y2)
    p1: Optional[str] = None
    p2: Optional[str] = None
    p3: Optional[str] = None
    q1: Optional[str] = None
    q2: Optional[str] = None
    # volumetric loads (expressions over y1, y2, x3 for f; y1, y2 for g)
    f1: Optional[str] = None
    f2: Optional[str] = None
    f3: Optional[str] = None
    g_top: Optional[str] = None
    g_bottom: Optional[str] = None
    x3_degree: int = 2
    q_integrand: str = "f"

    @field_validator("q_integrand")
    @classmethod
    def _qi(cls, v):
        if v not in ("f", "g"):
            raise ValueError("q_integrand must be 'f' or 'g'")
        return v

    def is_volumetric(self):
        return any(getattr(self, k) is not None
                   for k in ("f1", "f2", "f3", "g_top", "g_bottom"))


class BcsConfig(BaseModel):
    regime: str = "tangential_clamp"
    v3: str = "h20"
    tags: Tuple[str, ...] = ()
    v3_clamp_tags: Tuple[str, ...] = ()
    direction: Optional[Tuple[float, float]] = None
    pin_rigid: bool = False


class FieldConfig(BaseModel):
    u1: str = "0"
    u2: str = "0"
    u3: str = "0"


class MinimizeConfig(BaseModel):
    max_iterations: int = 1000
    gradient_tolerance: float = Field(1e-8, gt=0)
    restarts: int = 0
    restart_amplitude: float = 1e-2
    backtrack: float = Field(0.5, gt=0, lt=1)
    armijo_c1: float = Field(1e-4, gt=0)
    divergence_ceiling: Optional[float] = None
    compute_constants: bool = False
    start_from: str = "zero"   # "zero" or "counterexample"

    @field_validator("start_from")
    @classmethod
    def _sf(cls, v):
        if v not in ("zero", "counterexample"):
            raise ValueError("start_from must be 'zero' or 'counterexample'")
        return v


class CounterexampleConfig(BaseModel):
    profile: str = "y1^2"      # one-variable expression f(y1)
    t_samples: Tuple[float, ...] = (1.0, 2.0, 4.0, 8.0)


class TolerancesConfig(BaseModel):
    flex: float = Field(1e-8, gt=0)
    kernel: float = Field(1e-8, gt=0)


class RunConfig(BaseModel):
    task: str
    domain: DomainConfig = DomainConfig()
    mesh: MeshConfig = MeshConfig()
    material: MaterialConfig = MaterialConfig()
    loads: LoadConfig = LoadConfig()
    bcs: BcsConfig = BcsConfig()
    fields: FieldConfig = FieldConfig()
    minimize: MinimizeConfig = MinimizeConfig()
    counterexample: CounterexampleConfig = CounterexampleConfig()
    tolerances: TolerancesConfig = TolerancesConfig()
    seed: int = 0
    out: Optional[str] = None

    @field_validator("task")
    @classmethod
    def _task(cls, v):
        if v not in TASKS:
            raise ValueError(f"unknown task {v!r}; expected one of {TASKS}")
        return v


def load_config(path):
    import tomli

    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    return parse_config(data)


def parse_config(data):
    from pydantic import ValidationError

    try:
        return RunConfig(**data)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"invalid config field '{loc}': {first['msg']}") from exc


# ---------------------------------------------------------------------------
# scenario assembly


def _build_domain(cfg):
    if cfg.domain.kind == "rectangle":
        return rectangle(cfg.domain.a, cfg.domain.b, cfg.domain.c, cfg.domain.d)
    from .geometry import PlanarDomain

    if not cfg.domain.vertices:
        raise ConfigError("polygon domains require a 'vertices' list")
    return PlanarDomain(kind=cfg.domain.kind,
                        vertices=np.asarray(cfg.domain.vertices, dtype=float))


def _build_loads(cfg, params):
    lc = cfg.loads
    try:
        if lc.is_volumetric():
            def c3(text):
                return compile_callable(text, ("y1", "y2", "x3")) if text else None

            def c2(text):
                return compile_callable(text) if text else None

            vol = VolumetricLoads(f1=c3(lc.f1), f2=c3(lc.f2), f3=c3(lc.f3),
                                  g_top=c2(lc.g_top), g_bottom=c2(lc.g_bottom),
                                  x3_degree=lc.x3_degree)
            return reduce_loads(vol, params, q_integrand=lc.q_integrand)
        kw = {}
        for name in ("p1", "p2", "p3", "q1", "q2"):
            text = getattr(lc, name)
            if text is not None:
                kw[name] = compile_callable(text)
        return ReducedLoads(**kw) if kw else None
    except ExpressionError as exc:
        raise ConfigError(str(exc)) from exc


def _build_scene(cfg):
    params = MaterialParams(lam=cfg.material.lam, mu=cfg.material.mu,
                            eps=cfg.material.epsilon)
    domain = _build_domain(cfg)
    mesh = build_mesh(domain, cfg.mesh.n1, cfg.mesh.n2)
    h1, h2 = SpaceH1(mesh), SpaceH2(mesh)
    bc = cfg.bcs
    bcs = BoundaryConditionSet(regime=bc.regime, v3=bc.v3, tags=tuple(bc.tags),
                               v3_clamp_tags=tuple(bc.v3_clamp_tags),
                               direction=(tuple(bc.direction) if bc.direction
                                          else None),
                               pin_rigid=bc.pin_rigid)
    constraints = apply_bcs(mesh, h1, h2, bcs)
    loads = _build_loads(cfg, params)
    return mesh, h1, h2, params, constraints, loads


def _counterexample(cfg, h1, h2):
    from .analysis import counterexample_field

    try:
        f, fp, fpp = compile_profile(cfg.counterexample.profile)
    except ExpressionError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        return counterexample_field(h1, h2, f, fp, fpp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# tasks


def _task_energy(cfg, scene, artifacts):
    mesh, h1, h2, params, constraints, loads = scene
    try:
        u = interpolate_displacement(h1, h2,
                                     compile_scalar_field(cfg.fields.u1),
                                     compile_scalar_field(cfg.fields.u2),
                                     compile_scalar_field(cfg.fields.u3))
    except ExpressionError as exc:
        raise ConfigError(str(exc)) from exc
    br = total_energy(u, params, loads)
    return {"membrane": br.membrane, "bending": br.bending,
            "load_work": br.load_work, "total": br.total}


def _task_minimize(cfg, scene, artifacts):
    from .optimize import (MinimizeOptions, minimize_energy,
                           minimizing_sequence_diagnostics)

    mesh, h1, h2, params, constraints, loads = scene
    mc = cfg.minimize
    opts = MinimizeOptions(max_iterations=mc.max_iterations,
                           gradient_tolerance=mc.gradient_tolerance,
                           restarts=mc.restarts,
                           restart_amplitude=mc.restart_amplitude,
                           backtrack=mc.backtrack, armijo_c1=mc.armijo_c1,
                           divergence_ceiling=mc.divergence_ceiling,
                           compute_constants=mc.compute_constants,
                           seed=cfg.seed)
    start = None
    if mc.start_from == "counterexample":
        start = constraints.project(_counterexample(cfg, h1, h2))
    result = minimize_energy(h1, h2, constraints, params, loads, opts, start)
    keys, rows = result.trace.as_rows()
    artifacts["trace.csv"] = (keys, rows)
    if not result.converged and not result.suspected_unbounded \
            and result.status == "line_search_failed":
        raise NumericalError("line search failed before reaching tolerance")
    return {"status": result.status, "converged": result.converged,
            "suspected_unbounded": result.suspected_unbounded,
            "final_energy": result.final_energy,
            "restart_energies": result.restart_energies,
            "runs": result.runs,
            "iterations": len(result.trace.energy),
            "diagnostics": minimizing_sequence_diagnostics(result.trace)}


def _task_rigidity(cfg, scene, artifacts):
    from .rigidity import rigidity_verdict

    mesh, h1, h2, params, constraints, loads = scene
    report = rigidity_verdict(h1, h2, constraints, params,
                              flex_kwargs={"seed": cfg.seed,
                                           "tol": cfg.tolerances.flex})
    out = {"verdict": report.verdict, "mechanism": report.mechanism,
           "details": report.details}
    if report.flex is not None:
        out["flex"] = {"found": report.flex.found,
                       "residual": report.flex.residual,
                       "raw_residual": report.flex.raw_residual,
                       "restarts": report.flex.restarts}
    return out


def _task_identities(cfg, scene, artifacts):
    from .analysis import (bracket_identity_check, clamped_bracket_identity,
                           weighted_hessian_identity)
    from .spaces import ScalarField

    mesh, h1, h2, params, constraints, loads = scene
    z = ScalarField.constant(0.0)

    def interp(text):
        try:
            return h2.interpolate(compile_scalar_field(text))
        except ExpressionError as exc:
            raise ConfigError(str(exc)) from exc

    u = interp(cfg.fields.u1 if cfg.fields.u1 != "0" else "y1^2")
    v = interp(cfg.fields.u2 if cfg.fields.u2 != "0" else "y2^2")
    w = interp(cfg.fields.u3 if cfg.fields.u3 != "0" else "1")
    res = bracket_identity_check(h2, u, v, w)
    f = interp("y1*(1-y1)*y2*(1-y2)*(y1+2*y2)")
    g = interp("y1*(1-y1)*y2*(1-y2)*(1+2*y1-y2)")
    rm, rp, sign = clamped_bracket_identity(h2, f, g)
    fh = interp("sin(pi*y1)^2*sin(pi*y2)^2")
    lhs, rhs = weighted_hessian_identity(h2, fh)
    return {"bracket_identity_residual": res,
            "clamped_identity": {"residual_minus": rm, "residual_plus": rp,
                                 "sign": sign},
            "weighted_hessian": {"lhs": lhs, "rhs": rhs,
                                 "relative_residual": abs(lhs - rhs) / abs(lhs)
                                 if lhs else 0.0}}


def _task_counterexample(cfg, scene, artifacts):
    from .analysis import monge_ampere_residual
    from .rigidity import nonlinear_flex_search

    mesh, h1, h2, params, constraints, loads = scene
    u = _counterexample(cfg, h1, h2)
    strain_cf, det_cf = monge_ampere_residual(u)
    ud = u.copy()
    ud.closed_form = None
    strain_d, det_d = monge_ampere_residual(ud)
    flex = nonlinear_flex_search(h1, h2, constraints, params, seed=cfg.seed,
                                 tol=cfg.tolerances.flex)
    return {"closed_form": {"strain_rms": strain_cf, "det_rms": det_cf},
            "interpolant": {"strain_rms": strain_d, "det_rms": det_d},
            "flex_search": {"found": flex.found, "residual": flex.residual,
                            "raw_residual": flex.raw_residual}}


def _task_blowup(cfg, scene, artifacts):
    from .analysis import blowup_family

    mesh, h1, h2, params, constraints, loads = scene
    w = _counterexample(cfg, h1, h2)
    try:
        fam = blowup_family(w, params, cfg.counterexample.t_samples,
                            tol=cfg.tolerances.flex)
    except ValueError as exc:
        raise NumericalError(str(exc)) from exc
    artifacts["blowup_samples.csv"] = (("t", "energy"), fam.samples)
    return {"samples": fam.samples,
            "quadratic_fit": list(fam.quadratic_fit),
            "leading_coefficient": fam.leading_coefficient,
            "fit_residual": fam.fit_residual,
            "strain_residual": fam.strain_residual,
            "bending_norm_sq": fam.bending_norm_sq}


def _task_convex_weight(cfg, scene, artifacts):
    from .analysis import convex_weight

    mesh, h1, h2, params, constraints, loads = scene
    try:
        cw = convex_weight(mesh)
    except (DomainError, ValueError) as exc:
        raise NumericalError(str(exc)) from exc
    i, j = mesh.n1 // 2, mesh.n2 // 2
    center = float(cw.f_nodal[mesh.node_id(i, j)])
    interior = np.setdiff1d(np.arange((mesh.n1 + 1) * (mesh.n2 + 1)),
                            mesh.boundary_node_ids())
    return {"f_center": center,
            "f_interior_min": float(cw.f_nodal[interior].min()),
            "min_hessian_eigenvalue": cw.min_hessian_eigenvalue,
            "tested_points": cw.interior_points}


_TASKS = {"energy": _task_energy, "minimize": _task_minimize,
          "rigidity": _task_rigidity, "identities": _task_identities,
          "counterexample": _task_counterexample, "blowup": _task_blowup,
          "convex_weight": _task_convex_weight}


def run(cfg):
    """Execute a validated RunConfig.  Returns (report, manifest, artifacts).

    artifacts maps file names to (header, rows) CSV payloads.  Raises
    ConfigError for invalid scenarios and NumericalError for numerical
    failures.
    """
    t0 = time.time()
    try:
        scene = _build_scene(cfg)
    except (DomainError, MeshError, ValueError) as exc:
        if isinstance(exc, (ConfigError, NumericalError)):
            raise
        raise ConfigError(str(exc)) from exc
    t_setup = time.time() - t0
    artifacts = {}
    t1 = time.time()
    try:
        body = _TASKS[cfg.task](cfg, scene, artifacts)
    except (ConfigError, NumericalError):
        raise
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"linear algebra failure: {exc}") from exc
    t_task = time.time() - t1
    report = {"schema_version": SCHEMA_VERSION, "task": cfg.task, **body}
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": json.loads(cfg.model_dump_json()),
        "versions": {"platelab": __version__,
                     "numpy": np.__version__,
                     "python": platform.python_version()},
        "timings": {"setup_s": t_setup, "task_s": t_task},
    }
    return report, manifest, artifacts


def write_artifacts(out_dir, report, manifest, artifacts):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, default=float)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=float)
    for name, (header, rows) in artifacts.items():
        with open(out / name, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            wr.writerows(rows)
