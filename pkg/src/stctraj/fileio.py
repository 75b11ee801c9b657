"""Config and trajectory file formats.

Both formats are line-oriented text: `[section]` headers, `key value...`
rows, `#` comments to end of line.  Floats are serialized with repr, so
a parse -> serialize -> parse round trip reproduces the configuration
exactly.  Units are fixed by the format (meters, seconds, newtons,
kilograms, degrees for angles) and documented in FORMATS.md.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ControlSetParams, QuadModel, propagate_dense
from .harness import CampaignSpec
from .scenarios import (
    BeamSpec,
    BoundaryConditions,
    HoopSpec,
    NonconvexProblem,
    assemble_problem,
)
from .scvx import ConvergenceReport, ScvxConfig, Trajectory, default_config


class ConfigError(ValueError):
    """Malformed or invalid configuration; messages name key and line."""


class TrajectoryFormatError(ValueError):
    """Malformed trajectory file."""


_SECTION_NAMES = ("model", "control", "scenario", "boundary", "solver", "campaign")
_SECTION_RE = re.compile(r"^\[(\w+)\]$")


def _split_sections(text: str) -> dict[str, list[tuple[int, str, list[str]]]]:
    sections: dict[str, list[tuple[int, str, list[str]]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            name = m.group(1)
            if name not in _SECTION_NAMES:
                raise ConfigError(f"unknown section [{name}] at line {lineno}")
            if name in sections:
                raise ConfigError(f"duplicate section [{name}] at line {lineno}")
            sections[name] = []
            current = sections[name]
            continue
        if current is None:
            raise ConfigError(f"key outside any section at line {lineno}")
        key, *vals = line.split()
        current.append((lineno, key, vals))
    return sections


_REQUIRED = object()


class _Section:
    """One parsed section; tracks consumed keys so leftovers can be named."""

    def __init__(self, name: str, rows: list[tuple[int, str, list[str]]]):
        self.name = name
        self.rows = rows
        self.consumed: set[int] = set()

    def _matches(self, key: str):
        return [
            (i, lineno, vals)
            for i, (lineno, k, vals) in enumerate(self.rows)
            if k == key
        ]

    def take_all(self, key: str) -> list[tuple[int, list[str]]]:
        """All occurrences of a repeatable key, in file order."""
        out = []
        for i, lineno, vals in self._matches(key):
            self.consumed.add(i)
            out.append((lineno, vals))
        return out

    def take(self, key: str, default=_REQUIRED) -> tuple[int, list[str]] | None:
        """A single-occurrence key; None when absent and optional."""
        hits = self._matches(key)
        if not hits:
            if default is _REQUIRED:
                raise ConfigError(f"[{self.name}] is missing required key '{key}'")
            return None
        if len(hits) > 1:
            raise ConfigError(
                f"duplicate key '{key}' in [{self.name}] at line {hits[1][1]}"
            )
        i, lineno, vals = hits[0]
        self.consumed.add(i)
        return lineno, vals

    def finish(self):
        for i, (lineno, key, _) in enumerate(self.rows):
            if i not in self.consumed:
                raise ConfigError(
                    f"unknown key '{key}' in [{self.name}] at line {lineno}"
                )


def _scalar(section: str, key: str, hit, conv, what: str):
    lineno, vals = hit
    if len(vals) != 1:
        raise ConfigError(
            f"key '{key}' in [{section}] at line {lineno} takes one value"
        )
    try:
        return conv(vals[0])
    except ValueError:
        raise ConfigError(
            f"key '{key}' in [{section}] at line {lineno}: "
            f"'{vals[0]}' is not {what}"
        ) from None


def _float(section, key, hit) -> float:
    return _scalar(section, key, hit, float, "a number")


def _int(section, key, hit) -> int:
    return _scalar(section, key, hit, int, "an integer")


def _bool(section, key, hit) -> bool:
    lineno, vals = hit
    if len(vals) == 1 and vals[0] in ("true", "false"):
        return vals[0] == "true"
    raise ConfigError(
        f"key '{key}' in [{section}] at line {lineno} takes 'true' or 'false'"
    )


def _vector(section, key, hit, arity: int) -> tuple[float, ...]:
    lineno, vals = hit
    if len(vals) != arity:
        raise ConfigError(
            f"key '{key}' in [{section}] at line {lineno} takes {arity} numbers"
        )
    try:
        return tuple(float(v) for v in vals)
    except ValueError:
        raise ConfigError(
            f"key '{key}' in [{section}] at line {lineno} has a non-numeric entry"
        ) from None


@dataclass(frozen=True)
class ModelSection:
    mass: float = 0.35
    drag: float = 0.0
    gravity: float = 9.81
    dim: int = 3


@dataclass(frozen=True)
class ControlSection:
    thrust_min: float = 2.0
    thrust_max: float = 5.0
    tilt_max_deg: float = 45.0


@dataclass(frozen=True)
class HoopSection:
    center: tuple[float, float, float]
    normal: tuple[float, float, float]
    corridor_half_length: float
    corridor_radius: float
    guidance_radius: float = math.inf
    hoop_radius: float | None = None
    require_passage: bool = True


@dataclass(frozen=True)
class BeamSection:
    payload_length: float
    keepout_halfwidth: float
    obstacle_radius: float
    obstacles: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class BoundarySection:
    r_i: tuple[tuple[float, ...], ...]
    r_f: tuple[tuple[float, ...], ...]
    t_f: float
    v_max: float


@dataclass(frozen=True)
class SolverSection:
    k: int
    max_iters: int = 20
    tf_growth: float = 1.25
    max_tf_retries: int = 3
    solver_tol: float = 1e-9
    eps_tr: float | None = None
    eps_vc: float | None = None
    eps_feas: float | None = None
    w_vc: float | None = None
    w_tr: float | None = None


@dataclass(frozen=True)
class CampaignSection:
    scenarios: tuple[int, ...]
    k_list: tuple[int, ...] = (15, 20, 25, 30)
    cases_per_k: int = 100
    seed: int = 0
    dense_samples: int = 50
    resample_factor: int = 4


@dataclass(frozen=True)
class ConfigDoc:
    model: ModelSection | None = None
    control: ControlSection | None = None
    scenario: HoopSection | BeamSection | None = None
    boundary: BoundarySection | None = None
    solver: SolverSection | None = None
    campaign: CampaignSection | None = None

    @property
    def scenario_number(self) -> int | None:
        if isinstance(self.scenario, HoopSection):
            return 1
        if isinstance(self.scenario, BeamSection):
            return 2
        return None


def _parse_model(sec: _Section) -> ModelSection:
    out = ModelSection(
        mass=_float("model", "mass", sec.take("mass", None) or (0, ["0.35"])),
        drag=_float("model", "drag", sec.take("drag", None) or (0, ["0.0"])),
        gravity=_float(
            "model", "gravity", sec.take("gravity", None) or (0, ["9.81"])
        ),
        dim=_int("model", "dim", sec.take("dim", None) or (0, ["3"])),
    )
    sec.finish()
    if out.dim not in (2, 3):
        raise ConfigError("[model] dim must be 2 or 3")
    return out


def _parse_control(sec: _Section) -> ControlSection:
    out = ControlSection(
        thrust_min=_float(
            "control", "thrust_min", sec.take("thrust_min", None) or (0, ["2.0"])
        ),
        thrust_max=_float(
            "control", "thrust_max", sec.take("thrust_max", None) or (0, ["5.0"])
        ),
        tilt_max_deg=_float(
            "control", "tilt_max_deg",
            sec.take("tilt_max_deg", None) or (0, ["45.0"]),
        ),
    )
    sec.finish()
    return out


def _parse_scenario(sec: _Section) -> HoopSection | BeamSection:
    hit = sec.take("kind")
    lineno, vals = hit
    if len(vals) != 1 or vals[0] not in ("hoop", "beam"):
        raise ConfigError(
            f"key 'kind' in [scenario] at line {lineno} takes 'hoop' or 'beam'"
        )
    if vals[0] == "hoop":
        normal = np.array(_vector("scenario", "normal", sec.take("normal"), 3))
        norm = float(np.linalg.norm(normal))
        if norm == 0.0:
            raise ConfigError("[scenario] normal must be a nonzero vector")
        if abs(norm - 1.0) <= 1e-12:
            norm = 1.0  # keep already-unit vectors bit-stable across round trips
        hoop = HoopSection(
            center=_vector("scenario", "center", sec.take("center"), 3),
            normal=tuple(normal / norm),
            corridor_half_length=_float(
                "scenario", "corridor_half_length",
                sec.take("corridor_half_length"),
            ),
            corridor_radius=_float(
                "scenario", "corridor_radius", sec.take("corridor_radius")
            ),
            guidance_radius=_float(
                "scenario", "guidance_radius",
                sec.take("guidance_radius", None) or (0, ["inf"]),
            ),
            hoop_radius=(
                _float("scenario", "hoop_radius", h)
                if (h := sec.take("hoop_radius", None)) is not None
                else None
            ),
            require_passage=(
                _bool("scenario", "require_passage", h)
                if (h := sec.take("require_passage", None)) is not None
                else True
            ),
        )
        sec.finish()
        return hoop
    obstacles = tuple(
        _vector("scenario", "obstacle", h, 2) for h in sec.take_all("obstacle")
    )
    if not obstacles:
        raise ConfigError("[scenario] needs at least one 'obstacle' row")
    beam = BeamSection(
        payload_length=_float(
            "scenario", "payload_length", sec.take("payload_length")
        ),
        keepout_halfwidth=_float(
            "scenario", "keepout_halfwidth", sec.take("keepout_halfwidth")
        ),
        obstacle_radius=_float(
            "scenario", "obstacle_radius", sec.take("obstacle_radius")
        ),
        obstacles=obstacles,
    )
    sec.finish()
    return beam


def _parse_boundary(sec: _Section, dim: int) -> BoundarySection:
    r_i = tuple(_vector("boundary", "r_i", h, dim) for h in sec.take_all("r_i"))
    r_f = tuple(_vector("boundary", "r_f", h, dim) for h in sec.take_all("r_f"))
    if not r_i or not r_f:
        raise ConfigError("[boundary] needs r_i and r_f rows")
    if len(r_i) != len(r_f):
        raise ConfigError("[boundary] needs matching r_i and r_f row counts")
    out = BoundarySection(
        r_i=r_i,
        r_f=r_f,
        t_f=_float("boundary", "t_f", sec.take("t_f")),
        v_max=_float("boundary", "v_max", sec.take("v_max")),
    )
    sec.finish()
    return out


def _parse_solver(sec: _Section) -> SolverSection:
    def opt_float(key):
        h = sec.take(key, None)
        return None if h is None else _float("solver", key, h)

    out = SolverSection(
        k=_int("solver", "k", sec.take("k")),
        max_iters=_int(
            "solver", "max_iters", sec.take("max_iters", None) or (0, ["20"])
        ),
        tf_growth=_float(
            "solver", "tf_growth", sec.take("tf_growth", None) or (0, ["1.25"])
        ),
        max_tf_retries=_int(
            "solver", "max_tf_retries",
            sec.take("max_tf_retries", None) or (0, ["3"]),
        ),
        solver_tol=_float(
            "solver", "solver_tol", sec.take("solver_tol", None) or (0, ["1e-8"])
        ),
        eps_tr=opt_float("eps_tr"),
        eps_vc=opt_float("eps_vc"),
        eps_feas=opt_float("eps_feas"),
        w_vc=opt_float("w_vc"),
        w_tr=opt_float("w_tr"),
    )
    sec.finish()
    return out


def _parse_campaign(sec: _Section) -> CampaignSection:
    lineno, vals = sec.take("scenario")
    try:
        scenarios = tuple(int(v) for v in vals)
    except ValueError:
        raise ConfigError(
            f"key 'scenario' in [campaign] at line {lineno} takes integers"
        ) from None
    if not scenarios or any(s not in (1, 2) for s in scenarios):
        raise ConfigError(
            f"key 'scenario' in [campaign] at line {lineno} takes values 1 and/or 2"
        )
    k_hit = sec.take("k_list", None)
    if k_hit is None:
        k_list = (15, 20, 25, 30)
    else:
        lineno, vals = k_hit
        try:
            k_list = tuple(int(v) for v in vals)
        except ValueError:
            raise ConfigError(
                f"key 'k_list' in [campaign] at line {lineno} takes integers"
            ) from None
        if not k_list:
            raise ConfigError(
                f"key 'k_list' in [campaign] at line {lineno} needs a value"
            )
    out = CampaignSection(
        scenarios=scenarios,
        k_list=k_list,
        cases_per_k=_int(
            "campaign", "cases_per_k", sec.take("cases_per_k", None) or (0, ["100"])
        ),
        seed=_int("campaign", "seed", sec.take("seed", None) or (0, ["0"])),
        dense_samples=_int(
            "campaign", "dense_samples",
            sec.take("dense_samples", None) or (0, ["50"]),
        ),
        resample_factor=_int(
            "campaign", "resample_factor",
            sec.take("resample_factor", None) or (0, ["4"]),
        ),
    )
    sec.finish()
    return out


def parse_config(text: str) -> ConfigDoc:
    """Parse a config document; unknown sections/keys raise ConfigError."""
    raw = _split_sections(text)
    model = _parse_model(_Section("model", raw["model"])) if "model" in raw else None
    control = (
        _parse_control(_Section("control", raw["control"]))
        if "control" in raw
        else None
    )
    scenario = (
        _parse_scenario(_Section("scenario", raw["scenario"]))
        if "scenario" in raw
        else None
    )
    boundary = None
    if "boundary" in raw:
        dim = model.dim if model is not None else 3
        boundary = _parse_boundary(_Section("boundary", raw["boundary"]), dim)
    solver = (
        _parse_solver(_Section("solver", raw["solver"])) if "solver" in raw else None
    )
    campaign = (
        _parse_campaign(_Section("campaign", raw["campaign"]))
        if "campaign" in raw
        else None
    )
    return ConfigDoc(
        model=model, control=control, scenario=scenario,
        boundary=boundary, solver=solver, campaign=campaign,
    )


def load_config(path: str) -> ConfigDoc:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_config(doc: ConfigDoc) -> str:
    """Canonical text for a configuration; parses back to an equal doc."""
    lines: list[str] = []
    if doc.model is not None:
        m = doc.model
        lines += ["[model]", f"mass {_fmt(m.mass)}", f"drag {_fmt(m.drag)}",
                  f"gravity {_fmt(m.gravity)}", f"dim {m.dim}", ""]
    if doc.control is not None:
        c = doc.control
        lines += ["[control]", f"thrust_min {_fmt(c.thrust_min)}",
                  f"thrust_max {_fmt(c.thrust_max)}",
                  f"tilt_max_deg {_fmt(c.tilt_max_deg)}", ""]
    if doc.scenario is not None:
        lines.append("[scenario]")
        s = doc.scenario
        if isinstance(s, HoopSection):
            lines += [
                "kind hoop",
                "center " + " ".join(_fmt(v) for v in s.center),
                "normal " + " ".join(_fmt(v) for v in s.normal),
                f"corridor_half_length {_fmt(s.corridor_half_length)}",
                f"corridor_radius {_fmt(s.corridor_radius)}",
                f"guidance_radius {_fmt(s.guidance_radius)}",
            ]
            if s.hoop_radius is not None:
                lines.append(f"hoop_radius {_fmt(s.hoop_radius)}")
            lines.append(
                f"require_passage {'true' if s.require_passage else 'false'}"
            )
        else:
            lines += [
                "kind beam",
                f"payload_length {_fmt(s.payload_length)}",
                f"keepout_halfwidth {_fmt(s.keepout_halfwidth)}",
                f"obstacle_radius {_fmt(s.obstacle_radius)}",
            ]
            lines += [
                "obstacle " + " ".join(_fmt(v) for v in obs) for obs in s.obstacles
            ]
        lines.append("")
    if doc.boundary is not None:
        b = doc.boundary
        lines.append("[boundary]")
        lines += ["r_i " + " ".join(_fmt(v) for v in row) for row in b.r_i]
        lines += ["r_f " + " ".join(_fmt(v) for v in row) for row in b.r_f]
        lines += [f"t_f {_fmt(b.t_f)}", f"v_max {_fmt(b.v_max)}", ""]
    if doc.solver is not None:
        s = doc.solver
        lines += ["[solver]", f"k {s.k}", f"max_iters {s.max_iters}",
                  f"tf_growth {_fmt(s.tf_growth)}",
                  f"max_tf_retries {s.max_tf_retries}",
                  f"solver_tol {_fmt(s.solver_tol)}"]
        for key in ("eps_tr", "eps_vc", "eps_feas", "w_vc", "w_tr"):
            val = getattr(s, key)
            if val is not None:
                lines.append(f"{key} {_fmt(val)}")
        lines.append("")
    if doc.campaign is not None:
        c = doc.campaign
        lines += [
            "[campaign]",
            "scenario " + " ".join(str(s) for s in c.scenarios),
            "k_list " + " ".join(str(k) for k in c.k_list),
            f"cases_per_k {c.cases_per_k}",
            f"seed {c.seed}",
            f"dense_samples {c.dense_samples}",
            f"resample_factor {c.resample_factor}",
            "",
        ]
    return "\n".join(lines)


def build_problem(doc: ConfigDoc) -> NonconvexProblem:
    """Bind a solve configuration into a problem, with semantic checks.

    [model] and [control] fall back to the benchmark vehicle when absent;
    scenario, boundary, and solver sections are required.
    """
    for name in ("scenario", "boundary", "solver"):
        if getattr(doc, name) is None:
            raise ConfigError(f"solve configuration needs a [{name}] section")
    m = doc.model if doc.model is not None else ModelSection()
    ctl = doc.control if doc.control is not None else ControlSection()
    model = QuadModel(m=m.mass, k_d=m.drag, g=m.gravity, spatial_dim=m.dim)
    control = ControlSetParams(
        T_min=ctl.thrust_min,
        T_max=ctl.thrust_max,
        theta_max=math.radians(ctl.tilt_max_deg),
    )
    b = doc.boundary
    try:
        bcs = BoundaryConditions(
            r_i=np.array(b.r_i), r_f=np.array(b.r_f), t_f=b.t_f, v_max=b.v_max
        )
    except ValueError as e:
        raise ConfigError(f"[boundary] {e}") from None
    s = doc.scenario
    if isinstance(s, HoopSection):
        if m.dim != 3:
            raise ConfigError("the hoop scenario needs [model] dim 3")
        if len(b.r_i) != 1:
            raise ConfigError("the hoop scenario takes one vehicle")
        try:
            spec = HoopSpec(
                center=np.array(s.center),
                normal=np.array(s.normal),
                l_c=s.corridor_half_length,
                rho_c=s.corridor_radius,
                rho_g=s.guidance_radius,
                rho_h=s.hoop_radius,
                require_passage=s.require_passage,
            )
        except ValueError as e:
            raise ConfigError(f"[scenario] {e}") from None
        scenario = 1
    else:
        if m.dim != 2:
            raise ConfigError("the beam scenario needs [model] dim 2")
        if len(b.r_i) != 2:
            raise ConfigError("the beam scenario takes two vehicles")
        try:
            spec = BeamSpec(
                l_o=s.payload_length,
                w_o=s.keepout_halfwidth,
                obstacles=np.array(s.obstacles),
                R_o=s.obstacle_radius,
            )
        except ValueError as e:
            raise ConfigError(f"[scenario] {e}") from None
        for label, rows in (("initial", b.r_i), ("final", b.r_f)):
            length = float(np.linalg.norm(np.array(rows[0]) - np.array(rows[1])))
            if abs(length - s.payload_length) > 1e-9:
                raise ConfigError(
                    f"{label} formation is infeasible for the rigid payload: "
                    f"vehicle spacing {length!r} must equal payload_length "
                    f"{_fmt(s.payload_length)}"
                )
        scenario = 2
    try:
        control.validate_against(model)
        return assemble_problem(scenario, spec, bcs, model, control, doc.solver.k)
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None


def build_scvx_config(doc: ConfigDoc, problem: NonconvexProblem) -> ScvxConfig:
    """Scenario defaults overridden by whatever the [solver] section sets."""
    s = doc.solver
    base = default_config(problem)
    w_vc = base.W_vc if s.w_vc is None else s.w_vc * np.eye(problem.n_x)
    if s.w_tr is None:
        w_tr = base.W_tr
    else:
        # keep the scenario's sparsity pattern, swap the magnitude
        scale = s.w_tr / np.max(base.W_tr)
        w_tr = scale * base.W_tr
    return ScvxConfig(
        W_vc=w_vc,
        W_tr=w_tr,
        eps_tr=base.eps_tr if s.eps_tr is None else s.eps_tr,
        eps_vc=base.eps_vc if s.eps_vc is None else s.eps_vc,
        eps_feas=base.eps_feas if s.eps_feas is None else s.eps_feas,
        max_iters=s.max_iters,
        tf_growth=s.tf_growth,
        max_tf_retries=s.max_tf_retries,
        solver_tol=s.solver_tol,
    )


def build_campaign_specs(doc: ConfigDoc, seed: int | None = None) -> tuple[CampaignSpec, ...]:
    """One CampaignSpec per scenario listed in the [campaign] section."""
    if doc.campaign is None:
        raise ConfigError("campaign configuration needs a [campaign] section")
    c = doc.campaign
    try:
        return tuple(
            CampaignSpec(
                scenario=s,
                K_list=c.k_list,
                cases_per_K=c.cases_per_k,
                seed=c.seed if seed is None else seed,
                dense_samples=c.dense_samples,
                resample_factor=c.resample_factor,
            )
            for s in c.scenarios
        )
    except ValueError as e:
        raise ConfigError(f"[campaign] {e}") from None


def write_trajectory(
    path: str,
    traj: Trajectory,
    report: ConvergenceReport,
    model: QuadModel | None = None,
    dense_samples: int = 0,
) -> None:
    """Write the trajectory file: header, node records, optional dense track.

    Node records carry, per node: time, stacked state, stacked control,
    thrust bounds, and constraint slacks.  The dense track (positions
    only) is for plotting and needs the dynamics model.
    """
    n_veh = traj.gamma.shape[1]
    dim = traj.u.shape[1] // n_veh
    n_alpha = traj.alpha.shape[1]
    lines = [
        "trajectory v1",
        f"scenario {traj.scenario}",
        f"K {traj.K}",
        f"t_f {_fmt(traj.t_f)}",
        f"vehicles {n_veh}",
        f"dim {dim}",
        f"slacks {n_alpha}",
        f"converged {'true' if traj.converged else 'false'}",
        f"iterations {report.iteration_count}",
        f"retries {report.retries}",
        f"fuel {_fmt(traj.fuel)}",
        "# node columns: t, state (position then velocity per vehicle),",
        "# control per vehicle, thrust magnitude per vehicle, slacks",
    ]
    for k in range(traj.K):
        row = [traj.times[k], *traj.x[k], *traj.u[k], *traj.gamma[k], *traj.alpha[k]]
        lines.append("node " + " ".join(_fmt(v) for v in row))
    if dense_samples > 0:
        if model is None:
            raise ValueError("a dense track needs the dynamics model")
        lines.append(f"dense_samples {dense_samples}")
        dt = traj.dt
        for k in range(traj.K - 1):
            pts = []
            for v in range(n_veh):
                sx = slice(v * 2 * dim, v * 2 * dim + 2 * dim)
                su = slice(v * dim, (v + 1) * dim)
                xs = propagate_dense(
                    model, traj.x[k, sx], traj.u[k, su], traj.u[k + 1, su],
                    dt, dense_samples,
                )
                pts.append(xs[:, :dim])
            ts = traj.times[k] + np.linspace(0.0, dt, dense_samples)
            for i in range(dense_samples):
                row = [ts[i]] + [c for p in pts for c in p[i]]
                lines.append("dense " + " ".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory(path: str) -> tuple[Trajectory, dict, np.ndarray | None]:
    """Read a trajectory file back: (trajectory, header dict, dense track).

    Validates the file invariants: the node count matches K and node
    times increase strictly.
    """
    header: dict = {}
    nodes: list[list[float]] = []
    dense: list[list[float]] = []
    int_keys = {"scenario", "K", "vehicles", "dim", "slacks", "iterations",
                "retries", "dense_samples"}
    float_keys = {"t_f", "fuel"}
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != "trajectory v1":
            raise TrajectoryFormatError("not a trajectory file")
        for lineno, raw in enumerate(fh, start=2):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, *vals = line.split()
            known = key in int_keys or key in float_keys
            if not known and key not in ("node", "dense", "converged"):
                raise TrajectoryFormatError(
                    f"unknown record '{key}' at line {lineno}"
                )
            try:
                if key == "node":
                    nodes.append([float(v) for v in vals])
                elif key == "dense":
                    dense.append([float(v) for v in vals])
                elif key in int_keys:
                    header[key] = int(vals[0])
                elif key in float_keys:
                    header[key] = float(vals[0])
                else:
                    header[key] = vals[0] == "true"
            except (ValueError, IndexError):
                raise TrajectoryFormatError(
                    f"malformed record at line {lineno}"
                ) from None
    for key in ("scenario", "K", "t_f", "vehicles", "dim", "slacks", "converged"):
        if key not in header:
            raise TrajectoryFormatError(f"missing header record '{key}'")
    K, n_veh, dim = header["K"], header["vehicles"], header["dim"]
    n_alpha = header["slacks"]
    if len(nodes) != K:
        raise TrajectoryFormatError(
            f"node count {len(nodes)} does not match K {K}"
        )
    width = 1 + 3 * dim * n_veh + n_veh + n_alpha
    if any(len(row) != width for row in nodes):
        raise TrajectoryFormatError("node record width does not match header")
    arr = np.array(nodes)
    times = arr[:, 0]
    if np.any(np.diff(times) <= 0.0):
        raise TrajectoryFormatError("node times must increase strictly")
    n_x = 2 * dim * n_veh
    n_u = dim * n_veh
    traj = Trajectory(
        scenario=header["scenario"],
        K=K,
        t_f=header["t_f"],
        times=times,
        x=arr[:, 1:1 + n_x],
        u=arr[:, 1 + n_x:1 + n_x + n_u],
        gamma=arr[:, 1 + n_x + n_u:1 + n_x + n_u + n_veh],
        alpha=arr[:, 1 + n_x + n_u + n_veh:],
        fuel=header.get("fuel", math.nan),
        converged=header["converged"],
    )
    dense_arr = np.array(dense) if dense else None
    return traj, header, dense_arr
