from __future__ import annotations

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .core_model import Circulations, symmetric_invariants
from .equilibria import Equilibrium, Stability, all_equilibria, reduced_jacobian
from .errors import ConfigError, NumericalError, SingularityError
from .reduction import (
    LogForm,
    PhaseSurface,
    ReducedEvent,
    ReducedState,
    SingularPoint,
    classify_surface,
    integrate_reduced,
    log_forms,
    original_pair,
    project_to_quadric,
    reduced_hamiltonian,
    reduced_vector_field,
    reduction_order,
    sheet_sign,
    singularities,
)

logger = logging.getLogger(__name__)

Vec = NDArray[np.float64]


class OrbitKind(str, Enum):
    PERIODIC = "Periodic"
    HETEROCLINIC = "Heteroclinic"
    HOMOCLINIC = "Homoclinic"
    RAY = "Ray"
    UNBOUNDED = "Unbounded"


class Projection(str, Enum):
    SPHERE_FRONT_BACK = "SphereFrontBack"
    PLANE_XY = "PlaneXY"


@dataclass(slots=True)
class PortraitSpec:
    circulations: Circulations
    theta: float
    orbit_count: int = 12
    separatrices: bool = True
    eps: float = 1e-7
    escape: float = 1e3
    tol: float = 1e-10
    max_workers: int = 4
    projection: Projection | None = None
    zoom: float = 1.0

    def __post_init__(self) -> None:
        if self.orbit_count < 0:
            raise ConfigError("orbit_count должен быть неотрицательным")
        if not 0 < self.eps < 1e-2:
            raise ConfigError("eps должен лежать в (0, 1e-2)")
        if self.zoom <= 0:
            raise ConfigError("zoom должен быть положительным")

    @classmethod
    def from_options(cls, circulations: Circulations, theta: float, options: dict[str, Any]) -> PortraitSpec:
        known = {"orbit_count", "separatrices", "eps", "escape", "tol", "max_workers", "projection", "zoom"}
        unknown = set(options) - known
        if unknown:
            raise ConfigError(f"Неизвестные параметры портрета: {sorted(unknown)}")
        opts = dict(options)
        if "projection" in opts and opts["projection"] is not None:
            opts["projection"] = Projection(opts["projection"])
        return cls(circulations=circulations, theta=theta, **opts)


@dataclass(frozen=True, slots=True)
class OrbitCurve:
    kind: OrbitKind
    samples: Vec
    h_level: float
    source: str
    target: str | None = None
    direction: str = ""


@dataclass(slots=True)
class Portrait:
    spec: PortraitSpec
    surface: PhaseSurface
    equilibria: list[Equilibrium]
    singularities: list[SingularPoint]
    curves: list[OrbitCurve] = field(default_factory=list)
    singular_line: bool = False

    @property
    def projection(self) -> Projection:
        if self.spec.projection is not None:
            return self.spec.projection
        return Projection.SPHERE_FRONT_BACK if self.surface is PhaseSurface.SPHEROID else Projection.PLANE_XY

    def counts(self) -> dict[str, int]:
        unstable = [c for c in self.curves if c.direction == "unstable"]
        return {
            "equilibria": len(self.equilibria),
            "singularities": len(self.singularities),
            "heteroclinic": sum(c.kind is OrbitKind.HETEROCLINIC for c in unstable),
            "homoclinic": sum(c.kind is OrbitKind.HOMOCLINIC for c in unstable),
            "periodic_families": len({c.source for c in self.curves if c.kind is OrbitKind.PERIODIC}),
        }


@dataclass(frozen=True, slots=True)
class _Context:
    base: ReducedState
    scale: float
    forms: tuple[LogForm[float], LogForm[float], LogForm[float]]
    spec: PortraitSpec


def _special_points(eqs: list[Equilibrium], sings: list[SingularPoint]) -> dict[str, Vec]:
    pts = {e.label: e.state.as_array() for e in eqs}
    for sp in sings:
        pts[sp.label] = np.array([sp.X, 0.0, sp.Z])
    return pts


_SINGULAR_EVENTS = {"S12": (1, 2), "S13": (1, 3), "S23": (2, 3)}


def _singular_label(event: str, ctx: _Context) -> str:
    """Имя события в порядке редукции → метка Sᵢⱼ в исходных номерах."""
    i, j = original_pair(_SINGULAR_EVENTS[event], ctx.base.labels)
    return f"S{i}{j}"


def _h_or_nan(s: ReducedState) -> float:
    try:
        return reduced_hamiltonian(s)
    except SingularityError:
        return math.nan


def _escape_event(ctx: _Context) -> ReducedEvent:
    radius2 = (ctx.spec.escape * ctx.scale) ** 2

    def event(_t: float, y: Vec) -> float:
        return float(y @ y) - radius2

    return ("escape", event, 1)


def _ball_event(name: str, center: Vec, radius: float) -> ReducedEvent:
    def event(_t: float, y: Vec) -> float:
        d = y - center
        return float(d @ d) - radius * radius

    return (name, event, -1)


# --- Сепаратрисы ---


def _saddle_directions(e: Equilibrium) -> tuple[Vec, Vec, float]:
    m = reduced_jacobian(e.state)
    w, v = np.linalg.eig(m)
    ku = int(np.argmax(w.real))
    ks = int(np.argmin(w.real))
    vu = np.real(v[:, ku])
    vs = np.real(v[:, ks])
    return vu / np.linalg.norm(vu), vs / np.linalg.norm(vs), float(abs(w[ku].real))


def separatrices(e: Equilibrium, saddles: list[Equilibrium], ctx: _Context) -> list[tuple[str, Callable[[], OrbitCurve]]]:
    """Четыре ветви седла: неустойчивые вперёд по времени, устойчивые — назад."""
    vu, vs, lam = _saddle_directions(e)
    h_src = reduced_hamiltonian(e.state)
    delta = 1e-3 * ctx.scale
    targets = [
        s for s in saddles if abs(reduced_hamiltonian(s.state) - h_src) <= 1e-7 * (1 + abs(h_src))
    ]
    events = [_ball_event(s.label, s.state.as_array(), delta) for s in targets]
    events.append(_escape_event(ctx))
    t_max = (2 * math.log(1 / ctx.spec.eps) + 200) / lam

    jobs = []
    for direction, vec, sign_t in (("unstable", vu, 1.0), ("stable", vs, -1.0)):
        for branch in (1.0, -1.0):
            start = project_to_quadric(e.state.moved(e.state.as_array() + branch * ctx.spec.eps * ctx.scale * vec))

            def job(start: ReducedState = start, direction: str = direction, sign_t: float = sign_t) -> OrbitCurve:
                return _trace_separatrix(e, start, direction, sign_t * t_max, events, targets, h_src, ctx)

            jobs.append((f"{e.label}:{direction}{'+' if branch > 0 else '-'}", job))
    return jobs


def _trace_separatrix(
    e: Equilibrium,
    start: ReducedState,
    direction: str,
    t_end: float,
    events: list[ReducedEvent],
    targets: list[Equilibrium],
    h_level: float,
    ctx: _Context,
) -> OrbitCurve:
    traj = integrate_reduced(start, (0.0, t_end), ctx.spec.tol, events=events)
    samples = np.vstack([e.state.as_array(), traj.states])
    hit = traj.meta.get("terminated_by")
    target: str | None = None
    if hit == "escape":
        kind = OrbitKind.UNBOUNDED
    elif hit in _SINGULAR_EVENTS:
        kind, target = OrbitKind.RAY, _singular_label(str(hit), ctx)
    elif hit is not None:
        target = str(hit)
        kind = OrbitKind.HOMOCLINIC if target == e.label else OrbitKind.HETEROCLINIC
        end = next(t.state.as_array() for t in targets if t.label == target)
        samples = np.vstack([samples, end])
    else:
        end = samples[-1]
        near = [(float(np.linalg.norm(end - t.state.as_array())), t.label) for t in targets]
        dist, label = min(near) if near else (math.inf, "")
        if dist <= 1e-2 * ctx.scale:
            target = label
            kind = OrbitKind.HOMOCLINIC if label == e.label else OrbitKind.HETEROCLINIC
        else:
            logger.warning("Сепаратриса %s (%s) не достигла седла за отведённое время", e.label, direction)
            kind = OrbitKind.UNBOUNDED
    if direction == "stable":
        samples = samples[::-1]
    return OrbitCurve(kind, samples, h_level, e.label, target, direction)


# --- Периодические орбиты ---


def _tangent_direction(source: Vec, toward: list[Vec], base: ReducedState) -> Vec:
    """Единичный касательный к поверхности вектор в source, направленный к первой подходящей точке из toward."""
    inv = symmetric_invariants(base.circulations)
    ratio = 4 * float(inv.gamma3) / float(inv.gamma1)
    normal = np.array([ratio * source[0], ratio * source[1], source[2]])
    size = float(np.linalg.norm(normal))
    n = normal / size if size > 0 else np.array([0.0, 0.0, 1.0])
    for p in toward:
        d = p - source
        d = d - float(d @ n) * n
        length = float(np.linalg.norm(d))
        if length > 1e-6 * float(np.linalg.norm(p - source)):
            return d / length
    # все точки на нормали (например, противоположный полюс)
    axis = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    d = np.cross(n, axis)
    return d / float(np.linalg.norm(d))


def _seed_points(source: Vec, direction: Vec, size: float, n: int, base: ReducedState) -> list[ReducedState]:
    """Геометрическая расстановка вдоль касательного направления с последующей проекцией на поверхность."""
    if n <= 0:
        return []
    lo, hi = 0.05, 0.6
    ts = [hi * (lo / hi) ** (k / (n - 1)) for k in range(n)] if n > 1 else [math.sqrt(lo * hi)]
    out = []
    for t in ts:
        out.append(project_to_quadric(base.moved(source + t * size * direction)))
    return out


def _trace_periodic(seed: ReducedState, source_label: str, family_size: float, ctx: _Context) -> OrbitCurve | None:
    v0 = np.array(reduced_vector_field(seed))
    speed = float(np.linalg.norm(v0))
    if speed == 0:
        return None
    n = v0 / speed
    p0 = seed.as_array()
    offset = 1e-6 * ctx.scale
    near = 0.5 * family_size

    def section(_t: float, y: Vec) -> float:
        return float((y - p0) @ n) + offset

    events: list[ReducedEvent] = [("section", section, 1), _escape_event(ctx)]
    t_left = 2000 * family_size / speed
    state = seed
    chunks: list[Vec] = []
    h_level = reduced_hamiltonian(seed)
    for _ in range(8):
        traj = integrate_reduced(state, (0.0, t_left), ctx.spec.tol, events=events)
        chunks.append(traj.states)
        hit = traj.meta.get("terminated_by")
        if hit == "section":
            end = np.asarray(traj.meta["event_state"])
            if float(np.linalg.norm(end - p0)) <= near:
                return OrbitCurve(OrbitKind.PERIODIC, np.vstack([*chunks, p0]), h_level, source_label)
            t_left -= float(traj.times[-1])
            state = seed.moved(end + 1e-9 * ctx.scale * n)
            continue
        if hit == "escape":
            return OrbitCurve(OrbitKind.UNBOUNDED, np.vstack(chunks), h_level, source_label)
        if hit in _SINGULAR_EVENTS:
            target = _singular_label(str(hit), ctx)
            return OrbitCurve(OrbitKind.RAY, np.vstack(chunks), h_level, source_label, target)
        break
    logger.debug("Орбита из %s не замкнулась", source_label)
    return None


def _periodic_jobs(
    eqs: list[Equilibrium], sings: list[SingularPoint], ctx: _Context
) -> list[tuple[str, Callable[[], OrbitCurve | None]]]:
    points = _special_points(eqs, sings)
    sources = [e.label for e in eqs if e.classification is Stability.CENTER]
    if ctx.base.Theta != 0:
        sources += [sp.label for sp in sings]
    if not sources or ctx.spec.orbit_count == 0:
        return []
    per_source = max(1, ctx.spec.orbit_count // len(sources))
    jobs: list[tuple[str, Callable[[], OrbitCurve | None]]] = []
    for label in sources:
        src = points[label]
        others = sorted(
            (float(np.linalg.norm(p - src)), name) for name, p in points.items() if name != label
        )
        others = [o for o in others if o[0] > 1e-9 * ctx.scale]
        dist = others[0][0] if others else ctx.scale
        direction = _tangent_direction(src, [points[name] for _, name in others], ctx.base)
        for k, seed in enumerate(_seed_points(src, direction, dist, per_source, ctx.base)):
            if not np.all(np.isfinite(seed.as_array())) or math.isnan(_h_or_nan(seed)):
                continue

            def job(seed: ReducedState = seed, label: str = label, dist: float = dist) -> OrbitCurve | None:
                return _trace_periodic(seed, label, dist, ctx)

            jobs.append((f"{label}:orbit{k}", job))
    return jobs


# --- Портрет ---


def _cone_singular_line(ctx: _Context) -> bool:
    if ctx.base.Theta != 0:
        return False
    for x in (-1.0, 1.0):
        p = project_to_quadric(ctx.base.moved((x * ctx.scale, 0.0, 0.0)))
        for f in ctx.forms:
            a = f.value(p.X, p.Z, p.Theta)
            mag = abs(f.ax * p.X) + abs(f.az * p.Z) + 1e-300
            if abs(a) <= 1e-12 * mag:
                return True
    return False


def sample_portrait(spec: PortraitSpec) -> Portrait:
    """
    Равновесия, допустимые сингулярности, сепаратрисы сёдел и периодические орбиты
    на поверхности уровня Θ. Кривые упорядочены детерминированно.
    """
    c = spec.circulations
    surface = classify_surface(c, spec.theta)
    ordered, labels = reduction_order(c)
    eqs = all_equilibria(c, spec.theta)
    sings = [sp for sp in singularities(c, spec.theta).values() if sp.admissible and not sp.at_infinity]
    if spec.theta == 0:
        sings = sings[:1]
    scale = abs(spec.theta) if spec.theta != 0 else 1.0
    base = ReducedState(0.0, 0.0, sheet_sign(ordered) * scale, spec.theta, ordered, labels)
    ctx = _Context(base=base, scale=scale, forms=log_forms(ordered.as_floats()), spec=spec)
    logger.info(
        "Портрет: %s, Θ=%g, равновесий %d, сингулярностей %d", surface.value, spec.theta, len(eqs), len(sings)
    )

    jobs: list[tuple[str, Callable[[], OrbitCurve | None]]] = []
    saddles = [e for e in eqs if e.classification is Stability.SADDLE]
    if spec.separatrices:
        for e in saddles:
            jobs.extend(separatrices(e, saddles, ctx))
    jobs.extend(_periodic_jobs(eqs, sings, ctx))

    results: dict[str, OrbitCurve] = {}
    with ThreadPoolExecutor(max_workers=max(1, spec.max_workers)) as executor:
        future_to_name = {executor.submit(job): name for name, job in jobs}
        for future in as_completed(future_to_name):
            name = future_to_name[future]
            try:
                curve = future.result()
            except NumericalError as e:
                logger.warning("Кривая %s пропущена: %s", name, e)
                continue
            if curve is not None:
                results[name] = curve

    curves = [results[name] for name in sorted(results)]
    return Portrait(
        spec=spec,
        surface=surface,
        equilibria=eqs,
        singularities=sings,
        curves=curves,
        singular_line=_cone_singular_line(ctx),
    )


def portrait_frame(portrait: Portrait) -> pd.DataFrame:
    """Все точки всех кривых в длинном формате для CSV."""
    frames = []
    for k, c in enumerate(portrait.curves):
        df = pd.DataFrame(c.samples, columns=["X", "Y", "Z"])
        df.insert(0, "curve", k)
        df.insert(1, "kind", c.kind.value)
        df.insert(2, "source", c.source)
        df.insert(3, "target", c.target or "")
        df["h"] = c.h_level
        frames.append(df)
    if not frames:
        return pd.DataFrame(columns=["curve", "kind", "source", "target", "X", "Y", "Z", "h"])
    return pd.concat(frames, ignore_index=True)


def portrait_summary(portrait: Portrait) -> dict[str, Any]:
    return {
        "circulations": [str(g) for g in portrait.spec.circulations.as_tuple()],
        "theta": portrait.spec.theta,
        "surface": portrait.surface.value,
        "projection": portrait.projection.value,
        "counts": portrait.counts(),
        "equilibria": [
            {
                "label": e.label,
                "kind": e.kind.value,
                "X": e.state.X,
                "Y": e.state.Y,
                "Z": e.state.Z,
                "stability": e.classification.value,
                "lambda2": e.lambda_squared,
            }
            for e in portrait.equilibria
        ],
        "singularities": [{"label": s.label, "X": s.X, "Z": s.Z} for s in portrait.singularities],
        "singular_line": portrait.singular_line,
    }
