from __future__ import annotations

import cmath
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.integrate import solve_ivp

from .core_model import Trajectory, VortexConfiguration, vortex_velocities
from .equilibria import Stability
from .errors import ConfigError, IntegrationError, PreconditionError, SingularityError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class DipoleCanonicalState:
    Q1: float
    Q2: float
    P1: float
    P2: float


@dataclass(frozen=True, slots=True)
class ZeroCircReducedState:
    """ζ = X + iY — относительная координата пары (1, 2) в калибровке w = −1."""

    X: float
    Y: float
    Gamma1: float
    Gamma2: float
    degenerate: bool = False


@dataclass(frozen=True, slots=True)
class GaugeRecord:
    rotation: float
    scale: float
    translation: complex


@dataclass(frozen=True, slots=True)
class ZeroEquilibrium:
    X: float
    Y: float
    classification: Stability
    hessian_det: float


# --- Диполь ---


def dipole_canonical(cfg: VortexConfiguration) -> DipoleCanonicalState:
    """Q — середина пары, (P₁, P₂) = (y₁ − y₂, x₂ − x₁)."""
    if cfg.n != 2:
        raise ConfigError(f"Диполь требует двух вихрей, получено {cfg.n}")
    g1, g2 = cfg.circulations
    if g1 + g2 != 0:
        raise PreconditionError("Диполь требует Γ₁ = −Γ₂")
    z1, z2 = cfg.positions
    mid = (z1 + z2) / 2
    return DipoleCanonicalState(mid.real, mid.imag, z1.imag - z2.imag, z2.real - z1.real)


def dipole_velocity(state: DipoleCanonicalState, Gamma1: float) -> tuple[float, float]:
    """Q̇ = Γ₁·P/|P|²; P сохраняется."""
    p2 = state.P1**2 + state.P2**2
    if p2 == 0:
        raise SingularityError((1, 2))
    return Gamma1 * state.P1 / p2, Gamma1 * state.P2 / p2


# --- Редукция γ₁ = 0 ---


def _check_zero_total(g: NDArray[np.float64]) -> None:
    if abs(float(np.sum(g))) > 1e-14 * float(np.sum(np.abs(g))):
        raise PreconditionError(f"Редукция требует γ₁ = 0, получено γ₁ = {float(np.sum(g)):.3e}")


def to_zero_reduced(cfg: VortexConfiguration) -> tuple[ZeroCircReducedState, GaugeRecord]:
    """
    z̃₁ = z₁ − z₂, z̃₂ = (Γ₁z₁ + Γ₂z₂)/(Γ₁+Γ₂), w = z̃₂ − z₃ = M/(Γ₁+Γ₂).
    Поворот и масштаб приводят w к −1: ζ = z̃₁·e^{−iα}/|w|.
    При w = 0 (M = 0) состояние вырождено и ζ = z̃₁.
    """
    if cfg.n != 3:
        raise ConfigError(f"Редукция определена для трёх вихрей, получено {cfg.n}")
    g = cfg.circulations
    _check_zero_total(g)
    g1, g2, _ = (float(x) for x in g)
    z1, z2, z3 = (complex(z) for z in cfg.positions)
    G = g1 + g2
    zt1 = z1 - z2
    zt2 = (g1 * z1 + g2 * z2) / G
    w = zt2 - z3
    mid = (zt2 + z3) / 2
    if abs(w) <= 1e-12 * max(abs(zt1), 1e-300):
        logger.info("M = 0: вырожденный случай, калибровка не применяется")
        return ZeroCircReducedState(zt1.real, zt1.imag, g1, g2, degenerate=True), GaugeRecord(0.0, 1.0, mid)
    s = abs(w)
    alpha = cmath.phase(-w / s)
    zeta = zt1 * cmath.exp(-1j * alpha) / s
    return ZeroCircReducedState(zeta.real, zeta.imag, g1, g2), GaugeRecord(alpha, s, mid)


def reconstruct_zero(state: ZeroCircReducedState, gauge: GaugeRecord, Gamma3: float | None = None) -> VortexConfiguration:
    g1, g2 = state.Gamma1, state.Gamma2
    G = g1 + g2
    g3 = -G if Gamma3 is None else Gamma3
    e = cmath.exp(1j * gauge.rotation)
    zt1 = gauge.scale * e * complex(state.X, state.Y)
    w = 0j if state.degenerate else -gauge.scale * e
    zt2 = gauge.translation + w / 2
    z3 = gauge.translation - w / 2
    return VortexConfiguration.of([zt2 + g2 * zt1 / G, zt2 - g1 * zt1 / G, z3], [g1, g2, g3])


def zero_singularities(Gamma1: float, Gamma2: float) -> dict[str, float]:
    """X-координаты Sᵢⱼ на оси Y = 0."""
    return {"S12": 0.0, "S13": 1 + Gamma1 / Gamma2, "S23": -1 - Gamma2 / Gamma1}


def _terms(Gamma1: float, Gamma2: float) -> list[tuple[tuple[int, int], float, complex]]:
    """h = Σ wₖ·log|ζ − ζₖ|² + const: (пара, wₖ, ζₖ)."""
    G = Gamma1 + Gamma2
    return [
        ((1, 2), -Gamma1 * Gamma2 / 2, 0j),
        ((1, 3), G * Gamma1 / 2, complex(G / Gamma2)),
        ((2, 3), G * Gamma2 / 2, complex(-G / Gamma1)),
    ]


def _offsets(X: float, Y: float, Gamma1: float, Gamma2: float) -> list[tuple[float, complex, float]]:
    out = []
    for pair, w, center in _terms(Gamma1, Gamma2):
        d = complex(X, Y) - center
        rho2 = abs(d) ** 2
        if rho2 == 0:
            raise SingularityError(pair)
        out.append((w, d, rho2))
    return out


def h_zero(X: float, Y: float, Gamma1: float, Gamma2: float) -> float:
    """
    h = −(Γ₁Γ₂/2)log(X²+Y²) + (GΓ₁/2)log((Γ₂(X−1) − Γ₁)² + Γ₂²Y²)
        + (GΓ₂/2)log((Γ₂ + Γ₁(X+1))² + Γ₁²Y²),  G = Γ₁+Γ₂.
    """
    G = Gamma1 + Gamma2
    r12 = X * X + Y * Y
    r13 = (Gamma2 * (X - 1) - Gamma1) ** 2 + Gamma2**2 * Y * Y
    r23 = (Gamma2 + Gamma1 * (X + 1)) ** 2 + Gamma1**2 * Y * Y
    for pair, r in (((1, 2), r12), ((1, 3), r13), ((2, 3), r23)):
        if r == 0:
            raise SingularityError(pair)
    return (
        -Gamma1 * Gamma2 / 2 * math.log(r12)
        + G * Gamma1 / 2 * math.log(r13)
        + G * Gamma2 / 2 * math.log(r23)
    )


def zero_gradient(X: float, Y: float, Gamma1: float, Gamma2: float) -> tuple[float, float]:
    gx = gy = 0.0
    for w, d, rho2 in _offsets(X, Y, Gamma1, Gamma2):
        gx += 2 * w * d.real / rho2
        gy += 2 * w * d.imag / rho2
    return gx, gy


def zero_hessian(X: float, Y: float, Gamma1: float, Gamma2: float) -> NDArray[np.float64]:
    out = np.zeros((2, 2))
    for w, d, rho2 in _offsets(X, Y, Gamma1, Gamma2):
        dx, dy = d.real, d.imag
        out += 2 * w / rho2**2 * np.array([[rho2 - 2 * dx * dx, -2 * dx * dy], [-2 * dx * dy, rho2 - 2 * dy * dy]])
    return out


def h_degenerate(X: float, Y: float, Gamma1: float, Gamma2: float) -> float:
    """M = 0: h = ((Γ₁² + Γ₁Γ₂ + Γ₂²)/2)·log(X² + Y²)."""
    r2 = X * X + Y * Y
    if r2 == 0:
        raise SingularityError((1, 2))
    return (Gamma1**2 + Gamma1 * Gamma2 + Gamma2**2) / 2 * math.log(r2)


def _degenerate_gradient(X: float, Y: float, Gamma1: float, Gamma2: float) -> tuple[float, float]:
    r2 = X * X + Y * Y
    if r2 == 0:
        raise SingularityError((1, 2))
    k = Gamma1**2 + Gamma1 * Gamma2 + Gamma2**2
    return k * X / r2, k * Y / r2


# --- Скобка и поле ---


def _pushforward_ratio(cfg: VortexConfiguration) -> float:
    """c из ζ̇·s² = c·(h_Y − i·h_X) для одной конфигурации с известными скоростями."""
    state, gauge = to_zero_reduced(cfg)
    v = vortex_velocities(cfg)
    zeta_dot = (v[0] - v[1]) * cmath.exp(-1j * gauge.rotation) / gauge.scale
    gx, gy = zero_gradient(state.X, state.Y, state.Gamma1, state.Gamma2)
    rhs = complex(gy, -gx)
    return (zeta_dot * rhs.conjugate()).real / abs(rhs) ** 2 * gauge.scale**2


def _reference_configuration(Gamma1: float, Gamma2: float, zeta: complex) -> VortexConfiguration:
    return reconstruct_zero(ZeroCircReducedState(zeta.real, zeta.imag, Gamma1, Gamma2), GaugeRecord(0.0, 1.0, 0j))


@lru_cache(maxsize=256)
def bracket_constant(Gamma1: float, Gamma2: float) -> float:
    """Константа скобки {X, Y}, откалиброванная по полной системе в одной опорной точке."""
    return _pushforward_ratio(_reference_configuration(Gamma1, Gamma2, 0.3 + 0.7j))


def calibrate_bracket_constant(
    Gamma1: float, Gamma2: float, n_states: int = 100, seed: int = 0
) -> tuple[float, float]:
    """Среднее c по n_states случайным конфигурациям и максимальное относительное отклонение."""
    rng = np.random.default_rng(seed)
    values = []
    while len(values) < n_states:
        zeta = complex(rng.normal(), rng.normal())
        try:
            values.append(_pushforward_ratio(_reference_configuration(Gamma1, Gamma2, zeta)))
        except SingularityError:
            continue
    arr = np.asarray(values)
    mean = float(arr.mean())
    spread = float(np.max(np.abs(arr - mean)) / abs(mean))
    logger.debug("Калибровка скобки: c=%.15g, разброс %.2e", mean, spread)
    return mean, spread


def zero_vector_field(state: ZeroCircReducedState) -> tuple[float, float]:
    """Ẋ = c·h_Y, Ẏ = −c·h_X в приведённом времени (физическое время = приведённое × s²)."""
    grad = _degenerate_gradient if state.degenerate else zero_gradient
    gx, gy = grad(state.X, state.Y, state.Gamma1, state.Gamma2)
    c = bracket_constant(state.Gamma1, state.Gamma2)
    return c * gy, -c * gx


def zero_equilibria(Gamma1: float, Gamma2: float) -> tuple[ZeroEquilibrium, ZeroEquilibrium]:
    """X = (Γ₂² − Γ₁²)/(2D), Y = ±√3(Γ₁+Γ₂)²/(2D), D = Γ₁² + Γ₁Γ₂ + Γ₂²."""
    D = Gamma1**2 + Gamma1 * Gamma2 + Gamma2**2
    G = Gamma1 + Gamma2
    X = (Gamma2**2 - Gamma1**2) / (2 * D)
    Y = math.sqrt(3) * G * G / (2 * D)
    out = []
    for y in (Y, -Y):
        det = float(np.linalg.det(zero_hessian(X, y, Gamma1, Gamma2)))
        scale = float(np.sum(zero_hessian(X, y, Gamma1, Gamma2) ** 2))
        if det < -1e-12 * scale:
            cls = Stability.SADDLE
        elif det > 1e-12 * scale:
            cls = Stability.CENTER
        else:
            cls = Stability.DEGENERATE
        out.append(ZeroEquilibrium(X, y, cls, det))
    return out[0], out[1]


def zero_pairwise_distances(state: ZeroCircReducedState, gauge: GaugeRecord) -> dict[tuple[int, int], float]:
    """Квадраты физических расстояний между вихрями."""
    cfg = reconstruct_zero(state, gauge)
    z = cfg.positions
    return {(i + 1, j + 1): abs(z[i] - z[j]) ** 2 for i, j in ((0, 1), (0, 2), (1, 2))}


def integrate_zero_reduced(
    state: ZeroCircReducedState,
    t_span: tuple[float, float],
    tol: float = 1e-10,
    *,
    t_eval: NDArray[np.float64] | None = None,
    singular_floor: float = 1e-9,
) -> Trajectory:
    """Интегрирует плоскую систему (X, Y) в приведённом времени."""
    if tol <= 0:
        raise ConfigError("Допуск tol должен быть положительным")
    g1, g2 = state.Gamma1, state.Gamma2
    centers = [0j] if state.degenerate else [t[2] for t in _terms(g1, g2)]
    pairs = [(1, 2)] if state.degenerate else [t[0] for t in _terms(g1, g2)]
    z0 = complex(state.X, state.Y)
    floor = singular_floor * min(abs(z0 - c) for c in centers)
    if floor == 0:
        raise SingularityError(pairs[int(np.argmin([abs(z0 - c) for c in centers]))])

    def rhs(_t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        s = ZeroCircReducedState(float(y[0]), float(y[1]), g1, g2, state.degenerate)
        return np.array(zero_vector_field(s))

    def make_event(center: complex) -> Callable[[float, NDArray[np.float64]], float]:
        def event(_t: float, y: NDArray[np.float64]) -> float:
            return abs(complex(y[0], y[1]) - center) - floor

        event.terminal = True  # type: ignore[attr-defined]
        event.direction = -1  # type: ignore[attr-defined]
        return event

    events = [make_event(c) for c in centers]
    sol = solve_ivp(
        rhs, t_span, [state.X, state.Y], rtol=tol, atol=tol * max(1.0, abs(z0)), t_eval=t_eval, events=events
    )
    if sol.status == -1:
        raise IntegrationError(f"Интегратор не справился: {sol.message}")
    states = sol.y.T
    if not np.all(np.isfinite(states)):
        raise IntegrationError("Нечисловое состояние в траектории")
    terminated_by = None
    if sol.status == 1:
        hit = [k for k, ev in enumerate(sol.t_events) if len(ev)]
        terminated_by = f"S{pairs[hit[0]][0]}{pairs[hit[0]][1]}"

    hfun = h_degenerate if state.degenerate else h_zero
    hs = [hfun(float(x), float(y), g1, g2) for x, y in states]
    diag = pd.DataFrame({"h": hs})
    diag["dh"] = (diag["h"] - diag["h"].iloc[0]) / max(1.0, abs(diag["h"].iloc[0]))
    return Trajectory(
        times=sol.t,
        states=states,
        columns=("X", "Y"),
        diagnostics=diag,
        export_columns=("h",),
        status="near_singularity" if terminated_by else "completed",
        meta={"terminated_by": terminated_by},
    )
