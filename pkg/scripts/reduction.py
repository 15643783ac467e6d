from __future__ import annotations

import cmath
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from itertools import permutations
from typing import Generic, TypeVar

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.integrate import solve_ivp

from .core_model import Circulations, Trajectory, VortexConfiguration, symmetric_invariants
from .errors import (
    ConfigError,
    IntegrationError,
    OffSurfaceError,
    RelabelingRequiredError,
    SingularityError,
    ZeroTotalCirculationError,
)

logger = logging.getLogger(__name__)

C = TypeVar("C", float, Fraction)


class PhaseSurface(str, Enum):
    SPHEROID = "Spheroid"
    HYPERBOLOID = "Hyperboloid"
    CONE = "Cone"


@dataclass(frozen=True, slots=True)
class JacobiState:
    Z1: complex
    Z2: complex
    Z3: complex
    kappa1: float
    kappa2: float
    kappa3: float
    circulations: Circulations
    labels: tuple[int, int, int] = (0, 1, 2)


@dataclass(frozen=True, slots=True)
class MomentumCoordinates:
    mu1: float
    mu2: float
    mu3: float
    mu4: float

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.mu1, self.mu2, self.mu3, self.mu4])


@dataclass(frozen=True, slots=True)
class ReducedState:
    """Точка (X, Y, Z) на поверхности уровня Θ; circulations уже в порядке редукции."""

    X: float
    Y: float
    Z: float
    Theta: float
    circulations: Circulations
    labels: tuple[int, int, int] = (0, 1, 2)

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.X, self.Y, self.Z])

    def moved(self, xyz: Sequence[float]) -> ReducedState:
        return replace(self, X=float(xyz[0]), Y=float(xyz[1]), Z=float(xyz[2]))


@dataclass(frozen=True, slots=True)
class LogForm(Generic[C]):
    """
    Линейная форма Aᵢⱼ = ax·X + az·Z + at·Θ, пропорциональная lᵢⱼ²: Aᵢⱼ = scale·lᵢⱼ².
    Вклад в гамильтониан: −weight·log|Aᵢⱼ|.
    """

    pair: tuple[int, int]
    weight: C
    ax: C
    az: C
    at: C
    scale: C

    def value(self, X: float, Z: float, Theta: float) -> float:
        return float(self.ax) * X + float(self.az) * Z + float(self.at) * Theta


@dataclass(frozen=True, slots=True)
class SingularPoint:
    label: str
    X: float
    Z: float
    at_infinity: bool
    admissible: bool

    @property
    def pair(self) -> tuple[int, int]:
        return (int(self.label[1]), int(self.label[2]))


def reduction_order(c: Circulations) -> tuple[Circulations, tuple[int, int, int]]:
    """Порядок меток с Γ₁+Γ₂ ≠ 0; при γ₁ = 0 — ошибка (отдельная редукция)."""
    g = c.as_tuple()
    total = g[0] + g[1] + g[2]
    if abs(float(total)) <= 1e-14 * sum(abs(float(x)) for x in g):
        raise ZeroTotalCirculationError()
    for perm in permutations(range(3)):
        if g[perm[0]] + g[perm[1]] != 0:
            labels = (perm[0], perm[1], perm[2])
            return c.permuted(labels), labels
    raise ConfigError("Не найден порядок меток с Γ₁+Γ₂ ≠ 0")


def kappas(c: Circulations) -> tuple[float, float, float]:
    g1, g2, g3 = c.as_floats()
    s12 = g1 + g2
    gamma1 = s12 + g3
    if s12 == 0:
        raise RelabelingRequiredError(reduction_order(c)[1])
    if gamma1 == 0:
        raise ZeroTotalCirculationError()
    return g1 * g2 / s12, s12 * g3 / gamma1, gamma1


def log_forms(g: tuple[C, C, C]) -> tuple[LogForm[C], LogForm[C], LogForm[C]]:
    g1, g2, g3 = g
    gamma1 = g1 + g2 + g3
    gamma3 = g1 * g2 * g3
    s12 = g1 + g2
    one = g1 / g1
    return (
        LogForm((1, 2), g1 * g2 / 2, 0 * one, one, one, 2 * g1 * g2 / s12),
        LogForm((1, 3), g1 * g3 / 2, 4 * gamma3, g2 * g3 - gamma1 * g1, s12 * (g1 + g3), 2 * s12 * g1 * g3),
        LogForm((2, 3), g2 * g3 / 2, -4 * gamma3, g1 * g3 - gamma1 * g2, s12 * (g2 + g3), 2 * s12 * g2 * g3),
    )


def to_jacobi(cfg: VortexConfiguration, *, relabel: bool = True) -> JacobiState:
    """
    Z₁ = z₁ − z₂, Z₂ = (Γ₁z₁ + Γ₂z₂)/(Γ₁+Γ₂) − z₃, Z₃ = Σ Γⱼzⱼ/γ₁.
    При Γ₁+Γ₂ = 0 метки переставляются (или RelabelingRequiredError при relabel=False).
    """
    if cfg.n != 3:
        raise ConfigError(f"Редукция определена для трёх вихрей, получено {cfg.n}")
    c = Circulations(*cfg.circulations.tolist())
    ordered, labels = reduction_order(c)
    if labels != (0, 1, 2):
        if not relabel:
            raise RelabelingRequiredError(labels)
        logger.warning("Γ₁+Γ₂ = 0: метки переставлены в порядок %s", labels)
    g1, g2, g3 = ordered.as_floats()
    z1, z2, z3 = (complex(cfg.positions[k]) for k in labels)
    s12 = g1 + g2
    gamma1 = s12 + g3
    k1, k2, k3 = kappas(ordered)
    return JacobiState(
        Z1=z1 - z2,
        Z2=(g1 * z1 + g2 * z2) / s12 - z3,
        Z3=(g1 * z1 + g2 * z2 + g3 * z3) / gamma1,
        kappa1=k1,
        kappa2=k2,
        kappa3=k3,
        circulations=ordered,
        labels=labels,
    )


def momentum_map(j: JacobiState) -> MomentumCoordinates:
    """μ₁ = |Z₁|², μ₂ = |Z₂|², μ₃ + iμ₄ = conj(Z₁)·Z₂."""
    w = j.Z1.conjugate() * j.Z2
    return MomentumCoordinates(abs(j.Z1) ** 2, abs(j.Z2) ** 2, w.real, w.imag)


def to_reduced(m: MomentumCoordinates, j: JacobiState) -> ReducedState:
    return ReducedState(
        X=m.mu3,
        Y=m.mu4,
        Z=j.kappa1 * m.mu1 - j.kappa2 * m.mu2,
        Theta=j.kappa1 * m.mu1 + j.kappa2 * m.mu2,
        circulations=j.circulations,
        labels=j.labels,
    )


def reduce_configuration(cfg: VortexConfiguration, *, relabel: bool = True) -> ReducedState:
    j = to_jacobi(cfg, relabel=relabel)
    return to_reduced(momentum_map(j), j)


def _gamma_ratio(c: Circulations) -> float:
    """γ₃/γ₁ для квадрики Θ² = Z² + (4γ₃/γ₁)(X² + Y²)."""
    inv = symmetric_invariants(c)
    return float(inv.gamma3) / float(inv.gamma1)


def classify_surface(c: Circulations, Theta: float) -> PhaseSurface:
    """
    Тип поверхности уровня. Для сфероида знак Θ должен совпадать со знаком γ₁γ₂:
    при трёх циркуляциях одного знака с γ₁ это Θ > 0, при одной такой — Θ < 0.
    """
    inv = symmetric_invariants(c)
    gamma1, gamma2, gamma3 = float(inv.gamma1), float(inv.gamma2), float(inv.gamma3)
    if gamma1 == 0:
        raise ZeroTotalCirculationError()
    if gamma3 / gamma1 > 0:
        if Theta * gamma1 * gamma2 <= 0:
            raise ConfigError(
                f"Сфероид при Γ={c.as_floats()} допускает только Θ со знаком γ₁γ₂, получено Θ={Theta}"
            )
        return PhaseSurface.SPHEROID
    if Theta == 0:
        return PhaseSurface.CONE
    return PhaseSurface.HYPERBOLOID


def quadric_residual(s: ReducedState) -> float:
    return s.Theta**2 - s.Z**2 - 4 * _gamma_ratio(s.circulations) * (s.X**2 + s.Y**2)


def surface_scale(s: ReducedState) -> float:
    return max(abs(s.Theta), abs(s.Z), math.hypot(s.X, s.Y), 1e-300)


def _forms(s: ReducedState) -> tuple[LogForm[float], LogForm[float], LogForm[float]]:
    return log_forms(s.circulations.as_floats())


def original_pair(pair: tuple[int, int], labels: tuple[int, int, int]) -> tuple[int, int]:
    """Пара в порядке редукции → исходные номера вихрей (с единицы)."""
    a, b = sorted((labels[pair[0] - 1] + 1, labels[pair[1] - 1] + 1))
    return a, b


def pairwise_distances(s: ReducedState) -> dict[tuple[int, int], float]:
    """Квадраты расстояний lᵢⱼ²; ключи — исходные номера вихрей."""
    return {original_pair(f.pair, s.labels): f.value(s.X, s.Z, s.Theta) / f.scale for f in _forms(s)}


def _checked_values(s: ReducedState) -> list[tuple[LogForm[float], float]]:
    out = []
    for f in _forms(s):
        a = f.value(s.X, s.Z, s.Theta)
        if a == 0:
            i, j = original_pair(f.pair, s.labels)
            raise SingularityError((i, j), f"Сингулярность S{i}{j}: l² = 0")
        out.append((f, a))
    return out


def reduced_hamiltonian(s: ReducedState) -> float:
    """h(X, Z; Θ) = −Σ (ΓᵢΓⱼ/2)·log|Aᵢⱼ|; отличается от H на константу, зависящую от Γ."""
    return -sum(f.weight * math.log(abs(a)) for f, a in _checked_values(s))


def reduced_gradient(s: ReducedState) -> tuple[float, float]:
    """(h_X, h_Z)."""
    hx = hz = 0.0
    for f, a in _checked_values(s):
        hx -= f.weight * f.ax / a
        hz -= f.weight * f.az / a
    return hx, hz


def reduced_hessian(s: ReducedState) -> tuple[float, float, float]:
    """(h_XX, h_XZ, h_ZZ)."""
    hxx = hxz = hzz = 0.0
    for f, a in _checked_values(s):
        w = f.weight / (a * a)
        hxx += w * f.ax * f.ax
        hxz += w * f.ax * f.az
        hzz += w * f.az * f.az
    return hxx, hxz, hzz


def reduced_vector_field(s: ReducedState) -> tuple[float, float, float]:
    """Ẋ = −4h_Z·Y, Ẏ = 4h_Z·X − (γ₁/γ₃)h_X·Z, Ż = 4h_X·Y."""
    hx, hz = reduced_gradient(s)
    ratio = 1.0 / _gamma_ratio(s.circulations)
    return -4 * hz * s.Y, 4 * hz * s.X - ratio * hx * s.Z, 4 * hx * s.Y


def _mu_partials(m: MomentumCoordinates, j: JacobiState) -> tuple[float, float, float]:
    g1, g2, g3 = j.circulations.as_floats()
    k1 = j.kappa1
    l12 = m.mu1
    l13 = m.mu2 + 2 * (k1 / g1) * m.mu3 + (k1 / g1) ** 2 * m.mu1
    l23 = m.mu2 - 2 * (k1 / g2) * m.mu3 + (k1 / g2) ** 2 * m.mu1
    for pair, value in (((1, 2), l12), ((1, 3), l13), ((2, 3), l23)):
        if value <= 0:
            raise SingularityError(pair)
    w12, w13, w23 = g1 * g2 / 2, g1 * g3 / 2, g2 * g3 / 2
    h1 = -w12 / l12 - w13 * (k1 / g1) ** 2 / l13 - w23 * (k1 / g2) ** 2 / l23
    h2 = -w13 / l13 - w23 / l23
    h3 = -w13 * (2 * k1 / g1) / l13 + w23 * (2 * k1 / g2) / l23
    return h1, h2, h3


def mu_vector_field(m: MomentumCoordinates, j: JacobiState) -> tuple[float, float, float, float]:
    """Поле в координатах μ (h_μ₄ = 0); κ и циркуляции берутся из j."""
    h1, h2, h3 = _mu_partials(m, j)
    k1, k2 = j.kappa1, j.kappa2
    return (
        (2 / k1) * h3 * m.mu4,
        -(2 / k2) * h3 * m.mu4,
        2 * (h2 / k2 - h1 / k1) * m.mu4,
        2 * m.mu3 * (h1 / k1 - h2 / k2) + h3 * (m.mu2 / k1 - m.mu1 / k2),
    )


def _admissible(mu1: float, mu2: float, scale: float) -> bool:
    tol = 1e-12 * scale
    return mu1 >= -tol and mu2 >= -tol


def is_admissible(s: ReducedState) -> bool:
    """Точка поверхности соответствует конфигурации, если μ₁ ≥ 0 и μ₂ ≥ 0."""
    k1, k2, _ = kappas(s.circulations)
    return _admissible((s.Theta + s.Z) / (2 * k1), (s.Theta - s.Z) / (2 * k2), surface_scale(s) / min(abs(k1), abs(k2)))


def singularities(c: Circulations, Theta: float) -> dict[str, SingularPoint]:
    """
    Образы двойных столкновений Sᵢⱼ (Y = 0); при нулевом знаменателе точка уходит на бесконечность.
    Координаты — в порядке редукции, метки Sᵢⱼ — исходные номера вихрей.
    """
    ordered, labels = reduction_order(c)
    g1, g2, g3 = ordered.as_floats()
    gamma1 = g1 + g2 + g3
    k1, k2, _ = kappas(ordered)
    out: dict[str, SingularPoint] = {}
    candidates: list[tuple[tuple[int, int], float, float, float]] = [
        ((1, 2), 1.0, 0.0, -Theta),
        ((1, 3), (g1 + g2) * (g1 + g3), -gamma1 * Theta, (gamma1 * g1 - g2 * g3) * Theta),
        ((2, 3), (g1 + g2) * (g2 + g3), gamma1 * Theta, (gamma1 * g2 - g1 * g3) * Theta),
    ]
    scale = max(abs(Theta), 1e-300)
    for pair, den, x_num, z_num in candidates:
        i, j = original_pair(pair, labels)
        label = f"S{i}{j}"
        if den == 0:
            out[label] = SingularPoint(label, math.inf, math.inf, at_infinity=True, admissible=False)
            continue
        X, Z = x_num / den, z_num / den
        ok = _admissible((Theta + Z) / (2 * k1), (Theta - Z) / (2 * k2), scale / min(abs(k1), abs(k2)))
        out[label] = SingularPoint(label, X, Z, at_infinity=False, admissible=ok)
    return out


def sheet_sign(c: Circulations) -> float:
    """Знак Z на допустимой полости гиперболоида (и конуса)."""
    k1, _, _ = kappas(reduction_order(c)[0])
    return 1.0 if k1 > 0 else -1.0


def project_to_quadric(s: ReducedState) -> ReducedState:
    ratio = 4 * _gamma_ratio(s.circulations)
    if ratio > 0:
        a = math.sqrt(ratio)
        u = np.array([a * s.X, a * s.Y, s.Z])
        norm = float(np.linalg.norm(u))
        if norm == 0:
            return s
        u *= abs(s.Theta) / norm
        return s.moved((u[0] / a, u[1] / a, u[2]))
    z2 = s.Theta**2 - ratio * (s.X**2 + s.Y**2)
    return s.moved((s.X, s.Y, sheet_sign(s.circulations) * math.sqrt(max(z2, 0.0))))


def reconstruct(s: ReducedState, gauge: float = 0.0, tol: float = 1e-9) -> VortexConfiguration:
    """
    Конфигурация с центром завихренности в нуле и фазой Z₂, равной gauge.
    Метки возвращаются в исходный порядок.
    """
    scale = surface_scale(s)
    res = quadric_residual(s)
    if abs(res) > tol * scale**2:
        raise OffSurfaceError(f"Точка не лежит на поверхности уровня: невязка {res:.3e}")
    k1, k2, _ = kappas(s.circulations)
    mu1 = (s.Theta + s.Z) / (2 * k1)
    mu2 = (s.Theta - s.Z) / (2 * k2)
    lim = -tol * scale / min(abs(k1), abs(k2))
    if mu1 < lim or mu2 < lim:
        raise OffSurfaceError(f"Недопустимая точка: μ₁={mu1:.3e}, μ₂={mu2:.3e}")
    mu1, mu2 = max(mu1, 0.0), max(mu2, 0.0)
    phase = cmath.exp(1j * gauge)
    if mu2 > 0:
        Z2 = math.sqrt(mu2) * phase
        Z1 = ((s.X + 1j * s.Y) / Z2).conjugate()
    else:
        Z2 = 0j
        Z1 = math.sqrt(mu1) * phase
    g1, g2, g3 = s.circulations.as_floats()
    gamma1 = g1 + g2 + g3
    s12 = g1 + g2
    z3 = -s12 * Z2 / gamma1
    zt2 = g3 * Z2 / gamma1
    ordered = [zt2 + g2 * Z1 / s12, zt2 - g1 * Z1 / s12, z3]
    positions = [0j, 0j, 0j]
    circ = [0.0, 0.0, 0.0]
    for k, label in enumerate(s.labels):
        positions[label] = ordered[k]
        circ[label] = (g1, g2, g3)[k]
    return VortexConfiguration.of(positions, circ)


def _geometric_mean(values: Sequence[float]) -> float:
    return math.exp(sum(math.log(v) for v in values) / len(values))


ReducedEvent = tuple[str, Callable[[float, NDArray[np.float64]], float], int]


def integrate_reduced(
    s: ReducedState,
    t_span: tuple[float, float],
    tol: float = 1e-10,
    *,
    t_eval: NDArray[np.float64] | None = None,
    project: bool = False,
    chunks: int = 20,
    singular_floor: float = 1e-9,
    events: Sequence[ReducedEvent] = (),
    method: str = "RK45",
) -> Trajectory:
    """
    Интегрирует редуцированное поле; при project=True точка между отрезками проецируется на квадрику,
    если её невязка превышает 10·tol. Сближение с Sᵢⱼ (lᵢⱼ² ниже singular_floor от начального масштаба)
    и пользовательские события останавливают интегрирование; имя события в meta["terminated_by"].
    """
    if tol <= 0:
        raise ConfigError("Допуск tol должен быть положительным")
    forms = _forms(s)
    l2_start = [f.value(s.X, s.Z, s.Theta) / f.scale for f in forms]
    if min(l2_start) <= 0:
        bad = forms[int(np.argmin(l2_start))].pair
        raise SingularityError(bad)
    floor = singular_floor * _geometric_mean(l2_start)
    theta = s.Theta

    def rhs(_t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.array(reduced_vector_field(s.moved(y)))

    def make_singular(f: LogForm[float]) -> Callable[[float, NDArray[np.float64]], float]:
        def event(_t: float, y: NDArray[np.float64]) -> float:
            return f.value(y[0], y[2], theta) / f.scale - floor

        return event

    named: list[ReducedEvent] = [(f"S{f.pair[0]}{f.pair[1]}", make_singular(f), -1) for f in forms]
    named.extend(events)
    fns = []
    for _name, fn, direction in named:
        fn.terminal = True  # type: ignore[attr-defined]
        fn.direction = direction  # type: ignore[attr-defined]
        fns.append(fn)

    t0, t1 = t_span
    edges = np.linspace(t0, t1, (chunks if project else 1) + 1)
    y = s.as_array()
    times: list[NDArray[np.float64]] = []
    states: list[NDArray[np.float64]] = []
    terminated_by: str | None = None
    event_state: NDArray[np.float64] | None = None
    scale = surface_scale(s)

    for a, b in zip(edges[:-1], edges[1:]):
        sub_eval = None
        if t_eval is not None:
            mask = (t_eval >= a) & ((t_eval < b) | (b == t1) & (t_eval <= b))
            sub_eval = t_eval[mask]
        sol = solve_ivp(rhs, (a, b), y, method=method, rtol=tol, atol=tol * scale, t_eval=sub_eval, events=fns)
        if sol.status == -1:
            raise IntegrationError(f"Интегратор не справился: {sol.message}")
        if sol.t.size:
            keep = slice(1, None) if times and sol.t[0] == times[-1][-1] else slice(None)
            times.append(sol.t[keep])
            states.append(sol.y.T[keep])
        if sol.status == 1:
            hits = [(ev[0], k) for k, ev in enumerate(sol.t_events) if len(ev)]
            _, k = min(hits)
            terminated_by = named[k][0]
            event_state = sol.y_events[k][0]
            break
        y = sol.y[:, -1]
        if project and abs(quadric_residual(s.moved(y))) > 10 * tol * scale**2:
            y = project_to_quadric(s.moved(y)).as_array()

    t_all = np.concatenate(times) if times else np.empty(0)
    y_all = np.vstack(states) if states else np.empty((0, 3))
    if not np.all(np.isfinite(y_all)):
        raise IntegrationError("Нечисловое состояние в редуцированной траектории")

    status = "completed"
    if terminated_by is not None:
        status = "near_singularity" if terminated_by in ("S12", "S13", "S23") else "event"
        logger.debug("Интегрирование остановлено событием %s", terminated_by)

    diag = _reduced_diagnostics(s, y_all)
    return Trajectory(
        times=t_all,
        states=y_all,
        columns=("X", "Y", "Z"),
        diagnostics=diag,
        export_columns=("h", "quadric_residual"),
        status=status,
        meta={"terminated_by": terminated_by, "event_state": event_state},
    )


def _reduced_diagnostics(s: ReducedState, states: NDArray[np.float64]) -> pd.DataFrame:
    hs, qs = [], []
    for y in states:
        p = s.moved(y)
        try:
            hs.append(reduced_hamiltonian(p))
        except SingularityError:
            hs.append(math.nan)
        qs.append(quadric_residual(p))
    df = pd.DataFrame({"h": hs, "quadric_residual": qs})
    if len(df):
        h0 = df["h"].iloc[0]
        df["dh"] = (df["h"] - h0) / max(1.0, abs(h0))
        df["dq"] = df["quadric_residual"] / surface_scale(s) ** 2
    else:
        df["dh"] = []
        df["dq"] = []
    return df
