from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.integrate import solve_ivp

from .errors import ConfigError, IntegrationError, SingularityError
from .utils import Real

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]


@dataclass(frozen=True, slots=True)
class Circulations:
    """Три циркуляции Γⱼ (в единицах 2π), хранятся ровно как заданы."""

    g1: Real
    g2: Real
    g3: Real

    def __post_init__(self) -> None:
        for k, g in enumerate(self.as_tuple(), 1):
            if g == 0:
                raise ConfigError(f"Циркуляция Γ{k} должна быть ненулевой")

    @classmethod
    def of(cls, values: Sequence[Real | int]) -> Circulations:
        if len(values) != 3:
            raise ConfigError(f"Ожидались три циркуляции, получено {len(values)}")
        a, b, c = (Fraction(v) if isinstance(v, int) else v for v in values)
        return cls(a, b, c)

    def as_tuple(self) -> tuple[Real, Real, Real]:
        return (self.g1, self.g2, self.g3)

    def as_floats(self) -> tuple[float, float, float]:
        return (float(self.g1), float(self.g2), float(self.g3))

    def as_fractions(self) -> tuple[Fraction, Fraction, Fraction]:
        return (Fraction(self.g1), Fraction(self.g2), Fraction(self.g3))

    def permuted(self, labels: tuple[int, int, int]) -> Circulations:
        g = self.as_tuple()
        return Circulations(g[labels[0]], g[labels[1]], g[labels[2]])


@dataclass(frozen=True, slots=True)
class SymmetricInvariants:
    gamma1: Real
    gamma2: Real
    gamma3: Real


def symmetric_invariants(c: Circulations) -> SymmetricInvariants:
    g1, g2, g3 = c.as_tuple()
    return SymmetricInvariants(
        gamma1=g1 + g2 + g3,
        gamma2=g1 * g2 + g3 * g1 + g2 * g3,
        gamma3=g1 * g2 * g3,
    )


@dataclass(frozen=True, slots=True)
class VortexConfiguration:
    positions: ComplexArray
    circulations: FloatArray

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.complex128).reshape(-1)
        circ = np.asarray([float(g) for g in self.circulations], dtype=np.float64).reshape(-1)
        if pos.shape != circ.shape:
            raise ConfigError(f"Число позиций ({pos.size}) не совпадает с числом циркуляций ({circ.size})")
        if np.any(circ == 0):
            raise ConfigError("Все циркуляции должны быть ненулевыми")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "circulations", circ)

    @classmethod
    def of(cls, positions: Sequence[complex], circulations: Sequence[Real] | Circulations) -> VortexConfiguration:
        circ = circulations.as_floats() if isinstance(circulations, Circulations) else circulations
        return cls(np.asarray(positions, dtype=np.complex128), np.asarray([float(g) for g in circ]))

    @property
    def n(self) -> int:
        return int(self.positions.size)

    def with_positions(self, positions: ComplexArray) -> VortexConfiguration:
        return VortexConfiguration(positions, self.circulations)

    def to_vector(self) -> FloatArray:
        return np.column_stack([self.positions.real, self.positions.imag]).reshape(-1)

    @classmethod
    def from_vector(cls, vec: FloatArray, circulations: FloatArray) -> VortexConfiguration:
        xy = np.asarray(vec, dtype=np.float64).reshape(-1, 2)
        return cls(xy[:, 0] + 1j * xy[:, 1], circulations)


@dataclass(frozen=True, slots=True)
class ConservedQuantities:
    M: complex
    Theta: float
    H: float
    z0: complex | None = None


@dataclass(frozen=True, slots=True)
class CloseApproach:
    time: float
    pair: tuple[int, int]
    distance: float


@dataclass(slots=True)
class Trajectory:
    """
    Траектория интегратора: моменты времени, состояния (по строкам) и диагностика
    инвариантов на каждом сохранённом шаге.
    """

    times: FloatArray
    states: FloatArray
    columns: tuple[str, ...]
    diagnostics: pd.DataFrame
    export_columns: tuple[str, ...] = ()
    status: str = "completed"
    closest_approach: CloseApproach | None = None
    meta: dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.times) != len(self.states) or len(self.diagnostics) != len(self.states):
            raise ValueError("Длины times, states и diagnostics должны совпадать")
        steps = np.diff(self.times)
        if steps.size and not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValueError("Моменты времени должны быть строго монотонны")

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.states, columns=list(self.columns))
        df.insert(0, "t", self.times)
        for col in self.export_columns:
            df[col] = self.diagnostics[col].to_numpy()
        return df

    def max_drift(self, column: str) -> float:
        return float(self.diagnostics[column].abs().max())


def _pair_geometry(z: ComplexArray) -> tuple[ComplexArray, FloatArray]:
    dz = z[:, None] - z[None, :]
    r2 = np.abs(dz) ** 2
    return dz, r2


def _check_distinct(z: ComplexArray) -> None:
    for i, j in combinations(range(z.size), 2):
        if z[i] == z[j]:
            raise SingularityError((i + 1, j + 1))


def vortex_velocities(cfg: VortexConfiguration) -> ComplexArray:
    """żⱼ = i Σ_{i≠j} Γᵢ (zⱼ − zᵢ) / |zⱼ − zᵢ|²."""
    z = cfg.positions
    _check_distinct(z)
    dz, r2 = _pair_geometry(z)
    np.fill_diagonal(r2, np.inf)
    return 1j * (dz / r2) @ cfg.circulations


def hamiltonian(cfg: VortexConfiguration) -> float:
    z, g = cfg.positions, cfg.circulations
    _check_distinct(z)
    total = 0.0
    for i, j in combinations(range(z.size), 2):
        total -= 0.5 * g[i] * g[j] * math.log(abs(z[i] - z[j]) ** 2)
    return total


def conserved_quantities(cfg: VortexConfiguration) -> ConservedQuantities:
    z, g = cfg.positions, cfg.circulations
    M = complex(np.sum(g * z))
    theta = float(np.sum(g * np.abs(z) ** 2))
    gamma1 = float(np.sum(g))
    z0 = M / gamma1 if abs(gamma1) > 1e-14 * float(np.sum(np.abs(g))) else None
    return ConservedQuantities(M=M, Theta=theta, H=hamiltonian(cfg), z0=z0)


def poisson_bracket(
    f: Callable[[VortexConfiguration], float],
    g: Callable[[VortexConfiguration], float],
    cfg: VortexConfiguration,
    step: float = 1e-6,
) -> float:
    """{F,G} = Σⱼ (1/Γⱼ)(∂F/∂xⱼ ∂G/∂yⱼ − ∂F/∂yⱼ ∂G/∂xⱼ), производные центральными разностями."""
    vec = cfg.to_vector()
    scale = max(1.0, float(np.max(np.abs(vec))))
    h = step * scale

    def grad(fun: Callable[[VortexConfiguration], float]) -> FloatArray:
        out = np.empty_like(vec)
        for k in range(vec.size):
            plus, minus = vec.copy(), vec.copy()
            plus[k] += h
            minus[k] -= h
            out[k] = (
                fun(VortexConfiguration.from_vector(plus, cfg.circulations))
                - fun(VortexConfiguration.from_vector(minus, cfg.circulations))
            ) / (2 * h)
        return out

    gf, gg = grad(f).reshape(-1, 2), grad(g).reshape(-1, 2)
    return float(np.sum((gf[:, 0] * gg[:, 1] - gf[:, 1] * gg[:, 0]) / cfg.circulations))


def _min_pair(z: ComplexArray) -> tuple[float, tuple[int, int]]:
    best = (math.inf, (0, 0))
    for i, j in combinations(range(z.size), 2):
        d = abs(z[i] - z[j])
        if d < best[0]:
            best = (d, (i + 1, j + 1))
    return best


def _geometric_mean_distance(z: ComplexArray) -> float:
    logs = [math.log(abs(z[i] - z[j])) for i, j in combinations(range(z.size), 2)]
    return math.exp(sum(logs) / len(logs)) if logs else 1.0


def integrate_full(
    cfg: VortexConfiguration,
    t_span: tuple[float, float],
    tol: float = 1e-10,
    *,
    t_eval: FloatArray | None = None,
    collision_floor: float | None = None,
    method: str = "RK45",
) -> Trajectory:
    """
    Интегрирует полную систему вложенным методом Рунге–Кутты 5(4) с контролем шага.
    В diagnostics пишутся H, Mx, My, Theta и их относительные дрейфы.
    При сближении пары ближе collision_floor интегрирование останавливается.
    """
    if tol <= 0:
        raise ConfigError("Допуск tol должен быть положительным")
    g = cfg.circulations
    _check_distinct(cfg.positions)
    n = cfg.n

    floor = collision_floor if collision_floor is not None else 1e-9 * _geometric_mean_distance(cfg.positions)

    def rhs(_t: float, y: FloatArray) -> FloatArray:
        z = y[0::2] + 1j * y[1::2]
        dz, r2 = _pair_geometry(z)
        np.fill_diagonal(r2, np.inf)
        v = 1j * (dz / r2) @ g
        out = np.empty_like(y)
        out[0::2] = v.real
        out[1::2] = v.imag
        return out

    def near_collision(_t: float, y: FloatArray) -> float:
        z = y[0::2] + 1j * y[1::2]
        return _min_pair(z)[0] - floor

    near_collision.terminal = True  # type: ignore[attr-defined]
    near_collision.direction = -1  # type: ignore[attr-defined]

    logger.debug("Интегрирование полной системы: N=%d, t=%s, tol=%g", n, t_span, tol)
    sol = solve_ivp(
        rhs,
        t_span,
        cfg.to_vector(),
        method=method,
        rtol=tol,
        atol=tol * max(1.0, float(np.max(np.abs(cfg.positions)))),
        t_eval=t_eval,
        events=near_collision if n > 1 else None,
    )
    if sol.status == -1:
        raise IntegrationError(f"Интегратор не справился: {sol.message}")
    states = sol.y.T
    if not np.all(np.isfinite(states)):
        raise IntegrationError("Нечисловое состояние в траектории")

    status = "completed"
    closest = None
    if sol.status == 1 and n > 1 and len(sol.t_events[0]) > 0:
        t_hit = float(sol.t_events[0][0])
        z_hit = sol.y_events[0][0][0::2] + 1j * sol.y_events[0][0][1::2]
        dist, pair = _min_pair(z_hit)
        closest = CloseApproach(time=t_hit, pair=pair, distance=dist)
        status = "near_collision"
        logger.warning("Сближение вихрей %s до %.3e при t=%.6g, траектория обрезана", pair, dist, t_hit)

    diag = _full_diagnostics(states, g)
    columns = tuple(name for k in range(1, n + 1) for name in (f"x{k}", f"y{k}"))
    return Trajectory(
        times=sol.t,
        states=states,
        columns=columns,
        diagnostics=diag,
        export_columns=("H", "Mx", "My", "Theta"),
        status=status,
        closest_approach=closest,
    )


def _full_diagnostics(states: FloatArray, g: FloatArray) -> pd.DataFrame:
    rows = []
    for y in states:
        cfg = VortexConfiguration.from_vector(y, g)
        q = conserved_quantities(cfg) if cfg.n > 1 else ConservedQuantities(complex(np.sum(g * cfg.positions)), 0.0, 0.0)
        rows.append((q.H, q.M.real, q.M.imag, q.Theta))
    df = pd.DataFrame(rows, columns=["H", "Mx", "My", "Theta"])

    z0 = states[0][0::2] + 1j * states[0][1::2]
    abs_g = np.abs(g)
    scales = {
        "H": max(abs(df["H"].iloc[0]), 0.5 * float(np.sum(np.outer(abs_g, abs_g)) - np.sum(abs_g**2)) / 2),
        "Mx": max(float(np.sum(abs_g * np.abs(z0))), 1e-300),
        "My": max(float(np.sum(abs_g * np.abs(z0))), 1e-300),
        "Theta": max(abs(df["Theta"].iloc[0]), float(np.sum(abs_g * np.abs(z0) ** 2)), 1e-300),
    }
    for col, s in scales.items():
        df[f"d{col}"] = (df[col] - df[col].iloc[0]) / s
    return df


def integrate_batch(
    configs: Sequence[VortexConfiguration],
    t_span: tuple[float, float],
    tol: float = 1e-10,
    max_workers: int = 4,
) -> list[Trajectory]:
    """Параллельное интегрирование независимых конфигураций; порядок результата совпадает с входом."""
    results: list[Trajectory | None] = [None] * len(configs)
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
        future_to_idx = {executor.submit(integrate_full, cfg, t_span, tol): i for i, cfg in enumerate(configs)}
        for future in as_completed(future_to_idx):
            idx = future_to_idx[future]
            try:
                results[idx] = future.result()
            except Exception as e:
                logger.error("Ошибка интегрирования конфигурации %d: %s", idx, e)
                raise
    return [r for r in results if r is not None]
