from __future__ import annotations

import cmath
import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from sympy import Poly
from tqdm import tqdm

from .core_model import Circulations, symmetric_invariants
from .errors import ConfigError, DegenerateEliminationError, PreconditionError, SingularityError
from .poly_toolkit import (
    bivariate_variables,
    discriminant,
    eliminate_three,
    linear,
    numeric,
    resultant_in,
    roots,
    univariate,
)
from .reduction import (
    PhaseSurface,
    ReducedState,
    is_admissible,
    log_forms,
    pairwise_distances,
    reduced_gradient,
    reduced_hessian,
    reduction_order,
    singularities,
)

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
VERTICES = ((-SQRT3 / 2, -0.5), (SQRT3 / 2, -0.5), (0.0, 1.0))


class Stability(str, Enum):
    CENTER = "Center"
    SADDLE = "Saddle"
    DEGENERATE = "Degenerate"


class EquilibriumKind(str, Enum):
    EQUILATERAL = "Equilateral"
    COLLINEAR = "Collinear"


@dataclass(frozen=True, slots=True)
class Equilibrium:
    state: ReducedState
    kind: EquilibriumKind
    label: str = ""
    eigenvalues: tuple[complex, complex, complex] = (0j, 0j, 0j)
    classification: Stability = Stability.DEGENERATE
    r: float = 0.0
    r_closed_form: float | None = None

    @property
    def lambda_squared(self) -> float:
        return -self.r


@dataclass(frozen=True, slots=True)
class TrilinearPoint:
    eta1: float
    eta2: float
    eta3: float

    def __post_init__(self) -> None:
        total = self.eta1 + self.eta2 + self.eta3
        if abs(total - 1) > 1e-12 * max(1.0, abs(self.eta1) + abs(self.eta2) + abs(self.eta3)):
            raise ConfigError(f"Трилинейные координаты должны давать в сумме 1, получено {total}")

    def circulations(self) -> Circulations:
        return Circulations(self.eta1, self.eta2, self.eta3)


@dataclass(frozen=True, slots=True)
class RegionReport:
    surface: PhaseSurface
    gamma2_sign: int
    deltoid_value: float
    collinear_count: int
    tri_stability: Stability
    boundary: bool
    factors: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class DiscriminantReport:
    value: float
    scaled: float
    reference: float
    factors: dict[str, float]


@dataclass(frozen=True, slots=True)
class BoundaryReport:
    value: float
    elimination: float | None
    prefactor: float
    factors: dict[str, float]


# --- Якобиан и классификация ---


def reduced_jacobian(s: ReducedState) -> NDArray[np.float64]:
    hx, hz = reduced_gradient(s)
    hxx, hxz, hzz = reduced_hessian(s)
    inv = symmetric_invariants(s.circulations)
    k = float(inv.gamma1) / float(inv.gamma3)
    X, Y, Z = s.X, s.Y, s.Z
    return np.array(
        [
            [-4 * hxz * Y, -4 * hz, -4 * hzz * Y],
            [-k * hxx * Z + 4 * (hxz * X + hz), 0.0, -k * (hx + hxz * Z) + 4 * hzz * X],
            [4 * hxx * Y, 4 * hx, 4 * hxz * Y],
        ]
    )


def characteristic_coefficients(m: NDArray[np.float64]) -> tuple[float, float, float]:
    """χ(λ) = −λ³ + c₂λ² − c₁λ + c₀: возвращает (c₂, c₁, c₀) = (след, сумма главных миноров, det)."""
    minors = (
        m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
        + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]
    )
    return float(np.trace(m)), float(minors), float(np.linalg.det(m))


def _classify(m: NDArray[np.float64]) -> tuple[tuple[complex, complex, complex], Stability, float]:
    _, minors, _ = characteristic_coefficients(m)
    lam2 = -minors
    tol = 1e-10 * max(1.0, float(np.sum(m * m)))
    if lam2 > tol:
        cls = Stability.SADDLE
    elif lam2 < -tol:
        cls = Stability.CENTER
    else:
        cls = Stability.DEGENERATE
    lam = cmath.sqrt(lam2)
    return (0j, lam, -lam), cls, -lam2


def _complete(e: Equilibrium) -> Equilibrium:
    eig, cls, r = _classify(reduced_jacobian(e.state))
    return replace(e, eigenvalues=eig, classification=cls, r=r)


# --- Равносторонние равновесия ---


def equilateral_equilibria(c: Circulations, Theta: float) -> tuple[ReducedState, ReducedState]:
    """Две точки E± = (Θ/γ₂)·((Γ₁−Γ₂)γ₁/(2(Γ₁+Γ₂)), ±√3γ₁/2, Γ₁Γ₂ − (Γ₁²+Γ₂²)Γ₃/(Γ₁+Γ₂))."""
    ordered, labels = reduction_order(c)
    g1, g2, g3 = ordered.as_floats()
    inv = symmetric_invariants(ordered)
    gamma1, gamma2 = float(inv.gamma1), float(inv.gamma2)
    if gamma2 == 0:
        raise PreconditionError("γ₂ = 0: равносторонние равновесия уходят на бесконечность")
    if Theta == 0:
        raise PreconditionError("Θ = 0: равносторонние равновесия совпадают с вершиной конуса")
    s12 = g1 + g2
    f = Theta / gamma2
    X = f * (g1 - g2) * gamma1 / (2 * s12)
    Y = f * SQRT3 * gamma1 / 2
    Z = f * (g1 * g2 - (g1 * g1 + g2 * g2) * g3 / s12)
    plus = ReducedState(X, Y, Z, Theta, ordered, labels)
    return plus, replace(plus, Y=-Y)


def tri_stability(c: Circulations, Theta: float, sign: int = 1) -> Equilibrium:
    plus, minus = equilateral_equilibria(c, Theta)
    state = plus if sign >= 0 else minus
    inv = symmetric_invariants(c)
    gamma1, gamma2 = float(inv.gamma1), float(inv.gamma2)
    e = Equilibrium(
        state=state,
        kind=EquilibriumKind.EQUILATERAL,
        label="Etri+" if sign >= 0 else "Etri-",
        r_closed_form=3 * gamma2**3 / (Theta**2 * gamma1**2),
    )
    return _complete(e)


# --- Коллинеарные равновесия ---


@dataclass(frozen=True, slots=True)
class CollinearSystem:
    """Многочлены от (x=Z, y=X) на экваторе Y = 0."""

    N: Poly
    Q: Poly
    PX: Poly
    PZ: Poly
    forms: tuple[Poly, Poly, Poly]
    singular_z: tuple[Fraction, ...]
    circulations: tuple[Fraction, Fraction, Fraction]
    theta: Fraction


def collinear_system(c: Circulations, Theta: float | Fraction) -> CollinearSystem:
    """
    N = 4γ₃·X·P_Z − γ₁·Z·A₁₂·P_X — числитель dY/dt при Y = 0;
    Q = 4γ₃X² + γ₁Z² − γ₁Θ² — квадрика при Y = 0.
    """
    ordered, _ = reduction_order(c)
    g = ordered.as_fractions()
    th = Fraction(Theta)
    inv = symmetric_invariants(Circulations(*g))
    gamma1, gamma3 = Fraction(inv.gamma1), Fraction(inv.gamma3)
    lf = log_forms(g)
    L = tuple(linear(f.az, f.ax, f.at * th) for f in lf)
    L12, L13, L23 = L
    PX = -(L23 * (lf[1].weight * lf[1].ax) + L13 * (lf[2].weight * lf[2].ax))
    PZ = -(
        L13 * L23 * (lf[0].weight * lf[0].az)
        + L12 * L23 * (lf[1].weight * lf[1].az)
        + L12 * L13 * (lf[2].weight * lf[2].az)
    )
    x_var, y_var = bivariate_variables()
    N = y_var * PZ * (4 * gamma3) - x_var * L12 * PX * gamma1
    Q = y_var * y_var * (4 * gamma3) + x_var * x_var * gamma1 - gamma1 * th * th

    sing_z: list[Fraction] = []
    for f in lf:
        # Sᵢⱼ: Aᵢⱼ = 0 на квадрике при Y = 0
        sp = singularities(ordered, float(th))[f"S{f.pair[0]}{f.pair[1]}"]
        if not sp.at_infinity:
            sing_z.append(_exact_singular_z(g, th, f.pair))
    return CollinearSystem(N, Q, PX, PZ, (L12, L13, L23), tuple(sing_z), g, th)


def _exact_singular_z(g: tuple[Fraction, Fraction, Fraction], th: Fraction, pair: tuple[int, int]) -> Fraction:
    g1, g2, g3 = g
    gamma1 = g1 + g2 + g3
    if pair == (1, 2):
        return -th
    if pair == (1, 3):
        return (gamma1 * g1 - g2 * g3) * th / ((g1 + g2) * (g1 + g3))
    return (gamma1 * g2 - g1 * g3) * th / ((g1 + g2) * (g2 + g3))


def _p3(system: CollinearSystem) -> Poly:
    """Результант по X с удалёнными множителями (Z − Zᵢⱼ) сингулярностей."""
    rho = resultant_in("y", system.N, system.Q)
    for z in system.singular_z:
        q, r = rho.div(univariate(-z, 1))
        if r.is_zero and not rho.is_zero:
            rho = q
        else:
            logger.debug("Множитель (Z − %s) не делит результант", z)
    return rho


def collinear_polynomial(c: Circulations, Theta: float | Fraction) -> Poly:
    return _p3(collinear_system(c, Theta))


NewtonFns = tuple[Callable[..., float], ...]


def _newton_functions(system: CollinearSystem) -> NewtonFns:
    """N, Q и их частные производные по (Z, X) как численные функции."""
    zs, xs = system.N.gens
    polys = (system.N, system.Q, system.N.diff(zs), system.N.diff(xs), system.Q.diff(zs), system.Q.diff(xs))
    return tuple(numeric(p) for p in polys)


def _newton_2d(fns: NewtonFns, z: float, x: float, scale: float, max_iter: int = 40) -> tuple[float, float]:
    n_fn, q_fn, nz, nx, qz, qx = fns
    for _ in range(max_iter):
        f = np.array([float(n_fn(z, x)), float(q_fn(z, x))])
        jac = np.array(
            [
                [float(nz(z, x)), float(nx(z, x))],
                [float(qz(z, x)), float(qx(z, x))],
            ]
        )
        if abs(np.linalg.det(jac)) < 1e-300:
            break
        step = np.linalg.solve(jac, f)
        z, x = z - float(step[0]), x - float(step[1])
        if float(np.max(np.abs(step))) <= 1e-15 * scale:
            break
    return z, x


def _field_residual(s: ReducedState) -> tuple[float, float]:
    hx, hz = reduced_gradient(s)
    inv = symmetric_invariants(s.circulations)
    k = float(inv.gamma1) / float(inv.gamma3)
    a, b = 4 * hz * s.X, k * hx * s.Z
    return abs(a - b), abs(a) + abs(b)


def collinear_equilibria(c: Circulations, Theta: float, *, admissible_only: bool = True) -> list[Equilibrium]:
    """
    Коллинеарные равновесия на Y = 0: корни кубики p₃, обратная подстановка X из квадрики,
    уточнение Ньютоном по (N, Q), отсев сингулярностей и проверка невязки поля.
    """
    if Theta == 0:
        logger.info("Θ = 0: на конусе коллинеарные равновесия не изолированы, список пуст")
        return []
    ordered, labels = reduction_order(c)
    system = collinear_system(ordered, Theta)
    p3 = _p3(system)
    if p3.is_zero:
        raise DegenerateEliminationError("Результант для коллинеарных равновесий тождественно равен нулю")
    if p3.degree() < 1:
        return []

    inv = symmetric_invariants(ordered)
    gamma1, gamma3 = float(inv.gamma1), float(inv.gamma3)
    scale = abs(Theta)
    fns = _newton_functions(system)
    found: list[ReducedState] = []
    for root in roots(p3):
        if abs(root.imag) > 1e-6 * max(scale, abs(root)):
            continue
        z0 = root.real
        x2 = gamma1 * (Theta**2 - z0**2) / (4 * gamma3)
        if x2 < -1e-8 * scale**2 * max(1.0, abs(gamma1 / gamma3)):
            continue
        x_abs = math.sqrt(max(x2, 0.0))
        for x0 in {x_abs, -x_abs}:
            z, x = _newton_2d(fns, z0, x0, scale)
            state = ReducedState(x, 0.0, z, Theta, ordered, labels)
            if not _accept(state, scale, admissible_only):
                continue
            if any(abs(o.X - x) + abs(o.Z - z) <= 1e-8 * scale for o in found):
                continue
            found.append(state)

    found.sort(key=lambda s: (-s.X, s.Z))
    out = [_complete(Equilibrium(s, EquilibriumKind.COLLINEAR, label=f"C{k}")) for k, s in enumerate(found, 1)]
    return [_attach_closed_form(e) for e in out]


def _accept(state: ReducedState, scale: float, admissible_only: bool) -> bool:
    d = pairwise_distances(state)
    if min(abs(v) for v in d.values()) <= 1e-9 * max(abs(v) for v in d.values()):
        return False
    try:
        res, mag = _field_residual(state)
    except SingularityError:
        return False
    if res > 1e-8 * max(mag, 1e-300) and res > 1e-10:
        logger.debug("Кандидат (%.6g, %.6g) отброшен: невязка %.3e", state.X, state.Z, res)
        return False
    quad = abs(state.Theta**2 - state.Z**2 - 4 * _ratio(state) * state.X**2)
    if quad > 1e-8 * scale**2:
        return False
    return not admissible_only or is_admissible(state)


def _ratio(s: ReducedState) -> float:
    inv = symmetric_invariants(s.circulations)
    return float(inv.gamma3) / float(inv.gamma1)


def collinear_stability(e: Equilibrium) -> Equilibrium:
    if e.kind is not EquilibriumKind.COLLINEAR:
        raise ConfigError("collinear_stability применим только к коллинеарным равновесиям")
    return _attach_closed_form(_complete(e))


def symmetric_r_values(Gamma3: float, Theta: float) -> tuple[float, float]:
    """(r(E₁,₂), r(E₃)) для Γ₁ = Γ₂ = (1−Γ₃)/2."""
    r12 = (Gamma3 - 1) ** 2 * (3 * Gamma3 + 1) ** 3 * (3 * Gamma3 + 5) / (64 * Theta**2)
    r3 = 3 * (Gamma3 - 1) ** 3 * (3 * Gamma3 + 5) / (16 * Theta**2)
    return r12, r3


def _attach_closed_form(e: Equilibrium) -> Equilibrium:
    g1, g2, g3 = e.state.circulations.as_floats()
    if g1 != g2 or abs(g1 + g2 + g3 - 1) > 1e-12:
        return e
    r12, r3 = symmetric_r_values(g3, e.state.Theta)
    on_axis = abs(e.state.X) <= 1e-9 * max(abs(e.state.Theta), 1e-300)
    return replace(e, r_closed_form=r3 if on_axis else r12)


def all_equilibria(c: Circulations, Theta: float) -> list[Equilibrium]:
    """Допустимые коллинеарные и равносторонние равновесия на листе Θ."""
    out = collinear_equilibria(c, Theta)
    inv = symmetric_invariants(c)
    if abs(float(inv.gamma2)) > 1e-12 and Theta != 0:
        for sign in (1, -1):
            e = tri_stability(c, Theta, sign)
            if is_admissible(e.state):
                out.append(e)
    return out


# --- Дискриминант и области параметров ---


def deltoid_quartic(c: Circulations) -> float:
    inv = symmetric_invariants(c)
    g1, g2, g3 = float(inv.gamma1), float(inv.gamma2), float(inv.gamma3)
    return 32 * g2 * g1 * g1 - 36 * g3 * g1 - 3 * g2 * g2


def _factor_scales(c: Circulations) -> dict[str, tuple[float, float]]:
    inv = symmetric_invariants(c)
    g1, g2, g3 = (float(v) for v in (inv.gamma1, inv.gamma2, inv.gamma3))
    G = c.as_floats()
    a = max(abs(x) for x in G)
    return {
        "gamma2": (g2, 3 * a * a),
        "deltoid": (deltoid_quartic(c), abs(32 * g2 * g1 * g1) + abs(36 * g3 * g1) + abs(3 * g2 * g2)),
        "sum12": (G[0] + G[1], 2 * a),
        "sum13": (G[0] + G[2], 2 * a),
        "sum23": (G[1] + G[2], 2 * a),
    }


def discriminant_p3(c: Circulations, Theta: float) -> DiscriminantReport:
    if Theta == 0:
        raise PreconditionError("Θ = 0: кубика p₃ вырождена")
    ordered, _ = reduction_order(c)
    p3 = collinear_polynomial(ordered, Theta)
    value = discriminant(p3.monic()) if p3.degree() >= 2 else Fraction(0)
    g1, g2, g3 = ordered.as_floats()
    inv = symmetric_invariants(ordered)
    gamma1, gamma2, gamma3 = float(inv.gamma1), float(inv.gamma2), float(inv.gamma3)
    factors = {
        "theta6": 64 * Theta**6,
        "diff12_sq": (g1 - g2) ** 2,
        "sum12_sq": (g1 + g2) ** 2,
        "gamma1_sq": gamma1**2,
        "gamma2_sq": gamma2**2,
        "gamma3_6": gamma3**6,
        "deltoid": deltoid_quartic(ordered),
    }
    reference = math.prod(factors.values())
    degree = max(p3.degree(), 1)
    return DiscriminantReport(
        value=float(value),
        scaled=float(value) / abs(Theta) ** (degree * (degree - 1)),
        reference=reference,
        factors=factors,
    )


def region_classify(p: TrilinearPoint, Theta: float = 1.0) -> RegionReport:
    for k, eta in enumerate((p.eta1, p.eta2, p.eta3), 1):
        if eta == 0:
            raise ConfigError(f"η{k} = 0: циркуляция должна быть ненулевой")
    c = p.circulations()
    inv = symmetric_invariants(c)
    gamma1, gamma2, gamma3 = float(inv.gamma1), float(inv.gamma2), float(inv.gamma3)
    if gamma3 / gamma1 > 0:
        surface = PhaseSurface.SPHEROID
    elif Theta == 0:
        surface = PhaseSurface.CONE
    else:
        surface = PhaseSurface.HYPERBOLOID
    scales = _factor_scales(c)
    boundary = any(abs(v) < 1e-12 * max(s, 1e-300) for v, s in scales.values())
    quartic = scales["deltoid"][0]
    return RegionReport(
        surface=surface,
        gamma2_sign=int(np.sign(gamma2)),
        deltoid_value=quartic,
        collinear_count=3 if quartic > 0 else 1,
        tri_stability=Stability.CENTER if gamma2 > 0 else Stability.SADDLE,
        boundary=boundary,
        factors={name: v for name, (v, _) in scales.items()},
    )


def trilinear_to_cartesian(p: TrilinearPoint) -> tuple[float, float]:
    etas = (p.eta1, p.eta2, p.eta3)
    return (
        sum(e * v[0] for e, v in zip(etas, VERTICES)),
        sum(e * v[1] for e, v in zip(etas, VERTICES)),
    )


def cartesian_to_trilinear(x: float, y: float) -> TrilinearPoint:
    a = np.array([[v[0] for v in VERTICES], [v[1] for v in VERTICES], [1.0, 1.0, 1.0]])
    eta = np.linalg.solve(a, np.array([x, y, 1.0]))
    return TrilinearPoint(float(eta[0]), float(eta[1]), float(eta[2]))


def region_grid(step: float = 0.05, extent: float = 2.0, Theta: float = 1.0) -> pd.DataFrame:
    """Классификация областей на квадратной сетке декартовой плоскости параметров."""
    if step <= 0:
        raise ConfigError("Шаг сетки должен быть положительным")
    axis = np.arange(-extent, extent + step / 2, step)
    rows = []
    for y in axis:
        for x in axis:
            p = cartesian_to_trilinear(float(x), float(y))
            if min(abs(p.eta1), abs(p.eta2), abs(p.eta3)) < 1e-9:
                continue
            rep = region_classify(p, Theta)
            rows.append(
                {
                    "x": float(x),
                    "y": float(y),
                    "eta1": p.eta1,
                    "eta2": p.eta2,
                    "eta3": p.eta3,
                    "surface": rep.surface.value,
                    "gamma2_sign": rep.gamma2_sign,
                    "deltoid": rep.deltoid_value,
                    "collinear_count": rep.collinear_count,
                    "tri_stability": rep.tri_stability.value,
                    "boundary": rep.boundary,
                }
            )
    return pd.DataFrame(rows)


# --- Граница устойчивости ---


def _stability_polynomial(system: CollinearSystem) -> Poly:
    """Числитель r = −λ² коллинеарного равновесия после умножения на L₁₂²L₁₃³L₂₃³ и γ₃."""
    g = system.circulations
    lf = log_forms(g)
    inv = symmetric_invariants(Circulations(*g))
    gamma1, gamma3 = Fraction(inv.gamma1), Fraction(inv.gamma3)
    L12, L13, L23 = system.forms
    x_var, y_var = bivariate_variables()
    w = [f.weight for f in lf]
    ax = [f.ax for f in lf]
    az = [f.az for f in lf]
    PXX = L23 * L23 * (w[1] * ax[1] ** 2) + L13 * L13 * (w[2] * ax[2] ** 2)
    PXZ = L23 * L23 * (w[1] * ax[1] * az[1]) + L13 * L13 * (w[2] * ax[2] * az[2])
    PZZ = (
        L13 * L13 * L23 * L23 * (w[0] * az[0] ** 2)
        + L12 * L12 * L23 * L23 * (w[1] * az[1] ** 2)
        + L12 * L12 * L13 * L13 * (w[2] * az[2] ** 2)
    )
    PX, PZ = system.PX, system.PZ
    b_num = -(PXX * x_var * L12 * gamma1) + (PXZ * y_var * L12 + PZ * L13 * L23) * (4 * gamma3)
    c_num = -((PX * L12 * L12 * L13 * L23 + PXZ * x_var * L12 * L12) * gamma1) + PZZ * y_var * (4 * gamma3)
    return PZ * b_num - PX * c_num


def _safe_float(v: Fraction) -> float:
    try:
        return float(v)
    except OverflowError:
        return math.copysign(math.inf, v)


def stability_boundary_value(c: Circulations, Theta: float) -> BoundaryReport:
    """
    Условие смены устойчивости коллинеарного равновесия: исключение X и Z из
    {квадрика, dY/dt = 0, r = 0}, умноженное на симметричные множители
    γ₁¹⁶γ₂⁴γ₃²⁴(Γ₁+Γ₂)²(Γ₁+Γ₃)²(Γ₂+Γ₃)²·(квартика дельтоида).
    Θ приводится к ±1: нули условия от |Θ| не зависят.
    """
    if Theta == 0:
        raise PreconditionError("Θ = 0: граница устойчивости не определена")
    inv = symmetric_invariants(c)
    for name, v in (("γ₁", inv.gamma1), ("γ₃", inv.gamma3)):
        if v == 0:
            raise PreconditionError(f"{name} = 0")
    g = c.as_fractions()
    gamma1, gamma2, gamma3 = (Fraction(v) for v in (inv.gamma1, inv.gamma2, inv.gamma3))
    quartic = 32 * gamma2 * gamma1**2 - 36 * gamma3 * gamma1 - 3 * gamma2**2
    factors = {
        "gamma1_16": gamma1**16,
        "gamma2_4": gamma2**4,
        "gamma3_24": gamma3**24,
        "sum12_sq": (g[0] + g[1]) ** 2,
        "sum13_sq": (g[0] + g[2]) ** 2,
        "sum23_sq": (g[1] + g[2]) ** 2,
        "deltoid": quartic,
    }
    prefactor = math.prod(factors.values(), start=Fraction(1))
    unit_theta = Fraction(1 if Theta > 0 else -1)

    elimination: Fraction | None
    try:
        system = collinear_system(c, unit_theta)
        R = _stability_polynomial(system)
        known = [univariate(-z, 1) for z in system.singular_z]
        elimination = Fraction(eliminate_three(system.N, system.Q, R, known_factors=known))
    except (DegenerateEliminationError, ConfigError) as e:
        if prefactor != 0:
            raise
        logger.info("Исключение не вычислено (%s), симметричный множитель равен нулю", e)
        elimination = None

    value = Fraction(0) if prefactor == 0 or elimination is None else prefactor * elimination
    return BoundaryReport(
        value=_safe_float(value),
        elimination=None if elimination is None else _safe_float(elimination),
        prefactor=_safe_float(prefactor),
        factors={k: _safe_float(v) for k, v in factors.items()},
    )


# --- Симметричный случай и скан ---


def symmetric_circulations(Gamma3: float) -> Circulations:
    if Gamma3 == 0 or abs(abs(Gamma3) - 1) < 1e-12:
        raise PreconditionError(f"Γ₃ = {Gamma3}: симметричное семейство требует Γ₃ ∉ {{0, ±1}}")
    g1 = (1 - Gamma3) / 2
    return Circulations(g1, g1, Gamma3)


def symmetric_case_equilibria(Gamma3: float, Theta: float) -> list[Equilibrium]:
    """
    E₃ = (0, 0, Θ) и, при −5/3 < Γ₃ < 1, пара E₁,₂ с
    Z = Θ(−3Γ₃² − 6Γ₃ + 1)/((1+Γ₃)(1+3Γ₃)) и X из квадрики. Возвращаются только допустимые на листе Θ.
    """
    c = symmetric_circulations(Gamma3)
    if Theta == 0:
        raise PreconditionError("Θ = 0: симметричные равновесия вырождаются в вершину конуса")
    inv = symmetric_invariants(c)
    gamma1, gamma3 = float(inv.gamma1), float(inv.gamma3)
    states: list[tuple[str, ReducedState]] = [("E3", ReducedState(0.0, 0.0, Theta, Theta, c))]
    den = (1 + Gamma3) * (1 + 3 * Gamma3)
    if -5 / 3 < Gamma3 < 1 and den != 0:
        Z = Theta * (-3 * Gamma3**2 - 6 * Gamma3 + 1) / den
        x2 = gamma1 * (Theta**2 - Z**2) / (4 * gamma3)
        if x2 >= 0:
            X = math.sqrt(x2)
            states.append(("E1", ReducedState(X, 0.0, Z, Theta, c)))
            states.append(("E2", ReducedState(-X, 0.0, Z, Theta, c)))
    out = []
    for label, s in states:
        if not is_admissible(s):
            logger.debug("Γ₃=%g, Θ=%g: %s недопустимо на этом листе", Gamma3, Theta, label)
            continue
        out.append(_attach_closed_form(_complete(Equilibrium(s, EquilibriumKind.COLLINEAR, label=label))))
    return out


SCAN_COLUMNS = ["Gamma3", "Theta", "branch", "X", "Y", "Z", "stability", "exists"]
_BRANCHES = ("E1", "E2", "E3", "Etri+", "Etri-", "S12", "S13", "S23")


def _scan_point(Gamma3: float, Theta: float) -> list[dict[str, object]]:
    rows: dict[str, dict[str, object]] = {
        b: {"Gamma3": Gamma3, "Theta": Theta, "branch": b, "X": math.nan, "Y": math.nan, "Z": math.nan,
            "stability": "", "exists": False}
        for b in _BRANCHES
    }

    def put(label: str, s: ReducedState, stability: str) -> None:
        rows[label].update({"X": s.X, "Y": s.Y, "Z": s.Z, "stability": stability, "exists": True})

    c = symmetric_circulations(Gamma3)
    for e in symmetric_case_equilibria(Gamma3, Theta):
        put(e.label, e.state, e.classification.value)
    if abs(float(symmetric_invariants(c).gamma2)) > 1e-12:
        for sign in (1, -1):
            e = tri_stability(c, Theta, sign)
            if is_admissible(e.state):
                put(e.label, e.state, e.classification.value)
    for label, sp in singularities(c, Theta).items():
        if sp.admissible and not sp.at_infinity:
            rows[label].update({"X": sp.X, "Y": 0.0, "Z": sp.Z, "stability": "Singular", "exists": True})
    return list(rows.values())


def bifurcation_scan(
    grid: Sequence[float],
    thetas: Sequence[float] = (-1.0, 1.0),
    max_workers: int = 4,
) -> pd.DataFrame:
    """Скан вдоль оси симметрии Γ₁ = Γ₂; строки для всех ветвей, включая отсутствующие (exists=False)."""
    tasks = []
    for g3 in grid:
        if abs(g3) < 1e-12 or abs(abs(g3) - 1) < 1e-12:
            logger.warning("Γ₃=%g пропущено: вне области определения", g3)
            continue
        tasks.extend((float(g3), float(th)) for th in thetas)

    rows: list[dict[str, object]] = []
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
        futures = {executor.submit(_scan_point, g3, th): (g3, th) for g3, th in tasks}
        for future in tqdm(as_completed(futures), total=len(futures), desc="Скан", leave=False):
            g3, th = futures[future]
            try:
                rows.extend(future.result())
            except Exception as e:
                logger.error("Ошибка в точке Γ₃=%g, Θ=%g: %s", g3, th, e)
                raise

    df = pd.DataFrame(rows, columns=SCAN_COLUMNS)
    return df.sort_values(["Gamma3", "Theta", "branch"], kind="stable").reset_index(drop=True)
