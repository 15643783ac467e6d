from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core_model import Circulations, symmetric_invariants
from .errors import PreconditionError
from .reduction import (
    ReducedState,
    integrate_reduced,
    reduced_hamiltonian,
    reduced_vector_field,
    reduction_order,
    sheet_sign,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class CollapseReport:
    theta0: float
    r0: float
    dr_dt_field: float
    dr_dt_formula: float | None
    predicted_time: float | None
    integrated_time: float | None
    relative_error: float | None
    h_formula_spread: float | None
    status: str


def _is_symmetric_collapse(c: Circulations) -> bool:
    g1, g2, g3 = c.as_floats()
    return math.isclose(g1, 2 / 3, rel_tol=1e-12) and math.isclose(g2, 2 / 3, rel_tol=1e-12) and math.isclose(
        g3, -1 / 3, rel_tol=1e-12
    )


def cone_state(c: Circulations, r: float, angle: float) -> ReducedState:
    """Точка конуса Θ = 0 с полярными координатами (r, θ) в плоскости (X, Y)."""
    ordered, labels = reduction_order(c)
    inv = symmetric_invariants(ordered)
    ratio = -4 * float(inv.gamma3) / float(inv.gamma1)
    if ratio <= 0:
        raise PreconditionError("Конус Θ = 0 существует только при γ₃/γ₁ < 0")
    z = sheet_sign(ordered) * math.sqrt(ratio) * r
    return ReducedState(r * math.cos(angle), r * math.sin(angle), z, 0.0, ordered, labels)


def radial_speed_formula(angle: float) -> float:
    """dr/dt = 2√3·sin2θ/(3cos2θ − 5) для Γ = (2/3, 2/3, −1/3)."""
    return 2 * math.sqrt(3) * math.sin(2 * angle) / (3 * math.cos(2 * angle) - 5)


def level_formula(X: float, Y: float) -> float:
    """h − (1/9)·log((X² + 4Y²)/(X² + Y²)) постоянно на конусе для Γ = (2/3, 2/3, −1/3)."""
    return math.log((X * X + 4 * Y * Y) / (X * X + Y * Y)) / 9


def collapse_analysis(
    c: Circulations, angle: float, r0: float = 1.0, tol: float = 1e-10, n_level_samples: int = 16
) -> CollapseReport:
    """
    Автомодельная эволюция на конусе Θ = 0 при γ₂ = 0: траектории — лучи, r меняется
    с постоянной скоростью, и при dr/dt < 0 коллапс наступает за время r₀/|dr/dt|.
    """
    inv = symmetric_invariants(c)
    g = c.as_floats()
    if abs(float(inv.gamma2)) > 1e-12 * max(abs(x) for x in g) ** 2:
        raise PreconditionError(f"Коллапс требует γ₂ = 0, получено γ₂ = {float(inv.gamma2):.3e}")
    if r0 <= 0:
        raise PreconditionError("r₀ должен быть положительным")

    s = cone_state(c, r0, angle)
    vx, vy, _ = reduced_vector_field(s)
    dr_dt = (s.X * vx + s.Y * vy) / r0
    symmetric = _is_symmetric_collapse(c)
    formula = radial_speed_formula(angle) if symmetric else None

    spread = None
    if symmetric:
        values = []
        for a in np.linspace(0.1, math.pi - 0.1, n_level_samples):
            p = cone_state(c, r0, float(a))
            values.append(reduced_hamiltonian(p) - level_formula(p.X, p.Y))
        spread = float(np.ptp(values))

    if dr_dt > -1e-12:
        logger.info("θ=%.4f: dr/dt=%.6g, коллапса нет (расширение или покой)", angle, dr_dt)
        return CollapseReport(angle, r0, dr_dt, formula, None, None, None, spread, "expanding")

    predicted = -r0 / dr_dt
    traj = integrate_reduced(s, (0.0, 2 * predicted), tol)
    integrated = float(traj.times[-1]) if traj.status == "near_singularity" else None
    rel = None if integrated is None else abs(integrated - predicted) / predicted
    status = "collapse" if integrated is not None else "no_collapse"
    logger.info(
        "θ=%.4f: предсказанное время коллапса %.6g, интегрирование %s", angle, predicted, integrated
    )
    return CollapseReport(angle, r0, dr_dt, formula, predicted, integrated, rel, spread, status)
