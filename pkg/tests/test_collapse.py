from __future__ import annotations

import math

import pytest

from scripts.core_model import Circulations
from scripts.errors import PreconditionError
from scripts.reduction import reduced_hamiltonian
from scripts.tool_collapse import (
    collapse_analysis,
    cone_state,
    level_formula,
    radial_speed_formula,
)


def test_radial_speed_formula_values():
    assert radial_speed_formula(math.pi / 4) == pytest.approx(-2 * math.sqrt(3) / 5)
    assert radial_speed_formula(0.0) == 0.0
    assert radial_speed_formula(-math.pi / 4) == pytest.approx(2 * math.sqrt(3) / 5)


def test_cone_state_lies_on_cone(collapse_circulations):
    s = cone_state(collapse_circulations, 2.0, 0.7)
    assert s.Theta == 0.0
    assert math.hypot(s.X, s.Y) == pytest.approx(2.0)


def test_collapse_at_quarter_angle(collapse_circulations):
    report = collapse_analysis(collapse_circulations, math.pi / 4)
    assert report.dr_dt_field == pytest.approx(-2 * math.sqrt(3) / 5, abs=1e-10)
    assert report.dr_dt_formula == pytest.approx(report.dr_dt_field, abs=1e-10)
    assert report.status == "collapse"
    assert report.predicted_time == pytest.approx(5 / (2 * math.sqrt(3)))
    assert report.relative_error is not None
    assert report.relative_error < 0.01


def test_field_speed_follows_formula_over_angles(collapse_circulations):
    for angle in (0.2, 0.9, 1.3, 2.1, 2.8):
        report = collapse_analysis(collapse_circulations, angle)
        assert report.dr_dt_field == pytest.approx(radial_speed_formula(angle), abs=1e-10)


def test_zero_angle_does_not_collapse(collapse_circulations):
    report = collapse_analysis(collapse_circulations, 0.0)
    assert report.dr_dt_field == pytest.approx(0.0, abs=1e-12)
    assert report.status in {"expanding", "no_collapse"}
    assert report.predicted_time is None or report.integrated_time is None


def test_level_formula_differs_from_h_by_constant(collapse_circulations):
    report = collapse_analysis(collapse_circulations, math.pi / 4, n_level_samples=24)
    assert report.h_formula_spread is not None
    assert report.h_formula_spread < 1e-10

    a = cone_state(collapse_circulations, 1.0, 0.4)
    b = cone_state(collapse_circulations, 3.0, 0.4)
    assert reduced_hamiltonian(a) - level_formula(a.X, a.Y) == pytest.approx(
        reduced_hamiltonian(b) - level_formula(b.X, b.Y), abs=1e-12
    )


def test_requires_vanishing_gamma2():
    with pytest.raises(PreconditionError):
        collapse_analysis(Circulations.of([1, 1, 1]), math.pi / 4)


def test_rejects_nonpositive_radius(collapse_circulations):
    with pytest.raises(PreconditionError):
        collapse_analysis(collapse_circulations, math.pi / 4, r0=0.0)
