from __future__ import annotations

import logging
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import brentq

from scripts.core_model import Circulations, VortexConfiguration
from scripts.equilibria import (
    Equilibrium,
    EquilibriumKind,
    Stability,
    TrilinearPoint,
    all_equilibria,
    bifurcation_scan,
    cartesian_to_trilinear,
    characteristic_coefficients,
    collinear_equilibria,
    collinear_polynomial,
    collinear_stability,
    deltoid_quartic,
    discriminant_p3,
    equilateral_equilibria,
    reduced_jacobian,
    region_classify,
    region_grid,
    stability_boundary_value,
    symmetric_case_equilibria,
    symmetric_circulations,
    tri_stability,
    trilinear_to_cartesian,
)
from scripts.errors import ConfigError, PreconditionError
from scripts.poly_toolkit import roots
from scripts.reduction import quadric_residual, reduce_configuration, reduced_vector_field

SQRT3 = math.sqrt(3)


def _random_circulations(rng: np.random.Generator) -> Circulations:
    while True:
        g = rng.uniform(0.2, 1.5, 3) * rng.choice([-1.0, 1.0], 3)
        c = Circulations(*g.tolist())
        s = [g[0] + g[1], g[0] + g[2], g[1] + g[2]]
        gamma2 = g[0] * g[1] + g[0] * g[2] + g[1] * g[2]
        if abs(sum(g)) > 0.1 and min(abs(v) for v in s) > 0.1 and abs(gamma2) > 0.05:
            return c


def test_equilateral_examples(equal_thirds):
    plus, minus = equilateral_equilibria(equal_thirds, 1.0)
    assert plus.as_array() == pytest.approx([0.0, 3 * SQRT3 / 2, 0.0], abs=1e-14)
    assert minus.as_array() == pytest.approx([0.0, -3 * SQRT3 / 2, 0.0], abs=1e-14)

    plus, _ = equilateral_equilibria(Circulations.of([1, 1, 1]), 1.0)
    assert plus.as_array() == pytest.approx([0.0, SQRT3 / 2, 0.0], abs=1e-14)


def test_equilateral_points_are_stationary(rng):
    for _ in range(200):
        c = _random_circulations(rng)
        for s in equilateral_equilibria(c, 1.0):
            assert abs(quadric_residual(s)) <= 1e-10 * max(1.0, s.Y**2)
            field = np.array(reduced_vector_field(s))
            assert float(np.max(np.abs(field))) <= 1e-10 * max(1.0, abs(s.Y), abs(s.Z))


def test_equilateral_requires_nonzero_gamma2(collapse_circulations):
    with pytest.raises(PreconditionError):
        equilateral_equilibria(collapse_circulations, 1.0)


def test_tri_stability_equal_thirds(equal_thirds):
    e = tri_stability(equal_thirds, 1.0)
    assert e.classification is Stability.CENTER
    assert e.kind is EquilibriumKind.EQUILATERAL
    assert abs(e.eigenvalues[1]) == pytest.approx(1 / 3, rel=1e-9)
    assert e.eigenvalues[1].real == pytest.approx(0.0, abs=1e-12)
    assert e.r == pytest.approx(1 / 9, rel=1e-9)
    assert e.r_closed_form == pytest.approx(1 / 9)


def test_tri_stability_saddle_outside_circle():
    c = Circulations(0.7, 0.7, -0.4)
    e = tri_stability(c, 1.0)
    assert e.classification is Stability.SADDLE
    assert e.r == pytest.approx(e.r_closed_form, rel=1e-8)


def test_tri_stability_matches_closed_form(rng):
    for _ in range(30):
        c = _random_circulations(rng)
        for theta in (1.0, -2.0):
            e = tri_stability(c, theta)
            assert e.r == pytest.approx(e.r_closed_form, rel=1e-7)


def test_jacobian_trace_and_finite_differences(rng, random_positions):
    step = 1e-6
    for _ in range(50):
        c = _random_circulations(rng)
        s = reduce_configuration(VortexConfiguration.of(random_positions(), c))
        m = reduced_jacobian(s)
        assert abs(np.trace(m)) <= 1e-12 * max(1.0, float(np.max(np.abs(m))))
        fd = np.empty((3, 3))
        for k in range(3):
            d = np.zeros(3)
            d[k] = step * max(1.0, abs(s.as_array()[k]))
            fd[:, k] = (
                np.array(reduced_vector_field(s.moved(s.as_array() + d)))
                - np.array(reduced_vector_field(s.moved(s.as_array() - d)))
            ) / (2 * d[k])
        assert np.allclose(m, fd, rtol=1e-5, atol=1e-6 * max(1.0, float(np.max(np.abs(m)))))


def test_characteristic_polynomial_at_equilibria(equal_thirds):
    for e in all_equilibria(equal_thirds, 1.0):
        trace, _, det = characteristic_coefficients(reduced_jacobian(e.state))
        assert abs(trace) < 1e-9
        assert abs(det) < 1e-9


def test_collinear_equal_thirds(equal_thirds):
    eqs = collinear_equilibria(equal_thirds, 1.0)
    assert [e.label for e in eqs] == ["C1", "C2", "C3"]
    pts = [e.state.as_array() for e in eqs]
    assert pts[0] == pytest.approx([9 / 4, 0.0, -1 / 2], abs=1e-10)
    assert pts[1] == pytest.approx([0.0, 0.0, 1.0], abs=1e-10)
    assert pts[2] == pytest.approx([-9 / 4, 0.0, -1 / 2], abs=1e-10)
    for e in eqs:
        assert e.classification is Stability.SADDLE
        assert e.lambda_squared == pytest.approx(1 / 3, rel=1e-8)
        assert float(np.max(np.abs(reduced_vector_field(e.state)))) < 1e-10
        assert abs(quadric_residual(e.state)) < 1e-10


def test_all_equilibria_equal_thirds(equal_thirds):
    eqs = all_equilibria(equal_thirds, 1.0)
    assert len(eqs) == 5
    kinds = [e.classification for e in eqs]
    assert kinds.count(Stability.SADDLE) == 3
    assert kinds.count(Stability.CENTER) == 2


def test_collinear_closed_form_at_e3():
    eqs = symmetric_case_equilibria(1 / 3, 1.0)
    e3 = next(e for e in eqs if e.label == "E3")
    assert e3.r_closed_form == pytest.approx(-1 / 3)
    assert e3.r == pytest.approx(-1 / 3, rel=1e-8)
    assert e3.classification is Stability.SADDLE


def test_collinear_stability_recomputes_from_state(equal_thirds):
    (c1, *_) = collinear_equilibria(equal_thirds, 1.0)
    bare = Equilibrium(c1.state, EquilibriumKind.COLLINEAR, label="C1")
    assert bare.classification is Stability.DEGENERATE
    done = collinear_stability(bare)
    assert done.classification is Stability.SADDLE
    assert done.lambda_squared == pytest.approx(1 / 3, rel=1e-8)

    tri = tri_stability(equal_thirds, 1.0)
    with pytest.raises(ConfigError):
        collinear_stability(tri)


def test_symmetric_pair_closed_form_is_reported_separately():
    # при Γ₃ = 1/3 все три коллинеарных равновесия переводятся друг в друга перестановкой
    eqs = {e.label: e for e in symmetric_case_equilibria(1 / 3, 1.0)}
    for label in ("E1", "E2"):
        assert eqs[label].r == pytest.approx(-1 / 3, rel=1e-8)
        assert eqs[label].classification is Stability.SADDLE
        assert eqs[label].r_closed_form == pytest.approx(1 / 3)


def test_point_j_single_collinear_center():
    c = Circulations.of([-2, -2, 5])
    eqs = collinear_equilibria(c, -1.0)
    assert len(eqs) == 1
    assert eqs[0].state.as_array() == pytest.approx([0.0, 0.0, -1.0], abs=1e-10)
    assert eqs[0].classification is Stability.CENTER
    assert tri_stability(c, -1.0).classification is Stability.SADDLE


def test_deltoid_quartic_value(equal_thirds):
    assert deltoid_quartic(equal_thirds) == pytest.approx(9.0)


def test_region_classify_examples():
    center = region_classify(TrilinearPoint(1 / 3, 1 / 3, 1 / 3))
    assert center.surface.value == "Spheroid"
    assert center.gamma2_sign == 1
    assert center.collinear_count == 3
    assert center.tri_stability is Stability.CENTER
    assert not center.boundary

    cusp = region_classify(TrilinearPoint(4 / 3, 4 / 3, -5 / 3))
    assert cusp.boundary
    assert cusp.deltoid_value == pytest.approx(0.0, abs=1e-9)

    outside = region_classify(TrilinearPoint(2.0, 2.0, -3.0))
    assert outside.surface.value == "Hyperboloid"
    assert outside.collinear_count == 1
    assert outside.tri_stability is Stability.SADDLE
    assert outside.deltoid_value == pytest.approx(-16.0)


def test_collinear_count_follows_deltoid(rng):
    checked = 0
    while checked < 40:
        num = rng.integers(-150, 151, 2)
        e1, e2 = Fraction(int(num[0]), 60), Fraction(int(num[1]), 60)
        e3 = 1 - e1 - e2
        if 0 in (e1, e2, e3) or 0 in (e1 + e2, e1 + e3, e2 + e3) or e1 == e2:
            continue
        c = Circulations(e1, e2, e3)
        g2 = e1 * e2 + e1 * e3 + e2 * e3
        g3 = e1 * e2 * e3
        margin = abs(32 * g2) + abs(36 * g3) + abs(3 * g2 * g2)
        rep = region_classify(TrilinearPoint(float(e1), float(e2), float(e3)))
        if abs(rep.deltoid_value) < 1e-3 * float(margin) or g2 == 0:
            continue
        p3 = collinear_polynomial(c, 1)
        if p3.degree() != 3:
            continue
        real = [z for z in roots(p3) if abs(z.imag) <= 1e-8 * max(1.0, abs(z))]
        assert len(real) == rep.collinear_count
        checked += 1


def test_discriminant_sign_matches_reference(rng):
    seen = 0
    while seen < 10:
        g = [Fraction(int(v), 12) for v in rng.integers(-18, 19, 3)]
        if 0 in (*g, g[0] + g[1], g[0] + g[2], g[1] + g[2], sum(g)) or g[0] == g[1]:
            continue
        if collinear_polynomial(Circulations(*g), 1).degree() != 3:
            continue
        rep = discriminant_p3(Circulations(*g), 1.0)
        if rep.reference == 0:
            continue
        assert np.sign(rep.value) == np.sign(rep.reference)
        seen += 1


def test_discriminant_vanishes_on_deltoid():
    def circulations(b: float) -> Circulations:
        return Circulations(0.9, b, 0.1 - b)

    b0 = brentq(lambda b: deltoid_quartic(circulations(b)), -1.2, -1.0, xtol=1e-16)
    on = discriminant_p3(circulations(b0), 1.0).scaled
    inside = discriminant_p3(circulations(-0.9), 1.0).scaled
    assert abs(on) <= 1e-8 * abs(inside)


def test_symmetric_pair_has_double_root_but_three_equilibria(equal_thirds):
    assert discriminant_p3(equal_thirds, 1.0).value == 0
    assert len(collinear_equilibria(equal_thirds, 1.0)) == 3


def test_trilinear_mapping(rng):
    assert trilinear_to_cartesian(TrilinearPoint(1 / 3, 1 / 3, 1 / 3)) == pytest.approx((0.0, 0.0), abs=1e-15)
    assert trilinear_to_cartesian(TrilinearPoint(0.0, 0.0, 1.0)) == pytest.approx((0.0, 1.0))
    for _ in range(1000):
        a, b = rng.uniform(-2, 2, 2)
        p = TrilinearPoint(a, b, 1 - a - b)
        q = cartesian_to_trilinear(*trilinear_to_cartesian(p))
        assert (q.eta1, q.eta2, q.eta3) == pytest.approx((p.eta1, p.eta2, p.eta3), abs=1e-13)


def test_region_grid_counts():
    df = region_grid(step=0.25, extent=1.0)
    assert set(df["collinear_count"]) <= {1, 3}
    inside = df[df["deltoid"] > 0]
    assert (inside["collinear_count"] == 3).all()
    assert ((df["tri_stability"] == "Center") == (df["gamma2_sign"] > 0)).all()


def test_symmetric_case_equal_thirds():
    eqs = {e.label: e.state.as_array() for e in symmetric_case_equilibria(1 / 3, 1.0)}
    assert set(eqs) == {"E1", "E2", "E3"}
    assert eqs["E3"] == pytest.approx([0.0, 0.0, 1.0])
    assert eqs["E1"] == pytest.approx([9 / 4, 0.0, -1 / 2])
    assert eqs["E2"] == pytest.approx([-9 / 4, 0.0, -1 / 2])


def test_symmetric_case_windows():
    assert [e.label for e in symmetric_case_equilibria(-2.0, 1.0)] == ["E3"]
    assert symmetric_case_equilibria(-2.0, -1.0) == []

    assert {e.label for e in symmetric_case_equilibria(-1.2, 1.0)} >= {"E1", "E2"}
    assert not {e.label for e in symmetric_case_equilibria(-1.2, -1.0)} & {"E1", "E2"}

    assert {e.label for e in symmetric_case_equilibria(-0.5, -1.0)} >= {"E1", "E2"}
    assert not {e.label for e in symmetric_case_equilibria(-0.5, 1.0)} & {"E1", "E2"}


def test_symmetric_family_rejects_degenerate_values():
    for g3 in (0.0, 1.0, -1.0):
        with pytest.raises(PreconditionError):
            symmetric_circulations(g3)


def test_triangular_flip_at_circle():
    assert tri_stability(symmetric_circulations(-0.3), 1.0).classification is Stability.CENTER
    assert tri_stability(symmetric_circulations(-0.4), 1.0).classification is Stability.SADDLE


def test_bifurcation_scan_warns_on_excluded_points(caplog):
    with caplog.at_level(logging.WARNING, logger="scripts.equilibria"):
        df = bifurcation_scan([0.0, 1.0, -1.0, 1 / 3], (1.0,), max_workers=1)
    assert set(df["Gamma3"]) == {1 / 3}
    skipped = [r for r in caplog.records if r.levelno == logging.WARNING and "пропущено" in r.getMessage()]
    assert len(skipped) == 3


def test_bifurcation_scan_small_grid():
    df = bifurcation_scan([-1.2, -0.5, 0.0, 1 / 3, 1.0], max_workers=2)
    assert len(df) == 3 * 2 * 8
    e1 = df[(df["branch"] == "E1") & (df["Gamma3"] == -1.2)].set_index("Theta")
    assert bool(e1.loc[1.0, "exists"])
    assert not bool(e1.loc[-1.0, "exists"])
    e3 = df[(df["branch"] == "E3") & (df["Gamma3"] == 1 / 3) & (df["Theta"] == 1.0)].iloc[0]
    assert e3["stability"] == "Saddle"
    assert e3["Z"] == pytest.approx(1.0)


def test_stability_boundary_vanishes_on_factor_curves():
    third = Fraction(1, 3)
    circle = Circulations(2 * third, 2 * third, -third)
    cusp = Circulations(4 * third, 4 * third, -5 * third)
    pair_sum = Circulations.of([1, 1, -1])
    for c in (circle, cusp, pair_sum):
        rep = stability_boundary_value(c, 1.0)
        assert rep.value == 0
        assert rep.prefactor == 0


def test_stability_boundary_requires_theta():
    with pytest.raises(PreconditionError):
        stability_boundary_value(Circulations.of([1, 2, 3]), 0.0)
