from __future__ import annotations

from fractions import Fraction

import pytest

from scripts.core_model import Circulations
from scripts.equilibria import EquilibriumKind, Stability, symmetric_circulations
from scripts.errors import ConfigError
from scripts.portrait import (
    OrbitKind,
    PortraitSpec,
    Projection,
    portrait_frame,
    portrait_summary,
    sample_portrait,
)
from scripts.reduction import quadric_residual, reduced_hamiltonian, surface_scale


@pytest.fixture(scope="module")
def sphere_portrait():
    third = Circulations.of([Fraction(1, 3)] * 3)
    return sample_portrait(PortraitSpec(third, 1.0, orbit_count=10, max_workers=4))


def test_equal_thirds_structure(sphere_portrait):
    counts = sphere_portrait.counts()
    assert counts["equilibria"] == 5
    assert counts["singularities"] == 3
    assert counts["heteroclinic"] == 6
    assert counts["homoclinic"] == 0
    assert counts["periodic_families"] == 5
    assert sphere_portrait.projection is Projection.SPHERE_FRONT_BACK


def test_heteroclinic_orbits_share_level(sphere_portrait):
    by_label = {e.label: e for e in sphere_portrait.equilibria}
    for curve in sphere_portrait.curves:
        if curve.kind is not OrbitKind.HETEROCLINIC:
            continue
        assert curve.target != curve.source
        target = by_label[curve.target]
        assert reduced_hamiltonian(target.state) == pytest.approx(curve.h_level, abs=1e-9)


def test_curves_stay_on_surface(sphere_portrait):
    base = sphere_portrait.equilibria[0].state
    for curve in sphere_portrait.curves:
        assert curve.samples.shape[1] == 3
        for row in curve.samples:
            s = base.moved(row)
            assert abs(quadric_residual(s)) <= 1e-6 * surface_scale(s) ** 2


def test_portrait_frame_and_summary(sphere_portrait):
    df = portrait_frame(sphere_portrait)
    assert list(df.columns) == ["curve", "kind", "source", "target", "X", "Y", "Z", "h"]
    assert set(df["kind"]) <= {k.value for k in OrbitKind}
    summary = portrait_summary(sphere_portrait)
    assert summary["surface"] == "Spheroid"
    assert summary["counts"] == sphere_portrait.counts()
    assert len(summary["equilibria"]) == 5


def test_single_collinear_center():
    spec = PortraitSpec(Circulations.of([-2, -2, 5]), -1.0, orbit_count=2, separatrices=True)
    portrait = sample_portrait(spec)
    assert len(portrait.equilibria) == 3
    (center,) = [e for e in portrait.equilibria if e.kind is EquilibriumKind.COLLINEAR]
    assert center.classification is Stability.CENTER
    triangles = [e for e in portrait.equilibria if e.kind is EquilibriumKind.EQUILATERAL]
    assert {e.label for e in triangles} == {"Etri+", "Etri-"}
    assert all(e.classification is Stability.SADDLE for e in triangles)

    counts = portrait.counts()
    assert counts["heteroclinic"] == 4
    assert counts["homoclinic"] == 0
    for curve in portrait.curves:
        if curve.kind is OrbitKind.HETEROCLINIC:
            assert {curve.source, curve.target} == {"Etri+", "Etri-"}


def test_periodic_family_per_center_and_singularity(sphere_portrait):
    centers = {e.label for e in sphere_portrait.equilibria if e.classification is Stability.CENTER}
    sings = {sp.label for sp in sphere_portrait.singularities}
    families = {c.source for c in sphere_portrait.curves if c.kind is OrbitKind.PERIODIC}
    assert families == centers | sings
    assert "S12" in families


# точки оси симметрии Γ₁ = Γ₂ = (1 − Γ₃)/2: (Γ₃, Θ, равновесий, седел, центров, сингулярностей)
SYMMETRIC_POINTS = [
    (Fraction(-17, 3), 1.0, 1, 0, 1, 0),
    (Fraction(-17, 3), -1.0, 2, 2, 0, 3),
    (Fraction(-3, 2), 1.0, 3, None, None, 0),
    (Fraction(-3, 2), -1.0, 2, 2, 0, 3),
    (Fraction(-1, 2), 1.0, 1, 1, 0, 2),
    (Fraction(-1, 2), -1.0, 4, 2, 2, 1),
    (Fraction(-1, 3), 1.0, 1, 1, 0, 2),
    (Fraction(-1, 3), -1.0, 0, 0, 0, 1),
    (Fraction(-1, 9), 1.0, 5, None, None, 2),
    (Fraction(-1, 9), -1.0, 0, 0, 0, 1),
    (Fraction(1, 15), 1.0, 5, 3, 2, 3),
    (Fraction(4, 5), 1.0, 5, None, None, 3),
]


@pytest.mark.parametrize(("gamma3", "theta", "n_eq", "n_saddle", "n_center", "n_sing"), SYMMETRIC_POINTS)
def test_symmetric_family_structure(gamma3, theta, n_eq, n_saddle, n_center, n_sing):
    spec = PortraitSpec(symmetric_circulations(gamma3), theta, orbit_count=0, separatrices=False)
    portrait = sample_portrait(spec)
    counts = portrait.counts()
    assert counts["equilibria"] == n_eq
    assert counts["singularities"] == n_sing
    kinds = [e.classification for e in portrait.equilibria]
    if n_saddle is not None:
        assert kinds.count(Stability.SADDLE) == n_saddle
        assert kinds.count(Stability.CENTER) == n_center


def test_homoclinic_pair_inside_spheroid_region():
    spec = PortraitSpec(symmetric_circulations(Fraction(1, 15)), 1.0, orbit_count=0, separatrices=True)
    counts = sample_portrait(spec).counts()
    assert counts["homoclinic"] == 2
    assert counts["heteroclinic"] == 4


def test_cone_carries_singular_line():
    spec = PortraitSpec(Circulations.of([1, 1, -1]), 0.0, orbit_count=0, separatrices=False)
    portrait = sample_portrait(spec)
    assert portrait.singular_line
    assert portrait.projection is Projection.PLANE_XY
    assert portrait_frame(portrait).empty


def test_from_options():
    c = Circulations.of([1, 1, 1])
    spec = PortraitSpec.from_options(c, 1.0, {"orbit_count": 3, "projection": "PlaneXY"})
    assert spec.orbit_count == 3
    assert spec.projection is Projection.PLANE_XY
    with pytest.raises(ConfigError):
        PortraitSpec.from_options(c, 1.0, {"orbits": 3})


@pytest.mark.parametrize(
    "options",
    [{"orbit_count": -1}, {"eps": 0.0}, {"eps": 0.5}, {"zoom": 0.0}],
)
def test_spec_rejects_bad_values(options):
    with pytest.raises(ConfigError):
        PortraitSpec.from_options(Circulations.of([1, 1, 1]), 1.0, options)
