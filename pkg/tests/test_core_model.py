from __future__ import annotations

import cmath
import math
from fractions import Fraction

import numpy as np
import pytest

from scripts.core_model import (
    Circulations,
    VortexConfiguration,
    conserved_quantities,
    hamiltonian,
    integrate_batch,
    integrate_full,
    poisson_bracket,
    symmetric_invariants,
    vortex_velocities,
)
from scripts.errors import ConfigError, SingularityError
from scripts.reduction import reconstruct
from scripts.tool_collapse import cone_state


def test_symmetric_invariants_examples():
    inv = symmetric_invariants(Circulations.of([1, 1, 1]))
    assert (inv.gamma1, inv.gamma2, inv.gamma3) == (3, 3, 1)

    third = Fraction(1, 3)
    inv = symmetric_invariants(Circulations(third, third, third))
    assert (inv.gamma1, inv.gamma2, inv.gamma3) == (1, Fraction(1, 3), Fraction(1, 27))

    inv = symmetric_invariants(Circulations.of([2, 1, -3]))
    assert (inv.gamma1, inv.gamma2, inv.gamma3) == (0, -7, -6)


def test_symmetric_invariants_permutation():
    c = Circulations.of([Fraction(2, 5), -3, 7])
    base = symmetric_invariants(c)
    for labels in ((1, 0, 2), (2, 1, 0), (1, 2, 0)):
        assert symmetric_invariants(c.permuted(labels)) == base


def test_circulations_reject_zero():
    with pytest.raises(ConfigError):
        Circulations.of([1, 0, 2])


def test_configuration_length_mismatch():
    with pytest.raises(ConfigError):
        VortexConfiguration.of([0j, 1 + 0j], [1.0, 1.0, 1.0])


def test_velocities_simple_cases():
    assert vortex_velocities(VortexConfiguration.of([0.3 + 0.2j], [1.0]))[0] == 0

    v = vortex_velocities(VortexConfiguration.of([1 + 0j, -1 + 0j], [1.0, 1.0]))
    assert v[0] == pytest.approx(0.5j)
    assert v[1] == pytest.approx(-0.5j)

    v = vortex_velocities(VortexConfiguration.of([0j, -1j], [1.0, -1.0]))
    assert v[0] == pytest.approx(1.0)
    assert v[1] == pytest.approx(1.0)


def test_velocities_match_hamiltonian_gradient(random_positions):
    g = [0.7, -0.4, 1.3]
    step = 1e-6
    for _ in range(50):
        z = random_positions()
        cfg = VortexConfiguration.of(z, g)
        v = vortex_velocities(cfg)
        for j in range(3):
            dz = np.zeros(3, dtype=complex)
            dz[j] = step
            hx = (hamiltonian(cfg.with_positions(z + dz)) - hamiltonian(cfg.with_positions(z - dz))) / (2 * step)
            hy = (hamiltonian(cfg.with_positions(z + 1j * dz)) - hamiltonian(cfg.with_positions(z - 1j * dz))) / (
                2 * step
            )
            expected = complex(hy, -hx) / g[j]
            assert abs(v[j] - expected) <= 1e-6 * max(1.0, abs(v[j]))


def test_coincident_positions_raise():
    cfg = VortexConfiguration.of([0j, 1 + 0j, 0j], [1.0, 1.0, 1.0])
    with pytest.raises(SingularityError) as exc:
        vortex_velocities(cfg)
    assert exc.value.pair == (1, 3)
    with pytest.raises(SingularityError):
        hamiltonian(cfg)


def test_hamiltonian_examples():
    assert hamiltonian(VortexConfiguration.of([0j, 1 + 0j], [1.0, 1.0])) == pytest.approx(0.0, abs=1e-15)
    assert hamiltonian(VortexConfiguration.of([0j, complex(math.e)], [1.0, 1.0])) == pytest.approx(-1.0)

    s = 1.7
    tri = [s * cmath.exp(2j * math.pi * k / 3) / math.sqrt(3) for k in range(3)]
    assert hamiltonian(VortexConfiguration.of(tri, [1.0, 1.0, 1.0])) == pytest.approx(-3 * math.log(s))


def test_hamiltonian_euclidean_invariance(random_positions):
    g = [1.0, 2.0, -0.5]
    for _ in range(20):
        z = random_positions()
        base = hamiltonian(VortexConfiguration.of(z, g))
        moved = cmath.exp(0.83j) * z + (1.5 - 2.0j)
        assert hamiltonian(VortexConfiguration.of(moved, g)) == pytest.approx(base, abs=1e-12)


def test_conserved_quantities_examples():
    q = conserved_quantities(VortexConfiguration.of([0j, 2 + 0j, 1 + 0j], [1.0, 1.0, 1.0]))
    assert q.M == pytest.approx(3.0)
    assert q.Theta == pytest.approx(5.0)
    assert q.z0 == pytest.approx(1.0)

    dipole = conserved_quantities(VortexConfiguration.of([0j, 1j], [1.0, -1.0]))
    assert dipole.z0 is None


def test_poisson_bracket_gives_velocities(random_positions):
    g = [1.0, 0.5, -0.8]
    cfg = VortexConfiguration.of(random_positions(), g)
    v = vortex_velocities(cfg)
    for j in range(3):
        xj = poisson_bracket(lambda c, j=j: float(c.positions[j].real), hamiltonian, cfg)
        yj = poisson_bracket(lambda c, j=j: float(c.positions[j].imag), hamiltonian, cfg)
        assert abs(complex(xj, yj) - v[j]) <= 1e-6 * max(1.0, abs(v[j]))


def test_poisson_bracket_of_invariants_vanishes(random_positions):
    cfg = VortexConfiguration.of(random_positions(), [1.0, 2.0, 3.0])

    def theta(c: VortexConfiguration) -> float:
        return conserved_quantities(c).Theta

    def mx(c: VortexConfiguration) -> float:
        return conserved_quantities(c).M.real

    assert abs(poisson_bracket(theta, hamiltonian, cfg)) < 1e-6
    assert abs(poisson_bracket(mx, hamiltonian, cfg)) < 1e-6


def test_corotating_pair_period():
    cfg = VortexConfiguration.of([1 + 0j, -1 + 0j], [1.0, 1.0])
    traj = integrate_full(cfg, (0.0, 4 * math.pi), 1e-10, t_eval=np.array([0.0, 2 * math.pi, 4 * math.pi]))
    assert traj.status == "completed"
    start, half, end = traj.states
    assert np.max(np.abs(end - start)) < 1e-6
    assert half[0] == pytest.approx(-1.0, abs=1e-6)


def test_equilateral_triangle_is_rigid():
    tri = [cmath.exp(2j * math.pi * k / 3) for k in range(3)]
    traj = integrate_full(VortexConfiguration.of(tri, [1.0, 1.0, 1.0]), (0.0, 20.0), 1e-10)
    z = traj.states[:, 0::2] + 1j * traj.states[:, 1::2]
    d = np.abs(z[:, [0, 0, 1]] - z[:, [1, 2, 2]])
    assert np.max(np.abs(d - math.sqrt(3))) < 1e-8


def test_conservation_along_trajectory():
    cfg = VortexConfiguration.of([0j, 1.3 + 0j, 0.4 + 1.1j], [1 / 3, 1 / 3, 1 / 3])
    traj = integrate_full(cfg, (0.0, 20.0), 1e-10)
    for col in ("dH", "dMx", "dMy", "dTheta"):
        assert traj.max_drift(col) < 1e-8


def test_conservation_from_random_bounded_data(rng):
    for _ in range(5):
        while True:
            z = rng.uniform(-1.5, 1.5, 3) + 1j * rng.uniform(-1.5, 1.5, 3)
            if np.min(np.abs(z[[0, 0, 1]] - z[[1, 2, 2]])) > 0.5:
                break
        cfg = VortexConfiguration.of(z.tolist(), [1 / 3, 1 / 3, 1 / 3])
        traj = integrate_full(cfg, (0.0, 100.0), 1e-10)
        assert traj.status == "completed"
        for col in ("dH", "dMx", "dMy", "dTheta"):
            assert traj.max_drift(col) <= 1e-8


def test_trajectory_frame_columns():
    cfg = VortexConfiguration.of([0j, 1 + 0j, 0.5 + 1j], [1.0, 2.0, 3.0])
    traj = integrate_full(cfg, (0.0, 1.0), 1e-9, t_eval=np.linspace(0.0, 1.0, 11))
    df = traj.to_frame()
    assert list(df.columns) == ["t", "x1", "y1", "x2", "y2", "x3", "y3", "H", "Mx", "My", "Theta"]
    assert len(df) == 11


def test_collapse_configuration_hits_collision(collapse_circulations):
    s = cone_state(collapse_circulations, 1.0, math.pi / 4)
    cfg = reconstruct(s)
    traj = integrate_full(cfg, (0.0, 5.0), 1e-10, collision_floor=1e-3)
    assert traj.status == "near_collision"
    assert traj.closest_approach is not None
    assert traj.closest_approach.distance == pytest.approx(1e-3, rel=1e-3)
    assert traj.closest_approach.time < 5.0


def test_integrate_full_rejects_bad_tol():
    with pytest.raises(ConfigError):
        integrate_full(VortexConfiguration.of([0j, 1 + 0j], [1.0, 1.0]), (0.0, 1.0), 0.0)


def test_integrate_batch_keeps_order():
    a = VortexConfiguration.of([1 + 0j, -1 + 0j], [1.0, 1.0])
    b = VortexConfiguration.of([0j, -1j], [1.0, -1.0])
    ta, tb = integrate_batch([a, b], (0.0, 1.0), 1e-9, max_workers=2)
    assert ta.states[-1][1] == pytest.approx(math.sin(0.5), abs=1e-7)
    assert tb.states[-1][0] == pytest.approx(1.0, abs=1e-7)
