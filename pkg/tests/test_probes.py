import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tmlab.errors import ResolutionError, TildeUndefined
from tmlab.export import write_csv
from tmlab.mesh import geodesic_distances
from tmlab.probes import (PI_E, RadialProfile, bubble_mass, bubble_profile,
                          carleson_chang_experiment, log_radius_grid, moser_profile,
                          moser_sequence, moser_tilde, truncated_bubble_profile)

from conftest import icosphere, torus

DEEP = [100, 200, 400, 800, 1600]


# -- bubble --------------------------------------------------------------

def test_bubble_at_origin():
    assert bubble_profile(0.0) == 0.0


def test_bubble_decreasing_and_unbounded():
    r = np.geomspace(1e-6, 1e12, 400)
    v = bubble_profile(r)
    assert np.all(np.diff(v) < 0)
    assert bubble_profile(1e150) < -50


@given(st.floats(0.0, 1e6))
def test_bubble_even_and_bounded_above(r):
    assert bubble_profile(r) == bubble_profile(-r)
    assert bubble_profile(r) <= 0.0


def test_bubble_unit_mass():
    total, tail = bubble_mass()
    assert total == pytest.approx(1.0, abs=1e-6)
    assert 0 < tail < 1e-8


# -- radial profiles ----------------------------------------------------

def test_zero_profile_has_zero_integral():
    p = RadialProfile.from_radii(np.linspace(0, 1, 50), np.zeros(50))
    assert p.disc_integral() == 0.0
    assert p.energy() == 0.0
    with pytest.raises(ValueError):
        p.normalized()


def test_linear_cone_energy_and_integral():
    # v = 1 - r: energy 2 pi int r dr = pi; int (e^{k v^2} - 1) checked by quadrature
    r = np.concatenate([[0.0], np.geomspace(1e-6, 1.0, 20001)])
    p = RadialProfile.from_radii(r, 1.0 - r)
    assert p.energy() == pytest.approx(math.pi, rel=1e-4)
    from scipy.integrate import quad
    ref = 2 * math.pi * quad(lambda x: (math.exp(2.0 * (1 - x) ** 2) - 1) * x, 0, 1)[0]
    assert p.disc_integral(2.0) == pytest.approx(ref, rel=1e-6)


def test_profile_validation():
    with pytest.raises(ValueError):
        RadialProfile.from_radii([0.0, 0.5, 1.0], [1.0, 0.5, 0.2])
    with pytest.raises(ValueError):
        RadialProfile.from_radii([0.1, 0.5, 1.0], [1.0, 0.5, 0.0])
    with pytest.raises(ValueError):
        RadialProfile.from_radii([0.0, 0.5, 0.4], [1.0, 0.5, 0.0])
    with pytest.raises(ValueError):
        RadialProfile.from_radii([0.0, 0.5, 1.0], [np.nan, 0.5, 0.0])
    RadialProfile.from_radii([0.0, 0.5, 1.0], [1.0, 0.5, 0.2], boundary_zero=False)


def test_moser_profile_has_unit_energy():
    for t in (5.0, 50.0, 800.0):
        assert moser_profile(t).energy() == pytest.approx(1.0, rel=1e-9)


def test_log_grid_resolves_deep_scales():
    lr = log_radius_grid(1000.0)
    assert lr[0] == -np.inf and lr[1] == -1000.0 and lr[-1] == 0.0
    assert np.max(np.diff(lr[1:])) <= 0.002 + 1e-12


# -- Carleson-Chang experiment ------------------------------------------

def test_truncated_bubble_reaches_pi_e():
    out = carleson_chang_experiment(truncated_bubble_profile, DEEP)
    assert PI_E - 0.2 <= out[-1].disc_integral <= PI_E + 0.01
    assert all(abs(s.energy - 1.0) <= 1e-8 for s in out)


def test_truncated_bubble_values_settle_monotonically():
    vals = [s.disc_integral for s in carleson_chang_experiment(truncated_bubble_profile, DEEP)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    # excess over pi e shrinks like 1/log(1/eps)
    excess = np.array(vals) - PI_E
    assert np.all(excess * np.array(DEEP) == pytest.approx(7.4, rel=0.05))


@pytest.mark.xfail(strict=True, reason="with the bubble core the family overshoots pi e "
                   "by about 7.4/log(1/eps) and settles from above")
def test_truncated_bubble_approaches_from_below():
    vals = [s.disc_integral for s in carleson_chang_experiment(truncated_bubble_profile, DEEP)]
    assert all(v <= PI_E for v in vals)


def test_moser_family_below_pi_e():
    out = carleson_chang_experiment(moser_profile, [2, 5, 10, 50] + DEEP)
    assert all(s.disc_integral <= PI_E + 0.01 for s in out)


def test_deep_concentration_within_one_percent():
    for fam in (moser_profile, truncated_bubble_profile):
        for s in carleson_chang_experiment(fam, DEEP):
            assert s.disc_integral <= 1.01 * PI_E


def test_moderate_bubble_exceeds_pi_e():
    # finite members may beat the limiting value; the bound is on the limsup
    (s,) = carleson_chang_experiment(truncated_bubble_profile, [10])
    assert s.disc_integral > 1.01 * PI_E


def test_experiment_rejects_free_boundary():
    def fam(t):
        return RadialProfile.from_radii([0.0, 0.5, 1.0], [1.0, 0.5, 0.2], boundary_zero=False)

    with pytest.raises(ValueError):
        carleson_chang_experiment(fam, [1.0])


def test_experiment_csv(tmp_path):
    out = carleson_chang_experiment(moser_profile, [5, 50])
    path = tmp_path / "cc.csv"
    write_csv(path, ["eps", "energy", "disc_integral"],
              [(s.eps, s.energy, s.disc_integral) for s in out])
    lines = path.read_text().splitlines()
    assert lines[0] == "eps,energy,disc_integral"
    assert len(lines) == 3


# -- Moser caps on meshes ------------------------------------------------

@pytest.fixture(scope="module")
def ico5_radii():
    mesh, ops = icosphere(5)
    return mesh, ops, geodesic_distances(mesh, 0)


def test_moser_gradient_norm_near_one(ico5_radii):
    mesh, ops, r = ico5_radii
    g5 = moser_sequence(mesh, ops, 0, 0.2, r=r).grad_norm
    assert abs(g5 - 1.0) < 0.1
    m6, o6 = icosphere(6)
    g6 = moser_sequence(m6, o6, 0, 0.2).grad_norm
    assert abs(g6 - 1.0) < abs(g5 - 1.0)


@pytest.mark.parametrize("eps", [0.3, 0.2])
def test_moser_field_range_and_support(ico5_radii, eps):
    mesh, ops, r = ico5_radii
    f = moser_sequence(mesh, ops, 0, eps, r=r)
    top = math.sqrt(math.log(1 / eps) / (2 * math.pi))
    assert f.values.min() >= 0.0 and f.values.max() <= top
    assert np.all(f.values[r >= eps] == 0.0)
    assert np.all(f.values[r <= eps * eps] == top)


def test_moser_unresolvable_core(ico5_radii):
    mesh, ops, r = ico5_radii
    with pytest.raises(ResolutionError):
        moser_sequence(mesh, ops, 0, 0.1, r=r)
    with pytest.raises(ValueError):
        moser_sequence(mesh, ops, 0, 1.0, r=r)


def test_moser_tilde_needs_curvature():
    mesh, ops = torus(12)
    f = moser_sequence(mesh, ops, 0, 0.6, check_resolution=False)
    with pytest.raises(TildeUndefined):
        moser_tilde(ops, f)


def test_moser_tilde_scaling_law():
    # the finest standard sphere resolving the eps = 0.1 core
    mesh, ops = icosphere(7)
    r = geodesic_distances(mesh, 0)
    eps = np.array([0.3, 0.2, 0.1])
    scale = eps * np.sqrt(-np.log(eps))
    tl = np.array([abs(moser_tilde(ops, moser_sequence(mesh, ops, 0, e, r=r))) for e in eps])
    C = float(np.dot(tl, scale) / np.dot(scale, scale))
    assert C > 0
    assert np.all(tl <= 1.5 * C * scale)
    # the bound is far from tight on the round sphere: the cap's mean is O(eps^2)
    assert tl[-1] / scale[-1] < tl[0] / scale[0]
