import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weierforge.deform import (BracketNotFound, DeformArc, WedgeRotation, WrongSign,
                               ZeroOnArc, arc_shift_residual, choose_lambda,
                               rho_family, rotate_immersion, rotate_point,
                               rotate_triple, shoot_t)
from weierforge.holo_core import CompactSet, Laurent, OneForm, Path
from weierforge.weierstrass import (Immersion, SpinData, enneper, from_spin_data,
                                    sample_grid)
from weierforge.wedge import Wedge, dist_to_wedge

z_ = Laurent.monomial(1)
arc = DeformArc(Path.segment(0.2 + 1.0j, 0.3 + 0.2j))
enneper_shifted = SpinData(z_ + 2.0, OneForm(z_ + 2.0))


# ------------------------------------------------------------ rotations

@settings(max_examples=50, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-10, 10), st.floats(-20, 20))
def test_rotation_fixes_axis_and_round_trips(th, d, y):
    r = WedgeRotation(th, d)
    assert np.allclose(rotate_point(r, (0, y, d)), (0, y, d), atol=1e-14)
    p = np.array([1.3, -0.4, 2.2])
    assert np.allclose(rotate_point(r.inverse(), rotate_point(r, p)), p, atol=1e-14)
    A = r.matrix
    assert np.allclose(A @ A.T, np.eye(3)) and np.linalg.det(A) == pytest.approx(1)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_boundary_plane_goes_horizontal(n):
    th, d = 1 / (n - 1), n - 1.0
    r = WedgeRotation(th, d)
    for x1 in (-1.0, 0.5, 3.0):
        p = (x1, 0.7, d - math.tan(th) * x1)
        assert rotate_point(r, p)[2] == pytest.approx(d, abs=1e-12)


def test_rotate_triple_commutes_with_immersion():
    disk = CompactSet.disk(0, 1.5)
    t = from_spin_data(enneper(), disk)
    r = WedgeRotation(math.pi / 7, 0.0)
    im = Immersion(t, 0.0, np.zeros(3), disk)
    xs = np.linspace(-0.6, 0.6, 7)
    G = sample_grid(im, xs, xs)
    R = sample_grid(rotate_immersion(im, r), xs, xs)
    assert np.allclose(R, rotate_point(r, G), atol=1e-10)
    rt = rotate_triple(t, r)
    assert np.max(rt.nullity_residual(xs + 0.1j)) <= 1e-12
    ident = rotate_triple(t, WedgeRotation(0.0, 0.0))
    assert np.allclose(ident(xs), t(xs))


# ------------------------------------------------------------- rho_t

def test_rho_plateau_constants():
    sd = SpinData(Laurent.constant(2.0), OneForm(Laurent.constant(1.0)))
    line = DeformArc(Path.segment(0.0, 1.0))
    fam = rho_family(sd, line, 6.0)
    assert fam.rho(0.5) == pytest.approx(3.0)
    assert fam.g_hat(0.5) == pytest.approx(6.0)


@pytest.mark.parametrize("t", [1.0, 10.0, 100.0, -7.0])
def test_rho_endpoints_and_bounds(t):
    fam = rho_family(enneper_shifted, arc, t)
    u = np.linspace(0, 1, 4001)
    r = np.abs(fam.rho(u))
    assert fam.rho(0.0) == 1.0 and fam.rho(1.0) == 1.0
    assert np.all(fam.rho(u[u <= 1 / 3]) == 1.0)
    assert r.min() >= fam.A0 - 1e-15
    assert r.max() <= fam.A1 * abs(t) + fam.A2


def test_rho_keeps_phi3():
    fam = rho_family(enneper_shifted, arc, 5.0)
    assert fam.sd.phi3 is enneper_shifted.phi3


def test_rho_needs_large_t():
    with pytest.raises(ValueError):
        rho_family(enneper_shifted, arc, 0.5)


def test_zero_on_arc():
    bad = DeformArc(Path.segment(-1.0 + 1j, -3.0 - 1j))  # passes z = -2
    with pytest.raises(ZeroOnArc):
        bad.check(enneper_shifted)


def test_deformed_arc_data_is_null():
    fam = rho_family(enneper_shifted, arc, 20.0)
    u = np.linspace(0, 1, 301)
    gh = fam.g_hat(u)
    f3 = fam.f3u(u)
    phi = np.array([0.5 * (1 / gh - gh) * f3, 0.5j * (1 / gh + gh) * f3, f3])
    m = np.sum(np.abs(phi) ** 2, axis=0)
    assert np.max(np.abs(np.sum(phi ** 2, axis=0)) / m) <= 1e-10


# ---------------------------------------------------------------- shoot

def test_shoot_hits_target():
    t0 = shoot_t(enneper_shifted, arc, 2.0)
    assert abs(t0) >= 1
    assert abs(arc_shift_residual(enneper_shifted, arc, 2.0, t0)) < 1e-9 * 2 + 1e-12


def test_shoot_negative_target():
    t0 = shoot_t(enneper_shifted, arc, -3.0)
    assert abs(arc_shift_residual(enneper_shifted, arc, -3.0, t0)) < 1e-8


def test_shoot_zero_target_is_identity():
    assert shoot_t(enneper_shifted, arc, 0.0) == 0.0
    assert arc_shift_residual(enneper_shifted, arc, 0.0, 0.0) == 0.0


def test_residual_plateau_slope():
    # on the plateau psi_hat_1 = (f3^2/t - t)/2, so the residual falls like t/6
    r1 = arc_shift_residual(enneper_shifted, arc, 50.0, 100.0)
    r2 = arc_shift_residual(enneper_shifted, arc, 50.0, 200.0)
    assert (r1 - r2) / 100 == pytest.approx(1 / 6, rel=0.05)


def test_residual_sign_change_scan():
    lo = arc_shift_residual(enneper_shifted, arc, 50.0, -1000.0)
    hi = arc_shift_residual(enneper_shifted, arc, 50.0, 1000.0)
    assert np.sign(lo) != np.sign(hi)


def test_bracket_not_found():
    with pytest.raises(BracketNotFound):
        shoot_t(enneper_shifted, arc, 1e9, max_exp=3)


# --------------------------------------------------------------- lambda

def test_lambda_zero_when_far():
    w = Wedge(0.0, -0.3)
    assert choose_lambda([(0, 0, 5.0)], w, 1.0) == 0.0


def test_lambda_boundary_point():
    w = Wedge(0.0, -0.3)
    lam = choose_lambda([(0, 0, 0.0)], w, 1.0)
    assert lam == pytest.approx(1.01 * (1 / math.cos(0.3)) / math.tan(0.3))
    shifted = np.array([-lam, 0, 0.0])
    assert dist_to_wedge(w, shifted) > 1.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5)),
                min_size=1, max_size=8),
       st.floats(0.05, 1.2), st.floats(0.0, 3.0))
def test_lambda_monotone_and_sufficient(points, th, m):
    w = Wedge(0.5, -th)
    a = choose_lambda(points, w, m)
    b = choose_lambda(points, w, 2 * m)
    assert b >= a - 1e-12
    P = np.array(points, float) - np.array([a, 0, 0])
    if a > 0:
        assert np.all(dist_to_wedge(w, P) > m - 1e-9)


def test_lambda_wrong_sign():
    with pytest.raises(WrongSign):
        choose_lambda([(0, 0, 0)], Wedge(0.0, 0.3), 1.0)
