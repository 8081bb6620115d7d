import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weierforge.deform import WedgeRotation, rotate_triple
from weierforge.holo_core import CompactSet, Laurent, OneForm, Path
from weierforge.weierstrass import (DegenerateTriple, Immersion, NullTriple,
                                    RegularityFailure, SpinData, catenoid,
                                    conformality_defect, conjugate_null_curve,
                                    csv_text, enneper, enneper_closed_form, flat,
                                    flux, from_spin_data, gauss_map,
                                    harmonicity_slopes, immerse, metric_density,
                                    obj_text, read_csv, real_periods, sample_grid)

z_ = Laurent.monomial(1)
disk = CompactSet.disk(0, 1.5)
annulus = CompactSet.annulus(0, 0.5, 2.0)
pts = 0.7 * np.exp(1j * np.linspace(0, 6, 40)) * np.linspace(0.2, 1, 40)


def _enneper_im():
    return Immersion(from_spin_data(enneper(), disk), 0.0, np.zeros(3), disk)


def test_enneper_triple():
    t = from_spin_data(enneper(), disk)
    v = t(pts)
    assert np.allclose(v[0], 0.5 * (1 - pts ** 2))
    assert np.allclose(v[1], 0.5j * (1 + pts ** 2))
    assert np.allclose(v[2], pts)


def test_catenoid_triple():
    t = from_spin_data(catenoid(), annulus)
    z = 1.2 * np.exp(1j * np.linspace(0, 6, 17))
    v = t(z)
    assert np.allclose(v[0], 0.5 * (z ** -2 - 1))
    assert np.allclose(v[1], 0.5j * (z ** -2 + 1))
    assert np.allclose(v[2], 1 / z)


def test_flat_triple():
    t = from_spin_data(flat(2.0), disk)
    assert np.max(t.nullity_residual(pts)) < 1e-15
    assert np.min(metric_density(t, pts)) > 0


def test_regularity_failure():
    sd = SpinData(z_, OneForm(Laurent.constant(1.0)))
    with pytest.raises(RegularityFailure):
        from_spin_data(sd, disk)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False), min_size=1,
                max_size=4).filter(lambda c: abs(c[-1]) > 1e-3),
       st.complex_numbers(min_magnitude=0.1, max_magnitude=3, allow_nan=False))
def test_spin_data_is_null(coeffs, c):
    g = Laurent.constant(c) + 0.0 * z_
    f3 = Laurent(coeffs)
    t = from_spin_data(SpinData(g, OneForm(f3)))
    z = 0.5 * np.exp(1j * np.linspace(0, 6, 11))
    v = t(z)
    m = np.sum(np.abs(v) ** 2, axis=0)
    ok = m > 1e-20
    assert np.all(np.abs(np.sum(v ** 2, axis=0))[ok] <= 1e-10 * m[ok])


def test_immerse_enneper_closed_form():
    im = _enneper_im()
    z = 0.9 * np.exp(1j * np.linspace(0, 2 * np.pi, 25, endpoint=False)) * 0.8
    for w in z:
        assert np.allclose(immerse(im, w), enneper_closed_form(w), atol=1e-12)
    r = 0.6
    x = immerse(im, r)
    assert x == pytest.approx([r / 2 - r ** 3 / 6, 0, r * r / 2], abs=1e-12)


def test_immerse_base():
    im = Immersion(from_spin_data(enneper(), disk), 0.3j, np.array([1.0, 2, 3]), disk)
    assert np.array_equal(immerse(im, 0.3j), [1.0, 2, 3])


def test_catenoid_loop_returns_to_base():
    t = from_spin_data(catenoid(), annulus)
    im = Immersion(t, 1.0, np.zeros(3), annulus)
    loop = Path(np.append(np.exp(1j * np.linspace(0, 2 * np.pi, 257)[:-1]), 1.0))
    assert np.allclose(immerse(im, 1.0, loop), 0, atol=1e-12)
    w = conjugate_null_curve(im, 1.0, loop)
    assert np.allclose(w, [0, 0, 2j * math.pi], atol=1e-10)


def test_conjugate_real_part_matches():
    im = _enneper_im()
    w = conjugate_null_curve(im, 0.4 + 0.2j)
    assert np.allclose(w.real, immerse(im, 0.4 + 0.2j), atol=1e-14)
    assert np.allclose(conjugate_null_curve(im, 0.0), 0)


def test_flux_examples():
    t = from_spin_data(catenoid())
    assert np.allclose(flux(t, Path.circle(0, 1)), [0, 0, 2 * math.pi], atol=1e-8)
    assert np.allclose(flux(t, Path.circle(0, 1, turns=2)), [0, 0, 4 * math.pi], atol=1e-8)
    assert np.max(np.abs(real_periods(t, Path.circle(0, 1)))) < 1e-10
    e = from_spin_data(enneper())
    assert np.allclose(flux(e, Path.circle(0, 1)), 0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.6, 1.9), st.complex_numbers(max_magnitude=0.3, allow_nan=False))
def test_flux_homology_invariance(r, c):
    t = from_spin_data(catenoid())
    a = flux(t, Path.circle(0, 1.0))
    b = flux(t, Path.circle(c, r))
    if abs(c) < r - 1e-3:
        assert np.allclose(a, b, atol=1e-8)


def test_gauss_map_round_trip():
    for sd in (enneper(), catenoid()):
        t = from_spin_data(sd)
        g = gauss_map(t)
        z = 1.1 * np.exp(1j * np.linspace(0, 6, 9))
        assert np.allclose(g(z), z)
    t = rotate_triple(from_spin_data(enneper()), WedgeRotation(math.pi / 7, 0))
    g = gauss_map(t)
    back = from_spin_data(SpinData(g, t.phi[2]))
    z = 0.5 + 0.3j * np.arange(4)
    assert np.max(np.abs(back(z) - t(z))) <= 1e-10


def test_degenerate_triple():
    f = Laurent.constant(1.0)
    t = NullTriple((f, -1j * f, Laurent.constant(0.0)))
    with pytest.raises(DegenerateTriple):
        gauss_map(t)


def test_metric_examples():
    assert metric_density(from_spin_data(flat(1.0)), 0.3) == pytest.approx(2.0)
    e = from_spin_data(enneper())
    assert metric_density(e, 0.0) == pytest.approx(0.5)
    assert metric_density(e, 1.0) == pytest.approx(2.0)


def test_conformality():
    im = _enneper_im()
    a, b = conformality_defect(im, pts + 0.05)
    assert a <= 1e-8 and b <= 1e-8


def test_harmonicity_rate():
    w = Laurent.monomial(1)
    from weierforge.holo_core import Exp
    sd = SpinData(Exp(w), OneForm(Exp(2.0 * w)))
    dom = CompactSet.rectangle(-1, 1, -1, 1)
    im = Immersion(from_spin_data(sd, dom), 0.0, np.zeros(3), dom)
    s = harmonicity_slopes(im, -0.25, -0.25, 0.5, (1 / 16, 1 / 32, 1 / 64))
    assert np.all(s >= 1.9)


def test_sample_grid_matches_pointwise():
    im = _enneper_im()
    xs = np.linspace(-0.5, 0.5, 5)
    ys = np.linspace(-0.4, 0.4, 4)
    G = sample_grid(im, xs, ys)
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            assert np.allclose(G[i, j], enneper_closed_form(x + 1j * y), atol=1e-13)


def test_export_round_trip():
    im = _enneper_im()
    xs = np.linspace(-0.5, 0.5, 4)
    ys = np.linspace(0, 0.3, 3)
    G = sample_grid(im, xs, ys)
    xs2, ys2, G2 = read_csv(csv_text(xs, ys, G))
    assert np.array_equal(G, G2) and np.array_equal(xs, xs2) and np.array_equal(ys, ys2)
    obj = obj_text(G)
    lines = obj.splitlines()
    assert sum(l.startswith("v ") for l in lines) == 12
    assert sum(l.startswith("f ") for l in lines) == 6
    assert "\r" not in obj
