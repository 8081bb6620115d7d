import math
import time

import numpy as np
import pytest

from weierforge.holo_core import Laurent, Path
from weierforge.periods import (RankDeficient, catenoid_problem,
                                period_map, solve_periods, _LoopQuadrature,
                                _residual_and_jacobian)
from weierforge.runge import winding_number
from weierforge.weierstrass import from_spin_data

zero = Laurent.constant(0.0)


def test_period_map_at_origin():
    pp = catenoid_problem()
    assert all(np.all(v == 0) for v in period_map(pp, zero, zero))


def test_period_map_constant_h2():
    pp = catenoid_problem()
    c = 0.3
    v = period_map(pp, zero, Laurent.constant(c))[0]
    assert v[2] == pytest.approx((math.exp(c) - 1) * 2j * math.pi, abs=1e-10)


def test_period_map_directional_derivative():
    pp = catenoid_problem()
    h = Laurent({-1: 0.2j, 0: 0.1, 1: 0.4})
    d5 = np.array(period_map(pp, 1e-5 * h, 1e-5 * h)[0]) / 1e-5
    d6 = np.array(period_map(pp, 1e-6 * h, 1e-6 * h)[0]) / 1e-6
    assert np.allclose(d5, d6, rtol=1e-3, atol=1e-6)


def test_analytic_jacobian_matches_finite_differences():
    pp = catenoid_problem((1.0, 2.0, 3.0), 2)
    q = _LoopQuadrature(pp)
    x = np.random.default_rng(0).normal(scale=0.05, size=4 * pp.exponents.size)
    F, J = _residual_and_jacobian(pp, q, x)
    h = 1e-7
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        Fp, _ = _residual_and_jacobian(pp, q, x + e, jac=False)
        Fm, _ = _residual_and_jacobian(pp, q, x - e, jac=False)
        assert np.allclose((Fp - Fm) / (2 * h), J[:, k], atol=1e-6)


def test_identity_solve():
    _, rep = solve_periods(catenoid_problem((0, 0, 2 * math.pi)))
    assert rep["iterations"] <= 1
    assert rep["flux_error"] < 1e-10


def test_scaled_catenoid_log_alpha():
    alpha = 1.7
    _, rep = solve_periods(catenoid_problem((0, 0, 2 * math.pi * alpha)))
    assert rep["h2"][0][0] == pytest.approx(math.log(alpha), abs=1e-8)
    assert rep["flux_error"] < 1e-8


def test_target_123():
    t0 = time.perf_counter()
    pp = catenoid_problem((1.0, 2.0, 3.0), 4)
    sd, rep = solve_periods(pp)
    assert time.perf_counter() - t0 < 30
    assert rep["jacobian_rank"] == 6
    t = from_spin_data(sd)
    per = t.loop_integral(Path.circle(0, 1.0, 256))
    assert np.max(np.abs(per.real)) <= 1e-10
    assert np.max(np.abs(per.imag - [1, 2, 3])) <= 1e-8
    # exponential factors keep the divisors of g and phi3
    loop = Path.circle(0, 1.0, 512)
    assert winding_number(sd.g, loop) == 1
    assert winding_number(sd.phi3.density, loop) == -1


def test_rank_deficient():
    with pytest.raises(RankDeficient):
        solve_periods(catenoid_problem((1.0, 2.0, 3.0), 0))


def test_exactness_on_homologous_loop():
    sd, _ = solve_periods(catenoid_problem((0.5, -1.0, 4.0), 3))
    per = from_spin_data(sd).loop_integral(Path.circle(0.1, 1.4, 400))
    assert np.max(np.abs(per.real)) <= 1e-9
    assert np.allclose(per.imag, [0.5, -1.0, 4.0], atol=1e-8)
