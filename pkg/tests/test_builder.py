import math

import numpy as np
import pytest

from weierforge import builder
from weierforge.builder import (StageConfig, StageFailed, cert_grid,
                                certificates, init_stage, run, _deformed_triple)
from weierforge.deform import WedgeRotation, rotate_immersion
from weierforge.holo_core import Laurent
from weierforge.weierstrass import (Immersion, discrete_laplacian_max, gauss_map,
                                    sample_grid)

CFG = StageConfig(grid=(48, 48))


@pytest.fixture(scope="module")
def states():
    return run(CFG)


def test_config_validation():
    with pytest.raises(ValueError):
        StageConfig(epsilon=1.0)
    with pytest.raises(ValueError):
        StageConfig(max_stage=0)


def test_init_stage_properties():
    st = init_stage(CFG)
    xs, ys = cert_grid(CFG)
    d1 = ys >= 0.5
    X = st.values[d1]
    assert np.min(X[..., 2] + math.tan(1.0) * X[..., 0]) > 1
    assert st.info["image_diameter_D1"] < 0.25
    assert st.certificates["ii"] > 0 and st.certificates["iv"] > 0
    g = gauss_map(st.immersion.triple)
    assert abs(g(0.3 + 1j) - g(-0.7 + 0.4j)) > 1e-3  # non-flat
    z = (xs[::5][None, :] + 1j * ys[::5][:, None]).ravel()
    assert np.max(st.immersion.triple.nullity_residual(z)) < 1e-12


def test_max_stage_one():
    out = run(StageConfig(grid=(16, 16), max_stage=1))
    assert len(out) == 1 and out[0].n == 1


def test_rotation_lifts_previous_row():
    st = init_stage(CFG)
    xs, _ = cert_grid(CFG)
    Y = rotate_immersion(st.immersion, WedgeRotation(1.0, 1.0))
    row = sample_grid(Y, xs, np.array([0.5]))
    assert np.min(row[..., 2]) > 1.0


def test_rotation_round_trip():
    st = init_stage(CFG)
    xs, ys = cert_grid(CFG)
    r = WedgeRotation(1.0, 1.0)
    back = rotate_immersion(rotate_immersion(st.immersion, r), r.inverse())
    assert np.allclose(sample_grid(back, xs, ys), st.values, atol=1e-12)


def test_all_certificates_positive(states):
    assert [s.n for s in states] == [1, 2, 3]
    for s in states[1:]:
        for k in ("i", "ii", "iii", "iv", "b_theta", "c_delta", "metric_floor"):
            assert s.certificates[k] > 0, (s.n, k)
        assert 1 / (s.n + 1) < s.mu < 1 / s.n


def test_certificates_recomputed_from_values(states):
    _, ys = cert_grid(CFG)
    for prev, s in zip(states, states[1:]):
        c = certificates(s.n, s.values, prev.values, ys, CFG.epsilon)
        for k in ("i", "ii", "iii", "iv"):
            assert c[k] == s.certificates[k]


def test_telescoping_and_margin_sum(states):
    _, ys = cert_grid(CFG)
    d1 = ys >= 0.5 - 1e-12
    sup = np.max(np.linalg.norm(states[2].values[d1] - states[0].values[d1], axis=-1))
    assert sup < CFG.epsilon * (0.5 + 0.25)
    assert sum(s.certificates["i"] for s in states[1:]) < CFG.epsilon


def test_properness_ledger(states):
    led = states[-1].ledger
    for e in led:
        assert e["min_value"] >= e["bound"]
        assert e["escape_value"] > e["bound"]
    assert {e["n"] for e in led} == {1, 2, 3}


def test_negative_x1_positivity(states):
    X = states[-1].values
    neg = X[..., 0] < 0
    assert np.any(neg)
    assert np.all(X[neg][:, 2] > 1 - CFG.epsilon)


def test_stage_immersions_are_harmonic(states):
    # cubic coordinates: the 5-point Laplacian vanishes up to rounding
    for s in states:
        for h in (1 / 16, 1 / 32, 1 / 64):
            g = -0.5 + h * np.arange(int(0.5 / h) + 1)
            G = sample_grid(s.immersion, g, g + 1.0)
            assert np.all(discrete_laplacian_max(G, h) * h * h < 1e-13)


def test_report_shape(states):
    rep = builder.report(states, CFG)
    assert [r["stage"] for r in rep] == [1, 2, 3]
    for r in rep:
        assert set(r) >= {"stage", "mu", "lambda", "t0", "cert_margins",
                          "properness_ledger", "sup_diff_prev"}
        assert set(r["cert_margins"]) == {"i", "ii", "iii", "iv"}


def test_gauss_deformation_preserves_height_and_nullity():
    st = init_stage(CFG)
    Y = st.immersion
    k = Laurent({0: 0.1, 1: 0.05 + 0.02j, 2: -0.01})
    t = _deformed_triple(Y.triple, k)
    z = np.array([0.3 + 1j, -1.2 + 0.4j, 1.5 + 1.8j])
    assert np.max(t.nullity_residual(z)) < 1e-12
    assert np.allclose(t.phi[2].density(z), Y.triple.phi[2].density(z))
    g0, g1 = gauss_map(Y.triple), gauss_map(t)
    assert np.allclose(g1(z), g0(z) * np.exp(k(z)))
    Ym = Immersion(t, Y.base_point, Y.base_value, Y.domain)
    xs, ys = np.linspace(-2, 2, 9), np.linspace(0, 2, 5)
    assert np.allclose(sample_grid(Ym, xs, ys)[..., 2], sample_grid(Y, xs, ys)[..., 2],
                       atol=1e-12)


def test_low_lift_fails_diagnosably():
    cfg = StageConfig(grid=(24, 24), lift=0.1, retries=0, max_stage=2)
    with pytest.raises(StageFailed) as info:
        run(cfg)
    p = info.value.payload
    assert p["stage"] == 2
    assert p["lambda"] > 0
    assert p["certificate"] in {"i", "ii", "iii", "iv", "b_theta", "c_delta",
                                "metric_floor"}
    assert p["margin"] <= 0
    assert p["attempts"] >= 1 and p["cert_margins"] is not None
    assert [s.n for s in info.value.partial] == [1]
