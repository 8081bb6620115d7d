"""Finite-stage construction of immersions of D = [-2,2] x [0,2] whose
(x1, x3)-projection escapes the nested wedges Pi_n(+-1/n).

Stage n rotates X_{n-1} by L (angle 1/(n-1) about {x1 = 0, x3 = n-1}),
chooses the strip parameter mu, computes the x1-shift lambda needed on the
lower strip Delta, deforms the Gauss map along an arc crossing the gap Theta
(rho_t family + shooting), globalises the deformation by a polynomial
exponent k (g -> g e^k with phi3 fixed), rotates back and certifies the
result on a sample grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .deform import (DeformArc, ZeroOnArc, BlendFailure, BracketNotFound,
                     WedgeRotation, choose_lambda, rho_family, rotate_immersion,
                     shoot_t)
from .holo_core import (CompactSet, Config, Exp, Laurent, OneForm, Path,
                        WeierforgeError, default_config)
from .runge import DegreeBudgetExceeded, approx_samples
from .weierstrass import (Immersion, NullTriple, SpinData, from_spin_data,
                          gauss_map, metric_density, sample_grid)
from .wedge import Wedge

X_RANGE = (-2.0, 2.0)
Y_RANGE = (0.0, 2.0)
BASE_POINT = 1.5j


class StageFailed(WeierforgeError):
    def __init__(self, payload: dict, partial=None):
        super().__init__(f"stage {payload.get('stage')} failed: "
                         f"{payload.get('certificate')} margin {payload.get('margin')}")
        self.payload = payload
        self.partial = partial or []


@dataclass
class StageConfig:
    epsilon: float = 0.5
    max_stage: int = 3
    grid: tuple = (128, 128)
    shoot_tol: float | None = None
    quad_tol: float = 1e-11
    seed: int = 0
    lift: float = 2.5
    gauss_scale: float = 0.1
    height_scale: float | None = None
    retries: int = 10
    runge_eps: float = 1e-2
    max_degree: int = 64

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.max_stage < 1:
            raise ValueError("max_stage must be at least 1")
        nx, ny = self.grid
        if nx < 3 or ny < 3:
            raise ValueError("grid needs at least 3 x 3 samples")

    def quad(self) -> Config:
        cfg = default_config()
        cfg.quad_rtol = self.quad_tol
        return cfg


@dataclass
class StageState:
    n: int
    immersion: Immersion
    certificates: dict
    mu: float | None
    lam: float
    t0: float
    values: np.ndarray = field(repr=False, default=None)
    info: dict = field(default_factory=dict)
    ledger: list = field(default_factory=list)


# ------------------------------------------------------------------ grid

def cert_grid(cfg: StageConfig) -> tuple[np.ndarray, np.ndarray]:
    nx, ny = cfg.grid
    xs = np.linspace(*X_RANGE, nx)
    special = [1.0 / (k + 1) for k in range(1, cfg.max_stage + 2)]
    ys = np.unique(np.concatenate([np.linspace(*Y_RANGE, ny), special]))
    return xs, ys


def domain() -> CompactSet:
    return CompactSet.rectangle(X_RANGE[0], X_RANGE[1], Y_RANGE[0], Y_RANGE[1])


def _rows(ys: np.ndarray, lo: float, hi: float, closed_hi: bool = True) -> np.ndarray:
    tol = 1e-12
    m = ys >= lo - tol
    m &= (ys <= hi + tol) if closed_hi else (ys < hi - tol)
    return m


def _row_index(ys: np.ndarray, y: float) -> int:
    i = int(np.argmin(np.abs(ys - y)))
    if abs(ys[i] - y) > 1e-12:
        raise ValueError(f"row {y} not on the grid")
    return i


def _level(X: np.ndarray, theta: float, a: float) -> np.ndarray:
    return X[..., 2] + math.tan(theta) * X[..., 0] - a


def _tail(eps: float, n: int) -> float:
    return 1.0 - eps * sum(2.0 ** -j for j in range(1, n))


# ---------------------------------------------------------- certificates

def certificates(n: int, X: np.ndarray, Xprev: np.ndarray | None,
                 ys: np.ndarray, eps: float) -> dict:
    """Margins of the stage-n certificates on the grid (positive = holds)."""
    out: dict = {}
    if Xprev is not None:
        m = _rows(ys, 1.0 / n, Y_RANGE[1])
        sup = float(np.max(np.linalg.norm(X[m] - Xprev[m], axis=-1)))
        out["i"] = eps / 2 ** (n - 1) - sup
    else:
        out["i"] = None
    r = _row_index(ys, 1.0 / (n + 1))
    out["ii"] = float(np.min(_level(X[r], 1.0 / n, n)))
    if n >= 2:
        m = _rows(ys, 1.0 / (n + 1), 1.0 / n, closed_hi=False)
        both = np.maximum(_level(X[m], 1.0 / (n - 1), n - 1),
                          _level(X[m], 1.0 / n, n))
        out["iii"] = float(np.min(both))
    else:
        out["iii"] = None
    bound = _tail(eps, n)
    neg = X[..., 0] < 0
    sel = X[neg] if np.any(neg) else X.reshape(-1, 3)
    out["iv"] = float(np.min(sel[:, 2]) - bound)
    out["iv_bound"] = bound
    out["iv_points_with_negative_x1"] = int(np.sum(neg))
    return out


def properness_ledger(X: np.ndarray, xs: np.ndarray, ys: np.ndarray, k: int,
                      eps: float) -> list[dict]:
    """min of x3 + tan(1)|x1| over C_n - C_{n-1}, C_n = [-1,1] x [1/(n+1), 1]."""
    cols = np.abs(xs) <= 1.0 + 1e-12
    out = []
    for n in range(1, k + 1):
        rows = _rows(ys, 1.0 / (n + 1), 1.0 if n == 1 else 1.0 / n,
                     closed_hi=(n == 1))
        P = X[np.ix_(rows, cols)]
        val = float(np.min(P[..., 2] + math.tan(1.0) * np.abs(P[..., 0])))
        esc = float(np.min(P[..., 2] + math.tan(1.0 / n) * (np.abs(P[..., 0]) + 1)))
        bound = n - 1 - 2 * eps
        out.append({"n": n, "min_value": val, "bound": bound,
                    "margin": val - bound, "escape_value": esc,
                    "escape_margin": esc - bound})
    return out


def _fails(c: dict) -> tuple[str, float] | None:
    for key in ("i", "ii", "iii", "iv"):
        v = c.get(key)
        if v is not None and not v > 0:
            return key, v
    return None


# ------------------------------------------------------------ stage one

def initial_spin(cfg: StageConfig) -> SpinData:
    """Enneper data g = c z, phi3 = c' z dz (regular on all of C)."""
    c = cfg.gauss_scale
    c3 = cfg.height_scale if cfg.height_scale is not None else 0.01
    return SpinData(Laurent.monomial(1, c), OneForm(Laurent.monomial(1, c3)))


def init_stage(cfg: StageConfig) -> StageState:
    sd = initial_spin(cfg)
    t = from_spin_data(sd, domain())
    qc = cfg.quad()
    xs, ys = cert_grid(cfg)
    probe = Immersion(t, BASE_POINT, np.zeros(3), domain())
    X0 = sample_grid(probe, xs, ys, qc)
    d1 = _rows(ys, 0.5, Y_RANGE[1])
    lvl = X0[d1][..., 2] + math.tan(1.0) * X0[d1][..., 0]
    shift = 1.0 + cfg.lift - float(np.min(lvl))
    im = Immersion(t, BASE_POINT, np.array([0.0, 0.0, shift]), domain())
    X = X0 + np.array([0.0, 0.0, shift])
    cert = certificates(1, X, None, ys, cfg.epsilon)
    diam = _diameter(X[d1])
    info = {"image_diameter_D1": diam,
            "min_level_D1": float(np.min(X[d1][..., 2] + math.tan(1.0) * X[d1][..., 0])),
            "metric_min": float(np.min(metric_density(t, _grid_z(xs, ys))))}
    st = StageState(1, im, cert, None, 0.0, 0.0, X, info)
    st.ledger = properness_ledger(X, xs, ys, 1, cfg.epsilon)
    bad = _fails(cert)
    if bad:
        raise StageFailed({"stage": 1, "certificate": bad[0], "margin": bad[1],
                           "cert_margins": cert})
    return st


def _diameter(P: np.ndarray) -> float:
    P = P.reshape(-1, 3)
    lo, hi = P.min(axis=0), P.max(axis=0)
    return float(np.linalg.norm(hi - lo))


def _grid_z(xs, ys) -> np.ndarray:
    return (xs[None, :] + 1j * ys[:, None]).ravel()


# ------------------------------------------------------------ one stage

def zeta(n: int) -> float:
    return n - 1 + math.cos(1.0 / n) / math.cos(1.0 / (n * n - n))


def find_mu(Yvals_fn, n: int, xs: np.ndarray, dy: float) -> tuple[float, float]:
    """Smallest verified mu in (1/(n+1), 1/n) with Y(Theta) above x3 = n-1,
    Theta = [-2,2] x [mu, 1/n]; bisection with step floor (1/n-1/(n+1))/64."""
    lo, hi = 1.0 / (n + 1), 1.0 / n
    floor = (hi - lo) / 64

    def margin(mu):
        k = max(2, int(math.ceil((1.0 / n - mu) / dy)) + 1)
        rows = np.linspace(mu, 1.0 / n, k)
        Y = Yvals_fn(rows)
        return float(np.min(Y[..., 2])) - (n - 1)

    cand = lo + floor
    m = margin(cand)
    if m > 0:
        return cand, m
    a, b = cand, hi
    mb = margin(b)
    if mb <= 0:
        raise StageFailed({"stage": n, "certificate": "mu", "margin": mb,
                           "detail": "Y([-2,2] x {1/n}) not above x3 = n-1"})
    while b - a > floor:
        mid = 0.5 * (a + b)
        mm = margin(mid)
        if mm > 0:
            b, mb = mid, mm
        else:
            a = mid
    if b >= hi:
        b = hi - floor
        mb = margin(b)
        if mb <= 0:
            raise StageFailed({"stage": n, "certificate": "mu", "margin": mb})
    return b, mb


def _deformed_triple(Y: NullTriple, k) -> NullTriple:
    """Gauss map g -> g e^k with phi3 fixed: eta1 -> e^{-k} eta1,
    eta2 -> e^{k} eta2."""
    f1, f2, f3 = (p.density for p in Y.phi)
    eta1 = f1 - 1j * f2
    eta2 = -f1 - 1j * f2
    e_plus = Exp(k)
    e_minus = Exp(-1.0 * k)
    n1 = e_minus * eta1
    n2 = e_plus * eta2
    return NullTriple((0.5 * (n1 - n2), 0.5j * (n1 + n2), f3))


def _pick_arc(sdY: SpinData, n: int, mu: float, rng: np.random.Generator,
              tries: int = 20) -> DeformArc:
    last = None
    for _ in range(tries):
        xa = float(rng.uniform(-1.5, 1.5))
        xb = float(np.clip(xa + rng.uniform(-0.1, 0.1), -1.9, 1.9))
        arc = DeformArc(Path.segment(complex(xa, 1.0 / n), complex(xb, mu)))
        try:
            arc.check(sdY)
            return arc
        except ZeroOnArc as e:
            last = e
    raise StageFailed({"stage": n, "certificate": "arc", "margin": None,
                       "detail": str(last)})


def _log_rho_samples(fam, n_arc: int = 2001) -> tuple[np.ndarray, np.ndarray]:
    w = fam.arc.width(fam.t)
    u = np.unique(np.concatenate([
        np.linspace(0, 1, n_arc),
        np.linspace(1 / 3, 1 / 3 + w, 129), np.linspace(2 / 3 - w, 2 / 3, 129)]))
    r = fam.rho(u)
    lr = np.log(np.abs(r)) + 1j * np.unwrap(np.angle(r))
    lr = lr - 1j * 2 * np.pi * np.round(lr[0].imag / (2 * np.pi))
    return fam.arc.z(u), lr


def advance_stage(prev: StageState, cfg: StageConfig) -> StageState:
    n = prev.n + 1
    eps = cfg.epsilon
    qc = cfg.quad()
    xs, ys = cert_grid(cfg)
    L = WedgeRotation(1.0 / (n - 1), n - 1.0)
    Y = rotate_immersion(prev.immersion, L)
    dy = float(np.min(np.diff(ys)))

    def Y_rows(rows):
        return sample_grid(Y, xs, np.asarray(rows), qc)

    mu, mu_margin = find_mu(Y_rows, n, xs, dy)
    delta_rows = np.unique(np.append(ys[ys <= mu + 1e-12], mu))
    Yd = Y_rows(delta_rows)
    z = zeta(n)
    target = Wedge(z, -1.0 / (n * (n - 1)))
    lam = choose_lambda(Yd.reshape(-1, 3), target, 0.0, direction=-1)
    info = {"zeta": z, "mu_margin": mu_margin, "attempts": []}

    def finish(Ym: Immersion, t0: float, extra: dict):
        Xim = rotate_immersion(Ym, L.inverse())
        X = sample_grid(Xim, xs, ys, qc)
        cert = certificates(n, X, prev.values, ys, eps)
        # Theta and Delta wedge conditions, including the mu row
        Xmu = sample_grid(Xim, xs, np.array([mu]), qc)
        th = np.concatenate([X[_rows(ys, mu, 1.0 / n)], Xmu])
        de = np.concatenate([X[ys <= mu + 1e-12], Xmu])
        cert["b_theta"] = float(np.min(_level(th, 1.0 / (n - 1), n - 1)))
        cert["c_delta"] = float(np.min(_level(de, 1.0 / n, n)))
        met = metric_density(Xim.triple, _grid_z(xs, ys))
        floor = 1e-8 * float(np.max(met))
        cert["metric_floor"] = float(np.min(met) - floor)
        return Xim, X, cert, dict(extra)

    def failing(cert):
        bad = _fails(cert)
        if bad:
            return bad
        for key in ("b_theta", "c_delta", "metric_floor"):
            if not cert[key] > 0:
                return key, cert[key]
        return None

    if lam == 0.0:
        Xim, X, cert, extra = finish(Y, 0.0, {"deformation": "none"})
        bad = failing(cert)
        if bad:
            raise StageFailed({"stage": n, "certificate": bad[0], "margin": bad[1],
                               "cert_margins": cert, "mu": mu, "lambda": lam})
        st = StageState(n, Xim, cert, mu, lam, 0.0, X, {**info, **extra})
        st.ledger = properness_ledger(X, xs, ys, n, eps)
        st.info["sup_diff_prev"] = float(np.max(np.linalg.norm(X - prev.values, axis=-1)))
        return st

    rng = np.random.default_rng([cfg.seed, n])
    gY = gauss_map(Y.triple)
    sdY = SpinData(gY, Y.triple.phi[2])
    d_prev = (X_RANGE[0], X_RANGE[1], 1.0 / n, Y_RANGE[1])
    d_delta = (X_RANGE[0], X_RANGE[1], Y_RANGE[0], mu)
    runge_eps = cfg.runge_eps
    best = None
    for attempt in range(cfg.retries + 1):
        try:
            arc = _pick_arc(sdY, n, mu, rng)
            t0 = shoot_t(sdY, arc, lam, cfg.shoot_tol, cfg=qc)
            fam = rho_family(sdY, arc, t0)
        except (ZeroOnArc, BlendFailure, BracketNotFound) as e:
            info["attempts"].append({"attempt": attempt, "error": type(e).__name__,
                                     "detail": str(e)})
            runge_eps *= 0.5
            continue
        K = CompactSet.rectangles_with_arcs([d_prev, d_delta], [arc.gamma],
                                            boundary_samples=1024)
        zb = np.concatenate([CompactSet.rectangle(*r).boundary_points()
                             for r in (d_prev, d_delta)])
        za, la = _log_rho_samples(fam)
        zs = np.concatenate([zb, za])
        vals = np.concatenate([np.zeros(zb.size, complex), la])
        try:
            kfit = approx_samples(zs, vals, K, runge_eps, max_degree=cfg.max_degree)
        except DegreeBudgetExceeded:
            kfit = approx_samples(zs, vals, K, runge_eps, degree=cfg.max_degree)
        Ym = Immersion(_deformed_triple(Y.triple, kfit), Y.base_point,
                       Y.base_value, Y.domain, Y.base_conj)
        try:
            Xim, X, cert, extra = finish(Ym, t0, {})
        except WeierforgeError as e:
            info["attempts"].append({"attempt": attempt, "error": type(e).__name__,
                                     "detail": str(e)})
            runge_eps *= 0.5
            continue
        rec = {"attempt": attempt, "t0": t0, "runge_eps": runge_eps,
               "runge_degree": kfit.degree, "runge_fit_error": kfit.sup_error,
               "arc": [[arc.gamma.start.real, arc.gamma.start.imag],
                       [arc.gamma.end.real, arc.gamma.end.imag]],
               "cert": cert}
        info["attempts"].append(rec)
        bad = failing(cert)
        if bad is None:
            st = StageState(n, Xim, cert, mu, lam, t0, X, {**info, **rec})
            st.ledger = properness_ledger(X, xs, ys, n, eps)
            st.info["sup_diff_prev"] = float(
                np.max(np.linalg.norm(X - prev.values, axis=-1)))
            return st
        if best is None or bad[1] > best[1]:
            best = (bad[0], bad[1], cert)
        runge_eps *= 0.5
    payload = {"stage": n, "mu": mu, "lambda": lam,
               "certificate": best[0] if best else "deformation",
               "margin": best[1] if best else None,
               "cert_margins": best[2] if best else None,
               "attempts": len(info["attempts"])}
    raise StageFailed(payload)


def run(cfg: StageConfig) -> list[StageState]:
    states = [init_stage(cfg)]
    for _ in range(2, cfg.max_stage + 1):
        try:
            states.append(advance_stage(states[-1], cfg))
        except StageFailed as e:
            e.partial = states
            raise
    return states


def report(states: list[StageState], cfg: StageConfig) -> list[dict]:
    out = []
    prev = None
    for st in states:
        c = st.certificates
        out.append({
            "stage": st.n,
            "mu": st.mu,
            "lambda": st.lam,
            "t0": st.t0,
            "cert_margins": {k: c.get(k) for k in ("i", "ii", "iii", "iv")},
            "stage_margins": {k: c.get(k) for k in ("b_theta", "c_delta",
                                                    "metric_floor") if k in c},
            "properness_ledger": st.ledger,
            "sup_diff_prev": (None if prev is None else float(
                np.max(np.linalg.norm(st.values - prev.values, axis=-1)))),
            "zeta": st.info.get("zeta"),
        })
        prev = st
    return out
