"""Closing real periods and prescribing flux on planar annuli.

The Gauss map and height differential are corrected to (g e^{h1}, phi3 e^{h2})
with h1, h2 Laurent polynomials; the real and imaginary parts of their
coefficients are solved for by damped Newton on the loop periods.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .holo_core import (CompactSet, Config, Exp, HoloFunction, Laurent, OneForm,
                        Path, WeierforgeError, gauss_legendre,
                        integrate_segments)
from .weierstrass import SpinData, from_spin_data


class RankDeficient(WeierforgeError):
    pass


class NewtonDiverged(WeierforgeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


@dataclass
class PeriodProblem:
    sd: SpinData
    domain: CompactSet
    basis: list
    target_flux: list
    param_degree: int = 4

    def __post_init__(self):
        self.target_flux = [np.asarray(t, dtype=float).reshape(3)
                            for t in self.target_flux]
        if len(self.target_flux) != len(self.basis):
            raise ValueError("one target flux per basis loop")
        if self.param_degree < 0:
            raise ValueError("param_degree must be nonnegative")

    @property
    def frame(self) -> tuple[complex, float]:
        K = self.domain
        if K.kind == "annulus" and K.r_in > 0:
            return complex(K.center), math.sqrt(K.r_in * K.r_out)
        return K.frame()

    @property
    def exponents(self) -> np.ndarray:
        d = self.param_degree
        return np.arange(-d, d + 1)

    def laurent(self, coeffs: np.ndarray) -> Laurent:
        c, s = self.frame
        return Laurent(dict(zip(self.exponents.tolist(), coeffs)), c, s)


def period_map(pp: PeriodProblem, h1: HoloFunction, h2: HoloFunction,
               cfg: Config | None = None) -> list[np.ndarray]:
    g, f3 = pp.sd.g, pp.sd.phi3.density

    def dens(z):
        cache: dict = {}
        a = h1.ev(z, cache)
        b = h2.ev(z, cache)
        gz, fz = g.ev(z, cache), f3.ev(z, cache)
        # expm1 keeps the small-h regime free of cancellation
        return np.stack([np.expm1(b - a) * fz / gz, np.expm1(b + a) * gz * fz,
                         np.expm1(b) * fz])

    out = []
    for c in pp.basis:
        a, b = c.segments()
        v = integrate_segments(dens, a, b, cfg, c.diameter() / math.sqrt(2),
                               pp.sd.g.poles)
        out.append(v.sum(axis=1))
    return out


class _LoopQuadrature:
    """Fixed Gauss-Legendre nodes on every basis loop (16 per segment)."""

    def __init__(self, pp: PeriodProblem, order: int = 16, refine: int = 2):
        x, w = gauss_legendre(order)
        self.nodes, self.weights = [], []
        c, s = pp.frame
        for loop in pp.basis:
            a, b = loop.segments()
            sub = np.linspace(0, 1, refine + 1)
            A = (a[:, None] + (b - a)[:, None] * sub[None, :-1]).ravel()
            B = (a[:, None] + (b - a)[:, None] * sub[None, 1:]).ravel()
            z = A[:, None] + (B - A)[:, None] * x[None, :]
            self.nodes.append(z.ravel())
            self.weights.append(((B - A)[:, None] * w[None, :]).ravel())
        g, f3 = pp.sd.g, pp.sd.phi3.density
        self.eta1 = [f3(z) / g(z) for z in self.nodes]
        self.eta2 = [g(z) * f3(z) for z in self.nodes]
        self.phi3 = [f3(z) for z in self.nodes]
        ks = pp.exponents
        self.basis = [((z - c) / s)[None, :] ** ks[:, None] for z in self.nodes]


def _eta_to_phi(e1, e2, e3):
    return np.array([(e1 - e2) / 2, 1j * (e1 + e2) / 2, e3])


def _unpack(pp: PeriodProblem, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = pp.exponents.size
    a = x[:n] + 1j * x[n:2 * n]
    b = x[2 * n:3 * n] + 1j * x[3 * n:]
    return a, b


def _residual_and_jacobian(pp: PeriodProblem, q: _LoopQuadrature, x: np.ndarray,
                           jac: bool = True):
    a, b = _unpack(pp, x)
    n = a.size
    F, J = [], []
    for i in range(len(pp.basis)):
        Bk = q.basis[i]
        h1 = a @ Bk
        h2 = b @ Bk
        w = q.weights[i]
        y1 = np.exp(h2 - h1) * q.eta1[i] * w
        y2 = np.exp(h2 + h1) * q.eta2[i] * w
        y3 = np.exp(h2) * q.phi3[i] * w
        P = _eta_to_phi(y1.sum(), y2.sum(), y3.sum())
        F.append(np.concatenate([P.real, P.imag - pp.target_flux[i]]))
        if jac:
            # complex derivatives of the three periods w.r.t. a_k and b_k
            da = _eta_to_phi(-(Bk @ y1), Bk @ y2, np.zeros(n))
            db = _eta_to_phi(Bk @ y1, Bk @ y2, Bk @ y3)
            cols = np.concatenate([da, 1j * da, db, 1j * db], axis=1)
            J.append(np.concatenate([cols.real, cols.imag], axis=0))
    F = np.concatenate(F)
    return (F, np.concatenate(J, axis=0)) if jac else (F, None)


def corrected_spin(pp: PeriodProblem, x: np.ndarray) -> SpinData:
    a, b = _unpack(pp, x)
    h1, h2 = pp.laurent(a), pp.laurent(b)
    return SpinData(pp.sd.g * Exp(h1), OneForm(pp.sd.phi3.density * Exp(h2)))


def solve_periods(pp: PeriodProblem, max_iter: int = 50,
                  cfg: Config | None = None) -> tuple[SpinData, dict]:
    q = _LoopQuadrature(pp)
    nu = len(pp.basis)
    x = np.zeros(4 * pp.exponents.size)
    F, J = _residual_and_jacobian(pp, q, x)
    sv = np.linalg.svd(J, compute_uv=False)
    rank = int(np.sum(sv > 1e-9 * sv[0])) if sv.size else 0
    report = {
        "parameters": f"Laurent w^k, k={-pp.param_degree}..{pp.param_degree}, "
                      f"w=(z-{pp.frame[0]})/{pp.frame[1]:.6g}",
        "unknowns": int(x.size),
        "equations": int(F.size),
        "jacobian_rank": rank,
        "jacobian_singular_values": [float(v) for v in sv],
    }
    if rank < 6 * nu:
        raise RankDeficient(
            f"Jacobian rank {rank} < {6 * nu}; raise param_degree")
    scale = max(1.0, max(float(np.max(np.abs(t))) for t in pp.target_flux))
    history = [float(np.max(np.abs(F)))]

    def done(F):
        return np.max(np.abs(F)) <= 1e-12 * scale

    it = 0
    while not done(F) and it < max_iter:
        it += 1
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        lam, nF = 1.0, np.linalg.norm(F)
        while True:
            xn = x + lam * step
            Fn, _ = _residual_and_jacobian(pp, q, xn, jac=False)
            if np.all(np.isfinite(Fn)) and np.linalg.norm(Fn) < nF:
                break
            lam *= 0.5
            if lam < 2.0 ** -30:
                break
        if lam < 2.0 ** -30:
            if _acceptable(F, nu):
                break
            raise NewtonDiverged("damping could not reduce the residual", history)
        x = xn
        F, J = _residual_and_jacobian(pp, q, x)
        history.append(float(np.max(np.abs(F))))
    if not _acceptable(F, nu):
        raise NewtonDiverged(f"no convergence in {max_iter} iterations", history)
    sd = corrected_spin(pp, x)
    a, b = _unpack(pp, x)
    report.update({
        "iterations": it,
        "residual_history": history,
        "h1": {int(k): [float(v.real), float(v.imag)]
               for k, v in zip(pp.exponents, a)},
        "h2": {int(k): [float(v.real), float(v.imag)]
               for k, v in zip(pp.exponents, b)},
    })
    t = from_spin_data(sd)
    per = [t.loop_integral(c, cfg) for c in pp.basis]
    report["real_periods"] = [[float(v) for v in p.real] for p in per]
    report["flux"] = [[float(v) for v in p.imag] for p in per]
    report["flux_error"] = max(float(np.max(np.abs(p.imag - tf)))
                               for p, tf in zip(per, pp.target_flux))
    report["max_real_period"] = max(float(np.max(np.abs(p.real))) for p in per)
    return sd, report


def _acceptable(F: np.ndarray, nu: int) -> bool:
    F = F.reshape(nu, 6)
    return bool(np.max(np.abs(F[:, :3])) <= 1e-10 and np.max(np.abs(F[:, 3:])) <= 1e-8)


def catenoid_problem(target=(0.0, 0.0, 2 * math.pi), degree: int = 4,
                     r_in: float = 0.5, r_out: float = 2.0,
                     loop_vertices: int = 256) -> PeriodProblem:
    from .weierstrass import catenoid
    K = CompactSet.annulus(0.0, r_in, r_out)
    return PeriodProblem(catenoid(), K, [Path.circle(0, 1.0, loop_vertices)],
                         [np.asarray(target, float)], degree)
