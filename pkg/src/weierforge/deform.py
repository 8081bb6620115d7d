"""Wedge rotations, the rho_t Gauss-map deformation along an arc, the
intermediate-value shooting for its parameter, and the shift selector."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .holo_core import (Config, Path, WeierforgeError, integrate_segments)
from .weierstrass import Immersion, NullTriple, SpinData
from .wedge import Wedge


class ZeroOnArc(WeierforgeError):
    pass


class BlendFailure(WeierforgeError):
    pass


class BracketNotFound(WeierforgeError):
    pass


class WrongSign(WeierforgeError):
    pass


# ------------------------------------------------------------ rotations

@dataclass(frozen=True)
class WedgeRotation:
    """Rotation by ``angle`` about the line {x1 = 0, x3 = height}.

    Chosen so that the boundary plane of Pi_height(angle) goes to the
    horizontal plane x3 = height.
    """

    angle: float
    height: float

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])

    def inverse(self) -> "WedgeRotation":
        return WedgeRotation(-self.angle, self.height)


def rotate_point(r: WedgeRotation, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    off = np.array([0.0, 0.0, r.height])
    return (p - off) @ r.matrix.T + off


def rotate_triple(t: NullTriple, r: WedgeRotation) -> NullTriple:
    A = r.matrix
    f = [p.density for p in t.phi]
    comps = []
    for i in range(3):
        acc = None
        for j in range(3):
            if A[i, j] == 0.0:
                continue
            term = f[j] if A[i, j] == 1.0 else float(A[i, j]) * f[j]
            acc = term if acc is None else acc + term
        comps.append(acc)
    return NullTriple(comps)


def rotate_immersion(im: Immersion, r: WedgeRotation) -> Immersion:
    return Immersion(rotate_triple(im.triple, r), im.base_point,
                     rotate_point(r, im.base_value), im.domain,
                     r.matrix @ im.base_conj, list(im.loops))


# ------------------------------------------------------------ rho_t family

@dataclass(frozen=True)
class DeformArc:
    """Arc gamma parametrised by normalised arc length u in [0, 1]."""

    gamma: Path

    @staticmethod
    def width(t: float) -> float:
        return 1.0 / (4.0 + t * t)

    def z(self, u) -> np.ndarray:
        return self.gamma.point_at(u)

    def dz_du(self, u) -> np.ndarray:
        a, b = self.gamma.segments()
        lens = np.abs(b - a)
        total = lens.sum()
        cum = np.concatenate([[0.0], np.cumsum(lens)]) / total
        k = np.clip(np.searchsorted(cum, np.asarray(u, float), side="right") - 1,
                    0, a.size - 1)
        return (b - a)[k] / lens[k] * total

    def breakpoints(self, t: float | None = None) -> np.ndarray:
        a, b = self.gamma.segments()
        lens = np.abs(b - a)
        pts = list(np.cumsum(lens)[:-1] / lens.sum())
        pts += [1 / 3, 2 / 3]
        if t is not None:
            w = self.width(t)
            pts += [1 / 3 + w, 2 / 3 - w]
        return np.unique(np.clip(np.array([0.0, 1.0] + pts), 0.0, 1.0))

    def check(self, sd: SpinData, n: int = 2001) -> tuple[float, float]:
        """min and max of |g f3| along the arc (f3 = phi3 / du)."""
        u = np.linspace(0, 1, n)
        z = self.z(u)
        v = np.abs(sd.g(z) * sd.phi3.density(z) * self.dz_du(u))
        if not np.all(np.isfinite(v)) or v.min() <= 1e-14 * max(v.max(), 1e-300):
            raise ZeroOnArc("g * phi3 vanishes (or blows up) on the arc")
        return float(v.min()), float(v.max())


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)


@dataclass
class ArcSpinData:
    """(g * rho_t, phi3) restricted to an arc, as functions of u."""

    sd: SpinData
    arc: DeformArc
    t: float
    A0: float
    A1: float
    A2: float

    def f3u(self, u) -> np.ndarray:
        z = self.arc.z(u)
        return self.sd.phi3.density(z) * self.arc.dz_du(u)

    def rho(self, u) -> np.ndarray:
        u = np.asarray(u, float)
        z = self.arc.z(u)
        P = self.t / (self.sd.g(z) * self.f3u(u))
        w = self.arc.width(self.t)
        s = np.where(u < 1 / 3 + w, smoothstep((u - 1 / 3) / w),
                     smoothstep((2 / 3 - u) / w))
        s = np.where((u <= 1 / 3) | (u >= 2 / 3), 0.0, s)
        return 1.0 + s * (P - 1.0)

    def g_hat(self, u) -> np.ndarray:
        return self.sd.g(self.arc.z(u)) * self.rho(u)

    def psi1(self, u) -> np.ndarray:
        gh = self.g_hat(u)
        return 0.5 * (1.0 / gh - gh) * self.f3u(u)


def rho_family(sd: SpinData, arc: DeformArc, t: float, n: int = 4001) -> ArcSpinData:
    if abs(t) < 1.0:
        raise ValueError("the plateau formula needs |t| >= 1")
    lo, hi = arc.check(sd)
    out = ArcSpinData(sd, arc, float(t), 0.0, 1.0 / lo, 1.0)
    w = arc.width(t)
    u = np.unique(np.concatenate([np.linspace(0, 1, n),
                                  np.linspace(1 / 3, 1 / 3 + w, 257),
                                  np.linspace(2 / 3 - w, 2 / 3, 257)]))
    r = np.abs(out.rho(u))
    floor = 1e-10 * max(1.0, abs(t) / lo)
    if r.min() <= floor:
        raise BlendFailure(f"|rho_t| drops to {r.min():.3g} on the blend")
    out.A0 = float(r.min())
    return out


def _arc_integral(fn: Callable, arc: DeformArc, t: float | None,
                  cfg: Config | None) -> complex:
    bp = arc.breakpoints(t)
    sub = np.linspace(0, 1, 9)
    a = (bp[:-1, None] + (bp[1:] - bp[:-1])[:, None] * sub[None, :-1]).ravel()
    b = (bp[:-1, None] + (bp[1:] - bp[:-1])[:, None] * sub[None, 1:]).ravel()
    keep = b > a
    vals = integrate_segments(lambda u: fn(np.real(u)), a[keep].astype(complex),
                              b[keep].astype(complex), cfg, 1.0)
    return complex(vals.sum())


def arc_shift_residual(sd: SpinData, arc: DeformArc, target_shift: float,
                       t: float, cfg: Config | None = None) -> float:
    """Re int psi_hat_1 - (Re int psi_1 - target_shift); t = 0 is the
    undeformed data."""
    def psi1(u):
        z = arc.z(u)
        g = sd.g(z)
        return 0.5 * (1.0 / g - g) * sd.phi3.density(z) * arc.dz_du(u)

    base = _arc_integral(psi1, arc, None, cfg).real
    if t == 0.0:
        return float(target_shift)
    fam = rho_family(sd, arc, t, n=257)
    return float(_arc_integral(fam.psi1, arc, t, cfg).real - base + target_shift)


def shoot_t(sd: SpinData, arc: DeformArc, target_shift: float,
            tol: float | None = None, max_exp: int = 20,
            cfg: Config | None = None) -> float:
    """Parameter t0 whose rho_t deformation moves the arc's x1-increment by
    -target_shift.  Returns 0.0 (no deformation) when no change is needed."""
    if tol is None:
        tol = 1e-9 * abs(target_shift) + 1e-12
    if abs(target_shift) <= tol:
        return 0.0
    arc.check(sd)

    def base_int():
        def psi1(u):
            z = arc.z(u)
            g = sd.g(z)
            return 0.5 * (1.0 / g - g) * sd.phi3.density(z) * arc.dz_du(u)
        return _arc_integral(psi1, arc, None, cfg).real

    base = base_int()

    def R(t):
        fam = ArcSpinData(sd, arc, t, 0.0, 0.0, 0.0)
        return _arc_integral(fam.psi1, arc, t, cfg).real - base + target_shift

    # interleave signs so the bracket with the smallest |t| is found first
    prev = {1.0: None, -1.0: None}
    best = None
    for k in range(max_exp + 1):
        for sign in (1.0, -1.0):
            t = sign * 2.0 ** k
            r = R(t)
            if abs(r) < tol:
                return t
            if prev[sign] is not None and np.sign(r) != np.sign(prev[sign][1]):
                best = (prev[sign][0], prev[sign][1], t, r)
                break
            prev[sign] = (t, r)
        if best is not None:
            break
    if best is None:
        raise BracketNotFound(
            f"no sign change of the shift residual for |t| in [1, 2^{max_exp}]")
    ta, ra, tb, rb = best
    for _ in range(200):
        tm = 0.5 * (ta + tb)
        rm = R(tm)
        if abs(rm) < tol or tm in (ta, tb):
            rho_family(sd, arc, tm)  # validates the blend at the answer
            return tm
        if np.sign(rm) == np.sign(ra):
            ta, ra = tm, rm
        else:
            tb = tm
    return 0.5 * (ta + tb)


# --------------------------------------------------------------- lambda

def choose_lambda(points, target: Wedge, margin: float = 0.0,
                  direction: int = -1, headroom: float = 0.01) -> float:
    """Least lambda >= 0 (plus headroom) such that every point moved by
    direction * lambda along x1 is farther than ``margin`` from the wedge."""
    slope = direction * math.tan(target.theta)
    if slope <= 0:
        raise WrongSign("translation along x1 cannot leave this wedge")
    p = np.atleast_2d(np.asarray(points, float))
    need = (margin / math.cos(target.theta) - target.level(p)) / slope
    lam = max(0.0, float(np.max(need)))
    if lam == 0.0 and margin > 0:
        return 0.0
    if lam == 0.0 and np.min(target.level(p)) <= 0:
        # points on the boundary: strictness comes from headroom alone
        lam = 1e-12
    return lam * (1.0 + headroom)
