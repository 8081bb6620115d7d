"""Null triples, conformal minimal immersions, Gauss map, metric and flux."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .holo_core import (CompactSet, Config, HoloFunction, Laurent,
                        OneForm, Path, WeierforgeError, as_holo,
                        integrate_segments, _merge_poles)


class RegularityFailure(WeierforgeError):
    pass


class NullityFailure(WeierforgeError):
    pass


class RepresentationOverflow(WeierforgeError):
    pass


class DegenerateTriple(WeierforgeError):
    pass


NULL_TOL = 1e-10


def _form(w) -> OneForm:
    return w if isinstance(w, OneForm) else OneForm(w)


@dataclass
class SpinData:
    """Stereographic Gauss map g and height differential phi3."""

    g: HoloFunction
    phi3: OneForm

    def __post_init__(self):
        self.g = as_holo(self.g)
        self.phi3 = _form(self.phi3)
        if isinstance(self.g, Laurent) and self.g.is_zero():
            raise ValueError("Gauss map is identically zero")

    def check_regularity(self, domain: CompactSet) -> None:
        """At zeros and poles of g inside the domain, phi3 must vanish to the
        order |ord g| so that phi1, phi2 stay finite and the metric positive."""
        zg = self.g.known_zeros()
        z3 = self.phi3.density.known_zeros()
        if zg is None or z3 is None:
            return
        d3 = z3.as_dict()
        pts = dict(zg.as_dict())
        for p, m in self.g.poles.entries:
            pts[p] = pts.get(p, 0) - m
        for p, m in pts.items():
            if not domain.contains(np.array([p]))[0]:
                continue
            have = sum(k for q, k in d3.items() if abs(q - p) < 1e-9)
            if have != abs(m):
                raise RegularityFailure(
                    f"phi3 vanishes to order {have} at {p}, Gauss map order {m}")
        for q, k in d3.items():
            if domain.contains(np.array([q]))[0] and not any(
                    abs(q - p) < 1e-9 for p in pts):
                raise RegularityFailure(f"phi3 vanishes at {q} where g is regular")


class NullTriple:
    """(phi1, phi2, phi3) with phi1^2 + phi2^2 + phi3^2 = 0."""

    def __init__(self, phi: Sequence):
        if len(phi) != 3:
            raise ValueError("a triple has three components")
        self.phi = tuple(_form(p) for p in phi)
        self.poles = _merge_poles(*(p.density.poles for p in self.phi))

    def __call__(self, z) -> np.ndarray:
        """Stack of the three densities, shape (3, *z.shape)."""
        z = np.asarray(z, dtype=complex)
        cache: dict = {}
        return np.stack([p.density.ev(z, cache) for p in self.phi])

    def validate(self, domain: CompactSet, n: int = 64) -> "NullTriple":
        z = grid_points(domain, n)
        v = self(z)
        m = np.sum(np.abs(v) ** 2, axis=0)
        if not np.all(np.isfinite(m)) or m.min() <= 0:
            raise RegularityFailure("metric vanishes or blows up on the grid")
        res = np.abs(np.sum(v ** 2, axis=0))
        if np.max(res / m) > NULL_TOL:
            raise NullityFailure(f"nullity residual {np.max(res / m):.3g}")
        return self

    def nullity_residual(self, z) -> np.ndarray:
        v = self(z)
        return np.abs(np.sum(v ** 2, axis=0)) / np.sum(np.abs(v) ** 2, axis=0)

    def integrals(self, a, b, cfg: Config | None = None,
                  clearance_scale: float | None = None) -> np.ndarray:
        """Segment integrals of the three forms, shape (3, nseg)."""
        return integrate_segments(self, a, b, cfg, clearance_scale, self.poles)

    def loop_integral(self, loop: Path, cfg: Config | None = None) -> np.ndarray:
        a, b = loop.segments()
        return self.integrals(a, b, cfg, loop.diameter() / math.sqrt(2)).sum(axis=1)


def grid_points(domain: CompactSet, n: int = 64) -> np.ndarray:
    if domain.kind == "annulus":
        r = np.linspace(max(domain.r_in, 1e-3 * domain.r_out), domain.r_out, n)
        t = 2 * np.pi * np.arange(n) / n
        return (domain.center + r[:, None] * np.exp(1j * t)[None, :]).ravel()
    pts = []
    for x0, x1, y0, y1 in domain.rects:
        X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
        pts.append((X + 1j * Y).ravel())
    return np.concatenate(pts)


def from_spin_data(sd: SpinData, domain: CompactSet | None = None) -> NullTriple:
    g, f3 = sd.g, sd.phi3.density
    inv = 1.0 / g
    t = NullTriple((0.5 * (inv - g) * f3, 0.5j * (inv + g) * f3, f3))
    if domain is not None:
        sd.check_regularity(domain)
        t.validate(domain)
    return t


def gauss_map(t: NullTriple) -> HoloFunction:
    f1, f2, f3 = (p.density for p in t.phi)
    den = f1 - 1j * f2
    if isinstance(den, Laurent) and den.is_zero():
        raise DegenerateTriple("phi1 - i phi2 vanishes identically")
    probe = np.exp(2j * np.pi * np.arange(7) / 7) * 0.37 + 0.11
    with np.errstate(all="ignore"):
        vals = np.abs(den(probe))
    if np.all(vals[np.isfinite(vals)] < 1e-300):
        raise DegenerateTriple("phi1 - i phi2 vanishes on probe points")
    return f3 / den


def metric_density(t: NullTriple, z) -> float | np.ndarray:
    v = t(z)
    m = np.sum(np.abs(v) ** 2, axis=0)
    return float(m) if np.ndim(m) == 0 else m


def flux(t: NullTriple, loop: Path, cfg: Config | None = None) -> np.ndarray:
    if not loop.closed and abs(loop.start - loop.end) > 1e-12:
        raise ValueError("flux needs a closed loop")
    return t.loop_integral(loop, cfg).imag


def real_periods(t: NullTriple, loop: Path, cfg: Config | None = None) -> np.ndarray:
    return t.loop_integral(loop, cfg).real


@dataclass
class FluxVector:
    loop: Path
    value: np.ndarray

    @classmethod
    def of(cls, t: NullTriple, loop: Path) -> "FluxVector":
        return cls(loop, flux(t, loop))


@dataclass
class Immersion:
    triple: NullTriple
    base_point: complex
    base_value: np.ndarray
    domain: CompactSet
    base_conj: np.ndarray | None = None
    loops: list = field(default_factory=list)

    def __post_init__(self):
        self.base_point = complex(self.base_point)
        self.base_value = np.asarray(self.base_value, dtype=float).reshape(3)
        if self.base_conj is None:
            self.base_conj = np.zeros(3)
        self.base_conj = np.asarray(self.base_conj, dtype=float).reshape(3)

    @property
    def complex_base(self) -> np.ndarray:
        return self.base_value + 1j * self.base_conj

    def period_defect(self) -> float:
        if not self.loops:
            return 0.0
        return max(float(np.max(np.abs(real_periods(self.triple, c))))
                   for c in self.loops)

    def grid(self, xs, ys, cfg: Config | None = None) -> np.ndarray:
        return sample_grid(self, xs, ys, cfg)


def _path_from(im: Immersion, z: complex, p: Path | None) -> Path | None:
    z = complex(z)
    if p is None:
        if z == im.base_point:
            return None
        return Path.segment(im.base_point, z)
    tol = 1e-12 * max(1.0, abs(z), abs(im.base_point))
    if abs(p.start - im.base_point) > tol or abs(p.end - z) > tol:
        raise ValueError("path must run from the base point to z")
    return p


def _integral(im: Immersion, z, p, cfg) -> np.ndarray:
    p = _path_from(im, z, p)
    if p is None:
        return np.zeros(3, dtype=complex)
    a, b = p.segments()
    return im.triple.integrals(a, b, cfg, im.domain.diameter()).sum(axis=1)


def immerse(im: Immersion, z: complex, p: Path | None = None,
            cfg: Config | None = None) -> np.ndarray:
    return im.base_value + _integral(im, z, p, cfg).real


def conjugate_null_curve(im: Immersion, z: complex, p: Path | None = None,
                         cfg: Config | None = None) -> np.ndarray:
    return im.complex_base + _integral(im, z, p, cfg)


def sample_grid(im: Immersion, xs, ys, cfg: Config | None = None,
                with_conjugate: bool = False) -> np.ndarray:
    """X on the tensor grid xs x ys, shape (len(ys), len(xs), 3).

    Integration runs from the base point to a reference column, along the
    column, then along each row, so every grid value is a cumulative sum of
    short well-resolved segment integrals.
    """
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    p0 = im.base_point
    jc = int(np.argmin(np.abs(xs - p0.real)))
    xc = xs[jc]
    # column nodes: all ys plus the base height
    col = np.unique(np.append(ys, p0.imag))
    i0 = int(np.searchsorted(col, p0.imag))
    a_col = xc + 1j * col[:-1]
    b_col = xc + 1j * col[1:]
    a_row = (xs[:-1][None, :] + 1j * ys[:, None]).ravel()
    b_row = (xs[1:][None, :] + 1j * ys[:, None]).ravel()
    head_a = np.array([p0])
    head_b = np.array([xc + 1j * p0.imag])
    a = np.concatenate([head_a, a_col, a_row])
    b = np.concatenate([head_b, b_col, b_row])
    keep = a != b
    seg = np.zeros((3, a.size), dtype=complex)
    seg[:, keep] = im.triple.integrals(a[keep], b[keep], cfg, im.domain.diameter())
    head = seg[:, 0]
    cseg = seg[:, 1:1 + col.size - 1]
    rseg = seg[:, 1 + col.size - 1:].reshape(3, ys.size, xs.size - 1)
    ccum = np.concatenate([np.zeros((3, 1)), np.cumsum(cseg, axis=1)], axis=1)
    ccum = ccum - ccum[:, i0:i0 + 1] + head[:, None]
    at_col = ccum[:, np.searchsorted(col, ys)]  # (3, ny)
    rcum = np.concatenate([np.zeros((3, ys.size, 1)), np.cumsum(rseg, axis=2)],
                          axis=2)
    rcum = rcum - rcum[:, :, jc:jc + 1] + at_col[:, :, None]
    F = np.moveaxis(rcum, 0, -1)
    if with_conjugate:
        return im.complex_base + F
    return im.base_value + F.real


# --------------------------------------------------------------- checks

def discrete_laplacian_max(values: np.ndarray, h: float) -> np.ndarray:
    """Max over interior nodes of |5-point Laplacian|, per coordinate."""
    u = values
    lap = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2]
           - 4 * u[1:-1, 1:-1]) / h ** 2
    return np.max(np.abs(lap), axis=(0, 1))


def harmonicity_slopes(im: Immersion, x0: float, y0: float, side: float,
                       hs: Sequence[float], cfg: Config | None = None) -> np.ndarray:
    """Log-log slopes of the discrete Laplacian against h, per coordinate.

    The Laplacian is compared at the interior nodes of the coarsest grid,
    which every finer grid contains when the h values divide each other.
    """
    hmax = max(hs)
    errs = []
    for h in hs:
        n = int(round(side / h))
        xs = x0 + h * np.arange(n + 1)
        ys = y0 + h * np.arange(n + 1)
        u = sample_grid(im, xs, ys, cfg)
        lap = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2]
               - 4 * u[1:-1, 1:-1]) / h ** 2
        r = hmax / h
        stride = int(round(r))
        if abs(r - stride) < 1e-9:
            idx = np.arange(stride - 1, n - 1, stride)
            lap = lap[np.ix_(idx, idx)]
        errs.append(np.max(np.abs(lap), axis=(0, 1)))
    errs = np.array(errs)
    lh = np.log(np.asarray(hs, float))
    return np.array([np.polyfit(lh, np.log(errs[:, k]), 1)[0] for k in range(3)])


def conformality_defect(im: Immersion, z) -> tuple[float, float]:
    """Worst relative |<u,v>| and ||u|-|v|| for u = X_x, v = X_y.

    X_x = Re Phi and X_y = -Im Phi exactly, so the defects are computed from
    the densities themselves.
    """
    v = im.triple(np.asarray(z, complex))
    u, w = v.real, -v.imag
    nu = np.linalg.norm(u, axis=0)
    nw = np.linalg.norm(w, axis=0)
    inner = np.abs(np.sum(u * w, axis=0)) / (nu * nw)
    length = np.abs(nu - nw) / nu
    return float(inner.max()), float(length.max())


# ------------------------------------------------------------- examples

def enneper() -> SpinData:
    return SpinData(Laurent.monomial(1), OneForm(Laurent.monomial(1)))


def enneper_closed_form(z) -> np.ndarray:
    z = np.asarray(z, complex)
    F = np.stack([0.5 * (z - z ** 3 / 3), 0.5j * (z + z ** 3 / 3), z ** 2 / 2])
    return np.moveaxis(F.real, 0, -1)


def catenoid() -> SpinData:
    return SpinData(Laurent.monomial(1), OneForm(Laurent.monomial(-1)))


def flat(c: complex = 1.0) -> SpinData:
    return SpinData(Laurent.constant(c), OneForm(Laurent.constant(1.0)))


# ---------------------------------------------------------------- export

def _fmt(x: float) -> str:
    return repr(float(x))


def obj_text(X: np.ndarray) -> str:
    """Wavefront OBJ of a (ny, nx, 3) sample grid with quad faces."""
    ny, nx, _ = X.shape
    out = io.StringIO()
    for p in X.reshape(-1, 3):
        out.write(f"v {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n")
    for i in range(ny - 1):
        for j in range(nx - 1):
            a = i * nx + j + 1
            out.write(f"f {a} {a + 1} {a + nx + 1} {a + nx}\n")
    return out.getvalue()


def csv_text(xs, ys, X: np.ndarray) -> str:
    out = io.StringIO()
    out.write("zre,zim,x1,x2,x3\n")
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            p = X[i, j]
            out.write(f"{_fmt(x)},{_fmt(y)},{_fmt(p[0])},{_fmt(p[1])},{_fmt(p[2])}\n")
    return out.getvalue()


def read_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = np.array([[float(v) for v in line.split(",")]
                     for line in text.strip().splitlines()[1:]])
    xs = np.unique(rows[:, 0])
    ys = np.unique(rows[:, 1])
    X = rows[:, 2:].reshape(ys.size, xs.size, 3)
    return xs, ys, X
