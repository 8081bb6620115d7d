"""Finitely represented holomorphic functions, 1-forms and contour integrals.

Functions are expression trees whose leaves are Laurent polynomials in a
scaled variable ``w = (z - center) / scale`` (or Arnoldi-orthogonalised
polynomials for least-squares fits).  Interior nodes are sums, products,
quotients and exponentials, so every composite built by the pipeline is
evaluated exactly up to rounding instead of being resampled.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class WeierforgeError(Exception):
    """Base class of all library errors."""


class PoleHit(WeierforgeError):
    pass


class PoleTooClose(WeierforgeError):
    pass


class QuadratureNotConverged(WeierforgeError):
    pass


class ZeroOnPath(WeierforgeError):
    pass


class RefitFailure(WeierforgeError):
    pass


@dataclass
class Config:
    reapprox_degree: int = 64
    gl_order: int = 16
    quad_rtol: float = 1e-11
    max_depth: int = 24
    pole_clearance: float = 1e-6
    refit_tol: float = 1e-9


def default_config() -> Config:
    cfg = Config()
    env = os.environ.get("WEIERFORGE_QUAD_TOL")
    if env:
        cfg.quad_rtol = float(env)
    return cfg


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    if order not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        _GL_CACHE[order] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[order]


# ---------------------------------------------------------------- divisors

@dataclass(frozen=True)
class Divisor:
    """Finite formal sum of points with nonzero integer multiplicities."""

    entries: tuple[tuple[complex, int], ...] = ()

    def __post_init__(self):
        pts = [complex(p) for p, _ in self.entries]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if pts[i] == pts[j]:
                    raise ValueError(f"repeated divisor point {pts[i]}")
        for _, m in self.entries:
            if int(m) != m or m == 0:
                raise ValueError("multiplicities must be nonzero integers")
        ordered = tuple(sorted(((complex(p), int(m)) for p, m in self.entries),
                               key=lambda e: (e[0].real, e[0].imag)))
        object.__setattr__(self, "entries", ordered)

    @classmethod
    def from_dict(cls, d: dict) -> "Divisor":
        return cls(tuple((complex(p), int(m)) for p, m in d.items() if m != 0))

    def as_dict(self) -> dict[complex, int]:
        return {p: m for p, m in self.entries}

    @property
    def support(self) -> list[complex]:
        return [p for p, _ in self.entries]

    @property
    def degree(self) -> int:
        return sum(m for _, m in self.entries)

    @property
    def is_integral(self) -> bool:
        return all(m > 0 for _, m in self.entries)

    def __mul__(self, other: "Divisor") -> "Divisor":
        d = self.as_dict()
        for p, m in other.entries:
            d[p] = d.get(p, 0) + m
        return Divisor.from_dict(d)

    def inverse(self) -> "Divisor":
        return Divisor(tuple((p, -m) for p, m in self.entries))

    def __truediv__(self, other: "Divisor") -> "Divisor":
        return self * other.inverse()

    def __ge__(self, other: "Divisor") -> bool:
        return (self / other).is_integral

    def __le__(self, other: "Divisor") -> bool:
        return other >= self

    def __len__(self):
        return len(self.entries)


# ------------------------------------------------------------ functions

def _as_array(z) -> np.ndarray:
    return np.asarray(z, dtype=complex)


class HoloFunction:
    """Holomorphic (or meromorphic) function on a planar domain.

    Subclasses implement ``_ev``; ``poles`` lists the declared pole divisor
    (point -> order).  Evaluation of shared subtrees is memoised per call.
    """

    poles: Divisor = Divisor()

    def __call__(self, z):
        z = _as_array(z)
        return self.ev(z, {})

    def ev(self, z: np.ndarray, cache: dict) -> np.ndarray:
        key = id(self)
        hit = cache.get(key)
        if hit is not None:
            return hit
        val = self._ev(z, cache)
        cache[key] = val
        return val

    def _ev(self, z, cache):  # pragma: no cover - abstract
        raise NotImplementedError

    def derivative(self) -> "HoloFunction":  # pragma: no cover - abstract
        raise NotImplementedError

    def known_zeros(self) -> Divisor | None:
        """Zero divisor when it is known in closed form, else None."""
        return None

    # arithmetic builds nodes; Laurent overrides for closed forms
    def __add__(self, other):
        return Sum(self, as_holo(other))

    def __radd__(self, other):
        return Sum(as_holo(other), self)

    def __sub__(self, other):
        return Sum(self, -as_holo(other))

    def __rsub__(self, other):
        return Sum(as_holo(other), -self)

    def __neg__(self):
        return Prod(Laurent.constant(-1.0), self)

    def __mul__(self, other):
        return Prod(self, as_holo(other))

    def __rmul__(self, other):
        return Prod(as_holo(other), self)

    def __truediv__(self, other):
        return Quot(self, as_holo(other))

    def __rtruediv__(self, other):
        return Quot(as_holo(other), self)

    def exp(self) -> "HoloFunction":
        return Exp(self)

    def reciprocal(self) -> "HoloFunction":
        return Quot(Laurent.constant(1.0), self)


def as_holo(v) -> HoloFunction:
    if isinstance(v, HoloFunction):
        return v
    return Laurent.constant(complex(v))


def _merge_poles(*ds: Divisor) -> Divisor:
    out: dict[complex, int] = {}
    for d in ds:
        for p, m in d.entries:
            out[p] = max(out.get(p, 0), m)
    return Divisor.from_dict(out)


class Laurent(HoloFunction):
    """Laurent polynomial sum_k a_k w^k, w = (z - center)/scale."""

    def __init__(self, coeffs: dict[int, complex] | Sequence[complex],
                 center: complex = 0.0, scale: float = 1.0, low: int = 0):
        if isinstance(coeffs, dict):
            if coeffs:
                low = min(coeffs)
                high = max(coeffs)
                arr = np.zeros(high - low + 1, dtype=complex)
                for k, v in coeffs.items():
                    arr[k - low] += v
            else:
                arr = np.zeros(1, dtype=complex)
                low = 0
        else:
            arr = np.array(coeffs, dtype=complex).ravel()
            if arr.size == 0:
                arr = np.zeros(1, dtype=complex)
        # trim exact zeros at both ends
        nz = np.flatnonzero(arr)
        if nz.size == 0:
            arr, low = np.zeros(1, dtype=complex), 0
        else:
            arr, low = arr[nz[0]:nz[-1] + 1], low + int(nz[0])
        self.a = arr
        self.low = int(low)
        self.center = complex(center)
        self.scale = float(scale)
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        self.poles = (Divisor(((self.center, -self.low),))
                      if self.low < 0 else Divisor())

    @classmethod
    def constant(cls, c: complex) -> "Laurent":
        return cls([c])

    @classmethod
    def monomial(cls, k: int, coeff: complex = 1.0, center: complex = 0.0,
                 scale: float = 1.0) -> "Laurent":
        return cls({k: coeff}, center, scale)

    @classmethod
    def from_poly_z(cls, coeffs_ascending: Sequence[complex],
                    center: complex = 0.0) -> "Laurent":
        return cls(list(coeffs_ascending), center, 1.0)

    @property
    def high(self) -> int:
        return self.low + self.a.size - 1

    @property
    def coefficients(self) -> dict[int, complex]:
        return {self.low + i: complex(v) for i, v in enumerate(self.a) if v != 0}

    def is_constant(self) -> bool:
        return self.low == 0 and self.a.size == 1

    def is_zero(self) -> bool:
        return self.is_constant() and self.a[0] == 0

    def _ev(self, z, cache):
        w = (z - self.center) / self.scale
        out = np.zeros_like(w)
        # nonnegative exponents by Horner
        if self.high >= 0:
            start = max(self.low, 0)
            for k in range(self.high, start - 1, -1):
                out = out * w + self.a[k - self.low]
            if start > 0:
                out = out * w ** start
        if self.low < 0:
            with np.errstate(divide="ignore", invalid="ignore"):
                iw = 1.0 / w
            m0 = max(1, -self.high)
            neg = np.zeros_like(w)
            for m in range(-self.low, m0 - 1, -1):
                neg = neg * iw + self.a[-m - self.low]
            out = out + neg * iw ** m0
        return out

    def derivative(self) -> "Laurent":
        ks = np.arange(self.low, self.high + 1)
        return Laurent(self.a * ks / self.scale, self.center, self.scale,
                       self.low - 1)

    def known_zeros(self) -> Divisor | None:
        if self.is_zero():
            return None
        # zeros of w^low * P(w), P with P(0) = a[0] != 0
        p = self.a[::-1]
        roots = np.roots(p) if p.size > 1 else np.array([])
        d: dict[complex, int] = {}
        for r in roots:
            zr = complex(self.center + self.scale * r)
            d[zr] = d.get(zr, 0) + 1
        if self.low > 0:
            d[self.center] = d.get(self.center, 0) + self.low
        return Divisor.from_dict(d)

    def _compatible(self, other: "Laurent") -> bool:
        if other.is_constant() or self.is_constant():
            return True
        return self.center == other.center and self.scale == other.scale

    def _frame_of(self, other: "Laurent") -> tuple[complex, float]:
        if self.is_constant():
            return other.center, other.scale
        return self.center, self.scale

    def __add__(self, other):
        other = as_holo(other)
        if isinstance(other, Laurent) and self._compatible(other):
            c, s = self._frame_of(other)
            d = {k: v for k, v in self.coefficients.items()}
            for k, v in other.coefficients.items():
                d[k] = d.get(k, 0) + v
            return Laurent(d, c, s)
        return Sum(self, other)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return Laurent(-self.a, self.center, self.scale, self.low)

    def __sub__(self, other):
        return self.__add__(-as_holo(other))

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        other = as_holo(other)
        if isinstance(other, Laurent) and self._compatible(other):
            c, s = self._frame_of(other)
            return Laurent(np.convolve(self.a, other.a), c, s,
                           self.low + other.low)
        return Prod(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        other = as_holo(other)
        if (isinstance(other, Laurent) and other.a.size == 1
                and self._compatible(other)):
            c, s = self._frame_of(other)
            return Laurent(self.a / other.a[0], c, s, self.low - other.low)
        return Quot(self, other)

    def __rtruediv__(self, other):
        return as_holo(other).__truediv__(self)

    def reciprocal(self):
        return Laurent.constant(1.0) / self

    def __repr__(self):
        return (f"Laurent({self.coefficients}, center={self.center}, "
                f"scale={self.scale})")


class ArnoldiPoly(HoloFunction):
    """Polynomial stored in a Vandermonde-with-Arnoldi basis.

    q_0 = 1, H[k+1,k] q_{k+1} = w q_k - sum_j H[j,k] q_j, value sum d_k q_k.
    ``order`` > 0 evaluates the order-th z-derivative.
    """

    def __init__(self, d: np.ndarray, H: np.ndarray, center: complex,
                 scale: float, order: int = 0):
        self.d = np.asarray(d, dtype=complex)
        self.H = np.asarray(H, dtype=complex)
        self.center = complex(center)
        self.scale = float(scale)
        self.order = int(order)

    @property
    def degree(self) -> int:
        return self.d.size - 1

    def _ev(self, z, cache):
        w = (z - self.center) / self.scale
        n = self.d.size - 1
        m = self.order
        # Q[j][k] is the j-th w-derivative of q_k
        Q = [[None] * (n + 1) for _ in range(m + 1)]
        for j in range(m + 1):
            Q[j][0] = np.ones_like(w) if j == 0 else np.zeros_like(w)
        for k in range(n):
            for j in range(m + 1):
                v = w * Q[j][k]
                if j > 0:
                    v = v + j * Q[j - 1][k]
                for i in range(k + 1):
                    v = v - self.H[i, k] * Q[j][i]
                Q[j][k + 1] = v / self.H[k + 1, k]
        out = np.zeros_like(w)
        for k in range(n + 1):
            out = out + self.d[k] * Q[m][k]
        return out / self.scale ** m

    def derivative(self) -> "ArnoldiPoly":
        return ArnoldiPoly(self.d, self.H, self.center, self.scale,
                           self.order + 1)


def arnoldi_basis(w: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal polynomial basis on the sample set w (Brubeck-Nakatsukasa-
    Trefethen construction)."""
    m = w.size
    Q = np.zeros((m, n + 1), dtype=complex)
    H = np.zeros((n + 1, n), dtype=complex)
    Q[:, 0] = 1.0
    for k in range(n):
        v = w * Q[:, k]
        for _ in range(2):  # re-orthogonalise once
            for j in range(k + 1):
                c = np.vdot(Q[:, j], v) / m
                H[j, k] += c
                v = v - c * Q[:, j]
        H[k + 1, k] = np.linalg.norm(v) / math.sqrt(m)
        if H[k + 1, k] == 0:
            raise RefitFailure("sample set too small for requested degree")
        Q[:, k + 1] = v / H[k + 1, k]
    return Q, H


def lsq_poly(z: np.ndarray, f: np.ndarray, degree: int, center: complex,
             scale: float, weights: np.ndarray | None = None) -> ArnoldiPoly:
    """Weighted least-squares polynomial fit on scattered samples."""
    w = (np.asarray(z, complex) - center) / scale
    Q, H = arnoldi_basis(w, degree)
    A, b = Q, np.asarray(f, complex)
    if weights is not None:
        A, b = Q * weights[:, None], b * weights
    d = np.linalg.lstsq(A, b, rcond=None)[0]
    return ArnoldiPoly(d, H, center, scale)


class Sum(HoloFunction):
    def __init__(self, *terms: HoloFunction):
        self.terms = tuple(terms)
        self.poles = _merge_poles(*(t.poles for t in self.terms))

    def _ev(self, z, cache):
        out = self.terms[0].ev(z, cache)
        for t in self.terms[1:]:
            out = out + t.ev(z, cache)
        return out

    def derivative(self):
        return Sum(*(t.derivative() for t in self.terms))


class Prod(HoloFunction):
    def __init__(self, *factors: HoloFunction):
        self.factors = tuple(factors)
        self.poles = _merge_poles(*(f.poles for f in self.factors))

    def _ev(self, z, cache):
        out = self.factors[0].ev(z, cache)
        for f in self.factors[1:]:
            out = out * f.ev(z, cache)
        return out

    def derivative(self):
        terms = []
        for i, f in enumerate(self.factors):
            rest = self.factors[:i] + self.factors[i + 1:]
            terms.append(Prod(f.derivative(), *rest) if rest else f.derivative())
        return Sum(*terms)

    def known_zeros(self):
        out = Divisor()
        for f in self.factors:
            z = f.known_zeros()
            if z is None:
                return None
            out = out * z
        return out


class Quot(HoloFunction):
    """num/den; zeros of den are poles not known in closed form."""

    def __init__(self, num: HoloFunction, den: HoloFunction):
        self.num, self.den = num, den
        extra = den.known_zeros()
        self.poles = _merge_poles(num.poles, extra if extra else Divisor())

    def _ev(self, z, cache):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.num.ev(z, cache) / self.den.ev(z, cache)

    def derivative(self):
        return Quot(Sum(Prod(self.num.derivative(), self.den),
                        -Prod(self.num, self.den.derivative())),
                    Prod(self.den, self.den))

    def known_zeros(self):
        a, b = self.num.known_zeros(), self.den.known_zeros()
        if a is None or b is None:
            return None
        return a / b


class Exp(HoloFunction):
    def __init__(self, f: HoloFunction):
        self.f = f
        self.poles = f.poles

    def _ev(self, z, cache):
        return np.exp(self.f.ev(z, cache))

    def derivative(self):
        return Prod(self.f.derivative(), self)

    def known_zeros(self):
        return Divisor()


class OneForm:
    """f(z) dz on a planar domain."""

    def __init__(self, density):
        self.density = as_holo(density)

    def __call__(self, z):
        return self.density(z)

    def __add__(self, other):
        return OneForm(self.density + _dens(other))

    def __sub__(self, other):
        return OneForm(self.density - _dens(other))

    def __mul__(self, f):
        return OneForm(self.density * as_holo(f))

    __rmul__ = __mul__

    def __neg__(self):
        return OneForm(-self.density)


def _dens(w) -> HoloFunction:
    return w.density if isinstance(w, OneForm) else as_holo(w)


def eval(f: HoloFunction, z: complex, tol: float = 1e-12) -> complex:  # noqa: A001
    z = complex(z)
    for p, _ in f.poles.entries:
        if abs(z - p) <= tol * max(1.0, abs(p)):
            raise PoleHit(f"evaluation at declared pole {p}")
    with np.errstate(all="ignore"):
        v = complex(f(np.array([z]))[0])
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        raise PoleHit(f"non-finite value at {z}")
    return v


# ------------------------------------------------------------------ paths

class Path:
    """Polyline; a closed path returns from the last vertex to the first."""

    def __init__(self, vertices: Iterable[complex], closed: bool = False):
        v = np.asarray(list(vertices) if not isinstance(vertices, np.ndarray)
                       else vertices, dtype=complex).ravel()
        if v.size < 2 and not (closed and v.size >= 3):
            raise ValueError("a path needs at least two vertices")
        if closed and v.size > 2 and v[0] == v[-1]:
            v = v[:-1]
        if np.any(v[1:] == v[:-1]):
            raise ValueError("consecutive vertices must be distinct")
        self.vertices = v
        self.closed = bool(closed)

    @classmethod
    def segment(cls, a: complex, b: complex) -> "Path":
        return cls([a, b])

    @classmethod
    def circle(cls, center: complex = 0.0, radius: float = 1.0, n: int = 256,
               turns: int = 1, phase: float = 0.0) -> "Path":
        k = np.arange(n * turns)
        pts = center + radius * np.exp(1j * (phase + 2 * np.pi * k / n))
        if turns == 1:
            return cls(pts, closed=True)
        # multiple turns: open polyline ending back at the start
        return cls(np.append(pts, pts[0]))

    @classmethod
    def rectangle(cls, x0: float, x1: float, y0: float, y1: float) -> "Path":
        return cls([complex(x0, y0), complex(x1, y0), complex(x1, y1),
                    complex(x0, y1)], closed=True)

    @property
    def start(self) -> complex:
        return complex(self.vertices[0])

    @property
    def end(self) -> complex:
        return complex(self.vertices[0] if self.closed else self.vertices[-1])

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.vertices
        if self.closed:
            return v, np.roll(v, -1)
        return v[:-1], v[1:]

    def length(self) -> float:
        a, b = self.segments()
        return float(np.abs(b - a).sum())

    def reversed(self) -> "Path":
        if self.closed:
            return Path(np.concatenate([self.vertices[:1],
                                        self.vertices[:0:-1]]), closed=True)
        return Path(self.vertices[::-1])

    def __add__(self, other: "Path") -> "Path":
        if self.closed or other.closed:
            raise ValueError("only open paths concatenate")
        if abs(self.end - other.start) > 1e-14 * max(1.0, abs(self.end)):
            raise ValueError("paths do not join")
        return Path(np.concatenate([self.vertices, other.vertices[1:]]))

    def point_at(self, u) -> np.ndarray:
        """Arc-length parametrisation u in [0, 1]."""
        a, b = self.segments()
        lens = np.abs(b - a)
        cum = np.concatenate([[0.0], np.cumsum(lens)]) / lens.sum()
        u = np.clip(np.asarray(u, float), 0.0, 1.0)
        k = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, a.size - 1)
        s = (u - cum[k]) / (cum[k + 1] - cum[k])
        return a[k] + s * (b[k] - a[k])

    def sample(self, per_segment: int = 16) -> np.ndarray:
        a, b = self.segments()
        s = np.arange(per_segment) / per_segment
        pts = (a[:, None] + s[None, :] * (b - a)[:, None]).ravel()
        return np.append(pts, self.end)

    def diameter(self) -> float:
        v = self.vertices
        return float(max(np.ptp(v.real), np.ptp(v.imag), 1e-300) * math.sqrt(2))


def _seg_dist(p: complex, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    t = np.clip(((p - a) * np.conj(d)).real / np.abs(d) ** 2, 0.0, 1.0)
    return np.abs(a + t * d - p)


# ------------------------------------------------------------ compact sets

@dataclass
class CompactSet:
    """Rectangle(s), disk/annulus, optionally with attached arcs.

    kind: "rectangle" (params: rects=[(x0,x1,y0,y1), ...], arcs=[Path]),
    "annulus" (center, r_in, r_out; r_in = 0 is the closed disk).
    """

    kind: str
    rects: list = field(default_factory=list)
    center: complex = 0.0
    r_in: float = 0.0
    r_out: float = 1.0
    arcs: list = field(default_factory=list)
    boundary_samples: int = 1024

    @classmethod
    def rectangle(cls, x0, x1, y0, y1, boundary_samples=1024):
        return cls("rectangle", rects=[(x0, x1, y0, y1)],
                   boundary_samples=boundary_samples)

    @classmethod
    def rectangles_with_arcs(cls, rects, arcs, boundary_samples=1024):
        k = cls("rectangle-with-arcs", rects=list(rects), arcs=list(arcs),
                boundary_samples=boundary_samples)
        k.check_admissible()
        return k

    @classmethod
    def disk(cls, center=0.0, radius=1.0, boundary_samples=1024):
        return cls("annulus", center=center, r_in=0.0, r_out=radius,
                   boundary_samples=boundary_samples)

    @classmethod
    def annulus(cls, center, r_in, r_out, boundary_samples=1024):
        if not 0 < r_in < r_out:
            raise ValueError("need 0 < r_in < r_out")
        return cls("annulus", center=center, r_in=r_in, r_out=r_out,
                   boundary_samples=boundary_samples)

    @property
    def is_annular(self) -> bool:
        return self.kind == "annulus" and self.r_in > 0

    def bbox(self) -> tuple[float, float, float, float]:
        if self.kind == "annulus":
            c = complex(self.center)
            return (c.real - self.r_out, c.real + self.r_out,
                    c.imag - self.r_out, c.imag + self.r_out)
        xs = [r[0] for r in self.rects] + [r[1] for r in self.rects]
        ys = [r[2] for r in self.rects] + [r[3] for r in self.rects]
        for arc in self.arcs:
            xs += list(arc.vertices.real)
            ys += list(arc.vertices.imag)
        return min(xs), max(xs), min(ys), max(ys)

    def frame(self) -> tuple[complex, float]:
        """Center and half-diameter used to scale polynomial variables."""
        if self.kind == "annulus":
            return complex(self.center), float(self.r_out)
        x0, x1, y0, y1 = self.bbox()
        c = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
        return c, 0.5 * math.hypot(x1 - x0, y1 - y0)

    def diameter(self) -> float:
        return 2.0 * self.frame()[1]

    def boundary_loops(self) -> list[Path]:
        if self.kind == "annulus":
            loops = [Path.circle(self.center, self.r_out, self.boundary_samples)]
            if self.r_in > 0:
                loops.append(Path.circle(self.center, self.r_in,
                                         self.boundary_samples).reversed())
            return loops
        return [Path.rectangle(*r) for r in self.rects]

    def boundary_points(self) -> np.ndarray:
        """boundary_samples points per boundary component, plus arc samples."""
        pts = []
        if self.kind == "annulus":
            k = np.arange(self.boundary_samples)
            e = np.exp(2j * np.pi * k / self.boundary_samples)
            pts.append(self.center + self.r_out * e)
            if self.r_in > 0:
                pts.append(self.center + self.r_in * e)
        else:
            for r in self.rects:
                per = max(self.boundary_samples // 4, 4)
                p = Path.rectangle(*r)
                pts.append(p.sample(per)[:-1])
        for arc in self.arcs:
            pts.append(arc.point_at(np.linspace(0, 1, self.boundary_samples)))
        return np.concatenate(pts)

    def contains(self, z, tol: float = 1e-12) -> np.ndarray:
        """Membership in the region or on one of the attached arcs."""
        z = _as_array(z)
        inside = self._in_region(z, tol)
        for arc in self.arcs:
            a, b = arc.segments()
            for k, p in enumerate(z.ravel()):
                if not inside.flat[k]:
                    inside.flat[k] = np.min(_seg_dist(p, a, b)) <= tol
        return inside

    def _in_region(self, z, tol: float) -> np.ndarray:
        z = _as_array(z)
        if self.kind == "annulus":
            r = np.abs(z - self.center)
            return (r <= self.r_out + tol) & (r >= self.r_in - tol)
        inside = np.zeros(z.shape, bool)
        for x0, x1, y0, y1 in self.rects:
            inside |= ((z.real >= x0 - tol) & (z.real <= x1 + tol)
                       & (z.imag >= y0 - tol) & (z.imag <= y1 + tol))
        return inside

    def interior_contains(self, z, tol: float = 1e-9) -> np.ndarray:
        z = _as_array(z)
        if self.kind == "annulus":
            r = np.abs(z - self.center)
            if self.r_in == 0:
                return r < self.r_out - tol
            return (r < self.r_out - tol) & (r > self.r_in + tol)
        inside = np.zeros(z.shape, bool)
        for x0, x1, y0, y1 in self.rects:
            inside |= ((z.real > x0 + tol) & (z.real < x1 - tol)
                       & (z.imag > y0 + tol) & (z.imag < y1 - tol))
        return inside

    def check_admissible(self, tol: float = 1e-9) -> None:
        """Arcs must start and end on region boundaries, be otherwise
        outside the region, and cross the boundary transversally."""
        for arc in self.arcs:
            ends = np.array([arc.start, arc.end])
            if not np.all(self._in_region(ends, tol)) or np.any(
                    self.interior_contains(ends, tol)):
                raise ValueError("arc endpoints must lie on the region boundary")
            u = np.linspace(0, 1, 401)[1:-1]
            if np.any(self._in_region(arc.point_at(u), -tol)):
                raise ValueError("arc re-enters the region")
            for e, nxt in ((arc.start, arc.point_at(1e-3)),
                           (arc.end, arc.point_at(1 - 1e-3))):
                if not self._transversal(e, nxt - e):
                    raise ValueError("arc is tangent to the boundary")

    def _transversal(self, p: complex, d: complex) -> bool:
        for x0, x1, y0, y1 in self.rects:
            on_h = (abs(p.imag - y0) < 1e-9 or abs(p.imag - y1) < 1e-9)
            on_v = (abs(p.real - x0) < 1e-9 or abs(p.real - x1) < 1e-9)
            if on_h and abs(d.imag) < 1e-6 * abs(d):
                return False
            if on_v and abs(d.real) < 1e-6 * abs(d):
                return False
        return True


# ------------------------------------------------------------ integration

def _dens_of(omega) -> HoloFunction:
    return omega.density if isinstance(omega, OneForm) else as_holo(omega)


def integrate_segments(f, a: np.ndarray, b: np.ndarray,
                       cfg: Config | None = None,
                       clearance_scale: float | None = None,
                       poles: Divisor | None = None) -> np.ndarray:
    """Adaptive composite Gauss-Legendre integral of f(z) dz over [a_k, b_k].

    ``f`` maps an array of points to values of the same shape, or to a stack
    of shape (C, *z.shape) for several densities at once.  Each segment is
    compared against its two halves; segments whose difference exceeds rtol
    times the local L1 mass are halved again.
    """
    cfg = cfg or default_config()
    a = np.atleast_1d(_as_array(a)).ravel()
    b = np.atleast_1d(_as_array(b)).ravel()
    if poles is None:
        poles = getattr(f, "poles", Divisor())
    if clearance_scale is None:
        pts = np.concatenate([a, b])
        clearance_scale = max(np.ptp(pts.real), np.ptp(pts.imag), 1e-300)
    clear = cfg.pole_clearance * clearance_scale
    for p, _ in poles.entries:
        if a.size and np.min(_seg_dist(p, a, b)) < clear:
            raise PoleTooClose(f"pole {p} within {clear:.3g} of the path")
    x, w = gauss_legendre(cfg.gl_order)

    def rule(a_, b_):
        h = b_ - a_
        z = a_[:, None] + h[:, None] * x[None, :]
        with np.errstate(all="ignore"):
            v = np.asarray(f(z))
        if not np.all(np.isfinite(v)):
            raise PoleTooClose("non-finite integrand on the path")
        vw = v * w
        return vw.sum(axis=-1) * h, np.abs(vw).sum(axis=-1) * np.abs(h)

    whole, _ = rule(a, b)
    out = np.zeros(whole.shape[:-1] + (a.size,), dtype=complex)
    idx = np.arange(a.size)
    for depth in range(cfg.max_depth + 1):
        m = 0.5 * (a + b)
        left, lm = rule(a, m)
        right, rm = rule(m, b)
        halves = left + right
        err = np.abs(whole - halves) - cfg.quad_rtol * np.maximum(lm + rm, 1e-300)
        ok = err <= 0 if err.ndim == 1 else np.all(err <= 0, axis=0)
        if out.ndim == 1:
            np.add.at(out, idx[ok], halves[ok])
        else:
            for c in range(out.shape[0]):
                np.add.at(out[c], idx[ok], halves[c][..., ok])
        if np.all(ok):
            return out
        if depth == cfg.max_depth:
            break
        bad = ~ok
        idx = np.concatenate([idx[bad], idx[bad]])
        a, b = np.concatenate([a[bad], m[bad]]), np.concatenate([m[bad], b[bad]])
        whole = np.concatenate([left[..., bad], right[..., bad]], axis=-1)
    raise QuadratureNotConverged(
        f"{int((~ok).sum())} subintervals unresolved after {cfg.max_depth} halvings")


def integrate(omega, p: Path, cfg: Config | None = None) -> complex:
    a, b = p.segments()
    f = _dens_of(omega)
    return complex(integrate_segments(f, a, b, cfg,
                                      p.diameter() / math.sqrt(2)).sum())


def primitive(omega, base: complex, target: complex, p: Path | None = None,
              cfg: Config | None = None) -> complex:
    if p is None:
        if complex(base) == complex(target):
            return 0j
        p = Path.segment(base, target)
    tol = 1e-12 * max(1.0, abs(base), abs(target))
    if p.closed or abs(p.start - base) > tol or abs(p.end - target) > tol:
        raise ValueError("path must run from base to target")
    return integrate(omega, p, cfg)


def log_along(f: HoloFunction, p: Path, rel_tol: float = 1e-12) -> list[complex]:
    """Continuous branch of log f at the path vertices (closing vertex
    repeated at the end for closed paths)."""
    a, b = p.segments()
    n = 32
    while True:
        s = np.arange(n) / n
        z = (a[:, None] + s[None, :] * (b - a)[:, None]).ravel()
        z = np.append(z, p.end)
        v = f(z)
        mag = np.abs(v)
        if not np.all(np.isfinite(v)):
            raise ZeroOnPath("function not finite on the path")
        if mag.min() <= rel_tol * mag.max():
            raise ZeroOnPath(f"|f| = {mag.min():.3g} on the path")
        dphi = np.angle(v[1:] / v[:-1])
        if np.max(np.abs(dphi)) < np.pi / 4 or n >= 4096:
            break
        n *= 2
    if np.max(np.abs(dphi)) >= np.pi / 2:
        raise ZeroOnPath("phase not resolved; f nearly vanishes near the path")
    logs = np.log(mag) + 1j * np.concatenate(
        [[np.angle(v[0])], np.angle(v[0]) + np.cumsum(dphi)])
    picks = np.append(np.arange(a.size) * n, z.size - 1)
    return [complex(c) for c in logs[picks]]


def residue_loop(k: int, n: int = 256) -> complex:
    """Integral of z^k dz over the closed unit polygon with n vertices."""
    return integrate(OneForm(Laurent.monomial(k)), Path.circle(0, 1, n))
