"""Uniform polynomial approximation on planar compacts with divisor control.

Disks use Taylor truncation (coefficients by FFT on the boundary circle),
annuli a column-scaled Laurent least-squares fit, and rectangles with arcs a
Vandermonde-with-Arnoldi least-squares fit on boundary samples.  Divisor
constraints are imposed exactly through p = H + W q, with H the Hermite
interpolant of f on D and W the monic polynomial vanishing on D.
"""
from __future__ import annotations

import math

import numpy as np

from .holo_core import (CompactSet, Divisor, HoloFunction,
                        Laurent, Path, WeierforgeError, as_holo, log_along,
                        lsq_poly)


class DegreeBudgetExceeded(WeierforgeError):
    pass


class BadDivisor(WeierforgeError):
    pass


class ZeroOnBoundary(WeierforgeError):
    pass


class WindingMismatch(WeierforgeError):
    pass


MAX_DEGREE = 64


class Approximant(HoloFunction):
    """Result of an approximation, carrying its degree and sup error."""

    def __init__(self, inner: HoloFunction, degree: int, sup_error: float,
                 backend: str):
        self.inner = inner
        self.degree = degree
        self.sup_error = sup_error
        self.backend = backend
        self.poles = inner.poles

    def _ev(self, z, cache):
        return self.inner.ev(z, cache)

    def derivative(self):
        return self.inner.derivative()

    def known_zeros(self):
        return self.inner.known_zeros()


def _degree_ladder(max_degree: int) -> list[int]:
    out, d = [], 4
    while d < max_degree:
        out.append(d)
        d = int(d * 1.5) + 1
    return out + [max_degree]


def _frame(K: CompactSet) -> tuple[complex, float]:
    return K.frame()


def hermite_data(f: HoloFunction, D: Divisor, center: complex,
                 scale: float) -> tuple[Laurent, Laurent]:
    """Hermite interpolant H of f on D and W = prod (w - q)^m, both in the
    scaled variable w = (z - center)/scale."""
    W = Laurent.constant(1.0)
    for q, m in D.entries:
        W = _pow_lin(W, (q - center) / scale, m, center, scale)
    n = D.degree
    if n == 0:
        return Laurent([0.0], center, scale), W
    rows, rhs = [], []
    for q, m in D.entries:
        qw = (q - center) / scale
        deriv = f
        for j in range(m):
            row = np.zeros(n, dtype=complex)
            for k in range(j, n):
                row[k] = math.perm(k, j) * qw ** (k - j)
            rows.append(row)
            rhs.append(complex(deriv(np.array([q]))[0]) * scale ** j)
            deriv = deriv.derivative()
    c = np.linalg.solve(np.array(rows), np.array(rhs))
    return Laurent(c, center, scale), W


def _pow_lin(W: Laurent, qw: complex, m: int, center, scale) -> Laurent:
    lin = Laurent([-qw, 1.0], center, scale)
    for _ in range(m):
        W = W * lin
    return W


def _check_divisor(K: CompactSet, D: Divisor) -> None:
    if not D.is_integral:
        raise BadDivisor("divisor must be integral")
    pts = np.array(D.support, dtype=complex)
    if pts.size and not np.all(K.interior_contains(pts, 1e-9)):
        raise BadDivisor("divisor support must lie in the interior of K")


def _sup(v) -> float:
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def _fit(K: CompactSet, zb: np.ndarray, r: np.ndarray, deg: int,
         weights: np.ndarray | None) -> tuple[HoloFunction, str]:
    c, s = _frame(K)
    if K.kind == "annulus" and K.r_in == 0 and not K.arcs:
        n = zb.size
        coef = np.fft.fft(r) / n  # zb are the roots of unity scaled by radius
        coef = coef[:deg + 1]
        coef[np.abs(coef) < 1e-15 * max(np.abs(coef).max(), 1e-300)] = 0.0
        return Laurent(coef, K.center, K.r_out), "taylor"
    if K.kind == "annulus":
        ks = np.arange(-deg, deg + 1)
        w = (zb - c) / s
        A = w[:, None] ** ks[None, :]
        if weights is not None:
            A = A * weights[:, None]
            r = r * weights
        norms = np.linalg.norm(A, axis=0)
        sol = np.linalg.lstsq(A / norms, r, rcond=None)[0] / norms
        return Laurent(dict(zip(ks.tolist(), sol)), c, s), "laurent-lsq"
    return lsq_poly(zb, r, deg, c, s, weights), "arnoldi-lsq"


def _disk_samples(K: CompactSet) -> np.ndarray:
    n = K.boundary_samples
    return K.center + K.r_out * np.exp(2j * np.pi * np.arange(n) / n)


def approx_with_divisor(f: HoloFunction, K: CompactSet, D: Divisor | None = None,
                        eps: float = 1e-8, degree: int | None = None,
                        max_degree: int = MAX_DEGREE) -> Approximant:
    """Polynomial p with sup_{dK} |f - p| < eps and f - p vanishing on D."""
    D = D or Divisor()
    f = as_holo(f)
    _check_divisor(K, D)
    c, s = _frame(K)
    if K.kind == "annulus" and K.r_in == 0:
        zb = _disk_samples(K)
        c, s = complex(K.center), K.r_out
    else:
        zb = K.boundary_points()
    H, W = hermite_data(f, D, c, s)
    fb = f(zb)
    if not np.all(np.isfinite(fb)):
        raise ValueError("f is not finite on the boundary of K")
    Wb = W(zb)
    r = (fb - H(zb)) / Wb
    m = D.degree
    ladder = [degree] if degree is not None else _degree_ladder(max_degree)
    err = math.inf
    for d in ladder:
        qd = d - m
        if qd < 0:
            continue
        weights = np.abs(Wb) if K.kind != "annulus" or K.r_in > 0 else None
        q, backend = _fit(K, zb, r, qd, weights)
        p = H + W * q
        err = _sup(fb - p(zb))
        if err < eps or degree is not None:
            return Approximant(p, d, err, backend)
    raise DegreeBudgetExceeded(
        f"sup error {err:.3g} > {eps:.3g} at degree {ladder[-1]}")


# --------------------------------------------------------- nonvanishing

def _divisor_factor(D: Divisor, K: CompactSet) -> HoloFunction:
    c, s = _frame(K)
    B: HoloFunction = Laurent.constant(1.0)
    for q, m in D.entries:
        lin = Laurent([-(q - c) / s, 1.0], c, s)
        if m > 0:
            for _ in range(m):
                B = B * lin
        else:
            B = B / _pow_lin(Laurent.constant(1.0), (q - c) / s, -m, c, s)
    return B


def _loop_with_points(rect, extra: list[complex]) -> Path:
    """Rectangle boundary with extra boundary points inserted in order."""
    x0, x1, y0, y1 = rect
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    per = 2 * ((x1 - x0) + (y1 - y0))

    def pos(z):
        if abs(z.imag - y0) < 1e-9:
            return z.real - x0
        if abs(z.real - x1) < 1e-9:
            return (x1 - x0) + z.imag - y0
        if abs(z.imag - y1) < 1e-9:
            return (x1 - x0) + (y1 - y0) + x1 - z.real
        return per - (z.imag - y0)

    pts = sorted(set(corners + list(extra)), key=pos)
    return Path(pts, closed=True)


def continuous_log(f: HoloFunction, K: CompactSet, per_edge: int = 256,
                   offset_ref: complex | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Samples z on the boundary (and arcs) of K with a branch of log f that
    is continuous along every boundary loop and arc.  Loops connected by
    arcs share one branch; branch jumps around a loop raise WindingMismatch."""
    zs, ls = [], []
    if K.kind == "annulus":
        outer = Path(K.center + K.r_out * np.exp(
            2j * np.pi * np.arange(K.boundary_samples) / K.boundary_samples),
            closed=True)
        lo = np.array(log_along(f, outer))
        _closes(lo)
        zs.append(outer.vertices)
        ls.append(lo[:-1])
        if K.r_in > 0:
            inner = Path(K.center + K.r_in * np.exp(
                2j * np.pi * np.arange(K.boundary_samples) / K.boundary_samples),
                closed=True)
            li = np.array(log_along(f, inner))
            _closes(li)
            bridge = np.array(log_along(f, Path.segment(outer.vertices[0],
                                                        inner.vertices[0])))
            li = li + (lo[0] + bridge[-1] - bridge[0] - li[0])
            zs.append(inner.vertices)
            ls.append(li[:-1])
        return np.concatenate(zs), np.concatenate(ls)
    # rectangles joined by arcs: propagate the branch along a spanning tree
    nrect = len(K.rects)

    def owner(z):
        for i, r in enumerate(K.rects):
            if (r[0] - 1e-9 <= z.real <= r[1] + 1e-9
                    and r[2] - 1e-9 <= z.imag <= r[3] + 1e-9):
                return i
        raise ValueError("arc endpoint not on any rectangle")

    ends = [[] for _ in range(nrect)]
    for arc in K.arcs:
        ends[owner(arc.start)].append(arc.start)
        ends[owner(arc.end)].append(arc.end)
    anchor: dict[int, dict[complex, complex]] = {}
    loops: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def do_loop(i, at: complex | None, val: complex | None):
        r = K.rects[i]
        loop = _loop_with_points(r, ends[i])
        dense = _densify(loop, per_edge)
        lv = np.array(log_along(f, dense))
        _closes(lv)
        verts = dense.vertices
        if at is not None:
            k = int(np.argmin(np.abs(verts - at)))
            lv = lv + (val - lv[k])
        loops[i] = (verts, lv[:-1])
        anchor[i] = {complex(z): complex(v) for z, v in zip(verts, lv[:-1])}

    done = set()
    order = [0]
    do_loop(0, None, None)
    done.add(0)
    pending = list(K.arcs)
    arc_data = []
    while pending:
        progressed = False
        for arc in list(pending):
            i, j = owner(arc.start), owner(arc.end)
            if i in done or j in done:
                path = arc.gamma if hasattr(arc, "gamma") else arc
                if i not in done:
                    path = path.reversed()
                    i, j = j, i
                dense = _densify(path, per_edge)
                lv = np.array(log_along(f, dense))
                lv = lv + (anchor[i][_nearest(anchor[i], dense.start)] - lv[0])
                arc_data.append((dense.vertices[1:-1], lv[1:-1]))
                if j not in done:
                    do_loop(j, dense.end, lv[-1])
                    done.add(j)
                    order.append(j)
                else:
                    v = anchor[j][_nearest(anchor[j], dense.end)]
                    if abs(v - lv[-1]) > 1e-6:
                        raise WindingMismatch("arcs close a cycle with a branch jump")
                pending.remove(arc)
                progressed = True
        if not progressed:
            break
    for i in range(nrect):
        if i not in done:
            do_loop(i, None, None)
    for i in sorted(loops):
        zs.append(loops[i][0])
        ls.append(loops[i][1])
    for z, v in arc_data:
        zs.append(z)
        ls.append(v)
    return np.concatenate(zs), np.concatenate(ls)


def _nearest(d: dict, z: complex) -> complex:
    keys = np.array(list(d.keys()))
    return complex(keys[int(np.argmin(np.abs(keys - z)))])


def _densify(p: Path, per_edge: int) -> Path:
    a, b = p.segments()
    L = p.length()
    pts = []
    for ai, bi in zip(a, b):
        n = max(2, int(math.ceil(per_edge * abs(bi - ai) / max(L, 1e-300) * 4)))
        pts.append(ai + (bi - ai) * np.arange(n) / n)
    v = np.concatenate(pts)
    if not p.closed:
        v = np.append(v, p.end)
    return Path(v, closed=p.closed)


def _closes(lv: np.ndarray) -> None:
    jump = lv[-1] - lv[0]
    if abs(jump) > 1e-6:
        raise WindingMismatch(
            f"log does not close: winding {jump.imag / (2 * math.pi):.3f}")


def winding_number(f: HoloFunction, loop: Path) -> int:
    lv = log_along(f, loop)
    return int(round((lv[-1] - lv[0]).imag / (2 * math.pi)))


def approx_nonvanishing(f: HoloFunction, K: CompactSet, eps: float = 1e-8,
                        divisor: Divisor | None = None, degree: int | None = None,
                        max_degree: int = MAX_DEGREE) -> Approximant:
    """B * exp(h) approximating f on K with the same divisor as f.

    B carries the zeros and poles of f inside K (supplied or known in closed
    form); on an annulus an extra factor (z - hole)^c absorbs the winding of
    f/B around the hole.
    """
    f = as_holo(f)
    zb = K.boundary_points()
    fb = f(zb)
    mag = np.abs(fb)
    if not np.all(np.isfinite(fb)) or mag.min() <= 1e-12 * mag.max():
        raise ZeroOnBoundary(f"|f| = {mag.min():.3g} on the boundary")
    if divisor is None:
        zeros = f.known_zeros()
        if zeros is None:
            zeros = Divisor()
        d = zeros.as_dict()
        for p, m in f.poles.entries:
            d[p] = d.get(p, 0) - m
        divisor = Divisor.from_dict(d)
    inside = {p: m for p, m in divisor.entries
              if K.contains(np.array([p]))[0]}
    D = Divisor.from_dict(inside)
    B = _divisor_factor(D, K)
    ratio = f / B
    if K.is_annular:
        c = winding_number(ratio, Path.circle(K.center, K.r_in,
                                              K.boundary_samples))
        if c:
            hole = Laurent({c: 1.0}, K.center, 1.0)
            B = B * hole
            ratio = f / B
    else:
        for loop in K.boundary_loops():
            if winding_number(ratio, loop) != 0:
                raise WindingMismatch(
                    "zeros or poles of f inside K are not accounted for")
    zs, L = continuous_log(ratio, K)
    fz = f(zs)
    Bz = B(zs)
    scale = float(np.max(np.abs(fz)))
    ladder = [degree] if degree is not None else _degree_ladder(max_degree)
    err = math.inf
    for d in ladder:
        h, backend = _fit_log(K, zs, L, d)
        approx = B * h.exp() if not _is_one(B) else h.exp()
        err = _sup(fz - Bz * np.exp(h(zs)))
        if err < eps or degree is not None:
            return Approximant(approx, d, err, backend)
    raise DegreeBudgetExceeded(
        f"sup error {err:.3g} > {eps:.3g} at degree {ladder[-1]} (|f| ~ {scale:.3g})")


def _is_one(B: HoloFunction) -> bool:
    return isinstance(B, Laurent) and B.is_constant() and B.a[0] == 1.0


def _fit_log(K, zs, L, d) -> tuple[HoloFunction, str]:
    c, s = _frame(K)
    if K.kind == "annulus" and K.r_in == 0:
        return _fit(K, zs, L, d, None)
    if K.kind == "annulus":
        return _fit(K, zs, L, d, None)
    return lsq_poly(zs, L, d, c, s), "arnoldi-lsq"


def approx_samples(zs: np.ndarray, values: np.ndarray, K: CompactSet,
                   eps: float, degree: int | None = None,
                   max_degree: int = MAX_DEGREE,
                   weights: np.ndarray | None = None) -> Approximant:
    """Polynomial least-squares fit of sampled data on K (rectangles/arcs)."""
    c, s = _frame(K)
    ladder = [degree] if degree is not None else _degree_ladder(max_degree)
    err, best = math.inf, None
    for d in ladder:
        p = lsq_poly(zs, values, d, c, s, weights)
        e = _sup(p(zs) - values)
        if best is None or e < err:
            best, err = (p, d), e
        if e < eps:
            return Approximant(p, d, e, "arnoldi-lsq")
    if degree is not None:
        return Approximant(best[0], best[1], err, "arnoldi-lsq")
    raise DegreeBudgetExceeded(f"sup error {err:.3g} > {eps:.3g} at degree {ladder[-1]}")
