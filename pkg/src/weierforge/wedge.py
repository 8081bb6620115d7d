"""Half-spaces Pi_a(theta) = {x3 + tan(theta) x1 <= a} and distances to them."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Wedge:
    a: float
    theta: float

    def __post_init__(self):
        if not abs(self.theta) < math.pi / 2:
            raise ValueError("tilt must satisfy |theta| < pi/2")

    def level(self, p) -> np.ndarray:
        """x3 + tan(theta) x1 - a; positive outside the wedge."""
        p = np.asarray(p, dtype=float)
        return p[..., 2] + math.tan(self.theta) * p[..., 0] - self.a


def contains(w: Wedge, p) -> bool | np.ndarray:
    out = w.level(p) <= 0.0
    return bool(out) if np.ndim(out) == 0 else out


def dist_to_wedge(w: Wedge, p) -> float | np.ndarray:
    d = np.maximum(0.0, w.level(p) * math.cos(w.theta))
    return float(d) if np.ndim(d) == 0 else d


def dist_to_wedge_union(a: float, theta: float, p) -> float | np.ndarray:
    d = np.minimum(dist_to_wedge(Wedge(a, theta), p),
                   dist_to_wedge(Wedge(a, -theta), p))
    return float(d) if np.ndim(d) == 0 else d


def project(w: Wedge, p) -> np.ndarray:
    """Closest point of the wedge to p."""
    p = np.asarray(p, dtype=float)
    n = np.array([math.sin(w.theta), 0.0, math.cos(w.theta)])
    s = np.maximum(0.0, w.level(p) * math.cos(w.theta))
    return p - np.multiply.outer(s, n)
