"""Planar convex-hull utilities on complex numbers."""

from __future__ import annotations

import numpy as np


def _cross(o, a, b):
    return (a.real - o.real) * (b.imag - o.imag) - (a.imag - o.imag) * (b.real - o.real)


def convex_hull(points, tol=0.0):
    """Counter-clockwise hull vertices (Andrew's monotone chain)."""
    pts = sorted(set((float(z.real), float(z.imag)) for z in np.asarray(points, dtype=complex).ravel()))
    pts = [complex(a, b) for a, b in pts]
    if len(pts) <= 2:
        return np.array(pts, dtype=complex)
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= tol:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= tol:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=complex)


def _segment_distance(z, a, b):
    d = b - a
    L2 = abs(d) ** 2
    if L2 == 0:
        return abs(z - a)
    t = ((z - a) * np.conj(d)).real / L2
    t = min(1.0, max(0.0, t))
    return abs(z - (a + t * d))


def hull_distance(hull, z) -> float:
    """Distance from z to the closed convex polygon ``hull`` (0 inside)."""
    hull = np.asarray(hull, dtype=complex)
    n = len(hull)
    if n == 0:
        raise ValueError("empty hull")
    if n == 1:
        return float(abs(z - hull[0]))
    if n == 2:
        return float(_segment_distance(z, hull[0], hull[1]))
    inside = all(_cross(hull[i], hull[(i + 1) % n], z) >= 0 for i in range(n))
    if inside:
        return 0.0
    return float(min(_segment_distance(z, hull[i], hull[(i + 1) % n]) for i in range(n)))
