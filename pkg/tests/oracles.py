"""Slow, independent reference implementations used only by the tests."""

from fractions import Fraction

import numpy as np


def cross(a, b, c):
    ax, ay = Fraction(a[0]), Fraction(a[1])
    return ((Fraction(b[0]) - ax) * (Fraction(c[1]) - ay)
            - (Fraction(b[1]) - ay) * (Fraction(c[0]) - ax))


def lex(points, i):
    return (points[i][0], points[i][1], i)


def hull_by_supporting_pairs(points):
    """Extremal indices, left to right: no pair (q, r) has p strictly below qr
    with q <lex p <lex r."""
    pts = [tuple(map(float, p)) for p in points]
    n = len(pts)
    out = []
    for p in range(n):
        kp = lex(pts, p)
        hidden = False
        for q in range(n):
            if not lex(pts, q) < kp:
                continue
            for r in range(n):
                if kp < lex(pts, r) and cross(pts[q], pts[r], pts[p]) < 0:
                    hidden = True
                    break
            if hidden:
                break
        if not hidden:
            out.append(p)
    return sorted(out, key=lambda i: lex(pts, i))


def maxima_by_pairs(points):
    """Indices not strictly-lex dominated by any other point, left to right."""
    pts = [tuple(map(float, p)) for p in points]
    n = len(pts)
    out = [i for i in range(n)
           if not any(pts[j][0] >= pts[i][0] and pts[j][1] >= pts[i][1]
                      and lex(pts, j) > lex(pts, i) for j in range(n))]
    return sorted(out, key=lambda i: lex(pts, i))


def argmax_direction(points, slope):
    """Lexicographically smallest index maximizing y - slope * x, exactly."""
    m = Fraction(slope)
    best = None
    for i, (x, y) in enumerate(points):
        v = Fraction(float(y)) - m * Fraction(float(x))
        key = (-v, float(x), float(y), i)
        if best is None or key < best:
            best = key
    return best[3]


def lines_strictly_below(slopes, intercepts, x, y):
    """Exact count of lines y = m x + b strictly below (x, y)."""
    X, Y = Fraction(x), Fraction(y)
    return sum(1 for m, b in zip(slopes, intercepts) if Fraction(m) * X + Fraction(b) < Y)


def random_points(rng, n, kind="uniform"):
    if kind == "grid":
        return rng.integers(0, 4, size=(n, 2)).astype(float)
    if kind == "collinear":
        t = rng.integers(0, 6, size=n).astype(float)
        return np.column_stack([t, 2 * t + 1])
    return rng.uniform(-1, 1, size=(n, 2))
