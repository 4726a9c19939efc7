"""Convex polygon pieces on the unit torus.

A piece is a convex polygon stored as a tuple of (x, y) vertex pairs in
counter-clockwise order.  All clipping is against axis-aligned lines, which
keeps axis-aligned rectangles with dyadic vertices bit-exact: a crossing
vertex on the line x = c gets its x coordinate set to c literally, and its
y coordinate is exact whenever the crossed edge is horizontal (the
interpolation term has a zero numerator).  That exactness is what lets the
baker-map refinement produce word measures that are exactly 2^-(n+1).
"""

from __future__ import annotations

import math

Polygon = tuple[tuple[float, float], ...]


def rect_polygon(q0: float, q1: float, p0: float, p1: float) -> Polygon:
    return ((q0, p0), (q1, p0), (q1, p1), (q0, p1))


def polygon_area(poly: Polygon) -> float:
    """Area of a convex polygon by the shoelace sum.

    fsum keeps the result exact for dyadic rectangle vertices (every
    cross product is then exactly representable).
    """
    n = len(poly)
    terms = []
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        terms.append(x0 * y1)
        terms.append(-x1 * y0)
    return 0.5 * abs(math.fsum(terms))


def _crossing(a: tuple[float, float], b: tuple[float, float], axis: int, c: float) -> tuple[float, float]:
    # Zero numerator (edge parallel to the clip normal's orthogonal) must not
    # round: multiply before dividing so 0 * anything / d == 0 exactly.
    if axis == 0:
        y = a[1] + (c - a[0]) * (b[1] - a[1]) / (b[0] - a[0])
        return (c, y)
    x = a[0] + (c - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
    return (x, c)


def clip_halfplane(poly: Polygon, axis: int, c: float, keep_low: bool) -> Polygon | None:
    """Sutherland-Hodgman clip of a convex polygon against coord <= c (or >= c)."""
    out: list[tuple[float, float]] = []
    n = len(poly)
    for i in range(n):
        cur = poly[i]
        nxt = poly[(i + 1) % n]
        cur_in = (cur[axis] <= c) if keep_low else (cur[axis] >= c)
        nxt_in = (nxt[axis] <= c) if keep_low else (nxt[axis] >= c)
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            out.append(_crossing(cur, nxt, axis, c))
    if len(out) < 3:
        return None
    return tuple(out)


def clip_to_rect(poly: Polygon | None, q0: float, q1: float, p0: float, p1: float) -> Polygon | None:
    for axis, c, keep_low in ((0, q0, False), (0, q1, True), (1, p0, False), (1, p1, True)):
        if poly is None:
            return None
        poly = clip_halfplane(poly, axis, c, keep_low)
    return poly


def affine_image(poly: Polygon, a: float, b: float, c: float, d: float,
                 e: float, f: float) -> Polygon:
    """Image under (x, y) -> (a x + b y + e, c x + d y + f).

    Positive determinant assumed, so orientation is preserved.
    """
    return tuple((a * x + b * y + e, c * x + d * y + f) for x, y in poly)


def wrap_to_torus(poly: Polygon) -> list[Polygon]:
    """Split a polygon along integer lines and translate every piece into [0,1)^2."""
    xs = [v[0] for v in poly]
    ys = [v[1] for v in poly]
    pieces = []
    for i in range(math.floor(min(xs)), max(math.ceil(max(xs)), math.floor(min(xs)) + 1)):
        for j in range(math.floor(min(ys)), max(math.ceil(max(ys)), math.floor(min(ys)) + 1)):
            part = clip_to_rect(poly, float(i), float(i + 1), float(j), float(j + 1))
            if part is None or polygon_area(part) == 0.0:
                continue
            if i == 0 and j == 0:
                pieces.append(part)
            else:
                # integer translation is exact
                pieces.append(tuple((x - i, y - j) for x, y in part))
    return pieces
