"""Straight-line flow in a triangulation and edge insertion by flips."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FlipLimit, RayObstructed
from .surface import Mesh, angle_between, cross, nxt, prv

EPS = 1e-10


@dataclass
class TraceResult:
    crossings: list  # half-edges crossed, in order
    ended: str  # "vertex" or "interior"
    corner: int = -1  # corner hit when ended == "vertex" (first side of that corner)
    distance: float = 0.0
    triangle: int = -1  # triangle containing the end point when ended == "interior"
    offset: complex = 0j  # end point relative to the start of half-edge 3*triangle
    near_side: list = None  # apex positions used for flip selection


def corner_of_direction(hol, opp, h0, v):
    """Corner around the start vertex of ``h0`` containing direction ``v``.

    Walks counter-clockwise starting from the corner of ``h0``; the first corner
    whose closed-open sector contains ``v`` wins.
    """
    h = h0
    n = len(hol)
    for _ in range(n + 1):
        a = hol[h]
        b = -hol[prv(h)]
        if abs(cross(a, v)) <= EPS * abs(a) * abs(v) and (a.real * v.real + a.imag * v.imag) > 0:
            return h
        if cross(a, v) > 0 and cross(v, b) > 0:
            return h
        h = int(opp[prv(h)])
    raise ValueError("direction not found around vertex")


def corner_at_angle(hol, opp, h0, theta):
    """Corner and direction at angular position ``theta`` measured ccw from ``hol[h0]``."""
    h = h0
    acc = 0.0
    while True:
        a = hol[h]
        ang = angle_between(a, -hol[prv(h)])
        if theta < acc + ang - 1e-13 or abs(theta - acc) <= 1e-13:
            direction = a / abs(a) * np.exp(1j * (theta - acc))
            return h, direction
        acc += ang
        h = int(opp[prv(h)])
        if h == h0 and acc > theta + 1e-9:
            raise ValueError("angle exceeds the cone angle")


def trace_from_corner(hol, opp, h, v, length=None, stop_at_vertex=True):
    """Follow the straight ray with holonomy direction ``v`` leaving the corner ``h``.

    With ``length=None`` the ray runs to the first vertex hit.  Returns crossings
    and where the ray stopped.
    """
    L = abs(v) if length is None else length
    u = v / abs(v)
    b = -hol[prv(h)]
    if abs(cross(b, u)) <= EPS * abs(b) and (b.real * u.real + b.imag * u.imag) > 0:
        h = int(opp[prv(h)])
    a = hol[h]
    if abs(cross(a, u)) <= EPS * abs(a) and (a.real * u.real + a.imag * u.imag) > 0:
        if length is None or abs(a) <= L + 1e-9 * max(1.0, L):
            return TraceResult([], "vertex", corner=int(opp[h]), distance=abs(a))
        return TraceResult([], "interior", triangle=h // 3, offset=u * L - _tri_base(hol, h, 0j), distance=L)
    x = nxt(h)
    P = hol[h]
    Q = P + hol[x]
    apexes = [0j]
    return _run(hol, opp, x, P, Q, u, L, [], apexes, length is None)


def _tri_base(hol, x, start_x):
    """Position of the start of half-edge ``3 * (x // 3)`` given the start of ``x``."""
    t = x - x % 3
    base = start_x
    for j in range(x % 3):
        base = base - hol[t + j]
    return base


def _run(hol, opp, x, P, Q, u, L, crossings, apexes, to_vertex):
    n = len(hol)
    scale = max(abs(P), abs(Q), 1.0)
    for _ in range(100 * n + 1000):
        D = Q - P
        den = cross(u, D)
        t = cross(P, D) / den  # distance along the ray to the line PQ
        if t >= L + (1e-9 * max(1.0, L) if to_vertex else 0.0):
            # ends inside the triangle of x; report offset relative to its first half-edge
            return TraceResult(crossings, "interior", triangle=x // 3, offset=u * L - _tri_base(hol, x, P),
                               distance=L, near_side=apexes)
        f = int(opp[x])
        R = P + hol[nxt(f)]
        crossings.append(x)
        side = cross(u, R)
        along = R.real * u.real + R.imag * u.imag
        if abs(side) <= EPS * max(abs(R), scale):
            if to_vertex or along <= L + 1e-9 * max(1.0, L):
                return TraceResult(crossings, "vertex", corner=prv(f), distance=along, near_side=apexes)
            # end point lies before R inside triangle f
            return TraceResult(crossings, "interior", triangle=f // 3, offset=u * L - _tri_base(hol, f, Q),
                               distance=L, near_side=apexes)
        if side > 0:
            apexes.append(Q)
            x, Q = nxt(f), R
        else:
            apexes.append(P)
            x, P = prv(f), R
    raise RayObstructed("ray tracing did not terminate")


def trace_from_point(hol, opp, t, z, v, length):
    """Follow a ray from the interior point at offset ``z`` from the start of half-edge ``3t``."""
    u = v / abs(v)
    # vertex positions relative to the start point
    A = -z
    B = A + hol[3 * t]
    C = B + hol[3 * t + 1]
    pts = (A, B, C)
    for k in range(3):
        P, Q = pts[k], pts[(k + 1) % 3]
        if cross(u, P) <= 0 and cross(u, Q) > 0:
            D = Q - P
            if cross(P, D) / cross(u, D) >= 0:
                return _run(hol, opp, 3 * t + k, P, Q, u, length, [], [None], False)
    raise RayObstructed("start point is not inside the triangle")


def make_edge(mesh: Mesh, h, v, tracked=(), max_flips=20000):
    """Flip edges until the saddle connection leaving corner ``h`` with holonomy ``v`` is an edge.

    Returns ``(edge, tracked)``: the half-edge carrying ``v`` and the new
    identities of the other corners in ``tracked``.
    """
    tracked = list(tracked)
    start = mesh.flips
    while True:
        res = trace_from_corner(mesh.hol, mesh.opp, h, v)
        if res.ended != "vertex":
            raise RayObstructed("segment does not end at a vertex")
        if abs(res.distance - abs(v)) > 1e-7 * max(1.0, abs(v)):
            raise RayObstructed("segment hits a vertex before its end")
        if not res.crossings:
            return int(mesh.opp[res.corner]), tracked
        u = v / abs(v)
        # positions of the far apex for each crossing, recomputed from the trace
        best = None
        fallback = None
        P = mesh.hol[h]
        Q = P + mesh.hol[nxt(h)]
        A = 0j
        for x in res.crossings:
            f = int(mesh.opp[x])
            R = P + mesh.hol[nxt(f)]
            if mesh.flippable(x):
                sa = cross(u, A)
                sr = cross(u, R)
                tol = 1e-12 * max(1.0, abs(v))
                crosses = (sa > tol and sr < -tol) or (sa < -tol and sr > tol)
                if not crosses and best is None:
                    best = x
                elif fallback is None:
                    fallback = x
            side = cross(u, R)
            if abs(side) <= EPS * max(abs(R), 1.0):
                break
            if side > 0:
                A = Q
                Q = R
            else:
                A = P
                P = R
        e = best if best is not None else fallback
        if e is None:
            raise FlipLimit("no flippable edge along the segment")
        h, *tracked = flip_tracking(mesh, e, h, *tracked)
        # a flip of the edge facing the start corner splits that corner
        h = corner_of_direction(mesh.hol, mesh.opp, h, v)
        if mesh.flips - start > max_flips:
            raise FlipLimit("edge insertion flip budget exhausted")


def flip_tracking(mesh: Mesh, e, *tracked):
    """Flip ``e`` and return the new identities of the tracked corners."""
    e2 = int(mesh.opp[e])
    a, b = nxt(e), prv(e)
    c, d = nxt(e2), prv(e2)
    t1, t2 = e // 3, e2 // 3
    new_of = {b: 3 * t1 + 1, c: 3 * t1 + 2, d: 3 * t2 + 1, a: 3 * t2 + 2}
    corner_map = {e: new_of[c], e2: new_of[a]}
    mesh.flip(e)
    out = []
    for h in tracked:
        if h in corner_map:
            out.append(corner_map[h])
        else:
            out.append(new_of.get(h, h))
    return tuple(out)


def corner_tracker(mesh: Mesh, e):
    """Map of corner identities for a flip of ``e`` (to be called before flipping)."""
    e2 = int(mesh.opp[e])
    a, b = nxt(e), prv(e)
    c, d = nxt(e2), prv(e2)
    t1, t2 = e // 3, e2 // 3
    new_of = {b: 3 * t1 + 1, c: 3 * t1 + 2, d: 3 * t2 + 1, a: 3 * t2 + 2}
    m = dict(new_of)
    m[e] = new_of[c]
    m[e2] = new_of[a]
    return m
