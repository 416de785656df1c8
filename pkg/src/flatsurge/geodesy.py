"""Saddle connections: enumeration, classification and counting."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .develop import make_edge, trace_from_point
from .errors import BudgetExceeded, InvalidSurface
from .homology import Homology
from .surface import TWO_PI, Mesh, TranslationSurface, angle_between, cross, nxt, prv

HOL_TOL = 1e-9
ZERO_LENGTH = 1e-12
DEFAULT_NODE_BUDGET = 20_000_000


@dataclass(frozen=True)
class SaddleConnection:
    holonomy: complex
    start_corner: int
    end_corner: int
    start_vertex: int
    end_vertex: int
    start_pos: float  # angular position of the outgoing direction at the start vertex
    end_pos: float  # angular position of the reversed direction at the end vertex
    crossings: tuple = field(default=(), compare=False, repr=False)

    @property
    def length(self):
        return abs(self.holonomy)

    @property
    def closed(self):
        return self.start_vertex == self.end_vertex


@dataclass(frozen=True)
class ClosedConfiguration:
    zero_order: int
    b_left: int  # left side angle is (2 b_left + 1) pi
    b_right: int
    multiplicity: int = 1
    cylinders: int = 0
    homology_class: int = -1


@dataclass(frozen=True)
class Cylinder:
    boundary: SaddleConnection
    circumference: float
    height: float
    core: complex

    @property
    def modulus(self):
        return self.height / self.circumference


def _canonical(z, scale):
    if z.imag > ZERO_LENGTH * scale:
        return True
    if z.imag < -ZERO_LENGTH * scale:
        return False
    return z.real > 0


def _clip_distance(P, Q, wa, wb):
    """Distance from the origin to the part of segment PQ inside the wedge (wa, wb)."""
    D = Q - P
    da = cross(wa, D)
    db = cross(wb, D)
    c = cross(P, D)
    A = wa * (c / da) if da != 0 else P
    B = wb * (c / db) if db != 0 else Q
    E = B - A
    ee = E.real * E.real + E.imag * E.imag
    if ee == 0:
        return abs(A)
    t = -(A.real * E.real + A.imag * E.imag) / ee
    t = min(1.0, max(0.0, t))
    return abs(A + t * E)


def _corner_connections(s, h, L, budget, out):
    hol, opp = s.hol, s.opp
    pos = s.angle_position
    vertex_of = s.vertex_of
    scale = s.scale
    a = complex(hol[h])
    p = int(vertex_of[h])
    if abs(a) <= L and abs(a) > ZERO_LENGTH and _canonical(a, scale):
        oh = int(opp[h])
        out.append(SaddleConnection(a, h, oh, p, int(vertex_of[oh]), float(pos[h]), float(pos[oh]), ()))
    b = complex(-hol[prv(h)])
    nodes = 0
    stack = [(nxt(h), a, b, a, b, ())]
    tol = 1e-10  # angular; round-off on collinear unfoldings reaches ~1e-13
    while stack:
        x, P, Q, wa, wb, path = stack.pop()
        nodes += 1
        if nodes > budget:
            raise BudgetExceeded(f"enumeration exceeded {budget} nodes at corner {h}")
        if _clip_distance(P, Q, wa, wb) > L:
            continue
        f = int(opp[x])
        R = P + complex(hol[nxt(f)])
        path2 = path + (x,)
        rr = abs(R)
        ca = cross(wa, R)
        cb = cross(R, wb)
        if ca > tol * abs(wa) * rr and cb > tol * abs(wb) * rr:
            if ZERO_LENGTH < rr <= L and _canonical(R, scale):
                e = prv(f)
                out.append(SaddleConnection(
                    R, h, e, p, int(vertex_of[e]),
                    float(pos[h] + angle_between(a, R)),
                    float(pos[e] + angle_between(complex(hol[e]), -R)),
                    path2,
                ))
            stack.append((nxt(f), P, R, wa, R, path2))
            stack.append((prv(f), R, Q, R, wb, path2))
        elif ca <= tol * abs(wa) * rr:
            stack.append((prv(f), R, Q, wa, wb, path2))
        else:
            stack.append((nxt(f), P, R, wa, wb, path2))
    return nodes


def enumerate_saddle_connections(surface: TranslationSurface, max_length: float,
                                 node_budget: int = DEFAULT_NODE_BUDGET, closed_only: bool = False):
    """All saddle connections of length at most ``max_length``, each once.

    The reported orientation has holonomy in the upper half plane (positive
    real axis included).  Sorted by length, then holonomy.
    """
    if max_length <= 0:
        return []
    out = []
    used = 0
    for h in range(surface.n_half):
        used += _corner_connections(surface, h, max_length, node_budget - used, out)
    if closed_only:
        out = [c for c in out if c.closed]
    out.sort(key=lambda c: (round(c.length, 12), c.holonomy.real, c.holonomy.imag, c.start_vertex, c.start_pos))
    return out


# ----------------------------------------------------------------------
# homology of connections


def connection_class(hom: Homology, sc: SaddleConnection):
    """Relative homology class of a saddle connection."""
    vec = hom.vec
    s = hom.s
    h = sc.start_corner
    if not sc.crossings:
        return vec[h].copy()
    P = vec[h].copy()
    cr = sc.crossings
    R = None
    for i, x in enumerate(cr):
        f = int(s.opp[x])
        R = P + vec[nxt(f)]
        if i + 1 < len(cr) and cr[i + 1] == prv(f):
            P = R
    return R


def multiplicity(connections, v, tol=HOL_TOL):
    """Number of connections whose holonomy equals ``v`` (either orientation)."""
    v = complex(v)
    return sum(1 for c in connections if abs(c.holonomy - v) <= tol or abs(c.holonomy + v) <= tol)


def holonomy_groups(connections, tol=HOL_TOL):
    """Group connections by holonomy; returns lists of connections."""
    groups = []
    keys = {}
    for c in connections:
        k = (round(c.holonomy.real / tol), round(c.holonomy.imag / tol))
        hit = None
        for dk in ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)):
            kk = (k[0] + dk[0], k[1] + dk[1])
            if kk in keys and abs(groups[keys[kk]][0].holonomy - c.holonomy) <= tol:
                hit = keys[kk]
                break
        if hit is None:
            keys[k] = len(groups)
            groups.append([c])
        else:
            groups[hit].append(c)
    return groups


def homologous(surface, c1, c2, hom=None):
    """Whether two saddle connections define the same relative homology class."""
    hom = hom or Homology(surface)
    return bool(np.array_equal(connection_class(hom, c1), connection_class(hom, c2)))


# ----------------------------------------------------------------------
# angles and cylinders


def side_angle_values(surface: TranslationSurface, sc: SaddleConnection):
    """Cone angle on the left and right of a closed connection at its vertex (radians)."""
    if not sc.closed:
        raise InvalidSurface("side angles are defined for closed connections")
    total = float(surface.cone_angles[sc.start_vertex])
    left = (sc.end_pos - sc.start_pos) % total
    return left, total - left


def side_angles(surface: TranslationSurface, sc: SaddleConnection):
    """Side angles of a closed connection as integer multiples of pi."""
    left, right = side_angle_values(surface, sc)
    kl, kr = round(left / math.pi), round(right / math.pi)
    if abs(left - kl * math.pi) > 1e-7 or abs(right - kr * math.pi) > 1e-7:
        raise InvalidSurface(f"side angles {left}, {right} are not multiples of pi")
    return int(kl), int(kr)


def closed_configuration(surface, sc, mult=1, hom_id=-1):
    kl, kr = side_angles(surface, sc)
    m = surface.orders[sc.start_vertex]
    return ClosedConfiguration(m, (kl - 1) // 2, (kr - 1) // 2, mult, int(kl == 1) + int(kr == 1), hom_id)


def _edge_mesh(surface, sc):
    m = Mesh.from_surface(surface)
    e, _ = make_edge(m, sc.start_corner, sc.holonomy)
    return m, e


def _closes(m, e, side, eps_rel=1e-6):
    """Whether the straight line parallel to edge ``e`` just beside it closes up after one length."""
    v = complex(m.hol[e])
    L = abs(v)
    normal = 1j * v / L if side == "left" else -1j * v / L
    eps = eps_rel * L
    h = e if side == "left" else int(m.opp[e])
    t = h // 3
    base = {0: 0j, 1: m.hol[3 * t], 2: -m.hol[3 * t + 2]}[h % 3]  # start(h) - start(3t)
    if side == "left":
        start = base + v / 2 + eps * normal
        direction = v
    else:
        # opp(e) runs backwards along the connection
        start = base + (-v) / 2 + eps * normal
        direction = v
    try:
        res = trace_from_point(m.hol, m.opp, t, start - 0j, direction, L)
    except Exception:
        return False
    if res.ended != "interior":
        return False
    return res.triangle == t and abs(res.offset - start) <= 1e-7 * L


def _cylinder_height(m, e, side):
    """Distance to the nearest vertex across the strip on one side of edge ``e``."""
    import heapq

    v = complex(m.hol[e])
    L = abs(v)
    u = v / L
    sign = 1.0 if side == "left" else -1.0

    def coords(z):
        w = z * u.conjugate()
        return w.real, sign * w.imag

    h0 = e if side == "left" else int(m.opp[e])
    origin = 0j if side == "left" else v  # position of start(h0)
    best = math.inf
    heap = [(0.0, h0, origin)]
    seen = set()
    lo, hi = -1e-9 * L, L * (1 + 1e-9)
    count = 0
    while heap:
        dmin, h, z = heapq.heappop(heap)
        if dmin >= best:
            break
        t = h // 3
        key = (t, round(z.real * 1e9 / L), round(z.imag * 1e9 / L))
        if key in seen:
            continue
        seen.add(key)
        count += 1
        if count > 200000:
            break
        pts = [z, z + m.hol[h], z + m.hol[h] + m.hol[nxt(h)]]
        for q in pts:
            s_, t_ = coords(q)
            if t_ > 1e-9 * L and lo <= s_ <= hi:
                best = min(best, t_)
        hs = [h, nxt(h), prv(h)]
        for k in range(3):
            x = hs[k]
            if x == h0 and h == h0:
                continue
            A, B = pts[k], pts[(k + 1) % 3]
            sa, ta = coords(A)
            sb, tb = coords(B)
            # clip the edge to the strip lo <= s <= hi
            if (sa < lo and sb < lo) or (sa > hi and sb > hi):
                continue
            # edges on or below the base line lead back across the connection
            if max(ta, tb) <= 1e-9 * L:
                continue
            tmin = max(min(ta, tb), 0.0)
            if tmin >= best:
                continue
            y = int(m.opp[x])
            heapq.heappush(heap, (tmin, y, B))
    return best


def cylinder_on_side(surface: TranslationSurface, sc: SaddleConnection, side: str):
    """Maximal cylinder bounded by ``sc`` on the given side, or ``None``.

    Detected by following the straight line parallel to the connection just
    beside it: the side carries a cylinder exactly when that line closes up.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if not sc.closed:
        raise InvalidSurface("cylinders are attached to closed connections")
    if surface.orders[sc.start_vertex] == 0:
        raise InvalidSurface("connection starts at a regular point")
    m, e = _edge_mesh(surface, sc)
    if not _closes(m, e, side):
        return None
    height = _cylinder_height(m, e, side)
    return Cylinder(sc, sc.length, height, sc.holonomy)


# ----------------------------------------------------------------------
# separation


def _components_after_cut(n_tri, opp, cut_half_edges):
    cut = set(cut_half_edges) | {int(opp[h]) for h in cut_half_edges}
    seen = [False] * n_tri
    comps = 0
    for t0 in range(n_tri):
        if seen[t0]:
            continue
        comps += 1
        stack = [t0]
        seen[t0] = True
        while stack:
            t = stack.pop()
            for h in (3 * t, 3 * t + 1, 3 * t + 2):
                if h in cut:
                    continue
                u = int(opp[h]) // 3
                if not seen[u]:
                    seen[u] = True
                    stack.append(u)
    return comps


def is_separating(surface: TranslationSurface, curve) -> bool:
    """Whether cutting along a closed connection (or a closed edge chain) disconnects the surface."""
    if isinstance(curve, SaddleConnection):
        if not curve.closed:
            raise InvalidSurface("only closed curves can separate")
        m, e = _edge_mesh(surface, curve)
        return _components_after_cut(len(m.hol) // 3, m.opp, [e]) > 1
    return _components_after_cut(surface.n_triangles, surface.opp, list(curve)) > 1


# ----------------------------------------------------------------------
# counting


def _mult1_nocyl(surface, conns):
    """Closed connections of multiplicity one with no cylinder on either side."""
    out = []
    for grp in holonomy_groups(conns):
        closed = [c for c in grp if c.closed]
        if len(grp) != 1 or not closed:
            continue
        c = closed[0]
        kl, kr = side_angles(surface, c)
        if kl == 1 or kr == 1:
            continue
        out.append(c)
    return out


def closed_in_window(surface, lo, hi, filter=None, connections=None):
    if connections is None:
        connections = enumerate_saddle_connections(surface, hi)
    conns = [c for c in connections if c.length <= hi * (1 + 1e-12)]
    if filter is None:
        sel = [c for c in conns if c.closed]
    elif filter == "mult1-nocyl":
        sel = _mult1_nocyl(surface, conns)
    elif isinstance(filter, ClosedConfiguration):
        sel = []
        for c in _mult1_nocyl(surface, conns):
            cfg = closed_configuration(surface, c)
            if cfg.zero_order == filter.zero_order and {cfg.b_left, cfg.b_right} == {filter.b_left, filter.b_right}:
                sel.append(c)
    elif callable(filter):
        sel = [c for c in conns if c.closed and filter(c)]
    else:
        raise ValueError(f"unknown filter {filter!r}")
    return [c for c in sel if lo * (1 - 1e-12) <= c.length <= hi * (1 + 1e-12)]


def count_closed(surface, a, b, g=None, filter=None, connections=None):
    """Closed saddle connections with length in ``[a/sqrt(g), b/sqrt(g)]``."""
    g = surface.genus if g is None else g
    r = math.sqrt(g)
    return len(closed_in_window(surface, a / r, b / r, filter, connections))


def count_open(surface, a, b, g=None, connections=None):
    """Open saddle connections (distinct endpoints, both genuine zeros) with length in ``[a/g, b/g]``."""
    g = surface.genus if g is None else g
    lo, hi = a / g, b / g
    if connections is None:
        connections = enumerate_saddle_connections(surface, hi)
    orders = surface.orders
    return sum(
        1 for c in connections
        if not c.closed and orders[c.start_vertex] > 0 and orders[c.end_vertex] > 0
        and lo * (1 - 1e-12) <= c.length <= hi * (1 + 1e-12)
    )


def siegel_veech_transform(surface, configuration, f, radius, connections=None):
    """Sum of ``f(v)`` over holonomies of connections in a configuration.

    ``configuration`` is ``"all"``, ``"closed"``, ``"open"``, ``"mult1-nocyl"``
    or a :class:`ClosedConfiguration`; ``radius`` bounds the support of ``f``.
    """
    if connections is None:
        connections = enumerate_saddle_connections(surface, radius)
    conns = [c for c in connections if c.length <= radius]
    if configuration == "all":
        sel = conns
    elif configuration == "closed":
        sel = [c for c in conns if c.closed]
    elif configuration == "open":
        sel = [c for c in conns if not c.closed]
    else:
        sel = closed_in_window(surface, 0.0, radius, configuration, conns)
    total = 0.0
    for c in sel:
        total += f(c.holonomy) + f(-c.holonomy)
    return total
