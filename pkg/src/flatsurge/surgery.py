"""Cut-and-paste surgeries on translation surfaces.

All surgeries work on a mutable :class:`Mesh`: rays are traced, their end
points inserted as vertices, the rays turned into edges by flips, and the
slit construction is a crosswise regluing of two parallel half-edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .develop import corner_at_angle, corner_of_direction, flip_tracking, make_edge, trace_from_corner
from .errors import (BadAngleSplit, Degeneration, FlipLimit, HasCylinder, LengthMismatch, LociIntersect,
                     MultiplicityAboveOne, NotParallel, NotPermissible, RayObstructed, SurgeryError,
                     WrongOrder)
from .geodesy import SaddleConnection, connection_class, enumerate_saddle_connections, multiplicity, side_angles
from .homology import period_chart
from .surface import TWO_PI, Mesh, TranslationSurface, cross, isometric, nxt, prv

HOL_TOL = 1e-9
CLEARANCE = 1e-9


@dataclass
class DeformationVector:
    values: dict  # chart basis index -> complex value
    support: tuple = (0, 2)

    def __call__(self, index):
        return self.values.get(index, 0j)


@dataclass
class SurgeryCertificate:
    kind: str
    input_stratum: str
    output_stratum: str
    cone_points: tuple = ()
    locus: tuple = ()  # holonomies of the cut edges
    deformation: DeformationVector | None = None
    steps: int = 0
    areas: list = field(default_factory=list)
    marked: tuple = ()
    kappa: complex | None = None
    velocity: np.ndarray | None = field(default=None, repr=False)


# ----------------------------------------------------------------------
# mesh helpers


def edge_connection(s: TranslationSurface, h: int) -> SaddleConnection:
    """The saddle connection carried by half-edge ``h``."""
    h = int(h)
    o = int(s.opp[h])
    return SaddleConnection(complex(s.hol[h]), h, o, int(s.vertex_of[h]), int(s.vertex_of[o]),
                            float(s.angle_position[h]), float(s.angle_position[o]))


def _find_edge(m: Mesh, lab_from, hol, lab_to, tol):
    for h in range(m.n_half):
        if m.vlab[h] == lab_from and abs(m.hol[h] - hol) <= tol and m.vlab[m.opp[h]] == lab_to:
            return h
    raise SurgeryError("lost track of an edge")


def _relabel(m: Mesh, fixed: dict):
    """Relabel vertex orbits; orbits through a key of ``fixed`` get its label."""
    for orbit in m.orbits():
        lab = None
        for h in orbit:
            if h in fixed:
                lab = fixed[h]
                break
        if lab is None:
            lab = int(m.vlab[orbit[0]])
        m.vlab[orbit] = lab


def _regular_labels(m: Mesh):
    out = []
    for orbit in m.orbits():
        if abs(sum(m.corner_angle(h) for h in orbit) - TWO_PI) < 1e-6:
            out.append(int(m.vlab[orbit[0]]))
    return out


def _ray_endpoint(m: Mesh, h, v, length, label, error):
    """Insert a vertex at the end of the ray leaving corner ``h`` with direction ``v``."""
    res = trace_from_corner(m.hol, m.opp, h, v, length=length)
    if res.ended != "interior":
        raise error("ray hits a cone point")
    return _insert(m, res.triangle, res.offset, label, error, max(1.0, length))


def _insert(m: Mesh, t, z, label, error, scale):
    """Insert a vertex at offset ``z`` in triangle ``t``, also when it lies on an edge."""
    a = m.hol[3 * t]
    corners = (0j, a, a + m.hol[3 * t + 1])
    if min(abs(z - c) for c in corners) < CLEARANCE * scale:
        raise error("point coincides with a vertex")
    on_edge = None
    for k in range(3):
        P, Q = corners[k], corners[(k + 1) % 3]
        if abs(cross(Q - P, z - P)) / abs(Q - P) < CLEARANCE * scale:
            on_edge = k
    n = m.n_half
    lab = m.insert_point(t, z, label)
    if on_edge is not None:
        # the split produced a flat triangle; flipping its outer edge repairs it
        m.flip((3 * t, n, n + 3)[on_edge])
    return lab


def _is_edge(s, sc):
    return abs(s.hol[sc.start_corner] - sc.holonomy) <= _tol(s)


def _as_edge(m: Mesh, sc, tracked=None):
    """Half-edge carrying ``sc``, flipping it into the triangulation if needed."""
    if abs(m.hol[sc.start_corner] - sc.holonomy) <= HOL_TOL * max(1.0, abs(sc.holonomy)):
        e, tr = int(sc.start_corner), tuple(tracked or ())
    else:
        e, tr = make_edge(m, sc.start_corner, sc.holonomy, tracked=tracked or ())
    return e if tracked is None else (e, tuple(tr))


def reverse_connection(sc: SaddleConnection) -> SaddleConnection:
    return SaddleConnection(-sc.holonomy, sc.end_corner, sc.start_corner, sc.end_vertex, sc.start_vertex,
                            sc.end_pos, sc.start_pos)


def find_connection(surface, holonomy, start=None, end=None, closed=None):
    """Saddle connection with the given holonomy (oriented as requested), or ``None``."""
    holonomy = complex(holonomy)
    tol = _tol(surface)
    for c in enumerate_saddle_connections(surface, abs(holonomy) * (1 + 1e-7) + tol):
        for cand in (c, reverse_connection(c)):
            if abs(cand.holonomy - holonomy) > tol:
                continue
            if start is not None and cand.start_vertex != start:
                continue
            if end is not None and cand.end_vertex != end:
                continue
            if closed is not None and cand.closed != closed:
                continue
            return cand
    return None


def _corner_with_direction(m: Mesh, label, v):
    h0 = int(np.nonzero(m.vlab == label)[0][0])
    return corner_of_direction(m.hol, m.opp, h0, v)


def _stratum(s):
    return str(s.stratum())


def _tol(s):
    return HOL_TOL * max(1.0, s.scale)


# ----------------------------------------------------------------------
# opening and collapsing


def check_openable(surface: TranslationSurface, sc: SaddleConnection, connections=None):
    """Raise unless ``sc`` is a closed multiplicity-one connection at a double zero with angles (3pi, 3pi)."""
    if not sc.closed:
        raise WrongOrder("connection is not closed")
    if surface.orders[sc.start_vertex] != 2:
        raise WrongOrder(f"cone point has order {surface.orders[sc.start_vertex]}, expected 2")
    kl, kr = side_angles(surface, sc)
    if 1 in (kl, kr):
        raise HasCylinder("a side of angle pi bounds a cylinder")
    if connections is None:
        connections = enumerate_saddle_connections(surface, abs(sc.holonomy) * (1 + 1e-7))
    if multiplicity(connections, sc.holonomy, _tol(surface)) > 1:
        raise MultiplicityAboveOne("holonomy is shared by another saddle connection")


def open_zero(surface: TranslationSurface, sc: SaddleConnection, connections=None, check=True):
    """Split the double zero of a closed connection into two simple zeros.

    Returns ``(surface', gamma1, gamma2, certificate)`` where ``gamma1`` runs
    from the new zero ``p`` to the new zero ``q`` with holonomy ``-v`` and
    ``gamma2`` runs from ``q`` back to ``p`` with holonomy ``2v``.  Collapsing
    the reversed ``gamma1`` (from ``q``, with ``k1 = k2 = 1``) undoes the opening.
    """
    if check:
        check_openable(surface, sc, connections)
    v = complex(sc.holonomy)
    L = abs(v)
    tol = _tol(surface)
    m = Mesh.from_surface(surface)
    lp = int(sc.start_vertex)
    eg, _ = make_edge(m, sc.start_corner, v)
    # the two rays leave p at angles +pi and -pi from the connection
    ends = []
    for theta in (math.pi, 5 * math.pi):
        eg = _find_edge(m, lp, v, lp, tol)
        h, d = corner_at_angle(m.hol, m.opp, eg, theta)
        lab = _ray_endpoint(m, h, d * L, L, None, NotPermissible)
        ends.append(lab)
    eg = _find_edge(m, lp, v, lp, tol)
    h1, _ = corner_at_angle(m.hol, m.opp, eg, math.pi)
    s1, (eg,) = make_edge(m, h1, -v, tracked=(eg,))
    h2, _ = corner_at_angle(m.hol, m.opp, eg, 5 * math.pi)
    s2, (s1,) = make_edge(m, h2, -v, tracked=(s1,))
    if m.vlab[m.opp[s1]] != ends[0] or m.vlab[m.opp[s2]] != ends[1]:
        raise NotPermissible("rays do not end at the inserted points")
    o1 = int(m.opp[s1])
    m.swap_gluing(s1, s2)
    la, lq = m.next_label(), m.next_label() + 1
    _relabel(m, {s1: lp, s2: la, o1: lq})
    if abs(m.vertex_angle(s2) - TWO_PI) > 1e-6:
        raise NotPermissible("opened zero does not split into regular and simple points")
    m.remove_vertex(la)
    e1 = _find_edge(m, lp, -v, lq, tol)
    h, d = corner_at_angle(m.hol, m.opp, int(m.opp[e1]), TWO_PI)
    e2, (e1,) = make_edge(m, h, 2 * v, tracked=(e1,))
    out = m.to_surface(surface.marked)
    g1, g2 = edge_connection(out, e1), edge_connection(out, e2)
    cert = SurgeryCertificate("open", _stratum(surface), _stratum(out),
                              cone_points=(g1.start_vertex, g1.end_vertex), locus=(-v, -v))
    return out, g1, g2, cert


def collapse_open_connection(surface: TranslationSurface, sc: SaddleConnection, k1: int, k2: int):
    """Collapsing surgery along an open connection from ``v1`` (order ``n1``) to ``v2``.

    ``v1`` splits into points of orders ``k1 - 1`` and ``k2 - 1``; regular
    pieces are forgotten.  ``v2`` gains one order.
    """
    if sc.closed:
        raise WrongOrder("collapsing needs distinct endpoints")
    n1 = surface.orders[sc.start_vertex]
    if k1 < 1 or k2 < 1 or k1 + k2 != n1 + 1:
        raise BadAngleSplit(f"k1 + k2 must equal {n1 + 1}")
    w = complex(sc.holonomy)
    tol = _tol(surface)
    m = Mesh.from_surface(surface)
    l1, l2 = int(sc.start_vertex), int(sc.end_vertex)
    a, _ = make_edge(m, sc.start_corner, w)
    h, d = corner_at_angle(m.hol, m.opp, a, TWO_PI * k1)
    l3 = _ray_endpoint(m, h, d * abs(w), abs(w), None, NotPermissible)
    a = _find_edge(m, l1, w, l2, tol)
    h, _ = corner_at_angle(m.hol, m.opp, a, TWO_PI * k1)
    b, (a,) = make_edge(m, h, w, tracked=(a,))
    if m.vlab[m.opp[b]] != l3:
        raise NotPermissible("extension ray does not end at the inserted point")
    oa = int(m.opp[a])
    m.swap_gluing(a, b)
    la, lb = m.next_label(), m.next_label() + 1
    _relabel(m, {a: la, b: lb, oa: l2})
    for lab in (la, lb):
        if lab in _regular_labels(m):
            m.remove_vertex(lab)
    return m.to_surface(surface.marked)


# ----------------------------------------------------------------------
# moving a zero along a period path


def _collapse_time(hol, vel):
    """Smallest s > 0 at which some triangle of ``hol + s * vel`` has zero area."""
    h = hol.reshape(-1, 3)
    w = vel.reshape(-1, 3)
    c0 = cross(h[:, 0], h[:, 1])
    c1 = cross(h[:, 0], w[:, 1]) + cross(w[:, 0], h[:, 1])
    c2 = cross(w[:, 0], w[:, 1])
    best = np.inf
    for a0, a1, a2 in zip(c0, c1, c2):
        if abs(a2) < 1e-300:
            if a1 < 0:
                best = min(best, -a0 / a1)
            continue
        disc = a1 * a1 - 4 * a2 * a0
        if disc < 0:
            continue
        r = math.sqrt(disc)
        for root in ((-a1 - r) / (2 * a2), (-a1 + r) / (2 * a2)):
            if root > 0:
                best = min(best, root)
    return best


def _delaunay_frozen(m: Mesh, frozen, max_flips):
    """Delaunay flips that never touch the half-edges in ``frozen``."""
    frozen = list(frozen)
    start = m.flips
    while True:
        blocked = set(frozen) | {int(m.opp[h]) for h in frozen}
        inc = m.incircle_all()
        cand = [int(e) for e in np.argsort(-inc) if inc[e] > 1e-9 and int(e) not in blocked]
        e = next((x for x in cand if m.flippable(x)), None)
        if e is None:
            return frozen
        frozen = list(flip_tracking(m, e, *frozen))
        if m.flips - start > max_flips:
            raise FlipLimit("flip budget exhausted while moving")


def flow(surface: TranslationSurface, velocity, frozen=(), t_end=1.0, max_flips=100_000, min_step=1e-12):
    """Move edge holonomies linearly by ``t * velocity`` for ``t`` in ``[0, t_end]``.

    The triangulation is repaired by flips whenever a triangle would degenerate;
    the half-edges in ``frozen`` are never flipped.  Returns the final mesh,
    the new identities of ``frozen`` and the area after every step.
    """
    m = Mesh.from_surface(surface)
    m.carry = {"vel": np.asarray(velocity, dtype=np.complex128).copy()}
    frozen = list(frozen)
    t = 0.0
    areas = [float(np.sum(cross(m.hol[0::3], m.hol[1::3])) / 2)]
    while t < t_end:
        frozen = _delaunay_frozen(m, frozen, max_flips)
        vel = m.carry["vel"]
        s = _collapse_time(m.hol, vel)
        r = t_end - t
        step = r if s > r else 0.5 * s
        if step < min_step * max(1.0, t_end):
            raise Degeneration("a frozen connection degenerates along the path")
        if s <= r and r - step < min_step:
            step = r
        m.hol = m.hol + step * vel
        t = t_end if step == r else t + step
        areas.append(float(np.sum(cross(m.hol[0::3], m.hol[1::3])) / 2))
        if len(areas) > max_flips:
            raise FlipLimit("step budget exhausted while moving")
    frozen = _delaunay_frozen(m, frozen, max_flips)
    tri = cross(m.hol[0::3], m.hol[1::3])
    if tri.min() <= 1e-9 * np.max(np.abs(m.hol)) ** 2:
        raise Degeneration("a triangle collapses at the end of the path")
    return m, frozen, areas


def deformation_vector(chart):
    """Chart covector moving the zero back along the distinguished class at constant area."""
    z = chart.periods
    d1 = -z[0]
    if chart.genus < 2:
        return DeformationVector({0: d1}, (0,))
    w2, w4 = z[1], z[3]
    n = -1j * w4 / abs(w4)
    d2 = -cross(d1, w2) / abs(w4) * n
    return DeformationVector({0: d1, 2: d2}, (0, 2))


def move_zero(surface: TranslationSurface, gamma1: SaddleConnection, gamma2: SaddleConnection,
              chart=None, t_end=1.0, max_flips=100_000):
    """Deform the periods so that the zero ``q`` travels back along ``gamma2``.

    The distinguished class ``[gamma1 + gamma2]`` loses its period linearly;
    the second absolute class compensates so that the area stays constant.  At
    ``t = 1`` both connections have holonomy ``-v`` seen from ``p``.  Returns
    ``(surface'', gamma1, gamma2, certificate)``.
    """
    if not (_is_edge(surface, gamma1) and _is_edge(surface, gamma2)):
        m = Mesh.from_surface(surface)
        e1 = _as_edge(m, gamma1)
        e2, (e1,) = _as_edge(m, gamma2, (e1,))
        surface = m.to_surface(surface.marked)
        gamma1, gamma2 = edge_connection(surface, e1), edge_connection(surface, e2)
        chart = None
    e1, e2 = int(gamma1.start_corner), int(gamma2.start_corner)
    if chart is None:
        p, q = gamma1.start_vertex, gamma1.end_vertex
        chart = period_chart(surface, distinguished=[e1, e2], relative={q: [e1]}, base=p)
    dv = deformation_vector(chart)
    u = np.zeros(chart.size, dtype=np.complex128)
    for k, val in dv.values.items():
        u[k] = val
    velocity = chart.edge_coordinates @ u
    area0 = surface.area()
    m, (e1, e2), areas = flow(surface, velocity, (e1, e2), t_end, max_flips)
    for a in areas:
        if abs(a - area0) > 1e-8:
            raise Degeneration(f"area drifted to {a!r} along the path")
    out = m.to_surface(surface.marked)
    cert = SurgeryCertificate("move", _stratum(surface), _stratum(out),
                              cone_points=(gamma1.start_vertex, gamma1.end_vertex),
                              deformation=dv, steps=len(areas) - 1, areas=areas,
                              velocity=m.carry["vel"].copy())
    return out, edge_connection(out, e1), edge_connection(out, e2), cert


def unmove(surface: TranslationSurface, gamma1, gamma2, certificate, t_end=1.0):
    """Run a recorded move backwards."""
    e1, e2 = int(gamma1.start_corner), int(gamma2.start_corner)
    m, (e1, e2), areas = flow(surface, -certificate.velocity, (e1, e2), t_end)
    out = m.to_surface(surface.marked)
    return out, edge_connection(out, e1), edge_connection(out, e2)


# ----------------------------------------------------------------------
# pinching and its inverse


def pinch(surface: TranslationSurface, gamma1: SaddleConnection, gamma2: SaddleConnection):
    """Cut along the loop ``gamma1 + gamma2`` and zip each side shut.

    ``gamma1`` runs ``p -> q`` and ``gamma2`` runs ``q -> p``; they must have
    opposite holonomies.  Returns ``(surface''', p_plus, p_minus, certificate)``
    with ``p_plus`` and ``p_minus`` marked.
    """
    tol = _tol(surface)
    m = Mesh.from_surface(surface)
    e1 = _as_edge(m, gamma1)
    e2, (e1,) = _as_edge(m, gamma2, (e1,))
    e2 = int(m.opp[e2])  # now both run p -> q
    h1, h2 = complex(m.hol[e1]), complex(m.hol[e2])
    if abs(abs(h1) - abs(h2)) > tol:
        raise LengthMismatch(f"lengths {abs(h1):.12g} and {abs(h2):.12g} differ")
    if abs(h1 - h2) > tol:
        raise NotParallel("connections are not parallel")
    if m.vlab[e1] != m.vlab[e2] or m.vlab[m.opp[e1]] != m.vlab[m.opp[e2]]:
        raise SurgeryError("connections do not share their endpoints")
    o1, o2 = int(m.opp[e1]), int(m.opp[e2])
    m.swap_gluing(e1, e2)
    base = m.next_label()
    lp1, lp2, lq1, lq2 = base, base + 1, base + 2, base + 3
    _relabel(m, {e1: lp1, e2: lp2, o1: lq1, o2: lq2})
    regular = set(_regular_labels(m))
    if not {lp1, lp2, lq1, lq2} <= regular:
        raise SurgeryError("pinched points are not regular")
    kappa = complex(m.hol[e1])
    m.remove_vertex(lq1)
    m.remove_vertex(lq2)
    keep = set(surface.marked) | {lp1, lp2}
    out = m.to_surface(keep)
    lv = m.labels_to_vertices(out)
    cert = SurgeryCertificate("pinch", _stratum(surface), _stratum(out), locus=(h1, h2),
                              marked=(lv[lp1], lv[lp2]), kappa=kappa)
    return out, lv[lp1], lv[lp2], cert


def unpinch(surface: TranslationSurface, p_plus: int, p_minus: int, kappa, window=None):
    """Slit along rays of holonomy ``kappa`` from two marked points and reglue crosswise.

    The two marked points become one simple zero and the ray ends another.
    ``window`` optionally bounds ``|kappa|``.
    """
    kappa = complex(kappa)
    if window is not None and not (window[0] <= abs(kappa) <= window[1]):
        raise RayObstructed("|kappa| lies outside the window")
    for v in (p_plus, p_minus):
        if v not in surface.marked:
            raise RayObstructed(f"vertex {v} is not a marked point")
    m = Mesh.from_surface(surface)
    L = abs(kappa)
    ends = []
    for lab in (p_plus, p_minus):
        h = _corner_with_direction(m, lab, kappa)
        ends.append(_ray_endpoint(m, h, kappa, L, None, RayObstructed))
    a, _ = make_edge(m, _corner_with_direction(m, p_plus, kappa), kappa)
    b, (a,) = make_edge(m, _corner_with_direction(m, p_minus, kappa), kappa, tracked=(a,))
    if m.vlab[m.opp[a]] != ends[0] or m.vlab[m.opp[b]] != ends[1]:
        raise RayObstructed("rays do not end at the inserted points")
    oa = int(m.opp[a])
    m.swap_gluing(a, b)
    lp, lq = m.next_label(), m.next_label() + 1
    _relabel(m, {a: lp, oa: lq})
    keep = set(surface.marked) - {p_plus, p_minus}
    out = m.to_surface(keep)
    lv = m.labels_to_vertices(out)
    cert = SurgeryCertificate("unpinch", _stratum(surface), _stratum(out),
                              cone_points=(lv[lp], lv[lq]), locus=(kappa, kappa), kappa=kappa)
    return out, cert


# ----------------------------------------------------------------------
# the composite collapse and its inverse


@dataclass
class CollapseRecord:
    holonomy: complex  # of the collapsed connection
    zero: int  # its vertex on the input surface
    opened: TranslationSurface
    moved: TranslationSurface
    pinched: TranslationSurface
    p_plus: int
    p_minus: int
    kappa: complex
    certificates: list
    tracked: list = field(default_factory=list)  # holonomies of other connections afterwards


def collapse_closed(surface: TranslationSurface, sc: SaddleConnection, connections=None, track=()):
    """Open, move and pinch one closed connection.

    ``track`` lists holonomies of further closed connections whose holonomies
    after the surgery are reported in ``record.tracked``.
    """
    opened, g1, g2, c_open = open_zero(surface, sc, connections)
    chart = period_chart(opened, distinguished=[g1.start_corner, g2.start_corner],
                         relative={g1.end_vertex: [g1.start_corner]}, base=g1.start_vertex)
    moved, h1, h2, c_move = move_zero(opened, g1, g2, chart)
    u = np.zeros(chart.size, dtype=np.complex128)
    for k, val in c_move.deformation.values.items():
        u[k] = val
    tracked = []
    for hol in track:
        other = find_connection(opened, hol, closed=True)
        if other is None:
            raise LociIntersect("a tracked connection does not survive the opening", -1)
        coords = chart.coordinates(connection_class(chart.homology, other))
        tracked.append(complex(hol + coords @ u))
    pinched, pp, pm, c_pinch = pinch(moved, h1, h2)
    rec = CollapseRecord(complex(sc.holonomy), int(sc.start_vertex), opened, moved, pinched, pp, pm,
                         c_pinch.kappa, [c_open, c_move, c_pinch], tracked)
    return pinched, rec


def _delaunay_mesh(s, carry=None):
    m = Mesh.from_surface(s, carry)
    m.make_delaunay()
    return m


def _transport(src: TranslationSurface, values, dst: TranslationSurface):
    """Carry a per-half-edge linear field from ``src`` to the Delaunay triangulation of an isometric ``dst``.

    Returns ``(delaunay(dst), field)``.
    """
    ms = _delaunay_mesh(src, {"f": np.asarray(values, dtype=np.complex128)})
    md = _delaunay_mesh(dst)
    mapping = isometric(dst, src)
    if mapping is None:
        raise SurgeryError("surfaces are not isometric")
    out = np.full(md.n_half, np.nan, dtype=np.complex128)
    for hd, hs in mapping.items():
        out[hd] = ms.carry["f"][hs]
    for _ in range(md.n_half):
        unknown = np.isnan(out.real)
        if not unknown.any():
            break
        for t in range(md.n_half // 3):
            slots = [3 * t, 3 * t + 1, 3 * t + 2]
            miss = [h for h in slots if unknown[h]]
            if len(miss) == 1:
                h = miss[0]
                out[h] = -sum(out[x] for x in slots if x != h)
                out[md.opp[h]] = -out[h]
                unknown[h] = unknown[md.opp[h]] = False
    if np.isnan(out.real).any():
        raise SurgeryError("could not transport the deformation")
    return md.to_surface(dst.marked), out


def _marked_map(ref: TranslationSurface, cur: TranslationSurface):
    """Vertex correspondence ``ref -> cur`` for isometric surfaces."""
    mr, mc = _delaunay_mesh(ref), _delaunay_mesh(cur)
    mapping = isometric(ref, cur)
    if mapping is None:
        raise SurgeryError("surfaces are not isometric")
    return {int(mr.vlab[a]): int(mc.vlab[b]) for a, b in mapping.items()}


def restore(surface: TranslationSurface, record: CollapseRecord):
    """Invert :func:`collapse_closed`: unpinch, move back and collapse the opened pair."""
    if surface is record.pinched:
        pp, pm = record.p_plus, record.p_minus
    else:
        vm = _marked_map(record.pinched, surface)
        pp, pm = vm[record.p_plus], vm[record.p_minus]
    unpinched, _ = unpinch(surface, pp, pm, record.kappa)
    move_cert = record.certificates[1]
    base, vel = _transport(record.moved, move_cert.velocity, unpinched)
    m, _, _ = flow(base, -vel, (), 1.0)
    back = m.to_surface(base.marked)
    g1 = find_connection(back, record.holonomy, closed=False)
    if g1 is None:
        raise Degeneration("the opened pair did not reappear")
    return collapse_open_connection(back, g1, 1, 1)


# ----------------------------------------------------------------------
# several connections and the exception set


def _segment_pieces(hol, opp, h, v, length):
    """Pieces of the straight segment from corner ``h`` as ``(triangle, start, end)`` in local frames."""
    res = trace_from_corner(hol, opp, h, v, length=length)
    u = v / abs(v)
    if res.ended == "vertex" and not res.crossings:
        h = int(opp[res.corner])  # the segment is an edge
    # trace_from_corner may advance to the neighbouring corner when v lies on its side
    b = -hol[prv(h)]
    if abs(cross(b, u)) <= 1e-10 * abs(b) and (b.real * u.real + b.imag * u.imag) > 0:
        h = int(opp[prv(h)])
    T = h // 3
    origin = sum(hol[3 * T + j] for j in range(h % 3))
    pieces = []
    s_in = 0.0
    for x in res.crossings:
        a = sum(hol[3 * T + j] for j in range(x % 3))
        d = hol[x]
        s_out = cross(a - origin, d) / cross(u, d)
        pieces.append((T, origin + s_in * u, origin + s_out * u))
        f = int(opp[x])
        T2 = f // 3
        start_f = sum(hol[3 * T2 + j] for j in range(f % 3))
        origin = origin + start_f - (a + d)
        T, s_in = T2, s_out
    s_end = min(length, res.distance) if res.ended == "vertex" else length
    pieces.append((T, origin + s_in * u, origin + s_end * u))
    return pieces


def _segments_meet(p, q, r, s, tol):
    d1, d2 = q - p, s - r
    den = cross(d1, d2)
    if abs(den) < 1e-14 * abs(d1) * abs(d2):
        if abs(cross(d1, r - p)) > tol * abs(d1):
            return False
        # collinear: overlap of projections
        t0 = ((r - p).real * d1.real + (r - p).imag * d1.imag) / abs(d1) ** 2
        t1 = ((s - p).real * d1.real + (s - p).imag * d1.imag) / abs(d1) ** 2
        return max(t0, t1) >= -tol and min(t0, t1) <= 1 + tol
    t = cross(r - p, d2) / den
    w = cross(r - p, d1) / den
    return -tol <= t <= 1 + tol and -tol <= w <= 1 + tol


def surgery_locus(surface: TranslationSurface, sc: SaddleConnection):
    """Pieces of the connection and of the two opening rays at angles +-pi."""
    hol, opp = surface.hol, surface.opp
    L = abs(sc.holonomy)
    pieces = _segment_pieces(hol, opp, sc.start_corner, sc.holonomy, L)
    for theta in (math.pi, -math.pi):
        total = float(surface.cone_angles[sc.start_vertex])
        h, d = corner_at_angle(hol, opp, sc.start_corner, theta % total)
        pieces += _segment_pieces(hol, opp, h, d * L, L)
    return pieces


def loci_intersect(surface, sc1, sc2, tol=1e-9):
    by_tri = {}
    for T, a, b in surgery_locus(surface, sc1):
        by_tri.setdefault(T, []).append((a, b))
    for T, a, b in surgery_locus(surface, sc2):
        for c, d in by_tri.get(T, ()):
            if _segments_meet(a, b, c, d, tol):
                return True
    return False


def detect_exception(surface: TranslationSurface, window, connections=None):
    """Classify a surface as ``"none"``, ``"type1"`` or ``"type2"``.

    ``window`` is the raw length window ``(lo, hi)``; closed connections up to
    ``2 * hi`` are considered.  ``type2``: two of them share a zero.
    ``type1``: two at different zeros have intersecting surgery loci.
    """
    B = 2.0 * window[1]
    if connections is None:
        connections = enumerate_saddle_connections(surface, B, closed_only=True)
    short = [c for c in connections if c.closed and c.length <= B]
    zeros = [c.start_vertex for c in short]
    if len(zeros) != len(set(zeros)):
        return "type2"
    for i in range(len(short)):
        for j in range(i + 1, len(short)):
            if loci_intersect(surface, short[i], short[j]):
                return "type1"
    return "none"


def collapse_pipeline(surface: TranslationSurface, connections, check=True):
    """Collapse ``K`` closed connections one after another.

    Returns ``(surface_out, labels, annulus_vectors, records)``: ``labels``
    are the zeros of the input that carried the connections, in order.
    """
    connections = list(connections)
    if check:
        for i in range(len(connections)):
            for j in range(i + 1, len(connections)):
                a, b = connections[i], connections[j]
                if a.start_vertex == b.start_vertex:
                    raise LociIntersect(f"connections {i} and {j} share a zero", j)
                if loci_intersect(surface, a, b):
                    raise LociIntersect(f"surgery loci of connections {i} and {j} intersect", j)
    labels = [int(c.start_vertex) for c in connections]
    hols = [complex(c.holonomy) for c in connections]
    records = []
    current = surface
    for i in range(len(connections)):
        sc = connections[0] if i == 0 else find_connection(current, hols[i], closed=True)
        if sc is None:
            raise LociIntersect(f"connection {i} did not survive earlier surgeries", i)
        try:
            current, rec = collapse_closed(current, sc, track=hols[i + 1:])
        except SurgeryError as exc:
            exc.index = i
            raise
        hols[i + 1:] = rec.tracked
        records.append(rec)
    return current, labels, [r.kappa for r in records], records


def restore_pipeline(surface, records):
    for rec in reversed(records):
        surface = restore(surface, rec)
    return surface
