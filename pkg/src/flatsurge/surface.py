"""Triangulated translation surfaces.

A surface is stored half-edge style: half-edge ``h`` lives in triangle ``h // 3``
and the triangle's half-edges ``3t, 3t+1, 3t+2`` run counter-clockwise.  Each
half-edge carries its holonomy (a complex number) and ``opp[h]`` is the
half-edge it is glued to, which carries the negated holonomy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    BadConeAngle,
    DegenerateTriangle,
    FlipLimit,
    GluingMismatch,
    InvalidSurface,
    TriangleNotClosed,
)

TOL = 1e-9
TWO_PI = 2.0 * math.pi


def nxt(h):
    return h - h % 3 + (h % 3 + 1) % 3


def prv(h):
    return h - h % 3 + (h % 3 + 2) % 3


def cross(a, b):
    """z-component of the cross product of two plane vectors given as complex numbers."""
    return a.real * b.imag - a.imag * b.real


def angle_between(a, b):
    """Counter-clockwise angle from direction ``a`` to direction ``b``, in [0, 2pi)."""
    ang = math.atan2(cross(a, b), a.real * b.real + a.imag * b.imag)
    if ang < 0:
        ang += TWO_PI
    return ang


def canonical_key(z, ndigits=9):
    """Sort key of a vector after flipping it into the closed upper half plane."""
    if z.imag < 0 or (z.imag == 0 and z.real < 0):
        z = -z
    return (round(z.real, ndigits), round(z.imag, ndigits))


@dataclass(frozen=True)
class Stratum:
    kappa: tuple
    genus: int
    marked: int = 0

    @property
    def n_zeros(self):
        return len(self.kappa)

    @property
    def dimension(self):
        """Complex dimension 2g - 1 + n of the stratum (marked points counted as zeros)."""
        return 2 * self.genus - 1 + len(self.kappa) + self.marked

    def __str__(self):
        parts = [str(k) for k in self.kappa] + ["0"] * self.marked
        return f"H_{self.genus}({', '.join(parts)})"


@dataclass(frozen=True)
class ConePoint:
    vertex: int
    order: int
    angle: float
    incident_corners: tuple
    marked: bool = False


class TranslationSurface:
    """Immutable triangulated translation surface.

    Use :func:`build_surface` (or the polygon constructors in
    :mod:`flatsurge.fixtures`) rather than calling the constructor directly.
    """

    def __init__(self, hol, opp, marked=(), validate=True):
        hol = np.array(hol, dtype=np.complex128)
        opp = np.array(opp, dtype=np.int64)
        hol.setflags(write=False)
        opp.setflags(write=False)
        self.hol = hol
        self.opp = opp
        self.marked = frozenset(int(v) for v in marked)
        if validate:
            self._validate()

    # -- combinatorics -------------------------------------------------
    @property
    def n_half(self):
        return len(self.hol)

    @property
    def n_triangles(self):
        return len(self.hol) // 3

    @cached_property
    def vertices(self):
        """Half-edge orbits around each vertex, counter-clockwise, ordered by first element."""
        seen = np.zeros(self.n_half, dtype=bool)
        out = []
        opp = self.opp
        for h0 in range(self.n_half):
            if seen[h0]:
                continue
            orbit = []
            h = h0
            while not seen[h]:
                seen[h] = True
                orbit.append(h)
                h = int(opp[prv(h)])
            out.append(tuple(orbit))
        return tuple(out)

    @cached_property
    def vertex_of(self):
        v = np.empty(self.n_half, dtype=np.int64)
        for i, orbit in enumerate(self.vertices):
            v[list(orbit)] = i
        v.setflags(write=False)
        return v

    @cached_property
    def corner_angle(self):
        """Angle of the corner at the start of each half-edge."""
        h = np.arange(self.n_half)
        a = self.hol
        b = -self.hol[h - h % 3 + (h % 3 + 2) % 3]
        ang = np.arctan2(a.real * b.imag - a.imag * b.real, a.real * b.real + a.imag * b.imag)
        return np.where(ang < 0, ang + TWO_PI, ang)

    @cached_property
    def angle_position(self):
        """Cumulative angle at which each corner starts, measured around its vertex."""
        pos = np.zeros(self.n_half)
        ca = self.corner_angle
        for orbit in self.vertices:
            acc = 0.0
            for h in orbit:
                pos[h] = acc
                acc += ca[h]
        return pos

    @cached_property
    def cone_angles(self):
        ca = self.corner_angle
        return np.array([sum(ca[h] for h in orbit) for orbit in self.vertices])

    @cached_property
    def orders(self):
        return tuple(int(round(a / TWO_PI)) - 1 for a in self.cone_angles)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def genus(self):
        chi = self.n_vertices - self.n_half // 2 + self.n_triangles
        return (2 - chi) // 2

    def cone_points(self):
        return [
            ConePoint(i, self.orders[i], float(self.cone_angles[i]), orbit, i in self.marked)
            for i, orbit in enumerate(self.vertices)
        ]

    def zeros(self):
        """Vertex ids of genuine zeros (positive order)."""
        return [i for i, o in enumerate(self.orders) if o > 0]

    @cached_property
    def triangle_areas(self):
        h = self.hol.reshape(-1, 3)
        return 0.5 * cross(h[:, 0], h[:, 1])

    @cached_property
    def scale(self):
        return float(np.max(np.abs(self.hol)))

    # -- validation ----------------------------------------------------
    def _validate(self):
        n = self.n_half
        if n == 0 or n % 3:
            raise InvalidSurface("number of half-edges must be a positive multiple of 3")
        opp = self.opp
        if opp.min() < 0 or opp.max() >= n:
            raise InvalidSurface("gluing refers to unknown edges")
        idx = np.arange(n)
        if np.any(opp[opp] != idx) or np.any(opp == idx):
            raise InvalidSurface("gluing is not a fixed-point free involution")
        scale = max(self.scale, 1e-300)
        tri = self.hol.reshape(-1, 3)
        if np.any(np.abs(tri.sum(axis=1)) > TOL * scale):
            raise TriangleNotClosed("triangle holonomies do not sum to zero")
        if np.any(np.abs(self.hol + self.hol[opp]) > TOL * scale):
            raise GluingMismatch("glued edges do not carry opposite holonomies")
        if np.any(self.triangle_areas <= TOL * scale * scale):
            raise DegenerateTriangle("triangle with non-positive signed area")
        for i, a in enumerate(self.cone_angles):
            k = a / TWO_PI
            if abs(k - round(k)) > 1e-7 or round(k) < 1:
                raise BadConeAngle(f"vertex {i} has cone angle {a:.12g}")
            if round(k) == 1 and i not in self.marked:
                raise BadConeAngle(f"vertex {i} has angle 2pi but is not a marked point")
        for v in self.marked:
            if v >= self.n_vertices:
                raise InvalidSurface(f"marked point {v} is not a vertex")
        if sum(self.orders) != 2 * self.genus - 2:
            raise BadConeAngle("orders do not sum to 2g-2")

    # -- derived values ------------------------------------------------
    def area(self):
        return float(self.triangle_areas.sum())

    def stratum(self):
        kappa = tuple(sorted((o for o in self.orders if o > 0), reverse=True))
        return Stratum(kappa, self.genus, sum(1 for o in self.orders if o == 0))

    def with_holonomy(self, hol, validate=True):
        return TranslationSurface(hol, self.opp, self.marked, validate=validate)

    def scaled(self, factor):
        return TranslationSurface(self.hol * factor, self.opp, self.marked, validate=False)

    def rotated(self, theta):
        return TranslationSurface(self.hol * np.exp(1j * theta), self.opp, self.marked, validate=False)

    def mesh(self):
        return Mesh.from_surface(self)

    def __repr__(self):
        return f"<TranslationSurface {self.stratum()} with {self.n_triangles} triangles>"


def _ear_clip(points):
    """Triangulate a simple counter-clockwise polygon; returns index triples."""
    idx = list(range(len(points)))
    tris = []
    guard = 0
    while len(idx) > 3:
        n = len(idx)
        best, best_q = None, -1.0
        for k in range(n):
            i, j, l = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = points[i], points[j], points[l]
            ar = cross(b - a, c - a)
            if ar <= 1e-14 * max(abs(b - a), abs(c - a)) ** 2:
                continue
            inside = False
            for m in idx:
                if m in (i, j, l):
                    continue
                p = points[m]
                if cross(b - a, p - a) >= -1e-15 and cross(c - b, p - b) >= -1e-15 and cross(a - c, p - c) >= -1e-15:
                    inside = True
                    break
            if inside:
                continue
            # prefer fat ears so thin slivers do not accumulate
            q = ar / max(abs(b - a), abs(c - b), abs(a - c)) ** 2
            if q > best_q:
                best, best_q = k, q
        if best is None:
            raise InvalidSurface("polygon is not simple or not counter-clockwise")
        n = len(idx)
        tris.append((idx[best - 1], idx[best], idx[(best + 1) % n]))
        del idx[best]
        guard += 1
    tris.append(tuple(idx))
    return tris


# ----------------------------------------------------------------------
# construction


def build_surface(triangles, holonomies, gluing, marked_points=(), mark_regular=False):
    """Validate raw triangulation data and return a :class:`TranslationSurface`.

    ``triangles`` is a list of triples of edge labels, ``holonomies`` maps a label
    to a complex number (or a ``(re, im)`` pair), ``gluing`` lists label pairs.
    Marked points are vertex ids in the canonical vertex numbering (ordered by the
    first half-edge of each vertex in the order the triangles are listed).
    """
    labels = [lab for tri in triangles for lab in tri]
    if len(set(labels)) != len(labels):
        raise InvalidSurface("edge labels must be unique")
    if any(len(tri) != 3 for tri in triangles):
        raise InvalidSurface("every triangle needs exactly three edges")
    slot = {lab: i for i, lab in enumerate(labels)}
    hol = np.empty(len(labels), dtype=np.complex128)
    for lab, i in slot.items():
        z = holonomies[lab]
        hol[i] = complex(z[0], z[1]) if isinstance(z, (tuple, list)) else complex(z)
    opp = -np.ones(len(labels), dtype=np.int64)
    for a, b in gluing:
        if a not in slot or b not in slot:
            raise InvalidSurface(f"gluing pair ({a}, {b}) refers to unknown edges")
        if opp[slot[a]] >= 0 or opp[slot[b]] >= 0:
            raise InvalidSurface(f"edge glued twice in pair ({a}, {b})")
        opp[slot[a]] = slot[b]
        opp[slot[b]] = slot[a]
    if np.any(opp < 0):
        raise InvalidSurface("some edges are not glued")
    # orientation: flip clockwise triangles is not allowed, report instead
    marked = set(marked_points)
    if mark_regular:
        tmp = TranslationSurface(hol, opp, validate=False)
        marked |= {i for i, o in enumerate(tmp.orders) if o == 0}
    return TranslationSurface(hol, opp, marked)


# ----------------------------------------------------------------------
# mutable triangulation used by every operation that changes combinatorics


@dataclass
class Mesh:
    """Mutable half-edge triangulation.

    ``vlab`` stores, for each half-edge, a label of its start vertex; labels are
    carried through flips, insertions and removals so that callers can follow
    particular vertices.  ``carry`` holds extra per-half-edge arrays that
    transform linearly under flips (deformation vectors, homology classes).
    """

    hol: np.ndarray
    opp: np.ndarray
    vlab: np.ndarray
    carry: dict = field(default_factory=dict)
    flips: int = 0

    @classmethod
    def from_surface(cls, s, carry=None):
        vlab = np.array(s.vertex_of, dtype=np.int64)
        return cls(s.hol.copy(), s.opp.copy(), vlab, dict(carry or {}))

    def copy(self):
        return Mesh(self.hol.copy(), self.opp.copy(), self.vlab.copy(),
                    {k: v.copy() for k, v in self.carry.items()}, self.flips)

    @property
    def n_half(self):
        return len(self.hol)

    def next_label(self):
        return int(self.vlab.max()) + 1

    # -- geometry of a single edge ------------------------------------
    def quad(self, e):
        """Developed quadrilateral of edge ``e``: P=0, Q, R (apex of e's triangle), S (other apex)."""
        q = self.hol[e]
        r = q + self.hol[nxt(e)]
        s = self.hol[nxt(self.opp[e])]
        return q, r, s

    def flippable(self, e, eps=1e-12):
        q, r, s = self.quad(e)
        d = s - r
        c1 = cross(d, -r)
        c2 = cross(d, q - r)
        sc = abs(d) * max(abs(r), abs(q - r), 1e-300)
        return c1 * c2 < 0 and abs(c1) > eps * sc and abs(c2) > eps * sc

    def flip(self, e):
        """Replace edge ``e`` by the other diagonal of its quadrilateral."""
        hol, opp, vlab = self.hol, self.opp, self.vlab
        e2 = int(opp[e])
        t1, t2 = e // 3, e2 // 3
        a, b = nxt(e), prv(e)
        c, d = nxt(e2), prv(e2)
        f, f2 = 3 * t1, 3 * t2
        new_of = {e: f, e2: f2, b: 3 * t1 + 1, c: 3 * t1 + 2, d: 3 * t2 + 1, a: 3 * t2 + 2}
        moved = (b, c, d, a)
        old_hol = {x: hol[x] for x in moved}
        old_opp = {x: int(opp[x]) for x in moved}
        old_lab = {x: vlab[x] for x in moved}
        old_carry = {k: {x: arr[x].copy() for x in moved} for k, arr in self.carry.items()}
        fh = old_hol[d] + old_hol[a]
        flab, f2lab = old_lab[d], old_lab[b]
        fcarry = {k: old_carry[k][d] + old_carry[k][a] for k in self.carry}
        for x in moved:
            nx = new_of[x]
            hol[nx] = old_hol[x]
            vlab[nx] = old_lab[x]
            for k, arr in self.carry.items():
                arr[nx] = old_carry[k][x]
        for x in moved:
            nx = new_of[x]
            px = old_opp[x]
            npx = new_of.get(px, px) if px in moved else px
            opp[nx] = npx
            opp[npx] = nx
        hol[f], hol[f2] = fh, -fh
        vlab[f], vlab[f2] = flab, f2lab
        for k, arr in self.carry.items():
            arr[f] = fcarry[k]
            arr[f2] = -fcarry[k]
        opp[f], opp[f2] = f2, f
        self.flips += 1
        return f

    # -- Delaunay --------------------------------------------------------
    def incircle_all(self):
        """Normalised in-circle determinant for every half-edge (positive = violates Delaunay)."""
        h = np.arange(self.n_half)
        hol, opp = self.hol, self.opp
        q = hol
        r = q + hol[h - h % 3 + (h % 3 + 1) % 3]
        o = opp
        s = hol[o - o % 3 + (o % 3 + 1) % 3]
        det = -(
            (q.real * r.imag - q.imag * r.real) * abs(s) ** 2
            - (q.real * s.imag - q.imag * s.real) * abs(r) ** 2
            + (r.real * s.imag - r.imag * s.real) * abs(q) ** 2
        )
        norm = (np.maximum(np.maximum(abs(q), abs(r)), abs(s))) ** 4
        return det / norm

    def make_delaunay(self, max_flips=100000, tie_tol=1e-9):
        start = self.flips
        while True:
            inc = self.incircle_all()
            bad = np.nonzero(inc > tie_tol)[0]
            if len(bad) == 0:
                break
            done = False
            for e in bad[np.argsort(-inc[bad])]:
                e = int(e)
                if self._incircle(e) > tie_tol and self.flippable(e):
                    self.flip(e)
                    done = True
            if not done:
                raise FlipLimit("Delaunay flip loop stalled on non-flippable edges")
            if self.flips - start > max_flips:
                raise FlipLimit("Delaunay flip budget exhausted")
        # ties: cocircular quadrilaterals take the lexicographically smaller diagonal
        while True:
            inc = self.incircle_all()
            cand = np.nonzero(np.abs(inc) <= tie_tol)[0]
            done = False
            for e in cand:
                e = int(e)
                if e > self.opp[e]:
                    continue
                if abs(self._incircle(e)) > tie_tol or not self.flippable(e):
                    continue
                q, r, s = self.quad(e)
                if canonical_key(r - s) < canonical_key(q):
                    self.flip(e)
                    done = True
            if not done:
                break
            if self.flips - start > max_flips:
                raise FlipLimit("Delaunay flip budget exhausted")
        return self

    def _incircle(self, e):
        q, r, s = self.quad(e)
        det = -(cross(q, r) * abs(s) ** 2 - cross(q, s) * abs(r) ** 2 + cross(r, s) * abs(q) ** 2)
        return det / max(abs(q), abs(r), abs(s)) ** 4

    # -- vertices ------------------------------------------------------
    def orbit(self, h):
        out = [h]
        x = int(self.opp[prv(h)])
        while x != h:
            out.append(x)
            x = int(self.opp[prv(x)])
            if len(out) > self.n_half:
                raise InvalidSurface("broken vertex orbit")
        return out

    def orbits(self):
        seen = set()
        res = []
        for h in range(self.n_half):
            if h in seen:
                continue
            o = self.orbit(h)
            seen.update(o)
            res.append(o)
        return res

    def relabel(self):
        """Give each vertex orbit a fresh label; returns old-label sets per new label."""
        for i, o in enumerate(self.orbits()):
            self.vlab[o] = i

    def half_edges_of(self, label):
        return [h for h in range(self.n_half) if self.vlab[h] == label]

    def corner_angle(self, h):
        return angle_between(self.hol[h], -self.hol[prv(h)])

    def vertex_angle(self, h):
        return sum(self.corner_angle(x) for x in self.orbit(h))

    # -- point insertion and removal -------------------------------------
    def insert_point(self, t, z, label=None):
        """Insert a new vertex at offset ``z`` from the start of half-edge ``3t``."""
        if label is None:
            label = self.next_label()
        h0, h1, h2 = 3 * t, 3 * t + 1, 3 * t + 2
        u0, u1 = self.hol[h0], self.hol[h1]
        B, C = u0, u0 + u1
        n = self.n_half
        tb, tc = n, n + 3
        hol = np.concatenate([self.hol, np.zeros(6, dtype=np.complex128)])
        opp = np.concatenate([self.opp, np.zeros(6, dtype=np.int64)])
        vlab = np.concatenate([self.vlab, np.zeros(6, dtype=np.int64)])
        la, lb, lc = self.vlab[h0], self.vlab[h1], self.vlab[h2]
        o1, o2 = int(self.opp[h1]), int(self.opp[h2])
        # triangle a: h0, B->X, X->A
        hol[h1], hol[h2] = z - B, -z
        vlab[h1], vlab[h2] = lb, label
        # triangle b: old h1, C->X, X->B
        hol[tb], hol[tb + 1], hol[tb + 2] = u1, z - C, B - z
        vlab[tb], vlab[tb + 1], vlab[tb + 2] = lb, lc, label
        # triangle c: old h2, A->X, X->C
        hol[tc], hol[tc + 1], hol[tc + 2] = -C, z, C - z
        vlab[tc], vlab[tc + 1], vlab[tc + 2] = lc, la, label
        # gluings of moved outer edges (careful with self-glued triangles)
        o1 = {h1: tb, h2: tc}.get(o1, o1)
        o2 = {h1: tb, h2: tc}.get(o2, o2)
        opp[tb], opp[o1] = o1, tb
        opp[tc], opp[o2] = o2, tc
        for x, y in ((h1, tb + 2), (h2, tc + 1), (tb + 1, tc + 2)):
            opp[x], opp[y] = y, x
        self.hol, self.opp, self.vlab = hol, opp, vlab
        self.carry = {}
        return label

    def locate(self, t, z):
        return 3 * t, z

    def remove_vertex(self, label, max_flips=2000):
        """Remove a vertex of angle 2pi carrying ``label`` by re-triangulating its star."""
        hs = self.half_edges_of(label)
        if not hs:
            raise InvalidSurface(f"no vertex with label {label}")
        if abs(self.vertex_angle(hs[0]) - TWO_PI) > 1e-6:
            raise InvalidSurface("only regular points can be removed")
        rng = np.random.default_rng(label)
        for _ in range(max_flips):
            star = self.orbit(self.half_edges_of(label)[0])
            k = len(star)
            tris = sorted({h // 3 for h in star})
            outer = [nxt(h) for h in star]
            if len(tris) == k and not ({int(self.opp[o]) for o in outer} & set(star)):
                break
            # loops at the vertex are what keeps the star from embedding; when
            # none is flippable, a seeded random flip nearby breaks cycles
            cand = [h for h in star if self.flippable(h) and self.vlab[self.opp[h]] == label]
            if cand:
                self.flip(max(cand, key=lambda h: abs(self.hol[h])))
                continue
            cand = [h for h in star if self.flippable(h)]
            if not cand:
                raise FlipLimit("cannot embed the star of a regular vertex")
            self.flip(cand[int(rng.integers(len(cand)))])
        else:
            raise FlipLimit("vertex removal flip budget exhausted")
        pts = [complex(self.hol[h]) for h in star]
        labs = [int(self.vlab[o]) for o in outer]
        outer_opp = [int(self.opp[o]) for o in outer]
        where = {o: i for i, o in enumerate(outer)}
        new_slot = {}
        diag = {}
        for T, (a, b, c) in zip(tris, _ear_clip(pts)):
            for j, (x, y) in enumerate(((a, b), (b, c), (c, a))):
                slot = 3 * T + j
                self.hol[slot] = pts[y] - pts[x]
                self.vlab[slot] = labs[x]
                if y == (x + 1) % k:
                    new_slot[x] = slot
                else:
                    key = (min(x, y), max(x, y))
                    if key in diag:
                        o = diag.pop(key)
                        self.opp[o], self.opp[slot] = slot, o
                    else:
                        diag[key] = slot
        for i in range(k):
            po = outer_opp[i]
            npo = new_slot[where[po]] if po in where else po
            self.opp[new_slot[i]] = npo
            self.opp[npo] = new_slot[i]
        drop = set(tris[k - 2:])
        keep_t = [t for t in range(self.n_half // 3) if t not in drop]
        index = -np.ones(self.n_half, dtype=np.int64)
        new_ids = np.concatenate([[3 * t, 3 * t + 1, 3 * t + 2] for t in keep_t])
        index[new_ids] = np.arange(len(new_ids))
        self.hol = self.hol[new_ids]
        self.vlab = self.vlab[new_ids]
        self.opp = index[self.opp[new_ids]]
        self.carry = {}
        if np.any(self.opp < 0):
            raise InvalidSurface("vertex removal broke the gluing")

    def swap_gluing(self, h1, h2):
        """Reglue two parallel equal half-edges crosswise (slit construction)."""
        o1, o2 = int(self.opp[h1]), int(self.opp[h2])
        if {h1, h2} & {o1, o2}:
            raise InvalidSurface("cannot swap an edge with itself")
        self.opp[h1], self.opp[o2] = o2, h1
        self.opp[h2], self.opp[o1] = o1, h2
        self.hol[o2] = -self.hol[h1]
        self.hol[o1] = -self.hol[h2]

    def to_surface(self, marked_labels=(), validate=True):
        marked_labels = set(marked_labels)
        s = TranslationSurface(self.hol, self.opp, validate=False)
        marked = {i for i, orbit in enumerate(s.vertices) if int(self.vlab[orbit[0]]) in marked_labels}
        return TranslationSurface(self.hol, self.opp, marked, validate=validate)

    def labels_to_vertices(self, surface):
        return {int(self.vlab[orbit[0]]): i for i, orbit in enumerate(surface.vertices)}


# ----------------------------------------------------------------------
# surface-level operations


def area(surface):
    return surface.area()


def normalize_area(surface):
    a = surface.area()
    if a <= 0:
        raise InvalidSurface("surface has non-positive area")
    if abs(a - 1.0) <= 1e-15:
        return surface
    return TranslationSurface(surface.hol / math.sqrt(a), surface.opp, surface.marked)


def stratum_of(surface):
    return surface.stratum()


def delaunay_retriangulate(surface):
    m = Mesh.from_surface(surface)
    m.make_delaunay()
    return m.to_surface(surface.marked)


def _cell_structure(s, tol):
    """Delaunay cell decomposition: boundary half-edges with next-in-cell links."""
    m = Mesh.from_surface(s)
    inc = m.incircle_all()
    interior = np.abs(inc) <= tol
    nxt_cell = {}
    for h in range(s.n_half):
        if interior[h]:
            continue
        x = nxt(h)
        guard = 0
        while interior[x]:
            x = nxt(int(s.opp[x]))
            guard += 1
            if guard > s.n_half:
                raise InvalidSurface("broken cell structure")
        nxt_cell[h] = x
    return nxt_cell


def isometric(a, b, tol=TOL):
    """Return a half-edge bijection between the Delaunay cell structures of two
    surfaces if they are isometric translation surfaces, otherwise ``None``."""
    if a.n_vertices != b.n_vertices or a.genus != b.genus:
        return None
    if sorted(a.orders) != sorted(b.orders) or len(a.marked) != len(b.marked):
        return None
    if abs(a.area() - b.area()) > tol * max(1.0, a.area()) * 10:
        return None
    da, db = delaunay_retriangulate(a), delaunay_retriangulate(b)
    ca, cb = _cell_structure(da, 1e-7), _cell_structure(db, 1e-7)
    if len(ca) != len(cb):
        return None
    scale = max(1.0, da.scale)
    ea = sorted(ca, key=lambda h: canonical_key(da.hol[h]) + (da.hol[h].imag,))
    a0 = ea[0]
    for b0 in cb:
        if abs(db.hol[b0] - da.hol[a0]) > tol * scale:
            continue
        mapping = _propagate(da, db, ca, cb, a0, b0, tol * scale)
        if mapping is not None:
            return mapping
    return None


def _propagate(da, db, ca, cb, a0, b0, tol):
    mapping = {a0: b0}
    used = {b0}
    stack = [a0]
    while stack:
        x = stack.pop()
        y = mapping[x]
        if abs(da.hol[x] - db.hol[y]) > tol:
            return None
        if (int(da.vertex_of[x]) in da.marked) != (int(db.vertex_of[y]) in db.marked):
            return None
        for xx, yy in ((ca[x], cb[y]), (int(da.opp[x]), int(db.opp[y]))):
            if xx in mapping:
                if mapping[xx] != yy:
                    return None
                continue
            if yy in used:
                return None
            mapping[xx] = yy
            used.add(yy)
            stack.append(xx)
    return mapping if len(mapping) == len(ca) else None
