"""Relative homology of a triangulated surface and period coordinates.

Classes live in ``Z^d`` with ``d = 2g + |vertices| - 1``: the coordinates are the
coefficients on the edges that are not in a chosen spanning tree of the dual
graph, every other edge being expressed through triangle relations.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import gcd

import numpy as np

from .errors import NotRealizable
from .surface import TranslationSurface, cross, nxt, prv


def _ext_gcd_combo(w):
    """Integer vector x with ``w . x = gcd(w)`` (non-negative gcd)."""
    x = [0] * len(w)
    g = 0
    for i, wi in enumerate(w):
        wi = int(wi)
        if wi == 0:
            continue
        if g == 0:
            g = abs(wi)
            x = [0] * len(w)
            x[i] = 1 if wi > 0 else -1
            continue
        # solve s*g + t*wi = gcd(g, wi)
        a, b = g, wi
        s0, s1, t0, t1 = 1, 0, 0, 1
        while b:
            q = a // b
            a, b = b, a - q * b
            s0, s1 = s1, s0 - q * s1
            t0, t1 = t1, t0 - q * t1
        if a < 0:
            a, s0, t0 = -a, -s0, -t0
        x = [s0 * v for v in x]
        x[i] += t0
        g = a
    return x, g


def _row_basis(rows):
    """Integer row reduction of a list of integer vectors to a lattice basis."""
    rows = [list(map(int, r)) for r in rows if any(r)]
    if not rows:
        return []
    ncol = len(rows[0])
    out = []
    col = 0
    while rows and col < ncol:
        nz = [r for r in rows if r[col] != 0]
        if not nz:
            col += 1
            continue
        while True:
            nz.sort(key=lambda r: abs(r[col]))
            piv = nz[0]
            rest = []
            for r in nz[1:]:
                q = r[col] // piv[col]
                r2 = [a - q * b for a, b in zip(r, piv)]
                rest.append(r2)
            others = [r for r in rows if r[col] == 0]
            nz = [piv] + [r for r in rest if r[col] != 0]
            zeros = [r for r in rest if r[col] == 0 and any(r)]
            rows = others + zeros + nz
            if len(nz) == 1:
                break
        out.append(piv)
        rows = [r for r in rows if r is not piv and any(r)]
        col += 1
    return out


class Homology:
    """Chain-level bookkeeping for ``H_1(X, vertices; Z)``."""

    def __init__(self, s: TranslationSurface):
        self.s = s
        n = s.n_half
        T = s.n_triangles
        opp = s.opp
        # dual spanning tree by BFS over triangles
        parent_edge = [-1] * T
        seen = [False] * T
        order = [0]
        seen[0] = True
        tree = np.zeros(n, dtype=bool)
        k = 0
        while k < len(order):
            t = order[k]
            k += 1
            for h in (3 * t, 3 * t + 1, 3 * t + 2):
                u = int(opp[h]) // 3
                if not seen[u]:
                    seen[u] = True
                    parent_edge[u] = int(opp[h])
                    tree[h] = tree[opp[h]] = True
                    order.append(u)
        self.dual_tree = tree
        basis_edges = [h for h in range(n) if not tree[h] and h < opp[h]]
        d = len(basis_edges)
        vec = np.zeros((n, d), dtype=np.int64)
        known = np.zeros(n, dtype=bool)
        for i, h in enumerate(basis_edges):
            vec[h, i] = 1
            vec[opp[h], i] = -1
            known[h] = known[opp[h]] = True
        for t in reversed(order[1:]):
            ph = parent_edge[t]
            others = [h for h in (3 * t, 3 * t + 1, 3 * t + 2) if h != ph]
            assert all(known[h] for h in others)
            vec[ph] = -vec[others[0]] - vec[others[1]]
            vec[opp[ph]] = -vec[ph]
            known[ph] = known[opp[ph]] = True
        self.basis_edges = basis_edges
        self.vec = vec
        self.d = d
        self.genus = s.genus

    # -- basic maps ----------------------------------------------------
    def chain_class(self, chain):
        """Class of a chain given as a list of half-edges or a mapping half-edge -> coefficient."""
        v = np.zeros(self.d, dtype=np.int64)
        items = chain.items() if isinstance(chain, dict) else ((h, 1) for h in chain)
        for h, c in items:
            v += c * self.vec[h]
        return v

    def period(self, cls):
        return complex(np.asarray(cls) @ self.s.hol[self.basis_edges])

    @cached_property
    def boundary_matrix(self):
        """Boundary of each basis edge in vertex coordinates (end minus start)."""
        s = self.s
        B = np.zeros((self.d, s.n_vertices), dtype=np.int64)
        for i, h in enumerate(self.basis_edges):
            B[i, s.vertex_of[nxt(h)]] += 1
            B[i, s.vertex_of[h]] -= 1
        return B

    def boundary(self, cls):
        return np.asarray(cls) @ self.boundary_matrix

    def is_absolute(self, cls):
        return not np.any(self.boundary(cls))

    # -- spanning tree in the primal graph avoiding dual tree edges ----
    @cached_property
    def primal_tree(self):
        s = self.s
        V = s.n_vertices
        adj = [[] for _ in range(V)]
        for h in range(s.n_half):
            if not self.dual_tree[h]:
                adj[s.vertex_of[h]].append(h)
        parent = [-1] * V  # half-edge arriving at the vertex from its parent
        seen = [False] * V
        seen[0] = True
        queue = [0]
        k = 0
        in_tree = np.zeros(s.n_half, dtype=bool)
        while k < len(queue):
            v = queue[k]
            k += 1
            for h in adj[v]:
                w = int(s.vertex_of[nxt(h)])
                if not seen[w]:
                    seen[w] = True
                    parent[w] = h
                    in_tree[h] = in_tree[s.opp[h]] = True
                    queue.append(w)
        return parent, in_tree

    def tree_path(self, u, v):
        """Half-edge path from vertex ``u`` to vertex ``v`` inside the primal tree."""
        parent, _ = self.primal_tree
        s = self.s

        def to_root(x):
            out = []
            while parent[x] >= 0:
                h = parent[x]
                out.append(int(s.opp[h]))
                x = int(s.vertex_of[h])
            return out

        up_u = to_root(u)
        up_v = to_root(v)
        # strip the common suffix
        while up_u and up_v and up_u[-1] == up_v[-1]:
            up_u.pop()
            up_v.pop()
        return up_u + [int(s.opp[h]) for h in reversed(up_v)]

    @cached_property
    def cotree_cycles(self):
        """Closed half-edge paths forming a basis of absolute homology."""
        s = self.s
        _, in_tree = self.primal_tree
        cycles = []
        for h in range(s.n_half):
            if h < s.opp[h] and not in_tree[h] and not self.dual_tree[h]:
                path = [h] + self.tree_path(int(s.vertex_of[nxt(h)]), int(s.vertex_of[h]))
                cycles.append(path)
        assert len(cycles) == 2 * self.genus
        return cycles

    # -- intersection pairing ------------------------------------------
    def dual_functional(self, path):
        """Functional f with ``<a, path> = a . f`` for every relative class ``a``.

        The closed path is pushed off to its left; the sign makes
        ``<east, north> = +1`` on a flat torus.
        """
        s = self.s
        opp = s.opp
        phi = np.zeros(s.n_half, dtype=np.int64)
        k = len(path)
        for i in range(k):
            e_in, e_out = path[i], path[(i + 1) % k]
            stop = int(opp[e_in])
            g = int(opp[prv(e_out)])
            guard = 0
            while g != stop:
                phi[g] -= 1
                phi[opp[g]] += 1
                g = int(opp[prv(g)])
                guard += 1
                if guard > s.n_half:
                    raise ValueError("path is not a closed edge path")
        return phi[self.basis_edges]

    @cached_property
    def cycle_classes(self):
        return np.array([self.chain_class(c) for c in self.cotree_cycles], dtype=np.int64).reshape(-1, self.d)

    @cached_property
    def cycle_functionals(self):
        return np.array([self.dual_functional(c) for c in self.cotree_cycles], dtype=np.int64).reshape(-1, self.d)

    @cached_property
    def gram(self):
        """Intersection matrix of the cotree cycles."""
        return self.cycle_classes @ self.cycle_functionals.T

    def abs_coordinates(self, cls):
        """Coordinates of an absolute class in the cotree cycle basis."""
        if not self.is_absolute(cls):
            raise NotRealizable("class has non-zero boundary")
        if self.genus == 0:
            return np.zeros(0, dtype=np.int64)
        pair = self.cycle_functionals @ np.asarray(cls)  # <cls, c_j>
        x = np.linalg.solve(self.gram.T.astype(float), pair.astype(float))
        xi = np.rint(x).astype(np.int64)
        if not np.array_equal(xi @ self.cycle_classes, np.asarray(cls)):
            raise NotRealizable("class is not in the span of the absolute basis")
        return xi

    def intersection(self, a, b):
        """Algebraic intersection of two absolute classes."""
        xa = self.abs_coordinates(a)
        xb = self.abs_coordinates(b)
        return int(xa @ self.gram @ xb)


def symplectic_reduce(gram, first=None):
    """Integer symplectic basis for a unimodular alternating form.

    ``gram`` is the form on Z^m.  Returns a list ``[a1, b1, a2, b2, ...]`` of
    coordinate vectors; ``first`` (if given) is used verbatim as ``a1``.
    """
    G = np.asarray(gram, dtype=object)
    m = G.shape[0]

    def form(x, y):
        return int(np.dot(np.dot(np.asarray(x, dtype=object), G), np.asarray(y, dtype=object)))

    span = [list(r) for r in np.eye(m, dtype=np.int64)]
    out = []
    pending_first = None if first is None else [int(v) for v in first]
    while span:
        if pending_first is not None:
            a = pending_first
            pending_first = None
            w = [form(a, v) for v in span]
            x, g = _ext_gcd_combo(w)
            if g == 0:
                raise NotRealizable("class has zero intersection with everything (separating or trivial)")
            if g != 1:
                raise NotRealizable("class is not primitive")
        else:
            a = span[0]
            w = [form(a, v) for v in span]
            x, g = _ext_gcd_combo(w)
            if g != 1:
                raise NotRealizable("intersection form is degenerate")
        b = [sum(xi * v[k] for xi, v in zip(x, span)) for k in range(m)]
        out += [list(a), b]
        proj = []
        for c in span:
            cb, ca = form(c, b), form(c, a)
            proj.append([ci - cb * ai + ca * bi for ci, ai, bi in zip(c, a, b)])
        span = _row_basis(proj)
    return out


@dataclass(frozen=True)
class PeriodChart:
    """Relative homology basis with its periods.

    ``basis`` rows are classes in ``Z^d`` (absolute ``a1, b1, ..., ag, bg``
    first, then relative classes from the base zero); ``chains`` gives each as a
    signed combination of half-edges.
    """

    basis: np.ndarray
    periods: np.ndarray
    genus: int
    base: int
    targets: tuple
    homology: Homology

    @property
    def size(self):
        return len(self.basis)

    @property
    def chains(self):
        out = []
        for row in self.basis:
            out.append({self.homology.basis_edges[i]: int(c) for i, c in enumerate(row) if c})
        return out

    @cached_property
    def inverse(self):
        inv = np.linalg.inv(self.basis.astype(float))
        return inv

    def coordinates(self, cls):
        """Integer coordinates of a class in this basis."""
        x = np.rint(np.asarray(cls, dtype=float) @ self.inverse).astype(np.int64)
        if not np.array_equal(x @ self.basis, np.asarray(cls)):
            raise NotRealizable("class not representable in chart")
        return x

    @cached_property
    def edge_coordinates(self):
        """Chart coordinates of every half-edge (rows indexed by half-edge)."""
        V = self.homology.vec.astype(float)
        return np.rint(V @ self.inverse).astype(np.int64)

    def area(self):
        p = self.periods
        return float(sum(cross(p[2 * i], p[2 * i + 1]) for i in range(self.genus)))

    def symplectic_matrix(self):
        h = self.homology
        A = self.basis[: 2 * self.genus]
        coords = np.array([h.abs_coordinates(a) for a in A]).reshape(len(A), -1)
        return coords @ h.gram @ coords.T


def period_chart(surface: TranslationSurface, distinguished=None, relative=None, base=None) -> PeriodChart:
    """Period coordinates of ``surface``.

    ``distinguished`` is a closed chain (half-edge list or coefficient map) used
    as the first absolute basis element; ``relative`` optionally maps target
    vertex ids to chains from the base vertex; ``base`` defaults to the
    smallest vertex id.
    """
    h = Homology(surface)
    g = h.genus
    if base is None:
        base = 0
    first = None
    if distinguished is not None:
        cls = h.chain_class(distinguished)
        if not np.any(cls):
            raise NotRealizable("distinguished cycle is null-homologous")
        if not h.is_absolute(cls):
            raise NotRealizable("distinguished chain is not closed")
        first = h.abs_coordinates(cls)
    if g > 0:
        sb = symplectic_reduce(h.gram, first)
        absolute = np.array(sb, dtype=np.int64) @ h.cycle_classes
    else:
        absolute = np.zeros((0, h.d), dtype=np.int64)
    targets = [v for v in range(surface.n_vertices) if v != base]
    rel = []
    relative = dict(relative or {})
    for v in targets:
        if v in relative:
            c = h.chain_class(relative[v])
            bd = h.boundary(c)
            expect = np.zeros(surface.n_vertices, dtype=np.int64)
            expect[v] += 1
            expect[base] -= 1
            if not np.array_equal(bd, expect):
                raise NotRealizable(f"relative chain for vertex {v} does not run from the base")
        else:
            c = h.chain_class(h.tree_path(base, v))
        rel.append(c)
    basis = np.vstack([absolute] + [np.array(rel, dtype=np.int64).reshape(-1, h.d)])
    if basis.shape[0] != h.d or round(abs(np.linalg.det(basis.astype(float)))) != 1:
        raise NotRealizable("requested classes do not extend to a basis")
    periods = basis @ surface.hol[h.basis_edges]
    return PeriodChart(basis, periods, g, base, tuple(targets), h)
