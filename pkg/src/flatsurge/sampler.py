"""Random unit-area surfaces in a stratum.

Starting surfaces come from suspensions of interval exchange permutations;
they are then moved by a Metropolis-Hastings random walk in period coordinates
whose invariant law, after radial projection to area one, is the Masur-Veech
measure on the unit hypersurface.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import FlipLimit, RejectionBudget, UnknownStratum
from .fixtures import from_polygons
from .homology import Homology
from .surface import TWO_PI, Mesh, TranslationSurface, angle_between, normalize_area


# ----------------------------------------------------------------------
# permutations and suspensions


def is_irreducible(bottom) -> bool:
    """Top row is the identity; irreducible if no proper prefix is invariant."""
    seen_max = -1
    for k, b in enumerate(bottom[:-1]):
        seen_max = max(seen_max, b)
        if seen_max == k:
            return False
    return True


def canonical_heights(bottom):
    """Heights ``tau_a = pos_bottom(a) - pos_top(a)``; admissible for irreducible permutations."""
    n = len(bottom)
    pos_b = np.empty(n, dtype=float)
    pos_b[list(bottom)] = np.arange(n)
    return pos_b - np.arange(n)


def admissible(bottom, tau) -> bool:
    top_sums = np.cumsum(tau)[:-1]
    bot_sums = np.cumsum(np.asarray(tau)[list(bottom)])[:-1]
    return bool(np.all(top_sums > 0) and np.all(bot_sums < 0))


def _polygon(bottom, zeta):
    """Counter-clockwise side vectors and gluing pairs of the suspension polygon."""
    n = len(bottom)
    sides = [zeta[b] for b in bottom] + [-zeta[a] for a in reversed(range(n))]
    pairs = []
    for j, b in enumerate(bottom):
        # top side of letter b sits at reversed position n + (n - 1 - b)
        pairs.append(((0, j), (0, 2 * n - 1 - b)))
    return sides, pairs


def vertex_profile(bottom, zeta=None):
    """Orders of the vertex classes of the suspension surface (including order 0)."""
    n = len(bottom)
    if zeta is None:
        zeta = np.ones(n) + 1j * canonical_heights(bottom)
    sides, _ = _polygon(bottom, zeta)
    # polygon vertices: B_0..B_n then T_{n-1}..T_1 ; index them 0..2n-1
    parent = list(range(2 * n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    def top_vertex(k):
        if k == 0:
            return 0
        if k == n:
            return n
        return 2 * n - k

    for j, b in enumerate(bottom):
        union(top_vertex(b), j)
        union(top_vertex(b + 1), j + 1)
    m = len(sides)
    angle = np.zeros(2 * n)
    for k in range(m):
        s_in = sides[k - 1]
        s_out = sides[k]
        angle[find(k)] += angle_between(s_out, -s_in)
    roots = sorted({find(k) for k in range(m)})
    return sorted((int(round(angle[r] / TWO_PI)) - 1 for r in roots), reverse=True)


def suspension_surface(bottom, lengths, heights) -> TranslationSurface:
    zeta = np.asarray(lengths, dtype=float) + 1j * np.asarray(heights, dtype=float)
    sides, pairs = _polygon(bottom, zeta)
    return from_polygons([sides], pairs, mark_regular=False)


def parse_stratum(text) -> tuple:
    """Parse ``"2,2,2"``, ``"2^5"`` or ``"2^3,1^2"`` into a sorted tuple of orders."""
    if isinstance(text, (tuple, list)):
        return tuple(sorted((int(k) for k in text), reverse=True))
    out = []
    for part in str(text).replace(" ", "").strip("()").split(","):
        if not part:
            continue
        m = re.fullmatch(r"(\d+)(?:\^(\d+))?", part)
        if not m:
            raise UnknownStratum(f"cannot parse stratum {text!r}")
        out += [int(m.group(1))] * int(m.group(2) or 1)
    return tuple(sorted(out, reverse=True))


def stratum_genus(kappa) -> int:
    s = sum(kappa)
    if s % 2:
        raise UnknownStratum(f"orders {kappa} have odd sum")
    return s // 2 + 1


@lru_cache(maxsize=None)
def find_permutation(kappa: tuple, seed: int = 0, max_iter: int = 1_000_000):
    """Irreducible permutation whose suspensions lie in the stratum ``kappa``.

    Found by a seeded local search over bottom rows; the result is verified by
    computing the vertex profile of a suspension.
    """
    kappa = tuple(sorted(kappa, reverse=True))
    if not kappa or any(k <= 0 for k in kappa):
        raise UnknownStratum(f"stratum {kappa} not supported")
    g = stratum_genus(kappa)
    n = 2 * g + len(kappa) - 1
    if n < 2:
        raise UnknownStratum(f"stratum {kappa} not supported")
    target = list(kappa)
    rng = np.random.default_rng(seed)

    def cost(bottom):
        prof = vertex_profile(bottom)
        a = prof + [0] * max(0, len(target) - len(prof))
        b = target + [0] * max(0, len(prof) - len(target))
        return sum(abs(x - y) for x, y in zip(a, b)) + abs(len(prof) - len(target))

    def random_irreducible():
        while True:
            b = list(rng.permutation(n))
            if is_irreducible(b):
                return b

    bottom = random_irreducible()
    c = cost(bottom)
    temp = 2.0
    for _ in range(max_iter):
        if c == 0:
            return tuple(int(x) for x in bottom)
        cand = list(bottom)
        i, j = sorted(int(x) for x in rng.choice(n, size=2, replace=False))
        r = rng.random()
        # transpositions, block reversals and single-letter moves
        if r < 0.5:
            cand[i], cand[j] = cand[j], cand[i]
        elif r < 0.8:
            cand[i:j + 1] = cand[i:j + 1][::-1]
        else:
            cand.insert(j, cand.pop(i))
        if not is_irreducible(cand):
            continue
        cc = cost(cand)
        if cc <= c or rng.random() < math.exp(-(cc - c) / temp):
            bottom, c = cand, cc
        temp = max(0.1, temp * 0.9995)
    raise UnknownStratum(f"no permutation found for stratum {kappa}")


class StratumTable:
    """Representative permutations per stratum, verified on construction."""

    def __init__(self):
        self._table = {}

    def __contains__(self, kappa):
        try:
            self[kappa]
        except UnknownStratum:
            return False
        return True

    def __getitem__(self, kappa):
        kappa = parse_stratum(kappa)
        if kappa not in self._table:
            perm = find_permutation(kappa)
            s = suspension_surface(perm, np.ones(len(perm)), canonical_heights(perm))
            if s.stratum().kappa != kappa or s.stratum().marked:
                raise UnknownStratum(f"permutation search for {kappa} failed verification")
            self._table[kappa] = perm
        return self._table[kappa]

    def items(self):
        return self._table.items()


TABLE = StratumTable()


def random_suspension(kappa, rng) -> TranslationSurface:
    """Suspension surface with exponential lengths and jittered admissible heights."""
    perm = TABLE[kappa]
    n = len(perm)
    base = canonical_heights(perm)
    for _ in range(10_000):
        lengths = rng.exponential(size=n)
        heights = base * rng.uniform(0.5, 1.5) + rng.normal(scale=0.2, size=n)
        if admissible(perm, heights):
            return normalize_area(suspension_surface(perm, lengths, heights))
    raise RejectionBudget("could not draw admissible suspension heights")


# ----------------------------------------------------------------------
# Metropolis-Hastings walk in period coordinates


@dataclass
class ChainConfig:
    step: float = 0.25  # proposal scale relative to edge lengths
    area_stiffness: float = 50.0
    burn_in: int | None = None  # default max(400, 4 d^2), d the chart dimension
    thin: int | None = None  # default max(40, 4 d)
    max_rejections: int = 10_000

    def schedule(self, d: int):
        """Burn-in and thinning for a chart of dimension ``d``.

        Equilibration slows roughly quadratically in ``d``: at genus 12 the
        short-loop counts still drift upward after 2000 steps.
        """
        burn = self.burn_in if self.burn_in is not None else max(400, 4 * d * d)
        thin = self.thin if self.thin is not None else max(40, 4 * d)
        return burn, thin


class PeriodWalk:
    """Random walk whose stationary law projects to Masur-Veech measure.

    The state is a Delaunay triangulation with edge classes tracked in a fixed
    integral basis of relative homology.  Proposals are complex Gaussians in
    period coordinates, shaped by the current edge lengths; acceptance uses the
    exact proposal densities in both directions.
    """

    def __init__(self, surface: TranslationSurface, rng, config: ChainConfig | None = None):
        self.cfg = config or ChainConfig()
        self.rng = rng
        self.marked = set(surface.marked)
        mesh = Mesh.from_surface(surface)
        mesh.make_delaunay()
        self._rechart(mesh)
        self._refresh()
        self.accepted = 0
        self.proposed = 0

    def _rechart(self, mesh):
        """Fresh integral basis for the current triangulation (keeps coefficients small)."""
        s = mesh.to_surface(self.marked, validate=False)
        hom = Homology(s)
        self.d = hom.d
        mesh.carry = {"cls": hom.vec.astype(np.float64)}
        self.zeta = s.hol[hom.basis_edges].copy()
        mesh.hol = mesh.carry["cls"] @ self.zeta
        self.mesh = mesh

    def _refresh(self):
        m = self.mesh
        self.area = _mesh_area(m.hol)
        self.logdet, self.chol, self.edges = _gram(m)

    def _log_target(self, area):
        return -self.d * math.log(area) - self.cfg.area_stiffness * (area - 1.0) ** 2

    def step(self) -> bool:
        cfg = self.cfg
        sigma = cfg.step
        self.proposed += 1
        d = self.d
        z = self.rng.standard_normal(d) + 1j * self.rng.standard_normal(d)
        v = sigma * _solve_upper(self.chol, z)
        q_fwd = sigma * sigma * float(np.vdot(z, z).real)
        m = self.mesh
        C = m.carry["cls"]
        disp = C @ v
        hol_new = m.hol + disp
        if np.min(_tri_cross(hol_new)) <= 0:
            return False
        m2 = Mesh(hol_new, m.opp.copy(), m.vlab.copy(), {"cls": C.copy(), "x": m.hol.copy(), "disp": disp})
        try:
            m2.make_delaunay(max_flips=10_000)
        except FlipLimit:
            return False
        if np.min(_tri_cross(m2.carry["x"])) <= 0:
            return False
        area_new = _mesh_area(m2.hol)
        logdet_new, chol_new, edges_new = _gram(m2)
        w = 1.0 / np.abs(m2.hol[edges_new]) ** 2
        q_bwd = float(np.sum(w * np.abs(m2.carry["disp"][edges_new]) ** 2))
        log_alpha = (
            self._log_target(area_new) - self._log_target(self.area)
            + logdet_new - self.logdet
            - (q_bwd - q_fwd) / (2 * sigma * sigma)
        )
        if log_alpha >= 0 or self.rng.random() < math.exp(log_alpha):
            self.zeta = self.zeta + v
            m2.carry = {"cls": m2.carry["cls"]}
            m2.hol = m2.carry["cls"] @ self.zeta
            self.mesh = m2
            self.area = area_new
            self.logdet, self.chol, self.edges = logdet_new, chol_new, edges_new
            if np.abs(m2.carry["cls"]).max() > 64:
                self._rechart(m2)
                self._refresh()
            self.accepted += 1
            return True
        return False

    def advance(self, n_steps: int):
        streak = 0
        for _ in range(n_steps):
            if self.step():
                streak = 0
            else:
                streak += 1
                if streak >= self.cfg.max_rejections:
                    raise RejectionBudget(f"{streak} consecutive rejections")

    def surface(self) -> TranslationSurface:
        return normalize_area(self.mesh.to_surface(self.marked))

    @property
    def acceptance(self):
        return self.accepted / max(1, self.proposed)


def _tri_cross(hol):
    h = hol.reshape(-1, 3)
    return h[:, 0].real * h[:, 1].imag - h[:, 0].imag * h[:, 1].real


def _mesh_area(hol):
    return 0.5 * float(np.sum(_tri_cross(hol)))


def _gram(m: Mesh):
    n = len(m.hol)
    idx = np.arange(n)
    edges = idx[idx < m.opp]
    C = m.carry["cls"][edges]
    w = 1.0 / np.abs(m.hol[edges]) ** 2
    G = (C * w[:, None]).T @ C
    L = np.linalg.cholesky(G)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return logdet, L, edges


def _solve_upper(L, z):
    """Solve ``L^T x = z`` for lower-triangular ``L``."""
    from scipy.linalg import solve_triangular

    return solve_triangular(L, z, trans="T", lower=True)


# ----------------------------------------------------------------------
# public sampling API


def _rng(seed, *key):
    ss = np.random.SeedSequence(int(seed) % (1 << 64), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def sample_surface(kappa, seed, config: ChainConfig | None = None) -> TranslationSurface:
    """One unit-area surface in the stratum ``kappa``, deterministic in ``seed``."""
    kappa = parse_stratum(kappa)
    cfg = config or ChainConfig()
    rng = _rng(seed)
    walk = PeriodWalk(random_suspension(kappa, rng), rng, cfg)
    walk.advance(cfg.schedule(walk.d)[0])
    return walk.surface()


def sample_batch(kappa, count, seed, config: ChainConfig | None = None, chain=0):
    """``count`` surfaces from one chain (burn-in then thinning)."""
    kappa = parse_stratum(kappa)
    cfg = config or ChainConfig()
    rng = _rng(seed, chain)
    walk = PeriodWalk(random_suspension(kappa, rng), rng, cfg)
    burn, thin = cfg.schedule(walk.d)
    walk.advance(burn)
    out = []
    for _ in range(count):
        walk.advance(thin)
        out.append(walk.surface())
    return out, walk.acceptance


def mv_volume_leading(kappa) -> float:
    """Large-genus leading value ``4 / prod(k_i + 1)`` of the stratum volume."""
    kappa = parse_stratum(kappa)
    return 4.0 / math.prod(k + 1 for k in kappa)


def volume_ratio_K(g: int, K: int) -> float:
    """Leading-order ratio vol H_{g-K}(2^{g-1-K}) / vol H_g(2^{g-1})."""
    if K < 0 or (K > 0 and g <= K):
        raise ValueError("need g > K >= 0")
    if K == 0:
        return 1.0
    return mv_volume_leading((2,) * (g - 1 - K)) / mv_volume_leading((2,) * (g - 1))
