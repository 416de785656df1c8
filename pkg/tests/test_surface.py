import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import hexagon_pair, samples
from flatsurge import fixtures, io
from flatsurge.errors import (
    BadConeAngle,
    DegenerateTriangle,
    GluingMismatch,
    InvalidSurface,
    NotRealizable,
    TriangleNotClosed,
)
from flatsurge.homology import period_chart
from flatsurge.surface import (
    Mesh,
    TranslationSurface,
    build_surface,
    delaunay_retriangulate,
    isometric,
    normalize_area,
    stratum_of,
)


def square_torus_parts(dx=0.0):
    triangles = [["a", "b", "c"], ["d", "e", "f"]]
    hol = {"a": 1, "b": 1j, "c": -1 - 1j, "d": -1 + dx, "e": -1j, "f": 1 + 1j}
    gluing = [("a", "d"), ("b", "e"), ("c", "f")]
    return triangles, hol, gluing


def standard_symplectic(g):
    J = np.zeros((2 * g, 2 * g), dtype=np.int64)
    for i in range(g):
        J[2 * i, 2 * i + 1] = 1
        J[2 * i + 1, 2 * i] = -1
    return J


class TestBuild:
    def test_square_torus(self):
        t, h, gl = square_torus_parts()
        s = build_surface(t, h, gl, mark_regular=True)
        st_ = stratum_of(s)
        assert s.genus == 1 and st_.kappa == () and st_.marked == 1

    def test_octagon_stratum(self, octagon):
        assert octagon.genus == 2
        assert octagon.stratum().kappa == (2,)
        (zero,) = octagon.zeros()
        assert octagon.cone_angles[zero] == pytest.approx(6 * math.pi, abs=1e-9)

    def test_gluing_mismatch(self):
        t, h, gl = square_torus_parts(dx=0.1)
        with pytest.raises((GluingMismatch, TriangleNotClosed)):
            build_surface(t, h, gl)

    def test_open_triangle(self):
        t, h, gl = square_torus_parts()
        h["c"] = -1 - 1.2j
        with pytest.raises(TriangleNotClosed):
            build_surface(t, h, gl)

    def test_degenerate_triangle(self):
        with pytest.raises((DegenerateTriangle, InvalidSurface)):
            TranslationSurface([1, 1, -2, -1, -1, 2], [3, 4, 5, 0, 1, 2])

    def test_unmarked_regular_point(self):
        t, h, gl = square_torus_parts()
        with pytest.raises(BadConeAngle):
            build_surface(t, h, gl)

    def test_order_sum(self):
        for s in (fixtures.regular_octagon(), fixtures.l_shaped(), hexagon_pair(), *samples((2, 2), 5)):
            assert sum(s.orders) == 2 * s.genus - 2


class TestArea:
    def test_torus(self, torus):
        assert torus.area() == pytest.approx(1.0, abs=1e-15)

    def test_octagon(self):
        s = 0.7
        assert fixtures.regular_octagon(s).area() == pytest.approx((2 + 2 * math.sqrt(2)) * s * s, rel=1e-12)

    def test_normalize_rectangle(self):
        s = normalize_area(fixtures.torus(2.0, 1.0))
        assert s.area() == pytest.approx(1.0, abs=1e-12)
        assert isometric(s, fixtures.torus(math.sqrt(2), 1 / math.sqrt(2)))

    def test_normalize_octagon_side(self):
        s = normalize_area(fixtures.regular_octagon())
        assert np.min(np.abs(s.hol)) == pytest.approx((2 + 2 * math.sqrt(2)) ** -0.5, rel=1e-12)

    def test_normalize_idempotent(self):
        s = normalize_area(fixtures.regular_octagon())
        assert np.array_equal(normalize_area(s).hol, s.hol)

    def test_period_formula(self):
        for s in (fixtures.regular_octagon(), hexagon_pair(), *samples((2, 2), 5)):
            assert period_chart(s).area() == pytest.approx(s.area(), rel=1e-9)


class TestPeriodChart:
    def test_torus(self, torus):
        ch = period_chart(torus)
        assert ch.size == 2
        # the periods generate the integer lattice
        M = np.array([[z.real, z.imag] for z in ch.periods])
        assert np.allclose(M, np.rint(M), atol=1e-12)
        assert abs(np.linalg.det(M)) == pytest.approx(1.0)

    def test_octagon_size(self, octagon):
        assert period_chart(octagon).size == 4

    def test_size_formula(self):
        for s in (hexagon_pair(), *samples((2, 2), 3), *samples((1, 1), 3)):
            assert period_chart(s).size == 2 * s.genus + s.n_vertices - 1

    def test_symplectic(self):
        for s in (fixtures.regular_octagon(), hexagon_pair(), *samples((2, 2, 2), 3)):
            ch = period_chart(s)
            assert np.array_equal(ch.symplectic_matrix(), standard_symplectic(s.genus))

    def test_separating_cycle_rejected(self):
        s = hexagon_pair()
        ones = [h for h in range(s.n_half) if abs(s.hol[h] - 1) < 1e-12 and s.opp[h] // 3 < s.n_triangles // 2
                and h // 3 >= s.n_triangles // 2 or abs(s.hol[h] - 1) < 1e-12 and h // 3 < s.n_triangles // 2
                and s.opp[h] // 3 >= s.n_triangles // 2]
        assert len(ones) == 2
        # the two slit sides run P -> Q; together they bound each torus
        with pytest.raises(NotRealizable):
            period_chart(s, distinguished={ones[0]: 1, ones[1]: -1})


class TestIsometric:
    def test_relabelled(self, octagon):
        T = octagon.n_triangles
        perm = np.random.default_rng(0).permutation(T)
        slot = np.concatenate([[3 * perm[t], 3 * perm[t] + 1, 3 * perm[t] + 2] for t in range(T)])
        hol = np.empty_like(octagon.hol)
        opp = np.empty_like(octagon.opp)
        hol[slot] = octagon.hol
        opp[slot] = slot[octagon.opp]
        assert isometric(octagon, TranslationSurface(hol, opp, octagon.marked))

    def test_different_tori(self, torus):
        assert not isometric(torus, fixtures.torus(2.0, 0.5))

    def test_equivalence_on_fixtures(self):
        fx = [fixtures.square_torus(), fixtures.regular_octagon(), fixtures.l_shaped(), hexagon_pair()]
        for a in fx:
            assert isometric(a, a)
            for b in fx:
                assert bool(isometric(a, b)) == bool(isometric(b, a))

    def test_rotated_is_different(self, octagon):
        assert not isometric(octagon, octagon.rotated(0.1))
        assert isometric(octagon, octagon.rotated(math.pi / 4))


class TestDelaunay:
    def test_obtuse_torus(self):
        s = fixtures.lattice_torus(1, 3 + 1j)
        d = delaunay_retriangulate(s)
        m = Mesh.from_surface(d)
        assert np.all(m.incircle_all() <= 1e-9)
        assert isometric(s, d)

    def test_idempotent(self, octagon):
        d = delaunay_retriangulate(octagon)
        assert np.allclose(np.sort_complex(delaunay_retriangulate(d).hol), np.sort_complex(d.hol))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 60))
    def test_random_flips_preserve_metric(self, seed, n):
        base = fixtures.regular_octagon()
        m = Mesh.from_surface(base)
        rng = np.random.default_rng(seed)
        for _ in range(n):
            e = int(rng.integers(m.n_half))
            if m.flippable(e):
                m.flip(e)
        s = m.to_surface(base.marked)
        assert s.area() == pytest.approx(base.area(), rel=1e-12)
        assert isometric(s, base)

    def test_commutes_with_normalize(self):
        s = fixtures.l_shaped(1.3, 0.6)
        assert isometric(normalize_area(delaunay_retriangulate(s)), delaunay_retriangulate(normalize_area(s)))


class TestFormat:
    def test_round_trip_exact(self):
        for s in (fixtures.regular_octagon(), *samples((2, 2), 10), *samples((1, 1), 10)):
            t = io.loads(io.dumps(s))
            assert np.array_equal(t.hol, s.hol)
            assert np.array_equal(t.opp, s.opp)
            assert t.marked == s.marked

    def test_marked_points_survive(self, torus):
        t = io.loads(io.dumps(torus))
        assert t.stratum().marked == 1

    def test_rejects_bad_version(self, octagon):
        d = io.surface_to_dict(octagon)
        d["format_version"] = 2
        with pytest.raises(InvalidSurface):
            io.surface_from_dict(d)

    def test_rejects_garbage(self):
        with pytest.raises(InvalidSurface):
            io.loads("{not json")
