import math

import numpy as np
import pytest

from conftest import hexagon_pair, samples
from flatsurge import fixtures
from flatsurge.errors import (
    BadAngleSplit,
    Degeneration,
    FlipLimit,
    HasCylinder,
    LengthMismatch,
    LociIntersect,
    MultiplicityAboveOne,
    NotPermissible,
    RayObstructed,
    WrongOrder,
)
from flatsurge.geodesy import enumerate_saddle_connections, multiplicity, side_angles
from flatsurge.surface import isometric, normalize_area
from flatsurge.surgery import (
    collapse_closed,
    collapse_open_connection,
    collapse_pipeline,
    detect_exception,
    flow,
    move_zero,
    open_zero,
    pinch,
    restore,
    restore_pipeline,
    reverse_connection,
    unpinch,
)

EXCEPTIONAL = (Degeneration, FlipLimit)


def openable(s, max_length):
    conns = enumerate_saddle_connections(s, max_length)
    out = [c for c in conns if c.closed and s.orders[c.start_vertex] == 2
           and side_angles(s, c) == (3, 3) and multiplicity(conns, c.holonomy) == 1]
    return sorted(out, key=lambda c: c.length), conns


@pytest.fixture(scope="module")
def opened_octagon():
    s = fixtures.regular_octagon()
    side = enumerate_saddle_connections(s, 1.05)[0]
    return s, side, open_zero(s, side)


class TestOpen:
    def test_octagon_strata_and_lengths(self, opened_octagon):
        s, side, (out, g1, g2, cert) = opened_octagon
        assert out.stratum().kappa == (1, 1) and out.genus == 2
        assert out.area() == pytest.approx(s.area(), abs=1e-12)
        assert g1.length == pytest.approx(1.0, abs=1e-9)
        assert g2.length == pytest.approx(2.0, abs=1e-9)
        assert cert.kind == "open" and cert.output_stratum == str(out.stratum())

    def test_lengths_found_by_enumeration(self, opened_octagon):
        _, side, (out, g1, g2, _) = opened_octagon
        conns = enumerate_saddle_connections(out, 2.05)
        between = [c for c in conns if not c.closed]
        assert any(abs(abs(c.holonomy) - 1.0) < 1e-9 and abs(abs(cross_sign(c.holonomy, side.holonomy))) < 1e-9
                   for c in between)
        assert any(abs(abs(c.holonomy) - 2.0) < 1e-9 for c in between)

    def test_collapse_inverts(self, opened_octagon):
        s, _, (out, g1, _, _) = opened_octagon
        back = collapse_open_connection(out, reverse_connection(g1), 1, 1)
        assert back.stratum().kappa == (2,)
        assert isometric(back, s)

    def test_has_cylinder(self):
        s = fixtures.l_shaped()
        c = next(c for c in enumerate_saddle_connections(s, 1.01) if 1 in side_angles(s, c))
        with pytest.raises(HasCylinder):
            open_zero(s, c)

    def test_multiplicity(self):
        s = fixtures.l_shaped()
        c = next(c for c in enumerate_saddle_connections(s, 1.01) if side_angles(s, c) == (3, 3))
        with pytest.raises(MultiplicityAboveOne):
            open_zero(s, c)

    def test_wrong_order(self):
        s = hexagon_pair()
        closed = next(c for c in enumerate_saddle_connections(s, 2.5) if c.closed)
        with pytest.raises(WrongOrder):
            open_zero(s, closed)
        open_ = next(c for c in enumerate_saddle_connections(s, 1.01) if not c.closed)
        with pytest.raises(WrongOrder):
            open_zero(s, open_)


def cross_sign(a, b):
    return a.real * b.imag - a.imag * b.real


class TestCollapse:
    def open_connection(self):
        for s in samples((2, 2), 10):
            c = next((c for c in enumerate_saddle_connections(s, 0.6) if not c.closed), None)
            if c is not None:
                return s, c
        raise AssertionError("no open connection found")

    def test_bad_split(self):
        s, c = self.open_connection()
        with pytest.raises(BadAngleSplit):
            collapse_open_connection(s, c, 1, 1)

    def test_split_one_two(self):
        s, c = self.open_connection()
        out = collapse_open_connection(s, c, 1, 2)
        assert out.stratum().kappa == (3, 1)
        assert out.genus == s.genus
        assert out.area() == pytest.approx(1.0, abs=1e-12)

    def test_homologous_slit_obstructed(self):
        # the parallel twin slit blocks the extension ray
        s = hexagon_pair()
        c = next(c for c in enumerate_saddle_connections(s, 1.01) if not c.closed)
        with pytest.raises(NotPermissible):
            collapse_open_connection(s, c, 1, 1)

    def test_simple_zeros_merge(self):
        for s in samples((1, 1), 10):
            c = min((c for c in enumerate_saddle_connections(s, 1.0) if not c.closed), key=lambda c: c.length)
            out = collapse_open_connection(s, c, 1, 1)
            assert out.stratum().kappa == (2,)
            assert out.area() == pytest.approx(1.0, abs=1e-12)


class TestMove:
    def test_zero_time_is_identity(self, opened_octagon):
        _, _, (out, g1, g2, _) = opened_octagon
        moved, s1, s2, _ = move_zero(out, g1, g2, t_end=0.0)
        assert isometric(moved, out)

    def test_octagon_endpoint(self, opened_octagon):
        s, side, (out, g1, g2, _) = opened_octagon
        moved, s1, s2, cert = move_zero(out, g1, g2)
        assert s1.length == pytest.approx(1.0, abs=1e-9)
        assert s2.length == pytest.approx(1.0, abs=1e-9)
        assert abs(s1.holonomy + s2.holonomy) < 1e-9
        assert moved.stratum().kappa == (1, 1)
        assert max(abs(a - s.area()) for a in cert.areas) <= 1e-8

    def test_class_shift_linear(self, opened_octagon):
        _, _, (out, g1, g2, _) = opened_octagon
        for t in (0.25, 0.5, 0.75):
            moved, s1, s2, _ = move_zero(out, g1, g2, t_end=t)
            total = s1.holonomy + s2.holonomy
            assert abs(total - (1 - t) * (g1.holonomy + g2.holonomy)) < 1e-12 * 10

    def test_flow_without_velocity(self, octagon):
        m, _, areas = flow(octagon, np.zeros(octagon.n_half, dtype=complex))
        assert np.allclose(m.hol, octagon.hol)


@pytest.fixture(scope="module")
def moved(opened_octagon):
    _, _, (out, g1, g2, _) = opened_octagon
    return move_zero(out, g1, g2)


class TestPinch:
    def test_genus_drop(self, moved):
        surf, s1, s2, _ = moved
        out, pp, pm, cert = pinch(surf, s1, s2)
        st_ = out.stratum()
        assert out.genus == 1 and st_.kappa == () and st_.marked == 2
        assert {pp, pm} == set(out.marked)
        assert out.area() == pytest.approx(surf.area(), abs=1e-12)

    def test_unpinch_inverts(self, moved):
        surf, s1, s2, _ = moved
        out, pp, pm, cert = pinch(surf, s1, s2)
        back, _ = unpinch(out, pp, pm, cert.kappa)
        assert isometric(back, surf)

    def test_length_mismatch(self, opened_octagon):
        _, _, (out, g1, g2, _) = opened_octagon
        with pytest.raises(LengthMismatch):
            pinch(out, g1, g2)


class TestUnpinch:
    def two_point_torus(self):
        sides = [np.exp(1j * k * math.pi / 3) for k in range(6)]
        return fixtures.from_polygons([sides], [((0, 0), (0, 3)), ((0, 1), (0, 4)), ((0, 2), (0, 5))])

    def test_generic(self):
        t = self.two_point_torus()
        assert t.genus == 1 and len(t.marked) == 2
        pp, pm = sorted(t.marked)
        out, cert = unpinch(t, pp, pm, 0.3 * np.exp(0.2j))
        assert out.genus == 2 and out.stratum().kappa == (1, 1) and not out.marked

    def test_obstructed(self):
        t = self.two_point_torus()
        pp, pm = sorted(t.marked)
        with pytest.raises(RayObstructed):
            unpinch(t, pp, pm, 1.5 + 0j)

    def test_window(self):
        t = self.two_point_torus()
        pp, pm = sorted(t.marked)
        with pytest.raises(RayObstructed):
            unpinch(t, pp, pm, 0.3 + 0j, window=(0.4, 0.5))


def round_trip(s, sc, conns):
    out, g1, g2, _ = open_zero(s, sc, conns)
    back = collapse_open_connection(out, reverse_connection(g1), 1, 1)
    assert isometric(back, s, 1e-9)
    pinched, rec = collapse_closed(s, sc, conns)
    g = s.genus
    st_ = pinched.stratum()
    assert pinched.genus == g - 1 and st_.kappa == (2,) * (g - 2) and st_.marked == 2
    for cert in rec.certificates:
        if cert.areas:
            assert max(abs(a - 1.0) for a in cert.areas) <= 1e-8
    assert isometric(restore(pinched, rec), s, 1e-9)


@pytest.mark.parametrize("g", [3, 4])
def test_round_trips_on_samples(g):
    done = exceptional = 0
    for s in samples((2,) * (g - 1), 12, seed=5):
        cands, conns = openable(s, 1.5 / math.sqrt(g))
        if not cands:
            continue
        try:
            round_trip(s, cands[0], conns)
            done += 1
        except EXCEPTIONAL:
            exceptional += 1
    assert done >= 6


class TestPipeline:
    def test_single_matches_composition(self):
        for s in samples((2, 2), 10, seed=5):
            cands, conns = openable(s, 1.0)
            if not cands:
                continue
            try:
                a = collapse_pipeline(s, [cands[0]])[0]
                b = collapse_closed(s, cands[0], conns)[0]
            except EXCEPTIONAL:
                continue
            assert isometric(a, b)
            return
        pytest.fail("no usable sample")

    def test_shared_zero(self):
        for s in samples((2, 2, 2), 20, seed=5):
            cands, _ = openable(s, 1.2)
            for i, a in enumerate(cands):
                for b in cands[i + 1:]:
                    if a.start_vertex == b.start_vertex:
                        with pytest.raises(LociIntersect):
                            collapse_pipeline(s, [a, b])
                        return
        pytest.fail("no pair sharing a zero")

    def test_two_connection_round_trips(self):
        done = 0
        for s in samples((2, 2, 2), 25, seed=8):
            cands, _ = openable(s, 1.2)
            pair = next(((a, b) for a in cands for b in cands
                         if a.start_vertex < b.start_vertex), None)
            if pair is None:
                continue
            try:
                out, labels, kappas, recs = collapse_pipeline(s, pair)
            except (LociIntersect, *EXCEPTIONAL):
                continue
            assert out.genus == s.genus - 2 and out.stratum().marked == 4
            assert len(kappas) == 2 and labels == [pair[0].start_vertex, pair[1].start_vertex]
            try:
                back = restore_pipeline(out, recs)
            except EXCEPTIONAL:
                continue
            assert isometric(back, s, 1e-9)
            done += 1
        assert done >= 3


class TestDetectException:
    def test_type2(self):
        for s in samples((2, 2), 10):
            closed = [c for c in enumerate_saddle_connections(s, 1.0, closed_only=True)]
            by_zero = {}
            for c in closed:
                by_zero.setdefault(c.start_vertex, []).append(c)
            two = [v for v in by_zero.values() if len(v) >= 2]
            if two:
                B = max(c.length for c in two[0][:2]) * 1.0001
                assert detect_exception(s, (0, B / 2)) == "type2"
                return
        pytest.fail("no sample with two closed connections at one zero")

    def test_none(self):
        for s in samples((2, 2), 10):
            closed = enumerate_saddle_connections(s, 2.0, closed_only=True)
            if len(closed) >= 2 and closed[1].length > closed[0].length * 1.01:
                B = (closed[0].length + closed[1].length) / 2
                assert detect_exception(s, (0, B / 2)) == "none"
                return
        pytest.fail("no sample with a single shortest closed connection")

    def test_empty_window(self, octagon):
        assert detect_exception(normalize_area(octagon), (0, 0.1)) == "none"
