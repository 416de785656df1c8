"""Standard surfaces built from polygons with side identifications."""
from __future__ import annotations

import math

import numpy as np

from .errors import InvalidSurface
from .surface import TranslationSurface, _ear_clip, cross


def from_polygons(polygons, pairs, mark_regular=True):
    """Glue polygons given by counter-clockwise side vectors.

    ``pairs`` is a list of ``((i, j), (k, l))`` meaning side ``j`` of polygon ``i``
    is glued to side ``l`` of polygon ``k``; glued sides must be opposite vectors.
    Vertices of angle 2pi become marked points when ``mark_regular`` is set.
    """
    hol = []
    opp = []
    side_slot = {}
    for pi_, sides in enumerate(polygons):
        sides = [complex(s) for s in sides]
        if abs(sum(sides)) > 1e-9 * max(abs(s) for s in sides):
            raise InvalidSurface(f"polygon {pi_} does not close")
        pts = np.concatenate([[0], np.cumsum(sides)[:-1]])
        n = len(sides)
        diag_slot = {}
        for tri in _ear_clip(list(pts)):
            base = len(hol)
            for k in range(3):
                i, j = tri[k], tri[(k + 1) % 3]
                hol.append(pts[j] - pts[i])
                opp.append(-1)
                if j == (i + 1) % n:
                    side_slot[(pi_, i)] = base + k
                else:
                    key = (min(i, j), max(i, j))
                    if key in diag_slot:
                        o = diag_slot.pop(key)
                        opp[o] = base + k
                        opp[base + k] = o
                    else:
                        diag_slot[key] = base + k
        if diag_slot:
            raise InvalidSurface("triangulation of polygon left unmatched diagonals")
    for (a, b) in pairs:
        sa, sb = side_slot[tuple(a)], side_slot[tuple(b)]
        opp[sa], opp[sb] = sb, sa
    if any(o < 0 for o in opp):
        raise InvalidSurface("some polygon sides are not glued")
    tmp = TranslationSurface(hol, opp, validate=False)
    marked = [i for i, o in enumerate(tmp.orders) if o == 0] if mark_regular else []
    return TranslationSurface(hol, opp, marked)


def torus(w=1.0, h=1.0, shear=0.0):
    """Flat torus from the parallelogram spanned by ``w`` and ``shear + i h``."""
    a, b = complex(w), complex(shear, h)
    return from_polygons([[a, b, -a, -b]], [((0, 0), (0, 2)), ((0, 1), (0, 3))])


def square_torus():
    return torus(1.0, 1.0)


def lattice_torus(u, v):
    """Torus C / (Z u + Z v) for a positively oriented basis."""
    u, v = complex(u), complex(v)
    if cross(u, v) <= 0:
        raise InvalidSurface("basis must be positively oriented")
    return from_polygons([[u, v, -u, -v]], [((0, 0), (0, 2)), ((0, 1), (0, 3))])


def regular_octagon(side=1.0):
    """Regular octagon with opposite sides identified: genus 2, one zero of order 2."""
    sides = [side * np.exp(1j * k * math.pi / 4) for k in range(8)]
    return from_polygons([sides], [((0, k), (0, k + 4)) for k in range(4)])


def regular_polygon_surface(n_sides, side=1.0):
    """Regular 2m-gon with opposite sides glued."""
    if n_sides % 2 or n_sides < 4:
        raise InvalidSurface("need an even number of sides")
    m = n_sides // 2
    sides = [side * np.exp(2j * k * math.pi / n_sides) for k in range(n_sides)]
    return from_polygons([sides], [((0, k), (0, k + m)) for k in range(m)])


def l_shaped(a=1.0, b=1.0):
    """L-shaped table made of three unit-ish squares: genus 2, stratum (2)."""
    # vertices: (0,0) (1+a,0) (1+a,1) (1,1) (1,1+b) (0,1+b)
    sides = [1, a, 1j, -a, 1j * b, -1, -1j * b, -1j]
    # bottom edges glued to top edges, vertical to vertical
    pairs = [((0, 0), (0, 5)), ((0, 1), (0, 3)), ((0, 2), (0, 7)), ((0, 4), (0, 6))]
    return from_polygons([sides], pairs)
