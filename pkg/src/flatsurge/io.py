"""Reading and writing surfaces as JSON text."""
from __future__ import annotations

import json
from pathlib import Path

from .errors import InvalidSurface
from .surface import TranslationSurface, build_surface

FORMAT_VERSION = 1


def _num(x):
    return format(float(x), ".17g")


def surface_to_dict(s: TranslationSurface) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "triangles": [[3 * t, 3 * t + 1, 3 * t + 2] for t in range(s.n_triangles)],
        "holonomy": {str(h): [_num(z.real), _num(z.imag)] for h, z in enumerate(s.hol)},
        "gluing": [[h, int(s.opp[h])] for h in range(s.n_half) if h < s.opp[h]],
        "marked_points": sorted(int(v) for v in s.marked),
    }


def surface_from_dict(d: dict) -> TranslationSurface:
    if d.get("format_version") != FORMAT_VERSION:
        raise InvalidSurface(f"unsupported format_version {d.get('format_version')!r}")
    try:
        triangles = [[str(e) for e in tri] for tri in d["triangles"]]
        hol = {str(k): complex(float(v[0]), float(v[1])) for k, v in d["holonomy"].items()}
        gluing = [(str(a), str(b)) for a, b in d["gluing"]]
        marked = [int(v) for v in d.get("marked_points", [])]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InvalidSurface(f"malformed surface file: {exc}") from exc
    missing = {e for tri in triangles for e in tri} - set(hol)
    if missing:
        raise InvalidSurface(f"missing holonomy for edges {sorted(missing)[:5]}")
    return build_surface(triangles, hol, gluing, marked)


def dumps(s: TranslationSurface) -> str:
    return json.dumps(surface_to_dict(s), indent=1)


def loads(text: str) -> TranslationSurface:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSurface(f"not a surface file: {exc}") from exc
    return surface_from_dict(d)


def save(s: TranslationSurface, path) -> None:
    Path(path).write_text(dumps(s), encoding="utf-8")


def load(path) -> TranslationSurface:
    return loads(Path(path).read_text(encoding="utf-8"))
