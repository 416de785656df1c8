"""Counting statistics: factorial moments, Poisson comparison and the limiting means."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats as sps

from .errors import InsufficientSamples


class Estimate(NamedTuple):
    value: float
    se: float

    def within(self, target, n_se=3.0):
        return abs(self.value - target) <= n_se * self.se


# ----------------------------------------------------------------------
# limiting means


def _check_window(a, b):
    if not (0 <= a <= b):
        raise ValueError(f"need 0 <= a <= b, got ({a}, {b})")


def lambda_closed(a, b):
    """Limiting mean of closed counts in the window ``[a, b]`` (rescaled by sqrt(g))."""
    _check_window(a, b)
    return 3 * math.pi * (b * b - a * a)


def lambda_open(a, b):
    """Limiting mean of open counts in the window ``[a, b]`` (rescaled by g)."""
    _check_window(a, b)
    return 8 * math.pi * (b * b - a * a)


def lambda_closed_general(m, b1, b2, a, b):
    """Limiting mean for closed loops at a zero of order ``m`` split as ``(b1, b2)``."""
    if b1 < 1 or b2 < 1 or b1 + b2 != m:
        raise ValueError(f"angle split ({b1}, {b2}) does not add up to {m}")
    _check_window(a, b)
    return (m + 1) * math.pi * (b * b - a * a) / (b1 * b2)


# ----------------------------------------------------------------------
# moments


def falling_factorial(x, k):
    x = np.asarray(x, dtype=np.float64)
    out = np.ones_like(x)
    for j in range(k):
        out = out * (x - j)
    return out


def jackknife_mean(values) -> Estimate:
    """Mean with its leave-one-out jackknife standard error."""
    v = np.asarray(values, dtype=np.float64)
    n = len(v)
    if n == 0:
        raise InsufficientSamples("no samples")
    mean = float(v.mean())
    if n == 1:
        return Estimate(mean, math.nan)
    loo = (v.sum() - v) / (n - 1)
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return Estimate(mean, se)


def factorial_moment(counts, k) -> Estimate:
    """Sample mean of ``X (X-1) ... (X-k+1)`` with jackknife standard error."""
    if k < 1:
        raise ValueError("order must be at least 1")
    return jackknife_mean(falling_factorial(counts, k))


def joint_factorial_moment(counts, orders) -> Estimate:
    """Mixed factorial moment of a count matrix (one column per window)."""
    c = np.asarray(counts)
    if c.ndim != 2 or c.shape[1] != len(orders):
        raise ValueError("need one column per order")
    prod = np.ones(c.shape[0])
    for j, k in enumerate(orders):
        prod = prod * falling_factorial(c[:, j], k)
    return jackknife_mean(prod)


def poisson_tv(counts, lam) -> float:
    """Total variation between the empirical pmf and Poisson(lam).

    The Poisson tail beyond the largest observed count forms one extra
    bucket, where the empirical mass is zero.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    c = np.asarray(counts, dtype=np.int64)
    if len(c) == 0:
        raise InsufficientSamples("no samples")
    top = int(c.max())
    emp = np.bincount(c, minlength=top + 1) / len(c)
    ref = sps.poisson.pmf(np.arange(top + 1), lam)
    tail = sps.poisson.sf(top, lam)
    return float(min(1.0, 0.5 * (np.abs(emp - ref).sum() + tail)))


# ----------------------------------------------------------------------
# Siegel-Veech constants


@dataclass(frozen=True)
class Annulus:
    """Indicator of ``a <= |v| <= b``; callable on complex holonomies."""

    a: float
    b: float

    def __call__(self, v):
        r = abs(v)
        return 1.0 if self.a <= r <= self.b else 0.0

    @property
    def radius(self):
        return self.b

    @property
    def integral(self):
        return math.pi * (self.b ** 2 - self.a ** 2)


def estimate_sv_constant(samples, configuration, f_window, connections=None) -> Estimate:
    """Average Siegel-Veech transform divided by the plane integral of ``f_window``."""
    from .geodesy import siegel_veech_transform

    integral = float(f_window.integral)
    if integral == 0:
        raise ValueError("window has zero integral")
    vals = []
    for i, s in enumerate(samples):
        conns = None if connections is None else connections[i]
        vals.append(siegel_veech_transform(s, configuration, f_window, f_window.radius, conns))
    est = jackknife_mean(vals)
    return Estimate(est.value / integral, est.se / integral)


def decay_exponent(genera, values):
    """Slope of ``log(value)`` against ``log(g)`` by least squares."""
    x = np.log(np.asarray(genera, dtype=np.float64))
    y = np.log(np.asarray(values, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])


# ----------------------------------------------------------------------
# experiment records


@dataclass
class CountSample:
    genus: int
    stratum: tuple
    windows: list
    counts: np.ndarray  # shape (n_samples, n_windows)
    seeds: list = field(default_factory=list)
    filter: str | None = None
    excluded: int = 0

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64).reshape(len(self.counts), len(self.windows))
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        w = sorted(tuple(x) for x in self.windows)
        for (a1, b1), (a2, b2) in zip(w, w[1:]):
            if a2 < b1:
                raise ValueError("windows must be disjoint")

    @property
    def size(self):
        return self.counts.shape[0]


@dataclass
class PoissonVerdict:
    lam: float
    mean: float
    variance: float
    moments: list  # Estimate per order 1..k_max
    tv: float
    n: int

    def to_dict(self):
        d = asdict(self)
        d["moments"] = [{"order": k + 1, "value": m.value, "se": m.se, "target": self.lam ** (k + 1)}
                        for k, m in enumerate(self.moments)]
        return d


def poisson_verdict(counts, lam, k_max=3) -> PoissonVerdict:
    c = np.asarray(counts, dtype=np.int64)
    if len(c) < 2:
        raise InsufficientSamples("need at least two samples")
    return PoissonVerdict(
        lam=float(lam),
        mean=float(c.mean()),
        variance=float(c.var(ddof=1)),
        moments=[factorial_moment(c, k) for k in range(1, k_max + 1)],
        tv=poisson_tv(c, lam) if lam > 0 else float(np.mean(c != 0)),
        n=int(len(c)),
    )


@dataclass
class ReportRow:
    genus: int
    orders: tuple
    moment: Estimate
    target: float
    resolved: bool  # standard error smaller than the target itself


@dataclass
class ExperimentReport:
    windows: list
    lambdas: list
    rows: list
    tv: dict  # genus -> list of TV distances per window
    exceptions: dict  # genus -> fraction of excluded samples

    def to_dict(self):
        return {
            "windows": [list(w) for w in self.windows],
            "lambdas": self.lambdas,
            "rows": [
                {"genus": r.genus, "orders": list(r.orders), "value": r.moment.value, "se": r.moment.se,
                 "target": r.target, "resolved": r.resolved}
                for r in self.rows
            ],
            "tv": {str(g): v for g, v in self.tv.items()},
            "exceptions": {str(g): v for g, v in self.exceptions.items()},
        }

    def to_text(self):
        lines = ["genus  orders      moment        se      target"]
        for r in self.rows:
            lines.append(f"{r.genus:5d}  {str(r.orders):10s} {r.moment.value:10.4f} {r.moment.se:9.4f} {r.target:10.4f}")
        for g in sorted(self.tv):
            tv = ", ".join(f"{x:.4f}" for x in self.tv[g])
            lines.append(f"genus {g}: TV {tv}; excluded {self.exceptions.get(g, 0.0):.4f}")
        return "\n".join(lines)


def _order_tuples(n_windows, k_max):
    out = []
    for k in range(1, k_max + 1):
        for j in range(n_windows):
            o = [0] * n_windows
            o[j] = k
            out.append(tuple(o))
    if n_windows > 1:
        out.append((1,) * n_windows)
    return out


def moment_convergence_report(samples: Sequence[CountSample], lambda_fn=lambda_closed, k_max=3) -> ExperimentReport:
    """Factorial moments per genus against products of limiting means."""
    if len({s.genus for s in samples}) < 2:
        raise InsufficientSamples("need at least two genus levels")
    windows = [tuple(w) for w in samples[0].windows]
    lams = [lambda_fn(a, b) for a, b in windows]
    rows, tv, exc = [], {}, {}
    for s in sorted(samples, key=lambda s: s.genus):
        if s.size < 2:
            raise InsufficientSamples(f"genus {s.genus}: fewer than two samples")
        for orders in _order_tuples(len(windows), k_max):
            est = joint_factorial_moment(s.counts, orders)
            target = float(np.prod([lam ** k for lam, k in zip(lams, orders)]))
            rows.append(ReportRow(s.genus, orders, est, target, bool(target == 0 or est.se < target)))
        tv[s.genus] = [poisson_tv(s.counts[:, j], lam) if lam > 0 else float(np.mean(s.counts[:, j] != 0))
                       for j, lam in enumerate(lams)]
        total = s.size + s.excluded
        exc[s.genus] = s.excluded / total if total else 0.0
    return ExperimentReport(windows, lams, rows, tv, exc)


# ----------------------------------------------------------------------
# plots


def pmf_svg(counts, lam, title="", width=480, height=300) -> str:
    """Bar chart of the empirical pmf with the Poisson pmf as dots, as an SVG string."""
    c = np.asarray(counts, dtype=np.int64)
    top = max(int(c.max()) if len(c) else 0, int(lam + 4 * math.sqrt(max(lam, 1e-9))) + 1)
    emp = np.bincount(c, minlength=top + 1)[: top + 1] / max(len(c), 1)
    ref = sps.poisson.pmf(np.arange(top + 1), lam) if lam > 0 else (np.arange(top + 1) == 0).astype(float)
    ymax = max(float(emp.max()), float(ref.max()), 1e-9) * 1.1
    pad = 30
    bw = (width - 2 * pad) / (top + 1)

    def y(p):
        return height - pad - p / ymax * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{pad}" y="{pad - 10}" font-size="12">{title}</text>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>']
    for n in range(top + 1):
        x = pad + n * bw
        parts.append(f'<rect x="{x + 1:.2f}" y="{y(emp[n]):.2f}" width="{bw - 2:.2f}" '
                     f'height="{height - pad - y(emp[n]):.2f}" fill="steelblue"/>')
        parts.append(f'<circle cx="{x + bw / 2:.2f}" cy="{y(ref[n]):.2f}" r="2.5" fill="crimson"/>')
    parts.append("</svg>")
    return "\n".join(parts)
