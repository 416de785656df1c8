"""Command line entry point: sample, enumerate, surgery, experiment and report."""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io as sio
from .errors import (
    BudgetExceeded,
    ConfigInvalid,
    FlatSurgeError,
    FlipLimit,
    InvalidSurface,
    RejectionBudget,
)

FORMAT_VERSION = 1
CHUNK = 50  # samples per Markov chain; fixed so results do not depend on the worker count


@dataclass
class RunConfig:
    command: str = ""
    action: str = ""
    seed: int | None = None
    workers: int = 1
    out: str | None = None
    tolerance: float = 1e-9
    format_version: int = FORMAT_VERSION
    params: dict = field(default_factory=dict)

    def validate(self):
        if self.tolerance <= 0:
            raise ConfigInvalid("tolerance must be positive")
        if self.workers < 1:
            raise ConfigInvalid("workers must be at least 1")
        if self.command in ("experiment", "sample") and self.seed is None:
            raise ConfigInvalid(f"{self.command} requires --seed")
        if self.format_version != FORMAT_VERSION:
            raise ConfigInvalid(f"unsupported format_version {self.format_version}")


# ----------------------------------------------------------------------
# parsing helpers


def _floats(text, n=None, name="value"):
    try:
        vals = [float(x) for x in str(text).split(",")]
    except ValueError as exc:
        raise ConfigInvalid(f"bad {name}: {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigInvalid(f"{name} needs {n} comma-separated numbers")
    return vals


def _ints(text, name="value"):
    try:
        return [int(x) for x in str(text).split(",") if x != ""]
    except ValueError as exc:
        raise ConfigInvalid(f"bad {name}: {text!r}") from exc


def _stratum(text):
    from .sampler import TABLE, parse_stratum

    try:
        kappa = parse_stratum(text)
    except (ValueError, FlatSurgeError) as exc:
        raise ConfigInvalid(f"bad stratum {text!r}: {exc}") from exc
    if kappa not in TABLE:
        raise ConfigInvalid(f"no sampler for stratum {text!r}")
    return kappa


def _load(path):
    try:
        return sio.load(path)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc}") from exc


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _csv_text(header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return x


def _workers(cfg):
    env = os.environ.get("FLATSURGE_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigInvalid(f"FLATSURGE_WORKERS={env!r} is not an integer") from exc
    return cfg.workers


def _describe(s):
    st = s.stratum()
    return {"stratum": str(st), "kappa": list(st.kappa), "genus": int(s.genus), "area": float(s.area())}


# ----------------------------------------------------------------------
# sample


def cmd_sample(cfg: RunConfig):
    from .sampler import sample_surface

    p = cfg.params
    kappa = _stratum(p["stratum"])
    count = int(p.get("count", 1))
    if count < 1:
        raise ConfigInvalid("--count must be positive")
    if not cfg.out:
        raise ConfigInvalid("sample requires --out")
    seeds = [int(np.random.SeedSequence([cfg.seed, i]).generate_state(1, np.uint64)[0] >> 1) for i in range(count)]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, sd in enumerate(seeds):
        s = sample_surface(kappa, sd)
        name = f"sample_{i:05d}.json"
        sio.save(s, out / name)
        files.append({"file": name, "seed": sd, **_describe(s)})
    manifest = {"format_version": FORMAT_VERSION, "stratum": list(kappa), "master_seed": cfg.seed, "samples": files}
    _write(out / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True))
    return 0


# ----------------------------------------------------------------------
# enumerate

ENUM_COLUMNS = ["length", "hol_re", "hol_im", "closed", "start_zero_order",
                "side_angle_left", "side_angle_right", "multiplicity"]


def enumerate_rows(surface, max_length, closed_only=False, filt=None):
    from .geodesy import (
        _mult1_nocyl,
        enumerate_saddle_connections,
        multiplicity,
        side_angles,
    )

    conns = enumerate_saddle_connections(surface, max_length)
    sel = conns
    if filt == "mult1-nocyl":
        sel = _mult1_nocyl(surface, conns)
    elif filt is not None:
        raise ConfigInvalid(f"unknown filter {filt!r}")
    if closed_only:
        sel = [c for c in sel if c.closed]
    orders = surface.orders
    rows = []
    for c in sel:
        left, right = side_angles(surface, c) if c.closed else ("", "")
        rows.append([c.length, c.holonomy.real, c.holonomy.imag, c.closed, int(orders[c.start_vertex]),
                     left, right, multiplicity(conns, c.holonomy)])
    return rows


def cmd_enumerate(cfg: RunConfig):
    p = cfg.params
    L = float(p.get("max_length", -1))
    if not (L > 0 and math.isfinite(L)):
        raise ConfigInvalid("--max-length must be positive")
    fmt = p.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigInvalid("--out must be csv or json")
    s = _load(p["input"])
    rows = enumerate_rows(s, L, bool(p.get("closed_only")), p.get("filter"))
    if fmt == "csv":
        text = _csv_text(ENUM_COLUMNS, [[_fmt(x) for x in r] for r in rows])
    else:
        text = json.dumps([dict(zip(ENUM_COLUMNS, [_fmt(x) for x in r])) for r in rows], indent=1)
    if p.get("output"):
        _write(p["output"], text)
    else:
        sys.stdout.write(text)
    return 0


# ----------------------------------------------------------------------
# surgery


def _cert_dict(cert):
    d = {}
    for f in fields(cert):
        v = getattr(cert, f.name)
        if f.name in ("areas", "velocity"):
            continue
        if hasattr(v, "__dataclass_fields__"):
            v = asdict(v)
        d[f.name] = _jsonable(v)
    if cert.areas:
        d["area_drift"] = float(np.max(np.abs(np.asarray(cert.areas) - cert.areas[0])))
    return d


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if hasattr(v, "__dataclass_fields__"):
        return _jsonable(asdict(v))
    return v


def cmd_surgery(cfg: RunConfig):
    from . import surgery as sg
    from .geodesy import enumerate_saddle_connections

    p = cfg.params
    action = cfg.action
    if not p.get("input") or not cfg.out:
        raise ConfigInvalid("surgery requires --in and --out")
    s = _load(p["input"])
    idx = _ints(p.get("connection", ""), "connection")
    conns = []
    if idx:
        L = float(p.get("max_length", 1.0))
        if L <= 0:
            raise ConfigInvalid("--max-length must be positive")
        allc = enumerate_saddle_connections(s, L)
        try:
            conns = [allc[i] for i in idx]
        except IndexError as exc:
            raise ConfigInvalid(f"connection index out of range (have {len(allc)})") from exc
    need = {"open": 1, "collapse": 1, "move": 2, "pinch": 2, "unpinch": 0}
    if action in need and len(conns) != need[action]:
        raise ConfigInvalid(f"{action} needs {need[action]} --connection indices")
    if action == "pipeline" and not conns:
        raise ConfigInvalid("pipeline needs --connection indices")
    extra = {}
    if action == "open":
        out, g1, g2, cert = sg.open_zero(s, conns[0])
        extra = {"gamma1": _jsonable(g1.holonomy), "gamma2": _jsonable(g2.holonomy)}
    elif action == "collapse":
        k1, k2 = _ints(p.get("split", "1,1"), "split")
        out = sg.collapse_open_connection(s, conns[0], k1, k2)
        cert = sg.SurgeryCertificate("collapse", str(s.stratum()), str(out.stratum()),
                                     locus=(complex(conns[0].holonomy),))
    elif action == "move":
        out, g1, g2, cert = sg.move_zero(s, conns[0], conns[1])
    elif action == "pinch":
        out, pp, pm, cert = sg.pinch(s, conns[0], conns[1])
    elif action == "unpinch":
        if p.get("kappa") is None:
            raise ConfigInvalid("unpinch needs --kappa re,im")
        kre, kim = _floats(p["kappa"], 2, "kappa")
        marked = sorted(s.marked)
        if len(marked) != 2:
            raise ConfigInvalid("unpinch needs a surface with exactly two marked points")
        out, cert = sg.unpinch(s, marked[0], marked[1], complex(kre, kim))
    elif action == "pipeline":
        out, labels, kappas, records = sg.collapse_pipeline(s, conns)
        cert = records[-1].certificates[-1]
        extra = {"labels": labels, "kappas": _jsonable(kappas)}
    else:
        raise ConfigInvalid(f"unknown surgery {action!r}")
    sio.save(out, cfg.out)
    report = {"certificate": _cert_dict(cert), **extra, "output": _describe(out)}
    _write(str(cfg.out) + ".cert.json", json.dumps(report, indent=1, sort_keys=True))
    return 0


# ----------------------------------------------------------------------
# experiments


def _chain_task(args):
    kind, kappa, g, windows, n, seed, chain, B = args
    from .geodesy import count_closed, count_open, enumerate_saddle_connections
    from .sampler import sample_batch
    from .surgery import detect_exception

    surfaces, acc = sample_batch(kappa, n, seed, chain=chain)
    rows = []
    bmax = max(b for _, b in windows)
    for i, s in enumerate(surfaces):
        if kind == "closed":
            r = math.sqrt(g)
            conns = enumerate_saddle_connections(s, max(bmax, B) / r, closed_only=True)
            counts = [count_closed(s, a, b, g, "mult1-nocyl", conns) for a, b in windows]
            exc = detect_exception(s, (0.0, B / 2 / r), conns)
        else:
            conns = enumerate_saddle_connections(s, bmax / g)
            counts = [count_open(s, a, b, g, conns) for a, b in windows]
            exc = ""
        rows.append([chain * CHUNK + i, chain, g, *counts, exc])
    return chain, rows, acc


def _experiment_seed(seed, g):
    return int(np.random.SeedSequence([seed, g]).generate_state(1, np.uint64)[0] >> 1)


def run_counts(kind, genus_list, windows, samples, seed, workers=1, stratum=None, B=None):
    """Per-surface counts for each genus, deterministic in ``seed``.

    Samples are grouped into chains of fixed size; chain ``c`` of genus ``g``
    always produces the same surfaces whatever the worker count.
    """
    tasks = []
    bmax = max(b for _, b in windows)
    B = 2 * bmax if B is None else B
    for g in genus_list:
        if stratum in (None, "default"):
            kappa = (2,) * (g - 1) if kind == "closed" else (1,) * (2 * g - 2)
        elif stratum == "principal":
            kappa = (1,) * (2 * g - 2)
        else:
            kappa = _stratum(stratum)
        n_chains = -(-samples // CHUNK)
        for c in range(n_chains):
            n = min(CHUNK, samples - c * CHUNK)
            tasks.append((kind, kappa, g, windows, n, _experiment_seed(seed, g), c, B))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_chain_task, tasks))
    else:
        results = [_chain_task(t) for t in tasks]
    by_g = {}
    for (kind_, kappa, g, *_), (chain, rows, acc) in zip(tasks, results):
        d = by_g.setdefault(g, {"kappa": kappa, "rows": [], "acceptance": []})
        d["rows"].extend(rows)
        d["acceptance"].append(acc)
    return by_g


def count_csv(rows, n_windows):
    header = ["index", "chain", "genus"] + [f"count_{j}" for j in range(n_windows)] + ["exception"]
    return _csv_text(header, rows)


def read_count_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = list(r)
    cols = [i for i, h in enumerate(header) if h.startswith("count_")]
    counts = np.array([[int(row[i]) for i in cols] for row in rows], dtype=np.int64).reshape(len(rows), len(cols))
    exc = [row[header.index("exception")] for row in rows]
    return counts, exc


def cmd_experiment(cfg: RunConfig):
    from .stats import CountSample, lambda_closed, lambda_open, pmf_svg, poisson_verdict

    p = cfg.params
    action = cfg.action
    if action not in ("poisson-closed", "poisson-open"):
        raise ConfigInvalid(f"unknown experiment {action!r}")
    kind = "closed" if action == "poisson-closed" else "open"
    genus_list = _ints(p.get("genus_list", "4,8,12"), "genus-list")
    if not genus_list or min(genus_list) < 2:
        raise ConfigInvalid("genus list needs values >= 2")
    intervals = p.get("interval") or ["0,1"]
    windows = [tuple(_floats(x, 2, "interval")) for x in intervals]
    for a, b in windows:
        if not (0 <= a < b):
            raise ConfigInvalid(f"bad interval ({a}, {b})")
    try:
        CountSample(0, (), windows, np.zeros((0, len(windows))))
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from exc
    samples = int(p.get("samples", 100))
    if samples < 2:
        raise ConfigInvalid("--samples must be at least 2")
    if not cfg.out:
        raise ConfigInvalid("experiment requires --out")
    lam_fn = lambda_closed if kind == "closed" else lambda_open
    by_g = run_counts(kind, genus_list, windows, samples, cfg.seed, _workers(cfg), p.get("stratum"))
    out = Path(cfg.out)
    summary = {"format_version": FORMAT_VERSION, "experiment": action, "seed": cfg.seed, "samples": samples,
               "windows": [list(w) for w in windows], "genus": {}}
    for g in genus_list:
        d = by_g[g]
        rows = d["rows"]
        _write(out / f"counts_g{g}.csv", count_csv(rows, len(windows)))
        counts = np.array([r[3:3 + len(windows)] for r in rows], dtype=np.int64)
        verdicts = [poisson_verdict(counts[:, j], lam_fn(a, b)).to_dict() for j, (a, b) in enumerate(windows)]
        exc = [r[-1] for r in rows]
        summary["genus"][str(g)] = {
            "stratum": list(d["kappa"]),
            "mcmc_acceptance": float(np.mean(d["acceptance"])),
            "verdicts": verdicts,
            "exceptions": {k: exc.count(k) / len(exc) for k in ("none", "type1", "type2")} if kind == "closed" else {},
        }
        a, b = windows[0]
        _write(out / f"pmf_g{g}.svg", pmf_svg(counts[:, 0], lam_fn(a, b), f"genus {g}, window [{a}, {b}]"))
    _write(out / "summary.json", json.dumps(summary, indent=1, sort_keys=True))
    return 0


def cmd_report(cfg: RunConfig):
    from .stats import CountSample, lambda_closed, lambda_open, moment_convergence_report

    p = cfg.params
    src = Path(p.get("input") or ".")
    try:
        summary = json.loads((src / "summary.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read experiment summary in {src}: {exc}") from exc
    windows = [tuple(w) for w in summary["windows"]]
    samples = []
    for g, info in summary["genus"].items():
        counts, exc = read_count_csv(src / f"counts_g{g}.csv")
        excluded = sum(1 for e in exc if e in ("type1", "type2"))
        samples.append(CountSample(int(g), tuple(info["stratum"]), windows, counts, excluded=excluded))
    lam_fn = lambda_closed if summary["experiment"] == "poisson-closed" else lambda_open
    rep = moment_convergence_report(samples, lam_fn, int(p.get("k_max", 3)))
    text = rep.to_text() + "\nthresholds are engineering choices; no convergence rate is known\n"
    out = Path(cfg.out) if cfg.out else src
    _write(out / "report.json", json.dumps(rep.to_dict(), indent=1, sort_keys=True))
    _write(out / "report.txt", text)
    sys.stdout.write(text)
    return 0


# ----------------------------------------------------------------------
# argument handling


def build_parser():
    ap = argparse.ArgumentParser(prog="flatsurge")
    ap.add_argument("--config", help="JSON file with default options")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--tolerance", type=float)
        sp.add_argument("--config", dest="sub_config")

    sp = sub.add_parser("sample")
    common(sp)
    sp.add_argument("--stratum", required=True)
    sp.add_argument("--count", type=int)
    sp.add_argument("--out")

    sp = sub.add_parser("enumerate")
    common(sp)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--max-length", type=float, required=True)
    sp.add_argument("--closed-only", action="store_true", default=None)
    sp.add_argument("--filter", choices=["mult1-nocyl"])
    sp.add_argument("--out", dest="format", choices=["csv", "json"])
    sp.add_argument("--output")

    sp = sub.add_parser("surgery")
    common(sp)
    sp.add_argument("action", choices=["open", "collapse", "move", "pinch", "unpinch", "pipeline"])
    sp.add_argument("--in", dest="input")
    sp.add_argument("--out")
    sp.add_argument("--connection")
    sp.add_argument("--max-length", type=float)
    sp.add_argument("--split")
    sp.add_argument("--kappa")

    sp = sub.add_parser("experiment")
    common(sp)
    sp.add_argument("action", choices=["poisson-closed", "poisson-open"])
    sp.add_argument("--genus-list")
    sp.add_argument("--interval", action="append")
    sp.add_argument("--samples", type=int)
    sp.add_argument("--stratum")
    sp.add_argument("--out")

    sp = sub.add_parser("report")
    common(sp)
    sp.add_argument("--in", dest="input")
    sp.add_argument("--out")
    sp.add_argument("--k-max", type=int)
    return ap


def make_config(ns) -> RunConfig:
    """Merge flags over the config file over defaults."""
    file_cfg = {}
    path = ns.sub_config or ns.config
    if path:
        try:
            file_cfg = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigInvalid("config file must hold an object")
    flags = {k: v for k, v in vars(ns).items() if v is not None and k not in ("config", "sub_config")}
    merged = {**{k.replace("-", "_"): v for k, v in file_cfg.items()}, **flags}
    top = {f.name for f in fields(RunConfig)} - {"params"}
    cfg = RunConfig(**{k: merged[k] for k in top if k in merged and k != "out"})
    cfg.out = merged.get("out")
    cfg.params = {k: v for k, v in merged.items() if k not in top}
    if isinstance(cfg.params.get("interval"), str):
        cfg.params["interval"] = [cfg.params["interval"]]
    if cfg.seed is not None:
        cfg.seed = int(cfg.seed)
    cfg.workers = int(cfg.workers)
    cfg.validate()
    return cfg


COMMANDS = {
    "sample": cmd_sample,
    "enumerate": cmd_enumerate,
    "surgery": cmd_surgery,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def _error(kind, exc, code):
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = make_config(ns)
        return COMMANDS[cfg.command](cfg)
    except (ConfigInvalid, InvalidSurface) as exc:
        return _error("config", exc, 2)
    except (BudgetExceeded, RejectionBudget, FlipLimit) as exc:
        return _error("budget", exc, 3)
    except FlatSurgeError as exc:
        return _error("runtime", exc, 1)


if __name__ == "__main__":
    sys.exit(main())
