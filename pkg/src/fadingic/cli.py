"""Scenario runner: bound sweeps, certificates and CSV/SVG exports.

Exit codes
----------
0  success
1  a checked property failed (sandwich violated or certificate did not pass)
2  command-line usage error
3  input file not found
4  scenario or report does not match its schema
5  precondition violation (regime, CSIT hypothesis, static bound on a fading ensemble, ...)
6  direction grids of two reports differ
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bounds import PowerPolicy
from .ensemble import (
    Budget,
    csit_determines_inr,
    csit_from_labels,
    csit_from_quantizer,
    make_discrete_ensemble,
    sample_rayleigh_ensemble,
)
from .geometry import TOL, boundary_polyline
from .policies import SEARCHABLE_BOUNDS, CsitHypothesisError, PolicyGrid, extend_region, power_pairs, trace_boundary
from .theorems import classify_regime, empirical_gap, mixed_sum_capacity, one_bit_gap_certificate

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_SCHEMA = 4
EXIT_PRECONDITION = 5
EXIT_GRID_MISMATCH = 6

SCENARIO_DIR = Path(__file__).parent / "scenarios"
INNER_BOUND = "Eq2"
OUTER_BOUND = "Eq45"

_NUM = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}
_CSIT = {
    "type": "object",
    "properties": {
        "feature": {"enum": ["none", "inr-magnitude", "full-state", "custom-binning"]},
        "edges": {"type": "array", "items": _NUM},
        "labels": {"type": "array", "items": {"type": "integer"}},
    },
    "additionalProperties": False,
}
_BUDGET = {"type": "array", "items": _NONNEG, "minItems": 2, "maxItems": 2}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["ensemble", "bounds"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "ensemble": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["type", "states", "weights"],
                    "properties": {
                        "type": {"const": "discrete"},
                        "states": {"type": "array", "minItems": 1,
                                   "items": {"type": "array", "items": _NONNEG, "minItems": 4, "maxItems": 4}},
                        "weights": {"type": "array", "items": _NONNEG, "minItems": 1},
                    },
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "required": ["type", "sigmas", "n", "seed"],
                    "properties": {
                        "type": {"const": "rayleigh"},
                        "sigmas": {"type": "array", "items": _NONNEG, "minItems": 4, "maxItems": 4},
                        "n": {"type": "integer", "minimum": 1},
                        "seed": {"type": "integer", "minimum": 0},
                    },
                    "additionalProperties": False,
                },
            ]
        },
        "csit": {
            "type": "object",
            "properties": {"tx1": _CSIT, "tx2": _CSIT},
            "additionalProperties": False,
        },
        "budget": _BUDGET,
        "budgets": {"type": "array", "items": _BUDGET, "minItems": 1},
        "bounds": {"type": "array", "items": {"enum": list(SEARCHABLE_BOUNDS)}, "minItems": 1, "uniqueItems": True},
        "grid": {
            "type": "object",
            "properties": {
                "power_step": _NUM, "split_step": _NUM, "cap": _NUM,
                "split_product_limit": {"type": "integer"}, "max_candidates": {"type": "integer"},
                "golden_iters": {"type": "integer"}, "refine_directions": {"type": "integer"},
                "split_domain": {"enum": ["constant", "remark32", "state"]},
            },
            "additionalProperties": False,
        },
        "directions": {"type": "integer", "minimum": 4},
        "refine": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "certificate": {
            "type": "object",
            "properties": {
                "enabled": {"type": "boolean"},
                "delta": _NONNEG,
                "bisect": {"type": "boolean"},
                "phi1": {"type": "array", "items": _NONNEG},
                "phi2": {"type": "array", "items": _NONNEG},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"csv": {"type": "boolean"}, "svg": {"type": "boolean"}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# number formatting

def fmt(x) -> str:
    """12 significant digits, the single string form used by every export."""
    return f"{float(x):.12g}"


def _round12(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)):
        return obj
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(fmt(x))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _round12(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_report(report) -> str:
    return json.dumps(_round12(report), indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# scenario loading

def _read_json(path):
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_NOT_FOUND, f"file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_SCHEMA, f"{path}: malformed JSON: {exc}") from exc


def load_scenario(path, directions=None, seed=None) -> dict:
    """Read and validate a scenario; command-line overrides are applied here."""
    sc = _read_json(path)
    try:
        jsonschema.validate(sc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise CliError(EXIT_SCHEMA, f"{path}: schema violation at {where}: {exc.message}") from exc
    if "budget" in sc and "budgets" in sc:
        raise CliError(EXIT_SCHEMA, f"{path}: give either 'budget' or 'budgets', not both")
    if "budget" not in sc and "budgets" not in sc:
        raise CliError(EXIT_SCHEMA, f"{path}: a 'budget' or 'budgets' entry is required")
    sc = dict(sc)
    sc.setdefault("name", Path(path).stem)
    if directions is not None:
        sc["directions"] = int(directions)
    if seed is not None:
        if sc["ensemble"]["type"] != "rayleigh":
            raise CliError(EXIT_PRECONDITION, "--seed only applies to rayleigh ensembles")
        sc["ensemble"] = {**sc["ensemble"], "seed": int(seed)}
    return sc


def _build(sc):
    """Ensemble, CSIT maps, budgets and grid from a validated scenario."""
    spec = sc["ensemble"]
    try:
        if spec["type"] == "discrete":
            ens = make_discrete_ensemble([tuple(s) for s in spec["states"]], spec["weights"])
        else:
            ens = sample_rayleigh_ensemble(tuple(spec["sigmas"]), spec["n"], spec["seed"])
        maps = []
        for which, key in ((1, "tx1"), (2, "tx2")):
            c = sc.get("csit", {}).get(key, {"feature": "none"})
            if "labels" in c:
                maps.append(csit_from_labels(ens, c["labels"]))
            else:
                maps.append(csit_from_quantizer(ens, which, c.get("feature", "none"), c.get("edges")))
        budgets = [Budget(*b) for b in (sc["budgets"] if "budgets" in sc else [sc["budget"]])]
        grid = PolicyGrid(**sc.get("grid", {}))
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_PRECONDITION, f"precondition violation: {exc}") from exc
    static = [b for b in sc["bounds"] if b in ("Eq39", "Kramer", "ETW")]
    if static and len(ens) != 1:
        raise CliError(EXIT_PRECONDITION, f"static bounds {static} need a single-state ensemble")
    return ens, maps[0], maps[1], budgets, grid


# ---------------------------------------------------------------------------
# run

def _region_entry(region):
    poly = boundary_polyline(region)
    return {
        "support": region.support,
        "members": len(region.members),
        "boundary": [[p.r1, p.r2] for p in poly],
        "member_policies": [m.meta.get("policies") for m in region.members],
    }


def _pair_stats(upper, lower):
    d = upper - lower
    return {"min": float(d.min()), "max": float(d.max()), "mean": float(d.mean()),
            "holds": bool(d.min() >= -TOL)}


def _certificate(sc, ens, c1, c2, budget):
    opts = sc.get("certificate", {})
    if not opts.get("enabled", True):
        return {"status": "disabled"}
    if not (csit_determines_inr(c1, ens, 1) and csit_determines_inr(c2, ens, 2)):
        return {"status": "not-applicable",
                "reason": "CSIT does not determine both cross gains"}
    phi1 = PowerPolicy(c1, tuple(opts["phi1"])) if "phi1" in opts else PowerPolicy.constant(c1, budget.p1)
    phi2 = PowerPolicy(c2, tuple(opts["phi2"])) if "phi2" in opts else PowerPolicy.constant(c2, budget.p2)
    cert = one_bit_gap_certificate(ens, c1, c2, phi1, phi2, opts.get("delta", 1.0))
    out = {"status": "pass" if cert.verdict else "fail",
           "min_term_margin": cert.min_term_margin,
           "shift_margin": cert.shift.margin,
           "halfplane_status": "pass" if cert.halfplane_verdict else "fail",
           "halfplane_shift_margin": cert.halfplane_shift.margin,
           "delta": cert.delta,
           "phi1": list(phi1.values), "phi2": list(phi2.values)}
    if opts.get("bisect", False):
        out["empirical_gap"] = empirical_gap(cert.outer, cert.inner, hi=max(cert.delta, 1.0))
    return out


def _run_budget(args):
    """One power budget of a scenario; top-level so worker processes can pickle it."""
    sc, idx = args
    ens, c1, c2, budgets, grid = _build(sc)
    budget = budgets[idx]
    D = sc.get("directions", 721)
    refine = sc.get("refine", 1)
    regions = {}
    bounds = list(sc["bounds"])
    try:
        # outer first, inner seeded with its powers, outer widened by the inner's powers
        if OUTER_BOUND in bounds:
            regions[OUTER_BOUND] = trace_boundary(OUTER_BOUND, ens, c1, c2, budget, D, grid, refine)
        if INNER_BOUND in bounds:
            seeds = power_pairs(regions[OUTER_BOUND]) if OUTER_BOUND in regions else ()
            regions[INNER_BOUND] = trace_boundary(INNER_BOUND, ens, c1, c2, budget, D, grid, refine, seeds)
            if OUTER_BOUND in regions:
                regions[OUTER_BOUND] = extend_region(regions[OUTER_BOUND], power_pairs(regions[INNER_BOUND]))
        for b in bounds:
            if b not in regions:
                regions[b] = trace_boundary(b, ens, c1, c2, budget, D, grid, refine)
    except (ValueError, FloatingPointError) as exc:
        raise CliError(EXIT_PRECONDITION, f"precondition violation: {exc}") from exc

    entry = {"budget": [budget.p1, budget.p2], "bounds": {b: _region_entry(regions[b]) for b in bounds}}
    checks = {}
    if INNER_BOUND in regions and OUTER_BOUND in regions:
        checks["sandwich"] = _pair_stats(regions[OUTER_BOUND].support, regions[INNER_BOUND].support)
        checks["sandwich"].update(outer=OUTER_BOUND, inner=INNER_BOUND)
    for loose in ("Kramer", "ETW"):
        if loose in regions and "Eq39" in regions:
            checks[f"{loose}-minus-Eq39"] = _pair_stats(regions[loose].support, regions["Eq39"].support)
    regime = classify_regime(ens)
    if regime == "uniformly-strong" and INNER_BOUND in regions and OUTER_BOUND in regions:
        gap = np.abs(regions[OUTER_BOUND].support - regions[INNER_BOUND].support)
        checks["strong_equality"] = {"max_abs_diff": float(gap.max()), "holds": bool(gap.max() <= TOL)}
    if regime == "uniformly-mixed":
        value, (p1, p2) = mixed_sum_capacity(ens, c1, c2, budget, grid)
        checks["mixed_sum"] = {"grid_value": value, "phi1": list(p1.values), "phi2": list(p2.values)}
        theta = regions[OUTER_BOUND].directions if OUTER_BOUND in regions else None
        if theta is not None and (D - 1) % 2 == 0:
            mid = (D - 1) // 2
            checks["mixed_sum"]["outer_support_11"] = float(regions[OUTER_BOUND].support[mid] / math.cos(theta[mid]))
    entry["checks"] = checks
    entry["certificate"] = _certificate(sc, ens, c1, c2, budget)
    return entry


def run_scenario(sc: dict, workers: int = 1) -> dict:
    """Full report (metadata block separated) for a validated scenario dict."""
    t0 = time.perf_counter()
    ens, c1, c2, budgets, grid = _build(sc)
    jobs = [(sc, i) for i in range(len(budgets))]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            runs = list(pool.map(_run_budget, jobs))
    else:
        runs = [_run_budget(j) for j in jobs]
    D = sc.get("directions", 721)
    theta = np.linspace(0.0, np.pi / 2, D)
    body = {
        "scenario": sc,
        "regime": classify_regime(ens),
        "ensemble": {"size": len(ens), "provenance": ens.provenance},
        "csit": {"tx1": {"names": list(map(str, c1.names)), "feature": c1.feature},
                 "tx2": {"names": list(map(str, c2.names)), "feature": c2.feature}},
        "directions": theta,
        "runs": runs,
    }
    body["metadata"] = {
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "workers": workers,
        "elapsed_seconds": time.perf_counter() - t0,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    return body


def strip_metadata(report_text: str) -> str:
    obj = json.loads(report_text)
    obj.pop("metadata", None)
    return json.dumps(obj, sort_keys=True)


# ---------------------------------------------------------------------------
# exports

def support_csv(directions, support) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["direction-angle-rad", "w1", "w2", "support-bits"])
    for t, s in zip(directions, support):
        w1 = 1.0 if t == 0.0 else (0.0 if t == np.pi / 2 else math.cos(t))
        w2 = 0.0 if t == 0.0 else (1.0 if t == np.pi / 2 else math.sin(t))
        w.writerow([fmt(t), fmt(w1), fmt(w2), fmt(s)])
    return buf.getvalue()


def boundary_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r1-bits", "r2-bits"])
    for x, y in points:
        w.writerow([fmt(x), fmt(y)])
    return buf.getvalue()


_STYLES = {
    "Eq45": "stroke:#c0392b;stroke-dasharray:6 3",
    "Eq18": "stroke:#8e44ad;stroke-dasharray:2 2",
    "Eq2": "stroke:#1f618d",
    "Eq55": "stroke:#117a65",
    "Eq39": "stroke:#1f618d",
    "Kramer": "stroke:#b9770e;stroke-dasharray:4 2",
    "ETW": "stroke:#c0392b;stroke-dasharray:6 3",
}
_LABELS = {
    "Eq45": "outer bound (relaxed)",
    "Eq18": "outer bound (full)",
    "Eq2": "inner bound (HK)",
    "Eq55": "strong-regime capacity",
    "Eq39": "static outer bound",
    "Kramer": "Kramer outer bound",
    "ETW": "ETW outer bound",
}


def render_svg(curves, title="") -> str:
    """Self-contained SVG; ``curves`` is a list of (label, bound, points).

    Polyline coordinates are written in data units with the same strings
    as the boundary CSV; a group transform maps them to the canvas.
    """
    W, H, m = 640, 480, 60
    xs = [float(fmt(x)) for _, _, pts in curves for x, _ in pts] or [1.0]
    ys = [float(fmt(y)) for _, _, pts in curves for _, y in pts] or [1.0]
    xmax = max(max(xs), 1e-9) * 1.05
    ymax = max(max(ys), 1e-9) * 1.05
    sx, sy = (W - 2 * m) / xmax, (H - 2 * m) / ymax
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" style="fill:#ffffff"/>',
        f'<text x="{W / 2}" y="24" style="font:14px sans-serif;text-anchor:middle">{title}</text>',
        f'<line x1="{m}" y1="{H - m}" x2="{W - m}" y2="{H - m}" style="stroke:#000000"/>',
        f'<line x1="{m}" y1="{H - m}" x2="{m}" y2="{m}" style="stroke:#000000"/>',
        f'<text x="{W / 2}" y="{H - 20}" style="font:12px sans-serif;text-anchor:middle">R1 (bits)</text>',
        f'<text x="18" y="{H / 2}" style="font:12px sans-serif;text-anchor:middle" '
        f'transform="rotate(-90 18 {H / 2})">R2 (bits)</text>',
        f'<text x="{W - m}" y="{H - m + 16}" style="font:10px sans-serif;text-anchor:end">{fmt(xmax)}</text>',
        f'<text x="{m - 4}" y="{m + 4}" style="font:10px sans-serif;text-anchor:end">{fmt(ymax)}</text>',
        f'<g transform="translate({m} {H - m}) scale({fmt(sx)} {fmt(-sy)})">',
    ]
    for label, bound, pts in curves:
        pstr = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in pts)
        style = _STYLES.get(bound, "stroke:#555555")
        out.append(f'<polyline data-label="{label}" points="{pstr}" '
                   f'style="fill:none;stroke-width:1.5;{style}" vector-effect="non-scaling-stroke"/>')
    out.append("</g>")
    for i, (label, bound, _) in enumerate(curves):
        y = m + 16 * i
        style = _STYLES.get(bound, "stroke:#555555")
        out.append(f'<line x1="{W - m - 150}" y1="{y}" x2="{W - m - 126}" y2="{y}" '
                   f'style="stroke-width:1.5;{style}"/>')
        out.append(f'<text x="{W - m - 120}" y="{y + 4}" style="font:10px sans-serif">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_polylines(svg_text):
    """Point lists of every polyline, as the exact strings in the file."""
    import re

    return [[tuple(p.split(",")) for p in m.split()] for m in re.findall(r'points="([^"]*)"', svg_text)]


def write_outputs(report, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    (out / "report.json").write_text(dumps_report(report))
    written.append(out / "report.json")
    opts = report["scenario"].get("output", {})
    theta = np.asarray(report["directions"], dtype=float)
    curves = []
    for i, run in enumerate(report["runs"]):
        p1, p2 = run["budget"]
        for b, ent in run["bounds"].items():
            stem = f"{b}_run{i}"
            if opts.get("csv", True):
                (out / f"support_{stem}.csv").write_text(support_csv(theta, ent["support"]))
                (out / f"boundary_{stem}.csv").write_text(boundary_csv(ent["boundary"]))
                written += [out / f"support_{stem}.csv", out / f"boundary_{stem}.csv"]
            curves.append((f"{_LABELS.get(b, b)}, P=({fmt(p1)},{fmt(p2)})", b, ent["boundary"]))
    if opts.get("svg", True):
        (out / "regions.svg").write_text(render_svg(curves, report["scenario"].get("name", "")))
        written.append(out / "regions.svg")
    return written


# ---------------------------------------------------------------------------
# diff

def diff_reports(a: dict, b: dict, bound_a=None, bound_b=None):
    """Per-direction ``b - a`` support differences for every run.

    Without explicit bound names, every bound present in both reports is
    compared with itself; when each report holds a single bound those two
    are compared.
    """
    ta, tb = np.asarray(a["directions"], float), np.asarray(b["directions"], float)
    if ta.shape != tb.shape or np.any(ta != tb):
        raise CliError(EXIT_GRID_MISMATCH, "direction grids differ")
    if len(a["runs"]) != len(b["runs"]):
        raise CliError(EXIT_GRID_MISMATCH, "reports have different numbers of runs")
    rows, summary = [], []
    for i, (ra, rb) in enumerate(zip(a["runs"], b["runs"])):
        if bound_a or bound_b:
            pairs = [(bound_a or bound_b, bound_b or bound_a)]
        else:
            common = [k for k in ra["bounds"] if k in rb["bounds"]]
            if common:
                pairs = [(k, k) for k in common]
            elif len(ra["bounds"]) == 1 and len(rb["bounds"]) == 1:
                pairs = [(next(iter(ra["bounds"])), next(iter(rb["bounds"])))]
            else:
                raise CliError(EXIT_SCHEMA, "no bound to compare; pass --bound-a/--bound-b")
        for ka, kb in pairs:
            if ka not in ra["bounds"] or kb not in rb["bounds"]:
                raise CliError(EXIT_SCHEMA, f"run {i}: bound {ka!r} or {kb!r} missing")
            d = np.asarray(rb["bounds"][kb]["support"], float) - np.asarray(ra["bounds"][ka]["support"], float)
            for t, v in zip(ta, d):
                rows.append((i, ka, kb, t, v))
            summary.append({"run": i, "a": ka, "b": kb, "min": float(d.min()), "max": float(d.max()),
                            "mean": float(d.mean()), "max_abs": float(np.abs(d).max())})
    return rows, summary


def diff_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "bound-a", "bound-b", "direction-angle-rad", "diff-bits"])
    for i, ka, kb, t, v in rows:
        w.writerow([i, ka, kb, fmt(t), fmt(v)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# certify

def certify_scenario(sc: dict, delta: float = 1.0, bisect: bool = False) -> dict:
    ens, c1, c2, budgets, _ = _build(sc)
    opts = dict(sc.get("certificate", {}))
    opts.update(enabled=True, delta=delta, bisect=bisect)
    results = []
    for b in budgets:
        try:
            for link, c in ((1, c1), (2, c2)):
                if not csit_determines_inr(c, ens, link):
                    raise CsitHypothesisError(f"transmitter {link} CSIT does not determine its cross gain")
            results.append({"budget": [b.p1, b.p2], **_certificate({**sc, "certificate": opts}, ens, c1, c2, b)})
        except (CsitHypothesisError, ValueError) as exc:
            raise CliError(EXIT_PRECONDITION, f"precondition violation: {exc}") from exc
    return {"scenario": sc, "regime": classify_regime(ens), "certificates": results}


# ---------------------------------------------------------------------------
# entry point

def default_pack():
    """Paths of the bundled scenario files, sorted by name."""
    return sorted(SCENARIO_DIR.glob("*.json"))


def _parser():
    p = argparse.ArgumentParser(
        prog="fadingic",
        description="Inner/outer bounds, capacity results and gap certificates for the "
                    "two-user ergodic fading interference channel.",
        epilog=__doc__.split("Exit codes", 1)[1].replace("----------", "exit codes:", 1),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="trace the requested bounds and write report, CSV and SVG")
    r.add_argument("scenario")
    r.add_argument("--out", default=None, help="output directory (default: ./out/<scenario name>)")
    r.add_argument("--directions", type=int, default=None, help="number of directions in [0, pi/2]")
    r.add_argument("--seed", type=int, default=None, help="override the rayleigh ensemble seed")
    r.add_argument("--workers", type=int, default=None, help="processes for the per-budget sweep")
    d = sub.add_parser("diff", help="per-direction support difference b - a of two reports")
    d.add_argument("a")
    d.add_argument("b")
    d.add_argument("--bound-a", default=None)
    d.add_argument("--bound-b", default=None)
    d.add_argument("--out", default=None, help="CSV file (default: stdout)")
    c = sub.add_parser("certify", help="one-bit gap certificate at the scenario's powers")
    c.add_argument("scenario")
    c.add_argument("--delta", type=float, default=1.0)
    c.add_argument("--bisect", action="store_true", help="also bisect the smallest passing shift")
    c.add_argument("--out", default=None, help="JSON file (default: stdout)")
    k = sub.add_parser("pack", help="run every bundled scenario")
    k.add_argument("--out", default="out")
    k.add_argument("--directions", type=int, default=None)
    k.add_argument("--workers", type=int, default=None)
    return p


def _run_one(path, out, directions, seed, workers):
    sc = load_scenario(path, directions, seed)
    rep = run_scenario(sc, workers or sc.get("workers", 1))
    write_outputs(rep, out or Path("out") / sc["name"])
    failed = [f"run {i}: {name}" for i, run in enumerate(rep["runs"])
              for name, chk in run["checks"].items() if chk.get("holds") is False]
    failed += [f"run {i}: certificate" for i, run in enumerate(rep["runs"])
               if run["certificate"].get("status") == "fail"]
    return rep, failed


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.cmd == "run":
            rep, failed = _run_one(args.scenario, args.out, args.directions, args.seed, args.workers)
            print(f"{rep['scenario']['name']}: regime {rep['regime']}, {len(rep['runs'])} run(s)")
        elif args.cmd == "pack":
            failed = []
            for path in default_pack():
                rep, f = _run_one(path, Path(args.out) / path.stem, args.directions, None, args.workers)
                failed += [f"{path.stem} {x}" for x in f]
                print(f"{path.stem}: regime {rep['regime']}, {len(rep['runs'])} run(s)")
        elif args.cmd == "diff":
            a, b = _read_json(args.a), _read_json(args.b)
            for name, obj in ((args.a, a), (args.b, b)):
                if not isinstance(obj, dict) or "runs" not in obj or "directions" not in obj:
                    raise CliError(EXIT_SCHEMA, f"{name}: not a run report")
            rows, summary = diff_reports(a, b, args.bound_a, args.bound_b)
            text = diff_csv(rows)
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            for s in summary:
                print(f"run {s['run']} {s['b']} - {s['a']}: min {fmt(s['min'])} max {fmt(s['max'])} "
                      f"mean {fmt(s['mean'])}", file=sys.stderr)
            return EXIT_OK
        else:
            sc = load_scenario(args.scenario)
            res = certify_scenario(sc, args.delta, args.bisect)
            text = dumps_report(res)
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            failed = [f"budget {c['budget']}" for c in res["certificates"] if c["status"] != "pass"]
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    if failed:
        print("check failed: " + "; ".join(failed), file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
