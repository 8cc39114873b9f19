"""File formats: panel CSV, mask text files, result documents, plot series.

Panel CSV
    Long format, one row per observed (portfolio, year), header either
    ``portfolio_id,year,defaults,obligors`` or ``portfolio_id,year,default_rate``.
    Missing cells are absent rows. Written in canonical order: portfolios by
    natural sort of their id, then years ascending.

Mask file
    One line per portfolio, one character per year: ``1`` observed, ``0``
    missing. Blank lines and lines starting with ``#`` are ignored.

Result document (JSON, schema ``ttcpd.result/1``)
    Config echo, per-portfolio ``ttc_pd``/``k``/``rho``, factor path, full PIT
    matrix, residuals (``null`` where unobserved), identifiability report,
    convergence trace and warnings. Floats are written with ``repr`` (17
    significant digits) so the document round-trips exactly.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import re
from pathlib import Path

import numpy as np

from .errors import CalibrationError
from .identifiability import AvailabilityMask, IdentifiabilityReport
from .model import (
    AssetClassParams,
    BaselLinked,
    CalibrationConfig,
    CalibrationResult,
    ClampRecord,
    DefaultRatePanel,
    FactorPath,
    FixedRho,
)
from .nonlinear import ConvergenceTrace
from .simulator import AR1, ExperimentResult, ExplicitPath, SimulationSpec

RESULT_SCHEMA = "ttcpd.result/1"
EXPERIMENT_SCHEMA = "ttcpd.experiment/1"

COUNT_HEADER = ["portfolio_id", "year", "defaults", "obligors"]
RATE_HEADER = ["portfolio_id", "year", "default_rate"]


class PanelFormatError(CalibrationError, ValueError):
    """A panel, mask or spec file could not be parsed."""


def _num(x):
    """Shortest exact text form of a float (17 significant digits at most)."""
    return repr(float(x))


def natural_key(s):
    return [(0, int(tok), "") if tok.isdigit() else (1, 0, tok) for tok in re.split(r"(\d+)", str(s)) if tok]


# ---------------------------------------------------------------------------
# panels


def parse_panel(text: str, source="<panel>") -> DefaultRatePanel:
    rows = list(csv.reader(_io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise PanelFormatError(f"{source}: empty file")
    header = [h.strip() for h in rows[0]]
    if header == COUNT_HEADER:
        counts = True
    elif header == RATE_HEADER:
        counts = False
    else:
        raise PanelFormatError(
            f"{source}: header must be {','.join(COUNT_HEADER)} or {','.join(RATE_HEADER)}, got {','.join(header)}"
        )
    cells, obligors = {}, {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise PanelFormatError(f"{source}:{lineno}: expected {len(header)} fields, got {len(row)}")
        pid = row[0].strip()
        if not pid:
            raise PanelFormatError(f"{source}:{lineno}: empty portfolio id")
        try:
            year = int(row[1])
        except ValueError:
            raise PanelFormatError(f"{source}:{lineno}: year {row[1]!r} is not an integer") from None
        key = (pid, year)
        if key in cells:
            raise PanelFormatError(f"{source}:{lineno}: duplicate row for portfolio {pid}, year {year}")
        if counts:
            try:
                k, n = int(row[2]), int(row[3])
            except ValueError:
                raise PanelFormatError(f"{source}:{lineno}: defaults and obligors must be integers") from None
            if n < 1 or k < 0 or k > n:
                raise PanelFormatError(f"{source}:{lineno}: need 0 <= defaults <= obligors and obligors >= 1")
            cells[key] = k / n
            obligors[key] = n
        else:
            try:
                d = float(row[2])
            except ValueError:
                raise PanelFormatError(f"{source}:{lineno}: default rate {row[2]!r} is not a number") from None
            if not (0.0 <= d <= 1.0):
                raise PanelFormatError(f"{source}:{lineno}: default rate {d} outside [0, 1]")
            cells[key] = d
    if not cells:
        raise PanelFormatError(f"{source}: no data rows")
    ids = sorted({p for p, _ in cells}, key=natural_key)
    years = sorted({y for _, y in cells})
    return DefaultRatePanel.from_cells(cells, obligors if counts else None, ids, years)


def read_panel(path) -> DefaultRatePanel:
    path = Path(path)
    return parse_panel(path.read_text(), str(path))


def format_panel(panel: DefaultRatePanel) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    order = sorted(range(len(panel.portfolio_ids)), key=lambda i: natural_key(panel.portfolio_ids[i]))
    if panel.obligors is not None:
        w.writerow(COUNT_HEADER)
        for i in order:
            for t, y in enumerate(panel.years):
                d = panel.rates[i, t]
                if not np.isnan(d):
                    n = int(panel.obligors[i, t])
                    w.writerow([panel.portfolio_ids[i], y, int(round(d * n)), n])
    else:
        w.writerow(RATE_HEADER)
        for i in order:
            for t, y in enumerate(panel.years):
                d = panel.rates[i, t]
                if not np.isnan(d):
                    w.writerow([panel.portfolio_ids[i], y, _num(d)])
    return buf.getvalue()


def write_panel(panel: DefaultRatePanel, path):
    Path(path).write_text(format_panel(panel))


# ---------------------------------------------------------------------------
# masks and factor paths


def parse_mask(text: str, source="<mask>", portfolio_ids=None, years=None) -> AvailabilityMask:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise PanelFormatError(f"{source}: empty mask")
    width = len(lines[0])
    grid = []
    for ln in lines:
        if len(ln) != width or set(ln) - {"0", "1"}:
            raise PanelFormatError(f"{source}: mask rows must be equal-length strings of 0 and 1")
        grid.append([c == "1" for c in ln])
    try:
        return AvailabilityMask(np.array(grid), portfolio_ids, years)
    except ValueError as exc:
        raise PanelFormatError(f"{source}: {exc}") from None


def read_mask(path, portfolio_ids=None, years=None) -> AvailabilityMask:
    path = Path(path)
    return parse_mask(path.read_text(), str(path), portfolio_ids, years)


def format_mask(mask) -> str:
    grid = mask.grid if isinstance(mask, AvailabilityMask) else np.asarray(mask, dtype=bool)
    return "".join("".join("1" if c else "0" for c in row) + "\n" for row in grid)


def parse_factor_path(text: str, source="<factor>") -> FactorPath:
    rows = [r for r in csv.reader(ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#"))]
    if not rows or [h.strip() for h in rows[0]] != ["year", "factor"]:
        raise PanelFormatError(f"{source}: header must be year,factor")
    try:
        data = sorted((int(y), float(v)) for y, v in rows[1:])
    except ValueError:
        raise PanelFormatError(f"{source}: malformed row") from None
    return FactorPath([v for _, v in data])


def read_factor_path(path) -> FactorPath:
    path = Path(path)
    return parse_factor_path(path.read_text(), str(path))


# ---------------------------------------------------------------------------
# config / result documents


def config_to_dict(config: CalibrationConfig) -> dict:
    mode = config.rho_mode
    if isinstance(mode, FixedRho):
        rho = {"mode": "fixed", "values": list(mode.values)}
    else:
        p = mode.params
        rho = {"mode": "basel", "rho_min": p.rho_min, "rho_max": p.rho_max, "w": p.w}
    return {
        "alpha_mean": config.alpha_mean,
        "tol": config.tol,
        "max_iter": int(config.max_iter),
        "clamp_eps": config.clamp_eps,
        "weight_by_obligors": config.weight_by_obligors,
        "rho": rho,
    }


def config_from_dict(d: dict) -> CalibrationConfig:
    rho = d["rho"]
    if rho["mode"] == "fixed":
        mode = FixedRho(tuple(rho["values"]))
    else:
        mode = BaselLinked(AssetClassParams(rho["rho_min"], rho["rho_max"], rho["w"]))
    return CalibrationConfig(
        alpha_mean=d["alpha_mean"],
        tol=d["tol"],
        max_iter=d["max_iter"],
        clamp_eps=d["clamp_eps"],
        rho_mode=mode,
        weight_by_obligors=d.get("weight_by_obligors", False),
    )


def _nullable(a):
    return [[None if math.isnan(v) else float(v) for v in row] for row in np.asarray(a, dtype=float)]


def _from_nullable(rows):
    return np.array([[np.nan if v is None else v for v in row] for row in rows], dtype=float)


def result_to_dict(result: CalibrationResult, config=None, report=None, trace=None, notes=()) -> dict:
    return {
        "schema": RESULT_SCHEMA,
        "config": None if config is None else config_to_dict(config),
        "portfolios": [
            {"id": p, "ttc_pd": float(result.ttc_pd[i]), "k": float(result.k[i]), "rho": float(result.rho[i])}
            for i, p in enumerate(result.portfolio_ids)
        ],
        "years": list(result.years),
        "factor": [float(v) for v in result.factor.values],
        "alpha_mean": result.alpha_mean,
        "pit_pd": _nullable(result.pit_pd),
        "residuals": _nullable(result.residuals),
        "objective": result.objective,
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "identifiability": None if report is None else report.to_dict(),
        "convergence_trace": None if trace is None else trace.to_dict(),
        "clamped_cells": [
            {"portfolio_id": r.portfolio_id, "year": r.year, "raw": r.raw, "clamped": r.clamped}
            for r in result.warnings
        ],
        "warnings": [r.message() for r in result.warnings] + list(notes),
    }


def result_from_dict(d: dict):
    """Inverse of :func:`result_to_dict`: ``(result, config, report, trace)``."""
    if d.get("schema") != RESULT_SCHEMA:
        raise PanelFormatError(f"unsupported result schema {d.get('schema')!r}")
    ports = d["portfolios"]
    result = CalibrationResult(
        portfolio_ids=tuple(p["id"] for p in ports),
        years=tuple(d["years"]),
        k=np.array([p["k"] for p in ports]),
        ttc_pd=np.array([p["ttc_pd"] for p in ports]),
        rho=np.array([p["rho"] for p in ports]),
        factor=FactorPath(d["factor"]),
        pit_pd=_from_nullable(d["pit_pd"]),
        residuals=_from_nullable(d["residuals"]),
        iterations=d["iterations"],
        converged=d["converged"],
        alpha_mean=d["alpha_mean"],
        warnings=[ClampRecord(**c) for c in d["clamped_cells"]],
    )
    config = None if d["config"] is None else config_from_dict(d["config"])
    report = None if d["identifiability"] is None else IdentifiabilityReport.from_dict(d["identifiability"])
    trace = None if d["convergence_trace"] is None else ConvergenceTrace.from_dict(d["convergence_trace"])
    return result, config, report, trace


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def result_to_csv(doc: dict) -> str:
    """Flatten a result document to ``section,portfolio_id,year,field,value`` rows."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "portfolio_id", "year", "field", "value"])

    def v(x):
        if x is None:
            return ""
        if isinstance(x, bool) or isinstance(x, (int, str)):
            return str(x)
        return _num(x)

    if doc["config"] is not None:
        for key, val in doc["config"].items():
            if key == "rho":
                for k2, v2 in val.items():
                    w.writerow(["config", "", "", f"rho.{k2}", v2 if isinstance(v2, str) else json.dumps(v2)])
            else:
                w.writerow(["config", "", "", key, v(val)])
    for p in doc["portfolios"]:
        for key in ("ttc_pd", "k", "rho"):
            w.writerow(["portfolio", p["id"], "", key, v(p[key])])
    for y, f in zip(doc["years"], doc["factor"]):
        w.writerow(["factor", "", y, "f", v(f)])
    ids = [p["id"] for p in doc["portfolios"]]
    for section, key in (("pit_pd", "pit_pd"), ("residual", "residuals")):
        for pid, row in zip(ids, doc[key]):
            for y, val in zip(doc["years"], row):
                if val is not None:
                    w.writerow([section, pid, y, key, v(val)])
    for key in ("alpha_mean", "objective", "iterations", "converged"):
        w.writerow(["fit", "", "", key, v(doc[key])])
    if doc["identifiability"] is not None:
        rep = doc["identifiability"]
        for key in ("identifiable", "numerical_rank", "n_parameters", "deficiency"):
            w.writerow(["identifiability", "", "", key, v(rep[key])])
        for k, c in enumerate(rep["components"], 1):
            w.writerow(["identifiability", "", "", f"component.{k}", json.dumps(c)])
        for note in rep["notes"]:
            w.writerow(["identifiability", "", "", "note", note])
    if doc["convergence_trace"] is not None:
        for r in doc["convergence_trace"]["records"]:
            for key in ("max_dk", "max_df", "objective"):
                w.writerow(["trace", "", r["iteration"], key, v(r[key])])
    for c in doc["clamped_cells"]:
        w.writerow(["clamped", c["portfolio_id"], c["year"], "clamped", v(c["clamped"])])
    for msg in doc["warnings"]:
        w.writerow(["warning", "", "", "message", msg])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# simulation specs and experiments


def spec_to_dict(spec: SimulationSpec) -> dict:
    fs = spec.factor_spec
    if isinstance(fs, ExplicitPath):
        factor = {"kind": "explicit", "values": [float(v) for v in fs.path.values]}
    else:
        factor = {"kind": "ar1", "persistence": fs.persistence}
    ac = spec.asset_class
    return {
        "true_ttc_pds": list(spec.true_ttc_pds),
        "portfolio_ids": list(spec.portfolio_ids),
        "horizon": spec.horizon,
        "first_year": spec.first_year,
        "factor": factor,
        "n_obligors": int(spec.n_obligors),
        "asset_class": {"rho_min": ac.rho_min, "rho_max": ac.rho_max, "w": ac.w},
        "mask": None if spec.mask is None else format_mask(spec.mask).split(),
        "seed": int(spec.seed),
    }


def spec_from_dict(d: dict) -> SimulationSpec:
    try:
        fd = d["factor"]
        if fd["kind"] == "explicit":
            factor = ExplicitPath(FactorPath(fd["values"]))
        elif fd["kind"] == "ar1":
            factor = AR1(fd["persistence"])
        else:
            raise PanelFormatError(f"unknown factor kind {fd['kind']!r}")
        ac = d.get("asset_class") or {"rho_min": 0.12, "rho_max": 0.24, "w": 50.0}
        mask = d.get("mask")
        if mask is not None:
            mask = parse_mask("\n".join(mask)).grid
        return SimulationSpec(
            true_ttc_pds=tuple(d["true_ttc_pds"]),
            horizon=int(d["horizon"]),
            factor_spec=factor,
            n_obligors=int(d["n_obligors"]),
            asset_class=AssetClassParams(ac["rho_min"], ac["rho_max"], ac["w"]),
            mask=mask,
            seed=int(d["seed"]),
            first_year=int(d.get("first_year", 1)),
            portfolio_ids=tuple(d["portfolio_ids"]) if d.get("portfolio_ids") else None,
        )
    except KeyError as exc:
        raise PanelFormatError(f"spec is missing field {exc}") from None


def truth_to_dict(spec: SimulationSpec, factor: FactorPath, true_pit) -> dict:
    return {
        "schema": "ttcpd.truth/1",
        "spec": spec_to_dict(spec),
        "portfolios": [
            {"id": p, "ttc_pd": spec.true_ttc_pds[i], "rho": float(spec.true_rho[i])}
            for i, p in enumerate(spec.portfolio_ids)
        ],
        "years": list(spec.years),
        "factor": [float(v) for v in factor.values],
        "pit_pd": _nullable(true_pit),
    }


def experiment_to_dict(exp: ExperimentResult, config=None) -> dict:
    doc = {
        "schema": EXPERIMENT_SCHEMA,
        "spec": spec_to_dict(exp.spec),
        "truth": {
            "ttc_pd": [float(v) for v in exp.true_ttc_pd],
            "rho": [float(v) for v in exp.true_rho],
            "factor": [float(v) for v in exp.true_factor.values],
        },
    }
    if exp.result is not None:
        doc["truth"]["pit_pd"] = _nullable(exp.true_pit)
        doc["result"] = result_to_dict(exp.result, config, trace=exp.trace)
        doc["errors"] = {
            "ttc_abs": [float(v) for v in exp.ttc_error],
            "ttc_rel": [float(v) for v in exp.ttc_rel_error],
            "pit_max_abs": float(np.max(np.abs(exp.pit_error))),
        }
    if exp.sweep is not None:
        sw = exp.sweep
        doc["sweep"] = {
            "sizes": list(sw.sizes),
            "replications": sw.replications,
            "portfolio_ids": list(sw.portfolio_ids),
            "estimates": [_nullable(block) for block in sw.estimates],
            "mean": _nullable(sw.mean()),
            "std": _nullable(sw.std()),
            "mean_abs_error": _nullable(sw.mean_abs_error(exp.true_ttc_pd)),
            "failures": list(sw.failures),
        }
    return doc


def experiment_series(exp: ExperimentResult) -> str:
    """Plot-ready long-format CSV (``series,x,y``) for an experiment.

    Recovery experiments give factor, TTC and PIT lines (true and fitted) and
    the observed default rates, all against the year. Sweeps give every
    replication estimate, the per-size mean and the truth reference line,
    against the sample size.
    """
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series", "x", "y"])
    ids = exp.spec.portfolio_ids
    years = exp.spec.years
    if exp.result is not None:
        res = exp.result
        for y, a in zip(years, exp.true_factor.values):
            w.writerow(["factor_true", y, _num(a)])
        for y, b in zip(years, res.factor.values):
            w.writerow(["factor_fitted", y, _num(b)])
        for i, pid in enumerate(ids):
            for y in years:
                w.writerow([f"ttc_true:{pid}", y, _num(exp.true_ttc_pd[i])])
            for y in years:
                w.writerow([f"ttc_fitted:{pid}", y, _num(res.ttc_pd[i])])
            for t, y in enumerate(years):
                w.writerow([f"pit_true:{pid}", y, _num(exp.true_pit[i, t])])
            for t, y in enumerate(years):
                w.writerow([f"pit_fitted:{pid}", y, _num(res.pit_pd[i, t])])
            for t, y in enumerate(years):
                d = exp.panel.rates[i, t]
                if not np.isnan(d):
                    w.writerow([f"observed:{pid}", y, _num(d)])
    if exp.sweep is not None:
        sw = exp.sweep
        mean = sw.mean()
        for i, pid in enumerate(ids):
            for s_idx, s in enumerate(sw.sizes):
                for r in range(sw.replications):
                    e = sw.estimates[s_idx, r, i]
                    if not np.isnan(e):
                        w.writerow([f"estimate:{pid}", s, _num(e)])
            for s_idx, s in enumerate(sw.sizes):
                w.writerow([f"mean:{pid}", s, _num(mean[s_idx, i])])
            for s in sw.sizes:
                w.writerow([f"truth:{pid}", s, _num(exp.true_ttc_pd[i])])
    return buf.getvalue()


def sweep_table_csv(exp: ExperimentResult) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["size", "replication", "portfolio_id", "estimate"])
    sw = exp.sweep
    for s_idx, s in enumerate(sw.sizes):
        for r in range(sw.replications):
            for i, pid in enumerate(sw.portfolio_ids):
                e = sw.estimates[s_idx, r, i]
                w.writerow([s, r, pid, "" if np.isnan(e) else _num(e)])
    return buf.getvalue()
