"""Batch front-end: JSON config in, CSV/JSON reports and figures out.

Commands: ``bands``, ``quasimomentum``, ``count``, ``asymptotics``,
``validate``.  Every command takes ``--config`` (JSON, schema documented in
the README) and ``--out``; without ``--out`` the delimited report goes to
stdout and no figure is rendered.  Figures land next to the output file
with a ``.png`` suffix (``--no-plot`` disables them).

Exit codes: 0 success, 2 config error, 3 numerical warnings were raised,
4 precondition failure (for example a scale below c0 or a window that is
not inside a spectral gap).  Identical configs produce byte-identical
delimited output: all step sizes and refinement rules are fixed functions
of the config.

The environment variable DIRAC_GAP_LOG in {quiet, info, debug} controls
log verbosity.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import ConfigError, DiracGapError, PreconditionError
from .params import DEFAULT_PARAMS, NumericParams
from .potentials import (
    DiracSystem,
    PeriodicPotential,
    PerturbationTemplate,
    validate_template,
)
from .floquet import band_edges, discriminant_grid, rotation_numbers
from .counting import (
    BoundaryCondition,
    count_length_sweep,
    count_halfline,
    count_interval,
    plan_truncation,
)
from .asymptotics import convergence_experiment
from . import plotting

log = logging.getLogger("diracgap")

_MISSING = object()


def _fmt(x) -> str:
    """Deterministic CSV cell: shortest round-trip float representation."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class Cfg:
    """Dict wrapper that reports dotted paths in error messages."""

    def __init__(self, node, path: str = "config"):
        if not isinstance(node, dict):
            raise ConfigError(f"{path} must be an object")
        self.node = node
        self.path = path

    def child(self, key: str, default=_MISSING) -> "Cfg":
        val = self.node.get(key, _MISSING)
        if val is _MISSING:
            if default is _MISSING:
                raise ConfigError(f"missing required section '{self.path}.{key}'")
            val = default
        return Cfg(val, f"{self.path}.{key}")

    def has(self, key: str) -> bool:
        return key in self.node

    def req(self, key: str, kind):
        val = self.node.get(key, _MISSING)
        if val is _MISSING:
            raise ConfigError(f"missing required key '{self.path}.{key}'")
        return self._check(key, val, kind)

    def opt(self, key: str, kind, default):
        val = self.node.get(key, _MISSING)
        if val is _MISSING or val is None:
            return default
        return self._check(key, val, kind)

    def _check(self, key, val, kind):
        if kind is float:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"'{self.path}.{key}' must be a number")
            return float(val)
        if kind is int:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"'{self.path}.{key}' must be an integer")
            return int(val)
        if kind is str:
            if not isinstance(val, str):
                raise ConfigError(f"'{self.path}.{key}' must be a string")
            return val
        if kind is list:
            if not isinstance(val, list):
                raise ConfigError(f"'{self.path}.{key}' must be an array")
            return val
        raise AssertionError(kind)


def build_potential(cfg: Cfg) -> PeriodicPotential:
    kind = cfg.req("kind", str)
    sup = cfg.opt("sup_norm", float, None)
    try:
        if kind == "piecewise":
            segs = cfg.req("segments", list)
            pot = PeriodicPotential.piecewise(
                [(float(L), float(v)) for L, v in segs], sup_norm=sup)
            period = cfg.opt("period", float, pot.period)
            if abs(period - pot.period) > 1e-9 * pot.period:
                raise ConfigError(
                    f"'{cfg.path}.period' disagrees with the segment lengths")
            return pot
        if kind == "cosine":
            return PeriodicPotential.cosine(
                [(int(f), float(a)) for f, a in cfg.req("terms", list)],
                period=cfg.req("period", float), sup_norm=sup)
        if kind == "samples":
            return PeriodicPotential.from_samples(
                [float(v) for v in cfg.req("values", list)],
                period=cfg.req("period", float), sup_norm=sup)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid potential at '{cfg.path}': {exc}") from exc
    raise ConfigError(f"'{cfg.path}.kind' must be piecewise, cosine or samples")


def build_system(cfg: Cfg) -> tuple[DiracSystem, float]:
    mass = cfg.req("mass", float)
    pot = build_potential(cfg.child("potential"))
    coupling = cfg.opt("coupling", float, 0.0)
    try:
        return DiracSystem(mass=mass, potential=pot), coupling
    except ValueError as exc:
        raise ConfigError(f"invalid system at '{cfg.path}': {exc}") from exc


def build_template(cfg: Cfg) -> PerturbationTemplate:
    kind = cfg.req("kind", str)
    try:
        if kind == "inverse_power":
            return PerturbationTemplate.inverse_power(cfg.req("beta", float))
        if kind == "table":
            return PerturbationTemplate.from_table(
                [float(v) for v in cfg.req("rho", list)],
                [float(v) for v in cfg.req("values", list)])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid template at '{cfg.path}': {exc}") from exc
    raise ConfigError(f"'{cfg.path}.kind' must be inverse_power or table")


def build_params(cfg: Cfg) -> NumericParams:
    return DEFAULT_PARAMS.with_(
        steps_per_period=cfg.opt("steps_per_period", int,
                                 DEFAULT_PARAMS.steps_per_period),
        edge_scan_per_unit=cfg.opt("edge_scan_per_unit", int,
                                   DEFAULT_PARAMS.edge_scan_per_unit),
        anchor_periods=cfg.opt("anchor_periods", int,
                               DEFAULT_PARAMS.anchor_periods),
        quad_panels=cfg.opt("quadrature_panels", int, DEFAULT_PARAMS.quad_panels),
        quad_rel_tol=cfg.opt("quadrature_rel_tol", float,
                             DEFAULT_PARAMS.quad_rel_tol),
        support_scan_points=cfg.opt("support_scan", int,
                                    DEFAULT_PARAMS.support_scan_points),
    )


def read_window(cfg: Cfg, need_margin: bool):
    lam1 = cfg.req("lambda1", float)
    lam2 = cfg.req("lambda2", float)
    if lam2 < lam1:
        raise ConfigError(f"'{cfg.path}': lambda1 must not exceed lambda2")
    margin = (cfg.req("gap_margin", float) if need_margin
              else cfg.opt("gap_margin", float, None))
    return lam1, lam2, margin


def read_grid(cfg: Cfg) -> np.ndarray:
    lo = cfg.req("lo", float)
    hi = cfg.req("hi", float)
    n = cfg.req("n", int)
    if n < 0 or (n > 1 and hi <= lo):
        raise ConfigError(f"'{cfg.path}': need n >= 0 and hi > lo")
    return np.linspace(lo, hi, n)


def _write_rows(out: str | None, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    data = buf.getvalue()
    if out is None:
        sys.stdout.write(data)
    else:
        Path(out).write_text(data, encoding="ascii")
        log.info("wrote %s", out)


def _write_json(out: str | None, payload: dict) -> None:
    data = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(data)
    else:
        Path(out).write_text(data, encoding="ascii")
        log.info("wrote %s", out)


def _plot_path(out: str) -> str:
    return str(Path(out).with_suffix(".png"))


def _band_window(lams: np.ndarray) -> tuple[float, float]:
    lo, hi = float(lams.min()), float(lams.max())
    pad = max(1e-3 * (hi - lo), 1e-3)
    return lo - pad, hi + pad


def cmd_bands(cfg: Cfg, out, plot: bool) -> list[str]:
    sys_, l = build_system(cfg.child("system"))
    params = build_params(cfg.child("numeric", {}))
    lams = read_grid(cfg.child("experiment").child("lambda_grid"))
    header = ["lambda", "D", "k", "in_band"]
    if lams.size == 0:
        _write_rows(out, header, [])
        return []
    bands = band_edges(sys_, l, _band_window(lams), params)
    disc = discriminant_grid(sys_, lams, l, params)
    ks = bands.k_grid(lams, disc=disc)
    rows = [(lam, d, k, int(abs(d) <= 2.0))
            for lam, d, k in zip(lams, disc, ks)]
    _write_rows(out, header, rows)
    if out and plot:
        plotting.plot_bands(lams, disc, ks, np.abs(disc) <= 2.0, _plot_path(out))
        log.info("wrote %s", _plot_path(out))
    return list(bands.warnings)


def cmd_quasimomentum(cfg: Cfg, out, plot: bool) -> list[str]:
    sys_, l = build_system(cfg.child("system"))
    params = build_params(cfg.child("numeric", {}))
    exp = cfg.child("experiment")
    lams = read_grid(exp.child("lambda_grid"))
    rot_periods = exp.opt("rotation_periods", int, 0)
    header = ["lambda", "k"] + (["rotation"] if rot_periods > 0 else [])
    if lams.size == 0:
        _write_rows(out, header, [])
        return []
    bands = band_edges(sys_, l, _band_window(lams), params)
    ks = bands.k_grid(lams)
    rot = (rotation_numbers(sys_, lams, l, rot_periods, params)
           if rot_periods > 0 else None)
    rows = ([(lam, k, r) for lam, k, r in zip(lams, ks, rot)] if rot is not None
            else [(lam, k) for lam, k in zip(lams, ks)])
    _write_rows(out, header, rows)
    if out and plot:
        plotting.plot_quasimomentum(lams, ks, _plot_path(out), rotation=rot)
        log.info("wrote %s", _plot_path(out))
    return list(bands.warnings)


def cmd_count(cfg: Cfg, out, plot: bool, threads: int) -> list[str]:
    sys_, l = build_system(cfg.child("system"))
    params = build_params(cfg.child("numeric", {}))
    lam1, lam2, margin = read_window(cfg.child("window"), need_margin=False)
    exp = cfg.child("experiment")
    mode = exp.req("mode", str)
    warnings: list[str] = []

    if mode == "interval":
        a = exp.opt("a", float, 0.0)
        bc_l = BoundaryCondition(exp.opt("bc_left", float, 0.0))
        bc_r = BoundaryCondition(exp.opt("bc_right", float, 0.0))
        if exp.has("lengths"):
            lengths = [float(v) for v in exp.req("lengths", list)]
            rows_ = count_length_sweep(sys_, l, bc_l, lam1, lam2, lengths,
                                     a0=a, params=params)
            results = [(r.length, r.result) for r in rows_]
        else:
            b = exp.req("b", float)
            res = count_interval(sys_, a, b, bc_l, bc_r, lam1, lam2, l, params)
            results = [(b - a, res)]
        header = ["length", "lambda1", "lambda2", "N", "N_per_length",
                  "error_budget"]
        rows = [(L, lam1, lam2, r.n, r.n / L, r.error_budget)
                for L, r in results]
        for _, r in results:
            warnings.extend(r.warnings)
        _write_rows(out, header, rows)
        if out and plot:
            plotting.plot_count_interval([L for L, _ in results],
                                         [r.n for _, r in results],
                                         [r.n / L for L, r in results],
                                         _plot_path(out))
            log.info("wrote %s", _plot_path(out))
        return warnings

    if mode == "halfline":
        if margin is None:
            raise ConfigError("'config.window.gap_margin' is required for "
                              "half-line counting")
        template = build_template(cfg.child("template"))
        cs = [float(v) for v in exp.req("c_list", list)]
        inner = exp.opt("inner_bc", float, None)
        outer = exp.opt("outer_bc", float, None)
        plan = plan_truncation(sys_, template, lam1, lam2, margin,
                               outer_margin=exp.opt("outer_margin", float, 4.0),
                               params=params)
        inner_bc = BoundaryCondition(inner) if inner is not None else None
        outer_bc = BoundaryCondition(outer) if outer is not None else None

        def one(c: float):
            return count_halfline(sys_, template, c, lam1, lam2, plan,
                                  inner_bc=inner_bc, outer_bc=outer_bc,
                                  params=params)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one, cs))
        else:
            results = [one(c) for c in cs]
        header = ["c", "lambda1", "lambda2", "N", "error_budget",
                  "r_inner", "r_outer"]
        rows = [(r.c, r.lam1, r.lam2, r.n, r.error_budget, r.r_inner, r.r_outer)
                for r in results]
        for r in results:
            warnings.extend(r.warnings)
        _write_rows(out, header, rows)
        if out and plot:
            plotting.plot_count_halfline(cs, [r.n for r in results],
                                         _plot_path(out))
            log.info("wrote %s", _plot_path(out))
        return warnings

    raise ConfigError("'config.experiment.mode' must be interval or halfline")


def cmd_asymptotics(cfg: Cfg, out, plot: bool, threads: int) -> list[str]:
    sys_, _ = build_system(cfg.child("system"))
    template = build_template(cfg.child("template"))
    params = build_params(cfg.child("numeric", {}))
    lam1, lam2, margin = read_window(cfg.child("window"), need_margin=True)
    exp = cfg.child("experiment")
    cs = [float(v) for v in exp.req("c_list", list)]
    search = exp.opt("support_search", list, [1e-2, 1e2])
    band = exp.opt("acceptance_band", list, [0.85, 1.15])
    inner = exp.opt("inner_bc", float, None)
    outer = exp.opt("outer_bc", float, None)
    report = convergence_experiment(
        sys_, template, lam1, lam2, cs, gap_margin=margin,
        search=(float(search[0]), float(search[1])), params=params,
        acceptance_band=(float(band[0]), float(band[1])),
        inner_bc=BoundaryCondition(inner) if inner is not None else None,
        outer_bc=BoundaryCondition(outer) if outer is not None else None,
        outer_margin=exp.opt("outer_margin", float, 4.0),
        workers=threads)

    pred = report.prediction
    header = ["c", "N", "N_over_c", "predicted", "ratio", "budget_over_c"]
    rows = [(r.c, r.count.n, r.n_over_c, pred.value, r.ratio(pred.value),
             r.budget_over_c) for r in report.rows]
    _write_rows(out, header, rows)

    summary = {
        "predicted_density": pred.value,
        "quadrature_error": pred.error_estimate,
        "quadrature_nodes": pred.nodes,
        "support": list(pred.support) if pred.support else None,
        "plan": {
            "rho0": report.plan.rho0,
            "P0": report.plan.P0,
            "outer_margin": report.plan.outer_margin,
            "threshold": report.plan.threshold,
            "c0": report.plan.c0,
            "delta_inf": report.plan.delta_inf,
        },
        "rows": [{"c": r.c, "N": r.count.n, "N_over_c": r.n_over_c,
                  "ratio": r.ratio(pred.value),
                  "budget_over_c": r.budget_over_c} for r in report.rows],
        "failures": [{"c": c, "error": msg} for c, msg in report.failures],
        "warnings": list(pred.warnings),
    }
    if report.verdict is not None:
        summary["verdict"] = report.verdict
    _write_json(str(Path(out).with_suffix(".json")) if out else None, summary)

    if out and plot:
        plotting.plot_convergence([r.c for r in report.rows],
                                  [r.n_over_c for r in report.rows],
                                  [r.ratio(pred.value) for r in report.rows],
                                  pred.value, band, _plot_path(out))
        log.info("wrote %s", _plot_path(out))
    warnings = list(pred.warnings)
    warnings.extend(f"scale c={c} failed: {msg}" for c, msg in report.failures)
    for r in report.rows:
        warnings.extend(r.count.warnings)
    return warnings


def cmd_validate(cfg: Cfg, out) -> list[str]:
    template = build_template(cfg.child("template"))
    exp = cfg.child("experiment", {})
    rho_min = exp.opt("rho_min", float, 1e-4)
    rho_hat = exp.opt("rho_hat", float, 1.0)
    try:
        rep = validate_template(template, rho_min, rho_hat)
        h_check = {"passes": rep.passes, "C_estimate": rep.C_estimate,
                   "refinement": list(rep.refinement)}
    except ValueError as exc:
        h_check = {"passes": False, "error": str(exc)}

    gap_check = None
    if cfg.has("system") and cfg.has("window"):
        sys_, _ = build_system(cfg.child("system"))
        params = build_params(cfg.child("numeric", {}))
        lam1, lam2, margin = read_window(cfg.child("window"), need_margin=False)
        margin = margin or 0.0
        pad = margin + 0.25 * (lam2 - lam1) + 0.05
        bands = band_edges(sys_, 0.0, (lam1 - pad, lam2 + pad), params,
                           anchor=False)
        gap = bands.gap_containing(lam1 - margin, lam2 + margin)
        gap_check = {
            "ok": gap is not None,
            "gap": None if gap is None else [gap.lo, gap.hi],
            "window": [lam1, lam2],
            "gap_margin": margin,
        }
    payload = {"h_check": h_check}
    if gap_check is not None:
        payload["gap_check"] = gap_check
    _write_json(out, payload)
    return []


def _setup_logging() -> None:
    level = os.environ.get("DIRAC_GAP_LOG", "info").strip().lower()
    levels = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(message)s")
    log.setLevel(levels.get(level, logging.INFO))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diracgap",
        description="Band structure, quasimomentum and gap eigenvalue counts "
                    "for perturbed periodic one-dimensional Dirac systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
            ("bands", "export lambda, D, k, in_band over a lambda grid"),
            ("quasimomentum", "export the quasimomentum over a lambda grid"),
            ("count", "eigenvalue counts on intervals or the truncated half-line"),
            ("asymptotics", "N(c)/c sweep against the predicted gap density"),
            ("validate", "template decay check and window gap-containment check")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None,
                       help="output path (CSV or JSON); stdout when omitted")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for independent sweep items")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved; all computation is deterministic")
        p.add_argument("--no-plot", action="store_true",
                       help="skip rendering the figure next to the output")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        raw = json.loads(Path(args.config).read_text())
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return 2
    except json.JSONDecodeError as exc:
        log.error("config is not valid JSON: %s", exc)
        return 2
    cfg = Cfg(raw)
    plot = not args.no_plot
    try:
        if args.command == "bands":
            warnings = cmd_bands(cfg, args.out, plot)
        elif args.command == "quasimomentum":
            warnings = cmd_quasimomentum(cfg, args.out, plot)
        elif args.command == "count":
            warnings = cmd_count(cfg, args.out, plot, args.threads)
        elif args.command == "asymptotics":
            warnings = cmd_asymptotics(cfg, args.out, plot, args.threads)
        else:
            warnings = cmd_validate(cfg, args.out)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except PreconditionError as exc:
        log.error("precondition failure: %s", exc)
        return 4
    except DiracGapError as exc:
        log.error("numerical failure: %s", exc)
        return 3
    if warnings:
        for w in warnings:
            log.warning("%s", w)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
