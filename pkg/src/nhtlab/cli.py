"""Experiment orchestration: ``nhtlab <experiment> --config <path>``.

Each experiment sweeps the configured h values, writes one CSV (first line
``# schema=1``) and ``summary.json`` with verdicts, and exits with 0 (all
verdicts pass), 1 (a verdict failed), 2 (configuration error) or 3 (a
numerical contract was violated inside the library).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import configfile
from .dynamics import (
    chart_from_config,
    expansion_rates,
    pinching_check,
    r_normal_check,
    udelta_contraction,
)
from .errors import ConfigError, NearSingularError, NHTLabError
from .gridquant import H_MAX, SmoothCutoff, make_grid
from .ladder import build_theta, build_window_B, default_probes, intertwine_residual, microlocal_correlation, transport_solve
from .measures import elliptic_mass, husimi, lipschitz_spread, propagation_defect, transverse_lipschitz, wavefront_mass_outside
from .model1d import assemble_witness, build_u0_f0, certified_lower_bound
from .spectral import (
    cutoff_resolvent_norm,
    gap_scan,
    resolvent_strip_sup,
    resonance_ladder,
    smallest_singular,
)

SCHEMA = 1
EXPERIMENTS = (
    "resonances",
    "gaps",
    "resolvent-map",
    "lower-bound",
    "ladder-check",
    "transport-check",
    "lyapunov",
    "measures",
)

# keys accepted in a config file, with defaults (as strings, parsed below)
DEFAULTS: dict[str, str] = {
    "experiment": "",
    "h": "0.05, 0.02",
    "margin": "1",
    "out": "",
    "workers": "",
    "anchors": "",
    "nu_min": "1",
    "nu_max": "1",
    "eps": "0.1",
    "m_max": "2",
    "rho": "1",
    "M": "4",
    "re_range": "-1, 1",
    "im_range": "-0.45, 0.1",
    "counts": "11, 5",
    "probes": "12",
    "depth": "4",
    "chart": "model",
    "delta": "0.5",
    "T": "10",
    "samples": "16",
    "seed": "0",
    "times": "0, 0.5, 1, 2, 4",
    "delta0": "0.05, 0.1, 0.2",
    "nbhd": "0.1",
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    hs: tuple[float, ...]
    margin: float = 1.0
    out: Path = Path("nhtlab-out")
    workers: int = 1
    anchors: Path | None = None
    nu_min: float = 1.0
    nu_max: float = 1.0
    eps: float = 0.1
    m_max: int = 2
    rho: float = 1.0
    M: float = 4.0
    re_range: tuple[float, float] = (-1.0, 1.0)
    im_range: tuple[float, float] = (-0.45, 0.1)
    counts: tuple[int, int] = (11, 5)
    probes: int = 12
    depth: int = 4
    chart: dict[str, str] = field(default_factory=lambda: {"chart": "model"})
    delta: float = 0.5
    T: float = 10.0
    samples: int = 16
    seed: int = 0
    times: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0, 4.0)
    delta0: tuple[float, ...] = (0.05, 0.1, 0.2)
    nbhd: float = 0.1

    @classmethod
    def from_mapping(cls, raw: dict[str, str], experiment: str | None = None, **overrides: Any) -> "ExperimentConfig":
        unknown = [k for k in raw if k not in DEFAULTS and not k.startswith("chart.")]
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        vals = {**DEFAULTS, **raw}
        name = experiment or vals["experiment"]
        if vals["experiment"] and experiment and vals["experiment"] != experiment:
            raise ConfigError(f"config names experiment {vals['experiment']!r} but {experiment!r} was requested")
        if name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
        hs = tuple(configfile.as_floats(vals["h"], "h"))
        if not hs:
            raise ConfigError("h list is empty")
        for h in hs:
            if not 0 < h <= H_MAX:
                raise ConfigError(f"h={h} outside (0, {H_MAX}]")
        pair = lambda key: tuple(configfile.as_floats(vals[key], key))  # noqa: E731
        re_range, im_range = pair("re_range"), pair("im_range")
        if len(re_range) != 2 or len(im_range) != 2:
            raise ConfigError("re_range and im_range need two numbers each")
        counts = tuple(int(c) for c in configfile.as_floats(vals["counts"], "counts"))
        if len(counts) != 2 or min(counts) < 1:
            raise ConfigError("counts needs two positive integers")
        margin = configfile.as_float(vals["margin"], "margin")
        if margin < 1:
            raise ConfigError("margin must be >= 1")
        workers = configfile.as_int(vals["workers"], "workers") if vals["workers"] else (os.cpu_count() or 1)
        chart = {k: v for k, v in vals.items() if k == "chart" or k.startswith("chart.")}
        cfg = dict(
            experiment=name,
            hs=hs,
            margin=margin,
            out=Path(vals["out"] or "nhtlab-out"),
            workers=max(1, workers),
            anchors=Path(vals["anchors"]) if vals["anchors"] else None,
            nu_min=configfile.as_float(vals["nu_min"], "nu_min"),
            nu_max=configfile.as_float(vals["nu_max"], "nu_max"),
            eps=configfile.as_float(vals["eps"], "eps"),
            m_max=configfile.as_int(vals["m_max"], "m_max"),
            rho=configfile.as_float(vals["rho"], "rho"),
            M=configfile.as_float(vals["M"], "M"),
            re_range=re_range,
            im_range=im_range,
            counts=counts,
            probes=configfile.as_int(vals["probes"], "probes"),
            depth=configfile.as_int(vals["depth"], "depth"),
            chart=chart,
            delta=configfile.as_float(vals["delta"], "delta"),
            T=configfile.as_float(vals["T"], "T"),
            samples=configfile.as_int(vals["samples"], "samples"),
            seed=configfile.as_int(vals["seed"], "seed"),
            times=tuple(configfile.as_floats(vals["times"], "times")),
            delta0=tuple(configfile.as_floats(vals["delta0"], "delta0")),
            nbhd=configfile.as_float(vals["nbhd"], "nbhd"),
        )
        cfg.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**cfg)

    @classmethod
    def load(cls, path: str | Path, experiment: str | None = None, **overrides: Any) -> "ExperimentConfig":
        return cls.from_mapping(configfile.load(path), experiment, **overrides)


@dataclass
class Table:
    name: str
    header: list[str]
    rows: list[list[Any]] = field(default_factory=list)


@dataclass
class Outcome:
    table: Table
    verdicts: dict[str, bool] = field(default_factory=dict)
    quantities: dict[str, float] = field(default_factory=dict)


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(table: Table, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / table.name
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _key(h: float, *parts: Any) -> str:
    return "/".join([f"h={h!r}", *map(str, parts)])


# per-h workers: each returns (rows, verdicts, quantities) for one h


def _resonances_h(cfg: ExperimentConfig, h: float):
    b = assemble_witness(make_grid(h, cfg.margin))
    rep = resonance_ladder(b, rho=cfg.rho, M=cfg.M)
    N = b.grid.N
    rows, verdicts, q = [], {}, {}
    for lam, res, band in zip(rep.eigenvalues, rep.residuals, rep.bands):
        rows.append([h, lam.real, lam.imag, lam.real / h, lam.imag / h, int(band), res, N])
    verdicts[_key(h, "residuals")] = bool(np.all(rep.residuals <= 1e-8))
    for m in range(min(cfg.m_max, 2) + 1):
        i = rep.band_member(m)
        verdicts[_key(h, f"band{m}")] = i is not None
        if i is not None:
            q[_key(h, f"band{m}", "re_over_h")] = float(rep.eigenvalues[i].real / h)
            q[_key(h, f"band{m}", "im_over_h")] = float(rep.eigenvalues[i].imag / h)
    return rows, verdicts, q


def _gaps_h(cfg: ExperimentConfig, h: float):
    b = assemble_witness(make_grid(h, cfg.margin))
    rep = resonance_ladder(b, rho=cfg.rho, M=cfg.M)
    N = b.grid.N
    rows, verdicts, q = [], {}, {}
    for v in gap_scan(rep, cfg.nu_min, cfg.nu_max, cfg.eps, cfg.m_max):
        empty = "not predicted" if not v.predicted else v.empty
        rows.append([h, v.m, v.lo, v.hi, empty, v.closest_im_over_h, N])
        if v.predicted:
            verdicts[_key(h, f"strip{v.m}")] = bool(v.empty)
            if v.closest_im_over_h is not None:
                q[_key(h, f"strip{v.m}", "closest")] = v.closest_im_over_h
    return rows, verdicts, q


def _resolvent_h(cfg: ExperimentConfig, h: float):
    b = assemble_witness(make_grid(h, cfg.margin))
    s = resolvent_strip_sup(b, h, cfg.re_range, cfg.im_range, cfg.counts)
    N = b.grid.N
    rows = [[h, smp.lam.real / h, smp.lam.imag / h, smp.sigma_min, smp.norm, N] for smp in s.samples]
    verdicts = {_key(h, "no_pole"): not s.gap_violation}
    q = {_key(h, "h2_sup"): h * h * s.sup}
    return rows, verdicts, q


def _invertible_at_zero(cfg: ExperimentConfig, h: float):
    """Bundle whose P - iQ is invertible at 0; an accidental resonance there moves h by 1%."""
    for h_used in (h, 1.01 * h):
        b = assemble_witness(make_grid(h_used, cfg.margin))
        s = smallest_singular(b, 0.0)
        if not s.at_pole:
            return b, s, h_used
    raise NearSingularError(f"P - iQ singular at 0 for h={h} and h={1.01 * h}")


def _lower_bound_h(cfg: ExperimentConfig, h: float):
    b, s, h_used = _invertible_at_zero(cfg, h)
    ra = cutoff_resolvent_norm(b, 0.0)
    cert = certified_lower_bound(b, resolvent_norm=s.norm)
    ratio = ra * h_used / math.sqrt(math.log(1 / h_used))
    rows = [[h, ra, cert, ratio, b.grid.N]]
    verdicts = {_key(h, "certified_third"): cert >= ra / 3}
    q = {_key(h, "cutoff_norm"): ra, _key(h, "certified"): cert}
    if h_used != h:
        q[_key(h, "h_adjusted")] = h_used
    return rows, verdicts, q


def _ladder_h(cfg: ExperimentConfig, h: float):
    b = assemble_witness(make_grid(h, cfg.margin))
    g = b.grid
    Th = build_theta(g)
    probes = default_probes(g, cfg.probes, cfg.seed)
    rows, verdicts, q = [], {}, {}
    for m in range(cfg.depth + 1):
        r = intertwine_residual(g, b.P, Th, m, probes)
        rows.append([h, "intertwine_residual", m, r, g.N])
        verdicts[_key(h, f"intertwine{m}")] = r <= 1e-8
    rep = resonance_ladder(b)
    i0, i1 = rep.band_member(0), rep.band_member(1)
    if i0 is None or i1 is None:
        verdicts[_key(h, "bands_found")] = False
        return rows, verdicts, q
    B = build_window_B(g)
    v0, v1 = rep.vectors[:, i0], rep.vectors[:, i1]
    corr = microlocal_correlation(g, B, Th @ v1, v0)
    ratio = g.norm(B @ (Th @ v0)) / g.norm(B @ v0)
    rows.append([h, "band1_to_band0_correlation", 1, corr, g.N])
    rows.append([h, "band0_annihilation_ratio", 0, ratio, g.N])
    verdicts[_key(h, "correlation")] = corr >= 0.9
    verdicts[_key(h, "annihilation")] = ratio <= 0.2
    q[_key(h, "correlation")] = corr
    return rows, verdicts, q


def _measures_h(cfg: ExperimentConfig, h: float):
    b = assemble_witness(make_grid(h, cfg.margin))
    g = b.grid
    u0, _ = build_u0_f0(g, b.profile)
    wf = wavefront_mass_outside(husimi(g, u0 / g.norm(u0)), cfg.nbhd)
    rep = resonance_ladder(b)
    i0 = rep.band_member(0)
    rows = [[h, "wavefront_mass_outside", cfg.nbhd, wf, g.N]]
    verdicts = {_key(h, "wavefront"): wf <= 0.05}
    q = {_key(h, "wavefront"): wf}
    if i0 is None:
        verdicts[_key(h, "band0_found")] = False
        return rows, verdicts, q
    v0 = rep.vectors[:, i0] / g.norm(rep.vectors[:, i0])
    window = SmoothCutoff.symmetric(cfg.delta, 1.5 * cfg.delta)
    defect = propagation_defect(g, v0, b.P, None, rep.eigenvalues[i0], lambda x, xi: window(x) * window(xi))
    rows.append([h, "propagation_defect", cfg.delta, defect, g.N])
    verdicts[_key(h, "propagation")] = defect <= 1e-3
    dens = husimi(g, v0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lip = transverse_lipschitz(dens, cfg.delta0, delta=cfg.delta)
    for r in lip:
        rows.append([h, "lipschitz_ratio", r.delta0, r.ratio, g.N])
    spread = lipschitz_spread(lip)
    verdicts[_key(h, "lipschitz")] = spread <= 2.0
    ell = elliptic_mass(dens, 0.2, cfg.delta)
    rows.append([h, "elliptic_mass", 0.2, ell, g.N])
    verdicts[_key(h, "elliptic")] = ell <= 0.05
    q[_key(h, "lipschitz_spread")] = spread
    return rows, verdicts, q


PER_H: dict[str, tuple[str, list[str], Callable]] = {
    "resonances": (
        "resonances.csv",
        ["h", "re_lambda", "im_lambda", "re_over_h", "im_over_h", "band", "residual", "N"],
        _resonances_h,
    ),
    "gaps": ("gaps.csv", ["h", "m", "strip_lo", "strip_hi", "empty", "closest_eig_im_over_h", "N"], _gaps_h),
    "resolvent-map": ("resolvent.csv", ["h", "re_over_h", "im_over_h", "sigma_min", "norm", "N"], _resolvent_h),
    "lower-bound": ("lowerbound.csv", ["h", "cutoff_norm", "certified", "ratio_sqrtlog", "N"], _lower_bound_h),
    "ladder-check": ("ladder.csv", ["h", "quantity", "m", "value", "N"], _ladder_h),
    "measures": ("measures.csv", ["h", "quantity", "parameter", "value", "N"], _measures_h),
}


def _run_task(args):
    cfg, h = args
    return PER_H[cfg.experiment][2](cfg, h)


def _sweep(cfg: ExperimentConfig) -> Outcome:
    name, header, _ = PER_H[cfg.experiment]
    hs = sorted(set(cfg.hs), reverse=True)
    tasks = [(cfg, h) for h in hs]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(tasks))) as ex:
            parts = list(ex.map(_run_task, tasks))
    else:
        parts = [_run_task(t) for t in tasks]
    out = Outcome(Table(name, header))
    for rows, verdicts, q in parts:
        out.table.rows.extend(rows)
        out.verdicts.update(verdicts)
        out.quantities.update(q)
    _sweep_verdicts(cfg, hs, out)
    return out


def _sweep_verdicts(cfg: ExperimentConfig, hs: list[float], out: Outcome) -> None:
    """Verdicts comparing values across the h sweep (hs in decreasing order)."""
    if cfg.experiment == "resolvent-map" and len(hs) > 1:
        vals = [out.quantities[_key(h, "h2_sup")] for h in hs]
        out.verdicts["h2_sup_decreasing"] = all(b < a for a, b in zip(vals, vals[1:]))
    if cfg.experiment == "lower-bound" and len(hs) > 1:
        ratios = [row[3] for row in out.table.rows]
        out.verdicts["ratio_sqrtlog_band"] = max(ratios) / min(ratios) <= 3.0
    if cfg.experiment == "resonances" and len(hs) > 1:
        dev = []
        for h in hs:
            k = _key(h, "band0", "im_over_h")
            if k in out.quantities:
                dev.append(abs(out.quantities[k] + 0.5) + abs(out.quantities[_key(h, "band0", "re_over_h")]))
        out.verdicts["band0_converging"] = len(dev) == len(hs) and all(b <= a for a, b in zip(dev, dev[1:]))


def _chart_label(chart) -> str:
    params = ";".join(f"{k}={v}" for k, v in sorted(chart.params.items()))
    return f"{chart.name}({params})" if params else chart.name


def _transport(cfg: ExperimentConfig) -> Outcome:
    chart = chart_from_config(cfg.chart)
    out = Outcome(Table("transport.csv", ["chart", "case", "value"]))
    rates = expansion_rates(chart, cfg.T, cfg.samples, cfg.seed)
    n = 9
    rng = np.random.default_rng(cfg.seed)
    base = chart.k_sampler(n, rng)
    base[:, 0] = np.linspace(-0.9, 0.9, n) * cfg.delta
    c = chart.c_plus_exact or (lambda z: chart.c_plus(z))

    def u_star(z):
        return np.cos(z[..., 0])

    def f_star(z):
        x = z[..., 0]
        return c(z) * (np.cos(x) - x * np.sin(x))

    res = transport_solve(chart, f_star, base, rates.nu_min, rates.nu_max)
    err = float(np.max(np.abs(res.values - u_star(base))))
    f1 = lambda z: np.sin(z[..., 0]) + 1.0  # noqa: E731
    f2 = lambda z: z[..., 0] ** 2  # noqa: E731
    ua = transport_solve(chart, lambda z: f1(z) + 2 * f2(z), base, rates.nu_min, rates.nu_max).values
    ub = transport_solve(chart, f1, base, rates.nu_min, rates.nu_max).values
    uc = transport_solve(chart, f2, base, rates.nu_min, rates.nu_max).values
    lin = float(np.max(np.abs(ua - ub - 2 * uc)))
    name = _chart_label(chart)
    out.table.rows += [[name, "manufactured_error", err], [name, "linearity_defect", lin]]
    out.verdicts["manufactured"] = err <= 1e-6
    out.verdicts["linearity"] = lin <= 1e-10
    out.quantities["manufactured_error"] = err
    return out


def _lyapunov(cfg: ExperimentConfig) -> Outcome:
    chart = chart_from_config(cfg.chart)
    rates = expansion_rates(chart, cfg.T, cfg.samples, cfg.seed)
    name = _chart_label(chart)
    out = Outcome(Table("lyapunov.csv", ["chart", "nu_min", "nu_max", "mu_max", "T"]))
    out.table.rows.append([name, rates.nu_min, rates.nu_max, rates.mu_max, rates.T])
    out.quantities.update(nu_min=rates.nu_min, nu_max=rates.nu_max, mu_max=rates.mu_max)
    for m in range(4):
        v = pinching_check(rates, m)
        out.quantities[f"pinching_margin_m{m}"] = v.margin
        out.quantities[f"pinching_m{m}"] = float(v.ok)
    out.quantities["r_normal_r1"] = float(r_normal_check(rates, 1))
    table = udelta_contraction(chart, cfg.delta, cfg.times, rates.nu_min, samples=cfg.samples, seed=cfg.seed)
    out.verdicts["udelta_contraction"] = all(r.ok for r in table)
    return out


def execute(cfg: ExperimentConfig) -> Outcome:
    if cfg.experiment in PER_H:
        return _sweep(cfg)
    if cfg.experiment == "transport-check":
        return _transport(cfg)
    return _lyapunov(cfg)


def compare_anchors(quantities: dict[str, float], anchor_path: str | Path) -> dict[str, dict[str, Any]]:
    """Relative deviation of each quantity from a frozen anchor file.

    The anchor file is JSON: {"schema": 1, "quantities": {key: {"value": v,
    "tol": t}}}.  Keys absent from the anchor are reported as "new".
    Raises ConfigError on an unreadable file or schema mismatch.
    """
    try:
        data = json.loads(Path(anchor_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read anchors {anchor_path}: {exc}") from exc
    if not isinstance(data, dict) or data.get("schema") != SCHEMA or not isinstance(data.get("quantities"), dict):
        raise ConfigError(f"anchor schema mismatch in {anchor_path}")
    anchors = data["quantities"]
    report: dict[str, dict[str, Any]] = {}
    for key, value in sorted(quantities.items()):
        if key not in anchors:
            report[key] = {"status": "new", "value": value}
            continue
        entry = anchors[key]
        ref, tol = (entry["value"], entry.get("tol", 1e-6)) if isinstance(entry, dict) else (entry, 1e-6)
        dev = abs(value - ref) / max(abs(ref), 1e-300) if ref != value else 0.0
        report[key] = {"status": "ok" if dev <= tol else "fail", "value": value, "anchor": ref, "deviation": dev, "tol": tol}
    for key in sorted(set(anchors) - set(quantities)):
        report[key] = {"status": "missing"}
    return report


def freeze_anchors(quantities: dict[str, float], path: str | Path, tol: float = 1e-6) -> None:
    data = {"schema": SCHEMA, "quantities": {k: {"value": v, "tol": tol} for k, v in sorted(quantities.items())}}
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def run(cfg: ExperimentConfig) -> int:
    """Execute the experiment and write its artifacts; return the exit code."""
    try:
        outcome = execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NHTLabError as exc:
        _write_summary(cfg, None, error=f"{type(exc).__name__}: {exc}")
        print(f"numerical contract failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    write_csv(outcome.table, cfg.out)
    anchor_report = None
    if cfg.anchors is not None:
        try:
            anchor_report = compare_anchors(outcome.quantities, cfg.anchors)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        outcome.verdicts["anchors"] = all(r["status"] in ("ok", "new") for r in anchor_report.values())
    _write_summary(cfg, outcome, anchors=anchor_report)
    passed = all(outcome.verdicts.values())
    for key, ok in outcome.verdicts.items():
        if not ok:
            print(f"verdict failed: {key}", file=sys.stderr)
    return 0 if passed else 1


def _write_summary(cfg: ExperimentConfig, outcome: Outcome | None, error: str | None = None, anchors=None) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    conf = {k: (str(v) if isinstance(v, Path) else v) for k, v in asdict(cfg).items() if k not in ("out", "workers")}
    summary: dict[str, Any] = {"schema": SCHEMA, "experiment": cfg.experiment, "config": conf}
    if outcome is not None:
        summary["verdicts"] = outcome.verdicts
        summary["quantities"] = outcome.quantities
        summary["pass"] = all(outcome.verdicts.values())
    if error is not None:
        summary["error"] = error
        summary["pass"] = False
    if anchors is not None:
        summary["anchors"] = anchors
    (cfg.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="nhtlab", description="Resonance and trapping experiments for the model operator.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="key = value configuration file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--workers", type=int, help="parallel workers over h values")
    parser.add_argument("--anchors", help="anchor JSON to compare against")
    parser.add_argument("--freeze-anchors", help="write the run's quantities as a new anchor file")
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.load(
            args.config,
            args.experiment,
            out=Path(args.out) if args.out else None,
            workers=args.workers,
            anchors=Path(args.anchors) if args.anchors else None,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    code = run(cfg)
    if args.freeze_anchors and code in (0, 1):
        summary = json.loads((cfg.out / "summary.json").read_text())
        freeze_anchors(summary.get("quantities", {}), args.freeze_anchors)
    return code


if __name__ == "__main__":
    sys.exit(main())
