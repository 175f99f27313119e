"""Command-line front end.

One invocation parses a run configuration (flags, optionally merged
over a flat key=value file), executes a single subcommand, writes a
self-describing CSV (the merged configuration is echoed as '#' lines
above the header), optionally renders a plot from that CSV, and prints
one summary line per check: PASS/FAIL with a margin, or INFO.

Exit codes: 0 when every check passes or is informational, 1 when any
check FAILs, 2 on a usage error (unknown key, malformed value, missing
seed, bad parameters).
"""

from __future__ import annotations

import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from . import csvio, plots
from .disorder import DisorderLaw, log_mgf, sample
from .engine import ModelParams, backward_table, contact_profile, forward_table
from .estimators import (correlation_lengths, critical_contact_fraction,
                         gap_statistics, locate_critical_point, mu_estimate,
                         quenched_free_energy)
from .experiments import (ScanGrid, harris_scan, irrelevance_window_check,
                          marginal_case_diagnostic, smoothing_check)
from .homogeneous import (annealed_free_energy, fit_specific_heat_exponent,
                          solve_free_energy)
from .kernels import build_kernel, renewal_mass

SUBCOMMANDS = ("kernel", "homog", "homog-exponent", "engine", "fe", "mu",
               "hc", "corr", "gaps", "critfss", "experiment")
EXPERIMENTS = ("harris", "smoothing", "irrelevance", "marginal")


class UsageError(Exception):
    """Bad invocation: reported on stderr with exit code 2."""


def _parse_float(token: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise UsageError(f"malformed number {token!r}") from None


def _parse_int(token: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise UsageError(f"malformed integer {token!r}") from None


def _parse_floats(token: str) -> tuple[float, ...]:
    return tuple(_parse_float(t) for t in token.split(",") if t != "")


def _parse_ints(token: str) -> tuple[int, ...]:
    return tuple(_parse_int(t) for t in token.split(",") if t != "")


def _parse_bool(token: str) -> bool:
    if token in ("true", "1", "yes"):
        return True
    if token in ("false", "0", "no"):
        return False
    raise UsageError(f"malformed boolean {token!r}")


# every accepted configuration key, with its value parser
KEY_PARSERS = {
    "kernel.kind": str,
    "kernel.alpha": _parse_float,
    "kernel.rate": _parse_float,
    "kernel.sigma": _parse_float,
    "kernel.n_max": _parse_int,
    "law": str,
    "beta": _parse_float,
    "h": _parse_float,
    "delta": _parse_float,
    "epsilon": _parse_float,
    "threshold": _parse_float,
    "beta_grid": _parse_floats,
    "delta_grid": _parse_floats,
    "h_grid": _parse_floats,
    "N": _parse_int,
    "N_grid": _parse_ints,
    "k_min": _parse_int,
    "k_max": _parse_int,
    "replicas": _parse_int,
    "seed": _parse_int,
    "out": str,
    "plot": _parse_bool,
}

# flags are the keys with dots swapped for dashes; a few get shorter names
FLAG_TO_KEY = {f"--{key.replace('.', '-').replace('_', '-')}": key
               for key in KEY_PARSERS}
FLAG_TO_KEY["--kernel"] = "kernel.kind"
FLAG_TO_KEY["--alpha"] = "kernel.alpha"
FLAG_TO_KEY["--rate"] = "kernel.rate"
FLAG_TO_KEY["--sigma"] = "kernel.sigma"
FLAG_TO_KEY["--n-max"] = "kernel.n_max"


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """One fully merged invocation: subcommand plus every setting."""

    subcommand: str
    experiment: str | None
    settings: tuple[tuple[str, object], ...]  # sorted (key, parsed value)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")
        if self.get("seed") is None:
            raise UsageError("missing required key 'seed' "
                             "(seeds are always explicit)")

    def get(self, key: str, default=None):
        for name, value in self.settings:
            if name == key:
                return value
        return default

    def require(self, *keys: str):
        missing = [k for k in keys if self.get(k) is None]
        if missing:
            raise UsageError(f"{self.subcommand} needs "
                             + ", ".join(repr(k) for k in missing))
        values = tuple(self.get(k) for k in keys)
        return values[0] if len(values) == 1 else values

    def echo_lines(self) -> tuple[str, ...]:
        lines = [f"subcommand={self.subcommand}"]
        if self.experiment is not None:
            lines.append(f"experiment={self.experiment}")
        for key, value in self.settings:
            if isinstance(value, tuple):
                text = ",".join(format(v, ".17g") if isinstance(v, float)
                                else str(v) for v in value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = format(value, ".17g")
            else:
                text = str(value)
            lines.append(f"{key}={text}")
        return tuple(lines)

    def kernel(self):
        kind = self.require("kernel.kind")
        try:
            return build_kernel(kind, self.get("kernel.n_max"),
                                alpha=self.get("kernel.alpha"),
                                rate=self.get("kernel.rate"),
                                sigma=self.get("kernel.sigma"))
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def law(self) -> DisorderLaw:
        try:
            return DisorderLaw(self.get("law"))
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def out_path(self) -> Path:
        name = self.get("out")
        if name is None:
            stem = (f"experiment-{self.experiment}"
                    if self.subcommand == "experiment" else self.subcommand)
            name = f"pinlab-{stem}.csv"
        return Path(name)


def _read_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    values = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"malformed config line {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in KEY_PARSERS:
            raise UsageError(f"unknown key {key!r} in config file")
        values[key] = KEY_PARSERS[key](value)
    return values


def parse_config(argv) -> RunConfig:
    """Merge a config file (if any) under the command-line flags."""
    tokens = list(argv)
    if not tokens:
        raise UsageError("missing subcommand; choose one of "
                         + ", ".join(SUBCOMMANDS))
    subcommand = tokens.pop(0)
    if subcommand not in SUBCOMMANDS:
        raise UsageError(f"unknown subcommand {subcommand!r}")
    experiment = None
    if subcommand == "experiment":
        if not tokens or tokens[0].startswith("--"):
            raise UsageError("experiment needs a name: "
                             + ", ".join(EXPERIMENTS))
        experiment = tokens.pop(0)
        if experiment not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {experiment!r}")

    flag_values = {}
    config_path = None
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if token == "--plot":
            flag_values["plot"] = True
            i += 1
            continue
        if token == "--config":
            if i + 1 >= len(tokens):
                raise UsageError("--config needs a file path")
            config_path = tokens[i + 1]
            i += 2
            continue
        key = FLAG_TO_KEY.get(token)
        if key is None:
            raise UsageError(f"unknown flag {token!r}")
        if i + 1 >= len(tokens):
            raise UsageError(f"{token} needs a value")
        flag_values[key] = KEY_PARSERS[key](tokens[i + 1])
        i += 2

    merged = {"law": "gaussian", "kernel.n_max": 4096, "plot": False}
    if config_path is not None:
        merged.update(_read_config_file(config_path))
    merged.update(flag_values)  # flags beat file keys
    return RunConfig(subcommand=subcommand, experiment=experiment,
                     settings=tuple(sorted(merged.items())))


# ---------------------------------------------------------------------------
# subcommand runners: each returns (rows, schema, summary lines, plot kind)


def _run_kernel(cfg: RunConfig):
    kernel = cfg.kernel()
    limit = min(cfg.get("N") or 64, kernel.n_max)
    table = renewal_mass(kernel, limit)
    rows = [(n, float(kernel.masses[n]), float(table.u[n]))
            for n in range(1, limit + 1)]
    schema = (("n", "int"), ("mass", "float"), ("renewal_mass", "float"))
    gap = kernel.mean_gap
    lines = [f"INFO kernel family={kernel.family} alpha={kernel.alpha:g} "
             f"n_max={kernel.n_max} mean_gap={gap:g}"]
    return rows, schema, lines, None


def _run_homog(cfg: RunConfig):
    kernel = cfg.kernel()
    h_grid = cfg.require("h_grid")
    rows = []
    for h in h_grid:
        sol = solve_free_energy(kernel, h)
        rows.append((h, sol.free_energy, sol.derivative, sol.residual))
    schema = (("h", "float"), ("free_energy", "float"),
              ("contact_density", "float"), ("residual", "float"))
    return rows, schema, [f"INFO solved {len(rows)} points"], "free-energy-vs-h"


def _run_homog_exponent(cfg: RunConfig):
    kernel = cfg.kernel()
    delta_grid = cfg.require("delta_grid")
    fit = fit_specific_heat_exponent(kernel, delta_grid)
    rows = [(d, solve_free_energy(kernel, d).free_energy)
            for d in delta_grid]
    schema = (("delta", "float"), ("free_energy", "float"))
    lines = [f"INFO exponent fit slope={fit.exponent:.6g} nu={fit.nu:.6g} "
             f"r_squared={fit.r_squared:.8f}"]
    return rows, schema, lines, "exponent-fit"


def _run_engine(cfg: RunConfig):
    kernel, law = cfg.kernel(), cfg.law()
    beta, h, N, seed = cfg.require("beta", "h", "N", "seed")
    params = ModelParams(beta=beta, h=h)
    charges = sample(law, N, seed, 0)
    fwd = forward_table(kernel, charges, params)
    back = backward_table(kernel, charges, params)
    profile = contact_profile(fwd, back)
    rows = [(site, float(p)) for site, p in enumerate(profile)]
    schema = (("site", "int"), ("contact_probability", "float"))
    lines = [f"INFO replica 0: logZ/N={float(fwd.logZ[N]) / N:.12g} "
             f"mean_contact={float(np.mean(profile[1:])):.8f}"]
    return rows, schema, lines, None


def _run_fe(cfg: RunConfig):
    kernel, law = cfg.kernel(), cfg.law()
    beta, N, replicas, seed = cfg.require("beta", "N", "replicas", "seed")
    h_grid = cfg.get("h_grid")
    if h_grid is None:
        h_grid = (cfg.require("h"),)
    rows, lines = [], []
    for h in h_grid:
        est = quenched_free_energy(kernel, law, ModelParams(beta, h),
                                   N, replicas, seed)
        ceiling = annealed_free_energy(kernel, beta, h, law)
        rows.append((h, est.mean, est.stderr, ceiling))
        margin = ceiling + 4.0 * est.stderr - est.mean
        status = "PASS" if margin >= 0.0 else "FAIL"
        lines.append(f"{status} annealed ceiling at h={h:g}: "
                     f"margin={margin:.6g}")
    schema = (("h", "float"), ("free_energy", "float"),
              ("stderr", "float"), ("annealed", "float"))
    return rows, schema, lines, "free-energy-vs-h"


def _run_mu(cfg: RunConfig):
    kernel, law = cfg.kernel(), cfg.law()
    beta, h, N, replicas, seed = cfg.require("beta", "h", "N", "replicas",
                                             "seed")
    est = mu_estimate(kernel, law, ModelParams(beta, h), N, replicas, seed)
    rows = [(h, est.mean, est.stderr, est.max_replica_share)]
    schema = (("h", "float"), ("mu", "float"), ("stderr", "float"),
              ("max_replica_share", "float"))
    quality = "unreliable (heavy tail)" if est.unreliable else "reliable"
    lines = [f"INFO mu={est.mean:.8g} stderr={est.stderr:.3g} "
             f"max_share={est.max_replica_share:.3f} -> {quality}"]
    return rows, schema, lines, None


def _run_hc(cfg: RunConfig):
    kernel, law = cfg.kernel(), cfg.law()
    beta, N_grid, replicas, seed = cfg.require("beta", "N_grid", "replicas",
                                               "seed")
    est = locate_critical_point(kernel, law, beta, N_grid,
                                cfg.get("threshold"), replicas, seed)
    rows = list(zip(est.N_sequence, est.h_c_by_N))
    schema = (("N", "int"), ("h_c", "float"))
    lines = [f"INFO h_c={est.h_c:.8g} err={est.err:.3g} "
             f"drift={est.drift:.3g} stat_err={est.stat_err:.3g} "
             f"threshold={est.threshold:.3g}",
             f"INFO annealed h_c={-log_mgf(law, beta):.8g}"]
    return rows, schema, lines, None


def _run_corr(cfg: RunConfig):
    kernel, law = cfg.kernel(), cfg.law()
    beta, h, N, k_min, k_max, replicas, seed = cfg.require(
        "beta", "h", "N", "k_min", "k_max", "replicas", "seed")
    ks = np.arange(k_min, k_max + 1)
    report = correlation_lengths(kernel, law, ModelParams(beta, h), N, ks,
                                 replicas, seed)
    rows = [(int(k), c) for k, c in zip(ks, report.mean_abs_profile)]
    schema = (("k", "int"), ("mean_abs_correlation", "float"))
    lines = [f"INFO xi_typical={report.xi_typical:.6g} "
             f"rate_typical={report.rate_typical:.6g} "
             f"stderr={report.rate_typical_stderr:.3g}",
             f"INFO xi_average={report.xi_average:.6g} "
             f"rate_average={report.rate_average:.6g} "
             f"r_squared={report.average_fit_r_squared:.6f}",
             f"INFO free_energy={report.free_energy.mean:.8g} "
             f"mu={report.mu.mean:.8g}"]
    return rows, schema, lines, "correlation-decay"


def _run_gaps(cfg: RunConfig):
    kernel, law = cfg.kernel(), cfg.law()
    beta, h, N, replicas, seed = cfg.require("beta", "h", "N", "replicas",
                                             "seed")
    report = gap_statistics(kernel, law, ModelParams(beta, h), N, replicas,
                            seed)
    log_n = math.log(N)
    rows = [(r, int(round(ratio * log_n)), ratio)
            for r, ratio in enumerate(report.ratios)]
    schema = (("replica", "int"), ("largest_gap", "int"), ("ratio", "float"))
    lines = [f"INFO median largest_gap/log(N)={report.median_ratio:.6g}",
             f"INFO median times mu={report.median_times_mu:.6g} "
             f"(mu={report.mu.mean:.6g}, free_energy="
             f"{report.free_energy.mean:.6g})"]
    return rows, schema, lines, None


def _run_critfss(cfg: RunConfig):
    kernel, law = cfg.kernel(), cfg.law()
    beta, h, N_grid, replicas, seed = cfg.require("beta", "h", "N_grid",
                                                  "replicas", "seed")
    report = critical_contact_fraction(kernel, law, beta, h, N_grid,
                                       replicas, seed)
    rows = list(zip(report.N_grid, report.mean_contacts,
                    report.contacts_stderr))
    schema = (("N", "int"), ("mean_contacts", "float"), ("stderr", "float"))
    general = 2.0 / 3.0 + 0.1
    lines = [f"INFO contact growth exponent={report.exponent:.6g} "
             f"r_squared={report.r_squared:.6f}"]
    lines.append(("PASS" if report.within_general_ceiling else "FAIL")
                 + f" exponent within general ceiling: margin="
                   f"{general - report.exponent:.6g}")
    lines.append(("PASS" if report.within_irrelevance_ceiling else "FAIL")
                 + f" exponent within tail-index ceiling: margin="
                   f"{report.irrelevance_ceiling + 0.1 - report.exponent:.6g}")
    return rows, schema, lines, None


def _run_experiment(cfg: RunConfig):
    if cfg.experiment == "harris":
        return _run_harris(cfg)
    if cfg.experiment == "smoothing":
        return _run_smoothing(cfg)
    if cfg.experiment == "irrelevance":
        return _run_irrelevance(cfg)
    return _run_marginal(cfg)


def _run_harris(cfg: RunConfig):
    alpha = cfg.require("kernel.alpha")
    beta_grid, N, replicas, seed = cfg.require("beta_grid", "N", "replicas",
                                               "seed")
    grid = ScanGrid(alphas=(alpha,), betas=beta_grid,
                    deltas=cfg.get("delta_grid") or (1.0,), N=N,
                    replicas=replicas, seed=seed, law=cfg.law(),
                    n_max=cfg.get("kernel.n_max"))
    rows = []
    lines = []
    for row in harris_scan(grid):
        rows.append((row.alpha, row.beta, row.hc_quenched, row.err,
                     row.hc_annealed, row.gap, row.verdict,
                     row.ceiling_exponent, row.scaled_gap))
        ok = row.gap >= -4.0 * row.err
        lines.append(("PASS" if ok else "FAIL")
                     + f" annealed bound at beta={row.beta:g}: "
                       f"margin={row.gap + 4.0 * row.err:.6g}")
        lines.append(f"INFO beta={row.beta:g} verdict={row.verdict} "
                     f"gap={row.gap:.6g} err={row.err:.6g}")
        if math.isfinite(row.scaled_gap):
            lines.append(f"INFO beta={row.beta:g} gap/beta^"
                         f"{row.ceiling_exponent:.4g}={row.scaled_gap:.6g}")
    schema = (("alpha", "float"), ("beta", "float"),
              ("hc_quenched", "float"), ("err", "float"),
              ("hc_annealed", "float"), ("gap", "float"),
              ("verdict", "str"), ("ceiling_exponent", "float"),
              ("scaled_gap", "float"))
    return rows, schema, lines, None


def _run_smoothing(cfg: RunConfig):
    kernel, law = cfg.kernel(), cfg.law()
    beta, N, replicas, seed = cfg.require("beta", "N", "replicas", "seed")
    delta_grid = cfg.require("delta_grid")
    report = smoothing_check(kernel, law, beta, delta_grid, N, replicas,
                             seed)
    rows = [(r.delta, r.free_energy, r.stderr, r.ceiling, r.slack, r.margin,
             r.passed) for r in report.rows]
    schema = (("delta", "float"), ("free_energy", "float"),
              ("stderr", "float"), ("ceiling", "float"), ("slack", "float"),
              ("margin", "float"), ("passed", "bool"))
    est = report.critical_point
    lines = [f"INFO located h_c={est.h_c:.6g} err={est.err:.3g}",
             f"INFO zero-coupling onset exponent="
             f"{report.homogeneous_exponent:.4f} (linear, not quadratic)"]
    for r in report.rows:
        lines.append(("PASS" if r.passed else "FAIL")
                     + f" quadratic ceiling at delta={r.delta:g}: "
                       f"margin={r.margin:.6g}")
    return rows, schema, lines, "free-energy-vs-h"


def _run_irrelevance(cfg: RunConfig):
    kernel, law = cfg.kernel(), cfg.law()
    beta_grid, delta_grid, epsilon, N, replicas, seed = cfg.require(
        "beta_grid", "delta_grid", "epsilon", "N", "replicas", "seed")
    report = irrelevance_window_check(kernel, law, beta_grid, delta_grid,
                                      epsilon, N, replicas, seed)
    rows = [(r.beta, r.delta, r.free_energy, r.stderr, r.homogeneous_value,
             r.lower_margin, r.upper_margin, r.lower_ok, r.upper_ok)
            for r in report.rows]
    schema = (("beta", "float"), ("delta", "float"),
              ("free_energy", "float"), ("stderr", "float"),
              ("homogeneous_value", "float"), ("lower_margin", "float"),
              ("upper_margin", "float"), ("lower_ok", "bool"),
              ("upper_ok", "bool"))
    lines = []
    for r in report.rows:
        ok = r.lower_ok and r.upper_ok
        lines.append(("PASS" if ok else "FAIL")
                     + f" sandwich at beta={r.beta:g} delta={r.delta:g}: "
                       f"lower_margin={r.lower_margin:.6g} "
                       f"upper_margin={r.upper_margin:.6g}")
    for delta, best in zip(report.deltas, report.max_passing_beta):
        text = "none" if math.isnan(best) else format(best, "g")
        lines.append(f"INFO largest passing beta at delta={delta:g}: {text}")
    return rows, schema, lines, None


def _run_marginal(cfg: RunConfig):
    kernel, law = cfg.kernel(), cfg.law()
    beta_grid, delta_grid, N, replicas, seed = cfg.require(
        "beta_grid", "delta_grid", "N", "replicas", "seed")
    report = marginal_case_diagnostic(kernel, law, beta_grid, delta_grid, N,
                                      replicas, seed)
    rows = [(r.beta, r.delta, r.ratio, r.ratio_stderr) for r in report.rows]
    schema = (("beta", "float"), ("delta", "float"), ("ratio", "float"),
              ("ratio_stderr", "float"))
    lines = [f"INFO diagnostics only: {len(rows)} ratio points "
             "(no hard assertions for the boundary tail index)"]
    extra = tuple(f"guide beta={format(b, '.17g')} "
                  f"delta={format(d, '.17g')}"
                  for b, d in report.guide_curve)
    return rows, schema, lines, "heat-map", extra


_RUNNERS = {
    "kernel": _run_kernel,
    "homog": _run_homog,
    "homog-exponent": _run_homog_exponent,
    "engine": _run_engine,
    "fe": _run_fe,
    "mu": _run_mu,
    "hc": _run_hc,
    "corr": _run_corr,
    "gaps": _run_gaps,
    "critfss": _run_critfss,
    "experiment": _run_experiment,
}


def run(cfg: RunConfig) -> list[str]:
    """Execute one parsed configuration; returns the summary lines."""
    result = _RUNNERS[cfg.subcommand](cfg)
    rows, schema, lines, plot_kind = result[:4]
    extra_config = result[4] if len(result) > 4 else ()
    out = cfg.out_path()
    csvio.emit_csv(rows, schema, out,
                   config_lines=cfg.echo_lines() + tuple(extra_config))
    lines.append(f"INFO wrote {out}")
    if cfg.get("plot"):
        if plot_kind is None:
            raise UsageError(
                f"{cfg.subcommand} has no plot; drop --plot")
        figure = out.with_suffix(".svg")
        plots.emit_plot(out, plot_kind, figure)
        lines.append(f"INFO wrote {figure}")
    return lines


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(args)
        lines = run(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # bad parameter combinations surface from the library as
        # ValueError; they are configuration problems, not failures
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    for line in lines:
        print(line)
    return 1 if any(line.startswith("FAIL") for line in lines) else 0


if __name__ == "__main__":
    sys.exit(main())
