"""Command-line front end.

Exit codes: 0 success (all checks pass), 1 a check failed, 2 usage or I/O error.
Settings resolve as command-line flag, then config file, then built-in default.
A config file is TOML; top-level keys apply to every command and a table named
after the command (e.g. ``[table1]``) overrides them for that command.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from hdvar import __version__
from hdvar.estimators import dicker_estimate, dicker_variance_formula
from hdvar.harness import (
    TABLE1_COLUMNS,
    TABLE1_N,
    TABLE1_REFERENCE,
    ScenarioConfig,
    run_bound_scaling_check,
    run_moment_identity_check,
    run_repetition_study,
    run_scenario,
    run_variance_check,
    table1_config,
    table1_hypothesis,
)
from hdvar.model import Dataset, DesignMatrix
from hdvar.plotting import gaussian_kde, histogram, histogram_svg
from hdvar.records import (
    BoundCheckRow,
    Figure1HistRow,
    Figure1RawRow,
    MomentCheckRow,
    Table1Row,
    VarianceCheckRow,
    write_csv,
)
from hdvar.seeding import DEFAULT_MASTER_SEED, MASK64

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("hdvar")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2

COMMANDS = ("table1", "figure1", "estimate", "variance-check", "bound-check", "moment-check")

DEFAULTS = {
    "seed": DEFAULT_MASTER_SEED,
    "out": ".",
    "threads": None,
    "table1": {"replications": 10_000, "rows": list(TABLE1_N), "cols": [1, 2, 3, 4, 5]},
    "figure1": {"replications": 10_000, "designs": 1000, "n": 100, "column": 1, "bins": 30},
    "estimate": {"sigma2": None, "beta_norm2": None},
    "variance-check": {"replications": 20_000, "n": 400, "p": 400, "sigma2": 1.0,
                       "beta_norm2": 1.0, "tolerance": 0.10},
    "bound-check": {"replications": 4000, "c": 1.0, "n_grid": [100, 400, 1600], "xi": 0.5,
                    "sigma2": 1.0, "beta_norm2": 1.0, "C": 1.0, "C_max": 10.0},
    "moment-check": {"draws": 1_000_000, "designs": 10_000, "n": 50, "beta": [1.0, 0.0, 0.0, 0.0, 0.0]},
}


class UsageError(Exception):
    """Bad input, config, or filesystem problem; maps to exit code 2."""


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value <= MASK64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=_u64, help=f"master seed (default {DEFAULT_MASTER_SEED})")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--threads", type=int, help="worker threads; results do not depend on it")
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--replications", type=int, help="Monte Carlo replications")
    common.add_argument("--designs", type=int, help="number of design matrices")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hdvar", parents=[common],
                                     description="Residual-variance estimation experiments (p >= n).")
    parser.add_argument("--version", action="version", version=f"hdvar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table1", parents=[common], argument_default=argparse.SUPPRESS, help="conditional error grid over n and hypotheses")
    p.add_argument("--rows", type=_int_list, help="comma-separated n values (n = p)")
    p.add_argument("--cols", type=_int_list, help="comma-separated hypothesis columns 1..5")

    p = sub.add_parser("figure1", parents=[common], argument_default=argparse.SUPPRESS, help="spread of the conditional error over designs")
    p.add_argument("--n", type=int, help="n = p (default 100)")
    p.add_argument("--column", type=int, help="hypothesis column 1..5 (default 1)")
    p.add_argument("--bins", type=int, help="histogram bins (default 30)")

    p = sub.add_parser("estimate", parents=[common], argument_default=argparse.SUPPRESS, help="Dicker estimate for a dataset file")
    p.add_argument("data", help="file: first line 'n p', then n lines of p design values and y")
    p.add_argument("--sigma2", type=float, help="true sigma^2, to report the variance formula")
    p.add_argument("--beta-norm2", dest="beta_norm2", type=float, help="true |beta|^2")

    p = sub.add_parser("variance-check", parents=[common], argument_default=argparse.SUPPRESS, help="Monte Carlo mean/variance vs formula")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--beta-norm2", dest="beta_norm2", type=float)
    p.add_argument("--tolerance", type=float, help="relative variance tolerance (default 0.10)")

    p = sub.add_parser("bound-check", parents=[common], argument_default=argparse.SUPPRESS, help="fixed-design deviation probabilities vs n")
    p.add_argument("--c", type=float, help="p / n ratio (default 1)")
    p.add_argument("--n-grid", dest="n_grid", type=_int_list, help="increasing n values")
    p.add_argument("--xi", type=float, help="deviation threshold (default 0.5)")
    p.add_argument("--sigma2", type=float)
    p.add_argument("--beta-norm2", dest="beta_norm2", type=float)
    p.add_argument("--C", dest="C", type=float, help="constant for the reported bound (default 1)")
    p.add_argument("--C-max", dest="C_max", type=float, help="largest acceptable fitted constant (default 10)")

    p = sub.add_parser("moment-check", parents=[common], argument_default=argparse.SUPPRESS, help="Gaussian fourth-moment identities")
    p.add_argument("--beta", type=_float_list, help="comma-separated coefficients (default e1 in R^5)")
    p.add_argument("--draws", type=int, help="draws of x (default 1e6)")
    p.add_argument("--n", type=int, help="rows per design for the energy check (default 50)")
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    command = args.command
    settings = {k: v for k, v in DEFAULTS.items() if k not in COMMANDS}
    settings.update(DEFAULTS[command])
    given = vars(args)
    config_path = given.get("config")
    if config_path:
        try:
            with open(config_path, "rb") as fh:
                config = tomllib.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {config_path}: {exc.strerror}")
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"invalid config {config_path}: {exc}")
        settings.update({k: v for k, v in config.items() if not isinstance(v, dict)})
        section = config.get(command, {})
        if not isinstance(section, dict):
            raise UsageError(f"config key {command!r} must be a table")
        settings.update(section)
    settings.update({k: v for k, v in given.items() if k not in ("config", "verbose")})
    return settings


def _output_dir(settings: dict) -> Path:
    out = Path(settings["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc.strerror}")
    return out


def _write(path: Path, rows, meta: dict) -> None:
    try:
        write_csv(path, rows, meta)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}")
    log.info("wrote %s", path)


def _meta(command: str, settings: dict, **extra) -> dict:
    meta = {"command": command, "master_seed": settings["seed"]}
    meta.update(extra)
    return meta


def cmd_table1(settings: dict) -> int:
    out = _output_dir(settings)
    rows, cols = settings["rows"], settings["cols"]
    if any(c not in range(1, len(TABLE1_COLUMNS) + 1) for c in cols):
        raise UsageError(f"columns must be in 1..{len(TABLE1_COLUMNS)}, got {cols}")
    reps = settings["replications"]
    results = {}
    for n in rows:
        for col in cols:
            results[n, col] = run_scenario(table1_config(n, col, reps, settings["seed"]),
                                           threads=settings["threads"])
            log.info("n=%d col=%d error=%.4f", n, col, results[n, col].error_rate)

    records = []
    for (n, col), r in results.items():
        h = r.config.hyp
        records.append(Table1Row(n, n, h.eta0_2, h.sigma0_2, h.eta1_2, h.sigma1_2,
                                 r.replications, r.error_rate, r.std_err, r.design_seed))
    _write(out / "table1.csv", records, _meta("table1", settings, replications=reps))

    headers = ["n=p"] + [f"({e * 6:.0f}/6,{s * 6:.0f}/6)" for e, s in (TABLE1_COLUMNS[c - 1] for c in cols)]
    lines = [headers]
    for n in rows:
        lines.append([str(n)] + [f"{results[n, c].error_rate:.3f}({results[n, c].std_err:.3f})" for c in cols])
        if n in TABLE1_REFERENCE:
            lines.append(["  ref"] + [f"{TABLE1_REFERENCE[n][c - 1]:.3f}" for c in cols])
    widths = [max(len(line[i]) for line in lines) for i in range(len(headers))]
    for line in lines:
        print("  ".join(cell.rjust(w) for cell, w in zip(line, widths)))
    return EXIT_OK


def cmd_figure1(settings: dict) -> int:
    out = _output_dir(settings)
    n, column = settings["n"], settings["column"]
    if column not in range(1, len(TABLE1_COLUMNS) + 1):
        raise UsageError(f"column must be in 1..{len(TABLE1_COLUMNS)}, got {column}")
    config = ScenarioConfig(n=n, p=n, hyp=table1_hypothesis(column), replications=settings["replications"],
                            master_seed=settings["seed"], scenario_id=f"figure1/n={n}/col={column}")
    study = run_repetition_study(config, settings["designs"], threads=settings["threads"])
    rates = study.error_rates
    meta = _meta("figure1", settings, n=n, column=column, designs=study.designs,
                 replications=study.inner_replications)

    _write(out / "figure1_raw.csv",
           [Figure1RawRow(k, s, float(r)) for k, (s, r) in enumerate(zip(study.design_seeds, rates))], meta)
    hist = histogram(rates, bins=settings["bins"])
    kde = gaussian_kde(rates, hist.centers)
    _write(out / "figure1_hist.csv",
           [Figure1HistRow(float(lo), float(hi), int(c), float(d), float(k))
            for lo, hi, c, d, k in zip(hist.edges[:-1], hist.edges[1:], hist.counts, hist.density, kde)], meta)
    svg = histogram_svg(rates, hist, title=f"Conditional error over {study.designs} designs (n = p = {n})",
                        xlabel="error rate of the Dicker rule")
    try:
        (out / "figure1.svg").write_text(f"<!-- hdvar {__version__}; master_seed: {settings['seed']} -->\n" + svg,
                                         encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {out / 'figure1.svg'}: {exc.strerror}")
    below = float(np.mean(rates < 0.5))
    print(f"designs={study.designs} mean={rates.mean():.4f} sd={rates.std(ddof=1) if rates.size > 1 else 0.0:.4f} "
          f"min={rates.min():.4f} max={rates.max():.4f} fraction<0.5={below:.4f}")
    return EXIT_OK


def read_dataset(path: str) -> Dataset:
    """Parse the plain-text dataset format; errors name the offending line."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read dataset {path}: {exc.strerror}")
    content = [(i + 1, line.split()) for i, line in enumerate(lines) if line.strip()]
    if not content:
        raise UsageError(f"{path}:1: empty dataset file")
    lineno, head = content[0]
    try:
        n, p = (int(v) for v in head)
    except ValueError:
        raise UsageError(f"{path}:{lineno}: expected 'n p' header, got {' '.join(head)!r}")
    if n < 1 or p < 1:
        raise UsageError(f"{path}:{lineno}: n and p must be positive")
    body = content[1:]
    values = np.empty((n, p + 1))
    for row, (lineno, fields) in enumerate(body):
        if row >= n:
            raise UsageError(f"{path}:{lineno}: more than n={n} data lines")
        if len(fields) != p + 1:
            raise UsageError(f"{path}:{lineno}: expected {p + 1} values, got {len(fields)}")
        try:
            values[row] = [float(v) for v in fields]
        except ValueError:
            raise UsageError(f"{path}:{lineno}: non-numeric value")
        if not np.all(np.isfinite(values[row])):
            raise UsageError(f"{path}:{lineno}: non-finite value")
    if len(body) < n:
        last = body[-1][0] + 1 if body else lineno + 1
        raise UsageError(f"{path}:{last}: expected {n} data lines, got {len(body)}")
    return Dataset(DesignMatrix(values[:, :p]), values[:, p])


def cmd_estimate(settings: dict) -> int:
    est = dicker_estimate(read_dataset(settings["data"]))
    print(f"n={est.n} p={est.p}")
    print(f"estimate={est.value:.17g}")
    print(f"y_norm2={est.y_norm2:.17g}")
    print(f"xty_norm2={est.xty_norm2:.17g}")
    sigma2, beta_norm2 = settings["sigma2"], settings["beta_norm2"]
    if sigma2 is not None and beta_norm2 is not None:
        print(f"variance_formula={dicker_variance_formula(est.n, est.p, sigma2, beta_norm2):.17g}")
    return EXIT_OK


def cmd_variance_check(settings: dict) -> int:
    out = _output_dir(settings)
    r = run_variance_check(settings["n"], settings["p"], settings["sigma2"], settings["beta_norm2"],
                           settings["replications"], settings["seed"], settings["threads"],
                           tolerance=settings["tolerance"])
    row = VarianceCheckRow(r.n, r.p, r.sigma2, r.beta_norm2, r.replications, r.mean, r.mean_se, r.variance,
                           r.formula, r.relative_gap, r.mean_ok, r.variance_ok, r.passed)
    _write(out / "variance_check.csv", [row], _meta("variance-check", settings))
    print(f"mean={r.mean:.5f} (se {r.mean_se:.5f}, target {r.sigma2})  variance={r.variance:.6f} "
          f"formula={r.formula:.6f} gap={r.relative_gap:+.2%}  {'PASS' if r.passed else 'FAIL'}")
    if not r.passed:
        print(f"failed: {row}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_bound_check(settings: dict) -> int:
    out = _output_dir(settings)
    report = run_bound_scaling_check(settings["c"], settings["n_grid"], settings["xi"], settings["sigma2"],
                                     settings["beta_norm2"], settings["replications"], settings["seed"],
                                     settings["threads"], C_max=settings["C_max"])
    rows = []
    for b in report.rows:
        rhs = settings["C"] * b.shape
        rows.append(BoundCheckRow(b.n, b.p, report.xi, b.exceedance, b.std_err, b.g_mean, rhs, b.ratio,
                                  b.exceedance <= rhs, b.ratio <= report.C_max))
    meta = _meta("bound-check", settings, c=report.c, replications=report.replications,
                 fitted_C=format(report.fitted_C, ".17g"), slope=format(report.slope, ".17g"),
                 slope_se=format(report.slope_se, ".17g"), strictly_decreasing=report.strictly_decreasing)
    _write(out / "bound_check.csv", rows, meta)
    for row in rows:
        print(f"n={row.n} p={row.p} exceedance={row.exceedance:.5f} ({row.std_err:.5f}) "
              f"bound={row.rhs:.4f} ratio={row.ratio:.5f}")
    print(f"fitted C={report.fitted_C:.5f} (max {report.C_max})  trend slope={report.slope:.5f} "
          f"(se {report.slope_se:.5f})  {'PASS' if report.passed else 'FAIL'}")
    if not report.passed:
        for row in rows:
            if not row.passed:
                print(f"failed: {row}", file=sys.stderr)
        if not report.no_growth:
            print(f"failed: ratio grows with n (slope {report.slope:.5g} > 2 se {report.slope_se:.5g})",
                  file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_moment_check(settings: dict) -> int:
    out = _output_dir(settings)
    r = run_moment_identity_check(settings["beta"], settings["draws"], settings["seed"], settings["n"],
                                  settings["designs"], settings["threads"])
    rows = [
        MomentCheckRow("fourth_moment", r.fourth_moment, r.fourth_se, r.fourth_target, r.fourth_z, 4.0,
                       r.fourth_ok),
        MomentCheckRow("excess_fourth_moment", r.excess_fourth, r.fourth_se, 2 * r.beta_norm2**2, r.fourth_z,
                       4.0, r.fourth_ok),
        MomentCheckRow("energy_variance", r.energy_variance, r.energy_variance_se, r.energy_variance_target,
                       r.energy_z, 5.0, r.energy_ok),
    ]
    _write(out / "moment_check.csv", rows, _meta("moment-check", settings, draws=r.draws, n=r.n,
                                                 designs=r.designs))
    for row in rows:
        print(f"{row.check}: {row.estimate:.5f} (se {row.std_err:.5f}) target {row.target:.5f} "
              f"z={row.z:+.2f} {'PASS' if row.passed else 'FAIL'}")
    failed = [row for row in rows if not row.passed]
    for row in failed:
        print(f"failed: {row}", file=sys.stderr)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


HANDLERS = {
    "table1": cmd_table1,
    "figure1": cmd_figure1,
    "estimate": cmd_estimate,
    "variance-check": cmd_variance_check,
    "bound-check": cmd_bound_check,
    "moment-check": cmd_moment_check,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        settings = resolve_settings(args)
        return HANDLERS[args.command](settings)
    except UsageError as exc:
        print(f"hdvar {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"hdvar {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
