"""Command line interface.

Subcommands:

  run     execute the configured case grid and write records/summaries
  fit     fit ageing distributions and the R-Q line from CSV data
  report  build histogram and trend CSVs from a records directory
  grid    print the resolved case grid without running it

Exit status is 0 on success and 2 on any configuration, input or usage
error.  The default worker count comes from the PACKLIFE_WORKERS
environment variable when neither --workers nor the config sets one.
"""

from __future__ import annotations

import argparse
import os
import sys

from .ageing import fit_distributions_from_data
from .config import ConfigError, RunConfig, apply_overrides, load_config
from .engine import WORKERS_ENV
from .reporting import ReportError, execute_run, generate_report


class InputError(ValueError):
    """Malformed input data file."""


def _int_csv(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty integer list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="packlife",
        description=(
            "Monte Carlo estimation of the battery-pack lifetime gain of ideal "
            "cell-level reconfiguration over a fixed parallel configuration."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the configured case grid")
    run.add_argument("--config", help="INI config file or manifest.json of a previous run")
    run.add_argument("--seed", type=int, help="master seed override")
    run.add_argument("--out", help="output directory override")
    run.add_argument(
        "--workers",
        type=int,
        help=f"process count override (default: ${WORKERS_ENV} or 1)",
    )
    run.add_argument("--approach", choices=("1", "2", "both"), help="EOL approach override")
    run.add_argument(
        "--cases",
        help="comma-separated case_id substrings; only matching cases run",
    )
    run.add_argument("--np", dest="n_p", type=_int_csv, help="unit sizes override, e.g. 2,4,10")
    run.add_argument("--ns", dest="n_s", type=_int_csv, help="string lengths override, e.g. 2,10")
    run.set_defaults(func=cmd_run)

    fit = sub.add_parser("fit", help="fit ageing parameters from CSV data")
    fit.add_argument("--bol", required=True, help="CSV with header cell_id,q_tilde")
    fit.add_argument("--eol", required=True, help="CSV with header cell_id,efc_eol")
    fit.add_argument("--rq", required=True, help="CSV with header q_tilde,r_tilde")
    fit.add_argument("--out", help="directory to write fit_fragment.ini into")
    fit.set_defaults(func=cmd_fit)

    report = sub.add_parser("report", help="build histogram and trend CSVs")
    report.add_argument("records_dir", help="directory holding records_*.csv")
    report.add_argument("--bins", type=int, default=40, help="histogram bin count")
    report.add_argument("--out", help="output directory (default: records_dir)")
    report.set_defaults(func=cmd_report)

    grid = sub.add_parser("grid", help="print the resolved case grid")
    grid.add_argument("--config", help="INI config file or manifest.json")
    grid.add_argument("--cases", help="comma-separated case_id substrings")
    grid.add_argument("--np", dest="n_p", type=_int_csv, help="unit sizes override")
    grid.set_defaults(func=cmd_grid)

    return parser


def _resolved_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "approach", None) is not None:
        overrides["approach"] = args.approach
    if getattr(args, "cases", None) is not None:
        overrides["case_filter"] = tuple(
            p for p in args.cases.split(",") if p.strip()
        )
    if getattr(args, "n_p", None) is not None:
        overrides["n_p_values"] = args.n_p
    if getattr(args, "n_s", None) is not None:
        overrides["n_s_values"] = args.n_s
    return apply_overrides(cfg, **overrides)


def cmd_run(args) -> int:
    cfg = _resolved_config(args)

    def progress(case, by_approach):
        bits = []
        for ap in sorted(by_approach):
            ok = [r for r in by_approach[ap] if r.ok]
            flagged = len(by_approach[ap]) - len(ok)
            note = f" flagged={flagged}" if flagged else ""
            bits.append(f"a{ap} n={len(ok)}{note}")
        print(f"{case.case_id}: " + "  ".join(bits), flush=True)

    result = execute_run(cfg, progress=progress)
    print(
        f"wrote {len(result['records_paths'])} records files, "
        f"summary_pu.csv ({len(result['summary_pu'])} rows)"
        + (
            f", summary_gm.csv ({len(result['summary_gm'])} rows)"
            if cfg.gm_enabled
            else ""
        )
        + f" and manifest.json to {cfg.out_dir}"
    )
    return 0


def _read_two_column_csv(path: str, header: tuple[str, str]) -> list[tuple[int, str, float]]:
    """Read `name,value` rows as (lineno, name, value); raises InputError
    naming file and line."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if not lines:
        raise InputError(f"{path}:1: empty file, expected header {','.join(header)}")
    got = tuple(p.strip() for p in lines[0].split(","))
    if got != header:
        raise InputError(
            f"{path}:1: expected header {','.join(header)!r}, got {lines[0]!r}"
        )
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise InputError(f"{path}:{i}: expected 2 columns, got {len(parts)}")
        try:
            rows.append((i, parts[0].strip(), float(parts[1])))
        except ValueError:
            raise InputError(f"{path}:{i}: cannot parse number {parts[1]!r}") from None
    if not rows:
        raise InputError(f"{path}: no data rows")
    return rows


def fit_fragment(dist, rcl) -> str:
    """Fitted parameters as a pasteable config fragment."""
    return (
        "[ageing]\n"
        f"mu_s = {dist.mu_s!r}\n"
        f"mu_e = {dist.mu_e!r}\n"
        "\n"
        "[grid]\n"
        f"sigma_s_rel = {dist.sigma_s / dist.mu_s!r}\n"
        f"sigma_e_rel = {dist.sigma_e / dist.mu_e!r}\n"
        f"rho_deg = {rcl.rho_deg!r}\n"
        "\n"
        f"# sigma_s = {dist.sigma_s!r}\n"
        f"# sigma_e = {dist.sigma_e!r}\n"
        f"# k_rq = {rcl.k_rq!r}\n"
        f"# l_rq = {rcl.l_rq!r}\n"
    )


def cmd_fit(args) -> int:
    bol = _read_two_column_csv(args.bol, ("cell_id", "q_tilde"))
    eol = _read_two_column_csv(args.eol, ("cell_id", "efc_eol"))
    rq_named = _read_two_column_csv(args.rq, ("q_tilde", "r_tilde"))
    rq_points = []
    for lineno, q_text, r_value in rq_named:
        try:
            rq_points.append((float(q_text), r_value))
        except ValueError:
            raise InputError(f"{args.rq}:{lineno}: cannot parse number {q_text!r}") from None
    try:
        dist, rcl = fit_distributions_from_data(
            [v for _, _, v in bol], [v for _, _, v in eol], rq_points
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    fragment = fit_fragment(dist, rcl)
    print(fragment, end="")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        out_path = os.path.join(args.out, "fit_fragment.ini")
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(fragment)
        print(f"# written to {out_path}")
    return 0


def cmd_report(args) -> int:
    if args.bins < 1:
        raise InputError(f"bins must be at least 1 (got {args.bins})")
    written = generate_report(args.records_dir, bins=args.bins, out_dir=args.out)
    print(f"wrote {len(written)} report files to {args.out or args.records_dir}")
    return 0


def cmd_grid(args) -> int:
    cfg = _resolved_config(args)
    cases = cfg.cases()
    for case in cases:
        print(case.case_id)
    print(f"total: {len(cases)} cases x {len(cfg.approaches())} approach(es)")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ReportError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
