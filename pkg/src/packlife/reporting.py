"""Run orchestration and all file outputs.

Output files (all CSV, comma separated, LF line endings, floats written
with repr so every run of the same config and seed is byte-identical):

  records_<case_id>.csv  one row per (approach, experiment)
  summary_pu.csv         per-experiment gain statistics per case and approach
  summary_gm.csv         group-minimum gain statistics per case, approach, n_s
  manifest.json          resolved config echo + seed + versions
  hist_<case_id>_a<k>.csv   `report`: normalized gain histogram
  trend_<axis>_a<k>.csv     `report`: mean/std of the per-case gain means
                            against one swept axis, averaged over the rest
                            of the grid
  trend_gm_ns_a<k>.csv      `report`: group statistics against string length
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from glob import glob

from .config import RunConfig, dump_manifest
from .engine import (
    CaseSpec,
    ExperimentRecord,
    SummaryStats,
    gm_bootstrap,
    parse_case_id,
    run_case_experiments,
    summarize,
)

RECORD_COLUMNS = (
    "case_id",
    "approach",
    "exp_index",
    "status",
    "efc_fpu_eol",
    "efc_rpu_eol",
    "chi_pu",
    "q_pu_nom_1c",
    "cycles_run",
)

SUMMARY_PU_COLUMNS = (
    "case_id",
    "approach",
    "sigma_s_rel",
    "sigma_e_rel",
    "rho_deg",
    "n_p",
    "n",
    "n_flagged",
    "chi_mean",
    "chi_std",
)

SUMMARY_GM_COLUMNS = (
    "case_id",
    "approach",
    "n_s",
    "n_trials",
    "chi_gm_mean",
    "chi_gm_std",
)

_TREND_AXES = ("sigma_s_rel", "sigma_e_rel", "rho_deg", "n_p")


class ReportError(RuntimeError):
    """Missing or malformed inputs for report generation."""


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, header: tuple[str, ...], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_records_csv(path: str, records: "list[ExperimentRecord]") -> None:
    rows = [
        (
            r.case_id,
            r.approach,
            r.exp_index,
            r.status,
            r.efc_fpu_eol,
            r.efc_rpu_eol,
            r.chi_pu,
            r.q_pu_nom_1c,
            r.cycles_run,
        )
        for r in sorted(records, key=lambda r: (r.approach, r.exp_index))
    ]
    _write_csv(path, RECORD_COLUMNS, rows)


def read_records_csv(path: str) -> list[ExperimentRecord]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or tuple(lines[0].split(",")) != RECORD_COLUMNS:
        raise ReportError(f"{path}: not a records CSV (bad header)")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(RECORD_COLUMNS):
            raise ReportError(f"{path}:{i}: expected {len(RECORD_COLUMNS)} columns")
        try:
            records.append(
                ExperimentRecord(
                    case_id=parts[0],
                    approach=int(parts[1]),
                    exp_index=int(parts[2]),
                    status=parts[3],
                    efc_fpu_eol=float(parts[4]),
                    efc_rpu_eol=float(parts[5]),
                    chi_pu=float(parts[6]),
                    q_pu_nom_1c=float(parts[7]),
                    cycles_run=int(parts[8]),
                )
            )
        except ValueError as exc:
            raise ReportError(f"{path}:{i}: {exc}") from None
    return records


def _summary_pu_row(case: CaseSpec, approach: int, records) -> tuple:
    ok = [r for r in records if r.ok]
    n_flagged = len(records) - len(ok)
    if len(ok) >= 2:
        stats = summarize(records)
        mean, std = stats.mean, stats.std
    else:
        mean, std = float("nan"), float("nan")
    return (
        case.case_id,
        approach,
        case.sigma_s_rel,
        case.sigma_e_rel,
        case.rho_deg,
        case.n_p,
        len(ok),
        n_flagged,
        mean,
        std,
    )


def execute_run(cfg: RunConfig, progress=None) -> dict:
    """Run the resolved case grid and write every output file.

    Returns {"cases": [...], "summary_pu": rows, "summary_gm": rows,
    "records_paths": [...]} for callers that want the data back.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    cases = cfg.cases()
    if not cases:
        raise ReportError("case selection is empty")
    approaches = cfg.approaches()
    base = cfg.base_distributions()
    params = cfg.electrical_params()
    curve = cfg.ocv_curve()
    proto = cfg.protocol()
    workers = cfg.resolved_workers()

    summary_pu_rows = []
    summary_gm_rows = []
    records_paths = []
    executor = None
    try:
        if workers > 1:
            executor = ProcessPoolExecutor(max_workers=workers)
        for case in cases:
            by_approach = run_case_experiments(
                case,
                approaches,
                base,
                params,
                curve,
                proto,
                initial_soc=cfg.initial_soc,
                executor=executor,
            )
            all_records = [r for ap in approaches for r in by_approach[ap]]
            path = os.path.join(cfg.out_dir, f"records_{case.case_id}.csv")
            write_records_csv(path, all_records)
            records_paths.append(path)
            for ap in approaches:
                summary_pu_rows.append(_summary_pu_row(case, ap, by_approach[ap]))
                if cfg.gm_enabled:
                    ok = [r for r in by_approach[ap] if r.ok]
                    if ok:
                        gm = gm_bootstrap(by_approach[ap], cfg.gm_spec(), bins=cfg.bins)
                        for n_s in cfg.gm_spec().n_s_values:
                            stats = gm[n_s]
                            summary_gm_rows.append(
                                (case.case_id, ap, n_s, stats.n, stats.mean, stats.std)
                            )
            if progress is not None:
                progress(case, {ap: by_approach[ap] for ap in approaches})
    finally:
        if executor is not None:
            executor.shutdown()

    _write_csv(
        os.path.join(cfg.out_dir, "summary_pu.csv"), SUMMARY_PU_COLUMNS, summary_pu_rows
    )
    if cfg.gm_enabled:
        _write_csv(
            os.path.join(cfg.out_dir, "summary_gm.csv"),
            SUMMARY_GM_COLUMNS,
            summary_gm_rows,
        )
    dump_manifest(cfg, os.path.join(cfg.out_dir, "manifest.json"))
    return {
        "cases": cases,
        "summary_pu": summary_pu_rows,
        "summary_gm": summary_gm_rows,
        "records_paths": records_paths,
    }


# report generation -------------------------------------------------------


def _histogram_rows(records: "list[ExperimentRecord]", bins: int):
    """Normalized histogram rows (chi = bin center); frequencies sum to 1
    over the unflagged records."""
    ok = [r for r in records if r.ok]
    if not ok:
        raise ReportError("no unflagged records to histogram")
    chi = [r.chi_pu for r in ok]
    lo, hi = min(chi), max(chi)
    n = len(ok)
    if lo == hi:
        return [((lo + hi) / 2.0, lo, hi, 1.0)]
    width = (hi - lo) / bins
    counts = [0] * bins
    for value in chi:
        idx = min(int((value - lo) / width), bins - 1)
        counts[idx] += 1
    return [
        (lo + (i + 0.5) * width, lo + i * width, lo + (i + 1) * width, counts[i] / n)
        for i in range(bins)
    ]


def _read_summary_gm(path: str):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or tuple(lines[0].split(",")) != SUMMARY_GM_COLUMNS:
        raise ReportError(f"{path}: not a summary_gm CSV (bad header)")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(SUMMARY_GM_COLUMNS):
            raise ReportError(f"{path}:{i}: expected {len(SUMMARY_GM_COLUMNS)} columns")
        rows.append(
            (parts[0], int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4]), float(parts[5]))
        )
    return rows


def generate_report(records_dir: str, bins: int = 40, out_dir: "str | None" = None) -> list[str]:
    """Build histogram and trend CSVs from a run's records directory.

    Trend rows aggregate the per-case gain means over all grid cases that
    share the swept value (a marginal trend over the rest of the grid).
    Returns the list of files written.
    """
    out_dir = records_dir if out_dir is None else out_dir
    record_files = sorted(glob(os.path.join(records_dir, "records_*.csv")))
    if not record_files:
        raise ReportError(f"no records_*.csv files in {records_dir}")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    # (axis value -> list of per-case chi means/stds) per approach
    per_case: "dict[tuple[str, int], tuple[tuple, SummaryStats]]" = {}
    for path in record_files:
        records = read_records_csv(path)
        if not records:
            raise ReportError(f"{path}: empty records file")
        case_id = records[0].case_id
        coords = parse_case_id(case_id)
        for approach in sorted({r.approach for r in records}):
            sub = [r for r in records if r.approach == approach]
            hist_path = os.path.join(out_dir, f"hist_{case_id}_a{approach}.csv")
            _write_csv(
                hist_path,
                ("chi", "bin_low", "bin_high", "frequency"),
                _histogram_rows(sub, bins),
            )
            written.append(hist_path)
            ok = [r for r in sub if r.ok]
            if len(ok) >= 2:
                per_case[(case_id, approach)] = (coords, summarize(sub))

    approaches = sorted({ap for (_, ap) in per_case})
    for approach in approaches:
        entries = [(coords, st) for (cid, ap), (coords, st) in per_case.items() if ap == approach]
        for axis_index, axis in enumerate(_TREND_AXES):
            values = sorted({coords[axis_index] for coords, _ in entries})
            rows = []
            for value in values:
                group = [st for coords, st in entries if coords[axis_index] == value]
                mean = sum(st.mean for st in group) / len(group)
                std = sum(st.std for st in group) / len(group)
                out_value = int(value) if axis == "n_p" else value
                rows.append((out_value, mean, std, len(group)))
            trend_path = os.path.join(out_dir, f"trend_{axis}_a{approach}.csv")
            _write_csv(trend_path, (axis, "chi_mean", "chi_std", "n_cases"), rows)
            written.append(trend_path)

    gm_path = os.path.join(records_dir, "summary_gm.csv")
    if os.path.exists(gm_path):
        rows = _read_summary_gm(gm_path)
        for approach in sorted({r[1] for r in rows}):
            sub = [r for r in rows if r[1] == approach]
            ns_values = sorted({r[2] for r in sub})
            out_rows = []
            for n_s in ns_values:
                group = [r for r in sub if r[2] == n_s]
                mean = sum(r[4] for r in group) / len(group)
                std = sum(r[5] for r in group) / len(group)
                out_rows.append((n_s, mean, std, len(group)))
            trend_path = os.path.join(out_dir, f"trend_gm_ns_a{approach}.csv")
            _write_csv(
                trend_path, ("n_s", "chi_gm_mean", "chi_gm_std", "n_cases"), out_rows
            )
            written.append(trend_path)
    return written
