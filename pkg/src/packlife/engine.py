"""Monte Carlo experiment engine.

One experiment draws n_p cell ageing lines, simulates the fixed unit to end
of life, computes the reconfigured unit's end of life analytically, and
reports the relative lifetime gain

    chi_pu = (efc_rpu_eol / efc_fpu_eol - 1) * 100   [percent].

Cases sweep the sampling spread (relative sigma of start capacity and of
end-of-life cycles), the resistance-line angle rho and the unit size n_p.
Reproducibility: every experiment owns an RNG stream derived from
(master_seed, case_id, exp_index), so results are independent of worker
count and execution order.  Failed experiments (budget exhausted, no root,
sampling rejection) are kept as flagged records and excluded from
statistics, never silently dropped.

Group-minimum statistics: a string of n_s units in series fails with its
weakest unit.  chi_gm resamples n_s experiments with replacement and
compares the mean reconfigured lifetime against the minimum fixed lifetime,

    chi_gm = (mean(efc_rpu) / min(efc_fpu) - 1) * 100.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .ageing import (
    AgeingDistributions,
    SamplingError,
    rho_to_line,
    sample_cell_lines,
)
from .electrics import CellElectricalParams, OcvCurve
from .fpu import (
    CycleBudgetError,
    CyclingProtocol,
    PuConfig,
    StepBudgetError,
    _outcome_from_raw,
    _raw_simulate,
)
from .rpu import NoRootError, rpu_eol_capacity_approach1, rpu_eol_capacity_approach2

# Default sweep of the four case coordinates (3 * 3 * 3 * 7 = 189 cases).
DEFAULT_SIGMA_S_REL = (0.001, 0.0028, 0.01)
DEFAULT_SIGMA_E_REL = (0.01, 0.03, 0.111)
DEFAULT_RHO_DEG = (124.5, 105.7, 97.3)
DEFAULT_N_P = (2, 4, 6, 8, 10, 12, 20)

DEFAULT_N_EXP_PU = 200
DEFAULT_MASTER_SEED = 20240901

STATUS_OK = "ok"
STATUS_SAMPLING = "sampling_failed"
STATUS_CYCLE_BUDGET = "cycle_budget"
STATUS_STEP_BUDGET = "step_budget"
STATUS_NO_ROOT = "no_root"

WORKERS_ENV = "PACKLIFE_WORKERS"


@dataclass(frozen=True)
class CaseSpec:
    """One grid case: sampling spreads, line angle, unit size, run settings."""

    sigma_s_rel: float
    sigma_e_rel: float
    rho_deg: float
    n_p: int
    n_exp_pu: int = DEFAULT_N_EXP_PU
    approach: int = 2
    master_seed: int = DEFAULT_MASTER_SEED

    def __post_init__(self) -> None:
        if self.sigma_s_rel < 0 or self.sigma_e_rel < 0:
            raise ValueError("relative sigmas must be non-negative")
        if self.n_p < 1:
            raise ValueError(f"n_p must be at least 1 (got {self.n_p})")
        if self.n_exp_pu < 1:
            raise ValueError(f"n_exp_pu must be at least 1 (got {self.n_exp_pu})")
        if self.approach not in (1, 2):
            raise ValueError(f"approach must be 1 or 2 (got {self.approach})")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")

    @property
    def case_id(self) -> str:
        return format_case_id(
            self.sigma_s_rel, self.sigma_e_rel, self.rho_deg, self.n_p
        )


def format_case_id(
    sigma_s_rel: float, sigma_e_rel: float, rho_deg: float, n_p: int
) -> str:
    """Stable key of the four case coordinates (approach not included)."""
    return f"ss{sigma_s_rel:g}_se{sigma_e_rel:g}_rho{rho_deg:g}_np{n_p:d}"


def parse_case_id(case_id: str) -> tuple[float, float, float, int]:
    """Inverse of format_case_id."""
    parts = case_id.split("_")
    try:
        if len(parts) != 4:
            raise ValueError
        ss = float(parts[0].removeprefix("ss"))
        se = float(parts[1].removeprefix("se"))
        rho = float(parts[2].removeprefix("rho"))
        n_p = int(parts[3].removeprefix("np"))
    except ValueError:
        raise ValueError(f"malformed case_id {case_id!r}") from None
    return ss, se, rho, n_p


@dataclass(frozen=True)
class ExperimentRecord:
    """One experiment's outcome; flagged records keep NaN lifetimes."""

    case_id: str
    approach: int
    exp_index: int
    status: str
    efc_fpu_eol: float
    efc_rpu_eol: float
    chi_pu: float
    q_pu_nom_1c: float
    cycles_run: int

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


@dataclass(frozen=True)
class SummaryStats:
    """Sample statistics of chi over the unflagged records of one case.

    std uses the n-1 denominator.  n counts unflagged records only;
    n_flagged keeps the excluded failures visible.
    """

    n: int
    n_flagged: int
    mean: float
    std: float
    histogram: tuple[tuple[float, float, int], ...]


@dataclass(frozen=True)
class GmSpec:
    """Group-minimum bootstrap settings."""

    n_s_values: tuple[int, ...] = (2, 10, 50, 200)
    n_exp_gm: int = 10_000
    resample_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_s_values", tuple(int(v) for v in self.n_s_values))
        if any(v < 1 for v in self.n_s_values):
            raise ValueError("n_s values must be at least 1")
        if self.n_exp_gm < 2:
            raise ValueError("n_exp_gm must be at least 2")


def chi_pu(efc_rpu: float, efc_fpu: float) -> float:
    """Relative lifetime gain of reconfiguration over the fixed unit, %."""
    if not efc_fpu > 0:
        raise ValueError(f"efc_fpu must be positive (got {efc_fpu})")
    return (efc_rpu / efc_fpu - 1.0) * 100.0


def chi_gm(efc_rpu_sample: np.ndarray, efc_fpu_sample: np.ndarray) -> float:
    """Group gain of one resampled string: mean reconfigured lifetime over
    the weakest fixed lifetime, %."""
    rpu = np.asarray(efc_rpu_sample, dtype=float)
    fpu = np.asarray(efc_fpu_sample, dtype=float)
    if rpu.size == 0 or rpu.shape != fpu.shape:
        raise ValueError("need equal-length, non-empty lifetime samples")
    fmin = float(np.min(fpu))
    if not fmin > 0:
        raise ValueError(f"fixed lifetimes must be positive (got min {fmin})")
    return (float(np.mean(rpu)) / fmin - 1.0) * 100.0


def _case_stream_key(case_id: str) -> int:
    return int.from_bytes(hashlib.sha256(case_id.encode()).digest()[:8], "big")


def experiment_rng(master_seed: int, case_id: str, exp_index: int) -> np.random.Generator:
    """Independent, order-free RNG stream for one experiment."""
    ss = np.random.SeedSequence([master_seed, _case_stream_key(case_id), exp_index])
    return np.random.default_rng(ss)


def _experiment_task(payload):
    """Run one experiment; returns one record tuple per requested approach.

    Top-level function so process pools can pickle it.
    """
    (
        case_id,
        sigma_s_rel,
        sigma_e_rel,
        rho_deg,
        n_p,
        master_seed,
        exp_index,
        approaches,
        base,
        params,
        curve,
        proto,
        initial_soc,
    ) = payload
    rng = experiment_rng(master_seed, case_id, exp_index)
    dist = AgeingDistributions(
        mu_s=base.mu_s,
        sigma_s=sigma_s_rel * base.mu_s,
        mu_e=base.mu_e,
        sigma_e=sigma_e_rel * base.mu_e,
    )
    rcl = rho_to_line(rho_deg)

    def failed(status):
        return tuple(
            (case_id, ap, exp_index, status, float("nan"), float("nan"), float("nan"), float("nan"), 0)
            for ap in approaches
        )

    try:
        lines = sample_cell_lines(dist, rcl, params.q_nom, params.r_nom, n_p, rng)
    except SamplingError:
        return failed(STATUS_SAMPLING)

    cfg = PuConfig(lines=tuple(lines), params=params, curve=curve, initial_soc=initial_soc)
    want_a1 = 1 in approaches
    want_a2 = 2 in approaches
    try:
        raw = _raw_simulate(cfg, proto, want_a1, want_a2)
    except StepBudgetError:
        return failed(STATUS_STEP_BUDGET)

    out = []
    for ap in approaches:
        try:
            fpu = _outcome_from_raw(cfg, raw, ap)
        except CycleBudgetError:
            out.append(
                (case_id, ap, exp_index, STATUS_CYCLE_BUDGET, float("nan"), float("nan"), float("nan"), float("nan"), 0)
            )
            continue
        try:
            if ap == 1:
                sol = rpu_eol_capacity_approach1(
                    lines, rcl, params, curve, fpu.q_pu_nom_1c, proto.eol_capacity_fraction
                )
            else:
                sol = rpu_eol_capacity_approach2(lines, params, proto.eol_capacity_fraction)
        except NoRootError:
            out.append(
                (case_id, ap, exp_index, STATUS_NO_ROOT, fpu.efc_fpu_eol, float("nan"), float("nan"), fpu.q_pu_nom_1c, fpu.cycles_run)
            )
            continue
        out.append(
            (
                case_id,
                ap,
                exp_index,
                STATUS_OK,
                fpu.efc_fpu_eol,
                sol.efc_rpu_eol,
                chi_pu(sol.efc_rpu_eol, fpu.efc_fpu_eol),
                fpu.q_pu_nom_1c,
                fpu.cycles_run,
            )
        )
    return tuple(out)


def _records_from_tuples(tuples) -> list[ExperimentRecord]:
    return [
        ExperimentRecord(
            case_id=t[0],
            approach=t[1],
            exp_index=t[2],
            status=t[3],
            efc_fpu_eol=t[4],
            efc_rpu_eol=t[5],
            chi_pu=t[6],
            q_pu_nom_1c=t[7],
            cycles_run=t[8],
        )
        for t in tuples
    ]


def run_case_experiments(
    case: CaseSpec,
    approaches: tuple[int, ...],
    base: AgeingDistributions,
    params: CellElectricalParams,
    curve: OcvCurve,
    proto: CyclingProtocol,
    initial_soc: float = 0.5,
    executor: "ProcessPoolExecutor | None" = None,
) -> dict[int, list[ExperimentRecord]]:
    """Run one case's experiments once, emitting records for each requested
    approach.  Sharing the simulation between approaches changes nothing:
    each end of life is recorded when it occurs."""
    payloads = [
        (
            case.case_id,
            case.sigma_s_rel,
            case.sigma_e_rel,
            case.rho_deg,
            case.n_p,
            case.master_seed,
            k,
            tuple(sorted(set(approaches))),
            base,
            params,
            curve,
            proto,
            initial_soc,
        )
        for k in range(case.n_exp_pu)
    ]
    if executor is None:
        results = map(_experiment_task, payloads)
    else:
        chunk = max(1, len(payloads) // (getattr(executor, "_max_workers", 1) * 8))
        results = executor.map(_experiment_task, payloads, chunksize=chunk)
    by_approach: dict[int, list[ExperimentRecord]] = {ap: [] for ap in approaches}
    for result in results:
        for rec in _records_from_tuples(result):
            by_approach[rec.approach].append(rec)
    return by_approach


def run_case(
    case: CaseSpec,
    base: AgeingDistributions,
    params: CellElectricalParams,
    curve: OcvCurve,
    proto: CyclingProtocol,
    initial_soc: float = 0.5,
    workers: int = 1,
) -> list[ExperimentRecord]:
    """Run one case for its own approach; convenience over run_case_experiments."""
    executor = None
    try:
        if workers > 1:
            executor = ProcessPoolExecutor(max_workers=workers)
        result = run_case_experiments(
            case, (case.approach,), base, params, curve, proto, initial_soc, executor
        )
    finally:
        if executor is not None:
            executor.shutdown()
    return result[case.approach]


def default_workers() -> int:
    """Worker count from the environment, 1 if unset or invalid."""
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return n if n >= 1 else 1


def build_case_grid(
    n_exp_pu: int = DEFAULT_N_EXP_PU,
    approach: int = 2,
    master_seed: int = DEFAULT_MASTER_SEED,
    sigma_s_rel_values: tuple[float, ...] = DEFAULT_SIGMA_S_REL,
    sigma_e_rel_values: tuple[float, ...] = DEFAULT_SIGMA_E_REL,
    rho_values: tuple[float, ...] = DEFAULT_RHO_DEG,
    n_p_values: tuple[int, ...] = DEFAULT_N_P,
) -> list[CaseSpec]:
    """Full factorial case grid; defaults give 3*3*3*7 = 189 cases."""
    cases = []
    for ss in sigma_s_rel_values:
        for se in sigma_e_rel_values:
            for rho in rho_values:
                for n_p in n_p_values:
                    cases.append(
                        CaseSpec(
                            sigma_s_rel=ss,
                            sigma_e_rel=se,
                            rho_deg=rho,
                            n_p=n_p,
                            n_exp_pu=n_exp_pu,
                            approach=approach,
                            master_seed=master_seed,
                        )
                    )
    return cases


def summarize(records: "list[ExperimentRecord]", bins: int = 40) -> SummaryStats:
    """Mean, sample standard deviation (n-1) and histogram of chi_pu over
    the unflagged records."""
    if bins < 1:
        raise ValueError(f"bins must be at least 1 (got {bins})")
    ok = [r for r in records if r.ok]
    n_flagged = len(records) - len(ok)
    if len(ok) < 2:
        raise ValueError(f"need at least 2 unflagged records (got {len(ok)})")
    chi = np.array([r.chi_pu for r in ok])
    return SummaryStats(
        n=len(ok),
        n_flagged=n_flagged,
        mean=float(np.mean(chi)),
        std=float(np.std(chi, ddof=1)),
        histogram=_histogram(chi, bins),
    )


def _histogram(values: np.ndarray, bins: int) -> tuple[tuple[float, float, int], ...]:
    lo = float(np.min(values))
    hi = float(np.max(values))
    if lo == hi:
        return ((lo, hi, int(values.size)),)
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return tuple(
        (float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)
    )


def summarize_gm_values(chi_values: np.ndarray, bins: int = 40) -> SummaryStats:
    """SummaryStats over precomputed chi_gm trial values."""
    chi = np.asarray(chi_values, dtype=float)
    if chi.size < 2:
        raise ValueError("need at least 2 trials")
    return SummaryStats(
        n=int(chi.size),
        n_flagged=0,
        mean=float(np.mean(chi)),
        std=float(np.std(chi, ddof=1)),
        histogram=_histogram(chi, bins),
    )


def gm_bootstrap(
    records: "list[ExperimentRecord]",
    spec: GmSpec,
    bins: int = 40,
    exhaustive: bool = False,
) -> dict[int, SummaryStats]:
    """Group-minimum gain statistics for each string length n_s.

    Each trial draws n_s experiments with replacement from the unflagged
    records; trial t of length n_s uses an RNG stream derived from
    (resample_seed, n_s, t), so results are independent of evaluation order.

    exhaustive=True is a validation mode: it requires n_s = 1 and
    n_exp_gm = number of unflagged records and enumerates each record
    exactly once instead of resampling, which must reproduce the plain
    per-experiment statistics.
    """
    ok = [r for r in records if r.ok]
    if len(ok) < 1:
        raise ValueError("need at least one unflagged record")
    rpu = np.array([r.efc_rpu_eol for r in ok])
    fpu = np.array([r.efc_fpu_eol for r in ok])
    if exhaustive and (spec.n_s_values != (1,) or spec.n_exp_gm != len(ok)):
        raise ValueError(
            "exhaustive mode requires n_s_values == (1,) and n_exp_gm == record count"
        )
    out: dict[int, SummaryStats] = {}
    for n_s in spec.n_s_values:
        chi = np.empty(spec.n_exp_gm)
        for t in range(spec.n_exp_gm):
            if exhaustive:
                idx = np.array([t])
            else:
                rng = np.random.default_rng(
                    np.random.SeedSequence([spec.resample_seed, n_s, t])
                )
                idx = rng.integers(0, len(ok), size=n_s)
            chi[t] = (float(np.mean(rpu[idx])) / float(np.min(fpu[idx])) - 1.0) * 100.0
        out[n_s] = summarize_gm_values(chi, bins)
    return out
