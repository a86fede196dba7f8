"""packlife: lifetime gain of reconfigurable battery packs over fixed ones.

Monte Carlo simulator for parallel cell units cycled to end of life.  Each
experiment samples linear capacity-fade models for the unit's cells,
simulates the fixed configuration cycle by cycle, solves the ideally
reconfigured unit's end of life analytically, and records the relative
lifetime gain.  Statistics sweep cell-spread, resistance-trend and
unit-size cases, plus a bootstrap over series strings of units.
"""

from .ageing import (
    AgeingDistributions,
    CellAgeingLine,
    ResistanceCapacityLine,
    SamplingError,
    capacity_from_efc,
    efc_from_capacity,
    fit_distributions_from_data,
    line_from_draw,
    line_to_rho,
    resistance_from_efc,
    rho_to_line,
    sample_cell_lines,
)
from .electrics import (
    CellElectricalParams,
    CellState,
    OcvCurve,
    advance_soc,
    ocv_eval,
    solve_cc_current_split,
    solve_cv_current,
)
from .engine import (
    CaseSpec,
    ExperimentRecord,
    GmSpec,
    SummaryStats,
    build_case_grid,
    chi_gm,
    chi_pu,
    gm_bootstrap,
    run_case,
    run_case_experiments,
    summarize,
)
from .fpu import (
    CycleBudgetError,
    CyclingProtocol,
    FpuOutcome,
    PuConfig,
    SimulationTrace,
    StepBudgetError,
    apply_cycle_ageing,
    run_charge_cycle,
    run_discharge_cycle,
    simulate_fpu_lifetime,
    simulate_fpu_lifetime_both,
    simulate_with_trace,
)
from .kernels import BACKEND
from .rpu import (
    NoRootError,
    RpuEolSolution,
    rpu_efc,
    rpu_eol_capacity_approach1,
    rpu_eol_capacity_approach2,
)

__version__ = "0.1.0"

__all__ = [
    "AgeingDistributions",
    "BACKEND",
    "CaseSpec",
    "CellAgeingLine",
    "CellElectricalParams",
    "CellState",
    "CycleBudgetError",
    "CyclingProtocol",
    "ExperimentRecord",
    "FpuOutcome",
    "GmSpec",
    "NoRootError",
    "OcvCurve",
    "PuConfig",
    "ResistanceCapacityLine",
    "RpuEolSolution",
    "SamplingError",
    "SimulationTrace",
    "StepBudgetError",
    "SummaryStats",
    "advance_soc",
    "apply_cycle_ageing",
    "build_case_grid",
    "capacity_from_efc",
    "chi_gm",
    "chi_pu",
    "efc_from_capacity",
    "fit_distributions_from_data",
    "gm_bootstrap",
    "line_from_draw",
    "line_to_rho",
    "ocv_eval",
    "resistance_from_efc",
    "rho_to_line",
    "rpu_efc",
    "rpu_eol_capacity_approach1",
    "rpu_eol_capacity_approach2",
    "run_case",
    "run_case_experiments",
    "run_charge_cycle",
    "run_discharge_cycle",
    "sample_cell_lines",
    "simulate_fpu_lifetime",
    "simulate_fpu_lifetime_both",
    "simulate_with_trace",
    "solve_cc_current_split",
    "solve_cv_current",
    "summarize",
]
