"""Fixed-configuration unit lifetime simulation.

A fixed parallel unit (FPU) of n_p cells is cycled to end of life: an
initial bring-up charge from the starting SOC, then repeated full cycles of
CC discharge at the unit 1C current to v_min followed by CC-CV charge to
v_max (CV until the total current falls to a fraction of the unit 1C
current).  Ageing is applied at cycle boundaries: each cell's equivalent
full cycles grow by throughput / (2 * q_nom), and capacity/resistance follow
the cell's ageing line.

Two end-of-life definitions are tracked:

  approach 1: the unit's measured 1C discharge capacity falls to or below
              eol_capacity_fraction times the first-cycle measurement;
  approach 2: the last cycle boundary at which every cell capacity is still
              at or above eol_capacity_fraction * q_nom.

The heavy loop lives in packlife.kernels (numba or numpy backend).  This
module also provides step-level reference operations on CellState lists
(run_discharge_cycle, run_charge_cycle, apply_cycle_ageing) used for
fine-grained testing; they share the kernel's semantics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ageing import CellAgeingLine, capacity_from_efc, efc_from_capacity, resistance_from_efc
from .electrics import (
    CellElectricalParams,
    CellState,
    OcvCurve,
    advance_soc,
    solve_cc_current_split,
    solve_cv_current,
)
from .kernels import simulate_unit

DEFAULT_DT_S = 30.0
DEFAULT_CV_CUTOFF_FRACTION = 1.0 / 30.0
DEFAULT_EOL_CAPACITY_FRACTION = 0.8
DEFAULT_EVENT_TOLERANCE_V = 1e-6
DEFAULT_MAX_CYCLES = 5000
DEFAULT_MAX_STEPS = 10_000_000


class CycleBudgetError(RuntimeError):
    """Simulation hit the cycle budget before reaching the requested EOL."""


class StepBudgetError(RuntimeError):
    """Simulation hit the integration-step budget (diverging trajectory)."""


@dataclass(frozen=True)
class CyclingProtocol:
    """Cycling protocol knobs shared by every simulated unit."""

    dt: float = DEFAULT_DT_S
    cv_cutoff_fraction: float = DEFAULT_CV_CUTOFF_FRACTION
    eol_capacity_fraction: float = DEFAULT_EOL_CAPACITY_FRACTION
    event_tolerance: float = DEFAULT_EVENT_TOLERANCE_V
    max_cycles: int = DEFAULT_MAX_CYCLES
    max_steps: int = DEFAULT_MAX_STEPS
    extrapolation_factor: int = 1

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive (got {self.dt})")
        if not 0 < self.cv_cutoff_fraction < 1:
            raise ValueError("cv_cutoff_fraction must lie in (0, 1)")
        if not 0 < self.eol_capacity_fraction < 1:
            raise ValueError("eol_capacity_fraction must lie in (0, 1)")
        if not self.event_tolerance > 0:
            raise ValueError("event_tolerance must be positive")
        if self.max_cycles < 1 or self.max_steps < 1:
            raise ValueError("budgets must be at least 1")
        if self.extrapolation_factor < 1:
            raise ValueError("extrapolation_factor must be >= 1")


@dataclass(frozen=True)
class PuConfig:
    """One parallel unit: per-cell ageing lines plus shared electrics."""

    lines: tuple[CellAgeingLine, ...]
    params: CellElectricalParams
    curve: OcvCurve
    initial_soc: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "lines", tuple(self.lines))
        if len(self.lines) < 1:
            raise ValueError("a unit needs at least one cell")
        if not 0.0 <= self.initial_soc <= 1.0:
            raise ValueError(f"initial_soc must lie in [0, 1] (got {self.initial_soc})")

    @property
    def n_p(self) -> int:
        return len(self.lines)


@dataclass(frozen=True)
class FpuOutcome:
    """End-of-life result of one fixed-unit lifetime simulation."""

    eol_approach: int
    q_pu_nom_1c: float
    q_cells_eol: tuple[float, ...]
    efc_cells_eol: tuple[float, ...]
    efc_fpu_eol: float
    cycles_run: int
    per_cycle_capacity: np.ndarray
    cycle_boundaries: np.ndarray


@dataclass(frozen=True)
class SimulationTrace:
    """Per-cycle diagnostics of one simulation run."""

    per_cycle_capacity: np.ndarray
    min_cell_q: np.ndarray
    max_cell_q: np.ndarray
    sum_efc: np.ndarray


def _kernel_args(cfg: PuConfig, proto: CyclingProtocol):
    lines = cfg.lines
    a = np.array([ln.a_c for ln in lines])
    b = np.array([ln.b_c for ln in lines])
    c = np.array([ln.c_c for ln in lines])
    d = np.array([ln.d_c for ln in lines])
    return (
        float(cfg.initial_soc),
        a,
        b,
        c,
        d,
        np.asarray(cfg.curve.soc, dtype=float),
        np.asarray(cfg.curve.ocv, dtype=float),
        float(cfg.params.q_nom),
        float(cfg.params.i_1c),
        float(cfg.params.v_min),
        float(cfg.params.v_max),
        float(proto.dt),
        float(proto.cv_cutoff_fraction),
        float(proto.eol_capacity_fraction),
        float(proto.event_tolerance),
        int(proto.max_cycles),
        int(proto.max_steps),
        int(proto.extrapolation_factor),
    )


def _raw_simulate(cfg: PuConfig, proto: CyclingProtocol, want_a1: bool, want_a2: bool):
    res = simulate_unit(*_kernel_args(cfg, proto), want_a1, want_a2)
    status = res[0]
    if status == 2:
        raise StepBudgetError(
            f"integration-step budget {proto.max_steps} exhausted; "
            f"trajectory is not converging"
        )
    return res


def _outcome_from_raw(cfg: PuConfig, raw, approach: int) -> FpuOutcome:
    (
        status,
        ah1,
        n_cycles,
        a1_cycle,
        q_a1,
        efc_a1,
        a2_cycle,
        q_a2,
        efc_a2,
        caps,
        mins,
        maxs,
        sefc,
        bounds,
    ) = raw
    eol_cycle = a1_cycle if approach == 1 else a2_cycle
    if eol_cycle == 0:
        raise CycleBudgetError(
            f"approach-{approach} end of life not reached within "
            f"{caps.shape[0]} cycles"
        )
    q_eol = q_a1 if approach == 1 else q_a2
    # EFC at end of life follows from the EOL capacities through the lines
    efc_cells = tuple(efc_from_capacity(ln, qj) for ln, qj in zip(cfg.lines, q_eol))
    return FpuOutcome(
        eol_approach=approach,
        q_pu_nom_1c=float(ah1),
        q_cells_eol=tuple(float(x) for x in q_eol),
        efc_cells_eol=efc_cells,
        efc_fpu_eol=float(sum(efc_cells)),
        cycles_run=int(eol_cycle),
        per_cycle_capacity=caps[:eol_cycle].copy(),
        cycle_boundaries=bounds[:eol_cycle].copy(),
    )


def simulate_fpu_lifetime(
    cfg: PuConfig, proto: CyclingProtocol, approach: int
) -> FpuOutcome:
    """Simulate one fixed unit to the requested end-of-life definition."""
    if approach not in (1, 2):
        raise ValueError(f"approach must be 1 or 2 (got {approach})")
    raw = _raw_simulate(cfg, proto, approach == 1, approach == 2)
    return _outcome_from_raw(cfg, raw, approach)


def simulate_fpu_lifetime_both(
    cfg: PuConfig, proto: CyclingProtocol
) -> tuple[FpuOutcome, FpuOutcome]:
    """Simulate once, stopping only after both EOL definitions are reached.

    The per-approach outcomes are identical to what single-approach runs
    produce: each EOL is recorded the moment it occurs, independent of how
    long the simulation keeps running afterwards.
    """
    raw = _raw_simulate(cfg, proto, True, True)
    return _outcome_from_raw(cfg, raw, 1), _outcome_from_raw(cfg, raw, 2)


def simulate_with_trace(
    cfg: PuConfig, proto: CyclingProtocol, want_a1: bool = True, want_a2: bool = True
) -> tuple[dict[int, FpuOutcome], SimulationTrace]:
    """Simulation plus per-cycle diagnostics for trace output."""
    raw = _raw_simulate(cfg, proto, want_a1, want_a2)
    n_cycles = raw[2]
    outcomes: dict[int, FpuOutcome] = {}
    for approach, want in ((1, want_a1), (2, want_a2)):
        if want:
            outcomes[approach] = _outcome_from_raw(cfg, raw, approach)
    trace = SimulationTrace(
        per_cycle_capacity=raw[9][:n_cycles].copy(),
        min_cell_q=raw[10][:n_cycles].copy(),
        max_cell_q=raw[11][:n_cycles].copy(),
        sum_efc=raw[12][:n_cycles].copy(),
    )
    return outcomes, trace


# --- step-level reference operations on CellState lists -------------------
#
# These mirror the kernel's semantics one phase at a time and exist for
# direct unit testing and small-scale experiments.  Currents are held
# constant over each dt step; the step crossing the voltage limit is
# bisected to the protocol's event tolerance; committed SOC is clamped to
# [0, 1].


def _clamp_soc(cell: CellState) -> CellState:
    if cell.soc < 0.0:
        return CellState(soc=0.0, q=cell.q, r=cell.r, efc=cell.efc, throughput=cell.throughput)
    if cell.soc > 1.0:
        return CellState(soc=1.0, q=cell.q, r=cell.r, efc=cell.efc, throughput=cell.throughput)
    return cell


def _step_cells(cells, currents, h):
    return [_clamp_soc(advance_soc(c, i, h)) for c, i in zip(cells, currents)]


def _cc_split_after(cells, currents, h, curve, i_total):
    probe = _step_cells(cells, currents, h)
    v, _ = solve_cc_current_split(probe, curve, i_total)
    return v


def _run_cc_phase(cells, curve, proto, i_total, v_limit, going_up):
    t = 0.0
    steps = 0
    while True:
        v_now, currents = solve_cc_current_split(cells, curve, i_total)
        crossed_now = v_now >= v_limit if going_up else v_now <= v_limit
        if crossed_now:
            return cells, t
        if steps > proto.max_steps:
            raise StepBudgetError("CC phase exceeded the step budget")
        v_new = _cc_split_after(cells, currents, proto.dt, curve, i_total)
        crossed = v_new >= v_limit if going_up else v_new <= v_limit
        if crossed:
            lo, hi, h, v_h = 0.0, proto.dt, proto.dt, v_new
            it = 0
            while abs(v_h - v_limit) > proto.event_tolerance and it < 64:
                mid = 0.5 * (lo + hi)
                v_mid = _cc_split_after(cells, currents, mid, curve, i_total)
                c_mid = v_mid >= v_limit if going_up else v_mid <= v_limit
                if c_mid:
                    hi, v_h, h = mid, v_mid, mid
                else:
                    lo = mid
                it += 1
            return _step_cells(cells, currents, h), t + h
        cells = _step_cells(cells, currents, proto.dt)
        t += proto.dt
        steps += 1


def run_discharge_cycle(
    cells: "list[CellState]",
    curve: OcvCurve,
    params: CellElectricalParams,
    proto: CyclingProtocol,
) -> tuple[list[CellState], float]:
    """CC discharge at the unit 1C current until the terminal voltage
    reaches v_min.  Returns the new states and the discharged Ah."""
    if not cells:
        raise ValueError("need at least one cell")
    i_pu = params.i_1c * len(cells)
    new_cells, t = _run_cc_phase(cells, curve, proto, i_pu, params.v_min, False)
    return new_cells, -i_pu * t / 3600.0


def run_charge_cycle(
    cells: "list[CellState]",
    curve: OcvCurve,
    params: CellElectricalParams,
    proto: CyclingProtocol,
) -> list[CellState]:
    """CC charge at the unit 1C magnitude to v_max, then CV at v_max until
    the total current falls to cv_cutoff_fraction of the unit 1C magnitude."""
    if not cells:
        raise ValueError("need at least one cell")
    i_chg = -params.i_1c * len(cells)
    cells, _ = _run_cc_phase(cells, curve, proto, i_chg, params.v_max, True)
    i_cutoff = proto.cv_cutoff_fraction * i_chg
    steps = 0
    while True:
        currents = solve_cv_current(cells, curve, params.v_max)
        if sum(currents) <= i_cutoff:
            return cells
        if steps > proto.max_steps:
            raise StepBudgetError("CV phase exceeded the step budget")
        cells = _step_cells(cells, currents, proto.dt)
        steps += 1


def apply_cycle_ageing(
    cells: "list[CellState]",
    lines: "tuple[CellAgeingLine, ...] | list[CellAgeingLine]",
    q_nom: float,
) -> list[CellState]:
    """Cycle-boundary ageing update: EFC grows by throughput / (2 * q_nom),
    capacity and resistance follow each cell's ageing line, throughput
    resets."""
    if len(cells) != len(lines):
        raise ValueError("cells and lines must pair up")
    out = []
    for cell, line in zip(cells, lines):
        efc = cell.efc + cell.throughput / (2.0 * q_nom)
        out.append(
            CellState(
                soc=cell.soc,
                q=capacity_from_efc(line, efc),
                r=resistance_from_efc(line, efc),
                efc=efc,
                throughput=0.0,
            )
        )
    return out
