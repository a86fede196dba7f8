"""Analytic end-of-life capacity of an ideally reconfigured unit.

With ideal dynamic reconfiguration every cell can be cycled to the same
remaining capacity Q, so the unit's end of life reduces to a per-cell
condition.

Approach 1 (measured-capacity threshold): at end of life the last 1C
discharge delivers eol_fraction * q_pu_nom_1c amp-hours, ending the moment
the terminal voltage reaches v_min.  Expressing the open-circuit voltage at
that point both through the resistance line and through Coulomb counting
from 100 % SOC gives a scalar root problem in Q:

    v_min - i_1c * r_nom * (l_rq - k_rq * Q / q_nom)
        = ocv(1 - eol_fraction * q_pu_nom_1c / (n_p * Q))

The left side falls and the right side rises with Q, so the root is unique
inside the bracket (0.8 * eol_fraction * q_pu_nom_1c / n_p, 1.05 * q_nom);
it is located with a bracketing solver (bisection refined by secant steps)
to a residual below 1e-9 V.  The OCV argument is clamped to [0, 1] during
bracketing only.

Approach 2 (true-capacity threshold): end of life is simply
Q = eol_fraction * q_nom.

Either way the reconfigured unit's cycle total is the sum of per-cell EFC
at the common capacity Q, read off each cell's ageing line.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .ageing import CellAgeingLine, ResistanceCapacityLine
from .electrics import CellElectricalParams, OcvCurve, ocv_eval

RESIDUAL_TOLERANCE_V = 1e-9
_MAX_ITERATIONS = 200


class NoRootError(RuntimeError):
    """The end-of-life equation has no root inside the search bracket."""


@dataclass(frozen=True)
class RpuEolSolution:
    """End-of-life point of the reconfigured unit.

    z_eol, v_oc_eol and r_eol are only defined for approach 1, where end of
    life is a voltage condition; approach 2 leaves them None.
    """

    approach: int
    q_eol: float
    efc_rpu_eol: float
    residual: float
    z_eol: "float | None" = None
    v_oc_eol: "float | None" = None
    r_eol: "float | None" = None


def rpu_efc(lines: "tuple[CellAgeingLine, ...] | list[CellAgeingLine]", q_eol: float) -> float:
    """Summed per-cell EFC when every cell is cycled down to capacity q_eol."""
    if not lines:
        raise ValueError("need at least one cell line")
    total = 0.0
    negative = 0
    for ln in lines:
        term = ln.a_c - ln.b_c * q_eol
        if term < 0.0:
            negative += 1
        total += term
    if negative:
        warnings.warn(
            f"{negative} cell(s) start below the end-of-life capacity "
            f"{q_eol}; their EFC contribution is negative",
            stacklevel=2,
        )
    return total


def rpu_eol_capacity_approach2(
    lines: "tuple[CellAgeingLine, ...] | list[CellAgeingLine]",
    params: CellElectricalParams,
    eol_fraction: float = 0.8,
) -> RpuEolSolution:
    """True-capacity end of life: every cell ends exactly at the threshold."""
    q_eol = eol_fraction * params.q_nom
    return RpuEolSolution(
        approach=2,
        q_eol=q_eol,
        efc_rpu_eol=rpu_efc(lines, q_eol),
        residual=0.0,
    )


def rpu_eol_capacity_approach1(
    lines: "tuple[CellAgeingLine, ...] | list[CellAgeingLine]",
    rcl: ResistanceCapacityLine,
    params: CellElectricalParams,
    curve: OcvCurve,
    q_pu_nom_1c: float,
    eol_fraction: float = 0.8,
) -> RpuEolSolution:
    """Measured-capacity end of life via the scalar root problem in Q."""
    if not lines:
        raise ValueError("need at least one cell line")
    if not q_pu_nom_1c > 0:
        raise ValueError(f"q_pu_nom_1c must be positive (got {q_pu_nom_1c})")
    n_p = len(lines)
    removed = eol_fraction * q_pu_nom_1c / n_p

    def lhs(q: float) -> float:
        r_unit = params.r_nom * (rcl.l_rq - rcl.k_rq * q / params.q_nom)
        return params.v_min - params.i_1c * r_unit

    def z_of(q: float) -> float:
        return 1.0 - removed / q

    def residual(q: float) -> float:
        z = z_of(q)
        # clamp for bracketing; the converged root must land inside (0, 1)
        z_c = 0.0 if z < 0.0 else (1.0 if z > 1.0 else z)
        return lhs(q) - ocv_eval(curve, z_c)

    lo = 0.8 * removed
    hi = 1.05 * params.q_nom
    g_lo = residual(lo)
    g_hi = residual(hi)
    if not (g_lo > 0.0 > g_hi):
        raise NoRootError(
            f"no sign change in ({lo}, {hi}): residual({lo})={g_lo}, "
            f"residual({hi})={g_hi}"
        )

    x, g = lo, g_lo
    for it in range(_MAX_ITERATIONS):
        # secant through the bracket endpoints, midpoint when the secant
        # step leaves the bracket or on alternating iterations
        denom = g_hi - g_lo
        x_secant = hi - g_hi * (hi - lo) / denom if denom != 0.0 else lo
        if it % 2 == 0 and lo < x_secant < hi:
            x = x_secant
        else:
            x = 0.5 * (lo + hi)
        g = residual(x)
        if abs(g) <= RESIDUAL_TOLERANCE_V:
            break
        if g > 0.0:
            lo, g_lo = x, g
        else:
            hi, g_hi = x, g
    else:
        raise NoRootError(
            f"no convergence to |residual| <= {RESIDUAL_TOLERANCE_V} V in "
            f"{_MAX_ITERATIONS} iterations (last residual {g})"
        )

    z_eol = z_of(x)
    if not 0.0 < z_eol < 1.0:
        raise NoRootError(
            f"end-of-life SOC {z_eol} outside (0, 1); inputs are "
            f"inconsistent with a voltage-limited end of life"
        )
    return RpuEolSolution(
        approach=1,
        q_eol=x,
        efc_rpu_eol=rpu_efc(lines, x),
        residual=g,
        z_eol=z_eol,
        v_oc_eol=ocv_eval(curve, z_eol),
        r_eol=params.r_nom * (rcl.l_rq - rcl.k_rq * x / params.q_nom),
    )
