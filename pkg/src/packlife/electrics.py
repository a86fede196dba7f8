"""Zero-order equivalent-circuit electrics for parallel-connected cells.

Each cell is an OCV source behind a series resistance:

    v_j = ocv(soc_j) + i_j * r_j

with discharge currents negative.  All cells in a parallel unit share the
terminal voltage, which gives closed forms for the two operating modes:

  constant current (known total i):
      v   = (sum_j ocv_j / r_j + i_total) / (sum_j 1 / r_j)
      i_j = (v - ocv_j) / r_j

  constant voltage (known terminal v):
      i_j = (v_hold - ocv_j) / r_j

SOC advances by Coulomb counting, soc' = soc + i * dt / (3600 * q).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

# Tolerated SOC overshoot before ocv_eval treats a query as a domain error.
SOC_DOMAIN_SLACK = 1e-9

# NMC-like default table; placeholder shape, not fitted to any specific cell.
DEFAULT_OCV_POINTS: tuple[tuple[float, float], ...] = (
    (0.0, 3.00),
    (0.1, 3.45),
    (0.2, 3.55),
    (0.3, 3.60),
    (0.4, 3.64),
    (0.5, 3.68),
    (0.6, 3.74),
    (0.7, 3.82),
    (0.8, 3.92),
    (0.9, 4.05),
    (1.0, 4.20),
)

DEFAULT_Q_NOM_AH = 3.0
# Placeholder nominal series resistance.  Chosen small enough that the
# voltage-threshold end-of-life criterion stays close to the analytic
# reference solution (simulated CC-CV cycles never start from exactly 100 %
# SOC, which biases the measured unit capacity), yet large enough that the
# resistance-line slope retains a visible effect on that criterion.
DEFAULT_R_NOM_OHM = 0.007
DEFAULT_V_MIN = 3.0
DEFAULT_V_MAX = 4.2


@dataclass(frozen=True)
class OcvCurve:
    """Monotone open-circuit-voltage table over soc in [0, 1].

    Breakpoints must be strictly increasing in both soc and voltage, with
    soc[0] = 0 and soc[-1] = 1.  Evaluation is piecewise linear.
    """

    soc: np.ndarray
    ocv: np.ndarray

    def __post_init__(self) -> None:
        soc = np.asarray(self.soc, dtype=float)
        ocv = np.asarray(self.ocv, dtype=float)
        object.__setattr__(self, "soc", soc)
        object.__setattr__(self, "ocv", ocv)
        if soc.ndim != 1 or soc.shape != ocv.shape or soc.size < 2:
            raise ValueError("curve needs matching 1-D soc/ocv arrays, >= 2 points")
        if soc[0] != 0.0 or soc[-1] != 1.0:
            raise ValueError("soc breakpoints must start at 0 and end at 1")
        if not np.all(np.diff(soc) > 0):
            raise ValueError("soc breakpoints must be strictly increasing")
        if not np.all(np.diff(ocv) > 0):
            raise ValueError("ocv values must be strictly increasing")

    @classmethod
    def from_points(cls, points) -> "OcvCurve":
        pts = np.asarray(points, dtype=float)
        return cls(soc=pts[:, 0].copy(), ocv=pts[:, 1].copy())

    @classmethod
    def default(cls) -> "OcvCurve":
        return cls.from_points(DEFAULT_OCV_POINTS)

    @classmethod
    def from_csv(cls, path: "str | Path") -> "OcvCurve":
        """Load a curve from a CSV file with header soc,ocv_volts."""
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["soc", "ocv_volts"]:
                raise ValueError(f"{path}: expected header 'soc,ocv_volts'")
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 2 columns")
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
        if len(rows) < 2:
            raise ValueError(f"{path}: need at least 2 curve points")
        return cls.from_points(rows)

    def soc_at(self, voltage: float) -> float:
        """Inverse lookup: soc at a given open-circuit voltage (clamped)."""
        return float(np.interp(voltage, self.ocv, self.soc))


def ocv_eval(curve: OcvCurve, soc: float) -> float:
    """Open-circuit voltage at soc; soc outside [0, 1] beyond 1e-9 is an error."""
    if soc < -SOC_DOMAIN_SLACK or soc > 1.0 + SOC_DOMAIN_SLACK:
        raise ValueError(f"soc {soc} outside [0, 1]")
    return float(np.interp(soc, curve.soc, curve.ocv))


@dataclass(frozen=True)
class CellElectricalParams:
    """Nominal electrical parameters shared by all cells of a unit.

    i_1c is the signed 1C discharge current; it defaults to -q_nom amps
    (one full nominal capacity per hour, discharge negative).  r1/c1 are
    accepted for config compatibility with first-order RC fits but unused
    by the zero-order model.
    """

    q_nom: float = DEFAULT_Q_NOM_AH
    r_nom: float = DEFAULT_R_NOM_OHM
    v_min: float = DEFAULT_V_MIN
    v_max: float = DEFAULT_V_MAX
    i_1c: float = field(default=0.0)
    r1: "float | None" = None
    c1: "float | None" = None

    def __post_init__(self) -> None:
        if self.i_1c == 0.0:
            object.__setattr__(self, "i_1c", -self.q_nom)
        if not self.q_nom > 0:
            raise ValueError(f"q_nom must be positive (got {self.q_nom})")
        if not self.r_nom > 0:
            raise ValueError(f"r_nom must be positive (got {self.r_nom})")
        if not self.v_min < self.v_max:
            raise ValueError(f"need v_min < v_max (got {self.v_min}, {self.v_max})")
        if not self.i_1c < 0:
            raise ValueError(f"i_1c is a discharge current, must be < 0 (got {self.i_1c})")


@dataclass(frozen=True)
class CellState:
    """Instantaneous cell state: SOC, actual capacity, resistance, ageing."""

    soc: float
    q: float
    r: float
    efc: float = 0.0
    throughput: float = 0.0

    def __post_init__(self) -> None:
        if not self.q > 0:
            raise ValueError(f"cell capacity must be positive (got {self.q})")
        if not self.r > 0:
            raise ValueError(f"cell resistance must be positive (got {self.r})")


def solve_cc_current_split(
    cells: "list[CellState]", curve: OcvCurve, i_total: float
) -> tuple[float, list[float]]:
    """Terminal voltage and per-cell currents for a known total current.

    Discharge totals are negative.  The per-cell currents always sum to
    i_total exactly up to float roundoff.
    """
    if not cells:
        raise ValueError("need at least one cell")
    inv_r = np.array([1.0 / c.r for c in cells])
    ocv = np.array([ocv_eval(curve, c.soc) for c in cells])
    v = (float(np.sum(ocv * inv_r)) + i_total) / float(np.sum(inv_r))
    currents = (v - ocv) * inv_r
    return v, [float(i) for i in currents]


def solve_cv_current(
    cells: "list[CellState]", curve: OcvCurve, v_hold: float
) -> list[float]:
    """Per-cell currents while the terminal voltage is held at v_hold."""
    if not cells:
        raise ValueError("need at least one cell")
    return [(v_hold - ocv_eval(curve, c.soc)) / c.r for c in cells]


def advance_soc(cell: CellState, current: float, dt: float) -> CellState:
    """Coulomb-count one step: soc' = soc + current * dt / (3600 * q).

    No clamping is applied; event detection and clamping are the caller's
    responsibility.  Throughput accumulates |current| * dt / 3600.
    """
    if dt < 0:
        raise ValueError(f"dt must be non-negative (got {dt})")
    return replace(
        cell,
        soc=cell.soc + current * dt / (3600.0 * cell.q),
        throughput=cell.throughput + abs(current) * dt / 3600.0,
    )
