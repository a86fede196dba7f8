"""Linear cell-ageing model: capacity lines, resistance coupling, sampling, fitting.

Every cell is described by a straight capacity-fade line in the (EFC, Q) plane,

    efc(Q) = a_c - b_c * Q,

anchored at the begin-of-life point (efc=0, Q = q_tilde_s * q_nom) and the
end-of-life point (efc = efc_e, Q = 0.8 * q_nom).  Resistance grows linearly
with EFC,

    R(efc) = c_c + d_c * efc,

where (c_c, d_c) are derived from a population-wide normalized resistance vs.
capacity line R~ = -k_rq * Q~ + l_rq pinned through (1, 1): a cell at 100 %
normalized capacity has 100 % normalized resistance.  The line's steepness is
parameterized by the angle rho (degrees, between 90 and 180) with
k_rq = -tan(rho) and l_rq = 1 + k_rq.

Cell-to-cell spread enters through two independent normal draws per cell:
the normalized start capacity q_tilde_s ~ N(mu_s, sigma_s^2) and the
end-of-life cycle count efc_e ~ N(mu_e, sigma_e^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Fitted defaults for the two ageing distributions (normalized start capacity,
# end-of-life equivalent full cycles).
DEFAULT_MU_S = 0.9939
DEFAULT_SIGMA_S = 0.0028
DEFAULT_MU_E = 615.85
DEFAULT_SIGMA_E = 68.28

# Normalized capacity at cell end of life.
EOL_CAPACITY_FRACTION = 0.8

# Rejection-sampling guards.
_MIN_Q_TILDE_MARGIN = 1e-6
_MAX_CONSECUTIVE_REJECTIONS = 1000


class SamplingError(RuntimeError):
    """Raised when rejection sampling cannot produce a valid cell line."""


@dataclass(frozen=True)
class AgeingDistributions:
    """Normal distributions for start capacity and end-of-life cycle count.

    mu_s, sigma_s are in normalized-capacity units (1.0 = nominal capacity);
    mu_e, sigma_e are in equivalent full cycles.  sigma = 0 is allowed and
    produces identical cells.
    """

    mu_s: float
    sigma_s: float
    mu_e: float
    sigma_e: float

    def __post_init__(self) -> None:
        if not self.mu_s > EOL_CAPACITY_FRACTION:
            raise ValueError(
                f"mu_s must exceed {EOL_CAPACITY_FRACTION} (got {self.mu_s})"
            )
        if not self.mu_e > 0:
            raise ValueError(f"mu_e must be positive (got {self.mu_e})")
        if self.sigma_s < 0 or self.sigma_e < 0:
            raise ValueError("sigma_s and sigma_e must be non-negative")


def default_distributions() -> AgeingDistributions:
    """Fitted distributions used when a config does not override them."""
    return AgeingDistributions(
        mu_s=DEFAULT_MU_S,
        sigma_s=DEFAULT_SIGMA_S,
        mu_e=DEFAULT_MU_E,
        sigma_e=DEFAULT_SIGMA_E,
    )


@dataclass(frozen=True)
class ResistanceCapacityLine:
    """Normalized resistance-vs-capacity line R~ = -k_rq * Q~ + l_rq.

    The line is pinned through (1, 1), so l_rq - k_rq = 1 always holds.
    rho is the line angle in degrees, strictly between 90 and 180; steeper
    resistance growth corresponds to rho closer to 90.
    """

    rho_deg: float
    k_rq: float
    l_rq: float

    def __post_init__(self) -> None:
        if not (90.0 < self.rho_deg < 180.0):
            raise ValueError(f"rho must lie in (90, 180) degrees (got {self.rho_deg})")
        if not (self.k_rq > 0 and self.l_rq > 0):
            raise ValueError("k_rq and l_rq must be positive")
        if abs(self.l_rq - self.k_rq - 1.0) > 1e-9:
            raise ValueError(
                f"line must pass through (1, 1): l_rq - k_rq = "
                f"{self.l_rq - self.k_rq} != 1"
            )

    def r_tilde(self, q_tilde: float) -> float:
        """Normalized resistance at normalized capacity q_tilde."""
        return self.l_rq - self.k_rq * q_tilde


def rho_to_line(rho_deg: float) -> ResistanceCapacityLine:
    """Build the normalized R-Q line from its angle in degrees.

    k_rq = -tan(rho) is positive for rho in (90, 180); l_rq = 1 + k_rq pins
    the line through (1, 1).
    """
    if not (90.0 < rho_deg < 180.0):
        raise ValueError(f"rho must lie in (90, 180) degrees (got {rho_deg})")
    k = -math.tan(math.radians(rho_deg))
    return ResistanceCapacityLine(rho_deg=rho_deg, k_rq=k, l_rq=1.0 + k)


def line_to_rho(k_rq: float) -> float:
    """Angle in (90, 180) degrees of a normalized R-Q line with slope -k_rq."""
    if not k_rq > 0:
        raise ValueError(f"k_rq must be positive (got {k_rq})")
    return 180.0 - math.degrees(math.atan(k_rq))


@dataclass(frozen=True)
class CellAgeingLine:
    """Per-cell ageing law: efc(Q) = a_c - b_c*Q and R(efc) = c_c + d_c*efc.

    All four coefficients are strictly positive for any valid draw.  q_tilde_s
    and efc_e are the underlying sampled values kept for bookkeeping.
    """

    q_tilde_s: float
    efc_e: float
    a_c: float
    b_c: float
    c_c: float
    d_c: float

    def __post_init__(self) -> None:
        for name in ("a_c", "b_c", "c_c", "d_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive (got {getattr(self, name)})")


def line_from_draw(
    q_tilde_s: float,
    efc_e: float,
    rcl: ResistanceCapacityLine,
    q_nom: float,
    r_nom: float,
) -> CellAgeingLine:
    """Construct a cell ageing line from one (q_tilde_s, efc_e) draw.

    The capacity line is fixed by its two anchors:
        efc(q_tilde_s * q_nom) = 0      (begin of life)
        efc(0.8 * q_nom)       = efc_e  (end of life)
    The resistance line follows from the shared normalized R-Q line.
    """
    if not q_tilde_s > EOL_CAPACITY_FRACTION + _MIN_Q_TILDE_MARGIN:
        raise ValueError(f"q_tilde_s must exceed 0.8 (got {q_tilde_s})")
    if not efc_e > 0:
        raise ValueError(f"efc_e must be positive (got {efc_e})")
    b_c = efc_e / ((q_tilde_s - EOL_CAPACITY_FRACTION) * q_nom)
    a_c = b_c * q_tilde_s * q_nom
    d_c = r_nom * rcl.k_rq / (b_c * q_nom)
    c_c = r_nom * (rcl.l_rq - rcl.k_rq * a_c / (b_c * q_nom))
    return CellAgeingLine(
        q_tilde_s=q_tilde_s, efc_e=efc_e, a_c=a_c, b_c=b_c, c_c=c_c, d_c=d_c
    )


def sample_cell_lines(
    dist: AgeingDistributions,
    rcl: ResistanceCapacityLine,
    q_nom: float,
    r_nom: float,
    n: int,
    rng: np.random.Generator,
) -> list[CellAgeingLine]:
    """Draw n independent cell ageing lines.

    Each cell pairs one q_tilde_s draw with one efc_e draw.  A pair is
    rejected and redrawn when q_tilde_s <= 0.8 + eps or efc_e <= 0; after
    1000 consecutive rejections sampling aborts with SamplingError.
    """
    if n < 1:
        raise ValueError(f"need at least one cell (got n={n})")
    lines: list[CellAgeingLine] = []
    for _ in range(n):
        rejections = 0
        while True:
            q_tilde_s = rng.normal(dist.mu_s, dist.sigma_s)
            efc_e = rng.normal(dist.mu_e, dist.sigma_e)
            if q_tilde_s > EOL_CAPACITY_FRACTION + _MIN_Q_TILDE_MARGIN and efc_e > 0:
                break
            rejections += 1
            if rejections >= _MAX_CONSECUTIVE_REJECTIONS:
                raise SamplingError(
                    f"{rejections} consecutive rejected draws; distributions "
                    f"place too much mass outside q_tilde_s > 0.8, efc_e > 0"
                )
        lines.append(line_from_draw(q_tilde_s, efc_e, rcl, q_nom, r_nom))
    return lines


def capacity_from_efc(line: CellAgeingLine, efc: float) -> float:
    """Cell capacity in Ah after efc equivalent full cycles."""
    return (line.a_c - efc) / line.b_c


def efc_from_capacity(line: CellAgeingLine, q: float) -> float:
    """Equivalent full cycles at which the cell capacity equals q."""
    return line.a_c - line.b_c * q


def resistance_from_efc(line: CellAgeingLine, efc: float) -> float:
    """Cell series resistance in Ohm after efc equivalent full cycles."""
    return line.c_c + line.d_c * efc


def fit_distributions_from_data(
    bol_q_tilde: "list[float] | np.ndarray",
    eol_efc: "list[float] | np.ndarray",
    rq_points: "list[tuple[float, float]] | np.ndarray",
) -> tuple[AgeingDistributions, ResistanceCapacityLine]:
    """Fit the two ageing distributions and the normalized R-Q line from data.

    bol_q_tilde: normalized begin-of-life capacities, one per cell.
    eol_efc:     end-of-life cycle counts, one per cell.
    rq_points:   (q_tilde, r_tilde) pairs sampled along ageing trajectories.

    Means and standard deviations are the sample mean and sample standard
    deviation (n-1 denominator).  The R-Q line is the least-squares line
    through the pinned point (1, 1), which keeps l_rq - k_rq = 1 exact;
    slopes that come out non-negative are rejected because the model
    requires resistance to grow as capacity fades.
    """
    bol = np.asarray(bol_q_tilde, dtype=float)
    eol = np.asarray(eol_efc, dtype=float)
    rq = np.asarray(rq_points, dtype=float)
    if bol.size < 2 or eol.size < 2:
        raise ValueError("need at least 2 samples per distribution to fit")
    if rq.ndim != 2 or rq.shape[1] != 2 or rq.shape[0] < 2:
        raise ValueError("need at least 2 (q_tilde, r_tilde) points to fit")

    mu_s = float(np.mean(bol))
    sigma_s = float(np.std(bol, ddof=1))
    mu_e = float(np.mean(eol))
    sigma_e = float(np.std(eol, ddof=1))

    dq = rq[:, 0] - 1.0
    dr = rq[:, 1] - 1.0
    denom = float(np.dot(dq, dq))
    if denom == 0.0:
        raise ValueError("all q_tilde points equal 1; R-Q slope is undefined")
    # Line through (1, 1): r~ - 1 = -k * (q~ - 1), least squares in r~.
    k = -float(np.dot(dq, dr)) / denom
    if not k > 0:
        raise ValueError(
            f"fitted R-Q slope is non-negative (k_rq={k}); resistance must "
            f"grow as capacity fades"
        )
    rcl = ResistanceCapacityLine(rho_deg=line_to_rho(k), k_rq=k, l_rq=1.0 + k)
    dist = AgeingDistributions(mu_s=mu_s, sigma_s=sigma_s, mu_e=mu_e, sigma_e=sigma_e)
    return dist, rcl
