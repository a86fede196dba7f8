"""Run configuration: INI schema, defaults, and the manifest echo.

The config file is INI (configparser) with a versioned schema.  Every key
has a default, so the empty file is a valid full-grid run; unknown sections
or keys are rejected to catch typos.  Quantity-valued keys accept SI unit
suffixes (`10 mOhm`, `3 Ah`, `30 s`, `0.5 h`) normalized to base units on
parse.

`manifest.json`, written next to the run outputs, echoes the resolved
configuration plus seed and library versions; passing it back via
``--config manifest.json`` reproduces the run.
"""

from __future__ import annotations

import configparser
import json
import re
import sys
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .ageing import (
    DEFAULT_MU_E,
    DEFAULT_MU_S,
    AgeingDistributions,
)
from .electrics import (
    DEFAULT_Q_NOM_AH,
    DEFAULT_R_NOM_OHM,
    DEFAULT_V_MAX,
    DEFAULT_V_MIN,
    CellElectricalParams,
    OcvCurve,
)
from .engine import (
    DEFAULT_MASTER_SEED,
    DEFAULT_N_EXP_PU,
    DEFAULT_N_P,
    DEFAULT_RHO_DEG,
    DEFAULT_SIGMA_E_REL,
    DEFAULT_SIGMA_S_REL,
    CaseSpec,
    GmSpec,
    build_case_grid,
)
from .fpu import (
    DEFAULT_CV_CUTOFF_FRACTION,
    DEFAULT_DT_S,
    DEFAULT_EOL_CAPACITY_FRACTION,
    DEFAULT_EVENT_TOLERANCE_V,
    DEFAULT_MAX_CYCLES,
    DEFAULT_MAX_STEPS,
    CyclingProtocol,
)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Unparseable or inconsistent run configuration."""


# unit suffix -> (kind, scale to base unit)
_UNIT_SCALES = {
    "ohm": ("ohm", 1.0),
    "mohm": ("ohm", 1e-3),
    "ah": ("ah", 1.0),
    "mah": ("ah", 1e-3),
    "v": ("v", 1.0),
    "mv": ("v", 1e-3),
    "a": ("a", 1.0),
    "ma": ("a", 1e-3),
    "s": ("s", 1.0),
    "min": ("s", 60.0),
    "h": ("s", 3600.0),
    "f": ("f", 1.0),
}

_QUANTITY_RE = re.compile(r"\s*([-+0-9.eE]+)\s*([a-zA-Z]*)\s*\Z")


def parse_quantity(text: str, kind: str) -> float:
    """Parse `<number>[ <unit>]` into base units (ohm, Ah, V, A, s, F).

    A bare number is taken to already be in base units.
    """
    m = _QUANTITY_RE.match(text)
    if m is None:
        raise ConfigError(f"cannot parse quantity {text!r}")
    try:
        value = float(m.group(1))
    except ValueError:
        raise ConfigError(f"cannot parse number in quantity {text!r}") from None
    unit = m.group(2).lower()
    if unit == "":
        return value
    if unit not in _UNIT_SCALES:
        raise ConfigError(f"unknown unit {m.group(2)!r} in {text!r}")
    base, scale = _UNIT_SCALES[unit]
    if base != kind:
        raise ConfigError(
            f"unit {m.group(2)!r} in {text!r} is not a {kind} unit"
        )
    return value * scale


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run settings; every field has a default."""

    # [run]
    out_dir: str = "out"
    master_seed: int = DEFAULT_MASTER_SEED
    workers: int = 0  # 0 = auto: PACKLIFE_WORKERS env var, else 1
    approach: str = "both"  # "1" | "2" | "both"
    n_exp_pu: int = DEFAULT_N_EXP_PU
    bins: int = 40
    # [ageing]
    mu_s: float = DEFAULT_MU_S
    mu_e: float = DEFAULT_MU_E
    # [electrical]
    q_nom_ah: float = DEFAULT_Q_NOM_AH
    r_nom_ohm: float = DEFAULT_R_NOM_OHM
    v_min: float = DEFAULT_V_MIN
    v_max: float = DEFAULT_V_MAX
    i_1c_a: float = 0.0  # 0 selects the 1C default (-q_nom)
    r1_ohm: float = 0.0  # accepted, unused by the zero-order model
    c1_f: float = 0.0
    # [ocv]
    ocv_csv: str = ""  # empty selects the built-in table
    # [protocol]
    dt_s: float = DEFAULT_DT_S
    cv_cutoff_fraction: float = DEFAULT_CV_CUTOFF_FRACTION
    eol_capacity_fraction: float = DEFAULT_EOL_CAPACITY_FRACTION
    event_tolerance_v: float = DEFAULT_EVENT_TOLERANCE_V
    max_cycles: int = DEFAULT_MAX_CYCLES
    max_steps: int = DEFAULT_MAX_STEPS
    extrapolation_factor: int = 1
    initial_soc: float = 0.5
    # [grid]
    sigma_s_rel_values: tuple[float, ...] = DEFAULT_SIGMA_S_REL
    sigma_e_rel_values: tuple[float, ...] = DEFAULT_SIGMA_E_REL
    rho_values: tuple[float, ...] = DEFAULT_RHO_DEG
    n_p_values: tuple[int, ...] = DEFAULT_N_P
    case_filter: tuple[str, ...] = ()
    # [gm]
    n_s_values: tuple[int, ...] = (2, 10, 50, 200)
    n_exp_gm: int = 10_000
    resample_seed: int = 0
    gm_enabled: bool = True

    def __post_init__(self) -> None:
        if self.approach not in ("1", "2", "both"):
            raise ConfigError(f"approach must be 1, 2 or both (got {self.approach!r})")
        if self.workers < 0:
            raise ConfigError(f"workers must be non-negative (got {self.workers})")

    # construction of domain objects ------------------------------------

    def approaches(self) -> tuple[int, ...]:
        return (1, 2) if self.approach == "both" else (int(self.approach),)

    def resolved_workers(self) -> int:
        from .engine import default_workers

        return self.workers if self.workers >= 1 else default_workers()

    def base_distributions(self) -> AgeingDistributions:
        # Sigmas live on the grid axes as relative values; the base carries
        # the means only.
        return AgeingDistributions(mu_s=self.mu_s, sigma_s=0.0, mu_e=self.mu_e, sigma_e=0.0)

    def electrical_params(self) -> CellElectricalParams:
        return CellElectricalParams(
            q_nom=self.q_nom_ah,
            r_nom=self.r_nom_ohm,
            v_min=self.v_min,
            v_max=self.v_max,
            i_1c=self.i_1c_a,
            r1=self.r1_ohm if self.r1_ohm > 0 else None,
            c1=self.c1_f if self.c1_f > 0 else None,
        )

    def ocv_curve(self) -> OcvCurve:
        if self.ocv_csv:
            return OcvCurve.from_csv(self.ocv_csv)
        return OcvCurve.default()

    def protocol(self) -> CyclingProtocol:
        return CyclingProtocol(
            dt=self.dt_s,
            cv_cutoff_fraction=self.cv_cutoff_fraction,
            eol_capacity_fraction=self.eol_capacity_fraction,
            event_tolerance=self.event_tolerance_v,
            max_cycles=self.max_cycles,
            max_steps=self.max_steps,
            extrapolation_factor=self.extrapolation_factor,
        )

    def gm_spec(self) -> GmSpec:
        return GmSpec(
            n_s_values=self.n_s_values,
            n_exp_gm=self.n_exp_gm,
            resample_seed=self.resample_seed,
        )

    def cases(self) -> list[CaseSpec]:
        """Resolved case list: full grid restricted by the case filter."""
        grid = build_case_grid(
            n_exp_pu=self.n_exp_pu,
            approach=self.approaches()[0],
            master_seed=self.master_seed,
            sigma_s_rel_values=self.sigma_s_rel_values,
            sigma_e_rel_values=self.sigma_e_rel_values,
            rho_values=self.rho_values,
            n_p_values=self.n_p_values,
        )
        if not self.case_filter:
            return grid
        return [c for c in grid if any(f in c.case_id for f in self.case_filter)]

    # serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, value in d.items():
            if isinstance(value, tuple):
                d[key] = list(value)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        for f in fields(cls):
            if f.name in kwargs and isinstance(kwargs[f.name], list):
                conv = int if f.name == "n_p_values" else (
                    str if f.name == "case_filter" else float
                )
                if f.name == "n_s_values":
                    conv = int
                kwargs[f.name] = tuple(conv(v) for v in kwargs[f.name])
        return cls(**kwargs)


# INI schema: section -> key -> (RunConfig field, parser)
def _quantity(kind):
    return lambda s: parse_quantity(s, kind)


def _float_list(s: str) -> tuple[float, ...]:
    parts = [p for p in re.split(r"[,\s]+", s.strip()) if p]
    if not parts:
        raise ConfigError("empty value list")
    return tuple(float(p) for p in parts)


def _int_list(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in re.split(r"[,\s]+", s.strip()) if p)


def _str_list(s: str) -> tuple[str, ...]:
    return tuple(p for p in re.split(r"[,\s]+", s.strip()) if p)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean {s!r}")


_SCHEMA: "dict[str, dict[str, tuple[str, object]]]" = {
    "meta": {
        "schema_version": ("", int),  # checked, not stored
    },
    "run": {
        "out_dir": ("out_dir", str),
        "master_seed": ("master_seed", int),
        "workers": ("workers", int),
        "approach": ("approach", str),
        "n_exp_pu": ("n_exp_pu", int),
        "bins": ("bins", int),
    },
    "ageing": {
        "mu_s": ("mu_s", float),
        "mu_e": ("mu_e", float),
    },
    "electrical": {
        "q_nom": ("q_nom_ah", _quantity("ah")),
        "r_nom": ("r_nom_ohm", _quantity("ohm")),
        "v_min": ("v_min", _quantity("v")),
        "v_max": ("v_max", _quantity("v")),
        "i_1c": ("i_1c_a", _quantity("a")),
        "r1": ("r1_ohm", _quantity("ohm")),
        "c1": ("c1_f", _quantity("f")),
    },
    "ocv": {
        "csv": ("ocv_csv", str),
    },
    "protocol": {
        "dt": ("dt_s", _quantity("s")),
        "cv_cutoff_fraction": ("cv_cutoff_fraction", float),
        "eol_capacity_fraction": ("eol_capacity_fraction", float),
        "event_tolerance": ("event_tolerance_v", _quantity("v")),
        "max_cycles": ("max_cycles", int),
        "max_steps": ("max_steps", lambda s: int(float(s))),
        "extrapolation_factor": ("extrapolation_factor", int),
        "initial_soc": ("initial_soc", float),
    },
    "grid": {
        "sigma_s_rel": ("sigma_s_rel_values", _float_list),
        "sigma_e_rel": ("sigma_e_rel_values", _float_list),
        "rho_deg": ("rho_values", _float_list),
        "n_p": ("n_p_values", _int_list),
        "cases": ("case_filter", _str_list),
    },
    "gm": {
        "n_s": ("n_s_values", _int_list),
        "n_exp_gm": ("n_exp_gm", lambda s: int(float(s))),
        "resample_seed": ("resample_seed", int),
        "enabled": ("gm_enabled", _bool),
    },
}


def load_config(path: str) -> RunConfig:
    """Load a RunConfig from an INI file or from a manifest.json echo."""
    if path.endswith(".json"):
        return _load_manifest(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None

    kwargs: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            field_name, parse = _SCHEMA[section][key]
            if section == "meta" and key == "schema_version":
                if int(raw) != SCHEMA_VERSION:
                    raise ConfigError(
                        f"{path}: unsupported schema_version {raw} (expected {SCHEMA_VERSION})"
                    )
                continue
            if raw.strip() == "":
                continue  # empty value keeps the default
            try:
                kwargs[field_name] = parse(raw)
            except ConfigError:
                raise
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{path}: bad value for {key!r} in [{section}]: {exc}") from None
    try:
        return RunConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _load_manifest(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse manifest {path}: {exc}") from None
    if not isinstance(manifest, dict) or "config" not in manifest:
        raise ConfigError(f"{path}: not a run manifest (missing 'config')")
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported manifest schema_version")
    return RunConfig.from_dict(manifest["config"])


def manifest_dict(cfg: RunConfig) -> dict:
    """Manifest content: config echo plus seed and versions.

    Deliberately timestamp-free so identical runs write identical bytes.
    """
    versions = {
        "python": ".".join(str(v) for v in sys.version_info[:3]),
        "numpy": np.__version__,
    }
    try:
        import numba

        versions["numba"] = numba.__version__
    except ImportError:
        pass
    from . import __version__

    return {
        "schema_version": SCHEMA_VERSION,
        "master_seed": cfg.master_seed,
        "config": cfg.to_dict(),
        "versions": versions,
    }


def dump_manifest(cfg: RunConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Return cfg with non-None override values applied (CLI layer)."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    if not changes:
        return cfg
    return replace(cfg, **changes)
