"""Config parsing, manifest echo, and the CLI subcommands end to end."""

import configparser
import json
import math

import numpy as np
import pytest

from packlife import cli
from packlife.config import (
    ConfigError,
    RunConfig,
    apply_overrides,
    dump_manifest,
    load_config,
    parse_quantity,
)
from packlife.engine import chi_pu
from packlife.reporting import read_records_csv, write_records_csv


# --- quantities ---------------------------------------------------------------


def test_parse_quantity_accepts_si_suffixes():
    assert parse_quantity("10 mOhm", "ohm") == pytest.approx(0.01, abs=1e-15)
    assert parse_quantity("30 mohm", "ohm") == pytest.approx(0.03, abs=1e-15)
    assert parse_quantity("3000 mAh", "ah") == pytest.approx(3.0, abs=1e-12)
    assert parse_quantity("0.5 min", "s") == 30.0
    assert parse_quantity("2 h", "s") == 7200.0
    assert parse_quantity("1 mV", "v") == pytest.approx(1e-3, abs=1e-18)
    assert parse_quantity("-3 A", "a") == -3.0
    assert parse_quantity("42", "ohm") == 42.0  # bare numbers are base units
    assert parse_quantity("1e-6 V", "v") == 1e-6


def test_parse_quantity_rejects_mismatched_or_unknown_units():
    with pytest.raises(ConfigError, match="not a ohm unit"):
        parse_quantity("3 Ah", "ohm")
    with pytest.raises(ConfigError, match="unknown unit"):
        parse_quantity("5 xyz", "ohm")
    with pytest.raises(ConfigError):
        parse_quantity("abc", "ohm")
    with pytest.raises(ConfigError):
        parse_quantity("", "ohm")


# --- INI loading -----------------------------------------------------------


def test_empty_config_is_the_default_run(tmp_path):
    path = tmp_path / "empty.ini"
    path.write_text("")
    assert load_config(str(path)) == RunConfig()


def test_unknown_sections_and_keys_are_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[nope]\nx = 1\n")
    with pytest.raises(ConfigError, match=r"unknown section \[nope\]"):
        load_config(str(path))
    path.write_text("[run]\nbogus = 1\n")
    with pytest.raises(ConfigError, match="'bogus'"):
        load_config(str(path))


def test_schema_version_is_checked(tmp_path):
    path = tmp_path / "v.ini"
    path.write_text("[meta]\nschema_version = 1\n")
    assert load_config(str(path)) == RunConfig()
    path.write_text("[meta]\nschema_version = 2\n")
    with pytest.raises(ConfigError, match="schema_version"):
        load_config(str(path))


def test_quantities_and_lists_parse_from_ini(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text(
        "[electrical]\n"
        "r_nom = 30 mOhm\n"
        "q_nom = 3000 mAh\n"
        "v_min = 2995 mV\n"
        "[protocol]\n"
        "dt = 0.5 min\n"
        "event_tolerance = 1 mV\n"
        "[grid]\n"
        "n_p = 2, 4 10\n"
        "sigma_s_rel = 0.001 0.01\n"
        "cases = rho124.5,np2\n"
        "[gm]\n"
        "n_exp_gm = 1e4\n"
        "enabled = off\n"
    )
    cfg = load_config(str(path))
    assert cfg.r_nom_ohm == pytest.approx(0.03, abs=1e-15)
    assert cfg.q_nom_ah == pytest.approx(3.0, abs=1e-12)
    assert cfg.v_min == pytest.approx(2.995, abs=1e-12)
    assert cfg.dt_s == 30.0
    assert cfg.event_tolerance_v == pytest.approx(1e-3, abs=1e-18)
    assert cfg.n_p_values == (2, 4, 10)
    assert cfg.sigma_s_rel_values == (0.001, 0.01)
    assert cfg.case_filter == ("rho124.5", "np2")
    assert cfg.n_exp_gm == 10000
    assert cfg.gm_enabled is False


def test_empty_values_keep_defaults(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text("[run]\nn_exp_pu =\n")
    assert load_config(str(path)).n_exp_pu == RunConfig().n_exp_pu


def test_bad_values_name_the_file(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text("[run]\nn_exp_pu = many\n")
    with pytest.raises(ConfigError, match="cfg.ini"):
        load_config(str(path))


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(approach="x")
    with pytest.raises(ConfigError):
        RunConfig(workers=-1)


def test_apply_overrides_skips_none():
    cfg = RunConfig()
    same = apply_overrides(cfg, master_seed=None, out_dir=None)
    assert same == cfg
    changed = apply_overrides(cfg, master_seed=7)
    assert changed.master_seed == 7 and changed.out_dir == cfg.out_dir


# --- manifest echo ---------------------------------------------------------


def test_manifest_round_trip(tmp_path):
    cfg = RunConfig(
        n_exp_pu=7,
        master_seed=99,
        n_p_values=(2, 3),
        sigma_e_rel_values=(0.01,),
        case_filter=("np2",),
        gm_enabled=False,
    )
    path = tmp_path / "manifest.json"
    dump_manifest(cfg, str(path))
    assert load_config(str(path)) == cfg
    payload = json.loads(path.read_text())
    assert payload["schema_version"] == 1
    assert payload["master_seed"] == 99
    assert "numpy" in payload["versions"]


def test_manifest_rejects_foreign_json(tmp_path):
    path = tmp_path / "other.json"
    path.write_text(json.dumps({"hello": 1}))
    with pytest.raises(ConfigError, match="missing 'config'"):
        load_config(str(path))
    path.write_text("{broken")
    with pytest.raises(ConfigError):
        load_config(str(path))


# --- records CSV round trip ---------------------------------------------------


def test_records_csv_round_trip_preserves_floats(tmp_path):
    from packlife.engine import ExperimentRecord

    records = [
        ExperimentRecord("ss0.001_se0.01_rho124.5_np2", 2, 0, "ok",
                         123.45600000000002, 130.0, chi_pu(130.0, 123.45600000000002),
                         5.901234567890123, 42),
        ExperimentRecord("ss0.001_se0.01_rho124.5_np2", 2, 1, "cycle_budget",
                         float("nan"), float("nan"), float("nan"), float("nan"), 0),
    ]
    path = tmp_path / "records_x.csv"
    write_records_csv(str(path), records)
    loaded = read_records_csv(str(path))
    assert len(loaded) == 2
    assert loaded[0] == records[0]  # repr round-trip is exact
    assert loaded[1].status == "cycle_budget"
    assert math.isnan(loaded[1].chi_pu)


def test_records_csv_errors_name_the_line(tmp_path):
    from packlife.reporting import ReportError

    path = tmp_path / "records_x.csv"
    path.write_text("wrong,header\n")
    with pytest.raises(ReportError, match="bad header"):
        read_records_csv(str(path))
    path.write_text(
        "case_id,approach,exp_index,status,efc_fpu_eol,efc_rpu_eol,chi_pu,"
        "q_pu_nom_1c,cycles_run\nonly,three,columns\n"
    )
    with pytest.raises(ReportError, match=":2"):
        read_records_csv(str(path))


# --- CLI end to end ------------------------------------------------------------
#
# A short-lived population and a single tiny case keep the full pipeline
# runs below a second while writing every output file kind.

TINY_INI = """\
[meta]
schema_version = 1

[run]
master_seed = 123
n_exp_pu = 5
approach = both
bins = 10

[ageing]
mu_e = 40

[grid]
sigma_s_rel = 0.0028
sigma_e_rel = 0.03
rho_deg = 124.5
n_p = 3

[gm]
n_s = 2
n_exp_gm = 50
"""

TINY_CASE = "ss0.0028_se0.03_rho124.5_np3"


@pytest.fixture
def tiny_ini(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY_INI)
    return path


def _run_cli(*argv):
    return cli.main([str(a) for a in argv])


def test_cli_run_writes_all_outputs(tiny_ini, tmp_path, capsys):
    out = tmp_path / "out"
    assert _run_cli("run", "--config", tiny_ini, "--out", out) == 0
    captured = capsys.readouterr()
    assert TINY_CASE in captured.out

    records = read_records_csv(str(out / f"records_{TINY_CASE}.csv"))
    assert len(records) == 10  # 5 experiments x 2 approaches
    assert all(r.ok for r in records)
    for r in records:
        assert r.chi_pu == chi_pu(r.efc_rpu_eol, r.efc_fpu_eol)

    summary = (out / "summary_pu.csv").read_text().splitlines()
    assert len(summary) == 3  # header + one row per approach
    assert summary[0].startswith("case_id,approach,")
    gm = (out / "summary_gm.csv").read_text().splitlines()
    assert len(gm) == 3  # header + 1 n_s x 2 approaches
    assert (out / "manifest.json").exists()


def test_cli_rerun_and_workers_are_byte_identical(tiny_ini, tmp_path):
    outs = [tmp_path / f"out{i}" for i in range(3)]
    assert _run_cli("run", "--config", tiny_ini, "--out", outs[0], "--workers", 1) == 0
    assert _run_cli("run", "--config", tiny_ini, "--out", outs[1], "--workers", 1) == 0
    assert _run_cli("run", "--config", tiny_ini, "--out", outs[2], "--workers", 2) == 0
    for name in (f"records_{TINY_CASE}.csv", "summary_pu.csv", "summary_gm.csv"):
        blobs = [(o / name).read_bytes() for o in outs]
        assert blobs[0] == blobs[1] == blobs[2]
    manifests = [json.loads((o / "manifest.json").read_text()) for o in outs]
    # identical apart from the explicit worker and output-directory overrides
    for m in manifests:
        m["config"]["workers"] = 0
        m["config"]["out_dir"] = "out"
    assert manifests[0] == manifests[1] == manifests[2]


def test_cli_manifest_reproduces_the_run(tiny_ini, tmp_path):
    out1 = tmp_path / "out1"
    out2 = tmp_path / "out2"
    assert _run_cli("run", "--config", tiny_ini, "--out", out1) == 0
    assert _run_cli("run", "--config", out1 / "manifest.json", "--out", out2) == 0
    name = f"records_{TINY_CASE}.csv"
    assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_cli_case_filter_limits_the_run(tmp_path):
    ini = tmp_path / "two.ini"
    ini.write_text(TINY_INI.replace("rho_deg = 124.5", "rho_deg = 124.5 105.7"))
    out = tmp_path / "out"
    assert _run_cli("run", "--config", ini, "--out", out, "--cases", "rho105.7") == 0
    assert not (out / f"records_{TINY_CASE}.csv").exists()
    assert (out / "records_ss0.0028_se0.03_rho105.7_np3.csv").exists()


def test_cli_empty_case_selection_fails_cleanly(tiny_ini, tmp_path, capsys):
    assert _run_cli("run", "--config", tiny_ini, "--out", tmp_path / "x",
                    "--cases", "nomatch") == 2
    assert "case selection is empty" in capsys.readouterr().err


def test_cli_report_builds_histograms_and_trends(tiny_ini, tmp_path):
    out = tmp_path / "out"
    assert _run_cli("run", "--config", tiny_ini, "--out", out) == 0
    assert _run_cli("report", out) == 0
    for approach in (1, 2):
        hist = (out / f"hist_{TINY_CASE}_a{approach}.csv").read_text().splitlines()
        assert hist[0] == "chi,bin_low,bin_high,frequency"
        freq = sum(float(line.split(",")[3]) for line in hist[1:])
        assert freq == pytest.approx(1.0, abs=1e-9)
        for axis in ("sigma_s_rel", "sigma_e_rel", "rho_deg", "n_p"):
            trend = (out / f"trend_{axis}_a{approach}.csv").read_text().splitlines()
            assert len(trend) == 2  # single swept value -> one row
        gm_trend = (out / f"trend_gm_ns_a{approach}.csv").read_text().splitlines()
        assert len(gm_trend) == 2


def test_cli_report_trend_rows_follow_the_grid(tmp_path):
    ini = tmp_path / "multi.ini"
    ini.write_text(TINY_INI.replace("n_p = 3", "n_p = 2 4"))
    out = tmp_path / "out"
    assert _run_cli("run", "--config", ini, "--out", out) == 0
    assert _run_cli("report", out) == 0
    trend = (out / "trend_n_p_a2.csv").read_text().splitlines()
    assert trend[0] == "n_p,chi_mean,chi_std,n_cases"
    assert len(trend) == 3
    assert trend[1].split(",")[0] == "2"
    assert trend[2].split(",")[0] == "4"


def test_cli_report_single_record_histogram(tmp_path):
    from packlife.engine import ExperimentRecord

    rec = ExperimentRecord("ss0.001_se0.01_rho124.5_np2", 2, 0, "ok",
                           600.0, 660.0, 10.0, 5.9, 40)
    write_records_csv(str(tmp_path / "records_ss0.001_se0.01_rho124.5_np2.csv"), [rec])
    assert _run_cli("report", tmp_path) == 0
    hist = (tmp_path / "hist_ss0.001_se0.01_rho124.5_np2_a2.csv").read_text().splitlines()
    assert len(hist) == 2
    assert float(hist[1].split(",")[3]) == 1.0


def test_cli_report_needs_records(tmp_path, capsys):
    assert _run_cli("report", tmp_path) == 2
    assert "no records" in capsys.readouterr().err


def test_cli_grid_lists_cases(capsys):
    assert _run_cli("grid", "--np", "2,4", "--cases", "rho97.3") == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-1] == "total: 18 cases x 2 approach(es)"
    assert all("rho97.3" in line for line in out[:-1])
    assert len(out) == 19


# --- fit subcommand ---------------------------------------------------------


def _write_fit_inputs(tmp_path, n=4000, rho=105.7):
    import math as _math

    rng = np.random.default_rng(42)
    k = -_math.tan(_math.radians(rho))
    bol = rng.normal(0.9939, 0.0028, size=n)
    eol = rng.normal(615.85, 68.28, size=n)
    q_grid = np.linspace(0.8, 1.0, 41)
    r_grid = (1.0 + k) - k * q_grid

    bol_csv = tmp_path / "bol.csv"
    bol_csv.write_text(
        "cell_id,q_tilde\n"
        + "".join(f"c{i},{float(v)!r}\n" for i, v in enumerate(bol))
    )
    eol_csv = tmp_path / "eol.csv"
    eol_csv.write_text(
        "cell_id,efc_eol\n"
        + "".join(f"c{i},{float(v)!r}\n" for i, v in enumerate(eol))
    )
    rq_csv = tmp_path / "rq.csv"
    rq_csv.write_text(
        "q_tilde,r_tilde\n"
        + "".join(f"{float(q)!r},{float(r)!r}\n" for q, r in zip(q_grid, r_grid))
    )
    return bol_csv, eol_csv, rq_csv


def test_cli_fit_recovers_parameters(tmp_path, capsys):
    bol_csv, eol_csv, rq_csv = _write_fit_inputs(tmp_path)
    out = tmp_path / "fit"
    assert _run_cli("fit", "--bol", bol_csv, "--eol", eol_csv,
                    "--rq", rq_csv, "--out", out) == 0
    assert "[ageing]" in capsys.readouterr().out

    parser = configparser.ConfigParser()
    parser.read(out / "fit_fragment.ini")
    mu_s = parser.getfloat("ageing", "mu_s")
    mu_e = parser.getfloat("ageing", "mu_e")
    rho = parser.getfloat("grid", "rho_deg")
    # sample means land within 5 standard errors of the generating values
    assert abs(mu_s - 0.9939) < 5 * 0.0028 / math.sqrt(4000)
    assert abs(mu_e - 615.85) < 5 * 68.28 / math.sqrt(4000)
    # the noise-free line comes back to float precision
    assert abs(rho - 105.7) < 1e-9


def test_cli_fit_names_file_and_line_on_bad_input(tmp_path, capsys):
    bol_csv, eol_csv, rq_csv = _write_fit_inputs(tmp_path, n=10)
    bol_csv.write_text("cell_id,q_tilde\nc0,0.99\nc1,not-a-number\n")
    assert _run_cli("fit", "--bol", bol_csv, "--eol", eol_csv, "--rq", rq_csv) == 2
    err = capsys.readouterr().err
    assert "bol.csv:3" in err


def test_cli_fit_rejects_missing_file(tmp_path, capsys):
    bol_csv, eol_csv, rq_csv = _write_fit_inputs(tmp_path, n=10)
    assert _run_cli("fit", "--bol", tmp_path / "nope.csv", "--eol", eol_csv,
                    "--rq", rq_csv) == 2
    assert "nope.csv" in capsys.readouterr().err
