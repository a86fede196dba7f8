"""OCV curve, current-split solver, and coulomb counting."""

import numpy as np
import pytest

from packlife.electrics import (
    CellElectricalParams,
    CellState,
    OcvCurve,
    advance_soc,
    ocv_eval,
    solve_cc_current_split,
    solve_cv_current,
)


def test_default_curve_breakpoints(curve):
    assert ocv_eval(curve, 0.0) == 3.00
    assert ocv_eval(curve, 0.5) == 3.68
    assert ocv_eval(curve, 1.0) == 4.20


def test_interpolation_between_breakpoints(curve):
    assert ocv_eval(curve, 0.55) == pytest.approx((3.68 + 3.74) / 2, abs=1e-12)
    assert ocv_eval(curve, 0.05) == pytest.approx((3.00 + 3.45) / 2, abs=1e-12)


def test_curve_is_strictly_increasing(curve):
    grid = np.linspace(0.0, 1.0, 101)
    values = [ocv_eval(curve, float(z)) for z in grid]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_domain_errors_and_slack(curve):
    with pytest.raises(ValueError):
        ocv_eval(curve, -0.01)
    with pytest.raises(ValueError):
        ocv_eval(curve, 1.01)
    # within the numerical slack the endpoint value is returned
    assert ocv_eval(curve, 1.0 + 1e-10) == 4.20
    assert ocv_eval(curve, -1e-10) == 3.00


def test_soc_at_inverts_the_curve(curve):
    for z in (0.0, 0.123, 0.5, 0.87, 1.0):
        assert curve.soc_at(ocv_eval(curve, z)) == pytest.approx(z, abs=1e-12)


def test_curve_validation():
    with pytest.raises(ValueError):
        OcvCurve.from_points([(0.0, 3.0), (0.5, 3.0), (1.0, 4.2)])  # flat segment
    with pytest.raises(ValueError):
        OcvCurve.from_points([(0.1, 3.0), (1.0, 4.2)])  # does not start at 0
    with pytest.raises(ValueError):
        OcvCurve.from_points([(0.0, 3.0), (0.9, 4.2)])  # does not end at 1


def test_curve_csv_round_trip(tmp_path, curve):
    path = tmp_path / "ocv.csv"
    lines = ["soc,ocv_volts"]
    lines += [f"{float(s)!r},{float(v)!r}" for s, v in zip(curve.soc, curve.ocv)]
    path.write_text("\n".join(lines) + "\n")
    loaded = OcvCurve.from_csv(str(path))
    assert np.array_equal(loaded.soc, curve.soc)
    assert np.array_equal(loaded.ocv, curve.ocv)


def test_curve_csv_errors_name_the_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("soc,ocv_volts\n0.0,3.0\nnot-a-number,3.5\n")
    with pytest.raises(ValueError, match=r"bad\.csv:3"):
        OcvCurve.from_csv(str(path))
    path.write_text("wrong,header\n")
    with pytest.raises(ValueError, match="header"):
        OcvCurve.from_csv(str(path))


# --- parallel current split -------------------------------------------------


def test_current_split_frozen_example(curve):
    """Two cells (3.68 V / 10 mOhm and 3.82 V / 20 mOhm) discharged at 6 A:
    v = (3.68/0.01 + 3.82/0.02 - 6) / (1/0.01 + 1/0.02)."""
    cells = [CellState(soc=0.5, q=3.0, r=0.01), CellState(soc=0.7, q=3.0, r=0.02)]
    v, currents = solve_cc_current_split(cells, curve, -6.0)
    assert v == pytest.approx(3.6866666666666665, abs=1e-12)
    assert currents[0] == pytest.approx(2.0 / 3.0, abs=1e-9)
    assert currents[1] == pytest.approx(-20.0 / 3.0, abs=1e-9)


def test_current_split_conserves_total(curve):
    rng = np.random.default_rng(5)
    for _ in range(20):
        cells = [
            CellState(soc=float(rng.uniform(0.05, 0.95)), q=3.0, r=float(rng.uniform(0.004, 0.02)))
            for _ in range(int(rng.integers(2, 9)))
        ]
        i_total = float(rng.uniform(-12.0, 12.0))
        _, currents = solve_cc_current_split(cells, curve, i_total)
        assert sum(currents) == pytest.approx(i_total, abs=1e-9)


def test_identical_cells_split_evenly(curve):
    cells = [CellState(soc=0.4, q=3.0, r=0.007)] * 4
    _, currents = solve_cc_current_split(cells, curve, -12.0)
    assert currents == pytest.approx([-3.0] * 4, abs=1e-12)


def test_single_cell_takes_the_total(curve):
    cells = [CellState(soc=0.6, q=3.0, r=0.007)]
    v, currents = solve_cc_current_split(cells, curve, -3.0)
    assert currents[0] == pytest.approx(-3.0, abs=1e-12)
    assert v == pytest.approx(ocv_eval(curve, 0.6) - 3.0 * 0.007, abs=1e-12)


def test_cv_currents_follow_ohms_law(curve):
    cells = [CellState(soc=0.5, q=3.0, r=0.01), CellState(soc=0.9, q=3.0, r=0.02)]
    currents = solve_cv_current(cells, curve, 4.2)
    assert currents[0] == pytest.approx((4.2 - 3.68) / 0.01, abs=1e-12)
    assert currents[1] == pytest.approx((4.2 - 4.05) / 0.02, abs=1e-12)


def test_empty_cell_list_rejected(curve):
    with pytest.raises(ValueError):
        solve_cc_current_split([], curve, -3.0)
    with pytest.raises(ValueError):
        solve_cv_current([], curve, 4.2)


# --- coulomb counting ---------------------------------------------------------


def test_advance_soc_step():
    cell = CellState(soc=0.5, q=3.0, r=0.007)
    out = advance_soc(cell, -3.0, 3600.0)
    assert out.soc == pytest.approx(0.5 - 1.0, abs=1e-12)  # one full hour at 1C
    assert out.throughput == pytest.approx(3.0, abs=1e-12)


def test_advance_soc_is_reversible():
    cell = CellState(soc=0.31, q=2.7, r=0.009)
    forward = advance_soc(cell, 1.7, 42.0)
    back = advance_soc(forward, -1.7, 42.0)
    assert back.soc == pytest.approx(cell.soc, abs=1e-15)
    # throughput accumulates regardless of direction
    assert back.throughput == pytest.approx(2 * 1.7 * 42.0 / 3600.0, abs=1e-15)


def test_advance_soc_rejects_negative_dt():
    with pytest.raises(ValueError):
        advance_soc(CellState(soc=0.5, q=3.0, r=0.007), 1.0, -1.0)


# --- parameter containers ------------------------------------------------------


def test_default_discharge_current_is_one_c():
    params = CellElectricalParams(q_nom=2.5, r_nom=0.007)
    assert params.i_1c == -2.5


def test_params_validation():
    with pytest.raises(ValueError):
        CellElectricalParams(q_nom=-1.0)
    with pytest.raises(ValueError):
        CellElectricalParams(r_nom=0.0)
    with pytest.raises(ValueError):
        CellElectricalParams(v_min=4.2, v_max=4.2)
    with pytest.raises(ValueError):
        CellElectricalParams(i_1c=2.0)  # charge sign


def test_cell_state_validation():
    with pytest.raises(ValueError):
        CellState(soc=0.5, q=0.0, r=0.007)
    with pytest.raises(ValueError):
        CellState(soc=0.5, q=3.0, r=-0.001)


def test_states_are_immutable(curve):
    cell = CellState(soc=0.5, q=3.0, r=0.007)
    with pytest.raises(AttributeError):
        cell.soc = 0.6
    with pytest.raises(AttributeError):
        curve.soc = (0.0, 1.0)
