"""Hot simulation kernels with a numba path and a pure-numpy fallback.

The unit-lifetime simulation (bring-up charge, then repeated CC discharge /
CC-CV charge cycles with ageing applied at cycle boundaries) dominates the
runtime of every experiment, so it is implemented twice with identical
semantics:

  * a scalar-loop version compiled with numba @njit when numba is available,
  * a vectorized numpy version used as fallback.

Backend selection: numba is used when importable unless the environment
variable PACKLIFE_NUMBA is set to 0/false/off/no.  `BACKEND` reports the
active choice.  Both backends are deterministic; results agree to float
roundoff (not bitwise, because summation order differs).

Kernel contract (shared by both implementations), positional arguments:

    z0            initial SOC applied to every cell
    a, b, c, d    per-cell ageing-line coefficients (float64 arrays, len n)
    xs, ys        OCV table breakpoints (soc, volts), strictly increasing
    q_nom         nominal cell capacity (Ah)
    i_cell_1c     signed per-cell 1C current (negative); unit total is n*i
    v_min, v_max  terminal-voltage cycling window
    dt            integration step (s)
    cv_cutoff_frac CV phase ends when total current <= frac * |unit 1C|
    eol_frac      end-of-life capacity fraction (both EOL definitions)
    event_tol     voltage-crossing bisection tolerance (V)
    max_cycles    cycle budget
    max_steps     total integration-step budget (divergence guard)
    extrapolation replay factor K: each simulated cycle's per-cell EFC
                  increment is replayed K-1 times before re-simulating
    want_a1/a2    which end-of-life conditions must be reached before stopping

Returns a tuple:

    status        0 ok, 1 cycle budget exhausted, 2 step budget exhausted
    ah1           unit capacity measured in the first discharge (Ah)
    n_cycles      number of cycle slots filled (simulated + replayed)
    a1_cycle      1-based cycle index of voltage-capacity EOL (0 if not seen)
    q_a1, efc_a1  per-cell state in effect during that cycle
    a2_cycle      1-based first cycle whose ageing update pushed a cell
                  below eol_frac*q_nom (0 if not seen)
    q_a2, efc_a2  per-cell state at the last boundary with all cells above
    caps          measured unit capacity per cycle (Ah)
    mins, maxs    min/max cell capacity after each cycle's ageing update
    sefc          summed cell EFC after each cycle's ageing update
    bounds        (n_cycles, 2) discharge start/end times (s)

End-of-life bookkeeping: ageing is applied at cycle boundaries, so cell
capacities are piecewise-constant over cycles.  The voltage-capacity EOL
(a1) snaps to the first cycle whose measured capacity falls to or below
eol_frac * ah1, and reports the cell state in effect during that cycle.
The cell-capacity EOL (a2) reports the state at the last boundary where
every cell was still at or above eol_frac * q_nom, which keeps the
reconfigured-unit comparison provably conservative.
"""

from __future__ import annotations

import os

import numpy as np

ENV_FLAG = "PACKLIFE_NUMBA"

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False


def _env_disables_numba() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("0", "false", "off", "no")


def _simulate_loops(
    z0,
    a,
    b,
    c,
    d,
    xs,
    ys,
    q_nom,
    i_cell_1c,
    v_min,
    v_max,
    dt,
    cv_cutoff_frac,
    eol_frac,
    event_tol,
    max_cycles,
    max_steps,
    extrapolation,
    want_a1,
    want_a2,
):
    n = a.shape[0]
    m = xs.shape[0]
    i_pu = i_cell_1c * n
    i_chg = -i_pu
    i_cutoff = cv_cutoff_frac * i_chg

    z = np.full(n, z0)
    q = np.empty(n)
    r = np.empty(n)
    inv_r = np.empty(n)
    efc = np.zeros(n)
    thr = np.zeros(n)
    ocv_buf = np.empty(n)
    i_buf = np.empty(n)
    seg = np.zeros(n, dtype=np.int64)
    prev_q = np.empty(n)
    prev_efc = np.empty(n)
    delta_efc = np.zeros(n)

    q_a1 = np.zeros(n)
    efc_a1 = np.zeros(n)
    q_a2 = np.zeros(n)
    efc_a2 = np.zeros(n)
    caps = np.zeros(max_cycles)
    mins = np.zeros(max_cycles)
    maxs = np.zeros(max_cycles)
    sefc = np.zeros(max_cycles)
    bounds = np.zeros((max_cycles, 2))

    for j in range(n):
        q[j] = a[j] / b[j]
        r[j] = c[j]
        inv_r[j] = 1.0 / c[j]

    steps_left = max_steps
    status = 0
    a1_cycle = 0
    a2_cycle = 0
    ah1 = 0.0
    a1_threshold = 0.0
    t_clock = 0.0
    w = 0

    def interp_ocv(j, x):
        # piecewise-linear OCV with constant extrapolation; per-cell segment
        # hint makes the common slow-moving-SOC case O(1)
        if x <= xs[0]:
            seg[j] = 0
            return ys[0]
        if x >= xs[m - 1]:
            seg[j] = m - 2
            return ys[m - 1]
        k = seg[j]
        if k > m - 2:
            k = m - 2
        while x < xs[k]:
            k -= 1
        while x >= xs[k + 1]:
            k += 1
        seg[j] = k
        return ys[k] + (ys[k + 1] - ys[k]) * (x - xs[k]) / (xs[k + 1] - xs[k])

    def split_voltage(i_total):
        # terminal voltage for a known total current; fills ocv_buf
        s_inv = 0.0
        s_ov = 0.0
        for j in range(n):
            ocv_buf[j] = interp_ocv(j, z[j])
            s_inv += inv_r[j]
            s_ov += ocv_buf[j] * inv_r[j]
        return (s_ov + i_total) / s_inv

    def voltage_after(h, i_total):
        # terminal voltage after advancing h seconds with currents held at
        # i_buf; committed SOC is clamped, so the probe clamps too
        s_inv = 0.0
        s_ov = 0.0
        for j in range(n):
            znew = z[j] + i_buf[j] * h / (3600.0 * q[j])
            if znew < 0.0:
                znew = 0.0
            elif znew > 1.0:
                znew = 1.0
            s_inv += inv_r[j]
            s_ov += interp_ocv(j, znew) * inv_r[j]
        return (s_ov + i_total) / s_inv

    def commit(h):
        for j in range(n):
            znew = z[j] + i_buf[j] * h / (3600.0 * q[j])
            if znew < 0.0:
                znew = 0.0
            elif znew > 1.0:
                znew = 1.0
            z[j] = znew
            if i_buf[j] < 0.0:
                thr[j] -= i_buf[j] * h / 3600.0
            else:
                thr[j] += i_buf[j] * h / 3600.0

    def cc_phase(i_total, v_limit, going_up, budget):
        # constant-current phase until the terminal voltage crosses v_limit;
        # the crossing step is bisected to event_tol volts
        t = 0.0
        used = 0
        while True:
            v_now = split_voltage(i_total)
            if going_up:
                if v_now >= v_limit:
                    return t, used, 0
            else:
                if v_now <= v_limit:
                    return t, used, 0
            for j in range(n):
                i_buf[j] = (v_now - ocv_buf[j]) * inv_r[j]
            if used >= budget:
                return t, used, -1
            v_new = voltage_after(dt, i_total)
            crossed = (v_new >= v_limit) if going_up else (v_new <= v_limit)
            if crossed:
                lo = 0.0
                hi = dt
                v_h = v_new
                h = dt
                it = 0
                while abs(v_h - v_limit) > event_tol and it < 64:
                    mid = 0.5 * (lo + hi)
                    v_mid = voltage_after(mid, i_total)
                    c_mid = (v_mid >= v_limit) if going_up else (v_mid <= v_limit)
                    if c_mid:
                        hi = mid
                        v_h = v_mid
                        h = mid
                    else:
                        lo = mid
                    it += 1
                commit(h)
                return t + h, used + 1, 1
            commit(dt)
            t += dt
            used += 1

    def cv_phase(v_hold, budget):
        # constant-voltage phase until total current falls to the cutoff
        t = 0.0
        used = 0
        while True:
            i_tot = 0.0
            for j in range(n):
                ocv = interp_ocv(j, z[j])
                i_buf[j] = (v_hold - ocv) * inv_r[j]
                i_tot += i_buf[j]
            if i_tot <= i_cutoff:
                return t, used, 1
            if used >= budget:
                return t, used, -1
            commit(dt)
            t += dt
            used += 1

    # bring-up charge from the initial SOC; throughput is accounted in the
    # first cycle's ageing update
    t_cc, used, flag = cc_phase(i_chg, v_max, True, steps_left)
    steps_left -= used
    if flag < 0:
        status = 2
    else:
        t_cv, used, flag = cv_phase(v_max, steps_left)
        steps_left -= used
        if flag < 0:
            status = 2
        t_clock = t_cc + t_cv

    while status == 0 and w < max_cycles:
        w += 1
        t_dis_start = t_clock
        t_dis, used, flag = cc_phase(i_pu, v_min, False, steps_left)
        steps_left -= used
        if flag < 0:
            status = 2
            w -= 1
            break
        t_clock += t_dis
        ah_w = i_chg * t_dis / 3600.0
        caps[w - 1] = ah_w
        bounds[w - 1, 0] = t_dis_start
        bounds[w - 1, 1] = t_clock
        if w == 1:
            ah1 = ah_w
            a1_threshold = eol_frac * ah1
        if a1_cycle == 0 and ah_w <= a1_threshold:
            a1_cycle = w
            for j in range(n):
                q_a1[j] = q[j]
                efc_a1[j] = efc[j]

        t_cc, used, flag = cc_phase(i_chg, v_max, True, steps_left)
        steps_left -= used
        if flag < 0:
            status = 2
            w -= 1
            break
        t_clock += t_cc
        t_cv, used, flag = cv_phase(v_max, steps_left)
        steps_left -= used
        if flag < 0:
            status = 2
            w -= 1
            break
        t_clock += t_cv
        cycle_dur = t_clock - t_dis_start

        # ageing boundary: EFC from throughput, then capacity/resistance
        # from the per-cell lines
        qmin = 1e300
        qmax = -1e300
        efc_sum = 0.0
        for j in range(n):
            prev_q[j] = q[j]
            prev_efc[j] = efc[j]
            inc = thr[j] / (2.0 * q_nom)
            delta_efc[j] = inc
            efc[j] += inc
            thr[j] = 0.0
            q[j] = (a[j] - efc[j]) / b[j]
            r[j] = c[j] + d[j] * efc[j]
            inv_r[j] = 1.0 / r[j]
            if q[j] < qmin:
                qmin = q[j]
            if q[j] > qmax:
                qmax = q[j]
            efc_sum += efc[j]
        mins[w - 1] = qmin
        maxs[w - 1] = qmax
        sefc[w - 1] = efc_sum
        if a2_cycle == 0 and qmin < eol_frac * q_nom:
            a2_cycle = w
            for j in range(n):
                q_a2[j] = prev_q[j]
                efc_a2[j] = prev_efc[j]

        if (not want_a1 or a1_cycle > 0) and (not want_a2 or a2_cycle > 0):
            break

        # replay the last cycle's EFC increments K-1 times; measured
        # capacity is only re-evaluated on simulated cycles
        rep = 1
        while rep < extrapolation and w < max_cycles:
            w += 1
            qmin = 1e300
            qmax = -1e300
            efc_sum = 0.0
            for j in range(n):
                prev_q[j] = q[j]
                prev_efc[j] = efc[j]
                efc[j] += delta_efc[j]
                q[j] = (a[j] - efc[j]) / b[j]
                r[j] = c[j] + d[j] * efc[j]
                inv_r[j] = 1.0 / r[j]
                if q[j] < qmin:
                    qmin = q[j]
                if q[j] > qmax:
                    qmax = q[j]
                efc_sum += efc[j]
            caps[w - 1] = ah_w
            bounds[w - 1, 0] = t_clock
            bounds[w - 1, 1] = t_clock + t_dis
            t_clock += cycle_dur
            mins[w - 1] = qmin
            maxs[w - 1] = qmax
            sefc[w - 1] = efc_sum
            if a2_cycle == 0 and qmin < eol_frac * q_nom:
                a2_cycle = w
                for j in range(n):
                    q_a2[j] = prev_q[j]
                    efc_a2[j] = prev_efc[j]
            if (not want_a1 or a1_cycle > 0) and (not want_a2 or a2_cycle > 0):
                break
            rep += 1
        if (not want_a1 or a1_cycle > 0) and (not want_a2 or a2_cycle > 0):
            break

    if status == 0:
        done = (not want_a1 or a1_cycle > 0) and (not want_a2 or a2_cycle > 0)
        if not done:
            status = 1

    return (
        status,
        ah1,
        w,
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
    )


def _simulate_numpy(
    z0,
    a,
    b,
    c,
    d,
    xs,
    ys,
    q_nom,
    i_cell_1c,
    v_min,
    v_max,
    dt,
    cv_cutoff_frac,
    eol_frac,
    event_tol,
    max_cycles,
    max_steps,
    extrapolation,
    want_a1,
    want_a2,
):
    """Vectorized twin of _simulate_loops; same contract, numpy math."""
    n = a.shape[0]
    i_pu = i_cell_1c * n
    i_chg = -i_pu
    i_cutoff = cv_cutoff_frac * i_chg

    z = np.full(n, z0)
    q = a / b
    r = c.copy()
    inv_r = 1.0 / r
    efc = np.zeros(n)
    thr = np.zeros(n)
    i_buf = np.zeros(n)

    q_a1 = np.zeros(n)
    efc_a1 = np.zeros(n)
    q_a2 = np.zeros(n)
    efc_a2 = np.zeros(n)
    caps = np.zeros(max_cycles)
    mins = np.zeros(max_cycles)
    maxs = np.zeros(max_cycles)
    sefc = np.zeros(max_cycles)
    bounds = np.zeros((max_cycles, 2))

    state = {"steps_left": max_steps}
    status = 0
    a1_cycle = 0
    a2_cycle = 0
    ah1 = 0.0
    a1_threshold = 0.0
    t_clock = 0.0
    w = 0

    def voltage_after(h, i_total):
        znew = np.clip(z + i_buf * (h / 3600.0) / q, 0.0, 1.0)
        ocv = np.interp(znew, xs, ys)
        return (float(np.sum(ocv * inv_r)) + i_total) / float(np.sum(inv_r))

    def commit(h):
        z[:] = np.clip(z + i_buf * (h / 3600.0) / q, 0.0, 1.0)
        thr[:] = thr + np.abs(i_buf) * (h / 3600.0)

    def cc_phase(i_total, v_limit, going_up):
        t = 0.0
        while True:
            ocv = np.interp(z, xs, ys)
            v_now = (float(np.sum(ocv * inv_r)) + i_total) / float(np.sum(inv_r))
            crossed_now = v_now >= v_limit if going_up else v_now <= v_limit
            if crossed_now:
                return t, 0
            i_buf[:] = (v_now - ocv) * inv_r
            if state["steps_left"] <= 0:
                return t, -1
            v_new = voltage_after(dt, i_total)
            crossed = v_new >= v_limit if going_up else v_new <= v_limit
            if crossed:
                lo, hi, v_h, h = 0.0, dt, v_new, dt
                it = 0
                while abs(v_h - v_limit) > event_tol and it < 64:
                    mid = 0.5 * (lo + hi)
                    v_mid = voltage_after(mid, i_total)
                    c_mid = v_mid >= v_limit if going_up else v_mid <= v_limit
                    if c_mid:
                        hi, v_h, h = mid, v_mid, mid
                    else:
                        lo = mid
                    it += 1
                commit(h)
                state["steps_left"] -= 1
                return t + h, 1
            commit(dt)
            t += dt
            state["steps_left"] -= 1

    def cv_phase(v_hold):
        t = 0.0
        while True:
            ocv = np.interp(z, xs, ys)
            i_buf[:] = (v_hold - ocv) * inv_r
            if float(np.sum(i_buf)) <= i_cutoff:
                return t, 1
            if state["steps_left"] <= 0:
                return t, -1
            commit(dt)
            t += dt
            state["steps_left"] -= 1

    t_cc, flag = cc_phase(i_chg, v_max, True)
    if flag < 0:
        status = 2
    else:
        t_cv, flag = cv_phase(v_max)
        if flag < 0:
            status = 2
        t_clock = t_cc + t_cv

    while status == 0 and w < max_cycles:
        w += 1
        t_dis_start = t_clock
        t_dis, flag = cc_phase(i_pu, v_min, False)
        if flag < 0:
            status = 2
            w -= 1
            break
        t_clock += t_dis
        ah_w = i_chg * t_dis / 3600.0
        caps[w - 1] = ah_w
        bounds[w - 1, 0] = t_dis_start
        bounds[w - 1, 1] = t_clock
        if w == 1:
            ah1 = ah_w
            a1_threshold = eol_frac * ah1
        if a1_cycle == 0 and ah_w <= a1_threshold:
            a1_cycle = w
            q_a1[:] = q
            efc_a1[:] = efc

        t_cc, flag = cc_phase(i_chg, v_max, True)
        if flag < 0:
            status = 2
            w -= 1
            break
        t_clock += t_cc
        t_cv, flag = cv_phase(v_max)
        if flag < 0:
            status = 2
            w -= 1
            break
        t_clock += t_cv
        cycle_dur = t_clock - t_dis_start

        prev_q = q.copy()
        prev_efc = efc.copy()
        delta_efc = thr / (2.0 * q_nom)
        efc = efc + delta_efc
        thr[:] = 0.0
        q = (a - efc) / b
        r = c + d * efc
        inv_r = 1.0 / r
        mins[w - 1] = float(np.min(q))
        maxs[w - 1] = float(np.max(q))
        sefc[w - 1] = float(np.sum(efc))
        if a2_cycle == 0 and mins[w - 1] < eol_frac * q_nom:
            a2_cycle = w
            q_a2[:] = prev_q
            efc_a2[:] = prev_efc

        if (not want_a1 or a1_cycle > 0) and (not want_a2 or a2_cycle > 0):
            break

        rep = 1
        while rep < extrapolation and w < max_cycles:
            w += 1
            prev_q = q.copy()
            prev_efc = efc.copy()
            efc = efc + delta_efc
            q = (a - efc) / b
            r = c + d * efc
            inv_r = 1.0 / r
            caps[w - 1] = ah_w
            bounds[w - 1, 0] = t_clock
            bounds[w - 1, 1] = t_clock + t_dis
            t_clock += cycle_dur
            mins[w - 1] = float(np.min(q))
            maxs[w - 1] = float(np.max(q))
            sefc[w - 1] = float(np.sum(efc))
            if a2_cycle == 0 and mins[w - 1] < eol_frac * q_nom:
                a2_cycle = w
                q_a2[:] = prev_q
                efc_a2[:] = prev_efc
            if (not want_a1 or a1_cycle > 0) and (not want_a2 or a2_cycle > 0):
                break
            rep += 1
        if (not want_a1 or a1_cycle > 0) and (not want_a2 or a2_cycle > 0):
            break

    if status == 0:
        done = (not want_a1 or a1_cycle > 0) and (not want_a2 or a2_cycle > 0)
        if not done:
            status = 1

    return (
        status,
        ah1,
        w,
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
    )


if HAS_NUMBA and not _env_disables_numba():
    simulate_unit = numba.njit(cache=True)(_simulate_loops)
    BACKEND = "numba"
else:
    simulate_unit = _simulate_numpy
    BACKEND = "numpy"
