"""The looped and vectorized simulation backends must agree bit-for-bit-ish.

Both implement the same cycle semantics; numerically they only differ in
summation order inside the voltage solve, so results agree to ~1e-12
relative.  The compiled backend is additionally checked against its own
uncompiled source, and the environment switch is exercised in a subprocess.
"""

import dataclasses
import os
import subprocess
import sys

import numpy as np
import pytest

from packlife import kernels
from packlife.fpu import CyclingProtocol, PuConfig, _kernel_args

REL = 1e-9


def _args(short_life_lines, curve, params, proto, **proto_overrides):
    if proto_overrides:
        proto = dataclasses.replace(proto, **proto_overrides)
    cfg = PuConfig(lines=short_life_lines, curve=curve, params=params)
    return _kernel_args(cfg, proto)


def _compare(res_a, res_b):
    assert res_a[0] == res_b[0]  # status
    assert res_a[1] == pytest.approx(res_b[1], rel=REL)  # first-cycle Ah
    for i in (2, 3, 6):  # cycle counters
        assert res_a[i] == res_b[i]
    for i in (4, 5, 7, 8):  # per-cell capacity and efc at each end of life
        np.testing.assert_allclose(res_a[i], res_b[i], rtol=REL, atol=0.0)
    n = res_a[2]
    for i in (9, 10, 11, 12):  # per-cycle capacity, min/max cell q, summed efc
        np.testing.assert_allclose(res_a[i][:n], res_b[i][:n], rtol=REL)
    np.testing.assert_allclose(res_a[13][:n], res_b[13][:n], rtol=REL)


def test_backends_agree_on_a_full_lifetime(short_life_lines, curve, params, proto):
    args = _args(short_life_lines, curve, params, proto)
    _compare(kernels._simulate_loops(*args, True, True),
             kernels._simulate_numpy(*args, True, True))


def test_backends_agree_with_extrapolation(short_life_lines, curve, params, proto):
    args = _args(short_life_lines, curve, params, proto, extrapolation_factor=4)
    _compare(kernels._simulate_loops(*args, True, True),
             kernels._simulate_numpy(*args, True, True))


def test_backends_agree_on_budget_failures(short_life_lines, curve, params, proto):
    args = _args(short_life_lines, curve, params, proto, max_cycles=3)
    loops = kernels._simulate_loops(*args, True, True)
    vec = kernels._simulate_numpy(*args, True, True)
    assert loops[0] == vec[0] == 1
    _compare(loops, vec)

    args = _args(short_life_lines, curve, params, proto, max_steps=10)
    loops = kernels._simulate_loops(*args, True, True)
    vec = kernels._simulate_numpy(*args, True, True)
    assert loops[0] == vec[0] == 2


@pytest.mark.skipif(kernels.BACKEND != "numba", reason="compiled backend unavailable")
def test_compiled_kernel_matches_its_source(short_life_lines, curve, params, proto):
    args = _args(short_life_lines, curve, params, proto)
    compiled = kernels.simulate_unit(*args, True, True)
    interpreted = kernels._simulate_loops(*args, True, True)
    _compare(compiled, interpreted)


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop(kernels.ENV_FLAG, None)
    if env_value is not None:
        env[kernels.ENV_FLAG] = env_value
    out = subprocess.run(
        [sys.executable, "-c", "from packlife import kernels; print(kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    return out.stdout.strip()


@pytest.mark.parametrize("flag", ["0", "false", "off"])
def test_env_flag_forces_numpy_backend(flag):
    assert _backend_in_subprocess(flag) == "numpy"


@pytest.mark.skipif(kernels.BACKEND != "numba", reason="compiled backend unavailable")
def test_numba_is_the_default_backend():
    assert _backend_in_subprocess(None) == "numba"
    assert _backend_in_subprocess("1") == "numba"
