import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from madm import _kernels, simulate
from madm.model import ModelParams
from madm.qcalc import PowerFactor, TruncationPolicy, grid_length

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def grid_inputs(gamma, a, b, factors):
    n = grid_length(gamma, TruncationPolicy())
    pw = gamma ** np.arange(n, dtype=np.float64)
    Ha = np.array([f(a * pw) for f in factors])
    Hb = np.array([f(b * pw) for f in factors])
    Hdd = np.array([f.dd(a * pw, b * pw) for f in factors])
    return Ha, Hb, Hdd, a, b, gamma


@needs_numba
@given(st.floats(0.2, 0.9), st.floats(0.01, 0.8), st.floats(0.0, 0.15),
       st.lists(st.tuples(st.integers(0, 3), st.integers(1, 2)), min_size=1, max_size=3))
def test_nested_grid_backends_agree(gamma, a, width, mp):
    args = grid_inputs(gamma, a, a + width, [PowerFactor(m, p) for m, p in mp])
    x = _kernels.nested_grid_numpy(*args)
    y = _kernels.nested_grid_numba(*args)
    assert y == pytest.approx(x, rel=1e-12, abs=1e-300)


@needs_numba
def test_gillespie_backends_identical(monkeypatch):
    cfg = simulate.SimConfig(ModelParams(0.5, 0.2, 0.4, 2), seed=5, t_burn=5.0, t_measure=200.0,
                             replicas=2, batches=2)
    out = {}
    for name, fn in (("numpy", _kernels.gillespie_chunk_numpy), ("numba", _kernels.gillespie_chunk_numba)):
        monkeypatch.setattr(_kernels, "gillespie_chunk", fn)
        out[name] = simulate.run(cfg)
    assert np.array_equal(out["numpy"].occupation_time, out["numba"].occupation_time)
    assert out["numpy"].event_counts == out["numba"].event_counts


def test_env_flag_selects_numpy():
    env = dict(os.environ, MADM_DISABLE_NUMBA="1")
    code = "import madm, madm._kernels as k; print(madm.NUMBA_ENABLED, k.nested_grid is k.nested_grid_numpy)"
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert res.stdout.split() == ["False", "True"]
