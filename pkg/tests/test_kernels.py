import os
import subprocess
import sys

import numpy as np
import pytest

from phasewalk import kernels

BACKENDS = kernels.backends()
needs_ext = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")

# reference-step grid: foot 1.2, apex 0.6, stages 0.9..1.5, speeds 0.03..1.5
STAGES = np.linspace(0.9, 1.5, 61)
STATES = 0.03 + 0.01 * np.arange(148)
W_REF = float(np.sqrt(9.81))
OMEGAS = W_REF + 0.05 * np.arange(-6, 7)
TAUS = 0.5 * np.arange(-6, 7)
CFG = np.array([1.2, 0.6, W_REF, 1.0, 9.81, 4e4, 5.0, 5.0, 100.0, 1.0, 0.6])


def test_backend_selection():
    assert kernels.BACKEND in BACKENDS
    assert kernels.rk4_path is BACKENDS[kernels.BACKEND].rk4_path
    env = dict(os.environ, PHASEWALK_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import phasewalk; print(phasewalk.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
@pytest.mark.skipif(os.environ.get("PHASEWALK_PURE_PYTHON") == "1", reason="fallback forced")
def test_compiled_is_default():
    assert kernels.BACKEND == "cython"


@needs_ext
@pytest.mark.parametrize("euler", [0, 1])
def test_rk4_parity(rng, euler):
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    for _ in range(20):
        s0 = rng.normal(size=6)
        p = np.concatenate([[rng.uniform(2.5, 3.5)], rng.normal(size=3), rng.normal(size=2),
                            rng.uniform(-0.3, 0.3, 2), [1.0, 9.81]])
        a = py.rk4_path(s0, p, 1e-3, 500, euler)
        b = cy.rk4_path(s0, p, 1e-3, 500, euler)
        assert a.shape == b.shape == (501, 6)
        assert np.array_equal(a, b)


@needs_ext
def test_dp_sweep_parity():
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    args = (STAGES, STATES, float(STATES[0]), 0.01, OMEGAS, TAUS, CFG)
    va, pa = py.dp_sweep(*args)
    vb, pb = cy.dp_sweep(*args)
    assert np.array_equal(pa, pb)
    assert np.array_equal(va, vb)  # inf cells compare equal too
    assert (pa[:-1] >= 0).sum() > 1000


@needs_ext
def test_region_rollout_parity():
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    _, pol = py.dp_sweep(STAGES, STATES, float(STATES[0]), 0.01, OMEGAS, TAUS, CFG)
    nt = TAUS.shape[0]
    ok = pol >= 0
    pw = np.where(ok, OMEGAS[np.maximum(pol, 0) // nt], np.nan)
    pt = np.where(ok, TAUS[np.maximum(pol, 0) % nt], np.nan)
    args = (STAGES, STATES, float(STATES[0]), 0.01, pw, pt, CFG, 1e-3)
    ma, ra = py.region_rollout(*args)
    mb, rb = cy.region_rollout(*args)
    assert np.array_equal(np.asarray(ma), np.asarray(mb))
    assert np.array_equal(np.asarray(ra), np.asarray(rb))
    assert np.asarray(ma).sum() > 1000


def test_stage_step_matches_sweep():
    # the scalar stage helper and the vectorised sweep use the same update
    py = BACKENDS["python"]
    v, xn, dx, w, tau = 0.7, 1.1, 0.01, OMEGAS[3], TAUS[8]
    _, ve = py.stage_step(v, xn, dx, w, tau, CFG)
    u = xn + 0.5 * dx - CFG[0]
    assert ve == np.sqrt(v * v + 2.0 * dx * (w * w) * (u - tau / 9.81))
