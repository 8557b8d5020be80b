import json
import math
import time

import numpy as np
import pytest

from phasewalk import BundleSpec, ComSurface, StepSpec, analytic_flow
from phasewalk import kernels
from phasewalk.errors import InfeasibleApex, OutOfGrid, PolicyFormatError
from phasewalk.recovery import (DpParams, PolicyCache, closed_loop_rollout, dp_build, dp_lookup,
                                load_policy, policy_rollout, recover, replan_foot,
                                saturated_control, save_policy, stage_acceleration)

from conftest import W1
from oracles import brute_force_dp

REF_STEP = StepSpec((1.2, 0.0, 0.0), ComSurface(0.0, 0.0, 1.0), 0.6)


# -- stage model -------------------------------------------------------------

def test_stage_acceleration():
    assert stage_acceleration(0.6, 0.7, 0.01) == pytest.approx(6.5, rel=1e-12)
    assert stage_acceleration(0.6, 0.6, 0.01) == 0.0
    assert stage_acceleration(0.7, 0.6, 0.01) < 0
    with pytest.raises(ValueError):
        stage_acceleration(0.6, 0.7, 0.0)


# -- Bellman optimality --------------------------------------------------------

MINI_STAGES = np.array([1.20, 1.21, 1.22])
MINI_STATES = 0.58 + 0.01 * np.arange(5)
MINI_OMEGAS = np.array([3.0, 3.15, 3.3])
MINI_TAUS = np.array([-1.0, 0.0, 1.0])


@pytest.mark.parametrize("backend", sorted(kernels.backends()))
@pytest.mark.parametrize("eta,xd_pred", [(1.0, 0.6), (0.9, 0.6033), (1.0, 0.59)])
def test_dp_matches_brute_force(backend, eta, xd_pred):
    impl = kernels.backends()[backend]
    model = (1.2, 0.6, 3.15, 1.0, 9.81, 4e4, 5.0, 5.0)
    alpha = 100.0
    cfg = np.array([*model, alpha, eta, xd_pred])
    t0 = time.perf_counter()
    values, policy = impl.dp_sweep(MINI_STAGES, MINI_STATES, float(MINI_STATES[0]), 0.01,
                                   MINI_OMEGAS, MINI_TAUS, cfg)
    elapsed = time.perf_counter() - t0
    controls = [(w, t) for w in MINI_OMEGAS for t in MINI_TAUS]
    ref = brute_force_dp(MINI_STAGES, MINI_STATES, controls, model, alpha, eta, xd_pred)
    assert np.array_equal(values, ref)
    assert elapsed < 1.0
    # decision stages store a control exactly where the value is finite
    assert np.all((policy[:-1] >= 0) == np.isfinite(values[:-1]))


def test_dp_build_miniature_equals_enumeration(robot):
    # same instance through the public builder
    dp = DpParams(stage_range=(1.20, 1.22), stage_res=0.01, state_range=(0.58, 0.62),
                  state_res=0.01, omega_range=(3.0, 3.3), omega_res=0.15,
                  tau_range=(-1.0, 1.0), tau_res=1.0, omega_ref=3.15)
    table = dp_build(dp, REF_STEP, None, robot, xd_pred=0.6)
    model = (1.2, 0.6, 3.15, robot.mass, robot.gravity, dp.beta, dp.gamma1, dp.gamma2)
    controls = [(w, t) for w in table.omegas for t in table.taus]
    ref = brute_force_dp(table.stage_x, table.states, controls, model, dp.alpha, dp.eta, 0.6)
    assert np.array_equal(table.values, ref)


def test_nominal_cell_optimum(small_table):
    t = small_table
    # the apex cell lies exactly on the manifold
    n = int(np.argmin(np.abs(t.stage_x - 1.2)))
    i = int(np.argmin(np.abs(t.states - 0.6)))
    assert abs(t.sigma(t.stage_x[n], t.states[i])) < 1e-12
    assert t.policy_tau[n, i] == 0.0
    assert abs(t.policy_omega[n, i] - t.step.omega_ref) <= t.dp.omega_res + 1e-12
    # other cells are on it only up to the speed grid; speed snapping lets a
    # few of them trade a small omega offset for a better landing cell
    sg = np.abs(t.sigma(t.stage_x[:, None], t.states[None, :]))
    near = within = 0
    for n in range(len(t.stage_x) - 1):
        i = int(np.argmin(sg[n]))
        if sg[n, i] > 0.25e-3:
            continue
        near += 1
        assert abs(t.policy_tau[n, i]) <= t.dp.tau_res + 1e-12
        within += abs(t.policy_omega[n, i] - t.step.omega_ref) <= t.dp.omega_res + 1e-12
    assert near > 40 and within >= 0.95 * near


def test_policy_admissibility(small_table):
    t = small_table
    ok = t.policy >= 0
    w, tau = t.policy_omega[ok], t.policy_tau[ok]
    lo, hi = t.dp.omega_range
    assert np.all((w >= lo - 1e-12) & (w <= hi + 1e-12))
    assert np.all((tau >= -3.0) & (tau <= 3.0))
    assert hi - lo == pytest.approx(0.6)
    assert np.all(np.isinf(t.values[:-1][~ok[:-1]]))
    assert np.all(np.isfinite(t.values[:-1][ok[:-1]]))


def test_value_monotone_in_torque_range(robot):
    narrow = dp_build(DpParams.table_4_1(W1, tau_range=(-1.5, 1.5)), REF_STEP, None, robot)
    wide = dp_build(DpParams.table_4_1(W1), REF_STEP, None, robot)
    assert set(narrow.taus) <= set(wide.taus)
    assert np.all(wide.values <= narrow.values)


def test_value_monotone_in_omega_range(robot):
    kw = dict(omega_ref=3.0, omega_res=0.125)
    narrow = dp_build(DpParams(omega_range=(2.75, 3.25), **kw), REF_STEP, None, robot)
    wide = dp_build(DpParams(omega_range=(2.5, 3.5), **kw), REF_STEP, None, robot)
    assert set(narrow.omegas) <= set(wide.omegas)
    assert np.all(wide.values <= narrow.values)


def test_dp_rejects_omega_grid_without_reference(robot):
    with pytest.raises(ValueError):
        dp_build(DpParams(omega_range=(2.0, 2.5), omega_ref=3.0), REF_STEP, None, robot)


# -- lookup and blending -------------------------------------------------------

@pytest.fixture(scope="module")
def binary_table(robot):
    # binary-exact axes so that midpoints are exact ties
    dp = DpParams(stage_range=(1.0, 1.5), stage_res=0.125, state_range=(0.5, 1.5),
                  state_res=0.125, omega_range=(2.75, 3.25), omega_res=0.125,
                  tau_range=(-1.0, 1.0), tau_res=0.5, omega_ref=3.0)
    return dp_build(dp, REF_STEP, None, robot)


def _cell_controls(t, n, i):
    c = int(t.policy[n, i])
    return float(t.omegas[c // len(t.taus)]), float(t.taus[c % len(t.taus)])


def test_lookup_exact_point(small_table):
    t = small_table
    n, i = 10, 70
    assert dp_lookup(t, t.stage_x[n], t.states[i]) == _cell_controls(t, n, i)


def test_lookup_midpoint_goes_low(binary_table):
    t = binary_table
    cells = np.argwhere(t.policy[:-1] >= 0)
    assert len(cells) >= 3
    for n, i in cells[:: max(1, len(cells) // 5)]:
        if i + 1 >= len(t.states) or n + 1 >= len(t.stage_x):
            continue
        x = t.stage_x[n] + 0.0625
        v = t.states[i] + 0.0625
        assert dp_lookup(t, x, v) == _cell_controls(t, n, i)
    assert kernels.snap_index(0.25, 0.0, 0.5) == 0
    assert kernels.snap_index(0.2500001, 0.0, 0.5) == 1


def test_lookup_out_of_grid(small_table):
    t = small_table
    with pytest.raises(OutOfGrid):
        dp_lookup(t, 0.5, 0.6)
    with pytest.raises(OutOfGrid):
        dp_lookup(t, 1.0, 3.0)
    # last stage carries no decision
    assert dp_lookup(t, t.stage_x[-1], 0.9) == t.u_ref


def test_saturated_control():
    dp, ue, ur = (3.3, 2.0), (3.2, 1.0), (3.13, 0.0)
    eps = 1e-3
    assert saturated_control(2e-3, eps, dp, ue, ur) == dp
    assert saturated_control(-2e-3, eps, dp, ue, ur) == dp
    assert saturated_control(0.0, eps, dp, ue, ur) == ur
    assert saturated_control(eps, eps, dp, ue, ur) == pytest.approx(ue)
    mid = saturated_control(-0.5e-3, eps, dp, ue, ur)
    assert mid == pytest.approx((0.5 * 3.2 + 0.5 * 3.13, 0.5))
    with pytest.raises(ValueError):
        saturated_control(0.0, 0.0, dp, ue, ur)


# -- foot re-planning ----------------------------------------------------------

def test_replan_capture_point():
    assert abs(replan_foot(0.25, 0.9, 0.0, W1) - (0.25 + 0.9 / W1)) < 1e-12


def test_replan_degenerate():
    assert replan_foot(0.25, 0.6, 0.6, W1) == 0.25


@pytest.mark.parametrize("xt,vt,va,w", [(0.25, 0.98, 0.6, W1), (1.4, 1.3, 0.9, 3.3),
                                        (0.0, 0.7, 0.2, 2.9)])
def test_replan_forward_consistency(xt, vt, va, w):
    f = replan_foot(xt, vt, va, w)
    u0 = xt - f
    T = math.atanh(-u0 * w / vt) / w  # time to reach x = foot
    x, xd = analytic_flow(xt, vt, f, w, T)
    assert abs(x - f) < 1e-9
    assert abs(xd - va) < 1e-9


def test_replan_infeasible():
    with pytest.raises(InfeasibleApex):
        replan_foot(0.25, 0.5, 0.6, W1)
    with pytest.raises(InfeasibleApex):
        replan_foot(0.25, -0.5, 0.1, W1)


# -- region soundness ------------------------------------------------------------

def test_region_cells_recover_in_stage_model(small_table):
    t, eps = small_table, BundleSpec().epsilon
    cells = np.argwhere(t.region.member)
    assert len(cells) > 1000
    for n, i in cells:
        r = policy_rollout(t, t.stage_x[n], t.states[i], eps)
        assert r["ok"] and abs(r["sigma"][-1]) <= eps, (n, i)


def test_region_cells_recover_closed_loop(small_table):
    # continuous-time servo; cells that enter the bundle with some stage margin
    t, b = small_table, BundleSpec()
    N = len(t.stage_x)
    cells = np.argwhere(t.region.member & (t.region.reach <= N - 11))
    assert len(cells) > 100
    for n, i in cells:
        c = closed_loop_rollout(t, t.stage_x[n], t.states[i], b, dt=1e-3)
        assert abs(c["sigma"][-1]) <= b.epsilon, (n, i)


def test_lyapunov_decrease(small_table):
    t, b = small_table, BundleSpec()
    rng = np.random.default_rng(7)
    cells = np.argwhere(t.region.member)
    checked = 0
    for n, i in cells[rng.choice(len(cells), 20, replace=False)]:
        c = closed_loop_rollout(t, t.stage_x[n], t.states[i], b, dt=1e-4)
        V = 0.5 * c["sigma"] ** 2
        sel = (c["sigma"][:-1] * c["tau"][:-1] > 0) & (c["xd"][:-1] > 0)
        assert np.all(np.diff(V)[sel] <= 1e-12)
        checked += sel.sum()
    assert checked > 1000


def test_disturbed_table_start_recovers(small_table):
    c = closed_loop_rollout(small_table, 1.1, 0.7, BundleSpec())
    s = c["sigma"]
    assert np.any(np.abs(s) <= 1e-3)
    assert np.sum(np.diff(np.sign(s[s != 0])) != 0) <= 1


# -- recover() -------------------------------------------------------------------

@pytest.fixture(scope="module")
def cache(robot):
    return PolicyCache(DpParams(), BundleSpec(), robot)


def _state(plan, frac):
    k = int(frac * (len(plan.trajectory) - 1))
    return plan.trajectory.state(k)


def test_recover_on_manifold_does_nothing(flat8, cache):
    p = flat8[2]
    a = recover(_state(p, 0.5), p, cache.get(p), BundleSpec(), flat8[3])
    assert a.kind == "none"


def test_recover_small_early_push_is_continuous(flat8, cache):
    p = flat8[2]
    st = _state(p, 0.1).with_velocity_jump(0.05, 0.0)
    table = cache.get(p)
    a = recover(st, p, table, BundleSpec(), flat8[3])
    assert a.kind == "continuous"
    assert a.controls == dp_lookup(table, *p.local(st)[:2])
    s, sd = p.local(st)[:2]
    c = closed_loop_rollout(table, s, sd, BundleSpec())
    assert abs(c["sigma"][-1]) <= 1e-3


def test_recover_late_push_replans_foot(flat8, cache):
    p, q = flat8[2], flat8[3]
    st = _state(p, 0.9).with_velocity_jump(0.4, 0.0)
    a = recover(st, p, cache.get(p), BundleSpec(), q)
    assert a.kind == "replan"
    s_t, sd_t = a.predicted_transition
    f = a.next_foot[0]
    assert f > q.foot[0] + 0.01
    # keeping the next apex speed
    assert math.sqrt(sd_t ** 2 - q.omega ** 2 * (s_t - f) ** 2) == pytest.approx(0.6, abs=1e-9)


def test_recover_lateral_only(flat8, cache):
    p, q = flat8[2], flat8[3]
    st = _state(p, 0.4).with_velocity_jump(0.0, 0.1)
    a = recover(st, p, cache.get(p), BundleSpec(), q)
    assert a.kind == "lateral"
    assert a.controls is None  # sagittal controls untouched
    assert a.next_foot[0] == pytest.approx(q.foot[0], abs=1e-12)
    assert abs(a.next_foot[1] - q.foot[1]) > 1e-3


# -- persistence and caching -------------------------------------------------------

def test_policy_round_trip(small_table, tmp_path):
    path = save_policy(small_table, tmp_path / "p.json")
    back = load_policy(path)
    assert np.array_equal(back.values, small_table.values)
    assert np.array_equal(back.policy, small_table.policy)
    assert np.array_equal(back.stage_x, small_table.stage_x)
    assert np.array_equal(back.region.member, small_table.region.member)
    assert back.dp == small_table.dp and back.step == small_table.step
    assert back.build_hash == small_table.build_hash


def test_policy_version_rejected(small_table, tmp_path):
    path = save_policy(small_table, tmp_path / "p.json")
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(PolicyFormatError):
        load_policy(path)
    (tmp_path / "junk.json").write_text("not json")
    with pytest.raises(PolicyFormatError):
        load_policy(tmp_path / "junk.json")


def test_build_deterministic(robot):
    a = dp_build(DpParams.table_4_1(W1), REF_STEP, None, robot)
    b = dp_build(DpParams.table_4_1(W1), REF_STEP, None, robot)
    assert a.build_hash == b.build_hash
    assert np.array_equal(a.values, b.values) and np.array_equal(a.policy, b.policy)


def test_cache_shares_translated_steps(flat8, robot, tmp_path):
    c = PolicyCache(DpParams(), BundleSpec(), robot, directory=tmp_path)
    t2, t3 = c.get(flat8[2]), c.get(flat8[3])
    assert c.builds == 1
    assert t3.step.x_foot == pytest.approx(t2.step.x_foot + 0.5)
    assert np.array_equal(t2.policy, t3.policy)
    fresh = PolicyCache(DpParams(), BundleSpec(), robot, directory=tmp_path)
    fresh.get(flat8[4])
    assert fresh.builds == 0
