import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phasewalk import (PhaseState, RobotParams, analytic_flow, classify_disturbance,
                       recoverability_radius, sensitivity_norm, sigma, sigma_apex, zeta)
from phasewalk.errors import DomainError, EmptyInterval, GridMismatch
from phasewalk.manifold import (BundleSpec, ControlRanges, DisturbanceCategory, ManifoldParams,
                                ProgressionMap, RegionGrid, estimate_recoverable_region, viable_region,
                                sigma_grad, zeta_grad)

W = 3.132
P = RobotParams()


def test_apex_point_on_manifold():
    assert sigma_apex(1.0, 0.6, 1.0, 0.6, W) == 0.0
    assert sigma(1.0, 0.6, ManifoldParams.apex(1.0, 0.6, W)) == 0.0


def test_sigma_at_rest_over_foot():
    assert sigma_apex(0.0, 0.0, 0.0, 0.6, W) == pytest.approx(-0.01321178491214163, rel=1e-12)


@given(st.floats(-0.6, 0.6))
def test_sigma_is_first_integral(t):
    x, xd = analytic_flow(0.4, 0.6, 0.4, W, t)
    assert abs(sigma_apex(x, xd, 0.4, 0.6, W)) < 1e-9


@given(st.floats(-0.5, 0.5), st.floats(0.1, 1.5), st.floats(-0.4, 0.4))
def test_general_form_matches_apex_form_on_orbits(u0, v0, t):
    # general form anchored anywhere on an apex orbit equals the apex form
    w = 3.0
    E = v0 * v0 - w * w * u0 * u0
    if E <= 0.01:
        return
    xa = math.sqrt(E)
    p = ManifoldParams(u0, v0, 0.0, w)
    x, xd = analytic_flow(u0, v0, 0.0, w, t)
    g = sigma(x, xd, p)
    assert abs(g) < 1e-9 * max(1.0, v0 ** 4)
    assert sigma(0.0, xa, p) == pytest.approx(0.0, abs=1e-9)


def test_zeta_at_anchor():
    p = ManifoldParams(0.3, 0.7, 0.1, W)
    assert zeta(0.3, 0.7, p, zeta0=2.5) == pytest.approx(2.5, rel=1e-15)


def test_zeta_domain_errors():
    p = ManifoldParams(0.3, 0.7, 0.1, W)
    with pytest.raises(DomainError):
        zeta(0.5, -0.1, p)
    with pytest.raises(DomainError):
        zeta(0.5, 0.4, ManifoldParams(0.1, 0.7, 0.1, W))


def test_gradients_orthogonal(rng):
    f, xa = 0.2, 0.6
    p = ManifoldParams.asymptote_anchor(f, xa, W)
    h = 1e-6
    for _ in range(100):
        x = f + rng.uniform(-0.4, 0.4)
        xd = rng.uniform(0.2, 1.4)
        gs = np.array([(sigma_apex(x + h, xd, f, xa, W) - sigma_apex(x - h, xd, f, xa, W)) / (2 * h),
                       (sigma_apex(x, xd + h, f, xa, W) - sigma_apex(x, xd - h, f, xa, W)) / (2 * h)])
        gz = np.array([(zeta(x + h, xd, p) - zeta(x - h, xd, p)) / (2 * h),
                       (zeta(x, xd + h, p) - zeta(x, xd - h, p)) / (2 * h)])
        assert abs(gs @ gz) < 1e-6 * np.linalg.norm(gs) * np.linalg.norm(gz)
        np.testing.assert_allclose(gs, sigma_grad(x, xd, f, xa, W), rtol=1e-6, atol=1e-9)
        np.testing.assert_allclose(gz, zeta_grad(x, xd, p), rtol=1e-5, atol=1e-9)


def test_zeta_exponential_on_asymptote():
    f, xa = 0.0, 0.6
    p = ManifoldParams.asymptote_anchor(f, xa, W)
    ts = np.linspace(-0.3, 0.3, 13)
    x, xd = analytic_flow(p.x0, p.xd0, f, W, ts)
    z = zeta(x, xd, p)
    np.testing.assert_allclose(z, np.exp((1 + W * W) * W * ts), rtol=1e-10)
    assert np.all(np.diff(z) > 0)


def test_progression_normalised():
    pm = ProgressionMap.for_step(0.0, 0.6, W, (-0.25, 0.9865), (0.25, 0.9865))
    assert pm(-0.25, 0.9865) == pytest.approx(0.0, abs=1e-12)
    assert pm(0.25, 0.9865) == pytest.approx(1.0, abs=1e-12)


def test_zeta_zero_over_foot():
    p = ManifoldParams.asymptote_anchor(0.0, 0.6, W)
    assert zeta(0.0, 0.6, p) == 0.0


def test_kappa_constant():
    z = np.linspace(0, 1, 11)
    assert sensitivity_norm(z, np.full(11, -0.02), 0.0, 1.0) == pytest.approx(0.02, rel=1e-14)


def test_kappa_nominal_zero(flat8):
    p = flat8[2]
    tr = p.trajectory
    s = np.array([p.sigma(tr.state(i)) for i in range(len(tr))])
    z = p.progression(tr.states[:, 0], tr.states[:, 3])
    assert sensitivity_norm(z, s, 0.0, 1.0) < 1e-6


def test_kappa_step_half():
    # impulse at the midpoint: repeated zeta sample carries the jump
    z = np.array([0.0, 0.5, 0.5, 1.0])
    s = np.array([0.0, 0.0, 0.3, 0.3])
    assert sensitivity_norm(z, s, 0.0, 1.0) == pytest.approx(0.3 / math.sqrt(2), rel=1e-14)


def test_kappa_empty_interval():
    with pytest.raises(EmptyInterval):
        sensitivity_norm([0, 1], [0, 0], 0.5, 0.5)


def _pre(x=0.1, xd=0.6):
    return PhaseState(x, 0, 1, xd, 0, 0)


def test_classify_push_forward():
    p = ManifoldParams.apex(0.0, 0.6, W)
    r = classify_disturbance(_pre(), _pre().with_velocity_jump(0.4), p)
    assert r.category is DisturbanceCategory.SAME_SIDE_SMALL
    assert r.sigma_jump == pytest.approx(sigma_apex(0.1, 1.0, 0, 0.6, W) - sigma_apex(0.1, 0.6, 0, 0.6, W))


def test_classify_on_asymptote_counts_as_crossing():
    p = ManifoldParams.apex(0.0, 0.6, W)
    pre = _pre(0.1, 0.2)
    post = PhaseState(0.1, 0, 1, W * 0.1, 0, 0)
    assert classify_disturbance(pre, post, p).category is DisturbanceCategory.ASYMPTOTE_CROSSING


def test_classify_reversal():
    p = ManifoldParams.apex(0.0, 0.6, W)
    r = classify_disturbance(_pre(0.1, 0.5), _pre(0.1, -0.2), p)
    assert r.category is DisturbanceCategory.DIRECTION_REVERSAL


def test_classify_slowdown():
    p = ManifoldParams.apex(0.0, 0.6, W)
    r = classify_disturbance(_pre(0.1, 0.8), _pre(0.1, 0.6), p)
    assert r.category is DisturbanceCategory.SAME_DIRECTION_SMALL


@given(st.floats(0.1, 10.0), st.floats(-0.3, 0.3), st.floats(0.05, 2.0), st.floats(-1.0, 2.0))
def test_classify_scale_invariant(k, u, v_pre, v_post):
    # scaling speeds and w*(x - x_foot) together keeps the category
    w = 3.0
    p1 = ManifoldParams.apex(0.0, 0.6, w)
    p2 = ManifoldParams.apex(0.0, 0.6, k * w)
    c1 = classify_disturbance(_pre(u, v_pre), _pre(u, v_post), p1).category
    c2 = classify_disturbance(_pre(u, k * v_pre), _pre(u, k * v_post), p2).category
    assert c1 is c2


def test_radius_zero_torque():
    assert recoverability_radius(1e-3, 1.5, 1.1, 0.6, 0.0, P) == 1e-3


def test_radius_hand_value():
    # eps + (sqrt2/2)(2 sqrt2 xa^2 / (m g)) dx tau = 0.001 + 0.72/9.81 * 0.4 * 3
    r = recoverability_radius(0.001, 1.5, 1.1, 0.6, 3.0, P)
    assert r == pytest.approx(0.08907339449541284, rel=1e-12)


def test_radius_affine_and_quadratic():
    taus = np.array([1.0, 2.0, 3.0])
    r = np.array([recoverability_radius(0.002, 1.4, 1.0, 0.6, t, P) for t in taus])
    slope, icpt = np.polyfit(taus, r, 1)
    assert icpt == pytest.approx(0.002, abs=1e-14)
    assert np.allclose(np.polyval([slope, icpt], taus), r, atol=1e-15)
    r2 = recoverability_radius(0.0, 1.4, 1.0, 1.2, 1.0, P)
    assert r2 == pytest.approx(4 * recoverability_radius(0.0, 1.4, 1.0, 0.6, 1.0, P), rel=1e-14)
    assert r[1] - 0.002 == pytest.approx(2 * (r[0] - 0.002), rel=1e-13)


def test_bundle_validation():
    with pytest.raises(ValueError):
        BundleSpec(0.0)


def test_region_grid_mismatch(small_table):
    g = RegionGrid(small_table.stage_x[:-1], small_table.states)
    with pytest.raises(GridMismatch):
        estimate_recoverable_region(g, None, BundleSpec(), small_table)


def test_region_bundle_cells_are_members(small_table):
    reg = estimate_recoverable_region(small_table.grid(), None, BundleSpec(), small_table)
    X, V = np.meshgrid(small_table.stage_x, small_table.states, indexing="ij")
    inside = np.abs(small_table.sigma(X, V)) <= 1e-3
    assert inside.any() and np.all(reg.member[inside])


def test_region_monotone_in_torque_range(small_table):
    w = small_table.step.omega_ref
    sizes = []
    prev = None
    for r in (0.0, 1.0, 2.0, 3.0):
        reg = viable_region(small_table.grid(), ControlRanges((w - 0.3, w + 0.3), (-r, r)),
                            BundleSpec(), small_table)
        if prev is not None:
            assert np.all(reg.member >= prev)
        prev = reg.member
        sizes.append(reg.count)
    assert sizes[-1] > sizes[0]


def test_region_outer_bound(small_table):
    """Cells whose |sigma| exceeds the supremum-torque radius are not members."""
    t = small_table
    reg = t.region
    x_t = float(t.stage_x[-1])
    tau_max = float(np.max(np.abs(t.taus)))
    w_max = float(np.max(t.omegas))
    # the omega channel adds authority; scale the torque bound by (w_max / w_ref)^2
    # and add the omega contribution through an equivalent torque
    gain = (w_max / t.step.omega_ref) ** 2
    for n, x in enumerate(t.stage_x[:-1]):
        u_max = max(abs(x - t.step.x_foot), abs(x_t - t.step.x_foot))
        tau_eq = gain * (tau_max + P.weight * u_max)
        r = recoverability_radius(1e-3, x_t, float(x), t.step.xd_apex, tau_eq, P)
        big = np.abs(t.sigma(x, t.states)) > r
        assert not np.any(reg.member[n][big])


def test_region_monotone_in_omega_range(small_table):
    w = small_table.step.omega_ref
    prev = None
    for r in (0.0, 0.1, 0.2, 0.3):
        reg = viable_region(small_table.grid(), ControlRanges((w - r, w + r), (-3, 3)),
                            BundleSpec(), small_table)
        if prev is not None:
            assert np.all(reg.member >= prev)
        prev = reg.member


def test_policy_region_within_viable_set(small_table):
    v = viable_region(small_table.grid(), None, BundleSpec(), small_table)
    assert not np.any(small_table.region.member & ~v.member)
