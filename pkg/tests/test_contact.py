import math

import numpy as np
import pytest

from phasewalk.contact import (ContactPair, WrenchDemand, build_grasp_matrix, check_friction_cone,
                               multicontact_forces, skew, solve_min_internal,
                               solve_reaction_forces)
from phasewalk.errors import DegenerateContacts, RankDeficient
from phasewalk.planner import PlannerConfig, generate_nominal

from conftest import flat_steps

MG = 9.81
# feet on the lateral axis, left at +y
PAIR = ContactPair((0.0, 0.1, 0.0), (0.0, -0.1, 0.0))
COM = (0.0, 0.0, 1.0)


def test_grasp_matrix_by_hand():
    G = build_grasp_matrix(PAIR, COM)
    rl = np.array([0.0, 0.1, -1.0])
    rr = np.array([0.0, -0.1, -1.0])
    ref = np.zeros((7, 6))
    ref[:3, :3] = ref[:3, 3:] = np.eye(3)
    ref[3:6, :3] = [[0, 1.0, 0.1], [-1.0, 0, 0], [-0.1, 0, 0]]
    ref[3:6, 3:] = [[0, 1.0, -0.1], [-1.0, 0, 0], [0.1, 0, 0]]
    ref[6] = [0, 0.5, 0, 0, -0.5, 0]
    assert np.array_equal(G, ref)
    # cross-product rows act as r x f
    f = np.array([0.3, -0.2, 0.7])
    assert np.allclose(skew(rl) @ f, np.cross(rl, f), atol=1e-15)
    assert np.allclose(skew(rr) @ f, np.cross(rr, f), atol=1e-15)


def test_internal_row_ignores_perpendicular_forces(rng):
    G = build_grasp_matrix(PAIR, COM)
    u = PAIR.axis
    for _ in range(20):
        a, b = rng.normal(size=3), rng.normal(size=3)
        a -= (a @ u) * u
        b -= (b @ u) * u
        assert abs(G[6] @ np.concatenate([a, b])) < 1e-15


def test_grasp_matrix_translation_invariance(rng):
    shift = np.array([2.0, -1.0, 0.5])
    moved = ContactPair(PAIR.p_left + shift, PAIR.p_right + shift)
    G0 = build_grasp_matrix(PAIR, COM)
    G1 = build_grasp_matrix(moved, np.array(COM) + shift)
    assert np.allclose(G0, G1, atol=1e-14)


def test_symmetric_load_splits_in_half():
    fl, fr = solve_reaction_forces(PAIR, COM, WrenchDemand((0, 0, MG), (0, 0, 0)))
    assert np.allclose(fl, [0, 0, MG / 2], atol=1e-12)
    assert np.allclose(fr, [0, 0, MG / 2], atol=1e-12)


def test_internal_force_equal_and_opposite():
    base = solve_reaction_forces(PAIR, COM, WrenchDemand((0, 0, MG), (0, 0, 0)))
    fl, fr = solve_reaction_forces(PAIR, COM, WrenchDemand((0, 0, MG), (0, 0, 0), 250.0))
    u = PAIR.axis
    assert np.allclose(fl - base[0], 250.0 * u, atol=1e-9)
    assert np.allclose(fr - base[1], -250.0 * u, atol=1e-9)


def test_round_trip_random_demands(rng):
    worst = 0.0
    for _ in range(100):
        pl = rng.uniform(-0.5, 0.5, 3)
        pr = pl + rng.uniform(0.1, 0.5) * np.array([*rng.normal(size=2), 0.0]) / 1.0
        if np.linalg.norm(pl - pr) < 0.05:
            pr = pl + np.array([0.0, -0.2, 0.0])
        pair = ContactPair(pl, pr)
        c = rng.uniform(-0.3, 0.3, 3) + np.array([0.0, 0.0, 1.0])
        d = WrenchDemand.consistent(pair, c, rng.normal(size=3) * 10, rng.normal(size=3),
                                    rng.normal() * 5)
        fl, fr = solve_reaction_forces(pair, c, d)
        G = build_grasp_matrix(pair, c)
        back = G @ np.concatenate([fl, fr])
        worst = max(worst, np.linalg.norm(back - d.as_vector()) / np.linalg.norm(d.as_vector()))
    assert worst < 1e-9


def test_unreachable_roll_moment_is_least_squares():
    # a moment about the foot line cannot be produced by point feet on it;
    # the consistent projection of the same demand is met exactly
    G = build_grasp_matrix(PAIR, COM)
    d = WrenchDemand((0, 0, MG), (0, 1.0, 0))
    fl, fr = solve_reaction_forces(PAIR, COM, d)
    assert np.linalg.norm(G @ np.concatenate([fl, fr]) - d.as_vector()) > 0.1
    dc = WrenchDemand.consistent(PAIR, COM, d.f_com, d.tau_com)
    assert dc.tau_com[1] == 0.0
    fl, fr = solve_reaction_forces(PAIR, COM, dc)
    assert np.linalg.norm(G @ np.concatenate([fl, fr]) - dc.as_vector()) < 1e-12


def test_cone_axis_and_boundary():
    n = (0.0, 0.0, 1.0)
    ok, m = check_friction_cone((0, 0, 5.0), n, math.pi / 4)
    assert ok and m == pytest.approx(math.pi / 4, abs=1e-15)
    ok, m = check_friction_cone((1.0, 0, 1.0), n, math.pi / 4)
    assert ok and abs(m) < 1e-15
    ok, _ = check_friction_cone((1.01, 0, 1.0), n, math.pi / 4)
    assert not ok
    ok, _ = check_friction_cone((0, 0, -1.0), n, math.pi / 4)  # pulling on the ground
    assert not ok
    ok, m = check_friction_cone((0, 0, 0.0), n, math.pi / 4)
    assert ok and m == pytest.approx(math.pi / 4)
    with pytest.raises(ValueError):
        check_friction_cone((0, 0, 1.0), (0, 0, 2.0), math.pi / 4)


def test_internal_force_decoupled_from_net_wrench():
    d0 = WrenchDemand.consistent(PAIR, COM, (1.0, 0.5, MG), (0.1, 0, 0.0))
    G = build_grasp_matrix(PAIR, COM)
    for fi in (-40.0, 0.0, 13.0):
        d = WrenchDemand(d0.f_com, d0.tau_com, fi)
        fl, fr = solve_reaction_forces(PAIR, COM, d)
        assert np.allclose(fl + fr, d0.f_com, atol=1e-10)
        assert np.allclose((G @ np.concatenate([fl, fr]))[3:6], d0.tau_com, atol=1e-10)


def test_min_internal_force_restores_cones():
    # sideways push with the CoM over the left foot: the minimum-norm split
    # leaves the forces outside 20 deg cones, a little tension fixes it
    pair = ContactPair((0.0, 0.6, 0.0), (0.0, -0.6, 0.0), half_angle=math.radians(20))
    c = (0.0, 0.3, 0.3)
    d = WrenchDemand.consistent(pair, c, (0.0, 3.0, MG))
    fl, fr = solve_reaction_forces(pair, c, d)
    ok0, _ = check_friction_cone(fl, pair.n_left, pair.half_angle)
    ok1, _ = check_friction_cone(fr, pair.n_right, pair.half_angle)
    assert not (ok0 and ok1)
    fi, fl, fr, margin = solve_min_internal(pair, c, d)
    assert fi > 0 and margin >= -1e-12
    assert np.allclose(fl + fr, d.f_com, atol=1e-10)
    # slightly less internal force is infeasible (least magnitude)
    less = solve_reaction_forces(pair, c, WrenchDemand(d.f_com, d.tau_com, fi - 1e-3))
    oks = [check_friction_cone(f, n, pair.half_angle)[0]
           for f, n in zip(less, (pair.n_left, pair.n_right))]
    assert not all(oks)


def test_degenerate_and_rank_deficient():
    with pytest.raises(DegenerateContacts):
        ContactPair((0, 0, 0), (0, 0, 0)).axis
    near = ContactPair((0, 1e-12, 0), (0, -1e-12, 0))
    with pytest.raises(RankDeficient):
        solve_reaction_forces(near, COM, WrenchDemand((0, 0, MG), (0, 0, 0)))


def test_flat_walk_multicontact_in_cone(robot):
    plans = generate_nominal(flat_steps(8), robot, PlannerConfig(multicontact_fraction=0.25))
    samples = multicontact_forces(plans, robot.mass, robot.gravity)
    assert len(samples) == 7 * 21
    assert all(s.feasible for s in samples)
    assert max(s.residual for s in samples) < 1e-9
