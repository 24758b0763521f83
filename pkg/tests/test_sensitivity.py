import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import box_leader, random_game
from stackelberg.errors import InfeasiblePoint, IftViolation, RankDeficientEqualities
from stackelberg.game import Budget, ConstraintModel, FollowerSpec, KktPoint, ParametrizedGame
from stackelberg.lower import best_response, solve_vne
from stackelberg.numerics import finite_difference_jacobian
from stackelberg.scenario import GeneratorConfig, generate_scenario
from stackelberg.sensitivity import (
    ActiveSetPartition,
    SurrogateProblem,
    _linear_system_jacobian,
    assemble_kkt_jacobians,
    build_surrogate,
    check_ift_conditions,
    closed_form_jacobian,
    detect_active_set,
    fd_best_response_jacobian,
    fd_vne_jacobian,
    follower_jacobian,
    game_jacobians,
    solve_surrogate,
    surrogate_point,
)

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def _follower(P, S, G=None, h=None, A=None, b=None, Q=None, r=None, budget=None):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    m = P.shape[0]
    S = np.asarray(S, dtype=float).reshape(m, -1)
    return FollowerSpec(
        P=P, Q=np.zeros((m, m)) if Q is None else Q, r=np.zeros(m) if r is None else r, S=S,
        A=np.zeros((0, m)) if A is None else A, b=[] if b is None else b,
        G=np.zeros((0, m)) if G is None else G, h=[] if h is None else h, budget=budget,
    )


def _relative(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


# ----------------------------------------------------------------------------
# active sets and surrogate


def test_active_set_examples():
    f = _follower([[1.0]], [[1.0]], G=[[1.0]], h=[1.0])
    assert detect_active_set(f, [1.0], [0.0]).active == (0,)
    assert detect_active_set(f, [0.5], [0.0]).active == ()
    assert detect_active_set(f, [1 - 1e-9], [0.0], tol_act=1e-8).active == (0,)
    with pytest.raises(InfeasiblePoint):
        detect_active_set(f, [1.1], [0.0])


def test_surrogate_without_active_rows_is_original():
    f = _follower(np.eye(2), np.eye(2), G=np.vstack([np.eye(2), -np.eye(2)]), h=np.ones(4))
    sur = build_surrogate(f, ActiveSetPartition((), (0, 1, 2, 3)), np.zeros(2))
    assert sur.n_eq == 0 and sur.n_inq == 4
    X, Y = sur.feasible_set(np.zeros(2)), f.feasible_set(np.zeros(2))
    np.testing.assert_array_equal(X.G_inq, Y.G_inq)


def test_surrogate_drops_redundant_row():
    f = _follower(np.eye(2), np.eye(2), A=[[1.0, 1.0]], b=[1.0], G=[[1.0, 1.0]], h=[1.0])
    sur = build_surrogate(f, ActiveSetPartition((0,), ()), np.zeros(2))
    assert sur.partition.active == () and sur.partition.dropped == (0,)
    assert sur.n_eq == 1


def test_surrogate_promotes_two_box_faces():
    f = _follower(np.eye(2), np.eye(2), G=np.vstack([np.eye(2), -np.eye(2)]), h=np.ones(4))
    sur = build_surrogate(f, ActiveSetPartition((0, 1), (2, 3)), np.zeros(2))
    A = sur.constraints.eq.jac_x(np.ones(2), np.zeros(2))
    np.testing.assert_array_equal(A, np.eye(2))
    assert np.linalg.matrix_rank(A) == 2


def test_surrogate_rejects_rank_deficient_equalities():
    f = _follower(np.eye(2), np.eye(2), A=[[1.0, 1.0], [2.0, 2.0]], b=[1.0, 2.0])
    with pytest.raises(RankDeficientEqualities):
        build_surrogate(f, ActiveSetPartition((), ()), np.zeros(2))


def _active_instances(seed):
    cfg = GeneratorConfig(seed=seed, N=2, m_F=4, m_L=3, n_active=1 + seed % 3, constraint_density=0.25)
    sc = generate_scenario(cfg)
    return sc.game, np.array(sc.report["planted_pi"])


@given(st.integers(0, 10_000))
def test_surrogate_equivalence(seed):
    game, pi = _active_instances(seed)
    res = solve_vne(game, pi)
    for i, f in enumerate(game.followers):
        xi = game.blocks(res.x_star)[i]
        sm = game.sigma_minus(res.x_star, i)
        part = detect_active_set(f, xi, pi)
        sur = build_surrogate(f, part, pi, xi)
        np.testing.assert_allclose(solve_surrogate(sur, pi, sm).x, best_response(game, i, pi, res.x_star).x, atol=1e-8)


# ----------------------------------------------------------------------------
# KKT derivatives


def test_unconstrained_kkt_jacobians(rng):
    P = np.array([[2.0, 0.4], [0.4, 1.0]])
    S = rng.normal(size=(2, 3))
    f = _follower(P, S)
    sur = build_surrogate(f, ActiveSetPartition((), ()), np.zeros(3))
    Dz, Dpi = assemble_kkt_jacobians(sur, KktPoint(np.ones(2), [], []), np.zeros(3), np.zeros(2))
    np.testing.assert_array_equal(Dz, P)
    np.testing.assert_array_equal(Dpi, S)


def test_inactive_rows_give_slack_diagonal():
    f = _follower(np.eye(2), np.eye(2), G=np.vstack([np.eye(2), -np.eye(2)]), h=np.ones(4))
    x = np.array([0.2, -0.3])
    sur = build_surrogate(f, ActiveSetPartition((), (0, 1, 2, 3)), np.zeros(2))
    Dz, Dpi = assemble_kkt_jacobians(sur, KktPoint(x, np.zeros(4), []), np.zeros(2), np.zeros(2))
    mid = Dz[2:6]
    np.testing.assert_array_equal(mid[:, :2], 0.0)
    np.testing.assert_allclose(np.diag(mid[:, 2:]), f.G @ x - f.h)
    assert np.all(np.diag(mid[:, 2:]) < 0)
    np.testing.assert_array_equal(Dpi[2:6], 0.0)


def test_promoted_budget_row_pi_derivative(rng):
    S = rng.uniform(0.5, 1.5, (2, 2))
    pi_base = np.array([5.0, 3.0])
    x = np.array([1.0, 2.0])
    B = float(x @ S @ (pi_base - np.array([1.0, 1.0])))  # tight at pi = (1, 1)
    f = _follower(np.eye(2), S, budget=Budget(B, pi_base))
    pi = np.array([1.0, 1.0])
    part = detect_active_set(f, x, pi)
    assert part.active == (0,)
    sur = build_surrogate(f, part, pi, x)
    Dz, Dpi = assemble_kkt_jacobians(sur, KktPoint(x, [], [0.7]), pi, np.zeros(2))
    fd = finite_difference_jacobian(lambda p: sur.constraints.eq.value(x, p), pi)
    np.testing.assert_allclose(Dpi[2:], fd, atol=1e-8)
    np.testing.assert_allclose(Dpi[2], -(S.T @ x), atol=1e-12)


# ----------------------------------------------------------------------------
# Jacobians


def test_unconstrained_jacobian_is_minus_p_inverse_s(rng):
    P = np.array([[3.0, 1.0], [1.0, 2.0]])
    S = rng.normal(size=(2, 2))
    f = _follower(P, S, r=rng.normal(size=2))
    res = follower_jacobian(f, KktPoint(np.zeros(2), [], []), np.zeros(2), np.zeros(2))
    np.testing.assert_allclose(res.jacobian, -np.linalg.solve(P, S), atol=1e-12)
    assert res.deviation < 1e-12


def test_pinned_follower_has_zero_jacobian(rng):
    f = _follower(np.eye(2), rng.normal(size=(2, 3)), A=np.eye(2), b=[1.0, 2.0])
    res = follower_jacobian(f, KktPoint([1.0, 2.0], [], [0.0, 0.0]), np.ones(3), np.zeros(2))
    np.testing.assert_allclose(res.jacobian, 0.0, atol=1e-14)


def test_ift_condition_examples():
    strict = _follower(np.eye(2), np.eye(2), G=np.vstack([np.eye(2), -np.eye(2)]), h=np.ones(4))
    part = ActiveSetPartition((), (0, 1, 2, 3))
    sur = build_surrogate(strict, part, np.zeros(2))
    assert check_ift_conditions(sur, KktPoint(np.zeros(2), np.zeros(4), []), part, np.zeros(2)).gamma_empty

    indefinite = _follower(np.diag([1.0, -1.0]), np.eye(2))
    sur = build_surrogate(indefinite, ActiveSetPartition((), ()), np.zeros(2))
    assert not check_ift_conditions(sur, KktPoint(np.zeros(2), [], []), sur.partition, np.zeros(2)).hessian_pd

    dup = _follower(np.eye(2), np.eye(2), A=[[1.0, 0.0]], b=[0.0], G=[[1.0, 0.0]], h=[0.0])
    # build the surrogate by hand so the duplicated row is kept
    c = dup.constraints
    sur = SurrogateProblem(dup, ActiveSetPartition((0,), ()), ConstraintModel(inq=c.inq.take([]), eq=c.eq.concat(c.inq.take([0]))), 1)
    assert not check_ift_conditions(sur, KktPoint(np.zeros(2), [], [0.0, 1.0]), sur.partition, np.zeros(2)).full_row_rank


def test_weakly_active_row_blocks_ift():
    # minimizer of 1/2 x^2 sits exactly on the face x <= 0 with zero multiplier
    f = _follower([[1.0]], [[1.0]], G=[[1.0]], h=[0.0])
    with pytest.raises(IftViolation) as exc:
        follower_jacobian(f, KktPoint([0.0], [0.0], []), [0.0], [0.0])
    assert exc.value.condition == "gamma_nonempty"


@given(st.integers(0, 10_000))
def test_closed_form_matches_linear_system(seed):
    game, pi = _active_instances(seed)
    res = solve_vne(game, pi)
    for s in game_jacobians(game, pi, res.x_star, res.kkt_points):
        assert s.diagnostics.ok
        assert _relative(s.closed_form, s.jacobian) <= 1e-8


@given(st.integers(0, 10_000))
def test_jacobian_matches_best_response_differences(seed):
    game, pi = _active_instances(seed)
    res = solve_vne(game, pi)
    sens = game_jacobians(game, pi, res.x_star, res.kkt_points)
    for i, s in enumerate(sens):
        fd = fd_best_response_jacobian(game, i, pi, res.x_star, h=1e-6)
        assert np.max(np.abs(s.jacobian - fd)) <= max(1e-5 * np.max(np.abs(fd)), 1e-7)


def test_single_follower_matches_equilibrium_differences():
    sc = generate_scenario(GeneratorConfig(seed=5, N=1, m_F=4, m_L=3, n_active=2))
    game, pi = sc.game, np.array(sc.report["planted_pi"])
    res = solve_vne(game, pi)
    J = game_jacobians(game, pi, res.x_star, res.kkt_points)[0].jacobian
    fd = fd_vne_jacobian(game, pi, h=1e-6)
    assert _relative(J, fd) <= 1e-5


def test_jacobian_constant_without_pi_coupling():
    g = random_game(3, box=0.4)
    pis = [np.array([1.0, 2.0]), np.array([1.0 + 1e-3, 2.0 - 1e-3])]
    jacs, parts = [], []
    for pi in pis:
        res = solve_vne(g, pi)
        sens = game_jacobians(g, pi, res.x_star, res.kkt_points)
        jacs.append([s.jacobian for s in sens])
        parts.append([s.partition.active for s in sens])
    assert parts[0] == parts[1]
    for a, b in zip(*jacs):
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_surrogate_point_recovers_equality_duals():
    f = _follower(np.eye(2), np.eye(2), A=[[1.0, 1.0]], b=[1.0], G=np.vstack([np.eye(2), -np.eye(2)]), h=np.ones(4))
    g = ParametrizedGame(box_leader(2, 0.0, 5.0), (f,))
    pi = np.array([0.3, 0.1])
    kkt = best_response(g, 0, pi, np.zeros(2))
    part = detect_active_set(f, kkt.x, pi)
    sur = build_surrogate(f, part, pi, kkt.x)
    z = surrogate_point(sur, kkt.x, pi, np.zeros(2))
    np.testing.assert_allclose(z.nu[:1], kkt.nu, atol=1e-9)
    np.testing.assert_allclose(closed_form_jacobian(sur, z, pi), _linear_system_jacobian(sur, z, pi, np.zeros(2)), atol=1e-12)
