import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stackelberg.errors import Infeasible, SingularM1, SingularSchur, Unbounded
from stackelberg.numerics import (
    ParametricQp,
    Polytope,
    PolytopeProjector,
    block_inverse,
    finite_difference_jacobian,
    kkt_residuals,
    project_polytope,
    solve_lp,
    solve_qp,
)

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def _assemble(b):
    return np.block([[b[0], b[1]], [b[2], b[3]]])


def _conditioned(rng, n, cond):
    U, _ = np.linalg.qr(rng.normal(size=(n, n)))
    V, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return U @ np.diag(np.geomspace(1.0, 1.0 / cond, n)) @ V.T


# ----------------------------------------------------------------------------
# polytope


def test_box_and_simplex_membership():
    B = Polytope.box([0, 0], [1, 2])
    assert B.contains([0.5, 2.0]) and not B.contains([1.1, 0.0])
    S = Polytope.simplex(3)
    assert S.contains([0.2, 0.3, 0.5]) and not S.contains([0.2, 0.3, 0.6])
    both = B.intersect(Polytope.from_rows(2, G=[[1, 1]], h=[1.0]))
    assert both.n_inq == 5 and not both.contains([1.0, 1.0])


def test_polytope_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Polytope(np.zeros((1, 2)), np.zeros(2), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        Polytope(np.zeros((1, 2)), np.zeros(1), np.zeros((1, 3)), np.zeros(1))
    with pytest.raises(ValueError):
        Polytope.box([0.0], [np.inf])


# ----------------------------------------------------------------------------
# block inverse


def test_block_inverse_identity_case():
    Mb = block_inverse(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2))
    for got, want in zip(Mb, (np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2))):
        np.testing.assert_array_equal(got, want)


def test_block_inverse_diagonal_case():
    Mb = block_inverse([[2.0]], [[0.0]], [[0.0]], [[4.0]])
    assert Mb[0][0, 0] == 0.5 and Mb[3][0, 0] == 0.25


def test_block_inverse_matches_dense_inverse(rng):
    M = _conditioned(rng, 6, 50.0)
    Mb = block_inverse(M[:4, :4], M[:4, 4:], M[4:, :4], M[4:, 4:])
    np.testing.assert_allclose(_assemble(Mb), np.linalg.inv(M), atol=1e-10)


def test_block_inverse_empty_second_block(rng):
    M = _conditioned(rng, 3, 10.0)
    Mb = block_inverse(M, np.zeros((3, 0)), np.zeros((0, 3)), np.zeros((0, 0)))
    np.testing.assert_allclose(Mb[0], np.linalg.inv(M), atol=1e-12)


def test_block_inverse_singular_blocks():
    with pytest.raises(SingularM1):
        block_inverse(np.zeros((2, 2)), np.eye(2), np.eye(2), np.eye(2))
    # [[1, 1], [1, 1]] has an invertible M1 but a zero Schur complement
    with pytest.raises(SingularSchur):
        block_inverse([[1.0]], [[1.0]], [[1.0]], [[1.0]])


@given(seeds, st.integers(1, 5), st.integers(1, 4), st.floats(1.0, 1e6))
def test_block_inverse_reconstruction(seed, p, q, cond):
    rng = np.random.default_rng(seed)
    M = _conditioned(rng, p + q, cond)
    Mb = block_inverse(M[:p, :p], M[:p, p:], M[p:, :p], M[p:, p:])
    np.testing.assert_allclose(M @ _assemble(Mb), np.eye(p + q), atol=1e-9)


# ----------------------------------------------------------------------------
# quadratic programs


def test_qp_interior_optimum():
    sol = solve_qp(np.eye(2), np.zeros(2), Polytope.box([-1, -1], [1, 1]))
    np.testing.assert_allclose(sol.x, 0.0, atol=1e-10)
    np.testing.assert_allclose(sol.lam, 0.0, atol=1e-10)


def test_qp_scalar_active_bound():
    sol = solve_qp([[2.0]], [-8.0], Polytope.from_rows(1, G=[[1.0]], h=[1.0]))
    assert sol.x[0] == pytest.approx(1.0, abs=1e-10)
    assert sol.lam[0] == pytest.approx(6.0, abs=1e-9)


def test_qp_simplex_symmetry():
    sol = solve_qp(np.eye(2), [-1.0, -1.0], Polytope.simplex(2))
    np.testing.assert_allclose(sol.x, [0.5, 0.5], atol=1e-10)


def test_qp_frozen_equality_oracle():
    # reference solution from an independent conic solver: x = (1/4, 3/4), nu = -11/4
    sol = solve_qp([[4.0, 1.0], [1.0, 2.0]], [1.0, 1.0], Polytope(np.ones((1, 2)), [1.0], -np.eye(2), np.zeros(2)))
    np.testing.assert_allclose(sol.x, [0.25, 0.75], atol=1e-10)
    np.testing.assert_allclose(sol.nu, [-2.75], atol=1e-9)
    np.testing.assert_allclose(sol.lam, 0.0, atol=1e-9)
    assert sol.objective == pytest.approx(1.875, abs=1e-10)


def test_qp_frozen_degenerate_oracle():
    # reference from an independent conic solver: x = (5/4, 3/4, 0),
    # lam = (11/8, 0, 0, 11/4, 1/8), objective -213/32
    H = [[3.0, 1.0, 0.0], [1.0, 2.0, 0.5], [0.0, 0.5, 1.0]]
    f = [-6.0, -4.0, 1.0]
    G = [[1, 1, 1], [-1, 0, 0], [0, -1, 0], [0, 0, -1], [1, -1, 0]]
    sol = solve_qp(H, f, Polytope.from_rows(3, G=G, h=[2.0, 0, 0, 0, 0.5]))
    np.testing.assert_allclose(sol.x, [1.25, 0.75, 0.0], atol=1e-9)
    np.testing.assert_allclose(sol.lam, [1.375, 0, 0, 2.75, 0.125], atol=1e-8)
    assert sol.objective == pytest.approx(-213 / 32, abs=1e-9)


def test_qp_equality_only():
    sol = solve_qp(np.eye(2), np.zeros(2), Polytope(np.ones((1, 2)), [2.0], np.zeros((0, 2)), []))
    np.testing.assert_allclose(sol.x, [1.0, 1.0], atol=1e-12)


def test_qp_infeasible():
    P = Polytope.from_rows(1, G=[[1.0], [-1.0]], h=[0.0, -1.0])
    with pytest.raises(Infeasible):
        solve_qp([[1.0]], [0.0], P)
    with pytest.raises(Infeasible):
        solve_qp([[1.0]], [0.0], Polytope(np.ones((2, 1)), [0.0, 1.0], np.zeros((0, 1)), []))


def _random_qp(rng, n):
    B = rng.normal(size=(n, n))
    H = B @ B.T + 0.1 * np.eye(n)
    f = 3 * rng.normal(size=n)
    x0 = rng.normal(size=n)
    p = int(rng.integers(0, max(1, n // 3)))
    m = int(rng.integers(1, 2 * n))
    A = rng.normal(size=(p, n))
    G = rng.normal(size=(m, n))
    return H, f, Polytope(A, A @ x0, G, G @ x0 + rng.uniform(0.0, 1.0, m))


@given(seeds, st.integers(1, 20))
def test_qp_kkt_certificate(seed, n):
    rng = np.random.default_rng(seed)
    H, f, C = _random_qp(rng, n)
    sol = solve_qp(H, f, C)
    res = kkt_residuals(H, f, C, sol.x, sol.lam, sol.nu)
    scale = 1.0 + max(np.max(np.abs(H @ sol.x)), np.max(np.abs(f)), np.max(np.abs(C.G_inq.T @ sol.lam)))
    for k, v in res.items():
        assert v <= 1e-8 * scale, (k, v)


@given(seeds)
def test_qp_beats_feasible_samples(seed):
    rng = np.random.default_rng(seed)
    n = 3
    B = rng.normal(size=(n, n))
    H, f = B @ B.T + 0.1 * np.eye(n), rng.normal(size=n)
    C = Polytope.box(-np.ones(n), np.ones(n)).intersect(Polytope.from_rows(n, G=[rng.normal(size=n)], h=[0.5]))
    sol = solve_qp(H, f, C)
    obj = lambda x: 0.5 * x @ H @ x + f @ x  # noqa: E731
    pts = rng.uniform(-1, 1, (500, n))
    pts = pts[np.all(pts @ C.G_inq.T <= C.h_inq, axis=1)]
    assert all(obj(sol.x) <= obj(p) + 1e-9 for p in pts)


def test_parametric_qp_matches_cold_solves(rng):
    H, _, C = _random_qp(rng, 6)
    pq = ParametricQp(H, C)
    for _ in range(30):
        f = 3 * rng.normal(size=6)
        np.testing.assert_allclose(pq.solve(f).x, solve_qp(H, f, C).x, atol=1e-8)
    assert pq.fallbacks <= 30


# ----------------------------------------------------------------------------
# projection


def test_projection_examples():
    assert project_polytope([0.3], Polytope.box([0], [1]))[0] == pytest.approx(0.3)
    assert project_polytope([2.0], Polytope.box([0], [1]))[0] == pytest.approx(1.0)
    np.testing.assert_allclose(project_polytope([1.0, 1.0], Polytope.simplex(2)), [0.5, 0.5], atol=1e-12)


def _simplex_projection_by_sorting(v):
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.nonzero(u - css / np.arange(1, v.size + 1) > 0)[0][-1]
    return np.maximum(v - css[k] / (k + 1), 0.0)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=8))
def test_simplex_projection_matches_sorting_algorithm(v):
    v = np.array(v)
    got = PolytopeProjector(Polytope.simplex(v.size))(v)
    np.testing.assert_allclose(got, _simplex_projection_by_sorting(v), atol=1e-9)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8))
def test_box_projection_is_clipping(v):
    v = np.array(v)
    lo, hi = -np.ones(v.size), 2 * np.ones(v.size)
    np.testing.assert_allclose(PolytopeProjector(Polytope.box(lo, hi))(v), np.clip(v, lo, hi), atol=1e-10)


@given(seeds)
def test_projection_idempotent_and_nonexpansive(seed):
    rng = np.random.default_rng(seed)
    n = 4
    C = Polytope.box(-np.ones(n), np.ones(n)).intersect(Polytope.from_rows(n, A=[rng.normal(size=n)], b=[0.2]))
    proj = PolytopeProjector(C)
    u, v = 3 * rng.normal(size=n), 3 * rng.normal(size=n)
    pu, pv = proj(u), proj(v)
    np.testing.assert_allclose(proj(pu), pu, atol=1e-9)
    assert np.linalg.norm(pu - pv) <= np.linalg.norm(u - v) + 1e-9


# ----------------------------------------------------------------------------
# linear programs


def test_lp_examples():
    assert solve_lp([1.0], Polytope.box([0], [1])).x[0] == pytest.approx(0.0)
    assert solve_lp([-1.0, -1.0], Polytope.simplex(2)).objective == pytest.approx(-1.0)
    with pytest.raises(Unbounded):
        solve_lp([-1.0], Polytope.from_rows(1, G=[[-1.0]], h=[0.0]))
    with pytest.raises(Infeasible):
        solve_lp([1.0], Polytope.from_rows(1, G=[[1.0], [-1.0]], h=[0.0, -1.0]))


def _vertex_enumeration(c, G, h):
    n = c.size
    best = np.inf
    for rows in itertools.combinations(range(G.shape[0]), n):
        Gr = G[list(rows)]
        if abs(np.linalg.det(Gr)) < 1e-12:
            continue
        x = np.linalg.solve(Gr, h[list(rows)])
        if np.all(G @ x <= h + 1e-9):
            best = min(best, float(c @ x))
    return best


@given(seeds, st.integers(2, 3), st.integers(0, 2))
def test_lp_matches_vertex_enumeration(seed, n, extra):
    # at most 8 rows: a box plus a few random cuts
    rng = np.random.default_rng(seed)
    G = np.vstack([np.eye(n), -np.eye(n), rng.normal(size=(extra, n))])
    h = np.concatenate([np.ones(2 * n), rng.uniform(0.2, 1.0, extra)])
    c = rng.normal(size=n)
    P = Polytope.from_rows(n, G=G, h=h)
    try:
        sol = solve_lp(c, P)
    except Unbounded:
        return
    assert sol.objective == pytest.approx(_vertex_enumeration(c, G, h), abs=1e-8)


# ----------------------------------------------------------------------------
# finite differences


def test_fd_identity_and_linear(rng):
    np.testing.assert_allclose(finite_difference_jacobian(lambda x: x, np.ones(3)), np.eye(3), atol=1e-10)
    A = rng.normal(size=(2, 3))
    np.testing.assert_allclose(finite_difference_jacobian(lambda x: A @ x, rng.normal(size=3)), A, atol=1e-9)


def test_fd_quadratic_map():
    J = finite_difference_jacobian(lambda x: np.array([x[0] ** 2, x[0] * x[1]]), np.array([1.0, 1.0]), h=1e-5)
    np.testing.assert_allclose(J, [[2.0, 0.0], [1.0, 1.0]], atol=1e-8)


def test_fd_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_difference_jacobian(lambda x: x, np.ones(2), h=0.0)
