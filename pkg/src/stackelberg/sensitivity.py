"""Equilibrium sensitivity: active sets, surrogate problems and ``D_pi x_i*``.

The Jacobian of a follower's best response is obtained by differentiating its
KKT system. Active inequality rows are first promoted to equalities (the
surrogate problem), which makes the KKT map smooth around the solution; the
Jacobian is then computed both from the full KKT linear system (through the
block inverse) and from the reduced closed form, and the two are compared.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, IftViolation, InfeasiblePoint, RankDeficientEqualities, SingularMatrixError
from .game import ConstraintModel, FollowerSpec, KktPoint, ParametrizedGame, lagrangian_gradient
from .lower import VneConfig, best_response, solve_vne
from .numerics import Polytope, block_inverse, finite_difference_jacobian, solve_qp
from .parallel import ordered_map

TOL_ACT = 1e-7


@dataclass(frozen=True)
class ActiveSetPartition:
    active: tuple
    inactive: tuple
    dropped: tuple = ()

    @property
    def n_rows(self) -> int:
        return len(self.active) + len(self.inactive) + len(self.dropped)

    def to_dict(self):
        return {"active": list(self.active), "inactive": list(self.inactive), "dropped": list(self.dropped)}


@dataclass(frozen=True)
class IftDiagnostics:
    gamma_empty: bool
    hessian_pd: bool
    full_row_rank: bool
    schur_condition: float

    @property
    def ok(self) -> bool:
        return self.gamma_empty and self.hessian_pd and self.full_row_rank and np.isfinite(self.schur_condition)

    def failed(self) -> Optional[str]:
        if not self.gamma_empty:
            return "gamma_nonempty"
        if not self.hessian_pd:
            return "hessian_not_pd"
        if not self.full_row_rank:
            return "rank_deficient"
        if not np.isfinite(self.schur_condition):
            return "singular_schur"
        return None


@dataclass
class SensitivityResult:
    jacobian: np.ndarray
    partition: ActiveSetPartition
    diagnostics: IftDiagnostics
    closed_form: np.ndarray
    deviation: float  # relative inf-norm gap between the two routes


@dataclass(frozen=True, eq=False)
class SurrogateProblem:
    """Best-response problem with the active rows held as equalities.

    Carries the follower's cost data so every evaluator that accepts a
    ``FollowerSpec`` also accepts a surrogate.
    """

    spec: FollowerSpec
    partition: ActiveSetPartition
    constraints: ConstraintModel
    n_orig_eq: int

    P = property(lambda self: self.spec.P)
    Q = property(lambda self: self.spec.Q)
    r = property(lambda self: self.spec.r)
    S = property(lambda self: self.spec.S)
    m_F = property(lambda self: self.spec.m_F)
    m_L = property(lambda self: self.spec.m_L)

    @property
    def n_eq(self) -> int:
        return self.constraints.eq.n_rows

    @property
    def n_inq(self) -> int:
        return self.constraints.inq.n_rows

    def feasible_set(self, pi) -> Polytope:
        Gx, hx = self.constraints.inq.linear_at(pi)
        Ax, bx = self.constraints.eq.linear_at(pi)
        return Polytope(Ax, bx, Gx, hx)


def _row_norms(J):
    n = np.linalg.norm(J, axis=1) if J.size else np.zeros(J.shape[0])
    return np.where(n > 0, n, 1.0)


def detect_active_set(spec, x_star_i, pi, tol_act: float = TOL_ACT) -> ActiveSetPartition:
    """Rows with ``|g_j| / ||grad_x g_j|| <= tol_act`` are active."""
    x = np.asarray(x_star_i, dtype=float)
    pi = np.asarray(pi, dtype=float)
    inq = spec.constraints.inq
    if inq.n_rows == 0:
        return ActiveSetPartition((), ())
    g = inq.value(x, pi) / _row_norms(inq.jac_x(x, pi))
    if np.any(g > tol_act):
        j = int(np.argmax(g))
        raise InfeasiblePoint(f"inequality row {j} violated by {g[j]:.3e} (scaled)")
    act = np.abs(g) <= tol_act
    return ActiveSetPartition(tuple(np.where(act)[0].tolist()), tuple(np.where(~act)[0].tolist()))


def build_surrogate(spec, partition: ActiveSetPartition, pi, x_star_i=None) -> SurrogateProblem:
    """Promote the active rows to equalities, dropping linearly dependent ones.

    Rows are tested in ascending index order and kept when they raise the rank
    of the stacked equality gradients.
    """
    pi = np.asarray(pi, dtype=float)
    x = np.zeros(spec.m_F) if x_star_i is None else np.asarray(x_star_i, dtype=float)
    c = spec.constraints
    Aeq = c.eq.jac_x(x, pi)
    rank = np.linalg.matrix_rank(Aeq) if Aeq.shape[0] else 0
    if rank < Aeq.shape[0]:
        raise RankDeficientEqualities(f"equality rows have rank {rank} < {Aeq.shape[0]}")
    Jinq = c.inq.jac_x(x, pi)
    kept, dropped = [], []
    stack = Aeq
    for j in sorted(partition.active):
        cand = np.vstack([stack, Jinq[j : j + 1]])
        if np.linalg.matrix_rank(cand) > stack.shape[0]:
            stack = cand
            kept.append(j)
        else:
            dropped.append(j)
    part = ActiveSetPartition(tuple(kept), tuple(partition.inactive), tuple(sorted(set(partition.dropped) | set(dropped))))
    model = ConstraintModel(inq=c.inq.take(list(part.inactive)), eq=c.eq.concat(c.inq.take(kept)))
    return SurrogateProblem(spec, part, model, c.eq.n_rows)


def surrogate_point(problem: SurrogateProblem, x_i, pi, sigma_minus) -> KktPoint:
    """KKT point of the surrogate at ``x_i``; equality duals by least squares."""
    x = np.asarray(x_i, dtype=float)
    pi = np.asarray(pi, dtype=float)
    grad = problem.P @ x + problem.Q @ sigma_minus + problem.r + problem.S @ pi
    lam = np.zeros(problem.n_inq)
    if problem.n_eq == 0:
        return KktPoint(x, lam, np.zeros(0))
    J = problem.constraints.eq.jac_x(x, pi)
    nu = np.linalg.lstsq(J.T, -grad, rcond=None)[0]
    return KktPoint(x, lam, nu)


def solve_surrogate(problem: SurrogateProblem, pi, sigma_minus) -> KktPoint:
    lin = problem.Q @ sigma_minus + problem.r + problem.S @ np.asarray(pi, dtype=float)
    sol = solve_qp(problem.P, lin, problem.feasible_set(pi))
    return KktPoint(sol.x, np.maximum(sol.lam, 0.0), sol.nu)


def assemble_kkt_jacobians(problem, z_hat: KktPoint, pi, sigma_minus):
    """Derivatives of the KKT map in ``z = (x, lam, nu)`` and in ``pi``."""
    pi = np.asarray(pi, dtype=float)
    x, lam, nu = z_hat.x, z_hat.lam, z_hat.nu
    c = problem.constraints
    n, p, q, m_L = problem.m_F, c.inq.n_rows, c.eq.n_rows, problem.m_L
    if x.size != n or lam.size != p or nu.size != q:
        raise DimensionMismatch("KKT point does not match the surrogate row counts")
    Jin, Jeq = c.inq.jac_x(x, pi), c.eq.jac_x(x, pi)
    hxx = problem.P + c.inq.hess_xx(x, pi, lam) + c.eq.hess_xx(x, pi, nu)
    hxp = problem.S + c.inq.hess_xpi(x, pi, lam) + c.eq.hess_xpi(x, pi, nu)
    Dz = np.zeros((n + p + q, n + p + q))
    Dz[:n, :n] = hxx
    Dz[:n, n : n + p] = Jin.T
    Dz[:n, n + p :] = Jeq.T
    Dz[n : n + p, :n] = lam[:, None] * Jin
    Dz[n : n + p, n : n + p] = np.diag(c.inq.value(x, pi))
    Dz[n + p :, :n] = Jeq
    Dpi = np.vstack([hxp, lam[:, None] * c.inq.jac_pi(x, pi), c.eq.jac_pi(x, pi)]).reshape(n + p + q, m_L)
    return Dz, Dpi


def check_ift_conditions(problem, z_hat: KktPoint, partition: ActiveSetPartition, pi, tol_act: float = TOL_ACT) -> IftDiagnostics:
    pi = np.asarray(pi, dtype=float)
    x, lam, nu = z_hat.x, z_hat.lam, z_hat.nu
    c = problem.constraints
    if c.inq.n_rows:
        g = c.inq.value(x, pi) / _row_norms(c.inq.jac_x(x, pi))
        gamma_empty = not bool(np.any((np.abs(g) <= tol_act) & (np.abs(lam) <= tol_act)))
    else:
        gamma_empty = True
    # promoted rows with a vanishing multiplier are weakly active as well
    promoted = nu[getattr(problem, "n_orig_eq", nu.size) :]
    if promoted.size and np.any(np.abs(promoted) <= tol_act * (1.0 + np.max(np.abs(nu)))):
        gamma_empty = False
    S1 = problem.P + c.inq.hess_xx(x, pi, lam) + c.eq.hess_xx(x, pi, nu)
    S1s = 0.5 * (S1 + S1.T)
    hessian_pd = bool(np.min(np.linalg.eigvalsh(S1s)) > 1e-12 * max(1.0, np.max(np.abs(S1s))))
    S2 = c.eq.jac_x(x, pi)
    q = S2.shape[0]
    full_rank = q == 0 or int(np.linalg.matrix_rank(S2)) == q
    if q == 0:
        cond = 1.0
    elif not (hessian_pd and full_rank):
        cond = float("inf")
    else:
        cond = float(np.linalg.cond(S2 @ np.linalg.solve(S1, S2.T)))
        if cond > 1e14:
            cond = float("inf")
    return IftDiagnostics(gamma_empty, hessian_pd, full_rank, cond)


def closed_form_jacobian(problem, z_hat: KktPoint, pi) -> np.ndarray:
    """``-S1^{-1}[S3 - S2'(S2 S1^{-1} S2')^{-1}(S2 S1^{-1} S3 - S4)]``."""
    pi = np.asarray(pi, dtype=float)
    x, lam, nu = z_hat.x, z_hat.lam, z_hat.nu
    c = problem.constraints
    S1 = problem.P + c.inq.hess_xx(x, pi, lam) + c.eq.hess_xx(x, pi, nu)
    S3 = problem.S + c.inq.hess_xpi(x, pi, lam) + c.eq.hess_xpi(x, pi, nu)
    S2 = c.eq.jac_x(x, pi)
    S4 = c.eq.jac_pi(x, pi)
    S1i_S3 = np.linalg.solve(S1, S3)
    if S2.shape[0] == 0:
        return -S1i_S3
    S1i_S2t = np.linalg.solve(S1, S2.T)
    K = S2 @ S1i_S2t
    return -(S1i_S3 - S1i_S2t @ np.linalg.solve(K, S2 @ S1i_S3 - S4))


def _linear_system_jacobian(problem, z_hat, pi, sigma_minus):
    Dz, Dpi = assemble_kkt_jacobians(problem, z_hat, pi, sigma_minus)
    n = problem.m_F
    Mb1, Mb2, _, _ = block_inverse(Dz[:n, :n], Dz[:n, n:], Dz[n:, :n], Dz[n:, n:])
    return -(Mb1 @ Dpi[:n] + Mb2 @ Dpi[n:])


def follower_jacobian(spec, z_hat: KktPoint, pi, sigma_minus, tol_act: float = TOL_ACT) -> SensitivityResult:
    """``D_pi x_i*`` at fixed ``x_{-i}`` from a best-response KKT point.

    Raises ``IftViolation`` naming the failed condition.
    """
    pi = np.asarray(pi, dtype=float)
    sigma_minus = np.asarray(sigma_minus, dtype=float)
    partition = detect_active_set(spec, z_hat.x, pi, tol_act)
    problem = build_surrogate(spec, partition, pi, z_hat.x)
    zb = surrogate_point(problem, z_hat.x, pi, sigma_minus)
    diag = check_ift_conditions(problem, zb, problem.partition, pi, tol_act)
    failed = diag.failed()
    if failed:
        raise IftViolation(failed)
    try:
        jac = _linear_system_jacobian(problem, zb, pi, sigma_minus)
    except SingularMatrixError as exc:
        raise IftViolation("singular_schur", str(exc)) from exc
    cf = closed_form_jacobian(problem, zb, pi)
    dev = float(np.max(np.abs(jac - cf), initial=0.0) / max(1.0, np.max(np.abs(jac), initial=0.0)))
    return SensitivityResult(jac, problem.partition, diag, cf, dev)


def game_jacobians(game: ParametrizedGame, pi, x_star, kkt_points, tol_act: float = TOL_ACT):
    """Per-follower sensitivity results, computed independently and gathered in order."""
    pi = np.asarray(pi, dtype=float)

    def one(i):
        sm = game.sigma_minus(x_star, i)
        return follower_jacobian(game.followers[i], kkt_points[i], pi, sm, tol_act)

    return ordered_map(one, range(game.N))


# ----------------------------------------------------------------------------
# finite-difference oracles


def fd_best_response_jacobian(game: ParametrizedGame, i: int, pi, x_star, h=None) -> np.ndarray:
    """Central differences of follower i's best response with ``x_{-i}`` frozen."""
    x_star = np.asarray(x_star, dtype=float)
    return finite_difference_jacobian(lambda p: best_response(game, i, p, x_star).x, np.asarray(pi, dtype=float), h)


def fd_vne_jacobian(game: ParametrizedGame, pi, x0=None, h=None, cfg: Optional[VneConfig] = None) -> np.ndarray:
    """Central differences of the full equilibrium map (followers coupled)."""
    cfg = cfg or VneConfig(tol=1e-13)
    return finite_difference_jacobian(
        lambda p: solve_vne(game, p, cfg, x0=x0, recover_duals=False).x_star, np.asarray(pi, dtype=float), h
    )
