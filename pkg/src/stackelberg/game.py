"""Bi-level game data model, validators and evaluators.

Conventions used throughout the package:

* follower ``i`` decides ``x_i`` in R^m_F; the leader decides ``pi`` in R^m_L;
* the stacked joint strategy ``x`` is a flat vector of length ``N * m_F``;
* ``S_i`` is stored as an ``m_F x m_L`` matrix and the price term of the
  follower cost is ``x_i' S_i pi``, so its gradient contribution is ``S_i pi``;
* every constraint row is written as ``g(x_i, pi) <= 0`` or ``g(x_i, pi) = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, NotStronglyMonotone, SingularS, ValidationError
from .numerics import Polytope, solve_lp, Infeasible, Unbounded


def _vec(v, n=None, name="vector"):
    v = np.asarray(v, dtype=float).reshape(-1)
    if n is not None and v.size != n:
        raise DimensionMismatch(f"{name} has length {v.size}, expected {n}")
    return v


def _mat(M, rows=None, cols=None, name="matrix"):
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        M = M.reshape(rows or 0, cols or 0)
    M = np.atleast_2d(M)
    if (rows is not None and M.shape[0] != rows) or (cols is not None and M.shape[1] != cols):
        raise DimensionMismatch(f"{name} has shape {M.shape}, expected ({rows}, {cols})")
    return M


# ----------------------------------------------------------------------------
# constraint rows


class LinearRows:
    """Rows ``C_x x + C_pi pi - d``."""

    def __init__(self, Cx, Cpi, d):
        self.Cx = np.asarray(Cx, dtype=float)
        self.Cpi = np.asarray(Cpi, dtype=float)
        self.d = np.asarray(d, dtype=float).reshape(-1)

    @property
    def n_rows(self):
        return self.d.size

    def value(self, x, pi):
        return self.Cx @ x + self.Cpi @ pi - self.d

    def jac_x(self, x, pi):
        return self.Cx

    def jac_pi(self, x, pi):
        return self.Cpi

    def hess_xx(self, x, pi, w):
        return np.zeros((self.Cx.shape[1], self.Cx.shape[1]))

    def hess_xpi(self, x, pi, w):
        return np.zeros((self.Cx.shape[1], self.Cpi.shape[1]))

    def linear_at(self, pi):
        return self.Cx, self.d - self.Cpi @ pi


class BudgetRow:
    """Discount budget ``(pi_base - pi)' S' x - B <= 0`` (bilinear in x, pi)."""

    linear_in_pi = False

    def __init__(self, S, pi_base, B):
        self.S = np.asarray(S, dtype=float)
        self.pi_base = np.asarray(pi_base, dtype=float).reshape(-1)
        self.B = float(B)

    n_rows = 1

    def value(self, x, pi):
        return np.array([x @ self.S @ (self.pi_base - pi) - self.B])

    def jac_x(self, x, pi):
        return (self.S @ (self.pi_base - pi))[None, :]

    def jac_pi(self, x, pi):
        return -(self.S.T @ x)[None, :]

    def hess_xx(self, x, pi, w):
        return np.zeros((self.S.shape[0], self.S.shape[0]))

    def hess_xpi(self, x, pi, w):
        return -w[0] * self.S

    def linear_at(self, pi):
        return self.jac_x(None, pi), np.array([self.B])


class CallbackRows:
    """Smooth rows given by user callbacks.

    ``value(x, pi) -> (m,)``, ``jac_x -> (m, m_F)``, ``jac_pi -> (m, m_L)``;
    the optional ``hess_xx(x, pi, w)`` / ``hess_xpi(x, pi, w)`` return the
    multiplier-weighted second derivatives and default to zero (affine rows).
    """

    def __init__(self, n_rows, value, jac_x, jac_pi, hess_xx=None, hess_xpi=None, m_F=None, m_L=None):
        self.n_rows = int(n_rows)
        self._value, self._jx, self._jp = value, jac_x, jac_pi
        self._hxx, self._hxp = hess_xx, hess_xpi
        self._m_F, self._m_L = m_F, m_L

    def value(self, x, pi):
        return np.asarray(self._value(x, pi), dtype=float).reshape(-1)

    def jac_x(self, x, pi):
        return np.asarray(self._jx(x, pi), dtype=float).reshape(self.n_rows, -1)

    def jac_pi(self, x, pi):
        return np.asarray(self._jp(x, pi), dtype=float).reshape(self.n_rows, -1)

    def hess_xx(self, x, pi, w):
        if self._hxx is None:
            return np.zeros((x.size, x.size))
        return np.asarray(self._hxx(x, pi, w), dtype=float)

    def hess_xpi(self, x, pi, w):
        if self._hxp is None:
            return np.zeros((x.size, pi.size))
        return np.asarray(self._hxp(x, pi, w), dtype=float)

    def linear_at(self, pi):
        raise NotImplementedError("callback rows cannot be projected onto directly")


class RowStack:
    """A vertical stack of row families, optionally restricted to some rows."""

    def __init__(self, blocks: Sequence, m_F: int, m_L: int, select=None):
        self.blocks = [b for b in blocks if b.n_rows > 0]
        self.m_F, self.m_L = m_F, m_L
        total = sum(b.n_rows for b in self.blocks)
        self.select = np.arange(total) if select is None else np.asarray(select, dtype=int)

    @property
    def n_rows(self):
        return self.select.size

    def _stack(self, parts, width):
        full = np.vstack(parts) if parts else np.zeros((0, width))
        return full[self.select]

    def value(self, x, pi):
        parts = [b.value(x, pi) for b in self.blocks]
        return (np.concatenate(parts) if parts else np.zeros(0))[self.select]

    def jac_x(self, x, pi):
        return self._stack([b.jac_x(x, pi) for b in self.blocks], self.m_F)

    def jac_pi(self, x, pi):
        return self._stack([b.jac_pi(x, pi) for b in self.blocks], self.m_L)

    def _scatter(self, w):
        total = sum(b.n_rows for b in self.blocks)
        full = np.zeros(total)
        full[self.select] = w
        out, k = [], 0
        for b in self.blocks:
            out.append(full[k : k + b.n_rows])
            k += b.n_rows
        return out

    def hess_xx(self, x, pi, w):
        out = np.zeros((self.m_F, self.m_F))
        for b, wb in zip(self.blocks, self._scatter(w)):
            if np.any(wb):
                out += b.hess_xx(x, pi, wb)
        return out

    def hess_xpi(self, x, pi, w):
        out = np.zeros((self.m_F, self.m_L))
        for b, wb in zip(self.blocks, self._scatter(w)):
            if np.any(wb):
                out += b.hess_xpi(x, pi, wb)
        return out

    def linear_at(self, pi):
        Cs, ds = [], []
        for b in self.blocks:
            C, d = b.linear_at(pi)
            Cs.append(np.atleast_2d(C))
            ds.append(np.atleast_1d(d))
        C = np.vstack(Cs) if Cs else np.zeros((0, self.m_F))
        d = np.concatenate(ds) if ds else np.zeros(0)
        return C[self.select], d[self.select]

    def take(self, idx) -> "RowStack":
        return RowStack(self.blocks, self.m_F, self.m_L, self.select[np.asarray(idx, dtype=int)])

    def concat(self, other: "RowStack") -> "RowStack":
        """Rows of ``self`` followed by rows of ``other``."""
        offset = sum(b.n_rows for b in self.blocks)
        select = np.concatenate([self.select, other.select + offset])
        return RowStack(self.blocks + other.blocks, self.m_F, self.m_L, select)


@dataclass(frozen=True)
class ConstraintModel:
    inq: RowStack
    eq: RowStack


# ----------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Budget:
    """Discount budget ``(pi_base - pi)' S' x <= B``; ``B = inf`` drops the row."""

    B: float
    pi_base: np.ndarray

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.B))


@dataclass(frozen=True, eq=False)
class FollowerSpec:
    """One follower: quadratic cost data and (x, pi)-parametrized constraints.

    Cost ``1/2 x'Px + x'Q sigma_{-i} + r'x + x'S pi``; constraints
    ``A x + A_pi pi = b``, ``G x + G_pi pi <= h`` and an optional budget.
    """

    P: np.ndarray
    Q: np.ndarray
    r: np.ndarray
    S: np.ndarray
    A: np.ndarray
    b: np.ndarray
    G: np.ndarray
    h: np.ndarray
    A_pi: Optional[np.ndarray] = None
    G_pi: Optional[np.ndarray] = None
    budget: Optional[Budget] = None

    def __post_init__(self):
        P = _mat(self.P, name="P")
        m = P.shape[0]
        S = _mat(self.S, rows=m, name="S")
        m_L = S.shape[1]
        A = _mat(self.A, cols=m, name="A") if np.size(self.A) else np.zeros((0, m))
        G = _mat(self.G, cols=m, name="G") if np.size(self.G) else np.zeros((0, m))
        vals = {
            "P": _mat(P, m, m, "P"),
            "Q": _mat(self.Q, m, m, "Q"),
            "r": _vec(self.r, m, "r"),
            "S": S,
            "A": A,
            "b": _vec(self.b, A.shape[0], "b"),
            "G": G,
            "h": _vec(self.h, G.shape[0], "h"),
            "A_pi": np.zeros((A.shape[0], m_L)) if self.A_pi is None else _mat(self.A_pi, A.shape[0], m_L, "A_pi") if A.shape[0] else np.zeros((0, m_L)),
            "G_pi": np.zeros((G.shape[0], m_L)) if self.G_pi is None else _mat(self.G_pi, G.shape[0], m_L, "G_pi") if G.shape[0] else np.zeros((0, m_L)),
        }
        for k, v in vals.items():
            if not np.all(np.isfinite(v)):
                raise ValidationError(f"follower field {k} has non-finite entries", field=k)
            object.__setattr__(self, k, v)
        if self.budget is not None:
            pb = _vec(self.budget.pi_base, m_L, "pi_base")
            object.__setattr__(self, "budget", Budget(float(self.budget.B), pb))
        object.__setattr__(
            self,
            "constraints",
            ConstraintModel(
                inq=RowStack(
                    [LinearRows(self.G, self.G_pi, self.h)]
                    + ([BudgetRow(self.S, self.budget.pi_base, self.budget.B)] if self.has_finite_budget else []),
                    m,
                    m_L,
                ),
                eq=RowStack([LinearRows(self.A, self.A_pi, self.b)], m, m_L),
            ),
        )

    @property
    def m_F(self) -> int:
        return self.P.shape[0]

    @property
    def m_L(self) -> int:
        return self.S.shape[1]

    @property
    def has_finite_budget(self) -> bool:
        return self.budget is not None and self.budget.finite

    @property
    def n_inq(self) -> int:
        return self.constraints.inq.n_rows

    @property
    def n_eq(self) -> int:
        return self.constraints.eq.n_rows

    @property
    def pi_coupled(self) -> bool:
        return bool(np.any(self.A_pi) or np.any(self.G_pi))

    def feasible_set(self, pi) -> Polytope:
        """``X_i(pi)`` as a polytope in ``x_i`` (budget row rebuilt at ``pi``)."""
        Gx, hx = self.constraints.inq.linear_at(pi)
        Ax, bx = self.constraints.eq.linear_at(pi)
        return Polytope(Ax, bx, Gx, hx)

    def budget_used(self, x_i, pi) -> float:
        if self.budget is None:
            return float("nan")
        return float(x_i @ self.S @ (self.budget.pi_base - np.asarray(pi, dtype=float)))


@dataclass(frozen=True, eq=False)
class LeaderSpec:
    """Leader objective on the aggregate and the leader polytope.

    Either ``J_L = 1/2 s'P_L s + q_L's`` (``s = sigma(x)``), or with a target
    ``J_L = 1/2 ||s - target||^2`` where ``target = (1'n) Z``.
    """

    P_L: np.ndarray
    q_L: np.ndarray
    polytope: Polytope
    n: Optional[np.ndarray] = None
    Z: Optional[np.ndarray] = None
    pi_base: Optional[np.ndarray] = None

    def __post_init__(self):
        P_L = _mat(self.P_L, name="P_L")
        object.__setattr__(self, "P_L", _mat(P_L, P_L.shape[0], P_L.shape[0], "P_L"))
        object.__setattr__(self, "q_L", _vec(self.q_L, P_L.shape[0], "q_L"))
        if (self.n is None) != (self.Z is None):
            raise ValidationError("target mode needs both n and Z", field="target_mode")
        if self.n is not None:
            Z = _vec(self.Z, P_L.shape[0], "Z")
            if np.any(Z < 0) or abs(Z.sum() - 1.0) > 1e-9:
                raise ValidationError("Z must be a nonnegative vector with unit 1-norm", field="Z")
            object.__setattr__(self, "Z", Z)
            object.__setattr__(self, "n", _vec(self.n, name="n"))
        if self.pi_base is not None:
            object.__setattr__(self, "pi_base", _vec(self.pi_base, self.polytope.dim, "pi_base"))

    @classmethod
    def with_target(cls, n, Z, polytope: Polytope, pi_base=None) -> "LeaderSpec":
        Z = _vec(Z)
        return cls(np.eye(Z.size), np.zeros(Z.size), polytope, n=_vec(n), Z=Z, pi_base=pi_base)

    @property
    def target_mode(self) -> bool:
        return self.n is not None

    @property
    def target(self) -> Optional[np.ndarray]:
        if not self.target_mode:
            return None
        return float(np.sum(self.n)) * self.Z

    @property
    def m_L(self) -> int:
        return self.polytope.dim

    @property
    def m_sigma(self) -> int:
        return self.P_L.shape[0]

    def cost_sigma(self, sigma) -> float:
        if self.target_mode:
            d = sigma - self.target
            return float(0.5 * d @ d)
        return float(0.5 * sigma @ self.P_L @ sigma + self.q_L @ sigma)

    def grad_sigma(self, sigma) -> np.ndarray:
        if self.target_mode:
            return sigma - self.target
        return self.P_L @ sigma + self.q_L


@dataclass(frozen=True, eq=False)
class ParametrizedGame:
    leader: LeaderSpec
    followers: tuple

    def __post_init__(self):
        fs = tuple(self.followers)
        if not fs:
            raise ValidationError("a game needs at least one follower", field="followers")
        m_F, m_L = fs[0].m_F, fs[0].m_L
        for k, f in enumerate(fs):
            if f.m_F != m_F:
                raise DimensionMismatch(f"follower {k} has m_F={f.m_F}, expected {m_F}")
            if f.m_L != m_L:
                raise DimensionMismatch(f"follower {k} has m_L={f.m_L}, expected {m_L}")
        if self.leader.m_L != m_L:
            raise DimensionMismatch(f"leader polytope has dimension {self.leader.m_L}, expected m_L={m_L}")
        if self.leader.m_sigma != m_F:
            raise DimensionMismatch(f"leader objective acts on R^{self.leader.m_sigma}, expected m_F={m_F}")
        object.__setattr__(self, "followers", fs)

    @property
    def N(self) -> int:
        return len(self.followers)

    @property
    def m_F(self) -> int:
        return self.followers[0].m_F

    @property
    def m_L(self) -> int:
        return self.followers[0].m_L

    def blocks(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.size != self.N * self.m_F:
            raise DimensionMismatch(f"stacked x has length {x.size}, expected {self.N * self.m_F}")
        return x.reshape(self.N, self.m_F)

    def sigma(self, x) -> np.ndarray:
        return self.blocks(x).sum(axis=0)

    def sigma_minus(self, x, i) -> np.ndarray:
        xb = self.blocks(x)
        return xb.sum(axis=0) - xb[i]

    def linear_operator(self) -> np.ndarray:
        """Matrix ``M`` with ``F(x, pi) = M x + c(pi)``."""
        N, m = self.N, self.m_F
        M = np.zeros((N * m, N * m))
        for i, f in enumerate(self.followers):
            for j in range(N):
                M[i * m : (i + 1) * m, j * m : (j + 1) * m] = f.P if i == j else f.Q
        return M

    def offset(self, pi) -> np.ndarray:
        pi = _vec(pi, self.m_L, "pi")
        return np.concatenate([f.r + f.S @ pi for f in self.followers])

    def with_followers(self, followers) -> "ParametrizedGame":
        return ParametrizedGame(self.leader, tuple(followers))


@dataclass
class KktPoint:
    x: np.ndarray
    lam: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        self.x = _vec(self.x)
        self.lam = _vec(self.lam)
        self.nu = _vec(self.nu)
        if np.any(self.lam < 0):
            raise ValueError("inequality multipliers must be nonnegative")


# ----------------------------------------------------------------------------
# evaluators


def pseudo_gradient(game: ParametrizedGame, x, pi) -> np.ndarray:
    """Stacked partial gradients ``P_i x_i + Q_i sigma_{-i} + r_i + S_i pi``."""
    xb = game.blocks(x)
    pi = _vec(pi, game.m_L, "pi")
    sigma = xb.sum(axis=0)
    out = np.empty_like(xb)
    for i, f in enumerate(game.followers):
        out[i] = f.P @ xb[i] + f.Q @ (sigma - xb[i]) + f.r + f.S @ pi
    return out.reshape(-1)


def monotonicity_constants(game: ParametrizedGame):
    """``(mu, L)``: smallest eigenvalue of sym(M) and spectral norm of M."""
    M = game.linear_operator()
    mu = float(np.min(np.linalg.eigvalsh(0.5 * (M + M.T))))
    L = float(np.linalg.norm(M, 2))
    return mu, L


def validate_strong_monotonicity(game: ParametrizedGame) -> float:
    """Strong-monotonicity modulus of the pseudo-gradient; raises if not positive."""
    mu, _ = monotonicity_constants(game)
    if not mu > 0:
        raise NotStronglyMonotone(mu)
    return mu


def follower_cost(spec: FollowerSpec, x_i, sigma_minus, pi) -> float:
    x_i = _vec(x_i, spec.m_F, "x_i")
    sigma_minus = _vec(sigma_minus, spec.m_F, "sigma_minus")
    pi = _vec(pi, spec.m_L, "pi")
    return float(0.5 * x_i @ spec.P @ x_i + x_i @ spec.Q @ sigma_minus + spec.r @ x_i + x_i @ spec.S @ pi)


def leader_cost(leader: LeaderSpec, x, pi) -> float:
    x = _vec(x)
    m = leader.m_sigma
    if x.size % m:
        raise DimensionMismatch(f"stacked x of length {x.size} is not a multiple of m_F={m}")
    _vec(pi, leader.m_L, "pi")
    return leader.cost_sigma(x.reshape(-1, m).sum(axis=0))


def lagrangian_gradient(problem, z: KktPoint, pi, sigma_minus) -> np.ndarray:
    """``grad_x L_i`` for a follower (or a surrogate with the same cost)."""
    c = problem.constraints
    x, pi = z.x, _vec(pi)
    g = problem.P @ x + problem.Q @ sigma_minus + problem.r + problem.S @ pi
    if c.inq.n_rows:
        g = g + c.inq.jac_x(x, pi).T @ z.lam
    if c.eq.n_rows:
        g = g + c.eq.jac_x(x, pi).T @ z.nu
    return g


def kkt_operator(problem, z: KktPoint, pi, sigma_minus) -> np.ndarray:
    """Stacked KKT map ``[grad_x L; Dg(lam) g_inq; g_eq]``."""
    c = problem.constraints
    pi = _vec(pi, problem.m_L, "pi")
    sigma_minus = _vec(sigma_minus, problem.m_F, "sigma_minus")
    if z.x.size != problem.m_F or z.lam.size != c.inq.n_rows or z.nu.size != c.eq.n_rows:
        raise DimensionMismatch("KKT point does not match the constraint counts")
    return np.concatenate(
        [
            lagrangian_gradient(problem, z, pi, sigma_minus),
            z.lam * c.inq.value(z.x, pi),
            c.eq.value(z.x, pi),
        ]
    )


# ----------------------------------------------------------------------------
# reverse Stackelberg reference


def _own_price_block(game: ParametrizedGame, i: int) -> tuple:
    """Column slice of ``S_i`` acting on follower i's own price vector."""
    m, N, m_L = game.m_F, game.N, game.m_L
    if m_L == m:
        return slice(0, m)
    if m_L == N * m:
        return slice(i * m, (i + 1) * m)
    raise DimensionMismatch(f"RSG policy needs m_L in {{m_F, N*m_F}}, got {m_L}")


def rsg_policy(game: ParametrizedGame, i: int, x) -> np.ndarray:
    """Feedback price ``pi_i(x)`` that turns the leader cost into a potential."""
    f = game.followers[i]
    L = game.leader
    xb = game.blocks(x)
    S_own = f.S[:, _own_price_block(game, i)]
    rhs = 0.5 * (L.P_L - f.P) @ xb[i] + (L.P_L - f.Q) @ (xb.sum(axis=0) - xb[i]) + (L.q_L - f.r)
    try:
        cond = np.linalg.cond(S_own)
        if not np.isfinite(cond) or cond > 1e12:
            raise np.linalg.LinAlgError
        return np.linalg.solve(S_own, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularS(f"S_{i} is singular") from exc


def rsg_prices(game: ParametrizedGame, x) -> np.ndarray:
    """Static SG price vector built by freezing every ``pi_i(x)``."""
    N, m = game.N, game.m_F
    if game.m_L == N * m:
        return np.concatenate([rsg_policy(game, i, x) for i in range(N)])
    prices = [rsg_policy(game, i, x) for i in range(N)]
    if any(np.max(np.abs(p - prices[0])) > 1e-12 for p in prices[1:]):
        raise DimensionMismatch("followers disagree on a shared price; use m_L = N*m_F")
    return prices[0]


def prop1_residual(game: ParametrizedGame, x_R) -> np.ndarray:
    """Per-follower ``||1/2 P_L x_i - 1/2 P_i x_i||_inf`` at an RSG equilibrium."""
    xb = game.blocks(x_R)
    P_L = game.leader.P_L
    return np.array(
        [float(np.max(np.abs(0.5 * P_L @ xb[i] - 0.5 * f.P @ xb[i]), initial=0.0)) for i, f in enumerate(game.followers)]
    )


# ----------------------------------------------------------------------------
# validators


def _is_pd(M, tol=0.0) -> bool:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return True
    if np.max(np.abs(M - M.T)) > 1e-9 * max(1.0, np.max(np.abs(M))):
        return False
    return bool(np.min(np.linalg.eigvalsh(M)) > tol)


def slater_margin(spec: FollowerSpec, pi) -> float:
    """Largest uniform slack ``t`` (capped at 1) achievable inside ``X_i(pi)``.

    Positive means a strictly feasible point exists.
    """
    X = spec.feasible_set(pi)
    n = X.dim
    if X.n_inq == 0:
        return 1.0
    # variables (x, t): maximize t s.t. Gx + t <= h, Ax = b, t <= 1
    G = np.hstack([X.G_inq, np.ones((X.n_inq, 1))])
    G = np.vstack([G, np.eye(n + 1)[-1:]])
    h = np.concatenate([X.h_inq, [1.0]])
    A = np.hstack([X.A_eq, np.zeros((X.n_eq, 1))])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    try:
        sol = solve_lp(c, Polytope(A, X.b_eq, G, h))
    except Infeasible:
        return -np.inf
    except Unbounded:
        return 1.0
    return float(sol.x[-1])


def _rank(M) -> int:
    return int(np.linalg.matrix_rank(M)) if M.size else 0


def validate_game(game: ParametrizedGame, pi_sample=None) -> dict:
    """Run every standing-assumption check; raise ``ValidationError`` on failure.

    Returns a report with ``mu``, Slater margins and ``warmstart_eligible``.
    """
    L = game.leader
    if not _is_pd(L.P_L):
        raise ValidationError("P_L must be symmetric positive definite", assumption="leader-convexity", field="leader.P_L")
    for k, f in enumerate(game.followers):
        if not _is_pd(f.P):
            raise ValidationError(
                f"P of follower {k} must be symmetric positive definite (convex follower cost)",
                assumption="follower-convexity",
                field=f"followers[{k}].P",
            )
        if f.A.shape[0] and _rank(f.A) < f.A.shape[0]:
            raise ValidationError(
                f"equality matrix A of follower {k} is rank deficient",
                assumption="equality-full-row-rank",
                field=f"followers[{k}].A",
            )
    try:
        mu = validate_strong_monotonicity(game)
    except NotStronglyMonotone as exc:
        raise ValidationError(str(exc), assumption="strong-monotonicity", field="followers") from exc

    P = L.polytope
    if slater_margin_polytope(P) < 0:
        raise ValidationError("leader polytope is empty", assumption="leader-polytope", field="leader")
    if pi_sample is None:
        pi_sample = chebyshev_point(P)
    margins = []
    for k, f in enumerate(game.followers):
        t = slater_margin(f, pi_sample)
        if not t > 0:
            raise ValidationError(
                f"X_{k}(pi) has no strictly feasible point at the sample price (Slater)",
                assumption="slater",
                field=f"followers[{k}]",
            )
        margins.append(t)
    return {
        "mu": mu,
        "slater_margins": margins,
        "warmstart_eligible": warmstart_eligible(game),
    }


def warmstart_eligible(game: ParametrizedGame) -> bool:
    """Every constraint linear in (x_i, pi) and every A_i full row rank."""
    for f in game.followers:
        if f.has_finite_budget:
            return False
        if f.A.shape[0] and _rank(f.A) < f.A.shape[0]:
            return False
    return True


def chebyshev_point(P: Polytope) -> np.ndarray:
    """A point of maximal uniform slack inside ``P`` (uniform, not norm-scaled)."""
    n = P.dim
    if P.n_inq == 0:
        if P.n_eq == 0:
            return np.zeros(n)
        return np.linalg.lstsq(P.A_eq, P.b_eq, rcond=None)[0]
    G = np.hstack([P.G_inq, np.linalg.norm(P.G_inq, axis=1, keepdims=True)])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    G = np.vstack([G, np.eye(n + 1)[-1:]])
    h = np.concatenate([P.h_inq, [1e6]])
    sol = solve_lp(c, Polytope(np.hstack([P.A_eq, np.zeros((P.n_eq, 1))]), P.b_eq, G, h))
    return sol.x[:n]


def slater_margin_polytope(P: Polytope) -> float:
    try:
        x = chebyshev_point(P)
    except Infeasible:
        return -np.inf
    return float(np.min(P.h_inq - P.G_inq @ x, initial=1.0))
