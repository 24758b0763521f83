"""Lower level: variational Nash equilibrium of the followers for a fixed price."""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NotConverged
from .game import KktPoint, ParametrizedGame, monotonicity_constants
from .numerics import PolytopeProjector, solve_qp
from .parallel import ordered_map

_CONSTANTS = weakref.WeakKeyDictionary()


def _constants(game):
    c = _CONSTANTS.get(game)
    if c is None:
        c = _CONSTANTS[game] = monotonicity_constants(game)
    return c


@dataclass
class VneConfig:
    """Picard iteration settings.

    ``gamma=None`` uses ``mu / L**2``. ``k_max`` caps the iteration count and
    ``tol`` is the fixed-point residual at which it stops early. Every
    ``polish_every`` iterations the current active-set guess is used to solve
    the joint linear KKT system; an accepted polish is an exact v-NE.
    """

    gamma: Optional[float] = None
    k_max: int = 5000
    tol: float = 1e-10
    polish_every: int = 20

    def __post_init__(self):
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")


@dataclass
class VneResult:
    x_star: np.ndarray
    kkt_points: list
    iterations: int
    residual: float
    polished: bool = False
    gamma: float = float("nan")

    def block(self, i, m_F):
        return self.x_star[i * m_F : (i + 1) * m_F]


def step_size(game: ParametrizedGame) -> float:
    mu, L = _constants(game)
    return mu / L**2


class _LowerLevel:
    """Projected pseudo-gradient map ``T(x) = Pi_X(x - gamma F(x, pi))`` at one price."""

    def __init__(self, game: ParametrizedGame, pi, gamma):
        self.game = game
        self.pi = np.asarray(pi, dtype=float)
        self.gamma = gamma
        self.M = game.linear_operator()
        self.c = game.offset(self.pi)
        self.sets = [f.feasible_set(self.pi) for f in game.followers]
        self.proj = [PolytopeProjector(X) for X in self.sets]
        self.m = game.m_F

    def F(self, x):
        return self.M @ x + self.c

    def T(self, x):
        v = (x - self.gamma * self.F(x)).reshape(self.game.N, self.m)
        return np.concatenate(ordered_map(lambda i: self.proj[i](v[i]), range(self.game.N)))

    def polish(self, x, face_tol=1e-7):
        """Solve the joint KKT system on the guessed active set; None if it fails."""
        N, m = self.game.N, self.m
        xb = x.reshape(N, m)
        work = []
        for i, X in enumerate(self.sets):
            scale = 1.0 + np.abs(X.h_inq)
            near = set(np.where(X.h_inq - X.G_inq @ xb[i] <= face_tol * scale)[0])
            work.append(sorted(near | set(self.proj[i].active)))
        for _ in range(2 * sum(X.n_inq for X in self.sets) + 2):
            rows, rhs, owner, kinds = [], [], [], []
            for i, X in enumerate(self.sets):
                for k in range(X.n_eq):
                    rows.append((i, X.A_eq[k])); rhs.append(X.b_eq[k]); kinds.append((i, None))
                for j in work[i]:
                    rows.append((i, X.G_inq[j])); rhs.append(X.h_inq[j]); kinds.append((i, j))
            p = len(rows)
            C = np.zeros((p, N * m))
            for k, (i, row) in enumerate(rows):
                C[k, i * m : (i + 1) * m] = row
            K = np.block([[self.M, C.T], [C, np.zeros((p, p))]])
            rhs_full = np.concatenate([-self.c, np.asarray(rhs, dtype=float)])
            try:
                sol = np.linalg.solve(K, rhs_full)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(K, rhs_full, rcond=None)[0]
            if not np.allclose(K @ sol, rhs_full, atol=1e-9 * (1 + np.max(np.abs(rhs_full)))):
                return None
            y, w = sol[: N * m], sol[N * m :]
            yb = y.reshape(N, m)
            changed = False
            # drop the most negative multiplier, add the most violated row
            neg = [(w[k], k) for k, (i, j) in enumerate(kinds) if j is not None and w[k] < -1e-10]
            if neg:
                _, k = min(neg)
                i, j = kinds[k]
                work[i].remove(j)
                changed = True
            else:
                worst, arg = 0.0, None
                for i, X in enumerate(self.sets):
                    if X.n_inq:
                        viol = X.G_inq @ yb[i] - X.h_inq
                        viol /= 1.0 + np.abs(X.h_inq)
                        j = int(np.argmax(viol))
                        if viol[j] > max(worst, 1e-11):
                            worst, arg = viol[j], (i, j)
                if arg is not None:
                    work[arg[0]] = sorted(set(work[arg[0]]) | {arg[1]})
                    changed = True
            if not changed:
                return y
        return None


def solve_vne(game: ParametrizedGame, pi, cfg: Optional[VneConfig] = None, x0=None, recover_duals=True) -> VneResult:
    """Variational Nash equilibrium by Picard iteration of the projected pseudo-gradient.

    Raises ``Infeasible`` when some ``X_i(pi)`` is empty and ``NotConverged``
    when the residual is above ``cfg.tol`` after ``cfg.k_max`` iterations.
    """
    cfg = cfg or VneConfig()
    gamma = cfg.gamma if cfg.gamma is not None else step_size(game)
    op = _LowerLevel(game, pi, gamma)
    n = game.N * game.m_F
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    x = op.T(x)  # feasible start
    residual, polished, k = np.inf, False, 0
    while k < cfg.k_max:
        x_new = op.T(x)
        k += 1
        residual = float(np.max(np.abs(x_new - x)))
        x = x_new
        if residual <= cfg.tol:
            break
        if cfg.polish_every and k % cfg.polish_every == 0:
            y = op.polish(x)
            if y is not None:
                r_y = float(np.max(np.abs(op.T(y) - y)))
                if r_y <= cfg.tol:
                    x, residual, polished = y, r_y, True
                    break
    if residual > cfg.tol:
        raise NotConverged(residual, k, VneResult(x, [], k, residual, polished, gamma))
    kkt = []
    if recover_duals:
        kkt = ordered_map(lambda i: best_response(game, i, pi, x), range(game.N))
    return VneResult(x, kkt, k, residual, polished, gamma)


def best_response(game: ParametrizedGame, i: int, pi, x_minus) -> KktPoint:
    """Primal-dual solution of follower i's QP with the others fixed.

    ``x_minus`` is a full stacked vector; block i is ignored. The multiplier
    ordering follows ``spec.constraints``.
    """
    f = game.followers[i]
    pi = np.asarray(pi, dtype=float)
    sigma_minus = game.sigma_minus(x_minus, i)
    lin = f.Q @ sigma_minus + f.r + f.S @ pi
    sol = solve_qp(f.P, lin, f.feasible_set(pi))
    return KktPoint(sol.x, np.maximum(sol.lam, 0.0), sol.nu)


def unconstrained_ne(game: ParametrizedGame, pi) -> np.ndarray:
    """Nash equilibrium ignoring all constraints, ``x = -M^{-1} c(pi)``."""
    return np.linalg.solve(game.linear_operator(), -game.offset(pi))
