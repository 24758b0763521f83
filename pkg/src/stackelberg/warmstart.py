"""Decentralized warm start: a price whose equilibrium leaves every inequality slack.

Each follower holds a local copy ``psi_i = [x~, p~, nu_i, delta_i]`` of the
whole equilibrium, the price, its own equality duals and inequality slacks.
The local feasible set ``Omega_i`` encodes follower i's stationarity with zero
inequality multipliers, its constraints with slack ``delta_i``, ``delta_i >= eps``
and the leader polytope. Consensus ADMM then drives all ``[x~, p~]`` copies to
a common value while maximizing the total slack.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import Infeasible, NoInteriorEquilibrium, NotConsensed, StructureViolation
from .game import ParametrizedGame, chebyshev_point
from .lower import VneConfig, solve_vne
from .numerics import ParametricQp, Polytope, solve_lp
from .parallel import ordered_map

log = logging.getLogger(__name__)

CONSENSUS_TOL = 1e-6
EARLY_EXIT_TOL = 1e-8


@dataclass
class WarmstartConfig:
    rho: float = 1.0
    epsilon: Optional[float] = None  # None: 1e-3 of the smallest RHS scale
    k_w: int = 500

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.k_w < 1:
            raise ValueError("k_w must be at least 1")


@dataclass(frozen=True)
class SelectionMaps:
    """Index maps into ``psi_i``; ``consensus`` selects ``[x~, p~]``."""

    x_own: np.ndarray
    x_all: np.ndarray
    p: np.ndarray
    nu: np.ndarray
    delta: np.ndarray

    @property
    def consensus(self) -> np.ndarray:
        return np.concatenate([self.x_all, self.p])

    @property
    def size(self) -> int:
        return self.x_all.size + self.p.size + self.nu.size + self.delta.size

    def matrix(self, idx) -> np.ndarray:
        """0/1 row-selection matrix for an index map."""
        E = np.zeros((len(idx), self.size))
        E[np.arange(len(idx)), idx] = 1.0
        return E


def selection_maps(game: ParametrizedGame, i: int) -> SelectionMaps:
    N, m, m_L = game.N, game.m_F, game.m_L
    f = game.followers[i]
    nx = N * m
    return SelectionMaps(
        x_own=np.arange(i * m, (i + 1) * m),
        x_all=np.arange(nx),
        p=np.arange(nx, nx + m_L),
        nu=np.arange(nx + m_L, nx + m_L + f.n_eq),
        delta=np.arange(nx + m_L + f.n_eq, nx + m_L + f.n_eq + f.n_inq),
    )


@dataclass
class FeasibilityLp:
    """Local polytopes, selection maps and slack objectives of the LP."""

    omegas: List[Polytope]
    maps: List[SelectionMaps]
    costs: List[np.ndarray]
    epsilon: float
    m_beta: int


def stationarity_block(game: ParametrizedGame, i: int) -> np.ndarray:
    """``W_i`` acting on ``x~``: ``P_i`` on the own block and ``Q_i`` on every other."""
    f = game.followers[i]
    return np.hstack([f.P if j == i else f.Q for j in range(game.N)])


def check_structure(game: ParametrizedGame):
    for k, f in enumerate(game.followers):
        if f.has_finite_budget:
            raise StructureViolation(f"follower {k} has a bilinear budget row; warm start needs rows linear in (x_i, pi)")
        if f.n_eq and np.linalg.matrix_rank(f.A) < f.n_eq:
            raise StructureViolation(f"follower {k} has a rank-deficient equality matrix")


def default_epsilon(game: ParametrizedGame) -> float:
    scales = [np.max(np.abs(f.h)) for f in game.followers if f.G.shape[0]]
    scale = min(scales) if scales else 1.0
    return 1e-3 * (scale if scale > 0 else 1.0)


def build_feasibility_lp(game: ParametrizedGame, epsilon: float) -> FeasibilityLp:
    """Per-follower ``Omega_i`` (stationarity, constraints with slack, leader rows)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    check_structure(game)
    N, m, m_L = game.N, game.m_F, game.m_L
    leader = game.leader.polytope
    omegas, maps, costs = [], [], []
    for i, f in enumerate(game.followers):
        sm = selection_maps(game, i)
        n = sm.size
        E = sm.matrix
        Ex, Ep, Enu, Ed = E(sm.x_own), E(sm.p), E(sm.nu), E(sm.delta)
        # stationarity with zero inequality multipliers
        stat = stationarity_block(game, i) @ E(sm.x_all) + f.S @ Ep + f.A.T @ Enu
        A_rows = [stat, f.A @ Ex + f.A_pi @ Ep, leader.A_eq @ Ep]
        b_rows = [-f.r, f.b, leader.b_eq]
        G_rows = [f.G @ Ex + f.G_pi @ Ep + Ed, -Ed, leader.G_inq @ Ep]
        h_rows = [f.h, -epsilon * np.ones(f.n_inq), leader.h_inq]
        omegas.append(
            Polytope(
                np.vstack([r.reshape(-1, n) for r in A_rows]),
                np.concatenate(b_rows),
                np.vstack([r.reshape(-1, n) for r in G_rows]),
                np.concatenate(h_rows),
            )
        )
        cost = np.zeros(n)
        cost[sm.delta] = -1.0
        maps.append(sm)
        costs.append(cost)
    return FeasibilityLp(omegas, maps, costs, float(epsilon), N * m + m_L)


@dataclass
class ConsensusState:
    psi: List[np.ndarray]
    consensus_target: np.ndarray
    y: List[np.ndarray]
    rho: float
    residuals: list = field(default_factory=list)


def _local_qp(omega_i: Polytope, sm: SelectionMaps, rho: float) -> ParametricQp:
    n = sm.size
    H = np.zeros((n, n))
    c = sm.consensus
    H[c, c] = rho
    # nu and delta enter only linearly
    free = np.concatenate([sm.nu, sm.delta]).astype(int)
    H[free, free] = 1e-10
    return ParametricQp(H, omega_i)


def admm_psi_update(i: int, state: ConsensusState, omega_i: Polytope, sm: SelectionMaps, solver: ParametricQp = None) -> np.ndarray:
    """``argmin_{Omega_i} -1'delta + y_i' L_i psi + rho/2 ||L_i psi - beta||^2``."""
    if solver is None:
        solver = _local_qp(omega_i, sm, state.rho)
    f = np.zeros(sm.size)
    f[sm.delta] = -1.0
    f[sm.consensus] += state.y[i] - state.rho * state.consensus_target
    return solver.solve(f).x


def admm_consensus_update(state: ConsensusState, maps=None) -> np.ndarray:
    """``beta = (1/N) [ (1/rho) sum y_i + sum L_i psi_i ]``."""
    N = len(state.psi)
    proj = [p[m.consensus] for p, m in zip(state.psi, maps)] if maps is not None else list(state.psi)
    return (np.sum(state.y, axis=0) / state.rho + np.sum(proj, axis=0)) / N


def admm_dual_update(state: ConsensusState, maps=None) -> list:
    proj = [p[m.consensus] for p, m in zip(state.psi, maps)] if maps is not None else list(state.psi)
    return [y + state.rho * (v - state.consensus_target) for y, v in zip(state.y, proj)]


@dataclass
class WarmstartResult:
    pi_0: np.ndarray
    x_star_guess: np.ndarray
    residual_trace: np.ndarray  # max_i ||L_i psi_i - beta||_inf per iteration
    follower_trace: list  # (k, follower, residual_inf, objective_i)
    iterations: int
    epsilon: float
    min_slack: float = float("nan")
    interior_verified: bool = False
    x_vne: Optional[np.ndarray] = None
    copies: list = field(default_factory=list)  # final L_i psi_i per follower
    psi: list = field(default_factory=list)


def _initial_target(game: ParametrizedGame) -> np.ndarray:
    """Leader Chebyshev center and per-follower max-slack points at that price."""
    p = chebyshev_point(game.leader.polytope)
    xs = []
    for f in game.followers:
        X = f.feasible_set(p)
        n = X.dim
        G = np.vstack([np.hstack([X.G_inq, np.ones((X.n_inq, 1))]), np.eye(n + 1)[-1:]])
        h = np.concatenate([X.h_inq, [1.0]])
        c = np.zeros(n + 1)
        c[-1] = -1.0
        try:
            xs.append(solve_lp(c, Polytope(np.hstack([X.A_eq, np.zeros((X.n_eq, 1))]), X.b_eq, G, h)).x[:n])
        except Infeasible:
            xs.append(np.zeros(n))
    return np.concatenate(xs + [p])


def _plateaued(trace: np.ndarray) -> bool:
    """Residual stuck at a positive level (ADMM's signature of an infeasible LP)."""
    q = max(2, trace.size // 4)
    tail = trace[-q:]
    return bool(tail[-1] > CONSENSUS_TOL and tail[-1] > 0.9 * tail[0])


def run_warmstart(game: ParametrizedGame, rho: float = 1.0, epsilon: Optional[float] = None, k_w: int = 500, verify=True) -> WarmstartResult:
    """Consensus ADMM on the interior-equilibrium LP; returns ``pi_0`` and the equilibrium guess.

    ``NoInteriorEquilibrium`` is raised when some local set is empty, or when
    the consensus residual stalls at a positive level (the LP is infeasible).
    ``NotConsensed`` is raised when the residual is still decreasing but above
    tolerance after ``k_w`` iterations.
    """
    cfg = WarmstartConfig(rho, epsilon, k_w)
    eps = cfg.epsilon if cfg.epsilon is not None else default_epsilon(game)
    lp = build_feasibility_lp(game, eps)
    N = game.N
    solvers = [_local_qp(lp.omegas[i], lp.maps[i], rho) for i in range(N)]
    beta = _initial_target(game)
    state = ConsensusState(
        psi=[np.zeros(sm.size) for sm in lp.maps],
        consensus_target=beta,
        y=[np.zeros(lp.m_beta) for _ in range(N)],
        rho=rho,
    )
    trace, rows = [], []
    k = 0
    for k in range(1, k_w + 1):
        try:
            state.psi = ordered_map(lambda i: admm_psi_update(i, state, lp.omegas[i], lp.maps[i], solvers[i]), range(N))
        except Infeasible as exc:
            raise NoInteriorEquilibrium(f"local set of a follower is empty at epsilon={eps:g}") from exc
        state.consensus_target = admm_consensus_update(state, lp.maps)
        state.y = admm_dual_update(state, lp.maps)
        res = [float(np.max(np.abs(p[m.consensus] - state.consensus_target))) for p, m in zip(state.psi, lp.maps)]
        for i, (r, p, m) in enumerate(zip(res, state.psi, lp.maps)):
            rows.append((k, i, r, float(-np.sum(p[m.delta]))))
        trace.append(max(res))
        if trace[-1] < EARLY_EXIT_TOL:
            break
    trace = np.array(trace)
    if trace[-1] > CONSENSUS_TOL:
        if _plateaued(trace):
            raise NoInteriorEquilibrium(f"consensus residual stalled at {trace[-1]:.3e}: no interior equilibrium at epsilon={eps:g}")
        raise NotConsensed(float(trace[-1]), k)
    beta = state.consensus_target
    nx = N * game.m_F
    out = WarmstartResult(beta[nx:].copy(), beta[:nx].copy(), trace, rows, k, eps)
    out.copies = [p[m.consensus].copy() for p, m in zip(state.psi, lp.maps)]
    out.psi = [p.copy() for p in state.psi]
    if verify:
        out.min_slack, out.x_vne = interior_margin(game, out.pi_0)
        out.interior_verified = bool(out.min_slack >= eps / 2)
    return out


def interior_margin(game: ParametrizedGame, pi, vne_cfg: Optional[VneConfig] = None):
    """Smallest inequality slack of the v-NE at ``pi`` (and the v-NE itself)."""
    res = solve_vne(game, pi, vne_cfg, recover_duals=False)
    xb = game.blocks(res.x_star)
    slack = np.inf
    for i, f in enumerate(game.followers):
        X = f.feasible_set(pi)
        if X.n_inq:
            slack = min(slack, float(np.min(X.h_inq - X.G_inq @ xb[i])))
    return slack, res.x_star


def centralized_lp_oracle(game: ParametrizedGame, epsilon: float):
    """The whole interior-equilibrium LP over ``(psi_1..psi_N, beta)`` in one program."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    lp = build_feasibility_lp(game, epsilon)
    sizes = [sm.size for sm in lp.maps]
    n = sum(sizes) + lp.m_beta
    offs = np.concatenate([[0], np.cumsum(sizes)])
    A, b, G, h = [], [], [], []
    c = np.zeros(n)
    for i, (om, sm) in enumerate(zip(lp.omegas, lp.maps)):
        s = slice(offs[i], offs[i + 1])
        Ai = np.zeros((om.n_eq, n))
        Ai[:, s] = om.A_eq
        Gi = np.zeros((om.n_inq, n))
        Gi[:, s] = om.G_inq
        A.append(Ai)
        b.append(om.b_eq)
        G.append(Gi)
        h.append(om.h_inq)
        # consensus rows L_i psi_i - beta = 0
        C = np.zeros((lp.m_beta, n))
        C[np.arange(lp.m_beta), offs[i] + sm.consensus] = 1.0
        C[:, offs[-1] :] = -np.eye(lp.m_beta)
        A.append(C)
        b.append(np.zeros(lp.m_beta))
        c[offs[i] + sm.delta] = -1.0
    sol = solve_lp(c, Polytope(np.vstack(A), np.concatenate(b), np.vstack(G), np.concatenate(h)))
    sol.residuals["beta"] = sol.x[offs[-1] :]
    return sol
