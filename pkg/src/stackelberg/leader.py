"""Leader level: projected gradient descent with Armijo steps along the projection arc."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import BacktrackExhausted, DimensionMismatch, IftViolation
from .game import ParametrizedGame, chebyshev_point, leader_cost
from .lower import VneConfig, best_response, solve_vne
from .numerics import Polytope, PolytopeProjector
from .parallel import ordered_map
from .sensitivity import TOL_ACT, game_jacobians

log = logging.getLogger(__name__)


@dataclass
class ArmijoConfig:
    armijo_beta: float = 0.5
    delta: float = 0.1
    s_bar: float = 1.0
    l_max: int = 40

    def __post_init__(self):
        if not 0 < self.armijo_beta < 1:
            raise ValueError("armijo_beta must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.s_bar > 0:
            raise ValueError("s_bar must be positive")
        if self.l_max < 0:
            raise ValueError("l_max must be nonnegative")


@dataclass
class StackelbergConfig:
    armijo: ArmijoConfig = field(default_factory=ArmijoConfig)
    vne: VneConfig = field(default_factory=VneConfig)
    T: int = 350
    tol_pi: float = 1e-10
    tol_stationary: float = 1e-6  # projected step at s_bar that labels an early exit converged
    tol_act: float = TOL_ACT


@dataclass
class ArmijoStep:
    pi_next: np.ndarray
    s_t: float
    l_t: int
    J_next: float


@dataclass
class IterationRecord:
    t: int
    pi: np.ndarray
    x_star: np.ndarray
    J_L: float
    grad: np.ndarray
    s_t: float
    l_t: int
    s_bar: float
    active_sets: list
    budget_used: np.ndarray
    sigma: np.ndarray
    event: str = ""


@dataclass
class IterationTrace:
    records: List[IterationRecord] = field(default_factory=list)
    final_pi: Optional[np.ndarray] = None
    final_J: float = float("nan")
    final_x: Optional[np.ndarray] = None
    stalled: bool = False
    stall_reason: str = ""
    converged: bool = False
    events: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def J_L(self) -> np.ndarray:
        return np.array([r.J_L for r in self.records])

    @property
    def pis(self) -> np.ndarray:
        return np.array([r.pi for r in self.records])

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_pi": [float(v) for v in self.final_pi] if self.final_pi is not None else None,
            "final_J_L": float(self.final_J),
            "initial_J_L": float(self.records[0].J_L) if self.records else float("nan"),
            "converged": self.converged,
            "stalled": self.stalled,
            "stall_reason": self.stall_reason,
            "events": list(self.events),
        }


def total_gradient(game: ParametrizedGame, x_star, pi, jacobians) -> np.ndarray:
    """``dJ_L/dpi = dJ_L/dpi (explicit, zero here) + sum_i J_i' dJ_L/dx_i``."""
    jacobians = list(jacobians)
    if len(jacobians) != game.N:
        raise DimensionMismatch(f"expected {game.N} jacobians, got {len(jacobians)}")
    g_sigma = game.leader.grad_sigma(game.sigma(x_star))
    grad = np.zeros(game.m_L)
    for J in jacobians:
        J = np.asarray(J, dtype=float)
        if J.shape != (game.m_F, game.m_L):
            raise DimensionMismatch(f"jacobian has shape {J.shape}, expected {(game.m_F, game.m_L)}")
        grad += J.T @ g_sigma
    return grad


def armijo_step(pi_t, grad, leader_polytope: Polytope, eval_JL: Callable, cfg: ArmijoConfig = None, J_t=None, projector=None) -> ArmijoStep:
    """First ``s = beta^l s_bar`` with ``J(pi_t) - J(pi+) >= delta grad'(pi_t - pi+)``."""
    cfg = cfg or ArmijoConfig()
    pi_t = np.asarray(pi_t, dtype=float)
    grad = np.asarray(grad, dtype=float)
    proj = projector or PolytopeProjector(leader_polytope)
    if J_t is None:
        J_t = eval_JL(pi_t)
    scale = max(1.0, float(np.max(np.abs(pi_t), initial=0.0)))
    for l in range(cfg.l_max + 1):
        s = cfg.s_bar * cfg.armijo_beta**l
        pi_plus = proj(pi_t - s * grad)
        step = pi_t - pi_plus
        if np.max(np.abs(step), initial=0.0) <= 1e-15 * scale:
            # stationary along the projection arc
            return ArmijoStep(pi_t.copy(), s, l, J_t)
        J_plus = eval_JL(pi_plus)
        if J_t - J_plus >= cfg.delta * float(grad @ step):
            return ArmijoStep(pi_plus, s, l, J_plus)
    raise BacktrackExhausted(cfg.l_max)


class _Evaluator:
    """Memoized ``pi -> (J_L, v-NE)`` with warm starts from the latest solve."""

    def __init__(self, game, vne_cfg):
        self.game, self.cfg = game, vne_cfg
        self.cache = {}
        self.x_warm = None
        self.solves = 0

    def vne(self, pi):
        key = np.asarray(pi, dtype=float).tobytes()
        hit = self.cache.get(key)
        if hit is None:
            res = solve_vne(self.game, pi, self.cfg, x0=self.x_warm, recover_duals=False)
            self.solves += 1
            hit = (leader_cost(self.game.leader, res.x_star, pi), res)
            self.cache[key] = hit
        return hit

    def J(self, pi):
        return self.vne(pi)[0]

    def anchor(self, pi):
        """Keep only the entry at ``pi`` and warm-start the next trials from it."""
        key = np.asarray(pi, dtype=float).tobytes()
        hit = self.vne(pi)
        self.cache = {key: hit}
        self.x_warm = hit[1].x_star
        return hit


def _budget_row(game, x, pi):
    xb = game.blocks(x)
    return np.array([f.budget_used(xb[i], pi) for i, f in enumerate(game.followers)])


def _sensitivities(game, pi, x, tol_act):
    kkt = ordered_map(lambda i: best_response(game, i, pi, x), range(game.N))
    return game_jacobians(game, pi, x, kkt, tol_act)


def solve_stackelberg(game: ParametrizedGame, pi_0, cfg: Optional[StackelbergConfig] = None, callback=None) -> IterationTrace:
    """Run the outer loop from ``pi_0`` for at most ``cfg.T`` iterations.

    Stall handling: a failed line search halves ``s_bar`` once and retries,
    and a failure of the implicit-function conditions nudges ``pi`` by 1e-8
    along the previous descent direction once. A repeat of either stops the
    run with ``trace.stalled`` set.
    """
    cfg = cfg or StackelbergConfig()
    polytope = game.leader.polytope
    pi = np.asarray(pi_0, dtype=float).copy()
    if pi.size != game.m_L:
        raise DimensionMismatch(f"pi_0 has length {pi.size}, expected {game.m_L}")
    if not polytope.contains(pi, 1e-9):
        raise ValueError("initial price is outside the leader polytope")
    proj = PolytopeProjector(polytope)
    ev = _Evaluator(game, cfg.vne)
    armijo = ArmijoConfig(**vars(cfg.armijo))
    trace = IterationTrace()
    halved = False
    prev_dir = None

    for t in range(cfg.T):
        J_t, res = ev.anchor(pi)
        x = res.x_star
        event = ""
        try:
            sens = _sensitivities(game, pi, x, cfg.tol_act)
        except IftViolation as exc:
            d = prev_dir if prev_dir is not None else chebyshev_point(polytope) - pi
            nd = np.linalg.norm(d)
            nudged = proj(pi + 1e-8 * d / nd) if nd > 0 else pi
            trace.events.append(f"t={t}: {exc.condition}; nudged pi by 1e-8")
            log.info("IFT condition %s at t=%d, nudging pi", exc.condition, t)
            try:
                J_t, res = ev.anchor(nudged)
                sens = _sensitivities(game, nudged, res.x_star, cfg.tol_act)
            except IftViolation as exc2:
                trace.stalled = True
                trace.stall_reason = f"IFT condition {exc2.condition} persists at t={t}"
                trace.events.append(trace.stall_reason)
                break
            pi, x = nudged, res.x_star
            event = f"nudged:{exc.condition}"
        grad = total_gradient(game, x, pi, [s.jacobian for s in sens])
        try:
            step = armijo_step(pi, grad, polytope, ev.J, armijo, J_t, proj)
        except BacktrackExhausted:
            if halved:
                trace.stalled = True
                trace.stall_reason = f"stalled at nonsmooth point (line search exhausted at t={t})"
                trace.events.append(trace.stall_reason)
                _record(trace, game, t, pi, x, J_t, grad, 0.0, armijo.l_max, armijo.s_bar, sens, "stalled")
                break
            halved = True
            armijo.s_bar *= 0.5
            trace.events.append(f"t={t}: line search exhausted, s_bar halved to {armijo.s_bar:g}")
            try:
                step = armijo_step(pi, grad, polytope, ev.J, armijo, J_t, proj)
            except BacktrackExhausted:
                trace.stalled = True
                trace.stall_reason = f"stalled at nonsmooth point (line search exhausted at t={t})"
                trace.events.append(trace.stall_reason)
                _record(trace, game, t, pi, x, J_t, grad, 0.0, armijo.l_max, armijo.s_bar, sens, "stalled")
                break
            event = (event + ";" if event else "") + "s_bar_halved"
        _record(trace, game, t, pi, x, J_t, grad, step.s_t, step.l_t, armijo.s_bar, sens, event)
        if callback is not None:
            callback(trace.records[-1])
        move = step.pi_next - pi
        if np.max(np.abs(move), initial=0.0) <= cfg.tol_pi:
            full = proj(pi - armijo.s_bar * grad) - pi
            if np.max(np.abs(full), initial=0.0) <= cfg.tol_stationary:
                trace.converged = True
            else:
                # the step vanished only because backtracking collapsed it
                trace.stalled = True
                trace.stall_reason = f"stalled at nonsmooth point (step collapsed to s={step.s_t:.3g} at t={t})"
                trace.events.append(trace.stall_reason)
            pi = step.pi_next
            break
        prev_dir = move
        pi = step.pi_next

    J_fin, res = ev.anchor(pi)
    trace.final_pi, trace.final_J, trace.final_x = pi, J_fin, res.x_star
    return trace


def _record(trace, game, t, pi, x, J, grad, s, l, s_bar, sens, event):
    trace.records.append(
        IterationRecord(
            t=t,
            pi=pi.copy(),
            x_star=x.copy(),
            J_L=float(J),
            grad=grad.copy(),
            s_t=float(s),
            l_t=int(l),
            s_bar=float(s_bar),
            active_sets=[s_.partition for s_ in sens],
            budget_used=_budget_row(game, x, pi),
            sigma=game.sigma(x),
            event=event,
        )
    )
