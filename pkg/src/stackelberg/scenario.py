"""Scenario files (JSON), validation on load, and a seeded synthetic generator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, ParseError, SolverError, ValidationError
from .game import Budget, FollowerSpec, LeaderSpec, ParametrizedGame, monotonicity_constants, validate_game
from .leader import ArmijoConfig, StackelbergConfig
from .lower import VneConfig
from .numerics import Polytope
from .warmstart import WarmstartConfig

SCHEMA_VERSION = 1


@dataclass
class SolverSettings:
    gamma: Optional[float] = None
    k_vne: int = 5000
    tol_vne: float = 1e-10
    T: int = 350
    armijo: ArmijoConfig = field(default_factory=ArmijoConfig)
    warmstart: WarmstartConfig = field(default_factory=WarmstartConfig)

    def vne_config(self) -> VneConfig:
        return VneConfig(gamma=self.gamma, k_max=self.k_vne, tol=self.tol_vne)

    def stackelberg_config(self) -> StackelbergConfig:
        return StackelbergConfig(armijo=ArmijoConfig(**vars(self.armijo)), vne=self.vne_config(), T=self.T)


@dataclass
class ScenarioFile:
    game: ParametrizedGame
    solver: SolverSettings = field(default_factory=SolverSettings)
    initial_pi: Optional[np.ndarray] = None
    name: str = ""
    report: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return scenario_to_dict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def write(self, path):
        Path(path).write_text(self.dumps())


# ----------------------------------------------------------------------------
# serialization


def _enc(a):
    a = np.asarray(a, dtype=float)
    return a.tolist()


def _enc_num(v):
    return "inf" if np.isinf(v) else float(v)


def scenario_to_dict(sc: ScenarioFile) -> dict:
    g = sc.game
    L = g.leader
    P = L.polytope
    lo, hi, extra = _split_box(P)
    leader = {}
    if L.target_mode:
        leader["target_mode"] = {"n": _enc(L.n), "Z": _enc(L.Z)}
    else:
        leader["P_L"] = _enc(L.P_L)
        leader["q_L"] = _enc(L.q_L)
    leader["p_min"] = _enc(lo)
    leader["p_max"] = _enc(hi)
    if extra is not None:
        leader["extra_rows"] = {k: _enc(v) for k, v in zip(("A", "b", "G", "h"), extra)}
    if L.pi_base is not None:
        leader["pi_base"] = _enc(L.pi_base)
    followers = []
    for f in g.followers:
        d = {k: _enc(getattr(f, k)) for k in ("P", "Q", "r", "S", "A", "b", "G", "h")}
        if np.any(f.A_pi):
            d["A_pi"] = _enc(f.A_pi)
        if np.any(f.G_pi):
            d["G_pi"] = _enc(f.G_pi)
        if f.budget is not None:
            d["B"] = _enc_num(f.budget.B)
            if L.pi_base is None or not np.array_equal(f.budget.pi_base, L.pi_base):
                d["pi_base"] = _enc(f.budget.pi_base)
        followers.append(d)
    s = sc.solver
    out = {
        "schema_version": SCHEMA_VERSION,
        "name": sc.name,
        "leader": leader,
        "followers": followers,
        "solver": {
            "gamma": s.gamma,
            "k_vne": s.k_vne,
            "tol_vne": s.tol_vne,
            "T": s.T,
            "armijo": {"beta": s.armijo.armijo_beta, "delta": s.armijo.delta, "s_bar": s.armijo.s_bar, "l_max": s.armijo.l_max},
            "warmstart": {"rho": s.warmstart.rho, "epsilon": s.warmstart.epsilon, "k_w": s.warmstart.k_w},
        },
    }
    if sc.initial_pi is not None:
        out["initial_pi"] = _enc(sc.initial_pi)
    return out


def _split_box(P: Polytope):
    """Recover ``p_min``/``p_max`` from the leading ``[I; -I]`` rows; the rest is extra."""
    n = P.dim
    I = np.eye(n)
    if P.n_inq >= 2 * n and np.array_equal(P.G_inq[:n], I) and np.array_equal(P.G_inq[n : 2 * n], -I):
        hi, lo = P.h_inq[:n], -P.h_inq[n : 2 * n]
        rest = P.G_inq[2 * n :], P.h_inq[2 * n :]
        if P.n_eq == 0 and rest[0].shape[0] == 0:
            return lo, hi, None
        return lo, hi, (P.A_eq, P.b_eq, rest[0], rest[1])
    raise ValidationError("leader polytope must start with box rows", field="leader")


def _field(d, key, path, required=True, default=None):
    if key not in d:
        if required:
            raise ParseError(f"missing field '{path}{key}'", field=f"{path}{key}")
        return default
    return d[key]


def _arr(v, path, ndim=None):
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field '{path}' is not numeric", field=path) from exc
    if ndim == 2 and a.size == 0:
        a = a.reshape(0, 0)
    if ndim is not None and a.ndim != ndim:
        raise ParseError(f"field '{path}' must be {ndim}-dimensional", field=path)
    if not np.all(np.isfinite(a)):
        raise ParseError(f"field '{path}' has non-finite entries", field=path)
    return a


def _num(v, path):
    if v == "inf":
        return float("inf")
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise ParseError(f"field '{path}' must be a number or \"inf\"", field=path)


def _vec_or_scalar(v, n, path):
    a = _arr(v, path)
    if a.ndim == 0:
        return np.full(n, float(a))
    if a.shape != (n,):
        raise ParseError(f"field '{path}' must have length {n}", field=path)
    return a


def scenario_from_dict(d: dict, validate=True) -> ScenarioFile:
    if not isinstance(d, dict):
        raise ParseError("scenario root must be an object")
    ver = _field(d, "schema_version", "")
    if ver != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {ver!r}", field="schema_version")
    ld = _field(d, "leader", "")
    fl = _field(d, "followers", "")
    if not isinstance(fl, list) or not fl:
        raise ParseError("'followers' must be a non-empty array", field="followers")
    try:
        followers = []
        for k, fd in enumerate(fl):
            p = f"followers[{k}]."
            P = _arr(_field(fd, "P", p), p + "P", 2)
            m = P.shape[0]
            S = _arr(_field(fd, "S", p), p + "S", 2)
            m_L = S.shape[1]
            A = _arr(_field(fd, "A", p, False, []), p + "A").reshape(-1, m)
            G = _arr(_field(fd, "G", p, False, []), p + "G").reshape(-1, m)
            budget = None
            if "B" in fd:
                pb = fd.get("pi_base", ld.get("pi_base"))
                if pb is None:
                    raise ParseError("budget given without pi_base", field=p + "pi_base")
                budget = Budget(_num(fd["B"], p + "B"), _arr(pb, p + "pi_base", 1))
            A_pi = fd.get("A_pi")
            G_pi = fd.get("G_pi")
            followers.append(
                FollowerSpec(
                    P=P,
                    Q=_arr(_field(fd, "Q", p), p + "Q", 2),
                    r=_arr(_field(fd, "r", p), p + "r", 1),
                    S=S,
                    A=A,
                    b=_arr(_field(fd, "b", p, False, []), p + "b").reshape(-1),
                    G=G,
                    h=_arr(_field(fd, "h", p, False, []), p + "h").reshape(-1),
                    A_pi=None if A_pi is None else _arr(A_pi, p + "A_pi").reshape(-1, m_L),
                    G_pi=None if G_pi is None else _arr(G_pi, p + "G_pi").reshape(-1, m_L),
                    budget=budget,
                )
            )
        m_L = followers[0].m_L
        lo = _vec_or_scalar(_field(ld, "p_min", "leader."), m_L, "leader.p_min")
        hi = _vec_or_scalar(_field(ld, "p_max", "leader."), m_L, "leader.p_max")
        if np.any(lo > hi):
            raise ValidationError("p_min exceeds p_max", assumption="leader-polytope", field="leader.p_min")
        box = Polytope.box(lo, hi)
        if "extra_rows" in ld:
            e = ld["extra_rows"]
            extra = Polytope(
                _arr(e.get("A", []), "leader.extra_rows.A").reshape(-1, m_L),
                _arr(e.get("b", []), "leader.extra_rows.b").reshape(-1),
                _arr(e.get("G", []), "leader.extra_rows.G").reshape(-1, m_L),
                _arr(e.get("h", []), "leader.extra_rows.h").reshape(-1),
            )
            box = box.intersect(extra)
        pi_base = ld.get("pi_base")
        pi_base = None if pi_base is None else _arr(pi_base, "leader.pi_base", 1)
        if "target_mode" in ld:
            tm = ld["target_mode"]
            leader = LeaderSpec.with_target(
                _arr(_field(tm, "n", "leader.target_mode."), "leader.target_mode.n", 1),
                _arr(_field(tm, "Z", "leader.target_mode."), "leader.target_mode.Z", 1),
                box,
                pi_base=pi_base,
            )
        else:
            leader = LeaderSpec(
                _arr(_field(ld, "P_L", "leader."), "leader.P_L", 2),
                _arr(_field(ld, "q_L", "leader."), "leader.q_L", 1),
                box,
                pi_base=pi_base,
            )
        game = ParametrizedGame(leader, tuple(followers))
    except DimensionMismatch as exc:
        raise ValidationError(str(exc), assumption="dimensions", field="followers") from exc

    sd = d.get("solver", {}) or {}
    ad = sd.get("armijo", {}) or {}
    wd = sd.get("warmstart", {}) or {}
    try:
        solver = SolverSettings(
            gamma=sd.get("gamma"),
            k_vne=int(sd.get("k_vne", 5000)),
            tol_vne=float(sd.get("tol_vne", 1e-10)),
            T=int(sd.get("T", 350)),
            armijo=ArmijoConfig(
                armijo_beta=float(ad.get("beta", 0.5)),
                delta=float(ad.get("delta", 0.1)),
                s_bar=float(ad.get("s_bar", 1.0)),
                l_max=int(ad.get("l_max", 40)),
            ),
            warmstart=WarmstartConfig(
                rho=float(wd.get("rho", 1.0)),
                epsilon=None if wd.get("epsilon") is None else float(wd["epsilon"]),
                k_w=int(wd.get("k_w", 500)),
            ),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"invalid solver block: {exc}", field="solver") from exc
    init = d.get("initial_pi")
    if init is not None:
        init = _vec_or_scalar(init, game.m_L, "initial_pi")
    sc = ScenarioFile(game, solver, init, str(d.get("name", "")))
    if validate:
        sc.report = validate_game(game, init)
    return sc


def load_scenario(path, validate=True) -> ScenarioFile:
    """Parse and validate a scenario file.

    Raises ``ParseError`` (with line number for JSON syntax errors) or
    ``ValidationError`` naming the failed assumption.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    return scenario_from_dict(d, validate)


def shipped_scenario_path(name="shenzhen-shape") -> Path:
    return Path(str(resources.files("stackelberg") / "scenarios" / f"{name}.json"))


# ----------------------------------------------------------------------------
# generator


@dataclass
class GeneratorConfig:
    seed: int = 0
    N: int = 3
    m_F: int = 4
    m_L: int = 3
    constraint_density: float = 0.5  # extra random inequality rows per dimension
    mu_target: float = 1.0
    make_interior_feasible: bool = True
    n_active: int = 0  # strongly active rows planted per follower
    n_eq: int = 1
    pi_coupling: float = 0.1
    p_max: float = 5.0
    slack: tuple = (0.5, 1.5)

    def __post_init__(self):
        if not self.mu_target > 0:
            raise ValueError("mu_target must be positive")
        if self.n_active + self.n_eq > self.m_F:
            raise ValueError("n_active + n_eq cannot exceed m_F")


def generate_scenario(cfg: GeneratorConfig) -> ScenarioFile:
    """Random quadratic aggregative game around a planted equilibrium.

    A point ``(x0, pi0)`` is drawn first; right-hand sides are set so that it
    is feasible with slack, and each ``r_i`` is chosen so that ``x0`` is the
    equilibrium at ``pi0``. With ``n_active > 0`` that many box rows per
    follower are made tight with positive multipliers. With
    ``make_interior_feasible=False`` the unconstrained equilibrium is pushed
    far outside every feasible set, so no price admits an interior equilibrium.
    """
    rng = np.random.default_rng(cfg.seed)
    N, m, m_L = cfg.N, cfg.m_F, cfg.m_L
    pi0 = rng.uniform(0.2, 0.8, m_L) * cfg.p_max
    x0 = rng.uniform(0.5, 2.0, (N, m))
    Ps, Qs, Ss = [], [], []
    for _ in range(N):
        B = rng.normal(size=(m, m))
        Ps.append(B @ B.T / m + 0.5 * np.eye(m))
        Qs.append(0.3 * rng.normal(size=(m, m)))
        S = rng.normal(size=(m, m_L))
        S[: min(m, m_L), : min(m, m_L)] += 2.0 * np.eye(min(m, m_L))
        Ss.append(S)
    # shift every P_i by the same multiple of I: mu moves by exactly that amount
    tmp = ParametrizedGame(
        LeaderSpec(np.eye(m), np.zeros(m), Polytope.box(np.zeros(m_L), np.full(m_L, cfg.p_max))),
        tuple(FollowerSpec(P=Ps[i], Q=Qs[i], r=np.zeros(m), S=Ss[i], A=np.zeros((0, m)), b=[], G=np.zeros((0, m)), h=[]) for i in range(N)),
    )
    mu, _ = monotonicity_constants(tmp)
    shift = cfg.mu_target - mu + 1e-9
    Ps = [P + shift * np.eye(m) for P in Ps] if shift > 0 else Ps
    sigma0 = x0.sum(axis=0)
    if not cfg.make_interior_feasible:
        # unconstrained equilibrium at pi0 sits beyond every upper bound by more
        # than any price in the box can move it
        M = np.block([[Ps[i] if i == j else Qs[i] for j in range(N)] for i in range(N)])
        Sst = np.vstack(Ss)
        reach = np.linalg.norm(np.linalg.solve(M, Sst), 2) * cfg.p_max * np.sqrt(m_L)
        far = x0 + cfg.slack[1] + reach + 1.0
    followers = []
    for i in range(N):
        n_eq = cfg.n_eq if cfg.make_interior_feasible else 0
        A = rng.normal(size=(n_eq, m))
        A_pi = cfg.pi_coupling * rng.normal(size=(n_eq, m_L))
        n_extra = int(round(cfg.constraint_density * m))
        G = np.vstack([np.eye(m), -np.eye(m), rng.normal(size=(n_extra, m))])
        G_pi = np.vstack([np.zeros((2 * m, m_L)), cfg.pi_coupling * rng.normal(size=(n_extra, m_L))])
        slack = rng.uniform(*cfg.slack, G.shape[0])
        lam = np.zeros(G.shape[0])
        if cfg.n_active:
            coords = rng.choice(m, size=cfg.n_active, replace=False)
            rows = np.sort(np.where(rng.random(cfg.n_active) < 0.5, coords, coords + m))
            slack[rows] = 0.0
            lam[rows] = rng.uniform(0.5, 2.0, cfg.n_active)
        b = A @ x0[i] + A_pi @ pi0
        h = G @ x0[i] + G_pi @ pi0 + slack
        nu = rng.normal(size=n_eq)
        if cfg.make_interior_feasible:
            r = -(Ps[i] @ x0[i] + Qs[i] @ (sigma0 - x0[i]) + Ss[i] @ pi0 + A.T @ nu + G.T @ lam)
        else:
            r = -(Ps[i] @ far[i] + Qs[i] @ (far.sum(axis=0) - far[i]) + Ss[i] @ pi0)
        followers.append(FollowerSpec(P=Ps[i], Q=Qs[i], r=r, S=Ss[i], A=A, b=b, G=G, h=h, A_pi=A_pi, G_pi=G_pi))
    R = rng.normal(size=(m, m))
    P_L = R @ R.T / m + np.eye(m)
    q_L = -P_L @ (sigma0 + rng.normal(scale=0.5, size=m))
    leader = LeaderSpec(P_L, q_L, Polytope.box(np.zeros(m_L), np.full(m_L, cfg.p_max)))
    game = ParametrizedGame(leader, tuple(followers))
    solver = SolverSettings(T=200, k_vne=5000)
    sc = ScenarioFile(game, solver, np.round(pi0, 12), f"generated-seed{cfg.seed}")
    # normalize through the file format so generate -> write -> load is exact
    sc = scenario_from_dict(json.loads(sc.dumps()), validate=True)
    sc.report["planted_pi"] = [float(v) for v in pi0]
    sc.report["planted_x"] = x0.reshape(-1).tolist()
    return sc


# ----------------------------------------------------------------------------
# fleet-charging scenario: three fleets, four charging areas


FLEET_SIZES = (194.0, 181.0, 157.0)
REQUEST_TOTALS = (198.0, 103.0, 144.0, 87.0)
BUDGETS = (14000.0, 13000.0, 12000.0)
PI_BASE = (5.0, 3.0, 5.0, 3.0)
PI_INIT = (4.0, 2.0, 3.0, 1.0)


def fleet_charging_scenario(budgets=BUDGETS, seed=7) -> ScenarioFile:
    """Three fleets routing vehicles to four charging areas.

    Fleet sizes, request totals, budgets, base prices, price bounds and
    iteration counts are fixed constants. Cost and constraint parameters are
    synthetic: fleet i sends all ``n_i`` vehicles
    (``1'x_i = n_i``), at most ``0.7 n_i`` to one area, pays ``x_i' S_i pi``
    and faces congestion ``1/2 x'P_i x + x' Q_i sigma_{-i}``. The linear terms
    are chosen so that the request totals are met exactly at a planted price.
    """
    rng = np.random.default_rng(seed)
    n = np.array(FLEET_SIZES)
    target = np.array(REQUEST_TOTALS)
    Z = target / target.sum()
    pi_base = np.array(PI_BASE)
    pi_star = np.array([2.3, 1.2, 1.9, 0.8])
    N, m = 3, 4
    x_star = np.outer(n / n.sum(), target)
    # energy per vehicle in each area; scaled so every budget stays feasible at pi = 0
    d = np.array([1.0, 0.9, 1.1, 0.95])
    cheapest = np.sort(d * pi_base)
    followers = []
    sigma = x_star.sum(axis=0)
    for i in range(N):
        min_use = n[i] * (0.7 * cheapest[0] + 0.3 * cheapest[1])
        B = budgets[i]
        scale = 0.99 * (BUDGETS[i] / min_use)
        S = scale * np.diag(d * rng.uniform(0.95, 1.05, m))
        P = np.diag(rng.uniform(1.0, 2.0, m))
        Q = 0.2 * np.eye(m)
        nu = -rng.uniform(50.0, 80.0)
        r = -(P @ x_star[i] + Q @ (sigma - x_star[i]) + S @ pi_star + nu * np.ones(m))
        G = np.vstack([-np.eye(m), np.eye(m)])
        h = np.concatenate([np.zeros(m), np.full(m, 0.7 * n[i])])
        followers.append(
            FollowerSpec(
                P=P, Q=Q, r=np.round(r, 6), S=np.round(S, 6), A=np.ones((1, m)), b=[n[i]], G=G, h=h,
                budget=Budget(B, pi_base),
            )
        )
    leader = LeaderSpec.with_target(n, Z, Polytope.box(np.zeros(m), np.full(m, 5.0)), pi_base=pi_base)
    game = ParametrizedGame(leader, tuple(followers))
    solver = SolverSettings(T=350, k_vne=5000, armijo=ArmijoConfig(s_bar=1e-3))
    sc = ScenarioFile(game, solver, np.array(PI_INIT), "shenzhen-shape")
    return scenario_from_dict(json.loads(sc.dumps()), validate=True)
