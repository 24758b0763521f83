"""Dense linear-algebra and convex-programming kernels.

Everything here is a pure function of its inputs (``PolytopeProjector`` keeps
a private working-set cache but its results do not depend on call history
beyond speed).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from .errors import (
    EvaluationFailure,
    Infeasible,
    MaxIterations,
    SingularM1,
    SingularSchur,
    Unbounded,
)

PIVOT_RTOL = 1e-12


def _as_matrix(M, cols=None) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1 and M.size == 0:
        return np.zeros((0, 0 if cols is None else cols))
    if M.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {M.shape}")
    return M


@dataclass(frozen=True)
class Polytope:
    """``{x | A_eq x = b_eq, G_inq x <= h_inq}``."""

    A_eq: np.ndarray
    b_eq: np.ndarray
    G_inq: np.ndarray
    h_inq: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
        G = np.atleast_2d(np.asarray(self.G_inq, dtype=float))
        b = np.asarray(self.b_eq, dtype=float).reshape(-1)
        h = np.asarray(self.h_inq, dtype=float).reshape(-1)
        n = max(A.shape[1], G.shape[1])
        if A.size == 0:
            A = np.zeros((0, n))
        if G.size == 0:
            G = np.zeros((0, n))
        if A.shape[1] != G.shape[1]:
            raise ValueError("A_eq and G_inq must have the same number of columns")
        if b.size != A.shape[0] or h.size != G.shape[0]:
            raise ValueError("right-hand sides do not match the row counts")
        for arr in (A, G, b, h):
            if not np.all(np.isfinite(arr)):
                raise ValueError("polytope data must be finite")
        object.__setattr__(self, "A_eq", A)
        object.__setattr__(self, "G_inq", G)
        object.__setattr__(self, "b_eq", b)
        object.__setattr__(self, "h_inq", h)

    @property
    def dim(self) -> int:
        return self.A_eq.shape[1]

    @property
    def n_eq(self) -> int:
        return self.A_eq.shape[0]

    @property
    def n_inq(self) -> int:
        return self.G_inq.shape[0]

    @classmethod
    def from_rows(cls, n, A=None, b=None, G=None, h=None) -> "Polytope":
        A = np.zeros((0, n)) if A is None else np.asarray(A, dtype=float).reshape(-1, n)
        G = np.zeros((0, n)) if G is None else np.asarray(G, dtype=float).reshape(-1, n)
        b = np.zeros(0) if b is None else b
        h = np.zeros(0) if h is None else h
        return cls(A, b, G, h)

    @classmethod
    def box(cls, lo, hi) -> "Polytope":
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        n = lo.size
        eye = np.eye(n)
        return cls(np.zeros((0, n)), np.zeros(0), np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    @classmethod
    def simplex(cls, n, total=1.0) -> "Polytope":
        return cls(np.ones((1, n)), np.array([float(total)]), -np.eye(n), np.zeros(n))

    def contains(self, x, tol=1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        ok_eq = self.n_eq == 0 or np.max(np.abs(self.A_eq @ x - self.b_eq)) <= tol
        ok_in = self.n_inq == 0 or np.max(self.G_inq @ x - self.h_inq) <= tol
        return bool(ok_eq and ok_in)

    def intersect(self, other: "Polytope") -> "Polytope":
        return Polytope(
            np.vstack([self.A_eq, other.A_eq]),
            np.concatenate([self.b_eq, other.b_eq]),
            np.vstack([self.G_inq, other.G_inq]),
            np.concatenate([self.h_inq, other.h_inq]),
        )


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iter"


@dataclass
class QpSolution:
    x: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    status: SolveStatus = SolveStatus.OPTIMAL
    objective: float = float("nan")
    iterations: int = 0
    residuals: dict = field(default_factory=dict)

    @property
    def lambda_(self):
        return self.lam


# ----------------------------------------------------------------------------
# block inversion


def _checked_lu(M, err_cls, what):
    M = np.asarray(M, dtype=float)
    if M.shape[0] == 0:
        return None
    scale = max(np.max(np.abs(M)), np.finfo(float).tiny)
    try:
        lu, piv = sla.lu_factor(M, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise err_cls(f"{what}: factorization failed ({exc})") from exc
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) < PIVOT_RTOL * scale:
        raise err_cls(f"{what}: pivot {np.min(pivots):.3e} below {PIVOT_RTOL:g}*|M|")
    return lu, piv


def block_inverse(M1, M2, M3, M4):
    """Inverse of ``[[M1, M2], [M3, M4]]`` through the Schur complement of M1.

    Returns the four blocks ``(Mb1, Mb2, Mb3, Mb4)`` of the inverse, after one
    refinement step ``X <- X + X (I - M X)``.
    Raises ``SingularM1`` or ``SingularSchur`` when a factorization pivot
    falls below ``1e-12 * ||.||_inf`` of the factored matrix.
    """
    M1 = np.atleast_2d(np.asarray(M1, dtype=float))
    p = M1.shape[0]
    M2 = np.asarray(M2, dtype=float).reshape(p, -1)
    q = M2.shape[1]
    M3 = np.asarray(M3, dtype=float).reshape(q, p)
    M4 = np.asarray(M4, dtype=float).reshape(q, q)
    if M1.shape != (p, p):
        raise ValueError("M1 must be square")

    f1 = _checked_lu(M1, SingularM1, "M1")
    M1inv_M2 = sla.lu_solve(f1, M2) if q else np.zeros((p, 0))
    M3_M1inv = sla.lu_solve(f1, M3.T, trans=1).T if q else np.zeros((0, p))
    M1inv = sla.lu_solve(f1, np.eye(p))
    if q == 0:
        return M1inv, np.zeros((p, 0)), np.zeros((0, p)), np.zeros((0, 0))

    Sh = M4 - M3 @ M1inv_M2
    fs = _checked_lu(Sh, SingularSchur, "Schur complement of M1")
    Sh_inv = sla.lu_solve(fs, np.eye(q))
    Mb2 = -M1inv_M2 @ Sh_inv
    Mb3 = -Sh_inv @ M3_M1inv
    Mb1 = M1inv + M1inv_M2 @ Sh_inv @ M3_M1inv
    # one Newton-Schulz step removes the error amplified by an ill-conditioned M1
    M = np.block([[M1, M2], [M3, M4]])
    X = np.block([[Mb1, Mb2], [Mb3, Sh_inv]])
    R = np.eye(p + q) - M @ X
    if np.max(np.abs(R)) < 0.5:
        X = X + X @ R
    return X[:p, :p], X[:p, p:], X[p:, :p], X[p:, p:]


# ----------------------------------------------------------------------------
# quadratic programming


def kkt_residuals(H, f, constraints: Polytope, x, lam, nu) -> dict:
    """Infinity-norm KKT residuals of ``min 1/2 x'Hx + f'x`` over a polytope."""
    A, b, G, h = constraints.A_eq, constraints.b_eq, constraints.G_inq, constraints.h_inq
    grad = H @ x + f + A.T @ nu + G.T @ lam
    slack = G @ x - h
    return {
        "stationarity": float(np.max(np.abs(grad), initial=0.0)),
        "primal_eq": float(np.max(np.abs(A @ x - b), initial=0.0)),
        "primal_inq": float(np.max(np.maximum(slack, 0.0), initial=0.0)),
        "dual": float(np.max(np.maximum(-lam, 0.0), initial=0.0)),
        "complementarity": float(np.max(np.abs(lam * slack), initial=0.0)),
    }


def _inf(v) -> float:
    return float(np.max(np.abs(v), initial=0.0))


def _solve_dense(K, rhs):
    try:
        sol = np.linalg.solve(K, rhs)
        if np.all(np.isfinite(sol)):
            return sol
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(K, rhs, rcond=None)[0]


def _factored_solver(K):
    """LU solver for ``K``; falls back to least squares when K is singular."""
    import warnings

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            fac = sla.lu_factor(K)
        piv = np.abs(np.diag(fac[0]))
        if np.all(np.isfinite(fac[0])) and np.min(piv) > 1e-15 * max(np.max(piv), 1.0):
            return lambda r: sla.lu_solve(fac, r)
    except (ValueError, np.linalg.LinAlgError):
        pass
    return lambda r: np.linalg.lstsq(K, r, rcond=None)[0]


def _equality_qp(H, f, A, b):
    n, p = H.shape[0], A.shape[0]
    K = np.block([[H, A.T], [A, np.zeros((p, p))]])
    sol = _solve_dense(K, np.concatenate([-f, b]))
    return sol[:n], sol[n:]


def _polish(H, f, A, b, G, h, active, tol):
    """Solve the equality QP on a working set, repairing it a few times."""
    n, p = H.shape[0], A.shape[0]
    active = np.asarray(sorted(active), dtype=int)
    scale = 1.0 + max(np.max(np.abs(h), initial=0.0), np.max(np.abs(b), initial=0.0))
    for _ in range(2 * G.shape[0] + 2):
        GW = G[active]
        K = np.block(
            [
                [H, A.T, GW.T],
                [A, np.zeros((p, p)), np.zeros((p, len(active)))],
                [GW, np.zeros((len(active), p + len(active)))],
            ]
        )
        rhs = np.concatenate([-f, b, h[active]])
        sol = _solve_dense(K, rhs)
        x, nu, zW = sol[:n], sol[n : n + p], sol[n + p :]
        viol = G @ x - h
        bad_dual = np.where(zW < -tol * scale)[0]
        outside = np.setdiff1d(np.where(viol > tol * scale)[0], active)
        if bad_dual.size == 0 and outside.size == 0:
            lam = np.zeros(G.shape[0])
            lam[active] = np.maximum(zW, 0.0)
            return x, lam, nu
        if bad_dual.size:
            worst = bad_dual[np.argmin(zW[bad_dual])]
            active = np.delete(active, worst)
        else:
            worst = outside[np.argmax(viol[outside])]
            active = np.sort(np.append(active, worst))
    return None


def _lp_feasible(constraints: Polytope) -> bool:
    n = constraints.dim
    res = linprog(
        np.zeros(n),
        A_ub=constraints.G_inq if constraints.n_inq else None,
        b_ub=constraints.h_inq if constraints.n_inq else None,
        A_eq=constraints.A_eq if constraints.n_eq else None,
        b_eq=constraints.b_eq if constraints.n_eq else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    return res.status != 2


def solve_qp(H, f, constraints: Polytope, tol=1e-10, max_iter=100, polish=True) -> QpSolution:
    """Minimize ``1/2 x'Hx + f'x`` over a polytope.

    Mehrotra predictor-corrector primal-dual interior point on the dense KKT
    system, followed by an active-set polish that solves the equality QP on
    the identified working set. The polish makes duals exact, which the
    sensitivity matrices rely on.

    Raises ``Infeasible`` for an empty polytope and ``MaxIterations`` (with
    the best iterate attached) when the interior point does not converge.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    H = 0.5 * (H + H.T)
    f = np.asarray(f, dtype=float).reshape(-1)
    n = f.size
    if H.shape != (n, n) or constraints.dim != n:
        raise ValueError("dimension mismatch between H, f and the constraints")
    A, b, G, h = constraints.A_eq, constraints.b_eq, constraints.G_inq, constraints.h_inq
    m, p = G.shape[0], A.shape[0]
    scale_p = 1.0 + max(np.max(np.abs(b), initial=0.0), np.max(np.abs(h), initial=0.0))
    scale_d = 1.0 + max(np.max(np.abs(f), initial=0.0), np.max(np.abs(H), initial=0.0))

    if m == 0:
        x, nu = _equality_qp(H, f, A, b)
        res = kkt_residuals(H, f, constraints, x, np.zeros(0), nu)
        if res["primal_eq"] > 1e-8 * scale_p:
            raise Infeasible("equality constraints are inconsistent")
        return QpSolution(x, np.zeros(0), nu, SolveStatus.OPTIMAL, _qp_obj(H, f, x), 0, res)

    # initial point: least-squares fit of the slack system
    K0 = np.block([[H + G.T @ G, A.T], [A, np.zeros((p, p))]])
    sol0 = _solve_dense(K0 + 1e-12 * np.eye(n + p), np.concatenate([-f + G.T @ h, b]))
    x, y = sol0[:n], sol0[n:]
    r0 = h - G @ x
    shift = -np.min(r0)
    s = r0 + (1.0 + shift) if shift >= 0 else r0.copy()
    z = np.ones(m)

    def step_len(v, dv):
        neg = dv < 0
        if not np.any(neg):
            return 1.0
        with np.errstate(over="ignore"):
            return min(1.0, float(np.min(-v[neg] / dv[neg])))

    best = None
    it = 0
    stalls = 0
    converged = False
    for it in range(1, max_iter + 1):
        Hx, Aty, Gtz, Gx = H @ x, A.T @ y, G.T @ z, G @ x
        rd = Hx + f + Aty + Gtz
        rp = A @ x - b
        ri = Gx + s - h
        mu = float(s @ z) / m
        # residuals relative to the size of the terms they balance
        err = max(
            _inf(rd) / (1.0 + max(_inf(Hx), _inf(f), _inf(Aty), _inf(Gtz))),
            _inf(rp) / (1.0 + max(_inf(A @ x), _inf(b))),
            _inf(ri) / (1.0 + max(_inf(Gx), _inf(h))),
            m * mu / (1.0 + abs(0.5 * x @ Hx + f @ x)),
        )
        if best is None or err < best[0]:
            if best is not None and err > 0.5 * best[0]:
                stalls += 1
            else:
                stalls = 0
            best = (err, x.copy(), y.copy(), z.copy(), s.copy())
        else:
            stalls += 1
        if err < 1e-10 or (err < 1e-8 and stalls >= 3):
            converged = True
            break
        if not np.all(np.isfinite(x)) or np.max(np.abs(z)) > 1e14 * scale_d or np.max(np.abs(x)) > 1e14 * scale_p:
            break
        d = z / s
        K = np.block([[H + G.T @ (d[:, None] * G), A.T], [A, np.zeros((p, p))]])
        # factor a slightly regularized copy, refine against the exact matrix
        solve = _factored_solver(K - np.diag(np.concatenate([np.zeros(n), np.full(p, 1e-14)])))

        def newton(rc):
            rhs = np.concatenate([-rd - G.T @ ((z * ri - rc) / s), -rp])
            sol = solve(rhs)
            for _ in range(3):
                res_k = rhs - K @ sol
                if _inf(res_k) <= 1e-15 * (1.0 + _inf(rhs)):
                    break
                sol = sol + solve(res_k)
            dx, dy = sol[:n], sol[n:]
            ds = -ri - G @ dx
            dz = (-rc - z * ds) / s
            return dx, dy, ds, dz

        dx, dy, ds, dz = newton(s * z)
        a_aff = min(step_len(s, ds), step_len(z, dz))
        mu_aff = float((s + a_aff * ds) @ (z + a_aff * dz)) / m
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        dx, dy, ds, dz = newton(s * z + ds * dz - sigma * mu)
        alpha = min(1.0, 0.995 * min(step_len(s, ds), step_len(z, dz)))
        x, y, s, z = x + alpha * dx, y + alpha * dy, s + alpha * ds, z + alpha * dz
        s = np.maximum(s, 1e-300)
        z = np.maximum(z, 1e-300)

    _, xb, yb, zb, sb = best
    if not converged and best[0] > 1e-6:
        if not _lp_feasible(constraints):
            raise Infeasible("polytope is empty")
    if polish:
        # working-set guesses: complementarity split first, then small slacks
        row_scale = 1.0 + np.abs(h) + np.abs(G @ xb)
        guesses = [np.where(zb > sb)[0]]
        for thr in (1e-8, 1e-6, 1e-4):
            guesses.append(np.where(sb <= thr * row_scale)[0])
        tried = set()
        for active in guesses:
            if tuple(active) in tried:
                continue
            tried.add(tuple(active))
            pol = _polish(H, f, A, b, G, h, active, tol=1e-12)
            if pol is None:
                continue
            xp, lp, nup = pol
            res = kkt_residuals(H, f, constraints, xp, lp, nup)
            size = 1.0 + max(_inf(H @ xp), _inf(f), _inf(G.T @ lp), _inf(A.T @ nup), _inf(b), _inf(h), _inf(G @ xp))
            if max(res.values()) <= 1e-9 * size * max(scale_p, scale_d):
                return QpSolution(xp, lp, nup, SolveStatus.OPTIMAL, _qp_obj(H, f, xp), it, res)
    res = kkt_residuals(H, f, constraints, xb, zb, yb)
    if converged or best[0] < 1e-8:
        return QpSolution(xb, zb, yb, SolveStatus.OPTIMAL, _qp_obj(H, f, xb), it, res)
    if not _lp_feasible(constraints):
        raise Infeasible("polytope is empty")
    sol = QpSolution(xb, zb, yb, SolveStatus.MAX_ITER, _qp_obj(H, f, xb), it, res)
    raise MaxIterations(f"interior point stopped at error {best[0]:.3e}", sol)


def _qp_obj(H, f, x):
    return float(0.5 * x @ H @ x + f @ x)


# ----------------------------------------------------------------------------
# projection


class PolytopeProjector:
    """Euclidean projection onto a fixed polytope with a warm working set.

    The working set of the previous call is tried first: the equality-
    constrained projection on it is accepted when it is primal feasible and
    its inequality multipliers are nonnegative (that is the full KKT
    certificate). Otherwise the QP solver runs and its active set is cached.
    Repeated projections inside fixed-point loops hit the fast path.
    """

    def __init__(self, constraints: Polytope, tol=1e-12):
        self.constraints = constraints
        c = constraints
        self._scale = 1.0 + max(np.max(np.abs(c.b_eq), initial=0.0), np.max(np.abs(c.h_inq), initial=0.0))
        self._tol = tol * self._scale
        self._factors = {}
        self.active: tuple = ()
        self.fallbacks = 0

    def _factor(self, W):
        fac = self._factors.get(W)
        if fac is None:
            c = self.constraints
            C = np.vstack([c.A_eq, c.G_inq[list(W)]])
            d = np.concatenate([c.b_eq, c.h_inq[list(W)]])
            if C.shape[0] == 0:
                fac = (C, d, None)
            else:
                CCt = C @ C.T
                try:
                    chol = sla.cho_factor(CCt)
                    if np.min(np.abs(np.diag(chol[0]))) ** 2 < 1e-12 * np.max(np.abs(CCt)):
                        raise np.linalg.LinAlgError
                    fac = (C, d, ("chol", chol))
                except (np.linalg.LinAlgError, ValueError):
                    fac = (C, d, ("pinv", np.linalg.pinv(CCt)))
            self._factors[W] = fac
        return fac

    def _try(self, v, W):
        C, d, fac = self._factor(W)
        c = self.constraints
        if fac is None:
            y, w = v.copy(), np.zeros(0)
        else:
            rhs = C @ v - d
            w = sla.cho_solve(fac[1], rhs) if fac[0] == "chol" else fac[1] @ rhs
            y = v - C.T @ w
            if fac[0] == "pinv" and np.max(np.abs(C @ y - d)) > self._tol * 10:
                return None
        if c.n_inq and np.max(c.G_inq @ y - c.h_inq) > self._tol:
            return None
        if np.any(w[c.n_eq :] < -self._tol):
            return None
        return y

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        y = self._try(v, self.active)
        if y is not None:
            return y
        self.fallbacks += 1
        sol = solve_qp(np.eye(v.size), -v, self.constraints)
        self.active = tuple(int(j) for j in np.where(sol.lam > 0)[0])
        return sol.x


class ParametricQp:
    """QPs sharing ``H`` and the polytope, solved for a sequence of linear terms.

    Same warm working-set strategy as ``PolytopeProjector``: the KKT system of
    the previous active set is tried first and accepted only when it passes
    the full optimality check; otherwise ``solve_qp`` is called.
    """

    def __init__(self, H, constraints: Polytope, tol=1e-10):
        self.H = 0.5 * (np.asarray(H, dtype=float) + np.asarray(H, dtype=float).T)
        self.constraints = constraints
        c = constraints
        self._scale = 1.0 + max(np.max(np.abs(c.b_eq), initial=0.0), np.max(np.abs(c.h_inq), initial=0.0))
        self._tol = tol * self._scale
        self._factors = {}
        self.active: tuple = ()
        self.fallbacks = 0

    def _factor(self, W):
        fac = self._factors.get(W)
        if fac is None:
            c = self.constraints
            C = np.vstack([c.A_eq, c.G_inq[list(W)]])
            d = np.concatenate([c.b_eq, c.h_inq[list(W)]])
            p = C.shape[0]
            K = np.block([[self.H, C.T], [C, np.zeros((p, p))]])
            fac = (K, d, _factored_solver(K))
            self._factors[W] = fac
        return fac

    def _try(self, f, W):
        c = self.constraints
        n = f.size
        K, d, solve = self._factor(W)
        rhs = np.concatenate([-f, d])
        sol = solve(rhs)
        if not np.all(np.isfinite(sol)):
            return None
        if np.max(np.abs(K @ sol - rhs)) > 1e-9 * (1.0 + np.max(np.abs(rhs))):
            return None
        x, w = sol[:n], sol[n:]
        if c.n_inq and np.max(c.G_inq @ x - c.h_inq) > self._tol:
            return None
        wi = w[c.n_eq :]
        if np.any(wi < -self._tol):
            return None
        lam = np.zeros(c.n_inq)
        lam[list(W)] = np.maximum(wi, 0.0)
        return QpSolution(x, lam, w[: c.n_eq], SolveStatus.OPTIMAL, _qp_obj(self.H, f, x), 0, {})

    def solve(self, f) -> QpSolution:
        f = np.asarray(f, dtype=float).reshape(-1)
        sol = self._try(f, self.active)
        if sol is not None:
            return sol
        self.fallbacks += 1
        sol = solve_qp(self.H, f, self.constraints)
        self.active = tuple(int(j) for j in np.where(sol.lam > 0)[0])
        return sol


def project_polytope(v, constraints: Polytope):
    """Euclidean projection of ``v`` onto a polytope."""
    return PolytopeProjector(constraints)(v)


# ----------------------------------------------------------------------------
# linear programming


def solve_lp(c, constraints: Polytope) -> QpSolution:
    """Minimize ``c'x`` over a polytope with the HiGHS LP solver.

    Duals follow the Lagrangian ``c + A'nu + G'lam = 0`` with ``lam >= 0``.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.size
    if constraints.dim != n:
        raise ValueError("dimension mismatch between c and the constraints")
    res = linprog(
        c,
        A_ub=constraints.G_inq if constraints.n_inq else None,
        b_ub=constraints.h_inq if constraints.n_inq else None,
        A_eq=constraints.A_eq if constraints.n_eq else None,
        b_eq=constraints.b_eq if constraints.n_eq else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    if res.status == 2:
        raise Infeasible("LP is infeasible")
    if res.status == 3:
        raise Unbounded("LP is unbounded; constraint polytope must be bounded")
    if res.status != 0:
        sol = QpSolution(np.asarray(res.x) if res.x is not None else np.full(n, np.nan),
                         np.zeros(constraints.n_inq), np.zeros(constraints.n_eq), SolveStatus.MAX_ITER)
        raise MaxIterations(f"HiGHS stopped: {res.message}", sol)
    lam = -np.asarray(res.ineqlin.marginals) if constraints.n_inq else np.zeros(0)
    nu = -np.asarray(res.eqlin.marginals) if constraints.n_eq else np.zeros(0)
    x = np.asarray(res.x)
    return QpSolution(x, np.maximum(lam, 0.0), nu, SolveStatus.OPTIMAL, float(res.fun), int(res.nit),
                      kkt_residuals(np.zeros((n, n)), c, constraints, x, lam, nu))


# ----------------------------------------------------------------------------
# finite differences


def finite_difference_jacobian(f: Callable, x0, h: Optional[float] = None) -> np.ndarray:
    """Central-difference Jacobian, one column per coordinate of ``x0``.

    The default step is ``1e-5 * max(1, ||x0||_inf)``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if h is None:
        h = 1e-5 * max(1.0, float(np.max(np.abs(x0), initial=0.0)))
    if h <= 0:
        raise ValueError("step size must be positive")
    cols = []
    for j in range(x0.size):
        e = np.zeros_like(x0)
        e[j] = h
        try:
            fp = np.asarray(f(x0 + e), dtype=float).reshape(-1)
            fm = np.asarray(f(x0 - e), dtype=float).reshape(-1)
        except EvaluationFailure:
            raise
        except Exception as exc:  # noqa: BLE001 - re-raised with context
            raise EvaluationFailure(f"function evaluation failed at column {j}: {exc}") from exc
        cols.append((fp - fm) / (2.0 * h))
    return np.column_stack(cols) if cols else np.zeros((0, 0))
