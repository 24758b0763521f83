"""Command line interface: scenario validation, generation and the solvers.

Every subcommand prints a JSON summary on stdout and writes its files into
``--out``. Errors are reported as a JSON object on stderr; the exit status is
2 for malformed or invalid scenario files and 1 for any other solver error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ParseError, SolverError, ValidationError
from .game import chebyshev_point
from .leader import solve_stackelberg
from .lower import solve_vne
from .scenario import GeneratorConfig, generate_scenario, load_scenario, shipped_scenario_path
from .sensitivity import fd_best_response_jacobian, game_jacobians
from .warmstart import run_warmstart

log = logging.getLogger("stackelberg")

TRACE_FIXED = ["t", "s_t", "l_t", "J_L"]
WARMSTART_COLUMNS = ["k", "follower", "residual_inf", "objective_i"]


def _floats(v):
    return [float(a) for a in np.ravel(v)]


def _resolve_scenario(arg):
    path = Path(arg)
    if not path.exists() and not path.suffix:
        shipped = shipped_scenario_path(arg)
        if shipped.exists():
            return shipped
    return path


def _parse_vector(text, m_L):
    try:
        v = np.array([float(a) for a in text.split(",") if a.strip()])
    except ValueError as exc:
        raise ParseError(f"cannot parse price vector {text!r}", field="--init") from exc
    if v.size != m_L:
        raise ParseError(f"price vector has {v.size} entries, expected {m_L}", field="--init")
    return v


def _price(sc, text):
    """Price from ``--init``, else the scenario's initial price, else the Chebyshev center."""
    if text:
        return _parse_vector(text, sc.game.m_L)
    if sc.initial_pi is not None:
        return np.asarray(sc.initial_pi, dtype=float)
    return chebyshev_point(sc.game.leader.polytope)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def trace_columns(game):
    return (
        TRACE_FIXED
        + [f"pi_{j}" for j in range(game.m_L)]
        + [f"sigma_{j}" for j in range(game.m_F)]
        + [f"budget_{i}" for i in range(game.N)]
    )


def write_trace_csv(path, game, trace):
    """One row per outer iteration: step data, prices, aggregate, budget usage."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trace_columns(game))
        for r in trace.records:
            w.writerow([r.t, repr(r.s_t), r.l_t, repr(r.J_L)] + [repr(v) for v in _floats(r.pi)] + [repr(v) for v in _floats(r.sigma)] + [repr(v) for v in _floats(r.budget_used)])


def write_warmstart_csv(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(WARMSTART_COLUMNS)
        for k, i, res, obj in result.follower_trace:
            w.writerow([int(k), int(i), repr(float(res)), repr(float(obj))])


# ----------------------------------------------------------------------------
# subcommands


def cmd_validate(args):
    sc = load_scenario(_resolve_scenario(args.scenario))
    g = sc.game
    rep = dict(sc.report)
    return {
        "name": sc.name,
        "N": g.N,
        "m_F": g.m_F,
        "m_L": g.m_L,
        "mu": float(rep.get("mu", float("nan"))),
        "slater_margins": _floats(rep.get("slater_margins", [])),
        "warmstart_eligible": bool(rep.get("warmstart_eligible", False)),
    }


def cmd_generate(args):
    cfg = GeneratorConfig(
        seed=args.seed,
        N=args.N,
        m_F=args.m_F,
        m_L=args.m_L,
        constraint_density=args.constraint_density,
        mu_target=args.mu_target,
        make_interior_feasible=not args.no_interior,
        n_active=args.n_active,
    )
    sc = generate_scenario(cfg)
    out = _out_dir(args)
    path = out / (args.name or f"generated-{args.seed}.json")
    sc.write(path)
    return {"scenario": str(path), "seed": args.seed, "N": cfg.N, "m_F": cfg.m_F, "m_L": cfg.m_L}


def cmd_solve_ne(args):
    sc = load_scenario(_resolve_scenario(args.scenario))
    pi = _price(sc, args.init)
    cfg = sc.solver.vne_config()
    if args.k_vne is not None:
        cfg.k_max = args.k_vne
    res = solve_vne(sc.game, pi, cfg)
    summary = {
        "pi": _floats(pi),
        "x_star": _floats(res.x_star),
        "iterations": res.iterations,
        "residual": res.residual,
        "polished": res.polished,
        "gamma": res.gamma,
        "multipliers": [{"lam": _floats(k.lam), "nu": _floats(k.nu)} for k in res.kkt_points],
    }
    _write_json(_out_dir(args) / "ne.json", summary)
    return summary


def cmd_jacobian(args):
    sc = load_scenario(_resolve_scenario(args.scenario))
    game = sc.game
    pi = _price(sc, args.init)
    cfg = sc.solver.vne_config()
    if args.k_vne is not None:
        cfg.k_max = args.k_vne
    res = solve_vne(game, pi, cfg)
    sens = game_jacobians(game, pi, res.x_star, res.kkt_points)
    summary = {
        "pi": _floats(pi),
        "followers": [
            {
                "jacobian": s.jacobian.tolist(),
                "active": [int(j) for j in s.partition.active],
                "closed_form_deviation": float(s.deviation),
            }
            for s in sens
        ],
    }
    if args.check_fd:
        devs = []
        for i, s in enumerate(sens):
            fd = fd_best_response_jacobian(game, i, pi, res.x_star)
            devs.append(float(np.max(np.abs(s.jacobian - fd)) / max(1.0, float(np.max(np.abs(fd))))))
        summary["fd_deviation"] = devs
        summary["max_fd_deviation"] = max(devs)
    _write_json(_out_dir(args) / "jacobian.json", summary)
    return summary


def _warmstart(sc, args):
    ws = sc.solver.warmstart
    rho = args.rho if args.rho is not None else ws.rho
    eps = args.epsilon if args.epsilon is not None else ws.epsilon
    return run_warmstart(sc.game, rho=rho, epsilon=eps, k_w=ws.k_w)


def _warmstart_summary(r):
    return {
        "pi_0": _floats(r.pi_0),
        "iterations": r.iterations,
        "epsilon": r.epsilon,
        "final_residual": float(r.residual_trace[-1]) if len(r.residual_trace) else float("nan"),
        "min_slack": float(r.min_slack),
        "interior_verified": bool(r.interior_verified),
    }


def cmd_warmstart(args):
    sc = load_scenario(_resolve_scenario(args.scenario))
    r = _warmstart(sc, args)
    out = _out_dir(args)
    write_warmstart_csv(out / "warmstart.csv", r)
    summary = _warmstart_summary(r)
    _write_json(out / "warmstart.json", summary)
    return summary


def cmd_solve(args):
    sc = load_scenario(_resolve_scenario(args.scenario))
    game = sc.game
    out = _out_dir(args)
    cfg = sc.solver.stackelberg_config()
    if args.T is not None:
        cfg.T = args.T
    if args.k_vne is not None:
        cfg.vne.k_max = args.k_vne
    if args.s_bar is not None:
        cfg.armijo.s_bar = args.s_bar
    ws_summary = None
    if args.init == "warmstart":
        r = _warmstart(sc, args)
        write_warmstart_csv(out / "warmstart.csv", r)
        ws_summary = _warmstart_summary(r)
        pi0 = r.pi_0
    else:
        pi0 = _price(sc, args.init)
    trace = solve_stackelberg(game, pi0, cfg)
    write_trace_csv(out / "trace.csv", game, trace)
    summary = trace.summary()
    summary["initial_pi"] = _floats(pi0)
    summary["J_L"] = _floats(trace.J_L)
    if ws_summary is not None:
        summary["warmstart"] = ws_summary
    _write_json(out / "summary.json", summary)
    return summary


# ----------------------------------------------------------------------------
# dispatch


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stackelberg", description="Leader-follower pricing games with quadratic aggregative followers.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--scenario", required=True, help="scenario JSON path or the name of a shipped scenario")
        p.add_argument("--out", default=".", help="output directory (default: current directory)")
        return p

    scenario_cmd("validate", "parse a scenario and run all validators")

    g = sub.add_parser("generate", help="write a seeded synthetic scenario")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--N", type=int, default=3)
    g.add_argument("--m-F", dest="m_F", type=int, default=4)
    g.add_argument("--m-L", dest="m_L", type=int, default=3)
    g.add_argument("--constraint-density", type=float, default=0.5)
    g.add_argument("--mu-target", type=float, default=1.0)
    g.add_argument("--n-active", type=int, default=0)
    g.add_argument("--no-interior", action="store_true", help="construct an instance without an interior equilibrium")
    g.add_argument("--name", default=None, help="file name inside --out")
    g.add_argument("--out", default=".")

    p = scenario_cmd("solve-ne", "follower equilibrium at a fixed price")
    p.add_argument("--init", default=None, help="comma-separated price vector")
    p.add_argument("--k-vne", type=int, default=None)

    p = scenario_cmd("jacobian", "equilibrium sensitivities at a fixed price")
    p.add_argument("--init", default=None, help="comma-separated price vector")
    p.add_argument("--k-vne", type=int, default=None)
    p.add_argument("--check-fd", action="store_true", help="compare against central finite differences")

    p = scenario_cmd("solve", "leader descent from an initial price")
    p.add_argument("--init", default=None, help="comma-separated price vector or 'warmstart'")
    p.add_argument("--T", type=int, default=None, help="outer iterations")
    p.add_argument("--k-vne", type=int, default=None, help="inner iterations")
    p.add_argument("--s-bar", type=float, default=None, help="initial Armijo step")
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)

    p = scenario_cmd("warmstart", "consensus ADMM search for an interior equilibrium price")
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    return ap


COMMANDS = {
    "validate": cmd_validate,
    "generate": cmd_generate,
    "solve-ne": cmd_solve_ne,
    "jacobian": cmd_jacobian,
    "solve": cmd_solve,
    "warmstart": cmd_warmstart,
}


def _error(exc, out=None):
    d = exc.to_dict() if isinstance(exc, SolverError) else {"error": type(exc).__name__, "message": str(exc)}
    text = json.dumps(d)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(text + "\n")
        except OSError:
            pass


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    out = getattr(args, "out", None)
    try:
        summary = COMMANDS[args.command](args)
    except (ParseError, ValidationError) as exc:
        _error(exc, out)
        return 2
    except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
        _error(exc, out)
        return 1
    print(json.dumps(summary, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
