"""Command line front end: ``wulff beta|radial|symmetrize|solve|verify --config FILE --out DIR``.

Exit codes: 0 pass, 1 a check failed, 2 configuration error, 3 solver did not converge.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .anisotropy import AnisoNorm, polar_eval
from .errors import ConfigError, InadmissibleParams, LambdaTooLarge, NoConvergence, WulffError
from .mesh import build_mesh, domain_from_spec
from .pde import ProblemSpec, SolverConfig, solve_schedule
from .radial import ProblemParams, RadialSolution, branch_membership_check, build_radial, solve_beta, v_star
from .rearrange import (
    GridFunction,
    decreasing_rearrangement,
    lebesgue_norm,
    rectangle_grid,
    shared_s_grid,
    symmetrized_radius,
    wulff_polar_grid,
)

log = logging.getLogger("wulff")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NOCONV = 0, 1, 2, 3

_NUM = {"type": "number"}
_NORM = {
    "type": "object",
    "properties": {
        "family": {"enum": ["euclidean", "rnorm", "ellipse", "sampled"]},
        "r": _NUM,
        "axes": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
        "matrix": {"type": "array"},
        "dim": {"type": "integer", "minimum": 2},
        "angles": {"type": "array", "items": _NUM},
        "values": {"type": "array", "items": _NUM},
    },
    "required": ["family"],
}
_PARAMS = {
    "type": "object",
    "properties": {
        "N": {"type": "integer", "minimum": 2},
        "p": _NUM,
        "q": _NUM,
        "lambda": {"type": "number", "minimum": 0},
        "lambda_fraction": {"type": "number", "minimum": 0},
        "R": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["N", "p", "q"],
}
_SOLVER = {
    "type": "object",
    "properties": {
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": {"type": "integer", "minimum": 1},
        "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "eps_reg": {"type": "number", "minimum": 0},
    },
}
_EPS = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}
_FIELD = {"oneOf": [{"type": "number"}, {"type": "string"}, {"type": "null"}]}

SCHEMAS = {
    "beta": {"type": "object", "properties": {"params": _PARAMS}, "required": ["params"]},
    "radial": {
        "type": "object",
        "properties": {"params": _PARAMS, "norm": _NORM, "n": {"type": "integer", "minimum": 2}},
        "required": ["params"],
    },
    "symmetrize": {
        "type": "object",
        "properties": {
            "norm": _NORM,
            "grid": {
                "type": "object",
                "properties": {"bounds": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4}, "n": {"type": "integer", "minimum": 2}},
            },
            "function": {"type": "string"},
            "csv": {"type": "string"},
            "target": {"type": "object", "properties": {"rings": {"type": "integer"}, "sectors": {"type": "integer"}}},
        },
        "oneOf": [{"required": ["function"]}, {"required": ["csv"]}],
    },
    "solve": {
        "type": "object",
        "properties": {
            "domain": {"type": "object", "properties": {"type": {"enum": ["rectangle", "wulff_disc", "mask"]}}, "required": ["type"]},
            "h": {"type": "number", "exclusiveMinimum": 0},
            "norm": _NORM,
            "p": _NUM,
            "q": _NUM,
            "lambda": {"type": "number", "minimum": 0},
            "source": _FIELD,
            "b_sign": _NUM,
            "epsilons": _EPS,
            "solver": _SOLVER,
        },
        "required": ["domain", "h", "p", "q", "epsilons"],
    },
    "verify": {
        "type": "object",
        "properties": {
            "params": _PARAMS,
            "norm": _NORM,
            "h": {"type": "number", "exclusiveMinimum": 0},
            "epsilons": _EPS,
            "solver": _SOLVER,
            "slack_C": {"type": "number", "minimum": 0},
            "polar_grid": {"type": "integer", "minimum": 8},
        },
        "required": ["params", "h", "epsilons"],
    },
}


# ------------------------------------------------------------ helpers
def load_config(path, command):
    try:
        if path == "demo":
            text = resources.files("wulff").joinpath(f"data/demo_{command}.json").read_text()
        else:
            text = Path(path).read_text()
        cfg = json.loads(text)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such config: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{loc}: {exc.message}") from exc
    return cfg


def _norm(cfg, dim=2):
    spec = dict(cfg.get("norm", {"family": "euclidean"}))
    if spec["family"] in ("euclidean", "rnorm"):
        spec.setdefault("dim", dim)
    try:
        return AnisoNorm.from_spec(spec)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad norm: {exc}") from exc


def _params(cfg):
    P = cfg["params"]
    try:
        base = ProblemParams(int(P["N"]), float(P["p"]), float(P["q"]), 0.0, float(P.get("R", 1.0)))
        lam = float(P["lambda"]) if "lambda" in P else float(P.get("lambda_fraction", 0.0)) * base.lam_max
        return base.with_lam(lam)
    except InadmissibleParams as exc:
        raise ConfigError(str(exc)) from exc


def _field(expr, norm):
    """Vectorised evaluator of an expression in x, y (and rho = H°(x))."""
    if expr is None or isinstance(expr, (int, float)):
        return expr
    code = compile(expr, "<config>", "eval")
    allowed = {k: getattr(np, k) for k in ("sin", "cos", "exp", "log", "sqrt", "abs", "pi", "maximum", "minimum", "where", "clip")}

    def f(pts):
        env = dict(allowed, x=pts[:, 0], y=pts[:, 1], rho=polar_eval(norm, pts))
        return np.broadcast_to(eval(code, {"__builtins__": {}}, env), pts.shape[:1]).astype(float)

    return f


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return str(path)


def _write_rows(path, header, cols):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    return str(path)


def _solver_cfg(cfg):
    return SolverConfig(**cfg.get("solver", {}))


# ------------------------------------------------------------ commands
def cmd_beta(cfg, out, args):
    P = _params(cfg)
    sol = RadialSolution.from_beta(P, solve_beta(P))
    res = sol.summary()
    _write_json(out / "beta.json", res)
    from .plotting import beta_svg

    beta_svg(out / "beta.svg", P, args.deterministic)
    print(json.dumps(res, sort_keys=True))
    return EXIT_OK


def cmd_radial(cfg, out, args):
    P = _params(cfg)
    norm = _norm(cfg, P.N)
    sol = build_radial(P, norm.kappa)
    n = int(cfg.get("n", 256))
    r = P.R * np.logspace(-4, 0, n)
    _write_rows(out / "radial.csv", ["r", "phi", "v", "V"], [r, sol.phi(r), sol.v(r), sol.V(r)])
    vs = v_star(sol)
    s = shared_s_grid(vs.total, n)
    _write_rows(out / "v_star.csv", ["s", "v_star"], [s, vs(s)])
    res = dict(sol.summary(), kappa=norm.kappa, membership=branch_membership_check(sol).as_dict())
    _write_json(out / "radial.json", res)
    print(json.dumps(sol.summary(), sort_keys=True))
    return EXIT_OK


def cmd_symmetrize(cfg, out, args):
    norm = _norm(cfg)
    if "csv" in cfg:
        u = GridFunction.from_csv(cfg["csv"])
    else:
        g = cfg.get("grid", {})
        u = rectangle_grid(tuple(g.get("bounds", (-1.0, 1.0, -1.0, 1.0))), int(g.get("n", 128)), _field(cfg["function"], norm))
    R = symmetrized_radius(u, norm)
    t = cfg.get("target", {})
    target = wulff_polar_grid(norm, R, int(t.get("rings", 128)), int(t.get("sectors", 128)))
    prof = decreasing_rearrangement(u)
    sym = target.with_values(prof(norm.kappa * polar_eval(norm, target.points) ** 2))
    sym.to_csv(out / "symmetrized.csv")
    s = shared_s_grid(prof.total, 512)
    _write_rows(out / "profile.csv", ["s", "u_star"], [s, prof(s)])
    res = {
        "measure": u.total,
        "R_star": R,
        "L1": lebesgue_norm(u, 1),
        "L2": lebesgue_norm(u, 2),
        "L1_sym": lebesgue_norm(sym, 1),
        "L2_sym": lebesgue_norm(sym, 2),
    }
    _write_json(out / "symmetrize.json", res)
    print(json.dumps(res, sort_keys=True))
    return EXIT_OK


def cmd_solve(cfg, out, args):
    norm = _norm(cfg)
    try:
        mesh = build_mesh(domain_from_spec(cfg["domain"]), float(cfg["h"]))
        spec = ProblemSpec(
            norm, float(cfg["p"]), float(cfg["q"]), float(cfg.get("lambda", 0.0)),
            _field(cfg.get("source"), norm), cfg["epsilons"][0], float(cfg.get("b_sign", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    ell, mono = spec.validate(rng=args.seed)
    reports = solve_schedule(spec, mesh, cfg["epsilons"], _solver_cfg(cfg))
    runs = []
    for k, rep in enumerate(reports):
        rep.solution.to_csv(out / f"solution_{k}.csv")
        prof = decreasing_rearrangement(mesh.refined_field(rep.u, 2))
        s = shared_s_grid(prof.total, 512)
        _write_rows(out / f"profile_{k}.csv", ["s", "u_star"], [s, prof(s)])
        runs.append(rep.summary())
    res = {"runs": runs, "n_vertices": mesh.n_vertices, "n_triangles": mesh.n_triangles,
           "structure": {"ellipticity_slack": ell, "monotonicity_min": mono, "seed": args.seed}}
    _write_json(out / "solve.json", res)
    print(json.dumps(runs, sort_keys=True))
    return EXIT_OK if all(r.converged for r in reports) else EXIT_NOCONV


def cmd_verify(cfg, out, args):
    from . import verify as V
    from .plotting import overlay_svg

    P = _params(cfg)
    if P.N != 2:
        raise ConfigError("verify runs on 2-D domains")
    norm = _norm(cfg, 2)
    h = float(cfg["h"])
    slack_c = float(cfg.get("slack_C", V.SLACK_C))
    suite = []

    n = int(cfg.get("polar_grid", 256))
    f = wulff_polar_grid(norm, P.R, n, n, func=lambda x: P.lam / polar_eval(norm, x) ** P.gamma)
    suite.append(V.smallness_check(f, P, norm))
    if not suite[-1].passed:
        return _finish_verify(out, suite, [])

    sol = build_radial(P, norm.kappa)
    suite.append(_as_report(branch_membership_check(sol)))
    suite.append(V.ode_inequality_check(v_star(sol), P, norm, equality=True, tol=1e-3))

    run = V.run_comparison(norm, P, h, cfg["epsilons"], _solver_cfg(cfg), slack_c)
    if not all(rep.converged for rep in run.solves):
        raise NoConvergence("truncated problem did not converge", run.solves[-1])
    suite.extend(run.reports)
    suite.append(V.norm_estimate_check(run.u_profiles[-1], run.v_profile, P))

    s = shared_s_grid(run.v_profile.total, 256)
    arts = [_write_rows(out / "v_star.csv", ["s", "v_star"], [s, run.v_profile(s)])]
    labels = {}
    for k, (rep, up) in enumerate(zip(run.solves, run.u_profiles)):
        arts.append(_write_rows(out / f"u_star_{k}.csv", ["s", "u_star"], [s, up(s)]))
        labels[f"$u_\\varepsilon^*$, $\\varepsilon$={rep.epsilon:g}"] = up
    arts.append(overlay_svg(out / "overlay.svg", s, labels, run.v_profile, not args.linear, args.deterministic, run.slack))
    return _finish_verify(out, suite, arts)


def _as_report(m):
    from .verify import Report

    d = m.as_dict()
    return Report(d.pop("check"), d.pop("pass"), d.pop("margin"), details=d)


def _finish_verify(out, suite, arts):
    out_arts = [os.path.basename(a) for a in arts]
    records = []
    for r in suite:
        r.artifacts = out_arts
        records.append(r.as_dict())
    ok = all(r.passed for r in suite)
    _write_json(out / "verify.json", {"pass": ok, "suite": records, "version": __version__})
    for rec in records:
        print(f"{rec['check']:<24s} {'PASS' if rec['pass'] else 'FAIL'}  margin={rec['margin']}")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"beta": cmd_beta, "radial": cmd_radial, "symmetrize": cmd_symmetrize, "solve": cmd_solve, "verify": cmd_verify}


def build_parser():
    ap = argparse.ArgumentParser(prog="wulff", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file, or 'demo' for the bundled example")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True)
        sp.add_argument("--linear", action="store_true", help="linear s axis in plots")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def _thread_limit():
    n = os.environ.get("WULFF_THREADS")
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, int(n)))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.command)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output directory {out} is not writable")
        with _thread_limit():
            return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LambdaTooLarge as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except NoConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except WulffError as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
