"""``ampere-lab`` command line.

Exit codes: 0 success, 1 hypothesis or validation failure (including a
failed experiment check), 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from ..calculus import monge_ampere
from ..dirichlet import dirichlet_solve, manufactured_density
from ..errors import ConvergenceError, DomainError, HypothesisError, LabError, StructureError
from ..grid import MeasureField, ScalarField, integrate, load_field, save_field
from ..potential import capacity, capacity_region, extremal_function, write_report
from ..structure import make_hermitian_form, make_structure, validate_structure
from .config import ConfigError, load_config, schema_text
from .experiments import CATALOGUE, run_experiment
from .output import ensure_dir, write_json

_EXPR_NAMES = {name: getattr(np, name) for name in
               ("sqrt", "log", "exp", "abs", "maximum", "minimum", "hypot", "sin", "cos", "pi")}


class UsageError(LabError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="JSON config file")
    p.add_argument("--out-dir", default=d, help="output directory (overrides the config)")
    p.add_argument("--resolution", type=int, default=d, help="single resolution N (overrides)")
    p.add_argument("--tol", type=float, default=d, help="tolerance stored as tolerances.tol")
    p.add_argument("--seed", type=int, default=d, help="random seed (overrides)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ampere-lab", description=__doc__.splitlines()[0])
    _globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _globals(p, suppress=True)
        return p

    add("validate-structure", "check J^2 = -1 on every grid of the config")
    p = add("ma", "Monge-Ampere measure of a function")
    p.add_argument("--expr", help="numpy expression in x1..x4")
    p.add_argument("--field", help="scalar field file")
    for name in ("capacity", "extremal"):
        p = add(name, f"{name} of a node set")
        p.add_argument("--set", dest="set_spec", required=True,
                       help="ball:R[@c1,c2,c3,c4] | plane:re,im[@piece] | mask:PATH")
    p = add("dirichlet", "solve the Dirichlet problem for the Monge-Ampere equation")
    p.add_argument("--phi", default="x1**2 + x2**2 + x3**2 + x4**2",
                   help="boundary data, numpy expression in x1..x4")
    p.add_argument("--f", dest="f_expr",
                   help="density of f (default: Monge-Ampere density of phi)")
    p = add("experiment", "run a catalogue experiment")
    p.add_argument("name", help="one of: " + ", ".join(CATALOGUE))
    return parser


def _expr(dom, text: str) -> np.ndarray:
    names = dict(_EXPR_NAMES, **{f"x{i + 1}": x for i, x in enumerate(dom.mesh())})
    try:
        val = eval(text, {"__builtins__": {}}, names)  # noqa: S307 - local CLI input
    except Exception as exc:
        raise UsageError(f"cannot evaluate expression {text!r}: {exc}") from None
    return np.broadcast_to(np.asarray(val, float), dom.shape).astype(float)


def _node_set(dom, spec: str) -> np.ndarray:
    kind, _, rest = spec.partition(":")
    arg, _, extra = rest.partition("@")
    try:
        if kind == "ball":
            c = [float(v) for v in extra.split(",")] if extra else [0.0] * 4
            return np.sqrt(((dom.coordinates() - c) ** 2).sum(-1)) <= float(arg)
        if kind == "plane":
            re, im = (float(v) for v in arg.split(","))
            piece = float(extra) if extra else np.inf
            x1, x2, x3, x4 = dom.mesh()
            E = (np.hypot(x3 - re, x4 - im) <= 0.5 * dom.h) & (np.hypot(x1, x2) <= piece)
            return np.broadcast_to(E, dom.shape).copy()
        if kind == "mask":
            return np.asarray(load_field(arg).values, float) > 0.5
    except ValueError as exc:
        raise UsageError(f"bad set spec {spec!r}: {exc}") from None
    raise UsageError(f"bad set spec {spec!r}")


def _config(args):
    if not getattr(args, "config", None):
        raise ConfigError("missing --config")
    cfg = load_config(args.config)
    return cfg.override(args.resolution, args.tol, args.seed, args.out_dir)


def _setup(cfg):
    n = cfg.resolutions[-1]
    dom = cfg.domain(n)
    J = make_structure(cfg.model, dom)
    return dom, J, make_hermitian_form(J), cfg.omega_mask(dom)


def cmd_validate_structure(cfg, args) -> int:
    ok = True
    for n in cfg.resolutions:
        rep = validate_structure(make_structure(cfg.model, cfg.domain(n)))
        ok &= rep["is_valid"]
        print(json.dumps({"resolution": n, **rep}))
    return 0 if ok else 1


def cmd_ma(cfg, args) -> int:
    dom, J, _, mask = _setup(cfg)
    if bool(args.expr) == bool(args.field):
        raise UsageError("give exactly one of --expr and --field")
    u = ScalarField(dom, _expr(dom, args.expr)) if args.expr else load_field(args.field)
    if u.domain.shape != dom.shape:
        raise UsageError("field shape does not match the config domain")
    ma = monge_ampere(J, u)
    region = capacity_region(mask) & ma.valid
    out = ensure_dir(cfg.output_dir)
    save_field(ma, os.path.join(out, "ma.field"))
    rep = {"resolution": dom.resolution[0], "mass": integrate(ma, region),
           "min_density": ma.min_density(region), "volume_element": "coordinate",
           "tolerances": cfg.tolerances}
    write_json(os.path.join(out, "ma.json"), rep)
    print(json.dumps(rep))
    return 0


def _stop_tol(cfg) -> float:
    return float(cfg.tolerances.get("tol", 1e-6))


def cmd_capacity(cfg, args) -> int:
    dom, J, _, mask = _setup(cfg)
    E = _node_set(dom, args.set_spec) & capacity_region(mask)
    est = capacity(J, E, mask, stop_tol=_stop_tol(cfg))
    out = ensure_dir(cfg.output_dir)
    data = {**est.to_dict(), "tolerances": {"stop_tol": _stop_tol(cfg)}, "seed": cfg.seed,
            "set": args.set_spec, "nodes": int(E.sum())}
    write_report(data, os.path.join(out, "capacity.json"))
    print(json.dumps(data))
    return 0


def cmd_extremal(cfg, args) -> int:
    dom, J, _, mask = _setup(cfg)
    E = _node_set(dom, args.set_spec) & capacity_region(mask)
    res = extremal_function(J, E, mask, stop_tol=_stop_tol(cfg))
    out = ensure_dir(cfg.output_dir)
    save_field(res.u, os.path.join(out, "extremal.field"))
    data = {"resolution": dom.resolution[0], "sweeps": res.iterations,
            "converged": res.converged, "min": float(res.u.values.min()),
            "nodes": int(E.sum()), "tolerances": {"stop_tol": _stop_tol(cfg)}}
    write_json(os.path.join(out, "extremal.json"), data)
    print(json.dumps(data))
    return 0 if res.converged else 1


def cmd_dirichlet(cfg, args) -> int:
    dom, J, omega, mask = _setup(cfg)
    phi = ScalarField(dom, _expr(dom, args.phi))
    if args.f_expr:
        dens = _expr(dom, args.f_expr)
    else:
        names = dict(_EXPR_NAMES)
        fn = lambda x1, x2, x3, x4: eval(args.phi, {"__builtins__": {}},  # noqa: E731,S307
                                          dict(names, x1=x1, x2=x2, x3=x3, x4=x4))
        dens = manufactured_density(cfg.model, dom, fn)
    f = MeasureField(dom, dens, np.ones(dom.shape, bool))
    res = dirichlet_solve(J, omega, mask, phi, f, tol=cfg.tolerances.get("tol"))
    out = ensure_dir(cfg.output_dir)
    save_field(res.u, os.path.join(out, "dirichlet.field"))
    data = res.to_dict()
    data["deviation_from_phi"] = float(np.abs(res.u.values - phi.values)[mask].max())
    write_report(data, os.path.join(out, "dirichlet.json"))
    print(json.dumps({k: data[k] for k in ("newton_steps", "residual", "converged",
                                            "deviation_from_phi") if k in data}))
    return 0 if res.converged else 1


def cmd_experiment(cfg, args) -> int:
    if args.name not in CATALOGUE:
        raise UsageError(f"unknown experiment {args.name!r} (choose from {', '.join(CATALOGUE)})")
    rep = run_experiment(args.name, cfg)
    for name, c in rep.checks.items():
        print(f"{'PASS' if c.passed else 'FAIL'} {name}: {c.value:.6g} ({c.rule}, "
              f"threshold {c.threshold:.6g})")
    print(f"report written to {cfg.output_dir}")
    return 0 if rep.exploratory or rep.passed else 1


COMMANDS = {
    "validate-structure": cmd_validate_structure,
    "ma": cmd_ma,
    "capacity": cmd_capacity,
    "extremal": cmd_extremal,
    "dirichlet": cmd_dirichlet,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        cfg = _config(args)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, ConfigError) as exc:
        print(f"ampere-lab: error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr)
        print("config schema:\n" + schema_text(), file=sys.stderr)
        return 2
    except (HypothesisError, StructureError, DomainError, ConvergenceError) as exc:
        print(f"ampere-lab: {exc}", file=sys.stderr)
        return 1
    except LabError as exc:
        # unknown experiment, under-resolved parameters
        print(f"ampere-lab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
