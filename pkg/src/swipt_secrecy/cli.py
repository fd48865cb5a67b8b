"""Command line: run experiments, compare against oracles, certify saved designs."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import an, harness, noan, verify
from .channel import SystemParams, UncertaintyModel, generate_channels


def _run(args):
    try:
        cfg = harness.load_config(args.config)
        over = {k: v for k, v in (("seed", args.seed), ("trials", args.trials)) if v is not None}
        if over:
            cfg = dataclasses.replace(cfg, **over)
    except (harness.ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = harness.run_experiment(cfg, args.out, harness.cpu_workers(args.workers))
    bad = harness.failure_fraction(rows)
    print(f"{cfg.experiment}: {len(rows)} rows written to {args.out} ({bad:.1%} non-optimal)")
    return 0


def _oracle(args):
    ch = generate_channels(2, 1, 1, args.seed)
    P = args.P
    if args.kind == "an-inner":
        params = an.default_an_params(2, P, args.eta, 1)
        t = float(np.sqrt(an.t_min(ch, P))) if args.t is None else args.t
        sol = an.inner_f_of_t(t, ch, params)
        orc = verify.grid_oracle_an(t, ch, params)
        out = {"kind": args.kind, "t": t, "solver": sol.f, "oracle": orc.objective, "argument": orc.argument}
    else:
        params = SystemParams(2, P, E_targets=args.eta * P)
        if args.kind == "secrecy-max":
            sol = noan.max_secrecy_rate_bisection(ch, params)
            value = sol.achieved_rate if sol.ok else None
        elif args.kind == "power-min":
            sol = noan.power_min(args.R, ch, params)
            value = sol.power if sol.ok else None
        else:
            sol = noan.max_harvested_energy(args.R, ch, params)
            value = sol.objective if sol.ok else None
        orc = verify.grid_oracle_no_an(args.kind, ch, params, R=args.R)
        out = {"kind": args.kind, "status": str(sol.solver_status), "solver": value,
               "oracle": orc.objective if orc.feasible else None, "argument": orc.argument}
    print(json.dumps(out, indent=1))
    return 0


def _certify(args):
    design, ch, R, E = harness.load_solution(args.solution)
    um = UncertaintyModel.uniform(ch, args.eps)
    rep = verify.certify_robust(design, um, R, E, args.samples, args.seed)
    print(json.dumps(dataclasses.asdict(rep), indent=1))
    return 0 if rep.violations == 0 else 1


def build_parser():
    p = argparse.ArgumentParser(prog="swipt-secrecy")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default="results")
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=_run)

    o = sub.add_parser("oracle", help="solver vs brute-force grid on a 2-antenna instance")
    o.add_argument("--kind", required=True, choices=["secrecy-max", "power-min", "energy-max", "an-inner"])
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--P", type=float, default=10.0)
    o.add_argument("--R", type=float, default=1.0)
    o.add_argument("--eta", type=float, default=0.1)
    o.add_argument("--t", type=float)
    o.set_defaults(func=_oracle)

    c = sub.add_parser("certify", help="sample a saved design over uncertainty balls")
    c.add_argument("--solution", required=True)
    c.add_argument("--eps", type=float, required=True)
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=_certify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
