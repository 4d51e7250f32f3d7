"""Command-line interface.

Commands: generate, solve, delta, sweep, verify.  Exit codes: 0 on
success, 2 on usage errors, 3 on rigidity violations, 4 when no start
of a solve converges.  The SNL_LOG environment variable (off|info|debug)
controls log verbosity.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import statistics
import sys
from pathlib import Path

import numpy as np

from . import deltabound, potential, rigidity, solver
from .network import NoiseSpec, draw_noise, exact_measurements, measure, zero_noise
from .rigidity import (Framework, RigidityError, is_generically_globally_rigid,
                       is_generically_rigid, lambda_matrix, residual_vector,
                       rigidity_matrices)
from .scenario import (Scenario, generate_network, load_scenario, save_scenario,
                       scenario_from_dict, scenario_to_dict)
from .solver import SolveOptions, mean_localization_error, multistart_solve

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RIGIDITY = 3
EXIT_NO_CONVERGENCE = 4

FLOAT_FMT = "%.17g"


def _configure_logging():
    level = os.environ.get("SNL_LOG", "off").lower()
    if level == "debug":
        logging.basicConfig(level=logging.DEBUG)
    elif level == "info":
        logging.basicConfig(level=logging.INFO)
    else:
        logging.disable(logging.CRITICAL)


def _write_json(path, payload: dict):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _rigidity_diagnosis(network) -> str:
    if is_generically_globally_rigid(network):
        return "globally rigid"
    if is_generically_rigid(network):
        return "rigid"
    return "flexible"


def _measurements_for(scenario: Scenario):
    """Draw noise (if the scenario specifies any) and measure."""
    if scenario.noise is None:
        draw = zero_noise(scenario.network)
    else:
        draw = draw_noise(scenario.network, scenario.noise)
    return draw, measure(scenario.network, draw)


def cmd_generate(args) -> int:
    if args.m < 3:
        print("error: at least 3 anchors are required", file=sys.stderr)
        return EXIT_USAGE
    if args.n < 1:
        print("error: at least 1 non-anchor is required", file=sys.stderr)
        return EXIT_USAGE
    box = ((args.box[0], args.box[1]), (args.box[2], args.box[3]))
    try:
        network = generate_network(
            args.n, args.m, args.range, box=box, seed=args.seed,
            require_globally_rigid=not args.allow_nonrigid)
    except RigidityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RIGIDITY
    save_scenario(args.output, Scenario(network))
    print(f"wrote {args.output}")
    print(f"rigidity: {_rigidity_diagnosis(network)}")
    return EXIT_OK


def _dump_matrices(network, measurements, x, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fw = Framework(network, x, measurements.anchors_measured)
    mats = rigidity_matrices(fw, measurements)
    rho = residual_vector(fw, measurements)
    lam = lambda_matrix(rho, network)
    np.savetxt(directory / "rigidity_full.csv", mats.full,
               delimiter=",", fmt=FLOAT_FMT)
    np.savetxt(directory / "rigidity_reduced.csv", mats.reduced,
               delimiter=",", fmt=FLOAT_FMT)
    np.savetxt(directory / "rigidity_revised_reduced.csv", mats.revised_reduced,
               delimiter=",", fmt=FLOAT_FMT)
    np.savetxt(directory / "lambda.csv", lam, delimiter=",", fmt=FLOAT_FMT)


def cmd_solve(args) -> int:
    scenario = load_scenario(args.scenario)
    _, measurements = _measurements_for(scenario)
    opts = SolveOptions(starts=args.starts, grad_tolerance=args.tol,
                        seed=args.seed, max_iterations=args.max_iterations)
    try:
        result = multistart_solve(scenario.network, measurements, opts)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.output:
        _write_json(args.output, result.to_dict())
    if args.dump_matrices:
        _dump_matrices(scenario.network, measurements, result.best.x,
                       args.dump_matrices)
    print(f"mle: {result.mle:.6e}")
    print(f"classification: {result.best.classification}")
    print(f"potential: {result.best.value:.6e}")
    if not any(p.converged(opts) for p in result.all_points):
        print("error: no start converged", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_delta(args) -> int:
    scenario = load_scenario(args.scenario)
    opts = SolveOptions(starts=args.starts, seed=args.seed)
    try:
        report = deltabound.delta_bound(scenario.network, args.delta1, opts)
    except RigidityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RIGIDITY
    if args.output:
        _write_json(args.output, report.to_dict())
    print("noise-bound certificate")
    print(f"  delta1          {report.delta1:.6g}")
    print(f"  phi1            {report.phi1:.6g}")
    print(f"  delta2          {report.delta2:.6g}")
    print(f"  phi2            {report.phi2:.6g}")
    print(f"  delta           {report.delta:.6g}")
    print(f"  weights (a,b,c) ({report.weights.a:g}, {report.weights.b:g}, "
          f"{report.weights.c:g})")
    return EXIT_OK


def _sweep_row(scenario, delta, trial, row_seed, opts, weights):
    spec = NoiseSpec(delta_budget=delta, weights=weights,
                     distribution="uniform-ball", seed=row_seed)
    draw = draw_noise(scenario.network, spec)
    measurements = measure(scenario.network, draw)
    result = multistart_solve(scenario.network, measurements, opts)
    converged = any(p.converged(opts) for p in result.all_points)
    return {
        "delta": delta,
        "trial": trial,
        "seed": row_seed,
        "mle": result.mle,
        "phi": result.best.value,
        "budget": draw.weighted_norm(weights),
        "converged": converged,
    }


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    deltas = [float(d) for d in args.deltas.split(",") if d]
    if not deltas or args.trials < 1:
        print("error: need at least one delta and one trial", file=sys.stderr)
        return EXIT_USAGE
    weights = deltabound.noise_weights(scenario.network).as_tuple()
    opts = SolveOptions(starts=args.starts, seed=args.seed)

    tasks = []
    for di, delta in enumerate(deltas):
        for trial in range(args.trials):
            row_seed = int(np.random.SeedSequence(
                [args.seed, di, trial]).generate_state(1)[0])
            tasks.append((delta, trial, row_seed))

    def run(task):
        delta, trial, row_seed = task
        return _sweep_row(scenario, delta, trial, row_seed, opts, weights)

    if args.threads > 1:
        with concurrent.futures.ThreadPoolExecutor(args.threads) as pool:
            rows = list(pool.map(run, tasks))
    else:
        rows = [run(t) for t in tasks]

    header = "delta,trial,seed,mle,phi,budget,converged"
    if args.json:
        text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
    else:
        lines = [header]
        for r in rows:
            lines.append(",".join([
                FLOAT_FMT % r["delta"], str(r["trial"]), str(r["seed"]),
                FLOAT_FMT % r["mle"], FLOAT_FMT % r["phi"],
                FLOAT_FMT % r["budget"],
                "true" if r["converged"] else "false",
            ]))
        text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)

    for delta in deltas:
        med = statistics.median(r["mle"] for r in rows if r["delta"] == delta)
        print(f"delta={delta:g}: median mle {med:.6e}")
    return EXIT_OK


def cmd_verify(args) -> int:
    scenario = load_scenario(args.scenario)
    network = scenario.network
    rng = np.random.default_rng(args.seed)
    checks: list[tuple[str, bool]] = []

    def no_duplicates(edges, undirected=True):
        seen = set()
        for e in edges:
            key = frozenset(e) if undirected else tuple(e)
            if key in seen:
                return False
            seen.add(key)
        return True

    dup_free = (no_duplicates(network.edges_ss)
                and no_duplicates(network.edges_aa)
                and no_duplicates(network.edges_as, undirected=False))
    checks.append(("edges listed once per undirected pair", dup_free))

    weights = deltabound.noise_weights(network).as_tuple()
    budget_ok = True
    identity_ok = True
    for seed in range(50):
        spec = NoiseSpec(delta_budget=0.05, weights=weights, seed=seed)
        draw = draw_noise(network, spec)
        budget_ok &= draw.weighted_norm(weights) < spec.delta_budget
        meas = measure(network, draw)
        for t, (i, l) in enumerate(network.edges_as):
            lhs = meas.d_sq_as[t] - draw.e_bias[t]
            diff = network.non_anchors[i] - meas.anchors_measured[l]
            identity_ok &= abs(lhs - diff @ diff) <= 1e-12 * (1.0 + abs(lhs))
    checks.append(("noise draws respect the budget strictly", budget_ok))
    checks.append(("anchor-edge measurement identity", identity_ok))

    meas = exact_measurements(network)
    x = network.non_anchors.ravel() + 0.1 * rng.standard_normal(2 * network.n_free)
    g = potential.gradient(x, network, meas)
    h = 1e-6
    fd_ok = True
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        fd = (potential.potential(xp, network, meas)
              - potential.potential(xm, network, meas)) / (2 * h)
        fd_ok &= abs(fd - g[k]) <= 1e-5 * (1.0 + abs(fd))
    checks.append(("analytic gradient matches finite differences", fd_ok))

    checks.append(("scenario rigidity: " + _rigidity_diagnosis(network), True))

    all_ok = all(ok for _, ok in checks)
    for name, ok in checks:
        print(f"[{'pass' if ok else 'FAIL'}] {name}")
    return EXIT_OK if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snlgame",
        description="Sensor network localization via a potential game.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-o", "--output", default=None, metavar="PATH")

    p = sub.add_parser("generate", parents=[common],
                       help="sample a scenario and write it to JSON")
    p.add_argument("n", type=int, help="number of non-anchors")
    p.add_argument("m", type=int, help="number of anchors (>= 3)")
    p.add_argument("--range", type=float, default=3.0,
                   help="sensing range (default 3)")
    p.add_argument("--box", type=float, nargs=4, default=(0.0, 0.0, 2.0, 2.0),
                   metavar=("XMIN", "YMIN", "XMAX", "YMAX"))
    p.add_argument("--allow-nonrigid", action="store_true")
    p.set_defaults(func=cmd_generate, needs_output=True)

    p = sub.add_parser("solve", parents=[common],
                       help="multi-start solve of a scenario")
    p.add_argument("scenario")
    p.add_argument("--starts", type=int, default=64)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iterations", type=int, default=300)
    p.add_argument("--dump-matrices", metavar="DIR", default=None)
    p.set_defaults(func=cmd_solve, needs_output=False)

    p = sub.add_parser("delta", parents=[common],
                       help="compute the certified noise bound")
    p.add_argument("scenario")
    p.add_argument("--delta1", type=float, default=0.1)
    p.add_argument("--starts", type=int, default=16)
    p.set_defaults(func=cmd_delta, needs_output=False)

    p = sub.add_parser("sweep", parents=[common],
                       help="noise sweep writing one CSV row per trial")
    p.add_argument("scenario")
    p.add_argument("--deltas", default="0.05,0.1,0.2,0.5,1")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--starts", type=int, default=16)
    p.add_argument("--threads", type=int, default=1)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_sweep, needs_output=False)

    p = sub.add_parser("verify", parents=[common],
                       help="run the invariant checks on a scenario")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_verify, needs_output=False)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "needs_output", False) and not args.output:
        parser.error(f"{args.command} requires -o/--output")
    try:
        return args.func(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
