"""Command-line entry point and experiment orchestration.

Commands: stability, simulate, generate, reconstruct, pathway (nodes|edges),
cycles, fig3.  Tabular outputs are CSV, summaries JSON; every run writes its
fully resolved configuration next to its artifacts so it can be reproduced
bit for bit.  Randomized commands require an explicit --seed; replica k of
an ensemble always runs at seed + k.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import cycles as cyc
from . import dynamics, generators, model, pathways, reconstruct
from .errors import LevnetError, PathwayError
from .spectral import leverage_bounds, spectral_radius


def _fail(kind: str, message: str, **extra) -> int:
    payload = {"error": kind, "message": message}
    payload.update(extra)
    print(json.dumps(payload), file=sys.stderr)
    return 1


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=str)
        fh.write("\n")


def _prepare_out(args, command: str) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resolved = {k: v for k, v in vars(args).items()
                if k not in ("func", "config") and v is not None}
    resolved["command"] = command
    _write_json(out / "config.json", resolved)
    return out


def _parse_curve(spec: str):
    """Parse linear | power:ALPHA | exponential:BETA."""
    name, _, param = spec.partition(":")
    name = name.lower()
    if name in ("linear", "lin"):
        return model.DefaultCurve.linear()
    if name in ("power", "pow"):
        return model.DefaultCurve.power(float(param or 2.0))
    if name in ("exponential", "exp"):
        return model.DefaultCurve.exponential(float(param or 2.0))
    raise ValueError(f"unknown curve spec {spec!r}")


def _parse_weights(spec: str):
    """Parse exp:MEAN | const:VALUE | uniform:LO,HI."""
    name, _, param = spec.partition(":")
    name = name.lower()
    if name in ("exp", "exponential"):
        return generators.exponential_weights(float(param))
    if name in ("const", "constant"):
        return generators.constant_weights(float(param or 1.0))
    if name in ("uniform", "uni"):
        lo, hi = (float(x) for x in param.split(","))
        return generators.uniform_weights(lo, hi)
    raise ValueError(f"unknown weight spec {spec!r}")


def _load_leverage(args):
    """Leverage matrix from --leverage, or --exposures with --sheets."""
    if args.leverage:
        g = generators.read_edge_list(args.leverage)
        return g.to_matrix(), None
    if not args.exposures or not args.sheets:
        raise ValueError("need either --leverage, or --exposures with --sheets")
    sheets = model.load_balance_sheets(args.sheets)
    g = generators.read_edge_list(args.exposures, n=len(sheets))
    exposures = g.to_matrix()
    model.check_exposures_consistent(exposures, sheets)
    return model.build_leverage(exposures, sheets), sheets


def _recovery_vector(args, n: int):
    if args.recovery_csv:
        values = np.loadtxt(args.recovery_csv, delimiter=",", ndmin=1)
        return np.asarray(values, dtype=np.float64)
    return np.full(n, args.recovery)


# ---------------------------------------------------------------------------
# commands

def cmd_stability(args) -> int:
    out = _prepare_out(args, "stability")
    lam, _ = _load_leverage(args)
    lam_hat = model.adjust_recovery(lam, _recovery_vector(args, lam.shape[0]))
    curve = _parse_curve(args.curve)
    label = dynamics.classify(lam_hat, curve, tol=args.tol)
    lo, hi = leverage_bounds(lam)
    payload = {
        "regime": label.regime,
        "lambda_hat_max": label.lambda_hat_max,
        "lambda_tilde_max": label.lambda_tilde_max,
        "leverage_bounds": {"min": lo, "max": hi},
        "n": lam.shape[0],
    }
    _write_json(out / "stability.json", payload)
    print(json.dumps(payload, indent=2))
    return 0


def cmd_simulate(args) -> int:
    out = _prepare_out(args, "simulate")
    lam, _ = _load_leverage(args)
    n = lam.shape[0]
    lam_hat = model.adjust_recovery(lam, _recovery_vector(args, n))
    curve = _parse_curve(args.curve)
    shock = np.full(n, args.shock)
    result = dynamics.simulate(lam_hat, curve, shock, tol=args.tol,
                               max_steps=args.max_steps, clip=not args.unclipped,
                               record=args.dump_trajectory)
    payload = {"outcome": result.outcome, "steps": result.steps,
               "final_max_loss": float(result.final.max()),
               "defaulted": int((result.final >= 1.0).sum())}
    _write_json(out / "outcome.json", payload)
    if args.dump_trajectory:
        dynamics.write_trajectory_csv(result, out / "trajectory.csv")
    print(json.dumps(payload))
    return 0


def cmd_generate(args) -> int:
    out = _prepare_out(args, "generate")
    sampler = _parse_weights(args.weights) if args.weights else None
    kind = args.ensemble
    if kind == "er":
        g = generators.gen_erdos_renyi(args.n, args.p, sampler, seed=args.seed)
    elif kind == "regular":
        g = generators.gen_regular_random(
            args.n, args.k, reciprocity_threshold=args.reciprocity,
            weight_sampler=sampler, seed=args.seed)
    elif kind == "scalefree":
        g = generators.gen_scale_free(args.n, mean_leverage=args.mean_leverage,
                                      seed=args.seed)
    elif kind == "coreperiphery":
        cp = generators.CorePeripherySpec(
            n=args.n, core_fraction=args.core_fraction, rho_cc=args.rho_cc,
            rho_cp=args.rho_cp, rho_pc=args.rho_pc, rho_pp=args.rho_pp)
        g = generators.gen_core_periphery(cp, weight_sampler=sampler,
                                          seed=args.seed)
    elif kind == "dag":
        g = generators.gen_random_dag(args.n, args.density, sampler,
                                      seed=args.seed)
    else:
        raise ValueError(f"unknown ensemble {kind!r}")
    generators.write_edge_list(g, out / "graph.csv", out / "graph_meta.json")
    print(f"wrote {g.edge_count} edges for n={g.n} to {out / 'graph.csv'}")
    return 0


def cmd_reconstruct(args) -> int:
    out = _prepare_out(args, "reconstruct")
    sheets = model.load_balance_sheets(args.sheets)
    n = len(sheets)
    g = generators.read_edge_list(args.support, n=n)
    problem = reconstruct.RasProblem(
        support=g.to_matrix() > 0,
        row_targets=np.array([s.interbank_assets for s in sheets]),
        col_targets=np.array([s.interbank_liabilities for s in sheets]),
        tol=args.tol, max_sweeps=args.max_sweeps)
    sol = reconstruct.ras_balance(problem)
    generators.write_edge_list(
        generators.WeightedDigraph.from_matrix(sol.matrix),
        out / "exposures.csv")
    payload = {"sweeps": sol.sweeps, "residual": sol.residual, "n": n}
    _write_json(out / "reconstruct.json", payload)
    print(json.dumps(payload))
    return 0


def cmd_cycles(args) -> int:
    out = _prepare_out(args, "cycles")
    lam, _ = _load_leverage(args)
    report = cyc.find_unstable_cycles(lam, k_max=args.k_max)
    _write_json(out / "witnesses.json", report.to_dict())
    print(json.dumps({"witnesses": len(report.witnesses),
                      "truncated": report.truncated}))
    return 0


def cmd_fig3(args) -> int:
    out = _prepare_out(args, "fig3")
    if args.omega is None:
        lo, hi = cyc.fig3_omega_window()
        omega = 0.5 * (lo + hi)
    else:
        omega = args.omega
    panels = cyc.build_fig3_sequence(omega)
    table = []
    for name, panel in zip("abcde", panels):
        lam = spectral_radius(panel.to_matrix())
        table.append({"panel": name, "lambda_max": lam,
                      "regime": pathways.regime_from_lambda(lam)})
        generators.write_edge_list(panel, out / f"panel_{name}.csv")
    _write_json(out / "fig3.json", {"omega": omega, "panels": table})
    print(json.dumps({"omega": omega,
                      "lambda_max": [row["lambda_max"] for row in table]}))
    return 0


# ---------------------------------------------------------------------------
# pathway ensembles

def _node_pathway_replica(task):
    kind, cfg, seed = task
    sampler = _parse_weights(cfg["weights"]) if cfg.get("weights") else None
    if kind == "er":
        factory = lambda s: generators.gen_erdos_renyi(
            cfg["n0"], cfg["p"], sampler, seed=s)
        initial, _ = pathways.sample_stable_graph(factory, seed,
                                                  min_leverage=cfg["min_leverage"])
        return pathways.grow_er_pathway(initial, cfg["steps"], seed,
                                        weight_sampler=sampler, p=cfg["p"],
                                        stop_when_unstable=cfg["stop"])
    if kind == "regular":
        factory = lambda s: generators.gen_regular_random(
            cfg["n0"], cfg["k"], weight_sampler=sampler, seed=s)
        initial, _ = pathways.sample_stable_graph(factory, seed,
                                                  min_leverage=cfg["min_leverage"])
        return pathways.grow_rrg_pathway(initial, cfg["steps"], seed,
                                         k=cfg["k"], stop_when_unstable=cfg["stop"])
    if kind == "scalefree":
        factory = lambda s: generators.gen_scale_free(
            cfg["n0"], mean_leverage=cfg["mean_leverage"], seed=s)
        initial, _ = pathways.sample_stable_graph(factory, seed,
                                                  min_leverage=cfg["min_leverage"])
        return pathways.grow_sf_pathway(initial, cfg["steps"], seed,
                                        stop_when_unstable=cfg["stop"])
    if kind == "coreperiphery":
        cp = generators.CorePeripherySpec(
            n=cfg["n0"], core_fraction=cfg["core_fraction"],
            rho_cc=cfg["rho_cc"], rho_cp=cfg["rho_cp"], rho_pc=cfg["rho_pc"],
            rho_pp=cfg["rho_pp"])
        sheets = model.synthetic_balance_sheets(cfg["n"], cfg["mean_leverage"],
                                                seed=seed)
        for attempt in range(cfg["sequence_attempts"]):
            seq = pathways.grow_cp_sequence(cp, cfg["n"], seed + 7919 * attempt)
            try:
                return pathways.shrink_cp_pathway(seq, sheets, seed,
                                                  stop_when_stable=cfg["stop"])
            except (LevnetError, ValueError):
                continue
        raise PathwayError(
            f"no unstable RAS-weighted core-periphery sequence found in "
            f"{cfg['sequence_attempts']} attempts (seed {seed})")
    raise ValueError(f"unknown node-pathway ensemble {kind!r}")


def _edge_pathway_replica(task):
    cfg, seed = task
    sheets = model.load_balance_sheets(cfg["sheets"]) if cfg.get("sheets") \
        else model.synthetic_balance_sheets(cfg["n"], cfg["mean_leverage"],
                                            seed=cfg["sheet_seed"])
    records, _ = pathways.edge_addition_trajectory(
        sheets, seed, initial_density=cfg["initial_density"])
    return records


def _run_replicas(worker, tasks, jobs: int):
    if jobs <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


def cmd_pathway_nodes(args) -> int:
    out = _prepare_out(args, "pathway nodes")
    cfg = {"n0": args.n0, "p": args.p, "k": args.k, "steps": args.steps,
           "weights": args.weights, "min_leverage": args.min_leverage,
           "mean_leverage": args.mean_leverage, "stop": not args.no_stop,
           "n": args.n, "core_fraction": args.core_fraction,
           "rho_cc": args.rho_cc, "rho_cp": args.rho_cp, "rho_pc": args.rho_pc,
           "rho_pp": args.rho_pp, "sequence_attempts": args.sequence_attempts}
    tasks = [(args.ensemble, cfg, args.seed + k) for k in range(args.replicas)]
    runs = _run_replicas(_node_pathway_replica, tasks, args.jobs)
    for k, records in enumerate(runs):
        pathways.write_records_csv(records, out / f"run_{k:03d}.csv")
    summary = pathways.summarize_trajectories(runs)
    _write_json(out / "summary.json", summary)
    print(json.dumps({"runs": summary["runs"], "crossed": summary["crossed"],
                      "valid_pathways": summary["valid_pathways"]}))
    return 0


def cmd_pathway_edges(args) -> int:
    out = _prepare_out(args, "pathway edges")
    cfg = {"sheets": args.sheets, "n": args.n,
           "mean_leverage": args.mean_leverage, "sheet_seed": args.seed,
           "initial_density": args.initial_density}
    tasks = [(cfg, args.seed + k) for k in range(args.replicas)]
    runs = _run_replicas(_edge_pathway_replica, tasks, args.jobs)
    for k, records in enumerate(runs):
        pathways.write_records_csv(records, out / f"run_{k:03d}.csv")
    summary = pathways.summarize_trajectories(runs)
    _write_json(out / "summary.json", summary)
    print(json.dumps({"runs": summary["runs"], "crossed": summary["crossed"],
                      "median_first_crossing_density":
                          summary["median_first_crossing_density"]}))
    return 0


# ---------------------------------------------------------------------------
# argument wiring

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levnet",
        description="Interbank leverage-network stability experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seeded=False):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--config", type=Path, default=None,
                       help="JSON file with defaults; flags override it")
        if seeded:
            p.add_argument("--seed", type=int, required=True)

    def add_leverage_inputs(p):
        p.add_argument("--leverage", help="edge-list CSV of leverage ratios")
        p.add_argument("--exposures", help="edge-list CSV of nominal exposures")
        p.add_argument("--sheets", help="balance-sheet CSV")
        p.add_argument("--recovery", type=float, default=0.0)
        p.add_argument("--recovery-csv", dest="recovery_csv", default=None)
        p.add_argument("--curve", default="linear",
                       help="linear | power:A | exponential:B")

    p = sub.add_parser("stability", help="classify a network's regime")
    add_common(p)
    add_leverage_inputs(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("simulate", help="run the distress dynamics")
    add_common(p)
    add_leverage_inputs(p)
    p.add_argument("--shock", type=float, default=1e-3)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    p.add_argument("--unclipped", action="store_true",
                   help="diagnostic mode without the h=1 ceiling")
    p.add_argument("--dump-trajectory", dest="dump_trajectory",
                   action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="draw a random graph ensemble member")
    add_common(p, seeded=True)
    p.add_argument("--ensemble", required=True,
                   choices=["er", "regular", "scalefree", "coreperiphery",
                            "dag"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--density", type=float, default=0.1)
    p.add_argument("--reciprocity", type=float, default=0.5)
    p.add_argument("--mean-leverage", dest="mean_leverage", type=float,
                   default=2.0)
    p.add_argument("--core-fraction", dest="core_fraction", type=float,
                   default=0.2)
    p.add_argument("--rho-cc", dest="rho_cc", type=float, default=0.7)
    p.add_argument("--rho-cp", dest="rho_cp", type=float, default=0.2)
    p.add_argument("--rho-pc", dest="rho_pc", type=float, default=0.2)
    p.add_argument("--rho-pp", dest="rho_pp", type=float, default=0.05)
    p.add_argument("--weights", default=None,
                   help="exp:MEAN | const:V | uniform:LO,HI")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("reconstruct", help="RAS exposures from marginals")
    add_common(p)
    p.add_argument("--sheets", required=True)
    p.add_argument("--support", required=True,
                   help="edge-list CSV fixing the admissible exposures")
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int,
                   default=reconstruct.DEFAULT_MAX_SWEEPS)
    p.set_defaults(func=cmd_reconstruct, tol=reconstruct.DEFAULT_RAS_TOL)

    p = sub.add_parser("cycles", help="unstable-cycle witnesses")
    add_common(p)
    add_leverage_inputs(p)
    p.add_argument("--k-max", dest="k_max", type=int, default=8)
    p.set_defaults(func=cmd_cycles)

    p = sub.add_parser("fig3", help="toy stability-oscillation sequence")
    add_common(p)
    p.add_argument("--omega", type=float, default=None,
                   help="edge weight; default picks the oscillation window")
    p.set_defaults(func=cmd_fig3)

    p = sub.add_parser("pathway", help="pathway-towards-instability drivers")
    psub = p.add_subparsers(dest="mode", required=True)

    pn = psub.add_parser("nodes", help="market-integration experiments")
    add_common(pn, seeded=True)
    pn.add_argument("--ensemble", required=True,
                    choices=["er", "regular", "scalefree", "coreperiphery"])
    pn.add_argument("--replicas", type=int, default=10)
    pn.add_argument("--jobs", type=int, default=1)
    pn.add_argument("--n0", type=int, default=20,
                    help="initial graph size (scalefree: 1000)")
    pn.add_argument("--steps", type=int, default=200)
    pn.add_argument("--p", type=float, default=0.12)
    pn.add_argument("--k", type=int, default=10)
    pn.add_argument("--weights", default="exp:0.79")
    pn.add_argument("--min-leverage", dest="min_leverage", type=float,
                    default=1.0)
    pn.add_argument("--mean-leverage", dest="mean_leverage", type=float,
                    default=2.0)
    pn.add_argument("--no-stop", dest="no_stop", action="store_true",
                    help="keep growing after the first crossing")
    pn.add_argument("--n", type=int, default=60,
                    help="core-periphery: final size matched to the sheets")
    pn.add_argument("--core-fraction", dest="core_fraction", type=float,
                    default=0.2)
    pn.add_argument("--rho-cc", dest="rho_cc", type=float, default=0.7)
    pn.add_argument("--rho-cp", dest="rho_cp", type=float, default=0.2)
    pn.add_argument("--rho-pc", dest="rho_pc", type=float, default=0.2)
    pn.add_argument("--rho-pp", dest="rho_pp", type=float, default=0.05)
    pn.add_argument("--sequence-attempts", dest="sequence_attempts", type=int,
                    default=50)
    pn.set_defaults(func=cmd_pathway_nodes)

    pe = psub.add_parser("edges", help="diversification experiment")
    add_common(pe, seeded=True)
    pe.add_argument("--replicas", type=int, default=100)
    pe.add_argument("--jobs", type=int, default=1)
    pe.add_argument("--sheets", default=None,
                    help="balance-sheet CSV; default draws synthetic sheets")
    pe.add_argument("--n", type=int, default=50)
    pe.add_argument("--mean-leverage", dest="mean_leverage", type=float,
                    default=2.0)
    pe.add_argument("--initial-density", dest="initial_density", type=float,
                    default=0.15)
    pe.set_defaults(func=cmd_pathway_edges)

    return parser


def _apply_config_file(args, argv) -> None:
    """Fill unset args from --config JSON; explicit flags win."""
    if not getattr(args, "config", None):
        return
    with open(args.config, encoding="utf-8") as fh:
        defaults = json.load(fh)
    given = {a.split("=")[0].lstrip("-").replace("-", "_")
             for a in argv if a.startswith("--")}
    for key, value in defaults.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and attr not in given:
            setattr(args, attr, value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_file(args, argv)
        return args.func(args)
    except LevnetError as exc:
        return _fail(type(exc).__name__, str(exc))
    except (ValueError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
