"""Command-line pipeline: generate, build, cluster, report, evolve, risk, scenario.

Each stage reads its predecessors' artifacts from the configured output
directory and writes its own there, so stages are independently rerunnable.
Every artifact embeds the SHA-256 hash of the effective configuration —
as a ``config_hash`` field in JSON outputs and as a leading ``# config_hash=``
comment line in CSV outputs — and identical (inputs, config) reruns produce
byte-identical files.

Exit codes: 0 on success, 2 on input/configuration errors, 3 on numerical
failures. Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analytics, ballast, ingest, mapeq, sfn
from . import risk as risk_rules
from .config import PipelineConfig, apply_overrides, config_hash, load_config
from .errors import (ConfigError, MissingInput, NumericalError, SfnetError,
                     TooFewPeriods)

OVERRIDE_KEYS = ("seed", "out", "fraction", "tau", "restarts")


def _emit_error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}, sort_keys=True),
          file=sys.stderr)


def _require(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"{what} not found: {path}")
    return path


def _write_json(path, payload: dict, cfg_hash: str) -> None:
    payload = dict(payload)
    payload["config_hash"] = cfg_hash
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")
    print(f"wrote {path}")


def _effective_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {key: getattr(args, key, None) for key in OVERRIDE_KEYS}
    return apply_overrides(cfg, **overrides)


def _load_network(cfg: PipelineConfig) -> sfn.SpeciesFlowNetwork:
    path = _require(Path(cfg.out) / "edges.csv", "edge list artifact (run build)")
    lam = sfn.calibrate_lambda(cfg.reference_volume, cfg.reference_probability)
    return sfn.SpeciesFlowNetwork.from_edge_csv(path, lam=lam, mu=cfg.mu, rho=cfg.rho)


def _load_assignment(cfg: PipelineConfig) -> dict:
    path = _require(Path(cfg.out) / "partition.csv", "partition artifact (run cluster)")
    return mapeq.read_partition_csv(path)


def _load_partition(period_dir: Path) -> mapeq.Partition:
    assignment = mapeq.read_partition_csv(
        _require(period_dir / "partition.csv", "period partition"))
    summary = json.loads(
        _require(period_dir / "partition_summary.json", "period summary")
        .read_text(encoding="utf-8"))
    return mapeq.Partition(assignment=assignment,
                           codelength=summary["codelength"],
                           module_flow=tuple(summary["module_flow"]),
                           module_exit=tuple(summary["module_exit"]),
                           tau=summary["tau"])


# --- subcommands -------------------------------------------------------------

def cmd_generate(cfg: PipelineConfig, cfg_hash: str, args) -> int:
    try:
        sizes = tuple(int(s) for s in args.sizes.split(","))
    except ValueError:
        raise ConfigError(f"--sizes must be comma-separated integers, got {args.sizes!r}")
    spec = ingest.SyntheticSpec(sizes=sizes, leak=args.leak,
                                legs_per_vessel=args.legs_per_vessel,
                                preferential=args.preferential,
                                discharge_noise=args.noise,
                                n_discharge_events=args.discharge_events)
    ports, legs, adjacency, discharges = ingest.generate_synthetic(
        cfg.seed, sum(sizes), args.vessels, spec)

    for target, writer, records in (
            (cfg.ports, ingest.write_ports, ports),
            (cfg.voyages, ingest.write_voyages, legs),
            (cfg.adjacency, ingest.write_adjacency, adjacency),
            (cfg.discharges, ingest.write_discharges, discharges)):
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        writer(target, records)
        print(f"wrote {target}")

    manifest = {
        "seed": cfg.seed,
        "sizes": list(sizes),
        "n_ports": len(ports),
        "n_vessels": args.vessels,
        "n_legs": len(legs),
        "n_discharge_events": len(discharges),
        "n_distinct_routes": len({(leg.origin, leg.dest) for leg in legs}),
        "planted": {p.port_id: int(p.ecoregion_id[1:]) for p in ports},
    }
    _write_json(Path(cfg.out) / "generate_manifest.json", manifest, cfg_hash)
    return 0


def cmd_build(cfg: PipelineConfig, cfg_hash: str, args) -> int:
    out = Path(cfg.out)
    voyages = ingest.load_voyages(_require(cfg.voyages, "voyages file"))
    ports = ingest.load_ports(_require(cfg.ports, "ports file"))
    discharges = ingest.load_discharges(_require(cfg.discharges, "discharges file"))

    model = ballast.fit_discharge_models(discharges.records)
    lam = sfn.calibrate_lambda(cfg.reference_volume, cfg.reference_probability)
    net = sfn.build_sfn(voyages.records, model, lam=lam, mu=cfg.mu, rho=cfg.rho,
                        floor=cfg.edge_floor, ports=ingest.ports_ids(ports.records))

    net.write_edge_csv(out / "edges.csv", comment=f"config_hash={cfg_hash}")
    print(f"wrote {out / 'edges.csv'}")
    net.graph.graph["config_hash"] = cfg_hash
    net.write_graphml(out / "graph.graphml")
    print(f"wrote {out / 'graph.graphml'}")

    degrees = sfn.degree_distribution(net)
    flagged = sorted({r.strip() for r in cfg.regions.split(",") if r.strip()})
    extra = {
        "lambda": lam,
        "mu": cfg.mu,
        "rho": cfg.rho,
        "edge_floor": cfg.edge_floor,
        "registered_ports": len(ports.records),
        "legs_used": len(voyages.records),
        "degree_histogram": {str(d): c for d, c in degrees.histogram.items()},
        "degree_loglog_slope": degrees.loglog_slope,
        "flagged_regions": flagged,
        "rejected_rows": {
            "voyages": len(voyages.rejected),
            "ports": len(ports.rejected),
            "discharges": len(discharges.rejected),
        },
    }
    _write_json(out / "stats.json",
                {**sfn.network_stats(net).to_dict(), **extra}, cfg_hash)
    _write_json(out / "discharge_models.json",
                {"models": json.loads(model.to_json())}, cfg_hash)
    ingest.write_rejections(out / "rejections.csv",
                            {"voyages": voyages.rejected,
                             "ports": ports.rejected,
                             "discharges": discharges.rejected},
                            comment=f"config_hash={cfg_hash}")
    print(f"wrote {out / 'rejections.csv'}")
    return 0


def cmd_cluster(cfg: PipelineConfig, cfg_hash: str, args) -> int:
    out = Path(cfg.out)
    net = _load_network(cfg)
    flow = mapeq.stationary_flow(net, cfg.tau)
    best, per_restart = mapeq.optimize_restarts(net, flow, restarts=cfg.restarts,
                                                seed=cfg.seed, tau=cfg.tau)
    best.write_csv(out / "partition.csv", comment=f"config_hash={cfg_hash}")
    print(f"wrote {out / 'partition.csv'}")
    summary = best.summary_dict()
    summary.update({
        "seed": cfg.seed,
        "restarts": cfg.restarts,
        "restart_codelengths": per_restart,
        "n_nodes": net.n_nodes,
        "n_edges": net.n_edges,
    })
    _write_json(out / "partition_summary.json", summary, cfg_hash)
    return 0


def cmd_report(cfg: PipelineConfig, cfg_hash: str, args) -> int:
    out = Path(cfg.out)
    net = _load_network(cfg)
    assignment = _load_assignment(cfg)
    voyages = ingest.load_voyages(_require(cfg.voyages, "voyages file"))

    report = analytics.flow_report(net, assignment, top_k=cfg.top_k)
    _write_json(out / "flow_report.json", report.to_dict(), cfg_hash)
    inter = analytics.top_inter_cluster_edges(net, assignment, k=cfg.top_edges)
    _write_json(out / "inter_cluster_edges.json", inter.to_dict(), cfg_hash)
    vessel = analytics.vessel_type_stats(voyages.records, assignment)
    _write_json(out / "vessel_type_stats.json", vessel.to_dict(), cfg_hash)
    return 0


def cmd_evolve(cfg: PipelineConfig, cfg_hash: str, args) -> int:
    if len(args.periods) < 2:
        raise TooFewPeriods(f"need at least 2 period directories, got {len(args.periods)}")
    partitions = [_load_partition(Path(d)) for d in args.periods]
    evolution = analytics.match_clusters(partitions)
    payload = evolution.to_dict()
    payload["period_dirs"] = [str(d) for d in args.periods]
    _write_json(Path(cfg.out) / "evolution.json", payload, cfg_hash)
    return 0


def cmd_risk(cfg: PipelineConfig, cfg_hash: str, args) -> int:
    out = Path(cfg.out)
    ports = ingest.load_ports(_require(cfg.ports, "ports file"))
    adjacency, adjacency_rejected = ingest.load_adjacency(
        _require(cfg.adjacency, "ecoregion adjacency file"))

    records = ports.records
    if args.module is not None:
        assignment = _load_assignment(cfg)
        selected = {node for node, m in assignment.items() if m == args.module}
        records = [p for p in records if p.port_id in selected]
        if not records:
            raise MissingInput(
                f"module {args.module} has no ports present in {cfg.ports}")

    risk_net = risk_rules.build_risk_network(records, adjacency)
    risk_net.write_csv(out / "risk_edges.csv", comment=f"config_hash={cfg_hash}")
    print(f"wrote {out / 'risk_edges.csv'}")
    sub = risk_rules.sub_cluster(risk_net, seed=cfg.seed, tau=cfg.tau,
                                 restarts=cfg.restarts)
    sub.write_csv(out / "subclusters.csv", comment=f"config_hash={cfg_hash}")
    print(f"wrote {out / 'subclusters.csv'}")

    summary = sub.to_dict()
    summary.update({
        "module": args.module,
        "n_risk_edges": risk_net.n_edges,
        "coverage": risk_net.coverage,
        "rejected_adjacency_rows": len(adjacency_rejected),
    })
    _write_json(out / "risk_summary.json", summary, cfg_hash)
    return 0


def cmd_scenario(cfg: PipelineConfig, cfg_hash: str, args) -> int:
    net = _load_network(cfg)
    if args.kind == "degree":
        result = analytics.remove_top_degree(net, cfg.fraction)
    else:
        assignment = _load_assignment(cfg)
        inter = analytics.top_inter_cluster_edges(net, assignment, k=cfg.top_edges)
        result = analytics.remove_edges(
            net, [(origin, dest) for origin, dest, *_ in inter.edges],
            partition=assignment)
    payload = result.to_dict()
    payload["kind"] = args.kind
    _write_json(Path(cfg.out) / "scenario.json", payload, cfg_hash)
    return 0


# --- argument parsing --------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="config file (flat 'key = value' lines)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--out", help="override the artifact directory")
    common.add_argument("--fraction", type=float,
                        help="override the scenario removal fraction")
    common.add_argument("--tau", type=float, help="override the teleportation rate")
    common.add_argument("--restarts", type=int,
                        help="override the optimizer restart count")

    parser = argparse.ArgumentParser(
        prog="sfnet",
        description="Species-introduction flow networks from shipping records")
    parser.set_defaults(func=None)
    sub = parser.add_subparsers(dest="command")

    gen = sub.add_parser("generate", parents=[common],
                         help="write a synthetic planted-cluster data set")
    gen.add_argument("--sizes", default="20,20",
                     help="comma-separated planted cluster sizes")
    gen.add_argument("--vessels", type=int, default=12)
    gen.add_argument("--leak", type=float, default=0.05,
                     help="fraction of voyages crossing clusters")
    gen.add_argument("--legs-per-vessel", type=int, default=8,
                     dest="legs_per_vessel")
    gen.add_argument("--preferential", action="store_true",
                     help="attach voyages preferentially to busy ports")
    gen.add_argument("--noise", type=float, default=0.0,
                     help="uniform noise half-width on the discharge law")
    gen.add_argument("--discharge-events", type=int, default=200,
                     dest="discharge_events")
    gen.set_defaults(func=cmd_generate)

    build = sub.add_parser("build", parents=[common],
                           help="fit discharge models and build the flow network")
    build.set_defaults(func=cmd_build)

    cluster = sub.add_parser("cluster", parents=[common],
                             help="decompose the network into flow modules")
    cluster.set_defaults(func=cmd_cluster)

    report = sub.add_parser("report", parents=[common],
                            help="flow shares, boundary edges, vessel-type stats")
    report.set_defaults(func=cmd_report)

    evolve = sub.add_parser("evolve", parents=[common],
                            help="match clusters across period directories")
    evolve.add_argument("periods", nargs="+",
                        help="two or more directories holding partition artifacts")
    evolve.set_defaults(func=cmd_evolve)

    risk = sub.add_parser("risk", parents=[common],
                          help="invasion-risk network and environmental sub-clusters")
    risk.add_argument("--module", type=int, default=None,
                      help="restrict to ports of one flow module (default: all ports)")
    risk.set_defaults(func=cmd_risk)

    scenario = sub.add_parser("scenario", parents=[common],
                              help="edge-removal what-if experiments")
    scenario.add_argument("--kind", choices=("degree", "edges"), default="degree",
                          help="remove top-degree ports' edges or top boundary edges")
    scenario.set_defaults(func=cmd_scenario)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.func is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        cfg = _effective_config(args)
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        return args.func(cfg, config_hash(cfg), args)
    except NumericalError as exc:
        _emit_error(exc.kind, str(exc))
        return 3
    except SfnetError as exc:
        _emit_error(exc.kind, str(exc))
        return 2
    except FileNotFoundError as exc:
        _emit_error("MissingInput", str(exc))
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
