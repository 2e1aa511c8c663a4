"""Command-line interface.

Subcommands:
  agx gt          enumerate the ground truth for a scenario or input files
  agx run         run a (seeded, multi-mode) experiment from a config file
  agx q7          descending risk-band analysis on one steering session
  agx bench-grid  reduced experiment grid over topologies/distributions
  agx scenario    generate and write network/inventory JSON files
  agx serve       start the session service

Configs are TOML or JSON; `agx serve` also honors the AGX_CONFIG env var.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import harness
from .harness import ExperimentConfig, GtCaps, enumerate_ground_truth, load_inputs
from .scenario import (
    ScenarioSpec,
    generate_scenario,
    save_inventory,
    save_network,
)


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if path.suffix == ".toml":
        return tomllib.loads(path.read_text())
    return json.loads(path.read_text())


def _scenario_from_args(args) -> ScenarioSpec:
    topo = {"kind": args.topology, "p": args.p, "m": args.m}
    return ScenarioSpec.from_dict(
        {
            "hosts": args.hosts,
            "topology": topo,
            "vulns_per_host": args.vulns_per_host,
            "distribution": {"kind": args.distribution},
            "heterogeneity": args.heterogeneity,
            "seed": args.seed,
        }
    )


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hosts", type=int, default=8)
    p.add_argument("--topology", choices=("mesh", "random", "power_law"), default="random")
    p.add_argument("--p", type=float, default=0.3, help="random-topology edge probability")
    p.add_argument("--m", type=int, default=2, help="power-law out-links per new node")
    p.add_argument("--vulns-per-host", type=int, default=3)
    p.add_argument(
        "--distribution", choices=("uniform", "pareto", "binomial", "poisson"), default="uniform"
    )
    p.add_argument("--heterogeneity", type=int, choices=(0, 25, 50, 75, 100), default=50)
    p.add_argument("--seed", type=int, default=0)


def _inputs_from_args(args):
    if args.network and args.inventory:
        cfg = ExperimentConfig(network_file=args.network, inventory_file=args.inventory)
        return load_inputs(cfg)
    return generate_scenario(_scenario_from_args(args))


def cmd_gt(args) -> int:
    net, inv = _inputs_from_args(args)
    caps = GtCaps(max_nodes=args.max_nodes, max_paths=args.max_paths)
    gt = enumerate_ground_truth(net, inv, caps)
    report = {
        "hosts": len(net.nodes),
        "edges": len(net.edges),
        "paths": len(gt),
        "exhaustive": gt.exhaustive,
        "min_length": gt.min_length() if len(gt) else None,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.out:
        payload = {
            "paths": [
                {"signature": sig, "likelihood": f.likelihood, "impact": f.impact,
                 "risk": f.risk, "length": f.length}
                for sig, f in zip(gt.signatures, gt.features)
            ],
            "exhaustive": gt.exhaustive,
        }
        Path(args.out).write_text(json.dumps(payload, sort_keys=True))
    return 0 if gt.exhaustive else 1


def cmd_run(args) -> int:
    cfg = ExperimentConfig.from_dict(load_config_file(args.config))
    result = harness.run_experiment(cfg)
    out = Path(args.out)
    result.write(out)
    print(f"wrote {out / 'metrics.csv'} ({len(result.rows)} rows)")
    print(f"wrote {out / 'summary.json'}")
    return 0


def cmd_q7(args) -> int:
    cfg = ExperimentConfig.from_dict(load_config_file(args.config))
    net, inv = load_inputs(cfg)
    gt = enumerate_ground_truth(net, inv, cfg.gt_caps(), strat=cfg.strategy())
    report = harness.run_q7(net, inv, cfg, gt, seed=cfg.seeds[0])
    out = Path(args.out) if args.out else None
    text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "q7_report.json").write_text(text + "\n")
        print(f"wrote {out / 'q7_report.json'}")
    else:
        print(text)
    return 0


def cmd_bench_grid(args) -> int:
    cells = None
    if args.config:
        cells = [ExperimentConfig.from_dict(c) for c in load_config_file(args.config)["cells"]]
    info = harness.run_bench_grid(args.out, cells)
    print(json.dumps(info, sort_keys=True))
    return 0


def cmd_scenario(args) -> int:
    net, inv = generate_scenario(_scenario_from_args(args))
    save_network(net, args.out_network)
    save_inventory(inv, args.out_inventory)
    print(f"wrote {args.out_network} ({len(net.nodes)} hosts, {len(net.edges)} edges)")
    print(f"wrote {args.out_inventory} ({sum(len(v) for v in inv.by_host.values())} vulns)")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    settings: dict = {}
    config_path = args.config or os.environ.get("AGX_CONFIG")
    if config_path:
        settings = load_config_file(config_path)
    data_dir = args.data_dir or settings.get("data_dir", "./agx-data")
    port = args.port or int(settings.get("port", 8080))
    app = create_app(data_dir, checkpoint_every=int(settings.get("checkpoint_every", 50)))
    uvicorn.run(app, host=args.host or settings.get("host", "127.0.0.1"), port=port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gt", help="enumerate ground-truth attack paths")
    _add_scenario_flags(p)
    p.add_argument("--network", help="network JSON file (with --inventory)")
    p.add_argument("--inventory", help="inventory JSON file")
    p.add_argument("--max-nodes", type=int, default=10)
    p.add_argument("--max-paths", type=int, default=2_000_000)
    p.add_argument("--out", help="write the full path list as JSON")
    p.set_defaults(func=cmd_gt)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("q7", help="risk-band retrieval analysis")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_q7)

    p = sub.add_parser("bench-grid", help="run the reduced experiment grid")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="optional JSON/TOML with a 'cells' list")
    p.set_defaults(func=cmd_bench_grid)

    p = sub.add_parser("scenario", help="generate network/inventory files")
    _add_scenario_flags(p)
    p.add_argument("--out-network", required=True)
    p.add_argument("--out-inventory", required=True)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("serve", help="start the session service")
    p.add_argument("--port", type=int)
    p.add_argument("--host")
    p.add_argument("--data-dir")
    p.add_argument("--config", help="TOML/JSON settings (or AGX_CONFIG env var)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
