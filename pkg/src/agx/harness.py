"""Ground-truth oracle, experiment runner, and analysis reports.

The ground truth enumerates every simple attack path (depth-first over node
sequences crossed with per-step vulnerability choices) under explicit caps.
Experiments replay seeded engine runs per mode and export one CSV row per
seed and iteration plus a JSON summary with cross-seed aggregates.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dtree import Hyperparams
from .engine import Engine
from .generator import IndexedAttackGraph, WalkParams
from .model import ReachabilityGraph, VulnerabilityInventory, path_signature
from .query import (
    AnalysisDirective,
    QueryAst,
    band_query,
    evaluate,
    parse_query,
    preset,
    PRESET_NAMES,
    serialize_query,
)
from .risk import AggregationStrategy, PathFeatures
from .scenario import ScenarioSpec, generate_scenario, load_inventory, load_network
from .stats import Ecdf, ks_distance, significance
from .steering import SteeringParams

CSV_COLUMNS = (
    "seed", "iter", "mode", "new_paths", "total_paths",
    "ks_likelihood", "ks_impact", "stability_likelihood", "stability_impact",
    "precision", "recall", "phase", "steering_active", "converged",
)

MODE_RANDOM = "random"
MODE_STEERED = "steered"


@dataclass(frozen=True)
class GtCaps:
    max_nodes: int = 10
    max_paths: int = 2_000_000


class GtInfeasibleError(RuntimeError):
    pass


class _CapExceeded(Exception):
    pass


@dataclass
class GroundTruth:
    """Every simple attack path of a scenario, with precomputed features."""

    signatures: tuple[str, ...]
    features: tuple[PathFeatures, ...]
    exhaustive: bool
    entries: tuple[str, ...]

    def __post_init__(self):
        self.index = {sig: i for i, sig in enumerate(self.signatures)}
        self._ecdfs: dict[str, Ecdf] = {}

    def __len__(self) -> int:
        return len(self.signatures)

    @property
    def signature_set(self) -> frozenset[str]:
        return frozenset(self.signatures)

    def ecdf(self, feature: str) -> Ecdf:
        if feature not in self._ecdfs:
            values = [getattr(f, feature) for f in self.features]
            self._ecdfs[feature] = Ecdf(values)
        return self._ecdfs[feature]

    def relevant_signatures(self, query: QueryAst) -> frozenset[str]:
        return frozenset(
            sig for sig, f in zip(self.signatures, self.features) if evaluate(query, f)
        )

    def min_length(self) -> int:
        return min(f.length for f in self.features)


def enumerate_ground_truth(
    net: ReachabilityGraph,
    inv: VulnerabilityInventory,
    caps: GtCaps = GtCaps(),
    entries: tuple[str, ...] | None = None,
    strat: AggregationStrategy = AggregationStrategy(),
) -> GroundTruth:
    """Exhaustive DFS enumeration; aborts flagged non-exhaustive at the path cap."""
    if len(net.nodes) > caps.max_nodes:
        raise GtInfeasibleError(
            f"{len(net.nodes)} hosts exceed the ground-truth cap of {caps.max_nodes}"
        )
    ix = IndexedAttackGraph(net, inv)
    entry_idx = ix.entry_indices(entries)

    signatures: list[str] = []
    features: list[PathFeatures] = []
    exhaustive = True

    indptr, succ, vptr = ix.indptr, ix.succ, ix.vptr
    on_path = [False] * ix.n_hosts

    def extend(seq: list[int], rows: list[int]) -> None:
        if len(seq) >= 2:
            if len(signatures) >= caps.max_paths:
                raise _CapExceeded
            path = ix.path_from_rows(seq, rows)
            signatures.append(path_signature(path))
            features.append(ix.features_for_rows(rows, strat))
        cur = seq[-1]
        for k in range(int(indptr[cur]), int(indptr[cur + 1])):
            nxt = int(succ[k])
            if on_path[nxt]:
                continue
            on_path[nxt] = True
            seq.append(nxt)
            for row in range(int(vptr[nxt]), int(vptr[nxt + 1])):
                rows.append(row)
                extend(seq, rows)
                rows.pop()
            seq.pop()
            on_path[nxt] = False

    try:
        for e in entry_idx:
            e = int(e)
            on_path[e] = True
            extend([e], [])
            on_path[e] = False
    except _CapExceeded:
        exhaustive = False

    return GroundTruth(
        signatures=tuple(signatures),
        features=tuple(features),
        exhaustive=exhaustive,
        entries=tuple(ix.host_ids[int(i)] for i in entry_idx),
    )


# -- experiment configuration -------------------------------------------------


RUN_UNTIL_CHOICES = ("budget", "complete", "converged")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioSpec | None = None
    network_file: str | None = None
    inventory_file: str | None = None
    mode: str = "both"           # random | steered | both
    query: str | None = None     # query text or a preset name (Q2..Q6)
    budget: int = 1000
    seeds: tuple[int, ...] = (0,)
    threshold: float = 0.1
    alpha: float = 0.05
    run_until: str = "complete"  # budget | complete | converged
    evaluate: bool = True
    # walk parameters
    stop_probability: float = 0.15
    batch_size: int = 100
    max_length: int | None = None
    entry_nodes: tuple[str, ...] | None = None
    # feature aggregation
    likelihood_agg: str = "min"
    impact_agg: str = "max"
    # steering parameters
    epsilon_explore: float = 0.1
    breakdown_window: int = 10
    precision_floor: float = 0.3
    quiet_horizon: int = 20
    # decision-tree hyperparameters
    max_depth: int = 8
    min_samples_leaf: int = 5
    min_training_size: int = 100
    min_class_count: int = 10
    # ground-truth caps
    gt_max_nodes: int = 10
    gt_max_paths: int = 2_000_000
    phase_window: int = 10

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if self.mode not in (MODE_RANDOM, MODE_STEERED, "both"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.run_until not in RUN_UNTIL_CHOICES:
            raise ValueError(f"run_until must be one of {RUN_UNTIL_CHOICES}")

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "scenario" in data and data["scenario"] is not None:
            data["scenario"] = ScenarioSpec.from_dict(data["scenario"])
        if "seeds" in data:
            data["seeds"] = tuple(int(s) for s in data["seeds"])
        if "entry_nodes" in data and data["entry_nodes"] is not None:
            data["entry_nodes"] = tuple(data["entry_nodes"])
        return ExperimentConfig(**data)

    def walk_params(self, seed: int) -> WalkParams:
        return WalkParams(
            stop_probability=self.stop_probability,
            batch_size=self.batch_size,
            max_length=self.max_length,
            entry_nodes=self.entry_nodes,
            seed=seed,
        )

    def strategy(self) -> AggregationStrategy:
        return AggregationStrategy(self.likelihood_agg, self.impact_agg)

    def steering_params(self) -> SteeringParams:
        return SteeringParams(
            epsilon_explore=self.epsilon_explore,
            window=self.breakdown_window,
            precision_floor=self.precision_floor,
            quiet_horizon=self.quiet_horizon,
        )

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            min_training_size=self.min_training_size,
            min_class_count=self.min_class_count,
        )

    def gt_caps(self) -> GtCaps:
        return GtCaps(max_nodes=self.gt_max_nodes, max_paths=self.gt_max_paths)


def load_inputs(cfg: ExperimentConfig) -> tuple[ReachabilityGraph, VulnerabilityInventory]:
    if cfg.network_file:
        if not cfg.inventory_file:
            raise ValueError("network_file needs a matching inventory_file")
        net = load_network(cfg.network_file)
        return net, load_inventory(cfg.inventory_file, net)
    if cfg.scenario is None:
        raise ValueError("config needs either a scenario spec or input files")
    return generate_scenario(cfg.scenario)


def resolve_query(text: str | None) -> QueryAst | AnalysisDirective | None:
    if text is None:
        return None
    if text.upper() in PRESET_NAMES:
        return preset(text)
    return parse_query(text)


def make_engine(
    net: ReachabilityGraph,
    inv: VulnerabilityInventory,
    cfg: ExperimentConfig,
    seed: int,
    query: QueryAst | None,
    steered: bool,
) -> Engine:
    return Engine(
        net,
        inv,
        params=cfg.walk_params(seed),
        strat=cfg.strategy(),
        steering_params=cfg.steering_params(),
        hyper=cfg.hyperparams(),
        query=query,
        steering_enabled=steered,
        phase_window=cfg.phase_window,
    )


# -- experiment runner --------------------------------------------------------


def _run_one(
    net: ReachabilityGraph,
    inv: VulnerabilityInventory,
    cfg: ExperimentConfig,
    seed: int,
    mode: str,
    query: QueryAst | None,
    gt: GroundTruth | None,
) -> tuple[list[dict], Engine]:
    engine = make_engine(net, inv, cfg, seed, query, steered=(mode == MODE_STEERED))
    gt_ecdfs = None
    if gt is not None:
        relevant = gt.relevant_signatures(query) if query is not None else None
        engine.set_ground_truth(gt.signature_set, relevant)
        gt_ecdfs = {f: gt.ecdf(f) for f in ("likelihood", "impact")}

    rows: list[dict] = []
    for _ in range(cfg.budget):
        rep = engine.step()
        rec = rep.record
        ks_l = ks_i = None
        if gt_ecdfs is not None and len(engine.records) > 0:
            ks_l = ks_distance(engine.state.ecdf("likelihood"), gt_ecdfs["likelihood"])
            ks_i = ks_distance(engine.state.ecdf("impact"), gt_ecdfs["impact"])
        stability = rec["stability"] or {}
        rows.append(
            {
                "seed": seed,
                "iter": rec["iter"],
                "mode": mode,
                "new_paths": rec["new_paths"],
                "total_paths": rec["total_paths"],
                "ks_likelihood": ks_l,
                "ks_impact": ks_i,
                "stability_likelihood": stability.get("likelihood"),
                "stability_impact": stability.get("impact"),
                "precision": rec["precision"],
                "recall": rec["recall"],
                "phase": rec["phase"],
                "steering_active": rec["steering_active"],
                "converged": rec["converged"],
            }
        )
        if cfg.run_until == "budget" or gt is None:
            continue
        complete = rec["recall"] == 1.0
        if cfg.run_until == "complete" and complete:
            break
        if cfg.run_until == "converged" and complete and (
            mode == MODE_RANDOM or rec["converged"]
        ):
            break
    return rows, engine


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[dict]
    summary: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow(["" if row[c] is None else row[c] for c in CSV_COLUMNS])
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(self.to_csv())
        (out / "summary.json").write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    net, inv = load_inputs(cfg)
    query = resolve_query(cfg.query)
    if isinstance(query, AnalysisDirective):
        raise ValueError(
            f"preset {cfg.query} is an analysis directive; use run_q1/run_q7 (CLI: agx q7)"
        )

    gt = None
    if cfg.evaluate:
        gt = enumerate_ground_truth(
            net, inv, cfg.gt_caps(), entries=cfg.entry_nodes, strat=cfg.strategy()
        )
        if not gt.exhaustive:
            raise GtInfeasibleError(
                "ground truth hit the path cap; recall would be wrong "
                f"(cap {cfg.gt_max_paths})"
            )

    modes = [MODE_RANDOM, MODE_STEERED] if cfg.mode == "both" else [cfg.mode]
    if query is None:
        modes = [MODE_RANDOM]

    all_rows: list[dict] = []
    per_seed: dict[str, dict] = {}
    for mode in modes:
        for seed in cfg.seeds:
            rows, engine = _run_one(net, inv, cfg, seed, mode, query, gt)
            all_rows.extend(rows)
            per_seed[f"{mode}/{seed}"] = _final_run_stats(cfg, rows, engine, gt)

    summary = {
        "modes": modes,
        "query": serialize_query(query) if query is not None else None,
        "hosts": len(net.nodes),
        "edges": len(net.edges),
        "ground_truth_paths": len(gt) if gt is not None else None,
        "gt_exhaustive": gt.exhaustive if gt is not None else None,
        "runs": per_seed,
        "aggregates": _aggregate_rows(all_rows, modes),
    }
    return ExperimentResult(config=cfg, rows=all_rows, summary=summary)


def _final_run_stats(
    cfg: ExperimentConfig, rows: list[dict], engine: Engine, gt: GroundTruth | None
) -> dict:
    stats: dict = {
        "iterations": rows[-1]["iter"],
        "total_paths": rows[-1]["total_paths"],
        "final_recall": rows[-1]["recall"],
        "final_phase": rows[-1]["phase"],
        "converged": rows[-1]["converged"],
    }
    recall_series = [r["recall"] for r in rows if r["recall"] is not None]
    if recall_series:
        conv = convergence_metrics(recall_series)
        stats["peak_speed"] = conv.peak_speed
        stats["missing_rate"] = conv.missing_rate
    if gt is not None and len(engine.records) > 0:
        for feature in ("likelihood", "impact"):
            result = significance(
                engine.state.ecdf(feature),
                gt.ecdf(feature),
                threshold=cfg.threshold,
                alpha=cfg.alpha,
                feature=feature,
            )
            stats[f"significant_{feature}"] = result.significant
            stats[f"ks_{feature}"] = result.ks
    return stats


def _aggregate_rows(rows: list[dict], modes: list[str]) -> dict:
    """Median and quartiles across seeds, keyed by mode and iteration."""
    out: dict = {}
    for mode in modes:
        mode_rows = [r for r in rows if r["mode"] == mode]
        by_iter: dict[int, list[dict]] = {}
        for r in mode_rows:
            by_iter.setdefault(r["iter"], []).append(r)
        series = {}
        for metric in ("ks_likelihood", "ks_impact", "precision", "recall",
                       "stability_likelihood", "stability_impact"):
            med, q1, q3 = [], [], []
            for it in sorted(by_iter):
                values = [r[metric] for r in by_iter[it] if r[metric] is not None]
                if values:
                    med.append(float(np.median(values)))
                    q1.append(float(np.percentile(values, 25)))
                    q3.append(float(np.percentile(values, 75)))
                else:
                    med.append(None)
                    q1.append(None)
                    q3.append(None)
            series[metric] = {"median": med, "q1": q1, "q3": q3}
        out[mode] = {"iterations": sorted(by_iter), "series": series}
    return out


# -- convergence metrics ------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceMetrics:
    peak_speed: float
    missing_rate: int | None  # None: recall never reached 1 within the series
    peak_index: int


def convergence_metrics(recall_series: list[float]) -> ConvergenceMetrics:
    """Peak per-iteration recall increment and iterations left from that peak.

    missing_rate counts iterations from the peak-increment point until recall
    first reaches 1; None marks a series that never gets there (budget ran out).
    """
    if not recall_series:
        raise ValueError("recall series must be non-empty")
    if len(recall_series) == 1:
        peak, peak_index = 0.0, 0
    else:
        increments = [b - a for a, b in zip(recall_series, recall_series[1:])]
        peak = max(increments)
        peak_index = increments.index(peak) + 1
    if peak <= 0.0:
        peak, peak_index = 0.0, 0
    reach = next((i for i, r in enumerate(recall_series) if r >= 1.0), None)
    missing = None if reach is None else max(0, reach - peak_index)
    return ConvergenceMetrics(peak_speed=peak, missing_rate=missing, peak_index=peak_index)


# -- preset analyses ----------------------------------------------------------


def analyze_q1(records) -> dict:
    """Risk report over the globally shortest retrieved paths."""
    if not records:
        raise ValueError("no paths to analyze")
    min_len = min(rec.features.length for rec in records)
    selected = [rec for rec in records if rec.features.length == min_len]
    risks = sorted(rec.features.risk for rec in selected)
    return {
        "min_length": min_len,
        "count": len(selected),
        "risk_min": risks[0],
        "risk_median": float(np.median(risks)),
        "risk_max": risks[-1],
        "paths": [rec.signature for rec in selected],
    }


def run_q1(
    net: ReachabilityGraph,
    inv: VulnerabilityInventory,
    cfg: ExperimentConfig,
    gt: GroundTruth,
    seed: int,
) -> dict:
    """Steer toward the shortest paths with a moving length-cap surrogate query.

    The surrogate is re-submitted whenever a strictly shorter path shows up;
    the run ends when every minimum-length ground-truth path is retrieved.
    """
    gt_min = gt.min_length()
    targets = frozenset(
        sig for sig, f in zip(gt.signatures, gt.features) if f.length == gt_min
    )
    engine = make_engine(net, inv, cfg, seed, None, steered=True)
    current_cap: int | None = None
    found = 0
    iterations = 0
    for _ in range(cfg.budget):
        rep = engine.step()
        iterations = rep.record["iter"]
        new_min = min(
            (rec.features.length for rec in rep.iteration_report.new_records),
            default=None,
        )
        if new_min is not None and (current_cap is None or new_min < current_cap):
            current_cap = new_min
            engine.submit_query(parse_query(f"length <= {current_cap}"))
        found = sum(1 for rec in engine.records if rec.signature in targets)
        if found == len(targets):
            break
    report = analyze_q1(engine.answer_records() or engine.records)
    report.update(
        iterations=iterations,
        gt_min_length=gt_min,
        gt_count=len(targets),
        complete=(found == len(targets)),
    )
    return report


def run_q7(
    net: ReachabilityGraph,
    inv: VulnerabilityInventory,
    cfg: ExperimentConfig,
    gt: GroundTruth,
    seed: int,
    bands: tuple[tuple[float, float], ...] | None = None,
) -> dict:
    """Descending risk-band retrieval on one session, stopping at risk 0.5."""
    directive = preset("Q7")
    bands = bands or directive.bands
    engine = make_engine(net, inv, cfg, seed, None, steered=True)
    band_reports = []
    total_iterations = 0
    for lo, hi in bands:
        q = band_query(lo, hi)
        band_gt = gt.relevant_signatures(q)
        engine.submit_query(q)
        engine.set_ground_truth(gt.signature_set, band_gt)
        iters = 0
        while engine.recall_value() != 1.0 and iters < cfg.budget:
            engine.step()
            iters += 1
        total_iterations += iters
        band_reports.append(
            {
                "band": [lo, hi],
                "query": serialize_query(q),
                "gt_paths": len(band_gt),
                "found": len(engine.answer_records()),
                "iterations": iters,
                "complete": engine.recall_value() == 1.0,
            }
        )
    return {
        "bands": band_reports,
        "total_iterations": total_iterations,
        "total_paths_risk_ge_05": sum(b["gt_paths"] for b in band_reports),
    }


# -- reduced benchmark grid ---------------------------------------------------


def default_bench_grid() -> list[ExperimentConfig]:
    """Desk-scale stand-in for the full experiment grid."""
    cells = []
    for topology in ("random", "power_law"):
        for dist in ("uniform", "poisson"):
            for heterogeneity in (0, 50, 100):
                spec = ScenarioSpec.from_dict(
                    {
                        "hosts": 8,
                        "topology": {"kind": topology, "p": 0.3, "m": 2},
                        "vulns_per_host": 2,
                        "distribution": dist,
                        "heterogeneity": heterogeneity,
                        "seed": 7,
                    }
                )
                cells.append(
                    ExperimentConfig(
                        scenario=spec,
                        mode="both",
                        query="impact >= 0.9 AND likelihood < 0.5",
                        budget=400,
                        seeds=(0, 1, 2),
                        min_training_size=60,
                        min_class_count=5,
                    )
                )
    return cells


def run_bench_grid(out_dir: str | Path, cells: list[ExperimentConfig] | None = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = cells if cells is not None else default_bench_grid()
    index = []
    for i, cfg in enumerate(cells):
        cell_dir = out / f"cell_{i:03d}"
        try:
            result = run_experiment(cfg)
            result.write(cell_dir)
            spec = cfg.scenario
            index.append(
                {
                    "cell": i,
                    "dir": cell_dir.name,
                    "topology": spec.topology.kind if spec else None,
                    "distribution": spec.distribution.kind if spec else None,
                    "heterogeneity": spec.heterogeneity if spec else None,
                    "ground_truth_paths": result.summary["ground_truth_paths"],
                }
            )
        except Exception as exc:  # a cell failure should not sink the grid
            index.append({"cell": i, "dir": cell_dir.name, "error": str(exc)})
    (out / "grid_index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return {"cells": len(cells), "out": str(out)}
