"""Generation engine: one loop combining sampling, labeling, and steering.

The engine owns a GenerationState and, when a query is installed, a
SteeringState. Each iterate() call runs one sampling batch, labels the new
unique paths, and (when steering is enabled) trains, detects precision
breakdowns, retrains, and flags convergence. Ground-truth signature sets can
be attached for evaluation runs to obtain recall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dtree import Hyperparams, NotTrainableError, rules_from_dict, rules_to_dict
from .generator import (
    GenerationState,
    IndexedAttackGraph,
    IterationReport,
    PathRecord,
    WalkParams,
    iterate,
)
from .model import AttackPath, ReachabilityGraph, VulnerabilityInventory, path_signature
from .query import QueryAst, parse_query, serialize_query
from .risk import AggregationStrategy
from .stats import DEFAULT_PHASE_WINDOW
from .steering import SteeringParams, SteeringState, make_edge_filter


@dataclass(frozen=True)
class EngineReport:
    record: dict
    events: tuple[dict, ...]
    iteration_report: IterationReport


class Engine:
    def __init__(
        self,
        net: ReachabilityGraph,
        inv: VulnerabilityInventory,
        params: WalkParams | None = None,
        strat: AggregationStrategy | None = None,
        steering_params: SteeringParams | None = None,
        hyper: Hyperparams | None = None,
        query: QueryAst | str | None = None,
        steering_enabled: bool = True,
        phase_window: int = DEFAULT_PHASE_WINDOW,
        backend: str | None = None,
    ):
        self.net = net
        self.inv = inv
        self.params = params or WalkParams()
        self.strat = strat or AggregationStrategy()
        self.steering_params = steering_params or SteeringParams()
        self.hyper = hyper or Hyperparams()
        self.ix = IndexedAttackGraph(net, inv)
        self.state = GenerationState(
            self.ix, self.params, self.strat, phase_window=phase_window, backend=backend
        )
        self.steer: SteeringState | None = None
        self.query: QueryAst | None = None
        self.steering_enabled = steering_enabled
        self._gt_all: frozenset[str] | None = None
        self._gt_relevant: frozenset[str] | None = None
        self._found_in_gt = 0
        self._found_relevant = 0
        if query is not None:
            self.submit_query(query, steering_enabled=steering_enabled)

    # -- query management ---------------------------------------------------

    def submit_query(self, query: QueryAst | str | None, steering_enabled: bool = True) -> dict:
        """Install (or clear) the active query, relabeling the cumulative paths.

        Any previous steering rules are discarded; steering reactivates once
        the training preconditions hold again.
        """
        ast = parse_query(query) if isinstance(query, str) else query
        self.query = ast
        self.steering_enabled = steering_enabled
        self.state.edge_filter = None
        if ast is None:
            self.steer = None
            self._recount_gt()
            return {"query": None, "iteration": self.iteration}
        steer = SteeringState(ast, self.steering_params, self.hyper)
        for rec in self.state.records:
            steer.bootstrap_record(rec, self.iteration)
        self.steer = steer
        self._recount_gt()
        return {"query": serialize_query(ast), "iteration": self.iteration}

    # -- evaluation hooks ---------------------------------------------------

    def set_ground_truth(
        self, all_signatures: frozenset[str] | None, relevant_signatures: frozenset[str] | None
    ) -> None:
        self._gt_all = all_signatures
        self._gt_relevant = relevant_signatures
        self._recount_gt()

    def _recount_gt(self) -> None:
        if self._gt_all is not None:
            self._found_in_gt = sum(
                1 for r in self.state.records if r.signature in self._gt_all
            )
        if self._gt_relevant is not None:
            self._found_relevant = sum(
                1 for r in self.state.records if r.signature in self._gt_relevant
            )

    def recall_value(self) -> float | None:
        if self.query is not None and self._gt_relevant is not None:
            if not self._gt_relevant:
                return 1.0
            return self._found_relevant / len(self._gt_relevant)
        if self._gt_all is not None:
            if not self._gt_all:
                return 1.0
            return self._found_in_gt / len(self._gt_all)
        return None

    # -- main loop ----------------------------------------------------------

    @property
    def iteration(self) -> int:
        return self.state.iteration

    @property
    def steering_active(self) -> bool:
        return self.steer.steering_active if self.steer else False

    @property
    def converged(self) -> bool:
        return self.steer.converged if self.steer else False

    @property
    def records(self) -> list[PathRecord]:
        return self.state.records

    def relevance_flags(self) -> list[bool] | None:
        if self.steer is None:
            return None
        return [lp.relevant for lp in self.steer.labeled]

    def answer_records(self) -> list[PathRecord]:
        """Paths satisfying the active query (empty when no query is set)."""
        flags = self.relevance_flags()
        if flags is None:
            return []
        return [rec for rec, rel in zip(self.state.records, flags) if rel]

    def step(self) -> EngineReport:
        report = iterate(self.state)
        events: list[dict] = []
        precision = None

        for rec in report.new_records:
            if self._gt_all is not None and rec.signature in self._gt_all:
                self._found_in_gt += 1
            if self._gt_relevant is not None and rec.signature in self._gt_relevant:
                self._found_relevant += 1

        if self.steer is not None:
            sample = self.steer.observe(report.iteration, report.new_records)
            precision = sample.precision
            if self.steering_enabled:
                events.extend(self._drive_steering(report))

        record = dict(report.to_record())
        record["precision"] = precision
        record["recall"] = self.recall_value()
        record["steering_active"] = self.steering_active
        record["converged"] = self.converged
        return EngineReport(record=record, events=tuple(events), iteration_report=report)

    # Backwards-friendly alias used throughout the harness and service.
    iterate = step

    def _drive_steering(self, report: IterationReport) -> list[dict]:
        events: list[dict] = []
        steer = self.steer
        assert steer is not None
        if not steer.steering_active and steer.ready_to_train():
            try:
                rules = steer.train(self.inv)
            except NotTrainableError:
                return events
            self.state.edge_filter = make_edge_filter(
                rules, self.ix, steer.params.epsilon_explore
            )
            events.append({"event": "steering_activated", "iter": report.iteration})
        elif steer.steering_active and steer.breakdown_detected():
            events.append({"event": "breakdown", "iter": report.iteration})
            outcome = steer.retrain(self.inv, report.iteration)
            if outcome == "converged":
                events.append({"event": "converged", "iter": report.iteration})
            elif outcome == "retrained":
                assert steer.rules is not None
                self.state.edge_filter = make_edge_filter(
                    steer.rules, self.ix, steer.params.epsilon_explore
                )
                events.append({"event": "retrained", "iter": report.iteration})
        return events

    # -- persistence --------------------------------------------------------

    def checkpoint_state(self) -> dict:
        steer_data = None
        if self.steer is not None:
            steer_data = {
                "active": self.steer.steering_active,
                "converged": self.steer.converged,
                "rules": rules_to_dict(self.steer.rules) if self.steer.rules else None,
                "precision_history": [[i, p] for i, p in self.steer.precision_history],
                "precision_since_train": list(self.steer.precision_since_train),
                "iters_since_train": self.steer.iters_since_train,
                "last_new_relevant_iter": self.steer.last_new_relevant_iter,
            }
        return {
            "iteration": self.state.iteration,
            "rng_state": self.state.rng_state,
            "paths": [
                [list(rec.path.states), list(rec.path.vulns)] for rec in self.state.records
            ],
            "stability": {f: list(v) for f, v in self.state.stability_series.items()},
            "min_stability": list(self.state.min_stability_series),
            "query": serialize_query(self.query) if self.query is not None else None,
            "steering_enabled": self.steering_enabled,
            "steering": steer_data,
        }

    def restore_state(self, data: dict) -> None:
        """Rebuild the run from a checkpoint produced by checkpoint_state()."""
        state = self.state
        state.iteration = int(data["iteration"])
        state.pag.iteration = state.iteration
        state.rng_state = int(data["rng_state"])
        for states, vulns in data["paths"]:
            path = AttackPath(states=tuple(states), vulns=tuple(vulns))
            rows = self.ix.rows_for_path(path)
            rec = PathRecord(
                path=path,
                features=self.ix.features_for_rows(rows, self.strat),
                signature=path_signature(path),
                rows=rows,
            )
            state._seen.add((self.ix.node_indices(path), rows))
            state.pag._add_trusted(rec.signature, path)
            state.records.append(rec)
            state.feature_values["likelihood"].append(rec.features.likelihood)
            state.feature_values["impact"].append(rec.features.impact)
        state._prev = {
            f: np.sort(np.asarray(state.feature_values[f], dtype=np.float64))
            for f in state.feature_values
        }
        state.stability_series = {f: list(v) for f, v in data.get("stability", {}).items()}
        if not state.stability_series:
            state.stability_series = {f: [] for f in state.feature_values}
        state.min_stability_series = list(data.get("min_stability", []))

        query = data.get("query")
        if query is not None:
            self.submit_query(query, steering_enabled=data.get("steering_enabled", True))
            sd = data.get("steering")
            if sd and self.steer is not None:
                self.steer.converged = bool(sd.get("converged", False))
                self.steer.precision_history = [
                    (int(i), None if p is None else float(p))
                    for i, p in sd.get("precision_history", [])
                ]
                self.steer.precision_since_train = [
                    None if p is None else float(p)
                    for p in sd.get("precision_since_train", [])
                ]
                self.steer.iters_since_train = int(sd.get("iters_since_train", 0))
                lnr = sd.get("last_new_relevant_iter")
                self.steer.last_new_relevant_iter = None if lnr is None else int(lnr)
                if sd.get("active") and sd.get("rules"):
                    rules = rules_from_dict(sd["rules"])
                    self.steer.rules = rules
                    self.steer.steering_active = True
                    self.state.edge_filter = make_edge_filter(
                        rules, self.ix, self.steer.params.epsilon_explore
                    )
        self._recount_gt()
