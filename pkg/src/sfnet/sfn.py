"""Species Flow Network construction and structural statistics.

Edge weights are total introduction probabilities: each voyage leg contributes
p = rho * (1 - exp(-lambda * D)) * exp(-mu * dt) and the per-pair legs combine
as w = 1 - prod(1 - p_k). lambda is calibrated from a reference discharge
volume/probability anchor; mu is a constant per-day mortality rate.
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import networkx as nx
import numpy as np

from .ballast import DischargeModel, predict_discharge
from .errors import EmptyFile, EmptyNetwork, OutOfRange
from .ingest import VoyageLeg

DEFAULT_MU = 0.02                      # per-day mortality rate
DEFAULT_REFERENCE_VOLUME = 500_000.0   # m3 anchoring the lambda calibration
DEFAULT_REFERENCE_PROBABILITY = 0.8
DEFAULT_RHO = 1.0
DEFAULT_EDGE_FLOOR = 1e-12

EDGE_COLUMNS = ("origin", "dest", "weight", "voyage_count")


def calibrate_lambda(reference_volume: float = DEFAULT_REFERENCE_VOLUME,
                     reference_probability: float = DEFAULT_REFERENCE_PROBABILITY) -> float:
    """Solve 1 - exp(-lambda * V_ref) = p_ref for lambda."""
    if not (0.0 < reference_probability < 1.0):
        raise OutOfRange(f"reference probability must lie in (0, 1), got {reference_probability}")
    if reference_volume <= 0.0:
        raise OutOfRange(f"reference volume must be positive, got {reference_volume}")
    return -math.log1p(-reference_probability) / reference_volume


def introduction_probability(discharge: float, duration_days: float, rho: float,
                             lam: float, mu: float) -> float:
    """Per-voyage probability rho * (1 - exp(-lam*discharge)) * exp(-mu*duration)."""
    if discharge < 0:
        raise OutOfRange(f"discharge must be >= 0, got {discharge}")
    if duration_days < 0:
        raise OutOfRange(f"duration must be >= 0, got {duration_days}")
    if not (0.0 <= rho <= 1.0):
        raise OutOfRange(f"efficacy must lie in [0, 1], got {rho}")
    if lam < 0 or mu < 0:
        raise OutOfRange("rate constants must be >= 0")
    return rho * (-math.expm1(-lam * discharge)) * math.exp(-mu * duration_days)


def aggregate_edge_weight(probabilities: Iterable[float]) -> float:
    """Combine per-voyage probabilities into 1 - prod(1 - p_k).

    Sorted before multiplying so the result is bit-identical under reordering.
    """
    survival = 1.0
    for p in sorted(probabilities):
        if not (0.0 <= p <= 1.0):
            raise OutOfRange(f"probability out of [0, 1]: {p}")
        survival *= 1.0 - p
    return 1.0 - survival


@dataclass(frozen=True)
class NetworkStats:
    nodes: int
    edges: int
    average_path_length: float  # mean over finite directed pairs, 0.0 if none
    diameter: int               # max finite directed distance
    density: float
    average_in_degree: float
    average_out_degree: float
    unreachable_pairs: int

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "edges": self.edges,
            "average_path_length": self.average_path_length,
            "diameter": self.diameter,
            "density": self.density,
            "average_in_degree": self.average_in_degree,
            "average_out_degree": self.average_out_degree,
            "unreachable_pairs": self.unreachable_pairs,
        }


@dataclass(frozen=True)
class DegreeDistribution:
    """Exact total-degree histogram plus a log-log slope diagnostic."""

    histogram: Mapping[int, int]
    loglog_slope: Optional[float]  # None with < 2 populated positive-degree bins


class SpeciesFlowNetwork:
    """Directed port graph with introduction-probability edge weights.

    Wraps an nx.DiGraph whose edges carry ``weight`` (probability in (0, 1])
    and ``voyages`` (leg count). Nodes and edges are inserted in sorted order
    so downstream artifacts are reproducible byte for byte.
    """

    def __init__(self, lam: float, mu: float = DEFAULT_MU, rho: float = DEFAULT_RHO):
        self.graph = nx.DiGraph()
        self.lam = lam
        self.mu = mu
        self.rho = rho

    @property
    def n_nodes(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def n_edges(self) -> int:
        return self.graph.number_of_edges()

    def weight(self, origin: str, dest: str) -> float:
        return self.graph[origin][dest]["weight"]

    def edges(self):
        """Sorted (origin, dest, weight, voyages) tuples."""
        for origin, dest in sorted(self.graph.edges()):
            data = self.graph[origin][dest]
            yield origin, dest, data["weight"], data["voyages"]

    def total_weight(self) -> float:
        return float(sum(w for _, _, w, _ in self.edges()))

    # --- serialization -----------------------------------------------------

    def write_edge_csv(self, path, comment: Optional[str] = None) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(EDGE_COLUMNS)
            for origin, dest, weight, voyages in self.edges():
                writer.writerow([origin, dest, repr(weight), voyages])

    def write_graphml(self, path) -> None:
        nx.write_graphml_xml(self.graph, str(path))

    @staticmethod
    def from_edge_csv(path, lam: float, mu: float = DEFAULT_MU,
                      rho: float = DEFAULT_RHO) -> "SpeciesFlowNetwork":
        net = SpeciesFlowNetwork(lam=lam, mu=mu, rho=rho)
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if not rows:
            raise EmptyFile(f"{path}: no header row")
        header = rows[0]
        idx = {name: header.index(name) for name in EDGE_COLUMNS}
        edges = []
        nodes = set()
        for row in rows[1:]:
            origin, dest = row[idx["origin"]], row[idx["dest"]]
            edges.append((origin, dest, float(row[idx["weight"]]), int(row[idx["voyage_count"]])))
            nodes.update((origin, dest))
        net.graph.add_nodes_from(sorted(nodes))
        for origin, dest, weight, voyages in sorted(edges):
            net.graph.add_edge(origin, dest, weight=weight, voyages=voyages)
        return net


def build_sfn(legs: Sequence[VoyageLeg], model: DischargeModel,
              lam: Optional[float] = None, mu: float = DEFAULT_MU,
              rho: float = DEFAULT_RHO,
              rho_overrides: Optional[Mapping[tuple, float]] = None,
              floor: float = DEFAULT_EDGE_FLOOR,
              ports: Optional[Iterable[str]] = None) -> SpeciesFlowNetwork:
    """Aggregate voyage legs into the Species Flow Network.

    ``rho`` applies to every route unless ``rho_overrides`` maps a specific
    (origin, dest) pair to its own efficacy — the hook used by management
    scenarios. ``ports`` registers extra isolated nodes. Edges whose combined
    weight falls below ``floor`` are dropped.
    """
    if lam is None:
        lam = calibrate_lambda()
    net = SpeciesFlowNetwork(lam=lam, mu=mu, rho=rho)
    overrides = rho_overrides or {}

    per_pair: dict = {}
    for leg in legs:
        per_pair.setdefault((leg.origin, leg.dest), []).append(leg)

    nodes = set()
    if ports is not None:
        nodes.update(ports)
    for origin, dest in per_pair:
        nodes.add(origin)
        nodes.add(dest)
    net.graph.add_nodes_from(sorted(nodes))

    for origin, dest in sorted(per_pair):
        pair_rho = overrides.get((origin, dest), rho)
        probabilities = [
            introduction_probability(
                predict_discharge(model, leg.vessel_type, leg.dwt),
                leg.duration_days, pair_rho, lam, mu)
            for leg in per_pair[(origin, dest)]
        ]
        weight = aggregate_edge_weight(probabilities)
        if weight >= floor:
            net.graph.add_edge(origin, dest, weight=weight,
                               voyages=len(probabilities))
    return net


def _bfs_all_sources(graph: nx.DiGraph):
    """Hand-rolled all-sources BFS on the unweighted digraph.

    Returns (sum of finite distances over ordered pairs i != j,
    count of finite pairs, max finite distance).
    """
    order = sorted(graph.nodes())
    index = {node: i for i, node in enumerate(order)}
    adjacency = [[index[v] for v in sorted(graph.successors(u))] for u in order]
    n = len(order)
    total = 0
    finite_pairs = 0
    longest = 0
    for source in range(n):
        dist = [-1] * n
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            du = dist[u]
            for v in adjacency[u]:
                if dist[v] < 0:
                    dist[v] = du + 1
                    queue.append(v)
        for target in range(n):
            d = dist[target]
            if target != source and d > 0:
                total += d
                finite_pairs += 1
                if d > longest:
                    longest = d
    return total, finite_pairs, longest


def network_stats(net) -> NetworkStats:
    """Table-style characteristics of the (unweighted) directed structure."""
    graph = net.graph if isinstance(net, SpeciesFlowNetwork) else net
    n = graph.number_of_nodes()
    if n == 0:
        raise EmptyNetwork("cannot compute statistics of an empty network")
    e = graph.number_of_edges()
    total, finite_pairs, longest = _bfs_all_sources(graph)
    ordered_pairs = n * (n - 1)
    return NetworkStats(
        nodes=n,
        edges=e,
        average_path_length=total / finite_pairs if finite_pairs else 0.0,
        diameter=longest,
        density=e / ordered_pairs if ordered_pairs else 0.0,
        average_in_degree=e / n,
        average_out_degree=e / n,
        unreachable_pairs=ordered_pairs - finite_pairs,
    )


def degree_distribution(net) -> DegreeDistribution:
    """Histogram of total (in + out) degree with a log-log OLS slope.

    The slope is fit over populated bins of positive degree and reported as a
    heavy-tail diagnostic only; it is None with fewer than two such bins.
    """
    graph = net.graph if isinstance(net, SpeciesFlowNetwork) else net
    if graph.number_of_nodes() == 0:
        raise EmptyNetwork("cannot compute degree distribution of an empty network")
    histogram: dict = {}
    for node in graph.nodes():
        degree = graph.in_degree(node) + graph.out_degree(node)
        histogram[degree] = histogram.get(degree, 0) + 1
    populated = sorted(d for d in histogram if d > 0)
    if len(populated) < 2:
        slope = None
    else:
        log_d = np.log10(np.array(populated, dtype=float))
        log_c = np.log10(np.array([histogram[d] for d in populated], dtype=float))
        slope = float(np.polyfit(log_d, log_c, 1)[0])
    return DegreeDistribution(histogram=dict(sorted(histogram.items())), loglog_slope=slope)


def stats_to_json(stats: NetworkStats, extra: Optional[dict] = None) -> str:
    payload = stats.to_dict()
    if extra:
        payload.update(extra)
    return json.dumps(payload, sort_keys=True, indent=2)
