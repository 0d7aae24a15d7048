"""Invasion-risk rules: tolerance groups, NIS risk network, sub-clustering.

A port pair is a candidate for non-indigenous exchange only when the two
ports sit in different, non-contiguous ecoregions. The risk level (0-6)
counts the environmental-tolerance groups whose survivable temperature and
salinity deltas both cover the pair; the six default groups are the
cross-product of dT <= {2.9, 9.7} degC with dS <= {0.2, 2.0, 12} ppt, all
boundaries inclusive.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import networkx as nx

from .errors import EmptyNetwork, MissingEcoregion, OutOfRange
from .ingest import EcoregionAdjacency, PortRecord
from .mapeq import DEFAULT_TAU, Partition, cluster_undirected

RISK_COLUMNS = ("port_a", "port_b", "risk_level", "groups_at_risk_bitmask")


@dataclass(frozen=True)
class ToleranceGroup:
    """Survivable absolute differences of annual means."""

    max_dT: float  # deg C
    max_dS: float  # ppt

    def __post_init__(self):
        if self.max_dT <= 0 or self.max_dS <= 0:
            raise OutOfRange(f"tolerance bounds must be positive, got {self}")

    def survives(self, dT: float, dS: float) -> bool:
        return dT <= self.max_dT and dS <= self.max_dS


DEFAULT_TOLERANCE_GROUPS = (
    ToleranceGroup(2.9, 0.2),
    ToleranceGroup(2.9, 2.0),
    ToleranceGroup(2.9, 12.0),
    ToleranceGroup(9.7, 0.2),
    ToleranceGroup(9.7, 2.0),
    ToleranceGroup(9.7, 12.0),
)


def non_indigenous_pair(a: PortRecord, b: PortRecord,
                        adjacency: EcoregionAdjacency) -> bool:
    """True iff the ports' ecoregions differ and are not contiguous."""
    for port in (a, b):
        if not port.ecoregion_id:
            raise MissingEcoregion(port.port_id)
    if a.ecoregion_id == b.ecoregion_id:
        return False
    return not adjacency.contiguous(a.ecoregion_id, b.ecoregion_id)


def risk_level(dT: float, dS: float,
               groups: Sequence[ToleranceGroup] = DEFAULT_TOLERANCE_GROUPS) -> int:
    """Count of tolerance groups surviving the transfer; boundaries inclusive."""
    if dT < 0 or dS < 0:
        raise OutOfRange(f"differences must be >= 0, got dT={dT}, dS={dS}")
    return sum(1 for g in groups if g.survives(dT, dS))


def _risk_bitmask(dT: float, dS: float, groups) -> int:
    mask = 0
    for i, g in enumerate(groups):
        if g.survives(dT, dS):
            mask |= 1 << i
    return mask


@dataclass
class RiskNetwork:
    """Undirected risk-weighted graph over a port set, plus coverage report."""

    graph: nx.Graph
    groups: tuple
    coverage: dict
    ports: Mapping[str, PortRecord]

    @property
    def n_edges(self) -> int:
        return self.graph.number_of_edges()

    def edges(self):
        """Sorted (port_a, port_b, risk_level, bitmask) with port_a < port_b."""
        for a, b in sorted(tuple(sorted(e)) for e in self.graph.edges()):
            data = self.graph[a][b]
            yield a, b, data["weight"], data["bitmask"]

    def write_csv(self, path, comment: Optional[str] = None) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(RISK_COLUMNS)
            for a, b, level, mask in self.edges():
                writer.writerow([a, b, level, mask])


def build_risk_network(ports: Sequence[PortRecord], adjacency: EcoregionAdjacency,
                       groups: Sequence[ToleranceGroup] = DEFAULT_TOLERANCE_GROUPS,
                       ) -> RiskNetwork:
    """Pairwise NIS invasion risk over a port set.

    An edge appears only for non-indigenous pairs with risk level >= 1.
    Ports missing temperature or salinity never receive edges and are named
    in the coverage report (no imputation).
    """
    by_id = {p.port_id: p for p in sorted(ports, key=lambda p: p.port_id)}
    graph = nx.Graph()
    graph.add_nodes_from(by_id)
    missing_env = sorted(p.port_id for p in ports if not p.has_environment)

    ids = sorted(by_id)
    for i, pid_a in enumerate(ids):
        a = by_id[pid_a]
        if not a.has_environment:
            continue
        for pid_b in ids[i + 1:]:
            b = by_id[pid_b]
            if not b.has_environment:
                continue
            if not non_indigenous_pair(a, b, adjacency):
                continue
            dT = abs(a.temperature - b.temperature)
            dS = abs(a.salinity - b.salinity)
            level = risk_level(dT, dS, groups)
            if level >= 1:
                graph.add_edge(pid_a, pid_b, weight=level,
                               bitmask=_risk_bitmask(dT, dS, groups))
    coverage = {
        "ports_total": len(by_id),
        "ports_with_environment": len(by_id) - len(missing_env),
        "ports_missing_environment": missing_env,
    }
    return RiskNetwork(graph=graph, groups=tuple(groups), coverage=coverage,
                       ports=by_id)


@dataclass(frozen=True)
class SubClusterResult:
    """Environmental sub-clusters of one flow cluster's ports."""

    partition: Partition
    summaries: tuple  # per module: dict with size and mean environment

    def to_dict(self) -> dict:
        return {"n_subclusters": self.partition.n_modules,
                "codelength": self.partition.codelength,
                "subclusters": list(self.summaries)}

    def write_csv(self, path, comment: Optional[str] = None) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["port", "subcluster"])
            for port in sorted(self.partition.assignment):
                writer.writerow([port, self.partition.assignment[port]])


def sub_cluster(risk_net: RiskNetwork, seed=0, tau: float = DEFAULT_TAU,
                restarts: int = 1) -> SubClusterResult:
    """Cluster the risk network; isolated ports become singleton modules.

    Each sub-cluster is summarized by its size and mean annual temperature
    and salinity over member ports with recorded environment values.
    """
    if risk_net.graph.number_of_nodes() == 0:
        raise EmptyNetwork("risk network has no ports")
    partition = cluster_undirected(risk_net.graph, seed=seed, tau=tau,
                                   restarts=restarts)
    summaries = []
    for module, members in enumerate(partition.modules()):
        temps = [risk_net.ports[p].temperature for p in members
                 if p in risk_net.ports and risk_net.ports[p].temperature is not None]
        sals = [risk_net.ports[p].salinity for p in members
                if p in risk_net.ports and risk_net.ports[p].salinity is not None]
        summaries.append({
            "subcluster": module,
            "size": len(members),
            "ports": list(members),
            "mean_temperature": sum(temps) / len(temps) if temps else None,
            "mean_salinity": sum(sals) / len(sals) if sals else None,
        })
    return SubClusterResult(partition=partition, summaries=tuple(summaries))
