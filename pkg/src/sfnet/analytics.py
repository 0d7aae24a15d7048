"""Cluster-level flow decomposition, evolution tracking, and scenarios.

Flow here always means edge weight (introduction probability mass), not the
random-walk visit rates used by the clustering objective. Port-level shares
use declared conventions, stated in the report metadata:

    %TF(port)  = (incident in+out weight) / (2 * total network flow)
    %CF(port)  = (incident intra-module weight) / (2 * module intra flow)
    %TF(module) = module intra flow / total network flow
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .errors import EmptyNetwork, OutOfRange, PartitionMismatch, TooFewPeriods
from .ingest import VoyageLeg
from .mapeq import Partition
from .sfn import NetworkStats, SpeciesFlowNetwork, network_stats

PORT_SHARE_DEFINITIONS = {
    "port_total_fraction": "incident in+out edge weight / (2 * total network flow)",
    "port_cluster_fraction": "incident intra-module edge weight / (2 * module intra flow)",
    "module_total_fraction": "module intra flow / total network flow",
}


@dataclass(frozen=True)
class PortShare:
    port: str
    total_fraction: float
    cluster_fraction: float


@dataclass(frozen=True)
class ModuleFlowSummary:
    module: int
    intra_flow: float
    inter_out: float
    inter_in: float
    total_fraction: float
    ports_by_total: tuple
    ports_by_cluster: tuple


@dataclass(frozen=True)
class ClusterFlowReport:
    modules: tuple
    pair_flow: Mapping  # ordered (module_a, module_b) -> aggregate flow
    total_flow: float

    def to_dict(self) -> dict:
        return {
            "definitions": dict(PORT_SHARE_DEFINITIONS),
            "total_flow": self.total_flow,
            "modules": [
                {
                    "module": m.module,
                    "intra_flow": m.intra_flow,
                    "inter_out": m.inter_out,
                    "inter_in": m.inter_in,
                    "total_fraction": m.total_fraction,
                    "ports_by_total": [vars(p) for p in m.ports_by_total],
                    "ports_by_cluster": [vars(p) for p in m.ports_by_cluster],
                }
                for m in self.modules
            ],
            "pair_flow": {f"{a}->{b}": w for (a, b), w in sorted(self.pair_flow.items())},
        }


def _check_partition_covers(graph, assignment) -> None:
    missing = [v for v in graph.nodes() if v not in assignment]
    if missing:
        raise PartitionMismatch(f"{len(missing)} network nodes lack a module "
                                f"(e.g. {sorted(missing)[:3]})")


def flow_report(net: SpeciesFlowNetwork, partition: Partition, top_k: int = 10) -> ClusterFlowReport:
    """Decompose edge-weight flow by module and rank ports inside each."""
    graph = net.graph
    assignment = getattr(partition, "assignment", partition)
    _check_partition_covers(graph, assignment)

    total = 0.0
    pair_flow: dict = {}
    intra: dict = {}
    inter_out: dict = {}
    inter_in: dict = {}
    port_incident: dict = {v: 0.0 for v in graph.nodes()}
    port_intra: dict = {v: 0.0 for v in graph.nodes()}
    modules = sorted({assignment[v] for v in graph.nodes()})
    for m in modules:
        intra[m] = inter_out[m] = inter_in[m] = 0.0

    for origin, dest, weight, _ in net.edges():
        a, b = assignment[origin], assignment[dest]
        total += weight
        pair_flow[(a, b)] = pair_flow.get((a, b), 0.0) + weight
        port_incident[origin] += weight
        port_incident[dest] += weight
        if a == b:
            intra[a] += weight
            port_intra[origin] += weight
            port_intra[dest] += weight
        else:
            inter_out[a] += weight
            inter_in[b] += weight

    members: dict = {m: [] for m in modules}
    for v in sorted(graph.nodes()):
        members[assignment[v]].append(v)

    summaries = []
    for m in modules:
        def share(v):
            return PortShare(
                port=v,
                total_fraction=port_incident[v] / (2.0 * total) if total > 0 else 0.0,
                cluster_fraction=(port_intra[v] / (2.0 * intra[m])
                                  if intra[m] > 0 else 0.0),
            )
        shares = [share(v) for v in members[m]]
        by_total = sorted(shares, key=lambda s: (-s.total_fraction, s.port))[:top_k]
        by_cluster = sorted(shares, key=lambda s: (-s.cluster_fraction, s.port))[:top_k]
        summaries.append(ModuleFlowSummary(
            module=m, intra_flow=intra[m], inter_out=inter_out[m],
            inter_in=inter_in[m],
            total_fraction=intra[m] / total if total > 0 else 0.0,
            ports_by_total=tuple(by_total), ports_by_cluster=tuple(by_cluster)))
    return ClusterFlowReport(modules=tuple(summaries), pair_flow=pair_flow, total_flow=total)


@dataclass(frozen=True)
class InterClusterEdges:
    """Boundary edges ranked by weight, plus each module's busiest gateway."""

    edges: tuple   # (origin, dest, weight, origin_module, dest_module)
    gateways: Mapping  # module -> (port, inter-cluster incident flow, share)
    total_inter_flow: float

    def to_dict(self) -> dict:
        return {
            "total_inter_flow": self.total_inter_flow,
            "edges": [
                {"origin": o, "dest": d, "weight": w,
                 "origin_module": a, "dest_module": b}
                for o, d, w, a, b in self.edges
            ],
            "gateways": {
                str(m): {"port": p, "inter_flow": f, "share": s}
                for m, (p, f, s) in sorted(self.gateways.items())
            },
        }


def top_inter_cluster_edges(net: SpeciesFlowNetwork, partition, k: int = 20) -> InterClusterEdges:
    """Heaviest module-crossing edges and per-module gateway ports."""
    graph = net.graph
    assignment = getattr(partition, "assignment", partition)
    _check_partition_covers(graph, assignment)

    boundary = []
    module_inter: dict = {}
    port_inter: dict = {}
    for origin, dest, weight, _ in net.edges():
        a, b = assignment[origin], assignment[dest]
        if a == b:
            continue
        boundary.append((origin, dest, weight, a, b))
        module_inter[a] = module_inter.get(a, 0.0) + weight
        module_inter[b] = module_inter.get(b, 0.0) + weight
        port_inter[origin] = port_inter.get(origin, 0.0) + weight
        port_inter[dest] = port_inter.get(dest, 0.0) + weight

    ranked = sorted(boundary, key=lambda e: (-e[2], e[0], e[1]))[:k]
    gateways = {}
    for m in sorted(module_inter):
        candidates = sorted((v for v in graph.nodes()
                             if assignment[v] == m and v in port_inter),
                            key=lambda v: (-port_inter[v], v))
        if candidates:
            top = candidates[0]
            gateways[m] = (top, port_inter[top], port_inter[top] / module_inter[m])
    total_inter = float(sum(w for _, _, w, _, _ in boundary))
    return InterClusterEdges(edges=tuple(ranked), gateways=gateways,
                             total_inter_flow=total_inter)


@dataclass(frozen=True)
class ClusterSnapshot:
    module: int
    rank: int       # 0 = largest intra visit mass in its period
    flow: float
    size: int
    members_hash: str


@dataclass(frozen=True)
class PeriodMatch:
    period_a: int
    period_b: int
    overlap: Mapping   # (module_a, module_b) -> shared-member count
    jaccard: Mapping   # (module_a, module_b) -> score on shared ports
    matching: Mapping  # module_a -> module_b
    dead: tuple        # period_a modules without a successor
    born: tuple        # period_b modules without a predecessor


@dataclass(frozen=True)
class EvolutionMap:
    periods: tuple  # PeriodSummary-like tuples of ClusterSnapshot
    matches: tuple  # PeriodMatch per consecutive pair

    def to_dict(self) -> dict:
        forward: dict = {}
        for match in self.matches:
            for a, b in match.matching.items():
                forward[(match.period_a, a)] = {
                    "period": match.period_b,
                    "cluster": b,
                    "jaccard": match.jaccard.get((a, b), 0.0),
                }
        return {
            "periods": [
                {
                    "index": i,
                    "clusters": [
                        {
                            "module": snap.module,
                            "rank": snap.rank,
                            "flow": snap.flow,
                            "size": snap.size,
                            "members_hash": snap.members_hash,
                            "matches": ([forward[(i, snap.module)]]
                                        if (i, snap.module) in forward else []),
                        }
                        for snap in clusters
                    ],
                }
                for i, clusters in enumerate(self.periods)
            ],
            "births": [{"period": m.period_b, "cluster": c}
                       for m in self.matches for c in m.born],
            "deaths": [{"period": m.period_a, "cluster": c}
                       for m in self.matches for c in m.dead],
        }


def _members_hash(members) -> str:
    payload = "\n".join(str(v) for v in sorted(members)).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


def match_clusters(partitions: Sequence[Partition]) -> EvolutionMap:
    """Track cluster identity across consecutive periods.

    Similarity is Jaccard over ports present in both periods; matching is
    greedy by descending Jaccard, ties broken by larger combined cluster
    visit mass, then module ids. Unmatched clusters are marked born/dead.
    """
    if len(partitions) < 2:
        raise TooFewPeriods(f"need at least 2 periods, got {len(partitions)}")

    period_clusters = []
    for part in partitions:
        assignment = part.assignment
        grouped: dict = {}
        for node in assignment:
            grouped.setdefault(assignment[node], set()).add(node)
        period_clusters.append(grouped)

    snapshots = []
    for t, part in enumerate(partitions):
        grouped = period_clusters[t]
        flows = {m: part.module_flow[m] if m < len(part.module_flow) else 0.0
                 for m in grouped}
        order = sorted(grouped, key=lambda m: (-flows[m], m))
        snapshots.append(tuple(
            ClusterSnapshot(module=m, rank=r, flow=flows[m], size=len(grouped[m]),
                            members_hash=_members_hash(grouped[m]))
            for r, m in enumerate(order)))

    matches = []
    for t in range(len(partitions) - 1):
        left, right = period_clusters[t], period_clusters[t + 1]
        shared = (set().union(*left.values()) & set().union(*right.values())
                  if left and right else set())
        overlap = {}
        jaccard = {}
        candidates = []
        flow_a = {s.module: s.flow for s in snapshots[t]}
        flow_b = {s.module: s.flow for s in snapshots[t + 1]}
        for a in sorted(left):
            a_members = left[a] & shared
            for b in sorted(right):
                b_members = right[b] & shared
                inter = len(a_members & b_members)
                union = len(a_members | b_members)
                if inter:
                    overlap[(a, b)] = inter
                score = inter / union if union else 0.0
                if score > 0.0:
                    jaccard[(a, b)] = score
                    candidates.append((-score, -(flow_a[a] + flow_b[b]), a, b))
        matching = {}
        taken_b = set()
        for neg_score, _, a, b in sorted(candidates):
            if a in matching or b in taken_b:
                continue
            matching[a] = b
            taken_b.add(b)
        dead = tuple(sorted(m for m in left if m not in matching))
        born = tuple(sorted(m for m in right if m not in taken_b))
        matches.append(PeriodMatch(period_a=t, period_b=t + 1, overlap=overlap,
                                   jaccard=jaccard, matching=matching,
                                   dead=dead, born=born))
    return EvolutionMap(periods=tuple(snapshots), matches=tuple(matches))


@dataclass(frozen=True)
class TypeTrips:
    trips: int
    inter_trips: int

    @property
    def inter_fraction(self) -> float:
        return self.inter_trips / self.trips if self.trips else 0.0


@dataclass(frozen=True)
class VesselTypeStats:
    per_type: Mapping  # vessel_type -> TypeTrips
    unassigned_legs: int

    @property
    def total_trips(self) -> int:
        return sum(t.trips for t in self.per_type.values())

    @property
    def total_inter_trips(self) -> int:
        return sum(t.inter_trips for t in self.per_type.values())

    @property
    def global_inter_fraction(self) -> float:
        total = self.total_trips
        return self.total_inter_trips / total if total else 0.0

    def to_dict(self) -> dict:
        return {
            "per_type": {
                vt: {"trips": t.trips, "inter_trips": t.inter_trips,
                     "inter_fraction": t.inter_fraction}
                for vt, t in sorted(self.per_type.items())
            },
            "unassigned_legs": self.unassigned_legs,
            "total_trips": self.total_trips,
            "total_inter_trips": self.total_inter_trips,
            "global_inter_fraction": self.global_inter_fraction,
        }


def vessel_type_stats(legs: Sequence[VoyageLeg], partition) -> VesselTypeStats:
    """Per-vessel-type trip counts and inter-cluster trip fractions.

    Legs whose origin or destination has no module assignment are excluded
    from the per-type tallies and counted in ``unassigned_legs``.
    """
    assignment = getattr(partition, "assignment", partition)
    per_type: dict = {}
    unassigned = 0
    for leg in legs:
        if leg.origin not in assignment or leg.dest not in assignment:
            unassigned += 1
            continue
        stats = per_type.get(leg.vessel_type, (0, 0))
        inter = assignment[leg.origin] != assignment[leg.dest]
        per_type[leg.vessel_type] = (stats[0] + 1, stats[1] + (1 if inter else 0))
    return VesselTypeStats(
        per_type={vt: TypeTrips(*v) for vt, v in sorted(per_type.items())},
        unassigned_legs=unassigned)


@dataclass(frozen=True)
class ScenarioResult:
    """Before/after comparison for a network-intervention experiment."""

    description: str
    removed_nodes: tuple
    removed_edges: tuple  # (origin, dest, weight)
    flow_removed: float
    before: NetworkStats
    after: NetworkStats
    after_network: SpeciesFlowNetwork = field(compare=False, repr=False, hash=False)
    missing_edges: tuple = ()
    inter_flow_before: Optional[float] = None
    inter_flow_after: Optional[float] = None

    @property
    def unreachable_delta(self) -> int:
        return self.after.unreachable_pairs - self.before.unreachable_pairs

    def to_dict(self) -> dict:
        payload = {
            "description": self.description,
            "removed_nodes": list(self.removed_nodes),
            "removed_edges": [{"origin": o, "dest": d, "weight": w}
                              for o, d, w in self.removed_edges],
            "missing_edges": [list(e) for e in self.missing_edges],
            "flow_removed": self.flow_removed,
            "before": self.before.to_dict(),
            "after": self.after.to_dict(),
            "unreachable_delta": self.unreachable_delta,
        }
        if self.inter_flow_before is not None:
            payload["inter_flow_before"] = self.inter_flow_before
            payload["inter_flow_after"] = self.inter_flow_after
        return payload


def _copy_without_edges(net: SpeciesFlowNetwork, doomed) -> SpeciesFlowNetwork:
    after = SpeciesFlowNetwork(lam=net.lam, mu=net.mu, rho=net.rho)
    after.graph.add_nodes_from(sorted(net.graph.nodes()))
    doomed = set(doomed)
    for origin, dest, weight, voyages in net.edges():
        if (origin, dest) not in doomed:
            after.graph.add_edge(origin, dest, weight=weight, voyages=voyages)
    return after


def remove_top_degree(net: SpeciesFlowNetwork, fraction: float) -> ScenarioResult:
    """Delete all edges incident to the ceil(fraction * n) highest-degree ports.

    Degree is unweighted in+out; ties resolve by ascending node id. The ports
    themselves stay in the graph so path statistics count them as unreachable.
    """
    if net.n_nodes == 0:
        raise EmptyNetwork("cannot run a removal scenario on an empty network")
    if not (0.0 < fraction < 1.0):
        raise OutOfRange(f"fraction must lie in (0, 1), got {fraction}")
    graph = net.graph
    n = graph.number_of_nodes()
    k = math.ceil(fraction * n)
    ranked = sorted(graph.nodes(),
                    key=lambda v: (-(graph.in_degree(v) + graph.out_degree(v)), v))
    victims = set(ranked[:k])
    removed = tuple((o, d, w) for o, d, w, _ in net.edges()
                    if o in victims or d in victims)
    after = _copy_without_edges(net, {(o, d) for o, d, _ in removed})
    return ScenarioResult(
        description=f"remove edges of top {fraction:g} fraction of ports by degree (k={k})",
        removed_nodes=tuple(sorted(victims)),
        removed_edges=removed,
        flow_removed=float(sum(w for _, _, w in removed)),
        before=network_stats(net),
        after=network_stats(after),
        after_network=after)


def remove_edges(net: SpeciesFlowNetwork, edges, partition=None) -> ScenarioResult:
    """Delete a specific edge list; absent edges are reported, not fatal.

    With a partition supplied, also reports inter-cluster flow before/after.
    """
    requested = [(o, d) for o, d in edges]
    present = set()
    missing = []
    for o, d in requested:
        if net.graph.has_edge(o, d):
            present.add((o, d))
        else:
            missing.append((o, d))
    removed = tuple((o, d, net.weight(o, d)) for o, d in sorted(present))
    after = _copy_without_edges(net, present)

    inter_before = inter_after = None
    if partition is not None:
        assignment = getattr(partition, "assignment", partition)
        _check_partition_covers(net.graph, assignment)

        def inter_flow(network):
            return float(sum(w for o, d, w, _ in network.edges()
                             if assignment[o] != assignment[d]))
        inter_before = inter_flow(net)
        inter_after = inter_flow(after)

    return ScenarioResult(
        description=f"remove {len(removed)} listed edges",
        removed_nodes=(),
        removed_edges=removed,
        flow_removed=float(sum(w for _, _, w in removed)),
        before=network_stats(net),
        after=network_stats(after),
        after_network=after,
        missing_edges=tuple(missing),
        inter_flow_before=inter_before,
        inter_flow_after=inter_after)


def report_to_json(report) -> str:
    """Serialize any report object exposing to_dict() deterministically."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=2)
