"""Two-level map-equation clustering of directed weighted networks.

Flow comes from a PageRank-style teleported random walk (recorded
teleportation, uniform over nodes, tau = 0.15 by default). With per-node
visit rates p_a, per-module internal mass p_m and exit probabilities q_m,
the codelength of a two-level coding scheme is

    L(M) = q H(Q) + sum_m (p_m + q_m) H(P_m)
         = plogp(q) - 2 sum_m plogp(q_m) + sum_m plogp(p_m + q_m)
           - sum_a plogp(p_a),            plogp(x) = x log2 x, q = sum_m q_m.

Exit probability under recorded teleportation counts both teleport jumps
landing outside the module and boundary link flow:

    q_m = T_m (n - n_m) / n + E_m

where T_m sums tau * p_a (plus the full (1 - tau) p_a for dangling nodes,
whose "link step" also spreads uniformly), n_m counts the module's physical
nodes, and E_m sums boundary link flows (1 - tau) p_a w_ab / s_a.

The optimizer is a Louvain-style greedy search: seeded sweeps moving each
node to the module with the largest codelength decrease, module aggregation,
repeat until stable.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import networkx as nx
import numpy as np

from .errors import EmptyNetwork, IncompletePartition, NoConvergence, OutOfRange

DEFAULT_TAU = 0.15
CONVERGENCE_RESIDUAL = 1e-12
MAX_ITERATIONS = 10_000
MIN_GAIN = 1e-10  # smallest codelength decrease worth a greedy move


def _plogp(x: float) -> float:
    return x * math.log2(x) if x > 0.0 else 0.0


def _plogp_sum(values) -> float:
    return float(sum(_plogp(x) for x in values))


def as_digraph(net) -> nx.DiGraph:
    """Coerce inputs to a weighted DiGraph; undirected graphs are symmetrized."""
    graph = net if isinstance(net, nx.Graph) else getattr(net, "graph", net)
    if isinstance(graph, nx.DiGraph):
        return graph
    if isinstance(graph, nx.Graph):
        directed = nx.DiGraph()
        directed.add_nodes_from(sorted(graph.nodes()))
        pairs = sorted((u, v) if u <= v else (v, u) for u, v in graph.edges())
        for u, v in pairs:
            w = graph[u][v].get("weight", 1.0)
            directed.add_edge(u, v, weight=w)
            directed.add_edge(v, u, weight=w)
        return directed
    raise TypeError(f"expected a graph or network wrapper, got {type(net).__name__}")


@dataclass(frozen=True)
class VisitDistribution:
    """Stationary visit rates of the teleported walk, in sorted node order."""

    nodes: tuple
    rates: tuple
    tau: float
    residual: float
    iterations: int

    def as_dict(self) -> dict:
        return dict(zip(self.nodes, self.rates))


def stationary_flow(net, tau: float = DEFAULT_TAU) -> VisitDistribution:
    """Power-iterate p' = tau/n + (1-tau)(link flow + dangling mass / n).

    Stops when the L1 residual drops below 1e-12; raises NoConvergence after
    10^4 iterations with the best iterate attached to the exception.
    """
    graph = as_digraph(net)
    n = graph.number_of_nodes()
    if n == 0:
        raise EmptyNetwork("cannot compute flow on an empty network")
    if not (0.0 < tau < 1.0):
        raise OutOfRange(f"teleportation must lie in (0, 1), got {tau}")

    nodes = sorted(graph.nodes())
    index = {v: i for i, v in enumerate(nodes)}
    src, dst, wgt = [], [], []
    for u, v in sorted(graph.edges()):
        w = float(graph[u][v].get("weight", 1.0))
        if w < 0:
            raise OutOfRange(f"negative edge weight on ({u}, {v})")
        if w > 0:
            src.append(index[u])
            dst.append(index[v])
            wgt.append(w)
    src = np.asarray(src, dtype=np.intp)
    dst = np.asarray(dst, dtype=np.intp)
    wgt = np.asarray(wgt, dtype=float)
    strength = np.bincount(src, weights=wgt, minlength=n)
    dangling = strength == 0.0
    transition = wgt / strength[src] if src.size else wgt

    p = np.full(n, 1.0 / n)
    residual = math.inf
    for iteration in range(1, MAX_ITERATIONS + 1):
        link_mass = np.bincount(dst, weights=p[src] * transition, minlength=n)
        dangling_mass = float(p[dangling].sum())
        p_next = tau / n + (1.0 - tau) * (link_mass + dangling_mass / n)
        residual = float(np.abs(p_next - p).sum())
        p = p_next
        if residual < CONVERGENCE_RESIDUAL:
            return VisitDistribution(tuple(nodes), tuple(float(x) for x in p),
                                     tau, residual, iteration)
    best = VisitDistribution(tuple(nodes), tuple(float(x) for x in p),
                             tau, residual, MAX_ITERATIONS)
    raise NoConvergence(
        f"stationary flow residual {residual:.3e} after {MAX_ITERATIONS} iterations",
        best=best)


def _flow_terms(graph: nx.DiGraph, flow: VisitDistribution):
    """Node teleport-spread masses and per-edge link flows of the walk."""
    nodes = list(flow.nodes)
    index = {v: i for i, v in enumerate(nodes)}
    n = len(nodes)
    p = np.asarray(flow.rates, dtype=float)
    tau = flow.tau
    src, dst, wgt = [], [], []
    for u, v in sorted(graph.edges()):
        w = float(graph[u][v].get("weight", 1.0))
        if w > 0:
            src.append(index[u])
            dst.append(index[v])
            wgt.append(w)
    src = np.asarray(src, dtype=np.intp)
    dst = np.asarray(dst, dtype=np.intp)
    wgt = np.asarray(wgt, dtype=float)
    strength = np.bincount(src, weights=wgt, minlength=n)
    dangling = strength == 0.0
    # tau p_a always spreads uniformly; a dangling node's (1 - tau) p_a does too
    tele = tau * p + np.where(dangling, (1.0 - tau) * p, 0.0)
    link = (1.0 - tau) * p[src] * (wgt / strength[src]) if src.size else wgt
    return nodes, p, tele, src, dst, link


@dataclass(frozen=True)
class Partition:
    """Node-to-module assignment with its map-equation bookkeeping."""

    assignment: Mapping
    codelength: float
    module_flow: tuple  # internal visit mass per module id
    module_exit: tuple  # exit probability q_m per module id
    tau: float

    @property
    def n_modules(self) -> int:
        return len(self.module_flow)

    def modules(self) -> list:
        """Module id -> sorted member list."""
        grouped: dict = {}
        for node in sorted(self.assignment):
            grouped.setdefault(self.assignment[node], []).append(node)
        return [grouped[m] for m in sorted(grouped)]

    def write_csv(self, path, comment: Optional[str] = None) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["node", "module"])
            for node in sorted(self.assignment):
                writer.writerow([node, self.assignment[node]])

    def summary_dict(self) -> dict:
        sizes = [0] * self.n_modules
        for node in self.assignment:
            sizes[self.assignment[node]] += 1
        return {
            "codelength": self.codelength,
            "n_modules": self.n_modules,
            "tau": self.tau,
            "module_sizes": sizes,
            "module_flow": list(self.module_flow),
            "module_exit": list(self.module_exit),
        }


def read_partition_csv(path) -> dict:
    """Read a `node,module` CSV (comment lines allowed) into a dict."""
    assignment = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    for row in rows[1:]:
        assignment[row[0]] = int(row[1])
    return assignment


def _partition_metrics(assignment: Mapping, flow: VisitDistribution, graph: nx.DiGraph):
    """From-scratch module quantities: relabeled assignment, L, flows, exits."""
    nodes, p, tele, src, dst, link = _flow_terms(graph, flow)
    n = len(nodes)
    labels: dict = {}
    mod_of = np.empty(n, dtype=np.intp)
    for i, node in enumerate(nodes):
        m = assignment[node]
        if m not in labels:
            labels[m] = len(labels)
        mod_of[i] = labels[m]
    n_modules = len(labels)
    visit = np.bincount(mod_of, weights=p, minlength=n_modules)
    tele_mass = np.bincount(mod_of, weights=tele, minlength=n_modules)
    counts = np.bincount(mod_of, minlength=n_modules)
    if src.size:
        boundary = mod_of[src] != mod_of[dst]
        exit_flow = np.bincount(mod_of[src][boundary], weights=link[boundary],
                                minlength=n_modules)
    else:
        exit_flow = np.zeros(n_modules)
    q = tele_mass * (n - counts) / n + exit_flow
    q_total = float(q.sum())
    codelen = (_plogp(q_total) - 2.0 * _plogp_sum(q) + _plogp_sum(visit + q)
               - _plogp_sum(p))
    relabeled = {node: int(mod_of[i]) for i, node in enumerate(nodes)}
    return relabeled, codelen, tuple(float(x) for x in visit), tuple(float(x) for x in q)


def codelength(partition, flow: VisitDistribution, net) -> float:
    """Two-level description length (bits) of a partition; pure recompute."""
    graph = as_digraph(net)
    assignment = getattr(partition, "assignment", partition)
    missing = [v for v in graph.nodes() if v not in assignment]
    if missing:
        raise IncompletePartition(f"{len(missing)} nodes lack a module "
                                  f"(e.g. {sorted(missing)[:3]})")
    _, codelen, _, _ = _partition_metrics(assignment, flow, graph)
    return codelen


def _greedy_level(visit, tele, count, out_links, in_links, n_physical, node_term, rng):
    """One Louvain level: sweep supernodes until no move improves codelength.

    Module exit is maintained incrementally through every move; per-sweep the
    aggregate sums are refreshed from the per-module state so float drift
    cannot accumulate across sweeps. Returns (membership, moved_any,
    module-state dicts, codelength).
    """
    size = len(visit)
    membership = list(range(size))
    mod_visit = {i: visit[i] for i in range(size)}
    mod_tele = {i: tele[i] for i in range(size)}
    mod_count = {i: count[i] for i in range(size)}
    mod_exit = {i: sum(out_links[i].values()) for i in range(size)}
    mod_size = {i: 1 for i in range(size)}
    next_id = size

    def q_of(m):
        return max(0.0, mod_tele[m] * (n_physical - mod_count[m]) / n_physical
                   + mod_exit[m])

    mod_q = {m: q_of(m) for m in mod_visit}
    q_total = sum(mod_q[m] for m in sorted(mod_q))

    moved_any = False
    while True:
        order = list(range(size))
        rng.shuffle(order)
        moves = 0
        for i in order:
            a = membership[i]
            out_to: dict = {}
            for j, f in out_links[i].items():
                m = membership[j]
                out_to[m] = out_to.get(m, 0.0) + f
            in_from: dict = {}
            for j, f in in_links[i].items():
                m = membership[j]
                in_from[m] = in_from.get(m, 0.0) + f
            tot_out = sum(out_links[i].values())

            candidates = sorted(m for m in set(out_to) | set(in_from) if m != a)
            if mod_size[a] > 1:
                candidates.append(next_id)  # breaking out into a fresh module
            if not candidates:
                continue

            # quantities of module a after removing i
            va2 = mod_visit[a] - visit[i]
            ta2 = mod_tele[a] - tele[i]
            ca2 = mod_count[a] - count[i]
            ea2 = mod_exit[a] - (tot_out - out_to.get(a, 0.0)) + in_from.get(a, 0.0)
            qa = mod_q[a]
            qa2 = max(0.0, ta2 * (n_physical - ca2) / n_physical + ea2)

            best = None  # (delta, module, qb2, eb2)
            for b in candidates:
                vb = mod_visit.get(b, 0.0)
                tb = mod_tele.get(b, 0.0)
                cb = mod_count.get(b, 0)
                eb = mod_exit.get(b, 0.0)
                qb = mod_q.get(b, 0.0)
                vb2 = vb + visit[i]
                tb2 = tb + tele[i]
                cb2 = cb + count[i]
                eb2 = eb + (tot_out - out_to.get(b, 0.0)) - in_from.get(b, 0.0)
                qb2 = max(0.0, tb2 * (n_physical - cb2) / n_physical + eb2)
                q_total2 = q_total - qa - qb + qa2 + qb2
                delta = (_plogp(q_total2) - _plogp(q_total)
                         - 2.0 * (_plogp(qa2) + _plogp(qb2) - _plogp(qa) - _plogp(qb))
                         + _plogp(va2 + qa2) + _plogp(vb2 + qb2)
                         - _plogp(mod_visit[a] + qa) - _plogp(vb + qb))
                if best is None or delta < best[0]:
                    best = (delta, b, qb2, eb2)

            if best is not None and best[0] < -MIN_GAIN:
                delta, b, qb2, eb2 = best
                qb_old = mod_q.get(b, 0.0)
                membership[i] = b
                fresh = b not in mod_visit
                mod_visit[b] = mod_visit.get(b, 0.0) + visit[i]
                mod_tele[b] = mod_tele.get(b, 0.0) + tele[i]
                mod_count[b] = mod_count.get(b, 0) + count[i]
                mod_size[b] = mod_size.get(b, 0) + 1
                mod_exit[b] = eb2
                mod_q[b] = qb2
                if fresh:
                    next_id += 1
                mod_size[a] -= 1
                if mod_size[a] == 0:
                    for table in (mod_visit, mod_tele, mod_count, mod_exit,
                                  mod_size, mod_q):
                        del table[a]
                    q_total = q_total - qa - qb_old + qb2
                else:
                    mod_visit[a] = va2
                    mod_tele[a] = ta2
                    mod_count[a] = ca2
                    mod_exit[a] = ea2
                    mod_q[a] = qa2
                    q_total = q_total - qa - qb_old + qa2 + qb2
                moves += 1
                moved_any = True
        # refresh aggregate sums so float drift cannot survive a sweep
        mod_q = {m: q_of(m) for m in mod_visit}
        q_total = sum(mod_q[m] for m in sorted(mod_q))
        if moves == 0:
            break

    codelen = (_plogp(q_total)
               - 2.0 * _plogp_sum(mod_q[m] for m in sorted(mod_q))
               + _plogp_sum(mod_visit[m] + mod_q[m] for m in sorted(mod_q))
               - node_term)
    state = {"visit": mod_visit, "tele": mod_tele, "count": mod_count,
             "exit": mod_exit, "q": mod_q}
    return membership, moved_any, state, codelen


def optimize(net, flow: Optional[VisitDistribution] = None, seed=0,
             tau: float = DEFAULT_TAU) -> Partition:
    """Greedy map-equation minimization (node moves + module aggregation).

    Deterministic for a given seed: the seed drives the per-sweep visit
    order. Aggregation keeps the original node count in the teleportation
    exit term, so codelengths agree with from-scratch evaluation on the
    original graph at every level.
    """
    graph = as_digraph(net)
    if graph.number_of_nodes() == 0:
        raise EmptyNetwork("cannot cluster an empty network")
    if flow is None:
        flow = stationary_flow(graph, tau)
    nodes, p, tele_arr, src, dst, link = _flow_terms(graph, flow)
    n_physical = len(nodes)
    node_term = _plogp_sum(p)

    visit = [float(x) for x in p]
    tele = [float(x) for x in tele_arr]
    count = [1] * n_physical
    out_links = [dict() for _ in range(n_physical)]
    in_links = [dict() for _ in range(n_physical)]
    for s, d, f in zip(src, dst, link):
        if s == d:
            continue  # self-flow is internal under any partition
        s, d, f = int(s), int(d), float(f)
        out_links[s][d] = out_links[s].get(d, 0.0) + f
        in_links[d][s] = in_links[d].get(s, 0.0) + f

    rng = random.Random(seed)
    orig_to_super = list(range(n_physical))

    while True:
        membership, moved, state, codelen = _greedy_level(
            visit, tele, count, out_links, in_links, n_physical, node_term, rng)
        if not moved:
            break
        active = sorted(state["visit"])
        new_index = {m: k for k, m in enumerate(active)}
        size = len(active)
        new_visit = [state["visit"][m] for m in active]
        new_tele = [state["tele"][m] for m in active]
        new_count = [state["count"][m] for m in active]
        new_out = [dict() for _ in range(size)]
        new_in = [dict() for _ in range(size)]
        for i in range(len(visit)):
            a = new_index[membership[i]]
            for j in sorted(out_links[i]):
                b = new_index[membership[j]]
                if a != b:
                    f = out_links[i][j]
                    new_out[a][b] = new_out[a].get(b, 0.0) + f
                    new_in[b][a] = new_in[b].get(a, 0.0) + f
        orig_to_super = [new_index[membership[s]] for s in orig_to_super]
        visit, tele, count = new_visit, new_tele, new_count
        out_links, in_links = new_out, new_in

    labels: dict = {}
    assignment = {}
    for k, node in enumerate(nodes):
        m = membership[orig_to_super[k]]
        if m not in labels:
            labels[m] = len(labels)
        assignment[node] = labels[m]
    module_flow = [0.0] * len(labels)
    module_exit = [0.0] * len(labels)
    for m, label in labels.items():
        module_flow[label] = state["visit"][m]
        module_exit[label] = state["q"][m]
    return Partition(assignment=assignment, codelength=codelen,
                     module_flow=tuple(module_flow), module_exit=tuple(module_exit),
                     tau=flow.tau)


def optimize_restarts(net, flow: Optional[VisitDistribution] = None,
                      restarts: int = 10, seed=0,
                      tau: float = DEFAULT_TAU) -> tuple:
    """Best of R seeded runs; child seeds derive deterministically from seed.

    Returns (best partition, list of per-restart codelengths).
    """
    if restarts < 1:
        raise OutOfRange(f"restarts must be >= 1, got {restarts}")
    graph = as_digraph(net)
    if flow is None:
        flow = stationary_flow(graph, tau)
    best = None
    codelengths = []
    for r in range(restarts):
        part = optimize(graph, flow, seed=f"{seed}:{r}", tau=tau)
        codelengths.append(part.codelength)
        if best is None or part.codelength < best.codelength - 1e-12:
            best = part
    return best, codelengths


def cluster_undirected(net, seed=0, tau: float = DEFAULT_TAU,
                       restarts: int = 1) -> Partition:
    """Map-equation clustering of an undirected weighted graph.

    The graph is symmetrized into a doubly-directed one and optimized on its
    edge-bearing part; isolated nodes carry no flow to compress and become
    singleton modules appended after the optimized ones. The reported
    codelength is evaluated over the full graph so it can be recomputed
    from scratch.
    """
    graph = as_digraph(net)
    if graph.number_of_nodes() == 0:
        raise EmptyNetwork("cannot cluster an empty network")
    isolated = [v for v in sorted(graph.nodes())
                if graph.in_degree(v) == 0 and graph.out_degree(v) == 0]
    edged = graph.subgraph(v for v in graph.nodes() if v not in set(isolated))

    assignment: dict = {}
    if edged.number_of_nodes() > 0:
        sub_flow = stationary_flow(edged, tau)
        if restarts > 1:
            part, _ = optimize_restarts(edged, sub_flow, restarts=restarts, seed=seed, tau=tau)
        else:
            part = optimize(edged, sub_flow, seed=seed, tau=tau)
        assignment.update(part.assignment)
    offset = (max(assignment.values()) + 1) if assignment else 0
    for k, v in enumerate(isolated):
        assignment[v] = offset + k

    full_flow = stationary_flow(graph, tau)
    relabeled, codelen, module_flow, module_exit = _partition_metrics(
        assignment, full_flow, graph)
    return Partition(assignment=relabeled, codelength=codelen,
                     module_flow=module_flow, module_exit=module_exit, tau=tau)
