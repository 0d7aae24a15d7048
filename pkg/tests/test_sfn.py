"""Network-construction tests with closed-form and Floyd-Warshall oracles."""

import math
import random
from datetime import date, timedelta

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sfnet.ballast import fit_discharge_models
from sfnet.errors import EmptyNetwork, OutOfRange
from sfnet.ingest import DischargeEvent, VoyageLeg
from sfnet.sfn import (
    DEFAULT_MU,
    SpeciesFlowNetwork,
    aggregate_edge_weight,
    build_sfn,
    calibrate_lambda,
    degree_distribution,
    introduction_probability,
    network_stats,
)


def constant_discharge_model(volume):
    """A model predicting the same volume for every type and DWT."""
    return fit_discharge_models([DischargeEvent("Other", 1.0, volume),
                                 DischargeEvent("Other", 2.0, volume)])


def leg(origin, dest, days=0, vessel="V1", vtype="Container", dwt=50_000.0, start=date(2005, 1, 1)):
    return VoyageLeg(vessel, vtype, dwt, origin, dest, start, start + timedelta(days=days))


class TestCalibrateLambda:
    def test_reference_anchor(self):
        lam = calibrate_lambda(500_000.0, 0.8)
        assert math.isclose(lam, math.log(5.0) / 500_000.0, rel_tol=1e-12)

    def test_round_trip_identity(self):
        lam = calibrate_lambda(500_000.0, 0.8)
        assert abs((1.0 - math.exp(-lam * 500_000.0)) - 0.8) < 1e-12

    def test_small_probability_limit(self):
        p = 1e-9
        lam = calibrate_lambda(1.0, p)
        assert math.isclose(lam, p, rel_tol=1e-6)

    def test_out_of_range(self):
        for volume, prob in [(0.0, 0.5), (-1.0, 0.5), (1.0, 0.0), (1.0, 1.0), (1.0, 1.5)]:
            with pytest.raises(OutOfRange):
                calibrate_lambda(volume, prob)


class TestIntroductionProbability:
    def test_reference_point(self):
        lam = calibrate_lambda()
        assert abs(introduction_probability(500_000.0, 0.0, 1.0, lam, DEFAULT_MU) - 0.8) < 1e-12

    def test_annihilating_factors(self):
        lam = calibrate_lambda()
        assert introduction_probability(500_000.0, 3.0, 0.0, lam, DEFAULT_MU) == 0.0
        assert introduction_probability(0.0, 3.0, 1.0, lam, DEFAULT_MU) == 0.0

    def test_matches_direct_formula(self):
        rng = random.Random(17)
        lam = calibrate_lambda()
        for _ in range(300):
            d = rng.uniform(0.0, 1e6)
            dt = rng.uniform(0.0, 60.0)
            rho = rng.uniform(0.0, 1.0)
            got = introduction_probability(d, dt, rho, lam, DEFAULT_MU)
            want = rho * (1.0 - math.exp(-lam * d)) * math.exp(-DEFAULT_MU * dt)
            assert abs(got - want) < 1e-12
            assert 0.0 <= got <= rho

    def test_monotone_finite_differences(self):
        lam = calibrate_lambda()
        step = 1e-6
        for d, dt in [(1e4, 5.0), (2e5, 10.0), (7e5, 0.5)]:
            base = introduction_probability(d, dt, 1.0, lam, DEFAULT_MU)
            up_d = introduction_probability(d * (1 + step), dt, 1.0, lam, DEFAULT_MU)
            up_t = introduction_probability(d, dt * (1 + step), 1.0, lam, DEFAULT_MU)
            assert up_d >= base * (1 - 1e-4)
            assert up_d >= base
            assert up_t <= base

    def test_out_of_range(self):
        lam = calibrate_lambda()
        with pytest.raises(OutOfRange):
            introduction_probability(-1.0, 0.0, 1.0, lam, DEFAULT_MU)
        with pytest.raises(OutOfRange):
            introduction_probability(1.0, -0.5, 1.0, lam, DEFAULT_MU)
        with pytest.raises(OutOfRange):
            introduction_probability(1.0, 0.0, 1.5, lam, DEFAULT_MU)


class TestAggregateEdgeWeight:
    def test_examples(self):
        assert aggregate_edge_weight([0.37]) == pytest.approx(0.37, abs=1e-15)
        assert aggregate_edge_weight([0.5, 0.5]) == pytest.approx(0.75, abs=1e-15)
        assert aggregate_edge_weight([0.2, 1.0, 0.3]) == 1.0
        assert aggregate_edge_weight([]) == 0.0

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), max_size=12))
    def test_order_invariant_and_bounded(self, ps):
        w = aggregate_edge_weight(ps)
        assert 0.0 <= w <= 1.0
        shuffled = list(ps)
        random.Random(0).shuffle(shuffled)
        assert aggregate_edge_weight(shuffled) == w

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), max_size=10),
           st.floats(min_value=0.0, max_value=1.0))
    def test_monotone_under_new_voyages(self, ps, extra):
        assert aggregate_edge_weight(ps + [extra]) >= aggregate_edge_weight(ps) - 1e-15


class TestBuildSfn:
    def test_single_anchor_leg(self):
        model = constant_discharge_model(500_000.0)
        net = build_sfn([leg("A", "B", days=0)], model)
        assert net.n_edges == 1
        assert abs(net.weight("A", "B") - 0.8) < 1e-9

    def test_duplicate_legs_closed_form(self):
        model = constant_discharge_model(500_000.0)
        lam = calibrate_lambda()
        p = introduction_probability(500_000.0, 3, 1.0, lam, DEFAULT_MU)
        for k in (1, 2, 5):
            net = build_sfn([leg("A", "B", days=3) for _ in range(k)], model)
            assert net.weight("A", "B") == pytest.approx(1 - (1 - p) ** k, rel=1e-12)
            assert net.graph["A"]["B"]["voyages"] == k

    def test_zero_legs_empty_network(self):
        net = build_sfn([], constant_discharge_model(1000.0))
        assert net.n_nodes == 0 and net.n_edges == 0

    def test_registered_ports_become_isolated_nodes(self):
        net = build_sfn([leg("A", "B")], constant_discharge_model(1000.0),
                        ports=["A", "B", "C", "D"])
        assert set(net.graph.nodes()) == {"A", "B", "C", "D"}
        assert net.graph.degree("C") == 0

    def test_edge_floor_drops_negligible_edges(self):
        model = constant_discharge_model(1.0)  # tiny discharge, tiny probability
        long_leg = leg("A", "B", days=2000)    # heavy mortality decay
        net = build_sfn([long_leg], model, floor=1e-12)
        assert net.n_edges == 0
        assert set(net.graph.nodes()) == {"A", "B"}

    def test_leg_order_invariance_exact(self):
        model = constant_discharge_model(50_000.0)
        legs = [leg("A", "B", days=d, vessel=f"V{d}") for d in (1, 4, 9, 16)]
        legs += [leg("B", "C", days=d, vessel=f"W{d}") for d in (2, 3)]
        forward = build_sfn(legs, model)
        backward = build_sfn(list(reversed(legs)), model)
        assert list(forward.edges()) == list(backward.edges())

    def test_rho_override_scales_single_route(self):
        model = constant_discharge_model(500_000.0)
        legs = [leg("A", "B", days=0), leg("B", "C", days=0)]
        net = build_sfn(legs, model, rho_overrides={("A", "B"): 0.5})
        assert net.weight("A", "B") == pytest.approx(0.4, rel=1e-12)
        assert net.weight("B", "C") == pytest.approx(0.8, rel=1e-12)

    def test_weights_within_unit_interval(self):
        model = constant_discharge_model(250_000.0)
        rng = random.Random(3)
        legs = [leg(f"P{rng.randrange(6)}", f"Q{rng.randrange(6)}", days=rng.randrange(30),
                    vessel=f"V{i}") for i in range(200)]
        net = build_sfn(legs, model)
        for _, _, w, _ in net.edges():
            assert 0.0 < w <= 1.0

    def test_edge_csv_round_trip(self, tmp_path):
        model = constant_discharge_model(100_000.0)
        net = build_sfn([leg("A", "B", days=2), leg("B", "C", days=5)], model)
        path = tmp_path / "edges.csv"
        net.write_edge_csv(path, comment="config_hash=abc123")
        again = SpeciesFlowNetwork.from_edge_csv(path, lam=net.lam)
        assert list(again.edges()) == list(net.edges())
        assert path.read_text().startswith("# config_hash=abc123\n")


def fw_oracle(graph):
    """Min-plus Floyd-Warshall distances, fully independent of the BFS code."""
    nodes = sorted(graph.nodes())
    idx = {v: i for i, v in enumerate(nodes)}
    n = len(nodes)
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v in graph.edges():
        dist[idx[u], idx[v]] = 1.0
    for k in range(n):
        dist = np.minimum(dist, dist[:, [k]] + dist[[k], :])
    off = ~np.eye(n, dtype=bool)
    finite = np.isfinite(dist) & off
    total = dist[finite].sum()
    return (total / finite.sum() if finite.sum() else 0.0,
            int(dist[finite].max()) if finite.sum() else 0,
            int((off & ~np.isfinite(dist)).sum()))


class TestNetworkStats:
    def as_net(self, graph):
        net = SpeciesFlowNetwork(lam=1.0)
        net.graph = graph
        return net

    def test_directed_three_cycle(self):
        graph = nx.DiGraph([("A", "B"), ("B", "C"), ("C", "A")])
        stats = network_stats(self.as_net(graph))
        assert stats.average_path_length == pytest.approx(1.5)
        assert stats.diameter == 2
        assert stats.density == pytest.approx(0.5)
        assert stats.average_in_degree == pytest.approx(1.0)
        assert stats.unreachable_pairs == 0

    def test_complete_digraph(self):
        graph = nx.complete_graph(4, create_using=nx.DiGraph)
        stats = network_stats(graph)
        assert stats.average_path_length == pytest.approx(1.0)
        assert stats.diameter == 1
        assert stats.density == pytest.approx(1.0)

    def test_two_disconnected_dyads(self):
        graph = nx.DiGraph([("A", "B"), ("B", "A"), ("C", "D"), ("D", "C")])
        stats = network_stats(graph)
        assert stats.unreachable_pairs == 8
        assert stats.average_path_length == pytest.approx(1.0)

    def test_empty_raises(self):
        with pytest.raises(EmptyNetwork):
            network_stats(nx.DiGraph())

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_floyd_warshall_oracle(self, seed):
        rng = random.Random(seed)
        n = rng.randrange(2, 64)
        graph = nx.gnp_random_graph(n, rng.uniform(0.02, 0.3), seed=seed, directed=True)
        stats = network_stats(graph)
        avg, diam, unreachable = fw_oracle(graph)
        assert stats.average_path_length == pytest.approx(avg, abs=1e-12)
        assert stats.diameter == diam
        assert stats.unreachable_pairs == unreachable


class TestDegreeDistribution:
    def test_star(self):
        graph = nx.DiGraph((f"L{i}", "HUB") for i in range(7))
        dist = degree_distribution(graph)
        assert dist.histogram == {1: 7, 7: 1}

    def test_regular_single_bin_has_no_slope(self):
        graph = nx.DiGraph([("A", "B"), ("B", "C"), ("C", "A")])
        dist = degree_distribution(graph)
        assert dist.histogram == {2: 3}
        assert dist.loglog_slope is None

    def test_heavy_tail_has_negative_slope(self):
        base = nx.barabasi_albert_graph(300, 2, seed=1)
        graph = nx.DiGraph()
        graph.add_edges_from(base.edges())
        dist = degree_distribution(graph)
        assert dist.loglog_slope is not None and dist.loglog_slope < 0

    def test_empty_raises(self):
        with pytest.raises(EmptyNetwork):
            degree_distribution(nx.DiGraph())
