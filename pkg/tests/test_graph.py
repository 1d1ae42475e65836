"""Tests for contact-network generation, summary measures, and edge-list I/O."""

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from nettmle.errors import GraphGenerationError
from nettmle.graph import (
    SecondOrderClosure,
    TemporalNetwork,
    generate_power_law_clustered,
    generate_uniform,
    read_edge_list,
    second_order_closure,
    summary_covariate,
    summary_exposure,
    write_edge_list,
)


def _path_network(n: int) -> TemporalNetwork:
    return TemporalNetwork.from_edges(n, [(i, i + 1) for i in range(n - 1)])


# ── Generators ──────────────────────────────────────────────


def test_uniform_degrees_within_bounds():
    """Every node's degree lies in [d_min, d_max]."""
    net = generate_uniform(300, 1, 6, seed=1)
    degrees = net.degrees()
    assert net.n == 300
    assert degrees.min() >= 1
    assert degrees.max() <= 6


def test_uniform_is_simple_graph():
    """No self-loops and a symmetric adjacency matrix."""
    net = generate_uniform(100, 2, 4, seed=5)
    assert not net.base.diagonal().any()
    assert np.array_equal(net.base, net.base.T)


def test_uniform_is_seed_deterministic():
    """Same seed, same edges."""
    a = generate_uniform(150, 1, 6, seed=9)
    b = generate_uniform(150, 1, 6, seed=9)
    assert np.array_equal(a.base, b.base)


def test_uniform_rejects_bad_degree_range():
    """d_max must stay below n and d_min must not exceed d_max."""
    with pytest.raises(ValueError):
        generate_uniform(5, 1, 6, seed=0)
    with pytest.raises(ValueError):
        generate_uniform(50, 4, 2, seed=0)


def test_uniform_gives_up_after_retries(monkeypatch):
    """An infeasible degree sequence on every attempt raises GraphGenerationError."""

    def always_fail(*args, **kwargs):
        raise nx.NetworkXUnfeasible("no graph")

    monkeypatch.setattr(nx, "random_degree_sequence_graph", always_fail)
    with pytest.raises(GraphGenerationError):
        generate_uniform(50, 1, 6, seed=0, max_retries=3)


def test_power_law_has_heavy_tail():
    """Clustered power-law graphs have hubs well above the mean degree."""
    net = generate_power_law_clustered(500, n_subgraphs=5, seed=2)
    degrees = net.degrees()
    assert net.n == 500
    assert degrees.max() > 2.5 * degrees.mean()


def test_power_law_zero_cross_prob_separates_subgraphs():
    """With inter_edge_prob=0 the graph splits into at least n_subgraphs components."""
    net = generate_power_law_clustered(200, n_subgraphs=4, inter_edge_prob=0.0, seed=4)
    assert nx.number_connected_components(net.to_networkx()) >= 4


def test_power_law_validates_arguments():
    """Too few nodes, bad probability, or exponent <= 2 are rejected."""
    with pytest.raises(ValueError):
        generate_power_law_clustered(3, n_subgraphs=5)
    with pytest.raises(ValueError):
        generate_power_law_clustered(100, inter_edge_prob=1.5)
    with pytest.raises(ValueError):
        generate_power_law_clustered(100, powerlaw_exponent=2.0)


def test_uniform_degree_histogram_is_uniform():
    """Pooled degrees over 100 seeds pass a chi-square uniformity test on {1..6}."""
    pooled = np.concatenate([generate_uniform(500, 1, 6, seed=s).degrees() for s in range(100)])
    counts = np.bincount(pooled, minlength=7)[1:7]
    assert counts.sum() == pooled.size
    assert chisquare(counts).pvalue > 0.01


def test_power_law_beats_uniform_cap_on_most_seeds():
    """Max degree exceeds 6 on at least 95 of 100 seeds."""
    hits = sum(
        generate_power_law_clustered(500, n_subgraphs=5, powerlaw_exponent=2.5, inter_edge_prob=0.001, seed=s)
        .degrees()
        .max()
        > 6
        for s in range(100)
    )
    assert hits >= 95


def test_power_law_large_graph_is_not_degree_bounded():
    net = generate_power_law_clustered(1000, n_subgraphs=10, powerlaw_exponent=2.5, inter_edge_prob=0.0005, seed=1)
    assert net.degrees().max() > 6


def test_power_law_exponent_three_uses_networkx_holme_kim(monkeypatch):
    """The linear kernel is delegated to networkx, one call per subgraph."""
    calls = []
    real = nx.powerlaw_cluster_graph

    def spy(n, m, p, seed=None):
        calls.append((n, m, p))
        return real(n, m, p, seed=seed)

    monkeypatch.setattr(nx, "powerlaw_cluster_graph", spy)
    net = generate_power_law_clustered(300, n_subgraphs=3, powerlaw_exponent=3.0, inter_edge_prob=0.0, seed=5)
    assert calls == [(100, 2, 0.1)] * 3
    assert net.n_edges() > 0


def test_lower_exponent_grows_bigger_hubs():
    """Averaged over seeds, exponent 2.2 gives larger max degree than exponent 3."""
    heavy = np.mean([generate_power_law_clustered(500, 1, 2.2, 0.0, seed=s).degrees().max() for s in range(20)])
    light = np.mean([generate_power_law_clustered(500, 1, 3.0, 0.0, seed=s).degrees().max() for s in range(20)])
    assert heavy > light


def test_temporal_network_rejects_asymmetric_snapshot():
    """An asymmetric adjacency matrix is not a valid snapshot."""
    adj = np.zeros((3, 3), dtype=bool)
    adj[0, 1] = True
    with pytest.raises(ValueError):
        TemporalNetwork(n=3, snapshots=(adj,))


# ── Summary measures ────────────────────────────────────────


def test_summary_exposure_on_path():
    """On the path 0-1-2-3 with node 1 exposed, nodes 0 and 2 count one exposed contact."""
    net = _path_network(4)
    counts = summary_exposure(net.base, np.array([0, 1, 0, 0]))
    assert counts.tolist() == [1, 0, 1, 0]


def test_summary_exposure_length_mismatch():
    """Exposure vector length must match the snapshot."""
    with pytest.raises(ValueError):
        summary_exposure(_path_network(4).base, np.array([1, 0]))


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_summary_exposure_is_monotone(seed):
    """Exposing more nodes never lowers anyone's exposed-contact count."""
    rng = np.random.default_rng(seed)
    adj = np.triu(rng.random((20, 20)) < 0.2, k=1)
    adj = adj | adj.T
    fewer = rng.random(20) < 0.3
    more = fewer | (rng.random(20) < 0.3)
    assert (summary_exposure(adj, more) >= summary_exposure(adj, fewer)).all()


def test_summary_exposure_matches_double_loop():
    """On random 10-node graphs the count equals Σ_j 1(exposed_j)·γ_ij summed directly."""
    rng = np.random.default_rng(12)
    for _ in range(100):
        adj = np.triu(rng.random((10, 10)) < 0.3, k=1)
        adj = adj | adj.T
        exposures = (rng.random(10) < 0.5).astype(int)
        want = [sum(int(exposures[j] == 1 and adj[i, j]) for j in range(10)) for i in range(10)]
        assert summary_exposure(adj, exposures).tolist() == want


def test_summary_covariate_mean_of_isolated_node_is_zero():
    """Mean over an empty neighbourhood is 0."""
    net = TemporalNetwork.from_edges(3, [(0, 1)])
    values = np.array([2.0, 4.0, 9.0])
    assert summary_covariate(net.base, values, "mean").tolist() == [4.0, 2.0, 0.0]
    assert summary_covariate(net.base, values, "sum").tolist() == [4.0, 2.0, 0.0]


def test_summary_covariate_unknown_measure():
    with pytest.raises(ValueError):
        summary_covariate(_path_network(3).base, np.zeros(3), "median")


# ── Dependence relation ─────────────────────────────────────


def test_second_order_closure_on_path():
    """Two hops reach i±2 but not i±3."""
    reach = second_order_closure(_path_network(5)).reach
    assert reach[0, 2]
    assert not reach[0, 3]
    assert reach.diagonal().all()


def test_second_order_closure_uses_union_of_snapshots():
    """An edge present only in a later snapshot still links its endpoints."""
    base = np.zeros((3, 3), dtype=bool)
    later = base.copy()
    later[0, 1] = later[1, 0] = True
    net = TemporalNetwork(n=3, snapshots=(base, later))
    assert second_order_closure(net).reach[0, 1]


def _random_temporal(rng, n=12, steps=3):
    snapshots = []
    for _ in range(steps):
        adj = np.triu(rng.random((n, n)) < 0.15, k=1)
        snapshots.append(adj | adj.T)
    return TemporalNetwork(n=n, snapshots=tuple(snapshots))


def test_second_order_closure_matches_boolean_products():
    """On random 12-node temporal networks the relation is I ∨ U ∨ U² of the union U."""
    rng = np.random.default_rng(13)
    for _ in range(50):
        net = _random_temporal(rng)
        u = net.union()
        want = np.eye(12, dtype=bool)
        for i in range(12):
            for j in range(12):
                if u[i, j] or any(u[i, k] and u[k, j] for k in range(12)):
                    want[i, j] = True
        assert np.array_equal(second_order_closure(net).reach, want)


def test_second_order_closure_is_idempotent_on_one_hop():
    """Closing again over the one-hop part of the relation gives the same relation."""
    rng = np.random.default_rng(14)
    for _ in range(20):
        net = _random_temporal(rng)
        reach = second_order_closure(net).reach
        one_hop = reach & net.union()
        again = second_order_closure(TemporalNetwork(n=12, snapshots=(one_hop,)))
        assert np.array_equal(again.reach, reach)


def test_identity_closure():
    assert np.array_equal(SecondOrderClosure.identity(4).reach, np.eye(4, dtype=bool))


# ── Edge-list I/O ───────────────────────────────────────────


def test_edge_list_file_format(tmp_path):
    """Header line ``n=.. T=..`` and one ``t i j`` line per edge with i < j."""
    base = _path_network(3).base
    later = np.zeros_like(base)
    net = TemporalNetwork(n=3, snapshots=(base, later))
    path = tmp_path / "net.txt"
    write_edge_list(net, path)
    lines = path.read_text().splitlines()
    assert lines == ["n=3 T=1", "0 0 1", "0 1 2"]
    loaded = read_edge_list(path)
    assert loaded.time_horizon == 1
    assert np.array_equal(loaded.base, base)
    assert not loaded.snapshots[1].any()


def test_edge_list_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("nodes 3\n")
    with pytest.raises(ValueError):
        read_edge_list(path)
