#!/usr/bin/env python3
"""Tests for the hybrid OMA/NOMA resource-pool simulator."""

import math

import pytest

from engine.errors import ConfigError
from engine.sysim import (
    ClusterTraffic,
    NomaPartition,
    PhyConfig,
    ResourcePoolConfig,
    SimMode,
    TrafficConfig,
    analytic_success_probability,
    run_system_sim,
    write_system_metrics,
)


def single_cluster(frames, gfrus=1, pool=15, capability=2, selection="random", **traffic):
    pools = ResourcePoolConfig([NomaPartition("a", gfrus, pool, capability, selection)], frame_count=frames)
    return pools, TrafficConfig({"a": ClusterTraffic(**traffic)})


def test_analytic_success_values():
    assert analytic_success_probability(1.0, 15, 2) == pytest.approx(math.exp(-1) * (1 + 14 / 15))
    assert analytic_success_probability(0.0, 15, 2) == 1.0
    assert analytic_success_probability(3.0, 15, 0) == 0.0
    with pytest.raises(ValueError):
        analytic_success_probability(-1.0, 15, 2)


def test_zero_load_gives_zero_throughput():
    metrics = run_system_sim(*single_cluster(200, rate=0.0)).clusters["a"]
    assert metrics.throughput == 0.0
    assert metrics.packets == 0
    assert math.isnan(metrics.success_prob)
    assert metrics.occupancy == {0: 200}


def test_two_fixed_packets_collide_only_on_equal_signatures():
    frames = 3000
    metrics = run_system_sim(*single_cluster(frames, fixed_arrivals=2), seed=1).clusters["a"]
    expected = 14 / 15
    sigma = math.sqrt(expected * (1 - expected) / frames)
    assert abs(metrics.success_prob - expected) < 4 * sigma
    assert metrics.occupancy == {2: frames}


def test_overload_beyond_capability_loses_everything():
    metrics = run_system_sim(*single_cluster(300, fixed_arrivals=3)).clusters["a"]
    assert metrics.successes == 0
    assert metrics.collided == metrics.packets == 900
    assert metrics.collision_rate == 1.0


def test_poisson_load_matches_analytic_success():
    metrics = run_system_sim(*single_cluster(20_000, rate=1.0), seed=7).clusters["a"]
    assert metrics.success_prob == pytest.approx(analytic_success_probability(1.0, 15, 2), abs=0.015)
    assert metrics.throughput == pytest.approx(metrics.successes / 20_000)


def test_occupancy_counts_every_gfru_in_every_frame():
    metrics = run_system_sim(*single_cluster(1000, gfrus=4, rate=0.5), seed=5).clusters["a"]
    assert sum(metrics.occupancy.values()) == 1000 * 4
    assert sum(size * n for size, n in metrics.occupancy.items()) == metrics.packets
    assert metrics.occupancy[0] > metrics.occupancy[1]


@pytest.mark.parametrize("rate,pool,capability", [
    (0.5, 7, 1),
    (0.5, 15, 3),
    (2.0, 7, 2),
    (2.0, 15, 3),
    (3.0, 31, 4),
])
def test_monte_carlo_matches_analytic_grid(rate, pool, capability):
    metrics = run_system_sim(*single_cluster(20_000, pool=pool, capability=capability, rate=rate), seed=13)
    expected = analytic_success_probability(rate, pool, capability)
    assert metrics.clusters["a"].success_prob == pytest.approx(expected, abs=0.025)


def test_throughput_grows_with_gfru_count():
    throughputs = [
        run_system_sim(*single_cluster(2000, gfrus=g, rate=4.0), seed=21).clusters["a"].throughput
        for g in (1, 2, 4, 8)
    ]
    assert throughputs == sorted(throughputs)


def test_predefined_selection_spreads_a_full_population():
    pools, traffic = single_cluster(100, gfrus=4, selection="predefined", population=4, fixed_arrivals=4)
    metrics = run_system_sim(pools, traffic).clusters["a"]
    assert metrics.success_prob == 1.0
    assert metrics.occupancy == {1: 400}


def test_partition_without_gfrus_drops_all_packets():
    metrics = run_system_sim(*single_cluster(50, gfrus=0, fixed_arrivals=2)).clusters["a"]
    assert metrics.successes == 0
    assert metrics.collided == 100


def test_clusters_are_isolated():
    pools = ResourcePoolConfig([NomaPartition("a", 2, 15, 2), NomaPartition("b", 2, 15, 2)], frame_count=500)
    light = run_system_sim(pools, TrafficConfig({"a": ClusterTraffic(1.0), "b": ClusterTraffic(0.5)}), seed=3)
    heavy = run_system_sim(pools, TrafficConfig({"a": ClusterTraffic(1.0), "b": ClusterTraffic(6.0)}), seed=3)
    a_light, a_heavy = light.clusters["a"], heavy.clusters["a"]
    assert (a_light.packets, a_light.successes) == (a_heavy.packets, a_heavy.successes)
    assert heavy.clusters["b"].success_prob < light.clusters["b"].success_prob


def test_full_phy_does_no_worse_than_abstract_rule():
    pools, traffic = single_cluster(500, gfrus=4, rate=1.0)
    abstract = run_system_sim(pools, traffic, SimMode.ABSTRACT, seed=2).clusters["a"]
    full = run_system_sim(pools, traffic, SimMode.FULL_PHY, seed=2, phy=PhyConfig(k=4)).clusters["a"]
    assert full.packets == abstract.packets
    p = abstract.success_prob
    margin = 3 * math.sqrt(p * (1 - p) / abstract.packets)
    assert full.success_prob >= p - margin


def test_full_phy_pool_must_match_field():
    pools, traffic = single_cluster(10, pool=12, rate=1.0)
    with pytest.raises(ConfigError):
        run_system_sim(pools, traffic, SimMode.FULL_PHY, phy=PhyConfig(k=4))


def test_configuration_checks():
    with pytest.raises(ConfigError):
        ResourcePoolConfig([])
    with pytest.raises(ConfigError):
        ResourcePoolConfig([NomaPartition("a", 1, 15, 2), NomaPartition("a", 1, 15, 2)])
    with pytest.raises(ConfigError):
        NomaPartition("a", 1, 15, 2, gfru_selection="round_robin")
    with pytest.raises(ConfigError):
        ClusterTraffic(rate=-1.0)


def test_metrics_csv(tmp_path):
    metrics = run_system_sim(*single_cluster(20, rate=1.0))
    path = write_system_metrics(metrics, tmp_path / "out" / "sysim.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "cluster_id,frames,offered_load,throughput,success_prob,collision_rate"
    assert lines[1].startswith("a,20,1,")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
