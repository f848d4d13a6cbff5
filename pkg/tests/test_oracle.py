"""Tests for the brute-force grid oracles."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import embed_bad_y_block, make_aggregate, make_cd, make_nested
from phrp.model import MarketStatistics, Status, partition
from phrp.oracle import (
    GridSpec,
    SizeLimitError,
    oracle_collective,
    oracle_harp,
    oracle_separability,
)


class TestGridSpec:
    def test_default_resolution_rule(self):
        grid = GridSpec()
        assert grid.points_per_dim(1) == 200
        assert grid.points_per_dim(2) == 200
        assert grid.points_per_dim(3) == 40
        assert grid.points_per_dim(4) == 40

    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec(resolution=1)
        with pytest.raises(ValueError):
            GridSpec(tolerance=0.0)


class TestOracleHarp:
    def test_feasible_example(self, feasible2):
        assert oracle_harp(feasible2).status is Status.FEASIBLE

    def test_infeasible_example(self, infeasible2):
        decision = oracle_harp(infeasible2)
        assert decision.status is Status.INFEASIBLE
        assert "0.888889" in decision.detail

    def test_single_period(self):
        stats = MarketStatistics(prices=[[1.0]], quantities=[[1.0]])
        assert oracle_harp(stats).status is Status.FEASIBLE

    def test_size_limit(self):
        stats = make_cd(0, periods=5, goods=2)
        with pytest.raises(SizeLimitError):
            oracle_harp(stats)

    def test_deterministic(self, feasible2):
        d1 = oracle_harp(feasible2)
        d2 = oracle_harp(feasible2)
        assert d1 == d2

    @pytest.mark.parametrize("seed", range(5))
    def test_cobb_douglas_feasible(self, seed):
        stats = make_cd(seed, periods=3, goods=2)
        assert oracle_harp(stats).status is Status.FEASIBLE


class TestOracleSeparability:
    def test_single_period(self):
        stats = MarketStatistics(prices=[[1.0, 2.0]], quantities=[[1.0, 1.0]])
        assert oracle_separability(partition(stats, [1])).status is Status.FEASIBLE

    def test_nested_t2(self):
        part = make_nested(0, periods=2, q_goods=2, y_goods=2)
        assert oracle_separability(part).status is Status.FEASIBLE

    def test_nested_t3(self):
        # at three periods the default grid (40 points per dimension) is
        # often too coarse to certify; it must never reject separable data
        part = make_nested(1, periods=3, q_goods=2, y_goods=2)
        assert oracle_separability(part).status in (Status.FEASIBLE, Status.UNDECIDED)

    def test_bad_y_block(self):
        part = embed_bad_y_block(0, periods=2)
        assert oracle_separability(part).status is Status.INFEASIBLE

    def test_size_limit(self):
        part = make_nested(0, periods=4, q_goods=2, y_goods=2)
        with pytest.raises(SizeLimitError):
            oracle_separability(part)


class TestOracleCollective:
    def test_k1_delegates(self, infeasible2):
        assert oracle_collective(infeasible2, 1).status is Status.INFEASIBLE

    def test_aggregate_feasible(self):
        agg, _ = make_aggregate(0, periods=2, goods=2)
        assert oracle_collective(agg, 2).status is Status.FEASIBLE

    def test_feasible_single_consumer_data_half_split(self):
        stats = make_cd(3, periods=2, goods=2)
        assert oracle_collective(stats, 2).status is Status.FEASIBLE

    def test_single_period(self):
        stats = MarketStatistics(prices=[[1.0, 1.0]], quantities=[[1.0, 2.0]])
        assert oracle_collective(stats, 2).status is Status.FEASIBLE

    def test_size_limits(self):
        big_t = make_cd(0, periods=3, goods=2)
        with pytest.raises(SizeLimitError):
            oracle_collective(big_t, 2)
        big_n = make_cd(0, periods=2, goods=3)
        with pytest.raises(SizeLimitError):
            oracle_collective(big_n, 2)
        ok = make_cd(0, periods=2, goods=2)
        with pytest.raises(SizeLimitError):
            oracle_collective(ok, 3)

    def test_never_claims_infeasible_for_k2(self):
        # splits near specialization corners defeat any finite grid margin
        for seed in range(10):
            rng = np.random.default_rng(seed)
            stats = MarketStatistics(
                prices=np.exp(rng.uniform(-1.5, 1.5, (2, 2))),
                quantities=np.exp(rng.uniform(-1.5, 1.5, (2, 2))),
            )
            assert oracle_collective(stats, 2).status is not Status.INFEASIBLE
