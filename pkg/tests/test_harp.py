"""Tests for the exact PH-rationalizability test and utility recovery."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_cd
from phrp.harp import (
    AfriatCertificate,
    InvalidCertificateError,
    PiecewiseLinearUtility,
    build_cross_graph,
    check_harp,
    recover_utility,
    verify_certificate,
)
from phrp.model import MarketStatistics, Status


class TestCrossGraph:
    def test_weights_example(self, feasible2):
        graph = build_cross_graph(feasible2)
        assert graph.nodes == 2
        assert graph.weights[1, 0] == pytest.approx(np.log(1.5), abs=1e-15)
        assert graph.weights[0, 1] == pytest.approx(np.log(0.75), abs=1e-15)

    def test_identical_prices_zero_weights(self):
        rng = np.random.default_rng(3)
        stats = MarketStatistics(
            prices=np.tile(rng.uniform(0.5, 2, 3), (4, 1)),
            quantities=rng.uniform(0.5, 2, (4, 3)),
        )
        graph = build_cross_graph(stats)
        np.testing.assert_allclose(graph.weights, 0.0, atol=1e-12)

    def test_single_period(self):
        stats = MarketStatistics(prices=[[1.0, 2.0]], quantities=[[1.0, 1.0]])
        graph = build_cross_graph(stats)
        assert graph.weights.shape == (1, 1)
        assert graph.weights[0, 0] == 0.0


class TestCheckHarp:
    def test_feasible_example(self, feasible2):
        result = check_harp(feasible2)
        assert result.status is Status.FEASIBLE
        assert verify_certificate(feasible2, result.certificate)
        # the hand-derived multipliers are one valid certificate
        assert verify_certificate(feasible2, np.array([4.0 / 7.0, 3.0 / 7.0]))

    def test_infeasible_example(self, infeasible2):
        result = check_harp(infeasible2)
        assert result.status is Status.INFEASIBLE
        cycle = result.cycle
        assert cycle.periods == (0, 1, 0)
        assert cycle.cycle_ratio == pytest.approx(8.0 / 9.0, abs=1e-12)
        assert cycle.log_weight == pytest.approx(np.log(8.0 / 9.0), abs=1e-9)
        assert cycle.cycle_ratio < 1.0

    def test_single_period(self):
        stats = MarketStatistics(prices=[[3.0]], quantities=[[2.0]])
        result = check_harp(stats)
        assert result.status is Status.FEASIBLE
        np.testing.assert_array_equal(result.certificate.lambdas, [1.0])

    def test_bad_tolerance_rejected(self, feasible2):
        with pytest.raises(ValueError):
            check_harp(feasible2, tol=0.5)

    def test_tiny_negative_cycle_is_undecided(self):
        # cycle ratio 3(x+1)/(2(x+2)) with x = 1 - 6e-12: about 1 - 1e-12,
        # inside the default tolerance band, so neither verdict is safe
        x = 1.0 - 6e-12
        stats = MarketStatistics(
            prices=[[1.0, 1.0], [1.0, 2.0]], quantities=[[1.0, 1.0], [x, 1.0]]
        )
        result = check_harp(stats)
        assert result.status is Status.UNDECIDED
        # a coarser tolerance cannot flip it to INFEASIBLE either
        assert check_harp(stats, tol=1e-3).status is not Status.INFEASIBLE

    def test_duplicate_periods_kept(self, feasible2):
        doubled = MarketStatistics(
            prices=np.vstack([feasible2.prices, feasible2.prices]),
            quantities=np.vstack([feasible2.quantities, feasible2.quantities]),
        )
        result = check_harp(doubled)
        assert result.status is Status.FEASIBLE
        assert verify_certificate(doubled, result.certificate)

    @pytest.mark.parametrize("seed", range(8))
    def test_cobb_douglas_always_feasible(self, seed):
        stats = make_cd(seed, periods=2 + seed * 3, goods=2 + seed % 4)
        result = check_harp(stats)
        assert result.status is Status.FEASIBLE
        assert verify_certificate(stats, result.certificate)


class TestInvariances:
    @settings(max_examples=20, deadline=None, derandomize=True)
    @given(seed=st.integers(0, 500), c=st.floats(0.1, 10.0), row=st.integers(0, 3))
    def test_price_row_scaling(self, seed, c, row):
        stats = make_cd(seed, periods=4, goods=3)
        scaled = MarketStatistics(
            prices=stats.prices * np.where(np.arange(4)[:, None] == row, c, 1.0),
            quantities=stats.quantities,
        )
        assert check_harp(scaled).status is check_harp(stats).status

    @settings(max_examples=20, deadline=None, derandomize=True)
    @given(seed=st.integers(0, 500), c=st.floats(0.1, 10.0), row=st.integers(0, 3))
    def test_quantity_row_scaling(self, seed, c, row):
        stats = make_cd(seed, periods=4, goods=3)
        scaled = MarketStatistics(
            prices=stats.prices,
            quantities=stats.quantities
            * np.where(np.arange(4)[:, None] == row, c, 1.0),
        )
        assert check_harp(scaled).status is check_harp(stats).status

    @settings(max_examples=20, deadline=None, derandomize=True)
    @given(c=st.floats(0.1, 10.0), row=st.integers(0, 1))
    def test_scaling_preserves_infeasibility(self, c, row):
        base = MarketStatistics(
            prices=[[1.0, 1.0], [2.0, 1.0]], quantities=[[0.25, 0.5], [0.5, 0.5]]
        )
        scaled = MarketStatistics(
            prices=base.prices * np.where(np.arange(2)[:, None] == row, c, 1.0),
            quantities=base.quantities,
        )
        assert check_harp(scaled).status is Status.INFEASIBLE


class TestVerifyCertificate:
    def test_hand_derived_true(self, feasible2):
        assert verify_certificate(feasible2, np.array([4 / 7, 3 / 7]))

    def test_wrong_multipliers_false(self, feasible2):
        assert not verify_certificate(feasible2, np.array([0.99, 0.01]))

    def test_single_period(self):
        stats = MarketStatistics(prices=[[1.0]], quantities=[[1.0]])
        assert verify_certificate(stats, np.array([1.0]))

    def test_not_normalized_false(self, feasible2):
        assert not verify_certificate(feasible2, np.array([4 / 7, 3 / 7]) * 2.0)

    def test_nonpositive_false(self, feasible2):
        assert not verify_certificate(feasible2, np.array([1.5, -0.5]))


class TestRecoverUtility:
    def test_single_piece(self):
        stats = MarketStatistics(prices=[[1.0, 1.0]], quantities=[[1.0, 1.0]])
        f = recover_utility(AfriatCertificate(np.array([1.0])), stats)
        assert f(np.array([2.0, 3.0])) == pytest.approx(5.0, abs=1e-15)

    def test_consistency_with_data(self, feasible2):
        cert = AfriatCertificate(np.array([4 / 7, 3 / 7]))
        f = recover_utility(cert, feasible2)
        # both pieces evaluated at q^0: min(4/7 * 1, 3/7 * 1.5) = 4/7
        assert f(feasible2.quantities[0]) == pytest.approx(4.0 / 7.0, rel=1e-12)
        for t in range(2):
            own = float(feasible2.prices[t] @ feasible2.quantities[t])
            assert f(feasible2.quantities[t]) == pytest.approx(
                cert.lambdas[t] * own, rel=1e-9
            )

    def test_homogeneity(self, feasible2):
        cert = check_harp(feasible2).certificate
        f = recover_utility(cert, feasible2)
        rng = np.random.default_rng(11)
        x = rng.uniform(0.1, 3.0, 2)
        assert f(2.5 * x) == pytest.approx(2.5 * f(x), rel=1e-12)

    def test_invalid_certificate_rejected(self, infeasible2):
        with pytest.raises(InvalidCertificateError):
            recover_utility(AfriatCertificate(np.array([0.5, 0.5])), infeasible2)

    def test_batch_evaluation(self, feasible2):
        f = recover_utility(check_harp(feasible2).certificate, feasible2)
        batch = np.array([[1.0, 1.0], [2.0, 2.0]])
        values = f(batch)
        assert values.shape == (2,)
        assert values[1] == pytest.approx(2 * values[0], rel=1e-12)


class TestPiecewiseLinearUtility:
    def test_monotone_and_positive(self):
        f = PiecewiseLinearUtility(weights=np.array([1.0, 2.0]), rows=np.array([[1.0, 2.0], [3.0, 1.0]]))
        x = np.array([1.0, 1.0])
        assert f(x) > 0
        assert f(x + np.array([0.5, 0.0])) >= f(x)

    def test_validation(self):
        with pytest.raises(ValueError):
            PiecewiseLinearUtility(weights=np.array([-1.0]), rows=np.array([[1.0]]))


class TestSoundness:
    @pytest.mark.parametrize("seed", range(6))
    def test_feasible_certificates_always_verify(self, seed):
        from phrp.datagen import perturb

        stats = perturb(make_cd(seed, periods=10, goods=3), noise=0.3, seed=seed)
        result = check_harp(stats)
        if result.status is Status.FEASIBLE:
            assert verify_certificate(stats, result.certificate)
        elif result.status is Status.INFEASIBLE:
            assert result.cycle.cycle_ratio < 1.0
            assert len(set(result.cycle.periods[:-1])) == len(result.cycle.periods) - 1
