"""Tests for multi-consumer rationalizability and the class-number search."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import make_aggregate, make_cd
from phrp.collective import (
    AllocationSolution,
    build_collective_program,
    check_collective,
    class_number,
    split_witness,
    verify_allocation,
)
from phrp.harp import check_harp
from phrp.model import MarketStatistics, Status


class TestBuildProgram:
    def test_counts_k2_t2_n2(self):
        agg, _ = make_aggregate(0, periods=2, goods=2)
        prog = build_collective_program(agg, k=2)
        labels = [c.label for c in prog.constraints]
        assert sum(lbl.startswith("afriat[") for lbl in labels) == 8
        assert sum(lbl.startswith("balance[") for lbl in labels) == 4
        assert prog.n_variables == 4 + 8 + 4  # lam + q + slacks

    def test_k_validation(self):
        agg, _ = make_aggregate(0, periods=2, goods=2)
        with pytest.raises(ValueError):
            build_collective_program(agg, k=0)

    def test_k1_program_reduces_to_pinned_totals(self):
        # with one consumer the substituted right side is the constant p^tau.Q^t
        stats = make_cd(4, periods=2, goods=2)
        prog = build_collective_program(stats, k=1)
        afriat = [c for c in prog.constraints if c.label.startswith("afriat[")]
        assert len(afriat) == 4
        cp = stats.prices @ stats.quantities.T
        for c in afriat:
            assert c.rhs_logres is not None and c.rhs_logres.terms == ()
            tags = c.label[7:-1].split(",")
            t, tau = int(tags[1]), int(tags[2])
            assert c.rhs_logres.base.const == pytest.approx(cp[tau, t], rel=1e-15)


class TestAllocationSolution:
    def test_balance_enforced(self):
        q = np.ones((2, 2, 2))
        with pytest.raises(ValueError):
            AllocationSolution(
                sub_quantities=q,
                sub_lambdas=np.ones((2, 2)),
                residuals=np.zeros((2, 2)),
                totals=3.0 * np.ones((2, 2)),  # 2 consumers x 1 each != 3
            )

    def test_positivity_enforced(self):
        q = np.ones((1, 2, 2))
        q[0, 0, 0] = 0.0
        with pytest.raises(ValueError):
            AllocationSolution(
                sub_quantities=q,
                sub_lambdas=np.ones((1, 2)),
                residuals=np.zeros((2, 2)),
                totals=q.sum(axis=0),
            )


class TestVerifyAllocation:
    def test_generating_split_passes(self):
        agg, witness = make_aggregate(1)
        assert verify_allocation(agg, witness)

    def test_balance_break_fails(self):
        agg, witness = make_aggregate(1)
        doubled = AllocationSolution(
            sub_quantities=witness.sub_quantities * 2.0,
            sub_lambdas=witness.sub_lambdas,
            residuals=np.zeros_like(agg.quantities),
            totals=witness.sub_quantities.sum(axis=0) * 2.0,
        )
        assert not verify_allocation(agg, doubled)

    def test_swapped_lambdas_fail(self):
        agg, witness = make_aggregate(2)
        swapped = AllocationSolution(
            sub_quantities=witness.sub_quantities,
            sub_lambdas=witness.sub_lambdas[::-1].copy(),
            residuals=witness.residuals,
            totals=witness.totals,
        )
        assert not verify_allocation(agg, swapped)


class TestCheckCollective:
    def test_k1_delegates_to_exact_test(self):
        stats = make_cd(0, periods=8, goods=3)
        res = check_collective(stats, 1)
        assert res.status is Status.FEASIBLE
        assert res.allocation is not None
        assert verify_allocation(stats, res.allocation)

    def test_k1_rejects(self, infeasible2):
        res = check_collective(infeasible2, 1)
        assert res.status is Status.INFEASIBLE

    def test_even_split_for_rationalizable_aggregate(self):
        stats = make_cd(1, periods=6, goods=2)
        res = check_collective(stats, 2)
        assert res.status is Status.FEASIBLE
        assert res.decision.optimum == 0.0
        assert verify_allocation(stats, res.allocation)

    def test_two_consumer_aggregate(self):
        agg, _ = make_aggregate(0)
        assert check_harp(agg).status is Status.INFEASIBLE
        res = check_collective(agg, 2)
        assert res.status is Status.FEASIBLE
        assert res.decision.optimum <= 1e-6
        alloc = res.allocation
        assert verify_allocation(agg, alloc)
        assert np.all(alloc.residuals <= 1e-6 * agg.quantities)

    def test_hint_short_circuits(self):
        agg, witness = make_aggregate(3)
        res = check_collective(agg, 2, hint=witness)
        assert res.status is Status.FEASIBLE
        assert res.decision.optimum == 0.0
        assert res.allocation is witness

    def test_tol_validation(self, feasible2):
        with pytest.raises(ValueError):
            check_collective(feasible2, 1, tol_accept=1.0, tol_reject=0.5)


class TestMonotonicity:
    def test_split_witness_extends_acceptance(self):
        agg, _ = make_aggregate(4)
        res2 = check_collective(agg, 2)
        assert res2.status is Status.FEASIBLE
        bigger = split_witness(res2.allocation, consumer=0)
        assert bigger.consumers == 3
        assert verify_allocation(agg, bigger)
        res3 = check_collective(agg, 3, hint=bigger)
        assert res3.status is Status.FEASIBLE

    def test_per_consumer_reconstruction(self):
        from phrp.harp import recover_utility, AfriatCertificate

        agg, _ = make_aggregate(5)
        res = check_collective(agg, 2)
        alloc = res.allocation
        for a in range(2):
            lam = alloc.sub_lambdas[a] / alloc.sub_lambdas[a].sum()
            consumer = MarketStatistics(prices=agg.prices, quantities=alloc.sub_quantities[a])
            f = recover_utility(AfriatCertificate(lam), consumer)
            for t in range(agg.periods):
                own = float(agg.prices[t] @ alloc.sub_quantities[a, t])
                assert f(alloc.sub_quantities[a, t]) == pytest.approx(
                    lam[t] * own, rel=1e-9
                )


class TestClassNumber:
    def test_single_consumer_data(self):
        stats = make_cd(2, periods=10, goods=3)
        res = class_number(stats)
        assert res.value == 1
        assert res.status == "FOUND"
        assert res.per_k[1].status is Status.FEASIBLE

    def test_two_consumer_aggregate(self):
        agg, _ = make_aggregate(6)
        res = class_number(agg, k_max=3)
        assert res.value == 2
        assert res.status == "FOUND"
        assert res.certified_lower_bound == 2
        assert res.per_k[1].status is Status.INFEASIBLE
        assert res.per_k[2].status is Status.FEASIBLE
        assert verify_allocation(agg, res.witness)

    def test_budget_exhausted(self, infeasible2):
        res = class_number(infeasible2, k_max=1)
        assert res.value is None
        assert res.status == "NOT_FOUND"
        assert res.per_k[1].status is Status.INFEASIBLE

    def test_k_max_validation(self, feasible2):
        with pytest.raises(ValueError):
            class_number(feasible2, k_max=0)
