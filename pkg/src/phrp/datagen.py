"""Synthetic ground-truth generators.

Cobb-Douglas demand is used throughout because the optimal bundle has the
closed form q_i = share_i * budget / p_i, so generated statistics are exactly
consistent with a PH maximizer with zero optimization error.  Two-level
(nested) Cobb-Douglas demand likewise produces exactly group-separable data,
and sums of Cobb-Douglas consumers produce aggregates with a known split.

All generators are deterministic functions of their seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .collective import AllocationSolution
from .model import MarketStatistics, PartitionedStatistics

DEFAULT_PRICE_RANGE = (0.2, 5.0)


@dataclass(frozen=True)
class CobbDouglasSpec:
    """Parameters of one Cobb-Douglas consumer.

    Attributes:
        exponents: n positive expenditure shares summing to 1.
        budget: spending per period; either a scalar (constant income) or a
            length-T sequence (per-period income path).
        price_range: (lo, hi) of the log-uniform price law, lo > 0.
        seed: RNG seed for the price draw.
    """

    exponents: NDArray[np.float64]
    budget: float | NDArray[np.float64] = 1.0
    price_range: tuple[float, float] = DEFAULT_PRICE_RANGE
    seed: int = 0

    def __post_init__(self):
        e = np.asarray(self.exponents, dtype=np.float64)
        if e.ndim != 1 or np.any(e <= 0):
            raise ValueError("exponents must be a vector of positive shares")
        if abs(float(e.sum()) - 1.0) > 1e-12:
            raise ValueError("exponents must sum to 1 within 1e-12")
        lo, hi = self.price_range
        if not 0 < lo <= hi:
            raise ValueError("price_range must satisfy 0 < lo <= hi")
        b = np.asarray(self.budget, dtype=np.float64)
        if np.any(b <= 0):
            raise ValueError("budget must be strictly positive")
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "exponents", e)

    @property
    def goods(self) -> int:
        return self.exponents.size

    def budgets(self, periods: int) -> NDArray[np.float64]:
        b = np.asarray(self.budget, dtype=np.float64)
        if b.ndim == 0:
            return np.full(periods, float(b))
        if b.shape != (periods,):
            raise ValueError(f"budget path has length {b.size}, expected {periods}")
        return b.copy()


def _draw_prices(rng, periods, goods, price_range) -> NDArray[np.float64]:
    lo, hi = price_range
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=(periods, goods)))


def gen_cobb_douglas(spec: CobbDouglasSpec, periods: int) -> MarketStatistics:
    """Statistics of one Cobb-Douglas maximizer over the given periods."""
    rng = np.random.default_rng(spec.seed)
    prices = _draw_prices(rng, periods, spec.goods, spec.price_range)
    budgets = spec.budgets(periods)
    quantities = spec.exponents[None, :] * budgets[:, None] / prices
    return MarketStatistics(prices=prices, quantities=quantities)


def gen_nested_cd(
    q_spec: CobbDouglasSpec,
    y_spec: CobbDouglasSpec,
    top_shares: tuple[float, float],
    periods: int,
    seed: int,
    budget: float | NDArray[np.float64] = 1.0,
) -> PartitionedStatistics:
    """Two-level Cobb-Douglas data: exactly group-separable by construction.

    A share ``top_shares[0]`` of each period's budget is spent on the q-goods
    with inner shares ``q_spec.exponents`` and the rest on the y-goods with
    inner shares ``y_spec.exponents``; both stages are PH, so the data is
    consistent with a PH macro utility of a PH sub-index of the y-goods.
    """
    a, b = top_shares
    if a <= 0 or b <= 0 or abs(a + b - 1.0) > 1e-12:
        raise ValueError("top shares must be positive and sum to 1")
    rng = np.random.default_rng(seed)
    k, l = q_spec.goods, y_spec.goods
    q_prices = _draw_prices(rng, periods, k, q_spec.price_range)
    y_prices = _draw_prices(rng, periods, l, y_spec.price_range)
    budgets = np.asarray(budget, dtype=np.float64)
    budgets = np.full(periods, float(budgets)) if budgets.ndim == 0 else budgets.copy()
    if np.any(budgets <= 0) or budgets.shape != (periods,):
        raise ValueError("budget must be positive (scalar or length-T)")
    q_qty = a * budgets[:, None] * q_spec.exponents[None, :] / q_prices
    y_qty = b * budgets[:, None] * y_spec.exponents[None, :] / y_prices
    stats = MarketStatistics(
        prices=np.hstack([q_prices, y_prices]),
        quantities=np.hstack([q_qty, y_qty]),
    )
    return PartitionedStatistics(
        base=stats,
        q_block=tuple(range(k)),
        y_block=tuple(range(k, k + l)),
    )


def _cd_utility(quantities: NDArray[np.float64], exponents: NDArray[np.float64]):
    return np.exp(np.log(quantities) @ exponents)


def gen_collective(
    specs: list[CobbDouglasSpec], periods: int, seed: int
) -> tuple[MarketStatistics, AllocationSolution]:
    """Aggregate demand of several Cobb-Douglas consumers facing shared prices.

    Returns the aggregated statistics together with the generating split as a
    verifiable witness: each consumer's multipliers are the marginal utility
    of income v(q^t) / budget^t, a valid certificate for its own data.
    """
    if not specs:
        raise ValueError("need at least one consumer spec")
    goods = specs[0].goods
    if any(s.goods != goods for s in specs):
        raise ValueError("all consumers must share the same goods count")
    rng = np.random.default_rng(seed)
    prices = _draw_prices(rng, periods, goods, specs[0].price_range)
    k = len(specs)
    sub_q = np.empty((k, periods, goods))
    sub_lambdas = np.empty((k, periods))
    for a, spec in enumerate(specs):
        budgets = spec.budgets(periods)
        sub_q[a] = spec.exponents[None, :] * budgets[:, None] / prices
        sub_lambdas[a] = _cd_utility(sub_q[a], spec.exponents) / budgets
    aggregate = MarketStatistics(prices=prices, quantities=sub_q.sum(axis=0))
    witness = AllocationSolution(
        sub_quantities=sub_q,
        sub_lambdas=sub_lambdas,
        residuals=np.zeros((periods, goods)),
        totals=aggregate.quantities,
    )
    return aggregate, witness


def perturb(stats: MarketStatistics, noise: float, seed: int) -> MarketStatistics:
    """Multiply each quantity by an independent factor uniform in [1-noise, 1+noise].

    Prices are untouched; positivity is preserved for noise < 1.
    """
    if not 0.0 <= noise < 0.5:
        raise ValueError("noise must lie in [0, 0.5)")
    if noise == 0.0:
        return stats
    rng = np.random.default_rng(seed)
    factors = rng.uniform(1.0 - noise, 1.0 + noise, size=stats.quantities.shape)
    return MarketStatistics(prices=stats.prices, quantities=stats.quantities * factors)
