"""Shared fixtures: the two hand-derived instances and seeded generators."""

from __future__ import annotations

import numpy as np
import pytest

from phrp.datagen import CobbDouglasSpec, gen_collective, gen_nested_cd
from phrp.model import MarketStatistics


@pytest.fixture
def feasible2() -> MarketStatistics:
    """Two periods rationalizable by a PH utility; lambdas (4/7, 3/7) work."""
    return MarketStatistics(
        prices=[[1.0, 1.0], [2.0, 1.0]], quantities=[[0.5, 0.5], [0.25, 0.5]]
    )


@pytest.fixture
def infeasible2() -> MarketStatistics:
    """Two periods with the 0 -> 1 -> 0 cycle ratio 8/9 < 1."""
    return MarketStatistics(
        prices=[[1.0, 1.0], [2.0, 1.0]], quantities=[[0.25, 0.5], [0.5, 0.5]]
    )


def make_cd(seed: int, periods: int, goods: int) -> MarketStatistics:
    rng = np.random.default_rng(seed + 917)
    raw = rng.uniform(0.5, 1.5, goods)
    exps = raw / raw.sum()
    exps[-1] = 1.0 - float(exps[:-1].sum())
    spec = CobbDouglasSpec(exponents=exps, budget=float(rng.uniform(0.5, 2.0)), seed=seed)
    from phrp.datagen import gen_cobb_douglas

    return gen_cobb_douglas(spec, periods)


def make_nested(seed: int, periods: int, q_goods: int = 3, y_goods: int = 3):
    rng = np.random.default_rng(seed + 2_000_003)

    def shares(size):
        raw = rng.uniform(0.5, 1.5, size)
        s = raw / raw.sum()
        s[-1] = 1.0 - float(s[:-1].sum())
        return s

    a = float(rng.uniform(0.3, 0.7))
    q_spec = CobbDouglasSpec(exponents=shares(q_goods), seed=seed)
    y_spec = CobbDouglasSpec(exponents=shares(y_goods), seed=seed + 1)
    return gen_nested_cd(q_spec, y_spec, (a, 1.0 - a), periods=periods, seed=seed)


def make_aggregate(seed: int, periods: int = 6, goods: int = 2):
    """Two opposite-taste consumers with independent income paths."""
    rng = np.random.default_rng(seed)
    base = np.array([0.55, 0.25, 0.15, 0.05])[:goods]
    e1 = base / base.sum()
    e1[-1] = 1.0 - float(e1[:-1].sum())
    e2 = e1[::-1].copy()
    e2[-1] = 1.0 - float(e2[:-1].sum())
    b1 = np.exp(rng.uniform(np.log(0.4), np.log(2.5), periods))
    b2 = np.exp(rng.uniform(np.log(0.4), np.log(2.5), periods))
    s1 = CobbDouglasSpec(exponents=e1, budget=b1, seed=seed)
    s2 = CobbDouglasSpec(exponents=e2, budget=b2, seed=seed)
    return gen_collective([s1, s2], periods=periods, seed=seed)


def embed_bad_y_block(seed: int, periods: int = 4, q_goods: int = 2):
    """Partitioned data whose y-block provably violates the cycle condition.

    Periods 0 and 1 of the y-block replicate the ratio-8/9 violation (row
    scalings leave every cycle product unchanged); later periods and the
    whole q-block are ordinary positive data.
    """
    from phrp.model import partition

    rng = np.random.default_rng(seed + 31_337)
    y_p = np.array([[1.0, 1.0], [2.0, 1.0]])
    y_q = np.array([[0.25, 0.5], [0.5, 0.5]])
    y_prices = np.vstack([y_p, rng.uniform(0.5, 2.0, (periods - 2, 2))])
    y_quant = np.vstack([y_q, rng.uniform(0.2, 1.5, (periods - 2, 2))])
    y_prices[:2] *= rng.uniform(0.5, 2.0, (2, 1))
    y_quant[:2] *= rng.uniform(0.5, 2.0, (2, 1))
    q_prices = rng.uniform(0.3, 3.0, (periods, q_goods))
    q_quant = rng.uniform(0.2, 2.0, (periods, q_goods))
    stats = MarketStatistics(
        prices=np.hstack([q_prices, y_prices]),
        quantities=np.hstack([q_quant, y_quant]),
    )
    return partition(stats, [q_goods, q_goods + 1])
