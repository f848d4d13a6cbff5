"""Independent brute-force deciders for tiny instances.

These oracles share no code path with the main pipeline: acceptance is a
grid scan over the multiplier space (or split space) and rejection is a
direct enumeration of short cross-expenditure cycles.  They exist as ground
truth for property tests, within hard size limits.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .model import Decision, MarketStatistics, PartitionedStatistics, Status


class SizeLimitError(Exception):
    """Instance exceeds the oracle's enumeration limits."""


@dataclass(frozen=True)
class GridSpec:
    """Grid density and slack for the brute-force scans.

    resolution = None picks the default rule: 200 points per dimension for
    one or two free dimensions, 40 for three or four.
    """

    resolution: int | None = None
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.resolution is not None and self.resolution < 2:
            raise ValueError("resolution must be at least 2")
        if not 0 < self.tolerance < 1:
            raise ValueError("tolerance must lie in (0, 1)")

    def points_per_dim(self, free_dims: int) -> int:
        if self.resolution is not None:
            return self.resolution
        return 200 if free_dims <= 2 else 40


def _simplex_grid(T: int, resolution: int) -> NDArray[np.float64]:
    """Strictly positive lattice points of the simplex, in lexicographic order."""
    if T == 1:
        return np.ones((1, 1))
    cuts = itertools.combinations(range(1, resolution), T - 1)
    rows = []
    for cut in cuts:
        parts = np.diff((0, *cut, resolution))
        rows.append(parts)
    return np.asarray(rows, dtype=np.float64) / resolution


def _short_cycle_minimum(cross: NDArray[np.float64]) -> float:
    """Minimum ratio product over all 2- and 3-cycles of the cross matrix."""
    T = cross.shape[0]
    own = np.diag(cross)
    best = np.inf
    for t, s in itertools.permutations(range(T), 2):
        if t < s:
            best = min(best, cross[t, s] * cross[s, t] / (own[s] * own[t]))
    for t, s, r in itertools.permutations(range(T), 3):
        if t == min(t, s, r):
            best = min(best, cross[t, s] * cross[s, r] * cross[r, t] / (own[s] * own[r] * own[t]))
    return float(best)


def _harp_grid_pass(
    cross: NDArray[np.float64], lam_grid: NDArray[np.float64], tol: float
) -> int | None:
    """Index of the first grid multiplier satisfying all inequalities, or None."""
    own = np.diag(cross)  # own[t]
    # condition: lam[t] * own[t] <= lam[tau] * cross[tau, t] * (1 + tol)
    lhs = lam_grid * own[None, :]  # (M, T)
    rhs = np.min(lam_grid[:, :, None] * cross[None, :, :], axis=1)  # (M, T)
    ok = np.all(lhs <= rhs * (1.0 + tol), axis=1)
    hits = np.flatnonzero(ok)
    return int(hits[0]) if hits.size else None


def oracle_harp(stats: MarketStatistics, grid: GridSpec = GridSpec()) -> Decision:
    """Brute-force PH-rationalizability for T <= 4.

    FEASIBLE when some simplex grid point satisfies every inequality with
    slack ``grid.tolerance``; INFEASIBLE when an exact 2- or 3-cycle ratio
    product certifies a margin below 1 - 10 * tolerance; UNDECIDED otherwise.
    """
    T = stats.periods
    if T > 4:
        raise SizeLimitError("oracle_harp handles at most T = 4")
    if T == 1:
        return Decision(Status.FEASIBLE, detail="single period")
    cross = stats.cross_expenditures()
    worst = _short_cycle_minimum(cross)
    if worst < 1.0 - 10.0 * grid.tolerance:
        return Decision(
            Status.INFEASIBLE, detail=f"short cycle ratio product {worst:.6g} < 1"
        )
    lam_grid = _simplex_grid(T, grid.points_per_dim(T - 1))
    hit = _harp_grid_pass(cross, lam_grid, grid.tolerance)
    if hit is not None:
        lam = lam_grid[hit]
        return Decision(
            Status.FEASIBLE, detail=f"grid multiplier {np.round(lam, 6).tolist()}"
        )
    return Decision(Status.UNDECIDED, detail="no grid certificate and no short cycle")


def _log_mu_grid(T: int, points: int) -> NDArray[np.float64]:
    """Log-spaced mu tuples over [1e-3, 1e3]^T, max-normalized to 1."""
    if T == 1:
        return np.ones((1, 1))
    axis = np.logspace(-3.0, 3.0, points)
    mesh = np.meshgrid(*([axis] * T), indexing="ij")
    mu = np.stack([m.reshape(-1) for m in mesh], axis=1)
    return mu / mu.max(axis=1, keepdims=True)


def oracle_separability(
    part: PartitionedStatistics, grid: GridSpec = GridSpec()
) -> Decision:
    """Brute-force complete PH-separability for T <= 3.

    Scans multipliers lam over the simplex and mu over a log-spaced
    max-normalized box, checking both inequality families directly.
    """
    T = part.base.periods
    if T > 3:
        raise SizeLimitError("oracle_separability handles at most T = 3")
    xy = part.y_prices @ part.y_quantities.T
    pq = part.q_prices @ part.q_quantities.T
    expenditures = np.diag(pq) + np.diag(xy)
    worst = _short_cycle_minimum(xy)
    if worst < 1.0 - 10.0 * grid.tolerance:
        return Decision(
            Status.INFEASIBLE,
            detail=f"y-block short cycle ratio product {worst:.6g} < 1",
        )
    if T == 1:
        return Decision(Status.FEASIBLE, detail="single period")
    free_dims = 2 * (T - 1)
    points = grid.points_per_dim(free_dims)
    lam_grid = _simplex_grid(T, points)
    mu_grid = _log_mu_grid(T, points)
    tol = grid.tolerance
    own_y = np.diag(xy)
    for idx in range(lam_grid.shape[0]):
        lam = lam_grid[idx]
        lhs_y = lam * own_y
        if not np.all(lhs_y <= (lam[:, None] * xy).min(axis=0) * (1.0 + tol)):
            continue
        mix = lam[:, None] * pq + lhs_y[None, :]  # [tau, t]
        # mu_t * lam_tau * E_t <= mu_tau * mix[tau, t] * (1 + tol)
        lhs = mu_grid[:, None, :] * (lam[:, None] * expenditures[None, :])[None, :, :]
        rhs = mu_grid[:, :, None] * mix[None, :, :] * (1.0 + tol)
        ok = np.all(lhs <= rhs, axis=(1, 2))
        hits = np.flatnonzero(ok)
        if hits.size:
            return Decision(
                Status.FEASIBLE,
                detail=f"grid pair at lam index {idx}, mu index {int(hits[0])}",
            )
    return Decision(Status.UNDECIDED, detail="no grid certificate and no short cycle")


def _two_cycle_products(prices, quantities_batch):
    """Ratio product of the 0->1->0 cycle for a batch of T=2 quantity splits."""
    c00 = quantities_batch[:, 0, :] @ prices[0]
    c01 = quantities_batch[:, 1, :] @ prices[0]
    c10 = quantities_batch[:, 0, :] @ prices[1]
    c11 = quantities_batch[:, 1, :] @ prices[1]
    return (c01 / c11) * (c10 / c00)


def oracle_collective(
    stats: MarketStatistics, k: int, grid: GridSpec = GridSpec()
) -> Decision:
    """Brute-force k-consumer rationalizability for T <= 2, n <= 2, k <= 2.

    Grids the first consumer's share of every (period, good) over (0, 1);
    for T = 2 each consumer is decided exactly by its 2-cycle ratio product.
    """
    if k > 2 or stats.periods > 2 or stats.goods > 2:
        raise SizeLimitError("oracle_collective handles at most T=2, n=2, k=2")
    if k == 1:
        return oracle_harp(stats, grid)
    if stats.periods == 1:
        return Decision(Status.FEASIBLE, detail="single period: any split works")
    T, n = stats.periods, stats.goods
    points = grid.points_per_dim(T * n)
    fractions = np.arange(1, points) / points
    mesh = np.meshgrid(*([fractions] * (T * n)), indexing="ij")
    frac = np.stack([m.reshape(-1) for m in mesh], axis=1).reshape(-1, T, n)
    tol = grid.tolerance
    best_margin = -np.inf
    chunk = 1 << 17
    first_hit: int | None = None
    for lo in range(0, frac.shape[0], chunk):
        fr = frac[lo : lo + chunk]
        qa = fr * stats.quantities[None, :, :]
        qb = (1.0 - fr) * stats.quantities[None, :, :]
        ra = _two_cycle_products(stats.prices, qa)
        rb = _two_cycle_products(stats.prices, qb)
        margin = np.minimum(ra, rb)
        best_margin = max(best_margin, float(margin.max()))
        ok = margin >= 1.0 - tol
        hits = np.flatnonzero(ok)
        if hits.size:
            first_hit = lo + int(hits[0])
            break
    if first_hit is not None:
        return Decision(
            Status.FEASIBLE, detail=f"grid split index {first_hit} passes both consumers"
        )
    # No infeasibility certification here: near-specialization splits (each
    # consumer taking almost all of one good) sit exactly on the cycle
    # boundary, so feasible splits can hide arbitrarily close to the corners
    # of the fraction cube where no finite grid reaches.
    return Decision(
        Status.UNDECIDED,
        detail=f"grid scan inconclusive (best split cycle product {best_margin:.6g})",
    )
