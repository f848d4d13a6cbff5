"""Exact test of rationalizability by positively homogeneous utilities.

The statistics admit a well-behaved, positively homogeneous (PH)
rationalizing utility iff there are positive multipliers ``lam`` with

    lam_t * (p^t . q^t) <= lam_tau * (p^tau . q^t)    for all t, tau.

In logs this is a system of difference constraints, so feasibility is
equivalent to the absence of a negative cycle in the complete digraph whose
edge tau -> t carries weight ``log(p^tau . q^t) - log(p^t . q^t)``.  A
label-correcting sweep (Bellman-Ford) either produces shortest-path
potentials, which exponentiate into a certificate, or a negative cycle,
whose expenditure-ratio product below 1 witnesses the violation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .model import Decision, MarketStatistics, Status


class InvalidCertificateError(Exception):
    """The supplied multipliers do not satisfy the cross-expenditure system."""


@dataclass(frozen=True)
class CrossGraph:
    """Complete weighted digraph over the T observation periods.

    Attributes:
        weights: (T, T) matrix; ``weights[tau, t]`` is the edge weight
            ``log(p^tau . q^t) - log(p^t . q^t)``.  The diagonal is zero.
        cross_expenditures: (T, T) matrix ``C[a, b] = p^a . q^b``.
    """

    weights: NDArray[np.float64]
    cross_expenditures: NDArray[np.float64]

    @property
    def nodes(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class AfriatCertificate:
    """Positive multipliers witnessing PH rationalizability, normalized to sum 1."""

    lambdas: NDArray[np.float64]

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64)
        if lam.ndim != 1 or lam.size < 1:
            raise InvalidCertificateError("lambdas must be a 1-d vector")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0.0):
            raise InvalidCertificateError("lambdas must be finite and strictly positive")
        if abs(float(lam.sum()) - 1.0) > 1e-12:
            raise InvalidCertificateError("lambdas must sum to 1 within 1e-12")
        lam = lam.copy()
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)

    @property
    def periods(self) -> int:
        return self.lambdas.size


@dataclass(frozen=True)
class ViolationCycle:
    """A cycle of periods whose cross-expenditure ratio product is below 1.

    Attributes:
        periods: closed cyclic sequence (t_1, ..., t_m, t_1), 0-based.
        log_weight: sum of edge weights along the cycle (negative).
        cycle_ratio: product of (p^{t_i} . q^{t_{i+1}}) / (p^{t_{i+1}} . q^{t_{i+1}}).
    """

    periods: tuple[int, ...]
    log_weight: float
    cycle_ratio: float

    def __post_init__(self):
        if len(self.periods) < 3 or self.periods[0] != self.periods[-1]:
            raise ValueError("periods must be a closed cycle (t_1, ..., t_m, t_1)")
        if len(set(self.periods[:-1])) != len(self.periods) - 1:
            raise ValueError("cycle periods must be distinct")
        if not self.cycle_ratio < 1.0:
            raise ValueError("a violation cycle must have ratio < 1")
        if abs(np.log(self.cycle_ratio) - self.log_weight) > 1e-9:
            raise ValueError("log(cycle_ratio) does not match log_weight")


@dataclass(frozen=True)
class PiecewiseLinearUtility:
    """Concave PH utility of the form f(x) = min_t weight_t * (row_t . x).

    Positively homogeneous of degree 1, componentwise nondecreasing, and
    strictly positive on strictly positive bundles.
    """

    weights: NDArray[np.float64]
    rows: NDArray[np.float64]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        r = np.asarray(self.rows, dtype=np.float64)
        if w.ndim != 1 or r.ndim != 2 or r.shape[0] != w.size:
            raise ValueError("need T weights and a T x n row matrix")
        if np.any(w <= 0) or np.any(r <= 0):
            raise ValueError("weights and rows must be strictly positive")
        coeff = w[:, None] * r
        for arr in (w, r, coeff):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rows", r)
        object.__setattr__(self, "_coeff", coeff)

    @property
    def pieces(self) -> int:
        return self.weights.size

    def __call__(self, x) -> float | NDArray[np.float64]:
        """Evaluate at a bundle (n,) or a batch (m, n)."""
        x = np.asarray(x, dtype=np.float64)
        values = self._coeff @ x.T  # (T,) or (T, m)
        out = values.min(axis=0)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HarpResult:
    """Decision plus its witness: a certificate or a violation cycle."""

    decision: Decision
    certificate: AfriatCertificate | None = None
    cycle: ViolationCycle | None = None

    @property
    def status(self) -> Status:
        return self.decision.status


def build_cross_graph(stats: MarketStatistics) -> CrossGraph:
    """Cross-expenditure log-ratio graph of the difference-constraint system."""
    cross = stats.cross_expenditures()
    logc = np.log(cross)
    weights = logc - np.diag(logc)[None, :]
    np.fill_diagonal(weights, 0.0)
    weights.setflags(write=False)
    cross.setflags(write=False)
    return CrossGraph(weights=weights, cross_expenditures=cross)


def _softmax(logits: NDArray[np.float64]) -> NDArray[np.float64]:
    e = np.exp(logits - logits.max())
    return e / e.sum()


def _trace_cycle(parent: NDArray[np.int64], start: int, limit: int) -> list[int] | None:
    """Follow predecessors from ``start`` and return a forward cycle, if any."""
    x = int(start)
    for _ in range(limit):
        if parent[x] < 0:
            return None
        x = int(parent[x])
    seen: dict[int, int] = {}
    order: list[int] = []
    while x not in seen:
        seen[x] = len(order)
        order.append(x)
        nxt = int(parent[x])
        if nxt < 0:
            return None
        x = nxt
    backward = order[seen[x]:]
    forward = list(reversed(backward))
    pivot = forward.index(min(forward))
    return forward[pivot:] + forward[:pivot]


def _cycle_stats(
    cycle: list[int], weights: NDArray[np.float64], cross: NDArray[np.float64]
) -> tuple[float, float]:
    nxt = cycle[1:] + cycle[:1]
    log_weight = float(sum(weights[a, b] for a, b in zip(cycle, nxt)))
    ratio = float(np.prod([cross[a, b] / cross[b, b] for a, b in zip(cycle, nxt)]))
    # long cycles over extreme data can under/overflow the direct product;
    # fall back to the (clamped) log form so the pair stays consistent
    if not 0.0 < ratio < np.inf or abs(np.log(ratio) - log_weight) > 5e-10:
        log_weight = max(log_weight, -700.0)
        ratio = float(np.exp(log_weight))
    return log_weight, ratio


def shortest_potentials(
    weights: NDArray[np.float64],
) -> tuple[NDArray[np.float64] | None, list[int] | None, float]:
    """Solve the difference-constraint system ``d_t - d_tau <= w[tau, t]``.

    Returns (potentials, cycle, cycle_log_weight).  Exactly one of
    potentials / cycle is non-None, except for pathological float cases where
    both can be None (caller should treat that as undecided).  The reported
    cycle is the most negative one found over a bounded number of extra
    relaxation batches.
    """
    T = weights.shape[0]
    if T == 1:
        return np.zeros(1), None, 0.0
    w_relax = weights.copy()
    np.fill_diagonal(w_relax, np.inf)
    dist = np.zeros(T)
    parent = np.full(T, -1, dtype=np.int64)
    dist, parent, _, converged = _kernels.bf_rounds(w_relax, dist, parent, T)
    if converged:
        return dist, None, 0.0
    best_cycle: list[int] | None = None
    best_weight = np.inf
    for _ in range(3):
        through = dist[:, None] + w_relax
        improvable = np.flatnonzero(through.min(axis=0) < dist)
        if improvable.size:
            cycle = _trace_cycle(parent, int(improvable[0]), T)
            if cycle is not None:
                lw = float(sum(weights[a, b] for a, b in zip(cycle, cycle[1:] + cycle[:1])))
                if lw < best_weight:
                    best_weight = lw
                    best_cycle = cycle
        dist, parent, _, converged = _kernels.bf_rounds(w_relax, dist, parent, T)
        if converged:
            break
    if best_cycle is None:
        return None, None, 0.0
    return None, best_cycle, best_weight


def check_harp(stats: MarketStatistics, tol: float = 1e-9) -> HarpResult:
    """Decide PH rationalizability of the statistics.

    Args:
        stats: market statistics.
        tol: relative tolerance; cycles with log-weight in [-tol, 0) are
            reported UNDECIDED rather than INFEASIBLE because near-tight
            ratio products are ill-conditioned in logs.

    Returns:
        FEASIBLE with a normalized certificate, INFEASIBLE with a violation
        cycle of ratio < 1 - tol, or UNDECIDED at the numerical boundary.
    """
    if not 0.0 < tol <= 1e-2:
        raise ValueError("tol must lie in (0, 1e-2]")
    if stats.periods == 1:
        cert = AfriatCertificate(np.ones(1))
        return HarpResult(
            Decision(Status.FEASIBLE, detail="single period: no cross constraints"),
            certificate=cert,
        )
    graph = build_cross_graph(stats)
    potentials, cycle, cycle_weight = shortest_potentials(graph.weights)
    if potentials is not None:
        cert = AfriatCertificate(_softmax(potentials))
        if not verify_certificate(stats, cert, tol=max(tol, 1e-9)):
            return HarpResult(
                Decision(Status.UNDECIDED, detail="potentials failed re-verification")
            )
        return HarpResult(
            Decision(Status.FEASIBLE, detail="shortest-path potentials found"),
            certificate=cert,
        )
    if cycle is None:
        return HarpResult(
            Decision(Status.UNDECIDED, detail="relaxation did not stabilize")
        )
    log_weight, ratio = _cycle_stats(cycle, graph.weights, graph.cross_expenditures)
    if log_weight >= 0.0:
        return HarpResult(
            Decision(Status.UNDECIDED, detail="extracted cycle is not negative")
        )
    witness = ViolationCycle(
        periods=tuple(cycle) + (cycle[0],), log_weight=log_weight, cycle_ratio=ratio
    )
    if log_weight <= np.log1p(-tol):
        return HarpResult(
            Decision(
                Status.INFEASIBLE,
                detail=f"cycle {witness.periods} has ratio {ratio:.6g} < 1",
            ),
            cycle=witness,
        )
    return HarpResult(
        Decision(
            Status.UNDECIDED,
            detail=f"most negative cycle weight {log_weight:.3e} within tolerance band",
        ),
        cycle=witness,
    )


def verify_certificate(
    stats: MarketStatistics,
    cert: AfriatCertificate | NDArray[np.float64],
    tol: float = 1e-9,
) -> bool:
    """Check all T^2 cross-expenditure inequalities at relative tolerance tol.

    Also requires the multipliers to be strictly positive and to sum to 1
    within 1e-9.
    """
    lam = cert.lambdas if isinstance(cert, AfriatCertificate) else np.asarray(cert, float)
    if lam.ndim != 1 or lam.size != stats.periods:
        return False
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0.0):
        return False
    if abs(float(lam.sum()) - 1.0) > 1e-9:
        return False
    cross = stats.cross_expenditures()
    own = lam * np.diag(cross)  # own[t] = lam_t p^t.q^t
    cheapest = (lam[:, None] * cross).min(axis=0)  # min_tau lam_tau p^tau.q^t
    return bool(np.all(own <= cheapest * (1.0 + tol)))


def recover_utility(
    cert: AfriatCertificate, stats: MarketStatistics
) -> PiecewiseLinearUtility:
    """Reconstruct the min-of-linear-forms utility f(x) = min_t lam_t (p^t . x).

    The result is consistent with the data: f(q^t) = lam_t (p^t . q^t) for
    every period t.

    Raises:
        InvalidCertificateError: the certificate fails verification.
    """
    if not verify_certificate(stats, cert):
        raise InvalidCertificateError("certificate does not verify against statistics")
    return PiecewiseLinearUtility(weights=cert.lambdas, rows=stats.prices)
