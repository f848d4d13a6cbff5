"""Multi-consumer rationalizability and the minimal consumer count.

The observed demand is k-consumer rationalizable when it splits into k
strictly positive per-consumer demands, each PH-rationalizable on its own,
that sum componentwise to the data.  For k = 1 this is the exact
graph-based test; for k >= 2 the decision works through the log-domain
slack program over per-consumer multipliers and quantity logs, plus a
verified-witness search: candidate splits are polished by rescaling onto
exact balance and then validated per consumer with the exact test, so a
FEASIBLE verdict always ships a checkable allocation.

Because every split variable lives in log space, splits where a consumer
buys none of some good are unreachable; reported decisions are therefore
about strictly positive allocations (interior splits).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import _kernels, convex
from .harp import check_harp, verify_certificate
from .model import Decision, MarketStatistics, Status

_MAIN_MARGIN = 1e-7  # interior margin imposed on per-consumer constraints
_CCP_ROUNDS = 30


@dataclass(frozen=True)
class AllocationSolution:
    """A per-consumer split of the observed quantities.

    Attributes:
        sub_quantities: (k, T, n) strictly positive per-consumer bundles.
        sub_lambdas: (k, T) positive multipliers, one row per consumer
            (verification renormalizes each row to sum 1).
        residuals: (T, n) nonnegative unallocated quantities.
        totals: (T, n) the observed quantities the split accounts for.
    """

    sub_quantities: NDArray[np.float64]
    sub_lambdas: NDArray[np.float64]
    residuals: NDArray[np.float64]
    totals: NDArray[np.float64]

    def __post_init__(self):
        q = np.asarray(self.sub_quantities, dtype=np.float64)
        lam = np.asarray(self.sub_lambdas, dtype=np.float64)
        res = np.asarray(self.residuals, dtype=np.float64)
        tot = np.asarray(self.totals, dtype=np.float64)
        if q.ndim != 3 or lam.shape != q.shape[:2] or res.shape != q.shape[1:]:
            raise ValueError("inconsistent allocation shapes")
        if tot.shape != res.shape:
            raise ValueError("totals shape mismatch")
        if np.any(q <= 0.0) or np.any(lam <= 0.0):
            raise ValueError("sub-quantities and multipliers must be positive")
        if np.any(res < 0.0):
            raise ValueError("residuals must be nonnegative")
        balance = q.sum(axis=0) + res
        if np.max(np.abs(balance - tot) / np.maximum(tot, 1e-300)) > 1e-9:
            raise ValueError("allocation does not balance to the totals within 1e-9")
        for arr in (q, lam, res, tot):
            arr.setflags(write=False)
        object.__setattr__(self, "sub_quantities", q)
        object.__setattr__(self, "sub_lambdas", lam)
        object.__setattr__(self, "residuals", res)
        object.__setattr__(self, "totals", tot)

    @property
    def consumers(self) -> int:
        return self.sub_quantities.shape[0]


@dataclass(frozen=True)
class CollectiveResult:
    """Decision for one consumer count, with the witness split when accepted."""

    decision: Decision
    k: int
    allocation: AllocationSolution | None = None

    @property
    def status(self) -> Status:
        return self.decision.status


@dataclass(frozen=True)
class ClassNumberResult:
    """Search result for the minimal accepted consumer count.

    Attributes:
        value: first accepted k, or None when the budget was exhausted.
        certified_lower_bound: 1 + length of the INFEASIBLE prefix.
        status: FOUND, LOWER_BOUND_ONLY (an UNDECIDED k below the accepted
            one), or NOT_FOUND.
        per_k: decision for each examined k.
        witness: allocation for the accepted k.
    """

    value: int | None
    certified_lower_bound: int
    status: str
    per_k: dict[int, Decision]
    witness: AllocationSolution | None


def build_collective_program(stats: MarketStatistics, k: int) -> convex.LogConvexProgram:
    """Slack program deciding k-consumer PH-rationalizability.

    Variables: per-consumer log multipliers, per-consumer log quantities, and
    one nonnegative slack per (period, good) absorbing the unallocated part
    of the balance.  In the cross-expenditure constraints each consumer's
    quantity is substituted by the total minus the other consumers' (keeping
    the right-hand side concave); the balance itself is kept as
    sum_consumers q + slack <= total with the slack sum minimized.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    T, n = stats.periods, stats.goods
    P, Q = stats.prices, stats.quantities
    prog = convex.LogConvexProgram(name=f"collective-k{k}-T{T}-n{n}")
    lam = np.empty((k, T), dtype=int)
    qv = np.empty((k, T, n), dtype=int)
    for a in range(k):
        for t in range(T):
            lam[a, t] = prog.add_log_variable(f"lam[{a},{t}]", start=-np.log(2.0 * T))
    for a in range(k):
        for t in range(T):
            for i in range(n):
                qv[a, t, i] = prog.add_log_variable(
                    f"q[{a},{t},{i}]", start=float(np.log(Q[t, i] / (2.0 * k)))
                )
    gam = np.empty((T, n), dtype=int)
    for t in range(T):
        for i in range(n):
            gam[t, i] = prog.add_slack_variable(
                f"gamma[{t},{i}]", cap=float(Q[t, i]), start=float(Q[t, i] / 4.0)
            )
    cp = P @ Q.T  # cp[tau, t] = p^tau . Q^t
    for a in range(k):
        for t in range(T):
            for tau in range(T):
                lse = tuple(
                    convex.ExpTerm(float(P[t, i]), convex.affine(0.0, {int(qv[a, t, i]): 1.0}))
                    for i in range(n)
                )
                res_terms = tuple(
                    convex.ExpTerm(
                        float(P[tau, i]), convex.affine(0.0, {int(qv[b, t, i]): 1.0})
                    )
                    for b in range(k)
                    if b != a
                    for i in range(n)
                )
                prog.add_constraint(
                    convex.ConstraintRecord(
                        label=f"afriat[{a},{t},{tau}]",
                        lhs_affine=convex.affine(0.0, {int(lam[a, t]): 1.0}),
                        lhs_lse=lse,
                        rhs_affine=convex.affine(0.0, {int(lam[a, tau]): 1.0}),
                        rhs_logres=convex.LogResidual(
                            base=convex.affine(float(cp[tau, t])), terms=res_terms
                        ),
                    )
                )
    for t in range(T):
        for i in range(n):
            prog.add_constraint(
                convex.ConstraintRecord(
                    label=f"balance[{t},{i}]",
                    lhs_affine=convex.affine(0.0),
                    lhs_lse=tuple(
                        convex.ExpTerm(1.0, convex.affine(0.0, {int(qv[a, t, i]): 1.0}))
                        for a in range(k)
                    ),
                    rhs_affine=convex.affine(0.0),
                    rhs_logres=convex.LogResidual(
                        base=convex.affine(float(Q[t, i]), {int(gam[t, i]): -1.0})
                    ),
                )
            )
    return prog


def verify_allocation(
    stats: MarketStatistics, alloc: AllocationSolution, tol: float = 1e-9
) -> bool:
    """Direct check: balance within tol and per-consumer certificates valid."""
    Q = stats.quantities
    if alloc.sub_quantities.shape[1:] != Q.shape:
        return False
    balance = alloc.sub_quantities.sum(axis=0) + alloc.residuals
    if np.max(np.abs(balance - Q) / Q) > tol:
        return False
    for a in range(alloc.consumers):
        lam = alloc.sub_lambdas[a]
        lam = lam / lam.sum()
        consumer = MarketStatistics(prices=stats.prices, quantities=alloc.sub_quantities[a])
        if not verify_certificate(consumer, lam, tol=tol):
            return False
    return True


def _per_consumer_lambdas(
    stats: MarketStatistics, sub_q: NDArray[np.float64]
) -> NDArray[np.float64] | None:
    """Exact per-consumer multipliers, or None if some consumer fails."""
    k = sub_q.shape[0]
    lams = np.empty((k, stats.periods))
    for a in range(k):
        result = check_harp(MarketStatistics(prices=stats.prices, quantities=sub_q[a]))
        if result.status is not Status.FEASIBLE:
            return None
        lams[a] = result.certificate.lambdas
    return lams


def _extract_allocation(
    stats: MarketStatistics, qtil: NDArray[np.float64], tol_accept: float
) -> AllocationSolution | None:
    """Polish a log-split onto exact balance and validate it per consumer."""
    Q = stats.quantities
    sub_q = np.exp(qtil)
    total = sub_q.sum(axis=0)
    scaled = sub_q * (Q / total)[None, :, :]
    lams = _per_consumer_lambdas(stats, scaled)
    if lams is not None:
        residuals = np.maximum(Q - scaled.sum(axis=0), 0.0)
        alloc = AllocationSolution(
            sub_quantities=scaled, sub_lambdas=lams, residuals=residuals, totals=Q
        )
        if verify_allocation(stats, alloc):
            return alloc
    # fall back to the unpolished split when its residual is already tiny
    residuals = Q - total
    if np.any(residuals < -1e-9 * Q) or np.any(residuals > tol_accept * Q):
        return None
    lams = _per_consumer_lambdas(stats, sub_q)
    if lams is None:
        return None
    alloc = AllocationSolution(
        sub_quantities=sub_q,
        sub_lambdas=lams,
        residuals=np.maximum(residuals, 0.0),
        totals=Q,
    )
    return alloc if verify_allocation(stats, alloc) else None


def _capped_potentials(weights: NDArray[np.float64]) -> NDArray[np.float64]:
    T = weights.shape[0]
    if T == 1:
        return np.zeros(1)
    w = weights.copy()
    np.fill_diagonal(w, np.inf)
    dist, _, _, _ = _kernels.bf_rounds(w, np.zeros(T), np.full(T, -1, dtype=np.int64), T)
    return dist

def _start_lambdas(stats: MarketStatistics, sub_q: NDArray[np.float64]):
    """Capped shortest-path potentials per consumer (defined even when infeasible)."""
    k = sub_q.shape[0]
    T = stats.periods
    out = np.zeros((k, T))
    for a in range(k):
        cross = stats.prices @ sub_q[a].T
        logc = np.log(cross)
        w = logc - np.diag(logc)[None, :]
        out[a] = _capped_potentials(w)
    return out


def _share_starts(k: int, n: int) -> list[NDArray[np.float64]]:
    """Deterministic share patterns over consumers x goods, summing to 1.

    Round-robin tilts assign each good mostly to one consumer; they break the
    consumer-exchange symmetry that traps the search when every consumer
    starts from the same split.  The symmetric even split is kept as a last
    resort.
    """
    patterns: list[NDArray[np.float64]] = []
    assignments = []
    for flip in (False, True):
        order = range(n - 1, -1, -1) if flip else range(n)
        assignments.append([i % k for i in order])  # goods round-robin
        assignments.append([min(i * k // n, k - 1) for i in order])  # contiguous blocks
    seen: set[tuple[float, ...]] = set()
    for theta in (0.7, 0.9):
        for assign in assignments:
            share = np.full((k, n), (1.0 - theta) / max(k - 1, 1) if k > 1 else 1.0)
            for i, a in enumerate(assign):
                share[a, i] = theta if k > 1 else 1.0
            share /= share.sum(axis=0, keepdims=True)
            key = tuple(np.round(share.reshape(-1), 12).tolist())
            if key not in seen:
                seen.add(key)
                patterns.append(share)
    patterns.append(np.full((k, n), 1.0 / k))
    return patterns


def _ccp_program(stats, k, qtil_hat, lam_hat):
    T, n = stats.periods, stats.goods
    P, Q = stats.prices, stats.quantities
    exp_hat = np.exp(qtil_hat)  # (k, T, n)
    # current true violation, to seed the shared slack
    viol = 0.0
    for a in range(k):
        cross = np.einsum("si,ti->st", P, exp_hat[a])  # cross[s, t] = p^s . qhat_a^t
        logc = np.log(cross)
        for t in range(T):
            for tau in range(T):
                if t != tau:
                    g = (
                        lam_hat[a, t]
                        - lam_hat[a, tau]
                        + logc[t, t]
                        - logc[tau, t]
                        + _MAIN_MARGIN
                    )
                    viol = max(viol, g)
    fill = Q - exp_hat.sum(axis=0)
    viol = max(viol, float(fill.max()))
    u_start = max(viol, 0.0) * 1.05 + 1e-6

    prog = convex.LogConvexProgram(name=f"collective-repair-k{k}")
    lam_vars = np.empty((k, T), dtype=int)
    q_vars = np.empty((k, T, n), dtype=int)
    for a in range(k):
        for t in range(T):
            lam_vars[a, t] = prog.add_log_variable(
                f"lam[{a},{t}]", start=float(np.clip(lam_hat[a, t], -29.0, 29.0))
            )
    for a in range(k):
        for t in range(T):
            for i in range(n):
                q_vars[a, t, i] = prog.add_log_variable(
                    f"q[{a},{t},{i}]", start=float(np.clip(qtil_hat[a, t, i], -29.0, 29.0))
                )
    u = prog.add_slack_variable("u", cap=float(max(10.0 * u_start, 1.0)), start=u_start)

    for a in range(k):
        weighted = np.einsum("si,ti->ts", P, exp_hat[a])  # weighted[t, tau] = p^tau . qhat_a^t
        for t in range(T):
            for tau in range(T):
                if t == tau:
                    continue
                denom = float(weighted[t, tau])
                l_hat = float(np.log(denom))
                w_i = P[tau, :] * exp_hat[a, t, :] / denom
                const = -l_hat + float(w_i @ qtil_hat[a, t, :]) + _MAIN_MARGIN
                coefs = {int(lam_vars[a, t]): 1.0, int(lam_vars[a, tau]): -1.0}
                for i in range(n):
                    coefs[int(q_vars[a, t, i])] = coefs.get(int(q_vars[a, t, i]), 0.0) - float(
                        w_i[i]
                    )
                prog.add_constraint(
                    convex.ConstraintRecord(
                        label=f"afriat[{a},{t},{tau}]",
                        lhs_affine=convex.affine(const, coefs),
                        lhs_lse=tuple(
                            convex.ExpTerm(
                                float(P[t, i]), convex.affine(0.0, {int(q_vars[a, t, i]): 1.0})
                            )
                            for i in range(n)
                        ),
                        rhs_affine=convex.affine(0.0, {u: 1.0}),
                    )
                )
    for t in range(T):
        for i in range(n):
            const = float(Q[t, i])
            coefs: dict[int, float] = {}
            for a in range(k):
                e = float(exp_hat[a, t, i])
                const += e * (float(qtil_hat[a, t, i]) - 1.0)
                coefs[int(q_vars[a, t, i])] = -e
            prog.add_constraint(
                convex.ConstraintRecord(
                    label=f"fill[{t},{i}]",
                    lhs_affine=convex.affine(const, coefs),
                    rhs_affine=convex.affine(0.0, {u: 1.0}),
                )
            )
            prog.add_constraint(
                convex.ConstraintRecord(
                    label=f"cap[{t},{i}]",
                    lhs_affine=convex.affine(0.0),
                    lhs_lse=tuple(
                        convex.ExpTerm(1.0, convex.affine(0.0, {int(q_vars[a, t, i]): 1.0}))
                        for a in range(k)
                    ),
                    rhs_affine=convex.affine(float(np.log(Q[t, i]))),
                )
            )
    return prog, lam_vars, q_vars


def _ccp_search(stats, k, starts, tol_accept):
    """Iterated inner linearization over deterministic starts.

    The subproblem's INFEASIBLE status only means its slack optimum is
    certified nonzero; the returned point is still the next linearization
    iterate.  Starts that stop improving (a stationary slack level with a
    frozen split) are abandoned early.
    """
    T, n = stats.periods, stats.goods
    for qtil0, lam0 in starts:
        qtil = np.array(qtil0, dtype=np.float64)
        lam = np.array(lam0, dtype=np.float64)
        prev_obj = np.inf
        stagnant = 0
        for _ in range(_CCP_ROUNDS):
            alloc = _extract_allocation(stats, qtil, tol_accept)
            if alloc is not None:
                return alloc
            prog, lam_vars, q_vars = _ccp_program(stats, k, qtil, lam)
            res = convex.solve(prog, eps_feas=1e-9, max_iter=40_000)
            point = res.point
            new_lam = point[lam_vars.reshape(-1)].reshape(k, T)
            new_q = point[q_vars.reshape(-1)].reshape(k, T, n)
            delta = float(np.max(np.abs(new_q - qtil)))
            qtil, lam = new_q, new_lam
            if prev_obj - res.objective < 1e-10 * max(1.0, abs(prev_obj)):
                stagnant += 1
            else:
                stagnant = 0
            prev_obj = res.objective
            if delta < 1e-9 or stagnant >= 3:
                break
        alloc = _extract_allocation(stats, qtil, tol_accept)
        if alloc is not None:
            return alloc
    return None


def _even_split_allocation(stats, k, lambdas) -> AllocationSolution:
    Q = stats.quantities
    sub_q = np.repeat(Q[None, :, :] / k, k, axis=0)
    lam = np.repeat(lambdas[None, :], k, axis=0)
    return AllocationSolution(
        sub_quantities=sub_q,
        sub_lambdas=lam,
        residuals=np.zeros_like(Q),
        totals=Q,
    )


def check_collective(
    stats: MarketStatistics,
    k: int,
    tol_accept: float = 1e-6,
    tol_reject: float = 1e-4,
    hint: AllocationSolution | None = None,
) -> CollectiveResult:
    """Decide k-consumer PH-rationalizability.

    k = 1 delegates to the exact graph test.  For k >= 2 a FEASIBLE verdict
    requires both a slack optimum <= tol_accept and a witness allocation that
    passes direct verification (with every residual below tol_accept times
    the observed quantity); an optional ``hint`` allocation is tried first.

    Note the asymmetry: INFEASIBLE needs a certificate, and for k >= 2 the
    relaxed program is satisfiable for any data, so failures to find a
    witness are reported UNDECIDED rather than INFEASIBLE.
    """
    if not 0.0 < tol_accept < tol_reject:
        raise ValueError("need 0 < tol_accept < tol_reject")
    if k == 1:
        res = check_harp(stats)
        alloc = None
        if res.status is Status.FEASIBLE:
            alloc = AllocationSolution(
                sub_quantities=stats.quantities[None, :, :],
                sub_lambdas=res.certificate.lambdas[None, :],
                residuals=np.zeros_like(stats.quantities),
                totals=stats.quantities,
            )
        return CollectiveResult(decision=res.decision, k=1, allocation=alloc)

    if hint is not None and hint.consumers == k and verify_allocation(stats, hint):
        if np.all(hint.residuals <= tol_accept * stats.quantities):
            return CollectiveResult(
                decision=Decision(
                    Status.FEASIBLE, optimum=0.0, detail="verified hint allocation"
                ),
                k=k,
                allocation=hint,
            )
    aggregate = check_harp(stats)
    if aggregate.status is Status.FEASIBLE:
        alloc = _even_split_allocation(stats, k, aggregate.certificate.lambdas)
        if verify_allocation(stats, alloc):
            return CollectiveResult(
                decision=Decision(
                    Status.FEASIBLE,
                    optimum=0.0,
                    detail="aggregate is single-consumer rationalizable; even split",
                ),
                k=k,
                allocation=alloc,
            )

    prog = build_collective_program(stats, k)
    sol = convex.solve(prog)
    if sol.status is Status.INFEASIBLE:
        return CollectiveResult(
            decision=Decision(Status.INFEASIBLE, optimum=sol.objective, detail=sol.message),
            k=k,
        )
    if sol.lower_bound is not None and sol.lower_bound >= tol_reject:
        return CollectiveResult(
            decision=Decision(
                Status.INFEASIBLE,
                optimum=sol.objective,
                detail=f"slack optimum certified >= {sol.lower_bound:.3e}",
            ),
            k=k,
        )

    T, n = stats.periods, stats.goods
    Q = stats.quantities
    n_lam = k * T
    solver_q = sol.point[n_lam : n_lam + k * T * n].reshape(k, T, n)
    solver_lam = sol.point[:n_lam].reshape(k, T)
    starts: list[tuple[NDArray[np.float64], NDArray[np.float64]]] = [
        (solver_q, solver_lam)
    ]
    for share in _share_starts(k, n):
        sub_q = share[:, None, :] * Q[None, :, :] * (1.0 - 1e-6)
        qtil = np.log(sub_q)
        starts.append((qtil, _start_lambdas(stats, sub_q)))
    alloc = _ccp_search(stats, k, starts, tol_accept) if sol.objective <= tol_accept else None
    if alloc is not None:
        return CollectiveResult(
            decision=Decision(
                Status.FEASIBLE, optimum=sol.objective, detail="verified witness found"
            ),
            k=k,
            allocation=alloc,
        )
    return CollectiveResult(
        decision=Decision(
            Status.UNDECIDED,
            optimum=sol.objective,
            detail="no verifiable split found within the search budget",
        ),
        k=k,
    )


def split_witness(alloc: AllocationSolution, consumer: int = 0) -> AllocationSolution:
    """Witness for k+1 consumers: halve one consumer's bundle across two.

    Both halves keep the original multipliers; the cross-expenditure
    inequalities are invariant to scaling a consumer's whole bundle.
    """
    q = alloc.sub_quantities
    lam = alloc.sub_lambdas
    half = q[consumer] / 2.0
    new_q = np.concatenate([q, half[None, :, :]], axis=0).copy()
    new_q[consumer] = half
    new_lam = np.concatenate([lam, lam[consumer][None, :]], axis=0)
    return AllocationSolution(
        sub_quantities=new_q,
        sub_lambdas=new_lam,
        residuals=alloc.residuals,
        totals=alloc.totals,
    )


def class_number(
    stats: MarketStatistics,
    k_max: int | None = None,
    tol_accept: float = 1e-6,
    tol_reject: float = 1e-4,
) -> ClassNumberResult:
    """Smallest k accepted by check_collective, scanning k = 1, 2, ...

    The default budget k_max = n (the number of goods) is a pragmatic
    heuristic, not a guaranteed upper bound for the minimal k.
    """
    if k_max is None:
        k_max = stats.goods
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    per_k: dict[int, Decision] = {}
    witness = None
    value = None
    undecided_below = False
    for k in range(1, k_max + 1):
        res = check_collective(stats, k, tol_accept=tol_accept, tol_reject=tol_reject)
        per_k[k] = res.decision
        if res.status is Status.FEASIBLE:
            value = k
            witness = res.allocation
            break
        if res.status is Status.UNDECIDED:
            undecided_below = True
    lower = 1
    for k in range(1, k_max + 1):
        if per_k.get(k) is not None and per_k[k].status is Status.INFEASIBLE:
            lower = k + 1
        else:
            break
    if value is None:
        status = "NOT_FOUND"
    elif undecided_below:
        status = "LOWER_BOUND_ONLY"
    else:
        status = "FOUND"
    return ClassNumberResult(
        value=value,
        certified_lower_bound=lower,
        status=status,
        per_k=per_k,
        witness=witness,
    )
