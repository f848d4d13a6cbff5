"""Complete PH-separability analysis of a goods partition.

A partition (q-goods, y-goods) is completely PH-separable when the data is
rationalized by a PH macro utility of the q-goods and a scalar PH sub-index
of the y-goods.  This holds iff positive multipliers (lam, mu) satisfy

    (a)  lam_t (x^t.y^t) <= lam_tau (x^tau.y^t)
    (b)  mu_t lam_tau E^t <= mu_tau (lam_tau (p^tau.q^t) + lam_t (x^t.y^t))

for all t, tau, with sum_t lam_t = 1, where E^t is total expenditure.  The
decision pipeline combines three mechanisms:

  * exact necessary checks (the y-block and the full data must each pass the
    homogeneous rationalizability test);
  * the log-domain slack-minimization program built from (a)-(b), whose
    certified infeasibility or positive optimum rejects;
  * a verified-certificate search: for fixed multipliers ``lam``, system (b)
    is again a difference-constraint system in log(mu), solved exactly by
    shortest paths, and ``lam`` itself is improved by a deterministic
    sequence of inner linearizations of (b).  Acceptance always re-validates
    (a)-(b) directly, so a SEPARABLE verdict never rests on solver status
    alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linprog

from . import _kernels, convex
from .harp import PiecewiseLinearUtility, check_harp, shortest_potentials
from .model import Decision, PartitionedStatistics, Status


class InvalidMultipliersError(Exception):
    """Supplied multipliers are not a valid solution of the system."""


@dataclass(frozen=True)
class SeparabilityInstance:
    """A partition together with its cached inner products.

    Attributes:
        part: the goods partition.
        xy: (T, T) matrix xy[tau, t] = x^tau . y^t (y-block cross expenditures).
        pq: (T, T) matrix pq[tau, t] = p^tau . q^t (q-block cross expenditures).
        expenditures: E^t = pq[t, t] + xy[t, t].
    """

    part: PartitionedStatistics
    xy: NDArray[np.float64]
    pq: NDArray[np.float64]
    expenditures: NDArray[np.float64]

    @classmethod
    def from_partition(cls, part: PartitionedStatistics) -> "SeparabilityInstance":
        xy = part.y_prices @ part.y_quantities.T
        pq = part.q_prices @ part.q_quantities.T
        e = np.diag(pq) + np.diag(xy)
        for arr in (xy, pq, e):
            arr.setflags(write=False)
        return cls(part=part, xy=xy, pq=pq, expenditures=e)

    @property
    def periods(self) -> int:
        return self.xy.shape[0]


@dataclass(frozen=True)
class MacroUtility:
    """PH macro utility u0(q, z) = min_t mu_t (p^t . q + z / lam_t).

    Concave, jointly PH of degree 1 in (q, z), strictly increasing in the
    composite argument z.
    """

    mus: NDArray[np.float64]
    q_prices: NDArray[np.float64]
    inv_lambdas: NDArray[np.float64]

    def __call__(self, q, z: float) -> float:
        q = np.asarray(q, dtype=np.float64)
        values = self.mus * (self.q_prices @ q + z * self.inv_lambdas)
        return float(values.min())

    @property
    def coefficients(self) -> tuple[tuple[float, NDArray[np.float64], float], ...]:
        """Triples (mu_t, price row, 1/lam_t) defining the min-form."""
        return tuple(
            (float(m), row, float(il))
            for m, row, il in zip(self.mus, self.q_prices, self.inv_lambdas)
        )


@dataclass(frozen=True)
class SeparabilityResult:
    """Decision plus multipliers and reconstructed utilities when separable."""

    decision: Decision
    lambdas: NDArray[np.float64] | None = None
    mus: NDArray[np.float64] | None = None
    subutility: PiecewiseLinearUtility | None = None
    macro: MacroUtility | None = None
    violated_constraints: tuple[str, ...] = ()

    @property
    def status(self) -> Status:
        return self.decision.status


def build_separability_program(inst: SeparabilityInstance) -> convex.LogConvexProgram:
    """Slack-minimization program deciding complete PH-separability.

    Variables: log multipliers lam_1..lam_T and mu_1..mu_T plus one slack.
    The normalization sum_t exp(lam_t) = 1 is relaxed to <= 1 with the slack
    absorbing the gap, and exp(lam_i) inside constraint (b) is replaced by
    1 - sum_{j != i} exp(lam_j), which keeps the right-hand side concave.
    """
    T = inst.periods
    prog = convex.LogConvexProgram(name=f"separability-T{T}")
    lam = [prog.add_log_variable(f"lam[{t}]", start=-np.log(2.0 * T)) for t in range(T)]
    mu = [prog.add_log_variable(f"mu[{t}]", start=0.0) for t in range(T)]
    gamma = prog.add_slack_variable("gamma", cap=1.0, start=0.25)
    log_xy = np.log(inst.xy)
    log_e = np.log(inst.expenditures)
    for t in range(T):
        for tau in range(T):
            prog.add_constraint(
                convex.ConstraintRecord(
                    label=f"sub[{t},{tau}]",
                    lhs_affine=convex.affine(log_xy[t, t], {lam[t]: 1.0}),
                    rhs_affine=convex.affine(log_xy[tau, t], {lam[tau]: 1.0}),
                )
            )
    for t in range(T):
        for tau in range(T):
            a = float(inst.pq[tau, t])
            b = float(inst.xy[t, t])
            terms = []
            for i in range(T):
                d = (a if i != tau else 0.0) + (b if i != t else 0.0)
                if d > 0.0:
                    terms.append(convex.ExpTerm(d, convex.affine(0.0, {lam[i]: 1.0})))
            prog.add_constraint(
                convex.ConstraintRecord(
                    label=f"macro[{t},{tau}]",
                    lhs_affine=convex.affine(log_e[t], {mu[t]: 1.0, lam[tau]: 1.0}),
                    rhs_affine=convex.affine(0.0, {mu[tau]: 1.0}),
                    rhs_logres=convex.LogResidual(
                        base=convex.affine(a + b), terms=tuple(terms)
                    ),
                )
            )
    prog.add_constraint(
        convex.ConstraintRecord(
            label="normalization",
            lhs_affine=convex.affine(0.0),
            lhs_lse=tuple(
                convex.ExpTerm(1.0, convex.affine(0.0, {lam[t]: 1.0})) for t in range(T)
            ),
            rhs_affine=convex.affine(0.0),
            rhs_logres=convex.LogResidual(base=convex.affine(1.0, {gamma: -1.0})),
        )
    )
    return prog


def verify_separability_solution(
    inst: SeparabilityInstance,
    lambdas: NDArray[np.float64],
    mus: NDArray[np.float64],
    tol: float = 1e-8,
) -> bool:
    """Direct check of (a)-(b) at relative tolerance tol.

    Callers should renormalize lambdas to sum 1 first; both families of
    inequalities are invariant to a common rescaling of lam or of mu, so the
    normalization itself is not rechecked here.
    """
    lam = np.asarray(lambdas, dtype=np.float64)
    mu = np.asarray(mus, dtype=np.float64)
    T = inst.periods
    if lam.shape != (T,) or mu.shape != (T,):
        return False
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(mu))):
        return False
    if np.any(lam <= 0.0) or np.any(mu <= 0.0):
        return False
    own_y = lam * np.diag(inst.xy)
    cheapest_y = (lam[:, None] * inst.xy).min(axis=0)
    if not np.all(own_y <= cheapest_y * (1.0 + tol)):
        return False
    lhs = np.outer(lam, mu * inst.expenditures)  # [tau, t]
    rhs = mu[:, None] * (lam[:, None] * inst.pq + own_y[None, :])
    return bool(np.all(lhs <= rhs * (1.0 + tol)))


def _mu_log_weights(inst: SeparabilityInstance, lam: NDArray[np.float64]):
    """Difference-constraint weights for log(mu): w[tau, t] bounds mu_t - mu_tau."""
    log_lam = np.log(lam)
    mix = lam[:, None] * inst.pq + (lam * np.diag(inst.xy))[None, :]
    return np.log(mix) - log_lam[:, None] - np.log(inst.expenditures)[None, :]


def _resolve_mus(
    inst: SeparabilityInstance, lam: NDArray[np.float64]
) -> NDArray[np.float64] | None:
    """Exact mu recovery for fixed lam via shortest-path potentials."""
    potentials, cycle, _ = shortest_potentials(_mu_log_weights(inst, lam))
    if potentials is None:
        return None
    return np.exp(potentials - potentials.max())


def _capped_mu_start(inst, lam) -> NDArray[np.float64]:
    w = _mu_log_weights(inst, lam)
    T = w.shape[0]
    w = w.copy()
    np.fill_diagonal(w, np.inf)
    dist, _, _, _ = _kernels.bf_rounds(w, np.zeros(T), np.full(T, -1, dtype=np.int64), T)
    return dist - dist.max()


def _normalized_log(lam_log: NDArray[np.float64]) -> NDArray[np.float64]:
    shift = lam_log.max()
    return lam_log - (shift + np.log(np.exp(lam_log - shift).sum()))


def _true_violation(inst, lam_log, mu_log) -> float:
    lam = np.exp(_normalized_log(lam_log))
    mu = np.exp(mu_log - mu_log.max())
    v1 = np.log(lam * np.diag(inst.xy)) - np.log((lam[:, None] * inst.xy).min(axis=0))
    lhs = np.outer(lam, mu * inst.expenditures)
    rhs = mu[:, None] * (lam[:, None] * inst.pq + (lam * np.diag(inst.xy))[None, :])
    v2 = np.log(lhs) - np.log(rhs)
    return float(max(v1.max(), v2.max()))


def _ccp_round_program(inst, lam_log, mu_log, margin=1e-9):
    """Inner linearization of (a)-(b) around lam_log, as a one-slack program."""
    T = inst.periods
    viol = _true_violation(inst, lam_log, mu_log)
    u_start = max(viol, 0.0) * 1.05 + 1e-6
    prog = convex.LogConvexProgram(name=f"separability-repair-T{T}")
    lam_vars = [
        prog.add_log_variable(f"lam[{t}]", start=float(np.clip(lam_log[t], -29.0, 29.0)))
        for t in range(T)
    ]
    mu_vars = [
        prog.add_log_variable(f"mu[{t}]", start=float(np.clip(mu_log[t], -29.0, 29.0)))
        for t in range(T)
    ]
    u = prog.add_slack_variable("u", cap=max(10.0 * u_start, 1.0), start=u_start)
    log_xy = np.log(inst.xy)
    log_e = np.log(inst.expenditures)
    for t in range(T):
        for tau in range(T):
            if t == tau:
                continue
            prog.add_constraint(
                convex.ConstraintRecord(
                    label=f"sub[{t},{tau}]",
                    lhs_affine=convex.affine(
                        log_xy[t, t] - log_xy[tau, t] + margin,
                        {lam_vars[t]: 1.0, lam_vars[tau]: -1.0},
                    ),
                    rhs_affine=convex.affine(0.0, {u: 1.0}),
                )
            )
            log_a = float(np.log(inst.pq[tau, t]))
            log_b = float(log_xy[t, t])
            z_tau = lam_log[tau] + log_a
            z_t = lam_log[t] + log_b
            r_hat = float(np.logaddexp(z_tau, z_t))
            w_tau = float(np.exp(z_tau - r_hat))
            w_t = float(np.exp(z_t - r_hat))
            prog.add_constraint(
                convex.ConstraintRecord(
                    label=f"macro[{t},{tau}]",
                    lhs_affine=convex.affine(
                        log_e[t] - r_hat + w_tau * lam_log[tau] + w_t * lam_log[t] + margin,
                        {
                            mu_vars[t]: 1.0,
                            mu_vars[tau]: -1.0,
                            lam_vars[tau]: 1.0 - w_tau,
                            lam_vars[t]: -w_t,
                        },
                    ),
                    rhs_affine=convex.affine(0.0, {u: 1.0}),
                )
            )
    return prog, lam_vars, mu_vars


def _certificate_search(inst, starts, tol_verify, max_rounds=40):
    """Deterministic search for verified (lam, mu); returns them or None.

    Each round first tries the exact mu resolve at the current lam, then
    re-linearizes around it.  The repair subproblem's INFEASIBLE status only
    certifies a nonzero slack at this linearization; its point is still the
    next iterate, so only stagnation abandons a start.
    """
    for lam_log0 in starts:
        lam_log = _normalized_log(np.asarray(lam_log0, dtype=np.float64))
        mu_log = _capped_mu_start(inst, np.exp(lam_log))
        prev_obj = np.inf
        stagnant = 0
        for _ in range(max_rounds):
            lam = np.exp(lam_log)
            lam = lam / lam.sum()
            mus = _resolve_mus(inst, lam)
            if mus is not None and verify_separability_solution(
                inst, lam, mus, tol_verify
            ):
                return lam, mus
            prog, lam_vars, mu_vars = _ccp_round_program(inst, lam_log, mu_log)
            res = convex.solve(prog, eps_feas=1e-9, max_iter=20_000)
            new_lam = _normalized_log(res.point[: len(lam_vars)])
            new_mu = res.point[len(lam_vars) : len(lam_vars) + len(mu_vars)]
            delta = float(np.max(np.abs(new_lam - lam_log)))
            lam_log, mu_log = new_lam, new_mu
            if prev_obj - res.objective < 1e-10 * max(1.0, abs(prev_obj)):
                stagnant += 1
            else:
                stagnant = 0
            prev_obj = res.objective
            if delta < 1e-11 or stagnant >= 3:
                break
        lam = np.exp(lam_log)
        lam = lam / lam.sum()
        mus = _resolve_mus(inst, lam)
        if mus is not None and verify_separability_solution(inst, lam, mus, tol_verify):
            return lam, mus
    return None


def check_separability(
    part: PartitionedStatistics,
    tol_accept: float = 1e-6,
    tol_reject: float = 1e-4,
) -> SeparabilityResult:
    """Decide complete PH-separability of the partition.

    SEPARABLE requires both a slack optimum <= tol_accept and multipliers
    that pass direct verification; NOT_SEPARABLE requires an exact necessary
    check to fail or the program to be certifiably infeasible / bounded away
    from zero; anything in between is UNDECIDED.
    """
    if not 0.0 < tol_accept < tol_reject:
        raise ValueError("need 0 < tol_accept < tol_reject")
    inst = SeparabilityInstance.from_partition(part)
    T = inst.periods

    y_res = check_harp(part.y_statistics())
    if y_res.status is Status.INFEASIBLE:
        periods = y_res.cycle.periods if y_res.cycle else ()
        return SeparabilityResult(
            decision=Decision(
                Status.INFEASIBLE,
                detail="y-block fails PH rationalizability: "
                f"cycle {periods} with ratio {y_res.cycle.cycle_ratio:.6g}"
                if y_res.cycle
                else "y-block fails PH rationalizability",
            ),
            violated_constraints=(f"sub-cycle{periods}",),
        )
    full_res = check_harp(part.base)
    if full_res.status is Status.INFEASIBLE:
        periods = full_res.cycle.periods if full_res.cycle else ()
        return SeparabilityResult(
            decision=Decision(
                Status.INFEASIBLE,
                detail=f"full data fails PH rationalizability: cycle {periods}",
            ),
            violated_constraints=(f"full-cycle{periods}",),
        )

    prog = build_separability_program(inst)
    sol = convex.solve(prog)
    if sol.status is Status.INFEASIBLE:
        return SeparabilityResult(
            decision=Decision(
                Status.INFEASIBLE, optimum=sol.objective, detail=sol.message
            ),
            violated_constraints=("program",),
        )
    if sol.lower_bound is not None and sol.lower_bound >= tol_reject:
        return SeparabilityResult(
            decision=Decision(
                Status.INFEASIBLE,
                optimum=sol.objective,
                detail=f"slack optimum certified >= {sol.lower_bound:.3e}",
            ),
            violated_constraints=("program",),
        )

    starts = [sol.point[:T]]
    y_potentials, _, _ = shortest_potentials(
        _y_weights(inst) if T > 1 else np.zeros((1, 1))
    )
    if y_potentials is not None:
        starts.append(y_potentials)
    found = (
        _certificate_search(inst, starts, tol_verify=1e-8)
        if sol.objective <= tol_accept
        else None
    )
    if found is not None:
        lam, mus = found
        return SeparabilityResult(
            decision=Decision(
                Status.FEASIBLE,
                optimum=sol.objective,
                detail="verified multipliers found",
            ),
            lambdas=lam,
            mus=mus,
            subutility=reconstruct_subutility(lam, part.y_prices),
            macro=reconstruct_macro_utility(mus, lam, part.q_prices),
        )
    return SeparabilityResult(
        decision=Decision(
            Status.UNDECIDED,
            optimum=sol.objective,
            detail="slack optimum near zero but no verifiable multipliers found"
            if sol.objective <= tol_accept
            else f"slack optimum {sol.objective:.3e} inside the ambiguity band",
        )
    )


def _y_weights(inst: SeparabilityInstance) -> NDArray[np.float64]:
    log_xy = np.log(inst.xy)
    w = log_xy - np.diag(log_xy)[None, :]
    np.fill_diagonal(w, 0.0)
    return w


def reconstruct_subutility(
    lambdas: NDArray[np.float64], y_prices: NDArray[np.float64]
) -> PiecewiseLinearUtility:
    """Sub-index over the y-goods: u1(y) = min_t lam_t (x^t . y)."""
    lam = np.asarray(lambdas, dtype=np.float64)
    if lam.ndim != 1 or np.any(lam <= 0.0) or not np.all(np.isfinite(lam)):
        raise InvalidMultipliersError("lambdas must be strictly positive and finite")
    if lam.size != np.asarray(y_prices).shape[0]:
        raise InvalidMultipliersError("lambdas length must match price rows")
    return PiecewiseLinearUtility(weights=lam, rows=np.asarray(y_prices, dtype=float))


def reconstruct_macro_utility(
    mus: NDArray[np.float64],
    lambdas: NDArray[np.float64],
    q_prices: NDArray[np.float64],
) -> MacroUtility:
    """Macro utility over (q-goods, composite): u0(q, z) = min_t mu_t (p^t.q + z/lam_t)."""
    lam = np.asarray(lambdas, dtype=np.float64)
    mu = np.asarray(mus, dtype=np.float64)
    rows = np.asarray(q_prices, dtype=np.float64)
    if np.any(lam <= 0.0) or np.any(mu <= 0.0):
        raise InvalidMultipliersError("multipliers must be strictly positive")
    if lam.shape != mu.shape or lam.size != rows.shape[0]:
        raise InvalidMultipliersError("multiplier shapes do not match price rows")
    return MacroUtility(mus=mu.copy(), q_prices=rows.copy(), inv_lambdas=1.0 / lam)


def young_transform(u: PiecewiseLinearUtility, w) -> float:
    """Dual price index nu(w) = inf { w.y : u(y) >= 1, y >= 0 }.

    For the min-of-linear-forms utility this is the linear program
    minimize w.y subject to weight_t (row_t . y) >= 1 for all t; by
    homogeneity it equals inf over u(y) > 0 of (w.y) / u(y).
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or np.any(w <= 0.0):
        raise ValueError("prices must be strictly positive")
    coeff = u.weights[:, None] * u.rows
    res = linprog(
        c=w,
        A_ub=-coeff,
        b_ub=-np.ones(u.pieces),
        bounds=[(0.0, None)] * w.size,
        method="highs",
    )
    if not res.success:  # pragma: no cover - LP is always feasible and bounded
        raise RuntimeError(f"young transform LP failed: {res.message}")
    return float(res.fun)
