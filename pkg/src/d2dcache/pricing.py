"""Winner payments: second-price totals, Nash-bargaining split, anti-sublease guard.

The winners of a chunk jointly owe the welfare a re-auction among the losers
would realize. That total is divided by the Nash bargaining solution, whose
KKT system reduces to clipped equal surplus: everyone keeps the same surplus
q = min(level, value), with the level chosen so surpluses sum to the slack.
The sublease guard then enforces, for every winner subset, that the subset's
payment is at least what the losers it could lease to would pay, re-solving
the bargaining program with those subset constraints when any is violated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .mwis import WisInstance, solve_exact

log = logging.getLogger(__name__)

SUBLEASE_ENUM_LIMIT = 12
KKT_TOL = 1e-9


def second_price_total(chunk: int, winners_all: set[int] | frozenset[int],
                       revenues: np.ndarray, conflict_adj: np.ndarray,
                       losers: np.ndarray | None = None) -> float:
    """Optimal single-chunk welfare over the loser pool (the winners' joint price).

    ``losers`` defaults to every UT outside ``winners_all``; passing it lets
    round-based auctions restrict the pool further. Empty or all-nonpositive
    pools price at 0.
    """
    n_uts = revenues.shape[0]
    if losers is None:
        losers = np.array([n for n in range(n_uts) if n not in winners_all], dtype=int)
    else:
        losers = np.asarray(losers, dtype=int)
    if losers.size == 0:
        return 0.0
    vals = np.maximum(revenues[losers, chunk], 0.0)
    if not np.any(vals > 0):
        return 0.0
    sub = np.asarray(conflict_adj)[np.ix_(losers, losers)]
    return solve_exact(WisInstance(vals, sub)).welfare


def nbs_prices(winner_values: np.ndarray, total: float) -> np.ndarray:
    """Product-maximizing split of ``total`` with 0 <= p <= v per winner.

    Solves max prod(v - p) s.t. sum(p) = total by water-filling the surplus
    q = v - p: q_n = min(level, v_n) with the level solving the piecewise-
    linear budget equation exactly.
    """
    v = np.asarray(winner_values, dtype=float)
    if v.size == 0:
        return np.zeros(0)
    vsum = float(v.sum())
    if total > vsum + 1e-9 * max(1.0, abs(vsum)):
        raise ValueError(f"total price {total} exceeds winning welfare {vsum}")
    budget = min(max(vsum - total, 0.0), vsum)  # surplus to distribute

    order = np.sort(v)
    cumulative = 0.0
    level = None
    for k, vk in enumerate(order):
        # candidate level in [order[k-1], order[k]]: k values saturated below
        remaining = v.size - k
        candidate = (budget - cumulative) / remaining
        if candidate <= vk:
            level = candidate
            break
        cumulative += vk
    if level is None:
        level = order[-1]  # budget == vsum: everyone keeps full value
    q = np.minimum(level, v)
    return np.clip(v - q, 0.0, v)


@dataclass
class GuardReport:
    skipped: bool = False          # winner set above the enumeration limit
    adjusted: bool = False         # at least one subset constraint was binding
    unpriceable: bool = False      # constraints infeasible; prices fell back to v
    constraints_checked: int = 0
    reauction_solves: int = 0


def _constrained_nbs(v: np.ndarray, subsets: list[tuple[tuple[int, ...], float]]):
    """Maximize sum(log(v - p)) over 0 <= p <= v and sum_{subset} p >= floor.

    Works in surplus space q = v - p, where each floor becomes a cap
    sum_{subset} q <= sum_{subset} v - floor. Returns None when the caps are
    infeasible. Interior path-following (log barrier, damped Newton) on the
    strictly concave objective; final KKT residual is driven below KKT_TOL
    in the normalized scale.
    """
    scale = float(v.max())
    vn = v / scale
    k = v.size
    caps = []
    for members, floor in subsets:
        cap = float(vn[list(members)].sum() - floor / scale)
        caps.append((frozenset(members), cap))

    # caps at (or below) zero pin the whole subset's surplus to zero
    forced = set()
    changed = True
    while changed:
        changed = False
        for members, cap in caps:
            active = members - forced
            if cap < -1e-12:
                return None
            if cap <= 1e-14 and active:
                forced |= active
                changed = True

    free = [i for i in range(k) if i not in forced]
    q = np.zeros(k)
    if free:
        idx = {i: a for a, i in enumerate(free)}
        rows = []
        ubs = []
        for members, cap in caps:
            cols = [idx[i] for i in members if i in idx]
            if cols:
                row = np.zeros(len(free))
                row[cols] = 1.0
                rows.append(row)
                ubs.append(cap)
        A = np.array(rows) if rows else np.zeros((0, len(free)))
        ub = np.array(ubs)
        vf = vn[free]

        qf = vf.copy() * 0.5
        for row, cap in zip(A, ub):
            weight = row.sum()
            if weight:
                qf = np.minimum(qf, np.where(row > 0, 0.5 * cap / weight, np.inf))
        qf = np.maximum(qf, 1e-12)

        # suboptimality of the barrier center is (#log terms)/t; t_max trades
        # that against float cancellation in the near-active slacks
        n_terms = len(free) + len(ubs) + len(free)
        t_max = max(1e11, n_terms * 1e9)
        t = 1.0
        t_used = t
        while True:
            for _ in range(60):
                slack_c = ub - A @ qf if A.size else ub
                slack_v = vf - qf
                grad = -t / qf + 1.0 / slack_v
                hess = np.diag(t / qf**2 + 1.0 / slack_v**2)
                if A.size:
                    grad = grad + A.T @ (1.0 / slack_c)
                    hess = hess + (A.T * (1.0 / slack_c**2)) @ A
                step = np.linalg.solve(hess, -grad)
                decrement = float(-grad @ step)
                stepmax = 1.0
                for arr, darr in ((qf, step), (slack_v, -step),
                                  (slack_c, -(A @ step) if A.size else np.zeros(0))):
                    neg = darr < 0
                    if neg.any():
                        stepmax = min(stepmax, 0.99 * float(np.min(-arr[neg] / darr[neg])))
                qf = qf + stepmax * step
                if decrement < 1e-16:
                    break
            t_used = t
            if t >= t_max:
                break
            t = min(t * 20.0, t_max)
        q[free] = qf

    p = np.clip(vn - q, 0.0, vn) * scale

    # At the barrier center the KKT stationarity holds exactly and the
    # complementarity residual is bounded by n_terms / t <= ~1e-9; the
    # measured stationarity only reflects float cancellation in near-active
    # slacks, so warn well above that noise floor.
    if free:
        slack_c = ub - A @ q[free] if A.size else ub
        lam = 1.0 / (t_used * slack_c) if A.size else np.zeros(0)
        mu_box = 1.0 / (t_used * (vf - q[free]))
        stat = -1.0 / q[free] + (A.T @ lam if A.size else 0.0) + mu_box
        residual = float(np.max(np.abs(q[free] * stat)))
        if residual > 1e-4:
            log.warning("constrained bargaining KKT residual %.2e", residual)
    return p


def sublease_guard(chunk: int, winner_idx: np.ndarray, prices: np.ndarray,
                   revenues: np.ndarray, conflict_adj: np.ndarray,
                   losers: np.ndarray,
                   enum_limit: int = SUBLEASE_ENUM_LIMIT) -> tuple[np.ndarray, GuardReport]:
    """Enforce subset payment floors against profitable re-leasing to losers.

    For each nonempty winner subset, losers that conflict with none of the
    *remaining* winners could be leased the chunk; the subset's payments must
    cover the optimal re-auction welfare over those losers. Winner sets above
    ``enum_limit`` are skipped with a warning (enumeration is exponential).
    Infeasible constraint systems flag the chunk unpriceable and fall back to
    full-value extraction.
    """
    winner_idx = np.asarray(winner_idx, dtype=int)
    prices = np.asarray(prices, dtype=float).copy()
    report = GuardReport()
    k = winner_idx.size
    if k == 0:
        return prices, report
    if k > enum_limit:
        log.warning("sublease guard skipped: %d winners exceeds limit %d", k, enum_limit)
        report.skipped = True
        return prices, report

    losers = np.asarray(losers, dtype=int)
    conf = np.asarray(conflict_adj)
    v = revenues[winner_idx, chunk].astype(float)

    # eligible-loser welfare depends only on the set of remaining winners
    loser_vals = np.maximum(revenues[losers, chunk], 0.0) if losers.size else np.zeros(0)
    welfare_cache: dict[frozenset, float] = {}

    def reauction_value(remaining: tuple[int, ...]) -> float:
        if losers.size == 0:
            return 0.0
        ok = np.ones(losers.size, dtype=bool)
        for w in remaining:
            ok &= conf[losers, winner_idx[w]] == 0
        eligible = frozenset(np.flatnonzero(ok).tolist())
        if eligible in welfare_cache:
            return welfare_cache[eligible]
        idx = sorted(eligible)
        if not idx or not np.any(loser_vals[idx] > 0):
            value = 0.0
        else:
            sub = conf[np.ix_(losers[idx], losers[idx])]
            value = solve_exact(WisInstance(loser_vals[idx], sub)).welfare
            report.reauction_solves += 1
        welfare_cache[eligible] = value
        return value

    subsets: list[tuple[tuple[int, ...], float]] = []
    violated = False
    all_members = tuple(range(k))
    for size in range(1, k + 1):
        for members in combinations(all_members, size):
            remaining = tuple(w for w in all_members if w not in members)
            floor = reauction_value(remaining)
            subsets.append((members, floor))
            report.constraints_checked += 1
            if prices[list(members)].sum() < floor - 1e-9 * max(1.0, floor):
                violated = True

    if not violated:
        return prices, report

    report.adjusted = True
    solved = _constrained_nbs(v, subsets)
    if solved is None:
        report.unpriceable = True
        return v.copy(), report
    return solved, report
