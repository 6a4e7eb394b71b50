"""Placement auctions: the one-shot stacked auction and the popularity-ordered rounds.

Both produce an :class:`AuctionOutcome`: a feasible placement (per-chunk
conflict constraints plus the per-UT cache capacity) together with the
price schedule. The one-shot path solves the stacked MN-vertex instance by
SDP relaxation and rounding, falling back to the exact solver at small
sizes if the SDP fails; the repeated path auctions chunks one at a time in
local-popularity order over the still-uncached UTs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mwis, pricing
from .mobility import ConflictGraph, ExpandedConflict
from .scenario import AuctionParams
from .valuation import ValueVector


@dataclass(frozen=True)
class Placement:
    """Binary caching decision x[n, m] plus the realized welfare."""

    x: np.ndarray
    welfare: float

    @property
    def winner_sets(self) -> dict[int, tuple[int, ...]]:
        return {m: tuple(np.flatnonzero(self.x[:, m]).tolist())
                for m in range(self.x.shape[1])}

    @property
    def n_cached(self) -> int:
        return int(self.x.sum())


@dataclass
class AuctionOutcome:
    placement: Placement
    prices: np.ndarray                 # (N, M), nonzero only at winners
    second_price: dict[int, float]     # chunk -> loser re-auction welfare
    diagnostics: dict = field(default_factory=dict)


def empty_placement(n_uts: int, n_chunks: int) -> Placement:
    return Placement(np.zeros((n_uts, n_chunks), dtype=np.int8), 0.0)


def check_placement(placement: Placement, conflict: ConflictGraph,
                    chunks_per_ut: int = 1) -> None:
    """Raise if the per-chunk conflict or per-UT capacity constraints are violated."""
    x = placement.x
    adj = conflict.adjacency.astype(bool)
    for m in range(x.shape[1]):
        cached = x[:, m].astype(bool)
        if np.any(adj[np.ix_(cached, cached)]):
            raise RuntimeError(f"conflicting UTs share chunk {m}")
    loads = x.sum(axis=1)
    if np.any(loads > chunks_per_ut):
        raise RuntimeError(f"cache capacity exceeded (max load {int(loads.max())})")


def _price_chunk(chunk: int, winners_m: np.ndarray, revenues: np.ndarray,
                 conflict_adj: np.ndarray, losers: np.ndarray,
                 params: AuctionParams, diagnostics: dict,
                 prices: np.ndarray) -> float:
    """Second price, bargaining split, sublease guard; writes into the price matrix."""
    total = pricing.second_price_total(chunk, set(), revenues, conflict_adj,
                                       losers=losers)
    v = revenues[winners_m, chunk]
    if total > v.sum() + 1e-9 * max(1.0, abs(v.sum())):
        # approximate placements can be outbid by the loser pool; extract full
        # value and flag rather than abort the run
        prices[winners_m, chunk] = v
        diagnostics["second_price_deficit"] = diagnostics.get("second_price_deficit", 0) + 1
        return total
    p = pricing.nbs_prices(v, total)
    p, report = pricing.sublease_guard(chunk, winners_m, p, revenues, conflict_adj,
                                       losers, enum_limit=params.sublease_enum_limit)
    if report.skipped:
        diagnostics["guard_skipped"] = diagnostics.get("guard_skipped", 0) + 1
    if report.adjusted:
        diagnostics["guard_adjusted"] = diagnostics.get("guard_adjusted", 0) + 1
    if report.unpriceable:
        diagnostics["unpriceable"] = diagnostics.get("unpriceable", 0) + 1
    prices[winners_m, chunk] = p
    return total


def moac(values: ValueVector, expanded: ExpandedConflict, conflict: ConflictGraph,
         params: AuctionParams, exact_limit: int = mwis.EXACT_LIMIT) -> AuctionOutcome:
    """One-shot auction over the stacked (chunk, UT) instance."""
    n_uts, n_chunks = values.n_uts, values.n_chunks
    diagnostics: dict = {"algorithm": "moac", "sdp_iterations": 0, "sdp_gap": 0.0,
                         "exact_fallbacks": 0}
    solver_values = values.solver_values
    instance = mwis.WisInstance(solver_values, expanded.adjacency)

    if not np.any(solver_values > 0):
        placement = empty_placement(n_uts, n_chunks)
        return AuctionOutcome(placement, np.zeros((n_uts, n_chunks)), {}, diagnostics)

    try:
        sol = mwis.solve_sdp(instance, tol=params.sdp_gap_tol)
        selection = mwis.round_solution(sol, instance, threshold=params.rounding_threshold)
        diagnostics["sdp_iterations"] = sol.iterations
        diagnostics["sdp_gap"] = sol.dual_gap
        diagnostics["sdp_upper_bound"] = sol.upper_bound
    except mwis.SdpConvergenceError:
        if instance.size > exact_limit:
            raise
        selection = mwis.solve_exact(instance, exact_limit)
        diagnostics["exact_fallbacks"] = 1

    x = selection.chi.reshape(n_chunks, n_uts).T.astype(np.int8)
    placement = Placement(x, selection.welfare)
    check_placement(placement, conflict)

    winners_all = set(np.flatnonzero(x.sum(axis=1)).tolist())
    losers = np.array([n for n in range(n_uts) if n not in winners_all], dtype=int)
    prices = np.zeros((n_uts, n_chunks))
    second = {}
    for m in range(n_chunks):
        winners_m = np.flatnonzero(x[:, m])
        if winners_m.size == 0:
            continue
        second[m] = _price_chunk(m, winners_m, values.revenues, conflict.adjacency,
                                 losers, params, diagnostics, prices)
    return AuctionOutcome(placement, prices, second, diagnostics)


def mrac(values: ValueVector, conflict: ConflictGraph, popularity: np.ndarray,
         params: AuctionParams, exact_limit: int = mwis.EXACT_LIMIT) -> AuctionOutcome:
    """Popularity-ordered single-chunk auctions over the shrinking UT pool.

    Winners leave the pool (their cache is full); rounds stop when the pool
    empties, the catalog is exhausted, or nobody left values any remaining
    chunk positively.
    """
    n_uts, n_chunks = values.n_uts, values.n_chunks
    diagnostics: dict = {"algorithm": "mrac", "rounds": 0, "sdp_iterations": 0,
                         "sdp_gap": 0.0, "exact_fallbacks": 0}
    order = sorted(range(n_chunks), key=lambda m: (-popularity[m], m))
    masked = np.where(values.participating, values.revenues, 0.0)

    pool = list(range(n_uts))
    x = np.zeros((n_uts, n_chunks), dtype=np.int8)
    prices = np.zeros((n_uts, n_chunks))
    second = {}
    welfare = 0.0

    for round_idx, m in enumerate(order):
        if not pool:
            break
        remaining = order[round_idx:]
        if not np.any(masked[np.ix_(pool, remaining)] > 0):
            break  # nobody still in the pool values any remaining chunk
        participants = np.array([n for n in pool if masked[n, m] > 0], dtype=int)
        if participants.size == 0:
            continue
        diagnostics["rounds"] += 1

        sub = conflict.adjacency[np.ix_(participants, participants)]
        instance = mwis.WisInstance(masked[participants, m], sub)
        if participants.size <= exact_limit:
            selection = mwis.solve_exact(instance, exact_limit)
        else:
            try:
                sol = mwis.solve_sdp(instance, tol=params.sdp_gap_tol)
                selection = mwis.round_solution(sol, instance,
                                                threshold=params.rounding_threshold)
                diagnostics["sdp_iterations"] += sol.iterations
                diagnostics["sdp_gap"] = max(diagnostics["sdp_gap"], sol.dual_gap)
            except mwis.SdpConvergenceError:
                if participants.size > mwis.EXACT_HARD_LIMIT:
                    raise
                selection = mwis.solve_exact(instance, hard_limit=mwis.EXACT_HARD_LIMIT)
                diagnostics["exact_fallbacks"] += 1

        winners_m = participants[selection.chi.astype(bool)]
        if winners_m.size == 0:
            continue
        x[winners_m, m] = 1
        welfare += selection.welfare

        round_losers = np.array([n for n in pool if n not in set(winners_m.tolist())],
                                dtype=int)
        second[m] = _price_chunk(m, winners_m, values.revenues, conflict.adjacency,
                                 round_losers, params, diagnostics, prices)
        pool = round_losers.tolist()

    placement = Placement(x, welfare)
    check_placement(placement, conflict)
    return AuctionOutcome(placement, prices, second, diagnostics)


def expand_for_capacity(values: ValueVector, conflict: ConflictGraph,
                        chunks_per_ut: int) -> tuple[ValueVector, ConflictGraph, np.ndarray]:
    """Reduce multi-chunk caches to the one-chunk model by duplicating UTs.

    A UT with room for h chunks becomes h co-located bidders that conflict
    with each other (one physical cache cannot hold the same chunk twice)
    and inherit the owner's conflicts and values. Returns the owner map for
    :func:`collapse_placement`.
    """
    if chunks_per_ut <= 1:
        return values, conflict, np.arange(values.n_uts)
    owner = np.repeat(np.arange(values.n_uts), chunks_per_ut)
    revenues = values.revenues[owner]
    adj = conflict.adjacency[np.ix_(owner, owner)].copy()
    same_owner = owner[:, None] == owner[None, :]
    adj[same_owner] = 1
    np.fill_diagonal(adj, 0)
    return (ValueVector(revenues, revenues > 0.0),
            ConflictGraph(adj.astype(np.uint8), conflict.gamma_used), owner)


def collapse_placement(outcome: AuctionOutcome, owner: np.ndarray,
                       n_uts: int) -> AuctionOutcome:
    """Map a duplicated-UT outcome back to physical UTs (prices sum per owner)."""
    n_chunks = outcome.placement.x.shape[1]
    x = np.zeros((n_uts, n_chunks), dtype=np.int8)
    prices = np.zeros((n_uts, n_chunks))
    for virtual, phys in enumerate(owner):
        x[phys] |= outcome.placement.x[virtual]
        prices[phys] += outcome.prices[virtual]
    placement = Placement(x, outcome.placement.welfare)
    return AuctionOutcome(placement, prices, outcome.second_price, outcome.diagnostics)


def export_outcome(outcome: AuctionOutcome, path) -> Path:
    """CSV of (chunk, ut, cached, price) followed by a commented summary block."""
    path = Path(path)
    x = outcome.placement.x
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chunk", "ut", "cached", "price"])
        for m in range(x.shape[1]):
            for n in range(x.shape[0]):
                if x[n, m] or outcome.prices[n, m]:
                    writer.writerow([m, n, int(x[n, m]), repr(float(outcome.prices[n, m]))])
        fh.write(f"# welfare,{outcome.placement.welfare!r}\n")
        for m in sorted(outcome.second_price):
            fh.write(f"# second_price,{m},{outcome.second_price[m]!r}\n")
    return path
