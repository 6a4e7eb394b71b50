"""Content popularity, per-UT preferences, sharing profit and the stacked value vector.

Bids equal values throughout: the second-price mechanism makes truthful
bidding dominant, so no separate bid state exists anywhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mobility import ConflictGraph, EncounterMatrix
from .scenario import ContentParams


def zipf_popularity(n_chunks: int, alpha: float) -> np.ndarray:
    """p_m = m^-alpha / sum_j j^-alpha for ranks m = 1..n_chunks."""
    if n_chunks < 1:
        raise ValueError("n_chunks must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    ranks = np.arange(1, n_chunks + 1, dtype=float)
    weights = ranks ** (-alpha)
    return weights / weights.sum()


@dataclass(frozen=True)
class PreferenceMatrix:
    """Per-UT request intensities; each row is a probability vector over chunks."""

    weights: np.ndarray  # (N, M), rows sum to 1


def generate_preferences(content: ContentParams, n_uts: int, rng: np.random.Generator,
                         mode: str = "homogeneous", swaps: int = 0) -> PreferenceMatrix:
    """Request intensities per UT.

    "homogeneous" gives every UT the catalog Zipf law. "perturbed" applies
    ``swaps`` random adjacent-rank transpositions per UT before assigning the
    Zipf weights, producing mild per-UT taste differences; swaps=0 reduces to
    homogeneous.
    """
    pop = zipf_popularity(content.chunk_count, content.zipf_alpha)
    M = content.chunk_count
    if mode == "homogeneous":
        f = np.tile(pop, (n_uts, 1))
    elif mode == "perturbed":
        f = np.empty((n_uts, M))
        for n in range(n_uts):
            rank_to_chunk = np.arange(M)
            for _ in range(swaps):
                i = int(rng.integers(0, M - 1)) if M > 1 else 0
                if M > 1:
                    rank_to_chunk[[i, i + 1]] = rank_to_chunk[[i + 1, i]]
            f[n, rank_to_chunk] = pop
    else:
        raise ValueError(f"unknown preference mode {mode!r}")
    return PreferenceMatrix(f)


def local_popularity(prefs: PreferenceMatrix) -> np.ndarray:
    """Cell-wide chunk popularity: column sums of the preferences, normalized."""
    totals = prefs.weights.sum(axis=0)
    return totals / totals.sum()


def sharing_profit(n: int, m: int, prefs: PreferenceMatrix, mean_rate_bps: np.ndarray,
                   enc: EncounterMatrix, conflict: ConflictGraph,
                   unit_transmission_cost: float, chunk_size_bits: float) -> float:
    """Expected D2D sharing profit of UT n for chunk m over its conflict neighbors.

    Neighbors are exactly the UTs whose encounter probability clears the
    conflict threshold; each contributes preference * mean rate * encounter
    probability, scaled by the per-bit transmission cost and chunk size.
    """
    neighbors = conflict.adjacency[n].astype(bool)
    terms = (prefs.weights[neighbors, m]
             * mean_rate_bps[n, neighbors]
             * enc.probabilities[n, neighbors])
    return float(unit_transmission_cost * chunk_size_bits * terms.sum())


def revenue(profit: float, unit_cache_cost: float, cache_used_bits: float,
            chunk_size_bits: float) -> float:
    """Net revenue: sharing profit minus cache cost.

    Cache occupancy is priced in chunk-size units (cost = zeta * used/chunk),
    so the default one-chunk occupancy costs exactly zeta.
    """
    return profit - unit_cache_cost * (cache_used_bits / chunk_size_bits)


@dataclass(frozen=True)
class ValueVector:
    """All N x M revenues plus the participation mask (revenue > 0).

    Non-participating entries keep their raw (<= 0) revenue for auditing but
    are excluded from bidding; solvers see them as value 0.
    """

    revenues: np.ndarray       # (N, M)
    participating: np.ndarray  # (N, M) bool

    @property
    def n_uts(self) -> int:
        return self.revenues.shape[0]

    @property
    def n_chunks(self) -> int:
        return self.revenues.shape[1]

    @property
    def stacked(self) -> np.ndarray:
        """Chunk-major length-MN vector: entry m*N + n is UT n's revenue for chunk m."""
        return self.revenues.T.reshape(-1)

    @property
    def solver_values(self) -> np.ndarray:
        """Stacked values with non-participating entries zeroed."""
        return np.where(self.participating, self.revenues, 0.0).T.reshape(-1)


def build_value_vector(prefs: PreferenceMatrix, mean_rate_bps: np.ndarray,
                       enc: EncounterMatrix, conflict: ConflictGraph,
                       content: ContentParams) -> ValueVector:
    """Assemble every per-(UT, chunk) revenue and mark participants."""
    coupling = (conflict.adjacency * enc.probabilities * mean_rate_bps)  # (N, N)
    profits = (content.unit_transmission_cost * content.chunk_size_bits
               * coupling @ prefs.weights)                               # (N, M)
    revenues = profits - content.unit_cache_cost
    return ValueVector(revenues, revenues > 0.0)
