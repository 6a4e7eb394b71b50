"""Placement evaluation on a trace: access delay, offloading ratios, welfare.

Delay accounting per (UT, chunk): own cache costs nothing; otherwise the
best reachable provider (largest worst-contact-slot rate) serves over D2D,
and only failing that the BS radio plus backhaul. Link rates at evaluation
time share bandwidth among the realized load: the D2D band among the active
provider pairs, the cellular band among the UTs that need the BS at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import radio
from .auction import Placement
from .mobility import Trace, wrap_distance
from .scenario import RadioParams
from .valuation import PreferenceMatrix


@dataclass(frozen=True)
class DelayBreakdown:
    avg_delay_s: float
    per_ut_s: np.ndarray
    d2d_s: float          # mean over UTs of the D2D component
    bs_radio_s: float     # mean over UTs of the BS radio component
    backhaul_s: float     # mean over UTs of the backhaul component
    n_cellular: int       # UTs that needed any BS delivery
    n_d2d_pairs: int      # distinct provider pairs in use


@dataclass(frozen=True)
class MetricsReport:
    avg_delay_s: float
    offloading_self: float
    offloading_reach: float
    welfare: float
    per_ut_delay_s: np.ndarray


def access_delay(placement: Placement, trace: Trace, prefs: PreferenceMatrix,
                 radio_params: RadioParams, backhaul_rate_bps: float,
                 chunk_size_bits: float,
                 rates: radio.RateTable | None = None) -> DelayBreakdown:
    x = placement.x.astype(bool)
    f = prefs.weights
    n_uts, n_chunks = x.shape
    if rates is None:
        rates = radio.rate_summary_matrix(trace, radio_params)
    contact = rates.contact

    # best provider per (requester, chunk): max worst-slot rate among caching contacts
    provider_rate = np.where(contact, rates.min_contact_bps, -np.inf)  # (N, N)
    provider_rate = np.where(np.isnan(provider_rate), -np.inf, provider_rate)
    masked = np.where(x[None, :, :], provider_rate[:, :, None], -np.inf)  # (N, N, M)
    best_rate = masked.max(axis=1)
    best_provider = masked.argmax(axis=1)

    own = x
    d2d = ~own & (best_rate > 0)
    bs = ~own & ~d2d

    demand = f > 0
    pairs = set()
    for n, m in zip(*np.nonzero(d2d & demand)):
        pairs.add(frozenset((int(n), int(best_provider[n, m]))))
    n_d2d_pairs = len(pairs)
    n_cellular = int(np.any(bs & demand, axis=1).sum())

    d2d_term = np.zeros((n_uts, n_chunks))
    if n_d2d_pairs:
        with np.errstate(divide="ignore"):
            d2d_term = np.where(d2d, chunk_size_bits * n_d2d_pairs / best_rate, 0.0)

    bs_radio_term = np.zeros((n_uts, n_chunks))
    backhaul_term = np.zeros((n_uts, n_chunks))
    if n_cellular:
        mean_pos = trace.positions.mean(axis=0)
        center = np.full(2, trace.coverage_radius_m / 2.0)
        d_bs_m = np.maximum(wrap_distance(mean_pos, center, trace.coverage_radius_m), 1.0)
        r_cell = radio.rate_cellular(d_bs_m / 1000.0, n_cellular, radio_params)
        bs_radio_term = np.where(bs, chunk_size_bits / r_cell[:, None], 0.0)
        backhaul_term = np.where(bs, chunk_size_bits / backhaul_rate_bps, 0.0)

    per_ut_d2d = (f * d2d_term).sum(axis=1)
    per_ut_bs = (f * bs_radio_term).sum(axis=1)
    per_ut_back = (f * backhaul_term).sum(axis=1)
    per_ut = per_ut_d2d + per_ut_bs + per_ut_back
    return DelayBreakdown(
        avg_delay_s=float(per_ut.mean()),
        per_ut_s=per_ut,
        d2d_s=float(per_ut_d2d.mean()),
        bs_radio_s=float(per_ut_bs.mean()),
        backhaul_s=float(per_ut_back.mean()),
        n_cellular=n_cellular,
        n_d2d_pairs=n_d2d_pairs,
    )


def offloading_ratio(placement: Placement, prefs: PreferenceMatrix,
                     contact: np.ndarray) -> tuple[float, float]:
    """Self-cache and D2D-reachable offloading fractions of the request weight.

    The self figure counts only demand served from the UT's own cache; the
    reachable figure also counts chunks cached at any ever-in-contact peer
    and is the headline number (self-cache alone understates D2D delivery).
    """
    x = placement.x.astype(float)
    f = prefs.weights
    total = f.sum()
    self_ratio = float((f * x).sum() / total)
    reachable = (x > 0) | (np.asarray(contact, dtype=bool) @ (x > 0))
    reach_ratio = float((f * reachable).sum() / total)
    return self_ratio, reach_ratio


def social_welfare(placement: Placement, revenues: np.ndarray) -> float:
    return float((np.asarray(revenues) * placement.x).sum())


def evaluate(placement: Placement, trace: Trace, prefs: PreferenceMatrix,
             radio_params: RadioParams, revenues: np.ndarray,
             backhaul_rate_bps: float, chunk_size_bits: float,
             rates: radio.RateTable | None = None) -> MetricsReport:
    if rates is None:
        rates = radio.rate_summary_matrix(trace, radio_params)
    delay = access_delay(placement, trace, prefs, radio_params,
                         backhaul_rate_bps, chunk_size_bits, rates=rates)
    o_self, o_reach = offloading_ratio(placement, prefs, rates.contact)
    return MetricsReport(
        avg_delay_s=delay.avg_delay_s,
        offloading_self=o_self,
        offloading_reach=o_reach,
        welfare=social_welfare(placement, revenues),
        per_ut_delay_s=delay.per_ut_s,
    )
