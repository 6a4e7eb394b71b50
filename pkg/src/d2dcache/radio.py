"""Pathloss, Shannon link rates, and per-pair rate summaries over a trace.

Rates are deterministic functions of distance (no fading); both link types
split their band equally among the sharing links, so the per-link noise
power scales with the allocated subband.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import RadioParams

PATHLOSS_MIN_DISTANCE_KM = 1e-3  # clamp below 1 m to dodge the d -> 0 singularity


def dbm_to_mw(dbm):
    return np.power(10.0, np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(np.asarray(mw, dtype=float))


def pathloss_bs_db(d_km):
    """Macro-cell downlink pathloss, 37.6 log10(d) + 128.1 dB (d in km)."""
    d = np.asarray(d_km, dtype=float)
    if np.any(d <= 0):
        raise ValueError("pathloss_bs_db requires distance > 0")
    return 37.6 * np.log10(d) + 128.1


def pathloss_d2d_db(d_km):
    """Device-to-device pathloss, 40 log10(d) + 148 dB, clamped at 1 m."""
    d = np.maximum(np.asarray(d_km, dtype=float), PATHLOSS_MIN_DISTANCE_KM)
    return 40.0 * np.log10(d) + 148.0


def d2d_contact(d_km, radio: RadioParams):
    """True where D2D received power exceeds the minimum contact level."""
    rx_dbm = radio.tx_power_d2d_dbm - pathloss_d2d_db(d_km)
    return rx_dbm > radio.min_rx_power_dbm


def _shannon_rate(rx_dbm, bandwidth_hz: float, n_sharing: int,
                  interference_mw: float, noise_psd_dbm_hz: float):
    if n_sharing < 1:
        raise ValueError("n_sharing must be >= 1")
    subband = bandwidth_hz / n_sharing
    noise_mw = dbm_to_mw(noise_psd_dbm_hz) * subband
    snr = dbm_to_mw(rx_dbm) / (interference_mw + noise_mw)
    return subband * np.log2(1.0 + snr)


def rate_d2d(d_km, n_sharing: int, radio: RadioParams):
    """Per-link D2D rate in bit/s with the D2D band split n_sharing ways."""
    rx = radio.tx_power_d2d_dbm - pathloss_d2d_db(d_km)
    return _shannon_rate(rx, radio.bandwidth_d2d_hz, n_sharing,
                         radio.interference_d2d_mw, radio.noise_psd_dbm_hz)


def rate_cellular(d_km, n_sharing: int, radio: RadioParams):
    """Per-UT downlink rate in bit/s with the cellular band split n_sharing ways."""
    rx = radio.tx_power_bs_dbm - pathloss_bs_db(d_km)
    return _shannon_rate(rx, radio.bandwidth_cellular_hz, n_sharing,
                         radio.interference_cellular_mw, radio.noise_psd_dbm_hz)


@dataclass(frozen=True)
class RateSummary:
    """Trace-averaged D2D link statistics for one UT pair.

    mean_rate_bps averages over all slots counting out-of-contact slots as
    rate 0; min_contact_rate_bps is taken over contact slots only and is NaN
    when the pair never meets (callers treat that as "no D2D path").
    """

    mean_rate_bps: float
    min_contact_rate_bps: float
    contact_slots: int


@dataclass(frozen=True)
class RateTable:
    """All-pairs RateSummary fields as (N, N) arrays."""

    mean_bps: np.ndarray
    min_contact_bps: np.ndarray  # NaN where contact_slots == 0
    contact_slots: np.ndarray

    @property
    def contact(self) -> np.ndarray:
        return self.contact_slots > 0


def _summarize(d_km: np.ndarray, radio: RadioParams, axis: int = 0):
    """Shared arithmetic for pair and matrix summaries; full-band (n_sharing=1) rates."""
    contact = d2d_contact(d_km, radio)
    rates = np.where(contact, rate_d2d(d_km, 1, radio), 0.0)
    mean = rates.mean(axis=axis)
    slots = contact.sum(axis=axis)
    masked = np.where(contact, rates, np.inf)
    rmin = masked.min(axis=axis)
    rmin = np.where(slots > 0, rmin, np.nan)
    return mean, rmin, slots


def rate_summary_pair(trace, n: int, n_other: int, radio: RadioParams) -> RateSummary:
    """Average and worst-contact-slot rate for one pair, full band per link."""
    from .mobility import wrap_distance

    d_m = wrap_distance(trace.positions[:, n, :], trace.positions[:, n_other, :],
                        trace.coverage_radius_m)
    mean, rmin, slots = _summarize(d_m / 1000.0, radio)
    return RateSummary(float(mean), float(rmin), int(slots))


def rate_summary_matrix(trace, radio: RadioParams) -> RateTable:
    """Vectorized rate_summary_pair over all pairs; diagonal is zeroed."""
    from .mobility import pairwise_wrap_distance

    d_m = pairwise_wrap_distance(trace.positions, trace.coverage_radius_m)
    mean, rmin, slots = _summarize(d_m / 1000.0, radio, axis=0)
    np.fill_diagonal(mean, 0.0)
    np.fill_diagonal(rmin, np.nan)
    np.fill_diagonal(slots, 0)
    return RateTable(mean, rmin, slots)
