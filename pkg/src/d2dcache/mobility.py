"""Clustered-random mobility: home-points, per-slot traces, encounter and conflict graphs.

Positions live on the torus [0, R)^2 (the wrap metric below identifies
opposite edges), which keeps the stationary spatial distribution
rotationally invariant around each home-point. Per-slot positions are
sampled i.i.d. from the stationary density ~ min(1, d^-delta) in wrap
distance d from the home-point, via an exact inverse CDF in the radius.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import radio
from .scenario import MobilityParams, RadioParams, Scenario


@dataclass(frozen=True)
class HomePointAssignment:
    cluster_centers: np.ndarray  # (C, 2) meters
    homepoints: np.ndarray       # (C*H, 2) meters
    ut_homepoint: np.ndarray     # (N,) index into homepoints
    ut_cluster: np.ndarray       # (N,) index into cluster_centers


@dataclass(frozen=True)
class Trace:
    positions: np.ndarray        # (T, N, 2) meters
    coverage_radius_m: float

    @property
    def n_slots(self) -> int:
        return self.positions.shape[0]

    @property
    def n_uts(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class EncounterMatrix:
    """Symmetric N x N matrix of contact-slot fractions, zero diagonal."""

    probabilities: np.ndarray


@dataclass(frozen=True)
class ConflictGraph:
    """Binary adjacency: 1 where the encounter probability strictly exceeds gamma."""

    adjacency: np.ndarray        # (N, N) uint8, symmetric, zero diagonal
    gamma_used: float


@dataclass(frozen=True)
class ExpandedConflict:
    """Chunk-major MN x MN adjacency: conflict blocks on the diagonal, identity off it.

    Vertex m*N + n is (chunk m, UT n). Identity cross-blocks encode that a UT
    holds at most one chunk; diagonal blocks repeat the per-chunk conflicts.
    """

    adjacency: np.ndarray


def wrap_distance(x1, x2, coverage_radius_m: float):
    """Distance on the torus: minimum over +-R shifts of each axis.

    Accepts broadcastable arrays whose last axis is (x, y); returns the
    elementwise distances.
    """
    p1 = np.asarray(x1, dtype=float)
    p2 = np.asarray(x2, dtype=float)
    delta = np.abs(p1 - p2)
    delta = np.minimum(delta, coverage_radius_m - delta)
    return np.sqrt(np.sum(delta * delta, axis=-1))


def pairwise_wrap_distance(points: np.ndarray, coverage_radius_m: float) -> np.ndarray:
    """All-pairs torus distances for points shaped (..., N, 2) -> (..., N, N)."""
    p = np.asarray(points, dtype=float)
    delta = np.abs(p[..., :, None, :] - p[..., None, :, :])
    delta = np.minimum(delta, coverage_radius_m - delta)
    return np.sqrt(np.sum(delta * delta, axis=-1))


def generate_homepoints(mobility: MobilityParams, rng: np.random.Generator) -> HomePointAssignment:
    """Place cluster middle points uniformly, home-points uniformly in each cluster disk.

    UTs are assigned uts_per_homepoint to a home-point, so several UTs may
    share one (they are then statistically identical movers).
    """
    R = mobility.coverage_radius_m
    C = mobility.cluster_count
    H = mobility.homepoints_per_cluster
    centers = rng.random((C, 2)) * R

    radii = mobility.cluster_radius_m * np.sqrt(rng.random((C, H)))
    angles = 2.0 * np.pi * rng.random((C, H))
    offsets = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=-1)
    homepoints = np.mod(centers[:, None, :] + offsets, R).reshape(C * H, 2)

    ut_homepoint = np.repeat(np.arange(C * H), mobility.uts_per_homepoint)
    ut_cluster = ut_homepoint // H
    return HomePointAssignment(centers, homepoints, ut_homepoint, ut_cluster)


def _sample_radii(decay_exponent: float, d_max: float, rng: np.random.Generator,
                  n: int) -> np.ndarray:
    """Inverse-CDF draw from the radial density ~ rho * min(1, rho^-delta) on (0, d_max]."""
    delta = float(decay_exponent)
    u = rng.random(n)
    if d_max <= 1.0:
        # entirely inside the flat-density core
        return d_max * np.sqrt(u)
    core_mass = 0.5
    if delta == 2.0:
        tail_mass = np.log(d_max)
    else:
        tail_mass = (d_max ** (2.0 - delta) - 1.0) / (2.0 - delta)
    total = core_mass + tail_mass
    t = u * total
    r = np.empty(n)
    core = t <= core_mass
    r[core] = np.sqrt(2.0 * t[core])
    tail = t[~core] - core_mass
    if delta == 2.0:
        r[~core] = np.exp(tail)
    else:
        r[~core] = (1.0 + (2.0 - delta) * tail) ** (1.0 / (2.0 - delta))
    return r


def sample_position(homepoint, decay_exponent: float, coverage_radius_m: float,
                    rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw position(s) around a home-point with density ~ min(1, d^-delta) in wrap distance.

    The radial support is capped at R/2, the largest radius at which the
    wrap metric still sees a full circle of that radius.
    """
    n = 1 if size is None else int(size)
    r = _sample_radii(decay_exponent, coverage_radius_m / 2.0, rng, n)
    phi = 2.0 * np.pi * rng.random(n)
    offsets = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
    pos = np.mod(np.asarray(homepoint, dtype=float) + offsets, coverage_radius_m)
    return pos[0] if size is None else pos


def simulate_trace(scenario: Scenario, assignment: HomePointAssignment,
                   rng: np.random.Generator) -> Trace:
    """Independent per-slot positions for every UT around its home-point."""
    mob = scenario.mobility
    T, N, R = mob.slot_count, mob.n_uts, mob.coverage_radius_m
    r = _sample_radii(mob.decay_exponent, R / 2.0, rng, T * N).reshape(T, N)
    phi = 2.0 * np.pi * rng.random((T, N))
    offsets = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
    base = assignment.homepoints[assignment.ut_homepoint]  # (N, 2)
    positions = np.mod(base[None, :, :] + offsets, R)
    return Trace(positions, R)


def encounter_matrix(trace: Trace, radio_params: RadioParams) -> EncounterMatrix:
    """Fraction of slots with D2D received power above the contact floor, per pair."""
    d_m = pairwise_wrap_distance(trace.positions, trace.coverage_radius_m)
    contact = radio.d2d_contact(d_m / 1000.0, radio_params)
    e = contact.mean(axis=0)
    np.fill_diagonal(e, 0.0)
    e = (e + e.T) / 2.0
    return EncounterMatrix(e)


def mean_in_cluster_encounter(enc: EncounterMatrix, assignment: HomePointAssignment) -> float:
    """Average over clusters of the mean pairwise encounter probability inside each."""
    e = enc.probabilities
    clusters = np.unique(assignment.ut_cluster)
    means = []
    for c in clusters:
        members = np.flatnonzero(assignment.ut_cluster == c)
        if members.size < 2:
            raise ValueError(f"cluster {c} has {members.size} UT(s); need >= 2 for a pair mean")
        block = e[np.ix_(members, members)]
        off_diag = block[~np.eye(members.size, dtype=bool)]
        means.append(off_diag.mean())
    return float(np.mean(means))


def conflict_matrix(enc: EncounterMatrix, gamma: float) -> ConflictGraph:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    adj = (enc.probabilities > gamma).astype(np.uint8)
    np.fill_diagonal(adj, 0)
    return ConflictGraph(adj, float(gamma))


def expand_conflict(conflict: ConflictGraph, n_chunks: int) -> ExpandedConflict:
    """Block expansion to the stacked (chunk, UT) vertex set."""
    E = conflict.adjacency
    n = E.shape[0]
    eye_m = np.eye(n_chunks, dtype=np.uint8)
    same_ut = np.kron(np.ones((n_chunks, n_chunks), dtype=np.uint8) - eye_m,
                      np.eye(n, dtype=np.uint8))
    xi = np.kron(eye_m, E) + same_ut
    return ExpandedConflict(xi)


def export_trace(trace: Trace, path) -> Path:
    """Debug CSV with one row per (slot, ut)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", "ut", "x_m", "y_m"])
        T, N = trace.n_slots, trace.n_uts
        for t in range(T):
            for n in range(N):
                x, y = trace.positions[t, n]
                writer.writerow([t, n, repr(float(x)), repr(float(y))])
    return path
