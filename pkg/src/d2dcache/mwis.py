"""Weighted independent-set placement solvers.

Three routes over the same instance shape (nonnegative vertex values plus a
symmetric binary conflict matrix):

* :func:`solve_exact` — globally optimal branch-and-bound, the oracle route.
* :func:`solve_sdp` — the semidefinite relaxation max mu' S mu over the unit-
  trace PSD matrices vanishing on conflict pairs (mu = sqrt(values)), solved
  by a primal-dual interior-point method. Its dual objective certifies an
  upper bound on the exact optimum.
* :func:`round_solution` — threshold the SDP diagonal, repair conflicts by
  dropping low-value members, then greedily complete.

Vertices with value 0 are stripped before solving and re-inserted unselected;
dense linear algebra throughout (target sizes are a few hundred vertices).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EXACT_LIMIT = 24       # size up to which callers prefer the exact route
EXACT_HARD_LIMIT = 40  # absolute cap for branch-and-bound
DEFAULT_GAP_TOL = 1.49e-8
DEFAULT_MAX_ITERS = 200
ROUNDING_THRESHOLD = 1e-5


class ExactSizeError(ValueError):
    """Instance too large for exhaustive search; use the SDP route."""


class SdpConvergenceError(RuntimeError):
    """Interior-point iteration cap hit while the gap was still large.

    Carries the best iterate seen so far in ``best``.
    """

    def __init__(self, message: str, best: "SdpSolution"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class WisInstance:
    values: np.ndarray     # (L,) nonnegative
    conflicts: np.ndarray  # (L, L) binary, symmetric, zero diagonal

    @property
    def size(self) -> int:
        return int(np.asarray(self.values).size)


@dataclass(frozen=True)
class Selection:
    chi: np.ndarray  # (L,) in {0, 1}
    welfare: float


@dataclass(frozen=True)
class SdpSolution:
    S: np.ndarray        # (L, L) PSD, unit trace, zero on conflict pairs
    primal_value: float  # objective of the feasible primal iterate
    upper_bound: float   # dual objective; certified >= the exact optimum
    dual_gap: float      # relative primal-dual gap at termination
    iterations: int


def selection_feasible(sel: Selection, instance: WisInstance) -> bool:
    chi = sel.chi.astype(bool)
    conf = np.asarray(instance.conflicts, dtype=bool)
    return not np.any(conf[np.ix_(chi, chi)])


def solve_exact(instance: WisInstance, exact_limit: int = EXACT_LIMIT,
                hard_limit: int = EXACT_HARD_LIMIT) -> Selection:
    """Globally optimal selection by branch-and-bound over bitmasks.

    Vertices are branched in descending value order; the upper bound sums,
    over a greedy clique partition, the best remaining value per clique.
    Welfare ties resolve toward the lexicographically smallest chi.
    """
    values = np.asarray(instance.values, dtype=float)
    conf = np.asarray(instance.conflicts)
    L = values.size
    if L > hard_limit:
        raise ExactSizeError(
            f"instance has {L} vertices (cap {hard_limit}); use the SDP route")

    keep = np.flatnonzero(values > 0)
    chi = np.zeros(L, dtype=np.int8)
    if keep.size == 0:
        return Selection(chi, 0.0)

    order = sorted(keep.tolist(), key=lambda i: (-values[i], i))
    k = len(order)
    val = [float(values[i]) for i in order]
    adj = [0] * k
    for a in range(k):
        row = conf[order[a]]
        for b in range(k):
            if b != a and row[order[b]]:
                adj[a] |= 1 << b

    # greedy clique partition in branching order; the per-clique max gives the bound
    clique_members: list[list[int]] = []
    clique_masks: list[int] = []
    for a in range(k):
        for ci, mask in enumerate(clique_masks):
            if mask & ~adj[a] == 0:  # adjacent to every current member
                clique_members[ci].append(a)
                clique_masks[ci] |= 1 << a
                break
        else:
            clique_members.append([a])
            clique_masks.append(1 << a)

    def bound(mask: int) -> float:
        total = 0.0
        for members, cmask in zip(clique_members, clique_masks):
            if cmask & mask:
                for a in members:  # members are in descending value order
                    if (mask >> a) & 1:
                        total += val[a]
                        break
        return total

    def chi_list(selmask: int) -> list[int]:
        out = [0] * L
        for a in range(k):
            if (selmask >> a) & 1:
                out[order[a]] = 1
        return out

    # greedy incumbent
    sel_mask = 0
    banned = 0
    for a in range(k):
        if not (banned >> a) & 1:
            sel_mask |= 1 << a
            banned |= adj[a]
    best_chi = chi_list(sel_mask)
    best_w = sum(val[a] for a in range(k) if (sel_mask >> a) & 1)

    def visit(selmask: int) -> None:
        nonlocal best_w, best_chi
        w = sum(val[a] for a in range(k) if (selmask >> a) & 1)
        cand_chi = chi_list(selmask)
        if w > best_w or (w == best_w and cand_chi < best_chi):
            best_w, best_chi = w, cand_chi

    def search(cand: int, cur_w: float, cur_mask: int) -> None:
        if cand == 0:
            visit(cur_mask)
            return
        if cur_w + bound(cand) < best_w:
            return
        a = (cand & -cand).bit_length() - 1  # lowest bit = highest remaining value
        bit = 1 << a
        search(cand & ~bit & ~adj[a], cur_w + val[a], cur_mask | bit)
        search(cand & ~bit, cur_w, cur_mask)

    search((1 << k) - 1, 0.0, 0)
    chi = np.array(best_chi, dtype=np.int8)
    welfare = float(values[chi.astype(bool)].sum())
    return Selection(chi, welfare)


def _schur_matrix(W: np.ndarray, S: np.ndarray, I: np.ndarray, J: np.ndarray) -> np.ndarray:
    """M[k, l] = tr(A_k Z^-1 A_l S) for the trace constraint (k=0) and pair constraints."""
    m = I.size
    M = np.empty((m + 1, m + 1))
    M[0, 0] = float(np.sum(W * S))
    SW = S @ W
    M[0, 1:] = SW[J, I] + SW[I, J]
    M[1:, 0] = M[0, 1:]
    if m:
        M[1:, 1:] = (W[np.ix_(J, I)] * S[np.ix_(J, I)].T
                     + W[np.ix_(J, J)] * S[np.ix_(I, I)].T
                     + W[np.ix_(I, I)] * S[np.ix_(J, J)].T
                     + W[np.ix_(I, J)] * S[np.ix_(I, J)].T)
    return M


def _max_step(X: np.ndarray, D: np.ndarray) -> float:
    """Largest alpha with X + alpha D still PSD (X assumed positive definite)."""
    chol = np.linalg.cholesky(X)
    Li = np.linalg.inv(chol)
    U = Li @ D @ Li.T
    lam = np.linalg.eigvalsh((U + U.T) / 2.0)[0]
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


def solve_sdp(instance: WisInstance, tol: float = DEFAULT_GAP_TOL,
              max_iters: int = DEFAULT_MAX_ITERS) -> SdpSolution:
    """Primal-dual interior-point solve of the unit-trace relaxation.

    Both the primal iterate S (trace 1, zero on conflicts, PSD) and the dual
    iterate stay feasible from the first step, so the duality gap <S, Z> is
    exact and the dual objective is a valid upper bound at every iteration.
    A Mehrotra-style predictor-corrector drives the relative gap below
    ``tol``; hitting the iteration cap with a gap above 100 * tol raises
    :class:`SdpConvergenceError` carrying the best iterate.
    """
    values = np.asarray(instance.values, dtype=float)
    conf = np.asarray(instance.conflicts)
    L = values.size

    keep = np.flatnonzero(values > 0)
    if keep.size == 0:
        S_full = np.eye(L) / max(L, 1)
        return SdpSolution(S_full, 0.0, 0.0, 0.0, 0)
    if keep.size == 1:
        S_full = np.zeros((L, L))
        S_full[keep[0], keep[0]] = 1.0
        v = float(values[keep[0]])
        return SdpSolution(S_full, v, v, 0.0, 0)

    vmax = float(values[keep].max())
    vals = values[keep] / vmax
    n = keep.size
    sub = conf[np.ix_(keep, keep)]
    I, J = np.nonzero(np.triu(sub, 1))
    m = I.size

    mu = np.sqrt(vals)
    C = np.outer(mu, mu)
    eye = np.eye(n)
    b = np.zeros(m + 1)
    b[0] = 1.0

    S = eye / n
    y = np.zeros(m + 1)
    y[0] = float(vals.sum()) + 1.0
    Z = y[0] * eye - C

    def a_op(X: np.ndarray) -> np.ndarray:
        out = np.empty(m + 1)
        out[0] = np.trace(X)
        if m:
            out[1:] = X[I, J] + X[J, I]
        return out

    def at_op(vec: np.ndarray) -> np.ndarray:
        X = vec[0] * eye.copy()
        if m:
            X[I, J] += vec[1:]
            X[J, I] += vec[1:]
        return X

    def embed(Ssub: np.ndarray) -> np.ndarray:
        S_full = np.zeros((L, L))
        S_full[np.ix_(keep, keep)] = (Ssub + Ssub.T) / 2.0
        return S_full

    def snapshot(relgap: float, iters: int) -> SdpSolution:
        return SdpSolution(embed(S), float(mu @ S @ mu) * vmax,
                           float(y[0]) * vmax, relgap, iters)

    best: SdpSolution | None = None
    relgap = np.inf
    iters = 0
    for it in range(1, max_iters + 1):
        iters = it
        primal = float(mu @ S @ mu)
        dual = float(y[0])
        gap = float(np.sum(S * Z))
        relgap = (dual - primal) / max(1.0, (abs(dual) + abs(primal)) / 2.0)
        if best is None or relgap < best.dual_gap:
            best = snapshot(relgap, it - 1)
        if relgap <= tol:
            return snapshot(relgap, it - 1)

        try:
            chol = np.linalg.cholesky(Z)
        except np.linalg.LinAlgError:
            break
        Li = np.linalg.inv(chol)
        W = Li.T @ Li  # Z^-1

        nu = gap / n
        Rd = C - at_op(y) + Z
        M = _schur_matrix(W, S, I, J)
        # tiny ridge keeps the solve stable once the iterate nears the boundary
        M[np.diag_indices_from(M)] += 1e-13 * max(1.0, float(np.trace(M)) / (m + 1))
        WRdS = W @ Rd @ S

        # predictor (sigma = 0)
        rhs = a_op(WRdS) - b
        try:
            dy_a = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            break
        dZ_a = at_op(dy_a) - Rd
        raw = -S - W @ dZ_a @ S
        dS_a = (raw + raw.T) / 2.0
        alpha_a = min(1.0, _max_step(S, dS_a))
        beta_a = min(1.0, _max_step(Z, dZ_a))
        gap_aff = float(np.sum((S + alpha_a * dS_a) * (Z + beta_a * dZ_a)))
        sigma = min(1.0, max(1e-10, (max(gap_aff, 0.0) / gap) ** 3))

        # corrector with second-order term
        cross = W @ dZ_a @ dS_a
        rhs = a_op(sigma * nu * W + WRdS - cross) - b
        try:
            dy = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            break
        dZ = at_op(dy) - Rd
        raw = sigma * nu * W - S - W @ dZ @ S - cross
        dS = (raw + raw.T) / 2.0

        alpha = min(1.0, 0.98 * _max_step(S, dS))
        beta = min(1.0, 0.98 * _max_step(Z, dZ))
        if not np.isfinite(alpha) or not np.isfinite(beta) or alpha <= 0 or beta <= 0:
            break
        S = S + alpha * dS
        S = (S + S.T) / 2.0
        Z = Z + beta * dZ
        Z = (Z + Z.T) / 2.0
        y = y + beta * dy

    assert best is not None
    if best.dual_gap > 100.0 * tol:
        raise SdpConvergenceError(
            f"no convergence after {iters} iterations (relative gap {best.dual_gap:.3e})",
            best)
    return SdpSolution(best.S, best.primal_value, best.upper_bound, best.dual_gap, iters)


def round_solution(sol: SdpSolution, instance: WisInstance,
                   threshold: float = ROUNDING_THRESHOLD) -> Selection:
    """Threshold the SDP diagonal, repair conflicts, then greedily complete.

    Repair drops, among still-conflicting selected vertices, the lowest-value
    one (ties: highest index) until feasible; completion then adds any
    compatible positive-value vertex in descending value order, which can
    only raise welfare.
    """
    values = np.asarray(instance.values, dtype=float)
    conf = np.asarray(instance.conflicts, dtype=bool)
    L = values.size
    selected = np.diag(sol.S) > threshold

    while True:
        degree = conf @ selected
        in_conflict = selected & (degree > 0)
        if not in_conflict.any():
            break
        cand = np.flatnonzero(in_conflict)
        victim = cand[np.lexsort((-cand, values[cand]))[0]]
        selected[victim] = False

    order = np.lexsort((np.arange(L), -values))
    for i in order:
        if values[i] > 0 and not selected[i] and not (conf[i] & selected).any():
            selected[i] = True

    chi = selected.astype(np.int8)
    return Selection(chi, float(values[selected].sum()))


def dump_instance(instance: WisInstance, path) -> Path:
    """Cross-solver debug format: vertex values, then conflict edge list."""
    path = Path(path)
    conf = np.asarray(instance.conflicts)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record", "a", "b", "value"])
        for i, v in enumerate(np.asarray(instance.values, dtype=float)):
            writer.writerow(["vertex", i, "", repr(float(v))])
        for i, j in zip(*np.nonzero(np.triu(conf, 1))):
            writer.writerow(["edge", int(i), int(j), ""])
    return path


def load_instance(path) -> WisInstance:
    path = Path(path)
    vertices: list[tuple[int, float]] = []
    edges: list[tuple[int, int]] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for record, a, bfield, value in reader:
            if record == "vertex":
                vertices.append((int(a), float(value)))
            else:
                edges.append((int(a), int(bfield)))
    L = max(i for i, _ in vertices) + 1 if vertices else 0
    values = np.zeros(L)
    for i, v in vertices:
        values[i] = v
    conf = np.zeros((L, L), dtype=np.uint8)
    for i, j in edges:
        conf[i, j] = conf[j, i] = 1
    return WisInstance(values, conf)
