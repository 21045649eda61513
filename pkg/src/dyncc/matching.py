"""Pairwise row costs, optimal row matching, and permutation-invariant losses.

The row-wise permutation-invariant loss (RWPL) compares two co-incidence
matrices over the same node set: pad the shorter one with zero rows, build a
pairwise row-cost matrix (binary cross-entropy or cosine distance), find an
optimal row matching (exact Hungarian assignment or entropy-regularized
Sinkhorn transport), and return the total matched cost. The four variants
are named HBCE, SBCE, HC and SC.

Sinkhorn runs in the log domain with uniform marginals, and its reported
distance is scaled by the row count so that it is magnitude-comparable to
the Hungarian total (a plan with uniform row marginals assigns mass 1/N per
row; see README notes on this normalization choice).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PROB_CLAMP",
    "CostMatrix",
    "MatchResult",
    "pairwise_bce",
    "pairwise_cosine",
    "hungarian",
    "sinkhorn",
    "pad_rows",
    "rwpl",
    "RWPL_VARIANTS",
]

PROB_CLAMP = 1e-7

RWPL_VARIANTS = {
    "hbce": ("bce", "hungarian"),
    "sbce": ("bce", "sinkhorn"),
    "hc": ("cosine", "hungarian"),
    "sc": ("cosine", "sinkhorn"),
}


@dataclass(frozen=True)
class CostMatrix:
    entries: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2:
            raise ValueError("cost matrix must be 2-D")
        if entries.size and not np.isfinite(entries).all():
            raise ValueError("cost matrix has non-finite entries")
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True)
class MatchResult:
    total_cost: float
    assignment: tuple[int, ...] | None = None
    plan: np.ndarray | None = None


def _entries(c) -> np.ndarray:
    return c.entries if isinstance(c, CostMatrix) else np.asarray(c, dtype=np.float64)


def pairwise_bce(pred: np.ndarray, target: np.ndarray) -> CostMatrix:
    """Cost (i,j) = binary cross-entropy of pred row i against target row j.

    Predictions are clamped into [PROB_CLAMP, 1 - PROB_CLAMP] before the
    logs so that hard 0/1 rows (and zero pads) stay finite.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape[1] != target.shape[1]:
        raise ValueError(f"column mismatch: {pred.shape[1]} vs {target.shape[1]}")
    p = np.clip(pred, PROB_CLAMP, 1.0 - PROB_CLAMP)
    cost = -(np.log(p) @ target.T + np.log1p(-p) @ (1.0 - target).T)
    return CostMatrix(cost, "bce")


def pairwise_cosine(a: np.ndarray, b: np.ndarray) -> CostMatrix:
    """Cost (i,j) = 1 - cosine similarity; zero-norm rows count as cost 1."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column mismatch: {a.shape[1]} vs {b.shape[1]}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = np.outer(na, nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(denom > 0.0, (a @ b.T) / np.where(denom > 0, denom, 1.0), 0.0)
    return CostMatrix(1.0 - sim, "cosine")


def _solve_assignment(cost: np.ndarray) -> list[int]:
    """Exact minimum-cost assignment on a square matrix (potential-based
    shortest augmenting paths, O(n^3))."""
    n = cost.shape[0]
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match = [0] * (n + 1)  # match[j] = row assigned to column j (1-based)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        way = [0] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    assignment = [0] * n
    for j in range(1, n + 1):
        if match[j]:
            assignment[match[j] - 1] = j - 1
    return assignment


def hungarian(c) -> MatchResult:
    """Minimum-cost row/column assignment; rectangular inputs are padded
    internally with zero-cost dummy rows or columns."""
    cost = _entries(c)
    n_a, n_b = cost.shape
    if n_a == 0 or n_b == 0:
        return MatchResult(0.0, assignment=())
    n = max(n_a, n_b)
    padded = np.zeros((n, n))
    padded[:n_a, :n_b] = cost
    assignment = _solve_assignment(padded)
    # fsum makes the total independent of row order: the same multiset of
    # matched costs always reduces to the identical double.
    total = math.fsum(padded[i, assignment[i]] for i in range(n))
    return MatchResult(total, assignment=tuple(assignment[:n_a]))


def sinkhorn_plan(
    cost: np.ndarray, eps: float, iters: int = 50
) -> np.ndarray:
    """Entropy-regularized transport plan between uniform marginals.

    Runs the scaling iterations in the log domain (never overflows), then
    projects the truncated plan exactly onto the transport polytope
    (rescale rows, rescale columns, spread the residual mass rank-one).
    The projection is what makes the returned plan's marginals exactly
    uniform at any iteration budget, which in turn guarantees the scaled
    cost can never undercut the exact assignment optimum.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    n_a, n_b = cost.shape
    if n_a == 0 or n_b == 0:
        return np.zeros((n_a, n_b))
    log_mu = -np.log(n_a)
    log_nu = -np.log(n_b)
    log_k = -cost / eps
    log_u = np.zeros(n_a)
    log_v = np.zeros(n_b)
    for _ in range(iters):
        log_u = log_mu - _logsumexp_rows(log_k + log_v[None, :])
        log_v = log_nu - _logsumexp_rows((log_k + log_u[:, None]).T)
    plan = np.exp(log_u[:, None] + log_k + log_v[None, :])
    return _round_to_polytope(plan, np.full(n_a, 1.0 / n_a), np.full(n_b, 1.0 / n_b))


def _round_to_polytope(x: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> np.ndarray:
    row_sums = x.sum(axis=1)
    x = x * np.minimum(
        1.0, np.divide(mu, row_sums, out=np.ones_like(row_sums), where=row_sums > 0)
    )[:, None]
    col_sums = x.sum(axis=0)
    x = x * np.minimum(
        1.0, np.divide(nu, col_sums, out=np.ones_like(col_sums), where=col_sums > 0)
    )[None, :]
    row_residual = mu - x.sum(axis=1)
    col_residual = nu - x.sum(axis=0)
    remaining = row_residual.sum()
    if remaining > 0.0:
        x = x + np.outer(row_residual, col_residual) / remaining
    return x


def _logsumexp_rows(x: np.ndarray) -> np.ndarray:
    peak = np.max(x, axis=1)
    return peak + np.log(np.sum(np.exp(x - peak[:, None]), axis=1))


def sinkhorn(c, eps: float = 0.1, iters: int = 50) -> MatchResult:
    """Approximate matching via entropy-regularized optimal transport.

    Returns the plan plus the row-count-scaled transport cost
    ``N_A * sum(plan * cost)``; by the Birkhoff bound the scaled cost can
    never drop meaningfully below the Hungarian total and approaches it as
    eps shrinks.
    """
    cost = _entries(c)
    plan = sinkhorn_plan(cost, eps, iters)
    total = float(cost.shape[0] * np.sum(plan * cost))
    return MatchResult(total, plan=plan)


def pad_rows(a: np.ndarray, num_rows: int) -> np.ndarray:
    """Append zero rows until the matrix has num_rows rows."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape[0] >= num_rows:
        return a
    return np.vstack([a, np.zeros((num_rows - a.shape[0], a.shape[1]))])


def rwpl(
    pred: np.ndarray,
    target: np.ndarray,
    row_loss: str = "cosine",
    matcher: str = "hungarian",
    eps: float = 0.1,
    iters: int = 50,
) -> float:
    """Row-wise permutation-invariant loss between two row sets.

    Pads the shorter matrix with zero rows, builds the chosen cost matrix
    and returns the matched total. The result can in principle be
    non-finite for extreme inputs; callers that report losses flag such
    values instead of failing.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape[1] != target.shape[1]:
        raise ValueError(f"column mismatch: {pred.shape[1]} vs {target.shape[1]}")
    n = max(pred.shape[0], target.shape[0])
    if n == 0:
        return 0.0
    pred = pad_rows(pred, n)
    target = pad_rows(target, n)
    if row_loss == "bce":
        cost = pairwise_bce(pred, target)
    elif row_loss == "cosine":
        cost = pairwise_cosine(pred, target)
    else:
        raise ValueError(f"unknown row loss {row_loss!r}")
    if matcher == "hungarian":
        return hungarian(cost).total_cost
    if matcher == "sinkhorn":
        return sinkhorn(cost, eps=eps, iters=iters).total_cost
    raise ValueError(f"unknown matcher {matcher!r}")
