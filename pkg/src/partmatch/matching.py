"""Set alignment between partlets and part descriptions.

Training path: cost = (1 - Dice) + (1 - cosine), entropic Sinkhorn transport,
thresholded hardening to an injective partial assignment. Inference path:
cost = 1 - cosine, exact assignment (Jonker-Volgenant via scipy). A brute-force
exhaustive minimizer over injective partial assignments serves as the oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

Array = np.ndarray

NULL = -1  # partlet matched to nothing

DEFAULT_NULL_COST = 1.5  # midpoint of the inference cost range [0, 2]
DICE_SMOOTH = 1e-6


@dataclass
class TransportPlan:
    p: Array  # (K, K) after null padding
    num_real_cols: int  # columns >= this index are null slots
    converged: bool
    iterations: int


@dataclass
class Assignment:
    """Injective partial map partlet index -> part index (NULL for unmatched)."""

    pi: Array  # (K,) int, part index or NULL
    total_cost: float = 0.0

    @property
    def matched(self) -> list[int]:
        return [k for k in range(len(self.pi)) if self.pi[k] != NULL]

    def __post_init__(self):
        non_null = [a for a in self.pi if a != NULL]
        if len(non_null) != len(set(non_null)):
            raise ValueError("assignment is not injective on non-null values")


def soft_dice(probs: Array, gt: Array, smooth: float = DICE_SMOOTH) -> float:
    """Soft Dice coefficient between a probability mask and a binary mask."""
    probs = np.asarray(probs, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    num = 2.0 * float(probs @ gt) + smooth
    den = float(probs.sum() + gt.sum()) + smooth
    return num / den


def training_cost(mask_probs: Array, gt_masks: Array, z_hat: Array, t_hat: Array) -> Array:
    """Training cost C[k, a] = (1 - Dice(probs_k, gt_a)) + (1 - cos(z_k, t_a)).

    mask_probs: (K, N) sigmoid probabilities; gt_masks: (A, N) binary;
    z_hat, t_hat: unit rows. Requires A <= K (each ground-truth part must be
    matchable); A > K is an error.
    """
    mask_probs = np.asarray(mask_probs, dtype=np.float64)
    gt_masks = np.asarray(gt_masks, dtype=np.float64)
    K = mask_probs.shape[0]
    A = gt_masks.shape[0]
    if A > K:
        raise ValueError(f"more ground-truth parts ({A}) than partlets ({K})")
    dice = np.empty((K, A))
    for k in range(K):
        for a in range(A):
            dice[k, a] = soft_dice(mask_probs[k], gt_masks[a])
    sem = 1.0 - np.asarray(z_hat) @ np.asarray(t_hat).T
    return (1.0 - dice) + sem


def inference_cost(z_hat: Array, t_hat: Array) -> Array:
    """Inference cost C[k, a] = 1 - cosine(z_k, t_a) for unit rows."""
    return 1.0 - np.asarray(z_hat, dtype=np.float64) @ np.asarray(t_hat, dtype=np.float64).T


def pad_with_null(c: Array, null_cost: float = DEFAULT_NULL_COST) -> tuple[Array, int]:
    """Pad a K x A cost matrix to K x K with null columns at fixed cost."""
    c = np.asarray(c, dtype=np.float64)
    K, A = c.shape
    if A > K:
        raise ValueError(f"cannot null-pad: {A} parts exceed {K} partlets")
    if A == K:
        return c.copy(), A
    padded = np.full((K, K), null_cost)
    padded[:, :A] = c
    return padded, A


def sinkhorn(
    c: Array,
    epsilon: float = 0.05,
    max_iters: int = 200,
    tol: float = 1e-6,
    null_cost: float = DEFAULT_NULL_COST,
) -> TransportPlan:
    """Entropic transport plan by alternating row/column scaling of exp(-c/eps).

    The K x A cost is null-padded to K x K; marginals are uniform 1/K on both
    sides. Stops when the worst marginal violation drops below tol.
    """
    if epsilon <= 0:
        raise ValueError("sinkhorn epsilon must be positive")
    padded, num_real = pad_with_null(c, null_cost)
    K = padded.shape[0]
    target = 1.0 / K
    # log-domain scaling for stability at small epsilon
    log_kernel = -padded / epsilon
    log_u = np.zeros(K)
    log_v = np.zeros(K)
    log_target = np.log(target)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        m = log_kernel + log_v[None, :]
        log_u = log_target - _logsumexp_rows(m)
        m = log_kernel + log_u[:, None]
        log_v = log_target - _logsumexp_rows(m.T)
        plan = np.exp(log_kernel + log_u[:, None] + log_v[None, :])
        violation = max(
            np.abs(plan.sum(axis=1) - target).max(),
            np.abs(plan.sum(axis=0) - target).max(),
        )
        if violation < tol:
            converged = True
            break
    plan = np.exp(log_kernel + log_u[:, None] + log_v[None, :])
    return TransportPlan(p=plan, num_real_cols=num_real, converged=converged, iterations=it)


def _logsumexp_rows(m: Array) -> Array:
    mx = m.max(axis=1)
    return mx + np.log(np.exp(m - mx[:, None]).sum(axis=1))


def harden(plan: TransportPlan, threshold: float | None = None) -> Assignment:
    """Threshold a transport plan into an injective partial assignment.

    pi(k) = argmax_a p[k, a] if that column is a real part and the mass exceeds
    the threshold (default 1/(2K)). Column collisions keep the row with larger
    mass; losers fall back to NULL.
    """
    p = plan.p
    K = p.shape[0]
    if threshold is None:
        threshold = 1.0 / (2.0 * K)
    pi = np.full(K, NULL, dtype=np.intp)
    best_col = p.argmax(axis=1)
    best_mass = p[np.arange(K), best_col]
    claimed: dict[int, int] = {}  # column -> row currently holding it
    for k in range(K):
        a = int(best_col[k])
        if a >= plan.num_real_cols or best_mass[k] <= threshold:
            continue
        if a in claimed:
            rival = claimed[a]
            if best_mass[k] > best_mass[rival]:
                pi[rival] = NULL
                claimed[a] = k
                pi[k] = a
        else:
            claimed[a] = k
            pi[k] = a
    return Assignment(pi=pi)


def _assignment_cost(c: Array, pi: Array, null_cost: float) -> float:
    total = 0.0
    for k, a in enumerate(pi):
        total += null_cost if a == NULL else c[k, a]
    return total


def jv_assign(c: Array, null_cost: float = DEFAULT_NULL_COST) -> Assignment:
    """Exact minimum-cost injective partial assignment (Jonker-Volgenant family).

    Unmatched partlets pay null_cost each, implemented by appending K dedicated
    null columns before solving the rectangular assignment exactly.
    """
    c = np.asarray(c, dtype=np.float64)
    K, A = c.shape
    augmented = np.concatenate([c, np.full((K, K), null_cost)], axis=1)
    rows, cols = linear_sum_assignment(augmented)
    pi = np.full(K, NULL, dtype=np.intp)
    for r, col in zip(rows, cols):
        if col < A:
            pi[r] = col
    return Assignment(pi=pi, total_cost=_assignment_cost(c, pi, null_cost))


def brute_force_assign(c: Array, null_cost: float = DEFAULT_NULL_COST) -> Assignment:
    """Exhaustive minimum over all injective partial assignments (test oracle).

    Dynamic program over subsets of parts; exact, independent of jv_assign.
    Limited to max(K, A) <= 9.
    """
    c = np.asarray(c, dtype=np.float64)
    K, A = c.shape
    if max(K, A) > 9:
        raise ValueError("brute_force_assign is limited to max(K, A) <= 9")
    full = 1 << A
    INF = np.inf
    # dp[mask] = min cost over first k partlets having used part-set mask
    dp = np.full(full, INF)
    dp[0] = 0.0
    choice: list[dict[int, int]] = []
    for k in range(K):
        nxt = np.full(full, INF)
        picks: dict[int, int] = {}
        for mask in range(full):
            base = dp[mask]
            if not np.isfinite(base):
                continue
            cand = base + null_cost
            if cand < nxt[mask]:
                nxt[mask] = cand
                picks[mask] = NULL
            for a in range(A):
                bit = 1 << a
                if mask & bit:
                    continue
                cand = base + c[k, a]
                if cand < nxt[mask | bit]:
                    nxt[mask | bit] = cand
                    picks[mask | bit] = a
        dp = nxt
        choice.append(picks)
    best_mask = int(dp.argmin())
    pi = np.full(K, NULL, dtype=np.intp)
    mask = best_mask
    for k in range(K - 1, -1, -1):
        a = choice[k][mask]
        pi[k] = a
        if a != NULL:
            mask &= ~(1 << a)
    return Assignment(pi=pi, total_cost=float(dp[best_mask]))
