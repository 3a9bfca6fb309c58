"""Training losses, their analytic gradients, and a toy direct-optimization loop.

Each loss returns (scalar, gradient) with the gradient taken with respect to
the loss's direct inputs (mask logits, raw embeddings, partness logits).
Embedding losses include the unit-normalization Jacobian, so gradients are
with respect to the raw, pre-normalization embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matching
from .matching import NULL, harden, sinkhorn, training_cost
from .numerics import sigmoid, unit_rows

Array = np.ndarray


@dataclass(frozen=True)
class LossWeights:
    mask: float = 1.0
    part: float = 0.5
    text: float = 1.0
    coverage: float = 0.5
    overlap: float = 0.1
    global_align: float = 1.0


def _matched(pi: Array) -> list[int]:
    return [k for k in range(len(pi)) if pi[k] != NULL]


def _normalize_with_jacobian(z: Array) -> tuple[Array, Array]:
    """Unit rows and their norms; used to backpropagate through normalization."""
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("zero embedding row cannot be normalized")
    return z / norms, norms


def _through_normalization(grad_hat: Array, z_hat: Array, norms: Array) -> Array:
    """Map a gradient wrt unit rows to a gradient wrt the raw rows."""
    radial = np.sum(grad_hat * z_hat, axis=1, keepdims=True)
    return (grad_hat - radial * z_hat) / norms


def text_infonce(z: Array, t_hat: Array, pi: Array, tau: float = 0.07) -> tuple[float, Array]:
    """InfoNCE aligning each matched partlet embedding with its matched text.

    z: (K, d) raw embeddings (normalized internally); t_hat: (A, d) unit rows.
    Returns mean over matched partlets of -log softmax at the matched index,
    and the gradient with respect to raw z. Empty matched set gives (0, 0).
    """
    z = np.asarray(z, dtype=np.float64)
    t_hat = np.asarray(t_hat, dtype=np.float64)
    m = _matched(pi)
    grad = np.zeros_like(z)
    if not m:
        return 0.0, grad
    z_hat, norms = _normalize_with_jacobian(z)
    sims = z_hat @ t_hat.T / tau  # (K, A)
    loss = 0.0
    grad_hat = np.zeros_like(z_hat)
    for k in m:
        row = sims[k]
        shifted = row - row.max()
        p = np.exp(shifted)
        p /= p.sum()
        loss += -np.log(p[pi[k]])
        grad_hat[k] = (p @ t_hat - t_hat[pi[k]]) / tau
    loss /= len(m)
    grad_hat /= len(m)
    grad = _through_normalization(grad_hat, z_hat, norms)
    return float(loss), grad


def _bce_terms(probs: Array, gt: Array) -> Array:
    eps = 1e-300  # guards log(0) at saturated probabilities
    return -(gt * np.log(probs + eps) + (1.0 - gt) * np.log(1.0 - probs + eps))


def mask_loss(mask_logits: Array, gt_masks: Array, pi: Array) -> tuple[float, Array]:
    """Mean over matched partlets of [point-mean BCE + (1 - soft Dice)]."""
    mask_logits = np.asarray(mask_logits, dtype=np.float64)
    gt_masks = np.asarray(gt_masks, dtype=np.float64)
    m = _matched(pi)
    grad = np.zeros_like(mask_logits)
    if not m:
        return 0.0, grad
    n = mask_logits.shape[1]
    smooth = matching.DICE_SMOOTH
    total = 0.0
    for k in m:
        g = gt_masks[pi[k]]
        p = sigmoid(mask_logits[k])
        total += _bce_terms(p, g).mean()
        num = 2.0 * float(p @ g) + smooth
        den = float(p.sum() + g.sum()) + smooth
        total += 1.0 - num / den
        # BCE through the sigmoid collapses to (p - g); Dice needs the chain rule
        grad[k] = (p - g) / n + (-2.0 * g / den + num / (den * den)) * p * (1.0 - p)
    total /= len(m)
    grad /= len(m)
    return float(total), grad


def partness_loss(partness_logits: Array, pi: Array) -> tuple[float, Array]:
    """Mean over all partlets of BCE(sigmoid(logit), matched indicator)."""
    logits = np.asarray(partness_logits, dtype=np.float64)
    y = np.array([1.0 if a != NULL else 0.0 for a in pi])
    p = sigmoid(logits)
    loss = _bce_terms(p, y).mean()
    grad = (p - y) / len(logits)
    return float(loss), grad


def coverage_loss(mask_logits: Array, gt_masks: Array, pi: Array) -> tuple[float, Array]:
    """Mean over matched partlets of |predicted mass - ground-truth mass| / N."""
    mask_logits = np.asarray(mask_logits, dtype=np.float64)
    gt_masks = np.asarray(gt_masks, dtype=np.float64)
    m = _matched(pi)
    grad = np.zeros_like(mask_logits)
    if not m:
        return 0.0, grad
    n = mask_logits.shape[1]
    total = 0.0
    for k in m:
        p = sigmoid(mask_logits[k])
        diff = float(p.sum() - gt_masks[pi[k]].sum())
        total += abs(diff) / n
        grad[k] = np.sign(diff) / n * p * (1.0 - p)  # sign(0) = 0
    total /= len(m)
    grad /= len(m)
    return float(total), grad


def overlap_loss(mask_logits: Array) -> tuple[float, Array]:
    """Mean over points of (sum_k sigmoid(m_ki) - 1)^2."""
    mask_logits = np.asarray(mask_logits, dtype=np.float64)
    p = sigmoid(mask_logits)
    n = mask_logits.shape[1]
    excess = p.sum(axis=0) - 1.0  # (N,)
    loss = float((excess**2).mean())
    grad = (2.0 / n) * excess[None, :] * p * (1.0 - p)
    return loss, grad


def global_infonce(z_global: Array, t_class_hat: Array, tau: float = 0.07) -> tuple[float, Array]:
    """Symmetric InfoNCE between batch shape embeddings and class text embeddings.

    Rows are paired by index. z_global: (B, d) raw (normalized internally);
    t_class_hat: (B, d) unit rows. Returns loss and gradient wrt raw z_global.
    """
    z = np.asarray(z_global, dtype=np.float64)
    t = np.asarray(t_class_hat, dtype=np.float64)
    b = z.shape[0]
    if b < 1:
        raise ValueError("batch must be nonempty")
    z_hat, norms = _normalize_with_jacobian(z)
    s = z_hat @ t.T / tau  # (B, B)
    p_row = _softmax(s, axis=1)
    p_col = _softmax(s, axis=0)
    eye = np.eye(b)
    loss = 0.5 * (
        np.mean([-np.log(p_row[i, i]) for i in range(b)])
        + np.mean([-np.log(p_col[i, i]) for i in range(b)])
    )
    ds = (p_row + p_col - 2.0 * eye) / (2.0 * b)
    grad_hat = ds @ t / tau
    grad = _through_normalization(grad_hat, z_hat, norms)
    return float(loss), grad


def _softmax(s: Array, axis: int) -> Array:
    shifted = s - s.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def total_loss(terms: dict[str, float], w: LossWeights = LossWeights()) -> float:
    """Weighted sum of the individual loss terms (missing terms count as 0)."""
    return (
        w.mask * terms.get("mask", 0.0)
        + w.part * terms.get("part", 0.0)
        + w.text * terms.get("text", 0.0)
        + w.coverage * terms.get("coverage", 0.0)
        + w.overlap * terms.get("overlap", 0.0)
        + w.global_align * terms.get("global", 0.0)
    )


@dataclass
class ToyResult:
    mask_logits: Array
    z: Array
    partness_logits: Array
    pi: Array
    loss_history: list[float] = field(default_factory=list)
    diverged: bool = False


def descend_toy(
    mask_logits: Array,
    z: Array,
    partness_logits: Array,
    gt_masks: Array,
    t_hat: Array,
    weights: LossWeights = LossWeights(),
    steps: int = 2000,
    lr: float = 0.1,
    rematch_every: int = 10,
    lr_scale: dict[str, float] | None = None,
    tau: float = 0.07,
) -> ToyResult:
    """Plain gradient descent on the total objective over free partlet parameters.

    The partlet-to-part assignment is refreshed every `rematch_every` steps via
    Sinkhorn + hardening. lr_scale applies a fixed diagonal preconditioner per
    parameter group; the mean reductions in the mask-side losses make their raw
    gradients ~N.|M| times smaller than the embedding gradients, so uniform
    scaling would need ~10^4 more steps.
    """
    mask_logits = np.array(mask_logits, dtype=np.float64)
    z = np.array(z, dtype=np.float64)
    partness_logits = np.array(partness_logits, dtype=np.float64)
    scale = {"mask_logits": 2000.0, "z": 1.0, "partness": 100.0}
    if lr_scale:
        scale.update(lr_scale)
    pi = None
    history: list[float] = []
    for step in range(steps):
        if step % rematch_every == 0 or pi is None:
            z_hat = unit_rows(z)
            cost = training_cost(sigmoid(mask_logits), gt_masks, z_hat, unit_rows(t_hat))
            pi = harden(sinkhorn(cost)).pi
        l_text, g_z = text_infonce(z, unit_rows(t_hat), pi, tau)
        l_mask, g_mask = mask_loss(mask_logits, gt_masks, pi)
        l_part, g_part = partness_loss(partness_logits, pi)
        l_cov, g_cov = coverage_loss(mask_logits, gt_masks, pi)
        l_ov, g_ov = overlap_loss(mask_logits)
        total = total_loss(
            {"mask": l_mask, "part": l_part, "text": l_text, "coverage": l_cov, "overlap": l_ov},
            weights,
        )
        history.append(total)
        if not np.isfinite(total):
            return ToyResult(mask_logits, z, partness_logits, pi, history, diverged=True)
        g_logits = weights.mask * g_mask + weights.coverage * g_cov + weights.overlap * g_ov
        mask_logits -= lr * scale["mask_logits"] * g_logits
        z -= lr * scale["z"] * weights.text * g_z
        partness_logits -= lr * scale["partness"] * weights.part * g_part
    return ToyResult(mask_logits, z, partness_logits, pi, history)
