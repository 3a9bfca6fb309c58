"""Inference: category prediction, partlet naming, confidence calibration.

Three naming modes: closed-vocabulary with exact assignment and calibrated
confidences, open-vocabulary per-partlet argmax, and single-part retrieval
from a text query. Plus point label assignment, class statistics estimation
for Mahalanobis confidence, and the two diagnostic modes (saliency ranking
and feature k-means).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matching import NULL, inference_cost, jv_assign
from .numerics import sigmoid, unit_rows
from .partlets import PartletSet

Array = np.ndarray

UNLABELED = None

AUTO_ACCEPT_MAHA = 0.8
LOW_CONF_THRESHOLD = 0.5


@dataclass
class ClassStats:
    """Per-label embedding means plus one pooled, regularized inverse covariance."""

    means: dict[str, Array]
    cov_inv: Array
    cov: Array


@dataclass
class PartletPrediction:
    partlet_index: int
    label: str | None
    conf_soft: float | None = None
    conf_maha: float | None = None
    conf_fused: float | None = None
    routing: str | None = None  # AUTO_ACCEPT | LOW_CONFIDENCE | REVIEW


@dataclass
class InferenceResult:
    category: str | None
    predictions: list[PartletPrediction] = field(default_factory=list)
    point_labels: list[str | None] = field(default_factory=list)
    active: list[int] = field(default_factory=list)


def global_embedding(fused: Array, proj: Array) -> Array:
    """Mean-pool fused point features, project to text space, unit-normalize."""
    pooled = np.asarray(fused, dtype=np.float64).mean(axis=0)
    vec = proj @ pooled
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ValueError("global embedding collapsed to zero")
    return vec / norm


def predict_category(z_global: Array, class_texts: dict[str, Array]) -> str:
    """Argmax cosine similarity over class embeddings; ties take the smallest label."""
    if not class_texts:
        raise ValueError("no candidate classes")
    z = np.asarray(z_global, dtype=np.float64)
    z = z / np.linalg.norm(z)
    best_label = None
    best_sim = -np.inf
    for label in sorted(class_texts):
        t = np.asarray(class_texts[label], dtype=np.float64)
        sim = float(z @ (t / np.linalg.norm(t)))
        if sim > best_sim:
            best_sim = sim
            best_label = label
    return best_label


def filter_active(partness_logits: Array) -> list[int]:
    """Indices with sigmoid(partness) strictly above 0.5, i.e. logit > 0."""
    return [k for k, v in enumerate(np.asarray(partness_logits)) if v > 0.0]


def estimate_class_stats(samples: list[tuple[str, Array]], epsilon: float = 1e-4) -> ClassStats:
    """Per-label means and a pooled covariance of per-label-centered embeddings.

    The covariance is regularized by epsilon * I and inverted; positive
    definiteness is verified via Cholesky.
    """
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to estimate statistics")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    by_label: dict[str, list[Array]] = {}
    for label, z in samples:
        by_label.setdefault(label, []).append(np.asarray(z, dtype=np.float64))
    means = {label: np.mean(vs, axis=0) for label, vs in by_label.items()}
    centered = np.stack([z - means[label] for label, vs in by_label.items() for z in vs])
    d = centered.shape[1]
    cov = centered.T @ centered / centered.shape[0] + epsilon * np.eye(d)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - regularization should prevent this
        raise ValueError("covariance not positive definite after regularization") from exc
    cov_inv = np.linalg.inv(cov)
    cov_inv = (cov_inv + cov_inv.T) / 2.0  # enforce exact symmetry
    return ClassStats(means=means, cov_inv=cov_inv, cov=cov)


def maha_conf(z: Array, label: str, stats: ClassStats) -> float:
    """exp(-(z - mu)^T Sigma^-1 (z - mu)) in (0, 1]."""
    if label not in stats.means:
        raise KeyError(f"no statistics for label {label!r}")
    diff = np.asarray(z, dtype=np.float64) - stats.means[label]
    d2 = float(diff @ stats.cov_inv @ diff)
    return float(np.exp(-d2))


def soft_conf(z_hat: Array, t_hats: Array, tau: float = 0.07) -> float:
    """Max temperature-scaled softmax probability over candidate texts."""
    sims = np.asarray(t_hats, dtype=np.float64) @ np.asarray(z_hat, dtype=np.float64) / tau
    shifted = sims - sims.max()
    p = np.exp(shifted)
    return float(p.max() / p.sum())


def fused_conf(soft: float, maha: float, alpha: float = 0.5, beta: float = 1.0) -> float:
    """alpha * soft + (1 - alpha) * sigmoid(beta * (maha - 0.5))."""
    return float(alpha * soft + (1.0 - alpha) * sigmoid(beta * (maha - 0.5)))


def _route(conf_maha: float | None, conf: float) -> str:
    if conf_maha is not None and conf_maha >= AUTO_ACCEPT_MAHA:
        return "AUTO_ACCEPT"
    if conf < LOW_CONF_THRESHOLD:
        return "LOW_CONFIDENCE"
    return "REVIEW"


def mode1_closed(
    partlets: PartletSet,
    z_global: Array,
    class_texts: dict[str, Array],
    part_vocab: dict[str, dict[str, Array]],
    stats: ClassStats,
    tau: float = 0.07,
    alpha: float = 0.5,
    beta: float = 1.0,
) -> InferenceResult:
    """Closed-vocabulary naming: exact assignment against the predicted class's parts."""
    category = predict_category(z_global, class_texts)
    vocab = part_vocab.get(category)
    if not vocab:
        raise ValueError(f"class {category!r} has an empty part vocabulary")
    active = filter_active(partlets.partness_logits)
    result = InferenceResult(category=category, active=active)
    if not active:
        result.point_labels = [UNLABELED] * partlets.mask_logits.shape[1]
        return result
    labels = sorted(vocab)
    t_hat = unit_rows(np.stack([vocab[name] for name in labels]))
    z_hat = unit_rows(partlets.embeddings[active])
    assignment = jv_assign(inference_cost(z_hat, t_hat))
    names: dict[int, str] = {}
    for row, k in enumerate(active):
        a = assignment.pi[row]
        if a == NULL:
            result.predictions.append(PartletPrediction(partlet_index=k, label=None))
            continue
        label = labels[a]
        names[k] = label
        c_soft = soft_conf(z_hat[row], t_hat, tau)
        c_maha = maha_conf(partlets.embeddings[k], label, stats)
        c_fused = fused_conf(c_soft, c_maha, alpha, beta)
        result.predictions.append(
            PartletPrediction(
                partlet_index=k, label=label, conf_soft=c_soft, conf_maha=c_maha,
                conf_fused=c_fused, routing=_route(c_maha, c_fused),
            )
        )
    result.point_labels = assign_point_labels(partlets.mask_logits, list(names), names)
    return result


def mode2_open(partlets: PartletSet, descriptions: dict[str, Array], tau: float = 0.07) -> InferenceResult:
    """Open-vocabulary naming: independent per-partlet argmax (not injective)."""
    if not descriptions:
        raise ValueError("need at least one description")
    labels = sorted(descriptions)
    t_hat = unit_rows(np.stack([descriptions[name] for name in labels]))
    active = filter_active(partlets.partness_logits)
    result = InferenceResult(category=None, active=active)
    names: dict[int, str] = {}
    for k in active:
        z_hat = partlets.embeddings[k] / np.linalg.norm(partlets.embeddings[k])
        sims = t_hat @ z_hat
        a = int(np.argmax(sims))
        label = labels[a]
        names[k] = label
        c_soft = soft_conf(z_hat, t_hat, tau)
        result.predictions.append(
            PartletPrediction(partlet_index=k, label=label, conf_soft=c_soft,
                              conf_fused=c_soft, routing=_route(None, c_soft))
        )
    result.point_labels = assign_point_labels(partlets.mask_logits, list(names), names)
    return result


def mode3_retrieve(partlets: PartletSet, query: Array) -> tuple[int, Array]:
    """Return the active partlet most similar to the query, with its mask logits."""
    active = filter_active(partlets.partness_logits)
    if not active:
        raise ValueError("no active partlets to retrieve from")
    q = np.asarray(query, dtype=np.float64)
    q = q / np.linalg.norm(q)
    z_hat = unit_rows(partlets.embeddings[active])
    best = active[int(np.argmax(z_hat @ q))]
    return best, partlets.mask_logits[best]


def assign_point_labels(mask_logits: Array, active: list[int], names: dict[int, str]) -> list[str | None]:
    """Per point, the label of the highest-probability active partlet.

    Points whose best probability is below 0.5 stay unlabeled, as do points
    whose best partlet carries no name.
    """
    n = mask_logits.shape[1]
    labeled = [k for k in active if k in names]
    if not labeled:
        return [UNLABELED] * n
    probs = sigmoid(np.asarray(mask_logits, dtype=np.float64)[labeled])  # (|labeled|, N)
    best = probs.argmax(axis=0)
    best_p = probs[best, np.arange(n)]
    return [names[labeled[best[i]]] if best_p[i] >= 0.5 else UNLABELED for i in range(n)]


def rank_by_saliency(partlets: PartletSet, top_m: int) -> list[int]:
    """Top-M partlets by partness confidence + mean mask probability, descending.

    Ties break by ascending partlet index.
    """
    kk = partlets.mask_logits.shape[0]
    if top_m > kk:
        raise ValueError(f"requested {top_m} partlets but only {kk} exist")
    saliency = sigmoid(partlets.partness_logits) + sigmoid(partlets.mask_logits).mean(axis=1)
    order = sorted(range(kk), key=lambda k: (-saliency[k], k))
    return order[:top_m]


def kmeans_cluster(fused: Array, num_clusters: int, seed: int = 0, max_iters: int = 100) -> Array:
    """Deterministic Lloyd's k-means on per-point features.

    Initialization is farthest-point style: a seeded random first center, then
    repeatedly the point farthest from its nearest chosen center (ties by
    index). Iterates to an assignment fixpoint or max_iters.
    """
    x = np.asarray(fused, dtype=np.float64)
    n = x.shape[0]
    if num_clusters > n:
        raise ValueError("more clusters than points")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(num_clusters - 1):
        far = int(np.argmax(d2))  # argmax takes the lowest index on ties
        chosen.append(far)
        d2 = np.minimum(d2, np.sum((x - x[far]) ** 2, axis=1))
    centers = x[chosen].copy()
    assign = np.full(n, -1, dtype=np.intp)
    for _ in range(max_iters):
        dist = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = dist.argmin(axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(num_clusters):
            members = x[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return assign
