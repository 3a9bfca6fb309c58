"""Partlet decoder: learned part proposals refined against fused point features.

Each of L blocks applies, in order, a self-attention residual (part
co-occurrence), a cross-attention residual gathering evidence from fused point
features, and a two-layer GELU MLP residual. Mask logits come from a scaled
dot-product head; partness from a linear head. All branches are bare residuals,
so zero weights make refinement the exact identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import gelu, sorted_sum

Array = np.ndarray


@dataclass(frozen=True)
class DecoderDims:
    num_partlets: int = 32
    d_text: int = 768
    d_fused: int = 256
    heads: int = 8
    blocks: int = 3
    mlp_hidden: int = 3072  # 4 * d_text at reference dims

    @property
    def d_head(self) -> int:
        if self.d_text % self.heads != 0:
            raise ValueError("d_text must be divisible by heads")
        return self.d_text // self.heads


@dataclass
class BlockWeights:
    # self-attention over partlets
    wq_s: Array
    wk_s: Array
    wv_s: Array
    wo_s: Array
    # cross-attention: partlet queries over fused point features
    # (wk_c / wv_c map d_fused -> d_text, resolving the dimension gap)
    wq_c: Array
    wk_c: Array
    wv_c: Array
    wo_c: Array
    # feed-forward
    m_w1: Array
    m_b1: Array
    m_w2: Array
    m_b2: Array


@dataclass
class DecoderWeights:
    dims: DecoderDims
    blocks: list[BlockWeights]
    mask_wq: Array  # (d_text, d_text)
    mask_wk: Array  # (d_text, d_fused)
    w_part: Array  # (d_text,)
    b_part: float

    @classmethod
    def random(cls, dims: DecoderDims, seed: int = 0) -> "DecoderWeights":
        rng = np.random.default_rng(seed)

        def mat(out_dim, in_dim):
            return rng.standard_normal((out_dim, in_dim)) / np.sqrt(in_dim)

        dt, df, hid = dims.d_text, dims.d_fused, dims.mlp_hidden
        blocks = [
            BlockWeights(
                wq_s=mat(dt, dt), wk_s=mat(dt, dt), wv_s=mat(dt, dt), wo_s=mat(dt, dt),
                wq_c=mat(dt, dt), wk_c=mat(dt, df), wv_c=mat(dt, df), wo_c=mat(dt, dt),
                m_w1=mat(hid, dt), m_b1=np.zeros(hid), m_w2=mat(dt, hid), m_b2=np.zeros(dt),
            )
            for _ in range(dims.blocks)
        ]
        return cls(
            dims=dims,
            blocks=blocks,
            mask_wq=mat(dt, dt),
            mask_wk=mat(dt, df),
            w_part=rng.standard_normal(dt) / np.sqrt(dt),
            b_part=0.0,
        )

    @classmethod
    def zeros(cls, dims: DecoderDims) -> "DecoderWeights":
        dt, df, hid = dims.d_text, dims.d_fused, dims.mlp_hidden
        blocks = [
            BlockWeights(
                wq_s=np.zeros((dt, dt)), wk_s=np.zeros((dt, dt)), wv_s=np.zeros((dt, dt)),
                wo_s=np.zeros((dt, dt)),
                wq_c=np.zeros((dt, dt)), wk_c=np.zeros((dt, df)), wv_c=np.zeros((dt, df)),
                wo_c=np.zeros((dt, dt)),
                m_w1=np.zeros((hid, dt)), m_b1=np.zeros(hid), m_w2=np.zeros((dt, hid)), m_b2=np.zeros(dt),
            )
            for _ in range(dims.blocks)
        ]
        return cls(dims=dims, blocks=blocks, mask_wq=np.zeros((dt, dt)), mask_wk=np.zeros((dt, df)),
                   w_part=np.zeros(dt), b_part=0.0)


def init_partlets(seed: int, num_partlets: int = 32, d_text: int = 768) -> Array:
    """Deterministic standard-normal initial partlet embeddings, (K, d_text)."""
    if num_partlets < 1:
        raise ValueError("need at least one partlet")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((num_partlets, d_text))


def _self_attention(s: Array, b: BlockWeights, dims: DecoderDims) -> Array:
    """Multi-head attention of partlets over partlets.

    Reductions over the partlet axis use canonical (sorted) summation order so
    the result is bitwise equivariant under partlet permutation.
    """
    kk, dt = s.shape
    h, dh = dims.heads, dims.d_head
    q = (s @ b.wq_s.T).reshape(kk, h, dh)
    k = (s @ b.wk_s.T).reshape(kk, h, dh)
    v = (s @ b.wv_s.T).reshape(kk, h, dh)
    out = np.empty((kk, h, dh))
    scale = 1.0 / np.sqrt(dh)
    for head in range(h):
        logits = q[:, head, :] @ k[:, head, :].T * scale  # (K, K)
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        alpha = e / sorted_sum(e, axis=1)[:, None]
        # (K, K, dh) products summed over the key axis in value order
        out[:, head, :] = sorted_sum(alpha[:, :, None] * v[None, :, head, :], axis=1)
    return out.reshape(kk, h * dh) @ b.wo_s.T


def _cross_attention(s: Array, fused: Array, b: BlockWeights, dims: DecoderDims) -> Array:
    kk = s.shape[0]
    n = fused.shape[0]
    h, dh = dims.heads, dims.d_head
    q = (s @ b.wq_c.T).reshape(kk, h, dh)
    k = (fused @ b.wk_c.T).reshape(n, h, dh)
    v = (fused @ b.wv_c.T).reshape(n, h, dh)
    out = np.empty((kk, h, dh))
    scale = 1.0 / np.sqrt(dh)
    for head in range(h):
        logits = q[:, head, :] @ k[:, head, :].T * scale  # (K, N)
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        alpha = e / e.sum(axis=1, keepdims=True)
        out[:, head, :] = alpha @ v[:, head, :]
    return out.reshape(kk, h * dh) @ b.wo_c.T


def refine(init: Array, fused: Array, w: DecoderWeights) -> Array:
    """Apply L blocks of (self-attn, cross-attn, MLP) residuals to the embeddings."""
    s = np.asarray(init, dtype=np.float64)
    fused = np.asarray(fused, dtype=np.float64)
    for b in w.blocks:
        s = s + _self_attention(s, b, w.dims)
        s = s + _cross_attention(s, fused, b, w.dims)
        s = s + gelu(s @ b.m_w1.T + b.m_b1) @ b.m_w2.T + b.m_b2
    return s


def predict_masks(s: Array, fused: Array, w: DecoderWeights) -> Array:
    """Mask logits m[k, i] = (Wq s_k) . (Wk h_i) / sqrt(d_text), shape (K, N)."""
    qs = s @ w.mask_wq.T  # (K, d_text)
    kh = fused @ w.mask_wk.T  # (N, d_text)
    return qs @ kh.T / np.sqrt(w.dims.d_text)


def predict_partness(s: Array, w: DecoderWeights) -> Array:
    """Partness logits part_k = w_part . s_k + b_part, shape (K,).

    Row-wise dot products: BLAS matrix-vector kernels round differently
    depending on row position, which would break bitwise permutation
    equivariance.
    """
    return np.array([float(row @ w.w_part) for row in np.asarray(s, dtype=np.float64)]) + w.b_part


@dataclass
class PartletSet:
    """K part proposals: embeddings, mask logits over points, partness logits."""

    embeddings: Array  # (K, d_text)
    mask_logits: Array  # (K, N)
    partness_logits: Array  # (K,)


def decode(init: Array, fused: Array, w: DecoderWeights) -> PartletSet:
    """Refine initial embeddings and run both prediction heads."""
    s = refine(init, fused, w)
    return PartletSet(
        embeddings=s,
        mask_logits=predict_masks(s, fused, w),
        partness_logits=predict_partness(s, w),
    )
