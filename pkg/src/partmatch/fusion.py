"""Bi-directional cross-attention feature fusion over local kNN graphs.

Geometry-first features attend to appearance features of spatial neighbors and
vice versa, with a Fourier-encoded relative positional bias added to the
pre-softmax logits per head. Sigmoid gates control cross-modal mixing, and a
final two-layer GELU MLP over the concatenated modalities yields fused
per-point features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import KnnGraph, fourier_encode, knn_graph
from .numerics import gelu, layer_norm, sigmoid

Array = np.ndarray


@dataclass(frozen=True)
class FusionDims:
    d_geo: int = 448
    d_app: int = 768
    d_fused: int = 256
    d_model: int = 768
    heads: int = 8
    num_freqs: int = 6
    k: int = 16
    bias_hidden: int = 64

    @property
    def d_head(self) -> int:
        if self.d_model % self.heads != 0:
            raise ValueError("d_model must be divisible by heads")
        return self.d_model // self.heads

    @property
    def d_enc(self) -> int:
        return 3 + 6 * self.num_freqs


@dataclass
class BiCoWeights:
    """All learnable parameters of the fusion block. Matrices are (out, in)."""

    dims: FusionDims
    # geo -> app direction: geo queries attend to appearance keys/values
    wq_g: Array
    wk_a: Array
    wv_a: Array
    w_out_ga: Array  # d_model -> d_geo
    # app -> geo direction
    wq_a: Array
    wk_g: Array
    wv_g: Array
    w_out_ag: Array  # d_model -> d_app
    # sigmoid gates over [original; attended]
    gate_g: Array
    gate_a: Array
    # positional bias MLP (shared by both directions): d_enc -> hidden -> heads
    bias_w1: Array
    bias_b1: Array
    bias_w2: Array
    bias_b2: Array
    # layer-norm affines
    ln_g_gain: Array = field(default=None)
    ln_g_bias: Array = field(default=None)
    ln_a_gain: Array = field(default=None)
    ln_a_bias: Array = field(default=None)
    ln_cat_gain: Array = field(default=None)
    ln_cat_bias: Array = field(default=None)
    # final projection MLP
    w1: Array = field(default=None)
    b1: Array = field(default=None)
    w2: Array = field(default=None)
    b2: Array = field(default=None)

    @classmethod
    def random(cls, dims: FusionDims, seed: int = 0) -> "BiCoWeights":
        """Seeded Gaussian init, scale 1/sqrt(fan_in); layer norms at identity."""
        rng = np.random.default_rng(seed)

        def mat(out_dim, in_dim):
            return rng.standard_normal((out_dim, in_dim)) / np.sqrt(in_dim)

        dg, da, df, dm = dims.d_geo, dims.d_app, dims.d_fused, dims.d_model
        return cls(
            dims=dims,
            wq_g=mat(dm, dg), wk_a=mat(dm, da), wv_a=mat(dm, da), w_out_ga=mat(dg, dm),
            wq_a=mat(dm, da), wk_g=mat(dm, dg), wv_g=mat(dm, dg), w_out_ag=mat(da, dm),
            gate_g=mat(dg, 2 * dg), gate_a=mat(da, 2 * da),
            bias_w1=mat(dims.bias_hidden, dims.d_enc), bias_b1=np.zeros(dims.bias_hidden),
            bias_w2=mat(dims.heads, dims.bias_hidden), bias_b2=np.zeros(dims.heads),
            ln_g_gain=np.ones(dg), ln_g_bias=np.zeros(dg),
            ln_a_gain=np.ones(da), ln_a_bias=np.zeros(da),
            ln_cat_gain=np.ones(dg + da), ln_cat_bias=np.zeros(dg + da),
            w1=mat(df, dg + da), b1=np.zeros(df),
            w2=mat(df, df), b2=np.zeros(df),
        )


def relative_bias(graph: KnnGraph, coords: Array, w: BiCoWeights) -> Array:
    """Per-edge bias vectors, shape (N, k_eff, H).

    Displacement x_j - x_i is Fourier-encoded and passed through the two-layer
    ReLU MLP; the result is added to attention logits head-wise.
    """
    coords = np.asarray(coords, dtype=np.float64)
    nbr = graph.neighbor_index
    disp = coords[nbr] - coords[:, None, :]  # (N, k, 3)
    enc = fourier_encode(disp, w.dims.num_freqs)  # (N, k, d_enc)
    hidden = np.maximum(enc @ w.bias_w1.T + w.bias_b1, 0.0)
    return hidden @ w.bias_w2.T + w.bias_b2  # (N, k, H)


def directed_cross_attention(
    queries_src: Array,
    keys_src: Array,
    graph: KnnGraph,
    bias: Array,
    wq: Array,
    wk: Array,
    wv: Array,
    w_out: Array,
    dims: FusionDims,
) -> Array:
    """Multi-head attention of each point over its neighbors' other-modality features.

    queries_src: (N, d_q) query-side features; keys_src: (N, d_kv) key/value-side
    features. Returns (N, d_out) where d_out = w_out.shape[0]. Attention weights
    per point and head sum to 1 over the neighbor set.
    """
    n = queries_src.shape[0]
    h, dh = dims.heads, dims.d_head
    nbr = graph.neighbor_index  # (N, k)
    q = (queries_src @ wq.T).reshape(n, h, dh)
    k_all = (keys_src @ wk.T).reshape(n, h, dh)
    v_all = (keys_src @ wv.T).reshape(n, h, dh)
    out_heads = np.empty((n, h, dh))
    scale = 1.0 / np.sqrt(dh)
    for head in range(h):
        kn = k_all[nbr, head, :]  # (N, k, dh)
        vn = v_all[nbr, head, :]
        logits = np.einsum("nd,nkd->nk", q[:, head, :], kn) * scale + bias[:, :, head]
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        alpha = e / e.sum(axis=1, keepdims=True)
        out_heads[:, head, :] = np.einsum("nk,nkd->nd", alpha, vn)
    return out_heads.reshape(n, h * dh) @ w_out.T


def gated_fuse(original: Array, attended: Array, gate_w: Array, ln_gain: Array, ln_bias: Array) -> Array:
    """LayerNorm(original + sigmoid(W_g [original; attended]) * attended)."""
    gate = sigmoid(np.concatenate([original, attended], axis=1) @ gate_w.T)
    return layer_norm(original + gate * attended, ln_gain, ln_bias)


def bico_forward(coords: Array, geo: Array, app: Array, w: BiCoWeights, graph: KnnGraph | None = None) -> Array:
    """Full fusion forward pass: (N,3) coords + per-point features -> (N, d_fused)."""
    coords = np.asarray(coords, dtype=np.float64)
    geo = np.asarray(geo, dtype=np.float64)
    app = np.asarray(app, dtype=np.float64)
    if not (coords.shape[0] == geo.shape[0] == app.shape[0]):
        raise ValueError("coords, geo, app must agree on point count")
    if graph is None:
        graph = knn_graph(coords, w.dims.k)
    bias = relative_bias(graph, coords, w)
    r_g = directed_cross_attention(geo, app, graph, bias, w.wq_g, w.wk_a, w.wv_a, w.w_out_ga, w.dims)
    r_a = directed_cross_attention(app, geo, graph, bias, w.wq_a, w.wk_g, w.wv_g, w.w_out_ag, w.dims)
    f_g = gated_fuse(geo, r_g, w.gate_g, w.ln_g_gain, w.ln_g_bias)
    f_a = gated_fuse(app, r_a, w.gate_a, w.ln_a_gain, w.ln_a_bias)
    cat = layer_norm(np.concatenate([f_g, f_a], axis=1), w.ln_cat_gain, w.ln_cat_bias)
    return gelu(cat @ w.w1.T + w.b1) @ w.w2.T + w.b2
