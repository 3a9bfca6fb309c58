"""Shared fp64 linear-algebra and neural primitives.

Everything here is pure and value-semantic; all arrays are float64.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.special import erf

Array = np.ndarray


def softmax_rows(m: Array) -> Array:
    """Row-wise softmax with max-subtraction stabilization.

    Each output row is nonnegative and sums to 1.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] == 0:
        raise ValueError(f"softmax_rows needs a 2-D matrix with nonempty rows, got shape {m.shape}")
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def gelu(x):
    """Exact-erf GELU: x * Phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    out = x * 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    return float(out) if out.ndim == 0 else out


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return float(out) if out.ndim == 0 else out


def layer_norm(v: Array, gain: Array, bias: Array, eps: float = 1e-5) -> Array:
    """Normalize v to zero mean / unit variance, then apply affine gain and bias.

    Zero-variance input maps to zeros pre-affine (no 0/0). Works on the last
    axis so 2-D inputs are normalized per row.
    """
    v = np.asarray(v, dtype=np.float64)
    gain = np.asarray(gain, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if v.shape[-1] != gain.shape[-1] or v.shape[-1] != bias.shape[-1]:
        raise ValueError(f"layer_norm dim mismatch: v {v.shape}, gain {gain.shape}, bias {bias.shape}")
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    mu = v.mean(axis=-1, keepdims=True)
    var = v.var(axis=-1, keepdims=True)
    # eps acts as the zero-variance cutoff; dividing by sqrt(var + eps) would
    # bias the output variance by ~eps, breaking the unit-variance contract.
    safe = np.maximum(var, eps * eps)
    normed = np.where(var < eps * eps, 0.0, (v - mu) / np.sqrt(safe))
    return gain * normed + bias


def cosine_sim(a: Array, b: Array) -> float:
    """Cosine similarity of two nonzero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine_sim is undefined for zero vectors")
    return float(a @ b / (na * nb))


def unit_rows(m: Array) -> Array:
    """Normalize each row of m to unit L2 norm."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot unit-normalize a zero row")
    return m / norms


def fd_gradient(f: Callable[[Array], float], x: Array, h: float = 1e-6) -> Array:
    """Central-difference gradient estimate of a scalar function, per coordinate."""
    x = np.asarray(x, dtype=np.float64)
    if h <= 0:
        raise ValueError("step h must be positive")
    flat = x.ravel()
    grad = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"non-finite function value near coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad.reshape(x.shape)


def sorted_sum(a: Array, axis: int) -> Array:
    """Sum along an axis in ascending value order.

    The reduction order is then independent of how entries were laid out,
    which makes attention reductions bitwise permutation-invariant. The sorted
    array is forced C-contiguous because np.sum picks its pairwise-summation
    tree from the memory layout.
    """
    return np.sum(np.ascontiguousarray(np.sort(a, axis=axis)), axis=axis)
