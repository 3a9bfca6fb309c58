"""Point-cloud normalization, kNN graphs, and Fourier displacement encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class KnnGraph:
    """Neighbor indices per point, rows sorted by ascending distance (ties by index)."""

    neighbor_index: Array  # (N, k_eff) int
    k_eff: int


def normalize_unit_cube(coords: Array) -> Array:
    """Center at the bounding-box center and scale isotropically into [-1, 1]^3.

    Scaling divides by half the maximum axis extent, so aspect ratios are
    preserved and the largest axis exactly spans [-1, 1]. A zero-extent cloud
    maps to the origin.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 3 or coords.shape[0] < 1:
        raise ValueError(f"expected an N x 3 point array, got shape {coords.shape}")
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    center = (lo + hi) / 2.0
    half_extent = (hi - lo).max() / 2.0
    if half_extent == 0.0:
        return np.zeros_like(coords)
    return (coords - center) / half_extent


def knn_graph(coords: Array, k: int = 16) -> KnnGraph:
    """Exact k-nearest-neighbor graph under Euclidean distance, self excluded.

    k_eff = min(k, N-1). Neighbor rows are sorted by ascending distance with
    ties broken by ascending point index. Brute-force all-pairs; N is desk
    scale (<= ~10k) so O(N^2) memory/time is acceptable.
    """
    coords = np.asarray(coords, dtype=np.float64)
    n = coords.shape[0]
    if n < 2:
        raise ValueError("knn_graph needs at least 2 points")
    k_eff = min(k, n - 1)
    nbr = np.empty((n, k_eff), dtype=np.intp)
    # chunk rows so the (chunk, n) distance temps stay small
    chunk = max(1, int(8_000_000 // n))
    all_idx = np.arange(n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        # accumulate (x-x')^2 + (y-y')^2 + (z-z')^2 axis by axis; the sum
        # order matches a pairwise reduction over the last axis bit for bit
        d2 = (coords[start:stop, 0, None] - coords[None, :, 0]) ** 2
        d2 += (coords[start:stop, 1, None] - coords[None, :, 1]) ** 2
        d2 += (coords[start:stop, 2, None] - coords[None, :, 2]) ** 2
        d2[all_idx[start:stop] - start, all_idx[start:stop]] = np.inf
        cand = np.argpartition(d2, k_eff - 1, axis=1)[:, :k_eff]
        rows = np.arange(stop - start)[:, None]
        vals = d2[rows, cand]
        # order candidates by distance, ties by ascending index (lexsort is
        # stable on its last key, so index first then distance gives the rule)
        order = np.lexsort((cand, vals), axis=1)
        sel = np.take_along_axis(cand, order, axis=1)
        sel_vals = np.take_along_axis(vals, order, axis=1)
        # argpartition picks arbitrarily among values tied at the k-th place;
        # rows with excluded elements at that distance get a full stable sort
        kth = sel_vals[:, -1]
        ambiguous = (d2 == kth[:, None]).sum(axis=1) > (sel_vals == kth[:, None]).sum(axis=1)
        for i in np.flatnonzero(ambiguous):
            full = np.lexsort((all_idx, d2[i]))
            sel[i] = full[:k_eff]
        nbr[start:stop] = sel
    return KnnGraph(neighbor_index=nbr, k_eff=k_eff)


def fourier_encode(d: Array, num_freqs: int = 6) -> Array:
    """Encode a displacement (..., 3) as [d, sin(d*w), cos(d*w)] with w = 2^0..2^(F-1).

    Sin/cos blocks are axis-major, frequency-minor; output dim is 3 + 6F
    (39 for F=6). Works on a single displacement or a batch of them.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape[-1] != 3:
        raise ValueError(f"displacements must have last dim 3, got {d.shape}")
    freqs = 2.0 ** np.arange(num_freqs, dtype=np.float64)  # (F,)
    scaled = d[..., :, None] * freqs  # (..., 3, F)
    flat = scaled.reshape(*d.shape[:-1], 3 * num_freqs)
    return np.concatenate([d, np.sin(flat), np.cos(flat)], axis=-1)
