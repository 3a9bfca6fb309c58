import numpy as np
import pytest

from partmatch.inference import (
    ClassStats,
    estimate_class_stats,
    filter_active,
    fused_conf,
    global_embedding,
    kmeans_cluster,
    maha_conf,
    mode1_closed,
    mode2_open,
    mode3_retrieve,
    predict_category,
    rank_by_saliency,
    soft_conf,
)
from partmatch.numerics import sigmoid, unit_rows
from partmatch.partlets import PartletSet


def _partlet_set(embeddings, mask_logits, partness):
    return PartletSet(
        embeddings=np.asarray(embeddings, dtype=np.float64),
        mask_logits=np.asarray(mask_logits, dtype=np.float64),
        partness_logits=np.asarray(partness, dtype=np.float64),
    )


def test_global_embedding_unit_norm():
    rng = np.random.default_rng(0)
    fused = rng.standard_normal((20, 6))
    proj = rng.standard_normal((8, 6))
    z = global_embedding(fused, proj)
    assert z.shape == (8,)
    assert np.linalg.norm(z) == pytest.approx(1.0)


def test_predict_category_argmax_and_tie_rule():
    z = np.array([1.0, 0.0])
    texts = {"b": np.array([1.0, 0.0]), "a": np.array([1.0, 0.0]), "c": np.array([0.0, 1.0])}
    # equal similarity for a and b: smallest label wins (strict > comparison)
    assert predict_category(z, texts) == "a"


def test_filter_active_strict_zero_boundary():
    assert filter_active(np.array([0.0, 1e-12, -1e-12, 3.0])) == [1, 3]


@pytest.fixture(scope="module")
def stats():
    rng = np.random.default_rng(1)
    samples = []
    centers = {"seat": np.array([3.0, 0.0, 0.0]), "leg": np.array([0.0, 3.0, 0.0])}
    for label, mu in centers.items():
        for _ in range(40):
            samples.append((label, mu + 0.1 * rng.standard_normal(3)))
    return estimate_class_stats(samples), centers


def test_maha_conf_at_mean_is_one(stats):
    st, _ = stats
    for label, mu in st.means.items():
        assert maha_conf(mu, label, st) == pytest.approx(1.0)


def test_maha_conf_decreases_away_from_mean(stats):
    st, _ = stats
    mu = st.means["seat"]
    near = maha_conf(mu + 0.01, "seat", st)
    far = maha_conf(mu + 1.0, "seat", st)
    assert 0.0 < far < near <= 1.0


def test_estimate_class_stats_cov_properties(stats):
    st, _ = stats
    assert np.allclose(st.cov_inv, st.cov_inv.T)
    np.linalg.cholesky(st.cov)  # positive definite
    assert np.allclose(st.cov @ st.cov_inv, np.eye(3), atol=1e-8)


def test_estimate_class_stats_rejects_tiny_input():
    with pytest.raises(ValueError):
        estimate_class_stats([("a", np.zeros(2))])


def test_soft_conf_definition():
    t = unit_rows(np.array([[1.0, 0.0], [0.0, 1.0]]))
    z = np.array([1.0, 0.0])
    sims = t @ z / 0.07
    p = np.exp(sims - sims.max())
    assert soft_conf(z, t) == pytest.approx(float(p.max() / p.sum()))


def test_fused_conf_reference_point_and_monotonicity():
    # sigmoid(1.0 * (1.0 - 0.5)) at beta=1: fused(1, 1) and the fixed point
    assert fused_conf(1.0, 0.5) == pytest.approx(0.75)
    grid = np.linspace(0, 1, 20)
    vals = np.array([[fused_conf(s, m) for m in grid] for s in grid])
    assert np.all(np.diff(vals, axis=0) > 0)
    assert np.all(np.diff(vals, axis=1) > 0)


def _toy_closed_setup():
    d = 4
    labels = ["back", "leg", "seat"]
    vecs = np.eye(3, d)
    part_vocab = {"chair": {l: vecs[i] for i, l in enumerate(labels)}}
    class_texts = {"chair": np.array([1.0, 1.0, 1.0, 1.0]), "table": np.array([-1.0, 0, 0, 0])}
    emb = np.vstack([10 * vecs, np.ones((1, d))])  # partlet 3 inactive
    n = 9
    mask = np.full((4, n), -10.0)
    for k in range(3):
        mask[k, 3 * k:3 * (k + 1)] = 10.0
    partness = np.array([5.0, 5.0, 5.0, -5.0])
    ps = _partlet_set(emb, mask, partness)
    rng = np.random.default_rng(2)
    samples = [(l, vecs[i] * 10 + 0.05 * rng.standard_normal(d)) for i, l in enumerate(labels) for _ in range(30)]
    stats = estimate_class_stats(samples)
    z_global = np.ones(d) / 2.0
    return ps, z_global, class_texts, part_vocab, stats, labels


def test_mode1_closed_names_and_routes():
    ps, z_global, class_texts, part_vocab, stats, labels = _toy_closed_setup()
    res = mode1_closed(ps, z_global, class_texts, part_vocab, stats)
    assert res.category == "chair"
    assert res.active == [0, 1, 2]
    by_k = {p.partlet_index: p for p in res.predictions}
    assert by_k[0].label == "back" and by_k[1].label == "leg" and by_k[2].label == "seat"
    for p in res.predictions:
        assert 0.0 <= p.conf_soft <= 1.0
        assert 0.0 <= p.conf_maha <= 1.0
        assert 0.0 <= p.conf_fused <= 1.0
        assert p.routing in ("AUTO_ACCEPT", "LOW_CONFIDENCE", "REVIEW")
    # labels are injective in closed mode
    names = [p.label for p in res.predictions if p.label]
    assert len(names) == len(set(names))
    # point labels follow the masks
    assert res.point_labels[:3] == ["back"] * 3
    assert res.point_labels[3:6] == ["leg"] * 3


def test_mode2_open_not_injective():
    d = 4
    emb = np.vstack([np.eye(1, d)[0], np.eye(1, d)[0], np.eye(1, d)[0]]) * 5
    ps = _partlet_set(emb, np.full((3, 4), 10.0), np.array([1.0, 1.0, 1.0]))
    res = mode2_open(ps, {"handle": np.eye(1, d)[0], "lid": -np.eye(1, d)[0]})
    labels = [p.label for p in res.predictions]
    assert labels == ["handle", "handle", "handle"]


def test_mode3_retrieve_picks_best_active():
    d = 4
    emb = np.vstack([np.eye(1, d)[0], np.array([0.0, 1, 0, 0]), np.array([0.0, 0, 1, 0])])
    ps = _partlet_set(emb, np.arange(12).reshape(3, 4), np.array([-1.0, 1.0, 1.0]))
    k, logits = mode3_retrieve(ps, np.eye(1, d)[0])
    # partlet 0 matches best but is inactive; partlet 1 is the best active
    assert k in (1, 2)
    assert np.array_equal(logits, ps.mask_logits[k])


def test_rank_by_saliency_order_and_bounds():
    mask = np.array([[10.0, 10.0], [-10.0, -10.0], [0.0, 0.0]])
    part = np.array([0.0, 5.0, 0.0])
    ps = _partlet_set(np.eye(3), mask, part)
    order = rank_by_saliency(ps, 3)
    sal = sigmoid(part) + sigmoid(mask).mean(axis=1)
    assert order == sorted(range(3), key=lambda k: (-sal[k], k))
    with pytest.raises(ValueError):
        rank_by_saliency(ps, 4)


def test_kmeans_deterministic_and_separates_blobs():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((30, 2)) * 0.05
    b = rng.standard_normal((30, 2)) * 0.05 + 10.0
    x = np.vstack([a, b])
    g1 = kmeans_cluster(x, 2, seed=0)
    g2 = kmeans_cluster(x, 2, seed=0)
    assert np.array_equal(g1, g2)
    assert len(set(g1[:30])) == 1 and len(set(g1[30:])) == 1
    assert g1[0] != g1[30]
    with pytest.raises(ValueError):
        kmeans_cluster(x, 61)
