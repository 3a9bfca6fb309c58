import importlib.resources
import random

import numpy as np
import pytest

from partmatch.fileio import read_log
from partmatch.ontology import (
    Adjudication,
    CandidatePair,
    VocabEntry,
    apply_adjudications,
    propose_pairs,
    resolve_alias,
)


def _fixture_decisions():
    path = importlib.resources.files("partmatch") / "data" / "ontology_decisions.jsonl"
    return [
        Adjudication(a=r["a"], b=r["b"], verdict=r["verdict"], rationale=r.get("rationale", ""),
                     source=r.get("source", "recorded"), sim=r.get("sim"))
        for r in read_log(str(path))
    ]


def _fixture_vocab():
    return [
        VocabEntry("laptop_computer", "screen", 10, "src1"),
        VocabEntry("laptop", "screen", 4, "src2"),
        VocabEntry("microwave_oven", "door_glass", 7, "src1"),
        VocabEntry("microwave", "glass", 2, "src2"),
        VocabEntry("bed", "bed_footboard", 5, "src1"),
        VocabEntry("bed", "footboard", 3, "src2"),
        VocabEntry("car", "car_front_bumper", 6, "src1"),
        VocabEntry("car", "car_rear_bumper", 6, "src1"),
        VocabEntry("chair", "back_frame_horizontal_rod", 9, "src1"),
        VocabEntry("chair", "back_frame_vertical_rod", 8, "src1"),
    ]


def test_propose_pairs_similarity_threshold_and_order():
    vocab = [VocabEntry("chair", "seat", 1), VocabEntry("chair", "seat_cushion", 1),
             VocabEntry("chair", "leg", 1), VocabEntry("stool", "leg", 1)]
    emb = {
        "chair": np.array([1.0, 0.0]),
        "stool": np.array([0.96, 0.28]),
        "seat": np.array([1.0, 0.0]),
        "seat_cushion": np.array([1.0, 0.0]),
        "leg": np.array([0.0, 1.0]),
    }
    pairs = propose_pairs(vocab, emb, theta=0.85)
    assert CandidatePair("part", "chair", "seat", "seat_cushion", 1.0) in pairs
    # identical embeddings rank above the 0.96 class pair; orthogonal leg pairs absent
    assert pairs[0].sim == pytest.approx(1.0)
    assert all({"leg"} != {p.a, p.b} & {"leg"} or p.sim >= 0.85 for p in pairs)
    sims = [p.sim for p in pairs]
    assert sims == sorted(sims, reverse=True)


def test_propose_pairs_missing_embedding():
    with pytest.raises(KeyError):
        propose_pairs([VocabEntry("chair", "seat", 1)], {"chair": np.array([1.0, 0.0])})


def test_fixture_merges_and_rejections():
    cmap = apply_adjudications(_fixture_vocab(), _fixture_decisions())
    assert cmap.resolve("laptop") == "laptop_computer"
    assert cmap.resolve("footboard") == "bed_footboard"
    assert cmap.resolve("glass") == "door_glass"
    assert cmap.resolve("microwave") == "microwave_oven"
    # rejected pairs stay distinct
    assert cmap.resolve("car_front_bumper") != cmap.resolve("car_rear_bumper")
    assert cmap.resolve("back_frame_horizontal_rod") != cmap.resolve("back_frame_vertical_rod")


def test_counts_conserved():
    vocab = _fixture_vocab()
    cmap = apply_adjudications(vocab, _fixture_decisions())
    assert sum(cmap.merged_counts.values()) == sum(e.count for e in vocab)
    assert cmap.merged_counts["bed_footboard"] == 8


def test_resolution_idempotent_and_passthrough():
    cmap = apply_adjudications(_fixture_vocab(), _fixture_decisions())
    for label in list(cmap.mapping) + ["totally_new_label"]:
        once = resolve_alias(cmap, label)
        assert resolve_alias(cmap, once) == once
    assert resolve_alias(cmap, "unknown") == "unknown"


def test_canonical_rule_longest_then_lexicographic():
    vocab = [VocabEntry("c", "abc", 1), VocabEntry("c", "abd", 1), VocabEntry("c", "ab", 1)]
    decisions = [Adjudication("abc", "abd", "ACCEPT"), Adjudication("abd", "ab", "ACCEPT")]
    cmap = apply_adjudications(vocab, decisions)
    # longest strings tie at length 3; lexicographically smaller wins
    assert cmap.resolve("ab") == "abc"
    assert cmap.resolve("abd") == "abc"


def test_order_independence_of_merges():
    vocab = _fixture_vocab()
    decisions = _fixture_decisions()
    base = apply_adjudications(vocab, decisions).mapping
    rng = random.Random(0)
    for _ in range(10):
        shuffled = decisions[:]
        rng.shuffle(shuffled)
        assert apply_adjudications(vocab, shuffled).mapping == base


def test_direct_contradiction_rejected():
    vocab = [VocabEntry("c", "x", 1), VocabEntry("c", "y", 1)]
    decisions = [Adjudication("x", "y", "ACCEPT"), Adjudication("y", "x", "REJECT")]
    with pytest.raises(ValueError, match="contradictory"):
        apply_adjudications(vocab, decisions)


def test_transitive_contradiction_rejected():
    vocab = [VocabEntry("c", "x", 1), VocabEntry("c", "y", 1), VocabEntry("c", "z", 1)]
    decisions = [Adjudication("x", "y", "ACCEPT"), Adjudication("y", "z", "ACCEPT"),
                 Adjudication("x", "z", "REJECT")]
    with pytest.raises(ValueError, match="transitively"):
        apply_adjudications(vocab, decisions)


def test_unknown_label_in_decision_rejected():
    with pytest.raises(KeyError):
        apply_adjudications([VocabEntry("c", "x", 1)], [Adjudication("x", "ghost", "ACCEPT")])


def test_mapping_log_lists_every_alias():
    cmap = apply_adjudications(_fixture_vocab(), _fixture_decisions())
    aliases = {r["alias"] for r in cmap.log}
    assert aliases == {"laptop", "microwave", "glass", "footboard"}
    for r in cmap.log:
        assert cmap.mapping[r["alias"]] == r["canonical"]
