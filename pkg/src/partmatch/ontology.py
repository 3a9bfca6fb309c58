"""Vocabulary compression: candidate pair generation and recorded adjudications.

Candidate label pairs come from embedding similarity; merges are applied only
for pairs carrying a recorded ACCEPT verdict (originally an LLM or human
adjudication, stored as fixture records). Merging runs through union-find;
each merged group keeps the most descriptive name (longest string, ties by
lexicographic order) as canonical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class VocabEntry:
    object_class: str
    part_label: str
    count: int
    source: str = ""


@dataclass(frozen=True)
class CandidatePair:
    scope: str  # "class" | "part"
    object_class: str | None  # containing class for part-level pairs
    a: str
    b: str
    sim: float


@dataclass(frozen=True)
class Adjudication:
    a: str
    b: str
    verdict: str  # "ACCEPT" | "REJECT"
    rationale: str = ""
    source: str = "recorded"
    sim: float | None = None


@dataclass
class CanonicalMap:
    """Alias -> canonical label; canonical labels map to themselves."""

    mapping: dict[str, str]
    merged_counts: dict[str, int] = field(default_factory=dict)
    log: list[dict] = field(default_factory=list)

    def resolve(self, label: str) -> str:
        """Canonical name if known, otherwise the label itself."""
        return self.mapping.get(label, label)


def _cosine(a: Array, b: Array) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def propose_pairs(
    vocab: list[VocabEntry],
    embeddings: dict[str, Array],
    theta: float = 0.85,
) -> list[CandidatePair]:
    """All within-scope label pairs with embedding similarity >= theta, descending.

    Class-level pairs compare object-class names across the whole vocabulary;
    part-level pairs compare part labels within one object class.
    """
    classes = sorted({e.object_class for e in vocab})
    for name in classes:
        if name not in embeddings:
            raise KeyError(f"no embedding for class {name!r}")
    pairs: list[CandidatePair] = []
    for i, a in enumerate(classes):
        for b in classes[i + 1 :]:
            sim = _cosine(np.asarray(embeddings[a]), np.asarray(embeddings[b]))
            if sim >= theta:
                pairs.append(CandidatePair("class", None, a, b, sim))
    for cls in classes:
        labels = sorted({e.part_label for e in vocab if e.object_class == cls})
        for name in labels:
            if name not in embeddings:
                raise KeyError(f"no embedding for part label {name!r}")
        for i, a in enumerate(labels):
            for b in labels[i + 1 :]:
                sim = _cosine(np.asarray(embeddings[a]), np.asarray(embeddings[b]))
                if sim >= theta:
                    pairs.append(CandidatePair("part", cls, a, b, sim))
    pairs.sort(key=lambda p: (-p.sim, p.a, p.b))
    return pairs


class _UnionFind:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _canonical_name(labels: set[str]) -> str:
    # most descriptive variant: longest string, ties lexicographically smaller
    return min(labels, key=lambda s: (-len(s), s))


def apply_adjudications(vocab: list[VocabEntry], decisions: list[Adjudication]) -> CanonicalMap:
    """Merge ACCEPTed pairs via union-find and build the alias-resolution map.

    Raises on contradictory decisions: a pair both accepted and rejected, or a
    rejected pair that ends up merged transitively.
    """
    known = {e.part_label for e in vocab} | {e.object_class for e in vocab}
    for d in decisions:
        for label in (d.a, d.b):
            if label not in known:
                raise KeyError(f"adjudication references unknown label {label!r}")
    accepted = {frozenset((d.a, d.b)) for d in decisions if d.verdict == "ACCEPT"}
    rejected = {frozenset((d.a, d.b)) for d in decisions if d.verdict == "REJECT"}
    direct = accepted & rejected
    if direct:
        listing = ", ".join(sorted("/".join(sorted(p)) for p in direct))
        raise ValueError(f"contradictory adjudications for: {listing}")
    uf = _UnionFind()
    for label in sorted(known):
        uf.find(label)
    for pair in sorted(accepted, key=lambda p: sorted(p)):
        a, b = sorted(pair)
        uf.union(a, b)
    transitive = [p for p in rejected if len({uf.find(x) for x in p}) == 1]
    if transitive:
        listing = ", ".join(sorted("/".join(sorted(p)) for p in transitive))
        raise ValueError(f"rejected pairs merged transitively: {listing}")
    groups: dict[str, set[str]] = {}
    for label in known:
        groups.setdefault(uf.find(label), set()).add(label)
    mapping: dict[str, str] = {}
    log: list[dict] = []
    for members in groups.values():
        canonical = _canonical_name(members)
        for label in sorted(members):
            mapping[label] = canonical
            if label != canonical:
                log.append({"alias": label, "canonical": canonical})
    counts: dict[str, int] = {}
    for e in vocab:
        counts[mapping.get(e.part_label, e.part_label)] = (
            counts.get(mapping.get(e.part_label, e.part_label), 0) + e.count
        )
    log.sort(key=lambda r: (r["canonical"], r["alias"]))
    return CanonicalMap(mapping=mapping, merged_counts=counts, log=log)


def resolve_alias(cmap: CanonicalMap, label: str) -> str:
    """Canonical label for a possibly legacy name; unknown labels pass through."""
    return cmap.resolve(label)
