"""Confidence-routed human-in-the-loop annotation service core.

All state changes flow through an append-only checksummed JSON-lines log;
live mutations append a record and then apply it through the same pure
transition function that replay uses, so replaying the log from empty state
reproduces the live state exactly. Reviewer concurrency is handled with
time-limited leases.
"""

from __future__ import annotations

import threading
import time
import zlib
from pathlib import Path

from .fileio import canonical_json, line_to_record, record_to_line, validate_prediction
from .ontology import CanonicalMap

AUTO_ACCEPT_MAHA = 0.8
LOW_CONF_THRESHOLD = 0.5


class DuplicateShapeError(ValueError):
    pass


class StaleLeaseError(RuntimeError):
    pass


class UnknownLabelError(ValueError):
    def __init__(self, label: str, suggestions: list[str]):
        super().__init__(f"label {label!r} not in the active vocabulary")
        self.label = label
        self.suggestions = suggestions


def _avg_fused(prediction: dict) -> float:
    parts = prediction["partlets"]
    if not parts:
        return 0.0
    return sum(float(p["conf_fused"]) for p in parts) / len(parts)


def _auto_accepted(prediction: dict) -> bool:
    # item-level rule: every partlet individually clears the auto-accept bar
    return all(float(p["conf_maha"]) >= AUTO_ACCEPT_MAHA for p in prediction["partlets"])


def _low_confidence(prediction: dict) -> bool:
    return any(float(p["conf_fused"]) < LOW_CONF_THRESHOLD for p in prediction["partlets"])


def _decision_key(revision: int, verdicts: list[dict]) -> int:
    return zlib.crc32(canonical_json({"revision": revision, "verdicts": verdicts}).encode("utf-8"))


def _apply_verdicts(partlets: list[dict], verdicts: list[dict], resolve) -> list[dict]:
    out = []
    for i, p in enumerate(partlets):
        verdict = next((v for v in verdicts if v["partlet_index"] == i), None)
        action = verdict["verdict"] if verdict else "ACCEPT"
        if action == "REJECT_PART":
            continue
        entry = dict(p)
        if action == "RELABEL":
            entry["name"] = resolve(verdict["new_label"])
        out.append(entry)
    return out


class AnnotationService:
    """Review queue over ingested predictions, backed by a replayable log."""

    def __init__(
        self,
        log_path: str | Path,
        canonical_map: CanonicalMap | None = None,
        vocab: dict[str, list[str]] | None = None,
        lease_seconds: float = 600.0,
        clock=time.time,
        snapshot_every: int = 100,
    ):
        self.log_path = Path(log_path)
        self.cmap = canonical_map or CanonicalMap(mapping={})
        self.vocab = {cls: sorted(labels) for cls, labels in (vocab or {}).items()}
        self.lease_seconds = lease_seconds
        self.clock = clock
        self.snapshot_every = snapshot_every
        self._lock = threading.Lock()
        self.items: dict[str, dict] = {}
        self.seq = 0
        self._appended = 0
        if self.log_path.exists():
            for i, rec in enumerate(self._read_records()):
                self._apply(rec)

    # --- log plumbing ------------------------------------------------------

    def _read_records(self) -> list[dict]:
        records = []
        with open(self.log_path, "r", encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                line = line.strip()
                if line:
                    records.append(line_to_record(line, index=i))
        return records

    def _append(self, record: dict) -> None:
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(record_to_line(record) + "\n")
        self._apply(record)
        self._appended += 1
        if self.snapshot_every and self._appended % self.snapshot_every == 0:
            self.write_snapshot()

    def write_snapshot(self) -> Path:
        path = self.log_path.with_suffix(".snapshot.json")
        path.write_text(canonical_json(self.to_dict()))
        return path

    def _apply(self, rec: dict) -> None:
        kind = rec["type"]
        if kind == "ingest":
            pred = rec["prediction"]
            status = rec.get("status")
            if status is None:
                status = "AUTO_ACCEPTED" if _auto_accepted(pred) else "PENDING"
            self.seq += 1
            self.items[pred["shape_id"]] = {
                "shape_id": pred["shape_id"],
                "prediction": pred,
                "status": status,
                "low_confidence": _low_confidence(pred),
                "avg_fused_conf": _avg_fused(pred),
                "ingest_seq": self.seq,
                "lease": None,
                "revision": 0,
                "final_partlets": pred["partlets"] if status in ("AUTO_ACCEPTED", "REVIEWED") else None,
                "review_duration": rec.get("review_duration", 0.0),
                "decision_key": None,
            }
        elif kind == "lease":
            item = self.items[rec["item"]]
            item["status"] = "LEASED"
            item["lease"] = {"reviewer": rec["reviewer"], "granted": rec["ts"], "expiry": rec["expiry"]}
        elif kind == "lease_expired":
            item = self.items[rec["item"]]
            item["status"] = "PENDING"
            item["lease"] = None
        elif kind == "decision":
            item = self.items[rec["item"]]
            item["status"] = "REVIEWED"
            item["final_partlets"] = _apply_verdicts(
                item["prediction"]["partlets"], rec["verdicts"], self.cmap.resolve
            )
            item["review_duration"] = rec["ts"] - (item["lease"]["granted"] if item["lease"] else rec["ts"])
            item["lease"] = None
            item["revision"] += 1
            item["decision_key"] = rec["key"]
        elif kind == "reopen":
            item = self.items[rec["item"]]
            item["status"] = "PENDING"
            item["final_partlets"] = None
            item["lease"] = None
        else:
            raise ValueError(f"unknown log record type {kind!r}")

    # --- lease expiry ------------------------------------------------------

    def _expire_stale(self, now: float) -> None:
        for item in self.items.values():
            if item["status"] == "LEASED" and item["lease"] and item["lease"]["expiry"] <= now:
                self._append({"type": "lease_expired", "item": item["shape_id"], "ts": now})

    # --- public operations -------------------------------------------------

    def ingest(self, prediction: dict, status: str | None = None, review_duration: float | None = None) -> dict:
        """Validate and enqueue a prediction; returns the created item."""
        validate_prediction(prediction)
        with self._lock:
            if prediction["shape_id"] in self.items:
                raise DuplicateShapeError(f"shape {prediction['shape_id']!r} already ingested")
            rec = {"type": "ingest", "prediction": prediction, "ts": self.clock()}
            if status is not None:
                if status not in ("AUTO_ACCEPTED", "PENDING", "REVIEWED"):
                    raise ValueError(f"cannot import with status {status!r}")
                rec["status"] = status
            if review_duration is not None:
                rec["review_duration"] = review_duration
            self._append(rec)
            return dict(self.items[prediction["shape_id"]])

    def queue_order(self) -> list[dict]:
        """PENDING items, strictly descending average fused confidence, FIFO on ties."""
        with self._lock:
            self._expire_stale(self.clock())
            pending = [i for i in self.items.values() if i["status"] == "PENDING"]
            pending.sort(key=lambda i: (-i["avg_fused_conf"], i["ingest_seq"]))
            return [dict(i) for i in pending]

    def lease_next(self, reviewer: str) -> dict | None:
        """Lease the head of the queue to a reviewer; None when the queue is empty."""
        with self._lock:
            now = self.clock()
            self._expire_stale(now)
            pending = [i for i in self.items.values() if i["status"] == "PENDING"]
            pending.sort(key=lambda i: (-i["avg_fused_conf"], i["ingest_seq"]))
            if not pending:
                return None
            item = pending[0]
            self._append({
                "type": "lease",
                "item": item["shape_id"],
                "reviewer": reviewer,
                "ts": now,
                "expiry": now + self.lease_seconds,
            })
            return dict(self.items[item["shape_id"]])

    def _validate_label(self, category: str | None, label: str) -> str:
        resolved = self.cmap.resolve(label)
        if category is not None and category in self.vocab:
            # compare in resolved space: the vocabulary endpoint advertises
            # alias-resolved labels, so raw aliases in the file still count
            allowed = sorted({self.cmap.resolve(l) for l in self.vocab[category]})
            if resolved not in allowed:
                needle = resolved.lower()
                suggestions = [l for l in allowed if needle in l.lower() or l.lower() in needle]
                raise UnknownLabelError(label, suggestions or allowed[:5])
        return resolved

    def submit_decision(self, item_id: str, reviewer: str, revision: int, verdicts: list[dict]) -> dict:
        """Record a review decision; idempotent when retried with identical content."""
        with self._lock:
            now = self.clock()
            self._expire_stale(now)
            item = self.items.get(item_id)
            if item is None:
                raise KeyError(f"unknown item {item_id!r}")
            key = _decision_key(revision, verdicts)
            if item["status"] == "REVIEWED" and item["decision_key"] == key:
                return dict(item)  # duplicate submit: single log record effect
            if item["status"] != "LEASED" or not item["lease"] or item["lease"]["reviewer"] != reviewer:
                raise StaleLeaseError(f"item {item_id!r} is not leased by {reviewer!r}")
            if revision != item["revision"]:
                raise StaleLeaseError(f"revision {revision} is stale (current {item['revision']})")
            for v in verdicts:
                if v["verdict"] not in ("ACCEPT", "RELABEL", "REJECT_PART"):
                    raise ValueError(f"unknown verdict {v['verdict']!r}")
                if v["verdict"] == "RELABEL":
                    v["new_label"] = self._validate_label(item["prediction"].get("category"), v["new_label"])
            self._append({
                "type": "decision",
                "item": item_id,
                "reviewer": reviewer,
                "revision": revision,
                "verdicts": verdicts,
                "ts": now,
                "key": key,
            })
            return dict(self.items[item_id])

    def reopen(self, item_id: str) -> dict:
        with self._lock:
            if item_id not in self.items:
                raise KeyError(f"unknown item {item_id!r}")
            self._append({"type": "reopen", "item": item_id, "ts": self.clock()})
            return dict(self.items[item_id])

    def get_item(self, item_id: str) -> dict:
        with self._lock:
            self._expire_stale(self.clock())
            item = self.items.get(item_id)
            if item is None:
                raise KeyError(f"unknown item {item_id!r}")
            return dict(item)

    def export(self, statuses: tuple[str, ...] = ("AUTO_ACCEPTED", "REVIEWED")) -> bytes:
        """Verified dataset as canonical JSON bytes, ordered by shape id."""
        with self._lock:
            records = []
            for item in sorted(self.items.values(), key=lambda i: i["shape_id"]):
                if item["status"] not in statuses:
                    continue
                pred = item["prediction"]
                records.append({
                    "shape_id": item["shape_id"],
                    "category": pred.get("category"),
                    "status": item["status"],
                    "partlets": item["final_partlets"] if item["final_partlets"] is not None else pred["partlets"],
                    "unlabeled_count": pred.get("unlabeled_count", 0),
                    "review_duration": item["review_duration"],
                })
            return (canonical_json({"format": "partmatch-dataset-v1", "items": records}) + "\n").encode("utf-8")

    def ingest_export(self, data: bytes) -> int:
        """Import a previously exported dataset, preserving statuses and durations."""
        import json

        doc = json.loads(data.decode("utf-8"))
        if doc.get("format") != "partmatch-dataset-v1":
            raise ValueError("not a dataset export")
        for rec in doc["items"]:
            prediction = {
                "shape_id": rec["shape_id"],
                "category": rec.get("category"),
                "partlets": rec["partlets"],
                "unlabeled_count": rec.get("unlabeled_count", 0),
            }
            self.ingest(prediction, status=rec["status"], review_duration=rec["review_duration"])
        return len(doc["items"])

    def stats(self) -> dict:
        with self._lock:
            self._expire_stale(self.clock())
            counts: dict[str, int] = {}
            for item in self.items.values():
                counts[item["status"]] = counts.get(item["status"], 0) + 1
            return {
                "items": len(self.items),
                "by_status": counts,
                "queue_length": counts.get("PENDING", 0),
            }

    def to_dict(self) -> dict:
        """Deterministic full-state snapshot for replay-equality checks."""
        return {
            "seq": self.seq,
            "items": {k: self.items[k] for k in sorted(self.items)},
        }


def replay_log(log_path: str | Path, **kwargs) -> AnnotationService:
    """Rebuild service state purely from the log; checksum errors name the record."""
    return AnnotationService(log_path, **kwargs)
