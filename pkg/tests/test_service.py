import json

import pytest
from fastapi.testclient import TestClient

from partmatch.annotation import AnnotationService
from partmatch.ontology import CanonicalMap
from partmatch.service import create_app


def _prediction(shape_id, maha=0.9, fused=0.9, names=("seat",)):
    return {
        "shape_id": shape_id,
        "category": "chair",
        "partlets": [
            {"name": n, "conf_soft": fused, "conf_maha": maha, "conf_fused": fused,
             "mask_point_indices": [i]}
            for i, n in enumerate(names)
        ],
        "unlabeled_count": 0,
    }


@pytest.fixture
def client(tmp_path):
    service = AnnotationService(
        tmp_path / "log.jsonl",
        canonical_map=CanonicalMap(mapping={"laptop": "laptop_computer"}),
        vocab={"chair": ["seat", "leg", "backrest", "laptop_computer"]},
    )
    return TestClient(create_app(service))


def test_ingest_endpoint(client):
    resp = client.post("/shapes", json=_prediction("a"))
    assert resp.status_code == 201
    assert resp.json()["status"] == "AUTO_ACCEPTED"


def test_ingest_duplicate_conflict(client):
    client.post("/shapes", json=_prediction("a"))
    assert client.post("/shapes", json=_prediction("a")).status_code == 409


def test_ingest_schema_error(client):
    assert client.post("/shapes", json={"shape_id": "x"}).status_code == 422
    bad = _prediction("y")
    bad["partlets"][0]["conf_soft"] = 2.0
    assert client.post("/shapes", json=bad).status_code == 422


def test_queue_next_lease_and_empty(client):
    assert client.get("/queue/next", params={"reviewer": "r1"}).status_code == 204
    client.post("/shapes", json=_prediction("a", maha=0.1, fused=0.7))
    resp = client.get("/queue/next", params={"reviewer": "r1"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "LEASED"
    assert body["lease"]["reviewer"] == "r1"


def test_decision_flow_and_idempotence(client):
    client.post("/shapes", json=_prediction("a", maha=0.1, fused=0.7))
    client.get("/queue/next", params={"reviewer": "r1"})
    decision = {
        "reviewer": "r1",
        "revision": 0,
        "verdicts": [{"partlet_index": 0, "verdict": "RELABEL", "new_label": "laptop"}],
    }
    resp = client.post("/items/a/decision", json=decision)
    assert resp.status_code == 200
    assert resp.json()["final_partlets"][0]["name"] == "laptop_computer"
    # double submit: same outcome, still one decision in effect
    again = client.post("/items/a/decision", json=decision)
    assert again.status_code == 200
    assert again.json()["status"] == "REVIEWED"


def test_decision_stale_lease_conflict(client):
    client.post("/shapes", json=_prediction("a", maha=0.1, fused=0.7))
    resp = client.post("/items/a/decision",
                       json={"reviewer": "r9", "revision": 0,
                             "verdicts": [{"partlet_index": 0, "verdict": "ACCEPT"}]})
    assert resp.status_code == 409


def test_decision_unknown_label_suggestions(client):
    client.post("/shapes", json=_prediction("a", maha=0.1, fused=0.7))
    client.get("/queue/next", params={"reviewer": "r1"})
    resp = client.post("/items/a/decision",
                       json={"reviewer": "r1", "revision": 0,
                             "verdicts": [{"partlet_index": 0, "verdict": "RELABEL",
                                           "new_label": "back"}]})
    assert resp.status_code == 422
    assert "backrest" in resp.json()["suggestions"]


def test_get_item_and_404(client):
    client.post("/shapes", json=_prediction("a"))
    assert client.get("/items/a").status_code == 200
    assert client.get("/items/zzz").status_code == 404


def test_export_endpoint_filter_and_bytes(client):
    client.post("/shapes", json=_prediction("b", maha=0.9))
    client.post("/shapes", json=_prediction("a", maha=0.1, fused=0.7))
    resp = client.get("/export")
    doc = json.loads(resp.content)
    assert [r["shape_id"] for r in doc["items"]] == ["b"]  # only auto-accepted so far
    resp = client.get("/export", params={"status": "PENDING"})
    assert [r["shape_id"] for r in json.loads(resp.content)["items"]] == ["a"]


def test_stats_endpoint(client):
    client.post("/shapes", json=_prediction("a", maha=0.9))
    client.post("/shapes", json=_prediction("b", maha=0.1, fused=0.7))
    stats = client.get("/stats").json()
    assert stats["items"] == 2
    assert stats["by_status"] == {"AUTO_ACCEPTED": 1, "PENDING": 1}
    assert stats["queue_length"] == 1


def test_vocab_endpoint_alias_resolved(client):
    resp = client.get("/vocab", params={"class": "chair"})
    body = resp.json()
    assert body["object_class"] == "chair"
    assert "laptop_computer" in body["labels"]
    assert "laptop" not in body["labels"]
    assert client.get("/vocab", params={"class": "ghost"}).json()["labels"] == []
