import json

import pytest
from fastapi.testclient import TestClient

from tokenaudit.dataset import Dataset
from tokenaudit.io import file_sha256, write_dataset, write_scores
from tokenaudit.labels import LabelSpace
from tokenaudit.review import ReviewRecord, StateError, apply_corrections, create_app
from tokenaudit.sentence_scores import SentenceScoreRecord

from conftest import make_dataset

SPACE = LabelSpace(classes=("O", "ENT"), other_class=0)

# worst-token scores chosen so the queue order is ids 1, 2, 0
WT_SCORES = {0: 0.9, 1: 0.1, 2: 0.5}
AVG_SCORES = {0: 0.2, 1: 0.8, 2: 0.5}


def build_service(tmp_path, with_probs=True):
    ds = make_dataset(SPACE, [[0, 1, 0], [1, 0], [0, 0, 1, 1]], seed=3)
    if not with_probs:
        ds = Dataset(label_space=ds.label_space, sentences=ds.sentences, probs=(None,) * 3)
    paths = {
        "dataset": str(tmp_path / "data.jsonl"),
        "scores": str(tmp_path / "scores.jsonl"),
        "state": str(tmp_path / "state.json"),
    }
    with open(paths["dataset"], "w") as f:
        write_dataset(ds, f)
    records = [
        SentenceScoreRecord(sid, "worst-token", "self-confidence", s, 0)
        for sid, s in WT_SCORES.items()
    ] + [
        SentenceScoreRecord(sid, "average-quality", "cwe", s, None)
        for sid, s in AVG_SCORES.items()
    ]
    with open(paths["scores"], "w") as f:
        write_scores(records, f)
    return paths


@pytest.fixture
def service(tmp_path):
    paths = build_service(tmp_path)
    app = create_app(paths["dataset"], paths["scores"], paths["state"])
    with TestClient(app) as client:
        yield client, paths


def test_queue_sorted_by_score(service):
    client, _ = service
    r = client.get("/api/sentences", params={"limit": 2})
    assert r.status_code == 200
    body = r.json()
    assert body["method"] == "worst-token"
    assert body["token_method"] == "self-confidence"
    assert body["total"] == 3
    assert [s["id"] for s in body["sentences"]] == [1, 2]
    assert body["sentences"][0]["score"] == 0.1
    assert body["sentences"][0]["verdict"] is None
    assert body["sentences"][0]["n_tokens"] == 2


def test_queue_pagination_partitions(service):
    client, _ = service
    first = client.get("/api/sentences", params={"limit": 2, "offset": 0}).json()
    second = client.get("/api/sentences", params={"limit": 2, "offset": 2}).json()
    ids = [s["id"] for s in first["sentences"]] + [s["id"] for s in second["sentences"]]
    assert ids == [1, 2, 0]
    beyond = client.get("/api/sentences", params={"offset": 99}).json()
    assert beyond["sentences"] == [] and beyond["total"] == 3


def test_queue_sort_by_id_and_other_method(service):
    client, _ = service
    by_id = client.get("/api/sentences", params={"sort": "id"}).json()
    assert [s["id"] for s in by_id["sentences"]] == [0, 1, 2]
    other = client.get(
        "/api/sentences", params={"method": "average-quality", "token_method": "cwe"}
    ).json()
    assert [s["id"] for s in other["sentences"]] == [0, 2, 1]


def test_queue_validation(service):
    client, _ = service
    assert client.get("/api/sentences", params={"sort": "rank"}).status_code == 400
    assert client.get("/api/sentences", params={"filter": "mine"}).status_code == 400
    assert client.get("/api/sentences", params={"offset": -1}).status_code == 400
    assert client.get("/api/sentences", params={"limit": 0}).status_code == 400
    r = client.get("/api/sentences", params={"method": "product", "token_method": "cwe"})
    assert r.status_code == 400
    detail = r.json()["detail"]
    assert "no scores" in detail["error"]
    assert {"method": "worst-token", "token_method": "self-confidence"} in detail["available"]


def test_methods_endpoint(service):
    client, paths = service
    body = client.get("/api/methods").json()
    assert body["fingerprint"] == file_sha256(paths["dataset"])
    assert body["default"] == {"method": "worst-token", "token_method": "self-confidence"}
    assert {"method": "average-quality", "token_method": "cwe"} in body["methods"]
    assert body["token_methods"] == ["self-confidence", "normalized-margin", "cwe"]


def test_sentence_detail(service):
    client, _ = service
    r = client.get("/api/sentences/1")
    assert r.status_code == 200
    body = r.json()
    assert body["tokens"] == ["w1_0", "w1_1"]
    assert body["given_label_names"] == ["ENT", "O"]
    assert body["classes"] == ["O", "ENT"]
    assert len(body["quality"]) == 2
    assert all(isinstance(b, int) for b in body["flags"])
    assert len(body["top_predictions"]) == 2
    top = body["top_predictions"][0][0]
    assert set(top) == {"class", "name", "prob"}
    assert body["review"] is None

    cwe = client.get("/api/sentences/1", params={"token_method": "cwe"}).json()
    assert cwe["token_method"] == "cwe"

    assert client.get("/api/sentences/99").status_code == 404
    assert client.get("/api/sentences/1", params={"token_method": "best"}).status_code == 400


def test_review_flow_and_stats(service):
    client, _ = service
    fresh = client.get("/api/stats").json()
    assert fresh["reviewed"] == 0
    assert fresh["fraction_reviewed"] == 0.0
    assert fresh["precision_so_far"] == 0.0

    r = client.post("/api/sentences/1/review", json={"verdict": "correct"})
    assert r.status_code == 200
    assert r.json()["stats"]["reviewed"] == 1

    r = client.post(
        "/api/sentences/2/review",
        json={"verdict": "mislabeled", "corrected_labels": [0, 0, 0, 1]},
    )
    assert r.status_code == 200
    client.post("/api/sentences/0/review", json={"verdict": "skipped"})

    stats = client.get("/api/stats").json()
    assert stats["by_verdict"] == {"correct": 1, "mislabeled": 1, "skipped": 1}
    assert stats["fraction_reviewed"] == 1.0
    # skipped sentences stay out of the precision denominator
    assert stats["precision_so_far"] == 0.5

    detail = client.get("/api/sentences/2").json()
    assert detail["review"]["verdict"] == "mislabeled"
    assert detail["review"]["corrected_labels"] == [0, 0, 0, 1]
    assert detail["review"]["timestamp"].endswith("+00:00")

    reviewed = client.get("/api/sentences", params={"filter": "reviewed"}).json()
    assert {s["id"] for s in reviewed["sentences"]} == {0, 1, 2}
    unreviewed = client.get("/api/sentences", params={"filter": "unreviewed"}).json()
    assert unreviewed["sentences"] == []


def test_review_validation(service):
    client, paths = service
    post = lambda sid, body: client.post(f"/api/sentences/{sid}/review", json=body)
    assert post(99, {"verdict": "correct"}).status_code == 404
    assert post(1, {"verdict": "fine"}).status_code == 400
    assert post(1, {"verdict": "mislabeled", "corrected_labels": [0]}).status_code == 400
    assert post(1, {"verdict": "mislabeled", "corrected_labels": [0, 7]}).status_code == 400
    assert post(1, {"verdict": "mislabeled"}).status_code == 400
    assert post(1, {"verdict": "mislabeled", "reviewer_note": "BIO prefix wrong"}).status_code == 200

    fp = client.get("/api/methods").json()["fingerprint"]
    assert post(1, {"verdict": "correct", "fingerprint": "not-it"}).status_code == 409
    assert post(1, {"verdict": "correct", "fingerprint": fp}).status_code == 200


def test_latest_review_wins(service):
    client, _ = service
    client.post("/api/sentences/1/review", json={"verdict": "correct"})
    client.post(
        "/api/sentences/1/review",
        json={"verdict": "mislabeled", "corrected_labels": [0, 0]},
    )
    stats = client.get("/api/stats").json()
    assert stats["by_verdict"]["correct"] == 0
    assert stats["by_verdict"]["mislabeled"] == 1
    assert stats["reviewed"] == 1


def test_state_survives_restart(service):
    client, paths = service
    client.post("/api/sentences/1/review", json={"verdict": "correct"})

    state = json.load(open(paths["state"]))
    assert state["schema"] == 1
    assert set(state["reviews"]) == {"1"}

    reopened = create_app(paths["dataset"], paths["scores"], paths["state"])
    with TestClient(reopened) as client2:
        stats = client2.get("/api/stats").json()
        assert stats["by_verdict"]["correct"] == 1
        detail = client2.get("/api/sentences/1").json()
        assert detail["review"]["verdict"] == "correct"


def test_corrupt_state_refuses_to_start(tmp_path):
    paths = build_service(tmp_path)
    with open(paths["state"], "w") as f:
        f.write("{not json")
    with pytest.raises(StateError, match="corrupt review state"):
        create_app(paths["dataset"], paths["scores"], paths["state"])


def test_foreign_state_refuses_to_start(tmp_path):
    paths = build_service(tmp_path)
    with open(paths["state"], "w") as f:
        json.dump({"schema": 1, "fingerprint": "deadbeef", "reviews": {}}, f)
    with pytest.raises(StateError, match="different dataset"):
        create_app(paths["dataset"], paths["scores"], paths["state"])


def test_scores_must_match_dataset(tmp_path):
    paths = build_service(tmp_path)
    with open(paths["scores"], "a") as f:
        f.write('{"sentence_id":42,"method":"worst-token","token_method":"self-confidence","score":0.5,"worst_token_index":null}\n')
    with pytest.raises(ValueError, match="unknown sentence id 42"):
        create_app(paths["dataset"], paths["scores"], paths["state"])


def test_export_without_reviews_is_identity(service, tmp_path):
    client, paths = service
    out = str(tmp_path / "out.jsonl")
    r = client.post("/api/export", json={"path": out})
    assert r.status_code == 200
    assert r.json()["n_corrected"] == 0
    assert open(out).read() == open(paths["dataset"]).read()


def test_export_applies_corrections(service, tmp_path):
    client, paths = service
    client.post("/api/sentences/1/review", json={"verdict": "mislabeled", "corrected_labels": [0, 0]})
    client.post("/api/sentences/0/review", json={"verdict": "correct"})
    client.post("/api/sentences/2/review", json={"verdict": "skipped"})
    r = client.post("/api/export", json={})
    body = r.json()
    assert body["n_corrected"] == 1
    assert body["path"].endswith("data.corrected.jsonl")

    before = open(paths["dataset"]).read().splitlines()
    after = open(body["path"]).read().splitlines()
    assert len(before) == len(after)
    changed = [i for i, (a, b) in enumerate(zip(before, after)) if a != b]
    assert changed == [2]  # header + sentence 0, then sentence 1's line
    assert json.loads(after[2])["given_labels"] == [0, 0]


def test_fallback_index_page(service):
    client, _ = service
    r = client.get("/")
    assert r.status_code == 200
    assert "Review service is running" in r.text


def test_detail_without_probs(tmp_path):
    paths = build_service(tmp_path, with_probs=False)
    app = create_app(paths["dataset"], paths["scores"], paths["state"])
    with TestClient(app) as client:
        body = client.get("/api/sentences/1").json()
        assert body["quality"] is None and body["flags"] is None and body["top_predictions"] is None
        assert client.get("/api/methods").json()["token_methods"] == []


def test_apply_corrections_unit():
    ds = make_dataset(SPACE, [[0, 1], [1, 1]])
    reviews = {
        0: ReviewRecord(verdict="mislabeled", corrected_labels=(1, 1)),
        1: ReviewRecord(verdict="mislabeled", corrected_labels=None, reviewer_note="bad but unsure"),
    }
    fixed, n = apply_corrections(ds, reviews)
    assert n == 1
    assert fixed.sentences[0].given_labels == (1, 1)
    assert fixed.sentences[1].given_labels == (1, 1)
