"""HTTP review service: ranked queue, per-sentence evidence, verdicts, export.

State is one JSON file, rewritten atomically (temp file + fsync + rename)
before any submit response is sent, so a completed request always survives a
process kill. The file is bound to its dataset by a content hash; reviews
recorded against one dataset cannot be silently applied to another.
"""

from __future__ import annotations

import os
import tempfile
import threading
import json
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .dataset import Dataset
from .io import file_sha256, read_dataset, read_scores, sig6, write_dataset
from .sentence_scores import SentenceScoreRecord
from .token_scores import TOKEN_METHODS, class_thresholds, flag_tokens, token_quality

VERDICTS = ("correct", "mislabeled", "skipped")
STATE_SCHEMA = 1


@dataclass(frozen=True)
class ReviewRecord:
    verdict: str
    corrected_labels: tuple[int, ...] | None = None
    reviewer_note: str | None = None
    timestamp: str = ""


class StateError(ValueError):
    pass


class ReviewStore:
    """Owns the state file: load once, then serialized mutate-and-persist."""

    def __init__(self, path: str, fingerprint: str):
        self.path = path
        self.fingerprint = fingerprint
        self.reviews: dict[int, ReviewRecord] = {}
        self._lock = threading.Lock()
        self._load()

    def _load(self) -> None:
        if not os.path.exists(self.path):
            return
        try:
            with open(self.path, encoding="utf-8") as f:
                state = json.load(f)
            if state.get("schema") != STATE_SCHEMA:
                raise ValueError(f"unsupported schema {state.get('schema')!r}")
            reviews = {
                int(sid): ReviewRecord(
                    verdict=rec["verdict"],
                    corrected_labels=tuple(rec["corrected_labels"]) if rec.get("corrected_labels") is not None else None,
                    reviewer_note=rec.get("reviewer_note"),
                    timestamp=rec.get("timestamp", ""),
                )
                for sid, rec in state["reviews"].items()
            }
            stored = state.get("fingerprint")
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise StateError(f"corrupt review state file {self.path!r}: {exc}") from None
        if stored != self.fingerprint:
            raise StateError(
                f"review state file {self.path!r} belongs to a different dataset "
                f"(fingerprint {stored!r}, dataset {self.fingerprint!r})"
            )
        self.reviews = reviews

    def _persist_locked(self) -> None:
        state = {
            "schema": STATE_SCHEMA,
            "fingerprint": self.fingerprint,
            "reviews": {str(sid): asdict(rec) for sid, rec in sorted(self.reviews.items())},
        }
        directory = os.path.dirname(os.path.abspath(self.path))
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".review-state-", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(state, f, ensure_ascii=False, indent=1)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, self.path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def submit(self, sentence_id: int, record: ReviewRecord) -> None:
        with self._lock:
            self.reviews[sentence_id] = record
            self._persist_locked()

    def counts(self) -> dict[str, int]:
        with self._lock:
            out = {v: 0 for v in VERDICTS}
            for rec in self.reviews.values():
                out[rec.verdict] += 1
            return out


class ReviewBody(BaseModel):
    verdict: str
    corrected_labels: list[int] | None = None
    reviewer_note: str | None = None
    fingerprint: str | None = None


class ExportBody(BaseModel):
    path: str | None = None


_FALLBACK_PAGE = """<!doctype html>
<html><head><title>label review</title></head>
<body><h1>Review service is running</h1>
<p>No UI bundle was configured (start with --ui-dir to serve one).
The JSON API lives under <code>/api</code>: try <a href="/api/stats">/api/stats</a>
or <a href="/api/sentences">/api/sentences</a>.</p></body></html>
"""


def apply_corrections(ds: Dataset, reviews: dict[int, ReviewRecord]) -> tuple[Dataset, int]:
    """Replace given labels with reviewer corrections where verdicts say so."""
    sentences = []
    n_corrected = 0
    for sent in ds.sentences:
        rec = reviews.get(sent.id)
        if rec is not None and rec.verdict == "mislabeled" and rec.corrected_labels is not None:
            sentences.append(replace(sent, given_labels=tuple(rec.corrected_labels)))
            n_corrected += 1
        else:
            sentences.append(sent)
    return Dataset(label_space=ds.label_space, sentences=tuple(sentences), probs=ds.probs), n_corrected


def create_app(
    dataset_path: str,
    scores_path: str,
    state_path: str,
    ui_dir: str | None = None,
) -> FastAPI:
    with open(dataset_path, encoding="utf-8") as f:
        ds = read_dataset(f)
    with open(scores_path, encoding="utf-8") as f:
        score_records = read_scores(f)
    fingerprint = file_sha256(dataset_path)
    store = ReviewStore(state_path, fingerprint)

    by_id = ds.by_id()
    known_ids = set(by_id)
    # score lookup per (method, token_method); token_method None keyed as ""
    tables: dict[tuple[str, str], dict[int, SentenceScoreRecord]] = {}
    for rec in score_records:
        if rec.sentence_id not in known_ids:
            raise ValueError(f"score file references unknown sentence id {rec.sentence_id}")
        tables.setdefault((rec.method, rec.token_method or ""), {})[rec.sentence_id] = rec
    if not tables:
        raise ValueError(f"score file {scores_path!r} contains no records")

    if ds.has_probs:
        labels = [s.given_labels for s in ds.sentences]
        thresholds = class_thresholds(ds.probs, labels)
        flags = [flag_tokens(p, l, thresholds) for p, l in zip(ds.probs, labels)]
    else:
        flags = None

    def pick_default_method() -> tuple[str, str]:
        preferred = ("worst-token", "self-confidence")
        return preferred if preferred in tables else min(tables)

    def lookup_table(method: str | None, token_method: str | None) -> tuple[tuple[str, str], dict[int, SentenceScoreRecord]]:
        key = pick_default_method() if method is None else (method, token_method or "")
        table = tables.get(key)
        if table is None:
            available = sorted(tables)
            raise HTTPException(
                status_code=400,
                detail={
                    "error": f"no scores for method={key[0]!r} token_method={key[1] or None!r}",
                    "available": [{"method": m, "token_method": t or None} for m, t in available],
                },
            )
        return key, table

    app = FastAPI(title="label review service")

    @app.get("/api/methods")
    def methods() -> dict:
        return {
            "fingerprint": fingerprint,
            "default": dict(zip(("method", "token_method"), pick_default_method())),
            "methods": [{"method": m, "token_method": t or None} for m, t in sorted(tables)],
            "token_methods": list(TOKEN_METHODS) if ds.has_probs else [],
        }

    @app.get("/api/sentences")
    def list_sentences(
        sort: str = "score",
        method: str | None = None,
        token_method: str | None = None,
        offset: int = 0,
        limit: int = 50,
        filter: str = "all",
    ) -> dict:
        if sort not in ("score", "id"):
            raise HTTPException(400, detail=f"sort must be 'score' or 'id', got {sort!r}")
        if filter not in ("all", "unreviewed", "reviewed"):
            raise HTTPException(400, detail=f"filter must be all|unreviewed|reviewed, got {filter!r}")
        if offset < 0 or limit < 1:
            raise HTTPException(400, detail="offset must be >= 0 and limit >= 1")
        key, table = lookup_table(method, token_method)

        rows = sorted(table.values(), key=lambda r: r.sentence_id)
        if sort == "score":
            rows = sorted(rows, key=lambda r: r.score)  # stable: ties stay by id
        if filter != "all":
            want_reviewed = filter == "reviewed"
            rows = [r for r in rows if (r.sentence_id in store.reviews) == want_reviewed]
        page = rows[offset : offset + limit]

        items = []
        for r in page:
            sent = ds.sentences[by_id[r.sentence_id]]
            rec = store.reviews.get(r.sentence_id)
            items.append(
                {
                    "id": r.sentence_id,
                    "text": sent.text,
                    "n_tokens": sent.n,
                    "score": sig6(r.score),
                    "worst_token_index": r.worst_token_index,
                    "verdict": rec.verdict if rec else None,
                }
            )
        return {
            "method": key[0],
            "token_method": key[1] or None,
            "sort": sort,
            "filter": filter,
            "total": len(rows),
            "offset": offset,
            "limit": limit,
            "sentences": items,
        }

    @app.get("/api/sentences/{sentence_id}")
    def get_sentence(sentence_id: int, token_method: str = "self-confidence") -> dict:
        if sentence_id not in by_id:
            raise HTTPException(404, detail=f"unknown sentence id {sentence_id}")
        if token_method not in TOKEN_METHODS:
            raise HTTPException(400, detail=f"token_method must be one of {list(TOKEN_METHODS)}")
        i = by_id[sentence_id]
        sent = ds.sentences[i]
        probs = ds.probs[i]
        if probs is not None:
            quality = [sig6(q) for q in token_quality(token_method, probs, sent.given_labels)]
            flagged = [int(b) for b in flags[i]]
            top = np.argsort(-probs, axis=1, kind="stable")[:, :3]
            predictions = [
                [
                    {"class": int(j), "name": ds.label_space.name(int(j)), "prob": sig6(probs[t, j])}
                    for j in top[t]
                ]
                for t in range(sent.n)
            ]
        else:
            quality = flagged = predictions = None
        rec = store.reviews.get(sentence_id)
        return {
            "id": sentence_id,
            "tokens": list(sent.tokens),
            "text": sent.text,
            "given_labels": list(sent.given_labels),
            "given_label_names": [ds.label_space.name(l) for l in sent.given_labels],
            "classes": list(ds.label_space.classes),
            "token_method": token_method,
            "quality": quality,
            "flags": flagged,
            "top_predictions": predictions,
            "review": None if rec is None else asdict(rec) | {"corrected_labels": list(rec.corrected_labels) if rec.corrected_labels else None},
        }

    def stats_payload() -> dict:
        counts = store.counts()
        reviewed = sum(counts.values())
        confirmed = counts["mislabeled"]
        decided = counts["correct"] + counts["mislabeled"]
        return {
            "total": len(ds.sentences),
            "reviewed": reviewed,
            "by_verdict": counts,
            "fraction_reviewed": reviewed / len(ds.sentences) if ds.sentences else 0.0,
            "precision_so_far": confirmed / decided if decided else 0.0,
            "fingerprint": fingerprint,
        }

    @app.post("/api/sentences/{sentence_id}/review")
    def submit_review(sentence_id: int, body: ReviewBody) -> dict:
        if sentence_id not in by_id:
            raise HTTPException(404, detail=f"unknown sentence id {sentence_id}")
        if body.fingerprint is not None and body.fingerprint != fingerprint:
            raise HTTPException(409, detail="dataset fingerprint mismatch; reload the queue")
        if body.verdict not in VERDICTS:
            raise HTTPException(400, detail=f"verdict must be one of {list(VERDICTS)}")
        sent = ds.sentences[by_id[sentence_id]]
        corrected = body.corrected_labels
        if corrected is not None:
            if len(corrected) != sent.n:
                raise HTTPException(400, detail=f"corrected_labels must have {sent.n} entries, got {len(corrected)}")
            k = len(ds.label_space)
            bad = [l for l in corrected if not 0 <= l < k]
            if bad:
                raise HTTPException(400, detail=f"label index {bad[0]} outside 0..{k - 1}")
        if body.verdict == "mislabeled" and corrected is None and not body.reviewer_note:
            raise HTTPException(400, detail="mislabeled verdict needs corrected_labels or a reviewer_note")
        record = ReviewRecord(
            verdict=body.verdict,
            corrected_labels=tuple(corrected) if corrected is not None else None,
            reviewer_note=body.reviewer_note,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )
        store.submit(sentence_id, record)
        return {"id": sentence_id, "verdict": record.verdict, "stats": stats_payload()}

    @app.get("/api/stats")
    def stats() -> dict:
        return stats_payload()

    @app.post("/api/export")
    def export(body: ExportBody) -> dict:
        path = body.path or os.path.splitext(dataset_path)[0] + ".corrected.jsonl"
        corrected_ds, n_corrected = apply_corrections(ds, dict(store.reviews))
        try:
            with open(path, "w", encoding="utf-8") as f:
                write_dataset(corrected_ds, f)
        except OSError as exc:
            raise HTTPException(400, detail=f"cannot write {path!r}: {exc}")
        return {"path": os.path.abspath(path), "n_corrected": n_corrected}

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index() -> str:
            return _FALLBACK_PAGE

    return app
