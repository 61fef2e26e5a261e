"""Line-delimited JSON interchange formats.

Three file kinds share the one-record-per-line convention:

* dataset file: a header line carrying the label space, then one record per
  sentence with fields id, tokens, given_labels, probs (flat row-major n*K
  list, or null), plus optional true_labels and char_spans. Probabilities are
  written at full precision so the row-sum invariant survives a round trip.
* subword probability file: records with id, spans and probs given as nested
  m x K rows (no header; the class count comes from the dataset).
* score and report files: flat records with floats fixed to 6 significant
  digits so golden files stay byte-stable.
"""

from __future__ import annotations

import hashlib
import json
from typing import IO, Iterable, Iterator

import numpy as np

from .dataset import Dataset, TokenizedSentence
from .labels import LabelSpace
from .pooling import SubwordProbs
from .sentence_scores import SentenceScoreRecord

DATASET_FORMAT = "tokenaudit-dataset"
DATASET_VERSION = 1


def sig6(x: float) -> float:
    """Round to 6 significant digits (the on-disk float precision for scores)."""
    return float(f"{x:.6g}")


def _dump(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_dataset(ds: Dataset, out: IO[str]) -> None:
    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "classes": list(ds.label_space.classes),
        "other_class": ds.label_space.other_class,
    }
    out.write(_dump(header) + "\n")
    for sent, probs in zip(ds.sentences, ds.probs):
        rec: dict = {
            "id": sent.id,
            "tokens": list(sent.tokens),
            "given_labels": list(sent.given_labels),
        }
        if sent.true_labels is not None:
            rec["true_labels"] = list(sent.true_labels)
        rec["probs"] = None if probs is None else [float(p) for p in probs.ravel()]
        if sent.char_spans is not None:
            rec["char_spans"] = [list(span) for span in sent.char_spans]
        out.write(_dump(rec) + "\n")


def json_lines(inp: IO[str]) -> Iterator[tuple[int, dict]]:
    for line_no, line in enumerate(inp, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {line_no}: not valid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise ValueError(f"line {line_no}: expected an object")
        yield line_no, obj


def read_dataset(inp: IO[str]) -> Dataset:
    lines = json_lines(inp)
    try:
        _, header = next(lines)
    except StopIteration:
        raise ValueError("empty dataset file: missing header line") from None
    if header.get("format") != DATASET_FORMAT:
        raise ValueError(f"not a dataset file: format={header.get('format')!r}")
    if header.get("version") != DATASET_VERSION:
        raise ValueError(f"unsupported dataset version {header.get('version')!r}")
    space = LabelSpace(classes=tuple(header["classes"]), other_class=header["other_class"])
    k = len(space)

    sentences: list[TokenizedSentence] = []
    probs: list[np.ndarray | None] = []
    for line_no, rec in lines:
        try:
            tokens = tuple(rec["tokens"])
            sent = TokenizedSentence(
                id=int(rec["id"]),
                tokens=tokens,
                given_labels=tuple(rec["given_labels"]),
                true_labels=tuple(rec["true_labels"]) if rec.get("true_labels") is not None else None,
                char_spans=tuple(tuple(s) for s in rec["char_spans"]) if rec.get("char_spans") is not None else None,
            )
        except KeyError as exc:
            raise ValueError(f"line {line_no}: missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ValueError(f"line {line_no}: {exc}") from None
        flat = rec.get("probs")
        if flat is None:
            probs.append(None)
        else:
            if len(flat) != sent.n * k:
                raise ValueError(
                    f"line {line_no}: probs has {len(flat)} floats, expected {sent.n}*{k}"
                )
            probs.append(np.asarray(flat, dtype=np.float64).reshape(sent.n, k))
        sentences.append(sent)
    try:
        return Dataset(label_space=space, sentences=tuple(sentences), probs=tuple(probs))
    except ValueError as exc:
        raise ValueError(f"invalid dataset file: {exc}") from None


def read_subword_probs(inp: IO[str], k: int) -> dict[int, SubwordProbs]:
    """Read {id, spans, probs} records; probs are nested m x K rows."""
    out: dict[int, SubwordProbs] = {}
    for line_no, rec in json_lines(inp):
        try:
            sid = int(rec["id"])
            spans = tuple(tuple(s) for s in rec["spans"])
            values = np.asarray(rec["probs"], dtype=np.float64)
        except KeyError as exc:
            raise ValueError(f"line {line_no}: missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ValueError(f"line {line_no}: {exc}") from None
        if sid in out:
            raise ValueError(f"line {line_no}: duplicate sentence id {sid}")
        if values.ndim != 2 or values.shape[1] != k:
            raise ValueError(f"line {line_no}: probs must be m x {k} rows, got shape {values.shape}")
        try:
            out[sid] = SubwordProbs(spans=spans, values=values)
        except ValueError as exc:
            raise ValueError(f"line {line_no}: {exc}") from None
    return out


def read_word_probs(inp: IO[str], k: int) -> dict[int, np.ndarray]:
    """Read {id, probs} records with probs as nested n x K word-level rows."""
    out: dict[int, np.ndarray] = {}
    for line_no, rec in json_lines(inp):
        try:
            sid = int(rec["id"])
            values = np.asarray(rec["probs"], dtype=np.float64)
        except KeyError as exc:
            raise ValueError(f"line {line_no}: missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ValueError(f"line {line_no}: {exc}") from None
        if sid in out:
            raise ValueError(f"line {line_no}: duplicate sentence id {sid}")
        if values.ndim != 2 or values.shape[1] != k:
            raise ValueError(f"line {line_no}: probs must be n x {k} rows, got shape {values.shape}")
        out[sid] = values
    return out


def write_scores(records: Iterable[SentenceScoreRecord], out: IO[str]) -> None:
    for r in records:
        rec = {
            "sentence_id": r.sentence_id,
            "method": r.method,
            "token_method": r.token_method,
            "score": sig6(r.score),
            "worst_token_index": r.worst_token_index,
        }
        out.write(_dump(rec) + "\n")


def read_scores(inp: IO[str]) -> list[SentenceScoreRecord]:
    out = []
    for line_no, rec in json_lines(inp):
        try:
            out.append(
                SentenceScoreRecord(
                    sentence_id=int(rec["sentence_id"]),
                    method=rec["method"],
                    token_method=rec["token_method"],
                    score=float(rec["score"]),
                    worst_token_index=rec["worst_token_index"],
                )
            )
        except KeyError as exc:
            raise ValueError(f"line {line_no}: missing field {exc.args[0]!r}") from None
    return out


def write_report(records: Iterable[dict], out: IO[str]) -> None:
    for rec in records:
        out.write(_dump(rec) + "\n")


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
