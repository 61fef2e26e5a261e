import io
import json
from dataclasses import replace

import numpy as np
import pytest

from tokenaudit.dataset import Dataset
from tokenaudit.io import (
    file_sha256,
    read_dataset,
    read_scores,
    read_subword_probs,
    read_word_probs,
    sig6,
    write_dataset,
    write_report,
    write_scores,
)
from tokenaudit.sentence_scores import SentenceScoreRecord

from conftest import make_dataset, make_sentence, random_probs


def roundtrip(ds: Dataset) -> tuple[str, Dataset]:
    buf = io.StringIO()
    write_dataset(ds, buf)
    return buf.getvalue(), read_dataset(io.StringIO(buf.getvalue()))


def test_sig6():
    assert sig6(0.123456789) == 0.123457
    assert sig6(2 / 3) == 0.666667
    assert sig6(-1.23456789e-5) == -1.23457e-05
    assert sig6(0.0) == 0.0
    assert sig6(-3.0) == -3.0


def test_dataset_round_trip_exact(two_class, rng):
    ds = make_dataset(two_class, [[0, 1, 0], [1, 1]], true_seqs=[[0, 0, 0], [1, 0]], seed=5)
    text, back = roundtrip(ds)
    assert back.label_space == ds.label_space
    assert back.sentences == ds.sentences
    # full precision on disk: probabilities come back bit for bit
    for a, b in zip(ds.probs, back.probs):
        assert np.array_equal(a, b)
    np.testing.assert_allclose(
        np.concatenate([p.sum(axis=1) for p in back.probs]), 1.0, atol=1e-12
    )


def test_dataset_round_trip_optional_fields(two_class):
    plain = make_sentence(0, [0, 1], tokens=["abc", "defg"])
    spanned = replace(plain, id=1, char_spans=((0, 3), (4, 8)))
    ds = Dataset.from_sentences(two_class, [plain, spanned], [None, None])
    text, back = roundtrip(ds)
    assert back.sentences == ds.sentences
    assert back.probs == (None, None)
    first_record = json.loads(text.splitlines()[1])
    assert "true_labels" not in first_record
    assert "char_spans" not in first_record
    assert first_record["probs"] is None


def test_dataset_write_is_deterministic(two_class):
    ds = make_dataset(two_class, [[0, 1], [1]], seed=9)
    a, _ = roundtrip(ds)
    b, _ = roundtrip(ds)
    assert a == b


def test_dataset_header_line(two_class):
    text, _ = roundtrip(make_dataset(two_class, [[0]]))
    header = json.loads(text.splitlines()[0])
    assert header == {
        "format": "tokenaudit-dataset",
        "version": 1,
        "classes": ["O", "ENT"],
        "other_class": 0,
    }


def test_read_dataset_header_errors():
    with pytest.raises(ValueError, match="missing header"):
        read_dataset(io.StringIO(""))
    with pytest.raises(ValueError, match="not a dataset file"):
        read_dataset(io.StringIO('{"format":"something-else","version":1}\n'))
    bad_version = '{"format":"tokenaudit-dataset","version":99,"classes":["O"],"other_class":0}\n'
    with pytest.raises(ValueError, match="version"):
        read_dataset(io.StringIO(bad_version))


HEADER = '{"format":"tokenaudit-dataset","version":1,"classes":["O","ENT"],"other_class":0}\n'


def test_read_dataset_record_errors():
    with pytest.raises(ValueError, match="line 2: missing field 'tokens'"):
        read_dataset(io.StringIO(HEADER + '{"id":0,"given_labels":[0]}\n'))
    with pytest.raises(ValueError, match="line 2: not valid JSON"):
        read_dataset(io.StringIO(HEADER + "{oops\n"))
    with pytest.raises(ValueError, match="line 2: expected an object"):
        read_dataset(io.StringIO(HEADER + "[1,2]\n"))
    short = '{"id":0,"tokens":["a"],"given_labels":[0],"probs":[0.5,0.25,0.25]}\n'
    with pytest.raises(ValueError, match=r"line 2: probs has 3 floats, expected 1\*2"):
        read_dataset(io.StringIO(HEADER + short))
    dup = '{"id":0,"tokens":["a"],"given_labels":[0],"probs":null}\n'
    with pytest.raises(ValueError, match="invalid dataset file"):
        read_dataset(io.StringIO(HEADER + dup + dup))


def test_score_file_round_trip():
    records = [
        SentenceScoreRecord(0, "worst-token", "self-confidence", 0.123456789, 3),
        SentenceScoreRecord(1, "bad-token-counts", None, -2.0, None),
    ]
    buf = io.StringIO()
    write_scores(records, buf)
    lines = buf.getvalue().splitlines()
    # stable field order keeps score files diffable
    assert list(json.loads(lines[0])) == [
        "sentence_id",
        "method",
        "token_method",
        "score",
        "worst_token_index",
    ]
    back = read_scores(io.StringIO(buf.getvalue()))
    assert back[0] == replace(records[0], score=sig6(records[0].score))
    assert back[1] == records[1]

    with pytest.raises(ValueError, match="missing field 'score'"):
        read_scores(io.StringIO('{"sentence_id":0,"method":"x","token_method":null}\n'))


def test_subword_probs_reader(rng):
    values = random_probs(rng, 2, 3)
    rec = {"id": 4, "spans": [[0, 2], [2, 5]], "probs": values.tolist()}
    out = read_subword_probs(io.StringIO(json.dumps(rec) + "\n"), k=3)
    assert set(out) == {4}
    assert out[4].spans == ((0, 2), (2, 5))
    np.testing.assert_allclose(out[4].values, values, atol=1e-15)

    two = json.dumps(rec) + "\n" + json.dumps(rec) + "\n"
    with pytest.raises(ValueError, match="line 2: duplicate sentence id 4"):
        read_subword_probs(io.StringIO(two), k=3)
    with pytest.raises(ValueError, match=r"m x 4 rows"):
        read_subword_probs(io.StringIO(json.dumps(rec) + "\n"), k=4)
    bad_spans = dict(rec, spans=[[2, 5], [0, 2]])
    with pytest.raises(ValueError, match="line 1: subword spans must be sorted"):
        read_subword_probs(io.StringIO(json.dumps(bad_spans) + "\n"), k=3)


def test_word_probs_reader(rng):
    values = random_probs(rng, 3, 2)
    rec = {"id": 0, "probs": values.tolist()}
    out = read_word_probs(io.StringIO(json.dumps(rec) + "\n"), k=2)
    np.testing.assert_allclose(out[0], values, atol=1e-15)
    with pytest.raises(ValueError, match="n x 3 rows"):
        read_word_probs(io.StringIO(json.dumps(rec) + "\n"), k=3)
    with pytest.raises(ValueError, match="missing field 'probs'"):
        read_word_probs(io.StringIO('{"id":0}\n'), k=2)


def test_write_report_preserves_order():
    buf = io.StringIO()
    write_report([{"method": "worst-token", "auroc": 0.75, "n_positives": 2}], buf)
    assert buf.getvalue() == '{"method":"worst-token","auroc":0.75,"n_positives":2}\n'


def test_file_sha256(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"abc")
    assert file_sha256(str(p)) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
