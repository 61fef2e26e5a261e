"""Command-line pipeline: ingest -> pool -> score -> eval -> report -> serve.

Every stage reads and writes the canonical line-delimited dataset format, so
stages compose through files and each is testable alone. Data goes to files
or standard output; all diagnostics go to standard error. Exit codes: 0 on
success, 2 for usage problems and missing files, 1 for parse/data errors.
"""

from __future__ import annotations

import argparse
import contextlib
import sys
from dataclasses import replace
from typing import IO, Iterator

import numpy as np

from . import io as taio
from .dataset import (
    ConllParseError,
    Dataset,
    attach_true_labels,
    detokenize,
    mark_errors,
    merge_prefixes,
    parse_conll,
    preprocess,
)
from .labels import CONLL2003_CLASSES, LabelSpace
from .metrics import (
    EvalInput,
    auprc,
    auroc,
    eval_input_for,
    lift_at_errors,
    noise_matrix,
    precision_at_k,
)
from .pooling import STRATEGIES, AlignmentError, align, pool
from .sentence_scores import METHODS, ScoreConfig, score_all
from .token_scores import TOKEN_METHODS

EVAL_METRICS = ("auroc", "auprc", "lift", "precision")


@contextlib.contextmanager
def _open_out(path: str | None) -> Iterator[IO[str]]:
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as f:
            yield f


def _read_dataset(path: str) -> Dataset:
    with open(path, encoding="utf-8") as f:
        return taio.read_dataset(f)


def _score_config(args: argparse.Namespace) -> ScoreConfig:
    overrides = {
        name: getattr(args, name)
        for name in ("tie_epsilon", "product_offset", "expected_depth", "flag_penalty", "softmin_temperature")
        if getattr(args, name, None) is not None
    }
    return ScoreConfig(**overrides)


def _add_score_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scoring hyperparameters")
    g.add_argument("--tie-epsilon", type=float, dest="tie_epsilon", help="tie-break weight in bad-token-counts-avg/min")
    g.add_argument("--product-offset", type=float, dest="product_offset", help="offset c in the product method")
    g.add_argument("--expected-depth", type=int, dest="expected_depth", help="depth J of expected-bad / expected-alt")
    g.add_argument("--flag-penalty", type=float, dest="flag_penalty", help="penalty d in worst-token-min-alt")
    g.add_argument("--softmin-temperature", type=float, dest="softmin_temperature", help="temperature t in worst-token-softmin")


def _method_pairs(method: str, token_score: str | None) -> list[tuple[str, str | None]]:
    """Expand --method/--token-score into (method, token_method) pairs.

    "all" walks the standard layout: every non-variant method, quality-based
    ones crossed with every token method (or just the requested one).
    """
    if method == "all":
        token_methods = [token_score] if token_score else list(TOKEN_METHODS)
        pairs: list[tuple[str, str | None]] = []
        for name, spec in METHODS.items():
            if spec.variant:
                continue
            if spec.uses_quality:
                pairs.extend((name, t) for t in token_methods)
            else:
                pairs.append((name, None))
        return pairs
    spec = METHODS[method]
    if spec.uses_quality:
        return [(method, token_score or "self-confidence")]
    return [(method, None)]


def _check_method(parser: argparse.ArgumentParser, method: str) -> None:
    if method != "all" and method not in METHODS:
        parser.error(f"unknown method {method!r}; valid: all, {', '.join(METHODS)}")


def _check_token_score(parser: argparse.ArgumentParser, token_score: str | None) -> None:
    if token_score is not None and token_score not in TOKEN_METHODS:
        parser.error(f"unknown token score {token_score!r}; valid: {', '.join(TOKEN_METHODS)}")


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace) -> int:
    if args.classes:
        space = LabelSpace.from_names([c.strip() for c in args.classes.split(",")], other=args.other)
    else:
        space = LabelSpace.from_names(list(CONLL2003_CLASSES), other=args.other)

    with open(args.conll, encoding="utf-8") as f:
        sentences = parse_conll(f, space)
    if args.true_conll:
        with open(args.true_conll, encoding="utf-8") as f:
            corrected = parse_conll(f, space)
        sentences = attach_true_labels(sentences, corrected)

    n_before = len(sentences)
    if args.no_preprocess:
        if args.subword_probs:
            # alignment needs character spans; assign them without cleanup
            sentences = [replace(s, char_spans=detokenize(s.tokens)[1]) for s in sentences]
    else:
        sentences = preprocess(sentences)
    print(f"kept {len(sentences)} of {n_before} sentences ({n_before - len(sentences)} dropped)", file=sys.stderr)

    probs: list[np.ndarray | None]
    if args.subword_probs:
        with open(args.subword_probs, encoding="utf-8") as f:
            subword = taio.read_subword_probs(f, len(space))
        probs = []
        for s in sentences:
            if s.id not in subword:
                raise ValueError(f"sentence {s.id} missing from subword probability file {args.subword_probs!r}")
            alignment = align(s.char_spans, subword[s.id].spans, words=s.tokens)
            probs.append(pool(subword[s.id], alignment, strategy=args.pool))
    elif args.word_probs:
        with open(args.word_probs, encoding="utf-8") as f:
            word = taio.read_word_probs(f, len(space))
        probs = []
        for s in sentences:
            if s.id not in word:
                raise ValueError(f"sentence {s.id} missing from probability file {args.word_probs!r}")
            probs.append(word[s.id])
    else:
        probs = [None] * len(sentences)

    ds = Dataset.from_sentences(space, sentences, probs)
    if args.merge_prefixes:
        ds = merge_prefixes(ds)
    with _open_out(args.output) as out:
        taio.write_dataset(ds, out)
    return 0


# ---------------------------------------------------------------------------
# pool (attach subword probabilities to an existing dataset file)
# ---------------------------------------------------------------------------

def cmd_pool(args: argparse.Namespace) -> int:
    ds = _read_dataset(args.dataset)
    with open(args.subword_probs, encoding="utf-8") as f:
        subword = taio.read_subword_probs(f, len(ds.label_space))
    probs = []
    for s in ds.sentences:
        if s.id not in subword:
            raise ValueError(f"sentence {s.id} missing from subword probability file {args.subword_probs!r}")
        if s.char_spans is None:
            raise ValueError(f"sentence {s.id} has no char_spans; ingest without --no-preprocess first")
        alignment = align(s.char_spans, subword[s.id].spans, words=s.tokens)
        probs.append(pool(subword[s.id], alignment, strategy=args.strategy))
    out_ds = Dataset(label_space=ds.label_space, sentences=ds.sentences, probs=tuple(probs))
    with _open_out(args.output) as out:
        taio.write_dataset(out_ds, out)
    return 0


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------

def cmd_score(args: argparse.Namespace) -> int:
    ds = _read_dataset(args.dataset)
    cfg = _score_config(args)
    if args.method == "all":
        token_methods = [args.token_score] if args.token_score else None
        records = score_all(ds, token_methods=token_methods, cfg=cfg)
    else:
        pairs = _method_pairs(args.method, args.token_score)
        token_methods = sorted({t for _, t in pairs if t is not None})
        records = score_all(ds, token_methods=token_methods, cfg=cfg, methods=[args.method])
    with _open_out(args.output) as out:
        taio.write_scores(records, out)
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args: argparse.Namespace) -> int:
    ds = _read_dataset(args.dataset)
    cfg = _score_config(args)
    wanted = [m.strip() for m in args.metrics.split(",")]
    for m in wanted:
        if m not in EVAL_METRICS:
            raise ValueError(f"unknown metric {m!r}; valid: {', '.join(EVAL_METRICS)}")
    ks = [int(k) for k in args.ks.split(",")] if args.ks else []
    if "precision" in wanted and not ks:
        raise ValueError("--metrics precision needs --ks")

    if args.unit == "token":
        token_methods = [args.token_score] if args.token_score else list(TOKEN_METHODS)
        pairs: list[tuple[str | None, str | None]] = [(None, t) for t in token_methods]
    else:
        pairs = list(_method_pairs(args.method, args.token_score))

    records = []
    for method, token_method in pairs:
        e = eval_input_for(ds, method, token_method, cfg=cfg, unit=args.unit)
        rec: dict = {
            "method": method,
            "token_method": token_method,
            "unit": args.unit,
            "n_positives": e.n_positives,
        }
        if "auroc" in wanted:
            rec["auroc"] = taio.sig6(auroc(e))
        if "auprc" in wanted:
            rec["auprc"] = taio.sig6(auprc(e))
        if "lift" in wanted:
            rec["lift_at_errors"] = taio.sig6(lift_at_errors(e, args.top_t))
        if "precision" in wanted:
            rec["precision_at_k"] = [[k, taio.sig6(p)] for k, p in precision_at_k(e, ks)]
        records.append(rec)
    with _open_out(args.output) as out:
        taio.write_report(records, out)
    return 0


# ---------------------------------------------------------------------------
# report (render eval output and/or the noise matrix as aligned text)
# ---------------------------------------------------------------------------

def _render_table(rows: list[list[str]], header: list[str]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    def fmt(cells: list[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    rule = "  ".join("-" * w for w in widths)
    return "\n".join([fmt(header), rule] + [fmt(r) for r in rows]) + "\n"


_METRIC_COLUMNS = (("auroc", "auroc"), ("auprc", "auprc"), ("lift_at_errors", "lift"))


def _render_report(records: list[dict]) -> str:
    metric_keys = [key for key, _ in _METRIC_COLUMNS if any(key in r for r in records)]
    header = ["method", "token score"] + [label for key, label in _METRIC_COLUMNS if key in metric_keys]
    rows = []
    prev_method = None
    for r in records:
        method = r.get("method") or f"token-level ({r['unit']})"
        cells = [method if method != prev_method else "", r.get("token_method") or ""]
        prev_method = method
        for key in metric_keys:
            cells.append(f"{r[key]:.4f}" if key in r else "")
        rows.append(cells)
    out = _render_table(rows, header)

    if any("precision_at_k" in r for r in records):
        prows = []
        for r in records:
            for k, p in r.get("precision_at_k", []):
                prows.append([r.get("method") or "token-level", r.get("token_method") or "", str(k), f"{p:.4f}"])
        out += "\nprecision @ K\n" + _render_table(prows, ["method", "token score", "k", "precision"])
    return out


def _render_noise_matrix(ds: Dataset) -> str:
    nm = noise_matrix(ds)
    header = ["true \\ given"] + list(nm.classes) + ["support"]
    rows = []
    for i, name in enumerate(nm.classes):
        cells = [name]
        for j in range(len(nm.classes)):
            v = nm.percentages[i, j]
            cells.append("-" if np.isnan(v) else f"{v:.2f}")
        cells.append(str(int(nm.support[i])))
        rows.append(cells)
    return _render_table(rows, header)


def cmd_report(args: argparse.Namespace) -> int:
    if not args.report and not args.noise:
        raise ValueError("nothing to report: pass --report FILE and/or --noise --dataset FILE")
    chunks = []
    if args.report:
        with open(args.report, encoding="utf-8") as f:
            records = [rec for _, rec in taio.json_lines(f)]
        chunks.append(_render_report(records))
    if args.noise:
        if not args.dataset:
            raise ValueError("--noise needs --dataset")
        chunks.append("label noise between true and given classes (% of true-class tokens)\n"
                      + _render_noise_matrix(_read_dataset(args.dataset)))
    with _open_out(args.output) as out:
        out.write("\n".join(chunks))
    return 0


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------

def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .review import create_app

    app = create_app(args.dataset, args.scores, args.state, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokenaudit",
        description="Find, rank and review likely label errors in token classification data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse CoNLL text (+probabilities) into the canonical dataset file")
    p.add_argument("--conll", required=True, help="CoNLL column file with the given labels")
    p.add_argument("--true-conll", help="parallel CoNLL file with corrected labels (ground truth)")
    p.add_argument("--subword-probs", help="subword probability file to pool into word-level rows")
    p.add_argument("--word-probs", help="word-level probability file (already pooled)")
    p.add_argument("--pool", choices=STRATEGIES, default="average", help="pooling strategy for --subword-probs")
    p.add_argument("--merge-prefixes", action="store_true", help="collapse B-/I- classes into entity classes")
    p.add_argument("--no-preprocess", action="store_true", help="skip recasing/cleanup/drops")
    p.add_argument("--classes", help="comma-separated class names (default: the 9 CoNLL-2003 classes)")
    p.add_argument("--other", default="O", help="name of the non-entity class (default: O)")
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("pool", help="pool a subword probability file into an existing dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--subword-probs", required=True)
    p.add_argument("--strategy", choices=STRATEGIES, default="average")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("score", help="compute sentence label-quality scores")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", default="worst-token", help="sentence method name, or 'all'")
    p.add_argument("--token-score", help=f"token method ({', '.join(TOKEN_METHODS)})")
    _add_score_config_flags(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="evaluate methods against the true labels")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", default="all", help="sentence method name, or 'all'")
    p.add_argument("--token-score", help="restrict to one token method")
    p.add_argument("--unit", choices=("sentence", "token"), default="sentence")
    p.add_argument("--metrics", default="auroc,auprc,lift", help="comma list of: auroc, auprc, lift, precision")
    p.add_argument("--top-t", type=int, dest="top_t", help="T for lift (default: number of positives)")
    p.add_argument("--ks", help="comma list of K values for precision@K")
    _add_score_config_flags(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render eval output (and/or the noise matrix) as text tables")
    p.add_argument("--report", help="eval output file to render")
    p.add_argument("--noise", action="store_true", help="include the label noise matrix")
    p.add_argument("--dataset", help="dataset file (for --noise)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="serve the review API and UI")
    p.add_argument("--dataset", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--state", required=True, help="review state file (created if absent)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", dest="ui_dir", help="directory with the built UI bundle")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command in ("score", "eval"):
        _check_method(parser, args.method)
        _check_token_score(parser, args.token_score)

    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except ConllParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (AlignmentError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
