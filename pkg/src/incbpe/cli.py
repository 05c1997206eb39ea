"""``incbpe`` command line.

Exit status: 0 on success, 1 when an input violates a contract (inconsistent
merges, missing components, out-of-range counts, misaligned corpora), 2 on
I/O or parse failures. Diagnostics go to stderr; outputs are written to a
temporary file and renamed into place, so a failed command leaves nothing
behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

from . import bpe, embeddings, metrics, schedule
from ._io import atomic_writer, read_lines, write_lines
from .errors import IncBPEError, MalformedInputError

EXIT_OK = 0
EXIT_CONTRACT = 1
EXIT_IO = 2


class UsageFailure(Exception):
    def __init__(self, message, status=EXIT_CONTRACT):
        super().__init__(message)
        self.status = status


def default_seed() -> int:
    raw = os.environ.get("INCBPE_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageFailure(f"INCBPE_SEED must be an integer, got {raw!r}", EXIT_IO) from None


def diag(msg: str) -> None:
    print(f"incbpe: {msg}", file=sys.stderr)


def _require_readable(*paths) -> None:
    for p in paths:
        if p is None:
            continue
        path = Path(p)
        if not path.is_file() or not os.access(path, os.R_OK):
            raise UsageFailure(f"cannot read {p}", EXIT_IO)


def _require_writable_dir(*paths) -> None:
    for p in paths:
        if p is None:
            continue
        parent = Path(p).parent
        if not parent.is_dir():
            raise UsageFailure(f"output directory {parent} does not exist", EXIT_IO)


def _tokenize(lines):
    return [line.split() for line in lines]


def _join(sentences):
    return [" ".join(s) for s in sentences]


def _open_out(path):
    """Atomic writer for ``path``, or stdout when ``path`` is None or '-'."""
    if path is None or path == "-":
        class _Stdout:
            def __enter__(self):
                return sys.stdout

            def __exit__(self, *exc):
                sys.stdout.flush()
                return False

        return _Stdout()
    return atomic_writer(path)


def _vocab_size_report(freqs, table, checkpoints):
    rows = []
    for k in checkpoints:
        seg = bpe.Segmenter(table, k)
        types = set()
        for word in freqs:
            types.update(seg.tokens(word))
        rows.append((k, len(types)))
    return rows


def _checkpoints(n, step):
    points = list(range(step, n, step)) if step > 0 else []
    points.append(n)
    return points


# --- subcommands -------------------------------------------------------------


def cmd_learn(args) -> int:
    _require_readable(args.corpus)
    _require_writable_dir(args.out, args.vocab_out)
    if args.ops < 0:
        raise UsageFailure(f"--ops must be >= 0, got {args.ops}")
    sentences = _tokenize(read_lines(args.corpus))
    freqs = bpe.word_frequencies(sentences)
    if not freqs:
        raise UsageFailure(f"{args.corpus}: corpus has no words")
    table = bpe.learn_merges(freqs, args.ops)
    if len(table) < args.ops:
        diag(f"learned {len(table)} of {args.ops} merges; no pair occurs twice beyond that")
    bpe.write_merges(table, args.out)
    if args.vocab_out:
        bpe.write_vocab(bpe.vocab_counts(bpe.apply_to_corpus(sentences, table)), args.vocab_out)
    for k, size in _vocab_size_report(freqs, table, _checkpoints(len(table), args.report_step)):
        print(f"{k}\t{size}")
    return EXIT_OK


def _load_table_and_k(merges_path, k):
    table = bpe.read_merges(merges_path)
    if k is None:
        k = len(table)
    if k < 0 or k > len(table):
        raise UsageFailure(f"--k {k} exceeds the {len(table)} merges available in {merges_path}")
    return table, k


def cmd_apply(args) -> int:
    _require_readable(args.corpus, args.merges)
    _require_writable_dir(args.out, args.vocab_out)
    table, k = _load_table_and_k(args.merges, args.k)
    segmented = bpe.apply_to_corpus(_tokenize(read_lines(args.corpus)), table, k)
    write_lines(args.out, _join(segmented))
    if args.vocab_out:
        bpe.write_vocab(bpe.vocab_counts(segmented), args.vocab_out)
    return EXIT_OK


def cmd_detok(args) -> int:
    _require_readable(args.corpus)
    _require_writable_dir(args.out)
    out = []
    for lineno, line in enumerate(read_lines(args.corpus), start=1):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            out.append(" ".join(bpe.detokenize(line.split())))
        if caught:
            diag(f"{args.corpus}:{lineno}: trailing continuation marker; kept as-is")
    write_lines(args.out, out)
    return EXIT_OK


def diff_records(table, k_old, k_new):
    recs = []
    for rank, (sym, left, right) in enumerate(bpe.diff_inventory(table, k_old, k_new), start=k_old):
        recs.append({"rank": rank, "symbol": sym, "left": left, "right": right})
    return recs


def cmd_extend(args) -> int:
    _require_readable(args.corpus, args.merges)
    _require_writable_dir(args.out, args.diff_out)
    if args.add < 0:
        raise UsageFailure(f"--add must be >= 0, got {args.add}")
    base = bpe.read_merges(args.merges)
    freqs = bpe.word_frequencies(_tokenize(read_lines(args.corpus)))
    if not freqs:
        raise UsageFailure(f"{args.corpus}: corpus has no words")
    table = bpe.extend_merges(freqs, base, args.add)
    if len(table) - len(base) < args.add:
        diag(f"added {len(table) - len(base)} of {args.add} merges; no pair occurs twice beyond that")
    recs = diff_records(table, len(base), len(table))
    bpe.write_merges(table, args.out)
    with _open_out(args.diff_out) as fh:
        for rec in recs:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return EXIT_OK


def cmd_schedule(args) -> int:
    _require_readable(args.trace, args.config)
    _require_writable_dir(args.out)
    try:
        losses = schedule.read_loss_trace(args.trace)
    except MalformedInputError as exc:
        raise UsageFailure(f"{args.trace}: {exc}", EXIT_IO) from None
    config = schedule.ScheduleConfig.load(args.config) if args.config else schedule.ScheduleConfig()
    decisions, state = schedule.replay_with_state(config, losses)
    with _open_out(args.out) as fh:
        for line in schedule.decision_log_lines(decisions):
            fh.write(line + "\n")
    n_inc = sum(isinstance(d, schedule.Increment) for d in decisions)
    status = "stopped" if state.stopped else "running"
    diag(
        f"final inventory: {state.current_ops} merge operations "
        f"({n_inc} increments over {state.epoch} epochs, {status})"
    )
    return EXIT_OK


def read_diff(path):
    items = []
    for lineno, line in enumerate(read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            items.append((rec["symbol"], rec["left"], rec["right"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedInputError(f"{path}:{lineno}: bad diff record ({exc})") from None
    return items


def _strategy(args):
    seed = default_seed() if args.seed is None else args.seed
    if args.strategy == "rand":
        return embeddings.Rand(seed=seed, scale=args.scale)
    if args.strategy == "avg":
        return embeddings.Avg()
    return embeddings.AE(epochs=args.epochs, step_size=args.step_size, seed=seed, loss=args.ae_loss)


def cmd_grow_embed(args) -> int:
    _require_readable(args.embed, args.diff)
    _require_writable_dir(args.out, args.ae_checkpoint)
    raw = read_lines(args.embed)
    matrix = embeddings.parse_embeddings(raw, args.embed)
    items = read_diff(args.diff)
    strategy = _strategy(args)
    if isinstance(strategy, embeddings.AE) and args.ae_checkpoint and Path(args.ae_checkpoint).is_file():
        strategy.params[matrix.dim] = embeddings.load_autoencoder(args.ae_checkpoint)
    grown = embeddings.extend_matrix(matrix, items, strategy)
    with atomic_writer(args.out) as fh:
        for line in raw:
            fh.write(line + "\n")
        for sym, vec in zip(grown.symbols[len(matrix):], grown.vectors[len(matrix):]):
            fh.write(embeddings.format_row(sym, vec) + "\n")
    if isinstance(strategy, embeddings.AE) and strategy.last_losses is not None:
        first, last = strategy.last_losses
        diag(f"autoencoder reconstruction loss {first:.6g} -> {last:.6g} over {strategy.epochs} epochs")
        if args.ae_checkpoint:
            embeddings.save_autoencoder(strategy.params[matrix.dim], args.ae_checkpoint)
    diag(f"added {len(items)} rows ({args.strategy}); matrix now {len(grown)} x {grown.dim}")
    return EXIT_OK


def cmd_init_embed(args) -> int:
    _require_readable(args.merges, args.corpus)
    _require_writable_dir(args.out)
    table, k = _load_table_and_k(args.merges, args.k)
    alphabet = bpe.table_alphabet(table)
    if args.corpus:
        alphabet |= {ch for line in read_lines(args.corpus) for word in line.split() for ch in word}
    symbols = sorted(alphabet) + [sym for sym, _, _ in bpe.diff_inventory(table, 0, k) if sym not in alphabet]
    seen = set()
    symbols = [s for s in symbols if not (s in seen or seen.add(s))]
    seed = default_seed() if args.seed is None else args.seed
    matrix = embeddings.EmbeddingMatrix.random(symbols, args.dim, seed=seed, scale=args.scale)
    embeddings.write_embeddings(matrix, args.out)
    return EXIT_OK


def _read_corpus(path):
    return _tokenize(read_lines(path))


def analysis_report(hyp, ref, train_counts, buckets=metrics.RARE_BUCKETS, usage=None) -> dict:
    """Report dict for segmented or plain ``hyp``/``ref`` corpora."""
    if len(hyp) != len(ref):
        raise UsageFailure(f"hypothesis has {len(hyp)} lines but reference has {len(ref)}")
    hyp_words = [bpe.detokenize(s) for s in hyp]
    ref_words = [bpe.detokenize(s) for s in ref]
    report = {"unigram": metrics.corpus_unigram_f1(hyp_words, ref_words).to_json()}
    rare = metrics.rare_word_f1(hyp_words, ref_words, train_counts, buckets)
    report["rare_words"] = [r.to_json(bucket=n) for n, r in rare.items()]
    try:
        report["subwords_per_word"] = metrics.subwords_per_word(hyp).to_json()
    except metrics.UndefinedMeanError:
        report["subwords_per_word"] = None
    if usage is not None:
        report["inventory_usage"] = usage
    return report


def _usage_report(args, ref):
    if not (args.gen_before and args.gen_after):
        return None
    before = _read_corpus(args.gen_before)
    after = _read_corpus(args.gen_after)
    ref_after = _read_corpus(args.ref_after) if args.ref_after else ref
    if args.merges is None or args.k_old is None or args.k_new is None:
        raise UsageFailure("inventory usage needs --merges, --k-old and --k-new")
    table = bpe.read_merges(args.merges)
    if not 0 <= args.k_old <= args.k_new <= len(table):
        raise UsageFailure(f"need 0 <= --k-old <= --k-new <= {len(table)}")
    alphabet = bpe.table_alphabet(table)
    for corpus in (before, after, ref_after):
        alphabet |= {ch for t in metrics.subword_types(corpus) for ch in t}
    old_inv = bpe.symbol_inventory(table, args.k_old, alphabet)
    new_inv = bpe.symbol_inventory(table, args.k_new, alphabet)
    new_syms = {sym for sym, _, _ in bpe.diff_inventory(table, args.k_old, args.k_new)} - old_inv
    if len(after) != len(ref_after):
        raise UsageFailure(f"--gen-after has {len(after)} lines but the reference has {len(ref_after)}")
    nv = metrics.new_vocab_f1(after, ref_after, new_syms)
    rep = metrics.inventory_usage(
        metrics.subword_types(before),
        metrics.subword_types(after),
        metrics.subword_types(ref_after),
        old_inv,
        new_inv,
        (nv,),
    )
    return rep.to_json()


def cmd_analyze(args) -> int:
    _require_readable(
        args.hyp, args.ref, args.train_counts, args.train_corpus,
        args.gen_before, args.gen_after, args.ref_after, args.merges,
    )
    _require_writable_dir(args.out)
    if (args.train_counts is None) == (args.train_corpus is None):
        raise UsageFailure("give exactly one of --train-counts or --train-corpus", EXIT_IO)
    hyp = _read_corpus(args.hyp)
    ref = _read_corpus(args.ref)
    if args.train_counts:
        counts = bpe.read_vocab(args.train_counts)
    else:
        counts = bpe.word_frequencies(_read_corpus(args.train_corpus))
    buckets = [int(b) for b in args.buckets.split(",") if b.strip()] if args.buckets else []
    if len(hyp) != len(ref):
        raise UsageFailure(f"hypothesis has {len(hyp)} lines but reference has {len(ref)}")
    report = analysis_report(hyp, ref, counts, buckets, _usage_report(args, ref))
    with _open_out(args.out) as fh:
        fh.write(json.dumps(report, indent=2, ensure_ascii=False) + "\n")
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="incbpe", description="Incremental BPE toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="learn merge operations from a tokenized corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ops", type=int, required=True)
    p.add_argument("--out", required=True, help="merges file to write")
    p.add_argument("--vocab-out", help="also write symbol<TAB>count of the segmented corpus")
    p.add_argument("--report-step", type=int, default=10000, help="vocab-size report interval (0: final only)")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("apply", help="segment a corpus with the first K merges")
    p.add_argument("--corpus", required=True)
    p.add_argument("--merges", required=True)
    p.add_argument("--k", type=int, help="number of merges to apply (default: all)")
    p.add_argument("--out", required=True)
    p.add_argument("--vocab-out")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("extend", help="append merges to an existing merges file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--merges", required=True)
    p.add_argument("--add", type=int, default=10000, help="number of merges to add")
    p.add_argument("--out", required=True)
    p.add_argument("--diff-out", help="JSON-lines listing of new symbols (default: stdout)")
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("detok", help="join @@-marked pieces back into words")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detok)

    p = sub.add_parser("schedule", help="replay the growth schedule over a loss trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--config")
    p.add_argument("--out", help="decision log (default: stdout)")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("grow-embed", help="append rows for new symbols to an embedding file")
    p.add_argument("--embed", required=True)
    p.add_argument("--diff", required=True)
    p.add_argument("--strategy", choices=["rand", "avg", "ae"], default="ae")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=float, default=0.08)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--step-size", type=float, default=0.01)
    p.add_argument("--ae-loss", choices=["mse", "bce"], default="mse")
    p.add_argument("--ae-checkpoint", help="warm-start from and save the autoencoder here")
    p.set_defaults(func=cmd_grow_embed)

    p = sub.add_parser("init-embed", help="random embedding file for an inventory")
    p.add_argument("--merges", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--corpus", help="add every character of this corpus to the alphabet")
    p.add_argument("--dim", type=int, default=500)
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=float, default=0.08)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_embed)

    p = sub.add_parser("analyze", help="unigram / rare-word F1 and inventory usage")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--train-counts", help="word<TAB>count file")
    p.add_argument("--train-corpus", help="count words from this corpus instead")
    p.add_argument("--buckets", default="1,2,5")
    p.add_argument("--gen-before", help="segmented output before an increment")
    p.add_argument("--gen-after", help="segmented output after an increment")
    p.add_argument("--ref-after", help="reference segmented with the new inventory (default: --ref)")
    p.add_argument("--merges")
    p.add_argument("--k-old", type=int)
    p.add_argument("--k-new", type=int)
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageFailure as exc:
        diag(str(exc))
        return exc.status
    except (MalformedInputError, OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        diag(str(exc))
        return EXIT_IO
    except (IncBPEError, ValueError) as exc:
        diag(str(exc))
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
