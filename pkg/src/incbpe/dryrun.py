"""Scripted incremental-BPE loop without a translation model.

Learns an initial merge table on a synthetic corpus, replays a synthetic
validation-loss trace through the schedule, and on every increment extends
the merges, re-segments the corpus and grows one embedding file per
initialization strategy. Every step goes through the ``incbpe`` CLI, and
the invariants that must hold between steps are checked as it runs.

    python -m incbpe.dryrun OUTDIR
"""

from __future__ import annotations

import contextlib
import json
import random
import sys
from pathlib import Path

from . import bpe
from .cli import default_seed, main
from .embeddings import read_embeddings
from .schedule import read_loss_trace, replay_with_state, write_loss_trace, ScheduleConfig

LADDER = (100, 200, 300, 400)

# Hand-checked against the schedule rules (threshold 0.05, burn-in 3, patience 10):
# increments at epochs 3, 7 and 11; first loss increase at epoch 12; stop at epoch 22.
TRACE = [
    6.0, 5.0, 4.98, 4.5, 4.0, 3.5, 3.49, 3.0, 2.5, 2.0, 1.99,
    2.3, 2.2, 2.1, 2.0, 1.9, 1.8, 1.7, 1.6, 1.5, 1.4, 1.3,
    1.2, 1.1,
]
EXPECTED_FINAL_OPS = 400

SYLLABLES = ["ka", "to", "ri", "ne", "su", "mo", "la", "pe", "di", "vu", "shi", "zan", "or", "el", "qu"]


def synthetic_corpus(rng: random.Random, n_types=600, n_sents=1500) -> list[list[str]]:
    """Sentences over a Zipf-ish vocabulary of syllable compounds."""
    words = set()
    while len(words) < n_types:
        words.add("".join(rng.choice(SYLLABLES) for _ in range(rng.randint(1, 4))))
    vocab = sorted(words)
    rng.shuffle(vocab)
    weights = [1.0 / (i + 1) for i in range(len(vocab))]
    return [rng.choices(vocab, weights, k=rng.randint(3, 12)) for _ in range(n_sents)]


class DryRunError(AssertionError):
    pass


def _check(cond, msg):
    if not cond:
        raise DryRunError(msg)


def _run(*argv) -> None:
    with contextlib.redirect_stdout(sys.stderr):
        status = main([str(a) for a in argv])
    _check(status == 0, f"incbpe {argv[0]} exited with {status}")


def dry_run(outdir, dim: int = 500, strategies=("rand", "avg", "ae")) -> dict:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(default_seed())
    sentences = synthetic_corpus(rng)
    corpus = out / "corpus.txt"
    corpus.write_text("".join(" ".join(s) + "\n" for s in sentences), encoding="utf-8")

    write_loss_trace(TRACE, out / "trace.jsonl")
    (out / "schedule.json").write_text(json.dumps({"increments": list(LADDER)}), encoding="utf-8")
    _run("schedule", "--trace", out / "trace.jsonl", "--config", out / "schedule.json", "--out", out / "decisions.jsonl")
    decisions = [json.loads(l) for l in (out / "decisions.jsonl").read_text().splitlines()]
    # the file log must agree with an in-process replay of the same trace
    lib, state = replay_with_state(ScheduleConfig(increments=LADDER), read_loss_trace(out / "trace.jsonl"))
    _check([d["decision"] for d in decisions] == [d.kind for d in lib], "decision log differs from replay")

    merges = out / f"merges.{LADDER[0]}.txt"
    _run("learn", "--corpus", corpus, "--ops", LADDER[0], "--out", merges, "--report-step", 0)
    table = bpe.read_merges(merges)
    _check(len(table) == LADDER[0], "initial merge count")
    _run("init-embed", "--merges", merges, "--corpus", corpus, "--dim", dim, "--out", out / "embed.init.txt")
    embeds = {s: out / "embed.init.txt" for s in strategies}

    alphabet = {ch for s in sentences for w in s for ch in w}
    ops = len(table)
    for d in decisions:
        if d["decision"] != "increment":
            continue
        target = d["target_ops"]
        new_merges = out / f"merges.{target}.txt"
        diff = out / f"diff.{target}.jsonl"
        _run("extend", "--corpus", corpus, "--merges", merges, "--add", target - ops, "--out", new_merges, "--diff-out", diff)
        old_table, table = table, bpe.read_merges(new_merges)
        _check(old_table.is_prefix_of(table), f"merges at {ops} are not a prefix of merges at {target}")
        _check(table == bpe.learn_merges(bpe.word_frequencies(sentences), target), "extension differs from relearning")
        _check(len(table) == target, f"expected {target} merges, got {len(table)}")

        seg = out / f"corpus.seg.{target}.txt"
        _run("apply", "--corpus", corpus, "--merges", new_merges, "--out", seg)
        _run("detok", "--corpus", seg, "--out", out / f"corpus.detok.{target}.txt")
        _check((out / f"corpus.detok.{target}.txt").read_bytes() == corpus.read_bytes(), "round trip failed")

        for strategy in strategies:
            grown = out / f"embed.{strategy}.{target}.txt"
            extra = ["--ae-checkpoint", out / f"ae.{strategy}.bin"] if strategy == "ae" else []
            _run("grow-embed", "--embed", embeds[strategy], "--diff", diff, "--strategy", strategy, "--out", grown, *extra)
            before = embeds[strategy].read_bytes()
            _check(grown.read_bytes().startswith(before), f"{strategy}: existing rows changed")
            matrix = read_embeddings(grown)
            _check(set(matrix.symbols) == bpe.symbol_inventory(table, target, alphabet), f"{strategy}: rows differ from inventory")
            embeds[strategy] = grown
        merges, ops = new_merges, target

    _check(ops == state.current_ops == EXPECTED_FINAL_OPS, f"final inventory {ops}, expected {EXPECTED_FINAL_OPS}")
    return {
        "final_ops": ops,
        "epochs": len(decisions),
        "increments": sum(d["decision"] == "increment" for d in decisions),
        "stopped": decisions[-1]["decision"] == "stop" if decisions else False,
        "embedding_files": {s: str(p) for s, p in embeds.items()},
    }


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print("usage: python -m incbpe.dryrun OUTDIR", file=sys.stderr)
        sys.exit(2)
    print(json.dumps(dry_run(sys.argv[1]), indent=2))
