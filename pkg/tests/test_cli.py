import json
import random
import subprocess
import sys

import pytest

from conftest import random_corpus, random_freqs
from incbpe import bpe, metrics
from incbpe.cli import main


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture
def tiny(tmp_path):
    return write(tmp_path / "corpus.txt", "ab ab ab\nabc abc\n")


def test_learn_writes_merges_and_report(tmp_path, tiny, capsys):
    out = tmp_path / "m.txt"
    assert main(["learn", "--corpus", tiny, "--ops", "2", "--out", str(out), "--report-step", "1"]) == 0
    assert out.read_text() == "#incbpe merges v1\na b\nab c\n"
    # vocabulary of the segmented training corpus: {a@@, b}, then {ab, ab@@, c}, then {ab, abc}
    assert capsys.readouterr().out == "1\t3\n2\t2\n"


def test_learn_report_sizes(tmp_path, tiny, capsys):
    out = tmp_path / "m.txt"
    main(["learn", "--corpus", tiny, "--ops", "1", "--out", str(out), "--report-step", "0"])
    assert capsys.readouterr().out == "1\t3\n"


def test_learn_zero_ops(tmp_path, tiny):
    out = tmp_path / "m.txt"
    assert main(["learn", "--corpus", tiny, "--ops", "0", "--out", str(out)]) == 0
    assert out.read_text() == "#incbpe merges v1\n"


def test_learn_unreadable_input(tmp_path, capsys):
    out = tmp_path / "m.txt"
    assert main(["learn", "--corpus", str(tmp_path / "missing.txt"), "--ops", "2", "--out", str(out)]) == 2
    assert not out.exists()
    assert list(tmp_path.iterdir()) == []
    assert "cannot read" in capsys.readouterr().err


def test_learn_vocab_out(tmp_path, tiny):
    main(["learn", "--corpus", tiny, "--ops", "1", "--out", str(tmp_path / "m"), "--vocab-out", str(tmp_path / "v")])
    assert (tmp_path / "v").read_text() == "ab\t3\nab@@\t2\nc\t2\n"


@pytest.mark.parametrize("seed", range(8))
def test_apply_detok_roundtrip(tmp_path, seed):
    rng = random.Random(seed)
    freqs = random_freqs(rng)
    text = "".join(" ".join(s) + "\n" for s in random_corpus(rng, freqs))
    corpus = write(tmp_path / "c.txt", text)
    main(["learn", "--corpus", corpus, "--ops", "30", "--out", str(tmp_path / "m")])
    n = len(bpe.read_merges(tmp_path / "m"))
    for k in sorted({0, n // 2, n}):
        assert main(["apply", "--corpus", corpus, "--merges", str(tmp_path / "m"), "--k", str(k), "--out", str(tmp_path / "s")]) == 0
        assert main(["detok", "--corpus", str(tmp_path / "s"), "--out", str(tmp_path / "d")]) == 0
        assert (tmp_path / "d").read_bytes() == text.encode("utf-8")


def test_apply_k_zero_and_empty(tmp_path, tiny):
    main(["learn", "--corpus", tiny, "--ops", "2", "--out", str(tmp_path / "m")])
    main(["apply", "--corpus", tiny, "--merges", str(tmp_path / "m"), "--k", "0", "--out", str(tmp_path / "s")])
    assert (tmp_path / "s").read_text() == "a@@ b a@@ b a@@ b\na@@ b@@ c a@@ b@@ c\n"
    empty = write(tmp_path / "empty.txt", "")
    main(["apply", "--corpus", empty, "--merges", str(tmp_path / "m"), "--out", str(tmp_path / "s2")])
    assert (tmp_path / "s2").read_text() == ""


def test_apply_k_too_large(tmp_path, tiny, capsys):
    main(["learn", "--corpus", tiny, "--ops", "2", "--out", str(tmp_path / "m")])
    assert main(["apply", "--corpus", tiny, "--merges", str(tmp_path / "m"), "--k", "5", "--out", str(tmp_path / "s")]) == 1
    assert "2 merges available" in capsys.readouterr().err
    assert not (tmp_path / "s").exists()


def test_detok_trailing_marker_reported(tmp_path, capsys):
    src = write(tmp_path / "s.txt", "a@@ b c@@\n")
    assert main(["detok", "--corpus", src, "--out", str(tmp_path / "d")]) == 0
    assert (tmp_path / "d").read_text() == "ab c@@\n"
    assert "trailing continuation marker" in capsys.readouterr().err


def test_extend(tmp_path, capsys):
    rng = random.Random(4)
    freqs = random_freqs(rng)
    corpus = write(tmp_path / "c.txt", "".join(" ".join(s) + "\n" for s in random_corpus(rng, freqs, 40)))
    main(["learn", "--corpus", corpus, "--ops", "5", "--out", str(tmp_path / "m5")])
    main(["learn", "--corpus", corpus, "--ops", "12", "--out", str(tmp_path / "m12")])
    capsys.readouterr()
    assert main(["extend", "--corpus", corpus, "--merges", str(tmp_path / "m5"), "--add", "7", "--out", str(tmp_path / "mx")]) == 0
    assert (tmp_path / "mx").read_bytes() == (tmp_path / "m12").read_bytes()
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert len(recs) == 7
    assert [r["rank"] for r in recs] == list(range(5, 12))
    assert all(r["symbol"] == r["left"] + r["right"] for r in recs)

    assert main(["extend", "--corpus", corpus, "--merges", str(tmp_path / "m5"), "--add", "0",
                 "--out", str(tmp_path / "m0"), "--diff-out", str(tmp_path / "diff0")]) == 0
    assert (tmp_path / "m0").read_bytes() == (tmp_path / "m5").read_bytes()
    assert (tmp_path / "diff0").read_text() == ""


def test_extend_inconsistent(tmp_path, tiny):
    merges = write(tmp_path / "m", "#incbpe merges v1\nb c\n")
    assert main(["extend", "--corpus", tiny, "--merges", merges, "--add", "1", "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists()


def trace_file(tmp_path, losses):
    return write(tmp_path / "trace.jsonl", "".join(json.dumps({"epoch": i + 1, "loss": l}) + "\n" for i, l in enumerate(losses)))


def test_schedule(tmp_path, capsys):
    trace = trace_file(tmp_path, [5.0, 4.0, 3.98])
    assert main(["schedule", "--trace", trace, "--out", str(tmp_path / "log")]) == 0
    log = [json.loads(l) for l in (tmp_path / "log").read_text().splitlines()]
    assert [r["decision"] for r in log] == ["continue", "continue", "increment"]
    assert log[2]["target_ops"] == 20000
    assert "final inventory: 20000" in capsys.readouterr().err


def test_schedule_empty_and_never_triggering(tmp_path, capsys):
    assert main(["schedule", "--trace", trace_file(tmp_path, [])]) == 0
    assert capsys.readouterr().out == ""
    assert main(["schedule", "--trace", trace_file(tmp_path, [9.0, 8.0, 7.0, 6.0])]) == 0
    assert {json.loads(l)["decision"] for l in capsys.readouterr().out.splitlines()} == {"continue"}


def test_schedule_config_file(tmp_path, capsys):
    cfg = write(tmp_path / "cfg.json", json.dumps({"increments": [100, 200], "burn_in_epochs": 0}))
    main(["schedule", "--trace", trace_file(tmp_path, [5.0, 4.99, 4.98]), "--config", cfg])
    out = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert [r["target_ops"] for r in out] == [None, 200, None]


def test_schedule_malformed_trace(tmp_path, capsys):
    trace = write(tmp_path / "t", '{"epoch": 1, "loss": 1.0}\n{"epoch": 2, "loss": }\n')
    assert main(["schedule", "--trace", trace, "--out", str(tmp_path / "log")]) == 2
    assert "line 2" in capsys.readouterr().err
    assert not (tmp_path / "log").exists()


EMBED = "#incbpe embed v1 2\na 1.0 2.0\nb 3.0 4.0\nc 0.5 -0.5\n"


def test_grow_embed_avg(tmp_path):
    embed = write(tmp_path / "e", EMBED)
    diff = write(tmp_path / "d", '{"rank": 0, "symbol": "ab", "left": "a", "right": "b"}\n'
                                 '{"rank": 1, "symbol": "abc", "left": "ab", "right": "c"}\n')
    assert main(["grow-embed", "--embed", embed, "--diff", diff, "--strategy", "avg", "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o").read_text().splitlines()
    assert "\n".join(lines[:4]) + "\n" == EMBED
    assert lines[4] == "ab 2.0 3.0"
    assert lines[5] == "abc 1.25 1.25"


def test_grow_embed_empty_diff(tmp_path):
    embed = write(tmp_path / "e", EMBED)
    diff = write(tmp_path / "d", "")
    assert main(["grow-embed", "--embed", embed, "--diff", diff, "--strategy", "rand", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o").read_bytes() == EMBED.encode()


def test_grow_embed_ae_logs_loss(tmp_path, capsys):
    embed = write(tmp_path / "e", EMBED)
    diff = write(tmp_path / "d", '{"symbol": "ab", "left": "a", "right": "b"}\n{"symbol": "bc", "left": "b", "right": "c"}\n')
    ckpt = tmp_path / "ae.bin"
    assert main(["grow-embed", "--embed", embed, "--diff", diff, "--strategy", "ae", "--out", str(tmp_path / "o"),
                 "--ae-checkpoint", str(ckpt)]) == 0
    err = capsys.readouterr().err
    line = next(l for l in err.splitlines() if "reconstruction loss" in l)
    first, last = (float(v) for v in line.split("loss ")[1].split(" over")[0].split(" -> "))
    assert last <= first
    assert ckpt.read_bytes()[:6] == b"INCAE1"


def test_grow_embed_missing_component(tmp_path, capsys):
    embed = write(tmp_path / "e", EMBED)
    diff = write(tmp_path / "d", '{"symbol": "aq", "left": "a", "right": "q"}\n')
    assert main(["grow-embed", "--embed", embed, "--diff", diff, "--strategy", "avg", "--out", str(tmp_path / "o")]) == 1
    assert "'q'" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_seed_env_overrides_default(tmp_path, monkeypatch):
    embed = write(tmp_path / "e", EMBED)
    diff = write(tmp_path / "d", '{"symbol": "ab", "left": "a", "right": "b"}\n')
    outs = []
    for seed in ("1", "1", "2"):
        monkeypatch.setenv("INCBPE_SEED", seed)
        out = tmp_path / f"o{len(outs)}"
        main(["grow-embed", "--embed", embed, "--diff", diff, "--strategy", "rand", "--out", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] != outs[2]


def test_analyze_identity_and_disjoint(tmp_path, capsys):
    ref = write(tmp_path / "ref", "the ca@@ t sat\nrare word\n")
    train = write(tmp_path / "train", "the cat sat rare once\n")
    assert main(["analyze", "--hyp", ref, "--ref", ref, "--train-corpus", train]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["unigram"]["f1"] == 1.0
    assert all(b["f1"] == 1.0 for b in rep["rare_words"] if b["n_ref_tokens"])
    assert rep["subwords_per_word"]["mean"] == pytest.approx(6 / 5)

    hyp = write(tmp_path / "hyp", "x y\nz\n")
    assert main(["analyze", "--hyp", hyp, "--ref", ref, "--train-corpus", train]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["unigram"]["f1"] == 0.0
    assert all(b["f1"] == 0.0 for b in rep["rare_words"])


def test_analyze_matches_library(tmp_path, capsys):
    rng = random.Random(2)
    freqs = random_freqs(rng)
    hyp_s = random_corpus(rng, freqs)
    ref_s = random_corpus(rng, freqs)
    hyp = write(tmp_path / "h", "".join(" ".join(s) + "\n" for s in hyp_s))
    ref = write(tmp_path / "r", "".join(" ".join(s) + "\n" for s in ref_s))
    counts = tmp_path / "counts.tsv"
    bpe.write_vocab(sorted(freqs.items()), counts)
    main(["analyze", "--hyp", hyp, "--ref", ref, "--train-counts", str(counts), "--out", str(tmp_path / "rep.json")])
    rep = json.loads((tmp_path / "rep.json").read_text())
    assert rep["unigram"] == metrics.corpus_unigram_f1(hyp_s, ref_s).to_json()
    lib = metrics.rare_word_f1(hyp_s, ref_s, freqs)
    assert rep["rare_words"] == [r.to_json(bucket=n) for n, r in lib.items()]
    assert set(rep["unigram"]) == {"precision", "recall", "f1", "n_hyp_tokens", "n_ref_tokens"}


def test_analyze_inventory_usage(tmp_path, capsys):
    corpus = write(tmp_path / "c", "ab ab ab abc abc\n")
    main(["learn", "--corpus", corpus, "--ops", "2", "--out", str(tmp_path / "m")])
    before = write(tmp_path / "b", "ab@@ c ab\n")
    after = write(tmp_path / "a", "abc ab\n")
    ref = write(tmp_path / "r", "abc ab\n")
    capsys.readouterr()
    assert main(["analyze", "--hyp", after, "--ref", ref, "--train-corpus", corpus,
                 "--gen-before", before, "--gen-after", after, "--merges", str(tmp_path / "m"),
                 "--k-old", "1", "--k-new", "2"]) == 0
    usage = json.loads(capsys.readouterr().out)["inventory_usage"]
    # before {ab, c}, after {abc, ab}: 'c' dropped
    assert usage["obsolete_fraction"] == 0.5
    assert usage["subsumed_still_generated_fraction"] == 0.0
    assert usage["new_vocab_f1"][0]["f1"] == 1.0


def test_analyze_misaligned(tmp_path, capsys):
    hyp = write(tmp_path / "h", "a\nb\n")
    ref = write(tmp_path / "r", "a\n")
    assert main(["analyze", "--hyp", hyp, "--ref", ref, "--train-corpus", ref]) == 1
    err = capsys.readouterr().err
    assert "2" in err and "1" in err


def test_console_script_runs(tmp_path, tiny):
    res = subprocess.run(
        [sys.executable, "-m", "incbpe.cli", "learn", "--corpus", tiny, "--ops", "1", "--out", str(tmp_path / "m")],
        capture_output=True, text=True,
    )
    assert res.returncode == 0 and res.stdout == "1\t3\n"
