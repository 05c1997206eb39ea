"""Evaluation and analysis quantities for incremental-BPE runs.

Corpus-level scores are micro-averaged: clipped matches and token totals are
summed over sentences before dividing.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .bpe import strip_marker
from .errors import InvalidInputError, UndefinedMeanError

RARE_BUCKETS = (1, 2, 5)


@dataclass(frozen=True)
class UnigramF1Report:
    precision: float
    recall: float
    f1: float
    n_hyp_tokens: int = 0
    n_ref_tokens: int = 0
    n_matched: int = 0

    @classmethod
    def from_counts(cls, matched: int, n_hyp: int, n_ref: int) -> "UnigramF1Report":
        p = matched / n_hyp if n_hyp else 0.0
        r = matched / n_ref if n_ref else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f, n_hyp, n_ref, matched)

    def to_json(self, bucket: int | None = None) -> dict:
        out = {"precision": self.precision, "recall": self.recall, "f1": self.f1}
        if bucket is not None:
            out["bucket"] = bucket
        out["n_hyp_tokens"] = self.n_hyp_tokens
        out["n_ref_tokens"] = self.n_ref_tokens
        return out


def clipped_matches(hyp: Iterable[str], ref: Iterable[str]) -> int:
    h = Counter(hyp)
    r = Counter(ref)
    return sum(min(c, r[tok]) for tok, c in h.items())


def unigram_f1(hyp: Sequence[str], ref: Sequence[str]) -> UnigramF1Report:
    return UnigramF1Report.from_counts(clipped_matches(hyp, ref), len(hyp), len(ref))


def corpus_unigram_f1(hyp_corpus: Sequence[Sequence[str]], ref_corpus: Sequence[Sequence[str]]) -> UnigramF1Report:
    _check_aligned(hyp_corpus, ref_corpus)
    matched = n_hyp = n_ref = 0
    for hyp, ref in zip(hyp_corpus, ref_corpus):
        matched += clipped_matches(hyp, ref)
        n_hyp += len(hyp)
        n_ref += len(ref)
    return UnigramF1Report.from_counts(matched, n_hyp, n_ref)


def _check_aligned(hyp_corpus, ref_corpus) -> None:
    if len(hyp_corpus) != len(ref_corpus):
        raise InvalidInputError(
            f"corpora are not sentence-aligned: {len(hyp_corpus)} hypothesis vs {len(ref_corpus)} reference lines"
        )


def rare_word_f1(
    hyp_corpus: Sequence[Sequence[str]],
    ref_corpus: Sequence[Sequence[str]],
    train_counts: Mapping[str, int],
    buckets: Iterable[int] = RARE_BUCKETS,
) -> dict[int, UnigramF1Report]:
    """F1 restricted, per bucket ``n``, to words seen exactly ``n`` times in training."""
    _check_aligned(hyp_corpus, ref_corpus)
    report = {}
    for n in sorted(set(buckets)):
        def keep(word, n=n):
            return train_counts.get(word) == n

        hyp_f = [[w for w in sent if keep(w)] for sent in hyp_corpus]
        ref_f = [[w for w in sent if keep(w)] for sent in ref_corpus]
        report[n] = corpus_unigram_f1(hyp_f, ref_f)
    return report


def new_vocab_f1(
    hyp_corpus_segmented: Sequence[Sequence[str]],
    ref_corpus_segmented: Sequence[Sequence[str]],
    new_symbols: Iterable[str],
) -> UnigramF1Report:
    """Unigram F1 over subword tokens whose symbol (marker stripped) is new."""
    _check_aligned(hyp_corpus_segmented, ref_corpus_segmented)
    new = set(new_symbols)

    def filtered(corpus):
        out = []
        for sent in corpus:
            out.append([s for s in map(strip_marker, sent) if s in new])
        return out

    return corpus_unigram_f1(filtered(hyp_corpus_segmented), filtered(ref_corpus_segmented))


@dataclass(frozen=True)
class InventoryUsageReport:
    obsolete_fraction: float
    subsumed_still_generated_fraction: float
    degenerate: bool = False
    new_vocab_f1: tuple[UnigramF1Report, ...] = field(default=())

    def to_json(self) -> dict:
        out = {
            "obsolete_fraction": self.obsolete_fraction,
            "subsumed_still_generated_fraction": self.subsumed_still_generated_fraction,
            "degenerate": self.degenerate,
        }
        if self.new_vocab_f1:
            out["new_vocab_f1"] = [r.to_json() for r in self.new_vocab_f1]
        return out


def inventory_usage(
    generated_before: Iterable[str],
    generated_after: Iterable[str],
    ref_after: Iterable[str],
    old_inventory: Iterable[str],
    new_inventory: Iterable[str],
    new_vocab_trajectory: Sequence[UnigramF1Report] = (),
) -> InventoryUsageReport:
    """Fractions of unique subword types made obsolete or still generated after subsumption.

    ``obsolete_fraction`` is the share of types generated before an increment
    that are no longer generated after it. ``subsumed_still_generated_fraction``
    is the share of types generated after it that come from the old inventory
    yet never appear in the reference segmented with the new one.
    """
    before = set(generated_before)
    after = set(generated_after)
    ref = set(ref_after)
    old = set(old_inventory)
    new = set(new_inventory)
    if not old <= new:
        raise InvalidInputError("old inventory is not contained in the new inventory")
    degenerate = not before or not after
    obsolete = len(before - after) / len(before) if before else 0.0
    subsumed = len({s for s in after if s in old and s not in ref}) / len(after) if after else 0.0
    return InventoryUsageReport(obsolete, subsumed, degenerate, tuple(new_vocab_trajectory))


def subword_types(corpus_segmented: Iterable[Sequence[str]]) -> set[str]:
    return {strip_marker(t) for sent in corpus_segmented for t in sent}


@dataclass(frozen=True)
class PiecesPerWord:
    mean: float
    histogram: dict[int, int]
    n_words: int

    def to_json(self) -> dict:
        return {
            "mean": self.mean,
            "n_words": self.n_words,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def subwords_per_word(corpus_segmented: Iterable[Sequence[str]]) -> PiecesPerWord:
    """Mean number of pieces per word instance, with a histogram of piece counts."""
    hist: Counter[int] = Counter()
    for sent in corpus_segmented:
        run = 0
        for tok in sent:
            run += 1
            if not tok.endswith("@@"):
                hist[run] += 1
                run = 0
        if run:
            hist[run] += 1
    n = sum(hist.values())
    if n == 0:
        raise UndefinedMeanError("no words in corpus; mean pieces per word is undefined")
    total = sum(k * v for k, v in hist.items())
    return PiecesPerWord(total / n, dict(hist), n)


def length_norm_score(score: float, gamma: float, src_len: int, gen_len: int) -> float:
    """Beam score rescaled toward the expected output length ``gamma * src_len``."""
    if gen_len < 1:
        raise InvalidInputError(f"gen_len must be >= 1, got {gen_len}")
    return score * (1 + abs(gamma * src_len - gen_len) / gen_len)
