import random
import string

import pytest

from incbpe import _kernels_py

try:
    from incbpe import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

BACKENDS = [pytest.param(_kernels_py, id="python")]
BACKENDS.append(
    pytest.param(_kernels_c, id="cython", marks=pytest.mark.skipif(_kernels_c is None, reason="extension not built"))
)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def random_freqs(rng: random.Random, max_types=50, max_len=12, alphabet="abcde"):
    """Small synthetic word-frequency map with a skewed alphabet."""
    n = rng.randint(1, max_types)
    freqs = {}
    for _ in range(n):
        length = rng.randint(1, max_len)
        word = "".join(rng.choice(alphabet) for _ in range(length))
        freqs[word] = freqs.get(word, 0) + rng.randint(1, 20)
    return freqs


def random_corpus(rng: random.Random, freqs, n_sents=20, max_len=8):
    words = sorted(freqs)
    return [[rng.choice(words) for _ in range(rng.randint(0, max_len))] for _ in range(n_sents)]


def brute_force_learn(freqs, n_ops):
    """Reference learner: recount every pair from scratch at every step."""
    segs = {w: list(w) for w in freqs}
    ops = []
    for _ in range(n_ops):
        counts = {}
        for w, seg in segs.items():
            for i in range(len(seg) - 1):
                counts[(seg[i], seg[i + 1])] = counts.get((seg[i], seg[i + 1]), 0) + freqs[w]
        if not counts:
            break
        best = min(counts, key=lambda p: (-counts[p], p))
        if counts[best] < 2:
            break
        ops.append(best)
        for w, seg in segs.items():
            out, i = [], 0
            while i < len(seg):
                if i + 1 < len(seg) and (seg[i], seg[i + 1]) == best:
                    out.append(seg[i] + seg[i + 1])
                    i += 2
                else:
                    out.append(seg[i])
                    i += 1
            segs[w] = out
    return ops


def brute_force_segment(word, ops, k):
    """Apply ops[:k] one at a time, each over the whole word."""
    seg = list(word)
    for left, right in ops[:k]:
        out, i = [], 0
        while i < len(seg):
            if i + 1 < len(seg) and seg[i] == left and seg[i + 1] == right:
                out.append(left + right)
                i += 2
            else:
                out.append(seg[i])
                i += 1
        seg = out
    return seg


# --- acceptance reporting ------------------------------------------------------

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _CRITERIA.append((marker.args[0], status, f"{call.duration:.2f}s"))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, duration in _CRITERIA:
        terminalreporter.write_line(f"[{status}] {label} ({duration})")
