"""Compare the Cython and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--types 5000] [--ops 2000] [--repeat 3]

Kernel timings call both modules directly; the end-to-end learn/segment
timings run in subprocesses with and without INCBPE_PURE=1, since the
backend is fixed at import.
"""

import argparse
import os
import random
import subprocess
import sys
import timeit

from incbpe import _kernels_py

try:
    from incbpe import _kernels as _kernels_cy
except ImportError:
    _kernels_cy = None

LETTERS = "abcdefghijklmnopqrstuvwxyz"

END_TO_END = """
import random, time
from incbpe import bpe, kernels
rng = random.Random(0)
freqs = {{}}
while len(freqs) < {types}:
    w = "".join(rng.choice({letters!r}[:12]) for _ in range(rng.randint(2, 12)))
    freqs[w] = rng.randint(1, 50)
t = time.perf_counter(); table = bpe.learn_merges(freqs, {ops}); learn = time.perf_counter() - t
t = time.perf_counter()
for w in freqs:
    bpe.segment_word(w, table)
seg = time.perf_counter() - t
print(kernels.BACKEND, learn, seg)
"""


def make_words(rng, n):
    return [list("".join(rng.choice(LETTERS[:12]) for _ in range(rng.randint(2, 12)))) for _ in range(n)]


def bench_kernels(mod, words, repeat):
    weights = [1] * len(words)
    ranks = {}
    for a in LETTERS[:12]:
        for b in LETTERS[:12]:
            ranks[(a, b)] = len(ranks)
    cases = {
        "weighted_pair_counts": lambda: mod.weighted_pair_counts(words, weights),
        "merge_pair": lambda: [mod.merge_pair(w, "a", "b", "ab") for w in words],
        "apply_ranked": lambda: [mod.apply_ranked(w, ranks, len(ranks)) for w in words],
    }
    return {name: min(timeit.repeat(fn, number=1, repeat=repeat)) for name, fn in cases.items()}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--types", type=int, default=5000)
    ap.add_argument("--ops", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    words = make_words(random.Random(0), args.types)
    py = bench_kernels(_kernels_py, words, args.repeat)
    cy = bench_kernels(_kernels_cy, words, args.repeat) if _kernels_cy else None
    print(f"{'kernel':<22}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, t in py.items():
        if cy:
            print(f"{name:<22}{t:>12.4f}{cy[name]:>12.4f}{t / cy[name]:>9.1f}x")
        else:
            print(f"{name:<22}{t:>12.4f}{'n/a':>12}")

    code = END_TO_END.format(types=args.types, ops=args.ops, letters=LETTERS)
    print(f"\nend to end: {args.types} word types, {args.ops} merges")
    for pure in ("1", "0"):
        env = dict(os.environ, INCBPE_PURE=pure)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, learn, seg = out.stdout.split()
        print(f"  {backend:<8} learn {float(learn):8.3f}s   segment {float(seg):8.3f}s")


if __name__ == "__main__":
    main()
