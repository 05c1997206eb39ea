"""Pure-Python versions of the BPE inner loops.

Mirrors ``_kernels.pyx`` function for function; used when the compiled
extension is unavailable or ``INCBPE_PURE=1`` is set.
"""


def word_pairs(symbols):
    """Adjacent pair counts of one symbol sequence (overlaps counted)."""
    counts = {}
    for i in range(len(symbols) - 1):
        pair = (symbols[i], symbols[i + 1])
        counts[pair] = counts.get(pair, 0) + 1
    return counts


def weighted_pair_counts(segmentations, weights):
    counts = {}
    for symbols, weight in zip(segmentations, weights):
        for i in range(len(symbols) - 1):
            pair = (symbols[i], symbols[i + 1])
            counts[pair] = counts.get(pair, 0) + weight
    return counts


def merge_pair(symbols, left, right, merged):
    """Replace every non-overlapping ``left right`` occurrence, scanning left to right."""
    out = []
    n = len(symbols)
    i = 0
    while i < n:
        if i < n - 1 and symbols[i] == left and symbols[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def apply_ranked(symbols, ranks, limit):
    """Apply merges with rank < ``limit`` in rank order.

    ``ranks`` maps ``(left, right)`` to its rank. Each pass merges the
    lowest-ranked pair present; merges can only create pairs of higher rank,
    so this equals applying the table prefix one op at a time.
    """
    symbols = list(symbols)
    while len(symbols) > 1:
        best = limit
        best_pair = None
        for i in range(len(symbols) - 1):
            r = ranks.get((symbols[i], symbols[i + 1]))
            if r is not None and r < best:
                best = r
                best_pair = (symbols[i], symbols[i + 1])
        if best_pair is None:
            break
        symbols = merge_pair(symbols, best_pair[0], best_pair[1], best_pair[0] + best_pair[1])
    return symbols
