# cython: language_level=3
"""Compiled BPE inner loops. Same contract as ``_kernels_py``."""


cpdef dict word_pairs(list symbols):
    cdef dict counts = {}
    cdef Py_ssize_t i, n = len(symbols)
    cdef tuple pair
    for i in range(n - 1):
        pair = (symbols[i], symbols[i + 1])
        counts[pair] = counts.get(pair, 0) + 1
    return counts


cpdef dict weighted_pair_counts(list segmentations, list weights):
    cdef dict counts = {}
    cdef list symbols
    cdef object weight
    cdef Py_ssize_t i, j, n, m = len(segmentations)
    cdef tuple pair
    for j in range(m):
        symbols = <list>segmentations[j]
        weight = weights[j]
        n = len(symbols)
        for i in range(n - 1):
            pair = (symbols[i], symbols[i + 1])
            counts[pair] = counts.get(pair, 0) + weight
    return counts


cpdef list merge_pair(list symbols, str left, str right, str merged):
    cdef list out = []
    cdef Py_ssize_t n = len(symbols)
    cdef Py_ssize_t i = 0
    cdef str a
    while i < n:
        a = <str>symbols[i]
        if i < n - 1 and a == left and <str>symbols[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(a)
            i += 1
    return out


cpdef list apply_ranked(list symbols, dict ranks, Py_ssize_t limit):
    cdef Py_ssize_t i, n, r, best
    cdef object got
    cdef str bl = None, br = None
    symbols = list(symbols)
    while True:
        n = len(symbols)
        if n < 2:
            break
        best = limit
        bl = None
        for i in range(n - 1):
            got = ranks.get((symbols[i], symbols[i + 1]))
            if got is not None:
                r = <Py_ssize_t>got
                if r < best:
                    best = r
                    bl = <str>symbols[i]
                    br = <str>symbols[i + 1]
        if bl is None:
            break
        symbols = merge_pair(symbols, bl, br, bl + br)
    return symbols
