"""Exact minimum-weight perfect matching by dynamic programming over subsets.

O(2^n * n) time and memory; a test oracle for n <= ~20, independent of the
blossom code path.
"""
from __future__ import annotations


def brute_force_min_weight(weights) -> tuple[int, list[tuple[int, int]]]:
    """Return ``(weight, pairs)`` of an optimal perfect matching of a complete graph."""
    n = len(weights)
    if n % 2:
        raise ValueError("perfect matching needs an even number of vertices")
    full = (1 << n) - 1
    inf = float("inf")
    best = [inf] * (1 << n)
    choice = [-1] * (1 << n)
    best[0] = 0
    for mask in range(1, full + 1):
        if bin(mask).count("1") % 2:
            continue
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        m = rest
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            cand = best[rest & ~(1 << j)] + weights[i][j]
            if cand < best[mask]:
                best[mask] = cand
                choice[mask] = j
    pairs = []
    mask = full
    while mask:
        i = (mask & -mask).bit_length() - 1
        j = choice[mask]
        pairs.append((i, j))
        mask &= ~((1 << i) | (1 << j))
    return int(best[full]), sorted(pairs)
