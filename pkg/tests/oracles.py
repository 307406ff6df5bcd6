"""Independent reference computations used to freeze expected values.

Nothing here imports the code under test except for plain data types.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache


def make_edit_distance():
    """Edit distance by memoized recursion over suffix pairs (a separate
    formulation from the forward DP table in the package)."""

    @lru_cache(maxsize=None)
    def dist(a: tuple, b: tuple) -> int:
        if not a:
            return len(b)
        if not b:
            return len(a)
        return min(
            dist(a[1:], b[1:]) + (a[0] != b[0]),
            dist(a[1:], b) + 1,
            dist(a, b[1:]) + 1,
        )

    return dist


def move_block(seq, start, length, dest):
    block = list(seq[start:start + length])
    rest = list(seq[:start]) + list(seq[start + length:])
    return rest[:dest] + block + rest[dest:]


def all_block_moves(hyp, ref, max_size=10, max_dist=50):
    """Every move of a hyp block that equals some contiguous ref span, to any position."""
    ref_grams = {tuple(ref[i:i + n]) for i in range(len(ref)) for n in range(1, len(ref) - i + 1)}
    for s in range(len(hyp)):
        for ln in range(1, min(max_size, len(hyp) - s) + 1):
            if tuple(hyp[s:s + ln]) not in ref_grams:
                continue
            for dest in range(0, len(hyp) - ln + 1):
                if dest != s and abs(dest - s) <= max_dist:
                    yield s, ln, dest


def brute_min_ter_edits(hyp, ref, max_shifts=2):
    """min over sequences of <= max_shifts block moves of (#moves + edit distance)."""
    dist = make_edit_distance()
    best = dist(tuple(hyp), tuple(ref))
    frontier = [list(hyp)]
    for k in range(1, max_shifts + 1):
        nxt = []
        for h in frontier:
            for s, ln, d in all_block_moves(h, ref):
                moved = move_block(h, s, ln, d)
                best = min(best, k + dist(tuple(moved), tuple(ref)))
                nxt.append(moved)
        frontier = nxt
    return best


def exact_em(bitext, iterations, tension, null_prob, smoothing):
    """IBM Model 2 (diagonal prior, fixed tension) by enumerating every alignment.

    Returns (ttable dict-of-dicts, list of log-likelihoods per iteration).
    """
    NULL = "<null>"
    support = {}
    for src, tgt in bitext:
        for e in [NULL, *src]:
            support.setdefault(e, set()).update(tgt)
    t = {e: {f: 1.0 / len(fs) for f in fs} for e, fs in support.items()}
    lls = []

    def prior(i, j, n, m):
        # i in 0..n (0 = NULL), j in 1..m
        if i == 0:
            return null_prob
        ws = [math.exp(-tension * abs(k / n - j / m)) for k in range(1, n + 1)]
        return (1 - null_prob) * ws[i - 1] / sum(ws)

    for _ in range(iterations):
        counts = {e: {f: 0.0 for f in fs} for e, fs in support.items()}
        ll = 0.0
        for src, tgt in bitext:
            words = [NULL, *src]
            n, m = len(src), len(tgt)
            joint = {}
            for a in itertools.product(range(n + 1), repeat=m):
                p = 1.0
                for j, i in enumerate(a, 1):
                    p *= t[words[i]][tgt[j - 1]] * prior(i, j, n, m)
                joint[a] = p
            z = sum(joint.values())
            ll += math.log(z)
            for a, p in joint.items():
                for j, i in enumerate(a):
                    counts[words[i]][tgt[j]] += p / z
        lls.append(ll)
        t = {}
        for e, row in counts.items():
            denom = sum(row.values()) + smoothing * len(row)
            t[e] = {f: (c + smoothing) / denom for f, c in row.items()}
    return t, lls


def dictionary_corpus(seed: int, pairs: int = 90):
    """Shuffled-order one-to-one corpus over a 3x3 vocabulary plus its gold map."""
    import random

    rng = random.Random(seed)
    mapping = {"a": "x", "b": "y", "c": "z"}
    bitext = []
    for _ in range(pairs):
        src = rng.sample(sorted(mapping), rng.randint(1, 3))
        tgt = [mapping[e] for e in src]
        rng.shuffle(tgt)
        bitext.append((src, tgt))
    return mapping, bitext


def gold_links(mapping, src, tgt):
    return {(i, tgt.index(mapping[e])) for i, e in enumerate(src)}


def predict_noise_hter(tokens, edit_log):
    """Substitution-only noise: each logged edit is one substituted position."""
    assert all(e.op == "sub" for e in edit_log)
    return len(edit_log) / max(1, len(tokens))


def all_pairs_edit_distance(vocab, max_len):
    """Edit distance between every pair of sequences over ``vocab`` up to ``max_len``.

    Fills one matrix over the prefix lattice: D[a, b] is computed from the
    entries of a's and b's one-shorter prefixes, so every pair reuses pairs
    already solved. Rows are vectorized across all b of equal length.
    """
    import numpy as np

    seqs = [s for n in range(max_len + 1) for s in itertools.product(vocab, repeat=n)]
    index = {s: k for k, s in enumerate(seqs)}
    parent = np.array([index[s[:-1]] if s else -1 for s in seqs])
    last = np.array([vocab.index(s[-1]) if s else -1 for s in seqs])
    length = np.array([len(s) for s in seqs])
    by_len = [np.flatnonzero(length == n) for n in range(max_len + 1)]
    D = np.zeros((len(seqs), len(seqs)), dtype=np.int16)
    D[0, :] = length
    for a in range(1, len(seqs)):
        pa = parent[a]
        D[a, 0] = length[a]
        for n in range(1, max_len + 1):
            b = by_len[n]
            pb = parent[b]
            D[a, b] = np.minimum(np.minimum(D[pa, b] + 1, D[a, pb] + 1),
                                 D[pa, pb] + (last[b] != last[a]))
    return seqs, D
