"""Word alignment with a diagonal-tension IBM Model 2.

The distortion model scores a link from target position ``j`` (of ``m``) to
source position ``i`` (of ``n``), both 1-based, as
``exp(tension * -|i/n - j/m|)`` normalized over ``i``; a NULL link gets the
fixed mass ``null_prob``. Lexical probabilities ``t(f|e)`` are learned with
EM, and the tension by gradient ascent on the expected log-likelihood.

Training is vectorized: sentence pairs are grouped by ``(n, m)`` shape and
each group is processed as one numpy batch.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidAlignmentError, InvalidPairError, NoTrainableDataError

log = logging.getLogger(__name__)

NULL = "<null>"
MIN_TENSION = 0.1
MAX_TENSION = 14.0


@dataclass(frozen=True)
class AlignerConfig:
    iterations: int = 5
    null_prob: float = 0.08
    tension_init: float = 4.0
    tension_steps: int = 8
    tension_rate: float = 1.0
    smoothing: float = 0.01

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "null_prob": self.null_prob,
            "tension_init": self.tension_init,
            "tension_steps": self.tension_steps,
            "tension_rate": self.tension_rate,
            "smoothing": self.smoothing,
        }


@dataclass(frozen=True)
class Alignment:
    links: frozenset
    src_len: int
    tgt_len: int

    def __post_init__(self):
        object.__setattr__(self, "links", frozenset(self.links))
        for i, j in self.links:
            if not (0 <= i < self.src_len and 0 <= j < self.tgt_len):
                raise InvalidAlignmentError(
                    f"link {i}-{j} out of range for {self.src_len}x{self.tgt_len}"
                )

    def transposed(self) -> "Alignment":
        return Alignment(frozenset((j, i) for i, j in self.links), self.tgt_len, self.src_len)

    def pharaoh(self) -> str:
        return " ".join(f"{i}-{j}" for i, j in sorted(self.links))


@dataclass
class AlignmentModel:
    """Trained lexical table plus distortion parameters.

    ``ttable[e][f]`` holds ``t(f|e)``; ``e`` may be :data:`NULL`. ``direction``
    is informational: a "reverse" model was trained with the sides swapped.
    """

    ttable: dict
    tension: float
    null_prob: float
    smoothing: float = 0.01
    direction: str = "forward"
    row_floor: dict = field(default_factory=dict)
    log_likelihoods: list = field(default_factory=list)
    skipped: int = 0

    def prob(self, e: str, f: str) -> float:
        row = self.ttable.get(e)
        if row is None:
            return self.smoothing
        p = row.get(f)
        if p is None:
            return self.row_floor.get(e, self.smoothing)
        return p


def distortion_feature(i: np.ndarray, j: np.ndarray, n: int, m: int) -> np.ndarray:
    """Diagonal feature ``-|i/n - j/m|`` for 1-based positions."""
    return -np.abs(i / n - j / m)


def _feature_grid(n: int, m: int) -> np.ndarray:
    ii = np.arange(1, n + 1, dtype=float)[:, None]
    jj = np.arange(1, m + 1, dtype=float)[None, :]
    return distortion_feature(ii, jj, n, m)  # (n, m)


def distortion_probs(n: int, m: int, tension: float, null_prob: float) -> np.ndarray:
    """Prior over ``{NULL, 1..n}`` for every target position; shape (n+1, m)."""
    feat = _feature_grid(n, m)
    w = np.exp(tension * (feat - feat.max(axis=0, keepdims=True)))
    w /= w.sum(axis=0, keepdims=True)
    out = np.empty((n + 1, m))
    out[0] = null_prob
    out[1:] = (1.0 - null_prob) * w
    return out


class _Corpus:
    """Integer-encoded bitext grouped by sentence shape."""

    def __init__(self, bitext: Sequence[tuple[Sequence[str], Sequence[str]]]):
        self.src_vocab: dict[str, int] = {NULL: 0}
        self.tgt_vocab: dict[str, int] = {}
        self.skipped = 0
        pair_index: dict[tuple[int, int], int] = {}
        groups: dict[tuple[int, int], list[np.ndarray]] = defaultdict(list)
        for src, tgt in bitext:
            if not src or not tgt:
                self.skipped += 1
                continue
            e_ids = [0] + [self.src_vocab.setdefault(e, len(self.src_vocab)) for e in src]
            f_ids = [self.tgt_vocab.setdefault(f, len(self.tgt_vocab)) for f in tgt]
            idx = np.empty((len(e_ids), len(f_ids)), dtype=np.int64)
            for a, e in enumerate(e_ids):
                for b, f in enumerate(f_ids):
                    idx[a, b] = pair_index.setdefault((e, f), len(pair_index))
            groups[(len(src), len(tgt))].append(idx)
        if not groups:
            raise NoTrainableDataError("no sentence pair with both sides non-empty")
        self.groups = {shape: np.stack(arrs) for shape, arrs in sorted(groups.items())}
        self.n_params = len(pair_index)
        self.param_row = np.empty(self.n_params, dtype=np.int64)
        self.param_col = np.empty(self.n_params, dtype=np.int64)
        for (e, f), k in pair_index.items():
            self.param_row[k] = e
            self.param_col[k] = f
        self.n_rows = len(self.src_vocab)
        self.row_support = np.bincount(self.param_row, minlength=self.n_rows).astype(float)
        self.n_target_tokens = sum(arr.shape[0] * shape[1] for shape, arr in self.groups.items())


@dataclass
class _EStats:
    counts: np.ndarray
    log_likelihood: float
    emp_feat: float
    nonnull_mass: dict  # (n, m) -> per-target-position non-NULL posterior mass, shape (m,)


def _e_step(corpus: _Corpus, t: np.ndarray, tension: float, null_prob: float) -> _EStats:
    counts = np.zeros(corpus.n_params)
    ll = 0.0
    emp = 0.0
    mass = {}
    for (n, m), idx in corpus.groups.items():
        prior = distortion_probs(n, m, tension, null_prob)  # (n+1, m)
        joint = t[idx] * prior[None]  # (B, n+1, m)
        z = joint.sum(axis=1, keepdims=True)
        ll += float(np.log(z).sum())
        post = joint / z
        counts += np.bincount(idx.ravel(), weights=post.ravel(), minlength=corpus.n_params)
        nonnull = post[:, 1:, :]
        emp += float((nonnull * _feature_grid(n, m)[None]).sum())
        mass[(n, m)] = nonnull.sum(axis=(0, 1))
    return _EStats(counts, ll, emp, mass)


def _model_feature(mass: dict, tension: float) -> float:
    total = 0.0
    for (n, m), w in mass.items():
        feat = _feature_grid(n, m)
        p = distortion_probs(n, m, tension, 0.0)[1:]
        total += float((w * (p * feat).sum(axis=0)).sum())
    return total


def _m_step(corpus: _Corpus, counts: np.ndarray, smoothing: float) -> np.ndarray:
    row_tot = np.bincount(corpus.param_row, weights=counts, minlength=corpus.n_rows)
    denom = row_tot + smoothing * corpus.row_support
    return (counts + smoothing) / denom[corpus.param_row]


def corpus_log_likelihood(corpus: _Corpus, t: np.ndarray, tension: float, null_prob: float) -> float:
    return _e_step(corpus, t, tension, null_prob).log_likelihood


def em_train(bitext: Iterable[tuple[Sequence[str], Sequence[str]]],
             config: AlignerConfig = AlignerConfig(),
             direction: str = "forward") -> AlignmentModel:
    """Train a model aligning each target token (second side) to the source.

    Pairs with an empty side are skipped and counted in ``model.skipped``.
    ``model.log_likelihoods`` holds the corpus log-likelihood measured in the
    E-step of every iteration, plus a final value for the returned model.
    """
    corpus = _Corpus(list(bitext))
    if corpus.skipped:
        log.info("aligner: skipped %d pairs with an empty side", corpus.skipped)
    # uniform over co-occurring target words
    t = 1.0 / corpus.row_support[corpus.param_row]
    tension = config.tension_init
    counts = np.zeros(corpus.n_params)
    lls = []
    for it in range(1, config.iterations + 1):
        stats = _e_step(corpus, t, tension, config.null_prob)
        lls.append(stats.log_likelihood)
        counts = stats.counts
        t = _m_step(corpus, counts, config.smoothing)
        if config.tension_steps:
            emp = stats.emp_feat / corpus.n_target_tokens
            step = config.tension_rate / it
            for _ in range(config.tension_steps):
                grad = emp - _model_feature(stats.nonnull_mass, tension) / corpus.n_target_tokens
                tension = min(MAX_TENSION, max(MIN_TENSION, tension + step * grad))
    lls.append(corpus_log_likelihood(corpus, t, tension, config.null_prob))

    src_words = list(corpus.src_vocab)
    tgt_words = list(corpus.tgt_vocab)
    ttable: dict[str, dict[str, float]] = defaultdict(dict)
    for k in range(corpus.n_params):
        ttable[src_words[corpus.param_row[k]]][tgt_words[corpus.param_col[k]]] = float(t[k])
    row_tot = np.bincount(corpus.param_row, weights=counts, minlength=corpus.n_rows)
    denom = row_tot + config.smoothing * corpus.row_support
    row_floor = {
        src_words[r]: (config.smoothing / denom[r]) if denom[r] > 0 else config.smoothing
        for r in range(corpus.n_rows)
    }
    return AlignmentModel(
        ttable=dict(ttable),
        tension=tension,
        null_prob=config.null_prob,
        smoothing=config.smoothing,
        direction=direction,
        row_floor=row_floor,
        log_likelihoods=lls,
        skipped=corpus.skipped,
    )


def viterbi_align(model: AlignmentModel, src: Sequence[str], tgt: Sequence[str]) -> Alignment:
    n, m = len(src), len(tgt)
    if n == 0 or m == 0:
        return Alignment(frozenset(), n, m)
    prior = distortion_probs(n, m, model.tension, model.null_prob)
    links = set()
    for j, f in enumerate(tgt):
        best_i = 0
        best = model.prob(NULL, f) * prior[0, j]
        for i, e in enumerate(src, 1):
            score = model.prob(e, f) * prior[i, j]
            if score > best:
                best, best_i = score, i
        if best_i:
            links.add((best_i - 1, j))
    return Alignment(frozenset(links), n, m)


_NEIGHBOURS = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)]


def symmetrize(forward: Alignment, reverse: Alignment, heuristic: str = "grow-diag-final-and") -> Alignment:
    """Combine two directional alignments of one sentence pair.

    Both inputs are in (src, tgt) orientation; transpose reverse-model output
    before calling. ``heuristic`` is ``intersection``, ``union`` or
    ``grow-diag-final-and`` (alias ``gdfa``).
    """
    if (forward.src_len, forward.tgt_len) != (reverse.src_len, reverse.tgt_len):
        raise InvalidPairError(
            f"alignment shapes differ: {forward.src_len}x{forward.tgt_len} "
            f"vs {reverse.src_len}x{reverse.tgt_len}"
        )
    n, m = forward.src_len, forward.tgt_len
    inter = forward.links & reverse.links
    union = forward.links | reverse.links
    if heuristic == "intersection":
        return Alignment(inter, n, m)
    if heuristic == "union":
        return Alignment(union, n, m)
    if heuristic not in ("grow-diag-final-and", "gdfa"):
        raise ValueError(f"unknown symmetrization heuristic {heuristic!r}")

    links = set(inter)
    src_cov = {i for i, _ in links}
    tgt_cov = {j for _, j in links}
    changed = True
    while changed:
        changed = False
        for i in range(n):
            for j in range(m):
                if (i, j) not in links:
                    continue
                for di, dj in _NEIGHBOURS:
                    cand = (i + di, j + dj)
                    if cand in union and cand not in links and (
                        cand[0] not in src_cov or cand[1] not in tgt_cov
                    ):
                        links.add(cand)
                        src_cov.add(cand[0])
                        tgt_cov.add(cand[1])
                        changed = True
    for i in range(n):
        for j in range(m):
            if (i, j) in union and i not in src_cov and j not in tgt_cov:
                links.add((i, j))
                src_cov.add(i)
                tgt_cov.add(j)
    return Alignment(frozenset(links), n, m)


def train_bidirectional(bitext: Sequence[tuple[Sequence[str], Sequence[str]]],
                        config: AlignerConfig = AlignerConfig()) -> tuple[AlignmentModel, AlignmentModel]:
    """Forward (target aligned to source) and reverse models on one bitext."""
    fwd = em_train(bitext, config, direction="forward")
    rev = em_train([(t, s) for s, t in bitext], config, direction="reverse")
    return fwd, rev


def align_pair(fwd: AlignmentModel, rev: AlignmentModel, src: Sequence[str], tgt: Sequence[str],
               heuristic: str = "grow-diag-final-and") -> Alignment:
    a = viterbi_align(fwd, src, tgt)
    b = viterbi_align(rev, tgt, src).transposed()
    return symmetrize(a, b, heuristic)


def log_likelihood(model: AlignmentModel, bitext: Iterable[tuple[Sequence[str], Sequence[str]]]) -> float:
    """Corpus log-likelihood of ``bitext`` under a trained model (slow path)."""
    total = 0.0
    for src, tgt in bitext:
        if not src or not tgt:
            continue
        prior = distortion_probs(len(src), len(tgt), model.tension, model.null_prob)
        for j, f in enumerate(tgt):
            p = model.prob(NULL, f) * prior[0, j]
            p += sum(model.prob(e, f) * prior[i, j] for i, e in enumerate(src, 1))
            total += math.log(p)
    return total
