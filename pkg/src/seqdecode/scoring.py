"""Sequence-level similarity metrics.

A metric is a callable on token tuples returning a value in [0, 1]. Metrics
are tagged ``privileged`` when they need a reference output (BLEU and the
reference-anchored embedding score); the source-anchored variants and the toy
diagnostics need only the source.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mdp import Sequence, clamp01

ScoreFn = Callable[[Sequence, Sequence], float]


@dataclass(frozen=True)
class Metric:
    """Scoring contract: ``fn(anchor, candidate) -> [0, 1]``.

    For privileged metrics the anchor is a reference output; for unprivileged
    metrics it is the source sentence.
    """

    name: str
    privileged: bool
    fn: ScoreFn = field(repr=False)

    def __call__(self, anchor: Sequence, candidate: Sequence) -> float:
        return clamp01(self.fn(tuple(anchor), tuple(candidate)))


# --------------------------------------------------------------------------- BLEU


def _ngram_counts(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidates: list[Sequence],
    references: list[Sequence],
    max_n: int = 4,
) -> float:
    """Corpus BLEU: geometric mean of clipped n-gram precisions times brevity penalty.

    No smoothing is applied; a zero precision at any order zeroes the score,
    which is why callers should prefer corpus-level over per-sentence use.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    if len(candidates) != len(references):
        raise ValueError("candidate and reference corpora differ in length")
    if not candidates:
        raise ValueError("empty corpus")

    cand_total = sum(len(c) for c in candidates)
    ref_total = sum(len(r) for r in references)
    if cand_total == 0:
        return 0.0

    log_precisions = []
    for n in range(1, max_n + 1):
        matched = 0
        total = 0
        for cand, ref in zip(candidates, references):
            counts = _ngram_counts(cand, n)
            ref_counts = _ngram_counts(ref, n)
            matched += sum(min(k, ref_counts[g]) for g, k in counts.items())
            total += sum(counts.values())
        if matched == 0 or total == 0:
            return 0.0
        log_precisions.append(math.log(matched / total))

    brevity = math.exp(min(0.0, 1.0 - ref_total / cand_total))
    return clamp01(brevity * math.exp(sum(log_precisions) / max_n))


def bleu_metric(max_n: int = 4) -> Metric:
    return Metric(
        name=f"bleu{max_n}",
        privileged=True,
        fn=lambda anchor, cand: bleu([cand], [anchor], max_n=max_n),
    )


# ------------------------------------------------------- embedding-based score


class SeededUnitEmbeddings:
    """Deterministic per-token unit vectors, derived independently per token."""

    def __init__(self, dim: int = 8, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self._cache: dict[int, np.ndarray] = {}

    def vector(self, token: int) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            rng = np.random.default_rng([self.seed, token])
            raw = rng.standard_normal(self.dim)
            vec = raw / np.linalg.norm(raw)
            self._cache[token] = vec
        return vec


class TableEmbeddings:
    """Embeddings from an explicit (token -> vector) table; handy in tests."""

    def __init__(self, table: dict[int, np.ndarray]):
        self._table = {t: np.asarray(v, dtype=float) for t, v in table.items()}

    def vector(self, token: int) -> np.ndarray:
        return self._table[token]


def bert_style_score(candidate: Sequence, anchor: Sequence, embedder) -> float:
    """Greedy one-to-one token alignment by cosine similarity.

    Repeatedly match the globally most similar unmatched (candidate, anchor)
    token pair, average the matched similarities, rescale from [-1, 1] to
    [0, 1], and damp by min(len)/max(len) so degenerate lengths cannot win.
    Empty inputs score 0 by convention.
    """
    if not candidate or not anchor:
        return 0.0
    cand_vecs = np.stack([embedder.vector(t) for t in candidate])
    anch_vecs = np.stack([embedder.vector(t) for t in anchor])
    cand_vecs = cand_vecs / np.linalg.norm(cand_vecs, axis=1, keepdims=True)
    anch_vecs = anch_vecs / np.linalg.norm(anch_vecs, axis=1, keepdims=True)
    sims = cand_vecs @ anch_vecs.T

    n_pairs = min(len(candidate), len(anchor))
    work = sims.copy()
    total = 0.0
    for _ in range(n_pairs):
        flat = int(np.argmax(work))
        i, j = divmod(flat, work.shape[1])
        total += sims[i, j]
        work[i, :] = -np.inf
        work[:, j] = -np.inf
    mean_sim = total / n_pairs

    length_penalty = n_pairs / max(len(candidate), len(anchor))
    return clamp01((mean_sim + 1.0) / 2.0 * length_penalty)


def bert_style_metric(embedder, name: str = "bertscore") -> Metric:
    """Reference-anchored variant (privileged)."""
    return Metric(
        name=name,
        privileged=True,
        fn=lambda anchor, cand: bert_style_score(cand, anchor, embedder),
    )


def multilingual_bert_style_metric(embedder, name: str = "mlbertscore") -> Metric:
    """Source-anchored variant (unprivileged): score candidates against the source."""
    return Metric(
        name=name,
        privileged=False,
        fn=lambda anchor, cand: bert_style_score(cand, anchor, embedder),
    )


# ------------------------------------------------------------------ toy metrics


def toy_occupancy(candidate: Sequence, target: int, horizon: int) -> float:
    """Fraction of the horizon filled with the target token."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return clamp01(sum(1 for t in candidate if t == target) / horizon)


def occupancy_metric(target: int, horizon: int) -> Metric:
    return Metric(
        name=f"occupancy({target},{horizon})",
        privileged=False,
        fn=lambda _anchor, cand: toy_occupancy(cand, target, horizon),
    )


def toy_coverage(candidate: Sequence, source: Sequence) -> float:
    """Fraction of the source's distinct tokens appearing in the candidate."""
    source_set = set(source)
    if not source_set:
        raise ValueError("source must be non-empty")
    return clamp01(len(source_set & set(candidate)) / len(source_set))


def coverage_metric() -> Metric:
    return Metric(
        name="coverage",
        privileged=False,
        fn=lambda anchor, cand: toy_coverage(cand, anchor),
    )
