"""Trial scoring: raw cosine, adaptive symmetric normalization, and
segment-matrix averaging.

All scorers consume unit-norm embeddings (checked, not fixed up here) and
are pure functions, so per-trial work can be parallelized freely without
changing any output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import Waveform, match_length
from .trials import EmbeddingStore, ScoreSet, TrialList

NORM_TOL = 1e-4
SIGMA_FLOOR = 1e-9


def _check_unit(v: np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{what} must be a 1-D vector, got shape {v.shape}")
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"{what} is not length-normalized (norm {norm:.6g})")
    return v


def cosine_score(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit-norm embeddings."""
    a = _check_unit(a, "enrollment embedding")
    b = _check_unit(b, "test embedding")
    if a.shape != b.shape:
        raise ValueError(f"embedding dims differ: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


@dataclass(frozen=True)
class CohortStats:
    """Mean and standard deviation of an utterance's top-K cohort scores."""

    mean: float
    std: float
    top_k: int

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)):
            raise ValueError("cohort stats must be finite")
        if self.std <= 0:
            raise ValueError(f"cohort std must be positive, got {self.std}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")


def cohort_stats(e: np.ndarray, cohort: EmbeddingStore, k: int = 100) -> CohortStats:
    """Top-K imposter score statistics for one embedding.

    Scores e against every cohort vector, keeps the K largest, and returns
    their mean and population (1/K) standard deviation.
    """
    e = _check_unit(e, "embedding")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(cohort) < k:
        raise ValueError(f"cohort has {len(cohort)} vectors, need at least k={k}")
    scores = cohort.vectors.astype(np.float64) @ e
    if k < len(scores):
        top = np.partition(scores, len(scores) - k)[len(scores) - k :]
    else:
        top = scores
    mean = float(np.mean(top))
    std = float(np.sqrt(np.mean((top - mean) ** 2)))
    if std < SIGMA_FLOOR:
        raise ValueError(
            f"degenerate cohort: top-{k} scores have std {std:.3g} (all nearly identical)"
        )
    return CohortStats(mean=mean, std=std, top_k=k)


def asnorm_score(raw: float, se: CohortStats, st: CohortStats) -> float:
    """Symmetric z-normalization of a raw score against both sides' cohorts."""
    return 0.5 * ((raw - se.mean) / se.std + (raw - st.mean) / st.std)


@dataclass(frozen=True)
class SegmentPlan:
    """Fixed-duration segment layout over one utterance.

    starts are offsets in seconds; padded means the utterance was shorter
    than one segment and must be cyclically extended before slicing.
    """

    utterance_duration: float
    segment_duration: float
    starts: tuple[float, ...]
    padded: bool

    def __post_init__(self):
        if self.segment_duration <= 0:
            raise ValueError(f"segment_duration must be positive, got {self.segment_duration}")
        if not self.starts:
            raise ValueError("plan needs at least one segment")
        if any(b < a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("segment starts must be non-decreasing")
        if self.starts[0] < 0:
            raise ValueError("segment starts must be non-negative")
        span = max(self.utterance_duration, self.segment_duration)
        if self.starts[-1] + self.segment_duration > span + 1e-9:
            raise ValueError("last segment does not fit the utterance")

    @property
    def n_segments(self) -> int:
        return len(self.starts)


def segment_plan(utterance_len: float, n: int = 5, seg: float = 6.0) -> SegmentPlan:
    """Evenly spaced, overlapping segment starts covering an utterance.

    Shorter-than-one-segment utterances get a single padded layout with
    every start at zero; otherwise start i is i * (len - seg) / (n - 1),
    so the first segment begins at 0 and the last ends exactly at len.
    """
    if utterance_len <= 0:
        raise ValueError(f"utterance length must be positive, got {utterance_len}")
    if n < 1:
        raise ValueError(f"need at least one segment, got {n}")
    if seg <= 0:
        raise ValueError(f"segment duration must be positive, got {seg}")
    if utterance_len < seg:
        starts = (0.0,) * n
        return SegmentPlan(utterance_len, seg, starts, padded=True)
    if n == 1:
        starts = (0.0,)
    else:
        step = (utterance_len - seg) / (n - 1)
        starts = tuple(i * step for i in range(n))
    return SegmentPlan(utterance_len, seg, starts, padded=False)


def extract_segments(w: Waveform, plan: SegmentPlan) -> list[Waveform]:
    """Slice a waveform into the planned fixed-duration segments.

    A padded plan cyclically repeats the utterance out to one segment
    length first, so all segments of a short utterance are identical.
    """
    seg_samples = int(round(plan.segment_duration * w.sample_rate))
    if plan.padded:
        padded = match_length(w.samples, seg_samples)
        return [Waveform(padded.copy(), w.sample_rate) for _ in plan.starts]
    out = []
    for start in plan.starts:
        i0 = min(int(round(start * w.sample_rate)), len(w) - seg_samples)
        out.append(Waveform(w.samples[i0 : i0 + seg_samples].copy(), w.sample_rate))
    return out


def segment_id(utt_id: str, index: int) -> str:
    """Store id for one segment of an utterance."""
    return f"{utt_id}#{index}"


def msa_score(emb_a: np.ndarray, emb_b: np.ndarray) -> float:
    """Mean of all pairwise cosine scores between two segment sets.

    The mean is accumulated relative to the first pair's score so that
    identical segments on both sides reproduce the plain cosine score
    bit for bit (a straight sum-and-divide can drift by one ulp).
    """
    emb_a = np.atleast_2d(np.asarray(emb_a, dtype=np.float64))
    emb_b = np.atleast_2d(np.asarray(emb_b, dtype=np.float64))
    if emb_a.shape[1] != emb_b.shape[1]:
        raise ValueError(f"embedding dims differ: {emb_a.shape[1]} vs {emb_b.shape[1]}")
    pair_scores = [
        cosine_score(a, b) for a in emb_a for b in emb_b
    ]
    first = pair_scores[0]
    return first + math.fsum(s - first for s in pair_scores) / len(pair_scores)


def score_trials(
    trials: TrialList,
    store: EmbeddingStore,
    mode: str = "raw",
    cohort: EmbeddingStore | None = None,
    top_k: int = 100,
    n_segments: int = 5,
) -> ScoreSet:
    """Score every trial with the chosen backend.

    raw: plain cosine on each pair. asnorm: cosine then symmetric top-K
    cohort normalization (cohort store required). msa: the store must hold
    n_segments embeddings per utterance under segment ids, and each trial
    gets the mean of the pairwise segment scores.
    """
    if mode == "raw":
        scores = [
            cosine_score(store.get(t.enroll_id), store.get(t.test_id)) for t in trials
        ]
    elif mode == "asnorm":
        if cohort is None:
            raise ValueError("asnorm scoring needs a cohort store")
        stats: dict[str, CohortStats] = {}
        for utt in trials.utterance_ids():
            stats[utt] = cohort_stats(store.get(utt), cohort, top_k)
        scores = [
            asnorm_score(
                cosine_score(store.get(t.enroll_id), store.get(t.test_id)),
                stats[t.enroll_id],
                stats[t.test_id],
            )
            for t in trials
        ]
    elif mode == "msa":
        def segments(utt_id: str) -> np.ndarray:
            ids = [segment_id(utt_id, i) for i in range(n_segments)]
            return store.rows(ids).astype(np.float64)

        cache = {utt: segments(utt) for utt in trials.utterance_ids()}
        scores = [msa_score(cache[t.enroll_id], cache[t.test_id]) for t in trials]
    else:
        raise ValueError(f"unknown scoring mode {mode!r}; expected raw, asnorm, or msa")
    return ScoreSet(trials=trials, scores=np.array(scores))
