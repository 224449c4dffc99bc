"""Threshold-swept evaluation: ROC/AUROC, PR/AUPRC, sparsity, stability.

Events with polarity below 2 are the signal class, the rest noise. The
pass rule is ``score < threshold``, swept over every distinct score
plus infinite sentinels, so curves are exact for the given sample.
Areas use trapezoidal integration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .events import EventStream


@dataclass(frozen=True)
class RocCurve:
    """(fpr, tpr) per threshold, ascending from (0, 0) to (1, 1)."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auroc: float


@dataclass(frozen=True)
class PrCurve:
    """(recall, precision) per threshold; precision is 1 at recall 0."""

    thresholds: np.ndarray
    recall: np.ndarray
    precision: np.ndarray
    auprc: float


def _scores_and_labels(scored):
    """Accept a ScoredStream or any iterable of ScoredEvent."""
    if hasattr(scored, "scores") and hasattr(scored, "is_noise"):
        return np.asarray(scored.scores, dtype=np.float64), scored.is_noise()
    scores, noise = [], []
    for se in scored:
        scores.append(se.score)
        noise.append(se.event.p >= 2)
    return np.asarray(scores, dtype=np.float64), np.asarray(noise, dtype=bool)


def _sweep_counts(scores: np.ndarray, is_noise: np.ndarray):
    """Cumulative pass counts per candidate threshold.

    Returns (thresholds, passed_signal, passed_noise, total_signal,
    total_noise); thresholds are -inf, the distinct scores, +inf, and
    the pass rule is strict (score < threshold).
    """
    if scores.size == 0:
        raise DomainError("cannot evaluate an empty score set")
    if not np.all(np.isfinite(scores)):
        raise DomainError("scores must be finite")
    total_noise = int(is_noise.sum())
    total_signal = int(scores.size - total_noise)
    if total_noise == 0 or total_signal == 0:
        raise DomainError("need both a signal and a noise event to evaluate")

    order = np.argsort(scores, kind="stable")
    s = scores[order]
    noise_sorted = is_noise[order]
    cum_noise = np.cumsum(noise_sorted)
    cum_signal = np.arange(1, s.size + 1) - cum_noise

    distinct, first_idx = np.unique(s, return_index=True)
    # counts strictly below each distinct score, then below +inf
    below_sig = np.concatenate([[0], np.where(first_idx > 0, cum_signal[first_idx - 1], 0),
                                [total_signal]])
    below_noise = np.concatenate([[0], np.where(first_idx > 0, cum_noise[first_idx - 1], 0),
                                  [total_noise]])
    thresholds = np.concatenate([[-np.inf], distinct, [np.inf]])
    return thresholds, below_sig, below_noise, total_signal, total_noise


def roc_from_scores(scored) -> RocCurve:
    """Exact ROC over all distinct-score thresholds, area by trapezoid."""
    scores, is_noise = _scores_and_labels(scored)
    thresholds, pass_sig, pass_noise, n_sig, n_noise = _sweep_counts(scores, is_noise)
    tpr = pass_sig / n_sig
    fpr = pass_noise / n_noise
    auroc = float(np.trapezoid(tpr, fpr))
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr, auroc=auroc)


def auprc_from_scores(scored) -> PrCurve:
    """Exact precision-recall sweep, area by trapezoid over recall."""
    scores, is_noise = _scores_and_labels(scored)
    thresholds, pass_sig, pass_noise, n_sig, _ = _sweep_counts(scores, is_noise)
    recall = pass_sig / n_sig
    passed = pass_sig + pass_noise
    precision = np.ones_like(recall)
    nz = passed > 0
    precision[nz] = pass_sig[nz] / passed[nz]
    auprc = float(np.trapezoid(precision, recall))
    return PrCurve(thresholds=thresholds, recall=recall, precision=precision,
                   auprc=auprc)


def sparsity(stream: EventStream, window_us: int = 20_000):
    """Per-window fraction of pixels without events; (mean, median).

    Windows tile the time axis from the first event's window to the
    last's; an empty stream counts as one fully sparse window.
    """
    if window_us <= 0:
        raise ConfigError(f"window must be positive, got {window_us}")
    n_px = stream.width * stream.height
    if len(stream) == 0:
        return 1.0, 1.0
    win = stream.t // window_us
    first, last = int(win[0]), int(win[-1])
    n_windows = last - first + 1
    # distinct (window, pixel) pairs -> occupied pixel count per window
    key = (win - first) * n_px + stream.y.astype(np.int64) * stream.width + stream.x
    uniq = np.unique(key)
    occ_win = uniq // n_px
    counts = np.bincount(occ_win.astype(np.int64), minlength=n_windows)
    frac = 1.0 - counts / n_px
    return float(frac.mean()), float(np.median(frac))


def stability(aurocs) -> float:
    """Relative spread of AUROC over noise rates: (max-min)/max * 100."""
    values = list(aurocs.values()) if hasattr(aurocs, "values") else list(aurocs)
    if len(values) < 2:
        raise DomainError("stability needs at least two rates")
    hi, lo = max(values), min(values)
    return (hi - lo) / hi * 100.0
