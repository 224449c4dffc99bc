"""Independent reference implementations used only by tests.

Everything here is deliberately brute force or exact-rational and
stays decoupled from the library's production code paths.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def brute_force_roc(scores, is_noise):
    """All-thresholds ROC by direct counting: O(n * thresholds).

    Pass rule is score < threshold; thresholds are -inf, every distinct
    score, +inf. Returns (fpr, tpr, auroc) with trapezoidal area.
    """
    scores = list(scores)
    is_noise = list(is_noise)
    n_sig = sum(1 for m in is_noise if not m)
    n_noise = sum(1 for m in is_noise if m)
    thresholds = [float("-inf")] + sorted(set(scores)) + [float("inf")]
    fpr, tpr = [], []
    for th in thresholds:
        ps = sum(1 for s, m in zip(scores, is_noise) if not m and s < th)
        pn = sum(1 for s, m in zip(scores, is_noise) if m and s < th)
        tpr.append(ps / n_sig)
        fpr.append(pn / n_noise)
    auroc = 0.0
    for i in range(1, len(fpr)):
        auroc += (fpr[i] - fpr[i - 1]) * (tpr[i] + tpr[i - 1]) / 2.0
    return fpr, tpr, auroc


def brute_force_auprc(scores, is_noise):
    """All-thresholds PR area by direct counting; precision 1 at recall 0."""
    scores = list(scores)
    is_noise = list(is_noise)
    n_sig = sum(1 for m in is_noise if not m)
    thresholds = [float("-inf")] + sorted(set(scores)) + [float("inf")]
    recall, precision = [], []
    for th in thresholds:
        ps = sum(1 for s, m in zip(scores, is_noise) if not m and s < th)
        pn = sum(1 for s, m in zip(scores, is_noise) if m and s < th)
        recall.append(ps / n_sig)
        precision.append(ps / (ps + pn) if ps + pn else 1.0)
    area = 0.0
    for i in range(1, len(recall)):
        area += (recall[i] - recall[i - 1]) * (precision[i] + precision[i - 1]) / 2.0
    return recall, precision, area


def rational_dif_score(ctx, ts_e):
    """Literal exact-rational evaluation of the distance-form quotient."""
    c11 = Fraction(1) / (Fraction(ctx.i11) * Fraction(ctx.d11))
    c12 = Fraction(1) / (Fraction(ctx.i12) * Fraction(ctx.d12))
    c21 = Fraction(1) / (Fraction(ctx.i21) * Fraction(ctx.d21))
    c22 = Fraction(1) / (Fraction(ctx.i22) * Fraction(ctx.d22))
    num = ((ts_e - ctx.t11) * c11 + (ts_e - ctx.t12) * c12
           + (ts_e - ctx.t21) * c21 + (ts_e - ctx.t22) * c22)
    return num / (c11 + c12 + c21 + c22)


def rational_bif_score(ctx, ts_e):
    """Literal exact-rational evaluation of the bilinear quotient."""
    i11, i12 = Fraction(ctx.i11), Fraction(ctx.i12)
    i21, i22 = Fraction(ctx.i21), Fraction(ctx.i22)
    dt11, dt12 = ts_e - ctx.t11, ts_e - ctx.t12
    dt21, dt22 = ts_e - ctx.t21, ts_e - ctx.t22
    dt1 = ((dt11 * i12 * ctx.dx2 + dt12 * i11 * ctx.dx1)
           / (i12 * ctx.dx2 + i11 * ctx.dx1))
    dt2 = ((dt21 * i22 * ctx.dx2 + dt22 * i21 * ctx.dx1)
           / (i22 * ctx.dx2 + i21 * ctx.dx1))
    w_top = i21 * i22 * ctx.dy2
    w_bot = i11 * i12 * ctx.dy1
    return (dt1 * w_top + dt2 * w_bot) / (w_top + w_bot)


def simulate_dif_reference(stream, cfg):
    """Slow event-by-event reference of the full dif run, fractions-free.

    Rebuilds grid state with plain Python floats and the quotient-form
    score; used to cross-check filter_stream end to end.
    """
    import evfilt as ev

    grid = ev.AreaGrid.for_config(stream.width, stream.height, cfg)
    u = cfg.update_factor
    scores = []
    last_boundary = 0
    for e in stream:
        if cfg.global_update_period_us > 0:
            b = (e.t // cfg.global_update_period_us) * cfg.global_update_period_us
            if b > last_boundary:
                ev.global_update(grid, float(b), u)
                last_boundary = b
        ctx = ev.neighbor_context(grid, e.x, e.y, cfg.scale)
        scores.append(ev.dif_score(ctx, float(e.t)))
        ev.update_area(grid, e, u)
    return np.array(scores)


def count_events_expected(rate_hz_px, width, height, duration_us):
    return rate_hz_px * width * height * duration_us * 1e-6
