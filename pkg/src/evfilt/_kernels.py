"""JIT kernels for the per-event hot loops.

Each kernel mirrors its pure-Python counterpart expression for
expression: identical operand ordering, identical rounding points, so
both engines produce bit-identical scores and state. Any change here
must be mirrored in core/hw/baselines and is guarded by the
engine-equivalence tests.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from . import hw as _hw


@njit(cache=True)
def _reference_loop(t, x, y, ts_g, iv_g, active, scale, u, f_l, period, use_bif):
    n = t.shape[0]
    rows, cols = ts_g.shape
    scores = np.empty(n, dtype=np.float64)
    decisions = np.empty(n, dtype=np.bool_)
    center = (scale - 1) / 2.0
    last_boundary = np.int64(0)
    for i in range(n):
        te = t[i]
        if period > 0:
            boundary = (te // period) * period
            if boundary > last_boundary:
                nowf = float(boundary)
                for r in range(rows):
                    for c in range(cols):
                        if not active[r, c]:
                            tsv = ts_g[r, c]
                            ts_g[r, c] = tsv * (1.0 - u) + nowf * u
                            iv_g[r, c] = iv_g[r, c] * (1.0 - u) + (nowf - tsv) * u
                        active[r, c] = False
                last_boundary = boundary

        xi = x[i]
        yi = y[i]
        col = xi // scale
        row = yi // scale
        ox = xi - col * scale
        oy = yi - row * scale
        if ox < center:
            dx2 = center - ox
            dx1 = scale - dx2
            dc = -1
        else:
            dx1 = ox - center
            dx2 = scale - dx1
            dc = 0
        if oy < center:
            dy2 = center - oy
            dy1 = scale - dy2
            dr = -1
        else:
            dy1 = oy - center
            dy2 = scale - dy1
            dr = 0
        c1 = min(max(col + dc, 0), cols - 1)
        c2 = min(col + dc + 1, cols - 1)
        r1 = min(max(row + dr, 0), rows - 1)
        r2 = min(row + dr + 1, rows - 1)

        t11 = ts_g[r1, c1]
        t12 = ts_g[r1, c2]
        t21 = ts_g[r2, c1]
        t22 = ts_g[r2, c2]
        i11 = iv_g[r1, c1]
        i12 = iv_g[r1, c2]
        i21 = iv_g[r2, c1]
        i22 = iv_g[r2, c2]
        tef = float(te)

        if use_bif:
            dt11 = tef - t11
            dt12 = tef - t12
            dt21 = tef - t21
            dt22 = tef - t22
            dt1 = ((dt11 * i12 * dx2 + dt12 * i11 * dx1)
                   / (i12 * dx2 + i11 * dx1))
            dt2 = ((dt21 * i22 * dx2 + dt22 * i21 * dx1)
                   / (i22 * dx2 + i21 * dx1))
            w_top = i21 * i22 * dy2
            w_bot = i11 * i12 * dy1
            s = (dt1 * w_top + dt2 * w_bot) / (w_top + w_bot)
        else:
            d11 = math.sqrt(dx1 * dx1 + dy1 * dy1)
            d12 = math.sqrt(dx2 * dx2 + dy1 * dy1)
            d21 = math.sqrt(dx1 * dx1 + dy2 * dy2)
            d22 = math.sqrt(dx2 * dx2 + dy2 * dy2)
            c11 = 1 / (i11 * d11)
            c12 = 1 / (i12 * d12)
            c21 = 1 / (i21 * d21)
            c22 = 1 / (i22 * d22)
            num = ((tef - t11) * c11 + (tef - t12) * c12
                   + (tef - t21) * c21 + (tef - t22) * c22)
            s = num / (c11 + c12 + c21 + c22)

        scores[i] = s
        decisions[i] = s < f_l

        tsv = ts_g[row, col]
        ts_g[row, col] = tsv * (1.0 - u) + tef * u
        iv_g[row, col] = iv_g[row, col] * (1.0 - u) + (tef - tsv) * u
        active[row, col] = True
    return scores, decisions


def run_reference(stream, cfg, grid, algo):
    scores, decisions = _reference_loop(
        stream.t.astype(np.int64),
        stream.x.astype(np.int64),
        stream.y.astype(np.int64),
        grid.ts, grid.iv, grid.active,
        np.int64(cfg.scale), cfg.update_factor, float(cfg.filter_length_us),
        np.int64(cfg.global_update_period_us), algo == "bif")
    return scores, decisions


@njit(cache=True)
def _hw_loop(t, x, y, ts_g, iv_g, active, scale, o, f_l, period, lut,
             trunc_bits, k_max, dt_half, dt_mask, iv_max):
    n = t.shape[0]
    rows, cols = ts_g.shape
    scores = np.empty(n, dtype=np.float64)
    decisions = np.empty(n, dtype=np.bool_)
    half_scale2 = scale - 1  # compare 2*offset against this for the bracket side
    last_boundary = np.int64(0)
    for i in range(n):
        te = t[i]
        if period > 0:
            boundary = (te // period) * period
            if boundary > last_boundary:
                for r in range(rows):
                    for c in range(cols):
                        if not active[r, c]:
                            delta = boundary - ts_g[r, c]
                            ts_g[r, c] = ts_g[r, c] + (delta >> o)
                            ivn = iv_g[r, c] + ((delta - iv_g[r, c]) >> o)
                            if ivn < 0:
                                ivn = 0
                            elif ivn > iv_max:
                                ivn = iv_max
                            iv_g[r, c] = ivn
                        active[r, c] = False
                last_boundary = boundary

        xi = x[i]
        yi = y[i]
        col = xi // scale
        row = yi // scale
        ox = xi - col * scale
        oy = yi - row * scale
        dc = -1 if 2 * ox < half_scale2 else 0
        dr = -1 if 2 * oy < half_scale2 else 0
        c1 = min(max(col + dc, 0), cols - 1)
        c2 = min(col + dc + 1, cols - 1)
        r1 = min(max(row + dr, 0), rows - 1)
        r2 = min(row + dr + 1, rows - 1)

        dt11 = ((te - ts_g[r1, c1] + dt_half) & dt_mask) - dt_half
        dt12 = ((te - ts_g[r1, c2] + dt_half) & dt_mask) - dt_half
        dt21 = ((te - ts_g[r2, c1] + dt_half) & dt_mask) - dt_half
        dt22 = ((te - ts_g[r2, c2] + dt_half) & dt_mask) - dt_half

        k11 = (iv_g[r1, c1] * lut[ox, oy, 0]) >> trunc_bits
        k12 = (iv_g[r1, c2] * lut[ox, oy, 1]) >> trunc_bits
        k21 = (iv_g[r2, c1] * lut[ox, oy, 2]) >> trunc_bits
        k22 = (iv_g[r2, c2] * lut[ox, oy, 3]) >> trunc_bits
        k11 = min(max(k11, 1), k_max)
        k12 = min(max(k12, 1), k_max)
        k21 = min(max(k21, 1), k_max)
        k22 = min(max(k22, 1), k_max)

        kd1 = k12 * k21
        kd2 = k11 * k22
        d_11 = kd1 * k22
        d_12 = kd2 * k21
        d_21 = kd2 * k12
        d_22 = kd1 * k11
        d_sum = (d_11 + d_12) + (d_21 + d_22)
        f_c = f_l * d_sum
        dt_c = (dt11 * d_11 + dt12 * d_12) + (dt21 * d_21 + dt22 * d_22)
        decisions[i] = f_c > dt_c
        scores[i] = dt_c / d_sum

        delta = te - ts_g[row, col]
        ts_g[row, col] = ts_g[row, col] + (delta >> o)
        ivn = iv_g[row, col] + ((delta - iv_g[row, col]) >> o)
        if ivn < 0:
            ivn = 0
        elif ivn > iv_max:
            ivn = iv_max
        iv_g[row, col] = ivn
        active[row, col] = True
    return scores, decisions


def run_hw(stream, cfg, p):
    ts_g, iv_g, active, _, _ = _hw._int_grid(stream, cfg, p)
    lut = _hw.distance_lut(cfg.scale, p.dist_frac_bits)
    scores, decisions = _hw_loop(
        stream.t.astype(np.int64),
        stream.x.astype(np.int64),
        stream.y.astype(np.int64),
        ts_g, iv_g, active,
        np.int64(cfg.scale), np.int64(p.update_shift),
        np.int64(int(cfg.filter_length_us)),
        np.int64(cfg.global_update_period_us), lut,
        np.int64(p.trunc_bits), np.int64(p.k_max),
        np.int64(1 << (p.dt_bits - 1)), np.int64((1 << p.dt_bits) - 1),
        np.int64(p.iv_max))
    return scores, decisions


@njit(cache=True)
def _nnb_loop(t, x, y, last, window):
    n = t.shape[0]
    height, width = last.shape
    scores = np.empty(n, dtype=np.float64)
    decisions = np.empty(n, dtype=np.bool_)
    for i in range(n):
        xi = x[i]
        yi = y[i]
        best = np.int64(0)
        for dy in range(-1, 2):
            yy = yi + dy
            if yy < 0 or yy >= height:
                continue
            for dx in range(-1, 2):
                if dx == 0 and dy == 0:
                    continue
                xx = xi + dx
                if xx < 0 or xx >= width:
                    continue
                v = last[yy, xx]
                if v > best:
                    best = v
        s = float(t[i] - best)
        scores[i] = s
        decisions[i] = s < window
        last[yi, xi] = t[i]
    return scores, decisions


@njit(cache=True)
def _stcf_loop(t, x, y, last, n_required, window):
    n = t.shape[0]
    height, width = last.shape
    scores = np.empty(n, dtype=np.float64)
    decisions = np.empty(n, dtype=np.bool_)
    vals = np.empty(8, dtype=np.int64)
    for i in range(n):
        xi = x[i]
        yi = y[i]
        k = 0
        for dy in range(-1, 2):
            for dx in range(-1, 2):
                if dx == 0 and dy == 0:
                    continue
                yy = yi + dy
                xx = xi + dx
                if 0 <= yy < height and 0 <= xx < width:
                    vals[k] = last[yy, xx]
                else:
                    vals[k] = 0
                k += 1
        # selection of the n-th largest neighbor timestamp
        for sel in range(n_required):
            m = sel
            for j in range(sel + 1, 8):
                if vals[j] > vals[m]:
                    m = j
            tmp = vals[sel]
            vals[sel] = vals[m]
            vals[m] = tmp
        s = float(t[i] - vals[n_required - 1])
        scores[i] = s
        decisions[i] = s < window
        last[yi, xi] = t[i]
    return scores, decisions


def run_nnb(stream, last, window):
    return _nnb_loop(stream.t.astype(np.int64), stream.x.astype(np.int64),
                     stream.y.astype(np.int64), last, float(window))


def run_stcf(stream, last, n_required, window):
    return _stcf_loop(stream.t.astype(np.int64), stream.x.astype(np.int64),
                      stream.y.astype(np.int64), last, np.int64(n_required),
                      float(window))
