"""Acceptance gate: one test per criterion, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict
lines; every tolerance is pinned here, nothing is deferred.
"""

import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

import evfilt as ev
from evfilt.cli import main as cli_main

from conftest import BENCH_RATES, BENCH_SEED
from oracles import (
    brute_force_auprc,
    brute_force_roc,
    rational_bif_score,
    rational_dif_score,
)
from synth import random_stream, same_area_burst_stream


def verdict(num, name, ok, detail):
    line = f"ACCEPTANCE {num} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print("\n" + line)
    assert ok, line


@pytest.fixture(scope="module")
def bench_aurocs(bench_mixes):
    """Shared runs: float DIF and NNb at all rates, hw DIF where needed."""
    cfg = ev.FilterConfig()
    hw = ev.HwParams()
    out = {"dif": {}, "nnb": {}, "hw": {}}
    for rate, mixed in bench_mixes.items():
        out["dif"][rate] = ev.roc_from_scores(
            ev.filter_stream(mixed, cfg, "dif")).auroc
        out["nnb"][rate] = ev.roc_from_scores(
            ev.nnb_filter(mixed, cfg.filter_length_us)).auroc
        if rate in (0.25, 1.0, 5.0):
            out["hw"][rate] = ev.roc_from_scores(
                ev.hw_filter_stream(mixed, cfg, hw)).auroc
    return out


def test_criterion_1_division_free_equivalence():
    """Exact-rational quotient thresholding agrees with the
    division-free products on 1e5 random contexts, for both forms."""
    rng = random.Random(20_240_601)
    n = 100_000
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(n):
        ivs = [rng.randrange(1, 1 << 24) for _ in range(4)]
        dqs = [rng.randrange(1, 128) for _ in range(4)]
        dts = [rng.randrange(-(1 << 23), 1 << 23) for _ in range(4)]
        half_dx = rng.randrange(1, 32)
        half_dy = rng.randrange(1, 32)
        f_l = rng.randrange(1, 10_000)
        ctx = ev.NeighborContext(
            t11=-dts[0], t12=-dts[1], t21=-dts[2], t22=-dts[3],
            i11=ivs[0], i12=ivs[1], i21=ivs[2], i22=ivs[3],
            dx1=Fraction(half_dx, 2), dx2=16 - Fraction(half_dx, 2),
            dy1=Fraction(half_dy, 2), dy2=16 - Fraction(half_dy, 2),
            d11=Fraction(dqs[0], 4), d12=Fraction(dqs[1], 4),
            d21=Fraction(dqs[2], 4), d22=Fraction(dqs[3], 4))
        want_dif = rational_dif_score(ctx, 0) < f_l
        got_dif, _ = ev.dif_decide_division_free(ctx, 0, f_l)
        want_bif = rational_bif_score(ctx, 0) < f_l
        got_bif, _ = ev.bif_decide_division_free(ctx, 0, f_l)
        if got_dif != want_dif or got_bif != want_bif:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60.0
    verdict(1, "division-free equivalence", ok,
            f"{n} contexts, {mismatches} mismatches, {elapsed:.1f}s")


def test_criterion_2_pipeline_arithmetic():
    hd = ev.pipeline_stats(1280, 720, 16, 312.70e6, 20_000)
    vga = ev.pipeline_stats(640, 480, 16, 400.32e6, 20_000)
    lat_hd = 30 / 312.70e6 * 1e9
    lat_vga = 30 / 400.32e6 * 1e9
    checks = [
        abs(hd.global_update_duration_us - 11.53) <= 0.01 * 11.53,
        abs(vga.global_update_duration_us - 3.01) <= 0.01 * 3.01,
        abs(hd.effective_meps - 312.52) <= 0.001 * 312.52,
        abs(vga.effective_meps - 400.26) <= 0.001 * 400.26,
        abs(lat_hd - 96) <= 1.0,
        abs(lat_vga - 75) <= 1.0,
    ]
    verdict(2, "pipeline arithmetic", all(checks),
            f"durations {hd.global_update_duration_us:.4f}/{vga.global_update_duration_us:.4f} us, "
            f"meps {hd.effective_meps:.4f}/{vga.effective_meps:.4f}, "
            f"latency {lat_hd:.2f}/{lat_vga:.2f} ns")


def test_criterion_3_hardware_model_fidelity(bench_aurocs):
    gaps = {rate: abs(bench_aurocs["dif"][rate] - bench_aurocs["hw"][rate])
            for rate in (0.25, 1.0, 5.0)}
    ok = all(g <= 0.005 for g in gaps.values())
    verdict(3, "hardware-model fidelity", ok,
            ", ".join(f"rate {r}: |d|={g:.5f}" for r, g in gaps.items()))


def test_criterion_4_stcf1_equals_nnb():
    total = 0
    mismatches = 0
    for seed in (101, 202, 303):
        s = random_stream(128, 96, 10_000, seed=seed, t_max=300_000)
        a = ev.nnb_filter(s, 200)
        b = ev.stcf_filter(s, 1, 200)
        mismatches += int(np.sum(a.decisions != b.decisions))
        total += len(s)
    verdict(4, "baseline identity STCF(1)=NNb", mismatches == 0,
            f"{total} events, {mismatches} decision mismatches")


def test_criterion_5_stability_under_noise(bench_aurocs):
    assert set(bench_aurocs["dif"]) == set(BENCH_RATES)
    dif_drop = ev.stability(bench_aurocs["dif"])
    nnb_drop = ev.stability(bench_aurocs["nnb"])
    ok = dif_drop <= 3.0 and dif_drop < nnb_drop
    verdict(5, "stability under noise", ok,
            f"dif drop {dif_drop:.2f}% (<=3%), nnb drop {nnb_drop:.2f}%")


def test_criterion_6_noise_generator_calibration():
    details = []
    ok = True
    for rate in (0.01, 1.0, 5.0):
        cfg = ev.NoiseConfig(width=640, height=480, rate_hz_px=rate,
                             duration_us=1_000_000, seed=BENCH_SEED)
        got = len(ev.generate_noise(cfg))
        expect = rate * 640 * 480 * 1.0
        sigma = math.sqrt(expect)
        ok = ok and abs(got - expect) <= 3 * sigma
        details.append(f"{rate} Hz/px: {got} vs {expect:.0f}+-{3 * sigma:.0f}")
    verdict(6, "noise generator calibration", ok, "; ".join(details))


def test_criterion_7_hazard_model_equivalence():
    s = same_area_burst_stream(256, 192, 16, 100_000, seed=404)
    cfg = ev.FilterConfig()
    p = ev.HwParams()
    seq = ev.hw_filter_stream(s, cfg, p, engine="python")
    dec, stats = ev.pipeline_simulate(s, cfg, p, 312.70e6)
    mismatches = int(np.sum(dec != seq.decisions))
    verdict(7, "hazard-model equivalence", mismatches == 0,
            f"{len(s)} events, {mismatches} mismatches, "
            f"{stats.stall_cycles} stall cycles")


def test_criterion_8_metric_oracles():
    rng = np.random.default_rng(505)
    n = 1000
    scores = rng.normal(size=n).round(2)  # heavy ties
    noise = rng.random(n) < 0.5

    class Fake:
        def __init__(self):
            self.scores = scores

        def is_noise(self):
            return noise

    roc = ev.roc_from_scores(Fake())
    pr = ev.auprc_from_scores(Fake())
    _, _, want_auroc = brute_force_roc(scores, noise)
    _, _, want_auprc = brute_force_auprc(scores, noise)
    d_roc = abs(roc.auroc - want_auroc)
    d_pr = abs(pr.auprc - want_auprc)
    ok = d_roc <= 1e-12 and d_pr <= 1e-12
    verdict(8, "metric oracles", ok,
            f"|dAUROC|={d_roc:.2e}, |dAUPRC|={d_pr:.2e} on {n} events")


def test_criterion_9_throughput_goal(tmp_path, bar_signal):
    """Engineering goal, report-only: >= 10 MEPS single-threaded float dif."""
    stream = bar_signal
    if len(stream) < 10 ** 6:
        extra = random_stream(stream.width, stream.height,
                              10 ** 6 - len(stream), seed=606,
                              t_max=int(stream.t[-1]))
        stream = ev.merge_streams(stream, ev.relabel_noise(
            ev.EventStream(extra.width, extra.height, extra.t, extra.x,
                           extra.y, extra.p % 2)))
    path = tmp_path / "bench.evt64"
    ev.write_events(stream, path)
    out = tmp_path / "bench.csv"
    rc = cli_main(["bench", "--in", str(path), "--algo", "dif",
                   "--repeat", "3", "--out", str(out)])
    assert rc == 0
    from evfilt.manifest import RunManifest
    man = RunManifest.load(out)
    meps = man.meps
    reached = meps >= 10.0
    note = f"{meps:.1f} MEPS on {len(stream)} events"
    if not reached:
        note += " (goal missed; recorded in manifest, report-only)"
    verdict(9, "throughput goal (report-only)", True, note)
    assert man.meps is not None
