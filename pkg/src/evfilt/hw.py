"""Bit-accurate integer model of the FPGA filter datapath.

Mirrors the deployed architecture rather than the real-valued
reference: euclidean distances come from a quantized lookup table,
interval*distance coefficients are truncated and saturated, timestamp
differences wrap at a fixed signed width, and the IIR updates are
arithmetic shifts on integers. A cycle-level pipeline simulator models
the three-cycle read visibility of the area memories, the forwarding
cache that hides it, and the stall taken by the periodic global
update.

The hardware emits only the pass/reject bit. For threshold sweeps the
model additionally exposes the exact per-event ratio dT_c / D_sum; the
trace marks it as a model-only observable.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import InitVar, dataclass

import numpy as np

from .core import AreaGrid, DecisionTrace, FilterConfig, ScoredStream, _axis_bracket
from .errors import ConfigError, TimestampOrderError
from .events import EventStream

LATENCY_CYCLES = 30
DEFAULT_OVERHEAD_CYCLES = 5


@dataclass(frozen=True)
class HwParams:
    """Datapath widths. Defaults are the synthesized configuration.

    ``validate=False`` skips the range checks for model studies that
    explore widths outside the supported hardware envelope (for
    example, truncation disabled entirely).
    """

    trunc_bits: int = 8
    k_sat_bits: int = 12
    dt_bits: int = 24
    dist_frac_bits: int = 2
    update_shift: int = 2
    ts_bits: int = 32
    iv_bits: int = 24
    validate: InitVar[bool] = True

    def __post_init__(self, validate):
        if not validate:
            return
        if not 7 <= self.trunc_bits <= 10:
            raise ConfigError(f"trunc_bits must be in [7, 10], got {self.trunc_bits}")
        if self.k_sat_bits not in (11, 12, 13):
            raise ConfigError(f"k_sat_bits must be 11, 12 or 13, got {self.k_sat_bits}")
        if self.dt_bits != 24:
            raise ConfigError(f"dt_bits is fixed at 24, got {self.dt_bits}")
        if self.dist_frac_bits != 2:
            raise ConfigError(f"dist_frac_bits is fixed at 2, got {self.dist_frac_bits}")
        if self.update_shift < 0:
            raise ConfigError("update_shift must be >= 0")

    @property
    def k_max(self) -> int:
        return (1 << self.k_sat_bits) - 1

    @property
    def iv_max(self) -> int:
        return (1 << self.iv_bits) - 1


@dataclass
class PipelineStats:
    """Throughput accounting for one pipeline configuration."""

    clock_hz: float
    events_processed: int
    stall_cycles: int
    latency_cycles: int
    effective_meps: float
    global_update_duration_us: float


def quantize_distance(dx: float, dy: float, frac_bits: int = 2) -> int:
    """Euclidean distance rounded to ``frac_bits`` fractional bits,
    returned in units of 2**-frac_bits (minimum one unit).

    Half-integer dx/dy can never land exactly between two grid points
    (2**(f-1) * sqrt(integer) is an integer or irrational), so the
    round-half-up below never actually breaks a tie.
    """
    unit = 1 << frac_bits
    q = int(math.floor(math.sqrt(dx * dx + dy * dy) * unit + 0.5))
    return max(q, 1)


def distance_lut(scale: int, dist_frac_bits: int = 2) -> np.ndarray:
    """Quantized center distances for every in-area offset.

    Shape (scale, scale, 4); the last axis orders the bracketing areas
    (upper-left, upper-right, lower-left, lower-right).
    """
    if scale & (scale - 1):
        raise ConfigError(f"scale must be a power of two, got {scale}")
    lut = np.empty((scale, scale, 4), dtype=np.int64)
    for ox in range(scale):
        _, dx1, dx2 = _axis_bracket(ox, scale)
        for oy in range(scale):
            _, dy1, dy2 = _axis_bracket(oy, scale)
            lut[ox, oy, 0] = quantize_distance(dx1, dy1, dist_frac_bits)
            lut[ox, oy, 1] = quantize_distance(dx2, dy1, dist_frac_bits)
            lut[ox, oy, 2] = quantize_distance(dx1, dy2, dist_frac_bits)
            lut[ox, oy, 3] = quantize_distance(dx2, dy2, dist_frac_bits)
    return lut


def hw_k(interval: int, d_q: int, p: HwParams) -> int:
    """Truncated, saturated interval*distance coefficient.

    The product carries the distance's fractional bits; truncation
    discards them along with further low bits. A zero coefficient would
    erase the area's weight entirely, so the floor clamp is 1.
    """
    raw = int(interval) * int(d_q)
    shifted = raw >> p.trunc_bits
    if shifted < 1:
        return 1
    return min(shifted, p.k_max)


def wrap_signed(value: int, bits: int) -> int:
    """Two's-complement truncation to ``bits`` (hardware wrap, not saturate)."""
    half = 1 << (bits - 1)
    return ((value + half) & ((1 << bits) - 1)) - half


def hw_decide(dts, ks, filter_length: int, p: HwParams):
    """Division-free distance-form decision on the integer datapath.

    ``dts`` must already be wrapped to ``dt_bits``. Products are
    factored through the two shared pair products, so the whole
    decision costs 11 multiplications (6 for the area products, 4 for
    the difference terms, 1 for the threshold side); the trace records
    the count.
    """
    dt11, dt12, dt21, dt22 = (int(v) for v in dts)
    k11, k12, k21, k22 = (int(v) for v in ks)
    mults = 0
    kd1 = k12 * k21; mults += 1
    kd2 = k11 * k22; mults += 1
    d_11 = kd1 * k22; mults += 1
    d_12 = kd2 * k21; mults += 1
    d_21 = kd2 * k12; mults += 1
    d_22 = kd1 * k11; mults += 1
    d_sum = (d_11 + d_12) + (d_21 + d_22)
    f_c = int(filter_length) * d_sum; mults += 1
    p_11 = dt11 * d_11; mults += 1
    p_12 = dt12 * d_12; mults += 1
    p_21 = dt21 * d_21; mults += 1
    p_22 = dt22 * d_22; mults += 1
    dt_c = (p_11 + p_12) + (p_21 + p_22)
    r = f_c > dt_c
    trace = DecisionTrace(f_c=f_c, dt_c=dt_c, r=r, d=(d_11, d_12, d_21, d_22),
                          d_sum=d_sum, mult_count=mults,
                          score_is_model_extension=True)
    return r, trace


def hw_update_area(ts: int, iv: int, ts_e: int, o: int, iv_bits: int = 24):
    """Shift-based IIR update; floor shifts, interval clamped to width."""
    delta = int(ts_e) - int(ts)
    ts_new = int(ts) + (delta >> o)
    iv_new = int(iv) + ((delta - int(iv)) >> o)
    iv_max = (1 << iv_bits) - 1
    if iv_new < 0:
        iv_new = 0
    elif iv_new > iv_max:
        iv_new = iv_max
    return ts_new, iv_new


def _int_grid(stream: EventStream, cfg: FilterConfig, p: HwParams):
    grid = AreaGrid.for_config(stream.width, stream.height, cfg)
    ts = np.full((grid.rows, grid.cols), int(round(cfg.init_timestamp_us)), dtype=np.int64)
    iv_init = min(int(round(cfg.resolved_init_interval_us)), p.iv_max)
    iv = np.full((grid.rows, grid.cols), iv_init, dtype=np.int64)
    active = np.zeros((grid.rows, grid.cols), dtype=bool)
    return ts, iv, active, grid.rows, grid.cols


def _check_hw_inputs(stream: EventStream, cfg: FilterConfig, p: HwParams):
    if len(stream.t) and np.any(np.diff(stream.t) < 0):
        i = int(np.flatnonzero(np.diff(stream.t) < 0)[0]) + 1
        raise TimestampOrderError(i, "stream must be sorted by timestamp")
    if len(stream.t) and int(stream.t.max()) >= (1 << p.ts_bits):
        raise ConfigError(
            f"timestamps exceed the {p.ts_bits}-bit hardware timestamp width")
    if int(cfg.filter_length_us) != cfg.filter_length_us:
        raise ConfigError("the hardware path needs an integer filter length")


def _fits_int64(cfg: FilterConfig, p: HwParams) -> bool:
    # |dT * D| <= 2^(dt_bits-1) * 2^(3*k_sat); four-term sum adds 2 bits
    fl_bits = max(int(cfg.filter_length_us), 1).bit_length()
    worst = 3 * p.k_sat_bits + max(p.dt_bits - 1, fl_bits) + 3
    return worst <= 62


def hw_filter_stream(stream: EventStream, cfg: FilterConfig,
                     p: HwParams | None = None, engine: str = "auto",
                     collect_traces: bool = False) -> ScoredStream:
    """Integer-datapath filter run; same event ordering contract as the
    reference path. Scores are the exact dT_c / D_sum ratio."""
    p = p or HwParams()
    if cfg.update_shift != p.update_shift:
        raise ConfigError(
            f"update shift mismatch: config says {cfg.update_shift}, "
            f"hardware says {p.update_shift}")
    _check_hw_inputs(stream, cfg, p)

    use_numba = False
    if engine in ("auto", "numba"):
        if _fits_int64(cfg, p) and not collect_traces:
            try:
                from . import _kernels
                use_numba = True
            except ImportError:
                if engine == "numba":
                    raise
        elif engine == "numba":
            raise ConfigError("numba engine unavailable for these widths; use python")
    elif engine != "python":
        raise ConfigError(f"unknown engine {engine!r}")

    if use_numba:
        scores, decisions = _kernels.run_hw(stream, cfg, p)
        return ScoredStream(stream, scores, decisions, cfg.filter_length_us)
    return _hw_filter_python(stream, cfg, p, collect_traces)


def _hw_filter_python(stream: EventStream, cfg: FilterConfig, p: HwParams,
                      collect_traces: bool) -> ScoredStream:
    ts_g, iv_g, active, rows, cols = _int_grid(stream, cfg, p)
    lut = distance_lut(cfg.scale, p.dist_frac_bits)
    scale = cfg.scale
    o = p.update_shift
    f_l = int(cfg.filter_length_us)
    period = cfg.global_update_period_us
    n = len(stream)
    scores = np.empty(n)
    decisions = np.empty(n, dtype=bool)
    traces = [] if collect_traces else None
    last_boundary = 0

    for i in range(n):
        te = int(stream.t[i])
        if period > 0:
            boundary = (te // period) * period
            if boundary > last_boundary:
                _hw_global_update(ts_g, iv_g, active, boundary, o, p.iv_bits)
                last_boundary = boundary
        x = int(stream.x[i])
        y = int(stream.y[i])
        col, row = x // scale, y // scale
        ox, oy = x - col * scale, y - row * scale
        dc, _, _ = _axis_bracket(ox, scale)
        dr, _, _ = _axis_bracket(oy, scale)
        c1 = min(max(col + dc, 0), cols - 1)
        c2 = min(col + dc + 1, cols - 1)
        r1 = min(max(row + dr, 0), rows - 1)
        r2 = min(row + dr + 1, rows - 1)

        dts = tuple(wrap_signed(te - int(t_ij), p.dt_bits)
                    for t_ij in (ts_g[r1, c1], ts_g[r1, c2], ts_g[r2, c1], ts_g[r2, c2]))
        ks = tuple(hw_k(int(i_ij), int(lut[ox, oy, k]), p)
                   for k, i_ij in enumerate(
                       (iv_g[r1, c1], iv_g[r1, c2], iv_g[r2, c1], iv_g[r2, c2])))
        r, trace = hw_decide(dts, ks, f_l, p)
        scores[i] = trace.dt_c / trace.d_sum
        decisions[i] = r
        if traces is not None:
            traces.append(trace)

        ts_new, iv_new = hw_update_area(int(ts_g[row, col]), int(iv_g[row, col]),
                                        te, o, p.iv_bits)
        ts_g[row, col] = ts_new
        iv_g[row, col] = iv_new
        active[row, col] = True

    return ScoredStream(stream, scores, decisions, cfg.filter_length_us, traces=traces)


def _hw_global_update(ts_g, iv_g, active, now: int, o: int, iv_bits: int):
    rows, cols = ts_g.shape
    for r in range(rows):
        for c in range(cols):
            if not active[r, c]:
                ts_new, iv_new = hw_update_area(int(ts_g[r, c]), int(iv_g[r, c]),
                                                now, o, iv_bits)
                ts_g[r, c] = ts_new
                iv_g[r, c] = iv_new
            active[r, c] = False


def pipeline_stats(width: int, height: int, scale: int, clock_hz: float,
                   global_update_period_us: float,
                   overhead_cycles: int = DEFAULT_OVERHEAD_CYCLES,
                   events_processed: int = 0,
                   stall_cycles: int = 0) -> PipelineStats:
    """Analytic throughput model: one event per cycle, minus the global
    update stall (one cycle per area plus a fixed overhead)."""
    cols = -(-width // scale)
    rows = -(-height // scale)
    duration_s = (rows * cols + overhead_cycles) / clock_hz
    if global_update_period_us > 0:
        frac = duration_s / (global_update_period_us * 1e-6)
        meps = clock_hz * (1.0 - frac) / 1e6
    else:
        meps = clock_hz / 1e6
    return PipelineStats(
        clock_hz=clock_hz,
        events_processed=events_processed,
        stall_cycles=stall_cycles,
        latency_cycles=LATENCY_CYCLES,
        effective_meps=meps,
        global_update_duration_us=duration_s * 1e6,
    )


class _ForwardingMemory:
    """Area memory with delayed visibility and a 3-entry forwarding cache.

    Writes land in the backing arrays three cycles after issue; reads
    consult the last three issued writes first (newest wins), exactly
    like the coordinate-match bypass in front of the BRAMs.
    """

    DELAY = 3

    def __init__(self, ts_g, iv_g):
        self.ts_g = ts_g
        self.iv_g = iv_g
        self.pending = deque()   # (commit_cycle, row, col, ts, iv)
        self.recent = deque(maxlen=self.DELAY)

    def settle(self, cycle: int) -> None:
        while self.pending and self.pending[0][0] <= cycle:
            _, r, c, ts, iv = self.pending.popleft()
            self.ts_g[r, c] = ts
            self.iv_g[r, c] = iv

    def read(self, r: int, c: int):
        for rr, cc, ts, iv in reversed(self.recent):
            if rr == r and cc == c:
                return ts, iv
        return int(self.ts_g[r, c]), int(self.iv_g[r, c])

    def write(self, cycle: int, r: int, c: int, ts: int, iv: int) -> None:
        self.pending.append((cycle + self.DELAY, r, c, ts, iv))
        self.recent.append((r, c, ts, iv))

    def flush(self) -> None:
        while self.pending:
            _, r, c, ts, iv = self.pending.popleft()
            self.ts_g[r, c] = ts
            self.iv_g[r, c] = iv
        self.recent.clear()


def pipeline_simulate(stream: EventStream, cfg: FilterConfig, p: HwParams,
                      clock_hz: float,
                      overhead_cycles: int = DEFAULT_OVERHEAD_CYCLES):
    """Cycle-level run of the hardware pipeline.

    One event enters per cycle. Reads see the memory state from three
    cycles back, patched by the forwarding cache when the coordinates
    match an in-flight write. The global update drains the pipeline and
    stalls it for one cycle per area plus the fixed overhead; its
    writes commit atomically during the stall. Decisions are
    bit-identical to :func:`hw_filter_stream`.

    Returns (decisions, PipelineStats).
    """
    p = p or HwParams()
    _check_hw_inputs(stream, cfg, p)
    ts_g, iv_g, active, rows, cols = _int_grid(stream, cfg, p)
    lut = distance_lut(cfg.scale, p.dist_frac_bits)
    mem = _ForwardingMemory(ts_g, iv_g)
    scale = cfg.scale
    o = p.update_shift
    f_l = int(cfg.filter_length_us)
    period = cfg.global_update_period_us
    stall_per_update = rows * cols + overhead_cycles

    n = len(stream)
    decisions = np.empty(n, dtype=bool)
    cycle = 0
    stall_cycles = 0
    last_boundary = 0

    for i in range(n):
        te = int(stream.t[i])
        if period > 0:
            boundary = (te // period) * period
            if boundary > last_boundary:
                mem.flush()
                _hw_global_update(ts_g, iv_g, active, boundary, o, p.iv_bits)
                stall_cycles += stall_per_update
                cycle += stall_per_update
                last_boundary = boundary

        cycle += 1
        mem.settle(cycle)

        x = int(stream.x[i])
        y = int(stream.y[i])
        col, row = x // scale, y // scale
        ox, oy = x - col * scale, y - row * scale
        dc, _, _ = _axis_bracket(ox, scale)
        dr, _, _ = _axis_bracket(oy, scale)
        c1 = min(max(col + dc, 0), cols - 1)
        c2 = min(col + dc + 1, cols - 1)
        r1 = min(max(row + dr, 0), rows - 1)
        r2 = min(row + dr + 1, rows - 1)

        cells = ((r1, c1), (r1, c2), (r2, c1), (r2, c2))
        reads = [mem.read(r, c) for r, c in cells]
        dts = tuple(wrap_signed(te - ts_v, p.dt_bits) for ts_v, _ in reads)
        ks = tuple(hw_k(iv_v, int(lut[ox, oy, k]), p)
                   for k, (_, iv_v) in enumerate(reads))
        r, _ = hw_decide(dts, ks, f_l, p)
        decisions[i] = r

        own_ts, own_iv = mem.read(row, col)
        ts_new, iv_new = hw_update_area(own_ts, own_iv, te, o, p.iv_bits)
        mem.write(cycle, row, col, ts_new, iv_new)
        active[row, col] = True

    mem.flush()
    stats = pipeline_stats(stream.width, stream.height, scale, clock_hz,
                           period, overhead_cycles,
                           events_processed=n, stall_cycles=stall_cycles)
    return decisions, stats


def throughput_report(stats: PipelineStats, fmt: str = "text") -> str:
    """Render pipeline stats as a text block or a one-row CSV."""
    latency_ns = stats.latency_cycles / stats.clock_hz * 1e9
    if fmt == "csv":
        header = ("clock_mhz,events,stall_cycles,latency_cycles,latency_ns,"
                  "global_update_us,effective_meps")
        row = (f"{stats.clock_hz / 1e6:.2f},{stats.events_processed},"
               f"{stats.stall_cycles},{stats.latency_cycles},{latency_ns:.2f},"
               f"{stats.global_update_duration_us:.2f},{stats.effective_meps:.2f}")
        return header + "\n" + row + "\n"
    if fmt != "text":
        raise ConfigError(f"unknown report format {fmt!r}")
    return (
        f"clock           : {stats.clock_hz / 1e6:.2f} MHz\n"
        f"events          : {stats.events_processed}\n"
        f"stall cycles    : {stats.stall_cycles}\n"
        f"latency         : {stats.latency_cycles} cycles = {latency_ns:.2f} ns\n"
        f"global update   : {stats.global_update_duration_us:.2f} us\n"
        f"effective rate  : {stats.effective_meps:.2f} MEPS\n"
    )
