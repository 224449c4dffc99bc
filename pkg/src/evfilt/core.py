"""Reference interpolation filters over subarea state.

The sensor is tiled into square subareas of side ``scale``. Each area
keeps an IIR-filtered timestamp and an IIR-estimated inter-event
interval; the interval's inverse acts as a frequency weight. An event
is scored against the 2x2 block of areas whose centers bracket it:

* distance-weighted form ("dif"): neighbor timestamps weighted by
  1 / (interval * euclidean distance to the area center);
* bilinear form ("bif"): horizontal interpolation within each area row
  followed by a frequency-weighted vertical combination.

The score is the event timestamp minus the interpolated timestamp; an
event passes when the score is strictly below the filter length. Both
decisions also exist in division-free form, where denominators are
multiplied through so the comparison runs on products only; with exact
arithmetic those agree with thresholding the quotient-form score.

State updates ignore the decision: every event updates its owning
area. A periodic global update applies a pseudo-event at the period
boundary to areas that stayed inactive, so long-quiet regions do not
reject the next genuine activity forever.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError, TimestampOrderError
from .events import Event, EventStream

SUPPORTED_SCALES = (8, 16, 32)


@dataclass(frozen=True)
class FilterConfig:
    """Filter parameters; defaults match the shipped hardware profile."""

    scale: int = 16
    update_shift: int = 2
    filter_length_us: float = 200.0
    global_update_period_us: int = 20_000
    init_interval_us: Optional[float] = None
    init_timestamp_us: float = 0.0

    def __post_init__(self):
        if self.scale not in SUPPORTED_SCALES:
            raise ConfigError(f"scale must be one of {SUPPORTED_SCALES}, got {self.scale}")
        if self.update_shift < 0:
            raise ConfigError(f"update shift must be >= 0, got {self.update_shift}")
        if self.filter_length_us <= 0:
            raise ConfigError(f"filter length must be positive, got {self.filter_length_us}")
        if self.global_update_period_us < 0:
            raise ConfigError("global update period must be >= 0 (0 disables)")
        if self.init_interval_us is not None and self.init_interval_us <= 0:
            raise ConfigError("initial interval must be positive")

    @property
    def update_factor(self) -> float:
        """u = 2**-update_shift."""
        return 2.0 ** -self.update_shift

    @property
    def resolved_init_interval_us(self) -> float:
        """Cold-start interval: the global update period, else 20 ms."""
        if self.init_interval_us is not None:
            return float(self.init_interval_us)
        if self.global_update_period_us > 0:
            return float(self.global_update_period_us)
        return 20_000.0


class AreaGrid:
    """Per-subarea filtered timestamp, interval estimate, activity flag."""

    __slots__ = ("scale", "rows", "cols", "ts", "iv", "active")

    def __init__(self, width: int, height: int, scale: int,
                 init_timestamp: float = 0.0, init_interval: float = 20_000.0):
        if init_interval <= 0:
            raise ConfigError("initial interval must be positive")
        self.scale = scale
        self.cols = -(-width // scale)
        self.rows = -(-height // scale)
        self.ts = np.full((self.rows, self.cols), float(init_timestamp))
        self.iv = np.full((self.rows, self.cols), float(init_interval))
        self.active = np.zeros((self.rows, self.cols), dtype=bool)

    @classmethod
    def for_config(cls, width: int, height: int, cfg: FilterConfig) -> "AreaGrid":
        return cls(width, height, cfg.scale, cfg.init_timestamp_us,
                   cfg.resolved_init_interval_us)

    def copy(self) -> "AreaGrid":
        g = AreaGrid.__new__(AreaGrid)
        g.scale = self.scale
        g.rows, g.cols = self.rows, self.cols
        g.ts = self.ts.copy()
        g.iv = self.iv.copy()
        g.active = self.active.copy()
        return g

    def __eq__(self, other) -> bool:
        if not isinstance(other, AreaGrid):
            return NotImplemented
        return (self.scale == other.scale
                and np.array_equal(self.ts, other.ts)
                and np.array_equal(self.iv, other.iv)
                and np.array_equal(self.active, other.active))


@dataclass(frozen=True)
class NeighborContext:
    """The 2x2 bracketing areas as seen by one event.

    Index convention: first digit is the row band (1 = upper), second
    the column band (1 = left). dx1/dx2 are the horizontal distances to
    the left/right column centers (dx1 + dx2 == scale), dy1/dy2 the
    vertical ones, and d_ij the euclidean distances to the four
    centers. At sensor borders the out-of-range slots duplicate the
    clamped in-range area.
    """

    t11: float
    t12: float
    t21: float
    t22: float
    i11: float
    i12: float
    i21: float
    i22: float
    dx1: float
    dx2: float
    dy1: float
    dy2: float
    d11: float
    d12: float
    d21: float
    d22: float
    r1: int = 0
    r2: int = 0
    c1: int = 0
    c2: int = 0


@dataclass
class DecisionTrace:
    """Optional per-event record of division-free intermediates."""

    f_c: object = None
    dt_c: object = None
    r: bool = False
    c: tuple = None          # quotient-form weights (1/(I*d))
    d: tuple = None          # per-area products, distance form
    d_sum: object = None
    b: tuple = None          # per-area products, bilinear form
    s_top: object = None
    s_bot: object = None
    b_top: object = None
    b_bot: object = None
    s_all: object = None
    mult_count: int = None
    score_is_model_extension: bool = False


@dataclass(frozen=True)
class ScoredEvent:
    event: Event
    score: float
    decision: bool


class ScoredStream:
    """Per-event scores and pass/reject decisions for one filter run.

    The score sequence does not depend on the filter length (which only
    thresholds), so one run supports a full ROC sweep.
    """

    __slots__ = ("stream", "scores", "decisions", "filter_length_us", "traces")

    def __init__(self, stream: EventStream, scores, decisions,
                 filter_length_us: float, traces=None):
        self.stream = stream
        self.scores = np.asarray(scores, dtype=np.float64)
        self.decisions = np.asarray(decisions, dtype=bool)
        self.filter_length_us = filter_length_us
        self.traces = traces
        if len(self.scores) != len(stream) or len(self.decisions) != len(stream):
            raise ConfigError("scores/decisions length mismatch with stream")

    def __len__(self) -> int:
        return len(self.stream)

    def __getitem__(self, i: int) -> ScoredEvent:
        return ScoredEvent(self.stream[i], float(self.scores[i]), bool(self.decisions[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def is_noise(self) -> np.ndarray:
        return self.stream.is_noise()

    def passed_stream(self) -> EventStream:
        """The events that survived filtering, as a stream."""
        keep = self.decisions
        s = self.stream
        return EventStream(s.width, s.height, s.t[keep], s.x[keep], s.y[keep], s.p[keep])


def _axis_bracket(offset: int, scale: int):
    """Map an in-area offset to (lower index delta, dist to lower, dist to upper)."""
    center = (scale - 1) / 2.0
    if offset < center:
        # own center lies to the right: bracket is (previous, own)
        d_hi = center - offset
        return -1, scale - d_hi, d_hi
    d_lo = offset - center
    return 0, d_lo, scale - d_lo


def neighbor_context(grid: AreaGrid, x: int, y: int, scale: int) -> NeighborContext:
    """Read the 2x2 bracketing context for a pixel; border slots clamp."""
    col = x // scale
    row = y // scale
    dc, dx1, dx2 = _axis_bracket(x - col * scale, scale)
    dr, dy1, dy2 = _axis_bracket(y - row * scale, scale)
    c1 = min(max(col + dc, 0), grid.cols - 1)
    c2 = min(col + dc + 1, grid.cols - 1)
    r1 = min(max(row + dr, 0), grid.rows - 1)
    r2 = min(row + dr + 1, grid.rows - 1)
    ts, iv = grid.ts, grid.iv
    return NeighborContext(
        t11=float(ts[r1, c1]), t12=float(ts[r1, c2]),
        t21=float(ts[r2, c1]), t22=float(ts[r2, c2]),
        i11=float(iv[r1, c1]), i12=float(iv[r1, c2]),
        i21=float(iv[r2, c1]), i22=float(iv[r2, c2]),
        dx1=dx1, dx2=dx2, dy1=dy1, dy2=dy2,
        d11=math.sqrt(dx1 * dx1 + dy1 * dy1),
        d12=math.sqrt(dx2 * dx2 + dy1 * dy1),
        d21=math.sqrt(dx1 * dx1 + dy2 * dy2),
        d22=math.sqrt(dx2 * dx2 + dy2 * dy2),
        r1=r1, r2=r2, c1=c1, c2=c2,
    )


def update_area(grid: AreaGrid, event: Event, u: float) -> None:
    """IIR-update the single area owning the event; marks it active."""
    if not 0.0 < u <= 1.0:
        raise ConfigError(f"update factor must be in (0, 1], got {u}")
    row = event.y // grid.scale
    col = event.x // grid.scale
    ts = grid.ts[row, col]
    grid.ts[row, col] = ts * (1.0 - u) + event.t * u
    grid.iv[row, col] = grid.iv[row, col] * (1.0 - u) + (event.t - ts) * u
    grid.active[row, col] = True


def _check_ctx(ctx: NeighborContext) -> None:
    for v in (ctx.i11, ctx.i12, ctx.i21, ctx.i22, ctx.d11, ctx.d12, ctx.d21, ctx.d22):
        if v == 0:
            raise DomainError("zero interval or distance in neighbor context")


def dif_score(ctx: NeighborContext, ts_e):
    """Event timestamp minus the distance/frequency-weighted mean timestamp.

    Weights are 1 / (interval * distance); evaluated on timestamp
    differences, which leaves the result unchanged.
    """
    _check_ctx(ctx)
    c11 = 1 / (ctx.i11 * ctx.d11)
    c12 = 1 / (ctx.i12 * ctx.d12)
    c21 = 1 / (ctx.i21 * ctx.d21)
    c22 = 1 / (ctx.i22 * ctx.d22)
    num = ((ts_e - ctx.t11) * c11 + (ts_e - ctx.t12) * c12
           + (ts_e - ctx.t21) * c21 + (ts_e - ctx.t22) * c22)
    return num / (c11 + c12 + c21 + c22)


def bif_score(ctx: NeighborContext, ts_e):
    """Bilinear variant: per-row horizontal interpolation, then a
    frequency-weighted vertical combination."""
    _check_ctx(ctx)
    dt11 = ts_e - ctx.t11
    dt12 = ts_e - ctx.t12
    dt21 = ts_e - ctx.t21
    dt22 = ts_e - ctx.t22
    dt1 = ((dt11 * ctx.i12 * ctx.dx2 + dt12 * ctx.i11 * ctx.dx1)
           / (ctx.i12 * ctx.dx2 + ctx.i11 * ctx.dx1))
    dt2 = ((dt21 * ctx.i22 * ctx.dx2 + dt22 * ctx.i21 * ctx.dx1)
           / (ctx.i22 * ctx.dx2 + ctx.i21 * ctx.dx1))
    w_top = ctx.i21 * ctx.i22 * ctx.dy2
    w_bot = ctx.i11 * ctx.i12 * ctx.dy1
    return (dt1 * w_top + dt2 * w_bot) / (w_top + w_bot)


def dif_decide_division_free(ctx: NeighborContext, ts_e, filter_length):
    """Distance-form pass decision with denominators multiplied through.

    Each area's product is the product of the other three (I*d)
    factors; in exact arithmetic ``F_c > dT_c`` iff the quotient-form
    score is strictly below the filter length.
    """
    _check_ctx(ctx)
    k11 = ctx.i11 * ctx.d11
    k12 = ctx.i12 * ctx.d12
    k21 = ctx.i21 * ctx.d21
    k22 = ctx.i22 * ctx.d22
    d_11 = k12 * k21 * k22
    d_12 = k11 * k21 * k22
    d_21 = k11 * k12 * k22
    d_22 = k11 * k12 * k21
    d_sum = (d_11 + d_12) + (d_21 + d_22)
    f_c = filter_length * d_sum
    dt_c = (((ts_e - ctx.t11) * d_11 + (ts_e - ctx.t12) * d_12)
            + ((ts_e - ctx.t21) * d_21 + (ts_e - ctx.t22) * d_22))
    r = f_c > dt_c
    trace = DecisionTrace(f_c=f_c, dt_c=dt_c, r=r,
                          d=(d_11, d_12, d_21, d_22), d_sum=d_sum)
    return r, trace


def bif_decide_division_free(ctx: NeighborContext, ts_e, filter_length):
    """Bilinear-form pass decision with denominators multiplied through."""
    _check_ctx(ctx)
    b11 = ctx.i12 * ctx.dx2
    b12 = ctx.i11 * ctx.dx1
    b21 = ctx.i22 * ctx.dx2
    b22 = ctx.i21 * ctx.dx1
    s_top = b11 + b12
    s_bot = b21 + b22
    b_top = ctx.i21 * ctx.i22 * ctx.dy2
    b_bot = ctx.i11 * ctx.i12 * ctx.dy1
    s_all = b_top + b_bot
    f_c = filter_length * s_all * s_top * s_bot
    dt_c = (((ts_e - ctx.t11) * b11 + (ts_e - ctx.t12) * b12) * s_bot * b_top
            + ((ts_e - ctx.t21) * b21 + (ts_e - ctx.t22) * b22) * s_top * b_bot)
    r = f_c > dt_c
    trace = DecisionTrace(f_c=f_c, dt_c=dt_c, r=r, b=(b11, b12, b21, b22),
                          s_top=s_top, s_bot=s_bot, b_top=b_top, b_bot=b_bot,
                          s_all=s_all)
    return r, trace


def global_update(grid: AreaGrid, now: float, u: float) -> None:
    """Pseudo-event update of every inactive area; clears all flags."""
    if not 0.0 < u <= 1.0:
        raise ConfigError(f"update factor must be in (0, 1], got {u}")
    idle = ~grid.active
    ts = grid.ts[idle]
    grid.ts[idle] = ts * (1.0 - u) + now * u
    grid.iv[idle] = grid.iv[idle] * (1.0 - u) + (now - ts) * u
    grid.active[:] = False


def filter_stream(stream: EventStream, cfg: FilterConfig, algo: str = "dif",
                  engine: str = "auto", grid: AreaGrid | None = None) -> ScoredStream:
    """Run the reference filter over a sorted stream.

    Per event: read the pre-update neighbor context, score, decide
    (score strictly below the filter length), then update the owning
    area. The global update fires whenever the event time crosses a
    period boundary; missed boundaries collapse into one update at the
    latest boundary. Labels are ignored: noise events update state like
    any other.

    ``engine="numba"`` runs a JIT kernel that is bit-identical to the
    pure-Python path; "auto" prefers it when available.
    """
    if algo not in ("dif", "bif"):
        raise ConfigError(f"unknown reference algorithm {algo!r}")
    if len(stream.t) and np.any(np.diff(stream.t) < 0):
        i = int(np.flatnonzero(np.diff(stream.t) < 0)[0]) + 1
        raise TimestampOrderError(i, "stream must be sorted by timestamp")
    if grid is None:
        grid = AreaGrid.for_config(stream.width, stream.height, cfg)
    elif grid.scale != cfg.scale or grid.cols < -(-stream.width // cfg.scale) \
            or grid.rows < -(-stream.height // cfg.scale):
        raise ConfigError("grid geometry does not cover this stream and scale")

    engine = _resolve_engine(engine)
    if engine == "numba":
        from . import _kernels
        scores, decisions = _kernels.run_reference(stream, cfg, grid, algo)
        return ScoredStream(stream, scores, decisions, cfg.filter_length_us)
    return _filter_stream_python(stream, cfg, algo, grid)


def _resolve_engine(engine: str) -> str:
    if engine not in ("auto", "python", "numba"):
        raise ConfigError(f"unknown engine {engine!r}")
    if engine == "auto":
        try:
            from . import _kernels  # noqa: F401
            return "numba"
        except ImportError:
            return "python"
    return engine


def _filter_stream_python(stream: EventStream, cfg: FilterConfig, algo: str,
                          grid: AreaGrid) -> ScoredStream:
    u = cfg.update_factor
    f_l = cfg.filter_length_us
    period = cfg.global_update_period_us
    score_of = dif_score if algo == "dif" else bif_score
    n = len(stream)
    scores = np.empty(n)
    decisions = np.empty(n, dtype=bool)
    last_boundary = 0
    t_arr, x_arr, y_arr = stream.t, stream.x, stream.y
    for i in range(n):
        t = int(t_arr[i])
        if period > 0:
            boundary = (t // period) * period
            if boundary > last_boundary:
                global_update(grid, float(boundary), u)
                last_boundary = boundary
        ctx = neighbor_context(grid, int(x_arr[i]), int(y_arr[i]), cfg.scale)
        s = score_of(ctx, float(t))
        scores[i] = s
        decisions[i] = s < f_l
        update_area(grid, Event(t, int(x_arr[i]), int(y_arr[i]), 0), u)
    return ScoredStream(stream, scores, decisions, f_l)
