"""Nearest-neighbour and spatiotemporal-correlation baseline filters.

Both keep one last-event timestamp per pixel and look at the
8-connected neighborhood, own pixel excluded. NNb passes an event when
any neighbor fired within the window; STCF(N) demands at least N
distinct recent neighbor pixels and reduces to NNb at N = 1. Scores
are recency differences so a window sweep yields the full ROC curve.

The timestamp map starts at zero, mirroring the cold-start policy of
the interpolation filters; out-of-bounds neighbors read as never
having fired.
"""

from __future__ import annotations

import numpy as np

from .core import ScoredStream
from .errors import ConfigError, TimestampOrderError
from .events import EventStream

_NEIGHBORHOOD = tuple((dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)
                      if (dy, dx) != (0, 0))


class PixelTimestampMap:
    """Per-pixel last-event timestamps, zero-initialized."""

    __slots__ = ("last",)

    def __init__(self, width: int, height: int):
        self.last = np.zeros((height, width), dtype=np.int64)

    def neighbor_timestamps(self, x: int, y: int) -> list[int]:
        """The 8-neighborhood's timestamps; out-of-bounds slots read 0."""
        h, w = self.last.shape
        out = []
        for dy, dx in _NEIGHBORHOOD:
            yy, xx = y + dy, x + dx
            out.append(int(self.last[yy, xx]) if 0 <= yy < h and 0 <= xx < w else 0)
        return out

    def record(self, x: int, y: int, t: int) -> None:
        self.last[y, x] = t


def _check_sorted(stream: EventStream) -> None:
    if len(stream.t) and np.any(np.diff(stream.t) < 0):
        i = int(np.flatnonzero(np.diff(stream.t) < 0)[0]) + 1
        raise TimestampOrderError(i, "stream must be sorted by timestamp")


def _resolve_engine(engine: str) -> bool:
    if engine not in ("auto", "python", "numba"):
        raise ConfigError(f"unknown engine {engine!r}")
    if engine in ("auto", "numba"):
        try:
            from . import _kernels  # noqa: F401
            return True
        except ImportError:
            if engine == "numba":
                raise
    return False


def nnb_filter(stream: EventStream, window_us: float,
               engine: str = "auto") -> ScoredStream:
    """Score each event by its distance to the most recent neighbor.

    Kept independent of :func:`stcf_filter` on purpose: their agreement
    at N = 1 is a cross-check, not a definition.
    """
    if window_us <= 0:
        raise ConfigError(f"window must be positive, got {window_us}")
    _check_sorted(stream)
    pmap = PixelTimestampMap(stream.width, stream.height)
    if _resolve_engine(engine):
        from . import _kernels
        scores, decisions = _kernels.run_nnb(stream, pmap.last, float(window_us))
        return ScoredStream(stream, scores, decisions, window_us)

    n = len(stream)
    scores = np.empty(n)
    decisions = np.empty(n, dtype=bool)
    for i in range(n):
        x, y, te = int(stream.x[i]), int(stream.y[i]), int(stream.t[i])
        s = float(te - max(pmap.neighbor_timestamps(x, y)))
        scores[i] = s
        decisions[i] = s < window_us
        pmap.record(x, y, te)
    return ScoredStream(stream, scores, decisions, window_us)


def stcf_filter(stream: EventStream, n_required: int, window_us: float,
                engine: str = "auto") -> ScoredStream:
    """Score each event by the n-th most recent neighbor's recency.

    The event passes when at least ``n_required`` distinct neighbor
    pixels fired strictly within the window; equivalently, when the
    n-th largest neighbor timestamp is recent enough.
    """
    if not 1 <= n_required <= 8:
        raise ConfigError(f"support count must be in [1, 8], got {n_required}")
    if window_us <= 0:
        raise ConfigError(f"window must be positive, got {window_us}")
    _check_sorted(stream)

    pmap = PixelTimestampMap(stream.width, stream.height)
    if _resolve_engine(engine):
        from . import _kernels
        scores, decisions = _kernels.run_stcf(stream, pmap.last, n_required,
                                              float(window_us))
        return ScoredStream(stream, scores, decisions, window_us)

    n = len(stream)
    scores = np.empty(n)
    decisions = np.empty(n, dtype=bool)
    for i in range(n):
        x, y, te = int(stream.x[i]), int(stream.y[i]), int(stream.t[i])
        vals = sorted(pmap.neighbor_timestamps(x, y), reverse=True)
        s = float(te - vals[n_required - 1])
        scores[i] = s
        decisions[i] = s < window_us
        pmap.record(x, y, te)
    return ScoredStream(stream, scores, decisions, window_us)
