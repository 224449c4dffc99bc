"""Event data model, EVT64/CSV serialization, stream merging and relabeling.

An event stream is a sensor geometry plus a time-sorted sequence of
(t, x, y, p) records. Polarity doubles as the evaluation label:
p in {0, 1} marks genuine events, p in {2, 3} marks injected noise.

The EVT64 container is a self-describing little-endian binary format,
64 bits per event:

    magic "DIF1" | u16 width | u16 height | u64 count | count * u64

    record bits [31:0]  timestamp, microseconds (unsigned)
                [45:32] x (14 bits)
                [59:46] y (14 bits)
                [61:60] polarity
                [63:62] zero

The CSV format is a "t,x,y,p" header plus one event per line; it does
not carry geometry, so readers must be told width and height.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    CoordinateError,
    FormatError,
    GeometryMismatchError,
    LabelError,
    TimestampOrderError,
)

EVT64_MAGIC = b"DIF1"
MAX_COORD = (1 << 14) - 1
MAX_EVT64_TIMESTAMP = (1 << 32) - 1

CSV_HEADER = "t,x,y,p"


@dataclass(frozen=True)
class Event:
    """One sensor record: microsecond timestamp, pixel, 2-bit polarity."""

    t: int
    x: int
    y: int
    p: int


class EventStream:
    """Geometry plus time-sorted events, stored as parallel numpy arrays.

    Arrays are owned by the stream and must not be mutated after
    construction; all operations treat streams as values.
    """

    __slots__ = ("width", "height", "t", "x", "y", "p")

    def __init__(self, width, height, t=None, x=None, y=None, p=None):
        if width <= 0 or height <= 0:
            raise ConfigError(f"stream geometry must be positive, got {width}x{height}")
        self.width = int(width)
        self.height = int(height)
        self.t = np.asarray(t if t is not None else [], dtype=np.int64)
        self.x = np.asarray(x if x is not None else [], dtype=np.int32)
        self.y = np.asarray(y if y is not None else [], dtype=np.int32)
        self.p = np.asarray(p if p is not None else [], dtype=np.uint8)
        if not (len(self.t) == len(self.x) == len(self.y) == len(self.p)):
            raise ConfigError("event field arrays differ in length")
        self._validate()

    def _validate(self):
        t, x, y, p = self.t, self.x, self.y, self.p
        if len(t) == 0:
            return
        bad = np.flatnonzero(t < 0)
        if bad.size:
            raise TimestampOrderError(int(bad[0]), f"negative timestamp {t[bad[0]]}")
        dec = np.flatnonzero(np.diff(t) < 0)
        if dec.size:
            i = int(dec[0]) + 1
            raise TimestampOrderError(i, f"timestamp {t[i]} decreases after {t[i - 1]}")
        bad = np.flatnonzero((x < 0) | (x >= self.width))
        if bad.size:
            i = int(bad[0])
            raise CoordinateError(i, f"x={x[i]} outside width {self.width}")
        bad = np.flatnonzero((y < 0) | (y >= self.height))
        if bad.size:
            i = int(bad[0])
            raise CoordinateError(i, f"y={y[i]} outside height {self.height}")
        bad = np.flatnonzero(p > 3)
        if bad.size:
            i = int(bad[0])
            raise CoordinateError(i, f"polarity {p[i]} outside {{0,1,2,3}}")

    @classmethod
    def empty(cls, width: int, height: int) -> "EventStream":
        return cls(width, height)

    @classmethod
    def from_events(cls, width: int, height: int, events) -> "EventStream":
        evs = list(events)
        return cls(
            width,
            height,
            t=[e.t for e in evs],
            x=[e.x for e in evs],
            y=[e.y for e in evs],
            p=[e.p for e in evs],
        )

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    def __repr__(self) -> str:
        return f"EventStream({self.width}x{self.height}, {len(self)} events)"

    def is_noise(self) -> np.ndarray:
        """Boolean mask: True where the event carries a noise label."""
        return self.p >= 2


def read_events(path, format: str = "evt64", *, width: int | None = None,
                height: int | None = None) -> EventStream:
    """Load a stream from an EVT64 or CSV file.

    CSV carries no geometry, so ``width`` and ``height`` are required
    for it; for EVT64 they are optional cross-checks.
    """
    path = Path(path)
    if format == "evt64":
        stream = _read_evt64(path)
        if width is not None and stream.width != width:
            raise GeometryMismatchError(
                f"file declares width {stream.width}, expected {width}")
        if height is not None and stream.height != height:
            raise GeometryMismatchError(
                f"file declares height {stream.height}, expected {height}")
        return stream
    if format == "csv":
        if width is None or height is None:
            raise ConfigError("CSV streams need explicit width and height")
        return _read_csv(path, width, height)
    raise ConfigError(f"unknown stream format {format!r}")


def write_events(stream: EventStream, path, format: str = "evt64") -> None:
    """Write a stream; ``read_events`` of the result is bit-identical."""
    path = Path(path)
    if format == "evt64":
        _write_evt64(stream, path)
    elif format == "csv":
        _write_csv(stream, path)
    else:
        raise ConfigError(f"unknown stream format {format!r}")


def _read_evt64(path: Path) -> EventStream:
    data = path.read_bytes()
    if len(data) < 16:
        raise FormatError(f"{path}: header truncated ({len(data)} bytes)")
    if data[:4] != EVT64_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    width = int.from_bytes(data[4:6], "little")
    height = int.from_bytes(data[6:8], "little")
    count = int.from_bytes(data[8:16], "little")
    if width == 0 or height == 0:
        raise FormatError(f"{path}: zero geometry {width}x{height}")
    payload = data[16:]
    if len(payload) != 8 * count:
        raise FormatError(
            f"{path}: payload holds {len(payload) // 8} records, header says {count}")
    words = np.frombuffer(payload, dtype="<u8")
    pad = np.flatnonzero(words >> 62)
    if pad.size:
        raise FormatError(f"{path}: record {int(pad[0])} has nonzero padding bits")
    t = (words & 0xFFFFFFFF).astype(np.int64)
    x = ((words >> 32) & 0x3FFF).astype(np.int32)
    y = ((words >> 46) & 0x3FFF).astype(np.int32)
    p = ((words >> 60) & 0x3).astype(np.uint8)
    return EventStream(width, height, t, x, y, p)


def _write_evt64(stream: EventStream, path: Path) -> None:
    if stream.width > MAX_COORD + 1 or stream.height > MAX_COORD + 1:
        raise FormatError(
            f"geometry {stream.width}x{stream.height} exceeds the 14-bit coordinate field")
    if len(stream) and int(stream.t.max()) > MAX_EVT64_TIMESTAMP:
        i = int(np.argmax(stream.t > MAX_EVT64_TIMESTAMP))
        raise FormatError(f"record {i}: timestamp {stream.t[i]} exceeds 32 bits")
    words = (
        stream.t.astype(np.uint64)
        | (stream.x.astype(np.uint64) << np.uint64(32))
        | (stream.y.astype(np.uint64) << np.uint64(46))
        | (stream.p.astype(np.uint64) << np.uint64(60))
    )
    header = (
        EVT64_MAGIC
        + stream.width.to_bytes(2, "little")
        + stream.height.to_bytes(2, "little")
        + len(stream).to_bytes(8, "little")
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(words.astype("<u8").tobytes())


def _read_csv(path: Path, width: int, height: int) -> EventStream:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise FormatError(f"{path}: expected header {CSV_HEADER!r}, got {header!r}")
        t, x, y, p = [], [], [], []
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise FormatError(f"{path}: record {i} has {len(parts)} fields")
            try:
                vals = [int(v) for v in parts]
            except ValueError:
                raise FormatError(f"{path}: record {i} is not integer: {line!r}") from None
            t.append(vals[0])
            x.append(vals[1])
            y.append(vals[2])
            p.append(vals[3])
    return EventStream(width, height, t, x, y, p)


def _write_csv(stream: EventStream, path: Path) -> None:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for i in range(len(stream)):
        buf.write(f"{stream.t[i]},{stream.x[i]},{stream.y[i]},{stream.p[i]}\n")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(buf.getvalue())


def merge_streams(clean: EventStream, noise: EventStream) -> EventStream:
    """Merge two sorted streams by timestamp, clean before noise on ties."""
    if (clean.width, clean.height) != (noise.width, noise.height):
        raise GeometryMismatchError(
            f"cannot merge {clean.width}x{clean.height} with {noise.width}x{noise.height}")
    t = np.concatenate([clean.t, noise.t])
    x = np.concatenate([clean.x, noise.x])
    y = np.concatenate([clean.y, noise.y])
    p = np.concatenate([clean.p, noise.p])
    # stable sort keeps clean records ahead of noise at equal timestamps
    order = np.argsort(t, kind="stable")
    return EventStream(clean.width, clean.height, t[order], x[order], y[order], p[order])


def relabel_noise(stream: EventStream) -> EventStream:
    """Map polarities 0 -> 2 and 1 -> 3, marking every event as noise."""
    labeled = np.flatnonzero(stream.p > 1)
    if labeled.size:
        i = int(labeled[0])
        raise LabelError(i, f"polarity {stream.p[i]} is already a noise label")
    return EventStream(stream.width, stream.height, stream.t, stream.x, stream.y,
                       stream.p + np.uint8(2))
