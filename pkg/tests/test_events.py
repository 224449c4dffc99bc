import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import evfilt as ev
from evfilt.errors import (
    ConfigError,
    CoordinateError,
    FormatError,
    GeometryMismatchError,
    LabelError,
    TimestampOrderError,
)


def make(width, height, rows):
    t, x, y, p = zip(*rows) if rows else ((), (), (), ())
    return ev.EventStream(width, height, t, x, y, p)


class TestStreamInvariants:
    def test_decreasing_timestamps_rejected(self):
        with pytest.raises(TimestampOrderError) as ei:
            make(10, 10, [(5, 0, 0, 0), (3, 0, 0, 0)])
        assert ei.value.index == 1

    def test_x_out_of_range_names_index(self):
        with pytest.raises(CoordinateError) as ei:
            make(640, 480, [(0, 640, 0, 1)])
        assert ei.value.index == 0

    def test_polarity_out_of_range(self):
        with pytest.raises(CoordinateError):
            make(10, 10, [(0, 0, 0, 4)])

    def test_zero_geometry_rejected(self):
        with pytest.raises(ConfigError):
            ev.EventStream(0, 10)


class TestEvt64:
    def test_empty_round_trip(self, tmp_path):
        s = ev.EventStream.empty(320, 240)
        path = tmp_path / "empty.evt64"
        ev.write_events(s, path)
        back = ev.read_events(path)
        assert back == s and len(back) == 0

    def test_round_trip_three_events(self, tmp_path):
        s = make(640, 480, [(1000, 5, 7, 1), (1000, 6, 7, 0), (2500, 639, 479, 3)])
        path = tmp_path / "s.evt64"
        ev.write_events(s, path)
        assert ev.read_events(path) == s

    def test_labels_survive(self, tmp_path):
        s = make(64, 64, [(10, 1, 1, 2), (20, 2, 2, 3)])
        path = tmp_path / "s.evt64"
        ev.write_events(s, path)
        assert list(ev.read_events(path).p) == [2, 3]

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.evt64"
        path.write_bytes(b"XXXX" + bytes(12))
        with pytest.raises(FormatError):
            ev.read_events(path)

    def test_truncated_payload(self, tmp_path):
        s = make(64, 64, [(10, 1, 1, 0)])
        path = tmp_path / "s.evt64"
        ev.write_events(s, path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FormatError):
            ev.read_events(path)

    def test_count_mismatch(self, tmp_path):
        path = tmp_path / "s.evt64"
        header = b"DIF1" + (64).to_bytes(2, "little") + (64).to_bytes(2, "little") \
            + (2).to_bytes(8, "little")
        path.write_bytes(header + bytes(8))  # says 2, holds 1
        with pytest.raises(FormatError):
            ev.read_events(path)

    def test_out_of_range_coordinate_in_file(self, tmp_path):
        # valid container bits but x >= declared width
        word = (0 | (40 << 32) | (0 << 46)).to_bytes(8, "little")
        header = b"DIF1" + (32).to_bytes(2, "little") + (32).to_bytes(2, "little") \
            + (1).to_bytes(8, "little")
        path = tmp_path / "s.evt64"
        path.write_bytes(header + word)
        with pytest.raises(CoordinateError) as ei:
            ev.read_events(path)
        assert ei.value.index == 0

    def test_nonzero_padding_bits(self, tmp_path):
        word = (1 << 62).to_bytes(8, "little")
        header = b"DIF1" + (32).to_bytes(2, "little") + (32).to_bytes(2, "little") \
            + (1).to_bytes(8, "little")
        path = tmp_path / "s.evt64"
        path.write_bytes(header + word)
        with pytest.raises(FormatError):
            ev.read_events(path)

    def test_timestamp_too_wide_for_container(self, tmp_path):
        s = make(16, 16, [(1 << 32, 0, 0, 0)])
        with pytest.raises(FormatError):
            ev.write_events(s, tmp_path / "s.evt64")

    def test_unwritable_path(self, tmp_path):
        s = ev.EventStream.empty(16, 16)
        with pytest.raises(OSError):
            ev.write_events(s, tmp_path / "missing" / "s.evt64")


class TestCsv:
    def test_line_maps_to_fields(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("t,x,y,p\n1000,5,7,1\n")
        s = ev.read_events(path, "csv", width=640, height=480)
        assert s[0] == ev.Event(1000, 5, 7, 1)

    def test_round_trip(self, tmp_path):
        s = make(64, 48, [(0, 0, 0, 0), (5, 63, 47, 3), (5, 1, 1, 2)])
        path = tmp_path / "s.csv"
        ev.write_events(s, path, "csv")
        assert ev.read_events(path, "csv", width=64, height=48) == s

    def test_missing_geometry(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("t,x,y,p\n")
        with pytest.raises(ConfigError):
            ev.read_events(path, "csv")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("time,x,y,p\n")
        with pytest.raises(FormatError):
            ev.read_events(path, "csv", width=8, height=8)

    def test_non_integer_record(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("t,x,y,p\n1.5,0,0,0\n")
        with pytest.raises(FormatError):
            ev.read_events(path, "csv", width=8, height=8)


class TestMerge:
    def test_noise_first_when_earlier(self):
        clean = make(8, 8, [(10, 0, 0, 0)])
        noise = make(8, 8, [(5, 1, 1, 2)])
        m = ev.merge_streams(clean, noise)
        assert list(m.t) == [5, 10] and list(m.p) == [2, 0]

    def test_tie_breaks_clean_first(self):
        clean = make(8, 8, [(10, 0, 0, 1)])
        noise = make(8, 8, [(10, 1, 1, 3)])
        m = ev.merge_streams(clean, noise)
        assert list(m.p) == [1, 3]

    def test_empty_noise_identity(self):
        clean = make(8, 8, [(1, 0, 0, 0), (2, 1, 1, 1)])
        assert ev.merge_streams(clean, ev.EventStream.empty(8, 8)) == clean

    def test_geometry_mismatch(self):
        with pytest.raises(GeometryMismatchError):
            ev.merge_streams(ev.EventStream.empty(8, 8), ev.EventStream.empty(8, 9))


class TestRelabel:
    def test_maps_polarities(self):
        s = make(8, 8, [(0, 0, 0, 0), (1, 1, 1, 1)])
        r = ev.relabel_noise(s)
        assert list(r.p) == [2, 3]
        assert list(r.t) == [0, 1] and list(r.x) == [0, 1]

    def test_already_labeled_rejected(self):
        s = make(8, 8, [(0, 0, 0, 2)])
        with pytest.raises(LabelError) as ei:
            ev.relabel_noise(s)
        assert ei.value.index == 0


# property-based coverage ---------------------------------------------------

valid_stream = st.integers(1, 200).flatmap(lambda width: st.tuples(
    st.just(width),
    st.integers(1, 200),
    st.lists(st.tuples(st.integers(0, (1 << 32) - 1), st.integers(0, 10 ** 9),
                       st.integers(0, 10 ** 9), st.integers(0, 3)),
             max_size=64),
))


def _materialize(spec):
    width, height, rows = spec
    rows = sorted((t, x % width, y % height, p) for t, x, y, p in rows)
    return make(width, height, rows)


@given(valid_stream)
@settings(max_examples=60, deadline=None)
def test_evt64_round_trip_identity(tmp_path_factory, spec):
    s = _materialize(spec)
    path = tmp_path_factory.mktemp("rt") / "s.evt64"
    ev.write_events(s, path)
    assert ev.read_events(path) == s


@given(valid_stream)
@settings(max_examples=60, deadline=None)
def test_csv_round_trip_identity(tmp_path_factory, spec):
    s = _materialize(spec)
    path = tmp_path_factory.mktemp("rt") / "s.csv"
    ev.write_events(s, path, "csv")
    assert ev.read_events(path, "csv", width=s.width, height=s.height) == s


@given(valid_stream, valid_stream)
@settings(max_examples=60, deadline=None)
def test_merge_is_sorted_union(spec_a, spec_b):
    a = _materialize(spec_a)
    b = _materialize((spec_a[0], spec_a[1], spec_b[2]))  # same geometry
    m = ev.merge_streams(a, b)
    assert len(m) == len(a) + len(b)
    assert np.all(np.diff(m.t) >= 0)
    recs = sorted(zip(m.t, m.x, m.y, m.p))
    want = sorted(list(zip(a.t, a.x, a.y, a.p)) + list(zip(b.t, b.x, b.y, b.p)))
    assert recs == want
