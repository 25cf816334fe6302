import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapl.streams import (
    ActorRecord,
    FrameFeatures,
    StreamFormatError,
    read_records,
    read_stream,
    stream_byte_size,
    write_records,
    write_stream,
)


def make_frame(idx, n_rois, c=4, h=2, w=2, d=8, seed=0):
    rng = np.random.default_rng(seed + idx)
    boxes = np.zeros((n_rois, 4), dtype=np.float32)
    if n_rois:
        xy = rng.uniform(0.05, 0.6, size=(n_rois, 2))
        wh = rng.uniform(0.1, 0.3, size=(n_rois, 2))
        boxes = np.concatenate([xy, xy + wh], axis=1).astype(np.float32)
    return FrameFeatures(
        frame_index=idx,
        global_map=rng.standard_normal((c, h, w)).astype(np.float32),
        rois=boxes,
        roi_features=rng.standard_normal((n_rois, d)).astype(np.float32),
        roi_scores=rng.uniform(0, 1, size=n_rois).astype(np.float32),
        roi_class_ids=rng.integers(0, 5, size=n_rois).astype(np.uint32),
    )


def assert_frames_equal(a, b):
    assert a.frame_index == b.frame_index
    np.testing.assert_array_equal(a.global_map, b.global_map)
    np.testing.assert_array_equal(a.rois, b.rois)
    np.testing.assert_array_equal(a.roi_features, b.roi_features)
    np.testing.assert_array_equal(a.roi_scores, b.roi_scores)
    np.testing.assert_array_equal(a.roi_class_ids, b.roi_class_ids)


def test_round_trip(tmp_path):
    frames = [make_frame(i, n) for i, n in enumerate([2, 0, 3])]
    path = tmp_path / "clip.mapf"
    write_stream(frames, path)
    back = list(read_stream(path))
    assert len(back) == 3
    for a, b in zip(frames, back):
        assert_frames_equal(a, b)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=4), st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_round_trip_property(roi_counts, seed):
    import tempfile, os

    frames = [make_frame(i, n, seed=seed) for i, n in enumerate(roi_counts)]
    fd, path = tempfile.mkstemp(suffix=".mapf")
    os.close(fd)
    try:
        write_stream(frames, path)
        back = list(read_stream(path))
        assert len(back) == len(frames)
        for a, b in zip(frames, back):
            assert_frames_equal(a, b)
    finally:
        os.unlink(path)


def test_empty_stream(tmp_path):
    path = tmp_path / "empty.mapf"
    write_stream([], path)
    assert list(read_stream(path)) == []


def test_zero_roi_frame(tmp_path):
    path = tmp_path / "zero.mapf"
    frame = make_frame(0, 0)
    write_stream([frame], path)
    back = list(read_stream(path))
    assert len(back) == 1
    assert back[0].n_rois == 0


def test_byte_count_closed_form(tmp_path):
    # header: 4 magic + 5 u32 = 24 bytes
    # frame: 4 index + 4*4*2*2 map + 4 count + 2 * (16 box + 4 score + 4 class + 32 feats)
    #      = 4 + 64 + 4 + 112 = 184; total = 24 + 3 * 184 = 576
    frames = [make_frame(i, 2) for i in range(3)]
    path = tmp_path / "sized.mapf"
    write_stream(frames, path)
    assert path.stat().st_size == 576
    assert stream_byte_size(3, 2, c=4, h=2, w=2, d=8) == 576


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.mapf"
    path.write_bytes(b"NOPE" + b"\x00" * 40)
    with pytest.raises(StreamFormatError, match="magic"):
        list(read_stream(path))


def test_corrupted_length_field_names_offset(tmp_path):
    frames = [make_frame(i, 2) for i in range(2)]
    path = tmp_path / "corrupt.mapf"
    write_stream(frames, path)
    raw = bytearray(path.read_bytes())
    # the roi-count u32 of frame 0 sits right after header + index + map
    count_offset = 24 + 4 + 4 * 4 * 2 * 2
    raw[count_offset + 3] = 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(StreamFormatError, match="offset") as exc:
        list(read_stream(path))
    assert exc.value.offset is not None


def test_non_finite_rejected(tmp_path):
    frames = [make_frame(0, 1)]
    path = tmp_path / "nan.mapf"
    write_stream(frames, path)
    raw = bytearray(path.read_bytes())
    nan = np.float32(np.nan).tobytes()
    raw[28:32] = nan  # first float of the global map
    path.write_bytes(bytes(raw))
    with pytest.raises(StreamFormatError, match="non-finite"):
        list(read_stream(path))


def test_inconsistent_dims_rejected(tmp_path):
    frames = [make_frame(0, 1, d=8), make_frame(1, 1, d=16)]
    with pytest.raises(ValueError, match="inconsistent"):
        write_stream(frames, tmp_path / "bad_dims.mapf")


def test_streaming_reader_is_lazy(tmp_path):
    frames = [make_frame(i, 1) for i in range(4)]
    path = tmp_path / "lazy.mapf"
    write_stream(frames, path)
    gen = read_stream(path)
    first = next(gen)
    assert first.frame_index == 0
    gen.close()


def test_actor_records_round_trip(tmp_path):
    records = [
        ActorRecord(0, 1, (0.1, 0.2, 0.3, 0.4), 2, 1, 0, 2),
        ActorRecord(1, 1, (0.15, 0.2, 0.35, 0.4), 2, 1, 0, 2, score=0.5),
    ]
    path = tmp_path / "gt.txt"
    write_records(records, path)
    back = read_records(path)
    assert len(back) == 2
    assert back[0].frame_index == 0 and back[0].actor_id == 1
    assert back[0].score == pytest.approx(1.0)
    assert back[1].score == pytest.approx(0.5)
    np.testing.assert_allclose(back[1].box, records[1].box, atol=1e-6)
