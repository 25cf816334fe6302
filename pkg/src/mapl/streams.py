"""Feature-stream file I/O.

The MAPF container decouples the engine from any particular detector: a
little-endian header (magic, version, C/H/W/D) followed by per-frame
records of the global feature map and candidate ROIs with features.
Ground truth and predictions share a line-delimited text format.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"MAPF"
VERSION = 1

_U32 = struct.Struct("<I")


class StreamFormatError(ValueError):
    """Malformed stream file; carries the byte offset of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass
class FrameFeatures:
    """One frame: global map F, candidate boxes and per-ROI features."""

    frame_index: int
    global_map: np.ndarray      # [C, H, W] float32
    rois: np.ndarray            # [n, 4] normalized (x1, y1, x2, y2)
    roi_features: np.ndarray    # [n, D] float32
    roi_scores: np.ndarray      # [n] in [0, 1]
    roi_class_ids: np.ndarray   # [n] uint32

    def __post_init__(self):
        self.global_map = np.ascontiguousarray(self.global_map, dtype=np.float32)
        self.rois = np.asarray(self.rois, dtype=np.float32).reshape(-1, 4)
        self.roi_features = np.asarray(self.roi_features, dtype=np.float32)
        self.roi_scores = np.asarray(self.roi_scores, dtype=np.float32).reshape(-1)
        self.roi_class_ids = np.asarray(self.roi_class_ids, dtype=np.uint32).reshape(-1)
        n = self.rois.shape[0]
        if self.roi_features.ndim != 2:
            if n == 0:
                self.roi_features = self.roi_features.reshape(0, 0)
            else:
                self.roi_features = self.roi_features.reshape(n, -1)
        if self.roi_features.shape[0] != n or self.roi_scores.shape[0] != n or self.roi_class_ids.shape[0] != n:
            raise ValueError(f"ROI arrays disagree on count: {n} boxes")
        if n and not (np.all(self.rois[:, 0] < self.rois[:, 2]) and np.all(self.rois[:, 1] < self.rois[:, 3])):
            raise ValueError("degenerate ROI box: requires x1 < x2 and y1 < y2")

    @property
    def n_rois(self):
        return self.rois.shape[0]

    def dims(self):
        c, h, w = self.global_map.shape
        return c, h, w, self.roi_features.shape[1]


def write_stream(frames, path):
    """Write frames to a MAPF file; dimension constants must be consistent."""
    dims = None
    with open(path, "wb") as fh:
        for frame in frames:
            if dims is None:
                dims = frame.dims()
                fh.write(MAGIC)
                for v in (VERSION, *dims):
                    fh.write(_U32.pack(v))
            elif frame.dims() != dims:
                raise ValueError(f"inconsistent stream dims: {frame.dims()} vs {dims}")
            fh.write(_U32.pack(frame.frame_index))
            fh.write(frame.global_map.astype("<f4").tobytes())
            fh.write(_U32.pack(frame.n_rois))
            for i in range(frame.n_rois):
                fh.write(frame.rois[i].astype("<f4").tobytes())
                fh.write(np.float32(frame.roi_scores[i]).astype("<f4").tobytes())
                fh.write(_U32.pack(int(frame.roi_class_ids[i])))
                fh.write(frame.roi_features[i].astype("<f4").tobytes())
        if dims is None:
            # empty stream still gets a header; dims default to zero
            fh.write(MAGIC)
            for v in (VERSION, 0, 0, 0, 0):
                fh.write(_U32.pack(v))


class _Reader:
    def __init__(self, fh):
        self.fh = fh
        self.offset = 0

    def exact(self, n, what):
        buf = self.fh.read(n)
        if len(buf) != n:
            raise StreamFormatError(f"truncated {what}: wanted {n} bytes, got {len(buf)}", self.offset)
        self.offset += n
        return buf

    def u32(self, what):
        return _U32.unpack(self.exact(4, what))[0]

    def f32s(self, count, what):
        arr = np.frombuffer(self.exact(4 * count, what), dtype="<f4")
        if not np.all(np.isfinite(arr)):
            raise StreamFormatError(f"non-finite float in {what}", self.offset - 4 * count)
        return arr


def read_stream(path):
    """Yield FrameFeatures one at a time in ascending frame order."""
    with open(path, "rb") as fh:
        r = _Reader(fh)
        magic = r.exact(4, "magic")
        if magic != MAGIC:
            raise StreamFormatError(f"bad magic {magic!r}", 0)
        version = r.u32("version")
        if version != VERSION:
            raise StreamFormatError(f"unsupported version {version}", 4)
        c = r.u32("C")
        h = r.u32("H")
        w = r.u32("W")
        d = r.u32("D")
        prev_index = -1
        while True:
            head = fh.read(4)
            if head == b"":
                return
            if len(head) != 4:
                raise StreamFormatError("truncated frame index", r.offset)
            r.offset += 4
            frame_index = _U32.unpack(head)[0]
            if frame_index <= prev_index:
                raise StreamFormatError(
                    f"frame index {frame_index} not ascending after {prev_index}", r.offset - 4
                )
            prev_index = frame_index
            gmap = r.f32s(c * h * w, "global map").reshape(c, h, w)
            n_rois = r.u32("roi count")
            if n_rois > 10_000_000:
                raise StreamFormatError(f"implausible roi count {n_rois}", r.offset - 4)
            boxes = np.zeros((n_rois, 4), dtype=np.float32)
            feats = np.zeros((n_rois, d), dtype=np.float32)
            scores = np.zeros(n_rois, dtype=np.float32)
            classes = np.zeros(n_rois, dtype=np.uint32)
            for i in range(n_rois):
                boxes[i] = r.f32s(4, "roi box")
                scores[i] = r.f32s(1, "roi score")[0]
                classes[i] = r.u32("roi class id")
                feats[i] = r.f32s(d, "roi features")
            try:
                yield FrameFeatures(frame_index, gmap, boxes, feats, scores, classes)
            except ValueError as exc:
                raise StreamFormatError(str(exc), r.offset) from exc


def stream_dims(path):
    """Read only the header: (C, H, W, D). No frame records are consumed."""
    with open(path, "rb") as fh:
        r = _Reader(fh)
        magic = r.exact(4, "magic")
        if magic != MAGIC:
            raise StreamFormatError(f"bad magic {magic!r}", 0)
        version = r.u32("version")
        if version != VERSION:
            raise StreamFormatError(f"unsupported version {version}", 4)
        return tuple(r.u32(k) for k in "CHWD")


def stream_byte_size(n_frames, n_rois_per_frame, c, h, w, d):
    """Closed-form file size for uniform streams (header + frame records)."""
    header = 4 + 5 * 4
    per_roi = 4 * 4 + 4 + 4 + 4 * d
    per_frame = 4 + 4 * c * h * w + 4 + n_rois_per_frame * per_roi
    return header + n_frames * per_frame


# ---------------------------------------------------------------------------
# actor records: ground truth and predictions share one text format

@dataclass
class ActorRecord:
    """One actor in one frame; score defaults to 1.0 for ground truth."""

    frame_index: int
    actor_id: int
    box: tuple                   # (x1, y1, x2, y2) normalized
    action_label: int
    group_activity_label: int
    membership_id: int
    social_activity_label: int
    score: float = 1.0


def write_records(records, path):
    with open(path, "w") as fh:
        fh.write("# frame actor x1 y1 x2 y2 action group membership social score\n")
        for r in records:
            box = " ".join(f"{v:.6f}" for v in r.box)
            fh.write(
                f"{r.frame_index} {r.actor_id} {box} {r.action_label} "
                f"{r.group_activity_label} {r.membership_id} {r.social_activity_label} {r.score:.6f}\n"
            )


def read_records(path):
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (10, 11):
                raise ValueError(f"{path}:{lineno}: expected 10 or 11 fields, got {len(parts)}")
            vals = [float(p) for p in parts]
            records.append(
                ActorRecord(
                    frame_index=int(vals[0]),
                    actor_id=int(vals[1]),
                    box=tuple(vals[2:6]),
                    action_label=int(vals[6]),
                    group_activity_label=int(vals[7]),
                    membership_id=int(vals[8]),
                    social_activity_label=int(vals[9]),
                    score=vals[10] if len(vals) == 11 else 1.0,
                )
            )
    return records


@dataclass
class VideoAnnotation:
    """All actor records of one video, grouped for evaluation."""

    records: list = field(default_factory=list)

    def frames(self):
        by_frame = {}
        for r in self.records:
            by_frame.setdefault(r.frame_index, []).append(r)
        return dict(sorted(by_frame.items()))

    def video_group_label(self):
        labels = [r.group_activity_label for r in self.records]
        if not labels:
            return -1
        vals, counts = np.unique(labels, return_counts=True)
        return int(vals[np.argmax(counts)])
