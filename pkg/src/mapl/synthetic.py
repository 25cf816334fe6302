"""Synthetic multi-actor scene generator with ground truth.

Desk-scale stand-in for real detector streams: groups of actors move
around well-separated anchors with one motion pattern per group, ROI
features carry the pattern identity plus a per-group offset, and the
global map is a rasterized occupancy/motion/feature encoding of the
boxes. Fully deterministic given the spec seed.
"""

from dataclasses import dataclass, field

import numpy as np

from .streams import ActorRecord, FrameFeatures

PATTERNS = ("stationary", "linear_walk", "crossing", "queueing")

_FEATURE_PROJECTION_SEED = 4242
_CLASS_DIRECTION_SEED = 7777

PERSON_CLASS_ID = 1
DISTRACTOR_CLASS_ID = 2


@dataclass
class SceneSpec:
    """Parameters of one synthetic video; the seed fixes everything."""

    n_groups: int
    actors_per_group: int
    patterns: tuple            # one motion pattern name per group
    noise: float = 0.0
    n_frames: int = 24
    seed: int = 0
    c: int = 32
    h: int = 8
    w: int = 8
    d: int = 64
    activity_label: int = 0
    distractors: int = 0

    def __post_init__(self):
        if self.n_groups < 1 or self.actors_per_group < 1:
            raise ValueError("need at least 1 group and 1 actor per group")
        if len(self.patterns) != self.n_groups:
            raise ValueError(f"expected {self.n_groups} patterns, got {len(self.patterns)}")
        for p in self.patterns:
            if p not in PATTERNS:
                raise ValueError(f"unknown motion pattern {p!r}; choose from {PATTERNS}")
        if self.n_frames < 1:
            raise ValueError("need at least one frame")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")


def _unit(v):
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def _class_direction(pattern_id, d):
    rng = np.random.default_rng(_CLASS_DIRECTION_SEED + pattern_id)
    return _unit(rng.standard_normal(d))


def _group_anchors(n_groups):
    if n_groups == 1:
        return np.array([[0.5, 0.5]])
    angles = 2 * np.pi * np.arange(n_groups) / n_groups
    return 0.5 + 0.30 * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def _layout_offsets(n, rng):
    # actors on a small ring around the group anchor
    angles = 2 * np.pi * (np.arange(n) + rng.uniform(0, 1)) / max(n, 1)
    radius = 0.05 if n > 1 else 0.0
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def _pattern_motion(pattern, t, n_frames, offsets, direction, spacing=0.055, speed=0.0022):
    """Offsets of each actor from the group anchor at frame t."""
    n = offsets.shape[0]
    phase = t / max(n_frames - 1, 1)
    if pattern == "stationary":
        return offsets
    if pattern == "linear_walk":
        # constant-velocity sweep from -A to +A along the group direction
        return offsets + direction * (0.06 * (2.0 * phase - 1.0))
    if pattern == "crossing":
        # every actor passes through the anchor to the mirrored position
        return offsets * (1.0 - 2.0 * phase)
    if pattern == "queueing":
        # single file behind the anchor, creeping forward with wrap-around
        line = np.arange(n)[:, None] * spacing
        shift = speed * t
        length = max(n * spacing, spacing)
        pos = np.mod(line - shift, length)
        return (pos - length / 2.0) * direction[None, :]
    raise ValueError(pattern)


def _raster(boxes, feats, displacements, c, h, w, projection):
    """Occupancy + motion + projected-feature encoding of boxes on the grid."""
    gmap = np.zeros((c, h, w), dtype=np.float64)
    for b in range(boxes.shape[0]):
        x1, y1, x2, y2 = boxes[b]
        for i in range(h):
            cy1, cy2 = i / h, (i + 1) / h
            oy = min(y2, cy2) - max(y1, cy1)
            if oy <= 0:
                continue
            for j in range(w):
                cx1, cx2 = j / w, (j + 1) / w
                ox = min(x2, cx2) - max(x1, cx1)
                if ox <= 0:
                    continue
                cover = (ox * oy) * (h * w)
                gmap[0, i, j] += cover
                gmap[1, i, j] += cover * min(displacements[b] * 60.0, 1.0)
                gmap[2:, i, j] += cover * (feats[b] @ projection)
    gmap[0] = np.minimum(gmap[0], 1.0)
    gmap[1] = np.minimum(gmap[1], 1.0)
    return gmap.astype(np.float32)


def synth_generate(spec):
    """Generate (frames, ground-truth records) for a SceneSpec."""
    n_actors = spec.n_groups * spec.actors_per_group
    if n_actors + spec.distractors > spec.h * spec.w:
        raise ValueError(
            f"{n_actors + spec.distractors} actors exceed the {spec.h}x{spec.w} raster capacity"
        )
    rng = np.random.default_rng(spec.seed)
    proj_rng = np.random.default_rng(_FEATURE_PROJECTION_SEED)
    projection = proj_rng.standard_normal((spec.d, spec.c - 2)) / np.sqrt(spec.d)

    anchors = _group_anchors(spec.n_groups)
    groups = []
    for g in range(spec.n_groups):
        n = spec.actors_per_group
        direction = _unit(rng.standard_normal(2))
        offsets = _layout_offsets(n, rng)
        sizes = rng.uniform(0.13, 0.17, size=(n, 2))
        group_dir = _unit(rng.standard_normal(spec.d))
        jitter = rng.standard_normal((n, spec.d)) * 0.3
        pattern_id = PATTERNS.index(spec.patterns[g])
        base = 3.0 * _class_direction(pattern_id, spec.d) + 1.0 * group_dir
        feats = np.stack([_unit(base + jitter[i]) for i in range(n)])
        groups.append(
            dict(direction=direction, offsets=offsets, sizes=sizes,
                 feats=feats, pattern=spec.patterns[g], pattern_id=pattern_id)
        )

    distractor_centers = rng.uniform(0.1, 0.9, size=(spec.distractors, 2))
    distractor_sizes = rng.uniform(0.08, 0.12, size=(spec.distractors, 2))
    distractor_feats = rng.standard_normal((spec.distractors, spec.d))
    distractor_feats = np.stack([_unit(f) for f in distractor_feats]) if spec.distractors else np.zeros((0, spec.d))

    frames = []
    records = []
    prev_centers = None
    for t in range(spec.n_frames):
        centers = []
        feats = []
        sizes = []
        meta = []
        for g, info in enumerate(groups):
            off = _pattern_motion(info["pattern"], t, spec.n_frames, info["offsets"], info["direction"])
            for a in range(spec.actors_per_group):
                centers.append(anchors[g] + off[a])
                feats.append(info["feats"][a])
                sizes.append(info["sizes"][a])
                meta.append((g, info["pattern_id"], g * spec.actors_per_group + a))
        centers = np.asarray(centers, dtype=np.float64)
        feats = np.asarray(feats, dtype=np.float64)
        sizes = np.asarray(sizes, dtype=np.float64)

        if spec.noise > 0:
            feats = feats + spec.noise * rng.standard_normal(feats.shape)
            feats = np.stack([_unit(f) for f in feats])

        half = sizes / 2.0
        boxes = np.concatenate([centers - half, centers + half], axis=1)
        boxes = np.clip(boxes, 0.0, 1.0)
        boxes[:, 2] = np.maximum(boxes[:, 2], boxes[:, 0] + 1e-3)
        boxes[:, 3] = np.maximum(boxes[:, 3], boxes[:, 1] + 1e-3)

        if prev_centers is None:
            displacements = np.zeros(len(centers))
        else:
            displacements = np.linalg.norm(centers - prev_centers, axis=1)
        prev_centers = centers

        all_boxes = boxes
        all_feats = feats
        all_disp = displacements
        classes = np.full(len(centers), PERSON_CLASS_ID, dtype=np.uint32)
        if spec.distractors:
            dhalf = distractor_sizes / 2.0
            dboxes = np.clip(
                np.concatenate([distractor_centers - dhalf, distractor_centers + dhalf], axis=1), 0.0, 1.0
            )
            all_boxes = np.concatenate([boxes, dboxes], axis=0)
            all_feats = np.concatenate([feats, distractor_feats], axis=0)
            all_disp = np.concatenate([displacements, np.zeros(spec.distractors)])
            classes = np.concatenate(
                [classes, np.full(spec.distractors, DISTRACTOR_CLASS_ID, dtype=np.uint32)]
            )

        gmap = _raster(all_boxes, all_feats, all_disp, spec.c, spec.h, spec.w, projection)

        roi_boxes = all_boxes.copy()
        if spec.noise > 0:
            roi_boxes[:, :2] += spec.noise * 0.02 * rng.standard_normal((len(all_boxes), 2))
            roi_boxes[:, 2:] += spec.noise * 0.02 * rng.standard_normal((len(all_boxes), 2))
            roi_boxes = np.clip(roi_boxes, 0.0, 1.0)
            roi_boxes[:, 2] = np.maximum(roi_boxes[:, 2], roi_boxes[:, 0] + 1e-3)
            roi_boxes[:, 3] = np.maximum(roi_boxes[:, 3], roi_boxes[:, 1] + 1e-3)

        order = rng.permutation(len(all_boxes))
        frames.append(
            FrameFeatures(
                frame_index=t,
                global_map=gmap,
                rois=roi_boxes[order],
                roi_features=all_feats[order].astype(np.float32),
                roi_scores=np.full(len(all_boxes), 0.95, dtype=np.float32)[order],
                roi_class_ids=classes[order],
            )
        )
        for (g, pattern_id, actor_id), box in zip(meta, boxes):
            records.append(
                ActorRecord(
                    frame_index=t,
                    actor_id=actor_id,
                    box=tuple(float(v) for v in box),
                    action_label=pattern_id,
                    group_activity_label=spec.activity_label,
                    membership_id=g,
                    social_activity_label=pattern_id,
                )
            )
    return frames, records


@dataclass
class CorpusSpec:
    """A labeled collection of SceneSpecs built from activity templates."""

    templates: list            # list of tuples of pattern names, one per group
    videos_per_template: int
    actors_per_group: int = 3
    noise: float = 0.05
    n_frames: int = 24
    seed: int = 0
    scene_kwargs: dict = field(default_factory=dict)

    def scene_specs(self):
        specs = []
        for label, patterns in enumerate(self.templates):
            for v in range(self.videos_per_template):
                specs.append(
                    SceneSpec(
                        n_groups=len(patterns),
                        actors_per_group=self.actors_per_group,
                        patterns=tuple(patterns),
                        noise=self.noise,
                        n_frames=self.n_frames,
                        seed=self.seed * 100003 + label * 1009 + v,
                        activity_label=label,
                        **self.scene_kwargs,
                    )
                )
        return specs
