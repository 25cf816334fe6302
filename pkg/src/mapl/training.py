"""Multi-actor predictive training: losses, parameters, streaming loop.

One pass over each stream, frame by frame: anticipate the next global
map, realize the prediction losses when the frame arrives, build and
smooth the action graph, register it against the previous one, and take
a gradient step. History is bounded by two frames plus a sliding window
of graphs.
"""

import struct
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import GradientDescent, NonFiniteError, Tape, Tensor, backward
from .graphs import build_action_graph, smooth_stack
from .predictor import SpatialPredictor, attention, global_loss, motion_mask, select_actors
from .registration import build_composite, register, temporal_smooth_stack
from .streams import read_stream, stream_dims

CKPT_MAGIC = b"MAPC"
CKPT_VERSION = 1

DEFAULT_CHANNELS = 32
DEFAULT_ROI_DIM = 64

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class ModelParams:
    """Every learnable tensor in the engine, keyed by name."""

    def __init__(self, channels, roi_dim, config, rng=None):
        rng = rng or np.random.default_rng(config.seed)
        self.channels = channels
        self.roi_dim = roi_dim
        self.node_width = roi_dim + 4
        self.config = config
        self.predictor = SpatialPredictor(channels, config.event_dim, config.layers)
        self.tensors = dict(self.predictor.init_params(rng))

        w = self.node_width
        limit = np.sqrt(6.0 / (config.event_dim + w))
        self.tensors["event_w"] = Tensor(
            rng.uniform(-limit, limit, (config.event_dim, w)).astype(np.float32), requires_grad=True
        )
        self.tensors["event_b"] = Tensor(np.zeros(w, dtype=np.float32), requires_grad=True)

        def near_identity(rows, cols, scale=0.05):
            base = np.zeros((rows, cols))
            np.fill_diagonal(base, 1.0)
            return Tensor((base + scale * rng.standard_normal((rows, cols))).astype(np.float32),
                          requires_grad=True)

        for i in range(config.spatial_layers):
            self.tensors[f"ws{i}"] = near_identity(w, w)
        for i in range(config.temporal_layers):
            self.tensors[f"wt{i}"] = near_identity(w, w)

        # anticipators start at "everything persists": identity features,
        # box read out of the geometry slice of the node vector
        self.tensors["w_act"] = near_identity(w, w, scale=0.02)
        bb = np.zeros((w, 4))
        bb[roi_dim:, :] = np.eye(4)
        self.tensors["w_bb"] = Tensor(
            (bb + 0.02 * rng.standard_normal((w, 4))).astype(np.float32), requires_grad=True
        )

    @property
    def spatial_weights(self):
        return [self.tensors[f"ws{i}"] for i in range(self.config.spatial_layers)]

    @property
    def temporal_weights(self):
        return [self.tensors[f"wt{i}"] for i in range(self.config.temporal_layers)]

    def tensor_list(self):
        return [self.tensors[name] for name in sorted(self.tensors)]

    def replace(self, name, tensor):
        self.tensors[name] = tensor

    def state_arrays(self):
        return {name: t.data.astype(np.float32) for name, t in self.tensors.items()}

    def load_arrays(self, arrays):
        for name, t in self.tensors.items():
            if name not in arrays:
                raise KeyError(f"checkpoint is missing parameter {name!r}")
            if arrays[name].shape != t.data.shape:
                raise ValueError(
                    f"checkpoint parameter {name!r} has shape {arrays[name].shape}, expected {t.data.shape}"
                )
            t.data = arrays[name].astype(np.float32)
        extra = set(arrays) - set(self.tensors)
        if extra:
            raise KeyError(f"checkpoint has unexpected parameters: {sorted(extra)}")


# ---------------------------------------------------------------------------
# losses

def actor_loss(feats_t, boxes_t, feats_next, boxes_next, perm, w_act, w_bb):
    """Mean anticipation residual over matched real actor pairs.

    Each matched pair contributes the L2 distance between the anticipated
    feature (w_act on the frame-t row) and the registered next-frame row,
    plus the L2 distance between the anticipated geometry (w_bb) and the
    registered next-frame box. boxes_t rides along for interface symmetry;
    geometry is anticipated from the feature vector, which embeds it.
    """
    pairs = perm.matched_real_pairs()
    if not pairs:
        return Tensor(0.0)
    idx_t = [i for i, _ in pairs]
    idx_n = [j for _, j in pairs]
    rows_t = ad.take_rows(feats_t, idx_t)
    # next-frame rows are the "actual" side of the residual: they are
    # targets like the observed map in the global loss, so they stay
    # constant here; letting them chase the anticipation collapses the
    # representation instead of training the anticipators
    next_data = feats_next.data if isinstance(feats_next, Tensor) else np.asarray(feats_next)
    rows_n = Tensor(next_data[idx_n])
    boxes_n = Tensor(np.asarray(boxes_next, dtype=np.float32).reshape(-1, 4)[idx_n])

    feat_residual = ad.l2norm(ad.sub(ad.matmul(rows_t, w_act), rows_n), axis=1)
    box_residual = ad.l2norm(ad.sub(ad.matmul(rows_t, w_bb), boxes_n), axis=1)
    return ad.mean(ad.add(feat_residual, box_residual))


def total_loss(l_global, l_actor, lambda_global, lambda_actor):
    lg = ad.mul(ad.as_tensor(l_global), float(lambda_global))
    la = ad.mul(ad.as_tensor(l_actor), float(lambda_actor))
    return ad.add(lg, la)


# ---------------------------------------------------------------------------
# streaming pipeline

class PipelineState:
    """Per-video rolling state: recurrent state, one look-behind frame, and
    the sliding window of graphs feeding the composite."""

    def __init__(self):
        self.recurrent = None
        self.prev_frame = None
        self.pred_map = None
        self.event = None
        self.graphs = deque()
        self.feats = deque()
        self.perms = deque()

    def retained_graphs(self):
        return len(self.graphs)


def process_frame(model, config, ps, frame):
    """Advance the pipeline by one frame.

    Returns (l_global, l_actor, l_total, graph) once a look-behind frame
    exists, else None. The caller owns backward/step decisions.
    """
    out = None
    if ps.prev_frame is not None:
        mask = motion_mask(ps.prev_frame.global_map, frame.global_map)
        lg, pmap = global_loss(ps.pred_map, Tensor(frame.global_map), mask)
        alpha = attention(Tensor(pmap.data.copy()))
        sel = select_actors(alpha, ps.prev_frame.rois, config.attention_slots)
        boxes = ps.prev_frame.rois[sel]
        feats = ps.prev_frame.roi_features[sel]
        graph = build_action_graph(
            boxes, feats, ps.event, model.tensors["event_w"], model.tensors["event_b"],
            include_action_node=config.action_node, frame_index=ps.prev_frame.frame_index,
        )
        fa = smooth_stack(graph, model.spatial_weights)
        if ps.graphs:
            perm = register(
                ps.graphs[-1], graph, config.w_feature, config.w_iou,
                feats_t=ps.feats[-1].data, feats_next=fa.data,
            )
            ps.perms.append(perm)
        ps.graphs.append(graph)
        ps.feats.append(fa)
        if len(ps.graphs) > config.bptt_window:
            ps.graphs.popleft()
            ps.feats.popleft()
            ps.perms.popleft()

        la = Tensor(0.0)
        if len(ps.graphs) >= 2 and graph.n_nodes > 0:
            comp = build_composite(list(ps.graphs), list(ps.perms), features=list(ps.feats))
            smoothed = temporal_smooth_stack(comp, model.temporal_weights)
            pos_a = len(ps.graphs) - 2
            pos_b = len(ps.graphs) - 1
            ga, gb = ps.graphs[pos_a], ps.graphs[pos_b]
            rows_a = [comp.offsets[pos_a] + i for i in ga.real_actor_indices]
            rows_b = [comp.offsets[pos_b] + j for j in gb.real_actor_indices]
            perm = ps.perms[-1]
            if rows_a and rows_b and perm.matched_real_pairs():
                boxes_b = np.array([gb.nodes[j].box for j in gb.real_actor_indices], dtype=np.float32)
                la = actor_loss(
                    ad.take_rows(smoothed, rows_a),
                    np.array([ga.nodes[i].box for i in ga.real_actor_indices], dtype=np.float32),
                    ad.take_rows(smoothed, rows_b),
                    boxes_b, perm,
                    model.tensors["w_act"], model.tensors["w_bb"],
                )
        lt = total_loss(lg, la, config.lambda_global, config.lambda_actor)
        out = (lg, la, lt, graph)

    ps.pred_map, ps.event, ps.recurrent = model.predictor.step(
        frame.global_map, ps.recurrent, model.tensors
    )
    ps.prev_frame = frame
    return out


def clip_total_loss(frames, model, config):
    """Forward-only total loss summed over a short clip (for grad checks)."""
    ps = PipelineState()
    total = Tensor(0.0)
    for frame in frames:
        out = process_frame(model, config, ps, frame)
        if out is not None:
            total = ad.add(total, out[2])
    return total


@dataclass
class TrainStats:
    frames_read: int = 0
    optimizer_steps: int = 0
    skipped_steps: int = 0
    videos: int = 0
    peak_retained_frames: int = 0
    peak_retained_graphs: int = 0
    loss_log: list = field(default_factory=list)  # (video, frame_index, lg, la, lt)


def train_stream(stream_paths, config, channels=None, roi_dim=None):
    """Single streaming pass over all videos; returns (model, stats).

    Every frame is read exactly once; retained history never exceeds the
    look-behind frame + current frame and the bptt window of graphs.
    """
    config.validate()
    if channels is None or roi_dim is None:
        if stream_paths:
            c, _, _, d = stream_dims(stream_paths[0])
        else:
            c, d = DEFAULT_CHANNELS, DEFAULT_ROI_DIM
        channels = channels or c
        roi_dim = roi_dim or d
    rng = np.random.default_rng(config.seed)
    model = ModelParams(channels, roi_dim, config, rng)
    optimizer = GradientDescent(model.tensor_list(), config.learning_rate)
    params = model.tensor_list()
    stats = TrainStats()

    step = 0
    for video_idx, path in enumerate(stream_paths):
        stats.videos += 1
        ps = PipelineState()
        with Tape() as tape:
            for frame in read_stream(path):
                stats.frames_read += 1
                tape.mark_frame(step)
                out = process_frame(model, config, ps, frame)
                if out is not None:
                    lg, la, lt, _ = out
                    if np.isfinite(lt.data):
                        try:
                            grads = backward(lt, wrt=params)
                            optimizer.step(grads)
                            stats.optimizer_steps += 1
                        except NonFiniteError:
                            stats.skipped_steps += 1
                    else:
                        stats.skipped_steps += 1
                    stats.loss_log.append(
                        (video_idx, frame.frame_index, float(lg.data), float(la.data), float(lt.data))
                    )
                retained_frames = (1 if ps.prev_frame is not None else 0) + 1
                stats.peak_retained_frames = max(stats.peak_retained_frames, retained_frames)
                stats.peak_retained_graphs = max(stats.peak_retained_graphs, ps.retained_graphs())
                tape.evict_before(step - config.bptt_window)
                step += 1
    return model, stats


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(model, frames_trained, cfg_hash, path, hw=(0, 0)):
    """Named parameter blocks, little-endian; see the format constants."""
    c = model.channels
    d = model.roi_dim
    h, w = hw
    arrays = model.state_arrays()
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(_U32.pack(CKPT_VERSION))
        blob = cfg_hash.encode()
        fh.write(_U32.pack(len(blob)))
        fh.write(blob)
        fh.write(_U64.pack(int(frames_trained)))
        for v in (c, h, w, d):
            fh.write(_U32.pack(int(v)))
        fh.write(_U32.pack(len(arrays)))
        for name in sorted(arrays):
            arr = arrays[name]
            nb = name.encode()
            fh.write(_U32.pack(len(nb)))
            fh.write(nb)
            fh.write(_U32.pack(arr.ndim))
            for s in arr.shape:
                fh.write(_U32.pack(s))
            fh.write(arr.astype("<f4").tobytes())


def load_checkpoint(path):
    """Returns (arrays, frames_trained, cfg_hash, (c, h, w, d))."""
    with open(path, "rb") as fh:
        if fh.read(4) != CKPT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version = _U32.unpack(fh.read(4))[0]
        if version != CKPT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        hash_len = _U32.unpack(fh.read(4))[0]
        cfg_hash = fh.read(hash_len).decode()
        frames_trained = _U64.unpack(fh.read(8))[0]
        dims = tuple(_U32.unpack(fh.read(4))[0] for _ in range(4))
        n = _U32.unpack(fh.read(4))[0]
        arrays = {}
        for _ in range(n):
            name_len = _U32.unpack(fh.read(4))[0]
            name = fh.read(name_len).decode()
            ndim = _U32.unpack(fh.read(4))[0]
            shape = tuple(_U32.unpack(fh.read(4))[0] for _ in range(ndim))
            count = int(np.prod(shape)) if shape else 1
            arrays[name] = np.frombuffer(fh.read(4 * count), dtype="<f4").reshape(shape).copy()
        return arrays, frames_trained, cfg_hash, dims


def restore_model(path, config):
    """Rebuild ModelParams from a checkpoint written under the same config."""
    from .config import config_hash

    arrays, frames_trained, cfg_hash, dims = load_checkpoint(path)
    if cfg_hash != config_hash(config):
        raise ValueError(
            f"{path}: checkpoint was written under a different config (hash {cfg_hash})"
        )
    c, _, _, d = dims
    model = ModelParams(c, d, config)
    model.load_arrays(arrays)
    return model, frames_trained
