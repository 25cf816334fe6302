"""Label inference over trained models.

Runs the pipeline forward over each stream (one read per frame), keeps
per-frame graphs and registrations, smooths the whole-video composite
graph, then clusters: k-means on pooled video features for the group
activity, k-means on actor rows for individual actions, per-frame
spectral communities carried along registration chains for memberships.
"""

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .clustering import elbow_k, kmeans, spectral_clusters
from .graphs import build_action_graph, smooth_stack
from .predictor import attention, global_loss, motion_mask, select_actors
from .autodiff import Tensor
from .registration import build_composite, register, temporal_smooth_stack
from .streams import ActorRecord, read_stream


@dataclass
class VideoInference:
    """Everything inference extracted from one stream."""

    n_frames: int = 0
    graphs: list = field(default_factory=list)
    perms: list = field(default_factory=list)
    smoothed: np.ndarray = None          # [M, F] whole-video composite rows
    offsets: list = field(default_factory=list)
    chain_of_node: list = field(default_factory=list)   # (frame_pos, rank) -> chain id
    chain_frames: dict = field(default_factory=dict)    # chain -> list of (frame_pos, rank)
    frame_memberships: list = field(default_factory=list)  # per frame: rank -> community
    chain_group: dict = field(default_factory=dict)     # chain -> video-level group id
    pooled: np.ndarray = None
    actor_rows: np.ndarray = None        # [n_actor_nodes, F]
    actor_meta: list = field(default_factory=list)      # (frame_pos, rank, frame_index, box, chain)
    flagged_empty: bool = False


def run_video(path, model, config):
    """Forward-only pass; frames are read exactly once."""
    state = None
    prev = None
    pred_map = None
    event = None
    graphs = []
    feats = []
    perms = []
    n_frames = 0
    for frame in read_stream(path):
        n_frames += 1
        if prev is not None:
            mask = motion_mask(prev.global_map, frame.global_map)
            _, pmap = global_loss(pred_map, Tensor(frame.global_map), mask)
            alpha = attention(Tensor(pmap.data.copy()))
            sel = select_actors(alpha, prev.rois, config.attention_slots)
            graph = build_action_graph(
                prev.rois[sel], prev.roi_features[sel], event,
                model.tensors["event_w"], model.tensors["event_b"],
                include_action_node=config.action_node, frame_index=prev.frame_index,
            )
            fa = smooth_stack(graph, model.spatial_weights)
            if graphs:
                perms.append(
                    register(graphs[-1], graph, config.w_feature, config.w_iou,
                             feats_t=feats[-1].data, feats_next=fa.data)
                )
            graphs.append(graph)
            feats.append(fa)
        pred_map, event, state = model.predictor.step(frame.global_map, state, model.tensors)
        prev = frame

    out = VideoInference(n_frames=n_frames, graphs=graphs, perms=perms)
    if not graphs:
        out.flagged_empty = True
        out.pooled = None
        out.actor_rows = np.zeros((0, model.node_width), dtype=np.float32)
        return out

    composite = build_composite(graphs, perms, features=feats)
    smoothed = temporal_smooth_stack(composite, model.temporal_weights).data
    out.smoothed = smoothed
    out.offsets = composite.offsets

    _assign_chains(out)
    _frame_memberships(out, config)
    _merge_chain_groups(out)

    rows = []
    meta = []
    for pos, g in enumerate(graphs):
        for rank, local in enumerate(g.real_actor_indices):
            rows.append(smoothed[composite.offsets[pos] + local])
            chain = out.chain_of_node.get((pos, rank))
            meta.append((pos, rank, g.frame_index, g.nodes[local].box, chain))
    out.actor_rows = np.asarray(rows, dtype=np.float32) if rows else np.zeros((0, smoothed.shape[1]), dtype=np.float32)
    out.actor_meta = meta
    if rows:
        out.pooled = out.actor_rows.mean(axis=0)
    else:
        out.pooled = None
        out.flagged_empty = True
    return out


def _assign_chains(out):
    """Chain ids follow registration matches across consecutive frames."""
    chain_of_node = {}
    chain_frames = defaultdict(list)
    next_chain = 0
    current = {}
    for pos, g in enumerate(out.graphs):
        ranks = range(len(g.real_actor_indices))
        if pos == 0:
            current = {}
            for r in ranks:
                current[r] = next_chain
                next_chain += 1
        else:
            perm = out.perms[pos - 1]
            carried = {}
            for i, j in perm.matched_real_pairs():
                if i in current:
                    carried[j] = current[i]
            for r in ranks:
                if r not in carried:
                    carried[r] = next_chain
                    next_chain += 1
            current = carried
        for r in ranks:
            chain_of_node[(pos, r)] = current[r]
            chain_frames[current[r]].append((pos, r))
    out.chain_of_node = chain_of_node
    out.chain_frames = dict(chain_frames)


def _frame_memberships(out, config):
    """Spectral communities on each frame's actor block."""
    n_groups = config.membership_groups or None
    per_frame = []
    for g in out.graphs:
        idx = g.real_actor_indices
        if not idx:
            per_frame.append({})
            continue
        block = g.adjacency[np.ix_(idx, idx)]
        labels = spectral_clusters(block, n_groups=n_groups, seed=config.seed)
        per_frame.append({rank: int(labels[rank]) for rank in range(len(idx))})
    out.frame_memberships = per_frame


def _merge_chain_groups(out):
    """Chains vote per co-occurring frame: same community in at least half
    of their shared frames puts two chains in the same social group."""
    together = defaultdict(int)
    shared = defaultdict(int)
    for pos, members in enumerate(out.frame_memberships):
        ranks = sorted(members)
        for a_i in range(len(ranks)):
            for b_i in range(a_i + 1, len(ranks)):
                ra, rb = ranks[a_i], ranks[b_i]
                ca = out.chain_of_node[(pos, ra)]
                cb = out.chain_of_node[(pos, rb)]
                key = (min(ca, cb), max(ca, cb))
                shared[key] += 1
                if members[ra] == members[rb]:
                    together[key] += 1

    chains = sorted(out.chain_frames)
    parent = {c: c for c in chains}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for (a, b), n in shared.items():
        if together[(a, b)] * 2 >= n:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

    group_of_root = {}
    chain_group = {}
    for c in chains:
        root = find(c)
        if root not in group_of_root:
            group_of_root[root] = len(group_of_root)
        chain_group[c] = group_of_root[root]
    out.chain_group = chain_group


def infer_corpus(stream_paths, model, config):
    """Cluster labels over a corpus; returns (per-video records, info dict)."""
    videos = [run_video(p, model, config) for p in stream_paths]
    info = {"flagged_empty": sum(v.flagged_empty for v in videos)}
    if not videos:
        return [], info

    width = model.node_width
    pooled = np.stack(
        [v.pooled if v.pooled is not None else np.zeros(width, dtype=np.float32) for v in videos]
    )
    k_group = min(config.k_group, len(videos))
    if config.k_mode == "opt" and len(videos) > k_group:
        k_group = elbow_k(pooled, k_group, min(3 * config.k_group, len(videos)), config.seed)
    group_ids, _ = kmeans(pooled, k_group, config.seed)
    info["k_group"] = k_group

    all_rows = np.concatenate([v.actor_rows for v in videos], axis=0) if videos else np.zeros((0, width))
    if len(all_rows):
        k_action = min(config.k_action, len(all_rows))
        if config.k_mode == "opt" and len(all_rows) > k_action:
            k_action = elbow_k(all_rows, k_action, min(3 * config.k_action, len(all_rows)), config.seed)
        action_ids, centers = kmeans(all_rows, k_action, config.seed)
        dists = np.linalg.norm(all_rows - centers[action_ids], axis=1)
        span = dists.max() - dists.min()
        conf = 1.0 - (dists - dists.min()) / span if span > 0 else np.ones_like(dists)
        info["k_action"] = k_action
    else:
        action_ids = np.zeros(0, dtype=int)
        conf = np.zeros(0)
        info["k_action"] = 0

    per_video_records = []
    cursor = 0
    for vi, v in enumerate(videos):
        records = []
        n = len(v.actor_meta)
        ids = action_ids[cursor:cursor + n]
        scores = conf[cursor:cursor + n]
        cursor += n

        chain_actions = defaultdict(list)
        for (pos, rank, frame_index, box, chain), aid in zip(v.actor_meta, ids):
            chain_actions[chain].append(int(aid))
        group_actions = defaultdict(list)
        for chain, acts in chain_actions.items():
            group_actions[v.chain_group.get(chain, 0)].extend(acts)
        social_of_group = {
            g: int(np.bincount(acts).argmax()) if acts else 0 for g, acts in group_actions.items()
        }

        for (pos, rank, frame_index, box, chain), aid, score in zip(v.actor_meta, ids, scores):
            group = v.chain_group.get(chain, 0)
            records.append(
                ActorRecord(
                    frame_index=frame_index,
                    actor_id=chain if chain is not None else -1,
                    box=box,
                    action_label=int(aid),
                    group_activity_label=int(group_ids[vi]),
                    membership_id=group,
                    social_activity_label=social_of_group.get(group, 0),
                    score=float(score),
                )
            )
        per_video_records.append(records)
    return per_video_records, info
