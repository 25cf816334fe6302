"""Evaluation suite: label alignment, MCA, detection mAP, membership and
social-activity accuracy, and tube-level video-mAP.

Predicted cluster ids carry no names, so every metric first aligns them
to ground-truth labels with a Hungarian solve on the contingency table.
Accumulators run in float64.
"""

from collections import defaultdict

import numpy as np

from .registration import box_iou, solve_assignment


def contingency_table(pred_ids, gt_ids):
    p_labels = sorted(set(pred_ids))
    g_labels = sorted(set(gt_ids))
    table = np.zeros((len(p_labels), len(g_labels)), dtype=np.float64)
    p_index = {p: i for i, p in enumerate(p_labels)}
    g_index = {g: i for i, g in enumerate(g_labels)}
    for p, g in zip(pred_ids, gt_ids):
        table[p_index[p], g_index[g]] += 1
    return table, p_labels, g_labels


def align_labels(pred_ids, gt_ids):
    """Injective map predicted-id -> gt-label maximizing total agreement."""
    pred_ids = list(pred_ids)
    gt_ids = list(gt_ids)
    if not pred_ids or len(pred_ids) != len(gt_ids):
        raise ValueError("align_labels needs nonempty paired id lists")
    table, p_labels, g_labels = contingency_table(pred_ids, gt_ids)
    n = max(len(p_labels), len(g_labels))
    cost = np.zeros((n, n))
    cost[: len(p_labels), : len(g_labels)] = -table
    cols, _ = solve_assignment(cost)
    mapping = {}
    for i, p in enumerate(p_labels):
        j = cols[i]
        if j < len(g_labels) and table[i, j] > 0:
            mapping[p] = g_labels[j]
    return mapping


def aligned_accuracy(pred_ids, gt_ids, mapping=None):
    if mapping is None:
        mapping = align_labels(pred_ids, gt_ids)
    hits = sum(mapping.get(p) == g for p, g in zip(pred_ids, gt_ids))
    return hits / len(gt_ids)


def mean_class_accuracy(aligned_pred, gt_ids):
    """Mean over ground-truth classes of the per-class accuracy."""
    gt_ids = list(gt_ids)
    if not gt_ids:
        raise ValueError("mean_class_accuracy needs nonempty inputs")
    per_class = defaultdict(lambda: [0, 0])
    for p, g in zip(aligned_pred, gt_ids):
        per_class[g][1] += 1
        if p == g:
            per_class[g][0] += 1
    return float(np.mean([hit / total for hit, total in per_class.values()]))


def average_precision(tp_flags, n_gt):
    """All-point interpolated AP from score-ordered TP flags."""
    if n_gt == 0:
        return None
    if not len(tp_flags):
        return 0.0
    tp = np.cumsum(tp_flags, dtype=np.float64)
    fp = np.cumsum(1 - np.asarray(tp_flags), dtype=np.float64)
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, 1e-12)
    mprec = np.concatenate([[0.0], precision, [0.0]])
    mrec = np.concatenate([[0.0], recall, [1.0]])
    for i in range(len(mprec) - 2, -1, -1):
        mprec[i] = max(mprec[i], mprec[i + 1])
    idx = np.nonzero(mrec[1:] != mrec[:-1])[0] + 1
    return float(((mrec[idx] - mrec[idx - 1]) * mprec[idx]).sum())


def detection_map(preds, gts, iou_thresh=0.5):
    """VOC-style mAP. preds: (frame_key, box, label, score); gts: (frame_key, box, label)."""
    gt_classes = sorted({label for _, _, label in gts})
    if not gt_classes:
        raise ValueError("detection_map needs at least one ground-truth box")
    aps = []
    for cls in gt_classes:
        cls_gt = defaultdict(list)
        for key, box, label in gts:
            if label == cls:
                cls_gt[key].append([box, False])
        n_gt = sum(len(v) for v in cls_gt.values())
        cls_preds = sorted(
            [(score, key, box) for key, box, label, score in preds if label == cls],
            key=lambda t: -t[0],
        )
        flags = []
        for score, key, box in cls_preds:
            best, best_entry = 0.0, None
            for entry in cls_gt.get(key, []):
                if entry[1]:
                    continue
                i = box_iou(box, entry[0])
                if i > best:
                    best, best_entry = i, entry
            if best >= iou_thresh and best_entry is not None:
                best_entry[1] = True
                flags.append(1)
            else:
                flags.append(0)
        aps.append(average_precision(flags, n_gt))
    return float(np.mean(aps))


def match_actors(pred_records, gt_records, iou_thresh=0.5):
    """Greedy per-frame IoU matching between prediction and gt records.

    Returns (pairs, n_unmatched_pred, n_unmatched_gt); pairs are
    (pred_record, gt_record) with IoU >= threshold.
    """
    by_frame_p = defaultdict(list)
    by_frame_g = defaultdict(list)
    for r in pred_records:
        by_frame_p[r.frame_index].append(r)
    for r in gt_records:
        by_frame_g[r.frame_index].append(r)
    pairs = []
    unmatched_pred = 0
    unmatched_gt = 0
    for frame in sorted(set(by_frame_p) | set(by_frame_g)):
        ps = by_frame_p.get(frame, [])
        gs = by_frame_g.get(frame, [])
        cands = []
        for i, p in enumerate(ps):
            for j, g in enumerate(gs):
                i_val = box_iou(p.box, g.box)
                if i_val >= iou_thresh:
                    cands.append((i_val, i, j))
        cands.sort(key=lambda t: (-t[0], t[1], t[2]))
        used_p, used_g = set(), set()
        for _, i, j in cands:
            if i in used_p or j in used_g:
                continue
            used_p.add(i)
            used_g.add(j)
            pairs.append((ps[i], gs[j]))
        unmatched_pred += len(ps) - len(used_p)
        unmatched_gt += len(gs) - len(used_g)
    return pairs, unmatched_pred, unmatched_gt


def membership_accuracy(pred_videos, gt_videos, iou_thresh=0.5):
    """Social-group recognition over IoU-matched actors.

    Communities align per video; unmatched predictions count against the
    denominator (precision-style), missed gt actors do not.
    """
    correct = 0
    denominator = 0
    for preds, gts in zip(pred_videos, gt_videos):
        pairs, unmatched_pred, _ = match_actors(preds, gts, iou_thresh)
        denominator += len(pairs) + unmatched_pred
        if not pairs:
            continue
        p_ids = [p.membership_id for p, _ in pairs]
        g_ids = [g.membership_id for _, g in pairs]
        mapping = align_labels(p_ids, g_ids)
        correct += sum(mapping.get(p) == g for p, g in zip(p_ids, g_ids))
    return correct / denominator if denominator else 0.0


def social_activity_accuracy(pred_videos, gt_videos, iou_thresh=0.5):
    """Joint membership + social-activity correctness per matched actor."""
    all_pairs = []
    per_video_pairs = []
    denominator = 0
    for preds, gts in zip(pred_videos, gt_videos):
        pairs, unmatched_pred, _ = match_actors(preds, gts, iou_thresh)
        denominator += len(pairs) + unmatched_pred
        per_video_pairs.append(pairs)
        all_pairs.extend(pairs)
    if not all_pairs or not denominator:
        return 0.0
    social_map = align_labels(
        [p.social_activity_label for p, _ in all_pairs],
        [g.social_activity_label for _, g in all_pairs],
    )
    correct = 0
    for pairs in per_video_pairs:
        if not pairs:
            continue
        member_map = align_labels(
            [p.membership_id for p, _ in pairs], [g.membership_id for _, g in pairs]
        )
        for p, g in pairs:
            member_ok = member_map.get(p.membership_id) == g.membership_id
            social_ok = social_map.get(p.social_activity_label) == g.social_activity_label
            if member_ok and social_ok:
                correct += 1
    return correct / denominator


def build_tubes(records):
    """Group records into per-actor tubes: frame -> box, majority label, mean score."""
    by_actor = defaultdict(list)
    for r in records:
        by_actor[r.actor_id].append(r)
    tubes = []
    for actor, recs in sorted(by_actor.items()):
        labels = [r.action_label for r in recs]
        vals, counts = np.unique(labels, return_counts=True)
        tubes.append(
            {
                "actor": actor,
                "frames": {r.frame_index: r.box for r in recs},
                "label": int(vals[np.argmax(counts)]),
                "score": float(np.mean([r.score for r in recs])),
            }
        )
    return tubes


def tube_overlap_fraction(pred_tube, gt_tube, spatial_iou=0.5):
    """Fraction of the gt tube's frames covered at the spatial threshold."""
    gt_frames = gt_tube["frames"]
    if not gt_frames:
        return 0.0
    hits = 0
    for frame, gbox in gt_frames.items():
        pbox = pred_tube["frames"].get(frame)
        if pbox is not None and box_iou(pbox, gbox) >= spatial_iou:
            hits += 1
    return hits / len(gt_frames)


def video_map(pred_videos, gt_videos, spatial_iou=0.5, frame_frac=0.5):
    """Tube-level mAP: a prediction matches a gt tube when the per-frame IoU
    holds in at least frame_frac of the gt tube's frames."""
    pred_tubes = []
    gt_tubes = []
    for vid, (preds, gts) in enumerate(zip(pred_videos, gt_videos)):
        for t in build_tubes(preds):
            t["video"] = vid
            pred_tubes.append(t)
        for t in build_tubes(gts):
            t["video"] = vid
            gt_tubes.append(t)
    classes = sorted({t["label"] for t in gt_tubes})
    if not classes:
        raise ValueError("video_map needs at least one ground-truth tube")
    aps = []
    for cls in classes:
        cls_gt = [t for t in gt_tubes if t["label"] == cls]
        matched = [False] * len(cls_gt)
        cls_preds = sorted((t for t in pred_tubes if t["label"] == cls), key=lambda t: -t["score"])
        flags = []
        for pt in cls_preds:
            best, best_j = 0.0, None
            for j, gt in enumerate(cls_gt):
                if matched[j] or gt["video"] != pt["video"]:
                    continue
                frac = tube_overlap_fraction(pt, gt, spatial_iou)
                if frac > best:
                    best, best_j = frac, j
            if best_j is not None and best >= frame_frac:
                matched[best_j] = True
                flags.append(1)
            else:
                flags.append(0)
        aps.append(average_precision(flags, len(cls_gt)))
    return float(np.mean(aps))


# ---------------------------------------------------------------------------
# corpus-level evaluation

def evaluate(pred_videos, gt_videos, iou_thresh=0.5):
    """All five metrics from per-video record lists (same video order)."""
    if len(pred_videos) != len(gt_videos):
        raise ValueError(f"{len(pred_videos)} prediction videos vs {len(gt_videos)} gt videos")

    report = {}

    def majority(values):
        vals, counts = np.unique(list(values), return_counts=True)
        return int(vals[np.argmax(counts)])

    pred_group = [majority([r.group_activity_label for r in v]) if v else -1 for v in pred_videos]
    gt_group = [majority([r.group_activity_label for r in v]) if v else -1 for v in gt_videos]
    group_map = align_labels(pred_group, gt_group)
    report["group_activity_mca"] = mean_class_accuracy(
        [group_map.get(p) for p in pred_group], gt_group
    )
    report["group_activity_accuracy"] = aligned_accuracy(pred_group, gt_group, group_map)

    # corpus-level action alignment over IoU-matched actors
    all_pairs = []
    for preds, gts in zip(pred_videos, gt_videos):
        pairs, _, _ = match_actors(preds, gts, iou_thresh)
        all_pairs.extend(pairs)
    if all_pairs:
        action_map = align_labels(
            [p.action_label for p, _ in all_pairs], [g.action_label for _, g in all_pairs]
        )
    else:
        action_map = {}

    det_preds = []
    det_gts = []
    for vid, (preds, gts) in enumerate(zip(pred_videos, gt_videos)):
        for r in preds:
            det_preds.append(((vid, r.frame_index), r.box, action_map.get(r.action_label, -1), r.score))
        for r in gts:
            det_gts.append(((vid, r.frame_index), r.box, r.action_label))
    report["individual_action_map"] = detection_map(det_preds, det_gts, iou_thresh)

    report["membership_accuracy"] = membership_accuracy(pred_videos, gt_videos, iou_thresh)
    report["social_activity_accuracy"] = social_activity_accuracy(pred_videos, gt_videos, iou_thresh)

    mapped_pred_videos = []
    for preds in pred_videos:
        mapped = []
        for r in preds:
            mapped.append(
                type(r)(
                    frame_index=r.frame_index, actor_id=r.actor_id, box=r.box,
                    action_label=action_map.get(r.action_label, -1),
                    group_activity_label=r.group_activity_label,
                    membership_id=r.membership_id,
                    social_activity_label=r.social_activity_label, score=r.score,
                )
            )
        mapped_pred_videos.append(mapped)
    report["video_map_50"] = video_map(mapped_pred_videos, gt_videos)
    return report


def format_report(report):
    lines = [f"{name} {value:.4f}" for name, value in sorted(report.items())]
    return "\n".join(lines) + "\n"
