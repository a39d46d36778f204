"""CLEAR-MOT and HOTA over labeled 3D box sequences, with DIoU as the
localisation similarity.

Sequences are lists of ``(frame, [(object_id, Box3D), ...])``; ground truth
and prediction must cover the same frames.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import as_box_array, diou3d_matrix, diou3d_pairs
from .validation import check_labeled_frames

HOTA_THRESHOLDS = np.round(np.arange(0.05, 0.96, 0.05), 2)
_EPS = np.finfo(float).eps
_INFEASIBLE = -1e6


@dataclass
class MetricsReport:
    MOTA: float = 0.0
    MOTP: float = 0.0
    HOTA: float = 0.0
    DetA: float = 0.0
    AssA: float = 0.0
    IDS: int = 0
    FRAG: int = 0
    FP: int = 0
    FN: int = 0
    GT: int = 0
    per_threshold: dict = field(default_factory=dict)

    def to_dict(self, per_threshold: bool = False) -> dict:
        d = dataclasses.asdict(self)
        if not per_threshold:
            d.pop("per_threshold")
        return d

    def to_text(self) -> str:
        rows = []
        for k, v in self.to_dict().items():
            rows.append(f"{k:<6} {v:.6f}" if isinstance(v, float) else f"{k:<6} {v}")
        return "\n".join(rows) + "\n"


def _align(gt, pred):
    gt = check_labeled_frames(gt, "gt")
    pred = check_labeled_frames(pred, "pred")
    if [f for f, _ in gt] != [f for f, _ in pred]:
        raise ValueError("gt and pred cover different frame ranges")
    return gt, pred


def clear_mot(gt, pred, match_threshold: float = 0.25):
    """Returns ``(MOTA, MOTP, IDS, FRAG, FP, FN)``.

    Pairs matched in the previous frame are kept while their similarity stays
    at or above ``match_threshold``; the rest are matched by Hungarian
    assignment with maximum cardinality first, then maximum total DIoU.
    """
    rep = clear_mot_report(gt, pred, match_threshold)
    return rep.MOTA, rep.MOTP, rep.IDS, rep.FRAG, rep.FP, rep.FN


def _similarities(gt, pred) -> list:
    """Per frame ``(gt ids, pred ids, DIoU matrix)`` with ids ascending; all
    frames' pairs are scored in one vectorised pass."""
    gt, pred = _align(gt, pred)
    meta, rows_a, rows_b = [], [], []
    for (_, g_objs), (_, p_objs) in zip(gt, pred):
        g_objs = sorted(g_objs, key=lambda o: o[0])
        p_objs = sorted(p_objs, key=lambda o: o[0])
        ga, pa = as_box_array([b for _, b in g_objs]), as_box_array([b for _, b in p_objs])
        rows_a.append(np.repeat(ga, len(pa), axis=0))
        rows_b.append(np.tile(pa, (len(ga), 1)))
        meta.append((np.array([i for i, _ in g_objs], dtype=np.int64),
                     np.array([i for i, _ in p_objs], dtype=np.int64)))
    flat = diou3d_pairs(np.concatenate(rows_a) if rows_a else np.zeros((0, 7)),
                        np.concatenate(rows_b) if rows_b else np.zeros((0, 7)))
    out, start = [], 0
    for g_ids, p_ids in meta:
        n = len(g_ids) * len(p_ids)
        out.append((g_ids, p_ids, flat[start:start + n].reshape(len(g_ids), len(p_ids))))
        start += n
    return out


def clear_mot_report(gt, pred, match_threshold: float = 0.25) -> MetricsReport:
    return _clear_mot(_similarities(gt, pred), match_threshold)


def _clear_mot(frames, match_threshold) -> MetricsReport:
    prev_pairs: dict[int, int] = {}
    last_match: dict[int, int] = {}
    interrupted: dict[int, bool] = {}
    ids = frag = fp = fn = n_gt = 0
    sim_sum, n_match = 0.0, 0
    for g_ids, p_ids, sim in frames:
        n_gt += len(g_ids)
        matches: dict[int, int] = {}
        col_of = {int(p): j for j, p in enumerate(p_ids)}
        used_rows, used_cols = set(), set()
        for r, gid in enumerate(g_ids):
            pid = prev_pairs.get(int(gid))
            if pid is not None and pid in col_of and sim[r, col_of[pid]] >= match_threshold:
                matches[r] = col_of[pid]
                used_rows.add(r)
                used_cols.add(col_of[pid])
        rows = [r for r in range(len(g_ids)) if r not in used_rows]
        cols = [c for c in range(len(p_ids)) if c not in used_cols]
        if rows and cols:
            sub = sim[np.ix_(rows, cols)]
            score = np.where(sub >= match_threshold, sub, _INFEASIBLE)
            rr, cc = linear_sum_assignment(score, maximize=True)
            for a, b in zip(rr, cc):
                if sub[a, b] >= match_threshold:
                    matches[rows[a]] = cols[b]

        pairs = {}
        for r, c in matches.items():
            gid, pid = int(g_ids[r]), int(p_ids[c])
            if gid in last_match and last_match[gid] != pid:
                ids += 1
            last_match[gid] = pid
            pairs[gid] = pid
            sim_sum += sim[r, c]
            n_match += 1
        for r, gid in enumerate(g_ids):
            gid = int(gid)
            if gid in pairs:
                if interrupted.get(gid):
                    frag += 1
                interrupted[gid] = False
            elif gid in last_match:
                interrupted[gid] = True
        fp += len(p_ids) - len(matches)
        fn += len(g_ids) - len(matches)
        prev_pairs = pairs

    mota = 1.0 - (fn + fp + ids) / n_gt if n_gt else (1.0 if fp == 0 else float("-inf"))
    motp = sim_sum / n_match if n_match else 0.0
    return MetricsReport(MOTA=mota, MOTP=motp, IDS=ids, FRAG=frag, FP=fp, FN=fn, GT=n_gt)


def hota(gt, pred, thresholds=HOTA_THRESHOLDS):
    """Returns ``(HOTA, DetA, AssA)`` averaged over localisation thresholds."""
    rep = hota_report(gt, pred, thresholds)
    return rep.HOTA, rep.DetA, rep.AssA


def hota_report(gt, pred, thresholds=HOTA_THRESHOLDS) -> MetricsReport:
    return _hota(_similarities(gt, pred), thresholds)


def _hota(sims, thresholds) -> MetricsReport:
    thresholds = np.asarray(thresholds, dtype=float)
    gt_index = {i: n for n, i in enumerate(sorted({int(i) for g, _, _ in sims for i in g}))}
    pr_index = {i: n for n, i in enumerate(sorted({int(i) for _, p, _ in sims for i in p}))}
    n_g, n_p = len(gt_index), len(pr_index)

    frames = []
    potential = np.zeros((n_g, n_p))
    gt_count = np.zeros(n_g)
    pr_count = np.zeros(n_p)
    for g_ids, p_ids, sim in sims:
        gi = np.array([gt_index[int(i)] for i in g_ids], dtype=np.int64)
        pi = np.array([pr_index[int(i)] for i in p_ids], dtype=np.int64)
        frames.append((gi, pi, sim))
        gt_count[gi] += 1
        pr_count[pi] += 1
        if len(gi) and len(pi):
            denom = sim.sum(axis=0)[None, :] + sim.sum(axis=1)[:, None] - sim
            sim_iou = np.where(denom > _EPS, sim / np.maximum(denom, _EPS), 0.0)
            potential[np.ix_(gi, pi)] += sim_iou
    global_align = potential / np.maximum(
        1.0, gt_count[:, None] + pr_count[None, :] - potential)

    n_a = len(thresholds)
    tp, fn, fp = np.zeros(n_a), np.zeros(n_a), np.zeros(n_a)
    match_counts = np.zeros((n_a, n_g, n_p))
    for gi, pi, sim in frames:
        if len(gi) == 0 or len(pi) == 0:
            fn += len(gi)
            fp += len(pi)
            continue
        score = global_align[np.ix_(gi, pi)] * sim
        rows, cols = linear_sum_assignment(score, maximize=True)
        ok = sim[rows, cols][None, :] >= thresholds[:, None] - _EPS
        n_ok = ok.sum(axis=1)
        tp += n_ok
        fn += len(gi) - n_ok
        fp += len(pi) - n_ok
        a_idx, m_idx = np.nonzero(ok)
        np.add.at(match_counts, (a_idx, gi[rows[m_idx]], pi[cols[m_idx]]), 1)

    det_a, ass_a = np.ones(n_a), np.ones(n_a)
    for a in range(n_a):
        total = tp[a] + fn[a] + fp[a]
        if total == 0:
            continue
        det_a[a] = tp[a] / total
        mc = match_counts[a]
        ass_pair = mc / np.maximum(1.0, gt_count[:, None] + pr_count[None, :] - mc)
        ass_a[a] = float((mc * ass_pair).sum() / max(1.0, tp[a]))
    hota_a = np.sqrt(det_a * ass_a)
    per = {"thresholds": thresholds.tolist(), "HOTA": hota_a.tolist(),
           "DetA": det_a.tolist(), "AssA": ass_a.tolist()}
    return MetricsReport(HOTA=float(hota_a.mean()), DetA=float(det_a.mean()),
                         AssA=float(ass_a.mean()), per_threshold=per)


def evaluate(gt, pred, match_threshold: float = 0.25) -> MetricsReport:
    """Full report: CLEAR-MOT counts plus HOTA sub-scores."""
    sims = _similarities(gt, pred)
    rep = _clear_mot(sims, match_threshold)
    h = _hota(sims, HOTA_THRESHOLDS)
    rep.HOTA, rep.DetA, rep.AssA, rep.per_threshold = h.HOTA, h.DetA, h.AssA, h.per_threshold
    return rep
