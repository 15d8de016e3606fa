"""Accuracy rewards for both tasks and total-reward composition.

The grounding accuracy builds three binary score matrices (IoU, box L1,
point L1 with an in-box condition), aggregates them with configurable
weights, solves a maximum-total one-to-one assignment, and normalizes the
matched score sum by max(N_pred, N_gt).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import COORD_SCALE
from .responses import (
    AksOption,
    CueList,
    FormatScore,
    ParsedResponse,
    Task,
    cues_from_payload,
    format_reward,
    parse,
)

# Above this dimension the exact assignment DP falls back to an LSA-based
# refinement (see hungarian_max).
_DP_DIM_LIMIT = 12


@dataclass(frozen=True)
class RewardConfig:
    """Reward thresholds and weights; defaults reproduce the task caps 3.0/6.0."""

    eta: float = 0.5          # IoU acceptance threshold (strict >)
    gamma_box: float = 10.0   # box L1 threshold in pixels (strict <)
    gamma_pt: float = 30.0    # point L1 threshold in pixels (strict <)
    alpha_iou: float = 1.0
    alpha_boxl1: float = 1.0
    alpha_ptl1: float = 1.0
    lambda_f_aks: float = 1.0
    lambda_a_aks: float = 2.0
    lambda_f_ktg: float = 1.0
    lambda_a_ktg: float = 1.0
    scale: float = COORD_SCALE

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must be in (0, 1), got {self.eta}")
        if self.gamma_box <= 0 or self.gamma_pt <= 0:
            raise ValueError("L1 thresholds must be positive")
        for name in ("alpha_iou", "alpha_boxl1", "alpha_ptl1",
                     "lambda_f_aks", "lambda_a_aks", "lambda_f_ktg", "lambda_a_ktg"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def alpha_sum(self) -> float:
        return self.alpha_iou + self.alpha_boxl1 + self.alpha_ptl1

    def weights(self, task: Task) -> tuple[float, float]:
        if task is Task.AKS:
            return self.lambda_f_aks, self.lambda_a_aks
        return self.lambda_f_ktg, self.lambda_a_ktg

    def with_overrides(self, overrides: Mapping[str, float]) -> "RewardConfig":
        return replace(self, **dict(overrides))


@dataclass(frozen=True)
class ScoreMatrix:
    """Aggregated pairwise scores plus the binary component matrices."""

    entries: np.ndarray
    iou_hits: np.ndarray
    box_l1_hits: np.ndarray
    point_l1_hits: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True)
class Matching:
    """A one-to-one assignment of prediction indices to ground-truth indices."""

    pairs: tuple[tuple[int, int], ...]
    total: float


@dataclass(frozen=True)
class RewardBreakdown:
    format: FormatScore
    accuracy: float
    total: float
    matching: Matching | None = None


def aks_accuracy(pred: AksOption | None, gt: AksOption) -> float:
    """1.0 for an exact option match, 0.0 otherwise (including malformed)."""
    if not isinstance(gt, AksOption):
        raise ValueError(f"ground-truth option must be AksOption, got {gt!r}")
    return 1.0 if isinstance(pred, AksOption) and pred is gt else 0.0


def score_matrix(pred: CueList, gt: CueList, cfg: RewardConfig | None = None) -> ScoreMatrix:
    """Pairwise binary component scores aggregated with the alpha weights."""
    cfg = cfg or RewardConfig()
    if not pred.cues or not gt.cues:
        raise ValueError("score_matrix requires non-empty cue lists")
    if len(pred.cues) * len(gt.cues) <= 64:  # scalar path beats numpy overhead
        return _score_matrix_small(pred, gt, cfg)

    pb = np.array([c.box.as_tuple() for c in pred.cues], dtype=float)
    gb = np.array([c.box.as_tuple() for c in gt.cues], dtype=float)
    pp = np.array([c.point.as_tuple() for c in pred.cues], dtype=float)
    gp = np.array([c.point.as_tuple() for c in gt.cues], dtype=float)

    ix = np.minimum(pb[:, None, 2], gb[None, :, 2]) - np.maximum(pb[:, None, 0], gb[None, :, 0])
    iy = np.minimum(pb[:, None, 3], gb[None, :, 3]) - np.maximum(pb[:, None, 1], gb[None, :, 1])
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    area_p = (pb[:, 2] - pb[:, 0]) * (pb[:, 3] - pb[:, 1])
    area_g = (gb[:, 2] - gb[:, 0]) * (gb[:, 3] - gb[:, 1])
    union = area_p[:, None] + area_g[None, :] - inter
    iou = np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)
    iou_hits = (iou > cfg.eta).astype(np.uint8)

    box_dist = np.abs(pb[:, None, :] - gb[None, :, :]).mean(axis=2)
    box_hits = (box_dist < cfg.gamma_box).astype(np.uint8)

    pt_dist = np.abs(pp[:, None, :] - gp[None, :, :]).mean(axis=2)
    # in-box is tested against the ground-truth box of the candidate pair
    in_gt_box = (
        (gb[None, :, 0] <= pp[:, None, 0])
        & (pp[:, None, 0] <= gb[None, :, 2])
        & (gb[None, :, 1] <= pp[:, None, 1])
        & (pp[:, None, 1] <= gb[None, :, 3])
    )
    pt_hits = ((pt_dist < cfg.gamma_pt) & in_gt_box).astype(np.uint8)

    entries = (
        cfg.alpha_iou * iou_hits + cfg.alpha_boxl1 * box_hits + cfg.alpha_ptl1 * pt_hits
    ).astype(float)
    return ScoreMatrix(entries, iou_hits, box_hits, pt_hits)


def _score_matrix_small(pred: CueList, gt: CueList, cfg: RewardConfig) -> ScoreMatrix:
    eta, gbox, gpt = cfg.eta, cfg.gamma_box, cfg.gamma_pt
    a_iou, a_box, a_pt = cfg.alpha_iou, cfg.alpha_boxl1, cfg.alpha_ptl1
    entries = []
    iou_hits = []
    box_hits = []
    pt_hits = []
    gts = [(c.box.x1, c.box.y1, c.box.x2, c.box.y2, c.point.x, c.point.y) for c in gt.cues]
    for c in pred.cues:
        px1, py1, px2, py2 = c.box.x1, c.box.y1, c.box.x2, c.box.y2
        ppx, ppy = c.point.x, c.point.y
        p_area = (px2 - px1) * (py2 - py1)
        e_row = []
        i_row = []
        b_row = []
        t_row = []
        for gx1, gy1, gx2, gy2, gpx, gpy in gts:
            iw = min(px2, gx2) - max(px1, gx1)
            ih = min(py2, gy2) - max(py1, gy1)
            inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
            union = p_area + (gx2 - gx1) * (gy2 - gy1) - inter
            iou_hit = 1 if (union > 0.0 and inter / union > eta) else 0
            box_hit = 1 if (abs(px1 - gx1) + abs(py1 - gy1) + abs(px2 - gx2) + abs(py2 - gy2)) / 4.0 < gbox else 0
            pt_hit = 1 if (
                (abs(ppx - gpx) + abs(ppy - gpy)) / 2.0 < gpt
                and gx1 <= ppx <= gx2
                and gy1 <= ppy <= gy2
            ) else 0
            e_row.append(a_iou * iou_hit + a_box * box_hit + a_pt * pt_hit)
            i_row.append(iou_hit)
            b_row.append(box_hit)
            t_row.append(pt_hit)
        entries.append(e_row)
        iou_hits.append(i_row)
        box_hits.append(b_row)
        pt_hits.append(t_row)
    return ScoreMatrix(
        np.asarray(entries, dtype=float),
        np.asarray(iou_hits, dtype=np.uint8),
        np.asarray(box_hits, dtype=np.uint8),
        np.asarray(pt_hits, dtype=np.uint8),
    )


def _dp_assignment(grid: list[list[float]], n_pred: int, n_gt: int) -> Matching:
    """Exact maximum-total assignment with lexicographically smallest pairs.

    Lexicographic preference is carried in a big-int side channel: pair
    (i, j) contributes 2**(R-1-rank) with rank = i*n_gt + j, so among
    equal-total assignments the largest preference is exactly the smallest
    sorted pair sequence.
    """
    k = min(n_pred, n_gt)
    total_ranks = n_pred * n_gt
    weight = [1 << (total_ranks - 1 - r) for r in range(total_ranks)]

    dp: dict[int, tuple[float, int]] = {0: (0.0, 0)}
    parents: list[dict[int, tuple[int, int | None]]] = []
    for i in range(n_pred):
        row = grid[i]
        base = i * n_gt
        ndp: dict[int, tuple[float, int]] = {}
        npar: dict[int, tuple[int, int | None]] = {}
        spare_preds = n_pred - i - 1
        for mask, state in dp.items():
            if spare_preds >= k - mask.bit_count():  # prediction i may stay unmatched
                cur = ndp.get(mask)
                if cur is None or state > cur:
                    ndp[mask] = state
                    npar[mask] = (mask, None)
            tot, pref = state
            for j in range(n_gt):
                bit = 1 << j
                if mask & bit:
                    continue
                cand = (tot + row[j], pref + weight[base + j])
                nm = mask | bit
                cur = ndp.get(nm)
                if cur is None or cand > cur:
                    ndp[nm] = cand
                    npar[nm] = (mask, j)
        dp = ndp
        parents.append(npar)

    best_mask = max(dp, key=lambda m: dp[m])
    pairs: list[tuple[int, int]] = []
    mask = best_mask
    for i in range(n_pred - 1, -1, -1):
        mask, j = parents[i][mask]
        if j is not None:
            pairs.append((i, j))
    pairs.reverse()
    return Matching(tuple(pairs), float(dp[best_mask][0]))


def _lsa_total(S: np.ndarray) -> float:
    if S.shape[0] == 0 or S.shape[1] == 0:
        return 0.0
    rows, cols = linear_sum_assignment(S, maximize=True)
    return float(S[rows, cols].sum())


def _refined_assignment(S: np.ndarray) -> Matching:
    """Large-matrix fallback: LSA optimum refined pair-by-pair toward the
    lexicographically smallest assignment (float-tolerant tie detection)."""
    n_pred, n_gt = S.shape
    best = _lsa_total(S)
    tol = 1e-9 * max(1.0, abs(best))
    pairs: list[tuple[int, int]] = []
    avail = list(range(n_gt))
    fixed = 0.0
    for i in range(n_pred):
        rest = S[i + 1 :, :]
        chosen = None
        for j in avail:
            rem = [g for g in avail if g != j]
            if abs(fixed + S[i, j] + _lsa_total(rest[:, rem]) - best) <= tol:
                chosen = j
                break
        if chosen is None:
            continue
        pairs.append((i, chosen))
        avail.remove(chosen)
        fixed += float(S[i, chosen])
    return Matching(tuple(pairs), float(sum(S[i, j] for i, j in pairs)))


def hungarian_max(S: ScoreMatrix | np.ndarray) -> Matching:
    """Maximum-total one-to-one assignment over an N_pred x N_gt score grid.

    Exactly min(N_pred, N_gt) pairs are returned; among equal-total
    assignments the lexicographically smallest pair set wins.
    """
    entries = S.entries if isinstance(S, ScoreMatrix) else np.asarray(S, dtype=float)
    if entries.ndim != 2 or entries.shape[0] < 1 or entries.shape[1] < 1:
        raise ValueError(f"score matrix must be 2-D and non-empty, got shape {entries.shape}")
    n_pred, n_gt = entries.shape
    if not entries.any():  # common all-miss case: diagonal prefix is optimal
        k = min(n_pred, n_gt)
        return Matching(tuple((i, i) for i in range(k)), 0.0)
    if max(n_pred, n_gt) <= _DP_DIM_LIMIT:
        return _dp_assignment(entries.tolist(), n_pred, n_gt)
    return _refined_assignment(entries)


def ktg_accuracy(
    pred: CueList | None, gt: CueList, cfg: RewardConfig | None = None
) -> tuple[float, Matching | None]:
    """Matched score sum divided by max(N_pred, N_gt); 0.0 for malformed preds."""
    cfg = cfg or RewardConfig()
    if not isinstance(gt, CueList) or not gt.cues:
        raise ValueError("ground truth must be a non-empty cue list")
    if not isinstance(pred, CueList) or not pred.cues:
        return 0.0, None
    matching = hungarian_max(score_matrix(pred, gt, cfg))
    return matching.total / max(len(pred.cues), len(gt.cues)), matching


def total_reward(
    format_score: FormatScore,
    accuracy: float,
    cfg: RewardConfig | None = None,
    task: Task = Task.AKS,
    matching: Matching | None = None,
) -> RewardBreakdown:
    """Compose the task reward: lambda_f * R_f + lambda_a * R_a."""
    cfg = cfg or RewardConfig()
    lf, la = cfg.weights(task)
    return RewardBreakdown(
        format=format_score,
        accuracy=accuracy,
        total=lf * format_score.score + la * accuracy,
        matching=matching,
    )


def score_response(
    raw: str, gt: AksOption | CueList, task: Task, cfg: RewardConfig | None = None
) -> tuple[RewardBreakdown, ParsedResponse]:
    """Parse one raw response and compute its full reward breakdown."""
    cfg = cfg or RewardConfig()
    resp = parse(raw, task)
    fs = format_reward(resp, task)
    if task is Task.AKS:
        payload = resp.payload if isinstance(resp.payload, AksOption) else None
        accuracy, matching = aks_accuracy(payload, gt), None
    else:
        payload = resp.payload if isinstance(resp.payload, CueList) else None
        accuracy, matching = ktg_accuracy(payload, gt, cfg)
    return total_reward(fs, accuracy, cfg, task, matching), resp


def _gt_from_record(task: Task, gt_payload) -> AksOption | CueList:
    if not isinstance(gt_payload, Mapping):
        raise ValueError("ground truth must be an object")
    if task is Task.AKS:
        option = gt_payload.get("option")
        if option not in ("A", "B"):
            raise ValueError(f"ground-truth option must be 'A' or 'B', got {option!r}")
        return AksOption(option)
    return cues_from_payload(gt_payload.get("cues"))


def breakdown_to_json(record_id, task: Task | None, bd: RewardBreakdown | None,
                      diagnostics: Sequence[str]) -> dict:
    """Wire form of one reward result (sorted-key JSONL row downstream)."""
    matching = None
    if bd is not None and bd.matching is not None:
        matching = {
            "pairs": [[int(i), int(j)] for i, j in bd.matching.pairs],
            "total": bd.matching.total,
        }
    return {
        "id": record_id,
        "task": task.value if task is not None else None,
        "format": bd.format.score if bd is not None else 0.0,
        "format_max": bd.format.max_score if bd is not None else None,
        "accuracy": bd.accuracy if bd is not None else 0.0,
        "total": bd.total if bd is not None else 0.0,
        "matching": matching,
        "diagnostics": list(diagnostics),
    }


def score_record(record: Mapping, cfg: RewardConfig, task: Task | None = None) -> dict:
    """Score one joined record {id, task?, response, gt}; never raises.

    Record-level problems (missing fields, invalid ground truth) yield a
    zero-reward row whose diagnostics name the offending field.
    """
    record_id = record.get("id")
    rec_task = task
    try:
        if "task" in record and record["task"] is not None:
            rec_task = Task.from_value(record["task"])
            if task is not None and rec_task is not task:
                raise ValueError(f"record task {rec_task.value!r} conflicts with --task {task.value!r}")
        if rec_task is None:
            raise ValueError("record is missing a task and no default was given")
        response = record.get("response")
        if not isinstance(response, str):
            raise ValueError("record is missing a string 'response' field")
        gt = _gt_from_record(rec_task, record.get("gt"))
    except ValueError as exc:
        return breakdown_to_json(record_id, rec_task, None, [f"record_invalid: {exc}"])
    bd, resp = score_response(response, gt, rec_task, cfg)
    return breakdown_to_json(record_id, rec_task, bd, resp.diagnostics)


def score_batch(
    records: Iterable[Mapping],
    cfg: RewardConfig | None = None,
    task: Task | None = None,
    jobs: int = 1,
) -> list[dict]:
    """Score a stream of joined records, preserving order.

    Malformed records become zero-reward rows with diagnostics; the batch is
    never aborted by a single record. With jobs > 1 the records are fanned
    out across a process pool and results are restored to input order.
    """
    cfg = cfg or RewardConfig()
    records = list(records)
    if jobs > 1 and len(records) >= 4 * jobs:
        import functools
        import multiprocessing

        worker = functools.partial(score_record, cfg=cfg, task=task)
        with multiprocessing.Pool(jobs) as pool:
            return pool.map(worker, records, chunksize=max(1, len(records) // (4 * jobs)))
    return [score_record(r, cfg, task) for r in records]
