"""Block-level change detection with background-calibrated thresholds."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ParameterError, ZeroVarianceError
from .image import GrayImage, Patch
from .matchers import POLARITY, get_metric


@dataclass(frozen=True)
class DetectorConfig:
    metric: str = "abs_rho"
    block_size: int = 13
    threshold: float = 0.8
    threshold_policy: str = "fixed"  # fixed | calibrated
    kappa: float = 3.0

    def __post_init__(self):
        if self.block_size < 3 or self.block_size % 2 == 0:
            raise ParameterError(f"block size must be odd, got {self.block_size}")
        if self.threshold_policy not in ("fixed", "calibrated"):
            raise ParameterError(f"unknown threshold policy {self.threshold_policy!r}")
        if self.kappa <= 0:
            raise ParameterError(f"kappa must be > 0, got {self.kappa}")
        get_metric(self.metric)  # validate the name eagerly

    @property
    def polarity(self) -> str:
        return POLARITY[self.metric]


@dataclass(frozen=True)
class ChangeMask:
    """Per-block decisions on a non-overlapping grid (stride = block size).

    Partial border blocks are recorded as skipped, never as unchanged;
    blocks whose metric was undefined (constant content) are skipped too.
    """

    decisions: np.ndarray  # bool (grid_rows, grid_cols)
    skipped: np.ndarray  # bool, same shape
    scores: np.ndarray  # float, NaN where skipped
    block_size: int

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.decisions.shape


def _block_grid(height: int, width: int, bs: int):
    return -(-height // bs), -(-width // bs)


def _iter_blocks(img_shape, bs: int):
    gr, gc = _block_grid(*img_shape, bs)
    for br in range(gr):
        for bc in range(gc):
            top, left = br * bs, bc * bs
            partial = top + bs > img_shape[0] or left + bs > img_shape[1]
            yield br, bc, top, left, partial


def _block_patch(img: GrayImage, top: int, left: int, bs: int) -> Patch:
    window = img.data[top : top + bs, left : left + bs]
    return Patch(bs, window.reshape(-1), (top + bs // 2, left + bs // 2))


def calibrate_threshold(background_stack, reference: GrayImage, cfg: DetectorConfig) -> float:
    """Indicative threshold from background test statistics: mean + kappa*std
    of the per-block background scores for higher-is-changed metrics (mean -
    kappa*std for lower-is-changed), floored at 1e-9 for the higher case."""
    stack = list(background_stack)
    if not stack:
        raise DegenerateInputError("background stack is empty")
    metric = get_metric(cfg.metric)
    bs = cfg.block_size
    scores = []
    for frame in stack:
        if frame.data.shape != reference.data.shape:
            raise ParameterError("background frame dimensions do not match reference")
        for _, _, top, left, partial in _iter_blocks(reference.data.shape, bs):
            if partial:
                continue
            try:
                scores.append(
                    float(metric(_block_patch(reference, top, left, bs),
                                 _block_patch(frame, top, left, bs)))
                )
            except ZeroVarianceError:
                continue
    if not scores:
        raise DegenerateInputError("every background block was degenerate")
    arr = np.asarray(scores)
    if cfg.polarity == "higher":
        return max(float(arr.mean() + cfg.kappa * arr.std()), 1e-9)
    return float(arr.mean() - cfg.kappa * arr.std())


def detect_changes(
    reference: GrayImage, current: GrayImage, cfg: DetectorConfig, threshold: float
) -> ChangeMask:
    """Flag each full block whose metric crosses the threshold (score >
    threshold for higher-is-changed metrics, score < threshold otherwise)."""
    if reference.data.shape != current.data.shape:
        raise ParameterError(
            f"dimension mismatch: {reference.data.shape} vs {current.data.shape}"
        )
    metric = get_metric(cfg.metric)
    bs = cfg.block_size
    gr, gc = _block_grid(*reference.data.shape, bs)
    decisions = np.zeros((gr, gc), dtype=bool)
    skipped = np.zeros((gr, gc), dtype=bool)
    scores = np.full((gr, gc), np.nan)
    higher = cfg.polarity == "higher"
    for br, bc, top, left, partial in _iter_blocks(reference.data.shape, bs):
        if partial:
            skipped[br, bc] = True
            continue
        try:
            score = float(metric(_block_patch(reference, top, left, bs),
                                 _block_patch(current, top, left, bs)))
        except ZeroVarianceError:
            skipped[br, bc] = True
            continue
        scores[br, bc] = score
        decisions[br, bc] = score > threshold if higher else score < threshold
    return ChangeMask(decisions=decisions, skipped=skipped, scores=scores, block_size=bs)


@dataclass(frozen=True)
class MaskEvaluation:
    precision: float
    recall: float
    f1: float
    false_positive_blocks: tuple[tuple[int, int], ...]
    degenerate: bool


def evaluate_mask(mask: ChangeMask, truth: ChangeMask) -> MaskEvaluation:
    """Precision / recall / F1 over blocks not skipped in either mask.

    0/0 ratios are reported as 1.0 with the degenerate flag set.
    """
    if mask.grid_shape != truth.grid_shape or mask.block_size != truth.block_size:
        raise ParameterError("mask grids do not match")
    use = ~(mask.skipped | truth.skipped)
    pred = mask.decisions & use
    true = truth.decisions & use
    tp = int(np.count_nonzero(pred & true))
    fp = int(np.count_nonzero(pred & ~true))
    fn = int(np.count_nonzero(~pred & true))
    degenerate = False
    if tp + fp == 0:
        precision, degenerate = 1.0, True
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall, degenerate = 1.0, True
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    fps = tuple((int(r), int(c)) for r, c in np.argwhere(pred & ~true))
    return MaskEvaluation(precision, recall, f1, fps, degenerate)


def truth_mask_from_labels(labels: np.ndarray, changed_code: int, block_size: int) -> ChangeMask:
    """Ground-truth mask: a block counts as changed when it contains at least
    one pixel with the given label code. Partial border blocks are skipped."""
    gr, gc = _block_grid(*labels.shape, block_size)
    decisions = np.zeros((gr, gc), dtype=bool)
    skipped = np.zeros((gr, gc), dtype=bool)
    for br, bc, top, left, partial in _iter_blocks(labels.shape, block_size):
        if partial:
            skipped[br, bc] = True
            continue
        decisions[br, bc] = bool(
            np.any(labels[top : top + block_size, left : left + block_size] == changed_code)
        )
    return ChangeMask(
        decisions=decisions,
        skipped=skipped,
        scores=np.full((gr, gc), np.nan),
        block_size=block_size,
    )


def block_majority_labels(labels: np.ndarray, block_size: int) -> np.ndarray:
    """Majority label code per full block (partial border blocks get 0)."""
    gr, gc = _block_grid(*labels.shape, block_size)
    out = np.zeros((gr, gc), dtype=np.uint8)
    for br, bc, top, left, partial in _iter_blocks(labels.shape, block_size):
        if partial:
            continue
        window = labels[top : top + block_size, left : left + block_size]
        codes, freq = np.unique(window, return_counts=True)
        out[br, bc] = codes[np.argmax(freq)]
    return out


def save_mask_image(mask: ChangeMask, path) -> None:
    """Export as P5: changed=255, unchanged=0, skipped=128."""
    img = np.where(mask.skipped, 128, np.where(mask.decisions, 255, 0)).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.tobytes())


def write_mask_csv(mask: ChangeMask, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["block_row", "block_col", "score", "decision"])
        gr, gc = mask.grid_shape
        for br in range(gr):
            for bc in range(gc):
                if mask.skipped[br, bc]:
                    score, decision = "nan", "skipped"
                else:
                    score = f"{mask.scores[br, bc]:.9g}"
                    decision = "changed" if mask.decisions[br, bc] else "unchanged"
                out.writerow([br, bc, score, decision])
