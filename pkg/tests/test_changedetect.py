"""Block change detector: calibration, decisions, truth masks, evaluation."""

import csv

import numpy as np
import pytest

from patchchar.changedetect import (
    ChangeMask,
    DetectorConfig,
    block_majority_labels,
    calibrate_threshold,
    detect_changes,
    evaluate_mask,
    save_mask_image,
    truth_mask_from_labels,
    write_mask_csv,
)
from patchchar.errors import DegenerateInputError, ParameterError
from patchchar.image import GrayImage, load_image
from patchchar.perturb import add_gaussian, gain_offset


@pytest.fixture
def textured():
    rng = np.random.default_rng(0)
    return GrayImage(rng.uniform(0.1, 0.9, (39, 39)))  # exactly 3x3 blocks of 13


class TestDetectorConfig:
    def test_defaults(self):
        cfg = DetectorConfig()
        assert cfg.metric == "abs_rho"
        assert cfg.block_size == 13
        assert cfg.threshold == 0.8
        assert cfg.polarity == "lower"

    def test_validation(self):
        with pytest.raises(ParameterError):
            DetectorConfig(block_size=12)
        with pytest.raises(ParameterError):
            DetectorConfig(threshold_policy="adaptive")
        with pytest.raises(ParameterError):
            DetectorConfig(kappa=0.0)
        with pytest.raises(ParameterError):
            DetectorConfig(metric="unknown")


class TestCalibrateThreshold:
    def test_identical_stack_floors_at_tiny_positive(self, textured):
        cfg = DetectorConfig(metric="ssd", kappa=3.0)
        thr = calibrate_threshold([textured, textured], textured, cfg)
        assert thr == 1e-9  # zero mean and spread floor to the minimum

    def test_lower_polarity_uses_mean_minus_kappa_std(self, textured):
        frames = [add_gaussian(textured, 0.01, seed) for seed in range(4)]
        cfg = DetectorConfig(metric="abs_rho", kappa=2.0)
        thr = calibrate_threshold(frames, textured, cfg)
        # recompute the block scores directly
        from patchchar.matchers import abs_spearman
        from patchchar.image import extract_patch

        scores = []
        for f in frames:
            for top in (0, 13, 26):
                for left in (0, 13, 26):
                    c = (top + 6, left + 6)
                    scores.append(abs_spearman(extract_patch(textured, c, 13),
                                               extract_patch(f, c, 13)))
        arr = np.asarray(scores)
        assert thr == pytest.approx(arr.mean() - 2.0 * arr.std(), abs=1e-12)

    def test_empty_stack_rejected(self, textured):
        with pytest.raises(DegenerateInputError):
            calibrate_threshold([], textured, DetectorConfig())

    def test_dimension_mismatch(self, textured):
        other = GrayImage(np.zeros((13, 13)))
        with pytest.raises(ParameterError):
            calibrate_threshold([other], textured, DetectorConfig())

    def test_all_degenerate_blocks_rejected(self):
        flat = GrayImage(np.full((13, 13), 0.5))
        with pytest.raises(DegenerateInputError):
            calibrate_threshold([flat], flat, DetectorConfig())


class TestDetectChanges:
    def test_identical_frames_flag_nothing(self, textured):
        mask = detect_changes(textured, textured, DetectorConfig(), 0.8)
        assert not mask.decisions.any()
        assert not mask.skipped.any()
        assert np.all(mask.scores == 1.0)

    def test_gain_offset_invisible_to_ordinal_detector(self, textured):
        current = gain_offset(textured, 1.1, 0.02)  # clamps a few pixels only
        mask = detect_changes(textured, current, DetectorConfig(metric="dct_ro"), 0.1)
        assert not mask.decisions.any()

    def test_single_pasted_block_flagged(self, textured):
        data = textured.data.copy()
        rng = np.random.default_rng(99)
        data[13:26, 13:26] = rng.uniform(0.1, 0.9, (13, 13))
        current = GrayImage(data)
        cfg = DetectorConfig(metric="ssd")
        thr = calibrate_threshold([add_gaussian(textured, 0.005, s) for s in range(8)],
                                  textured, cfg)
        mask = detect_changes(textured, current, cfg, thr)
        assert mask.decisions[1, 1]
        assert np.count_nonzero(mask.decisions) == 1

    def test_partial_border_blocks_skipped(self):
        img = GrayImage(np.random.default_rng(1).random((30, 43)))
        mask = detect_changes(img, img, DetectorConfig(), 0.8)
        assert mask.grid_shape == (3, 4)
        assert mask.skipped[2, :].all()  # rows 26..29 are a partial stripe
        assert mask.skipped[:, 3].all()
        assert not mask.skipped[:2, :3].any()
        assert np.isnan(mask.scores[2, 0])

    def test_constant_block_skipped_not_unchanged(self, textured):
        data = textured.data.copy()
        data[0:13, 0:13] = 0.5
        flat = GrayImage(data)
        mask = detect_changes(flat, flat, DetectorConfig(), 0.8)
        assert mask.skipped[0, 0]
        assert not mask.decisions[0, 0]

    def test_threshold_monotonicity(self, textured):
        current = add_gaussian(textured, 0.15, 3)
        cfg = DetectorConfig(metric="ssd")
        flags = [
            np.count_nonzero(detect_changes(textured, current, cfg, t).decisions)
            for t in (0.0, 0.1, 0.5, 2.0)
        ]
        assert flags == sorted(flags, reverse=True)

    def test_dimension_mismatch(self, textured):
        with pytest.raises(ParameterError):
            detect_changes(textured, GrayImage(np.zeros((13, 13))), DetectorConfig(), 0.8)


class TestTruthAndLabels:
    def test_truth_mask_any_pixel_counts(self):
        labels = np.zeros((26, 26), dtype=np.uint8)
        labels[14, 20] = 80  # one changed pixel in block (1, 1)
        truth = truth_mask_from_labels(labels, 80, 13)
        assert truth.decisions[1, 1]
        assert np.count_nonzero(truth.decisions) == 1

    def test_truth_mask_partial_blocks_skipped(self):
        labels = np.zeros((30, 26), dtype=np.uint8)
        truth = truth_mask_from_labels(labels, 80, 13)
        assert truth.skipped[2, :].all()

    def test_block_majority_labels(self):
        labels = np.full((13, 26), 20, dtype=np.uint8)
        labels[:, 13:] = 60
        labels[0, 13] = 20  # minority pixel does not win
        maj = block_majority_labels(labels, 13)
        assert maj[0, 0] == 20 and maj[0, 1] == 60

    def test_block_majority_partial_zero(self):
        labels = np.full((15, 13), 20, dtype=np.uint8)
        maj = block_majority_labels(labels, 13)
        assert maj[1, 0] == 0


class TestEvaluateMask:
    def make_mask(self, decisions, skipped=None, bs=13):
        d = np.asarray(decisions, dtype=bool)
        s = np.zeros_like(d) if skipped is None else np.asarray(skipped, dtype=bool)
        return ChangeMask(decisions=d, skipped=s, scores=np.full(d.shape, np.nan), block_size=bs)

    def test_perfect_match(self):
        m = self.make_mask([[True, False], [False, True]])
        ev = evaluate_mask(m, m)
        assert (ev.precision, ev.recall, ev.f1) == (1.0, 1.0, 1.0)
        assert ev.false_positive_blocks == ()
        assert not ev.degenerate

    def test_false_positive_reported_with_position(self):
        pred = self.make_mask([[True, True], [False, False]])
        truth = self.make_mask([[True, False], [False, False]])
        ev = evaluate_mask(pred, truth)
        assert ev.precision == 0.5 and ev.recall == 1.0
        assert ev.false_positive_blocks == ((0, 1),)

    def test_all_negative_is_degenerate_perfect(self):
        empty = self.make_mask([[False, False]])
        ev = evaluate_mask(empty, empty)
        assert ev.precision == 1.0 and ev.recall == 1.0 and ev.degenerate

    def test_skipped_blocks_excluded(self):
        pred = self.make_mask([[True, False]], skipped=[[True, False]])
        truth = self.make_mask([[False, False]])
        ev = evaluate_mask(pred, truth)
        assert ev.false_positive_blocks == ()  # the disagreement was skipped

    def test_grid_mismatch(self):
        with pytest.raises(ParameterError):
            evaluate_mask(self.make_mask([[True]]), self.make_mask([[True, False]]))


class TestMaskExport:
    def test_mask_image_codes(self, tmp_path):
        mask = ChangeMask(
            decisions=np.array([[True, False]]),
            skipped=np.array([[False, True]]),
            scores=np.array([[0.1, np.nan]]),
            block_size=13,
        )
        path = tmp_path / "mask.pgm"
        save_mask_image(mask, path)
        img = load_image(path)
        assert np.array_equal(img.data * 255, [[255, 128]])

    def test_mask_csv_rows(self, tmp_path):
        mask = ChangeMask(
            decisions=np.array([[True, False]]),
            skipped=np.array([[False, True]]),
            scores=np.array([[0.25, np.nan]]),
            block_size=13,
        )
        path = tmp_path / "mask.csv"
        write_mask_csv(mask, path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["block_row", "block_col", "score", "decision"]
        assert rows[1] == ["0", "0", "0.25", "changed"]
        assert rows[2] == ["0", "1", "nan", "skipped"]
