"""End-to-end command-line interface behavior (run in-process)."""

import csv

import numpy as np
import pytest

from patchchar.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, main
from patchchar.image import load_image


SMALL_SWEEP = """
metrics = ["abs_rho"]
[sensor]
enabled = false
[family]
name = "daylight"
levels = [0.5, 1.5]
[sweep]
sizes = [5, 9]
samples_per_context = 10
"""

NO_OCCLUDER_NO_SENSOR = """
[scene]
width = 64
height = 64
[[scene.regions]]
kind = "noise"
rect = [0, 0, 64, 64]
params = { lo = 0.1, hi = 0.5 }
[sensor]
enabled = false
[family]
name = "identity"
levels = [0.0]
"""


def run(*argv):
    return main(list(argv))


def cfg_file(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestGlobalBehavior:
    def test_no_command_prints_help_and_fails(self, capsys):
        assert run() == EXIT_CONFIG
        assert "generate" in capsys.readouterr().out

    def test_dump_defaults_round_trip(self, tmp_path):
        path = tmp_path / "defaults.toml"
        assert run("--dump-defaults", str(path)) == EXIT_OK
        assert "[detector]" in path.read_text()

    def test_missing_out_dir_is_io_error(self, tmp_path):
        out = tmp_path / "does-not-exist"
        assert run("--out", str(out), "generate") == EXIT_IO

    def test_create_flag_makes_out_dir(self, tmp_path):
        out = tmp_path / "made"
        assert run("--out", str(out), "--create", "generate") == EXIT_OK
        assert (out / "base.pgm").exists()

    def test_bad_config_path_is_io_error(self, tmp_path):
        assert run("--config", str(tmp_path / "nope.toml"), "generate") == EXIT_IO


class TestGenerate:
    def test_outputs_and_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("--out", str(out), "--create", "generate") == EXIT_OK
        for name in ("base.pgm", "reference.pgm", "labels.pgm"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_changes_renders(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("--out", str(a), "--create", "--seed", "1", "generate") == EXIT_OK
        assert run("--out", str(b), "--create", "--seed", "2", "generate") == EXIT_OK
        assert (a / "base.pgm").read_bytes() != (b / "base.pgm").read_bytes()

    def test_label_map_codes(self, tmp_path):
        out = tmp_path / "o"
        assert run("--out", str(out), "--create", "generate") == EXIT_OK
        labels = np.round(load_image(out / "labels.pgm").data * 255).astype(int)
        assert {10, 20, 30, 40, 50, 80} <= set(np.unique(labels))


class TestPerturb:
    def test_identity_frame_matches_reference(self, tmp_path):
        cfg = cfg_file(tmp_path, NO_OCCLUDER_NO_SENSOR)
        out = tmp_path / "o"
        assert run("--config", cfg, "--out", str(out), "--create", "generate") == EXIT_OK
        assert run("--config", cfg, "--out", str(out), "perturb", "--level", "0") == EXIT_OK
        ref = (out / "reference.pgm").read_bytes()
        frame = (out / "frame_identity_0.pgm").read_bytes()
        assert frame == ref

    def test_zero_extinction_fog_equals_full_daylight(self, tmp_path):
        fog_cfg = cfg_file(
            tmp_path,
            '[sensor]\nenabled = false\n[family]\nname = "fog"\nlevels = [0.0]\n',
            "fog.toml",
        )
        day_cfg = cfg_file(
            tmp_path,
            '[sensor]\nenabled = false\n[family]\nname = "daylight"\nlevels = [1.0]\n',
            "day.toml",
        )
        out = tmp_path / "o"
        assert run("--config", fog_cfg, "--out", str(out), "--create",
                   "perturb", "--level", "0") == EXIT_OK
        assert run("--config", day_cfg, "--out", str(out),
                   "perturb", "--level", "1") == EXIT_OK
        assert (out / "frame_fog_0.pgm").read_bytes() == (out / "frame_daylight_1.pgm").read_bytes()

    def test_unknown_family_is_config_error(self, tmp_path):
        cfg = cfg_file(tmp_path, '[family]\nname = "dusk"\nlevels = [1.0]\n')
        out = tmp_path / "o"
        assert run("--config", cfg, "--out", str(out), "--create",
                   "perturb", "--level", "1") == EXIT_CONFIG


class TestCharacterize:
    def test_emits_manifold_marginals_and_summary(self, tmp_path):
        cfg = cfg_file(tmp_path, SMALL_SWEEP)
        out = tmp_path / "o"
        assert run("--config", cfg, "--out", str(out), "--create", "characterize") == EXIT_OK
        for name in (
            "manifold_abs_rho.csv",
            "marginal_abs_rho_over_contexts.csv",
            "marginal_abs_rho_over_levels.csv",
            "marginal_abs_rho_over_sizes.csv",
            "summary_abs_rho.csv",
        ):
            assert (out / name).exists(), name
        rows = list(csv.reader((out / "manifold_abs_rho.csv").open()))
        assert rows[0] == ["context", "level", "size", "mean", "std", "count"]
        assert len(rows) == 1 + 6 * 2 * 2

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = cfg_file(tmp_path, SMALL_SWEEP)
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("--config", cfg, "--out", str(out), "--create", "characterize") == EXIT_OK
        for f in sorted(a.iterdir()):
            assert f.read_bytes() == (b / f.name).read_bytes(), f.name

    def test_svg_flag_adds_plots(self, tmp_path):
        cfg = cfg_file(tmp_path, SMALL_SWEEP)
        out = tmp_path / "o"
        assert run("--config", cfg, "--out", str(out), "--create", "--svg",
                   "characterize") == EXIT_OK
        assert (out / "manifold_abs_rho.svg").exists()
        assert (out / "marginal_abs_rho.svg").exists()


class TestRoc:
    CFG = 'metrics = ["ssd", "dct_ro"]\n[roc]\nn_samples = 40\n'

    def test_curve_files_and_summary(self, tmp_path):
        cfg = cfg_file(tmp_path, self.CFG)
        out = tmp_path / "o"
        assert run("--config", cfg, "--out", str(out), "--create", "roc") == EXIT_OK
        summary = (out / "roc_summary.csv").read_text().strip().splitlines()
        assert summary[0] == "metric,auc"
        assert len(summary) == 3
        for metric in ("ssd", "dct_ro"):
            rows = list(csv.reader((out / f"roc_{metric}.csv").open()))
            assert rows[0] == ["threshold", "fpr", "tpr"]
            assert rows[-1][0] == "auc"

    def test_no_illumination_changes_results(self, tmp_path):
        cfg = cfg_file(tmp_path, self.CFG)
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("--config", cfg, "--out", str(a), "--create", "roc") == EXIT_OK
        assert run("--config", cfg, "--out", str(b), "--create", "roc",
                   "--no-illumination") == EXIT_OK
        assert (a / "roc_summary.csv").read_bytes() != (b / "roc_summary.csv").read_bytes()

    def test_zero_samples_is_numeric_error(self, tmp_path):
        cfg = cfg_file(tmp_path, "[roc]\nn_samples = 0\n")
        out = tmp_path / "o"
        assert run("--config", cfg, "--out", str(out), "--create", "roc") == EXIT_NUMERIC

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = cfg_file(tmp_path, self.CFG)
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("--config", cfg, "--out", str(out), "--create", "roc") == EXIT_OK
        assert (a / "roc_summary.csv").read_bytes() == (b / "roc_summary.csv").read_bytes()


class TestDetect:
    @pytest.fixture
    def frames(self, tmp_path):
        from patchchar.image import GrayImage, save_image

        rng = np.random.default_rng(0)
        ref = GrayImage(rng.uniform(0.1, 0.9, (39, 39)))
        cur_data = ref.data.copy()
        cur_data[13:26, 13:26] = rng.uniform(0.1, 0.9, (13, 13))
        ref_p = tmp_path / "ref.pgm"
        cur_p = tmp_path / "cur.pgm"
        save_image(ref, ref_p)
        save_image(GrayImage(cur_data), cur_p)
        labels = np.zeros((39, 39), dtype=np.uint8)
        labels[13:26, 13:26] = 80
        from patchchar.image import save_label_map

        lab_p = tmp_path / "labels.pgm"
        save_label_map(labels, lab_p)
        return ref_p, cur_p, lab_p

    def test_identical_frames_report_no_changes(self, tmp_path, frames):
        ref_p, _, _ = frames
        out = tmp_path / "o"
        assert run("--out", str(out), "--create", "detect", str(ref_p), str(ref_p)) == EXIT_OK
        rows = list(csv.reader((out / "mask.csv").open()))
        assert all(r[3] == "unchanged" for r in rows[1:])

    def test_occluded_block_detected_and_scored(self, tmp_path, frames):
        ref_p, cur_p, lab_p = frames
        out = tmp_path / "o"
        assert run("--out", str(out), "--create", "detect", str(ref_p), str(cur_p),
                   "--labels", str(lab_p)) == EXIT_OK
        rows = {(r[0], r[1]): r[3] for r in list(csv.reader((out / "mask.csv").open()))[1:]}
        assert rows[("1", "1")] == "changed"
        metrics = (out / "detect_metrics.csv").read_text().strip().splitlines()
        assert metrics[0] == "precision,recall,f1,false_positives,degenerate"
        assert metrics[1].startswith("1,1,1,0,")

    def test_calibrated_policy_runs(self, tmp_path, frames):
        ref_p, cur_p, _ = frames
        cfg = cfg_file(tmp_path, '[detector]\nmetric = "ssd"\npolicy = "calibrated"\n')
        out = tmp_path / "o"
        assert run("--config", cfg, "--out", str(out), "--create", "detect",
                   str(ref_p), str(cur_p)) == EXIT_OK
        assert (out / "mask.pgm").exists()

    def test_size_mismatch_is_config_error(self, tmp_path, frames):
        from patchchar.image import GrayImage, save_image

        ref_p, _, _ = frames
        small = tmp_path / "small.pgm"
        save_image(GrayImage(np.zeros((13, 13))), small)
        out = tmp_path / "o"
        assert run("--out", str(out), "--create", "detect", str(ref_p), str(small)) == EXIT_CONFIG

    def test_missing_image_is_io_error(self, tmp_path, frames):
        ref_p, _, _ = frames
        out = tmp_path / "o"
        assert run("--out", str(out), "--create", "detect", str(ref_p),
                   str(tmp_path / "nope.pgm")) == EXIT_IO
