import numpy as np
import pytest

from mostream.cli import main
from mostream.formats import (
    read_flo,
    read_manifest,
    read_pgm,
    read_scores_csv,
    read_tensor,
)
from mostream.mos import mos_images
from mostream.net import load_checkpoint


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    code = main(
        [
            "synth",
            str(root),
            "--seed", "5",
            "--frame-size", "32",
            "--clips-per-class", "3",
            "--speeds", "2",
            "--directions", "right,down",
            "--frames-per-clip", "12",
        ]
    )
    assert code == 0
    return root


class TestSynthCommand:
    def test_manifest_written(self, tiny_dataset):
        entries = read_manifest(tiny_dataset / "manifest.tsv")
        assert len(entries) == 6
        assert {e.label for e in entries} == {"right_s2", "down_s2"}


class TestDefaults:
    def test_mos_flag_defaults_are_reference_parameters(self):
        from mostream.cli import build_parser

        args = build_parser().parse_args(["mos", "in", "out"])
        assert (args.mag_low, args.mag_high) == (-15.0, 15.0)
        assert (args.ori_low, args.ori_high) == (-180.0, 180.0)
        assert args.mag_threshold == 128

    def test_predict_defaults(self):
        from mostream.cli import build_parser

        args = build_parser().parse_args(
            ["predict", "--manifest", "m", "--checkpoint", "c", "--output", "o"]
        )
        assert args.samples == 25
        assert args.stack_length == 10

    def test_train_defaults_follow_reference_schedule(self):
        from mostream.cli import build_parser

        args = build_parser().parse_args(["train", "--manifest", "m", "--output", "o"])
        assert args.base_lr == 0.005
        assert args.lr_step == 5000
        assert args.lr_factor == 0.1
        assert args.momentum == 0.9
        assert args.weight_decay == 0.0005


class TestFlowMosVolumeChain:
    def test_chain_on_one_clip(self, tiny_dataset, tmp_path):
        clip = tiny_dataset / "right_s2" / "clip_000"
        flow_dir = tmp_path / "flows"
        assert main(["flow", str(clip), str(flow_dir)]) == 0
        flo_files = sorted(flow_dir.glob("*.flo"))
        assert len(flo_files) == 11  # 12 frames -> 11 flows

        mos_dir = tmp_path / "mos"
        assert main(["mos", str(flow_dir), str(mos_dir)]) == 0
        mags = sorted(mos_dir.glob("mag_*.pgm"))
        oris = sorted(mos_dir.glob("ori_*.pgm"))
        assert len(mags) == 11 and len(oris) == 11

        # CLI defaults must reproduce the library defaults exactly
        flow = read_flo(flo_files[0])
        pair = mos_images(flow)
        assert np.array_equal(read_pgm(mags[0]), pair.magnitude)
        assert np.array_equal(read_pgm(oris[0]), pair.orientation)

        vol_dir = tmp_path / "volumes"
        assert main(["volume", str(mos_dir), str(vol_dir), "--stack-length", "10"]) == 0
        vols = sorted(vol_dir.glob("volume_*.mosv"))
        assert len(vols) == 2  # 11 pairs, stack 10 -> starts 0 and 1
        tensor = read_tensor(vols[0])
        assert tensor.shape == (20, 32, 32)

    def test_xy_mode(self, tiny_dataset, tmp_path):
        clip = tiny_dataset / "down_s2" / "clip_000"
        flow_dir = tmp_path / "flows"
        assert main(["flow", str(clip), str(flow_dir)]) == 0
        xy_dir = tmp_path / "xy"
        assert main(["mos", str(flow_dir), str(xy_dir), "--mode", "xy"]) == 0
        assert len(sorted(xy_dir.glob("x_*.pgm"))) == 11
        assert len(sorted(xy_dir.glob("y_*.pgm"))) == 11


class TestTrainPredictEval:
    def test_full_loop(self, tiny_dataset, tmp_path):
        manifest = tiny_dataset / "manifest.tsv"
        ckpt = tmp_path / "model.mosn"
        loss_csv = tmp_path / "loss.csv"
        code = main(
            [
                "train",
                "--manifest", str(manifest),
                "--output", str(ckpt),
                "--loss-csv", str(loss_csv),
                "--iterations", "8",
                "--batch-size", "4",
                "--input-side", "24",
                "--seed", "1",
            ]
        )
        assert code == 0
        model, header = load_checkpoint(ckpt)
        assert header["iterations"] == 8
        assert loss_csv.read_text().splitlines()[0] == "iter,lr,loss"

        scores_csv = tmp_path / "scores.csv"
        code = main(
            [
                "predict",
                "--manifest", str(manifest),
                "--checkpoint", str(ckpt),
                "--output", str(scores_csv),
                "--samples", "3",
                "--seed", "1",
            ]
        )
        assert code == 0
        ids, scores = read_scores_csv(scores_csv)
        assert len(ids) == 2  # one test clip per class
        assert np.allclose(scores.sum(axis=1), 1.0, atol=1e-6)

        conf_csv = tmp_path / "conf.csv"
        conf_pgm = tmp_path / "conf.pgm"
        code = main(
            [
                "eval",
                "--scores", str(scores_csv),
                "--manifest", str(manifest),
                "--confusion-csv", str(conf_csv),
                "--confusion-pgm", str(conf_pgm),
            ]
        )
        assert code == 0
        rows = conf_csv.read_text().splitlines()
        assert len(rows) == 2
        assert read_pgm(conf_pgm).shape == (2, 2)

        fused_csv = tmp_path / "fused.csv"
        code = main(
            [
                "fuse",
                str(scores_csv), str(scores_csv),
                "--weights", "2,1",
                "--output", str(fused_csv),
            ]
        )
        assert code == 0
        _, fused = read_scores_csv(fused_csv)
        assert np.allclose(fused, scores, atol=1e-8)


class TestViz:
    def test_flow_to_ppm(self, tiny_dataset, tmp_path):
        clip = tiny_dataset / "right_s2" / "clip_001"
        flow_dir = tmp_path / "flows"
        assert main(["flow", str(clip), str(flow_dir)]) == 0
        out = tmp_path / "flow.ppm"
        assert main(["viz", str(sorted(flow_dir.glob('*.flo'))[0]), str(out)]) == 0
        from mostream.formats import read_ppm

        assert read_ppm(out).shape == (32, 32, 3)


class TestExitCodes:
    def test_unknown_subcommand_usage_error(self, capsys):
        assert main(["frobnicate"]) == 2
        capsys.readouterr()

    def test_unknown_flag_usage_error(self, capsys):
        assert main(["synth", "out", "--no-such-flag"]) == 2
        capsys.readouterr()

    def test_pipeline_error_exit_one(self, tmp_path, capsys):
        assert main(["flow", str(tmp_path / "missing"), str(tmp_path / "out")]) == 1
        err = capsys.readouterr().err
        assert "error:" in err

    def test_bad_fuse_weights(self, tmp_path, capsys):
        scores = tmp_path / "s.csv"
        scores.write_text("video_id,class_0,class_1\nv,0.5,0.5\n")
        assert main(["fuse", str(scores), "--weights", "1,2", "--output", str(tmp_path / "o.csv")]) == 1
        capsys.readouterr()

    def test_volume_on_short_clip_errors(self, tmp_path, capsys):
        from mostream.formats import write_pgm
        from mostream.raster import make_rng

        clip = tmp_path / "clip"
        clip.mkdir()
        rng = make_rng(0)
        for t in range(3):
            write_pgm(clip / f"mag_{t:04d}.pgm", rng.integers(0, 256, (8, 8), dtype=np.uint8))
            write_pgm(clip / f"ori_{t:04d}.pgm", rng.integers(0, 256, (8, 8), dtype=np.uint8))
        assert main(["volume", str(clip), str(tmp_path / "out"), "--stack-length", "10"]) == 1
        assert "need 10 pairs" in capsys.readouterr().err
