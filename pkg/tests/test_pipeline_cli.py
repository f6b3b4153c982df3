import os

import numpy as np
import pytest
from PIL import Image

from pseudolidar import kitti_io
from pseudolidar.cli import main
from pseudolidar.config import DEFAULTS, PipelineConfig, parse_config_text
from pseudolidar.errors import ConfigError, MissingCounterpart
from pseudolidar.pipeline import run_bench, run_eval_stereo, run_pipeline

from conftest import shifted_pair, write_kitti_calib


def _make_dataset(root, frame_ids, height=80, width=140, shift=6, seed=0):
    """Synthetic on-disk stereo dataset in the expected layout."""
    left_dir = root / "left"
    right_dir = root / "right"
    calib_dir = root / "calib"
    for d in (left_dir, right_dir, calib_dir):
        d.mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    for frame_id in frame_ids:
        left, right = shifted_pair(height, width, shift, rng)
        Image.fromarray(left.astype(np.uint8), mode="L").save(left_dir / f"{frame_id}.png")
        Image.fromarray(right.astype(np.uint8), mode="L").save(right_dir / f"{frame_id}.png")
        write_kitti_calib(calib_dir / f"{frame_id}.txt", fu=300.0, fv=300.0,
                          cu=width / 2, cv=height / 2, baseline=0.4)
    return left_dir, right_dir, calib_dir


def _config_text(left_dir, right_dir, calib_dir, out_dir, extra=""):
    return (
        f"input.left_dir = {left_dir}\n"
        f"input.right_dir = {right_dir}\n"
        f"input.calib_dir = {calib_dir}\n"
        f"output.dir = {out_dir}\n"
        "max_disparity = 16\n"
        + extra
    )


def _write_config(path, *args, **kwargs):
    path.write_text(_config_text(*args, **kwargs))
    return str(path)


def test_parse_config_text_and_defaults():
    mapping = parse_config_text("a.b = 1  # comment\n\n# full comment\nc = x y\n")
    assert mapping == {"a.b": "1", "c": "x y"}
    config = PipelineConfig.load()
    assert config["de.enabled"] is True
    assert config["dd.enabled"] is True
    assert config["ad.enabled"] is False
    assert config["pillar.size_x"] == 0.12
    assert set(DEFAULTS) == set(config.values)


def test_config_unknown_key_and_bad_value(tmp_path):
    bad = tmp_path / "bad.conf"
    bad.write_text("no_such_key = 1\n")
    with pytest.raises(ConfigError):
        PipelineConfig.load(config_path=str(bad))
    bad.write_text("sgm.p1 = banana\n")
    with pytest.raises(ConfigError):
        PipelineConfig.load(config_path=str(bad))
    bad.write_text("just a line without equals\n")
    with pytest.raises(ConfigError):
        PipelineConfig.load(config_path=str(bad))


def test_config_env_override():
    config = PipelineConfig.load(environ={"PSEUDOLIDAR_SGM__P1": "17", "PSEUDOLIDAR_DD__ENABLED": "off"})
    assert config["sgm.p1"] == 17
    assert config["dd.enabled"] is False


def test_run_pipeline_empty_frame_list(tmp_path):
    dirs = _make_dataset(tmp_path, [])
    config = PipelineConfig.load(
        overrides={
            "input.left_dir": str(dirs[0]),
            "input.right_dir": str(dirs[1]),
            "input.calib_dir": str(dirs[2]),
            "output.dir": str(tmp_path / "out"),
        },
        frames=[],
    )
    summary = run_pipeline(config)
    assert summary.frames_processed == 0
    assert summary.exit_code == 0


def test_run_pipeline_smoke_and_outputs(tmp_path):
    dirs = _make_dataset(tmp_path, ["000000"])
    out_dir = tmp_path / "out"
    config = PipelineConfig.load(
        overrides={
            "input.left_dir": str(dirs[0]),
            "input.right_dir": str(dirs[1]),
            "input.calib_dir": str(dirs[2]),
            "output.dir": str(out_dir),
            "max_disparity": "16",
            "de.enabled": "off",
            "dd.enabled": "off",
            "output.write_ply": "on",
            "output.write_pillars": "on",
            "output.write_disparity_png": "on",
        },
        frames=["000000"],
    )
    summary = run_pipeline(config)
    assert summary.exit_code == 0
    assert summary.frames_processed == 1
    assert summary.points_emitted > 0
    assert (out_dir / "000000.bin").stat().st_size == 16 * summary.points_emitted
    assert (out_dir / "000000.ply").exists()
    assert (out_dir / "000000.pillars.txt").exists()
    assert (out_dir / "000000.png").exists()
    stages = {stage for stage, _ in summary.timings}
    assert stages == {"census", "cost_volume", "sgm", "refine", "cloud", "pillars", "io"}


def test_run_pipeline_deterministic_across_runs_and_threads(tmp_path):
    frames = ["000000", "000001"]
    dirs = _make_dataset(tmp_path, frames)
    outputs = []
    for run_idx, threads in ((0, "1"), (1, "2")):
        out_dir = tmp_path / f"out{run_idx}"
        config = PipelineConfig.load(
            overrides={
                "input.left_dir": str(dirs[0]),
                "input.right_dir": str(dirs[1]),
                "input.calib_dir": str(dirs[2]),
                "output.dir": str(out_dir),
                "max_disparity": "16",
                "ad.enabled": "on",
                "threads": threads,
            },
            frames=frames,
        )
        summary = run_pipeline(config)
        assert summary.exit_code == 0
        outputs.append(
            [(out_dir / f"{f}.bin").read_bytes() for f in frames]
        )
    assert outputs[0] == outputs[1]


def test_run_pipeline_skips_failing_frame(tmp_path):
    dirs = _make_dataset(tmp_path, ["000000"])
    config = PipelineConfig.load(
        overrides={
            "input.left_dir": str(dirs[0]),
            "input.right_dir": str(dirs[1]),
            "input.calib_dir": str(dirs[2]),
            "output.dir": str(tmp_path / "out"),
            "max_disparity": "16",
        },
        frames=["000000", "000404"],  # second frame has no files
    )
    summary = run_pipeline(config)
    assert summary.frames_processed == 1
    assert summary.frames_failed == 1
    assert summary.exit_code == 1


def test_run_pipeline_missing_input_dir(tmp_path):
    config = PipelineConfig.load(
        overrides={
            "input.left_dir": str(tmp_path / "nope"),
            "input.right_dir": str(tmp_path / "nope"),
            "input.calib_dir": str(tmp_path / "nope"),
        },
        frames=["0"],
    )
    with pytest.raises(ConfigError):
        run_pipeline(config)


def test_toggle_matrix_runs(tmp_path):
    dirs = _make_dataset(tmp_path, ["000000"], height=40, width=80)
    for de in ("on", "off"):
        for sparsing in (("off", "off"), ("on", "off"), ("off", "on"), ("on", "on")):
            out_dir = tmp_path / f"out_{de}_{sparsing[0]}_{sparsing[1]}"
            config = PipelineConfig.load(
                overrides={
                    "input.left_dir": str(dirs[0]),
                    "input.right_dir": str(dirs[1]),
                    "input.calib_dir": str(dirs[2]),
                    "output.dir": str(out_dir),
                    "max_disparity": "16",
                    "de.enabled": de,
                    "dd.enabled": sparsing[0],
                    "ad.enabled": sparsing[1],
                },
                frames=["000000"],
            )
            assert run_pipeline(config).exit_code == 0


def test_all_toggles_off_equals_raw_sgm_path(tmp_path):
    """With DE/DD/AD disabled the pipeline must reproduce the plain
    census -> cost -> aggregate -> WTA -> LR -> cloud composition."""
    from pseudolidar import costvolume, pointcloud, sgm
    from pseudolidar.pipeline import process_frame

    dirs = _make_dataset(tmp_path, ["000000"], height=60, width=100)
    config = PipelineConfig.load(
        overrides={
            "input.left_dir": str(dirs[0]),
            "input.right_dir": str(dirs[1]),
            "input.calib_dir": str(dirs[2]),
            "max_disparity": "16",
            "de.enabled": "off",
            "dd.enabled": "off",
            "ad.enabled": "off",
        },
        frames=["000000"],
    )
    frame = kitti_io.load_stereo_frame(
        dirs[0] / "000000.png", dirs[1] / "000000.png", dirs[2] / "000000.txt"
    )
    cloud, _, disparity, _ = process_frame(frame, config)

    params = config.sgm_params
    cl = costvolume.census_transform(frame.left, (5, 5))
    cr = costvolume.census_transform(frame.right, (5, 5))
    vol = costvolume.build_cost_volume(cl, cr, 16)
    agg = sgm.aggregate(vol, params)
    expected_disp = sgm.lr_consistency(
        sgm.winner_take_all(agg), sgm.right_disparity(agg), params.lr_threshold
    )
    assert np.array_equal(disparity.data, expected_disp.data)
    assert np.array_equal(disparity.valid, expected_disp.valid)

    depth = pointcloud.disparity_to_depth(expected_disp, frame.calib, config["d_min"])
    expected_cloud = pointcloud.crop_scope(
        pointcloud.depth_to_cloud(depth, frame.calib), config.scope
    )
    assert np.array_equal(cloud.points, expected_cloud.points)


def test_run_bench_sample_counts(tmp_path):
    dirs = _make_dataset(tmp_path, ["000000"], height=40, width=80)
    config = PipelineConfig.load(
        overrides={
            "input.left_dir": str(dirs[0]),
            "input.right_dir": str(dirs[1]),
            "input.calib_dir": str(dirs[2]),
            "output.dir": str(tmp_path / "out"),
            "max_disparity": "16",
        },
        frames=["000000"],
    )
    report = run_bench(config, repeats=1)
    assert {s.stage for s in report.stages} == {
        "census", "cost_volume", "sgm", "refine", "cloud", "pillars", "io"
    }
    assert all(s.count == 1 for s in report.stages)
    report5 = run_bench(config, repeats=5)
    assert all(s.count == 5 for s in report5.stages)


def test_run_eval_stereo_identical_is_zero(tmp_path):
    pred_dir = tmp_path / "pred"
    gt_dir = tmp_path / "gt"
    pred_dir.mkdir()
    gt_dir.mkdir()
    rng = np.random.default_rng(5)
    for frame_id in ("000000", "000001"):
        enc = (rng.uniform(1, 60, (12, 20)) * 256).astype(np.uint16)
        Image.fromarray(enc).save(pred_dir / f"{frame_id}.png")
        Image.fromarray(enc).save(gt_dir / f"{frame_id}.png")
    config = PipelineConfig.load()
    report = run_eval_stereo(config, str(pred_dir), str(gt_dir))
    assert report == {"all": 0.0}


def test_run_eval_stereo_noc_all_split_and_mismatch(tmp_path):
    pred_dir = tmp_path / "pred"
    pred_dir.mkdir()
    gt_dir = tmp_path / "gt"
    (gt_dir / "noc").mkdir(parents=True)
    (gt_dir / "all").mkdir()
    enc = np.full((8, 8), 256 * 10, np.uint16)
    Image.fromarray(enc).save(pred_dir / "000000.png")
    Image.fromarray(enc).save(gt_dir / "noc" / "000000.png")
    off = enc.copy()
    off[0, 0] = 256 * 20  # one pixel off by 10 px
    Image.fromarray(off).save(gt_dir / "all" / "000000.png")
    config = PipelineConfig.load()
    report = run_eval_stereo(config, str(pred_dir), str(gt_dir))
    assert report["noc"] == 0.0
    assert report["all"] == pytest.approx(1.0 / 64.0)

    Image.fromarray(enc).save(pred_dir / "000099.png")
    with pytest.raises(MissingCounterpart):
        run_eval_stereo(config, str(pred_dir), str(gt_dir))


def test_cli_run_and_eval_detection(tmp_path):
    frames = ["000000"]
    dirs = _make_dataset(tmp_path, frames)
    out_dir = tmp_path / "out"
    config_path = _write_config(
        tmp_path / "run.conf", dirs[0], dirs[1], dirs[2], out_dir
    )
    code = main(["run", "--config", config_path, "--frames", "000000",
                 "--sparsing", "dd", "--de", "on"])
    assert code == 0
    assert (out_dir / "000000.bin").exists()

    # detection eval against itself: perfect AP on every populated row
    calib = kitti_io.load_calibration(str(dirs[2] / "000000.txt"))
    from pseudolidar.types import LabelBox3D

    box = LabelBox3D(
        cls="Car", center_x=20.0, center_y=1.0, center_z=-0.5,
        length=4.0, width=1.7, height=1.6, yaw=0.3, score=0.95,
        truncation=0.0, occlusion=0,
    )
    pred_dir = tmp_path / "dets"
    gt_dir = tmp_path / "gts"
    pred_dir.mkdir()
    gt_dir.mkdir()
    kitti_io.write_labels([box], calib, pred_dir / "000000.txt")
    gt_box = LabelBox3D(**{**box.__dict__, "score": None})
    kitti_io.write_labels([gt_box], calib, gt_dir / "000000.txt")

    code = main([
        "eval", "--mode", "detection", "--pred", str(pred_dir), "--gt", str(gt_dir),
        "--config", config_path, "--out", str(out_dir),
    ])
    assert code == 0
    csv_path = out_dir / "eval_detection.csv"
    text = csv_path.read_text().splitlines()
    assert text[0] == "metric,iou,difficulty,ap"
    populated = [line for line in text[1:] if line.rsplit(",", 1)[1]]
    assert populated, "expected at least one difficulty bucket with ground truth"
    assert all(float(line.rsplit(",", 1)[1]) == pytest.approx(1.0) for line in populated)


def test_eval_detection_empty_prediction_dir(tmp_path):
    """Detector that emitted nothing: AP 0.0 on every populated bucket."""
    from pseudolidar.pipeline import run_eval_detection
    from pseudolidar.types import LabelBox3D

    dirs = _make_dataset(tmp_path, ["000000"], height=40, width=80)
    calib = kitti_io.load_calibration(str(dirs[2] / "000000.txt"))
    gt_dir = tmp_path / "gts"
    pred_dir = tmp_path / "dets"
    gt_dir.mkdir()
    pred_dir.mkdir()
    gt_box = LabelBox3D(
        cls="Car", center_x=20.0, center_y=1.0, center_z=-0.5,
        length=4.0, width=1.7, height=1.6, yaw=0.3,
    )
    kitti_io.write_labels([gt_box], calib, gt_dir / "000000.txt")
    config = PipelineConfig.load(overrides={"input.calib_dir": str(dirs[2])})
    rows = run_eval_detection(config, str(pred_dir), str(gt_dir))
    populated = [r for r in rows if r["ap"] is not None]
    assert populated
    assert all(r["ap"] == 0.0 for r in populated)


def test_cli_eval_stereo_writes_csv(tmp_path):
    pred_dir = tmp_path / "pred"
    gt_dir = tmp_path / "gt"
    pred_dir.mkdir()
    gt_dir.mkdir()
    enc = np.full((8, 8), 512, np.uint16)
    Image.fromarray(enc).save(pred_dir / "000000.png")
    Image.fromarray(enc).save(gt_dir / "000000.png")
    out_dir = tmp_path / "out"
    code = main([
        "eval", "--mode", "stereo", "--pred", str(pred_dir), "--gt", str(gt_dir),
        "--out", str(out_dir),
    ])
    assert code == 0
    assert (out_dir / "eval_stereo.csv").read_text().splitlines()[1] == "all,0.000000"


def test_cli_exit_codes(tmp_path):
    bad_conf = tmp_path / "bad.conf"
    bad_conf.write_text("junk_key = 1\n")
    assert main(["run", "--config", str(bad_conf)]) == 2
    # missing input dirs: also a config error
    assert main(["run", "--frames", "000000"]) == 2
    # partial failure: one good frame, one missing
    dirs = _make_dataset(tmp_path, ["000000"], height=40, width=80)
    conf = _write_config(tmp_path / "ok.conf", dirs[0], dirs[1], dirs[2], tmp_path / "out")
    assert main(["run", "--config", conf, "--frames", "000000,000404"]) == 1


def test_cli_bench_smoke(tmp_path):
    dirs = _make_dataset(tmp_path, ["000000"], height=40, width=80)
    out_dir = tmp_path / "out"
    conf = _write_config(tmp_path / "b.conf", dirs[0], dirs[1], dirs[2], out_dir)
    code = main(["bench", "--config", conf, "--frames", "000000", "--repeats", "2"])
    assert code == 0
    csv_lines = (out_dir / "bench.csv").read_text().splitlines()
    assert csv_lines[0] == "stage,mean_ms,median_ms,p95_ms"
    assert len(csv_lines) == 1 + 7


def test_cli_frames_file(tmp_path):
    dirs = _make_dataset(tmp_path, ["000000", "000001"], height=40, width=80)
    frames_file = tmp_path / "frames.txt"
    frames_file.write_text("000000\n000001\n")
    out_dir = tmp_path / "out"
    conf = _write_config(tmp_path / "f.conf", dirs[0], dirs[1], dirs[2], out_dir)
    assert main(["run", "--config", conf, "--frames", str(frames_file)]) == 0
    assert (out_dir / "000000.bin").exists()
    assert (out_dir / "000001.bin").exists()
