import json
from pathlib import Path

import numpy as np
import pytest

from fpntrack.cli import main
from fpntrack.container import read_container, read_tracks

SCENE = {
    "image_size": [64, 64],
    "num_frames": 8,
    "depth": 8,
    "seed": 0,
    "noise_sigma": 0.0,
    "distractor_overlap": 0.0,
    "objects": [
        {"start": [8, 20, 24, 24], "velocity": [2, 0], "is_target": True},
        {"start": [36, 4, 16, 16], "velocity": [0, 2]},
    ],
}


@pytest.fixture
def scene_dir(tmp_path):
    scene_path = tmp_path / "scene.json"
    scene_path.write_text(json.dumps(SCENE))
    out = tmp_path / "seq"
    rc = main(
        [
            "synth",
            "--scene",
            str(scene_path),
            "--out-dir",
            str(out),
            "--jitter",
            "0",
            "--candidates-per-object",
            "1",
        ]
    )
    assert rc == 0
    return out


class TestUsage:
    def test_no_arguments_prints_usage_and_fails(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand_fails(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_required_flag_fails(self, capsys):
        assert main(["synth"]) == 1
        assert "--scene" in capsys.readouterr().err

    def test_missing_input_file_is_user_error(self, capsys, tmp_path):
        rc = main(["synth", "--scene", str(tmp_path / "nope.json"), "--out-dir", str(tmp_path)])
        assert rc == 1

    def test_bad_box_string_fails(self, capsys, scene_dir):
        rc = main(
            [
                "solve-template",
                "--pyramid",
                str(scene_dir / "frame_0000.fpyr"),
                "--box",
                "1,2,3",
            ]
        )
        assert rc == 1
        assert "x,y,w,h" in capsys.readouterr().err


class TestSynth:
    def test_writes_containers_manifest_and_groundtruth(self, scene_dir):
        assert (scene_dir / "manifest.json").exists()
        assert (scene_dir / "gt.jsonl").exists()
        frames = sorted(scene_dir.glob("frame_*.fpyr"))
        assert len(frames) == 8
        pyr = read_container(frames[0])
        assert pyr.depth == 8
        cands = json.loads((scene_dir / "candidates_0000.json").read_text())
        assert len(cands) == 2  # one candidate per visible object


class TestSolveTemplateAndAttend:
    def test_center_template_output(self, scene_dir, tmp_path):
        out = tmp_path / "template.json"
        rc = main(
            [
                "solve-template",
                "--pyramid",
                str(scene_dir / "frame_0000.fpyr"),
                "--box",
                "8,20,24,24",
                "--template-mode",
                "center",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["kind"] == "center"
        assert len(doc["values"]) == 8

    def test_detection_mode_attention_is_uniform(self, scene_dir, tmp_path):
        template = tmp_path / "template.json"
        main(
            [
                "solve-template",
                "--pyramid",
                str(scene_dir / "frame_0000.fpyr"),
                "--box",
                "8,20,24,24",
                "--out",
                str(template),
            ]
        )
        sims = tmp_path / "sims.fpyr"
        rc = main(
            [
                "attend",
                "--pyramid",
                str(scene_dir / "frame_0000.fpyr"),
                "--template",
                str(template),
                "--mode",
                "detection",
                "--out",
                str(sims),
            ]
        )
        assert rc == 0
        pyr = read_container(sims)
        assert pyr.depth == 1
        for fm in pyr.levels:
            assert np.all(fm.data == 1.0)

    def test_tracking_mode_attention_varies(self, scene_dir, tmp_path):
        template = tmp_path / "template.json"
        main(
            [
                "solve-template",
                "--pyramid",
                str(scene_dir / "frame_0000.fpyr"),
                "--box",
                "8,20,24,24",
                "--out",
                str(template),
            ]
        )
        sims = tmp_path / "sims.fpyr"
        rc = main(
            [
                "attend",
                "--pyramid",
                str(scene_dir / "frame_0000.fpyr"),
                "--template",
                str(template),
                "--out",
                str(sims),
            ]
        )
        assert rc == 0
        pyr = read_container(sims)
        assert any(fm.data.std() > 0 for fm in pyr.levels)


class TestTrackAndEval:
    def run_pipeline(self, scene_dir, tmp_path, extra_track=()):
        tracks = tmp_path / "tracks.jsonl"
        rc = main(
            [
                "track",
                "--sequence",
                str(scene_dir / "manifest.json"),
                "--out",
                str(tracks),
                "--template-mode",
                "center",
                *extra_track,
            ]
        )
        assert rc == 0
        return tracks

    def test_clean_scene_tracks_perfectly(self, scene_dir, tmp_path):
        tracks = self.run_pipeline(scene_dir, tmp_path)
        report_path = tmp_path / "report.json"
        rc = main(
            [
                "eval",
                "--pred",
                str(tracks),
                "--gt",
                str(scene_dir / "gt.jsonl"),
                "--protocol",
                "got",
                "--out",
                str(report_path),
            ]
        )
        assert rc == 0
        report = json.loads(report_path.read_text())
        assert report["ao"] == pytest.approx(1.0)
        assert report["sr"] == pytest.approx(1.0)

    def test_track_output_is_readable_and_present(self, scene_dir, tmp_path):
        tracks = self.run_pipeline(scene_dir, tmp_path, ("--no-smooth",))
        track = read_tracks(tracks)
        assert len(track) == 8
        assert all(e.present for e in track)

    def test_oxuva_report_fields(self, tmp_path, capsys):
        # the oxuva rates need at least one groundtruth-absent frame
        scene = dict(SCENE)
        scene["objects"] = [
            dict(SCENE["objects"][0], absent_frames=[5, 6]),
            SCENE["objects"][1],
        ]
        scene_path = tmp_path / "scene.json"
        scene_path.write_text(json.dumps(scene))
        seq = tmp_path / "seq"
        assert (
            main(
                [
                    "synth",
                    "--scene",
                    str(scene_path),
                    "--out-dir",
                    str(seq),
                    "--jitter",
                    "0",
                    "--candidates-per-object",
                    "1",
                ]
            )
            == 0
        )
        tracks = self.run_pipeline(seq, tmp_path)
        capsys.readouterr()
        rc = main(
            [
                "eval",
                "--pred",
                str(tracks),
                "--gt",
                str(seq / "gt.jsonl"),
                "--protocol",
                "oxuva",
            ]
        )
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert report["tpr"] == pytest.approx(1.0)
        assert report["gm"] == pytest.approx(np.sqrt(report["tpr"] * report["tnr"]), abs=1e-4)

    def test_ltb35_report(self, scene_dir, tmp_path, capsys):
        tracks = self.run_pipeline(scene_dir, tmp_path)
        rc = main(
            [
                "eval",
                "--pred",
                str(tracks),
                "--gt",
                str(scene_dir / "gt.jsonl"),
                "--protocol",
                "ltb35",
            ]
        )
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert report["f"] == pytest.approx(1.0)

    def test_davis_requires_masks(self, scene_dir, tmp_path, capsys):
        tracks = self.run_pipeline(scene_dir, tmp_path)
        rc = main(
            [
                "eval",
                "--pred",
                str(tracks),
                "--gt",
                str(scene_dir / "gt.jsonl"),
                "--protocol",
                "davis",
            ]
        )
        assert rc == 1
        assert "mask" in capsys.readouterr().err


class TestGradcheck:
    def test_prints_error_and_passes(self, capsys):
        rc = main(["gradcheck", "--dim", "6", "--negatives", "8"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "max relative error" in out
        assert "PASS" in out

    def test_huge_step_fails_with_exit_code_two(self, capsys):
        rc = main(["gradcheck", "--dim", "6", "--negatives", "8", "--step", "10.0"])
        assert rc == 2
        assert "FAIL" in capsys.readouterr().out
