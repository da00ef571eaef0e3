import json

import numpy as np
import pytest

from raymap import heatmap as hm
from raymap import raytracer as rt
from raymap import scene as sc
from raymap.cli import main


@pytest.fixture()
def scene_file(tmp_path):
    path = tmp_path / "room.scene"
    assert (
        main(
            [
                "scene",
                "gen",
                "--archetype",
                "single_room",
                "--size",
                "4x4",
                "--materials",
                "concrete",
                "--seed",
                "7",
                "-o",
                str(path),
            ]
        )
        == 0
    )
    return path


class TestSceneGen:
    def test_output_matches_library(self, scene_file):
        expected = sc.generate_scene("single_room", (4.0, 4.0), {"concrete"}, 7)
        assert sc.load_scene(scene_file.read_bytes()) == expected

    def test_bad_size_is_usage_error(self, tmp_path, capsys):
        rc = main(
            [
                "scene", "gen", "--archetype", "single_room", "--size", "huge",
                "--materials", "concrete", "-o", str(tmp_path / "x.scene"),
            ]
        )
        assert rc == 1
        assert "usage error" in capsys.readouterr().err

    def test_unknown_material_is_runtime_error(self, tmp_path, capsys):
        rc = main(
            [
                "scene", "gen", "--archetype", "single_room", "--size", "4x4",
                "--materials", "adamantium", "-o", str(tmp_path / "x.scene"),
            ]
        )
        assert rc == 2
        assert "error" in capsys.readouterr().err


class TestSimulate:
    def test_matches_library_call(self, scene_file, tmp_path):
        out = tmp_path / "map.emhm"
        rc = main(
            [
                "simulate", "--scene", str(scene_file), "--tx", "2,2,1.5",
                "--res", "0.25", "--order", "1", "--no-diffraction",
                "-o", str(out),
            ]
        )
        assert rc == 0
        got = hm.load_heatmap(out.read_bytes())
        scene = sc.load_scene(scene_file.read_bytes())
        tx = sc.TxLocation((2.0, 2.0, 1.5), 0.0, 2.4e9)
        grid = got.grid
        cfg = rt.TraceConfig(max_reflection_order=1, enable_diffraction=False)
        expected = rt.simulate_heatmap(scene, tx, grid, cfg)
        np.testing.assert_array_equal(
            got.values, expected.values.astype(np.float32).astype(np.float64)
        )

    def test_missing_scene_file(self, tmp_path, capsys):
        rc = main(
            [
                "simulate", "--scene", str(tmp_path / "nope.scene"),
                "--tx", "1,1,1.5", "-o", str(tmp_path / "o.emhm"),
            ]
        )
        assert rc == 2


class TestEval:
    @pytest.fixture()
    def two_maps(self, scene_file, tmp_path):
        a = tmp_path / "a.emhm"
        b = tmp_path / "b.emhm"
        for out, order in ((a, "0"), (b, "1")):
            assert (
                main(
                    [
                        "simulate", "--scene", str(scene_file), "--tx", "2,2,1.5",
                        "--res", "0.25", "--order", order, "--no-diffraction",
                        "-o", str(out),
                    ]
                )
                == 0
            )
        return a, b

    def test_mse_matches_library(self, two_maps, capsys):
        a, b = two_maps
        assert main(["eval", "mse", str(a), str(b), "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        expected = hm.mse(
            hm.load_heatmap(a.read_bytes()), hm.load_heatmap(b.read_bytes())
        )
        assert doc["mse_dbm2"] == pytest.approx(expected, rel=1e-12)

    def test_hist_percentiles_ordered(self, two_maps, capsys):
        a, b = two_maps
        assert main(["eval", "hist", str(a), str(b), "--bins", "16", "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        p = doc["percentiles"]
        assert p["50"] <= p["70"] <= p["90"]
        assert sum(doc["counts"]) == 16 * 16

    def test_identical_maps_zero_mse(self, two_maps, capsys):
        a, _ = two_maps
        assert main(["eval", "mse", str(a), str(a)]) == 0
        assert "mse=0.000000" in capsys.readouterr().out


class TestLossReport:
    def test_report_with_physics_samples(self, scene_file, tmp_path, capsys):
        pred = tmp_path / "pred.emhm"
        target = tmp_path / "target.emhm"
        for out in (pred, target):
            assert (
                main(
                    [
                        "simulate", "--scene", str(scene_file), "--tx", "2,2,1.5",
                        "--res", "0.25", "--order", "1", "-o", str(out),
                    ]
                )
                == 0
            )
        rep_path = tmp_path / "report.json"
        rc = main(
            [
                "loss", "report", "--pred", str(pred), "--target", str(target),
                "--scene", str(scene_file), "--samples", "16", "--order", "1",
                "-o", str(rep_path),
            ]
        )
        assert rc == 0
        doc = json.loads(rep_path.read_text())
        assert doc["terms"]["mse_dbm2"] == pytest.approx(0.0, abs=1e-12)
        assert doc["weights"]["lambda"] == 1.0
        # identical maps: the per-sample residual is only the non-dominant
        # share of the total power, at most 10*log10(1/0.9) dB per sample
        bound = (10 * np.log10(1 / 0.9)) ** 2
        for mech in ("direct", "reflection", "diffraction"):
            key = f"component_{mech}_db2"
            if key in doc["terms"]:
                n = doc["sample_counts"][mech]
                assert 0.0 <= doc["terms"][key] <= n * bound + 1e-9


class TestExportAndValidate:
    def test_export_img(self, scene_file, tmp_path):
        heat = tmp_path / "m.emhm"
        assert (
            main(
                [
                    "simulate", "--scene", str(scene_file), "--tx", "2,2,1.5",
                    "--res", "0.25", "--no-diffraction", "-o", str(heat),
                ]
            )
            == 0
        )
        img = tmp_path / "m.ppm"
        assert main(["export", "img", str(heat), "--palette", "grayscale", "-o", str(img)]) == 0
        assert img.read_bytes().startswith(b"P6\n16 16\n255\n")

    def test_dataset_build_and_validate(self, tmp_path, capsys):
        out = tmp_path / "ds"
        rc = main(
            [
                "dataset", "build", "--scenes", "1", "--mix", "single_room=1.0",
                "--size", "4x4", "--res", "0.5", "--seed", "3", "--order", "1",
                "--no-diffraction", "--out", str(out),
            ]
        )
        assert rc == 0
        assert main(["dataset", "validate", str(out / "manifest.json")]) == 0
        assert "overall: pass" in capsys.readouterr().out
        # corrupt a file: validate now exits 2
        victim = json.loads((out / "manifest.json").read_text())["records"][0]
        (out / victim["heatmap_path"]).write_bytes(b"garbage")
        assert main(["dataset", "validate", str(out / "manifest.json")]) == 2


class TestBench:
    def test_bench_reports_points(self, scene_file, capsys):
        rc = main(
            [
                "bench", "--scene", str(scene_file), "--res", "0.5",
                "--order", "1", "--no-diffraction", "--json",
            ]
        )
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["points"] == 8 * 8
        assert doc["total_s"] > 0
