import numpy as np
import pytest

from raymap import heatmap as prim_hm
from raytrain import formats


class TestCrossImplementation:
    def test_reads_simulator_written_files(self, small_dataset):
        manifest = formats.read_manifest(small_dataset / "manifest.json")
        rec = manifest["records"][0]
        raster = formats.read_raster(small_dataset / rec["raster_path"])
        heat = formats.read_heatmap(small_dataset / rec["heatmap_path"])
        assert raster.channels.shape[0] == 3
        assert raster.channels.shape[1:] == heat.values.shape
        # cross-check values against the simulator's own reader
        prim = prim_hm.load_heatmap((small_dataset / rec["heatmap_path"]).read_bytes())
        np.testing.assert_array_equal(prim.values, heat.values)
        assert prim.tx.power == heat.tx_power
        assert prim.grid.resolution == heat.resolution

    def test_written_heatmap_loads_in_simulator(self, tmp_path):
        values = np.linspace(-90.0, -40.0, 16 * 16).reshape(16, 16)
        h = formats.HeatmapFile(
            values, 0.25, (0.0, 0.0), 1.5, -150.0, (2.0, 2.0, 1.5), 0.0, 2.4e9
        )
        path = tmp_path / "out.emhm"
        formats.write_heatmap(path, h)
        prim = prim_hm.load_heatmap(path.read_bytes())
        np.testing.assert_array_equal(
            prim.values, values.astype(np.float32).astype(np.float64)
        )
        assert prim.tx.position == (2.0, 2.0, 1.5)

    def test_roundtrip_own_reader(self, tmp_path):
        values = np.full((8, 8), -70.0)
        h = formats.HeatmapFile(
            values, 0.5, (1.0, 2.0), 1.5, -150.0, (3.0, 3.0, 1.0), -5.0, 5e9
        )
        formats.write_heatmap(tmp_path / "h.emhm", h)
        back = formats.read_heatmap(tmp_path / "h.emhm")
        np.testing.assert_array_equal(back.values, values)
        assert back.origin == (1.0, 2.0)
        assert back.tx_power == -5.0


class TestErrors:
    def test_truncated_heatmap(self, tmp_path):
        h = formats.HeatmapFile(
            np.zeros((4, 4)), 0.5, (0, 0), 1.5, -150.0, (1, 1, 1), 0.0, 2.4e9
        )
        formats.write_heatmap(tmp_path / "h.emhm", h)
        (tmp_path / "bad.emhm").write_bytes((tmp_path / "h.emhm").read_bytes()[:-4])
        with pytest.raises(formats.FormatError):
            formats.read_heatmap(tmp_path / "bad.emhm")

    def test_bad_magic(self, tmp_path):
        (tmp_path / "bad.emeg").write_bytes(b"NOPE" + b"\x00" * 60)
        with pytest.raises(formats.FormatError):
            formats.read_raster(tmp_path / "bad.emeg")

    def test_manifest_missing_records(self, tmp_path):
        (tmp_path / "m.json").write_text("{}")
        with pytest.raises(formats.FormatError):
            formats.read_manifest(tmp_path / "m.json")
