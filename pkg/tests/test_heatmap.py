import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from raymap.errors import DegenerateReference, GridMismatch, ParseError
from raymap.heatmap import (
    export_image,
    load_heatmap,
    mse,
    nearest_rank_percentile,
    normalized_diff_histogram,
    save_heatmap,
)
from raymap.raytracer import Heatmap
from raymap.scene import GridSpec, TxLocation

GRID = GridSpec((0.0, 0.0), 2.0, 2.0, 0.05)
TX = TxLocation((1.0, 1.0, 1.5), 0.0, 2.4e9)


def _hm(values):
    return Heatmap(GRID, np.asarray(values, dtype=np.float64), -150.0, TX)


def _const(v):
    return _hm(np.full((GRID.nx, GRID.ny), v))


class TestMse:
    def test_identical_maps_zero(self):
        a = _const(-60.0)
        assert mse(a, a) == 0.0

    def test_constant_offset(self):
        # every cell off by 3 dBm gives 9 dBm^2
        assert mse(_const(-60.0), _const(-63.0)) == pytest.approx(9.0, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        a = _hm(rng.uniform(-90, -40, (GRID.nx, GRID.ny)))
        b = _hm(rng.uniform(-90, -40, (GRID.nx, GRID.ny)))
        assert mse(a, b) == mse(b, a)

    def test_grid_mismatch(self):
        other = Heatmap(
            GridSpec((0.0, 0.0), 1.0, 1.0, 0.05),
            np.zeros((20, 20)),
            -150.0,
            TX,
        )
        with pytest.raises(GridMismatch):
            mse(_const(-60.0), other)

    @given(st.floats(-100.0, 0.0), st.floats(-100.0, 0.0))
    def test_nonnegative(self, x, y):
        assert mse(_const(x), _const(y)) >= 0.0


class TestNearestRankPercentile:
    def test_worked_example(self):
        # 30 samples: ten 0.1s, ten 0.3s, ten 0.5s
        vals = np.sort(np.array([0.1] * 10 + [0.3] * 10 + [0.5] * 10))
        assert nearest_rank_percentile(vals, 0.50) == pytest.approx(0.3)
        assert nearest_rank_percentile(vals, 0.70) == pytest.approx(0.5)
        assert nearest_rank_percentile(vals, 0.90) == pytest.approx(0.5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            nearest_rank_percentile(np.array([]), 0.5)

    @given(
        st.lists(st.floats(0.0, 1.0), min_size=1, max_size=50),
        st.floats(0.01, 1.0),
    )
    @settings(max_examples=150)
    def test_matches_brute_force(self, vals, q):
        s = np.sort(np.asarray(vals))
        n = len(s)
        # brute force: smallest value with at least q*n samples <= it
        rank = max(1, int(np.ceil(q * n)))
        expected = s[min(rank, n) - 1]
        got = nearest_rank_percentile(s, q)
        assert got == expected
        # definition check: at least ceil(q*n) samples are <= result
        assert np.sum(s <= got + 1e-15) >= rank


class TestNormalizedDiffHistogram:
    def test_counts_and_range(self):
        rng = np.random.default_rng(7)
        b = _hm(rng.uniform(-90, -40, (GRID.nx, GRID.ny)))
        a = _hm(b.values + rng.normal(0, 2.0, b.values.shape))
        hist = normalized_diff_histogram(a, b, bins=20)
        assert hist.counts.sum() == GRID.nx * GRID.ny
        assert hist.bin_edges[0] == -1.0 and hist.bin_edges[-1] == 1.0
        assert set(hist.percentiles) == {50, 70, 90}
        assert 0.0 <= hist.percentiles[50] <= hist.percentiles[90]

    def test_identical_maps_single_bin(self):
        rng = np.random.default_rng(9)
        b = _hm(rng.uniform(-90, -40, (GRID.nx, GRID.ny)))
        hist = normalized_diff_histogram(b, b, bins=4)
        # all diffs are exactly zero; they land in the bin containing 0
        assert hist.counts[1] + hist.counts[2] == GRID.nx * GRID.ny
        assert hist.percentiles[90] == 0.0

    def test_clipping_keeps_everything_counted(self):
        b = _hm(np.linspace(-60, -59, GRID.nx * GRID.ny).reshape(GRID.nx, GRID.ny))
        a = _hm(b.values + 50.0)  # diff is 50x the reference range
        hist = normalized_diff_histogram(a, b, bins=10)
        assert hist.counts.sum() == GRID.nx * GRID.ny
        assert hist.counts[-1] == GRID.nx * GRID.ny

    def test_flat_reference_rejected(self):
        with pytest.raises(DegenerateReference):
            normalized_diff_histogram(_const(-60.0), _const(-55.0), bins=10)

    def test_bad_bins(self):
        rng = np.random.default_rng(1)
        b = _hm(rng.uniform(-90, -40, (GRID.nx, GRID.ny)))
        with pytest.raises(ValueError):
            normalized_diff_histogram(b, b, bins=0)


class TestExportImage:
    def test_ppm_shape_and_size(self):
        rng = np.random.default_rng(5)
        h = _hm(rng.uniform(-90, -40, (GRID.nx, GRID.ny)))
        data = export_image(h)
        assert data.startswith(b"P6\n40 40\n255\n")
        header_len = len(b"P6\n40 40\n255\n")
        assert len(data) - header_len == 40 * 40 * 3

    def test_grayscale_extremes(self):
        vals = np.full((GRID.nx, GRID.ny), -90.0)
        vals[0, 0] = -40.0
        data = export_image(_hm(vals), palette="grayscale")
        body = data.split(b"\n", 3)[3]
        assert b"\xff\xff\xff" in body and b"\x00\x00\x00" in body

    def test_constant_map_renders_midtone(self):
        data = export_image(_const(-60.0), palette="grayscale")
        body = data.split(b"\n", 3)[3]
        assert set(body) == {128}

    def test_unknown_palette(self):
        with pytest.raises(ValueError):
            export_image(_const(-60.0), palette="viridis")


class TestPersistence:
    def test_roundtrip_float32_exact(self):
        rng = np.random.default_rng(2)
        h = _hm(
            rng.uniform(-120, -30, (GRID.nx, GRID.ny)).astype(np.float32).astype(np.float64)
        )
        back = load_heatmap(save_heatmap(h))
        assert back.grid == h.grid
        assert back.tx == h.tx
        assert back.floor_dbm == h.floor_dbm
        np.testing.assert_array_equal(back.values, h.values)

    def test_save_is_deterministic(self):
        h = _const(-60.0)
        assert save_heatmap(h) == save_heatmap(h)

    def test_truncation_rejected(self):
        data = save_heatmap(_const(-60.0))
        with pytest.raises(ParseError, match="length|truncated"):
            load_heatmap(data[:-1])
        with pytest.raises(ParseError, match="truncated"):
            load_heatmap(data[:10])

    def test_bad_magic_rejected(self):
        data = save_heatmap(_const(-60.0))
        with pytest.raises(ParseError, match="magic"):
            load_heatmap(b"ZZZZ" + data[4:])

    def test_bad_version_rejected(self):
        import struct

        data = save_heatmap(_const(-60.0))
        bad = data[:4] + struct.pack("<I", 99) + data[8:]
        with pytest.raises(ParseError, match="version"):
            load_heatmap(bad)
