import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdesteady.errors import GridParseError
from rdesteady.gridio import (build_summary, find_peaks, heatmap_pixels, read_grid_csv,
                              read_pgm, write_grid_csv, write_heatmap_pgm, write_json)
from rdesteady.randeq import DensityGrid2D, GridSpec2D


def _grid(values, spec=None, normalized=False):
    values = np.asarray(values, dtype=float)
    spec = spec or GridSpec2D(0.0, 1.0, 0.0, 2.0, values.shape[1], values.shape[0])
    return DensityGrid2D(spec, values, normalized)


def _bump(spec, x0, y0, w, h=1.0):
    X, Y = np.meshgrid(spec.x_centers, spec.y_centers)
    return h * np.exp(-((X - x0) ** 2 + (Y - y0) ** 2) / (2 * w * w))


@settings(max_examples=30, deadline=None)
@given(nx=st.integers(2, 6), ny=st.integers(2, 6), seed=st.integers(0, 2**32 - 1))
def test_csv_round_trip_bit_exact(tmp_path_factory, nx, ny, seed):
    rng = np.random.default_rng(seed)
    v = rng.random((ny, nx)) * 10.0 ** rng.uniform(-300, 300, (ny, nx))
    spec = GridSpec2D(-0.1, 1 / 3, 0.2, 0.7, nx, ny)
    g = DensityGrid2D(spec, v, bool(seed % 2), {"a": 1})
    path = tmp_path_factory.mktemp("rt") / "g.csv"
    write_grid_csv(g, path)
    back = read_grid_csv(path)
    assert back.spec == spec and back.normalized == g.normalized
    np.testing.assert_array_equal(back.values, v)
    assert back.meta == {"a": 1}


def test_csv_layout(tmp_path):
    path = tmp_path / "z.csv"
    write_grid_csv(_grid(np.zeros((2, 2))), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# x_min=0.0 x_max=1.0 y_min=0.0 y_max=2.0 nx=2 ny=2 normalized=false"
    assert lines[1:] == ["0,0", "0,0"]


def test_csv_rows_run_along_x(tmp_path):
    path = tmp_path / "r.csv"
    write_grid_csv(_grid([[1, 2, 3], [4, 5, 6]]), path)
    assert path.read_text().splitlines()[1:] == ["1,2,3", "4,5,6"]


def test_csv_extra_meta_is_merged(tmp_path):
    path = tmp_path / "m.csv"
    g = DensityGrid2D(GridSpec2D(0, 1, 0, 1, 2, 2), np.ones((2, 2)), meta={"a": 1})
    write_grid_csv(g, path, meta={"b": [1, 2]})
    assert read_grid_csv(path).meta == {"a": 1, "b": [1, 2]}


def test_csv_truncated(tmp_path):
    path = tmp_path / "t.csv"
    write_grid_csv(_grid(np.ones((4, 3))), path)
    path.write_text("\n".join(path.read_text().splitlines()[:-1]) + "\n")
    with pytest.raises(GridParseError, match="expected 4 data rows, found 3"):
        read_grid_csv(path)


def test_csv_wrong_column_count_names_line(tmp_path):
    path = tmp_path / "c.csv"
    write_grid_csv(_grid(np.ones((5, 3))), path)
    lines = path.read_text().splitlines()
    lines[4] = "1,1"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(GridParseError, match="line 5") as exc:
        read_grid_csv(path)
    assert exc.value.line == 5


H2 = "# x_min=0 x_max=1 y_min=0 y_max=1 nx=2 ny=2 normalized=true\n"


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("1,2\n", 1),
    ("# x_min=0 x_max=1 y_min=0 y_max=1 nx=2\n1,1\n1,1\n", 1),
    (H2.replace("true", "maybe") + "1,1\n1,1\n", 1),
    (H2.replace("x_min=0 x_max=1", "x_min=1 x_max=0") + "1,1\n1,1\n", 1),
    (H2 + "1,1\nabc,1\n", 3),
    (H2 + "1,1\n1,1\n2,2\n", 4),
    (H2 + "# meta: {\n1,1\n1,1\n", 2),
    (H2 + "1,1\n-1,1\n", 3),
])
def test_csv_malformed(tmp_path, text, line):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(GridParseError) as exc:
        read_grid_csv(path)
    assert exc.value.line == line


def test_pgm_uniform_is_white(tmp_path):
    path = tmp_path / "u.pgm"
    write_heatmap_pgm(_grid(np.full((3, 4), 2.5)), path)
    data = path.read_bytes()
    assert data.startswith(b"P5\n4 3\n255\n")
    assert read_pgm(path).shape == (3, 4)
    assert np.all(read_pgm(path) == 255)


def test_pgm_single_bright_pixel_orientation(tmp_path):
    v = np.zeros((3, 4))
    v[0, 1] = 1.0  # lowest y row
    path = tmp_path / "s.pgm"
    write_heatmap_pgm(_grid(v), path)
    pix = read_pgm(path)
    assert pix[2, 1] == 255 and pix.sum() == 255


def test_pgm_gamma():
    pix = heatmap_pixels(np.array([[0.25, 1.0]]), gamma=0.5)
    np.testing.assert_array_equal(pix, [[128, 255]])
    with pytest.raises(ValueError):
        heatmap_pixels(np.ones((1, 1)), gamma=0)


def test_pgm_zero_grid_warns(tmp_path):
    with pytest.warns(RuntimeWarning, match="zero"):
        write_heatmap_pgm(_grid(np.zeros((2, 2))), tmp_path / "z.pgm")
    assert np.all(read_pgm(tmp_path / "z.pgm") == 0)


SPEC = GridSpec2D(0.0, 1.0, 0.0, 1.0, 50, 50)


def test_single_bump():
    p = find_peaks(DensityGrid2D(SPEC, _bump(SPEC, 0.31, 0.71, 0.05)))
    assert len(p) == 1
    x, y, _ = p.peaks[0]
    assert SPEC.cell_of(x, y) == SPEC.cell_of(0.31, 0.71)


def test_threshold_drops_small_bump():
    v = _bump(SPEC, 0.2, 0.2, 0.05) + _bump(SPEC, 0.81, 0.81, 0.05, 0.04)
    assert len(find_peaks(DensityGrid2D(SPEC, v), 0.05)) == 1
    assert len(find_peaks(DensityGrid2D(SPEC, v), 0.03)) == 2


def test_merge_radius():
    v = np.zeros(SPEC.shape)
    v[10, 10], v[10, 12], v[30, 30] = 3.0, 2.0, 1.0
    g = DensityGrid2D(SPEC, v)
    assert len(find_peaks(g, 0.1, merge_radius=3)) == 2
    assert len(find_peaks(g, 0.1, merge_radius=2)) == 3


def test_plateau_is_not_a_strict_maximum():
    v = np.zeros(SPEC.shape)
    v[5, 5] = v[5, 6] = 1.0
    assert len(find_peaks(DensityGrid2D(SPEC, v))) == 0


def test_window_restricts_candidates_and_reference():
    v = _bump(SPEC, 0.1, 0.1, 0.03) + _bump(SPEC, 0.71, 0.71, 0.05, 0.01)
    g = DensityGrid2D(SPEC, v)
    assert len(find_peaks(g)) == 1
    p = find_peaks(g, window=GridSpec2D(0.4, 1.0, 0.4, 1.0, 2, 2))
    assert len(p) == 1 and p.peaks[0][0] > 0.4
    assert len(find_peaks(g, window=GridSpec2D(2, 3, 2, 3, 2, 2))) == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-6, 1e6))
def test_peaks_scale_invariant_sorted_and_spaced(seed, scale):
    rng = np.random.default_rng(seed)
    v = sum(_bump(SPEC, *rng.uniform(0, 1, 2), 0.04, rng.uniform(0.1, 1)) for _ in range(5))
    a = find_peaks(DensityGrid2D(SPEC, v))
    b = find_peaks(DensityGrid2D(SPEC, v * scale))
    assert [p[:2] for p in a.peaks] == [p[:2] for p in b.peaks]
    d = [p[2] for p in a.peaks]
    assert d == sorted(d, reverse=True)
    cells = [SPEC.cell_of(x, y) for x, y, _ in a.peaks]
    for n, (i, j) in enumerate(cells):
        for i2, j2 in cells[:n]:
            assert max(abs(i - i2), abs(j - j2)) >= a.merge_radius


def test_find_peaks_threshold_contract():
    with pytest.raises(ValueError):
        find_peaks(DensityGrid2D(SPEC, np.ones(SPEC.shape)), 1.0)


def test_zero_grid_has_no_peaks():
    assert len(find_peaks(DensityGrid2D(SPEC, np.zeros(SPEC.shape)))) == 0


def test_summary_schema(tmp_path):
    v = np.zeros(SPEC.shape)
    v[20, 10] = 1.0
    s = build_summary("demo", np.int64(3), 10, (0.005, 0.005), find_peaks(DensityGrid2D(SPEC, v)),
                      verification={"tv": np.float64(0.1)}, note="x")
    write_json(s, tmp_path / "s.json")
    back = json.loads((tmp_path / "s.json").read_text())
    assert set(back) == {"scenario", "seed", "n_samples", "noise_stds", "peaks",
                         "kappa_probes", "verification", "extra"}
    assert back["peaks"][0]["x"] == pytest.approx(0.21)
    assert back["verification"]["tv"] == 0.1 and back["extra"] == {"note": "x"}
    assert "extra" not in build_summary("d", 0, 1, (1.0,))
