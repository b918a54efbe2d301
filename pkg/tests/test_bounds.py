import numpy as np
import pytest

from steerkit import bounds, families
from steerkit.errors import NoFlipFound
from steerkit.learn import common


class ThresholdModel(common.Model):
    """Synthetic predictor: steerable iff the F2 singular values exceed those at ``eta0``."""

    family = "oracle"

    def __init__(self, eta0):
        super().__init__("f2", common.Standardizer.identity(16))
        self.cut = 4 * eta0**2 / 9

    def decision(self, X):
        return self.cut - X[:, 0]


def test_first_window():
    grid = np.arange(6)
    assert bounds.first_window([1, -1, 1, -1, -1, -1], grid, 3) == 3
    with pytest.raises(NoFlipFound):
        bounds.first_window([1, -1, -1, 1, -1, -1], grid, 3)
    assert bounds.bound_or_sentinel([1] * 6, grid, 3) == bounds.SENTINEL


def test_monotone_bound_matches_scan():
    grid = bounds.param_grid(0.01)
    for k in (0, 17, 60, 98, 99, 100):
        labels = [1] * k + [-1] * (101 - k)
        assert bounds.monotone_bound(lambda i: labels[i], grid, 3) == bounds.bound_or_sentinel(labels, grid, 3)


def test_oracle_predictor_bound():
    models = {"SVM": {m: ThresholdModel(5 / 12) for m in (3, 4)}}
    curves = bounds.sweep_isotropic(models, [3, 4], sdp_trials=None)
    svm = curves[0]
    assert all(abs(b - 5 / 12) <= 0.01 for b in svm.bounds)
    assert curves[-1].method == "THEORY" and curves[-1].meta["constant"] == 5 / 12


def test_sdp_curve_sound():
    b = bounds.sdp_isotropic_bound(3, 5, seed=1)
    assert 5 / 12 - 0.01 <= b < 1.0


def test_sdp_curve_refinement_stable():
    coarse = bounds.sdp_isotropic_bound(3, 5, seed=2, grid_step=0.02)
    fine = bounds.sdp_isotropic_bound(3, 5, seed=2, grid_step=0.01)
    assert fine >= coarse - 0.02


def test_partial_reference_cell():
    b = bounds.sw_partial_bound(np.pi / 4, np.arccos(1 / np.sqrt(3)))
    assert b < 0.55
    assert b >= 0.48


def test_partial_surface_shape_and_product_row():
    model = ThresholdModel(0.5)
    model.feature_kind = "f2"
    surf = bounds.sweep_partial(model, [0.2, 0.5, 0.7], [0.4, 1.0])
    assert surf.bounds.shape == (3, 2)
    assert np.all(surf.bounds > 0.0)


def test_plot_data_round_trip(tmp_path):
    curves = [bounds.BoundCurve(m, [3, 4, 5, 6, 7], list(np.linspace(0.4, 0.6, 5) + i / 100))
              for i, m in enumerate(("SVM", "ANN", "BOOST", "SDP"))]
    curves.append(bounds.BoundCurve("THEORY", [], [], meta={"constant": bounds.THEORY}))
    path = tmp_path / "c.csv"
    bounds.emit_plot_data(curves, path)
    assert len(path.read_text().splitlines()) == 22  # header + 21 rows
    back = bounds.load_plot_data(path)
    for a, b in zip(curves, back):
        assert (a.method, a.grid, a.bounds) == (b.method, b.grid, b.bounds)
    assert back[-1].meta["constant"] == 5 / 12


def test_plot_data_empty_and_surface(tmp_path):
    path = tmp_path / "e.csv"
    bounds.emit_plot_data([], path)
    assert path.read_text() == "method,m,bound\n"
    surf = bounds.BoundSurface("SW", [0.1, 0.2], [0.3], [[0.5], [0.6]])
    bounds.emit_plot_data([surf], path)
    back = bounds.load_plot_data(path)[0]
    np.testing.assert_array_equal(back.bounds, surf.bounds)


def test_grid_validation():
    with pytest.raises(ValueError):
        bounds.param_grid(0.03)
    with pytest.raises(ValueError):
        bounds.BoundCurve("SVM", [4, 3], [0.5, 0.5])
