import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from psskit.errors import InputError
from psskit.estimators import InnerPSS, OuterPSS, PointCloudPSS
from psskit.fixtures import disk_set, example6_1_set, gaussian_points
from psskit.moments import Box


@pytest.fixture(scope="module")
def disk_outer():
    return OuterPSS(degree=6).fit(disk_set())


def test_params_round_trip():
    est = OuterPSS(degree=4, order=3, rescale="off")
    params = est.get_params()
    assert params["degree"] == 4 and params["order"] == 3 and params["rescale"] == "off"
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(degree=6)
    assert est.degree == 6


def test_outer_predict_labels(disk_outer):
    X = np.array([[0.0, 0.0], [0.5, 0.5], [1.15, 1.15]])
    assert disk_outer.predict(X).tolist() == [1, 1, -1]
    np.testing.assert_allclose(disk_outer.decision_function(X), disk_outer.score_samples(X) - 1)
    assert disk_outer.w_ >= math.pi - 1e-3
    assert disk_outer.n_features_in_ == 2


def test_outer_contains_set_on_grid(disk_outer):
    t = np.linspace(-1, 1, 101)
    X = np.array([(a, b) for a in t for b in t if a * a + b * b <= 1])
    # boundary points touch p = 1 up to solver tolerance
    assert disk_outer.decision_function(X).min() >= -1e-6


def test_outer_accepts_json_dict():
    est = OuterPSS(degree=2).fit(disk_set().to_json())
    assert est.result_.kind == "outer"


def test_not_fitted_and_bad_input():
    with pytest.raises(NotFittedError):
        OuterPSS().predict([[0.0, 0.0]])
    with pytest.raises(InputError):
        OuterPSS().fit([[0.0, 0.0]])


def test_feature_count_checked(disk_outer):
    with pytest.raises(InputError):
        disk_outer.predict([[0.0, 0.0, 0.0]])


def test_outer_sample(disk_outer):
    batch = disk_outer.sample(200, seed=4)
    assert batch.samples.shape == (200, 2)
    assert disk_set().contains(batch.samples).all()


def test_inner_predict_inside_set():
    K = example6_1_set()
    # below degree 8 the optimum here is the trivial p = 1
    est = InnerPSS(degree=8).fit(K)
    t = np.linspace(0, 1, 120)
    grid = np.array([(K.box.a[0] + u * 1.4, K.box.a[1] + v * 1.5) for u in t for v in t])
    inside = grid[est.predict(grid) == 1]
    assert len(inside) > 0
    assert K.violation(inside).max() <= 1e-6


def test_point_cloud_fit():
    X = gaussian_points()
    est = PointCloudPSS(degree=2, box=([-1, -1], [1, 1])).fit(X)
    assert (est.predict(X) == 1).all()
    assert est.box_ == Box([-1, -1], [1, 1])
    assert not est.result_.certified


def test_point_cloud_default_box_pads_data():
    X = gaussian_points()
    est = PointCloudPSS(degree=2, grid=20).fit(X)
    lo, hi = X.min(axis=0), X.max(axis=0)
    assert np.all(np.array(est.box_.a) < lo) and np.all(np.array(est.box_.b) > hi)
