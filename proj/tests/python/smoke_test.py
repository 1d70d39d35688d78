"""Smoke tests for the _cvxreg extension module."""

import math
import os
import tempfile

import numpy as np

import cvxreg


def test_cr_projection_oracle():
    data = cvxreg.Dataset(np.array([[0.0], [1.0], [2.0]]), np.array([0.0, 1.0, 0.0]))
    model = cvxreg.fit(data, cvxreg.cr())
    assert np.allclose(model.values, [1 / 3] * 3, atol=1e-6)
    assert abs(model.fit_stats.sse - 2 / 9) < 1e-6
    assert model.fit_stats.solver_status == "optimal"
    assert abs(model(np.array([1.0])) - 1 / 3) < 1e-6
    # convexity of the representor
    left, right = model(np.array([0.5])), model(np.array([1.5]))
    assert model(np.array([1.0])) <= 0.5 * (left + right) + 1e-9


def test_wrcr_pinned_mean():
    y = np.array([1.0, 3.0, 2.0, 4.0])
    data = cvxreg.Dataset(np.arange(4, dtype=float).reshape(-1, 1), y)
    model = cvxreg.fit(data, cvxreg.wrcr(np.zeros(1), np.zeros(1)))
    assert np.allclose(model.values, y.mean(), atol=1e-7)


def test_model_roundtrip():
    data = cvxreg.Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
    model = cvxreg.fit(data, cvxreg.cr())
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.json")
        cvxreg.save_model(model, path)
        back = cvxreg.load_model(path)
    assert np.array_equal(np.asarray(back.values), np.asarray(model.values))
    assert np.array_equal(np.asarray(back.betas), np.asarray(model.betas))
    assert back.to_json() == model.to_json()


def test_kfold_and_percentiles():
    folds = cvxreg.kfold_split(10, 5, seed=3)
    assert sorted(i for fold in folds for i in fold) == list(range(10))
    assert folds == cvxreg.kfold_split(10, 5, seed=3)
    lo, hi = cvxreg.percentile_bounds(np.arange(1.0, 11.0).reshape(-1, 1), 0.49)
    assert math.isclose(lo[0], 5.41) and math.isclose(hi[0], 5.59)


def test_cross_validate_singleton():
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 10, size=(20, 1))
    y = 0.1 * x[:, 0] ** 2 + rng.normal(0, 0.1, size=20)
    data = cvxreg.Dataset(x, y)
    result = cvxreg.cross_validate(data, cvxreg.pcr(0.0), "lambda", [0.0], k=4, seed=1)
    assert result["best"] == 0.0
    assert len(result["curve"]) == 1


def test_monotone_alcr():
    rng = np.random.default_rng(7)
    x = rng.uniform(1, 10, size=(15, 2))
    y = x.sum(axis=1) + rng.normal(0, 0.2, size=15)
    data = cvxreg.Dataset(x, y)
    slope = cvxreg.reference_vector_ols(data)
    model = cvxreg.fit(data, cvxreg.alcr(slope, 0.5, monotone=True))
    assert np.asarray(model.betas).min() >= -1e-6
    model.validate()


def test_errors_surface():
    data = cvxreg.Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
    try:
        cvxreg.fit(data, cvxreg.wrcr(np.ones(1), np.zeros(1)))  # l0 > u0
    except cvxreg.CvxregError:
        pass
    else:
        raise AssertionError("expected CvxregError for l0 > u0")


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for test in tests:
        test()
        print(f"ok {test.__name__}")
    print(f"{len(tests)} python smoke tests passed")


if __name__ == "__main__":
    main()
