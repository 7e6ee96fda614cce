import numpy as np
import pytest

from conftest import flat_dataset
from fsml.errors import FoldConstructionError, ParameterError
from fsml.fda import pairwise_l2
from fsml.tuning import CvPlan, CvResult, default_h_grid, default_xi_grid, make_folds, nested_cv_select


def test_plan_validation():
    for bad in (dict(folds=1), dict(xi_grid=()), dict(h_grid=()), dict(xi_grid=(-1.0,)),
                dict(h_grid=(0.0,)), dict(xi_grid=(4.0, 1.0))):
        with pytest.raises(ParameterError):
            CvPlan(**bad)


@pytest.mark.parametrize("stratify", [True, False])
def test_folds_partition(stratify):
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 53)
    f = make_folds(y, 10, np.random.default_rng(1), stratify)
    sizes = np.bincount(f, minlength=10)
    assert sizes.sum() == 53 and sizes.max() - sizes.min() <= 1
    for k in range(10):
        assert set(np.unique(y[f != k])) == {0, 1}


def test_folds_stratified_counts():
    y = np.repeat([0, 1, 2], [30, 20, 12])
    f = make_folds(y, 10, np.random.default_rng(5))
    for c in range(3):
        counts = np.bincount(f[y == c], minlength=10)
        assert counts.max() - counts.min() <= 1


def test_folds_deterministic():
    y = np.arange(40) % 2
    a = make_folds(y, 5, np.random.default_rng(9))
    b = make_folds(y, 5, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


def test_fold_construction_errors():
    with pytest.raises(FoldConstructionError):
        make_folds([0, 1, 0], 5, np.random.default_rng(0))
    # a single member of class 1 cannot appear in every training complement
    with pytest.raises(FoldConstructionError):
        make_folds([0] * 9 + [1], 5, np.random.default_rng(0))
    with pytest.raises(FoldConstructionError):
        make_folds([0] * 9 + [1], 5, np.random.default_rng(0), stratify=False)


def _cv(X, w, y, plan, heads=("knn:20",), d=2):
    D = pairwise_l2(X, w)  # flat data: geodesic equals L2
    return nested_cv_select(X, w, y, D, plan, heads, 15, d)


def test_singleton_grids():
    X, w, Z, _ = flat_dataset(60, 1)
    y = (Z[:, 0] > 0).astype(int)
    cv = _cv(X, w, y, CvPlan(5, (0.0,), (0.7,), 3))
    assert cv.selected() == (0.0, 0.7)
    assert cv.h_inner.shape == (1, 5)


def test_cv_bitwise_reproducible_and_rows():
    X, w, Z, _ = flat_dataset(60, 2)
    y = (Z[:, 0] + 0.5 * Z[:, 1] > 0).astype(int)
    plan = CvPlan(5, (0.0, 1.0, 9.0), (0.3, 0.6, 1.2), 11)
    a = _cv(X, w, y, plan, ("knn:5", "lda"))
    b = _cv(X, w, y, plan, ("knn:5", "lda"))
    for h in a.heads:
        np.testing.assert_array_equal(a.misclassified[h], b.misclassified[h])
    np.testing.assert_array_equal(a.inner_loss, b.inner_loss)
    rows = a.rows("lda")
    assert len(rows) == 15 and rows[0][:2] == (0.0, 0) and rows[-1][:2] == (9.0, 4)
    assert sum(r[2] for r in rows) == a.cv_loss("lda").sum()
    xi, h = a.selected("lda")
    k = a.xi_index("lda")
    assert xi == plan.xi_grid[k] and h == pytest.approx(np.mean(a.h_inner[k]))
    assert np.all(np.isin(a.h_inner, plan.h_grid))


def test_ties_pick_smaller_xi():
    plan = CvPlan(2, (0.0, 1.0, 4.0), (0.5, 1.0), 0)
    miss = {"knn:20": np.array([[3, 1], [2, 0], [1, 1]])}
    h = np.array([[0.5, 0.5], [1.0, 0.5], [0.5, 0.5]])
    cv = CvResult(plan, ("knn:20",), miss, h, np.zeros((3, 2, 2)), np.zeros(4, dtype=int))
    assert cv.xi_index() == 1
    assert cv.selected() == (1.0, 0.75)


def test_duplicated_separable_dataset():
    # labels unrelated to position; every curve appears twice, so the held-out
    # copy sits on its training twin, which the penalty pulls to its class
    X, w, _, _ = flat_dataset(40, 6)
    y = np.random.default_rng(6).integers(0, 2, 40)
    X2, y2 = np.vstack([X, X]), np.concatenate([y, y])
    D = pairwise_l2(X2, w)
    big = float(10 * D.max()) ** 2
    plan = CvPlan(5, (0.0, big), (0.2, 0.5), 1)
    cv = nested_cv_select(X2, w, y2, D, plan, ("knn:20",), 15, 2)
    loss = cv.cv_loss()
    assert loss[1] <= loss[0]
    assert cv.selected()[0] == big


def test_default_grids():
    X, w, _, _ = flat_dataset(50, 7)
    D = pairwise_l2(X, w)
    xi = default_xi_grid(D)
    off = D[~np.eye(50, dtype=bool)]
    assert xi[0] == 0.0 and len(xi) == 5
    np.testing.assert_allclose(np.sqrt(xi[1:]), np.quantile(off, [0.25, 0.5, 0.75, 0.9]))
    h = default_h_grid(X, w, k_pca=15)
    assert len(h) == 7 and list(h) == sorted(h)
    nn = np.sort(D + np.diag(np.full(50, np.inf)), axis=1)
    assert h[0] == pytest.approx(0.5 * np.median(nn[:, 0]))
    assert h[-1] == pytest.approx(np.median(nn[:, 14]))
    assert default_h_grid(dist=D) == h
    CvPlan(10, xi, h)  # ascending, valid


def test_default_h_grid_duplicates():
    D = np.zeros((5, 5))
    assert default_h_grid(dist=D) == (1.0,)


def test_model_ii_prefers_positive_penalty():
    from fsml.pipeline import FitConfig, compute_geometry, prepare
    from fsml.synth import SynthSpec, generate

    chosen = []
    for seed in range(20):
        sim = generate(SynthSpec("ii", 200, 50, True, seed))
        cfg = FitConfig(d=2)
        data = prepare(sim.sampled_curves(), sim.labels, cfg)
        geom = compute_geometry(data, cfg)
        plan = CvPlan(10, tuple(s * s for s in (0, 5, 10, 20, 40)), default_h_grid(dist=geom.dist_l2, count=5), seed)
        cv = nested_cv_select(data.values, data.weights, data.labels, geom.distances, plan, ("knn:20",), 15, 2)
        chosen.append(np.sqrt(cv.selected()[0]))
    assert np.mean(np.array(chosen) >= 5) >= 0.6
