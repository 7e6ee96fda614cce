import warnings

import numpy as np
import pytest

from fsml.classify import KnnHead, LdaHead, SvmHead, knn_predict, make_head
from fsml.errors import ParameterError, StateError

HEADS = ("knn:5", "lda", "svm:0.01")


def blobs(seed, n=100, sd=0.2):
    rng = np.random.default_rng(seed)
    Z = np.vstack([rng.normal([-2.0, 0.0], sd, (n, 2)), rng.normal([2.0, 0.0], sd, (n, 2))])
    return Z, np.repeat([0, 1], n)


def test_knn_training_point_k1():
    Z, y = blobs(0)
    for j in (3, 150):
        assert knn_predict(Z, y, Z[j], 1)[0] == y[j]


def test_knn_tie_goes_to_zero():
    Z, y = blobs(1, n=10)
    assert knn_predict(Z, y, [[0.0, 0.0]], len(y))[0] == 0


def test_knn_distance_ties_use_smaller_index():
    Z = np.array([[1.0], [-1.0], [1.0]])
    assert knn_predict(Z, [1, 0, 0], [[0.0]], 1)[0] == 1
    assert knn_predict(Z, [0, 1, 1], [[0.0]], 1)[0] == 0


def test_knn_multiclass_vote_ties_smallest():
    Z = np.array([[0.0], [1.0], [2.0], [3.0]])
    assert knn_predict(Z, [2, 1, 2, 1], [[1.5]], 4)[0] == 1
    assert knn_predict(Z, [3, 3, 2, 5], [[0.0]], 3)[0] == 3


@pytest.mark.parametrize("spec", HEADS)
def test_blobs_held_out_accuracy(spec):
    acc = []
    for seed in range(20):
        Z, y = blobs(seed)
        Zt, yt = blobs(1000 + seed)
        acc.append(np.mean(make_head(spec).fit(Z, y).predict(Zt) == yt))
    assert np.mean(acc) > 0.99


@pytest.mark.parametrize("spec", HEADS)
def test_heads_are_deterministic(spec):
    Z, y = blobs(4, sd=1.5)
    Zt, _ = blobs(5, sd=1.5)
    a = make_head(spec).fit(Z, y).predict(Zt)
    b = make_head(spec).fit(Z, y).predict(Zt)
    np.testing.assert_array_equal(a, b)


def test_lda_perpendicular_bisector():
    # equal-size classes with the same spread about means (0,0) and (4,2)
    offs = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    m0, m1 = np.array([0.0, 0.0]), np.array([4.0, 2.0])
    Z = np.vstack([m0 + offs, m1 + offs])
    y = np.repeat([0, 1], 4)
    head = LdaHead().fit(Z, y)
    mid = (m0 + m1) / 2
    normal = m1 - m0
    along = np.array([-normal[1], normal[0]])
    for s in (-3.0, 0.0, 5.0):
        p = mid + s * along
        sc = head.scores(p)[0]
        assert sc[0] == pytest.approx(sc[1], abs=1e-10)
        assert head.predict(p - 1e-6 * normal)[0] == 0
        assert head.predict(p + 1e-6 * normal)[0] == 1


def test_lda_one_point_per_class_uses_nearest_mean():
    Z = np.array([[0.0, 0.0], [3.0, 1.0], [-2.0, 5.0]])
    y = np.array([0, 1, 2])
    with pytest.warns(RuntimeWarning, match="singular"):
        head = LdaHead().fit(Z, y)
    q = np.random.default_rng(0).uniform(-4, 6, (200, 2))
    nearest = np.argmin(((q[:, None] - Z[None]) ** 2).sum(-1), axis=1)
    np.testing.assert_array_equal(head.predict(q), nearest)


def test_lda_collinear_data_warns_and_stays_finite():
    t = np.linspace(-1, 1, 20)
    Z = np.column_stack([t, 2 * t])
    y = (t > 0).astype(int)
    with pytest.warns(RuntimeWarning):
        head = LdaHead().fit(Z, y)
    assert np.all(np.isfinite(head.scores(Z)))
    cov = head.cov_
    np.testing.assert_array_equal(cov, cov.T)


def test_svm_separable_training_accuracy():
    rng = np.random.default_rng(3)
    Z = np.vstack([rng.uniform(-3, -1, (40, 2)), rng.uniform(1, 3, (40, 2))])
    y = np.repeat([0, 1], 40)
    assert np.all(SvmHead(0.01).fit(Z, y).predict(Z) == y)


def test_svm_multiclass_one_vs_rest():
    rng = np.random.default_rng(4)
    centres = np.array([[0.0, 6.0], [6.0, -3.0], [-6.0, -3.0]])
    Z = np.vstack([rng.normal(c, 0.4, (30, 2)) for c in centres])
    y = np.repeat([0, 1, 2], 30)
    head = SvmHead(0.01).fit(Z, y)
    assert head.weights_.shape == (3, 3)
    assert np.mean(head.predict(Z) == y) == 1.0


def test_svm_zero_score_goes_to_smaller_label():
    head = SvmHead(0.01).fit(*blobs(0))
    head.weights_ = np.zeros_like(head.weights_)
    assert head.predict([[5.0, 5.0]])[0] == 0


def test_single_class_and_unfitted_errors():
    Z, _ = blobs(0)
    for head in (LdaHead(), SvmHead()):
        with pytest.raises(StateError):
            head.fit(Z, np.zeros(len(Z), dtype=int))
        with pytest.raises(StateError):
            head.predict(Z)
    with pytest.raises(StateError):
        KnnHead(1).predict(Z)
    with pytest.raises(StateError):
        knn_predict(np.zeros((0, 2)), [], [[0.0, 0.0]], 1)


def test_parameter_errors():
    Z, y = blobs(0, n=3)
    with pytest.raises(ParameterError):
        KnnHead(0)
    with pytest.raises(ParameterError):
        KnnHead(7).fit(Z, y)
    with pytest.raises(ParameterError):
        SvmHead(0.0)
    with pytest.raises(ParameterError):
        make_head("tree")


def test_make_head_specs():
    assert make_head("knn").spec == "knn:20"
    assert make_head("KNN:5").k == 5
    assert make_head("svm").cost == 0.01
    h = LdaHead()
    assert make_head(h) is h


def test_from_state_round_trip():
    Z, y = blobs(7, sd=1.0)
    Zt, _ = blobs(8, sd=1.0)
    for head, rebuild in (
        (KnnHead(5), lambda h, s: KnnHead.from_state(h.k, s)),
        (LdaHead(), lambda h, s: LdaHead.from_state(s)),
        (SvmHead(0.05), lambda h, s: SvmHead.from_state(h.cost, s)),
    ):
        head.fit(Z, y)
        copy = rebuild(head, {k: np.array(v) for k, v in head.state().items()})
        np.testing.assert_array_equal(copy.predict(Zt), head.predict(Zt))
        if head.scores(Zt) is not None:
            np.testing.assert_array_equal(copy.scores(Zt), head.scores(Zt))


def test_no_warning_on_regular_lda():
    Z, y = blobs(2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        LdaHead().fit(Z, y)
