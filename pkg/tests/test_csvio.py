import numpy as np
import pytest

from fsml import csvio
from fsml.embedding import classical_mds, pairwise_euclidean
from fsml.errors import ParameterError
from fsml.fda import SampledCurve
from fsml.geometry import estimate_intrinsic_dim


def test_curves_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    curves = [SampledCurve(f"c{i}", np.sort(rng.random(7)), rng.normal(size=7) / 3) for i in range(4)]
    csvio.write_curves(tmp_path / "c.csv", curves)
    back = csvio.read_curves(tmp_path / "c.csv")
    assert [c.id for c in back] == [c.id for c in curves]
    for a, b in zip(curves, back):
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.values, b.values)


def test_curves_interleaved_rows_sorted(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("curve_id,t,value\nb,0.5,2\na,1,5\nb,0,1\na,0,4\n")
    curves = csvio.read_curves(p)
    assert [c.id for c in curves] == ["b", "a"]
    np.testing.assert_array_equal(curves[0].times, [0.0, 0.5])
    np.testing.assert_array_equal(curves[0].values, [1.0, 2.0])


def test_curves_errors(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("id,t,value\na,0,1\n")
    with pytest.raises(ParameterError, match="curve_id"):
        csvio.read_curves(p)
    p.write_text("curve_id,t,value\na,zero,1\n")
    with pytest.raises(ParameterError, match=":2"):
        csvio.read_curves(p)
    p.write_text("curve_id,t,value\n")
    with pytest.raises(ParameterError):
        csvio.read_curves(p)


def test_labels(tmp_path):
    p = tmp_path / "y.csv"
    csvio.write_labels(p, ["a", "b", "c"], [1, 0, 1])
    assert csvio.read_labels(p)[0] == ["a", "b", "c"]
    ids, y = csvio.read_labels(p, ["c", "a"])
    assert ids == ["c", "a"] and y.tolist() == [1, 1]
    with pytest.raises(ParameterError, match="z"):
        csvio.read_labels(p, ["a", "z"])


def test_distance_matrix_round_trip(tmp_path):
    D = pairwise_euclidean(np.random.default_rng(1).normal(size=(5, 3)))
    csvio.write_distance_matrix(tmp_path / "d.csv", list("abcde"), D)
    ids, back = csvio.read_distance_matrix(tmp_path / "d.csv")
    assert ids == list("abcde")
    np.testing.assert_array_equal(back, D)
    with pytest.raises(ParameterError):
        csvio.write_distance_matrix(tmp_path / "e.csv", list("ab"), D)


def test_embedding_export(tmp_path):
    P = np.random.default_rng(2).normal(size=(6, 2))
    emb = classical_mds(pairwise_euclidean(P), 2)
    side = csvio.write_embedding(tmp_path / "out" / "emb.csv", list("abcdef"), emb, [0, 1, 0, 1, 0, 1], xi=4.0)
    lines = (tmp_path / "out" / "emb.csv").read_text().splitlines()
    assert lines[0] == "curve_id,z1,z2,label"
    assert lines[1].startswith("a,") and lines[1].endswith(",0")
    assert float(lines[2].split(",")[1]) == emb.coords[1, 0]
    text = side.read_text()
    assert side.name == "emb.report.txt"
    assert "xi = 4" in text and "epsilon_mds" in text and "negative_eigenvalue_mass" in text
    assert len(text.splitlines()) == 5 + len(emb.eigenvalues)


def test_predictions_and_scores(tmp_path):
    p = tmp_path / "p.csv"
    csvio.write_predictions(p, ["a", "b"], [0, 2], np.array([[0.1, 0.2, 0.7], [1, 2, 3]]), [0, 1, 2])
    assert p.read_text().splitlines()[0] == "curve_id,predicted_label,score_0,score_1,score_2"
    csvio.write_predictions(p, ["a"], [1], np.array([[0.5]]), [0, 1])
    assert p.read_text().splitlines() == ["curve_id,predicted_label,score_1", "a,1,0.5"]
    csvio.write_predictions(p, ["a"], [1])
    assert p.read_text().splitlines() == ["curve_id,predicted_label", "a,1"]


def test_dim_diagnostics(tmp_path):
    X = np.random.default_rng(3).normal(size=(40, 2))
    est = estimate_intrinsic_dim(dist=pairwise_euclidean(X))
    csvio.write_dim_diagnostics(tmp_path / "dim.csv", [f"c{i}" for i in range(40)], est)
    lines = (tmp_path / "dim.csv").read_text().splitlines()
    assert lines[0].startswith(f"# dimension={est.dimension} raw=")
    assert lines[1] == "curve_id,mu,kept" and len(lines) == 42
