import warnings
from dataclasses import replace

import numpy as np
import pytest
import yaml

from oracles import naive_hamming_means, reaverage_csv
from vcsel_snn.bench import (ConfusionMatrix, ErrorCurve, IrisDataset, load_iris, raster_distance_report,
                             run_experiment, simulate_raster, split_train_test, sweep_training_size)
from vcsel_snn.config import ExperimentConfig
from vcsel_snn.errors import CalibrationMissing, ClassCountError, InvalidSize, ParseError
from vcsel_snn.readout import DegenerateLabels
from vcsel_snn.spikes import SpikeRaster

HEADER = "sepal_length,sepal_width,petal_length,petal_width,species\n"


def test_bundled_iris():
    d = load_iris()
    assert d.points.shape == (150, 4)
    assert [int(np.sum(d.labels == k)) for k in (1, 2, 3)] == [50, 50, 50]
    assert d.points[0].tolist() == [5.1, 3.5, 1.4, 0.2]


def _write(tmp_path, body):
    path = tmp_path / "iris.csv"
    path.write_text(HEADER + body)
    return path


def test_parse_error_reports_row_and_column(tmp_path):
    lines = load_iris_lines()
    lines[4] = "5.0,abc,1.4,0.2,setosa"
    with pytest.raises(ParseError) as info:
        load_iris(_write(tmp_path, "\n".join(lines) + "\n"))
    assert info.value.row == 6 and info.value.column == 2
    lines = load_iris_lines()
    lines[0] = "5.1,3.5,1.4,0.2,rose"
    with pytest.raises(ParseError) as info:
        load_iris(_write(tmp_path, "\n".join(lines) + "\n"))
    assert info.value.row == 2 and info.value.column == 5


def test_bad_header_and_class_counts(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c,d,e\n1,2,3,4,setosa\n")
    with pytest.raises(ParseError):
        load_iris(p)
    lines = load_iris_lines()[:-1]
    with pytest.raises(ClassCountError):
        load_iris(_write(tmp_path, "\n".join(lines) + "\n"))


def load_iris_lines():
    d = load_iris()
    names = ("setosa", "versicolor", "virginica")
    return [",".join(repr(float(v)) for v in p) + "," + names[k - 1] for p, k in zip(d.points, d.labels)]


def test_split_sizes_and_disjointness():
    d = load_iris()
    tr, te = split_train_test(d, 10, 3)
    assert tr.size == 30 and te.size == 120
    assert np.intersect1d(tr, te).size == 0
    assert [int(np.sum(d.labels[tr] == k)) for k in (1, 2, 3)] == [10, 10, 10]
    tr2, _ = split_train_test(d, 10, 3)
    np.testing.assert_array_equal(tr, tr2)
    for bad in (0, 50):
        with pytest.raises(InvalidSize):
            split_train_test(d, bad, 3)


def test_confusion_totals_and_csv(tmp_path):
    rng = np.random.default_rng(0)
    true = np.repeat([1, 2, 3], 40)
    pred = rng.integers(1, 4, 120)
    cm = ConfusionMatrix.from_labels(true, pred)
    np.testing.assert_array_equal(cm.counts.sum(axis=1), [40, 40, 40])
    assert cm.accuracy == pytest.approx(np.trace(cm.counts) / 120)
    assert cm.accuracy == pytest.approx(np.mean(true == pred))
    cm.to_csv(tmp_path / "c.csv")
    assert open(tmp_path / "c.csv").readline().strip() == "true_class,pred_1,pred_2,pred_3"
    np.testing.assert_array_equal(ConfusionMatrix.from_csv(tmp_path / "c.csv").counts, cm.counts)


def test_identical_rows_give_zero_intra_distance():
    rows = np.array([[1, 0, 1, 0], [0, 1, 1, 0], [1, 1, 0, 1]])
    labels = np.repeat([1, 2, 3], 5)
    rep = raster_distance_report(np.repeat(rows, 5, axis=0), labels)
    assert all(v == 0 for v in rep.intra.values())
    assert rep.separable


def test_coin_flip_raster_distances_near_half():
    rng = np.random.default_rng(1)
    states = rng.integers(0, 2, (150, 1024))
    rep = raster_distance_report(SpikeRaster(states, 250e-12, 1.0), np.repeat([1, 2, 3], 50))
    for v in list(rep.intra.values()) + list(rep.inter.values()):
        assert abs(v - 0.5) <= 0.05


def test_distances_match_pairwise_loop():
    rng = np.random.default_rng(2)
    states = rng.integers(0, 2, (18, 30))
    labels = np.repeat([1, 2, 3], 6)
    rep = raster_distance_report(states, labels)
    ref = naive_hamming_means(states, labels)
    for k, v in rep.intra.items():
        assert v == pytest.approx(ref[(k, k)], abs=1e-12)
    for k, v in rep.inter.items():
        assert v == pytest.approx(ref[k], abs=1e-12)


def test_error_curve_csv_mean_matches_reaverage(tmp_path):
    rng = np.random.default_rng(3)
    per = rng.random((10, 49)) / 3
    curve = ErrorCurve(np.arange(1, 50), per, per.mean(axis=0))
    curve.to_csv(tmp_path / "e.csv")
    np.testing.assert_allclose(curve.mean_error, reaverage_csv(tmp_path / "e.csv"), rtol=0, atol=1e-12)
    back = ErrorCurve.from_csv(tmp_path / "e.csv")
    np.testing.assert_array_equal(back.per_run_errors, per)
    lines = open(tmp_path / "e.csv").read().splitlines()
    assert len(lines) == 12 and lines[-1].startswith("mean,")
    curve.to_svg(tmp_path / "e.svg")


def test_uncalibrated_config_is_refused():
    with pytest.raises(CalibrationMissing):
        simulate_raster(ExperimentConfig(n_nodes=8), load_iris())


@pytest.fixture(scope="module")
def small_run():
    config = ExperimentConfig(n_nodes=16, dt=0.2e-12, calibration={"source": "test fixture"})
    data = load_iris()
    product = simulate_raster(config, data)
    return config, data, product


def test_experiment_report_shape(small_run, tmp_path):
    config, data, product = small_run
    report = run_experiment(config, data, product)
    assert report.confusion.counts.sum() == 120
    np.testing.assert_array_equal(report.confusion.counts.sum(axis=1), [40, 40, 40])
    assert report.raster.states.shape == (150, 16)
    paths = report.write(tmp_path, plot=True)
    assert set(paths) == {"raster", "confusion", "weights", "report", "raster_svg"}
    meta = yaml.safe_load(open(paths["report"]))
    assert meta["accuracy"] == pytest.approx(report.accuracy)
    assert meta["threshold"]["mode"] == "auto"


def test_replay_from_report_metadata(small_run, tmp_path):
    config, data, _ = small_run
    first = run_experiment(config, data)
    paths = first.write(tmp_path)
    meta = yaml.safe_load(open(paths["report"]))
    again = run_experiment(ExperimentConfig.from_dict(meta["config"]), data)
    np.testing.assert_array_equal(first.raster.states, again.raster.states)
    np.testing.assert_array_equal(first.weights.entries, again.weights.entries)
    np.testing.assert_array_equal(first.confusion.counts, again.confusion.counts)


def test_setosa_only_control_is_trivially_perfect(small_run):
    config, data, product = small_run
    idx = np.flatnonzero(data.labels == 1)
    setosa = IrisDataset(data.points[idx], data.labels[idx])
    sub = replace(product, states=product.states[idx])
    report = run_experiment(config, setosa, sub)
    assert report.accuracy == 1.0
    assert report.confusion.counts.shape == (1, 1)


def test_sweep_reuses_raster_and_single_run_mean(small_run):
    config, data, product = small_run
    curve = sweep_training_size(config, data, [1, 5, 10], 1, product=product)
    np.testing.assert_array_equal(curve.mean_error, curve.per_run_errors[0])
    curve3 = sweep_training_size(config, data, [1, 5, 10], 3, product=product)
    assert len(set(curve3.meta["split_seeds"])) == 3
    np.testing.assert_allclose(curve3.mean_error, curve3.per_run_errors.mean(axis=0))
    with pytest.raises(ValueError):
        sweep_training_size(config, data, [1], 0, product=product)
    with pytest.raises(InvalidSize):
        sweep_training_size(config, data, [50], 1, product=product)


def test_missing_class_warns():
    from vcsel_snn.bench import evaluate_split

    states = np.eye(6)
    labels = np.array([1, 1, 2, 2, 3, 3])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        evaluate_split(states, labels, np.array([0, 1, 2]), np.array([3, 4, 5]))
    assert any(issubclass(w.category, DegenerateLabels) for w in caught)
