"""Iris classification experiments on the simulated spiking network."""

import csv
import math
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from . import __version__
from .config import ExperimentConfig, parse_sizes
from .errors import CalibrationMissing, ClassCountError, DimensionMismatch, InvalidSize, ParseError
from .inputs import FEATURE_NAMES, FeatureVector, build_mask, mask_dataset, synthesize_waveform
from .laser import simulate
from .readout import one_hot, predict_many, train
from .spikes import SpikeRaster, auto_threshold, bin_and_threshold, spike_statistics

SPECIES = ("setosa", "versicolor", "virginica")


@dataclass
class IrisDataset:
    points: np.ndarray  # (n, 4) in cm
    labels: np.ndarray  # 1 = setosa, 2 = versicolor, 3 = virginica
    source: str = ""

    def __len__(self):
        return len(self.labels)

    def feature_vectors(self):
        return [FeatureVector.from_array(p) for p in self.points]

    def subset(self, idx):
        idx = np.asarray(idx)
        return IrisDataset(self.points[idx], self.labels[idx], self.source)


def load_iris(source=None):
    """Read and validate an Iris CSV (``sepal_length,...,species``).

    ``source=None`` loads the bundled copy. Rows are counted from 1 at the
    header line, columns from 1.
    """
    if source is None:
        text = resources.files("vcsel_snn").joinpath("data/iris.csv").read_text()
        name = "bundled iris.csv"
    else:
        with open(source, newline="") as fh:
            text = fh.read()
        name = str(source)
    rows = list(csv.reader(text.splitlines()))
    expected = list(FEATURE_NAMES) + ["species"]
    if not rows or [c.strip() for c in rows[0]] != expected:
        raise ParseError(f"header must be {','.join(expected)}", row=1)
    points, labels = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 5:
            raise ParseError(f"expected 5 fields, found {len(row)}", row=r, column=len(row) + 1)
        if len(row) > 5:
            raise ParseError(f"expected 5 fields, found {len(row)}", row=r, column=6)
        vals = []
        for c in range(4):
            try:
                vals.append(float(row[c]))
            except ValueError:
                raise ParseError(f"not a number: {row[c]!r}", row=r, column=c + 1) from None
        sp = row[4].strip().lower().removeprefix("iris-")
        if sp not in SPECIES:
            raise ParseError(f"unknown species {row[4]!r}", row=r, column=5)
        try:
            FeatureVector(*vals)
        except ValueError as exc:
            raise ParseError(str(exc), row=r) from None
        points.append(vals)
        labels.append(SPECIES.index(sp) + 1)
    labels = np.array(labels, dtype=int)
    counts = [int(np.sum(labels == k)) for k in (1, 2, 3)]
    if counts != [50, 50, 50]:
        raise ClassCountError(f"{name}: expected 50 points per class, got {dict(zip(SPECIES, counts))}")
    return IrisDataset(np.array(points, dtype=float), labels, name)


def split_train_test(dataset, train_per_class, seed):
    """Random per-class split; returns sorted (train, test) index arrays."""
    labels = dataset.labels if isinstance(dataset, IrisDataset) else np.asarray(dataset)
    if not 1 <= int(train_per_class) <= 49:
        raise InvalidSize(f"train_per_class must lie in [1, 49], got {train_per_class}")
    rng = np.random.default_rng(seed)
    train_idx = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if train_per_class >= members.size:
            raise InvalidSize(f"class {c} has only {members.size} points; cannot train on {train_per_class}")
        train_idx.append(rng.choice(members, size=int(train_per_class), replace=False))
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.setdiff1d(np.arange(labels.size), train_idx)
    return train_idx, test_idx


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted

    @classmethod
    def from_labels(cls, true, pred, n_classes=3):
        m = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(m, (np.asarray(true) - 1, np.asarray(pred) - 1), 1)
        return cls(m)

    @property
    def accuracy(self):
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else float("nan")

    def recall(self, k):
        row = self.counts[k - 1]
        return float(row[k - 1] / row.sum()) if row.sum() else float("nan")

    def to_csv(self, path):
        n = self.counts.shape[0]
        with open(path, "w") as fh:
            fh.write("true_class," + ",".join(f"pred_{j + 1}" for j in range(n)) + "\n")
            for i, row in enumerate(self.counts):
                fh.write(f"{i + 1}," + ",".join(str(int(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
        return cls(data[:, 1:])


@dataclass
class DistanceReport:
    intra: dict  # class -> mean normalized Hamming distance
    inter: dict  # (class_a, class_b) -> mean

    @property
    def separable(self):
        """True when every between-class mean exceeds both within-class means."""
        return all(v > self.intra[a] and v > self.intra[b] for (a, b), v in self.inter.items())

    def to_dict(self):
        return {"intra": {int(k): float(v) for k, v in self.intra.items()},
                "inter": {f"{a}-{b}": float(v) for (a, b), v in self.inter.items()}}


def _hamming(states):
    S = np.asarray(states, dtype=float)
    ones = S @ S.T
    diag = np.diag(ones)
    # mismatches = |a| + |b| - 2 a.b
    return (diag[:, None] + diag[None, :] - 2 * ones) / S.shape[1]


def raster_distance_report(raster, labels):
    """Mean pairwise normalized Hamming distances within and between classes."""
    states = raster.states if isinstance(raster, SpikeRaster) else np.asarray(raster)
    labels = np.asarray(labels)
    if states.shape[0] != labels.size:
        raise DimensionMismatch(f"raster has {states.shape[0]} rows but {labels.size} labels")
    H = _hamming(states)
    classes = [int(c) for c in np.unique(labels)]
    intra, inter = {}, {}
    for a in classes:
        ia = np.flatnonzero(labels == a)
        block = H[np.ix_(ia, ia)]
        npair = ia.size * (ia.size - 1)
        intra[a] = float(block.sum() / npair) if npair else 0.0
        for b in classes:
            if b > a:
                ib = np.flatnonzero(labels == b)
                inter[(a, b)] = float(H[np.ix_(ia, ib)].mean())
    return DistanceReport(intra, inter)


@dataclass
class ErrorCurve:
    training_sizes: np.ndarray
    per_run_errors: np.ndarray  # runs x sizes
    mean_error: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("run," + ",".join(str(int(s)) for s in self.training_sizes) + "\n")
            for r, row in enumerate(self.per_run_errors):
                fh.write(f"{r}," + ",".join(repr(float(v)) for v in row) + "\n")
            fh.write("mean," + ",".join(repr(float(v)) for v in self.mean_error) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            rows = list(csv.reader(fh))
        sizes = np.array([int(s) for s in rows[0][1:]])
        runs = np.array([[float(v) for v in r[1:]] for r in rows[1:] if r[0] != "mean"])
        mean = np.array([float(v) for v in next(r for r in rows if r[0] == "mean")[1:]])
        return cls(sizes, runs, mean)

    def to_svg(self, path):
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        for row in self.per_run_errors:
            ax.plot(self.training_sizes, row, color="tab:blue", alpha=0.2, lw=1)
        ax.plot(self.training_sizes, self.mean_error, color="navy", lw=2, label="mean")
        ax.set_xlabel("training points per class")
        ax.set_ylabel("classification error")
        ax.set_ylim(0, 1)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg")
        plt.close(fig)


@dataclass
class SimulationProduct:
    """Everything produced before the readout: raster, threshold and trace diagnostics."""

    raster: SpikeRaster
    states: np.ndarray  # rows indexed by data point id
    threshold: dict
    trace_stats: dict
    timings: dict
    trace: object = None


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    confusion: ConfusionMatrix
    accuracy: float
    raster: SpikeRaster
    weights: object
    train_idx: np.ndarray
    test_idx: np.ndarray
    threshold: dict
    trace_stats: dict
    distances: DistanceReport
    timings: dict
    labels: np.ndarray = None

    def metadata(self):
        return {
            "tool": "vcsel_snn",
            "version": __version__,
            "accuracy": self.accuracy,
            "confusion": self.confusion.counts.tolist(),
            "setosa_recall": self.confusion.recall(1),
            "train_indices": self.train_idx.tolist(),
            "test_size": int(self.test_idx.size),
            "threshold": self.threshold,
            "trace": self.trace_stats,
            "raster": {"n_points": self.raster.n_points, "n_nodes": self.raster.n_nodes,
                       "spike_fraction": float(self.raster.states.mean())},
            "distances": self.distances.to_dict(),
            "weights": {k: v for k, v in self.weights.training_meta.items() if k != "train_indices"},
            "timings": self.timings,
            "config": self.config.to_dict(),
        }

    def write(self, outdir, plot=False):
        """Write raster/confusion/weights CSVs and ``report.yaml``; returns name -> path."""
        import os

        os.makedirs(outdir, exist_ok=True)
        paths = {
            "raster": os.path.join(outdir, "raster.csv"),
            "confusion": os.path.join(outdir, "confusion.csv"),
            "weights": os.path.join(outdir, "weights.csv"),
            "report": os.path.join(outdir, "report.yaml"),
        }
        self.raster.to_csv(paths["raster"])
        self.confusion.to_csv(paths["confusion"])
        self.weights.to_csv(paths["weights"])
        with open(paths["report"], "w") as fh:
            yaml.safe_dump(_plain(self.metadata()), fh, sort_keys=False)
        if plot:
            paths["raster_svg"] = os.path.join(outdir, "raster.svg")
            self.raster.to_svg(paths["raster_svg"], title=f"{self.raster.n_nodes} nodes")
        return paths


def _plain(obj):
    """Recursively turn numpy scalars and arrays into plain Python for YAML."""
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, (str, int)) else k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _check_calibrated(config):
    if config.calibration is None:
        raise CalibrationMissing("laser operating point is not calibrated; run `calibrate` first "
                                 "or supply laser.calibration")


def simulate_raster(config, dataset, keep_trace=False, noise_seed=None):
    """Mask, synthesize, simulate and binarize; rows of ``states`` follow point ids.

    The mask always comes from ``config.seed``; ``noise_seed`` (default: the
    same seed) only drives the laser noise.
    """
    _check_calibrated(config)
    t0 = time.perf_counter()
    mask = build_mask(config.seed, config.n_nodes, 4, config.mask_distribution)
    seqs = mask_dataset(mask, dataset.points)
    wave = synthesize_waveform(seqs, dataset.labels, config.theta, config.sample_rate, config.gap,
                               order=config.order)
    t1 = time.perf_counter()
    noise_seed = config.seed if noise_seed is None else noise_seed
    trace = simulate(config.laser, wave, config.trace_sample_period, seed=noise_seed, dt=config.dt,
                     mode=config.simulation_mode, threads=config.threads)
    t2 = time.perf_counter()
    auto = auto_threshold(trace, k=config.auto_k)
    used = config.threshold if config.threshold_mode == "manual" else auto
    raster = bin_and_threshold(trace, wave.layout, config.theta, used, config.latency_offset)
    thr = {"mode": config.threshold_mode, "used": float(used), "auto": float(auto),
           "manual": None if config.threshold is None else float(config.threshold)}
    if config.threshold is not None and config.threshold_mode == "auto":
        other = bin_and_threshold(trace, wave.layout, config.theta, config.threshold, config.latency_offset)
    elif config.threshold_mode == "manual":
        other = bin_and_threshold(trace, wave.layout, config.theta, auto, config.latency_offset)
    else:
        other = None
    if other is not None:
        thr["auto_manual_disagreement"] = float(np.mean(other.states != raster.states))
    base = float(np.median(trace.samples))
    stats = spike_statistics(trace, used, baseline=base)
    trace_stats = {
        "baseline": base,
        "peak": float(trace.samples.max()),
        "spike_count": int(stats.spike_count),
        "median_fwhm": float(np.median(stats.widths)) if stats.spike_count else None,
        "duration": float(trace.samples.size * trace.sample_period),
    }
    timings = {"synthesis_s": t1 - t0, "simulation_s": t2 - t1, "detection_s": time.perf_counter() - t2}
    return SimulationProduct(raster, raster.by_point_id(), thr, trace_stats, timings,
                             trace if keep_trace else None)


def evaluate_split(states, labels, train_idx, test_idx, intercept=False, meta=None):
    """Fit the readout on ``train_idx`` and score ``test_idx``.

    The number of classes is the largest label, so a one-class dataset gets a
    single-column readout.
    """
    n_classes = int(np.max(labels))
    L = one_hot(labels[train_idx], n_classes)
    W = train(states[train_idx], L, intercept=intercept, meta=meta)
    pred = predict_many(W, states[test_idx])
    return W, ConfusionMatrix.from_labels(labels[test_idx], pred, n_classes)


def run_experiment(config, dataset=None, product=None):
    """Full pipeline for one configuration; ``product`` reuses an earlier simulation."""
    if dataset is None:
        dataset = load_iris(config.dataset)
    if product is None:
        product = simulate_raster(config, dataset)
    train_idx, test_idx = split_train_test(dataset, config.train_per_class, config.seed)
    W, cm = evaluate_split(product.states, dataset.labels, train_idx, test_idx, config.intercept,
                           meta={"seed": config.seed, "train_indices": train_idx.tolist()})
    dist = raster_distance_report(product.states, dataset.labels)
    return ExperimentReport(config, cm, cm.accuracy, product.raster, W, train_idx, test_idx,
                            product.threshold, product.trace_stats, dist, product.timings, dataset.labels)


def run_seed(seed, run):
    """Split seed for sweep run ``run``; independent streams per run."""
    return int(np.random.SeedSequence([int(seed), int(run)]).generate_state(1)[0])


def sweep_training_size(config, dataset=None, sizes=None, n_runs=None, product=None):
    """Classification error against training points per class.

    Each run draws a fresh split seed; the raster is simulated once and reused
    unless ``config.resimulate`` is set, in which case every run simulates the
    laser again with the run's seed (only meaningful with noise).
    """
    if dataset is None:
        dataset = load_iris(config.dataset)
    sizes = parse_sizes(config.sweep_sizes) if sizes is None else list(sizes)
    n_runs = config.sweep_runs if n_runs is None else int(n_runs)
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    for s in sizes:
        if not 1 <= s <= 49:
            raise InvalidSize(f"training size {s} outside [1, 49]")
    if product is None and not config.resimulate:
        product = simulate_raster(config, dataset)
    errors = np.empty((n_runs, len(sizes)))
    seeds = []
    for r in range(n_runs):
        seed_r = run_seed(config.seed, r)
        seeds.append(seed_r)
        prod = product
        if config.resimulate:
            prod = simulate_raster(config, dataset, noise_seed=seed_r)
        for j, s in enumerate(sizes):
            tr, te = split_train_test(dataset, s, seed_r)
            _, cm = evaluate_split(prod.states, dataset.labels, tr, te, config.intercept)
            errors[r, j] = 1.0 - cm.accuracy
    meta = {"split_seeds": seeds, "base_seed": config.seed, "mask_seed": config.seed,
            "resimulate": bool(config.resimulate)}
    return ErrorCurve(np.array(sizes), errors, errors.mean(axis=0), meta)
