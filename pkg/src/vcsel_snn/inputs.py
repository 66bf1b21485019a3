"""Feature masking and time-multiplexed drive waveform synthesis.

Each 4-feature data point is projected onto ``n_nodes`` virtual nodes by a
random mask, the node values are held for one node duration each, points are
concatenated with zero-modulation gaps between them, and the whole waveform is
affinely scaled into the modulator range [0, 1].
"""

import csv
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import DimensionMismatch, EmptyInput, InvalidDimension

FEATURE_NAMES = ("sepal_length", "sepal_width", "petal_length", "petal_width")
MASK_DISTRIBUTIONS = ("uniform01", "uniform11", "bernoulli")


@dataclass(frozen=True)
class FeatureVector:
    sepal_length: float
    sepal_width: float
    petal_length: float
    petal_width: float

    def __post_init__(self):
        for name in FEATURE_NAMES:
            v = getattr(self, name)
            if not (0.0 < v < 10.0):
                raise ValueError(f"{name}={v} outside the (0, 10) cm sanity range")

    @classmethod
    def from_array(cls, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (4,):
            raise DimensionMismatch(f"expected 4 features, got shape {values.shape}")
        return cls(*map(float, values))

    def as_array(self):
        return np.array([getattr(self, n) for n in FEATURE_NAMES])


@dataclass
class MaskMatrix:
    entries: np.ndarray
    seed: int
    distribution: str = "uniform01"

    @property
    def n_nodes(self):
        return self.entries.shape[0]


def build_mask(seed, n_nodes, n_features=4, distribution="uniform01"):
    """Random input-weight matrix of shape ``(n_nodes, n_features)``.

    ``distribution`` is one of ``uniform01`` (default), ``uniform11`` or
    ``bernoulli`` (entries in {0, 1}).
    """
    if n_nodes < 1 or n_features < 1:
        raise InvalidDimension(f"mask needs positive dimensions, got ({n_nodes}, {n_features})")
    rng = np.random.default_rng(seed)
    shape = (int(n_nodes), int(n_features))
    if distribution == "uniform01":
        entries = rng.uniform(0.0, 1.0, shape)
    elif distribution == "uniform11":
        entries = rng.uniform(-1.0, 1.0, shape)
    elif distribution == "bernoulli":
        entries = rng.integers(0, 2, shape).astype(float)
    else:
        raise ValueError(f"unknown mask distribution {distribution!r}; use one of {MASK_DISTRIBUTIONS}")
    return MaskMatrix(entries, int(seed), distribution)


def mask_datapoint(mask, features):
    """Node sequence ``mask @ features`` for one data point."""
    M = mask.entries if isinstance(mask, MaskMatrix) else np.asarray(mask, dtype=float)
    x = features.as_array() if isinstance(features, FeatureVector) else np.asarray(features, dtype=float)
    if M.ndim != 2 or x.ndim != 1 or M.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"mask shape {M.shape} incompatible with features shape {x.shape}")
    return M @ x


def mask_dataset(mask, X):
    """Node sequences for every row of ``X``; shape ``(n_points, n_nodes)``."""
    M = mask.entries if isinstance(mask, MaskMatrix) else np.asarray(mask, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != M.shape[1]:
        raise DimensionMismatch(f"data shape {X.shape} incompatible with mask shape {M.shape}")
    return X @ M.T


@dataclass(frozen=True)
class AffineScale:
    """Map ``v -> (v - offset) / span``; a zero span sends everything to 0."""

    offset: float
    span: float

    @classmethod
    def fit(cls, values):
        values = np.asarray(values, dtype=float)
        lo, hi = float(values.min()), float(values.max())
        return cls(lo, hi - lo)

    def __call__(self, values):
        values = np.asarray(values, dtype=float)
        if self.span == 0.0:
            return np.zeros_like(values)
        return (values - self.offset) / self.span


@dataclass
class Layout:
    """Where each data point sits in a drive waveform.

    ``segments`` rows are ``(data_point_id, start_sample, end_sample)`` with
    ``end_sample`` exclusive, in waveform order.
    """

    segments: np.ndarray
    sample_rate: float
    node_duration: float
    n_nodes: int

    @property
    def n_points(self):
        return len(self.segments)

    @property
    def point_ids(self):
        return self.segments[:, 0].copy()

    @property
    def samples_per_node(self):
        return _integer_ratio(self.sample_rate * self.node_duration, "sample_rate * node_duration")

    def to_dict(self):
        return {
            "sample_rate": float(self.sample_rate),
            "node_duration": float(self.node_duration),
            "n_nodes": int(self.n_nodes),
            "segments": self.segments.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        segs = np.asarray(d["segments"], dtype=np.int64).reshape(-1, 3)
        return cls(segs, float(d["sample_rate"]), float(d["node_duration"]), int(d["n_nodes"]))


@dataclass
class DriveWaveform:
    samples: np.ndarray
    sample_rate: float
    node_duration: float
    gap_duration: float
    layout: Layout
    scale: AffineScale = field(default_factory=lambda: AffineScale(0.0, 1.0))

    @property
    def duration(self):
        return self.samples.size / self.sample_rate

    def node_values(self, k):
        """Scaled node levels of the ``k``-th segment, decimated back to one value per node."""
        _, start, end = self.layout.segments[k]
        return self.samples[start:end:self.layout.samples_per_node].copy()

    def to_csv(self, path, meta_path=None):
        """Write ``index,level`` rows plus a YAML sidecar with timing and layout."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "level"])
            for i, v in enumerate(self.samples):
                w.writerow([i, repr(float(v))])
        meta_path = meta_path or f"{path}.meta.yaml"
        meta = {
            "theta": float(self.node_duration),
            "sample_rate": float(self.sample_rate),
            "gap": float(self.gap_duration),
            "scale": {"offset": self.scale.offset, "span": self.scale.span},
            "layout": self.layout.to_dict(),
        }
        with open(meta_path, "w") as fh:
            yaml.safe_dump(meta, fh, sort_keys=False)
        return meta_path

    @classmethod
    def from_csv(cls, path, meta_path=None):
        meta_path = meta_path or f"{path}.meta.yaml"
        with open(meta_path) as fh:
            meta = yaml.safe_load(fh)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        samples = np.array([float(r[1]) for r in rows[1:]])
        return cls(
            samples,
            meta["sample_rate"],
            meta["theta"],
            meta["gap"],
            Layout.from_dict(meta["layout"]),
            AffineScale(meta["scale"]["offset"], meta["scale"]["span"]),
        )


def _integer_ratio(x, what):
    n = int(round(x))
    if n < 0 or abs(x - n) > 1e-6 * max(1.0, abs(x)):
        raise ValueError(f"{what} must be a non-negative integer, got {x}")
    return n


def species_order(labels):
    """Stable ordering that groups points by class index (1, then 2, then 3)."""
    return np.argsort(np.asarray(labels), kind="stable")


def synthesize_waveform(sequences, labels=None, theta=250e-12, sample_rate=12e9, gap=2e-9,
                        order="species", scale=None):
    """Concatenate node sequences into one drive waveform.

    Parameters
    ----------
    sequences : (n_points, n_nodes) array of raw node values.
    labels : class index per point; needed for ``order="species"``.
    theta : node duration in seconds.
    sample_rate : waveform sample rate (samples/s); ``sample_rate * theta``
        must be an integer.
    gap : zero-modulation time between consecutive points (no trailing gap).
    order : ``"species"`` groups by label, ``"given"`` keeps input order, or an
        explicit permutation of point indices.
    scale : an :class:`AffineScale`; fitted to the global min/max when omitted.
    """
    seqs = np.asarray(sequences, dtype=float)
    if seqs.size == 0 or seqs.ndim != 2 or seqs.shape[0] == 0:
        if seqs.ndim not in (1, 2):
            raise DimensionMismatch("sequences must be a 2-D array")
        raise EmptyInput("no node sequences to synthesize")
    if gap < 0:
        raise ValueError("gap must be non-negative")
    n_points, n_nodes = seqs.shape
    spn = _integer_ratio(sample_rate * theta, "sample_rate * theta")
    if spn == 0:
        raise ValueError("sample_rate * theta must be at least 1")
    n_gap = _integer_ratio(sample_rate * gap, "sample_rate * gap")

    if isinstance(order, str):
        if order == "species":
            if labels is None:
                raise ValueError("species ordering needs labels")
            if len(labels) != n_points:
                raise DimensionMismatch("labels length differs from number of sequences")
            perm = species_order(labels)
        elif order == "given":
            perm = np.arange(n_points)
        else:
            raise ValueError(f"unknown order {order!r}")
    else:
        perm = np.asarray(order, dtype=int)
        if sorted(perm.tolist()) != list(range(n_points)):
            raise ValueError("explicit order must be a permutation of point indices")

    if scale is None:
        scale = AffineScale.fit(seqs)
    scaled = np.clip(scale(seqs), 0.0, 1.0)

    seg_len = n_nodes * spn
    total = n_points * seg_len + (n_points - 1) * n_gap
    samples = np.zeros(total)
    segments = np.empty((n_points, 3), dtype=np.int64)
    pos = 0
    for k, idx in enumerate(perm):
        samples[pos:pos + seg_len] = np.repeat(scaled[idx], spn)
        segments[k] = (idx, pos, pos + seg_len)
        pos += seg_len + n_gap
    layout = Layout(segments, float(sample_rate), float(theta), n_nodes)
    return DriveWaveform(samples, float(sample_rate), float(theta), float(gap), layout, scale)
