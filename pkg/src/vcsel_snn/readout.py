"""Linear output layer: least-squares fit of spike rasters to one-hot labels.

The weights solve ``S @ W = L`` in the least-squares sense using the
Moore-Penrose pseudoinverse of the binary raster ``S``, computed from a
truncated SVD so rank-deficient rasters (duplicate spike patterns) still yield
the minimum-norm solution.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyTrainingSet

N_CLASSES = 3


class DegenerateLabels(UserWarning):
    """Raised as a warning when a class has no training examples."""


def one_hot(labels, n_classes=N_CLASSES):
    """Label matrix with a single 1 per row; ``labels`` are 1-based class indices."""
    labels = np.asarray(labels, dtype=int)
    if labels.ndim != 1:
        raise DimensionMismatch("labels must be one-dimensional")
    if labels.size and (labels.min() < 1 or labels.max() > n_classes):
        raise ValueError(f"class indices must lie in 1..{n_classes}")
    L = np.zeros((labels.size, n_classes))
    L[np.arange(labels.size), labels - 1] = 1.0
    return L


def _check_label_matrix(L):
    L = np.asarray(L, dtype=float)
    if L.ndim != 2:
        raise DimensionMismatch("label matrix must be two-dimensional")
    ok = np.all((L == 0) | (L == 1)) and np.all(L.sum(axis=1) == 1)
    if not ok:
        raise ValueError("label matrix rows must be one-hot")
    return L


@dataclass
class ReadoutWeights:
    entries: np.ndarray
    training_meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return self.entries.shape[0] - (1 if self.training_meta.get("intercept") else 0)

    def to_csv(self, path):
        """Write the matrix with ``# key: value`` header lines carrying the metadata."""
        with open(path, "w", newline="") as fh:
            for key, value in self.training_meta.items():
                fh.write(f"# {key}: {json.dumps(_jsonable(value))}\n")
            fh.write(",".join(f"class_{j + 1}" for j in range(self.entries.shape[1])) + "\n")
            for row in self.entries:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        meta = {}
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition(":")
                    meta[key.strip()] = json.loads(value)
                elif line.startswith("class_"):
                    continue
                elif line:
                    rows.append([float(v) for v in line.split(",")])
        return cls(np.array(rows), meta)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass
class Prediction:
    scores: np.ndarray
    class_index: int


def pinv_min_norm(S, rtol=None):
    """Pseudoinverse of ``S`` and its numerical rank.

    Singular values below ``rtol * sigma_max`` are discarded; the default
    ``rtol`` is ``1e-10 * max(S.shape)``.
    """
    S = np.asarray(S, dtype=float)
    if rtol is None:
        rtol = 1e-10 * max(S.shape)
    U, sigma, Vt = np.linalg.svd(S, full_matrices=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return np.zeros(S.T.shape), 0
    keep = sigma > rtol * sigma[0]
    rank = int(keep.sum())
    inv = (Vt[:rank].T / sigma[:rank]) @ U[:, :rank].T
    return inv, rank


def train(S, L, *, intercept=False, meta=None):
    """Fit readout weights ``W = pinv(S) @ L``.

    Parameters
    ----------
    S : (n_train, n_nodes) array of 0/1 node states.
    L : (n_train, 3) one-hot label matrix.
    intercept : append a constant column to ``S`` before fitting (off by default).
    meta : extra entries merged into ``training_meta`` (seed, indices, ...).
    """
    S = np.asarray(S, dtype=float)
    L = _check_label_matrix(L)
    if S.ndim != 2:
        raise DimensionMismatch("raster must be two-dimensional")
    if S.shape[0] == 0:
        raise EmptyTrainingSet("no training rows")
    if S.shape[0] != L.shape[0]:
        raise DimensionMismatch(f"raster has {S.shape[0]} rows but labels have {L.shape[0]}")
    if np.any(L.sum(axis=0) == 0):
        missing = [int(j) + 1 for j in np.flatnonzero(L.sum(axis=0) == 0)]
        warnings.warn(f"classes absent from training labels: {missing}", DegenerateLabels, stacklevel=2)
    if intercept:
        S = np.hstack([S, np.ones((S.shape[0], 1))])
    inv, rank = pinv_min_norm(S)
    W = inv @ L
    residual = float(np.linalg.norm(S @ W - L))
    info = {"rank": rank, "residual": residual, "intercept": bool(intercept)}
    if meta:
        info.update(meta)
    return ReadoutWeights(W, info)


def scores(W, s):
    """Raw class scores ``s @ W`` for one node vector or a stack of them."""
    M = W.entries if isinstance(W, ReadoutWeights) else np.asarray(W, dtype=float)
    s = np.asarray(s, dtype=float)
    intercept = isinstance(W, ReadoutWeights) and W.training_meta.get("intercept")
    if intercept:
        s = np.concatenate([s, np.ones(s.shape[:-1] + (1,))], axis=-1)
    if s.shape[-1] != M.shape[0]:
        raise DimensionMismatch(f"node vector length {s.shape[-1]} != weight rows {M.shape[0]}")
    return s @ M


def predict(W, s):
    """Classify one spike pattern; ties go to the lowest class index."""
    sc = scores(W, s)
    if sc.ndim != 1:
        raise DimensionMismatch("predict takes a single node vector; use predict_many")
    # np.argmax returns the first maximum, which is the documented tie-break
    return Prediction(sc, int(np.argmax(sc)) + 1)


def predict_many(W, S):
    """1-based class indices for each row of ``S``."""
    sc = np.atleast_2d(scores(W, S))
    return np.argmax(sc, axis=1) + 1
