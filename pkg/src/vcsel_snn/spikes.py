"""Binarization of intensity traces into virtual-node spike rasters."""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyTrace, LayoutMismatch


@dataclass
class IntensityTrace:
    """Uniformly sampled optical power (arbitrary units)."""

    samples: np.ndarray
    sample_period: float
    start_time: float = 0.0

    @property
    def times(self):
        return self.start_time + self.sample_period * np.arange(self.samples.size)

    def to_csv(self, path):
        """Two-column ``time_s,power_au`` CSV."""
        t = self.times
        with open(path, "w") as fh:
            fh.write("time_s,power_au\n")
            for ti, p in zip(t, self.samples):
                fh.write(f"{float(ti)!r},{float(p)!r}\n")

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t, p = data[:, 0], data[:, 1]
        dt = float(t[1] - t[0]) if t.size > 1 else 0.0
        return cls(p, dt, float(t[0]))


@dataclass
class SpikeRaster:
    """Binary node states, one row per data point in waveform order."""

    states: np.ndarray
    theta: float
    threshold: float
    point_ids: np.ndarray = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.uint8)
        if self.point_ids is None:
            self.point_ids = np.arange(self.states.shape[0])

    @property
    def n_points(self):
        return self.states.shape[0]

    @property
    def n_nodes(self):
        return self.states.shape[1]

    def by_point_id(self):
        """States reordered so row ``i`` belongs to data point ``i``."""
        out = np.zeros_like(self.states)
        out[self.point_ids] = self.states
        return out

    def to_csv(self, path):
        np.savetxt(path, self.states, fmt="%d", delimiter=",")

    @classmethod
    def from_csv(cls, path, theta=float("nan"), threshold=float("nan")):
        states = np.loadtxt(path, delimiter=",", dtype=np.uint8, ndmin=2)
        return cls(states, theta, threshold)

    def to_svg(self, path, title=None):
        """Raster map, spikes in green on black."""
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        from matplotlib.colors import ListedColormap

        fig, ax = plt.subplots(figsize=(8, 4))
        ax.imshow(self.states, aspect="auto", interpolation="nearest",
                  cmap=ListedColormap(["black", "#00c000"]), vmin=0, vmax=1)
        ax.set_xlabel("virtual node")
        ax.set_ylabel("data point")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg")
        plt.close(fig)


def _bin_edges(trace, t0, theta, n_bins):
    # sample k belongs to bin i when t0 + i*theta <= t_k < t0 + (i+1)*theta
    edges_t = t0 + theta * np.arange(n_bins + 1) - trace.start_time
    return np.ceil(edges_t / trace.sample_period - 1e-9).astype(np.int64)


def bin_and_threshold(trace, layout, theta, threshold, offset=0.0):
    """Binary raster from the per-bin peak power.

    A node fires when the maximum sample inside its half-open bin
    ``[t0 + i*theta, t0 + (i+1)*theta)`` exceeds ``threshold``; ``t0`` is the
    segment start shifted by the latency ``offset``. Gap samples are never
    inside a bin.
    """
    if trace.samples.size == 0:
        raise EmptyTrace("trace has no samples")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if not np.isclose(theta, layout.node_duration, rtol=1e-9, atol=0.0):
        raise LayoutMismatch(f"theta {theta} differs from layout node duration {layout.node_duration}")
    n = layout.n_nodes
    states = np.zeros((layout.n_points, n), dtype=np.uint8)
    x = trace.samples
    for row, (_, start, _end) in enumerate(layout.segments):
        t0 = start / layout.sample_rate + offset
        edges = _bin_edges(trace, t0, theta, n)
        if edges[0] < 0 or edges[-1] > x.size:
            raise LayoutMismatch(f"trace does not cover segment {row} (needs samples {edges[0]}..{edges[-1]})")
        if np.any(np.diff(edges) < 1):
            raise LayoutMismatch("trace sample period is longer than a node bin")
        # cut at the last edge, otherwise reduceat lets the final bin run to the end of the trace
        peaks = np.maximum.reduceat(x[:edges[-1]], edges[:-1])
        states[row] = peaks > threshold
    return SpikeRaster(states, float(theta), float(threshold), layout.point_ids)


def auto_threshold(trace, k=5.0, min_rel=0.1):
    """Spike threshold halfway between the baseline (median) and the largest peak.

    When the trace has no clear excursion, i.e. its maximum does not exceed
    ``median + max(k * IQR, min_rel * |median|)``, that level is returned
    instead so a flat trace never yields spikes.
    """
    x = np.asarray(trace.samples if isinstance(trace, IntensityTrace) else trace, dtype=float)
    if x.size == 0:
        raise EmptyTrace("trace has no samples")
    med = float(np.median(x))
    q1, q3 = np.percentile(x, [25, 75])
    floor = med + max(k * (q3 - q1), min_rel * abs(med), np.finfo(float).eps * max(1.0, abs(med)))
    peak = float(x.max())
    if peak > floor:
        return 0.5 * (med + peak)
    return floor


@dataclass
class SpikeStats:
    spike_count: int
    widths: np.ndarray
    inter_spike_intervals: np.ndarray
    peak_powers: np.ndarray
    peak_times: np.ndarray


def _crossing(x, i, j, level):
    """Fractional index where the line through samples i -> j meets ``level``."""
    if x[j] == x[i]:
        return float(j)
    return i + (level - x[i]) / (x[j] - x[i]) * (j - i)


def spike_statistics(trace, threshold, baseline=None):
    """Count super-threshold excursions and measure their FWHM and spacing.

    The width of each spike is taken at half its height above ``baseline``
    (default: trace median), with linear interpolation between samples.
    """
    x = np.asarray(trace.samples, dtype=float)
    dt = trace.sample_period
    empty = np.zeros(0)
    if x.size == 0:
        return SpikeStats(0, empty, empty, empty, empty)
    base = float(np.median(x)) if baseline is None else float(baseline)
    above = x > threshold
    edges = np.diff(above.astype(np.int8))
    starts = list(np.flatnonzero(edges == 1) + 1)
    ends = list(np.flatnonzero(edges == -1) + 1)
    if above[0]:
        starts.insert(0, 0)
    if above[-1]:
        ends.append(x.size)
    widths, peaks, times = [], [], []
    for s, e in zip(starts, ends):
        k = s + int(np.argmax(x[s:e]))
        half = base + 0.5 * (x[k] - base)
        left = k
        while left > 0 and x[left - 1] > half:
            left -= 1
        right = k
        while right < x.size - 1 and x[right + 1] > half:
            right += 1
        t_left = _crossing(x, left - 1, left, half) if left > 0 else float(left)
        t_right = _crossing(x, right, right + 1, half) if right < x.size - 1 else float(right)
        widths.append((t_right - t_left) * dt)
        peaks.append(x[k])
        times.append(trace.start_time + k * dt)
    times = np.array(times)
    return SpikeStats(len(peaks), np.array(widths), np.diff(times), np.array(peaks), times)
