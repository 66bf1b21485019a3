"""Independent reference implementations used only by the test-suite."""

import numpy as np
import scipy.linalg

from vcsel_snn.inputs import Layout
from vcsel_snn.spikes import IntensityTrace


def lstsq_cod(S, L, rtol=1e-10):
    """Minimum-norm least squares via pivoted QR + a second QR (complete orthogonal decomposition)."""
    S = np.asarray(S, dtype=float)
    L = np.asarray(L, dtype=float)
    n, m = S.shape
    Q, R, piv = scipy.linalg.qr(S, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return np.zeros((m, L.shape[1]))
    r = int(np.sum(d > rtol * max(n, m) * d[0]))
    # S P = Q[:, :r] [R11 R12]; factor [R11 R12]^T = Z T with Z orthonormal (m x r)
    Rr = R[:r, :]
    Z, T = np.linalg.qr(Rr.T)
    # min-norm solution of T^T y = Q_r^T L, then W_perm = Z y
    rhs = Q[:, :r].T @ L
    y = scipy.linalg.solve_triangular(T.T, rhs, lower=True)
    Wp = Z @ y
    W = np.empty_like(Wp)
    W[piv] = Wp
    return W


def lstsq_ridge_sweep(S, L, lambdas=None):
    """Normal equations with Tikhonov regularization; returns the best-residual solution over the sweep."""
    S = np.asarray(S, dtype=float)
    L = np.asarray(L, dtype=float)
    if lambdas is None:
        lambdas = np.geomspace(1e-2, 1e-13, 23)
    best = None
    for lam in lambdas:
        if S.shape[0] <= S.shape[1]:
            G = S @ S.T + lam * np.eye(S.shape[0])
            W = S.T @ np.linalg.solve(G, L)
        else:
            G = S.T @ S + lam * np.eye(S.shape[1])
            W = np.linalg.solve(G, S.T @ L)
        res = np.linalg.norm(S @ W - L)
        if best is None or res < best[1]:
            best = (W, res, lam)
    return best


def naive_scores(W, s):
    """Dot products by explicit loops."""
    n_nodes, n_cls = W.shape
    out = [0.0] * n_cls
    for j in range(n_cls):
        acc = 0.0
        for i in range(n_nodes):
            acc += s[i] * W[i, j]
        out[j] = acc
    return np.array(out)


def naive_bin_max(samples, edges):
    """Per-bin maxima by scanning every sample."""
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        m = -np.inf
        for k in range(a, b):
            if samples[k] > m:
                m = samples[k]
        out.append(m)
    return np.array(out)


def naive_matvec(M, x):
    return np.array([sum(M[i, j] * x[j] for j in range(M.shape[1])) for i in range(M.shape[0])])


def sfm_derivatives(ex, ey, N, n, *, kappa, gamma, alpha, gamma_s, gamma_p, gamma_a, mu, detuning_ghz, e_inj):
    """Spin-flip rate equations (time in ns), written out term by term.

    Frame rotating at the master frequency; the master is ``detuning_ghz``
    away from the y-mode's own resonance, which sits at gamma_p + alpha*gamma_a.
    """
    omega = 2 * np.pi * detuning_ghz + gamma_p + alpha * gamma_a
    cross = (1j * (ey * np.conj(ex) - ex * np.conj(ey))).real
    total = abs(ex) ** 2 + abs(ey) ** 2
    dex = (kappa * (1 + 1j * alpha) * ((N - 1) * ex + 1j * n * ey)
           - (1j * gamma_p - gamma_a) * ex - 1j * omega * ex)
    dey = (kappa * (1 + 1j * alpha) * ((N - 1) * ey - 1j * n * ex)
           + (1j * gamma_p - gamma_a) * ey - 1j * omega * ey + kappa * e_inj)
    dN = -gamma * (N * (1 + total) - mu + n * cross)
    dn = -gamma_s * n - gamma * (n * total + N * cross)
    return dex, dey, dN, dn


def sfm_kwargs(params, e_inj):
    """Convert an SI parameter record into the ns-based oracle arguments."""
    return dict(kappa=params.field_decay_rate / 1e9, gamma=params.carrier_decay_rate / 1e9,
                alpha=params.linewidth_enhancement, gamma_s=params.spin_relaxation_rate / 1e9,
                gamma_p=params.birefringence_rate / 1e9, gamma_a=params.dichroism_rate / 1e9,
                mu=params.bias_pump, detuning_ghz=params.detuning / 1e9, e_inj=e_inj)


def locked_state_oracle(params, e_inj, guess=(1.45, 0.0, 0.99)):
    """Locked fixed point (x field off) by fsolve on the oracle equations."""
    import scipy.optimize

    kw = sfm_kwargs(params, e_inj)

    def f(z):
        _, dey, dN, _ = sfm_derivatives(0j, complex(z[0], z[1]), z[2], 0.0, **kw)
        return [dey.real, dey.imag, dN]

    z = scipy.optimize.fsolve(f, guess, xtol=1e-14)
    return complex(z[0], z[1]), z[2]


def naive_hamming_means(states, labels):
    """Class-pair mean Hamming distances by looping over every pair."""
    states = np.asarray(states)
    labels = np.asarray(labels)
    n, m = states.shape
    sums, counts = {}, {}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            a, b = sorted((int(labels[i]), int(labels[j])))
            d = sum(1 for k in range(m) if states[i, k] != states[j, k]) / m
            sums[(a, b)] = sums.get((a, b), 0.0) + d
            counts[(a, b)] = counts.get((a, b), 0) + 1
    return {k: sums[k] / counts[k] for k in sums}


def reaverage_csv(path):
    """Mean of the per-run rows of an error-curve CSV, recomputed with the csv module."""
    import csv

    with open(path) as fh:
        rows = [r for r in csv.reader(fh)][1:]
    runs = [list(map(float, r[1:])) for r in rows if r[0] != "mean"]
    return [sum(col) / len(col) for col in zip(*runs)]


def random_case(rng):
    """Random multi-point layout with gaps plus a random positive trace covering it."""
    theta = 250e-12
    fs = 12e9
    n_nodes = int(rng.integers(1, 12))
    n_points = int(rng.integers(1, 5))
    gap = int(rng.integers(0, 30))
    seg = n_nodes * 3
    segs = []
    pos = 0
    for k in range(n_points):
        segs.append((k, pos, pos + seg))
        pos += seg + gap
    layout = Layout(np.array(segs), fs, theta, n_nodes)
    dt = theta / int(rng.choice([5, 10, 25, 50]))
    n = int(np.ceil((pos - gap) / fs / dt)) + int(rng.integers(0, 20))
    x = rng.exponential(1.0, n) * (rng.random(n) < rng.uniform(0.05, 1.0))
    offset = float(rng.integers(0, 3)) * dt
    n += int(np.ceil(offset / dt))
    x = np.concatenate([x, rng.exponential(1.0, n - x.size)])
    return IntensityTrace(x, dt), layout, offset


def naive_raster(trace, layout, theta, threshold, offset):
    rows = []
    t = trace.times
    for _, start, _ in layout.segments:
        t0 = start / layout.sample_rate + offset
        bits = []
        for i in range(layout.n_nodes):
            lo, hi = t0 + i * theta, t0 + (i + 1) * theta
            # half-open bins with a tolerance far below one sample period
            inside = (t >= lo - 1e-6 * trace.sample_period) & (t < hi - 1e-6 * trace.sample_period)
            bits.append(int(trace.samples[inside].max() > threshold))
        rows.append(bits)
    return np.array(rows, dtype=np.uint8)
