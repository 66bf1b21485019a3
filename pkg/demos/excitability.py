"""Spike threshold, spike shape and refractoriness at the default operating point.

Writes ``excitability.svg`` next to this script and prints the measurements.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from vcsel_snn.laser import (LaserParams, count_spikes, locking_boundary, perturbation_trace,  # noqa: E402
                             rest_power)
from vcsel_snn.spikes import spike_statistics  # noqa: E402

NODE = 250e-12


def threshold_drop(params, base):
    lo, hi = 0.0, 0.9
    for _ in range(20):
        mid = 0.5 * (lo + hi)
        hit = count_spikes(perturbation_trace(params, [(1e-9, NODE, mid)], 8e-9), 2.0, base)
        lo, hi = (lo, mid) if hit else (mid, hi)
    return hi


def main():
    params = LaserParams()
    edge = locking_boundary(params)
    base = rest_power(params)
    p_star = threshold_drop(params, base)
    print(f"locking edge {edge:.5f}, operating amplitude {params.injection_amplitude} "
          f"(margin {params.injection_amplitude / edge - 1:.3f})")
    print(f"threshold injection drop p* = {p_star:.4f}")

    fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
    cases = [
        ("0.8 p*", [(1e-9, NODE, 0.8 * p_star)]),
        ("1.2 p*", [(1e-9, NODE, 1.2 * p_star)]),
        ("pair, 0.5 ns apart", [(1e-9, NODE, 1.2 * p_star), (1.5e-9, NODE, 1.2 * p_star)]),
    ]
    for ax, (label, pulses) in zip(axes, cases):
        tr = perturbation_trace(params, pulses, 5e-9)
        st = spike_statistics(tr, 2 * base, baseline=base)
        widths = ", ".join(f"{w * 1e12:.0f} ps" for w in st.widths) or "none"
        print(f"{label:>20}: {st.spike_count} spike(s), FWHM {widths}")
        ax.plot(tr.times * 1e9, tr.samples / base, lw=1)
        for t0, width, _ in pulses:
            ax.axvspan(t0 * 1e9, (t0 + width) * 1e9, color="orange", alpha=0.3)
        ax.set_ylabel("power / rest")
        ax.set_title(label, fontsize=9)
    axes[-1].set_xlabel("time (ns)")
    fig.tight_layout()
    out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "excitability.svg")
    fig.savefig(out)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
