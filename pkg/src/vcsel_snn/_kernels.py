"""Compiled fixed-step RK4 integrators for the neuron models.

Time is in ns and rates in 1/ns inside this module. Drives are given as runs
of constant value: ``levels[r]`` is applied until the step index ``ends[r]``
(exclusive, counted from the start of the call).
"""

import numpy as np
from numba import njit

# status codes returned by the integrators
OK = 0
BLOWUP = 1

_TINY = 1e-150
_N_MAX = 1e3
_I_MAX = 1e6


@njit(cache=True, nogil=True)
def sfm_rhs(ex, ey, N, n, p, einj):
    """Spin-flip model derivatives, injection into the y field."""
    kappa, gN, alpha, gs, gp, ga, mu, wi = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]
    ka = kappa * (1.0 + 1j * alpha)
    cr = (1j * (ey * np.conj(ex) - ex * np.conj(ey))).real
    inten = ex.real ** 2 + ex.imag ** 2 + ey.real ** 2 + ey.imag ** 2
    dex = ka * ((N - 1.0) * ex + 1j * n * ey) + (ga - 1j * gp) * ex - 1j * wi * ex
    dey = ka * ((N - 1.0) * ey - 1j * n * ex) + (-ga + 1j * gp) * ey - 1j * wi * ey + kappa * einj
    dN = -gN * (N * (1.0 + inten) - mu + n * cr)
    dn = -gs * n - gN * (n * inten + N * cr)
    return dex, dey, dN, dn


@njit(cache=True, nogil=True)
def sfm_integrate(state, p, levels, ends, dt, nsub, step0, noise, noise_amp, readout, out):
    """Advance ``state`` (ex, ey, N, n as complex128[4]) in place.

    Power is written to ``out[(step0 + i) // nsub]`` before every step ``i``
    whose global index is a multiple of ``nsub``. ``noise`` is either empty or
    a complex (n_steps, 2) array of unit normals added to (ex, ey) after each
    step with amplitude ``noise_amp * sqrt(dt)``. Returns (status, steps done).
    """
    ex = state[0]
    ey = state[1]
    N = state[2].real
    n = state[3].real
    h = 0.5 * dt
    w = dt / 6.0
    sq = noise_amp * np.sqrt(dt)
    use_noise = noise.shape[0] > 0
    i = 0
    for r in range(levels.size):
        e = levels[r]
        while i < ends[r]:
            g = step0 + i
            if g % nsub == 0:
                k = g // nsub
                if k < out.size:
                    py = ey.real ** 2 + ey.imag ** 2
                    if readout == 0:
                        out[k] = py
                    else:
                        out[k] = py + ex.real ** 2 + ex.imag ** 2
            a1, b1, c1, d1 = sfm_rhs(ex, ey, N, n, p, e)
            a2, b2, c2, d2 = sfm_rhs(ex + h * a1, ey + h * b1, N + h * c1, n + h * d1, p, e)
            a3, b3, c3, d3 = sfm_rhs(ex + h * a2, ey + h * b2, N + h * c2, n + h * d2, p, e)
            a4, b4, c4, d4 = sfm_rhs(ex + dt * a3, ey + dt * b3, N + dt * c3, n + dt * d3, p, e)
            ex += w * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            ey += w * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            N += w * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
            n += w * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
            if use_noise:
                ex += sq * noise[i, 0]
                ey += sq * noise[i, 1]
            # flush denormals; a decayed field otherwise slows every step ~10x
            if abs(ex.real) < _TINY and abs(ex.imag) < _TINY:
                ex = 0j
            if abs(n) < _TINY:
                n = 0.0
            inten = ex.real ** 2 + ex.imag ** 2 + ey.real ** 2 + ey.imag ** 2
            if not (np.isfinite(inten) and np.isfinite(N) and np.isfinite(n)) or abs(N) > _N_MAX or inten > _I_MAX:
                state[0] = ex
                state[1] = ey
                state[2] = N
                state[3] = n
                return BLOWUP, i + 1
            i += 1
    state[0] = ex
    state[1] = ey
    state[2] = N
    state[3] = n
    return OK, i


@njit(cache=True, nogil=True)
def fhn_rhs(u, v, p, drive):
    eps, a, b = p[0], p[1], p[2]
    du = (u - u * u * u / 3.0 - v + drive) / eps
    dv = u + a - b * v
    return du, dv


@njit(cache=True, nogil=True)
def fhn_integrate(state, p, levels, ends, dt, nsub, step0, noise, noise_amp, out):
    """RK4 for the two-variable excitable surrogate; output power is ``(u - u_floor)**2``."""
    u = state[0]
    v = state[1]
    floor = p[3]
    h = 0.5 * dt
    w = dt / 6.0
    sq = noise_amp * np.sqrt(dt)
    use_noise = noise.shape[0] > 0
    i = 0
    for r in range(levels.size):
        e = levels[r]
        while i < ends[r]:
            g = step0 + i
            if g % nsub == 0:
                k = g // nsub
                if k < out.size:
                    out[k] = (u - floor) ** 2
            a1, b1 = fhn_rhs(u, v, p, e)
            a2, b2 = fhn_rhs(u + h * a1, v + h * b1, p, e)
            a3, b3 = fhn_rhs(u + h * a2, v + h * b2, p, e)
            a4, b4 = fhn_rhs(u + dt * a3, v + dt * b3, p, e)
            u += w * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            v += w * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            if use_noise:
                u += sq * noise[i]
            if not (np.isfinite(u) and np.isfinite(v)) or abs(u) > _N_MAX:
                state[0] = u
                state[1] = v
                return BLOWUP, i + 1
            i += 1
    state[0] = u
    state[1] = v
    return OK, i
