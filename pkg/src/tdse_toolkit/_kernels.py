"""Compiled inner loop of the reference solver."""

import math

import numba
import numpy as np

# substep size bound on ||dt H||_1 for the Taylor series
_THETA = 0.5
_MAX_TERMS = 40


@numba.njit(cache=True)
def midpoint_taylor(H0, mu, eps_mid, dt, psi0, norm_h0, norm_mu):
    """Apply ``prod_j exp(-i dt (H0 - eps_mid[j] mu))`` to ``psi0``.

    Each exponential acts through its Taylor series, truncated once a term
    falls below double-precision resolution; ``dt`` is split into substeps so
    that ``||dt H||_1 <= 0.5`` and the series never suffers cancellation.
    """
    d = psi0.shape[0]
    psi = psi0.copy()
    comp = np.zeros(d, dtype=np.complex128)
    H = np.empty((d, d), dtype=np.complex128)
    term = np.empty(d, dtype=np.complex128)
    nxt = np.empty(d, dtype=np.complex128)
    incr = np.empty(d, dtype=np.complex128)
    for j in range(eps_mid.shape[0]):
        e = eps_mid[j]
        for a in range(d):
            for b in range(d):
                H[a, b] = H0[a, b] - e * mu[a, b]
        bound = dt * (norm_h0 + abs(e) * norm_mu)
        nsub = max(1, int(math.ceil(bound / _THETA)))
        h = dt / nsub
        for _ in range(nsub):
            for a in range(d):
                term[a] = psi[a]
                incr[a] = 0.0
            for k in range(1, _MAX_TERMS):
                scale = -1j * h / k
                tnorm = 0.0
                for a in range(d):
                    acc = 0j
                    for b in range(d):
                        acc += H[a, b] * term[b]
                    nxt[a] = scale * acc
                    tnorm += nxt[a].real ** 2 + nxt[a].imag ** 2
                for a in range(d):
                    term[a] = nxt[a]
                    incr[a] += nxt[a]
                if tnorm < 1e-36:
                    break
            # compensated update keeps the rounding floor flat over millions of steps
            for a in range(d):
                y = incr[a] - comp[a]
                t = psi[a] + y
                comp[a] = (t - psi[a]) - y
                psi[a] = t
    return psi - comp
