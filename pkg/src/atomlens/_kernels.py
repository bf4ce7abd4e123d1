"""Fused pointwise kernel for the local substep (numba when available)."""

from __future__ import annotations

import math

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None


def _local_step(psi0, psin, a_static, b_static, gb, gl, omega, dt, coupling, loss_c, absorb):
    """In-place local update on flat arrays.

    Returns (max total density before the update, sum of |psi0|^2 after).
    ``coupling`` is a complex array (lab frame) or empty (envelope frame);
    ``absorb`` is a real mask or empty.
    """
    n = psi0.size
    use_c = coupling.size == n
    use_abs = absorb.size == n
    nmax = 0.0
    norm0 = 0.0
    for i in range(n):
        p0 = psi0[i]
        pn = psin[i]
        n0 = p0.real * p0.real + p0.imag * p0.imag
        nn = pn.real * pn.real + pn.imag * pn.imag
        nt = n0 + nn
        if nt > nmax:
            nmax = nt
        a = a_static[i] + gb * nt
        b = b_static[i] + gl * nt
        if omega == 0.0:
            p0 = p0 * complex(math.cos(a * dt), -math.sin(a * dt))
            pn = pn * complex(math.cos(b * dt), -math.sin(b * dt))
        else:
            s = 0.5 * (a + b)
            d = 0.5 * (a - b)
            r = math.sqrt(d * d + omega * omega)
            cs = math.cos(r * dt)
            sc = math.sin(r * dt) / r
            c = omega * coupling[i] if use_c else complex(omega, 0.0)
            rot = complex(math.cos(s * dt), -math.sin(s * dt))
            q0 = complex(cs, -sc * d) * p0 - 1j * sc * c * pn
            qn = -1j * sc * c.conjugate() * p0 + complex(cs, sc * d) * pn
            p0 = rot * q0
            pn = rot * qn
        if loss_c > 0.0:
            n0 = p0.real * p0.real + p0.imag * p0.imag
            nn = pn.real * pn.real + pn.imag * pn.imag
            D = n0 * n0 + nn * nn + 4.0 * n0 * nn
            nm = nn * math.exp(-loss_c * D * dt)
            Dm = n0 * n0 + nm * nm + 4.0 * n0 * nm
            pn = pn * math.exp(-loss_c * Dm * dt)
        if use_abs:
            p0 = p0 * absorb[i]
            pn = pn * absorb[i]
        psi0[i] = p0
        psin[i] = pn
        norm0 += p0.real * p0.real + p0.imag * p0.imag
    return nmax, norm0


if numba is not None:
    local_step = numba.njit(cache=True, nogil=True)(_local_step)
else:  # pragma: no cover
    local_step = None

EMPTY_C = np.zeros(0, dtype=np.complex128)
EMPTY_R = np.zeros(0, dtype=np.float64)
