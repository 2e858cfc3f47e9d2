"""Independent reference computations used by the tests.

Nothing here imports the package: Airy values come from the Maclaurin series in
mpmath, deformed Airy values from mpmath quadrature on the undeformed contours,
and the Airy-kernel determinant from a plain truncated-interval Nystrom rule.
"""
from __future__ import annotations

import math

import mpmath as mp
import numpy as np
from scipy.special import airy

# Frozen oracle outputs (regenerate with `python tests/oracles.py`).
AI0 = 0.35502805388781723926
AIP0 = -0.25881940379280679840
# F2(0) from airy_det_reference(0.0)
F2_AT_0 = 0.96937282835526

KAPPA = lambda T: 2.0 ** (-1.0 / 3.0) * T ** (1.0 / 3.0)


def airy_series(x, derivative=False, dps=60):
    """Ai(x) or Ai'(x) from the Maclaurin series, summed at ``dps`` digits."""
    with mp.workdps(dps):
        x = mp.mpf(x)
        c1 = 1 / (mp.power(3, mp.mpf(2) / 3) * mp.gamma(mp.mpf(2) / 3))
        c2 = 1 / (mp.power(3, mp.mpf(1) / 3) * mp.gamma(mp.mpf(1) / 3))
        f = g = mp.mpf(0)
        a = b = mp.mpf(1)   # coefficients of x^{3k} in f and x^{3k+1} in g
        k = 0
        while True:
            if derivative:
                tf = 3 * k * a * x ** (3 * k - 1) if k > 0 else mp.mpf(0)
                tg = (3 * k + 1) * b * x ** (3 * k)
            else:
                tf = a * x ** (3 * k)
                tg = b * x ** (3 * k + 1)
            f += tf
            g += tg
            a = a / ((3 * k + 2) * (3 * k + 3))
            b = b / ((3 * k + 3) * (3 * k + 4))
            k += 1
            if k > 10 and abs(tf) + abs(tg) < mp.mpf(10) ** (-dps + 5):
                break
        return float(c1 * f - c2 * g)


def gamma_mp(z, dps=40):
    with mp.workdps(dps):
        return complex(mp.gamma(mp.mpc(z.real, z.imag)))


def upper_undeformed(x, T, dps=30):
    """Ai^Gamma(x) on rays from 1 at angles -+2pi/3 (upward), by mpmath quadrature."""
    k = KAPPA(T)
    with mp.workdps(dps):
        e = mp.exp(2j * mp.pi / 3)

        def f(r):
            z = 1 + r * e
            return mp.exp(-z ** 3 / 3 + x * z) * mp.gamma(z / k) * e
        A = mp.quad(f, [0, 2, 6, mp.inf])
        # the lower ray is the conjugate path traversed inwards
        return float(mp.im(A) / mp.pi)


def lower_undeformed(x, T, dps=30):
    """Ai_Gamma(x) on rays through 1 at -+pi/3, traversed downwards."""
    k = KAPPA(T)
    with mp.workdps(dps):
        e = mp.exp(1j * mp.pi / 3)

        def g(r):
            z = 1 + r * e
            return mp.exp(z ** 3 / 3 - x * z) * mp.rgamma(z / k) * e
        B = mp.quad(g, [0, 2, 6, mp.inf])
        return float(-mp.im(B) / mp.pi)


def airy_kernel_np(x, y):
    x, y = np.broadcast_arrays(x, y)
    ax, apx, _, _ = airy(x)
    ay, apy, _, _ = airy(y)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = (ax * apy - apx * ay) / (x - y)
    d = np.isclose(x, y, rtol=0, atol=1e-12)
    k[d] = (apx ** 2 - x * ax ** 2)[d]
    return k


def _det_interval(s, n, length=16.0):
    u, w = np.polynomial.legendre.leggauss(n)
    x = s + 0.5 * length * (u + 1.0)
    w = 0.5 * length * w
    K = airy_kernel_np(x[:, None], x[None, :])
    sw = np.sqrt(w)
    return float(np.linalg.det(np.eye(n) - sw[:, None] * K * sw[None, :]))


def airy_det_reference(s, n=32):
    """det(I - K_Airy) on (s, s+16) at 4n and 8n nodes with Richardson-style extrapolation."""
    d1 = _det_interval(s, 4 * n)
    d2 = _det_interval(s, 8 * n)
    # spectral convergence: the finer value is the estimate, the gap its error
    return d2, abs(d2 - d1)


def _goe_matrix(s, n, length):
    u, w = np.polynomial.legendre.leggauss(n)
    x = s + 0.5 * length * (u + 1.0)
    w = 0.5 * length * w
    K = 0.5 * airy(0.5 * (x[:, None] + x[None, :]))[0]
    sw = np.sqrt(w)
    return sw[:, None] * K * sw[None, :]


def _one_minus_det(M):
    """1 - det(I - M) for symmetric M from its eigenvalues, without cancellation near det = 1."""
    lam = np.linalg.eigvalsh(0.5 * (M + M.T))
    return float(-np.expm1(np.sum(np.log1p(-lam))))


def goe_det_reference(s, n=128, length=16.0):
    """F_GOE(s) = det(I - Ai((x + y)/2) / 2) on (s, s + length)."""
    return float(np.linalg.det(np.eye(n) - _goe_matrix(s, n, length)))


def goe_squared_tail(s, n=128, length=16.0):
    """1 - F_GOE(s)^2."""
    q = _one_minus_det(_goe_matrix(s, n, length))
    return q * (2.0 - q)


def gue_tail(s, n=128, length=16.0):
    """1 - F_GUE(s)."""
    u, w = np.polynomial.legendre.leggauss(n)
    x = s + 0.5 * length * (u + 1.0)
    w = 0.5 * length * w
    sw = np.sqrt(w)
    return _one_minus_det(sw[:, None] * airy_kernel_np(x[:, None], x[None, :]) * sw[None, :])


if __name__ == "__main__":
    print("Ai(0) =", airy_series(0.0), "Ai'(0) =", airy_series(0.0, True))
    print("F2(0) =", airy_det_reference(0.0))
    print("F1(0)^2 =", goe_det_reference(0.0) ** 2)
