"""Fredholm determinants det(I - K) on L^2(s, inf) by Gauss-Legendre Nystrom discretisation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor

from .contours import gauss_legendre
from .operator import KernelAssembler, KernelSpec, hs_norms

DEFAULT_DET_TOL = 1e-8
DEFAULT_NODE_CAP = 1024


@dataclass
class NystromGrid:
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    map: dict

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("Nystrom weights must be positive")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("Nystrom nodes must be strictly increasing")


def half_line_grid(s: float, n: int, L: float) -> NystromGrid:
    """x = s + L (1 + u) / (1 - u), u Gauss-Legendre on (-1, 1)."""
    if L <= 0:
        raise ValueError("scale L must be positive")
    u, w = gauss_legendre(n)
    x = s + L * (1.0 + u) / (1.0 - u)
    wx = w * 2.0 * L / (1.0 - u) ** 2
    return NystromGrid(n, x, wx, {"kind": "algebraic", "s": s, "L": L})


def interval_grid(a: float, b: float, n: int) -> NystromGrid:
    u, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    return NystromGrid(n, a + half * (u + 1.0), half * w, {"kind": "affine", "a": a, "b": b})


def default_scale(kappa_T: float) -> float:
    return max(1.0, 10.0 / kappa_T)


def det_lu(M) -> complex:
    """det(I - M) through LU with partial pivoting."""
    n = M.shape[0]
    A = np.eye(n, dtype=np.result_type(M, float)) - M
    lu, piv = lu_factor(A, check_finite=True)
    sign = (-1) ** int(np.sum(piv != np.arange(n)))
    return complex(sign * np.prod(np.diag(lu)))


def weighted(K, grid: NystromGrid):
    sw = np.sqrt(grid.weights)
    return sw[:, None] * K * sw[None, :]


def fredholm_det(kernel, grid: NystromGrid) -> complex:
    """det(I - K) for a vectorised kernel(x[:, None], y[None, :]) on ``grid``."""
    x = grid.nodes
    K = np.asarray(kernel(x[:, None], x[None, :]))
    return det_lu(weighted(K, grid))


# -- det - 1 without cancellation -------------------------------------------

def _expm1_minus_id(a):
    """exp(a) - 1 - a, accurate for small |a|."""
    a = np.asarray(a, dtype=complex)
    small = np.abs(a) < 0.05
    out = np.expm1(a) - a
    z = a[small]
    term = z * z / 2.0
    acc = term.copy()
    for k in range(3, 14):
        term = term * z / k
        acc = acc + term
    out[small] = acc
    return out


def _log1p_plus_id(lam):
    """log(1 - lam) + lam, accurate for small |lam|."""
    lam = np.asarray(lam, dtype=complex)
    small = np.abs(lam) < 0.05
    with np.errstate(divide="ignore"):
        out = np.log1p(-lam) + lam
    z = lam[small]
    acc = np.zeros_like(z)
    p = z.copy()
    for k in range(2, 16):
        p = p * z
        acc = acc - p / k
    out[small] = acc
    return out


def det_expansion(M):
    """(det(I - M) - 1, det(I - M) - 1 + tr M) for a stack of matrices M[..., n, n].

    Both come from the eigenvalues of M, so neither suffers the cancellation of
    subtracting 1 from a determinant that is 1 to many digits.
    """
    M = np.asarray(M)
    tr = np.trace(M, axis1=-2, axis2=-1)
    lam = np.linalg.eigvals(M)
    higher = _log1p_plus_id(lam).sum(axis=-1)      # log det(I - M) + tr M
    a = higher - tr                                  # log det(I - M)
    dm1 = np.expm1(a)
    remainder = _expm1_minus_id(a) + higher          # exp(a) - 1 + tr M
    return dm1, remainder


def det_minus_one(M):
    return det_expansion(M)[0]


# -- crossover kernel ---------------------------------------------------------

@dataclass
class DetResult:
    det: complex
    n: int
    richardson_estimate: complex
    converged: bool
    history: list = field(default_factory=list)

    def to_dict(self):
        return {"det": [self.det.real, self.det.imag], "n": self.n,
                "richardson_estimate": [self.richardson_estimate.real, self.richardson_estimate.imag],
                "converged": self.converged,
                "history": [[n, d.real, d.imag] for n, d in self.history]}


def _aitken(d0, d1, d2):
    den = d2 - 2 * d1 + d0
    if abs(den) < 1e-300 or abs(d2 - d1) >= abs(d1 - d0):
        return d2
    return d2 - (d2 - d1) ** 2 / den


def kernel_matrix(spec: KernelSpec, grid: NystromGrid, conjugated: bool = False):
    A = KernelAssembler(spec.T, spec.s, grid.nodes, spec.T0)
    K = A.matrices([spec.mu])[0]
    if conjugated:
        u = np.sqrt(grid.nodes ** 4 + 1.0)
        K = K / u[:, None] * u[None, :]
    return K


def nystrom_det(spec: KernelSpec, n: int = 16, det_tol: float = DEFAULT_DET_TOL,
                n_max: int = DEFAULT_NODE_CAP, L: float | None = None,
                conjugated: bool = False) -> DetResult:
    """det(I - K) with node doubling until successive values differ by less than det_tol."""
    if n < 8 or n & (n - 1):
        raise ValueError("n must be a power of two and at least 8")
    L = default_scale(spec.kappa) if L is None else L
    hist = []
    while True:
        g = half_line_grid(spec.s, n, L)
        d = 1.0 + 0j if spec.mu == 0 else det_lu(weighted(kernel_matrix(spec, g, conjugated), g))
        hist.append((n, d))
        if len(hist) >= 2 and abs(hist[-1][1] - hist[-2][1]) < det_tol:
            conv = True
            break
        if 2 * n > n_max:
            conv = False
            break
        n *= 2
    rich = _aitken(*[h[1] for h in hist[-3:]]) if len(hist) >= 3 else hist[-1][1]
    return DetResult(hist[-1][1], hist[-1][0], complex(rich), conv, hist)


@dataclass
class DetBoundReport:
    lhs: float
    rhs: float
    hs_product: float
    numerical_error: float
    det: complex
    ok: bool
    slack_ratio: float
    hs: dict = field(default_factory=dict)

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "hs_product": self.hs_product,
                "numerical_error": self.numerical_error, "det": [self.det.real, self.det.imag],
                "ok": self.ok, "slack_ratio": self.slack_ratio, "hs": self.hs}


class DetBoundViolation(AssertionError):
    def __init__(self, report: DetBoundReport):
        super().__init__(f"|det - 1| = {report.lhs:.6g} exceeds {report.rhs:.6g} "
                         f"(+ error {report.numerical_error:.3g}); {report.to_dict()}")
        self.report = report


def det_bound_check(spec: KernelSpec, n: int = 32, raise_on_violation: bool = True) -> DetBoundReport:
    """Compare |det(I - K) - 1| with p e^{p + 1}, p = ||A1||_2 ||A2||_2."""
    if spec.mu == 0:
        rep = DetBoundReport(0.0, 0.0, 0.0, 0.0, 1 + 0j, True, 0.0)
        return rep
    hs = hs_norms(spec)
    p = hs.product
    rhs = p * math.exp(p + 1.0)
    L = default_scale(spec.kappa)
    vals = []
    for m in (n, 2 * n):
        g = half_line_grid(spec.s, m, L)
        M = weighted(kernel_matrix(spec, g), g)
        vals.append(complex(det_minus_one(M[None])[0]))
    lhs = abs(vals[-1])
    # node-doubling change plus the propagated HS-norm error
    err = abs(vals[-1] - vals[-2]) + 1e-12 * lhs
    dp = hs.abs_error_a1 / (2 * max(hs.norm_a1, 1e-300)) * p + \
        hs.abs_error_a2 / (2 * max(hs.norm_a2 ** 2, 1e-300)) * p
    err += dp * (1 + p) * math.exp(p + 1.0)
    ok = lhs <= rhs + err
    rep = DetBoundReport(lhs, rhs, p, err, 1 + vals[-1], bool(ok),
                         lhs / rhs if rhs > 0 else 0.0, hs.to_dict())
    if not ok and raise_on_violation:
        raise DetBoundViolation(rep)
    return rep


# -- reference kernels --------------------------------------------------------

def airy_kernel(x, y):
    """Classical Airy kernel (Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y), diagonal by its limit."""
    from scipy.special import airy
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    ax, apx, _, _ = airy(x)
    ay, apy, _, _ = airy(y)
    d = x - y
    diag = np.abs(d) < 1e-10
    with np.errstate(invalid="ignore", divide="ignore"):
        k = (ax * apy - apx * ay) / d
    k[diag] = (apx ** 2 - x * ax ** 2)[diag]
    return k


def airy_antiderivative(x):
    """G(x) = int_{-inf}^x Ai, by adaptive quadrature of Ai (scipy's itairy is unreliable for 5 < x < 9.5)."""
    from scipy.integrate import quad
    from scipy.special import airy
    x = np.asarray(x, float)
    uniq, inv = np.unique(x, return_inverse=True)

    def ai(t):
        return airy(t)[0]

    vals = np.empty(uniq.shape)
    for i, v in enumerate(uniq):
        if v >= 0:
            vals[i] = 1.0 - quad(ai, v, v + 40.0, epsabs=0.0, epsrel=1e-13, limit=200)[0]
        else:
            vals[i] = 2.0 / 3.0 - quad(ai, v, 0.0, epsabs=1e-15, epsrel=1e-13, limit=400)[0]
    return vals[inv].reshape(x.shape)


def critical_spike_kernel(x, y):
    """Airy kernel plus the rank-one term G(x) Ai(y), G(x) = int_{-inf}^x Ai.

    This is the large-T limit of the crossover kernel (the mu-factor tends to -1
    on t > 0 and 0 on t < 0) and the kernel of the critical rank-one spiked law.
    """
    from scipy.special import airy
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    return airy_kernel(x, y) + airy_antiderivative(x) * airy(y)[0]
