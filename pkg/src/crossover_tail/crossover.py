"""Right tail 1 - F(s) of the edge crossover distribution and its envelope fit.

    1 - F(s) = -(1/2 pi i) int_C e^{-mu} / mu [det(I - K_mu) - 1] dmu

C comes in from +inf above the positive axis, loops counterclockwise around 0
on a circle, and leaves to +inf below the axis.  Writing det(I - K) - 1 =
-tr K + R(mu), the trace term integrates in closed form: the only mu-dependence
of tr K is the factor mu / (e^{-kappa t} - mu), whose pole at e^{-kappa t} is
enclosed, giving

    (1/2 pi i) int_C e^{-mu} / (e^{-kappa t} - mu) dmu = -exp(-e^{-kappa t}).

Only the O(K^2) remainder R is integrated numerically.  This avoids the
cancellation of O(e^{-kappa s}) contributions against a much smaller tail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .contours import Arc, Contour, Line, integrate_segment
from .deformed_airy import DEFAULT_T0, kappa
from .fredholm import default_scale, det_expansion, half_line_grid
from .operator import KernelAssembler

DEFAULT_N = 16
DEFAULT_DET_TOL = 1e-8
CLIP_EPS = 1e-9
IMAG_REL_TOL = 1e-6


@dataclass(frozen=True)
class MuContourSpec:
    delta: float = 0.5
    radius: float = 0.5
    truncation: float = 40.0

    def __post_init__(self):
        if not (self.delta > 0 and self.radius > 0):
            raise ValueError("delta and radius must be positive")
        if self.delta > self.radius:
            raise ValueError("delta must not exceed the radius of the loop around 0")
        if self.truncation <= self.radius:
            raise ValueError("truncation must lie right of the loop")

    def contour(self) -> Contour:
        d, r = self.delta, self.radius
        th = math.asin(d / r)
        x0 = math.sqrt(r * r - d * d)
        return Contour([
            Line(complex(self.truncation, d), complex(x0, d)),
            Arc(0j, r, th, 2 * math.pi - th),
            Line(complex(x0, -d), complex(self.truncation, -d)),
        ])


@dataclass
class TailResult:
    value: float
    imag: float
    err_estimate: float
    n: int
    clipped: bool
    method: str
    first_order: float = 0.0
    history: list = field(default_factory=list)

    def to_dict(self):
        return {"tail": self.value, "imag": self.imag, "err": self.err_estimate, "n": self.n,
                "clipped": self.clipped, "method": self.method, "first_order": self.first_order}


class TailImagError(RuntimeError):
    pass


class TailConvergenceError(RuntimeError):
    def __init__(self, msg, best: TailResult):
        super().__init__(msg)
        self.best = best


def _residue_profile(k):
    def rho(t):
        with np.errstate(over="ignore"):
            return -np.exp(-np.exp(-k * t))
    return rho


def _tail_at(s, T, n, contour: Contour, method, T0, rel_tol):
    k = kappa(T)
    g = half_line_grid(s, n, default_scale(k))
    A = KernelAssembler(T, s, g.nodes, T0)
    sw = np.sqrt(g.weights)
    W = sw[:, None] * sw[None, :]
    split = method == "split"

    def f(mu):
        mu = np.asarray(mu, dtype=complex)
        M = A.matrices(mu) * W[None]
        dm1, rem = det_expansion(M)
        h = rem if split else dm1
        return np.exp(-mu) / mu * h

    first = A.profile_trace(g.weights, _residue_profile(k)) if split else 0.0
    # roundoff floor set by the mass of |f| along the contour
    segs = contour.segments
    mass = sum(abs(integrate_segment(sg, lambda z: np.abs(f(z)), abs_tol=1e-300, rel_tol=1e-2,
                                     initial_panels=8).value) for sg in segs)
    abs_tol = max(rel_tol * abs(first), 1e-15 * mass, 1e-300) / len(segs)
    total, qerr = 0j, 0.0
    for sg in segs:
        r = integrate_segment(sg, f, abs_tol=abs_tol, rel_tol=rel_tol, initial_panels=8,
                              max_nodes=2 ** 12)
        total += r.value
        qerr += r.abs_error_estimate
    # tail = -(1/2 pi i) int e^{-mu}/mu (det - 1), det - 1 = -tr K + R, trace part done exactly
    tail = first - total / (2j * math.pi)
    return complex(tail), qerr / (2 * math.pi) + 1e-15 * mass / (2 * math.pi), first


def tail_probability_report(s: float, T: float, mu_contour: MuContourSpec | None = None,
                            det_tol: float = DEFAULT_DET_TOL, n: int = DEFAULT_N,
                            n_max: int = 256, method: str = "split",
                            T0: float = DEFAULT_T0) -> TailResult:
    """Tail with Nystrom node doubling until two successive values agree to det_tol relative."""
    if T < T0:
        raise ValueError("T must be >= T0")
    if method not in ("split", "direct"):
        raise ValueError("method must be 'split' or 'direct'")
    mc = mu_contour or MuContourSpec()
    contour = mc.contour()
    hist = []
    while True:
        val, qerr, first = _tail_at(s, T, n, contour, method, T0,
                                   rel_tol=max(min(det_tol, 1e-8) / 10, 1e-14))
        hist.append((n, val, qerr))
        if len(hist) >= 2:
            d = abs(hist[-1][1] - hist[-2][1])
            if d <= det_tol * abs(val.real) + 2 * (qerr + hist[-2][2]):
                break
        if 2 * n > n_max:
            best = _make(hist, first, method, d if len(hist) > 1 else float("inf"))
            raise TailConvergenceError(f"Nystrom nodes reached {n} without convergence", best)
        n *= 2
    res = _make(hist, first, method, abs(hist[-1][1] - hist[-2][1]))
    if abs(res.imag) > IMAG_REL_TOL * max(1e-12, abs(res.value)) + res.err_estimate:
        raise TailImagError(f"imaginary part {res.imag:.3g} of tail {res.value:.3g} too large")
    return res


def _make(hist, first, method, delta):
    n, val, qerr = hist[-1]
    v = val.real
    clipped = not (-CLIP_EPS <= v <= 1 + CLIP_EPS)
    return TailResult(value=v, imag=val.imag, err_estimate=float(delta + qerr), n=n,
                      clipped=clipped, method=method, first_order=float(first),
                      history=[(h[0], h[1].real, h[1].imag) for h in hist])


def tail_probability(s: float, T: float, mu_contour: MuContourSpec | None = None,
                     det_tol: float = DEFAULT_DET_TOL, **kw) -> float:
    return tail_probability_report(s, T, mu_contour, det_tol, **kw).value


# -- envelope fit ---------------------------------------------------------------

@dataclass
class TailFit:
    c1: float
    c2: float
    c3: float
    rms_log_residual: float
    s_range: tuple
    T_range: tuple
    residuals: list = field(default_factory=list)
    feasible: bool = True
    rates: dict = field(default_factory=dict)

    def envelope(self, s, T):
        return envelope(s, T, self.c1, self.c2, self.c3)

    def to_dict(self):
        return {"c1": self.c1, "c2": self.c2, "c3": self.c3,
                "rms_log_residual": self.rms_log_residual,
                "s_range": list(self.s_range), "T_range": list(self.T_range),
                "feasible": self.feasible, "residuals": list(self.residuals),
                "rates": {str(k): v for k, v in self.rates.items()}}


class InfeasibleFit(ValueError):
    def __init__(self, msg, sample=None):
        super().__init__(msg)
        self.sample = sample


def envelope(s, T, c1, c2, c3):
    s = np.asarray(s, dtype=float)
    return c1 * (np.exp(-c2 * np.cbrt(T) * s) + np.exp(-c3 * s ** 1.5))


def _log_env(s, T, lc):
    c1, c2, c3 = np.exp(lc)
    return lc[0] + np.logaddexp(-c2 * np.cbrt(T) * s, -c3 * s ** 1.5)


def fit_tail_envelope(samples) -> TailFit:
    """Least-squares upper envelope log c1 + log(e^{-c2 T^(1/3) s} + e^{-c3 s^(3/2)}).

    All log residuals log(tail) - log(envelope) are constrained to be <= 0.
    ``rates`` holds, per T, the decay rate a_T of a separate single-T fit
    log c1_T + log(e^{-a_T s} + e^{-c3 s^(3/2)}) sharing the fitted c3; the ratio
    of two rates measures how the exponential part scales with T.
    """
    arr = np.array([(float(s), float(T), float(v)) for s, T, v in samples])
    if arr.shape[0] < 6:
        raise InfeasibleFit("need at least 6 samples")
    Ts = np.unique(arr[:, 1])
    if Ts.size < 2:
        raise InfeasibleFit("need at least two values of T to separate c2 from c3")
    if np.unique(arr[:, 0]).size < 3:
        raise InfeasibleFit("need at least three values of s")
    bad = arr[:, 2] <= 0
    if bad.any():
        raise InfeasibleFit("tail values must be positive", tuple(arr[bad][0]))
    s, T, y = arr[:, 0], arr[:, 1], np.log(arr[:, 2])

    def resid(lc):
        return y - _log_env(s, T, lc)

    lc = _best_start(s, T, y)
    res = minimize(lambda p: float(np.sum(resid(p) ** 2)), lc, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": lambda p: -resid(p)}],
                   options={"ftol": 1e-14, "maxiter": 2000})
    lc = res.x
    r = resid(lc)
    if r.max() > 1e-7:
        # lift c1 onto the data; keeps the shape, restores feasibility
        lc = lc + np.array([r.max(), 0.0, 0.0])
        r = resid(lc)
    if r.max() > 1e-7:
        i = int(np.argmax(r))
        raise InfeasibleFit("no admissible envelope", tuple(arr[i]))
    c1, c2, c3 = np.exp(lc)
    rates = {float(t): _single_T_rate(s[T == t], y[T == t], c3) for t in Ts}
    return TailFit(c1=float(c1), c2=float(c2), c3=float(c3),
                   rms_log_residual=float(np.sqrt(np.mean(r ** 2))),
                   s_range=(float(s.min()), float(s.max())), T_range=(float(Ts.min()), float(Ts.max())),
                   residuals=[float(v) for v in r], feasible=True, rates=rates)


def _best_start(s, T, y):
    best, best_val = None, np.inf
    for c2 in (0.1, 0.3, 0.5, 1.0, 2.0):
        for c3 in (0.1, 0.3, 0.6, 1.0):
            lc = np.log([1.0, c2, c3])
            r = y - _log_env(s, T, lc)
            lc[0] += r.max()
            v = float(np.sum((y - _log_env(s, T, lc)) ** 2))
            if v < best_val:
                best, best_val = lc, v
    return best


def _single_T_rate(s, y, c3) -> float:
    """Decay rate a of the constrained single-T envelope log c + log(e^{-a s} + e^{-c3 s^1.5})."""
    def resid(p):
        a = math.exp(min(p[1], 50.0))
        return y - (p[0] + np.logaddexp(-a * s, -c3 * s ** 1.5))
    best = None
    for a0 in (0.05, 0.2, 0.5, 1.0, 2.0, 4.0):
        p = np.array([0.0, math.log(a0)])
        p[0] = resid(p).max()
        r = minimize(lambda q: float(np.sum(resid(q) ** 2)), p, method="SLSQP",
                     constraints=[{"type": "ineq", "fun": lambda q: -resid(q)}],
                     options={"ftol": 1e-14, "maxiter": 1000})
        q = r.x
        q[0] += max(0.0, resid(q).max())
        v = float(np.sum(resid(q) ** 2))
        if best is None or v < best[0] - 1e-12:
            best = (v, q)
    return float(np.exp(best[1][1]))
