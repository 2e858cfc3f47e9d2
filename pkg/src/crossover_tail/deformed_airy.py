"""Gamma-deformed Airy functions Ai^Gamma(x, 1/kappa_T, 0) and Ai_Gamma(x, 1/kappa_T, 0).

Normalisation::

    Ai^Gamma(x) = 1/(2 pi i) int_{G_zeta} exp(-z^3/3 + x z) Gamma(z / kappa) dz
    Ai_Gamma(x) = 1/(2 pi i) int_{G_eta}  exp( z^3/3 - x z) / Gamma(z / kappa) dz

G_zeta comes in from infinity at angle -2pi/3, crosses the real axis to the
right of 0 and leaves at angle 2pi/3.  G_eta crosses the real axis at a
positive point and runs *downwards*, from infinity at angle pi/3 to infinity at
angle -pi/3; with that orientation det(I - K) built from the printed
mu-factor is a distribution function (see ``operator``).

Each evaluation picks the contour used for the corresponding case of the
envelope argument, rescaled by z = s |x|^(1/2) where the argument does so, and
integrates a log-scaled integrand so tolerances are relative.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .contours import Arc, Contour, Line, QuadResult, Ray, deform_check, integrate
from .special import loggamma

DEFAULT_T0 = 1.0
DEFAULT_TOL = 1e-12
IMAG_TOL = 1e-8
# Ai_Gamma(v) < exp(-2/3 v^{3/2}) * O(1) is below 1e-289 past this point
LOWER_ZERO = 100.0

_TWO_PI_I = 2j * math.pi


def kappa(T: float) -> float:
    """kappa_T = 2^(-1/3) T^(1/3)."""
    return 2.0 ** (-1.0 / 3.0) * T ** (1.0 / 3.0)


@dataclass(frozen=True)
class DeformedAiryParams:
    x: float
    kappa_inv: float
    shift: float = 0.0

    def __post_init__(self):
        if not self.kappa_inv > 0:
            raise ValueError("kappa_inv must be positive")
        if self.shift != 0.0:
            raise NotImplementedError("only shift = 0 is supported")

    @classmethod
    def from_T(cls, x: float, T: float) -> "DeformedAiryParams":
        return cls(float(x), 1.0 / kappa(T))

    @property
    def kappa(self) -> float:
        return 1.0 / self.kappa_inv

    @property
    def T(self) -> float:
        return 2.0 / self.kappa_inv ** 3


@dataclass
class AiryEvalResult:
    value: float
    imag_residual: float
    contour_case: str
    quad: QuadResult


class ImagResidualError(RuntimeError):
    pass


# -- contour plans -----------------------------------------------------------

@dataclass
class _Plan:
    contour: Contour          # in the s-plane, z = scale * s
    scale: float
    case: str
    residue: float = 0.0
    sign: float = 1.0         # +1 upward orientation, -1 for the downward G_eta


def _wedge():
    # -inf e^{-3i pi/4} -> -i, right half unit circle, i -> inf e^{3i pi/4}
    return [Ray(-1j, -0.75 * math.pi, inward=True), Arc(0j, 1.0, -0.5 * math.pi, 0.5 * math.pi),
            Ray(1j, 0.75 * math.pi)]


def _chevron():
    # inf e^{-i pi/4} -> -i -> i -> inf e^{i pi/4}
    return [Ray(-1j, -0.25 * math.pi, inward=True), Line(-1j, 1j), Ray(1j, 0.25 * math.pi)]


def _rays_through(c, angle):
    return [Ray(complex(c), -angle, inward=True), Ray(complex(c), angle)]


def _vertical(c):
    return [Ray(complex(c), -0.5 * math.pi, inward=True), Ray(complex(c), 0.5 * math.pi)]


def upper_plan(x: float, kappa_inv: float, T0: float = DEFAULT_T0, deformed: bool = True) -> _Plan:
    """Contour used for Ai^Gamma at x; ``deformed=False`` gives the generic one."""
    k = 1.0 / kappa_inv
    k0 = kappa(T0)
    if k0 > k * (1 + 1e-12):
        raise ValueError("T must be >= T0")
    if not deformed:
        return _Plan(Contour(_rays_through(1.0, 2.0 * math.pi / 3.0)), 1.0, "upper_undeformed")
    s0 = -0.5 * k0
    if x >= 0:
        return _Plan(Contour(_vertical(s0)), 1.0, "upper_x_pos", residue=k)
    xt = -x
    root = math.sqrt(xt)
    if root <= k0:
        return _Plan(Contour(_vertical(s0)), 1.0, "upper_case1", residue=k)
    case = "upper_case2" if root <= k + 1.0 else "upper_case3"
    return _Plan(Contour(_wedge()), root, case)


def lower_plan(x: float, kappa_inv: float, T0: float = DEFAULT_T0, deformed: bool = True) -> _Plan:
    """Contour used for Ai_Gamma at x (traversed downwards)."""
    k0 = kappa(T0)
    if k0 > (1.0 / kappa_inv) * (1 + 1e-12):
        raise ValueError("T must be >= T0")
    if not deformed:
        return _Plan(Contour(_rays_through(1.0, math.pi / 3.0)), 1.0, "lower_undeformed", sign=-1.0)
    root = math.sqrt(abs(x))
    if x >= 0:
        if root <= k0:
            return _Plan(Contour(_vertical(1.0)), 1.0, "lower_case1_pos", sign=-1.0)
        return _Plan(Contour(_rays_through(1.0, math.pi / 3.0)), root, "lower_case2_pos", sign=-1.0)
    if root <= k0:
        return _Plan(Contour(_vertical(1.0)), 1.0, "lower_case1_neg", sign=-1.0)
    return _Plan(Contour(_chevron()), root, "lower_case2_neg", sign=-1.0)


# -- integrands --------------------------------------------------------------

def _log_integrand(upper: bool, x: float, b: float, lam: float, s):
    z = lam * np.asarray(s, dtype=complex)
    if upper:
        return -z ** 3 / 3.0 + x * z + loggamma(b * z) + math.log(lam)
    # 1/Gamma vanishes at the poles of Gamma; exp(-inf) -> 0 handles them
    return z ** 3 / 3.0 - x * z - loggamma(b * z) + math.log(lam)


def _log_scale(plan: _Plan, upper: bool, x: float, b: float) -> float:
    """log of the largest integrand magnitude seen on the contour (plus the residue).

    Tolerances are taken relative to this, which makes them relative to the
    result whenever the contour is a steepest-descent one.
    """
    lam = plan.scale
    u = np.linspace(0.0, 1.0, 65)
    pts = []
    for seg in plan.contour.segments:
        if isinstance(seg, Ray):
            seg = seg.with_length(12.0 / lam)
        pts.append(seg.point(u))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        vals = _log_integrand(upper, x, b, lam, np.concatenate(pts)).real
    ref = float(np.max(vals[np.isfinite(vals)]))
    if plan.residue:
        ref = max(ref, math.log(plan.residue))
    return ref


def _trim_rays(plan: _Plan, logf, log_scale: float, tol: float) -> Contour:
    """Truncate rays once the scaled integrand is below tol * e^-12 and decaying."""
    segs = []
    cut = math.log(tol) - 12.0
    for seg in plan.contour.segments:
        if isinstance(seg, Ray):
            r = 2.0
            while r < 400.0:
                pts = seg.z0 + seg.direction * np.array([r, 1.25 * r])
                vals = logf(pts).real - log_scale
                if np.all(vals < cut) and vals[1] <= vals[0]:
                    break
                r *= 1.25
            seg = seg.with_length(1.25 * r)
        segs.append(seg)
    return Contour(segs)


def _evaluate(upper: bool, p: DeformedAiryParams, T0: float, tol: float, deformed: bool) -> AiryEvalResult:
    x, b = float(p.x), float(p.kappa_inv)
    plan = (upper_plan if upper else lower_plan)(x, b, T0, deformed)
    lam = plan.scale
    logf = lambda s: _log_integrand(upper, x, b, lam, s)
    log_scale = _log_scale(plan, upper, x, b)
    contour = _trim_rays(plan, logf, log_scale, tol)

    def f(s):
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            v = np.exp(logf(s) - log_scale)
        return np.where(np.isfinite(v), v, 0.0)

    q = integrate(contour, f, abs_tol=tol * 2.0 * math.pi)
    scale = math.exp(log_scale)
    total = plan.sign * scale * q.value / _TWO_PI_I + plan.residue
    quad = QuadResult(q.value * scale, q.abs_error_estimate * scale / (2 * math.pi), q.nodes_used)
    res = AiryEvalResult(float(total.real), float(total.imag), plan.case, quad)
    if abs(res.imag_residual) > IMAG_TOL * max(1.0, abs(res.value)):
        raise ImagResidualError(f"imaginary residual {res.imag_residual:g} at x={x}, case {plan.case}")
    return res


def ai_upper_gamma(p: DeformedAiryParams, T0: float = DEFAULT_T0, tol: float = DEFAULT_TOL,
                   deformed: bool = True) -> AiryEvalResult:
    """Ai^Gamma(x, kappa_T^-1, 0) on the case contour (residue kappa_T added for the line)."""
    return _evaluate(True, p, T0, tol, deformed)


def ai_lower_gamma(p: DeformedAiryParams, T0: float = DEFAULT_T0, tol: float = DEFAULT_TOL,
                   deformed: bool = True) -> AiryEvalResult:
    """Ai_Gamma(x, kappa_T^-1, 0) on the case contour."""
    return _evaluate(False, p, T0, tol, deformed)


def upper_integrand(x: float, kappa_inv: float):
    """Unscaled exp(-z^3/3 + x z) Gamma(z / kappa), vectorised in z."""
    def f(z):
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(_log_integrand(True, x, kappa_inv, 1.0, z))
    return f


def residue_defect(x: float, T: float, T0: float = DEFAULT_T0, tol: float = 1e-12) -> float:
    """|I(rays through 1) - I(line s0 + it) - 2 pi i kappa_T| for the Ai^Gamma integrand.

    The two contours differ only across the simple pole of Gamma(z / kappa) at 0,
    whose residue is kappa_T, so this is zero up to quadrature error.
    """
    b = 1.0 / kappa(T)
    k0 = kappa(T0)
    logf = lambda z: _log_integrand(True, x, b, 1.0, z)
    c1 = _trim_rays(_Plan(Contour(_rays_through(1.0, 2.0 * math.pi / 3.0)), 1.0, ""), logf, 0.0, tol)
    c2 = _trim_rays(_Plan(Contour(_vertical(-0.5 * k0)), 1.0, ""), logf, 0.0, tol)
    return deform_check(c1, c2, upper_integrand(x, b), residues_between=[kappa(T)], abs_tol=tol)


# -- classical Airy through the same machinery ------------------------------

def airy_classical(x: float, derivative: bool = False, tol: float = 1e-13) -> float:
    """Ai(x) (or Ai'(x)) = 1/(2 pi i) int exp(t^3/3 - x t) dt, steepest-descent contours."""
    x = float(x)
    if abs(x) > 20:
        raise ValueError("airy_classical validated for |x| <= 20")
    root = math.sqrt(abs(x))
    if x > 1.0:
        segs, lam, ref = _rays_through(1.0, math.pi / 3.0), root, 1.0
    elif x < -1.0:
        segs, lam, ref = _chevron(), root, 1j
    else:
        segs, lam, ref = _rays_through(1.0, math.pi / 3.0), 1.0, 1.0

    def logf(s):
        t = lam * np.asarray(s, dtype=complex)
        out = t ** 3 / 3.0 - x * t + math.log(lam)
        return out

    def f(s):
        t = lam * np.asarray(s, dtype=complex)
        v = np.exp(logf(s) - log_scale)
        return -t * v if derivative else v

    log_scale = float(logf(ref).real)
    contour = _trim_rays(_Plan(Contour(segs), lam, "classical"), logf, log_scale, tol)
    q = integrate(contour, f, abs_tol=tol)
    return float((math.exp(log_scale) * q.value / _TWO_PI_I).real)


# -- tabulated evaluation for kernel assembly -------------------------------

class AiryTable:
    """Piecewise Chebyshev interpolant of Ai^Gamma or Ai_Gamma for one T.

    Panels [k h, (k+1) h] are built lazily on first use.  For the lower
    function, panels right of v = 1 store Ai_Gamma(v) exp(2/3 v^{3/2}) so that
    the super-exponential decay keeps full relative accuracy.  For the upper
    function, arguments past ``v_hi`` use the two-residue expansion
    kappa (1 - exp(kappa^3/3 - kappa v)), whose error is below 1e-17 kappa there.
    The lower function is returned as 0 past ``LOWER_ZERO``, where it is below 1e-289.
    """

    def __init__(self, which: str, T: float, T0: float = DEFAULT_T0, width: float = 1.0,
                 degree: int = 24, tol: float = 1e-13):
        if which not in ("upper", "lower"):
            raise ValueError(which)
        self.which = which
        self.T = float(T)
        self.T0 = float(T0)
        self.kappa = kappa(T)
        self.width = width
        self.degree = degree
        self.tol = tol
        self._panels: dict[int, np.ndarray] = {}
        self.v_hi = _upper_asymptotic_start(self.kappa) if which == "upper" else LOWER_ZERO

    def _direct(self, v: float) -> float:
        p = DeformedAiryParams.from_T(v, self.T)
        fn = ai_upper_gamma if self.which == "upper" else ai_lower_gamma
        return fn(p, T0=self.T0, tol=self.tol).value

    def _scaled(self, k: int) -> bool:
        return self.which == "lower" and k * self.width >= 1.0

    def _build(self, k: int) -> np.ndarray:
        a = k * self.width
        n = self.degree + 1
        nodes = np.cos(np.pi * (np.arange(n) + 0.5) / n)
        v = a + 0.5 * self.width * (nodes + 1.0)
        vals = np.array([self._direct(t) for t in v])
        if self._scaled(k):
            vals = vals * np.exp(2.0 / 3.0 * v ** 1.5)
        coef = np.polynomial.chebyshev.chebfit(nodes, vals, self.degree)
        self._panels[k] = coef
        return coef

    def ensure(self, lo: float, hi: float):
        for k in range(int(math.floor(lo / self.width)), int(math.floor(hi / self.width)) + 1):
            if k not in self._panels:
                self._build(k)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        far = v > self.v_hi
        if far.any():
            if self.which == "upper":
                k = self.kappa
                out[far] = k * (1.0 - np.exp(k ** 3 / 3.0 - k * v[far]))
            else:
                out[far] = 0.0
        near = ~far
        if near.any():
            vn = v[near]
            idx = np.floor(vn / self.width).astype(np.int64)
            uniq = np.unique(idx)
            for k in uniq:
                if k not in self._panels:
                    self._build(int(k))
            coef = np.stack([self._panels[int(k)] for k in uniq])
            pos = np.searchsorted(uniq, idx)
            c = coef[pos]
            t = 2.0 * (vn - idx * self.width) / self.width - 1.0
            # Clenshaw recurrence, vectorised over points
            b1 = np.zeros_like(t)
            b2 = np.zeros_like(t)
            for j in range(self.degree, 0, -1):
                b1, b2 = c[:, j] + 2.0 * t * b1 - b2, b1
            res = c[:, 0] + t * b1 - b2
            scaled = (idx * self.width >= 1.0) if self.which == "lower" else np.zeros_like(t, bool)
            if scaled.any():
                res[scaled] = res[scaled] * np.exp(-2.0 / 3.0 * vn[scaled] ** 1.5)
            out[near] = res
        return out


def _upper_asymptotic_start(k: float) -> float:
    """Smallest v with the remaining line integral at Re z = -1.5 kappa below 1e-17 kappa."""
    c = 1.5 * k
    # |Gamma(-1.5)| = 2.363...; Gaussian factor sqrt(pi / c) / (2 pi)
    log_pref = math.log(2.3633) + 0.5 * math.log(math.pi / c) - math.log(2 * math.pi)
    # c^3/3 - c v + log_pref <= log(1e-17 k)
    return max(8.0, (c ** 3 / 3.0 + log_pref - math.log(1e-17 * k)) / c)


@lru_cache(maxsize=16)
def get_table(which: str, T: float, T0: float = DEFAULT_T0) -> AiryTable:
    return AiryTable(which, T, T0)
