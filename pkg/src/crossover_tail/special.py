"""Complex gamma function and the two gamma inequalities used by the tail bounds.

The gamma function is a vectorised Lanczos approximation (g = 7, nine terms)
evaluated in log form, with the reflection formula for Re(z) < 1/2.  Working
in logs lets contour integrands combine ``Gamma`` with cubic exponentials
whose individual magnitudes would overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

POLE_TOL = 1e-12

_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_LOG_PI = math.log(math.pi)


class PoleError(ValueError):
    """Raised when Gamma is requested too close to a non-positive integer."""

    def __init__(self, z):
        super().__init__(f"gamma evaluated within {POLE_TOL:g} of a pole at z={z!r}")
        self.z = z


def _lanczos_loggamma(z):
    # valid for Re(z) >= 1/2
    zm = z - 1.0
    acc = np.full_like(zm, _LANCZOS_COEF[0])
    for i in range(1, len(_LANCZOS_COEF)):
        acc = acc + _LANCZOS_COEF[i] / (zm + i)
    t = zm + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (zm + 0.5) * np.log(t) - t + np.log(acc)


def _log_sin_pi(z):
    """log(sin(pi z)) modulo 2*pi*i, stable for large |Im z|."""
    flip = z.imag < 0
    w = np.where(flip, np.conj(z), z)
    frac = w - np.round(w.real)
    # sin(pi w) = exp(-i pi w) * (1 - exp(2 i pi w)) * (i / 2)
    out = -1j * np.pi * w + np.log(-np.expm1(2j * np.pi * frac)) + np.log(0.5j)
    return np.where(flip, np.conj(out), out)


def _pole_mask(z):
    near = np.round(z.real)
    return (near <= 0) & (np.abs(z - near) < POLE_TOL)


def loggamma(z):
    """Principal-branch-agnostic log Gamma(z) (correct modulo 2*pi*i).

    Exact poles return +inf.  Accepts scalars or arrays.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)
    right = z.real >= 0.5
    if right.any():
        out[right] = _lanczos_loggamma(z[right])
    left = ~right
    if left.any():
        zl = z[left]
        with np.errstate(divide="ignore", invalid="ignore"):
            val = _LOG_PI - _log_sin_pi(zl) - _lanczos_loggamma(1.0 - zl)
        exact = (zl == np.round(zl.real)) & (zl.real <= 0)
        val[exact] = np.inf
        out[left] = val
    return out[0] if scalar else out


def gamma(z):
    """Gamma(z) for complex z; raises PoleError near 0, -1, -2, ..."""
    z = np.asarray(z, dtype=complex)
    bad = _pole_mask(np.atleast_1d(z))
    if bad.any():
        raise PoleError(np.atleast_1d(z)[bad][0])
    with np.errstate(over="ignore"):
        return np.exp(loggamma(z))


def recip_gamma(z):
    """1/Gamma(z); entire, exactly zero at the non-positive integers."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    lg = loggamma(z)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.exp(-lg)
    out[np.isinf(lg.real) & (lg.real > 0)] = 0.0
    return out[0] if scalar else out


# -- Stirling sandwich -------------------------------------------------------

# Bernoulli-number coefficients B_{2k} / (2k (2k-1)) of the Stirling series
_STIRLING_SERIES = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360)


def stirling_remainder(x):
    """log Gamma(x) - [(x - 1/2) log x - x + log(2 pi)/2] for real x > 0.

    Uses the asymptotic series for x >= 10 (truncation error < 1e-17 there) and
    the Lanczos log-gamma below, so the remainder keeps full relative accuracy
    where it becomes tiny.
    """
    x = np.asarray(x, dtype=float)
    big = x >= 10.0
    out = np.empty_like(x)
    xb = x[big]
    acc = np.zeros_like(xb)
    for k, c in enumerate(_STIRLING_SERIES):
        acc += c / xb ** (2 * k + 1)
    out[big] = acc
    xs = x[~big]
    out[~big] = loggamma(xs).real - ((xs - 0.5) * np.log(xs) - xs + _HALF_LOG_2PI)
    return out


class StirlingViolation(AssertionError):
    def __init__(self, x, middle, lower, upper):
        super().__init__(f"Stirling sandwich fails at x={x!r}: {lower} < {middle} < {upper} is false")
        self.x = x


@dataclass
class StirlingReport:
    x: np.ndarray
    middle: np.ndarray         # (2 pi)^(-1/2) x^(1/2 - x) e^x Gamma(x)
    lower_margin: np.ndarray   # log(middle) - log(1)
    upper_margin: np.ndarray   # 1/(12x) - log(middle)

    @property
    def ok(self) -> bool:
        return bool(np.all(self.lower_margin > 0) and np.all(self.upper_margin > 0))


def check_stirling_sandwich(x, samples: int | None = None) -> StirlingReport:
    """Check 1 < (2 pi)^(-1/2) x^(1/2-x) e^x Gamma(x) < exp(1/(12x)).

    ``x`` is a point or array of points.  With ``samples`` given, ``x`` must be
    a pair ``(lo, hi)`` and the check runs on ``samples`` log-spaced points.
    Margins are compared in log space.
    """
    if samples is not None:
        lo, hi = x
        x = np.geomspace(lo, hi, samples)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0):
        raise ValueError("Stirling sandwich needs x > 0")
    log_mid = stirling_remainder(x)
    report = StirlingReport(x=x, middle=np.exp(log_mid), lower_margin=log_mid,
                            upper_margin=1.0 / (12.0 * x) - log_mid)
    bad = np.flatnonzero((report.lower_margin <= 0) | (report.upper_margin <= 0))
    if bad.size:
        i = bad[0]
        raise StirlingViolation(x[i], report.middle[i], 1.0, math.exp(1.0 / (12.0 * x[i])))
    return report


# -- reciprocal gamma envelope ----------------------------------------------

@dataclass
class GammaEnvelopeReport:
    region: tuple[float, float, float, float]
    grid_step: float
    max_ratio: float
    argmax_point: complex
    violations: int
    points: int


def check_recip_gamma_envelope(region=(0.1, 10.0, -10.0, 10.0), grid_step=0.1,
                               bound: float | None = None) -> GammaEnvelopeReport:
    """Scan |1/Gamma(z)| e^{-2|z|} over a rectangle in Re(z) > 0.

    The maximum is the empirical constant C in |1/Gamma(z)| <= C e^{2|z|}.
    A violation is a non-finite ratio, or a ratio above ``bound`` when given.
    """
    re_min, re_max, im_min, im_max = region
    if re_min <= 0:
        raise ValueError("region must lie in Re(z) > 0")
    nre = int(round((re_max - re_min) / grid_step)) + 1
    nim = int(round((im_max - im_min) / grid_step)) + 1
    re = np.linspace(re_min, re_max, nre)
    im = np.linspace(im_min, im_max, nim)
    z = (re[:, None] + 1j * im[None, :]).ravel()
    # log-space ratio avoids overflow of 1/Gamma for large |Im z|
    log_ratio = -loggamma(z).real - 2.0 * np.abs(z)
    ratio = np.exp(log_ratio)
    bad = ~np.isfinite(ratio)
    if bound is not None:
        bad |= ratio > bound
    i = int(np.nanargmax(np.where(np.isfinite(ratio), ratio, -np.inf)))
    return GammaEnvelopeReport(region=tuple(region), grid_step=grid_step,
                               max_ratio=float(ratio[i]), argmax_point=complex(z[i]),
                               violations=int(bad.sum()), points=int(z.size))
