"""Empirical constants for the three deformed-Airy envelopes.

    |Ai^Gamma(x)| <= C T^(1/3)                               for all real x
    |Ai_Gamma(x)| <= C T^(-1/3) exp(-2/3 x^(3/2))            for x >= 0
    |Ai_Gamma(x)| <= C T^(-1/3) exp(2 kappa_T^-1 |x|^(1/2))  for x <= 0

A scan evaluates |value| / envelope on an (x, T) grid and reports the largest ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .deformed_airy import (DEFAULT_T0, DeformedAiryParams, ai_lower_gamma, ai_upper_gamma,
                            kappa)

REFINE_DRIFT = 0.05


class Which(str, Enum):
    upper_all_x = "upper_all_x"
    lower_pos_x = "lower_pos_x"
    lower_neg_x = "lower_neg_x"


def _env_upper(x, T):
    return T ** (1.0 / 3.0)


def _env_lower_pos(x, T):
    return T ** (-1.0 / 3.0) * math.exp(-2.0 / 3.0 * x ** 1.5)


def _env_lower_neg(x, T):
    return T ** (-1.0 / 3.0) * math.exp(2.0 / kappa(T) * math.sqrt(abs(x)))


_ENVELOPES = {Which.upper_all_x: _env_upper, Which.lower_pos_x: _env_lower_pos,
              Which.lower_neg_x: _env_lower_neg}


@dataclass(frozen=True)
class EnvelopeSpec:
    which: Which

    def __post_init__(self):
        object.__setattr__(self, "which", Which(self.which))

    def envelope(self, x: float, T: float) -> float:
        return _ENVELOPES[self.which](x, T)

    def in_domain(self, x: float) -> bool:
        if self.which is Which.lower_pos_x:
            return x >= 0
        if self.which is Which.lower_neg_x:
            return x <= 0
        return True

    def value(self, x: float, T: float, T0: float = DEFAULT_T0) -> float:
        p = DeformedAiryParams.from_T(x, T)
        f = ai_upper_gamma if self.which is Which.upper_all_x else ai_lower_gamma
        return f(p, T0=T0).value


class EvaluationFailure(RuntimeError):
    def __init__(self, x, T, cause):
        super().__init__(f"evaluation failed at x={x!r}, T={T!r}: {cause}")
        self.x, self.T = x, T


@dataclass
class EnvelopeReport:
    which: str
    empirical_C: float
    argmax: tuple
    grid: dict
    monotone_tail_ok: bool
    violations: int = 0
    per_T: dict = field(default_factory=dict)
    rows: list = field(default_factory=list, repr=False)   # (x, T, value, envelope, ratio)

    def to_dict(self):
        return {"which": self.which, "empirical_C": self.empirical_C,
                "argmax": list(self.argmax), "grid": self.grid,
                "monotone_tail_ok": self.monotone_tail_ok, "violations": self.violations,
                "per_T": {str(k): v for k, v in self.per_T.items()}}


def default_x_grid(which, step: float = 0.5, lo: float = -20.0, hi: float = 20.0):
    """Linear grid at ``step`` merged with log-spaced points resolving |x| <= 1."""
    lin = np.arange(lo, hi + step / 2, step)
    small = np.geomspace(1e-3, 1.0, 7)
    pts = np.concatenate([lin, small, -small])
    pts = pts[(pts >= lo) & (pts <= hi)]
    spec = which if isinstance(which, EnvelopeSpec) else EnvelopeSpec(which)
    pts = np.array([x for x in np.unique(np.round(pts, 12)) if spec.in_domain(x)])
    return pts


def _tail_ok(xs, ratios) -> bool:
    """True unless the worst ratio over the largest decade of |x| sits at the outermost point."""
    ax = np.abs(xs)
    top = ax.max()
    if top <= 0:
        return True
    sel = ax >= top / 10.0
    a, r = ax[sel], ratios[sel]
    if a.size < 2:
        return True
    outer = r[a == a.max()].max()
    inner = r[a < a.max()].max()
    return bool(outer <= inner)


def certify_envelope(spec: EnvelopeSpec, x_grid=None, T_grid=(1.0, 8.0, 64.0),
                     T0: float = DEFAULT_T0, jobs: int = 1) -> EnvelopeReport:
    """Scan |value| / envelope over the grid; empirical_C is the max ratio."""
    if not isinstance(spec, EnvelopeSpec):
        spec = EnvelopeSpec(spec)
    xs = np.asarray(default_x_grid(spec) if x_grid is None else x_grid, dtype=float)
    xs = np.array([x for x in xs if spec.in_domain(x)])
    if xs.size == 0:
        raise ValueError("x grid has no points in the envelope's domain")
    for T in T_grid:
        if T < T0:
            raise ValueError(f"T={T} below T0={T0}")
    points = [(float(x), float(T)) for T in T_grid for x in xs]

    def one(pt):
        x, T = pt
        try:
            v = spec.value(x, T, T0)
        except Exception as exc:   # noqa: BLE001 - reported with location
            raise EvaluationFailure(x, T, exc) from exc
        env = spec.envelope(x, T)
        return (x, T, v, env, abs(v) / env)

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(_eval_point, [(spec.which.value, x, T, T0) for x, T in points]))
    else:
        rows = [one(p) for p in points]

    violations = sum(1 for r in rows if not (math.isfinite(r[4]) and r[4] >= 0))
    # deterministic tie-break: largest ratio, then smallest (x, T)
    best = max(rows, key=lambda r: (r[4], -r[0], -r[1]))
    per_T = {}
    tail_ok = True
    for T in T_grid:
        sub = [r for r in rows if r[1] == float(T)]
        per_T[float(T)] = max(r[4] for r in sub)
        tail_ok &= _tail_ok(np.array([r[0] for r in sub]), np.array([r[4] for r in sub]))
    grid = {"x_min": float(xs.min()), "x_max": float(xs.max()), "x_points": int(xs.size),
            "T": [float(t) for t in T_grid]}
    return EnvelopeReport(which=spec.which.value, empirical_C=float(best[4]),
                          argmax=(best[0], best[1]), grid=grid, monotone_tail_ok=bool(tail_ok),
                          violations=violations, per_T=per_T, rows=rows)


def _eval_point(args):
    which, x, T, T0 = args
    spec = EnvelopeSpec(which)
    try:
        v = spec.value(x, T, T0)
    except Exception as exc:   # noqa: BLE001
        raise EvaluationFailure(x, T, exc) from exc
    env = spec.envelope(x, T)
    return (x, T, v, env, abs(v) / env)


@dataclass
class RefinementReport:
    coarse: EnvelopeReport
    fine: EnvelopeReport
    drift: float

    @property
    def stable(self) -> bool:
        return self.drift < REFINE_DRIFT and self.fine.violations == 0


def certify_with_refinement(spec, step: float = 0.5, T_grid=(1.0, 8.0, 64.0),
                            T0: float = DEFAULT_T0, lo=-20.0, hi=20.0, jobs: int = 1) -> RefinementReport:
    """Run the scan at ``step`` and ``step/2`` and report the relative drift of empirical_C."""
    if not isinstance(spec, EnvelopeSpec):
        spec = EnvelopeSpec(spec)
    c = certify_envelope(spec, default_x_grid(spec, step, lo, hi), T_grid, T0, jobs)
    f = certify_envelope(spec, default_x_grid(spec, step / 2, lo, hi), T_grid, T0, jobs)
    drift = abs(f.empirical_C - c.empirical_C) / f.empirical_C
    return RefinementReport(c, f, drift)
