"""Oriented piecewise contours and adaptive Gauss-Legendre integration along them."""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

DEFAULT_ABS_TOL = 1e-10
DEFAULT_MAX_NODES = 2 ** 14
DEFAULT_RAY_LENGTH = 30.0
CONNECT_TOL = 1e-9
PANEL_ORDER = 16


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


# -- segments ----------------------------------------------------------------
# Every segment maps a parameter u in [0, 1] to a point z(u) and dz/du.

@dataclass(frozen=True)
class Line:
    z0: complex
    z1: complex

    def __post_init__(self):
        if abs(self.z1 - self.z0) == 0:
            raise ValueError("line endpoints must be distinct")

    def point(self, u):
        return self.z0 + (self.z1 - self.z0) * u

    def deriv(self, u):
        return np.full(np.shape(u), self.z1 - self.z0, dtype=complex)

    @property
    def start(self):
        return complex(self.z0)

    @property
    def end(self):
        return complex(self.z1)

    def reversed(self):
        return Line(self.z1, self.z0)


@dataclass(frozen=True)
class Ray:
    """Ray z0 + r e^{i angle}, r in [0, length].

    ``inward`` rays run from the truncation point back to z0, i.e. they model a
    path coming in from infinity.
    """
    z0: complex
    angle: float
    length: float = DEFAULT_RAY_LENGTH
    inward: bool = False

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("ray truncation length must be positive")

    @property
    def direction(self):
        return cmath.exp(1j * self.angle)

    def _r(self, u):
        return self.length * (1.0 - u) if self.inward else self.length * u

    def point(self, u):
        return self.z0 + self._r(np.asarray(u)) * self.direction

    def deriv(self, u):
        d = -self.length if self.inward else self.length
        return np.full(np.shape(u), d * self.direction, dtype=complex)

    @property
    def start(self):
        return complex(self.point(0.0))

    @property
    def end(self):
        return complex(self.point(1.0))

    @property
    def open_start(self):
        return self.inward

    @property
    def open_end(self):
        return not self.inward

    def reversed(self):
        return Ray(self.z0, self.angle, self.length, not self.inward)

    def with_length(self, length):
        return Ray(self.z0, self.angle, length, self.inward)


@dataclass(frozen=True)
class Arc:
    center: complex
    radius: float
    theta0: float
    theta1: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("arc radius must be positive")

    def point(self, u):
        th = self.theta0 + (self.theta1 - self.theta0) * np.asarray(u)
        return self.center + self.radius * np.exp(1j * th)

    def deriv(self, u):
        dth = self.theta1 - self.theta0
        th = self.theta0 + dth * np.asarray(u)
        return 1j * self.radius * dth * np.exp(1j * th)

    @property
    def start(self):
        return complex(self.point(0.0))

    @property
    def end(self):
        return complex(self.point(1.0))

    def reversed(self):
        return Arc(self.center, self.radius, self.theta1, self.theta0)


Segment = Line | Ray | Arc


@dataclass
class Contour:
    segments: list = field(default_factory=list)

    def __post_init__(self):
        self.segments = list(self.segments)
        self.validate()

    def validate(self):
        segs = self.segments
        if not segs:
            raise ValueError("empty contour")
        for a, b in zip(segs, segs[1:]):
            if getattr(a, "open_end", False) and getattr(b, "open_start", False):
                continue
            if abs(a.end - b.start) > CONNECT_TOL:
                raise ValueError(f"segments do not connect: {a.end} -> {b.start}")
        self._check_simple()

    def _check_simple(self, samples=40):
        u = (np.arange(samples) + 0.5) / samples
        pts = [np.asarray(s.point(u)) for s in self.segments]
        scale = max(max(abs(s.start), abs(s.end)) for s in self.segments) + 1.0
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d = np.abs(pts[i][:, None] - pts[j][None, :]).min()
                if d < 1e-9 * scale:
                    raise ValueError(f"contour self-intersects between segments {i} and {j}")

    def reversed(self):
        return Contour([s.reversed() for s in reversed(self.segments)])

    def to_dict(self):
        out = []
        for s in self.segments:
            if isinstance(s, Line):
                out.append({"kind": "line", "z0": _c2l(s.z0), "z1": _c2l(s.z1)})
            elif isinstance(s, Ray):
                out.append({"kind": "ray", "z0": _c2l(s.z0), "angle": s.angle,
                            "length": s.length, "inward": s.inward})
            else:
                out.append({"kind": "arc", "center": _c2l(s.center), "radius": s.radius,
                            "theta0": s.theta0, "theta1": s.theta1})
        return {"segments": out}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        segs = []
        for e in d["segments"]:
            kind = e["kind"]
            if kind == "line":
                segs.append(Line(_l2c(e["z0"]), _l2c(e["z1"])))
            elif kind == "ray":
                segs.append(Ray(_l2c(e["z0"]), float(e["angle"]),
                                float(e.get("length", DEFAULT_RAY_LENGTH)), bool(e.get("inward", False))))
            elif kind == "arc":
                segs.append(Arc(_l2c(e["center"]), float(e["radius"]),
                                float(e["theta0"]), float(e["theta1"])))
            else:
                raise ValueError(f"unknown segment kind {kind!r}")
        return cls(segs)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _c2l(z):
    z = complex(z)
    return [z.real, z.imag]


def _l2c(v):
    if isinstance(v, (int, float)):
        return complex(v)
    return complex(v[0], v[1])


# -- integration -------------------------------------------------------------

@dataclass
class QuadResult:
    value: complex
    abs_error_estimate: float
    nodes_used: int

    def __add__(self, other):
        return QuadResult(self.value + other.value,
                          self.abs_error_estimate + other.abs_error_estimate,
                          self.nodes_used + other.nodes_used)


class QuadratureError(RuntimeError):
    def __init__(self, message, best: QuadResult):
        super().__init__(message)
        self.best = best


def _panel_sums(seg, f, a, b, order):
    """GL sums of f(z) dz/du over the panels [a_k, b_k] of one segment."""
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    u = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
    vals = f(seg.point(u.ravel())) * seg.deriv(u.ravel())
    vals = np.asarray(vals, dtype=complex).reshape(u.shape)
    return (vals * w[None, :]).sum(axis=1) * half, u.size


def integrate_segment(seg, f, abs_tol=DEFAULT_ABS_TOL, rel_tol=0.0,
                      max_nodes=DEFAULT_MAX_NODES, initial_panels=4,
                      order=PANEL_ORDER) -> QuadResult:
    """Adaptive panel bisection on one segment.

    A panel is accepted once its single-panel estimate and the sum over its two
    halves differ by less than its share of the tolerance; the finer value is
    kept and the difference is added to the error estimate.
    """
    edges = np.linspace(0.0, 1.0, initial_panels + 1)
    a, b = edges[:-1], edges[1:]
    coarse, nodes = _panel_sums(seg, f, a, b, order)
    done_val = 0j
    done_err = 0.0
    while True:
        mid = 0.5 * (a + b)
        left, n1 = _panel_sums(seg, f, a, mid, order)
        right, n2 = _panel_sums(seg, f, mid, b, order)
        nodes += n1 + n2
        fine = left + right
        diff = np.abs(fine - coarse)
        total = done_val + fine.sum()
        tol = max(abs_tol, rel_tol * abs(total))
        ok = diff <= tol * (b - a)
        done_val += fine[ok].sum()
        done_err += diff[ok].sum()
        if ok.all():
            return QuadResult(complex(done_val), float(done_err), int(nodes))
        keep = ~ok
        if nodes >= max_nodes:
            best = QuadResult(complex(done_val + fine[keep].sum()),
                              float(done_err + diff[keep].sum()), int(nodes))
            raise QuadratureError(
                f"no convergence after {nodes} nodes on {seg!r}; worst panel "
                f"[{a[keep][0]:.3g}, {b[keep][0]:.3g}]", best)
        a = np.concatenate([a[keep], mid[keep]])
        b = np.concatenate([mid[keep], b[keep]])
        coarse = np.concatenate([left[keep], right[keep]])
        order_idx = np.argsort(a, kind="stable")
        a, b, coarse = a[order_idx], b[order_idx], coarse[order_idx]


def fit_ray_length(ray: Ray, decay: Callable, tol: float, max_doublings=8) -> Ray:
    """Shortest length in {R/16, R/8, ..., 2^k R} whose tail bound is below tol/10."""
    r = ray.length / 16.0
    for _ in range(4 + max_doublings):
        if decay(ray, r) < tol / 10.0:
            return ray.with_length(r)
        r *= 2.0
    return ray.with_length(r)


def integrate(contour: Contour, integrand: Callable, abs_tol: float = DEFAULT_ABS_TOL,
              rel_tol: float = 0.0, max_nodes: int = DEFAULT_MAX_NODES,
              decay: Callable | None = None, initial_panels: int = 4) -> QuadResult:
    """Integrate a vectorised holomorphic ``integrand`` along ``contour``.

    ``decay(ray, r)`` optionally bounds the integral of |f| beyond radius r on a
    ray; rays are then truncated where that bound drops below abs_tol/10 and the
    bound is added to the error estimate.
    """
    if not abs_tol > 0:
        raise ValueError("abs_tol must be positive")
    total = QuadResult(0j, 0.0, 0)
    n = len(contour.segments)
    for seg in contour.segments:
        tail = 0.0
        if decay is not None and isinstance(seg, Ray):
            seg = fit_ray_length(seg, decay, abs_tol)
            tail = float(decay(seg, seg.length))
        res = integrate_segment(seg, integrand, abs_tol / n, rel_tol, max_nodes,
                                initial_panels=initial_panels)
        total = total + QuadResult(res.value, res.abs_error_estimate + tail, res.nodes_used)
    return total


def deform_check(c1: Contour, c2: Contour, integrand: Callable,
                 residues_between: Sequence[complex] = (), abs_tol: float = DEFAULT_ABS_TOL,
                 **kw) -> float:
    """|int_c1 f - int_c2 f - 2 pi i sum(residues)|, which should be at noise level."""
    r1 = integrate(c1, integrand, abs_tol, **kw)
    r2 = integrate(c2, integrand, abs_tol, **kw)
    return abs(r1.value - r2.value - 2j * math.pi * sum(residues_between, 0j))


def circle(center: complex, radius: float) -> Contour:
    """Positively oriented full circle, split into two arcs."""
    return Contour([Arc(center, radius, -math.pi, 0.0), Arc(center, radius, 0.0, math.pi)])
