"""The crossover kernel K(x, y) on L^2(s, inf), its conjugated factors A1, A2 and their HS norms.

    K(x, y)  = int mu / (exp(-kappa t) - mu) Ai^Gamma(x + t) Ai_Gamma(y + t) dt
    A1(x, t) = Ai^Gamma(x + t) (x^4 + 1)^(-1/2) (t^4 + 1)^(-1/2)
    A2(t, y) = mu / (exp(-kappa t) - mu) Ai_Gamma(y + t) (y^4 + 1)^(1/2) (t^4 + 1)^(1/2)

so that int A1(x, t) A2(t, y) dt = (x^4+1)^(-1/2) K(x, y) (y^4+1)^(1/2), the
kernel of U^-1 K U with U f(x) = (x^4 + 1)^(1/2) f(x).

Deformed Airy values come from the per-T Chebyshev tables in ``deformed_airy``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contours import Line, QuadResult, integrate_segment, gauss_legendre
from .deformed_airy import DEFAULT_T0, get_table, kappa

POLE_TOL = 1e-12
# t = u - y below -T_CUT / kappa contributes below e^-45 relative to |mu|
T_CUT = 45.0
# store the mu-independent tensor when it has at most this many entries
STORE_LIMIT = 2 * 10 ** 7


class KernelPoleError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    T: float
    mu: complex
    s: float
    T0: float = DEFAULT_T0

    def __post_init__(self):
        if self.T < self.T0:
            raise ValueError("T must be >= T0")
        mu = complex(self.mu)
        if mu.imag == 0 and mu.real > 0:
            raise ValueError("mu must avoid (0, inf)")

    @property
    def kappa(self) -> float:
        return kappa(self.T)

    @property
    def largeness_threshold(self) -> float:
        """The s-threshold 64 kappa_{T0}^{-4} above which the tail estimates apply."""
        return 64.0 * kappa(self.T0) ** -4

    def upper(self):
        return get_table("upper", self.T, self.T0)

    def lower(self):
        return get_table("lower", self.T, self.T0)


def mu_factor(t, spec: KernelSpec):
    """mu / (exp(-kappa t) - mu), vectorised in t."""
    return _mu_factor(np.asarray(t, dtype=float), complex(spec.mu), spec.kappa)


def _mu_factor(t, mu, k, check=True):
    with np.errstate(over="ignore"):
        e = np.exp(-k * t)
    den = e - mu
    if check and np.any(np.abs(den) < POLE_TOL):
        i = np.flatnonzero(np.abs(den) < POLE_TOL)[0]
        raise KernelPoleError(f"mu-factor pole at t={np.ravel(t)[i]!r}, mu={mu!r}")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = mu / den
    return np.where(np.isinf(e), 0.0, out)


def t_window(y: float, spec: KernelSpec, tol: float = 1e-12):
    """Truncation window [t_lo, t_hi] for the kernel's t-integral at second argument y.

    Below t_lo the mu-factor is below |mu| e^{kappa t} and Ai_Gamma grows at most
    like e^{2 |u|^(1/2) / kappa}; above t_hi, Ai_Gamma(y + t) is below
    e^{-2/3 (y+t)^(3/2)}.  Both neglected pieces are under tol/10 relative.
    """
    k = spec.kappa
    b = 1.0 / k
    log_gap = -math.log(tol / 10.0)
    L = (log_gap + math.log(1.0 + abs(spec.mu))) / k
    L += 2.0 * b * math.sqrt(L + max(y, 0.0)) / k
    u_hi = (1.5 * log_gap + max(y, 0.0) ** 1.5) ** (2.0 / 3.0)
    return -y - L, u_hi - y


def kernel_eval(x: float, y: float, spec: KernelSpec, tol: float = 1e-12) -> complex:
    """K(x, y) by adaptive quadrature in t over the envelope window."""
    return kernel_eval_quad(x, y, spec, tol).value


def kernel_eval_quad(x: float, y: float, spec: KernelSpec, tol: float = 1e-12,
                     window_scale: float = 1.0) -> QuadResult:
    """``window_scale`` > 1 widens the truncation window about its centre."""
    up, lo = spec.upper(), spec.lower()
    t_lo, t_hi = t_window(y, spec, tol)
    if window_scale != 1.0:
        mid, half = 0.5 * (t_lo + t_hi), 0.5 * (t_hi - t_lo) * window_scale
        t_lo, t_hi = mid - half, mid + half
    mu, k = complex(spec.mu), spec.kappa

    def f(t):
        t = t.real
        return _mu_factor(t, mu, k) * up(x + t) * lo(y + t)

    seg = Line(complex(t_lo), complex(t_hi))
    pilot = integrate_segment(seg, lambda t: np.abs(f(t)), abs_tol=1e-300, rel_tol=1e-3,
                              initial_panels=max(4, int(t_hi - t_lo)))
    mass = abs(pilot.value)
    return integrate_segment(seg, f, abs_tol=max(tol * mass, 1e-300), rel_tol=0.0,
                             initial_panels=max(4, int(t_hi - t_lo)))


def mu_factor_envelope(T: float, t, mus, power: int = 1) -> float:
    """max over (t, mu) of |mu_factor|^p / (|mu|^p (e^{2 kappa t} ^ 1)).

    With power 2 this is the squared bound used for the A2 norm; power 1 is the
    unsquared variant, whose ratio grows like e^{-kappa t} as t -> -inf.
    """
    k = kappa(T)
    t = np.asarray(t, dtype=float)[:, None]
    mus = np.asarray(mus, dtype=complex)[None, :]
    f = np.abs(_mu_factor(t, mus, k)) ** power
    env = np.abs(mus) ** power * np.minimum(np.exp(2.0 * k * t), 1.0)
    return float(np.max(f / env))


def a1_kernel(x, t, spec: KernelSpec):
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    return spec.upper()(x + t) / np.sqrt((x ** 4 + 1.0) * (t ** 4 + 1.0))


def a2_kernel(t, y, spec: KernelSpec):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    return mu_factor(t, spec) * spec.lower()(y + t) * np.sqrt((y ** 4 + 1.0) * (t ** 4 + 1.0))


# -- fast assembly on a fixed u-grid ----------------------------------------

def composite_gl(a: float, b: float, width: float = 1.0, order: int = 20):
    """Composite Gauss-Legendre nodes and weights on [a, b] with panels of at most ``width``."""
    npan = max(1, int(math.ceil((b - a) / width)))
    edges = np.linspace(a, b, npan + 1)
    x, w = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def u_range(s: float, spec_kappa: float, rel_floor: float = 40.0):
    """u-grid limits for kernel assembly on (s, inf).

    Lower end: t = u - y >= -T_CUT/kappa for every y >= s.  Upper end: Ai_Gamma(u)
    is e^{-rel_floor} below its value at max(s, 0).
    """
    lo = s - T_CUT / spec_kappa
    hi = (max(s, 0.0) ** 1.5 + 1.5 * rel_floor) ** (2.0 / 3.0)
    return lo, hi


@dataclass
class KernelAssembler:
    """Kernel matrices K(x_i, y_j) for many mu on fixed nodes.

    Substituting u = y + t,  K(x, y) = int mu_factor(u - y) Ai^Gamma(x - y + u) Ai_Gamma(u) du,
    so the mu-independent part G[j, i, k] = Ai^Gamma(x_i - y_j + u_k) Ai_Gamma(u_k) w_k is
    tabulated once and each mu costs one contraction.
    """
    T: float
    s: float
    nodes: np.ndarray
    T0: float = DEFAULT_T0
    u_width: float = 1.0
    u_order: int = 20
    u_nodes: np.ndarray = field(init=False, repr=False)
    G: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.kappa = kappa(self.T)
        lo, hi = u_range(self.s, self.kappa)
        self.u_nodes, self.u_weights = composite_gl(lo, hi, self.u_width, self.u_order)
        self._up = get_table("upper", self.T, self.T0)
        low = get_table("lower", self.T, self.T0)
        x = np.asarray(self.nodes, dtype=float)
        self._x = x
        self._lower_w = low(self.u_nodes) * self.u_weights
        self.t = self.u_nodes[None, :] - x[:, None]                 # [j, k]
        self.live = self.t >= -T_CUT / self.kappa
        n, nu = x.size, self.u_nodes.size
        self.G = None
        if n * n * nu <= STORE_LIMIT:
            self.G = np.stack([self._column_block(j) for j in range(n)])

    def _column_block(self, j):
        """G[j] = Ai^Gamma(x_i - y_j + u_k) Ai_Gamma(u_k) w_k, zero where t is cut."""
        x, u = self._x, self.u_nodes
        live = self.live[j]
        out = np.zeros((x.size, u.size))
        v = x[:, None] - x[j] + u[None, live]
        out[:, live] = self._up(v.ravel()).reshape(v.shape) * self._lower_w[None, live]
        return out

    def matrices(self, mus) -> np.ndarray:
        """K[m, i, j] for each mu in ``mus``."""
        mus = np.atleast_1d(np.asarray(mus, dtype=complex))
        n = len(self.nodes)
        out = np.empty((mus.size, n, n), dtype=complex)
        for j in range(n):
            Gj = self.G[j] if self.G is not None else self._column_block(j)   # [i, k]
            S = self.sigma(j, mus)
            out[:, :, j] = (S.real @ Gj.T) + 1j * (S.imag @ Gj.T)
        return out

    def sigma(self, j, mus):
        """mu-factor at t = u_k - y_j for each mu, zero on the cut region."""
        tj = self.t[j]
        with np.errstate(over="ignore"):
            e = np.exp(-self.kappa * tj)
        with np.errstate(invalid="ignore", divide="ignore"):
            S = mus[:, None] / (e[None, :] - mus[:, None])
        return np.where(np.isinf(e)[None, :] | ~self.live[j][None, :], 0.0, S)

    def profile_trace(self, weights, profile) -> float:
        """sum_j w_j K_rho(x_j, x_j) with the mu-factor replaced by profile(t)."""
        acc = 0.0
        for j in range(len(self.nodes)):
            Gj = self.G[j] if self.G is not None else self._column_block(j)
            r = np.where(self.live[j], profile(self.t[j]), 0.0)
            acc += weights[j] * float(Gj[j] @ r)
        return acc

    def weighted_matrix(self, weights, profile) -> np.ndarray:
        """sqrt(w_i) K_rho(x_i, x_j) sqrt(w_j) with the mu-factor replaced by profile(t)."""
        n = len(self.nodes)
        out = np.empty((n, n))
        for j in range(n):
            Gj = self.G[j] if self.G is not None else self._column_block(j)
            r = np.where(self.live[j], profile(self.t[j]), 0.0)
            out[:, j] = Gj @ r
        sw = np.sqrt(weights)
        return sw[:, None] * out * sw[None, :]


# -- Hilbert-Schmidt norms ---------------------------------------------------

@dataclass
class HSReport:
    norm_a1: float
    norm_a2: float
    split: dict
    product: float
    abs_error_a1: float = 0.0
    abs_error_a2: float = 0.0
    nodes: int = 0
    split_error: dict = field(default_factory=dict)

    def to_dict(self):
        return {"norm_a1": self.norm_a1, "norm_a2": self.norm_a2, "split": dict(self.split),
                "split_error": dict(self.split_error),
                "product": self.product, "abs_error_a1": self.abs_error_a1,
                "abs_error_a2": self.abs_error_a2, "nodes": self.nodes}


def half_line_nodes(s: float, n: int, L: float):
    """Gauss-Legendre nodes on (s, inf) via x = s + L (1 + u) / (1 - u)."""
    u, w = gauss_legendre(n)
    x = s + L * (1.0 + u) / (1.0 - u)
    return x, w * 2.0 * L / (1.0 - u) ** 2


def _a1_sq_inner(x: float, spec: KernelSpec, t_cut=30.0):
    """int_R Ai^Gamma(x + t)^2 / (t^4 + 1) dt, and a bound on the part below -t_cut."""
    up = spec.upper()
    t1, w1 = composite_gl(-t_cut, t_cut, 1.0, 16)
    tt, wt = half_line_nodes(t_cut, 32, t_cut)
    t = np.concatenate([t1, tt])
    w = np.concatenate([w1, wt])
    val = np.sum(w * up(x + t) ** 2 / (t ** 4 + 1.0))
    return val


def _a2_sq_pieces(y: float, spec: KernelSpec, u_lo: float, order=16):
    """Inner u-integrals of |A2|^2 at fixed y: pieces u>0 (I1), u<0 (I2), [0, y/2] (I3), > y/2 (I4).

    Returns (values, errors); each error is the change from a lower-order rule.
    """
    lo = spec.lower()
    mu, k = complex(spec.mu), spec.kappa
    # past u = y the mu-factor is bounded, so cut where Ai_Gamma^2 is e^-60 below its value at y
    u_hi = (max(y, 0.0) ** 1.5 + 45.0) ** (2.0 / 3.0) + 2.0

    def rule(a, b, m):
        u, w = composite_gl(a, b, 1.0, m)
        t = u - y
        sig = np.abs(_mu_factor(t, mu, k, check=False)) ** 2
        return float(np.sum(w * sig * lo(u) ** 2 * (t ** 4 + 1.0)))

    def piece(a, b):
        if b <= a:
            return 0.0, 0.0
        v = rule(a, b, order)
        return v, abs(v - rule(a, b, order - 4)) + 1e-15 * abs(v)

    i2 = piece(u_lo, min(0.0, u_hi))
    i3 = piece(0.0, y / 2.0) if y > 0 else (0.0, 0.0)
    i4 = piece(max(y / 2.0, 0.0), max(u_hi, y / 2.0 + 2.0))
    # I1 on its own grid (panels aligned differently) for a genuine consistency check
    i1 = piece(0.0, max(u_hi, y / 2.0 + 2.0) + 0.37)
    vals = (i1[0], i2[0], i3[0], i4[0])
    errs = (i1[1], i2[1], i3[1], i4[1])
    return vals, errs


def hs_norms(spec: KernelSpec, n: int = 48, rel_tol: float = 1e-6, n_max: int = 384) -> HSReport:
    """HS norms of A1 and A2 by tensorised quadrature, doubling outer nodes until stable."""
    k = spec.kappa
    s = spec.s
    sup_upper = _sup_upper(spec)
    u_lo = -(45.0 / k + 10.0)
    prev = None
    while True:
        x, wx = half_line_nodes(s, n, max(1.0, abs(s) / 2.0))
        a1 = sum(w * _a1_sq_inner(xi, spec) / (xi ** 4 + 1.0) for xi, w in zip(x, wx))
        y, wy = half_line_nodes(s, n, min(5.0, max(0.5, 2.0 / k)))
        both = [_a2_sq_pieces(yi, spec, u_lo) for yi in y]
        pieces = np.array([b[0] for b in both])
        weight = wy * (y ** 4 + 1.0)
        i1, i2, i3, i4 = (weight[:, None] * pieces).sum(axis=0)
        inner_err = (weight[:, None] * np.array([b[1] for b in both])).sum(axis=0)
        cur = (a1, i1, i2, i3, i4)
        if prev is not None:
            err = [abs(c - p) for c, p in zip(cur, prev)]
            if all(e <= rel_tol * max(abs(c), 1e-300) for e, c in zip(err, cur)) or 2 * n > n_max:
                break
        prev = cur
        n *= 2
    # t < -30 part of the A1 integral, bounded by sup|Ai^Gamma|^2 / (3 * 30^3) * int dx/(x^4+1)
    a1_tail = sup_upper ** 2 / (3 * 30.0 ** 3) * _int_recip_quartic(s)
    norm_a2_sq = i1 + i2
    rep = HSReport(norm_a1=math.sqrt(a1), norm_a2=math.sqrt(norm_a2_sq),
                   split={"I1": i1, "I2": i2, "I3": i3, "I4": i4},
                   split_error={name: float(e + d) for name, e, d in
                                zip(("I1", "I2", "I3", "I4"), inner_err, err[1:])},
                   product=math.sqrt(a1 * norm_a2_sq),
                   abs_error_a1=err[0] + a1_tail,
                   abs_error_a2=err[1] + err[2] + inner_err[0] + inner_err[1], nodes=n)
    return rep


def _int_recip_quartic(s: float) -> float:
    x, w = half_line_nodes(s, 64, max(1.0, abs(s)))
    return float(np.sum(w / (x ** 4 + 1.0)))


def _sup_upper(spec: KernelSpec) -> float:
    v = np.linspace(-40.0, 40.0, 801)
    return float(np.max(np.abs(spec.upper()(v))))
