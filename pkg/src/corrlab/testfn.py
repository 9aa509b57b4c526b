"""Even, compactly supported test functions and the induced correlation kernel.

Two families are provided.  ``make_bspline`` is a C^2 cubic B-spline with a
closed-form Fourier transform; ``make_bump`` is the C^infinity bump
exp(-1/(1 - (x/R)^2)) whose transform is tabulated once (for R = 1) by
composite Gauss-Legendre quadrature and interpolated with a quintic spline.

Fourier convention: fhat(xi) = int f(x) e(-x xi) dx with e(t) = exp(2 pi i t).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import BSpline, make_interp_spline

from .quadrature import integrate_panels, panel_nodes

__all__ = [
    "SmoothnessClass",
    "TestFunction",
    "CorrKernel",
    "make_bspline",
    "make_bump",
    "make_test_function",
    "f_moment",
    "build_corr_kernel",
    "fourier_tail_bound",
    "kcut_for_tolerance",
]


class SmoothnessClass(str, enum.Enum):
    C2_SPLINE = "C2_spline"
    CINF_BUMP = "Cinf_bump"


def _b3(t: np.ndarray) -> np.ndarray:
    """Centered cubic B-spline on [-2, 2] with unit integral."""
    a = np.abs(t)
    inner = 2.0 / 3.0 - a * a + 0.5 * a**3
    outer = (2.0 - a) ** 3 / 6.0
    return np.where(a < 1.0, inner, np.where(a < 2.0, outer, 0.0))


def _bump1(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    inside = np.abs(t) < 1.0
    u = np.where(inside, 1.0 - t * t, 1.0)
    return np.where(inside, np.exp(-1.0 / u), 0.0)


# Master table of the R = 1 bump transform, g(eta) = 2 int_0^1 b(t) cos(2 pi t eta) dt.
_BUMP_ETA_MAX = 120.0
_BUMP_ETA_STEP = 4e-3
_BUMP_PANELS = 96
_BUMP_GL = 16
_BUMP_CERT_TOL = 1e-12


def _bump_hat_direct(eta: np.ndarray, panels: int = _BUMP_PANELS, chunk: int = 2048) -> np.ndarray:
    eta = np.asarray(eta, dtype=np.float64)
    edges = np.linspace(0.0, 1.0, panels + 1)
    t, w = panel_nodes(edges, _BUMP_GL)
    wb = 2.0 * w * _bump1(t)
    flat = eta.ravel()
    out = np.empty_like(flat)
    for i in range(0, flat.size, chunk):
        e = flat[i : i + chunk]
        out[i : i + chunk] = np.cos((2.0 * np.pi) * np.outer(e, t)) @ wb
    return out.reshape(eta.shape)


@dataclass(frozen=True)
class _BumpTable:
    spline: BSpline
    suffix_max: np.ndarray
    grid: np.ndarray
    cert_error: float
    deriv_l1: tuple[float, ...]


@lru_cache(maxsize=1)
def _bump_table() -> _BumpTable:
    grid = np.arange(0.0, _BUMP_ETA_MAX + _BUMP_ETA_STEP / 2, _BUMP_ETA_STEP)
    vals = _bump_hat_direct(grid)
    # certify against a doubled panel count on a sub-grid
    probe = grid[::97]
    cert = float(np.max(np.abs(_bump_hat_direct(probe, 2 * _BUMP_PANELS) - vals[::97])))
    if cert > _BUMP_CERT_TOL:
        raise ArithmeticError(f"bump transform table not certified: {cert:.3g}")
    spline = make_interp_spline(grid, vals, k=5)
    # interpolation error check at midpoints
    mids = probe[:-1] + 0.5 * _BUMP_ETA_STEP
    interp_err = float(np.max(np.abs(spline(mids) - _bump_hat_direct(mids))))
    if interp_err > _BUMP_CERT_TOL:
        raise ArithmeticError(f"bump transform interpolation error {interp_err:.3g}")
    suffix = np.maximum.accumulate(np.abs(vals)[::-1])[::-1]
    return _BumpTable(spline, suffix, grid, max(cert, interp_err), _bump_deriv_l1(8))


def _bump_deriv_l1(jmax: int) -> tuple[float, ...]:
    """||b^(j)||_1 for the R = 1 bump, j = 0..jmax."""
    import sympy as sp

    x = sp.symbols("x")
    expr = sp.exp(-1 / (1 - x**2))
    edges = np.linspace(-1.0, 1.0, 513)
    nodes, weights = panel_nodes(edges, 16)
    out = []
    d = expr
    for j in range(jmax + 1):
        fn = sp.lambdify(x, d, "numpy")
        with np.errstate(all="ignore"):
            vals = np.nan_to_num(fn(nodes), nan=0.0, posinf=0.0, neginf=0.0)
        out.append(float(np.sum(np.abs(vals) * weights)))
        d = sp.diff(d, x)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class TestFunction:
    """An even test function supported on [-support_radius, support_radius].

    ``fhat_bound(xi)`` is a non-increasing envelope of |fhat| on |xi'| >= |xi|.
    ``knots`` are the points where f may fail to be smooth (all of them for
    the spline; only the support ends for the bump).
    """

    __test__ = False

    support_radius: float
    smoothness_class: SmoothnessClass
    even: bool = field(default=True, init=False)

    def __post_init__(self):
        if not (self.support_radius > 0 and math.isfinite(self.support_radius)):
            raise ValueError(f"radius must be positive, got {self.support_radius}")

    @property
    def family(self) -> str:
        return "bspline" if self.smoothness_class is SmoothnessClass.C2_SPLINE else "bump"

    def describe(self) -> dict:
        return {"family": self.family, "radius": self.support_radius}

    @property
    def knots(self) -> np.ndarray:
        r = self.support_radius
        if self.smoothness_class is SmoothnessClass.C2_SPLINE:
            return np.array([-r, -r / 2, 0.0, r / 2, r])
        return np.array([-r, r])

    def f(self, x):
        x = np.asarray(x, dtype=np.float64)
        r = self.support_radius
        if self.smoothness_class is SmoothnessClass.C2_SPLINE:
            out = 1.5 * _b3(2.0 * x / r)
        else:
            out = _bump1(x / r)
        return out if out.ndim else float(out)

    __call__ = f

    def fhat(self, xi):
        xi = np.asarray(xi, dtype=np.float64)
        r = self.support_radius
        if self.smoothness_class is SmoothnessClass.C2_SPLINE:
            out = 0.75 * r * np.sinc(0.5 * r * xi) ** 4
        else:
            eta = np.abs(r * xi)
            tab = _bump_table()
            inside = eta <= _BUMP_ETA_MAX
            out = np.empty_like(eta)
            out[inside] = tab.spline(eta[inside])
            if np.any(~inside):
                out[~inside] = _bump_hat_direct(eta[~inside], 4 * _BUMP_PANELS)
            out = r * out
        return out if out.ndim else float(out)

    def fhat_bound(self, xi):
        xi = np.abs(np.asarray(xi, dtype=np.float64))
        r = self.support_radius
        if self.smoothness_class is SmoothnessClass.C2_SPLINE:
            with np.errstate(divide="ignore"):
                tail = 0.75 * r * (2.0 / (np.pi * r * xi)) ** 4
            out = np.minimum(0.75 * r, tail)
        else:
            tab = _bump_table()
            eta = r * xi
            with np.errstate(divide="ignore"):
                env = [
                    tab.deriv_l1[j] / (2.0 * np.pi * eta) ** j for j in range(len(tab.deriv_l1))
                ]
            analytic = r * np.min(np.stack(env), axis=0)
            idx = np.searchsorted(tab.grid, eta, side="left")
            inside = idx < tab.grid.size
            table = np.where(
                inside,
                r * (tab.suffix_max[np.minimum(idx, tab.grid.size - 1)] + tab.cert_error),
                np.inf,
            )
            # a grid-point suffix max misses bumps between nodes only by the interpolation error
            out = np.minimum(analytic, table)
        return out if out.ndim else float(out)

    def integrate(self, func, n: int = 16, panels: int = 1) -> float:
        """Integral of func over the support, split at the knots."""
        edges = _refine(self.knots, panels)
        return float(integrate_panels(func, edges, n))


def _refine(knots: np.ndarray, panels: int) -> np.ndarray:
    if panels <= 1:
        return knots
    parts = [np.linspace(a, b, panels + 1)[:-1] for a, b in zip(knots[:-1], knots[1:])]
    return np.concatenate(parts + [knots[-1:]])


def make_bspline(radius: float) -> TestFunction:
    """f(x) = 1.5 B3(2x/radius); f(0) = 1, integral 0.75 radius."""
    return TestFunction(float(radius), SmoothnessClass.C2_SPLINE)


def make_bump(radius: float) -> TestFunction:
    """f(x) = exp(-1/(1 - (x/radius)^2)) on |x| < radius."""
    fn = TestFunction(float(radius), SmoothnessClass.CINF_BUMP)
    _bump_table()
    return fn


def make_test_function(family: str, radius: float) -> TestFunction:
    family = family.lower()
    if family in ("bspline", "spline", "c2_spline"):
        return make_bspline(radius)
    if family in ("bump", "cinf_bump"):
        return make_bump(radius)
    raise ValueError(f"unknown test-function family {family!r}")


def f_moment(f: TestFunction, j: int) -> float:
    """E(f^j) = int f(x)^j dx."""
    j = int(j)
    if j < 1:
        raise ValueError("moment order must be >= 1")
    if f.smoothness_class is SmoothnessClass.C2_SPLINE:
        # piecewise polynomial of degree 3j between knots
        n = (3 * j) // 2 + 1
        return f.integrate(lambda x: f.f(x) ** j, n=n)
    coarse = f.integrate(lambda x: f.f(x) ** j, n=16, panels=128)
    fine = f.integrate(lambda x: f.f(x) ** j, n=16, panels=256)
    if abs(coarse - fine) > 1e-12:
        raise ArithmeticError(f"moment quadrature not converged: {abs(coarse - fine):.3g}")
    return fine


def fourier_tail_bound(f: TestFunction, N: int, K: int) -> dict:
    """Certified bound on the error of truncating k-sums of fhat(k/N) at |k| <= K.

    Returns ``tau`` (a bound on sum_{|k|>K} |fhat(k/N)|) and ``A`` (a bound on
    sum_k |fhat(k/N)|).  Both use the monotone envelope ``fhat_bound``.
    """
    ks = np.arange(K + 1, K + 1 + 200000, dtype=np.float64)
    env = f.fhat_bound(ks / N)
    head = 2.0 * float(np.sum(env))
    # beyond the explicit range use the xi^-4 envelope, integrated
    k_end = ks[-1]
    last = float(f.fhat_bound(k_end / N))
    tail = 2.0 * last * k_end / 3.0
    tau = head + tail
    kk = np.arange(-K, K + 1, dtype=np.float64)
    A = float(np.sum(np.abs(f.fhat(kk / N)))) + tau
    return {"tau": tau, "A": A}


def kcut_for_tolerance(f: TestFunction, N: int, tol: float = 1e-12) -> int:
    """Smallest K (on a doubling-then-bisect search) with fhat_bound(K/N) < tol."""
    lo, hi = 0, max(1, int(N))
    while f.fhat_bound(hi / N) >= tol:
        lo, hi = hi, 2 * hi
        if hi > 10**9:
            raise ArithmeticError("no cutoff below 1e9 meets the tolerance")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if f.fhat_bound(mid / N) < tol:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True, eq=False)
class CorrKernel:
    """F(z_1..z_{m-1}) = int f(s) f(z_1+...+z_{m-1}+s) f(z_2+...+z_{m-1}+s) ... f(z_{m-1}+s) ds."""

    base: TestFunction
    m: int

    @property
    def dimension(self) -> int:
        return self.m - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        scalar = z.ndim == 1
        z = np.atleast_2d(z)
        if z.shape[-1] != self.m - 1:
            raise ValueError(f"expected {self.m - 1} coordinates")
        shifts = np.cumsum(z[..., ::-1], axis=-1)[..., ::-1]
        out = self.shifted_product_integral(shifts)
        return float(out[0]) if scalar else out

    def shifted_product_integral(self, t: np.ndarray, chunk: int = 8192) -> np.ndarray:
        """int f(s) prod_i f(s + t_i) ds for a batch ``t`` of shape (B, m-1)."""
        t = np.atleast_2d(np.asarray(t, dtype=np.float64))
        if t.shape[0] <= chunk:
            return self._spi(t)
        return np.concatenate([self._spi(t[i : i + chunk]) for i in range(0, t.shape[0], chunk)])

    def _spi(self, t: np.ndarray) -> np.ndarray:
        f = self.base
        B = t.shape[0]
        if B == 0:
            return np.zeros(0)
        r = f.support_radius
        allt = np.concatenate([np.zeros((B, 1)), t], axis=1)
        lo = np.max(-r - allt, axis=1)
        hi = np.min(r - allt, axis=1)
        empty = hi <= lo
        hi = np.where(empty, lo, hi)
        knots = (f.knots[None, None, :] - allt[:, :, None]).reshape(B, -1)
        knots = np.clip(knots, lo[:, None], hi[:, None])
        if f.smoothness_class is SmoothnessClass.C2_SPLINE:
            edges = np.sort(knots, axis=1)
            n = (3 * self.m) // 2 + 1
        else:
            # knots are only the support ends: subdivide the overlap uniformly
            edges = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, 33)[None, :]
            n = 16
        nodes, weights = panel_nodes(edges, n)
        prod = f.f(nodes)
        for i in range(t.shape[1]):
            prod = prod * f.f(nodes + t[:, i : i + 1])
        out = np.sum(prod * weights, axis=1)
        out[empty] = 0.0
        return out


def build_corr_kernel(f: TestFunction, m: int) -> CorrKernel:
    if int(m) < 2:
        raise ValueError("m must be >= 2")
    return CorrKernel(f, int(m))

