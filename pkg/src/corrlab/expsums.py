"""Dyadic smooth windows and the smoothed exponential sums E_{q,u}(s).

Every window is a difference of two smooth steps S(x) = psi((x - a)/w),
psi(t) = g(t)/(g(t) + g(1 - t)), g(t) = exp(-1/t).  Consecutive windows share
a step, so the partition of unity telescopes exactly.

n-windows.  For q < Q the step S_q ramps over [e^q/2, 2e^(q-1)], hence
supp N_q = [e^q/2, 2e^q].  Above Q the steps are spaced w <= e^Q/(2Q) apart
from 2e^(Q-1) up to N, and the last one ramps over [N, N + w].

k-windows.  K_u(k) = W_u(k) for u >= 1 and k > 0, K_{-u}(k) = K_u(-k), and
K_0(k) = W_0(|k|), where W_u uses the same coarse steps as the n-windows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .correlations import sequence_values
from .seqcore import SequenceSpec, frac_product, phases_mod1
from .testfn import TestFunction

__all__ = [
    "smooth_step",
    "psi_derivative",
    "WindowKind",
    "Regime",
    "Degeneracy",
    "DyadicWindow",
    "NWindowSystem",
    "KWindowSystem",
    "q_of",
    "u_max",
    "build_n_window",
    "build_k_window",
    "n_weights",
    "inner_sums",
    "inner_sums_multi",
    "e_qu_eval",
    "GridEqu",
    "e_qu_grid",
    "classify_degenerate",
    "kusmin_landau_check",
    "reconstruction_check",
    "window_certificates",
]

DEFAULT_EPSILON = 0.05
DEFAULT_DELTA = 0.1
_CERT_SAMPLES = 512


def _g(t: np.ndarray) -> np.ndarray:
    pos = t > 0
    with np.errstate(over="ignore", divide="ignore"):
        return np.where(pos, np.exp(-1.0 / np.where(pos, t, 1.0)), 0.0)


def smooth_step(t):
    """C^infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=np.float64)
    a, b = _g(t), _g(1.0 - t)
    with np.errstate(invalid="ignore"):
        out = np.where(t <= 0, 0.0, np.where(t >= 1, 1.0, a / np.where(a + b > 0, a + b, 1.0)))
    return out if out.ndim else float(out)


@lru_cache(maxsize=8)
def _psi_derivative_fn(order: int):
    import sympy as sp

    t = sp.symbols("t")
    g0 = sp.exp(-1 / t)
    g1 = sp.exp(-1 / (1 - t))
    expr = sp.diff(g0 / (g0 + g1), t, order)
    return sp.lambdify(t, expr, "numpy")


def psi_derivative(t, order: int):
    """order-th derivative of the smooth step (zero outside (0, 1))."""
    if order == 0:
        return smooth_step(t)
    t = np.asarray(t, dtype=np.float64)
    inside = (t > 0) & (t < 1)
    out = np.zeros_like(t)
    if np.any(inside):
        with np.errstate(all="ignore"):
            v = _psi_derivative_fn(order)(t[inside])
        out[inside] = np.nan_to_num(v, nan=0.0, posinf=0.0, neginf=0.0)
    return out if out.ndim else float(out)


@lru_cache(maxsize=8)
def psi_derivative_sup(order: int) -> float:
    """sup |psi^(order)| measured on a dense grid."""
    t = np.linspace(0.0, 1.0, 200001)
    return float(np.max(np.abs(psi_derivative(t, order))))


class WindowKind(str, enum.Enum):
    N_WINDOW = "n_window"
    K_WINDOW = "k_window"


class Regime(str, enum.Enum):
    BELOW_Q = "below_Q"
    ABOVE_Q = "above_Q"


class Degeneracy(str, enum.Enum):
    DEGENERATE = "degenerate"
    NONDEGENERATE = "nondegenerate"


@dataclass(frozen=True)
class _Step:
    a: float
    w: float

    def __call__(self, x, order: int = 0):
        x = np.asarray(x, dtype=np.float64)
        return psi_derivative((x - self.a) / self.w, order) / self.w**order


@dataclass(frozen=True, eq=False)
class DyadicWindow:
    """A window lower - upper of two steps; ``scale`` is the derivative scale
    (e^q below Q, e^Q/Q above) against which certificates are normalized."""

    kind: WindowKind
    index: int
    lower: _Step
    upper: _Step
    regime: Regime
    scale: float
    symmetric: bool = False
    reflected: bool = False
    certificates: dict = field(default_factory=dict)

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self.lower.a, self.upper.a + self.upper.w
        if self.reflected:
            return (-hi, -lo)
        return (lo, hi)

    def _arg(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.symmetric:
            return np.abs(x)
        if self.reflected:
            return -x
        return x

    def __call__(self, x, order: int = 0):
        x = np.asarray(x, dtype=np.float64)
        z = self._arg(x)
        val = np.asarray(self.lower(z, order) - self.upper(z, order))
        if order and self.reflected:
            val = val * (-1) ** order
        if order and self.symmetric:
            val = val * np.sign(x) ** order
        return val if val.ndim else float(val)

    def certify(self, orders=range(1, 5), samples: int = _CERT_SAMPLES) -> dict:
        """Measure sup |W^(t)| on both ramps and normalize by scale^t."""
        pts = []
        for st in (self.lower, self.upper):
            pts.append(st.a + st.w * np.linspace(0.0, 1.0, samples))
        x = np.concatenate(pts)
        if self.reflected:
            x = -x
        cert = {}
        for t in orders:
            sup = float(np.max(np.abs(self(x, t))))
            cert[t] = {"sup": sup, "normalized": sup * self.scale**t}
        self.certificates.clear()
        self.certificates.update(cert)
        return cert


def q_of(N: int) -> int:
    """The integer Q with e^Q <= N < e^(Q+1)."""
    Q = int(math.floor(math.log(N)))
    while math.exp(Q + 1) <= N:
        Q += 1
    while Q > 0 and math.exp(Q) > N:
        Q -= 1
    return Q


def u_max(N: int, epsilon: float = DEFAULT_EPSILON) -> int:
    return int(math.ceil((1.0 + epsilon) * math.log(N)))


def _coarse_step(q: int) -> _Step:
    a = math.exp(q) / 2.0
    return _Step(a, 2.0 * math.exp(q - 1) - a)


class NWindowSystem:
    """All n-windows for a given N (coarse below Q, contiguous fine windows above)."""

    def __init__(self, N: int):
        self.N = int(N)
        if self.N < 3:
            raise ValueError("N must be >= 3")
        self.Q = q_of(self.N)
        Q = self.Q
        start = 2.0 * math.exp(Q - 1)
        target = math.exp(Q) / (2.0 * Q)
        span = self.N - start
        self.n_fine = max(1, int(math.ceil(span / target)))
        self.fine_width = span / self.n_fine
        steps = [_coarse_step(q) for q in range(Q + 1)]
        steps += [_Step(start + i * self.fine_width, self.fine_width) for i in range(self.n_fine + 1)]
        self._steps = steps

    @property
    def count(self) -> int:
        return len(self._steps) - 1

    def window(self, q: int) -> DyadicWindow:
        if not 0 <= q < self.count:
            raise ValueError(f"q={q} outside 0..{self.count - 1}")
        Q = self.Q
        below = q < Q
        scale = math.exp(q) if below else math.exp(Q) / Q
        return DyadicWindow(
            WindowKind.N_WINDOW,
            q,
            self._steps[q],
            self._steps[q + 1],
            Regime.BELOW_Q if below else Regime.ABOVE_Q,
            scale,
        )

    def windows(self) -> list[DyadicWindow]:
        return [self.window(q) for q in range(self.count)]

    def total(self, x) -> np.ndarray:
        """Sum of all windows, which telescopes to first step minus last step."""
        return sum(w(x) for w in self.windows())


class KWindowSystem:
    def __init__(self, N: int, epsilon: float = DEFAULT_EPSILON):
        self.N = int(N)
        self.epsilon = float(epsilon)
        self.U = u_max(self.N, self.epsilon)
        self._steps = [_coarse_step(u) for u in range(self.U + 2)]

    def window(self, u: int) -> DyadicWindow:
        if abs(u) > self.U:
            raise ValueError(f"|u|={abs(u)} exceeds U={self.U}")
        a = abs(u)
        return DyadicWindow(
            WindowKind.K_WINDOW,
            u,
            self._steps[a],
            self._steps[a + 1],
            Regime.BELOW_Q,
            math.exp(a),
            symmetric=(u == 0),
            reflected=(u < 0),
        )

    def windows(self) -> list[DyadicWindow]:
        return [self.window(u) for u in range(-self.U, self.U + 1)]

    def total(self, k) -> np.ndarray:
        return sum(w(k) for w in self.windows())

    @property
    def unity_range(self) -> tuple[float, float]:
        """|k| range on which the windows sum to one."""
        return (2.0 * math.exp(-1.0), math.exp(self.U + 1) / 2.0)


def build_n_window(q: int, Q: int | None = None, N: int | None = None) -> DyadicWindow:
    """N_q for the system of N (default N = ceil(e^Q), the smallest N with that Q)."""
    if N is None:
        if Q is None:
            raise ValueError("give Q or N")
        N = int(math.ceil(math.exp(Q)))
    sys_ = NWindowSystem(N)
    if Q is not None and Q != sys_.Q:
        raise ValueError(f"Q={Q} inconsistent with N={N}")
    w = sys_.window(q)
    w.certify()
    return w


def build_k_window(u: int, N: int, epsilon: float = DEFAULT_EPSILON) -> DyadicWindow:
    w = KWindowSystem(N, epsilon).window(u)
    w.certify()
    return w


def window_certificates(N: int, epsilon: float = DEFAULT_EPSILON) -> dict:
    """Uniform constants max_q sup|W_q^(t)| scale_q^t for both families, t = 1..4."""
    out = {}
    for name, ws in (("n", NWindowSystem(N).windows()), ("k", KWindowSystem(N, epsilon).windows())):
        per_t = {t: 0.0 for t in range(1, 5)}
        for w in ws:
            c = w.certify()
            for t in per_t:
                per_t[t] = max(per_t[t], c[t]["normalized"])
        out[name] = per_t
    return out


def n_weights(window: DyadicWindow) -> tuple[np.ndarray, np.ndarray]:
    """Integers n >= 1 in the support of an n-window and the window values there."""
    lo, hi = window.support
    n = np.arange(max(1, int(math.ceil(lo))), int(math.floor(hi)) + 1, dtype=np.float64)
    w = window(n) if n.size else np.zeros(0)
    keep = w != 0.0
    return n[keep], w[keep]


def _k_support(window: DyadicWindow) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = window.support
    if window.symmetric:
        kp = np.arange(1, int(math.floor(hi)) + 1, dtype=np.float64)
        k = np.concatenate([-kp[::-1], kp])
    else:
        k = np.arange(int(math.ceil(lo)), int(math.floor(hi)) + 1, dtype=np.float64)
        k = k[k != 0]
    w = window(k) if k.size else np.zeros(0)
    keep = w != 0.0
    return k[keep], w[keep]


def inner_sums(seq, ks: np.ndarray, ns: np.ndarray, weights: np.ndarray, chunk: int = 1 << 21) -> np.ndarray:
    """T(k) = sum_n weights_n e(k y(n)) for each k."""
    ks = np.asarray(ks, dtype=np.float64)
    ns = np.asarray(ns, dtype=np.float64)
    out = np.zeros(ks.size, dtype=np.complex128)
    if ks.size == 0 or ns.size == 0:
        return out
    if isinstance(seq, SequenceSpec):
        y = None
    else:
        y = sequence_values(seq, int(ns.max()))[ns.astype(np.int64) - 1]
    rows = max(1, chunk // ns.size)
    for i in range(0, ks.size, rows):
        kk = ks[i : i + rows, None]
        if y is None:
            ph, _ = phases_mod1(seq, kk, ns[None, :], max_error=1e-9)
        else:
            ph = frac_product(kk, y[None, :])
        out[i : i + rows] = np.exp(2j * np.pi * ph) @ weights
    return out


def _fourier_series(coef: np.ndarray, ks: np.ndarray, s: np.ndarray, chunk: int = 1 << 21) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    out = np.zeros(s.size, dtype=np.complex128)
    if ks.size == 0:
        return out
    rows = max(1, chunk // ks.size)
    for i in range(0, s.size, rows):
        ph = frac_product(s[i : i + rows, None], ks[None, :])
        out[i : i + rows] = np.exp(2j * np.pi * ph) @ coef
    return out


def _equ_coefficients(seq, f: TestFunction, N: int, nwin: DyadicWindow, kwin: DyadicWindow):
    ns, nw = n_weights(nwin)
    ks, kw = _k_support(kwin)
    T = inner_sums(seq, ks, ns, nw)
    return ks, kw * f.fhat(ks / N) * T / N


def e_qu_eval(seq, f: TestFunction, N: int, q: int, u: int, s, epsilon: float = DEFAULT_EPSILON):
    """E_{q,u}(s) = (1/N) sum_k K_u(k) fhat(k/N) e(ks) sum_n N_q(n) e(k y(n))."""
    N = int(N)
    nwin = NWindowSystem(N).window(q)
    kwin = KWindowSystem(N, epsilon).window(u)
    ks, coef = _equ_coefficients(seq, f, N, nwin, kwin)
    out = _fourier_series(coef, ks, s)
    return out if np.ndim(s) else complex(out[0])


@dataclass
class GridEqu:
    q: int
    u: int
    N: int
    s: np.ndarray
    values: np.ndarray

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def to_csv(self, path) -> None:
        arr = np.column_stack([self.s, self.values.real, self.values.imag])
        np.savetxt(path, arr, delimiter=",", header="s,re,im", comments="")


def e_qu_grid(seq, f: TestFunction, N: int, q: int, u: int, M: int = 256, epsilon: float = DEFAULT_EPSILON) -> GridEqu:
    s = np.arange(M) / M
    return GridEqu(q, u, int(N), s, np.asarray(e_qu_eval(seq, f, N, q, u, s, epsilon)))


def classify_degenerate(alpha: float, theta: float, u: int, q: int, Q: int, delta: float = DEFAULT_DELTA) -> Degeneracy:
    """Degenerate iff alpha theta e^(|u| + (theta-1) q) < 1/10 or q <= delta Q."""
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    if alpha * theta * math.exp(abs(u) + (theta - 1.0) * q) < 0.1 or q <= delta * Q:
        return Degeneracy.DEGENERATE
    return Degeneracy.NONDEGENERATE


def kusmin_landau_check(seq: SequenceSpec, N: int, q: int, u: int, epsilon: float = DEFAULT_EPSILON) -> dict:
    """max over k in the u-window of |sum_n N_q(n) e(k y(n))| k e^((theta-1) q)."""
    N = int(N)
    nwin = NWindowSystem(N).window(q)
    kwin = KWindowSystem(N, epsilon).window(u)
    ratio_small = seq.alpha * seq.theta * math.exp(abs(u) + (seq.theta - 1.0) * q)
    if ratio_small >= 0.1:
        raise ValueError("(u, q) is not degenerate through the Kusmin-Landau condition")
    ns, nw = n_weights(nwin)
    ks, _ = _k_support(kwin)
    ks = ks[ks > 0] if u >= 0 else -ks[ks < 0]
    T = inner_sums(seq, ks, ns, nw)
    ratios = np.abs(T) * ks * math.exp((seq.theta - 1.0) * q)
    return {
        "q": q,
        "u": u,
        "max_ratio": float(ratios.max()) if ratios.size else 0.0,
        "max_inner": float(np.abs(T).max()) if T.size else 0.0,
        "k_count": int(ks.size),
        "n_count": int(ns.size),
    }


def inner_sums_multi(seq, ks: np.ndarray, ns: np.ndarray, weights: np.ndarray, chunk: int = 1 << 21) -> np.ndarray:
    """inner_sums for several weight columns at once; returns shape (len(ks), columns)."""
    ks = np.asarray(ks, dtype=np.float64)
    ns = np.asarray(ns, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64).reshape(ns.size, -1)
    out = np.zeros((ks.size, weights.shape[1]), dtype=np.complex128)
    if isinstance(seq, SequenceSpec):
        y = None
    else:
        y = sequence_values(seq, int(ns.max()))[ns.astype(np.int64) - 1]
    rows = max(1, chunk // max(1, ns.size))
    for i in range(0, ks.size, rows):
        kk = ks[i : i + rows, None]
        if y is None:
            ph, _ = phases_mod1(seq, kk, ns[None, :], max_error=1e-9)
        else:
            ph = frac_product(kk, y[None, :])
        out[i : i + rows] = np.exp(2j * np.pi * ph) @ weights
    return out


def reconstruction_check(seq, f: TestFunction, N: int, s, epsilon: float = DEFAULT_EPSILON) -> dict:
    """Compare sum over all (q, u) of E_{q,u}(s) with the unwindowed normalized sum.

    The n-windows sum to one on [1, N] and the last one ramps down over
    (N, N + w]; the reference keeps that ramp and is otherwise the plain sum
    over 1 <= n <= N and 1 <= |k| <= k_max.  The k-windows sum to one below
    e^(U+1)/2; the reference part beyond it and the fhat tail past k_max are
    bounded by ``certificate``.
    """
    N = int(N)
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    nsys = NWindowSystem(N)
    ksys = KWindowSystem(N, epsilon)
    kmax = int(math.floor(ksys.window(ksys.U).support[1]))
    kp = np.arange(1, kmax + 1, dtype=np.float64)
    ks = np.concatenate([-kp[::-1], kp])
    nwins = nsys.windows()
    n_hi = int(math.floor(nwins[-1].support[1]))
    ns = np.arange(1, n_hi + 1, dtype=np.float64)
    total_n = nsys.total(ns)
    reference_w = np.where(ns <= N, 1.0, total_n)
    cols = np.column_stack([w(ns) for w in nwins] + [reference_w])
    Tpos = inner_sums_multi(seq, kp, ns, cols)
    T = np.concatenate([np.conj(Tpos[::-1]), Tpos])
    fh = f.fhat(ks / N)
    windowed = np.zeros(s.size, dtype=np.complex128)
    for u in range(-ksys.U, ksys.U + 1):
        kw = ksys.window(u)(ks)
        sel = kw != 0.0
        for q in range(len(nwins)):
            coef = kw[sel] * fh[sel] * T[sel, q] / N
            windowed += _fourier_series(coef, ks[sel], s)
    Tref = T[:, -1]
    full = _fourier_series(fh * Tref / N, ks, s)
    beyond = np.abs(ks) >= ksys.unity_range[1]
    certificate = float(np.sum(np.abs(fh[beyond] * Tref[beyond]))) / N
    from .testfn import fourier_tail_bound

    certificate += fourier_tail_bound(f, N, kmax)["tau"] * float(np.sum(reference_w)) / N
    return {
        "max_error": float(np.max(np.abs(windowed - full))),
        "certificate": certificate,
        "n_partition_residual": float(np.max(np.abs(total_n[ns <= N] - 1.0))),
        "k_max": kmax,
        "windows": (len(nwins), 2 * ksys.U + 1),
    }
