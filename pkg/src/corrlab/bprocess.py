"""B-process transforms of E_{q,u}: constants, stationary phase and E^(B), E^(BB).

Derived constants for y(n) = alpha n^theta:

    Theta = 1/(1 - theta)
    beta  = alpha^Theta (theta^(Theta-1) - theta^Theta)      (always > 0)
    c1    = sqrt(Theta (alpha theta)^Theta)
    c0    = (beta Theta)^(-1/(Theta-1))
    c     = -theta c0

phi(k, r) = beta k^Theta r^(1-Theta) is the stationary value of
k alpha x^theta - r x, attained at x_r = (alpha theta k / r)^Theta.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .expsums import (
    DEFAULT_DELTA,
    DEFAULT_EPSILON,
    Degeneracy,
    KWindowSystem,
    NWindowSystem,
    _fourier_series,
    _k_support,
    classify_degenerate,
    e_qu_eval,
)
from .oscquad import filon_integrate
from .seqcore import SequenceSpec
from .testfn import TestFunction

__all__ = [
    "BConstants",
    "derive_constants",
    "verify_constants",
    "phi",
    "phi_kk",
    "critical_point",
    "StationaryPhaseSpec",
    "StationaryPhaseError",
    "stationary_phase_integral",
    "e_b_eval",
    "e_bb_eval",
    "BBWarnings",
    "residual_sweep",
    "ResidualGrid",
    "residual_grid",
]


@dataclass(frozen=True)
class BConstants:
    alpha: float
    theta: float
    Theta: float
    beta: float
    c1: float
    c0: float
    c: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("Theta", "beta", "c1", "c0", "c")}


def _closed_forms(alpha: float, theta: float) -> BConstants:
    if not (alpha > 0 and 0 < theta < 1):
        raise ValueError("need alpha > 0 and 0 < theta < 1")
    try:
        Th = 1.0 / (1.0 - theta)
        beta = alpha**Th * (theta ** (Th - 1.0) - theta**Th)
        c1 = math.sqrt(Th * (alpha * theta) ** Th)
        c0 = (beta * Th) ** (-1.0 / (Th - 1.0))
    except OverflowError as exc:
        raise OverflowError(f"constants not representable as doubles at alpha={alpha}, theta={theta}") from exc
    return BConstants(alpha, theta, Th, beta, c1, c0, -theta * c0)


def phi(consts: BConstants, k, r):
    """beta k^Theta r^(1-Theta)."""
    k = np.asarray(k, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    out = consts.beta * k**consts.Theta * r ** (1.0 - consts.Theta)
    return out if out.ndim else float(out)


def phi_kk(consts: BConstants, k, r):
    """Second derivative of phi in its first argument."""
    Th = consts.Theta
    k = np.asarray(k, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    out = consts.beta * Th * (Th - 1.0) * k ** (Th - 2.0) * r ** (1.0 - Th)
    return out if out.ndim else float(out)


def critical_point(dfun: Callable[[float], float], a: float, b: float, rtol: float = 1e-14) -> float:
    """Safeguarded bisection for the unique sign change of dfun on [a, b]."""
    fa, fb = dfun(a), dfun(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise StationaryPhaseError("no sign change of the phase derivative")
    lo, hi = a, b
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        fm = dfun(mid)
        if fm == 0 or (hi - lo) <= rtol * max(abs(mid), 1e-300):
            return mid
        if np.sign(fm) == np.sign(fa):
            lo, fa = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def verify_constants(consts: BConstants, samples: int = 100, seed: int = 0) -> dict:
    """Check c0 and c against critical points found numerically.

    For random (r, h, s) the critical point of Phi_h(x) = phi(x, r) - x (h - s)
    is located by bisection on Phi_h' and compared with c0 r (h-s)^(1/(Theta-1));
    the stationary value is compared with c r (h-s)^(1/theta).
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    Th = consts.Theta
    worst_mu = worst_val = 0.0
    for _ in range(samples):
        r = float(rng.uniform(0.5, 20.0))
        h = float(rng.uniform(1.0, 20.0))
        s = float(rng.uniform(0.0, 1.0))
        d = h - s

        def dphi(x, r=r, d=d):
            return consts.beta * Th * x ** (Th - 1.0) * r ** (1.0 - Th) - d

        mu_closed = consts.c0 * r * d ** (1.0 / (Th - 1.0))
        mu_num = critical_point(dphi, mu_closed * 1e-3, mu_closed * 1e3 + 1.0)
        val_num = phi(consts, mu_num, r) - mu_num * d
        val_closed = consts.c * r * d ** (1.0 / consts.theta)
        worst_mu = max(worst_mu, abs(mu_num - mu_closed) / mu_closed)
        worst_val = max(worst_val, abs(val_num - val_closed) / abs(val_closed))
    return {"mu_rel_residual": worst_mu, "value_rel_residual": worst_val}


def derive_constants(alpha: float, theta: float, verify: bool = True, tol: float = 1e-8) -> BConstants:
    consts = _closed_forms(float(alpha), float(theta))
    if verify:
        res = verify_constants(consts)
        if max(res.values()) > tol:
            raise ArithmeticError(f"constant verification failed: {res}")
    return consts


class StationaryPhaseError(ValueError):
    """No interior critical point, or more than one."""


@dataclass(frozen=True)
class StationaryPhaseSpec:
    """int_a^b Psi(x) e(Phi(x)) dx with Phi', Phi'' supplied in closed form."""

    Phi: Callable
    dPhi: Callable
    d2Phi: Callable
    Psi: Callable
    a: float
    b: float
    Lambda: float = float("nan")
    Omega_Phi: float = float("nan")
    Omega_Psi: float = float("nan")


def _count_sign_changes(fun, a: float, b: float, samples: int = 1001) -> int:
    x = np.linspace(a, b, samples)
    v = np.sign(fun(x))
    v = v[v != 0]
    return int(np.sum(v[1:] != v[:-1]))


def stationary_phase_integral(sp: StationaryPhaseSpec, tol: float = 1e-10) -> tuple[complex, float]:
    """Main term e(Phi(x0) +- 1/8) Psi(x0)/sqrt|Phi''(x0)| and |quadrature - main term|."""
    changes = _count_sign_changes(sp.dPhi, sp.a, sp.b)
    if changes == 0:
        raise StationaryPhaseError("no critical point in the interval")
    if changes > 1:
        raise StationaryPhaseError(f"{changes} critical points in the interval")
    x0 = critical_point(lambda x: float(sp.dPhi(np.float64(x))), sp.a, sp.b)
    d2 = float(sp.d2Phi(np.float64(x0)))
    sign = 1.0 if d2 > 0 else -1.0
    ph0 = float(sp.Phi(np.float64(x0))) + sign / 8.0
    main = cmath.exp(2j * math.pi * (ph0 - math.floor(ph0))) * float(sp.Psi(np.float64(x0))) / math.sqrt(abs(d2))
    quad = filon_integrate(sp.Psi, sp.Phi, sp.a, sp.b, tol=tol, initial_panels=8)
    return main, abs(quad.value - main)


def _require_nondegenerate(seq: SequenceSpec, N: int, q: int, u: int, delta: float) -> None:
    Q = NWindowSystem(N).Q
    if classify_degenerate(seq.alpha, seq.theta, u, q, Q, delta) is Degeneracy.DEGENERATE:
        raise ValueError(f"(u={u}, q={q}) is degenerate")


def _positive_k(kwin) -> tuple[np.ndarray, np.ndarray]:
    ks, kw = _k_support(kwin)
    keep = ks > 0
    return ks[keep], kw[keep]


def e_b_eval(
    seq: SequenceSpec,
    f: TestFunction,
    N: int,
    q: int,
    u: int,
    s,
    epsilon: float = DEFAULT_EPSILON,
    delta: float = DEFAULT_DELTA,
):
    """E^(B)_{q,u}(s); u < 0 is reduced to u > 0 by conjugation."""
    N = int(N)
    if u < 0:
        out = e_b_eval(seq, f, N, q, -u, s, epsilon, delta)
        return np.conj(out)
    if u == 0:
        raise ValueError("u must be nonzero")
    _require_nondegenerate(seq, N, q, u, delta)
    consts = derive_constants(seq.alpha, seq.theta, verify=False)
    nwin = NWindowSystem(N).window(q)
    kwin = KWindowSystem(N, epsilon).window(u)
    ks, kw = _positive_k(kwin)
    a, b = nwin.support
    Th, th = consts.Theta, consts.theta
    coef = np.zeros(ks.size, dtype=np.complex128)
    at = seq.alpha * th
    for i, k in enumerate(ks):
        r_lo = max(1, int(math.ceil(at * k * b ** (th - 1.0))))
        r_hi = int(math.floor(at * k * a ** (th - 1.0)))
        if r_hi < r_lo:
            continue
        r = np.arange(r_lo, r_hi + 1, dtype=np.float64)
        x_r = (at * k / r) ** Th
        amp = nwin(x_r) * k ** (Th / 2.0) / r ** ((Th + 1.0) / 2.0)
        ph = phi(consts, k, r)
        ph = ph - np.floor(ph)
        coef[i] = np.sum(amp * np.exp(2j * np.pi * ph))
    coef *= consts.c1 * cmath.exp(-2j * math.pi / 8.0) * kw * f.fhat(ks / N) / N
    out = _fourier_series(coef, ks, s)
    return out if np.ndim(s) else complex(out[0])


@dataclass
class BBWarnings:
    dropped: int = 0


def e_bb_eval(
    seq: SequenceSpec,
    f: TestFunction,
    N: int,
    q: int,
    u: int,
    s,
    epsilon: float = DEFAULT_EPSILON,
    delta: float = DEFAULT_DELTA,
    warn: BBWarnings | None = None,
):
    """E^(BB)_{q,u}(s), summed over r >= 1 and h with h - s > 0.

    Each (r, h) term is fhat(mu/N) N_q(x(mu)) K_u(mu) mu^(Theta/2) / sqrt(phi_kk(mu, r))
    r^(-(Theta+1)/2) e(c r (h-s)^(1/theta)) scaled by c1/N, where
    mu = c0 r (h-s)^(1/(Theta-1)).  Terms with h <= s are dropped and counted.
    """
    N = int(N)
    if u < 0:
        return np.conj(e_bb_eval(seq, f, N, q, -u, s, epsilon, delta, warn))
    if u == 0:
        raise ValueError("u must be nonzero")
    _require_nondegenerate(seq, N, q, u, delta)
    consts = derive_constants(seq.alpha, seq.theta, verify=False)
    nwin = NWindowSystem(N).window(q)
    kwin = KWindowSystem(N, epsilon).window(u)
    a, b = nwin.support
    k_lo, k_hi = kwin.support
    Th, th = consts.Theta, consts.theta
    at = seq.alpha * th
    r_lo = max(1, int(math.ceil(at * k_lo * b ** (th - 1.0))))
    r_hi = int(math.floor(at * k_hi * a ** (th - 1.0)))
    s_arr = np.atleast_1d(np.asarray(s, dtype=np.float64))
    out = np.zeros(s_arr.size, dtype=np.complex128)
    if r_hi < r_lo:
        return out if np.ndim(s) else complex(out[0])
    r = np.arange(r_lo, r_hi + 1, dtype=np.float64)
    # h - s = phi_k(mu, r) = alpha x^theta with x in the n-window
    h_lo = int(math.floor(seq.alpha * a**th)) - 1
    h_hi = int(math.ceil(seq.alpha * b**th)) + 1
    h = np.arange(max(0, h_lo), h_hi + 1, dtype=np.float64)
    dropped = 0
    for j, sv in enumerate(s_arr):
        d = h - sv
        good = d > 0
        dropped += int(np.sum(~good))
        d = d[good]
        if d.size == 0:
            continue
        R, D = np.meshgrid(r, d, indexing="ij")
        mu = consts.c0 * R * D ** (1.0 / (Th - 1.0))
        x_mu = (at * consts.c0 * D ** (1.0 / (Th - 1.0))) ** Th
        w = kwin(mu) * nwin(x_mu)
        sel = w != 0.0
        if not np.any(sel):
            continue
        mu, R, D, w = mu[sel], R[sel], D[sel], w[sel]
        amp = f.fhat(mu / N) * w * mu ** (Th / 2.0) / np.sqrt(phi_kk(consts, mu, R)) / R ** ((Th + 1.0) / 2.0)
        ph = consts.c * D ** (1.0 / th) * R
        ph = ph - np.floor(ph)
        out[j] = consts.c1 * np.sum(amp * np.exp(2j * np.pi * ph)) / N
    if dropped:
        if warn is not None:
            warn.dropped += dropped
        else:
            warnings.warn(f"{dropped} (r, h) terms with h <= s dropped", RuntimeWarning, stacklevel=2)
    return out if np.ndim(s) else complex(out[0])


def residual_sweep(
    seq: SequenceSpec,
    f: TestFunction,
    Ns,
    family: Callable[[int], tuple[int, int]],
    M: int = 64,
    epsilon: float = DEFAULT_EPSILON,
    delta: float = DEFAULT_DELTA,
) -> list[dict]:
    """sup_s |E - E^(B)| and sup_s |E^(B) - E^(BB)| along N for a (q, u) family."""
    rows = []
    s = (np.arange(M) + 0.5) / M
    for N in Ns:
        q, u = family(int(N))
        e = np.asarray(e_qu_eval(seq, f, N, q, u, s, epsilon))
        eb = np.asarray(e_b_eval(seq, f, N, q, u, s, epsilon, delta))
        warn = BBWarnings()
        ebb = np.asarray(e_bb_eval(seq, f, N, q, u, s, epsilon, delta, warn))
        rows.append(
            {
                "N": int(N),
                "q": q,
                "u": u,
                "sup_E": float(np.max(np.abs(e))),
                "sup_E_minus_EB": float(np.max(np.abs(e - eb))),
                "sup_EB_minus_EBB": float(np.max(np.abs(eb - ebb))),
                "dropped": warn.dropped,
            }
        )
    return rows


@dataclass
class ResidualGrid:
    s: np.ndarray
    e_minus_eb: np.ndarray
    eb_minus_ebb: np.ndarray

    def to_csv(self, path) -> None:
        data = np.column_stack([self.s, self.e_minus_eb, self.eb_minus_ebb])
        np.savetxt(path, data, delimiter=",", header="s,abs_E_minus_EB,abs_EB_minus_EBB", comments="")


def residual_grid(
    seq: SequenceSpec,
    f: TestFunction,
    N: int,
    q: int,
    u: int,
    M: int = 256,
    epsilon: float = DEFAULT_EPSILON,
    delta: float = DEFAULT_DELTA,
) -> ResidualGrid:
    s = (np.arange(M) + 0.5) / M
    e = np.asarray(e_qu_eval(seq, f, N, q, u, s, epsilon))
    eb = np.asarray(e_b_eval(seq, f, N, q, u, s, epsilon, delta))
    ebb = np.asarray(e_bb_eval(seq, f, N, q, u, s, epsilon, delta, BBWarnings()))
    return ResidualGrid(s, np.abs(e - eb), np.abs(eb - ebb))
