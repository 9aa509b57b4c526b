"""Off-diagonal machinery: phases phi_{h,r}, diagonal detection, Vandermonde
repulsion bounds, localized van der Corput and the sampled error aggregate.

The phase is phi(s) = c sum_i sigma_i r_i (h_i - s)^(1/theta).  Grouping equal
h and merging signed r gives the reduced form c sum_l rho_l (h_l - s)^p with
pairwise distinct h_l, p = 1/theta.  Its derivatives are

    phi^(j)(s) = c sum_l rho_l (-1)^j (p)_j (h_l - s)^(p - j)

with (p)_j the falling factorial, so a = M b with M = diag((-1)^j (p)_j) V(tau),
tau_l = 1/(h_l - s), b_l = c rho_l (h_l - s)^p.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bprocess import BConstants, derive_constants, phi_kk
from .expsums import DEFAULT_EPSILON, KWindowSystem, NWindowSystem
from .oscquad import filon_integrate
from .partitions import Partition
from .testfn import TestFunction

__all__ = [
    "PhaseSpec",
    "ReducedPhase",
    "DiagonalFlag",
    "falling_factorial",
    "phase_eval",
    "is_diagonal",
    "vandermonde_matrix",
    "vandermonde_inverse",
    "spectral_norm",
    "inv_norm_bound",
    "van_lower_bound",
    "phase_zeros",
    "total_variation",
    "oscillatory_integral",
    "WindowLabels",
    "i_hr_bound",
    "OffdiagEstimate",
    "offdiag_err_estimate",
    "predicted_exponent",
    "h_sum_holder_check",
    "holder_slope",
    "loglog_slope",
]


@dataclass(frozen=True)
class ReducedPhase:
    """Distinct shifts h with merged signed coefficients rho; ``members`` maps
    each group back to the 0-based input indices."""

    theta: float
    c: float
    h: tuple[int, ...]
    rho: tuple[int, ...]
    members: tuple[tuple[int, ...], ...]

    @property
    def L(self) -> int:
        return len(self.h)

    @property
    def l(self) -> int:
        return sum(1 for x in self.rho if x > 0)


@dataclass(frozen=True)
class PhaseSpec:
    theta: float
    c: float
    sigma: tuple[int, ...]
    r: tuple[int, ...]
    h: tuple[int, ...]

    def __post_init__(self):
        m = len(self.r)
        if len(self.sigma) != m or len(self.h) != m:
            raise ValueError("sigma, r, h must have equal length")
        if any(s not in (1, -1) for s in self.sigma):
            raise ValueError("sigma entries must be +1 or -1")
        if any(int(x) == 0 for x in self.r):
            raise ValueError("all r_i must be nonzero")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")

    @property
    def m(self) -> int:
        return len(self.r)

    def reduce(self) -> ReducedPhase:
        """Group equal h, sum signed r, drop zero sums; positive groups first."""
        groups: dict[int, list[int]] = {}
        for i, hv in enumerate(self.h):
            groups.setdefault(int(hv), []).append(i)
        items = []
        for hv in sorted(groups):
            idx = groups[hv]
            rho = sum(self.sigma[i] * int(self.r[i]) for i in idx)
            if rho != 0:
                items.append((hv, rho, tuple(idx)))
        items.sort(key=lambda t: (t[1] < 0, t[0]))
        return ReducedPhase(
            self.theta,
            self.c,
            tuple(t[0] for t in items),
            tuple(t[1] for t in items),
            tuple(t[2] for t in items),
        )


def falling_factorial(p: float, j: int) -> float:
    out = 1.0
    for i in range(j):
        out *= p - i
    return out


def _as_reduced(ps) -> ReducedPhase:
    return ps.reduce() if isinstance(ps, PhaseSpec) else ps


def phase_eval(ps, s, order: int = 0):
    """phi^(order)(s) in closed form; s may be an array."""
    red = _as_reduced(ps)
    s_arr = np.asarray(s, dtype=np.float64)
    if red.L and np.any(np.min(red.h) <= s_arr):
        raise ValueError("every h must exceed s")
    p = 1.0 / red.theta
    coef = (-1.0) ** order * falling_factorial(p, order)
    out = np.zeros_like(s_arr)
    for hv, rho in zip(red.h, red.rho):
        out = out + rho * (hv - s_arr) ** (p - order)
    out = red.c * coef * out
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DiagonalFlag:
    is_diagonal: bool
    witness: Partition | None = None

    def __bool__(self) -> bool:
        return self.is_diagonal


def is_diagonal(r: Sequence[int], h: Sequence[int], sigma: Sequence[int]) -> DiagonalFlag:
    """Diagonal iff every equal-h group has signed r summing to zero."""
    if any(int(x) == 0 for x in r):
        raise ValueError("all r_i must be nonzero")
    groups: dict[int, list[int]] = {}
    for i, hv in enumerate(h):
        groups.setdefault(int(hv), []).append(i + 1)
    for idx in groups.values():
        if sum(sigma[i - 1] * int(r[i - 1]) for i in idx) != 0:
            return DiagonalFlag(False, None)
    return DiagonalFlag(True, Partition.of(*groups.values()))


def vandermonde_matrix(tau: Sequence[float]) -> np.ndarray:
    """Rows tau^1 .. tau^L."""
    t = np.asarray(tau, dtype=np.float64)
    return t[None, :] ** np.arange(1, t.size + 1)[:, None]


def vandermonde_inverse(tau: Sequence[float], L: int | None = None) -> np.ndarray:
    """Closed-form inverse of vandermonde_matrix(tau).

    Entry (t, T) is (-1)^(T-1) e_{L-T}(tau without t) / (tau_t prod_{l != t}(tau_l - tau_t)).
    """
    t = np.asarray(tau, dtype=np.float64)
    L = t.size if L is None else int(L)
    if t.size != L:
        raise ValueError("len(tau) must equal L")
    if L < 1 or L > 8:
        raise ValueError("need 1 <= L <= 8")
    if np.unique(t).size != L:
        raise ValueError("tau must be distinct")
    if np.any(t == 0):
        raise ValueError("tau must be nonzero")
    out = np.empty((L, L))
    for i in range(L):
        others = np.delete(t, i)
        # np.poly gives prod (x - tau), coefficient k is (-1)^k e_k
        e = np.poly(others) * (-1.0) ** np.arange(L)
        denom = t[i] * np.prod(others - t[i])
        for T in range(1, L + 1):
            out[i, T - 1] = (-1.0) ** (T - 1) * e[L - T] / denom
    return out


def spectral_norm(A: np.ndarray, iters: int = 100, tol: float = 1e-8, seed: int = 0) -> float:
    """Largest singular value by power iteration on A^T A."""
    A = np.asarray(A, dtype=np.float64)
    rng = np.random.Generator(np.random.Philox(key=seed))
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - lam) <= tol * nw:
            lam = nw
            break
        lam = nw
    return math.sqrt(lam)


def _matrix_m(red: ReducedPhase, s: float) -> tuple[np.ndarray, np.ndarray]:
    """M and tau at s."""
    p = 1.0 / red.theta
    base = np.asarray(red.h, dtype=np.float64) - s
    if np.any(base <= 0):
        raise ValueError("every h must exceed s")
    tau = 1.0 / base
    d = np.array([(-1.0) ** j * falling_factorial(p, j) for j in range(1, red.L + 1)])
    return d[:, None] * vandermonde_matrix(tau), tau


def _m_inverse(red: ReducedPhase, s: float) -> np.ndarray:
    p = 1.0 / red.theta
    d = np.array([(-1.0) ** j * falling_factorial(p, j) for j in range(1, red.L + 1)])
    if np.any(d == 0):
        raise ZeroDivisionError("M is singular: 1/theta is an integer below L")
    _, tau = _matrix_m(red, s)
    return vandermonde_inverse(tau) / d[None, :]


def inv_norm_bound(ps, s: float, q_labels: Sequence[float] | None = None) -> dict:
    """Repulsion bound max_t e^(theta((L-1) q_t + sum_l q_l)) prod_{l != t} |h_l - h_t|^-1
    next to the true spectral norm of M^-1.

    Without ``q_labels`` the labels are q_l = log(h_l - s)/theta, i.e. the
    exact sizes the window labels stand in for.
    """
    red = _as_reduced(ps)
    if red.L < 2:
        raise ValueError("need L >= 2")
    h = np.asarray(red.h, dtype=np.float64)
    if q_labels is None:
        q = np.log(h - s) / red.theta
    else:
        q = np.asarray(q_labels, dtype=np.float64)
    total_q = float(np.sum(q))
    best = 0.0
    for t in range(red.L):
        diff = np.abs(np.delete(h, t) - h[t])
        val = math.exp(red.theta * ((red.L - 1) * q[t] + total_q)) / float(np.prod(diff))
        best = max(best, val)
    true = spectral_norm(_m_inverse(red, s))
    return {"bound": best, "true": true, "ratio": true / best}


def van_lower_bound(ps, s: float) -> dict:
    """Van_L(s) = max_{i<=L} |phi^(i)(s)| and the lower bound ||b|| / ||M^-1||."""
    red = _as_reduced(ps)
    if red.L == 0:
        raise ValueError("diagonal phase has no lower bound")
    p = 1.0 / red.theta
    h = np.asarray(red.h, dtype=np.float64)
    b = red.c * np.asarray(red.rho, dtype=np.float64) * (h - s) ** p
    a = np.array([phase_eval(red, s, j) for j in range(1, red.L + 1)])
    van = float(np.max(np.abs(a)))
    bound = float(np.linalg.norm(b)) / spectral_norm(_m_inverse(red, s))
    if van < bound / math.sqrt(red.L) * (1.0 - 1e-9):
        raise ArithmeticError(f"Van {van} below bound/sqrt(L) {bound / math.sqrt(red.L)}")
    return {"van": van, "bound": bound, "a": a, "b": b}


def phase_zeros(fun: Callable, a: float, b: float, grid: int = 1000) -> list[float]:
    """Zeros of fun on [a, b] by sign-change scan plus bisection."""
    x = np.linspace(a, b, grid + 1)
    v = np.asarray(fun(x), dtype=np.float64)
    out = []
    for i in np.nonzero(v == 0)[0]:
        out.append(float(x[i]))
    for i in np.nonzero(v[:-1] * v[1:] < 0)[0]:
        lo, hi, flo = x[i], x[i + 1], v[i]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = float(fun(np.array([mid]))[0])
            if fm == 0:
                lo = hi = mid
                break
            if np.sign(fm) == np.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
        out.append(0.5 * (lo + hi))
    return sorted(out)


def total_variation(g: Callable, a: float, b: float, grid: int = 4097) -> float:
    """Total variation of g on [a, b] plus |g(a)|."""
    x = np.linspace(a, b, grid)
    v = np.asarray(g(x))
    return float(np.sum(np.abs(np.diff(v))) + abs(v[0]))


def oscillatory_integral(ps, g: Callable, lam: float, L: int, interval: tuple[float, float] = (0.0, 1.0)) -> dict:
    """int g e(phi) over the interval, next to the van der Corput bound V(g) lam^(-1/L).

    ``ps`` is a PhaseSpec, a ReducedPhase or a vectorized phase function.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    a, b = interval
    if callable(ps) and not isinstance(ps, (PhaseSpec, ReducedPhase)):
        phase = ps
        zeros = None
    else:
        red = _as_reduced(ps)

        def phase(x, red=red):
            return phase_eval(red, x, 0)

        zeros = len(phase_zeros(lambda x: phase_eval(red, x, L), a, b))
    res = filon_integrate(g, phase, a, b, tol=1e-12, initial_panels=8)
    bound = total_variation(g, a, b) * lam ** (-1.0 / L)
    value = res.value
    return {
        "value": value,
        "bound": bound,
        "ratio": abs(value) / bound if bound > 0 else 0.0,
        "quad_error": res.error_estimate,
        "zeros": zeros,
    }


@dataclass(frozen=True)
class WindowLabels:
    """Per-coordinate window indices: q into the n-windows, u (> 0) into the k-windows."""

    q: tuple[int, ...]
    u: tuple[int, ...]


def _n_log_scale(nsys: NWindowSystem, q: int) -> float:
    lo, hi = nsys.window(q).support
    return math.log(0.5 * (lo + hi))


def _group_labels(red: ReducedPhase, qeff: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merged groups take the largest q label and the smallest u label."""
    gq = np.array([max(qeff[i] for i in g) for g in red.members])
    gu = np.array([min(u[i] for i in g) for g in red.members])
    return gq, gu


def _prop_max_term(red: ReducedPhase, gq: np.ndarray, gu: np.ndarray) -> float:
    L = red.L
    h = np.asarray(red.h, dtype=np.float64)
    best = 0.0
    for t in range(L):
        others = np.delete(np.arange(L), t)
        expo = -gu[t] + red.theta * ((L - 1) * gq[t] + float(np.sum(gq[others])))
        prod = float(np.prod(np.abs(h[others] - h[t]))) if others.size else 1.0
        best = max(best, math.exp(expo) / prod)
    return best ** (1.0 / L)


def i_hr_bound(
    ps: PhaseSpec,
    labels: WindowLabels,
    N: int,
    f: TestFunction | None = None,
    consts: BConstants | None = None,
    alpha: float = 1.0,
    epsilon: float = DEFAULT_EPSILON,
    measure: bool = True,
) -> dict:
    """Bound on I(h, r) at mu_0 = mu(s = 0) and, optionally, |I(h, r)| by quadrature.

    The bound is K_u(mu_0) N_q(mu_0) e^(sum u) (prod r)^((Theta-1)/2) times
    max_t (e^(-u_t) e^(theta((L-1) q_t + sum_{l != t} q_l)) prod_{l != t} |h_l - h_t|^-1)^(1/L)
    over the reduced groups.  n-window labels enter as log of the window midpoint.
    """
    if consts is None:
        consts = derive_constants(alpha, ps.theta, verify=False)
    red = ps.reduce()
    if red.L == 0:
        raise ValueError("diagonal (r, h) has no off-diagonal bound")
    nsys = NWindowSystem(N)
    ksys = KWindowSystem(N, epsilon)
    Th, th = consts.Theta, consts.theta
    r = np.asarray(ps.r, dtype=np.float64)
    h = np.asarray(ps.h, dtype=np.float64)
    u = np.asarray(labels.u, dtype=np.float64)
    nwins = [nsys.window(q) for q in labels.q]
    kwins = [ksys.window(int(abs(uu))) for uu in labels.u]
    at = consts.alpha * th

    def mu_of(s):
        return consts.c0 * r[:, None] * (h[:, None] - s[None, :]) ** (1.0 / (Th - 1.0))

    def weights(mu):
        x = (at * mu / r[:, None]) ** Th
        w = np.ones(mu.shape[1])
        for i in range(len(r)):
            w = w * kwins[i](mu[i]) * nwins[i](x[i])
        return w

    mu0 = mu_of(np.zeros(1))
    w0 = float(weights(mu0)[0])
    qeff = np.array([_n_log_scale(nsys, q) for q in labels.q])
    gq, gu = _group_labels(red, qeff, np.abs(u))
    bound = w0 * math.exp(float(np.sum(np.abs(u)))) * float(np.prod(r)) ** ((Th - 1.0) / 2.0)
    bound *= _prop_max_term(red, gq, gu)
    out = {"bound": bound, "weight_mu0": w0, "L": red.L}
    if not measure:
        return out
    if f is None:
        raise ValueError("f required to measure I")
    sig = np.asarray(ps.sigma, dtype=np.float64)
    p = 1.0 / th

    def amp(s):
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        mu = mu_of(s)
        a = weights(mu)
        for i in range(len(r)):
            a = a * mu[i] ** (Th / 2.0) / np.sqrt(phi_kk(consts, mu[i], r[i])) * f.fhat(mu[i] / N)
        return a

    def phase(s):
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        return consts.c * np.sum(sig[:, None] * r[:, None] * (h[:, None] - s[None, :]) ** p, axis=0)

    # mu_i(s) and x_i(s) decrease in s, so each window pins s to an interval
    s_lo, s_hi = 0.0, 1.0
    e = Th - 1.0
    for i in range(len(r)):
        k_lo, k_hi = kwins[i].support
        n_lo, n_hi = nwins[i].support
        mu_lo = max(k_lo, n_lo ** (1.0 / Th) * r[i] / at)
        mu_hi = min(k_hi, n_hi ** (1.0 / Th) * r[i] / at)
        if mu_hi <= mu_lo or mu_hi <= 0:
            s_lo, s_hi = 1.0, 0.0
            break
        s_lo = max(s_lo, h[i] - (mu_hi / (consts.c0 * r[i])) ** e)
        s_hi = min(s_hi, h[i] - (max(mu_lo, 0.0) / (consts.c0 * r[i])) ** e)
    if s_hi <= s_lo:
        out["measured"] = 0.0
        out["quad_error"] = 0.0
        return out
    size = float(np.max(np.abs(amp(np.linspace(s_lo, s_hi, 257))))) * (s_hi - s_lo)
    res = filon_integrate(amp, phase, s_lo, s_hi, tol=1e-9 * max(size, 1e-300), initial_panels=4, max_panels=4000)
    out["measured"] = abs(res.value)
    out["quad_error"] = res.error_estimate
    return out


def predicted_exponent(m: int, theta: float) -> float:
    return ((m * m + m - 1) * theta - 1.0) / m


@dataclass
class OffdiagEstimate:
    N: int
    m: int
    theta: float
    total: float
    measured_total: float | None
    predicted_exponent: float
    blocks: int
    samples: int
    rows: list[dict] = field(default_factory=list)

    def to_csv(self, path) -> None:
        if not self.rows:
            return
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(self.rows[0]))
            w.writeheader()
            w.writerows(self.rows)


def _valid_h(consts: BConstants, nsys: NWindowSystem, ksys: KWindowSystem, u: int):
    """h >= 1 with a nonzero n-window at x(h) and at least one r in the k-window of u."""
    Th = consts.Theta
    hi_x = nsys.window(nsys.count - 1).support[1]
    # x(h) = (alpha theta c0 h^(1/(Theta-1)))^Theta <= hi_x
    h_max = int(math.floor((hi_x ** (1.0 / Th) / (consts.alpha * consts.theta * consts.c0)) ** (Th - 1.0)))
    k_lo, k_hi = ksys.window(u).support
    out = []
    for hv in range(1, max(1, h_max) + 1):
        rho = consts.c0 * hv ** (1.0 / (Th - 1.0))
        r_lo = max(1, int(math.ceil(k_lo / rho)))
        r_hi = int(math.floor(k_hi / rho))
        if r_hi >= r_lo:
            out.append((hv, r_lo, r_hi))
    return out


def _q_options(consts: BConstants, nsys: NWindowSystem, hv: int) -> list[tuple[int, float]]:
    x = (consts.alpha * consts.theta * consts.c0 * hv ** (1.0 / (consts.Theta - 1.0))) ** consts.Theta
    opts = []
    for q in range(nsys.count):
        lo, hi = nsys.window(q).support
        if lo < x < hi:
            w = float(nsys.window(q)(x))
            if w != 0.0:
                opts.append((q, w))
    return opts


def offdiag_err_estimate(
    m: int,
    theta: float,
    N: int,
    f: TestFunction | None = None,
    seq=None,
    alpha: float = 1.0,
    samples_per_block: int = 4,
    seed: int = 0,
    epsilon: float = DEFAULT_EPSILON,
    measure_samples: int = 0,
) -> OffdiagEstimate:
    """Stratified Horvitz-Thompson estimate of the off-diagonal error aggregate

        Err = N^-m sum eta(r, h) (prod r)^(-(Theta+1)/2) B(h, r; q, u)

    with B from i_hr_bound.  Strata are u-vectors in {0..U}^m.  Within a
    stratum each coordinate draws h uniformly among shifts with a nonempty
    r-range, then r uniformly in that range, and sigma uniformly; the q-sum is
    exact.  The generator for a stratum is Philox keyed by (seed, stratum id).
    ``measure_samples`` > 0 also estimates the aggregate with |I| by quadrature
    from that many draws per stratum.
    """
    if m < 3:
        raise ValueError("m must be >= 3")
    if seq is not None:
        alpha, theta = seq.alpha, seq.theta
    consts = derive_constants(alpha, theta, verify=False)
    nsys = NWindowSystem(N)
    ksys = KWindowSystem(N, epsilon)
    Th = consts.Theta
    U = ksys.U
    valid = {u: _valid_h(consts, nsys, ksys, u) for u in range(U + 1)}
    qopts: dict[int, list] = {}
    total = 0.0
    meas_total = 0.0 if measure_samples > 0 else None
    n_blocks = n_samples = 0
    rows: list[dict] = []
    scale = float(N) ** (-m)
    for bid, uvec in enumerate(itertools.product(range(U + 1), repeat=m)):
        choices = [valid[u] for u in uvec]
        if any(not c for c in choices):
            continue
        n_blocks += 1
        rng = np.random.Generator(np.random.Philox(key=[seed, bid]))
        draws = max(samples_per_block, measure_samples)
        for d in range(draws):
            hs, rs, wt = [], [], 1.0
            for c in choices:
                hv, r_lo, r_hi = c[int(rng.integers(len(c)))]
                hs.append(hv)
                rs.append(int(rng.integers(r_lo, r_hi + 1)))
                wt *= len(c) * (r_hi - r_lo + 1)
            sig = tuple(int(x) for x in rng.choice([-1, 1], size=m))
            wt *= 2.0**m
            ps = PhaseSpec(theta, consts.c, sig, tuple(rs), tuple(hs))
            if is_diagonal(rs, hs, sig):
                continue
            for hv in hs:
                if hv not in qopts:
                    qopts[hv] = _q_options(consts, nsys, hv)
            rfac = float(np.prod(rs)) ** (-(Th + 1.0) / 2.0)
            for qv in itertools.product(*[qopts[hv] for hv in hs]):
                labels = WindowLabels(tuple(q for q, _ in qv), uvec)
                do_measure = meas_total is not None and d < measure_samples
                res = i_hr_bound(
                    ps, labels, N, f=f, consts=consts, epsilon=epsilon, measure=do_measure and f is not None
                )
                term = scale * rfac * res["bound"]
                if d < samples_per_block:
                    total += wt * term / samples_per_block
                    n_samples += 1
                if do_measure and "measured" in res:
                    meas_total += wt * scale * rfac * res["measured"] / measure_samples
                rows.append(
                    {
                        "block": bid,
                        "u": " ".join(map(str, uvec)),
                        "q": " ".join(str(q) for q, _ in qv),
                        "h": " ".join(map(str, hs)),
                        "r": " ".join(map(str, rs)),
                        "sigma": " ".join(map(str, sig)),
                        "L": res["L"],
                        "weight": wt,
                        "bound": res["bound"],
                        "measured": res.get("measured", ""),
                    }
                )
    return OffdiagEstimate(
        int(N), m, float(theta), total, meas_total, predicted_exponent(m, theta), n_blocks, n_samples, rows
    )


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log y on log x and its R^2."""
    lx = np.log(np.asarray(xs, dtype=np.float64))
    ly = np.log(np.asarray(ys, dtype=np.float64))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum((ly - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


def h_sum_holder_check(m: int, theta: float, H: int) -> dict:
    """Brute force sum over h in [1, H]^m of max_t prod_{l != t} |h_l - h_t|^(-1/m)
    against log(H)^((m-2)/m) H^(m-1+1/m), the bound after substituting H = N^theta.

    Tuples with a repeated entry contribute 0: they belong to a lower L.
    """
    if m < 2 or H < 1:
        raise ValueError("need m >= 2 and H >= 1")
    axes = np.meshgrid(*[np.arange(1, H + 1, dtype=np.float64)] * m, indexing="ij")
    hs = [a.ravel() for a in axes]
    best = np.zeros_like(hs[0])
    distinct = np.ones(hs[0].shape, dtype=bool)
    for t in range(m):
        prod = np.ones_like(hs[0])
        for l in range(m):
            if l == t:
                continue
            d = np.abs(hs[l] - hs[t])
            distinct &= d > 0
            prod *= np.where(d > 0, d, 1.0)
        best = np.maximum(best, prod ** (-1.0 / m))
    brute = float(np.sum(np.where(distinct, best, 0.0)))
    bound = math.log(H) ** ((m - 2) / m) * H ** (m - 1 + 1.0 / m) if H > 1 else 0.0
    return {"H": H, "brute": brute, "bound": bound, "ratio": brute / bound if bound > 0 else 0.0}


def holder_slope(m: int, theta: float, Hs: Sequence[int] = (10, 20, 40)) -> dict:
    """Growth of the h-sum in N = H^(1/theta) against theta(m-1) + theta/m."""
    vals = [h_sum_holder_check(m, theta, H)["brute"] for H in Hs]
    slope_h, r2 = loglog_slope(Hs, vals)
    return {
        "slope_H": slope_h,
        "slope_N": theta * slope_h,
        "predicted_N": theta * (m - 1) + theta / m,
        "r2": r2,
        "values": vals,
    }
