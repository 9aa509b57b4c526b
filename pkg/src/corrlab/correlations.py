"""m-point correlations, the counting variable S_N and its moments.

Every function accepts ``seq`` either as a :class:`SequenceSpec` or as a
float array of y-values (y(1), y(2), ...), which lets the same code run on
lattice and iid control sequences.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .partitions import (
    Partition,
    bell_number,
    coarsenings,
    enumerate_partitions,
    is_nonisolating,
    mobius,
    partition_target,
)
from .seqcore import SequenceSpec, eval_y_array, frac_product, phases_mod1
from .testfn import CorrKernel, TestFunction, build_corr_kernel, f_moment

__all__ = [
    "QuadratureGrid",
    "CorrelationReport",
    "DualResult",
    "MomentResult",
    "sequence_values",
    "neighbor_lists",
    "rm_correlation",
    "completed_correlation",
    "s_counting",
    "s_on_grid",
    "moment_m",
    "power_sums_on_grid",
    "m_partition_restricted",
    "partition_moments",
    "fourier_coefficients",
    "moment_dual",
    "dual_tail_bound",
    "k_j_sum",
    "poissonian_target",
    "nonisolating_target",
    "kj_target",
    "correlation_report",
    "iid_control",
]

_ANCHOR_CHUNK = 65536
_GRID_CHUNK = 4096
_MAX_GRID_LOG2 = 24


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform periodic trapezoid grid on [0, 1) with M = 2**p nodes."""

    M: int

    def __post_init__(self):
        if self.M < 1 or self.M & (self.M - 1):
            raise ValueError(f"node count must be a power of two, got {self.M}")

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.M) / self.M

    def refine(self) -> "QuadratureGrid":
        return QuadratureGrid(2 * self.M)


@dataclass(frozen=True)
class MomentResult:
    value: float
    M: int
    change: float


@dataclass(frozen=True)
class DualResult:
    value: float
    K_cut: int
    tail_bound: float


@dataclass
class CorrelationReport:
    m: int
    N: int
    value: float
    target: float
    abs_deviation: float
    seq: dict
    f: dict
    runtime_ms: float
    extra: dict = field(default_factory=dict)


def sequence_values(seq, N: int) -> np.ndarray:
    """y(1..N) as float64."""
    N = int(N)
    if isinstance(seq, SequenceSpec):
        return eval_y_array(seq, np.arange(1, N + 1, dtype=np.float64))
    y = np.asarray(seq, dtype=np.float64)
    if y.ndim != 1 or y.size < N:
        raise ValueError(f"need at least {N} sequence values, got shape {y.shape}")
    return y[:N]


def _frac(y: np.ndarray) -> np.ndarray:
    x = y - np.floor(y)
    return np.where(x >= 1.0, 0.0, x)


def _describe_seq(seq) -> dict:
    if isinstance(seq, SequenceSpec):
        return seq.describe()
    return {"kind": "explicit", "size": int(np.asarray(seq).size)}


def neighbor_lists(x: np.ndarray, N: int, J: float, include_self: bool):
    """All (j, shift) with shift = N (x_j + k - x_a) in (-J, J) for each anchor a.

    Integer images k are enumerated, so windows wider than the circle work.
    Returns CSR arrays ``(indptr, nbr, shift)`` indexed by the anchor's
    original position.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    order = np.argsort(x, kind="stable")
    xs = x[order]
    w = J / N
    K = int(math.ceil(w)) + 1
    images = np.arange(-K, K + 1, dtype=np.float64)
    xe = (xs[None, :] + images[:, None]).ravel()
    ie = np.tile(order, images.size)
    lo = np.searchsorted(xe, xs - w, side="right")
    hi = np.searchsorted(xe, xs + w, side="left")
    counts = hi - lo
    total = int(counts.sum())
    starts = np.repeat(lo - np.cumsum(counts) + counts, counts)
    pos = starts + np.arange(total)
    anchor_sorted = np.repeat(np.arange(n), counts)
    shift = N * (xe[pos] - xs[anchor_sorted])
    nbr = ie[pos]
    keep = np.ones(total, dtype=bool)
    if not include_self:
        keep = pos != (K * n + anchor_sorted)
    anchor = order[anchor_sorted]
    anchor, nbr, shift = anchor[keep], nbr[keep], shift[keep]
    # regroup by original anchor index
    perm = np.argsort(anchor, kind="stable")
    anchor, nbr, shift = anchor[perm], nbr[perm], shift[perm]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, anchor + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, nbr, shift


def _expand(indptr, nbr, shift, last):
    counts = indptr[last + 1] - indptr[last]
    rep = np.repeat(np.arange(last.size), counts)
    offs = np.repeat(indptr[last] - np.cumsum(counts) + counts, counts) + np.arange(int(counts.sum()))
    return rep, nbr[offs], shift[offs]


def _ordered_sum(parts) -> float:
    return float(np.sum(np.asarray(list(parts), dtype=np.float64)))


def _map(fn, items, workers: int):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def rm_correlation(seq, f, m: int, N: int, workers: int = 1) -> float:
    """R^(m)(N, f) = (1/N) sum over distinct m-tuples of f(N||x1-x2||, ..., N||x_{m-1}-x_m||).

    ``f`` is a :class:`TestFunction` (used as a product of 1-D factors) or a
    :class:`CorrKernel` with m - 1 arguments.  Tuples are built by walking
    neighbor chains of the sorted points, so the cost is linear in N.
    """
    m, N = int(m), int(N)
    if m < 2:
        raise ValueError("m must be >= 2")
    if N < m:
        raise ValueError("need N >= m")
    kernel = None
    if isinstance(f, CorrKernel):
        if f.m != m:
            raise ValueError("kernel dimension does not match m")
        kernel, base = f, f.base
        J = 4.0 * base.support_radius
    else:
        base = f
        J = base.support_radius
    if J >= N / 2:
        raise ValueError(f"support {J} too wide for N={N}; need J < N/2")
    x = _frac(sequence_values(seq, N))
    indptr, nbr, shift = neighbor_lists(x, N, J, include_self=False)

    def chunk_sum(start: int) -> float:
        idx = np.arange(start, min(start + _ANCHOR_CHUNK, N))
        cols = [idx]
        weight = np.ones(idx.size)
        dists = []
        for _ in range(m - 1):
            rep, nxt, sh = _expand(indptr, nbr, shift, cols[-1])
            cols = [c[rep] for c in cols]
            ok = np.ones(nxt.size, dtype=bool)
            for c in cols:
                ok &= c != nxt
            cols = [c[ok] for c in cols] + [nxt[ok]]
            dist = np.abs(sh[ok])
            if kernel is None:
                weight = weight[rep][ok] * base.f(dist)
                keep = weight != 0.0
                cols = [c[keep] for c in cols]
                weight = weight[keep]
            else:
                dists = [d[rep][ok] for d in dists] + [dist]
        if kernel is not None:
            if not cols[0].size:
                return 0.0
            return float(np.sum(kernel(np.stack(dists, axis=1))))
        return float(np.sum(weight))

    parts = _map(chunk_sum, range(0, N, _ANCHOR_CHUNK), workers)
    return _ordered_sum(parts) / N


def completed_correlation(seq, f, m: int, N: int) -> float:
    """(1/N) sum over all m-tuples and integer shifts of F(N(y_1 - y_2 + k_1), ...).

    Shifts are measured from the last index, so F is evaluated through its
    suffix-sum form int f(s) prod_i f(s + t_i) ds.
    """
    m, N = int(m), int(N)
    kernel = f if isinstance(f, CorrKernel) else build_corr_kernel(f, m)
    if m == 1:
        return f_moment(kernel.base, 1)
    J = 2.0 * kernel.base.support_radius
    x = _frac(sequence_values(seq, N))
    indptr, nbr, shift = neighbor_lists(x, N, J, include_self=True)

    parts = []
    for start in range(0, N, _ANCHOR_CHUNK):
        anchors = np.arange(start, min(start + _ANCHOR_CHUNK, N))
        owner = anchors
        shifts: list[np.ndarray] = []
        for _ in range(m - 1):
            rep, _, sh = _expand(indptr, nbr, shift, owner)
            owner = owner[rep]
            shifts = [s[rep] for s in shifts] + [sh]
        if owner.size:
            parts.append(float(np.sum(kernel.shifted_product_integral(np.stack(shifts, axis=1)))))
    return _ordered_sum(parts) / N


def s_counting(seq, f: TestFunction, N: int, s) -> np.ndarray | float:
    """S_N(s) = sum_n sum_k f(N(y(n) + k + s)), evaluated directly."""
    N = int(N)
    y = sequence_values(seq, N)
    s_arr = np.atleast_1d(np.asarray(s, dtype=np.float64))
    K = int(math.ceil(f.support_radius / N)) + 1
    out = np.zeros(s_arr.size)
    for i in range(0, s_arr.size, 256):
        v = _frac(y[None, :] + s_arr[i : i + 256, None])
        acc = np.zeros(v.shape[0])
        for k in range(-K, K + 1):
            acc += np.sum(f.f(N * (v + k)), axis=1)
        out[i : i + 256] = acc
    return out if np.ndim(s) else float(out[0])


def power_sums_on_grid(seq, f: TestFunction, N: int, M: int, powers) -> dict[int, np.ndarray]:
    """p_j(s_i) = sum_n g_n(s_i)^j on s_i = i/M, g_n(s) = sum_k f(N(y_n + k + s)).

    Each g_n is nonzero only within radius/N of -y_n mod 1, so the values are
    scattered onto the grid window by window.
    """
    N, M = int(N), int(M)
    powers = sorted(set(int(j) for j in powers))
    y = sequence_values(seq, N)
    c = _frac(-y) * M
    half = f.support_radius * M / N
    width = int(math.floor(2 * half)) + 2
    out = {j: np.zeros(M) for j in powers}
    offs = np.arange(width)
    for i in range(0, N, _GRID_CHUNK):
        ci = c[i : i + _GRID_CHUNK]
        j0 = np.ceil(ci - half).astype(np.int64)
        jj = j0[:, None] + offs[None, :]
        # several periods of the same n can land on one node when the window is wide
        g = np.zeros((ci.size, M)) if width > M else None
        vals = f.f(N * (jj - ci[:, None]) / M)
        if g is not None:
            np.add.at(g, (np.repeat(np.arange(ci.size), width), (jj % M).ravel()), vals.ravel())
            for j in powers:
                out[j] += np.sum(g**j, axis=0)
        else:
            flat = (jj % M).ravel()
            for j in powers:
                out[j] += np.bincount(flat, weights=(vals**j).ravel(), minlength=M)
    return out


def s_on_grid(seq, f: TestFunction, N: int, grid: QuadratureGrid) -> np.ndarray:
    return power_sums_on_grid(seq, f, N, grid.M, [1])[1]


def _initial_M(f: TestFunction, N: int) -> int:
    target = 16 * N * max(1.0, f.support_radius)
    return 1 << max(4, int(math.ceil(math.log2(target))))


def _integrate_adaptive(evaluate, M0: int, tol: float, max_log2: int = _MAX_GRID_LOG2) -> MomentResult:
    M = M0
    prev = evaluate(M)
    while True:
        if M >= (1 << max_log2):
            raise ArithmeticError(f"s-grid did not converge to {tol:g} by M={M}")
        M *= 2
        cur = evaluate(M)
        change = abs(cur - prev)
        if change < tol:
            return MomentResult(cur, M, change)
        prev = cur


def moment_m(
    seq,
    f: TestFunction,
    m: int,
    N: int,
    grid: QuadratureGrid | None = None,
    tol: float = 1e-10,
    info: bool = False,
):
    """M^(m)(N) = int_0^1 S_N(s)^m ds by the periodic trapezoid rule.

    With ``grid`` the node count is fixed; otherwise M doubles from
    16 N max(1, radius) until two successive values differ by less than tol.
    """
    m, N = int(m), int(N)
    if m < 1:
        raise ValueError("m must be >= 1")

    def at(M: int) -> float:
        p1 = power_sums_on_grid(seq, f, N, M, [1])[1]
        return float(np.mean(p1**m))

    if grid is not None:
        res = MomentResult(at(grid.M), grid.M, float("nan"))
    else:
        res = _integrate_adaptive(at, _initial_M(f, N), tol)
    return res if info else res.value


def _restricted_integrand(p: Partition, sums: dict[int, np.ndarray]) -> np.ndarray:
    total = np.zeros_like(next(iter(sums.values())))
    for pi, weights in coarsenings(p):
        term = float(mobius(pi)) * np.ones_like(total)
        for w in weights:
            term = term * sums[w]
        total += term
    return total


def m_partition_restricted(
    seq,
    f: TestFunction,
    m: int,
    N: int,
    p: Partition,
    grid: QuadratureGrid | None = None,
    tol: float = 1e-10,
    info: bool = False,
):
    """M_P(N): the m-th moment restricted to P-distinct index vectors.

    For blocks of sizes w_1..w_d the inner sum is over distinct (a_1..a_d) of
    prod g_{a_i}^{w_i}; Moebius inversion on the partition lattice of the
    blocks turns it into signed products of power sums p_j = sum_n g_n^j.
    """
    if p.m != int(m):
        raise ValueError("partition is not of [m]")

    def at(M: int) -> float:
        sums = power_sums_on_grid(seq, f, N, M, range(1, int(m) + 1))
        return float(np.mean(_restricted_integrand(p, sums)))

    if grid is not None:
        res = MomentResult(at(grid.M), grid.M, float("nan"))
    else:
        res = _integrate_adaptive(at, _initial_M(f, N), tol)
    return res if info else res.value


def partition_moments(seq, f: TestFunction, m: int, N: int, grid: QuadratureGrid) -> dict:
    """All M_P on one grid, plus M^(m) on the same grid."""
    sums = power_sums_on_grid(seq, f, N, grid.M, range(1, int(m) + 1))
    out = {p: float(np.mean(_restricted_integrand(p, sums))) for p in enumerate_partitions(m)}
    return {"parts": out, "moment": float(np.mean(sums[1] ** int(m)))}


def fourier_coefficients(seq, f: TestFunction, N: int, K_cut: int, chunk: int = 1 << 22) -> np.ndarray:
    """a(k) = fhat(k/N) sum_n e(k y(n)) for k = 0..K_cut (a(-k) is the conjugate)."""
    N, K = int(N), int(K_cut)
    n_idx = np.arange(1, N + 1, dtype=np.float64)
    y = sequence_values(seq, N)
    ks = np.arange(0, K + 1, dtype=np.float64)
    out = np.empty(K + 1, dtype=np.complex128)
    rows = max(1, chunk // N)
    for i in range(0, K + 1, rows):
        kk = ks[i : i + rows, None]
        if isinstance(seq, SequenceSpec):
            ph, _ = phases_mod1(seq, kk, n_idx[None, :], max_error=1e-9)
        else:
            ph = frac_product(kk, y[None, :])
        out[i : i + rows] = np.sum(np.exp(2j * np.pi * ph), axis=1)
    return out * f.fhat(ks / N)


def _full_line(a_pos: np.ndarray) -> np.ndarray:
    return np.concatenate([np.conj(a_pos[:0:-1]), a_pos])


def _conv_zero(line: np.ndarray, j: int) -> complex:
    """(line^{*j})(0) for a line indexed -K..K."""
    if j == 0:
        return 1.0
    K = (line.size - 1) // 2
    acc = line
    for _ in range(j - 2):
        acc = fftconvolve(acc, line)
    if j == 1:
        return complex(line[K])
    # pair the (j-1)-fold convolution with the last factor at total index 0
    L = (acc.size - 1) // 2
    return complex(np.dot(acc[L - K : L + K + 1], line[::-1]))


def dual_tail_bound(f: TestFunction, m: int, N: int, K_cut: int) -> float:
    """Bound on the truncation error of the constrained k-sum at |k_i| <= K_cut."""
    from .testfn import fourier_tail_bound

    tb = fourier_tail_bound(f, N, K_cut)
    if m < 2:
        return 0.0
    sup = float(f.fhat_bound(K_cut / ((m - 1) * N)))
    return m * (m - 1) * tb["tau"] * sup * tb["A"] ** (m - 2)


def moment_dual(seq, f: TestFunction, m: int, N: int, K_cut: int, info: bool = False):
    """(1/N^m) sum over |k_i| <= K_cut with k_1 + ... + k_m = 0 of prod a(k_i)."""
    m, N = int(m), int(N)
    a = fourier_coefficients(seq, f, N, K_cut)
    value = float(np.real(_conv_zero(_full_line(a), m))) / N**m
    res = DualResult(value, int(K_cut), dual_tail_bound(f, m, N, K_cut))
    return res if info else res.value


def k_j_sum(seq, f: TestFunction, m: int, j: int, N: int, K_cut: int, a: np.ndarray | None = None) -> float:
    """K_j(N): the part of the dual sum with exactly j nonzero frequencies."""
    m, j, N = int(m), int(j), int(N)
    if j == 1:
        raise ValueError("j = 1 is impossible: the s-integral forces the frequencies to sum to zero")
    if not 0 <= j <= m:
        raise ValueError(f"j must lie in 0..{m}")
    f0 = float(f.fhat(0.0))
    if j == 0:
        return f0**m
    if a is None:
        a = fourier_coefficients(seq, f, N, K_cut)
    b = _full_line(a).copy()
    b[(b.size - 1) // 2] = 0.0
    return math.comb(m, j) * f0 ** (m - j) * float(np.real(_conv_zero(b, j))) / N**j


def poissonian_target(f, m: int) -> float:
    """sum over partitions of [m] of prod E(f^|block|); ``f`` may be a moment callable."""
    mom = _moment_fn(f)
    return float(sum(partition_target(p, mom) for p in enumerate_partitions(int(m))))


def nonisolating_target(f, j: int) -> float:
    """sum over non-isolating partitions of [j] of prod E(f^|block|)."""
    mom = _moment_fn(f)
    return float(sum(partition_target(p, mom) for p in enumerate_partitions(int(j)) if is_nonisolating(p)))


def kj_target(f, m: int, j: int) -> float:
    """Limit of K_j: binom(m, j) E(f)^(m-j) times the non-isolating target of [j]."""
    mom = _moment_fn(f)
    if j == 0:
        return mom(1) ** m
    return math.comb(m, j) * mom(1) ** (m - j) * nonisolating_target(f, j)


def _moment_fn(f):
    if isinstance(f, TestFunction):
        cache: dict[int, float] = {}

        def mom(j: int) -> float:
            if j not in cache:
                cache[j] = f_moment(f, j)
            return cache[j]

        return mom
    if callable(f):
        return f
    raise TypeError("expected a TestFunction or a moment callable")


def correlation_report(seq, f: TestFunction, m: int, N: int, workers: int = 1) -> CorrelationReport:
    """R^(m) with the product kernel against the Poissonian value E(f)^(m-1)."""
    t0 = time.perf_counter()
    value = rm_correlation(seq, f, m, N, workers=workers)
    target = f_moment(f, 1) ** (m - 1)
    ms = 1e3 * (time.perf_counter() - t0)
    return CorrelationReport(m, N, value, target, abs(value - target), _describe_seq(seq), f.describe(), ms)


def iid_control(f: TestFunction, m: int, N: int, replicates: int = 8, seed: int = 0, workers: int = 1) -> dict:
    """Mean and standard error of R^(m) over iid uniform point sets."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    vals = np.array(
        [rm_correlation(rng.random(N), f, m, N, workers=workers) for _ in range(int(replicates))]
    )
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else float("nan")
    target = f_moment(f, 1) ** (m - 1)
    return {"mean": mean, "se": se, "target": target, "z": abs(mean - target) / se, "values": vals.tolist()}


def bell_check(m: int) -> bool:
    return poissonian_target(lambda j: 1.0, m) == bell_number(m)
