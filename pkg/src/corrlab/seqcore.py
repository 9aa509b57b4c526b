"""Evaluation of y(n) = alpha * n**theta and of phases k * y(n) reduced mod 1.

Two precision policies are available.  ``standard`` uses float64 with an
error-free product (Dekker split) before the mod-1 reduction, which keeps
the reduced phase accurate to roughly ``|k y| * 2**-51``.  ``compensated``
re-evaluates exp(theta * log n) in extended precision (mpmath) and is
selected automatically once ``|k y|`` exceeds ``auto_switch``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import mpmath
import numpy as np

__all__ = [
    "PrecisionPolicy",
    "SequenceSpec",
    "PhaseValue",
    "PrecisionError",
    "eval_y",
    "eval_y_dd",
    "eval_x",
    "eval_y_array",
    "eval_x_array",
    "nearest_int_dist",
    "phase_mod1",
    "phases_mod1",
    "frac_product",
]

_EPS = 2.0**-53
# Relative error of alpha * n**theta under the standard policy, taken as 4 ulps.
_STD_REL = 4 * _EPS
# Extra bits carried by the compensated path beyond log2|k y|.
_COMP_GUARD_BITS = 96
_K_MAX = 10**9


class PrecisionError(ArithmeticError):
    """Raised when a certified phase error bound exceeds what the caller allows."""


class PrecisionPolicy(str, enum.Enum):
    STANDARD = "standard"
    COMPENSATED = "compensated"


@dataclass(frozen=True)
class SequenceSpec:
    """Parameters of the dilated monomial sequence x(n) = alpha n^theta mod 1.

    ``auto_switch`` is the |k y| threshold above which the standard policy
    hands over to the compensated path; ``None`` disables the switch, in
    which case an oversized error bound raises :class:`PrecisionError`.
    """

    alpha: float
    theta: float
    policy: PrecisionPolicy = PrecisionPolicy.STANDARD
    auto_switch: float | None = 2.0**40

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not (0 < self.theta < 1):
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        object.__setattr__(self, "policy", PrecisionPolicy(self.policy))

    def describe(self) -> dict:
        return {"alpha": self.alpha, "theta": self.theta, "policy": self.policy.value}


@dataclass(frozen=True)
class PhaseValue:
    """k*y(n) mod 1.  ``value_mod1 + residual`` is within ``abs_error_bound``."""

    value_mod1: float
    abs_error_bound: float
    residual: float = 0.0


def _check_n(n) -> int:
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    return n


def _mp_y(spec: SequenceSpec, n: int, prec: int) -> mpmath.mpf:
    with mpmath.workprec(prec):
        return mpmath.mpf(spec.alpha) * mpmath.exp(mpmath.mpf(spec.theta) * mpmath.log(n))


def eval_y(spec: SequenceSpec, n: int) -> float:
    n = _check_n(n)
    if spec.policy is PrecisionPolicy.COMPENSATED:
        return float(_mp_y(spec, n, 160))
    return spec.alpha * float(n) ** spec.theta


def eval_y_dd(spec: SequenceSpec, n: int) -> tuple[float, float]:
    """alpha * n**theta as an unevaluated sum ``hi + lo`` (relative error < 2**-90)."""
    n = _check_n(n)
    with mpmath.workprec(160):
        y = _mp_y(spec, n, 160)
        hi = float(y)
        lo = float(y - hi)
    return hi, lo


def eval_x(spec: SequenceSpec, n: int) -> float:
    """Fractional part of y(n); no bound is enforced, use ``phase_mod1`` for one."""
    return phase_mod1(spec, 1, n, max_error=math.inf).value_mod1


def eval_y_array(spec: SequenceSpec, n) -> np.ndarray:
    """Vectorised ``eval_y`` (float64, standard policy)."""
    n = np.asarray(n, dtype=np.float64)
    if np.any(n < 1):
        raise ValueError("n must be >= 1")
    return spec.alpha * np.power(n, spec.theta)


def eval_x_array(spec: SequenceSpec, n) -> np.ndarray:
    y = eval_y_array(spec, n)
    return _frac(y)


def nearest_int_dist(x):
    """||x||, the distance to the nearest integer."""
    x = np.asarray(x, dtype=np.float64)
    fx = x - np.floor(x)
    out = np.minimum(fx, 1.0 - fx)
    return out if out.ndim else float(out)


def _frac(x: np.ndarray) -> np.ndarray:
    out = x - np.floor(x)
    # x slightly below an integer can round up to exactly 1.0
    return np.where(out >= 1.0, 0.0, out)


def _split(a: np.ndarray):
    c = 134217729.0 * a  # 2**27 + 1
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a: np.ndarray, b: np.ndarray):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def _std_phase(k: np.ndarray, y: np.ndarray):
    p, e = _two_prod(k, y)
    v = _frac(_frac(p) + e)
    bound = np.abs(k * y) * _STD_REL + 2 * _EPS
    return v, bound


def _comp_phase(spec: SequenceSpec, k: int, n: int) -> PhaseValue:
    ky_est = abs(k) * spec.alpha * float(n) ** spec.theta
    prec = _COMP_GUARD_BITS + max(0, math.ceil(math.log2(ky_est + 1.0))) + 64
    with mpmath.workprec(prec):
        val = k * _mp_y(spec, n, prec)
        fr = val - mpmath.floor(val)
        hi = float(fr)
        lo = float(fr - hi)
    if hi >= 1.0:
        hi, lo = 0.0, 0.0
    # mpmath exp/log are accurate to a few ulps of the working precision.
    bound = (ky_est + 1.0) * 2.0 ** (-(prec - 8))
    return PhaseValue(hi, bound, lo)


def phase_mod1(spec: SequenceSpec, k: int, n: int, max_error: float = 2.0**-30) -> PhaseValue:
    """k * alpha * n**theta mod 1 with a certified absolute error bound."""
    n = _check_n(n)
    k = int(k)
    if abs(k) > _K_MAX:
        raise ValueError(f"|k| must not exceed {_K_MAX}")
    if spec.policy is PrecisionPolicy.COMPENSATED:
        return _comp_phase(spec, k, n)
    y = spec.alpha * float(n) ** spec.theta
    if spec.auto_switch is not None and abs(k * y) > spec.auto_switch:
        return _comp_phase(spec, k, n)
    v, b = _std_phase(np.float64(k), np.float64(y))
    pv = PhaseValue(float(v), float(b))
    if pv.abs_error_bound > max_error:
        raise PrecisionError(
            f"phase bound {pv.abs_error_bound:.3g} exceeds {max_error:.3g} (k={k}, n={n})"
        )
    return pv


def phases_mod1(spec: SequenceSpec, k, n, max_error: float = 2.0**-30):
    """Vectorised :func:`phase_mod1` over broadcast arrays ``k`` and ``n``.

    Returns ``(values, bound)`` where ``bound`` is the largest certified error.
    Entries that need the compensated path are evaluated one by one.
    """
    k = np.asarray(k, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    if np.any(np.abs(k) > _K_MAX):
        raise ValueError(f"|k| must not exceed {_K_MAX}")
    k, n = np.broadcast_arrays(k, n)
    y = eval_y_array(spec, n)
    if spec.policy is PrecisionPolicy.COMPENSATED:
        slow = np.ones(k.shape, dtype=bool)
    elif spec.auto_switch is not None:
        slow = np.abs(k * y) > spec.auto_switch
    else:
        slow = np.zeros(k.shape, dtype=bool)
    vals, bnd = _std_phase(k, y)
    vals = np.array(vals, dtype=np.float64)
    worst = float(bnd[~slow].max()) if np.any(~slow) else 0.0
    if np.any(slow):
        for idx in zip(*np.nonzero(slow)):
            pv = _comp_phase(spec, int(k[idx]), int(n[idx]))
            vals[idx] = pv.value_mod1
            worst = max(worst, pv.abs_error_bound)
    if worst > max_error:
        raise PrecisionError(f"phase bound {worst:.3g} exceeds {max_error:.3g}")
    return vals, worst


def frac_product(k, y) -> np.ndarray:
    """frac(k * y) for float arrays via an error-free product (no bound tracking)."""
    k = np.asarray(k, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return _std_phase(k, y)[0]
