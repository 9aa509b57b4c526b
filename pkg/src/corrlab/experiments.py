"""Experiment configuration, dispatch and result records.

A config is an INI file with one ``[experiment]`` section.  Unknown keys are
rejected.  Each run returns a record holding named scalars, array sidecars,
certificates (named booleans) and the defaults in force.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__

KINDS = ("correlate", "moments", "identity-check", "expsum", "bprocess-check", "offdiag", "sweep")
CHECKS = {
    "correlate": ("trend",),
    "moments": ("value",),
    "identity-check": ("partition", "completed", "dual", "bell", "kj"),
    "expsum": ("windows", "reconstruction", "kusmin-landau"),
    "bprocess-check": ("residuals", "constants"),
    "offdiag": ("vandermonde", "van-der-corput", "err-exponent", "holder"),
    "sweep": ("moments",),
}
N_MAX = 10**7


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def load_defaults() -> dict:
    cp = configparser.ConfigParser()
    cp.read_string(resources.files("corrlab").joinpath("defaults.ini").read_text())
    out = {}
    for k, v in cp["defaults"].items():
        try:
            out[k] = int(v)
        except ValueError:
            out[k] = float(v)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    check: str = ""
    alpha: float = 1.0
    theta: float = 0.5
    m: int = 3
    N: tuple[int, ...] = (1000,)
    family: str = "bspline"
    radius: float = 1.0
    grid_log2: int = 0
    seed: int = 0
    delta: float = 0.1
    epsilon: float = 0.05
    out: str = "results"
    workers: int = 1
    replicates: int = 0
    s_points: int = 0
    samples: int = 0
    measure_samples: int = 0
    label: str = ""

    def __post_init__(self):
        errs = []
        if self.kind not in KINDS:
            errs.append(f"kind must be one of {', '.join(KINDS)}")
        else:
            check = self.check or CHECKS[self.kind][0]
            object.__setattr__(self, "check", check)
            if check not in CHECKS[self.kind]:
                errs.append(f"check for {self.kind} must be one of {', '.join(CHECKS[self.kind])}")
        if not 0 < self.theta < 1:
            errs.append("theta must lie in (0, 1)")
        if self.alpha <= 0:
            errs.append("alpha must be positive")
        m_lo = 1 if self.kind == "moments" else 2
        if not m_lo <= self.m <= 8:
            errs.append(f"m must lie in [{m_lo}, 8]")
        if not self.N or any(n < 1 or n > N_MAX for n in self.N):
            errs.append(f"every N must lie in [1, {N_MAX}]")
        if self.radius <= 0:
            errs.append("radius must be positive")
        if self.workers < 1:
            errs.append("workers must be >= 1")
        if errs:
            raise ConfigError("; ".join(errs))

    def canonical(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("out")
        d["N"] = list(self.N)
        return d

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    raw = raw.strip()
    if name == "N":
        try:
            return tuple(int(float(x)) for x in raw.replace(";", ",").split(",") if x.strip())
        except ValueError as exc:
            raise ConfigError(f"N: cannot parse {raw!r}") from exc
    typ = _FIELDS[name].type
    try:
        if typ == "int":
            return int(float(raw))
        if typ == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from exc
    return raw


_LOWER = {name.lower(): name for name in _FIELDS}


def config_from_mapping(values: dict) -> ExperimentConfig:
    values = {_LOWER.get(k.lower(), k): v for k, v in values.items()}
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    if "kind" not in values:
        raise ConfigError("missing key: kind")
    kw = {k: (_coerce(k, v) if isinstance(v, str) else v) for k, v in values.items()}
    if "N" in kw and isinstance(kw["N"], int):
        kw["N"] = (kw["N"],)
    if "N" in kw:
        kw["N"] = tuple(int(x) for x in kw["N"])
    return ExperimentConfig(**kw)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    extra = [s for s in cp.sections() if s != "experiment"]
    if extra:
        raise ConfigError(f"unknown sections: {', '.join(extra)}")
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section")
    values = dict(cp["experiment"])
    values.update(overrides or {})
    return config_from_mapping(values)


@dataclass
class Outcome:
    scalars: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)


def _seq(cfg):
    from .seqcore import SequenceSpec

    return SequenceSpec(cfg.alpha, cfg.theta)


def _f(cfg):
    from .testfn import make_test_function

    return make_test_function(cfg.family, cfg.radius)


def _is_decreasing(vals) -> bool:
    return all(b < a for a, b in zip(vals, vals[1:]))


def _run_correlate(cfg, d) -> Outcome:
    from .correlations import iid_control, rm_correlation
    from .testfn import f_moment

    seq, f = _seq(cfg), _f(cfg)
    target = f_moment(f, 1) ** (cfg.m - 1)
    vals, devs, secs = [], [], []
    for N in cfg.N:
        t0 = time.perf_counter()
        vals.append(rm_correlation(seq, f, cfg.m, N, workers=cfg.workers))
        secs.append(time.perf_counter() - t0)
        devs.append(abs(vals[-1] - target))
    out = Outcome()
    out.scalars.update(target=target, final_value=vals[-1], final_rel_deviation=devs[-1] / target)
    out.arrays["series"] = {"N": list(cfg.N), "value": vals, "deviation": devs, "seconds": secs}
    out.certificates["monotone_decrease"] = _is_decreasing(devs)
    out.certificates["final_rel_deviation"] = devs[-1] / target < d["rel_dev_max"]
    if cfg.replicates > 1:
        ctl = iid_control(f, cfg.m, cfg.N[0], replicates=cfg.replicates, seed=cfg.seed, workers=cfg.workers)
        out.scalars.update(iid_mean=ctl["mean"], iid_se=ctl["se"], iid_z=ctl["z"])
        out.certificates["iid_control"] = ctl["z"] <= d["iid_z_max"]
    return out


def _run_moments(cfg, d) -> Outcome:
    from .correlations import moment_m, poissonian_target
    from .testfn import f_moment

    seq, f = _seq(cfg), _f(cfg)
    target = poissonian_target(f, cfg.m)
    out = Outcome()
    vals, changes, Ms = [], [], []
    for N in cfg.N:
        res = moment_m(seq, f, cfg.m, N, tol=d["grid_tol"], info=True)
        vals.append(res.value)
        changes.append(res.change)
        Ms.append(res.M)
    out.arrays["series"] = {"N": list(cfg.N), "value": vals, "grid_nodes": Ms, "grid_change": changes}
    out.scalars.update(target=target, final_value=vals[-1])
    out.certificates["grid_converged"] = all(c < d["grid_tol"] for c in changes)
    if cfg.m == 1:
        ef = f_moment(f, 1)
        err = max(abs(v - ef) for v in vals)
        out.scalars["first_moment_error"] = err
        out.certificates["first_moment"] = err < d["first_moment_tol"]
    return out


def _grid(cfg, d):
    from .correlations import QuadratureGrid

    return QuadratureGrid(1 << (cfg.grid_log2 or d["grid_log2"]))


def _nonisolating_oracle(m: int) -> int:
    """Inclusion-exclusion: partitions of [m] with no singleton."""
    from .partitions import bell_number

    return sum((-1) ** k * math.comb(m, k) * bell_number(m - k) for k in range(m + 1))


def _run_identity(cfg, d) -> Outcome:
    from .correlations import (
        completed_correlation,
        k_j_sum,
        kj_target,
        moment_dual,
        moment_m,
        partition_moments,
        poissonian_target,
    )
    from .partitions import bell_number, enumerate_partitions, is_nonisolating
    from .testfn import kcut_for_tolerance

    out = Outcome()
    check = cfg.check
    if check == "bell":
        bells, counts, oracle = [], [], []
        for j in range(1, cfg.m + 1):
            bells.append(poissonian_target(lambda i: 1.0, j))
            counts.append(sum(1 for p in enumerate_partitions(j) if is_nonisolating(p)))
            oracle.append(_nonisolating_oracle(j))
        out.arrays["bell"] = {"m": list(range(1, cfg.m + 1)), "target": bells, "nonisolating": counts}
        out.certificates["bell_targets"] = all(b == bell_number(j) for j, b in enumerate(bells, 1))
        out.certificates["nonisolating_counts"] = counts == oracle
        return out
    seq, f = _seq(cfg), _f(cfg)
    rows = {"N": [], "lhs": [], "rhs": [], "deviation": []}
    extra_ok = True
    for N in cfg.N:
        if check == "partition":
            pm = partition_moments(seq, f, cfg.m, N, _grid(cfg, d))
            # adaptive moment on its own grid, so the check is not circular
            lhs, rhs = sum(pm["parts"].values()), moment_m(seq, f, cfg.m, N, tol=d["grid_tol"])
            out.scalars[f"same_grid_deviation_N{N}"] = abs(lhs - pm["moment"])
            tol = d["identity_tol"]
        elif check == "completed":
            lhs = moment_m(seq, f, cfg.m, N, tol=d["grid_tol"])
            rhs = completed_correlation(seq, f, cfg.m, N)
            tol = d["completed_tol"]
        elif check == "dual":
            K = kcut_for_tolerance(f, N, 1e-12)
            res = moment_dual(seq, f, cfg.m, N, K, info=True)
            lhs, rhs = res.value, moment_m(seq, f, cfg.m, N, tol=d["grid_tol"])
            tol = d["dual_tol"]
            out.scalars[f"tail_bound_N{N}"] = res.tail_bound
            out.scalars[f"K_cut_N{N}"] = K
            extra_ok &= res.tail_bound < tol
        else:
            K = kcut_for_tolerance(f, N, 1e-12)
            parts = [k_j_sum(seq, f, cfg.m, j, N, K) for j in range(cfg.m + 1) if j != 1]
            lhs, rhs = sum(parts), moment_dual(seq, f, cfg.m, N, K)
            tol = d["dual_tol"]
            for j in range(cfg.m + 1):
                if j != 1:
                    out.scalars[f"K{j}_target"] = kj_target(f, cfg.m, j)
            out.arrays[f"kj_N{N}"] = {"j": [j for j in range(cfg.m + 1) if j != 1], "value": parts}
        rows["N"].append(N)
        rows["lhs"].append(lhs)
        rows["rhs"].append(rhs)
        rows["deviation"].append(abs(lhs - rhs))
    out.arrays["identity"] = rows
    out.scalars["max_deviation"] = max(rows["deviation"])
    out.certificates["identity"] = out.scalars["max_deviation"] < tol
    if check == "dual":
        out.certificates["truncation_certificate"] = extra_ok
    return out


def _window_uniformity(cfg, d) -> Outcome:
    from .expsums import KWindowSystem, NWindowSystem, window_certificates

    out = Outcome()
    res_n, res_k = [], []
    consts = {"n": {t: [] for t in range(1, 5)}, "k": {t: [] for t in range(1, 5)}}
    for N in cfg.N:
        ns = NWindowSystem(N)
        x = np.concatenate([np.linspace(2.0 / math.e, N, 20001), np.arange(1, min(N, 20000) + 1, dtype=float)])
        res_n.append(float(np.max(np.abs(ns.total(x) - 1.0))))
        ks = KWindowSystem(N, cfg.epsilon)
        lo, hi = ks.unity_range
        k = np.linspace(lo, hi * (1 - 1e-12), 20001)
        k = np.concatenate([k, -k])
        res_k.append(float(np.max(np.abs(ks.total(k) - 1.0))))
        cert = window_certificates(N, cfg.epsilon)
        for fam in ("n", "k"):
            for t in range(1, 5):
                consts[fam][t].append(cert[fam][t])
    out.arrays["unity"] = {"N": list(cfg.N), "n_residual": res_n, "k_residual": res_k}
    uniform = True
    for fam in ("n", "k"):
        for t in range(1, 5):
            vals = consts[fam][t]
            out.scalars[f"C_{fam}_{t}"] = max(vals)
            uniform &= max(vals) <= d["window_uniform_factor"] * min(vals)
    out.scalars["max_n_residual"] = max(res_n)
    out.scalars["max_k_residual"] = max(res_k)
    out.certificates["n_unity"] = max(res_n) < d["unity_tol"]
    out.certificates["k_unity"] = max(res_k) < d["unity_tol"]
    out.certificates["uniform_derivative_constant"] = bool(uniform)
    return out


def _run_expsum(cfg, d) -> Outcome:
    from .expsums import (
        Degeneracy,
        KWindowSystem,
        NWindowSystem,
        classify_degenerate,
        kusmin_landau_check,
        reconstruction_check,
    )

    if cfg.check == "windows":
        return _window_uniformity(cfg, d)
    seq, out = _seq(cfg), Outcome()
    if cfg.check == "reconstruction":
        f = _f(cfg)
        M = cfg.s_points or d["s_points"]
        s = (np.arange(M) + 0.5) / M
        errs, certs = [], []
        for N in cfg.N:
            r = reconstruction_check(seq, f, N, s, cfg.epsilon)
            errs.append(r["max_error"])
            certs.append(r["certificate"])
        out.arrays["reconstruction"] = {"N": list(cfg.N), "max_error": errs, "certificate": certs}
        out.certificates["reconstruction"] = all(e <= c for e, c in zip(errs, certs))
        return out
    rows = {"N": [], "q": [], "u": [], "max_ratio": []}
    for N in cfg.N:
        ns, ks = NWindowSystem(N), KWindowSystem(N, cfg.epsilon)
        for q in range(ns.count):
            for u in range(1, ks.U + 1):
                if classify_degenerate(cfg.alpha, cfg.theta, u, q, ns.Q, cfg.delta) is not Degeneracy.DEGENERATE:
                    continue
                if cfg.alpha * cfg.theta * math.exp(u + (cfg.theta - 1.0) * q) >= 0.1:
                    continue
                r = kusmin_landau_check(seq, N, q, u, cfg.epsilon)
                for key in rows:
                    rows[key].append(N if key == "N" else r[key])
    out.arrays["kusmin_landau"] = rows
    out.scalars["pairs"] = len(rows["q"])
    out.scalars["max_ratio"] = max(rows["max_ratio"]) if rows["q"] else 0.0
    out.certificates["kusmin_landau"] = bool(rows["q"]) and out.scalars["max_ratio"] <= d["kl_ratio_max"]
    return out


def bprocess_family(N: int) -> tuple[int, int]:
    """Default nondegenerate (q, u) family: (ceil(Q/2), Q - 1)."""
    from .expsums import q_of

    Q = q_of(N)
    return (Q + 1) // 2, Q - 1


def _run_bprocess(cfg, d) -> Outcome:
    from .bprocess import derive_constants, residual_sweep, verify_constants

    out = Outcome()
    if cfg.check == "constants":
        c = derive_constants(cfg.alpha, cfg.theta, verify=False)
        res = verify_constants(c, samples=100, seed=cfg.seed)
        out.scalars.update(c.as_dict())
        out.scalars.update(res)
        ref = derive_constants(1.0, 0.5, verify=False)
        closed = (2.0, 0.25, math.sqrt(0.5), 2.0, -1.0)
        got = (ref.Theta, ref.beta, ref.c1, ref.c0, ref.c)
        out.scalars["closed_case_error"] = max(abs(a - b) for a, b in zip(got, closed))
        out.certificates["oracle"] = max(res.values()) < d["constants_tol"]
        out.certificates["closed_case"] = out.scalars["closed_case_error"] < 1e-14
        out.certificates["beta_positive"] = c.beta > 0
        return out
    seq, f = _seq(cfg), _f(cfg)
    rows = residual_sweep(seq, f, cfg.N, bprocess_family, M=cfg.s_points or d["s_points"], epsilon=cfg.epsilon, delta=cfg.delta)
    out.arrays["residuals"] = {k: [r[k] for r in rows] for k in rows[0]}
    out.certificates["E_minus_EB_decreasing"] = _is_decreasing([r["sup_E_minus_EB"] for r in rows])
    out.certificates["EB_minus_EBB_decreasing"] = _is_decreasing([r["sup_EB_minus_EBB"] for r in rows])
    return out


def _rng(cfg, block: int = 0):
    return np.random.Generator(np.random.Philox(key=[cfg.seed, block]))


def _run_offdiag(cfg, d) -> Outcome:
    from . import oscillatory as osc

    out = Outcome()
    if cfg.check == "vandermonde":
        rng = _rng(cfg)
        worst = 0.0
        n = cfg.samples or 100
        for i in range(n):
            L = 1 + i % 5
            while True:
                tau = rng.uniform(0.1, 1.0, L)
                if L == 1 or np.min(np.diff(np.sort(tau))) > 0.05:
                    break
            err = np.max(np.abs(osc.vandermonde_inverse(tau) - np.linalg.inv(osc.vandermonde_matrix(tau))))
            worst = max(worst, float(err))
        out.scalars.update(instances=n, max_entry_error=worst)
        out.certificates["closed_form"] = worst < d["vandermonde_tol"]
        return out
    if cfg.check == "van-der-corput":
        rows = vdc_sweep(cfg.theta, cfg.m, cfg.samples or 40, cfg.seed)
        out.arrays["van_der_corput"] = rows
        out.scalars["max_ratio"] = max(rows["ratio"])
        out.certificates["vdc_bound"] = out.scalars["max_ratio"] <= d["vdc_factor"]
        return out
    if cfg.check == "holder":
        res = osc.holder_slope(cfg.m, cfg.theta)
        out.scalars.update({k: v for k, v in res.items() if k != "values"})
        out.certificates["holder_slope"] = res["slope_N"] <= res["predicted_N"] + d["slope_margin"]
        return out
    f = _f(cfg) if cfg.measure_samples else None
    totals, measured = [], []
    for N in cfg.N:
        est = osc.offdiag_err_estimate(
            cfg.m,
            cfg.theta,
            N,
            f=f,
            alpha=cfg.alpha,
            samples_per_block=cfg.samples or d["samples"],
            seed=cfg.seed,
            epsilon=cfg.epsilon,
            measure_samples=cfg.measure_samples,
        )
        totals.append(est.total)
        measured.append(est.measured_total)
        out.arrays[f"samples_N{N}"] = {k: [r[k] for r in est.rows] for k in est.rows[0]} if est.rows else {}
    slope, r2 = osc.loglog_slope(cfg.N, totals)
    pred = osc.predicted_exponent(cfg.m, cfg.theta)
    out.arrays["err"] = {"N": list(cfg.N), "total": totals}
    out.scalars.update(slope=slope, r2=r2, predicted_exponent=pred)
    if cfg.measure_samples:
        out.arrays["err"]["measured_total"] = measured
        ms, mr2 = osc.loglog_slope(cfg.N, measured)
        out.scalars.update(measured_slope=ms, measured_r2=mr2)
    out.certificates["err_exponent"] = slope <= pred + d["slope_margin"]
    return out


def vdc_sweep(theta: float, m: int, samples: int, seed: int) -> dict:
    """Sampled reduced phases on [0, 1] against the localized van der Corput bound.

    Half the draws are generic (r, h, sigma); the other half are near-cancelling
    pairs r = (R, -R) at adjacent shifts.  The amplitude g(s) = 1 + s/2 does not
    vanish at the ends, so the boundary terms are what the bound has to cover.
    lambda is the grid minimum of Van_L and L the reduced length.
    """
    from . import oscillatory as osc
    from .bprocess import derive_constants

    c = derive_constants(1.0, theta, verify=False).c
    rng = np.random.Generator(np.random.Philox(key=[seed, 1]))
    rows = {"family": [], "L": [], "lambda": [], "value": [], "bound": [], "ratio": []}

    def g(s):
        return 1.0 + 0.5 * np.asarray(s, dtype=np.float64)

    grid = np.linspace(0.0, 1.0, 1001)
    draw = 0
    while len(rows["L"]) < samples:
        draw += 1
        if draw % 2:
            r = tuple(int(x) for x in rng.integers(1, 6, m))
            h = tuple(int(x) for x in rng.integers(2, 8, m))
            sig = tuple(int(x) for x in rng.choice([-1, 1], m))
            fam = "generic"
        else:
            R, H = int(rng.integers(1, 6)), int(rng.integers(2, 8))
            r, h, sig = (R, R), (H, H + 1), (1, -1)
            fam = "cancelling"
        red = osc.PhaseSpec(theta, c, sig, r, h).reduce()
        if red.L == 0:
            continue
        L = red.L
        van = np.max(np.abs(np.array([osc.phase_eval(red, grid, j) for j in range(1, L + 1)])), axis=0)
        lam = float(van.min())
        if lam <= 0:
            continue
        res = osc.oscillatory_integral(red, g, lam, L)
        rows["family"].append(fam)
        rows["L"].append(L)
        rows["lambda"].append(lam)
        rows["value"].append(abs(res["value"]))
        rows["bound"].append(res["bound"])
        rows["ratio"].append(res["ratio"])
    return rows


def _run_sweep(cfg, d) -> Outcome:
    from .correlations import moment_m, poissonian_target
    from .oscillatory import loglog_slope

    seq, f = _seq(cfg), _f(cfg)
    target = poissonian_target(f, cfg.m)
    vals = [moment_m(seq, f, cfg.m, N, tol=d["grid_tol"]) for N in cfg.N]
    devs = [abs(v - target) for v in vals]
    out = Outcome()
    out.arrays["series"] = {"N": list(cfg.N), "value": vals, "deviation": devs}
    out.scalars["target"] = target
    if len(cfg.N) > 1 and all(x > 0 for x in devs):
        slope, r2 = loglog_slope(cfg.N, devs)
        out.scalars.update(slope=slope, r2=r2)
    out.certificates["finite"] = all(math.isfinite(v) for v in vals)
    return out


RUNNERS: dict[str, Callable] = {
    "correlate": _run_correlate,
    "moments": _run_moments,
    "identity-check": _run_identity,
    "expsum": _run_expsum,
    "bprocess-check": _run_bprocess,
    "offdiag": _run_offdiag,
    "sweep": _run_sweep,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def run(cfg: ExperimentConfig) -> dict:
    """Dispatch one config; certificate failures are recorded, never raised."""
    defaults = load_defaults()
    started = time.time()
    t0 = time.perf_counter()
    try:
        outcome = RUNNERS[cfg.kind](cfg, defaults)
        error = None
    except Exception as exc:  # recorded so a sweep can continue
        outcome = Outcome(certificates={"completed": False})
        error = f"{type(exc).__name__}: {exc}"
    record = {
        "config_hash": cfg.hash(),
        "config": cfg.canonical(),
        "defaults": defaults,
        "version": __version__,
        "kind": cfg.kind,
        "check": cfg.check,
        "label": cfg.label,
        "scalars": outcome.scalars,
        "arrays": outcome.arrays,
        "certificates": {k: bool(v) for k, v in outcome.certificates.items()},
        "error": error,
        "started": started,
        "runtime_s": time.perf_counter() - t0,
    }
    record["passed"] = error is None and all(record["certificates"].values())
    return _jsonable(record)


def write_record(record: dict, out_dir) -> Path:
    """Append the record (arrays stripped) to records.jsonl; arrays go to CSV sidecars."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sidecars = {}
    for name, table in record.get("arrays", {}).items():
        if not table:
            continue
        path = out / f"{record['config_hash']}_{name}.csv"
        cols = list(table)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            w.writerows(itertools.zip_longest(*[table[c] for c in cols]))
        sidecars[name] = path.name
    slim = {k: v for k, v in record.items() if k != "arrays"}
    slim["sidecars"] = sidecars
    slim["series"] = {k: v for k, v in record.get("arrays", {}).items() if k in ("series", "err", "identity")}
    target = out / "records.jsonl"
    with open(target, "a") as fh:
        fh.write(json.dumps(slim, sort_keys=True) + "\n")
    return target


def read_records(paths) -> list[dict]:
    recs = []
    for p in paths:
        with open(p) as fh:
            recs.extend(json.loads(line) for line in fh if line.strip())
    return recs


def report(records: list[dict]) -> tuple[str, list[dict]]:
    """Markdown summary and slope rows; records deduplicate by config hash (last wins)."""
    from .oscillatory import loglog_slope

    if not records:
        raise ValueError("no records")
    by_hash = {}
    for r in records:
        by_hash[r["config_hash"]] = r
    lines = ["| label | kind | check | passed | runtime (s) | slope | R^2 |", "|---|---|---|---|---|---|---|"]
    rows = []
    for h, r in by_hash.items():
        slope = r2 = None
        for name in ("series", "err"):
            s = r.get("series", {}).get(name)
            if not s:
                continue
            key = "deviation" if "deviation" in s else "total"
            if key not in s:
                continue
            ys = s[key]
            if len(ys) == 0:
                raise ValueError(f"record {h}: empty series")
            if len(ys) > 1 and all(y > 0 for y in ys):
                slope, r2 = loglog_slope(s["N"], ys)
                rows.append({"config_hash": h, "series": name, "slope": slope, "r2": r2})
        fmt = lambda v: "" if v is None else f"{v:.4g}"
        lines.append(
            f"| {r.get('label') or h} | {r['kind']} | {r['check']} | {'yes' if r['passed'] else 'no'} "
            f"| {r['runtime_s']:.2f} | {fmt(slope)} | {fmt(r2)} |"
        )
    return "\n".join(lines) + "\n", rows
