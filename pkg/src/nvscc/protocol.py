"""Spin-to-charge conversion protocols and their contrast optimisation.

Parameter names carry their units: ``x_mhz`` (excitation rate), ``i_mhz``
(singlet ionization rate), durations ``t_pump_us`` / ``t_ion_us`` for the first
run and ``t_pump_<k>_us`` / ``t_ion_<k>_us`` for run ``k`` of a repeated
protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .rate_model import NvRates, PulseSegment, PulseSequence, contrast

ELECTRODE_SCC = "electrode_scc"
REPEATED_SCC = "repeated_scc"
JASKULA = "jaskula"
KINDS = (ELECTRODE_SCC, REPEATED_SCC, JASKULA)

# warp exponent: u in [0, 1] maps to lo + (hi - lo) * (10**(W u) - 1) / (10**W - 1)
_WARP = 3.0


@dataclass(frozen=True)
class ProtocolSpec:
    """A protocol family with its cross-section ratios and search bounds.

    For ``jaskula`` the two phases are both triplet excitations (594 nm then
    637 nm) with ratios ``sigma_pump`` and ``sigma_ion``; ionization happens
    only through the excited-triplet channel, so ms=0 is the state that ends
    up ionized and the contrast is reported with that polarity.
    """

    kind: str = ELECTRODE_SCC
    n_runs: int = 1
    sigma_pump: float = 0.26
    sigma_ion: float = 0.0
    x_bounds: tuple[float, float] = (0.0, 500.0)
    i_bounds: tuple[float, float] = (0.0, 5000.0)
    t_pump_bounds: tuple[float, float] = (0.0, 5.0)
    t_ion_bounds: tuple[float, float] = (0.0, 5.0)
    shared_power: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown protocol kind {self.kind!r}; expected one of {KINDS}")
        if int(self.n_runs) != self.n_runs or self.n_runs < 1:
            raise ValueError("n_runs must be a positive integer")
        if self.kind != REPEATED_SCC and self.n_runs != 1:
            raise ValueError(f"{self.kind} is a single-run protocol")
        for name in ("sigma_pump", "sigma_ion"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative")
        for name in ("x_bounds", "i_bounds", "t_pump_bounds", "t_ion_bounds"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and 0 <= lo <= hi):
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi < inf, got {(lo, hi)}")

    @property
    def polarity(self) -> float:
        return -1.0 if self.kind == JASKULA else 1.0

    @property
    def runs(self) -> int:
        return self.n_runs if self.kind == REPEATED_SCC else 1

    def parameter_names(self) -> list[str]:
        if self.kind == JASKULA:
            powers = ["x_mhz"] if self.shared_power else ["x_mhz", "x_ion_mhz"]
            return powers + ["t_pump_us", "t_ion_us"]
        names = ["x_mhz", "i_mhz"]
        for k in range(1, self.runs + 1):
            names += duration_names(k)
        return names

    def bounds(self) -> dict[str, tuple[float, float]]:
        out = {}
        for name in self.parameter_names():
            if name.startswith("x_"):
                out[name] = self.x_bounds
            elif name == "i_mhz":
                out[name] = self.i_bounds
            elif name.startswith("t_pump"):
                out[name] = self.t_pump_bounds
            else:
                out[name] = self.t_ion_bounds
        return out

    def with_sigma(self, sigma: float) -> "ProtocolSpec":
        return replace(self, sigma_pump=sigma)


def duration_names(run: int) -> list[str]:
    if run == 1:
        return ["t_pump_us", "t_ion_us"]
    return [f"t_pump_{run}_us", f"t_ion_{run}_us"]


def electrode_scc(sigma_pump: float = 0.26, n_runs: int = 1, **kw) -> ProtocolSpec:
    kind = ELECTRODE_SCC if n_runs == 1 else REPEATED_SCC
    return ProtocolSpec(kind=kind, n_runs=n_runs, sigma_pump=sigma_pump, **kw)


def jaskula(sigma_pump: float = 0.16, sigma_ion: float = 0.1, **kw) -> ProtocolSpec:
    return ProtocolSpec(kind=JASKULA, sigma_pump=sigma_pump, sigma_ion=sigma_ion, **kw)


def _check_params(spec: ProtocolSpec, params: Mapping[str, float], tol: float = 1e-12) -> dict:
    bounds = spec.bounds()
    missing = set(bounds) - set(params)
    if missing:
        raise ValueError(f"missing protocol parameters: {sorted(missing)}")
    extra = set(params) - set(bounds)
    if extra:
        raise ValueError(f"unknown protocol parameters for {spec.kind}: {sorted(extra)}")
    out = {}
    for name, (lo, hi) in bounds.items():
        v = float(params[name])
        if not math.isfinite(v):
            raise ValueError(f"{name} is not finite")
        if v < lo - tol or v > hi + tol:
            raise ValueError(f"{name}={v} outside bounds [{lo}, {hi}]")
        out[name] = v
    return out


def build_protocol(spec: ProtocolSpec, params: Mapping[str, float]) -> PulseSequence:
    """Pulse sequence for ``spec`` at the given parameter values."""
    p = _check_params(spec, params)
    if spec.kind == JASKULA:
        x_pump = p["x_mhz"]
        x_ion = p["x_mhz"] if spec.shared_power else p["x_ion_mhz"]
        return PulseSequence(
            [
                PulseSegment(x_pump, 0.0, spec.sigma_pump, p["t_pump_us"]),
                PulseSegment(x_ion, 0.0, spec.sigma_ion, p["t_ion_us"]),
            ]
        )
    segs = []
    for k in range(1, spec.runs + 1):
        t_pump, t_ion = (p[n] for n in duration_names(k))
        segs.append(PulseSegment(p["x_mhz"], 0.0, spec.sigma_pump, t_pump))
        segs.append(PulseSegment(0.0, p["i_mhz"], spec.sigma_ion, t_ion))
    return PulseSequence(segs)


def protocol_contrast(spec: ProtocolSpec, params: Mapping[str, float], rates: NvRates = NvRates()) -> float:
    """Contrast of ``spec`` at ``params``, signed so that a working readout is positive."""
    return spec.polarity * contrast(rates, build_protocol(spec, params))


@dataclass
class OptimizationResult:
    best_contrast: float
    best_params: dict[str, float]
    evaluations: int
    trace: list[tuple[int, float]] = field(default_factory=list)


def _to_unit(x, lo, hi):
    span = hi - lo
    frac = np.where(span > 0, (x - lo) / np.where(span > 0, span, 1.0), 0.0)
    frac = np.clip(frac, 0.0, 1.0)
    return np.log10(1.0 + frac * (10**_WARP - 1.0)) / _WARP


def _from_unit(u, lo, hi):
    u = np.clip(u, 0.0, 1.0)
    return lo + (hi - lo) * (10 ** (_WARP * u) - 1.0) / (10**_WARP - 1.0)


def optimize_contrast(
    spec: ProtocolSpec,
    rates: NvRates = NvRates(),
    *,
    seed: int = 0,
    starts: int = 16,
    fixed: Mapping[str, float] | None = None,
    initial: Sequence[Mapping[str, float]] = (),
    maxiter_per_dim: int = 400,
) -> OptimizationResult:
    """Maximise the protocol contrast over its free parameters.

    Multi-start bounded Nelder-Mead. Starts are the entries of ``initial``
    followed by ``starts`` scrambled Sobol points, all in a log-warped unit
    cube so that short pulses and weak lasers are sampled as densely as long
    and strong ones. The best start wins; ties go to the earliest.
    """
    if starts < 0:
        raise ValueError("starts must be non-negative")
    bounds = spec.bounds()
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(bounds)
    if unknown:
        raise ValueError(f"cannot fix unknown parameters {sorted(unknown)}")
    for name, v in fixed.items():
        lo, hi = bounds[name]
        if not (lo <= v <= hi):
            raise ValueError(f"fixed {name}={v} outside bounds [{lo}, {hi}]")
    free = [n for n in bounds if n not in fixed]
    lo = np.array([bounds[n][0] for n in free])
    hi = np.array([bounds[n][1] for n in free])

    def params_of(u) -> dict[str, float]:
        x = _from_unit(u, lo, hi)
        out = dict(fixed)
        out.update({n: float(v) for n, v in zip(free, x)})
        return out

    nev = 0

    def objective(u):
        nonlocal nev
        nev += 1
        c = protocol_contrast(spec, params_of(u), rates)
        if not math.isfinite(c):
            raise FloatingPointError(f"non-finite contrast at {params_of(u)}")
        return -c

    if not free:
        p = params_of(np.empty(0))
        c = protocol_contrast(spec, p, rates)
        return OptimizationResult(c, p, 1, [(0, c)])

    seeds = [_to_unit(np.array([float(s[n]) for n in free]), lo, hi) for s in initial]
    if starts:
        sobol = qmc.Sobol(len(free), scramble=True, seed=seed)
        m = max(int(math.ceil(math.log2(starts))), 0)
        seeds += list(sobol.random_base2(m)[:starts])
    if not seeds:
        raise ValueError("no starting points")

    best_c, best_p, trace = -math.inf, None, []
    for i, u0 in enumerate(seeds):
        res = minimize(
            objective,
            u0,
            method="Nelder-Mead",
            bounds=[(0.0, 1.0)] * len(free),
            options=dict(maxiter=maxiter_per_dim * len(free), xatol=1e-7, fatol=1e-11, adaptive=True),
        )
        p = params_of(res.x)
        c = protocol_contrast(spec, p, rates)
        trace.append((i, c))
        if c > best_c:
            best_c, best_p = c, p
    return OptimizationResult(best_c, best_p, nev, trace)


def embed_params(params: Mapping[str, float], spec: ProtocolSpec) -> dict[str, float]:
    """Extend a solution to ``spec``'s parameter set, padding extra runs with zero durations."""
    out = {}
    for name in spec.parameter_names():
        out[name] = float(params.get(name, 0.0))
    return out


def optimize_runs(
    sigma_pump: float,
    max_runs: int,
    rates: NvRates = NvRates(),
    **kw,
) -> list[OptimizationResult]:
    """Optimise repeated protocols with 1..max_runs runs.

    Each optimisation is also started from the previous optimum padded with
    an idle extra run, so adding runs never lowers the reported contrast.
    """
    base = kw.pop("spec_kw", {})
    results: list[OptimizationResult] = []
    for n in range(1, max_runs + 1):
        spec = electrode_scc(sigma_pump, n_runs=n, **base)
        initial = [embed_params(results[-1].best_params, spec)] if results else []
        results.append(optimize_contrast(spec, rates, initial=initial, **kw))
    return results


def sigma_sweep(
    spec: ProtocolSpec,
    sigma_values: Sequence[float],
    rates: NvRates = NvRates(),
    **kw,
) -> list[tuple[float, OptimizationResult]]:
    """Optimised contrast at each pump cross-section ratio."""
    out = []
    for s in sigma_values:
        if not s >= 0:
            raise ValueError("sigma values must be non-negative")
        out.append((float(s), optimize_contrast(spec.with_sigma(float(s)), rates, **kw)))
    return out


def contrast_vs_param(
    spec: ProtocolSpec,
    param_name: str,
    values: Sequence[float],
    rates: NvRates = NvRates(),
    **kw,
) -> list[tuple[float, OptimizationResult]]:
    """Hold ``param_name`` at each value and optimise everything else."""
    names = spec.parameter_names()
    if param_name not in names:
        raise ValueError(f"unknown parameter {param_name!r} for {spec.kind}; expected one of {names}")
    initial = list(kw.pop("initial", ()))
    out = []
    for v in values:
        starts = [{**p, param_name: float(v)} for p in initial]
        res = optimize_contrast(spec, rates, fixed={param_name: float(v)}, initial=starts, **kw)
        out.append((float(v), res))
    return out


def sensitivity_improvement(c_ref: float, c_new: float) -> float:
    """Gain in DC sensitivity from raising the contrast, as a difference of inverse contrasts."""
    for name, c in (("c_ref", c_ref), ("c_new", c_new)):
        if not (0 < c <= 1):
            raise ValueError(f"{name} must lie in (0, 1], got {c}")
    return 1.0 / c_ref - 1.0 / c_new
