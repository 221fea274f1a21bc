"""Huang-Rhys vibronic absorption sidebands at finite temperature.

All spectra live on uniform energy grids (eV). The multi-phonon sum is built
on a detuning axis centred on the zero-phonon line and shifted to absolute
photon energy only when comparing against other cross sections.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import constants

K_B_EV = constants.k / constants.e  # eV / K
H_EV = constants.h / constants.e  # eV s

ZPL_EV = 1.945
GREEN_EV = 2.3
DEFAULT_STEP_EV = 5e-4
DEFAULT_HALF_RANGE_EV = 1.5

_GRID_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Non-negative spectral density sampled on a uniform energy grid."""

    energy: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energy, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if e.ndim != 1 or e.shape != v.shape:
            raise ValueError("energy and values must be 1-D arrays of equal length")
        if e.size == 0:
            raise ValueError("empty spectrum")
        if e.size > 1:
            d = np.diff(e)
            step = (e[-1] - e[0]) / (e.size - 1)
            if step <= 0 or np.max(np.abs(d - step)) > _GRID_RTOL * max(abs(step), np.max(np.abs(e))):
                raise ValueError("energy grid must be uniform and increasing")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("spectral values must be finite and non-negative")
        e.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "energy", e)
        object.__setattr__(self, "values", v)

    @classmethod
    def on_grid(cls, start: float, step: float, values) -> "Spectrum":
        values = np.asarray(values, dtype=float)
        return cls(start + step * np.arange(values.size), values)

    @property
    def step(self) -> float:
        if self.energy.size < 2:
            return 0.0
        return float((self.energy[-1] - self.energy[0]) / (self.energy.size - 1))

    def __len__(self):
        return self.energy.size

    def integral(self) -> float:
        if self.energy.size < 2:
            return 0.0
        return float(np.trapezoid(self.values, dx=self.step))

    def normalized(self) -> "Spectrum":
        area = self.integral()
        if area <= 0:
            raise ValueError("cannot normalise a spectrum with zero area")
        return Spectrum(self.energy, self.values / area)

    def scaled(self, factor: float) -> "Spectrum":
        return Spectrum(self.energy, self.values * factor)

    def shifted(self, offset: float) -> "Spectrum":
        return Spectrum(self.energy + offset, self.values)

    def mean(self) -> float:
        return float(np.trapezoid(self.energy * self.values, dx=self.step) / self.integral())

    def variance(self) -> float:
        mu = self.mean()
        return float(np.trapezoid((self.energy - mu) ** 2 * self.values, dx=self.step) / self.integral())

    def covers(self, energy: float) -> bool:
        return bool(self.energy[0] <= energy <= self.energy[-1])

    def at(self, energy):
        """Linear interpolation; raises outside the grid."""
        energy = np.asarray(energy, dtype=float)
        if np.any(energy < self.energy[0]) or np.any(energy > self.energy[-1]):
            raise ValueError(
                f"energy outside spectrum range [{self.energy[0]:.6g}, {self.energy[-1]:.6g}] eV"
            )
        out = np.interp(energy, self.energy, self.values)
        return float(out) if out.ndim == 0 else out

    def resample(self, energy) -> "Spectrum":
        """Linear interpolation onto ``energy``; zero outside the original range."""
        energy = np.asarray(energy, dtype=float)
        return Spectrum(energy, np.interp(energy, self.energy, self.values, left=0.0, right=0.0))


@dataclass(frozen=True)
class HuangRhysParams:
    huang_rhys: float = 3.49
    temperature: float = 0.0
    n_max: int = 8

    def __post_init__(self):
        if not self.huang_rhys > 0:
            raise ValueError("Huang-Rhys factor must be positive")
        if not self.temperature >= 0:
            raise ValueError("temperature must be non-negative")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError("n_max must be an integer >= 1")


def thz_to_ev(freq_thz: float) -> float:
    return H_EV * freq_thz * 1e12


@dataclass(frozen=True)
class ZplParams:
    center: float = ZPL_EV
    fwhm: float = thz_to_ev(1.0)
    weight: float = 1.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError("ZPL linewidth must be positive")
        if not self.weight >= 0:
            raise ValueError("ZPL weight must be non-negative")


def bose_einstein(omega, temperature: float):
    """Mean phonon occupation at energy ``omega`` (eV) and ``temperature`` (K)."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("phonon energy must be positive")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0:
        n = np.zeros_like(omega)
    else:
        with np.errstate(over="ignore"):
            n = 1.0 / np.expm1(omega / (K_B_EV * temperature))
    return float(n) if n.ndim == 0 else n


def _phonon_grid(f: Spectrum) -> tuple[float, np.ndarray]:
    """Put ``f`` on the grid ``k * step`` (k = 0..K) anchored at zero energy."""
    step = f.step
    if step <= 0:
        # single sample: treat it as one bin of width equal to its energy
        if f.energy[0] <= 0:
            raise ValueError("one-phonon function must be defined at positive energies")
        step = float(f.energy[0])
        return step, np.array([0.0, f.values[0]])
    k_max = int(math.ceil(f.energy[-1] / step - 1e-9))
    grid = step * np.arange(k_max + 1)
    offset = f.energy[0] / step
    if abs(offset - round(offset)) < 1e-9:
        vals = np.zeros(k_max + 1)
        k0 = int(round(offset))
        vals[k0 : k0 + f.energy.size] = f.values
    else:
        vals = f.resample(grid).values.copy()
    vals[0] = 0.0
    if vals[-1] != 0.0:
        # a trailing zero keeps every convolution order's trapezoid area equal to its sum
        vals = np.append(vals, 0.0)
    return step, vals


def one_phonon_band(f: Spectrum, temperature: float) -> Spectrum:
    """Two-sided one-phonon band: emission weight (n+1) f, absorption weight n f."""
    if len(f) == 0 or not np.any(f.values > 0):
        raise ValueError("one-phonon function is empty")
    if f.energy[0] < 0:
        raise ValueError("one-phonon function must be defined for positive phonon energies only")
    step, vals = _phonon_grid(f)
    k = vals.size - 1
    pos = np.zeros_like(vals)
    neg = np.zeros_like(vals)
    omega = step * np.arange(1, k + 1)
    n = bose_einstein(omega, temperature)
    pos[1:] = (n + 1.0) * vals[1:]
    neg[1:] = n * vals[1:]
    values = np.concatenate([neg[:0:-1], [0.0], pos[1:]])
    return Spectrum.on_grid(-k * step, step, values)


def self_convolve(a: Spectrum, b: Spectrum) -> Spectrum:
    """Convolution ``a * b`` scaled so that its integral is ``int(a) * int(b)``."""
    sa, sb = a.step, b.step
    if len(a) < 2 or len(b) < 2 or abs(sa - sb) > 1e-9 * max(sa, sb):
        raise ValueError("convolution needs two spectra on grids of identical spacing")
    values = np.convolve(a.values, b.values) * sa
    return Spectrum.on_grid(a.energy[0] + b.energy[0], sa, values)


def effective_huang_rhys(f: Spectrum, params: HuangRhysParams) -> float:
    """Temperature-scaled Huang-Rhys factor, pinned to ``params.huang_rhys`` at 0 K."""
    band = one_phonon_band(f, params.temperature)
    return params.huang_rhys * band.integral() / _unit_area(f)


def _unit_area(f: Spectrum) -> float:
    step, vals = _phonon_grid(f)
    return float(np.trapezoid(vals, dx=step))


def sideband(
    f: Spectrum,
    params: HuangRhysParams,
    half_range: float = DEFAULT_HALF_RANGE_EV,
) -> Spectrum:
    """Multi-phonon sideband on a symmetric detuning grid (eV relative to the ZPL).

    ``f`` must have unit area. Each phonon order is normalised before the
    Poisson weights are applied, so the returned spectrum integrates to
    ``exp(-S) * sum_{i=1..n_max} S**i / i!`` with ``S`` the effective factor.
    """
    area = _unit_area(f)
    if abs(area - 1.0) > 1e-6:
        raise ValueError(f"one-phonon function must have unit area, got {area:.9g}")
    band = one_phonon_band(f, params.temperature)
    s_eff = params.huang_rhys * band.integral()
    unit = band.normalized()
    step = unit.step
    n_half = int(round(half_range / step))
    order_half = (len(unit) - 1) // 2
    if order_half * params.n_max > n_half:
        raise ValueError(
            f"detuning range {half_range} eV is too narrow for {params.n_max} phonon orders"
        )
    total = np.zeros(2 * n_half + 1)
    term = unit
    log_weight = -s_eff
    for i in range(1, params.n_max + 1):
        if i > 1:
            term = self_convolve(term, unit).normalized()
        log_weight += math.log(s_eff) - math.log(i)
        h = (len(term) - 1) // 2
        total[n_half - h : n_half + h + 1] += math.exp(log_weight) * term.values
    return Spectrum.on_grid(-n_half * step, step, total)


def truncated_poisson_mass(s: float, n_max: int) -> float:
    return math.exp(-s) * sum(s**i / math.factorial(i) for i in range(1, n_max + 1))


def lorentzian(energy, center: float, fwhm: float):
    g = 0.5 * fwhm
    return g / math.pi / ((np.asarray(energy) - center) ** 2 + g * g)


def add_zpl(spec: Spectrum, zpl: ZplParams) -> Spectrum:
    """Add a Lorentzian zero-phonon line of integrated weight ``zpl.weight``.

    The peak is renormalised on the grid so the added area is exact even
    though the Lorentzian tails are cut at the grid edges.
    """
    if not spec.covers(zpl.center):
        raise ValueError(f"ZPL centre {zpl.center} eV lies outside the spectrum grid")
    if zpl.weight == 0:
        return spec
    peak = lorentzian(spec.energy, zpl.center, zpl.fwhm)
    peak *= zpl.weight / np.trapezoid(peak, dx=spec.step)
    return Spectrum(spec.energy, spec.values + peak)


def absorption_spectrum(
    f: Spectrum,
    params: HuangRhysParams,
    *,
    zpl_energy: float = ZPL_EV,
    zpl_fwhm: float | None = None,
    half_range: float = DEFAULT_HALF_RANGE_EV,
) -> Spectrum:
    """Sideband on the absolute photon-energy axis, optionally with its ZPL.

    The ZPL weight is ``exp(-S_T)``, the zero-phonon Poisson term.
    """
    spec = sideband(f, params, half_range=half_range).shifted(zpl_energy)
    if zpl_fwhm is not None:
        weight = math.exp(-effective_huang_rhys(f, params))
        spec = add_zpl(spec, ZplParams(center=zpl_energy, fwhm=zpl_fwhm, weight=weight))
    return spec


def cross_section_ratio(absorption: Spectrum, photoionization: Spectrum, energy: float) -> float:
    """Photoionization over absorption cross section at ``energy`` (eV)."""
    for name, s in (("absorption", absorption), ("photoionization", photoionization)):
        if not s.covers(energy):
            raise ValueError(f"{energy} eV is outside the {name} spectrum")
    a = absorption.at(energy)
    if a <= 0:
        raise ValueError(f"absorption cross section vanishes at {energy} eV")
    return photoionization.at(energy) / a


def synthetic_one_phonon(step: float = DEFAULT_STEP_EV, cutoff: float = 0.170) -> Spectrum:
    """Unit-area stand-in for the NV one-phonon spectral density.

    A broad acoustic band near 40 meV plus a quasi-local mode near 70 meV,
    with an omega**2 onset and a hard cutoff at the diamond phonon maximum.
    """
    k = int(round(cutoff / step))
    w = step * np.arange(k + 1)
    onset = w**2 / (w**2 + 0.010**2)
    shape = 0.45 * np.exp(-0.5 * ((w - 0.040) / 0.014) ** 2) + 0.55 * np.exp(
        -0.5 * ((w - 0.070) / 0.009) ** 2
    )
    vals = onset * shape
    vals[-1] = 0.0
    return Spectrum(w, vals).normalized()


def load_spectrum(path, step: float | None = None) -> Spectrum:
    """Read an ``energy_ev,value`` CSV and resample it onto a uniform grid.

    ``step`` defaults to the smallest spacing found in the file.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"spectrum file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"energy_ev", "value"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header 'energy_ev,value'")
        rows = [(float(r["energy_ev"]), float(r["value"])) for r in reader]
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two samples")
    e, v = map(np.asarray, zip(*rows))
    if np.any(np.diff(e) <= 0):
        raise ValueError(f"{path}: energies must be strictly increasing")
    if step is None:
        step = float(np.min(np.diff(e)))
    n = int(math.floor((e[-1] - e[0]) / step + 1e-9))
    grid = e[0] + step * np.arange(n + 1)
    return Spectrum(grid, np.clip(np.interp(grid, e, v), 0.0, None))


def write_spectrum(path, spec: Spectrum, metadata: dict | None = None) -> None:
    """Write ``energy_ev,value`` rows plus an optional JSON sidecar."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["energy_ev", "value"])
        for e, v in zip(spec.energy, spec.values):
            w.writerow([f"{e:.6f}", f"{v:.10e}"])
    if metadata is not None:
        meta = dict(metadata)
        meta.setdefault("grid_step_ev", spec.step)
        path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class RatioReport:
    green: float
    zpl: float
    scale: float


def ratios_from_datasets(
    f: Spectrum,
    photoionization: Spectrum,
    absorption_reference: Spectrum | None = None,
    *,
    huang_rhys: float = 3.49,
    temperature: float = 300.0,
    n_max: int = 8,
    zpl_energy: float = ZPL_EV,
    zpl_fwhm: float = thz_to_ev(1.0),
    green_energy: float = GREEN_EV,
) -> RatioReport:
    """Cross-section ratios at the green line and at the ZPL from measured data.

    When a 0 K absorption reference is supplied, the computed sideband is put
    in the reference's units by matching areas over the shared energy range,
    so the photoionization data and the model share units.
    """
    scale = 1.0
    if absorption_reference is not None:
        cold = absorption_spectrum(f, HuangRhysParams(huang_rhys, 0.0, n_max), zpl_energy=zpl_energy)
        lo = max(cold.energy[0], absorption_reference.energy[0])
        hi = min(cold.energy[-1], absorption_reference.energy[-1])
        if hi <= lo:
            raise ValueError("absorption reference does not overlap the computed sideband")
        grid = np.linspace(lo, hi, 2001)
        model_area = np.trapezoid(np.interp(grid, cold.energy, cold.values), grid)
        ref_area = np.trapezoid(np.interp(grid, absorption_reference.energy, absorption_reference.values), grid)
        if model_area <= 0:
            raise ValueError("computed sideband vanishes over the reference range")
        scale = float(ref_area / model_area)
    params = HuangRhysParams(huang_rhys, temperature, n_max)
    warm = absorption_spectrum(f, params, zpl_energy=zpl_energy).scaled(scale)
    warm_zpl = absorption_spectrum(f, params, zpl_energy=zpl_energy, zpl_fwhm=zpl_fwhm).scaled(scale)
    return RatioReport(
        green=cross_section_ratio(warm, photoionization, green_energy),
        zpl=cross_section_ratio(warm_zpl, photoionization, zpl_energy),
        scale=scale,
    )
