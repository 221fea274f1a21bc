"""Six-level rate equations for the NV centre and their matrix-exponential solution.

Level ordering used throughout::

    0  3A2 ms=0      (ground triplet)
    1  3A2 ms=+-1
    2  3E  ms=0      (excited triplet)
    3  3E  ms=+-1
    4  1E            (lower singlet, the shelving state)
    5  2E + e        (NV0 with an electron in the conduction band; absorbing)

Rates are in MHz and times in microseconds, so ``rate * time`` is dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

N_LEVELS = 6
GROUND_MS0, GROUND_MS1, EXCITED_MS0, EXCITED_MS1, SINGLET, IONIZED = range(N_LEVELS)

LEVEL_LABELS = (
    "3A2 ms=0",
    "3A2 ms=+-1",
    "3E ms=0",
    "3E ms=+-1",
    "1E",
    "2E+e",
)

_POP_TOL = 1e-10


def _check_rate(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and non-negative, got {value!r}")
    return value


@dataclass(frozen=True)
class NvRates:
    """Intrinsic decay rates of the NV centre (MHz)."""

    radiative: float = 65.3
    upper_isc_0: float = 6.7
    upper_isc_pm: float = 53.0
    lower_isc_0: float = 2.38
    lower_isc_pm: float = 0.35

    def __post_init__(self):
        for name in ("radiative", "upper_isc_0", "upper_isc_pm", "lower_isc_0", "lower_isc_pm"):
            _check_rate(name, getattr(self, name))


@dataclass(frozen=True)
class PulseSegment:
    """One constant-illumination interval.

    ``excitation`` drives the triplet transition, ``ionization`` empties the
    singlet, and ``sigma`` scales the excitation rate into a direct
    excited-triplet ionization channel.
    """

    excitation: float = 0.0
    ionization: float = 0.0
    sigma: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        for name in ("excitation", "ionization", "sigma", "duration"):
            _check_rate(name, getattr(self, name))


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple[PulseSegment, ...]

    def __init__(self, segments: Iterable[PulseSegment]):
        segments = tuple(segments)
        if not segments:
            raise ValueError("a pulse sequence needs at least one segment")
        object.__setattr__(self, "segments", segments)

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.segments)


def population(p: Sequence[float]) -> np.ndarray:
    """Validate and return a population vector as a float array."""
    p = np.asarray(p, dtype=float)
    if p.shape != (N_LEVELS,):
        raise ValueError(f"population vector must have {N_LEVELS} entries, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("population vector contains non-finite entries")
    if np.any(p < -_POP_TOL) or np.any(p > 1 + _POP_TOL):
        raise ValueError("population entries must lie in [0, 1]")
    if abs(p.sum() - 1.0) > _POP_TOL:
        raise ValueError(f"population must sum to 1, got {p.sum():.15g}")
    return p


def initial_state(spin: str = "0", mixing: float = 0.0) -> np.ndarray:
    """Ground-state initialisation for ``spin`` in {"0", "pm"}.

    ``mixing`` moves that fraction of the population into the other spin
    projection; the default of 0 is a perfect initialisation. A microwave pi
    pulse is modelled as the relabelling "0" -> "pm".
    """
    if not 0.0 <= mixing <= 1.0:
        raise ValueError("mixing must lie in [0, 1]")
    p = np.zeros(N_LEVELS)
    if spin == "0":
        p[GROUND_MS0], p[GROUND_MS1] = 1.0 - mixing, mixing
    elif spin in ("pm", "+-1", "1"):
        p[GROUND_MS1], p[GROUND_MS0] = 1.0 - mixing, mixing
    else:
        raise ValueError(f"unknown spin label {spin!r}")
    return p


def build_generator(rates: NvRates, seg: PulseSegment) -> np.ndarray:
    """Return the 6x6 rate matrix ``M`` with ``dP/dt = M @ P``.

    Column ``j`` holds the outflow of level ``j``; every column sums to zero
    and the ionized column is empty.
    """
    R = rates.radiative
    U0, Upm = rates.upper_isc_0, rates.upper_isc_pm
    L0, Lpm = rates.lower_isc_0, rates.lower_isc_pm
    X, I, s = seg.excitation, seg.ionization, seg.sigma
    sX = s * X
    return np.array(
        [
            [-X, 0.0, R, 0.0, L0, 0.0],
            [0.0, -X, 0.0, R, Lpm, 0.0],
            [X, 0.0, -(R + U0 + sX), 0.0, 0.0, 0.0],
            [0.0, X, 0.0, -(R + Upm + sX), 0.0, 0.0],
            [0.0, 0.0, U0, Upm, -(L0 + Lpm + I), 0.0],
            [0.0, 0.0, sX, sX, I, 0.0],
        ]
    )


def _validated(p0) -> np.ndarray:
    p0 = np.asarray(p0, dtype=float)
    if p0.ndim == 1:
        return population(p0)
    if p0.ndim != 2 or p0.shape[0] != N_LEVELS:
        raise ValueError(f"expected a ({N_LEVELS},) or ({N_LEVELS}, k) population array, got {p0.shape}")
    for col in p0.T:
        population(col)
    return p0


def _check_time(t) -> float:
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"evolution time must be finite and non-negative, got {t!r}")
    return t


def evolve(g: np.ndarray, p0, t: float) -> np.ndarray:
    """Propagate ``p0`` for a time ``t`` under the constant generator ``g``.

    ``p0`` may also be a (6, k) array of column vectors, propagated together.
    """
    t = _check_time(t)
    p0 = _validated(p0)
    if t == 0.0:
        return p0.copy()
    return expm(g * t) @ p0


def run_sequence(rates: NvRates, seq: PulseSequence, p0) -> np.ndarray:
    """Apply every segment of ``seq`` in order, first segment first."""
    p = _validated(p0)
    for seg in seq:
        if seg.duration > 0.0:
            p = expm(build_generator(rates, seg) * seg.duration) @ p
    return p


def ionized_probabilities(rates: NvRates, seq: PulseSequence, mixing: float = 0.0) -> tuple[float, float]:
    """Final ionized population for the ms=0 and ms=+-1 initialisations."""
    p0 = np.column_stack([initial_state("0", mixing), initial_state("pm", mixing)])
    p = run_sequence(rates, seq, p0)
    return float(p[IONIZED, 0]), float(p[IONIZED, 1])


def contrast(rates: NvRates, seq: PulseSequence, mixing: float = 0.0) -> float:
    """Spin contrast: ionized population from ms=+-1 minus that from ms=0."""
    p_0, p_pm = ionized_probabilities(rates, seq, mixing)
    return p_pm - p_0
