"""Surface-electrode electrostatics and effective-mass conduction-band levels.

Energies are in eV and lengths in nm. Level shifts are reported as the upward
displacement of a level on the usual band diagram, so a positive electrode
potential shifts the NV levels up by ``e * V_NV`` and the conduction-band
minimum up by the binding energy of its lowest confined envelope state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy import constants
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

# hbar^2 / (2 m_e) in eV nm^2
HBAR2_2ME = constants.hbar**2 / (2 * constants.m_e) / constants.e * 1e18


class EigensolverError(RuntimeError):
    pass


class GridTooCoarseError(ValueError):
    pass


@dataclass(frozen=True)
class ElectrodeConfig:
    """Disc electrode of ``electrode_radius`` held at ``applied_potential``.

    ``insulator_thickness`` lifts the disc above the diamond surface, which
    lowers the potential that reaches the surface.
    """

    applied_potential: float = 0.0
    electrode_radius: float = 100.0
    nv_depth: float = 10.0
    dielectric_constant: float = 5.7
    insulator_thickness: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.applied_potential):
            raise ValueError("applied potential must be finite")
        if not self.electrode_radius > 0:
            raise ValueError("electrode radius must be positive")
        if not self.nv_depth > 0:
            raise ValueError("NV depth must be positive")
        if not self.dielectric_constant > 1:
            raise ValueError("dielectric constant must exceed 1")
        if not self.insulator_thickness >= 0:
            raise ValueError("insulator thickness must be non-negative")

    @property
    def band_screening(self) -> float:
        """Fraction of the local potential felt by the band-averaged electron."""
        return 2.0 / (1.0 + self.dielectric_constant)

    def with_potential(self, v: float) -> "ElectrodeConfig":
        return replace(self, applied_potential=v)


@dataclass(frozen=True)
class EffectiveMass:
    """Conduction-band valley masses in units of the free-electron mass.

    The longitudinal axis is taken along the surface normal.
    """

    longitudinal: float = 1.56
    transverse: float = 0.28

    def __post_init__(self):
        if not (self.longitudinal > 0 and self.transverse > 0):
            raise ValueError("effective masses must be positive")


@dataclass(frozen=True)
class CylinderGrid:
    """Finite-difference grid on 0 <= rho <= radial_extent, 0 <= z <= axial_extent.

    The wavefunction vanishes on z = 0, z = axial_extent and rho = radial_extent.
    """

    radial_extent: float = 300.0
    axial_extent: float = 120.0
    n_radial: int = 120
    n_axial: int = 480

    def __post_init__(self):
        if self.radial_extent <= 0 or self.axial_extent <= 0:
            raise ValueError("grid extents must be positive")
        if self.n_radial < 3 or self.n_axial < 3:
            raise ValueError("grid needs at least 3 points per direction")

    @property
    def h_rho(self) -> float:
        return self.radial_extent / (self.n_radial + 0.5)

    @property
    def h_z(self) -> float:
        return self.axial_extent / (self.n_axial + 1)

    @property
    def rho(self) -> np.ndarray:
        # cell centres; the axis sits half a cell below the first node
        return (np.arange(self.n_radial) + 0.5) * self.h_rho

    @property
    def z(self) -> np.ndarray:
        return np.arange(1, self.n_axial + 1) * self.h_z

    def refined(self, factor: int = 2) -> "CylinderGrid":
        return replace(
            self,
            n_radial=int(round((self.n_radial + 0.5) * factor - 0.5)),
            n_axial=(self.n_axial + 1) * factor - 1,
        )


@dataclass(frozen=True, eq=False)
class EnvelopeSolution:
    energies: np.ndarray
    states: np.ndarray = field(repr=False)
    grid: CylinderGrid
    residuals: np.ndarray

    @property
    def ground(self) -> float:
        return float(self.energies[0])


def disc_potential(applied: float, radius: float, rho, z):
    """Potential of a conducting disc at ``applied`` volts, centred at the origin.

    Closed form of the charged-disc problem; equal to ``applied`` on the disc
    and zero at infinity.
    """
    rho = np.abs(np.asarray(rho, dtype=float))
    z = np.abs(np.asarray(z, dtype=float))
    d1 = np.sqrt((rho - radius) ** 2 + z**2)
    d2 = np.sqrt((rho + radius) ** 2 + z**2)
    arg = np.clip(2.0 * radius / (d1 + d2), 0.0, 1.0)
    out = (2.0 * applied / math.pi) * np.arcsin(arg)
    return float(out) if out.ndim == 0 else out


def potential_at(config: ElectrodeConfig, r, z):
    """Electrostatic potential (V) at radial distance ``r`` and depth ``z`` (nm)."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("depth must be non-negative (inside the diamond)")
    return disc_potential(
        config.applied_potential, config.electrode_radius, r, z + config.insulator_thickness
    )


def nv_level_shift(config: ElectrodeConfig) -> float:
    """Rigid NV level shift (eV): the local potential energy at the defect."""
    return float(potential_at(config, 0.0, config.nv_depth))


def _radial_operator(grid: CylinderGrid) -> sp.csr_matrix:
    """Symmetrised -(1/rho) d/drho (rho d/drho) for the m = 0 sector."""
    h = grid.h_rho
    n = grid.n_radial
    rho = grid.rho
    faces = np.arange(n + 1) * h  # face i sits between node i-1 and node i
    outer = faces[1:]
    inner = faces[:-1]
    diag = (outer + inner) / (rho * h * h)
    # D A D^-1 with D = sqrt(rho) makes the operator symmetric
    off = -outer[:-1] / (np.sqrt(rho[:-1] * rho[1:]) * h * h)
    return sp.diags([off, diag, off], [-1, 0, 1], format="csr")


def _axial_operator(grid: CylinderGrid) -> sp.csr_matrix:
    h = grid.h_z
    n = grid.n_axial
    return sp.diags(
        [-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr"
    ) / (h * h)


def hamiltonian(grid: CylinderGrid, mass: EffectiveMass, potential_energy: np.ndarray) -> sp.csr_matrix:
    """Sparse symmetric envelope Hamiltonian (eV) on ``grid``.

    ``potential_energy`` has shape (n_radial, n_axial); unknowns are ordered
    with z fastest.
    """
    t_rho = HBAR2_2ME / mass.transverse * _radial_operator(grid)
    t_z = HBAR2_2ME / mass.longitudinal * _axial_operator(grid)
    eye_r = sp.identity(grid.n_radial, format="csr")
    eye_z = sp.identity(grid.n_axial, format="csr")
    h = sp.kron(t_rho, eye_z) + sp.kron(eye_r, t_z)
    return (h + sp.diags(np.asarray(potential_energy).ravel())).tocsr()


def solve_envelope(
    potential_energy: Callable[[np.ndarray, np.ndarray], np.ndarray],
    mass: EffectiveMass,
    grid: CylinderGrid,
    k: int = 1,
    min_points: float = 3.0,
) -> EnvelopeSolution:
    """Lowest ``k`` m=0 envelope eigenstates for an electron potential energy (eV).

    Raises GridTooCoarseError when the ground state's rms extent along either
    axis spans fewer than ``min_points`` grid spacings.
    """
    rr, zz = np.meshgrid(grid.rho, grid.z, indexing="ij")
    u = np.asarray(potential_energy(rr, zz), dtype=float)
    h = hamiltonian(grid, mass, u)
    # H - min(U) is positive definite, so min(U) is a safe shift just below the spectrum
    sigma = float(u.min())
    try:
        vals, vecs = eigsh(h, k=k, sigma=sigma, which="LM", tol=0.0)
    except ArpackNoConvergence as exc:
        raise EigensolverError(f"envelope eigensolve did not converge: {exc}") from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    vecs /= np.linalg.norm(vecs, axis=0)
    residuals = np.linalg.norm(h @ vecs - vecs * vals, axis=0)

    # vecs are sqrt(rho)-weighted, so |vec|^2 is the probability per cell
    prob = (vecs[:, 0] ** 2).reshape(grid.n_radial, grid.n_axial)
    spread_z = math.sqrt(max(np.sum(prob * zz**2) - np.sum(prob * zz) ** 2, 0.0))
    spread_r = math.sqrt(np.sum(prob * rr**2))
    if spread_z < min_points * grid.h_z or spread_r < min_points * grid.h_rho:
        raise GridTooCoarseError(
            f"ground state extent (rho {spread_r:.3g} nm, z {spread_z:.3g} nm) is resolved by fewer "
            f"than {min_points} points (h_rho={grid.h_rho:.3g} nm, h_z={grid.h_z:.3g} nm)"
        )
    return EnvelopeSolution(energies=vals, states=vecs, grid=grid, residuals=residuals)


def envelope_eigenstates(
    config: ElectrodeConfig,
    mass: EffectiveMass = EffectiveMass(),
    grid: CylinderGrid = CylinderGrid(),
    k: int = 1,
) -> EnvelopeSolution:
    """Conduction-band envelope levels (eV, relative to the Bloch energy) under the electrode."""
    s = config.band_screening

    def energy(rho, z):
        return -s * potential_at(config, rho, z)

    return solve_envelope(energy, mass, grid, k=k)


@dataclass(frozen=True)
class GapShiftRow:
    potential_v: float
    nv_shift_ev: float
    cbm_shift_ev: float
    gap_shift_ev: float


def gap_shift(
    config: ElectrodeConfig,
    potentials: Sequence[float],
    mass: EffectiveMass = EffectiveMass(),
    grid: CylinderGrid = CylinderGrid(),
) -> list[GapShiftRow]:
    """Change of the NV-to-CBM gap across a sweep of electrode potentials.

    Positive potentials confine conduction electrons under the electrode and
    the CBM shift is the confined ground level's binding relative to the
    flat-band level on the same grid. For negative potentials the band is not
    confined and only the NV levels move.
    """
    potentials = [float(v) for v in potentials]
    if 0.0 not in potentials:
        raise ValueError("the potential sweep must include 0 V")
    flat = None
    rows = []
    for v in potentials:
        cfg = config.with_potential(v)
        nv = nv_level_shift(cfg)
        if v > 0:
            if flat is None:
                flat = envelope_eigenstates(cfg.with_potential(0.0), mass, grid).ground
            cbm = flat - envelope_eigenstates(cfg, mass, grid).ground
        else:
            cbm = 0.0
        rows.append(GapShiftRow(v, nv, cbm, cbm - nv))
    return rows
