"""Figure rendering for the CLI reports. Every function writes one file and returns its path."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "savefig.dpi": 150,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_sidebands(spectra: dict, path, zpl_spectrum=None):
    """``spectra`` maps a legend label to a Spectrum on the photon-energy axis."""
    with plt.rc_context(_RC):
        ncols = 2 if zpl_spectrum is not None else 1
        fig, axes = plt.subplots(1, ncols, figsize=(4.5 * ncols, 3.4), squeeze=False)
        ax = axes[0, 0]
        for label, spec in spectra.items():
            ax.plot(spec.energy, spec.values, label=label)
        ax.set_xlabel("photon energy (eV)")
        ax.set_ylabel("absorption (arb. units / eV)")
        ax.set_xlim(1.8, 3.2)
        ax.legend(frameon=False)
        if zpl_spectrum is not None:
            ax = axes[0, 1]
            ax.plot(zpl_spectrum.energy, zpl_spectrum.values, color="C1")
            ax.set_yscale("log")
            ax.set_ylim(1e-3, None)
            ax.set_xlim(1.8, 3.2)
            ax.set_xlabel("photon energy (eV)")
            ax.set_title("with ZPL", fontsize=9)
        return _save(fig, path)


def plot_contrast_curves(curves: dict, path):
    """``curves`` maps an x-axis label to (x values, contrast values)."""
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, len(curves), figsize=(4.2 * len(curves), 3.2), squeeze=False)
        for ax, (label, (x, c)) in zip(axes[0], curves.items()):
            ax.plot(x, [100 * v for v in c], "o-", ms=3)
            ax.set_xlabel(label)
            ax.set_ylabel("spin contrast (%)")
        return _save(fig, path)


def plot_sigma_sweep(sweeps: dict, path):
    """``sweeps`` maps a run count to (sigma values, contrast values)."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.2))
        for runs, (s, c) in sorted(sweeps.items()):
            ax.plot(s, [100 * v for v in c], "o-", ms=3, label=f"{runs} run{'s' if runs > 1 else ''}")
        ax.set_xlabel(r"$\sigma$ (ionization / absorption)")
        ax.set_ylabel("spin contrast (%)")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_gap_shift(rows, path):
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 2, figsize=(8.4, 3.2))
        pos = [r for r in rows if r.potential_v >= 0]
        neg = [r for r in rows if r.potential_v <= 0]
        for ax, part, title in ((axes[0], pos, "positive"), (axes[1], neg, "negative")):
            v = [r.potential_v for r in part]
            ax.plot(v, [r.nv_shift_ev for r in part], color="C1", label="NV levels")
            ax.plot(v, [r.cbm_shift_ev for r in part], color="C0", label="CBM")
            ax.set_xlabel("electrode potential (V)")
            ax.set_ylabel("level shift (eV)")
            ax.set_title(f"{title} potential", fontsize=9)
            ax.legend(frameon=False)
        return _save(fig, path)
