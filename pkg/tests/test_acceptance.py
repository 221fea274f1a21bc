"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed as the "acceptance criteria" section of the pytest
summary. Thresholds are the agreed tolerances; none is relaxed here.
"""

import csv
import math
import time

import numpy as np
import pytest
from scipy.special import jn_zeros

from nvscc.cli import main
from nvscc.electrode import (
    HBAR2_2ME,
    CylinderGrid,
    EffectiveMass,
    ElectrodeConfig,
    gap_shift,
    solve_envelope,
)
from nvscc.protocol import (
    build_protocol,
    electrode_scc,
    jaskula,
    optimize_contrast,
    optimize_runs,
    protocol_contrast,
    sensitivity_improvement,
)
from nvscc.rate_model import NvRates, PulseSegment, build_generator, evolve
from nvscc.sideband import (
    HuangRhysParams,
    effective_huang_rhys,
    one_phonon_band,
    sideband,
    synthetic_one_phonon,
    truncated_poisson_mass,
)

from oracles import rk4

RATES = NvRates(radiative=65.3, upper_isc_0=6.7, upper_isc_pm=53.0, lower_isc_0=2.38, lower_isc_pm=0.35)
KB = 8.617333262e-5


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def runs_chain():
    return optimize_runs(0.26, 4, RATES, seed=0)


@pytest.fixture(scope="module")
def reproduce_all(tmp_path_factory):
    out = tmp_path_factory.mktemp("reproduce_all")
    t0 = time.perf_counter()
    code = main(["reproduce-all", "--out", str(out)])
    return {"code": code, "seconds": time.perf_counter() - t0, "out": out,
            "summary": read_csv(out / "summary.csv")}


def test_criterion_1_single_run_optimum(acceptance):
    t0 = time.perf_counter()
    res = optimize_contrast(electrode_scc(sigma_pump=0.26), RATES, seed=0)
    seconds = time.perf_counter() - t0
    reeval = protocol_contrast(electrode_scc(sigma_pump=0.26), res.best_params, RATES)
    ok = abs(res.best_contrast - 0.33) <= 0.03 and seconds < 120 and abs(reeval - res.best_contrast) <= 1e-9
    acceptance("1 single-run electrode SCC = 0.33 +/- 0.03, < 2 min", ok,
               f"contrast={res.best_contrast:.4f} in {seconds:.1f} s")
    assert ok


def test_criterion_2a_three_run_optimum(acceptance, runs_chain):
    c3 = runs_chain[2].best_contrast
    ok = abs(c3 - 0.42) <= 0.03
    acceptance("2a three-run optimum = 0.42 +/- 0.03", ok, f"contrast={c3:.4f}")
    assert ok


def test_criterion_2b_four_run_gain(acceptance, runs_chain):
    c3, c4 = runs_chain[2].best_contrast, runs_chain[3].best_contrast
    ok = c4 - c3 < 0.01
    acceptance("2b four-run gain over three-run < 0.01", ok,
               f"C3={c3:.4f} C4={c4:.4f} gain={c4 - c3:.4f}")
    assert ok


def test_criterion_3_jaskula(acceptance):
    spec = jaskula(sigma_pump=0.16, sigma_ion=0.1)
    res = optimize_contrast(spec, RATES, seed=0)
    no_ionization = all(seg.ionization == 0.0 for seg in build_protocol(spec, res.best_params))
    ok = abs(res.best_contrast - 0.37) <= 0.03 and no_ionization
    acceptance("3 Jaskula variant = 0.37 +/- 0.03 (I=0)", ok, f"contrast={res.best_contrast:.4f}")
    assert ok


def test_criterion_4_sigma_sweep(acceptance, reproduce_all):
    out = reproduce_all["out"]
    curves = {}
    for runs in (1, 3):
        rows = read_csv(out / f"sigma_sweep_runs{runs}.csv")
        curves[runs] = ([float(r["param_value"]) for r in rows], [float(r["contrast"]) for r in rows])
    s1, c1 = curves[1]
    s3, c3 = curves[3]
    end1, end3 = c1[s1.index(0.0)], c3[s3.index(0.0)]
    rise = max(b - a for c in (c1, c3) for a, b in zip(c, c[1:]))
    ok = abs(end1 - 0.58) <= 0.03 and abs(end3 - 0.61) <= 0.03 and rise <= 1e-3
    acceptance("4 sigma=0 endpoints 0.58 / 0.61 +/- 0.03, non-increasing", ok,
               f"1-run={end1:.4f} 3-run={end3:.4f} max rise={max(rise, 0.0):.2e}")
    assert ok


def test_criterion_5_sensitivity(acceptance):
    a = sensitivity_improvement(0.25, 0.61)
    b = sensitivity_improvement(0.25, 0.42)
    # the quoted figures carry two decimals; compare at that precision
    ok = abs(round(a, 2) - 2.36) <= 1e-9 and abs(round(b, 2) - 1.62) <= 1e-9
    acceptance("5 sensitivity rule gives 2.36 and 1.62", ok, f"{a:.6f} -> {round(a, 2)}, {b:.6f} -> {round(b, 2)}")
    assert ok


def test_criterion_6_rate_engine_oracle(acceptance):
    rng = np.random.default_rng(2024)
    n, steps = 100, 10_000  # dt = 1e-4 x duration
    Ms, ps, ts, col = [], [], [], 0.0
    for _ in range(n):
        rates = NvRates(*rng.uniform(0, 80, 5))
        seg = PulseSegment(rng.uniform(0, 200), rng.uniform(0, 500), rng.uniform(0, 1), 1.0)
        M = build_generator(rates, seg)
        col = max(col, float(np.max(np.abs(M.sum(axis=0)))))
        Ms.append(M)
        ps.append(rng.dirichlet(np.ones(6)))
        ts.append(rng.uniform(0.005, 0.2))
    Ms, ps, ts = np.array(Ms), np.array(ps), np.array(ts)
    exact = np.array([evolve(M, p, t) for M, p, t in zip(Ms, ps, ts)])
    ref = rk4(Ms * ts[:, None, None], ps, 1.0, steps)
    err = float(np.max(np.abs(exact - ref)))
    drift = float(np.max(np.abs(exact.sum(axis=1) - 1.0)))
    ok = err <= 1e-8 and drift <= 1e-10 and col <= 1e-12
    acceptance("6 expm vs RK4 on 100 instances", ok,
               f"max err={err:.1e}, population drift={drift:.1e}, column sum={col:.1e}")
    assert ok


def test_criterion_7_sideband(acceptance):
    f = synthetic_one_phonon()
    T = 300.0
    band = one_phonon_band(f, T)
    k = (len(band) - 1) // 2
    pos, neg, w = band.values[k + 1:], band.values[:k][::-1], band.energy[k + 1:]
    m = pos > 0
    balance = float(np.max(np.abs(neg[m] / (np.exp(-w[m] / (KB * T)) * pos[m]) - 1.0)))
    cold = HuangRhysParams(3.49, 0.0, 8)
    mass = sideband(f, cold).integral()
    poisson = math.exp(-3.49) * sum(3.49**i / math.factorial(i) for i in range(1, 9))
    v0 = sideband(f, cold).variance()
    v300 = sideband(f, HuangRhysParams(3.49, T, 8)).variance()
    ok = balance <= 1e-9 and abs(mass - poisson) <= 1e-6 and v300 > v0
    assert truncated_poisson_mass(effective_huang_rhys(f, cold), 8) == pytest.approx(poisson, rel=1e-12)
    acceptance("7 detailed balance, Poisson mass, thermal broadening", ok,
               f"balance err={balance:.1e}, mass err={abs(mass - poisson):.1e}, var 300K/0K={v300 / v0:.3f}")
    assert ok


def test_criterion_7_dataset_ratios(acceptance, reproduce_all):
    rows = {r["claim"]: r for r in reproduce_all["summary"]}
    keys = ("sigma_ratio_2.3eV", "sigma_ratio_zpl_1.945eV")
    if not all(k in rows for k in keys):
        acceptance("7 (data) cross-section ratios 0.26 / 0.1 +/- 15%", None,
                   "not applicable: external cross-section datasets not supplied")
        pytest.skip("external cross-section datasets not supplied")
    ok = all(rows[k]["pass"] == "true" for k in keys)
    acceptance("7 (data) cross-section ratios 0.26 / 0.1 +/- 15%", ok,
               ", ".join(f"{k}={float(rows[k]['computed_value']):.4f}" for k in keys))
    assert ok


def test_criterion_8_electrode(acceptance):
    iso = EffectiveMass(1.0, 1.0)
    box = CylinderGrid(radial_extent=20.0, axial_extent=20.0, n_radial=120, n_axial=240)
    e_box = solve_envelope(lambda r, z: np.zeros_like(r), iso, box).ground
    exact_box = HBAR2_2ME * (jn_zeros(0, 1)[0] ** 2 + math.pi**2) / 20.0**2
    box_err = abs(e_box / exact_box - 1)

    hw = 2 * HBAR2_2ME / 5.0**2
    osc_grid = CylinderGrid(radial_extent=30.0, axial_extent=60.0, n_radial=120, n_axial=239)
    sol = solve_envelope(lambda r, z: 0.5 * hw * (r**2 + (z - 30.0) ** 2) / 25.0, iso, osc_grid, k=2)
    osc_err = abs((sol.energies[1] - sol.energies[0]) / hw - 1)

    potentials = [-1.0, -0.5, 0.0, 0.5, 1.0]
    rows = {r.potential_v: r for r in gap_shift(ElectrodeConfig(), potentials)}
    odd = all(rows[-v].nv_shift_ev == -rows[v].nv_shift_ev for v in (0.5, 1.0))
    neg_zero = all(rows[v].cbm_shift_ev == 0.0 for v in (-1.0, -0.5))
    ordered = all(rows[v].nv_shift_ev > rows[v].cbm_shift_ev for v in (0.5, 1.0))
    ok = box_err <= 1e-3 and osc_err <= 1e-3 and odd and neg_zero and ordered
    acceptance("8 box / oscillator oracles to 0.1%, gap-shift contract", ok,
               f"box err={box_err:.1e}, oscillator err={osc_err:.1e}, odd={odd}, "
               f"negative CBM zero={neg_zero}, NV above CBM={ordered}")
    assert ok


def test_criterion_9a_reproduce_all_runtime(acceptance, reproduce_all):
    minutes = reproduce_all["seconds"] / 60
    ok = minutes < 15
    acceptance("9a reproduce-all under 15 minutes", ok, f"{minutes:.1f} min")
    assert ok


def test_criterion_9b_reproduce_all_claims(acceptance, reproduce_all):
    failed = [r["claim"] for r in reproduce_all["summary"] if r["pass"] != "true"]
    ok = reproduce_all["code"] == 0 and not failed
    acceptance("9b reproduce-all exits 0 with every claim passing", ok,
               f"exit={reproduce_all['code']}, {len(reproduce_all['summary'])} claims, failed={failed or 'none'}")
    assert ok
