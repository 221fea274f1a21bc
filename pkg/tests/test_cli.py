import csv
import re

import numpy as np
import pytest

from nvscc.cli import main
from nvscc.config import ConfigError, load_config
from nvscc.sideband import HuangRhysParams, load_spectrum, one_phonon_band, synthetic_one_phonon


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_sideband_default_outputs(tmp_path, capsys):
    assert main(["sideband", "--out", str(tmp_path)]) == 0
    for name in ("sideband_0K.csv", "sideband_300K.csv", "sideband_zpl_300K.csv", "sideband.png",
                 "one_phonon_used.csv", "sideband_300K.meta.json"):
        assert (tmp_path / name).is_file(), name
    cold = load_spectrum(tmp_path / "sideband_0K.csv")
    hot = load_spectrum(tmp_path / "sideband_300K.csv")
    assert hot.variance() > cold.variance()
    assert "mass=" in capsys.readouterr().out


def test_sideband_zero_temperature_is_byte_stable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sideband", "--temperature", "0", "--out", str(a)]) == 0
    assert main(["sideband", "--temperature", "0", "--out", str(b)]) == 0
    for name in ("sideband_0K.csv", "sideband_zpl_0K.csv", "sideband_0K.meta.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_sideband_single_order_is_one_phonon_band(tmp_path):
    assert main(["sideband", "--n-max", "1", "--out", str(tmp_path)]) == 0
    spec = load_spectrum(tmp_path / "sideband_300K.csv")
    band = one_phonon_band(synthetic_one_phonon(), 300.0).shifted(1.945).resample(spec.energy)
    mask = band.values > 1e-6 * band.values.max()
    ratio = spec.values[mask] / band.values[mask]
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-6)
    assert not np.any(spec.values[~mask] > 1e-6 * spec.values.max())


def test_sideband_missing_dataset(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["sideband", f"one_phonon={missing}", "--out", str(tmp_path)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_missing_data_dir(tmp_path, capsys):
    assert main(["sideband", "--data-dir", str(tmp_path / "none"), "--out", str(tmp_path)]) == 2
    assert "data directory" in capsys.readouterr().err


def test_data_dir_ratios(tmp_path, capsys):
    data = tmp_path / "data"
    data.mkdir()
    energy = np.arange(1.5, 3.0, 0.01)
    np.savetxt(data / "photoionization.csv", np.column_stack([energy, np.full_like(energy, 0.2)]),
               delimiter=",", header="energy_ev,value", comments="")
    out = tmp_path / "out"
    assert main(["sideband", "--data-dir", str(data), "--out", str(out)]) == 0
    rows = read_csv(out / "cross_section_ratios.csv")
    assert [float(r["energy_ev"]) for r in rows] == [2.3, 1.945]
    printed = capsys.readouterr().out
    assert re.search(r"sigma_green=[0-9.e+-]+", printed)
    assert re.search(r"sigma_zpl=[0-9.e+-]+", printed)


def test_bad_inputs_exit_2(tmp_path):
    assert main(["sideband", "nonsense_key=1", "--out", str(tmp_path)]) == 2
    assert main(["sideband", "n_max=two", "--out", str(tmp_path)]) == 2
    assert main(["sideband", "not-an-override", "--out", str(tmp_path)]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["contrast", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path)]) == 2
    assert main(["contrast", "x_max_mhz=-5", "--out", str(tmp_path)]) == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "reproduce-all" in capsys.readouterr().out


FAST_CURVES = ["x_values_mhz=10,100", "t_pump_values_us=0.05,0.5", "curve_starts=2"]


def test_contrast_prints_optimum(tmp_path, capsys):
    assert main(["contrast", "--out", str(tmp_path), *FAST_CURVES]) == 0
    m = re.search(r"^contrast=([0-9.]+)$", capsys.readouterr().out, re.M)
    assert m and 0.30 <= float(m.group(1)) <= 0.36
    opt = read_csv(tmp_path / "contrast_optimum.csv")[0]
    assert float(opt["contrast"]) == pytest.approx(float(m.group(1)), abs=1e-6)
    curve = read_csv(tmp_path / "contrast_vs_x_mhz.csv")
    assert list(curve[0])[:6] == ["param_value", "contrast", "x_mhz", "i_mhz", "t_pump_us", "t_ion_us"]
    assert (tmp_path / "contrast.png").is_file()


def test_contrast_jaskula(tmp_path, capsys):
    assert main(["contrast", "--protocol", "jaskula", "--out", str(tmp_path), *FAST_CURVES]) == 0
    value = float(re.search(r"contrast=([0-9.]+)", capsys.readouterr().out).group(1))
    assert 0.34 <= value <= 0.40
    assert (tmp_path / "contrast_jaskula_optimum.csv").is_file()


def test_sigma_sweep_small_grid(tmp_path):
    assert main(["sigma-sweep", "sigma_values=0,0.26", "sigma_runs=1", "starts=8", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "sigma_sweep_runs1.csv")
    values = [float(r["contrast"]) for r in rows]
    assert [float(r["param_value"]) for r in rows] == [0.0, 0.26]
    assert 0.55 <= values[0] <= 0.61
    assert values[1] <= values[0]
    assert (tmp_path / "sigma_sweep.png").is_file()


def test_electrode_csv(tmp_path):
    assert main(["electrode", "n_potentials=2", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "electrode_shift.csv")
    assert list(rows[0]) == ["potential_v", "nv_shift_ev", "cbm_shift_ev", "gap_shift_ev"]
    v = np.array([float(r["potential_v"]) for r in rows])
    nv = np.array([float(r["nv_shift_ev"]) for r in rows])
    cbm = np.array([float(r["cbm_shift_ev"]) for r in rows])
    np.testing.assert_allclose(v, [-1, -0.5, 0, 0.5, 1])
    np.testing.assert_allclose(nv, -nv[::-1], atol=1e-12)
    assert np.all(cbm[v < 0] == 0)
    assert np.all(nv[v > 0] > cbm[v > 0])
    assert (tmp_path / "electrode_shift.png").is_file()


def test_electrode_coarse_grid_fails_with_1(tmp_path, capsys):
    code = main(["electrode", "n_potentials=1", "n_radial=4", "n_axial=4", "--out", str(tmp_path)])
    assert code == 1
    assert "fewer than" in capsys.readouterr().err


def test_config_precedence(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[sideband]\ntemperature = 100\nn_max = 5\n\n[run]\nseed = 7\n")
    cfg = load_config("sideband", tmp_path, ini, ["n_max=6"], {"temperature": 200.0})
    assert cfg["sideband.temperature"] == 200.0
    assert cfg["sideband.n_max"] == 6
    assert cfg.seed == 7
    cfg = load_config("sideband", tmp_path, ini)
    assert cfg["sideband.temperature"] == 100.0


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config("x", tmp_path, overrides=["rates.nothing=1"])
    bad = tmp_path / "bad.ini"
    bad.write_text("[sideband]\nmystery = 1\n")
    with pytest.raises(ConfigError):
        load_config("x", tmp_path, bad)


def test_data_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("NVSCC_DATA_DIR", str(tmp_path))
    assert load_config("x", tmp_path).data_dir == tmp_path
    assert load_config("x", tmp_path, overrides=["data_dir=/elsewhere"]).data_dir.as_posix() == "/elsewhere"


def test_runs_flag_selects_repeated_protocol(tmp_path, capsys):
    code = main(["contrast", "--runs", "2", "--out", str(tmp_path), "starts=4", *FAST_CURVES])
    assert code == 0
    opt = read_csv(tmp_path / "contrast_optimum.csv")[0]
    assert opt["protocol"] == "repeated_scc" and opt["runs"] == "2"
    assert (tmp_path / "contrast_by_runs.csv").is_file()
