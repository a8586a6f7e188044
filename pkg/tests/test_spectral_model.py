from dataclasses import replace

import numpy as np
import pytest

from ppsf_entanglement_lib.number_crunchers import spectral_model
from ppsf_entanglement_lib.number_crunchers.errors import DomainError, InvalidParameterError, NotMeasurableError
from ppsf_entanglement_lib.number_crunchers.spectral_model import (PpsfParams, PumpParams, SpectralGrid, compute_jsa,
                                                                   conjugate_wavelength, fwhm, marginal_spectrum)
from ppsf_entanglement_lib.number_crunchers.toolbox import SPEED_OF_LIGHT, TWO_PI_C_NM, wavelength_to_omega


@pytest.fixture(scope="module")
def default_jsa():
    return compute_jsa(PpsfParams(), PumpParams(), SpectralGrid.uniform(1465.0, 1665.0, 512))


def test_degeneracy_is_twice_the_pump_wavelength():
    assert spectral_model.degeneracy_wavelength(PumpParams()) == pytest.approx(1565.8)


def test_conjugate_wavelength_is_an_involution():
    pump = PumpParams()
    assert conjugate_wavelength(pump, 1565.8) == pytest.approx(1565.8)
    idler = conjugate_wavelength(pump, 1550.0)
    assert idler > 1565.8
    assert conjugate_wavelength(pump, idler) == pytest.approx(1550.0)
    np.testing.assert_allclose(conjugate_wavelength(pump, np.array([1500.0, 1600.0])),
                               [1.0 / (1 / 782.9 - 1 / 1500.0), 1.0 / (1 / 782.9 - 1 / 1600.0)])


def test_conjugate_wavelength_rejects_signal_shorter_than_pump():
    with pytest.raises(DomainError):
        conjugate_wavelength(PumpParams(), 700.0)


def test_temperature_tuning_shifts_degeneracy():
    ppsf = PpsfParams(temperature=35.0)
    assert spectral_model.effective_degeneracy(ppsf) == pytest.approx(1565.9)


def test_phase_mismatch_branches_differ_by_walk_off_only():
    ppsf, pump = PpsfParams(), PumpParams()
    assert abs(spectral_model.phase_mismatch(1565.8, 1565.8, ppsf, pump, "plus")) < 1e-6

    plus = spectral_model.phase_mismatch(1540.0, conjugate_wavelength(pump, 1540.0), ppsf, pump, "plus")
    minus = spectral_model.phase_mismatch(1540.0, conjugate_wavelength(pump, 1540.0), ppsf, pump, "minus")
    assert plus != pytest.approx(minus)

    no_walk_off = replace(ppsf, group_birefringence=0.0)
    assert spectral_model.phase_mismatch(1540.0, 1592.0, no_walk_off, pump, "plus") == pytest.approx(
        spectral_model.phase_mismatch(1540.0, 1592.0, no_walk_off, pump, "minus"))

    with pytest.raises(InvalidParameterError):
        spectral_model.phase_mismatch(1540.0, 1592.0, ppsf, pump, "sideways")


@pytest.mark.parametrize("temperature", [30.0, 34.0, 36.5])
def test_phase_mismatch_vanishes_at_the_tuned_degeneracy(temperature):
    ppsf = PpsfParams(temperature=temperature)
    degeneracy = spectral_model.effective_degeneracy(ppsf)
    pump = PumpParams(center_wavelength=degeneracy / 2.0)
    for branch in ("plus", "minus"):
        assert abs(spectral_model.phase_mismatch(degeneracy, degeneracy, ppsf, pump, branch)) < 1e-12


def _mismatch_at(detuning, ppsf, pump, branch):
    # Energy-conserving pair detuned symmetrically about the degeneracy frequency
    w_deg = wavelength_to_omega(spectral_model.effective_degeneracy(ppsf))
    signal = TWO_PI_C_NM / (w_deg + detuning)
    idler = TWO_PI_C_NM / (w_deg - detuning)
    return spectral_model.phase_mismatch(signal, idler, ppsf, pump, branch)


def test_common_mode_mismatch_is_the_gvd_quadratic():
    ppsf, pump = PpsfParams(group_birefringence=0.0), PumpParams()
    h = 2e13  # rad/s
    second_difference = (_mismatch_at(h, ppsf, pump, "plus") - 2.0 * _mismatch_at(0.0, ppsf, pump, "plus")
                         + _mismatch_at(-h, ppsf, pump, "plus")) / h ** 2
    # ps^2/km -> s^2/m
    assert second_difference == pytest.approx(2.0 * ppsf.gvd_coeff * 1e-27, rel=1e-6)
    assert _mismatch_at(h, ppsf, pump, "plus") == pytest.approx(_mismatch_at(-h, ppsf, pump, "plus"), rel=1e-9)

    walk_off = PpsfParams()
    split = (_mismatch_at(h, walk_off, pump, "plus") - _mismatch_at(h, walk_off, pump, "minus")) / 2.0
    assert split == pytest.approx(walk_off.group_birefringence * h / SPEED_OF_LIGHT, rel=1e-9)


def test_amplitude_vanishes_away_from_energy_conservation():
    pump = PumpParams()
    grid = SpectralGrid.uniform_in_frequency(1565.8, 40, 0.03)
    jsa = compute_jsa(PpsfParams(), pump, grid)

    ws = wavelength_to_omega(grid.signal_wavelengths)
    wi = wavelength_to_omega(grid.idler_wavelengths)
    pump_fwhm = TWO_PI_C_NM * pump.linewidth_fwhm / pump.center_wavelength ** 2
    margin = np.abs(np.gradient(ws))[:, None] + np.abs(np.gradient(wi))[None, :]
    distance = np.abs(ws[:, None] + wi[None, :] - wavelength_to_omega(pump.center_wavelength)) - margin
    far = distance > 5.0 * pump_fwhm

    amplitude = np.sqrt(np.abs(jsa.f_minus) ** 2 + np.abs(jsa.f_plus) ** 2)
    assert far.any() and not far.all()
    assert amplitude[far].max() < 1e-5 * amplitude.max()


def test_jsa_exchange_symmetry(default_jsa):
    # Walk-off flips sign under exchange, so the branches mirror each other
    np.testing.assert_allclose(default_jsa.f_plus, default_jsa.f_minus.T, atol=1e-12)

    grid = SpectralGrid.uniform(1465.0, 1665.0, 128)
    symmetric = compute_jsa(PpsfParams(group_birefringence=0.0), PumpParams(), grid)
    np.testing.assert_allclose(symmetric.f_minus, symmetric.f_minus.T, atol=1e-12)
    np.testing.assert_array_equal(symmetric.f_minus, symmetric.f_plus)


def test_jsa_amplitude_scales_with_sqrt_power():
    grid = SpectralGrid.uniform(1465.0, 1665.0, 64)
    low = compute_jsa(PpsfParams(), PumpParams(power=7.5), grid)
    high = compute_jsa(PpsfParams(), PumpParams(power=30.0), grid)
    np.testing.assert_allclose(high.f_minus, 2.0 * low.f_minus, rtol=1e-12, atol=1e-300)

    dark = compute_jsa(PpsfParams(), PumpParams(power=0.0), grid)
    assert not np.any(dark.f_minus) and not np.any(dark.f_plus)


def test_default_marginal_bandwidth(default_jsa):
    spectrum = marginal_spectrum(default_jsa, "signal")
    assert spectrum["intensity"].max() == pytest.approx(1.0)
    width = fwhm(spectrum["wavelength_nm"], spectrum["intensity"])
    assert width == pytest.approx(101.0, abs=5.0)

    idler = marginal_spectrum(default_jsa, "idler")
    assert fwhm(idler["wavelength_nm"], idler["intensity"]) == pytest.approx(width, rel=0.02)


def test_marginal_rejects_unknown_axis(default_jsa):
    with pytest.raises(InvalidParameterError):
        marginal_spectrum(default_jsa, "pump")


def test_fwhm_of_triangle_and_gaussian():
    assert fwhm([0.0, 1.0, 2.0], [0.0, 1.0, 0.0]) == pytest.approx(1.0)
    x = np.linspace(-10.0, 10.0, 2001)
    assert fwhm(x, np.exp(-x ** 2 / 2.0)) == pytest.approx(2.0 * np.sqrt(2.0 * np.log(2.0)), rel=1e-4)


def test_fwhm_needs_both_crossings():
    x = np.linspace(0.0, 1.0, 50)
    with pytest.raises(NotMeasurableError):
        fwhm(x, x)
    with pytest.raises(NotMeasurableError):
        fwhm(x, np.zeros_like(x))
    with pytest.raises(InvalidParameterError):
        fwhm(x, -x)


def test_grid_validation():
    with pytest.raises(InvalidParameterError):
        SpectralGrid(np.linspace(1500, 1600, 4), np.linspace(1500, 1600, 16))
    with pytest.raises(InvalidParameterError):
        SpectralGrid(np.linspace(1600, 1500, 16), np.linspace(1500, 1600, 16))

    grid = SpectralGrid.uniform_in_frequency(1565.8, 10, 0.5)
    assert grid.shape == (21, 21)
    omega = spectral_model.wavelength_to_omega(grid.signal_wavelengths)
    np.testing.assert_allclose(np.diff(omega), np.diff(omega)[0], rtol=1e-9)


def test_pump_validation():
    with pytest.raises(InvalidParameterError):
        PumpParams(power=-1.0).validate()
    with pytest.raises(InvalidParameterError):
        PpsfParams(length=0.0).validate()


def test_jsa_csv_export(tmp_path):
    jsa = compute_jsa(PpsfParams(), PumpParams(), SpectralGrid.uniform(1500.0, 1640.0, 16))
    frame = spectral_model.jsa_frame(jsa)
    assert len(frame) == 256
    assert list(frame.columns) == ["signal_nm", "idler_nm", "re_fminus", "im_fminus", "re_fplus", "im_fplus"]

    path = tmp_path / "jsa.csv"
    spectral_model.export_jsa_csv(jsa, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "signal_nm,idler_nm,re_fminus,im_fminus,re_fplus,im_fplus"
    assert len(lines) == 257
