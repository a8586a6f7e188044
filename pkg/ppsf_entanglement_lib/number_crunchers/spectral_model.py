"""
Type-II phase matching and joint spectral amplitudes of the poled fiber.

The biphoton leaving the fiber is

    f_minus(ws, wi) |H_s V_i>  +  f_plus(ws, wi) |V_s H_i>

with

    f_pm = A_pump(ws + wi) * sinc(dk_pm * L / 2) * exp(i * dk_pm * L / 2)
    dk_pm = g * W**2  +/-  (dn_g / c) * W

where W is the detuning from the effective degeneracy frequency. On the
energy-conservation line W = ws - w_deg; off the line we use the exchange
symmetric form W = (ws - wi)/2 + (wp/2 - w_deg), which is identical on the line
and keeps f(ws, wi) = f(wi, ws) when dn_g = 0.

Conventions:
  - wavelengths are vacuum nm at the interface, angular frequency (rad/s) inside
  - sinc(x) = sin(x)/x with sinc(0) = 1
  - g is the common-mode GVD coefficient in ps^2/km, dn_g the group birefringence
  - the pump intensity spectrum is a Gaussian whose FWHM equals the pump
    linewidth; every grid cell carries the cell average of that intensity, so
    marginals stay smooth even when a cell is wider than the pump line
  - amplitudes are in relative units that scale with sqrt(pump power)
"""

from dataclasses import dataclass, replace
from typing import Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import DomainError, EmptySpectrumError, InvalidParameterError, NotMeasurableError
from .toolbox import SPEED_OF_LIGHT, TWO_PI_C_NM, atomic_write_text, tprint, wavelength_to_omega

# ps^2/km -> s^2/m
_GVD_TO_SI = 1e-24 * 1e-3

# Scale of the pump density (per this many rad/s) so amplitudes come out O(1)
_OMEGA_UNIT = 1e12

_FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


@dataclass
class PumpParams:
    center_wavelength: float = 782.90  # nm, vacuum
    linewidth_fwhm: float = 0.05  # nm
    power: float = 7.5  # mW

    def validate(self) -> "PumpParams":
        if not np.isfinite(self.center_wavelength) or self.center_wavelength <= 0:
            raise InvalidParameterError(f"center_wavelength > 0 violated (got {self.center_wavelength})")
        if not self.linewidth_fwhm >= 0:
            raise InvalidParameterError(f"linewidth_fwhm ≥ 0 violated (got {self.linewidth_fwhm})")
        if not self.power >= 0:
            raise InvalidParameterError(f"power ≥ 0 violated (got {self.power})")
        return self


@dataclass
class PpsfParams:
    length: float = 0.20  # m
    degeneracy_wavelength_at_ref_temp: float = 1565.80  # nm
    temperature: float = 34.0  # degC
    ref_temperature: float = 34.0  # degC
    temp_tuning_coeff: float = 0.1  # nm/degC
    group_birefringence: float = 2.0e-5
    # Fitted once with fit_gvd_coeff: default-grid marginal FWHM of 101 nm
    gvd_coeff: float = 9.15  # ps^2/km

    def validate(self) -> "PpsfParams":
        if not self.length > 0:
            raise InvalidParameterError(f"length > 0 violated (got {self.length})")
        if not np.isfinite(self.gvd_coeff):
            raise InvalidParameterError(f"gvd_coeff finite violated (got {self.gvd_coeff})")
        if not self.group_birefringence >= 0:
            raise InvalidParameterError(f"group_birefringence ≥ 0 violated (got {self.group_birefringence})")
        if not self.degeneracy_wavelength_at_ref_temp > 0:
            raise InvalidParameterError(
                f"degeneracy_wavelength_at_ref_temp > 0 violated (got {self.degeneracy_wavelength_at_ref_temp})")
        for name in ("temperature", "ref_temperature", "temp_tuning_coeff"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} finite violated (got {getattr(self, name)})")
        return self


@dataclass(eq=False)
class SpectralGrid:
    """
    Signal x idler sampling of the joint spectrum, both axes in vacuum nm and
    strictly increasing. Row index = signal, column index = idler.
    """
    signal_wavelengths: np.ndarray
    idler_wavelengths: np.ndarray

    def __post_init__(self):
        self.signal_wavelengths = np.asarray(self.signal_wavelengths, dtype=float)
        self.idler_wavelengths = np.asarray(self.idler_wavelengths, dtype=float)
        for name, axis in (("signal", self.signal_wavelengths), ("idler", self.idler_wavelengths)):
            if axis.ndim != 1 or axis.size == 0:
                raise InvalidParameterError(f"empty {name} axis")
            if axis.size < 8:
                raise InvalidParameterError(f"{name} axis needs ≥ 8 points (got {axis.size})")
            if not np.all(np.isfinite(axis)) or np.any(axis <= 0):
                raise InvalidParameterError(f"{name} wavelengths must be positive and finite")
            if np.any(np.diff(axis) <= 0):
                raise InvalidParameterError(f"{name} wavelengths must be strictly increasing")

    @classmethod
    def uniform(cls, min_wavelength: float, max_wavelength: float, points: int) -> "SpectralGrid":
        """Same uniform wavelength axis for signal and idler."""
        axis = np.linspace(min_wavelength, max_wavelength, int(points))
        return cls(axis, axis.copy())

    @classmethod
    def uniform_in_frequency(cls, center_wavelength: float, half_points: int, spacing_nm: float) -> "SpectralGrid":
        """
        Axis evenly spaced in angular frequency and mirror-symmetric about
        `center_wavelength`, with roughly `spacing_nm` between points near the center.
        """
        w_center = TWO_PI_C_NM / center_wavelength
        dw = TWO_PI_C_NM * spacing_nm / center_wavelength ** 2
        offsets = np.arange(-half_points, half_points + 1) * dw
        axis = np.sort(TWO_PI_C_NM / (w_center + offsets))
        return cls(axis, axis.copy())

    @property
    def shape(self) -> Tuple[int, int]:
        return self.signal_wavelengths.size, self.idler_wavelengths.size

    def __eq__(self, other):
        return isinstance(other, SpectralGrid) \
            and np.array_equal(self.signal_wavelengths, other.signal_wavelengths) \
            and np.array_equal(self.idler_wavelengths, other.idler_wavelengths)


@dataclass(eq=False)
class JointSpectralAmplitude:
    grid: SpectralGrid
    f_minus: np.ndarray
    f_plus: np.ndarray
    # Set by apply_filters when nothing survives the filters
    is_empty: bool = False

    def __post_init__(self):
        self.f_minus = np.asarray(self.f_minus, dtype=complex)
        self.f_plus = np.asarray(self.f_plus, dtype=complex)
        if self.f_minus.shape != self.grid.shape or self.f_plus.shape != self.grid.shape:
            raise InvalidParameterError(
                f"amplitude shapes {self.f_minus.shape}/{self.f_plus.shape} do not match grid {self.grid.shape}")
        if not (np.all(np.isfinite(self.f_minus)) and np.all(np.isfinite(self.f_plus))):
            raise InvalidParameterError("amplitudes must be finite")

    def joint_norm(self) -> float:
        """Quadrature of |f-|^2 + |f+|^2 over the grid (frequency measure)."""
        w = quadrature_weights(self.grid)
        return float(np.sum(w * (np.abs(self.f_minus) ** 2 + np.abs(self.f_plus) ** 2)))


def _trapezoid_weights(omega: np.ndarray) -> np.ndarray:
    w = np.empty_like(omega)
    w[1:-1] = np.abs(omega[:-2] - omega[2:]) / 2.0
    w[0] = abs(omega[0] - omega[1]) / 2.0
    w[-1] = abs(omega[-2] - omega[-1]) / 2.0
    return w / _OMEGA_UNIT


def quadrature_weights(grid: SpectralGrid) -> np.ndarray:
    """
    Trapezoidal weights of the frequency trace, shape grid.shape.

    The frequency axes are the images of the wavelength axes, so cells are
    nonuniform in frequency even for a uniform wavelength grid.
    """
    ws = _trapezoid_weights(wavelength_to_omega(grid.signal_wavelengths))
    wi = _trapezoid_weights(wavelength_to_omega(grid.idler_wavelengths))
    return np.outer(ws, wi)


def degeneracy_wavelength(pump: PumpParams) -> float:
    """
    Energy-degenerate wavelength of the pair, 2 * pump wavelength.

    Example:
      >>> degeneracy_wavelength(PumpParams(center_wavelength=782.90))
      1565.8
    """
    if not pump.center_wavelength > 0:
        raise InvalidParameterError(f"center_wavelength > 0 violated (got {pump.center_wavelength})")
    return 2.0 * pump.center_wavelength


def conjugate_wavelength(pump: PumpParams, signal_wavelength: Union[float, np.ndarray]):
    """
    Idler wavelength satisfying 1/ls + 1/li = 1/lp.

    Parameters:
      pump (PumpParams): Pump with the center wavelength used for energy conservation.
      signal_wavelength (float|np.ndarray): Signal wavelength(s) in nm.

    Returns:
      float|np.ndarray: Conjugate wavelength(s) in nm.

    Raises:
      DomainError: If the signal is so short that the idler frequency would be nonpositive.
    """
    inverse = 1.0 / pump.center_wavelength - 1.0 / np.asarray(signal_wavelength, dtype=float)
    if np.any(inverse <= 0):
        raise DomainError(f"signal wavelength {signal_wavelength} nm leaves no idler frequency "
                          f"for a {pump.center_wavelength} nm pump")
    result = 1.0 / inverse
    return float(result) if np.ndim(result) == 0 else result


def effective_degeneracy(ppsf: PpsfParams) -> float:
    """Degeneracy wavelength after the linear temperature tuning."""
    return ppsf.degeneracy_wavelength_at_ref_temp + ppsf.temp_tuning_coeff * (ppsf.temperature - ppsf.ref_temperature)


def _detuning(ws, wi, ppsf: PpsfParams, pump: PumpParams):
    w_deg = TWO_PI_C_NM / effective_degeneracy(ppsf)
    wp = TWO_PI_C_NM / pump.center_wavelength
    return (ws - wi) / 2.0 + (wp / 2.0 - w_deg)


def _phase_mismatch_omega(ws, wi, ppsf: PpsfParams, pump: PumpParams, branch: str):
    detuning = _detuning(ws, wi, ppsf, pump)
    common = ppsf.gvd_coeff * _GVD_TO_SI * detuning ** 2
    walk_off = ppsf.group_birefringence * detuning / SPEED_OF_LIGHT
    if branch == "plus":
        return common + walk_off
    if branch == "minus":
        return common - walk_off
    raise InvalidParameterError(f"branch must be 'plus' or 'minus' (got {branch!r})")


def phase_mismatch(signal_wavelength, idler_wavelength, ppsf: PpsfParams, pump: PumpParams, branch: str):
    """
    Phase mismatch dk (1/m) of one polarization branch.

    The caller is responsible for energy conservation between the two wavelengths.
    The branches differ only in the sign of the group-birefringence term.
    """
    ws = wavelength_to_omega(signal_wavelength)
    wi = wavelength_to_omega(idler_wavelength)
    result = _phase_mismatch_omega(ws, wi, ppsf, pump, branch)
    return float(result) if np.ndim(result) == 0 else result


def _sinc(x):
    return np.sinc(x / np.pi)


def _cell_edges(omega: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # omega decreases along the axis because wavelengths increase
    mid = (omega[:-1] + omega[1:]) / 2.0
    first = omega[0] + (omega[0] - omega[1]) / 2.0
    last = omega[-1] - (omega[-2] - omega[-1]) / 2.0
    edges = np.concatenate(([first], mid, [last]))
    return edges[1:], edges[:-1]  # (low, high) per cell


def _second_antiderivative(x: np.ndarray, sigma: float) -> np.ndarray:
    """
    Tail part of the second antiderivative of a unit-area Gaussian. The ramp
    part max(x, 0) is handled by the caller.
    """
    if sigma == 0:
        return np.zeros_like(x)
    a = np.abs(x) / sigma
    return sigma * (np.exp(-0.5 * a * a) / np.sqrt(2.0 * np.pi) - a * ndtr(-a))


def _cell_averaged_pump_intensity(grid: SpectralGrid, pump: PumpParams) -> np.ndarray:
    s_lo, s_hi = _cell_edges(wavelength_to_omega(grid.signal_wavelengths))
    i_lo, i_hi = _cell_edges(wavelength_to_omega(grid.idler_wavelengths))
    wp = TWO_PI_C_NM / pump.center_wavelength
    sigma = TWO_PI_C_NM * pump.linewidth_fwhm / pump.center_wavelength ** 2 * _FWHM_TO_SIGMA

    hh = s_hi[:, None] + i_hi[None, :] - wp
    hl = s_hi[:, None] + i_lo[None, :] - wp
    lh = s_lo[:, None] + i_hi[None, :] - wp
    ll = s_lo[:, None] + i_lo[None, :] - wp

    # hh - hl - lh + ll vanishes identically once every corner is past the line
    ramp = (np.maximum(hh, 0) + np.maximum(ll, 0)) - (np.maximum(hl, 0) + np.maximum(lh, 0))
    ramp = np.where(ll >= 0, 0.0, ramp)
    tail = (_second_antiderivative(hh, sigma) + _second_antiderivative(ll, sigma)) \
        - (_second_antiderivative(hl, sigma) + _second_antiderivative(lh, sigma))

    area = (s_hi - s_lo)[:, None] * (i_hi - i_lo)[None, :]
    return np.clip(ramp + tail, 0.0, None) / area * _OMEGA_UNIT


def compute_jsa(ppsf: PpsfParams, pump: PumpParams, grid: SpectralGrid) -> JointSpectralAmplitude:
    """
    Joint spectral amplitudes f-(ws, wi), f+(ws, wi) on `grid`.

    Parameters:
      ppsf (PpsfParams): Fiber length, degeneracy and dispersion.
      pump (PumpParams): Pump wavelength, linewidth and power.
      grid (SpectralGrid): Signal x idler sampling.

    Returns:
      JointSpectralAmplitude: amplitudes in relative units, proportional to sqrt(power).

    Raises:
      InvalidParameterError: On an empty grid or invalid parameters.
    """
    if grid is None or 0 in grid.shape:
        raise InvalidParameterError("empty grid")
    ppsf.validate()
    pump.validate()

    ws = wavelength_to_omega(grid.signal_wavelengths)[:, None]
    wi = wavelength_to_omega(grid.idler_wavelengths)[None, :]
    envelope = np.sqrt(pump.power) * np.sqrt(_cell_averaged_pump_intensity(grid, pump))

    amplitudes = {}
    for branch in ("minus", "plus"):
        half_phase = _phase_mismatch_omega(ws, wi, ppsf, pump, branch) * ppsf.length / 2.0
        amplitudes[branch] = envelope * _sinc(half_phase) * np.exp(1j * half_phase)

    return JointSpectralAmplitude(grid, amplitudes["minus"], amplitudes["plus"])


def marginal_spectrum(jsa: JointSpectralAmplitude, axis: str = "signal", weighted: bool = False) -> pd.DataFrame:
    """
    Marginal spectrum of one photon, normalized to unit peak.

    Parameters:
      jsa (JointSpectralAmplitude): Source amplitudes.
      axis (str): "signal" sums over idler, "idler" sums over signal.
      weighted (bool): Weight each cell by its frequency-quadrature area, which
                       gives the probability per grid cell instead of the plain sum.

    Returns:
      pd.DataFrame: columns wavelength_nm, intensity.
    """
    density = np.abs(jsa.f_minus) ** 2 + np.abs(jsa.f_plus) ** 2
    if weighted:
        density = density * quadrature_weights(jsa.grid)
    if axis == "signal":
        wavelengths, intensity = jsa.grid.signal_wavelengths, density.sum(axis=1)
    elif axis == "idler":
        wavelengths, intensity = jsa.grid.idler_wavelengths, density.sum(axis=0)
    else:
        raise InvalidParameterError(f"axis must be 'signal' or 'idler' (got {axis!r})")

    peak = intensity.max()
    if peak > 0:
        intensity = intensity / peak
    return pd.DataFrame({"wavelength_nm": wavelengths, "intensity": intensity})


def fwhm(x, y) -> float:
    """
    Full width at half maximum with linear interpolation between samples.

    Parameters:
      x (array): Abscissa, sorted internally.
      y (array): Nonnegative ordinate.

    Returns:
      float: Width in units of x.

    Raises:
      NotMeasurableError: If the curve does not fall below half its peak on both sides.

    Example:
      >>> fwhm([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
      1.0
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidParameterError("x and y must be 1-D arrays of equal length")
    if np.any(y < 0):
        raise InvalidParameterError("y ≥ 0 violated")
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]

    if y.size < 3 or y.max() <= 0:
        raise NotMeasurableError("curve has no peak to measure")
    peak = int(np.argmax(y))
    half = y[peak] / 2.0

    below_left = np.nonzero(y[:peak] < half)[0]
    below_right = np.nonzero(y[peak + 1:] < half)[0]
    if below_left.size == 0 or below_right.size == 0:
        raise NotMeasurableError("no half-maximum crossing on both sides of the peak")

    i = below_left[-1]
    left = x[i] + (half - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
    j = peak + 1 + below_right[0]
    right = x[j - 1] + (y[j - 1] - half) * (x[j] - x[j - 1]) / (y[j - 1] - y[j])
    return float(right - left)


def fit_gvd_coeff(ppsf: PpsfParams, pump: PumpParams, grid: SpectralGrid,
                  target_fwhm_nm: float = 101.0, bracket: Tuple[float, float] = (4.0, 40.0)) -> float:
    """
    GVD coefficient (ps^2/km) whose signal marginal has the target FWHM.

    The marginal narrows monotonically as the coefficient grows, so a bracketing
    root finder is enough. The bracket must keep the spectrum inside the grid.
    """
    def residual(gvd: float) -> float:
        trial = replace(ppsf, gvd_coeff=gvd)
        spectrum = marginal_spectrum(compute_jsa(trial, pump, grid), "signal")
        return fwhm(spectrum["wavelength_nm"], spectrum["intensity"]) - target_fwhm_nm

    gvd = brentq(residual, *bracket, xtol=1e-6)
    tprint(f"Fitted gvd_coeff = {gvd:.5f} ps^2/km for a {target_fwhm_nm} nm FWHM")
    return float(gvd)


def jsa_frame(jsa: JointSpectralAmplitude) -> pd.DataFrame:
    """Long-format JSA table, one row per grid point (signal-major order)."""
    signal, idler = np.meshgrid(jsa.grid.signal_wavelengths, jsa.grid.idler_wavelengths, indexing="ij")
    return pd.DataFrame({
        "signal_nm": signal.ravel(),
        "idler_nm": idler.ravel(),
        "re_fminus": jsa.f_minus.real.ravel(),
        "im_fminus": jsa.f_minus.imag.ravel(),
        "re_fplus": jsa.f_plus.real.ravel(),
        "im_fplus": jsa.f_plus.imag.ravel(),
    })


def export_jsa_csv(jsa: JointSpectralAmplitude, path: str) -> str:
    """Write the JSA as CSV (signal_nm, idler_nm, re_fminus, im_fminus, re_fplus, im_fplus)."""
    if jsa.is_empty:
        raise EmptySpectrumError("refusing to export an empty JSA")
    return atomic_write_text(path, jsa_frame(jsa).to_csv(index=False, float_format="%.9g"))

