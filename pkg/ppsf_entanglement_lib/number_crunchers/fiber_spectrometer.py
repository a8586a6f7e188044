"""
Dispersive-fiber single-photon spectrometer.

Both photons of a pair travel through the same spool, then a beamsplitter sends
each one independently to detector A (probability r) or B. A coincidence needs
the photons at opposite outputs. The histogram of t_B - t_A then maps one to one
onto the wavelength of the photon at B:

    d(l) = tau(l) - tau(conj(l)),   tau(l) = L * [D (l - l0) + S/2 (l - l0)^2]

reconstruct_spectrum inverts d by bisection, subtracts the accidental floor and
divides by the wavelength width of each delay bin.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from .errors import EmptySpectrumError, InvalidParameterError, InversionError
from .photon_counting import PS, CoincidenceHistogram, DetectorParams, _detect, _to_ticks, coincidence_histogram
from .spectral_model import JointSpectralAmplitude, PumpParams, _cell_edges, conjugate_wavelength, quadrature_weights
from .toolbox import TWO_PI_C_NM, atomic_write_text, tprint, wavelength_to_omega

BISECTION_TOLERANCE = 1e-4  # nm

_SCAN_POINTS = 20001


@dataclass
class DispersiveFiber:
    length: float = 20.0  # km
    dispersion: float = 17.0  # ps/(nm km) at the reference wavelength
    dispersion_slope: float = 0.056  # ps/(nm^2 km)
    reference_wavelength: float = 1550.0  # nm

    def validate(self) -> "DispersiveFiber":
        if not self.length > 0:
            raise InvalidParameterError(f"length > 0 violated (got {self.length})")
        if not np.isfinite(self.dispersion) or self.dispersion == 0:
            raise InvalidParameterError(f"dispersion finite and nonzero violated (got {self.dispersion})")
        if not np.isfinite(self.dispersion_slope):
            raise InvalidParameterError(f"dispersion_slope finite violated (got {self.dispersion_slope})")
        if not self.reference_wavelength > 0:
            raise InvalidParameterError(f"reference_wavelength > 0 violated (got {self.reference_wavelength})")
        return self


def delay_of(wavelength, fiber: DispersiveFiber):
    """
    Group delay (s) of `wavelength` (nm) relative to the reference wavelength.

    Example:
      >>> delay_of(1560.0, DispersiveFiber(20.0, 17.0, 0.0, 1550.0))
      3.4e-09
    """
    offset = np.asarray(wavelength, dtype=float) - fiber.reference_wavelength
    delay_ps = fiber.length * (fiber.dispersion * offset + 0.5 * fiber.dispersion_slope * offset ** 2)
    result = delay_ps * PS
    return float(result) if np.ndim(result) == 0 else result


def delay_difference(wavelength, fiber: DispersiveFiber, pump: PumpParams):
    """t_B - t_A for a photon at `wavelength` on B and its conjugate on A."""
    return delay_of(wavelength, fiber) - delay_of(conjugate_wavelength(pump, wavelength), fiber)


def is_strictly_monotone(values: np.ndarray) -> bool:
    steps = np.diff(values)
    return bool(np.all(steps > 0) or np.all(steps < 0))


def simulate_spectrometer_run(jsa: JointSpectralAmplitude, fiber: DispersiveFiber, beamsplitter_ratio: float,
                              detectors: Tuple[DetectorParams, DetectorParams], duration: float, seed: int, *,
                              pair_rate: float = 5000.0, bin_width: float = 500e-12, max_delay: float = 100e-9,
                              dither: bool = True) -> CoincidenceHistogram:
    """
    Coincidence histogram of one spectrometer acquisition.

    Parameters:
      jsa (JointSpectralAmplitude): Pairs are drawn from (|f-|^2 + |f+|^2) times the cell weights.
      fiber (DispersiveFiber): Spool in front of the beamsplitter.
      beamsplitter_ratio (float): Probability that a photon goes to detector A.
      detectors ((DetectorParams, DetectorParams)): Detectors A and B.
      duration (float): Seconds of acquisition.
      seed (int): RNG seed.
      pair_rate (float): Pairs/s entering the spool.
      bin_width, max_delay (float): Histogram binning (s).
      dither (bool): Spread each pair uniformly across its signal cell while
                     keeping the cell's total frequency.

    Returns:
      CoincidenceHistogram: histogram of t_B - t_A.

    Raises:
      EmptySpectrumError: If the JSA carries no probability.
    """
    fiber.validate()
    if not 0.0 <= beamsplitter_ratio <= 1.0:
        raise InvalidParameterError(f"beamsplitter_ratio in [0,1] violated (got {beamsplitter_ratio})")
    if not duration > 0:
        raise InvalidParameterError(f"duration > 0 violated (got {duration})")
    if not pair_rate >= 0:
        raise InvalidParameterError(f"pair_rate ≥ 0 violated (got {pair_rate})")
    for detector in detectors:
        detector.validate()

    probability = ((np.abs(jsa.f_minus) ** 2 + np.abs(jsa.f_plus) ** 2) * quadrature_weights(jsa.grid)).ravel()
    total = probability.sum()
    if jsa.is_empty or not total > 0:
        raise EmptySpectrumError("joint spectrum carries no pairs to sample")

    rng = np.random.default_rng(seed)
    n_pairs = rng.poisson(pair_rate * duration)
    cells = rng.choice(probability.size, size=n_pairs, p=probability / total)
    rows, cols = np.divmod(cells, jsa.grid.shape[1])

    ws_axis = wavelength_to_omega(jsa.grid.signal_wavelengths)
    wi_axis = wavelength_to_omega(jsa.grid.idler_wavelengths)
    ws_center, wi_center = ws_axis[rows], wi_axis[cols]
    if dither:
        low, high = _cell_edges(ws_axis)
        ws = rng.uniform(low[rows], high[rows])
    else:
        ws = ws_center
    wi = wi_center - (ws - ws_center)
    signal_nm, idler_nm = TWO_PI_C_NM / ws, TWO_PI_C_NM / wi

    duration_ticks = int(_to_ticks(duration))
    emissions = rng.integers(0, duration_ticks, size=n_pairs, dtype=np.int64)
    signal_delay = _to_ticks(delay_of(signal_nm, fiber))
    idler_delay = _to_ticks(delay_of(idler_nm, fiber))
    offset = -int(min(signal_delay.min(initial=0), idler_delay.min(initial=0)))
    signal_arrival = emissions + signal_delay + offset
    idler_arrival = emissions + idler_delay + offset

    signal_to_a = rng.random(n_pairs) < beamsplitter_ratio
    idler_to_a = rng.random(n_pairs) < beamsplitter_ratio
    arrivals_a = np.concatenate([signal_arrival[signal_to_a], idler_arrival[idler_to_a]])
    arrivals_b = np.concatenate([signal_arrival[~signal_to_a], idler_arrival[~idler_to_a]])

    window = (0, np.iinfo(np.int64).max)
    stream_a = _detect(rng, arrivals_a, detectors[0].efficiency, detectors[0], 0.0, duration, duration_ticks, 1, window)
    stream_b = _detect(rng, arrivals_b, detectors[1].efficiency, detectors[1], 0.0, duration, duration_ticks, 2, window)
    tprint(f"Spectrometer run: {n_pairs} pairs, {len(stream_a)}/{len(stream_b)} detections on A/B")
    return coincidence_histogram(stream_a, stream_b, bin_width, max_delay)


def _invert(targets: np.ndarray, fiber: DispersiveFiber, pump: PumpParams, band: Tuple[float, float],
            increasing: bool) -> np.ndarray:
    """Vectorized bisection of delay_difference(l) = target on the band."""
    low = np.full(targets.shape, float(band[0]))
    high = np.full(targets.shape, float(band[1]))
    sign = 1.0 if increasing else -1.0
    while np.max(high - low, initial=0.0) > BISECTION_TOLERANCE:
        mid = 0.5 * (low + high)
        above = sign * (delay_difference(mid, fiber, pump) - targets) > 0
        high = np.where(above, mid, high)
        low = np.where(above, low, mid)
    return 0.5 * (low + high)


def reconstruct_spectrum(hist: CoincidenceHistogram, fiber: DispersiveFiber, pump: PumpParams,
                         accidental_window: Tuple[float, float],
                         band: Tuple[float, float] = (1465.0, 1665.0)) -> pd.DataFrame:
    """
    Accidental-subtracted biphoton spectrum from a spectrometer histogram.

    Every delay bin whose edges both map into `band` becomes one wavelength
    bin. Intensity is counts per nm, so nonuniform wavelength bins are
    Jacobian-corrected.

    Parameters:
      hist (CoincidenceHistogram): Histogram of t_B - t_A.
      fiber (DispersiveFiber): Spool used for the acquisition.
      pump (PumpParams): Sets the energy-conservation relation.
      accidental_window ((float, float)): Delay range (s) holding only accidentals.
      band ((float, float)): Wavelength range (nm) of the photon at B.

    Returns:
      pd.DataFrame: wavelength_nm, intensity, intensity_err (sorted by wavelength).

    Raises:
      InversionError: If the delay mapping is not one to one over the band.
    """
    fiber.validate()
    if not band[0] < band[1]:
        raise InvalidParameterError(f"band low < high violated (got {band})")
    scan = np.linspace(band[0], band[1], _SCAN_POINTS)
    mapped = delay_difference(scan, fiber, pump)
    if not is_strictly_monotone(mapped) or not is_strictly_monotone(delay_of(scan, fiber)):
        raise InversionError(f"delay mapping is not one to one over {band[0]}-{band[1]} nm")
    increasing = mapped[-1] > mapped[0]
    d_min, d_max = float(mapped.min()), float(mapped.max())

    start, stop = accidental_window
    floor_mask = (hist.delays >= min(start, stop)) & (hist.delays <= max(start, stop))
    if not floor_mask.any():
        raise InvalidParameterError(f"accidental window {accidental_window} holds no histogram bins")
    floor_counts = hist.counts[floor_mask].astype(float)
    floor = floor_counts.mean()
    floor_var = floor_counts.var(ddof=1) if floor_counts.size > 1 else floor
    floor_var_of_mean = floor_var / floor_counts.size

    lower_edges = hist.delays - hist.bin_width / 2.0
    upper_edges = hist.delays + hist.bin_width / 2.0
    inside = (lower_edges >= d_min) & (upper_edges <= d_max) & ~floor_mask
    if not inside.any():
        raise InversionError("histogram does not cover the requested band")

    lam_low = _invert(lower_edges[inside], fiber, pump, band, increasing)
    lam_high = _invert(upper_edges[inside], fiber, pump, band, increasing)
    lam_center = _invert(hist.delays[inside], fiber, pump, band, increasing)
    width = np.abs(lam_high - lam_low)

    counts = hist.counts[inside].astype(float)
    intensity = np.clip(counts - floor, 0.0, None) / width
    error = np.sqrt(counts + floor_var_of_mean) / width
    order = np.argsort(lam_center, kind="stable")
    return pd.DataFrame({
        "wavelength_nm": lam_center[order],
        "intensity": intensity[order],
        "intensity_err": error[order],
    })


def biphoton_density(jsa: JointSpectralAmplitude) -> pd.DataFrame:
    """
    True spectrum seen by the spectrometer: the mean of the signal and idler
    marginals, as a per-nm density with unit area on the signal axis.
    """
    density = (np.abs(jsa.f_minus) ** 2 + np.abs(jsa.f_plus) ** 2) * quadrature_weights(jsa.grid)
    signal_axis, idler_axis = jsa.grid.signal_wavelengths, jsa.grid.idler_wavelengths
    signal = density.sum(axis=1) / np.gradient(signal_axis)
    idler = np.interp(signal_axis, idler_axis, density.sum(axis=0) / np.gradient(idler_axis))
    mean = 0.5 * (signal / trapezoid(signal, signal_axis) + idler / trapezoid(idler, signal_axis))
    return pd.DataFrame({"wavelength_nm": signal_axis, "density": mean})


def spectrum_l1_error(reconstructed: pd.DataFrame, truth: pd.DataFrame) -> float:
    """L1 distance between two spectra after normalizing both to unit area on the reconstructed axis."""
    x = reconstructed["wavelength_nm"].to_numpy()
    measured = reconstructed["intensity"].to_numpy()
    expected = np.interp(x, truth["wavelength_nm"].to_numpy(), truth["density"].to_numpy(), left=0.0, right=0.0)
    measured_area, expected_area = trapezoid(measured, x), trapezoid(expected, x)
    if not measured_area > 0 or not expected_area > 0:
        raise EmptySpectrumError("cannot compare spectra with zero area")
    return float(trapezoid(np.abs(measured / measured_area - expected / expected_area), x))


def export_spectrum_csv(spectrum: pd.DataFrame, path: str) -> str:
    """Spectrum as CSV (wavelength_nm, intensity, intensity_err)."""
    return atomic_write_text(path, spectrum.to_csv(index=False, float_format="%.9g"))
