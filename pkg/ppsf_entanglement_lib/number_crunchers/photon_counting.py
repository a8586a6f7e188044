"""
Time-tagged detection, coincidence histograms, CAR and the rate budget.

Timestamps are integer picosecond ticks so every run is bitwise reproducible.
The stream model: homogeneous Poisson pair emission, per-photon Bernoulli
survival (arm loss x efficiency), Gaussian jitter, independent Poisson dark
counts and uncorrelated background photons, then non-paralyzable dead-time
pruning.

The analytic budget follows one pair from the source output to the detectors:

    singles   S_k = eta_k * T_k * (R * q_k + B) + dark_k
    live      L_k = 1 / (1 + S_k * dead_k)
    pairs     C   = R * f_c * T_1 * T_2 * eta_1 * eta_2 * L_1 * L_2
    accidents A   = S_1 L_1 * S_2 L_2 * window

where q_k is the chance that a pair puts a photon into arm k and f_c the
chance that it puts one photon into each arm (narrow-pump approximation on the
signal marginal).
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from . import toolbox
from .errors import InvalidParameterError
from .polarization_state import DWDM_PAIR, PUMP_SUPPRESSION, FilterSpec
from .spectral_model import PumpParams, compute_jsa, conjugate_wavelength, marginal_spectrum
from .toolbox import atomic_write_text, db_to_transmission, tprint

# Worker processes for batches and sweep points; set by the command layer
NUM_CORES = 1

PS = 1e-12  # one tick

# Step of the fine wavelength grid used for in-band integrals (nm)
_BAND_STEP = 0.005


@dataclass
class DetectorParams:
    efficiency: float = 0.2
    dead_time: float = 15e-6  # s
    dark_rate: float = 800.0  # 1/s, not a measured value for the stated detectors
    jitter_sigma: float = 1.0e-10  # s

    def validate(self) -> "DetectorParams":
        if not 0.0 <= self.efficiency <= 1.0:
            raise InvalidParameterError(f"efficiency in [0,1] violated (got {self.efficiency})")
        for name in ("dead_time", "dark_rate", "jitter_sigma"):
            if not getattr(self, name) >= 0:
                raise InvalidParameterError(f"{name} ≥ 0 violated (got {getattr(self, name)})")
        return self


@dataclass(eq=False)
class TimeTagStream:
    """Detection times of one channel as strictly increasing picosecond ticks."""
    channel: int
    ticks: np.ndarray

    def __post_init__(self):
        self.ticks = np.asarray(self.ticks, dtype=np.int64)
        if self.ticks.ndim != 1:
            raise InvalidParameterError("ticks must be one-dimensional")
        if np.any(np.diff(self.ticks) <= 0):
            raise InvalidParameterError(f"channel {self.channel}: tags must be strictly increasing")

    @property
    def tags(self) -> np.ndarray:
        """Timestamps in seconds."""
        return self.ticks * PS

    def __len__(self):
        return self.ticks.size

    def shifted(self, offset_ticks: int) -> "TimeTagStream":
        return TimeTagStream(self.channel, self.ticks + int(offset_ticks))


@dataclass(eq=False)
class CoincidenceHistogram:
    bin_width: float  # s
    delays: np.ndarray  # bin centers, s
    counts: np.ndarray

    def __post_init__(self):
        self.delays = np.asarray(self.delays, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.delays.shape != self.counts.shape:
            raise InvalidParameterError("delays and counts differ in length")
        if np.any(self.counts < 0):
            raise InvalidParameterError("counts ≥ 0 violated")
        if self.delays.size > 1 and not np.allclose(np.diff(self.delays), self.bin_width, rtol=1e-9, atol=1e-18):
            raise InvalidParameterError("histogram bins must be uniform")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"delay_ps": self.delays / PS, "counts": self.counts})


@dataclass
class RateBudget:
    generation_rate: float  # pairs/s at the source output
    arm_transmissions: Tuple[float, float]  # filter insertion loss per arm
    detected_singles: Tuple[float, float]  # 1/s after dead time
    coincidence_rate: float  # 1/s
    accidental_rate: float  # 1/s in one coincidence window
    internal_generation_rate: float = 0.0  # pairs/s inside the fiber
    in_band_fraction: float = 0.0
    singles_fractions: Tuple[float, float] = (0.0, 0.0)
    live_fractions: Tuple[float, float] = (1.0, 1.0)
    background_rate: float = 0.0  # uncorrelated photons/s per arm input
    car: float = float("inf")
    pairs_per_nm: float = 0.0  # detected pairs/nm/s
    filter_set: str = ""
    stages: List[Dict] = field(default_factory=list)
    improved: Dict[str, float] = field(default_factory=dict)


def _to_ticks(seconds) -> np.ndarray:
    return np.rint(np.asarray(seconds, dtype=float) / PS).astype(np.int64)


def apply_dead_time(ticks: np.ndarray, dead_time: float) -> np.ndarray:
    """
    Non-paralyzable dead time on sorted ticks: after a kept tag the next kept
    tag is the first one at least `dead_time` later. Duplicates are dropped.
    """
    if ticks.size == 0:
        return ticks
    dead_ticks = int(np.ceil(dead_time / PS - 1e-9)) if dead_time > 0 else 0
    if dead_ticks == 0:
        return np.unique(ticks)
    if np.all(np.diff(ticks) >= dead_ticks):
        return ticks
    kept = []
    index = 0
    n = ticks.size
    while index < n:
        kept.append(index)
        index = int(np.searchsorted(ticks, ticks[index] + dead_ticks, side="left"))
    return ticks[np.asarray(kept, dtype=np.int64)]


def _uniform_ticks(rng: np.random.Generator, rate: float, duration_ticks: int, duration: float) -> np.ndarray:
    n = rng.poisson(rate * duration) if rate > 0 else 0
    return rng.integers(0, duration_ticks, size=n, dtype=np.int64)


def _detect(rng: np.random.Generator, arrivals: np.ndarray, survival: float, detector: DetectorParams,
            background_rate: float, duration: float, duration_ticks: int, channel: int,
            window: Optional[Tuple[int, int]] = None) -> TimeTagStream:
    """Survival, jitter, noise and dead time for the photons reaching one detector."""
    tags = arrivals[rng.random(arrivals.size) < survival]
    if detector.jitter_sigma > 0 and tags.size:
        tags = tags + np.rint(rng.normal(0.0, detector.jitter_sigma / PS, size=tags.size)).astype(np.int64)
    noise = [_uniform_ticks(rng, background_rate * survival, duration_ticks, duration),
             _uniform_ticks(rng, detector.dark_rate, duration_ticks, duration)]
    tags = np.concatenate([tags] + noise)
    low, high = window if window is not None else (0, duration_ticks)
    tags = np.sort(tags[(tags >= low) & (tags < high)], kind="stable")
    return TimeTagStream(channel, apply_dead_time(tags, detector.dead_time))


def simulate_streams(pair_rate: float, arm_losses: Tuple[float, float],
                     detectors: Tuple[DetectorParams, DetectorParams], duration: float, seed: int,
                     background_rates: Tuple[float, float] = (0.0, 0.0)) -> Tuple[TimeTagStream, TimeTagStream]:
    """
    Two detector streams fed by a Poisson pair source.

    Parameters:
      pair_rate (float): Pairs/s with one photon headed to each arm.
      arm_losses ((float, float)): Loss (dB) between source and detector per arm.
      detectors ((DetectorParams, DetectorParams)): Detector models.
      duration (float): Seconds of acquisition.
      seed (int): RNG seed; identical inputs give bitwise-identical streams.
      background_rates ((float, float)): Uncorrelated photons/s entering each arm,
          subject to the same loss and efficiency as pair photons.

    Returns:
      (TimeTagStream, TimeTagStream): channels 1 and 2.
    """
    if not duration > 0:
        raise InvalidParameterError(f"duration > 0 violated (got {duration})")
    if not pair_rate >= 0:
        raise InvalidParameterError(f"pair_rate ≥ 0 violated (got {pair_rate})")
    for detector in detectors:
        detector.validate()
    rng = np.random.default_rng(seed)
    duration_ticks = int(_to_ticks(duration))
    emissions = np.sort(_uniform_ticks(rng, pair_rate, duration_ticks, duration), kind="stable")

    streams = []
    for arm in range(2):
        survival = float(db_to_transmission(arm_losses[arm])) * detectors[arm].efficiency
        streams.append(_detect(rng, emissions, survival, detectors[arm], background_rates[arm],
                               duration, duration_ticks, arm + 1))
    return streams[0], streams[1]


def _histogram_ticks(t1: np.ndarray, t2: np.ndarray, bin_ticks: int, half_bins: int) -> np.ndarray:
    span = bin_ticks * half_bins
    # Window pointers into t2 for every tag of t1; tags in [lo, hi) have delay in [-span, span)
    lo = np.searchsorted(t2, t1 - span, side="left")
    hi = np.searchsorted(t2, t1 + span, side="left")
    matches = hi - lo
    total = int(matches.sum())
    if total == 0:
        return np.zeros(2 * half_bins, dtype=np.int64)
    first = np.repeat(np.arange(t1.size), matches)
    starts = np.repeat(lo, matches)
    offsets = np.arange(total) - np.repeat(np.cumsum(matches) - matches, matches)
    delays = t2[starts + offsets] - t1[first]
    bins = (delays + span) // bin_ticks
    return np.bincount(bins, minlength=2 * half_bins).astype(np.int64)


def coincidence_histogram(s1: TimeTagStream, s2: TimeTagStream, bin_width: float, max_delay: float) -> CoincidenceHistogram:
    """
    Histogram of delays t2 - t1 over [-max_delay, max_delay).

    Bin edges sit on multiples of bin_width, so the zero-delay bin is
    [0, bin_width). max_delay is rounded up to a whole number of bins.
    """
    if not bin_width > 0:
        raise InvalidParameterError(f"bin_width > 0 violated (got {bin_width})")
    if not max_delay > 0:
        raise InvalidParameterError(f"max_delay > 0 violated (got {max_delay})")
    bin_ticks = int(_to_ticks(bin_width))
    if bin_ticks < 1:
        raise InvalidParameterError(f"bin_width must be at least 1 ps (got {bin_width})")
    half_bins = int(np.ceil(max_delay / bin_width - 1e-9))
    counts = _histogram_ticks(s1.ticks, s2.ticks, bin_ticks, half_bins)
    centers = (np.arange(-half_bins, half_bins) + 0.5) * bin_ticks * PS
    return CoincidenceHistogram(bin_ticks * PS, centers, counts)


def _window_mask(hist: CoincidenceHistogram, center: float, width: float) -> np.ndarray:
    eps = 1e-6 * hist.bin_width
    return np.abs(hist.delays - center) <= width / 2.0 + eps


def car_details(hist: CoincidenceHistogram, coincidence_window: float, accidental_window_offset: float,
                accidental_window_width: Optional[float] = None) -> Dict[str, float]:
    """
    Peak and accidental sums behind a CAR value, with a Poisson error estimate.

    The peak window holds the bins whose centers lie within +/- window/2 of zero;
    the accidental window has width `accidental_window_width` (default: the
    coincidence window) around the offset and is scaled to the peak window.
    """
    width = coincidence_window if accidental_window_width is None else accidental_window_width
    if not coincidence_window > 0 or not width > 0:
        raise InvalidParameterError("window widths must be positive")
    peak_lo, peak_hi = -coincidence_window / 2.0, coincidence_window / 2.0
    acc_lo, acc_hi = accidental_window_offset - width / 2.0, accidental_window_offset + width / 2.0
    if acc_lo < peak_hi and peak_lo < acc_hi:
        raise InvalidParameterError("accidental window overlaps the coincidence window")
    span_lo = hist.delays[0] - hist.bin_width / 2.0
    span_hi = hist.delays[-1] + hist.bin_width / 2.0
    if peak_lo < span_lo or peak_hi > span_hi or acc_lo < span_lo or acc_hi > span_hi:
        raise InvalidParameterError("windows must fit inside the histogram span")

    peak_mask = _window_mask(hist, 0.0, coincidence_window)
    acc_mask = _window_mask(hist, accidental_window_offset, width)
    if not peak_mask.any() or not acc_mask.any():
        raise InvalidParameterError("a window is narrower than one bin")
    peak = float(hist.counts[peak_mask].sum())
    accidental = float(hist.counts[acc_mask].sum())
    scale = peak_mask.sum() / acc_mask.sum()
    accidental_scaled = accidental * scale
    if accidental == 0:
        ratio, error = float("inf"), float("nan")
    else:
        ratio = peak / accidental_scaled
        error = ratio * np.sqrt((1.0 / peak if peak > 0 else 0.0) + 1.0 / accidental)
    return {"peak": peak, "accidental": accidental, "accidental_scaled": accidental_scaled,
            "car": ratio, "car_err": float(error)}


def car(hist: CoincidenceHistogram, coincidence_window: float, accidental_window_offset: float,
        accidental_window_width: Optional[float] = None) -> float:
    """
    Coincidence-to-accidental ratio; +inf when the accidental window is empty.

    Raises:
      InvalidParameterError: If the windows overlap or leave the histogram span.
    """
    return car_details(hist, coincidence_window, accidental_window_offset, accidental_window_width)["car"]


def conjugate_filter_pair(signal_filter: FilterSpec, pump: PumpParams) -> FilterSpec:
    """Idler filter whose passbands are the energy-conjugate images of the signal passbands."""
    bands = [(conjugate_wavelength(pump, high), conjugate_wavelength(pump, low), t)
             for low, high, t in signal_filter.passbands]
    return FilterSpec(bands, signal_filter.insertion_loss_db, signal_filter.edge_width, None)


def _band_axis(band: Tuple[float, float]) -> np.ndarray:
    low, high = band
    return np.linspace(low, high, int(round((high - low) / _BAND_STEP)) + 1)


def conjugate_overlap(signal_filter: FilterSpec, idler_filter: FilterSpec, pump: PumpParams,
                      band: Tuple[float, float] = (1465.0, 1665.0)) -> float:
    """Signal bandwidth (nm) whose conjugate idler also passes: integral of Ts(l) * Ti(conj(l))."""
    axis = _band_axis(band)
    return float(trapezoid(signal_filter.transmittance(axis)
                           * idler_filter.transmittance(conjugate_wavelength(pump, axis)), axis))


def signal_density(config) -> Tuple[np.ndarray, np.ndarray]:
    """
    Signal-photon wavelength density (per nm, unit area) of the configured source.
    Pump power only scales the JSA, so the shape is computed at unit power.
    """
    pump = replace(config.pump, power=1.0)
    jsa = compute_jsa(config.ppsf, pump, config.spectral_grid())
    spectrum = marginal_spectrum(jsa, "signal", weighted=True)
    wavelengths = spectrum["wavelength_nm"].to_numpy()
    density = spectrum["intensity"].to_numpy() / np.gradient(wavelengths)
    return wavelengths, density / trapezoid(density, wavelengths)


def pair_fractions(wavelengths: np.ndarray, density: np.ndarray, filter_1: FilterSpec, filter_2: FilterSpec,
                   pump: PumpParams) -> Tuple[float, float, float]:
    """
    (f_c, q_1, q_2): chance that a pair sends one photon to each arm, and that it
    sends at least one photon into arm k. Transmissions act as independent
    probabilities, so an all-pass pair of arms gives f_c = q_k = 1.
    """
    axis = _band_axis((wavelengths[0], wavelengths[-1]))
    p = np.interp(axis, wavelengths, density)
    conj = conjugate_wavelength(pump, axis)
    t1s, t1i = filter_1.transmittance(axis), filter_1.transmittance(conj)
    t2s, t2i = filter_2.transmittance(axis), filter_2.transmittance(conj)
    a, b = t1s * t2i, t2s * t1i
    f_c = trapezoid(p * (a + b - a * b), axis)
    q1 = trapezoid(p * (t1s + t1i - t1s * t1i), axis)
    q2 = trapezoid(p * (t2s + t2i - t2s * t2i), axis)
    return float(f_c), float(q1), float(q2)


def generation_rate(config, power: Optional[float] = None) -> float:
    """Pairs/s at the source output; linear in pump power."""
    power = config.pump.power if power is None else power
    return config.rates.reference_pair_rate * (power / config.rates.reference_power)


def _chain(config, output_rate: float, f_c: float, q: Tuple[float, float],
           arm_t: Tuple[float, float], background: float) -> Dict[str, float]:
    detectors = config.detectors
    singles = [detectors[k].efficiency * arm_t[k] * (output_rate * q[k] + background) + detectors[k].dark_rate
               for k in range(2)]
    live = [1.0 / (1.0 + singles[k] * detectors[k].dead_time) for k in range(2)]
    detected = [singles[k] * live[k] for k in range(2)]
    coincidences = output_rate * f_c * arm_t[0] * arm_t[1] \
        * detectors[0].efficiency * detectors[1].efficiency * live[0] * live[1]
    accidentals = detected[0] * detected[1] * config.counting.coincidence_window
    return {
        "singles": tuple(detected),
        "live": tuple(live),
        "coincidence_rate": coincidences,
        "accidental_rate": accidentals,
        "car": coincidences / accidentals if accidentals > 0 else float("inf"),
    }


def rate_budget(config, filter_set: str = DWDM_PAIR, conjugate: bool = False,
                density: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> RateBudget:
    """
    Deterministic analytic rate chain from the source output to the detectors.

    Parameters:
      config (SourceConfig): Source, filters, detectors and calibration constants.
      filter_set (str): Name of the filter pair in config.filters.
      conjugate (bool): Replace the idler filter by the conjugate image of the signal filter.
      density (tuple, optional): Precomputed signal_density(config).

    Returns:
      RateBudget
    """
    rates, losses = config.rates, config.losses
    if filter_set not in config.filters:
        raise InvalidParameterError(f"unknown filter set {filter_set!r}")
    filter_1, filter_2 = config.filters[filter_set]
    nominal_2 = filter_2
    if conjugate:
        filter_2 = conjugate_filter_pair(filter_1, config.pump)
    wavelengths, p = density if density is not None else signal_density(config)
    band = (float(wavelengths[0]), float(wavelengths[-1]))

    f_c, q1, q2 = pair_fractions(wavelengths, p, filter_1, filter_2, config.pump)
    effective = filter_1.effective_bandwidth or nominal_2.effective_bandwidth
    overlap = conjugate_overlap(filter_1, filter_2, config.pump, band)
    if effective is not None:
        # The quoted effective bandwidth calibrates the nominal pair; the same
        # factor carries over to its conjugate variant
        nominal_overlap = conjugate_overlap(filter_1, nominal_2, config.pump, band)
        if nominal_overlap > 0:
            f_c *= effective / nominal_overlap
            overlap *= effective / nominal_overlap
        # A pair reaching both arms also counts toward each arm's singles
        f_c = min(f_c, q1, q2)

    output_rate = generation_rate(config)
    splice_pump = db_to_transmission(losses.pmf_ppsf_splice_db)
    splice_photon = db_to_transmission(losses.ppsf_smf_splice_db)
    suppress_1, suppress_2 = (db_to_transmission(f.insertion_loss_db) for f in config.filters[PUMP_SUPPRESSION])
    internal_rate = output_rate / (splice_photon ** 2 * suppress_1 * suppress_2)

    arm_t = (float(db_to_transmission(filter_1.insertion_loss_db)), float(db_to_transmission(filter_2.insertion_loss_db)))
    background = rates.background_rate_per_mw * config.pump.power
    chain = _chain(config, output_rate, f_c, (q1, q2), arm_t, background)

    improved_pump = db_to_transmission(losses.improved_splice_db) / splice_pump
    improved_photon = (db_to_transmission(losses.improved_splice_db) / splice_photon) ** 2
    improved_rate = output_rate * improved_pump * improved_photon
    improved_chain = _chain(config, improved_rate, f_c, (q1, q2), arm_t, background)

    stages = [
        {"stage": "pmf_ppsf_splice", "loss_db": losses.pmf_ppsf_splice_db, "applies_to": "pump"},
        {"stage": "ppsf_smf_splice", "loss_db": losses.ppsf_smf_splice_db, "applies_to": "each photon"},
        {"stage": PUMP_SUPPRESSION, "loss_db": config.filters[PUMP_SUPPRESSION][0].insertion_loss_db,
         "applies_to": "each photon"},
        {"stage": f"{filter_set}_signal", "loss_db": filter_1.insertion_loss_db, "applies_to": "arm 1"},
        {"stage": f"{filter_set}_idler", "loss_db": filter_2.insertion_loss_db, "applies_to": "arm 2"},
    ]
    for k, detector in enumerate(config.detectors):
        loss = -10.0 * np.log10(detector.efficiency) if detector.efficiency > 0 else float("inf")
        stages.append({"stage": f"detector_{k + 1}_efficiency", "loss_db": float(loss), "applies_to": f"arm {k + 1}"})

    return RateBudget(
        generation_rate=output_rate,
        arm_transmissions=arm_t,
        detected_singles=chain["singles"],
        coincidence_rate=chain["coincidence_rate"],
        accidental_rate=chain["accidental_rate"],
        internal_generation_rate=float(internal_rate),
        in_band_fraction=f_c,
        singles_fractions=(q1, q2),
        live_fractions=chain["live"],
        background_rate=background,
        car=chain["car"],
        pairs_per_nm=chain["coincidence_rate"] / overlap if overlap > 0 else 0.0,
        filter_set=filter_set + ("+conjugate" if conjugate else ""),
        stages=stages,
        improved={
            "splice_loss_db": losses.improved_splice_db,
            "generation_rate": float(improved_rate),
            "coincidence_rate": improved_chain["coincidence_rate"],
            "car": improved_chain["car"],
        },
    )


def stream_inputs(config, budget: RateBudget) -> Tuple[float, Tuple[float, float], Tuple[float, float]]:
    """
    (pair_rate, arm_losses_db, background_rates) for simulate_streams that
    reproduce a budget: in-band pairs, filter losses, and every photon without a
    partner in the other arm treated as uncorrelated background.
    """
    output_rate = budget.generation_rate
    pair_rate = output_rate * budget.in_band_fraction
    arm_losses = tuple(-10.0 * np.log10(t) if t > 0 else 300.0 for t in budget.arm_transmissions)
    background = tuple(max(output_rate * (q - budget.in_band_fraction), 0.0) + budget.background_rate
                       for q in budget.singles_fractions)
    return pair_rate, arm_losses, background


@dataclass
class DriftModel:
    """
    Slow sinusoidal drift of the fiber temperature (and optionally the pump
    wavelength) over a long run.
    """
    temperature_amplitude: float = 0.3  # degC
    period: float = 36000.0  # s
    pump_wavelength_amplitude: float = 0.0  # nm
    phase: float = 0.0  # rad

    @classmethod
    def none(cls) -> "DriftModel":
        return cls(0.0, 36000.0, 0.0, 0.0)

    def offsets(self, t: float) -> Tuple[float, float]:
        s = np.sin(2.0 * np.pi * t / self.period + self.phase) if self.period > 0 else 0.0
        return self.temperature_amplitude * s, self.pump_wavelength_amplitude * s

    def apply(self, config, t: float):
        d_temp, d_pump = self.offsets(t)
        return replace(config,
                       ppsf=replace(config.ppsf, temperature=config.ppsf.temperature + d_temp),
                       pump=replace(config.pump, center_wavelength=config.pump.center_wavelength + d_pump))


def _counting_run(config, filter_set: str, conjugate: bool, duration: float, seed: int):
    budget = rate_budget(config, filter_set, conjugate)
    pair_rate, arm_losses, background = stream_inputs(config, budget)
    streams = simulate_streams(pair_rate, arm_losses, tuple(config.detectors), duration, seed, background)
    counting = config.counting
    hist = coincidence_histogram(streams[0], streams[1], counting.bin_width, counting.max_delay)
    details = car_details(hist, counting.coincidence_window, counting.accidental_window_offset,
                          counting.accidental_window_width)
    return budget, streams, hist, details


def _batch_task(args):
    config, index, start_time, duration, seed, drift, filter_set, conjugate, keep_streams = args
    if toolbox.shutdown_requested():
        return None
    drifted = drift.apply(config, start_time)
    budget, streams, hist, details = _counting_run(drifted, filter_set, conjugate, duration, seed)
    row = {
        "batch": index,
        "time_h": start_time / 3600.0,
        "temperature_c": drifted.ppsf.temperature,
        "pump_wavelength_nm": drifted.pump.center_wavelength,
        "coincidences": details["peak"],
        "accidentals": details["accidental_scaled"],
        "coincidences_per_min": details["peak"] * 60.0 / duration,
        "car": details["car"],
        "car_err": details["car_err"],
        "car_predicted": budget.car,
    }
    return row, (hist if keep_streams else None), (streams if keep_streams else None)


def simulate_car_batches(config, n_batches: int, batch_duration: float, drift: DriftModel,
                         filter_set: str = DWDM_PAIR, conjugate: bool = False):
    """
    CAR time series: batch i integrates `batch_duration` seconds starting at
    i * counting.batch_spacing and uses seed config.seed + i.

    Returns:
      (pd.DataFrame, CoincidenceHistogram, (TimeTagStream, TimeTagStream)):
      one row per batch, plus the histogram and streams of batch 0.
    """
    if n_batches < 1:
        raise InvalidParameterError(f"n_batches ≥ 1 violated (got {n_batches})")
    if not batch_duration > 0:
        raise InvalidParameterError(f"batch_duration > 0 violated (got {batch_duration})")
    spacing = max(config.counting.batch_spacing, batch_duration)
    args_list = [(config, i, i * spacing, batch_duration, config.seed + i, drift, filter_set, conjugate, i == 0)
                 for i in range(n_batches)]
    results = toolbox.run_tasks(_batch_task, args_list, NUM_CORES, "CAR batches")
    frame = pd.DataFrame([row for row, _, _ in results])
    _, first_hist, first_streams = results[0]
    return frame, first_hist, first_streams


def _sweep_task(args):
    config, power, duration, seed, filter_set = args
    if toolbox.shutdown_requested():
        return None
    powered = replace(config, pump=replace(config.pump, power=power))
    budget, _, _, details = _counting_run(powered, filter_set, False, duration, seed)
    return {
        "power_mw": power,
        "car": details["car"],
        "car_err": details["car_err"],
        "coincidence_rate": details["peak"] / duration,
        "car_predicted": budget.car,
        "coincidence_rate_predicted": budget.coincidence_rate,
    }


def sweep_frame(config, powers: List[float], filter_set: str = DWDM_PAIR,
                duration: Optional[float] = None) -> pd.DataFrame:
    """Simulated and predicted CAR and coincidence rate per pump power (point i uses seed + i)."""
    if len(powers) == 0:
        raise InvalidParameterError("powers must not be empty")
    if any(not p > 0 for p in powers):
        raise InvalidParameterError("powers > 0 violated")
    duration = config.counting.sweep_duration if duration is None else duration
    args_list = [(config, float(p), duration, config.seed + i, filter_set) for i, p in enumerate(powers)]
    return pd.DataFrame(toolbox.run_tasks(_sweep_task, args_list, NUM_CORES, "Power sweep"))


def car_vs_power_sweep(config, powers: List[float]) -> List[Tuple[float, float, float]]:
    """(power, CAR, coincidence rate) per pump power from simulated streams."""
    frame = sweep_frame(config, powers)
    return list(zip(frame["power_mw"], frame["car"], frame["coincidence_rate"]))


def export_histogram_csv(hist: CoincidenceHistogram, path: str) -> str:
    """Histogram as CSV (delay_ps, counts)."""
    return atomic_write_text(path, hist.to_frame().to_csv(index=False, float_format="%.9g"))


def log_budget(budget: RateBudget) -> None:
    tprint(f"Generation {budget.generation_rate:.4g} pairs/s, in-band fraction {budget.in_band_fraction:.4g}, "
           f"coincidences {budget.coincidence_rate * 60:.4g}/min, CAR {budget.car:.4g}")
