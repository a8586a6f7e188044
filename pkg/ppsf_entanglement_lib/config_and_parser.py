"""
PPSF Entangled-Pair Source Experiments Module

This module reproduces the characterization of the fiber source by:
  1. Loading a SourceConfig (JSON over a built-in profile) and applying command-line overrides.
  2. Computing the joint spectral amplitude and the polarization state it leaves behind.
  3. Simulating the measurements: fiber-spectrometer histograms, tomography records
     and time-tagged coincidence streams, using multiprocessing for batches.
  4. Writing CSV/JSON results, SVG plots and a report.json per run, every data
     file logged in the output manifest.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.signal import savgol_filter

from .number_crunchers import (entanglement_plotters, fiber_spectrometer, logger, photon_counting,
                               polarization_state, run_statistics, spectral_model, timetag_parser, tomography,
                               toolbox)
from .number_crunchers.errors import ConfigError, EmptySpectrumError
from .number_crunchers.polarization_state import CL_SPLITTER, DWDM_PAIR
from .number_crunchers.source_config import (PROFILE_VERSION, SourceConfig, config_digest, load_config,
                                             parse_config_text)
from .number_crunchers.toolbox import atomic_write_text, tprint

SOFTWARE_VERSION = "0.1.0"

# Coincidences per minute measured with the DWDM pair at 7.5 mW
REPORTED_COINCIDENCES_PER_MIN = 1.1e4

# Detected pairs per nm per second the stock budget should exceed
REPORTED_PAIRS_PER_NM = 200.0

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_IO = 4


def _json_number(value):
    if value is None:
        return None
    value = float(value)
    if np.isfinite(value):
        return value
    return "inf" if value > 0 else ("-inf" if value < 0 else "nan")


@dataclass
class RunReport:
    """
    Summary of one command: what ran, on which config, what it wrote and
    the headline numbers with the modules that produced them.
    """
    command: str
    config_digest: str
    seed: int
    profile_version: str = PROFILE_VERSION
    software_version: str = SOFTWARE_VERSION
    wall_time_s: float = 0.0
    outputs: Dict[str, Dict[str, str]] = field(default_factory=dict)
    metrics: Dict[str, Dict] = field(default_factory=dict)

    def add_output(self, out_dir: str, name: str) -> None:
        digest = logger.log_file(out_dir, name)
        self.outputs[name] = {"path": name, "sha256": digest}

    def add_metric(self, name: str, value, err=None, unit: str = "", provenance: Optional[List[str]] = None) -> None:
        self.metrics[name] = {"value": value, "err": err, "unit": unit, "provenance": list(provenance or [])}

    def to_dict(self, include_wall_time: bool = False) -> dict:
        metrics = {
            name: {**entry, "value": _json_number(entry["value"]) if not isinstance(entry["value"], (bool, str))
                   else entry["value"], "err": _json_number(entry["err"])}
            for name, entry in self.metrics.items()
        }
        tree = {
            "command": self.command,
            "config_digest": self.config_digest,
            "profile_version": self.profile_version,
            "software_version": self.software_version,
            "seed": self.seed,
            "outputs": self.outputs,
            "metrics": metrics,
        }
        if include_wall_time:
            tree["wall_time_s"] = self.wall_time_s
        return tree

    def write(self, out_dir: str, include_wall_time: bool = False) -> str:
        path = os.path.join(out_dir, "report.json")
        atomic_write_text(path, json.dumps(self.to_dict(include_wall_time), indent=2, sort_keys=True) + "\n")
        return path


def _prepare(config: SourceConfig, out_dir: str, command: str) -> RunReport:
    """Validate, size the worker pools and create out_dir before any compute."""
    config.validate()
    runtime = config.runtime
    cores = toolbox.cpu_pct_to_cores(runtime.cpu_pct) if runtime.cpu_pct is not None else runtime.num_cores
    photon_counting.NUM_CORES = cores
    tomography.NUM_CORES = cores
    os.makedirs(out_dir, exist_ok=True)
    tprint(f"Running '{command}' with profile {config.profile}, seed {config.seed}, {cores} core(s)")
    return RunReport(command=command, config_digest=config_digest(config), seed=config.seed)


def _finish(report: RunReport, config: SourceConfig, out_dir: str, started: float) -> RunReport:
    report.wall_time_s = time.perf_counter() - started
    report.write(out_dir, config.runtime.report_wall_time)
    tprint(f"'{report.command}' finished in {report.wall_time_s:.1f} s; report written to {out_dir}")
    return report


def _write_csv(report: RunReport, out_dir: str, name: str, frame: pd.DataFrame, index: bool = False) -> None:
    atomic_write_text(os.path.join(out_dir, name), frame.to_csv(index=index, float_format="%.9g"))
    report.add_output(out_dir, name)


def _write_json(report: RunReport, out_dir: str, name: str, tree: dict) -> None:
    atomic_write_text(os.path.join(out_dir, name), json.dumps(tree, indent=2, sort_keys=True) + "\n")
    report.add_output(out_dir, name)


def cmd_spectrum(config: SourceConfig, out_dir: str) -> RunReport:
    """
    Biphoton spectrum through the dispersive-fiber spectrometer.

    Runs compute_jsa, simulate_spectrometer_run and reconstruct_spectrum, then
    measures the FWHM on a Savitzky-Golay smoothed curve.

    Outputs: spectrum.csv, spectrum.svg, report.json (and jsa.csv with spectrometer.export_jsa).

    Raises:
      EmptySpectrumError: With zero pump power or when nothing is left after subtraction.
    """
    started = time.perf_counter()
    report = _prepare(config, out_dir, "spectrum")
    params = config.spectrometer
    if not config.pump.power > 0:
        raise EmptySpectrumError("pump power is zero: no pairs to measure")

    tprint("Computing joint spectral amplitude")
    jsa = spectral_model.compute_jsa(config.ppsf, config.pump, config.spectral_grid())
    if params.export_jsa:
        spectral_model.export_jsa_csv(jsa, os.path.join(out_dir, "jsa.csv"))
        report.add_output(out_dir, "jsa.csv")

    tprint("Simulating spectrometer acquisition")
    hist = fiber_spectrometer.simulate_spectrometer_run(
        jsa, config.fiber, params.beamsplitter_ratio, config.detectors, params.duration, config.seed,
        pair_rate=params.pair_rate, bin_width=params.bin_width, max_delay=params.max_delay, dither=params.dither)

    spectrum = fiber_spectrometer.reconstruct_spectrum(
        hist, config.fiber, config.pump, (params.accidental_window_start, params.accidental_window_stop),
        band=(params.band_min, params.band_max))
    intensity = spectrum["intensity"].to_numpy()
    if not intensity.max(initial=0.0) > 0:
        raise EmptySpectrumError("reconstructed spectrum is empty after accidental subtraction")
    window = min(params.smoothing_window, intensity.size - (1 - intensity.size % 2))
    smoothed = np.clip(savgol_filter(intensity, window, params.smoothing_order), 0.0, None)
    width = spectral_model.fwhm(spectrum["wavelength_nm"], smoothed)

    truth = fiber_spectrometer.biphoton_density(jsa)
    model = spectral_model.marginal_spectrum(jsa, "signal")
    model_width = spectral_model.fwhm(model["wavelength_nm"], model["intensity"])
    l1 = fiber_spectrometer.spectrum_l1_error(spectrum, truth)
    tprint(f"Reconstructed FWHM {width:.2f} nm (model {model_width:.2f} nm), L1 error {l1:.4f}")

    fiber_spectrometer.export_spectrum_csv(spectrum, os.path.join(out_dir, "spectrum.csv"))
    report.add_output(out_dir, "spectrum.csv")
    entanglement_plotters.plot_spectrum(spectrum, os.path.join(out_dir, "spectrum.svg"), truth, smoothed, width)
    report.add_output(out_dir, "spectrum.svg")

    chain = ["spectral_model.compute_jsa", "fiber_spectrometer.simulate_spectrometer_run",
             "fiber_spectrometer.reconstruct_spectrum"]
    report.add_metric("fwhm_nm", width, None, "nm", chain + ["scipy.signal.savgol_filter", "spectral_model.fwhm"])
    report.add_metric("model_fwhm_nm", model_width, None, "nm", ["spectral_model.compute_jsa", "spectral_model.fwhm"])
    report.add_metric("l1_error", l1, None, "", chain + ["fiber_spectrometer.spectrum_l1_error"])
    report.add_metric("coincidences", int(hist.counts.sum()), None, "counts",
                      ["fiber_spectrometer.simulate_spectrometer_run"])
    return _finish(report, config, out_dir, started)


def tomography_inputs(config: SourceConfig):
    """
    Filtered polarization state and the rates reaching the analyzers.

    Returns:
      (PolarizationDensityMatrix, float, (float, float), (DetectorParams, DetectorParams)):
      state, pair rate, unpaired photons/s per arm, detectors with efficiency
      scaled by their dead-time live fraction.
    """
    filter_set = config.tomography.filter_set
    signal_filter, idler_filter = config.filters[filter_set]
    jsa = spectral_model.compute_jsa(config.ppsf, config.pump, config.spectral_grid())
    filtered = polarization_state.apply_filters(jsa, signal_filter, idler_filter)
    rho = polarization_state.reduce_to_polarization(filtered)

    budget = photon_counting.rate_budget(config, filter_set)
    t1, t2 = budget.arm_transmissions
    pair_rate = budget.generation_rate * budget.in_band_fraction * t1 * t2
    extra = tuple(
        (max(budget.generation_rate * (q - budget.in_band_fraction), 0.0) + budget.background_rate) * t
        for q, t in zip(budget.singles_fractions, budget.arm_transmissions))
    detectors = tuple(replace(d, efficiency=d.efficiency * live)
                      for d, live in zip(config.detectors, budget.live_fractions))
    return rho, pair_rate, extra, detectors


def cmd_tomography(config: SourceConfig, out_dir: str, record_path: Optional[str] = None) -> RunReport:
    """
    Polarization tomography of the C/L-split pairs.

    Filtered JSA -> reduced state -> simulated record (or the record at
    `record_path`) -> MLE -> bootstrap error bars.

    Outputs: tomography_record.csv, rho_real.csv, rho_imag.csv, rho.json,
    rho_real.svg, rho_imag.svg, report.json.
    """
    started = time.perf_counter()
    report = _prepare(config, out_dir, "tomography")
    params = config.tomography
    target = polarization_state.target_state(params.target_phase)
    window = config.counting.coincidence_window

    rho_model, pair_rate, extra, detectors = tomography_inputs(config)
    model_concurrence = polarization_state.concurrence(rho_model)
    model_fidelity = polarization_state.fidelity(rho_model, target)
    tprint(f"Model state: concurrence {model_concurrence:.4f}, fidelity {model_fidelity:.4f}, "
           f"{pair_rate:.4g} pairs/s at the analyzers")

    if record_path is not None:
        tprint(f"Reconstructing stored record {record_path}")
        record = tomography.load_record_csv(record_path, window)
    else:
        record = tomography.simulate_record(
            rho_model, tomography.standard_16_settings(), pair_rate, detectors, params.acquisition_time,
            config.seed, window, extra, params.include_accidentals, params.angle_jitter)
    tomography.save_record_csv(record, os.path.join(out_dir, "tomography_record.csv"))
    report.add_output(out_dir, "tomography_record.csv")

    result = tomography.mle_reconstruct(record, subtract_accidentals=params.subtract_accidentals, target=target)
    tprint(f"MLE converged={result.converged} ({result.stop_reason}) after {result.iterations} iterations")
    concurrence_err = fidelity_err = None
    if params.bootstrap_resamples >= 2:
        c_draws, f_draws = tomography.bootstrap_distribution(
            record, params.bootstrap_resamples, config.seed + 1, target, params.subtract_accidentals)
        concurrence_err = float(np.std(c_draws, ddof=1))
        fidelity_err = float(np.std(f_draws, ddof=1))
        run_statistics.print_stats(run_statistics.compute_detailed_stats(
            {"bootstrap_concurrence": c_draws, "bootstrap_fidelity": f_draws}))
    result.concurrence_err, result.fidelity_err = concurrence_err, fidelity_err

    real, imag = polarization_state.density_matrix_frames(result.rho_mle)
    _write_csv(report, out_dir, "rho_real.csv", real, index=True)
    _write_csv(report, out_dir, "rho_imag.csv", imag, index=True)
    _write_json(report, out_dir, "rho.json", polarization_state.density_matrix_to_json(result.rho_mle))
    for part in ("real", "imag"):
        name = f"rho_{part}.svg"
        entanglement_plotters.plot_density_matrix(result.rho_mle, os.path.join(out_dir, name), part)
        report.add_output(out_dir, name)

    chain = ["polarization_state.reduce_to_polarization", "tomography.simulate_record", "tomography.mle_reconstruct"]
    boot = ["tomography.bootstrap_distribution"]
    report.add_metric("concurrence", result.concurrence, concurrence_err, "", chain + boot)
    report.add_metric("fidelity", result.fidelity, fidelity_err, "", chain + boot)
    report.add_metric("purity", result.purity, None, "", chain)
    report.add_metric("model_concurrence", model_concurrence, None, "", chain[:1])
    report.add_metric("model_fidelity", model_fidelity, None, "", chain[:1])
    report.add_metric("log_likelihood", result.log_likelihood, None, "", chain)
    report.add_metric("mle_iterations", result.iterations, None, "", chain[-1:])
    tprint(f"Concurrence {result.concurrence:.4f} ± {concurrence_err or 0:.4f}, "
           f"fidelity {result.fidelity:.4f} ± {fidelity_err or 0:.4f}")
    return _finish(report, config, out_dir, started)


def drift_from_config(config: SourceConfig) -> photon_counting.DriftModel:
    counting = config.counting
    return photon_counting.DriftModel(counting.drift_temperature_amplitude, counting.drift_period,
                                      counting.drift_pump_amplitude)


def cmd_car_stability(config: SourceConfig, n_batches: int, batch_duration: float,
                      drift_model: photon_counting.DriftModel, out_dir: str) -> RunReport:
    """
    CAR time series over a long run with slow temperature drift.

    Outputs: car_timeseries.csv, car.svg, histogram.csv, histogram.svg and
    batch.ttag for the first batch, report.json.
    """
    started = time.perf_counter()
    report = _prepare(config, out_dir, "car")
    counting = config.counting
    frame, hist, streams = photon_counting.simulate_car_batches(
        config, n_batches, batch_duration, drift_model, DWDM_PAIR, counting.conjugate_filters)

    _write_csv(report, out_dir, "car_timeseries.csv", frame)
    entanglement_plotters.plot_car_timeseries(frame, os.path.join(out_dir, "car.svg"))
    report.add_output(out_dir, "car.svg")
    photon_counting.export_histogram_csv(hist, os.path.join(out_dir, "histogram.csv"))
    report.add_output(out_dir, "histogram.csv")
    entanglement_plotters.plot_histogram(hist, os.path.join(out_dir, "histogram.svg"))
    report.add_output(out_dir, "histogram.svg")
    timetag_parser.write_ttag(os.path.join(out_dir, "batch.ttag"), streams)
    report.add_output(out_dir, "batch.ttag")

    stats = run_statistics.compute_detailed_stats({"car": frame["car"], "coincidences_per_min": frame["coincidences_per_min"]})
    run_statistics.print_stats(stats)
    car_values = frame["car"].to_numpy()
    finite = car_values[np.isfinite(car_values)]
    chain = ["photon_counting.simulate_streams", "photon_counting.coincidence_histogram", "photon_counting.car"]
    report.add_metric("car_mean", float(np.mean(finite)) if finite.size else float("inf"),
                      float(np.std(finite, ddof=1)) if finite.size > 1 else None, "", chain)
    report.add_metric("car_relative_std", run_statistics.relative_std(car_values), None, "",
                      chain + ["run_statistics.relative_std"])
    report.add_metric("coincidences_per_min", float(frame["coincidences_per_min"].mean()),
                      float(frame["coincidences_per_min"].std(ddof=1)) if len(frame) > 1 else None, "1/min", chain[:2])
    report.add_metric("car_predicted", float(frame["car_predicted"].iloc[0]), None, "", ["photon_counting.rate_budget"])
    report.add_metric("n_batches", int(len(frame)), None, "", ["photon_counting.simulate_car_batches"])
    return _finish(report, config, out_dir, started)


def _budget_tree(budget: photon_counting.RateBudget) -> dict:
    return {
        "generation_rate": budget.generation_rate,
        "internal_generation_rate": budget.internal_generation_rate,
        "in_band_fraction": budget.in_band_fraction,
        "singles_fractions": list(budget.singles_fractions),
        "arm_transmissions": list(budget.arm_transmissions),
        "live_fractions": list(budget.live_fractions),
        "background_rate": budget.background_rate,
        "detected_singles": list(budget.detected_singles),
        "coincidence_rate": budget.coincidence_rate,
        "coincidences_per_min": budget.coincidence_rate * 60.0,
        "accidental_rate": budget.accidental_rate,
        "car": _json_number(budget.car),
        "pairs_per_nm": budget.pairs_per_nm,
        "improved_splices": {k: _json_number(v) for k, v in budget.improved.items()},
    }


def cmd_rate_budget(config: SourceConfig, out_dir: str) -> RunReport:
    """
    Loss ledger and rates from the source output to the detectors.

    budget.json lists every loss stage, the rates for the DWDM pair (stock
    and conjugate), the C/L splitter, the maximum-power generation rate, and
    consistency flags against the measured coincidence and spectral-density figures.
    """
    started = time.perf_counter()
    report = _prepare(config, out_dir, "budget")
    density = photon_counting.signal_density(config)
    stock = photon_counting.rate_budget(config, DWDM_PAIR, density=density)
    conjugate = photon_counting.rate_budget(config, DWDM_PAIR, conjugate=True, density=density)
    splitter = photon_counting.rate_budget(config, CL_SPLITTER, density=density)
    max_rate = photon_counting.generation_rate(config, config.rates.max_power)
    for budget in (stock, conjugate, splitter):
        photon_counting.log_budget(budget)

    per_min = stock.coincidence_rate * 60.0
    tree = {
        "pump_power_mw": config.pump.power,
        "generation_rate": stock.generation_rate,
        "internal_generation_rate": stock.internal_generation_rate,
        "max_power_mw": config.rates.max_power,
        "max_power_generation_rate": max_rate,
        "stages": stock.stages,
        "filter_sets": {
            stock.filter_set: _budget_tree(stock),
            conjugate.filter_set: _budget_tree(conjugate),
            splitter.filter_set: _budget_tree(splitter),
        },
        "consistency": {
            "coincidences_per_min": per_min,
            "reported_coincidences_per_min": REPORTED_COINCIDENCES_PER_MIN,
            "within_factor_2": bool(0.5 <= per_min / REPORTED_COINCIDENCES_PER_MIN <= 2.0),
            "pairs_per_nm": stock.pairs_per_nm,
            "exceeds_pairs_per_nm": bool(stock.pairs_per_nm > REPORTED_PAIRS_PER_NM),
            "conjugate_car_gain": _json_number(conjugate.car / stock.car) if stock.car > 0 else None,
        },
    }
    _write_json(report, out_dir, "budget.json", tree)

    provenance = ["photon_counting.rate_budget"]
    report.add_metric("generation_rate", stock.generation_rate, None, "pairs/s", provenance)
    report.add_metric("max_power_generation_rate", max_rate, None, "pairs/s", ["photon_counting.generation_rate"])
    report.add_metric("coincidences_per_min", per_min, None, "1/min", provenance)
    report.add_metric("pairs_per_nm", stock.pairs_per_nm, None, "pairs/nm/s", provenance)
    report.add_metric("car_dwdm", stock.car, None, "", provenance)
    report.add_metric("car_conjugate", conjugate.car, None, "", provenance + ["photon_counting.conjugate_filter_pair"])
    report.add_metric("cl_pair_rate", splitter.coincidence_rate, None, "1/s", provenance)
    return _finish(report, config, out_dir, started)


def cmd_sweep(config: SourceConfig, powers: List[float], out_dir: str) -> RunReport:
    """
    CAR and coincidence rate against pump power, simulated next to the budget prediction.

    Outputs: sweep.csv, sweep.svg, report.json.
    """
    started = time.perf_counter()
    report = _prepare(config, out_dir, "sweep")
    frame = photon_counting.sweep_frame(config, list(powers))
    _write_csv(report, out_dir, "sweep.csv", frame)
    entanglement_plotters.plot_sweep(frame, os.path.join(out_dir, "sweep.svg"))
    report.add_output(out_dir, "sweep.svg")

    chain = ["photon_counting.simulate_streams", "photon_counting.car"]
    for _, row in frame.iterrows():
        report.add_metric(f"car_at_{row['power_mw']:g}mw", row["car"], row["car_err"], "", chain)
    report.add_metric("points", int(len(frame)), None, "", ["photon_counting.sweep_frame"])
    return _finish(report, config, out_dir, started)


def _parse_powers(text: str) -> List[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"powers must be comma-separated numbers (got {text!r})") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppsf_entanglement",
                                     description="Simulate and analyze a broadband fiber source of polarization-entangled pairs.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (default: built-in profile)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--profile", help="base profile: paper-default or lossless")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--power", type=float, help="pump power in mW")
    common.add_argument("--cores", type=int, help="worker processes for batches and resamples")

    sub = parser.add_subparsers(dest="command", required=True)
    spectrum = sub.add_parser("spectrum", parents=[common], help="biphoton spectrum via the fiber spectrometer")
    spectrum.add_argument("--duration", type=float, help="acquisition time in s")
    spectrum.add_argument("--export-jsa", action="store_true", help="also write jsa.csv")

    tomo = sub.add_parser("tomography", parents=[common], help="polarization tomography of C/L-split pairs")
    tomo.add_argument("--no-accidentals", action="store_true", help="simulate without accidental coincidences")
    tomo.add_argument("--subtract-accidentals", action="store_true", help="subtract the accidental floor before MLE")
    tomo.add_argument("--target-phase", type=float, help="phase of the target state in rad")
    tomo.add_argument("--record", help="reconstruct this record CSV instead of simulating one")

    car = sub.add_parser("car", parents=[common], help="CAR stability over a long run")
    car.add_argument("--batches", type=int, help="number of batches")
    car.add_argument("--duration", type=float, help="seconds per batch")
    car.add_argument("--conjugate-filters", action="store_true", help="use the conjugate image of the signal DWDM")
    car.add_argument("--no-drift", action="store_true", help="hold temperature and pump constant")

    sub.add_parser("budget", parents=[common], help="loss ledger and rate budget")

    sweep = sub.add_parser("sweep", parents=[common], help="CAR and rate against pump power")
    sweep.add_argument("--powers", type=_parse_powers, help="comma-separated pump powers in mW")
    sweep.add_argument("--duration", type=float, help="seconds per power")
    return parser


def apply_overrides(config: SourceConfig, args: argparse.Namespace) -> SourceConfig:
    """Command-line flags on top of the loaded config; the result is validated again."""
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.power is not None:
        config = replace(config, pump=replace(config.pump, power=args.power))
    if args.cores is not None:
        config = replace(config, runtime=replace(config.runtime, num_cores=args.cores, cpu_pct=None))

    duration = getattr(args, "duration", None)
    if args.command == "spectrum":
        spectrometer = config.spectrometer
        if duration is not None:
            spectrometer = replace(spectrometer, duration=duration)
        if args.export_jsa:
            spectrometer = replace(spectrometer, export_jsa=True)
        config = replace(config, spectrometer=spectrometer)
    elif args.command == "tomography":
        params = config.tomography
        if args.no_accidentals:
            params = replace(params, include_accidentals=False)
        if args.subtract_accidentals:
            params = replace(params, subtract_accidentals=True)
        if args.target_phase is not None:
            params = replace(params, target_phase=args.target_phase)
        config = replace(config, tomography=params)
    elif args.command == "car":
        counting = config.counting
        if args.batches is not None:
            counting = replace(counting, n_batches=args.batches)
        if duration is not None:
            counting = replace(counting, batch_duration=duration)
        if args.conjugate_filters:
            counting = replace(counting, conjugate_filters=True)
        if args.no_drift:
            counting = replace(counting, drift_temperature_amplitude=0.0, drift_pump_amplitude=0.0)
        config = replace(config, counting=counting)
    elif args.command == "sweep":
        counting = config.counting
        if args.powers:
            counting = replace(counting, sweep_powers=args.powers)
        if duration is not None:
            counting = replace(counting, sweep_duration=duration)
        config = replace(config, counting=counting)
    return config.validate()


def run_command(config: SourceConfig, args: argparse.Namespace) -> RunReport:
    if args.command == "spectrum":
        return cmd_spectrum(config, args.out)
    if args.command == "tomography":
        return cmd_tomography(config, args.out, args.record)
    if args.command == "car":
        return cmd_car_stability(config, config.counting.n_batches, config.counting.batch_duration,
                                 drift_from_config(config), args.out)
    if args.command == "budget":
        return cmd_rate_budget(config, args.out)
    return cmd_sweep(config, config.counting.sweep_powers, args.out)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Command-line entry point.

    Returns:
      int: 0 success, 2 config error, 3 runtime or physics error, 4 I/O error.
    """
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            config = load_config(args.config, args.profile)
        else:
            config = parse_config_text("", "<built-in>", args.profile)
        config = apply_overrides(config, args)
        run_command(config, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK
