####################################################################################
#
# About: A top-down view of what is going on
#
####################################################################################
"""
This program characterizes a simulated PPSF entangled-pair source end to end

1. It loads a SourceConfig: the built-in "paper-default" profile, optionally
overridden by a JSON file (see docs/formats.md).

2. It computes the joint spectral amplitude of the pairs and the polarization
state left after the C/L splitter, and prints how entangled that state is.

3. It runs the four experiments through the same functions the command line
uses (rate budget, tomography, CAR stability, fiber spectrometer). Each one
writes CSV/JSON/SVG files and a report.json into its own folder.

4. You can load the outputs with pandas for your own analysis. Examples in the
code and comments below show how to do so.
"""
####################################################################################
print("Starting up. Importing...")
import ppsf_entanglement_lib.config_and_parser as config_and_parser
from ppsf_entanglement_lib.number_crunchers import polarization_state, spectral_model
from ppsf_entanglement_lib.number_crunchers.source_config import load_config, paper_default_profile
from ppsf_entanglement_lib.number_crunchers.toolbox import tprint
import ppsf_entanglement_lib.number_crunchers.toolbox as toolbox
from dataclasses import replace
import os
import time
import pandas as pd

# what percent of the total number of cores to be utilized.
# Set to 0.0 to use only one core
CPU_PCT = 0.9

# Set to a JSON file to override the built-in profile, e.g. "source.json"
CONFIG_FILE = None

OUT_DIR = "example_out"

RUN_BUDGET = True
RUN_TOMOGRAPHY = True
RUN_CAR = True
RUN_SPECTRUM = False  # the slowest one: an 800 s acquisition at 5000 pairs/s


def main():

    # Column descriptions of car_timeseries.csv:
    # 'batch'               -> int     Batch number, 0-based
    # 'time_h'              -> float   Hours since the first batch started
    # 'temperature_c'       -> float   PPSF temperature during the batch (degC)
    # 'pump_wavelength_nm'  -> float   Pump center wavelength during the batch (nm)
    # 'coincidences'        -> int     Counts inside the coincidence window
    # 'accidentals'         -> float   Accidental floor scaled to the window width
    # 'coincidences_per_min'-> float   Coincidences normalized to one minute
    # 'car'                 -> float   Coincidence-to-accidental ratio (inf if no accidentals)
    # 'car_err'             -> float   Poisson error of car
    # 'car_predicted'       -> float   CAR from the analytic rate budget

    # Mark process start time
    process_start_time = time.time()

    ####################################################################################
    # Configuration
    ####################################################################################
    config = load_config(CONFIG_FILE) if CONFIG_FILE else paper_default_profile()
    config = replace(config, runtime=replace(config.runtime, num_cores=toolbox.cpu_pct_to_cores(CPU_PCT)))
    config.validate()

    ####################################################################################
    # The state the source emits
    ####################################################################################
    jsa = spectral_model.compute_jsa(config.ppsf, config.pump, config.spectral_grid())
    marginal = spectral_model.marginal_spectrum(jsa, "signal")
    tprint(f"Marginal FWHM: {spectral_model.fwhm(marginal['wavelength_nm'], marginal['intensity']):.1f} nm")

    unfiltered = polarization_state.reduce_to_polarization(jsa)
    signal_filter, idler_filter = config.filters["cl_splitter"]
    split = polarization_state.reduce_to_polarization(polarization_state.apply_filters(jsa, signal_filter, idler_filter))
    tprint(f"Concurrence without filters: {polarization_state.concurrence(unfiltered):.4f}")
    tprint(f"Concurrence after the C/L splitter: {polarization_state.concurrence(split):.4f}")

    # Example: the 4x4 density matrix as labeled DataFrames
    # ```
    # real, imag = polarization_state.density_matrix_frames(split)
    # print(real.loc["HV", "VH"])
    # ```

    ####################################################################################
    # Experiments
    ####################################################################################
    if RUN_BUDGET:
        report = config_and_parser.cmd_rate_budget(config, os.path.join(OUT_DIR, "budget"))
        tprint(f"Coincidences/min: {report.metrics['coincidences_per_min']['value']:.3g}")

    if RUN_TOMOGRAPHY:
        report = config_and_parser.cmd_tomography(config, os.path.join(OUT_DIR, "tomography"))
        concurrence = report.metrics["concurrence"]
        tprint(f"Reconstructed concurrence: {concurrence['value']:.4f} ± {concurrence['err'] or 0:.4f}")

    if RUN_CAR:
        car_dir = os.path.join(OUT_DIR, "car")
        config_and_parser.cmd_car_stability(config, 6, 60.0, config_and_parser.drift_from_config(config), car_dir)

        # Example: load the time series for your own analysis
        timeseries = pd.read_csv(os.path.join(car_dir, "car_timeseries.csv"))
        tprint("CAR per batch:", timeseries[["time_h", "temperature_c", "car"]])

    if RUN_SPECTRUM:
        report = config_and_parser.cmd_spectrum(config, os.path.join(OUT_DIR, "spectrum"))
        tprint(f"Spectrometer FWHM: {report.metrics['fwhm_nm']['value']:.1f} nm")

    process_time = time.time() - process_start_time
    tprint(f"Process time: {process_time:.2f} seconds.")

if __name__ == '__main__':
    main()
