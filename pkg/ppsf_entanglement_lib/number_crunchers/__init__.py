from .errors import (
    ConfigError,
    InvalidParameterError,
    DomainError,
    InvalidStateError,
    NotMeasurableError,
    DegenerateStateError,
    NonInvertibleError,
    DegenerateDataError,
    InversionError,
    EmptySpectrumError,
)
from .spectral_model import (
    PumpParams,
    PpsfParams,
    SpectralGrid,
    JointSpectralAmplitude,
    quadrature_weights,
    degeneracy_wavelength,
    conjugate_wavelength,
    effective_degeneracy,
    phase_mismatch,
    compute_jsa,
    marginal_spectrum,
    fwhm,
    fit_gvd_coeff,
    jsa_frame,
    export_jsa_csv,
)
from .polarization_state import (
    BASIS_LABELS,
    PSI_PLUS,
    target_state,
    PolarizationDensityMatrix,
    project_to_psd,
    FilterSpec,
    apply_filters,
    reduce_to_polarization,
    concurrence,
    fidelity,
    purity,
    trace_distance,
    werner_state,
    density_matrix_to_json,
    density_matrix_from_json,
    density_matrix_frames,
)
from .tomography import (
    AnalyzerSetting,
    STANDARD_SETTINGS,
    waveplate,
    analyzer_state,
    projector,
    standard_16_settings,
    measurement_operators,
    measurement_matrix,
    MeasurementRecord,
    TomographyResult,
    simulate_record,
    linear_inversion,
    mle_reconstruct,
    bootstrap_distribution,
    bootstrap_errors,
    save_record_csv,
    load_record_csv,
)
from .photon_counting import (
    DetectorParams,
    TimeTagStream,
    CoincidenceHistogram,
    RateBudget,
    DriftModel,
    apply_dead_time,
    simulate_streams,
    coincidence_histogram,
    car,
    car_details,
    conjugate_filter_pair,
    conjugate_overlap,
    generation_rate,
    rate_budget,
    stream_inputs,
    simulate_car_batches,
    sweep_frame,
    car_vs_power_sweep,
    export_histogram_csv,
)
from .fiber_spectrometer import (
    DispersiveFiber,
    delay_of,
    delay_difference,
    simulate_spectrometer_run,
    reconstruct_spectrum,
    biphoton_density,
    spectrum_l1_error,
    export_spectrum_csv,
)
from .source_config import (
    PROFILE_VERSION,
    PROFILES,
    SourceConfig,
    paper_default_profile,
    lossless_profile,
    parse_config_text,
    load_config,
    config_to_dict,
    config_digest,
)
from .timetag_parser import (
    write_ttag,
    read_ttag,
)
from .logger import (
    is_logged,
    log_file,
    MANIFEST_FILE,
    remove_log,
)
from .toolbox import (
    tprint,
    hash_string_list,
    cpu_pct_to_cores,
    db_to_transmission,
    atomic_write_text,
    run_tasks,
)
from .run_statistics import (
    compute_detailed_stats,
    relative_std,
    print_stats,
)

__all__ = [
    # errors
    "ConfigError",
    "InvalidParameterError",
    "DomainError",
    "InvalidStateError",
    "NotMeasurableError",
    "DegenerateStateError",
    "NonInvertibleError",
    "DegenerateDataError",
    "InversionError",
    "EmptySpectrumError",
    # spectral_model
    "PumpParams",
    "PpsfParams",
    "SpectralGrid",
    "JointSpectralAmplitude",
    "quadrature_weights",
    "degeneracy_wavelength",
    "conjugate_wavelength",
    "effective_degeneracy",
    "phase_mismatch",
    "compute_jsa",
    "marginal_spectrum",
    "fwhm",
    "fit_gvd_coeff",
    "jsa_frame",
    "export_jsa_csv",
    # polarization_state
    "BASIS_LABELS",
    "PSI_PLUS",
    "target_state",
    "PolarizationDensityMatrix",
    "project_to_psd",
    "FilterSpec",
    "apply_filters",
    "reduce_to_polarization",
    "concurrence",
    "fidelity",
    "purity",
    "trace_distance",
    "werner_state",
    "density_matrix_to_json",
    "density_matrix_from_json",
    "density_matrix_frames",
    # tomography
    "AnalyzerSetting",
    "STANDARD_SETTINGS",
    "waveplate",
    "analyzer_state",
    "projector",
    "standard_16_settings",
    "measurement_operators",
    "measurement_matrix",
    "MeasurementRecord",
    "TomographyResult",
    "simulate_record",
    "linear_inversion",
    "mle_reconstruct",
    "bootstrap_distribution",
    "bootstrap_errors",
    "save_record_csv",
    "load_record_csv",
    # photon_counting
    "DetectorParams",
    "TimeTagStream",
    "CoincidenceHistogram",
    "RateBudget",
    "DriftModel",
    "apply_dead_time",
    "simulate_streams",
    "coincidence_histogram",
    "car",
    "car_details",
    "conjugate_filter_pair",
    "conjugate_overlap",
    "generation_rate",
    "rate_budget",
    "stream_inputs",
    "simulate_car_batches",
    "sweep_frame",
    "car_vs_power_sweep",
    "export_histogram_csv",
    # fiber_spectrometer
    "DispersiveFiber",
    "delay_of",
    "delay_difference",
    "simulate_spectrometer_run",
    "reconstruct_spectrum",
    "biphoton_density",
    "spectrum_l1_error",
    "export_spectrum_csv",
    # source_config
    "PROFILE_VERSION",
    "PROFILES",
    "SourceConfig",
    "paper_default_profile",
    "lossless_profile",
    "parse_config_text",
    "load_config",
    "config_to_dict",
    "config_digest",
    # timetag_parser
    "write_ttag",
    "read_ttag",
    # logger
    "is_logged",
    "log_file",
    "MANIFEST_FILE",
    "remove_log",
    # toolbox
    "tprint",
    "hash_string_list",
    "cpu_pct_to_cores",
    "db_to_transmission",
    "atomic_write_text",
    "run_tasks",
    # run_statistics
    "compute_detailed_stats",
    "relative_std",
    "print_stats",
]
