"""
SourceConfig: every parameter of a run, its built-in profiles, and the JSON
config file format.

A config file is a JSON object whose sections mirror SourceConfig. Sections
merge key by key over a profile ("paper-default" unless the file names another
one under "profile"); an empty file is the profile itself. Unknown keys are
errors. See docs/formats.md for the full key tree.
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, List, Optional, Tuple

from .errors import ConfigError
from .fiber_spectrometer import DispersiveFiber
from .photon_counting import DetectorParams
from .polarization_state import CL_SPLITTER, DWDM_PAIR, PUMP_SUPPRESSION, FilterSpec
from .spectral_model import PpsfParams, PumpParams, SpectralGrid
from .toolbox import hash_string_list

PROFILE_VERSION = "paper-default/1"

DEFAULT_PROFILE = "paper-default"

REQUIRED_FILTER_SETS = (CL_SPLITTER, DWDM_PAIR, PUMP_SUPPRESSION)


@dataclass
class GridParams:
    min_wavelength: float = 1465.0  # nm
    max_wavelength: float = 1665.0  # nm
    points: int = 512

    def validate(self) -> "GridParams":
        if not 0 < self.min_wavelength < self.max_wavelength:
            raise ValueError(f"0 < min_wavelength < max_wavelength violated (got {self.min_wavelength}, {self.max_wavelength})")
        if not self.points >= 8:
            raise ValueError(f"points ≥ 8 violated (got {self.points})")
        return self


@dataclass
class LossParams:
    pmf_ppsf_splice_db: float = 1.5
    ppsf_smf_splice_db: float = 1.5
    improved_splice_db: float = 0.5

    def validate(self) -> "LossParams":
        for f in fields(self):
            if not getattr(self, f.name) >= 0:
                raise ValueError(f"{f.name} ≥ 0 violated (got {getattr(self, f.name)})")
        return self


@dataclass
class RateParams:
    reference_pair_rate: float = 7.0e5  # pairs/s at the source output
    reference_power: float = 7.5  # mW
    max_power: float = 30.0  # mW, gives 2.8e6 pairs/s
    # Uncorrelated photons/s per mW reaching each arm; calibrated so the DWDM
    # pair shows a CAR near 2400 with 800/s dark counts
    background_rate_per_mw: float = 6500.0

    def validate(self) -> "RateParams":
        if not self.reference_pair_rate >= 0:
            raise ValueError(f"reference_pair_rate ≥ 0 violated (got {self.reference_pair_rate})")
        if not self.reference_power > 0:
            raise ValueError(f"reference_power > 0 violated (got {self.reference_power})")
        if not self.max_power > 0:
            raise ValueError(f"max_power > 0 violated (got {self.max_power})")
        if not self.background_rate_per_mw >= 0:
            raise ValueError(f"background_rate_per_mw ≥ 0 violated (got {self.background_rate_per_mw})")
        return self


@dataclass
class CountingParams:
    coincidence_window: float = 1e-9  # s
    bin_width: float = 100e-12  # s
    max_delay: float = 60e-9  # s
    accidental_window_offset: float = 30e-9  # s
    accidental_window_width: float = 40e-9  # s
    n_batches: int = 10
    batch_duration: float = 60.0  # s
    batch_spacing: float = 3600.0  # s between batch starts
    drift_temperature_amplitude: float = 0.3  # degC
    drift_period: float = 36000.0  # s
    drift_pump_amplitude: float = 0.0  # nm
    conjugate_filters: bool = False
    sweep_duration: float = 60.0  # s per power
    sweep_powers: List[float] = field(default_factory=lambda: [1.0, 2.0, 5.0, 7.5, 10.0, 20.0, 30.0])

    def validate(self) -> "CountingParams":
        for name in ("coincidence_window", "bin_width", "max_delay", "accidental_window_width",
                     "batch_duration", "sweep_duration", "drift_period"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} > 0 violated (got {getattr(self, name)})")
        if not self.n_batches >= 1:
            raise ValueError(f"n_batches ≥ 1 violated (got {self.n_batches})")
        if not self.batch_spacing >= 0:
            raise ValueError(f"batch_spacing ≥ 0 violated (got {self.batch_spacing})")
        if any(not p > 0 for p in self.sweep_powers):
            raise ValueError("sweep_powers > 0 violated")
        return self


@dataclass
class SpectrometerParams:
    beamsplitter_ratio: float = 0.5
    pair_rate: float = 5000.0  # pairs/s into the spool
    duration: float = 800.0  # s
    bin_width: float = 500e-12  # s
    max_delay: float = 100e-9  # s
    accidental_window_start: float = 80e-9  # s
    accidental_window_stop: float = 100e-9  # s
    band_min: float = 1465.0  # nm
    band_max: float = 1665.0  # nm
    smoothing_window: int = 15  # bins, odd
    smoothing_order: int = 2
    dither: bool = True
    export_jsa: bool = False

    def validate(self) -> "SpectrometerParams":
        if not 0.0 <= self.beamsplitter_ratio <= 1.0:
            raise ValueError(f"beamsplitter_ratio in [0,1] violated (got {self.beamsplitter_ratio})")
        for name in ("duration", "bin_width", "max_delay"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} > 0 violated (got {getattr(self, name)})")
        if not self.pair_rate >= 0:
            raise ValueError(f"pair_rate ≥ 0 violated (got {self.pair_rate})")
        if not self.band_min < self.band_max:
            raise ValueError(f"band_min < band_max violated (got {self.band_min}, {self.band_max})")
        if not self.accidental_window_start < self.accidental_window_stop:
            raise ValueError("accidental_window_start < accidental_window_stop violated")
        if self.smoothing_window % 2 == 0 or self.smoothing_window <= self.smoothing_order:
            raise ValueError(f"smoothing_window odd and > smoothing_order violated (got {self.smoothing_window})")
        return self


@dataclass
class TomographyParams:
    filter_set: str = CL_SPLITTER
    acquisition_time: float = 10.0  # s per setting
    bootstrap_resamples: int = 20
    angle_jitter: float = 0.0  # rad
    target_phase: float = 0.0  # rad
    subtract_accidentals: bool = False
    include_accidentals: bool = True

    def validate(self) -> "TomographyParams":
        if not self.acquisition_time > 0:
            raise ValueError(f"acquisition_time > 0 violated (got {self.acquisition_time})")
        if not self.bootstrap_resamples >= 0:
            raise ValueError(f"bootstrap_resamples ≥ 0 violated (got {self.bootstrap_resamples})")
        if not self.angle_jitter >= 0:
            raise ValueError(f"angle_jitter ≥ 0 violated (got {self.angle_jitter})")
        return self


@dataclass
class RuntimeParams:
    num_cores: int = 1
    cpu_pct: Optional[float] = None
    report_wall_time: bool = False

    def validate(self) -> "RuntimeParams":
        if not self.num_cores >= 1:
            raise ValueError(f"num_cores ≥ 1 violated (got {self.num_cores})")
        if self.cpu_pct is not None and not 0.0 <= self.cpu_pct <= 1.0:
            raise ValueError(f"cpu_pct in [0,1] violated (got {self.cpu_pct})")
        return self


def _paper_filters() -> Dict[str, Tuple[FilterSpec, FilterSpec]]:
    return {
        CL_SPLITTER: (
            FilterSpec([(1530.0, 1565.0, 1.0)], insertion_loss_db=0.5, edge_width=0.5),
            FilterSpec([(1565.0, 1615.0, 1.0)], insertion_loss_db=0.5, edge_width=0.5),
        ),
        # 3 dB bandwidth 1.1 nm, 0.85 nm effective; 1 dB and 2 dB insertion loss
        DWDM_PAIR: (
            FilterSpec([(1554.40, 1555.50, 1.0)], insertion_loss_db=1.0, edge_width=0.05, effective_bandwidth=0.85),
            FilterSpec([(1576.50, 1577.60, 1.0)], insertion_loss_db=2.0, edge_width=0.05, effective_bandwidth=0.85),
        ),
        PUMP_SUPPRESSION: (FilterSpec.all_pass(4.0), FilterSpec.all_pass(4.0)),
    }


@dataclass
class SourceConfig:
    seed: int = 20240
    pump: PumpParams = field(default_factory=PumpParams)
    ppsf: PpsfParams = field(default_factory=PpsfParams)
    grid: GridParams = field(default_factory=GridParams)
    filters: Dict[str, Tuple[FilterSpec, FilterSpec]] = field(default_factory=_paper_filters)
    losses: LossParams = field(default_factory=LossParams)
    fiber: DispersiveFiber = field(default_factory=DispersiveFiber)
    detectors: Tuple[DetectorParams, DetectorParams] = field(default_factory=lambda: (DetectorParams(), DetectorParams()))
    rates: RateParams = field(default_factory=RateParams)
    counting: CountingParams = field(default_factory=CountingParams)
    spectrometer: SpectrometerParams = field(default_factory=SpectrometerParams)
    tomography: TomographyParams = field(default_factory=TomographyParams)
    runtime: RuntimeParams = field(default_factory=RuntimeParams)
    profile: str = DEFAULT_PROFILE

    def spectral_grid(self) -> SpectralGrid:
        return SpectralGrid.uniform(self.grid.min_wavelength, self.grid.max_wavelength, self.grid.points)

    def validate(self) -> "SourceConfig":
        """
        Validates every section.

        Raises:
          ConfigError: Naming the section and the violated invariant, e.g. "pump: power ≥ 0 violated (got -1.0)".
        """
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed: nonnegative integer required (got {self.seed!r})")
        sections = [("pump", self.pump), ("ppsf", self.ppsf), ("grid", self.grid), ("losses", self.losses),
                    ("fiber", self.fiber), ("rates", self.rates), ("counting", self.counting),
                    ("spectrometer", self.spectrometer), ("tomography", self.tomography), ("runtime", self.runtime)]
        sections += [(f"detectors[{k}]", d) for k, d in enumerate(self.detectors)]
        for name, (signal, idler) in self.filters.items():
            sections += [(f"filters.{name}.signal", signal), (f"filters.{name}.idler", idler)]
        for name, section in sections:
            try:
                section.validate()
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{name}: {e}") from e

        if len(self.detectors) != 2:
            raise ConfigError(f"detectors: exactly two required (got {len(self.detectors)})")
        missing = [name for name in REQUIRED_FILTER_SETS if name not in self.filters]
        if missing:
            raise ConfigError(f"filters: missing required set(s) {', '.join(missing)}")
        if self.tomography.filter_set not in self.filters:
            raise ConfigError(f"tomography: unknown filter_set {self.tomography.filter_set!r}")
        return self


def paper_default_profile() -> SourceConfig:
    """The versioned default profile (PROFILE_VERSION)."""
    return SourceConfig()


def lossless_profile() -> SourceConfig:
    """No losses, no noise, ideal detectors; every filter set is all-pass."""
    ideal = DetectorParams(efficiency=1.0, dead_time=0.0, dark_rate=0.0, jitter_sigma=0.0)
    return SourceConfig(
        filters={name: (FilterSpec.all_pass(), FilterSpec.all_pass()) for name in REQUIRED_FILTER_SETS},
        losses=LossParams(0.0, 0.0, 0.0),
        detectors=(ideal, replace(ideal)),
        rates=RateParams(background_rate_per_mw=0.0),
        profile="lossless",
    )


PROFILES = {
    "paper-default": paper_default_profile,
    "lossless": lossless_profile,
}


def _coerce_value(old, new, default, path: str):
    """Checks `new` against the type of the value it replaces; ints are accepted for floats."""
    if new is None and default is None:
        return None
    if isinstance(old, bool):
        if isinstance(new, bool):
            return new
    elif isinstance(old, int):
        if isinstance(new, int) and not isinstance(new, bool):
            return new
    elif isinstance(old, float) or old is None:
        if isinstance(new, (int, float)) and not isinstance(new, bool):
            return float(new)
    elif isinstance(old, str):
        if isinstance(new, str):
            return new
    elif isinstance(old, (list, tuple)):
        if isinstance(new, list):
            return new
    else:
        return new
    expected = "number" if isinstance(old, float) or old is None else type(old).__name__
    raise ConfigError(f"{path}: expected {expected} (got {json.dumps(new)})")


def _merge_dataclass(base, values, path: str):
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: expected an object (got {type(values).__name__})")
    known = {f.name: f for f in fields(base)}
    for key in values:
        if key not in known:
            raise ConfigError(f"unknown key {path}.{key}")
    coerced = {key: _coerce_value(getattr(base, key), value, known[key].default, f"{path}.{key}")
               for key, value in values.items()}
    try:
        return replace(base, **coerced)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from e


_SECTIONS = ("pump", "ppsf", "grid", "losses", "fiber", "rates", "counting", "spectrometer", "tomography", "runtime")


def config_from_dict(data: dict, base: Optional[SourceConfig] = None) -> SourceConfig:
    """
    Merges a parsed config tree over `base` (default: the paper-default profile).
    The result is not validated.

    Raises:
      ConfigError: On unknown keys or values of the wrong shape.
    """
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object (got {type(data).__name__})")
    config = base if base is not None else paper_default_profile()
    updates = {}
    for key, value in data.items():
        if key in _SECTIONS:
            updates[key] = _merge_dataclass(getattr(config, key), value, key)
        elif key == "seed":
            updates["seed"] = value
        elif key == "profile":
            updates["profile"] = value
        elif key == "detectors":
            updates["detectors"] = _merge_detectors(config.detectors, value)
        elif key == "filters":
            updates["filters"] = _merge_filters(config.filters, value)
        else:
            raise ConfigError(f"unknown key {key}")
    return replace(config, **updates)


def _merge_detectors(base: Tuple[DetectorParams, DetectorParams], value) -> Tuple[DetectorParams, DetectorParams]:
    # One object applies to both detectors; a list sets them one by one
    if isinstance(value, dict):
        return tuple(_merge_dataclass(d, value, "detectors") for d in base)
    if isinstance(value, list) and len(value) == 2:
        return tuple(_merge_dataclass(d, v, f"detectors[{k}]") for k, (d, v) in enumerate(zip(base, value)))
    raise ConfigError("detectors: expected an object or a list of two objects")


def _merge_filters(base: Dict[str, Tuple[FilterSpec, FilterSpec]], value) -> Dict[str, Tuple[FilterSpec, FilterSpec]]:
    if not isinstance(value, dict):
        raise ConfigError("filters: expected an object of named filter sets")
    merged = dict(base)
    for name, arms in value.items():
        if not isinstance(arms, dict):
            raise ConfigError(f"filters.{name}: expected an object with 'signal' and 'idler'")
        for arm in arms:
            if arm not in ("signal", "idler"):
                raise ConfigError(f"unknown key filters.{name}.{arm}")
        signal, idler = merged.get(name, (FilterSpec(), FilterSpec()))
        if "signal" in arms:
            signal = _merge_dataclass(signal, arms["signal"], f"filters.{name}.signal")
        if "idler" in arms:
            idler = _merge_dataclass(idler, arms["idler"], f"filters.{name}.idler")
        merged[name] = (signal, idler)
    return merged


def parse_config_text(text: str, source: str = "<config>", profile: Optional[str] = None) -> SourceConfig:
    """
    Parses and validates config text. `profile` is used when the text does not name one.

    Raises:
      ConfigError: On JSON syntax errors (with line and column), unknown keys,
                   unknown profiles, or violated invariants.
    """
    if text.strip():
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{source}:{e.lineno}:{e.colno}: {e.msg}") from e
    else:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: config root must be an object")

    name = data.get("profile", profile or DEFAULT_PROFILE)
    if not isinstance(name, str) or name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r} (known: {', '.join(sorted(PROFILES))})")
    data = {k: v for k, v in data.items() if k != "profile"}
    return config_from_dict(data, PROFILES[name]()).validate()


def load_config(path: str, profile: Optional[str] = None) -> SourceConfig:
    """
    Loads a JSON config file over a built-in profile.

    Parameters:
      path (str): Config file; an empty file gives the profile unchanged.
      profile (str, optional): Base profile when the file does not name one.

    Returns:
      SourceConfig: validated config.

    Raises:
      ConfigError: See parse_config_text.
      OSError: If the file cannot be read.
    """
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parse_config_text(text, path, profile)


def config_to_dict(config: SourceConfig) -> dict:
    """JSON-ready tree of a config; parse_config_text(json.dumps(tree)) gives an equal config."""
    tree = {name: asdict(getattr(config, name)) for name in _SECTIONS}
    tree["seed"] = config.seed
    tree["profile"] = config.profile
    tree["detectors"] = [asdict(d) for d in config.detectors]
    tree["filters"] = {
        name: {"signal": _filter_dict(signal), "idler": _filter_dict(idler)}
        for name, (signal, idler) in sorted(config.filters.items())
    }
    return tree


def _filter_dict(spec: FilterSpec) -> dict:
    tree = asdict(spec)
    tree["passbands"] = [list(band) for band in spec.passbands]
    return tree


def config_digest(config: SourceConfig) -> str:
    """
    sha256 of the canonical config tree. Runtime settings (cores, wall-time
    reporting) do not change results and are left out.
    """
    tree = config_to_dict(config)
    tree.pop("runtime")
    canonical = json.dumps(tree, sort_keys=True, separators=(",", ":"))
    return hash_string_list([PROFILE_VERSION, canonical])
