"""
Two-qubit polarization tomography with waveplate analyzers.

Each arm is analyzed by light -> HWP(h) -> QWP(q) -> polarizer transmitting H.
Waveplates are Jones matrices W(theta, delta) = R(-theta) diag(1, e^{i delta}) R(theta)
with R(theta) = [[cos, sin], [-sin, cos]], angles from the H axis, delta = pi for
the HWP and pi/2 for the QWP. The analyzed state is therefore
|v> = W_hwp(h)^dagger W_qwp(q)^dagger |H>.

Standard settings (q, h):
  H = (0, 0)    V = (0, 45 deg)    D = (0, 22.5 deg)    R = (45 deg, 22.5 deg)
and the 16 pairs are ordered {H,V,D,R} x {H,V,D,R}, signal first.

Reconstruction:
  - linear_inversion: least squares on the Born-rule equations, Hermitized and
    trace-normalized, PSD flag set honestly
  - mle_reconstruct: rho = T^dagger T / tr with lower-triangular T, Poisson
    likelihood maximized by gradient ascent (Barzilai-Borwein step, Armijo
    backtracking, so the likelihood never decreases)
  - bootstrap_errors: Poisson resampling, resample i uses seed base + i
"""

import re
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from . import toolbox
from .errors import DegenerateDataError, InvalidParameterError, NonInvertibleError
from .photon_counting import DetectorParams
from .polarization_state import PSI_PLUS, PolarizationDensityMatrix, concurrence, fidelity, project_to_psd, purity
from .toolbox import atomic_write_text

# Worker processes for bootstrap resampling; set by the command layer
NUM_CORES = 1

MLE_TOLERANCE = 1e-8
MLE_MAX_ITERATIONS = 10_000
_ARMIJO_C = 1e-4
_MIN_STEP = 1e-20
_CHOLESKY_REGULARIZATION = 1e-6


@dataclass(frozen=True)
class AnalyzerSetting:
    qwp_angle: float  # rad
    hwp_angle: float  # rad

    def __post_init__(self):
        if not (np.isfinite(self.qwp_angle) and np.isfinite(self.hwp_angle)):
            raise InvalidParameterError(f"analyzer angles must be finite (got {self.qwp_angle}, {self.hwp_angle})")


STANDARD_SETTINGS = {
    "H": AnalyzerSetting(0.0, 0.0),
    "V": AnalyzerSetting(0.0, np.pi / 4),
    "D": AnalyzerSetting(0.0, np.pi / 8),
    "R": AnalyzerSetting(np.pi / 4, np.pi / 8),
}
STANDARD_ORDER = "HVDR"


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]], dtype=complex)


def waveplate(theta: float, retardance: float) -> np.ndarray:
    """Jones matrix of a waveplate with its fast axis at `theta` from H."""
    return _rotation(-theta) @ np.diag([1.0, np.exp(1j * retardance)]) @ _rotation(theta)


def analyzer_state(setting: AnalyzerSetting) -> np.ndarray:
    """Polarization state transmitted with unit probability by the analyzer."""
    hwp = waveplate(setting.hwp_angle, np.pi)
    qwp = waveplate(setting.qwp_angle, np.pi / 2)
    return hwp.conj().T @ qwp.conj().T @ np.array([1.0, 0.0], dtype=complex)


def projector(setting: AnalyzerSetting) -> np.ndarray:
    """
    2x2 projector |v><v| of one analyzer setting.

    Example:
      >>> np.round(projector(STANDARD_SETTINGS["H"]).real, 12)
      array([[1., 0.],
             [0., 0.]])
    """
    v = analyzer_state(setting)
    return np.outer(v, v.conj())


def standard_16_settings() -> List[Tuple[AnalyzerSetting, AnalyzerSetting]]:
    """(signal, idler) analyzer pairs in the order {H,V,D,R} x {H,V,D,R}."""
    return [(STANDARD_SETTINGS[a], STANDARD_SETTINGS[b]) for a in STANDARD_ORDER for b in STANDARD_ORDER]


def measurement_operators(settings: Sequence[Tuple[AnalyzerSetting, AnalyzerSetting]]) -> np.ndarray:
    """Two-photon projectors P_s (x) P_i, shape (n, 4, 4)."""
    return np.array([np.kron(projector(s), projector(i)) for s, i in settings])


def measurement_matrix(settings: Sequence[Tuple[AnalyzerSetting, AnalyzerSetting]]) -> np.ndarray:
    """
    Rows vec(M_k^T) so that measurement_matrix @ vec(rho) = tr(rho M_k), with
    row-major vectorization.
    """
    return np.array([m.T.ravel() for m in measurement_operators(settings)])


@dataclass(eq=False)
class MeasurementRecord:
    settings: List[Tuple[AnalyzerSetting, AnalyzerSetting]]
    counts: np.ndarray
    acquisition_time: float  # s per setting
    singles: np.ndarray  # shape (n, 2): signal, idler counts per setting
    coincidence_window: float = 1e-9  # s, used for the accidental estimate

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        self.singles = np.asarray(self.singles).reshape(len(self.counts), 2) if len(self.counts) else np.zeros((0, 2))
        if len(self.settings) != len(self.counts):
            raise InvalidParameterError(f"{len(self.settings)} settings but {len(self.counts)} counts")
        if np.any(self.counts < 0) or np.any(self.singles < 0):
            raise InvalidParameterError("counts ≥ 0 violated")
        if not self.acquisition_time > 0:
            raise InvalidParameterError(f"acquisition_time > 0 violated (got {self.acquisition_time})")

    def accidental_estimate(self) -> np.ndarray:
        """Expected accidental coincidences per setting, S_s * S_i * window / t."""
        return self.singles[:, 0] * self.singles[:, 1] * self.coincidence_window / self.acquisition_time

    def corrected_counts(self) -> np.ndarray:
        """Coincidences with the accidental estimate subtracted, clipped at 0."""
        return np.clip(self.counts - self.accidental_estimate(), 0.0, None)


@dataclass
class TomographyResult:
    rho_linear: Optional[PolarizationDensityMatrix]
    rho_mle: PolarizationDensityMatrix
    concurrence: float
    fidelity: float
    log_likelihood: float
    concurrence_err: Optional[float] = None
    fidelity_err: Optional[float] = None
    purity: float = 1.0
    iterations: int = 0
    converged: bool = False
    stop_reason: str = ""  # "gradient", "stalled" or "max_iterations"
    likelihood_history: List[float] = field(default_factory=list)


def _coerce_detectors(detectors) -> Tuple[DetectorParams, DetectorParams]:
    if isinstance(detectors, DetectorParams):
        return detectors, detectors
    signal, idler = detectors
    return signal, idler


def _partial_traces(rho: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    r = rho.reshape(2, 2, 2, 2)
    return np.einsum("ajbj->ab", r), np.einsum("jajb->ab", r)


def simulate_record(rho, settings, pair_rate: float, detectors, acquisition_time: float, seed: int,
                    coincidence_window: float = 1e-9, extra_singles: Tuple[float, float] = (0.0, 0.0),
                    include_accidentals: bool = True, angle_jitter: float = 0.0) -> MeasurementRecord:
    """
    Poisson tomography record for state `rho`.

    Parameters:
      rho (PolarizationDensityMatrix): State reaching the analyzers.
      settings (list): (signal, idler) analyzer settings.
      pair_rate (float): Pairs/s reaching both analyzers.
      detectors (DetectorParams | pair): Detector model per arm.
      acquisition_time (float): Seconds per setting.
      seed (int): RNG seed; identical seeds give identical records.
      coincidence_window (float): Window for the accidental floor.
      extra_singles ((float, float)): Unpolarized uncorrelated photons/s per arm.
      include_accidentals (bool): Add the S_s * S_i * window floor to the coincidence mean.
      angle_jitter (float): Std of Gaussian errors (rad) on the true analyzer angles;
                            the record keeps the nominal settings.

    Returns:
      MeasurementRecord
    """
    if not acquisition_time > 0:
        raise InvalidParameterError(f"acquisition_time > 0 violated (got {acquisition_time})")
    if not pair_rate >= 0:
        raise InvalidParameterError(f"pair_rate ≥ 0 violated (got {pair_rate})")
    if not angle_jitter >= 0:
        raise InvalidParameterError(f"angle_jitter ≥ 0 violated (got {angle_jitter})")
    det_s, det_i = _coerce_detectors(detectors)
    rho_el = rho.elements if isinstance(rho, PolarizationDensityMatrix) else np.asarray(rho, dtype=complex)
    rng = np.random.default_rng(seed)

    actual = list(settings)
    if angle_jitter > 0:
        noise = rng.normal(0.0, angle_jitter, size=(len(actual), 4))
        actual = [(AnalyzerSetting(s.qwp_angle + n[0], s.hwp_angle + n[1]),
                   AnalyzerSetting(i.qwp_angle + n[2], i.hwp_angle + n[3])) for (s, i), n in zip(actual, noise)]

    rho_s, rho_i = _partial_traces(rho_el)
    coincidence_mean = np.empty(len(actual))
    singles_mean = np.empty((len(actual), 2))
    for k, (s, i) in enumerate(actual):
        p_s, p_i = projector(s), projector(i)
        p_joint = np.real(np.trace(rho_el @ np.kron(p_s, p_i)))
        rate_s = (pair_rate * np.real(np.trace(rho_s @ p_s)) + 0.5 * extra_singles[0]) * det_s.efficiency + det_s.dark_rate
        rate_i = (pair_rate * np.real(np.trace(rho_i @ p_i)) + 0.5 * extra_singles[1]) * det_i.efficiency + det_i.dark_rate
        rate_c = pair_rate * det_s.efficiency * det_i.efficiency * max(p_joint, 0.0)
        if include_accidentals:
            rate_c += rate_s * rate_i * coincidence_window
        coincidence_mean[k] = rate_c * acquisition_time
        singles_mean[k] = (rate_s * acquisition_time, rate_i * acquisition_time)

    counts = rng.poisson(coincidence_mean)
    singles = rng.poisson(singles_mean)
    return MeasurementRecord(list(settings), counts, acquisition_time, singles, coincidence_window)


def _record_counts(record: MeasurementRecord, subtract_accidentals: bool) -> np.ndarray:
    counts = record.corrected_counts() if subtract_accidentals else np.asarray(record.counts, dtype=float)
    if counts.size == 0 or not np.sum(counts) > 0:
        raise DegenerateDataError("measurement record has no counts")
    return counts


def linear_inversion(record: MeasurementRecord, subtract_accidentals: bool = False) -> PolarizationDensityMatrix:
    """
    Least-squares inversion of tr(rho M_k) proportional to n_k.

    Raises:
      NonInvertibleError: If the settings do not span the 16-dimensional operator space.
      DegenerateDataError: If there are no counts, or the solution has no positive trace.
    """
    a = measurement_matrix(record.settings)
    if np.linalg.matrix_rank(a) < 16:
        raise NonInvertibleError(f"measurement matrix has rank {np.linalg.matrix_rank(a)} < 16")
    counts = _record_counts(record, subtract_accidentals)

    solution = np.linalg.lstsq(a, counts.astype(complex), rcond=None)[0]
    rho = solution.reshape(4, 4)
    rho = (rho + rho.conj().T) / 2.0
    trace = np.trace(rho).real
    if not trace > 0:
        raise DegenerateDataError("linear inversion gives a non-positive trace")
    return PolarizationDensityMatrix(rho / trace, allow_unphysical=True)


def _probabilities(rho_unnormalized: np.ndarray, operators: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("kij,ji->k", operators, rho_unnormalized))


def _log_likelihood(rho_unnormalized: np.ndarray, operators: np.ndarray, counts: np.ndarray) -> float:
    """Profile Poisson log-likelihood per count (scale-free in rho)."""
    p = _probabilities(rho_unnormalized, operators)
    total = counts.sum()
    observed = counts > 0
    if np.any(p[observed] <= 0) or not p.sum() > 0:
        return -np.inf
    return float((np.sum(counts[observed] * np.log(p[observed])) - total * np.log(p.sum())) / total)


def _gradient(t: np.ndarray, operators: np.ndarray, counts: np.ndarray) -> np.ndarray:
    rho_u = t.conj().T @ t
    p = _probabilities(rho_u, operators)
    total = counts.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = np.where(counts > 0, counts / p, 0.0) - total / p.sum()
    grad = 2.0 * t @ np.einsum("k,kij->ij", weights, operators) / total
    return np.tril(grad)


def _triangular_factor(rho: np.ndarray) -> np.ndarray:
    """Lower-triangular T with T^dagger T = rho (after a small regularization)."""
    regularized = rho + _CHOLESKY_REGULARIZATION * np.eye(4)
    regularized = regularized / np.trace(regularized).real
    flip = np.eye(4)[::-1]
    lower = np.linalg.cholesky(flip @ regularized @ flip)
    t = flip @ lower.conj().T @ flip
    return t / np.linalg.norm(t)


def _starting_state(record: MeasurementRecord, counts: np.ndarray, operators: np.ndarray,
                    subtract_accidentals: bool) -> Tuple[Optional[PolarizationDensityMatrix], np.ndarray]:
    try:
        rho_linear = linear_inversion(record, subtract_accidentals)
        start = project_to_psd(rho_linear.elements)
    except (NonInvertibleError, DegenerateDataError):
        rho_linear, start = None, np.eye(4, dtype=complex) / 4.0
    if not np.isfinite(_log_likelihood(start, operators, counts)):
        start = 0.9 * start + 0.1 * np.eye(4) / 4.0
    return rho_linear, start


def mle_reconstruct(record: MeasurementRecord, initial: Optional[PolarizationDensityMatrix] = None,
                    subtract_accidentals: bool = False, target=PSI_PLUS,
                    max_iterations: int = MLE_MAX_ITERATIONS, tolerance: float = MLE_TOLERANCE) -> TomographyResult:
    """
    Maximum-likelihood density matrix of a record.

    The state is parametrized as rho = T^dagger T / tr(T^dagger T), so every
    iterate is positive semidefinite with unit trace. Ascent stops when the
    gradient norm falls below `tolerance` (converged), when the line search
    cannot improve the likelihood (stalled, not converged), or after
    `max_iterations` steps.

    Parameters:
      record (MeasurementRecord): Coincidence counts per setting.
      initial (PolarizationDensityMatrix, optional): Starting state; defaults to
          the PSD projection of the linear inversion.
      subtract_accidentals (bool): Fit accidental-corrected counts.
      target (4-vector): Pure state the fidelity refers to.

    Returns:
      TomographyResult: without error bars (see bootstrap_errors).

    Raises:
      DegenerateDataError: If all counts are zero.
    """
    counts = _record_counts(record, subtract_accidentals)
    operators = measurement_operators(record.settings)
    rho_linear, start = _starting_state(record, counts, operators, subtract_accidentals)
    if initial is not None:
        start = initial.elements
    start_likelihood = _log_likelihood(start, operators, counts)

    t = _triangular_factor(start)
    likelihood = _log_likelihood(t.conj().T @ t, operators, counts)
    grad = _gradient(t, operators, counts)
    history = [likelihood]
    step = 1.0 / max(np.linalg.norm(grad), 1e-12)
    converged = False
    stop_reason = "max_iterations"
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        grad_norm_sq = float(np.real(np.vdot(grad, grad)))
        if np.sqrt(grad_norm_sq) < tolerance:
            converged, stop_reason = True, "gradient"
            break
        while True:
            candidate = t + step * grad
            candidate = candidate / np.linalg.norm(candidate)
            candidate_likelihood = _log_likelihood(candidate.conj().T @ candidate, operators, counts)
            if candidate_likelihood >= likelihood + _ARMIJO_C * step * grad_norm_sq:
                break
            step /= 2.0
            if step < _MIN_STEP:
                break
        if step < _MIN_STEP:
            stop_reason = "stalled"
            break

        new_grad = _gradient(candidate, operators, counts)
        s = candidate - t
        y = new_grad - grad
        sy = abs(float(np.real(np.vdot(s, y))))
        step = float(np.real(np.vdot(s, s))) / sy if sy > 0 else 2.0 * step
        step = float(np.clip(step, 1e-10, 1e10))
        t, grad, likelihood = candidate, new_grad, candidate_likelihood
        history.append(likelihood)

    rho = t.conj().T @ t
    rho = (rho + rho.conj().T) / 2.0
    rho = rho / np.trace(rho).real
    if likelihood < start_likelihood:
        rho, likelihood = start, start_likelihood
    rho_mle = PolarizationDensityMatrix(rho)

    return TomographyResult(
        rho_linear=rho_linear,
        rho_mle=rho_mle,
        concurrence=concurrence(rho_mle),
        fidelity=fidelity(rho_mle, target),
        log_likelihood=likelihood,
        purity=purity(rho_mle),
        iterations=iteration,
        converged=converged,
        stop_reason=stop_reason,
        likelihood_history=history,
    )


def _bootstrap_task(args):
    record, seed, target, subtract_accidentals, max_iterations = args
    if toolbox.shutdown_requested():
        return None
    rng = np.random.default_rng(seed)
    resampled = MeasurementRecord(record.settings, rng.poisson(np.asarray(record.counts, dtype=float)),
                                  record.acquisition_time, record.singles, record.coincidence_window)
    result = mle_reconstruct(resampled, subtract_accidentals=subtract_accidentals, target=target,
                             max_iterations=max_iterations)
    return result.concurrence, result.fidelity


def bootstrap_distribution(record: MeasurementRecord, n_resamples: int, seed: int, target=PSI_PLUS,
                           subtract_accidentals: bool = False,
                           max_iterations: int = MLE_MAX_ITERATIONS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Concurrence and fidelity of MLE reconstructions of Poisson-resampled records.
    Resample i draws from seed + i, so results do not depend on NUM_CORES.
    """
    if n_resamples < 2:
        raise InvalidParameterError(f"n_resamples ≥ 2 violated (got {n_resamples})")
    args_list = [(record, seed + index, target, subtract_accidentals, max_iterations) for index in range(n_resamples)]
    results = toolbox.run_tasks(_bootstrap_task, args_list, NUM_CORES, "Bootstrap resamples")
    draws = np.array(results, dtype=float)
    return draws[:, 0], draws[:, 1]


def bootstrap_errors(record: MeasurementRecord, n_resamples: int, seed: int, target=PSI_PLUS,
                     subtract_accidentals: bool = False) -> Tuple[float, float]:
    """(concurrence stderr, fidelity stderr) as sample standard deviations over resamples."""
    c, f = bootstrap_distribution(record, n_resamples, seed, target, subtract_accidentals)
    return float(np.std(c, ddof=1)), float(np.std(f, ddof=1))


def setting_label(setting: AnalyzerSetting) -> str:
    for name, standard in STANDARD_SETTINGS.items():
        if np.isclose(setting.qwp_angle, standard.qwp_angle, atol=1e-12) \
                and np.isclose(setting.hwp_angle, standard.hwp_angle, atol=1e-12):
            return name
    return f"q={setting.qwp_angle!r};h={setting.hwp_angle!r}"


_CUSTOM_LABEL = re.compile(r"^q=(?P<q>[^;]+);h=(?P<h>.+)$")


def parse_setting_label(label: str) -> AnalyzerSetting:
    if label in STANDARD_SETTINGS:
        return STANDARD_SETTINGS[label]
    match = _CUSTOM_LABEL.match(label)
    if match is None:
        raise InvalidParameterError(f"unknown analyzer setting label {label!r}")
    return AnalyzerSetting(float(match["q"]), float(match["h"]))


def record_frame(record: MeasurementRecord) -> pd.DataFrame:
    return pd.DataFrame({
        "setting_s": [setting_label(s) for s, _ in record.settings],
        "setting_i": [setting_label(i) for _, i in record.settings],
        "time_s": record.acquisition_time,
        "coincidences": record.counts,
        "singles_s": record.singles[:, 0],
        "singles_i": record.singles[:, 1],
    })


def save_record_csv(record: MeasurementRecord, path: str) -> str:
    return atomic_write_text(path, record_frame(record).to_csv(index=False, float_format="%.9g"))


def load_record_csv(path: str, coincidence_window: float = 1e-9) -> MeasurementRecord:
    """Read a record written by save_record_csv (or by hand in the same schema)."""
    frame = pd.read_csv(path)
    expected = ["setting_s", "setting_i", "time_s", "coincidences", "singles_s", "singles_i"]
    missing = [c for c in expected if c not in frame.columns]
    if missing:
        raise InvalidParameterError(f"{path}: missing columns {missing}")
    times = frame["time_s"].unique()
    if len(times) != 1:
        raise InvalidParameterError(f"{path}: acquisition time must be the same for every setting")
    settings = [(parse_setting_label(s), parse_setting_label(i))
                for s, i in zip(frame["setting_s"].astype(str), frame["setting_i"].astype(str))]
    return MeasurementRecord(settings, frame["coincidences"].to_numpy(), float(times[0]),
                             frame[["singles_s", "singles_i"]].to_numpy(), coincidence_window)
