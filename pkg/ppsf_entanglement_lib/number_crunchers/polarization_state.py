"""
Frequency-traced two-qubit polarization state of the pair and its
entanglement measures.

Basis order is {HH, HV, VH, VV} (signal first). The f- branch populates HV and
the f+ branch VH, so a reduced state only has entries in the central block.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DegenerateStateError, InvalidParameterError, InvalidStateError
from .spectral_model import JointSpectralAmplitude, quadrature_weights
from .toolbox import db_to_transmission, tprint

BASIS_LABELS = ["HH", "HV", "VH", "VV"]

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9

# Named filter sets every SourceConfig carries
CL_SPLITTER = "cl_splitter"
DWDM_PAIR = "dwdm_pair"
PUMP_SUPPRESSION = "pump_suppression"
# Eigenvalues this close to zero are numerical noise, not a violation
_EIG_NOISE = 1e-14

_SIGMA_Y = np.array([[0, -1j], [1j, 0]])
_YY = np.kron(_SIGMA_Y, _SIGMA_Y)


def target_state(phase: float = 0.0) -> np.ndarray:
    """(|HV> + exp(i*phase)|VH>)/sqrt(2)."""
    return np.array([0.0, 1.0, np.exp(1j * phase), 0.0], dtype=complex) / np.sqrt(2.0)


PSI_PLUS = target_state(0.0)


class PolarizationDensityMatrix:
    """
    4x4 density matrix in the {HH, HV, VH, VV} basis.

    Construction checks Hermiticity and trace. Eigenvalues down to -1e-9 are
    clipped to zero with renormalization; anything more negative raises unless
    `allow_unphysical` is set, in which case the matrix is kept and flagged.
    """

    def __init__(self, elements, allow_unphysical: bool = False):
        rho = np.array(elements, dtype=complex)
        if rho.shape != (4, 4):
            raise InvalidStateError(f"density matrix must be 4x4 (got {rho.shape})")
        if not np.all(np.isfinite(rho)):
            raise InvalidStateError("density matrix has non-finite entries")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise InvalidStateError("density matrix is not Hermitian within 1e-10")
        trace = np.trace(rho).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"density matrix trace is {trace}, not 1 within 1e-10")

        self.is_physical = True
        min_eig = np.linalg.eigvalsh(rho).min()
        if min_eig < -PSD_TOL:
            if not allow_unphysical:
                raise InvalidStateError(f"density matrix has eigenvalue {min_eig:.3e} below -1e-9")
            self.is_physical = False
        elif min_eig < -_EIG_NOISE:
            rho = project_to_psd(rho)
        self.elements = rho

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.elements)

    def __repr__(self):
        return f"PolarizationDensityMatrix(is_physical={self.is_physical}, elements=\n{np.round(self.elements, 4)})"


def project_to_psd(rho: np.ndarray) -> np.ndarray:
    """Unit-trace PSD matrix from rho: negative eigenvalues clipped to zero, then renormalized."""
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals, 0.0, None)
    if vals.sum() <= 0:
        return np.eye(4, dtype=complex) / 4.0
    vals = vals / vals.sum()
    return (vecs * vals) @ vecs.conj().T


def _as_matrix(rho: Union[PolarizationDensityMatrix, np.ndarray]) -> PolarizationDensityMatrix:
    return rho if isinstance(rho, PolarizationDensityMatrix) else PolarizationDensityMatrix(rho)


@dataclass
class FilterSpec:
    """
    Bandpass filter on one arm.

    passbands: (low_nm, high_nm, transmittance) triples. An empty list means a
    flat filter that only contributes its insertion loss. Edges are raised-cosine
    of width `edge_width` centered on low/high, so low and high are the 3 dB points.
    effective_bandwidth (nm, optional): measured in-band width used by the rate budget.
    """
    passbands: List[Tuple[float, float, float]] = field(default_factory=list)
    insertion_loss_db: float = 0.0
    edge_width: float = 0.5
    effective_bandwidth: Optional[float] = None

    def __post_init__(self):
        self.passbands = [tuple(float(v) for v in band) for band in self.passbands]

    @classmethod
    def all_pass(cls, insertion_loss_db: float = 0.0) -> "FilterSpec":
        return cls([], insertion_loss_db)

    def validate(self) -> "FilterSpec":
        for band in self.passbands:
            if len(band) != 3:
                raise InvalidParameterError(f"passband {band} must be (low, high, transmittance)")
            low, high, t = band
            if not low < high:
                raise InvalidParameterError(f"low < high violated (got {low}, {high})")
            if not 0.0 <= t <= 1.0:
                raise InvalidParameterError(f"transmittance in [0,1] violated (got {t})")
        if not self.insertion_loss_db >= 0:
            raise InvalidParameterError(f"insertion_loss_db ≥ 0 violated (got {self.insertion_loss_db})")
        if not self.edge_width >= 0:
            raise InvalidParameterError(f"edge_width ≥ 0 violated (got {self.edge_width})")
        if self.effective_bandwidth is not None and not self.effective_bandwidth > 0:
            raise InvalidParameterError(f"effective_bandwidth > 0 violated (got {self.effective_bandwidth})")
        return self

    def _edge(self, distance: np.ndarray) -> np.ndarray:
        """Rise from 0 to 1 as `distance` (nm past the nominal edge) goes through 0."""
        if self.edge_width == 0:
            return np.where(distance > 0, 1.0, np.where(distance == 0, 0.5, 0.0))
        x = np.clip(distance / self.edge_width, -0.5, 0.5)
        return 0.5 * (1.0 + np.sin(np.pi * x))

    def transmittance(self, wavelengths) -> np.ndarray:
        """Passband shape (no insertion loss) at the given wavelengths."""
        wavelengths = np.asarray(wavelengths, dtype=float)
        if not self.passbands:
            return np.ones_like(wavelengths)
        shape = np.zeros_like(wavelengths)
        for low, high, t in self.passbands:
            shape = np.maximum(shape, t * self._edge(wavelengths - low) * self._edge(high - wavelengths))
        return shape

    def power_transmission(self, wavelengths) -> np.ndarray:
        """Passband shape times the insertion loss."""
        return self.transmittance(wavelengths) * db_to_transmission(self.insertion_loss_db)


def apply_filters(jsa: JointSpectralAmplitude, signal_filter: FilterSpec, idler_filter: FilterSpec) -> JointSpectralAmplitude:
    """
    Multiply the amplitudes by sqrt(Ts(ls) * Ti(li)), insertion losses included.

    A result with no amplitude left is returned flagged `is_empty` (and logged),
    never silently.
    """
    signal_filter.validate()
    idler_filter.validate()
    ts = signal_filter.power_transmission(jsa.grid.signal_wavelengths)
    ti = idler_filter.power_transmission(jsa.grid.idler_wavelengths)
    amplitude = np.sqrt(np.outer(ts, ti))

    filtered = JointSpectralAmplitude(jsa.grid, jsa.f_minus * amplitude, jsa.f_plus * amplitude)
    if not (np.any(filtered.f_minus) or np.any(filtered.f_plus)):
        filtered.is_empty = True
        tprint("Warning: filters leave no overlap with the joint spectrum; result is empty.")
    return filtered


def reduce_to_polarization(jsa: JointSpectralAmplitude) -> PolarizationDensityMatrix:
    """
    Trace the biphoton over frequency.

    Every entry uses the same weighted sum of f_a * conj(f_b), so identical
    branches give exactly equal populations and coherence.

    Raises:
      DegenerateStateError: If the JSA has zero norm.
    """
    w = quadrature_weights(jsa.grid)
    fm, fp = jsa.f_minus, jsa.f_plus
    pop_hv = np.sum(w * fm * np.conj(fm)).real
    pop_vh = np.sum(w * fp * np.conj(fp)).real
    coherence = np.sum(w * fm * np.conj(fp))
    norm = pop_hv + pop_vh
    if jsa.is_empty or not norm > 0:
        raise DegenerateStateError("joint spectral amplitude has zero norm")

    rho = np.zeros((4, 4), dtype=complex)
    rho[1, 1] = pop_hv / norm
    rho[2, 2] = pop_vh / norm
    rho[1, 2] = coherence / norm
    rho[2, 1] = np.conj(coherence) / norm
    return PolarizationDensityMatrix(rho)


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(rho)
    vals = np.where(vals < _EIG_NOISE, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def concurrence(rho: Union[PolarizationDensityMatrix, np.ndarray]) -> float:
    """
    Two-qubit concurrence max(0, l1 - l2 - l3 - l4).

    The l_k are the decreasing square roots of the eigenvalues of
    rho * (sy x sy) rho* (sy x sy), taken here as the singular values of
    sqrt(rho) * sqrt(rho_tilde).

    Raises:
      InvalidStateError: If the matrix was flagged non-PSD beyond tolerance.
    """
    rho = _as_matrix(rho)
    if not rho.is_physical:
        raise InvalidStateError("concurrence needs a positive semidefinite density matrix")
    root = _psd_sqrt(rho.elements)
    root_tilde = _YY @ root.conj() @ _YY
    lambdas = np.sort(np.linalg.svd(root @ root_tilde, compute_uv=False))[::-1]
    value = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]
    return float(np.clip(value, 0.0, 1.0))


def fidelity(rho: Union[PolarizationDensityMatrix, np.ndarray], target_pure_state=PSI_PLUS) -> float:
    """
    Overlap <psi|rho|psi> with a normalized pure target.

    Example:
      >>> fidelity(np.eye(4) / 4, PSI_PLUS)
      0.25
    """
    rho = _as_matrix(rho)
    psi = np.asarray(target_pure_state, dtype=complex).reshape(4)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-6:
        raise InvalidParameterError(f"target state must be normalized (norm {np.linalg.norm(psi):.9f})")
    return float(np.clip(np.real(np.conj(psi) @ rho.elements @ psi), 0.0, 1.0))


def purity(rho: Union[PolarizationDensityMatrix, np.ndarray]) -> float:
    """tr(rho^2): 1 for a pure state, 1/4 for the maximally mixed one."""
    rho = _as_matrix(rho)
    return float(np.real(np.trace(rho.elements @ rho.elements)))


def trace_distance(a: Union[PolarizationDensityMatrix, np.ndarray], b: Union[PolarizationDensityMatrix, np.ndarray]) -> float:
    """Half the sum of |eigenvalues| of a - b; 0 for equal states, at most 1."""
    a = a.elements if isinstance(a, PolarizationDensityMatrix) else np.asarray(a, dtype=complex)
    b = b.elements if isinstance(b, PolarizationDensityMatrix) else np.asarray(b, dtype=complex)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def werner_state(p: float, psi=PSI_PLUS) -> PolarizationDensityMatrix:
    """p|psi><psi| + (1-p) I/4."""
    psi = np.asarray(psi, dtype=complex)
    return PolarizationDensityMatrix(p * np.outer(psi, psi.conj()) + (1.0 - p) * np.eye(4) / 4.0)


def density_matrix_to_json(rho: PolarizationDensityMatrix) -> dict:
    """
    JSON form: 16 entries row-major as [re, im] pairs, plus the basis order
    and the PSD flag.
    """
    return {
        "basis": list(BASIS_LABELS),
        "elements": [[float(z.real), float(z.imag)] for z in rho.elements.ravel()],
        "is_physical": bool(rho.is_physical),
    }


def density_matrix_from_json(data: dict) -> PolarizationDensityMatrix:
    if list(data.get("basis", BASIS_LABELS)) != BASIS_LABELS:
        raise InvalidParameterError(f"unsupported basis order {data.get('basis')}")
    entries = data["elements"]
    if len(entries) != 16:
        raise InvalidParameterError(f"expected 16 entries (got {len(entries)})")
    elements = np.array([complex(re, im) for re, im in entries]).reshape(4, 4)
    return PolarizationDensityMatrix(elements, allow_unphysical=not data.get("is_physical", True))


def density_matrix_frames(rho: PolarizationDensityMatrix) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Real and imaginary parts as labelled 4x4 DataFrames (index = row basis state)."""
    real = pd.DataFrame(rho.elements.real, index=BASIS_LABELS, columns=BASIS_LABELS)
    imag = pd.DataFrame(rho.elements.imag, index=BASIS_LABELS, columns=BASIS_LABELS)
    real.index.name = imag.index.name = "basis"
    return real, imag
