import numpy as np
import pytest

from ppsf_entanglement_lib.number_crunchers import polarization_state as ps
from ppsf_entanglement_lib.number_crunchers.errors import DegenerateStateError, InvalidParameterError, InvalidStateError
from ppsf_entanglement_lib.number_crunchers.polarization_state import FilterSpec, PolarizationDensityMatrix
from ppsf_entanglement_lib.number_crunchers.spectral_model import (JointSpectralAmplitude, PpsfParams, PumpParams,
                                                                   SpectralGrid, compute_jsa)

GRID = SpectralGrid.uniform(1465.0, 1665.0, 256)


@pytest.mark.parametrize("p", [0.0, 1.0 / 3.0, 0.5, 0.8, 1.0])
def test_werner_state_measures(p):
    rho = ps.werner_state(p)
    assert ps.concurrence(rho) == pytest.approx(max(0.0, (3.0 * p - 1.0) / 2.0), abs=1e-9)
    assert ps.fidelity(rho) == pytest.approx((1.0 + 3.0 * p) / 4.0, abs=1e-9)
    assert ps.purity(rho) == pytest.approx((1.0 + 3.0 * p ** 2) / 4.0, abs=1e-9)


def test_maximally_mixed_fidelity():
    assert ps.fidelity(np.eye(4) / 4.0, ps.PSI_PLUS) == pytest.approx(0.25)


def test_target_phase():
    psi = ps.target_state(np.pi)
    assert np.vdot(psi, ps.PSI_PLUS) == pytest.approx(0.0)
    assert ps.fidelity(ps.werner_state(1.0, psi), psi) == pytest.approx(1.0)
    with pytest.raises(InvalidParameterError):
        ps.fidelity(np.eye(4) / 4.0, np.array([1.0, 1.0, 0.0, 0.0]))


def test_density_matrix_validation():
    with pytest.raises(InvalidStateError):
        PolarizationDensityMatrix(np.eye(3) / 3.0)
    with pytest.raises(InvalidStateError):
        PolarizationDensityMatrix(np.eye(4) / 2.0)
    skew = np.eye(4, dtype=complex) / 4.0
    skew[0, 1] = 0.1j
    with pytest.raises(InvalidStateError):
        PolarizationDensityMatrix(skew)

    negative = np.diag([0.6, 0.5, 0.0, -0.1])
    with pytest.raises(InvalidStateError):
        PolarizationDensityMatrix(negative)
    flagged = PolarizationDensityMatrix(negative, allow_unphysical=True)
    assert not flagged.is_physical
    with pytest.raises(InvalidStateError):
        ps.concurrence(flagged)


def test_tiny_negative_eigenvalues_are_clipped():
    rho = PolarizationDensityMatrix(np.diag([0.5 + 5e-11, 0.5, 0.0, -5e-11]))
    assert rho.is_physical
    assert rho.eigenvalues().min() >= -1e-15
    assert np.trace(rho.elements).real == pytest.approx(1.0, abs=1e-12)


def test_no_walk_off_gives_a_perfect_bell_state():
    jsa = compute_jsa(PpsfParams(group_birefringence=0.0), PumpParams(), GRID)
    rho = ps.reduce_to_polarization(jsa)
    assert ps.concurrence(rho) == pytest.approx(1.0, abs=1e-9)
    assert ps.fidelity(rho) == pytest.approx(1.0, abs=1e-9)


def test_walk_off_reduces_concurrence():
    default = ps.reduce_to_polarization(compute_jsa(PpsfParams(), PumpParams(), GRID))
    strong = ps.reduce_to_polarization(compute_jsa(PpsfParams(group_birefringence=2.5e-4), PumpParams(), GRID))
    c_default, c_strong = ps.concurrence(default), ps.concurrence(strong)
    assert 0.85 < c_default < 1.0
    assert c_strong < c_default

    # Exchange symmetry of the JSA keeps the two populations equal
    assert default.elements[1, 1].real == pytest.approx(default.elements[2, 2].real, abs=1e-12)
    assert abs(default.elements[0, 0]) == 0.0 and abs(default.elements[3, 3]) == 0.0


def test_cl_split_state_is_highly_entangled():
    signal, idler = FilterSpec([(1530.0, 1565.0, 1.0)], 0.5), FilterSpec([(1565.0, 1615.0, 1.0)], 0.5)
    jsa = compute_jsa(PpsfParams(), PumpParams(), GRID)
    rho = ps.reduce_to_polarization(ps.apply_filters(jsa, signal, idler))
    assert ps.concurrence(rho) > 0.97
    assert ps.fidelity(rho) > 0.97


def test_filters_without_overlap_leave_an_empty_jsa():
    jsa = compute_jsa(PpsfParams(), PumpParams(), GRID)
    far = FilterSpec([(1700.0, 1710.0, 1.0)])
    filtered = ps.apply_filters(jsa, far, far)
    assert filtered.is_empty
    with pytest.raises(DegenerateStateError):
        ps.reduce_to_polarization(filtered)


def test_filter_shape():
    spec = FilterSpec([(1550.0, 1560.0, 0.9)], insertion_loss_db=3.0, edge_width=1.0)
    t = spec.transmittance([1555.0, 1550.0, 1560.0, 1540.0, 1570.0])
    np.testing.assert_allclose(t, [0.9, 0.45, 0.45, 0.0, 0.0], atol=1e-12)
    assert spec.power_transmission(1555.0) == pytest.approx(0.9 * 10 ** -0.3)
    np.testing.assert_array_equal(FilterSpec.all_pass().transmittance([1400.0, 1700.0]), [1.0, 1.0])

    with pytest.raises(InvalidParameterError):
        FilterSpec([(1560.0, 1550.0, 1.0)]).validate()
    with pytest.raises(InvalidParameterError):
        FilterSpec([(1550.0, 1560.0, 1.5)]).validate()
    with pytest.raises(InvalidParameterError):
        FilterSpec.all_pass(-1.0).validate()


def test_trace_distance():
    assert ps.trace_distance(ps.werner_state(1.0), ps.werner_state(1.0)) == pytest.approx(0.0, abs=1e-12)
    assert ps.trace_distance(ps.werner_state(1.0), ps.werner_state(0.0)) == pytest.approx(0.75)


def test_density_matrix_exports():
    rho = ps.werner_state(0.8, ps.target_state(0.3))
    restored = ps.density_matrix_from_json(ps.density_matrix_to_json(rho))
    np.testing.assert_allclose(restored.elements, rho.elements)

    real, imag = ps.density_matrix_frames(rho)
    assert list(real.columns) == ps.BASIS_LABELS
    assert real.index.name == "basis"
    assert imag.loc["VH", "HV"] == pytest.approx(0.4 * np.sin(0.3))


def _random_density_matrix(rng, rank=4):
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def _random_unitary(rng, n=2):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_concurrence_is_invariant_under_local_unitaries():
    rng = np.random.default_rng(17)
    for k in range(200):
        rho = _random_density_matrix(rng, rank=1 + k % 4)
        u = np.kron(_random_unitary(rng), _random_unitary(rng))
        rotated = u @ rho @ u.conj().T
        rotated = (rotated + rotated.conj().T) / 2.0
        assert ps.concurrence(rotated) == pytest.approx(ps.concurrence(rho), abs=1e-8)


def test_fidelity_is_bounded_by_concurrence():
    rng = np.random.default_rng(23)
    states = [_random_density_matrix(rng, rank=1 + k % 4) for k in range(200)]
    states += [ps.werner_state(p, ps.target_state(phase)) for p in (0.0, 0.3, 0.7, 1.0) for phase in (0.0, 1.0)]
    for rho in states:
        for phase in (0.0, np.pi / 3.0, np.pi):
            target = ps.target_state(phase)
            assert ps.fidelity(rho, target) <= (1.0 + ps.concurrence(rho)) / 2.0 + 1e-9


def test_random_joint_spectra_reduce_to_valid_states():
    rng = np.random.default_rng(29)
    grid = SpectralGrid.uniform(1500.0, 1640.0, 8)
    for _ in range(1000):
        f_minus = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        f_plus = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        # Random relative weight so some states are nearly product states
        f_plus = f_plus * rng.uniform(0.0, 2.0)
        rho = ps.reduce_to_polarization(JointSpectralAmplitude(grid, f_minus, f_plus))
        assert np.trace(rho.elements).real == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= ps.concurrence(rho) <= 1.0
        assert 0.0 <= ps.purity(rho) <= 1.0 + 1e-12
        assert ps.fidelity(rho) <= (1.0 + ps.concurrence(rho)) / 2.0 + 1e-9
