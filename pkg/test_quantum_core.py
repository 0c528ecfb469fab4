"""
Tests for kets, operator bases and the polarization conventions
"""

import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import DimensionMismatchError, SingularMetricError, ValidationError
from quantum_core import (PAULI_MATRICES, POLARIZATION_VECTORS, DensityMatrix, GateUnitary, Ket,
                          OperatorBasis, analysis_basis, cnot_equivalent_unitary, cphase_projector_basis,
                          cphase_unitary, dual_basis, gate_adapted_basis, haar_random_ket,
                          pauli_product_basis, polarization_ket, state_fidelity, target_rotation)


def test_polarization_vectors_are_normalized_and_paired():
    for vector in POLARIZATION_VECTORS.values():
        assert_allclose(np.vdot(vector, vector).real, 1.0)
    for a, b in (('H', 'V'), ('D', 'A'), ('R', 'L')):
        assert abs(np.vdot(POLARIZATION_VECTORS[a], POLARIZATION_VECTORS[b])) < 1e-15


def test_r_is_minus_one_eigenstate_of_y():
    r = POLARIZATION_VECTORS['R']
    assert_allclose(PAULI_MATRICES[2] @ r, -r, atol=1e-15)


def test_polarization_ket_orders_control_first():
    ket = polarization_ket('HV')
    assert_allclose(ket.amplitudes, [0, 1, 0, 0])
    assert ket.labels == ('H', 'V')
    assert_allclose(ket.tensor(polarization_ket('D')).amplitudes, np.kron([0, 1, 0, 0], [1, 1]) / np.sqrt(2))
    assert ket.tensor(polarization_ket('D')).labels == ('H', 'V', 'D')


def test_unknown_label_raises():
    with pytest.raises(ValidationError):
        polarization_ket('HX')


def test_ket_rejects_norm_above_one():
    with pytest.raises(ValidationError):
        Ket([1.0, 1.0])


def test_lossy_ket_keeps_its_norm():
    ket = Ket([0.6, 0.0])
    assert_allclose(ket.norm2, 0.36)
    assert_allclose(ket.normalized().norm2, 1.0)
    assert_allclose(ket.density().trace, 0.36)


def test_density_matrix_reports_violations():
    rho = DensityMatrix(np.diag([1.2, -0.2]))
    problems = rho.check_invariants()
    assert any('negative eigenvalue' in problem for problem in problems)
    assert DensityMatrix(np.diag([0.3, 0.1])).check_invariants() == []


def test_postselect_normalizes_trace():
    rho = DensityMatrix(np.diag([0.3, 0.1])).postselect()
    assert rho.postselected
    assert_allclose(rho.trace, 1.0)


def test_non_unitary_rejected():
    with pytest.raises(ValidationError):
        GateUnitary(np.diag([1.0, 0.5]))


def test_cphase_flips_only_hv():
    assert_allclose(np.diag(cphase_unitary().entries).real, [1, -1, 1, 1])


def test_cnot_equivalent_flips_target_for_control_h():
    unitary, convention = cnot_equivalent_unitary()
    assert unitary.name == "CNOT"
    assert convention.control_basis == ('H', 'V')
    assert convention.target_basis == ('D', 'A')
    out = unitary.entries @ polarization_ket('HH').amplitudes
    assert_allclose(abs(out[1]), 1.0, atol=1e-12)
    out = unitary.entries @ polarization_ket('VH').amplitudes
    assert_allclose(abs(out[2]), 1.0, atol=1e-12)
    assert convention.ideal_output('H', 'D') == ('H', 'A')
    assert convention.ideal_output('V', 'D') == ('V', 'D')


def test_target_rotation_maps_d_to_v_and_a_to_h():
    w = target_rotation()
    assert_allclose(w @ POLARIZATION_VECTORS['D'], POLARIZATION_VECTORS['V'], atol=1e-15)
    assert_allclose(w @ POLARIZATION_VECTORS['A'], POLARIZATION_VECTORS['H'], atol=1e-15)


def test_analysis_basis_parity_token():
    plus, minus = analysis_basis('b0.0')
    assert_allclose(plus, POLARIZATION_VECTORS['D'])
    assert_allclose(minus, POLARIZATION_VECTORS['A'])
    plus, _ = analysis_basis(f'b{np.pi / 2}')
    assert_allclose(plus, POLARIZATION_VECTORS['L'], atol=1e-15)
    with pytest.raises(ValidationError):
        analysis_basis('XY')


def test_pauli_basis_ordering_and_metric():
    basis = pauli_product_basis(2)
    assert_allclose(basis.elements[0], np.eye(4))
    assert_allclose(basis.elements[1], np.kron(np.eye(2), PAULI_MATRICES[1]))
    assert_allclose(basis.metric, 4 * np.eye(16))
    assert not basis.orthonormal
    assert pauli_product_basis(2, normalized=True).orthonormal


def test_dual_basis_is_biorthogonal():
    rng = np.random.default_rng(3)
    elements = rng.standard_normal((4, 2, 2)) + 1j * rng.standard_normal((4, 2, 2))
    basis = OperatorBasis(elements, "random")
    dual = dual_basis(basis)
    overlaps = np.einsum('iab,jab->ij', basis.elements.conj(), dual.elements)
    assert_allclose(overlaps, np.eye(4), atol=1e-10)


def test_dual_of_orthonormal_basis_is_itself():
    basis = pauli_product_basis(1, normalized=True)
    assert_allclose(basis.dual.elements, basis.elements, atol=1e-14)


def test_singular_metric_raises():
    elements = np.array([np.eye(2), np.eye(2), PAULI_MATRICES[1], PAULI_MATRICES[3]], dtype=complex)
    with pytest.raises(SingularMetricError):
        dual_basis(OperatorBasis(elements, "degenerate"))


def test_coefficients_round_trip_in_non_orthogonal_basis():
    rng = np.random.default_rng(11)
    elements = rng.standard_normal((16, 4, 4)) + 1j * rng.standard_normal((16, 4, 4))
    basis = OperatorBasis(elements, "random4")
    operator = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert_allclose(basis.combine(basis.coefficients(operator)), operator, atol=1e-9)


def test_coefficients_shape_checked():
    with pytest.raises(DimensionMismatchError):
        pauli_product_basis(1).coefficients(np.eye(4))


def test_projector_basis_is_orthonormal():
    basis = cphase_projector_basis()
    assert basis.orthonormal
    assert_allclose(basis.elements[5], np.diag([0, 1, 0, 0]))


def test_gate_adapted_basis_first_element_is_the_gate():
    unitary = cphase_unitary()
    basis = gate_adapted_basis(unitary)
    assert_allclose(basis.elements[0], unitary.entries)
    assert_allclose(basis.metric, 4 * np.eye(16), atol=1e-12)


def test_state_fidelity_postselects():
    psi = polarization_ket('D')
    rho = DensityMatrix(0.25 * psi.density().entries)
    assert_allclose(state_fidelity(rho, psi), 1.0)
    assert_allclose(state_fidelity(rho, psi, postselect=False), 0.25)


def test_haar_kets_are_normalized():
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert_allclose(haar_random_ket(4, rng).norm2, 1.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
