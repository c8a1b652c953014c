import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dense_bs, dense_phase, random_sector_state, random_state_vector
from x8compile.fock import PureState, fock_probability, make_tmss, squeezed_registers, vacuum
from x8compile.optics import (
    BeamSplitter,
    Circuit,
    MachZehnder,
    PhaseShift,
    ThermalLoss,
    UnsupportedGate,
    apply_circuit,
    apply_gate,
    bs_two_mode_matrix,
    circuit_from_json,
    circuit_matrix,
    circuit_to_json,
    complete_sector_distance,
    conjugate,
    distance_up_to_phase,
    expand,
    gate_from_dict,
    gate_matrix,
    layered_ansatz,
    mz_decompose,
    sector_indices,
    sector_unitary,
    sectorwise_distance,
)

angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
CUTOFF = 8


def sector_total_probabilities(state: PureState) -> np.ndarray:
    probs = np.abs(state.tensor) ** 2
    totals = sum(np.indices(probs.shape))
    return np.bincount(totals.reshape(-1), weights=probs.reshape(-1))


class TestBeamSplitterMatrix:
    def test_zero_angle_is_identity(self):
        np.testing.assert_allclose(bs_two_mode_matrix(0.0, 1.3, 5), np.eye(25), atol=1e-15)

    @given(angles, angles)
    def test_single_photon_convention(self, theta, phi):
        u = sector_unitary(theta, phi, 1)
        c, s = math.cos(theta), math.sin(theta)
        expected = np.array([[c, np.exp(1j * phi) * s], [-np.exp(-1j * phi) * s, c]])
        # basis |0,1>, |1,0> by increasing k; reorder to (|1,0>, |0,1>)
        np.testing.assert_allclose(u[::-1, ::-1], expected, atol=1e-12)

    def test_balanced_single_photon_sector(self):
        u = bs_two_mode_matrix(math.pi / 4, 0.0, 4)
        idx = [1 * 4 + 0, 0 * 4 + 1]
        h = math.sqrt(0.5)
        np.testing.assert_allclose(u[np.ix_(idx, idx)], [[h, h], [-h, h]], atol=1e-15)

    @given(angles, angles, st.integers(1, 9))
    def test_sector_unitarity(self, theta, phi, cutoff):
        u = bs_two_mode_matrix(theta, phi, cutoff)
        for n in range(2 * cutoff - 1):
            idx = sector_indices(2, cutoff, n)
            block = u[np.ix_(idx, idx)]
            assert np.abs(block.conj().T @ block - np.eye(len(idx))).max() < 1e-12

    @given(angles, angles)
    def test_matches_dense_expm_oracle(self, theta, phi):
        d = 6
        np.testing.assert_allclose(bs_two_mode_matrix(theta, phi, d), dense_bs(theta, phi, d), atol=1e-10)


class TestApplication:
    @given(angles, angles, st.integers(0, 2**32 - 1))
    def test_norm_and_photon_number_preserved(self, theta, phi, seed):
        rng = np.random.default_rng(seed)
        state = PureState(3, 4, random_state_vector(rng, 64))
        gates = [BeamSplitter(0, 2, theta, phi), PhaseShift(1, phi), MachZehnder(2, 1, theta, phi)]
        out = apply_circuit(state, gates)
        assert abs(out.norm_squared - state.norm_squared) < 1e-12
        np.testing.assert_allclose(sector_total_probabilities(out), sector_total_probabilities(state), atol=1e-12)

    def test_three_mode_circuit_matches_dense_oracle(self):
        d = 4
        gates = [BeamSplitter(0, 2, 0.4, 0.9), PhaseShift(1, 0.3), BeamSplitter(1, 2, 1.1, -0.2)]
        dense = dense_bs(1.1, -0.2, d, 1, 2, 3) @ dense_phase(0.3, d, 1, 3) @ dense_bs(0.4, 0.9, d, 0, 2, 3)
        idx = np.flatnonzero(sum(np.indices((d,) * 3)).reshape(-1) < d)
        ours = circuit_matrix(Circuit(3, gates), d)
        np.testing.assert_allclose(ours[np.ix_(idx, idx)], dense[np.ix_(idx, idx)], atol=1e-10)

    def test_machzehnder_expansion_order(self):
        gate = MachZehnder(0, 1, 0.7, -1.2)
        np.testing.assert_allclose(gate_matrix(gate, 5), circuit_matrix(Circuit(2, expand(gate)), 5), atol=1e-12)

    def test_thermal_loss_is_rejected(self):
        with pytest.raises(TypeError):
            apply_gate(vacuum(1, 3), ThermalLoss(0, 0.9, 0.0))

    @pytest.mark.parametrize("gate", [PhaseShift(2, 0.1), BeamSplitter(0, 3, 0.1, 0.0)])
    def test_out_of_range_mode(self, gate):
        with pytest.raises(ValueError):
            apply_gate(vacuum(2, 3), gate)

    def test_repeated_mode_rejected(self):
        with pytest.raises(ValueError):
            BeamSplitter(1, 1, 0.1, 0.0)

    def test_non_finite_angle_rejected(self):
        with pytest.raises(ValueError):
            Circuit(2, (BeamSplitter(0, 1, math.inf, 0.0),))

    @pytest.mark.parametrize("phi, invariant", [(0.0, True), (math.pi, True), (math.pi / 2, False), (0.4, False)])
    def test_phase_on_both_halves_of_pair(self, phi, invariant):
        tmss = make_tmss(1.0, 1, CUTOFF)
        out = apply_circuit(tmss, [PhaseShift(0, phi), PhaseShift(1, phi)])
        fidelity = abs(np.vdot(tmss.amplitudes, out.amplitudes)) ** 2 / tmss.norm_squared**2
        assert bool(fidelity > 1 - 1e-10) is invariant

    def test_real_beamsplitter_on_both_registers_fixes_tmss(self):
        tmss = make_tmss(1.0, 2, CUTOFF)
        out = apply_circuit(tmss, [BeamSplitter(0, 1, math.pi / 4, 0.0), BeamSplitter(2, 3, math.pi / 4, 0.0)])
        np.testing.assert_allclose(out.amplitudes, tmss.amplitudes, atol=1e-12)

    @pytest.mark.parametrize("phi", np.linspace(-math.pi / 2, math.pi / 2, 7))
    def test_target_probability_curve(self, phi):
        state = squeezed_registers([1.0, 1.0], CUTOFF)
        out = apply_circuit(state, [BeamSplitter(0, 1, math.pi / 4, phi), BeamSplitter(2, 3, math.pi / 4, phi)])
        rate = math.tanh(1) ** 2 / (2 * math.cosh(1) ** 4)
        assert fock_probability(out, (0, 1, 0, 1)) == pytest.approx(rate * (1 + math.cos(2 * phi)), abs=1e-14)
        assert rate == pytest.approx(0.05115, abs=1e-5)


class TestRicochet:
    @given(angles, st.floats(0.0, 1.5))
    def test_real_gate_ricochet(self, theta, r):
        tmss = make_tmss(r, 2, 6)
        v = Circuit(2, (BeamSplitter(0, 1, theta, 0.0), PhaseShift(0, math.pi)))
        out = apply_circuit(tmss, v.then(v.relabel([2, 3], 4)))
        fidelity = abs(np.vdot(tmss.amplitudes, out.amplitudes)) ** 2 / tmss.norm_squared**2
        assert fidelity > 1 - 1e-10

    @given(angles, angles, angles, angles)
    def test_gate_times_conjugate_is_maximal_overlap(self, t1, p1, t2, p2):
        tmss = make_tmss(1.0, 2, 6)
        u = Circuit(2, (BeamSplitter(0, 1, t1, p1), PhaseShift(1, p2), MachZehnder(0, 1, t2, p1)))
        out = apply_circuit(tmss, u.then(conjugate(u).relabel([2, 3], 4)))
        assert abs(np.vdot(tmss.amplitudes, out.amplitudes) - tmss.norm_squared) < 1e-10


class TestDistance:
    def test_identical(self):
        u = bs_two_mode_matrix(0.3, 0.2, 4)
        assert distance_up_to_phase(u, u) == pytest.approx(0.0, abs=1e-12)

    @given(angles)
    def test_global_phase_invariance(self, alpha):
        u = bs_two_mode_matrix(0.3, 0.2, 4)
        assert distance_up_to_phase(np.exp(1j * alpha) * u, u) < 1e-12

    def test_identity_vs_reflection(self):
        assert distance_up_to_phase(np.eye(2), np.diag([1.0, -1.0])) == pytest.approx(2.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            distance_up_to_phase(np.eye(2), np.eye(3))


class TestDecomposition:
    @pytest.mark.parametrize(
        "theta, phi", [(math.pi / 4, 0.0), (0.0, 0.0)] + [(t, p) for t in np.linspace(0, math.pi, 5) for p in np.linspace(-math.pi, math.pi, 5)]
    )
    def test_native_word_equals_beamsplitter(self, theta, phi):
        word = mz_decompose(theta, phi)
        assert [g.kind for g in word.gates] == ["MachZehnder", "PhaseShift", "PhaseShift"]
        dist = complete_sector_distance(circuit_matrix(word, CUTOFF), bs_two_mode_matrix(theta, phi, CUTOFF), 2, CUTOFF)
        assert dist < 1e-10

    @given(angles, angles)
    def test_bare_word_agrees_per_sector(self, theta, phi):
        word = mz_decompose(theta, phi, fock_exact=False)
        assert len(word.gates) == 2
        assert sectorwise_distance(circuit_matrix(word, 6), bs_two_mode_matrix(theta, phi, 6), 2, 6) < 1e-10

    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_bare_word_differs_by_number_dependent_phase(self, theta, phi):
        # on sectors 0 and 1 the bare word is 1 (+) exp(-i theta) BS, so the best
        # single phase leaves sqrt(6 - 2|1 + 2 exp(-i theta)|)
        word = mz_decompose(theta, phi, fock_exact=False)
        u, v = circuit_matrix(word, 4), bs_two_mode_matrix(theta, phi, 4)
        idx = np.concatenate([sector_indices(2, 4, 0), sector_indices(2, 4, 1)])
        d = distance_up_to_phase(u[np.ix_(idx, idx)], v[np.ix_(idx, idx)])
        expected = math.sqrt(max(0.0, 6 - 2 * abs(1 + 2 * np.exp(-1j * theta))))
        assert d == pytest.approx(expected, abs=1e-7)


class TestLayeredAnsatz:
    def test_single_layer_is_the_beamsplitter(self):
        circ = layered_ansatz([math.pi / 4], [0.0])
        np.testing.assert_allclose(circuit_matrix(circ, 5), bs_two_mode_matrix(math.pi / 4, 0.0, 5), atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            layered_ansatz([0.1, 0.2], [0.0])
        with pytest.raises(ValueError):
            layered_ansatz([], [])

    def test_accepts_arrays(self):
        circ = layered_ansatz(np.array([0.1, 0.2]), np.array([0.3, -0.3]))
        assert len(circ.gates) == 4

    def test_all_zero_phases_compose_to_target(self):
        circ = layered_ansatz([0.1, 0.5, math.pi / 4 - 0.6], [0.0, 0.0, 0.0])
        dist = complete_sector_distance(circuit_matrix(circ, CUTOFF), bs_two_mode_matrix(math.pi / 4, 0, CUTOFF), 2, CUTOFF)
        assert dist < 1e-10

    @pytest.mark.parametrize("xis", [[math.pi / 8, math.pi / 8], [0.3, 0.2, math.pi / 4 - 0.5]])
    def test_nonzero_phase_sum_is_not_real(self, xis):
        phis = [0.3] + [0.0] * (len(xis) - 1)
        circ = layered_ansatz(xis, phis)
        dist = complete_sector_distance(circuit_matrix(circ, CUTOFF), bs_two_mode_matrix(math.pi / 4, 0, CUTOFF), 2, CUTOFF)
        assert dist > 1e-3

    @given(st.lists(st.tuples(st.floats(-1.5, 1.5), st.floats(-3, 3)), min_size=1, max_size=3))
    def test_phase_sum_fixes_single_photon_determinant(self, layers):
        xis, phis = zip(*layers)
        u = circuit_matrix(layered_ansatz(xis, phis), 3)
        idx = sector_indices(2, 3, 1)
        det = np.linalg.det(u[np.ix_(idx, idx)])
        assert abs(det - np.exp(-1j * sum(phis))) < 1e-10


class TestSerialization:
    @given(angles, angles)
    def test_round_trip(self, a, b):
        circ = Circuit(3, (PhaseShift(0, a), BeamSplitter(1, 2, a, b), MachZehnder(0, 2, b, a), ThermalLoss(1, 0.9, 2.0)))
        assert circuit_from_json(circuit_to_json(circ)) == circ

    def test_unknown_kind_is_kept(self):
        gate = gate_from_dict({"kind": "Kerr", "modes": [0], "params": [0.1]})
        assert isinstance(gate, UnsupportedGate)
        assert gate.modes == (0,)


@given(st.integers(0, 2**32 - 1))
def test_random_sector_state_helper_is_supported_on_complete_sectors(seed):
    v = random_sector_state(np.random.default_rng(seed), 2, 5)
    assert abs(np.linalg.norm(v) - 1) < 1e-12
