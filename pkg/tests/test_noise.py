import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dilation_thermal_channel, random_state_vector
from x8compile.fock import PureState, squeezed_registers, vacuum
from x8compile.noise import (
    MixedState,
    apply_channel,
    apply_channel_modes,
    apply_circuit_mixed,
    apply_gate_mixed,
    lossy_probabilities,
    mean_photon_number,
    photon_transition_matrix,
    promote,
    superoperator,
    thermal_loss_kraus,
)
from x8compile.optics import BeamSplitter, PhaseShift, ThermalLoss, apply_circuit

etas = st.floats(0.0, 1.0)
nbars = st.floats(0.0, 3.0)


def random_density(seed: int, num_modes: int, cutoff: int, rank: int = 3, low: int | None = None) -> MixedState:
    """Mixture of random pure states; with ``low`` the support is cut to occupations below it."""
    rng = np.random.default_rng(seed)
    dim = cutoff**num_modes
    rho = np.zeros((dim, dim), dtype=complex)
    weights = rng.dirichlet(np.ones(rank))
    for w in weights:
        v = random_state_vector(rng, dim).reshape((cutoff,) * num_modes)
        if low is not None:
            mask = np.indices(v.shape).max(axis=0) >= low
            v[mask] = 0
            v /= np.linalg.norm(v)
        v = v.reshape(-1)
        rho += w * np.outer(v, v.conj())
    return MixedState(num_modes, cutoff, rho)


def completeness_defect(kraus, cutoff):
    total = sum(k.conj().T @ k for k in kraus)
    return np.abs(total - np.eye(cutoff))


class TestPromote:
    def test_vacuum_projector(self):
        rho = promote(vacuum(2, 3))
        expected = np.zeros((9, 9))
        expected[0, 0] = 1
        np.testing.assert_array_equal(rho.density, expected)

    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 1.0))
    def test_trace_and_purity(self, seed, scale):
        psi = PureState(2, 3, scale * random_state_vector(np.random.default_rng(seed), 9))
        rho = promote(psi)
        assert rho.trace == pytest.approx(psi.norm_squared, abs=1e-12)
        assert rho.purity == pytest.approx(psi.norm_squared**2, abs=1e-12)


class TestKraus:
    def test_identity_channel(self):
        ops = thermal_loss_kraus(1.0, 0.0, 6)
        assert len(ops) == 1
        np.testing.assert_allclose(ops[0], np.eye(6), atol=1e-15)

    @given(etas)
    def test_pure_loss_is_complete(self, eta):
        assert completeness_defect(thermal_loss_kraus(eta, 0.0, 8), 8).max() < 1e-12

    @given(st.floats(0.0, 0.99), st.floats(0.1, 3.0))
    def test_thermal_completeness_with_margin(self, eta, nbar):
        cutoff = 10
        ops = thermal_loss_kraus(eta, nbar, cutoff, out_cutoff=cutoff + 90)
        defect = completeness_defect(ops, cutoff)
        assert defect[: cutoff - 4, : cutoff - 4].max() < 1e-10

    @given(st.floats(0.0, 0.99), st.floats(0.1, 3.0))
    def test_square_truncation_defect_is_the_reported_leak(self, eta, nbar):
        cutoff = 8
        ops = thermal_loss_kraus(eta, nbar, cutoff)
        total = sum(k.conj().T @ k for k in ops)
        leak = 1 - photon_transition_matrix(eta, nbar, cutoff).sum(axis=0)
        np.testing.assert_allclose(np.diag(total).real, 1 - leak, atol=1e-12)
        assert np.abs(total - np.diag(np.diag(total))).max() < 1e-12

    @pytest.mark.parametrize("eta, nbar", [(-0.1, 0.0), (1.1, 0.0), (0.5, -1.0)])
    def test_rejects_out_of_range(self, eta, nbar):
        with pytest.raises(ValueError):
            thermal_loss_kraus(eta, nbar, 4)

    @given(st.floats(0.0, 0.99))
    def test_vacuum_fixed_under_pure_loss(self, eta):
        rho = apply_channel(promote(vacuum(1, 6)), 0, eta, 0.0)
        np.testing.assert_allclose(rho.density, promote(vacuum(1, 6)).density, atol=1e-15)

    def test_thermal_vacuum_mean_photon(self):
        rho = apply_channel(promote(vacuum(1, 12)), 0, 0.9, 2.0)
        assert mean_photon_number(rho, 0) == pytest.approx(0.2, abs=1e-3)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 2.0), st.integers(0, 5))
    def test_mean_photon_moment(self, eta, nbar, n):
        probs = photon_transition_matrix(eta, nbar, 6, out_cutoff=120)[:, n]
        assert np.arange(120) @ probs == pytest.approx(eta * n + (1 - eta) * nbar, abs=1e-9)


class TestChannelApplication:
    def test_identity_channel_leaves_state(self):
        rho = random_density(3, 2, 4)
        out = apply_channel(rho, 1, 1.0, 0.0)
        np.testing.assert_allclose(out.density, rho.density, atol=1e-12)

    @given(st.integers(0, 2**32 - 1), etas, nbars, st.integers(0, 1))
    def test_positive_and_trace_non_increasing(self, seed, eta, nbar, mode):
        rho = random_density(seed, 2, 4)
        out = apply_channel(rho, mode, eta, nbar)
        assert out.is_physical(1e-10)
        assert out.trace <= rho.trace + 1e-10

    def test_mode_out_of_range(self):
        with pytest.raises(ValueError):
            apply_channel(promote(vacuum(2, 3)), 2, 0.9, 0.0)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
    def test_pure_loss_composition(self, eta1, eta2, seed):
        rho = random_density(seed, 1, 8, low=4)
        two = apply_channel(apply_channel(rho, 0, eta1, 0.0), 0, eta2, 0.0)
        one = apply_channel(rho, 0, eta1 * eta2, 0.0)
        np.testing.assert_allclose(two.density[:4, :4], one.density[:4, :4], atol=1e-10)

    @pytest.mark.parametrize("eta, nbar", [(0.9, 0.0), (0.9, 0.5), (0.7, 2.0), (0.3, 1.0)])
    def test_matches_beamsplitter_dilation(self, eta, nbar):
        rho = random_density(11, 1, 5, rank=2)
        ours = apply_channel(MixedState(1, 5, rho.density), 0, eta, nbar)
        env_cutoff = 60 if nbar >= 1 else 35
        oracle = dilation_thermal_channel(rho.density, eta, nbar, env_cutoff)
        np.testing.assert_allclose(ours.density, oracle, atol=1e-8)

    @given(etas, nbars)
    def test_fock_inputs_follow_transition_matrix(self, eta, nbar):
        d = 6
        t = photon_transition_matrix(eta, nbar, d)
        for n in range(d):
            rho = np.zeros((d, d))
            rho[n, n] = 1
            out = apply_channel(MixedState(1, d, rho), 0, eta, nbar)
            np.testing.assert_allclose(np.diag(out.density).real, t[:, n], atol=1e-12)

    def test_superoperator_shape(self):
        assert superoperator(thermal_loss_kraus(0.8, 0.3, 3)).shape == (3, 3, 3, 3)


class TestMixedCircuits:
    def test_unitary_gate_matches_pure_path(self):
        psi = squeezed_registers([0.8], 5)
        gates = [BeamSplitter(0, 1, 0.6, 0.4), PhaseShift(1, 1.1)]
        rho = apply_circuit_mixed(promote(psi), gates)
        np.testing.assert_allclose(rho.density, promote(apply_circuit(psi, gates)).density, atol=1e-12)

    def test_thermal_loss_gate_routes_to_channel(self):
        rho = promote(squeezed_registers([0.5], 4))
        a = apply_gate_mixed(rho, ThermalLoss(1, 0.8, 0.4))
        b = apply_channel(rho, 1, 0.8, 0.4)
        np.testing.assert_allclose(a.density, b.density, atol=1e-15)

    @pytest.mark.parametrize("phi", [0.0, 0.7, math.pi / 2])
    def test_loss_after_gates_acts_on_statistics(self, phi):
        d = 6
        psi = apply_circuit(squeezed_registers([1.0, 1.0], d), [BeamSplitter(0, 1, math.pi / 4, phi), BeamSplitter(2, 3, math.pi / 4, phi)])
        dense = apply_channel_modes(promote(psi), range(4), 0.9, 2.0).probabilities()
        fast = lossy_probabilities(np.abs(psi.tensor) ** 2, range(4), 0.9, 2.0)
        np.testing.assert_allclose(fast, dense, atol=1e-12)

    def test_trace_above_one_rejected(self):
        with pytest.raises(ValueError):
            MixedState(1, 2, np.diag([1.0, 0.1]))
