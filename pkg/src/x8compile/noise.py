"""Thermal attenuation on truncated density matrices.

The thermal attenuator with transmissivity ``eta`` and environment occupation
``nbar`` maps the mean photon number ``n -> eta*n + (1-eta)*nbar``. It is built
as a pure-loss channel with transmissivity ``eta/G`` followed by a
quantum-limited amplifier of gain ``G = 1 + (1-eta)*nbar``. Both factors have
closed-form Kraus operators.

The amplifier pushes population upward, so on a truncated output space the
channel loses trace near the cutoff. That loss is left visible (``1 - trace``)
rather than renormalized away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from x8compile.fock import NORM_TOL, PureState, _check_modes, marginal_probabilities
from x8compile.optics import UNITARY_KINDS, Circuit, GateOp, ThermalLoss, apply_to_tensor


@dataclass(frozen=True, eq=False)
class MixedState:
    """Immutable truncated density operator.

    Attributes:
        num_modes: number of optical modes
        cutoff: exclusive bound on the per-mode occupation
        density: ``cutoff**num_modes`` square complex matrix
    """

    num_modes: int
    cutoff: int
    density: np.ndarray

    def __post_init__(self) -> None:
        dim = self.cutoff**self.num_modes
        rho = np.asarray(self.density, dtype=complex).reshape(dim, dim)
        tr = float(np.trace(rho).real)
        if tr > 1 + NORM_TOL:
            raise ValueError(f"trace {tr} exceeds 1")
        rho.flags.writeable = False
        object.__setattr__(self, "density", rho)

    @classmethod
    def from_tensor(cls, tensor: np.ndarray) -> "MixedState":
        """Wrap a tensor with ket axes followed by bra axes."""
        n = tensor.ndim // 2
        d = tensor.shape[0]
        return cls(n, d, tensor.reshape(d**n, d**n))

    @property
    def tensor(self) -> np.ndarray:
        return self.density.reshape((self.cutoff,) * (2 * self.num_modes))

    @property
    def trace(self) -> float:
        return float(np.trace(self.density).real)

    @property
    def purity(self) -> float:
        return float(np.vdot(self.density, self.density).real)

    def probabilities(self) -> np.ndarray:
        """Photon-number distribution, one axis per mode."""
        diag = np.diagonal(self.density).real
        return np.clip(diag, 0.0, None).reshape((self.cutoff,) * self.num_modes)

    def is_physical(self, tol: float = 1e-10) -> bool:
        """Hermitian to ``tol`` and no eigenvalue below ``-tol``."""
        rho = self.density
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            return False
        return bool(np.linalg.eigvalsh(rho).min() >= -tol)

    def __repr__(self) -> str:
        return f"MixedState(num_modes={self.num_modes}, cutoff={self.cutoff}, trace={self.trace:.6g})"


def promote(state: PureState) -> MixedState:
    amps = state.amplitudes
    return MixedState(state.num_modes, state.cutoff, np.outer(amps, amps.conj()))


# --- Kraus operators ---------------------------------------------------------


def _check_params(eta: float, nbar: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {eta}")
    if nbar < 0:
        raise ValueError(f"thermal occupation must be non-negative, got {nbar}")


def _gain_and_loss(eta: float, nbar: float) -> tuple[float, float]:
    gain = 1.0 + (1.0 - eta) * nbar
    return gain, eta / gain


def pure_loss_kraus(tau: float, cutoff: int) -> list[np.ndarray]:
    """``A_l = sum_n sqrt(C(n,l) tau^(n-l) (1-tau)^l) |n-l><n|`` for ``l < cutoff``."""
    ops = []
    for l in range(cutoff):
        k = np.zeros((cutoff, cutoff))
        for n in range(l, cutoff):
            k[n - l, n] = math.sqrt(math.comb(n, l) * tau ** (n - l) * (1 - tau) ** l)
        if np.any(k):
            ops.append(k)
    return ops


def amplifier_kraus(gain: float, cutoff: int, out_cutoff: int) -> list[np.ndarray]:
    """``B_l = sum_n sqrt(C(n+l,l) (1-1/G)^l / G^(n+1)) |n+l><n|``, rows cut at ``out_cutoff``."""
    x = 1.0 - 1.0 / gain
    ops = []
    for l in range(out_cutoff):
        k = np.zeros((out_cutoff, cutoff))
        for n in range(min(cutoff, out_cutoff - l)):
            k[n + l, n] = math.sqrt(math.comb(n + l, l) * x**l / gain ** (n + 1))
        if np.any(k):
            ops.append(k)
    return ops


def thermal_loss_kraus(eta: float, nbar: float, cutoff: int, out_cutoff: int | None = None) -> list[np.ndarray]:
    """Kraus set of the thermal attenuator, each of shape ``(out_cutoff, cutoff)``.

    ``out_cutoff`` defaults to ``cutoff``. Completeness ``sum K^dag K = I`` is
    exact for pure loss (``nbar = 0``). With ``nbar > 0`` column ``n`` falls short
    of 1 by the amplifier's probability of reaching ``out_cutoff`` or above.
    Enlarging ``out_cutoff`` makes that shortfall as small as needed.
    """
    _check_params(eta, nbar)
    out_cutoff = cutoff if out_cutoff is None else out_cutoff
    if out_cutoff < cutoff:
        raise ValueError("out_cutoff must be at least cutoff")
    gain, tau = _gain_and_loss(eta, nbar)
    losses = pure_loss_kraus(tau, cutoff)
    if gain == 1.0:
        pad = np.zeros((out_cutoff, cutoff))
        return [np.vstack([a, pad[cutoff:]]) for a in losses]
    amps = amplifier_kraus(gain, cutoff, out_cutoff)
    return [b @ a for b in amps for a in losses]


def photon_transition_matrix(eta: float, nbar: float, cutoff: int, out_cutoff: int | None = None) -> np.ndarray:
    """``T[m, n]`` = probability that ``n`` input photons leave as ``m``.

    The channel is phase covariant, so it sends diagonal density matrices to
    diagonal ones and this matrix fully describes its action on photon-number
    statistics.
    """
    _check_params(eta, nbar)
    out_cutoff = cutoff if out_cutoff is None else out_cutoff
    gain, tau = _gain_and_loss(eta, nbar)
    loss = np.zeros((cutoff, cutoff))
    for n in range(cutoff):
        for l in range(n + 1):
            loss[n - l, n] = math.comb(n, l) * tau ** (n - l) * (1 - tau) ** l
    amp = np.zeros((out_cutoff, cutoff))
    x = 1.0 - 1.0 / gain
    for n in range(cutoff):
        for l in range(out_cutoff - n):
            amp[n + l, n] = math.comb(n + l, l) * x**l / gain ** (n + 1)
    return amp @ loss


def superoperator(kraus: Sequence[np.ndarray]) -> np.ndarray:
    """``S[m, m', n, n'] = sum_K K[m, n] conj(K[m', n'])``."""
    return sum(np.einsum("mn,ab->manb", k, k.conj()) for k in kraus)


# --- application -------------------------------------------------------------


def _apply_superop(tensor: np.ndarray, sop: np.ndarray, ket_axis: int, bra_axis: int) -> np.ndarray:
    out = np.tensordot(sop, tensor, axes=([2, 3], [ket_axis, bra_axis]))
    return np.moveaxis(out, [0, 1], [ket_axis, bra_axis])


def apply_channel(rho: MixedState, mode: int, eta: float, nbar: float) -> MixedState:
    """Thermal attenuator on one mode; output stays on the input cutoff."""
    _check_modes([mode], rho.num_modes)
    sop = superoperator(thermal_loss_kraus(eta, nbar, rho.cutoff))
    return MixedState.from_tensor(_apply_superop(rho.tensor, sop, mode, mode + rho.num_modes))


def apply_channel_modes(rho: MixedState, modes: Iterable[int], eta: float, nbar: float) -> MixedState:
    modes = _check_modes(list(modes), rho.num_modes)
    sop = superoperator(thermal_loss_kraus(eta, nbar, rho.cutoff))
    tensor = rho.tensor
    for m in modes:
        tensor = _apply_superop(tensor, sop, m, m + rho.num_modes)
    return MixedState.from_tensor(tensor)


def apply_gate_mixed(rho: MixedState, gate: GateOp) -> MixedState:
    """``U rho U^dag`` for unitary gates; thermal loss goes through its channel."""
    _check_modes(gate.modes, rho.num_modes)
    if isinstance(gate, ThermalLoss):
        return apply_channel(rho, gate.mode, gate.eta, gate.nbar)
    if not isinstance(gate, UNITARY_KINDS):
        raise TypeError(f"cannot apply {gate.kind}")
    n, d = rho.num_modes, rho.cutoff
    tensor = apply_to_tensor(rho.tensor, gate, d)
    tensor = apply_to_tensor(tensor, gate, d, offset=n, conj=True)
    return MixedState.from_tensor(tensor)


def apply_circuit_mixed(rho: MixedState, circuit: Circuit | Iterable[GateOp]) -> MixedState:
    gates = circuit.gates if isinstance(circuit, Circuit) else tuple(circuit)
    for gate in gates:
        rho = apply_gate_mixed(rho, gate)
    return rho


def lossy_probabilities(probs: np.ndarray, modes: Iterable[int], eta: float, nbar: float) -> np.ndarray:
    """Push a photon-number distribution through thermal loss on ``modes``.

    Valid when the channel acts after every unitary. It is then exact, because
    the attenuator is phase covariant.
    """
    d = probs.shape[0]
    t = photon_transition_matrix(eta, nbar, d)
    out = probs
    for m in _check_modes(list(modes), probs.ndim):
        out = np.moveaxis(np.tensordot(t, out, axes=([1], [m])), 0, m)
    return out


def mean_photon_number(rho: MixedState, mode: int) -> float:
    probs = marginal_probabilities(rho.probabilities(), [mode])
    return float(np.arange(rho.cutoff) @ probs)
