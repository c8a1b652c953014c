"""Truncated Fock-basis pure states.

Amplitudes are stored as a flat complex vector of length ``cutoff**num_modes``
indexed lexicographically with mode 0 most significant, so the occupation
pattern ``(n_0, ..., n_{k-1})`` lives at ``np.ravel_multi_index(pattern, (cutoff,)*k)``.
Occupations run over ``0..cutoff-1``.

States are never renormalized after truncation. The norm deficiency is what
:func:`truncation_weight` reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12
DEFAULT_CUTOFF = 8


@dataclass(frozen=True, eq=False)
class PureState:
    """Immutable truncated multimode pure state.

    Attributes:
        num_modes: number of optical modes
        cutoff: exclusive bound on the per-mode occupation
        amplitudes: complex vector of length ``cutoff**num_modes``
    """

    num_modes: int
    cutoff: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if self.num_modes < 1:
            raise ValueError(f"num_modes must be positive, got {self.num_modes}")
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.cutoff**self.num_modes:
            raise ValueError(
                f"expected {self.cutoff ** self.num_modes} amplitudes, got {amps.size}"
            )
        norm2 = float(np.vdot(amps, amps).real)
        if norm2 > 1 + NORM_TOL:
            raise ValueError(f"squared norm {norm2} exceeds 1")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_tensor(cls, tensor: np.ndarray) -> "PureState":
        """Wrap a ``(cutoff,)*num_modes`` amplitude tensor."""
        cutoff = tensor.shape[0]
        if any(s != cutoff for s in tensor.shape):
            raise ValueError(f"tensor must be hypercubic, got shape {tensor.shape}")
        return cls(tensor.ndim, cutoff, tensor.reshape(-1))

    @property
    def tensor(self) -> np.ndarray:
        """Read-only view with one axis per mode."""
        return self.amplitudes.reshape((self.cutoff,) * self.num_modes)

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def amplitude(self, pattern: Sequence[int]) -> complex:
        _check_pattern(pattern, range(self.num_modes), self.cutoff)
        return complex(self.tensor[tuple(pattern)])

    def __repr__(self) -> str:
        return f"PureState(num_modes={self.num_modes}, cutoff={self.cutoff}, norm2={self.norm_squared:.6g})"


def _check_pattern(pattern: Sequence[int], modes: Sequence[int], cutoff: int) -> None:
    if len(pattern) != len(modes):
        raise ValueError(f"pattern {tuple(pattern)} does not match modes {tuple(modes)}")
    for n in pattern:
        if n < 0 or n >= cutoff:
            raise ValueError(f"occupation {n} outside 0..{cutoff - 1}")


def _check_modes(modes: Sequence[int], num_modes: int) -> tuple[int, ...]:
    modes = tuple(int(m) for m in modes)
    if len(set(modes)) != len(modes):
        raise ValueError(f"repeated mode in {modes}")
    for m in modes:
        if not 0 <= m < num_modes:
            raise ValueError(f"mode {m} out of range for {num_modes} modes")
    return modes


def vacuum(num_modes: int, cutoff: int = DEFAULT_CUTOFF) -> PureState:
    amps = np.zeros(cutoff**num_modes, dtype=complex)
    amps[0] = 1.0
    return PureState(num_modes, cutoff, amps)


def tmss_amplitudes(r: float, cutoff: int) -> np.ndarray:
    """Per-pair amplitudes ``tanh(r)**n / cosh(r)`` for ``n < cutoff``."""
    if r < 0:
        raise ValueError(f"squeezing must be non-negative, got {r}")
    return np.tanh(r) ** np.arange(cutoff) / np.cosh(r)


def squeezed_registers(rs: Sequence[float], cutoff: int = DEFAULT_CUTOFF) -> PureState:
    """Two registers of ``len(rs)`` modes each, pair ``j`` squeezed with ``rs[j]``.

    Pair ``j`` couples mode ``j`` with mode ``j + len(rs)``; ``r = 0`` leaves
    the pair in vacuum.
    """
    m = len(rs)
    if m < 1:
        raise ValueError("need at least one mode pair")
    # pair tensors with axes (A_j, B_j), later permuted to A_0..A_{m-1}, B_0..B_{m-1}
    tensor = np.ones((), dtype=complex)
    for r in rs:
        tensor = np.multiply.outer(tensor, np.diag(tmss_amplitudes(r, cutoff)).astype(complex))
    order = [2 * j for j in range(m)] + [2 * j + 1 for j in range(m)]
    return PureState.from_tensor(np.transpose(tensor, order))


def make_tmss(r: float, pair_count: int, cutoff: int = DEFAULT_CUTOFF) -> PureState:
    """``pair_count`` identical two-mode squeezed vacua in the X8 layout.

    Pair ``j`` couples mode ``j`` and mode ``j + pair_count``.
    """
    if cutoff < 2:
        raise ValueError(f"cutoff must be at least 2, got {cutoff}")
    if pair_count < 1:
        raise ValueError(f"pair_count must be positive, got {pair_count}")
    return squeezed_registers([r] * pair_count, cutoff)


def tensor_product(a: PureState, b: PureState) -> PureState:
    if a.cutoff != b.cutoff:
        raise ValueError(f"cutoff mismatch: {a.cutoff} vs {b.cutoff}")
    return PureState(a.num_modes + b.num_modes, a.cutoff, np.kron(a.amplitudes, b.amplitudes))


def permute_modes(state: PureState, order: Sequence[int]) -> PureState:
    """New state whose mode ``i`` is mode ``order[i]`` of ``state``."""
    order = _check_modes(order, state.num_modes)
    if len(order) != state.num_modes:
        raise ValueError("order must list every mode once")
    return PureState.from_tensor(np.transpose(state.tensor, order))


def marginal_probabilities(probs: np.ndarray, modes: Sequence[int]) -> np.ndarray:
    """Sum a full probability tensor over every axis not in ``modes``.

    The result has one axis per listed mode, in the listed order.
    """
    modes = _check_modes(modes, probs.ndim)
    rest = tuple(ax for ax in range(probs.ndim) if ax not in modes)
    summed = probs.sum(axis=rest) if rest else probs
    kept = sorted(modes)
    return np.transpose(summed, [kept.index(m) for m in modes])


def fock_probability(state: PureState, pattern: Sequence[int], modes: Sequence[int] | None = None) -> float:
    """Probability of ``pattern`` on ``modes``, marginalizing every other mode.

    ``modes`` defaults to all modes in order. Nothing is renormalized, so the
    value is the exact infinite-space probability whenever the contributing
    amplitudes lie below the cutoff.
    """
    if modes is None:
        modes = range(state.num_modes)
    modes = _check_modes(modes, state.num_modes)
    _check_pattern(pattern, modes, state.cutoff)
    probs = np.abs(state.tensor) ** 2
    return float(marginal_probabilities(probs, modes)[tuple(pattern)])


def truncation_weight(state: PureState) -> float:
    return max(0.0, 1.0 - state.norm_squared)


def number_expectation(state: PureState, mode: int) -> float:
    """Mean photon number of one mode."""
    (mode,) = _check_modes([mode], state.num_modes)
    probs = marginal_probabilities(np.abs(state.tensor) ** 2, [mode])
    return float(np.arange(state.cutoff) @ probs)
