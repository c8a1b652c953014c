"""Cost functions for compiling a zero-phase beamsplitter.

Analytic closed forms and simulator-backed evaluations live side by side so
each can check the other. The local four-mode layout used throughout is
``(A1, A2, B1, B2)``, which on the device is modes ``(0, 1, 4, 5)`` (or
``(2, 3, 6, 7)`` for the parallel denominator).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from x8compile.fock import (
    DEFAULT_CUTOFF,
    PureState,
    _check_modes,
    fock_probability,
    make_tmss,
    number_expectation,
    squeezed_registers,
)
from x8compile.measure import CountTable
from x8compile.optics import BeamSplitter, Circuit, PhaseShift, apply_circuit, conjugate

TARGET_PATTERN = (0, 1, 0, 1)
Q_MODES = (0, 1, 4, 5)
P_MODES_PARALLEL = (2, 3, 6, 7)

# Extra layer that turns <-i a^dag b + i b^dag a> into <n_a - n_b>. Under the
# beamsplitter convention used here this needs phase -pi/2; the zero-phase
# beamsplitter rotates the number difference into a^dag b + b^dag a instead.
ROTATION_LAYER_PHI = -math.pi / 2


class InsufficientShotsError(ValueError):
    """The likelihood-ratio denominator has no counts."""


def pattern_rate(r: float = 1.0) -> float:
    """``tanh^2 r / cosh^4 r``: probability of ``(0,1,0,1)`` on two untouched pairs."""
    return math.tanh(r) ** 2 / math.cosh(r) ** 4


# --- overlap costs -------------------------------------------------------------


def _register_overlap(u: Circuit, v_b: Circuit, r: float, cutoff: int) -> float:
    m = u.num_modes
    tmss = make_tmss(r, m, cutoff)
    shifted = v_b.relabel([j + m for j in range(m)], 2 * m)
    out = apply_circuit(tmss, Circuit(2 * m, u.gates).then(shifted))
    overlap = np.vdot(tmss.amplitudes, out.amplitudes)
    norm2 = tmss.norm_squared
    return float(min(1.0, max(0.0, 1.0 - abs(overlap) ** 2 / norm2**2)))


def overlap_cost(u: Circuit, v: Circuit, r: float = 1.0, cutoff: int = DEFAULT_CUTOFF) -> float:
    """``1 - |<TMSS| U_A conj(V)_B |TMSS>|^2``, normalized by the truncated TMSS norm.

    ``u`` and ``v`` each act on one register of ``u.num_modes`` modes.
    """
    if u.num_modes != v.num_modes:
        raise ValueError(f"register mismatch: {u.num_modes} vs {v.num_modes} modes")
    return _register_overlap(u, conjugate(v), r, cutoff)


def real_compile_cost(v: Circuit, r: float = 1.0, cutoff: int = DEFAULT_CUTOFF) -> float:
    """``1 - |<TMSS| V_A V_B |TMSS>|^2``; zero exactly when ``V`` is real in the Fock basis."""
    return _register_overlap(v, v, r, cutoff)


# --- likelihood-ratio costs ------------------------------------------------------


def d1_analytic(phi: float, r: float = 1.0) -> float:
    return math.tanh(r) ** 2 / (2 * math.cosh(r) ** 4) * (1 - math.cos(2 * phi))


def d2_analytic(phi: float) -> float:
    return 0.5 * (1 - math.cos(2 * phi))


def q_analytic(phi: float, r: float = 1.0) -> float:
    """Exact probability of ``(0,1,0,1)`` on 0145 after ``BS(pi/4, phi)`` on both registers."""
    return pattern_rate(r) * math.cos(phi) ** 2


def beamsplitter_pair_state(
    phi_a: float, phi_b: float | None = None, theta: float = math.pi / 4, r: float = 1.0, cutoff: int = DEFAULT_CUTOFF
) -> PureState:
    """Two squeezed pairs with ``BS(theta, phi)`` on each register, local layout ``(A1, A2, B1, B2)``."""
    phi_b = phi_a if phi_b is None else phi_b
    state = squeezed_registers([r, r], cutoff)
    return apply_circuit(state, [BeamSplitter(0, 1, theta, phi_a), BeamSplitter(2, 3, theta, phi_b)])


@dataclass(frozen=True)
class CostEstimate:
    value: float
    numerator_count: float
    denominator_count: float
    shots: int
    regularized: bool = False
    angle: float | None = None

    @property
    def signed(self) -> float:
        """``1 - N_Q/N_P`` before the absolute value."""
        return 1.0 - self.numerator_count / self.denominator_count


def d2_from_counts(
    q_count: float, p_count: float, shots: int, regularized: bool = False, angle: float | None = None
) -> CostEstimate:
    if p_count <= 0:
        raise InsufficientShotsError(f"denominator has no counts in {shots} shots")
    return CostEstimate(abs(1.0 - q_count / p_count), q_count, p_count, shots, regularized, angle)


def d2_estimate(
    q_table: CountTable,
    p_table: CountTable | None = None,
    *,
    regularizer: float | None = None,
    pattern: Sequence[int] = TARGET_PATTERN,
    q_modes: Sequence[int] = Q_MODES,
    p_modes: Sequence[int] = Q_MODES,
    angle: float | None = None,
) -> CostEstimate:
    """``|1 - N_Q/N_P|`` from count tables.

    Pass either ``p_table`` (serial or parallel denominator, read on ``p_modes``)
    or ``regularizer``, a precomputed denominator count for ``q_table.shots``
    shots.
    """
    nq = q_table.count(pattern, q_modes)
    if (p_table is None) == (regularizer is None):
        raise ValueError("give exactly one of p_table or regularizer")
    if regularizer is not None:
        return d2_from_counts(nq, regularizer, q_table.shots, True, angle)
    if p_table.shots != q_table.shots:
        raise ValueError(f"unequal shots: {q_table.shots} vs {p_table.shots}")
    return d2_from_counts(nq, p_table.count(pattern, p_modes), q_table.shots, False, angle)


def d2_standard_error(q: float, p: float, shots: int, p_shots: int | None = None) -> float:
    """Binomial (delta-method) standard error of ``Q/P`` for true rates ``q`` and ``p``.

    ``p_shots=0`` treats the denominator as exact.
    """
    p_shots = shots if p_shots is None else p_shots
    if q <= 0:
        return 0.0
    rel = (1 - q) / (shots * q)
    if p_shots:
        rel += (1 - p) / (p_shots * p)
    return (q / p) * math.sqrt(rel)


# --- reflection ------------------------------------------------------------------


def reflection_cost(
    phi: float, r: float = 1.0, simulate: bool = False, cutoff: int = DEFAULT_CUTOFF, phase_on: str = "A"
) -> float:
    """Quotient of the ``(0,1,0,1)`` rate after phase-then-``BS(pi/4, 0)`` to the untouched rate.

    The analytic value is ``cos^2(phi/2)``. The simulated path loads the phase
    on ``A1`` only (``phase_on="A"``), which reproduces it. With
    ``phase_on="both"`` the phase also sits on ``B1``, the quotient becomes
    ``cos^2(phi)`` and ``phi = pi`` turns into a maximum.
    """
    if not simulate:
        return math.cos(phi / 2) ** 2
    if phase_on not in ("A", "both"):
        raise ValueError(f"phase_on must be 'A' or 'both', got {phase_on!r}")
    state = squeezed_registers([r, r], cutoff)
    gates = [PhaseShift(0, phi)]
    if phase_on == "both":
        gates.append(PhaseShift(2, phi))
    gates += [BeamSplitter(0, 1, math.pi / 4, 0.0), BeamSplitter(2, 3, math.pi / 4, 0.0)]
    num = fock_probability(apply_circuit(state, gates), TARGET_PATTERN)
    den = fock_probability(state, TARGET_PATTERN)
    if den == 0:
        raise InsufficientShotsError("reference probability vanishes (r = 0)")
    return num / den


# --- occupation-based costs ---------------------------------------------------------


def _ladder(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff)), 1)


def _apply_single(tensor: np.ndarray, op: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(op, tensor, axes=([1], [axis])), 0, axis)


def hopping_expectation(state: PureState, a: int, b: int) -> float:
    """``<-i a^dag b + i b^dag a>`` with truncated ladder operators (``= 2 Im <a^dag b>``)."""
    _check_modes([a, b], state.num_modes)
    lower = _ladder(state.cutoff)
    moved = _apply_single(_apply_single(state.tensor, lower, b), lower.T, a)
    return float(2 * np.vdot(state.tensor, moved).imag)


def number_difference(state: PureState, a: int, b: int) -> float:
    return number_expectation(state, a) - number_expectation(state, b)


def rotated_number_difference(state: PureState, a: int, b: int) -> float:
    """``<n_a - n_b>`` after the extra beamsplitter layer on ``(a, b)``."""
    rotated = apply_circuit(state, [BeamSplitter(a, b, math.pi / 4, ROTATION_LAYER_PHI)])
    return number_difference(rotated, a, b)


def _occupation_reference(r: float, cutoff: int) -> float:
    ref = number_expectation(squeezed_registers([r, 0.0], cutoff), 0)
    if ref == 0:
        raise ValueError("denominator <n> vanishes; need r > 0")
    return ref


def phase_numerator(phi: float, r: float = 1.0, cutoff: int = 12) -> float:
    """Hopping expectation on ``BS(pi/4, phi)`` x2 applied to ``TMSS_04 (x) VAC_15``, via the rotation layer."""
    state = squeezed_registers([r, 0.0], cutoff)
    state = apply_circuit(state, [BeamSplitter(0, 1, math.pi / 4, phi), BeamSplitter(2, 3, math.pi / 4, phi)])
    return rotated_number_difference(state, 0, 1)


def occupation_phase_cost(phi: float, r: float = 1.0, cutoff: int = 12) -> float:
    """``|<-i a0^dag a1 + i a1^dag a0>| / <n2>``; equals ``|sin phi|``."""
    ref = _occupation_reference(r, cutoff)
    return abs(phase_numerator(phi, r, cutoff)) / ref


def occupation_theta_cost(theta: float, r: float = 1.0, cutoff: int = 12) -> float:
    """``|<n0 - n1>| / <n2>`` after ``BS(theta, 0)`` on both registers; equals ``|cos 2 theta|``."""
    ref = _occupation_reference(r, cutoff)
    state = squeezed_registers([r, 0.0], cutoff)
    state = apply_circuit(state, [BeamSplitter(0, 1, theta, 0.0), BeamSplitter(2, 3, theta, 0.0)])
    return abs(number_difference(state, 0, 1)) / ref
