"""Derivatives of circuit observables with respect to a shared beamsplitter phase.

A circuit template marks the gate positions whose beamsplitter phase carries
the parameter. Each marked gate contributes a first-order trigonometric
dependence, so shifting one gate at a time by ``+-s`` and weighting with
``1/(2 sin s)`` gives the exact derivative (the product rule over gates).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from x8compile.costs import TARGET_PATTERN, phase_numerator, rotated_number_difference
from x8compile.fock import DEFAULT_CUTOFF, PureState, fock_probability, squeezed_registers
from x8compile.optics import BeamSplitter, Circuit, apply_circuit

# evaluate(circuit, rng) -> float; rng is None on exact backends
Evaluator = Callable[[Circuit, "np.random.Generator | None"], float]


@dataclass(frozen=True)
class GradientRequest:
    """What to differentiate and how to evaluate it.

    Attributes:
        template: circuit whose marked gates are beamsplitters; their phases get overwritten.
        positions: indices into ``template.gates`` carrying the parameter.
        evaluate: observable of a concrete circuit.
        shift: shift magnitude ``s``.
        seed: base seed for sampled evaluators; each shifted evaluation gets its own stream.
    """

    template: Circuit
    positions: tuple[int, ...]
    evaluate: Evaluator
    shift: float = math.pi / 2
    seed: int | None = None

    def __post_init__(self) -> None:
        positions = tuple(self.positions)
        if not positions:
            raise ValueError("at least one marked gate position is required")
        if self.shift == 0 or math.isclose(math.sin(self.shift), 0.0, abs_tol=1e-12):
            raise ValueError(f"shift {self.shift} gives a vanishing denominator")
        for p in positions:
            if not 0 <= p < len(self.template.gates):
                raise ValueError(f"position {p} outside the template")
            if not isinstance(self.template.gates[p], BeamSplitter):
                raise ValueError(f"gate at position {p} is not a beamsplitter")
        object.__setattr__(self, "positions", positions)


def with_phases(template: Circuit, positions: Sequence[int], phases: Sequence[float]) -> Circuit:
    gates = list(template.gates)
    for p, phi in zip(positions, phases):
        gates[p] = dataclasses.replace(gates[p], phi=float(phi))
    return Circuit(template.num_modes, tuple(gates))


def evaluate_at(req: GradientRequest, phi: float, rng: np.random.Generator | None = None) -> float:
    circuit = with_phases(req.template, req.positions, [phi] * len(req.positions))
    return req.evaluate(circuit, rng)


def parameter_shift_gradient(req: GradientRequest, phi: float) -> float:
    """``sum_g [f(phi + s at g) - f(phi - s at g)] / (2 sin s)``.

    At ``s = pi/2`` the weight is ``1/2``.
    """
    k = len(req.positions)
    streams = np.random.SeedSequence(req.seed).spawn(2 * k) if req.seed is not None else [None] * (2 * k)
    total = 0.0
    for i, _ in enumerate(req.positions):
        values = []
        for sign, stream in ((1, streams[2 * i]), (-1, streams[2 * i + 1])):
            phases = [phi] * k
            phases[i] = phi + sign * req.shift
            rng = np.random.default_rng(stream) if stream is not None else None
            values.append(req.evaluate(with_phases(req.template, req.positions, phases), rng))
        total += values[0] - values[1]
    return total / (2 * math.sin(req.shift))


def finite_difference(f: Callable[[float], float], phi: float, h: float = 1e-5) -> float:
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    return (f(phi + h) - f(phi - h)) / (2 * h)


# --- evaluators ----------------------------------------------------------------


def shared_phase_template(theta: float = math.pi / 4) -> tuple[Circuit, tuple[int, int]]:
    """Beamsplitter on each register of the local ``(A1, A2, B1, B2)`` layout, both phases marked."""
    return Circuit(4, (BeamSplitter(0, 1, theta, 0.0), BeamSplitter(2, 3, theta, 0.0))), (0, 1)


def _probability(state: PureState, circuit: Circuit, pattern: Sequence[int]) -> float:
    return fock_probability(apply_circuit(state, circuit), pattern)


def _sampled(prob: float, shots: int | None, rng: np.random.Generator | None) -> float:
    if shots is None:
        return prob
    if rng is None:
        raise ValueError("sampled evaluation needs a generator")
    return rng.binomial(shots, min(max(prob, 0.0), 1.0)) / shots


def q_evaluator(
    r: float = 1.0, cutoff: int = DEFAULT_CUTOFF, shots: int | None = None, pattern: Sequence[int] = TARGET_PATTERN
) -> Evaluator:
    """Probability (or sampled frequency with ``shots``) of ``pattern`` on two squeezed pairs."""
    state = squeezed_registers([r, r], cutoff)

    def evaluate(circuit: Circuit, rng: np.random.Generator | None = None) -> float:
        return _sampled(_probability(state, circuit, pattern), shots, rng)

    return evaluate


def d2_evaluator(
    r: float = 1.0, cutoff: int = DEFAULT_CUTOFF, shots: int | None = None, pattern: Sequence[int] = TARGET_PATTERN
) -> Evaluator:
    """Signed ratio cost ``1 - Q/P`` with ``P`` the exact untouched rate.

    The signed form is smooth at the optimum; its absolute value is the
    reported cost. Only ``Q`` is sampled when ``shots`` is given.
    """
    state = squeezed_registers([r, r], cutoff)
    p = fock_probability(state, pattern)
    q = q_evaluator(r, cutoff, shots, pattern)

    def evaluate(circuit: Circuit, rng: np.random.Generator | None = None) -> float:
        return 1.0 - q(circuit, rng) / p

    return evaluate


def hopping_evaluator(r: float = 1.0, cutoff: int = 12) -> Evaluator:
    """Number difference after the rotation layer, on one squeezed pair plus vacuum."""
    state = squeezed_registers([r, 0.0], cutoff)

    def evaluate(circuit: Circuit, rng: np.random.Generator | None = None) -> float:
        return rotated_number_difference(apply_circuit(state, circuit), 0, 1)

    return evaluate


def phase_numerator_gradient(phi: float, r: float = 1.0, cutoff: int = 12) -> float:
    """Shift-rule derivative of the hopping numerator (exact backend)."""
    template, positions = shared_phase_template()
    return parameter_shift_gradient(GradientRequest(template, positions, hopping_evaluator(r, cutoff)), phi)


__all__ = [
    "Evaluator",
    "GradientRequest",
    "d2_evaluator",
    "evaluate_at",
    "shared_phase_template",
    "finite_difference",
    "hopping_evaluator",
    "parameter_shift_gradient",
    "phase_numerator",
    "phase_numerator_gradient",
    "q_evaluator",
    "with_phases",
]
