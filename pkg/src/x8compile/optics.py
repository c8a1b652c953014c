"""Linear-optical gates on truncated Fock states.

Conventions:

* ``PhaseShift(mode, phi)`` is ``exp(i*phi*n)``.
* ``BeamSplitter(a, b, theta, phi)`` is ``exp(theta*(e^{i phi} a^dag b - e^{-i phi} b^dag a))``.
  On the single-photon sector, basis ``(|1,0>, |0,1>)``, it reads
  ``[[cos theta, e^{i phi} sin theta], [-e^{-i phi} sin theta, cos theta]]``.
* ``MachZehnder(a, b, phi1, phi2)`` is
  ``BS(pi/4, pi/2) . R_a(phi1) . BS(pi/4, pi/2) . R_a(phi2)`` as an operator
  product, so ``R_a(phi2)`` acts first.
* A :class:`Circuit` lists gates in application order.

Two-mode gates are exponentiated exactly inside each total-photon-number sector.
Sectors that straddle the per-mode cutoff are exponentiated with their
restricted generator. That keeps every truncated gate unitary, but only the
complete sectors (total photons below the cutoff) match the infinite-dimensional
gate, and only they compose exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

from x8compile.fock import PureState, _check_modes


@dataclass(frozen=True)
class PhaseShift:
    mode: int
    phi: float

    kind = "PhaseShift"

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.mode,)

    @property
    def params(self) -> tuple[float, ...]:
        return (self.phi,)


@dataclass(frozen=True)
class BeamSplitter:
    mode_a: int
    mode_b: int
    theta: float
    phi: float = 0.0

    kind = "BeamSplitter"

    def __post_init__(self) -> None:
        if self.mode_a == self.mode_b:
            raise ValueError(f"{self.kind} needs two distinct modes, got {self.mode_a} twice")

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.mode_a, self.mode_b)

    @property
    def params(self) -> tuple[float, ...]:
        return (self.theta, self.phi)


@dataclass(frozen=True)
class MachZehnder:
    mode_a: int
    mode_b: int
    phi1: float
    phi2: float

    kind = "MachZehnder"

    def __post_init__(self) -> None:
        if self.mode_a == self.mode_b:
            raise ValueError(f"{self.kind} needs two distinct modes, got {self.mode_a} twice")

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.mode_a, self.mode_b)

    @property
    def params(self) -> tuple[float, ...]:
        return (self.phi1, self.phi2)


@dataclass(frozen=True)
class ThermalLoss:
    """Thermal attenuator marker; only the density-matrix path can apply it."""

    mode: int
    eta: float
    nbar: float = 0.0

    kind = "ThermalLoss"

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.mode,)

    @property
    def params(self) -> tuple[float, ...]:
        return (self.eta, self.nbar)


@dataclass(frozen=True)
class UnsupportedGate:
    """Placeholder for a gate kind the simulator cannot run (e.g. parsed from a job file)."""

    name: str
    modes: tuple[int, ...] = ()
    params: tuple[float, ...] = ()

    kind = "Unsupported"


GateOp = Union[PhaseShift, BeamSplitter, MachZehnder, ThermalLoss, UnsupportedGate]
UNITARY_KINDS = (PhaseShift, BeamSplitter, MachZehnder)


@dataclass(frozen=True)
class Circuit:
    num_modes: int
    gates: tuple = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        for gate in self.gates:
            _check_modes(gate.modes, self.num_modes)
            if not all(math.isfinite(p) for p in gate.params):
                raise ValueError(f"non-finite parameter in {gate}")

    def __iter__(self):
        return iter(self.gates)

    def __len__(self) -> int:
        return len(self.gates)

    def then(self, other: "Circuit") -> "Circuit":
        return Circuit(max(self.num_modes, other.num_modes), self.gates + other.gates)

    def relabel(self, mapping: Sequence[int], num_modes: int) -> "Circuit":
        """Move gate ``g`` on mode ``m`` to mode ``mapping[m]``."""
        return Circuit(num_modes, tuple(_relabel(g, mapping) for g in self.gates))


def _relabel(gate: GateOp, mapping: Sequence[int]) -> GateOp:
    if isinstance(gate, (PhaseShift, ThermalLoss)):
        return type(gate)(mapping[gate.mode], *gate.params)
    if isinstance(gate, (BeamSplitter, MachZehnder)):
        return type(gate)(mapping[gate.mode_a], mapping[gate.mode_b], *gate.params)
    return UnsupportedGate(gate.name, tuple(mapping[m] for m in gate.modes), gate.params)


def expand(gate: GateOp) -> list[GateOp]:
    """Rewrite a Mach-Zehnder as its phase/beamsplitter word, in application order."""
    if isinstance(gate, MachZehnder):
        a, b = gate.mode_a, gate.mode_b
        return [
            PhaseShift(a, gate.phi2),
            BeamSplitter(a, b, math.pi / 4, math.pi / 2),
            PhaseShift(a, gate.phi1),
            BeamSplitter(a, b, math.pi / 4, math.pi / 2),
        ]
    return [gate]


def conjugate(circuit: Circuit) -> Circuit:
    """Entrywise complex conjugate of the circuit's Fock-basis matrix.

    Phase-shift and beamsplitter phases flip sign. Mach-Zehnders are expanded
    first because their internal beamsplitter phase flips too.
    """
    out = []
    for gate in circuit.gates:
        for g in expand(gate):
            if isinstance(g, PhaseShift):
                out.append(PhaseShift(g.mode, -g.phi))
            elif isinstance(g, BeamSplitter):
                out.append(BeamSplitter(g.mode_a, g.mode_b, g.theta, -g.phi))
            else:
                raise TypeError(f"cannot conjugate {g}")
    return Circuit(circuit.num_modes, tuple(out))


# --- gate matrices -----------------------------------------------------------


def _sector_range(n: int, cutoff: int | None) -> range:
    if cutoff is None:
        return range(n + 1)
    return range(max(0, n - cutoff + 1), min(n, cutoff - 1) + 1)


def sector_generator(theta: float, phi: float, n: int, cutoff: int | None = None) -> np.ndarray:
    """Beamsplitter generator on the ``n``-photon sector, basis ``|k, n-k>`` by increasing ``k``.

    With ``cutoff`` set, only states with both occupations below it are kept.
    """
    ks = _sector_range(n, cutoff)
    dim = len(ks)
    gen = np.zeros((dim, dim), dtype=complex)
    for i, k in enumerate(ks[:-1]):
        hop = math.sqrt((k + 1) * (n - k))
        gen[i + 1, i] = theta * np.exp(1j * phi) * hop
        gen[i, i + 1] = -theta * np.exp(-1j * phi) * hop
    return gen


def sector_unitary(theta: float, phi: float, n: int, cutoff: int | None = None) -> np.ndarray:
    gen = sector_generator(theta, phi, n, cutoff)
    # gen is anti-Hermitian: exp(gen) = V exp(-i w) V^dag with i*gen = V w V^dag
    w, v = np.linalg.eigh(1j * gen)
    return (v * np.exp(-1j * w)) @ v.conj().T


@lru_cache(maxsize=512)
def _bs_matrix_cached(theta: float, phi: float, cutoff: int) -> np.ndarray:
    d = cutoff
    out = np.zeros((d * d, d * d), dtype=complex)
    for n in range(2 * d - 1):
        ks = np.array(_sector_range(n, d))
        idx = ks * d + (n - ks)
        out[np.ix_(idx, idx)] = sector_unitary(theta, phi, n, d)
    out.flags.writeable = False
    return out


def bs_two_mode_matrix(theta: float, phi: float, cutoff: int) -> np.ndarray:
    """Beamsplitter on the ``cutoff**2`` two-mode space, block diagonal in photon number."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    return _bs_matrix_cached(float(theta), float(phi), int(cutoff))


def phase_diagonal(phi: float, cutoff: int) -> np.ndarray:
    return np.exp(1j * phi * np.arange(cutoff))


@lru_cache(maxsize=256)
def _mz_matrix_cached(phi1: float, phi2: float, cutoff: int) -> np.ndarray:
    bs = bs_two_mode_matrix(math.pi / 4, math.pi / 2, cutoff)
    ones = np.ones(cutoff)
    p1 = np.kron(phase_diagonal(phi1, cutoff), ones)
    p2 = np.kron(phase_diagonal(phi2, cutoff), ones)
    out = (bs * p1) @ (bs * p2)
    out.flags.writeable = False
    return out


def gate_matrix(gate: GateOp, cutoff: int) -> np.ndarray:
    """Dense matrix of a unitary gate on the modes it touches (``cutoff`` or ``cutoff**2`` square)."""
    if isinstance(gate, PhaseShift):
        return np.diag(phase_diagonal(gate.phi, cutoff))
    if isinstance(gate, BeamSplitter):
        return bs_two_mode_matrix(gate.theta, gate.phi, cutoff)
    if isinstance(gate, MachZehnder):
        return _mz_matrix_cached(float(gate.phi1), float(gate.phi2), int(cutoff))
    raise TypeError(f"{gate.kind} is not a unitary gate")


# --- application -------------------------------------------------------------


def _apply_diag(tensor: np.ndarray, diag: np.ndarray, axis: int) -> np.ndarray:
    shape = [1] * tensor.ndim
    shape[axis] = diag.size
    return tensor * diag.reshape(shape)


def _apply_two_mode(tensor: np.ndarray, matrix: np.ndarray, axes: tuple[int, int], cutoff: int) -> np.ndarray:
    op = matrix.reshape(cutoff, cutoff, cutoff, cutoff)
    out = np.tensordot(op, tensor, axes=([2, 3], list(axes)))
    return np.moveaxis(out, [0, 1], list(axes))


def apply_to_tensor(
    tensor: np.ndarray, gate: GateOp, cutoff: int, offset: int = 0, conj: bool = False
) -> np.ndarray:
    """Apply a unitary gate to axes ``offset + mode`` of a raw amplitude tensor.

    Extra axes are left alone, so this also drives batched states and
    vectorized density matrices (``conj=True`` for the bra half).
    """
    if isinstance(gate, PhaseShift):
        diag = phase_diagonal(gate.phi, cutoff)
        return _apply_diag(tensor, diag.conj() if conj else diag, offset + gate.mode)
    if isinstance(gate, (BeamSplitter, MachZehnder)):
        mat = gate_matrix(gate, cutoff)
        if conj:
            mat = mat.conj()
        return _apply_two_mode(tensor, mat, (offset + gate.mode_a, offset + gate.mode_b), cutoff)
    raise TypeError(f"{gate.kind} cannot be applied to a pure state; use the noise module")


def apply_gate(state: PureState, gate: GateOp) -> PureState:
    if not isinstance(gate, UNITARY_KINDS):
        raise TypeError(f"{gate.kind} cannot be applied to a pure state; use the noise module")
    _check_modes(gate.modes, state.num_modes)
    return PureState.from_tensor(apply_to_tensor(state.tensor, gate, state.cutoff))


def apply_circuit(state: PureState, circuit: Circuit | Iterable[GateOp]) -> PureState:
    gates = circuit.gates if isinstance(circuit, Circuit) else tuple(circuit)
    tensor = state.tensor
    for gate in gates:
        if not isinstance(gate, UNITARY_KINDS):
            raise TypeError(f"{gate.kind} cannot be applied to a pure state; use the noise module")
        _check_modes(gate.modes, state.num_modes)
        tensor = apply_to_tensor(tensor, gate, state.cutoff)
    return PureState.from_tensor(tensor)


def circuit_matrix(circuit: Circuit, cutoff: int) -> np.ndarray:
    """Dense ``cutoff**n`` square matrix of a unitary circuit on ``n = circuit.num_modes`` modes."""
    n = circuit.num_modes
    dim = cutoff**n
    tensor = np.eye(dim, dtype=complex).reshape((cutoff,) * n + (dim,))
    for gate in circuit.gates:
        tensor = apply_to_tensor(tensor, gate, cutoff)
    return tensor.reshape(dim, dim)


def complete_sector_indices(num_modes: int, cutoff: int) -> np.ndarray:
    """Flat indices of basis states whose total photon number is below ``cutoff``."""
    totals = np.indices((cutoff,) * num_modes).sum(axis=0).reshape(-1)
    return np.flatnonzero(totals < cutoff)


def sector_indices(num_modes: int, cutoff: int, n: int) -> np.ndarray:
    totals = np.indices((cutoff,) * num_modes).sum(axis=0).reshape(-1)
    return np.flatnonzero(totals == n)


def distance_up_to_phase(u: np.ndarray, v: np.ndarray) -> float:
    """``min_c ||u - c v||_F`` over unit-modulus ``c``.

    Equals ``sqrt(||u||^2 + ||v||^2 - 2|tr(u^dag v)|)``, but is evaluated at the
    optimal ``c = tr(v^dag u)/|tr(v^dag u)|`` to avoid cancellation.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    overlap = np.vdot(v, u)
    c = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(u - c * v))


def complete_sector_distance(u: np.ndarray, v: np.ndarray, num_modes: int, cutoff: int) -> float:
    """:func:`distance_up_to_phase` restricted to basis states with fewer than ``cutoff`` photons in total.

    Those sectors are untouched by truncation, so products of gates compose
    exactly there.
    """
    idx = complete_sector_indices(num_modes, cutoff)
    return distance_up_to_phase(u[np.ix_(idx, idx)], v[np.ix_(idx, idx)])


def sectorwise_distance(u: np.ndarray, v: np.ndarray, num_modes: int, cutoff: int) -> float:
    """Largest per-sector :func:`distance_up_to_phase` over the complete sectors.

    Each sector gets its own phase, i.e. this ignores a factor ``exp(i*alpha*N)``.
    """
    worst = 0.0
    for n in range(cutoff):
        idx = sector_indices(num_modes, cutoff, n)
        worst = max(worst, distance_up_to_phase(u[np.ix_(idx, idx)], v[np.ix_(idx, idx)]))
    return worst


# --- decompositions ------------------------------------------------------------


def mz_decompose(theta: float, phi: float, mode_a: int = 0, mode_b: int = 1, fock_exact: bool = True) -> Circuit:
    """Native word for ``BS(theta, phi)``: a Mach-Zehnder followed by phase shifts.

    The bare word ``R_a(phi + pi) . MZ(pi - 2 theta, 2 pi - phi)`` reproduces the
    beamsplitter's mode matrix up to the scalar ``exp(-i theta)``, which on Fock
    space is ``exp(-i theta N)`` rather than a global phase. With ``fock_exact``
    a compensating ``R(theta)`` on both modes is folded in, so the returned
    circuit equals the beamsplitter on Fock space. Photon-number statistics are
    the same either way.
    """
    n = max(mode_a, mode_b) + 1
    mz = MachZehnder(mode_a, mode_b, math.pi - 2 * theta, 2 * math.pi - phi)
    if not fock_exact:
        return Circuit(n, (mz, PhaseShift(mode_a, phi + math.pi)))
    return Circuit(n, (mz, PhaseShift(mode_a, phi + math.pi + theta), PhaseShift(mode_b, theta)))


def layered_ansatz(xis: Sequence[float], phis: Sequence[float], mode_a: int = 0, mode_b: int = 1) -> Circuit:
    """``prod_j R_a(-phi_j) . BS(xi_j, 0)`` with ``j = 1`` leftmost (so layer ``L`` acts first)."""
    if len(xis) != len(phis):
        raise ValueError(f"length mismatch: {len(xis)} xis vs {len(phis)} phis")
    if len(xis) == 0:
        raise ValueError("need at least one layer")
    gates: list[GateOp] = []
    for xi, phi in reversed(list(zip(xis, phis))):
        gates.append(BeamSplitter(mode_a, mode_b, xi, 0.0))
        gates.append(PhaseShift(mode_a, -phi))
    return Circuit(max(mode_a, mode_b) + 1, tuple(gates))


# --- serialization -----------------------------------------------------------

_PARAM_NAMES = {
    "PhaseShift": ("phi",),
    "BeamSplitter": ("theta", "phi"),
    "MachZehnder": ("phi1", "phi2"),
    "ThermalLoss": ("eta", "nbar"),
}
_KINDS = {"PhaseShift": PhaseShift, "BeamSplitter": BeamSplitter, "MachZehnder": MachZehnder, "ThermalLoss": ThermalLoss}


def gate_to_dict(gate: GateOp) -> dict:
    if isinstance(gate, UnsupportedGate):
        return {"kind": gate.name, "modes": list(gate.modes), "params": list(gate.params)}
    out = {"kind": gate.kind, "modes": list(gate.modes)}
    out.update({name: float(v) for name, v in zip(_PARAM_NAMES[gate.kind], gate.params)})
    return out


def gate_from_dict(data: dict) -> GateOp:
    """Inverse of :func:`gate_to_dict`; unknown kinds become :class:`UnsupportedGate`."""
    kind = data["kind"]
    modes = tuple(int(m) for m in data.get("modes", ()))
    if kind not in _KINDS:
        return UnsupportedGate(kind, modes, tuple(float(p) for p in data.get("params", ())))
    names = _PARAM_NAMES[kind]
    params = [float(data[name]) for name in names if name in data]
    return _KINDS[kind](*modes, *params)


def circuit_to_json(circuit: Circuit) -> str:
    return json.dumps({"num_modes": circuit.num_modes, "gates": [gate_to_dict(g) for g in circuit.gates]}, indent=2)


def circuit_from_json(text: str) -> Circuit:
    data = json.loads(text)
    return Circuit(int(data["num_modes"]), tuple(gate_from_dict(g) for g in data["gates"]))
