"""An eight-mode virtual device with the X8 constraint set.

Modes ``0..3`` and ``4..7`` form two registers. Pair ``j`` couples mode ``j``
with mode ``j + 4`` and is either two-mode squeezed at ``r = 1`` or left in
vacuum. A job supplies one linear-optical circuit on modes ``0..3``; the device
applies the same circuit to ``4..7``.

Execution splits the eight modes into connected factors (squeezing pairs plus
the mirrored gates), simulates each on its own, and joins the samples.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from x8compile.fock import PureState, tmss_amplitudes
from x8compile.measure import CountTable, OutcomeDistribution, sample_counts, sample_indices
from x8compile.noise import apply_channel_modes, apply_circuit_mixed, lossy_probabilities, promote
from x8compile.optics import (
    BeamSplitter,
    Circuit,
    GateOp,
    MachZehnder,
    PhaseShift,
    ThermalLoss,
    UnsupportedGate,
    apply_circuit,
    gate_from_dict,
    gate_to_dict,
    mz_decompose,
)

NUM_MODES = 8
HALF = 4
SQUEEZING_R = 1.0
NATIVE_KINDS = (PhaseShift, MachZehnder)
LINEAR_KINDS = (PhaseShift, BeamSplitter, MachZehnder)
PLACEMENTS = ("after", "before")

LEAK_WARN = 1e-2
LEAK_ERROR = 0.05
# largest pure amplitude vector and density matrix a single factor may use
MAX_PURE_DIM = 2**22
MAX_DENSITY_DIM = 2**12


class JobValidationError(ValueError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class TruncationError(RuntimeError):
    """Probability mass lost to the Fock cutoff exceeds the hard limit."""


@dataclass(frozen=True)
class NoiseConfig:
    """Thermal attenuation on selected modes.

    Attributes:
        eta: transmissivity.
        nbar: thermal occupation of the environment.
        placement: ``"after"`` all gates (default) or ``"before"`` them.
        modes: device modes that see the channel; ``None`` means every mode of a squeezed pair.
    """

    eta: float
    nbar: float = 0.0
    placement: str = "after"
    modes: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"transmissivity must lie in [0, 1], got {self.eta}")
        if self.nbar < 0:
            raise ValueError(f"thermal occupation must be non-negative, got {self.nbar}")
        if self.placement not in PLACEMENTS:
            raise ValueError(f"placement must be one of {PLACEMENTS}, got {self.placement!r}")
        if self.modes is not None:
            modes = tuple(int(m) for m in self.modes)
            if any(not 0 <= m < NUM_MODES for m in modes):
                raise ValueError(f"noise modes must lie in 0..{NUM_MODES - 1}")
            object.__setattr__(self, "modes", modes)

    def resolved_modes(self, squeezing: Sequence[bool]) -> tuple[int, ...]:
        if self.modes is not None:
            return tuple(sorted(set(self.modes)))
        active = [j for j in range(HALF) if squeezing[j]]
        return tuple(sorted(active + [j + HALF for j in active]))

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "nbar": self.nbar,
            "placement": self.placement,
            "modes": None if self.modes is None else list(self.modes),
        }


@dataclass(frozen=True)
class DeviceJob:
    """One device submission.

    ``cutoff`` is the per-mode Fock cutoff on the pure path and
    ``noisy_cutoff`` the one used when noise acts before the gates (density
    path).
    """

    circuit: Circuit
    squeezing: tuple = (True, True, True, True)
    shots: int = 50_000
    seed: int | None = 0
    noise: NoiseConfig | None = None
    native_only: bool = False
    cutoff: int = 15
    noisy_cutoff: int = 8

    def __post_init__(self) -> None:
        object.__setattr__(self, "squeezing", tuple(self.squeezing))


def validate_job(job: DeviceJob) -> list[str]:
    """All constraint violations, empty when the job can run."""
    issues = []
    if job.circuit.num_modes > HALF and all(max(g.modes, default=0) < HALF for g in job.circuit.gates):
        issues.append(f"circuit declares {job.circuit.num_modes} modes; at most {HALF} allowed")
    if len(job.squeezing) != HALF:
        issues.append(f"expected {HALF} squeezing flags, got {len(job.squeezing)}")
    for j, flag in enumerate(job.squeezing):
        if not (isinstance(flag, (bool, np.bool_)) or (isinstance(flag, (int, float)) and flag in (0, 1))):
            issues.append(f"squeezing flag {j} is {flag!r}; the device offers r in {{0, 1}} only")
    for k, gate in enumerate(job.circuit.gates):
        where = f"gate {k} ({gate.kind})"
        if isinstance(gate, UnsupportedGate):
            issues.append(f"{where} is not a linear-optical gate")
            continue
        if isinstance(gate, ThermalLoss):
            issues.append(f"{where}: loss belongs in the job's noise block, not the circuit")
            continue
        if any(m >= HALF for m in gate.modes):
            issues.append(
                f"{where} acts on modes {gate.modes}; gates may only touch 0..3 (the device mirrors them onto 4..7)"
            )
        if job.native_only and not isinstance(gate, NATIVE_KINDS):
            issues.append(f"{where} is outside the native PhaseShift/MachZehnder alphabet; run precompile_two_mode")
    if not isinstance(job.shots, (int, np.integer)) or job.shots < 1:
        issues.append(f"shots must be a positive integer, got {job.shots!r}")
    for name in ("cutoff", "noisy_cutoff"):
        if getattr(job, name) < 2:
            issues.append(f"{name} must be at least 2")
    return issues


def precompile_two_mode(theta: float, phi: float, mode_a: int = 0, mode_b: int = 1) -> Circuit:
    """Native PhaseShift/MachZehnder word equal to ``BS(theta, phi)`` up to a global phase."""
    word = mz_decompose(theta, phi, mode_a, mode_b)
    return Circuit(HALF, word.gates)


def precompile_circuit(circuit: Circuit) -> Circuit:
    """Replace every beamsplitter by its native word."""
    gates: list[GateOp] = []
    for gate in circuit.gates:
        if isinstance(gate, BeamSplitter):
            gates.extend(mz_decompose(gate.theta, gate.phi, gate.mode_a, gate.mode_b).gates)
        else:
            gates.append(gate)
    return Circuit(HALF, tuple(gates))


def is_native(circuit: Circuit) -> bool:
    return all(isinstance(g, NATIVE_KINDS) for g in circuit.gates)


# --- factor decomposition ---------------------------------------------------------


def mirrored_gates(circuit: Circuit) -> tuple[GateOp, ...]:
    """The circuit on ``0..3`` followed by its copy on ``4..7``."""
    upper = circuit.relabel([j + HALF for j in range(circuit.num_modes)], NUM_MODES)
    return tuple(circuit.gates) + tuple(upper.gates)


def connected_factors(circuit: Circuit, squeezing: Sequence[bool]) -> list[tuple[int, ...]]:
    """Sorted mode groups that the input state and gates never connect to each other."""
    parent = list(range(NUM_MODES))

    def find(m: int) -> int:
        while parent[m] != m:
            parent[m] = parent[parent[m]]
            m = parent[m]
        return m

    def union(a: int, b: int) -> None:
        parent[find(a)] = find(b)

    for j in range(HALF):
        if squeezing[j]:
            union(j, j + HALF)
    for gate in mirrored_gates(circuit):
        modes = gate.modes
        for m in modes[1:]:
            union(modes[0], m)
    groups: dict[int, list[int]] = {}
    for m in range(NUM_MODES):
        groups.setdefault(find(m), []).append(m)
    return sorted((tuple(g) for g in groups.values()), key=lambda g: g[0])


def _factor_input(modes: tuple[int, ...], squeezing: Sequence[bool], cutoff: int) -> PureState:
    order: list[int] = []
    tensor = np.ones(())
    pair = np.diag(tmss_amplitudes(SQUEEZING_R, cutoff))
    vac = np.zeros(cutoff)
    vac[0] = 1.0
    for m in modes:
        j = m % HALF
        if squeezing[j]:
            if m >= HALF:
                continue
            tensor = np.multiply.outer(tensor, pair)
            order += [m, m + HALF]
        else:
            tensor = np.multiply.outer(tensor, vac)
            order.append(m)
    tensor = np.transpose(tensor, [order.index(m) for m in modes])
    return PureState.from_tensor(tensor.astype(complex))


def _local_gates(gates: Sequence[GateOp], modes: tuple[int, ...]) -> list[GateOp]:
    index = {m: i for i, m in enumerate(modes)}
    mapping = [index.get(m, -1) for m in range(NUM_MODES)]
    local = []
    for gate in gates:
        if gate.modes[0] in index:
            local.append(Circuit(NUM_MODES, (gate,)).relabel([max(k, 0) for k in mapping], len(modes)).gates[0])
    return local


def _fit_cutoff(cutoff: int, num_modes: int, max_dim: int) -> int:
    return max(2, min(cutoff, int(math.floor(max_dim ** (1.0 / num_modes) + 1e-9))))


@dataclass(frozen=True)
class FactorResult:
    modes: tuple[int, ...]
    cutoff: int
    distribution: OutcomeDistribution
    leak: float
    method: str


def _simulate_factor(
    modes: tuple[int, ...],
    gates: tuple[GateOp, ...],
    squeezing: tuple,
    noise: NoiseConfig | None,
    noisy_modes: tuple[int, ...],
    cutoff: int,
    noisy_cutoff: int,
    method: str | None = None,
) -> FactorResult:
    local_noise = [i for i, m in enumerate(modes) if m in noisy_modes] if noise is not None else []
    active = any(squeezing[m % HALF] for m in modes)
    if not active and not local_noise:
        probs = np.zeros((1,) * len(modes))
        probs[(0,) * len(modes)] = 1.0
        return FactorResult(modes, 1, OutcomeDistribution(modes, probs), 0.0, "vacuum")
    local = _local_gates(gates, modes)
    if method is None:
        method = "density" if local_noise and noise.placement == "before" else "pure"
    if method == "density":
        d = _fit_cutoff(noisy_cutoff, len(modes), MAX_DENSITY_DIM)
        rho = promote(_factor_input(modes, squeezing, d))
        if local_noise and noise.placement == "before":
            rho = apply_channel_modes(rho, local_noise, noise.eta, noise.nbar)
        rho = apply_circuit_mixed(rho, local)
        if local_noise and noise.placement == "after":
            rho = apply_channel_modes(rho, local_noise, noise.eta, noise.nbar)
        probs = rho.probabilities()
    else:
        if local_noise and noise.placement == "before":
            raise ValueError("noise before the gates needs the density path")
        d = _fit_cutoff(cutoff, len(modes), MAX_PURE_DIM)
        state = apply_circuit(_factor_input(modes, squeezing, d), local)
        probs = np.abs(state.tensor) ** 2
        if local_noise:
            # exact: the attenuator is phase covariant, so after the last gate
            # it acts on photon-number statistics through a stochastic matrix
            probs = lossy_probabilities(probs, local_noise, noise.eta, noise.nbar)
    dist = OutcomeDistribution(modes, probs)
    return FactorResult(modes, d, dist, dist.overflow, method)


@lru_cache(maxsize=256)
def _factor_results(
    circuit: Circuit,
    squeezing: tuple,
    noise: NoiseConfig | None,
    cutoff: int,
    noisy_cutoff: int,
    method: str | None,
) -> tuple[FactorResult, ...]:
    squeezing = tuple(bool(s) for s in squeezing)
    gates = mirrored_gates(circuit)
    noisy_modes = noise.resolved_modes(squeezing) if noise is not None else ()
    return tuple(
        _simulate_factor(f, gates, squeezing, noise, noisy_modes, cutoff, noisy_cutoff, method)
        for f in connected_factors(circuit, squeezing)
    )


def job_factors(job: DeviceJob, method: str | None = None) -> tuple[FactorResult, ...]:
    """Exact per-factor outcome distributions of a validated job.

    Args:
        job: the job to simulate.
        method: force ``"pure"`` or ``"density"``; by default noise before the
            gates uses the density path and everything else the pure path.

    Raises:
        JobValidationError: the job breaks a device constraint.
        TruncationError: a factor loses more than 5% of its probability to the cutoff.
    """
    issues = validate_job(job)
    if issues:
        raise JobValidationError(issues)
    results = _factor_results(job.circuit, job.squeezing, job.noise, job.cutoff, job.noisy_cutoff, method)
    for res in results:
        if res.leak > LEAK_ERROR:
            raise TruncationError(f"factor {res.modes} at cutoff {res.cutoff} leaks {res.leak:.3g} of its probability")
        if res.leak > LEAK_WARN:
            warnings.warn(f"factor {res.modes} at cutoff {res.cutoff} leaks {res.leak:.3g}", RuntimeWarning, stacklevel=2)
    return results


def job_probability(job: DeviceJob, pattern: Sequence[int], modes: Sequence[int], method: str | None = None) -> float:
    """Exact probability of ``pattern`` on ``modes`` (factors multiply)."""
    modes = tuple(modes)
    total = 1.0
    for res in job_factors(job, method):
        keep = [m for m in modes if m in res.modes]
        if keep:
            total *= res.distribution.probability([pattern[modes.index(m)] for m in keep], keep)
    return total


def run_job(job: DeviceJob, modes: Sequence[int] | None = None, method: str | None = None) -> CountTable:
    """Sample ``job.shots`` photon-number outcomes on ``modes`` (default all eight).

    Factors are sampled independently in factor order from one generator
    seeded with ``job.seed`` and joined shot by shot. A shot counts as overflow
    when any factor's outcome left the truncated space.
    """
    factors = job_factors(job, method)
    modes = tuple(range(NUM_MODES)) if modes is None else tuple(modes)
    if len(set(modes)) != len(modes) or any(not 0 <= m < NUM_MODES for m in modes):
        raise ValueError(f"invalid readout modes {modes}")
    rng = np.random.default_rng(job.seed)
    parts = []
    for res in factors:
        keep = tuple(m for m in modes if m in res.modes)
        if keep:
            parts.append(res.distribution.marginal(keep))
    metadata = {
        "noise": None if job.noise is None else job.noise.to_dict(),
        "squeezing": [bool(s) for s in job.squeezing],
        "factor_cutoffs": [res.cutoff for res in factors],
        "factor_leaks": [res.leak for res in factors],
    }
    if len(parts) == 1:
        table = sample_counts(parts[0], job.shots, rng)
        table = table.marginal(modes)
        return CountTable(job.shots, modes, dict(table.counts), job.seed, metadata=metadata)

    columns: dict[int, np.ndarray] = {}
    overflow = np.zeros(job.shots, dtype=bool)
    for part in parts:
        idx = sample_indices(part, job.shots, rng)
        size = part.probabilities.size
        overflow |= idx == size
        digits = np.unravel_index(np.minimum(idx, size - 1), part.probabilities.shape)
        for m, col in zip(part.modes, digits):
            columns[m] = col
    rows = np.stack([columns[m] for m in modes], axis=1)[~overflow]
    patterns, counts = np.unique(rows, axis=0, return_counts=True)
    table = {tuple(int(x) for x in p): int(c) for p, c in zip(patterns, counts)}
    return CountTable(job.shots, modes, table, job.seed, metadata=metadata)


# --- job files -------------------------------------------------------------------


def job_to_dict(job: DeviceJob) -> dict:
    return {
        "circuit": [gate_to_dict(g) for g in job.circuit.gates],
        "squeezing": list(job.squeezing),
        "shots": job.shots,
        "seed": job.seed,
        "noise": None if job.noise is None else job.noise.to_dict(),
        "native_only": job.native_only,
        "cutoff": job.cutoff,
        "noisy_cutoff": job.noisy_cutoff,
    }


def job_from_dict(data: dict) -> DeviceJob:
    """Build a job from its JSON form.

    The circuit is kept on as many modes as its gates touch, so an out-of-range
    gate survives parsing and shows up in :func:`validate_job`.
    """
    gates = tuple(gate_from_dict(g) for g in data.get("circuit", []))
    width = max([HALF] + [m + 1 for g in gates for m in g.modes])
    noise = data.get("noise")
    if noise is not None:
        modes = noise.get("modes")
        noise = NoiseConfig(
            float(noise["eta"]),
            float(noise.get("nbar", 0.0)),
            noise.get("placement", "after"),
            None if modes is None else tuple(modes),
        )
    return DeviceJob(
        circuit=Circuit(width, gates),
        squeezing=tuple(data.get("squeezing", (True,) * HALF)),
        shots=data.get("shots", 50_000),
        seed=data.get("seed", 0),
        noise=noise,
        native_only=bool(data.get("native_only", False)),
        cutoff=int(data.get("cutoff", 15)),
        noisy_cutoff=int(data.get("noisy_cutoff", 8)),
    )


def write_job(job: DeviceJob, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(job_to_dict(job), indent=2))
    return path


def read_job(path: str | Path) -> DeviceJob:
    return job_from_dict(json.loads(Path(path).read_text()))


def beamsplitter_job(
    phi: float,
    shots: int = 50_000,
    seed: int | None = 0,
    noise: NoiseConfig | None = None,
    theta: float = math.pi / 4,
    native: bool = False,
) -> DeviceJob:
    """``BS(theta, phi)`` on modes ``(0, 1)`` with every pair squeezed."""
    circuit = precompile_two_mode(theta, phi) if native else Circuit(HALF, (BeamSplitter(0, 1, theta, phi),))
    return DeviceJob(circuit, (True,) * HALF, shots, seed, noise, native_only=native)


def identity_job(shots: int = 50_000, seed: int | None = 0, noise: NoiseConfig | None = None) -> DeviceJob:
    """No gates, every pair squeezed: the denominator job."""
    return DeviceJob(Circuit(HALF, ()), (True,) * HALF, shots, seed, noise)
