"""Phase sweeps, shot-budget resolution and the gradient-descent compiling loop."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from x8compile.costs import (
    P_MODES_PARALLEL,
    Q_MODES,
    TARGET_PATTERN,
    InsufficientShotsError,
    d2_analytic,
    d2_from_counts,
    pattern_rate,
)
from x8compile.device import NoiseConfig, beamsplitter_job, identity_job, job_probability, run_job
from x8compile.gradients import (
    GradientRequest,
    d2_evaluator,
    evaluate_at,
    shared_phase_template,
    parameter_shift_gradient,
)


def derive_seed(base: int, *keys: int) -> int:
    """Independent 32-bit seed for the task labelled by ``keys``."""
    return int(np.random.SeedSequence([base, *keys]).generate_state(1)[0])


def phase_grid(phi_min: float = -math.pi / 2, phi_max: float = math.pi / 2, points: int = 21) -> np.ndarray:
    if points < 1:
        raise ValueError("grid needs at least one point")
    return np.linspace(phi_min, phi_max, points)


# --- sweeps ----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    phi: float
    run: int
    q_count: int
    p_count_or_regularizer: float
    d2_estimate: float
    d2_analytic: float
    seed: int
    shots: int
    regularized: bool
    noise: str
    status: str = "ok"


COLUMNS = tuple(f.name for f in fields(SweepRow))


@dataclass
class SweepResult:
    """Rows ordered by grid point, then run.

    Attributes:
        rows: one row per ``(phi, run)``.
        grid: strictly increasing phases.
        shots: shots per job.
        runs: runs per grid point.
    """

    rows: list[SweepRow]
    grid: tuple[float, ...]
    shots: int
    runs: int

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")

    def estimates(self) -> np.ndarray:
        """``(points, runs)`` array of per-run estimates (NaN for flagged rows)."""
        return np.array([r.d2_estimate for r in self.rows]).reshape(len(self.grid), self.runs)

    def pooled(self) -> np.ndarray:
        """Per-point ``|1 - sum Q / sum P|`` over all runs."""
        out = []
        for i in range(len(self.grid)):
            rows = self.rows[i * self.runs : (i + 1) * self.runs]
            q = sum(r.q_count for r in rows)
            p = sum(r.p_count_or_regularizer for r in rows)
            out.append(abs(1 - q / p) if p > 0 else math.nan)
        return np.array(out)

    def argmin_phi(self, pooled: bool = True) -> float:
        values = self.pooled() if pooled else np.nanmean(self.estimates(), axis=1)
        return float(self.grid[int(np.nanargmin(values))])


def _noise_label(noise: NoiseConfig | None) -> str:
    return "" if noise is None else json.dumps(noise.to_dict(), separators=(",", ":"))


def run_sweep(
    grid: Sequence[float],
    shots: int = 50_000,
    runs: int = 1,
    noise: NoiseConfig | None = None,
    *,
    strategy: str | None = None,
    paired: bool = False,
    regularizer: float | str | None = None,
    seed: int = 0,
    native: bool = False,
    workers: int = 1,
) -> SweepResult:
    """Sample the ratio cost over a phase grid.

    Args:
        grid: strictly increasing phases.
        shots: shots per job.
        runs: independent repetitions per phase.
        noise: thermal attenuation of every job.
        strategy: ``"parallel"`` reads the denominator from modes 2367 of the
            same job; ``"serial"`` runs a separate no-gate job. Defaults to
            parallel without noise and serial with it.
        paired: serial only; give every row its own denominator job instead
            of one job precomputed for the whole sweep.
        regularizer: fixed denominator count replacing the sampled one;
            ``"exact"`` uses ``shots`` times the exact no-gate probability.
        seed: base seed; each task gets a seed derived from ``(seed, point, run)``.
        native: precompile the beamsplitter to the native alphabet.
        workers: thread count for the independent jobs; results do not depend on it.

    Returns:
        One row per ``(phi, run)``; zero-denominator rows carry status
        ``"zero_denominator"`` and a NaN estimate.
    """
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    if runs < 1:
        raise ValueError("runs must be positive")
    strategy = strategy or ("serial" if noise is not None else "parallel")
    if strategy not in ("serial", "parallel"):
        raise ValueError(f"unknown strategy {strategy!r}")
    fixed_p: float | None = None
    if regularizer == "exact":
        fixed_p = shots * job_probability(identity_job(noise=noise), TARGET_PATTERN, Q_MODES)
    elif regularizer is not None:
        fixed_p = float(regularizer)
    elif strategy == "serial" and not paired:
        shared = run_job(identity_job(shots, derive_seed(seed, 2**31 - 1), noise), Q_MODES)
        fixed_p = shared.count(TARGET_PATTERN)
    label = _noise_label(noise)

    def task(i: int, run: int) -> SweepRow:
        phi = grid[i]
        task_seed = derive_seed(seed, i, run)
        job = beamsplitter_job(phi, shots, task_seed, noise, native=native)
        if strategy == "parallel" and fixed_p is None:
            table = run_job(job, Q_MODES + P_MODES_PARALLEL)
            q, p = table.count(TARGET_PATTERN, Q_MODES), table.count(TARGET_PATTERN, P_MODES_PARALLEL)
        else:
            q = run_job(job, Q_MODES).count(TARGET_PATTERN)
            if fixed_p is not None:
                p = fixed_p
            else:
                p = run_job(identity_job(shots, derive_seed(seed, i, run, 1), noise), Q_MODES).count(TARGET_PATTERN)
        try:
            value, status = d2_from_counts(q, p, shots).value, "ok"
        except InsufficientShotsError:
            value, status = math.nan, "zero_denominator"
        return SweepRow(phi, run, q, p, value, d2_analytic(phi), task_seed, shots, regularizer is not None, label, status)

    keys = [(i, run) for i in range(len(grid)) for run in range(runs)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda k: task(*k), keys))
    else:
        rows = [task(*k) for k in keys]
    return SweepResult(rows, grid, shots, runs)


def write_sweep_csv(result: SweepResult, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS)
        writer.writeheader()
        for row in result.rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in asdict(row).items()})
    return path


def read_sweep_csv(path: str | Path) -> SweepResult:
    with Path(path).open(newline="") as fh:
        raw = list(csv.DictReader(fh))
    rows = [
        SweepRow(
            phi=float(r["phi"]),
            run=int(r["run"]),
            q_count=int(r["q_count"]),
            p_count_or_regularizer=float(r["p_count_or_regularizer"]),
            d2_estimate=float(r["d2_estimate"]),
            d2_analytic=float(r["d2_analytic"]),
            seed=int(r["seed"]),
            shots=int(r["shots"]),
            regularized=r["regularized"] == "True",
            noise=r["noise"],
            status=r["status"],
        )
        for r in raw
    ]
    grid = tuple(dict.fromkeys(r.phi for r in rows))
    runs = len(rows) // len(grid) if grid else 0
    return SweepResult(rows, grid, rows[0].shots if rows else 0, runs)


# --- resolution -------------------------------------------------------------------


def resolution_offset(shots: int, r: float = 1.0) -> float:
    """Smallest offset ``delta`` from ``pi/2`` where the expected ``(0,1,0,1)`` count reaches 1.

    The count model is ``M * rate/2 * (1 + cos 2 phi)``, i.e. ``M * rate * sin^2 delta``.
    Returns NaN when even ``phi = 0`` yields less than one expected count.
    """
    if shots < 10:
        raise ValueError(f"need at least 10 shots, got {shots}")
    rate = pattern_rate(r)

    def excess(delta: float) -> float:
        return shots * rate / 2 * (1 + math.cos(2 * (math.pi / 2 - delta))) - 1

    if excess(math.pi / 2) < 0:
        return math.nan
    return brentq(excess, 0.0, math.pi / 2, xtol=1e-14)


def resolution_analysis(shots_list: Sequence[int], r: float = 1.0) -> list[tuple[int, float]]:
    return [(int(m), resolution_offset(int(m), r)) for m in shots_list]


# --- compiling loop ------------------------------------------------------------------


@dataclass(frozen=True)
class CompileStep:
    step: int
    phi: float
    cost: float
    gradient: float
    learning_rate: float


@dataclass
class CompileTrace:
    steps: list[CompileStep] = field(default_factory=list)
    converged: bool = False
    diverged: bool = False

    @property
    def final_phi(self) -> float:
        return self.steps[-1].phi


def compile_phase(
    phi0: float,
    learning_rate: float = 0.3,
    max_iters: int = 100,
    backend: str = "exact",
    shots: int = 50_000,
    seed: int = 0,
    tol: float = 1e-6,
) -> CompileTrace:
    """Gradient descent on the ratio cost over the shared beamsplitter phase.

    Each step records the current phase, the (signed) cost, the shift-rule
    gradient and the learning rate. The trace ends at the last evaluated
    phase, after ``max_iters`` updates, once ``|gradient| < tol``, or when the
    phase leaves ``[-pi, pi]``.
    """
    if not -math.pi / 2 <= phi0 <= math.pi / 2:
        raise ValueError(f"phi0 must lie in [-pi/2, pi/2], got {phi0}")
    if learning_rate <= 0:
        raise ValueError("learning rate must be positive")
    if backend not in ("exact", "sampled"):
        raise ValueError(f"backend must be 'exact' or 'sampled', got {backend!r}")
    evaluator = d2_evaluator(shots=shots if backend == "sampled" else None)
    template, positions = shared_phase_template()
    trace = CompileTrace()
    phi = float(phi0)
    for step in range(max_iters + 1):
        step_seed = derive_seed(seed, step) if backend == "sampled" else None
        req = GradientRequest(template, positions, evaluator, seed=step_seed)
        rng = np.random.default_rng(derive_seed(seed, step, 1)) if backend == "sampled" else None
        cost = evaluate_at(req, phi, rng)
        grad = parameter_shift_gradient(req, phi)
        trace.steps.append(CompileStep(step, phi, cost, grad, learning_rate))
        if abs(grad) < tol:
            trace.converged = True
            break
        if step == max_iters:
            break
        phi = phi - learning_rate * grad
        if not math.isfinite(phi) or abs(phi) > math.pi:
            trace.diverged = True
            trace.steps.append(CompileStep(step + 1, phi, math.nan, math.nan, learning_rate))
            break
    return trace


def write_trace_csv(trace: CompileTrace, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[f.name for f in fields(CompileStep)])
        writer.writeheader()
        for s in trace.steps:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in asdict(s).items()})
    return path
