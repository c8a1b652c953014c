"""Photon-number-resolving readout: exact outcome tables and seeded shot sampling."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from x8compile.fock import PureState, _check_modes, marginal_probabilities
from x8compile.noise import MixedState

RNG_ALGORITHM = "numpy.random.Generator(PCG64)"

Pattern = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Exact photon-number probabilities on a list of modes.

    ``probabilities`` has one axis per entry of ``modes``. Its total is the
    state's norm or trace, which can fall short of 1 after truncation.
    """

    modes: tuple[int, ...]
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.ndim != len(self.modes):
            raise ValueError("one probability axis per mode required")
        probs.flags.writeable = False
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "probabilities", probs)

    @property
    def cutoff(self) -> int:
        return self.probabilities.shape[0]

    @property
    def total(self) -> float:
        return float(self.probabilities.sum())

    @property
    def overflow(self) -> float:
        """Probability mass lost to truncation."""
        return max(0.0, 1.0 - self.total)

    def probability(self, pattern: Sequence[int], modes: Sequence[int] | None = None) -> float:
        modes = self.modes if modes is None else tuple(modes)
        local = [self.modes.index(m) for m in modes]
        if any(n >= self.cutoff or n < 0 for n in pattern):
            return 0.0
        return float(marginal_probabilities(self.probabilities, local)[tuple(pattern)])

    def marginal(self, modes: Sequence[int]) -> "OutcomeDistribution":
        local = [self.modes.index(m) for m in modes]
        return OutcomeDistribution(tuple(modes), marginal_probabilities(self.probabilities, local))


def outcome_distribution(
    state: Union[PureState, MixedState], modes: Sequence[int] | None = None, labels: Sequence[int] | None = None
) -> OutcomeDistribution:
    """Exact distribution on ``modes`` (default: all), marginalizing the rest.

    ``labels`` renames the kept modes, e.g. to device mode numbers when the
    state only holds one disconnected factor.
    """
    if isinstance(state, PureState):
        probs = np.abs(state.tensor) ** 2
    else:
        probs = state.probabilities()
    modes = tuple(range(state.num_modes)) if modes is None else _check_modes(modes, state.num_modes)
    labels = modes if labels is None else tuple(labels)
    return OutcomeDistribution(labels, marginal_probabilities(probs, modes))


@dataclass(frozen=True)
class CountTable:
    """Shot counts of photon-number patterns.

    ``counts`` maps a pattern (occupations on ``modes``, in order) to its count.
    ``overflow`` counts the shots whose outcome fell outside the truncated space.
    """

    shots: int
    modes: tuple[int, ...]
    counts: Mapping[Pattern, int]
    seed: int | None = None
    rng: str = RNG_ALGORITHM
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.shots < 1:
            raise ValueError(f"shots must be positive, got {self.shots}")
        total = sum(self.counts.values())
        if total > self.shots:
            raise ValueError(f"{total} counts exceed {self.shots} shots")
        for pattern in self.counts:
            if len(pattern) != len(self.modes):
                raise ValueError(f"pattern {pattern} does not match modes {self.modes}")

    @property
    def overflow(self) -> int:
        return self.shots - sum(self.counts.values())

    def count(self, pattern: Sequence[int], modes: Sequence[int] | None = None) -> int:
        """Number of shots showing ``pattern`` on ``modes`` (any outcome elsewhere)."""
        pattern = tuple(int(n) for n in pattern)
        if modes is None or tuple(modes) == self.modes:
            return int(self.counts.get(pattern, 0))
        if len(pattern) != len(modes):
            raise ValueError(f"pattern {pattern} does not match modes {tuple(modes)}")
        try:
            local = [self.modes.index(m) for m in modes]
        except ValueError:
            raise ValueError(f"modes {tuple(modes)} not all in table modes {self.modes}") from None
        return int(sum(c for p, c in self.counts.items() if tuple(p[i] for i in local) == pattern))

    def marginal(self, modes: Sequence[int]) -> "CountTable":
        local = [self.modes.index(m) for m in modes]
        merged: Counter = Counter()
        for p, c in self.counts.items():
            merged[tuple(p[i] for i in local)] += c
        return CountTable(self.shots, tuple(modes), dict(merged), self.seed, self.rng, dict(self.metadata))


def _categorical_with_overflow(probs: np.ndarray) -> np.ndarray:
    flat = np.clip(np.asarray(probs, dtype=float).reshape(-1), 0.0, None)
    total = flat.sum()
    if total > 1.0:
        flat = flat / total
        total = 1.0
    return np.append(flat, 1.0 - total)


def sample_counts(distribution: OutcomeDistribution, shots: int, seed: int | np.random.Generator | None) -> CountTable:
    """One multinomial draw of ``shots`` outcomes; truncation leak lands in overflow."""
    if shots < 1:
        raise ValueError(f"shots must be positive, got {shots}")
    rng = np.random.default_rng(seed)
    pvals = _categorical_with_overflow(distribution.probabilities)
    draws = rng.multinomial(shots, pvals)
    shape = distribution.probabilities.shape
    hit = np.flatnonzero(draws[:-1])
    counts = {tuple(int(i) for i in np.unravel_index(k, shape)): int(draws[k]) for k in hit}
    return CountTable(shots, distribution.modes, counts, seed if isinstance(seed, (int, np.integer)) else None)


def sample_indices(distribution: OutcomeDistribution, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Per-shot flat outcome indices; ``probabilities.size`` marks overflow."""
    pvals = _categorical_with_overflow(distribution.probabilities)
    return rng.choice(pvals.size, size=shots, p=pvals)


def empirical_probability(table: CountTable, pattern: Sequence[int], modes: Sequence[int] | None = None) -> float:
    return table.count(pattern, modes) / table.shots


def postselected_probability(
    table: CountTable,
    pattern: Sequence[int],
    modes: Sequence[int],
    condition: Sequence[int],
    condition_modes: Sequence[int],
) -> float:
    """``N(pattern and condition) / N(condition)``, e.g. conditioning on vacuum in idle modes."""
    joint_modes = tuple(modes) + tuple(condition_modes)
    joint = table.count(tuple(pattern) + tuple(condition), joint_modes)
    base = table.count(condition, condition_modes)
    if base == 0:
        raise ValueError("no shots satisfy the postselection condition")
    return joint / base


# --- serialization -----------------------------------------------------------


def write_count_table(table: CountTable, path: str | Path) -> tuple[Path, Path]:
    """Write ``path`` as CSV (one column per mode plus ``count``) and a JSON header beside it."""
    path = Path(path)
    header_path = path.with_suffix(".json")
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"n{m}" for m in table.modes] + ["count"])
        for pattern in sorted(table.counts):
            writer.writerow(list(pattern) + [table.counts[pattern]])
    header = {
        "shots": table.shots,
        "seed": table.seed,
        "modes": list(table.modes),
        "overflow": table.overflow,
        "rng": table.rng,
        "metadata": dict(table.metadata),
    }
    header_path.write_text(json.dumps(header, indent=2))
    return path, header_path


def read_count_table(path: str | Path) -> CountTable:
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    counts = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            *pattern, count = (int(x) for x in row)
            counts[tuple(pattern)] = count
    return CountTable(
        header["shots"], tuple(header["modes"]), counts, header["seed"], header["rng"], header.get("metadata", {})
    )
