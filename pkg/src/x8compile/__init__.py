"""Desk-scale X8 photonic simulator and beamsplitter-compiling toolkit."""

from x8compile.costs import (
    CostEstimate,
    InsufficientShotsError,
    d1_analytic,
    d2_analytic,
    d2_estimate,
    hopping_expectation,
    occupation_phase_cost,
    occupation_theta_cost,
    overlap_cost,
    real_compile_cost,
    reflection_cost,
)
from x8compile.device import (
    DeviceJob,
    JobValidationError,
    NoiseConfig,
    TruncationError,
    precompile_two_mode,
    run_job,
    validate_job,
)
from x8compile.driver import CompileTrace, SweepResult, compile_phase, resolution_analysis, run_sweep
from x8compile.fock import PureState, fock_probability, make_tmss, truncation_weight, vacuum
from x8compile.gradients import GradientRequest, finite_difference, parameter_shift_gradient
from x8compile.measure import CountTable, empirical_probability, outcome_distribution, sample_counts
from x8compile.noise import MixedState, apply_channel, promote, thermal_loss_kraus
from x8compile.optics import (
    BeamSplitter,
    Circuit,
    MachZehnder,
    PhaseShift,
    ThermalLoss,
    apply_circuit,
    apply_gate,
    distance_up_to_phase,
    layered_ansatz,
    mz_decompose,
)

__version__ = "0.1.0"
