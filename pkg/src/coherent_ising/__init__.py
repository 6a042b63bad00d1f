"""Coherent-computing success-probability toolkit for Ising decision problems."""

from .errors import (
    CoherentIsingError,
    DimensionError,
    EmptyLockedSetError,
    EnumerationLimitError,
    GenerationFailedError,
    InstanceError,
    InstanceFormatError,
)
from .instance import (
    DecisionInstance,
    IsingInstance,
    SpinConfig,
    energy,
    energy_delta,
    generate_hard,
    generate_ladder,
    generate_random,
)
from .spectrum import (
    Spectrum,
    ThresholdSets,
    decide,
    enumerate_spectrum,
    ground_states,
    spectrum_stats,
    threshold_sets,
)
from .bnb import branch_and_bound_ground
from .noise import NoiseDraw, NoiseModel, PerturbedInstance, k_prime, perturbed_energy, sample_noise
from .locking import LockingAnalysis, TrialPlan, analyze, asymptotic_report, erf_window_mass, trial_plan
from .dynamics import TrialConfig, TrialOutcome, estimate_success, repeated_until_success, run_trial
from .harness import SweepRecord, SweepSpec, export, fit_decay, read_jsonl, run_sweep

__version__ = "0.1.0"
