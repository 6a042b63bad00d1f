"""Monte Carlo simulation of single coherent-computing runs.

A run locks a set L of modes and reads out one member of it.  All members
start with the same population and are enhanced equally, so the readout is
uniform over L.  Success is always scored on the true (unperturbed) energy.

Rules for L:

``paper-window``
    L = {s : E(s) <= K + K'}; noise enters only through the width K'.
``perturbed-threshold``
    draw a noise realisation, then L = {s : E~(s) <= min E~ + W}.

Each trial seed picks the readout through :func:`unit_interval`, so trial t
of a batch is reproducible on its own and batches can be split freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import EmptyLockedSetError
from .instance import IsingInstance, SpinConfig, energy
from .noise import (
    NoiseModel,
    PerturbedInstance,
    exact_support,
    k_prime,
    perturbed_evaluator,
    sample_noise,
)
from .seeding import derive_seed, derive_seeds, unit_interval, unit_interval_array
from .spectrum import energy_table, evaluator

RULES = ("paper-window", "perturbed-threshold")
TABLE_MAX_SPINS = 24


@dataclass(frozen=True)
class TrialConfig:
    K: int
    model: NoiseModel = field(default_factory=NoiseModel)
    rule: str = "paper-window"
    kprime_mode: str = "paper-linear"
    support: str = "expected"
    k_prime: float | None = None  # forced window width (paper-window only)
    width_W: float = 0.0  # band above the perturbed minimum (perturbed-threshold only)
    seed: int | None = None

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.width_W < 0:
            raise ValueError("width_W must be >= 0")
        if self.k_prime is not None and self.k_prime < 0:
            raise ValueError("k_prime must be >= 0")

    def window(self, instance: IsingInstance) -> float:
        """K' used by the paper-window rule."""
        if self.k_prime is not None:
            return float(self.k_prime)
        sup = exact_support(instance) if self.support == "exact" else None
        return k_prime(instance.n, self.model, self.kprime_mode, sup)

    def with_K(self, K: int) -> "TrialConfig":
        return replace(self, K=int(K))


@dataclass(frozen=True)
class TrialOutcome:
    chosen: SpinConfig
    true_energy: int
    success: bool
    locked_count: int
    draw_seed: int | None


class _WindowCache:
    """Energy table and sorted locked set for one (instance, window) pair."""

    def __init__(self, instance: IsingInstance, upper: float):
        self.table = energy_table(instance)
        self.locked = np.flatnonzero(self.table <= upper)


@lru_cache(maxsize=4)
def _window_cache(instance: IsingInstance, upper: float) -> _WindowCache:
    return _WindowCache(instance, upper)


def _pick_streaming(make_blocks, upper: float, u: float):
    """Return (bit pattern, locked count) of member floor(u*|L|) of L = {e <= upper}."""
    count = sum(int(np.count_nonzero(e <= upper)) for _, e in make_blocks())
    if count == 0:
        return None, 0
    target = int(u * count)
    for start, e in make_blocks():
        hits = np.flatnonzero(e <= upper)
        if target < len(hits):
            return int(start + hits[target]), count
        target -= len(hits)
    raise AssertionError("unreachable: locked member not found on second pass")


def run_trial(instance: IsingInstance, config: TrialConfig, trial_seed: int) -> TrialOutcome:
    n = instance.n
    u = unit_interval(trial_seed)
    if config.rule == "paper-window":
        upper = config.K + config.window(instance)
        if n <= TABLE_MAX_SPINS:
            cache = _window_cache(instance, upper)
            count = len(cache.locked)
            bits = int(cache.locked[int(u * count)]) if count else None
        else:
            ev = evaluator(instance)
            bits, count = _pick_streaming(ev.blocks, upper, u)
        if bits is None:
            raise EmptyLockedSetError(
                f"no configuration has E <= K + K' = {upper:g}; K is inconsistent with the instance"
            )
        draw_seed = None
    else:
        draw_seed = derive_seed(trial_seed, 1)
        draw = sample_noise(instance, config.model, draw_seed)
        ev = perturbed_evaluator(PerturbedInstance(instance, draw))
        low = min(float(e.min()) for _, e in ev.blocks())
        bits, count = _pick_streaming(ev.blocks, low + config.width_W, u)
    chosen = SpinConfig(bits, n)
    e = energy(instance, chosen)
    return TrialOutcome(chosen, e, e < config.K, count, draw_seed)


@dataclass(frozen=True)
class SuccessEstimate:
    p_hat: float
    stderr: float
    successes: int
    trials: int


def _estimate(successes: int, trials: int) -> SuccessEstimate:
    p = successes / trials
    return SuccessEstimate(p, math.sqrt(p * (1 - p) / trials), successes, trials)


def trial_seeds(master_seed: int, trials: int) -> np.ndarray:
    return derive_seeds(master_seed, np.arange(trials, dtype=np.uint64))


def estimate_success(
    instance: IsingInstance,
    config: TrialConfig,
    trials: int,
    master_seed: int,
) -> SuccessEstimate:
    """Fraction of successful trials; trial t uses ``derive_seed(master_seed, t)``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if config.rule == "paper-window" and instance.n <= TABLE_MAX_SPINS:
        upper = config.K + config.window(instance)
        cache = _window_cache(instance, upper)
        count = len(cache.locked)
        if count == 0:
            raise EmptyLockedSetError(f"no configuration has E <= K + K' = {upper:g}")
        u = unit_interval_array(trial_seeds(master_seed, trials))
        chosen = cache.locked[(u * count).astype(np.int64)]
        successes = int(np.count_nonzero(cache.table[chosen] < config.K))
        return _estimate(successes, trials)
    successes = sum(
        run_trial(instance, config, int(s)).success for s in trial_seeds(master_seed, trials)
    )
    return _estimate(successes, trials)


@dataclass(frozen=True)
class RepeatResult:
    found: bool
    trials_used: int
    witness: SpinConfig | None = None


def repeated_until_success(
    instance: IsingInstance,
    config: TrialConfig,
    tau: int,
    master_seed: int,
) -> RepeatResult:
    """Run up to ``tau`` independent trials, stopping at the first success."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    for t in range(tau):
        out = run_trial(instance, config, derive_seed(master_seed, t))
        if out.success:
            return RepeatResult(True, t + 1, out.chosen)
    return RepeatResult(False, tau)
