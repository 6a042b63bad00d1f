"""Calibration-error model for the implemented Hamiltonian.

Every nonzero coupling J_ij picks up an i.i.d. deviation eps_ij and every
nonzero field B_i a deviation kappa_i.  Zero coefficients stay exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DimensionError
from .instance import IsingInstance, SpinConfig, energy
from .spectrum import BlockEvaluator, DEFAULT_BLOCK_BITS

DISTRIBUTIONS = ("gaussian", "uniform")
KPRIME_MODES = ("paper-linear", "clt-quadrature")


@dataclass(frozen=True)
class NoiseModel:
    sigma_eps: float = 0.0
    sigma_kappa: float = 0.0
    distribution: str = "gaussian"

    def __post_init__(self):
        for name in ("sigma_eps", "sigma_kappa"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}, got {self.distribution!r}")

    def to_dict(self) -> dict:
        return {
            "sigma_eps": self.sigma_eps,
            "sigma_kappa": self.sigma_kappa,
            "distribution": self.distribution,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseModel":
        return cls(d.get("sigma_eps", 0.0), d.get("sigma_kappa", 0.0), d.get("distribution", "gaussian"))

    def _draw(self, rng, sigma, size):
        if sigma == 0:
            return np.zeros(size)
        if self.distribution == "gaussian":
            return rng.normal(0.0, sigma, size)
        half = sigma * math.sqrt(3.0)
        return rng.uniform(-half, half, size)


@dataclass(frozen=True)
class NoiseDraw:
    eps: dict[tuple[int, int], float]
    kappa: dict[int, float]
    seed: int | None = None

    def scaled(self, alpha: float) -> "NoiseDraw":
        return NoiseDraw(
            {k: alpha * v for k, v in self.eps.items()},
            {k: alpha * v for k, v in self.kappa.items()},
            self.seed,
        )


def _field_support(instance):
    return [i for i, b in enumerate(instance.fields) if b]


def sample_noise(instance: IsingInstance, model: NoiseModel, seed: int) -> NoiseDraw:
    """One deviation per nonzero coefficient; couplings first, then fields."""
    rng = np.random.default_rng(seed)
    support = _field_support(instance)
    eps = model._draw(rng, model.sigma_eps, instance.num_couplings)
    kappa = model._draw(rng, model.sigma_kappa, len(support))
    return NoiseDraw(
        {(i, j): float(e) for (i, j, _), e in zip(instance.couplings, eps)},
        {i: float(k) for i, k in zip(support, kappa)},
        seed,
    )


def sample_noise_batch(instance: IsingInstance, model: NoiseModel, seed: int, count: int):
    """``count`` independent draws as arrays of shape (count, m_J) and (count, m_B)."""
    rng = np.random.default_rng(seed)
    m_b = instance.num_fields
    eps = model._draw(rng, model.sigma_eps, (count, instance.num_couplings))
    kappa = model._draw(rng, model.sigma_kappa, (count, m_b))
    return eps, kappa


@dataclass(frozen=True)
class PerturbedInstance:
    base: IsingInstance
    draw: NoiseDraw

    def coefficient_arrays(self):
        """Perturbed couplings and fields as dense arrays (zeros stay zero)."""
        ii, jj, w = self.base.coupling_arrays
        w = w.astype(np.float64) + np.array(
            [self.draw.eps.get((i, j), 0.0) for i, j, _ in self.base.couplings]
        )
        b = self.base.field_array.astype(np.float64)
        for i, k in self.draw.kappa.items():
            b[i] += k
        return ii, jj, w, b


def shift(instance: IsingInstance, draw: NoiseDraw, config: SpinConfig) -> float:
    """Energy offset sum eps_ij s_i s_j + sum kappa_i s_i caused by the draw."""
    if config.n != instance.n:
        raise DimensionError(f"configuration has {config.n} spins, instance has {instance.n}")
    s = config.spins()
    total = math.fsum(e * s[i] * s[j] for (i, j), e in draw.eps.items())
    return total + math.fsum(k * s[i] for i, k in draw.kappa.items())


def perturbed_energy(perturbed: PerturbedInstance, config: SpinConfig) -> float:
    return energy(perturbed.base, config) + shift(perturbed.base, perturbed.draw, config)


def perturbed_evaluator(perturbed: PerturbedInstance, block_bits=DEFAULT_BLOCK_BITS) -> BlockEvaluator:
    ii, jj, w, b = perturbed.coefficient_arrays()
    return BlockEvaluator(perturbed.base.n, ii, jj, w, b, block_bits, exact_int=False)


def perturbed_energy_table(perturbed: PerturbedInstance) -> np.ndarray:
    ev = perturbed_evaluator(perturbed)
    return np.concatenate([e for _, e in ev.blocks()])


def expected_support(n: int) -> tuple[float, float]:
    """Mean numbers of nonzero couplings and fields at density 2/3."""
    return n * (n - 1) / 3.0, 2.0 * n / 3.0


def k_prime(
    n: int,
    model: NoiseModel,
    mode: str = "paper-linear",
    support: tuple[float, float] | None = None,
) -> float:
    """Width of the locking window above K.

    ``paper-linear`` adds the two standard-deviation terms,
    sigma_eps*sqrt(m_J) + sigma_kappa*sqrt(m_B); ``clt-quadrature`` combines
    them as independent contributions, sqrt(sigma_eps^2 m_J + sigma_kappa^2 m_B).
    Supports default to their density-2/3 expectations.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    m_j, m_b = expected_support(n) if support is None else support
    if mode == "paper-linear":
        return model.sigma_eps * math.sqrt(m_j) + model.sigma_kappa * math.sqrt(m_b)
    if mode == "clt-quadrature":
        return math.sqrt(model.sigma_eps**2 * m_j + model.sigma_kappa**2 * m_b)
    raise ValueError(f"unknown K' mode {mode!r}; expected one of {KPRIME_MODES}")


def exact_support(instance: IsingInstance) -> tuple[int, int]:
    return instance.num_couplings, instance.num_fields
