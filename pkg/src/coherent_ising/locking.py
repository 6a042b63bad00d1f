"""Locking-window population analysis and repeated-trial bounds.

Every configuration starts with the same population, so the initial
population of an energy level is proportional to its multiplicity.  Modes
whose true energy lies in Y = {E < K} or in the spurious band
Z = {K <= E <= K + K'} are locked and enhanced equally, which fixes the
steady-state ratio P_Y / P_Z to its initial value.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import mpmath
import numpy as np
from scipy.special import ndtr

from .instance import IsingInstance
from .noise import NoiseModel, exact_support, k_prime
from .spectrum import Spectrum, enumerate_spectrum, threshold_sets


@dataclass(frozen=True)
class PopulationModel:
    """Uniform initial populations over all 2**n configurations.

    The per-configuration population is normalised to 1, so the scale factor
    M equals 2**n and P_lambda(0) = d_lambda.
    """

    n: int
    sigma_lambda: float

    def __post_init__(self):
        if not self.sigma_lambda > 0:
            raise ValueError(f"sigma_lambda must be > 0, got {self.sigma_lambda}")

    @property
    def M(self) -> int:
        return 1 << self.n

    @classmethod
    def for_instance(cls, instance: IsingInstance) -> "PopulationModel":
        return cls(instance.n, math.sqrt(instance.sum_sq_coefficients))

    def initial_populations(self, spectrum: Spectrum, scale: float = 1.0) -> dict[int, float]:
        return {lam: scale * d for lam, d in spectrum.histogram.items()}

    def gaussian_window(self, K: float, K_prime: float) -> float:
        """Envelope estimate M * (normal mass in [K, K + K'])."""
        return self.M * erf_window_mass(K, K_prime, self.sigma_lambda)


def erf_window_mass(K: float, K_prime: float, sigma_lambda: float) -> float:
    """Mass of N(0, sigma_lambda^2) on [K, K + K']."""
    if sigma_lambda <= 0:
        raise ValueError("sigma_lambda must be > 0")
    if K_prime < 0:
        raise ValueError("K_prime must be >= 0")
    if K_prime == 0:
        return 0.0
    lo, hi = K / sigma_lambda, (K + K_prime) / sigma_lambda
    # Subtract in whichever tail keeps precision.
    if lo >= 0:
        return float(ndtr(-lo) - ndtr(-hi))
    return float(ndtr(hi) - ndtr(lo))


@dataclass(frozen=True)
class LockingAnalysis:
    n: int
    K: int
    K_prime: float
    k_prime_linear: float
    k_prime_quadrature: float
    kprime_mode: str
    size_Y: int
    size_Z: int
    P_Y0: float
    P_Z0: float
    p_s: float
    sigma_lambda: float
    gaussian_PZ0: float
    z_fraction: float  # |Z| / 2**n, the empirical constant b
    no_instance: bool  # True when Y is empty

    @property
    def v(self) -> float:
        return self.K + self.K_prime

    @property
    def ratio(self) -> float:
        """P_Y/P_Z at steady state; ``inf`` when nothing spurious locks."""
        if self.size_Z == 0:
            return math.inf if self.size_Y else math.nan
        return self.P_Y0 / self.P_Z0

    @property
    def z_empty(self) -> bool:
        return self.size_Z == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["v"] = self.v
        d["ratio"] = None if self.z_empty else self.ratio
        d["z_empty"] = self.z_empty
        return d


def analyze(
    instance: IsingInstance,
    K: int,
    model: NoiseModel,
    kprime_mode: str = "paper-linear",
    support: str = "expected",
    K_prime: float | None = None,
    spectrum: Spectrum | None = None,
) -> LockingAnalysis:
    """Locking analysis of one (instance, K, noise model) cell.

    ``support`` selects expected (density 2/3) or the instance's exact
    coefficient counts for K'.  ``K_prime`` overrides the computed width.
    """
    if support == "exact":
        sup = exact_support(instance)
    elif support == "expected":
        sup = None
    else:
        raise ValueError(f"support must be 'expected' or 'exact', got {support!r}")
    n = instance.n
    kl = k_prime(n, model, "paper-linear", sup)
    kq = k_prime(n, model, "clt-quadrature", sup)
    if K_prime is None:
        K_prime = kl if kprime_mode == "paper-linear" else k_prime(n, model, kprime_mode, sup)
    spec = enumerate_spectrum(instance) if spectrum is None else spectrum
    ts = threshold_sets(spec, K, K_prime)
    y, z = ts.size_Y, ts.size_Z
    sigma = math.sqrt(instance.sum_sq_coefficients) or 1.0
    pop = PopulationModel(n, sigma)
    p_s = y / (y + z) if y else 0.0
    return LockingAnalysis(
        n=n,
        K=int(K),
        K_prime=float(K_prime),
        k_prime_linear=kl,
        k_prime_quadrature=kq,
        kprime_mode=kprime_mode,
        size_Y=y,
        size_Z=z,
        P_Y0=float(y),
        P_Z0=float(z),
        p_s=p_s,
        sigma_lambda=sigma,
        gaussian_PZ0=pop.gaussian_window(K, K_prime),
        z_fraction=z / spec.num_configs,
        no_instance=y == 0,
    )


@dataclass(frozen=True)
class TrialPlan:
    p_s: float
    c: float
    tau: int | None  # None when p_s == 0 (no finite budget suffices)

    @property
    def unbounded(self) -> bool:
        return self.tau is None


def _success_after(p: float, tau: int) -> mpmath.mpf:
    with mpmath.workprec(256):
        return 1 - (1 - mpmath.mpf(p)) ** tau


def trial_plan(p_s: float, c: float) -> TrialPlan:
    """Smallest tau with 1 - (1 - p_s)**tau >= c."""
    if not 0 <= p_s <= 1:
        raise ValueError(f"p_s must lie in [0, 1], got {p_s}")
    if not 0 < c < 1:
        raise ValueError(f"c must lie in (0, 1), got {c}")
    if p_s == 0:
        return TrialPlan(p_s, c, None)
    if p_s == 1:
        return TrialPlan(p_s, c, 1)
    tau = max(1, math.ceil(math.log1p(-c) / math.log1p(-p_s)))
    target = mpmath.mpf(c)
    # The float estimate can be off by one near ties; settle it at high precision.
    while tau > 1 and _success_after(p_s, tau - 1) >= target:
        tau -= 1
    while _success_after(p_s, tau) < target:
        tau += 1
    return TrialPlan(p_s, c, tau)


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r2: float


def fit_line(x: Sequence[float], y: Sequence[float]) -> LineFit:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - float((resid**2).sum()) / ss_tot
    return LineFit(float(slope), float(intercept), r2)


@dataclass(frozen=True)
class AsymptoticReport:
    degenerate: bool
    reason: str | None
    fit: LineFit | None
    poly_fit: tuple[float, float, float] | None  # (slope, log-n exponent, intercept)
    table: list[dict]


def asymptotic_report(analyses: Iterable[LockingAnalysis], c: float = 0.99) -> AsymptoticReport:
    """Fit ln p_s against n over a sweep (median p_s per n)."""
    by_n: dict[int, list[float]] = {}
    for a in analyses:
        by_n.setdefault(a.n, []).append(a.p_s)
    ns = sorted(by_n)
    table = []
    for n in ns:
        med = float(np.median(by_n[n]))
        plan = trial_plan(med, c) if med > 0 else TrialPlan(med, c, None)
        table.append({"n": n, "median_p_s": med, "count": len(by_n[n]), "tau": plan.tau})
    xs = [row["n"] for row in table if row["median_p_s"] > 0]
    ys = [math.log(row["median_p_s"]) for row in table if row["median_p_s"] > 0]
    if len(xs) < 4:
        return AsymptoticReport(True, f"need >= 4 distinct n with p_s > 0, got {len(xs)}", None, None, table)
    if all(row["median_p_s"] == 1.0 for row in table):
        return AsymptoticReport(True, "p_s = 1 at every n (no spurious locking)", None, None, table)
    fit = fit_line(xs, ys)
    A = np.column_stack([xs, np.log(xs), np.ones(len(xs))])
    coef, *_ = np.linalg.lstsq(A, np.asarray(ys), rcond=None)
    return AsymptoticReport(False, None, fit, tuple(float(v) for v in coef), table)
