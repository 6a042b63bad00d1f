"""Exact spectrum enumeration, ground states, threshold sets and decisions.

Three enumerators produce identical histograms:

* ``"blocked"`` (default): the configuration space is split by high-order bit
  prefixes; each block of ``2**block_bits`` low-order configurations is
  evaluated with one matrix-vector product.  Memory is O(2**block_bits).
* ``"gray"``: a single Gray-code walk with O(degree) local-field updates.
* ``"naive"``: calls :func:`energy` on every configuration.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

import numpy as np
from scipy.special import ndtr

from .errors import EnumerationLimitError
from .instance import (
    MAX_SPINS,
    DecisionInstance,
    IsingInstance,
    SpinConfig,
    energy,
)

DEFAULT_BLOCK_BITS = 16


def check_cap(n: int, cap: int | None = None):
    cap = MAX_SPINS if cap is None else cap
    if n > cap:
        raise EnumerationLimitError(
            f"n={n} exceeds the enumeration cap of {cap} spins (2**{n} configurations)"
        )


@lru_cache(maxsize=4)
def _spin_matrix(bits: int) -> np.ndarray:
    """Row k holds the spins of bit pattern k; read-only and shared."""
    idx = np.arange(1 << bits, dtype=np.int64)
    S = (1 - 2 * ((idx[:, None] >> np.arange(bits)) & 1)).astype(np.float64)
    S.setflags(write=False)
    return S


class BlockEvaluator:
    """Evaluate sum_{i<j} w_ij s_i s_j + sum_i b_i s_i over blocks of configurations.

    Works for integer or real coefficients.  Block ``p`` covers bit patterns
    ``p << low_bits`` .. ``(p + 1) << low_bits`` - 1 in ascending order.
    """

    def __init__(self, n, ii, jj, weights, fields, block_bits=DEFAULT_BLOCK_BITS, exact_int=True):
        self.n = n
        self.low_bits = lb = min(n, block_bits)
        self.high_bits = n - lb
        self.exact_int = exact_int
        ii = np.asarray(ii, dtype=np.int64)
        jj = np.asarray(jj, dtype=np.int64)
        w = np.asarray(weights, dtype=np.float64)
        b = np.asarray(fields, dtype=np.float64)

        self.S = _spin_matrix(lb)

        low = jj < lb
        cross = (ii < lb) & (jj >= lb)
        high = ii >= lb
        upper = np.zeros((lb, lb))
        np.add.at(upper, (ii[low], jj[low]), w[low])
        self.e_low = ((self.S @ upper) * self.S).sum(axis=1) + self.S @ b[:lb]

        nh = self.high_bits
        self.cross = np.zeros((lb, nh))
        np.add.at(self.cross, (ii[cross], jj[cross] - lb), w[cross])
        self.high_pairs = (ii[high] - lb, jj[high] - lb, w[high])
        self.b_high = b[lb:]

    @property
    def num_blocks(self) -> int:
        return 1 << self.high_bits

    def block(self, prefix: int) -> np.ndarray:
        nh = self.high_bits
        if nh == 0:
            e = self.e_low.copy()
        else:
            sh = (1 - 2 * ((prefix >> np.arange(nh)) & 1)).astype(np.float64)
            hi, hj, hw = self.high_pairs
            e_high = float(sh @ self.b_high + (sh[hi] * sh[hj]) @ hw)
            e = self.e_low + self.S @ (self.cross @ sh) + e_high
        if self.exact_int:
            return np.rint(e).astype(np.int64)
        return e

    def blocks(self, prefixes=None) -> Iterator[tuple[int, np.ndarray]]:
        """Yield ``(first_bit_pattern, energies)`` per block."""
        if prefixes is None:
            prefixes = range(self.num_blocks)
        for p in prefixes:
            yield p << self.low_bits, self.block(p)


def evaluator(instance: IsingInstance, block_bits=DEFAULT_BLOCK_BITS) -> BlockEvaluator:
    ii, jj, w = instance.coupling_arrays
    return BlockEvaluator(instance.n, ii, jj, w, instance.field_array, block_bits)


def energy_table(instance: IsingInstance, cap: int | None = None) -> np.ndarray:
    """All 2**n energies indexed by bit pattern (materialised; keep n modest)."""
    check_cap(instance.n, cap)
    ev = evaluator(instance)
    dtype = np.int16 if instance.energy_bound < 2**15 else np.int32
    return np.concatenate([e for _, e in ev.blocks()]).astype(dtype)


def gray_walk(instance: IsingInstance) -> Iterator[tuple[int, int]]:
    """Yield ``(bits, energy)`` along the reflected Gray code from bits=0."""
    n = instance.n
    nbrs = instance.neighbors
    h = list(instance.fields)
    for i, j, J in instance.couplings:
        h[i] += J
        h[j] += J
    spins = [1] * n
    e = sum(J for _, _, J in instance.couplings) + sum(instance.fields)
    bits = 0
    yield bits, e
    for k in range(1, 1 << n):
        i = (k & -k).bit_length() - 1
        si = spins[i]
        e -= 2 * si * h[i]
        spins[i] = -si
        bits ^= 1 << i
        for j, J in nbrs[i]:
            h[j] -= 2 * J * si
        yield bits, e


@dataclass(frozen=True)
class Spectrum:
    """Exact eigenvalue histogram of a diagonal Ising Hamiltonian."""

    n: int
    histogram: dict[int, int]
    sum_energy: int
    second_moment: int  # sum of E(s)**2 over all 2**n configurations

    @property
    def lambda_g(self) -> int:
        return min(self.histogram)

    @property
    def d_g(self) -> int:
        return self.histogram[self.lambda_g]

    @property
    def num_configs(self) -> int:
        return 1 << self.n

    @property
    def mean(self) -> Fraction:
        return Fraction(self.sum_energy, self.num_configs)

    @property
    def variance(self) -> Fraction:
        return Fraction(self.second_moment, self.num_configs) - self.mean**2

    def count_between(self, lo: float, hi: float) -> int:
        return sum(d for lam, d in self.histogram.items() if lo <= lam <= hi)

    def count_below(self, K: float) -> int:
        return sum(d for lam, d in self.histogram.items() if lam < K)


def _from_counts(n: int, counts: dict[int, int]) -> Spectrum:
    hist = {lam: counts[lam] for lam in sorted(counts) if counts[lam]}
    s1 = sum(lam * d for lam, d in hist.items())
    s2 = sum(lam * lam * d for lam, d in hist.items())
    return Spectrum(n, hist, s1, s2)


def enumerate_spectrum(
    instance: IsingInstance,
    method: str = "blocked",
    workers: int = 1,
    cap: int | None = None,
    block_bits: int = DEFAULT_BLOCK_BITS,
) -> Spectrum:
    """Exact histogram of all 2**n energies."""
    n = instance.n
    check_cap(n, cap)
    if method == "gray":
        counts: dict[int, int] = {}
        for _, e in gray_walk(instance):
            counts[e] = counts.get(e, 0) + 1
        return _from_counts(n, counts)
    if method == "naive":
        counts = {}
        for bits in range(1 << n):
            e = energy(instance, SpinConfig(bits, n))
            counts[e] = counts.get(e, 0) + 1
        return _from_counts(n, counts)
    if method != "blocked":
        raise ValueError(f"unknown enumeration method {method!r}")

    ev = evaluator(instance, block_bits)
    bound = instance.energy_bound
    size = 2 * bound + 1

    def run(prefixes):
        acc = np.zeros(size, dtype=np.int64)
        for _, e in ev.blocks(prefixes):
            acc += np.bincount(e + bound, minlength=size)
        return acc

    nblocks = ev.num_blocks
    workers = max(1, min(workers, nblocks))
    if workers == 1:
        total = run(range(nblocks))
    else:
        step = math.ceil(nblocks / workers)
        chunks = [range(k, min(k + step, nblocks)) for k in range(0, nblocks, step)]
        with ThreadPoolExecutor(workers) as pool:
            total = sum(pool.map(run, chunks))
    counts = {int(k) - bound: int(c) for k, c in enumerate(total) if c}
    return _from_counts(n, counts)


def ground_states(
    instance: IsingInstance, limit: int | None = None, block_bits: int = DEFAULT_BLOCK_BITS
) -> list[SpinConfig]:
    """Ground configurations in ascending bit order, at most ``limit`` of them."""
    check_cap(instance.n)
    best = None
    found: list[int] = []
    for start, e in evaluator(instance, block_bits).blocks():
        m = int(e.min())
        if best is None or m < best:
            best = m
            found = []
        if m == best and (limit is None or len(found) < limit):
            found.extend(int(start + k) for k in np.flatnonzero(e == m))
    if limit is not None:
        found = found[:limit]
    return [SpinConfig(b, instance.n) for b in found]


@dataclass(frozen=True)
class DecisionResult:
    yes: bool
    witness: SpinConfig | None
    lambda_g: int

    @property
    def answer(self) -> str:
        return "YES" if self.yes else "NO"


def decide(decision: DecisionInstance) -> DecisionResult:
    """Is there an eigenvalue strictly below K?  Witness is a ground state."""
    inst = decision.instance
    ground = ground_states(inst, limit=1)[0]
    lam = energy(inst, ground)
    if lam < decision.K:
        return DecisionResult(True, ground, lam)
    return DecisionResult(False, None, lam)


@dataclass(frozen=True)
class ThresholdSets:
    """Sizes of Y = {E < K}, Z = {K <= E <= K + K'} and the rest."""

    K: int
    K_prime: float
    size_Y: int
    size_Z: int
    size_X: int  # E >= K (Z included)
    total: int

    @property
    def K_upper(self) -> float:
        return self.K + self.K_prime

    @property
    def size_X_above(self) -> int:
        """Configurations above the window, E > K + K'."""
        return self.size_X - self.size_Z


def threshold_sets(source: IsingInstance | Spectrum, K: int, K_prime: float) -> ThresholdSets:
    if K_prime < 0:
        raise ValueError(f"K_prime must be >= 0, got {K_prime}")
    spec = source if isinstance(source, Spectrum) else enumerate_spectrum(source)
    y = spec.count_below(K)
    z = spec.count_between(K, K + K_prime)
    return ThresholdSets(K, K_prime, y, z, spec.num_configs - y, spec.num_configs)


@dataclass(frozen=True)
class SpectrumStats:
    mean: Fraction
    variance: Fraction
    std: float
    c_g: float
    ks_distance: float


def ks_distance_normal(spectrum: Spectrum) -> float:
    """Kolmogorov-Smirnov distance between the standardised spectrum and N(0, 1)."""
    mean = spectrum.mean
    std = math.sqrt(spectrum.variance)
    if std == 0:
        return 1.0
    lam = np.array([float(k - mean) for k in spectrum.histogram]) / std
    d = np.array(list(spectrum.histogram.values()), dtype=np.float64)
    cdf_hi = np.cumsum(d) / spectrum.num_configs
    cdf_lo = np.concatenate(([0.0], cdf_hi[:-1]))
    phi = ndtr(lam)
    return float(max(np.abs(cdf_hi - phi).max(), np.abs(cdf_lo - phi).max()))


def spectrum_stats(spectrum: Spectrum) -> SpectrumStats:
    var = spectrum.variance
    return SpectrumStats(
        mean=spectrum.mean,
        variance=var,
        std=math.sqrt(var),
        c_g=spectrum.lambda_g / spectrum.n,
        ks_distance=ks_distance_normal(spectrum),
    )


def spectrum_to_csv(spectrum: Spectrum) -> str:
    buf = io.StringIO()
    buf.write("energy,multiplicity\n")
    for lam, d in spectrum.histogram.items():
        buf.write(f"{lam},{d}\n")
    return buf.getvalue()


def spectrum_to_json(spectrum: Spectrum) -> str:
    st = spectrum_stats(spectrum)
    doc = {
        "n": spectrum.n,
        "histogram": [[lam, d] for lam, d in spectrum.histogram.items()],
        "stats": {
            "lambda_g": spectrum.lambda_g,
            "d_g": spectrum.d_g,
            "mean": str(st.mean),
            "variance": str(st.variance),
            "std": st.std,
            "c_g": st.c_g,
            "ks_distance": st.ks_distance,
        },
    }
    return json.dumps(doc, indent=1) + "\n"
