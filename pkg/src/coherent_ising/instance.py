"""Ising problem instances, spin configurations and instance generators.

Spin convention: bit ``i`` of a configuration maps to ``s_i = 1 - 2*bit_i``,
so bit 0 is the right-circular state (s = +1) and bit 1 the left one
(s = -1).  Energies of unperturbed instances are exact Python integers.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionError,
    GenerationFailedError,
    InstanceError,
    InstanceFormatError,
)
from .seeding import derive_seed

MAX_SPINS = int(os.environ.get("COHISING_MAX_SPINS", "30"))
FORMAT_VERSION = 1
DEFAULT_DENSITY = 2.0 / 3.0
HARD_MAX_DEGENERACY = 4
HARD_MAX_ATTEMPTS = 10_000


@dataclass(frozen=True)
class SpinConfig:
    """One basis configuration of ``n`` spins, packed into an integer."""

    bits: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise InstanceError(f"spin count must be >= 1, got {self.n}")
        if not 0 <= self.bits < (1 << self.n):
            raise InstanceError(f"bits {self.bits:#x} do not fit in {self.n} spins")

    @classmethod
    def from_spins(cls, spins: Sequence[int]) -> "SpinConfig":
        bits = 0
        for i, s in enumerate(spins):
            if s not in (1, -1):
                raise InstanceError(f"spin {i} must be +1 or -1, got {s}")
            if s == -1:
                bits |= 1 << i
        return cls(bits, len(spins))

    def spin(self, i: int) -> int:
        return 1 - 2 * ((self.bits >> i) & 1)

    def spins(self) -> tuple[int, ...]:
        return tuple(1 - 2 * ((self.bits >> i) & 1) for i in range(self.n))

    def flip(self, i: int) -> "SpinConfig":
        if not 0 <= i < self.n:
            raise IndexError(f"spin index {i} out of range for n={self.n}")
        return SpinConfig(self.bits ^ (1 << i), self.n)

    def flip_all(self) -> "SpinConfig":
        return SpinConfig(self.bits ^ ((1 << self.n) - 1), self.n)

    def bitstring(self) -> str:
        """Bits written most-significant first, e.g. ``'001'`` for bits=1, n=3."""
        return format(self.bits, f"0{self.n}b")

    def __str__(self):
        return self.bitstring()


@dataclass(frozen=True)
class IsingInstance:
    """H = sum_{i<j} J_ij s_i s_j + sum_i B_i s_i with J, B in {0, +1, -1}.

    ``couplings`` holds only the nonzero J_ij as ``(i, j, J)`` triples sorted
    by ``(i, j)``; ``fields`` holds all n values of B_i.
    """

    n: int
    couplings: tuple[tuple[int, int, int], ...]
    fields: tuple[int, ...]
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InstanceError(f"spin count must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        couplings = tuple(sorted((int(i), int(j), int(J)) for i, j, J in self.couplings))
        seen = set()
        for i, j, J in couplings:
            if not 0 <= i < j < self.n:
                raise InstanceError(f"coupling ({i}, {j}) needs 0 <= i < j < {self.n}")
            if J not in (1, -1):
                raise InstanceError(f"coupling ({i}, {j}) has J={J}; stored J must be +1 or -1")
            if (i, j) in seen:
                raise InstanceError(f"duplicate coupling ({i}, {j})")
            seen.add((i, j))
        fields = tuple(int(b) for b in self.fields)
        if len(fields) != self.n:
            raise InstanceError(f"expected {self.n} fields, got {len(fields)}")
        for i, b in enumerate(fields):
            if b not in (-1, 0, 1):
                raise InstanceError(f"field B_{i}={b} outside {{-1, 0, 1}}")
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "fields", fields)

    @property
    def num_couplings(self) -> int:
        return len(self.couplings)

    @property
    def num_fields(self) -> int:
        """Number of nonzero fields."""
        return sum(1 for b in self.fields if b)

    @property
    def energy_bound(self) -> int:
        """Upper bound on |E(s)| for every configuration."""
        return self.num_couplings + self.num_fields

    @property
    def sum_sq_coefficients(self) -> int:
        return sum(J * J for _, _, J in self.couplings) + sum(b * b for b in self.fields)

    @cached_property
    def coupling_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.couplings:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), empty.copy()
        arr = np.asarray(self.couplings, dtype=np.int64)
        return arr[:, 0], arr[:, 1], arr[:, 2]

    @cached_property
    def field_array(self) -> np.ndarray:
        return np.asarray(self.fields, dtype=np.int64)

    @cached_property
    def neighbors(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per spin: ``(j, J_ij)`` for every coupled spin j."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for i, j, J in self.couplings:
            adj[i].append((j, J))
            adj[j].append((i, J))
        return tuple(tuple(a) for a in adj)

    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v, _ in self.neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n


@dataclass(frozen=True)
class DecisionInstance:
    """Question: does H have an eigenvalue strictly below ``K``?"""

    instance: IsingInstance
    K: int

    def __post_init__(self):
        if isinstance(self.K, bool) or int(self.K) != self.K:
            raise InstanceError(f"K must be an integer, got {self.K!r}")
        object.__setattr__(self, "K", int(self.K))


def _check_dims(instance: IsingInstance, config: SpinConfig):
    if config.n != instance.n:
        raise DimensionError(f"configuration has {config.n} spins, instance has {instance.n}")


def energy(instance: IsingInstance, config: SpinConfig) -> int:
    """Exact energy <config|H|config>."""
    _check_dims(instance, config)
    s = config.spins()
    total = 0
    for i, j, J in instance.couplings:
        total += J * s[i] * s[j]
    for i, b in enumerate(instance.fields):
        total += b * s[i]
    return total


def local_field(instance: IsingInstance, config: SpinConfig, i: int) -> int:
    """sum_j J_ij s_j + B_i at spin ``i``."""
    h = instance.fields[i]
    bits = config.bits
    for j, J in instance.neighbors[i]:
        h += J * (1 - 2 * ((bits >> j) & 1))
    return h


def energy_delta(instance: IsingInstance, config: SpinConfig, flip: int) -> int:
    """E(config with spin ``flip`` toggled) - E(config)."""
    _check_dims(instance, config)
    if not 0 <= flip < instance.n:
        raise IndexError(f"spin index {flip} out of range for n={instance.n}")
    return -2 * config.spin(flip) * local_field(instance, config, flip)


def _check_n(n):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InstanceError(f"spin count must be a positive integer, got {n!r}")


def generate_random(n: int, seed: int, density: float = DEFAULT_DENSITY) -> IsingInstance:
    """Each J_ij and B_i is nonzero with probability ``density``, then +-1.

    With the default density the coefficients are uniform over {0, +1, -1}.
    """
    _check_n(n)
    if not 0.0 < density <= 1.0:
        raise InstanceError(f"density must lie in (0, 1], got {density}")
    rng = np.random.default_rng(seed)
    m = n * (n - 1) // 2
    nonzero = rng.random(m + n) < density
    signs = 2 * rng.integers(0, 2, size=m + n) - 1
    values = np.where(nonzero, signs, 0)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    couplings = tuple(
        (i, j, int(values[k])) for k, (i, j) in enumerate(pairs) if values[k]
    )
    fields = tuple(int(v) for v in values[m:])
    return IsingInstance(n, couplings, fields, label=f"random/seed={seed}/density={density:.3f}")


def ladder_edges(n: int) -> list[tuple[int, int]]:
    """Two rails of n/2 sites with rungs; site 2k on one rail, 2k+1 on the other."""
    edges = []
    for k in range(n // 2):
        edges.append((2 * k, 2 * k + 1))
        if k + 1 < n // 2:
            edges.append((2 * k, 2 * k + 2))
            edges.append((2 * k + 1, 2 * k + 3))
    return sorted(edges)


def generate_ladder(n: int, seed: int) -> IsingInstance:
    """Ladder graph with every J_ij and every B_i drawn uniformly from {+1, -1}."""
    _check_n(n)
    if n % 2 or n < 4:
        raise InstanceError(f"ladder needs an even n >= 4, got {n}")
    rng = np.random.default_rng(seed)
    edges = ladder_edges(n)
    signs = 2 * rng.integers(0, 2, size=len(edges) + n) - 1
    couplings = tuple((i, j, int(signs[k])) for k, (i, j) in enumerate(edges))
    fields = tuple(int(v) for v in signs[len(edges):])
    return IsingInstance(n, couplings, fields, label=f"ladder/seed={seed}")


def generate_hard(
    n: int,
    seed: int,
    density: float = DEFAULT_DENSITY,
    max_degeneracy: int = HARD_MAX_DEGENERACY,
    max_attempts: int = HARD_MAX_ATTEMPTS,
) -> DecisionInstance:
    """Rejection-sample a connected random instance with few ground states.

    The threshold is ``K = lambda_g + 1`` so the solution set is exactly the
    ground level.
    """
    from .spectrum import enumerate_spectrum

    _check_n(n)
    if n < 4:
        raise InstanceError(f"hard family needs n >= 4, got {n}")
    if n > MAX_SPINS:
        raise InstanceError(f"n={n} exceeds the enumeration cap {MAX_SPINS}")
    for attempt in range(max_attempts):
        inst = generate_random(n, derive_seed(seed, attempt), density)
        if not inst.is_connected():
            continue
        spec = enumerate_spectrum(inst)
        if spec.d_g <= max_degeneracy:
            labelled = IsingInstance(
                n, inst.couplings, inst.fields,
                label=f"hard/seed={seed}/attempt={attempt}/density={density:.3f}",
            )
            return DecisionInstance(labelled, spec.lambda_g + 1)
    raise GenerationFailedError(
        f"no connected instance with d_g <= {max_degeneracy} for n={n}, seed={seed}",
        attempts=max_attempts,
    )


# --- canonical file format -------------------------------------------------


def to_dict(obj: IsingInstance | DecisionInstance) -> dict:
    if isinstance(obj, DecisionInstance):
        d = to_dict(obj.instance)
        d["K"] = obj.K
        return d
    return {
        "version": FORMAT_VERSION,
        "n": obj.n,
        "couplings": [list(c) for c in obj.couplings],
        "fields": list(obj.fields),
        "label": obj.label,
    }


def dumps(obj: IsingInstance | DecisionInstance) -> str:
    return json.dumps(to_dict(obj)) + "\n"


def _int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceFormatError(f"expected an integer, got {value!r}", where)
    return value


def from_dict(data, path=None) -> IsingInstance | DecisionInstance:
    if not isinstance(data, dict):
        raise InstanceFormatError("top level must be an object", path=path)
    version = data.get("version")
    if version != FORMAT_VERSION:
        raise InstanceFormatError(f"unsupported version {version!r}", "version", path)
    for key in ("n", "couplings", "fields"):
        if key not in data:
            raise InstanceFormatError("missing required key", key, path)
    try:
        n = _int(data["n"], "n")
        if not 1 <= n <= MAX_SPINS:
            raise InstanceFormatError(f"n must lie in [1, {MAX_SPINS}], got {n}", "n")
        if not isinstance(data["couplings"], list):
            raise InstanceFormatError("expected a list", "couplings")
        couplings = []
        seen = set()
        for k, triple in enumerate(data["couplings"]):
            where = f"couplings[{k}]"
            if not isinstance(triple, list) or len(triple) != 3:
                raise InstanceFormatError("expected [i, j, J]", where)
            i, j, J = (_int(v, where) for v in triple)
            if not 0 <= i < j < n:
                raise InstanceFormatError(f"indices ({i}, {j}) need 0 <= i < j < {n}", where)
            if J not in (1, -1):
                raise InstanceFormatError(f"J must be +1 or -1, got {J}", where)
            if (i, j) in seen:
                raise InstanceFormatError(f"duplicate coupling ({i}, {j})", where)
            seen.add((i, j))
            couplings.append((i, j, J))
        fields = data["fields"]
        if not isinstance(fields, list) or len(fields) != n:
            raise InstanceFormatError(f"expected a list of {n} values", "fields")
        for k, b in enumerate(fields):
            if _int(b, f"fields[{k}]") not in (-1, 0, 1):
                raise InstanceFormatError(f"value {b} outside {{-1, 0, 1}}", f"fields[{k}]")
        label = data.get("label")
        if label is not None and not isinstance(label, str):
            raise InstanceFormatError("label must be a string or null", "label")
        inst = IsingInstance(n, tuple(couplings), tuple(fields), label=label)
        if "K" in data:
            return DecisionInstance(inst, _int(data["K"], "K"))
        return inst
    except InstanceFormatError as exc:
        if path is not None and exc.path is None:
            raise InstanceFormatError(exc.message, exc.location, path) from None
        raise


def loads(text: str, path=None) -> IsingInstance | DecisionInstance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(exc.msg, f"line {exc.lineno} column {exc.colno}", path) from None
    return from_dict(data, path)


def save(obj: IsingInstance | DecisionInstance, path) -> None:
    Path(path).write_text(dumps(obj))


def load(path) -> IsingInstance | DecisionInstance:
    return loads(Path(path).read_text(), path=str(path))


def as_instance(obj: IsingInstance | DecisionInstance) -> IsingInstance:
    return obj.instance if isinstance(obj, DecisionInstance) else obj


def iter_configs(n: int) -> Iterable[SpinConfig]:
    for bits in range(1 << n):
        yield SpinConfig(bits, n)
