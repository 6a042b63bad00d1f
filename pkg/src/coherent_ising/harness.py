"""Parameter sweeps, run logs and decay fits.

A sweep visits every (n, instance, noise model) cell in a fixed order and
appends one JSON object per cell to the run log as soon as the cell is
finished, so a log cut at any line boundary is still a valid prefix.  The
whole pipeline is a pure function of the sweep spec and its master seed;
wall-clock times are only written when ``record_timing`` is switched on.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dynamics import TrialConfig, estimate_success
from .errors import CoherentIsingError
from .instance import (
    DEFAULT_DENSITY,
    MAX_SPINS,
    generate_hard,
    generate_ladder,
    generate_random,
)
from .locking import analyze, fit_line, trial_plan
from .noise import NoiseModel
from .seeding import derive_seed
from .spectrum import enumerate_spectrum

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FAMILIES = ("hard", "random", "ladder")
K_RULES = ("ground-plus-one", "fixed")


@dataclass
class SweepSpec:
    n_values: list[int]
    instances_per_n: int
    noise_grid: list[NoiseModel]
    master_seed: int
    family: str = "hard"
    density: float = DEFAULT_DENSITY
    K_rule: str = "ground-plus-one"
    K_fixed: int | None = None
    rule: str = "paper-window"
    kprime_mode: str = "paper-linear"
    support: str = "expected"
    k_prime: float | None = None
    width_W: float = 0.0
    trials: int = 0
    confidence: float = 0.99
    output: str | None = None
    record_timing: bool = False
    workers: int = 1

    def __post_init__(self):
        if not self.n_values or not self.noise_grid or self.instances_per_n < 1:
            raise ValueError("sweep needs nonempty n_values, noise_grid and instances_per_n >= 1")
        if max(self.n_values) > MAX_SPINS:
            raise ValueError(f"n_values exceed the cap of {MAX_SPINS} spins")
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.K_rule not in K_RULES:
            raise ValueError(f"K_rule must be one of {K_RULES}")
        if self.K_rule == "fixed" and self.K_fixed is None:
            raise ValueError("K_rule 'fixed' needs K_fixed")
        self.noise_grid = [m if isinstance(m, NoiseModel) else NoiseModel.from_dict(m) for m in self.noise_grid]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise_grid"] = [m.to_dict() for m in self.noise_grid]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SweepSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown sweep spec keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SweepSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SweepRecord:
    n: int
    instance_index: int
    noise_index: int
    instance_seed: int
    family: str
    sigma_eps: float
    sigma_kappa: float
    distribution: str
    status: str = "ok"
    reason: str | None = None
    label: str | None = None
    lambda_g: int | None = None
    d_g: int | None = None
    K: int | None = None
    k_prime_linear: float | None = None
    k_prime_quadrature: float | None = None
    k_prime: float | None = None
    size_Y: int | None = None
    size_Z: int | None = None
    p_s: float | None = None
    ratio: float | None = None
    p_hat: float | None = None
    stderr: float | None = None
    trials: int | None = None
    tau: int | None = None
    wall_time: float | None = None
    nulls: dict[str, str] = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.n, self.instance_index, self.noise_index)

    def to_json(self) -> str:
        return json.dumps(asdict(self), allow_nan=False)

    @classmethod
    def from_dict(cls, d: Mapping) -> "SweepRecord":
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported record schema {d.get('schema')!r}")
        return cls(**d)


CSV_COLUMNS = [f.name for f in fields(SweepRecord) if f.name != "nulls"]


def _make_instance(spec: SweepSpec, n: int, seed: int):
    if spec.family == "hard":
        d = generate_hard(n, seed, spec.density)
        return d.instance, d.K
    inst = generate_random(n, seed, spec.density) if spec.family == "random" else generate_ladder(n, seed)
    return inst, None


def _instance_cells(spec: SweepSpec, n: int, idx: int) -> list[SweepRecord]:
    """All noise cells that share one instance."""
    seed = derive_seed(spec.master_seed, n, idx)
    base = [
        SweepRecord(n, idx, k, seed, spec.family, m.sigma_eps, m.sigma_kappa, m.distribution)
        for k, m in enumerate(spec.noise_grid)
    ]
    try:
        inst, K_hard = _make_instance(spec, n, seed)
        spectrum = enumerate_spectrum(inst)
    except CoherentIsingError as exc:
        for rec in base:
            rec.status, rec.reason = "failed", f"{type(exc).__name__}: {exc}"
            _note_nulls(rec)
        return base
    if spec.K_rule == "fixed":
        K = spec.K_fixed
    else:
        K = K_hard if K_hard is not None else spectrum.lambda_g + 1
    for rec, model in zip(base, spec.noise_grid):
        t0 = time.perf_counter()
        try:
            _fill(rec, spec, inst, K, model, spectrum)
        except CoherentIsingError as exc:
            rec.status, rec.reason = "failed", f"{type(exc).__name__}: {exc}"
        if spec.record_timing:
            rec.wall_time = time.perf_counter() - t0
        _note_nulls(rec)
    return base


def _fill(rec, spec, inst, K, model, spectrum):
    rec.label = inst.label
    rec.lambda_g, rec.d_g, rec.K = spectrum.lambda_g, spectrum.d_g, int(K)
    a = analyze(inst, K, model, spec.kprime_mode, spec.support, spec.k_prime, spectrum)
    rec.k_prime_linear, rec.k_prime_quadrature, rec.k_prime = a.k_prime_linear, a.k_prime_quadrature, a.K_prime
    rec.size_Y, rec.size_Z, rec.p_s = a.size_Y, a.size_Z, a.p_s
    rec.ratio = None if a.z_empty or a.no_instance else a.ratio
    rec.tau = trial_plan(a.p_s, spec.confidence).tau
    if spec.trials > 0:
        cfg = TrialConfig(
            K=int(K), model=model, rule=spec.rule, kprime_mode=spec.kprime_mode,
            support=spec.support, k_prime=spec.k_prime, width_W=spec.width_W,
        )
        est = estimate_success(inst, cfg, spec.trials, derive_seed(rec.instance_seed, rec.noise_index))
        rec.p_hat, rec.stderr, rec.trials = est.p_hat, est.stderr, est.trials


_NULL_REASONS = {
    "reason": "ok",
    "tau": "p_s-zero",
    "p_hat": "no-trials",
    "stderr": "no-trials",
    "trials": "no-trials",
    "wall_time": "timing-disabled",
}


def _note_nulls(rec):
    for name in CSV_COLUMNS:
        if getattr(rec, name) is not None:
            continue
        if rec.status != "ok":
            rec.nulls[name] = "cell-failed"
        elif name == "ratio":
            rec.nulls[name] = "z-empty" if rec.size_Z == 0 else "no-solutions"
        else:
            rec.nulls[name] = _NULL_REASONS.get(name, "unset")


def _job(args):
    spec, n, idx = args
    return _instance_cells(spec, n, idx)


def run_sweep(spec: SweepSpec, output=None) -> list[SweepRecord]:
    """Run every cell; append each record to the run log as it completes."""
    out_path = output if output is not None else spec.output
    jobs = [(spec, n, idx) for n in spec.n_values for idx in range(spec.instances_per_n)]
    records: list[SweepRecord] = []
    fh = open(out_path, "w") if out_path else None
    try:
        if spec.workers > 1:
            pool = ProcessPoolExecutor(spec.workers)
            results = pool.map(_job, jobs)  # yields in submission order
        else:
            pool = None
            results = map(_job, jobs)
        for batch in results:
            for rec in batch:
                records.append(rec)
                if fh:
                    fh.write(rec.to_json() + "\n")
                    fh.flush()
            log.info("n=%d instance=%d done", batch[0].n, batch[0].instance_index)
        if pool:
            pool.shutdown()
    finally:
        if fh:
            fh.close()
    return records


def read_jsonl(path) -> list[SweepRecord]:
    """Parse a run log; a torn final line (crash mid-write) is dropped."""
    text = Path(path).read_text()
    lines = text.split("\n")
    records = []
    for k, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError:
            if k == len(lines) - 1:
                log.warning("%s: dropping incomplete final line", path)
                break
            raise ValueError(f"{path}: line {k + 1} is not valid JSON") from None
        records.append(SweepRecord.from_dict(d))
    return records


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def export(records: Iterable[SweepRecord], path, format: str = "jsonl") -> Path:
    """Write records sorted by cell key as jsonl (lossless) or csv (flat)."""
    recs = sorted(records, key=lambda r: r.key)
    path = Path(path)
    if format == "jsonl":
        text = "".join(r.to_json() + "\n" for r in recs)
    elif format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in recs:
            w.writerow([_csv_value(getattr(r, c)) for c in CSV_COLUMNS])
        text = buf.getvalue()
    else:
        raise ValueError(f"format must be 'jsonl' or 'csv', got {format!r}")
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass(frozen=True)
class DecayFit:
    flagged: bool
    reason: str | None
    slope: float | None
    intercept: float | None
    r2: float | None
    medians: dict[int, float]
    counts: dict[int, int]
    ci: tuple[float, float] | None
    tau_table: dict[int, int | None]

    @property
    def strictly_decreasing(self) -> bool:
        vals = [self.medians[n] for n in sorted(self.medians)]
        return all(b < a for a, b in zip(vals, vals[1:]))


def _select(records, filter):
    if filter is None:
        return list(records)
    if callable(filter):
        return [r for r in records if filter(r)]
    return [r for r in records if all(getattr(r, k) == v for k, v in filter.items())]


def fit_decay(
    records: Sequence[SweepRecord],
    filter: Mapping | Callable | None = None,
    column: str = "p_s",
    resamples: int = 1000,
    seed: int = 0,
    level: float = 0.95,
    confidence: float = 0.99,
) -> DecayFit:
    """Least squares of ln(median ``column`` per n) against n, with bootstrap CI.

    The bootstrap resamples instances within each n.
    """
    values: dict[int, list[float]] = {}
    for r in _select(records, filter):
        v = getattr(r, column)
        if r.status == "ok" and v is not None:
            values.setdefault(r.n, []).append(float(v))
    ns = sorted(values)
    medians = {n: float(np.median(values[n])) for n in ns}
    counts = {n: len(values[n]) for n in ns}
    taus = {n: trial_plan(m, confidence).tau for n, m in medians.items()}
    good = [n for n in ns if medians[n] > 0]
    if len(good) < 4:
        return DecayFit(True, f"need >= 4 distinct n with positive median, got {len(good)}",
                        None, None, None, medians, counts, None, taus)
    x = np.array(good, dtype=np.float64)
    line = fit_line(x, [math.log(medians[n]) for n in good])

    rng = np.random.default_rng(seed)
    boot = np.empty((resamples, len(good)))
    for k, n in enumerate(good):
        v = np.asarray(values[n])
        idx = rng.integers(0, len(v), size=(resamples, len(v)))
        boot[:, k] = np.median(v[idx], axis=1)
    ok = (boot > 0).all(axis=1)
    ci = None
    if ok.any():
        y = np.log(boot[ok])
        xc = x - x.mean()
        slopes = (y - y.mean(axis=1, keepdims=True)) @ xc / (xc @ xc)
        alpha = (1 - level) / 2
        ci = (float(np.quantile(slopes, alpha)), float(np.quantile(slopes, 1 - alpha)))
    return DecayFit(False, None, line.slope, line.intercept, line.r2, medians, counts, ci, taus)
