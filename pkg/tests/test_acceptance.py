"""Acceptance criteria, one test each, at the stated tolerances.

Each test records (passed, detail) into ``ACCEPTANCE_RESULTS``; the terminal
summary prints one PASS/FAIL line per criterion.  Assertions are never
relaxed to make a criterion pass.
"""

import math
import statistics
import time
from fractions import Fraction

import numpy as np
import pytest

from coherent_ising import (
    DecisionInstance,
    NoiseModel,
    SpinConfig,
    analyze,
    enumerate_spectrum,
    generate_hard,
    generate_ladder,
    generate_random,
    k_prime,
    spectrum_stats,
    trial_plan,
)
from coherent_ising import instance as im
from coherent_ising.cli import main as cli_main
from coherent_ising.dynamics import TrialConfig, estimate_success, repeated_until_success
from coherent_ising.harness import SweepSpec, export, fit_decay, read_jsonl, run_sweep
from coherent_ising.noise import exact_support, sample_noise_batch
from coherent_ising.seeding import derive_seed

from conftest import ACCEPTANCE_RESULTS

pytestmark = pytest.mark.slow


def record(cid, passed, detail):
    ACCEPTANCE_RESULTS[cid] = (bool(passed), detail)
    print(f"{cid} {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, f"{cid}: {detail}"


def test_C1_gray_equals_naive():
    t0 = time.perf_counter()
    mismatches = 0
    for k in range(20):
        inst = generate_random(5 + k % 10, derive_seed(101, k))
        if enumerate_spectrum(inst, "gray").histogram != enumerate_spectrum(inst, "naive").histogram:
            mismatches += 1
    dt = time.perf_counter() - t0
    record("C1", mismatches == 0 and dt < 10, f"{mismatches}/20 mismatches, {dt:.2f}s (< 10s)")


def test_C2_moment_identities():
    bad = 0
    for k in range(50):
        inst = generate_random(4 + k % 13, derive_seed(202, k))
        h = enumerate_spectrum(inst).histogram
        s1 = sum(e * c for e, c in h.items())
        s2 = Fraction(sum(e * e * c for e, c in h.items()), 1 << inst.n)
        if s1 != 0 or s2 != inst.sum_sq_coefficients:
            bad += 1
    record("C2", bad == 0, f"{bad}/50 instances violate sum E = 0 or mean E^2 = sum J^2 + sum B^2")


def test_C3_normality():
    t0 = time.perf_counter()
    st = spectrum_stats(enumerate_spectrum(generate_random(20, 303)))
    dt = time.perf_counter() - t0
    record("C3", st.ks_distance <= 0.05 and dt < 30, f"KS = {st.ks_distance:.4f} (<= 0.05), {dt:.2f}s")


def test_C4_ground_energy_density():
    t0 = time.perf_counter()
    rand = [enumerate_spectrum(generate_random(18, derive_seed(404, k))).lambda_g / 18 for k in range(100)]
    ladder = [enumerate_spectrum(generate_ladder(16, derive_seed(405, k))).lambda_g / 16 for k in range(100)]
    dt = time.perf_counter() - t0
    mr, ml = statistics.median(rand), statistics.median(ladder)
    ok = -2 < mr < -0.5 and -1.5 < ml < -1 and dt < 300
    record("C4", ok, f"random n=18 median c_g = {mr:.4f} in (-2,-0.5)? {-2 < mr < -0.5}; "
                     f"ladder n=16 median = {ml:.4f} in (-1.5,-1)? {-1.5 < ml < -1}; {dt:.1f}s")


def test_C5_noise_shift_clt():
    inst = generate_random(12, 505)
    model = NoiseModel(0.05, 0.05)
    eps, kappa = sample_noise_batch(inst, model, seed=5050, count=10_000)
    s = np.array(SpinConfig(0b101100111010, 12).spins(), dtype=np.float64)
    ii, jj = inst.coupling_arrays[:2]
    field_idx = [i for i, b in enumerate(inst.fields) if b]
    shifts = eps @ (s[ii] * s[jj]) + kappa @ s[field_idx]
    target = k_prime(12, model, "clt-quadrature", exact_support(inst))
    rel = abs(shifts.std() - target) / target
    violations = 0
    for n in range(3, 31, 3):
        for sigma in np.linspace(0.01, 0.5, 10):
            m = NoiseModel(float(sigma), float(sigma))
            if not k_prime(n, m, "paper-linear") >= k_prime(n, m, "clt-quadrature"):
                violations += 1
    record("C5", rel <= 0.05 and violations == 0,
           f"shift std rel. error {rel:.4f} (<= 0.05); linear >= quadrature violations {violations}/100")


def test_C6_analytic_vs_empirical():
    model = NoiseModel(0.3, 0.3)
    agree = 0
    for k in range(20):
        n = (8, 10, 12, 14)[k % 4]
        d = generate_hard(n, derive_seed(606, k))
        a = analyze(d.instance, d.K, model)
        est = estimate_success(d.instance, TrialConfig(K=d.K, model=model), 100_000, derive_seed(607, k))
        agree += abs(est.p_hat - a.p_s) <= 3 * est.stderr
    record("C6", agree >= 18, f"{agree}/20 within 3 stderr (>= 18) at sigma = 0.3")


def test_C7_exponential_decay(tmp_path):
    t0 = time.perf_counter()
    spec = SweepSpec(
        n_values=[8, 10, 12, 14, 16, 18],
        instances_per_n=20,
        noise_grid=[NoiseModel(0.05, 0.05)],
        master_seed=707,
        output=str(tmp_path / "decay.jsonl"),
    )
    fit = fit_decay(run_sweep(spec))
    dt = time.perf_counter() - t0
    medians = " ".join(f"{n}:{m:.3g}" for n, m in sorted(fit.medians.items()))
    if fit.flagged:
        record("C7", False, f"fit flagged ({fit.reason}); medians {medians}")
    ci_excludes_zero = fit.ci is not None and (fit.ci[1] < 0 or fit.ci[0] > 0)
    ok = fit.slope <= -0.2 and ci_excludes_zero and fit.strictly_decreasing and dt < 600
    record("C7", ok, f"slope {fit.slope:.4f} (<= -0.2), CI {fit.ci}, strictly decreasing "
                     f"{fit.strictly_decreasing}, medians {medians}, {dt:.1f}s")


def test_C8_trial_count_bound():
    model = NoiseModel(0.3, 0.3)
    d = generate_hard(14, 0)
    a = analyze(d.instance, d.K, model)
    assert 0.01 <= a.p_s <= 0.1
    tau = trial_plan(a.p_s, 0.9).tau
    cfg = TrialConfig(K=d.K, model=model)
    found = sum(repeated_until_success(d.instance, cfg, tau, derive_seed(808, r)).found for r in range(200))
    frac = found / 200
    bound = 0.9 - 3 * math.sqrt(0.9 * 0.1 / 200)

    minimal = 0
    grid = [(p, c) for p in (0.01, 0.03, 0.05, 0.1, 0.37) for c in (0.5, 0.9, 0.99, 0.999)]
    for p, c in grid:
        t = trial_plan(p, c).tau
        q = 1 - Fraction(p)
        minimal += (1 - q**t >= Fraction(c)) and (t == 1 or 1 - q ** (t - 1) < Fraction(c))
    record("C8", frac >= bound and minimal == 20,
           f"p_s = {a.p_s:.4f}, tau = {tau}, success {frac:.3f} (>= {bound:.3f}); tau minimal at {minimal}/20")


def test_C9_decide_matches_scan(tmp_path, capsys):
    from conftest import brute_energies

    rng = np.random.default_rng(909)
    wrong = 0
    for k in range(50):
        inst = generate_random(int(rng.integers(2, 13)), derive_seed(909, k))
        lam = min(brute_energies(inst).values())
        K = lam + int(rng.integers(-1, 3))
        path = tmp_path / f"d{k}.json"
        im.save(DecisionInstance(inst, K), path)
        code = cli_main(["decide", str(path)])
        expect = 0 if any(e < K for e in brute_energies(inst).values()) else 1
        wrong += code != expect
    capsys.readouterr()
    record("C9", wrong == 0, f"{wrong}/50 disagreements with exhaustive scan")


def test_C10_reproducibility(tmp_path):
    def spec(name):
        return SweepSpec(
            n_values=[8, 10, 12],
            instances_per_n=3,
            noise_grid=[NoiseModel(0.05, 0.05), NoiseModel(0.3, 0.3, "uniform")],
            master_seed=1010,
            trials=2000,
            output=str(tmp_path / name),
        )

    recs = run_sweep(spec("a.jsonl"))
    run_sweep(spec("b.jsonl"))
    data = (tmp_path / "a.jsonl").read_bytes()
    identical = data == (tmp_path / "b.jsonl").read_bytes()
    export(recs, tmp_path / "c.jsonl")
    lossless = read_jsonl(tmp_path / "a.jsonl") == recs == read_jsonl(tmp_path / "c.jsonl")
    prefixes = True
    for cut in range(0, len(data), max(1, len(data) // 97)):
        (tmp_path / "t.jsonl").write_bytes(data[:cut])
        got = read_jsonl(tmp_path / "t.jsonl")
        prefixes &= got == recs[: len(got)] and len(got) >= data[:cut].count(b"\n")
    record("C10", identical and lossless and prefixes,
           f"byte-identical {identical}; round trip lossless {lossless}; truncations are prefixes {prefixes}")
