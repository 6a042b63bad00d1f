import json
import math

import pytest

from coherent_ising import NoiseModel, analyze, generate_hard
from coherent_ising.harness import (
    CSV_COLUMNS,
    SweepRecord,
    SweepSpec,
    export,
    fit_decay,
    read_csv,
    read_jsonl,
    run_sweep,
)
from coherent_ising.seeding import derive_seed


def small_spec(tmp_path, **kw):
    base = dict(
        n_values=[6, 8],
        instances_per_n=2,
        noise_grid=[NoiseModel(0.0, 0.0), NoiseModel(0.3, 0.3)],
        master_seed=11,
        trials=200,
        output=str(tmp_path / "run.jsonl"),
    )
    base.update(kw)
    return SweepSpec(**base)


def test_noiseless_cells_have_unit_p_s(tmp_path):
    recs = run_sweep(small_spec(tmp_path))
    assert len(recs) == 8
    for r in recs:
        assert r.status == "ok"
        if r.sigma_eps == 0:
            assert r.p_s == 1.0 and r.tau == 1 and r.p_hat == 1.0
            assert r.ratio is None and r.nulls["ratio"] == "z-empty"
        assert r.nulls["wall_time"] == "timing-disabled"


def test_rerun_is_byte_identical(tmp_path):
    a = small_spec(tmp_path, output=str(tmp_path / "a.jsonl"))
    b = small_spec(tmp_path, output=str(tmp_path / "b.jsonl"))
    run_sweep(a)
    run_sweep(b)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_parallel_matches_serial(tmp_path):
    run_sweep(small_spec(tmp_path, output=str(tmp_path / "s.jsonl")))
    run_sweep(small_spec(tmp_path, output=str(tmp_path / "p.jsonl"), workers=2))
    assert (tmp_path / "s.jsonl").read_bytes() == (tmp_path / "p.jsonl").read_bytes()


def test_record_replays_from_seed(tmp_path):
    recs = run_sweep(small_spec(tmp_path))
    r = next(r for r in recs if r.n == 8 and r.instance_index == 1 and r.noise_index == 1)
    assert r.instance_seed == derive_seed(11, 8, 1)
    d = generate_hard(8, r.instance_seed)
    a = analyze(d.instance, d.K, NoiseModel(0.3, 0.3))
    assert (r.K, r.size_Y, r.size_Z, r.p_s) == (d.K, a.size_Y, a.size_Z, a.p_s)
    assert r.label == d.instance.label


def test_jsonl_round_trip(tmp_path):
    recs = run_sweep(small_spec(tmp_path))
    assert read_jsonl(tmp_path / "run.jsonl") == recs
    export(recs, tmp_path / "again.jsonl")
    assert read_jsonl(tmp_path / "again.jsonl") == recs


def test_csv_export(tmp_path):
    recs = run_sweep(small_spec(tmp_path))
    export(reversed(recs), tmp_path / "run.csv", "csv")
    rows = read_csv(tmp_path / "run.csv")
    assert list(rows[0]) == CSV_COLUMNS
    assert [(int(r["n"]), int(r["instance_index"]), int(r["noise_index"])) for r in rows] == [
        r.key for r in recs
    ]
    for row, rec in zip(rows, recs):
        assert (float(row["p_s"]) if row["p_s"] else None) == rec.p_s
        assert row["wall_time"] == ""


@pytest.mark.parametrize("cut", [0, 1, 57, 400, -1])
def test_truncated_log_is_prefix(tmp_path, cut):
    recs = run_sweep(small_spec(tmp_path))
    data = (tmp_path / "run.jsonl").read_bytes()
    cut = len(data) - 1 if cut == -1 else min(cut, len(data))
    (tmp_path / "cut.jsonl").write_bytes(data[:cut])
    got = read_jsonl(tmp_path / "cut.jsonl")
    assert got == recs[: len(got)]
    complete = data[:cut].count(b"\n")
    assert len(got) in (complete, complete + 1)


def test_corrupt_middle_line_rejected(tmp_path):
    run_sweep(small_spec(tmp_path))
    lines = (tmp_path / "run.jsonl").read_text().splitlines()
    lines[2] = lines[2][:10]
    (tmp_path / "bad.jsonl").write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="line 3"):
        read_jsonl(tmp_path / "bad.jsonl")


def test_failed_cells_are_recorded(tmp_path):
    # Ladders need even n, so the n=5 cells fail.
    spec = small_spec(tmp_path, family="ladder", n_values=[5, 6], instances_per_n=1)
    recs = run_sweep(spec)
    bad = [r for r in recs if r.n == 5]
    assert bad and all(r.status == "failed" and "InstanceError" in r.reason for r in bad)
    assert all(r.nulls["p_s"] == "cell-failed" for r in bad)
    assert all(r.status == "ok" for r in recs if r.n == 6)


def test_timing_opt_in(tmp_path):
    recs = run_sweep(small_spec(tmp_path, record_timing=True, trials=0))
    assert all(r.wall_time is not None and r.wall_time >= 0 for r in recs)
    assert all(r.nulls.get("p_hat") == "no-trials" for r in recs)


def test_spec_round_trip(tmp_path):
    spec = small_spec(tmp_path)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_dict()))
    assert SweepSpec.load(path) == spec
    with pytest.raises(ValueError):
        SweepSpec.from_dict({**spec.to_dict(), "bogus": 1})


def _synthetic(ns, fn, per_n=5):
    return [
        SweepRecord(n, i, 0, 0, "hard", 0.1, 0.1, "gaussian", p_s=fn(n, i))
        for n in ns
        for i in range(per_n)
    ]


class TestFitDecay:
    def test_exact_exponential(self):
        fit = fit_decay(_synthetic(range(6, 14, 2), lambda n, i: 2.0**-n))
        assert fit.slope == pytest.approx(-math.log(2), abs=1e-12)
        assert fit.ci == pytest.approx((-math.log(2), -math.log(2)), abs=1e-12)
        assert fit.strictly_decreasing and fit.r2 == pytest.approx(1.0)

    def test_ci_covers_noisy_slope(self):
        fit = fit_decay(_synthetic(range(6, 20, 2), lambda n, i: math.exp(-0.3 * n) * (1 + 0.1 * (i - 2))))
        lo, hi = fit.ci
        assert lo <= -0.3 <= hi and hi < 0

    def test_flags_too_few_points(self):
        fit = fit_decay(_synthetic((6, 8, 10), lambda n, i: 0.5))
        assert fit.flagged and fit.slope is None

    def test_filter(self):
        recs = _synthetic(range(6, 14, 2), lambda n, i: 2.0**-n)
        recs[0].sigma_eps = 0.2
        fit = fit_decay(recs, {"sigma_eps": 0.1})
        assert fit.counts[6] == 4
