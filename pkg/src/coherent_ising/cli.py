"""Command-line entry point: ``cohising <subcommand> ...``.

Machine-readable results go to stdout (or ``-o``); logs go to stderr.
``decide`` exits 0 for YES, 1 for NO and 2 on errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import instance as inst_mod
from .bnb import branch_and_bound_ground
from .dynamics import RULES, TrialConfig, estimate_success
from .errors import CoherentIsingError
from .harness import SweepSpec, export, fit_decay, read_jsonl, run_sweep
from .instance import DecisionInstance, SpinConfig, as_instance, energy
from .locking import analyze, trial_plan
from .noise import DISTRIBUTIONS, KPRIME_MODES, NoiseModel
from .seeding import fresh_seed
from .spectrum import (
    decide,
    enumerate_spectrum,
    ground_states,
    spectrum_to_csv,
    spectrum_to_json,
)

log = logging.getLogger("coherent_ising")

EXIT_YES, EXIT_NO, EXIT_ERROR = 0, 1, 2


def _default_threads() -> int:
    return int(os.environ.get("COHISING_THREADS", os.cpu_count() or 1))


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = fresh_seed()
        log.warning("no --seed given; using %d", args.seed)
    return args.seed


def _load(path):
    return inst_mod.load(path)


def _config_json(config: SpinConfig) -> dict:
    return {"bits": config.bits, "bitstring": config.bitstring(), "spins": list(config.spins())}


def _noise(args) -> NoiseModel:
    return NoiseModel(args.sigma_eps, args.sigma_kappa, args.distribution)


def _resolve_K(args, obj) -> int:
    if args.K is not None:
        return args.K
    if isinstance(obj, DecisionInstance):
        return obj.K
    K = enumerate_spectrum(obj, workers=args.threads).lambda_g + 1
    log.info("no --K given and none in file; using lambda_g + 1 = %d", K)
    return K


# --- subcommands -------------------------------------------------------------


def cmd_gen(args) -> int:
    seed = _seed(args)
    if args.family == "random":
        obj = inst_mod.generate_random(args.n, seed, args.density)
    elif args.family == "ladder":
        obj = inst_mod.generate_ladder(args.n, seed)
    else:
        obj = inst_mod.generate_hard(args.n, seed, args.density)
    _emit(inst_mod.dumps(obj), args.output)
    if isinstance(obj, DecisionInstance):
        spec = enumerate_spectrum(obj.instance, workers=args.threads)
        summary = {"lambda_g": spec.lambda_g, "d_g": spec.d_g, "K": obj.K, "seed": seed}
        print(json.dumps(summary), file=sys.stdout if args.output else sys.stderr)
    return 0


def cmd_solve(args) -> int:
    inst = as_instance(_load(args.instance))
    if args.method == "bnb":
        res = branch_and_bound_ground(inst, time_budget=args.time_budget)
        out = {"lambda_g": res.lambda_g, "witness": _config_json(res.witness),
               "complete": res.complete, "nodes": res.nodes}
    else:
        spec = enumerate_spectrum(inst, workers=args.threads)
        witness = ground_states(inst, limit=1)[0]
        out = {"lambda_g": spec.lambda_g, "d_g": spec.d_g, "witness": _config_json(witness)}
    print(json.dumps(out))
    return 0


def cmd_decide(args) -> int:
    obj = _load(args.instance)
    if args.K is None and not isinstance(obj, DecisionInstance):
        raise CoherentIsingError("no K: pass --K or use a file that carries one")
    K = args.K if args.K is not None else obj.K
    res = decide(DecisionInstance(as_instance(obj), K))
    if res.yes:
        w = res.witness
        print(f"YES witness={w.bitstring()} energy={energy(as_instance(obj), w)}")
        return EXIT_YES
    print(f"NO lambda_g={res.lambda_g} K={K}")
    return EXIT_NO


def cmd_spectrum(args) -> int:
    inst = as_instance(_load(args.instance))
    spec = enumerate_spectrum(inst, workers=args.threads)
    text = spectrum_to_csv(spec) if args.format == "csv" else spectrum_to_json(spec)
    _emit(text, args.output)
    return 0


def cmd_locking(args) -> int:
    obj = _load(args.instance)
    inst = as_instance(obj)
    K = _resolve_K(args, obj)
    a = analyze(inst, K, _noise(args), args.kprime_mode, args.support, args.k_prime)
    doc = a.to_dict()
    doc["noise"] = _noise(args).to_dict()
    doc["tau"] = trial_plan(a.p_s, args.confidence).tau
    doc["confidence"] = args.confidence
    _emit(json.dumps(doc) + "\n", args.output)
    return 0


def cmd_simulate(args) -> int:
    obj = _load(args.instance)
    inst = as_instance(obj)
    K = _resolve_K(args, obj)
    seed = _seed(args)
    cfg = TrialConfig(
        K=K, model=_noise(args), rule=args.rule, kprime_mode=args.kprime_mode,
        support=args.support, k_prime=args.k_prime, width_W=args.width, seed=seed,
    )
    est = estimate_success(inst, cfg, args.trials, seed)
    doc = {"p_hat": est.p_hat, "stderr": est.stderr, "successes": est.successes,
           "trials": est.trials, "seed": seed, "rule": args.rule, "K": K}
    _emit(json.dumps(doc) + "\n", args.output)
    return 0


def _parse_grid(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args) -> int:
    if args.spec:
        spec = SweepSpec.load(args.spec)
        if args.output:
            spec.output = args.output
    else:
        seed = _seed(args)
        sig_eps = _parse_grid(args.sigma_eps)
        sig_kap = _parse_grid(args.sigma_kappa) if args.sigma_kappa else sig_eps
        if len(sig_kap) != len(sig_eps):
            raise CoherentIsingError("--sigma-eps and --sigma-kappa grids must have equal length")
        spec = SweepSpec(
            n_values=[int(v) for v in args.n_values.split(",")],
            instances_per_n=args.instances,
            noise_grid=[NoiseModel(e, k, args.distribution) for e, k in zip(sig_eps, sig_kap)],
            master_seed=seed,
            family=args.family,
            rule=args.rule,
            kprime_mode=args.kprime_mode,
            support=args.support,
            trials=args.trials,
            output=args.output,
            workers=args.threads,
        )
    if not spec.output:
        raise CoherentIsingError("sweep needs an output path (-o or 'output' in the spec file)")
    records = run_sweep(spec)
    failed = [r for r in records if r.status != "ok"]
    log.info("%d cells, %d failed; log at %s", len(records), len(failed), spec.output)
    if args.csv:
        export(records, args.csv, "csv")
    if failed:
        for r in failed:
            log.error("cell %s failed: %s", r.key, r.reason)
        return 1 if args.strict else 0
    return 0


def cmd_fit(args) -> int:
    records = read_jsonl(args.log)
    flt = {}
    if args.sigma_eps is not None:
        flt["sigma_eps"] = args.sigma_eps
    if args.sigma_kappa is not None:
        flt["sigma_kappa"] = args.sigma_kappa
    fit = fit_decay(records, flt or None, column=args.column, resamples=args.resamples,
                    seed=args.seed if args.seed is not None else 0, confidence=args.confidence)
    if fit.flagged:
        print(f"fit flagged: {fit.reason}")
        return 1 if args.strict else 0
    lo, hi = fit.ci if fit.ci else (float("nan"), float("nan"))
    print(f"slope {fit.slope:.6f}  95% CI [{lo:.6f}, {hi:.6f}]  r2 {fit.r2:.6f}")
    print(f"{'n':>4} {'count':>6} {'median':>12} {'tau':>12}")
    for n in sorted(fit.medians):
        tau = fit.tau_table[n]
        print(f"{n:>4} {fit.counts[n]:>6} {fit.medians[n]:>12.6g} {tau if tau is not None else 'inf':>12}")
    return 0


# --- parser ------------------------------------------------------------------


def _add_noise(p):
    p.add_argument("--sigma-eps", type=float, default=0.0)
    p.add_argument("--sigma-kappa", type=float, default=0.0)
    p.add_argument("--distribution", choices=DISTRIBUTIONS, default="gaussian")
    p.add_argument("--kprime-mode", choices=KPRIME_MODES, default="paper-linear")
    p.add_argument("--support", choices=("expected", "exact"), default="expected")
    p.add_argument("--k-prime", type=float, default=None, help="force the window width K'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohising", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--threads", type=int, default=_default_threads())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--family", choices=("random", "ladder", "hard"), default="random")
    p.add_argument("--density", type=float, default=inst_mod.DEFAULT_DENSITY)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="ground energy and one ground state")
    p.add_argument("instance")
    p.add_argument("--method", choices=("enum", "bnb"), default="enum")
    p.add_argument("--time-budget", type=float, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("decide", help="is there an eigenvalue below K? (exit 0 YES, 1 NO)")
    p.add_argument("instance")
    p.add_argument("--K", type=int)
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("spectrum", help="exact eigenvalue histogram")
    p.add_argument("instance")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("locking", help="locking-window analysis of one instance")
    p.add_argument("instance")
    p.add_argument("--K", type=int)
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("-o", "--output")
    _add_noise(p)
    p.set_defaults(func=cmd_locking)

    p = sub.add_parser("simulate", help="Monte Carlo success-probability estimate")
    p.add_argument("instance")
    p.add_argument("--K", type=int)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--rule", choices=RULES, default="paper-window")
    p.add_argument("--width", type=float, default=0.0, help="band W for perturbed-threshold")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output")
    _add_noise(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a parameter sweep into a JSONL run log")
    p.add_argument("--spec", help="sweep spec JSON file")
    p.add_argument("--n-values", default="8,10,12")
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--family", choices=("hard", "random", "ladder"), default="hard")
    p.add_argument("--sigma-eps", default="0.05", help="comma-separated grid")
    p.add_argument("--sigma-kappa", default=None, help="comma-separated grid (default: same as eps)")
    p.add_argument("--distribution", choices=DISTRIBUTIONS, default="gaussian")
    p.add_argument("--kprime-mode", choices=KPRIME_MODES, default="paper-linear")
    p.add_argument("--support", choices=("expected", "exact"), default="expected")
    p.add_argument("--rule", choices=RULES, default="paper-window")
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output")
    p.add_argument("--csv", help="also write a CSV projection here")
    p.add_argument("--strict", action="store_true", help="exit 1 if any cell failed")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit ln(median p_s) against n from a run log")
    p.add_argument("log")
    p.add_argument("--column", choices=("p_s", "p_hat"), default="p_s")
    p.add_argument("--sigma-eps", type=float)
    p.add_argument("--sigma-kappa", type=float)
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--seed", type=int)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CoherentIsingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
