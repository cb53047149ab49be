"""Command-line entry point: ``varinit <command> ...``.

Exit codes are shared by every command: 0 success or condition satisfied,
1 domain-negative result (condition violated, gradient mismatch, divergence),
2 usage or parse error.
"""

import argparse
import json
import logging
import re
import sys
from pathlib import Path


from . import bench
from .cells import ACTIVATIONS, KINDS, PEEPHOLE, LstmWeights
from .core import Rng
from .data import SYNTH_KINDS, synth, write_panel, write_ucr
from .errors import ConditionViolationError, InvalidArgumentError, ParseError
from .probe import MIN_TRIALS, probe_single_step, probe_stationarity
from .training import backward, gradcheck
from .variance import VarianceConfig, table1_config, validate

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2
GRADCHECK_TOL = 1e-5


class UsageError(Exception):
    pass


def load_config(ref, n=None):
    """A catalog name (``proposed-1``..``proposed-4``) or a JSON config file.

    ``n`` re-targets the config to that input size; W/U variances scale as 1/N.
    """
    match = re.fullmatch(r"proposed-(\d)", ref)
    if match:
        return table1_config(int(match.group(1)), n or 1)
    path = Path(ref)
    if not path.exists():
        raise UsageError(f"config file {ref} not found")
    cfg = VarianceConfig.from_json(path.read_text())
    if n is not None and n != cfg.n:
        cfg = cfg.with_n(n)
    return cfg


def _fmt(v):
    return "undefined" if v is None else f"{v:.12g}"


def cmd_init_check(args):
    cfg = load_config(args.config, args.n)
    try:
        report = validate(cfg, args.tol)
    except ZeroDivisionError as exc:
        print(f"condition undefined: {exc}")
        return EXIT_NEGATIVE
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        d = report.details
        print(f"condition:          {report.condition} (N={cfg.n})")
        print(f"range clause:       0 < {d['range_value']:.12g} < {d['range_bound']:.12g}"
              f"  [{'ok' if report.range_ok else 'VIOLATED'}]")
        print(f"equality lhs:       {d['lhs']:.12g}")
        print(f"equality rhs:       {d['rhs']:.12g}")
        print(f"equality residual:  {report.equality_residual:.3e} (tol {report.tolerance:.1e})"
              f"  [{'ok' if 'equality' not in report.violations else 'VIOLATED'}]")
        if report.delta2 is not None:
            print(f"delta2 (diagnostic): {report.delta2:.12g}")
        print("satisfied" if report.satisfied else f"violated: {', '.join(report.violations)}")
    return EXIT_OK if report.satisfied else EXIT_NEGATIVE


def _probe_table(rep):
    rows = [
        ("mode", rep.mode),
        ("condition", f"{rep.condition} ({'satisfied' if rep.condition_satisfied else 'violated'})"),
        ("trials", str(rep.trials)),
        ("N", str(rep.n)),
        ("coupling", rep.coupling),
        ("linearized", str(rep.linearized)),
        ("est Var(h)", _fmt(rep.est_var_h)),
        ("|Var(h) - 1|", _fmt(rep.rel_err_h)),
        ("se Var(h)", _fmt(rep.se_var_h)),
        ("est Var(c)", _fmt(rep.est_var_c)),
        ("predicted Var(c)", _fmt(rep.predicted_var_c)),
        ("rel err Var(c)", _fmt(rep.rel_err_c)),
    ]
    if rep.trajectory is not None:
        rows.append(("max drift Var(c)", _fmt(rep.max_drift)))
        rows.append(("diverged", str(rep.diverged)))
    return "\n".join(f"{k:<18} {v}" for k, v in rows)


def cmd_var_probe(args):
    if args.trials < MIN_TRIALS:
        raise UsageError(f"--trials must be >= {MIN_TRIALS}")
    cfg = load_config(args.config, args.n)
    rep = probe_single_step(cfg, cfg.n, args.trials, Rng(args.seed), linearized=not args.nonlinear,
                            coupling=args.coupling)
    out = {"single_step": rep.to_dict()}
    print(_probe_table(rep))
    if args.steps:
        stat = probe_stationarity(cfg, cfg.n, args.steps, args.stationarity_trials or args.trials,
                                  Rng(args.seed + 1), linearized=not args.nonlinear)
        out["stationarity"] = stat.to_dict()
        print()
        print(_probe_table(stat))
        print("Var(c) trajectory:")
        for t, v in enumerate(stat.trajectory, start=1):
            print(f"  step {t:>4d}  {v:.6g}")
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def random_instance(seed, kind, m, t, scale=0.5):
    """Random weights (entries N(0, scale^2)) and a next-step regression pair."""
    rng = Rng(seed)
    w = LstmWeights.zeros(m, m, kind)
    for p in w.params().values():
        p[...] = scale * rng.standard_normal(p.shape)
    seq = rng.standard_normal((t + 1, m))
    return w, seq[:-1], seq[1:]


def cmd_gradcheck(args):
    if args.m < 1 or args.t < 1:
        raise UsageError("--m and --t must be >= 1")
    w, xs, ys = random_instance(args.seed, args.kind, args.m, args.t)
    analytic = None
    if args.corrupt:
        analytic = backward(w, xs, ys, args.act, args.kind).grads
        analytic["wf"][0, 0] += 1e-3 * (1.0 + abs(analytic["wf"][0, 0]))
    res = gradcheck(w, xs, ys, args.act, args.kind, eps=args.eps, analytic=analytic)
    ok = res.max_rel_err < GRADCHECK_TOL
    print(f"max relative error {res.max_rel_err:.3e} at {res.worst_param}{list(res.worst_index)} "
          f"(analytic {res.analytic:.6e}, numeric {res.numeric:.6e}) -> {'ok' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_bench(args):
    spec = bench.ExperimentSpec.load(args.experiment)
    rows, _ = bench.run_experiment(spec, output_dir=args.output_dir)
    print(bench.format_summary(rows))
    return EXIT_NEGATIVE if bench.any_diverged(rows) else EXIT_OK


def cmd_synth(args):
    batch = synth(args.kind, args.count, args.T, args.n_features, args.noise_var, args.seed)
    fmt = args.format or ("ucr" if args.n_features == 1 else "panel")
    if fmt == "ucr":
        write_ucr(batch, args.out, args.delimiter)
    else:
        write_panel(batch, args.out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="varinit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init-check", help="check a variance config against its condition")
    s.add_argument("--config", required=True, help="JSON config file or proposed-1..proposed-4")
    s.add_argument("--n", type=int, default=None, help="input size N (re-targets the config)")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--json", action="store_true", help="print the report as JSON")
    s.set_defaults(func=cmd_init_check)

    s = sub.add_parser("var-probe", help="Monte-Carlo variance probe at initialization")
    s.add_argument("--config", required=True)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--steps", type=int, default=0, help="also run a stationarity probe of this many steps")
    s.add_argument("--stationarity-trials", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--nonlinear", action="store_true", help="true sigmoid/tanh instead of linearized")
    s.add_argument("--coupling", choices=("shared", "independent"), default="shared")
    s.add_argument("--json-out", default=None)
    s.set_defaults(func=cmd_var_probe)

    s = sub.add_parser("gradcheck", help="finite-difference check of the BPTT gradients")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--kind", choices=KINDS, default=PEEPHOLE)
    s.add_argument("--act", choices=sorted(ACTIVATIONS), default="regression")
    s.add_argument("--m", type=int, default=3)
    s.add_argument("--t", type=int, default=5)
    s.add_argument("--eps", type=float, default=1e-6)
    s.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("bench", help="run an experiment grid from a JSON file")
    s.add_argument("experiment")
    s.add_argument("--output-dir", default=None)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("synth", help="write a synthetic dataset")
    s.add_argument("--kind", choices=SYNTH_KINDS, required=True)
    s.add_argument("--count", type=int, default=200)
    s.add_argument("--T", type=int, default=50)
    s.add_argument("--n-features", type=int, default=1)
    s.add_argument("--noise-var", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--format", choices=("ucr", "panel"), default=None)
    s.add_argument("--delimiter", choices=("comma", "tab"), default="comma")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidArgumentError, ParseError, ConditionViolationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
