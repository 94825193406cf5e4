"""Command line entry point: ``gdci run|verify|certify-operator|kappa``.

Exit codes: 0 success, 1 a check failed, 2 config or data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .data import LibsvmFormatError, load_libsvm
from .experiment import (
    ConfigError,
    ExperimentSpec,
    final_plateau,
    load_yaml,
    run_certification,
    run_experiment,
    run_verification,
)
from .objectives import ConvergenceError, LogisticObjective
from .theory import corollary_regime

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2


def _cmd_run(args) -> int:
    spec = ExperimentSpec.from_dict(load_yaml(args.spec))
    if args.workers:
        spec.workers = args.workers
    report = run_experiment(spec, output_dir=args.output_dir)
    print(f"L={report.L:.6g} mu={report.mu:.6g} kappa={report.kappa:.6g} gamma={report.gamma:.6g}")
    for c in report.curves:
        verdict = "admissible" if c.admissible else "inadmissible"
        print(f"  {c.curve.curve_id:>14}  omega={c.curve.operator.omega:.4g}  {verdict:>12}  "
              f"plateau={final_plateau(c):.4g}  diverged={c.diverged}/{len(c.trajectories)}")
    print(f"wrote {report.output_dir}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    cfg = load_yaml(args.spec)
    neg = True if args.negative_control else None
    report = run_verification(cfg, negative_control=neg, output_dir=args.output_dir)
    for r in report["records"]:
        print(f"{r['status']:>7}  {r['instance']:<20} {r['name']:<36} margin={r['worst_margin']:.4g}")
    print("PASS" if report["passed"] else "FAIL: " + ", ".join(report["failures"]))
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


def _cmd_certify(args) -> int:
    report = run_certification(load_yaml(args.spec), output_dir=args.output_dir)
    for r in report["operators"]:
        print(f"{'pass' if r['pass'] else 'FAIL':>5}  {json.dumps(r['operator'])}  "
              f"ratio={r['variance_ratio']:.6g}  omega={r['declared_omega']:.6g}")
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


def _cmd_kappa(args) -> int:
    ds = load_libsvm(args.dataset, declared_d=args.declared_d)
    obj = LogisticObjective.from_dataset(ds, args.mu)
    reg = corollary_regime(obj.smoothness, obj.strong_convexity)
    print(json.dumps({
        "dataset": str(args.dataset), "sha256": ds.sha256, "n": ds.n, "d": ds.d,
        "L": obj.smoothness, "mu": obj.strong_convexity, "kappa": obj.condition_number,
        "omega_max_claimed": reg.omega_max_claimed, "omega_max_derived": reg.omega_max_derived,
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gdci", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a seeded GDCI sweep")
    p.add_argument("spec")
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("verify", help="run the lemma checks")
    p.add_argument("spec")
    p.add_argument("--output-dir")
    p.add_argument("--negative-control", action="store_true", help="scale every right-hand side by 0.1")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("certify-operator", help="certify unbiasedness and variance of operators")
    p.add_argument("spec")
    p.add_argument("--output-dir")
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("kappa", help="estimate L and kappa of a LIBSVM dataset")
    p.add_argument("dataset")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--declared-d", type=int)
    p.set_defaults(func=_cmd_kappa)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, LibsvmFormatError, FileNotFoundError, ConvergenceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
