"""``monomial-nfn`` command line.

Every report is one JSON object on stdout; diagnostics go to stderr.
Exit codes: 0 pass, 1 fail, 2 usage error (bad flags, unreadable input).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import partial
from pathlib import Path

import numpy as np

from . import audits
from .equivariant import (ASYMPTOTIC, Family, UnsupportedSpecError, baseline_hnp_count,
                          baseline_np_count, param_count)
from .completeness import ScaleLimitError, completeness_dimension
from .groups import SubgroupKind, act_weights, sample
from .invariant import normalize_average_pool
from .network import CNN, FCNN, ActivationKind, InvarianceReport
from .nfn import BudgetError, ToyConfig, train_toy
from .preservation import is_preserved
from .weightspace import ParseError, WeightSpaceSpec, deserialize, point_to_dict, random_point, serialize

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

INVARIANCE_BASE_TOL = 1e-10
EQUIVARIANCE_TOL = 1e-9
INVARIANT_TOL = 1e-9
STACK_TOL = 1e-8


class UsageError(Exception):
    pass


@dataclass
class AuditReport:
    command: list
    seed: int
    trials: int
    max_abs_dev: float
    max_rel_dev: float
    tolerance: float
    argmax_trial: int
    elapsed_ms: float

    @property
    def passed(self) -> bool:
        return self.max_rel_dev <= self.tolerance

    def to_dict(self, timing: bool = False) -> dict:
        out = asdict(self)
        out["pass"] = self.passed
        if not timing:
            del out["elapsed_ms"]
        return out


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    if not 0 < lo <= hi:
        raise argparse.ArgumentTypeError(f"scale range needs 0 < lo <= hi, got {text!r}")
    return lo, hi


def _emit(doc: dict, args) -> None:
    text = json.dumps(doc, sort_keys=True)
    print(text)
    if args.output and args.command not in ("gen", "augment"):
        Path(args.output).write_text(text + "\n")


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read_point(path: str):
    try:
        return deserialize(Path(path).read_bytes())
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from exc
    except (ParseError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _spec_from_args(args, prefix="") -> WeightSpaceSpec:
    channels = getattr(args, "channels")
    if channels is None:
        raise UsageError("--channels is required")
    L = len(channels) - 1
    wd = getattr(args, prefix + "weight_dim") or (1,) * L
    bd = getattr(args, prefix + "bias_dim") or (1,) * L
    try:
        return WeightSpaceSpec(channels, wd, bd)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _run_trials(fn, trials: int, jobs: int) -> InvarianceReport:
    """Run ``fn(t)`` for ``t < trials`` and fold the results with max reductions."""
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fn, range(trials), chunksize=max(1, trials // (4 * jobs))))
    else:
        results = [fn(t) for t in range(trials)]
    report = InvarianceReport(0, 0.0, 0.0, 0)
    for r in results:
        report = report.merge(InvarianceReport(1, r.abs_dev, r.rel_dev, r.index))
    return report


def _audit(args, fn, tol: float) -> int:
    start = time.perf_counter()
    summary = _run_trials(fn, args.trials, args.jobs)
    report = AuditReport(args.argv, args.seed, summary.trials, summary.max_abs_dev,
                         summary.max_rel_dev, tol, summary.argmax_trial,
                         round((time.perf_counter() - start) * 1000.0, 3))
    doc = report.to_dict(args.timing)
    if not report.passed:
        doc["witness_trial"] = report.argmax_trial
        _info(f"fail: worst trial {report.argmax_trial} has relative deviation "
              f"{report.max_rel_dev:.3e} > {tol:.3e}")
    _info(f"elapsed {report.elapsed_ms:.0f} ms")
    _emit(doc, args)
    return EXIT_PASS if report.passed else EXIT_FAIL


def invariance_tolerance(scale_range) -> float:
    """``1e-10`` for scale ratios up to 100, growing linearly with the ratio beyond."""
    lo, hi = scale_range
    return INVARIANCE_BASE_TOL * max(1.0, hi / lo / 100.0)


def cmd_audit(args) -> int:
    if args.kind == "invariance":
        sigma = ActivationKind(args.sigma)
        subgroup = SubgroupKind(args.subgroup) if args.subgroup else sigma.symmetry
        if not audits.conforming(sigma, subgroup):
            _info(f"warning: subgroup {subgroup.value} does not preserve {sigma.value}; "
                  "expect large deviations")
        args.scale_range = args.scale_range or (0.1, 10.0)
        tol = args.tol if args.tol is not None else invariance_tolerance(args.scale_range)
        point = kind = None
        if args.input:
            point = _read_point(args.input)
            if args.net == "cnn":
                if args.input_len is None:
                    raise UsageError("--input-len is required for a CNN weight file")
                kind = CNN(args.input_len)
            else:
                kind = FCNN()
        if args.adversarial:
            if point is not None:
                raise UsageError("--adversarial draws its own networks; drop --input")
            fn = partial(audits.negative_control_trial, seed=args.seed, sigma=sigma,
                         subgroup=subgroup, net=args.net, scale_range=args.scale_range)
        else:
            fn = partial(audits.invariance_trial, seed=args.seed, sigma=sigma, subgroup=subgroup,
                         net=args.net, scale_range=args.scale_range, point=point, kind=kind)
        return _audit(args, fn, tol)
    if args.kind == "equivariance":
        fn = partial(audits.equivariance_trial, seed=args.seed, family=args.family,
                     scale_range=args.scale_range or (0.5, 2.0))
        return _audit(args, fn, args.tol if args.tol is not None else EQUIVARIANCE_TOL)
    if args.kind == "inv-layer":
        if args.stack:
            fn = partial(audits.stack_trial, seed=args.seed, family=args.family,
                         scale_range=args.scale_range or (0.5, 2.0))
            return _audit(args, fn, args.tol if args.tol is not None else STACK_TOL)
        fn = partial(audits.invariant_trial, seed=args.seed, family=args.family,
                     scale_range=args.scale_range or (0.1, 10.0))
        return _audit(args, fn, args.tol if args.tol is not None else INVARIANT_TOL)
    return cmd_preserve(args)


def cmd_preserve(args) -> int:
    sigma = ActivationKind(args.sigma)
    if args.matrix:
        text = args.matrix
        if not text.lstrip().startswith("["):
            try:
                text = Path(text).read_text()
            except OSError as exc:
                raise UsageError(f"{args.matrix}: {exc.strerror}") from exc
        try:
            A = np.array(json.loads(text), dtype=np.float64)
        except (ValueError, TypeError) as exc:
            raise UsageError(f"--matrix: {exc}") from exc
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise UsageError(f"--matrix must be square, got shape {A.shape}")
        verdict = is_preserved(A, sigma, seed=args.seed)
        expected = audits.expected_preserved(sigma, A)
        doc = {"command": args.argv, "seed": args.seed, "sigma": sigma.value,
               **verdict.to_dict(), "expected": expected, "pass": verdict.preserved == expected}
        _emit(doc, args)
        return EXIT_PASS if doc["pass"] else EXIT_FAIL
    start = time.perf_counter()
    summary = audits.preservation_sweep(sigma, args.sizes, extra_random=args.trials, seed=args.seed)
    doc = {"command": args.argv, "seed": args.seed, "sigma": sigma.value, "sizes": list(args.sizes),
           **summary.to_dict(), "pass": summary.misclassified == 0}
    if args.timing:
        doc["elapsed_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
    _emit(doc, args)
    return EXIT_PASS if doc["pass"] else EXIT_FAIL


def cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    point = random_point(spec, args.seed, args.scale)
    if args.output:
        Path(args.output).write_bytes(serialize(point) + b"\n")
        _emit({"command": args.argv, "seed": args.seed, "path": args.output,
               "spec": spec.to_dict()}, args)
    else:
        _emit(point_to_dict(point), args)
    return EXIT_PASS


def cmd_augment(args) -> int:
    point = _read_point(args.input)
    subgroup = SubgroupKind(args.subgroup)
    if args.sigma and not audits.conforming(args.sigma, subgroup):
        _info(f"warning: subgroup {subgroup.value} does not preserve {args.sigma}; "
              "augmented networks will compute different functions")
    out_dir = Path(args.output or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    rng = np.random.default_rng(args.seed)
    written = []
    for k in range(args.count):
        g = sample(subgroup, point.spec.channels, rng, args.scale_range, log_uniform=args.log_uniform)
        weights = out_dir / f"{stem}.aug{k}.json"
        group = out_dir / f"{stem}.aug{k}.group.json"
        weights.write_bytes(serialize(act_weights(g, point)) + b"\n")
        group.write_text(json.dumps(g.to_dict(), sort_keys=True) + "\n")
        written.append({"weights": str(weights), "group": str(group), "kappa": g.kappa()})
    _emit({"command": args.argv, "seed": args.seed, "subgroup": subgroup.value,
           "scale_range": list(args.scale_range), "files": written}, args)
    return EXIT_PASS


def _param_row(source, target, family) -> dict:
    exact = param_count(source, target, family)
    hnp = baseline_hnp_count(source, target)
    np_count = baseline_np_count(source, target)
    return {"exact": exact, "baseline_hnp": hnp, "baseline_np": np_count, "ratio": exact / hnp}


def cmd_params(args) -> int:
    family = Family(args.family)
    if args.depths:
        if args.width is None:
            raise UsageError("--depths needs --width")
        rows = []
        for L in args.depths:
            spec = WeightSpaceSpec.fcnn((args.width,) * (L + 1))
            target = spec.with_dims([args.target_dim] * L, [args.target_dim] * L)
            rows.append({"L": L, **_param_row(spec, target, family)})
        deltas = [b["exact"] - a["exact"] for a, b in zip(rows, rows[1:])]
        _emit({"command": args.argv, "family": family.value, "width": args.width,
               "asymptotic": ASYMPTOTIC, "rows": rows, "exact_deltas": deltas}, args)
        return EXIT_PASS
    if args.spec:
        try:
            doc = json.loads(Path(args.spec).read_text())
            source = WeightSpaceSpec.from_dict(doc.get("spec", doc))
        except OSError as exc:
            raise UsageError(f"{args.spec}: {exc.strerror}") from exc
        except (ValueError, ParseError, AttributeError) as exc:
            raise UsageError(f"{args.spec}: {exc}") from exc
    else:
        source = _spec_from_args(args)
    L = source.L
    target = source.with_dims(args.target_weight_dim or source.weight_dims,
                              args.target_bias_dim or source.bias_dims)
    if len(target.weight_dims) != L or len(target.bias_dims) != L:
        raise UsageError(f"target dims need {L} entries")
    _emit({"command": args.argv, "family": family.value, "source": source.to_dict(),
           "target": target.to_dict(), "asymptotic": ASYMPTOTIC,
           **_param_row(source, target, family)}, args)
    return EXIT_PASS


# worked pooling example: layers [n_i, n_{i-1}, w_i]
POOL_FIXTURE = [
    [[[1, 0, 1]], [[2, 3, 1]]],
    [[[2, 1], [2, 3]], [[2, 3], [0, -1]], [[-1, 1], [0, -1]]],
    [[[-1, 1, 0], [0, 0, 1], [-1, 0, 2]]],
]


def cmd_pool(args) -> int:
    if args.input:
        weights = _read_point(args.input).W
    else:
        weights = [np.array(w, dtype=np.float64) for w in POOL_FIXTURE]
    pooled = normalize_average_pool(weights)
    _emit({"command": args.argv, "source": args.input or "fixture",
           "pooled": [p.tolist() for p in pooled], "sums": [float(p.sum()) for p in pooled]}, args)
    return EXIT_PASS


def cmd_completeness(args) -> int:
    source = _spec_from_args(args)
    L = source.L
    target = source.with_dims(args.target_weight_dim or source.weight_dims,
                              args.target_bias_dim or source.bias_dims)
    start = time.perf_counter()
    try:
        exact = param_count(source, target, args.family)
        oracle = completeness_dimension(source, target, args.family, args.samples, args.seed)
    except (UnsupportedSpecError, ScaleLimitError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    doc = {"command": args.argv, "seed": args.seed, "family": Family(args.family).value,
           "source": source.to_dict(), "target": target.to_dict(), "layers": L,
           "param_count": exact, "oracle_dimension": oracle, "pass": exact == oracle}
    if args.timing:
        doc["elapsed_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
    _emit(doc, args)
    return EXIT_PASS if doc["pass"] else EXIT_FAIL


def cmd_train_toy(args) -> int:
    overrides = {}
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"{args.config}: {exc.strerror}") from exc
        except ValueError as exc:
            raise UsageError(f"{args.config}: {exc}") from exc
    for key in ("steps", "lr"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    overrides.setdefault("seed", args.seed)
    try:
        cfg = ToyConfig.from_dict(overrides)
        result = train_toy(cfg, log=_info)
    except (BudgetError, ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    doc = {"command": args.argv, "seed": cfg.seed, **result.to_dict()}
    tol = args.tol if args.tol is not None else 1e-7
    doc["tolerance"] = tol
    doc["pass"] = (result.status == "ok" and result.final_loss <= 0.5 * result.initial_loss
                   and result.augmented_max_rel_dev <= tol)
    if args.save_model:
        Path(args.save_model).write_text(json.dumps(result.stack.to_dict(), sort_keys=True) + "\n")
    _emit(doc, args)
    return EXIT_PASS if doc["pass"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    def global_flags(p, suppress):
        # subcommand copies must not overwrite values given before the subcommand
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        p.add_argument("--seed", type=int, default=d(0))
        p.add_argument("--tol", type=float, default=d(None), help="pass threshold (command-specific default)")
        p.add_argument("--jobs", type=int, default=d(1), help="worker processes for trial loops")
        p.add_argument("--output", default=d(None), help="file (or directory for augment) to write")
        p.add_argument("--timing", action="store_true", default=d(False),
                       help="include elapsed_ms in the report")

    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, suppress=True)
    parser = argparse.ArgumentParser(prog="monomial-nfn",
                                     description="Monomial-symmetric weight-space tools.")
    global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def spec_flags(p, target=False):
        p.add_argument("--channels", type=_ints, help="n_0,...,n_L")
        p.add_argument("--weight-dim", type=_ints)
        p.add_argument("--bias-dim", type=_ints)
        if target:
            p.add_argument("--target-weight-dim", type=_ints)
            p.add_argument("--target-bias-dim", type=_ints)

    p = sub.add_parser("gen", parents=[common], help="write a random weight file")
    spec_flags(p)
    p.add_argument("--scale", type=float, default=1.0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("augment", parents=[common], help="apply random group elements to a weight file")
    p.add_argument("input")
    p.add_argument("--subgroup", choices=[k.value for k in SubgroupKind], required=True)
    p.add_argument("--scale-range", type=_range, default=(0.5, 2.0))
    p.add_argument("--log-uniform", action="store_true")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--sigma", choices=[a.value for a in ActivationKind])
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("audit", parents=[common], help="randomised property audits")
    p.add_argument("kind", choices=["invariance", "equivariance", "preserve", "inv-layer"])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--sigma", "--activation", dest="sigma", choices=[a.value for a in ActivationKind],
                   default="relu")
    p.add_argument("--subgroup", choices=[k.value for k in SubgroupKind])
    p.add_argument("--family", choices=[f.value for f in Family], default="relu")
    p.add_argument("--net", choices=["fcnn", "cnn"], default="fcnn")
    p.add_argument("--input", help="weight file to audit instead of random networks")
    p.add_argument("--input-len", type=int)
    p.add_argument("--scale-range", type=_range, default=None)
    p.add_argument("--adversarial", action="store_true", help="worst-case single-neuron group elements")
    p.add_argument("--stack", action="store_true", help="inv-layer: audit a full equivariant stack")
    p.add_argument("--sizes", type=_ints, default=(2, 3), help="preserve: matrix sizes")
    p.add_argument("--matrix", help="preserve: JSON matrix (inline or a file path) to decide")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("params", parents=[common], help="parameter counts against the baselines")
    spec_flags(p, target=True)
    p.add_argument("--spec", help="JSON spec or weight file")
    p.add_argument("--family", choices=[f.value for f in Family], default="relu")
    p.add_argument("--width", type=int)
    p.add_argument("--depths", type=_ints)
    p.add_argument("--target-dim", type=int, default=1)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("pool", parents=[common], help="normalize-then-average pooling")
    p.add_argument("input", nargs="?")
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("completeness", parents=[common], help="brute-force dimension check")
    spec_flags(p, target=True)
    p.add_argument("--family", choices=[f.value for f in Family], default="relu")
    p.add_argument("--samples", type=int, default=40)
    p.set_defaults(func=cmd_completeness)

    p = sub.add_parser("train-toy", parents=[common], help="finite-difference training of a small stack")
    p.add_argument("--config", help="JSON overrides of the toy config")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--save-model")
    p.set_defaults(func=cmd_train_toy)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    args.argv = argv
    if args.jobs < 1:
        _info("error: --jobs must be at least 1")
        return EXIT_USAGE
    if getattr(args, "trials", 1) < 1:
        _info("error: --trials must be at least 1")
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        _info(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
