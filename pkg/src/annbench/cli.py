"""Command-line entry point.

Exit codes: 0 success, 1 usage problem, 2 runtime failure, 3 validation
failure. All paths live under one workdir root (--workdir or the
ANNBENCH_WORKDIR environment variable): datasets/, results/, reports/.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import shlex
import sys
from pathlib import Path

from .errors import (AnnbenchError, FormatError, ProtocolError, UsageError,
                     ValidationError)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_VALIDATION = 3

KINDS = ("random-uniform", "rand-euclidean")
METRICS = ("euclidean", "angular", "hamming")


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self._fail(message))

    def _fail(self, message) -> int:
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return EXIT_USAGE


def _workdir(args) -> Path:
    return Path(args.workdir)


def dataset_path(workdir, name: str) -> Path:
    return Path(workdir) / "datasets" / f"{name}.hdf5"


def _resolve_dataset(args, name: str) -> Path:
    """Accept either a dataset name in the workdir or a direct file path."""
    direct = Path(name)
    if direct.suffix == ".hdf5" or direct.exists():
        return direct
    path = dataset_path(_workdir(args), name)
    if not path.exists():
        raise UsageError(
            f"no dataset {name!r} in {path.parent} (run `annbench dataset "
            f"gen` or pass a file path)")
    return path


def default_config_text() -> str:
    return (importlib.resources.files("annbench")
            .joinpath("data/default.yaml").read_text())


# ---------------------------------------------------------------- dataset

def cmd_dataset_gen(args) -> int:
    from .dataio import GeneratorSpec, generate, write_dataset

    spec = GeneratorSpec(
        kind=args.kind, n=args.n, m=args.m, d=args.d, k_star=args.k_star,
        seed=args.seed, metric=args.metric,
        planted_range=(args.planted_lo, args.planted_hi))
    ds = generate(spec, name=args.name)
    path = dataset_path(_workdir(args), ds.name)
    if path.exists() and not args.force:
        raise UsageError(f"{path} already exists (use --force to replace)")
    write_dataset(ds, path)
    print(f"wrote {path} (n={args.n}, m={args.m}, d={args.d}, "
          f"k*={args.k_star}, metric={args.metric})")
    return EXIT_OK


def cmd_dataset_validate(args) -> int:
    from .dataio import read_dataset

    path = _resolve_dataset(args, args.dataset)
    ds = read_dataset(path)
    ds.validate()
    print(f"{path}: valid ({ds.metric.value}, n={len(ds.train)}, "
          f"m={len(ds.test)}, d={ds.train.shape[1]}, k*={ds.k_star})")
    return EXIT_OK


def cmd_dataset_import(args) -> int:
    from .dataio import import_dataset, write_dataset

    ds = import_dataset(args.source, name=args.name)
    path = dataset_path(_workdir(args), ds.name)
    if path.exists() and not args.force:
        raise UsageError(f"{path} already exists (use --force to replace)")
    write_dataset(ds, path)
    print(f"imported {args.source} -> {path}")
    return EXIT_OK


# -------------------------------------------------------------------- run

def cmd_run(args) -> int:
    from .config import IN_PROCESS, ExpandContext, expand_all, parse_config
    from .core import point_kind_for
    from .dataio import peek_dataset
    from .errors import ConfigError
    from .runner import RunSpec, resolve_entry_point, run

    dpath = _resolve_dataset(args, args.dataset)
    header = peek_dataset(dpath)
    if args.config:
        document = Path(args.config).read_text()
    else:
        document = default_config_text()
    point_kind = point_kind_for(header.metric)
    defs = parse_config(document, point_kind, header.metric)
    for adef in defs:
        if adef.runner_kind == IN_PROCESS:
            try:
                resolve_entry_point(adef.entry_point)
            except ConfigError as e:
                raise ConfigError(
                    str(e),
                    path=(f"{point_kind.value}.{header.metric.value}"
                          f".{adef.name}")) from e
    if args.algorithm:
        defs = [d for d in defs if d.name in set(args.algorithm)]
        if not defs:
            raise UsageError(
                f"no definition named {', '.join(args.algorithm)} applies "
                f"to this dataset")
    instances = expand_all(defs, ExpandContext(header.metric, header.d))
    if not instances:
        raise UsageError("config expands to zero instances for this dataset")

    worst = EXIT_OK
    for inst in instances:
        spec = RunSpec(dataset=header.name, instance=inst, k=args.k,
                       mode=args.mode, timeout=args.timeout,
                       run_count=args.run_count, seed=args.seed)
        for outcome in run(spec, dpath, _workdir(args), force=args.force):
            print(f"{outcome.status:<10} {inst.label} "
                  f"{json.dumps(outcome.query_params)}")
            if outcome.status in ("failed", "timed-out"):
                worst = EXIT_RUNTIME
    return worst


# ---------------------------------------------------------------- metrics

def cmd_metrics_list(args) -> int:
    from .metrics import REGISTRY

    width = max(len(name) for name in REGISTRY)
    for name, desc in sorted(REGISTRY.items()):
        print(f"{name:<{width}}  {desc.orientation:<13}  {desc.description}")
    return EXIT_OK


# ----------------------------------------------------------------- report

def cmd_report(args) -> int:
    from .dataio import read_dataset
    from .report import render, render_site
    from .results import BATCH, SINGLE, iter_result_paths

    workdir = _workdir(args)
    mode = BATCH if args.batch else SINGLE
    stored = iter_result_paths(workdir, dataset=args.dataset, k=args.k,
                               mode=mode)
    if next(iter(stored), None) is None:
        raise UsageError(
            f"no completed {mode} runs for {args.dataset} at k={args.k}")

    def gt_for(name):
        return read_dataset(dataset_path(workdir, name)).distances

    def warn(message):
        print(f"warning: {message}", file=sys.stderr)

    gt = read_dataset(_resolve_dataset(args, args.dataset)).distances
    artifacts = render(workdir, args.dataset, args.k, gt, x_name=args.x,
                       y_name=args.y, mode=mode, log_y=not args.linear_y,
                       scatter=args.scatter, warn=warn)
    if not artifacts["points"]:
        raise UsageError(
            f"runs exist for {args.dataset} at k={args.k} but none has "
            f"finite {args.x}/{args.y} coordinates")
    for key in ("svg", "scatter_svg", "csv", "tex"):
        if key in artifacts:
            print(f"{key:<12} {artifacts[key]}")
    if not args.no_site:
        site = render_site(workdir, gt_for, x_name=args.x, y_name=args.y,
                           log_y=not args.linear_y, warn=warn)
        print(f"{'site':<12} {site}")
    return EXIT_OK


# --------------------------------------------------------- protocol-check

def cmd_protocol_check(args) -> int:
    from .wireproto import run_conformance

    tokens = args.command
    if tokens and tokens[0] == "--":
        tokens = tokens[1:]
    command = " ".join(shlex.quote(t) for t in tokens)
    if not command:
        raise UsageError("protocol-check needs an adapter command "
                         "(after --)")
    results = run_conformance(command, reply_timeout=args.timeout)
    failed = 0
    for name, passed, detail in results:
        mark = "PASS" if passed else "FAIL"
        suffix = f"  {detail}" if detail else ""
        print(f"{mark} {name}{suffix}")
        failed += 0 if passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


# ------------------------------------------------------------------ wiring

def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--workdir", default=os.environ.get("ANNBENCH_WORKDIR", "."),
        help="root for datasets/, results/ and reports/ "
             "(default: $ANNBENCH_WORKDIR or .)")

    parser = _Parser(prog="annbench", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True,
                                parser_class=_Parser)

    p_ds = sub.add_parser("dataset", help="generate, validate or import "
                          "dataset files", parents=[common])
    ds_sub = p_ds.add_subparsers(dest="action", required=True,
                                 parser_class=_Parser)

    g = ds_sub.add_parser("gen", parents=[common],
                          help="generate a synthetic dataset")
    g.add_argument("--kind", choices=KINDS, required=True)
    g.add_argument("--n", type=int, required=True,
                   help="train points (rand-euclidean: includes planted)")
    g.add_argument("--m", type=int, required=True, help="query points")
    g.add_argument("--d", type=int, required=True, help="dimensions")
    g.add_argument("--k-star", type=int, default=100,
                   help="ground-truth depth (default 100)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--metric", choices=METRICS, default="euclidean")
    g.add_argument("--name", help="override the generated dataset name")
    g.add_argument("--planted-lo", type=float, default=0.1)
    g.add_argument("--planted-hi", type=float, default=0.5)
    g.add_argument("--force", action="store_true")
    g.set_defaults(func=cmd_dataset_gen)

    v = ds_sub.add_parser("validate", parents=[common],
                          help="integrity-check a stored dataset")
    v.add_argument("dataset", help="dataset name or .hdf5 path")
    v.set_defaults(func=cmd_dataset_validate)

    imp = ds_sub.add_parser("import", parents=[common],
                            help="re-validate and store an upstream file")
    imp.add_argument("source", help="path to the upstream .hdf5")
    imp.add_argument("--name")
    imp.add_argument("--force", action="store_true")
    imp.set_defaults(func=cmd_dataset_import)

    r = sub.add_parser("run", parents=[common],
                       help="execute a config against a dataset")
    r.add_argument("--dataset", required=True)
    r.add_argument("--k", type=int, required=True)
    r.add_argument("--config",
                   help="experiment YAML (default: the bundled grids)")
    r.add_argument("--mode", choices=("single-query", "batch"),
                   default="single-query")
    r.add_argument("--timeout", type=float, default=7200.0,
                   help="seconds before the whole run is killed")
    r.add_argument("--run-count", type=int, default=3,
                   help="repetitions per query group; best one is kept")
    r.add_argument("--seed", type=int, default=None,
                   help="seed the worker's global RNGs before building")
    r.add_argument("--algorithm", action="append",
                   help="only run this definition (repeatable)")
    r.add_argument("--force", action="store_true",
                   help="rerun groups whose result files already exist")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("metrics", parents=[common],
                       help="list the metric registry")
    m_sub = m.add_subparsers(dest="action", required=True,
                             parser_class=_Parser)
    ml = m_sub.add_parser("list", parents=[common])
    ml.set_defaults(func=cmd_metrics_list)

    rep = sub.add_parser("report", parents=[common],
                         help="plots and exports from stored results")
    rep.add_argument("--dataset", required=True)
    rep.add_argument("--k", type=int, required=True)
    rep.add_argument("-x", default="recall", help="x metric (default recall)")
    rep.add_argument("-y", default="qps", help="y metric (default qps)")
    rep.add_argument("--batch", action="store_true",
                     help="report the batch-mode section instead")
    rep.add_argument("--scatter", action="store_true",
                     help="also emit a scatter of every run")
    rep.add_argument("--linear-y", action="store_true",
                     help="linear y axis (default: log)")
    rep.add_argument("--no-site", action="store_true",
                     help="skip rebuilding reports/index.html")
    rep.set_defaults(func=cmd_report)

    pc = sub.add_parser("protocol-check", parents=[common],
                        help="run the adapter conformance suite")
    pc.add_argument("--timeout", type=float, default=10.0,
                    help="per-reply deadline in seconds")
    pc.add_argument("command", nargs=argparse.REMAINDER,
                    help="adapter command line (prefix with --)")
    pc.set_defaults(func=cmd_protocol_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FormatError) as e:
        print(f"{type(e).__module__}.{type(e).__name__}: {e}",
              file=sys.stderr)
        return EXIT_VALIDATION
    except UsageError as e:
        print(f"{type(e).__module__}.{type(e).__name__}: {e}",
              file=sys.stderr)
        return EXIT_USAGE
    except (ProtocolError, AnnbenchError) as e:
        print(f"{type(e).__module__}.{type(e).__name__}: {e}",
              file=sys.stderr)
        return EXIT_RUNTIME
    except FileNotFoundError as e:
        print(f"annbench: missing file: {e}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("annbench: interrupted", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
