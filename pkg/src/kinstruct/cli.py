"""Command-line front end: simulate, identify, montecarlo, gen-trajectory.

Exit codes: 0 on success, 1 on file or parse errors, 2 when identification
finds the structure ambiguous, 64 for bad command lines.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io as kio
from ._version import __version__
from .errors import (
    InvalidRangeError,
    InvariantViolationError,
    ParseError,
    SchemaVersionError,
    StructureAmbiguousError,
)
from .feasibility import Tolerances
from .identify import assemble_chain, base_marker, classify_all
from .montecarlo import McConfig, run_montecarlo
from .report import format_text_table, render_figures, write_csv
from .simulate import gen_fully_informative, gen_sinusoidal, observe, random_chain

EX_OK = 0
EX_IOERR = 1
EX_AMBIGUOUS = 2
EX_USAGE = 64

_FILE_ERRORS = (OSError, ParseError, SchemaVersionError, InvariantViolationError)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; the CLI contract wants 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="kinstruct",
        description="Identify the kinematic structure of a serial chain "
        "from marker pose time series.",
    )
    parser.add_argument("--version", action="version", version=f"kinstruct {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    sim = commands.add_parser(
        "simulate", help="render a dataset from a chain and a trajectory"
    )
    source = sim.add_mutually_exclusive_group(required=True)
    source.add_argument("--chain", type=Path, help="chain file to simulate")
    source.add_argument(
        "--random", action="store_true", help="draw a random chain instead"
    )
    sim.add_argument("--seed", type=int, default=0, help="random-chain seed")
    sim.add_argument("--links", type=int, default=4, help="links in the random chain")
    sim.add_argument(
        "--types",
        default="random",
        help="random-chain joint types: random, revolute, prismatic, "
        "or a comma-separated list",
    )
    sim.add_argument(
        "--trajectory",
        choices=("sinusoid", "fully-informative"),
        default="sinusoid",
        help="trajectory family to drive the joints with",
    )
    sim.add_argument("--obs", type=int, default=50, help="sinusoid row count")
    sim.add_argument(
        "--displacement",
        type=float,
        default=0.5,
        help="per-joint step of the fully-informative trajectory",
    )
    sim.add_argument("--out", type=Path, required=True, help="dataset file to write")
    sim.add_argument(
        "--chain-out",
        type=Path,
        help="where to write the drawn chain (default: <out>.chain.json)",
    )

    ident = commands.add_parser(
        "identify", help="identify joint types and ordering from a dataset"
    )
    ident.add_argument("--data", type=Path, required=True, help="dataset file")
    ident.add_argument("--out", type=Path, required=True, help="result file to write")
    ident.add_argument("--tol-res", type=float, help="feasibility residual threshold")
    ident.add_argument("--tol-con", type=float, help="constraint violation threshold")
    ident.add_argument("--multistart", type=int, help="factorization solver restarts")

    mc = commands.add_parser(
        "montecarlo", help="run a randomized batch and tally confusion matrices"
    )
    mc.add_argument("--series", type=int, default=128, help="number of random chains")
    mc.add_argument("--links", type=int, default=6, help="links per chain")
    mc.add_argument("--obs", type=int, default=50, help="observations per series")
    mc.add_argument("--seed", type=int, default=0, help="master seed")
    mc.add_argument("--out", type=Path, required=True, help="report file to write")
    mc.add_argument("--csv", type=Path, help="also write confusion matrices as CSV")
    figures = mc.add_mutually_exclusive_group()
    figures.add_argument(
        "--figures",
        type=Path,
        help="directory for rendered figures (default: alongside the CSV)",
    )
    figures.add_argument(
        "--no-figures", action="store_true", help="skip figure rendering"
    )

    gen = commands.add_parser(
        "gen-trajectory", help="write a joint-space trajectory file"
    )
    gen.add_argument(
        "--mode",
        choices=("sinusoid", "fully-informative"),
        default="fully-informative",
        help="trajectory family",
    )
    gen.add_argument("--links", type=int, required=True, help="links in the chain")
    gen.add_argument("--obs", type=int, default=50, help="sinusoid row count")
    gen.add_argument("--seed", type=int, default=0, help="sinusoid seed")
    gen.add_argument(
        "--displacement",
        type=float,
        default=0.5,
        help="per-joint step of the fully-informative trajectory",
    )
    gen.add_argument("--out", type=Path, required=True, help="trajectory file to write")
    return parser


def _parse_types(value: str):
    if "," in value:
        return tuple(part.strip() for part in value.split(","))
    return value


def _cmd_simulate(args) -> int:
    if args.random:
        chain = random_chain(args.seed, args.links, _parse_types(args.types))
        chain_out = args.chain_out or args.out.with_name(args.out.stem + ".chain.json")
        kio.write_chain(chain, chain_out)
        print(f"wrote random chain to {chain_out}")
    else:
        chain = kio.read_chain(args.chain)
    if args.trajectory == "sinusoid":
        trajectory = gen_sinusoidal(chain.n_joints, args.obs, seed=args.seed)
    else:
        trajectory, _ = gen_fully_informative(chain.n_joints, displacement=args.displacement)
    obs = observe(chain, trajectory)
    kio.write_dataset(obs, args.out)
    print(
        f"wrote {obs.n_markers}-marker, {obs.n_obs}-row dataset to {args.out}"
    )
    return EX_OK


def _tolerances_from_args(args) -> Tolerances:
    overrides = {
        name: value
        for name, value in (
            ("tol_res", args.tol_res),
            ("tol_con", args.tol_con),
            ("multistart_count", args.multistart),
        )
        if value is not None
    }
    return Tolerances(**overrides)


def _describe_structure(structure) -> str:
    markers = " -> ".join(str(m) for m in structure.marker_sequence)
    joints = ", ".join(
        f"{jt.value}(signal {sig})"
        for jt, sig in zip(structure.joint_types, structure.joint_signals)
    )
    return f"markers: {markers}\njoints:  {joints}"


def _cmd_identify(args) -> int:
    tol = _tolerances_from_args(args)
    obs = kio.read_dataset(args.data)
    verdicts = classify_all(obs, tol)
    base = base_marker(obs)
    try:
        structure = assemble_chain(verdicts, base)
    except StructureAmbiguousError as exc:
        kio.write_identification_result(
            args.out,
            tolerances=tol,
            base_marker=base,
            verdicts=verdicts,
            structure=None,
            problems=exc.problems,
            inconclusive_triplets=exc.inconclusive_triplets,
        )
        print(f"structure ambiguous; diagnostics written to {args.out}", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EX_AMBIGUOUS
    kio.write_identification_result(
        args.out,
        tolerances=tol,
        base_marker=base,
        verdicts=verdicts,
        structure=structure,
    )
    print(_describe_structure(structure))
    print(f"wrote result to {args.out}")
    return EX_OK


def _cmd_montecarlo(args) -> int:
    config = McConfig(
        n_series=args.series,
        n_links=args.links,
        n_obs=args.obs,
        master_seed=args.seed,
    )
    report = run_montecarlo(config)
    kio.write_mc_report(report, args.out)
    print(format_text_table(report), end="")
    print(f"wrote report to {args.out}")
    if args.csv is not None:
        write_csv(report, args.csv)
        print(f"wrote matrices to {args.csv}")
    if not args.no_figures and (args.csv is not None or args.figures is not None):
        directory = args.figures if args.figures is not None else args.csv.parent
        for path in render_figures(report, directory):
            print(f"wrote figure {path}")
    return EX_OK


def _cmd_gen_trajectory(args) -> int:
    n_joints = args.links - 1
    if n_joints < 1:
        raise InvalidRangeError(f"need at least 2 links, got {args.links}")
    if args.mode == "sinusoid":
        data = kio.TrajectoryData(
            gen_sinusoidal(n_joints, args.obs, seed=args.seed), "sinusoid"
        )
    else:
        values, pairs = gen_fully_informative(n_joints, displacement=args.displacement)
        data = kio.TrajectoryData(values, "fully-informative", tuple(pairs))
    kio.write_trajectory(data, args.out)
    print(f"wrote {data.joint_values.shape[0]}-row trajectory to {args.out}")
    return EX_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "identify": _cmd_identify,
    "montecarlo": _cmd_montecarlo,
    "gen-trajectory": _cmd_gen_trajectory,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EX_USAGE
    try:
        return _COMMANDS[args.command](args)
    except _FILE_ERRORS as exc:
        print(f"kinstruct: error: {exc}", file=sys.stderr)
        return EX_IOERR
    except ValueError as exc:  # bad argument values (ranges, type lists, ...)
        print(f"kinstruct: error: {exc}", file=sys.stderr)
        return EX_USAGE


if __name__ == "__main__":
    sys.exit(main())
