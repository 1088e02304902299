import argparse
import os
import re
import sys
from collections import OrderedDict
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional

from kgalign import __version__
from kgalign import logging as kga_logging
from kgalign.benchgen import BenchConfig, read_manifest, write_benchmark
from kgalign.config import ConfigError, Project, layer
from kgalign.evaluation import calibrate, conflict_recall, evaluate
from kgalign.ingest import (
    ParseError,
    load_alignment,
    load_ontology,
    write_alignment,
)
from kgalign.logging import logger
from kgalign.matcher import (
    Blocking,
    MatcherConfig,
    Metric,
    generate_candidates,
)
from kgalign.model import (
    DuplicateMappingError,
    EndpointNotInSignature,
    InvalidIri,
    KindMismatch,
    aligned_axioms,
    bind_alignment,
)
from kgalign.reasoner import DEFAULT_J_CAP, closure, deductive_diff
from kgalign.report import diagnose_report, dumps, repair_report
from kgalign.selector import Mode, SelectorConfig, select
from kgalign.utils import ContractViolation, digests, timed

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_FLAGGED = 3

# errors caused by the inputs rather than by a bug
_input_errors = (
    ParseError,
    OSError,
    ConfigError,
    ContractViolation,
    EndpointNotInSignature,
    KindMismatch,
    DuplicateMappingError,
    InvalidIri,
)

_commands = OrderedDict()


class CommandMeta(type):
    def __new__(cls, clsname, bases, attrs):
        obj = super().__new__(cls, clsname, bases, attrs)
        if obj.name:
            _commands[obj.name] = obj
        obj._subparser = None
        return obj

    @property
    def name(cls):
        return re.sub("Command$", "", cls.__name__).lower()

    @property
    def subparser(cls):
        return cls._subparser


def build_base_parser(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--version", action="version", version=f"kgalign version {__version__}"
    )
    parser.add_argument("--log-file", type=str, help="Path to write logs to")
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="Log verbosity"
    )
    parser.add_argument(
        "-p",
        "--project",
        type=str,
        help=(
            "Directory whose pyproject.toml supplies default "
            "options. Will default to current working directory"
        ),
        default=os.getcwd(),
    )
    parser.add_argument(
        "-e",
        "--environment",
        type=str,
        help="Path to file specifying environment variables for the run",
    )

    # now add subparsers for each subcommand we want to implement
    subparsers = parser.add_subparsers(dest="command")
    for command in _commands.values():
        command.build_parser(subparsers)


class Command(metaclass=CommandMeta):
    # `[tool.kgalign]` sub-tables consulted for option
    # defaults, in order of precedence
    sections = ()
    defaults: Dict[str, Any] = {}

    @classmethod
    def build_parser(cls, subparser: argparse.ArgumentParser) -> None:
        parser = subparser.add_parser(cls.name, description=cls.__doc__)
        cls.add_arguments(parser)
        cls._subparser = parser

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        return

    @classmethod
    def options(cls, flags: argparse.Namespace, project: Project) -> Dict:
        tables = [project.section(name) for name in cls.sections]
        return layer(vars(flags), tables, cls.defaults)

    @classmethod
    def run(cls, flags: argparse.Namespace, project: Project) -> int:
        raise NotImplementedError


def _add_graphs(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--source", type=Path, required=True, help="Source ontology"
    )
    parser.add_argument(
        "--target", type=Path, required=True, help="Target ontology"
    )


def _add_selector(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--mode",
        type=str,
        choices=[m.value for m in Mode],
        help="Selection mode",
    )
    parser.add_argument(
        "--theta", type=float, help="Confidence above which conflicts pass"
    )
    parser.add_argument(
        "--cardinality",
        type=int,
        help="Maximum number of mappings per entity on either side",
    )
    parser.add_argument(
        "--gamma", type=float, help="Score floor for soft selection"
    )
    parser.add_argument(
        "--max-soft-iterations",
        type=int,
        help="Maximum number of removals in soft selection",
    )
    parser.add_argument(
        "--j-cap",
        type=int,
        help="Maximum number of supports kept per derived subsumption",
    )


_selector_defaults = {
    "mode": SelectorConfig.mode.value,
    "theta": SelectorConfig.theta,
    "cardinality": SelectorConfig.cardinality_t,
    "gamma": SelectorConfig.gamma,
    "max_soft_iterations": SelectorConfig.max_soft_iterations,
    "j_cap": DEFAULT_J_CAP,
}


def _build(cls, **kwargs):
    try:
        return cls(**kwargs)
    except ValueError as e:
        raise ConfigError(str(e))


def _selector_config(options: Dict) -> SelectorConfig:
    return _build(
        SelectorConfig,
        mode=options["mode"],
        theta=options["theta"],
        cardinality_t=options["cardinality"],
        gamma=options["gamma"],
        max_soft_iterations=options["max_soft_iterations"],
        j_cap=options["j_cap"],
    )


def _load_graphs(flags: argparse.Namespace, timings: Dict[str, float]):
    with timed("load", timings):
        kg1 = load_ontology(flags.source, "source")
        kg2 = load_ontology(flags.target, "target")
    return kg1, kg2


def _write(text: str, path: Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        logger.info(f"Wrote {path}")


def _flag_names(options: Dict) -> Dict:
    return {name.replace("_", "-"): value for name, value in options.items()}


class MatchCommand(Command):
    """Generate candidate mappings between two ontologies"""

    sections = ("match",)
    defaults = {
        "metric": MatcherConfig.metric.value,
        "candidate_threshold": MatcherConfig.candidate_threshold,
        "blocking": MatcherConfig.blocking.value,
    }

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        _add_graphs(parser)
        parser.add_argument(
            "--out", type=Path, help="Candidate TSV, defaults to stdout"
        )
        parser.add_argument(
            "--metric",
            type=str,
            choices=[m.value for m in Metric],
            help="Label similarity metric",
        )
        parser.add_argument(
            "--candidate-threshold",
            type=float,
            help="Minimum similarity of a candidate",
        )
        parser.add_argument(
            "--blocking",
            type=str,
            choices=[b.value for b in Blocking],
            help="Which target entities each source entity is compared to",
        )

    @classmethod
    def run(cls, flags: argparse.Namespace, project: Project) -> int:
        options = cls.options(flags, project)
        cfg = _build(MatcherConfig, **options)

        timings = {}
        kg1, kg2 = _load_graphs(flags, timings)
        with timed("match", timings):
            candidates = generate_candidates(kg1, kg2, cfg)
        _write(write_alignment(candidates), flags.out)
        return EXIT_OK


class RepairCommand(Command):
    """Select a consistent alignment from a set of candidates"""

    sections = ("repair", "reasoner")
    defaults = dict(_selector_defaults, exact=False)

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        _add_graphs(parser)
        parser.add_argument(
            "--alignment", type=Path, required=True, help="Candidate TSV"
        )
        _add_selector(parser)
        parser.add_argument(
            "--exact",
            action="store_true",
            default=None,
            help="Search for the optimal hard selection exhaustively",
        )
        parser.add_argument(
            "--out", type=Path, help="Repaired TSV, defaults to stdout"
        )
        parser.add_argument("--report", type=Path, help="TOML run report")

    @classmethod
    def run(cls, flags: argparse.Namespace, project: Project) -> int:
        options = cls.options(flags, project)
        cfg = _selector_config(options)

        timings = {}
        kg1, kg2 = _load_graphs(flags, timings)
        with timed("load", timings):
            candidates = load_alignment(flags.alignment)
        with timed("select", timings):
            selection = select(kg1, kg2, candidates, cfg, options["exact"])

        _write(
            write_alignment(selection.alignment, selection.scored), flags.out
        )
        if flags.report is not None:
            inputs = digests(
                {
                    "source": flags.source,
                    "target": flags.target,
                    "alignment": flags.alignment,
                }
            )
            report = repair_report(
                inputs, _flag_names(options), selection, timings
            )
            _write(dumps(report), flags.report)

        if selection.flagged:
            logger.warning("Selection result is flagged, see the report")
            return EXIT_FLAGGED
        return EXIT_OK


class DiagnoseCommand(Command):
    """Report the unsatisfiable concepts an alignment causes"""

    sections = ("reasoner",)
    defaults = {"j_cap": DEFAULT_J_CAP}

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        _add_graphs(parser)
        parser.add_argument(
            "--alignment", type=Path, required=True, help="Alignment TSV"
        )
        parser.add_argument(
            "--j-cap",
            type=int,
            help="Maximum number of supports kept per derived subsumption",
        )
        parser.add_argument(
            "--report", type=Path, help="TOML report, defaults to stdout"
        )

    @classmethod
    def run(cls, flags: argparse.Namespace, project: Project) -> int:
        options = cls.options(flags, project)

        timings = {}
        kg1, kg2 = _load_graphs(flags, timings)
        with timed("load", timings):
            alignment = load_alignment(flags.alignment)
        with timed("closure", timings):
            cr = closure(kg1, kg2, alignment, options["j_cap"])

        inputs = digests(
            {
                "source": flags.source,
                "target": flags.target,
                "alignment": flags.alignment,
            }
        )
        report = diagnose_report(
            inputs, _flag_names(options), alignment, cr, timings
        )
        _write(dumps(report), flags.report)
        return EXIT_FLAGGED if cr.truncated else EXIT_OK


class EvalCommand(Command):
    """Compare an alignment against a reference alignment"""

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        parser.add_argument(
            "--alignment", type=Path, required=True, help="Alignment TSV"
        )
        parser.add_argument(
            "--reference", type=Path, required=True, help="Reference TSV"
        )
        parser.add_argument(
            "--conflicts",
            type=Path,
            help="Benchmark manifest of conflict mapping keys",
        )

    @classmethod
    def run(cls, flags: argparse.Namespace, project: Project) -> int:
        alignment = load_alignment(flags.alignment)
        reference = load_alignment(flags.reference)
        print(evaluate(alignment, reference))
        if flags.conflicts is not None:
            keys = read_manifest(flags.conflicts)
            recall = conflict_recall(alignment, keys)
            print(f"conflict recall={recall:.6f}")
        return EXIT_OK


class CalibrateCommand(Command):
    """
    Find the selection parameter that best reproduces
    a reference alignment
    """

    sections = ("calibrate", "repair", "reasoner")
    defaults = dict(_selector_defaults, grid_step=0.01)

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        _add_graphs(parser)
        parser.add_argument(
            "--alignment", type=Path, required=True, help="Candidate TSV"
        )
        parser.add_argument(
            "--reference", type=Path, required=True, help="Reference TSV"
        )
        _add_selector(parser)
        parser.add_argument(
            "--grid-step", type=float, help="Spacing of the swept values"
        )

    @classmethod
    def run(cls, flags: argparse.Namespace, project: Project) -> int:
        options = cls.options(flags, project)
        cfg = _selector_config(options)

        kg1, kg2 = _load_graphs(flags, {})
        candidates = load_alignment(flags.alignment)
        reference = load_alignment(flags.reference)
        value, report = calibrate(
            kg1, kg2, candidates, reference, cfg, options["grid_step"]
        )
        parameter = "theta" if cfg.mode is Mode.THRESHOLD else "threshold"
        print(f"{parameter}={value:g} {report}")
        return EXIT_OK


class DiffCommand(Command):
    """
    List the atomic statements entailed by one graph
    but not by another
    """

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        parser.add_argument("--kg1", type=Path, required=True)
        parser.add_argument("--kg2", type=Path, required=True)
        parser.add_argument(
            "--alignment",
            type=Path,
            help=(
                "If given, compare the union of both graphs "
                "with and without this alignment"
            ),
        )

    @classmethod
    def run(cls, flags: argparse.Namespace, project: Project) -> int:
        kg1 = load_ontology(flags.kg1, "kg1")
        kg2 = load_ontology(flags.kg2, "kg2")
        sigma = set(kg1.classes) | set(kg2.classes)
        if flags.alignment is None:
            statements = deductive_diff(kg1.axioms, kg2.axioms, sigma)
        else:
            alignment = load_alignment(flags.alignment)
            bind_alignment(kg1, kg2, alignment)
            statements = deductive_diff(
                kg1.axioms + kg2.axioms,
                aligned_axioms(kg1, kg2, alignment),
                sigma,
            )

        statements = sorted(statements, key=lambda s: (s.sub, s.sup or ""))
        for statement in statements:
            print(statement)
        print(f"{len(statements)} statements")
        return EXIT_OK


class BenchgenCommand(Command):
    """Generate a synthetic benchmark with planted conflicts"""

    sections = ("benchgen",)
    defaults = asdict(BenchConfig())

    @classmethod
    def add_arguments(cls, parser: argparse.ArgumentParser):
        parser.add_argument("--seed", type=int, help="Generator seed")
        parser.add_argument("--n-classes", type=int, help="Number of classes")
        parser.add_argument(
            "--branching", type=int, help="Maximum children per class"
        )
        parser.add_argument(
            "--label-noise",
            type=float,
            help="Probability of perturbing a target label",
        )
        parser.add_argument(
            "--edge-delete-rate",
            type=float,
            help="Probability of dropping a target subclass edge",
        )
        parser.add_argument(
            "--n-conflicts", type=int, help="Number of planted conflicts"
        )
        parser.add_argument(
            "--out-dir", type=Path, required=True, help="Output directory"
        )

    @classmethod
    def run(cls, flags: argparse.Namespace, project: Project) -> int:
        cfg = _build(BenchConfig, **cls.options(flags, project))
        write_benchmark(cfg, flags.out_dir)
        return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="kgalign")
    build_base_parser(parser)
    flags = parser.parse_args(argv)
    if flags.command is None:
        parser.error(
            "Must specify a command. Available commands "
            "are:\n\t{}".format("\n\t".join(_commands.keys()))
        )

    # KGA_LOG may come from the dotenv file,
    # so load it before configuring logging
    try:
        project = Project(flags.project)
        project.load_dotenv(flags.environment)
        kga_logging.configure(flags.verbose, flags.log_file)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    try:
        return _commands[flags.command].run(flags, project)
    except ParseError as e:
        for diagnostic in e.diagnostics:
            print(diagnostic, file=sys.stderr)
        return EXIT_INPUT_ERROR
    except _input_errors as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
