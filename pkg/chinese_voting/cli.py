"""
Command-line interface: ``chinese-voting <command> [options]``.

Commands:
    validate   ingest a log and print summary counts
    simulate   generate a synthetic community and its ground truth
    fit        fit the voting parameters and trendiness
    coeffs     trendiness and conformity per community and group
    eval       predictive next-action evaluation (optionally the ablation grid)
    quality    display-rank vs. quality ranking against comment sentiment

Options resolve as flags > ``--config`` JSON file > defaults. Every output
directory receives ``run_config.json`` with the resolved options. Exit codes:
0 on success, 1 on invalid input or options, 2 on numerical failure.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from chinese_voting import __version__
from chinese_voting.core.errors import ConfigError, NumericalError, ValidationError
from chinese_voting.core.events import EventType
from chinese_voting.core.pipeline import AnalyzerConfig, CommunityAnalyzer
from chinese_voting.core.trajectory import Dataset, UrnConfig
from chinese_voting.export.base import JsonExporter
from chinese_voting.export.params import ParamsExporter, ParamsFile, parse_params
from chinese_voting.export.tables import EventLogExporter, TableExporter
from chinese_voting.models.base import FeatureGrouping, FeatureMask, RankBase, SelectionParams
from chinese_voting.simulation.simulator import LengthModel, RankMechanism, SimConfig, TieBreak

logger = logging.getLogger(__name__)

COMMANDS = ("validate", "simulate", "fit", "coeffs", "eval", "quality")
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


@dataclass
class RunConfig:
    """
    Fully resolved options of one CLI invocation.

    Field names double as the keys accepted in a ``--config`` JSON file.
    """
    command: str = "validate"
    input: Optional[str] = None
    output_dir: Optional[str] = None
    metadata: Optional[str] = None
    params: Optional[str] = None
    community_id: str = "community"
    # models
    alpha: float = 0.5
    sigma2: float = 1.0
    urn: str = "1,1,1"
    ridge: float = 0.5
    tol: float = 1e-6
    max_iters: int = 500
    exclude_first_vote: bool = False
    knockout: str = ""
    rank_base: str = RankBase.ZERO.value
    # analyses
    horizon: int = 50
    refit_stride: int = 25
    bin_size: int = 1000
    residual: str = "squared"
    grouping: str = FeatureGrouping.JOINT.value
    crp_literal: bool = False
    exclude_first_kappa_vote: bool = False
    ablation: bool = False
    emit_embedding: bool = False
    min_responses: int = 1
    stitch_gap: int = 3
    # simulation
    seed: int = 0
    items: int = 200
    events: int = 60
    tau: float = 0.0
    lam: float = 0.0
    mu: float = 0.0
    nu_mean: float = 0.0
    nu_sd: float = 0.0
    rank_mechanism: str = RankMechanism.BY_SCORE.value
    tie_break: str = TieBreak.BY_ARRIVAL.value
    # execution
    threads: int = 1
    verbosity: int = 0

    def analyzer_config(self) -> AnalyzerConfig:
        return AnalyzerConfig(
            alpha=self.alpha,
            sigma2=self.sigma2,
            urn=UrnConfig.parse(self.urn),
            ridge=self.ridge,
            tol=self.tol,
            max_iters=self.max_iters,
            exclude_first_vote=self.exclude_first_vote,
            knockout=FeatureMask.parse(self.knockout),
            rank_base=_enum(RankBase, self.rank_base, "rank-base"),
            horizon=self.horizon,
            refit_stride=self.refit_stride,
            include_first_kappa_vote=not self.exclude_first_kappa_vote,
            bin_size=self.bin_size,
            residual=self.residual,
            grouping=_enum(FeatureGrouping, self.grouping, "grouping"),
            crp_literal=self.crp_literal,
            min_responses=self.min_responses,
            stitch_gap=self.stitch_gap,
            threads=self.threads,
        )

    def sim_config(self) -> SimConfig:
        return SimConfig(
            selection=SelectionParams(tau=self.tau, alpha=self.alpha),
            lam=self.lam,
            mu=self.mu,
            sigma2=self.sigma2,
            nu_mean=self.nu_mean,
            nu_sd=self.nu_sd,
            urn=UrnConfig.parse(self.urn),
            rank_mechanism=_enum(RankMechanism, self.rank_mechanism, "rank-mechanism"),
            tie_break=_enum(TieBreak, self.tie_break, "tie-break"),
            length_model=LengthModel(),
            t_max=self.events,
            m=self.items,
            seed=self.seed,
            rank_base=_enum(RankBase, self.rank_base, "rank-base"),
            community_id=self.community_id,
        )

    def validate(self):
        """Check every option before any work starts."""
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        self.analyzer_config()
        if self.command == "simulate":
            self.sim_config()
        elif self.input is None:
            raise ConfigError(f"{self.command} needs --input")
        if self.command in ("fit", "coeffs", "eval", "quality") and self.output_dir is None:
            raise ConfigError(f"{self.command} needs --output-dir")
        if self.command == "quality" and self.metadata is None:
            raise ConfigError("quality needs --metadata")

    def to_dict(self) -> Dict[str, Any]:
        """Options echoed into outputs; execution-only settings are left out."""
        resolved = asdict(self)
        for key in ("output_dir", "threads", "verbosity"):
            resolved.pop(key)
        return resolved


def _enum(cls, value: str, flag: str):
    try:
        return cls(value)
    except ValueError:
        valid = ", ".join(member.value for member in cls)
        raise ConfigError(f"--{flag} must be one of {valid}, got {value!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser; every default is None so unset flags can be detected."""
    parser = _Parser(prog="chinese-voting", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)

    io = parser.add_argument_group("input and output")
    io.add_argument("--input", help="event log (JSON lines); '-' reads stdin")
    io.add_argument("--output-dir", help="directory for outputs")
    io.add_argument("--metadata", help="per-response metadata sidecar")
    io.add_argument("--params", help="parameter file from a previous fit")
    io.add_argument("--config", help="JSON file with default options")
    io.add_argument("--community-id", help="community identifier")

    model = parser.add_argument_group("models")
    model.add_argument("--alpha", type=float, help="write propensity (default 0.5)")
    model.add_argument("--sigma2", type=float, help="quality prior variance (default 1.0)")
    model.add_argument("--urn", help="urn pseudo-votes x0,y0,w (default 1,1,1)")
    model.add_argument("--ridge", type=float, help="ridge weight on lambda, mu, nu (default 0.5)")
    model.add_argument("--tol", type=float, help="gradient-norm tolerance (default 1e-6)")
    model.add_argument("--max-iters", type=int, help="optimizer iteration cap (default 500)")
    model.add_argument("--knockout", help="parameter groups pinned to 0, e.g. q,lambda")
    model.add_argument("--exclude-first-vote", action="store_true", default=None,
                       help="drop each response's first vote from the voting fit")
    model.add_argument("--rank-base", choices=[b.value for b in RankBase])

    analysis = parser.add_argument_group("analyses")
    analysis.add_argument("--horizon", type=int, help="last predicted event index (default 50)")
    analysis.add_argument("--refit-stride", type=int, help="votes between refits (default 25)")
    analysis.add_argument("--bin-size", type=int, help="responses per bin (default 1000)")
    analysis.add_argument("--residual", choices=["squared", "absolute"])
    analysis.add_argument("--grouping", choices=[g.value for g in FeatureGrouping])
    analysis.add_argument("--ablation", action="store_true", default=None,
                          help="evaluate every knockout subset")
    analysis.add_argument("--crp-literal", action="store_true", default=None,
                          help="CRP baseline without the writer pseudo-count")
    analysis.add_argument("--exclude-first-kappa-vote", action="store_true", default=None,
                          help="leave the community's first vote out of conformity")
    analysis.add_argument("--emit-embedding", action="store_true", default=None,
                          help="also write the (trendiness, conformity) table")
    analysis.add_argument("--min-responses", type=int, help="drop thinner items (default 1)")
    analysis.add_argument("--stitch-gap", type=int, help="largest stitched gap (default 3)")

    sim = parser.add_argument_group("simulation")
    sim.add_argument("--seed", type=int, help="random seed (default 0)")
    sim.add_argument("--items", type=int, help="number of items (default 200)")
    sim.add_argument("--events", type=int, help="events per item (default 60)")
    sim.add_argument("--tau", type=float)
    sim.add_argument("--lambda", dest="lam", type=float)
    sim.add_argument("--mu", type=float)
    sim.add_argument("--nu-mean", type=float)
    sim.add_argument("--nu-sd", type=float)
    sim.add_argument("--rank-mechanism", choices=[m.value for m in RankMechanism])
    sim.add_argument("--tie-break", choices=[t.value for t in TieBreak])

    run = parser.add_argument_group("execution")
    run.add_argument("--threads", type=int, help="worker threads (default 1)")
    run.add_argument("-v", "--verbose", action="count", default=0)
    run.add_argument("-q", "--quiet", action="store_true")
    return parser


def _check_file_types(values: Dict[str, Any]):
    """Reject config-file values whose JSON type does not match the option."""
    for f in fields(RunConfig):
        if f.name not in values:
            continue
        value = values[f.name]
        if f.type == Optional[str]:
            ok = value is None or isinstance(value, str)
        elif f.type is bool:
            ok = isinstance(value, bool)
        elif f.type is int:
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif f.type is float:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        else:
            ok = isinstance(value, f.type)
        if not ok:
            raise ConfigError(
                f"config key {f.name!r} expects {getattr(f.type, '__name__', 'a string')}, "
                f"got {type(value).__name__} {value!r}"
            )


def resolve_config(argv: Sequence[str]) -> RunConfig:
    """
    Resolve options as flags > config file > defaults.

    Raises:
        ConfigError: On an unknown flag or config key, a config value of the
            wrong type, or an out-of-range value
    """
    args = build_parser().parse_args(list(argv))
    known = {f.name for f in fields(RunConfig)}

    from_file: Dict[str, Any] = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            try:
                from_file = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"config file {args.config}: {e}") from None
        if not isinstance(from_file, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(from_file) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        _check_file_types(from_file)

    flags = {
        key: value for key, value in vars(args).items()
        if key in known and value is not None
    }
    flags["verbosity"] = -1 if args.quiet else args.verbose
    config = RunConfig(**{**from_file, **flags})
    config.validate()
    return config


def _setup_logging(verbosity: int):
    level = logging.WARNING
    if verbosity < 0:
        level = logging.ERROR
    elif verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger("chinese_voting").setLevel(level)


class _Runner:
    """Executes one resolved command."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.analyzer = CommunityAnalyzer(config.analyzer_config())
        self.out = Path(config.output_dir) if config.output_dir else None
        self.tables = TableExporter()
        self.json = JsonExporter()

    def write_run_config(self):
        if self.out is not None:
            self.json.write(self.config.to_dict(), self.out / "run_config.json")

    def load(self) -> Dataset:
        cfg = self.config
        source = sys.stdin.buffer if cfg.input == "-" else cfg.input
        return self.analyzer.load(source, cfg.community_id, cfg.metadata)

    def load_filtered(self) -> Dataset:
        ds, report = self.analyzer.filter(self.load())
        if report.n_dropped:
            logger.warning(f"Dropped {report.n_dropped} of {report.n_dropped + ds.m} items")
        return ds

    def validate(self) -> List[Path]:
        summary = self.load().summary()
        print(json.dumps(summary, indent=2, sort_keys=True))
        if self.out is None:
            return []
        return [self.json.write(summary, self.out / "summary.json")]

    def simulate(self) -> List[Path]:
        ds, truth = self.analyzer.simulate(self.config.sim_config())
        if self.out is None:
            sys.stdout.buffer.write(EventLogExporter().render(ds))
            sys.stdout.buffer.flush()
            return []
        truth_file = ParamsFile.for_dataset(ds, truth.voting, truth.selection)
        return [
            EventLogExporter().write(ds, self.out / "events.jsonl"),
            ParamsExporter().write(truth_file, self.out / "ground_truth.txt"),
        ]

    def fit(self) -> List[Path]:
        ds = self.load_filtered()
        result, tau = self.analyzer.fit(ds)
        selection = SelectionParams(tau.tau, self.config.alpha) if tau is not None else None
        summary = {
            "community_id": ds.community_id,
            "voting": result.to_dict(),
            "trendiness": tau.to_dict() if tau is not None else None,
            "dataset": ds.summary(),
        }
        return [
            ParamsExporter().write(ParamsFile.for_dataset(ds, result.params, selection),
                                   self.out / "params.txt"),
            self.json.write(summary, self.out / "fit_summary.json"),
        ]

    def coeffs(self) -> List[Path]:
        report = self.analyzer.coefficients(self.load_filtered())
        frame = report.to_frame()
        written = [self.tables.write(frame, self.out / "coefficients.csv")]
        if self.config.emit_embedding:
            embedding = frame[["community_id", "group_tag", "trendiness", "conformity"]]
            written.append(self.tables.write(embedding, self.out / "embedding.csv"))
        return written

    def eval(self) -> List[Path]:
        report = self.analyzer.evaluate(self.load_filtered(), ablation=self.config.ablation)
        return [
            self.tables.write(report.per_step, self.out / "eval_per_step.csv"),
            self.tables.write(report.summary, self.out / "eval_summary.csv"),
        ]

    def quality(self) -> List[Path]:
        ds = self.load_filtered()
        params = None
        if self.config.params is not None:
            params = parse_params(Path(self.config.params).read_text(encoding="utf-8")).voting
        report = self.analyzer.quality(ds, params)
        return [
            self.tables.write(report.rows, self.out / "quality_rows.csv"),
            self.tables.write(report.curves, self.out / "quality_curves.csv"),
            self.tables.write(report.summary, self.out / "quality_summary.csv"),
        ]


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one CLI command.

    Returns:
        0 on success, 1 on a validation or configuration error, 2 on a
        numerical failure
    """
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = resolve_config(argv)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID

    _setup_logging(config.verbosity)
    logger.warning(f"Resolved configuration: {json.dumps(asdict(config), sort_keys=True)}")

    runner = _Runner(config)
    try:
        written = getattr(runner, config.command)()
        runner.write_run_config()
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID

    for path in written:
        logger.info(f"Wrote {path}")
        runner.analyzer.event_emitter.emit_to_community(
            config.community_id, EventType.REPORT_WRITTEN, {"path": str(path)}
        )
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
