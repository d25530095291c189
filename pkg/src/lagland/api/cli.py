"""
Command-line front end: runs verification suites against catalog models and
writes a report.

    lagland --model nodal --suite involution,census --seed 42 --out report.json
"""
import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from lagland.__about__ import __version__
from lagland.core.errors import ConfigError
from lagland.core.geometry import NumericTolerances, configure_numerics
from lagland.core.report import VerificationReport, report_schema
from lagland.core.suites import SuiteContext, execute, plan, resolve_models, resolve_suites
from lagland.utils.logging import LOG_LEVEL_MAP, initialize_logging
from lagland.utils.settings import ModelSettings, NumericSettings, RunSettings, check_env_file

logger = logging.getLogger(__name__)

EXIT_CONFIG_ERROR = 2
FORMATS = ("json", "table")


def parse_region(text: str) -> Optional[tuple[tuple[float, float], ...]]:
    """
    "lo:hi,lo:hi,..." -> ((lo, hi), ...); an empty string means the model's own box.

    Raises:
        ConfigError: malformed bounds or lo >= hi.
    """
    if not text or not text.strip():
        return None
    bounds = []
    for part in text.split(","):
        try:
            lo, hi = (float(v) for v in part.split(":"))
        except ValueError as e:
            raise ConfigError(f"region bound {part!r} is not of the form lo:hi") from e
        if not lo < hi:
            raise ConfigError(f"region bound {part!r} is empty")
        bounds.append((lo, hi))
    return tuple(bounds)


class RunConfig(BaseModel):
    """A validated run: which suites on which models, with sampling and tolerance parameters."""
    model_config = ConfigDict(frozen=True)

    model: str = "nodal"
    suite: str = "all"
    samples: int = 1000
    seed: int = 42
    tol: float = 1e-6
    structural_tol: float = 1e-12
    region: Optional[tuple[tuple[float, float], ...]] = None
    out: Optional[Path] = None
    format: str = "table"
    jobs: int = 1

    @field_validator("samples", "jobs")
    @classmethod
    def _at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("tol", "structural_tol")
    @classmethod
    def _positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("tolerances must be positive")
        return value

    @field_validator("seed")
    @classmethod
    def _seed_range(cls, value: int) -> int:
        if not 0 <= value < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        return value

    @field_validator("format")
    @classmethod
    def _known_format(cls, value: str) -> str:
        if value not in FORMATS:
            raise ValueError(f"format must be one of {', '.join(FORMATS)}")
        return value

    def echo(self) -> dict:
        """The config as recorded in the report; the worker count does not change results."""
        return self.model_dump(mode="json", exclude={"jobs"})


def build_config(args: argparse.Namespace) -> tuple[RunConfig, ModelSettings, NumericSettings]:
    """
    Layer settings: environment (or --config file) first, then flags.

    Raises:
        ConfigError: invalid values.
        FileNotFoundError: the --config file does not exist.
    """
    classes = (RunSettings, ModelSettings, NumericSettings)
    try:
        if args.config:
            check_env_file(args.config, classes)
            run_settings, model_settings, numeric = (cls.from_env_file(args.config) for cls in classes)
        else:
            run_settings, model_settings, numeric = (cls() for cls in classes)
    except ValueError as e:
        raise ConfigError(f"invalid settings: {e}") from e

    def pick(flag, default):
        return default if flag is None else flag

    region_text = pick(args.region, run_settings.LAGLAND_REGION)
    out = pick(args.out, run_settings.LAGLAND_OUT)
    try:
        config = RunConfig(
            model=pick(args.model, run_settings.LAGLAND_MODEL),
            suite=pick(args.suite, run_settings.LAGLAND_SUITE),
            samples=pick(args.samples, run_settings.LAGLAND_SAMPLES),
            seed=pick(args.seed, run_settings.LAGLAND_SEED),
            tol=pick(args.tol, run_settings.LAGLAND_TOL),
            structural_tol=numeric.STRUCTURAL_TOL,
            region=parse_region(region_text),
            out=Path(out) if out else None,
            format=pick(args.format, run_settings.LAGLAND_FORMAT),
            jobs=pick(args.jobs, run_settings.LAGLAND_JOBS),
        )
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    return config, model_settings, numeric


def run(config: RunConfig, model_settings: Optional[ModelSettings] = None,
        numeric_settings: Optional[NumericSettings] = None) -> tuple[VerificationReport, int]:
    """
    Execute the configured suites. The numeric settings become the solver
    defaults for the whole run and are echoed in the report.

    Returns:
        The report and the exit status (0 iff no record failed).

    Raises:
        ConfigError: unknown model or suite.
    """
    model_settings = model_settings or ModelSettings()
    tolerances = NumericTolerances.from_settings(numeric_settings or NumericSettings())
    configure_numerics(tolerances)
    suites = resolve_suites(config.suite)
    models = resolve_models(config.model, model_settings)
    ctx = SuiteContext(
        samples=config.samples,
        seed=config.seed,
        tol=config.tol,
        structural_tol=config.structural_tol,
        region=config.region,
        out=config.out,
        model_settings=model_settings,
    )
    tasks = plan(suites, models, ctx)
    logger.info(f"running {len(tasks)} tasks on {config.jobs} worker(s)")
    records, timings = execute(tasks, config.jobs)
    report = VerificationReport(config=config.echo() | {"numerics": asdict(tolerances)}, records=records,
                                timings=timings)
    if report.failed:
        logger.warning(f"{len(report.failed)} check(s) failed: {', '.join(r.name for r in report.failed)}")
    return report, report.exit_status


def write_report(report: VerificationReport, config: RunConfig) -> None:
    """
    JSON goes to --out (or stdout); the table always goes to stdout in table format.

    Raises:
        OSError: the output path is not writable.
    """
    if config.out is not None:
        config.out.parent.mkdir(parents=True, exist_ok=True)
        config.out.write_text(report.to_json() + "\n", encoding="utf-8")
        logger.info(f"report written to {config.out}")
    if config.format == "table":
        print(report.to_table())
    elif config.out is None:
        print(report.to_json())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lagland",
        description="Numerical verification of Lagrangian fibrations and their anti-symplectic involutions.",
    )
    p.add_argument("--model", help="Catalog model name, comma-separated names or 'all' (default: nodal).")
    p.add_argument("--suite", help="lagrangian, involution, census, monodromy, amoeba, grading, semiflat, flow "
                                   "or all; comma-separated (default: all).")
    p.add_argument("--samples", type=int, help="Points per sample cloud (default: 1000).")
    p.add_argument("--seed", type=int, help="Run seed (default: 42).")
    p.add_argument("--tol", type=float, help="Numeric tolerance for flow-built quantities (default: 1e-6).")
    p.add_argument("--region", help="Sampling box 'lo:hi,lo:hi,...' in phase-space coordinates.")
    p.add_argument("--out", help="Path of the JSON report; rasters are written next to it.")
    p.add_argument("--format", choices=FORMATS, help="Output format on stdout (default: table).")
    p.add_argument("--jobs", type=int, help="Worker threads (default: LAGLAND_JOBS or 1).")
    p.add_argument("--config", help="key=value settings file; flags override its values.")
    p.add_argument("--log-level", choices=sorted(LOG_LEVEL_MAP), help="Log level (default: LOG_LEVEL or INFO).")
    p.add_argument("--schema", action="store_true", help="Print the JSON schema of the report and exit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    initialize_logging(args.log_level)
    if args.schema:
        print(json.dumps(report_schema(), indent=2, sort_keys=True))
        return 0
    try:
        config, model_settings, numeric = build_config(args)
        report, status = run(config, model_settings, numeric)
    except (ConfigError, FileNotFoundError) as e:
        logger.error(str(e))
        return EXIT_CONFIG_ERROR
    try:
        write_report(report, config)
    except OSError as e:
        logger.error(f"cannot write report: {e}")
        return EXIT_CONFIG_ERROR
    return status


if __name__ == "__main__":
    sys.exit(main())
