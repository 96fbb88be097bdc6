"""Command-line front end.

    krein-index solve-wave --model fkdv --s 2 --p 2 --c 1
    krein-index index --s 2 --p 5 --c 1
    krein-index sweep --axis p --start 3.5 --stop 4.5 --steps 11 --s 2 --c 1
    krein-index spectrum --s 2 --p 5 --c 1
    krein-index dump-operator --s 2 --p 2 --c 1 --which sandwich --eps 0.01
    krein-index self-check gkdv-p2

Settings resolve as flags > --config JSON file > environment (.env) > defaults.
"""
import argparse
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from typing import Optional

import numpy as np
from dotenv import load_dotenv

from krein_index import serialization
from krein_index.errors import ConfigError, KreinIndexError, TheoryConsistencyError
from krein_index.operators import (bbm_linearization, bbm_symmetrize, kdv_linearization, sandwich,
                                   schrodinger_operator, write_operator)
from krein_index.spectra import HamiltonianKind, classify_spectrum, hamiltonian_spectrum
from krein_index.spectral_core import field_from_function
from krein_index.verdicts import (SELF_CHECK_CASES, NumericsConfig, SweepAxis, bbm_verdict, kdv_verdict,
                                  self_check, sweep)
from krein_index.waves import (SolverOptions, WaveModel, bbm_wave, check_existence_window, kdv_wave,
                               solve_ground_state, write_profile)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_ACCURACY = 2
EXIT_THEORY = 3
EXIT_USAGE = 64

ENV_OUTPUT_DIR = "KREIN_INDEX_OUTPUT_DIR"
ENV_WORKERS = "KREIN_INDEX_WORKERS"


class ModelChoice(str, Enum):
    FKDV = "fkdv"
    FBBM = "fbbm"
    SCHRODINGER = "schrodinger"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, after flags, config file and environment are merged"""
    model: ModelChoice = ModelChoice.FKDV
    s: Optional[float] = None
    p: Optional[float] = None
    c: float = 1.0
    n: Optional[int] = None
    half_length: Optional[float] = None
    tol: Optional[float] = None
    output_dir: str = "."
    format: OutputFormat = OutputFormat.CSV
    workers: int = 1

    def numerics(self, s: float = None) -> NumericsConfig:
        """Per-dispersion defaults with any explicitly configured grid or tolerance laid over them"""
        s = self.s if s is None else s
        overrides = {}
        if self.n is not None:
            overrides["n"] = self.n
        if self.half_length is not None:
            overrides["half_length"] = self.half_length
        if self.tol is not None:
            overrides["solver"] = SolverOptions.for_dispersion(s, tol=self.tol, max_iters=1000)
        return NumericsConfig.for_dispersion(s, **overrides)

    def stem(self, command: str) -> str:
        return f"{command}_{self.model.value}_s{self.s:g}_p{self.p:g}_c{self.c:g}"

    def to_dict(self) -> dict:
        return {**asdict(self), "model": self.model.value, "format": self.format.value}


CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def _coerce(key: str, value):
    """Config-file and environment values to the RunConfig field types"""
    try:
        if value is None:
            return None
        if key == "model":
            return ModelChoice(str(value).lower())
        if key == "format":
            return OutputFormat(str(value).lower())
        if key in ("n", "workers"):
            return int(value)
        if key in ("s", "p", "c", "half_length", "tol"):
            return float(value)
        return str(value)
    except ValueError as err:
        raise ConfigError(f"bad value {value!r} for {key}: {err}") from err


def load_config_file(path: str) -> dict:
    try:
        raw = serialization.read_json(path)
    except (OSError, ValueError) as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(sorted(unknown))}")
    return {key: _coerce(key, value) for key, value in raw.items()}


def environment_settings(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    settings = {}
    if environ.get(ENV_OUTPUT_DIR):
        settings["output_dir"] = environ[ENV_OUTPUT_DIR]
    if environ.get(ENV_WORKERS):
        settings["workers"] = _coerce("workers", environ[ENV_WORKERS])
    return settings


def resolve_config(args: argparse.Namespace, environ=None) -> RunConfig:
    """Layer defaults, environment, --config file and flags, in increasing precedence"""
    settings = environment_settings(environ)
    if getattr(args, "config", None):
        settings.update(load_config_file(args.config))
    flags = {"model": args.model, "s": args.s, "p": args.p, "c": args.c, "n": args.n,
             "half_length": args.half_length, "tol": args.tol, "output_dir": args.out, "format": args.format,
             "workers": getattr(args, "workers", None)}
    settings.update({key: _coerce(key, value) for key, value in flags.items() if value is not None})
    config = replace(RunConfig(), **settings)
    if config.n is not None and (config.n < 8 or config.n % 2):
        raise ConfigError(f"--n must be an even integer >= 8, got {config.n}")
    if config.half_length is not None and config.half_length <= 0:
        raise ConfigError(f"--half-length must be positive, got {config.half_length}")
    if config.tol is not None and config.tol <= 0:
        raise ConfigError(f"--tol must be positive, got {config.tol}")
    if config.workers < 1:
        raise ConfigError(f"workers must be at least 1, got {config.workers}")
    return config


def _require(config: RunConfig, *names: str) -> None:
    missing = [name for name in names if getattr(config, name) is None]
    if missing:
        raise ConfigError(f"missing required setting(s): {', '.join('--' + name for name in missing)}")


def _require_wave_model(config: RunConfig) -> None:
    """fKdV/fBBM commands need (s, p) inside the existence window"""
    if config.model == ModelChoice.SCHRODINGER:
        raise ConfigError("this command needs --model fkdv or fbbm")
    _require(config, "s", "p")
    check_existence_window(config.s, config.p)


def _solve_wave(config: RunConfig):
    numerics = config.numerics()
    Q = solve_ground_state(config.s, config.p, numerics.grid(), numerics.solver)
    if config.model == ModelChoice.FBBM:
        return bbm_wave(Q, config.c)
    return kdv_wave(Q, config.c)


def _output_path(config: RunConfig, name: str) -> str:
    return os.path.join(config.output_dir, name)


def cmd_solve_wave(config: RunConfig) -> int:
    _require_wave_model(config)
    U = _solve_wave(config)
    csv_path, json_path = write_profile(U, config.output_dir, config.stem("wave"))
    logger.info("Wrote %s and %s", csv_path, json_path)
    print(f"residual={U.residual_norm:.3e} peak={U.peak:.6g} mass={U.mass():.10g}")
    if U.truncated:
        for warning in U.warnings:
            print(warning, file=sys.stderr)
        return EXIT_ACCURACY
    return EXIT_OK


def cmd_index(config: RunConfig) -> int:
    _require_wave_model(config)
    verdict_fn = bbm_verdict if config.model == ModelChoice.FBBM else kdv_verdict
    result = verdict_fn(config.s, config.p, config.c, config.numerics())
    path = _output_path(config, f"{config.stem('index')}.json")
    serialization.write_json(result, path)
    logger.info("Wrote %s", path)
    for note in result.diagnostics:
        print(note, file=sys.stderr)
    print(f"K_Ham={result.k_ham} verdict={result.verdict.value}")
    return EXIT_OK


def cmd_sweep(config: RunConfig, axis: SweepAxis, start: float, stop: float, steps: int) -> int:
    if config.model == ModelChoice.SCHRODINGER:
        raise ConfigError("sweep needs --model fkdv or fbbm")
    _require(config, *[name for name in ("s", "p", "c") if name != axis.value])
    model = WaveModel.FBBM if config.model == ModelChoice.FBBM else WaveModel.FKDV
    fixed = {"s": config.s, "p": config.p, "c": config.c}
    # an s-sweep needs per-point grid defaults unless the grid was set explicitly
    explicit_grid = config.n is not None or config.half_length is not None or config.tol is not None
    numerics = None
    if axis != SweepAxis.S or explicit_grid:
        numerics = config.numerics(config.s if config.s is not None else start)
    result = sweep(axis, start, stop, steps, fixed, model, numerics, config.workers)

    stem = f"sweep_{config.model.value}_{axis.value}_{start:g}_{stop:g}_{steps}"
    if config.format == OutputFormat.JSON:
        path = _output_path(config, f"{stem}.json")
        serialization.write_json(result, path)
    else:
        path = _output_path(config, f"{stem}.csv")
        serialization.write_csv(result.to_frame(), path)
    logger.info("Wrote %s", path)
    print(result.summary_line())
    if any(pt.error_type == TheoryConsistencyError.__name__ for pt in result.points):
        return EXIT_THEORY
    return EXIT_OK


def _hamiltonian_matrix(config: RunConfig):
    """The matrix whose ∂_x-Hamiltonian spectrum the spectrum command reports, and its kind"""
    if config.model == ModelChoice.SCHRODINGER:
        grid = config.numerics(2.0).grid()
        V = field_from_function(grid, lambda x: 2.0 / np.cosh(x) ** 2)
        return schrodinger_operator(V, config.c).assemble(), HamiltonianKind.KDV
    U = _solve_wave(config)
    if config.model == ModelChoice.FBBM:
        return bbm_symmetrize(bbm_linearization(U)), HamiltonianKind.BBM
    return kdv_linearization(U).assemble(), HamiltonianKind.KDV


def _spectrum_stem(config: RunConfig) -> str:
    if config.model == ModelChoice.SCHRODINGER:
        return f"spectrum_schrodinger_c{config.c:g}"
    return config.stem("spectrum")


def cmd_spectrum(config: RunConfig) -> int:
    if config.model != ModelChoice.SCHRODINGER:
        _require_wave_model(config)
    matrix, kind = _hamiltonian_matrix(config)
    spectrum = hamiltonian_spectrum(matrix, kind)
    classification = classify_spectrum(spectrum)

    stem = _spectrum_stem(config)
    if config.format == OutputFormat.JSON:
        path = _output_path(config, f"{stem}.json")
        serialization.write_json({**classification.to_dict(), "config": config.to_dict(),
                                  "eigenvalues": classification.to_frame().to_dict(orient="records")}, path)
    else:
        path = _output_path(config, f"{stem}.csv")
        serialization.write_csv(classification.to_frame(), path)
    logger.info("Wrote %s", path)
    print(f"k_r={classification.k_r} k_c={classification.k_c} k_i_minus={classification.k_i_minus} "
          f"K_Ham={classification.k_ham}")
    return EXIT_OK


def cmd_dump_operator(config: RunConfig, which: str, eps: float) -> int:
    if config.model == ModelChoice.SCHRODINGER:
        grid = config.numerics(2.0).grid()
        L = schrodinger_operator(field_from_function(grid, lambda x: 2.0 / np.cosh(x) ** 2), config.c)
        stem = f"operator_schrodinger_c{config.c:g}_{which}"
    else:
        _require_wave_model(config)
        U = _solve_wave(config)
        L = bbm_linearization(U) if config.model == ModelChoice.FBBM else kdv_linearization(U)
        stem = f"{config.stem('operator')}_{which}"

    if which == "sandwich":
        matrix = sandwich(L, eps)
        stem = f"{stem}_eps{eps:g}"
    elif which == "symmetrized":
        if config.model != ModelChoice.FBBM:
            raise ConfigError("--which symmetrized applies to --model fbbm only")
        matrix = bbm_symmetrize(L)
    else:
        matrix = L.assemble()
    path, header_path = write_operator(matrix, config.output_dir, stem)
    logger.info("Wrote %s and %s", path, header_path)
    print(f"order={matrix.order} label={matrix.label}")
    return EXIT_OK


def cmd_self_check(case: str) -> int:
    report = self_check(case)
    print(report.table())
    return EXIT_OK if report.passed else EXIT_NUMERICAL


class UsageExitParser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this CLI reserves 2 for accuracy warnings"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", choices=[m.value for m in ModelChoice], default=None)
    parser.add_argument("--s", type=float, default=None, help="Dispersion order")
    parser.add_argument("--p", type=float, default=None, help="Nonlinearity power")
    parser.add_argument("--c", type=float, default=None, help="Wave speed")
    parser.add_argument("--n", type=int, default=None, help="Number of grid points")
    parser.add_argument("--half-length", type=float, default=None, help="Grid covers [-half_length, half_length)")
    parser.add_argument("--tol", type=float, default=None, help="Wave solver residual tolerance")
    parser.add_argument("--out", default=None, help=f"Output directory (env {ENV_OUTPUT_DIR})")
    parser.add_argument("--config", default=None, help="JSON file with settings; flags override it")
    parser.add_argument("--format", choices=[f.value for f in OutputFormat], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = UsageExitParser(prog="krein-index", description="Hamiltonian-Krein index of fKdV/fBBM solitary waves")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=UsageExitParser)

    p_wave = sub.add_parser("solve-wave", help="Solve for a solitary wave and write its profile")
    _add_common(p_wave)

    p_index = sub.add_parser("index", help="Index formula and direct spectral counts for one wave")
    _add_common(p_index)

    p_sweep = sub.add_parser("sweep", help="Verdicts along one parameter, with the flip bracket")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", choices=[a.value for a in SweepAxis], required=True)
    p_sweep.add_argument("--start", type=float, required=True)
    p_sweep.add_argument("--stop", type=float, required=True)
    p_sweep.add_argument("--steps", type=int, required=True)
    p_sweep.add_argument("--workers", type=int, default=None, help=f"Process pool size (env {ENV_WORKERS})")

    p_spectrum = sub.add_parser("spectrum", help="Classified Hamiltonian eigenvalues, for scatter plots")
    _add_common(p_spectrum)

    p_dump = sub.add_parser("dump-operator", help="Dense operator matrix as raw float64 plus a JSON header")
    _add_common(p_dump)
    p_dump.add_argument("--which", choices=["L", "sandwich", "symmetrized"], default="L")
    p_dump.add_argument("--eps", type=float, default=0.0, help="Regularization of the sandwich")

    p_check = sub.add_parser("self-check", help="Run the theory-consistency assertions on a named case")
    p_check.add_argument("case", help=f"One of: {', '.join(sorted(SELF_CHECK_CASES))}")
    return parser


def run(args: argparse.Namespace, environ=None) -> int:
    if args.command == "self-check":
        if args.case not in SELF_CHECK_CASES:
            raise ConfigError(f"unknown self-check case {args.case!r}; known: {', '.join(sorted(SELF_CHECK_CASES))}")
        return cmd_self_check(args.case)

    config = resolve_config(args, environ)
    os.makedirs(config.output_dir, exist_ok=True)
    logger.debug("Resolved config %s", config.to_dict())
    if args.command == "solve-wave":
        return cmd_solve_wave(config)
    if args.command == "index":
        return cmd_index(config)
    if args.command == "sweep":
        if args.steps < 0:
            raise ConfigError(f"--steps must be >= 0, got {args.steps}")
        return cmd_sweep(config, SweepAxis(args.axis), args.start, args.stop, args.steps)
    if args.command == "spectrum":
        return cmd_spectrum(config)
    return cmd_dump_operator(config, args.which, args.eps)


def main(argv: list[str] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as err:
        print(f"krein-index: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except TheoryConsistencyError as err:
        print(f"krein-index: theory-consistency failure: {err}", file=sys.stderr)
        return EXIT_THEORY
    except (KreinIndexError, ValueError) as err:
        print(f"krein-index: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
