"""Configuration-driven experiment runner.

An experiment is one YAML file::

    problem:
      kind: pagerank          # linear | pagerank | poisson | bratu
      n: 2000
      alpha: 0.99
    seed: 0
    tol: 1.0e-7
    max_g_evals: 10000
    output: {path: runs.csv, format: csv}
    methods:
      - PlainFixedPoint
      - method: RAA
        window: 7
        reg: {kind: gcv}

Methods are given by name or as a mapping of :class:`MethodConfig` fields;
``reg`` is a mapping with ``kind`` (fixed, grid, gcv), ``value`` and ``grid``.
The experiment-level ``tol``, ``max_g_evals`` and ``seed`` apply to every
method. ``SHANKS_OUT_DIR`` redirects the output file into another directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import inspect
import logging
import os
import sys
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .drivers import METHODS, MethodConfig, RunRecord, Status, run_method
from .errors import ConfigError, ShanksError
from .problems import (
    FixedPointProblem,
    ingest_matrix_market,
    make_bratu_problem,
    make_nonlinear_poisson_problem,
    make_pagerank_problem,
    random_linear_problem,
    random_stochastic_matrix,
)
from .records import FORMATS, emit_records
from .regularization import RegularizationPolicy

log = logging.getLogger(__name__)

OUT_DIR_ENV = "SHANKS_OUT_DIR"


def _build_linear(rng, p: int = 10, spectral_radius: float = 0.9):
    return random_linear_problem(int(p), float(spectral_radius), rng)


def _build_pagerank(
    rng,
    n: int = 2000,
    nnz_per_col: int = 10,
    alpha: float = 0.99,
    matrix: str | None = None,
    start: str = "point",
    communities: int = 100,
    block_shift: int = 50,
    cross_fraction: float = 0.0005,
    dangling_fraction: float = 0.001,
):
    if matrix is not None:
        S = ingest_matrix_market(matrix)
    else:
        S = random_stochastic_matrix(
            int(n), int(nnz_per_col), rng,
            communities=int(communities),
            cross_fraction=float(cross_fraction),
            dangling_fraction=float(dangling_fraction),
            block_shift=int(block_shift),
        )
    if start == "point":
        u0 = np.zeros(S.n)
        u0[0] = 1.0
    elif start == "uniform":
        u0 = None
    else:
        raise ConfigError(f"must be 'point' or 'uniform', got {start!r}", "problem.start")
    return make_pagerank_problem(S, float(alpha), u0)


def _build_poisson(rng, grid_n: int = 32, variant: str = "q1u2"):
    return make_nonlinear_poisson_problem(int(grid_n), variant)


def _build_bratu(rng, grid_n: int = 32, lambda_b: float = 1.0):
    return make_bratu_problem(int(grid_n), float(lambda_b))


PROBLEMS = {
    "linear": _build_linear,
    "pagerank": _build_pagerank,
    "poisson": _build_poisson,
    "bratu": _build_bratu,
}


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.kind!r}; choose from {', '.join(PROBLEMS)}", "problem.kind")
        allowed = set(inspect.signature(PROBLEMS[self.kind]).parameters) - {"rng"}
        for key in self.params:
            if key not in allowed:
                raise ConfigError(f"unknown parameter for {self.kind}", f"problem.{key}")

    def build(self, seed: int) -> FixedPointProblem:
        """Construct the problem; the same seed always gives the same problem."""
        return PROBLEMS[self.kind](np.random.default_rng(seed), **self.params)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    methods: tuple[MethodConfig, ...]
    tol: float = 1e-7
    max_g_evals: int = 10_000
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    parallel: int = 1

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("at least one method is required", "methods")
        if not (self.tol > 0 and np.isfinite(self.tol)):
            raise ConfigError(f"must be positive, got {self.tol}", "tol")
        if self.max_g_evals < 1:
            raise ConfigError("must be at least 1", "max_g_evals")
        if self.seed < 0:
            raise ConfigError("must be non-negative", "seed")
        if self.format not in FORMATS:
            raise ConfigError(f"must be csv or json, got {self.format!r}", "output.format")
        if self.parallel < 1:
            raise ConfigError("must be at least 1", "parallel")
        # experiment-wide settings win over anything given per method
        methods = tuple(m.with_(tol=self.tol, max_g_evals=self.max_g_evals, seed=self.seed) for m in self.methods)
        object.__setattr__(self, "methods", methods)

    def with_seed(self, seed: int) -> ExperimentConfig:
        return dataclasses.replace(self, seed=seed)


_METHOD_FIELDS = {f.name for f in dataclasses.fields(MethodConfig)} - {"metric", "strategy", "reg"}
_TOP_KEYS = {"problem", "methods", "tol", "max_g_evals", "seed", "output", "parallel"}


def _policy(raw, path: str) -> RegularizationPolicy:
    if not isinstance(raw, dict):
        raise ConfigError("must be a mapping with 'kind'", path)
    unknown = set(raw) - {"kind", "value", "grid"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", path)
    try:
        return RegularizationPolicy(
            raw.get("kind", "fixed"),
            float(raw.get("value", 0.0)),
            **({"grid": tuple(float(g) for g in raw["grid"])} if "grid" in raw else {}),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from exc


def _method(raw, path: str) -> MethodConfig:
    if isinstance(raw, str):
        raw = {"method": raw}
    if not isinstance(raw, dict) or "method" not in raw:
        raise ConfigError("must be a method name or a mapping with 'method'", path)
    kwargs = {}
    for key, value in raw.items():
        if key == "reg":
            kwargs["reg"] = _policy(value, f"{path}.reg")
        elif key in _METHOD_FIELDS:
            kwargs[key] = value
        else:
            raise ConfigError("unknown method field", f"{path}.{key}")
    try:
        return MethodConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], f"{path}.{exc.path}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from exc


def parse_config(data: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from already-parsed YAML."""
    if not isinstance(data, dict):
        raise ConfigError("experiment must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError("unknown key", sorted(unknown)[0])
    problem = data.get("problem")
    if not isinstance(problem, dict) or "kind" not in problem:
        raise ConfigError("must be a mapping with 'kind'", "problem")
    params = {k: v for k, v in problem.items() if k != "kind"}
    methods = data.get("methods") or []
    if not isinstance(methods, list):
        raise ConfigError("must be a list", "methods")
    output = data.get("output") or {}
    if not isinstance(output, dict) or set(output) - {"path", "format"}:
        raise ConfigError("must be a mapping with 'path' and/or 'format'", "output")
    try:
        return ExperimentConfig(
            problem=ProblemSpec(problem["kind"], params),
            methods=tuple(_method(m, f"methods.{i}") for i, m in enumerate(methods)),
            tol=float(data.get("tol", 1e-7)),
            max_g_evals=int(data.get("max_g_evals", 10_000)),
            seed=int(data.get("seed", 0)),
            out=output.get("path"),
            format=output.get("format", "csv"),
            parallel=int(data.get("parallel", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}", str(path)) from exc
    return parse_config(data)


def _run_one(cfg: ExperimentConfig, mcfg: MethodConfig, timing: bool) -> RunRecord:
    problem = cfg.problem.build(cfg.seed)
    rec = run_method(problem, mcfg)
    if not timing:
        rec.wall_ms = 0.0
    return rec


def run_experiment(
    cfg: ExperimentConfig,
    errors: list[tuple[str, Exception]] | None = None,
    timing: bool = False,
) -> list[RunRecord]:
    """Run every method of ``cfg`` on its own copy of the problem.

    Each method rebuilds the problem from ``cfg.seed``, so runs do not share
    state and may execute in parallel (``cfg.parallel`` threads). Records come
    back in configuration order. A method whose problem or run raises is left
    out and its exception appended to ``errors`` (or logged when ``errors`` is
    ``None``); the other methods still run. Wall-clock times are zeroed unless
    ``timing`` is set, which keeps serialized records bit-reproducible.
    """

    def task(mcfg):
        try:
            return _run_one(cfg, mcfg, timing)
        except (ShanksError, ValueError, ArithmeticError) as exc:
            return exc

    if cfg.parallel > 1 and len(cfg.methods) > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallel) as pool:
            outcomes = list(pool.map(task, cfg.methods))
    else:
        outcomes = [task(m) for m in cfg.methods]

    records = []
    for mcfg, out in zip(cfg.methods, outcomes):
        if isinstance(out, Exception):
            if errors is None:
                log.error("%s failed: %s", mcfg.method, out)
            else:
                errors.append((mcfg.method, out))
        else:
            records.append(out)
    return records


def resolve_out_path(cli_out: str | None, cfg: ExperimentConfig) -> Path:
    path = Path(cli_out or cfg.out or f"runs.{cfg.format}")
    out_dir = os.environ.get(OUT_DIR_ENV)
    if out_dir:
        path = Path(out_dir) / path.name
    return path


def exit_code(records: Sequence[RunRecord], failed: bool = False) -> int:
    if any(r.status is Status.DIVERGED for r in records):
        return 2
    if failed or not records or any(r.status is not Status.CONVERGED for r in records):
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shanks-accel", description="Run fixed-point acceleration experiments.")
    ap.add_argument("--config", help="experiment YAML file")
    ap.add_argument("--out", help="output file (default: from config, else runs.<format>)")
    ap.add_argument("--format", choices=FORMATS, help="record format (default: from config, else csv)")
    ap.add_argument("--seed", type=int, help="override the experiment seed")
    ap.add_argument("--list-methods", action="store_true", help="print the available methods and exit")
    ap.add_argument("--timing", action="store_true", help="record wall-clock times (breaks bit-reproducibility)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.list_methods:
        print("\n".join(METHODS))
        return 0
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("must be an unsigned 64-bit integer", "seed")
            cfg = cfg.with_seed(args.seed)
        if args.format:
            cfg = dataclasses.replace(cfg, format=args.format)
        errors: list[tuple[str, Exception]] = []
        records = run_experiment(cfg, errors, timing=args.timing)
        for method, exc in errors:
            print(f"error: {method}: {exc}", file=sys.stderr)
        if records:
            path = emit_records(records, resolve_out_path(args.out, cfg), cfg.format)
            log.info("wrote %d records to %s", len(records), path)
        for r in records:
            print(f"{r.method:16s} {r.status.value:16s} {r.g_eval_count:6d} evals  last residual {r.residuals[-1] if r.residuals else float('nan'):.3e}")
        return exit_code(records, failed=bool(errors))
    except ShanksError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
