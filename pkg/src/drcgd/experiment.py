"""
Experiment configuration, orchestration and CSV telemetry.

Config files are flat ``key=value`` documents, one pair per line, with
``#`` comments. Missing keys take the defaults of :class:`ExperimentConfig`
and :class:`~drcgd.solvers.SolverConfig`; unknown keys are rejected.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .diagnostics import t_thresholds
from .errors import DrcgdError, ParseError, SchemaMismatch, UnknownColumn, ValidationError
from .network import build_complete, build_erdos_renyi, build_ring, metropolis_weights
from .problems import GlobalProblem, SyntheticSpec, estimate_constants, generate_synthetic, load_matrix
from .seeding import derive_seed
from .solvers import IterationRecord, RunAborted, SolverConfig, independent_init, run, shared_init
from .stiefel import diameter_bound

CSV_COLUMNS = ("k", "alpha", "consensus_error", "mean_sq_consensus", "grad_norm",
               "objective_gap", "ds", "wall_seconds")
ABSENT_TEXT = "absent"
GRAPH_KINDS = ("ring", "er", "complete")
INIT_MODES = ("shared", "independent")


class ExperimentError(DrcgdError, RuntimeError):
    """Runtime failure during :func:`execute`, tagged with the phase it happened in."""

    def __init__(self, phase: str, cause: Exception):
        self.phase = phase
        super().__init__(f"{phase}: {cause}")


@dataclass(frozen=True)
class ExperimentConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    graph_kind: str = "ring"
    er_p: float | None = None
    n: int = 16
    d: int = 10
    r: int = 5
    m_per_agent: int = 1000
    eigengap: float = 0.8
    sigma0: float | None = 1.0
    data_path: str | None = None
    normalize_255: bool = False
    seed: int = 0
    output_path: str = "results.csv"
    init: str = "shared"

    def problems(self) -> list[str]:
        found = []
        if self.graph_kind not in GRAPH_KINDS:
            found.append(f"graph_kind must be one of {GRAPH_KINDS}, got {self.graph_kind!r}")
        if self.graph_kind == "er" and self.er_p is None:
            found.append("er_p is required when graph_kind=er")
        if self.graph_kind != "er" and self.er_p is not None:
            found.append("er_p is only allowed when graph_kind=er")
        if self.er_p is not None and not 0 < self.er_p <= 1:
            found.append(f"er_p must lie in (0, 1], got {self.er_p}")
        if self.graph_kind == "ring" and self.n < 3:
            found.append(f"a ring needs n >= 3, got n={self.n}")
        if self.init not in INIT_MODES:
            found.append(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if self.n < 1:
            found.append("n must be positive")
        if self.r < 1:
            found.append("r must be positive")
        if self.data_path is None:
            found.extend(self.synthetic_spec().problems())
        return found

    def __post_init__(self):
        found = self.problems()
        if found:
            raise ValidationError(found)

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(n=self.n, m_per_agent=self.m_per_agent, d=self.d, r=self.r,
                             eigengap=self.eigengap, sigma0=self.sigma0,
                             seed=derive_seed(self.seed, "data"))


# key -> (owner, kind); owner "solver" routes the key into SolverConfig
_KEYS: dict[str, tuple[str, str]] = {
    "variant": ("solver", "str"),
    "t": ("solver", "int"),
    "schedule": ("solver", "str"),
    "alpha_hat": ("solver", "float"),
    "max_epochs": ("solver", "int"),
    "tol_ds": ("solver", "float"),
    "beta_cap": ("solver", "float"),
    "gamma": ("solver", "float"),
    "graph_kind": ("experiment", "str"),
    "er_p": ("experiment", "float?"),
    "n": ("experiment", "int"),
    "d": ("experiment", "int"),
    "r": ("experiment", "int"),
    "m_per_agent": ("experiment", "int"),
    "eigengap": ("experiment", "float"),
    "sigma0": ("experiment", "sigma0"),
    "data_path": ("experiment", "str?"),
    "normalize_255": ("experiment", "bool"),
    "seed": ("experiment", "int"),
    "output_path": ("experiment", "str"),
    "init": ("experiment", "str"),
}

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _convert(kind: str, raw: str) -> Any:
    if kind == "int":
        return int(raw)
    if kind in ("float", "float?"):
        return float(raw)
    if kind == "sigma0":
        return None if raw.lower() == "auto" else float(raw)
    if kind == "bool":
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """
    Parse a ``key=value`` document into a validated :class:`ExperimentConfig`.

    Raises :class:`ParseError` (with line number and key) for malformed lines,
    unknown or repeated keys and unconvertible values, and
    :class:`ValidationError` listing every violated invariant.
    """
    solver_kw: dict[str, Any] = {}
    exp_kw: dict[str, Any] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ParseError(f"unknown key {key!r}", line=lineno, key=key)
        owner, kind = _KEYS[key]
        target = solver_kw if owner == "solver" else exp_kw
        if key in target:
            raise ParseError(f"duplicate key {key!r}", line=lineno, key=key)
        try:
            target[key] = _convert(kind, value)
        except ValueError as exc:
            raise ParseError(f"bad value for {key!r}: {exc}", line=lineno, key=key) from None
    return build_config(solver_kw, exp_kw)


def build_config(solver_kw: dict[str, Any], exp_kw: dict[str, Any]) -> ExperimentConfig:
    problems: list[str] = []
    try:
        solver = SolverConfig(**solver_kw)
    except ValidationError as exc:
        problems.extend(exc.problems)
        solver = SolverConfig()
    try:
        config = ExperimentConfig(solver=solver, **exp_kw)
    except ValidationError as exc:
        problems.extend(exc.problems)
    if problems:
        raise ValidationError(problems)
    return config


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_items(config: ExperimentConfig) -> list[tuple[str, str]]:
    """Normalized ``(key, value)`` pairs in canonical order; unset optionals are omitted."""
    items = []
    for key, (owner, _) in _KEYS.items():
        value = getattr(config.solver if owner == "solver" else config, key)
        if key == "sigma0" and value is None:
            items.append((key, "auto"))
        elif value is not None:
            items.append((key, _format_value(value)))
    return items


def serialize_config(config: ExperimentConfig) -> str:
    return "".join(f"{k}={v}\n" for k, v in config_items(config))


def with_overrides(config: ExperimentConfig, **changes: Any) -> ExperimentConfig:
    """Copy ``config`` replacing any experiment or solver field by name."""
    solver_changes = {k: v for k, v in changes.items() if k in _KEYS and _KEYS[k][0] == "solver"}
    exp_changes = {k: v for k, v in changes.items() if k not in solver_changes}
    unknown = [k for k in exp_changes if k not in _KEYS]
    if unknown:
        raise ValidationError([f"unknown key {k!r}" for k in unknown])
    solver = dataclasses.replace(config.solver, **solver_changes)
    return dataclasses.replace(config, solver=solver, **exp_changes)


def build_problem(config: ExperimentConfig) -> GlobalProblem:
    if config.data_path is not None:
        return load_matrix(config.data_path, config.normalize_255, config.n,
                           derive_seed(config.seed, "partition"), r=config.r)
    return generate_synthetic(config.synthetic_spec())


def build_graph(config: ExperimentConfig):
    if config.graph_kind == "ring":
        return build_ring(config.n)
    if config.graph_kind == "complete":
        return build_complete(config.n)
    return build_erdos_renyi(config.n, config.er_p, derive_seed(config.seed, "graph"))


def _format_metric(value: float) -> str:
    return ABSENT_TEXT if math.isnan(value) else repr(float(value))


def write_records(path: str | Path, records: Sequence[IterationRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([rec.k] + [_format_metric(getattr(rec, c)) for c in CSV_COLUMNS[1:]])


def read_records(path: str | Path) -> tuple[list[str], list[dict[str, str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        rows = [dict(zip(header, row)) for row in reader if row]
    return header, rows


def execute(config: ExperimentConfig, *, workers: int = 1) -> Path:
    """
    Run one experiment end to end and return the CSV path.

    Alongside the CSV it writes ``<csv>.meta.json`` (resolved config,
    sigma2, smoothness constants, theoretical gossip-round thresholds) and
    ``<csv>.edges`` (the communication graph as an edge list).
    """
    out = Path(config.output_path)
    try:
        graph = build_graph(config)
        W = metropolis_weights(graph)
    except DrcgdError as exc:
        raise ExperimentError("graph", exc) from exc
    try:
        problem = build_problem(config)
    except (DrcgdError, OSError) as exc:
        raise ExperimentError("problem", exc) from exc
    make_init = shared_init if config.init == "shared" else independent_init
    init = make_init(problem.n, problem.d, problem.r, config.seed)

    L, L_f, L_g = estimate_constants(problem)
    solver = config.solver
    meta = {
        "config": dict(config_items(config)),
        "sigma2": W.sigma2,
        "L": L,
        "L_f": L_f,
        "L_g": L_g,
        "t_configured": solver.t,
        "t_thresholds": t_thresholds(W.sigma2, problem.n, solver.gamma, solver.beta_cap,
                                     diameter_bound(problem.r)),
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    graph.save(out.with_name(out.name + ".edges"))
    try:
        records = run(solver, problem, W, init, workers=workers)
    except RunAborted as exc:
        write_records(out, exc.records)
        meta["aborted"] = str(exc)
        _write_meta(out, meta)
        raise ExperimentError("run", exc) from exc
    write_records(out, records)
    meta["epochs_recorded"] = len(records)
    _write_meta(out, meta)
    return out


def _write_meta(out: Path, meta: dict) -> None:
    out.with_name(out.name + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                                       encoding="utf-8")


def first_below(path: str | Path, metric: str, threshold: float) -> int | None:
    """First epoch ``k`` with ``metric <= threshold``, or None if it never gets there."""
    header, rows = read_records(path)
    if tuple(header) != CSV_COLUMNS:
        raise SchemaMismatch(f"{path}: header {header} does not match {list(CSV_COLUMNS)}")
    if metric not in header:
        raise UnknownColumn(metric)
    for row in rows:
        value = row[metric]
        if value != ABSENT_TEXT and float(value) <= threshold:
            return int(row["k"])
    return None


def compare(csv_paths: Sequence[str | Path], metric: str, threshold: float) -> list[tuple[str, int | None]]:
    """For each run, the first epoch at which ``metric`` reaches ``threshold`` (None = never)."""
    if metric not in CSV_COLUMNS:
        raise UnknownColumn(metric)
    return [(str(p), first_below(p, metric, threshold)) for p in csv_paths]
