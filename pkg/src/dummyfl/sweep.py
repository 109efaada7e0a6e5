"""Flat key-value experiment configs, sweeps over them, and CSV output.

Config files hold one ``key = value`` per line; ``#`` starts a comment.
The sweep axes ``rule``, ``attack``, ``p``, ``alpha`` and ``seed`` accept
comma-separated lists and the sweep runs their Cartesian product.
"""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .attacks import AttackConfig
from .errors import ConfigurationError
from .simulation import ExperimentConfig, RoundMetrics, run_round, setup

log = logging.getLogger(__name__)

AXES = ("rule", "attack", "p", "alpha", "seed")

METRICS_COLUMNS = ("run_id", "rule", "attack", "p", "alpha", "beta", "seed", "round",
                   "test_acc", "test_err", "excluded_devices")
SUMMARY_COLUMNS = ("run_id", "rule", "attack", "p", "alpha", "beta", "seed",
                   "min_test_err", "rounds_run", "status")


def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _bool(v):
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _auto_int(v):
    return None if v.lower() == "auto" else int(v)


def _auto_float(v):
    return None if v.lower() == "auto" else float(v)


def _int_tuple(v):
    return tuple(int(x) for x in v.split(",") if x.strip())


SCALARS = {
    "num_devices": _int,
    "rounds": _int,
    "local_epochs": _int,
    "batch_size": _int,
    "lr": _float,
    "beta": _auto_int,
    "lam": _auto_float,
    "eta": _float,
    "fang_discard": str,
    "dummy_count": _int,
    "regenerate_dummies": _bool,
    "anchor_lag": _int,
    "num_classes": _int,
    "per_class": _int,
    "input_dim": _int,
    "hidden_dims": _int_tuple,
    "server_per_class": _int,
}
AXIS_TYPES = {"rule": str, "attack": str, "p": _float, "alpha": _float, "seed": _int}

_DEFAULT_EXPERIMENT = ExperimentConfig()
DEFAULT_AXES = {
    "rule": (_DEFAULT_EXPERIMENT.rule,),
    "attack": ("none",),
    "p": (_DEFAULT_EXPERIMENT.p,),
    "alpha": (_DEFAULT_EXPERIMENT.alpha,),
    "seed": (_DEFAULT_EXPERIMENT.seed,),
}


@dataclass(frozen=True)
class SweepPoint:
    config: ExperimentConfig | None
    axes: dict
    error: str | None = None

    @property
    def run_id(self) -> str:
        payload = asdict(self.config) if self.config is not None else dict(self.axes, error=self.error)
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha1(blob).hexdigest()[:12]

    @property
    def beta(self):
        return "" if self.config is None else self.config.resolved_beta


@dataclass
class SweepSpec:
    base: dict = field(default_factory=dict)
    axes: dict = field(default_factory=lambda: dict(DEFAULT_AXES))

    def __len__(self) -> int:
        return int(np.prod([len(self.axes[a]) for a in AXES]))

    def points(self) -> list[SweepPoint]:
        out = []
        for values in itertools.product(*(self.axes[a] for a in AXES)):
            ax = dict(zip(AXES, values))
            try:
                out.append(SweepPoint(build_config(self.base, ax), ax))
            except ConfigurationError as exc:
                out.append(SweepPoint(None, ax, str(exc)))
        return out


def build_config(base: dict, axes: dict) -> ExperimentConfig:
    base = dict(base)
    attack = AttackConfig(axes["attack"], lam=base.pop("lam", None), eta=base.pop("eta", 10.0))
    return ExperimentConfig(attack=attack, rule=axes["rule"], p=axes["p"], alpha=axes["alpha"],
                            seed=axes["seed"], **base)


def _parse_line(line: str, where: str) -> tuple[str, str] | None:
    line = line.split("#", 1)[0].strip()
    if not line:
        return None
    if "=" not in line:
        raise ConfigurationError(f"{where}: expected 'key = value', got {line!r}")
    key, value = (part.strip() for part in line.split("=", 1))
    if not key:
        raise ConfigurationError(f"{where}: missing key")
    return key, value


def _apply(spec: SweepSpec, key: str, value: str, where: str) -> None:
    try:
        if key in AXIS_TYPES:
            items = [v.strip() for v in value.split(",") if v.strip()]
            if not items:
                raise ValueError("empty list")
            spec.axes[key] = tuple(AXIS_TYPES[key](v) for v in items)
        elif key in SCALARS:
            spec.base[key] = SCALARS[key](value)
        else:
            known = ", ".join(sorted([*AXIS_TYPES, *SCALARS]))
            raise ConfigurationError(f"{where}: unknown key {key!r} (known keys: {known})")
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"{where}: bad value for {key!r}: {value!r} ({exc})") from None


def parse_config(path: str | os.PathLike | None, overrides: Iterable[str] = ()) -> SweepSpec:
    """Read a config file (or nothing) and apply ``key=value`` overrides."""
    spec = SweepSpec()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigurationError(f"config file not found: {p}")
        for lineno, line in enumerate(p.read_text().splitlines(), 1):
            parsed = _parse_line(line, f"{p}:{lineno}")
            if parsed:
                _apply(spec, *parsed, f"{p}:{lineno}")
    for item in overrides:
        parsed = _parse_line(item, f"--set {item!r}")
        if parsed:
            _apply(spec, *parsed, f"--set {item!r}")
    points = spec.points()
    if all(p.config is None for p in points):
        raise ConfigurationError(points[0].error)
    return spec


@dataclass
class RunResult:
    point: SweepPoint
    metrics: list[RoundMetrics]
    status: str


def execute_point(point: SweepPoint) -> RunResult:
    if point.config is None:
        return RunResult(point, [], f"skipped: {point.error}")
    metrics: list[RoundMetrics] = []
    try:
        state = setup(point.config)
        for g_e in range(point.config.rounds):
            model, m = run_round(state, g_e)
            if not np.all(np.isfinite(model.theta)):
                raise FloatingPointError(f"global model became non-finite in round {g_e}")
            metrics.append(m)
    except (FloatingPointError, ArithmeticError, ValueError) as exc:
        log.error("run %s failed: %s", point.run_id, exc)
        return RunResult(point, metrics, f"failed: {exc}")
    return RunResult(point, metrics, "ok")


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _prefix(point: SweepPoint) -> list[str]:
    ax = point.axes
    return [point.run_id, ax["rule"], ax["attack"], _fmt(ax["p"]), _fmt(ax["alpha"]), str(point.beta), str(ax["seed"])]


def metric_rows(result: RunResult) -> list[list[str]]:
    pre = _prefix(result.point)
    return [pre + [str(m.round), _fmt(m.test_accuracy), _fmt(m.test_error),
                   ";".join(str(i) for i in m.excluded_devices)]
            for m in result.metrics]


def summary_row(result: RunResult) -> list[str]:
    best = min((m.test_error for m in result.metrics), default=None)
    return _prefix(result.point) + ["" if best is None else _fmt(best), str(len(result.metrics)), result.status]


def _write_atomic(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def run_sweep(spec: SweepSpec, out_dir: str | os.PathLike, jobs: int = 1) -> int:
    """Run every point and write ``metrics.csv``, ``summary.csv`` and ``runs/*.csv``.

    Returns the process exit status: 0 when every point ran, 2 when no
    point had a valid configuration, 3 when some points were skipped or failed.
    """
    out = Path(out_dir)
    points = spec.points()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(execute_point, points))
    else:
        results = [execute_point(p) for p in points]

    all_rows = []
    for r in results:
        rows = metric_rows(r)
        if r.point.config is not None:
            _write_atomic(out / "runs" / f"{r.point.run_id}.csv", METRICS_COLUMNS, rows)
        all_rows.extend(rows)
    _write_atomic(out / "metrics.csv", METRICS_COLUMNS, all_rows)
    _write_atomic(out / "summary.csv", SUMMARY_COLUMNS, [summary_row(r) for r in results])

    if all(r.point.config is None for r in results):
        return 2
    if any(r.status != "ok" for r in results):
        return 3
    return 0
