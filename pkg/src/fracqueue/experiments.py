"""Monte Carlo drivers for estimator bias, dispersion and interval coverage.

Replicate ``r`` of sample size index ``j`` in grid cell ``c`` draws from
``RngStream(seed, stream_id(c, j, r))``. The mapping is fixed, so serial and
parallel runs give identical tables.

Data designs
------------
* ``linear_bd``: one path started at ``m = n`` (unless ``initial_state`` is
  set) and observed for ``n`` events. Starting that high rules out
  extinction before ``n`` events.
* ``mm1``: one queue path started at ``initial_state`` (default 0) and run
  until it has ``n`` sojourns in states ``k >= 1`` when state-0 sojourns are
  excluded, or ``n`` sojourns in total otherwise.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import FracQueueError, ParameterError
from .estimate import LINEAR, MM1, fit_linear_bd, fit_mm1
from .rng import RngStream
from .sim import ModelParams, StopRule, extract_sojourns, simulate_linear_bd, simulate_mm1

log = logging.getLogger(__name__)

PARAM_NAMES = ("alpha", "lambda", "mu")


def stream_id(cell: int, size_index: int, replicate: int) -> int:
    """Substream for one replicate: ``cell << 40 | size_index << 32 | replicate``."""
    if not (0 <= replicate < 2 ** 32 and 0 <= size_index < 256 and 0 <= cell < 2 ** 24):
        raise ParameterError("experiment too large for the stream-id layout")
    return (cell << 40) | (size_index << 32) | replicate


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    grid: tuple
    sample_sizes: tuple = (100, 1000, 10000)
    replicates: int = 1000
    level: float = 0.95
    seed: int = 42
    output_path: Optional[str] = None
    exclude_zero_state: bool = True
    initial_state: Optional[int] = None
    sigma_theta: str = "effective"
    workers: int = 1

    def __post_init__(self):
        if self.model not in (LINEAR, MM1):
            raise ParameterError(f"model must be {LINEAR!r} or {MM1!r}, got {self.model!r}")
        grid = tuple(tuple(float(v) for v in cell) for cell in self.grid)
        if not grid or any(len(cell) != 3 for cell in grid):
            raise ParameterError("grid must be a non-empty list of (alpha, lambda, mu)")
        object.__setattr__(self, "grid", grid)
        sizes = tuple(int(n) for n in self.sample_sizes)
        if not sizes or min(sizes) < 3:
            raise ParameterError("sample sizes must be at least 3")
        object.__setattr__(self, "sample_sizes", sizes)
        if self.replicates < 1:
            raise ParameterError("replicates must be at least 1")
        if not 0.0 < self.level <= 1.0:
            raise ParameterError("level must lie in (0, 1]")
        if self.workers < 1:
            raise ParameterError("workers must be at least 1")
        if self.sigma_theta not in ("effective", "regression"):
            raise ParameterError(f"unknown sigma_theta form {self.sigma_theta!r}")
        for cell in grid:
            ModelParams(*cell)

    def meta(self) -> dict:
        return {
            "model": self.model,
            "replicates": self.replicates,
            "level": self.level,
            "seed": self.seed,
            "exclude_zero_state": self.exclude_zero_state if self.model == MM1 else None,
            "initial_state": self.initial_state,
            "sigma_theta": self.sigma_theta if self.model == LINEAR else None,
        }


def simulate_sojourns(model: str, params: ModelParams, n: int, stream: RngStream,
                      exclude_zero_state: bool = True):
    """Sojourn data for one replicate under the designs described above."""
    if model == LINEAR:
        path = simulate_linear_bd(params, stream, StopRule(max_events=n))
    else:
        path = simulate_mm1(params, stream, StopRule(max_events=n, count_zero_state=not exclude_zero_state))
    return extract_sojourns(path)


def fit(model: str, data, level: float, exclude_zero_state: bool = True, sigma_theta: str = "effective"):
    if model == LINEAR:
        return fit_linear_bd(data, level, sigma_theta=sigma_theta)
    return fit_mm1(data, level, exclude_zero_state)


@dataclass(frozen=True)
class _Task:
    config: ExperimentConfig
    cell: int
    size_index: int
    start: int
    stop: int


def _run_task(task: _Task):
    cfg = task.config
    alpha, lam, mu = cfg.grid[task.cell]
    n = cfg.sample_sizes[task.size_index]
    m0 = cfg.initial_state if cfg.initial_state is not None else (n if cfg.model == LINEAR else 0)
    params = ModelParams(alpha, lam, mu, m0)
    truth = (alpha, lam, mu)
    out = []
    for r in range(task.start, task.stop):
        stream = RngStream(cfg.seed, stream_id(task.cell, task.size_index, r))
        try:
            data = simulate_sojourns(cfg.model, params, n, stream, cfg.exclude_zero_state)
            est = fit(cfg.model, data, cfg.level, cfg.exclude_zero_state, cfg.sigma_theta)
        except FracQueueError as exc:
            out.append((r, None, f"{exc.code}: {exc}"))
            continue
        point = (est.alpha_hat, est.lambda_hat, est.mu_hat)
        cis = (est.ci_alpha, est.ci_lambda, est.ci_mu)
        covered = tuple(lo <= v <= hi for v, (lo, hi) in zip(truth, cis))
        out.append((r, (point, covered), None))
    return task.cell, task.size_index, out


def _replicate_results(cfg: ExperimentConfig):
    """Per (cell, size) list of replicate results sorted by replicate index."""
    tasks = []
    chunk = max(1, math.ceil(cfg.replicates / (4 * cfg.workers)))
    for c in range(len(cfg.grid)):
        for j in range(len(cfg.sample_sizes)):
            for start in range(0, cfg.replicates, chunk):
                tasks.append(_Task(cfg, c, j, start, min(start + chunk, cfg.replicates)))
    if cfg.workers == 1:
        results = map(_run_task, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=cfg.workers)
        results = list(pool.map(_run_task, tasks))
        pool.shutdown()
    grouped = {}
    for c, j, out in results:
        grouped.setdefault((c, j), []).extend(out)
    for key in grouped:
        grouped[key].sort(key=lambda item: item[0])
        for r, res, err in grouped[key]:
            if err is not None:
                log.warning("cell %d size %d replicate %d failed: %s", key[0], key[1], r, err)
    return grouped


def _row_base(cfg, c, j):
    alpha, lam, mu = cfg.grid[c]
    return {"model": cfg.model, "alpha": alpha, "lambda": lam, "mu": mu, "n": cfg.sample_sizes[j]}


def run_bias_cv_experiment(config: ExperimentConfig) -> list[dict]:
    """Percent bias and CV of the point estimators per grid cell and sample size.

    ``bias_pct = 100 |mean - truth| / truth`` and ``cv_pct = 100 sd / mean``
    (sample sd, ``None`` when fewer than two replicates succeed).
    """
    grouped = _replicate_results(config)
    rows = []
    for (c, j), reps in sorted(grouped.items()):
        ok = [res for _, res, err in reps if err is None]
        truth = config.grid[c]
        pts = np.array([res[0] for res in ok]) if ok else np.empty((0, 3))
        for k, name in enumerate(PARAM_NAMES):
            row = _row_base(config, c, j)
            row["parameter"] = name
            row["truth"] = truth[k]
            if ok:
                mean = float(np.mean(pts[:, k]))
                row["mean"] = mean
                row["bias_pct"] = 100.0 * abs(mean - truth[k]) / truth[k]
                row["cv_pct"] = 100.0 * float(np.std(pts[:, k], ddof=1)) / mean if len(ok) > 1 else None
            else:
                row["mean"] = row["bias_pct"] = row["cv_pct"] = None
            row["n_ok"] = len(ok)
            row["n_failed"] = len(reps) - len(ok)
            rows.append(row)
    return rows


def run_coverage_experiment(config: ExperimentConfig) -> list[dict]:
    """Share of replicates whose intervals contain the true parameter."""
    grouped = _replicate_results(config)
    rows = []
    for (c, j), reps in sorted(grouped.items()):
        ok = [res for _, res, err in reps if err is None]
        truth = config.grid[c]
        for k, name in enumerate(PARAM_NAMES):
            row = _row_base(config, c, j)
            row["parameter"] = name
            row["truth"] = truth[k]
            row["level"] = config.level
            row["coverage"] = float(np.mean([res[1][k] for res in ok])) if ok else None
            row["n_ok"] = len(ok)
            row["n_failed"] = len(reps) - len(ok)
            rows.append(row)
    return rows
