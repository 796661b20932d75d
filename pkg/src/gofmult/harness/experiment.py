"""Factorial Monte Carlo level/power studies.

Every (n, dataset) pair draws its sample from its own substream, and every
(n, dataset, family, statistic, method) test draws its resampling weights or
bootstrap samples from another, so each cell can be recomputed in isolation
and results do not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..errors import FIT_ERRORS, ReplicateFailure
from ..estimation import FitConfig
from ..gof import DEFAULT_GRID, gof_test, normalize_statistic
from ..registry import get_family
from ..rng import stream

DATA_STREAM, TEST_STREAM = 0, 1


@dataclass
class ExperimentConfig:
    """Design of a level/power study.

    ``true_params`` is the parameter vector of ``true_family`` used to
    simulate data; ``hypothesized`` lists family identifiers to test.
    """

    true_family: str
    true_params: list
    hypothesized: list
    n_grid: list
    dim: int = 1
    reps: int = 500
    N: int = 250
    statistics: list = field(default_factory=lambda: ["Sn*"])
    methods: list = field(default_factory=lambda: ["MP"])
    level: float = 0.05
    seed: int = 1
    threads: int = 1
    analytic: bool = False
    grid_size: int = DEFAULT_GRID

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        self.statistics = [normalize_statistic(s) for s in self.statistics]
        self.methods = [m.upper() for m in self.methods]
        for m in self.methods:
            if m not in ("MP", "PB"):
                raise ValueError(f"unknown method {m!r}")
        self.n_grid = [int(n) for n in self.n_grid]
        self.true_params = [float(v) for v in self.true_params]
        truth = get_family(self.true_family, self.dim)
        truth.check(self.true_params)
        for h in self.hypothesized:
            get_family(h, self.dim)

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".toml":
            if sys.version_info >= (3, 11):
                import tomllib
            else:
                import tomli as tomllib
            return cls.from_dict(tomllib.loads(text))
        return cls.from_dict(json.loads(text))


@dataclass
class Cell:
    family: str
    n: int
    statistic: str
    method: str
    rejections: int = 0
    reps: int = 0
    failures: int = 0
    total_time: float = 0.0
    pvalues: list = field(default_factory=list, repr=False)

    @property
    def rate(self):
        return self.rejections / self.reps if self.reps else float("nan")

    @property
    def std_error(self):
        r = self.rate
        return math.sqrt(r * (1.0 - r) / self.reps) if self.reps else float("nan")

    @property
    def mean_time(self):
        return self.total_time / self.reps if self.reps else float("nan")

    @property
    def column(self):
        return f"{self.family}:{self.statistic}:{self.method}"


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    cells: list
    wall_time: float = 0.0

    def cell(self, family, n, statistic, method):
        for c in self.cells:
            if (c.family, c.n, c.statistic, c.method) == (family, n, normalize_statistic(statistic), method.upper()):
                return c
        raise KeyError((family, n, statistic, method))

    def table(self):
        """Rows (true family, n) by columns family:statistic:method, rates in percent."""
        columns = []
        for c in self.cells:
            if c.column not in columns:
                columns.append(c.column)
        rows = []
        for n in self.config.n_grid:
            row = {"true": self.config.true_family, "n": n}
            for c in self.cells:
                if c.n == n:
                    row[c.column] = round(100.0 * c.rate, 4)
            rows.append(row)
        return ["true", "n"] + columns, rows

    def write(self, out_dir, stem="experiment"):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        header, rows = self.table()
        with open(out / f"{stem}.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=header)
            writer.writeheader()
            writer.writerows(rows)
        manifest = {
            "config": asdict(self.config),
            "versions": {
                "gofmult": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "wall_time": self.wall_time,
            "cells": [
                {
                    "family": c.family,
                    "n": c.n,
                    "statistic": c.statistic,
                    "method": c.method,
                    "rejections": c.rejections,
                    "reps": c.reps,
                    "rate": c.rate,
                    "std_error": c.std_error,
                    "mean_time": c.mean_time,
                    "failures": c.failures,
                }
                for c in self.cells
            ],
        }
        (out / f"{stem}.json").write_text(json.dumps(manifest, indent=2))
        return out / f"{stem}.csv", out / f"{stem}.json"


def simulate_dataset(config, n_index, rep):
    truth = get_family(config.true_family, config.dim)
    n = config.n_grid[n_index]
    return truth.sample(np.array(config.true_params), n, stream(config.seed, DATA_STREAM, n_index, rep))


def _run_dataset(config, n_index, rep, fit_config):
    """All tests on one simulated dataset; returns a list of (key, pvalue or None, seconds)."""
    data = simulate_dataset(config, n_index, rep)
    out = []
    for h_index, h in enumerate(config.hypothesized):
        family = get_family(h, config.dim)
        for s_index, stat in enumerate(config.statistics):
            for m_index, method in enumerate(config.methods):
                key = (h, config.n_grid[n_index], stat, method)
                seed_rng = stream(config.seed, TEST_STREAM, n_index, rep, h_index, s_index, m_index)
                t0 = time.perf_counter()
                try:
                    res = gof_test(family, data, stat, method, config.N, rng=seed_rng,
                                   config=fit_config, m=config.grid_size)
                    p = res.pvalue
                except (*FIT_ERRORS, ReplicateFailure):
                    p = None
                out.append((key, p, time.perf_counter() - t0))
    return out


def run_experiment(config: ExperimentConfig, out_dir=None, progress=None):
    """Run the full factorial design.

    Per-test fit failures are counted in the cell and the run continues; the
    rejection rate is computed over the successful tests.
    """
    t0 = time.perf_counter()
    fit_config = FitConfig(use_analytic_grads=config.analytic)
    cells = {}
    for n in config.n_grid:
        for h in config.hypothesized:
            for stat in config.statistics:
                for method in config.methods:
                    cells[(h, n, stat, method)] = Cell(h, n, stat, method)
    tasks = [(i, r) for i in range(len(config.n_grid)) for r in range(config.reps)]

    def work(task):
        return _run_dataset(config, task[0], task[1], fit_config)

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = []
        for k, task in enumerate(tasks):
            results.append(work(task))
            if progress is not None:
                progress(k + 1, len(tasks))
    # aggregation in task order keeps the stored p-value lists reproducible
    for result in results:
        for key, p, seconds in result:
            cell = cells[key]
            cell.total_time += seconds
            if p is None:
                cell.failures += 1
                continue
            cell.reps += 1
            cell.pvalues.append(p)
            if p <= config.level:
                cell.rejections += 1
    report = ExperimentReport(config, list(cells.values()), time.perf_counter() - t0)
    if out_dir is not None:
        report.write(out_dir)
    return report
