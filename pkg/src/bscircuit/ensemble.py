"""Trajectory driver, seeded ensembles and parameter sweeps.

Seeds: every random stream is derived with :func:`derive_seed`, which folds
its integer/float arguments through the SplitMix64 finalizer::

    h = 0
    for part in parts:
        h = splitmix64(h XOR word(part))

where ``word`` is the value itself for integers (mod 2**64) and the IEEE-754
bit pattern for floats.  A grid point gets ``derive_seed(master, L, p1, p2)``
and run ``k`` at that point gets ``derive_seed(point_seed, k)``; the run seed
initialises a numpy PCG64 generator.
"""

from __future__ import annotations

import dataclasses
import math
import os
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .lattice import CheckSampler, LatticeSpec, MixChances, initial_for_mix
from .observables import PROFILE_KEYS, ObservableRecord, observe

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _word(part) -> int:
    if isinstance(part, (float, np.floating)):
        v = float(part) + 0.0  # folds -0.0 into 0.0
        return struct.unpack("<Q", struct.pack("<d", v))[0]
    return int(part) & MASK64


def derive_seed(*parts) -> int:
    h = 0
    for p in parts:
        h = splitmix64(h ^ _word(p))
    return h


def default_threads() -> int:
    return os.cpu_count() or 1


@dataclass(frozen=True)
class RunConfig:
    spec: LatticeSpec
    mix: MixChances
    total_steps_factor: float = 100
    burn_in_factor: float = 50
    sample_stride_factor: float = 1
    n_runs: int = 32
    master_seed: int = 0
    profiles: bool = True

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be at least 1")
        if self.stride < 1:
            raise ValueError("sample stride must be at least one step")
        if not 0 <= self.burn_in < self.total_steps:
            raise ValueError("burn-in must be shorter than the run")

    @property
    def total_steps(self) -> int:
        return int(round(self.total_steps_factor * self.spec.n_sites))

    @property
    def burn_in(self) -> int:
        return int(round(self.burn_in_factor * self.spec.n_sites))

    @property
    def stride(self) -> int:
        return int(round(self.sample_stride_factor * self.spec.n_sites))

    @property
    def samples_per_run(self) -> int:
        return (self.total_steps - self.burn_in) // self.stride

    @property
    def point_seed(self) -> int:
        return derive_seed(self.master_seed, self.spec.L, float(self.mix.p1), float(self.mix.p2))

    def run_seed(self, run_index: int) -> int:
        return derive_seed(self.point_seed, run_index)

    def at(self, p1: float, p2: float, L: int | None = None) -> "RunConfig":
        spec = self.spec if L is None else LatticeSpec(int(L), self.spec.boundary)
        return dataclasses.replace(self, spec=spec, mix=MixChances(float(p1), float(p2)))

    def echo(self) -> dict:
        return {
            "L": self.spec.L,
            "boundary": self.spec.boundary,
            "p1": self.mix.p1,
            "p2": self.mix.p2,
            "total_steps_factor": self.total_steps_factor,
            "burn_in_factor": self.burn_in_factor,
            "sample_stride_factor": self.sample_stride_factor,
            "n_runs": self.n_runs,
            "master_seed": self.master_seed,
            "samples_per_run": self.samples_per_run,
        }


def _advance(tab, sampler: CheckSampler, rng: np.random.Generator, n_steps: int, block: int) -> None:
    while n_steps > 0:
        k = min(block, n_steps)
        _, is_z, a, b = sampler.draw(rng, k)
        tab.apply_checks(is_z, a, b)
        n_steps -= k


def final_state(config: RunConfig, run_index: int = 0):
    """Tableau of run ``run_index`` after ``total_steps`` measurements."""
    spec = config.spec
    rng = np.random.default_rng(config.run_seed(run_index))
    tab = initial_for_mix(spec, config.mix)
    _advance(tab, CheckSampler(spec, config.mix), rng, config.total_steps, spec.n_sites)
    return tab


def run_trajectory(config: RunConfig, run_index: int) -> ObservableRecord:
    """Time-averaged observables of one trajectory after burn-in.

    Per-sample scalar values are kept in ``record.series`` for steady-state
    diagnostics.
    """
    spec = config.spec
    rng = np.random.default_rng(config.run_seed(run_index))
    tab = initial_for_mix(spec, config.mix)
    sampler = CheckSampler(spec, config.mix)
    block = spec.n_sites

    _advance(tab, sampler, rng, config.burn_in, block)
    records = []
    for _ in range(config.samples_per_run):
        _advance(tab, sampler, rng, config.stride, block)
        records.append(observe(tab, spec, profiles=config.profiles))

    series = {k: np.array([getattr(r, k) for r in records]) for k in ObservableRecord.SCALARS}
    rec = ObservableRecord(**{k: float(v.mean()) for k, v in series.items()})
    if config.profiles:
        rec.profiles = {k: np.mean([r.profiles[k] for r in records], axis=0) for k in PROFILE_KEYS}
    rec.series = series
    rec.n_samples = len(records)
    return rec


@dataclass
class EnsembleStats:
    config: RunConfig
    mean: dict
    err: dict
    profile_mean: dict
    profile_err: dict
    per_run: dict  # observable -> array of per-run time averages
    samples: int
    zero_df: bool
    wall_time: float
    half_means: dict = field(default_factory=dict)

    def value(self, key: str) -> tuple[float, float]:
        return self.mean[key], self.err[key]

    def metadata(self) -> dict:
        return {
            **self.config.echo(),
            "samples": self.samples,
            "zero_df": self.zero_df,
            "cadence": "each run contributes one time average over samples_per_run samples; "
            "errors are standard errors across runs",
        }


def _mean_err(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values, dtype=float)
    mean = values.mean(axis=0)
    if values.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])


def aggregate(config: RunConfig, records: list[ObservableRecord], wall_time: float = 0.0) -> EnsembleStats:
    """Combine per-run records (in run order) into means and standard errors."""
    per_run = {k: np.array([getattr(r, k) for r in records]) for k in ObservableRecord.SCALARS}
    mean, err = {}, {}
    for k, v in per_run.items():
        m, e = _mean_err(v)
        mean[k], err[k] = float(m), float(e)
    pm, pe = {}, {}
    if config.profiles and records and records[0].profiles:
        for k in PROFILE_KEYS:
            pm[k], pe[k] = _mean_err(np.stack([r.profiles[k] for r in records]))
    halves = {}
    if records and getattr(records[0], "series", None):
        for k in ObservableRecord.SCALARS:
            first, second = [], []
            for r in records:
                s = r.series[k]
                h = len(s) // 2
                if h == 0:
                    break
                first.append(s[:h].mean())
                second.append(s[h:].mean())
            if first:
                halves[k] = (_mean_err(first), _mean_err(second))
    return EnsembleStats(
        config=config,
        mean=mean,
        err=err,
        profile_mean=pm,
        profile_err=pe,
        per_run=per_run,
        samples=sum(getattr(r, "n_samples", 1) for r in records),
        zero_df=len(records) < 2,
        wall_time=wall_time,
        half_means=halves,
    )


def run_ensemble(config: RunConfig, threads: int | None = None) -> EnsembleStats:
    """Run ``config.n_runs`` independent trajectories; order-independent result."""
    t0 = time.perf_counter()
    threads = threads or default_threads()
    indices = range(config.n_runs)
    if threads > 1 and config.n_runs > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda k: run_trajectory(config, k), indices))
    else:
        records = [run_trajectory(config, k) for k in indices]
    return aggregate(config, records, time.perf_counter() - t0)


def sweep(
    grid: Iterable[tuple[float, float, int]],
    template: RunConfig,
    threads: int | None = None,
    sink: Callable[[EnsembleStats], None] | None = None,
) -> list[EnsembleStats]:
    """One ensemble per (p1, p2, L) grid point; ``sink`` sees each as it finishes."""
    points = list(grid)
    if not points:
        raise ValueError("empty sweep grid")
    out = []
    for p1, p2, L in points:
        stats = run_ensemble(template.at(p1, p2, L), threads)
        if sink is not None:
            sink(stats)
        out.append(stats)
    return out
