"""Cross-validation of the tableau engine against the dense oracle, plus the
symmetry-persistence check on the subsystem-symmetric lines."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import oracle
from .ensemble import derive_seed
from .lattice import CHECK_TYPES, CheckSampler, LatticeSpec, MixChances, initial_for_mix, symmetry_operators
from .observables import Correlations, entanglement_entropy_bits
from .tableau import MeasureEffect, PauliSupport, SectorTableau, contains_operator, measure_check

ORACLE_MIXES = ((0.0, 0.0), (0.5, 0.0), (0.5, 0.5), (0.25, 0.1))
SYMMETRY_MIXES = ((0.25, 0.0), (0.5, 0.0), (0.75, 0.0), (0.5, 1.0))


@dataclass
class Mismatch:
    suite: str
    mix: tuple
    seed: int
    step: int
    quantity: str
    engine: object
    reference: object
    check: str = ""
    generators: dict = field(default_factory=dict)

    def describe(self) -> str:
        lines = [
            f"[{self.suite}] mix={self.mix} seed={self.seed} step={self.step} check={self.check}",
            f"  {self.quantity}: engine={self.engine} reference={self.reference}",
        ]
        for basis, rows in self.generators.items():
            lines.append(f"  {basis} generators: {rows}")
        return "\n".join(lines)


@dataclass
class VerifyReport:
    passed: bool
    steps: int
    elapsed: float
    failure: Mismatch | None = None


def _dump(t: SectorTableau) -> dict:
    return {"X": t.supports("X"), "Z": t.supports("Z")}


def oracle_trajectory(
    L: int,
    mix: tuple,
    seed: int,
    n_steps: int,
    measure: Callable[[SectorTableau, PauliSupport], MeasureEffect] = measure_check,
) -> tuple[int, Mismatch | None]:
    """Replay one random check sequence on both engines, comparing every step.

    Compared at each step: NoOp/Updated against the oracle's eigenstate test,
    squared X/Y/Z correlators on all pairs, and the entropy of every subset.
    Returns the number of steps compared and the first mismatch, if any.
    """
    spec = LatticeSpec(L)
    m = MixChances(*mix)
    n = spec.n_sites
    rng = np.random.default_rng(seed)
    t = initial_for_mix(spec, m)
    state = oracle.from_generators(n, t.supports("X"), t.supports("Z"), rng=rng)
    kinds, _, sa, sb = CheckSampler(spec, m).draw(rng, n_steps)

    pairs = list(itertools.combinations(range(n), 2))
    pair_ops = [(basis, a, b) for a, b in pairs for basis in "XYZ"]
    subsets = [s for r in range(1, n) for s in itertools.combinations(range(n), r)]
    subset_arrays = [np.array(s, dtype=np.int64) for s in subsets]
    batch = oracle.BatchEvaluator(n, [oracle.pair_operator(*op) for op in pair_ops], subsets)

    def compare(step: int, check: str) -> Mismatch | None:
        corr = Correlations(t)
        refs = np.rint(batch.expectations_sq(state)).astype(int)
        for (basis, a, b), ref in zip(pair_ops, refs):
            got = corr.pair(a, b, basis)
            if got != ref:
                return Mismatch("oracle", mix, seed, step, f"<{basis}{a} {basis}{b}>^2", got, int(ref), check, _dump(t))
        ents = batch.renyi2_bits(state)
        for sub, arr, ref in zip(subsets, subset_arrays, ents):
            got = entanglement_entropy_bits(t, arr)
            if abs(got - ref) > 1e-9:
                return Mismatch("oracle", mix, seed, step, f"S{list(sub)}", got, round(float(ref), 12), check, _dump(t))
        return None

    bad = compare(0, "initial")
    if bad:
        return 0, bad
    for step in range(n_steps):
        basis, orient = CHECK_TYPES[int(kinds[step])]
        s = PauliSupport(basis, (int(sa[step]), int(sb[step])))
        label = f"{basis}{basis}-{orient}{tuple(sorted(s.sites))}"
        in_group = oracle.expectation_sq(state, s) > 0.5
        effect = measure(t, s)
        if (effect is MeasureEffect.NOOP) != in_group:
            ref = MeasureEffect.NOOP if in_group else MeasureEffect.UPDATED
            return step + 1, Mismatch("oracle", mix, seed, step + 1, "effect", effect.value, ref.value, label, _dump(t))
        state = oracle.project_measure(state, s, rng=rng)
        bad = compare(step + 1, label)
        if bad:
            return step + 1, bad
    return n_steps, None


def symmetry_trajectory(L: int, mix: tuple, seed: int, n_steps: int, measure=measure_check):
    """Every symmetry operator present initially must stay in the group."""
    spec = LatticeSpec(L)
    m = MixChances(*mix)
    rng = np.random.default_rng(seed)
    t = initial_for_mix(spec, m)
    ops = [op for op in symmetry_operators(spec, m) if contains_operator(t, op)]
    kinds, _, sa, sb = CheckSampler(spec, m).draw(rng, n_steps)
    for step in range(n_steps):
        basis, _ = CHECK_TYPES[int(kinds[step])]
        measure(t, PauliSupport(basis, (int(sa[step]), int(sb[step]))))
        for op in ops:
            if not contains_operator(t, op):
                return step + 1, Mismatch(
                    "symmetry", mix, seed, step + 1, f"{op.basis} on {sorted(op.sites)}", False, True
                )
    return n_steps, None


def run_verify(
    n_seeds: int = 20,
    n_steps: int = 1000,
    mixes=ORACLE_MIXES,
    master_seed: int = 2024,
    measure=measure_check,
    symmetry_L: int = 6,
    symmetry_steps: int = 400,
) -> VerifyReport:
    """Oracle equivalence on L=2 for every (mix, seed), then symmetry persistence."""
    t0 = time.perf_counter()
    total = 0
    for mix in mixes:
        for k in range(n_seeds):
            seed = derive_seed(master_seed, 2, *mix, k)
            done, bad = oracle_trajectory(2, mix, seed, n_steps, measure)
            total += done
            if bad:
                return VerifyReport(False, total, time.perf_counter() - t0, bad)
    for mix in SYMMETRY_MIXES:
        for k in range(max(1, n_seeds // 5)):
            seed = derive_seed(master_seed, symmetry_L, *mix, k)
            done, bad = symmetry_trajectory(symmetry_L, mix, seed, symmetry_steps, measure)
            total += done
            if bad:
                return VerifyReport(False, total, time.perf_counter() - t0, bad)
    return VerifyReport(True, total, time.perf_counter() - t0)
