"""Square-lattice geometry, check sampling and the symmetric initial state.

Site ``(i, j)`` (row ``i``, column ``j``) has index ``i * L + j``.  Horizontal
bonds join ``(i, j)`` and ``(i, j + 1)``; vertical bonds join ``(i, j)`` and
``(i + 1, j)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .tableau import X, Z, PauliSupport, SectorTableau

HORIZONTAL = "h"
VERTICAL = "v"
PERIODIC = "periodic"
OPEN = "open"

# Check types in sampling order: (basis, orientation).
CHECK_TYPES = ((X, HORIZONTAL), (Z, VERTICAL), (Z, HORIZONTAL), (X, VERTICAL))


@dataclass(frozen=True)
class LatticeSpec:
    L: int
    boundary: str = PERIODIC

    def __post_init__(self):
        if not isinstance(self.L, (int, np.integer)) or self.L < 2:
            raise ValueError(f"L must be an integer >= 2, got {self.L!r}")
        if self.L % 2:
            raise ValueError("L must be even")
        if self.boundary not in (PERIODIC, OPEN):
            raise ValueError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")

    @property
    def n_sites(self) -> int:
        return self.L * self.L

    def site(self, i: int, j: int) -> int:
        return (i % self.L) * self.L + (j % self.L)

    def coords(self, s: int) -> tuple[int, int]:
        return divmod(int(s), self.L)

    @cached_property
    def _bond_arrays(self) -> dict[str, np.ndarray]:
        L = self.L
        i, j = np.meshgrid(np.arange(L), np.arange(L), indexing="ij")
        i, j = i.ravel(), j.ravel()
        if self.boundary == PERIODIC:
            h = np.stack([i * L + j, i * L + (j + 1) % L], axis=1)
            v = np.stack([i * L + j, ((i + 1) % L) * L + j], axis=1)
        else:
            hm, vm = j < L - 1, i < L - 1
            h = np.stack([i[hm] * L + j[hm], i[hm] * L + j[hm] + 1], axis=1)
            v = np.stack([i[vm] * L + j[vm], (i[vm] + 1) * L + j[vm]], axis=1)
        h.setflags(write=False)
        v.setflags(write=False)
        return {HORIZONTAL: h, VERTICAL: v}

    def bonds(self, orientation: str) -> np.ndarray:
        return self._bond_arrays[orientation]


def bonds(spec: LatticeSpec) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Horizontal and vertical bonds as site pairs."""
    return (
        [tuple(map(int, b)) for b in spec.bonds(HORIZONTAL)],
        [tuple(map(int, b)) for b in spec.bonds(VERTICAL)],
    )


@dataclass(frozen=True)
class MixChances:
    """Measurement mix: ``p1`` weights Z checks, ``p2`` weights the
    symmetry-breaking orientation (horizontal ZZ, vertical XX)."""

    p1: float
    p2: float

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def probabilities(self) -> np.ndarray:
        """Probabilities of ``CHECK_TYPES``: XX-h, ZZ-v, ZZ-h, XX-v."""
        p1, p2 = self.p1, self.p2
        return np.array([(1 - p1) * (1 - p2), p1 * (1 - p2), p1 * p2, (1 - p1) * p2])


@dataclass(frozen=True)
class CheckOp:
    basis: str
    bond: tuple[int, int]
    orientation: str

    def support(self) -> PauliSupport:
        return PauliSupport(self.basis, self.bond)


class CheckSampler:
    """Vectorised check draws for one (lattice, mix) pair."""

    def __init__(self, spec: LatticeSpec, mix: MixChances):
        self.spec = spec
        self.mix = mix
        self.cdf = np.cumsum(mix.probabilities())
        self.cdf[-1] = 1.0
        h, v = spec.bonds(HORIZONTAL), spec.bonds(VERTICAL)
        self._pairs = (h, v, h, v)
        self._nb = np.array([len(h), len(v), len(h), len(v)], dtype=np.int64)
        self._is_z = np.array([basis == Z for basis, _ in CHECK_TYPES])

    def draw(self, rng: np.random.Generator, n: int):
        """``n`` checks as (type index, is_z, site_a, site_b) arrays."""
        kind = np.searchsorted(self.cdf, rng.random(n), side="right")
        kind = np.minimum(kind, 3)
        u = rng.random(n)
        idx = np.minimum((u * self._nb[kind]).astype(np.int64), self._nb[kind] - 1)
        a = np.empty(n, dtype=np.int64)
        b = np.empty(n, dtype=np.int64)
        for k in range(4):
            sel = kind == k
            if sel.any():
                pairs = self._pairs[k][idx[sel]]
                a[sel], b[sel] = pairs[:, 0], pairs[:, 1]
        return kind, self._is_z[kind], a, b


def sample_check(spec: LatticeSpec, mix: MixChances, rng: np.random.Generator) -> CheckOp:
    kind, _, a, b = CheckSampler(spec, mix).draw(rng, 1)
    basis, orient = CHECK_TYPES[int(kind[0])]
    return CheckOp(basis, (int(a[0]), int(b[0])), orient)


def initial_tableau(spec: LatticeSpec, rotated: bool = False) -> SectorTableau:
    """Column-GHZ state: ZZ on every vertical pair within a column and the
    X product down each column.

    With ``rotated`` the construction is turned by 90 degrees (row-GHZ),
    which is the eigenstate needed on the ``p2 = 1`` symmetry line.
    """
    L = spec.L
    site = (lambda a, b: spec.site(b, a)) if rotated else spec.site
    z_rows = [(site(i, j), site(i + 1, j)) for i in range(L - 1) for j in range(L)]
    x_rows = [[site(i, j) for i in range(L)] for j in range(L)]
    return SectorTableau(spec.n_sites, x_rows=x_rows, z_rows=z_rows)


def initial_for_mix(spec: LatticeSpec, mix: MixChances) -> SectorTableau:
    return initial_tableau(spec, rotated=(mix.p2 == 1.0))


def global_operators(spec: LatticeSpec) -> list[PauliSupport]:
    every = range(spec.n_sites)
    return [PauliSupport(X, every), PauliSupport(Z, every)]


def symmetry_operators(spec: LatticeSpec, mix: MixChances) -> list[PauliSupport]:
    """Pauli strings commuting with every check that can occur at ``mix``."""
    L = spec.L
    ops = global_operators(spec)
    if mix.p2 not in (0.0, 1.0):
        return ops
    site = spec.site if mix.p2 == 0.0 else (lambda a, b: spec.site(b, a))
    # single-column X logicals and adjacent double-row Z stabilizers
    for j in range(L):
        ops.append(PauliSupport(X, [site(i, j) for i in range(L)]))
    for i in range(L - 1):
        ops.append(PauliSupport(Z, [site(i, j) for j in range(L)] + [site(i + 1, j) for j in range(L)]))
    return ops
