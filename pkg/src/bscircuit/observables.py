"""Correlators, order parameters, entropies and site classification.

For a state in this model ``<X_a X_b>^2`` is 1 exactly when ``a`` and ``b``
have identical columns in the Z sector (no Z generator separates them), and
0 otherwise; Z correlators use the X sector the same way.  Everything below
is built on those column labels and on truncated ranks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .lattice import PERIODIC, LatticeSpec
from .tableau import X, Z, SectorTableau, column_classes, restricted_rank_count, site_array

Y = "Y"
ROW = "row"
COLUMN = "column"

GRAY, X_SITE, Z_SITE, BOTH = 0, 1, 2, 3
SITE_NAMES = {GRAY: "gray", X_SITE: "X-site", Z_SITE: "Z-site", BOTH: "both"}

PROFILE_KEYS = ("X_row", "X_col", "Z_row", "Z_col", "Y_row", "Y_col")


@dataclass
class CorrelationProfile:
    basis: str
    direction: str
    values: np.ndarray  # values[d - 1] for separation d = 1..L/2

    @property
    def deltas(self) -> np.ndarray:
        return np.arange(1, len(self.values) + 1)


@dataclass
class ObservableRecord:
    Xr: float
    Xc: float
    Zr: float
    Zc: float
    entropy_bits: float
    x_site_density: float
    z_site_density: float
    profiles: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    n_samples: int = 1

    SCALARS = ("Xr", "Xc", "Zr", "Zc", "entropy_bits", "x_site_density", "z_site_density")

    def scalars(self) -> dict:
        return {k: getattr(self, k) for k in self.SCALARS}


@dataclass
class SnapshotGrid:
    L: int
    classes: np.ndarray  # (L, L) int codes: GRAY, X_SITE, Z_SITE, BOTH

    @property
    def x_site_density(self) -> float:
        return float(np.mean((self.classes == X_SITE) | (self.classes == BOTH)))

    @property
    def z_site_density(self) -> float:
        return float(np.mean((self.classes == Z_SITE) | (self.classes == BOTH)))


def _side(t: SectorTableau) -> int:
    L = math.isqrt(t.n_sites)
    if L * L != t.n_sites:
        raise ValueError("tableau does not describe a square lattice")
    return L


class Correlations:
    """Column-class labels of both sectors for one state."""

    def __init__(self, t: SectorTableau):
        self.n_sites = t.n_sites
        self.L = _side(t)
        # X correlations are decided by Z generators, and vice versa
        self.x_labels = column_classes(t.z_rows, t.n_sites)
        self.z_labels = column_classes(t.x_rows, t.n_sites)

    def pair(self, a: int, b: int, basis: str) -> int:
        if a == b:
            raise ValueError("two-point correlator needs distinct sites")
        xx = int(self.x_labels[a] == self.x_labels[b])
        zz = int(self.z_labels[a] == self.z_labels[b])
        if basis == X:
            return xx
        if basis == Z:
            return zz
        if basis == Y:
            return xx * zz
        raise ValueError(f"unknown basis {basis!r}")

    def indicator_grid(self, basis: str, shift: int, axis: int, periodic: bool = True) -> np.ndarray:
        """``<P_a P_b>^2`` for every site ``a`` and ``b = a`` shifted along ``axis``."""
        L = self.L
        out = np.ones((L, L), dtype=bool) if basis == Y else None
        for lab_basis, labels in ((X, self.x_labels), (Z, self.z_labels)):
            if basis not in (lab_basis, Y):
                continue
            g = labels.reshape(L, L)
            if periodic:
                eq = g == np.roll(g, -shift, axis=axis)
            else:
                eq = (g[:, : L - shift] == g[:, shift:]) if axis == 1 else (g[: L - shift] == g[shift:])
            out = eq if out is None else (out[: eq.shape[0], : eq.shape[1]] & eq)
        return out

    def profile(self, basis: str, direction: str, periodic: bool = True) -> CorrelationProfile:
        axis = 1 if direction == ROW else 0
        vals = np.array(
            [self.indicator_grid(basis, d, axis, periodic).mean() for d in range(1, self.L // 2 + 1)]
        )
        return CorrelationProfile(basis, direction, vals)

    def long_range(self, basis: str, direction: str, periodic: bool = True) -> float:
        axis = 1 if direction == ROW else 0
        return float(self.indicator_grid(basis, self.L // 2, axis, periodic).mean())


def two_point_sq(t: SectorTableau, a: int, b: int, basis: str) -> int:
    """Squared two-point correlator, 0 or 1."""
    return Correlations(t).pair(a, b, basis)


def long_range_order(t: SectorTableau, basis: str, direction: str, spec: LatticeSpec | None = None) -> float:
    periodic = spec is None or spec.boundary == PERIODIC
    return Correlations(t).long_range(basis, direction, periodic)


def correlation_profile(t: SectorTableau, basis: str, direction: str, spec: LatticeSpec | None = None) -> CorrelationProfile:
    periodic = spec is None or spec.boundary == PERIODIC
    return Correlations(t).profile(basis, direction, periodic)


def half_cut(L: int) -> np.ndarray:
    """Sites of the left half (columns 0..L/2-1)."""
    i, j = np.meshgrid(np.arange(L), np.arange(L // 2), indexing="ij")
    return (i * L + j).ravel()


def entanglement_entropy_bits(t: SectorTableau, cut_sites=None) -> int:
    """Renyi-2 (equivalently any Renyi) entropy of ``cut_sites`` in bits."""
    if cut_sites is None:
        cut_sites = half_cut(_side(t))
    rank, size = restricted_rank_count(t, cut_sites)
    return rank - size


def mutual_information_bits(t: SectorTableau, a: int, b: int) -> int:
    if a == b:
        raise ValueError("mutual information needs distinct sites")
    return (
        entanglement_entropy_bits(t, [a])
        + entanglement_entropy_bits(t, [b])
        - entanglement_entropy_bits(t, [a, b])
    )


def edwards_anderson(t: SectorTableau, basis: str, site_subset) -> float:
    """Mean squared correlator over all unordered pairs of ``site_subset``."""
    sites = np.unique(site_array(site_subset))
    m = sites.size
    if m < 2:
        raise ValueError("need at least two sites")
    c = Correlations(t)
    # pairs are correlated iff they share a label, so count within-label pairs
    if basis == Y:
        keys = c.x_labels[sites].astype(np.int64) * (c.n_sites + 1) + c.z_labels[sites]
    elif basis == X:
        keys = c.x_labels[sites]
    elif basis == Z:
        keys = c.z_labels[sites]
    else:
        raise ValueError(f"unknown basis {basis!r}")
    _, counts = np.unique(keys, return_counts=True)
    total = int(np.sum(counts * (counts - 1) // 2))
    return total / (m * (m - 1) / 2)


@njit(cache=True)
def _macroscopic(labels, n_labels, L, periodic):
    """Per label: does the class hold two sites at lattice distance >= L/2?"""
    order = np.argsort(labels, kind="mergesort")
    out = np.zeros(n_labels, dtype=np.bool_)
    half = L // 2
    start = 0
    n = labels.shape[0]
    while start < n:
        lab = labels[order[start]]
        stop = start
        while stop < n and labels[order[stop]] == lab:
            stop += 1
        found = False
        for p in range(start, stop):
            if found:
                break
            ia, ja = order[p] // L, order[p] % L
            for q in range(p + 1, stop):
                ib, jb = order[q] // L, order[q] % L
                di = abs(ia - ib)
                dj = abs(ja - jb)
                if periodic:
                    di = min(di, L - di)
                    dj = min(dj, L - dj)
                if di + dj >= half:
                    found = True
                    break
        out[lab] = found
        start = stop
    return out


def _long_range_sites(labels: np.ndarray, L: int, periodic: bool) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    n_labels = int(labels.max()) + 1
    macro = _macroscopic(labels, n_labels, L, periodic)
    return macro[labels]


def classify_sites(t: SectorTableau, spec: LatticeSpec) -> SnapshotGrid:
    """Label X-sites, Z-sites, both, or gray.

    An X-site lies in a macroscopic Z-sector column class: one containing a
    pair of sites at (Manhattan, periodic) distance at least L/2.  Such a
    class has at least two members by construction.
    """
    c = Correlations(t)
    periodic = spec.boundary == PERIODIC
    xs = _long_range_sites(c.x_labels, spec.L, periodic)
    zs = _long_range_sites(c.z_labels, spec.L, periodic)
    classes = np.full(spec.n_sites, GRAY, dtype=np.int8)
    classes[xs] = X_SITE
    classes[zs] = Z_SITE
    classes[xs & zs] = BOTH
    return SnapshotGrid(spec.L, classes.reshape(spec.L, spec.L))


def observe(t: SectorTableau, spec: LatticeSpec, profiles: bool = True) -> ObservableRecord:
    """Every per-state observable in one pass over the column labels."""
    c = Correlations(t)
    periodic = spec.boundary == PERIODIC
    prof = {}
    if profiles:
        for key in PROFILE_KEYS:
            basis, direction = key.split("_")
            prof[key] = c.profile(basis, ROW if direction == "row" else COLUMN, periodic).values
    xs = _long_range_sites(c.x_labels, spec.L, periodic)
    zs = _long_range_sites(c.z_labels, spec.L, periodic)
    return ObservableRecord(
        Xr=c.long_range(X, ROW, periodic),
        Xc=c.long_range(X, COLUMN, periodic),
        Zr=c.long_range(Z, ROW, periodic),
        Zc=c.long_range(Z, COLUMN, periodic),
        entropy_bits=float(entanglement_entropy_bits(t)),
        x_site_density=float(xs.mean()),
        z_site_density=float(zs.mean()),
        profiles=prof,
    )
