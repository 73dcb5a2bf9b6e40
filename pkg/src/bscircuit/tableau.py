"""Phase-free stabilizer tableau split into pure-X and pure-Z sectors.

Every generator reachable from the initial state under XX/ZZ measurements is
either a product of X's or a product of Z's, so the group is stored as two
GF(2) row matrices over the lattice sites.  Signs are never tracked: all
observables here are squared expectations or ranks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numba import njit

from . import gf2

X = "X"
Z = "Z"
BASES = (X, Z)


class MeasureEffect(enum.Enum):
    NOOP = "noop"
    UPDATED = "updated"


@dataclass(frozen=True)
class PauliSupport:
    """A pure-type Pauli string: ``basis`` applied on every site in ``sites``."""

    basis: str
    sites: frozenset

    def __init__(self, basis: str, sites: Iterable[int]):
        if basis not in BASES:
            raise ValueError(f"basis must be X or Z, got {basis!r}")
        s = frozenset(int(v) for v in sites)
        if not s:
            raise ValueError("empty support")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "sites", s)


@njit(cache=True, nogil=True)
def _measure_pair(own, n_own, opp, n_opp, a, b):
    """Measure a two-site check of the ``own`` sector type.

    Returns (n_own, n_opp, updated).  The lowest-index anticommuting row of
    the opposite sector is the pivot; it absorbs the others and is removed by
    moving the last row into its slot.
    """
    wa = a >> 6
    sa = np.uint64(a & 63)
    wb = b >> 6
    sb = np.uint64(b & 63)
    w = opp.shape[1]
    pivot = -1
    for r in range(n_opp):
        if ((opp[r, wa] >> sa) ^ (opp[r, wb] >> sb)) & np.uint64(1):
            if pivot < 0:
                pivot = r
            else:
                for k in range(w):
                    opp[r, k] ^= opp[pivot, k]
    if pivot < 0:
        return n_own, n_opp, False
    last = n_opp - 1
    for k in range(w):
        opp[pivot, k] = opp[last, k]
        opp[last, k] = np.uint64(0)
        own[n_own, k] = np.uint64(0)
    own[n_own, wa] |= np.uint64(1) << sa
    own[n_own, wb] |= np.uint64(1) << sb
    return n_own + 1, n_opp - 1, True


@njit(cache=True, nogil=True)
def _apply_checks(xr, nx, zr, nz, is_z, sa, sb):
    n_upd = 0
    for t in range(is_z.shape[0]):
        if is_z[t]:
            nz, nx, upd = _measure_pair(zr, nz, xr, nx, sa[t], sb[t])
        else:
            nx, nz, upd = _measure_pair(xr, nx, zr, nz, sa[t], sb[t])
        if upd:
            n_upd += 1
    return nx, nz, n_upd


class SectorTableau:
    """Stabilizer group of ``n_sites`` qubits as X-sector and Z-sector rows.

    Both sectors are backed by ``n_sites``-row buffers; ``nx``/``nz`` give the
    live row counts and always sum to ``n_sites``.
    """

    def __init__(self, n_sites: int, x_rows=(), z_rows=()):
        self.n_sites = int(n_sites)
        self.n_words = gf2.n_words(self.n_sites)
        self._x = np.zeros((self.n_sites, self.n_words), dtype=np.uint64)
        self._z = np.zeros((self.n_sites, self.n_words), dtype=np.uint64)
        self.nx = 0
        self.nz = 0
        for sites in x_rows:
            self._x[self.nx] = gf2.pack_sites(sites, self.n_sites)
            self.nx += 1
        for sites in z_rows:
            self._z[self.nz] = gf2.pack_sites(sites, self.n_sites)
            self.nz += 1
        if self.nx + self.nz != self.n_sites:
            raise ValueError(
                f"need {self.n_sites} generators, got {self.nx} X + {self.nz} Z"
            )

    @property
    def x_rows(self) -> np.ndarray:
        return self._x[: self.nx]

    @property
    def z_rows(self) -> np.ndarray:
        return self._z[: self.nz]

    def rows(self, basis: str) -> np.ndarray:
        return self.x_rows if basis == X else self.z_rows

    def copy(self) -> "SectorTableau":
        t = SectorTableau.__new__(SectorTableau)
        t.n_sites, t.n_words = self.n_sites, self.n_words
        t._x, t._z = self._x.copy(), self._z.copy()
        t.nx, t.nz = self.nx, self.nz
        return t

    def supports(self, basis: str) -> list[list[int]]:
        return [gf2.row_sites(r, self.n_sites) for r in self.rows(basis)]

    def is_valid(self) -> bool:
        """Size, independence and purity of the generating set."""
        if self.nx + self.nz != self.n_sites:
            return False
        if gf2.rank_gf2(self.x_rows) != self.nx or gf2.rank_gf2(self.z_rows) != self.nz:
            return False
        # mutual commutation: every X row overlaps every Z row evenly
        xb = gf2.unpack_bool(self.x_rows, self.n_sites).astype(np.uint8)
        zb = gf2.unpack_bool(self.z_rows, self.n_sites).astype(np.uint8)
        return not np.any((xb.astype(np.int64) @ zb.T.astype(np.int64)) & 1)

    def apply_checks(self, is_z, site_a, site_b) -> int:
        """Measure a batch of two-site checks in order; returns the update count."""
        self.nx, self.nz, n = _apply_checks(
            self._x,
            self.nx,
            self._z,
            self.nz,
            np.asarray(is_z, dtype=np.bool_),
            np.asarray(site_a, dtype=np.int64),
            np.asarray(site_b, dtype=np.int64),
        )
        return int(n)


def site_array(sites) -> np.ndarray:
    if isinstance(sites, np.ndarray):
        return sites.astype(np.int64, copy=False).ravel()
    if isinstance(sites, (set, frozenset)):
        return np.fromiter(sites, dtype=np.int64, count=len(sites))
    return np.asarray(sites, dtype=np.int64).ravel()


def _mask(t: SectorTableau, s: PauliSupport) -> np.ndarray:
    return gf2.pack_sites(sorted(s.sites), t.n_sites)


def anticommuting_rows(t: SectorTableau, s: PauliSupport) -> list[int]:
    """Indices of opposite-sector rows with odd overlap with ``s``."""
    opp = Z if s.basis == X else X
    rows = t.rows(opp)
    flags = gf2.odd_overlap(rows, rows.shape[0], _mask(t, s))
    return np.flatnonzero(flags).tolist()


def measure_check(t: SectorTableau, s: PauliSupport) -> MeasureEffect:
    if len(s.sites) != 2:
        raise ValueError(f"checks act on exactly two sites, got {len(s.sites)}")
    a, b = sorted(s.sites)
    if b >= t.n_sites or a < 0:
        raise ValueError("check support outside the lattice")
    if s.basis == X:
        t.nx, t.nz, upd = _measure_pair(t._x, t.nx, t._z, t.nz, a, b)
    else:
        t.nz, t.nx, upd = _measure_pair(t._z, t.nz, t._x, t.nx, a, b)
    return MeasureEffect.UPDATED if upd else MeasureEffect.NOOP


def rank_gf2(rows) -> int:
    return gf2.rank_gf2(rows)


def restricted_rank(t: SectorTableau, sites) -> int:
    """Rank of the generator matrix truncated to the columns in ``sites``."""
    return restricted_rank_count(t, sites)[0]


def restricted_rank_count(t: SectorTableau, sites) -> tuple[int, int]:
    """Truncated rank together with the number of distinct sites kept."""
    cols = site_array(sites)
    if cols.size == 0:
        return 0, 0
    if cols.min() < 0 or cols.max() >= t.n_sites:
        raise ValueError("site outside the lattice")
    r, m = gf2.restricted_rank_pair(t._x, t.nx, t._z, t.nz, cols, t.n_sites)
    return int(r), int(m)


def column_classes(rows: np.ndarray, n_sites: int) -> np.ndarray:
    """Class label per site; sites share a label iff their columns are identical."""
    rows = np.ascontiguousarray(rows, dtype=np.uint64)
    if rows.ndim == 1:
        rows = rows[None, :]
    return gf2.column_labels(rows, rows.shape[0], n_sites)


def column_class_partition(rows: np.ndarray, n_sites: int) -> list[list[int]]:
    labels = column_classes(rows, n_sites)
    groups: dict[int, list[int]] = {}
    for site, lab in enumerate(labels.tolist()):
        groups.setdefault(lab, []).append(site)
    return [groups[k] for k in sorted(groups)]


def contains_operator(t: SectorTableau, s: PauliSupport, method: str = "commute") -> bool:
    """Whether ``s`` (up to sign) belongs to the stabilizer group.

    ``commute`` checks commutation with the opposite sector, which suffices
    because the group is maximal.  ``rowspace`` solves for membership in the
    matching sector's span directly.
    """
    if max(s.sites) >= t.n_sites or min(s.sites) < 0:
        raise ValueError("support outside the lattice")
    if method == "commute":
        return not anticommuting_rows(t, s)
    if method == "rowspace":
        rows = t.rows(s.basis)
        base = gf2.rank_gf2(rows)
        return gf2.rank_gf2(np.vstack([rows, _mask(t, s)[None, :]])) == base
    raise ValueError(f"unknown method {method!r}")
