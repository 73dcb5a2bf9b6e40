"""Bit-packed GF(2) primitives.

Rows are stored as ``uint64`` words, little-endian within a row: bit ``k`` of
a row lives in word ``k >> 6`` at position ``k & 63``.  The hot loops are
compiled with numba and release the GIL so trajectories can run on threads.
"""

from __future__ import annotations

import numpy as np
from numba import njit

WORD = 64


def n_words(n_bits: int) -> int:
    return (n_bits + WORD - 1) // WORD


def pack_sites(sites, n_bits: int) -> np.ndarray:
    """Indicator vector of ``sites`` as a packed row."""
    row = np.zeros(n_words(n_bits), dtype=np.uint64)
    for s in sites:
        s = int(s)
        if not 0 <= s < n_bits:
            raise ValueError(f"site {s} outside [0, {n_bits})")
        row[s >> 6] ^= np.uint64(1) << np.uint64(s & 63)
    return row


def pack_bool(matrix) -> np.ndarray:
    """Pack a 2D 0/1 array (rows x bits) into uint64 words."""
    m = np.ascontiguousarray(np.asarray(matrix, dtype=bool))
    if m.ndim != 2:
        raise ValueError("expected a 2D array")
    r, c = m.shape
    w = n_words(c)
    padded = np.zeros((r, w * WORD), dtype=bool)
    padded[:, :c] = m
    by = np.packbits(padded, axis=1, bitorder="little")
    return by.view("<u8").astype(np.uint64).reshape(r, w)


def unpack_bool(rows: np.ndarray, n_bits: int) -> np.ndarray:
    rows = np.ascontiguousarray(rows, dtype=np.uint64)
    if rows.shape[0] == 0:
        return np.zeros((0, n_bits), dtype=bool)
    by = rows.astype("<u8").view(np.uint8)
    bits = np.unpackbits(by, axis=1, bitorder="little")
    return bits[:, :n_bits].astype(bool)


def row_sites(row: np.ndarray, n_bits: int) -> list[int]:
    return np.flatnonzero(unpack_bool(row[None, :], n_bits)[0]).tolist()


@njit(cache=True, nogil=True)
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True, nogil=True)
def odd_overlap(rows, n_rows, mask):
    """Flags rows (among the first ``n_rows``) whose AND with ``mask`` has odd weight."""
    out = np.zeros(n_rows, dtype=np.bool_)
    w = rows.shape[1]
    for r in range(n_rows):
        acc = np.uint64(0)
        for k in range(w):
            acc ^= rows[r, k] & mask[k]
        out[r] = (_popcount(acc) & np.uint64(1)) == np.uint64(1)
    return out


@njit(cache=True, nogil=True)
def _eliminate(m):
    """In-place forward elimination; returns the rank. Columns scanned low to high."""
    n_rows, w = m.shape
    rank = 0
    for word in range(w):
        for bit in range(WORD):
            if rank == n_rows:
                return rank
            sel = np.uint64(1) << np.uint64(bit)
            piv = -1
            for r in range(rank, n_rows):
                if m[r, word] & sel:
                    piv = r
                    break
            if piv < 0:
                continue
            if piv != rank:
                for k in range(word, w):
                    tmp = m[piv, k]
                    m[piv, k] = m[rank, k]
                    m[rank, k] = tmp
            for r in range(piv + 1, n_rows):
                if m[r, word] & sel:
                    for k in range(word, w):
                        m[r, k] ^= m[rank, k]
            rank += 1
    return rank


@njit(cache=True, nogil=True)
def _gather_columns(rows, n_rows, cols):
    """Packed copy of ``rows[:n_rows]`` keeping only ``cols`` (re-indexed 0..len-1)."""
    nc = cols.shape[0]
    w = (nc + WORD - 1) // WORD
    out = np.zeros((n_rows, max(w, 1)), dtype=np.uint64)
    for r in range(n_rows):
        for k in range(nc):
            c = cols[k]
            if (rows[r, c >> 6] >> np.uint64(c & 63)) & np.uint64(1):
                out[r, k >> 6] |= np.uint64(1) << np.uint64(k & 63)
    return out


def rank_gf2(rows) -> int:
    """GF(2) rank of packed rows. The input is copied, never mutated."""
    m = np.array(rows, dtype=np.uint64, copy=True, ndmin=2)
    if m.size == 0:
        return 0
    return int(_eliminate(m))


def restricted_rank_rows(rows: np.ndarray, n_rows: int, cols: np.ndarray) -> int:
    """Rank of ``rows[:n_rows]`` after dropping every column not in ``cols``."""
    cols = np.asarray(cols, dtype=np.int64)
    if n_rows == 0 or cols.size == 0:
        return 0
    return int(_eliminate(_gather_columns(rows, n_rows, cols)))


@njit(cache=True, nogil=True)
def _transpose_bits(rows, n_rows, n_bits):
    """Column bit-patterns: out[c] is the packed vector of bit c across rows."""
    wr = (n_rows + WORD - 1) // WORD
    out = np.zeros((n_bits, max(wr, 1)), dtype=np.uint64)
    for r in range(n_rows):
        rw = r >> 6
        rb = np.uint64(1) << np.uint64(r & 63)
        for c in range(n_bits):
            if (rows[r, c >> 6] >> np.uint64(c & 63)) & np.uint64(1):
                out[c, rw] |= rb
    return out


@njit(cache=True, nogil=True)
def _group_identical(cols):
    """Label rows of ``cols`` by equality, numbered in order of first occurrence."""
    n, w = cols.shape
    h = np.empty(n, dtype=np.uint64)
    for c in range(n):
        acc = np.uint64(0x9E3779B97F4A7C15)
        for k in range(w):
            acc ^= cols[c, k] + np.uint64(0x9E3779B97F4A7C15) + (acc << np.uint64(6)) + (acc >> np.uint64(2))
        h[c] = acc
    order = np.argsort(h, kind="mergesort")
    rep = np.empty(n, dtype=np.int64)
    reps = np.empty(n, dtype=np.int64)
    start = 0
    while start < n:
        stop = start
        while stop < n and h[order[stop]] == h[order[start]]:
            stop += 1
        n_reps = 0
        # stable sort: members arrive in increasing index, so each rep is its class minimum
        for p in range(start, stop):
            c = order[p]
            found = -1
            for q in range(n_reps):
                r = reps[q]
                same = True
                for k in range(w):
                    if cols[c, k] != cols[r, k]:
                        same = False
                        break
                if same:
                    found = r
                    break
            if found < 0:
                reps[n_reps] = c
                n_reps += 1
                rep[c] = c
            else:
                rep[c] = found
        start = stop
    labels = np.empty(n, dtype=np.int64)
    nxt = 0
    for c in range(n):
        if rep[c] == c:
            labels[c] = nxt
            nxt += 1
        else:
            labels[c] = labels[rep[c]]
    return labels


def column_labels(rows: np.ndarray, n_rows: int, n_bits: int) -> np.ndarray:
    """Integer label per column; equal labels iff equal column bit-patterns.

    Labels are numbered by first occurrence, so the result depends only on
    the partition, not on how rows are ordered or combined.
    """
    return _group_identical(_transpose_bits(rows, n_rows, n_bits))


@njit(cache=True, nogil=True)
def restricted_rank_pair(xr, nx, zr, nz, sites, n_bits):
    """(rank of both sectors truncated to ``sites``, number of distinct sites)."""
    seen = np.zeros(n_bits, dtype=np.bool_)
    m = 0
    for s in sites:
        if not seen[s]:
            seen[s] = True
            m += 1
    cols = np.empty(m, dtype=np.int64)
    k = 0
    for s in range(n_bits):
        if seen[s]:
            cols[k] = s
            k += 1
    r = 0
    if m > 0:
        if nx > 0:
            r += _eliminate(_gather_columns(xr, nx, cols))
        if nz > 0:
            r += _eliminate(_gather_columns(zr, nz, cols))
    return r, m
