"""Brute-force state-vector reference for at most nine qubits.

Qubit ``k`` is bit ``k`` of the basis-state index.  Pauli strings are given
as ``(x_mask, z_mask)`` integer pairs; a site in both masks carries a Y.
"""

from __future__ import annotations

import numpy as np

from .tableau import X, Z, PauliSupport

MAX_QUBITS = 9
NORM_TOL = 1e-12


def _masks(op) -> tuple[int, int]:
    if isinstance(op, PauliSupport):
        m = 0
        for s in op.sites:
            m |= 1 << s
        return (m, 0) if op.basis == X else (0, m)
    xm, zm = op
    return int(xm), int(zm)


def pair_operator(basis: str, a: int, b: int) -> tuple[int, int]:
    """Masks for ``P_a P_b`` with P in X, Y, Z."""
    m = (1 << a) | (1 << b)
    return {"X": (m, 0), "Z": (0, m), "Y": (m, m)}[basis]


class DenseState:
    def __init__(self, n_qubits: int, amplitudes=None):
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise ValueError(f"oracle supports 1..{MAX_QUBITS} qubits")
        self.n_qubits = n_qubits
        dim = 1 << n_qubits
        if amplitudes is None:
            amplitudes = np.zeros(dim, dtype=complex)
            amplitudes[0] = 1.0
        self.amplitudes = np.asarray(amplitudes, dtype=complex)
        if self.amplitudes.shape != (dim,):
            raise ValueError("amplitude vector has the wrong length")
        self._index = np.arange(dim)
        self._parity = np.array([bin(i).count("1") & 1 for i in range(dim)], dtype=np.int8)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def apply(self, op) -> np.ndarray:
        """Return ``P |psi>`` without modifying the state."""
        xm, zm = _masks(op)
        if (xm | zm) >> self.n_qubits:
            raise ValueError("operator acts outside the register")
        # X^x Z^z |psi>, then the i per Y from Y = i X Z
        phased = self.amplitudes * (1 - 2 * self._parity[self._index & zm])
        out = phased[self._index ^ xm]
        return out * (1j ** bin(xm & zm).count("1"))


def project_measure(state: DenseState, op, outcome: int | None = None, rng=None) -> DenseState:
    """Project onto the ``outcome`` (+1/-1) eigenspace of ``op``; sample it if None."""
    p_psi = state.apply(op)
    plus = 0.5 * (state.amplitudes + p_psi)
    minus = 0.5 * (state.amplitudes - p_psi)
    if outcome is None:
        rng = rng if rng is not None else np.random.default_rng()
        prob_plus = float(np.vdot(plus, plus).real)
        outcome = 1 if rng.random() < prob_plus else -1
    if outcome not in (1, -1):
        raise ValueError("outcome must be +1 or -1")
    proj = plus if outcome == 1 else minus
    nrm = np.linalg.norm(proj)
    if nrm < 1e-9:
        raise ValueError("projection onto an impossible outcome")
    return DenseState(state.n_qubits, proj / nrm)


def expectation_sq(state: DenseState, op) -> float:
    return float(abs(np.vdot(state.amplitudes, state.apply(op))) ** 2)


def renyi2_bits(state: DenseState, subset) -> float:
    """-log2 Tr rho_A^2 for the qubits in ``subset``."""
    n = state.n_qubits
    keep = sorted({int(q) for q in subset})
    if not keep or len(keep) == n:
        return 0.0
    # tensor axis for qubit q is n-1-q
    axes_a = [n - 1 - q for q in keep]
    axes_b = [ax for ax in range(n) if ax not in axes_a]
    psi = state.amplitudes.reshape([2] * n).transpose(axes_a + axes_b)
    m = psi.reshape(1 << len(keep), -1)
    rho = m @ m.conj().T
    purity = float(np.real(np.vdot(rho, rho)))
    return float(-np.log2(purity))


def from_generators(n_qubits: int, x_rows, z_rows, rng=None) -> DenseState:
    """A state stabilized (up to signs) by the given pure-type generators.

    Starts from |0...0>, which the Z generators already fix, and projects
    onto a random outcome of each X generator.
    """
    state = DenseState(n_qubits)
    for sites in z_rows:
        state = project_measure(state, PauliSupport(Z, sites), rng=rng)
    for sites in x_rows:
        state = project_measure(state, PauliSupport(X, sites), rng=rng)
    return state


class BatchEvaluator:
    """Precomputed gathers for evaluating many operators/subsets per state."""

    def __init__(self, n_qubits: int, ops, subsets):
        self.n_qubits = n_qubits
        dim = 1 << n_qubits
        idx = np.arange(dim)
        parity = np.array([bin(i).count("1") & 1 for i in range(dim)])
        perms, phases = [], []
        for op in ops:
            xm, zm = _masks(op)
            # (P psi)[i] = i^{nY} (-1)^{par((i^x) & z)} psi[i ^ x]
            perms.append(idx ^ xm)
            phases.append((1j ** bin(xm & zm).count("1")) * (1 - 2 * parity[(idx ^ xm) & zm]))
        self._perm = np.array(perms, dtype=np.int64).reshape(len(perms), dim)
        self._phase = np.array(phases, dtype=complex).reshape(len(perms), dim)

        self.subsets = [tuple(sorted(s)) for s in subsets]
        self._groups = []
        by_size: dict[int, list[int]] = {}
        for k, s in enumerate(self.subsets):
            by_size.setdefault(len(s), []).append(k)
        for r, members in sorted(by_size.items()):
            gathers = []
            for k in members:
                keep = self.subsets[k]
                rest = [q for q in range(n_qubits) if q not in keep]
                # row index from the kept qubits, column index from the rest
                g = np.zeros((1 << r, 1 << (n_qubits - r)), dtype=np.int64)
                for a in range(1 << r):
                    for b in range(1 << (n_qubits - r)):
                        full = 0
                        for pos, q in enumerate(keep):
                            full |= ((a >> pos) & 1) << q
                        for pos, q in enumerate(rest):
                            full |= ((b >> pos) & 1) << q
                        g[a, b] = full
                gathers.append(g)
            self._groups.append((np.array(members), np.stack(gathers)))

    def expectations_sq(self, state: DenseState) -> np.ndarray:
        psi = state.amplitudes
        vals = np.sum(np.conj(psi)[None, :] * self._phase * psi[self._perm], axis=1)
        return np.abs(vals) ** 2

    def renyi2_bits(self, state: DenseState) -> np.ndarray:
        psi = state.amplitudes
        out = np.empty(len(self.subsets))
        for members, gathers in self._groups:
            m = psi[gathers]
            rho = m @ np.conj(np.swapaxes(m, 1, 2))
            purity = np.sum(np.abs(rho) ** 2, axis=(1, 2))
            out[members] = -np.log2(purity)
        return out
