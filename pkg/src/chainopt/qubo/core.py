"""Generic quadratic binary models: polynomial builder, QUBO and Ising containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class Poly:
    """Quadratic pseudo-boolean polynomial ``const + lin.x + sum v_ij x_i x_j`` (i != j).

    Diagonal products collapse into the linear part since x_i**2 == x_i.
    """

    def __init__(self, n: int):
        self.n = n
        self.const = 0.0
        self.lin = np.zeros(n)
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []

    # building ---------------------------------------------------------------
    def add_const(self, c: float) -> None:
        self.const += c

    def add_linear(self, idx, coef) -> None:
        np.add.at(self.lin, np.asarray(idx, dtype=np.int64), coef)

    def add_pairs(self, rows, cols, vals) -> None:
        rows, cols = np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), rows.shape).ravel()
        rows, cols = rows.ravel(), cols.ravel()
        diag = rows == cols
        if diag.any():
            np.add.at(self.lin, rows[diag], vals[diag])
        off = ~diag
        if off.any():
            r, c = rows[off], cols[off]
            self._rows.append(np.minimum(r, c))
            self._cols.append(np.maximum(r, c))
            self._vals.append(vals[off].copy())

    def add_product(self, idx_a, coef_a, idx_b, coef_b) -> None:
        """Add (sum_a c_a x_a) * (sum_b c_b x_b)."""
        idx_a = np.asarray(idx_a, dtype=np.int64)
        idx_b = np.asarray(idx_b, dtype=np.int64)
        if idx_a.size == 0 or idx_b.size == 0:
            return
        ca = np.broadcast_to(np.asarray(coef_a, dtype=float), idx_a.shape)
        cb = np.broadcast_to(np.asarray(coef_b, dtype=float), idx_b.shape)
        rows, cols = np.meshgrid(idx_a, idx_b, indexing="ij")
        self.add_pairs(rows, cols, np.outer(ca, cb))

    def add_square(self, idx, coef, c0: float = 0.0, scale: float = 1.0) -> None:
        """Add scale * (sum_i c_i x_i + c0)**2."""
        idx = np.asarray(idx, dtype=np.int64)
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape)
        uniq, inv = np.unique(idx, return_inverse=True)
        c = np.zeros(uniq.size)
        np.add.at(c, inv, coef)
        self.const += scale * c0 * c0
        if uniq.size == 0:
            return
        np.add.at(self.lin, uniq, scale * (c * c + 2.0 * c0 * c))
        iu, ju = np.triu_indices(uniq.size, k=1)
        if iu.size:
            self._rows.append(uniq[iu])
            self._cols.append(uniq[ju])
            self._vals.append(scale * 2.0 * c[iu] * c[ju])

    def add_poly(self, other: "Poly", scale: float = 1.0) -> None:
        self.const += scale * other.const
        self.lin += scale * other.lin
        r, c, v = other.pairs()
        if v.size:
            self._rows.append(r)
            self._cols.append(c)
            self._vals.append(scale * v)

    # reading ----------------------------------------------------------------
    def pairs(self):
        if not self._vals:
            e = np.zeros(0, dtype=np.int64)
            return e, e, np.zeros(0)
        return (np.concatenate(self._rows), np.concatenate(self._cols), np.concatenate(self._vals))

    def is_empty(self) -> bool:
        r, c, v = self.pairs()
        return self.const == 0 and not np.any(self.lin) and not np.any(v)

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        r, c, v = self.pairs()
        return float(self.const + self.lin @ x + np.sum(v * x[r] * x[c]))

    def coefficient(self, i: int, j: int) -> float:
        """Accumulated coefficient of x_i x_j (or of x_i when i == j)."""
        if i == j:
            return float(self.lin[i])
        a, b = min(i, j), max(i, j)
        r, c, v = self.pairs()
        return float(v[(r == a) & (c == b)].sum())


@dataclass(frozen=True)
class Qubo:
    """Q(x) = x^T Q x + offset with Q upper triangular (linear terms on the diagonal)."""

    matrix: sp.csr_matrix
    offset: float = 0.0

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_dense(cls, Q, offset: float = 0.0) -> "Qubo":
        Q = np.asarray(Q, dtype=float)
        upper = np.triu(Q) + np.triu(Q.T, k=1)
        return cls(sp.csr_matrix(upper), float(offset))

    @classmethod
    def from_terms(cls, n: int, const: float, lin, rows, cols, vals) -> "Qubo":
        rows = np.concatenate([np.arange(n), np.asarray(rows, dtype=np.int64)])
        cols = np.concatenate([np.arange(n), np.asarray(cols, dtype=np.int64)])
        vals = np.concatenate([np.asarray(lin, dtype=float), np.asarray(vals, dtype=float)])
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        m = sp.coo_matrix((vals, (lo, hi)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return cls(m, float(const))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def energy(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ (self.matrix @ x) + self.offset)

    def energies(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.einsum("ij,ij->i", np.asarray(self.matrix.T @ X.T).T, X) + self.offset

    def symmetric(self) -> sp.csr_matrix:
        """Symmetric off-diagonal coupling matrix (each pair split in half) without the diagonal."""
        off = sp.triu(self.matrix, k=1)
        return ((off + off.T) * 0.5).tocsr()

    def linear(self) -> np.ndarray:
        return self.matrix.diagonal().copy()

    def adjacency(self) -> list[np.ndarray]:
        s = (sp.triu(self.matrix, k=1) != 0)
        s = (s + s.T).tocsr()
        return [s.indices[s.indptr[i]:s.indptr[i + 1]] for i in range(self.n)]


@dataclass(frozen=True)
class IsingModel:
    """H(s) = s^T J s + h.s with J symmetric, zero diagonal, and H(s) + offset = Q((s+1)/2)."""

    J: sp.csr_matrix
    h: np.ndarray
    offset: float = 0.0

    @property
    def n(self) -> int:
        return self.h.size

    def energy(self, s) -> float:
        s = np.asarray(s, dtype=float)
        return float(s @ (self.J @ s) + self.h @ s)

    def energies(self, S) -> np.ndarray:
        S = np.asarray(S, dtype=float)
        return np.einsum("ij,ij->i", np.asarray(self.J @ S.T).T, S) + S @ self.h

    def gradient(self, m) -> np.ndarray:
        return 2.0 * (self.J @ m) + self.h


def to_ising(qubo: Qubo) -> IsingModel:
    """Spin form via x = (s + 1) / 2."""
    Q = qubo.matrix
    diag = Q.diagonal()
    off = sp.triu(Q, k=1).tocsr()
    sym = (off + off.T).tocsr()
    J = (sym * 0.125).tocsr()
    J.eliminate_zeros()
    h = diag / 2.0 + np.asarray(sym.sum(axis=1)).ravel() / 4.0
    offset = qubo.offset + diag.sum() / 2.0 + off.sum() / 4.0
    return IsingModel(J, h, float(offset))


def spins_to_bits(s) -> np.ndarray:
    return ((np.asarray(s) + 1) // 2).astype(np.int8)


def bits_to_spins(x) -> np.ndarray:
    return (2 * np.asarray(x, dtype=np.int8) - 1).astype(np.int8)


def from_ising(ising: IsingModel) -> Qubo:
    """Inverse of :func:`to_ising` via s = 2x - 1."""
    J = sp.csr_matrix(ising.J)
    h = np.asarray(ising.h, dtype=float)
    n = h.size
    upper = sp.triu(J + J.T, k=1).tocoo()  # coefficient of s_i s_j for i < j
    lin = 2.0 * h - 2.0 * np.asarray((J + J.T).sum(axis=1)).ravel()
    const = ising.offset - h.sum() + upper.data.sum()
    return Qubo.from_terms(n, const, lin, upper.row, upper.col, 4.0 * upper.data)
