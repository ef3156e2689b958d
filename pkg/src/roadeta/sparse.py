"""CSR adjacency storage and the sparse kernels used by the graph layers."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class ShapeMismatch(ValueError):
    """Operand dimensions do not line up."""


class SparseAdjacency:
    """Square sparse matrix in CSR form.

    Unweighted instances (``data is None``) represent 0/1 adjacency.
    Weighted instances carry one coefficient per stored entry and are used
    for the degree-normalized adjacency, mean-aggregation operators and
    attention rows.  Column indices are kept sorted within each row.
    """

    def __init__(self, n, indptr, indices, data=None, symmetric=False):
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        if indptr.shape != (n + 1,) or indptr[0] != 0 or indptr[-1] != indices.size:
            raise ValueError("malformed CSR index arrays")
        if indices.size and (indices.min() < 0 or indices.max() >= n):
            raise ValueError("column index out of range")
        if data is not None:
            data = np.asarray(data, dtype=np.float64)
            if data.shape != indices.shape:
                raise ValueError("data length must match indices")
        self.n = int(n)
        self.indptr = indptr
        self.indices = indices
        self.data = data
        self.symmetric = bool(symmetric)
        self._csr = None
        self._csr_t = None

    @classmethod
    def from_edges(cls, n, edges, symmetric=True):
        """Build 0/1 adjacency from (i, j) pairs.

        Both directions are stored when ``symmetric``.  Duplicate pairs
        collapse to a single entry and self-loops are dropped.
        """
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if symmetric and pairs.size:
            pairs = np.concatenate([pairs, pairs[:, ::-1]], axis=0)
        if pairs.size:
            pairs = pairs[pairs[:, 0] != pairs[:, 1]]
            pairs = np.unique(pairs, axis=0)
        rows = pairs[:, 0] if pairs.size else np.empty(0, dtype=np.int64)
        cols = pairs[:, 1] if pairs.size else np.empty(0, dtype=np.int64)
        counts = np.bincount(rows, minlength=n)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return cls(n, indptr, cols, symmetric=symmetric)

    @property
    def nnz(self):
        return int(self.indices.size)

    def row(self, i):
        """Column indices of row ``i``."""
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def row_counts(self):
        return np.diff(self.indptr)

    def degrees(self):
        """Row entry counts (vertex degrees for 0/1 adjacency)."""
        return np.diff(self.indptr)

    def entry_rows(self):
        """Row index of every stored entry, aligned with ``indices``."""
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))

    def with_self_loops(self):
        """Return a copy with the diagonal added (unweighted only)."""
        if self.data is not None:
            raise ValueError("self-loop augmentation is defined for 0/1 adjacency")
        rows = np.concatenate([self.entry_rows(), np.arange(self.n, dtype=np.int64)])
        cols = np.concatenate([self.indices, np.arange(self.n, dtype=np.int64)])
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        counts = np.bincount(rows, minlength=self.n)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return SparseAdjacency(self.n, indptr, cols, symmetric=self.symmetric)

    def to_scipy(self):
        if self._csr is None:
            data = self.data if self.data is not None else np.ones(self.nnz)
            self._csr = sp.csr_matrix((data, self.indices, self.indptr),
                                      shape=(self.n, self.n))
        return self._csr

    def to_dense(self):
        return self.to_scipy().toarray()

    def transpose_scipy(self):
        if self._csr_t is None:
            self._csr_t = self.to_scipy().T.tocsr()
        return self._csr_t


def normalize_adjacency(a):
    """Self-loop augmented symmetric degree normalization.

    For 0/1 symmetric adjacency A this returns the weighted matrix with
    entries (A+I)_ij / sqrt(d_i d_j), where d is the row sum of A+I.
    Every weight lies in (0, 1] because self-loops force d >= 1.
    """
    if not a.symmetric:
        raise ValueError("normalization expects symmetric adjacency")
    loops = a.with_self_loops()
    deg = loops.degrees().astype(np.float64)
    inv_sqrt = 1.0 / np.sqrt(deg)
    weights = inv_sqrt[loops.entry_rows()] * inv_sqrt[loops.indices]
    return SparseAdjacency(a.n, loops.indptr, loops.indices, data=weights,
                           symmetric=True)


def spmm(a, h):
    """Sparse @ dense product; exact CSR accumulation, deterministic."""
    h = np.asarray(h)
    if h.shape[0] != a.n:
        raise ShapeMismatch(f"adjacency is {a.n}x{a.n}, dense operand has "
                            f"{h.shape[0]} rows")
    return a.to_scipy().dot(h)


def spmm_t(a, h):
    """Transpose product a.T @ h, used by backward passes."""
    h = np.asarray(h)
    if h.shape[0] != a.n:
        raise ShapeMismatch(f"adjacency is {a.n}x{a.n}, dense operand has "
                            f"{h.shape[0]} rows")
    return a.transpose_scipy().dot(h)
