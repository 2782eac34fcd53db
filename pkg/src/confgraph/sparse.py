"""Compressed-sparse-row matrices for graph operators.

The multiplication kernels delegate to scipy, whose CSR routines accumulate
each output row strictly in column-index order.  That makes sparse-times-dense
bit-identical to an in-order dense summation over the same row, which the
deterministic-replay guarantees elsewhere in the package rely on.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class SparseMatrix:
    """CSR matrix of 64-bit floats.

    Column indices are strictly increasing within each row and row offsets
    are non-decreasing; both are checked on construction.
    """

    def __init__(self, rows, cols, indptr, indices, data, *, validate=True):
        self.rows = int(rows)
        self.cols = int(cols)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        if validate:
            self._validate()

    def _validate(self):
        if self.indptr.shape != (self.rows + 1,):
            raise ValueError("indptr length must be rows + 1")
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise ValueError("indptr must start at 0 and end at nnz")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("row offsets must be non-decreasing")
        if len(self.indices) != len(self.data):
            raise ValueError("indices and data length mismatch")
        if len(self.indices):
            if self.indices.min() < 0 or self.indices.max() >= self.cols:
                raise ValueError("column index out of range")
        for i in range(self.rows):
            row = self.indices[self.indptr[i]:self.indptr[i + 1]]
            if np.any(np.diff(row) <= 0):
                raise ValueError(f"column indices not strictly increasing in row {i}")

    @property
    def nnz(self):
        return len(self.data)

    @property
    def shape(self):
        return (self.rows, self.cols)

    @classmethod
    def from_coo(cls, rows, cols, row_ids, col_ids, values):
        """Build from coordinate triplets; duplicate entries are summed."""
        m = sp.coo_matrix(
            (np.asarray(values, dtype=np.float64), (row_ids, col_ids)),
            shape=(rows, cols),
        ).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(rows, cols, m.indptr, m.indices, m.data)

    def with_data(self, data):
        """Same sparsity pattern, new values (no revalidation needed)."""
        data = np.ascontiguousarray(data, dtype=np.float64)
        if data.shape != self.data.shape:
            raise ValueError("replacement data has wrong length")
        return SparseMatrix(self.rows, self.cols, self.indptr, self.indices,
                            data, validate=False)

    def to_scipy(self):
        return sp.csr_matrix((self.data, self.indices, self.indptr),
                             shape=(self.rows, self.cols))

    def to_dense(self):
        out = np.zeros((self.rows, self.cols))
        for i in range(self.rows):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out[i, self.indices[lo:hi]] = self.data[lo:hi]
        return out

    def matmul_dense(self, dense):
        """self @ dense, summed per row in increasing column order."""
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2 or self.cols != dense.shape[0]:
            raise ValueError(
                f"shape mismatch: {self.shape} @ {dense.shape}")
        return np.asarray(self.to_scipy() @ dense)

    def transpose(self):
        t = self.to_scipy().transpose().tocsr()
        t.sort_indices()
        return SparseMatrix(self.cols, self.rows, t.indptr, t.indices, t.data,
                            validate=False)

    def row_ids(self):
        """Row id of every stored entry, in storage order."""
        return np.repeat(np.arange(self.rows, dtype=np.int64),
                         np.diff(self.indptr))
