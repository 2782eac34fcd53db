"""Reverse-mode automatic differentiation over dense/sparse matrix operations.

All values are 2-D float64 arrays; scalars travel as 1x1 matrices.  Operations
are recorded on a :class:`Tape` in execution order, and the backward pass
replays them in exact reverse order, accumulating each node's gradient as the
sum of its consumers' contributions.  Accumulation order is fixed (reverse
topological, inputs visited in recorded order), so two runs of the same
computation produce bit-identical gradients.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, NumericError, ShapeError
from .sparse import SparseMatrix


def as_matrix(value):
    """Coerce to a C-contiguous 2-D float64 array."""
    a = np.asarray(value, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    elif a.ndim != 2:
        raise ShapeError(f"expected at most 2 dimensions, got {a.ndim}")
    return np.ascontiguousarray(a)


class Node:
    """A value on the tape.  Holds the cached forward result."""

    __slots__ = ("tape", "id", "value")

    def __init__(self, tape, node_id, value):
        self.tape = tape
        self.id = node_id
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    def scalar(self):
        if self.value.shape != (1, 1):
            raise ShapeError(f"not a scalar node: shape {self.value.shape}")
        return float(self.value[0, 0])

    # Operator sugar; everything routes through the owning tape.
    def __add__(self, other):
        if isinstance(other, Node):
            return self.tape.add(self, other)
        return self.tape.add_scalar(self, float(other))

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        return self.tape.sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Node):
            return self.tape.mul(self, other)
        return self.tape.scale(self, float(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        return self.tape.matmul(self, other)

    def __repr__(self):
        return f"Node(id={self.id}, shape={self.value.shape})"


class Tape:
    """Records operations for one forward pass and runs the backward sweep."""

    def __init__(self, check_finite=True):
        self.check_finite = check_finite
        self._records = []  # (out_id, in_ids, backward_fn)
        self._next_id = 0

    # ------------------------------------------------------------------
    # node creation

    def _node(self, value):
        value = as_matrix(value)
        if self.check_finite and not np.all(np.isfinite(value)):
            raise NumericError("non-finite value entered the tape")
        n = Node(self, self._next_id, value)
        self._next_id += 1
        return n

    def constant(self, value):
        return self._node(value)

    # A leaf is any node created outside an op; trainability is the caller's
    # bookkeeping (the trainer keeps its own list of parameter nodes).
    leaf = constant

    def _record(self, out, in_nodes, backward_fn):
        self._records.append((out.id, tuple(n.id for n in in_nodes), backward_fn))
        return out

    @staticmethod
    def _accumulate(grads, node_id, contribution):
        if node_id in grads:
            grads[node_id] = grads[node_id] + contribution
        else:
            grads[node_id] = contribution

    # ------------------------------------------------------------------
    # primitives

    def matmul(self, a, b):
        if a.value.shape[1] != b.value.shape[0]:
            raise ShapeError(
                f"matmul mismatch: {a.value.shape} @ {b.value.shape}")
        out = self._node(a.value @ b.value)
        av, bv = a.value, b.value

        def backward(g, grads):
            self._accumulate(grads, a.id, g @ bv.T)
            self._accumulate(grads, b.id, av.T @ g)

        return self._record(out, (a, b), backward)

    def sparse_matmul(self, s: SparseMatrix, d):
        """Constant sparse operator times dense node; gradient flows to d."""
        out = self._node(s.matmul_dense(d.value))
        st = s.transpose()

        def backward(g, grads):
            self._accumulate(grads, d.id, st.matmul_dense(g))

        return self._record(out, (d,), backward)

    def weighted_sparse_matmul(self, pattern: SparseMatrix, values, d):
        """Sparse product whose stored values are themselves a tape node.

        `values` is an nnz x 1 node laid out in the pattern's storage order.
        Gradients flow both to `d` and to the values (hence to whatever
        produced them, e.g. confidence parameters).
        """
        if values.value.shape != (pattern.nnz, 1):
            raise ShapeError(
                f"values shape {values.value.shape} != ({pattern.nnz}, 1)")
        s = pattern.with_data(values.value[:, 0])
        out = self._node(s.matmul_dense(d.value))
        st = s.transpose()
        dv = d.value
        rows = pattern.row_ids()
        cols = pattern.indices

        def backward(g, grads):
            self._accumulate(grads, d.id, st.matmul_dense(g))
            gvals = np.einsum("ij,ij->i", dv[cols], g[rows]).reshape(-1, 1)
            self._accumulate(grads, values.id, gvals)

        return self._record(out, (values, d), backward)

    def _binary_elementwise(self, a, b, op_name):
        if a.value.shape != b.value.shape:
            raise ShapeError(
                f"{op_name} mismatch: {a.value.shape} vs {b.value.shape}")

    def add(self, a, b):
        self._binary_elementwise(a, b, "add")
        out = self._node(a.value + b.value)

        def backward(g, grads):
            self._accumulate(grads, a.id, g)
            self._accumulate(grads, b.id, g)

        return self._record(out, (a, b), backward)

    def sub(self, a, b):
        self._binary_elementwise(a, b, "sub")
        out = self._node(a.value - b.value)

        def backward(g, grads):
            self._accumulate(grads, a.id, g)
            self._accumulate(grads, b.id, -g)

        return self._record(out, (a, b), backward)

    def mul(self, a, b):
        self._binary_elementwise(a, b, "mul")
        out = self._node(a.value * b.value)
        av, bv = a.value, b.value

        def backward(g, grads):
            self._accumulate(grads, a.id, g * bv)
            self._accumulate(grads, b.id, g * av)

        return self._record(out, (a, b), backward)

    def scale(self, a, c):
        c = float(c)
        out = self._node(a.value * c)

        def backward(g, grads):
            self._accumulate(grads, a.id, g * c)

        return self._record(out, (a,), backward)

    def add_scalar(self, a, c):
        c = float(c)
        out = self._node(a.value + c)

        def backward(g, grads):
            self._accumulate(grads, a.id, g)

        return self._record(out, (a,), backward)

    def mul_constant(self, a, mask):
        """Elementwise product with a non-differentiable constant (dropout)."""
        mask = as_matrix(mask)
        if mask.shape != a.value.shape:
            raise ShapeError(f"mask mismatch: {mask.shape} vs {a.value.shape}")
        out = self._node(a.value * mask)

        def backward(g, grads):
            self._accumulate(grads, a.id, g * mask)

        return self._record(out, (a,), backward)

    def add_row_vector(self, a, b):
        """Broadcast a 1 x c row vector (bias) onto every row of a."""
        if b.value.shape != (1, a.value.shape[1]):
            raise ShapeError(
                f"bias shape {b.value.shape} incompatible with {a.value.shape}")
        out = self._node(a.value + b.value)

        def backward(g, grads):
            self._accumulate(grads, a.id, g)
            self._accumulate(grads, b.id, g.sum(axis=0, keepdims=True))

        return self._record(out, (a, b), backward)

    def row_sum(self, a):
        out = self._node(a.value.sum(axis=1, keepdims=True))
        cols = a.value.shape[1]

        def backward(g, grads):
            self._accumulate(grads, a.id, np.repeat(g, cols, axis=1))

        return self._record(out, (a,), backward)

    def total_sum(self, a):
        out = self._node(np.array([[a.value.sum()]]))
        shape = a.value.shape

        def backward(g, grads):
            self._accumulate(grads, a.id, np.full(shape, g[0, 0]))

        return self._record(out, (a,), backward)

    def log(self, a, floor=1e-15):
        """Natural log with the input clamped below at `floor`.

        Where the clamp is active the derivative is 0 (the output no longer
        responds to the input there).
        """
        clamped = np.maximum(a.value, floor)
        out = self._node(np.log(clamped))
        active = a.value > floor

        def backward(g, grads):
            self._accumulate(grads, a.id, np.where(active, g / clamped, 0.0))

        return self._record(out, (a,), backward)

    def relu(self, a):
        """Elementwise max(0, x); subgradient at exactly 0 is 0."""
        out = self._node(np.maximum(a.value, 0.0))
        mask = a.value > 0.0

        def backward(g, grads):
            self._accumulate(grads, a.id, np.where(mask, g, 0.0))

        return self._record(out, (a,), backward)

    # max-with-zero is the same primitive; keep the contract name available.
    max_with_zero = relu

    def reciprocal(self, a):
        av = a.value
        if self.check_finite and np.any(av == 0.0):
            raise NumericError("reciprocal of zero")
        out = self._node(1.0 / av)

        def backward(g, grads):
            self._accumulate(grads, a.id, -g / (av * av))

        return self._record(out, (a,), backward)

    def gather_rows(self, a, row_ids):
        row_ids = np.asarray(row_ids, dtype=np.int64)
        if len(row_ids) and (row_ids.min() < 0 or row_ids.max() >= a.value.shape[0]):
            raise ShapeError("gather index out of range")
        out = self._node(a.value[row_ids])
        shape = a.value.shape

        def backward(g, grads):
            da = np.zeros(shape)
            np.add.at(da, row_ids, g)
            self._accumulate(grads, a.id, da)

        return self._record(out, (a,), backward)

    def softmax_rows(self, a):
        """Numerically stable per-row softmax (max-subtracted)."""
        shifted = a.value - a.value.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=1, keepdims=True)
        out = self._node(y)

        def backward(g, grads):
            inner = (g * y).sum(axis=1, keepdims=True)
            self._accumulate(grads, a.id, y * (g - inner))

        return self._record(out, (a,), backward)

    # ------------------------------------------------------------------
    # backward pass

    def backward(self, loss):
        """Gradients of a scalar loss w.r.t. every node it depends on.

        Returns a dict mapping node id to gradient array.
        """
        if loss.value.shape != (1, 1):
            raise ContractError(
                f"loss must be scalar (1x1), got {loss.value.shape}")
        grads = {loss.id: np.ones((1, 1))}
        for out_id, _in_ids, backward_fn in reversed(self._records):
            g = grads.get(out_id)
            if g is None:
                continue
            backward_fn(g, grads)
        return grads


def gradient_check(build, params, step=1e-5, max_entries=100, rng=None):
    """Compare analytic gradients against central finite differences.

    `build` maps a list of parameter arrays to ``(tape, loss_node,
    param_nodes)``; it must be a pure function of those arrays.  For each
    parameter, up to `max_entries` randomly chosen entries are perturbed by
    +/- `step` and the loss rebuilt.  Returns the maximum of
    ``|analytic - numeric| / max(1, |numeric|)`` over all sampled entries.
    """
    if step <= 0:
        raise ContractError("step must be positive")
    rng = np.random.default_rng(0) if rng is None else rng
    params = [as_matrix(p) for p in params]

    tape, loss, param_nodes = build([p.copy() for p in params])
    if not np.isfinite(loss.value).all():
        raise NumericError("non-finite loss in gradient check")
    grads = tape.backward(loss)

    worst = 0.0
    for pi, p in enumerate(params):
        analytic = grads.get(param_nodes[pi].id)
        if analytic is None:
            analytic = np.zeros(p.shape)
        total = p.size
        if total == 0:
            continue
        if total <= max_entries:
            flat_ids = np.arange(total)
        else:
            flat_ids = rng.choice(total, size=max_entries, replace=False)
        for fid in flat_ids:
            i, j = divmod(int(fid), p.shape[1])
            perturbed = [q.copy() for q in params]
            perturbed[pi][i, j] += step
            _, lp, _ = build(perturbed)
            perturbed[pi][i, j] -= 2 * step
            _, lm, _ = build(perturbed)
            numeric = (lp.scalar() - lm.scalar()) / (2 * step)
            if not np.isfinite(numeric):
                raise NumericError("non-finite loss in gradient check")
            err = abs(analytic[i, j] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst
