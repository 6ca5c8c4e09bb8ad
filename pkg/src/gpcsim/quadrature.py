"""Gauss quadrature per germ family and streamed tensor-product grids.

One-dimensional rules come from the symmetric tridiagonal (Golub-Welsch)
eigenproblem of the monic recurrence, so nodes/weights exist for every
family the basis module knows.  Multi-dimensional grids are enumerated in a
mixed-radix order: the linear index j (0-based) decomposes into per-dimension
digits with dimension 0 as the least significant digit and radix n_hat.
Grid nodes are generated from the index alone, so nothing forces the full
candidate set into memory; materialization is budget-guarded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import Distribution, univariate_recurrence

DEFAULT_ENUMERATION_BUDGET = 10**6


class QuadratureError(RuntimeError):
    """Eigen-solve failure while building a rule; carries the rule parameters."""


class GridBudgetError(RuntimeError):
    """Materializing the grid would exceed the enumeration budget.

    Use TensorGrid.node(j)/weight(j) for streamed access instead.
    """


@dataclass(frozen=True)
class QuadratureRule1D:
    """An n_hat-point Gauss rule for one germ weight; weights sum to one."""

    dist: Distribution
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def npoints(self) -> int:
        return len(self.nodes)


def gauss_rule(dist: Distribution, n_hat: int) -> QuadratureRule1D:
    """Gauss rule with n_hat points for the weight of `dist`.

    Nodes are the eigenvalues of the symmetric tridiagonal matrix with the
    recurrence a_j on the diagonal and sqrt(b_j) off it; the weight of node
    j is the squared first component of its normalized eigenvector.
    """
    if n_hat < 1:
        raise ValueError(f"need at least one point, got {n_hat}")
    rec = univariate_recurrence(dist, n_hat - 1)
    if n_hat == 1:
        return QuadratureRule1D(dist, np.array([rec.a[0]]), np.array([1.0]))
    jac = np.diag(rec.a) + np.diag(np.sqrt(rec.b[1:]), 1) + np.diag(np.sqrt(rec.b[1:]), -1)
    try:
        nodes, vecs = np.linalg.eigh(jac)
    except np.linalg.LinAlgError as exc:
        raise QuadratureError(f"eigen-solve failed for {dist!r} with n_hat={n_hat}") from exc
    weights = vecs[0, :] ** 2  # b_0 = 1: the weight is a PDF
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule1D(dist, nodes, weights)


class TensorGrid:
    """Tensor product of l one-dimensional rules with streamed node access.

    The linear index j in [0, npoints) maps to per-dimension digits by
    radix-n_hat expansion, dimension 0 least significant.  In one-based
    terms (both j and the digit columns I(:, j) starting at 1) that is

        j = 1 + sum_k n_hat^(k-1) * (I(k, j) - 1)

    which round-trips exactly for every column.
    """

    def __init__(self, rules, budget: int = DEFAULT_ENUMERATION_BUDGET):
        rules = tuple(rules)
        if not rules:
            raise ValueError("need at least one rule")
        counts = {r.npoints for r in rules}
        if len(counts) != 1:
            raise ValueError(f"all rules must share one point count, got {sorted(counts)}")
        self.rules = rules
        self.n_hat = rules[0].npoints
        self.budget = int(budget)

    @property
    def dim(self) -> int:
        return len(self.rules)

    @property
    def npoints(self) -> int:
        return self.n_hat ** self.dim

    def digits(self, j: int) -> np.ndarray:
        """0-based per-dimension point numbers of linear index j."""
        if not (0 <= j < self.npoints):
            raise IndexError(f"node index {j} out of range 0..{self.npoints - 1}")
        out = np.empty(self.dim, dtype=np.int64)
        for d in range(self.dim):
            out[d] = j % self.n_hat
            j //= self.n_hat
        return out

    def index_column(self, j: int) -> np.ndarray:
        """1-based digit column of 0-based linear index j."""
        return self.digits(j) + 1

    def linear_index(self, column) -> int:
        """Inverse of index_column: 1-based digits back to the 0-based index."""
        column = np.asarray(column, dtype=np.int64)
        if column.shape != (self.dim,) or column.min() < 1 or column.max() > self.n_hat:
            raise ValueError(f"bad index column {column!r}")
        return int(np.sum((column - 1) * self.n_hat ** np.arange(self.dim)))

    def node(self, j: int) -> np.ndarray:
        d = self.digits(j)
        return np.array([self.rules[k].nodes[d[k]] for k in range(self.dim)])

    def weight(self, j: int) -> float:
        d = self.digits(j)
        w = 1.0
        for k in range(self.dim):
            w *= self.rules[k].weights[d[k]]
        return w

    def _check_budget(self):
        if self.npoints > self.budget:
            raise GridBudgetError(
                f"grid has {self.npoints} nodes, over the materialization budget "
                f"of {self.budget}; use node(j)/weight(j) streamed access"
            )

    def all_weights(self) -> np.ndarray:
        """All product weights in linear-index order (budget-guarded)."""
        self._check_budget()
        acc = self.rules[-1].weights
        for k in range(self.dim - 2, -1, -1):
            acc = np.kron(acc, self.rules[k].weights)
        return acc

    def all_nodes(self) -> np.ndarray:
        """All nodes in linear-index order, shape (npoints, dim) (budget-guarded)."""
        self._check_budget()
        lin = np.arange(self.npoints, dtype=np.int64)
        out = np.empty((self.npoints, self.dim))
        for k in range(self.dim):
            out[:, k] = self.rules[k].nodes[(lin // self.n_hat**k) % self.n_hat]
        return out


def tensor_grid(rules, budget: int = DEFAULT_ENUMERATION_BUDGET) -> TensorGrid:
    """Tensor grid over l rules that all share the same point count."""
    return TensorGrid(rules, budget=budget)


def integrate(grid: TensorGrid, g) -> np.ndarray:
    """sum_j w_j g(xi_j) over the whole grid in linear-index order."""
    total = None
    for j in range(grid.npoints):
        try:
            val = np.asarray(g(grid.node(j)), dtype=float)
        except Exception as exc:
            raise RuntimeError(f"integrand evaluation failed at grid node {j}") from exc
        term = grid.weight(j) * val
        total = term if total is None else total + term
    return total
