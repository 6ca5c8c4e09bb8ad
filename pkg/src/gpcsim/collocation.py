"""Testing-node selection for stochastic collocation of intrusive solvers.

From the (p+1)^l tensor candidates we keep exactly K = num_basis(p, l)
nodes: candidates are scanned in descending product-weight order and one is
accepted when its basis-value vector H(xi) keeps a large enough component
orthogonal to the span of the already accepted vectors.  The accepted rows
form the square collocation matrix Phi with Phi[m, k] = H_k(xi^m), whose
inverse maps stacked per-node solution values back to gPC coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import GpcBasisSet, num_basis
from .quadrature import TensorGrid

DEFAULT_BETA = 1e-2
MAX_BETA_RETRIES = 6


class SelectionError(RuntimeError):
    """Fewer than K nodes survived the orthogonality test."""

    def __init__(self, selected: int, needed: int, beta: float):
        super().__init__(
            f"selected only {selected} of {needed} testing nodes (last beta tried {beta:g})"
        )
        self.selected = selected
        self.needed = needed
        self.beta = beta


class PhiSingularError(RuntimeError):
    """Numerically singular collocation matrix; carries the condition estimate."""

    def __init__(self, cond: float):
        super().__init__(f"collocation matrix is numerically singular (cond ~ {cond:.3e})")
        self.cond = cond


@dataclass(frozen=True)
class TestingNodeSet:
    """K selected nodes with the cached collocation matrix and its inverse."""

    nodes: np.ndarray          # (K, l) germ points
    node_indices: np.ndarray   # linear candidate indices into the grid
    phi: np.ndarray            # (K, K)
    phi_inv: np.ndarray        # (K, K)
    cond_estimate: float
    beta_used: float

    @property
    def count(self) -> int:
        return len(self.nodes)


def build_phi(basis: GpcBasisSet, nodes) -> tuple[np.ndarray, np.ndarray, float]:
    """Collocation matrix Phi[m, k] = H_k(xi^m), its inverse and cond(Phi).

    The inverse comes from a dense LU factorization and is computed once;
    downstream solvers reuse it for every Newton iteration and time point.
    """
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    phi = basis.eval_many(nodes)
    if phi.shape[0] != phi.shape[1]:
        raise ValueError(f"need K={phi.shape[1]} nodes, got {phi.shape[0]}")
    cond = float(np.linalg.cond(phi))
    if not np.isfinite(cond) or cond > 1e14:
        raise PhiSingularError(cond)
    try:
        phi_inv = np.linalg.inv(phi)
    except np.linalg.LinAlgError as exc:
        raise PhiSingularError(cond) from exc
    return phi, phi_inv, cond


def _scan(basis: GpcBasisSet, grid: TensorGrid, order, beta: float, needed: int):
    """One greedy pass; returns the accepted candidate indices."""
    directions = np.zeros((needed, basis.size))
    accepted: list[int] = []
    for j in order:
        h = basis.eval_many(grid.node(j).reshape(1, -1))[0]
        hn = np.linalg.norm(h)
        m = len(accepted)
        if m == 0:
            v = h  # the largest-weight candidate is always kept
        else:
            span = directions[:m]
            v = h - span.T @ (span @ h)
            v -= span.T @ (span @ v)  # second projection keeps the span orthonormal
            if np.linalg.norm(v) / hn <= beta:
                continue
        directions[m] = v / np.linalg.norm(v)
        accepted.append(int(j))
        if len(accepted) == needed:
            break
    return accepted


def select_testing_nodes(
    basis: GpcBasisSet,
    grid: TensorGrid,
    beta: float = DEFAULT_BETA,
    max_retries: int = MAX_BETA_RETRIES,
) -> TestingNodeSet:
    """Pick K candidate nodes, largest weight first, keeping Phi well conditioned.

    Candidates with equal weights are visited in ascending linear index, so
    the selection is deterministic.  If a pass accepts fewer than K nodes
    the threshold beta is halved and the scan restarts, at most max_retries
    times, after which a SelectionError reports the count reached.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    if grid.dim != basis.dim:
        raise ValueError(f"grid has {grid.dim} dimensions, basis has {basis.dim}")
    if grid.n_hat != basis.order + 1:
        raise ValueError(
            f"candidate grid must use n_hat = p+1 = {basis.order + 1} points, got {grid.n_hat}"
        )
    weights = grid.all_weights()
    order = np.argsort(-np.abs(weights), kind="stable")
    needed = basis.size

    accepted: list[int] = []
    cur_beta = beta
    for attempt in range(max_retries + 1):
        cur_beta = beta * 0.5**attempt
        accepted = _scan(basis, grid, order, cur_beta, needed)
        if len(accepted) == needed:
            break
    else:
        raise SelectionError(len(accepted), needed, cur_beta)

    nodes = np.array([grid.node(j) for j in accepted])
    phi, phi_inv, cond = build_phi(basis, nodes)
    return TestingNodeSet(
        nodes=nodes,
        node_indices=np.array(accepted, dtype=np.int64),
        phi=phi,
        phi_inv=phi_inv,
        cond_estimate=cond,
        beta_used=cur_beta,
    )


def sparse_grid_count(p: int, l: int) -> int:
    """Node count of a level-p sparse collocation grid over l germs."""
    if p < 0 or l < 1:
        raise ValueError(f"need p >= 0 and l >= 1, got p={p}, l={l}")
    total = sum(2**i * math.comb(l - 1 + i, i) for i in range(p + 1))
    if total > 2**63 - 1:
        raise OverflowError(f"sparse-grid count {total} exceeds the 2^63-1 limit")
    return total


def speedup_model(p: int, l: int, sc_kind: str = "TP") -> float:
    """Per-solve node-count ratio of collocation over the testing-node method.

    TP compares against the full (p+1)^l tensor grid, SP against the
    sparse-grid count.  The ratio is the deterministic-solve speedup; the
    observed transient speedup additionally scales with the time-step ratio.
    """
    k = num_basis(p, l)
    if sc_kind.upper() == "TP":
        return (p + 1) ** l / k
    if sc_kind.upper() == "SP":
        return sparse_grid_count(p, l) / k
    raise ValueError(f"sc_kind must be 'TP' or 'SP', got {sc_kind!r}")
