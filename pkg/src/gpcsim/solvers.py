"""Four routes to stochastic circuit solutions.

All methods expand the state in the same orthonormal basis; they differ in
how coefficients are obtained:

* testing (st): collocate the residual at K selected nodes and solve one
  coupled system whose Newton updates decouple into K small solves plus a
  Vandermonde back-substitution.
* galerkin (sg): project the residual onto each basis function with a
  tensor quadrature; the Jacobian couples all blocks and is solved dense.
* collocation (sc): run independent deterministic simulations at the full
  tensor grid and recover coefficients by weighted summation.
* monte carlo (mc): seeded sampling, one deterministic run per sample.

Transient versions drive the shared time-stepping engine; st keeps its
adaptive step control, while sc/mc use a fixed grid so samples share time
points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import GpcBasisSet, eval_basis, moments_from_coeffs
from .circuit import StochasticCircuit
from .collocation import TestingNodeSet, select_testing_nodes
from .engine import (
    CircuitProblem,
    DcConvergenceError,
    NewtonConfig,
    SolveStats,
    StepControl,
    TransientError,
    dc_solve,
    transient_solve,
)
from .netlist import AcAnalysis, DcAnalysis, DcSweepAnalysis, TranAnalysis
from .quadrature import gauss_rule, tensor_grid

DEFAULT_FIXED_STEPS = 2000   # sc/mc transient grid resolution when no step given


class MethodError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------

@dataclass
class GpcState:
    """Flattened coefficient vector X = [x̂_1; ...; x̂_K], each block length n."""

    X: np.ndarray
    basis: GpcBasisSet
    nodes: TestingNodeSet | None = None

    @property
    def coeffs(self) -> np.ndarray:
        return self.X.reshape(self.basis.size, -1)

    def mean(self) -> np.ndarray:
        return self.coeffs[0].copy()

    def std(self) -> np.ndarray:
        return moments_from_coeffs(self.coeffs)[1]

    def reconstruct(self, xi) -> np.ndarray:
        return eval_basis(self.basis, xi) @ self.coeffs

    def at_nodes(self) -> np.ndarray:
        if self.nodes is None:
            raise ValueError("state carries no testing-node set")
        return self.nodes.phi @ self.coeffs


@dataclass
class GpcTrajectory:
    """Coefficient history: coeffs[i] is the (K, n) block matrix at times[i]."""

    times: np.ndarray
    coeffs: np.ndarray               # (T, K, n)
    basis: GpcBasisSet
    nodes: TestingNodeSet | None
    method: str
    h_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    newton_iterations: int = 0
    lte_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stats: SolveStats | None = None
    ensemble: "SampleEnsemble | None" = None   # sc keeps its per-node runs

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0) and len(self.times) > 1:
            raise ValueError("trajectory times must increase strictly")

    def state(self, i: int) -> GpcState:
        return GpcState(self.coeffs[i].ravel(), self.basis, self.nodes)

    @property
    def final(self) -> GpcState:
        return self.state(len(self.times) - 1)


@dataclass
class SampleEnsemble:
    """Per-sample solutions on a shared time grid."""

    samples: np.ndarray       # (S, l) germ draws
    weights: np.ndarray       # quadrature weights or uniform 1/S
    times: np.ndarray         # (T,)
    solutions: np.ndarray     # (S, T, n)
    n_samples: int
    failures: int = 0
    method: str = "mc"
    stats: SolveStats | None = None

    def mean(self) -> np.ndarray:
        return np.einsum("s,stn->tn", self.weights, self.solutions)

    def std(self) -> np.ndarray:
        mu = self.mean()
        var = np.einsum("s,stn->tn", self.weights,
                        (self.solutions - mu[None]) ** 2)
        return np.sqrt(np.maximum(var, 0.0))

    def standard_error(self) -> np.ndarray:
        return self.std() / math.sqrt(self.n_samples)


# --------------------------------------------------------------------------
# stacked problems
# --------------------------------------------------------------------------

class _StackedEvalST:
    """Residual pieces at all testing nodes plus the decoupled linear hook."""

    __slots__ = ("q", "f", "dqs", "dfs", "phi_inv", "n")

    def __init__(self, q, f, dqs, dfs, phi_inv, n):
        self.q = q
        self.f = f
        self.dqs = dqs
        self.dfs = dfs
        self.phi_inv = phi_inv
        self.n = n

    def linearize(self, c):
        blocks = [c * dq + df for dq, df in zip(self.dqs, self.dfs)]
        return _DecoupledSolve(blocks, self.phi_inv, self.n)


class _DecoupledSolve:
    __slots__ = ("blocks", "phi_inv", "n")

    def __init__(self, blocks, phi_inv, n):
        self.blocks = blocks
        self.phi_inv = phi_inv
        self.n = n

    def solve(self, rhs):
        return st_decoupled_linear_step(self.blocks, self.phi_inv,
                                        -rhs.reshape(len(self.blocks), self.n))


def st_decoupled_linear_step(jac_blocks, phi_inv, residual) -> np.ndarray:
    """Two-stage update: blockwise solves, then the inverse Vandermonde map.

    residual has one row per testing node; the result is the flattened
    coefficient update solving the coupled system blockdiag(J̃)·(Φ⊗I)·ΔX = −R.
    """
    rows = []
    for m, (jac, r) in enumerate(zip(jac_blocks, residual)):
        try:
            rows.append(np.linalg.solve(jac, -r))
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError(
                f"singular jacobian block at testing node {m}") from None
    dz = np.vstack(rows)
    return (phi_inv @ dz).ravel()


@dataclass
class STProblem:
    """Collocated residual: X holds coefficients, residual lives at nodes."""

    circuit: StochasticCircuit
    basis: GpcBasisSet
    nodes: TestingNodeSet

    @property
    def size(self) -> int:
        return self.circuit.n * self.basis.size

    def eval(self, X, t):
        n = self.circuit.n
        k = self.basis.size
        states = self.nodes.phi @ X.reshape(k, n)
        q = np.empty((k, n))
        f = np.empty((k, n))
        dqs, dfs = [], []
        for m in range(k):
            ev = self.circuit.eval_qf(states[m], self.nodes.nodes[m])
            q[m], f[m] = ev.q, ev.f
            dqs.append(ev.dq)
            dfs.append(ev.df)
        return _StackedEvalST(q.ravel(), f.ravel(), dqs, dfs,
                              self.nodes.phi_inv, n)

    def source(self, t):
        s = self.circuit.b_matrix @ self.circuit.source_vector(t)
        return np.tile(s, self.basis.size)


def st_residual(circuit, basis, nodes, X, t=0.0, c=0.0, history=None) -> np.ndarray:
    """Collocated residual, block m = c·q(x̂(ξᵐ)) + f(x̂(ξᵐ)) + hist − B u(t).

    With the defaults (c = 0, no history) this is the static DC residual;
    a time discretization supplies c and the charge-history term to get the
    full transient residual at one step.
    """
    problem = STProblem(circuit, basis, nodes)
    ev = problem.eval(np.asarray(X, dtype=float), t)
    r = c * ev.q + ev.f - problem.source(t)
    if history is not None:
        r = r + history
    return r


class _StackedEvalSG:
    __slots__ = ("q", "f", "proj", "point_dq", "point_df", "n", "k")

    def __init__(self, q, f, proj, point_dq, point_df, n, k):
        self.q = q
        self.f = f
        self.proj = proj          # (Q, K, K) pairwise basis products * weights
        self.point_dq = point_dq  # (Q, n, n)
        self.point_df = point_df
        self.n = n
        self.k = k

    def linearize(self, c):
        point_jac = c * self.point_dq + self.point_df
        coupled = np.tensordot(self.proj, point_jac, axes=(0, 0))
        full = coupled.transpose(0, 2, 1, 3).reshape(self.n * self.k, -1)
        return _SgSolve(full)


class _SgSolve:
    __slots__ = ("jac",)

    def __init__(self, jac):
        self.jac = jac

    def solve(self, rhs):
        return np.linalg.solve(self.jac, rhs)


@dataclass
class SGProblem:
    """Galerkin projection with a (p+1)-point tensor quadrature."""

    circuit: StochasticCircuit
    basis: GpcBasisSet

    def __post_init__(self):
        order = int(self.basis.indices.sum(axis=1).max()) if self.basis.size > 1 else 0
        rules = [gauss_rule(p.dist, order + 1) for p in self.circuit.params]
        if rules:
            grid = tensor_grid(rules)
            self.points = grid.all_nodes()
            self.weights = grid.all_weights()
        else:
            self.points = np.zeros((1, 0))
            self.weights = np.ones(1)
        self.hmat = self.basis.eval_many(self.points)        # (Q, K)
        wh = self.weights[:, None] * self.hmat
        self.proj = np.einsum("qi,qj->qij", wh, self.hmat)   # (Q, K, K)
        self.wh = wh

    @property
    def size(self) -> int:
        return self.circuit.n * self.basis.size

    def eval(self, X, t):
        n = self.circuit.n
        k = self.basis.size
        states = self.hmat @ X.reshape(k, n)                 # (Q, n)
        nq = len(self.weights)
        qs = np.empty((nq, n))
        fs = np.empty((nq, n))
        dqs = np.empty((nq, n, n))
        dfs = np.empty((nq, n, n))
        for s in range(nq):
            ev = self.circuit.eval_qf(states[s], self.points[s])
            qs[s], fs[s] = ev.q, ev.f
            dqs[s], dfs[s] = ev.dq, ev.df
        q_proj = self.wh.T @ qs                              # (K, n)
        f_proj = self.wh.T @ fs
        return _StackedEvalSG(q_proj.ravel(), f_proj.ravel(), self.proj,
                              dqs, dfs, n, k)

    def source(self, t):
        # projections of the deterministic source: only the constant basis
        # function survives, so block 1 is B u and the rest vanish
        s = np.zeros((self.basis.size, self.circuit.n))
        s[0] = self.circuit.b_matrix @ self.circuit.source_vector(t)
        return s.ravel()


# --------------------------------------------------------------------------
# method drivers
# --------------------------------------------------------------------------

def _basis_for(circuit, order) -> GpcBasisSet:
    if circuit.l == 0:
        raise MethodError("circuit has no random parameters; nothing to expand")
    return GpcBasisSet([p.dist for p in circuit.params], order)


def _nominal_dc(circuit, newton) -> np.ndarray:
    prob = CircuitProblem(circuit, circuit.nominal_germ())
    return dc_solve(prob, newton).x


def _initial_state(circuit, basis, newton) -> np.ndarray:
    X0 = np.zeros((basis.size, circuit.n))
    X0[0] = _nominal_dc(circuit, newton)
    return X0.ravel()


def _wrap_engine_error(exc, method):
    raise type(exc)(f"[method={method}] {exc}") from exc


def _sweep_levels(analysis: DcSweepAnalysis) -> np.ndarray:
    count = int(math.floor((analysis.stop - analysis.start) / analysis.step + 1e-9)) + 1
    return analysis.start + analysis.step * np.arange(count)


def _intrusive_solve(problem_factory, circuit, basis, nodes, analysis, method,
                     newton=None, control=None, scheme="be", fixed_h=None):
    newton = newton or NewtonConfig()
    control = control or StepControl()
    problem = problem_factory(circuit)
    try:
        X0 = _initial_state(circuit, basis, newton)
    except DcConvergenceError as exc:
        _wrap_engine_error(exc, f"{method} nominal init")

    if isinstance(analysis, DcAnalysis):
        try:
            res = dc_solve(problem, newton, x0=X0)
        except DcConvergenceError as exc:
            _wrap_engine_error(exc, method)
        return GpcTrajectory(
            times=np.zeros(1), coeffs=res.x.reshape(1, basis.size, circuit.n),
            basis=basis, nodes=nodes, method=method,
            newton_iterations=res.stats.newton_iterations, stats=res.stats)

    if isinstance(analysis, DcSweepAnalysis):
        levels = _sweep_levels(analysis)
        stats = SolveStats()
        coeffs = np.empty((len(levels), basis.size, circuit.n))
        warm = X0
        for i, level in enumerate(levels):
            swept = circuit.with_source_dc(analysis.source, level)
            prob = problem_factory(swept)
            try:
                res = dc_solve(prob, newton, x0=warm)
            except DcConvergenceError as exc:
                _wrap_engine_error(exc, f"{method} sweep {analysis.source}={level:g}")
            warm = res.x
            coeffs[i] = res.x.reshape(basis.size, circuit.n)
            stats.merge(res.stats)
        return GpcTrajectory(
            times=levels, coeffs=coeffs, basis=basis, nodes=nodes,
            method=method, newton_iterations=stats.newton_iterations, stats=stats)

    if isinstance(analysis, TranAnalysis):
        try:
            dc = dc_solve(problem, newton, x0=X0)
            kw = {}
            if fixed_h is not None:
                kw["fixed_h"] = fixed_h
            if analysis.hmax is not None:
                control = replace(control, h_max=analysis.hmax)
            traj = transient_solve(problem, dc.x, analysis.tstop, scheme=scheme,
                                   newton=newton, control=control,
                                   guess_previous=True, **kw)
        except (DcConvergenceError, TransientError) as exc:
            _wrap_engine_error(exc, method)
        traj.stats.merge(dc.stats)
        return GpcTrajectory(
            times=traj.times,
            coeffs=traj.states.reshape(len(traj.times), basis.size, circuit.n),
            basis=basis, nodes=nodes, method=method,
            h_history=traj.h_history, lte_history=traj.lte_history,
            newton_iterations=traj.stats.newton_iterations, stats=traj.stats)

    raise MethodError(f"unsupported analysis for {method}: {analysis!r}")


def st_solve(circuit, order, analysis, beta=None, newton=None, control=None,
             scheme="be", fixed_h=None, node_set=None):
    """Stochastic testing: collocated intrusive solve with decoupled updates."""
    basis = _basis_for(circuit, order)
    if node_set is None:
        rules = [gauss_rule(p.dist, order + 1) for p in circuit.params]
        grid = tensor_grid(rules)
        kwargs = {} if beta is None else {"beta": beta}
        node_set = select_testing_nodes(basis, grid, **kwargs)
    return _intrusive_solve(
        lambda c: STProblem(c, basis, node_set), circuit, basis, node_set,
        analysis, "st", newton=newton, control=control, scheme=scheme,
        fixed_h=fixed_h)


def sg_solve(circuit, order, analysis, newton=None, control=None,
             scheme="be", fixed_h=None):
    """Stochastic Galerkin: projected intrusive solve, coupled dense updates."""
    basis = _basis_for(circuit, order)
    return _intrusive_solve(
        lambda c: SGProblem(c, basis), circuit, basis, None,
        analysis, "sg", newton=newton, control=control, scheme=scheme,
        fixed_h=fixed_h)


def _run_deterministic(circuit, xi, analysis, newton, scheme, fixed_h, label):
    """One deterministic realization on the shared grid; returns (times, states)."""
    prob = CircuitProblem(circuit, xi)
    if isinstance(analysis, DcAnalysis):
        res = dc_solve(prob, newton)
        return np.zeros(1), res.x[None, :], res.stats
    if isinstance(analysis, DcSweepAnalysis):
        levels = _sweep_levels(analysis)
        stats = SolveStats()
        rows = np.empty((len(levels), circuit.n))
        warm = None
        for i, level in enumerate(levels):
            swept = circuit.with_source_dc(analysis.source, level)
            res = dc_solve(CircuitProblem(swept, xi), newton, x0=warm)
            warm = res.x
            rows[i] = res.x
            stats.merge(res.stats)
        return levels, rows, stats
    if isinstance(analysis, TranAnalysis):
        h = fixed_h if fixed_h is not None else analysis.tstop / DEFAULT_FIXED_STEPS
        dc = dc_solve(prob, newton)
        traj = transient_solve(prob, dc.x, analysis.tstop, scheme=scheme,
                               newton=newton, fixed_h=h)
        traj.stats.merge(dc.stats)
        return traj.times, traj.states, traj.stats
    raise MethodError(f"unsupported analysis for {label}: {analysis!r}")


def sc_solve(circuit, order, analysis, newton=None, scheme="be",
             fixed_h=None, jobs=None):
    """Tensor-grid collocation: (p+1)^l independent runs, then projection."""
    basis = _basis_for(circuit, order)
    newton = newton or NewtonConfig()
    rules = [gauss_rule(p.dist, order + 1) for p in circuit.params]
    grid = tensor_grid(rules)
    points = grid.all_nodes()
    weights = grid.all_weights()

    def one(s):
        try:
            return _run_deterministic(circuit, points[s], analysis, newton,
                                      scheme, fixed_h, "sc")
        except (DcConvergenceError, TransientError) as exc:
            raise type(exc)(
                f"[method=sc node {s} xi={np.array2string(points[s], precision=4)}] {exc}"
            ) from exc

    results = _map_maybe_parallel(one, range(grid.npoints), jobs)
    times = results[0][0]
    stats = SolveStats()
    sols = np.stack([r[1] for r in results])          # (S, T, n)
    for r in results:
        stats.merge(r[2])

    hmat = basis.eval_many(points)                    # (S, K)
    coeffs = np.einsum("s,sk,stn->tkn", weights, hmat, sols)
    ensemble = SampleEnsemble(
        samples=points, weights=weights, times=times, solutions=sols,
        n_samples=grid.npoints, method="sc")
    return GpcTrajectory(
        times=times, coeffs=coeffs, basis=basis, nodes=None, method="sc",
        newton_iterations=stats.newton_iterations, stats=stats,
        ensemble=ensemble)


def mc_solve(circuit, n_samples, seed, analysis, newton=None, scheme="be",
             fixed_h=None, mean_point=False, jobs=None,
             max_failure_fraction=0.01):
    """Plain Monte Carlo: seeded draws, one deterministic run per sample."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if circuit.l == 0:
        raise MethodError("circuit has no random parameters; nothing to sample")
    newton = newton or NewtonConfig()
    if mean_point:
        samples = np.tile(circuit.nominal_germ(), (n_samples, 1))
    else:
        rng = np.random.default_rng(seed)
        cols = [p.dist.sample(rng, n_samples) for p in circuit.params]
        samples = np.column_stack(cols)

    def one(s):
        try:
            return _run_deterministic(circuit, samples[s], analysis, newton,
                                      scheme, fixed_h, "mc")
        except (DcConvergenceError, TransientError):
            return None

    results = _map_maybe_parallel(one, range(n_samples), jobs)
    good = [r for r in results if r is not None]
    failures = n_samples - len(good)
    if failures > max_failure_fraction * n_samples:
        raise MethodError(
            f"{failures}/{n_samples} samples failed (> {max_failure_fraction:.0%})")
    times = good[0][0]
    sols = np.stack([r[1] for r in good])
    kept = len(good)
    stats = SolveStats()
    for r in good:
        stats.merge(r[2])
    return SampleEnsemble(
        samples=np.stack([samples[s] for s, r in enumerate(results) if r is not None]),
        weights=np.full(kept, 1.0 / kept),
        times=times,
        solutions=sols,
        n_samples=kept,
        failures=failures,
        method="mc",
        stats=stats)


def _map_maybe_parallel(fn, indices, jobs):
    if jobs and jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, indices))
    return [fn(i) for i in indices]


# --------------------------------------------------------------------------
# AC small-signal
# --------------------------------------------------------------------------

@dataclass
class AcResult:
    freqs: np.ndarray
    coeffs: np.ndarray           # (F, K, n) complex
    basis: GpcBasisSet
    nodes: TestingNodeSet
    stats: SolveStats | None = None

    def state(self, i: int) -> GpcState:
        return GpcState(self.coeffs[i].ravel(), self.basis, self.nodes)

    def gain_coeffs(self, state_index: int) -> np.ndarray:
        return self.coeffs[:, :, state_index]


def frequency_grid(fstart, fstop, points_per_decade) -> np.ndarray:
    decades = math.log10(fstop / fstart)
    count = max(int(math.floor(decades * points_per_decade + 1e-9)) + 1, 1)
    freqs = fstart * 10.0 ** (np.arange(count) / points_per_decade)
    return freqs[freqs <= fstop * (1 + 1e-12)]


def ac_solve(circuit, order, freqs, beta=None, newton=None):
    """Frequency sweep of the linearization around the stochastic DC point.

    Each testing node gets its own small-signal system (G + jwC) y = B u_ac;
    nodal solutions map back to coefficients through the inverse Vandermonde.
    `freqs` is either an explicit frequency array or an AC analysis card.
    """
    dc = st_solve(circuit, order, DcAnalysis(), beta=beta, newton=newton)
    basis, nodes = dc.basis, dc.nodes
    dc_states = dc.final.at_nodes()                 # (K, n)
    n, k = circuit.n, basis.size

    lins = []
    for m in range(k):
        ev = circuit.eval_qf(dc_states[m], nodes.nodes[m])
        lins.append((ev.df, ev.dq))
    rhs = circuit.b_matrix @ circuit.ac_source_vector()

    if isinstance(freqs, AcAnalysis):
        freqs = frequency_grid(freqs.fstart, freqs.fstop,
                               freqs.points_per_decade)
    else:
        freqs = np.asarray(freqs, dtype=float)
    coeffs = np.empty((len(freqs), k, n), dtype=complex)
    for i, freq in enumerate(freqs):
        omega = 2.0 * math.pi * freq
        nodal = np.empty((k, n), dtype=complex)
        for m, (g, c) in enumerate(lins):
            try:
                nodal[m] = np.linalg.solve(g + 1j * omega * c, rhs)
            except np.linalg.LinAlgError:
                raise np.linalg.LinAlgError(
                    f"singular small-signal system at node {m}, f={freq:g} Hz"
                ) from None
        coeffs[i] = nodes.phi_inv @ nodal
    return AcResult(freqs=freqs, coeffs=coeffs, basis=basis, nodes=nodes,
                    stats=dc.stats)


# --------------------------------------------------------------------------
# uniform front door used by the cli
# --------------------------------------------------------------------------

def run_analysis(circuit, method, order, analysis, *, beta=None, seed=0,
                 n_samples=1000, newton=None, control=None, scheme="be",
                 fixed_h=None, jobs=None, mean_point=False):
    if isinstance(analysis, AcAnalysis):
        if method != "st":
            raise MethodError("ac analysis is implemented for the st method only")
        return ac_solve(circuit, order, analysis, beta=beta, newton=newton)
    if method == "st":
        return st_solve(circuit, order, analysis, beta=beta, newton=newton,
                        control=control, scheme=scheme, fixed_h=fixed_h)
    if method == "sg":
        return sg_solve(circuit, order, analysis, newton=newton,
                        control=control, scheme=scheme, fixed_h=fixed_h)
    if method == "sc":
        return sc_solve(circuit, order, analysis, newton=newton, scheme=scheme,
                        fixed_h=fixed_h, jobs=jobs)
    if method == "mc":
        return mc_solve(circuit, n_samples, seed, analysis, newton=newton,
                        scheme=scheme, fixed_h=fixed_h, jobs=jobs,
                        mean_point=mean_point)
    raise MethodError(f"unknown method {method!r}")
