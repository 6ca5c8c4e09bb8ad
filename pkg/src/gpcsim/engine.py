"""Deterministic DAE engine: Newton, DC operating point, transient schemes.

Everything here works on the implicit form dq(x)/dt + f(x) = s(t) through a
small problem protocol, so the same integrator drives a single circuit
realization and the coupled spectral systems alike.  A problem exposes

    size                 -> state dimension
    eval(x, t)           -> object with .q, .f and .linearize(c)
    source(t)            -> s(t)

where linearize(c) factors c*dq + df and returns something with solve(rhs).
That solve is the only linear-algebra hook; block-structured problems
substitute their own.

Time integration offers backward Euler, trapezoid, and a variable-step
two-step BDF, all with predictor/corrector local-error control.  Accepted
step sizes are recorded so a run can be replayed bit-for-bit on a fixed
schedule.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .circuit import EvalOverflowError, StochasticCircuit

SCHEMES = ("be", "tr", "gear2")
HOMOTOPY_STEPS = 10


class EngineError(RuntimeError):
    pass


class DcConvergenceError(EngineError):
    pass


class TransientError(EngineError):
    pass


@dataclass(frozen=True)
class NewtonConfig:
    abstol: float = 1e-12
    reltol: float = 1e-9
    max_iter: int = 50
    damping: float = 0.0      # max |dx_i| per iteration; 0 disables clipping


@dataclass(frozen=True)
class StepControl:
    h_init: float = 1e-9
    h_min: float = 1e-18
    h_max: float = np.inf
    lte_tol: float = 1e-3
    lte_floor: float = 1e-3   # absolute floor mixed into the per-state scale
    grow: float = 2.0
    shrink: float = 0.5
    safety: float = 0.9


@dataclass
class SolveStats:
    newton_iterations: int = 0
    residual_evals: int = 0
    linear_solves: int = 0
    linear_solve_time: float = 0.0
    steps_accepted: int = 0
    steps_rejected: int = 0

    def merge(self, other: "SolveStats"):
        self.newton_iterations += other.newton_iterations
        self.residual_evals += other.residual_evals
        self.linear_solves += other.linear_solves
        self.linear_solve_time += other.linear_solve_time
        self.steps_accepted += other.steps_accepted
        self.steps_rejected += other.steps_rejected


class DenseEval:
    """Dense linearization: factor c*dq + df with LAPACK and cache nothing."""

    __slots__ = ("q", "f", "dq", "df")

    def __init__(self, q, f, dq, df):
        self.q = q
        self.f = f
        self.dq = dq
        self.df = df

    def linearize(self, c):
        return _DenseSolve(c * self.dq + self.df)


class _DenseSolve:
    __slots__ = ("jac",)

    def __init__(self, jac):
        self.jac = jac

    def solve(self, rhs):
        return np.linalg.solve(self.jac, rhs)


@dataclass
class CircuitProblem:
    """A stochastic circuit pinned to one germ realization."""

    circuit: StochasticCircuit
    xi: np.ndarray

    @property
    def size(self) -> int:
        return self.circuit.n

    def eval(self, x, t):
        ev = self.circuit.eval_qf(x, self.xi)
        return DenseEval(ev.q, ev.f, ev.dq, ev.df)

    def source(self, t):
        return self.circuit.b_matrix @ self.circuit.source_vector(t)


# --------------------------------------------------------------------------
# Newton
# --------------------------------------------------------------------------

@dataclass
class NewtonResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float
    failure: str = ""
    eval: object = None   # problem evaluation at x when converged


def newton_solve(problem, x0, t, c, history, source, config: NewtonConfig,
                 stats: SolveStats | None = None) -> NewtonResult:
    """Solve c*q(x) + f(x) + history = source by damped Newton.

    Convergence is judged on the residual alone, checked before every
    update, so a linear system converges in exactly one iteration.
    """
    x = np.array(x0, dtype=float)
    stats = stats if stats is not None else SolveStats()
    last_norm = np.inf
    for it in range(config.max_iter + 1):
        try:
            ev = problem.eval(x, t)
        except EvalOverflowError as exc:
            return NewtonResult(x, False, it, last_norm, failure=str(exc))
        stats.residual_evals += 1
        resid = c * ev.q + ev.f + history - source
        last_norm = float(np.abs(resid).max()) if resid.size else 0.0
        if last_norm <= config.abstol + config.reltol * float(np.abs(x).max() if x.size else 0.0):
            return NewtonResult(x, True, it, last_norm, eval=ev)
        if it == config.max_iter:
            break
        try:
            tic = time.perf_counter()
            dx = ev.linearize(c).solve(-resid)
            stats.linear_solve_time += time.perf_counter() - tic
            stats.linear_solves += 1
        except np.linalg.LinAlgError as exc:
            return NewtonResult(x, False, it, last_norm, failure=f"singular jacobian: {exc}")
        if not np.isfinite(dx).all():
            return NewtonResult(x, False, it, last_norm, failure="non-finite update")
        if config.damping > 0.0:
            peak = np.abs(dx).max()
            if peak > config.damping:
                dx = dx * (config.damping / peak)
        x = x + dx
        stats.newton_iterations += 1
    return NewtonResult(x, False, config.max_iter, last_norm,
                        failure="iteration limit reached")


# --------------------------------------------------------------------------
# DC operating point
# --------------------------------------------------------------------------

@dataclass
class DcResult:
    x: np.ndarray
    iterations: int
    homotopy_used: bool
    stats: SolveStats


def dc_solve(problem, config: NewtonConfig | None = None, x0=None) -> DcResult:
    """Operating point: f(x) = s.  Direct Newton first, then a 10-step
    source ramp from zero if the cold start diverges."""
    config = config or NewtonConfig()
    stats = SolveStats()
    source = problem.source(0.0)
    zeros = np.zeros(problem.size)
    hist = zeros
    x = np.array(x0, dtype=float) if x0 is not None else zeros.copy()
    res = newton_solve(problem, x, 0.0, 0.0, hist, source, config, stats)
    if res.converged:
        return DcResult(res.x, res.iterations, False, stats)
    x = zeros.copy()
    total = res.iterations
    for k in range(1, HOMOTOPY_STEPS + 1):
        lam = k / HOMOTOPY_STEPS
        res = newton_solve(problem, x, 0.0, 0.0, hist, lam * source, config, stats)
        total += res.iterations
        if not res.converged:
            raise DcConvergenceError(
                f"operating point failed at source ramp {lam:.1f}: {res.failure or 'no convergence'}"
            )
        x = res.x
    return DcResult(x, total, True, stats)


# --------------------------------------------------------------------------
# transient
# --------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray          # (nsteps+1,)
    states: np.ndarray         # (nsteps+1, n)
    scheme: str
    h_history: np.ndarray      # accepted step sizes, (nsteps,)
    lte_history: np.ndarray    # max scaled error ratio per accepted step
    est_history: np.ndarray    # max unscaled error estimate per accepted step
    stats: SolveStats

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _predict(times, states, t_new, max_points):
    """Newton-forward extrapolation through the last few accepted points."""
    pts = min(len(times), max_points)
    ts = times[-pts:]
    xs = states[-pts:]
    # divided differences, then evaluate at t_new
    coeffs = [xs[0]]
    table = list(xs)
    for level in range(1, pts):
        nxt = []
        for i in range(pts - level):
            nxt.append((table[i + 1] - table[i]) / (ts[i + level] - ts[i]))
        table = nxt
        coeffs.append(table[0])
    acc = np.zeros_like(coeffs[0])
    for k in reversed(range(pts)):
        acc = acc * (t_new - ts[k]) + coeffs[k]
    return acc, pts


def _predictor_constant(h, gaps, order):
    """Magnitude of the extrapolation error coefficient for `order` points."""
    if order == 1:
        return h
    if order == 2:
        return h * (h + gaps[0]) / 2.0
    return h * (h + gaps[0]) * (h + gaps[0] + gaps[1]) / 6.0


def _corrector_constant(scheme, h, gaps, startup):
    if scheme == "be" or startup:
        return h * h / 2.0
    if scheme == "tr":
        return h**3 / 12.0
    # two-step BDF with ratio r = h / h_prev
    r = h / gaps[0]
    return h * h * (h + gaps[0]) * (1 + r) / (6.0 * (1 + 2 * r))


def transient_solve(problem, x0, t_end, scheme="be",
                    newton: NewtonConfig | None = None,
                    control: StepControl | None = None,
                    t_start=0.0, fixed_h=None, h_schedule=None,
                    guess_previous=False) -> Trajectory:
    """Integrate dq/dt + f = s(t) from a consistent initial state.

    Adaptive by default; `fixed_h` forces a uniform grid with no error
    control, and `h_schedule` replays a recorded sequence of accepted
    steps exactly (bit-identical arithmetic along the way).  The
    extrapolated predictor seeds Newton unless `guess_previous` asks for
    the plain previous state; the error estimate always uses the predictor.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    newton = newton or NewtonConfig()
    control = control or StepControl()
    stats = SolveStats()

    x = np.array(x0, dtype=float)
    t = float(t_start)
    times = [t]
    states = [x.copy()]
    accepted_h: list[float] = []
    lte_log: list[float] = []
    est_log: list[float] = []

    ev0 = problem.eval(x, t)
    q_prev = ev0.q
    qdot_prev = problem.source(t) - ev0.f   # consistent: dq/dt = s - f
    q_prev2 = None
    gaps: list[float] = []                  # previous accepted step sizes

    if fixed_h is not None and h_schedule is not None:
        raise ValueError("fixed_h and h_schedule are mutually exclusive")
    schedule = list(h_schedule) if h_schedule is not None else None
    adaptive = fixed_h is None and schedule is None

    if fixed_h is not None:
        h = float(fixed_h)
    elif schedule:
        h = schedule[0]
    else:
        h = min(control.h_init, control.h_max)
    max_pred_pts = 2 if scheme == "be" else 3
    step_index = 0

    while t < t_end - 1e-15 * max(1.0, abs(t_end)):
        if schedule is not None:
            if step_index >= len(schedule):
                raise TransientError("replay schedule exhausted before t_end")
            h = schedule[step_index]
        elif fixed_h is not None:
            h = float(fixed_h)
        h = min(h, t_end - t, control.h_max)
        t_new = t + h
        startup = scheme == "gear2" and q_prev2 is None

        x_pred, pred_pts = _predict(times, states, t_new, max_pred_pts)

        if scheme == "be" or startup:
            c = 1.0 / h
            hist = -q_prev / h
        elif scheme == "tr":
            c = 2.0 / h
            hist = -2.0 * q_prev / h - qdot_prev
        else:
            r = h / gaps[-1]
            a0 = (2 * r + 1) / ((r + 1) * h)
            a1 = -(r + 1) / h
            a2 = r * r / ((r + 1) * h)
            c = a0
            hist = a1 * q_prev + a2 * q_prev2

        src_new = problem.source(t_new)
        x_guess = states[-1] if guess_previous else x_pred
        res = newton_solve(problem, x_guess, t_new, c, hist, src_new, newton, stats)

        if not res.converged:
            if not adaptive:
                raise TransientError(
                    f"newton failed at t={t_new:.6g} on a fixed step: {res.failure}")
            stats.steps_rejected += 1
            h *= control.shrink
            if h < control.h_min:
                raise TransientError(
                    f"time step underflow at t={t:.6g}: h={h:.3g} < h_min")
            continue

        if adaptive and len(times) > 1:
            prev_gaps = gaps[::-1]  # most recent first
            pcoef = _predictor_constant(h, prev_gaps, pred_pts)
            ccoef = _corrector_constant(scheme, h, prev_gaps, startup)
            diff = np.abs(res.x - x_pred) * (ccoef / (ccoef + pcoef))
            scale = control.lte_tol * (np.abs(res.x) + control.lte_floor)
            ratio = float((diff / scale).max())
            if ratio > 1.0:
                stats.steps_rejected += 1
                h *= control.shrink
                if h < control.h_min:
                    raise TransientError(
                        f"time step underflow at t={t:.6g}: h={h:.3g} < h_min")
                continue
            lte_log.append(ratio)
            est_log.append(float(diff.max()))
        else:
            lte_log.append(0.0)
            est_log.append(0.0)

        # accept
        ev_new = res.eval
        if scheme == "tr":
            qdot_prev = src_new - ev_new.f
        q_prev2 = q_prev
        q_prev = ev_new.q
        gaps.append(h)
        if len(gaps) > 3:
            gaps.pop(0)
        t = t_new
        x = res.x
        times.append(t)
        states.append(x.copy())
        accepted_h.append(h)
        stats.steps_accepted += 1
        step_index += 1

        if adaptive:
            ratio = lte_log[-1]
            order = 1 if (scheme == "be" or startup) else 2
            if ratio > 0.0:
                factor = control.safety * ratio ** (-1.0 / (order + 1))
                h = h * min(control.grow, max(control.shrink, factor))
            else:
                h = h * control.grow
            h = min(h, control.h_max)

    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        scheme=scheme,
        h_history=np.array(accepted_h),
        lte_history=np.array(lte_log),
        est_history=np.array(est_log),
        stats=stats,
    )
