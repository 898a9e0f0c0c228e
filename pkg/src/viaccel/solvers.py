"""First-order steppers and the instrumented run loop.

All variational-inequality methods are single projected steps driven by a
five-parameter rule

    half = z + beta (z - z_prev) - eta F(z)            [projected if restricted]
    next = P( z - alpha F(half) + gamma (z - z_prev) - tau (F(z) - F(z_prev)) )

with the classical methods as named specializations: vanilla projection
(alpha only), extra-gradient (alpha, eta), past-gradient/optimistic steps
(alpha, tau), heavy-ball (alpha, gamma), and the accelerated extrapolation
method (alpha, beta with gamma = beta). The dedicated steppers below spell
out their own update arithmetic instead of delegating to the general rule,
so regressions in either are visible against the other.

The optimization scheme keeps two sequences (x, v) and nine coefficients;
see step_opt_extra_point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import MonotoneProblem, SmoothObjective, as_vector
from .harness import (DIVERGENCE_NORM, DivergenceError, IterateTrace,
                      TraceRecord, now_ns)

VI_METHODS = ("vanilla", "extra-gradient", "ogda", "heavy-ball", "nesterov",
              "extra-point")
OPT_METHODS = ("opt-extra-point",)
METHODS = VI_METHODS + OPT_METHODS

Y_RULES = ("p", "grad-step")


def _finite_nonneg(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise ValueError(f"{name} must be finite and nonnegative, got {value}")
    return value


@dataclass(frozen=True)
class ViParams:
    """Step coefficients (alpha, beta, gamma, eta, tau), all nonnegative.

    alpha scales the operator at the half point, eta the operator in the
    half-point build, beta and gamma the two momentum terms, tau the
    operator-difference correction.
    """

    alpha: float
    beta: float = 0.0
    gamma: float = 0.0
    eta: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "eta", "tau"):
            object.__setattr__(self, name, _finite_nonneg(name, getattr(self, name)))


@dataclass(frozen=True)
class OptParams:
    """Coefficients for the two-sequence minimization scheme.

    t holds the nine step coefficients t1..t9; theta is the intended
    potential contraction amount, c the distance weight in the potential,
    delta the inner gradient-step length. Construction checks only signs
    and finiteness; the consistency ties between the fields are the
    certifier's job.
    """

    t: tuple
    theta: float
    c: float
    delta: float

    def __post_init__(self):
        t = tuple(float(v) for v in self.t)
        if len(t) != 9:
            raise ValueError("t must hold exactly nine coefficients")
        for i, v in enumerate(t, start=1):
            _finite_nonneg(f"t{i}", v)
        object.__setattr__(self, "t", t)
        th = float(self.theta)
        if not (math.isfinite(th) and 0.0 < th <= 1.0):
            raise ValueError("theta must lie in (0, 1]")
        object.__setattr__(self, "theta", th)
        c = float(self.c)
        if not (math.isfinite(c) and c > 0.0):
            raise ValueError("c must be positive and finite")
        object.__setattr__(self, "c", c)
        d = float(self.delta)
        if not (math.isfinite(d) and 0.0 < d < 1.0):
            raise ValueError("delta must lie in (0, 1)")
        object.__setattr__(self, "delta", d)


@dataclass(frozen=True)
class ViState:
    """Two-point history with cached operator values (never stale)."""

    z_curr: np.ndarray
    z_prev: np.ndarray
    f_curr: np.ndarray
    f_prev: np.ndarray
    z_half: Optional[np.ndarray] = None


@dataclass(frozen=True)
class OptState:
    """Primary sequence x and auxiliary sequence v of the opt scheme."""

    x_curr: np.ndarray
    v_curr: np.ndarray


def vi_state(problem: MonotoneProblem, z0) -> ViState:
    """Initial state with the standard two-history start z_prev = z_curr."""
    z0 = as_vector(z0, problem.dimension)
    f0 = problem.operator(z0)
    return ViState(z_curr=z0, z_prev=z0.copy(), f_curr=f0, f_prev=f0.copy())


def _advance(problem: MonotoneProblem, state: ViState, z_new: np.ndarray,
             z_half: Optional[np.ndarray]) -> ViState:
    return ViState(z_curr=z_new, z_prev=state.z_curr,
                   f_curr=problem.operator(z_new), f_prev=state.f_curr,
                   z_half=z_half)


def step_vanilla(problem: MonotoneProblem, state: ViState, alpha: float) -> ViState:
    """Projected operator step z <- P(z - alpha F(z))."""
    z_new = problem.feasible_set.project(state.z_curr - alpha * state.f_curr)
    return _advance(problem, state, z_new, state.z_curr)


def step_extragradient(problem: MonotoneProblem, state: ViState, alpha: float,
                       eta: float, restricted: bool = False) -> ViState:
    """Half step with eta, full projected step with alpha at the half point.

    The restricted variant projects the half point as well; it is mandatory
    when the operator is only defined on the feasible set.
    """
    if problem.domain_restricted and not restricted:
        raise ValueError("domain-restricted problems need the projected half point")
    half = state.z_curr - eta * state.f_curr
    if restricted:
        half = problem.feasible_set.project(half)
    z_new = problem.feasible_set.project(state.z_curr - alpha * problem.operator(half))
    return _advance(problem, state, z_new, half)


def step_ogda(problem: MonotoneProblem, state: ViState, alpha: float,
              tau: float) -> ViState:
    """Operator step corrected by the most recent operator difference."""
    z_new = problem.feasible_set.project(
        state.z_curr - alpha * state.f_curr - tau * (state.f_curr - state.f_prev)
    )
    return _advance(problem, state, z_new, state.z_curr)


def step_heavy_ball(problem: MonotoneProblem, state: ViState, alpha: float,
                    gamma: float) -> ViState:
    """Operator step plus momentum gamma (z - z_prev)."""
    z_new = problem.feasible_set.project(
        state.z_curr - alpha * state.f_curr + gamma * (state.z_curr - state.z_prev)
    )
    return _advance(problem, state, z_new, state.z_curr)


def step_nesterov(problem: MonotoneProblem, state: ViState, alpha: float,
                  beta: float) -> ViState:
    """Extrapolate by beta, evaluate the operator there, keep the momentum.

    The operator is evaluated at the unprojected extrapolated point, so this
    stepper is unavailable on domain-restricted problems.
    """
    if problem.domain_restricted:
        raise ValueError("extrapolation evaluates the operator off the set; "
                         "unavailable on domain-restricted problems")
    mom = beta * (state.z_curr - state.z_prev)
    half = state.z_curr + mom
    z_new = problem.feasible_set.project(
        state.z_curr - alpha * problem.operator(half) + mom
    )
    return _advance(problem, state, z_new, half)


def step_extra_point(problem: MonotoneProblem, state: ViState,
                     params: ViParams, restricted: bool = False) -> ViState:
    """One step of the general five-parameter rule.

    With eta = beta = 0 the half point coincides with the current iterate
    and the cached operator value is reused, which makes the named
    specializations reproduce bit for bit.
    """
    if problem.domain_restricted and not restricted:
        raise ValueError("domain-restricted problems need the projected half point")
    al, be, ga, eta, ta = params.alpha, params.beta, params.gamma, params.eta, params.tau
    zc, zp = state.z_curr, state.z_prev
    if eta == 0.0 and be == 0.0:
        half = zc
        f_half = state.f_curr
    else:
        half = zc + be * (zc - zp) - eta * state.f_curr
        if restricted:
            half = problem.feasible_set.project(half)
        f_half = problem.operator(half)
    z_new = problem.feasible_set.project(
        zc - al * f_half + ga * (zc - zp) - ta * (state.f_curr - state.f_prev)
    )
    return _advance(problem, state, z_new, half)


def step_opt_extra_point(objective: SmoothObjective, state: OptState,
                         params: OptParams, y_rule: str = "p") -> OptState:
    """One step of the nine-coefficient two-sequence minimization scheme.

    p mixes the sequences with (t1, t2); y is either p itself or one
    gradient step from p (y_rule "p" or "grad-step"; both keep the anchor
    alignment the analysis needs); z takes a t3-scaled gradient step from y;
    the new x combines gradients at z and y with the t4..t6 weights; the new
    v is the (t7, t8, t9) convex-plus-gradient update.
    """
    if y_rule not in Y_RULES:
        raise ValueError(f"y_rule must be one of {Y_RULES}")
    t1, t2, t3, t4, t5, t6, t7, t8, t9 = params.t
    L = objective.lip
    x, v = state.x_curr, state.v_curr

    p = t1 * x + t2 * v
    if y_rule == "p":
        y = p
    else:
        y = p - objective.gradient(p) / L
    gy = objective.gradient(y)
    z = y - (t3 / L) * gy
    gz = objective.gradient(z)
    x_new = y - (t4 / L) * gz - (t5 / L) * (gz - gy) + t6 * (z - y)
    v_new = t7 * v + t8 * y - t9 * gy
    return OptState(x_curr=x_new, v_curr=v_new)


def step_opt_extra_point_simplified(objective: SmoothObjective, state: OptState,
                                    theta: float, delta: float) -> OptState:
    """The reduced form of the default-parameter scheme with y = p.

    Algebraically identical to step_opt_extra_point at the default
    coefficient choice, using grad f(y) = (L / delta) (y - z) to eliminate
    the gradient from the v update:

        y  = (x + theta v) / (1 + theta)
        z  = y - (delta / L) grad f(y)
        x+ = y - (t4/L) grad f(z) - (t5/L)(grad f(z) - grad f(y)) + t6 (z - y)
        v+ = (1 - theta) v + theta (mu delta - L) / (mu delta) y
             + theta L / (mu delta) z
    """
    L, mu = objective.lip, objective.mu
    den = (1.0 + delta) ** 2
    t4, t5, t6 = (1.0 - delta) / den, 1.0 / den, 3.0 / den
    x, v = state.x_curr, state.v_curr

    y = (x + theta * v) / (1.0 + theta)
    gy = objective.gradient(y)
    z = y - (delta / L) * gy
    gz = objective.gradient(z)
    x_new = y - (t4 / L) * gz - (t5 / L) * (gz - gy) + t6 * (z - y)
    v_new = (1.0 - theta) * v + (theta * (mu * delta - L) / (mu * delta)) * y \
        + (theta * L / (mu * delta)) * z
    return OptState(x_curr=x_new, v_curr=v_new)


@dataclass(frozen=True)
class StopRule:
    """Loop control: hard iteration cap plus optional residual tolerance.

    residual_tol > 0 stops once the natural residual (or gradient norm for
    objectives) falls to the tolerance; 0 runs to max_iter.
    """

    max_iter: int
    residual_tol: float = 0.0

    def __post_init__(self):
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if not (math.isfinite(self.residual_tol) and self.residual_tol >= 0.0):
            raise ValueError("residual_tol must be nonnegative and finite")


def _vi_merits(problem: MonotoneProblem, z: np.ndarray, fz: np.ndarray):
    res = float(np.linalg.norm(z - problem.feasible_set.project(z - fz)))
    if problem.feasible_set.unbounded_whole_space:
        return float(np.linalg.norm(fz)), res, res
    return float(abs(z @ fz)), res, res


def run(target, method: str, params, start, stop: StopRule,
        potential: Optional[Callable] = None,
        restricted: Optional[bool] = None) -> IterateTrace:
    """Drive one method and record a full per-iteration trace.

    target is a MonotoneProblem for the operator methods or a
    SmoothObjective for "opt-extra-point". restricted selects the
    projected-half-point variants of "extra-gradient" and "extra-point";
    None picks them automatically on constrained or domain-restricted
    problems. Divergent iterates (non-finite, or norm beyond
    DIVERGENCE_NORM) raise DivergenceError carrying the partial trace.

    Records are kept for every iteration; thinning is an export concern.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method in OPT_METHODS:
        if not isinstance(target, SmoothObjective):
            raise ValueError(f"{method} expects a SmoothObjective")
        return _run_opt(target, method, params, start, stop, potential)
    if not isinstance(target, MonotoneProblem):
        raise ValueError(f"{method} expects a MonotoneProblem")
    return _run_vi(target, method, params, start, stop, potential, restricted)


def _run_vi(problem, method, params: ViParams, start, stop, potential,
            restricted) -> IterateTrace:
    fset = problem.feasible_set
    z0 = as_vector(start, problem.dimension)
    if not fset.contains(z0, tol=1e-12 * (1.0 + float(np.linalg.norm(z0)))):
        raise ValueError("start point is not feasible")
    if restricted is None:
        restricted = problem.domain_restricted or not fset.unbounded_whole_space

    if method == "extra-gradient" and params.eta <= 0.0:
        raise ValueError("extra-gradient needs a positive half-step eta")

    def do_step(state: ViState) -> ViState:
        if method == "vanilla":
            return step_vanilla(problem, state, params.alpha)
        if method == "extra-gradient":
            return step_extragradient(problem, state, params.alpha, params.eta,
                                      restricted=restricted)
        if method == "ogda":
            return step_ogda(problem, state, params.alpha, params.tau)
        if method == "heavy-ball":
            return step_heavy_ball(problem, state, params.alpha, params.gamma)
        if method == "nesterov":
            return step_nesterov(problem, state, params.alpha, params.beta)
        return step_extra_point(problem, state, params, restricted=restricted)

    trace = IterateTrace(kind=problem.kind, method=method, params=params,
                         meta={"mu": problem.mu, "lip": problem.lip,
                               "sigma": problem.sigma, "seed": problem.seed,
                               "restricted": restricted})
    zs = problem.solution
    t0 = now_ns()
    state = vi_state(problem, z0)

    def record(k: int, state: ViState) -> float:
        prim, aux, res = _vi_merits(problem, state.z_curr, state.f_curr)
        dsq = None
        if zs is not None:
            d = state.z_curr - zs
            dsq = float(d @ d)
        pot = float(potential(state)) if potential is not None else None
        trace.records.append(TraceRecord(k=k, merit_primary=prim,
                                         merit_aux=aux, dist_sq=dsq,
                                         potential=pot,
                                         elapsed_ns=now_ns() - t0))
        return res

    res = record(0, state)
    for k in range(1, stop.max_iter + 1):
        if stop.residual_tol > 0.0 and res <= stop.residual_tol:
            trace.terminated_by = "tolerance"
            break
        state = do_step(state)
        zn = float(np.linalg.norm(state.z_curr))
        if not np.isfinite(zn) or zn > DIVERGENCE_NORM or \
                not np.all(np.isfinite(state.z_curr)):
            trace.terminated_by = "divergence"
            trace.final_point = state.z_curr
            raise DivergenceError(trace)
        res = record(k, state)
    else:
        if stop.residual_tol > 0.0 and res <= stop.residual_tol:
            trace.terminated_by = "tolerance"
    trace.final_point = state.z_curr
    return trace


def _run_opt(objective, method, params: OptParams, start, stop,
             potential) -> IterateTrace:
    x0 = as_vector(start, objective.dimension)
    trace = IterateTrace(kind=objective.kind, method=method, params=params,
                         meta={"mu": objective.mu, "lip": objective.lip,
                               "sigma": objective.sigma, "seed": objective.seed,
                               "f_star": objective.optimal_value})
    xs = objective.minimizer
    t0 = now_ns()
    state = OptState(x_curr=x0, v_curr=x0.copy())

    def record(k: int, state: OptState) -> float:
        gn = float(np.linalg.norm(objective.gradient(state.x_curr)))
        gap = None
        if objective.optimal_value is not None:
            gap = float(objective.value(state.x_curr) - objective.optimal_value)
        dsq = None
        if xs is not None:
            d = state.x_curr - xs
            dsq = float(d @ d)
        pot = float(potential(state)) if potential is not None else None
        trace.records.append(TraceRecord(k=k, merit_primary=gn, merit_aux=gap,
                                         dist_sq=dsq, potential=pot,
                                         elapsed_ns=now_ns() - t0))
        return gn

    res = record(0, state)
    for k in range(1, stop.max_iter + 1):
        if stop.residual_tol > 0.0 and res <= stop.residual_tol:
            trace.terminated_by = "tolerance"
            break
        state = step_opt_extra_point(objective, state, params, y_rule="p")
        xn = float(np.linalg.norm(state.x_curr))
        if not np.isfinite(xn) or xn > DIVERGENCE_NORM or \
                not np.all(np.isfinite(state.x_curr)) or \
                not np.all(np.isfinite(state.v_curr)):
            trace.terminated_by = "divergence"
            trace.final_point = state.x_curr
            raise DivergenceError(trace)
        res = record(k, state)
    else:
        if stop.residual_tol > 0.0 and res <= stop.residual_tol:
            trace.terminated_by = "tolerance"
    trace.final_point = state.x_curr
    return trace
