"""Problem primitives: feasible sets, projections, and problem containers.

Vectors are 1-D float64 numpy arrays. Every public entry point validates
shape and finiteness once, then trusts the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# Tolerance used to accept a stored solution: the natural residual at the
# solution must not exceed SOLUTION_RTOL * (1 + ||z*||).
SOLUTION_RTOL = 1e-9


def as_vector(z, dim: Optional[int] = None) -> np.ndarray:
    """Coerce ``z`` to a finite 1-D float64 array, optionally of length ``dim``."""
    v = np.asarray(z, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


class FeasibleSet:
    """Closed convex set with a closed-form Euclidean projection."""

    dimension: int

    def project(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, z: np.ndarray, tol: float = 0.0) -> bool:
        z = as_vector(z, self.dimension)
        return bool(np.linalg.norm(z - self.project(z)) <= tol)

    @property
    def unbounded_whole_space(self) -> bool:
        return isinstance(self, WholeSpace)


class WholeSpace(FeasibleSet):
    """All of R^n; projection is the identity."""

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = int(dimension)

    def project(self, z: np.ndarray) -> np.ndarray:
        return as_vector(z, self.dimension)

    def __repr__(self):
        return f"WholeSpace({self.dimension})"


class NonnegativeOrthant(FeasibleSet):
    """{z : z >= 0}; projection clips negative entries to zero."""

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = int(dimension)

    def project(self, z: np.ndarray) -> np.ndarray:
        return np.maximum(as_vector(z, self.dimension), 0.0)

    def __repr__(self):
        return f"NonnegativeOrthant({self.dimension})"


class Box(FeasibleSet):
    """{z : lower <= z <= upper} with entrywise clamping."""

    def __init__(self, lower, upper):
        self.lower = as_vector(lower)
        self.upper = as_vector(upper, self.lower.shape[0])
        if np.any(self.lower > self.upper):
            raise ValueError("box requires lower <= upper entrywise")
        self.dimension = self.lower.shape[0]

    def project(self, z: np.ndarray) -> np.ndarray:
        return np.clip(as_vector(z, self.dimension), self.lower, self.upper)

    def __repr__(self):
        return f"Box(dim={self.dimension})"


class EuclideanBall(FeasibleSet):
    """{z : ||z - center|| <= radius}; projection scales radially."""

    def __init__(self, center, radius: float):
        self.center = as_vector(center)
        self.radius = float(radius)
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise ValueError("ball radius must be positive and finite")
        self.dimension = self.center.shape[0]

    def project(self, z: np.ndarray) -> np.ndarray:
        z = as_vector(z, self.dimension)
        d = z - self.center
        nd = np.linalg.norm(d)
        if nd <= self.radius:
            return z
        return self.center + (self.radius / nd) * d

    def __repr__(self):
        return f"EuclideanBall(dim={self.dimension}, radius={self.radius})"


def project(feasible_set: FeasibleSet, z) -> np.ndarray:
    """Euclidean projection of ``z`` onto ``feasible_set``.

    Raises ValueError on dimension mismatch or non-finite input.
    """
    return feasible_set.project(as_vector(z, feasible_set.dimension))


@dataclass
class MonotoneProblem:
    """A strongly monotone operator over a feasible set.

    Parameters
    ----------
    dimension : int
        Ambient dimension n.
    operator : callable
        Maps a feasible vector to an n-vector.
    feasible_set : FeasibleSet
        The constraint set of the variational inequality.
    mu : float
        Strong-monotonicity modulus; positive.
    lip : float
        Lipschitz constant of the operator; lip >= mu.
    solution : optional vector
        Known solution. When present its natural residual must sit below
        SOLUTION_RTOL * (1 + ||solution||).
    domain_restricted : bool
        True when the operator is only defined on the feasible set. Methods
        that evaluate the operator at unprojected extrapolated points are
        then unavailable. The flag is declared by the caller and trusted.
    """

    dimension: int
    operator: Callable[[np.ndarray], np.ndarray]
    feasible_set: FeasibleSet
    mu: float
    lip: float
    solution: Optional[np.ndarray] = None
    domain_restricted: bool = False
    kind: str = "custom"
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension != self.feasible_set.dimension:
            raise ValueError("problem and feasible set dimensions differ")
        if not (0 < self.mu <= self.lip) or not np.isfinite(self.lip):
            raise ValueError("need 0 < mu <= lip < inf")
        if self.solution is not None:
            self.solution = as_vector(self.solution, self.dimension)
            res = natural_residual(self, self.solution)
            bound = SOLUTION_RTOL * (1.0 + float(np.linalg.norm(self.solution)))
            if res > bound:
                raise ValueError(
                    f"stored solution has natural residual {res:.3e} "
                    f"above the acceptance bound {bound:.3e}"
                )

    @property
    def sigma(self) -> float:
        """Inverse condition ratio mu / lip, in (0, 1]."""
        return self.mu / self.lip

    @property
    def kappa(self) -> float:
        """Condition ratio lip / mu, at least 1."""
        return self.lip / self.mu

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.operator(z)


@dataclass
class SmoothObjective:
    """A strongly convex objective with Lipschitz gradient.

    value and gradient are callables on n-vectors; mu and lip bound the
    curvature from below and above. minimizer and optimal_value are optional
    references used by merit reporting when present.
    """

    dimension: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    mu: float
    lip: float
    minimizer: Optional[np.ndarray] = None
    optimal_value: Optional[float] = None
    kind: str = "custom"
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0 < self.mu <= self.lip) or not np.isfinite(self.lip):
            raise ValueError("need 0 < mu <= lip < inf")
        if self.minimizer is not None:
            self.minimizer = as_vector(self.minimizer, self.dimension)
            gn = float(np.linalg.norm(self.gradient(self.minimizer)))
            bound = SOLUTION_RTOL * self.lip * (
                1.0 + float(np.linalg.norm(self.minimizer))
            )
            if gn > bound:
                raise ValueError(
                    f"stored minimizer has gradient norm {gn:.3e} "
                    f"above the acceptance bound {bound:.3e}"
                )

    @property
    def sigma(self) -> float:
        return self.mu / self.lip

    @property
    def kappa(self) -> float:
        return self.lip / self.mu


def gradient_problem(objective: SmoothObjective) -> MonotoneProblem:
    """View a smooth strongly convex objective as a monotone operator problem.

    The gradient of a mu-strongly convex, lip-smooth function is mu-strongly
    monotone and lip-Lipschitz, so every operator method applies unchanged.
    """
    return MonotoneProblem(
        dimension=objective.dimension,
        operator=objective.gradient,
        feasible_set=WholeSpace(objective.dimension),
        mu=objective.mu,
        lip=objective.lip,
        solution=objective.minimizer,
        domain_restricted=False,
        kind=f"gradient-of-{objective.kind}",
        seed=objective.seed,
        meta=dict(objective.meta),
    )


def natural_residual(problem: MonotoneProblem, z) -> float:
    """Fixed-point residual ||z - P(z - F(z))|| with unit step.

    Zero exactly at solutions of the variational inequality, for every
    feasible-set variant, which makes it a uniform stopping merit. When the
    problem is domain restricted, ``z`` must be feasible.
    """
    z = as_vector(z, problem.dimension)
    step = z - problem.operator(z)
    return float(np.linalg.norm(z - problem.feasible_set.project(step)))
