"""Bounded Levenberg-Marquardt weighted least squares."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

XTOL = 1e-10
GTOL = 1e-12
MAX_ITER = 500
COND_LIMIT = 1e12


class DegenerateFitError(ValueError):
    """The Jacobian is rank deficient at the starting point."""


@dataclass(frozen=True)
class Model:
    """Parametric curve ``f(x, theta)`` with analytic Jacobian ``df/dtheta`` of shape (n, p)."""

    names: tuple[str, ...]
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None

    def __call__(self, x, theta) -> np.ndarray:
        return self.func(np.asarray(x, float), np.asarray(theta, float))


@dataclass
class FitResult:
    params: dict[str, float]
    std_errors: dict[str, float] | None
    residual_norm: float
    converged: bool
    n_iter: int
    chi2: float = math.nan
    dof: int = 0
    at_bounds: list[str] = field(default_factory=list)
    derived: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "params": dict(self.params),
            "std_errors": None if self.std_errors is None else dict(self.std_errors),
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "chi2": self.chi2,
            "dof": self.dof,
            "at_bounds": list(self.at_bounds),
            "derived": dict(self.derived),
        }


def least_squares(
    model: Model,
    x,
    y,
    sigma=None,
    init: Mapping[str, float] | Sequence[float] = (),
    *,
    fixed: Sequence[str] = (),
    max_iter: int = MAX_ITER,
) -> FitResult:
    """Minimise ``sum(((y - f(x)) / sigma)**2)`` over the free parameters.

    Marquardt-scaled damping with Nielsen's update of the damping factor;
    steps are projected onto the model bounds. Stops when the relative
    step falls below 1e-10, the gradient infinity-norm below 1e-12, or the
    residual vanishes. When ``sigma`` is omitted the covariance is scaled
    by the reduced chi-square; otherwise ``sigma`` is taken as absolute.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    absolute_sigma = sigma is not None
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
        raise ValueError("data must be finite")
    names = model.names
    if isinstance(init, Mapping):
        theta = np.array([float(init[n]) for n in names])
    else:
        theta = np.asarray(init, dtype=float).copy()
    if theta.size != len(names):
        raise ValueError(f"expected {len(names)} initial values, got {theta.size}")
    free = np.array([n not in fixed for n in names])
    n_free = int(free.sum())
    if y.size < n_free:
        raise ValueError(f"need at least {n_free} points, got {y.size}")
    lo = np.full(len(names), -np.inf) if model.lower is None else np.asarray(model.lower, float)
    hi = np.full(len(names), np.inf) if model.upper is None else np.asarray(model.upper, float)
    theta = np.clip(theta, lo, hi)

    def residual(th):
        return (y - model.func(x, th)) * w

    def jacobian(th):
        return -(model.jac(x, th)[:, free]) * w[:, None]

    r = residual(theta)
    cost = float(r @ r)
    J = jacobian(theta)
    if np.linalg.matrix_rank(J) < n_free:
        raise DegenerateFitError("degenerate fit: Jacobian is rank deficient at the initial point")

    A = J.T @ J
    g = J.T @ r
    lam = 1e-3  # relative to diag(A): Marquardt scaling
    nu = 2.0
    converged = n_free == 0 or cost == 0.0 or float(np.max(np.abs(g), initial=0.0)) < GTOL
    it = 0
    while not converged and it < max_iter:
        it += 1
        d = np.diag(A).copy()
        d[d <= 0] = 1e-300
        try:
            step = np.linalg.solve(A + lam * np.diag(d), -g)
        except np.linalg.LinAlgError:
            lam *= nu
            nu *= 2.0
            continue
        trial = theta.copy()
        trial[free] = np.clip(theta[free] + step, lo[free], hi[free])
        step = trial[free] - theta[free]
        r_new = residual(trial)
        cost_new = float(r_new @ r_new)
        predicted = -(2.0 * step @ g + step @ A @ step)
        actual = cost - cost_new
        small_step = np.linalg.norm(step) <= XTOL * (np.linalg.norm(theta[free]) + XTOL)
        if actual > 0 and predicted > 0:
            gain = actual / predicted
            theta, r, cost = trial, r_new, cost_new
            J = jacobian(theta)
            A = J.T @ J
            g = J.T @ r
            lam *= max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3)
            nu = 2.0
            if cost == 0.0 or float(np.max(np.abs(g))) < GTOL or small_step:
                converged = True
        else:
            if small_step:
                # no decrease available at machine precision: a minimum
                converged = True
            lam *= nu
            nu *= 2.0

    dof = y.size - n_free
    std = None
    if n_free:
        scale = np.sqrt(np.diag(A))
        scale[scale == 0] = 1.0
        An = A / np.outer(scale, scale)
        if np.linalg.cond(An) < COND_LIMIT:
            cov = np.linalg.inv(An) / np.outer(scale, scale)
            if not absolute_sigma and dof > 0:
                cov *= cost / dof
            errs = np.sqrt(np.clip(np.diag(cov), 0, None))
            std = {}
            k = 0
            for n, f in zip(names, free):
                if f:
                    std[n] = float(errs[k])
                    k += 1
                else:
                    std[n] = 0.0
    at_bounds = [
        n for n, f, t, a, b in zip(names, free, theta, lo, hi)
        if f and (t <= a or t >= b) and (math.isfinite(a) or math.isfinite(b))
    ]
    return FitResult(
        params={n: float(t) for n, t in zip(names, theta)},
        std_errors=std,
        residual_norm=math.sqrt(cost),
        converged=bool(converged),
        n_iter=it,
        chi2=cost,
        dof=int(dof),
        at_bounds=at_bounds,
    )
