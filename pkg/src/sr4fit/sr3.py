"""Sparse relaxed regularized logistic fitting.

Minimizes

    L(beta, w) = sum_i log(1 + exp(-y_i (Z_i . beta + b0)))
                 + lam * ||w||_1 + (kappa / 2) * ||beta - w||^2

by alternating an Armijo descent step in (beta, b0) with w fixed and the
closed-form soft-threshold update of w. The intercept b0 enters the
loss only; it is neither penalized nor coupled to w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from ._validation import check_features, check_signed_labels

# Backtracking halvings tried before an inner step is declared stalled.
MAX_BACKTRACKS = 60


class SR3NumericalError(ArithmeticError):
    """The objective became non-finite during fitting."""


@dataclass(frozen=True)
class HyperParams:
    lam: float = 0.1
    kappa: float = 1.0
    r_max: int = 100

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if self.r_max < 0:
            raise ValueError(f"r_max must be >= 0, got {self.r_max}")


@dataclass(frozen=True)
class OptimizerConfig:
    max_outer_iters: int = 500
    outer_tol: float = 1e-6
    max_inner_iters: int = 100
    inner_tol: float = 1e-8
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    inner_solver: str = "newton"

    def __post_init__(self):
        if self.inner_solver not in ("newton", "gradient"):
            raise ValueError(f"inner_solver must be 'newton' or 'gradient', got {self.inner_solver!r}")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration limits must be positive")
        if not (self.outer_tol > 0 and self.inner_tol > 0 and self.initial_step > 0):
            raise ValueError("tolerances and initial_step must be positive")
        if not (0 < self.armijo_c < 1 and 0 < self.backtrack_factor < 1):
            raise ValueError("armijo_c and backtrack_factor must lie in (0, 1)")


@dataclass
class SparseLinearModel:
    beta: np.ndarray
    intercept: float
    w: np.ndarray
    objective_trace: list = field(default_factory=list)

    @property
    def support(self):
        return np.flatnonzero(self.w)

    def decision_function(self, Z):
        return Z @ self.beta + self.intercept


@dataclass(frozen=True)
class FitDiagnostics:
    outer_iterations: int
    converged: bool
    final_objective: float
    nnz: int

    def to_dict(self):
        return {"outer_iterations": self.outer_iterations, "converged": self.converged,
                "final_objective": self.final_objective, "nnz": self.nnz}


def logistic_loss(Z, y, beta, intercept=0.0):
    """Summed logistic loss, evaluated without overflow."""
    margin = -y * (Z @ beta + intercept)
    return float(np.logaddexp(0.0, margin).sum())


def logistic_gradient(Z, y, beta, intercept=0.0):
    """Gradient of :func:`logistic_loss` in ``beta`` and in the intercept."""
    r = -y * expit(-y * (Z @ beta + intercept))
    return Z.T @ r, float(r.sum())


def objective(Z, y, beta, intercept, w, hp):
    diff = beta - w
    return (logistic_loss(Z, y, beta, intercept) + hp.lam * float(np.abs(w).sum())
            + 0.5 * hp.kappa * float(diff @ diff))


class _CoupledProblem:
    """loss + (kappa/2)||beta - w||^2 over theta = (beta, b0), with w fixed per solve.

    Keeps a Cholesky factor of the Hessian between solves; it serves as a
    preconditioner and is refreshed when it goes stale.
    """

    refresh_every = 10

    def __init__(self, Z, y, kappa, cfg):
        self.Z1 = np.hstack([Z, np.ones((Z.shape[0], 1))])
        self.y = y
        self.kappa = kappa
        self.cfg = cfg
        self.K = np.full(self.Z1.shape[1], kappa)
        self.K[-1] = 0.0
        self.factor = None
        self.age = 0

    def evaluate(self, theta, wk):
        margin = -self.y * (self.Z1 @ theta)
        diff = theta - wk
        value = float(np.logaddexp(0.0, margin).sum()) + 0.5 * float(self.K @ (diff * diff))
        grad = self.Z1.T @ (-self.y * expit(margin)) + self.K * diff
        return value, grad

    def refresh(self, theta):
        s = expit(-self.y * (self.Z1 @ theta))
        H = (self.Z1.T * (s * (1.0 - s))) @ self.Z1
        H[np.diag_indices_from(H)] += self.K + 1e-8
        try:
            self.factor = cho_factor(H, check_finite=False)
        except np.linalg.LinAlgError:
            self.factor = None
        self.age = 0

    def direction(self, theta, grad):
        if self.cfg.inner_solver == "gradient":
            return grad
        if self.factor is None or self.age >= self.refresh_every:
            self.refresh(theta)
        if self.factor is None:
            return grad
        d = cho_solve(self.factor, grad, check_finite=False)
        return d if float(grad @ d) > 0 else grad

    def solve(self, theta, w):
        """Armijo descent from ``theta``; never increases the objective."""
        cfg = self.cfg
        wk = np.append(w, 0.0)
        F, g = self.evaluate(theta, wk)
        step = cfg.initial_step
        newton = cfg.inner_solver == "newton"
        for _ in range(cfg.max_inner_iters):
            if np.abs(g).max() < cfg.inner_tol:
                break
            d = self.direction(theta, g)
            slope = float(g @ d)
            t = 1.0 if newton else step
            for _ in range(MAX_BACKTRACKS):
                nt = theta - t * d
                Fn, gn = self.evaluate(nt, wk)
                if Fn <= F - cfg.armijo_c * t * slope:
                    break
                t *= cfg.backtrack_factor
            else:
                if newton and self.age > 0:
                    self.factor = None
                    continue
                break
            self.age += 1
            if newton and t < 1.0:
                self.factor = None
            elif not newton:
                sv, yv = nt - theta, gn - g
                sy = float(sv @ yv)
                step = float(sv @ sv) / sy if sy > 0 else t / cfg.backtrack_factor
                if not math.isfinite(step):
                    step = t
            theta, F, g = nt, Fn, gn
        return theta


def beta_step(Z, y, beta_init, intercept_init, w, hp, cfg=None):
    """Descend in (beta, intercept) on the coupled objective with w held fixed.

    With ``cfg.inner_solver == "gradient"`` this is gradient descent with
    Armijo backtracking, first trial step ``cfg.initial_step`` and later
    trial steps from the Barzilai-Borwein estimate. The default ``"newton"``
    uses Hessian-preconditioned directions with the same Armijo test. Either
    way the coupled objective never increases.
    """
    cfg = cfg or OptimizerConfig()
    theta = np.append(np.asarray(beta_init, dtype=float), float(intercept_init))
    theta = _CoupledProblem(np.asarray(Z, dtype=float), y, hp.kappa, cfg).solve(theta, w)
    return theta[:-1], float(theta[-1])


def soft_threshold(beta, hp):
    """``sign(beta) * max(|beta| - lam/kappa, 0)``, elementwise."""
    beta = np.asarray(beta, dtype=float)
    return np.sign(beta) * np.maximum(np.abs(beta) - hp.lam / hp.kappa, 0.0)


def fit_sr3(Z, y, hp=None, cfg=None):
    """Alternate beta-steps and soft-thresholding from a zero start.

    Stops when the largest change in (beta, intercept) and w falls below
    ``cfg.outer_tol`` or after ``cfg.max_outer_iters`` rounds. The objective
    after each round is appended to ``objective_trace``.

    Returns
    -------
    model : SparseLinearModel
        Unpruned fit; see :func:`prune`.
    diagnostics : FitDiagnostics
    """
    hp = hp or HyperParams()
    cfg = cfg or OptimizerConfig()
    Z = check_features(Z)
    y = check_signed_labels(y, Z.shape[0])
    p = Z.shape[1]
    beta = np.zeros(p)
    w = np.zeros(p)
    b0 = 0.0
    problem = _CoupledProblem(Z, y, hp.kappa, cfg)
    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        theta = problem.solve(np.append(beta, b0), w)
        new_beta, new_b0 = theta[:-1], float(theta[-1])
        new_w = soft_threshold(new_beta, hp)
        value = objective(Z, y, new_beta, new_b0, new_w, hp)
        if not math.isfinite(value):
            raise SR3NumericalError(f"objective became {value} at outer iteration {it}")
        trace.append(value)
        change = max(np.abs(new_beta - beta).max(initial=0.0), abs(new_b0 - b0),
                     np.abs(new_w - w).max(initial=0.0))
        beta, b0, w = new_beta, new_b0, new_w
        if change < cfg.outer_tol:
            converged = True
            break
    model = SparseLinearModel(beta, b0, w, trace)
    diag = FitDiagnostics(it, converged, trace[-1], int(np.count_nonzero(w)))
    return model, diag


def prune(model, Z=None, y=None):
    """Zero the beta entries whose relaxed weight w_j is exactly zero.

    When the training data ``Z, y`` is given, the intercept is refitted to
    the pruned coefficients (see :func:`refit_intercept`): the dropped
    columns are not centred (rule indicators), so their share of the score
    would otherwise be lost.
    """
    mask = model.w != 0
    beta = np.where(mask, model.beta, 0.0)
    intercept = model.intercept
    if Z is not None:
        intercept = refit_intercept(Z, y, beta, intercept)
    return SparseLinearModel(beta, intercept, model.w.copy(), list(model.objective_trace))


def refit_intercept(Z, y, beta, intercept=0.0, tol=1e-10, max_iters=100):
    """Minimize the logistic loss over the intercept alone, ``beta`` fixed.

    Damped Newton on a convex 1-D problem. If all labels agree the optimum
    is at infinity; iteration then stops once the gradient is below ``tol``.
    """
    Z = check_features(Z)
    y = check_signed_labels(y, Z.shape[0])
    offset = Z @ beta
    b = float(intercept)

    def loss(b):
        return float(np.logaddexp(0.0, -y * (offset + b)).sum())

    f = loss(b)
    for _ in range(max_iters):
        s = expit(-y * (offset + b))
        g = float(-(y * s).sum())
        if abs(g) < tol:
            break
        h = float((s * (1.0 - s)).sum())
        step = g / h if h > 1e-300 else math.copysign(1.0, g)
        t = 1.0
        for _ in range(MAX_BACKTRACKS):
            fn = loss(b - t * step)
            if fn <= f - 1e-4 * t * g * step:
                break
            t *= 0.5
        else:
            break
        b, f = b - t * step, fn
    return b
