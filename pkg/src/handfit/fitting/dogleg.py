"""Trust-region nonlinear least squares with Powell's dogleg step.

Minimizes E(x) = |r(x)|^2 for a residual function returning (r, J).  Each
iteration combines the Cauchy (steepest-descent) point and the Gauss-Newton
step within the trust radius; a rank-deficient Gauss-Newton system falls
back to the Cauchy step.  Steps are accepted when the ratio of actual to
predicted reduction exceeds ``accept_rho``; the radius doubles after a very
successful boundary step and shrinks by 4 after a poor one.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ContractError

ResidualFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass
class DoglegOptions:
    max_iter: int = 200
    gtol: float = 1e-8          # infinity norm of grad E = 2 J^T r
    steptol: float = 1e-10      # norm of the proposed step
    trust_radius_init: float = 1.0
    trust_radius_max: float = 1e10
    accept_rho: float = 0.05

    def validated(self) -> "DoglegOptions":
        if self.max_iter < 1 or self.trust_radius_init <= 0:
            raise ContractError("invalid solver options")
        return self


@dataclass
class IterationRecord:
    objective: float
    trust_radius: float
    step_norm: float
    accepted: bool


@dataclass
class DoglegResult:
    x: np.ndarray
    objective: float
    gradient_inf_norm: float
    iterations: int
    termination: str  # "gradient" | "step" | "max_iter" | "nonfinite"
    trace: list[IterationRecord] = field(default_factory=list)


def _dogleg_step(jac: np.ndarray, res: np.ndarray, radius: float
                 ) -> tuple[np.ndarray, bool]:
    """Dogleg step for min |r + J p| s.t. |p| <= radius; returns (p, on_boundary)."""
    g = jac.T @ res  # half the gradient of |r|^2
    jtj = jac.T @ jac
    p_gn = None
    try:
        chol = np.linalg.cholesky(jtj)
        y = np.linalg.solve(chol, -g)
        p_gn = np.linalg.solve(chol.T, y)
    except np.linalg.LinAlgError:
        p_gn = None  # rank-deficient normal equations

    if p_gn is not None:
        gn_norm = float(np.linalg.norm(p_gn))
        if gn_norm <= radius:
            return p_gn, gn_norm >= radius * (1.0 - 1e-12)

    jg = jac @ g
    curv = float(jg @ jg)
    gnorm2 = float(g @ g)
    if curv <= 0.0 or gnorm2 == 0.0:
        return np.zeros_like(g), False
    p_cauchy = -(gnorm2 / curv) * g
    c_norm = float(np.linalg.norm(p_cauchy))
    if c_norm >= radius:
        return p_cauchy * (radius / c_norm), True
    if p_gn is None:
        return p_cauchy, False
    # Second leg: |p_c + tau d| = radius with d = p_gn - p_c, tau in (0, 1].
    d = p_gn - p_cauchy
    a = float(d @ d)
    b = 2.0 * float(p_cauchy @ d)
    c = c_norm * c_norm - radius * radius
    tau = (-b + np.sqrt(max(b * b - 4.0 * a * c, 0.0))) / (2.0 * a)
    return p_cauchy + tau * d, True


def solve_dogleg(residual_fn: ResidualFn, x0: np.ndarray,
                 options: DoglegOptions | None = None) -> DoglegResult:
    """Run the trust-region iteration from x0 until a tolerance or the budget hits.

    The residual function is evaluated once per trial step; non-finite
    residuals at a trial point reject the step, while a non-finite Jacobian
    at an accepted point aborts with termination "nonfinite".
    """
    opts = (options or DoglegOptions()).validated()
    x = np.asarray(x0, dtype=float).copy()
    if not np.isfinite(x).all():
        raise ContractError("initial point must be finite")

    res, jac = residual_fn(x)
    res = np.asarray(res, dtype=float)
    jac = np.asarray(jac, dtype=float)
    if not np.isfinite(jac).all():
        return DoglegResult(x=x, objective=float("nan"), gradient_inf_norm=float("nan"),
                            iterations=0, termination="nonfinite")
    objective = float(res @ res)
    radius = opts.trust_radius_init
    trace: list[IterationRecord] = []
    termination = "max_iter"
    grad_inf = float(np.abs(2.0 * (jac.T @ res)).max()) if res.size else 0.0

    iterations = 0
    for _ in range(opts.max_iter):
        grad_inf = float(np.abs(2.0 * (jac.T @ res)).max())
        if grad_inf < opts.gtol:
            termination = "gradient"
            break
        iterations += 1

        step, on_boundary = _dogleg_step(jac, res, radius)
        step_norm = float(np.linalg.norm(step))
        if step_norm < opts.steptol:
            termination = "step"
            break

        trial = x + step
        trial_res, trial_jac = residual_fn(trial)
        trial_res = np.asarray(trial_res, dtype=float)
        trial_obj = float(trial_res @ trial_res)
        lin = res + jac @ step
        predicted = objective - float(lin @ lin)
        if np.isfinite(trial_obj) and predicted > 0.0:
            rho = (objective - trial_obj) / predicted
        else:
            rho = -np.inf
        accepted = rho > opts.accept_rho
        trace.append(IterationRecord(objective=objective, trust_radius=radius,
                                     step_norm=step_norm, accepted=accepted))
        if accepted:
            x = trial
            res = trial_res
            jac = np.asarray(trial_jac, dtype=float)
            objective = trial_obj
            if not np.isfinite(jac).all():
                termination = "nonfinite"
                break
        if rho > 0.75 and on_boundary:
            radius = min(2.0 * radius, opts.trust_radius_max)
        elif rho < 0.25:
            radius = radius / 4.0

    return DoglegResult(x=x, objective=objective, gradient_inf_norm=grad_inf,
                        iterations=iterations, termination=termination, trace=trace)
