# pcpolab/solver/dual.py
from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from pcpolab.errors import ContractViolation, UpdateRejected
from pcpolab.solver.cg import CgResult, conjugate_gradient
from pcpolab.solver.subproblem import S_EPS, ScalarTriple, Subproblem
from pcpolab.utils.logging import get_logger

log = get_logger(__name__)

LAMBDA_MIN = 1e-8
Q_EPS = 1e-16


@dataclass(frozen=True)
class DualSolution:
    lambda_star: float
    nu_star: float
    dual_value: float
    branch: str = "trust_region"   # trust_region | constrained | degenerate
    degenerate: bool = False


def dual_objective(lam: float, nu: float, triple: ScalarTriple, c: float, delta: float) -> float:
    """-(q - 2 nu r + nu^2 s) / (2 lam) + nu c - lam delta."""
    q, r, s = triple.q, triple.r, triple.s
    return -(q - 2.0 * nu * r + nu * nu * s) / (2.0 * lam) + nu * c - lam * delta


def nu_of(lam: float, triple: ScalarTriple, c: float) -> float:
    """Maximizer over nu >= 0 of the dual at fixed lam."""
    if triple.s <= S_EPS:
        return 0.0
    return max(0.0, (lam * c + triple.r) / triple.s)


def _active_intervals(c: float, r: float) -> Tuple[List[Tuple[float, float]], List[Tuple[float, float]]]:
    """Ranges of lam (>= LAMBDA_MIN) where nu(lam) > 0 and where nu(lam) = 0."""
    inf = math.inf
    if c > 0:
        knee = -r / c
        if knee > LAMBDA_MIN:
            return [(knee, inf)], [(LAMBDA_MIN, knee)]
        return [(LAMBDA_MIN, inf)], []
    if c < 0:
        knee = -r / c
        if knee > LAMBDA_MIN:
            return [(LAMBDA_MIN, knee)], [(knee, inf)]
        return [], [(LAMBDA_MIN, inf)]
    return ([(LAMBDA_MIN, inf)], []) if r > 0 else ([], [(LAMBDA_MIN, inf)])


def solve_dual(subp: Subproblem, triple: ScalarTriple) -> DualSolution:
    """Exact maximizer of the single-constraint dual over lam > 0, nu >= 0."""
    q, r, s = triple.q, triple.r, triple.s
    c, delta = subp.c, subp.delta

    if q <= Q_EPS:
        lam = LAMBDA_MIN
        nu = nu_of(lam, triple, c)
        log.warning("zero objective gradient: lambda clamped to %g, nu=%g", lam, nu)
        return DualSolution(lam, nu, dual_objective(lam, nu, triple, c, delta), "degenerate", True)

    lam_b = math.sqrt(q / (2.0 * delta))
    if s <= S_EPS or c + r / lam_b <= 0.0:
        return DualSolution(lam_b, 0.0, dual_objective(lam_b, 0.0, triple, c, delta))

    big_a = q - r * r / s
    big_b = 2.0 * delta - c * c / s
    if big_b <= 0.0:
        raise ContractViolation(f"infeasible subproblem passed to solve_dual (c={c:.3g}, s={s:.3g})")
    lam_a = math.sqrt(big_a / big_b) if big_a > 0.0 else LAMBDA_MIN

    on, off = _active_intervals(c, r)
    candidates = [min(max(lam_a, lo), hi) for lo, hi in on]
    candidates += [min(max(lam_b, lo), hi) for lo, hi in off]
    best = max(candidates, key=lambda lam: dual_objective(lam, nu_of(lam, triple, c), triple, c, delta))
    nu = nu_of(best, triple, c)
    return DualSolution(best, nu, dual_objective(best, nu, triple, c, delta),
                        "constrained" if nu > 0 else "trust_region")


def _solve_checked(subp: Subproblem, rhs: np.ndarray, cg_iters: int, cg_tol: float, residual_limit: float,
                   accept_inexact: bool) -> Tuple[CgResult, bool]:
    """CG solve of H x = rhs. Returns (result, exact); exact is False for a capped iterate."""
    res = conjugate_gradient(subp.hvp, rhs, cg_iters, cg_tol)
    scale = max(float(np.linalg.norm(rhs)), 1e-300)
    rel = res.residual_norm / scale
    if rel <= residual_limit:
        if not res.converged:
            log.debug("CG stopped at %d iterations, relative residual %.3g", res.iterations, rel)
        return res, True
    if not accept_inexact:
        raise UpdateRejected(f"CG residual {rel:.3g} above limit {residual_limit:g} after {res.iterations} iterations")
    log.warning("CG capped at %d iterations with relative residual %.3g; taking the inexact step", res.iterations, rel)
    return res, False


def _clip_to_trust_region(step: np.ndarray, subp: Subproblem) -> np.ndarray:
    """Scale `step` down so that step' H step / 2 <= delta."""
    quad = 0.5 * float(step @ subp.hvp(step))
    if quad > subp.delta:
        log.debug("inexact step scaled by %.3g onto the trust region", math.sqrt(subp.delta / quad))
        return step * math.sqrt(subp.delta / quad)
    return step


def apply_update(theta_old: np.ndarray, subp: Subproblem, dual: DualSolution, cg_iters: int = 20,
                 cg_tol: float = 1e-8, residual_limit: float = 1e-6, accept_inexact: bool = False) -> np.ndarray:
    """theta + (1/lam*) H^-1 (g - nu* b).

    With accept_inexact, a CG iterate above residual_limit is used anyway and
    the step is pulled back onto the trust region if it leaves it.
    """
    lam = max(dual.lambda_star, LAMBDA_MIN)
    res, exact = _solve_checked(subp, subp.g - dual.nu_star * subp.b, cg_iters, cg_tol, residual_limit,
                                accept_inexact)
    step = res.x / lam
    return theta_old + (step if exact else _clip_to_trust_region(step, subp))


def recovery_step(theta_old: np.ndarray, subp: Subproblem, cg_iters: int = 20, cg_tol: float = 1e-8,
                  residual_limit: float = 1e-6, accept_inexact: bool = False) -> np.ndarray:
    """theta - sqrt(2 delta / b'H^-1 b) H^-1 b: to the trust-region edge along -H^-1 b."""
    res, exact = _solve_checked(subp, subp.b, cg_iters, cg_tol, residual_limit, accept_inexact)
    s = float(subp.b @ res.x)
    if s <= S_EPS:
        log.warning("risk gradient vanishes (s=%.3g); recovery step skipped", s)
        return np.array(theta_old, copy=True)
    step = -math.sqrt(2.0 * subp.delta / s) * res.x
    return theta_old + (step if exact else _clip_to_trust_region(step, subp))


def backtrack(theta_old: np.ndarray, theta_full: np.ndarray, accept: Callable[[np.ndarray], bool],
              shrink: float = 0.8, max_backtracks: int = 10) -> np.ndarray:
    """Scale the step by shrink**k, k = 0..max_backtracks, until `accept` passes."""
    step = theta_full - theta_old
    for k in range(max_backtracks + 1):
        cand = theta_old + (shrink ** k) * step
        if accept(cand):
            if k:
                log.debug("line search accepted after %d backtracks", k)
            return cand
    raise UpdateRejected(f"line search failed after {max_backtracks} backtracks")
