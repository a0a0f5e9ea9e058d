# pcpolab/solver/cg.py
from __future__ import annotations
from dataclasses import dataclass
from typing import Callable

import numpy as np

from pcpolab.errors import SolverError

Hvp = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CgResult:
    x: np.ndarray
    iterations: int
    residual_norm: float   # true ||Hx - rhs||, recomputed after the loop
    converged: bool        # recurrence residual reached tol * ||rhs||


def conjugate_gradient(hvp: Hvp, rhs: np.ndarray, max_iters: int = 20, tol: float = 1e-8) -> CgResult:
    """Solve Hx = rhs for symmetric positive-definite H given only products Hv."""
    rhs = np.asarray(rhs, dtype=np.float64)
    x = np.zeros_like(rhs)
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return CgResult(x, 0, 0.0, True)

    r = rhs.copy()
    p = r.copy()
    rr = float(r @ r)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        Ap = hvp(p)
        pAp = float(p @ Ap)
        if not np.isfinite(pAp) or pAp <= 0.0:
            raise SolverError(f"CG met a non-positive curvature p'Hp={pAp} at iteration {it}")
        alpha = rr / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        if not np.all(np.isfinite(x)):
            raise SolverError(f"non-finite CG iterate at iteration {it}")
        rr_new = float(r @ r)
        if np.sqrt(rr_new) <= tol * rhs_norm:
            converged = True
            break
        p = r + (rr_new / rr) * p
        rr = rr_new

    residual = float(np.linalg.norm(hvp(x) - rhs))
    return CgResult(x, it, residual, converged)
