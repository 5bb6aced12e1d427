"""
Dense simplex for strict feasibility

max_slack() answers "is there a point strictly on the requested side of
every hyperplane?" by maximizing the smallest normalized margin t:

    maximize t  s.t.  s_k (n_k . x + o_k) >= t ||n_k||,  -B <= x_i <= B,  t <= 1

The problem is shifted so the all-slack basis at the box corner is
feasible, then solved with a single-phase tableau method. Dantzig's rule is
used until too many degenerate pivots in a row, after which Bland's rule
takes over for the rest of the solve.
"""

import logging
from typing import Iterable, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from region_atlas.errors import InvalidInputError, SolverError

logger = logging.getLogger(__name__)

SLACK_THRESHOLD = 1e-7
PIVOT_EPS = 1e-12
ZERO_NORMAL = 1e-12


class FeasibilityResult(BaseModel):
    """Outcome of a strict-feasibility query"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    feasible: bool = Field(..., description="True when max_slack exceeds the threshold")
    max_slack: float = Field(..., description="Largest achievable normalized margin, capped at 1")
    point: Optional[np.ndarray] = Field(None, description="Point attaining the margin")
    iterations: int = Field(0, description="Simplex pivots used")


def _tableau_maximize(a: np.ndarray, b: np.ndarray, c: np.ndarray,
                      max_iter: int, degenerate_limit: int) -> Tuple[np.ndarray, int]:
    """Maximize c.x s.t. a x <= b, x >= 0, with b >= 0 so the slack basis is feasible."""
    m, n = a.shape
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = a
    tableau[:m, n:n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[m, :n] = c
    basis = np.arange(n, n + m)

    bland = False
    degenerate_run = 0
    for iteration in range(max_iter):
        reduced = tableau[m, :-1]
        if bland:
            candidates = np.flatnonzero(reduced > PIVOT_EPS)
            if candidates.size == 0:
                break
            col = int(candidates[0])
        else:
            col = int(np.argmax(reduced))
            if reduced[col] <= PIVOT_EPS:
                break

        column = tableau[:m, col]
        positive = column > PIVOT_EPS
        if not positive.any():
            raise SolverError("Simplex found an unbounded direction in a bounded problem", basis=basis)
        ratios = np.full(m, np.inf)
        ratios[positive] = tableau[:m, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + PIVOT_EPS)
        row = int(ties[np.argmin(basis[ties])]) if bland else int(ties[0])

        if best <= PIVOT_EPS:
            degenerate_run += 1
            if degenerate_run >= degenerate_limit and not bland:
                logger.debug(f"Switching to Bland's rule after {degenerate_run} degenerate pivots")
                bland = True
        else:
            degenerate_run = 0

        tableau[row] /= tableau[row, col]
        pivot_row = tableau[row].copy()
        tableau -= np.outer(tableau[:, col], pivot_row)
        tableau[row] = pivot_row
        basis[row] = col
    else:
        raise SolverError(f"Simplex exceeded {max_iter} iterations", basis=basis)

    values = np.zeros(n + m)
    values[basis] = tableau[:m, -1]
    return values[:n], iteration


def solve_slack(normals: np.ndarray, offsets: np.ndarray, signs: np.ndarray, box: float,
                threshold: float = SLACK_THRESHOLD, max_iter: Optional[int] = None) -> FeasibilityResult:
    """Array form of max_slack; normals is k x d."""
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    offsets = np.asarray(offsets, dtype=float).ravel()
    signs = np.asarray(signs, dtype=float).ravel()
    dim = normals.shape[1]
    if dim < 1:
        raise InvalidInputError("max_slack needs at least one dimension")
    if box <= 0:
        raise InvalidInputError(f"Box half-width must be positive, got {box}")

    norms = np.linalg.norm(normals, axis=1)
    flat = norms <= ZERO_NORMAL
    if flat.any():
        # constant constraints: either always strict or never
        if np.any(signs[flat] * offsets[flat] <= threshold):
            return FeasibilityResult(feasible=False, max_slack=-np.inf, point=None)
        normals, offsets, signs, norms = normals[~flat], offsets[~flat], signs[~flat], norms[~flat]

    if normals.shape[0] == 0:
        return FeasibilityResult(feasible=True, max_slack=1.0, point=np.zeros(dim))

    # unit rows g.x + h >= t in box-scaled coordinates x = box * xi
    g = signs[:, None] * normals / norms[:, None]
    h = signs * offsets / norms / box
    eye = np.eye(dim)
    g_all = np.vstack([g, eye, -eye])
    h_all = np.concatenate([h, np.ones(dim), np.ones(dim)])

    # y = xi + 1 >= 0 and u = tau + shift >= 0 make the corner basis feasible
    shift = max(0.0, float(np.max(g_all.sum(axis=1) - h_all)))
    k = g_all.shape[0]
    a = np.zeros((k + dim + 1, dim + 1))
    a[:k, :dim] = -g_all
    a[:k, dim] = 1.0
    a[k:k + dim, :dim] = eye
    a[k + dim, dim] = 1.0
    b = np.concatenate([h_all - g_all.sum(axis=1) + shift, np.full(dim, 2.0), [1.0 / box + shift]])
    b = np.maximum(b, 0.0)
    c = np.zeros(dim + 1)
    c[dim] = 1.0

    if max_iter is None:
        max_iter = 10 * (dim + normals.shape[0]) ** 2
    solution, iterations = _tableau_maximize(a, b, c, max_iter, degenerate_limit=2 * dim)

    point = box * (solution[:dim] - 1.0)
    # report the margin the returned point actually achieves
    margins = signs * (normals @ point + offsets) / norms
    slack = float(min(1.0, margins.min()))
    return FeasibilityResult(feasible=slack > threshold, max_slack=slack, point=point, iterations=iterations)


def max_slack(constraints: Iterable[Tuple[np.ndarray, float, int]], box: float,
              dim: Optional[int] = None, threshold: float = SLACK_THRESHOLD,
              max_iter: Optional[int] = None) -> FeasibilityResult:
    """
    Largest margin by which a point in [-box, box]^d can satisfy every
    (normal, offset, sign) constraint strictly.

    Args:
        constraints: (normal, offset, sign) triples, sign in {+1, -1}
        box: half-width B of the bounding box
        dim: dimension d, required when the constraint list is empty
    """
    constraints = list(constraints)
    if not constraints:
        if dim is None:
            raise InvalidInputError("dim is required for an empty constraint list")
        return FeasibilityResult(feasible=True, max_slack=1.0, point=np.zeros(dim))
    normals = np.vstack([np.asarray(n, dtype=float).ravel() for n, _, _ in constraints])
    offsets = np.array([o for _, o, _ in constraints], dtype=float)
    signs = np.array([s for _, _, s in constraints], dtype=float)
    return solve_slack(normals, offsets, signs, box, threshold=threshold, max_iter=max_iter)
