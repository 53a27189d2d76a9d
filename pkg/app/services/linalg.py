"""Dense matrix primitives: GTH stationary vectors, (I - M) solves, support-graph analysis"""

import logging
import warnings
from collections import deque
from dataclasses import dataclass, field
from math import gcd
from typing import List, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.sparse.csgraph import connected_components

from app.config import get_settings
from app.errors import DimensionMismatch, NotStochastic, Reducible, SingularSystem

logger = logging.getLogger(__name__)

Matrix = NDArray[np.float64]
Vector = NDArray[np.float64]


def as_matrix(values, name: str = "matrix") -> Matrix:
    """Copy ``values`` into a finite 2-D float64 array."""
    arr = np.array(values, dtype=np.float64, ndmin=2)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch(f"{name} has non-finite entries")
    return arr


def frozen(arr: np.ndarray) -> np.ndarray:
    """Mark an array read-only and return it."""
    arr.setflags(write=False)
    return arr


def gth_stationary(P: Matrix, row_tol: Optional[float] = None) -> Vector:
    """
    Stationary distribution of an irreducible stochastic matrix.

    Grassmann-Taksar-Heyman elimination: states are censored out from the
    last index down, each pivot being the (positive) total exit rate to the
    remaining states, so no like-signed quantities are ever subtracted.

    Raises:
        NotStochastic: negative entries or a row sum off by more than row_tol
        Reducible: a zero pivot (the censored state cannot reach the rest)
    """
    if row_tol is None:
        row_tol = get_settings().gth_row_tol

    A = as_matrix(P, "P").copy()
    n, m = A.shape
    if n != m:
        raise DimensionMismatch(f"P must be square, got {A.shape}")
    if np.any(A < 0):
        raise NotStochastic("P has negative entries")
    row_err = np.max(np.abs(A.sum(axis=1) - 1.0))
    if row_err > row_tol:
        raise NotStochastic(f"P row sums deviate from 1 by {row_err:.3e}")

    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if s <= 0.0:
            raise Reducible(f"zero pivot while eliminating state {k}")
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])

    x = np.zeros(n)
    x[0] = 1.0
    for k in range(1, n):
        x[k] = x[:k] @ A[:k, k]
    return x / x.sum()


class IMinusFactor:
    """LU factorization of (I - M), reusable for left and right solves"""

    def __init__(self, M: Matrix, pivot_tol: Optional[float] = None):
        if pivot_tol is None:
            pivot_tol = get_settings().pivot_tol
        M = as_matrix(M, "M")
        if M.shape[0] != M.shape[1]:
            raise DimensionMismatch(f"M must be square, got {M.shape}")
        self.n = M.shape[0]
        self.system = np.eye(self.n) - M

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            self._lu, self._piv = lu_factor(self.system, check_finite=True)
        min_pivot = float(np.min(np.abs(np.diag(self._lu))))
        if min_pivot < pivot_tol:
            raise SingularSystem(
                f"(I - M) pivot {min_pivot:.3e} below {pivot_tol:.0e}; spectral radius of M is not < 1"
            )

    def solve(self, rhs) -> np.ndarray:
        """X with (I - M) X = rhs"""
        b = np.asarray(rhs, dtype=np.float64)
        X = lu_solve((self._lu, self._piv), b)
        self._check_residual(self.system @ X - b, b)
        return X

    def solve_right(self, rhs) -> np.ndarray:
        """X with X (I - M) = rhs (rhs has n columns)"""
        b = np.asarray(rhs, dtype=np.float64)
        X = lu_solve((self._lu, self._piv), b.T, trans=1).T
        self._check_residual(X @ self.system - b, b)
        return X

    @staticmethod
    def _check_residual(residual: np.ndarray, b: np.ndarray) -> None:
        scale = max(float(np.max(np.abs(b))) if b.size else 0.0, 1.0)
        res = float(np.max(np.abs(residual))) if residual.size else 0.0
        if not np.isfinite(res):
            raise SingularSystem("non-finite solution of (I - M) system")
        if res > 1e-12 * scale:
            logger.warning(f"(I - M) solve residual {res:.3e} exceeds 1e-12 * {scale:.3e}")


def solve_i_minus(M: Matrix, rhs, side: str = "left", pivot_tol: Optional[float] = None) -> np.ndarray:
    """
    Solve (I - M) X = rhs (side="left") or X (I - M) = rhs (side="right").

    Uses LU with partial pivoting; a pivot below pivot_tol raises
    SingularSystem (spectral radius of M >= 1 or ill-conditioning).
    """
    factor = IMinusFactor(M, pivot_tol=pivot_tol)
    if side == "left":
        return factor.solve(rhs)
    if side == "right":
        return factor.solve_right(rhs)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


@dataclass
class GraphAnalysis:
    """Communicating-class structure of a nonnegative matrix's support digraph"""
    num_classes: int
    is_strongly_connected: bool
    period: Optional[int]  # defined only when there is a single class
    labels: List[int] = field(default_factory=list)
    class_periods: List[int] = field(default_factory=list)
    closed_classes: List[int] = field(default_factory=list)

    @property
    def closed_period(self) -> Optional[int]:
        """Period of the unique closed class, or None if there is not exactly one."""
        if len(self.closed_classes) != 1:
            return None
        return self.class_periods[self.closed_classes[0]]


def _class_period(adj: np.ndarray, members: np.ndarray) -> int:
    """gcd of lev[u] + 1 - lev[v] over edges inside the class (BFS levels)"""
    inside = np.zeros(adj.shape[0], dtype=bool)
    inside[members] = True
    root = int(members[0])
    level = {root: 0}
    queue = deque([root])
    period = 0
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u] & inside):
            v = int(v)
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                period = gcd(period, abs(level[u] + 1 - level[v]))
    # a singleton without a self-loop has no cycle; report it as aperiodic
    return period if period > 0 else 1


def graph_analysis(M: Matrix, support_tol: Optional[float] = None) -> GraphAnalysis:
    """
    Classes and period of the support digraph of M (edge i->j when M[i,j] > support_tol).

    Depends only on the support pattern, hence invariant under positive rescaling.
    """
    if support_tol is None:
        support_tol = get_settings().support_tol
    M = as_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"M must be square, got {M.shape}")

    adj = M > support_tol
    num_classes, labels = connected_components(adj.astype(np.int8), directed=True, connection="strong")

    class_periods = []
    closed = []
    for c in range(num_classes):
        members = np.flatnonzero(labels == c)
        class_periods.append(_class_period(adj, members))
        outside = labels != c
        if not np.any(adj[np.ix_(members, outside)]):
            closed.append(c)

    return GraphAnalysis(
        num_classes=int(num_classes),
        is_strongly_connected=num_classes == 1,
        period=class_periods[0] if num_classes == 1 else None,
        labels=[int(x) for x in labels],
        class_periods=class_periods,
        closed_classes=closed,
    )
