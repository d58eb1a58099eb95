"""Correlated-equilibrium polytopes of bimatrix games.

The polytope lives in the space of joint distributions over the two grids.
Besides the best CE (maximum total reward) this module estimates whether the
polytope is a single point, with a randomized width test calibrated by the
chi-square distribution, and whether a CE factorizes (rank one).
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, sparse, special

__all__ = [
    "LinearProgram",
    "LPError",
    "InfeasibleError",
    "CEStatus",
    "CEPolytopeResult",
    "build_ce_lp",
    "lp_solve",
    "ce_violation",
    "max_total_reward_ce",
    "sum_diam_squared",
    "max_diameter",
    "chi2_cdf",
    "chi2_quantile",
    "rank1_gap",
]

FEAS_TOL = 1e-9


class LPError(RuntimeError):
    pass


class InfeasibleError(LPError):
    """The constraints define an empty polytope."""


@dataclass
class LinearProgram:
    """``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``, objective ``c``.

    ``grid_shape`` is set for CE programs, whose variables are a joint
    distribution flattened row-major.
    """

    c: np.ndarray
    A_ub: sparse.csr_matrix
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    grid_shape: tuple[int, int] | None = None

    @property
    def n_vars(self) -> int:
        return len(self.c)

    def constraint_counts(self) -> dict:
        return {"inequality": self.A_ub.shape[0], "nonnegativity": self.n_vars,
                "equality": self.A_eq.shape[0]}

    @property
    def n_constraints(self) -> int:
        return sum(self.constraint_counts().values())

    def to_dict(self) -> dict:
        coo = self.A_ub.tocoo()
        return {"c": self.c.tolist(), "b_ub": self.b_ub.tolist(),
                "A_ub": {"shape": list(coo.shape), "row": coo.row.tolist(),
                         "col": coo.col.tolist(), "data": coo.data.tolist()},
                "A_eq": self.A_eq.tolist(), "b_eq": self.b_eq.tolist(),
                "grid_shape": list(self.grid_shape) if self.grid_shape else None}


def _deviation_rows(U, row_player: bool):
    """Rows ``sum_other x[s, .] (U[s', .] - U[s, .]) <= 0`` for every ordered pair s != s'."""
    a1, a2 = U.shape
    own = a1 if row_player else a2
    other = a2 if row_player else a1
    s, s_dev = np.nonzero(~np.eye(own, dtype=bool))
    k = np.arange(other)
    if row_player:
        data = U[s_dev][:, k] - U[s][:, k]
        cols = s[:, None] * a2 + k[None, :]
    else:
        data = (U[:, s_dev] - U[:, s]).T
        cols = k[None, :] * a2 + s[:, None]
    rows = np.repeat(np.arange(len(s)), other)
    return rows, cols.ravel(), data.ravel(), len(s)


def build_ce_lp(game) -> LinearProgram:
    """CE constraints of a two-player game with the total reward as objective."""
    U1, U2 = game.U1, game.U2
    a1, a2 = U1.shape
    r1, c1, d1, n1 = _deviation_rows(U1, True)
    r2, c2, d2, n2 = _deviation_rows(U2, False)
    A_ub = sparse.csr_matrix(
        (np.concatenate([d1, d2]), (np.concatenate([r1, r2 + n1]), np.concatenate([c1, c2]))),
        shape=(n1 + n2, a1 * a2))
    return LinearProgram(
        c=(U1 + U2).ravel().astype(float),
        A_ub=A_ub,
        b_ub=np.zeros(n1 + n2),
        A_eq=np.ones((1, a1 * a2)),
        b_eq=np.ones(1),
        grid_shape=(a1, a2),
    )


def ce_violation(game, joint) -> float:
    """Largest violation of any CE inequality by ``joint`` (0 if it is a CE)."""
    X = np.asarray(joint, dtype=float)
    own1 = (X * game.U1).sum(axis=1)
    gain1 = X @ game.U1.T - own1[:, None]
    own2 = (X * game.U2).sum(axis=0)
    gain2 = game.U2.T @ X - own2[None, :]
    return float(max(gain1.max(), gain2.max(), 0.0))


# -- LP backends --------------------------------------------------------------

def _pivot(T, row, col):
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])


def _bland(T, basis, n_cols, tol, max_iter):
    """Maximise with the reduced costs in the last row; Bland's rule throughout."""
    m = T.shape[0] - 1
    for _ in range(max_iter):
        reduced = T[-1, :n_cols]
        candidates = np.nonzero(reduced < -tol)[0]
        if len(candidates) == 0:
            return
        col = candidates[0]
        column = T[:m, col]
        positive = column > tol
        if not np.any(positive):
            raise LPError("linear program is unbounded")
        ratios = np.full(m, np.inf)
        ratios[positive] = T[:m, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + tol * max(1.0, abs(best)))[0]
        row = ties[np.argmin(np.asarray(basis)[ties])]
        _pivot(T, row, col)
        basis[row] = col
    raise LPError("simplex iteration limit reached")


def _dense_simplex(c, A_ub, b_ub, A_eq, b_eq, tol=FEAS_TOL, max_iter=100000):
    """Two-phase tableau simplex for ``max c x``; returns ``(value, x)``."""
    A_ub = np.asarray(A_ub, dtype=float).reshape(-1, len(c))
    A_eq = np.asarray(A_eq, dtype=float).reshape(-1, len(c))
    m1, n = A_ub.shape
    m2 = A_eq.shape[0]
    m = m1 + m2
    A = np.zeros((m, n + m1))
    A[:m1, :n] = A_ub
    A[:m1, n:] = np.eye(m1)
    A[m1:, :n] = A_eq
    b = np.concatenate([np.asarray(b_ub, float), np.asarray(b_eq, float)])
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    n_struct = n + m1

    T = np.zeros((m + 1, n_struct + m + 1))
    T[:m, :n_struct] = A
    T[:m, n_struct:n_struct + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n_struct] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n_struct, n_struct + m))
    _bland(T, basis, n_struct + m, tol, max_iter)
    if T[-1, -1] < -tol * max(1.0, np.abs(b).max(initial=0.0)):
        raise InfeasibleError("phase one ended with positive artificial mass")

    keep = []
    for r in range(m):
        if basis[r] >= n_struct:
            nonzero = np.nonzero(np.abs(T[r, :n_struct]) > tol)[0]
            if len(nonzero) == 0:
                continue  # redundant row
            _pivot(T, r, nonzero[0])
            basis[r] = nonzero[0]
        keep.append(r)
    T = np.vstack([T[keep][:, list(range(n_struct)) + [T.shape[1] - 1]], np.zeros(n_struct + 1)])
    basis = [basis[r] for r in keep]
    cost = np.concatenate([np.asarray(c, float), np.zeros(m1)])
    cb = cost[basis]
    T[-1, :n_struct] = cb @ T[:-1, :n_struct] - cost
    T[-1, -1] = cb @ T[:-1, -1]
    _bland(T, basis, n_struct, tol, max_iter)

    x = np.zeros(n_struct)
    x[basis] = T[:-1, -1]
    return float(T[-1, -1]), np.maximum(x[:n], 0.0)


def lp_solve(lp: LinearProgram, direction: str = "max", objective=None, method: str = "highs"):
    """Optimise ``objective`` (default ``lp.c``) over the polytope.

    Returns ``(value, x)``; raises :class:`InfeasibleError` on an empty
    polytope. ``method`` is ``"highs"`` or the built-in ``"simplex"``.
    """
    c = np.asarray(lp.c if objective is None else objective, dtype=float)
    if direction not in ("max", "min"):
        raise ValueError("direction is 'max' or 'min'")
    sign = 1.0 if direction == "max" else -1.0
    if method == "simplex":
        A_ub = lp.A_ub.toarray() if sparse.issparse(lp.A_ub) else lp.A_ub
        value, x = _dense_simplex(sign * c, A_ub, lp.b_ub, lp.A_eq, lp.b_eq)
        return sign * value, x
    if method != "highs":
        raise ValueError(f"unknown LP method {method!r}")
    res = optimize.linprog(
        -sign * c,
        A_ub=lp.A_ub if lp.A_ub.shape[0] else None,
        b_ub=lp.b_ub if lp.A_ub.shape[0] else None,
        A_eq=lp.A_eq if len(lp.A_eq) else None,
        b_eq=lp.b_eq if len(lp.A_eq) else None,
        bounds=(0, None), method="highs",
        options={"primal_feasibility_tolerance": FEAS_TOL, "dual_feasibility_tolerance": FEAS_TOL},
    )
    if res.status == 2:
        raise InfeasibleError(res.message)
    if res.status != 0:
        raise LPError(res.message)
    x = np.maximum(res.x, 0.0)
    return float(c @ x), x


# -- diameter confidence bound ------------------------------------------------

def chi2_cdf(x, K):
    """CDF of the chi-square distribution, the regularised incomplete gamma P(K/2, x/2)."""
    if np.any(np.asarray(x) < 0):
        raise ValueError("chi-square support is x >= 0")
    return special.gammainc(K / 2, np.asarray(x, dtype=float) / 2)


def chi2_quantile(q, K):
    if not 0 < q < 1:
        raise ValueError("quantile level must lie in (0, 1)")
    return float(2 * special.gammaincinv(K / 2, q))


def sum_diam_squared(K: int, lp: LinearProgram, seed=0, method: str = "highs") -> float:
    """Sum over K Gaussian directions of the squared polytope width along each."""
    if K < 1:
        raise ValueError("need at least one direction")
    total = 0.0
    for child in np.random.SeedSequence(seed).spawn(K):
        v = np.random.default_rng(child).standard_normal(lp.n_vars)
        hi, _ = lp_solve(lp, "max", v, method)
        lo, _ = lp_solve(lp, "min", v, method)
        total += max(hi - lo, 0.0) ** 2
    return total


def max_diameter(p: float = 0.95, K: int = 5, lp: LinearProgram | None = None, seed=0,
                 method: str = "highs", lower_tail: bool = True, root: bool = False,
                 sum_sq: float | None = None) -> float:
    """Randomized upper confidence bound on the polytope diameter.

    Divides the summed squared widths by the chi-square quantile at ``1 - p``
    (``lower_tail=False`` uses ``p``); ``root=True`` returns its square root.
    """
    if not 0 < p < 1:
        raise ValueError("confidence must lie in (0, 1)")
    if sum_sq is None:
        sum_sq = sum_diam_squared(K, lp, seed, method)
    d = sum_sq / chi2_quantile(1 - p if lower_tail else p, K)
    return math.sqrt(d) if root else d


def rank1_gap(joint) -> float:
    """Ratio of the second to the first singular value; 0 iff the matrix has rank one."""
    X = np.asarray(joint, dtype=float)
    if X.ndim != 2 or not np.any(X):
        raise ValueError("need a nonzero matrix")
    sv = np.linalg.svd(X, compute_uv=False)
    return float(sv[1] / sv[0]) if len(sv) > 1 else 0.0


class CEStatus(str, enum.Enum):
    SOLVED = "solved"
    INFEASIBLE = "infeasible"


@dataclass
class CEPolytopeResult:
    status: CEStatus
    best_ce: np.ndarray | None
    value: float | None
    d_max: float | None
    lambda_: float | None
    sum_diam_squared: float | None
    K: int
    p: float

    def to_dict(self) -> dict:
        return {"status": self.status.value, "value": self.value, "d_max": self.d_max,
                "lambda": self.lambda_, "sum_diam_squared": self.sum_diam_squared,
                "K": self.K, "p": self.p,
                "best_ce": None if self.best_ce is None else self.best_ce.tolist()}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def best_ce_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.best_ce.tolist())


def max_total_reward_ce(game, K: int = 5, p: float = 0.95, seed=0,
                        method: str = "highs", diameter: bool = True) -> CEPolytopeResult:
    """Best CE by total reward, plus the diameter bound and rank-one gap."""
    lp = build_ce_lp(game)
    try:
        value, x = lp_solve(lp, "max", method=method)
        sum_sq = sum_diam_squared(K, lp, seed, method) if diameter else None
    except InfeasibleError:
        return CEPolytopeResult(CEStatus.INFEASIBLE, None, None, None, None, None, K, p)
    joint = x.reshape(lp.grid_shape)
    joint = joint / joint.sum()
    d_max = None if sum_sq is None else max_diameter(p, K, sum_sq=sum_sq)
    return CEPolytopeResult(CEStatus.SOLVED, joint, value, d_max, rank1_gap(joint), sum_sq, K, p)
