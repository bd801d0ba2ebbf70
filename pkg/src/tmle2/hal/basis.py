"""Zero-order spline (indicator) bases with knots at observed values.

Columns are all binary, so designs are materialized as CSC sparse matrices
built directly from suffix index sets of the value-sorted order: the column
for knot ``u`` selects exactly the rows with ``x >= u``.

Fitting designs returned here do NOT carry an intercept column; the lasso
solver fits an unpenalized intercept itself.  ``IndicatorBasis.evaluate``
does include the intercept, matching the basis-as-feature-map contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse


class EmptyData(ValueError):
    """No data points supplied for knot placement."""


@dataclass(frozen=True)
class IndicatorBasis:
    """Indicator columns 1{x >= u_j} over sorted unique knots, plus intercept."""

    knots: np.ndarray

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=float)
        if knots.size == 0:
            raise EmptyData("basis needs at least one knot")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", knots)

    @property
    def n_columns(self) -> int:
        # intercept + one indicator per knot
        return 1 + self.knots.size

    def evaluate(self, x) -> np.ndarray:
        """Dense design [1, 1{x >= u_1}, ..., 1{x >= u_K}] for scalar or array x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.ones((x.size, self.n_columns))
        out[:, 1:] = x[:, None] >= self.knots[None, :]
        return out

    def indicator_csc(self, x: np.ndarray) -> sparse.csc_matrix:
        """Sparse indicator columns (no intercept) for array x."""
        return _indicator_columns(np.asarray(x, dtype=float), self.knots)


def build_basis(data_points) -> IndicatorBasis:
    """Knots at the deduplicated observed values."""
    pts = np.asarray(data_points, dtype=float).ravel()
    if pts.size == 0:
        raise EmptyData("cannot place knots on empty data")
    return IndicatorBasis(knots=np.unique(pts))


def _indicator_columns(x: np.ndarray, knots: np.ndarray) -> sparse.csc_matrix:
    """CSC matrix with column j = 1{x >= knots[j]}, built from suffix sets."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    starts = np.searchsorted(xs, knots, side="left")
    counts = x.size - starts
    indptr = np.zeros(knots.size + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.concatenate([order[s:] for s in starts]) if knots.size else np.empty(0, int)
    data = np.ones(indices.size)
    return sparse.csc_matrix((data, indices, indptr), shape=(x.size, knots.size))


def treatment_design(basis: IndicatorBasis, w) -> sparse.csc_matrix:
    """Treatment-model design: columns {1{W >= W_i}} (intercept implicit)."""
    return basis.indicator_csc(np.asarray(w, dtype=float))


def _dedupe_keep(X: sparse.csc_matrix) -> list[int]:
    """Indices of the first column of each exact-duplicate group.

    Interaction columns A*1{W >= u} only change at treated knots, so knots
    between consecutive treated observations produce identical columns;
    exact ties make the lasso optimum non-unique and stall coordinate
    descent without changing the fitted model.
    """
    seen: set[bytes] = set()
    keep = []
    for j in range(X.shape[1]):
        key = X.indices[X.indptr[j] : X.indptr[j + 1]].tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(j)
    return keep


@dataclass(frozen=True)
class OutcomeDesignSpec:
    """Retained columns of an outcome design, for rebuilding at new points.

    Deduplication is training-data dependent, so fitted models carry this
    spec instead of re-running the builder.
    """

    include_a: bool
    plain_knots: np.ndarray
    inter_knots: np.ndarray

    def matrix(self, w, a) -> sparse.csc_matrix:
        w = np.atleast_1d(np.asarray(w, dtype=float))
        a = np.broadcast_to(np.asarray(a, dtype=float), w.shape)
        cols = []
        if self.include_a:
            cols.append(sparse.csc_matrix(a.reshape(-1, 1)))
        if self.plain_knots.size:
            cols.append(_indicator_columns(w, self.plain_knots))
        if self.inter_knots.size:
            inter = _indicator_columns(w, self.inter_knots).multiply(a.reshape(-1, 1))
            cols.append(inter.tocsc())
        X = sparse.hstack(cols, format="csc")
        X.eliminate_zeros()
        X.sort_indices()
        return X


def tsm_outcome_design_spec(basis: IndicatorBasis, w, a) -> tuple[sparse.csc_matrix, OutcomeDesignSpec]:
    """Outcome-model design {A, 1{W >= W_i}, A*1{W >= W_i}} plus its spec.

    Exact duplicate columns are dropped, which leaves interaction knots at
    the treated observations only.
    """
    w = np.asarray(w, dtype=float)
    a = np.asarray(a, dtype=float)
    a_col = sparse.csc_matrix(a.reshape(-1, 1))
    ind = basis.indicator_csc(w)
    inter = ind.multiply(a.reshape(-1, 1)).tocsc()
    X = sparse.hstack([a_col, ind, inter], format="csc")
    X.eliminate_zeros()
    X.sort_indices()
    keep = _dedupe_keep(X)
    K = basis.knots.size
    include_a = 0 in keep
    plain = np.array([j - 1 for j in keep if 1 <= j < 1 + K], dtype=int)
    inter_idx = np.array([j - 1 - K for j in keep if j >= 1 + K], dtype=int)
    spec = OutcomeDesignSpec(
        include_a=include_a,
        plain_knots=basis.knots[plain],
        inter_knots=basis.knots[inter_idx],
    )
    if len(keep) != X.shape[1]:
        X = X[:, keep].tocsc()
    return X, spec


def tsm_outcome_design(basis: IndicatorBasis, w, a) -> sparse.csc_matrix:
    """Outcome-model design matrix; see :func:`tsm_outcome_design_spec`."""
    return tsm_outcome_design_spec(basis, w, a)[0]
