"""scikit-learn style wrappers around transforms, moments and bounds.

The estimators take one :class:`~fmt_uncertainty.grid.SampledSignal` as
``X``.  They follow the usual conventions: constructor arguments are stored
verbatim (so ``get_params``/``set_params``/``clone`` work), fitted state ends
in an underscore, and ``fit`` returns ``self``.
"""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .battery import P_VALUES, MatrixPair, verify_signal
from .errors import DimensionMismatch
from .grid import Grid, SampledSignal, recenter
from .moments import compute_moments
from .symplectic import inverse, matrix_from_spec
from .transform import fmt_apply, plan_fmt

__all__ = [
    "check_signal",
    "check_pairs",
    "check_p_values",
    "FMTransformer",
    "MomentEstimator",
    "UncertaintyVerifier",
    "NotFittedError",
]


def check_signal(x) -> SampledSignal:
    """Coerce ``x`` to a :class:`SampledSignal`.

    Accepts a signal, its ``to_dict`` mapping, or a ``(grid, values)`` tuple.
    """
    if isinstance(x, SampledSignal):
        return x
    if isinstance(x, Mapping):
        return SampledSignal.from_dict(x)
    if isinstance(x, tuple) and len(x) == 2 and isinstance(x[0], Grid):
        return SampledSignal(x[0], np.asarray(x[1]))
    raise TypeError(f"expected a SampledSignal, its dict form or (grid, values); got {type(x).__name__}")


def check_pairs(pairs, n: int, seed: int = 0) -> list:
    """Normalize matrix pairs given as :class:`MatrixPair` or ``(m1, m2)`` specs."""
    out = []
    for i, p in enumerate(pairs):
        if isinstance(p, MatrixPair):
            if p.m1.n != n:
                raise DimensionMismatch(f"pair {p.name} has N={p.m1.n}, signal has N={n}")
            out.append(p)
            continue
        m1, m2 = p
        out.append(MatrixPair(f"pair-{i}", matrix_from_spec(m1, n, seed + 2 * i),
                              matrix_from_spec(m2, n, seed + 2 * i + 1)))
    if not out:
        raise ValueError("at least one matrix pair is required")
    return out


def check_p_values(p_values) -> tuple:
    ps = tuple(float(p) for p in p_values)
    if not ps or any(not 1.0 <= p <= 2.0 for p in ps):
        raise ValueError("p values must lie in [1, 2]")
    return ps


class FMTransformer(TransformerMixin, BaseEstimator):
    """Free metaplectic transform as a transformer.

    Parameters
    ----------
    matrix : str, mapping or matrix
        Anything accepted by :func:`~fmt_uncertainty.symplectic.matrix_from_spec`.
    oversample : int
        FFT zero-padding factor.
    nyquist_tol : float
        Band-edge energy limit of the chirped input.
    seed : int
        Seed for ``"random"`` specs without one.

    Attributes
    ----------
    matrix_ : FreeSympMatrix
    plan_ : FmtPlan
        Plan for the grid seen in ``fit``.
    """

    def __init__(self, matrix="fourier", oversample: int = 1, nyquist_tol: float = 1e-4, seed: int = 0):
        self.matrix = matrix
        self.oversample = oversample
        self.nyquist_tol = nyquist_tol
        self.seed = seed

    def fit(self, X, y=None):
        f = check_signal(X)
        self.matrix_ = matrix_from_spec(self.matrix, f.ndim, self.seed)
        self.plan_ = plan_fmt(self.matrix_, f.grid, oversample=self.oversample, nyquist_tol=self.nyquist_tol)
        return self

    def transform(self, X) -> SampledSignal:
        check_is_fitted(self, "plan_")
        f = check_signal(X)
        if not f.grid.same_as(self.plan_.in_grid):
            raise DimensionMismatch("signal grid differs from the grid seen in fit")
        return fmt_apply(self.plan_, f)

    def inverse_transform(self, Y) -> SampledSignal:
        """Apply the inverse matrix back onto the fitted input grid (up to a global phase)."""
        check_is_fitted(self, "plan_")
        y = check_signal(Y)
        plan = plan_fmt(inverse(self.matrix_), y.grid, out_grid=self.plan_.in_grid, nyquist_tol=self.nyquist_tol)
        return fmt_apply(plan, y)


class MomentEstimator(BaseEstimator):
    """Estimates the moment summary of a signal.

    Parameters
    ----------
    recenter : bool
        Remove the position and frequency means before estimating.
    center_tol : float
        Passed to :func:`~fmt_uncertainty.moments.compute_moments`.

    Attributes
    ----------
    moments_ : MomentSummary
    shift_ : dict
        Means removed by recentering (zeros when ``recenter=False``).
    """

    def __init__(self, recenter: bool = True, center_tol: float = 1e-6):
        self.recenter = recenter
        self.center_tol = center_tol

    def fit(self, X, y=None):
        f = check_signal(X)
        if self.recenter:
            f, self.shift_ = recenter(f)
        else:
            self.shift_ = {"shift_x": [0.0] * f.ndim, "shift_w": [0.0] * f.ndim}
        self.moments_ = compute_moments(f, center_tol=self.center_tol)
        self.covariance_ = np.array(self.moments_.Sigma)
        return self


class UncertaintyVerifier(BaseEstimator):
    """Evaluates every applicable bound of a signal for a list of matrix pairs.

    Parameters
    ----------
    pairs : list
        :class:`MatrixPair` objects or ``(m1, m2)`` spec tuples.
    tol : float
        Relative tolerance; an entry passes when ``lhs - rhs >= -tol·lhs``.
    p_values : sequence of float
        Exponents for the Lᵖ bounds.
    bounds : list of str, optional
        Bound families to keep.

    Attributes
    ----------
    report_ : BoundReport
    """

    def __init__(self, pairs=(("fourier", "frft:0.5"),), tol: float = 1e-3, p_values=P_VALUES, bounds=None,
                 seed: int = 0):
        self.pairs = pairs
        self.tol = tol
        self.p_values = p_values
        self.bounds = bounds
        self.seed = seed

    def fit(self, X, y=None):
        f = check_signal(X)
        f, _ = recenter(f)
        pairs = check_pairs(self.pairs, f.ndim, self.seed)
        self.report_ = verify_signal(f, pairs, self.tol, check_p_values(self.p_values), select=self.bounds)
        return self

    def predict(self, X=None) -> bool:
        """Whether every bound held (fits first when ``X`` is given)."""
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "report_")
        return self.report_.passed

    def score(self, X=None, y=None) -> float:
        """Smallest relative slack ``(lhs - rhs)/lhs`` over all entries."""
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "report_")
        return min((e.slack / e.lhs for e in self.report_.entries if e.lhs > 0), default=float("nan"))
