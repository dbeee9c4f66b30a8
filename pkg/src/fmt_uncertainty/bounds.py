"""Lower bounds for products of spreads in two transform domains.

Every right-hand side here is plain matrix arithmetic on a
:class:`~fmt_uncertainty.moments.MomentSummary`; quadrature only enters the
left-hand sides (second moments or weighted Lᵖ norms of transformed
samples) and the two integral identities in :func:`integral_identity_check`.

Notation: ``Mk = [[Ak, Bk], [Ck, Dk]]``; ``X``, ``W``, ``CovXW`` and ``Σ``
are the moment blocks of the signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DiagonalRequired, DimensionMismatch, ShapeRequired
from .grid import SampledSignal, normalize, weighted_lp
from .moments import MomentSummary, compute_moments
from .symplectic import as_symp, make_free, standard_j
from .transform import fmt_apply, fmt_gradient, plan_fmt

__all__ = [
    "bound_componentwise",
    "bound_trace",
    "bound_time_fmt",
    "bound_mo_component",
    "bound_mo_trace",
    "bound_extra_strong_diag",
    "bound_extra_strong_scalar",
    "singular_value_comparison",
    "lp_two_fmt",
    "lp_time_fmt",
    "lq_time_fmt",
    "bound_lp_two_fmt",
    "bound_lp_time_fmt",
    "bound_lq_time_fmt",
    "robertson_schrodinger_check",
    "integral_identity_check",
    "bound_ordering_check",
    "sign_matrix_scalars",
    "is_diagonal_pair",
]

_C16 = 16 * math.pi**2


def _pair(mom: MomentSummary, m1, m2):
    m1, m2 = as_symp(m1), as_symp(m2)
    if not (m1.n == m2.n == mom.n):
        raise DimensionMismatch(f"dimensions differ: moments {mom.n}, matrices {m1.n}, {m2.n}")
    return m1, m2


def _cross_blocks(mom: MomentSummary, m1, m2):
    """Top-left blocks of ``M1 J M2ᵀ`` and ``M1 Σ M2ᵀ``."""
    k = m1.A @ m2.B.T - m1.B @ m2.A.T
    q = (
        m1.A @ mom.X @ m2.A.T
        + m1.B @ mom.W @ m2.B.T
        + m1.A @ mom.CovXW @ m2.B.T
        + m1.B @ mom.CovXW.T @ m2.A.T
    )
    return k, q


def bound_componentwise(mom: MomentSummary, m1, m2) -> float:
    """Component-wise bound ``[Σ_j (K_jj²/16π² + Q_jj²)^{1/2}]²``.

    ``K = A1B2ᵀ - B1A2ᵀ`` and
    ``Q = A1XA2ᵀ + B1WB2ᵀ + A1 CovXW B2ᵀ + B1 CovXWᵀ A2ᵀ``.
    """
    m1, m2 = _pair(mom, m1, m2)
    k, q = _cross_blocks(mom, m1, m2)
    s = np.sum(np.sqrt(np.diag(k) ** 2 / _C16 + np.diag(q) ** 2))
    return float(s**2)


def bound_trace(mom: MomentSummary, m1, m2) -> float:
    """Trace bound.

    ``[tr(A1ᵀB2 - A2ᵀB1)]²/16π² + [tr(A2ᵀA1X) + tr(B1ᵀB2W) + tr((A1ᵀB2 + A2ᵀB1) CovXWᵀ)]²``
    """
    m1, m2 = _pair(mom, m1, m2)
    a1, b1, a2, b2 = m1.A, m1.B, m2.A, m2.B
    t = np.trace(a1.T @ b2 - a2.T @ b1)
    s = (
        np.trace(a2.T @ a1 @ mom.X)
        + np.trace(b1.T @ b2 @ mom.W)
        + np.trace((a1.T @ b2 + a2.T @ b1) @ mom.CovXW.T)
    )
    return float(t**2 / _C16 + s**2)


def _time_fmt_terms(mom: MomentSummary, m):
    m = as_symp(m)
    if m.n != mom.n:
        raise DimensionMismatch(f"dimensions differ: moments {mom.n}, matrix {m.n}")
    tr_b = np.trace(m.B)
    c = np.trace(m.A @ mom.X) + np.trace(m.B @ mom.CovXW.T)
    return m, float(tr_b), float(c)


def bound_time_fmt(mom: MomentSummary, m) -> float:
    """Position/transform bound ``[tr B]²/16π² + (tr(AX) + tr(B CovXWᵀ))²``."""
    _, tr_b, c = _time_fmt_terms(mom, m)
    return tr_b**2 / _C16 + c**2


def _mo_blocks(mom: MomentSummary, m1, m2):
    m1, m2 = _pair(mom, m1, m2)
    n = mom.n
    j = standard_j(n)
    mj = (m1.entries @ j @ m2.entries.T)[:n, :n]
    ms = (m1.entries @ mom.Sigma @ m2.entries.T)[:n, :n]
    return m1, m2, np.diag(mj), np.diag(ms)


def bound_mo_component(mom: MomentSummary, m1, m2) -> float:
    """``[Σ_j (|(M1JM2ᵀ)_jj|²/16π² + |(M1ΣM2ᵀ)_jj|²)^{1/2}]²`` for any symplectic pair."""
    _, _, kj, qj = _mo_blocks(mom, m1, m2)
    return float(np.sum(np.sqrt(kj**2 / _C16 + qj**2)) ** 2)


def bound_mo_trace(mom: MomentSummary, m1, m2) -> float:
    """``[Σ_j (M1JM2ᵀ)_jj]²/16π² + [Σ_j (M1ΣM2ᵀ)_jj]²`` for any symplectic pair."""
    _, _, kj, qj = _mo_blocks(mom, m1, m2)
    return float(np.sum(kj) ** 2 / _C16 + np.sum(qj) ** 2)


def _is_diag(a: np.ndarray) -> bool:
    return bool(np.all(a == np.diag(np.diag(a))))


def is_diagonal_pair(m1, m2) -> bool:
    """True when ``A1, B1, A2, B2`` are all diagonal."""
    m1, m2 = as_symp(m1), as_symp(m2)
    return all(_is_diag(b) for b in (m1.A, m1.B, m2.A, m2.B))


def bound_extra_strong_diag(mom: MomentSummary, m1, m2) -> float:
    """Diagonal-block bound with the absolute covariance.

    ``[Σ_j ((1/16π² + COV_jj² - Cov_jj²) K_jj² + Q_jj²)^{1/2}]²`` with
    ``K = M1JM2ᵀ`` and ``Q = M1ΣM2ᵀ`` (top-left blocks).

    Raises
    ------
    DiagonalRequired
        Unless ``A1, B1, A2, B2`` are diagonal.
    """
    m1, m2 = _pair(mom, m1, m2)
    if not is_diagonal_pair(m1, m2):
        raise DiagonalRequired("extra-strong diagonal bound needs diagonal A and B blocks")
    _, _, kj, qj = _mo_blocks(mom, m1, m2)
    cov_abs = np.diag(mom.cov_abs_per_pair)
    cov = np.diag(mom.CovXW)
    coef = 1 / _C16 + cov_abs**2 - cov**2
    return float(np.sum(np.sqrt(coef * kj**2 + qj**2)) ** 2)


def sign_matrix_scalars(m1, m2, tol: float = 1e-12):
    """Write ``Ak = ak S`` and ``Bk = bk S`` for one diagonal sign matrix ``S``.

    Returns
    -------
    (a1, b1, a2, b2), S

    Raises
    ------
    ShapeRequired
        If no common sign matrix exists.
    """
    m1, m2 = as_symp(m1), as_symp(m2)
    blocks = [m1.A, m1.B, m2.A, m2.B]
    if not all(_is_diag(b) for b in blocks):
        raise ShapeRequired("blocks must be diagonal multiples of a sign matrix")
    diags = [np.diag(b) for b in blocks]
    ref = next((d for d in diags if np.max(np.abs(d)) > tol), None)
    if ref is None:
        raise ShapeRequired("all blocks vanish")
    if np.any(np.abs(ref) <= tol):
        raise ShapeRequired("reference block has zero entries")
    sign = np.sign(ref) * np.sign(ref[0])
    scalars = []
    for d in diags:
        c = float(d[0] * sign[0])
        if np.max(np.abs(d - c * sign)) > tol * max(1.0, abs(c)):
            raise ShapeRequired("blocks are not multiples of one sign matrix")
        scalars.append(c)
    return tuple(scalars), np.diag(sign)


def _scalar_form(mom: MomentSummary, a1, b1, a2, b2, cov_abs_sq, cov_signed) -> float:
    n = mom.n
    first = (n**2 / _C16 + mom.cov_abs_total**2 - cov_abs_sq) * (a1 * b2 - a2 * b1) ** 2
    second = (a1 * a2 * mom.dx2 + b1 * b2 * mom.dw2 + (a1 * b2 + a2 * b1) * cov_signed) ** 2
    return float(first + second)


def bound_extra_strong_scalar(mom: MomentSummary, m1, m2) -> float:
    """Sign-matrix bound ``(N²/16π² + COV² - Cov²)(a1b2 - a2b1)² + [a1a2Δx² + b1b2Δw² + (a1b2 + a2b1)Cov]²``.

    Applies when ``Ak = ak S`` and ``Bk = bk S`` for a common diagonal sign
    matrix ``S``; raises :class:`ShapeRequired` otherwise.
    """
    _pair(mom, m1, m2)
    (a1, b1, a2, b2), _ = sign_matrix_scalars(m1, m2)
    return _scalar_form(mom, a1, b1, a2, b2, mom.cov**2, mom.cov)


def singular_value_comparison(mom: MomentSummary, m1, m2):
    """Singular-value form of the sign-matrix bound and the weaker ``|Cov|`` form.

    With ``μ`` the (common) singular value of each block, returns
    ``(rhs_cov, rhs_abs_cov)`` where ``rhs_abs_cov`` replaces ``Cov`` by
    ``-Σ_j |Cov_jj|`` in the bracket and ``Cov²`` by ``(Σ_j |Cov_jj|)²``.
    The singular-value form equals the signed one only when all four
    scalars share a sign, so other shapes raise :class:`ShapeRequired`.
    """
    _pair(mom, m1, m2)
    scalars, _ = sign_matrix_scalars(m1, m2)
    nz = [c for c in scalars if c != 0]
    if not (all(c >= 0 for c in nz) or all(c <= 0 for c in nz)):
        raise ShapeRequired("singular-value form needs scalars of one sign")
    mu = [abs(c) for c in scalars]
    rhs = _scalar_form(mom, *mu, mom.cov**2, mom.cov)
    abs_cov = mom.cov_abs_diag_sum
    rhs_abs = _scalar_form(mom, *mu, abs_cov**2, -abs_cov)
    return rhs, rhs_abs


def _lp_exponent(p: float) -> float:
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    return 2.0 / p - 1.0


def lp_two_fmt(l1: SampledSignal, l2: SampledSignal, mom: MomentSummary, m1, m2, p: float):
    """Lᵖ bound for two transform domains from precomputed transforms.

    The transforms must come from a unit-norm signal.

    ``lhs = ‖u L1f‖_p² ‖u L2f‖_p²`` and
    ``rhs = |det(B2A1ᵀ - A2B1ᵀ)|^{2/p-1} × trace bound``.
    """
    e = _lp_exponent(p)
    m1, m2 = _pair(mom, m1, m2)
    lhs = (weighted_lp(l1, "norm", p) * weighted_lp(l2, "norm", p)) ** 2
    det = abs(np.linalg.det(m2.B @ m1.A.T - m2.A @ m1.B.T))
    rhs = det**e * bound_trace(mom, m1, m2) if e else bound_trace(mom, m1, m2)
    return {"lhs": float(lhs), "rhs": float(rhs)}


def lp_time_fmt(f: SampledSignal, lf: SampledSignal, mom: MomentSummary, m, p: float):
    """``‖x f‖_p² ‖u L_M f‖_p² ≥ |det B|^{2/p-1}([tr B]²/16π² + (tr(AX) + tr(B CovXWᵀ))²)``."""
    e = _lp_exponent(p)
    m, tr_b, c = _time_fmt_terms(mom, m)
    lhs = (weighted_lp(f, "norm", p) * weighted_lp(lf, "norm", p)) ** 2
    base = tr_b**2 / _C16 + c**2
    rhs = abs(np.linalg.det(m.B)) ** e * base if e else base
    return {"lhs": float(lhs), "rhs": float(rhs)}


def lq_time_fmt(f: SampledSignal, lf: SampledSignal, mom: MomentSummary, m, p: float):
    """Conjugate-exponent form of the position/transform Lᵖ bound.

    ``(‖x f‖_p ‖u L_M f‖_p)^q ≥ |det B|^{q/p - q/2} (|tr B|^q/(4π)^q + |tr(AX) + tr(B CovXWᵀ)|^q)``
    with ``1/p + 1/q = 1``.  At ``p = 1`` (``q = ∞``) the q-th root of both
    sides is used: ``‖x f‖_1 ‖u L_M f‖_1 ≥ |det B|^{1/2} max(|tr B|/4π, |c|)``;
    the returned dict then carries ``"form": "root"``.
    """
    _lp_exponent(p)
    m, tr_b, c = _time_fmt_terms(mom, m)
    prod = weighted_lp(f, "norm", p) * weighted_lp(lf, "norm", p)
    det = abs(np.linalg.det(m.B))
    if p == 1.0:
        rhs = det**0.5 * max(abs(tr_b) / (4 * math.pi), abs(c))
        return {"lhs": float(prod), "rhs": float(rhs), "form": "root"}
    q = p / (p - 1.0)
    rhs = det ** (q / p - q / 2) * ((abs(tr_b) / (4 * math.pi)) ** q + abs(c) ** q)
    return {"lhs": float(prod**q), "rhs": float(rhs), "form": "power"}


def _transform(f: SampledSignal, m, oversample: int = 1) -> SampledSignal:
    return fmt_apply(plan_fmt(m, f.grid, oversample=oversample), f)


def bound_lp_two_fmt(f: SampledSignal, m1, m2, p: float, mom: MomentSummary | None = None):
    """:func:`lp_two_fmt` with both transforms evaluated on ``f.grid``."""
    f = normalize(f)
    mom = compute_moments(f) if mom is None else mom
    return lp_two_fmt(_transform(f, m1), _transform(f, m2), mom, m1, m2, p)


def bound_lp_time_fmt(f: SampledSignal, m, p: float, mom: MomentSummary | None = None):
    """:func:`lp_time_fmt` with the transform evaluated on ``f.grid``."""
    f = normalize(f)
    mom = compute_moments(f) if mom is None else mom
    return lp_time_fmt(f, _transform(f, m), mom, m, p)


def bound_lq_time_fmt(f: SampledSignal, m, p: float, mom: MomentSummary | None = None):
    """:func:`lq_time_fmt` with the transform evaluated on ``f.grid``."""
    f = normalize(f)
    mom = compute_moments(f) if mom is None else mom
    return lq_time_fmt(f, _transform(f, m), mom, m, p)


def robertson_schrodinger_check(mom: MomentSummary, m1, m2, tol: float = 1e-8):
    """Smallest eigenvalue of ``Υ + (i/4π)Ω`` with ``Υ = DΣDᵀ``, ``Ω = DJDᵀ``.

    ``D = [[A1, B1], [A2, B2]]``.  Returns ``{"min_eigenvalue", "psd"}``.
    """
    m1, m2 = _pair(mom, m1, m2)
    d = np.block([[m1.A, m1.B], [m2.A, m2.B]])
    ups = d @ mom.Sigma @ d.T
    omg = d @ standard_j(mom.n) @ d.T
    h = ups + (1j / (4 * math.pi)) * omg
    h = 0.5 * (h + h.conj().T)
    lam = float(np.linalg.eigvalsh(h)[0])
    return {"min_eigenvalue": lam, "psd": lam >= -tol}


def bound_ordering_check(mom: MomentSummary, m1, m2, tol: float = 1e-10) -> bool:
    """Component-wise bound dominates the trace bound (Minkowski)."""
    return bound_componentwise(mom, m1, m2) >= bound_trace(mom, m1, m2) - tol


@dataclass(frozen=True)
class IdentityGap:
    """Both sides of an integral identity and their discrepancy."""

    lhs: complex
    rhs: complex
    gap_re: float
    gap_im: float
    scale: float

    def ok(self, rel: float = 1e-3, abs_im: float = 1e-3) -> bool:
        return self.gap_re <= rel and self.gap_im <= abs_im

    def to_dict(self) -> dict:
        return {
            "lhs": [self.lhs.real, self.lhs.imag],
            "rhs": [self.rhs.real, self.rhs.imag],
            "gap_re": self.gap_re,
            "gap_im": self.gap_im,
            "scale": self.scale,
        }


def _gap(lhs: complex, rhs: complex, terms) -> IdentityGap:
    scale = max(abs(rhs.real), float(sum(abs(t) for t in terms)) * 1e-3, 1e-300)
    return IdentityGap(complex(lhs), complex(rhs), abs(lhs.real - rhs.real) / scale,
                       abs(lhs.imag - rhs.imag), scale)


def integral_identity_check(f: SampledSignal, m1, a2, b2, mom: MomentSummary | None = None,
                         oversample: int = 1):
    """Check the two integral identities behind the trace bound.

    With ``L = L_{M1} f``:

    * ``i ∫ uᵀ L (B2A1ᵀ - A2B1ᵀ) conj(∇L) du`` against its five-term moment
      expression, and
    * ``2π ∫ uᵀ (A2D1ᵀ - B2C1ᵀ) u |L|² du`` against its four-term expression.

    ``∇L`` is the exact derivative of the sampled transform
    (:func:`fmt_gradient`).  Returns ``{"first": IdentityGap, "second": IdentityGap}``.
    """
    m1 = make_free(m1)
    a2 = np.atleast_2d(np.asarray(a2, dtype=float))
    b2 = np.atleast_2d(np.asarray(b2, dtype=float))
    mom = compute_moments(f) if mom is None else mom
    plan = plan_fmt(m1, f.grid, oversample=oversample)
    lf = fmt_apply(plan, f)
    grad = fmt_gradient(plan, f)
    nrm2 = float(np.sum(np.abs(f.values) ** 2) * f.grid.cell_volume)
    u = plan.out_grid.coords()
    du = plan.out_grid.cell_volume
    a1, b1, c1, d1 = m1.A, m1.B, m1.C, m1.D
    b1i = m1.b_inverse
    X, W, Cv = mom.X, mom.W, mom.CovXW

    def qf(mat, blk):  # ∫ vᵀ M v ρ  ->  Σ M∘blk
        return float(np.sum(mat * blk))

    b3 = b2 @ a1.T - a2 @ b1.T
    ub3 = np.tensordot(b3.T, u, axes=(1, 0))  # (uᵀ B3)_k
    lhs1 = 1j * np.sum(lf.values * np.sum(ub3 * np.conj(grad), axis=0)) * du / nrm2
    t1 = a1.T @ b2 + a1.T @ b2 @ c1.T @ b1 - a1.T @ a2 @ b1.T @ d1 - a1.T @ c1 @ b2.T @ b1 + c1.T @ b1 @ a2.T @ b1
    w1 = b1.T @ b2 + b1.T @ b2 @ c1.T @ b1 - b1.T @ a2 @ b1.T @ d1
    x1 = (a1.T @ b2 @ b1i @ a1 + a1.T @ b2 @ c1.T @ a1 - a1.T @ a2 @ d1.T @ a1
          - b1i @ a1 @ b2.T @ a1 + a2.T @ a1)
    k1 = a1.T @ b2 + a1.T @ b2 @ c1.T @ b1 - a1.T @ a2 @ b1.T @ d1 + a1.T @ c1 @ b2.T @ b1 - c1.T @ b1 @ a2.T @ b1
    terms1 = [-0.5j * np.trace(t1), 2 * np.pi * qf(w1, W), 2 * np.pi * qf(x1, X), 2 * np.pi * qf(k1, Cv)]
    rhs1 = sum(terms1)

    a3 = a2 @ d1.T - b2 @ c1.T
    lhs2 = 2 * np.pi * np.sum(np.einsum("i...,ij,j...->...", u, a3, u) * np.abs(lf.values) ** 2) * du / nrm2
    t2 = a1.T @ a2 @ d1.T @ b1 - a1.T @ b2 @ c1.T @ b1 - a2.T @ b1 - c1.T @ b1 @ a2.T @ b1 + a1.T @ c1 @ b2.T @ b1
    x2 = a1.T @ a2 @ d1.T @ a1 - a1.T @ b2 @ c1.T @ a1
    w2 = b1.T @ a2 @ d1.T @ b1 - b1.T @ b2 @ c1.T @ b1
    k2 = a1.T @ a2 @ d1.T @ b1 - a1.T @ b2 @ c1.T @ b1 + a2.T @ b1 + c1.T @ b1 @ a2.T @ b1 - a1.T @ c1 @ b2.T @ b1
    terms2 = [-0.5j * np.trace(t2), 2 * np.pi * qf(x2, X), 2 * np.pi * qf(w2, W), 2 * np.pi * qf(k2, Cv)]
    rhs2 = sum(terms2)
    return {"first": _gap(complex(lhs1), complex(rhs1), terms1),
            "second": _gap(complex(lhs2), complex(rhs2), terms2)}
