"""Spreads, covariances and the phase-space covariance matrix of a signal.

For ``f = |f| e^{2πiφ}`` with unit norm and zero means:

* ``X_jk = ∫ x_j x_k |f|²`` and ``W_jk = ∫ w_j w_k |f̂|²``,
* ``CovXW_jk = ∫ x_j ∂_kφ |f|²``,
* ``COV_jk = ∫ |x_j ∂_kφ| |f|²`` and ``COV = ∫ |x| |∇φ| |f|²``,
* ``Σ = [[X, CovXW], [CovXWᵀ, W]]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotCentered, ZeroSignal
from .grid import GaussianChirp, PolarField, SampledSignal, gradient, polar_decompose
from .symplectic import as_symp
from .transform import fmt_apply, fourier_samples, plan_fmt, wigner_moments

__all__ = [
    "MomentSummary",
    "compute_moments",
    "analytic_gaussian_moments",
    "second_moment_identity",
    "second_moment_fmt",
    "sigma_via_wigner",
]


@dataclass(frozen=True, eq=False)
class MomentSummary:
    """All moment quantities of one signal.

    Scalars are the traces of the matrix fields: ``dx2 = tr X``,
    ``dw2 = tr W`` and ``cov = tr CovXW``; ``cov_abs_diag_sum`` is
    ``Σ_j |CovXW_jj|``.
    """

    mean_x: np.ndarray
    mean_w: np.ndarray
    X: np.ndarray
    W: np.ndarray
    CovXW: np.ndarray
    cov_abs_total: float
    cov_abs_per_pair: np.ndarray
    masked_mass: float = 0.0
    w_crosscheck: float = 0.0
    source: str = "quadrature"
    dx2: float = field(init=False)
    dw2: float = field(init=False)
    cov: float = field(init=False)
    cov_abs_diag_sum: float = field(init=False)
    Sigma: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("mean_x", "mean_w", "X", "W", "CovXW", "cov_abs_per_pair"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "dx2", float(np.trace(self.X)))
        object.__setattr__(self, "dw2", float(np.trace(self.W)))
        object.__setattr__(self, "cov", float(np.trace(self.CovXW)))
        object.__setattr__(self, "cov_abs_diag_sum", float(np.sum(np.abs(np.diag(self.CovXW)))))
        sigma = np.block([[self.X, self.CovXW], [self.CovXW.T, self.W]])
        sigma.setflags(write=False)
        object.__setattr__(self, "Sigma", sigma)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def scaled(self, factor: float) -> "MomentSummary":
        """Summary with every second moment multiplied by ``factor``."""
        return MomentSummary(
            self.mean_x, self.mean_w, factor * self.X, factor * self.W, factor * self.CovXW,
            factor * self.cov_abs_total, factor * self.cov_abs_per_pair,
            self.masked_mass, self.w_crosscheck, self.source,
        )

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "mean_x": self.mean_x.tolist(),
            "mean_w": self.mean_w.tolist(),
            "dx2": self.dx2,
            "dw2": self.dw2,
            "cov": self.cov,
            "cov_abs_total": self.cov_abs_total,
            "cov_abs_per_pair": self.cov_abs_per_pair.tolist(),
            "cov_abs_diag_sum": self.cov_abs_diag_sum,
            "X": self.X.tolist(),
            "W": self.W.tolist(),
            "CovXW": self.CovXW.tolist(),
            "Sigma": self.Sigma.tolist(),
            "masked_mass": self.masked_mass,
            "w_crosscheck": self.w_crosscheck,
        }

    @classmethod
    def from_dict(cls, d) -> "MomentSummary":
        return cls(
            d["mean_x"], d["mean_w"], d["X"], d["W"], d["CovXW"], d["cov_abs_total"],
            d["cov_abs_per_pair"], d.get("masked_mass", 0.0), d.get("w_crosscheck", 0.0),
            d.get("source", "quadrature"),
        )


def _weighted_outer(a: np.ndarray, b: np.ndarray, weight) -> np.ndarray:
    """``Σ_points a_i b_j weight`` for fields of shape ``(N, *grid)``."""
    n = a.shape[0]
    a2 = a.reshape(n, -1)
    b2 = b.reshape(n, -1)
    wt = np.broadcast_to(weight, a.shape[1:]).reshape(-1)
    return (a2 * wt) @ b2.T


def compute_moments(f: SampledSignal, spec: PolarField | None = None, center_tol: float = 1e-6) -> MomentSummary:
    """Moment summary of a sampled signal by masked quadrature.

    Parameters
    ----------
    f : SampledSignal
        Signal; it is normalized internally by its quadrature norm.
    spec : PolarField, optional
        Polar decomposition of ``f``; computed with the default floor if
        omitted.
    center_tol : float
        Largest admissible ``|⟨x⟩|`` and ``|⟨w⟩|``.

    Raises
    ------
    NotCentered
        If either mean exceeds ``center_tol``; use
        :func:`fmt_uncertainty.grid.recenter` first.

    Notes
    -----
    ``W`` comes from ``|f̂|²`` on the conjugate lattice.  It is
    cross-checked against ``(1/4π²) Re ∫ ∂_j f conj(∂_k f)``; the largest
    absolute difference is stored in ``w_crosscheck``.
    """
    if spec is None:
        spec = polar_decompose(f)
    dv = f.grid.cell_volume
    rho = np.abs(f.values) ** 2
    mass = float(rho.sum() * dv)
    if mass == 0:
        raise ZeroSignal("signal has zero norm")
    rho = rho / mass
    x = f.grid.coords()
    nd = f.ndim
    mean_x = np.tensordot(x, rho, axes=nd) * dv

    fh = fourier_samples(f)
    rho_w = np.abs(fh.values) ** 2 / mass
    w = fh.grid.coords()
    dw = fh.grid.cell_volume
    mean_w = np.tensordot(w, rho_w, axes=nd) * dw
    off = max(np.max(np.abs(mean_x)), np.max(np.abs(mean_w)))
    if off > center_tol:
        raise NotCentered(f"signal means |<x>|, |<w>| up to {off:.2e} exceed {center_tol:.0e}; recenter first")

    xc = x - mean_x.reshape((-1,) + (1,) * nd)
    wc = w - mean_w.reshape((-1,) + (1,) * nd)
    X = _weighted_outer(xc, xc, rho) * dv
    W = _weighted_outer(wc, wc, rho_w) * dw
    grad_phi = spec.phase_gradient - mean_w.reshape((-1,) + (1,) * nd) * spec.support_mask[None]
    cov_xw = _weighted_outer(xc, grad_phi, rho) * dv
    cov_abs = _weighted_outer(np.abs(xc), np.abs(grad_phi), rho) * dv
    xnorm = np.sqrt(np.sum(xc**2, axis=0))
    gnorm = np.sqrt(np.sum(grad_phi**2, axis=0))
    cov_total = float(np.sum(xnorm * gnorm * rho) * dv)

    df = gradient(f, "spectral")
    w_grad = np.real(_weighted_outer(df, np.conj(df), 1.0)) * dv / (4 * np.pi**2 * mass)
    w_grad -= np.outer(mean_w, mean_w)
    cross = float(np.max(np.abs(w_grad - W)))

    return MomentSummary(
        mean_x, mean_w, 0.5 * (X + X.T), 0.5 * (W + W.T), cov_xw, cov_total, cov_abs,
        spec.masked_mass, cross, "quadrature",
    )


def analytic_gaussian_moments(g: GaussianChirp) -> MomentSummary:
    """Closed-form moments of a :class:`GaussianChirp`.

    ``X = diag(ζ/2)``, ``W = diag(1/(8π²ζ) + ζ/(2ε²))``, ``CovXW = diag(ζ/(2ε))``.
    The chirp gradient is ``x/ε``, so ``COV_jk = E|x_j x_k| / |ε|`` and
    ``COV = E|x|² / |ε|``.
    """
    z = np.asarray(g.zeta)
    c = g.chirp_rate
    n = len(z)
    X = np.diag(z / 2)
    W = np.diag(1 / (8 * math.pi**2 * z) + z * c**2 / 2)
    cov = np.diag(z * c / 2)
    # E|x_j| = sqrt(ζ_j/π) for x_j ~ N(0, ζ_j/2)
    e_abs = np.sqrt(z / math.pi)
    cov_abs = abs(c) * np.outer(e_abs, e_abs)
    cov_abs[np.diag_indices(n)] = abs(c) * z / 2
    total = abs(c) * float(z.sum()) / 2
    return MomentSummary(np.zeros(n), np.zeros(n), X, W, cov, total, cov_abs, 0.0, 0.0, "analytic")


def second_moment_identity(mom: MomentSummary, m) -> float:
    """``∫|u L_M f|² du`` from moments: ``tr(AXAᵀ) + tr(BWBᵀ) + 2 Σ (AᵀB)∘CovXW``."""
    m = as_symp(m)
    a, b = m.A, m.B
    return float(
        np.trace(a @ mom.X @ a.T) + np.trace(b @ mom.W @ b.T) + 2 * np.sum((a.T @ b) * mom.CovXW)
    )


def second_moment_fmt(f: SampledSignal, m, mom: MomentSummary | None = None, oversample: int = 1):
    """``∫|u L_M f(u)|² du`` computed directly and from the moment identity.

    Returns
    -------
    (direct, identity) : tuple of float
        ``direct`` is the quadrature of the transformed samples; the
        input grid must resolve the chirped signal.
    """
    from .grid import weighted_lp

    lf = fmt_apply(plan_fmt(m, f.grid, oversample=oversample), f)
    nrm2 = float(np.sum(np.abs(f.values) ** 2) * f.grid.cell_volume)
    direct = weighted_lp(lf, "norm", 2) ** 2 / nrm2
    if mom is None:
        mom = compute_moments(f)
    return direct, second_moment_identity(mom, m)


def sigma_via_wigner(f: SampledSignal) -> np.ndarray:
    """``Σ_{αβ} = ∫ z_α z_β W_f(z) dz`` from the streamed Wigner function."""
    wm = wigner_moments(f)
    return wm.sigma / wm.total
