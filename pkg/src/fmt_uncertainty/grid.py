"""Sampling lattices, sampled signals and the Gaussian-chirp test family.

A :class:`Grid` is a uniform lattice ``x(k) = origin + T (k - n/2)`` where
``k`` runs over the multi-index range ``[0, n)`` and ``T`` is an N x N basis.
The usual centered box ``[-L, L)^N`` is the diagonal case ``T = diag(2L/n)``;
non-diagonal bases appear as output lattices of the fast transform.
Quadrature is the plain Riemann sum with weight ``|det T|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import erf

from .errors import DimensionMismatch, GridTooSmall, ZeroSignal

__all__ = [
    "Grid",
    "SampledSignal",
    "GaussianChirp",
    "PolarField",
    "box_grid",
    "sample_gaussian_chirp",
    "normalize",
    "polar_decompose",
    "gradient",
    "lp_norm",
    "weighted_lp",
    "recenter",
    "signal_means",
]


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform lattice ``origin + basis @ (k - shape // 2)``."""

    shape: tuple
    basis: np.ndarray
    origin: np.ndarray = field(default=None)

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        basis = np.array(self.basis, dtype=float, ndmin=2)
        n = len(shape)
        if basis.shape != (n, n):
            raise DimensionMismatch(f"basis shape {basis.shape} does not match {n} axes")
        if any(s < 2 for s in shape):
            raise ValueError("every axis needs at least 2 samples")
        if abs(np.linalg.det(basis)) == 0:
            raise ValueError("grid basis is singular")
        origin = np.zeros(n) if self.origin is None else np.array(self.origin, dtype=float).reshape(n)
        basis.setflags(write=False)
        origin.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def box(cls, samples, half_extent) -> "Grid":
        """Centered box ``[-L_j, L_j)`` with ``samples_j`` points per axis."""
        samples = np.atleast_1d(np.asarray(samples, dtype=int))
        half = np.atleast_1d(np.asarray(half_extent, dtype=float))
        samples, half = np.broadcast_arrays(samples, half)
        if np.any(half <= 0):
            raise ValueError("half extents must be positive")
        return cls(tuple(samples), np.diag(2.0 * half / samples))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def is_rectangular(self) -> bool:
        return bool(np.all(self.basis == np.diag(np.diag(self.basis))))

    @property
    def step(self) -> np.ndarray:
        """Per-axis step of a rectangular grid."""
        if not self.is_rectangular:
            raise ValueError("step is only defined for rectangular grids")
        return np.diag(self.basis).copy()

    @property
    def half_extent(self) -> np.ndarray:
        return np.abs(self.step) * np.asarray(self.shape) / 2.0

    @property
    def cell_volume(self) -> float:
        return float(abs(np.linalg.det(self.basis)))

    def offsets(self) -> list:
        """Centered integer offsets ``k - n/2`` per axis."""
        return [np.arange(s) - s // 2 for s in self.shape]

    def coords(self) -> np.ndarray:
        """Point coordinates, shape ``(N, *shape)``."""
        idx = np.meshgrid(*self.offsets(), indexing="ij")
        k = np.stack(idx).astype(float)
        x = np.tensordot(self.basis, k, axes=(1, 0))
        return x + self.origin.reshape((-1,) + (1,) * self.ndim)

    def points(self) -> np.ndarray:
        """Point coordinates as a ``(size, N)`` array in row-major order."""
        return self.coords().reshape(self.ndim, -1).T

    def conjugate(self, pad: int = 1) -> "Grid":
        """Frequency lattice reached by an FFT of size ``pad * shape``."""
        shape = tuple(pad * s for s in self.shape)
        basis = np.linalg.inv(self.basis).T @ np.diag(1.0 / np.asarray(shape, dtype=float))
        return Grid(shape, basis)

    def with_origin(self, origin) -> "Grid":
        return Grid(self.shape, self.basis, origin)

    def same_as(self, other: "Grid", rtol: float = 1e-12) -> bool:
        return (
            self.shape == other.shape
            and np.allclose(self.basis, other.basis, rtol=rtol, atol=0)
            and np.allclose(self.origin, other.origin, rtol=rtol, atol=1e-15)
        )

    def to_dict(self) -> dict:
        d = {"samples": list(self.shape)}
        if self.is_rectangular and np.all(self.step > 0):
            d["half_extent"] = self.half_extent.tolist()
        else:
            d["basis"] = self.basis.tolist()
        if np.any(self.origin != 0):
            d["origin"] = self.origin.tolist()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Grid":
        unknown = set(d) - {"samples", "half_extent", "basis", "origin"}
        if unknown:
            raise ValueError(f"unknown grid keys {sorted(unknown)}")
        samples = list(d["samples"])
        if "basis" in d:
            g = cls(tuple(samples), np.asarray(d["basis"], dtype=float))
        else:
            g = cls.box(samples, d["half_extent"])
        if "origin" in d:
            g = g.with_origin(d["origin"])
        return g


def box_grid(samples, half_extent, ndim: int | None = None) -> Grid:
    """Centered box grid; scalars are broadcast to ``ndim`` axes."""
    if ndim is not None:
        samples = np.broadcast_to(samples, (ndim,))
        half_extent = np.broadcast_to(half_extent, (ndim,))
    return Grid.box(samples, half_extent)


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Complex samples on a grid; ``values`` has shape ``grid.shape``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            if v.size == self.grid.size:
                v = v.reshape(self.grid.shape)
            else:
                raise DimensionMismatch(f"{v.size} values for grid of {self.grid.size} points")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal samples must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def ndim(self) -> int:
        return self.grid.ndim

    def norm(self) -> float:
        return lp_norm(self, 2)

    def to_dict(self) -> dict:
        flat = self.values.ravel()
        return {"grid": self.grid.to_dict(), "re": flat.real.tolist(), "im": flat.imag.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SampledSignal":
        unknown = set(d) - {"grid", "re", "im"}
        if unknown:
            raise ValueError(f"unknown signal keys {sorted(unknown)}")
        grid = Grid.from_dict(d["grid"])
        values = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
        return cls(grid, values)


@dataclass(frozen=True)
class GaussianChirp:
    """Closed-form test signal with a Gaussian envelope and radial chirp.

    ``f(x) = π^{-N/4} (∏ζ)^{-1/4} exp(-Σ x_k²/(2ζ_k)) exp(2πi(|x|²/(2ε) + β))``.
    ``epsilon = inf`` gives the unchirped Gaussian.
    """

    zeta: tuple
    epsilon: float = math.inf
    beta: float = 0.0

    def __post_init__(self):
        z = tuple(float(v) for v in np.atleast_1d(self.zeta))
        if not z or any(not (v > 0 and math.isfinite(v)) for v in z):
            raise ValueError("zeta entries must be positive and finite")
        eps = float(self.epsilon)
        if eps == 0 or math.isnan(eps):
            raise ValueError("epsilon must be nonzero")
        object.__setattr__(self, "zeta", z)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def ndim(self) -> int:
        return len(self.zeta)

    @property
    def chirp_rate(self) -> float:
        """``1/ε``; zero for the unchirped case."""
        return 0.0 if math.isinf(self.epsilon) else 1.0 / self.epsilon

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at coordinates ``x`` of shape ``(N, ...)``."""
        z = np.asarray(self.zeta).reshape((-1,) + (1,) * (x.ndim - 1))
        amp = math.pi ** (-self.ndim / 4) * float(np.prod(self.zeta)) ** -0.25
        env = np.exp(-np.sum(x**2 / (2 * z), axis=0))
        phase = np.sum(x**2, axis=0) * (self.chirp_rate / 2) + self.beta
        return amp * env * np.exp(2j * np.pi * phase)

    def tail_mass(self, grid: Grid) -> float:
        """Mass of ``|f|²`` outside a rectangular grid box."""
        inside = 1.0
        for z, lo, hi in zip(self.zeta, *_box_bounds(grid)):
            inside *= 0.5 * (erf(hi / math.sqrt(z)) - erf(lo / math.sqrt(z)))
        return max(0.0, 1.0 - inside)

    def to_dict(self) -> dict:
        eps = self.epsilon if math.isfinite(self.epsilon) else None
        return {"zeta": list(self.zeta), "epsilon": eps, "beta": self.beta}

    @classmethod
    def from_dict(cls, d: Mapping) -> "GaussianChirp":
        unknown = set(d) - {"zeta", "epsilon", "beta"}
        if unknown:
            raise ValueError(f"unknown chirp keys {sorted(unknown)}")
        eps = d.get("epsilon")
        return cls(tuple(d["zeta"]), math.inf if eps is None else float(eps), float(d.get("beta", 0.0)))


def _box_bounds(grid: Grid):
    if not grid.is_rectangular:
        raise ValueError("box bounds need a rectangular grid")
    step = np.abs(grid.step)
    n = np.asarray(grid.shape)
    lo = grid.origin - step * (n // 2) - step / 2
    hi = grid.origin + step * (n - 1 - n // 2) + step / 2
    return lo, hi


def sample_gaussian_chirp(g: GaussianChirp, grid: Grid, max_tail: float = 1e-8) -> SampledSignal:
    """Sample ``g`` on ``grid``.

    Raises
    ------
    GridTooSmall
        If the box misses more than ``max_tail`` of the mass of ``|f|²``
        (checked on rectangular grids).
    """
    if grid.ndim != g.ndim:
        raise DimensionMismatch(f"grid has {grid.ndim} axes, chirp has {g.ndim}")
    if grid.is_rectangular:
        tail = g.tail_mass(grid)
        if tail > max_tail:
            raise GridTooSmall(f"box misses {tail:.2e} of the signal mass (limit {max_tail:.0e})")
    return SampledSignal(grid, g(grid.coords()))


def normalize(f: SampledSignal) -> SampledSignal:
    """Rescale to unit quadrature L² norm."""
    nrm = lp_norm(f, 2)
    if nrm == 0 or not math.isfinite(nrm):
        raise ZeroSignal("cannot normalize a zero signal")
    return SampledSignal(f.grid, f.values / nrm)


def lp_norm(f: SampledSignal, p: float = 2.0) -> float:
    """Quadrature ``(Σ |f|^p |det T|)^{1/p}``."""
    return weighted_lp(f, None, p)


def weighted_lp(f: SampledSignal, weight=None, p: float = 2.0) -> float:
    """Weighted Lᵖ norm ``(Σ |w(x) f(x)|^p |det T|)^{1/p}``.

    Parameters
    ----------
    weight : None, "norm" or int
        ``None`` for no weight, ``"norm"`` for the Euclidean ``|x|``, an
        integer ``j`` for ``|x_j|``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    a = np.abs(f.values)
    if weight is not None:
        x = f.grid.coords()
        if weight == "norm":
            a = a * np.sqrt(np.sum(x**2, axis=0))
        else:
            a = a * np.abs(x[int(weight)])
    return float(np.sum(a**p) * f.grid.cell_volume) ** (1.0 / p)


def _index_derivative_spectral(v: np.ndarray, axis: int) -> np.ndarray:
    n = v.shape[axis]
    nu = np.fft.fftfreq(n)
    if n % 2 == 0:
        nu[n // 2] = 0.0
    shape = [1] * v.ndim
    shape[axis] = n
    return np.fft.ifft(2j * np.pi * nu.reshape(shape) * np.fft.fft(v, axis=axis), axis=axis)


def _index_derivative_central(v: np.ndarray, axis: int) -> np.ndarray:
    if v.shape[axis] < 3:
        raise ValueError("central differences need at least 3 samples per axis")
    return np.gradient(v, axis=axis, edge_order=1)


def gradient(f: SampledSignal, method: str = "central") -> np.ndarray:
    """Gradient of the samples, shape ``(N, *shape)``.

    Parameters
    ----------
    method : {"central", "spectral"}
        ``central``: second-order central differences in the interior and
        first-order one-sided differences at the boundary.  ``spectral``:
        FFT differentiation, exact for band-limited samples that decay at
        the box edges.
    """
    deriv = {"central": _index_derivative_central, "spectral": _index_derivative_spectral}[method]
    v = f.values
    dk = np.stack([deriv(v, a) for a in range(f.ndim)])
    # x = T k  =>  grad_x = T^{-T} grad_k
    tinv_t = np.linalg.inv(f.grid.basis).T
    return np.tensordot(tinv_t, dk, axes=(1, 0))


@dataclass(frozen=True, eq=False)
class PolarField:
    """Magnitude, phase gradient and support mask of ``f = |f| e^{2πiφ}``."""

    magnitude: np.ndarray
    phase_gradient: np.ndarray
    support_mask: np.ndarray
    masked_mass: float


def polar_decompose(f: SampledSignal, floor: float | None = None, method: str = "spectral") -> PolarField:
    """Polar decomposition with ``∇φ = Im(f̄ ∇f) / (2π|f|²)``, no unwrapping.

    Parameters
    ----------
    floor : float, optional
        Magnitude floor for the support mask; default ``1e-8 * max|f|``.
    method : {"spectral", "central"}
        Differentiation scheme passed to :func:`gradient`.  Spectral is the
        default because central differences carry an O((k h)²) relative
        error on chirps with local frequency k.
    """
    mag = np.abs(f.values)
    if floor is None:
        floor = 1e-8 * float(mag.max())
    mask = mag >= floor
    grad = gradient(f, method)
    num = np.imag(np.conj(f.values)[None] * grad)
    den = 2 * np.pi * np.where(mask, mag**2, 1.0)
    phi_grad = np.where(mask[None], num / den[None], 0.0)
    total = float(np.sum(mag**2))
    omitted = float(np.sum(mag[~mask] ** 2)) / total if total > 0 else 0.0
    return PolarField(mag, phi_grad, mask, omitted)


def signal_means(f: SampledSignal):
    """``(⟨x⟩_f, ⟨w⟩_f̂)`` from the samples and their FFT."""
    from .transform import fourier_samples

    rho = np.abs(f.values) ** 2
    x = f.grid.coords()
    mean_x = np.tensordot(x, rho, axes=f.ndim) / rho.sum()
    fh = fourier_samples(f)
    rho_w = np.abs(fh.values) ** 2
    w = fh.grid.coords()
    mean_w = np.tensordot(w, rho_w, axes=fh.ndim) / rho_w.sum()
    return mean_x, mean_w


def recenter(f: SampledSignal):
    """Shift coordinates and demodulate so that ``⟨x⟩ = ⟨w⟩ = 0``.

    The position mean is removed by moving the grid origin (samples are not
    resampled); the frequency mean by the linear phase ``e^{-2πi⟨w⟩·x}``.

    Returns
    -------
    SampledSignal, dict
        The centered signal and ``{"shift_x": ..., "shift_w": ...}``.
    """
    mean_x, mean_w = signal_means(f)
    grid = f.grid.with_origin(f.grid.origin - mean_x)
    x = grid.coords()
    phase = np.exp(-2j * np.pi * np.tensordot(mean_w, x, axes=(0, 0)))
    out = SampledSignal(grid, f.values * phase)
    return out, {"shift_x": mean_x.tolist(), "shift_w": mean_w.tolist()}
