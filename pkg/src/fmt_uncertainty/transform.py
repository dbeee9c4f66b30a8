"""Free metaplectic transformation of sampled signals and the Wigner function.

For a free symplectic matrix the transform factors as
``L_M f(u) = c · e^{πi uᵀDB⁻¹u} · ĝ(B⁻¹u)`` with ``g(x) = f(x) e^{πi xᵀB⁻¹Ax}``,
``c = 1 / (i^{N/2} √det B)`` and ``ĝ(w) = ∫ g(x) e^{-2πi xᵀw} dx``.

The fast path evaluates ``ĝ`` by an FFT on the conjugate lattice of the
input grid; the output lattice is ``B`` times that lattice, so every output
sample is an exact Riemann sum and no interpolation is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.signal import resample

from .errors import DimensionMismatch, NyquistViolated, TooLarge
from .grid import Grid, SampledSignal
from .symplectic import FreeSympMatrix, make_free

__all__ = [
    "FmtPlan",
    "plan_fmt",
    "fmt_apply",
    "fmt_direct",
    "fmt_gradient",
    "fourier_samples",
    "band_edge_fraction",
    "WignerResult",
    "wigner",
    "wigner_moments",
]

DIRECT_MAX_PAIRS = 2**26
EDGE_BINS = 2


def _phase_constant(m: FreeSympMatrix) -> complex:
    # 1 / (i^{N/2} sqrt(det B)), principal branches
    return 1.0 / (np.exp(1j * np.pi * m.n / 4) * np.sqrt(complex(m.det_b)))


def _quadratic(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``xᵀSx`` for coordinates of shape ``(N, ...)``."""
    return np.einsum("i...,ij,j...->...", x, s, x)


@dataclass(frozen=True, eq=False)
class FmtPlan:
    """Immutable description of one transform evaluation.

    Attributes
    ----------
    matrix : FreeSympMatrix
    in_grid, out_grid : Grid
    path : {"fft", "direct_dft"}
        ``fft`` when ``out_grid`` is the natural lattice ``B·(conjugate of
        in_grid)``, possibly with some axes reversed; ``direct_dft``
        evaluates the sum at arbitrary points.
    oversample : int
        Zero-padding factor of the FFT (refines the output lattice).
    nyquist_tol : float
        Largest admissible fraction of chirped-spectrum energy in the
        outermost frequency bins of each axis.
    """

    matrix: FreeSympMatrix
    in_grid: Grid
    out_grid: Grid
    path: str
    oversample: int = 1
    nyquist_tol: float = 1e-4
    flipped_axes: tuple = ()

    @property
    def constant(self) -> complex:
        return _phase_constant(self.matrix)


def natural_out_grid(m: FreeSympMatrix, in_grid: Grid, oversample: int = 1) -> Grid:
    """Output lattice ``B · conjugate(in_grid)``."""
    conj = in_grid.conjugate(oversample)
    return Grid(conj.shape, m.B @ conj.basis)


def plan_fmt(m, in_grid: Grid, out_grid: Grid | None = None, oversample: int = 1,
             nyquist_tol: float = 1e-4) -> FmtPlan:
    """Build a transform plan.

    Parameters
    ----------
    m : FreeSympMatrix or SympMatrix or array
        Transform matrix; must be free.
    in_grid : Grid
        Grid the input signal lives on.
    out_grid : Grid, optional
        Requested output points.  Default is the natural output lattice,
        which is evaluated by FFT.
    oversample : int
        FFT zero-padding factor for the natural lattice.
    """
    m = make_free(m)
    if in_grid.ndim != m.n:
        raise DimensionMismatch(f"matrix is {2 * m.n}x{2 * m.n}, grid has {in_grid.ndim} axes")
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    natural = natural_out_grid(m, in_grid, oversample)
    if out_grid is None or out_grid.same_as(natural):
        return FmtPlan(m, in_grid, natural, "fft", oversample, nyquist_tol)
    if out_grid.ndim != m.n:
        raise DimensionMismatch("out_grid dimension does not match the matrix")
    flips = _reversed_axes(out_grid, natural)
    if flips is not None:
        return FmtPlan(m, in_grid, out_grid, "fft", oversample, nyquist_tol, flips)
    return FmtPlan(m, in_grid, out_grid, "direct_dft", 1, nyquist_tol)


def _reversed_axes(grid: Grid, natural: Grid, rtol: float = 1e-12):
    """Axes along which ``grid`` is ``natural`` reversed, or None if it is another lattice.

    The inverse transform maps back onto the input grid this way, e.g. when
    ``B⁻¹`` flips the sign of ``B``.
    """
    if grid.shape != natural.shape or np.any(grid.origin != 0):
        return None
    signs = np.sign(np.sum(grid.basis * natural.basis, axis=0))
    if np.any(signs == 0) or not np.allclose(grid.basis, natural.basis * signs, rtol=rtol, atol=0):
        return None
    return tuple(int(j) for j in np.flatnonzero(signs < 0))


def _reverse_lattice(a: np.ndarray, axes, offset: int = 0) -> np.ndarray:
    """Re-index centered samples ``k -> -k`` (mod n) along ``axes``.

    The discrete sum is periodic in each frequency index, so the sample at
    ``-n/2`` is also the one at ``+n/2``.
    """
    for j in axes:
        a = np.roll(np.flip(a, axis=offset + j), 1, axis=offset + j)
    return a


def _spectrum_lattice(plan: FmtPlan, conj: Grid) -> Grid:
    if not plan.flipped_axes:
        return conj
    signs = np.ones(conj.ndim)
    signs[list(plan.flipped_axes)] = -1
    return Grid(conj.shape, conj.basis * signs)


def _centered_fft(g: np.ndarray, shape) -> np.ndarray:
    """FFT of samples indexed by centered offsets, zero-padded to ``shape``."""
    if tuple(shape) != g.shape:
        pad = [((s - n) // 2, s - n - (s - n) // 2) for s, n in zip(shape, g.shape)]
        g = np.pad(g, pad)
    return sfft.fftshift(sfft.fftn(sfft.ifftshift(g)))


def band_edge_fraction(spectrum: np.ndarray, bins: int = EDGE_BINS) -> np.ndarray:
    """Per-axis fraction of ``|spectrum|²`` in the outermost ``bins`` bins."""
    p = np.abs(spectrum) ** 2
    total = p.sum()
    out = []
    for ax in range(p.ndim):
        q = np.moveaxis(p, ax, 0)
        out.append((q[:bins].sum() + q[-bins:].sum()) / total if total > 0 else 0.0)
    return np.asarray(out)


def _check_band(spectrum: np.ndarray, tol: float) -> None:
    frac = band_edge_fraction(spectrum)
    worst = int(np.argmax(frac))
    if frac[worst] > tol:
        raise NyquistViolated(worst, frac[worst], tol)


def _chirped_input(m: FreeSympMatrix, f: SampledSignal) -> np.ndarray:
    x = f.grid.coords()
    return f.values * np.exp(1j * np.pi * _quadratic(x, m.input_chirp))


def _dense_fourier(g: np.ndarray, grid: Grid, w: np.ndarray, chunk_elems: int = 2**22) -> np.ndarray:
    """``|det T| Σ_x g(x) e^{-2πi xᵀw}`` at frequencies ``w`` of shape (P, N)."""
    x = grid.points()
    gv = g.ravel()
    q = x.shape[0]
    if w.shape[0] * q > DIRECT_MAX_PAIRS * 4:
        raise TooLarge(f"dense DFT of {w.shape[0]} x {q} points exceeds the size guard")
    out = np.empty(w.shape[0], dtype=complex)
    step = max(1, chunk_elems // q)
    for s in range(0, w.shape[0], step):
        ph = w[s : s + step] @ x.T
        out[s : s + step] = np.exp(-2j * np.pi * ph) @ gv
    return out * grid.cell_volume


def fmt_apply(plan: FmtPlan, f: SampledSignal) -> SampledSignal:
    """Apply the transform described by ``plan`` to ``f``.

    Raises
    ------
    NyquistViolated
        If the chirped input ``g`` carries more than ``plan.nyquist_tol`` of
        its spectral energy in the outermost bins of some axis.
    """
    if not f.grid.same_as(plan.in_grid):
        raise DimensionMismatch("signal is not sampled on the plan's input grid")
    m = plan.matrix
    g = _chirped_input(m, f)
    spec = _centered_fft(g, g.shape)
    _check_band(spec, plan.nyquist_tol)
    conj = f.grid.conjugate(plan.oversample)
    if plan.path == "fft":
        if plan.oversample > 1:
            spec = _centered_fft(g, conj.shape)
        w = _spectrum_lattice(plan, conj).coords()
        ghat = _reverse_lattice(spec, plan.flipped_axes) * f.grid.cell_volume
        if np.any(f.grid.origin != 0):
            ghat = ghat * np.exp(-2j * np.pi * np.tensordot(f.grid.origin, w, axes=(0, 0)))
        u = plan.out_grid.coords()
    else:
        u_pts = plan.out_grid.points()
        w_pts = u_pts @ m.b_inverse.T
        # frequencies outside the resolvable cell are zero for a band-limited g
        nu = w_pts @ f.grid.basis
        inside = np.all(np.abs(nu) <= 0.5, axis=1)
        vals = np.zeros(w_pts.shape[0], dtype=complex)
        vals[inside] = _dense_fourier(g, f.grid, w_pts[inside])
        ghat = vals.reshape(plan.out_grid.shape)
        u = plan.out_grid.coords()
    out = plan.constant * np.exp(1j * np.pi * _quadratic(u, m.output_chirp)) * ghat
    return SampledSignal(plan.out_grid, out)


def fmt_gradient(plan: FmtPlan, f: SampledSignal) -> np.ndarray:
    """Exact gradient ``∇_u L_M f`` on the plan's natural lattice.

    Differentiating the chirp–Fourier factorization gives
    ``∇L = 2πi DB⁻¹u · L + c e^{πi uᵀDB⁻¹u} B⁻ᵀ F[-2πi x g](B⁻¹u)``, so the
    derivative is obtained from N additional FFTs instead of finite
    differences of an oscillating output.
    """
    if plan.path != "fft":
        raise ValueError("fmt_gradient needs the natural (fft) output lattice")
    m = plan.matrix
    lf = fmt_apply(plan, f)
    g = _chirped_input(m, f)
    x = f.grid.coords()
    conj = f.grid.conjugate(plan.oversample)
    w = _spectrum_lattice(plan, conj).coords()
    shift = 1.0
    if np.any(f.grid.origin != 0):
        shift = np.exp(-2j * np.pi * np.tensordot(f.grid.origin, w, axes=(0, 0)))
    dghat = np.stack([
        _reverse_lattice(_centered_fft(-2j * np.pi * x[j] * g, conj.shape), plan.flipped_axes)
        * f.grid.cell_volume * shift
        for j in range(m.n)
    ])
    u = plan.out_grid.coords()
    chirp = plan.constant * np.exp(1j * np.pi * _quadratic(u, m.output_chirp))
    term2 = np.tensordot(m.b_inverse.T, dghat, axes=(1, 0)) * chirp[None]
    pu = np.tensordot(m.output_chirp, u, axes=(1, 0))
    return 2j * np.pi * pu * lf.values[None] + term2


def fourier_samples(f: SampledSignal, oversample: int = 1) -> SampledSignal:
    """``f̂(w) = ∫ f e^{-2πi x·w} dx`` on the conjugate lattice (no phase constant)."""
    conj = f.grid.conjugate(oversample)
    spec = _centered_fft(f.values, conj.shape) * f.grid.cell_volume
    if np.any(f.grid.origin != 0):
        spec = spec * np.exp(-2j * np.pi * np.tensordot(f.grid.origin, conj.coords(), axes=(0, 0)))
    return SampledSignal(conj, spec)


def fmt_direct(m, f: SampledSignal, out_grid: Grid | None = None, nyquist_tol: float = 1e-4) -> SampledSignal:
    """Riemann-sum evaluation of the defining integral; the oracle.

    ``L_M f(u) = c ∫ f(x) e^{πi(uᵀDB⁻¹u + xᵀB⁻¹Ax) - 2πi xᵀB⁻¹u} dx``

    Cost is O(points_in x points_out); guarded by :class:`TooLarge`.
    """
    m = make_free(m)
    if out_grid is None:
        out_grid = natural_out_grid(m, f.grid)
    n_in, n_out = f.grid.size, out_grid.size
    if n_in * n_out > DIRECT_MAX_PAIRS:
        raise TooLarge(f"direct evaluation of {n_out} x {n_in} points exceeds {DIRECT_MAX_PAIRS}")
    x = f.grid.points()
    u = out_grid.points()
    p_out = m.D @ m.b_inverse
    s_in = m.b_inverse @ m.A
    # band check on the chirped integrand, same criterion as the fast path
    g = f.values.ravel() * np.exp(1j * np.pi * np.einsum("qi,ij,qj->q", x, s_in, x))
    _check_band(_centered_fft(g.reshape(f.grid.shape), f.grid.shape), nyquist_tol)
    c = 1.0 / (np.exp(1j * np.pi * m.n / 4) * np.sqrt(complex(np.linalg.det(m.B))))
    out = np.empty(n_out, dtype=complex)
    step = max(1, 2**22 // n_in)
    for s in range(0, n_out, step):
        uu = u[s : s + step]
        kern = np.exp(
            1j * np.pi * np.einsum("pi,ij,pj->p", uu, p_out, uu)[:, None]
            - 2j * np.pi * (uu @ m.b_inverse.T) @ x.T
        )
        out[s : s + step] = kern @ g
    return SampledSignal(out_grid, c * out * f.grid.cell_volume)


@dataclass(frozen=True, eq=False)
class WignerResult:
    """Wigner function samples ``values[x..., w...]`` with their grids."""

    values: np.ndarray
    x_grid: Grid
    w_grid: Grid
    imag_residue: float


def _wigner_setup(f: SampledSignal):
    if f.ndim > 2:
        raise TooLarge("Wigner function is limited to N <= 2")
    if not f.grid.is_rectangular:
        raise ValueError("Wigner function needs a rectangular grid")
    v = f.values
    for ax in range(f.ndim):
        v = resample(v, 2 * v.shape[ax], axis=ax)
    h = f.grid.step
    n = np.asarray(f.grid.shape)
    w_grid = Grid.box(2 * n, 1.0 / (2 * np.abs(h)))
    return v, h, n, w_grid


class _LagTable:
    """Flat-index gathers for ``f(x + y/2) conj(f(x - y/2))``.

    The half-step signal is zero-padded by ``n`` on every side so that all
    lags ``y = m h`` with ``m`` in ``[-n, n)`` stay in range.  Lags are
    stored in FFT order and multiplied by ``(-1)^m`` so that a plain FFT
    returns frequencies ``(l - n) / (2 n h)`` in increasing order.
    """

    def __init__(self, fine: np.ndarray, n):
        self.n = tuple(int(k) for k in n)
        nd = len(self.n)
        self.padded = np.pad(fine, [(k, k) for k in self.n]).ravel()
        pshape = tuple(4 * k for k in self.n)
        strides = np.array([int(np.prod(pshape[a + 1 :])) for a in range(nd)])
        lag_axes = [np.fft.ifftshift(np.arange(-k, k)) for k in self.n]
        mesh = np.meshgrid(*lag_axes, indexing="ij")
        self.offsets = sum(m.ravel() * st for m, st in zip(mesh, strides))
        self.sign = np.where(sum(m.ravel() for m in mesh) % 2 == 0, 1.0, -1.0)
        self.strides = strides
        self.lag_shape = tuple(2 * k for k in self.n)

    def rows(self, idx: np.ndarray) -> np.ndarray:
        base = (2 * idx + np.asarray(self.n)) @ self.strides
        plus = self.padded[base[:, None] + self.offsets[None]]
        minus = self.padded[base[:, None] - self.offsets[None]]
        r = plus * np.conj(minus) * self.sign[None]
        return r.reshape((idx.shape[0],) + self.lag_shape)


def _wigner_rows(f: SampledSignal, chunk_elems: int = 2**21):
    """Yield ``(first flat x index, W rows)`` chunks on the natural w grid."""
    fine, h, n, w_grid = _wigner_setup(f)
    nd = f.ndim
    table = _LagTable(fine, n)
    idx_all = np.stack(np.unravel_index(np.arange(f.grid.size), f.grid.shape), axis=1)
    lag_size = int(np.prod(2 * n))
    step = max(1, chunk_elems // lag_size)
    dy = float(np.prod(np.abs(h)))
    axes = tuple(range(1, nd + 1))
    for s in range(0, f.grid.size, step):
        wr = sfft.fftn(table.rows(idx_all[s : s + step]), axes=axes) * dy
        if np.any(h < 0):
            wr = np.flip(wr, axis=tuple(1 + a for a in range(nd) if h[a] < 0))
        yield s, wr


def wigner(f: SampledSignal, w_grid: Grid | None = None, max_elems: int = 2**26) -> WignerResult:
    """Wigner function ``∫ f(x+y/2) conj(f(x-y/2)) e^{-2πi w·y} dy``.

    The signal is first interpolated to half steps (band-limited FFT
    resampling) so that lags ``y`` fall on the grid; the lag integral is one
    FFT per x point.  The natural w grid has twice as many points per axis
    as the x grid and covers the band ``[-1/(2h), 1/(2h))``.  A custom
    ``w_grid`` is evaluated by a dense sum over lags.
    """
    fine, h, n, natural = _wigner_setup(f)
    wg = natural if w_grid is None else w_grid
    total = f.grid.size * wg.size
    if total > max_elems:
        raise TooLarge(f"Wigner array of {total} entries exceeds {max_elems}")
    out = np.empty((f.grid.size, wg.size), dtype=complex)
    if w_grid is None or w_grid.same_as(natural):
        for s, wr in _wigner_rows(f):
            out[s : s + wr.shape[0]] = wr.reshape(wr.shape[0], -1)
    else:
        nd = f.ndim
        table = _LagTable(fine, n)
        lags = np.stack(np.meshgrid(*[np.fft.ifftshift(np.arange(-k, k)) for k in n], indexing="ij")).reshape(nd, -1)
        y = (lags * h[:, None]).T
        kern = np.exp(-2j * np.pi * y @ wg.points().T) * float(np.prod(np.abs(h)))
        kern *= table.sign[:, None]
        idx_all = np.stack(np.unravel_index(np.arange(f.grid.size), f.grid.shape), axis=1)
        step = max(1, 2**20 // y.shape[0])
        for s in range(0, f.grid.size, step):
            r = table.rows(idx_all[s : s + step]).reshape(-1, y.shape[0])
            out[s : s + step] = r @ kern
    scale = np.max(np.abs(out)) or 1.0
    resid = float(np.max(np.abs(out.imag)) / scale)
    vals = out.real.reshape(f.grid.shape + wg.shape)
    return WignerResult(vals, f.grid, wg, resid)


@dataclass(frozen=True, eq=False)
class WignerMoments:
    """Marginals and second moments accumulated from Wigner rows."""

    x_marginal: np.ndarray
    w_marginal: np.ndarray
    w_grid: Grid
    sigma: np.ndarray
    total: float
    weighted_total: float
    imag_residue: float


def wigner_moments(f: SampledSignal) -> WignerMoments:
    """Stream the Wigner function and accumulate marginals and ``Σ``.

    ``Σ_{αβ} = ∫ z_α z_β W(z) dz`` with ``z = (x, w)``; also returns
    ``∫ W`` and ``∫ (1 + |z|²) W``.  Memory stays at one chunk of rows.
    """
    _, h, n, w_grid = _wigner_setup(f)
    nd = f.ndim
    x = f.grid.points()
    w = w_grid.points()
    dx = f.grid.cell_volume
    dw = w_grid.cell_volume
    x_marg = np.zeros(f.grid.size)
    w_marg = np.zeros(w_grid.size)
    xw = np.zeros((nd, nd))
    imag_max = 0.0
    abs_max = 0.0
    for s, wr in _wigner_rows(f):
        rows = wr.reshape(wr.shape[0], -1)
        imag_max = max(imag_max, float(np.max(np.abs(rows.imag))))
        abs_max = max(abs_max, float(np.max(np.abs(rows))))
        rows = rows.real
        xs = x[s : s + rows.shape[0]]
        x_marg[s : s + rows.shape[0]] = rows.sum(axis=1) * dw
        w_marg += rows.sum(axis=0) * dx
        xw += xs.T @ (rows @ w) * dx * dw
    sxx = (x.T * x_marg) @ x * dx
    sww = (w.T * w_marg) @ w * dw
    sigma = np.block([[sxx, xw], [xw.T, sww]])
    total = float(x_marg.sum() * dx)
    weighted = total + float(np.trace(sxx) + np.trace(sww))
    return WignerMoments(
        x_marg.reshape(f.grid.shape),
        w_marg.reshape(w_grid.shape),
        w_grid,
        sigma,
        total,
        weighted,
        imag_max / (abs_max or 1.0),
    )
