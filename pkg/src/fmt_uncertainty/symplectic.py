"""Symplectic matrices, free symplectic matrices and special constructors.

A real 2N x 2N matrix ``M = [[A, B], [C, D]]`` is symplectic when
``M.T @ J @ M == J`` with ``J = [[0, I], [-I, 0]]``.  It is *free* when the
block ``B`` is invertible; free matrices parameterize the free metaplectic
transformation implemented in :mod:`fmt_uncertainty.transform`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateParameter,
    DimensionMismatch,
    DimensionOdd,
    NotSymplectic,
    SingularB,
)

SYMPLECTIC_TOL = 1e-10


def standard_j(n: int) -> np.ndarray:
    """Return the standard symplectic matrix ``[[0, I], [-I, 0]]`` of size 2n."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def from_blocks(a, b, c, d) -> np.ndarray:
    """Assemble a 2N x 2N array from four N x N blocks."""
    a, b, c, d = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (a, b, c, d))
    shapes = {x.shape for x in (a, b, c, d)}
    if len(shapes) != 1 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"blocks must be equal square matrices, got {sorted(shapes)}")
    return np.block([[a, b], [c, d]])


def symplectic_residual(m: np.ndarray) -> float:
    """Relative max-norm residual of both ``MᵀJM = J`` and ``MJMᵀ = J``.

    The absolute residual is divided by ``max(1, ‖M‖_max²)`` so that the
    tolerance is insensitive to the overall scale of the entries.
    """
    n = m.shape[0] // 2
    j = standard_j(n)
    r = max(np.max(np.abs(m.T @ j @ m - j)), np.max(np.abs(m @ j @ m.T - j)))
    return float(r / max(1.0, np.max(np.abs(m)) ** 2))


@dataclass(frozen=True, eq=False)
class SympMatrix:
    """Validated real symplectic matrix with block views.

    Use :func:`validate_symplectic` to construct one.  ``entries`` is stored
    read-only; ``A``, ``B``, ``C``, ``D`` are views into it.
    """

    entries: np.ndarray
    residual: float = 0.0
    name: str | None = None

    @property
    def n(self) -> int:
        return self.entries.shape[0] // 2

    @property
    def A(self) -> np.ndarray:
        return self.entries[: self.n, : self.n]

    @property
    def B(self) -> np.ndarray:
        return self.entries[: self.n, self.n :]

    @property
    def C(self) -> np.ndarray:
        return self.entries[self.n :, : self.n]

    @property
    def D(self) -> np.ndarray:
        return self.entries[self.n :, self.n :]

    def __repr__(self) -> str:
        label = self.name or "SympMatrix"
        return f"{label}(n={self.n})"

    def to_dict(self) -> dict:
        return matrix_to_dict(self)


def validate_symplectic(m, tol: float = SYMPLECTIC_TOL, name: str | None = None) -> SympMatrix:
    """Check that ``m`` is symplectic and wrap it.

    Parameters
    ----------
    m : array_like, shape (2N, 2N)
        Candidate matrix.
    tol : float
        Tolerance on :func:`symplectic_residual`.
    name : str, optional
        Label carried into error messages and reports.

    Returns
    -------
    SympMatrix

    Raises
    ------
    DimensionOdd
        If ``m`` is not square with even size.
    NotSymplectic
        If the residual exceeds ``tol``.
    """
    if isinstance(m, SympMatrix):
        m = m.entries
    if isinstance(m, FreeSympMatrix):
        m = m.entries
    arr = np.array(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] % 2 or arr.shape[0] == 0:
        raise DimensionOdd(f"expected a 2N x 2N matrix, got shape {arr.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.all(np.isfinite(arr)):
        raise NotSymplectic(np.inf, tol, name)
    res = symplectic_residual(arr)
    if res > tol:
        raise NotSymplectic(res, tol, name)
    arr.setflags(write=False)
    return SympMatrix(arr, res, name)


@dataclass(frozen=True, eq=False)
class FreeSympMatrix:
    """Symplectic matrix with invertible ``B`` and cached ``B⁻¹``."""

    base: SympMatrix
    b_inverse: np.ndarray
    abs_det_b: float
    det_b: float

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def entries(self) -> np.ndarray:
        return self.base.entries

    @property
    def name(self) -> str | None:
        return self.base.name

    A = property(lambda self: self.base.A)
    B = property(lambda self: self.base.B)
    C = property(lambda self: self.base.C)
    D = property(lambda self: self.base.D)

    @property
    def input_chirp(self) -> np.ndarray:
        """Symmetrized ``B⁻¹A`` (coefficient of the input chirp)."""
        s = self.b_inverse @ self.A
        return 0.5 * (s + s.T)

    @property
    def output_chirp(self) -> np.ndarray:
        """Symmetrized ``DB⁻¹`` (coefficient of the output chirp)."""
        s = self.D @ self.b_inverse
        return 0.5 * (s + s.T)

    def __repr__(self) -> str:
        label = self.name or "FreeSympMatrix"
        return f"{label}(n={self.n}, free)"

    def to_dict(self) -> dict:
        return matrix_to_dict(self)


def make_free(m, tol: float = SYMPLECTIC_TOL) -> FreeSympMatrix:
    """Promote a symplectic matrix to a free one.

    Raises
    ------
    SingularB
        If ``|det B| <= tol``.
    NotSymplectic
        If ``DB⁻¹`` or ``B⁻¹A`` is not symmetric to tolerance.
    """
    if isinstance(m, FreeSympMatrix):
        return m
    if not isinstance(m, SympMatrix):
        m = validate_symplectic(m, tol)
    det_b = float(np.linalg.det(m.B))
    if abs(det_b) <= tol:
        raise SingularB(f"|det B| = {abs(det_b):.3e} <= {tol:.1e}; matrix is not free")
    b_inv = np.linalg.inv(m.B)
    scale = max(1.0, np.max(np.abs(m.entries))) ** 2 * max(1.0, np.max(np.abs(b_inv)))
    for s in (m.D @ b_inv, b_inv @ m.A):
        asym = np.max(np.abs(s - s.T))
        if asym > tol * scale:
            raise NotSymplectic(asym / scale, tol, m.name)
    b_inv.setflags(write=False)
    return FreeSympMatrix(m, b_inv, abs(det_b), det_b)


def as_symp(m) -> SympMatrix:
    """Accept a SympMatrix, FreeSympMatrix or array and return a SympMatrix."""
    if isinstance(m, FreeSympMatrix):
        return m.base
    if isinstance(m, SympMatrix):
        return m
    return validate_symplectic(m)


def inverse(m) -> SympMatrix:
    """Inverse via the block formula ``[[Dᵀ, -Bᵀ], [-Cᵀ, Aᵀ]]``."""
    m = as_symp(m)
    inv = from_blocks(m.D.T, -m.B.T, -m.C.T, m.A.T)
    name = f"inv({m.name})" if m.name else None
    return validate_symplectic(inv, name=name)


def compose(m1, m2) -> SympMatrix:
    """Matrix product ``M1 @ M2`` (the transform ``L_{M1} L_{M2}``)."""
    m1, m2 = as_symp(m1), as_symp(m2)
    if m1.n != m2.n:
        raise DimensionMismatch(f"cannot compose n={m1.n} with n={m2.n}")
    name = f"{m1.name}*{m2.name}" if m1.name and m2.name else None
    return validate_symplectic(m1.entries @ m2.entries, name=name)


def free_from_generating(p, b, q, name: str | None = None) -> FreeSympMatrix:
    """Free matrix with ``DB⁻¹ = P``, ``B⁻¹A = Q`` and the given ``B``.

    The blocks are ``A = BQ``, ``D = PB`` and ``C = PBQ - B⁻ᵀ``.
    """
    p, b, q = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (p, b, q))
    b_inv_t = np.linalg.inv(b).T
    m = from_blocks(b @ q, b, p @ b @ q - b_inv_t, p @ b)
    return make_free(validate_symplectic(m, name=name))


def random_free(n: int, seed: int, max_cond: float = 100.0, min_det: float = 0.1) -> FreeSympMatrix:
    """Seeded random free symplectic matrix.

    Symmetric ``P``, ``Q`` and a general ``B`` are drawn with entries uniform
    in [-1, 1]; draws with ``|det B| < min_det`` or ``cond(B) > max_cond``
    are rejected and redrawn.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    while True:
        p = rng.uniform(-1.0, 1.0, (n, n))
        q = rng.uniform(-1.0, 1.0, (n, n))
        b = rng.uniform(-1.0, 1.0, (n, n))
        if abs(np.linalg.det(b)) < min_det or np.linalg.cond(b) > max_cond:
            continue
        p = 0.5 * (p + p.T)
        q = 0.5 * (q + q.T)
        return free_from_generating(p, b, q, name=f"random({n},{seed})")


def _param_vector(values, n: int, what: str) -> np.ndarray:
    v = np.broadcast_to(np.asarray(values, dtype=float), (n,)) if np.ndim(values) == 0 else np.asarray(values, dtype=float)
    if v.shape != (n,):
        raise DegenerateParameter(f"{what} must have length {n}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DegenerateParameter(f"{what} must be finite")
    return np.array(v)


def special_matrix(kind: str, n: int, param: Sequence[float] | float | None = None) -> SympMatrix:
    """Special symplectic matrices: fourier, frft, fresnel and lorentz.

    Parameters
    ----------
    kind : {"fourier", "frft", "fresnel", "lorentz"}
    n : int
        Spatial dimension N.
    param : array_like, optional
        Angles for ``frft``/``lorentz`` or the Fresnel diagonal ``b``; a
        scalar is broadcast to all axes.

    Raises
    ------
    DegenerateParameter
        If the parameters give a singular ``B`` block.
    """
    kind = kind.lower()
    if kind == "fourier":
        return validate_symplectic(standard_j(n), name="fourier")
    if param is None:
        raise DegenerateParameter(f"{kind} needs a parameter vector")
    v = _param_vector(param, n, f"{kind} parameter")
    label = f"{kind}({','.join(f'{x:g}' for x in v)})"
    if kind == "frft":
        s, c = np.sin(v), np.cos(v)
        if np.any(np.abs(s) < 1e-12):
            raise DegenerateParameter("frft needs sin(theta_j) != 0 for every axis")
        m = from_blocks(np.diag(c), np.diag(s), -np.diag(s), np.diag(c))
    elif kind == "fresnel":
        if np.any(v == 0):
            raise DegenerateParameter("fresnel needs nonzero b_jj on every axis")
        eye = np.eye(n)
        m = from_blocks(eye, np.diag(v), np.zeros((n, n)), eye)
    elif kind == "lorentz":
        if np.any(v == 0):
            raise DegenerateParameter("lorentz needs nonzero theta_j on every axis")
        m = from_blocks(np.diag(np.cosh(v)), np.diag(np.sinh(v)), np.diag(np.sinh(v)), np.diag(np.cosh(v)))
    else:
        raise DegenerateParameter(f"unknown matrix kind {kind!r}")
    return validate_symplectic(m, name=label)


def matrix_to_dict(m) -> dict:
    """JSON-ready ``{"n": N, "blocks": {...}}``; floats round-trip exactly."""
    m = as_symp(m)
    out = {"n": m.n, "blocks": {k: getattr(m, k).tolist() for k in "ABCD"}}
    if m.name:
        out["name"] = m.name
    return out


def matrix_from_dict(d: Mapping, tol: float = SYMPLECTIC_TOL) -> SympMatrix:
    """Inverse of :func:`matrix_to_dict`; validates the result."""
    try:
        n = int(d["n"])
        blocks = d["blocks"]
        arr = from_blocks(*(blocks[k] for k in "ABCD"))
    except (KeyError, TypeError) as exc:
        raise DimensionMismatch(f"malformed matrix object: {exc}") from exc
    if arr.shape != (2 * n, 2 * n):
        raise DimensionMismatch(f"blocks do not match n={n}")
    return validate_symplectic(arr, tol, name=d.get("name"))


def matrix_from_spec(spec, n: int, seed: int = 0) -> FreeSympMatrix:
    """Build a free matrix from a spec.

    Accepted forms: ``"fourier"``, ``"frft:θ[,θ…]"``, ``"fresnel:b[,b…]"``,
    ``"lorentz:θ[,θ…]"``, ``"random:seed"``, a path to a JSON matrix file,
    or a mapping ``{"kind": ..., "param"/"seed"/"blocks": ...}``.  Free
    matrix objects pass through after a dimension check.

    Raises
    ------
    ConfigError
        For unreadable or malformed specs.
    """
    if isinstance(spec, (SympMatrix, FreeSympMatrix)):
        m = make_free(spec)
        if m.n != n:
            raise ConfigError(f"matrix {m.name} has N={m.n}, expected N={n}")
        return m
    if isinstance(spec, str):
        path = Path(spec)
        if spec.endswith(".json") and path.exists():
            try:
                spec = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read matrix file {spec}: {exc}") from exc
        else:
            kind, _, arg = spec.partition(":")
            spec = {"kind": kind}
            if arg:
                vals = [float(v) for v in arg.split(",")]
                if kind == "random":
                    spec["seed"] = int(vals[0])
                else:
                    spec["param"] = vals if len(vals) > 1 else vals[0]
    if not isinstance(spec, dict):
        raise ConfigError(f"matrix spec must be a string or object, got {type(spec).__name__}")
    spec = dict(spec)
    if "blocks" in spec and "kind" not in spec:
        spec["kind"] = "explicit"
    kind = str(spec.get("kind", "")).lower()
    allowed = {"kind", "param", "seed", "blocks", "n", "name"}
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(f"unknown matrix keys {sorted(unknown)}")
    if kind == "explicit":
        m = matrix_from_dict({"n": spec.get("n", n), "blocks": spec["blocks"],
                              "name": spec.get("name", "explicit")})
    elif kind == "random":
        m = random_free(n, int(spec.get("seed", seed)))
    elif kind in ("fourier", "frft", "fresnel", "lorentz"):
        m = special_matrix(kind, n, spec.get("param"))
    else:
        raise ConfigError(f"unknown matrix kind {kind!r}")
    if m.n != n:
        raise ConfigError(f"matrix {m.name} has N={m.n}, signals have N={n}")
    return make_free(m)
