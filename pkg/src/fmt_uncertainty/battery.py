"""Signal × matrix-pair battery for the inequality suite.

Each cell pairs one signal with two free symplectic matrices.  Left-hand
sides are quadratures of transformed samples; right-hand sides use
quadrature moments of the signal.  Closed-form Gaussian chirps get grids
adapted to each transform, arbitrary sampled signals use their own grid.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.fft import next_fast_len

from . import bounds as bd
from .errors import DiagonalRequired, FmtError, ShapeRequired, TooLarge
from .grid import GaussianChirp, Grid, SampledSignal, normalize, sample_gaussian_chirp, weighted_lp
from .moments import MomentSummary, analytic_gaussian_moments, compute_moments, second_moment_identity
from .symplectic import (FreeSympMatrix, compose, from_blocks, inverse, make_free, random_free,
                         special_matrix, validate_symplectic)
from .transform import fmt_apply, plan_fmt

__all__ = [
    "P_VALUES",
    "BOUND_NAMES",
    "MASK_APPROX_LIMIT",
    "MatrixPair",
    "BoundEntry",
    "BoundReport",
    "default_signals",
    "default_pairs",
    "example_pair",
    "example_signal",
    "example_analytic",
    "example_quadrature",
    "adapted_grid",
    "CellEvaluator",
    "evaluate_entries",
    "verify_signal",
    "run_battery",
    "identity_cells",
    "signal_label",
]

P_VALUES = (1.0, 1.5, 2.0)
BOUND_NAMES = (
    "component", "trace", "mo_component", "mo_trace", "extra_strong_diag", "extra_strong_sign",
    "time_fmt", "lp_two_fmt", "lp_time_fmt", "lq_time_fmt",
)
# extra-strong entries whose phase mask dropped more mass than this are flagged
MASK_APPROX_LIMIT = 1e-8


@dataclass(frozen=True)
class MatrixPair:
    """Two free matrices forming one battery column."""

    name: str
    m1: FreeSympMatrix
    m2: FreeSympMatrix

    @property
    def ids(self) -> tuple:
        return (self.m1.name or f"{self.name}.m1", self.m2.name or f"{self.name}.m2")


@dataclass
class BoundEntry:
    """One inequality evaluated on one cell; passes when ``lhs - rhs >= -tol·lhs``."""

    signal_id: str
    pair_id: str
    m1_id: str
    m2_id: str
    bound: str
    lhs: float
    rhs: float
    passed: bool
    approximate: bool = False
    slack: float = field(init=False)

    def __post_init__(self):
        self.slack = float(self.lhs - self.rhs)

    @property
    def cell(self) -> str:
        return f"{self.signal_id}|{self.pair_id}"

    @property
    def family(self) -> str:
        return self.bound.split("[")[0]


CSV_COLUMNS = ("signal_id", "m1_id", "m2_id", "bound_name", "lhs", "rhs", "slack", "pass")


@dataclass
class BoundReport:
    """Flat collection of :class:`BoundEntry` rows plus per-cell checks.

    ``psd`` and ``ordering`` map cell labels to the smallest eigenvalue of
    the Robertson–Schrödinger matrix and to the component-minus-trace
    slack; ``errors`` lists cells that raised.
    """

    entries: list = field(default_factory=list)
    psd: dict = field(default_factory=dict)
    ordering: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    tol: float = 1e-3
    psd_tol: float = 1e-8
    ordering_tol: float = 1e-10

    @property
    def cells(self) -> list:
        return sorted({e.cell for e in self.entries})

    @property
    def violations(self) -> list:
        return [e for e in self.entries if not e.passed]

    @property
    def passed(self) -> bool:
        return (not self.violations and not self.errors
                and all(v >= -self.psd_tol for v in self.psd.values())
                and all(v >= -self.ordering_tol for v in self.ordering.values()))

    def merge(self, other: "BoundReport") -> None:
        self.entries.extend(other.entries)
        self.psd.update(other.psd)
        self.ordering.update(other.ordering)
        self.errors.extend(other.errors)

    def summary(self) -> dict:
        by_bound: dict = {}
        for e in self.entries:
            s = by_bound.setdefault(e.family, {"count": 0, "violations": 0, "min_rel_slack": None})
            s["count"] += 1
            s["violations"] += not e.passed
            if e.lhs > 0:
                r = e.slack / e.lhs
                s["min_rel_slack"] = r if s["min_rel_slack"] is None else min(s["min_rel_slack"], r)
        return {
            "cells": len(self.cells),
            "entries": len(self.entries),
            "violations": len(self.violations),
            "approximate": sum(e.approximate for e in self.entries),
            "errors": len(self.errors),
            "min_psd_eigenvalue": min(self.psd.values(), default=None),
            "psd_failures": sum(v < -self.psd_tol for v in self.psd.values()),
            "min_ordering_slack": min(self.ordering.values(), default=None),
            "ordering_failures": sum(v < -self.ordering_tol for v in self.ordering.values()),
            "tol": self.tol,
            "passed": self.passed,
            "by_bound": by_bound,
        }

    def to_dict(self) -> dict:
        rows = []
        for e in self.entries:
            d = asdict(e)
            rows.append(d)
        return {"summary": self.summary(), "entries": rows, "psd": self.psd,
                "ordering": self.ordering, "errors": self.errors}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for e in self.entries:
            w.writerow([e.signal_id, e.m1_id, e.m2_id, e.bound, repr(e.lhs), repr(e.rhs), repr(e.slack),
                        "true" if e.passed else "false"])
        return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


# ---------------------------------------------------------------- catalogues


def default_signals(ndim: int = 2, betas=(0.0, 0.3)) -> list:
    """Gaussian chirps with ``ζ_j ∈ {0.5, 1, 2}``, ``ε ∈ {0.5, 1, 2, ∞}`` and the given constant phases.

    ``β`` is a global phase, so cells differing only in ``β`` must give
    identical entries; keeping both values exercises that invariance.
    """
    out = []
    for zeta in itertools.product((0.5, 1.0, 2.0), repeat=ndim):
        for eps in (0.5, 1.0, 2.0, math.inf):
            for beta in betas:
                out.append(GaussianChirp(zeta, eps, beta))
    return out


def example_pair(ndim: int = 2) -> MatrixPair:
    """``M1 = [[I, -I], [0, I]]`` and ``M2 = [[I, I], [0, I]]``."""
    i, z = np.eye(ndim), np.zeros((ndim, ndim))
    m1 = make_free(validate_symplectic(from_blocks(i, -i, z, i), name="shear(-1)"))
    m2 = make_free(validate_symplectic(from_blocks(i, i, z, i), name="shear(+1)"))
    return MatrixPair("example", m1, m2)


def example_signal() -> GaussianChirp:
    """``ζ = (1, 2)``, ``ε = 1``."""
    return GaussianChirp((1.0, 2.0), 1.0)


def default_pairs(ndim: int = 2, n_random: int = 10, seed: int = 0) -> list:
    """Example pair, named special pairs and ``n_random`` seeded random pairs."""
    pairs = [example_pair(ndim)]
    pairs.append(MatrixPair("fourier-fresnel", make_free(special_matrix("fourier", ndim)),
                            make_free(special_matrix("fresnel", ndim, 0.75))))
    pairs.append(MatrixPair("frft-frft", make_free(special_matrix("frft", ndim, math.pi / 3)),
                            make_free(special_matrix("frft", ndim, math.pi / 5))))
    angles = [math.pi / 4, math.pi / 3, math.pi / 6][:ndim]
    rap = [0.3, 0.5, 0.7][:ndim]
    pairs.append(MatrixPair("frft-lorentz", make_free(special_matrix("frft", ndim, angles)),
                            make_free(special_matrix("lorentz", ndim, rap))))
    for k in range(n_random):
        s = seed + 2 * k
        pairs.append(MatrixPair(f"random-{s}", random_free(ndim, s), random_free(ndim, s + 1)))
    return pairs


# ---------------------------------------------------------------- grids


def adapted_grid(g: GaussianChirp, m=None, k: float = 7.0, max_axis: int = 2048) -> Grid:
    """Box grid holding ``k`` standard deviations of the signal in both domains.

    With ``m`` given (one matrix or a sequence), the frequency spread is
    that of the chirped input ``f e^{πi xᵀ B⁻¹A x}`` that each transform
    actually Fourier-transforms: ``W + CovᵀS + S Cov + S X S`` with
    ``S = B⁻¹A``.  The largest spread over all matrices and the signal
    itself is used, so the samples also resolve ``f̂``.

    Raises
    ------
    TooLarge
        If an axis would need more than ``max_axis`` samples.
    """
    mom = analytic_gaussian_moments(g)
    if m is None:
        mats = []
    elif isinstance(m, (list, tuple)):
        mats = list(m)
    else:
        mats = [m]
    var_w = np.diag(mom.W).copy()
    c = mom.CovXW
    for mat in mats:
        s = make_free(mat).input_chirp
        var_w = np.maximum(var_w, np.diag(mom.W + c.T @ s + s @ c + s @ mom.X @ s))
    sx = np.sqrt(np.diag(mom.X))
    sw = np.sqrt(var_w)
    half = k * sx
    shape = []
    for j in range(g.ndim):
        n = next_fast_len(int(math.ceil(4 * k * k * sx[j] * sw[j])))
        n += n % 2
        if n > max_axis:
            raise TooLarge(f"axis {j} needs {n} samples (limit {max_axis})")
        shape.append(max(n, 16))
    return Grid.box(shape, half)


# ---------------------------------------------------------------- cells


class CellEvaluator:
    """Evaluates bounds on Gaussian-chirp cells, caching per-signal and per-transform work."""

    def __init__(self, k: float = 7.0, tol: float = 1e-3, p_values=P_VALUES, select=None):
        self.k = k
        self.tol = tol
        self.p_values = tuple(p_values)
        self.select = select
        self._ps = tuple(sorted(set(self.p_values) | {2.0}))
        self._sig: dict = {}
        self._tr: dict = {}

    def signal_data(self, g: GaussianChirp) -> dict:
        key = _sig_key(g)
        if key not in self._sig:
            f = normalize(sample_gaussian_chirp(g, adapted_grid(g, k=self.k)))
            self._sig[key] = {
                "f": f,
                "mom": compute_moments(f),
                "analytic": analytic_gaussian_moments(g),
                "xp": {p: weighted_lp(f, "norm", p) for p in self._ps},
            }
        return self._sig[key]

    def transform_data(self, g: GaussianChirp, m: FreeSympMatrix) -> dict:
        key = (_sig_key(g), m.entries.tobytes())
        if key not in self._tr:
            f = normalize(sample_gaussian_chirp(g, adapted_grid(g, m, k=self.k)))
            lf = fmt_apply(plan_fmt(m, f.grid), f)
            self._tr[key] = {p: weighted_lp(lf, "norm", p) for p in self._ps}
        return self._tr[key]

    def evaluate(self, g: GaussianChirp, pair: MatrixPair, report: BoundReport) -> None:
        sd = self.signal_data(g)
        evaluate_entries(
            signal_label(g), sd["mom"], sd["xp"], self.transform_data(g, pair.m1),
            self.transform_data(g, pair.m2), pair, report, self.tol, self.p_values,
            ordering_moments=sd["analytic"], select=self.select,
        )


def evaluate_entries(signal_id: str, mom: MomentSummary, xp: dict, t1: dict, t2: dict, pair: MatrixPair,
                     report: BoundReport, tol: float = 1e-3, p_values=P_VALUES,
                     ordering_moments: MomentSummary | None = None, select=None) -> None:
    """Append every applicable bound for one cell to ``report``.

    Parameters
    ----------
    xp, t1, t2 : dict
        ``‖x f‖_p``, ``‖u L_{M1} f‖_p`` and ``‖u L_{M2} f‖_p`` keyed by ``p``
        (``p = 2`` must be present) for a unit-norm signal.
    ordering_moments : MomentSummary, optional
        Moments for the component-vs-trace ordering check; defaults to ``mom``.
    select : iterable of str, optional
        Bound families to evaluate (see :data:`BOUND_NAMES`); default all.
    """
    m1, m2 = pair.m1, pair.m2
    m1_id, m2_id = pair.ids
    keep = set(BOUND_NAMES if select is None else select)
    approx = mom.masked_mass > MASK_APPROX_LIMIT

    def add(name, lhs, rhs, approximate=False):
        if name.split("[")[0] in keep:
            report.entries.append(BoundEntry(signal_id, pair.name, m1_id, m2_id, name, float(lhs), float(rhs),
                                             bool(lhs - rhs >= -tol * lhs), approximate))

    prod = t1[2.0] ** 2 * t2[2.0] ** 2
    add("component", prod, bd.bound_componentwise(mom, m1, m2))
    add("trace", prod, bd.bound_trace(mom, m1, m2))
    add("mo_component", prod, bd.bound_mo_component(mom, m1, m2))
    add("mo_trace", prod, bd.bound_mo_trace(mom, m1, m2))
    try:
        add("extra_strong_diag", prod, bd.bound_extra_strong_diag(mom, m1, m2), approx)
    except DiagonalRequired:
        pass
    try:
        add("extra_strong_sign", prod, bd.bound_extra_strong_scalar(mom, m1, m2), approx)
    except ShapeRequired:
        pass
    for tag, m, t in (("m1", m1, t1), ("m2", m2, t2)):
        add(f"time_fmt[{tag}]", xp[2.0] ** 2 * t[2.0] ** 2, bd.bound_time_fmt(mom, m))
    det = abs(np.linalg.det(m2.B @ m1.A.T - m2.A @ m1.B.T))
    for p in p_values:
        add(f"lp_two_fmt[p={p:g}]", (t1[p] * t2[p]) ** 2, det ** (2 / p - 1) * bd.bound_trace(mom, m1, m2))
        for tag, m, t in (("m1", m1, t1), ("m2", m2, t2)):
            res = _lp_time(xp[p], t[p], mom, m, p)
            add(f"lp_time_fmt[{tag},p={p:g}]", *res["lp"])
            add(f"lq_time_fmt[{tag},p={p:g}]", *res["lq"])
    cell = f"{signal_id}|{pair.name}"
    report.psd[cell] = bd.robertson_schrodinger_check(mom, m1, m2)["min_eigenvalue"]
    om = mom if ordering_moments is None else ordering_moments
    report.ordering[cell] = bd.bound_componentwise(om, m1, m2) - bd.bound_trace(om, m1, m2)


def verify_signal(f: SampledSignal, pairs, tol: float = 1e-3, p_values=P_VALUES, label: str = "signal",
                  oversample: int = 1, report: BoundReport | None = None, select=None) -> BoundReport:
    """Bound report for an arbitrary centered sampled signal.

    Transforms are evaluated on ``f.grid``, which must resolve the chirped
    input of every matrix.  Cells whose transform raises (for example
    :class:`NyquistViolated`) are recorded in ``report.errors``.
    """
    report = BoundReport(tol=tol) if report is None else report
    try:
        f = normalize(f)
        mom = compute_moments(f)
    except FmtError as exc:
        report.errors.append({"signal_id": label, "pair_id": None, "error": f"{type(exc).__name__}: {exc}"})
        return report
    ps = tuple(sorted(set(p_values) | {2.0}))
    xp = {p: weighted_lp(f, "norm", p) for p in ps}
    cache: dict = {}

    def norms(m):
        key = m.entries.tobytes()
        if key not in cache:
            lf = fmt_apply(plan_fmt(m, f.grid, oversample=oversample), f)
            cache[key] = {p: weighted_lp(lf, "norm", p) for p in ps}
        return cache[key]

    for pair in pairs:
        try:
            evaluate_entries(label, mom, xp, norms(pair.m1), norms(pair.m2), pair, report, tol, p_values,
                             select=select)
        except FmtError as exc:
            report.errors.append({"signal_id": label, "pair_id": pair.name,
                                  "error": f"{type(exc).__name__}: {exc}"})
    return report


def _lp_time(xp: float, up: float, mom: MomentSummary, m, p: float) -> dict:
    # scalar versions of bounds.lp_time_fmt / lq_time_fmt on precomputed norms
    _, tr_b, c = bd._time_fmt_terms(mom, m)
    det = abs(np.linalg.det(m.B))
    lp = ((xp * up) ** 2, det ** (2 / p - 1) * (tr_b**2 / (16 * math.pi**2) + c**2))
    if p == 1.0:
        lq = (xp * up, det**0.5 * max(abs(tr_b) / (4 * math.pi), abs(c)))
    else:
        q = p / (p - 1)
        lq = ((xp * up) ** q, det ** (q / p - q / 2) * ((abs(tr_b) / (4 * math.pi)) ** q + abs(c) ** q))
    return {"lp": lp, "lq": lq}


def _sig_key(g: GaussianChirp):
    return (g.zeta, g.epsilon, g.beta)


def signal_label(g: GaussianChirp) -> str:
    """Stable identifier such as ``chirp(zeta=1,2;eps=inf)``."""
    eps = "inf" if math.isinf(g.epsilon) else f"{g.epsilon:g}"
    beta = f";beta={g.beta:g}" if g.beta else ""
    return f"chirp(zeta={','.join(f'{z:g}' for z in g.zeta)};eps={eps}{beta})"


def _signal_block(g, pairs, k, tol, p_values, select) -> BoundReport:
    ev = CellEvaluator(k=k, tol=tol, p_values=p_values, select=select)
    rep = BoundReport(tol=tol)
    for pair in pairs:
        try:
            ev.evaluate(g, pair, rep)
        except FmtError as exc:
            rep.errors.append({"signal_id": signal_label(g), "pair_id": pair.name,
                               "error": f"{type(exc).__name__}: {exc}"})
    return rep


def run_battery(signals=None, pairs=None, k: float = 7.0, tol: float = 1e-3, p_values=P_VALUES,
                select=None, jobs: int = 1) -> BoundReport:
    """Evaluate every applicable bound on every signal × pair cell.

    Cells are independent; with ``jobs > 1`` signals are spread over a
    process pool and the partial reports are merged in input order, so the
    result does not depend on ``jobs``.
    """
    signals = default_signals() if signals is None else list(signals)
    pairs = default_pairs() if pairs is None else list(pairs)
    report = BoundReport(tol=tol)
    if jobs > 1 and len(signals) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_signal_block, g, pairs, k, tol, p_values, select) for g in signals]
            for fut in futures:
                report.merge(fut.result())
    else:
        for g in signals:
            report.merge(_signal_block(g, pairs, k, tol, p_values, select))
    return report


def identity_cells(count: int = 20, k: float = 7.0):
    """Integral-identity gaps on ``count`` cells spread over the default battery.

    Yields ``(cell_label, {"first": IdentityGap, "second": IdentityGap})``.
    """
    signals = default_signals()
    pairs = default_pairs()
    combos = [(signals[(7 * i) % len(signals)], pairs[i % len(pairs)]) for i in range(count)]
    for g, pair in combos:
        f = normalize(sample_gaussian_chirp(g, adapted_grid(g, pair.m1, k=k)))
        mom = compute_moments(f)
        yield (f"{signal_label(g)}|{pair.name}",
               bd.integral_identity_check(f, pair.m1, pair.m2.A, pair.m2.B, mom=mom))


# ---------------------------------------------------------------- worked example


def _example_rhs(mom: MomentSummary, pair: MatrixPair) -> dict:
    return {"trace": bd.bound_trace(mom, pair.m1, pair.m2),
            "component": bd.bound_componentwise(mom, pair.m1, pair.m2)}


def example_analytic() -> dict:
    """Closed-form product of spreads and both bounds for the worked example.

    The two spreads are ``3/(16π²)`` and ``6 + 3/(16π²)``.
    """
    pair = example_pair()
    mom = analytic_gaussian_moments(example_signal())
    f1 = second_moment_identity(mom, pair.m1)
    f2 = second_moment_identity(mom, pair.m2)
    return {"spread_m1": f1, "spread_m2": f2, "product": f1 * f2, **_example_rhs(mom, pair)}


def example_quadrature(samples: int = 128, half_extent: float = 6.0, beta: float = 0.0) -> dict:
    """Worked example from samples on one ``samples²`` box grid.

    ``L_{M1} f`` is computed directly.  ``L_{M2} f`` is computed as
    ``L_{M2 M1⁻¹}(L_{M1} f)``: ``M1`` removes the input chirp, so the second
    step sees an unchirped Gaussian, while direct evaluation would need a
    finer grid.  Moduli are unaffected by the phase ambiguity of the
    composition.
    """
    pair = example_pair()
    grid = Grid.box([samples, samples], half_extent)
    g = example_signal()
    f = normalize(sample_gaussian_chirp(GaussianChirp(g.zeta, g.epsilon, beta), grid))
    l1 = fmt_apply(plan_fmt(pair.m1, f.grid), f)
    m3 = compose(pair.m2, inverse(pair.m1))
    l2 = fmt_apply(plan_fmt(m3, l1.grid), l1)
    f1 = weighted_lp(l1, "norm", 2) ** 2
    f2 = weighted_lp(l2, "norm", 2) ** 2
    mom = compute_moments(f)
    return {"spread_m1": f1, "spread_m2": f2, "product": f1 * f2, **_example_rhs(mom, pair),
            "moments": mom}
