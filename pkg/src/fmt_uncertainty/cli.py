"""Command-line front end.

Subcommands
-----------
verify
    Run the inequality battery from a JSON config and write a report.
example
    Reproduce the worked two-shear example (alias ``paper-example``).
transform
    Apply one transform to a signal file.

Exit codes: 0 success, 2 an inequality or reference value failed, 1 bad
input or numerical error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .battery import (BOUND_NAMES, P_VALUES, BoundReport, MatrixPair, default_pairs, default_signals,
                      example_analytic, example_quadrature, run_battery, signal_label, verify_signal)
from .errors import ConfigError, FmtError, MismatchBeyondTolerance, SignalLoadError
from .grid import GaussianChirp, Grid, SampledSignal, lp_norm, recenter, sample_gaussian_chirp
from .symplectic import inverse, matrix_from_spec
from .transform import fmt_apply, plan_fmt

log = logging.getLogger("fmt_uncertainty")

SCHEMA_VERSION = 1
CONFIG_KEYS = {
    "schema_version", "ndim", "signals", "pairs", "matrices", "random_pairs", "bounds", "p_values",
    "grid", "output", "tolerance", "jobs", "seed",
}
EXAMPLE_REFERENCE = {
    "product": 0.114347245036271,
    "trace": 0.101682097080979,
    "component": 0.101722056292651,
}


# ---------------------------------------------------------------- parsing helpers


def load_signal(path) -> SampledSignal:
    """Read a signal JSON file written by :meth:`SampledSignal.to_dict`."""
    try:
        return SampledSignal.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise SignalLoadError(f"cannot load signal {path}: {exc}") from exc


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the target directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def default_extent(g: GaussianChirp) -> float:
    """``8·max(√ζ_j, √|ε|)``; ``ε = ∞`` contributes nothing."""
    vals = [math.sqrt(z) for z in g.zeta]
    if math.isfinite(g.epsilon):
        vals.append(math.sqrt(abs(g.epsilon)))
    return 8.0 * max(vals)


def load_config(path, args) -> dict:
    """Parse and validate a verify config; command-line overrides win."""
    if path is None:
        cfg = {"schema_version": SCHEMA_VERSION}
    else:
        try:
            cfg = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {cfg.get('schema_version')!r}")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    ndim = int(cfg.get("ndim", 2))

    signals = []
    for i, s in enumerate(cfg.get("signals") or []):
        if isinstance(s, dict) and "file" in s:
            if set(s) - {"file"}:
                raise ConfigError(f"signal {i}: unknown keys {sorted(set(s) - {'file'})}")
            signals.append(("file", s["file"]))
        elif isinstance(s, dict):
            try:
                signals.append(("chirp", GaussianChirp.from_dict(s)))
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"signal {i}: {exc}") from exc
        else:
            raise ConfigError(f"signal {i}: expected an object")
    if not signals:
        signals = [("chirp", g) for g in default_signals(ndim)]
    dims = set()
    loaded = []
    for kind, s in signals:
        if kind == "file":
            f = load_signal(s)
            f, _ = recenter(f)
            loaded.append(("file", Path(s).stem, f))
            dims.add(f.ndim)
        else:
            loaded.append(("chirp", signal_label(s), s))
            dims.add(s.ndim)
    if len(dims) != 1:
        raise ConfigError(f"signals have mixed dimensions {sorted(dims)}")
    n = dims.pop()

    pairs = []
    for i, p in enumerate(cfg.get("pairs") or []):
        if not isinstance(p, dict) or set(p) - {"name", "m1", "m2"} or not {"m1", "m2"} <= set(p):
            raise ConfigError(f"pair {i}: expected {{'m1', 'm2'[, 'name']}}")
        pairs.append(MatrixPair(p.get("name", f"pair-{i}"), matrix_from_spec(p["m1"], n, seed + 2 * i),
                                matrix_from_spec(p["m2"], n, seed + 2 * i + 1)))
    mats = [matrix_from_spec(s, n, seed + k) for k, s in enumerate(cfg.get("matrices") or [])]
    for a in range(len(mats)):
        for b in range(a + 1, len(mats)):
            pairs.append(MatrixPair(f"{mats[a].name}~{mats[b].name}", mats[a], mats[b]))
    if not pairs:
        pairs = default_pairs(n, int(cfg.get("random_pairs", 10)), seed)

    p_values = tuple(float(p) for p in cfg.get("p_values", P_VALUES))
    if not p_values or any(not 1.0 <= p <= 2.0 for p in p_values):
        raise ConfigError("p_values must be a non-empty list in [1, 2]")
    select = cfg.get("bounds")
    if select is not None:
        bad = set(select) - set(BOUND_NAMES)
        if bad:
            raise ConfigError(f"unknown bounds {sorted(bad)}; choose from {list(BOUND_NAMES)}")
    grid = dict(cfg.get("grid") or {})
    if set(grid) - {"samples", "extent"}:
        raise ConfigError(f"unknown grid keys {sorted(set(grid) - {'samples', 'extent'})}")
    if args.grid is not None:
        grid["samples"] = args.grid
    if args.extent is not None:
        grid["extent"] = args.extent
    tol = dict(cfg.get("tolerance") or {})
    if set(tol) - {"inequality", "psd", "ordering"}:
        raise ConfigError(f"unknown tolerance keys {sorted(set(tol) - {'inequality', 'psd', 'ordering'})}")
    output = dict(cfg.get("output") or {})
    if set(output) - {"path", "format"}:
        raise ConfigError(f"unknown output keys {sorted(set(output) - {'path', 'format'})}")
    if args.out is not None:
        output["path"] = args.out
    if args.format is not None:
        output["format"] = args.format
    fmt = output.get("format", "json")
    if fmt not in ("json", "csv"):
        raise ConfigError(f"output format must be json or csv, got {fmt!r}")
    return {
        "signals": loaded, "pairs": pairs, "p_values": p_values, "select": select, "grid": grid,
        "tol": float(tol.get("inequality", 1e-3)), "psd_tol": float(tol.get("psd", 1e-8)),
        "ordering_tol": float(tol.get("ordering", 1e-10)), "output": output.get("path"), "format": fmt,
        "jobs": int(args.jobs if args.jobs is not None else cfg.get("jobs", 1)),
    }


# ---------------------------------------------------------------- commands


def cmd_verify(args) -> int:
    run = load_config(args.config, args)
    report = BoundReport(tol=run["tol"], psd_tol=run["psd_tol"], ordering_tol=run["ordering_tol"])
    log.info("verifying %d signals x %d pairs", len(run["signals"]), len(run["pairs"]))
    chirps = [s for kind, _, s in run["signals"] if kind == "chirp"]
    if chirps and not run["grid"]:
        report.merge(run_battery(chirps, run["pairs"], tol=run["tol"], p_values=run["p_values"],
                                 select=run["select"], jobs=run["jobs"]))
    for kind, label, s in run["signals"]:
        if kind == "chirp" and not run["grid"]:
            continue
        if kind == "chirp":
            samples = int(run["grid"].get("samples", 128))
            extent = float(run["grid"].get("extent", default_extent(s)))
            try:
                s = sample_gaussian_chirp(s, Grid.box([samples] * s.ndim, extent))
            except FmtError as exc:
                report.errors.append({"signal_id": label, "pair_id": None, "error": f"{type(exc).__name__}: {exc}"})
                continue
        verify_signal(s, run["pairs"], run["tol"], run["p_values"], label=label, report=report,
                      select=run["select"])
    text = report.to_json() if run["format"] == "json" else report.to_csv()
    if run["output"]:
        atomic_write(run["output"], text if text.endswith("\n") else text + "\n")
    summary = report.summary()
    print(f"cells={summary['cells']} entries={summary['entries']} violations={summary['violations']} "
          f"errors={summary['errors']} min_psd={summary['min_psd_eigenvalue']} "
          f"min_ordering_slack={summary['min_ordering_slack']}")
    for e in report.violations[:20]:
        print(f"VIOLATION {e.cell} {e.bound}: lhs={e.lhs!r} rhs={e.rhs!r}")
    for err in report.errors[:20]:
        print(f"ERROR {err['signal_id']}|{err['pair_id']}: {err['error']}", file=sys.stderr)
    if report.violations or summary["psd_failures"] or summary["ordering_failures"]:
        return 2
    return 1 if report.errors else 0


def cmd_example(args) -> int:
    samples = args.grid if args.grid is not None else 128
    extent = args.extent if args.extent is not None else 6.0
    ana = example_analytic()
    quad = example_quadrature(samples, extent, beta=args.beta)
    failures = []
    print(f"{'quantity':<10} {'reference':>18} {'analytic':>18} {'quadrature':>18}")
    for key, ref in EXAMPLE_REFERENCE.items():
        ra = abs(ana[key] - ref) / ref
        rq = abs(quad[key] - ref) / ref
        print(f"{key:<10} {ref:>18.15f} {ana[key]:>18.15f} {quad[key]:>18.15f}   "
              f"rel.err analytic={ra:.1e} quadrature={rq:.1e}")
        if ra > 1e-9:
            failures.append(f"{key} analytic rel.err {ra:.2e} > 1e-9")
        if rq > 1e-3:
            failures.append(f"{key} quadrature rel.err {rq:.2e} > 1e-3")
    print(f"spreads: analytic {ana['spread_m1']:.15g}, {ana['spread_m2']:.15g}; "
          f"expected 3/(16π²) = {3 / (16 * math.pi**2):.15g}, 6 + 3/(16π²) = {6 + 3 / (16 * math.pi**2):.15g}")
    if failures:
        err = MismatchBeyondTolerance("; ".join(failures))
        print(f"MismatchBeyondTolerance: {err}", file=sys.stderr)
        return 2
    return 0


def cmd_transform(args) -> int:
    f = load_signal(args.input)
    m = matrix_from_spec(args.matrix, f.ndim, args.seed or 0)
    plan = plan_fmt(m, f.grid, oversample=args.oversample)
    out = fmt_apply(plan, f)
    n_in, n_out = lp_norm(f), lp_norm(out)
    atomic_write(args.out, json.dumps(out.to_dict()) + "\n")
    print(f"matrix={m.name} path={plan.path}")
    print(f"norm_in={n_in:.15g}")
    print(f"norm_out={n_out:.15g}")
    print(f"unitarity_residual={abs(n_out - n_in) / n_in:.3e}")
    if args.roundtrip:
        back = fmt_apply(plan_fmt(inverse(m), out.grid, out_grid=f.grid), out)
        print(f"roundtrip_residual={phase_aligned_residual(back.values, f.values):.3e}")
    return 0


def phase_aligned_residual(a: np.ndarray, b: np.ndarray) -> float:
    """``min_θ ‖a e^{iθ} - b‖₂ / ‖b‖₂``."""
    inner = np.vdot(a, b)
    phase = inner / abs(inner) if inner != 0 else 1.0
    return float(np.linalg.norm(a * phase - b) / np.linalg.norm(b))


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    def global_options(default):
        # subcommands repeat the global flags with SUPPRESS so they do not reset top-level values
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--seed", type=int, default=default,
                            help="seed for random matrices without an explicit seed")
        common.add_argument("--grid", type=int, default=default, help="samples per axis (overrides adapted grids)")
        common.add_argument("--extent", type=float, default=default, help="grid half-extent")
        common.add_argument("-v", "--verbose", action="store_true",
                            default=False if default is None else argparse.SUPPRESS)
        return common

    common = global_options(argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="fmt-uncertainty", parents=[global_options(None)],
                                     description="Free metaplectic transforms and uncertainty bounds.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run the inequality battery")
    v.add_argument("--config", default=None, help="JSON run config (default: built-in battery)")
    v.add_argument("--out", default=None, help="report path")
    v.add_argument("--format", choices=("json", "csv"), default=None)
    v.add_argument("--jobs", type=int, default=None, help="worker processes")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("example", aliases=["paper-example"], parents=[common],
                       help="reproduce the two-shear Gaussian example")
    e.add_argument("--beta", type=float, default=0.0, help="constant phase of the test signal")
    e.set_defaults(func=cmd_example)

    t = sub.add_parser("transform", parents=[common], help="transform a signal file")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--matrix", required=True, help="matrix spec, e.g. fourier, frft:0.5, random:3, file.json")
    t.add_argument("--out", required=True)
    t.add_argument("--oversample", type=int, default=1)
    t.add_argument("--roundtrip", action="store_true", help="also report the inverse round-trip residual")
    t.set_defaults(func=cmd_transform)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (FmtError, ValueError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
