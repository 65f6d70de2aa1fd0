"""Command-line interface.

The model is read from a JSON document::

    {"states": [{"label": "on", "mu": 1.0, "sigma2": 0.5}, ...],
     "Q": [[...], ...], "B": 2.0, "x0": 0.0, "q": 0.0}

``x0`` and ``q`` are optional.  Every command writes CSV with a header row
to standard output, reals with 17 significant digits.  Exit codes: 0 on
success, 1 for bad input, 2 for numerical failure, 3 when ``validate``
finds a failed check.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .errors import ModelError, NumericalError
from .localtime import admissible_interval, localtime_transform, overflow_rates
from .model import MmbmModel
from .passage import crossing_probability, passage_matrices, passage_pairs
from .reflection import StripSpec, exp_epoch_law, k_matrices, stationary_law
from .simulate import (
    SimConfig,
    estimate_epoch,
    estimate_overflow,
    estimate_passage,
    estimate_stationary,
    simulate_path,
)

__all__ = ["ModelDocument", "load_model", "parse_model", "main"]

EXIT_INPUT, EXIT_NUMERIC, EXIT_VALIDATION = 1, 2, 3

_TOP_KEYS = {"states", "Q", "B", "x0", "q"}
_STATE_KEYS = {"label", "mu", "sigma2"}


@dataclass(frozen=True)
class ModelDocument:
    model: MmbmModel
    strip: StripSpec
    q: float


def _number(v, what):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ModelError(f"{what} must be a finite number, got {v!r}")
    return float(v)


def parse_model(doc) -> ModelDocument:
    """Check a decoded JSON document and build the model and strip."""
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    extra = set(doc) - _TOP_KEYS
    if extra:
        raise ModelError(f"unknown keys: {sorted(extra)}")
    for k in ("states", "Q", "B"):
        if k not in doc:
            raise ModelError(f"missing key {k!r}")
    states = doc["states"]
    if not isinstance(states, list) or not states:
        raise ModelError("'states' must be a non-empty list")
    labels, mu, s2 = [], [], []
    for i, st in enumerate(states):
        if not isinstance(st, dict):
            raise ModelError(f"state {i} must be an object")
        extra = set(st) - _STATE_KEYS
        if extra:
            raise ModelError(f"state {i}: unknown keys {sorted(extra)}")
        if "mu" not in st or "sigma2" not in st:
            raise ModelError(f"state {i}: 'mu' and 'sigma2' are required")
        labels.append(str(st.get("label", i)))
        mu.append(_number(st["mu"], f"state {i} mu"))
        s2.append(_number(st["sigma2"], f"state {i} sigma2"))
    if len(set(labels)) != len(labels):
        raise ModelError("state labels must be distinct")
    Q = doc["Q"]
    if not isinstance(Q, list) or any(not isinstance(r, list) for r in Q):
        raise ModelError("'Q' must be a list of rows")
    Q = [[_number(v, "Q entry") for v in row] for row in Q]
    model = MmbmModel(np.array(Q, dtype=float) if Q else np.zeros((0, 0)), mu, s2, labels)
    B = _number(doc["B"], "B")
    x0 = _number(doc.get("x0", 0.0), "x0")
    q = _number(doc.get("q", 0.0), "q")
    if q < 0:
        raise ModelError("q must be >= 0")
    return ModelDocument(model, StripSpec(B, x0), q)


def _reject_constant(name):
    raise ModelError(f"non-finite number {name} in model document")


def load_model(path) -> ModelDocument:
    """Read and parse a model file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh, parse_constant=_reject_constant)
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON ({exc})") from exc
    return parse_model(doc)


# --- output -----------------------------------------------------------------


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


class _Csv:
    def __init__(self, stream, header):
        self.w = csv.writer(stream, lineterminator="\n")
        self.w.writerow(header)

    def row(self, *values):
        self.w.writerow([_fmt(v) for v in values])


def _levels(text, what="--levels"):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ModelError(f"{what}: expected comma-separated numbers") from exc
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ModelError(f"{what}: expected finite numbers")
    return np.array(vals)


def _q(args, doc):
    return doc.q if args.q is None else args.q


# --- commands ---------------------------------------------------------------


def cmd_passage(args, doc, out):
    m = doc.model
    q = _q(args, doc)
    pair = passage_matrices(m, q, args.direction, zero_drift=(q == 0 and m.is_zero_drift))
    w = _Csv(out, ["state_i", "state_j", "x", "probability"])
    for x in _levels(args.levels):
        P = crossing_probability(pair, x)
        for i in range(m.n):
            for c, j in enumerate(pair.index):
                w.row(m.labels[i], m.labels[j], x, P[i, c])


def cmd_stationary(args, doc, out):
    if args.grid < 2:
        raise ModelError("--grid must be at least 2")
    m = doc.model
    law = stationary_law(m, doc.strip.B, args.grid)
    w = _Csv(out, ["state", "x", "survival", "cdf", "density", "mass0", "massB"])
    for i in range(m.n):
        for k, x in enumerate(law.grid):
            w.row(m.labels[i], x, law.survival[k, i], law.cdf[k, i], law.density[k, i],
                  law.mass0[i], law.massB[i])


def cmd_exp_epoch(args, doc, out):
    m = doc.model
    q = _q(args, doc)
    xs = _levels(args.levels)
    law = exp_epoch_law(m, doc.strip.B, q, args.start, xs)
    w = _Csv(out, ["state_i", "state_j", "x", "probability"])
    for k, x in enumerate(xs):
        for i in range(m.n):
            for j in range(m.n):
                w.row(m.labels[i], m.labels[j], x, law[k, i, j])


def cmd_localtime(args, doc, out):
    m = doc.model
    q = _q(args, doc)
    x0 = doc.strip.x0 if args.x0 is None else args.x0
    StripSpec(doc.strip.B, x0)
    pairs = passage_pairs(m, q)
    if args.alpha_grid is None:
        lo, hi = admissible_interval(m, q, pairs)
        alphas = [_default_alpha(lo, hi)]
    else:
        alphas = _levels(args.alpha_grid, "--alpha-grid")
    w = _Csv(out, ["alpha", "matrix", "row", "col", "value"])
    cls = m.phases
    for a in alphas:
        t = localtime_transform(m, doc.strip.B, x0, q, a, pairs=pairs)
        for name, M, rows, cols in (("ML", t.ML, range(m.n), cls.e_minus),
                                    ("MU", t.MU, range(m.n), cls.e_plus),
                                    ("FL", t.FL, cls.e_minus, cls.e_minus),
                                    ("FU", t.FU, cls.e_plus, cls.e_plus)):
            for r, i in enumerate(rows):
                for c, j in enumerate(cols):
                    w.row(a, name, m.labels[i], m.labels[j], M[r, c])
        w.row(a, "kL", "", "", t.kL)
        w.row(a, "kU", "", "", t.kU)


def cmd_overflow(args, doc, out):
    m = doc.model
    r = overflow_rates(m, doc.strip.B)
    unused = np.zeros(m.n)
    over = np.zeros(m.n)
    unused[r.e_minus] = r.unused
    over[r.e_plus] = r.overflow
    w = _Csv(out, ["phase", "unused_rate", "overflow_rate"])
    for i in range(m.n):
        w.row(m.labels[i], unused[i], over[i])


def cmd_simulate(args, doc, out):
    m, strip = doc.model, doc.strip
    cfg = SimConfig(dt=args.dt, horizon=args.horizon, replications=args.reps, seed=args.seed,
                    estimator=args.estimator, reflection=args.reflection)
    est = args.estimator
    if est == "path":
        p = simulate_path(m, strip, args.j0, cfg)
        w = _Csv(out, ["t", "X", "J", "W", "L", "U"])
        for k in range(p.t.size):
            w.row(p.t[k], p.X[k], m.labels[p.J[k]], p.W[k], p.L[k], p.U[k])
    elif est == "stationary":
        lv = _levels(args.levels) if args.levels else None
        e = estimate_stationary(m, strip, cfg, lv, j0=args.j0)
        w = _Csv(out, ["state", "x", "cdf", "se"])
        for i in range(m.n):
            for k, x in enumerate(e.levels):
                w.row(m.labels[i], x, e.cdf[k, i], e.se[k, i])
    elif est == "overflow":
        e = estimate_overflow(m, strip, cfg, j0=args.j0)
        w = _Csv(out, ["phase", "unused_rate", "unused_se", "overflow_rate", "overflow_se"])
        for i in range(m.n):
            w.row(m.labels[i], e.unused[i], e.unused_se[i], e.overflow[i], e.overflow_se[i])
    elif est == "passage":
        q = _q(args, doc)
        w = _Csv(out, ["state_i", "state_j", "x", "probability", "se"])
        for x in _levels(args.levels or "1"):
            e = estimate_passage(m, q, x, args.direction, cfg)
            for i in range(m.n):
                for c, j in enumerate(e.index):
                    w.row(m.labels[i], m.labels[j], x, e.mean[i, c], e.se[i, c])
    elif est == "epoch":
        q = _q(args, doc)
        e = estimate_epoch(m, strip, q, cfg)
        w = _Csv(out, ["state_i", "state_j", "x", "probability", "se"])
        for x in _levels(args.levels or str(strip.B / 2)):
            P, S = e.joint_survival(x, m.n)
            for i in range(m.n):
                for j in range(m.n):
                    w.row(m.labels[i], m.labels[j], x, P[i, j], S[i, j])
    else:  # pragma: no cover - argparse restricts choices
        raise ModelError(f"unknown estimator {est!r}")


def _default_alpha(lo, hi):
    if np.isfinite(lo) and np.isfinite(hi):
        return 0.5 * (lo + hi)
    if np.isfinite(lo):
        return lo + 1.0
    if np.isfinite(hi):
        return hi - 1.0
    return 0.0


def run_checks(model: MmbmModel, B: float, q: float, x0: float = 0.0):
    """List of ``(check, value, tolerance)``; a check passes when ``value <= tolerance``.

    Raises the underlying error when a computation fails outright.
    """
    zd = q == 0 and model.is_zero_drift
    up, down = passage_pairs(model, q, zero_drift=zd)
    scale = max(1.0, np.abs(model.Q).max() + q)
    checks = [("residual_up", up.residual, 1e-8 * scale), ("residual_down", down.residual, 1e-8 * scale)]
    if not zd:
        lo, hi = admissible_interval(model, q, (up, down))
        t = localtime_transform(model, B, x0, q, _default_alpha(lo, hi), pairs=(up, down))
        checks.append(("block_residual", t.residual, 1e-9))
        checks.append(("perron_kL", t.kL, 0.0))
        checks.append(("perron_kU", t.kU, 0.0))
        Kp, Km = k_matrices(up, down, B)
        checks.append(("cond_Kplus", float(np.linalg.cond(Kp)) if Kp.size else 1.0, 1e12))
        checks.append(("cond_Kminus", float(np.linalg.cond(Km)) if Km.size else 1.0, 1e12))
    law = stationary_law(model, B, np.linspace(0.0, B, 51)[1:-1])
    comp = float(np.abs(law.survival + law.cdf - 1.0).max())
    checks.append(("complementarity", comp, 1e-9))
    return checks


def cmd_validate(args, doc, out):
    m = doc.model
    q = _q(args, doc)
    checks = run_checks(m, doc.strip.B, q, doc.strip.x0)
    w = _Csv(out, ["check", "value", "tolerance", "status"])
    ok = True
    for name, v, tol in checks:
        good = bool(v < tol) if name.startswith("perron") else bool(v <= tol)
        ok &= good
        w.row(name, v, tol, "pass" if good else "fail")
    return 0 if ok else EXIT_VALIDATION


# --- parser -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reflected-mmbm",
                description="Analytic and Monte Carlo quantities for modulated Brownian motion in [0, B].")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("model", help="model JSON file")
        s.set_defaults(func=func)
        return s

    s = add("passage", cmd_passage, "first-passage probabilities Pi expm(Lambda x)")
    s.add_argument("--q", type=float, default=None, help="killing rate (default: document q, else 0)")
    s.add_argument("--direction", choices=("down", "up"), default="down")
    s.add_argument("--levels", default="0", help="comma-separated levels x >= 0")

    s = add("stationary", cmd_stationary, "stationary law of the reflected process")
    s.add_argument("--grid", type=int, default=201, help="number of levels in [0, B]")

    s = add("exp-epoch", cmd_exp_epoch, "joint law at an exponential time")
    s.add_argument("--q", type=float, default=None)
    s.add_argument("--start", choices=("bottom", "top"), default="bottom")
    s.add_argument("--levels", required=True, help="comma-separated levels in (0, B]")

    s = add("localtime", cmd_localtime, "transforms at inverse local times")
    s.add_argument("--q", type=float, default=None)
    s.add_argument("--alpha-grid", default=None,
                   help="comma-separated transform arguments, e.g. --alpha-grid=-0.5,0.1 "
                        "(default: midpoint of the admissible interval)")
    s.add_argument("--x0", type=float, default=None)

    add("overflow", cmd_overflow, "long-run unused capacity and overflow rates per phase")

    s = add("simulate", cmd_simulate, "Monte Carlo estimates with standard errors")
    s.add_argument("--dt", type=float, default=None)
    s.add_argument("--horizon", type=float, default=1000.0)
    s.add_argument("--reps", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=12345)
    s.add_argument("--estimator", choices=("stationary", "overflow", "passage", "epoch", "path"),
                   default="stationary")
    s.add_argument("--reflection", choices=("bridge", "clip"), default="bridge")
    s.add_argument("--levels", default=None)
    s.add_argument("--q", type=float, default=None)
    s.add_argument("--direction", choices=("down", "up"), default="down")
    s.add_argument("--j0", type=int, default=0, help="initial state index")

    s = add("validate", cmd_validate, "self-consistency report; exit 3 if a check fails")
    s.add_argument("--q", type=float, default=None)
    return p


def main(argv=None, out=None) -> int:
    """Entry point; returns the exit code."""
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        doc = load_model(args.model)
        return int(args.func(args, doc, out) or 0)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ModelError, ValueError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
