"""Command-line front end: ``phsoc analyze|regularize|solve|demo``.

Systems are read from a JSON document::

    {"field": "complex", "n": 1, "m": 2,
     "J": [[[0, 1]]], "R": [[[0, 0]]], "Q": [[[1, 0]]], "B": [[[1, 0], [0, 1]]],
     "S": ..., "bvp": {"x0": ..., "x1": ..., "t0": 0, "t1": 1},
     "options": {"tol_rel": 1e-10, "omega_grid_size": 9, "mu_hint": [0, 2], "grid_points": 1001}}

Complex entries are ``[re, im]`` pairs; a real file uses plain numbers.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import models
from .errors import (
    InvalidInput,
    MuSearchExhausted,
    NoOptimalTrajectory,
    NumericalFailure,
    PhsocError,
    SingularPencil,
    SpectrumClash,
)
from .linalg import TOL_REL
from .pencil import full_report
from .regularize import rank_minimal_S
from .solver import build_drazin_data, solve_bvp
from .system import PHSystem, energy_balance_residual, objective_value, validate, validate_cost

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SINGULAR = 10
EXIT_INFEASIBLE = 11
EXIT_NUMERICAL = 20


# ---------------------------------------------------------------------------
# encoding


def encode(M) -> list:
    """Nested lists with [re, im] pairs for every entry."""
    A = np.asarray(M, dtype=complex)
    return np.stack([A.real, A.imag], axis=-1).tolist()


def encode_real_or_complex(M, field):
    A = np.asarray(M, dtype=complex)
    return A.real.tolist() if field == "real" else encode(A)


def decode(value, field: str, name: str, ndim: int):
    """Parse a real or [re, im]-encoded array of the given rank."""
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"field {name!r}: not a numeric array ({exc})") from None
    if arr.ndim == ndim + 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == ndim and field == "real":
        return arr.astype(complex)
    raise InvalidInput(
        f"field {name!r}: expected a rank-{ndim} {'real' if field == 'real' else '[re, im]'} array, "
        f"got shape {arr.shape}"
    )


def _scalar(value, name):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise InvalidInput(f"field {name!r}: expected a number or [re, im]")


class SystemFile:
    """Parsed SystemFile document."""

    def __init__(self, doc: dict):
        if not isinstance(doc, dict):
            raise InvalidInput("top level must be a JSON object")
        self.field = doc.get("field", "real")
        if self.field not in ("real", "complex"):
            raise InvalidInput(f"field 'field': expected 'real' or 'complex', got {self.field!r}")
        for key in ("J", "R", "Q", "B"):
            if key not in doc:
                raise InvalidInput(f"missing field {key!r}")
        mats = {k: decode(doc[k], self.field, k, 2) for k in ("J", "R", "Q", "B")}
        n = doc.get("n", mats["J"].shape[0])
        m = doc.get("m", mats["B"].shape[1])
        if mats["J"].shape[0] != n or mats["B"].shape != (n, m):
            raise InvalidInput(f"fields 'n'/'m' ({n}, {m}) do not match the array shapes")
        self.sys: PHSystem = validate(**mats)
        self.S = validate_cost(decode(doc["S"], self.field, "S", 2), m) if doc.get("S") is not None else None
        self.bvp = None
        if doc.get("bvp") is not None:
            b = doc["bvp"]
            try:
                self.bvp = {
                    "x0": decode(b["x0"], self.field, "bvp.x0", 1),
                    "x1": decode(b["x1"], self.field, "bvp.x1", 1),
                    "t0": float(b.get("t0", 0.0)),
                    "t1": float(b["t1"]),
                }
            except KeyError as exc:
                raise InvalidInput(f"field 'bvp': missing {exc}") from None
        opts = doc.get("options") or {}
        self.options = {
            "tol_rel": float(opts.get("tol_rel", TOL_REL)),
            "omega_grid_size": opts.get("omega_grid_size"),
            "mu_hint": None if opts.get("mu_hint") is None else _scalar(opts["mu_hint"], "options.mu_hint"),
            "grid_points": int(opts.get("grid_points", 1001)),
        }

    @classmethod
    def load(cls, path) -> "SystemFile":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidInput(f"cannot read {path}: {exc.strerror}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls(doc)


def system_document(sys: PHSystem, S=None, bvp=None, options=None) -> dict:
    field = "real" if sys.is_real and (S is None or not np.any(np.imag(S))) else "complex"
    doc = {"field": field, "n": sys.n, "m": sys.m}
    for key in ("J", "R", "Q", "B"):
        doc[key] = encode_real_or_complex(getattr(sys, key), field)
    if S is not None:
        doc["S"] = encode_real_or_complex(S, field)
    if bvp is not None:
        doc["bvp"] = {
            "x0": encode_real_or_complex(bvp["x0"], field),
            "x1": encode_real_or_complex(bvp["x1"], field),
            "t0": bvp["t0"],
            "t1": bvp["t1"],
        }
    if options:
        doc["options"] = options
    return doc


# ---------------------------------------------------------------------------
# commands


def _write_json(obj, path):
    text = json.dumps(obj, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _options(sf: SystemFile, args):
    opts = dict(sf.options)
    if getattr(args, "tol", None) is not None:
        opts["tol_rel"] = args.tol
    if getattr(args, "omega_grid", None) is not None:
        opts["omega_grid_size"] = args.omega_grid
    if getattr(args, "mu", None) is not None:
        try:
            opts["mu_hint"] = complex(args.mu.replace(" ", "").replace("i", "j"))
        except ValueError:
            raise InvalidInput(f"--mu: cannot parse {args.mu!r} as a complex number") from None
    if getattr(args, "grid", None) is not None:
        opts["grid_points"] = args.grid
    return opts


def cmd_analyze(args) -> int:
    sf = SystemFile.load(args.input)
    opts = _options(sf, args)
    report = full_report(sf.sys, sf.S, opts["tol_rel"], opts["omega_grid_size"], mu=opts["mu_hint"])
    doc = report.to_dict()
    if report.regular:
        mu = report.witness_mu
        print(f"regular, index {report.kronecker_index}, witness mu = {mu.real:.6g}{mu.imag:+.6g}i, "
              f"witness omega = {report.witness_omega:.6g}")
    else:
        print("singular; run `phsoc regularize` to obtain a rank-minimal cost weight S")
    for name, verdict in report.criteria.items():
        print(f"  {name:18s} {verdict.value}")
    print(f"  index_three_flag   {report.index_three_flag}")
    for note in report.notes:
        print(f"  note: {note}")
    if args.json_out:
        _write_json(doc, args.json_out)
    return EXIT_OK if report.regular else EXIT_SINGULAR


def cmd_regularize(args) -> int:
    sf = SystemFile.load(args.input)
    opts = _options(sf, args)
    res = rank_minimal_S(sf.sys, scale=args.scale, tol=opts["tol_rel"])
    doc = {
        "S_min": encode(res.S_min),
        "rank": res.rank,
        "scale": res.scale,
        "omega_used": res.omega_used,
        "V_dim": res.V_dim,
        "sampled_dims": {f"{w:.17g}": d for w, d in res.sampled_dims.items()},
        "spot_check_passed": res.spot_check_passed,
        "certificate": res.certificate.to_dict(),
    }
    print(f"rank-minimal S has rank {res.rank}; perturbed pencil regular: {res.certificate.regular}")
    _write_json(doc, args.json_out)
    return EXIT_OK


def _csv_rows(sol):
    n, m = sol.dd.n, sol.dd.sys.m
    header = ["t"]
    for name, k in (("lambda", n), ("x", n), ("u", m)):
        for i in range(1, k + 1):
            header += [f"re_{name}{i}", f"im_{name}{i}"]
    rows = []
    for j, t in enumerate(sol.t):
        row = [t]
        for arr in (sol.lam, sol.x, sol.u):
            for v in arr[j]:
                row += [v.real, v.imag]
        rows.append(row)
    return header, rows


def _objective(sys_, S, sol):
    try:
        return objective_value(sys_, S, sol.t, sol.x, sol.u)
    except InvalidInput:  # complex optimal control for a real system
        return None


def cmd_solve(args) -> int:
    sf = SystemFile.load(args.input)
    if sf.bvp is None:
        raise InvalidInput("the input file has no 'bvp' block")
    opts = _options(sf, args)
    dd = build_drazin_data(sf.sys, sf.S, opts["mu_hint"], opts["tol_rel"])
    b = sf.bvp
    sol = solve_bvp(dd, b["x0"], b["x1"], b["t0"], b["t1"], grid=opts["grid_points"])
    summary = {
        "path": sol.path,
        "mu": [dd.mu.real, dd.mu.imag],
        "lambda0": encode(sol.lambda0),
        "feasibility_residual": sol.residual,
        "nonuniqueness_dim": sol.nonuniqueness_dim,
        "objective_value": _objective(sf.sys, dd.S, sol),
        "energy_balance_residual": energy_balance_residual(sf.sys, sol.t, sol.x, sol.u),
        "dae_residual": sol.dae_residual,
        "feedback_K": encode(dd.feedback),
        "generator": encode(dd.generator),
        "notes": sol.notes,
    }
    print(f"solvable (path {sol.path}); lambda0 = {np.array2string(sol.lambda0, precision=6)}")
    if sol.path == "B":
        print("  lambda block of the flow is singular; solved by least squares")
    if args.csv_out:
        header, rows = _csv_rows(sol)
        with open(args.csv_out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows([[f"{v:.17g}" for v in row] for row in rows])
    _write_json(summary, args.json_out)
    return EXIT_OK


def cmd_demo(args) -> int:
    bvp = None
    if args.name == "mech":
        ell = args.l
        d = args.d
        sys_ = models.mechanical(np.eye(ell), d * np.eye(ell), np.eye(ell))
        if ell == 1:
            bvp = {"x0": np.array([1.0, 0.0]), "x1": np.array([1.0, 1.0]), "t0": 0.0, "t1": 1.0}
    elif args.name == "heat":
        sys_ = models.heat1d(args.n, args.kappa)
    elif args.name == "ex52":
        sys_ = models.example52()
    elif args.name == "ex53":
        sys_ = models.example53()
    else:  # pragma: no cover - argparse restricts the choices
        raise InvalidInput(f"unknown demo {args.name!r}")
    _write_json(system_document(sys_, bvp=bvp), args.json_out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phsoc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("input", help="SystemFile JSON")
        p.add_argument("--tol", type=float, help="relative rank tolerance")
        p.add_argument("--omega-grid", type=int, help="number of omega samples")
        p.add_argument("--json-out", help="write the machine-readable result here")
        p.add_argument("--mu", help="shift, e.g. 2j or 1+0.5j")

    p = sub.add_parser("analyze", help="regularity report of the optimality pencil")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("regularize", help="rank-minimal cost weight S")
    common(p)
    p.add_argument("--scale", type=float, default=1.0, help="multiply S_min by this factor")
    p.set_defaults(func=cmd_regularize)

    p = sub.add_parser("solve", help="optimal trajectory for the bvp block")
    common(p)
    p.add_argument("--grid", type=int, help="number of time samples")
    p.add_argument("--csv-out", help="write the sampled trajectory here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("demo", help="write a built-in model as a SystemFile")
    p.add_argument("name", choices=["mech", "heat", "ex52", "ex53"])
    p.add_argument("--n", type=int, default=5, help="heat: number of nodes")
    p.add_argument("--kappa", type=float, default=1.0, help="heat: diffusivity")
    p.add_argument("--l", type=int, default=1, help="mech: degrees of freedom")
    p.add_argument("--d", type=float, default=1.0, help="mech: damping")
    p.add_argument("--json-out", help="output path (default stdout)")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SingularPencil as exc:
        print(f"error: {exc}; run `phsoc regularize` first", file=sys.stderr)
        return EXIT_SINGULAR
    except NoOptimalTrajectory as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvalidInput as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalFailure, MuSearchExhausted, SpectrumClash) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PhsocError as exc:  # pragma: no cover - every subclass is handled above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
