"""Command line front end: ``hbm <subcommand> ...``.

Exit codes: 0 success, 1 usage, 2 invalid input, 3 numerical failure,
4 inequality violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import inequality_lab as il
from .body_geometry import (
    _lmax_from_size,
    body_from_dict,
    body_to_dict,
    isotropy_defect,
    s2_isotropize,
)
from .corpus import CorpusConfig, default_lmax, run_corpus, write_csv
from .errors import (
    DomainError,
    MaxIterExceeded,
    NewtonDiverged,
    NotConvex,
    NotPositive,
    NotSymmetric,
    MeanNotZero,
    SolverError,
    WrongDimension,
)
from .hbm_spectrum import spectral_report
from .minkowski_solver import classify_planar, save_profile_csv, solve_sphere, sphere_initial
from .spherical_basis import make_domain

log = logging.getLogger("hbmlab")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC, EXIT_VIOLATION = 0, 1, 2, 3, 4

INPUT_ERRORS = (DomainError, NotPositive, NotConvex, NotSymmetric, MeanNotZero, WrongDimension,
                OSError, json.JSONDecodeError, KeyError, TypeError, ValueError)
NUMERIC_ERRORS = (SolverError, NewtonDiverged, MaxIterExceeded, np.linalg.LinAlgError,
                  FloatingPointError)


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    dim: int | None
    lmax: int | None
    tol: float | None
    fmt: str
    seed: int
    out: str | None
    plot: bool

    def __post_init__(self):
        if self.lmax is not None and self.lmax < 4:
            raise UsageError("--lmax must be at least 4")
        if self.dim is not None and self.dim not in (2, 3):
            raise UsageError("--dim must be 2 or 3")

    @classmethod
    def from_args(cls, args):
        fmt = args.format or ("csv" if args.command == "corpus" else "json")
        return cls(args.dim, args.lmax, args.tol, fmt, args.seed, args.out, not args.no_plot)

    @property
    def figure_path(self):
        return None if (self.out is None or not self.plot) else Path(self.out).with_suffix(".png")


# -- output helpers ------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return v


def _emit(cfg: RunConfig, payload, rows=None, fields=None):
    """Write JSON (payload) or CSV (rows) to --out or stdout."""
    if cfg.fmt == "csv" and rows is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
        text = buf.getvalue()
    else:
        text = json.dumps(payload, indent=1, default=_json_default) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _plot(cfg, fn, *args):
    path = cfg.figure_path
    if path is not None:
        fn(*args, path)
        log.info("figure written to %s", path)


# -- body loading -------------------------------------------------------------


def _read_definition(path):
    try:
        with open(path) as fh:
            definition = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from None
    if not isinstance(definition, dict):
        raise InputError(f"{path}: body definition must be a JSON object")
    return definition


def _native_lmax(definition):
    if definition.get("kind") == "coeffs" and "coeffs" in definition:
        return _lmax_from_size(int(definition["dim"]), len(definition["coeffs"]))
    return definition.get("lmax")


def load_bodies(paths, cfg: RunConfig):
    """Load body files onto one common domain."""
    definitions = [_read_definition(p) for p in paths]
    try:
        dims = {int(s["dim"]) for s in definitions}
    except (KeyError, TypeError, ValueError):
        raise InputError("every body needs an integer 'dim'") from None
    if len(dims) != 1:
        raise InputError("bodies have different dimensions")
    n = dims.pop()
    if n not in (2, 3):
        raise InputError(f"unsupported dimension {n}")
    if cfg.dim is not None and cfg.dim != n:
        raise InputError(f"--dim {cfg.dim} does not match body dimension {n}")
    natives = [L for L in map(_native_lmax, definitions) if L]
    L = cfg.lmax or (max(natives) if natives else default_lmax(n))
    d = make_domain(n, int(L))
    try:
        return [body_from_dict(s, domain=d) for s in definitions]
    except (DomainError, NotPositive, NotConvex, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid body: {exc}") from None


# -- subcommands ----------------------------------------------------------------


def cmd_spectrum(args, cfg):
    from .plotting import plot_spectrum

    (K,) = load_bodies([args.body], cfg)
    rep = spectral_report(K, args.k, trial=args.trial)
    rows = [(i, lam, res) for i, (lam, res) in enumerate(zip(rep["eigenvalues"], rep["residuals"]))]
    _emit(cfg, rep, rows, ["index", "eigenvalue", "residual"])
    _plot(cfg, plot_spectrum, rep)
    return EXIT_OK


def _f_of(K, L):
    return L.jet / K.jet


CHECKS = {
    # name: (arity, callable(bodies, tol) -> list of reports)
    "local-bm": ((2,), lambda b, t: [il.local_bm(b[0], il.project_mean_free(b[0], _f_of(*b)), t)]),
    "local-af": ((2,), lambda b, t: [il.local_af((b[0],), il.project_mean_free(b[0], _f_of(*b)), t)]),
    "alexandrov-fenchel": ((2, 3), lambda b, t: [il.alexandrov_fenchel(b[0], _f_of(b[0], b[1]), b[2:], t)]),
    "spectral-gap": ((2,), lambda b, t: [il.spectral_gap_ineq(b[0], _f_of(*b), tol=t)]),
    "reverse": ((2,), lambda b, t: [il.reverse_ineq(b[0], _f_of(*b), tol=t)]),
    "stability-bm": ((2,), lambda b, t: [il.stability_bm(b[0], _f_of(*b), tol=t)]),
    "minkowski-second": ((2,), lambda b, t: [il.minkowski_second_stability(*b, tol=t)]),
    "symmetric": ((2,), lambda b, t: [il.symmetric_stability(*b, tol=t)]),
    "ratio-bm": ((3,), lambda b, t: [il.ratio_bm_stability(*b, tol=t)]),
    "xk": ((1,), lambda b, t: list(il.xk_inequality(b[0], tol=t))),
    "heintze-karcher": ((2,), lambda b, t: [il.heintze_karcher_planar(*b, tol=t)]),
}


def cmd_check(args, cfg):
    from .plotting import plot_check

    arity, fn = CHECKS[args.inequality]
    if len(args.bodies) not in arity:
        raise UsageError(
            f"{args.inequality} takes {' or '.join(map(str, arity))} body files, got {len(args.bodies)}"
        )
    bodies = load_bodies(args.bodies, cfg)
    if args.inequality == "alexandrov-fenchel" and len(bodies) != bodies[0].n:
        raise UsageError(f"alexandrov-fenchel in R^{bodies[0].n} takes {bodies[0].n} bodies")
    reports = fn(bodies, cfg.tol)
    payload = [r.to_dict() for r in reports]
    rows = [[r.name, r.lhs, r.rhs, r.residual, r.tolerance, r.verdict] for r in reports]
    _emit(cfg, payload if len(payload) > 1 else payload[0], rows,
          ["name", "lhs", "rhs", "residual", "tolerance", "verdict"])
    _plot(cfg, plot_check, reports)
    return EXIT_VIOLATION if any(r.verdict == "violated" for r in reports) else EXIT_OK


def cmd_classify(args, cfg):
    from .plotting import plot_classification

    if args.p >= -2:
        raise InputError("classification needs p < -2")
    res = classify_planar(args.p)
    found, predicted = res["found"], res["predicted"]
    print(f"p = {args.p:g}: found k = {found}, predicted {{k : 3 <= k < sqrt(2-p)}} = {predicted}",
          file=sys.stderr)
    sols = [s for k in sorted(res["solutions"]) for s in res["solutions"][k]]
    payload = {
        "p": args.p,
        "found": found,
        "predicted": predicted,
        "agrees": found == predicted,
        "branches": [list(b) for b in res["branches"]],
        "solutions": [s.to_dict() for s in sols],
    }
    rows = [[s.k, s.h0, s.h_min, s.residual, s.end_slope] for s in sols]
    _emit(cfg, payload, rows, ["k", "h0", "h_min", "residual", "end_slope"])
    if cfg.out:
        stem = Path(cfg.out).with_suffix("")
        for s in sols:
            save_profile_csv(s, f"{stem}_profile_k{s.k}.csv")
    _plot(cfg, plot_classification, res)
    return EXIT_OK


def cmd_solve(args, cfg):
    from .plotting import plot_newton

    n = cfg.dim or 3
    d = make_domain(n, cfg.lmax or default_lmax(n))
    if args.init_file:
        (init,) = load_bodies([args.init_file], RunConfig(n, d.lmax, None, "json", 0, None, False))
    else:
        try:
            init = sphere_initial(d, args.init, args.eps, args.degree, args.order)
        except (DomainError, NotConvex, NotPositive) as exc:
            raise InputError(str(exc)) from None
    rep = solve_sphere(args.p, init, tol=cfg.tol or 1e-13)
    payload = rep.to_dict()
    payload["sup_distance_to_ball"] = float(np.abs(rep.body.values - 1.0).max())
    rows = [[i, r] for i, r in enumerate(rep.history)]
    _emit(cfg, payload, rows, ["iteration", "residual"])
    _plot(cfg, lambda hist, path: plot_newton(hist, path, f"p = {args.p:g}"), rep.history)
    return EXIT_OK


def cmd_isotropize(args, cfg):
    from .plotting import plot_boundaries

    (K,) = load_bodies([args.body], cfg)
    before = isotropy_defect(K)
    T, iso = s2_isotropize(K, tol=cfg.tol or 1e-8)
    payload = {
        "T": T.tolist(),
        "defect_before": before,
        "defect_after": isotropy_defect(iso),
        "body": body_to_dict(iso),
    }
    rows = [list(r) for r in T]
    _emit(cfg, payload, rows, [f"T{j}" for j in range(K.n)])
    _plot(cfg, plot_boundaries, [K, iso], ["input", "S2-isotropic image"])
    return EXIT_OK


def cmd_corpus(args, cfg):
    from .plotting import plot_corpus

    n = cfg.dim or 3
    cc = CorpusConfig(dim=n, lmax=cfg.lmax, size=args.size, seed=cfg.seed,
                      amplitude=args.amplitude, tol=cfg.tol, workers=args.workers)
    res = run_corpus(cc)
    if cfg.fmt == "csv":
        if cfg.out:
            write_csv(res.rows, cfg.out)
        else:
            write_csv(res.rows, sys.stdout)
    else:
        _emit(cfg, {"config": vars(cc), "rows": res.rows, "rejections": res.rejections})
    print(f"{len(res.rows)} reports, {len(res.violations)} violations, "
          f"{len(res.rejections)} rejected draws", file=sys.stderr)
    _plot(cfg, plot_corpus, res.rows)
    return EXIT_VIOLATION if res.violations else EXIT_OK


# -- parser -------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", type=int, help="ambient dimension (2 or 3)")
    common.add_argument("--lmax", type=int, help="harmonic cutoff degree (>= 4)")
    common.add_argument("--tol", type=float, help="tolerance override")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized corpora")
    common.add_argument("--out", help="output file (stdout if omitted)")
    common.add_argument("--format", choices=("json", "csv"),
                        help="output format (default: csv for corpus, json otherwise)")
    common.add_argument("--no-plot", action="store_true", help="do not write a figure next to --out")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="hbm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("spectrum", parents=[common], help="eigenvalues of -L_K")
    s.add_argument("body")
    s.add_argument("-k", type=int, default=10, help="number of eigenvalues")
    s.add_argument("--trial", choices=("hilbert", "plain"), default="hilbert")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("check", parents=[common], help="evaluate an inequality")
    s.add_argument("inequality", choices=sorted(CHECKS))
    s.add_argument("bodies", nargs="+")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("classify", parents=[common], help="planar k-fold solution branches")
    s.add_argument("p", type=float)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("solve", parents=[common], help="Newton solve of h^{1-p} det D^2h = 1")
    s.add_argument("p", type=float)
    s.add_argument("--init", choices=("ball", "perturbed", "ellipsoid"), default="perturbed")
    s.add_argument("--init-file", help="body file used as initial guess")
    s.add_argument("--eps", type=float, default=0.1, help="perturbation amplitude")
    s.add_argument("--degree", type=int, default=2)
    s.add_argument("--order", type=int, default=0)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("isotropize", parents=[common], help="S_2-isotropic SL(n) image")
    s.add_argument("body")
    s.set_defaults(func=cmd_isotropize)

    s = sub.add_parser("corpus", parents=[common], help="inequality suite on a random corpus")
    s.add_argument("--size", type=int, default=200)
    s.add_argument("--amplitude", type=float, default=0.2)
    s.add_argument("--workers", type=int, help="worker processes (capped by HBM_NUM_THREADS)")
    s.set_defaults(func=cmd_corpus)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error reported by the parser
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.from_args(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"hbm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"hbm: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NUMERIC_ERRORS as exc:
        print(f"hbm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except INPUT_ERRORS as exc:
        print(f"hbm: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
