"""Seeded random corpora of bodies and the inequality suite run over them.

Each case draws its own generator from ``(seed, case_index)`` so results do
not depend on how cases are distributed over worker processes.
"""

from __future__ import annotations

import csv
import functools
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import special_ortho_group

from . import inequality_lab as il
from .body_geometry import SupportField, ball, ellipsoid
from .errors import NotConvex, NotPositive
from .hbm_spectrum import assemble, lambda2, renormalized_linear
from .spherical_basis import make_domain

log = logging.getLogger(__name__)

__all__ = [
    "CorpusConfig",
    "CorpusResult",
    "random_body",
    "draw_case",
    "run_case",
    "run_corpus",
    "equality_witnesses",
    "write_csv",
    "num_workers",
    "CSV_FIELDS",
]

CSV_FIELDS = ["case", "dim", "name", "lhs", "rhs", "residual", "tolerance", "verdict"]
KINDS = ("ball", "ellipsoid", "perturbed")


def default_lmax(n: int) -> int:
    return 32 if n == 2 else 12


@dataclass
class CorpusConfig:
    dim: int = 3
    lmax: int | None = None
    size: int = 200
    seed: int = 0
    amplitude: float = 0.2
    tol: float | None = None
    workers: int | None = None

    @property
    def cutoff(self) -> int:
        return self.lmax or default_lmax(self.dim)


@dataclass
class CorpusResult:
    rows: list
    rejections: list = field(default_factory=list)

    @property
    def violations(self) -> list:
        return [r for r in self.rows if r["verdict"] == "violated"]


@functools.lru_cache(maxsize=8)
def _domain(n, lmax):
    return make_domain(n, lmax)


def num_workers(requested: int | None = None) -> int:
    """Worker count, capped by the HBM_NUM_THREADS environment variable."""
    cap = os.environ.get("HBM_NUM_THREADS")
    w = requested or os.cpu_count() or 1
    if cap:
        w = min(w, max(1, int(cap)))
    return max(1, w)


def random_body(domain, rng: np.random.Generator, kind: str, amplitude: float = 0.2,
                symmetric: bool = False) -> SupportField:
    """Random ball, ellipsoid or perturbed unit ball.

    For perturbed balls the amplitude is the sup-norm of h - 1 (drawn
    uniformly from (0, amplitude]); degrees 1..3 are used, only degree 2 when
    ``symmetric``.
    """
    n = domain.n
    if kind == "ball":
        r = rng.uniform(0.6, 1.5)
        c = None if symmetric else 0.3 * r * rng.uniform(-1, 1, n) / np.sqrt(n)
        return ball(domain, r, c)
    if kind == "ellipsoid":
        axes = rng.uniform(0.75, 1.35, n)
        rot = special_ortho_group.rvs(n, random_state=rng)
        c = None if symmetric else 0.2 * rng.uniform(-1, 1, n) / np.sqrt(n)
        return ellipsoid(domain, axes, rot, c)
    if kind == "perturbed":
        degrees = (2,) if symmetric else (1, 2, 3)
        mask = np.isin(domain.degrees, degrees)
        coeffs = np.zeros(domain.basis_size)
        coeffs[mask] = rng.standard_normal(mask.sum())
        g = domain.synth(coeffs)
        amp = rng.uniform(0.0, amplitude) or amplitude
        coeffs *= amp / np.abs(g).max()
        coeffs[0] += np.sqrt(domain.area)  # + h = 1
        return SupportField(domain, coeffs)
    raise ValueError(f"unknown kind {kind!r}")


def draw_case(cfg: CorpusConfig, index: int):
    """Bodies (K, L, L2) for one case plus the list of rejected draws."""
    rng = np.random.default_rng([cfg.seed, index])
    d = _domain(cfg.dim, cfg.cutoff)
    symmetric = rng.random() < 1.0 / 3.0
    bodies, rejected = [], []
    for role in ("K", "L", "L2"):
        while True:
            kind = KINDS[rng.integers(len(KINDS))]
            try:
                bodies.append(random_body(d, rng, kind, cfg.amplitude, symmetric and role != "L2"))
                break
            except (NotConvex, NotPositive) as exc:
                rejected.append({"case": index, "role": role, "kind": kind, "reason": str(exc)})
    return bodies, symmetric, rejected


def case_reports(K, L, L2, symmetric=False, tol=None) -> list:
    """Every applicable inequality on one (K, L, L2) triple."""
    n = K.n
    lam2 = lambda2(K)
    f = L.jet / K.jet
    C = () if n == 2 else (L2,)
    out = [
        il.local_bm(K, il.project_mean_free(K, f), tol),
        il.local_af((L,), il.project_mean_free(L, K.jet / L.jet), tol),
        il.alexandrov_fenchel(K, f, C, tol),
        il.spectral_gap_ineq(K, f, lam2, tol),
        il.reverse_ineq(K, f, lam2, tol),
        il.stability_bm(K, f, lam2, tol),
        il.minkowski_second_stability(K, L, lam2, tol),
        il.ratio_bm_stability(K, L, L2, lam2, tol),
        *il.xk_inequality(K, lam2, tol),
    ]
    if symmetric:
        out.append(il.symmetric_stability(K, L, tol=tol))
    if n == 2:
        out.append(il.heintze_karcher_planar(K, L, lam2, tol))
    return out


def run_case(cfg: CorpusConfig, index: int):
    (K, L, L2), symmetric, rejected = draw_case(cfg, index)
    rows = [
        {
            "case": index, "dim": cfg.dim, "name": r.name, "lhs": r.lhs, "rhs": r.rhs,
            "residual": r.residual, "tolerance": r.tolerance, "verdict": r.verdict,
        }
        for r in case_reports(K, L, L2, symmetric, cfg.tol)
    ]
    return rows, rejected


def _run_one(args):
    return run_case(*args)


def run_corpus(cfg: CorpusConfig) -> CorpusResult:
    workers = num_workers(cfg.workers)
    jobs = [(cfg, i) for i in range(cfg.size)]
    if workers == 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, jobs, chunksize=4))
    rows, rejections = [], []
    for r, rej in results:
        rows.extend(r)
        rejections.extend(rej)
    for rej in rejections:
        log.info("rejected %s body for case %d: %s", rej["kind"], rej["case"], rej["reason"])
    return CorpusResult(rows, rejections)


def write_csv(rows, path_or_file) -> None:
    """CSV summary with floats at 17 significant digits."""

    def fmt(v):
        return format(v, ".17g") if isinstance(v, float) else v

    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: fmt(row[k]) for k in CSV_FIELDS})
    finally:
        if own:
            fh.close()


def equality_witnesses(n: int, lmax: int | None = None) -> list:
    """Reports on the characterized equality cases; each must read 'equality'.

    Witnesses: renormalized linear functions (local BM/AF), c + l_v, computed
    lambda_2 eigenfunctions, homothetic pairs, an origin-centred ellipsoid, a
    symmetric pair L = cK and (planar) a disk against the unit ball.
    """
    d = _domain(n, lmax or default_lmax(n))
    rng = np.random.default_rng(12345)
    K = random_body(d, rng, "perturbed", 0.15)
    K1 = random_body(d, rng, "perturbed", 0.15)
    Ks = random_body(d, rng, "perturbed", 0.15, symmetric=True)
    v = np.array([0.3, -0.2, 0.1][:n])
    B = ball(d)
    ell = renormalized_linear(K, v).jet
    P = assemble(K)
    lam, vec = lambda2(P, return_vector=True)
    eig = P.trial_jet(vec)
    lamB, vecB = lambda2(assemble(B), return_vector=True)
    eigB = assemble(B).trial_jet(vecB)
    const = ell * 0.0 + 0.7
    C = () if n == 2 else (K1,)
    out = [
        il.local_bm(K, ell),
        il.local_af((K1,), renormalized_linear(K1, v).jet),
        il.alexandrov_fenchel(K, const + ell, C),
        il.spectral_gap_ineq(K, eig, lam),
        il.stability_bm(K, const + ell + eig, lam),
        il.stability_bm(K, const + ell, lam),
        il.reverse_ineq(B, eigB, lamB),
        il.reverse_ineq(K, const, lam),
        il.minkowski_second_stability(K, (2.0 * K).translate(v), lam),
        il.ratio_bm_stability(K, K1, (1.5 * K1).translate(v), lam),
        il.symmetric_stability(Ks, 1.7 * Ks),
        il.xk_inequality(ellipsoid(d, [1.15, 1.0, 0.9][:n]))[0],
        il.xk_inequality(B)[1],
    ]
    if n == 2:
        out.append(il.heintze_karcher_planar(B, ball(d, 1.3, [0.2, -0.1])))
    return out
