"""Solvers for the isotropic L_p Minkowski equation h^{1-p} det(D^2 h) = 1.

Planar branches are located with the half-period ("time") map of the
conservative ODE h'' = h^{p-1} - h: a solution started at an extremum
h(0) = a, h'(0) = 0 next has h' = 0 after time T(a), and it closes up into a
curve with exact k-fold symmetry iff T(a) = pi/k. On the sphere the equation
is solved by damped Newton iteration on Galerkin coefficients.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .body_geometry import (
    SupportField,
    ball,
    centroid,
    gauss_map_inverse,
    isotropy_defect,
    measure,
    mixed_discriminant_partial,
)
from .errors import DomainError, NewtonDiverged, NotConvex, NotConvexDuringIteration, NotPositive
from .hbm_spectrum import lambda2
from .spherical_basis import SphericalDomain, make_domain

__all__ = [
    "PlanarSolution",
    "SolveReport",
    "time_map",
    "solve_planar_branch",
    "classify_planar",
    "predicted_branches",
    "planar_to_support",
    "pde_residual",
    "planar_residual",
    "galerkin_residual",
    "galerkin_jacobian",
    "jacobian_check",
    "solve_sphere",
    "check_uniqueness_hypotheses",
    "proof_identities",
    "save_profile_csv",
    "DEFAULT_WINDOW",
]

DEFAULT_WINDOW = (0.05, 20.0, 400)
GUARD_BAND = 1e-6
_RTOL, _ATOL = 1e-13, 1e-15
_SCAN_RTOL, _SCAN_ATOL = 1e-10, 1e-12


# -- planar shooting ------------------------------------------------------


def _rhs(p):
    def f(t, y):
        return [y[1], y[0] ** (p - 1.0) - y[0]]

    return f


def _half_period(p, a, rtol=_RTOL, atol=_ATOL):
    """Return (T, h(T)) for the orbit started at the extremum h(0) = a."""
    if a == 1.0:
        return math.pi / math.sqrt(2.0 - p), 1.0

    def event(t, y):
        return y[1]

    event.terminal = True
    # starting at a maximum h' first decreases, so the next zero is an upcrossing
    event.direction = 1.0 if a > 1.0 else -1.0
    sol = solve_ivp(
        _rhs(p), (0.0, 4.0 * math.pi), [a, 0.0], method="DOP853",
        rtol=rtol, atol=atol, events=event,
    )
    if sol.t_events[0].size == 0:
        raise NewtonDiverged(f"orbit from h(0)={a} did not return within 4 pi")
    return float(sol.t_events[0][0]), float(sol.y_events[0][0][0])


def time_map(p: float, a) -> np.ndarray:
    """Half-period T(a) of the orbit of h'' = h^{p-1} - h with h(0)=a, h'(0)=0.

    As a -> 1 the map tends to pi / sqrt(2 - p), the linearized value.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    return np.array([_half_period(p, x, _SCAN_RTOL, _SCAN_ATOL)[0] for x in a])


def _shoot(p, a, t_end):
    sol = solve_ivp(_rhs(p), (0.0, t_end), [a, 0.0], method="DOP853", rtol=_RTOL, atol=_ATOL)
    return float(sol.y[0, -1]), float(sol.y[1, -1])


def _shoot_slope(p, a, t_end):
    return _shoot(p, a, t_end)[1]


def _refine(p, lo, hi, t_end):
    return brentq(lambda x: _shoot_slope(p, x, t_end), lo, hi, xtol=1e-15, rtol=1e-15)


def _polish_max(p, a0, t_end):
    """Re-solve for the start value near a0 from the maximum side."""
    for w in (1e-9, 1e-7, 1e-5, 1e-3):
        lo, hi = a0 * (1 - w), a0 * (1 + w)
        if _shoot_slope(p, lo, t_end) * _shoot_slope(p, hi, t_end) < 0:
            return _refine(p, lo, hi, t_end)
    return a0


@dataclass
class PlanarSolution:
    """k-fold symmetric solution of h^{1-p}(h'' + h) = 1 in the plane.

    ``h0`` is the maximum of h (attained at theta = 0); the profile is sampled
    on [0, pi/k] and ``h_min = h(pi/k)``.
    """

    p: float
    k: int
    h0: float
    h_min: float
    theta: np.ndarray
    profile: np.ndarray
    slope: np.ndarray
    residual: float
    end_slope: float
    bracket: tuple = ()
    bracket_slopes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "p": self.p, "k": self.k, "h0": self.h0, "h_min": self.h_min,
            "residual": self.residual, "end_slope": self.end_slope,
            "bracket": list(self.bracket), "bracket_slopes": list(self.bracket_slopes),
        }


def _periodic_samples(theta, h, dh):
    """Extend samples on [0, pi/k] (both ends included) to one full period."""
    h_full = np.concatenate([h, h[-2:0:-1]])
    dh_full = np.concatenate([dh, -dh[-2:0:-1]])
    return h_full, dh_full


def _profile(p, k, a, samples):
    half = math.pi / k
    theta = np.linspace(0.0, half, samples + 1)
    sol = solve_ivp(
        _rhs(p), (0.0, half), [a, 0.0], method="DOP853", rtol=_RTOL, atol=_ATOL,
        t_eval=theta,
    )
    h, dh = sol.y
    h_full, dh_full = _periodic_samples(theta, h, dh)
    # spectral derivative of the odd periodic slope; one differentiation only
    m = h_full.size
    freq = np.fft.rfftfreq(m, d=1.0 / m) * k  # angular wave numbers
    modes = np.fft.rfft(dh_full)
    d2h = np.fft.irfft(1j * freq * modes, n=m)
    res = np.abs(d2h + h_full - h_full ** (p - 1.0))
    tail = np.abs(modes[-max(4, m // 16):]).max() / max(np.abs(modes).max(), 1e-300)
    return theta, h, dh, float(res.max()), float(tail)


def solve_planar_branch(p: float, k: int, search_window=DEFAULT_WINDOW, *, samples: int = 512,
                        _times=None) -> list:
    """All non-circular k-fold solutions with extremal value in the window.

    The window ``(a_min, a_max, count)`` is scanned at ``count`` seeds split
    over [a_min, 1) and (1, a_max]; sign changes of T(a) - pi/k are refined
    by Brent's method. Starts at a minimum and at a maximum describe the same
    curve (rotated by pi/k), so roots are merged and reported with
    ``h0 = max h``.
    """
    if p >= 0:
        raise DomainError("p must be negative")
    if k < 1:
        raise DomainError("k must be a positive integer")
    seeds, times = _times if _times is not None else _scan(p, search_window)
    target = math.pi / k
    found = []
    for side in (seeds < 1.0, seeds > 1.0):
        a, T = seeds[side], times[side]
        g = T - target
        for i in np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0):
            lo, hi = a[i], a[i + 1]
            root = _refine(p, lo, hi, target)
            other, _ = _shoot(p, root, target)
            hmax = root if root > 1.0 else _polish_max(p, other, target)
            if any(abs(hmax - s.h0) <= 1e-7 * hmax for s in found):
                continue
            hmin = _shoot(p, hmax, target)[0]
            theta, h, dh, res, _ = _profile(p, k, hmax, samples)
            found.append(
                PlanarSolution(
                    p=p, k=k, h0=hmax, h_min=hmin, theta=theta, profile=h, slope=dh,
                    residual=res, end_slope=float(dh[-1]), bracket=(float(lo), float(hi)),
                    bracket_slopes=(_shoot_slope(p, lo, target), _shoot_slope(p, hi, target)),
                )
            )
    return sorted(found, key=lambda s: s.h0)


def _scan(p, window):
    lo, hi, count = window
    below = np.linspace(lo, 1.0, count // 2, endpoint=False)
    above = np.linspace(1.0, hi, count - count // 2 + 1)[1:]
    seeds = np.concatenate([below, above])
    return seeds, time_map(p, seeds)


def predicted_branches(p: float) -> list:
    """Fold numbers k with 3 <= k < sqrt(2 - p)."""
    r = math.sqrt(2.0 - p)
    return [k for k in range(3, math.ceil(r) + 1) if k < r]


def classify_planar(p: float, search_window=DEFAULT_WINDOW) -> dict:
    """Scan k = 3, ..., ceil(sqrt(2-p)) + 1 for non-circular solutions."""
    if p >= -2:
        raise DomainError("classification is for p < -2")
    scan = _scan(p, search_window)
    kmax = math.ceil(math.sqrt(2.0 - p)) + 1
    solutions = {k: solve_planar_branch(p, k, search_window, _times=scan) for k in range(3, kmax + 1)}
    branches = [(k, len(s)) for k, s in solutions.items() if s]
    return {
        "p": p,
        "branches": branches,
        "found": [k for k, _ in branches],
        "predicted": predicted_branches(p),
        "solutions": solutions,
        "time_map": {"a": scan[0], "T": scan[1]},
    }


def planar_to_support(sol: PlanarSolution, lmax: int | None = None, tail_tol: float = 1e-13):
    """Periodically extend a profile and project it onto a circle domain.

    When ``lmax`` is None the smallest cutoff whose discarded Fourier tail
    is below ``tail_tol`` (relative) is used.
    """
    h_full, _ = _periodic_samples(sol.theta, sol.profile, sol.slope)
    m = h_full.size
    modes = np.fft.rfft(h_full) / m
    amp = np.abs(modes)
    amp[1:] *= 2.0
    if lmax is None:
        keep = np.flatnonzero(amp > tail_tol * amp[0])
        lmax = max(int(keep.max()) * sol.k + sol.k, 8)
    d = make_domain(2, lmax)
    theta = np.arctan2(d.nodes[:, 1], d.nodes[:, 0])
    js = np.arange(modes.size)
    use = js * sol.k <= lmax
    vals = np.real(
        modes[use][None, :] * np.exp(1j * np.outer(theta, js[use] * sol.k))
    ) @ np.where(js[use] == 0, 1.0, 2.0)
    K = SupportField(d, d.project(vals))
    K.truncation_residual = float(amp[~use].sum())
    return K


def save_profile_csv(sol: PlanarSolution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "h", "dh"])
        for row in zip(sol.theta, sol.profile, sol.slope):
            w.writerow([format(float(x), ".17g") for x in row])


# -- sphere Newton solver ---------------------------------------------------


def pde_residual(K: SupportField, p: float) -> np.ndarray:
    """Nodal values of h^{1-p} det(D^2 h) - 1."""
    return K.values ** (1.0 - p) * K.det_D2h - 1.0


def planar_residual(K: SupportField, p: float) -> float:
    """max |det(D^2 h) - h^{p-1}| on the nodes.

    Same equation as :func:`pde_residual`, but without the factor h^{1-p},
    which for very negative p amplifies discretization error by up to
    (max h)^{1-p}; this is the form used for the planar ODE residual.
    """
    return float(np.abs(K.det_D2h - K.values ** (p - 1.0)).max())


def galerkin_residual(K: SupportField, p: float) -> np.ndarray:
    return K.domain.project(pde_residual(K, p))


def galerkin_jacobian(K: SupportField, p: float) -> np.ndarray:
    """J_ij = int phi_i [(1-p) h^{-p} det phi_j + h^{1-p} d det(D^2h)[D^2 phi_j]] dmu.

    The derivative of the determinant is (n-1) Q^{ij}(D^2 h, ...) contracted
    with D^2 phi_j.
    """
    d = K.domain
    n = d.n
    A = K.D2
    Qij = mixed_discriminant_partial([A] * (n - 2), m=n - 1, nodes=d.num_nodes)
    B = d.basis_jet
    h = K.values
    ddet = (n - 1) * np.einsum("qab,qabj->qj", Qij, B.hess)
    pointwise = ((1.0 - p) * h ** (-p) * K.det_D2h)[:, None] * B.values + (h ** (1.0 - p))[:, None] * ddet
    return (d.values * d.weights[:, None]).T @ pointwise


def jacobian_check(K: SupportField, p: float, direction=None, steps=(1e-3, 5e-4, 2.5e-4), seed=0):
    """Central-difference errors of the Galerkin Jacobian along ``direction``.

    Returns the error for each step; second-order accuracy shows as a ratio
    of about 4 between consecutive halvings.
    """
    d = K.domain
    if direction is None:
        rng = np.random.default_rng(seed)
        direction = rng.standard_normal(d.basis_size) / d.basis_size
    J = galerkin_jacobian(K, p) @ direction
    errs = []
    for s in steps:
        plus = SupportField(d, K.coeffs + s * direction, check=False)
        minus = SupportField(d, K.coeffs - s * direction, check=False)
        fd = (galerkin_residual(plus, p) - galerkin_residual(minus, p)) / (2 * s)
        errs.append(float(np.linalg.norm(fd - J)))
    return np.array(errs)


@dataclass
class SolveReport:
    body: SupportField
    p: float
    pde_residual: float
    newton_iters: int
    lambda2: float | None
    thresholds: dict
    hypothesis_verdicts: dict
    history: list = field(default_factory=list)
    identities: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "n": self.body.n,
            "lmax": self.body.domain.lmax,
            "coeffs": self.body.coeffs.tolist(),
            "pde_residual": self.pde_residual,
            "newton_iters": self.newton_iters,
            "lambda2": self.lambda2,
            "thresholds": self.thresholds,
            "verdicts": self.hypothesis_verdicts,
            "history": list(self.history),
            "identities": self.identities,
        }


def _try_body(d, coeffs):
    try:
        return SupportField(d, coeffs)
    except (NotPositive, NotConvex):
        return None


def solve_sphere(p: float, initial: SupportField, damping: float = 1.0, tol: float = 1e-13,
                 max_iter: int = 60, max_halvings: int = 30, check: bool = True) -> SolveReport:
    """Damped Newton iteration for h^{1-p} det(D^2 h) = 1.

    Steps are halved (at most ``max_halvings`` times) until the iterate is a
    valid body and the L^2 norm of the Galerkin residual decreases.
    """
    d = initial.domain
    K = initial
    r = galerkin_residual(K, p)
    norm = float(np.linalg.norm(r))
    history = [norm]
    it = 0
    while norm > tol:
        if it >= max_iter:
            raise NewtonDiverged(f"no convergence after {max_iter} iterations (residual {norm:.2e})")
        step = np.linalg.solve(galerkin_jacobian(K, p), -r)
        t = damping
        for _ in range(max_halvings + 1):
            trial = _try_body(d, K.coeffs + t * step)
            if trial is not None:
                r_new = galerkin_residual(trial, p)
                n_new = float(np.linalg.norm(r_new))
                if n_new < norm:
                    break
            t *= 0.5
        else:
            if trial is None:
                raise NotConvexDuringIteration("every damped step left the convex class")
            if np.linalg.norm(step) * t < 1e-15 * np.linalg.norm(K.coeffs):
                break  # stagnated at round-off level
            raise NewtonDiverged(f"no residual decrease along the Newton direction ({norm:.2e})")
        K, r, norm = trial, r_new, n_new
        history.append(norm)
        it += 1
    report = check_uniqueness_hypotheses(K, p) if check else {}
    return SolveReport(
        body=K,
        p=p,
        pde_residual=float(np.abs(pde_residual(K, p)).max()),
        newton_iters=it,
        lambda2=report.get("lambda2"),
        thresholds=report.get("thresholds", {}),
        hypothesis_verdicts=report.get("verdicts", {}),
        history=history,
        identities=proof_identities(K, p),
    )


def _threshold_verdict(lam, thr, in_range, extra_ok=True):
    if thr is None or not in_range:
        return "out_of_range"
    if not extra_ok:
        return "not_met"
    if abs(lam - thr) <= GUARD_BAND:
        return "boundary"
    return "met" if lam > thr else "not_met"


def check_uniqueness_hypotheses(K: SupportField, p: float, lam2: float | None = None,
                                isotropy_tol: float = 1e-6, centroid_tol: float = 1e-8,
                                ball_tol: float = 1e-5) -> dict:
    """Evaluate the hypotheses of the two uniqueness results on a computed body.

    origin-centred result: -2n-1 <= p < -n, centroid at the origin and
    lambda_2 >= (-p-1)/(n-1). S_2-isotropic result: (1-3n^2)/(2n) <= p < -n,
    S_2-isotropy and lambda_2 >= (n-1)/(2n-1+p). When the hypotheses are met
    the body must be the unit ball; this conclusion is checked too.
    """
    n = K.n
    lam = lambda2(K) if lam2 is None else lam2
    t_oc = (-p - 1.0) / (n - 1.0)
    denom = 2.0 * n - 1.0 + p
    t_gen = (n - 1.0) / denom if denom > 0 else None
    cen = float(np.linalg.norm(centroid(K)))
    iso = isotropy_defect(K)
    is_ball = float(np.abs(K.values - 1.0).max())
    res = float(np.abs(pde_residual(K, p)).max())
    v_oc = _threshold_verdict(lam, t_oc, -2 * n - 1 <= p < -n, cen < centroid_tol)
    v_gen = _threshold_verdict(lam, t_gen, (1 - 3 * n * n) / (2 * n) <= p < -n, iso < isotropy_tol)
    verdicts = {"origin_centred": v_oc, "isotropic": v_gen}
    for key, v in list(verdicts.items()):
        if v == "met":
            verdicts[key + "_conclusion"] = "unit_ball" if is_ball < ball_tol else "contradiction"
    return {
        "lambda2": lam,
        "thresholds": {"origin_centred": t_oc, "general": t_gen},
        "centroid_norm": cen,
        "isotropy_defect": iso,
        "sup_distance_to_ball": is_ball,
        "pde_residual": res,
        "verdicts": verdicts,
    }


def proof_identities(K: SupportField, p: float) -> dict:
    """Integral identities satisfied by every solution, as relative residuals.

    ``laplacian``: int h Delta h dV_K + (p+1) int |grad h|^2 dV_K, scaled by
    int h^2 dV_K. ``centroid``: |int X dV_K - (n+p)/(n-1) int grad h dV_K|,
    scaled by int |X| dV_K. Gradients are taken as ambient vectors.
    """
    d = K.domain
    n = d.n
    dV = measure(K, "cone_volume").values
    jet = K.jet
    grad = np.einsum("qai,qi->qa", d.frames, jet.grad)
    X = gauss_map_inverse(K)
    a = d.integrate(K.values * jet.laplacian * dV)
    b = d.integrate(np.sum(grad**2, axis=1) * dV)
    lap = (a + (p + 1.0) * b) / d.integrate(K.values**2 * dV)
    vec = d.integrate(X * dV[:, None]) - (n + p) / (n - 1.0) * d.integrate(grad * dV[:, None])
    cen = np.linalg.norm(vec) / d.integrate(np.linalg.norm(X, axis=1) * dV)
    return {"laplacian": float(lap), "centroid": float(cen)}


def sphere_initial(domain: SphericalDomain, kind: str = "ball", eps: float = 0.1,
                   degree: int = 2, order: int = 0, axes=None) -> SupportField:
    """Shipped initial guesses: ball, ball + eps*Y_{lm}, ellipsoid."""
    from .body_geometry import ellipsoid, perturbed_ball

    if kind == "ball":
        return ball(domain)
    if kind == "perturbed":
        return perturbed_ball(domain, [(degree, order, eps)])
    if kind == "ellipsoid":
        return ellipsoid(domain, axes if axes is not None else [1.25, 1.0, 0.8][: domain.n])
    raise DomainError(f"unknown initial guess {kind!r}")


__all__ += ["sphere_initial"]
