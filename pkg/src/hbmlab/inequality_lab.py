"""Both sides of the spectral and mixed-volume inequalities, evaluated on bodies.

Every function returns an :class:`InequalityReport` oriented so that the
inequality reads ``lhs >= rhs``. Test functions may be scalar fields, support
fields or nodal jets; projections onto the required orthogonal complements
are done internally with the exact dV_K weights.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .body_geometry import (
    SupportField,
    TranslatedField,
    gauss_map_inverse,
    l2_distance,
    measure,
    mixed_volume,
    volume,
)
from .errors import DomainError, MeanNotZero, NotSymmetric, SolverError, WrongDimension
from .hbm_spectrum import (
    _check_extra,
    _jet_of,
    _measure_values,
    apply_operator,
    decompose,
    dirichlet_form,
    lambda1e,
    lambda2,
)
from .spherical_basis import NodalJet

__all__ = [
    "InequalityReport",
    "HomotheticData",
    "homothetic_data",
    "project_mean_free",
    "local_bm",
    "local_af",
    "alexandrov_fenchel",
    "spectral_gap_ineq",
    "reverse_ineq",
    "stability_bm",
    "minkowski_second_stability",
    "symmetric_stability",
    "ratio_bm_stability",
    "xk_inequality",
    "heintze_karcher_planar",
    "REL_TOL",
]

REL_TOL = 1e-7


@dataclass
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    verdict: str
    witnesses: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @classmethod
    def make(cls, name, lhs, rhs, tol=None, witnesses=None, details=None):
        lhs, rhs = float(lhs), float(rhs)
        if tol is None:
            tol = REL_TOL * max(abs(lhs), abs(rhs), 1.0)
        res = lhs - rhs
        if res < -tol:
            verdict = "violated"
        elif abs(res) <= tol:
            verdict = "equality"
        else:
            verdict = "holds"
        return cls(name, lhs, rhs, res, float(tol), verdict, witnesses or {}, details or {})

    @property
    def scale(self) -> float:
        return max(abs(self.lhs), abs(self.rhs), 1.0)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["details"] = {k: _plain(v) for k, v in self.details.items()}
        out["witnesses"] = {k: _plain(v) for k, v in self.witnesses.items()}
        return out


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _int(K, values, dens=None):
    dens = measure(K, "cone_volume").values if dens is None else dens
    return float(K.domain.integrate(np.asarray(values) * dens))


def _ratio(L, K) -> NodalJet:
    return L.jet / K.jet


def project_mean_free(K: SupportField, f, extra=()) -> NodalJet:
    """f minus its dV_K (or dV_C) average."""
    fj = _jet_of(f)
    dens = _measure_values(K, extra)
    return fj - _int(K, fj.values, dens) / float(K.domain.integrate(dens))


def _require_mean_free(K, fj, dens):
    mean = _int(K, fj.values, dens)
    scale = max(_int(K, np.abs(fj.values), dens), 1.0)
    if abs(mean) > 1e-9 * scale:
        raise MeanNotZero(f"int f dV = {mean:.3e}; use project_mean_free first")


def local_bm(K: SupportField, f, tol=None) -> InequalityReport:
    """Local Brunn-Minkowski: Dirichlet form >= int f^2 dV_K for mean-free f."""
    fj = _jet_of(f)
    dens = measure(K, "cone_volume").values
    _require_mean_free(K, fj, dens)
    return InequalityReport.make(
        "local_bm", dirichlet_form(K, fj), _int(K, fj.values**2, dens), tol
    )


def local_af(C, f, tol=None) -> InequalityReport:
    """Mixed version with measure dV_C, C = (K_1, ..., K_{n-2}).

    In dimension 2 the tuple is the single distinguished body.
    """
    C = tuple(C)
    if not C:
        raise DomainError("C must contain the distinguished body")
    K1, extra = C[0], C[1:]
    if len(C) != max(1, K1.n - 2):
        raise DomainError(f"C must have length {max(1, K1.n - 2)} in R^{K1.n}")
    _check_extra(K1, extra)
    fj = _jet_of(f)
    dens = _measure_values(K1, extra)
    _require_mean_free(K1, fj, dens)
    lhs = dirichlet_form(K1, fj, extra=extra)
    return InequalityReport.make("local_af", lhs, _int(K1, fj.values**2, dens), tol)


def alexandrov_fenchel(h: SupportField, f, C=(), tol=None) -> InequalityReport:
    """V(fh, h, C)^2 >= V(fh, fh, C) V(h, h, C)."""
    C = tuple(C)
    if len(C) != h.n - 2:
        raise DomainError(f"C must have length {h.n - 2}")
    fh = _jet_of(f) * h.jet
    a = mixed_volume([fh, h, *C])
    b = mixed_volume([fh, fh, *C], domain=h.domain)
    c = mixed_volume([h, h, *C])
    return InequalityReport.make("alexandrov_fenchel", a * a, b * c, tol)


def _l2(K, fj) -> float:
    return _int(K, fj.values**2)


def _orthogonality_defect(K, ft, f) -> float:
    dens = measure(K, "cone_volume").values
    d = K.domain
    vals = [d.integrate(ft.values * dens)]
    vals += list(d.integrate((ft.values * dens / K.values)[:, None] * d.nodes))
    scale = math.sqrt(max(_l2(K, f), 1e-300) * volume(K))
    return float(np.max(np.abs(vals)) / max(scale, 1e-300))


def spectral_gap_ineq(K: SupportField, f, lam2=None, tol=None) -> InequalityReport:
    """int f(-L_K f) dV_K >= lambda_2 int f^2 dV_K on (E_0 + E_1^K)^perp."""
    lam2 = lambda2(K) if lam2 is None else lam2
    fj = _jet_of(f)
    _, _, ft = decompose(K, fj)
    defect = _orthogonality_defect(K, ft, fj)
    if defect > 1e-9:
        raise SolverError(f"projection onto (E_0 + E_1)^perp failed ({defect:.2e})")
    return InequalityReport.make(
        "spectral_gap_ineq",
        dirichlet_form(K, ft),
        lam2 * _l2(K, ft),
        tol,
        details={"lambda2": lam2},
    )


def _bm_deficit(K, fj):
    """int f(-L f) - int f^2 + (int f)^2 / V, all w.r.t. dV_K."""
    V = volume(K)
    mean = _int(K, fj.values)
    return dirichlet_form(K, fj) - _l2(K, fj) + mean**2 / V, mean, V


def reverse_ineq(K: SupportField, f, lam2=None, tol=None) -> InequalityReport:
    """Reverse local Brunn-Minkowski bound by the squared operator."""
    lam2 = lambda2(K) if lam2 is None else lam2
    fj = _jet_of(f)
    deficit, mean, V = _bm_deficit(K, fj)
    tilde = apply_operator(K, fj, tilde=True)  # L_K f + f
    lhs = (_int(K, tilde**2) - mean**2 / V) / (lam2 - 1.0)
    return InequalityReport.make("reverse_ineq", lhs, deficit, tol, details={"lambda2": lam2})


def stability_bm(K: SupportField, f, lam2=None, tol=None) -> InequalityReport:
    """Stability of local Brunn-Minkowski with the distance to c_f + l_{v_f}."""
    lam2 = lambda2(K) if lam2 is None else lam2
    fj = _jet_of(f)
    deficit, _, _ = _bm_deficit(K, fj)
    c, v, ft = decompose(K, fj)
    return InequalityReport.make(
        "stability_bm",
        deficit,
        (lam2 - 1.0) * _l2(K, ft),
        tol,
        details={"lambda2": lam2, "c_f": c, "v_f": v},
    )


@dataclass
class HomotheticData:
    """Extended homothetic transform c K + v and normalized copy (L - v)/c."""

    c: float
    v: np.ndarray
    K_tilde: TranslatedField
    L_bar: TranslatedField


def homothetic_data(K: SupportField, L: SupportField) -> HomotheticData:
    c, v, _ = decompose(K, _ratio(L, K))
    d = K.domain
    lin = d.linear_coeffs(v)
    return HomotheticData(
        c,
        v,
        TranslatedField(d, c * K.coeffs + lin),
        TranslatedField(d, (L.coeffs - lin) / c),
    )


def _mv(K, L, k):
    """V(K[n-k], L[k])."""
    return mixed_volume([L] * k + [K] * (K.n - k))


def minkowski_second_stability(K: SupportField, L: SupportField, lam2=None, tol=None):
    """Stability of Minkowski's second inequality in the S_2 K distance."""
    lam2 = lambda2(K) if lam2 is None else lam2
    n = K.n
    V, V1, V2 = volume(K), _mv(K, L, 1), _mv(K, L, 2)
    hd = homothetic_data(K, L)
    dist = l2_distance(L, hd.K_tilde, measure(K, "Lp_surface", p=2.0))
    return InequalityReport.make(
        "minkowski_second_stability",
        V1**2 / V - V2,
        (lam2 - 1.0) * dist**2 / n,
        tol,
        details={"lambda2": lam2, "c": hd.c, "v": hd.v, "V": V, "V1": V1, "V2": V2,
                 "distance": dist},
    )


def symmetric_stability(K: SupportField, L: SupportField, lam1e=None, tol=None):
    """Even-spectral-gap bound (1 - 1/lambda_1e) R_K(L) for symmetric K, L."""
    for body in (K, L):
        if not body.is_symmetric():
            raise NotSymmetric("symmetric_stability needs origin-symmetric K and L")
    lam1e = lambda1e(K) if lam1e is None else lam1e
    V, V1, V2 = volume(K), _mv(K, L, 1), _mv(K, L, 2)
    R = _l2(K, _ratio(L, K)) - V2
    return InequalityReport.make(
        "symmetric_stability",
        V1**2 / V - V2,
        (1.0 - 1.0 / lam1e) * R,
        tol,
        details={"lambda1e": lam1e, "R": R},
    )


def ratio_bm_stability(K: SupportField, L1: SupportField, L2: SupportField, lam2=None, tol=None):
    """Stability of the Brunn-Minkowski-type inequality for mixed volume ratios.

    The right-hand side carries the factor V(L1, K[n-1]) V(L2, K[n-1]); this
    is what the L^2 stability bound applied to h_L1/(c1 h_K) - h_L2/(c2 h_K)
    produces, and it makes both sides scale-free.
    """
    lam2 = lambda2(K) if lam2 is None else lam2
    n = K.n
    V = volume(K)
    S = L1 + L2
    A1, A2, AS = _mv(K, L1, 1), _mv(K, L2, 1), _mv(K, S, 1)
    B1, B2, BS = _mv(K, L1, 2), _mv(K, L2, 2), _mv(K, S, 2)
    c1, c2 = A1 / V, A2 / V
    fhat = _ratio(L1, K) * (1.0 / c1) - _ratio(L2, K) * (1.0 / c2)
    mean = _int(K, fhat.values)
    if abs(mean) > 1e-10 * max(1.0, _int(K, np.abs(fhat.values))):
        raise SolverError(f"test function is not mean-free ({mean:.2e})")
    hd1, hd2 = homothetic_data(K, L1), homothetic_data(K, L2)
    dist = l2_distance(hd1.L_bar, hd2.L_bar, measure(K, "Lp_surface", p=2.0))
    lhs = BS / AS - B1 / A1 - B2 / A2
    rhs = A1 * A2 * (lam2 - 1.0) / (n * AS) * (dist / V) ** 2
    return InequalityReport.make(
        "ratio_bm_stability",
        lhs,
        rhs,
        tol,
        details={"lambda2": lam2, "V": V, "A1": A1, "A2": A2, "AS": AS, "distance": dist},
    )


def xk_inequality(K: SupportField, lam2=None, tol=None):
    """Inverse-Gauss-map inequality and its strengthened stability form.

    Returns ``(xk_report, stability_report)``. The vectors v_l solving
    int <x, v_l>/h^2 x dV_K = int <X_K, E_l>/h x dV_K are in the details.
    """
    lam2 = lambda2(K) if lam2 is None else lam2
    n, d = K.n, K.domain
    dV = measure(K, "cone_volume").values
    h = K.values
    X = gauss_map_inverse(K)
    V = volume(K)
    lap = K.jet.laplacian
    curv = _int(K, h * (lap / (n - 1) + h), dV)
    X2 = _int(K, np.sum(X**2, axis=1), dV)
    Xbar = d.integrate(X * dV[:, None])
    spread = X2 - Xbar @ Xbar / V
    x = d.nodes
    M2 = np.einsum("q,qi,qj->ij", d.weights * dV / h**2, x, x)
    rhs_mat = np.einsum("q,ql,qi->il", d.weights * dV / h, X, x)  # column l: int <X,E_l>/h x dV
    vl = np.linalg.solve(M2, rhs_mat).T  # row l is v_l
    proj = _int(K, np.sum((x @ vl.T) ** 2, axis=1) / h**2, dV)
    first = InequalityReport.make("xk_inequality", curv, spread, tol)
    second = InequalityReport.make(
        "xk_stability",
        curv - spread,
        (lam2 - 1.0) * (spread - proj),
        tol,
        details={"lambda2": lam2, "v_l": vl},
    )
    return first, second


def heintze_karcher_planar(K: SupportField, L: SupportField, lam2=None, tol=None):
    """Planar anisotropic Heintze-Karcher versus Minkowski comparison."""
    if K.n != 2:
        raise WrongDimension("heintze_karcher_planar is planar only")
    lam2 = lambda2(K) if lam2 is None else lam2
    d = K.domain
    rho_K = K.D2[:, 0, 0]
    rho_L = L.D2[:, 0, 0]
    VL, V, V1 = volume(L), volume(K), mixed_volume([K, L])
    lhs = 0.5 * d.integrate(K.values * rho_L**2 / rho_K) - VL
    return InequalityReport.make(
        "heintze_karcher_planar", lhs, lam2 * (V1**2 / V - VL), tol, details={"lambda2": lam2}
    )
