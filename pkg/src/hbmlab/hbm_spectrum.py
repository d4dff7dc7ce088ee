"""Galerkin discretization and spectrum of the Hilbert-Brunn-Minkowski operator.

The weak form of ``-L_K`` on L^2(V_K) is

    a(z1, z2) = (1/n) int h^2 Q^{ij}(D^2 h, ...) (z1)_i (z2)_j dmu
              = 1/(n-1) int h (D^2 h)^{-1}[grad z1, grad z2] dV_K,

and the mass form is int z1 z2 dV_K. Two trial spaces are offered:

``"hilbert"`` (default)
    z = phi / h with phi running over the sphere basis. This is the trial
    space of Hilbert's operator A_K f = h L~_K(f/h); constants and the
    renormalized linear functions <x, v>/h lie in it exactly, so the
    eigenvalues 0 and 1 are reproduced to rounding error.
``"plain"``
    z = phi. Constants are exact; <x, v>/h is only approximated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .body_geometry import (
    SupportField,
    _check_same,
    _as_jet,
    measure,
    mixed_discriminant,
    mixed_discriminant_partial,
    volume,
)
from .errors import DomainError, NotSymmetric, SolverError
from .spherical_basis import NodalJet, linear_jet

__all__ = [
    "OperatorPencil",
    "SpectralResult",
    "RenormLinear",
    "assemble",
    "spectrum",
    "lambda2",
    "lambda1e",
    "renormalized_linear",
    "apply_operator",
    "dirichlet_form",
    "decompose",
    "spectral_report",
    "linear_eigenspace_angle",
    "CLUSTER_TOL",
]

CLUSTER_TOL = 1e-5


def _check_extra(K, extra):
    extra = tuple(extra or ())
    if len(extra) > max(0, K.n - 3):
        raise DomainError(
            f"in R^{K.n} the operator takes {max(0, K.n - 3)} bodies besides K, got {len(extra)}"
        )
    if extra:
        _check_same(K, *extra)
    return extra


def _mixed_weights(K: SupportField, extra=()):
    """Q^{ij}(D^2h_K, extras) and Q(D^2h_K, D^2h_K, extras) at the nodes."""
    A = K.D2
    args = ([A] if K.n >= 3 else []) + [e.D2 for e in extra]
    Qij = mixed_discriminant_partial(args, m=K.n - 1, nodes=K.domain.num_nodes)
    Qfull = mixed_discriminant([A] + args)
    return Qij, Qfull


@dataclass
class OperatorPencil:
    """Symmetric pair (A, M) discretizing (-L_K, dV_K) in Galerkin form."""

    A: np.ndarray
    M: np.ndarray
    body: SupportField
    extra: tuple = ()
    trial: str = "hilbert"
    assembly_residual: float = 0.0

    @property
    def domain(self):
        return self.body.domain

    def trial_values(self, coeffs) -> np.ndarray:
        """Nodal values of the trial function(s) with the given coefficients."""
        v = self.domain.synth(coeffs)
        if self.trial == "hilbert":
            h = self.body.values
            v = v / (h if v.ndim == 1 else h[:, None])
        return v

    def trial_jet(self, coeffs) -> NodalJet:
        jet = self.domain.jets(np.asarray(coeffs, dtype=float))
        return jet / self.body.jet if self.trial == "hilbert" else jet

    def constant_coeffs(self) -> np.ndarray:
        if self.trial == "hilbert":
            return np.array(self.body.coeffs)
        c = np.zeros(self.domain.basis_size)
        c[0] = np.sqrt(self.domain.area)
        return c

    def linear_coeffs(self, v) -> np.ndarray:
        """Trial coefficients of the renormalized linear function <x, v>/h."""
        d = self.domain
        if self.trial == "hilbert":
            return d.linear_coeffs(v)
        ell = (d.nodes @ np.asarray(v, dtype=float)) / self.body.values
        dens = _measure_values(self.body, self.extra)
        b = d.values.T @ (d.weights * dens * ell)
        return np.linalg.solve(self.M, b)

    def quadratic(self, c1, c2=None) -> float:
        c2 = c1 if c2 is None else c2
        return float(c1 @ self.A @ c2)


def _measure_values(K, extra=()):
    if not extra:
        return measure(K, "cone_volume").values
    _, Qfull = _mixed_weights(K, extra)
    return K.values * Qfull / K.n


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigvectors: np.ndarray
    multiplicity_groups: list = field(default_factory=list)
    residuals: np.ndarray | None = None

    @property
    def multiplicities(self) -> list:
        return [len(g) for g in self.multiplicity_groups]

    @property
    def distinct(self) -> np.ndarray:
        return np.array([np.mean(self.eigenvalues[g]) for g in self.multiplicity_groups])


@dataclass
class RenormLinear:
    """The renormalized linear function <x, v>/h_K."""

    v: np.ndarray
    body: SupportField

    @property
    def values(self) -> np.ndarray:
        return (self.body.domain.nodes @ self.v) / self.body.values

    @property
    def jet(self) -> NodalJet:
        return linear_jet(self.body.domain, self.v) / self.body.jet


def renormalized_linear(K: SupportField, v) -> RenormLinear:
    return RenormLinear(np.asarray(v, dtype=float), K)


def assemble(K: SupportField, extra=(), trial: str = "hilbert") -> OperatorPencil:
    """Galerkin pencil of -L_K, or of -L_C for C = (K, *extra)."""
    extra = _check_extra(K, extra)
    if trial not in ("hilbert", "plain"):
        raise DomainError(f"unknown trial space {trial!r}")
    d = K.domain
    basis = d.basis_jet
    Y, G = basis.values, basis.grad  # (Q,N), (Q,a,N)
    h = K.values
    if trial == "hilbert":
        gh = K.jet.grad
        G = G / h[:, None, None] - Y[:, None, :] * (gh / h[:, None] ** 2)[:, :, None]
        Y = Y / h[:, None]
    Qij, Qfull = _mixed_weights(K, extra)
    W = (d.weights * h**2 / d.n)[:, None, None] * Qij
    WG = np.einsum("qab,qbn->qan", W, G)
    Q, a, N = G.shape
    A = G.reshape(Q * a, N).T @ WG.reshape(Q * a, N)
    dens = h * Qfull / d.n
    M = Y.T @ ((d.weights * dens)[:, None] * Y)
    resid = float(max(np.abs(A - A.T).max(), np.abs(M - M.T).max()))
    A = 0.5 * (A + A.T)
    M = 0.5 * (M + M.T)
    return OperatorPencil(A, M, K, extra, trial, resid)


def _group(values, tol):
    groups = []
    for i, lam in enumerate(values):
        if groups and abs(lam - values[groups[-1][-1]]) <= tol * max(1.0, abs(lam)):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _solve(A, M, k=None):
    try:
        if k is None or k >= A.shape[0]:
            return scipy.linalg.eigh(A, M)
        return scipy.linalg.eigh(A, M, subset_by_index=[0, k - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"generalized eigensolver failed: {exc}") from exc


def spectrum(P: OperatorPencil, k: int = 10, cluster_tol: float = CLUSTER_TOL) -> SpectralResult:
    """Lowest k eigenpairs of A v = lambda M v."""
    w, V = _solve(P.A, P.M, k)
    MV = P.M @ V
    res = np.linalg.norm(P.A @ V - MV * w, axis=0) / np.linalg.norm(MV, axis=0)
    return SpectralResult(w, V, _group(w, cluster_tol), res)


def _deflated_min(A, M, U):
    """Smallest eigenvalue of the pencil on the M-orthogonal complement of span(U)."""
    Z = scipy.linalg.null_space((M @ U).T)
    Ar, Mr = Z.T @ A @ Z, Z.T @ M @ Z
    w, V = _solve(0.5 * (Ar + Ar.T), 0.5 * (Mr + Mr.T), 1)
    return float(w[0]), Z @ V[:, 0]


def lambda2(K: SupportField | OperatorPencil, return_vector: bool = False):
    """Smallest eigenvalue on (E_0 + E_1^K)^perp, deflated with exact functions."""
    P = K if isinstance(K, OperatorPencil) else assemble(K)
    n = P.domain.n
    U = np.column_stack([P.constant_coeffs()] + [P.linear_coeffs(e) for e in np.eye(n)])
    lam, vec = _deflated_min(P.A, P.M, U)
    return (lam, vec) if return_vector else lam


def lambda1e(K: SupportField | OperatorPencil, sym_tol: float = 1e-10) -> float:
    """First non-zero eigenvalue on even functions."""
    P = K if isinstance(K, OperatorPencil) else assemble(K)
    if P.body.odd_fraction() >= sym_tol:
        raise NotSymmetric("lambda_1e needs an origin-symmetric body")
    even = P.domain.even_mask()
    A = P.A[np.ix_(even, even)]
    M = P.M[np.ix_(even, even)]
    U = P.constant_coeffs()[even][:, None]
    return _deflated_min(A, M, U)[0]


def linear_eigenspace_angle(K: SupportField | OperatorPencil) -> float:
    """Largest principal angle (radians) between the computed lambda = 1
    eigenspace (eigenvalues 2..n+1 in ascending order) and the span of the
    renormalized linear functions, measured in the dV_K inner product."""
    P = K if isinstance(K, OperatorPencil) else assemble(K)
    n = P.domain.n
    res = spectrum(P, n + 1)
    U = np.column_stack([P.linear_coeffs(e) for e in np.eye(n)])
    R = scipy.linalg.cholesky(P.M)
    return float(np.max(scipy.linalg.subspace_angles(R @ res.eigvectors[:, 1:], R @ U)))


def _jet_of(obj) -> NodalJet:
    if isinstance(obj, RenormLinear):
        return obj.jet
    if isinstance(obj, (int, float)):
        raise TypeError("pass constants as jets")
    return _as_jet(obj)


def apply_operator(K: SupportField, z, extra=(), tilde: bool = False) -> np.ndarray:
    """Pointwise L_K z (or L~_K z when ``tilde``) at the nodes.

    Uses D^2(z h) = z D^2h + h hess z + grad z (x) grad h + grad h (x) grad z,
    so L_K z = Q^{ij}(...)[h hess z + 2 sym(grad z grad h)]_ij / Q(D^2h, ...).
    """
    extra = _check_extra(K, extra)
    zj = _jet_of(z)
    hj = K.jet
    Qij, Qfull = _mixed_weights(K, extra)
    outer = np.einsum("qa,qb->qab", zj.grad, hj.grad)
    B = K.values[:, None, None] * zj.cov_hess + outer + outer.transpose(0, 2, 1)
    Lz = np.einsum("qab,qab->q", Qij, B) / Qfull
    return Lz + zj.values if tilde else Lz


def dirichlet_form(K: SupportField, z1, z2=None, extra=()) -> float:
    """int z1 (-L_K z2) dV_K evaluated in weak (first-derivative) form."""
    extra = _check_extra(K, extra)
    j1 = _jet_of(z1)
    j2 = j1 if z2 is None else _jet_of(z2)
    Qij, _ = _mixed_weights(K, extra)
    dens = K.values**2 / K.n
    return float(K.domain.integrate(dens * np.einsum("qa,qab,qb->q", j1.grad, Qij, j2.grad)))


def decompose(K: SupportField, f):
    """Split f = c_f + <x, v_f>/h_K + f~ with f~ orthogonal to E_0 and E_1^K.

    Returns ``(c_f, v_f, f_tilde)`` where ``f_tilde`` is a NodalJet.
    """
    fj = _jet_of(f)
    d = K.domain
    h = K.values
    dV = measure(K, "cone_volume").values
    V = volume(K)
    c = float(d.integrate(fj.values * dV)) / V
    x = d.nodes
    M2 = np.einsum("q,qi,qj->ij", d.weights * dV / h**2, x, x)
    b = d.integrate((fj.values / h * dV)[:, None] * x)
    try:
        scipy.linalg.cholesky(M2)
    except np.linalg.LinAlgError as exc:  # cannot happen for a valid body
        raise SolverError("int x(x)x dV_K/h^2 is not positive definite") from exc
    v = np.linalg.solve(M2, b)
    ft = fj - c - renormalized_linear(K, v).jet
    return c, v, ft


def spectral_report(K: SupportField, k: int = 10, trial: str = "hilbert") -> dict:
    """Plain-data report: eigenvalues, multiplicities, residuals, lambda2 (, lambda1e)."""
    P = assemble(K, trial=trial)
    res = spectrum(P, k)
    out = {
        "dim": K.n,
        "lmax": K.domain.lmax,
        "eigenvalues": [float(x) for x in res.eigenvalues],
        "multiplicities": res.multiplicities,
        "residuals": [float(x) for x in res.residuals],
        "lambda2": lambda2(P),
    }
    if K.is_symmetric():
        out["lambda1e"] = lambda1e(P)
    return out


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=1)
