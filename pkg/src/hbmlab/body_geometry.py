"""Convex bodies represented by support functions on the sphere.

Every operation works on h and its restricted Hessian ``D^2 h``; Minkowski
sums, dilations and translations are linear in h and act on coefficients
directly. No boundary mesh is ever built.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DomainError, MaxIterExceeded, NotConvex, NotPositive
from .spherical_basis import (
    NodalJet,
    ScalarField,
    SphericalDomain,
    ambient,
    linear_jet,
    make_domain,
)

__all__ = [
    "SupportField",
    "TranslatedField",
    "DensityField",
    "body_from_coeffs",
    "ball",
    "ellipsoid",
    "perturbed_ball",
    "body_from_function",
    "gauss_map_inverse",
    "measure",
    "mixed_discriminant",
    "mixed_discriminant_partial",
    "mixed_volume",
    "quermassintegral",
    "volume",
    "centroid",
    "steiner_point",
    "mean_width",
    "linear_transform",
    "s2_isotropize",
    "s2_moment",
    "isotropy_defect",
    "l2_distance",
    "body_to_dict",
    "body_from_dict",
    "load_body",
    "save_body",
]

# relative to mean(h); quadrature-level noise floor
VALIDITY_TOL = 1e-8


class SupportField:
    """Support function of a body in K^2_+ with cached derivatives.

    Construction validates ``h > 0`` and ``D^2 h > 0`` at the quadrature nodes
    and raises :class:`NotPositive` / :class:`NotConvex` otherwise.
    """

    require_positive = True

    def __init__(self, domain: SphericalDomain, coeffs, *, check: bool = True):
        self.h = ScalarField(domain, coeffs)
        self.domain = domain
        self.truncation_residual = 0.0
        if check:
            self.validate()

    def validate(self):
        scale = abs(float(np.mean(self.values))) or 1.0
        if self.require_positive and self.min_h <= VALIDITY_TOL * scale:
            raise NotPositive(f"min h = {self.min_h:.3e}: origin is not interior")
        if self.min_eig_D2h <= VALIDITY_TOL * scale:
            raise NotConvex(f"min eigenvalue of D^2 h = {self.min_eig_D2h:.3e}")

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, lmax={self.domain.lmax})"

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def coeffs(self) -> np.ndarray:
        return self.h.coeffs

    @property
    def values(self) -> np.ndarray:
        return self.h.node_values

    @property
    def jet(self) -> NodalJet:
        return self.h.jet

    @property
    def tangent(self) -> NodalJet:
        return self.h.jet

    @property
    def D2(self) -> np.ndarray:
        return self.h.jet.hess

    @cached_property
    def eig_D2h(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.D2)

    @cached_property
    def det_D2h(self) -> np.ndarray:
        return np.linalg.det(self.D2)

    @property
    def min_h(self) -> float:
        return float(self.values.min())

    @property
    def min_eig_D2h(self) -> float:
        return float(self.eig_D2h.min())

    @property
    def curvature_condition(self) -> float:
        """max kappa / min kappa over the nodes (radii of curvature ratio)."""
        return float(self.eig_D2h.max() / self.eig_D2h.min())

    def odd_fraction(self) -> float:
        c = self.coeffs
        odd = ~self.domain.even_mask()
        return float(np.linalg.norm(c[odd]) / max(np.linalg.norm(c), 1e-300))

    def is_symmetric(self, tol: float = 1e-10) -> bool:
        return self.odd_fraction() < tol

    # -- linear structure ----------------------------------------------

    def _make(self, coeffs):
        try:
            return SupportField(self.domain, coeffs)
        except NotPositive:
            return TranslatedField(self.domain, coeffs)

    def translate(self, v) -> "SupportField":
        """K + v; returns a TranslatedField if the origin leaves the interior."""
        return self._make(self.coeffs + self.domain.linear_coeffs(v))

    def scale(self, c: float) -> "SupportField":
        if c <= 0:
            raise DomainError("dilation factor must be positive")
        return self._make(c * self.coeffs)

    def __add__(self, other: "SupportField") -> "SupportField":
        _check_same(self, other)
        return self._make(self.coeffs + other.coeffs)

    def __rmul__(self, c):
        return self.scale(c)


class TranslatedField(SupportField):
    """Convex body whose support function need not be positive."""

    require_positive = False


@dataclass
class DensityField:
    """Density of a measure on the sphere relative to spherical Lebesgue measure."""

    domain: SphericalDomain
    values: np.ndarray
    label: str
    p: float | None = None

    @property
    def total(self) -> float:
        return float(self.domain.integrate(self.values))

    def integrate(self, g) -> float:
        return float(self.domain.integrate(np.asarray(g) * self.values))


def _check_same(*fields):
    d0 = fields[0].domain
    for f in fields[1:]:
        if not d0.same_as(f.domain):
            raise DomainError("bodies live on different domains")


def _as_jet(obj) -> NodalJet:
    if isinstance(obj, NodalJet):
        return obj
    if isinstance(obj, (SupportField, ScalarField)):
        return obj.jet
    raise TypeError(f"cannot interpret {type(obj).__name__} as a field")


# -- constructors -------------------------------------------------------


def body_from_coeffs(domain: SphericalDomain, coeffs) -> SupportField:
    return SupportField(domain, coeffs)


def body_from_function(domain: SphericalDomain, fn, *, allow_translated=False) -> SupportField:
    """Project ``fn(points)`` onto the basis; records the dropped-tail L^2 norm."""
    exact = fn(domain.nodes)
    coeffs = domain.project(exact)
    cls = TranslatedField if allow_translated else SupportField
    body = cls(domain, coeffs)
    body.truncation_residual = float(
        np.sqrt(domain.integrate((exact - domain.synth(coeffs)) ** 2))
    )
    return body


def ball(domain: SphericalDomain, radius: float = 1.0, center=None) -> SupportField:
    c = np.zeros(domain.basis_size)
    c[0] = radius * np.sqrt(domain.area)
    if center is not None:
        c = c + domain.linear_coeffs(center)
    return SupportField(domain, c)


def ellipsoid(domain: SphericalDomain, axes, rotation=None, center=None) -> SupportField:
    """Image of the unit ball under R diag(axes), translated by center."""
    axes = np.asarray(axes, dtype=float)
    if axes.shape != (domain.n,) or not np.all(axes > 0):
        raise DomainError(f"ellipsoid needs {domain.n} positive semi-axes, got {axes.tolist()}")
    A = np.diag(axes)
    if rotation is not None:
        A = np.asarray(rotation, dtype=float) @ A
    center = np.zeros(domain.n) if center is None else np.asarray(center, dtype=float)
    return body_from_function(
        domain, lambda x: np.linalg.norm(x @ A, axis=1) + x @ center
    )


def perturbed_ball(domain: SphericalDomain, terms) -> SupportField:
    """Unit ball plus ``sum amplitude * phi_(degree, order)`` (orthonormal basis)."""
    c = np.zeros(domain.basis_size)
    c[0] = np.sqrt(domain.area)
    for degree, order, amp in terms:
        c[domain.index(degree, order)] += amp
    return SupportField(domain, c)


# -- measures and mixed volumes ------------------------------------------


def gauss_map_inverse(K: SupportField) -> np.ndarray:
    """Boundary point X_K(x) = h(x) x + grad h(x) for every node."""
    return K.values[:, None] * K.domain.nodes + ambient(K.domain, K.jet.grad)


def measure(K: SupportField, label: str = "cone_volume", p: float | None = None) -> DensityField:
    """Density of a measure attached to K.

    Labels: ``cone_volume`` (1/n) h det D^2h, ``Lp_surface`` h^(1-p) det D^2h,
    ``hilbert`` det D^2h / (n h), ``lebesgue`` 1.
    """
    n, h, det = K.n, K.values, K.det_D2h
    if label == "cone_volume":
        vals = h * det / n
    elif label == "Lp_surface":
        if p is None:
            raise DomainError("Lp_surface requires the exponent p")
        vals = h ** (1.0 - p) * det
    elif label == "hilbert":
        vals = det / (n * h)
    elif label == "lebesgue":
        vals = np.ones_like(h)
    else:
        raise DomainError(f"unknown measure label {label!r}")
    return DensityField(K.domain, vals, label, p)


def _det(A):
    if A.shape[-1] == 1:
        return A[..., 0, 0]
    if A.shape[-1] == 2:
        return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    return np.linalg.det(A)


def mixed_discriminant(mats) -> np.ndarray:
    """Q(A^1, ..., A^m) for stacks of m x m symmetric matrices (leading node axis).

    Uses polarization of the determinant, which coincides with the
    generalized Kronecker delta formula normalized by 1/m!.
    """
    mats = [np.asarray(A, dtype=float) for A in mats]
    m = len(mats)
    if m == 0 or any(A.shape[-1] != m for A in mats):
        raise DomainError("need m matrices of size m x m")
    if m == 1:
        return mats[0][..., 0, 0]
    if m == 2:
        A, B = mats
        return 0.5 * (
            np.trace(A, axis1=-2, axis2=-1) * np.trace(B, axis1=-2, axis2=-1)
            - np.einsum("...ij,...ji->...", A, B)
        )
    total = 0.0
    for r in range(1, m + 1):
        for subset in itertools.combinations(mats, r):
            total = total + (-1) ** (m - r) * _det(sum(subset))
    return total / math.factorial(m)


def mixed_discriminant_partial(mats, m: int | None = None, nodes: int | None = None) -> np.ndarray:
    """Q^{ij}(A^2, ..., A^m) so that Q(A^1, ...) = sum_ij A^1_ij Q^{ij}.

    ``mats`` holds m-1 stacks of m x m matrices. With an empty list the
    matrix size must be given by ``m`` (only m = 1 makes sense, Q^{11} = 1).
    """
    mats = [np.asarray(A, dtype=float) for A in mats]
    if not mats:
        if m not in (None, 1):
            raise DomainError("empty argument list only valid for 1 x 1 matrices")
        shape = () if nodes is None else (nodes,)
        return np.ones(shape + (1, 1))
    m = mats[0].shape[-1]
    if len(mats) != m - 1:
        raise DomainError("need m-1 matrices of size m x m")
    if m == 2:
        (A,) = mats
        tr = np.trace(A, axis1=-2, axis2=-1)
        return 0.5 * (tr[..., None, None] * np.eye(2) - A)
    lead = mats[0].shape[:-2]
    out = np.empty(lead + (m, m))
    for i in range(m):
        for j in range(i, m):
            E = np.zeros((m, m))
            E[i, j] = E[j, i] = 1.0 if i == j else 0.5
            E = np.broadcast_to(E, lead + (m, m))
            out[..., i, j] = out[..., j, i] = mixed_discriminant([E] + mats)
    return out


def mixed_volume(bodies, domain: SphericalDomain | None = None) -> float:
    """V(K_1, ..., K_n) = (1/n) int h_1 Q(D^2 h_2, ..., D^2 h_n) dmu.

    Entries may be support fields, scalar fields or nodal jets (so that
    arguments like f*h in the Alexandrov-Fenchel inequality are allowed).
    """
    bodies = list(bodies)
    fields = [b for b in bodies if not isinstance(b, NodalJet)]
    if fields:
        _check_same(*fields)
        domain = fields[0].domain
    elif domain is None:
        raise DomainError("at least one argument must carry its domain")
    n = domain.n
    if len(bodies) != n:
        raise DomainError(f"mixed volume in R^{n} takes {n} arguments, got {len(bodies)}")
    jets = [_as_jet(b) for b in bodies]
    Q = mixed_discriminant([j.hess for j in jets[1:]])
    return float(domain.integrate(jets[0].values * Q) / n)


def volume(K: SupportField) -> float:
    return mixed_volume([K] * K.n)


def quermassintegral(K: SupportField, m: int) -> float:
    """W_m(K) = V(B[m], K[n-m])."""
    n = K.n
    if not 0 <= m <= n:
        raise DomainError(f"quermassintegral index must lie in [0, {n}]")
    B = ball(K.domain)
    return mixed_volume([B] * m + [K] * (n - m))


def centroid(K: SupportField) -> np.ndarray:
    """Centroid of the body, n/((n+1) V) int X_K dV_K."""
    n = K.n
    dV = measure(K, "cone_volume").values
    X = gauss_map_inverse(K)
    return n / ((n + 1) * volume(K)) * K.domain.integrate(X * dV[:, None])


def steiner_point(L: SupportField) -> np.ndarray:
    d = L.domain
    return d.integrate(L.values[:, None] * d.nodes) / d.ball_volume


def mean_width(L: SupportField) -> float:
    d = L.domain
    return float(2.0 * d.integrate(L.values) / (d.n * d.ball_volume))


# -- linear images and isotropic position ---------------------------------


def linear_transform(K: SupportField, T) -> SupportField:
    """Support function of T(K), re-projected onto the basis of K's domain.

    The L^2 norm of the part dropped by the projection is stored on the
    result as ``truncation_residual``.
    """
    T = np.asarray(T, dtype=float)
    if T.shape != (K.n, K.n) or abs(np.linalg.det(T)) < 1e-14:
        raise DomainError("T must be an invertible n x n matrix")
    d = K.domain

    def h_image(x):
        y = x @ T  # rows are T^T x
        r = np.linalg.norm(y, axis=1)
        return r * K.h(y / r[:, None])

    cls = TranslatedField if not K.require_positive else SupportField
    exact = h_image(d.nodes)
    coeffs = d.project(exact)
    try:
        out = cls(d, coeffs)
    except NotPositive:
        out = TranslatedField(d, coeffs)
    out.truncation_residual = float(np.sqrt(d.integrate((exact - d.synth(coeffs)) ** 2)))
    return out


def s2_moment(K: SupportField) -> np.ndarray:
    """Second moment matrix int x (x) x dS_2 K."""
    dens = measure(K, "Lp_surface", p=2.0).values
    x = K.domain.nodes
    return np.einsum("q,qi,qj->ij", K.domain.weights * dens, x, x)


def isotropy_defect(K: SupportField) -> float:
    S = s2_moment(K)
    return float(np.linalg.norm(S * K.n / np.trace(S) - np.eye(K.n)))


def _sym_power(S, power, floor=1e-14):
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    w = np.maximum(w, floor)
    return (V * w**power) @ V.T


def s2_isotropize(K: SupportField, tol: float = 1e-8, max_iter: int = 200):
    """Find T in SL(n) such that S_2 T(K) is isotropic.

    Each step maps K by U = S^(1/2) / det(S^(1/2))^(1/n), where S is the
    current second moment of S_2 K. The accumulated map is always applied to
    the original body so re-projection errors do not compound.
    Returns ``(T, T(K))``.
    """
    n = K.n
    T = np.eye(n)
    body = K
    for _ in range(max_iter):
        S = s2_moment(body)
        if np.linalg.norm(S * n / np.trace(S) - np.eye(n)) < tol:
            return T, body
        U = _sym_power(S, 0.5)
        U = U / np.linalg.det(U) ** (1.0 / n)
        T = U @ T
        T = T / np.linalg.det(T) ** (1.0 / n)
        body = linear_transform(K, T)
    raise MaxIterExceeded(f"S_2 isotropization did not reach tol={tol} in {max_iter} steps")


def l2_distance(g1, g2, m: DensityField | None = None, domain: SphericalDomain | None = None) -> float:
    """L^2 distance of two functions (or bodies) with respect to a measure."""

    def vals(g):
        if isinstance(g, (SupportField, ScalarField)):
            return g.values if isinstance(g, SupportField) else g.node_values
        if isinstance(g, NodalJet):
            return g.values
        return np.asarray(g, dtype=float)

    d = m.domain if m is not None else domain
    if d is None:
        for g in (g1, g2):
            if hasattr(g, "domain"):
                d = g.domain
                break
    if d is None:
        raise DomainError("cannot infer the domain")
    dens = m.values if m is not None else np.ones(d.num_nodes)
    diff = vals(g1) - vals(g2)
    return float(np.sqrt(max(d.integrate(diff**2 * dens), 0.0)))


# -- body definition files -------------------------------------------------


def _lmax_from_size(n, size):
    if n == 2:
        if size % 2 == 0:
            raise DomainError("n=2 coefficient vectors have odd length 2*lmax+1")
        return (size - 1) // 2
    L = int(round(math.sqrt(size))) - 1
    if (L + 1) ** 2 != size:
        raise DomainError("n=3 coefficient vectors have length (lmax+1)^2")
    return L


def body_from_dict(definition: dict, lmax: int | None = None, domain: SphericalDomain | None = None) -> SupportField:
    """Build a body from its JSON definition."""
    try:
        n = int(definition["dim"])
        kind = definition["kind"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"body definition needs 'dim' and 'kind': {exc}") from None
    if kind == "coeffs":
        coeffs = np.asarray(definition["coeffs"], dtype=float)
        native = _lmax_from_size(n, coeffs.size)
    else:
        native = definition.get("lmax")
    if domain is None:
        L = lmax or native or (24 if n == 2 else 12)
        domain = make_domain(n, L)
    if domain.n != n:
        raise DomainError("body dimension does not match domain")
    center = definition.get("center")
    if kind == "ball":
        return ball(domain, float(definition.get("radius", 1.0)), center)
    if kind == "ellipsoid":
        return ellipsoid(domain, definition["axes"], definition.get("rotation"), center)
    if kind == "perturbed_ball":
        terms = definition.get("terms")
        if terms is None:
            terms = [definition]
        return perturbed_ball(
            domain,
            [(int(t["degree"]), int(t.get("order", 0)), float(t["amplitude"])) for t in terms],
        )
    if kind == "coeffs":
        N = domain.basis_size
        c = np.zeros(N)
        k = min(N, coeffs.size)
        # the bases are nested, so resizing is truncation or zero padding
        c[:k] = coeffs[:k]
        cls = TranslatedField if definition.get("translated") else SupportField
        return cls(domain, c)
    raise DomainError(f"unknown body kind {kind!r}")


def body_to_dict(K: SupportField) -> dict:
    return {
        "dim": K.n,
        "kind": "coeffs",
        "lmax": K.domain.lmax,
        "coeffs": [float(c) for c in K.coeffs],
    }


def load_body(path, lmax: int | None = None, domain: SphericalDomain | None = None) -> SupportField:
    with open(path) as fh:
        definition = json.load(fh)
    return body_from_dict(definition, lmax=lmax, domain=domain)


def save_body(K: SupportField, path) -> None:
    # json writes floats with repr, which round-trips exactly (17 significant digits)
    Path(path).write_text(json.dumps(body_to_dict(K), indent=1))
