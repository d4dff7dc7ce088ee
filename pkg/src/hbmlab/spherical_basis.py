"""Orthonormal bases, quadrature and exact tangential calculus on S^1 and S^2.

A function on the sphere is stored by its coefficients in a real orthonormal
basis: the trigonometric system on S^1 and real spherical harmonics on S^2.
Derivatives are computed in closed form from the 1-homogeneous extension of
each basis element, so the restricted Hessian ``D^2 f = hess f + f I`` is the
tangential block of an honest Euclidean Hessian and has no pole artefacts.

On S^2 the Cartesian derivative of a degree-l solid harmonic is a degree l-1
solid harmonic. The coupling matrices are obtained from the identity

    int_S (d_k P) Q dmu = (2l + 1) int_S P Q x_k dmu

valid for harmonic homogeneous P of degree l and Q of degree l - 1, which
only needs values of the basis, never a recurrence for its derivatives.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy.special import sph_harm_y_all

from .errors import DomainError

__all__ = [
    "SphericalDomain",
    "ScalarField",
    "NodalJet",
    "make_domain",
    "differentiate",
    "integrate",
    "linear_jet",
]


def _real_sph_harm(lmax, theta, phi):
    """Real orthonormal spherical harmonics, columns ordered by l*l + l + m."""
    cplx = sph_harm_y_all(lmax, lmax, theta, phi)
    out = np.empty(theta.shape + ((lmax + 1) ** 2,))
    sq2 = np.sqrt(2.0)
    for l in range(lmax + 1):
        out[..., l * l + l] = cplx[l, 0].real
        for m in range(1, l + 1):
            sign = -1.0 if m % 2 else 1.0
            out[..., l * l + l + m] = sq2 * sign * cplx[l, m].real
            out[..., l * l + l - m] = sq2 * sign * cplx[l, m].imag
    return out


def _trig_basis(lmax, theta):
    out = np.empty(theta.shape + (2 * lmax + 1,))
    out[..., 0] = 1.0 / np.sqrt(2.0 * np.pi)
    rpi = 1.0 / np.sqrt(np.pi)
    for k in range(1, lmax + 1):
        out[..., 2 * k - 1] = rpi * np.cos(k * theta)
        out[..., 2 * k] = rpi * np.sin(k * theta)
    return out


def _frames(n, points):
    """Orthonormal tangent frame per point, shape (P, n, n-1)."""
    if n == 2:
        return np.stack([-points[:, 1], points[:, 0]], axis=-1)[:, :, None]
    x, y, z = points.T
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.arctan2(y, x)
    ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
    e1 = np.stack([ct * cp, ct * sp, -st], axis=-1)
    e2 = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return np.stack([e1, e2], axis=-1)


class SphericalDomain:
    """Basis, quadrature rule and derivative machinery on S^{n-1}.

    Parameters
    ----------
    n : int
        Ambient dimension, 2 or 3.
    lmax : int
        Maximal frequency (n=2) or harmonic degree (n=3), at least 4.
    oversample : int
        Quadrature oversampling factor. The default rule integrates products
        of four basis functions exactly, which leaves headroom for the
        non-polynomial weights appearing in Galerkin forms.
    """

    def __init__(self, n: int, lmax: int, oversample: int = 2):
        if n not in (2, 3):
            raise DomainError(f"unsupported dimension n={n}; only 2 and 3")
        if int(lmax) != lmax or lmax < 4:
            raise DomainError(f"cutoff lmax={lmax} too small; need an integer >= 4")
        if oversample < 1:
            raise DomainError("oversample must be >= 1")
        self.n = n
        self.lmax = int(lmax)
        self.oversample = int(oversample)
        if n == 2:
            count = oversample * (2 * self.lmax + 2)
            theta = 2.0 * np.pi * np.arange(count) / count
            self.nodes = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            self.weights = np.full(count, 2.0 * np.pi / count)
            self.degrees = np.array([0] + [k for k in range(1, self.lmax + 1) for _ in (0, 1)])
            self.orders = np.array([0] + [s * k for k in range(1, self.lmax + 1) for s in (1, -1)])
        else:
            n_theta = oversample * (self.lmax + 1)
            n_phi = 2 * oversample * (self.lmax + 1)
            t, wt = np.polynomial.legendre.leggauss(n_theta)
            phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
            ct, ph = np.meshgrid(t, phi, indexing="ij")
            st = np.sqrt(1.0 - ct**2)
            self.nodes = np.stack(
                [st * np.cos(ph), st * np.sin(ph), ct], axis=-1
            ).reshape(-1, 3)
            self.weights = np.outer(wt, np.full(n_phi, 2.0 * np.pi / n_phi)).ravel()
            self.degrees = np.array([l for l in range(self.lmax + 1) for _ in range(2 * l + 1)])
            self.orders = np.array([m for l in range(self.lmax + 1) for m in range(-l, l + 1)])
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)
        self.frames = _frames(n, self.nodes)
        self.values = self.basis_at(self.nodes)

    def __repr__(self):
        return f"SphericalDomain(n={self.n}, lmax={self.lmax}, nodes={self.num_nodes})"

    @property
    def basis_size(self) -> int:
        return len(self.degrees)

    @property
    def num_nodes(self) -> int:
        return len(self.weights)

    @property
    def area(self) -> float:
        return 2.0 * np.pi if self.n == 2 else 4.0 * np.pi

    @property
    def ball_volume(self) -> float:
        return self.area / self.n

    def same_as(self, other: "SphericalDomain") -> bool:
        return (
            self is other
            or (self.n, self.lmax, self.oversample) == (other.n, other.lmax, other.oversample)
        )

    # -- evaluation -----------------------------------------------------

    def basis_at(self, points) -> np.ndarray:
        """Basis values at arbitrary unit vectors, shape (P, N)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[-1] != self.n:
            raise DomainError("points have the wrong ambient dimension")
        if self.n == 2:
            return _trig_basis(self.lmax, np.arctan2(points[:, 1], points[:, 0]))
        theta = np.arccos(np.clip(points[:, 2], -1.0, 1.0))
        phi = np.arctan2(points[:, 1], points[:, 0])
        return _real_sph_harm(self.lmax, theta, phi)

    @cached_property
    def _deriv(self):
        """Coefficient-space derivative maps.

        n=2: a single matrix for d/dtheta. n=3: three matrices G_k mapping a
        harmonic to the restriction of the k-th Cartesian partial of its
        solid extension r^l P.
        """
        N = self.basis_size
        if self.n == 2:
            D = np.zeros((N, N))
            for k in range(1, self.lmax + 1):
                c, s = 2 * k - 1, 2 * k
                D[s, c] = -k
                D[c, s] = k
            return (D,)
        Y, w, x = self.values, self.weights, self.nodes
        mats = []
        lfac = 2.0 * self.degrees + 1.0
        for k in range(3):
            G = (Y * (w * x[:, k])[:, None]).T @ Y * lfac[None, :]
            # keep only degree l -> l-1 couplings
            mask = self.degrees[:, None] == self.degrees[None, :] - 1
            G = np.where(mask, G, 0.0)
            G[np.abs(G) < 1e-13] = 0.0
            mats.append(G)
        return tuple(mats)

    def jets(self, coeffs, points=None, values=None) -> "NodalJet":
        """Jets of one or several fields (coefficient columns) at points.

        Returns a NodalJet whose arrays carry a trailing "function" axis when
        ``coeffs`` is two dimensional.
        """
        coeffs = np.asarray(coeffs, dtype=float)
        vec = coeffs.ndim == 1
        C = coeffs[:, None] if vec else coeffs
        if points is None:
            Y, E = self.values, self.frames
        else:
            points = np.atleast_2d(np.asarray(points, dtype=float))
            Y = self.basis_at(points) if values is None else values
            E = _frames(self.n, points)
        f = Y @ C
        if self.n == 2:
            (D,) = self._deriv
            d1 = Y @ (D @ C)
            d2 = Y @ (D @ (D @ C))
            grad = d1[:, None, :]
            hess = (d2 + f)[:, None, None, :]
        else:
            G = self._deriv
            cart = np.stack([Y @ (Gk @ C) for Gk in G], axis=1)  # (P,3,m)
            grad = np.einsum("pka,pkm->pam", E, cart)
            H = np.empty((Y.shape[0], 3, 3, C.shape[1]))
            for j in range(3):
                GjC = G[j] @ C
                for k in range(j, 3):
                    H[:, j, k] = H[:, k, j] = Y @ (G[k] @ GjC)
            hess = np.einsum("pja,pjkm,pkb->pabm", E, H, E)
            radial = Y @ ((1.0 - self.degrees)[:, None] * C)
            hess = hess + radial[:, None, None, :] * np.eye(2)[None, :, :, None]
        if vec:
            return NodalJet(f[:, 0], grad[..., 0], hess[..., 0])
        return NodalJet(f, grad, hess)

    @cached_property
    def basis_jet(self) -> "NodalJet":
        """Jets of every basis function at the nodes (trailing axis = basis)."""
        return self.jets(np.eye(self.basis_size))

    def synth(self, coeffs) -> np.ndarray:
        return self.values @ np.asarray(coeffs, dtype=float)

    def project(self, node_values) -> np.ndarray:
        """Quadrature L^2 projection of nodal values onto the basis."""
        node_values = np.asarray(node_values, dtype=float)
        if node_values.shape[0] != self.num_nodes:
            raise DomainError("one value per node required")
        return np.tensordot(self.values * self.weights[:, None], node_values, axes=(0, 0))

    def integrate(self, node_values) -> np.ndarray | float:
        """Quadrature sum over the first axis."""
        node_values = np.asarray(node_values, dtype=float)
        if node_values.shape[0] != self.num_nodes:
            raise DomainError(
                f"length mismatch: {node_values.shape[0]} values for {self.num_nodes} nodes"
            )
        return np.tensordot(self.weights, node_values, axes=(0, 0))

    def gram(self) -> np.ndarray:
        return self.values.T @ (self.weights[:, None] * self.values)

    def linear_coeffs(self, v) -> np.ndarray:
        """Coefficients of the linear function x -> <x, v> (exact, degree one)."""
        return self.project(self.nodes @ np.asarray(v, dtype=float))

    def index(self, degree: int, order: int) -> int:
        hit = np.flatnonzero((self.degrees == degree) & (self.orders == order))
        if hit.size != 1:
            raise DomainError(f"no basis element with degree {degree}, order {order}")
        return int(hit[0])

    def even_mask(self) -> np.ndarray:
        """Basis elements invariant under x -> -x."""
        return self.degrees % 2 == 0


def make_domain(n: int, lmax: int, oversample: int = 2) -> SphericalDomain:
    return SphericalDomain(n, lmax, oversample)


class NodalJet:
    """Values, tangent gradient and restricted Hessian ``D^2 f`` at nodes.

    ``grad`` is given in the per-node frame, shape (Q, n-1); ``hess`` is the
    symmetric (n-1)x(n-1) block of the Hessian of the 1-homogeneous extension,
    i.e. ``hess f + f I``. Arithmetic follows the product and quotient rules so
    that expressions such as ``h_L / h_K`` keep exact derivatives.
    """

    __slots__ = ("values", "grad", "hess")

    def __init__(self, values, grad, hess):
        self.values = np.asarray(values, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)

    @property
    def dim(self) -> int:
        return self.grad.shape[1]

    def _eye(self):
        e = np.eye(self.dim)
        return e.reshape((1, self.dim, self.dim) + (1,) * (self.values.ndim - 1))

    @property
    def cov_hess(self) -> np.ndarray:
        """Covariant Hessian of the restriction to the sphere."""
        return self.hess - self.values[:, None, None] * self._eye()

    @property
    def laplacian(self) -> np.ndarray:
        return np.trace(self.hess, axis1=1, axis2=2) - self.dim * self.values

    @staticmethod
    def constant(c, like: "NodalJet") -> "NodalJet":
        v = np.full_like(like.values, float(c))
        return NodalJet(v, np.zeros_like(like.grad), v[:, None, None] * like._eye())

    def _coerce(self, other):
        if isinstance(other, NodalJet):
            return other
        return NodalJet.constant(other, self)

    def __add__(self, other):
        o = self._coerce(other)
        return NodalJet(self.values + o.values, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return NodalJet(-self.values, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, NodalJet):
            c = float(other)
            return NodalJet(c * self.values, c * self.grad, c * self.hess)
        a, b = self, other
        av, bv = a.values[:, None, None], b.values[:, None, None]
        outer = np.einsum("qa,qb->qab", a.grad, b.grad)
        hess = av * b.hess + bv * a.hess - av * bv * a._eye() + outer + outer.transpose(0, 2, 1)
        return NodalJet(
            a.values * b.values, a.values[:, None] * b.grad + b.values[:, None] * a.grad, hess
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "NodalJet":
        b = self.values
        bq = b[:, None, None]
        outer = np.einsum("qa,qb->qab", self.grad, self.grad)
        hess = -self.hess / bq**2 + 2.0 * self._eye() / bq + 2.0 * outer / bq**3
        return NodalJet(1.0 / b, -self.grad / b[:, None] ** 2, hess)

    def __truediv__(self, other):
        if not isinstance(other, NodalJet):
            return self * (1.0 / float(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)


class ScalarField:
    """A function on the sphere given by basis coefficients."""

    def __init__(self, domain: SphericalDomain, coeffs):
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.shape != (domain.basis_size,):
            raise DomainError(
                f"expected {domain.basis_size} coefficients, got {coeffs.shape}"
            )
        coeffs.setflags(write=False)
        self.domain = domain
        self.coeffs = coeffs

    @classmethod
    def from_values(cls, domain, node_values):
        return cls(domain, domain.project(node_values))

    @classmethod
    def from_function(cls, domain, fn):
        """Project ``fn(points) -> values`` onto the basis by quadrature."""
        return cls(domain, domain.project(fn(domain.nodes)))

    @cached_property
    def node_values(self) -> np.ndarray:
        v = self.domain.synth(self.coeffs)
        v.setflags(write=False)
        return v

    @cached_property
    def jet(self) -> NodalJet:
        return self.domain.jets(self.coeffs)

    def __call__(self, points) -> np.ndarray:
        return self.domain.basis_at(points) @ self.coeffs

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.domain, self.coeffs + other.coeffs)
        c = np.zeros_like(self.coeffs)
        c[0] = float(other) * np.sqrt(self.domain.area)
        return ScalarField(self.domain, self.coeffs + c)

    __radd__ = __add__

    def __mul__(self, s):
        return ScalarField(self.domain, float(s) * self.coeffs)

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other


def differentiate(domain: SphericalDomain, f) -> NodalJet:
    """Exact tangent gradient and restricted Hessian of a field at the nodes."""
    coeffs = f.coeffs if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    return domain.jets(coeffs)


def integrate(domain: SphericalDomain, values) -> float:
    return domain.integrate(values)


def linear_jet(domain: SphericalDomain, v) -> NodalJet:
    """Jet of x -> <x, v>: D^2 vanishes identically."""
    v = np.asarray(v, dtype=float)
    vals = domain.nodes @ v
    grad = np.einsum("qka,k->qa", domain.frames, v)
    return NodalJet(vals, grad, np.zeros((domain.num_nodes, domain.n - 1, domain.n - 1)))


def ambient(domain: SphericalDomain, tangent_vectors) -> np.ndarray:
    """Map frame components (Q, n-1) to ambient vectors (Q, n)."""
    return np.einsum("qka,qa->qk", domain.frames, tangent_vectors)
