import numpy as np
import pytest

from hbmlab.spherical_basis import make_domain


@pytest.fixture(scope="session")
def d2():
    return make_domain(2, 16)


@pytest.fixture(scope="session")
def d2_fine():
    return make_domain(2, 48)


@pytest.fixture(scope="session")
def d3():
    return make_domain(3, 12)


@pytest.fixture(scope="session")
def d3_small():
    return make_domain(3, 8)


def extension(domain, coeffs, y):
    """1-homogeneous extension F(y) = |y| f(y/|y|) of a field given by coefficients."""
    y = np.atleast_2d(y)
    r = np.linalg.norm(y, axis=1)
    return r * (domain.basis_at(y / r[:, None]) @ coeffs)


def fd_gradient(domain, coeffs, x, e, t):
    return (extension(domain, coeffs, x + t * e) - extension(domain, coeffs, x - t * e))[0] / (2 * t)


def fd_hessian(domain, coeffs, x, ea, eb, t):
    F = lambda y: extension(domain, coeffs, y)[0]  # noqa: E731
    return (
        F(x + t * (ea + eb)) - F(x + t * (ea - eb)) - F(x - t * (ea - eb)) + F(x - t * (ea + eb))
    ) / (4 * t * t)
