import numpy as np
import pytest

from hbmlab.body_geometry import ball, ellipsoid, measure, perturbed_ball
from hbmlab.errors import DomainError, NotSymmetric
from hbmlab.hbm_spectrum import (
    apply_operator,
    assemble,
    decompose,
    dirichlet_form,
    lambda1e,
    lambda2,
    linear_eigenspace_angle,
    renormalized_linear,
    spectral_report,
    spectrum,
)
from hbmlab.spherical_basis import make_domain


def test_ball_spectrum_planar(d2):
    res = spectrum(assemble(ball(d2)), 13)
    expected = [0, 1, 1, 4, 4, 9, 9, 16, 16, 25, 25, 36, 36]
    assert np.abs(res.eigenvalues - expected).max() < 1e-8
    assert res.multiplicities == [1, 2, 2, 2, 2, 2, 2]


def test_ball_spectrum_sphere(d3):
    res = spectrum(assemble(ball(d3)), 16)
    expected = np.repeat([0, 1, 3, 6], [1, 3, 5, 7])
    assert np.abs(res.eigenvalues - expected).max() < 1e-8
    assert res.multiplicities == [1, 3, 5, 7]


def test_spectrum_scale_invariant_translation_keeps_structure(d3):
    K = perturbed_ball(d3, [(2, 0, 0.1), (3, 1, 0.05)])
    base = spectrum(assemble(K), 8).eigenvalues
    big = spectrum(assemble(2.5 * K), 8).eigenvalues
    moved = spectrum(assemble(K.translate([0.1, 0.05, -0.1])), 8).eigenvalues
    assert np.abs(base - big).max() < 1e-10
    # the origin enters the cone-volume measure, so only the structural
    # eigenvalues 0 and 1 (multiplicity n) survive a translation
    assert abs(moved[0]) < 1e-10
    assert np.abs(moved[1:4] - 1).max() < 1e-10


def test_ellipse_matches_circle(d2_fine):
    res = spectrum(assemble(ellipsoid(d2_fine, [2.0, 1.0])), 10)
    circle = spectrum(assemble(ball(d2_fine)), 10)
    assert np.abs(res.eigenvalues - circle.eigenvalues).max() < 1e-8


@pytest.mark.parametrize("trial", ["hilbert", "plain"])
def test_trial_spaces_agree(d3, trial):
    K = perturbed_ball(d3, [(2, 0, 0.1), (2, 2, 0.08)])
    lam = lambda2(assemble(K, trial=trial))
    ref = lambda2(assemble(K, trial="hilbert"))
    assert lam == pytest.approx(ref, rel=1e-5)


def test_lambda1_is_one_with_linear_eigenspace(d3):
    K = perturbed_ball(d3, [(2, 1, 0.15), (3, -2, 0.05)])
    res = spectrum(assemble(K), 5)
    assert abs(res.eigenvalues[0]) < 1e-10
    assert np.abs(res.eigenvalues[1:4] - 1).max() < 1e-10
    assert res.eigenvalues[4] > 1.5
    assert linear_eigenspace_angle(K) < 1e-8


def test_lambda2_ball_values(d2, d3):
    assert lambda2(ball(d2)) == pytest.approx(4.0, abs=1e-10)
    assert lambda2(ball(d3)) == pytest.approx(3.0, abs=1e-10)


def test_lambda1e(d2, d3):
    assert lambda1e(ball(d3)) == pytest.approx(3.0, abs=1e-10)
    assert lambda1e(ball(d2)) == pytest.approx(4.0, abs=1e-10)
    with pytest.raises(NotSymmetric):
        lambda1e(perturbed_ball(d3, [(3, 0, 0.05)]))


def test_lambda1e_at_least_lambda2(d3):
    K = perturbed_ball(d3, [(2, 0, 0.15), (2, -2, 0.1)])
    assert lambda1e(K) >= lambda2(K) - 1e-10


def test_extra_bodies_rejected_in_low_dimension(d3):
    B = ball(d3)
    with pytest.raises(DomainError):
        assemble(B, extra=(B,))


def test_pencil_symmetric_and_positive(d3):
    P = assemble(perturbed_ball(d3, [(2, 0, 0.1)]))
    assert P.assembly_residual < 1e-12
    assert np.linalg.eigvalsh(P.M).min() > 0


def test_weak_and_pointwise_forms_agree(d3):
    """int z1 (-L z2) dV computed pointwise equals the weak Dirichlet form."""
    K = perturbed_ball(d3, [(2, 0, 0.12), (3, 2, 0.05)])
    rng = np.random.default_rng(3)
    low = d3.degrees <= 4
    c1, c2 = np.where(low, rng.standard_normal(d3.basis_size), 0), np.where(low, rng.standard_normal(d3.basis_size), 0)
    z1, z2 = d3.jets(c1) / K.jet, d3.jets(c2) / K.jet
    dV = measure(K, "cone_volume").values
    pointwise = -d3.integrate(z1.values * apply_operator(K, z2) * dV)
    assert pointwise == pytest.approx(dirichlet_form(K, z1, z2), rel=1e-9)
    assert dirichlet_form(K, z1, z2) == pytest.approx(dirichlet_form(K, z2, z1), rel=1e-12)


def test_operator_on_exact_eigenfunctions(d3):
    K = perturbed_ball(d3, [(2, 0, 0.12)])
    one = K.jet / K.jet
    assert np.abs(apply_operator(K, one)).max() < 1e-11
    ell = renormalized_linear(K, [0.3, 0.1, -0.2])
    assert np.abs(apply_operator(K, ell) + ell.values).max() < 1e-11


def test_ball_operator_on_harmonic(d3):
    B = ball(d3)
    c = np.zeros(d3.basis_size)
    c[d3.index(3, 1)] = 1.0
    z = d3.jets(c)
    assert np.abs(apply_operator(B, z) + 6 * z.values).max() < 1e-10


def test_decompose_parts(d3):
    K = perturbed_ball(d3, [(2, 0, 0.1), (3, 1, 0.05)])
    v = np.array([0.2, -0.3, 0.1])
    f = renormalized_linear(K, v).jet + 1.7
    c, w, ft = decompose(K, f)
    assert c == pytest.approx(1.7, rel=1e-12)
    assert np.allclose(w, v, atol=1e-12)
    assert np.abs(ft.values).max() < 1e-12


def test_spectral_report_fields(d3):
    rep = spectral_report(ball(d3), 6)
    assert rep["dim"] == 3 and rep["lmax"] == d3.lmax
    assert rep["lambda2"] == pytest.approx(3.0)
    assert rep["lambda1e"] == pytest.approx(3.0)
    assert len(rep["eigenvalues"]) == 6


def test_planar_generic_body_spectrum_converges():
    vals = []
    for L in (24, 40):
        d = make_domain(2, L)
        K = perturbed_ball(d, [(2, 2, 0.15), (3, -3, 0.05)])
        vals.append(lambda2(K))
    assert vals[0] == pytest.approx(vals[1], rel=1e-9)
