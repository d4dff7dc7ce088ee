import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from hbmlab import inequality_lab as il
from hbmlab.body_geometry import ball, ellipsoid, perturbed_ball, volume
from hbmlab.errors import DomainError, MeanNotZero, NotSymmetric, WrongDimension
from hbmlab.hbm_spectrum import assemble, lambda2, renormalized_linear


def _ellipse_oracle(a, b):
    """Perimeter and int rho^2 dtheta of an axis-parallel ellipse by quadrature."""
    h = lambda t: math.sqrt((a * math.cos(t)) ** 2 + (b * math.sin(t)) ** 2)
    rho = lambda t: (a * b) ** 2 / h(t) ** 3
    per = quad(h, 0, 2 * math.pi, epsabs=1e-13, epsrel=1e-13)[0]
    rho2 = quad(lambda t: rho(t) ** 2, 0, 2 * math.pi, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    return per, rho2


def test_report_verdicts():
    assert il.InequalityReport.make("x", 2.0, 1.0).verdict == "holds"
    assert il.InequalityReport.make("x", 1.0, 1.0 + 1e-9).verdict == "equality"
    r = il.InequalityReport.make("x", 1.0, 2.0)
    assert r.verdict == "violated" and r.residual == -1.0
    assert r.to_dict()["name"] == "x"


def test_local_bm_linear_is_equality(d3):
    K = perturbed_ball(d3, [(2, 0, 0.1), (3, 2, 0.05)])
    r = il.local_bm(K, renormalized_linear(K, [0.2, 0.3, -0.1]))
    assert r.verdict == "equality"


def test_local_bm_rejects_nonzero_mean(d3):
    with pytest.raises(MeanNotZero):
        il.local_bm(ball(d3), ball(d3).jet)


def test_local_bm_holds_on_harmonic(d3):
    B = ball(d3)
    c = np.zeros(d3.basis_size)
    c[d3.index(2, 1)] = 1.0
    r = il.local_bm(B, d3.jets(c))
    # lhs = 3 int f^2, rhs = int f^2 with dV = dmu/3
    assert r.lhs == pytest.approx(3 * r.rhs, rel=1e-10)


def test_local_af_length_checked(d3):
    B = ball(d3)
    with pytest.raises(DomainError):
        il.local_af((B, B), B.jet)
    with pytest.raises(DomainError):
        il.alexandrov_fenchel(B, B.jet, ())


def test_alexandrov_fenchel_planar_is_minkowski_first(d2_fine):
    E = ellipsoid(d2_fine, [2.0, 1.0])
    B = ball(d2_fine)
    r = il.alexandrov_fenchel(B, E.jet / B.jet, ())
    per, _ = _ellipse_oracle(2.0, 1.0)
    assert r.lhs == pytest.approx((per / 2) ** 2, rel=1e-10)
    assert r.rhs == pytest.approx(2 * math.pi * math.pi, rel=1e-10)


def test_spectral_gap_eigenfunction_is_equality(d3):
    K = perturbed_ball(d3, [(2, 0, 0.1), (2, 2, 0.07)])
    P = assemble(K)
    lam, vec = lambda2(P, return_vector=True)
    assert il.spectral_gap_ineq(K, P.trial_jet(vec), lam).verdict == "equality"


def test_stability_bm_ball_decomposition(d3):
    """For K = B the linear part of f is (w/2, s): half the mean width and the Steiner point."""
    B = ball(d3)
    L = perturbed_ball(d3, [(1, 1, 0.1), (2, 0, 0.15), (3, -1, 0.05)])
    r = il.stability_bm(B, L.jet)
    w = 2 * d3.integrate(L.values) / d3.area
    s = 3 * d3.integrate(L.values[:, None] * d3.nodes) / d3.area
    assert r.details["c_f"] == pytest.approx(w / 2, rel=1e-12)
    assert np.allclose(r.details["v_f"], s, atol=1e-12)
    assert r.verdict in ("holds", "equality")


def test_minkowski_second_ball_is_quermassintegral_form(d3):
    B = ball(d3)
    L = perturbed_ball(d3, [(2, 1, 0.1), (3, 3, 0.05)])
    r = il.minkowski_second_stability(B, L)
    W1 = d3.integrate(L.values) / 3
    assert r.details["V1"] == pytest.approx(W1, rel=1e-12)
    assert r.lhs >= r.rhs - r.tolerance


def test_minkowski_second_planar_against_quadrature(d2_fine):
    """n = 2, K = B, L an ellipse: lhs = (perimeter/2)^2/pi - area."""
    a, b = 1.4, 0.8
    B, E = ball(d2_fine), ellipsoid(d2_fine, [a, b])
    r = il.minkowski_second_stability(B, E)
    per, _ = _ellipse_oracle(a, b)
    assert r.lhs == pytest.approx((per / 2) ** 2 / math.pi - math.pi * a * b, rel=1e-10)
    # distance of L to its best ball: only degree >= 2 content of h_E is left
    assert r.verdict == "holds"


def test_heintze_karcher_ball_against_quadrature(d2_fine):
    a, b = 1.3, 0.9
    B, E = ball(d2_fine), ellipsoid(d2_fine, [a, b])
    r = il.heintze_karcher_planar(B, E)
    per, rho2 = _ellipse_oracle(a, b)
    area = math.pi * a * b
    assert r.lhs == pytest.approx(0.5 * rho2 - area, rel=1e-9)
    assert r.rhs == pytest.approx(4 * (per**2 / (4 * math.pi) - area), rel=1e-9)
    assert r.verdict == "holds"


def test_heintze_karcher_planar_only(d3):
    with pytest.raises(WrongDimension):
        il.heintze_karcher_planar(ball(d3), ball(d3))


def test_symmetric_stability_requires_symmetry(d3):
    K = perturbed_ball(d3, [(3, 1, 0.05)])
    with pytest.raises(NotSymmetric):
        il.symmetric_stability(K, ball(d3))


def test_homothetic_copy_gives_zero_distance(d3):
    K = perturbed_ball(d3, [(2, 0, 0.1), (3, 1, 0.04)])
    L = (1.8 * K).translate([0.1, -0.2, 0.05])
    r = il.minkowski_second_stability(K, L)
    assert r.details["c"] == pytest.approx(1.8, rel=1e-12)
    assert np.allclose(r.details["v"], [0.1, -0.2, 0.05], atol=1e-12)
    assert r.details["distance"] < 1e-10
    assert r.verdict == "equality"


def test_reports_scale_covariant(d3):
    K = perturbed_ball(d3, [(2, 0, 0.1), (3, 2, 0.05)])
    L = perturbed_ball(d3, [(2, 2, 0.12), (1, 0, 0.05)])
    lam = lambda2(K)
    r1 = il.minkowski_second_stability(K, L, lam)
    r2 = il.minkowski_second_stability(K, 2.0 * L, lam)
    assert r2.lhs == pytest.approx(4 * r1.lhs, rel=1e-9)
    assert r2.rhs == pytest.approx(4 * r1.rhs, rel=1e-9)


def test_ratio_bm_reduces_to_minkowski_second(d3):
    """With L2 = K the ratio inequality is the Minkowski one, rescaled."""
    K = perturbed_ball(d3, [(2, 0, 0.1), (3, 2, 0.05)])
    L = perturbed_ball(d3, [(2, 2, 0.12), (1, 0, 0.05)])
    lam = lambda2(K)
    m = il.minkowski_second_stability(K, L, lam)
    r = il.ratio_bm_stability(K, L, K, lam)
    A1, V = r.details["A1"], volume(K)
    f = A1 * (A1 + V) / V
    assert r.lhs * f == pytest.approx(m.lhs, rel=1e-9)
    assert r.rhs * f == pytest.approx(m.rhs, rel=1e-9)


def test_xk_ellipsoid_equality_and_ball_stability(d3):
    E = ellipsoid(d3, [1.2, 1.0, 0.85])
    first, second = il.xk_inequality(E)
    assert first.verdict == "equality"
    _, sB = il.xk_inequality(ball(d3))
    assert sB.verdict == "equality"


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6), st.floats(0.02, 0.15))
def test_random_pairs_satisfy_suite(raw, amp):
    from hbmlab.spherical_basis import make_domain

    d = make_domain(3, 8)
    modes_K = [(2, 0, amp * raw[0]), (2, 1, amp * raw[1]), (3, -2, amp * raw[2] / 2)]
    modes_L = [(2, 2, amp * raw[3]), (1, 1, amp * raw[4]), (3, 0, amp * raw[5] / 2)]
    K, L = perturbed_ball(d, modes_K), perturbed_ball(d, modes_L)
    lam = lambda2(K)
    f = L.jet / K.jet
    reports = [
        il.local_bm(K, il.project_mean_free(K, f)),
        il.alexandrov_fenchel(K, f, (L,)),
        il.spectral_gap_ineq(K, f, lam),
        il.reverse_ineq(K, f, lam),
        il.stability_bm(K, f, lam),
        il.minkowski_second_stability(K, L, lam),
        *il.xk_inequality(K, lam),
    ]
    assert all(r.verdict != "violated" for r in reports), [
        (r.name, r.residual) for r in reports if r.verdict == "violated"
    ]
