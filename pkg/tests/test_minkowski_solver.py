import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hbmlab import minkowski_solver as ms
from hbmlab.body_geometry import ball, ellipsoid, perturbed_ball
from hbmlab.errors import DomainError
from hbmlab.spherical_basis import make_domain


@pytest.fixture(scope="module")
def classify_10():
    return ms.classify_planar(-10.0)


def test_predicted_branches():
    assert ms.predicted_branches(-10) == [3]
    assert ms.predicted_branches(-20) == [3, 4]
    assert ms.predicted_branches(-7) == []
    assert ms.predicted_branches(-34) == [3, 4, 5]


def test_time_map_small_amplitude_limit():
    """Near the circle the half period tends to pi / sqrt(2 - p)."""
    for p in (-3.0, -10.0):
        T = ms.time_map(p, np.array([1.0 + 1e-4]))[0]
        assert T == pytest.approx(math.pi / math.sqrt(2 - p), rel=1e-3)


def test_classify_counts(classify_10):
    assert classify_10["found"] == [3]
    assert classify_10["predicted"] == [3]
    sol = classify_10["solutions"][3][0]
    assert sol.residual < 1e-9
    assert abs(sol.end_slope) < 1e-10
    assert sol.h0 > 1.0 > sol.h_min


def test_bracket_has_sign_change(classify_10):
    sol = classify_10["solutions"][3][0]
    s_lo, s_hi = sol.bracket_slopes
    assert s_lo * s_hi < 0


def test_profile_solves_ode_independently(classify_10):
    """Re-integrate from the reported maximum with a different integrator."""
    sol = classify_10["solutions"][3][0]
    p = sol.p
    out = solve_ivp(lambda t, y: [y[1], y[0] ** (p - 1) - y[0]], (0, math.pi / 3),
                    [sol.h0, 0.0], method="Radau", rtol=1e-11, atol=1e-13)
    assert out.y[1, -1] == pytest.approx(0.0, abs=1e-7)
    assert out.y[0, -1] == pytest.approx(sol.h_min, rel=1e-7)


def test_no_branches_below_threshold():
    res = ms.classify_planar(-5.0)
    assert res["found"] == [] and res["predicted"] == []


def test_domain_errors():
    with pytest.raises(DomainError):
        ms.classify_planar(-1.0)
    with pytest.raises(DomainError):
        ms.solve_planar_branch(1.0, 3)


def test_planar_conversion_is_solution(classify_10):
    sol = classify_10["solutions"][3][0]
    K = ms.planar_to_support(sol)
    assert K.truncation_residual < 1e-11
    assert ms.planar_residual(K, sol.p) < 1e-8
    # k-fold symmetry: only multiples of k in the spectrum
    d = K.domain
    off = np.abs(K.coeffs[(d.degrees % 3) != 0]).max()
    assert off < 1e-12


def test_ball_is_fixed_point(d3):
    rep = ms.solve_sphere(-2.0, ball(d3))
    assert rep.newton_iters == 0
    assert rep.pde_residual < 1e-13


@pytest.mark.parametrize("p", [-1.0, -2.0, -2.9])
def test_sphere_newton_returns_to_ball(d3, p):
    rep = ms.solve_sphere(p, ms.sphere_initial(d3, "perturbed", 0.1, 2, 0))
    assert rep.pde_residual < 1e-10
    assert np.abs(rep.body.values - 1).max() < 1e-10
    h = rep.history
    # quadratic tail: each residual at most a multiple of the square of the previous
    tail = [(h[i + 1], h[i]) for i in range(len(h) - 1) if h[i] < 1e-3 and h[i + 1] > 1e-14]
    assert all(a <= 50 * b * b for a, b in tail)


def test_ellipsoid_critical_exponent():
    d = make_domain(3, 20)
    E = ellipsoid(d, [1.25, 1.0, 0.8])
    assert np.abs(ms.pde_residual(E, -3.0)).max() < 1e-5


def test_jacobian_second_order(d3_small):
    K = perturbed_ball(d3_small, [(2, 0, 0.1), (3, 1, 0.05)])
    errs = ms.jacobian_check(K, -2.5)
    ratios = errs[:-1] / errs[1:]
    assert np.all(np.abs(ratios - 4) < 0.2)


def test_proof_identities_on_solutions(d3):
    for K, p in ((ball(d3, 1.0), -2.0), (ellipsoid(make_domain(3, 16), [1.25, 1.0, 0.8]), -3.0)):
        ids = ms.proof_identities(K, p)
        assert abs(ids["laplacian"]) < 1e-7
        assert ids["centroid"] < 1e-7


def test_proof_identities_planar(classify_10):
    K = ms.planar_to_support(classify_10["solutions"][3][0])
    ids = ms.proof_identities(K, -10.0)
    assert abs(ids["laplacian"]) < 1e-7 and ids["centroid"] < 1e-7


def test_uniqueness_ball(d3):
    B = ball(d3)
    out = ms.check_uniqueness_hypotheses(B, -6.0)
    assert out["verdicts"]["origin_centred"] == "met"
    assert out["verdicts"]["origin_centred_conclusion"] == "unit_ball"
    assert out["verdicts"]["isotropic"] == "out_of_range"
    out = ms.check_uniqueness_hypotheses(B, -4.0)
    assert out["verdicts"]["origin_centred"] == "met"
    assert out["verdicts"]["isotropic"] == "met"


def test_uniqueness_not_isotropic_ellipsoid(d3):
    E = ellipsoid(d3, [1.25, 1.0, 0.8])
    out = ms.check_uniqueness_hypotheses(E, -4.0)
    assert out["verdicts"]["isotropic"] == "not_met"
    assert "isotropic_conclusion" not in out["verdicts"]


def test_threshold_boundary():
    assert ms._threshold_verdict(2.0 + 1e-8, 2.0, True) == "boundary"
    assert ms._threshold_verdict(1.0, 2.0, True) == "not_met"
    assert ms._threshold_verdict(3.0, 2.0, False) == "out_of_range"


def test_solve_report_dict(d3_small):
    rep = ms.solve_sphere(-2.0, ms.sphere_initial(d3_small, "perturbed", 0.05))
    out = rep.to_dict()
    assert out["n"] == 3 and out["newton_iters"] == len(out["history"]) - 1
