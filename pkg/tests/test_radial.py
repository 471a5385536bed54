import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from wulff.anisotropy import AnisoNorm
from wulff.errors import InadmissibleParams, LambdaTooLarge, OutOfDomain
from wulff.radial import (
    ProblemParams,
    RadialSolution,
    beta_function,
    branch_membership_check,
    build_radial,
    phi_eval,
    radial_ode_residual,
    residual_1d,
    second_solution,
    sobolev_threshold,
    solve_beta,
    transform_V,
    transform_V_numeric,
    v_eval,
    v_star,
)

P3 = ProblemParams(3, 2.0, 2.0, 3 / 16)


def test_beta_quadratic_oracle():
    # beta^2 - beta + 3/16 = 0 has roots 1/4 and 3/4
    assert solve_beta(P3) == pytest.approx(0.25, abs=1e-12)
    assert solve_beta(P3.with_lam(0.0)) == 0.0
    with pytest.raises(LambdaTooLarge):
        solve_beta(P3.with_lam(P3.lam_max))


def test_derived_constants():
    assert (P3.gamma, P3.c_gamma, P3.Lambda_gamma) == (2.0, 1.0, 0.25)
    P = ProblemParams(2, 1.5, 1.4)
    assert P.gamma == pytest.approx(1.4 / 0.9)
    assert P.delta_tilde == pytest.approx(2 / (2 - P.gamma + 1))
    assert P.s_tilde == pytest.approx(1.8)


@pytest.mark.parametrize("args", [(1, 1.5, 1.5), (2, 2.0, 2.0), (3, 0.9, 0.5), (3, 2, 2.5), (2, 1.5, 0.95)])
def test_inadmissible(args):
    with pytest.raises(InadmissibleParams):
        ProblemParams(*args)


def test_phi_examples():
    sol = build_radial(ProblemParams(3, 2.0, 2.0, 3 / 16, 1.0))
    assert phi_eval(sol, 1.0) == 0.0
    assert phi_eval(sol, 1 / 16) == pytest.approx(1.0, abs=1e-15)
    assert v_eval(sol, math.exp(-1)) == pytest.approx(0.25, abs=1e-15)
    z = build_radial(P3.with_lam(0.0))
    assert z.case == "lambda_zero"
    assert np.all(phi_eval(z, np.linspace(0.1, 1, 5)) == 0)
    with pytest.raises(OutOfDomain):
        phi_eval(sol, 0.0)
    with pytest.raises(OutOfDomain):
        v_eval(sol, 1.5)


def test_q_equal_p_transform_exact():
    sol = build_radial(P3)
    r = np.logspace(-3, 0, 50)
    assert np.max(np.abs(transform_V(sol, r) - ((1 / r) ** 0.25 - 1))) < 1e-13


def test_q_less_p_closed_form_and_quadrature():
    P = ProblemParams(3, 2.0, 1.8, 0.0).with_lam(0.4 * ProblemParams(3, 2.0, 1.8).lam_max)
    sol = build_radial(P)
    m = (P.p - P.q) / P.a
    r = np.array([0.01, 0.2, 0.7])
    assert np.allclose(sol.v(r), sol.theta * (r ** -m - 1.0), rtol=1e-14)
    assert sol.theta == pytest.approx(((P.gamma - 1) * sol.beta) ** (1 / P.a) * P.a / (P.p - P.q))
    assert np.allclose(transform_V_numeric(sol, r), sol.phi(r), rtol=1e-9)


def test_residuals():
    sol = build_radial(P3)
    r = np.linspace(0.05, 1.0, 200)
    assert residual_1d(sol, r) < 1e-8
    assert radial_ode_residual(sol, r) < 1e-9
    rejected = RadialSolution.from_beta(P3, 0.75, check=False)
    assert residual_1d(rejected, r) < 1e-8
    assert not branch_membership_check(rejected).passed
    assert branch_membership_check(sol).passed
    z = build_radial(P3.with_lam(0.0))
    assert residual_1d(z, r) == 0.0
    assert branch_membership_check(z).passed


def test_fd_residual_converges():
    P = ProblemParams(3, 2.5, 2.4).with_lam(0.3 * ProblemParams(3, 2.5, 2.4).lam_max)
    sol = build_radial(P)
    r = np.linspace(0.2, 0.9, 40)
    errs = [residual_1d(sol.phi, r, P, method="fd", h=h) for h in (1e-2, 5e-3, 2.5e-3)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.0)


def test_second_solution():
    P = ProblemParams(3, 2.0, 1.8, 0.0)
    u2 = second_solution(P)
    r = np.linspace(0.05, 1.0, 50)
    # u2 solves the radial equation with lam = 0
    assert radial_ode_residual(u2, r) < 1e-9
    assert u2.beta == pytest.approx((P.N - P.gamma) / (P.gamma - 1))
    rep = branch_membership_check(u2)
    assert not rep.passed and not rep.w1gamma_ok and rep.deltas_ok == []


def test_sobolev_threshold_is_s_tilde():
    P = ProblemParams(2, 1.5, 1.4).with_lam(0.5 * ProblemParams(2, 1.5, 1.4).lam_max)
    assert sobolev_threshold(build_radial(P)) == pytest.approx(P.s_tilde, rel=1e-6)


def test_continuity_across_case_split():
    lam = 0.1
    P_eq = ProblemParams(3, 2.0, 2.0, lam)
    P_lt = ProblemParams(3, 2.0, 2.0 - 1e-6, lam)
    r = np.linspace(0.05, 1.0, 20)
    assert np.max(np.abs(build_radial(P_eq).v(r) - build_radial(P_lt).v(r))) < 1e-4


def test_v_star():
    H = AnisoNorm.euclidean(3)
    sol = build_radial(P3, H.kappa)
    vs = v_star(sol)
    assert vs(H.kappa) == pytest.approx(0.0, abs=1e-15)
    s = np.logspace(-4, 0, 30) * H.kappa
    assert np.allclose(vs(s), 0.25 * np.log(1 / (s / H.kappa) ** (1 / 3)), rtol=1e-12, atol=1e-15)
    assert np.all(np.diff(vs(s)) < 0)
    with np.errstate(divide="ignore"):
        d = (vs(s * (1 + 1e-6)) - vs(s)) / (s * 1e-6)
    assert np.allclose(vs.derivative(s[:-1]), d[:-1], rtol=1e-4)


def test_bracket_endpoints():
    for N, p, q in [(3, 2, 2), (2, 1.5, 1.4), (4, 3, 2.9)]:
        P = ProblemParams(N, p, q)
        assert beta_function(0.0, N, P.gamma) == 0.0
        assert float(beta_function(P.beta_max, N, P.gamma)) == pytest.approx(P.Lambda_gamma, abs=1e-12)


@st.composite
def admissible(draw):
    N = draw(st.sampled_from([2, 3]))
    p = draw(st.floats(1.05, min(2.5, N) - 0.05))
    lo = N * (p - 1) / (N - 1)
    q = draw(st.floats(lo + 1e-3, p)) if lo + 1e-3 < p else p
    frac = draw(st.floats(0.0, 0.99))
    R = draw(st.floats(0.5, 3.0))
    base = ProblemParams(N, p, q, 0.0, R)
    return base.with_lam(frac * base.lam_max)


@settings(max_examples=60, deadline=None)
@given(admissible())
@example(ProblemParams(3, 1.0546875, 0.08303125, 3.230285123278587e-05))  # m ~ 34, theta ~ 1e-60
def test_transform_equals_phi(P):
    sol = build_radial(P)
    assert 0 <= sol.beta < P.beta_max
    assert abs(float(beta_function(sol.beta, P.N, P.gamma)) - P.lam / P.c_gamma) <= 1e-12
    r = P.R * np.logspace(-3, 0, 200)
    assert np.max(np.abs(sol.V(r) - sol.phi(r))) < 1e-9
    assert branch_membership_check(sol).passed


@settings(max_examples=40, deadline=None)
@given(admissible(), st.floats(0.0, 0.99))
def test_beta_monotone_in_lambda(P, frac2):
    b1 = solve_beta(P)
    b2 = solve_beta(P.with_lam(frac2 * P.lam_max))
    assert (b1 - b2) * (P.lam - frac2 * P.lam_max) >= 0
