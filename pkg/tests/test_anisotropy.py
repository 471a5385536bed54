import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from wulff.anisotropy import (
    AnisoNorm,
    check_identities,
    h_eval,
    h_grad,
    kappa_quadrature,
    numeric_polar,
    polar_eval,
    wulff_boundary,
    wulff_kappa,
)
from wulff.errors import NonSmoothNorm, UnsupportedDimension

SMOOTH = [AnisoNorm.euclidean(), AnisoNorm.rnorm(4), AnisoNorm.rnorm(1.5), AnisoNorm.ellipse(2, 1)]


def test_rnorm_values_at_diagonal():
    H = AnisoNorm.rnorm(4)
    assert h_eval(H, [1.0, 1.0]) == pytest.approx(2 ** 0.25, rel=1e-14)
    g = h_grad(H, np.array([1.0, 1.0]))
    assert np.allclose(g, 2 ** -0.75, rtol=1e-13)


def test_ellipse_polar_is_inverse_matrix():
    H = AnisoNorm.ellipse(2, 1)
    # W_1 = {x^2/4 + y^2 < 1}
    assert polar_eval(H, [2.0, 0.0]) == pytest.approx(1.0)
    assert polar_eval(H, [0.0, 1.0]) == pytest.approx(1.0)
    assert H.kappa == pytest.approx(2 * math.pi)


def test_kappa_rnorm_against_quadrature():
    H = AnisoNorm.rnorm(4)
    # unit Wulff shape is the ball of the conjugate 4/3-norm
    val, _ = integrate.quad(lambda x: (1 - x ** (4 / 3)) ** (3 / 4), 0, 1, epsabs=1e-13)
    assert wulff_kappa(H) == pytest.approx(4 * val, rel=1e-9)
    assert kappa_quadrature(H) == pytest.approx(4 * val, rel=1e-9)


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_kappa_euclidean_ball(dim):
    vol = {2: math.pi, 3: 4 * math.pi / 3, 4: math.pi ** 2 / 2}[dim]
    assert wulff_kappa(AnisoNorm.euclidean(dim)) == pytest.approx(vol, rel=1e-14)


@pytest.mark.parametrize("H", SMOOTH, ids=lambda h: h.family + str(h.r or ""))
def test_identities(H):
    rep = check_identities(H, 500, rng=1)
    assert rep.max_violation < 1e-10


@pytest.mark.parametrize("H", SMOOTH, ids=lambda h: h.family + str(h.r or ""))
def test_numeric_polar_matches_closed_form(H):
    rng = np.random.default_rng(2)
    for x in rng.standard_normal((5, 2)):
        assert numeric_polar(lambda u: h_eval(H, u), x) == pytest.approx(float(polar_eval(H, x)), rel=1e-9)


def test_sampled_gauge_is_nonsmooth_but_has_polar():
    ang = np.linspace(0, np.pi, 3, endpoint=False)
    H = AnisoNorm.sampled(ang, np.ones(3))
    assert not H.smooth
    with pytest.raises(NonSmoothNorm):
        h_grad(H, np.array([1.0, 0.2]))
    x = np.array([0.3, -0.7])
    assert float(polar_eval(H, x)) == pytest.approx(numeric_polar(lambda u: h_eval(H, u), x, n_dirs=3600), rel=1e-7)
    assert H.kappa == pytest.approx(kappa_quadrature(H), rel=1e-8)


def test_sampled_needs_2d():
    with pytest.raises(UnsupportedDimension):
        AnisoNorm("sampled", 3, vertices=np.eye(3))


def test_spec_round_trip():
    for H in SMOOTH:
        H2 = AnisoNorm.from_spec(H.to_spec())
        x = np.array([[0.3, -1.2], [2.0, 0.5]])
        assert np.allclose(h_eval(H, x), h_eval(H2, x))


def test_wulff_boundary_on_level_set():
    for H in SMOOTH:
        P = wulff_boundary(H, 2.5, 64)
        assert np.allclose(polar_eval(H, P), 2.5)


vec = st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)).filter(lambda v: math.hypot(*v) > 1e-6)


@settings(max_examples=60, deadline=None)
@given(vec, vec, st.floats(-50, 50).filter(lambda t: t == 0 or abs(t) > 1e-100))
def test_gauge_axioms(a, b, t):
    for H in SMOOTH:
        a_, b_ = np.array(a), np.array(b)
        Ha, Hb = float(h_eval(H, a_)), float(h_eval(H, b_))
        assert float(h_eval(H, t * a_)) == pytest.approx(abs(t) * Ha, rel=1e-12, abs=1e-300)
        assert float(h_eval(H, a_ + b_)) <= (Ha + Hb) * (1 + 1e-12)
        c1, c2 = H.sandwich
        n = math.hypot(*a)
        assert c1 * n * (1 - 1e-12) <= Ha <= c2 * n * (1 + 1e-12)
        # a . b <= H(a) H°(b)
        assert float(a_ @ b_) <= Ha * float(polar_eval(H, b_)) * (1 + 1e-12) + 1e-9
