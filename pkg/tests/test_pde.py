import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from wulff.anisotropy import AnisoNorm, polar_eval
from wulff.errors import DegenerateDomain, NoConvergence, NonSmoothNorm
from wulff.mesh import Mask, Rectangle, WulffDisc, build_mesh, p1_energy
from wulff.pde import (
    ProblemSpec,
    SolverConfig,
    _factor,
    energy_and_gradients,
    solve_dirichlet,
    solve_schedule,
    truncate_source,
)

EUC = AnisoNorm.euclidean(2)
SQUARE = Rectangle((0.0, 1.0, 0.0, 1.0))


# ------------------------------------------------------------------ meshes
def test_rectangle_mesh_counts():
    m = build_mesh(SQUARE, 1 / 32)
    assert m.n_triangles == 2 * 32 * 32
    assert m.n_vertices == 33 * 33
    assert m.area == pytest.approx(1.0, abs=1e-13)
    assert np.all(m.areas > 0)
    assert m.boundary.sum() == 4 * 32


@pytest.mark.parametrize("norm,area", [(EUC, math.pi), (AnisoNorm.ellipse(2.0, 1.0), 2 * math.pi)])
def test_wulff_disc_area(norm, area):
    m = build_mesh(WulffDisc(norm), 1 / 32)
    assert abs(m.area - area) / area < 1e-2
    # boundary vertices sit on H° = 1
    assert np.allclose(polar_eval(norm, m.vertices[m.boundary]), 1.0, atol=1e-12)


def test_graded_disc_refines_origin():
    m = build_mesh(WulffDisc(EUC, grading=1e-6), 1 / 16)
    assert m.local_size(np.zeros(2)) < 1e-5
    assert m.area == pytest.approx(math.pi, rel=1e-2)


def test_mask_with_hole():
    mask = np.ones((6, 6), bool)
    mask[2:4, 2:4] = False
    m = build_mesh(Mask(mask), 1.0)
    assert m.area == pytest.approx(32.0)
    hole_corner = np.flatnonzero(np.all(m.vertices == [2.0, 2.0], axis=1))
    assert m.boundary[hole_corner].all()
    assert m.boundary.sum() == 24 + 8


def test_degenerate_domains():
    with pytest.raises(DegenerateDomain):
        build_mesh(SQUARE, 0.0)
    with pytest.raises(DegenerateDomain):
        build_mesh(Mask(np.zeros((3, 3), bool)), 1.0)
    with pytest.raises(DegenerateDomain):
        build_mesh(Mask(np.ones((1, 1), bool)), 1.0)


def test_refined_field_measure():
    m = build_mesh(WulffDisc(EUC), 1 / 8)
    f = m.refined_field(np.ones(m.n_vertices), 3)
    assert f.total == pytest.approx(m.area)
    assert np.allclose(f.values, 1.0)


# ---------------------------------------------------------------- truncation
@settings(max_examples=60)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30), st.floats(1e-3, 10.0))
def test_truncation_properties(vals, eps):
    f = np.array(vals)
    t = truncate_source(f, eps)
    assert np.all(np.abs(t) <= 1 / eps + 1e-12)
    assert np.array_equal(truncate_source(t, eps), t)
    inside = np.abs(f) <= 1 / eps
    assert np.array_equal(t[inside], f[inside])
    assert np.all(np.sign(t) == np.sign(f))


def test_truncation_of_singular_datum():
    assert truncate_source(np.array([np.inf, -np.inf, 2.0]), 0.1).tolist() == [10.0, -10.0, 2.0]


# --------------------------------------------------------------- problem data
def test_spec_validation():
    with pytest.raises(ValueError):
        ProblemSpec(EUC, 2.0, 0.9)
    with pytest.raises(ValueError):
        ProblemSpec(EUC, 2.0, 2.0, epsilon=0.0)
    with pytest.raises(NonSmoothNorm):
        ProblemSpec(AnisoNorm.sampled(np.linspace(0, 2 * np.pi, 16, endpoint=False), np.ones(16)), 2.0, 2.0)


@pytest.mark.parametrize("norm", [EUC, AnisoNorm.ellipse(2.0, 1.0), AnisoNorm.rnorm(3.0, 2)])
def test_structure_conditions(norm):
    ell, mono = ProblemSpec(norm, 1.7, 1.5).validate(samples=2000, rng=0)
    assert ell >= -1e-10
    assert mono >= -1e-10


# ----------------------------------------------------------------- solver
def test_zero_data_zero_solution():
    m = build_mesh(SQUARE, 1 / 8)
    rep = solve_dirichlet(ProblemSpec(EUC, 1.5, 1.4, source=0.0), m)
    assert rep.converged and rep.iterations == 1
    assert np.all(rep.u == 0)


def test_linear_case_matches_direct_solve():
    m = build_mesh(SQUARE, 1 / 16)
    f = lambda x: 1.0 + x[:, 0] * x[:, 1]
    rep = solve_dirichlet(ProblemSpec(EUC, 2.0, 2.0, source=f, b_sign=0.0, epsilon=1e-12), m, SolverConfig(tol=1e-13))
    inner = m.interior
    w = np.zeros(m.n_vertices)
    w[inner] = _factor(m.interior_stiffness()).solve((m.mass @ f(m.vertices))[inner])
    assert np.max(np.abs(rep.u - w)) < 1e-10


def test_hopf_cole():
    # p = q = 2, Euclidean: u solves -Lap u = |Du|^2 + f iff w = e^u - 1 solves -Lap w = f (w + 1)
    tol = 1e-10
    for n in (16, 32):
        h = 1 / n
        m = build_mesh(SQUARE, h)
        f = lambda x: 1.5 + np.sin(np.pi * x[:, 0])
        rep = solve_dirichlet(ProblemSpec(EUC, 2.0, 2.0, source=f, epsilon=1e-12), m, SolverConfig(tol=tol))
        assert rep.converged
        inner, fv = m.interior, f(m.vertices)
        A = (m.interior_stiffness() - m.mass.multiply(fv[None, :]).tocsc()[inner][:, inner]).tocsc()
        w = np.zeros(m.n_vertices)
        w[inner] = _factor(A).solve((m.mass @ fv)[inner])
        assert np.max(np.abs(rep.u - np.log1p(w))) <= 5 * (h * h + tol)


def _manufactured(p, q, a, b):
    x, y = sp.symbols("x y")
    u = sp.sin(sp.pi * x) * sp.sin(sp.pi * y)
    ux, uy = sp.diff(u, x), sp.diff(u, y)
    H = sp.sqrt(a**2 * ux**2 + b**2 * uy**2)
    ax, ay = H ** (p - 2) * a**2 * ux, H ** (p - 2) * b**2 * uy
    f = -(sp.diff(ax, x) + sp.diff(ay, y)) - H**q
    fu = sp.lambdify((x, y), f, "numpy")
    uu = sp.lambdify((x, y), u, "numpy")
    def source(X):
        # 0 * inf at critical points of u, where the limit is 0 for p > 2
        with np.errstate(all="ignore"):
            return np.nan_to_num(fu(X[:, 0], X[:, 1]), nan=0.0)

    return source, (lambda X: uu(X[:, 0], X[:, 1]))


def test_manufactured_solution_first_order():
    p, q = 2.5, 2.2
    f, u_ex = _manufactured(p, q, 1.5, 1.0)
    norm = AnisoNorm.ellipse(1.5, 1.0)
    errs = []
    for n in (8, 16, 32):
        m = build_mesh(SQUARE, 1 / n)
        rep = solve_dirichlet(ProblemSpec(norm, p, q, source=f, epsilon=1e-12), m, SolverConfig(tol=1e-10))
        assert rep.converged
        errs.append(np.max(np.abs(rep.u - u_ex(m.vertices))))
    errs = np.array(errs)
    assert np.all(np.log2(errs[:-1] / errs[1:]) > 0.9)
    assert errs[-1] < 2e-2


def test_residual_decreases():
    m = build_mesh(WulffDisc(EUC), 1 / 16)
    spec = ProblemSpec(EUC, 1.5, 1.5, lam=0.05, epsilon=0.05)
    rep = solve_dirichlet(spec, m)
    assert rep.converged
    tail = np.array(rep.history[5:])
    assert np.all(np.diff(tail) <= 1e-12 * tail[0])


def test_no_convergence():
    m = build_mesh(SQUARE, 1 / 8)
    spec = ProblemSpec(EUC, 1.5, 1.4, source=5.0)
    rep = solve_dirichlet(spec, m, SolverConfig(max_iter=2))
    assert not rep.converged and rep.iterations == 2
    with pytest.raises(NoConvergence) as err:
        solve_dirichlet(spec, m, SolverConfig(max_iter=2), strict=True)
    assert err.value.report.iterations == 2


def test_schedule_monotone_in_epsilon():
    m = build_mesh(WulffDisc(EUC), 1 / 16)
    reps = solve_schedule(ProblemSpec(EUC, 1.5, 1.5, lam=0.05), m, [0.2, 0.1, 0.05])
    assert [r.epsilon for r in reps] == [0.2, 0.1, 0.05]
    peaks = [r.u.max() for r in reps]
    assert peaks[0] <= peaks[1] <= peaks[2]
    assert all(r.converged for r in reps)


# ----------------------------------------------------------------- energies
@pytest.mark.parametrize("norm,area", [(EUC, math.pi), (AnisoNorm.ellipse(2.0, 1.0), 2 * math.pi)])
def test_energy_of_cone(norm, area):
    m = build_mesh(WulffDisc(norm), 1 / 32)
    u = 1.0 - polar_eval(norm, m.vertices)
    # H(D H°) = 1 a.e., so the energy is |W_1|
    assert p1_energy(m, u, norm, 2.0) == pytest.approx(area, rel=1e-2)


def test_energy_homogeneity():
    m = build_mesh(SQUARE, 1 / 8)
    rep = solve_dirichlet(ProblemSpec(EUC, 1.8, 1.6, source=1.0), m)
    spec = ProblemSpec(EUC, 1.8, 1.6)
    e1 = energy_and_gradients(rep, spec)
    rep.solution = rep.solution.with_values(2 * rep.u)
    e2 = energy_and_gradients(rep, spec)
    assert e2["energy_p"] == pytest.approx(2**1.8 * e1["energy_p"])
    assert e2["energy_q"] == pytest.approx(2**1.6 * e1["energy_q"])
