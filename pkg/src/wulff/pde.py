"""Damped Picard solver for the truncated Dirichlet problems

    -div a(Du) = b_eps(Du) + T_{1/eps} f   in Omega,   u = 0 on the boundary,

with b_eps = b / (1 + eps |b|), discretised by P1 finite elements.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from .anisotropy import AnisoNorm, h_eval, polar_eval
from .errors import NoConvergence, NonSmoothNorm
from .mesh import p1_energy
from .rearrange import GridFunction

log = logging.getLogger(__name__)


@dataclass
class ProblemSpec:
    """Data of one truncated problem.

    ``source`` is a callable of the points, a constant, an array of vertex
    values, or ``None`` for the model datum lam / H°(x)^gamma.  ``flux`` may
    replace the model flux H(xi)^(p-1) DH(xi); it must return the matrices
    K(xi) with a(xi) = K(xi) xi.
    """

    norm: AnisoNorm
    p: float
    q: float
    lam: float = 0.0
    source: object = None
    epsilon: float = 0.1
    b_sign: float = 1.0
    flux: object = None

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not (self.p - 1 < self.q <= self.p):
            raise ValueError("need p - 1 < q <= p")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.flux is None and not self.norm.smooth:
            raise NonSmoothNorm("the model flux needs a differentiable norm")

    @property
    def gamma(self):
        return self.q / (self.q - (self.p - 1))

    def source_values(self, points):
        if self.source is None:
            with np.errstate(divide="ignore"):
                return self.lam / polar_eval(self.norm, points) ** self.gamma
        if callable(self.source):
            return np.asarray(self.source(points), dtype=float)
        return np.broadcast_to(np.asarray(self.source, dtype=float), points.shape[:1]).copy()

    def coefficient(self, xi, eps_reg=0.0):
        """K(xi) with a(xi) = K(xi) xi."""
        if self.flux is not None:
            return np.asarray(self.flux(xi), dtype=float)
        H2 = h_eval(self.norm, xi) ** 2 + (eps_reg * self.norm.c1) ** 2
        with np.errstate(divide="ignore"):
            w = H2 ** ((self.p - 2.0) / 2.0)
        return w[:, None, None] * self.norm.secant_matrix(xi, eps_reg)

    def flux_value(self, xi, eps_reg=0.0):
        return np.einsum("tab,tb->ta", self.coefficient(xi, eps_reg), xi)

    def lower_order(self, xi):
        """b_eps(xi) = b / (1 + eps |b|) with b = b_sign * H(xi)^q."""
        b = self.b_sign * h_eval(self.norm, xi) ** self.q
        return b / (1.0 + self.epsilon * np.abs(b))

    def validate(self, samples=1000, rng=None):
        """Sample the structural hypotheses; returns the worst (ellipticity, monotonicity) slack."""
        rng = np.random.default_rng(rng)
        xi = rng.standard_normal((samples, self.norm.dim)) * 10.0 ** rng.uniform(-2, 2, (samples, 1))
        eta = rng.standard_normal((samples, self.norm.dim)) * 10.0 ** rng.uniform(-2, 2, (samples, 1))
        a = self.flux_value(xi)
        Hp = h_eval(self.norm, xi) ** self.p
        ell = np.min((np.einsum("ij,ij->i", a, xi) - Hp) / Hp)
        mono = np.einsum("ij,ij->i", a - self.flux_value(eta), xi - eta)
        return float(ell), float(mono.min())


def truncate_source(f, epsilon):
    """T_{1/eps} f = max(-1/eps, min(1/eps, f)) pointwise."""
    t = 1.0 / epsilon
    if isinstance(f, GridFunction):
        return f.with_values(np.clip(f.values, -t, t))
    return np.clip(np.asarray(f, dtype=float), -t, t)


@dataclass
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 300
    damping: float = 0.7
    eps_reg: float | None = None


@dataclass
class SolveReport:
    solution: GridFunction
    iterations: int
    residual: float
    converged: bool
    energy: float
    epsilon: float
    history: list = field(default_factory=list)

    @property
    def mesh(self):
        return self.solution.mesh

    @property
    def u(self):
        return self.solution.values

    def summary(self):
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "energy": self.energy,
            "epsilon": self.epsilon,
            "max_u": float(np.max(self.u)),
        }


def _factor(A):
    return splu(A, permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})


def solve_dirichlet(spec, mesh, cfg=None, u0=None, strict=False):
    cfg = cfg or SolverConfig()
    nv = mesh.n_vertices
    inner = mesh.interior
    lap_lu = _factor(mesh.interior_stiffness())

    f_h = truncate_source(spec.source_values(mesh.vertices), spec.epsilon)
    f_h[mesh.boundary] = np.where(np.isfinite(f_h[mesh.boundary]), f_h[mesh.boundary], 0.0)
    F_f = mesh.mass @ f_h

    if cfg.eps_reg is None:
        diam = float(np.ptp(mesh.vertices, axis=0).max())
        scale = (np.abs(f_h).max() * diam) ** (1.0 / (spec.p - 1.0)) if np.any(f_h) else 1.0
        eps_reg = 1e-8 * max(scale, 1e-12)
    else:
        eps_reg = cfg.eps_reg

    u = np.zeros(nv)
    if u0 is not None:
        u[inner] = np.asarray(u0, dtype=float)[inner]
    elif np.any(F_f[inner]):
        # Laplace solve, rescaled so that the energy balance of the p-homogeneous flux holds
        w = np.zeros(nv)
        w[inner] = lap_lu.solve(F_f[inner])
        e = p1_energy(mesh, w, spec.norm, spec.p)
        if e > 0:
            w *= (max(float(F_f @ w), 0.0) / e) ** (1.0 / (spec.p - 1.0))
        u = w

    history = []
    best_res, best_u = math.inf, u.copy()
    converged = False
    for it in range(1, cfg.max_iter + 1):
        g = mesh.gradient(u)
        A = mesh.interior_stiffness(spec.coefficient(g, eps_reg))
        F = (F_f + mesh.cell_load(spec.lower_order(g)))[inner]
        r = A @ u[inner] - F
        res = float(math.sqrt(max(r @ lap_lu.solve(r), 0.0)))
        history.append(res)
        if res < best_res:
            best_res, best_u = res, u.copy()
        if res <= cfg.tol:
            converged = True
            break
        if not np.isfinite(res):
            break
        w = np.zeros(nv)
        w[inner] = _factor(A).solve(F)
        u = (1.0 - cfg.damping) * u + cfg.damping * w
    iters = it

    u = u if converged else best_u
    log.debug("picard: %d iterations, residual %.3e", iters, best_res)
    report = SolveReport(
        solution=mesh.vertex_field(u),
        iterations=iters,
        residual=res if converged else best_res,
        converged=converged,
        energy=p1_energy(mesh, u, spec.norm, spec.p),
        epsilon=spec.epsilon,
        history=history,
    )
    if strict and not converged:
        raise NoConvergence(f"Picard iteration stalled at residual {best_res:.3e}", report)
    return report


def solve_schedule(spec, mesh, epsilons, cfg=None, strict=False):
    """Solve the truncated problems along a decreasing eps schedule with warm starts."""
    reports, u0 = [], None
    for eps in epsilons:
        s = ProblemSpec(spec.norm, spec.p, spec.q, spec.lam, spec.source, eps, spec.b_sign, spec.flux)
        rep = solve_dirichlet(s, mesh, cfg, u0=u0, strict=strict)
        reports.append(rep)
        u0 = rep.u
    return reports


def energy_and_gradients(report, spec):
    mesh = report.mesh
    g = mesh.gradient(report.u)
    H = h_eval(spec.norm, g)
    return {
        "energy_p": float(np.sum(mesh.areas * H ** spec.p)),
        "energy_q": float(np.sum(mesh.areas * H ** spec.q)),
        "gradients": g,
    }
