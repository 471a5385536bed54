"""Anisotropic norms H, their polars H° and the associated Wulff geometry.

A norm is an immutable :class:`AnisoNorm`.  Four families are supported:

* ``euclidean``  H(xi) = |xi|
* ``rnorm``      H(xi) = (sum |xi_k|^r)^(1/r), r > 1
* ``ellipse``    H(xi) = sqrt(xi . A xi) for an SPD matrix A; ``ellipse(a, b)``
                 builds A = diag(a^2, b^2) so that the Wulff shape is the
                 ellipse with semi-axes a and b
* ``sampled``    a polygonal gauge given by a table of directions and values
                 (2-D only, not differentiable, so rejected by the PDE flux)

All array arguments follow the convention ``xi.shape == (..., N)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, optimize
from scipy.spatial import ConvexHull
from scipy.special import gamma as gamma_fn

from .errors import NonSmoothNorm, UnsupportedDimension

FAMILIES = ("euclidean", "rnorm", "ellipse", "sampled")


@dataclass(frozen=True, eq=False)
class AnisoNorm:
    family: str
    dim: int = 2
    r: float | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)
    vertices: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown norm family {self.family!r}")
        if self.dim < 2:
            raise ValueError("dimension must be >= 2")
        if self.family == "rnorm":
            if self.r is None or not np.isfinite(self.r) or self.r <= 1.0:
                raise ValueError("rnorm requires a finite exponent r > 1")
        if self.family == "ellipse":
            A = np.asarray(self.matrix, dtype=float)
            if A.shape != (self.dim, self.dim):
                raise ValueError("ellipse matrix must be dim x dim")
            if not np.allclose(A, A.T) or np.linalg.eigvalsh(A).min() <= 0:
                raise ValueError("ellipse matrix must be symmetric positive definite")
            A.setflags(write=False)
            object.__setattr__(self, "matrix", A)
        if self.family == "sampled":
            if self.dim != 2:
                raise UnsupportedDimension("sampled gauges are only available in 2-D")
            V = np.asarray(self.vertices, dtype=float)
            V.setflags(write=False)
            object.__setattr__(self, "vertices", V)

    # ------------------------------------------------------------------ builders
    @classmethod
    def euclidean(cls, dim=2):
        return cls("euclidean", dim)

    @classmethod
    def rnorm(cls, r, dim=2):
        return cls("rnorm", dim, r=float(r))

    @classmethod
    def ellipse(cls, a=None, b=None, matrix=None):
        """Ellipse norm, either from semi-axes ``(a, b)`` of the Wulff shape or an SPD matrix."""
        if matrix is None:
            if a is None or b is None or a <= 0 or b <= 0:
                raise ValueError("ellipse needs positive semi-axes a, b or a matrix")
            matrix = np.diag([float(a) ** 2, float(b) ** 2])
        matrix = np.asarray(matrix, dtype=float)
        return cls("ellipse", matrix.shape[0], matrix=matrix)

    @classmethod
    def sampled(cls, angles, values):
        """Polygonal gauge whose unit ball is the hull of ``u(theta_i) / values_i`` and their mirrors."""
        angles = np.asarray(angles, dtype=float)
        values = np.asarray(values, dtype=float)
        if angles.shape != values.shape or angles.size < 2 or np.any(values <= 0):
            raise ValueError("direction table needs matching angles and positive values")
        pts = np.column_stack([np.cos(angles), np.sin(angles)]) / values[:, None]
        pts = np.vstack([pts, -pts])
        hull = ConvexHull(pts)
        verts = pts[hull.vertices]  # counter-clockwise in 2-D
        return cls("sampled", 2, vertices=verts)

    @classmethod
    def from_spec(cls, spec):
        """Build a norm from its JSON description, e.g. ``{"family": "rnorm", "r": 4.0}``."""
        fam = str(spec.get("family", "")).lower()
        dim = int(spec.get("dim", 2))
        if fam == "euclidean":
            return cls.euclidean(dim)
        if fam == "rnorm":
            return cls.rnorm(spec["r"], dim)
        if fam == "ellipse":
            if "matrix" in spec:
                return cls.ellipse(matrix=spec["matrix"])
            a, b = spec["axes"]
            return cls.ellipse(a, b)
        if fam == "sampled":
            return cls.sampled(spec["angles"], spec["values"])
        raise ValueError(f"unknown norm family {fam!r}")

    def to_spec(self):
        if self.family == "euclidean":
            return {"family": "euclidean", "dim": self.dim}
        if self.family == "rnorm":
            return {"family": "rnorm", "r": self.r, "dim": self.dim}
        if self.family == "ellipse":
            return {"family": "ellipse", "matrix": self.matrix.tolist()}
        ang = np.arctan2(self.vertices[:, 1], self.vertices[:, 0])
        val = 1.0 / np.hypot(self.vertices[:, 0], self.vertices[:, 1])
        return {"family": "sampled", "angles": ang.tolist(), "values": val.tolist()}

    # ------------------------------------------------------------- derived data
    @property
    def smooth(self):
        return self.family != "sampled"

    @cached_property
    def _facets(self):
        # outward unit normals n_j and offsets d_j of the unit ball {H <= 1}
        V = self.vertices
        E = np.roll(V, -1, axis=0) - V
        n = np.column_stack([E[:, 1], -E[:, 0]])
        n /= np.linalg.norm(n, axis=1)[:, None]
        d = np.einsum("ij,ij->i", n, V)
        return n, d

    @cached_property
    def sandwich(self):
        """Constants (c1, c2) with c1|xi| <= H(xi) <= c2|xi|."""
        if self.family == "euclidean":
            return 1.0, 1.0
        if self.family == "rnorm":
            k = self.dim ** (1.0 / self.r - 0.5)
            return min(1.0, k), max(1.0, k)
        if self.family == "ellipse":
            ev = np.linalg.eigvalsh(self.matrix)
            return float(np.sqrt(ev[0])), float(np.sqrt(ev[-1]))
        _, d = self._facets
        rad = np.hypot(self.vertices[:, 0], self.vertices[:, 1])
        return float(1.0 / rad.max()), float(1.0 / d.min())

    @property
    def c1(self):
        return self.sandwich[0]

    @property
    def c2(self):
        return self.sandwich[1]

    @cached_property
    def kappa(self):
        return wulff_kappa(self)

    # ----------------------------------------------------------------- values
    def __call__(self, xi):
        return h_eval(self, xi)

    def polar(self):
        """The polar gauge H° as a norm of the same family."""
        if self.family == "euclidean":
            return self
        if self.family == "rnorm":
            return AnisoNorm.rnorm(self.r / (self.r - 1.0), self.dim)
        if self.family == "ellipse":
            return AnisoNorm.ellipse(matrix=np.linalg.inv(self.matrix))
        n, d = self._facets
        P = n / d[:, None]
        order = np.argsort(np.arctan2(P[:, 1], P[:, 0]))
        return AnisoNorm("sampled", 2, vertices=P[order])

    def half_grad_sq(self, xi):
        """H(xi) * DH(xi), i.e. the gradient of H^2 / 2."""
        xi = np.asarray(xi, dtype=float)
        if self.family == "euclidean":
            return xi.copy()
        if self.family == "ellipse":
            return xi @ self.matrix.T
        H = h_eval(self, xi)[..., None]
        if self.family == "rnorm":
            with np.errstate(invalid="ignore", divide="ignore"):
                out = H * np.sign(xi) * (np.abs(xi) / H) ** (self.r - 1.0)
            return np.where(H > 0, out, 0.0)
        n, d = self._facets
        j = np.argmax(xi @ n.T / d, axis=-1)
        return H * (n / d[:, None])[j]

    def secant_matrix(self, xi, eps_reg=0.0):
        """Symmetric positive semidefinite B(xi) with B(xi) xi = H(xi) DH(xi).

        Freezing B at the previous iterate turns the model flux into a
        linear diffusion tensor, which is what the Picard solver needs.
        """
        xi = np.asarray(xi, dtype=float)
        shape = xi.shape[:-1] + (self.dim, self.dim)
        if self.family == "euclidean":
            return np.broadcast_to(np.eye(self.dim), shape).copy()
        if self.family == "ellipse":
            return np.broadcast_to(self.matrix, shape).copy()
        if self.family == "rnorm":
            e2 = (eps_reg * self.c1) ** 2
            H2 = h_eval(self, xi) ** 2 + e2
            w = (xi ** 2 + e2) ** ((self.r - 2.0) / 2.0) * H2[..., None] ** ((2.0 - self.r) / 2.0)
            out = np.zeros(shape)
            idx = np.arange(self.dim)
            out[..., idx, idx] = w
            return out
        raise NonSmoothNorm("sampled gauges have no differentiable flux")


# ---------------------------------------------------------------- operations
def h_eval(norm, xi):
    xi = np.asarray(xi, dtype=float)
    if norm.family == "euclidean":
        return np.linalg.norm(xi, axis=-1)
    if norm.family == "rnorm":
        a = np.abs(xi)
        m = a.max(axis=-1)
        safe = np.where(m > 0, m, 1.0)[..., None]
        return m * np.sum((a / safe) ** norm.r, axis=-1) ** (1.0 / norm.r)
    if norm.family == "ellipse":
        q = np.einsum("...i,ij,...j->...", xi, norm.matrix, xi)
        return np.sqrt(np.maximum(q, 0.0))
    n, d = norm._facets
    return np.maximum((xi @ n.T / d).max(axis=-1), 0.0)


def h_grad(norm, xi, eps_reg=0.0):
    """Gradient of H, or of the regularised gauge sqrt(H^2 + (eps*c1)^2) when ``eps_reg > 0``."""
    if not norm.smooth and eps_reg == 0:
        raise NonSmoothNorm(f"{norm.family} gauge is not differentiable; pass eps_reg > 0")
    xi = np.asarray(xi, dtype=float)
    H = h_eval(norm, xi)
    Hreg = np.sqrt(H ** 2 + (eps_reg * norm.c1) ** 2)
    num = norm.half_grad_sq(xi)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = num / Hreg[..., None]
    return np.where(Hreg[..., None] > 0, g, 0.0)


def polar_eval(norm, x):
    x = np.asarray(x, dtype=float)
    if norm.family == "sampled":
        # support function of the unit ball: sup over the direction table is attained at a vertex
        return np.maximum((x @ norm.vertices.T).max(axis=-1), 0.0)
    return h_eval(norm.polar(), x)


def polar_grad(norm, x):
    return h_grad(norm.polar(), x)


def numeric_polar(h, x, n_dirs=720, tol=1e-12):
    """Polar of an arbitrary 2-D gauge ``h`` at the point ``x``.

    Coarse sup over ``n_dirs`` directions, then golden-section refinement
    around the best direction.
    """
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        return 0.0
    th = np.linspace(0.0, 2 * np.pi, n_dirs, endpoint=False)
    U = np.column_stack([np.cos(th), np.sin(th)])
    ratio = (U @ x) / h(U)
    k = int(np.argmax(ratio))
    dth = 2 * np.pi / n_dirs

    def neg(t):
        u = np.array([math.cos(t), math.sin(t)])
        return -float(u @ x) / float(h(u[None, :])[0])

    res = optimize.minimize_scalar(
        neg, bracket=(th[k] - dth, th[k], th[k] + dth), method="golden", tol=tol
    )
    return max(-res.fun, float(ratio[k]))


def wulff_kappa(norm):
    """Lebesgue measure of the unit Wulff shape {H° < 1}."""
    N = norm.dim
    ball = math.pi ** (N / 2) / gamma_fn(N / 2 + 1)
    if norm.family == "euclidean":
        return float(ball)
    if norm.family == "rnorm":
        rp = norm.r / (norm.r - 1.0)
        return float((2 * gamma_fn(1 + 1 / rp)) ** N / gamma_fn(1 + N / rp))
    if norm.family == "ellipse":
        return float(ball * math.sqrt(np.linalg.det(norm.matrix)))
    if N != 2:
        raise UnsupportedDimension("sampled gauges are only available in 2-D")
    P = norm.polar().vertices
    x, y = P[:, 0], P[:, 1]
    return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def kappa_quadrature(norm):
    """Area of the unit Wulff shape in 2-D by adaptive quadrature of H°(theta)^-2 / 2."""
    if norm.dim != 2:
        raise UnsupportedDimension("quadrature route is 2-D only")

    def f(t):
        return 0.5 / float(polar_eval(norm, np.array([math.cos(t), math.sin(t)]))) ** 2

    val, _ = integrate.quad(f, 0.0, 2 * np.pi, limit=400, epsabs=0, epsrel=1e-12)
    return val


def wulff_boundary(norm, r=1.0, k=256, phase=0.0):
    """``k`` points on the boundary of W_r, counter-clockwise."""
    th = phase + np.linspace(0.0, 2 * np.pi, k, endpoint=False)
    U = np.column_stack([np.cos(th), np.sin(th)])
    return r * U / polar_eval(norm, U)[:, None]


@dataclass
class IdentityReport:
    euler: float
    unit_dual_gradient: float
    inversion: float
    samples: int

    @property
    def max_violation(self):
        return max(self.euler, self.unit_dual_gradient, self.inversion)


def check_identities(norm, sample_count=1000, rng=None):
    """Largest relative violation of the standard H / H° gradient identities on random vectors."""
    if not norm.smooth:
        raise NonSmoothNorm("identities need a differentiable gauge")
    rng = np.random.default_rng(rng)
    xi = rng.standard_normal((sample_count, norm.dim))
    xi *= 10.0 ** rng.uniform(-3, 3, size=(sample_count, 1))
    pol = norm.polar()
    H = h_eval(norm, xi)
    Ho = h_eval(pol, xi)
    DH = h_grad(norm, xi)
    DHo = h_grad(pol, xi)
    nrm = np.linalg.norm(xi, axis=1)

    euler = max(
        np.max(np.abs(np.einsum("ij,ij->i", DH, xi) - H) / H),
        np.max(np.abs(np.einsum("ij,ij->i", DHo, xi) - Ho) / Ho),
    )
    unit = max(
        np.max(np.abs(h_eval(norm, DHo) - 1.0)),
        np.max(np.abs(h_eval(pol, DH) - 1.0)),
    )
    inv = max(
        np.max(np.linalg.norm(Ho[:, None] * h_grad(norm, DHo) - xi, axis=1) / nrm),
        np.max(np.linalg.norm(H[:, None] * h_grad(pol, DH) - xi, axis=1) / nrm),
    )
    return IdentityReport(float(euler), float(unit), float(inv), sample_count)
