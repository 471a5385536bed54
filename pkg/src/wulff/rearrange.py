"""Distribution functions, decreasing rearrangements and convex symmetrization.

Discrete fields are :class:`GridFunction` objects: one value per cell together
with the cell measure.  Their decreasing rearrangement is a right-continuous
step function of the measure variable, :class:`RearrangementProfile`.
Closed-form rearrangements (such as the one of the radial model solution) are
carried by :class:`AnalyticProfile`, which exposes the same interface.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate
from shapely.geometry import LinearRing

from .anisotropy import polar_eval, h_eval, wulff_boundary
from .errors import MeasureMismatch, SelfIntersecting

TIE_RTOL = 1e-12


@dataclass
class GridFunction:
    """Cell values with cell measures.

    ``points`` are cell representatives (centres, or mesh vertices for P1
    fields).  Rectangular cell-centred grids also record ``shape``,
    ``origin`` and ``spacing`` so that level sets can be traced; fields
    living on a triangulation keep a reference to it in ``mesh``.
    """

    values: np.ndarray
    measures: np.ndarray
    points: np.ndarray | None = None
    shape: tuple | None = None
    origin: tuple | None = None
    spacing: tuple | None = None
    mesh: object | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        self.measures = np.asarray(self.measures, dtype=float).ravel()
        if self.values.shape != self.measures.shape:
            raise ValueError("values and measures must have the same length")
        if np.any(self.measures <= 0):
            raise ValueError("cell measures must be positive")

    @property
    def total(self):
        return float(math.fsum(self.measures))

    def with_values(self, values):
        return replace(self, values=np.broadcast_to(np.asarray(values, float), self.measures.shape).copy())

    def sample(self, func):
        """New field with ``func(points)`` as values."""
        return self.with_values(func(self.points))

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def as_array(self):
        if self.shape is None:
            raise ValueError("field is not on a rectangular grid")
        return self.values.reshape(self.shape)

    # ------------------------------------------------------------------ I/O
    def to_csv(self, path):
        pts = self.points if self.points is not None else np.full((self.values.size, 2), np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "u", "measure"])
            for (x, y), u, m in zip(pts, self.values, self.measures):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(u)), repr(float(m))])
        desc = {
            "cells": int(self.values.size),
            "total_measure": self.total,
            "shape": list(self.shape) if self.shape else None,
            "origin": list(self.origin) if self.origin else None,
            "spacing": list(self.spacing) if self.spacing else None,
        }
        with open(str(path) + ".json", "w") as fh:
            json.dump(desc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        kw = {}
        try:
            with open(str(path) + ".json") as fh:
                desc = json.load(fh)
            for k in ("shape", "origin", "spacing"):
                if desc.get(k):
                    kw[k] = tuple(desc[k])
        except FileNotFoundError:
            pass
        return cls(data[:, 2], data[:, 3], points=data[:, :2], **kw)


def rectangle_grid(bounds, n, func=None):
    """Cell-centred ``n x n`` (or ``(nx, ny)``) grid on ``bounds = (x0, x1, y0, y1)``."""
    nx, ny = (n, n) if np.isscalar(n) else n
    x0, x1, y0, y1 = bounds
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    xc = x0 + hx * (np.arange(nx) + 0.5)
    yc = y0 + hy * (np.arange(ny) + 0.5)
    X, Y = np.meshgrid(xc, yc)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    gf = GridFunction(
        np.zeros(nx * ny), np.full(nx * ny, hx * hy), points=pts,
        shape=(ny, nx), origin=(xc[0], yc[0]), spacing=(hx, hy),
    )
    return gf.sample(func) if func is not None else gf


def wulff_polar_grid(norm, R, n_rings, n_sectors, spacing="measure", func=None):
    """Grid of annular sectors of the Wulff disc W_R (2-D) with exact cell measures.

    ``spacing="measure"`` makes every ring carry the same measure and puts the
    representative point at the measure midpoint of its ring, so radial
    functions are resolved at ring boundaries in the measure variable.
    ``spacing="radius"`` uses equally spaced radii.
    """
    if norm.dim != 2:
        raise ValueError("polar grids are 2-D")
    j = np.arange(n_rings + 1)
    if spacing == "measure":
        rho = R * np.sqrt(j / n_rings)
    elif spacing == "radius":
        rho = R * j / n_rings
    else:
        raise ValueError("spacing must be 'measure' or 'radius'")
    rho_c = np.sqrt(0.5 * (rho[:-1] ** 2 + rho[1:] ** 2))

    th = np.linspace(0.0, 2 * np.pi, n_sectors + 1)
    gx, gw = np.polynomial.legendre.leggauss(16)
    a, b = th[:-1, None], th[1:, None]
    t = 0.5 * (b - a) * gx + 0.5 * (b + a)
    U = np.stack([np.cos(t), np.sin(t)], axis=-1)
    wsec = 0.5 * (0.5 * (b - a)[:, 0]) * np.sum(gw / polar_eval(norm, U) ** 2, axis=1)

    tc = 0.5 * (th[:-1] + th[1:])
    Uc = np.column_stack([np.cos(tc), np.sin(tc)])
    dirs = Uc / polar_eval(norm, Uc)[:, None]
    pts = (rho_c[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
    meas = ((rho[1:] ** 2 - rho[:-1] ** 2)[:, None] * wsec[None, :]).ravel()
    gf = GridFunction(np.zeros(meas.size), meas, points=pts)
    return gf.sample(func) if func is not None else gf


# ---------------------------------------------------------------- profiles
class _ProfileMixin:
    def sample(self, s):
        return self(np.asarray(s, dtype=float))

    def to_csv(self, path, s=None):
        if s is None:
            s = self.default_grid()
        vals = self(s)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "u_star"])
            for a, b in zip(s, vals):
                w.writerow([repr(float(a)), repr(float(b))])


@dataclass
class RearrangementProfile(_ProfileMixin):
    """Right-continuous non-increasing step function on [0, total].

    ``values[i]`` is taken on ``[breaks[i], breaks[i+1])``; the last step is
    closed at ``total``.  Beyond ``total`` the profile is 0.
    """

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.breaks = np.asarray(self.breaks, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.breaks.size != self.values.size + 1:
            raise ValueError("need one more breakpoint than values")

    @property
    def total(self):
        return float(self.breaks[-1])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.breaks, s, side="right") - 1
        idx = np.clip(idx, 0, self.values.size - 1)
        out = self.values[idx]
        return np.where((s >= 0) & (s <= self.total), out, 0.0)

    def distribution(self, t):
        """mu(t) of the profile: measure of {u* > t}."""
        t = np.asarray(t, dtype=float)
        k = np.sum(self.values[None, :] > np.atleast_1d(t)[:, None], axis=1)
        out = self.breaks[k]
        return out if t.ndim else float(out[0])

    def lp_norm(self, p):
        if np.isinf(p):
            return float(self.values[0]) if self.values.size else 0.0
        return float(np.sum(self.values ** p * np.diff(self.breaks)) ** (1.0 / p))

    def integral(self, p=1.0, s0=0.0):
        """int_{s0}^{total} (u*)^p ds."""
        lo = np.maximum(self.breaks[:-1], s0)
        w = np.clip(self.breaks[1:] - lo, 0.0, None)
        return float(np.sum(self.values ** p * w))

    def default_grid(self):
        return self.breaks[:-1].copy()


@dataclass
class AnalyticProfile(_ProfileMixin):
    """Profile known in closed form, ``func`` defined on (0, total]."""

    func: object
    total: float
    derivative: object | None = None
    label: str = ""

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        inside = (s > 0) & (s <= self.total)
        safe = np.where(inside, s, self.total)
        return np.where(inside, self.func(safe), np.where(s <= 0, np.inf, 0.0))

    def integral(self, p=1.0, s0=0.0):
        # s = total e^-t tames integrable singularities at s = 0
        T = self.total
        upper = math.inf if s0 <= 0 else math.log(T / s0)

        def f(t):
            s = T * math.exp(-t)
            return float(self.func(s)) ** p * s if s > 0 else 0.0

        val, _ = integrate.quad(f, 0.0, upper, limit=400, epsrel=1e-10)
        return val

    def lp_norm(self, p):
        return self.integral(p) ** (1.0 / p)

    def default_grid(self, n=256):
        return shared_s_grid(self.total, n)


def shared_s_grid(total, n=256, decades=6):
    """Log-spaced evaluation grid on [total * 10^-decades, total]."""
    n = int(min(max(n, 64), 1024))
    return total * np.logspace(-decades, 0, n)


# -------------------------------------------------------------- operations
def distribution_function(u, t):
    """mu_u(t) = |{|u| > t}|, vectorised in ``t``."""
    a = np.abs(u.values)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([math.fsum(u.measures[a > ti]) for ti in t_arr])
    return out if np.ndim(t) else float(out[0])


def decreasing_rearrangement(u):
    a = np.abs(u.values)
    order = np.argsort(-a, kind="stable")
    vals = a[order]
    cum = np.concatenate([[0.0], np.cumsum(u.measures[order])])
    # merge runs of (numerically) tied values into a single step
    drop = vals[1:] < vals[:-1] * (1.0 - TIE_RTOL)
    last = np.concatenate([np.nonzero(drop)[0], [vals.size - 1]])
    first = np.concatenate([[0], last[:-1] + 1])
    breaks = np.concatenate([[0.0], cum[last + 1]])
    return RearrangementProfile(breaks, vals[first])


def lebesgue_norm(u, p):
    a = np.abs(u.values)
    if np.isinf(p):
        return float(a.max())
    return float(math.fsum(a ** p * u.measures) ** (1.0 / p))


def convex_symmetrization(u, norm, target):
    """u_star(x) = u*(kappa_N H°(x)^N) evaluated at the cells (or vertices) of ``target``.

    ``target`` is a :class:`GridFunction` covering Omega_star = W_R, or a mesh
    (values are then attached to its vertices with lumped measures).
    """
    if not isinstance(target, GridFunction):
        target = target.vertex_field(np.zeros(target.n_vertices))
    if abs(target.total - u.total) > 0.01 * u.total:
        raise MeasureMismatch(
            f"target measure {target.total:.6g} differs from source {u.total:.6g} by more than 1%"
        )
    prof = decreasing_rearrangement(u)
    s = norm.kappa * polar_eval(norm, target.points) ** norm.dim
    return target.with_values(prof(s))


def symmetrized_radius(u, norm):
    """R with kappa_N R^N = |Omega|."""
    return (u.total / norm.kappa) ** (1.0 / norm.dim)


def marcinkiewicz_norm(u, r):
    """sup over the breakpoints sigma of u*(sigma) sigma^(1/r)."""
    prof = u if isinstance(u, RearrangementProfile) else decreasing_rearrangement(u)
    s = prof.breaks[1:]
    return float(np.max(prof(s) * s ** (1.0 / r)))


# --------------------------------------------------------------- perimeters
def polygon_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def anisotropic_perimeter(poly, norm, check=True):
    """sum over edges of H(edge normal) * edge length for a simple polygon."""
    poly = np.asarray(poly, dtype=float)
    if check and not LinearRing(poly).is_simple:
        raise SelfIntersecting("polygon boundary crosses itself")
    E = np.roll(poly, -1, axis=0) - poly
    rot = np.column_stack([E[:, 1], -E[:, 0]])
    return float(np.sum(h_eval(norm, rot)))


def euclidean_perimeter(poly):
    E = np.roll(poly, -1, axis=0) - poly
    return float(np.sum(np.hypot(E[:, 0], E[:, 1])))


def wulff_polygon(norm, r=1.0, k=1024):
    return wulff_boundary(norm, r, k)


def level_set_polygons(u, t):
    """Closed polylines of {u = t} for a field on a rectangular grid (marching squares)."""
    from skimage.measure import find_contours

    arr = u.as_array()
    (x0, y0), (hx, hy) = u.origin, u.spacing
    out = []
    for c in find_contours(arr, t):
        if not np.allclose(c[0], c[-1]):
            continue  # level line leaves the grid
        xy = np.column_stack([x0 + c[:-1, 1] * hx, y0 + c[:-1, 0] * hy])
        out.append(xy)
    return out


def level_set_perimeter(u, t, norm):
    return sum(anisotropic_perimeter(p, norm, check=False) for p in level_set_polygons(u, t))
