"""Triangulations of 2-D domains and piecewise-linear (P1) finite element helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.spatial import Delaunay

from .anisotropy import AnisoNorm, h_eval, polar_eval
from .errors import DegenerateDomain
from .rearrange import GridFunction


@dataclass(frozen=True)
class Rectangle:
    bounds: tuple = (0.0, 1.0, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class WulffDisc:
    """W_R; with ``grading`` the rings refine geometrically (ratio 1.1) down to H° = grading."""

    norm: AnisoNorm
    R: float = 1.0
    grading: float | None = None


@dataclass(frozen=True, eq=False)
class Mask:
    """Union of square pixels of side ``h``; ``mask[i, j]`` covers row i (y) and column j (x)."""

    mask: np.ndarray
    origin: tuple = (0.0, 0.0)


@dataclass(eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    h: float
    domain: object = field(default=None, repr=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @cached_property
    def _geometry(self):
        X = self.vertices[self.triangles]
        M = np.concatenate([np.ones(X.shape[:2] + (1,)), X], axis=2)
        area = 0.5 * np.linalg.det(M)
        G = np.linalg.inv(M)[:, 1:3, :].transpose(0, 2, 1)  # (nt, 3 basis, 2)
        return area, G

    @property
    def areas(self):
        return self._geometry[0]

    @property
    def basis_gradients(self):
        return self._geometry[1]

    @cached_property
    def lumped(self):
        return np.bincount(self.triangles.ravel(), np.repeat(self.areas / 3.0, 3), self.n_vertices)

    @cached_property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def area(self):
        return float(math.fsum(self.areas))

    def local_size(self, x):
        """Longest edge among the triangles touching the vertex nearest to ``x``."""
        v = int(np.argmin(np.sum((self.vertices - np.asarray(x)) ** 2, axis=1)))
        X = self.vertices[self.triangles[np.any(self.triangles == v, axis=1)]]
        E = X - np.roll(X, 1, axis=1)
        return float(np.sqrt(np.max(np.sum(E * E, axis=2))))

    def gradient(self, u):
        return np.einsum("ti,tia->ta", u[self.triangles], self.basis_gradients)

    def vertex_field(self, values):
        return GridFunction(values, self.lumped, points=self.vertices, mesh=self)

    def refined_field(self, values, k=2):
        """Sample the P1 interpolant at the centroids of a k-fold uniform subdivision of every triangle."""
        bary = []
        for i in range(k):
            for j in range(k - i):
                bary.append(((i + 1 / 3) / k, (j + 1 / 3) / k))
                if i + j <= k - 2:
                    bary.append(((i + 2 / 3) / k, (j + 2 / 3) / k))
        B = np.array(bary)
        L = np.column_stack([1.0 - B.sum(axis=1), B])  # (k^2, 3)
        vals = (values[self.triangles] @ L.T).ravel()
        pts = np.einsum("sk,tkd->tsd", L, self.vertices[self.triangles]).reshape(-1, 2)
        meas = np.repeat(self.areas / k ** 2, k ** 2)
        return GridFunction(vals, meas, points=pts)

    # ------------------------------------------------------------ assembly
    def _local(self, coeff):
        G = self.basis_gradients
        Gt = G.transpose(0, 2, 1)
        loc = G @ Gt if coeff is None else G @ coeff @ Gt
        return loc * self.areas[:, None, None]

    def stiffness(self, coeff=None):
        """Matrix of int K Dphi_j . Dphi_i with K piecewise constant (nt, 2, 2); identity if None."""
        return self._scatter(self._local(coeff))

    @cached_property
    def interior(self):
        return np.nonzero(~self.boundary)[0]

    @cached_property
    def _interior_pattern(self):
        inner = ~self.boundary
        ni = int(inner.sum())
        idx = -np.ones(self.n_vertices, np.int64)
        idx[inner] = np.arange(ni)
        T = self.triangles
        rows = np.repeat(T, 3, axis=1).ravel()
        cols = np.tile(T, (1, 3)).ravel()
        keep = inner[rows] & inner[cols]
        key = idx[rows[keep]] * ni + idx[cols[keep]]
        uniq, inv = np.unique(key, return_inverse=True)
        indptr = np.searchsorted(uniq // ni, np.arange(ni + 1))
        return keep, inv, uniq % ni, indptr, ni

    def interior_stiffness(self, coeff=None):
        """Stiffness block on the interior vertices (CSC; the pattern is symmetric)."""
        keep, inv, indices, indptr, ni = self._interior_pattern
        data = np.bincount(inv, self._local(coeff).ravel()[keep], minlength=indices.size)
        return sp.csc_matrix((data, indices, indptr), shape=(ni, ni))

    @cached_property
    def mass(self):
        loc = np.tile(np.array([[2.0, 1, 1], [1, 2, 1], [1, 1, 2]]) / 12.0, (self.n_triangles, 1, 1))
        return self._scatter(loc * self.areas[:, None, None])

    def cell_load(self, values):
        """Load vector of a piecewise-constant density: int c_T phi_i."""
        return np.bincount(self.triangles.ravel(), np.repeat(values * self.areas / 3.0, 3), self.n_vertices)

    def _scatter(self, loc):
        T = self.triangles
        rows = np.repeat(T, 3, axis=1).ravel()
        cols = np.tile(T, (1, 3)).ravel()
        n = self.n_vertices
        return sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def p1_energy(mesh, u, norm, power):
    """int H(Du)^power for a P1 field."""
    return float(np.sum(mesh.areas * h_eval(norm, mesh.gradient(u)) ** power))


# ------------------------------------------------------------------ builders
def build_mesh(domain, h):
    if not h > 0:
        raise DegenerateDomain("mesh size must be positive")
    if isinstance(domain, dict):
        domain = domain_from_spec(domain)
    if isinstance(domain, Rectangle):
        return _rectangle_mesh(domain, h)
    if isinstance(domain, WulffDisc):
        return _wulff_mesh(domain, h)
    if isinstance(domain, Mask):
        return _mask_mesh(domain, h)
    raise DegenerateDomain(f"unsupported domain {domain!r}")


def domain_from_spec(spec):
    kind = spec.get("type")
    if kind == "rectangle":
        return Rectangle(tuple(spec.get("bounds", (0.0, 1.0, 0.0, 1.0))))
    if kind == "wulff_disc":
        return WulffDisc(
            AnisoNorm.from_spec(spec.get("norm", {"family": "euclidean"})), float(spec.get("R", 1.0)), spec.get("grading")
        )
    if kind == "mask":
        return Mask(np.asarray(spec["mask"], dtype=bool), tuple(spec.get("origin", (0.0, 0.0))))
    raise DegenerateDomain(f"unknown domain type {kind!r}")


def _finish(V, T, boundary, h, domain):
    X = V[T]
    det = (X[:, 1, 0] - X[:, 0, 0]) * (X[:, 2, 1] - X[:, 0, 1]) - (X[:, 2, 0] - X[:, 0, 0]) * (X[:, 1, 1] - X[:, 0, 1])
    T = np.where((det < 0)[:, None], T[:, [0, 2, 1]], T)
    E = X - np.roll(X, 1, axis=1)
    longest = np.max(np.sum(E * E, axis=2), axis=1)
    T = T[np.abs(det) > 1e-10 * longest]
    if np.unique(T).size < V.shape[0]:
        raise DegenerateDomain("triangulation left isolated vertices")
    if T.shape[0] == 0 or np.all(boundary):
        raise DegenerateDomain("domain has no interior at this resolution")
    return Mesh(V, T.astype(np.int64), boundary, h, domain)


def _rectangle_mesh(dom, h):
    x0, x1, y0, y1 = dom.bounds
    if x1 <= x0 or y1 <= y0:
        raise DegenerateDomain("empty rectangle")
    nx = max(1, int(round((x1 - x0) / h)))
    ny = max(1, int(round((y1 - y0) / h)))
    X, Y = np.meshgrid(np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1))
    V = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, 1:].ravel(), idx[1:, :-1].ravel()
    T = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    bd = np.zeros(V.shape[0], bool)
    bd[idx[0]] = bd[idx[-1]] = bd[idx[:, 0]] = bd[idx[:, -1]] = True
    return _finish(V, T, bd, max((x1 - x0) / nx, (y1 - y0) / ny), dom)


def _wulff_mesh(dom, h):
    norm, R = dom.norm, dom.R
    if R <= 0 or norm.dim != 2:
        raise DegenerateDomain("Wulff disc needs R > 0 in 2-D")
    # unit Wulff boundary, reparametrised by Euclidean arclength
    th = np.linspace(0.0, 2 * np.pi, 4097)
    U = np.column_stack([np.cos(th), np.sin(th)])
    B = U / polar_eval(norm, U)[:, None]
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(B, axis=0).T))])
    perim = arc[-1]

    n_r = max(2, int(math.ceil(R * norm.c2 / h)))
    radii = R * np.arange(1, n_r + 1) / n_r
    spacing = np.full(n_r, R / n_r)
    if dom.grading is not None:
        ratio = 1.1
        rho_g = R / n_r / (1.0 - 1.0 / ratio)
        radii, spacing = radii[radii >= rho_g], spacing[radii >= rho_g]
        geo = []
        rho = radii[0] / ratio
        while rho > dom.grading:
            geo.append(rho)
            rho /= ratio
        geo = np.array(geo[::-1])
        radii = np.concatenate([geo, radii])
        spacing = np.concatenate([geo * (1.0 - 1.0 / ratio), spacing])
    pts, angles = [np.zeros((1, 2))], []
    for k, (rho, dr) in enumerate(zip(radii, spacing), start=1):
        hk = min(h, dr * norm.c2)
        m = max(6, int(math.ceil(rho * perim / hk)))
        s = (np.arange(m) + 0.5 * (k % 2)) * perim / m
        t = np.interp(s, arc, th)
        Uk = np.column_stack([np.cos(t), np.sin(t)])
        pts.append(rho * Uk / polar_eval(norm, Uk)[:, None])
        angles.append(t)
    V = np.vstack(pts)
    bd = np.zeros(V.shape[0], bool)
    bd[-pts[-1].shape[0]:] = True
    # Delaunay loses precision on strongly graded point sets; rings are stitched instead
    T = Delaunay(V).simplices if dom.grading is None else _stitch_rings(angles)
    return _finish(V, T, bd, h, dom)


def _stitch_rings(angles):
    """Triangles of a fan around vertex 0 and strips between consecutive angle-ordered rings."""
    tris = []
    start = 1
    first = np.arange(start, start + angles[0].size)
    tris += [(0, a, b) for a, b in zip(first, np.roll(first, -1))]
    for ta, tb in zip(angles[:-1], angles[1:]):
        A = np.arange(start, start + ta.size)
        B = np.arange(start + ta.size, start + ta.size + tb.size)
        nA, nB = ta.size, tb.size
        i = j = 0
        while i < nA or j < nB:
            na = ta[i + 1] if i + 1 < nA else ta[0] + 2 * np.pi
            nb = tb[j + 1] if j + 1 < nB else tb[0] + 2 * np.pi
            if j >= nB or (i < nA and na <= nb):
                tris.append((A[i], A[(i + 1) % nA], B[j % nB]))
                i += 1
            else:
                tris.append((A[i % nA], B[(j + 1) % nB], B[j]))
                j += 1
        start += nA
    return np.array(tris, dtype=np.int64)


def _mask_mesh(dom, h):
    mask = np.asarray(dom.mask, bool)
    if mask.ndim != 2 or not mask.any():
        raise DegenerateDomain("mask is empty")
    ny, nx = mask.shape
    x0, y0 = dom.origin
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    I, J = np.nonzero(mask)
    a, b, c, d = idx[I, J], idx[I, J + 1], idx[I + 1, J + 1], idx[I + 1, J]
    T = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    count = np.zeros(idx.size, int)
    for corner in (a, b, c, d):
        np.add.at(count, corner, 1)
    used = np.unique(T)
    remap = -np.ones(idx.size, np.int64)
    remap[used] = np.arange(used.size)
    X, Y = np.meshgrid(x0 + h * np.arange(nx + 1), y0 + h * np.arange(ny + 1))
    V = np.column_stack([X.ravel(), Y.ravel()])[used]
    bd = count[used] < 4
    return _finish(V, remap[T], bd, h, dom)
