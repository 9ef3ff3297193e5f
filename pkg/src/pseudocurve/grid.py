"""Disk grids in the parameter plane and differentiation on them.

Two layouts are supported:

``cartesian``
    an ``n x n`` lattice on ``[-R, R]^2`` masked to the closed disk;
    derivatives by fourth-order central differences.
``polar``
    Chebyshev-Lobatto radii on ``[0, R]`` times ``n`` equispaced angles;
    derivatives are spectral (Chebyshev in r, Fourier in phi).
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridTooCoarse

MIN_POINTS = 8


def cheb_nodes(n, radius):
    """Lobatto nodes on ``[0, radius]``, increasing, endpoints included."""
    return radius * (1.0 - np.cos(np.pi * np.arange(n) / (n - 1))) / 2.0


def cheb_diff_matrix(n, radius):
    """Differentiation matrix for values at :func:`cheb_nodes`."""
    N = n - 1
    x = np.cos(np.pi * np.arange(n) / N)
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    # r = radius * (1 - x) / 2
    return -(2.0 / radius) * D


def cheb_interp_matrix(nodes, targets):
    """Barycentric interpolation matrix from Lobatto ``nodes`` to ``targets``."""
    n = len(nodes)
    w = (-1.0) ** np.arange(n)
    w[0] *= 0.5
    w[-1] *= 0.5
    targets = np.atleast_1d(np.asarray(targets, float))
    diff = targets[:, None] - nodes[None, :]
    exact = np.isclose(diff, 0.0, rtol=0, atol=1e-15)
    diff[exact] = 1.0
    terms = w[None, :] / diff
    M = terms / terms.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    M[rows] = exact[rows].astype(float)
    return M


@dataclass(frozen=True)
class DiskGrid:
    radius: float
    n: int
    kind: str = "polar"

    def __post_init__(self):
        if self.n < MIN_POINTS:
            raise GridTooCoarse(f"need at least {MIN_POINTS} points per direction, got {self.n}")
        if self.kind not in ("polar", "cartesian"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    # ---- geometry
    @cached_property
    def r(self):
        return cheb_nodes(self.n, self.radius)

    @cached_property
    def phi(self):
        return 2 * np.pi * np.arange(self.n) / self.n

    @cached_property
    def x(self):
        return np.linspace(-self.radius, self.radius, self.n)

    @property
    def h(self):
        return 2 * self.radius / (self.n - 1)

    @cached_property
    def nodes(self):
        if self.kind == "polar":
            return self.r[:, None] * np.exp(1j * self.phi)[None, :]
        return self.x[None, :] + 1j * self.x[:, None]

    @cached_property
    def mask(self):
        if self.kind == "polar":
            return np.ones(self.nodes.shape, dtype=bool)
        return np.abs(self.nodes) <= self.radius * (1 + 1e-12)

    @cached_property
    def interior(self):
        """Nodes where derivatives are evaluated without one-sided stencils."""
        if self.kind == "polar":
            m = np.zeros(self.nodes.shape, dtype=bool)
            m[1:-1, :] = True
            return m
        padded = np.pad(self.mask, 2, constant_values=False)
        n = self.n
        m = self.mask.copy()
        for s in (-2, -1, 1, 2):
            m &= padded[2 + s:2 + s + n, 2:2 + n]
            m &= padded[2:2 + n, 2 + s:2 + s + n]
        return m

    # ---- derivatives
    @cached_property
    def _dr(self):
        return cheb_diff_matrix(self.n, self.radius)

    def d_xy(self, f):
        """Partial derivatives ``(f_x, f_y)`` (Cartesian grids only)."""
        f = np.where(self.mask, f, 0.0)
        h = self.h
        def d(axis):
            return (-np.roll(f, -2, axis) + 8 * np.roll(f, -1, axis)
                    - 8 * np.roll(f, 1, axis) + np.roll(f, 2, axis)) / (12 * h)
        return d(1), d(0)

    def d_polar(self, f):
        """``(f_r, f_phi)`` spectrally (polar grids only)."""
        fr = self._dr @ f
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        if self.n % 2 == 0:
            k[self.n // 2] = 0.0
        fphi = np.fft.ifft(1j * k[None, :] * np.fft.fft(f, axis=1), axis=1)
        if not np.iscomplexobj(f):
            fphi = fphi.real
        return fr, fphi

    def wirtinger(self, f):
        """``(f_sigma, f_sigmabar)``; values off the interior are unreliable."""
        if self.kind == "cartesian":
            fx, fy = self.d_xy(f)
            return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)
        fr, fphi = self.d_polar(f)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_r = np.where(self.r > 0, 1.0 / np.where(self.r > 0, self.r, 1.0), 0.0)[:, None]
        e = np.exp(1j * self.phi)[None, :]
        fs = 0.5 * np.conj(e) * (fr - 1j * inv_r * fphi)
        fsb = 0.5 * e * (fr + 1j * inv_r * fphi)
        # at the centre f_r(0, phi) = f_s e^{i phi} + f_sb e^{-i phi}
        modes = np.fft.fft(fr[0]) / self.n
        fs[0] = modes[1]
        fsb[0] = modes[-1]
        return fs, fsb

    def boundary_nodes(self, m):
        phi = 2 * np.pi * np.arange(m) / m
        return self.radius * np.exp(1j * phi)

    def to_json(self):
        return {"radius": self.radius, "n": self.n, "kind": self.kind}


def stage_radii(grid, substeps=32):
    """Radii visited by :func:`integrate_rays`, shape ``(n - 1, substeps, 3)``
    for the offsets ``0, h/2, h`` of each RK4 substep."""
    r = grid.r
    h = np.diff(r) / substeps
    base = r[:-1, None] + h[:, None] * np.arange(substeps)[None, :]
    return base[..., None] + h[:, None, None] * np.array([0.0, 0.5, 1.0])


class RayFields:
    """Node data interpolated to every RK4 stage radius in one product."""

    def __init__(self, grid, substeps=32):
        self.grid = grid
        self.substeps = substeps
        self.radii = stage_radii(grid, substeps)
        self.E = _stage_matrix(grid.radius, grid.n, substeps)

    def values(self, f):
        """Interpolate ``f`` (nodes) to stages, shape ``(n - 1, substeps, 3, n_phi)``."""
        out = self.E @ f
        return out.reshape(self.radii.shape + (f.shape[1],))

    def radial_derivative(self, f):
        return self.values(self.grid._dr @ f)


_STAGE_CACHE = {}


def _stage_matrix(radius, n, substeps):
    key = (radius, n, substeps)
    if key not in _STAGE_CACHE:
        grid = DiskGrid(radius, n, "polar")
        _STAGE_CACHE[key] = cheb_interp_matrix(grid.r, stage_radii(grid, substeps).ravel())
    return _STAGE_CACHE[key]


def integrate_rays(grid, rhs, w0, substeps=32):
    """Classical RK4 along the rays of a polar grid.

    ``rhs(j, k, s, w)`` returns ``dw/dr`` for all rays at stage ``s`` (0, 1,
    2 for offsets 0, h/2, h) of substep ``k`` in radial interval ``j``, given
    the current values ``w`` (one per ray).  Stage radii are those of
    :func:`stage_radii`.  Returns an array on the grid nodes.
    """
    if grid.kind != "polar":
        raise ValueError("ray integration needs a polar grid")
    r = grid.r
    out = np.empty(grid.nodes.shape, dtype=complex)
    w = np.full(grid.n, complex(w0))
    out[0] = w
    for j in range(grid.n - 1):
        h = (r[j + 1] - r[j]) / substeps
        for k in range(substeps):
            k1 = rhs(j, k, 0, w)
            k2 = rhs(j, k, 1, w + h / 2 * k1)
            k3 = rhs(j, k, 1, w + h / 2 * k2)
            k4 = rhs(j, k, 2, w + h * k3)
            w = w + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(w)):
            out[j + 1:] = np.nan
            return out
        out[j + 1] = w
    return out
