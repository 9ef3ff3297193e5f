"""Local E-curves by Picard iteration on Cauchy transforms.

The curve is written as ``sigma -> (z, w, p)`` with ``dw = p dz + Q dzbar``.
Writing ``z = Z + T[z_sbar]`` and ``p = P + T[p_sbar]`` for holomorphic data
``(Z, P)`` turns the first-order system for ``(z, p)`` into a fixed-point
problem; ``w`` is recovered by integrating along rays from the centre.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.signal import fftconvolve
from scipy.sparse import coo_matrix
from scipy.spatial import cKDTree

from .chart import CurveField, beltrami, residual
from .errors import DomainEscape, NoConvergence
from .grid import DiskGrid, RayFields, cheb_interp_matrix, integrate_rays

SUBCELL = 8
NEAR_CELLS = 3.0


# ------------------------------------------------------------ solid transform


def cauchy_transform(g, grid):
    """``T[g](s) = (1/pi) * integral over the disk of g(t) / (s - t) dA(t)``.

    Satisfies ``d/dsbar T[g] = g``.  Polar grids use an exact Fourier-Chebyshev
    evaluation; Cartesian grids use midpoint quadrature with an exact
    self-cell integral and subcell quadrature on cells cut by the circle.
    """
    g = np.asarray(g, dtype=complex)
    if g.shape != grid.nodes.shape:
        raise ValueError("g must be sampled on the grid nodes")
    if grid.kind == "polar":
        return _cauchy_polar(g, grid)
    return _cauchy_cartesian(g, grid)


@lru_cache(maxsize=16)
def _polar_operator(radius, n):
    grid = DiskGrid(radius, n, "polar")
    r = grid.r
    K = n // 2
    nq = n + K + 8
    t, wq = np.polynomial.legendre.leggauss(nq)
    kin = np.zeros((n, K, n))
    kout = np.zeros((n, K, n))
    ks = np.arange(K)
    for i, s in enumerate(r):
        if s > 0:
            rho = s * (t + 1) / 2
            E = cheb_interp_matrix(r, rho)
            wts = (s * wq / 2)[None, :] * (rho / s)[None, :] ** (ks[:, None] + 1)
            kin[i] = wts @ E
        if s < radius:
            rho = s + (radius - s) * (t + 1) / 2
            E = cheb_interp_matrix(r, rho)
            ratio = (s / rho)[None, :] ** ks[:, None]
            wts = ((radius - s) * wq / 2)[None, :] * ratio
            kout[i] = wts @ E
    return kin, kout


def _cauchy_polar(g, grid):
    n = grid.n
    K = n // 2
    kin, kout = _polar_operator(grid.radius, n)
    G = np.fft.fft(g, axis=1) / n
    ks = np.arange(K)
    gneg = G[:, (-ks) % n]          # g_{-k}
    gpos = G[:, (ks + 1) % n]       # g_{k+1}
    inner = np.einsum("ikj,jk->ik", kin, gneg)
    outer = np.einsum("ikj,jk->ik", kout, gpos)
    alpha = grid.phi
    e_in = np.exp(-1j * np.outer(ks + 1, alpha))
    e_out = np.exp(1j * np.outer(ks, alpha))
    return 2 * (inner @ e_in - outer @ e_out)


def _safe_inverse(d):
    # a source sitting on a target contributes through its near-field correction only
    small = np.abs(d) < 1e-14
    return np.where(small, 0.0, 1.0 / np.where(small, 1.0, d))


@lru_cache(maxsize=8)
def _band_geometry(radius, n):
    """Quadrature data for lattice cells cut by the circle.

    Inside subcell points are grouped by the node that supplies their value.
    Each group acts as one source at its centroid; targets closer than
    ``NEAR_CELLS`` spacings get an exact subcell correction stored sparsely.
    """
    grid = DiskGrid(radius, n, "cartesian")
    h = grid.h
    X, Y = np.meshgrid(grid.x, grid.x)
    corners = [np.abs((X + dx) + 1j * (Y + dy)) for dx in (-h / 2, h / 2) for dy in (-h / 2, h / 2)]
    cmax = np.max(corners, axis=0)
    cmin = np.min(corners, axis=0)
    full = cmax <= radius
    band = (cmin < radius) & ~full
    offs = (np.arange(SUBCELL) + 0.5) / SUBCELL - 0.5
    ox, oy = np.meshgrid(offs * h, offs * h)
    bi, bj = np.nonzero(band)
    pts = (X[bi, bj][:, None] + ox.ravel()[None, :]) + 1j * (Y[bi, bj][:, None] + oy.ravel()[None, :])
    cell = np.broadcast_to(np.arange(len(bi))[:, None], pts.shape)
    inside = np.abs(pts) <= radius
    pts, cell = pts[inside], cell[inside]
    mask_idx = np.argwhere(grid.mask)
    mask_pts = grid.nodes[grid.mask]
    tree = cKDTree(np.column_stack([mask_pts.real, mask_pts.imag]))
    near = tree.query(np.column_stack([pts.real, pts.imag]))[1]
    dA = (h / SUBCELL) ** 2
    key = cell * len(mask_pts) + near
    groups, gid = np.unique(key, return_inverse=True)
    count = np.bincount(gid)
    area = count * dA
    centroid = np.bincount(gid, weights=pts.real) / count + 1j * np.bincount(gid, weights=pts.imag) / count
    src = mask_idx[groups % len(mask_pts)]
    # near-field corrections
    targets = mask_pts
    ttree = cKDTree(np.column_stack([targets.real, targets.imag]))
    rows, cols, vals = [], [], []
    for g_index, c in enumerate(centroid):
        idx = ttree.query_ball_point([c.real, c.imag], NEAR_CELLS * h)
        if not idx:
            continue
        idx = np.asarray(idx)
        sub = pts[gid == g_index]
        t = targets[idx]
        exact = (dA / (t[:, None] - sub[None, :])).sum(axis=1)
        approx = area[g_index] * _safe_inverse(t - c)
        rows.append(idx)
        cols.append(np.full(len(idx), g_index))
        vals.append(exact - approx)
    corr = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(len(targets), len(groups))).tocsr()
    return full, src, area, centroid, corr


def _cauchy_cartesian(g, grid):
    n = grid.n
    h = grid.h
    full, src, area, centroid, corr = _band_geometry(grid.radius, n)
    gm = np.where(full, g, 0.0)
    off = np.arange(-(n - 1), n) * h
    D = off[None, :] + 1j * off[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        # the self cell integrates 1/(s - t) over a square centred at s: zero by symmetry
        kernel = np.where(D == 0, 0.0, 1.0 / D)
    out = fftconvolve(gm * h * h, kernel, mode="full")[n - 1:2 * n - 1, n - 1:2 * n - 1]
    gv = g[src[:, 0], src[:, 1]]
    targets = grid.nodes[grid.mask]
    band = np.empty(len(targets), dtype=complex)
    weights = gv * area
    for a in range(0, len(targets), 2048):
        t = targets[a:a + 2048]
        band[a:a + 2048] = (weights[None, :] * _safe_inverse(t[:, None] - centroid[None, :])).sum(axis=1)
    band += corr @ gv
    res = np.zeros_like(g)
    res[grid.mask] = (out[grid.mask] + band) / np.pi
    return res


# ------------------------------------------------------------ boundary transform


def holomorphic_coefficients(f, radius, kmax=None):
    """Power-series coefficients ``c_k`` of the holomorphic part of boundary data.

    ``f`` holds samples at ``radius * exp(2 pi i j / m)``.
    """
    f = np.asarray(f, dtype=complex)
    m = len(f)
    kmax = m // 2 if kmax is None else kmax
    F = np.fft.fft(f) / m
    k = np.arange(kmax)
    return F[k] / radius ** k


def boundary_cauchy(f, targets, radius=1.0):
    """Cauchy integral ``(1/2 pi i) * contour integral of f(t) dt / (t - s)``
    at interior ``targets`` by the trapezoid rule on the circle."""
    c = holomorphic_coefficients(f, radius)
    return npoly.polyval(np.asarray(targets, dtype=complex), c)


# ------------------------------------------------------------ solver


@dataclass
class HolomorphicData:
    """Power-series coefficients of ``Z(sigma)`` and ``P(sigma)`` and ``w0``."""

    Z: np.ndarray
    P: np.ndarray
    w0: complex = 0j

    def __post_init__(self):
        self.Z = np.atleast_1d(np.asarray(self.Z, dtype=complex))
        self.P = np.atleast_1d(np.asarray(self.P, dtype=complex))
        self.w0 = complex(self.w0)

    def check_decay(self, radius):
        for name, c in (("Z", self.Z), ("P", self.P)):
            terms = np.abs(c) * radius ** np.arange(len(c))
            if len(c) >= 8 and terms.max() > 0:
                tail = terms[-max(2, len(c) // 4):]
                if tail.max() > 1e-2 * terms.max():
                    raise DomainEscape(f"series {name} does not decay on radius {radius}")

    def z(self, s):
        return npoly.polyval(s, self.Z)

    def p(self, s):
        return npoly.polyval(s, self.P)

    def dz(self, s):
        return npoly.polyval(s, npoly.polyder(self.Z)) if len(self.Z) > 1 else np.zeros_like(s)

    def dp(self, s):
        return npoly.polyval(s, npoly.polyder(self.P)) if len(self.P) > 1 else np.zeros_like(s)

    def to_json(self):
        return {"Z": [[c.real, c.imag] for c in self.Z], "P": [[c.real, c.imag] for c in self.P],
                "w0": [self.w0.real, self.w0.imag]}

    @classmethod
    def from_json(cls, obj):
        def coeffs(v):
            return [complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in v]
        w0 = obj.get("w0", 0.0)
        w0 = complex(*w0) if isinstance(w0, (list, tuple)) else complex(w0)
        return cls(coeffs(obj["Z"]), coeffs(obj["P"]), w0)


@dataclass
class SolveHistory:
    deltas: list = field(default_factory=list)
    residuals: list = field(default_factory=list)

    def ratios(self):
        d = np.asarray(self.deltas)
        return d[1:] / d[:-1] if len(d) > 1 else np.array([])


def integrate_w(c, data, grid, dz, dp, substeps=32):
    """Integrate ``dw/dr = p z_r + Q(z, w, p) conj(z_r)`` along every ray."""
    rf = RayFields(grid, substeps)
    e = np.exp(1j * grid.phi)
    s = rf.radii[..., None] * e
    z = data.z(s) + rf.values(dz)
    p = data.p(s) + rf.values(dp)
    zr = data.dz(s) * e + rf.radial_derivative(dz)
    base = p * zr
    czr = np.conj(zr)
    if not c.terms:
        return integrate_rays(grid, lambda j, k, st, w: base[j, k, st], data.w0, substeps)

    def rhs(j, k, st, w):
        return base[j, k, st] + c.q(z[j, k, st], w, p[j, k, st]) * czr[j, k, st]

    return integrate_rays(grid, rhs, data.w0, substeps)


def _rhs(c, z, w, p, zs, ps):
    """Values of ``(z_sbar, p_sbar)`` demanded by the curve equations."""
    if not c.terms:
        zero = np.zeros_like(z)
        return zero, zero
    c1 = c.partial("p", z, w, p)
    c2 = c.partial("pb", z, w, p)
    if c.depends_on_p():
        mu = beltrami(c1.ravel(), c2.ravel()).reshape(z.shape)
    else:
        mu = np.zeros_like(z)
    z1 = zs
    z2 = mu * np.conj(zs)
    q = c.q(z, w, p)
    A = c.partial("z", z, w, p) + c.partial("w", z, w, p) * p + c.partial("wb", z, w, p) * np.conj(q)
    a = z1 + c1 * np.conj(z2)
    b = -c2 * np.conj(z1)
    R = (ps * z2 + A * (np.abs(z1) ** 2 - np.abs(z2) ** 2)
         + c1 * ps * np.conj(z1) - c2 * np.conj(ps) * np.conj(z2))
    psb = (np.conj(a) * R - b * np.conj(R)) / (np.abs(a) ** 2 - np.abs(b) ** 2)
    return z2, psb


def solve_curve(c, data, grid, tol=1e-10, max_iter=200, substeps=32):
    """Construct the local curve with holomorphic data ``(Z, P, w0)``.

    Returns a :class:`~pseudocurve.chart.CurveField` carrying the residual and
    the Picard history.  Raises :class:`NoConvergence` (with the last field
    in ``best``) when the iteration stalls, and :class:`DomainEscape` when an
    iterate leaves the chart domain.
    """
    if grid.kind != "polar":
        raise ValueError("solve_curve needs a polar grid")
    data.check_decay(grid.radius)
    s = grid.nodes
    Zv, Pv = data.z(s), data.p(s)
    dZv, dPv = data.dz(s), data.dp(s)
    dz = np.zeros_like(s)
    dp = np.zeros_like(s)
    hist = SolveHistory()
    w = None
    for it in range(max_iter):
        w = integrate_w(c, data, grid, dz, dp, substeps)
        z, p = Zv + dz, Pv + dp
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(z)) and np.all(np.isfinite(p))):
            raise DomainEscape("iterate is not finite")
        if not c.in_domain(z, w, p):
            raise DomainEscape(f"iterate left the chart domain of radius {c.radius}")
        zs = dZv + grid.wirtinger(dz)[0]
        ps = dPv + grid.wirtinger(dp)[0]
        zsb, psb = _rhs(c, z, w, p, zs, ps)
        dz_new = cauchy_transform(zsb, grid)
        dp_new = cauchy_transform(psb, grid)
        delta = float(max(np.max(np.abs(dz_new - dz)), np.max(np.abs(dp_new - dp))))
        dz, dp = dz_new, dp_new
        hist.deltas.append(delta)
        if delta < tol:
            break
    else:
        w = integrate_w(c, data, grid, dz, dp, substeps)
        best = CurveField(grid, Zv + dz, w, Pv + dp, history=hist.deltas)
        best.residual = residual(c, best)
        raise NoConvergence(f"Picard iteration did not converge in {max_iter} steps",
                            best=best, history=hist)
    w = integrate_w(c, data, grid, dz, dp, substeps)
    out = CurveField(grid, Zv + dz, w, Pv + dp)
    out.residual = residual(c, out)
    hist.residuals.append(out.residual)
    out.history = hist
    return out
