"""Local pseudocomplex structures ``w_zbar = Q(z, zbar, w, wbar, p, pbar)`` with
``p = w_z``, their PDE-pair linearisation, fiber line congruences and the
curve residual operator.
"""
import csv
import io
import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import sphere
from .congruence import LineCongruence, osculating_from_tangents
from .errors import NotGraphWarning, RankDeficient, UnknownName, ConstraintViolated
from .grassmann import plucker_xy
from .grid import DiskGrid

DEFAULT_DEGREE = 6
DEFAULT_RADIUS = 2.0
VARIABLES = ("z", "zb", "w", "wb", "p", "pb")


class Chart:
    """Polynomial ``Q`` stored as ``{(a, b, c, d, e, f): coefficient}`` for the
    monomial ``z^a zbar^b w^c wbar^d p^e pbar^f``.

    Parameters
    ----------
    terms : dict
        Exponent tuples to complex coefficients.
    radius : float
        Domain radius used for every variable.
    degree : int
        Maximum total degree accepted.
    name : str, optional
        Builtin name, kept for serialisation.
    """

    def __init__(self, terms=None, radius=DEFAULT_RADIUS, degree=DEFAULT_DEGREE, name=None):
        clean = {}
        for exp, coef in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != 6 or min(exp) < 0:
                raise ValueError(f"bad exponent {exp}")
            if sum(exp) > degree:
                raise ValueError(f"term {exp} exceeds degree {degree}")
            if coef != 0:
                clean[exp] = clean.get(exp, 0) + complex(coef)
        for exp, coef in clean.items():
            if sum(exp) <= 1 and abs(coef) > 1e-12:
                raise ConstraintViolated("Q and dQ must vanish at the origin", sample=exp, residual=abs(coef))
        self.terms = clean
        self.radius = float(radius)
        self.degree = int(degree)
        self.name = name

    def _eval(self, terms, z, w, p):
        z, w, p = (np.asarray(a, dtype=complex) for a in (z, w, p))
        args = (z, np.conj(z), w, np.conj(w), p, np.conj(p))
        shape = np.broadcast_shapes(z.shape, w.shape, p.shape)
        out = np.zeros(shape, dtype=complex)
        for exp, coef in terms.items():
            term = np.full(shape, coef, dtype=complex)
            for a, e in zip(args, exp):
                if e:
                    term = term * a ** e
            out = out + term
        return out

    def q(self, z, w, p):
        return self._eval(self.terms, z, w, p)

    def derivative_terms(self, var):
        k = VARIABLES.index(var)
        out = {}
        for exp, coef in self.terms.items():
            if exp[k]:
                e = list(exp)
                e[k] -= 1
                out[tuple(e)] = out.get(tuple(e), 0) + coef * exp[k]
        return out

    def partial(self, var, z, w, p):
        """Wirtinger partial of Q with respect to one of :data:`VARIABLES`."""
        return self._eval(self.derivative_terms(var), z, w, p)

    def depends_on_p(self):
        return any(exp[4] or exp[5] for exp in self.terms)

    def in_domain(self, *values):
        return all(np.all(np.abs(v) <= self.radius) for v in values)

    def to_json(self):
        if self.name is not None:
            return {"builtin": self.name}
        return {
            "degree": self.degree,
            "terms": [{"exp": list(e), "re": c.real, "im": c.imag} for e, c in sorted(self.terms.items())],
            "radius": self.radius,
        }


BUILTIN_CHARTS = {
    "flat": {},
    "darboux2": {(0, 0, 1, 1, 0, 0): 1.0},
}


def builtin_chart(name):
    """Registered charts: ``flat`` (Q = 0) and ``darboux2`` (Q = w wbar)."""
    if name not in BUILTIN_CHARTS:
        raise UnknownName(f"unknown builtin chart {name!r}")
    return Chart(BUILTIN_CHARTS[name], name=name)


def chart_from_json(obj):
    if "builtin" in obj:
        return builtin_chart(obj["builtin"])
    terms = {}
    for t in obj.get("terms", []):
        exp = tuple(t["exp"])
        terms[exp] = terms.get(exp, 0) + complex(t.get("re", 0.0), t.get("im", 0.0))
    return Chart(terms, radius=obj.get("radius", DEFAULT_RADIUS), degree=obj.get("degree", DEFAULT_DEGREE))


# ------------------------------------------------------------ PDE pair test


@dataclass(frozen=True)
class PdePairLinearization:
    """``df1[j, k] = dF^1/dp^j_k`` and ``df2[j, k] = dF^2/dp^j_k``."""

    df1: np.ndarray
    df2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "df1", np.asarray(self.df1, float).reshape(2, 2))
        object.__setattr__(self, "df2", np.asarray(self.df2, float).reshape(2, 2))

    def stacked(self):
        return np.vstack([self.df1.reshape(4), self.df2.reshape(4)])

    def to_json(self):
        return {"df1": self.df1.tolist(), "df2": self.df2.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["df1"], obj["df2"])


def characteristic_form(lin):
    """Coefficients ``(a, b, c)`` of ``a xi1^2 + b xi1 xi2 + c xi2^2``."""
    def det_at(xi):
        m = np.array([[lin.df1[j] @ xi for j in range(2)],
                      [lin.df2[j] @ xi for j in range(2)]])
        return np.linalg.det(m)
    a = det_at(np.array([1.0, 0.0]))
    c = det_at(np.array([0.0, 1.0]))
    b = det_at(np.array([1.0, 1.0])) - a - c
    return a, b, c


def pde_pair_elliptic(lin, tol=1e-12):
    """True iff the characteristic form has no nonzero real roots."""
    if np.linalg.matrix_rank(lin.stacked(), tol=tol) < 2:
        raise RankDeficient("the 2x4 matrix of first-order coefficients has rank < 2")
    a, b, c = characteristic_form(lin)
    return bool(b * b - 4 * a * c < 0)


# derivatives of (w_zbar, w_z) with respect to p^j_k = d(w^j)/d(x^k)
_DWZB = {(0, 0): 0.5, (1, 0): 0.5j, (0, 1): 0.5j, (1, 1): -0.5}
_DWZ = {(0, 0): 0.5, (1, 0): 0.5j, (0, 1): -0.5j, (1, 1): 0.5}


def linearize(c, z, w, p):
    """Realified linearisation of ``F = w_zbar - Q`` at the jet ``(z, w, p)``."""
    c1 = complex(c.partial("p", z, w, p))
    c2 = complex(c.partial("pb", z, w, p))
    df = np.empty((2, 2, 2))
    for (j, k), dzb in _DWZB.items():
        dz = _DWZ[(j, k)]
        val = dzb - c1 * dz - c2 * np.conj(dz)
        df[0, j, k] = val.real
        df[1, j, k] = val.imag
    return PdePairLinearization(df[0], df[1])


# ------------------------------------------------------------ fiber congruences


def fiber_planes(c, z0, w0, p):
    """Klein coordinates of the graph planes ``dw = p dz + Q dzbar``.

    Infinite ``p`` maps to the plane ``dz = 0``, the limit in the reciprocal
    chart when Q stays bounded in p.
    """
    p = np.asarray(p, dtype=complex)
    inf = ~np.isfinite(p)
    p = np.where(inf, 0, p)
    q = c.q(z0, w0, p)
    a = p + q
    b = 1j * (p - q)
    one = np.ones(p.shape)
    zero = np.zeros(p.shape)
    u = np.stack([one, zero, a.real, a.imag], axis=-1)
    v = np.stack([zero, one, b.real, b.imag], axis=-1)
    if inf.any():
        u[inf] = [0.0, 0.0, 1.0, 0.0]
        v[inf] = [0.0, 0.0, 0.0, 1.0]
    return plucker_xy(u, v)


def _flat_inverse(Y):
    with np.errstate(divide="ignore", invalid="ignore"):
        return (-Y[..., 2] + 1j * Y[..., 1]) / (1.0 + Y[..., 0])


class FiberCongruence(LineCongruence):
    """The fiber of a chart over ``(z0, w0)`` as a graph over S^2_-.

    Points are located by Newton iteration in ``p`` seeded from the flat
    fiber.  ``is_graph`` and ``patch_radius`` record the outcome of the
    single-valuedness check on the compactified p-grid.
    """

    kind = "builtin"

    def __init__(self, chart, z0, w0, check=True):
        self.chart = chart
        self.z0 = complex(z0)
        self.w0 = complex(w0)
        self.is_graph = True
        self.patch_radius = np.inf
        if check:
            self.is_graph, self.patch_radius = _graph_check(self)

    def planes(self, p):
        return fiber_planes(self.chart, self.z0, self.w0, p)

    def p_of_y(self, Y, tol=1e-14, max_iter=60):
        Y = np.atleast_2d(np.asarray(Y, float))
        p = _flat_inverse(Y)
        if not self.chart.terms:
            return p
        bad = ~np.isfinite(p)
        p = np.where(bad, 1e6, p)
        h = 1e-7
        for _ in range(max_iter):
            scale = np.maximum(1.0, np.abs(p))
            step = h * scale
            _, Y0 = self.planes(p)
            r = Y - Y0
            err = np.linalg.norm(r, axis=-1)
            if np.all(err < tol):
                break
            _, Yx = self.planes(p + step)
            _, Yy = self.planes(p + 1j * step)
            J = np.stack([(Yx - Y0) / step[:, None], (Yy - Y0) / step[:, None]], axis=-1)
            d = np.linalg.pinv(J) @ r[..., None]
            dp = d[..., 0, 0] + 1j * d[..., 1, 0]
            # keep steps moderate relative to the local scale
            big = np.abs(dp) > 0.5 * scale
            dp = np.where(big, dp * 0.5 * scale / np.maximum(np.abs(dp), 1e-300), dp)
            p = p + dp
        return p

    def psi(self, Y):
        Y = np.atleast_2d(np.asarray(Y, float))
        p = self.p_of_y(Y)
        X, _ = self.planes(p)
        return X

    def jacobian(self, Y, h=1e-6):
        Y = np.atleast_2d(np.asarray(Y, float))
        p = self.p_of_y(Y)
        scale = np.maximum(1.0, np.abs(p))
        step = h * scale
        cols_x, cols_y = [], []
        for d in (1.0, 1j):
            Xp, Yp = self.planes(p + d * step)
            Xm, Ym = self.planes(p - d * step)
            cols_x.append((Xp - Xm) / (2 * step[:, None]))
            cols_y.append((Yp - Ym) / (2 * step[:, None]))
        X0, Y0 = self.planes(p)
        f1, f2 = sphere.tangent_frame(X0)
        e1, e2 = sphere.tangent_frame(Y0)
        DX = np.stack([np.stack([np.sum(f * c, -1) for c in cols_x], -1) for f in (f1, f2)], -2)
        DY = np.stack([np.stack([np.sum(e * c, -1) for c in cols_y], -1) for e in (e1, e2)], -2)
        return DX @ np.linalg.inv(DY)

    def local_patch(self, y):
        """Patch in the fiber coordinate: ``s -> p(y) + s1 + i s2``."""
        p0 = self.p_of_y(np.asarray(y, float)[None])[0]
        return self.patch_at_p(p0)

    def patch_at_p(self, p0):
        def patch(s):
            s = np.asarray(s, dtype=float)
            return self.planes(p0 + s[..., 0] + 1j * s[..., 1])
        return patch

    def to_json(self):
        return {"kind": "builtin", "name": "fiber",
                "params": {"chart": self.chart.to_json(), "z0": [self.z0.real, self.z0.imag],
                           "w0": [self.w0.real, self.w0.imag]}}


def _graph_check(fc, cells=64):
    """Check that ``p -> Y`` is an orientation-consistent local diffeomorphism on
    the stereographic p-grid; return ``(is_graph, radius of the good disk)``."""
    theta = np.pi * (np.arange(cells) + 0.5) / cells
    phi = 2 * np.pi * np.arange(cells) / cells
    T, P = np.meshgrid(theta, phi, indexing="ij")
    rad = np.tan(T / 2)
    p = (rad * np.exp(1j * P)).ravel()
    h = 1e-6 * np.maximum(1.0, np.abs(p))
    _, Y0 = fc.planes(p)
    _, Yx = fc.planes(p + h)
    _, Yy = fc.planes(p + 1j * h)
    det = np.einsum("ij,ij->i", np.cross(Yx - Y0, Yy - Y0), Y0) / h ** 2
    bad = ~(det > 0)
    if not bad.any():
        return True, np.inf
    return False, float(np.min(np.abs(p[bad])))


def fiber_congruence(c, z0, w0, check=True):
    """Line congruence of graph planes ``dw = p dz + Q(z0, w0, p) dzbar``, p in C.

    When the fiber fails to be single-valued over S^2_- a
    :class:`NotGraphWarning` is issued and the congruence is still returned; it is reliable
    inside ``patch_radius``.
    """
    fc = FiberCongruence(c, z0, w0, check=check)
    if check and not fc.is_graph:
        warnings.warn(f"fiber is single-valued only for |p| < {fc.patch_radius:.3g}", NotGraphWarning, stacklevel=2)
    return fc


def fiber_elliptic_at(c, z0, w0, p0):
    """Contraction test of the fiber congruence at the plane with fiber value ``p0``."""
    fc = FiberCongruence(c, z0, w0, check=False)
    _, Y = fc.planes(np.array([p0]))
    norm = np.linalg.norm(fc.jacobian(Y)[0], 2)
    return bool(norm < 1), 1.0 - float(norm)


# ------------------------------------------------------------ Beltrami data


def realmat(a, b):
    """Real 2x2 matrices of ``zeta -> a zeta + b conj(zeta)`` (batched)."""
    a = np.asarray(a, complex)
    b = np.asarray(b, complex)
    return np.stack([
        np.stack([a.real + b.real, -a.imag + b.imag], -1),
        np.stack([a.imag + b.imag, a.real - b.real], -1),
    ], -2)


def split_complex(m):
    """Inverse of :func:`realmat`: return ``(a, b)``."""
    a = 0.5 * ((m[..., 0, 0] + m[..., 1, 1]) + 1j * (m[..., 1, 0] - m[..., 0, 1]))
    b = 0.5 * ((m[..., 0, 0] - m[..., 1, 1]) + 1j * (m[..., 1, 0] + m[..., 0, 1]))
    return a, b


def beltrami(c1, c2):
    """Beltrami coefficient ``mu`` with ``z_sbar = mu conj(z_s)`` for curves whose
    parameter is holomorphic for the osculating structure of the fiber.

    ``c1, c2`` are ``Q_p`` and ``Q_pbar``.  Tangent matrices of the fiber in
    the coordinates ``dz`` on the plane and ``dw - p dz - Q dzbar`` on the
    quotient are ``zeta -> delta zeta + (c1 delta + c2 conj(delta)) conj(zeta)``.
    """
    c1 = np.atleast_1d(np.asarray(c1, complex))
    c2 = np.atleast_1d(np.asarray(c2, complex))
    mu = np.zeros(c1.shape, complex)
    flat = (np.abs(c1) == 0) & (np.abs(c2) == 0)
    idx = np.flatnonzero(~flat.ravel())
    if idx.size:
        c1f, c2f = c1.ravel()[idx], c2.ravel()[idx]
        out = np.empty(idx.size, complex)
        M1 = realmat(np.ones_like(c1f), c1f + c2f)
        M2 = realmat(1j * np.ones_like(c1f), 1j * (c1f - c2f))
        for k in range(idx.size):
            osc = osculating_from_tangents(np.eye(4), M1[k], M2[k])
            alpha, beta = split_complex(osc.jP)
            out[k] = -beta / (alpha + 1j)
        mu.ravel()[idx] = out
    return mu


# ------------------------------------------------------------ curve fields


@dataclass
class CurveField:
    """Sampled local curve ``sigma -> (z, w, p)`` on a :class:`DiskGrid`."""

    grid: DiskGrid
    z: np.ndarray
    w: np.ndarray
    p: np.ndarray
    residual: float = None
    history: list = None

    def rows(self):
        m = self.grid.mask
        s = self.grid.nodes[m]
        cols = [s.real, s.imag, self.z[m].real, self.z[m].imag,
                self.w[m].real, self.w[m].imag, self.p[m].real, self.p[m].imag]
        return np.stack(cols, axis=-1)

    def to_csv(self):
        buf = io.StringIO()
        buf.write("# grid: " + json.dumps(self.grid.to_json()) + "\n")
        if self.residual is not None:
            buf.write(f"# residual: {float(self.residual)!r}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["re_sigma", "im_sigma", "re_z", "im_z", "re_w", "im_w", "re_p", "im_p"])
        for row in self.rows():
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, grid=None):
        lines = text.splitlines()
        if lines and lines[0].startswith("# grid:"):
            g = json.loads(lines[0][len("# grid:"):])
            grid = grid or DiskGrid(g["radius"], g["n"], g.get("kind", "polar"))
            lines = lines[1:]
        if grid is None:
            raise ValueError("curve field CSV lacks a grid header")
        resid = None
        while lines and lines[0].startswith("#"):
            if lines[0].startswith("# residual:"):
                resid = float(lines[0][len("# residual:"):])
            lines = lines[1:]
        reader = csv.reader(lines)
        next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
        m = grid.mask
        if len(data) != int(m.sum()):
            raise ValueError(f"expected {int(m.sum())} rows, found {len(data)}")
        arrs = []
        for k in (2, 4, 6):
            a = np.zeros(grid.nodes.shape, complex)
            a[m] = data[:, k] + 1j * data[:, k + 1]
            arrs.append(a)
        return cls(grid, *arrs, residual=resid)


def wz_wzbar(field):
    """``(w_z, w_zbar)`` from parameter derivatives, valid on interior nodes."""
    g = field.grid
    ws, wsb = g.wirtinger(field.w)
    zs, zsb = g.wirtinger(field.z)
    # w_s = w_z z_s + w_zb conj(z_sb);  w_sb = w_z z_sb + w_zb conj(z_s)
    det = zs * np.conj(zs) - zsb * np.conj(zsb)
    with np.errstate(divide="ignore", invalid="ignore"):
        wz = (ws * np.conj(zs) - wsb * np.conj(zsb)) / det
        wzb = (wsb * zs - ws * zsb) / det
    return wz, wzb


def residual_field(c, field):
    wz, wzb = wz_wzbar(field)
    return wzb - c.q(field.z, field.w, wz)


def residual(c, field):
    """Max over interior nodes of ``|w_zbar - Q(z, w, w_z)|``.

    Cartesian grids use fourth-order central differences; polar grids use
    spectral differentiation.
    """
    r = residual_field(c, field)
    vals = np.abs(r[field.grid.interior])
    if vals.size == 0:
        raise ValueError("grid has no interior nodes")
    return float(np.max(vals))
