"""Line congruences in graph form: surfaces of oriented 2-planes written as the
graph of a map psi: S^2_- -> S^2_+ in Klein coordinates.

A compact congruence is elliptic exactly when psi is strictly contracting, so
most of the geometry here reduces to calculus on the unit sphere.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RBFInterpolator
from scipy.optimize import linprog

from . import sphere
from .errors import (
    MeanDegenerate,
    NoConvergence,
    NotAComplexStructure,
    NotElliptic,
    NotTotallyReal,
    TracingFailure,
    UnknownName,
)
from .grassmann import (
    PluckerPoint,
    bivector,
    bilinear,
    coefficients_from_xy,
    klein_action,
    plane_basis,
    plucker_of_plane,
    quad_form,
    xy_from_coefficients,
)

JACOBIAN_STEP = 1e-4
# margins below this are finite-difference noise, not ellipticity
ELLIPTIC_TOL = 1e-6
SAMPLE_LEVEL = 4

STANDARD_J = np.array([
    [0.0, -1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
])


def _as_points(Y):
    Y = np.asarray(Y, dtype=float)
    return Y[None, :] if Y.ndim == 1 else Y


class LineCongruence:
    """Graph of a map ``psi: S^2_- -> S^2_+``.

    Subclasses implement :meth:`psi` (vectorised over rows) and may override
    :meth:`jacobian` with a closed form.
    """

    kind = "abstract"
    compact = True

    def psi(self, Y):
        raise NotImplementedError

    def __call__(self, Y):
        return self.psi(Y)

    def jacobian(self, Y, h=JACOBIAN_STEP):
        """Derivative of psi as ``(N, 2, 2)`` matrices in orthonormal tangent
        frames at ``Y`` (columns) and at ``psi(Y)`` (rows)."""
        Y = _as_points(Y)
        e1, e2 = sphere.tangent_frame(Y)
        X = self.psi(Y)
        f1, f2 = sphere.tangent_frame(X)
        jac = np.empty((len(Y), 2, 2))
        for k, e in enumerate((e1, e2)):
            d = (self.psi(sphere.exp_map(Y, h * e)) - self.psi(sphere.exp_map(Y, -h * e))) / (2 * h)
            jac[:, 0, k] = np.sum(f1 * d, axis=-1)
            jac[:, 1, k] = np.sum(f2 * d, axis=-1)
        return jac

    def local_patch(self, y):
        """Parametrisation ``s -> (X, Y)`` of the congruence near the graph
        point over ``y`` using geodesic normal coordinates on S^2_-."""
        y = np.asarray(y, dtype=float)
        e1, e2 = sphere.tangent_frame(y)

        def patch(s):
            s = np.asarray(s, dtype=float)
            Yp = sphere.exp_map(np.broadcast_to(y, s.shape[:-1] + (3,)), s[..., :1] * e1 + s[..., 1:] * e2)
            shape = Yp.shape
            Xp = self.psi(Yp.reshape(-1, 3)).reshape(shape)
            return Xp, Yp

        return patch

    def plucker_point(self, y):
        y = np.asarray(y, dtype=float)
        return PluckerPoint(self.psi(y[None])[0], y)

    def to_json(self):
        raise NotImplementedError


class ConstantCongruence(LineCongruence):
    kind = "constant"

    def __init__(self, center):
        self.center = sphere.normalize(np.asarray(center, dtype=float).reshape(3))

    def psi(self, Y):
        Y = _as_points(Y)
        return np.broadcast_to(self.center, Y.shape).copy()

    def jacobian(self, Y, h=JACOBIAN_STEP):
        return np.zeros((len(_as_points(Y)), 2, 2))

    def to_json(self):
        return {"kind": "constant", "center": self.center.tolist()}


class FunctionCongruence(LineCongruence):
    """Closed-form psi given as a vectorised callable."""

    kind = "builtin"

    def __init__(self, fn, name="function", params=None):
        self._fn = fn
        self.name = name
        self.params = params or {}

    def psi(self, Y):
        return sphere.normalize(self._fn(_as_points(Y)))

    def to_json(self):
        return {"kind": "builtin", "name": self.name, "params": _jsonable(self.params)}


class GridCongruence(LineCongruence):
    """psi sampled on icosphere vertices and interpolated.

    Interpolation is a thin-plate radial basis fit of the ambient 3-vectors,
    renormalised onto the sphere.
    """

    kind = "grid"

    def __init__(self, level, values):
        self.level = int(level)
        self.nodes = np.asarray(sphere.icosphere(self.level)[0])
        self.values = sphere.normalize(np.asarray(values, dtype=float).reshape(len(self.nodes), 3))
        self._interp = RBFInterpolator(self.nodes, self.values, kernel="thin_plate_spline", degree=1)

    def psi(self, Y):
        return sphere.normalize(self._interp(_as_points(Y)))

    @classmethod
    def sample(cls, congruence, level=3):
        nodes = sphere.icosphere(level)[0]
        return cls(level, congruence.psi(nodes))

    def to_json(self):
        return {"kind": "grid", "grid": {"level": self.level, "values": self.values.tolist()}}


class AffineCongruence(FunctionCongruence):
    """psi(Y) = normalize(center + matrix @ Y); contracting when the matrix is small."""

    def __init__(self, center, matrix):
        center = sphere.normalize(np.asarray(center, float))
        matrix = np.asarray(matrix, float).reshape(3, 3)
        super().__init__(lambda Y: center + Y @ matrix.T, "affine",
                         {"center": center, "matrix": matrix})


class PerturbedCongruence(FunctionCongruence):
    """Geodesic displacement of the constant map at ``center`` by ``eps * V(Y)``,
    where ``V(Y)`` is the tangential part of ``matrix @ Y`` plus a quadratic term."""

    def __init__(self, center, eps, matrix, quad=None):
        c = sphere.normalize(np.asarray(center, float))
        A = np.asarray(matrix, float).reshape(3, 3)
        Bq = np.zeros((3, 3)) if quad is None else np.asarray(quad, float).reshape(3, 3)

        def fn(Y):
            raw = Y @ A.T + (Y * Y) @ Bq.T
            tang = raw - np.sum(raw * c, axis=-1, keepdims=True) * c
            return sphere.exp_map(np.broadcast_to(c, Y.shape), eps * tang)

        super().__init__(fn, "perturbed", {"center": c, "eps": eps, "matrix": A, "quad": Bq})


class IsometryCongruence(FunctionCongruence):
    """All oriented planes containing the x1 axis: X = (Y1, Y2, -Y3)."""

    def __init__(self):
        super().__init__(lambda Y: Y * np.array([1.0, 1.0, -1.0]), "isometry", {})
        self.compact = True


class RiemannSphere(LineCongruence):
    """Complex lines ``span(v, Jv)`` of a linear complex structure, in graph form.

    For each Y the plane is found exactly: it is the decomposable, correctly
    oriented 2-vector in the +1 eigenspace of the induced action of J on
    2-vectors whose anti-self-dual part is a positive multiple of Y.
    """

    kind = "builtin"

    def __init__(self, j, tol=1e-10):
        j = np.asarray(j, dtype=float).reshape(4, 4)
        if np.max(np.abs(j @ j + np.eye(4))) > tol:
            raise NotAComplexStructure("J^2 differs from -1")
        self.j = j
        K = np.stack([coefficients_from_xy(*_unit_xy(m)) for m in range(6)], axis=-1)
        action = np.linalg.solve(K, klein_action(j) @ K)
        _, s, vt = np.linalg.svd(action - np.eye(6))
        W = vt[-4:].T  # basis of the +1 eigenspace, (X, Y) stacked
        self._Wx = W[:3]
        self._Wy = W[3:]

    def psi(self, Y):
        Y = _as_points(Y)
        n = len(Y)
        L = np.concatenate([np.broadcast_to(self._Wy, (n, 3, 4)), -Y[:, :, None]], axis=2)
        _, _, vt = np.linalg.svd(L)
        null = vt[:, -2:, :]  # (n, 2, 5)
        a = null[:, :, :4]
        t = null[:, :, 4]
        xa = np.einsum("ij,nkj->nki", self._Wx, a)  # (n, 2, 3)
        S = np.einsum("nki,nli->nkl", xa, xa) - t[:, :, None] * t[:, None, :]
        ev, evec = np.linalg.eigh(S)
        # null directions of the indefinite 2x2 form
        lam_neg, lam_pos = ev[:, 0], ev[:, 1]
        vneg, vpos = evec[:, :, 0], evec[:, :, 1]
        cn = np.sqrt(np.clip(lam_pos, 0, None))[:, None]
        cp = np.sqrt(np.clip(-lam_neg, 0, None))[:, None]
        roots = [cn * vneg + cp * vpos, cn * vneg - cp * vpos]
        out = np.empty((n, 3))
        best = np.full(n, -np.inf)
        for r in roots:
            tt = np.einsum("nk,nk->n", r, t)
            X = np.einsum("nk,nki->ni", r, xa) / tt[:, None]
            X = sphere.normalize(X)
            score = self._orientation_score(X, Y)
            take = score > best
            out[take] = X[take]
            best[take] = score[take]
        return out

    def _orientation_score(self, X, Y):
        basis = plane_basis(X, Y)
        u = basis[..., 0]
        c = coefficients_from_xy(X, Y)
        cj = bivector(u, u @ self.j.T)
        return np.sum(c * cj, axis=-1)

    def to_json(self):
        return {"kind": "builtin", "name": "riemann", "params": {"j": self.j.tolist()}}


class DeformedCongruence(LineCongruence):
    """Geodesic contraction of ``base`` toward ``center`` by the factor ``1 - t``."""

    kind = "builtin"

    def __init__(self, base, center, t):
        self.base = base
        self.center = sphere.normalize(np.asarray(center, float))
        self.t = float(t)

    def psi(self, Y):
        X = self.base.psi(Y)
        c = np.broadcast_to(self.center, X.shape)
        return sphere.exp_map(c, (1.0 - self.t) * sphere.log_map(c, X))

    def to_json(self):
        return {"kind": "builtin", "name": "deformed",
                "params": {"base": self.base.to_json(), "center": self.center.tolist(), "t": self.t}}


def _unit_xy(m):
    e = np.zeros(6)
    e[m] = 1.0
    return e[:3], e[3:]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def congruence_from_json(obj):
    kind = obj.get("kind")
    if kind == "constant":
        return ConstantCongruence(obj["center"])
    if kind == "grid":
        g = obj["grid"]
        return GridCongruence(g["level"], g["values"])
    if kind == "builtin":
        name = obj.get("name")
        p = obj.get("params", {})
        if name == "isometry":
            return IsometryCongruence()
        if name == "riemann":
            return riemann_sphere(p.get("j", STANDARD_J))
        if name == "affine":
            return AffineCongruence(p["center"], p["matrix"])
        if name == "perturbed":
            if "matrix" in p:
                return PerturbedCongruence(p["center"], p["eps"], p["matrix"], p.get("quad"))
            rng = np.random.default_rng(int(p.get("seed", 0)))
            return random_perturbed(rng, eps=p.get("eps", 0.05), center=p.get("center"))
        if name == "deformed":
            return DeformedCongruence(congruence_from_json(p["base"]), p["center"], p["t"])
        raise UnknownName(f"unknown builtin congruence {name!r}")
    raise UnknownName(f"unknown congruence kind {kind!r}")


# ---------------------------------------------------------------- generators


def random_gl_plus(rng, spread=0.5):
    while True:
        g = np.eye(4) + spread * rng.standard_normal((4, 4))
        if np.linalg.det(g) > 0.2:
            return g


def random_conjugated_sphere(rng, spread=0.5):
    g = random_gl_plus(rng, spread)
    return riemann_sphere(g @ STANDARD_J @ np.linalg.inv(g))


def random_affine(rng, scale=0.3):
    B = rng.standard_normal((3, 3))
    B *= scale / np.linalg.norm(B, 2)
    return AffineCongruence(sphere.random_unit(rng), B)


def random_perturbed(rng, eps=0.05, center=None):
    c = sphere.random_unit(rng) if center is None else center
    return PerturbedCongruence(c, eps, rng.standard_normal((3, 3)), rng.standard_normal((3, 3)))


# ---------------------------------------------------------------- operations


def riemann_sphere(j):
    """Congruence of complex lines of the linear complex structure ``j``."""
    return RiemannSphere(j)


def sample_points(level=SAMPLE_LEVEL):
    return np.asarray(sphere.icosphere(level)[0])


def is_elliptic(x, samples=None, tol=ELLIPTIC_TOL):
    """Return ``(elliptic, margin)`` with margin ``1 - max |D psi|``.

    The congruence counts as elliptic when the margin exceeds ``tol``.
    """
    Y = sample_points() if samples is None else _as_points(samples)
    jac = x.jacobian(Y)
    norms = np.linalg.norm(jac, ord=2, axis=(1, 2))
    margin = 1.0 - float(np.max(norms))
    return margin > tol, margin


@dataclass
class Osculating:
    """First-order osculating data at one plane P of a congruence.

    ``frame`` is an orthonormal oriented basis ``(u, v, n1, n2)`` of R^4 with
    P = span(u, v); ``jP`` acts on P in the basis (u, v) and ``jQ`` on V/P in
    the basis of the images of (n1, n2).  ``tangents`` are the two tangent
    matrices in Lin(P, V/P) spanning the congruence's tangent plane.
    """

    frame: np.ndarray
    jP: np.ndarray
    jQ: np.ndarray
    tangents: tuple = field(default_factory=tuple)
    gram: np.ndarray = None

    def full_j(self):
        """Block-diagonal extension of (jP, jQ) to all of V."""
        blk = np.zeros((4, 4))
        blk[:2, :2] = self.jP
        blk[2:, 2:] = self.jQ
        return self.frame @ blk @ self.frame.T


def adapted_frame(X, Y, ref=None):
    """Orthonormal oriented frames ``(..., 4, 4)`` whose first two columns span the plane."""
    B = plane_basis(X, Y, ref=ref)
    proj_perp = np.eye(4) - B @ np.swapaxes(B, -1, -2)
    # fixed reference vectors keep the complement smooth in the plane
    cand = proj_perp @ np.eye(4)
    norms = np.linalg.norm(cand, axis=-2)
    order = np.argsort(-norms, axis=-1)
    k0 = order[..., 0]
    n1 = np.take_along_axis(cand, k0[..., None, None], axis=-1)[..., 0]
    n1 = n1 / np.linalg.norm(n1, axis=-1, keepdims=True)
    rest = proj_perp - n1[..., :, None] * n1[..., None, :]
    cand2 = rest @ np.eye(4)
    k1 = np.argmax(np.linalg.norm(cand2, axis=-2), axis=-1)
    n2 = np.take_along_axis(cand2, k1[..., None, None], axis=-1)[..., 0]
    n2 = n2 / np.linalg.norm(n2, axis=-1, keepdims=True)
    F = np.concatenate([B, n1[..., None], n2[..., None]], axis=-1)
    flip = np.linalg.det(F) < 0
    F[..., 3] = np.where(flip[..., None], -F[..., 3], F[..., 3])
    return F


def graph_matrices(frame, X, Y):
    """Express planes near ``span(frame[:, :2])`` as graphs ``(x3, x4) = M (x1, x2)``."""
    B = plane_basis(X, Y)
    C = np.swapaxes(frame, -1, -2) @ B
    return C[..., 2:, :] @ np.linalg.inv(C[..., :2, :])


def tangent_matrices(patch, frame, h=1e-4):
    """Central-difference tangent matrices ``d/ds_k`` of the patch at s = 0."""
    out = []
    for k in range(2):
        s = np.zeros((2, 2))
        s[0, k] = h
        s[1, k] = -h
        X, Y = patch(s)
        M = graph_matrices(frame, X, Y)
        out.append((M[0] - M[1]) / (2 * h))
    return out


def osculating_from_tangents(frame, M1, M2):
    G = np.array([[quad_form(M1), 0.5 * bilinear(M1, M2)],
                  [0.5 * bilinear(M1, M2), quad_form(M2)]])
    if G[0, 0] <= 0 or np.linalg.det(G) <= 0:
        raise NotElliptic("tangent plane is not positive definite for the det form")
    A = M1 / np.sqrt(G[0, 0])
    B = M2 - 0.5 * bilinear(A, M2) * A
    B = B / np.sqrt(quad_form(B))
    Ainv = np.linalg.inv(A)
    jP = Ainv @ B
    jQ = B @ Ainv
    if jP[1, 0] < 0:
        jP, jQ = -jP, -jQ
    return Osculating(frame=frame, jP=jP, jQ=jQ, tangents=(M1, M2), gram=G)


def osculating_at_patch(patch, h=1e-4, ref=None):
    X0, Y0 = patch(np.zeros(2))
    frame = adapted_frame(X0, Y0, ref=ref)
    M1, M2 = tangent_matrices(patch, frame, h)
    return osculating_from_tangents(frame, M1, M2)


def osculating_structure(x, y, h=1e-4):
    """Osculating complex structure of ``x`` at the plane over ``y``.

    Returns an :class:`Osculating` whose ``jP`` and ``jQ`` square to -1.
    """
    return osculating_at_patch(x.local_patch(y), h)


# ------------------------------------------------------ vector through plane


def _line_constraints(v):
    """Rows (A, B) with A @ X = B @ Y for every plane (X, Y) containing v."""
    rows_x, rows_y = [], []
    for l in range(4):
        e = np.zeros(4)
        e[l] = 1.0
        Xl, Yl = xy_from_coefficients(bivector(v, e))
        rows_x.append(Xl)
        rows_y.append(Yl)
    return np.array(rows_x), np.array(rows_y)


def planes_through_line(v):
    """The isometry ``Y -> X`` whose graph is the set of planes containing ``v``."""
    A, B = _line_constraints(np.asarray(v, float))
    pinv = np.linalg.pinv(A)

    def iota(Y):
        return sphere.normalize(_as_points(Y) @ (pinv @ B).T)

    return iota


def plane_through_vector(x, v, tol=1e-12, max_iter=60):
    """The unique plane of a compact elliptic congruence containing ``v``, and
    the nonlinear complex structure ``J_X v``.

    Returns ``(PluckerPoint, jv)``.
    """
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(v) == 0:
        raise ValueError("v must be nonzero")
    iota = planes_through_line(v)

    def resid(Y):
        return x.psi(Y) - iota(Y)

    Y = _bracket_start(resid, level=4)
    Y, r = _gauss_newton_sphere(resid, Y, tol, max_iter)
    if r > 1e-9:
        Y = _bracket_start(resid, level=6)
        Y, r = _gauss_newton_sphere(resid, Y, tol, max_iter)
        if r > 1e-9:
            raise NoConvergence("root finder stalled", best=r)
    point = PluckerPoint(x.psi(Y[None])[0], Y)
    osc = osculating_structure(x, Y)
    coords = osc.frame[:, :2].T @ v
    jv = osc.frame[:, :2] @ (osc.jP @ coords)
    return point, jv


def _bracket_start(resid, level):
    nodes = sample_points(level)
    return nodes[np.argmin(np.linalg.norm(resid(nodes), axis=-1))]


def _gauss_newton_sphere(resid, Y, tol, max_iter, h=1e-7):
    r = np.linalg.norm(resid(Y[None])[0])
    for _ in range(max_iter):
        if r < tol:
            break
        e1, e2 = sphere.tangent_frame(Y)
        F0 = resid(Y[None])[0]
        Jm = np.empty((3, 2))
        for k, e in enumerate((e1, e2)):
            Jm[:, k] = (resid(sphere.exp_map(Y, h * e)[None])[0] - resid(sphere.exp_map(Y, -h * e)[None])[0]) / (2 * h)
        step = np.linalg.lstsq(Jm, -F0, rcond=None)[0]
        trial = 1.0
        while trial > 1e-4:
            Yn = sphere.exp_map(Y, trial * (step[0] * e1 + step[1] * e2))
            rn = np.linalg.norm(resid(Yn[None])[0])
            if rn < r:
                break
            trial *= 0.5
        else:
            break
        Y, r = Yn, rn
    return Y, r


def nonlinear_j(x, v):
    return plane_through_vector(x, v)[1]


# --------------------------------------------------------------- real points


@dataclass
class RealPointLoop:
    samples: np.ndarray
    closed: bool
    components: int = 1

    def to_csv_rows(self):
        return [tuple(float(c) for c in s) for s in self.samples]


def real_points_curve(x, r, step=0.01, corrector_tol=1e-10, max_steps=20000,
                      totally_real_tol=1e-6):
    """Trace the planes of ``x`` meeting the plane ``r`` in a line.

    The curve is the zero set of ``F(Y) = <Y0, Y> - <X0, psi(Y)>`` on S^2_-,
    followed by predictor-corrector continuation with arc-length ``step``.
    """
    p = plucker_of_plane(r)
    X0, Y0 = p.X, p.Y
    if (np.linalg.norm(x.psi(Y0[None])[0] - X0) < totally_real_tol
            or np.linalg.norm(x.psi(-Y0[None])[0] + X0) < totally_real_tol):
        raise NotTotallyReal("the plane (with some orientation) belongs to the congruence")

    def F(Y):
        Y = _as_points(Y)
        return Y @ Y0 - x.psi(Y) @ X0

    def grad(Y, h=1e-6):
        e1, e2 = sphere.tangent_frame(Y)
        g1 = (F(sphere.exp_map(Y, h * e1)) - F(sphere.exp_map(Y, -h * e1)))[0] / (2 * h)
        g2 = (F(sphere.exp_map(Y, h * e2)) - F(sphere.exp_map(Y, -h * e2)))[0] / (2 * h)
        return g1 * e1 + g2 * e2

    def correct(Y):
        for _ in range(30):
            f = F(Y)[0]
            if abs(f) < corrector_tol:
                return Y, True
            g = grad(Y)
            gg = float(g @ g)
            if gg < 1e-20:
                return Y, False
            Y = sphere.exp_map(Y, -f / gg * g)
        return Y, abs(F(Y)[0]) < corrector_tol

    nodes = sample_points(4)
    edges = sphere.icosphere_edges(4)
    vals = F(nodes)
    crossing = edges[np.sign(vals[edges[:, 0]]) != np.sign(vals[edges[:, 1]])]
    if len(crossing) == 0:
        raise TracingFailure("no sign change of the incidence function on the sample grid")

    def zero_on_edge(edge):
        a, b = nodes[edge[0]], nodes[edge[1]]
        fa = F(a)[0]
        for _ in range(60):
            m = sphere.normalize(a + b)
            fm = F(m)[0]
            if np.sign(fm) == np.sign(fa):
                a, fa = m, fm
            else:
                b = m
        return correct(sphere.normalize(a + b))[0]

    loops = []
    covered = np.zeros(len(crossing), dtype=bool)
    mids = sphere.normalize(nodes[crossing[:, 0]] + nodes[crossing[:, 1]])
    edge_len = float(np.max(np.arccos(np.clip(np.sum(nodes[edges[:, 0]] * nodes[edges[:, 1]], axis=1), -1, 1))))
    while not covered.all() and len(loops) < 8:
        start = zero_on_edge(crossing[np.argmin(covered)])
        loop = _trace_loop(start, grad, correct, step, max_steps)
        loops.append(loop)
        pts = np.concatenate(loops)
        d = np.arccos(np.clip(mids @ pts.T, -1, 1)).min(axis=1)
        covered |= d < 2 * edge_len
    main = loops[0]
    return RealPointLoop(samples=main, closed=True, components=len(loops))


def _trace_loop(start, grad, correct, step, max_steps):
    pts = [start]
    Y = start
    g = grad(Y)
    direction = np.cross(Y, g / np.linalg.norm(g))
    for i in range(max_steps):
        Yp = sphere.exp_map(Y, step * direction)
        Yn, ok = correct(Yp)
        if not ok:
            raise TracingFailure(f"corrector failed at step {i}")
        g = grad(Yn)
        nd = np.cross(Yn, g / np.linalg.norm(g))
        if nd @ direction < 0:
            nd = -nd
        direction = nd
        Y = Yn
        if i > 10 and np.arccos(np.clip(Y @ start, -1, 1)) < 0.5 * step:
            return np.array(pts)
        pts.append(Y)
    raise TracingFailure("continuation did not close within the step budget")


# ------------------------------------------------------------------- taming


@dataclass
class TamingForm:
    center: np.ndarray

    @property
    def coefficients(self):
        c = self.center
        return np.array([c[0], c[0], c[1], c[1], c[2], c[2]])

    def to_json(self):
        return {"omega": self.center.tolist(), "coefficients": self.coefficients.tolist()}


def taming_form(x, level=SAMPLE_LEVEL):
    """Self-dual taming form: the normalised spherical mean of psi(S^2_-)."""
    ok, _ = is_elliptic(x, sample_points(level))
    if not ok:
        raise NotElliptic("taming requires a compact elliptic congruence")
    nodes = sample_points(level)
    w = sphere.vertex_areas(level)
    images = x.psi(nodes)
    m = (w[:, None] * images).sum(axis=0) / w.sum()
    if np.linalg.norm(m) < 1e-9:
        raise MeanDegenerate("spherical mean of the image vanishes")
    omega = m / np.linalg.norm(m)
    if np.min(images @ omega) <= 0:
        omega = _hemisphere_center(images)
    return TamingForm(omega)


def _hemisphere_center(points):
    # maximise t subject to points @ w >= t, |w_i| <= 1
    n = len(points)
    c = np.zeros(4)
    c[3] = -1.0
    A = np.hstack([-points, np.ones((n, 1))])
    res = linprog(c, A_ub=A, b_ub=np.zeros(n), bounds=[(-1, 1)] * 3 + [(None, None)])
    if not res.success or res.x[3] <= 0:
        raise MeanDegenerate("image does not lie in an open hemisphere")
    return sphere.normalize(res.x[:3])


def evaluate_on_congruence(x, omega, level=SAMPLE_LEVEL):
    """Values of the 2-form ``omega`` (Klein coefficients) on the unit planes of ``x``."""
    nodes = sample_points(level)
    c = coefficients_from_xy(x.psi(nodes), nodes)
    return 0.5 * c @ np.asarray(omega, float)


def is_tamed(x, omega, level=SAMPLE_LEVEL):
    return bool(np.min(evaluate_on_congruence(x, omega, level)) > 0)


def deform(x, t):
    """Contract ``x`` geodesically toward its taming centre; t=1 gives a Riemann sphere."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t == 0.0:
        return x
    omega = taming_form(x).center
    if t == 1.0:
        return ConstantCongruence(omega)
    return DeformedCongruence(x, omega, t)
