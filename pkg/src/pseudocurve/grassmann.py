"""Oriented 2-planes in R^4: Pluecker/Klein coordinates, the det conformal
form on tangent vectors, and incidence of two planes.

Coordinates on V = R^4 are orthonormal.  A 2-vector is stored by its six
coefficients on the ordered basis

    dx12, dx34, dx31, dx24, dx23, dx14

and the Klein splitting writes those coefficients as

    (X1+Y1, X1-Y1, X2+Y2, X2-Y2, X3+Y3, X3-Y3).

Decomposable 2-vectors are exactly those with |X| = |Y|; after rescaling to
|X| = |Y| = 1 an oriented plane is a point (X, Y) of S^2_+ x S^2_-.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import subspace_angles

from .errors import DegenerateBasis, NotOnQuadric

# index pairs (0-based) of the Klein basis 2-vectors, in order
KLEIN_PAIRS = ((0, 1), (2, 3), (2, 0), (1, 3), (1, 2), (0, 3))
_I = np.array([p[0] for p in KLEIN_PAIRS])
_J = np.array([p[1] for p in KLEIN_PAIRS])

DEGENERACY_TOL = 1e-12
QUADRIC_TOL = 1e-9
PLANE_ANGLE_TOL = 1e-8


def bivector(u, v):
    """Klein-basis coefficients of ``u ^ v`` (batched over leading axes)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u[..., _I] * v[..., _J] - u[..., _J] * v[..., _I]


def coefficients_from_xy(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    c = np.empty(np.broadcast_shapes(X.shape, Y.shape)[:-1] + (6,))
    c[..., 0::2] = X + Y
    c[..., 1::2] = X - Y
    return c


def xy_from_coefficients(c):
    c = np.asarray(c, dtype=float)
    X = 0.5 * (c[..., 0::2] + c[..., 1::2])
    Y = 0.5 * (c[..., 0::2] - c[..., 1::2])
    return X, Y


def antisymmetric_matrix(c):
    """The 4x4 matrix M with M[i, j] the (i, j) component of the 2-vector."""
    c = np.asarray(c, dtype=float)
    M = np.zeros(c.shape[:-1] + (4, 4))
    M[..., _I, _J] = c
    M[..., _J, _I] = -c
    return M


def wedge_square(c):
    """Coefficient of dx1234 in ``gamma ^ gamma`` (Pfaffian expansion)."""
    c = np.asarray(c, dtype=float)
    M = antisymmetric_matrix(c)
    pf = M[..., 0, 1] * M[..., 2, 3] - M[..., 0, 2] * M[..., 1, 3] + M[..., 0, 3] * M[..., 1, 2]
    return 2.0 * pf


def wedge_pair(c0, c1):
    """Coefficient of dx1234 in ``gamma0 ^ gamma1``."""
    return 0.5 * (wedge_square(np.add(c0, c1)) - wedge_square(c0) - wedge_square(c1))


def plucker_xy(u, v):
    """Unit Klein coordinates ``(X, Y)`` of span(u, v), batched."""
    c = bivector(u, v)
    X, Y = xy_from_coefficients(c)
    nx = np.linalg.norm(X, axis=-1, keepdims=True)
    ny = np.linalg.norm(Y, axis=-1, keepdims=True)
    if np.any(nx * ny < DEGENERACY_TOL ** 2) or np.any(np.linalg.norm(c, axis=-1) < DEGENERACY_TOL):
        raise DegenerateBasis("basis vectors are linearly dependent")
    return X / nx, Y / ny


def plane_basis(X, Y, ref=None):
    """Orthonormal oriented basis ``(..., 4, 2)`` of the plane with Klein
    coordinates ``(X, Y)``.

    The first basis vector is the projection of ``ref`` onto the plane when
    given, which makes the basis depend smoothly on ``(X, Y)``.
    """
    c = coefficients_from_xy(X, Y)
    M = antisymmetric_matrix(c)
    s = np.sqrt(0.5 * np.sum(M * M, axis=(-2, -1)))[..., None, None]
    proj = M @ np.swapaxes(M, -1, -2) / s ** 2
    if ref is None:
        k = np.argmax(np.diagonal(proj, axis1=-2, axis2=-1), axis=-1)
        u = np.take_along_axis(proj, k[..., None, None], axis=-1)[..., 0]
    else:
        u = proj @ np.broadcast_to(np.asarray(ref, float), proj.shape[:-1])[..., None]
        u = u[..., 0]
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    v = -(M @ u[..., None])[..., 0] / s[..., 0]
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    return np.stack([u, v], axis=-1)


def plane_projector(X, Y):
    """Orthogonal projector onto the plane ``(X, Y)``."""
    M = antisymmetric_matrix(coefficients_from_xy(X, Y))
    s2 = 0.5 * np.sum(M * M, axis=(-2, -1))[..., None, None]
    return M @ np.swapaxes(M, -1, -2) / s2


def klein_action(g):
    """6x6 matrix of the induced action of ``g`` on Klein coefficients."""
    g = np.asarray(g, dtype=float)
    cols = [bivector(g[:, i], g[:, j]) for i, j in KLEIN_PAIRS]
    return np.stack(cols, axis=-1)


def two_form_value(omega, u, v):
    """Evaluate a 2-form given by Klein coefficients on the pair ``(u, v)``."""
    return np.sum(np.asarray(omega, float) * bivector(u, v), axis=-1)


@dataclass(frozen=True)
class TwoPlane:
    """Oriented plane spanned by the rows of ``basis`` (order fixes orientation)."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, dtype=float).reshape(2, 4)
        if np.linalg.norm(bivector(b[0], b[1])) < DEGENERACY_TOL:
            raise DegenerateBasis("basis vectors are linearly dependent")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def u(self):
        return self.basis[0]

    @property
    def v(self):
        return self.basis[1]

    def bivector(self):
        return bivector(self.u, self.v)

    def equals(self, other, tol=PLANE_ANGLE_TOL):
        """Same oriented plane: principal angles below ``tol`` and matching orientation."""
        angles = subspace_angles(self.basis.T, other.basis.T)
        if np.max(angles) >= tol:
            return False
        return float(np.dot(self.bivector(), other.bivector())) > 0

    def to_json(self):
        return {"basis": self.basis.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(np.array(obj["basis"], dtype=float))


@dataclass(frozen=True)
class PluckerPoint:
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float).reshape(3)
        Y = np.array(self.Y, dtype=float).reshape(3)
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    def antipode(self):
        return PluckerPoint(-self.X, -self.Y)

    def to_json(self):
        return {"X": self.X.tolist(), "Y": self.Y.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["X"], obj["Y"])


def plucker_of_plane(plane):
    X, Y = plucker_xy(plane.u, plane.v)
    return PluckerPoint(X, Y)


def plane_of_plucker(point, tol=QUADRIC_TOL):
    nx = np.linalg.norm(point.X)
    ny = np.linalg.norm(point.Y)
    if abs(nx - 1) > tol or abs(ny - 1) > tol:
        raise NotOnQuadric(f"|X| = {nx:.12g}, |Y| = {ny:.12g}; both must be 1")
    b = plane_basis(point.X, point.Y)
    return TwoPlane(b.T)


def quad_form(m):
    """The conformal quadratic form on tangent matrices: the determinant."""
    m = np.asarray(m, dtype=float)
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def bilinear(a, b):
    """Symmetric form with ``bilinear(a, a) == 2 * quad_form(a)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (a[..., 0, 0] * b[..., 1, 1] + b[..., 0, 0] * a[..., 1, 1]
            - a[..., 0, 1] * b[..., 1, 0] - b[..., 0, 1] * a[..., 1, 0])


class Incidence(str, Enum):
    TRANSVERSE = "Transverse"
    MEET_IN_LINE = "MeetInLine"
    SAME_PLANE = "SamePlane"


def incidence(p0, p1, tol=1e-9):
    """Classify how two oriented planes meet.

    Planes meet in at least a line exactly when <X0, X1> = <Y0, Y1>;
    coincidence (with either orientation) is (X1, Y1) = +-(X0, Y0).
    """
    same = (np.allclose(p0.X, p1.X, atol=tol) and np.allclose(p0.Y, p1.Y, atol=tol)) or (
        np.allclose(p0.X, -p1.X, atol=tol) and np.allclose(p0.Y, -p1.Y, atol=tol))
    if same:
        return Incidence.SAME_PLANE
    if abs(np.dot(p0.X, p1.X) - np.dot(p0.Y, p1.Y)) <= tol:
        return Incidence.MEET_IN_LINE
    return Incidence.TRANSVERSE


def incidence_by_rank(plane0, plane1, tol=1e-9):
    """Oracle: classify by the rank of the four spanning vectors."""
    q0 = np.linalg.qr(plane0.basis.T)[0]
    q1 = np.linalg.qr(plane1.basis.T)[0]
    s = np.linalg.svd(np.hstack([q0, q1]), compute_uv=False)
    rank = int(np.sum(s > tol))
    if rank == 4:
        return Incidence.TRANSVERSE
    if rank == 3:
        return Incidence.MEET_IN_LINE
    return Incidence.SAME_PLANE
