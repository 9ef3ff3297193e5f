"""Microlocal invariants f, g of elliptic line congruences.

At each stencil point the osculating complex structure fixes a frame
``L = lambda^{-1}`` whose first two columns are a complex basis of the plane
and whose last two columns represent a complex basis of the quotient.  The
Maurer-Cartan form ``mu = d lambda lambda^{-1} = -L^{-1} dL`` is differenced
on the stencil and split into complex-linear and conjugate-linear blocks;
``xi' = f theta + h conj(theta)`` and ``zeta' = -h theta + g conj(theta)``
then give f and g.
"""
import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from . import sphere
from .chart import fiber_congruence
from .congruence import SAMPLE_LEVEL, STANDARD_J
from .errors import NotElliptic, StencilDegenerate
from .grassmann import bilinear, plane_basis, quad_form

STENCIL_STEP = 1e-3
OSCULATING_STEP = 1e-4
ZERO_TOL = 1e-6
_EPS = np.finfo(float).eps


@dataclass
class MicrolocalSample:
    """Frame-normalised invariants at one point ``y`` of S^2_-.

    ``fval`` and ``gval`` are taken in the gauge where ``i theta ^ conj(theta)``
    equals the round area form at ``y``; ``area_weight`` is the quadrature
    weight attached to ``y`` (1 for an isolated sample).
    """

    y: np.ndarray
    fval: complex
    gval: complex
    area_weight: float = 1.0

    @property
    def f_density(self):
        return abs(self.fval) ** 2 * self.area_weight

    @property
    def g_density(self):
        return abs(self.gval) ** 2 * self.area_weight


# ------------------------------------------------------------ batched frames


def _geodesic_patch(x, Y0):
    """Batched normal-coordinate patches ``s -> (X, Y)`` at the rows of ``Y0``."""
    e1, e2 = sphere.tangent_frame(Y0)

    def patch(s):
        s = np.asarray(s, dtype=float)
        extra = s.ndim - 2
        sl = (slice(None),) + (None,) * extra
        y = np.broadcast_to(Y0[sl], s.shape[:-1] + (3,))
        v = s[..., :1] * e1[sl] + s[..., 1:] * e2[sl]
        Yp = sphere.exp_map(y, v)
        Xp = x.psi(Yp.reshape(-1, 3)).reshape(Yp.shape)
        return Xp, Yp

    return patch


def _fiber_patch(fc, p0):
    def patch(s):
        s = np.asarray(s, dtype=float)
        sl = (slice(None),) + (None,) * (s.ndim - 2)
        return fc.planes(p0[sl] + s[..., 0] + 1j * s[..., 1])
    return patch


def _real_block(jP, jQ):
    """``(..., 4, 4)`` coordinates of ``(a, jP a, c, jQ c)`` with ``a = c = e1``."""
    out = np.zeros(jP.shape[:-2] + (4, 4))
    out[..., 0, 0] = 1.0
    out[..., :2, 1] = jP[..., :, 0]
    out[..., 2, 2] = 1.0
    out[..., 2:, 3] = jQ[..., :, 0]
    return out


def _osculating_frames(patch, offsets, ref_u, normals, h):
    """Frames ``L`` at the stencil offsets ``(N, K, 2)``.

    ``ref_u`` (N, 4) fixes the first plane vector smoothly and ``normals``
    (N, 4, 2) represent the quotient at every stencil point.
    """
    N, K = offsets.shape[:2]
    dirs = np.array([[0.0, 0.0], [h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]])
    s = offsets[:, :, None, :] + dirs[None, None]
    X, Y = patch(s)
    B = plane_basis(X, Y, ref=ref_u[:, None, None, :])       # (N, K, 5, 4, 2)
    G = np.concatenate([B[:, :, 0], np.broadcast_to(normals[:, None], (N, K, 4, 2))], axis=-1)
    Ginv = np.linalg.inv(G)
    C = Ginv[:, :, None] @ B                                 # (N, K, 5, 4, 2)
    M = C[..., 2:, :] @ np.linalg.inv(C[..., :2, :])
    M1 = (M[:, :, 1] - M[:, :, 2]) / (2 * h)
    M2 = (M[:, :, 3] - M[:, :, 4]) / (2 * h)
    g11, g12, g22 = quad_form(M1), 0.5 * bilinear(M1, M2), quad_form(M2)
    if np.any(g11 <= 0) or np.any(g11 * g22 - g12 ** 2 <= 0):
        raise NotElliptic("tangent plane is not positive definite for the det form")
    A = M1 / np.sqrt(g11)[..., None, None]
    Bm = M2 - 0.5 * bilinear(A, M2)[..., None, None] * A
    Bm = Bm / np.sqrt(quad_form(Bm))[..., None, None]
    Ainv = np.linalg.inv(A)
    jP = Ainv @ Bm
    jQ = Bm @ Ainv
    sign = np.where(jP[..., 1, 0] < 0, -1.0, 1.0)[..., None, None]
    jP, jQ = sign * jP, sign * jQ
    return G @ _real_block(jP, jQ), Y[:, :, 0]


def _split(m):
    """Complex numbers of the linear and antilinear parts of a real 2x2 block."""
    lin = 0.5 * (m - STANDARD_J[:2, :2] @ m @ STANDARD_J[:2, :2])
    anti = 0.5 * (m + STANDARD_J[:2, :2] @ m @ STANDARD_J[:2, :2])
    return lin[..., 0, 0] + 1j * lin[..., 1, 0], anti[..., 0, 0] + 1j * anti[..., 1, 0]


def _stencil(step, richardson):
    d = [step, step / 2] if richardson else [step]
    pts = [[0.0, 0.0]]
    for e in d:
        pts += [[e, 0.0], [-e, 0.0], [0.0, e], [0.0, -e]]
    return np.array(pts)


def _derivative(F, step, richardson, k):
    """Central difference of stencil values ``F`` along axis ``k`` at the centre."""
    i = 1 + 2 * k
    d1 = (F[:, i] - F[:, i + 1]) / (2 * step)
    if not richardson:
        return d1
    d2 = (F[:, i + 4] - F[:, i + 5]) / step
    return (4 * d2 - d1) / 3


def _microlocal_batch(patch, n, step=STENCIL_STEP, h=OSCULATING_STEP, gauge=None,
                      richardson=False):
    """Return ``f, g, h``, the size of ``theta'`` and the density
    ``i theta ^ conj(theta) / dA`` at the patch centres."""
    cross = _stencil(step, richardson)
    X0, Y0 = patch(np.zeros((n, 1, 2)))
    B0 = plane_basis(X0[:, 0], Y0[:, 0])
    P = B0 @ np.swapaxes(B0, -1, -2)
    # two fixed quotient representatives: the orthogonal complement at the centre
    _, _, vt = np.linalg.svd(P)
    normals = np.swapaxes(vt[:, 2:, :], -1, -2)
    flip = np.linalg.det(np.concatenate([B0, normals], -1)) < 0
    normals[flip, :, 1] *= -1
    offsets = np.broadcast_to(cross, (n,) + cross.shape)
    L, Ys = _osculating_frames(patch, offsets, B0[..., 0], normals, h)
    if gauge is not None:
        L = L @ np.linalg.inv(gauge)
    cond = np.linalg.cond(L[:, 0])
    if np.any(cond * _EPS / step ** 2 > 1e-3):
        raise StencilDegenerate("finite differences lose more than three digits")
    Linv = np.linalg.inv(L[:, 0])
    mu = [-(Linv @ _derivative(L, step, richardson, k)) for k in range(2)]
    theta, xi_p, zeta_p, theta_p = [], [], [], []
    for m in mu:
        theta.append(_split(m[:, 2:, :2])[0])
        theta_p.append(_split(m[:, 2:, :2])[1])
        xi_p.append(_split(m[:, :2, :2])[1])
        zeta_p.append(_split(m[:, 2:, 2:])[1])
    T = np.stack([np.stack([theta[0], np.conj(theta[0])], -1),
                  np.stack([theta[1], np.conj(theta[1])], -1)], -2)
    if np.any(np.linalg.cond(T) > 1e12):
        raise StencilDegenerate("theta ^ conj(theta) vanishes on the stencil")
    fh = np.linalg.solve(T, np.stack(xi_p, -1)[..., None])[..., 0]
    hg = np.linalg.solve(T, np.stack(zeta_p, -1)[..., None])[..., 0]
    # round area of the stencil coordinates at the centre
    dY1 = _derivative(Ys, step, richardson, 0)
    dY2 = _derivative(Ys, step, richardson, 1)
    area = np.linalg.norm(np.cross(dY1, dY2), axis=-1)
    density = 2 * np.imag(np.conj(theta[0]) * theta[1]) / area
    return fh[:, 0], hg[:, 1], fh[:, 1], -hg[:, 0], np.abs(np.stack(theta_p, -1)).max(-1), density


def _normalise(f, g, density):
    scale = np.sqrt(np.abs(density))
    return f * scale, g * scale


def microlocal_fg(x, y, step=STENCIL_STEP, gauge=None, richardson=False):
    """Microlocal invariants of the congruence ``x`` at ``y`` in S^2_-.

    ``gauge`` is an optional array of real structure-group matrices applied
    to the frame at the stencil points (centre, +s1, -s1, +s2, -s2, then the
    half steps when ``richardson``); it must sample a smooth gauge section.
    ``richardson`` combines steps ``step`` and ``step / 2`` for fourth order.
    """
    y = sphere.normalize(np.asarray(y, float).reshape(3))
    samples = microlocal_batch(x, y[None], step=step, gauge=gauge, richardson=richardson)
    return samples[0]


def microlocal_batch(x, Y, weights=None, step=STENCIL_STEP, gauge=None, richardson=False):
    """:func:`microlocal_fg` at every row of ``Y``."""
    Y = sphere.normalize(np.atleast_2d(np.asarray(Y, float)))
    k = len(_stencil(step, richardson))
    g = None if gauge is None else np.broadcast_to(gauge, (len(Y), k, 4, 4))
    f, gg, _, _, _, dens = _microlocal_batch(_geodesic_patch(x, Y), len(Y), step, gauge=g,
                                             richardson=richardson)
    f, gg = _normalise(f, gg, dens)
    w = np.ones(len(Y)) if weights is None else np.asarray(weights, float)
    return [MicrolocalSample(Y[k], complex(f[k]), complex(gg[k]), float(w[k])) for k in range(len(Y))]


def microlocal_fiber(fc, p, step=STENCIL_STEP):
    """``(f, g)`` normalised against the round metric for a fiber congruence
    at the fiber coordinates ``p``."""
    p = np.atleast_1d(np.asarray(p, complex))
    f, g, _, _, _, dens = _microlocal_batch(_fiber_patch(fc, p), len(p), step)
    return _normalise(f, g, dens)


def balance_integrals(x, level=SAMPLE_LEVEL, chunk=512):
    """``(If, Ig)``: quadrature of ``|f|^2`` and ``|g|^2`` against the invariant area."""
    samples = sample_invariants(x, level, chunk)
    If = float(sum(s.f_density for s in samples))
    Ig = float(sum(s.g_density for s in samples))
    return If, Ig


def sample_invariants(x, level=SAMPLE_LEVEL, chunk=512):
    Y = np.asarray(sphere.icosphere(level)[0])
    w = np.asarray(sphere.vertex_areas(level))
    out = []
    for k in range(0, len(Y), chunk):
        out.extend(microlocal_batch(x, Y[k:k + chunk], w[k:k + chunk]))
    return out


def fiber_sample_points(radius=0.3, rings=2, per_ring=6):
    """Fiber coordinates near p = 0 used by :func:`is_almost_complex`."""
    pts = [0.0]
    for r in np.linspace(radius / rings, radius, rings):
        pts.extend(r * np.exp(2j * np.pi * np.arange(per_ring) / per_ring))
    return np.array(pts, dtype=complex)


def is_almost_complex(c, samples, p_samples=None, tol=ZERO_TOL):
    """True when f and g vanish on every sampled fiber congruence of the chart.

    ``samples`` are base points ``(z0, w0)``.  Chart fibers are local patches,
    so the vanishing of one invariant does not force the other and both are
    tested.
    """
    ps = fiber_sample_points() if p_samples is None else np.asarray(p_samples, complex)
    worst = 0.0
    for z0, w0 in samples:
        fc = fiber_congruence(c, z0, w0, check=False)
        f, g = microlocal_fiber(fc, ps)
        worst = max(worst, float(np.max(np.abs(f))), float(np.max(np.abs(g))))
    return worst < tol


def samples_to_csv(samples):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["Y1", "Y2", "Y3", "re_f", "im_f", "re_g", "im_g", "weight"])
    for s in samples:
        writer.writerow([repr(float(v)) for v in (*s.y, s.fval.real, s.fval.imag,
                                                    s.gval.real, s.gval.imag, s.area_weight)])
    return buf.getvalue()


def balance_json(If, Ig):
    return json.dumps({"If": If, "Ig": Ig})
