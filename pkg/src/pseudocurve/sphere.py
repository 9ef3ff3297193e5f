"""Small toolkit for the unit 2-sphere: icosphere sampling, tangent frames,
and the Riemannian exponential and logarithm maps.

All functions are vectorised over a leading batch axis.
"""
from functools import lru_cache

import numpy as np


def normalize(v, axis=-1):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=axis, keepdims=True)


@lru_cache(maxsize=8)
def _icosphere(level):
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(normalize(np.array(v, float))) for v in verts]
    for _ in range(level):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = normalize(np.add(verts[i], verts[j]))
                verts.append(tuple(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts)
    f = np.array(faces)
    v.setflags(write=False)
    f.setflags(write=False)
    return v, f


def icosphere(level=4):
    """Vertices ``(N, 3)`` and triangles ``(M, 3)``; level 4 gives 2562 vertices."""
    return _icosphere(int(level))


@lru_cache(maxsize=8)
def _vertex_areas(level):
    v, f = _icosphere(level)
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    # spherical excess via the Van Oosterom-Strackee formula
    num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    den = 1 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    tri = 2 * np.arctan2(num, den)
    w = np.zeros(len(v))
    for k in range(3):
        np.add.at(w, f[:, k], tri / 3.0)
    w.setflags(write=False)
    return w


def vertex_areas(level=4):
    """Quadrature weights summing to 4*pi."""
    return _vertex_areas(int(level))


def icosphere_edges(level=4):
    _, f = icosphere(level)
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def tangent_frame(y):
    """Orthonormal tangent vectors ``(e1, e2)`` at ``y`` with ``e1 x e2 = y``."""
    y = np.asarray(y, dtype=float)
    helper = np.zeros_like(y)
    use_x = np.abs(y[..., 0]) < 0.9
    helper[..., 0] = np.where(use_x, 1.0, 0.0)
    helper[..., 1] = np.where(use_x, 0.0, 1.0)
    e1 = helper - np.sum(helper * y, axis=-1, keepdims=True) * y
    e1 = normalize(e1)
    e2 = np.cross(y, e1)
    return e1, e2


def exp_map(y, v):
    """Geodesic from ``y`` with initial tangent velocity ``v`` evaluated at time 1."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    t = np.linalg.norm(v, axis=-1, keepdims=True)
    safe = np.where(t > 1e-300, t, 1.0)
    sinc = np.where(t > 1e-8, np.sin(t) / safe, 1.0 - t * t / 6.0)
    out = np.cos(t) * y + sinc * v
    return normalize(out)


def log_map(c, x):
    """Tangent vector at ``c`` pointing to ``x`` with length the geodesic distance."""
    c = np.asarray(c, dtype=float)
    x = np.asarray(x, dtype=float)
    cosang = np.clip(np.sum(c * x, axis=-1, keepdims=True), -1.0, 1.0)
    perp = x - cosang * c
    s = np.linalg.norm(perp, axis=-1, keepdims=True)
    ang = np.arctan2(s, cosang)
    safe = np.where(s > 1e-300, s, 1.0)
    factor = np.where(s > 1e-12, ang / safe, 1.0)
    return factor * perp


def random_unit(rng, n=None):
    shape = (3,) if n is None else (n, 3)
    return normalize(rng.standard_normal(shape))
