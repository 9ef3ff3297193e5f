import numpy as np
import pytest

from oracles import complex_structure_restrictions, klein_expand
from pseudocurve import congruence as cg
from pseudocurve import sphere
from pseudocurve.errors import NotAComplexStructure, NotTotallyReal
from pseudocurve.grassmann import (
    Incidence,
    TwoPlane,
    incidence,
    plane_of_plucker,
    plucker_of_plane,
    quad_form,
)

J = cg.STANDARD_J
E = np.eye(4)
Y = cg.sample_points(3)


def test_standard_sphere_is_constant():
    x = cg.riemann_sphere(J)
    X = x.psi(Y)
    np.testing.assert_allclose(X, np.tile([1.0, 0, 0], (len(Y), 1)), atol=1e-9)
    # oracle: sampled complex lines all map to X = (1, 0, 0)
    for u in (E[0], E[2], E[0] + E[2]):
        oX, _ = klein_expand(u, J @ u)
        np.testing.assert_allclose(oX, [1, 0, 0], atol=1e-15)


def test_negative_standard_sphere():
    X = cg.riemann_sphere(-J).psi(Y)
    np.testing.assert_allclose(X, np.tile([-1.0, 0, 0], (len(Y), 1)), atol=1e-9)


def test_not_a_complex_structure():
    with pytest.raises(NotAComplexStructure):
        cg.riemann_sphere(np.eye(4))


def test_conjugated_sphere_contains_complex_lines(rng):
    for _ in range(5):
        x = cg.random_conjugated_sphere(rng)
        ok, margin = cg.is_elliptic(x)
        assert ok and margin > 0
        u = rng.standard_normal(4)
        X, Yv = klein_expand(u, x.j @ u)
        np.testing.assert_allclose(x.psi(Yv[None])[0], X, atol=1e-9)


def test_is_elliptic_examples(rng):
    assert cg.is_elliptic(cg.ConstantCongruence([0, 0, 1])) == (True, 1.0)
    ok, margin = cg.is_elliptic(cg.IsometryCongruence())
    assert not ok and margin <= 1e-6
    x = cg.random_affine(rng)
    ok, margin = cg.is_elliptic(cg.deform(x, 0.5))
    assert ok and margin >= 0.5


def test_elliptic_iff_definite(rng):
    for x in (cg.random_affine(rng), cg.random_perturbed(rng), cg.random_conjugated_sphere(rng)):
        ok, _ = cg.is_elliptic(x, Y[:40])
        for y in Y[:40]:
            patch = x.local_patch(y)
            X0, Y0 = patch(np.zeros(2))
            M1, M2 = cg.tangent_matrices(patch, cg.adapted_frame(X0, Y0))
            G = np.array([[quad_form(M1), 0.5 * (quad_form(M1 + M2) - quad_form(M1) - quad_form(M2))],
                          [0.5 * (quad_form(M1 + M2) - quad_form(M1) - quad_form(M2)), quad_form(M2)]])
            assert (np.linalg.eigvalsh(G).min() > 0) == ok


def test_osculating_standard_sphere():
    o = cg.osculating_structure(cg.riemann_sphere(J), Y[5])
    jP, jQ = complex_structure_restrictions(J, o.frame[:, 0])
    F = o.frame
    # J restricted, written in the frame bases
    Jf = np.linalg.solve(F, J @ F)
    np.testing.assert_allclose(o.jP, Jf[:2, :2], atol=1e-7)
    np.testing.assert_allclose(o.jQ, Jf[2:, 2:], atol=1e-7)
    np.testing.assert_allclose(o.jP @ o.jP, -np.eye(2), atol=1e-12)
    assert np.allclose(jP @ jP, -np.eye(2))


def test_osculating_conjugated_sphere(rng):
    x = cg.random_conjugated_sphere(rng)
    for y in Y[:10]:
        o = cg.osculating_structure(x, y)
        Jf = np.linalg.solve(o.frame, x.j @ o.frame)
        np.testing.assert_allclose(Jf[2:, :2], 0, atol=1e-8)
        np.testing.assert_allclose(o.jP, Jf[:2, :2], atol=1e-7)
        np.testing.assert_allclose(o.jQ, Jf[2:, 2:], atol=1e-7)


def test_osculating_continuity_under_perturbation():
    y = sphere.normalize(np.array([0.3, -0.2, 0.9]))
    base = cg.osculating_structure(cg.riemann_sphere(J), y)
    diffs = []
    for eps in (0.02, 0.01):
        x = cg.PerturbedCongruence([1, 0, 0], eps, np.diag([1.0, 2.0, 3.0]))
        o = cg.osculating_structure(x, y)
        diffs.append(np.abs(o.jP - base.jP).max())
    assert diffs[1] < 0.7 * diffs[0]


def test_osculating_tangency(rng):
    x = cg.random_perturbed(rng)
    y = Y[7]
    o = cg.osculating_structure(x, y)
    sphere_j = cg.riemann_sphere(o.full_j())
    X0 = x.psi(y[None])[0]
    np.testing.assert_allclose(sphere_j.psi(y[None])[0], X0, atol=1e-8)
    # tangent planes agree: both Jacobians at y coincide
    np.testing.assert_allclose(sphere_j.jacobian(y[None]), x.jacobian(y[None]), atol=1e-5)


def test_plane_through_vector_standard():
    x = cg.riemann_sphere(J)
    pt, jv = cg.plane_through_vector(x, E[0])
    assert plane_of_plucker(pt).equals(TwoPlane(np.array([E[0], E[1]])))
    np.testing.assert_allclose(jv, E[1], atol=1e-7)


def test_nonlinear_j_properties(rng):
    x = cg.random_perturbed(rng)
    for _ in range(30):
        v = rng.standard_normal(4)
        p1, jv = cg.plane_through_vector(x, v)
        p2, j2v = cg.plane_through_vector(x, 2 * v)
        assert incidence(p1, p2) == Incidence.SAME_PLANE
        np.testing.assert_allclose(j2v, 2 * jv, atol=1e-7)
        _, jjv = cg.plane_through_vector(x, jv)
        np.testing.assert_allclose(jjv, -v, atol=1e-7 * max(1, np.linalg.norm(v)))


def test_plane_through_vector_grid_oracle(rng):
    x = cg.random_affine(rng)
    v = rng.standard_normal(4)
    pt, _ = cg.plane_through_vector(x, v)
    th, ph = np.meshgrid(np.linspace(0, np.pi, 101)[1:-1], np.linspace(0, 2 * np.pi, 201)[:-1], indexing="ij")
    G = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], -1)
    Xg = x.psi(G.reshape(-1, 3)).reshape(G.shape)
    # distance of v from each plane via the projector residual
    res = np.empty(th.shape)
    for i in range(th.shape[0]):
        for j in range(th.shape[1]):
            B = plane_of_plucker(cg.PluckerPoint(Xg[i, j], G[i, j])).basis
            q = np.linalg.qr(B.T)[0]
            res[i, j] = np.linalg.norm(v - q @ (q.T @ v)) / np.linalg.norm(v)
    k = np.unravel_index(np.argmin(res), res.shape)
    assert np.linalg.norm(G[k] - pt.Y) < 0.1


def test_real_points_standard_circle():
    x = cg.riemann_sphere(J)
    r = TwoPlane(np.array([E[0], E[2]]))
    loop = cg.real_points_curve(x, r)
    assert loop.closed and loop.components == 1
    p_r = plucker_of_plane(r)
    for Yv in loop.samples[::10]:
        p = cg.PluckerPoint(x.psi(Yv[None])[0], Yv)
        assert incidence(p, p_r, tol=1e-8) == Incidence.MEET_IN_LINE


def test_real_points_not_totally_real():
    with pytest.raises(NotTotallyReal):
        cg.real_points_curve(cg.riemann_sphere(J), TwoPlane(np.array([E[0], E[1]])))


def test_taming_constant():
    x = cg.ConstantCongruence([1, 0, 0])
    t = cg.taming_form(x)
    np.testing.assert_allclose(t.center, [1, 0, 0])
    np.testing.assert_allclose(t.coefficients, [1, 1, 0, 0, 0, 0])
    span12 = plucker_of_plane(TwoPlane(np.array([E[0], E[1]])))
    from pseudocurve.grassmann import coefficients_from_xy
    assert 0.5 * coefficients_from_xy(span12.X, span12.Y) @ t.coefficients == pytest.approx(1.0)


def test_is_tamed_examples(rng):
    x = cg.riemann_sphere(J)
    om = np.array([1.0, 1, 0, 0, 0, 0])
    assert cg.is_tamed(x, om)
    assert not cg.is_tamed(x, -om)
    y = cg.random_perturbed(rng)
    a = cg.taming_form(y).coefficients
    b = a + 0.1 * rng.standard_normal(6)
    assert cg.is_tamed(y, a) and cg.is_tamed(y, b)
    for s, t in rng.random((10, 2)) + 0.01:
        assert cg.is_tamed(y, s * a + t * b)


def test_image_in_open_hemisphere(rng):
    for _ in range(5):
        x = cg.random_affine(rng)
        c = cg.taming_form(x).center
        assert np.min(x.psi(Y) @ c) > 0


def test_distinct_planes_transverse(rng):
    x = cg.random_perturbed(rng)
    idx = rng.integers(0, len(Y), (1000, 2))
    X = x.psi(Y)
    for i, j in idx:
        if i == j:
            continue
        a, b = cg.PluckerPoint(X[i], Y[i]), cg.PluckerPoint(X[j], Y[j])
        assert incidence(a, b) == Incidence.TRANSVERSE


def test_deform_endpoints_and_monotone(rng):
    x = cg.random_affine(rng)
    assert cg.deform(x, 0.0) is x
    c = cg.taming_form(x).center
    np.testing.assert_allclose(cg.deform(x, 1.0).psi(Y[:5]), np.tile(c, (5, 1)), atol=1e-12)
    margins = [cg.is_elliptic(cg.deform(x, t), Y)[1] for t in (0.0, 0.25, 0.5, 0.75)]
    assert all(b >= a - 1e-9 for a, b in zip(margins, margins[1:]))


def test_json_round_trip(rng):
    for x in (cg.ConstantCongruence([0, 1, 0]), cg.random_affine(rng), cg.riemann_sphere(J),
              cg.GridCongruence.sample(cg.random_affine(rng), 2)):
        y = cg.congruence_from_json(x.to_json())
        np.testing.assert_allclose(y.psi(Y[:20]), x.psi(Y[:20]), atol=1e-12)
