"""Darboux-integrable examples: builtin charts, curve generation in the
hyperbolic case, its shear symmetries, the coframe built from a solution F,
the coordinate duality between the last two cases, and a least-squares fit
of the structure equations that certifies a coframe.
"""
import csv
import io
from dataclasses import dataclass, field

import numpy as np
import sympy as sp
from numpy.polynomial import polynomial as npoly

from .chart import CurveField, builtin_chart
from .errors import ConstraintViolated, Degenerate, DomainEscape, PathInconsistency
from .forms import (CHART_VARS, DUAL_VARS, Coframe, Form1, P, Pb, W, Wb, Z, Zb,
                    conj, p, pb, w, wb, z, zb)
from .grid import integrate_rays, stage_radii

__all__ = [
    "builtin_chart", "case3_integrate", "case3_residual", "case3_symmetry", "shear",
    "flat_coframe", "case3_coframe", "case4_coframe", "case4_constraint", "duality_check",
    "swap_coframe", "structure_fit", "StructureFit", "sample_points",
    "ideal_closure_defect", "case3_report",
]

HYPERBOLIC_MARGIN = 1e-6


# ------------------------------------------------------------ case (3) curves


def _series(coeffs):
    return np.atleast_1d(np.asarray(coeffs, dtype=complex))


def case3_integrate(pfun, w0, grid, substeps=32, path_tol=1e-6, check_paths=True):
    """Integrate ``dW = (W Zbar/D + P(Z)) dZ + (Wbar/D) dZbar``, ``D = 1 - |Z|^2``,
    along rays of a polar grid in Z with ``W(0) = w0``.

    Returns a :class:`CurveField` with ``z = Z``, ``w = W`` and ``p = P(Z)``
    and the defining-equation residual in ``residual``.
    """
    if grid.kind != "polar":
        raise ValueError("case3_integrate needs a polar grid")
    if grid.radius >= 1 - HYPERBOLIC_MARGIN:
        raise DomainEscape("grid leaves the unit disk in Z")
    c = _series(pfun)
    e = np.exp(1j * grid.phi)
    S = stage_radii(grid, substeps)[..., None] * e
    Dv = 1 - np.abs(S) ** 2
    Pv = npoly.polyval(S, c)
    Sb = np.conj(S)

    def rhs(j, k, st, Wv):
        s = j, k, st
        return (Wv * Sb[s] / Dv[s] + Pv[s]) * e + np.conj(Wv) / Dv[s] * np.conj(e)

    Wf = integrate_rays(grid, rhs, w0, substeps)
    Zn = grid.nodes
    out = CurveField(grid, Zn.copy(), Wf, npoly.polyval(Zn, c))
    if check_paths:
        _path_check(c, w0, grid, Wf, path_tol)
    out.residual = case3_residual(out, c)
    return out


def _case3_dW(Zv, Wv, c):
    D = 1 - abs(Zv) ** 2
    return Wv * np.conj(Zv) / D + npoly.polyval(Zv, c), np.conj(Wv) / D


def _path_check(c, w0, grid, Wf, tol, steps=400):
    """Compare the ray value at angle ``phi_1`` with ray-to-``phi_0`` plus arc."""
    j = grid.n - 1
    r = grid.r[j]
    W = complex(Wf[j, 0])
    dphi = grid.phi[1] if grid.n > 1 else 0.0
    h = dphi / steps

    def f(phi, Wv):
        Zv = r * np.exp(1j * phi)
        a, b = _case3_dW(Zv, Wv, c)
        return a * 1j * Zv - b * 1j * np.conj(Zv)

    phi = 0.0
    for _ in range(steps):
        k1 = f(phi, W)
        k2 = f(phi + h / 2, W + h / 2 * k1)
        k3 = f(phi + h / 2, W + h / 2 * k2)
        k4 = f(phi + h, W + h * k3)
        W += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        phi += h
    diff = abs(W - Wf[j, 1])
    if diff > tol:
        raise PathInconsistency(f"homotopic paths disagree by {diff:.3g}")
    return diff


def case3_residual(field, pfun=None):
    """Max over interior nodes of both components of the defining equation,
    ``|W_Z - W Zbar/D - P|`` and ``|W_Zbar - Wbar/D|``."""
    g = field.grid
    Zn = field.z
    WZ, WZb = g.wirtinger(field.w)
    D = 1 - np.abs(Zn) ** 2
    Pv = field.p if pfun is None else npoly.polyval(Zn, _series(pfun))
    r1 = WZ - field.w * np.conj(Zn) / D - Pv
    r2 = WZb - np.conj(field.w) / D
    m = g.interior
    return float(max(np.abs(r1[m]).max(), np.abs(r2[m]).max()))


def shear(fholo, Zv):
    """Displacement ``a(Z, Zbar)`` of the case-(3) shear generated by ``f``:
    ``r = Z^2 f + conj((Z^2 f)')`` and ``a = (conj(r) + r Zbar) / (1 - |Z|^2)``."""
    c = _series(fholo)
    z2f = npoly.polymul([0, 0, 1], c)
    r = npoly.polyval(Zv, z2f) + np.conj(npoly.polyval(Zv, npoly.polyder(z2f)))
    return (np.conj(r) + r * np.conj(Zv)) / (1 - np.abs(Zv) ** 2)


def case3_symmetry(fholo, field):
    """Apply ``W -> W + a`` to a case-(3) curve field."""
    Zv = field.z
    if np.any(np.abs(Zv) >= 1 - HYPERBOLIC_MARGIN):
        raise DomainEscape("field reaches the boundary of the unit disk")
    out = CurveField(field.grid, Zv.copy(), field.w + shear(fholo, Zv), field.p.copy())
    out.residual = case3_residual(out)
    return out


# ------------------------------------------------------------ coframes


def flat_coframe():
    """``(dw - p dz, dz, dp)``: the integrable (complex surface) case."""
    theta = Form1.d(w) - Form1.d(z).scale(p)
    return Coframe(theta, Form1.d(z), Form1.d(p))


def case3_coframe():
    """``(dW - (W Zbar/D + P) dZ - (Wbar/D) dZbar, dZ, dP)`` with ``D = 1 - Z Zbar``."""
    D = 1 - Z * Zb
    theta = (Form1.d(W, DUAL_VARS) - Form1.d(Z, DUAL_VARS).scale(W * Zb / D + P)
             - Form1.d(Zb, DUAL_VARS).scale(Wb / D))
    return Coframe(theta, Form1.d(Z, DUAL_VARS), Form1.d(P, DUAL_VARS), variables=DUAL_VARS)


def case4_constraint(F):
    """The first-order PDE a case-(4) function F must satisfy."""
    F = sp.sympify(F)
    D = 1 - p * pb
    return (sp.diff(F, pb) + conj(F) * sp.diff(F, zb)
            + wb / D * sp.diff(F, w) + p * wb / D * sp.diff(F, wb))


def sample_points(n=100, seed=0, radius=0.5):
    """Reproducible sample points ``(z, w, p)`` with every entry in a disk."""
    rng = np.random.default_rng(seed)
    mod = radius * np.sqrt(rng.random((n, 3)))
    arg = 2 * np.pi * rng.random((n, 3))
    return mod * np.exp(1j * arg)


def _evaluate(expr, points):
    f = sp.lambdify(CHART_VARS, expr, "numpy")
    vals = []
    for a, b, c in points:
        vals.append(complex(f(a, np.conj(a), b, np.conj(b), c, np.conj(c))))
    return np.array(vals)


def case4_coframe(F, samples=None, tol=1e-8):
    """Coframe ``theta0 = dw - (w pbar/D - z) dp - (wbar/D) dpbar``,
    ``omega0 = dz - F dp``, ``pi0 = dp`` with ``D = 1 - |p|^2``.

    Raises :class:`ConstraintViolated` when the constraint PDE fails at a
    sample by more than ``tol``.
    """
    F = sp.sympify(F)
    pts = sample_points() if samples is None else samples
    res = np.abs(_evaluate(case4_constraint(F), pts))
    k = int(np.argmax(res))
    if res[k] > tol:
        raise ConstraintViolated(f"constraint residual {res[k]:.3g} at sample {pts[k]}",
                                 sample=pts[k], residual=float(res[k]))
    D = 1 - p * pb
    theta = Form1.d(w) - Form1.d(p).scale(w * pb / D - z) - Form1.d(pb).scale(wb / D)
    cf = Coframe(theta, Form1.d(z) - Form1.d(p).scale(F), Form1.d(p), meta={"F": F})
    cf.check_nondegenerate(pts)
    return cf


def swap_coframe(cf):
    """``(theta, omega, pi) -> (theta, pi, -omega)``."""
    return Coframe(cf.theta, cf.pi, -cf.omega, variables=cf.variables)


DUALITY_MAP = (p, pb, w, wb, -z, -zb)  # (Z, Zbar, W, Wbar, P, Pbar) in chart variables


def duality_check(F, samples=None):
    """Max least-squares misfit between the pulled-back case-(3) forms and the
    span of the swapped case-(4) coframe, over the samples."""
    cf4 = case4_coframe(F, samples)
    target = swap_coframe(cf4)
    pulled = [f.pullback(DUALITY_MAP, CHART_VARS) for f in case3_coframe().forms]
    pulled_cf = Coframe(*pulled)
    pts = sample_points() if samples is None else samples
    worst = 0.0
    for pt in pts:
        A = target.coefficients(pt).T      # 6 x 3
        B = pulled_cf.coefficients(pt).T   # 6 x 3
        x = np.linalg.lstsq(A, B, rcond=None)[0]
        worst = max(worst, float(np.max(np.linalg.norm(A @ x - B, axis=0))))
    return worst


# ------------------------------------------------------------ structure fit


TORSION_NAMES = ("S1", "S2", "T2", "T3", "U2", "U3", "V2", "V3")
CONNECTION_NAMES = ("alpha", "beta", "gamma", "delta", "epsilon")
_PAIRS = [(a, b) for a in range(6) for b in range(a + 1, 6)]


def _wedge(a, b):
    return np.outer(a, b) - np.outer(b, a)


def _components(M):
    return np.array([M[a, b] for a, b in _PAIRS])


def _unit(k):
    e = np.zeros(6, dtype=complex)
    e[k] = 1.0
    return e


# coframe basis indices
TH, OM, PI, THB, OMB, PIB = range(6)


def _design_matrix():
    """Columns: contribution of each unknown to the 45 components of the
    right-hand sides of the three structure equations."""
    cols = []
    th, om, pi_, thb, omb, pib = (_unit(k) for k in range(6))

    def col(eq, M):
        v = np.zeros(45, dtype=complex)
        v[15 * eq:15 * eq + 15] = _components(M)
        return v

    def add(*parts):
        return sum(parts[1:], parts[0])

    for a in range(6):      # alpha
        e = _unit(a)
        cols.append(add(col(0, -_wedge(e, th)), col(2, -_wedge(e, pi_))))
    for a in range(6):      # beta
        cols.append(col(1, -_wedge(_unit(a), th)))
    for a in range(6):      # gamma
        e = _unit(a)
        cols.append(add(col(1, -_wedge(e, om)), col(2, _wedge(e, pi_))))
    for a in range(6):      # delta
        cols.append(col(2, -_wedge(_unit(a), th)))
    for a in range(6):      # epsilon
        cols.append(col(2, -_wedge(_unit(a), om)))
    cols.append(col(1, -_wedge(pi_, thb)))   # S1
    cols.append(col(1, -_wedge(pi_, omb)))   # S2
    cols.append(col(0, _wedge(omb, thb)))    # T2
    cols.append(col(0, _wedge(pib, thb)))    # T3
    cols.append(col(1, _wedge(omb, thb)))    # U2
    cols.append(col(1, _wedge(pib, thb)))    # U3
    cols.append(col(2, _wedge(omb, thb)))    # V2
    cols.append(col(2, _wedge(pib, thb)))    # V3
    return np.column_stack(cols)


_A = _design_matrix()
_NTORSION = len(TORSION_NAMES)


@dataclass
class StructureFit:
    """Per-sample fitted coefficients of the structure equations."""

    samples: np.ndarray
    connection: np.ndarray      # (n, 5, 6) coefficients on the coframe basis
    torsion: np.ndarray         # (n, 8) in the order of TORSION_NAMES
    residuals: np.ndarray       # (n,)
    torsion_unique: np.ndarray = field(default=None)

    @property
    def residual(self):
        return float(np.max(self.residuals))

    def torsion_dict(self):
        return {name: self.torsion[:, k] for k, name in enumerate(TORSION_NAMES)}

    def max_abs(self, *names):
        d = self.torsion_dict()
        return float(max(np.max(np.abs(d[n])) for n in names))

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["re_z", "im_z", "re_w", "im_w", "re_p", "im_p", "residual"]
                        + [f"abs_{n}" for n in TORSION_NAMES])
        for s, r, t in zip(self.samples, self.residuals, self.torsion):
            coords = [s[0].real, s[0].imag, s[1].real, s[1].imag, s[2].real, s[2].imag]
            writer.writerow([repr(float(v)) for v in coords] + [repr(float(r))]
                            + [repr(float(abs(v))) for v in t])
        return buf.getvalue()


def structure_fit(cf, samples=None, tol=1e-12):
    """Least-squares fit of the structure equations at each sample.

    The 2-forms ``d theta + pi ^ omega``, ``d omega`` and ``d pi`` are expanded
    on the coframe basis and matched against the connection and torsion terms
    with the torsion shapes imposed exactly.
    """
    pts = sample_points() if samples is None else np.asarray(samples, dtype=complex)
    n = len(pts)
    conn = np.zeros((n, 5, 6), dtype=complex)
    tors = np.zeros((n, _NTORSION), dtype=complex)
    res = np.zeros(n)
    unique = np.zeros(n, dtype=bool)
    _, s, vt = np.linalg.svd(_A)
    rank = int(np.sum(s > 1e-10 * s[0]))
    null = vt[rank:].conj().T
    torsion_free = np.allclose(null[-_NTORSION:], 0, atol=1e-10) if null.size else True
    for i, pt in enumerate(pts):
        K = cf.basis_matrix(pt)
        if abs(np.linalg.det(K)) < tol:
            raise Degenerate(f"coframe wedge vanishes at {pt}")
        L = np.linalg.inv(K)
        dmat = cf.derivatives(pt)
        rhs = []
        pi_om = _wedge(_unit(PI), _unit(OM))
        for k in range(3):
            M = L.T @ dmat[k] @ L
            if k == 0:
                M = M + pi_om
            rhs.append(_components(M))
        b = np.concatenate(rhs)
        x, *_ = np.linalg.lstsq(_A, b, rcond=None)
        res[i] = float(np.linalg.norm(_A @ x - b))
        conn[i] = x[:30].reshape(5, 6)
        tors[i] = x[30:]
        unique[i] = torsion_free
    return StructureFit(pts, conn, tors, res, unique)


def ideal_closure_defect(cf, generators=(0, 1), samples=None):
    """Max misfit of ``d(generator)`` modulo the ideal spanned by the
    generators, over the samples; zero means the ideal is closed."""
    pts = sample_points() if samples is None else samples
    worst = 0.0
    for pt in pts:
        K = cf.basis_matrix(pt)
        L = np.linalg.inv(K)
        dmat = cf.derivatives(pt)
        cols = [_components(_wedge(_unit(g), _unit(a))) for g in generators for a in range(6)]
        A = np.column_stack(cols)
        for g in generators:
            b = _components(L.T @ dmat[g] @ L)
            x = np.linalg.lstsq(A, b, rcond=None)[0]
            worst = max(worst, float(np.linalg.norm(A @ x - b)))
    return worst


def case3_report(samples=None):
    """Ideal and closure checks of the case-(3) forms ``(theta3, dZ)``.

    The ideal property holds by construction (both forms are built from
    ``dW, dZ, dZbar`` with the displayed coefficients), so it is reported as
    the misfit of ``theta3`` against its own definition on sampled points;
    closure is the misfit of ``d theta3, d dZ`` modulo the ideal.
    """
    cf = case3_coframe()
    pts = sample_points() if samples is None else samples
    worst = 0.0
    for pt in pts:
        Zv, Wv, Pv = pt
        D = 1 - abs(Zv) ** 2
        expect = np.array([-(Wv * np.conj(Zv) / D + Pv), -np.conj(Wv) / D, 1, 0, 0, 0])
        worst = max(worst, float(np.abs(cf.coefficients(pt)[0] - expect).max()))
    return {"ideal": worst, "closure": ideal_closure_defect(cf, (0, 1), pts)}
