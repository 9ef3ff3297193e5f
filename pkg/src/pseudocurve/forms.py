"""Complex 1-forms with symbolic coefficients in Wirtinger coordinates.

A chart has six independent symbols ``(z, zb, w, wb, p, pb)`` standing for a
complex coordinate triple and its conjugates; 1-forms are stored by their
coefficients on ``dz, dzb, dw, dwb, dp, dpb``.  Expressions are sympy
objects; conjugation swaps each symbol with its partner and ``I`` with ``-I``.
"""
from dataclasses import dataclass

import numpy as np
import sympy as sp

from .errors import Degenerate

z, zb, w, wb, p, pb = sp.symbols("z zb w wb p pb")
CHART_VARS = (z, zb, w, wb, p, pb)

Z, Zb, W, Wb, P, Pb = sp.symbols("Z Zb W Wb P Pb")
DUAL_VARS = (Z, Zb, W, Wb, P, Pb)


def conj_map(variables):
    pairs = {}
    for a, b in zip(variables[0::2], variables[1::2]):
        pairs[a] = b
        pairs[b] = a
    return pairs


def conj(expr, variables=CHART_VARS):
    """Formal conjugate: swap paired symbols and send I to -I."""
    expr = sp.sympify(expr)
    swapped = expr.xreplace(conj_map(variables))
    return swapped.xreplace({sp.I: -sp.I})


# ------------------------------------------------------------ prefix JSON

_OPS = {"+": sp.Add, "*": sp.Mul}


def to_prefix(expr):
    """Serialise a sympy expression as a prefix-notation JSON tree."""
    expr = sp.sympify(expr)
    if expr is sp.I:
        return "I"
    if isinstance(expr, sp.Symbol):
        return expr.name
    if isinstance(expr, sp.Integer):
        return int(expr)
    if isinstance(expr, sp.Rational):
        return ["/", int(expr.p), int(expr.q)]
    if isinstance(expr, sp.Float):
        return float(expr)
    if isinstance(expr, sp.Add):
        return ["+"] + [to_prefix(a) for a in expr.args]
    if isinstance(expr, sp.Mul):
        return ["*"] + [to_prefix(a) for a in expr.args]
    if isinstance(expr, sp.Pow):
        return ["^", to_prefix(expr.base), to_prefix(expr.exp)]
    raise ValueError(f"cannot serialise {expr!r}")


def from_prefix(tree, variables=CHART_VARS):
    """Inverse of :func:`to_prefix`; also accepts ``["conj", e]`` and ``["-", a, b]``."""
    names = {v.name: v for v in variables}
    if isinstance(tree, bool):
        raise ValueError("booleans are not expressions")
    if isinstance(tree, int):
        return sp.Integer(tree)
    if isinstance(tree, float):
        return sp.Float(tree)
    if isinstance(tree, str):
        if tree == "I":
            return sp.I
        if tree not in names:
            raise ValueError(f"unknown symbol {tree!r}")
        return names[tree]
    if isinstance(tree, dict) and "expr" in tree:
        return from_prefix(tree["expr"], variables)
    if not isinstance(tree, list) or not tree:
        raise ValueError(f"malformed expression node {tree!r}")
    op, args = tree[0], [from_prefix(a, variables) for a in tree[1:]]
    if op in _OPS:
        return _OPS[op](*args)
    if op == "-":
        return args[0] - sum(args[1:]) if len(args) > 1 else -args[0]
    if op == "/":
        return args[0] / args[1]
    if op == "^":
        return args[0] ** args[1]
    if op == "conj":
        return conj(args[0], variables)
    raise ValueError(f"unknown operator {op!r}")


# ------------------------------------------------------------ 1-forms


@dataclass(frozen=True)
class Form1:
    """Coefficients of a complex 1-form on ``d(variables)``."""

    coeffs: tuple
    variables: tuple = CHART_VARS

    def __post_init__(self):
        c = tuple(sp.sympify(a) for a in self.coeffs)
        if len(c) != len(self.variables):
            raise ValueError("one coefficient per variable required")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def d(cls, f, variables=CHART_VARS):
        f = sp.sympify(f)
        return cls(tuple(sp.diff(f, v) for v in variables), variables)

    def __add__(self, other):
        return Form1(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)), self.variables)

    def __sub__(self, other):
        return Form1(tuple(a - b for a, b in zip(self.coeffs, other.coeffs)), self.variables)

    def __neg__(self):
        return Form1(tuple(-a for a in self.coeffs), self.variables)

    def scale(self, f):
        f = sp.sympify(f)
        return Form1(tuple(f * a for a in self.coeffs), self.variables)

    def conjugate(self):
        m = conj_map(self.variables)
        idx = {v: i for i, v in enumerate(self.variables)}
        out = [None] * len(self.coeffs)
        for v, a in zip(self.variables, self.coeffs):
            out[idx[m[v]]] = conj(a, self.variables)
        return Form1(tuple(out), self.variables)

    def exterior_derivative(self):
        """Antisymmetric matrix ``D`` with ``d(form) = sum_{j<k} D[j,k] dx_j ^ dx_k``."""
        n = len(self.variables)
        D = [[sp.Integer(0)] * n for _ in range(n)]
        for j in range(n):
            for k in range(n):
                if j != k:
                    D[j][k] = sp.diff(self.coeffs[k], self.variables[j]) - sp.diff(self.coeffs[j], self.variables[k])
        return D

    def pullback(self, mapping, target_vars=CHART_VARS):
        """Pull back along ``variables[k] = mapping[k](target_vars)``."""
        out = [sp.Integer(0)] * len(target_vars)
        sub = dict(zip(self.variables, mapping))
        for a, phi in zip(self.coeffs, mapping):
            a_t = a.xreplace(sub)
            for j, t in enumerate(target_vars):
                out[j] += a_t * sp.diff(phi, t)
        return Form1(tuple(sp.simplify(c) for c in out), target_vars)

    def to_json(self):
        return [to_prefix(a) for a in self.coeffs]


class Coframe:
    """Triple ``(theta, omega, pi)`` of complex 1-forms on a 6-dimensional chart.

    Numerical evaluation works on complex points ``(z, w, p)``; the barred
    symbols take the conjugate values.
    """

    names = ("theta", "omega", "pi")

    def __init__(self, theta, omega, pi, variables=CHART_VARS, meta=None):
        self.forms = (theta, omega, pi)
        self.variables = variables
        self.meta = meta or {}
        self._num = None

    @property
    def theta(self):
        return self.forms[0]

    @property
    def omega(self):
        return self.forms[1]

    @property
    def pi(self):
        return self.forms[2]

    def _compile(self):
        if self._num is None:
            V = self.variables
            coeff = [f.coeffs for f in self.forms]
            dmat = [f.exterior_derivative() for f in self.forms]
            self._num = (sp.lambdify(V, coeff, "numpy"), sp.lambdify(V, dmat, "numpy"))
        return self._num

    def _args(self, point):
        a, b, c = (complex(x) for x in point)
        return (a, a.conjugate(), b, b.conjugate(), c, c.conjugate())

    def coefficients(self, point):
        """``(3, 6)`` complex coefficients at ``point = (z, w, p)``."""
        f, _ = self._compile()
        return np.array(f(*self._args(point)), dtype=complex)

    def derivatives(self, point):
        """``(3, 6, 6)`` antisymmetric matrices of ``d theta, d omega, d pi``."""
        _, g = self._compile()
        return np.array(g(*self._args(point)), dtype=complex)

    def basis_matrix(self, point):
        """Rows ``theta, omega, pi, conj(theta), conj(omega), conj(pi)`` on ``dx``."""
        c = self.coefficients(point)
        swap = [1, 0, 3, 2, 5, 4]
        cbar = np.conj(c[:, swap])
        return np.vstack([c, cbar])

    def wedge_volume(self, point):
        """Coefficient of ``dx_1 ^ ... ^ dx_6`` in ``theta ^ conj ^ ...`` (up to sign)."""
        return complex(np.linalg.det(self.basis_matrix(point)))

    def check_nondegenerate(self, points, tol=1e-12):
        for pt in points:
            if abs(self.wedge_volume(pt)) < tol:
                raise Degenerate(f"coframe wedge vanishes at {pt}")

    def to_json(self):
        return {"variables": [v.name for v in self.variables],
                "forms": {n: f.to_json() for n, f in zip(self.names, self.forms)},
                "meta": {k: (to_prefix(v) if isinstance(v, sp.Basic) else v) for k, v in self.meta.items()}}

    @classmethod
    def from_json(cls, obj):
        names = obj.get("variables", [v.name for v in CHART_VARS])
        variables = tuple(sp.Symbol(n) for n in names)
        forms = []
        for n in cls.names:
            forms.append(Form1(tuple(from_prefix(t, variables) for t in obj["forms"][n]), variables))
        return cls(*forms, variables=variables)
