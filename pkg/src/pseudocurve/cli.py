"""Command-line front end.

Exit status: 0 on success, 1 on malformed input, 2 on domain errors and 3 on
convergence failures.  Results go to ``--out`` (written atomically) or stdout.
"""
import os

# cap BLAS pools before numpy loads them
_THREADS = os.environ.get("PSEUDOCURVE_THREADS")
if _THREADS:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _THREADS)

import argparse  # noqa: E402
import json  # noqa: E402
import sys  # noqa: E402
import tempfile  # noqa: E402

import numpy as np  # noqa: E402

from . import congruence as cg  # noqa: E402
from . import darboux, invariants, solver, svg  # noqa: E402
from .chart import (CurveField, chart_from_json, fiber_congruence, fiber_elliptic_at,  # noqa: E402
                    linearize, PdePairLinearization, characteristic_form,
                    pde_pair_elliptic, residual)
from .errors import ConvergenceError, DomainError  # noqa: E402
from .forms import Coframe, from_prefix  # noqa: E402
from .grassmann import (PluckerPoint, TwoPlane, incidence, plane_of_plucker,  # noqa: E402
                        plucker_of_plane)
from .grid import DiskGrid  # noqa: E402

EXIT_OK, EXIT_MALFORMED, EXIT_DOMAIN, EXIT_CONVERGENCE = 0, 1, 2, 3

TOLERANCES = {
    "solve": 1e-10,
    "constraint": 1e-8,
    "path": 1e-6,
    "corrector": 1e-10,
}


class MalformedInput(Exception):
    """Input that does not parse; ``str`` carries a ``path:line:col`` prefix."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise MalformedInput(f"{self.prog}: {message}")


# ------------------------------------------------------------ input helpers


def _read_text(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise MalformedInput(f"{path}:0:0: {exc.strerror}") from exc


def _load_json(path):
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _schema(path, build, obj):
    """Run ``build(obj)``, turning schema errors into a located diagnostic."""
    try:
        return build(obj)
    except DomainError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise MalformedInput(f"{path}:1:1: does not match the expected schema ({exc!r})") from exc


def _vector(arg, size=None):
    """Inline comma list or a JSON file holding a list."""
    if arg is None:
        raise MalformedInput("missing vector argument")
    if os.path.exists(arg):
        vals = _load_json(arg)
    else:
        try:
            vals = [float(v) for v in arg.split(",")]
        except ValueError as exc:
            raise MalformedInput(f"<argument>:1:1: cannot parse vector {arg!r}") from exc
    arr = np.asarray(vals, float).ravel()
    if size is not None and arr.size not in np.atleast_1d(size):
        raise MalformedInput(f"<argument>:1:1: expected {size} components, got {arr.size}")
    return arr


def _complex(v):
    if isinstance(v, (list, tuple)):
        return complex(*v)
    return complex(v)


def _series(obj):
    return np.array([_complex(c) for c in obj], dtype=complex)


def _require(value, flag):
    if value is None:
        raise MalformedInput(f"missing required option {flag}")
    return value


def _load_congruence(path):
    return _schema(path, cg.congruence_from_json, _load_json(_require(path, "--congruence")))


def _load_chart(path):
    return _schema(path, chart_from_json, _load_json(_require(path, "--chart")))


def _load_plane(path):
    obj = _load_json(path)

    def build(o):
        if "basis" in o:
            return TwoPlane.from_json(o)
        return plane_of_plucker(PluckerPoint.from_json(o))
    return _schema(path, build, obj)


def _load_expr(path):
    obj = _load_json(_require(path, "--F"))
    return _schema(path, from_prefix, obj)


def _grid(args, default_radius, kind="polar"):
    radius = default_radius if args.radius is None else args.radius
    return DiskGrid(radius, args.n, kind)


# ------------------------------------------------------------ output helpers


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write(args, text):
    if args.out is None:
        sys.stdout.write(text)
        return
    target = os.path.abspath(args.out)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".pseudocurve-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format(args, allowed, default):
    fmt = args.format or default
    if fmt not in allowed:
        raise MalformedInput(f"format {fmt!r} not available for {args.command}; use one of {allowed}")
    return fmt


def _field_svg(field, title):
    g = field.grid
    wz = np.abs(field.w)
    s = g.nodes[g.mask]
    return svg.scatter_plot(s.real, s.imag, wz[g.mask], title, "Re sigma", "Im sigma")


# ------------------------------------------------------------ commands


def cmd_plucker(args):
    _format(args, ("json",), "json")
    plane = _load_plane(_require(args.plane and args.plane[0], "--plane"))
    return _dump_json(plucker_of_plane(plane).to_json())


def cmd_incidence(args):
    _format(args, ("json",), "json")
    if not args.plane or len(args.plane) != 2:
        raise MalformedInput("incidence needs exactly two --plane options")
    a, b = (plucker_of_plane(_load_plane(p)) for p in args.plane)
    return _dump_json({"incidence": incidence(a, b).value})


def cmd_elliptic_check(args):
    _format(args, ("json",), "json")
    x = _load_congruence(args.congruence)
    ok, margin = cg.is_elliptic(x)
    return _dump_json({"elliptic": bool(ok), "margin": float(margin)})


def cmd_osculate(args):
    _format(args, ("json",), "json")
    x = _load_congruence(args.congruence)
    v = _vector(args.vector, (3, 4))
    if v.size == 4:
        point, jv = cg.plane_through_vector(x, v)
        return _dump_json({"plane": point.to_json(), "Jv": jv})
    o = cg.osculating_structure(x, v / np.linalg.norm(v))
    return _dump_json({"frame": o.frame, "jP": o.jP, "jQ": o.jQ, "J": o.full_j()})


def cmd_real_points(args):
    fmt = _format(args, ("json", "csv", "svg"), "csv")
    x = _load_congruence(args.congruence)
    plane = _load_plane(_require(args.plane and args.plane[0], "--plane"))
    loop = cg.real_points_curve(x, plane, corrector_tol=args.tol["corrector"])
    Y = np.asarray(loop.samples)
    if fmt == "json":
        return _dump_json({"closed": loop.closed, "components": loop.components, "samples": Y})
    if fmt == "svg":
        den = 1.0 - Y[:, 2]
        return svg.line_plot(Y[:, 0] / den, Y[:, 1] / den, "real points (stereographic)",
                             "u", "v", equal=True)
    rows = ["Y1,Y2,Y3"] + [",".join(repr(float(c)) for c in s) for s in Y]
    return "\n".join(rows) + "\n"


def cmd_tame(args):
    _format(args, ("json",), "json")
    x = _load_congruence(args.congruence)
    t = cg.taming_form(x)
    vals = cg.evaluate_on_congruence(x, t.coefficients)
    out = t.to_json()
    out["min_value"] = float(vals.min())
    return _dump_json(out)


def cmd_deform(args):
    _format(args, ("json",), "json")
    x = _load_congruence(args.congruence)
    y = cg.deform(x, args.t)
    ok, margin = cg.is_elliptic(y)
    return _dump_json({"congruence": y.to_json(), "elliptic": bool(ok), "margin": float(margin)})


def cmd_pde_elliptic(args):
    _format(args, ("json",), "json")
    obj = _load_json(_require(args.data, "--data"))
    if "df1" in obj:
        lin = _schema(args.data, PdePairLinearization.from_json, obj)
    else:
        c = _load_chart(args.chart)
        lin = _schema(args.data, lambda o: linearize(c, _complex(o["z"]), _complex(o["w"]),
                                                     _complex(o["p"])), obj)
    return _dump_json({"elliptic": pde_pair_elliptic(lin), "form": list(characteristic_form(lin)),
                       "linearization": lin.to_json()})


def _base_point(path):
    obj = _load_json(_require(path, "--data"))
    return _schema(path, lambda o: (_complex(o.get("z0", 0)), _complex(o.get("w0", 0))), obj)


def cmd_fiber(args):
    _format(args, ("json",), "json")
    c = _load_chart(args.chart)
    z0, w0 = _base_point(args.data)
    fc = fiber_congruence(c, z0, w0)
    ok, margin = fiber_elliptic_at(c, z0, w0, 0.0)
    return _dump_json({"is_graph": bool(fc.is_graph), "patch_radius": float(fc.patch_radius),
                       "elliptic_at_p0": ok, "margin_at_p0": margin, "congruence": fc.to_json()})


def _load_field(path):
    text = _read_text(_require(path, "--data"))
    try:
        return CurveField.from_csv(text)
    except (ValueError, StopIteration, IndexError) as exc:
        raise MalformedInput(f"{path}:1:1: not a curve field CSV ({exc})") from exc


def cmd_residual(args):
    _format(args, ("json",), "json")
    c = _load_chart(args.chart)
    field = _load_field(args.data)
    return _dump_json({"residual": residual(c, field)})


def cmd_solve(args):
    fmt = _format(args, ("json", "csv", "svg"), "csv")
    c = _load_chart(args.chart)
    data = _schema(args.data, solver.HolomorphicData.from_json, _load_json(_require(args.data, "--data")))
    grid = _grid(args, 0.2)
    field = solver.solve_curve(c, data, grid, tol=args.tol["solve"])
    if fmt == "csv":
        return field.to_csv()
    deltas = list(field.history.deltas)
    if fmt == "svg":
        return svg.line_plot(np.arange(1, len(deltas) + 1), np.log10(np.maximum(deltas, 1e-300)),
                             "Picard convergence", "iteration", "log10 update")
    return _dump_json({"residual": field.residual, "iterations": len(deltas), "deltas": deltas,
                       "grid": grid.to_json()})


def _case3_inputs(args):
    obj = _load_json(_require(args.data, "--data"))
    return obj, _schema(args.data, lambda o: (_series(o.get("P", [0])), _complex(o.get("w0", 0))), obj)


def cmd_darboux_integrate(args):
    fmt = _format(args, ("json", "csv", "svg"), "csv")
    _, (P, w0) = _case3_inputs(args)
    grid = _grid(args, 0.5)
    field = darboux.case3_integrate(P, w0, grid, path_tol=args.tol["path"])
    if fmt == "csv":
        return field.to_csv()
    if fmt == "svg":
        return _field_svg(field, "|W| on the Z disk")
    return _dump_json({"residual": field.residual, "closure": darboux.case3_report(),
                       "grid": grid.to_json()})


def cmd_symmetry(args):
    fmt = _format(args, ("json", "csv", "svg"), "csv")
    obj, (P, w0) = _case3_inputs(args)
    f = _schema(args.data, lambda o: _series(o["f"]), obj)
    grid = _grid(args, 0.5)
    base = darboux.case3_integrate(P, w0, grid, path_tol=args.tol["path"])
    out = darboux.case3_symmetry(f, base)
    if fmt == "csv":
        return out.to_csv()
    if fmt == "svg":
        return _field_svg(out, "|W| after the shear")
    return _dump_json({"residual_before": base.residual, "residual_after": out.residual})


def _samples(args):
    return darboux.sample_points(seed=args.seed)


def cmd_coframe(args):
    _format(args, ("json",), "json")
    F = _load_expr(args.F)
    cf = darboux.case4_coframe(F, _samples(args), tol=args.tol["constraint"])
    return _dump_json(cf.to_json())


def cmd_dual_check(args):
    _format(args, ("json",), "json")
    F = _load_expr(args.F)
    return _dump_json({"misfit": darboux.duality_check(F, _samples(args))})


def cmd_structure_fit(args):
    fmt = _format(args, ("json", "csv"), "csv")
    if args.F is not None:
        cf = darboux.case4_coframe(_load_expr(args.F), _samples(args), tol=args.tol["constraint"])
    elif args.data is not None:
        cf = _schema(args.data, Coframe.from_json, _load_json(args.data))
    else:
        cf = darboux.flat_coframe()
    fit = darboux.structure_fit(cf, _samples(args))
    if fmt == "csv":
        return fit.to_csv()
    return _dump_json({"residual": fit.residual,
                       "max_abs": {n: fit.max_abs(n) for n in darboux.TORSION_NAMES}})


def cmd_invariants(args):
    fmt = _format(args, ("json", "csv", "svg"), "csv")
    x = _load_congruence(args.congruence)
    level = 2 if args.n is None else args.n
    samples = invariants.sample_invariants(x, level)
    if fmt == "csv":
        return invariants.samples_to_csv(samples)
    Y = np.array([s.y for s in samples])
    fvals = np.array([abs(s.fval) for s in samples])
    if fmt == "svg":
        den = 1.0 + Y[:, 2]
        return svg.scatter_plot(Y[:, 0] / den, Y[:, 1] / den, fvals, "|f| (stereographic)", "u", "v")
    return _dump_json({"max_f": float(fvals.max()),
                       "max_g": float(max(abs(s.gval) for s in samples)), "level": level})


def cmd_balance(args):
    _format(args, ("json",), "json")
    x = _load_congruence(args.congruence)
    level = cg.SAMPLE_LEVEL if args.n is None else args.n
    If, Ig = invariants.balance_integrals(x, level)
    return _dump_json({"If": If, "Ig": Ig})


COMMANDS = {
    "plucker": cmd_plucker,
    "incidence": cmd_incidence,
    "elliptic-check": cmd_elliptic_check,
    "osculate": cmd_osculate,
    "real-points": cmd_real_points,
    "tame": cmd_tame,
    "deform": cmd_deform,
    "pde-elliptic": cmd_pde_elliptic,
    "fiber": cmd_fiber,
    "residual": cmd_residual,
    "solve": cmd_solve,
    "darboux-integrate": cmd_darboux_integrate,
    "symmetry": cmd_symmetry,
    "coframe": cmd_coframe,
    "dual-check": cmd_dual_check,
    "structure-fit": cmd_structure_fit,
    "invariants": cmd_invariants,
    "balance": cmd_balance,
}


def build_parser():
    parser = _Parser(prog="pseudocurve", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--congruence", help="line congruence JSON")
    parser.add_argument("--chart", help="chart JSON (terms table or builtin name)")
    parser.add_argument("--data", help="command-specific data file (JSON or curve-field CSV)")
    parser.add_argument("--F", dest="F", help="expression JSON in prefix notation")
    parser.add_argument("--plane", action="append", help="plane JSON (basis or Klein point)")
    parser.add_argument("--vector", help="vector as a comma list or JSON file")
    parser.add_argument("--n", type=int, help="grid points per direction (icosphere level for invariants)")
    parser.add_argument("--radius", type=float, help="grid radius")
    parser.add_argument("--t", type=float, default=0.5, help="deformation parameter in [0, 1]")
    parser.add_argument("--seed", type=int, default=0, help="seed for sampled points")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv", "svg"))
    return parser


def parse_args(argv):
    """Parse ``argv``; ``--tol.<name> value`` (or ``--tol.<name>=value``) overrides tolerances."""
    tol = dict(TOLERANCES)
    rest = []
    it = iter(argv)
    for tok in it:
        if tok.startswith("--tol."):
            name, _, val = tok[len("--tol."):].partition("=")
            if not val:
                val = next(it, None)
            if name not in tol:
                raise MalformedInput(f"unknown tolerance {name!r}; known: {sorted(tol)}")
            try:
                value = float(val)
            except (TypeError, ValueError) as exc:
                raise MalformedInput(f"tolerance {name!r} needs a number") from exc
            if not value > 0:
                raise MalformedInput(f"tolerance {name!r} must be positive")
            tol[name] = value
        else:
            rest.append(tok)
    args = build_parser().parse_args(rest)
    args.tol = tol
    if args.n is None and args.command in ("solve", "darboux-integrate", "symmetry"):
        args.n = 64 if args.command == "solve" else 32
    return args


def run(argv=None):
    """Execute one command; returns the exit status."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        text = COMMANDS[args.command](args)
        _write(args, text)
    except MalformedInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except DomainError as exc:
        print(f"domain error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ConvergenceError as exc:
        print(f"convergence error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
