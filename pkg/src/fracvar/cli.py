"""``fracvar`` command-line interface.

Exit codes: 0 pass, 1 numeric failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from fracvar.cases import CASE_IDS, Case, get_case
from fracvar.cdsolve import (
    CDCoefficients,
    SolverError,
    _workers,
    cd_lagrangian,
    convergence_study,
    equivalence_check,
    reference_solve,
    variational_solve,
)
from fracvar.domain import (
    BoxDomain,
    Rule,
    SpaceTimeField,
    read_field_csv,
    spacetime_weights,
    write_field_csv,
)
from fracvar.frac1d import FracOrder, Scheme, TimeGrid
from fracvar.lemmas import ladder, run_suite
from fracvar.report import _jsonable
from fracvar.varcalc import AsymmetricState, gradient_check

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
QUADRATIC_EPS = 1.0e-2


class ConfigError(ValueError):
    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"config field {field!r}: {message}" if field else message)
        self.field = field


# {{{ config

@dataclass(frozen=True, eq=False)
class CaseConfig:
    raw: dict[str, Any]
    alpha: float
    tgrid: TimeGrid
    domain: BoxDomain
    coefficients: CDCoefficients
    scheme: Scheme
    exact: Callable[..., np.ndarray] | None
    outputs: dict[str, str]

    def as_case(self) -> Case:
        return Case("config", self.coefficients, self.exact, "from config",
                    T=self.tgrid.b, t0=self.tgrid.a,
                    lo=self.domain.lo, hi=self.domain.hi)


def _get(obj: dict[str, Any], key: str, path: str, default: Any = ...) -> Any:
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    if key not in obj:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "missing")
        return default
    return obj[key]


def _number(value: Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    return float(value)


def _vector(value: Any, field: str) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(field, "expected a non-empty list of numbers")
    return [_number(v, f"{field}[{i}]") for i, v in enumerate(value)]


def _named_case(spec: Any, field: str) -> Case:
    case_id = _get(spec, "id", field)
    if case_id not in CASE_IDS:
        raise ConfigError(f"{field}.id", f"unknown case {case_id!r}; known: {', '.join(CASE_IDS)}")
    return get_case(case_id)


def _source(spec: Any, dim: int, field: str):
    kind = _get(spec, "kind", field)
    if kind == "zero":
        return None
    if kind == "constant":
        value = _number(_get(spec, "value", field), f"{field}.value")
        return lambda t, *x: np.full(np.shape(t), value)
    if kind == "named":
        case = _named_case(spec, field)
        if case.dim != dim:
            raise ConfigError(f"{field}.id", f"case {case.id!r} is {case.dim}-dimensional")
        return case.coefficients.source if field == "source" else case.coefficients.u0
    raise ConfigError(f"{field}.kind", f"expected zero, constant or named, got {kind!r}")


def _initial(spec: Any, dim: int):
    kind = _get(spec, "kind", "u0")
    if kind == "constant":
        value = _number(_get(spec, "value", "u0"), "u0.value")
        return lambda *x: np.full(np.shape(x[0]), value)
    return _source(spec, dim, "u0")


def parse_config(raw: Any) -> CaseConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", "top level must be an object")
    try:
        alpha = FracOrder(_number(raw.get("alpha", 0.5), "alpha")).alpha
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("alpha", str(exc)) from None

    tspec = _get(raw, "time", "")
    try:
        n_t = _get(tspec, "n", "time")
        if not isinstance(n_t, int) or isinstance(n_t, bool):
            raise ConfigError("time.n", "expected an integer")
        tgrid = TimeGrid(_number(_get(tspec, "a", "time"), "time.a"),
                         _number(_get(tspec, "b", "time"), "time.b"), n_t)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("time", str(exc)) from None

    bspec = _get(raw, "box", "")
    lo = _vector(_get(bspec, "lo", "box"), "box.lo")
    hi = _vector(_get(bspec, "hi", "box"), "box.hi")
    ns = _get(bspec, "n", "box")
    if not isinstance(ns, list) or not all(isinstance(m, int) and not isinstance(m, bool)
                                          for m in ns):
        raise ConfigError("box.n", "expected a list of integers")
    try:
        domain = BoxDomain(tuple(lo), tuple(hi), tuple(ns))
    except ValueError as exc:
        raise ConfigError("box", str(exc)) from None
    dim = domain.dim

    cspec = _get(raw, "coefficients", "")
    gamma = _vector(_get(cspec, "gamma", "coefficients"), "coefficients.gamma")
    if len(gamma) != dim:
        raise ConfigError("coefficients.gamma", f"expected {dim} entries")
    K = _get(cspec, "K", "coefficients")
    if not isinstance(K, list) or len(K) != dim:
        raise ConfigError("coefficients.K", f"expected a {dim}x{dim} matrix")
    K = [_vector(row, f"coefficients.K[{i}]") for i, row in enumerate(K)]
    if any(len(row) != dim for row in K):
        raise ConfigError("coefficients.K", f"expected a {dim}x{dim} matrix")
    beta = _number(_get(cspec, "beta", "coefficients", 0.0), "coefficients.beta")

    source = _source(_get(raw, "source", "", {"kind": "zero"}), dim, "source")
    u0 = _initial(_get(raw, "u0", "", {"kind": "zero"}), dim)
    try:
        coefficients = CDCoefficients(gamma, K, beta, source, u0)
    except ValueError as exc:
        text = str(exc)
        name = next((k for k in ("gamma", "K", "beta") if text.startswith(k)), "")
        raise ConfigError(f"coefficients.{name}" if name else "coefficients", text) from None

    scheme_text = raw.get("scheme", "GL")
    try:
        scheme = Scheme(scheme_text)
        if scheme not in (Scheme.L1, Scheme.GL):
            raise ValueError
    except ValueError:
        raise ConfigError("scheme", f"expected L1 or GL, got {scheme_text!r}") from None

    exact = None
    espec = raw.get("exact")
    if espec is None and isinstance(raw.get("source"), dict) \
            and raw["source"].get("kind") == "named":
        exact = get_case(raw["source"]["id"]).exact
    elif espec is not None:
        if _get(espec, "kind", "exact") != "named":
            raise ConfigError("exact.kind", "only named exact solutions are supported")
        exact = _named_case(espec, "exact").exact

    outputs = raw.get("outputs", {})
    if not isinstance(outputs, dict) or not all(isinstance(v, str) for v in outputs.values()):
        raise ConfigError("outputs", "expected an object of paths")
    return CaseConfig(raw, alpha, tgrid, domain, coefficients, scheme, exact, dict(outputs))


def load_config(path: str | Path) -> CaseConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(raw)


# }}}


# {{{ commands

def _emit(report: dict[str, Any], out: str | None) -> None:
    text = json.dumps(_jsonable(report), indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    print(text)


def cmd_lemmas(args: argparse.Namespace) -> int:
    FracOrder(args.alpha)
    start = time.perf_counter()
    report = run_suite(args.alpha, args.n, args.dim)
    report["seconds"] = time.perf_counter() - start
    _emit(report, args.out)
    # checks short of refinement levels are reported, not counted as failures
    failed = [c for c in report["checks"] if not c["passed"]
              and c["details"].get("status") != "insufficient levels"]
    return EXIT_FAIL if failed else EXIT_PASS


def cmd_elcheck(args: argparse.Namespace) -> int:
    if args.directions < 1:
        raise ConfigError("--directions", "must be at least 1")
    cfg = load_config(args.config)
    rng = np.random.default_rng(args.seed)
    tg, dom = cfg.tgrid, cfg.domain
    shape = (tg.n + 1, *dom.shape)
    u_plus = SpaceTimeField(tg, dom, rng.standard_normal(shape))
    u_minus = SpaceTimeField(tg, dom, rng.standard_normal(shape))
    L = cd_lagrangian(cfg.coefficients)
    # the CD action is quadratic: central differences are exact for any step,
    # so a larger step only reduces roundoff
    grad = gradient_check(L, AsymmetricState(u_plus, u_minus), cfg.alpha, cfg.scheme,
                          n_directions=args.directions, seed=args.seed, eps=QUADRATIC_EPS)
    report: dict[str, Any] = {"config": cfg.raw, "seed": args.seed,
                              "gradient_check": grad.to_dict()}
    passed = grad.passed
    if cfg.exact is not None:
        levels = ladder(min(tg.n, *dom.n))
        equiv = equivalence_check(cfg.as_case(), levels)
        report["equivalence"] = equiv.to_dict()
        passed = passed and equiv.passed
    else:
        report["equivalence"] = "skipped: no exact solution"
    report["pass"] = passed
    _emit(report, args.out)
    return EXIT_PASS if passed else EXIT_FAIL


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    out = args.out or cfg.outputs.get("field")
    if not out:
        raise ConfigError("outputs.field", "no output path (use --out)")
    if args.solver == "variational":
        result = variational_solve(cfg.coefficients, cfg.tgrid, cfg.domain, cfg.alpha, cfg.scheme)
    else:
        result = reference_solve(cfg.coefficients, cfg.tgrid, cfg.domain, args.theta,
                                 args.convection)
    write_field_csv(result.u, out)
    sidecar = {
        "config": cfg.raw, "field": str(out), "scheme": result.scheme,
        "grid": {"time": {"a": cfg.tgrid.a, "b": cfg.tgrid.b, "n": cfg.tgrid.n},
                 "box": {"lo": list(cfg.domain.lo), "hi": list(cfg.domain.hi),
                         "n": list(cfg.domain.n)}},
        "diagnostics": result.diagnostics,
    }
    Path(str(out) + ".json").write_text(json.dumps(_jsonable(sidecar), indent=2) + "\n",
                                        encoding="utf-8")
    print(f"wrote {out}")
    return EXIT_PASS


def field_distance(a: SpaceTimeField, b: SpaceTimeField, norm: str) -> float:
    diff = a.values - b.values
    if norm == "linf":
        return float(np.max(np.abs(diff)))
    w = spacetime_weights(a.tgrid, a.domain, Rule.TRAPEZOID, Rule.TRAPEZOID)
    return float(np.sqrt(np.sum(w * diff ** 2)))


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        a = read_field_csv(args.field_a)
        b = read_field_csv(args.field_b)
    except OSError as exc:
        raise ConfigError("", f"cannot read field: {exc}") from None
    if not a.same_grid(b):
        raise ConfigError("", "fields live on different grids")
    dist = field_distance(a, b, args.norm)
    print(f"{args.norm} {dist:.17g}")
    return EXIT_PASS if dist <= args.tol else EXIT_FAIL


def cmd_converge(args: argparse.Namespace) -> int:
    levels = args.levels
    if len(levels) < 3:
        raise ConfigError("--levels", "a convergence study needs at least 3 levels")
    if any(m < 3 for m in levels):
        raise ConfigError("--levels", "levels must be at least 3")
    if args.case in CASE_IDS:
        case, resolved = get_case(args.case), {"case": args.case}
    else:
        cfg = load_config(args.case)
        case, resolved = cfg.as_case(), cfg.raw
    if case.exact is None:
        raise ConfigError("exact", "convergence needs an exact solution")
    report = convergence_study(case, levels, args.solver, args.theta).to_dict()
    report["config"] = resolved
    _emit(report, args.out)
    return EXIT_PASS if report["passed"] else EXIT_FAIL


# }}}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracvar",
                                     description="Asymmetric fractional variational calculus")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lemmas", help="run the fractional-calculus lemma suite")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--n", type=int, default=2048)
    p.add_argument("--dim", type=int, choices=(1, 2), default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lemmas)

    p = sub.add_parser("elcheck", help="gradient and equivalence checks for a case")
    p.add_argument("config")
    p.add_argument("--directions", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_elcheck)

    p = sub.add_parser("solve", help="solve a case and write the field as CSV")
    p.add_argument("config")
    p.add_argument("--solver", choices=("variational", "reference"), default="variational")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--convection", choices=("upwind", "centered"), default="upwind")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="distance between two field CSV files")
    p.add_argument("field_a")
    p.add_argument("field_b")
    p.add_argument("--norm", choices=("l2", "linf"), default="l2")
    p.add_argument("--tol", type=float, default=1.0e-10)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("converge", help="convergence study for a case id or config")
    p.add_argument("case")
    p.add_argument("--levels", type=int, nargs="+", default=[32, 64, 128, 256])
    p.add_argument("--solver", choices=("variational", "reference"), default="variational")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_converge)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _workers()
        return args.func(args)
    except SolverError as exc:
        print(f"fracvar: solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ConfigError, ValueError) as exc:
        print(f"fracvar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
