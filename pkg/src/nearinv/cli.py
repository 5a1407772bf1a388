"""Command-line front end: spec files, hypothesis checks, factorization runs, fixture goldens.

Exit codes are 0 on success, 1 on a mathematical failure (hypothesis, audit
or golden mismatch) and 2 on malformed input.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContainedInPhiH, HypothesisError, SpaceError
from .factorization import (DEFAULT_EPS, Factorization, branges_factorize,
                            check_nearly_invariant, check_norm_hypothesis,
                            default_m_max, defect_factorize, dense_coefficients,
                            hardy_vector_factorize, NORM_FLOOR)
from .fixtures import FIXTURES, theta_half
from .operators import shift_matrices
from .series import InnerFunction, TruncatedSeries, unimodular_ratio
from .spaces import (MEMBERSHIP_TOL, AmbientSpace, ContractiveSpace, DefectSpace,
                     SumSpace, as_sum_space)

SCHEMA = 1
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


# -- spec files ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LoadedSpec:
    """One space, optional defect space, and one inner function, validated."""

    space: ContractiveSpace
    phi: InnerFunction
    defect: DefectSpace | None = None
    name: str = ""

    @property
    def working(self):
        return SumSpace(self.space, self.defect) if self.defect is not None else self.space


def _complex(v, path: str) -> complex:
    if isinstance(v, bool):
        raise SpaceError("expected a number or [re, im]", path)
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(v[0], v[1])
    raise SpaceError("expected a number or [re, im]", path)


def _encode(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _field(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise SpaceError("expected an object", path)
    if key not in obj:
        raise SpaceError("missing field", f"{path}.{key}" if path else key)
    return obj[key]


def _int(v, path: str, lo: int) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise SpaceError(f"expected an integer >= {lo}", path)
    return v


def _matrix(v, path: str) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise SpaceError("expected a non-empty list of rows", path)
    width = len(v[0])
    rows = []
    for i, row in enumerate(v):
        if len(row) != width:
            raise SpaceError(f"row has {len(row)} entries, expected {width}", f"{path}[{i}]")
        rows.append([_complex(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)])
    return np.array(rows, dtype=complex)


def _series(v, ambient: AmbientSpace, path: str) -> TruncatedSeries:
    """Coefficient rows ``A_0, A_1, ...``; a row is a complex (n = 1) or a list of n complexes."""
    if not isinstance(v, list) or not v:
        raise SpaceError("expected a non-empty list of coefficient rows", path)
    if len(v) > ambient.degree + 1:
        raise SpaceError(f"{len(v)} rows exceed degree {ambient.degree}", path)
    c = np.zeros((ambient.degree + 1, ambient.n), dtype=complex)
    for m, row in enumerate(v):
        p = f"{path}[{m}]"
        if ambient.n == 1:
            c[m, 0] = _complex(row, p)
        else:
            if not isinstance(row, list) or len(row) != ambient.n:
                raise SpaceError(f"expected {ambient.n} components", p)
            c[m] = [_complex(x, f"{p}[{j}]") for j, x in enumerate(row)]
    return TruncatedSeries(c)


def _series_rows(f: TruncatedSeries) -> list:
    nz = np.flatnonzero(np.any(f.coeffs != 0, axis=1))
    last = int(nz[-1]) if nz.size else 0
    rows = f.coeffs[: last + 1]
    if f.n == 1:
        return [_encode(a) for a in rows[:, 0]]
    return [[_encode(a) for a in row] for row in rows]


def parse_ambient(obj) -> AmbientSpace:
    kind = _field(obj, "kind", "ambient")
    n = _int(obj.get("components", 1), "ambient.components", 1)
    D = _int(_field(obj, "degree", "ambient"), "ambient.degree", 0)
    if kind == "hardy":
        return AmbientSpace.hardy(D, n)
    if kind == "dirichlet_alpha":
        alpha = _field(obj, "alpha", "ambient")
        if isinstance(alpha, bool) or not isinstance(alpha, (int, float)):
            raise SpaceError("expected a real number", "ambient.alpha")
        return AmbientSpace.dirichlet(float(alpha), D, n)
    if kind == "custom":
        w = _field(obj, "weights", "ambient")
        if not isinstance(w, list) or not all(isinstance(x, (int, float)) for x in w):
            raise SpaceError("expected a list of reals", "ambient.weights")
        return AmbientSpace(n, D, np.array(w, dtype=float), "custom")
    raise SpaceError(f"unknown kind {kind!r} (hardy, dirichlet_alpha, custom)", "ambient.kind")


def parse_inner(obj) -> InnerFunction:
    zeros = _field(obj, "zeros", "inner")
    if not isinstance(zeros, list):
        raise SpaceError("expected a list", "inner.zeros")
    zs = [_complex(a, f"inner.zeros[{i}]") for i, a in enumerate(zeros)]
    for i, a in enumerate(zs):
        if not abs(a) < 1:
            raise SpaceError(f"zero {a} is not inside the unit disc", f"inner.zeros[{i}]")
    phase = _complex(obj.get("phase", 1.0), "inner.phase")
    if abs(abs(phase) - 1) > 1e-14:
        raise SpaceError("phase must be unimodular", "inner.phase")
    return InnerFunction(tuple(zs), phase)


def parse_spec(obj: dict) -> LoadedSpec:
    """Validate a spec object; every failure is a :class:`SpaceError` naming the field."""
    if not isinstance(obj, dict):
        raise SpaceError("spec must be a JSON object", "$")
    H = parse_ambient(_field(obj, "ambient", ""))
    sp = _field(obj, "space", "")
    raw = _field(sp, "basis", "space")
    if not isinstance(raw, list) or not raw:
        raise SpaceError("expected a non-empty list", "space.basis")
    basis = [_series(b, H, f"space.basis[{i}]") for i, b in enumerate(raw)]
    metric = _field(sp, "metric", "space")
    if not isinstance(metric, dict) or len(set(metric) & {"gram", "injection"}) != 1:
        raise SpaceError("give exactly one of 'gram' or 'injection'", "space.metric")
    if "gram" in metric:
        M = ContractiveSpace.from_gram(H, basis, _matrix(metric["gram"], "space.metric.gram"))
    else:
        U = _matrix(metric["injection"], "space.metric.injection")
        M = ContractiveSpace.from_injection(H, basis, U)
    F = None
    if obj.get("defect") is not None:
        draw = _field(obj["defect"], "basis", "defect")
        if not isinstance(draw, list):
            raise SpaceError("expected a list", "defect.basis")
        F = DefectSpace(H, [_series(b, H, f"defect.basis[{i}]") for i, b in enumerate(draw)])
        SumSpace(M, F)
    phi = parse_inner(_field(obj, "inner", ""))
    return LoadedSpec(M, phi, F, str(obj.get("name", "")))


def load_spec(path) -> LoadedSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpaceError(f"cannot read spec: {exc.strerror}", str(path)) from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpaceError(f"invalid JSON at line {exc.lineno}: {exc.msg}", str(path)) from None
    return parse_spec(obj)


def dump_spec(spec: LoadedSpec) -> dict:
    """Inverse of :func:`parse_spec` (coefficient-exact round trip)."""
    M, H = spec.space, spec.space.ambient
    amb = {"kind": H.kind, "components": H.n, "degree": H.degree}
    if H.kind == "dirichlet_alpha":
        amb["alpha"] = H.alpha
    elif H.kind == "custom":
        amb["weights"] = H.weights.tolist()
    if M.injection is not None:
        metric = {"injection": [[_encode(x) for x in row] for row in M.injection]}
    else:
        metric = {"gram": [[_encode(x) for x in row] for row in M.gram]}
    out = {"ambient": amb,
           "space": {"basis": [_series_rows(b) for b in M.basis], "metric": metric},
           "inner": spec.phi.to_json()}
    if spec.name:
        out = {"name": spec.name, **out}
    if spec.defect is not None:
        out["defect"] = {"basis": [_series_rows(b) for b in spec.defect.input_basis]}
    return out


# -- reports ---------------------------------------------------------------------------------


def _json_float(x: float):
    return None if not math.isfinite(x) else float(x)


def _cvec(a) -> list:
    return [_encode(x) for x in np.ravel(a)]


def check_report(spec: LoadedSpec, tol: float) -> dict:
    S = as_sum_space(spec.working)
    cert = check_nearly_invariant(S, spec.phi, tol)
    ratio = check_norm_hypothesis(S, spec.phi) if cert.passed else float("nan")
    near = {"passed": cert.passed, "intersection_dim": cert.intersection_dim,
            "residuals": cert.residuals.tolist(), "tol": tol}
    if cert.witness is not None:
        near["witness"] = _series_rows(cert.witness)
        if cert.quotient is not None:
            near["witness_quotient"] = _series_rows(cert.quotient)
    norm_ok = cert.passed and ratio >= NORM_FLOOR
    return {"nearly_invariant": near,
            "norm_ratio": _json_float(ratio),
            "norm_ratio_vacuous": bool(ratio == float("inf")),
            "norm_floor": NORM_FLOOR,
            "containment_margin": float(spec.space.containment_margin),
            "passed": bool(cert.passed and norm_ok)}


def run_factorization(spec: LoadedSpec, m_max: int | None, eps: float) -> Factorization:
    H = spec.space.ambient
    if spec.defect is not None:
        return defect_factorize(spec.space, spec.defect, spec.phi, m_max, eps)
    if spec.phi.is_z() and H.kind == "hardy":
        return hardy_vector_factorize(spec.space, m_max, eps)
    return branges_factorize(spec.space, spec.phi, m_max, eps)


def factorization_report(fact: Factorization) -> dict:
    elements = []
    for j, rep in enumerate(fact.reports):
        elements.append({
            "index": j, "h_norm_sq": rep.h_norm_sq, "f_norm_sq": rep.f_norm_sq,
            "t_norm_sq": rep.t_norm_sq, "gap": rep.h_norm_sq - rep.f_norm_sq - rep.t_norm_sq,
            "steps": rep.steps, "converged": rep.iteration.converged,
            "tail_norm": rep.tail_norm,
            "identity_residual": rep.iteration.max_identity_residual(),
            "reconstruction_residual": rep.reconstruction_residual,
            "invariance_residual": float(fact.invariance_residuals[j]),
            "extraction_residual": float(fact.extraction_residuals[j]),
            "coeffs_c": [_cvec(row) for row in rep.coeffs_c],
            "coeffs_d": [_cvec(row) for row in rep.coeffs_d],
        })
    return {"kind": fact.kind, "branch": fact.branch, "r": fact.r, "p": fact.p,
            "norm_ratio": _json_float(fact.norm_ratio),
            "g_basis": [_series_rows(g) for g in fact.g_basis],
            "defect_basis": [_series_rows(e) for e in fact.defect_basis],
            "elements": elements, "verdict": fact.verdict()}


def _write_json(obj: dict, path: str | None):
    if path:
        Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(x: float) -> str:
    return "inf" if x == float("inf") else f"{x:.12g}"


# -- commands --------------------------------------------------------------------------------


def cmd_check(args) -> int:
    spec = load_spec(args.spec)
    rep = check_report(spec, args.tol)
    near = rep["nearly_invariant"]
    print(f"nearly invariant: {'pass' if near['passed'] else 'FAIL'} "
          f"(dim M cap phiH = {near['intersection_dim']}, tol {args.tol:g})")
    if not near["passed"]:
        print(f"  witness h = {_poly_text(near['witness'])}")
        if "witness_quotient" in near:
            print(f"  h / phi   = {_poly_text(near['witness_quotient'])}")
    else:
        ratio = rep["norm_ratio"]
        ratio = float("inf") if rep["norm_ratio_vacuous"] else ratio
        print(f"norm ratio min ||phi h||^2/||h||^2 = {_fmt(ratio)} "
              f"({'pass' if rep['passed'] else 'FAIL'}, floor {NORM_FLOOR:.10f})")
    _write_json({"schema": SCHEMA, "command": "check", "spec": str(args.spec), **rep}, args.json)
    return EXIT_OK if rep["passed"] else EXIT_FAIL


def _poly_text(rows) -> str:
    terms = []
    for k, c in enumerate(rows):
        if isinstance(c[0], list):
            terms.append(f"{[complex(*x) for x in c]} z^{k}")
            continue
        z = complex(*c)
        if abs(z) > 1e-14:
            coef = f"{z.real:.6g}" if abs(z.imag) < 1e-14 else f"({z.real:.6g}{z.imag:+.6g}j)"
            terms.append(coef if k == 0 else f"{coef} z^{k}")
    return " + ".join(terms) or "0"


def cmd_factorize(args) -> int:
    spec = load_spec(args.spec)
    m_max = args.m_max if args.m_max is not None else default_m_max(spec.space.ambient.degree)
    try:
        fact = run_factorization(spec, m_max, args.eps)
    except ContainedInPhiH as exc:
        print(f"FAIL (M inside phi*H): {exc}")
        _write_json({"schema": SCHEMA, "command": "factorize", "passed": False,
                     "failure": "contained_in_phiH", "message": str(exc)}, args.json)
        return EXIT_FAIL
    except HypothesisError as exc:
        print(f"FAIL (hypothesis): {exc}")
        _write_json({"schema": SCHEMA, "command": "factorize", "passed": False,
                     "failure": "hypothesis", "message": str(exc)}, args.json)
        return EXIT_FAIL
    rep = factorization_report(fact)
    print(f"{fact.kind} factorization, branch {fact.branch}: r = {fact.r}, p = {fact.p}, "
          f"norm ratio {_fmt(fact.norm_ratio)}")
    for el in rep["elements"]:
        print(f"  h[{el['index']}]: ||h||_M^2 = {_fmt(el['h_norm_sq'])}  "
              f"||f||^2 = {_fmt(el['f_norm_sq'])}  ||t||^2 = {_fmt(el['t_norm_sq'])}  "
              f"steps {el['steps']}  recon {el['reconstruction_residual']:.1e}  "
              f"audit {el['invariance_residual']:.1e}")
    verdict = rep["verdict"]
    failed = [k for k, v in verdict.items() if k != "passed" and not v]
    print("verdict: pass" if verdict["passed"] else f"verdict: FAIL ({', '.join(failed)})")
    _write_json({"schema": SCHEMA, "command": "factorize", "spec": str(args.spec),
                 "tolerances": {"eps": args.eps, "m_max": m_max, "membership": MEMBERSHIP_TOL},
                 "factorization": rep, "passed": verdict["passed"]}, args.json)
    return EXIT_OK if verdict["passed"] else EXIT_FAIL


# -- fixture goldens -----------------------------------------------------------------------


@dataclass(frozen=True)
class Golden:
    quantity: str
    expected: float | str
    computed: float | str
    tol: float | None

    @property
    def ok(self) -> bool:
        if self.tol is None:
            return self.expected == self.computed
        return abs(float(self.computed) - float(self.expected)) <= self.tol


def _oracle_gap(fact: Factorization) -> float:
    D = fact.space.ambient.degree
    worst = 0.0
    for rep in fact.reports:
        levels = min(rep.coeffs_c.shape[1], D + 1)
        c, d = dense_coefficients(fact.g_basis, fact.defect_basis, fact.phi, rep.h, levels)
        worst = max(worst, float(np.max(np.abs(c - rep.coeffs_c[:, :levels]), initial=0.0)),
                    float(np.max(np.abs(d - rep.coeffs_d[:, : levels - 1]), initial=0.0)))
    return worst


def _common_rows(fact: Factorization) -> list[Golden]:
    v = fact.verdict()
    return [Golden("factorization audits pass", "True", str(v["passed"]), None),
            Golden("dense least-squares oracle gap", 0.0, _oracle_gap(fact), 1e-8),
            Golden("max T_phi* audit residual", 0.0, float(fact.invariance_residuals.max()), 1e-8)]


def goldens_eh1() -> list[Golden]:
    fx = FIXTURES["eh1"]()
    M = fx.space
    D = M.ambient.degree
    one_z, z_z2 = np.array([1, 0]), np.array([0, 1])
    _, back = shift_matrices(M.ambient)
    bz = back(M.element(z_z2))
    fact = hardy_vector_factorize(M)
    g = fact.g_basis[0]
    reference = TruncatedSeries.scalar(np.array([-2, -1, 1]) / (2 * np.sqrt(2)), D)
    u = unimodular_ratio(reference, g)
    rep = fact.reports[0]
    c = rep.coeffs_c[0, :13]
    law = float(np.max(np.abs(c - np.sqrt(2) * 2.0 ** -np.arange(13))))
    return [
        Golden("||1+z||_M^2", 3.0, M.norm(one_z) ** 2, 1e-12),
        Golden("||z+z^2||_M^2", 4.0, M.norm(z_z2) ** 2, 1e-12),
        Golden("||z+z^2||_M", 2.0, M.norm(z_z2), 1e-12),
        Golden("||S*(z+z^2)||_M", math.sqrt(3), M.norm(M.to_coords(bz)), 1e-12),
        Golden("||g||_M", 1.0, M.norm(fact.g_coords[:, 0]), 1e-12),
        Golden("|<g, z+z^2>_M|", 0.0, abs(M.inner(fact.g_coords[:, 0], z_z2)), 1e-12),
        Golden("g vs (z-2)(z+1)/(2 sqrt2), up to phase", 0.0,
               float(np.max(np.abs((reference - g * u).window()))), 1e-12),
        Golden("||f||^2 for h = 1+z", 8 / 3, rep.f_norm_sq, 1e-10),
        Golden("gap ||h||_M^2 - ||f||^2", 1 / 3, rep.h_norm_sq - rep.f_norm_sq, 1e-10),
        Golden("norm ratio", 4 / 3, fact.norm_ratio, 1e-12),
        Golden("max |c_k - sqrt2 2^-k|, k <= 12", 0.0, law, 1e-10),
    ] + _common_rows(fact)


def goldens_eh2() -> list[Golden]:
    fx = FIXTURES["eh2"]()
    D = fx.space.ambient.degree
    fact = hardy_vector_factorize(fx.space)
    th = theta_half().taylor(D)
    g = fact.g_basis[0]
    u = unimodular_ratio(th, g)
    rows = [Golden("r", 1.0, float(fact.r), 0),
            Golden("g vs theta, up to phase", 0.0, float(np.max(np.abs((th - g * u).window()))),
                   1e-9)]
    for k, rep in enumerate(fact.reports):
        f = rep.f_series[0].coeffs[:, 0] * np.conj(u)
        target = np.zeros(D + 1)
        target[k] = 1
        rows.append(Golden(f"||theta z^{k}||_M^2", float(k + 1), rep.h_norm_sq, 1e-9))
        rows.append(Golden(f"||f||^2 for h = theta z^{k}", 1.0, rep.f_norm_sq, 1e-9))
        rows.append(Golden(f"f vs z^{k}", 0.0, float(np.max(np.abs(f - target))), 1e-9))
        if k >= 1:
            rows.append(Golden(f"strict drop for k = {k}", "True",
                               str(rep.h_norm_sq - rep.f_norm_sq > 1e-9), None))
    return rows + _common_rows(fact)


def goldens_dirichlet() -> list[Golden]:
    fx = FIXTURES["dirichlet-alpha"]()
    fact = branges_factorize(fx.space, fx.phi)
    return [Golden("r (= number of zeros of z^2)", 2.0, float(fact.r), 0),
            Golden("nearly invariant", "True", str(fact.certificate.passed), None),
            Golden("norm ratio >= 1", "True", str(fact.norm_ratio >= NORM_FLOOR), None),
            Golden("max reconstruction residual", 0.0,
                   max(r.reconstruction_residual for r in fact.reports), 1e-9),
            ] + _common_rows(fact)


def goldens_defect() -> list[Golden]:
    fx = FIXTURES["defect-basic"]()
    fact = defect_factorize(fx.space, fx.defect, fx.phi)
    rep = fact.reports[0]
    t = rep.t_series[0].coeffs[:, 0]
    target = np.zeros_like(t)
    target[0] = 1
    return [Golden("branch", "contained", fact.branch, None),
            Golden("r", 0.0, float(fact.r), 0),
            Golden("t vs 1 for h = z", 0.0, float(np.max(np.abs(t - target))), 1e-12),
            Golden("||h||_M", 1.0, math.sqrt(rep.h_norm_sq), 1e-12),
            Golden("||t||", 1.0, math.sqrt(rep.t_norm_sq), 1e-12),
            Golden("(+)-norm ratio", 1.0, fact.norm_ratio, 1e-12),
            ] + _common_rows(fact)


GOLDENS = {"eh1": goldens_eh1, "eh2": goldens_eh2, "dirichlet-alpha": goldens_dirichlet,
           "defect-basic": goldens_defect}


def _cell(x) -> str:
    return x if isinstance(x, str) else f"{x:.12g}"


def cmd_reproduce(args) -> int:
    rows = GOLDENS[args.fixture]()
    width = max(len(r.quantity) for r in rows)
    print(f"{'quantity':<{width}}  {'expected':>20}  {'computed':>22}  status")
    for r in rows:
        print(f"{r.quantity:<{width}}  {_cell(r.expected):>20}  {_cell(r.computed):>22}  "
              f"{'ok' if r.ok else 'MISMATCH'}")
    bad = [r for r in rows if not r.ok]
    print(f"{len(rows) - len(bad)}/{len(rows)} goldens match")
    _write_json({"schema": SCHEMA, "command": "reproduce", "fixture": args.fixture,
                 "goldens": [{"quantity": r.quantity, "expected": r.expected,
                              "computed": r.computed, "tol": r.tol, "ok": r.ok} for r in rows],
                 "passed": not bad}, args.json)
    return EXIT_OK if not bad else EXIT_FAIL


# -- entry point -------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nearinv", description="Factor nearly invariant contractively contained "
                                            "spaces at finite truncation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    c = sub.add_parser("check", help="test near invariance and the norm hypothesis")
    c.add_argument("spec", help="space spec JSON file")
    c.add_argument("--tol", type=float, default=MEMBERSHIP_TOL, help="membership tolerance")
    c.add_argument("--json", metavar="PATH", help="also write a JSON report")
    c.set_defaults(func=cmd_check)
    f = sub.add_parser("factorize", help="factor every basis element of the space")
    f.add_argument("spec", help="space spec JSON file")
    f.add_argument("--m-max", type=int, default=None, help="iteration cap (default 4(D+1))")
    f.add_argument("--eps", type=float, default=DEFAULT_EPS, help="relative tail tolerance")
    f.add_argument("--json", metavar="PATH", help="write the JSON report here")
    f.set_defaults(func=cmd_factorize)
    r = sub.add_parser("reproduce", help="rebuild a worked example and compare its goldens")
    r.add_argument("fixture", choices=sorted(GOLDENS))
    r.add_argument("--json", metavar="PATH", help="also write a JSON report")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpaceError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
