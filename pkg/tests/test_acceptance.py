"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line; run with
``pytest tests/test_acceptance.py -s`` to see them.
"""
from pathlib import Path

import numpy as np
import pytest

from nearinv.cli import load_spec, main
from nearinv.errors import SpaceError
from nearinv.factorization import (branges_factorize, check_nearly_invariant, defect_factorize,
                                   dense_coefficients, hardy_vector_factorize, kernel_bound)
from nearinv.fixtures import (FIXTURES, eh1_space, not_nearly_invariant, random_defect,
                              random_nearly_invariant, theta_half)
from nearinv.operators import shift_matrices
from nearinv.series import InnerFunction, TruncatedSeries
from nearinv.spaces import DefectSpace

D = 32
SPECS = Path(__file__).resolve().parents[1] / "specs"
Z = InnerFunction.z_power(1)
Z2 = InnerFunction.z_power(2)
BZ = InnerFunction((0, 0.5))


def verdict(n, ok, detail):
    print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def factor_fixture(fx):
    if fx.defect is not None:
        return defect_factorize(fx.space, fx.defect, fx.phi)
    return branges_factorize(fx.space, fx.phi)


@pytest.fixture(scope="module")
def fixture_facts():
    return {name: (make(), factor_fixture(make())) for name, make in FIXTURES.items()}


def test_criterion_1_eh1_goldens():
    M = eh1_space()
    fact = hardy_vector_factorize(M)
    rep = fact.reports[0]
    _, back = shift_matrices(M.ambient)
    y, _ = M.coords(back(M.element(np.array([0, 1]))))
    g = fact.g_basis[0]
    reference = TruncatedSeries.scalar([-2, -1, 1], D) / (2 * np.sqrt(2))
    phase = g.coeffs[0, 0] / reference.coeffs[0, 0]
    errs = {
        "|1+z|^2": abs(M.norm(np.array([1, 0])) ** 2 - 3),
        "|z+z^2|^2": abs(M.norm(np.array([0, 1])) ** 2 - 4),
        "|S*(z+z^2)|": abs(M.norm(y) - np.sqrt(3)),
        "|g|": abs(M.norm(fact.g_coords[:, 0]) - 1),
        "<g,z+z^2>": abs(M.inner(fact.g_coords[:, 0], np.array([0, 1]))),
        "|phase|": abs(abs(phase) - 1),
        "g shape": float(np.abs((g - reference * phase).coeffs).max()),
    }
    ok = all(v <= 1e-12 for v in errs.values())
    f_err = abs(rep.f_norm_sq - 8 / 3)
    gap_err = abs(rep.h_norm_sq - rep.f_norm_sq - 1 / 3)
    ok = ok and f_err <= 1e-10 and gap_err <= 1e-10
    verdict(1, ok, f"max golden err {max(errs.values()):.1e}, |f|^2 err {f_err:.1e}, "
                   f"gap err {gap_err:.1e}")


def test_criterion_2_coefficient_law():
    rep = hardy_vector_factorize(eh1_space()).reports[0]
    c = rep.coeffs_c[0, :13]
    # g has a positive constant term, which fixes c_0 > 0
    err = float(np.abs(c - np.sqrt(2) * 2.0 ** -np.arange(13)).max())
    verdict(2, err <= 1e-10, f"max |c_k - sqrt2 2^-k| for k <= 12: {err:.1e}")


def test_criterion_3_blaschke_dirichlet():
    fx = FIXTURES["eh2"]()
    fact = branges_factorize(fx.space, fx.phi)
    theta = theta_half().taylor(D)
    g = fact.g_basis[0]
    phase = g.coeffs[0, 0] / theta.coeffs[0, 0]
    g_err = max(float(np.abs((g - theta * phase).coeffs).max()), abs(abs(phase) - 1))
    errs, strict = [g_err], True
    for k, rep in enumerate(fact.reports):
        zk = TruncatedSeries.monomial(k, D)
        f = rep.f_series[0]
        fphase = f.coeffs[k, 0]
        errs.append(float(np.abs((f - zk * fphase).coeffs).max()))
        errs.append(abs(abs(fphase) - 1))
        errs.append(abs(np.sqrt(rep.h_norm_sq) - np.sqrt(k + 1)))
        errs.append(abs(np.sqrt(rep.f_norm_sq) - 1))
        if k >= 1:
            strict = strict and np.sqrt(rep.h_norm_sq) - np.sqrt(rep.f_norm_sq) > 1e-9
    ok = fact.r == 1 and max(errs) <= 1e-9 and strict
    verdict(3, ok, f"r = {fact.r}, max err {max(errs):.1e}, strict gap for k >= 1: {strict}")


def test_criterion_4_isometric_hardy():
    rng = np.random.default_rng(4)
    worst_iso = worst_audit = 0.0
    for trial in range(50):
        n = 2 if trial % 5 == 0 else 1
        M = random_nearly_invariant(rng, Z, n=n, ambient_metric=True)
        fact = hardy_vector_factorize(M)
        for rep in fact.reports:
            worst_iso = max(worst_iso, abs(np.sqrt(rep.h_norm_sq) - np.sqrt(rep.f_norm_sq)))
        worst_audit = max(worst_audit, float(np.max(fact.invariance_residuals)))
    ok = worst_iso <= 1e-9 and worst_audit <= 1e-8
    verdict(4, ok, f"50 spaces: max | |h| - |f| | {worst_iso:.1e}, max audit {worst_audit:.1e}")


def _identity_and_budget(fact):
    ident, over = 0.0, -np.inf
    for rep in fact.reports:
        hn2 = rep.iteration.h_norm ** 2
        for s in rep.iteration.steps:
            ident = max(ident, s.identity_residual)
            over = max(over, s.budget - hn2)
    return ident, over


def test_criterion_5_partial_sums(fixture_facts):
    rng = np.random.default_rng(5)
    facts = [f for _, f in fixture_facts.values()]
    for trial in range(200):
        phi = [Z, Z2, BZ][trial % 3]
        if trial % 4 == 3:
            M, F = random_defect(rng, phi, contained=trial % 8 == 3)
            facts.append(defect_factorize(M, F, phi))
        else:
            n = 2 if phi is Z and trial % 8 == 0 else 1
            facts.append(branges_factorize(random_nearly_invariant(rng, phi, n=n), phi))
    ident, over = 0.0, -np.inf
    for fact in facts:
        a, b = _identity_and_budget(fact)
        ident, over = max(ident, a), max(over, b)
    ok = ident <= 1e-10 and over <= 1e-9
    verdict(5, ok, f"{len(facts)} spaces: max identity residual / |h| {ident:.1e}, "
                   f"max budget excess {over:.1e}")


def test_criterion_6_dense_oracle(fixture_facts):
    worst, checked = 0.0, []
    for name, (fx, fact) in fixture_facts.items():
        if fx.space.dim > 6:
            continue
        checked.append(name)
        for rep in fact.reports:
            levels = min(rep.coeffs_c.shape[1], D + 1)
            c, d = dense_coefficients(fact.g_basis, fact.defect_basis, fx.phi, rep.h, levels)
            worst = max(worst, float(np.abs(c - rep.coeffs_c[:, :levels]).max(initial=0)))
            worst = max(worst, float(np.abs(d - rep.coeffs_d[:, : levels - 1]).max(initial=0)))
    verdict(6, worst <= 1e-8, f"fixtures {', '.join(checked)}: max coefficient gap {worst:.1e}")


def test_criterion_7_kernel_bound():
    rng = np.random.default_rng(7)
    worst = 0.0
    for phi in (Z, Z2, BZ):
        fact = branges_factorize(random_nearly_invariant(rng, phi), phi)
        for _ in range(20):
            w = 0.9 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
            for rep in fact.reports:
                lhs, rhs = kernel_bound(fact, rep, w)
                worst = max(worst, lhs / rhs if rhs > 0 else (np.inf if lhs > 1e-14 else 0))
    verdict(7, worst <= 1 + 1e-8, f"max lhs/rhs over 3 x 20 points: {worst:.6f}")


def test_criterion_8_defect_split():
    fx = FIXTURES["defect-basic"]()
    fact = defect_factorize(fx.space, fx.defect, fx.phi)
    rep = fact.reports[0]
    one = TruncatedSeries.monomial(0, D)
    t_err = float(np.abs((rep.t_series[0] - one).coeffs).max())
    norm_err = max(abs(np.sqrt(rep.h_norm_sq) - 1), abs(np.sqrt(rep.t_norm_sq) - 1))
    ok = fact.branch == "contained" and t_err <= 1e-12 and norm_err <= 1e-12
    M = eh1_space()
    a = hardy_vector_factorize(M)
    b = defect_factorize(M, DefectSpace(M.ambient), Z)
    same = (b.p == 0
            and np.array_equal(a.g_coords, b.g_coords)
            and all(np.array_equal(x.coeffs_c, y.coeffs_c) for x, y in zip(a.reports, b.reports))
            and all(x.f_norm_sq == y.f_norm_sq for x, y in zip(a.reports, b.reports)))
    verdict(8, ok and same, f"branch {fact.branch}, t err {t_err:.1e}, norm err {norm_err:.1e}, "
                            f"p = 0 bit-identical: {same}")


def test_criterion_9_negative(capsys):
    fx = not_nearly_invariant()
    cert = check_nearly_invariant(fx.space, fx.phi)
    z = TruncatedSeries.monomial(1, D)
    wit_ok = (not cert.passed and cert.witness is not None
              and cert.witness.allclose(z * (cert.witness.coeffs[1, 0]), atol=1e-12)
              and abs(abs(cert.witness.coeffs[1, 0]) - 1) < 1e-12)
    code = main(["check", str(SPECS / "noncontractive.json")])
    err = capsys.readouterr().err
    with pytest.raises(SpaceError):
        load_spec(SPECS / "noncontractive.json")
    ok = wit_ok and code == 2 and "contractively" in err
    with capsys.disabled():
        verdict(9, ok, f"span{{z}} witness is z: {wit_ok}; noncontractive spec exit {code}")


def test_criterion_10_invariance_audit(fixture_facts):
    worst = {name: float(np.max(f.invariance_residuals)) for name, (_, f) in fixture_facts.items()}
    ok = max(worst.values()) <= 1e-8
    verdict(10, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
