"""Hypothesis checks, the contraction iteration, and the three factorizations.

All three factorizations run on the same machinery.  A working space ``M (+) F``
(``F`` possibly empty) is given in coordinates.  ``P`` projects onto
``M cap phi H``, ``Q`` onto its complement inside ``M``, and ``L`` onto ``F``.
``R`` sends ``x`` to the minimum-norm solution ``y`` of ``phi * y = P x``.
Iterating ``R`` peels off ``Q R^k h`` and ``L R^k h``, which gives
``h = sum_k phi^k Q R^k h + phi sum_k phi^(k-1) L R^k h + phi^(m+1) R^(m+1) h``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ContainedInPhiH, HypothesisError, NotDivisible
from .operators import (complement_basis, divide_by_inner, intersect_with_phiH,
                        mult_by_inner)
from .series import (InnerFunction, TruncatedSeries, compose_with_inner,
                     phase_normalize, series_multiply, stack_components)
from .spaces import (MEMBERSHIP_TOL, RANK_TOL, ContractiveSpace, DefectSpace,
                     SumSpace, as_sum_space, kernel_vector, membership)

DEFAULT_EPS = 1e-12
NORM_FLOOR = 1 - 1e-10
RECONSTRUCTION_TOL = 1e-9
BUDGET_SLACK = 1e-9


def default_m_max(degree: int) -> int:
    return 4 * (degree + 1)


# -- hypothesis checks -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NearInvarianceCertificate:
    """Outcome of :func:`check_nearly_invariant`.

    `residuals` holds the relative membership residual of ``h / phi`` for each
    basis element ``h`` of ``M cap phi H``; on failure `witness` is the worst
    such ``h`` and `quotient` its quotient.
    """

    passed: bool
    residuals: np.ndarray
    intersection_dim: int
    tol: float
    witness: TruncatedSeries | None = None
    quotient: TruncatedSeries | None = None

    def __bool__(self):
        return self.passed


def check_nearly_invariant(space, phi: InnerFunction,
                           tol: float = MEMBERSHIP_TOL) -> NearInvarianceCertificate:
    """Test that ``phi f in M`` forces ``f in M`` (``f in M (+) F`` with a defect space).

    For each basis element ``h`` of ``M cap phi H`` this solves
    ``phi * y = h`` over ``y`` in the working space by weighted least squares.
    That is division followed by membership, without forming ``h / phi``
    coefficient by coefficient, whose top coefficients are ill-determined when
    ``phi`` has zeros away from the origin.
    """
    S = as_sum_space(space)
    M, H = S.m, S.ambient
    K = intersect_with_phiH(M, phi)
    TB = mult_by_inner(H, phi).matrix @ S.basis_matrix
    residuals = np.zeros(K.shape[1])
    members = []
    for j in range(K.shape[1]):
        h = M.element(K[:, j])
        h = h * phase_normalize(h.coeffs)
        _, residuals[j] = membership(H, TB, h)
        members.append(h)
    if K.shape[1] == 0 or residuals.max() <= tol:
        return NearInvarianceCertificate(True, residuals, K.shape[1], tol)
    worst = int(np.argmax(residuals))
    h = members[worst]
    try:
        q = divide_by_inner(H, h, phi, tol=tol)
    except NotDivisible:
        q = None
    return NearInvarianceCertificate(False, residuals, K.shape[1], tol, h, q)


class _Machine:
    """Coordinates of ``P``, ``Q``, ``L`` and ``R`` for one working space and ``phi``."""

    def __init__(self, space: SumSpace, phi: InnerFunction, rank_tol: float = RANK_TOL,
                 div_tol: float = MEMBERSHIP_TOL):
        self.S = S = space
        self.phi = phi
        self.div_tol = div_tol
        M, d = S.m, S.d
        self.K = intersect_with_phiH(M, phi, rank_tol)
        self.g = complement_basis(M, phi, rank_tol)
        Kp = np.zeros((S.dim, self.K.shape[1]), dtype=complex)
        Kp[:d] = self.K
        self.P = Kp @ Kp.conj().T @ S.gram
        gp = np.zeros((S.dim, self.g.shape[1]), dtype=complex)
        gp[:d] = self.g
        self.Q = gp @ gp.conj().T @ S.gram
        self.T = mult_by_inner(S.ambient, phi).matrix
        self.Linv_H = sla.solve_triangular(S.chol, np.eye(S.dim), lower=True).conj().T
        A = self.T @ S.basis_matrix @ self.Linv_H
        self.A = A
        self.A_pinv = np.linalg.pinv(A, rcond=rank_tol)

    @property
    def r(self) -> int:
        return self.g.shape[1]

    def divide(self, target: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
        """Coordinates ``y`` of minimum (+)-norm with ``phi * y = target``; relative residual."""
        b = self.S.basis_matrix @ target
        u = self.A_pinv @ b
        res = float(np.linalg.norm(self.A @ u - b))
        denom = max(float(np.linalg.norm(b)), scale)
        return self.Linv_H @ u, (res / denom if denom > 0 else 0.0)

    def R(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        scale = float(np.linalg.norm(self.S.basis_matrix @ x))
        return self.divide(self.P @ x, scale)


def check_norm_hypothesis(space, phi: InnerFunction) -> float:
    """``min ||phi h||_M^2 / ||h||^2`` over the quotient space ``{h : phi h in M}``.

    The denominator uses the (+)-norm when a defect space is present.  Returns
    ``inf`` when the quotient space is empty.  The hypothesis holds when the
    result is at least ``1 - 1e-10``.
    """
    S = as_sum_space(space)
    mach = _Machine(S, phi)
    k = mach.K.shape[1]
    if k == 0:
        return float("inf")
    Y = np.zeros((S.dim, k), dtype=complex)
    for j in range(k):
        x = S.embed_m(mach.K[:, j])
        Y[:, j], _ = mach.divide(x, float(np.linalg.norm(S.basis_matrix @ x)))
    Kp = np.vstack([mach.K, np.zeros((S.p, k))])
    A = Kp.conj().T @ S.gram @ Kp
    B = Y.conj().T @ S.gram @ Y
    A = (A + A.conj().T) / 2
    B = (B + B.conj().T) / 2
    return float(sla.eigh(A, B, eigvals_only=True)[0])


# -- the contraction iteration ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class IterationStep:
    """One step ``k``: working-space coordinates of ``R^k h``, ``Q R^k h``, ``L R^k h``."""

    k: int
    r: np.ndarray
    q: np.ndarray
    l: np.ndarray
    identity_residual: float
    budget: float
    division_residual: float


@dataclass(frozen=True, eq=False)
class Iteration:
    steps: tuple[IterationStep, ...]
    tail: np.ndarray
    tail_norm: float
    h_norm: float
    converged: bool

    @property
    def m(self) -> int:
        return len(self.steps) - 1

    def max_identity_residual(self) -> float:
        return max(s.identity_residual for s in self.steps)


def _run(mach: _Machine, x_h: np.ndarray, m_max: int, eps: float) -> Iteration:
    S = mach.S
    B = S.basis_matrix
    h_amb = B @ x_h
    h_coef = float(np.linalg.norm(h_amb))
    h_norm = S.norm(x_h)
    steps = []
    acc = np.zeros_like(h_amb)
    Tk = np.eye(S.ambient.dim, dtype=complex)
    budget = 0.0
    r = x_h.astype(complex)
    L = np.zeros(S.dim, dtype=bool)
    L[S.d:] = True
    for k in range(m_max + 1):
        q = mach.Q @ r
        l = np.where(L, r, 0) if k > 0 else np.zeros_like(r)
        r_next, div_res = mach.R(r)
        if div_res > mach.div_tol:
            raise HypothesisError(f"division by phi failed at step {k} (relative residual "
                                  f"{div_res:.2e}); hypotheses violated or truncation exhausted",
                                  step=k, residual=div_res)
        budget += S.norm(q) ** 2 + S.norm(l) ** 2
        acc = acc + Tk @ (B @ (q + l))
        Tk = mach.T @ Tk
        resid = h_amb - acc - Tk @ (B @ r_next)
        ident = float(np.linalg.norm(resid)) / h_coef if h_coef > 0 else 0.0
        steps.append(IterationStep(k, r, q, l, ident, budget, div_res))
        r = r_next
        tail = S.norm(r)
        if tail <= eps * h_norm:
            return Iteration(tuple(steps), r, tail, h_norm, True)
    return Iteration(tuple(steps), r, S.norm(r), h_norm, False)


def contraction_iteration(space, phi: InnerFunction, h, m_max: int | None = None,
                          eps: float = DEFAULT_EPS) -> Iteration:
    """Iterate ``R`` on `h` until ``||R^(m+1) h|| <= eps ||h||`` or ``m = m_max``.

    `h` is an element of ``M`` given as a series or as M-coordinates.  Every
    step records the relative residual of the finite decomposition identity
    and the running Bessel sum.
    """
    S = as_sum_space(space)
    mach = _Machine(S, phi)
    x = S.m.to_coords(h) if isinstance(h, TruncatedSeries) else np.asarray(h, dtype=complex)
    if x.shape == (S.d,):
        x = S.embed_m(x)
    if m_max is None:
        m_max = default_m_max(S.ambient.degree)
    return _run(mach, x, m_max, eps)


# -- reports -------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FactorizationReport:
    """Factorization data for one element ``h``.

    ``coeffs_c[i, k] = <Q R^k h, g_i>_M`` and ``coeffs_d[j, k-1]`` is the
    coefficient of ``e_j`` in ``L R^k h``.  ``f_series[i] = sum_k c_ki phi^k``
    and ``t_series[j] = sum_k d_kj phi^(k-1)``, truncated at the working degree.
    """

    h: TruncatedSeries
    h_coords: np.ndarray
    g_basis: tuple[TruncatedSeries, ...]
    defect_basis: tuple[TruncatedSeries, ...]
    coeffs_c: np.ndarray
    coeffs_d: np.ndarray
    f_series: tuple[TruncatedSeries, ...]
    t_series: tuple[TruncatedSeries, ...]
    tail_norm: float
    norm_budget: tuple[float, float]
    reconstruction_residual: float
    iteration: Iteration = field(repr=False)

    @property
    def h_norm_sq(self) -> float:
        return self.norm_budget[1]

    @property
    def f_norm_sq(self) -> float:
        return float(np.sum(np.abs(self.coeffs_c) ** 2))

    @property
    def t_norm_sq(self) -> float:
        return float(np.sum(np.abs(self.coeffs_d) ** 2))

    @property
    def steps(self) -> int:
        return self.iteration.m

    def generator(self) -> TruncatedSeries | None:
        """The N-side element ``f`` as one ``C^r``-valued series."""
        if not self.f_series:
            return None
        return stack_components(self.f_series)


@dataclass(frozen=True, eq=False)
class Factorization:
    """Result of a factorization run over a whole space (one report per basis element)."""

    kind: str
    branch: str
    space: SumSpace
    phi: InnerFunction
    g_coords: np.ndarray
    g_basis: tuple[TruncatedSeries, ...]
    defect_basis: tuple[TruncatedSeries, ...]
    reports: tuple[FactorizationReport, ...]
    invariance_residuals: np.ndarray
    extraction_residuals: np.ndarray
    norm_ratio: float
    certificate: NearInvarianceCertificate
    _machine: _Machine = field(repr=False)

    @property
    def r(self) -> int:
        return len(self.g_basis)

    @property
    def p(self) -> int:
        return len(self.defect_basis)

    def factor(self, h, m_max: int | None = None, eps: float = DEFAULT_EPS) -> FactorizationReport:
        """Factor any element of ``M`` (series or M-coordinates) over this basis."""
        S = self.space
        x = S.m.to_coords(h) if isinstance(h, TruncatedSeries) else np.asarray(h, dtype=complex)
        if m_max is None:
            m_max = default_m_max(S.ambient.degree)
        return _factor_element(self._machine, x, self.g_basis, self.defect_basis, m_max, eps)

    def audit(self, report: FactorizationReport) -> tuple[float, float]:
        return (_invariance_residual(self._machine, report),
                _extraction_residual(self._machine, report))

    def g_orthonormality_error(self) -> float:
        G = self.g_coords.conj().T @ self.space.m.gram @ self.g_coords
        return float(np.max(np.abs(G - np.eye(self.r)))) if self.r else 0.0

    def verdict(self, recon_tol: float = RECONSTRUCTION_TOL,
                audit_tol: float = MEMBERSHIP_TOL) -> dict:
        budget_ok = all(rep.norm_budget[0] <= rep.norm_budget[1] + BUDGET_SLACK
                        for rep in self.reports)
        recon_ok = all(rep.reconstruction_residual <= recon_tol for rep in self.reports)
        inv_ok = bool(np.all(self.invariance_residuals <= audit_tol))
        ext_ok = bool(np.all(self.extraction_residuals <= audit_tol))
        ortho_ok = self.g_orthonormality_error() <= 1e-10
        return {"norm_budget": budget_ok, "reconstruction": recon_ok,
                "invariance_audit": inv_ok, "extraction_audit": ext_ok,
                "g_orthonormal": ortho_ok,
                "passed": budget_ok and recon_ok and inv_ok and ext_ok and ortho_ok}


def _compose_rows(rows: np.ndarray, phi: InnerFunction, degree: int) -> list[TruncatedSeries]:
    out = []
    for row in rows:
        q = TruncatedSeries.scalar(row[: degree + 1], degree)
        out.append(compose_with_inner(q, phi).with_valid(degree))
    return out


def _assemble(mach: _Machine, g_basis, defect_basis, f_list, t_list) -> TruncatedSeries:
    H = mach.S.ambient
    total = TruncatedSeries.zeros(H.degree, H.n)
    for g, f in zip(g_basis, f_list):
        total = total + series_multiply(f, g)
    if t_list:
        inner = TruncatedSeries.zeros(H.degree, H.n)
        for e, t in zip(defect_basis, t_list):
            inner = inner + series_multiply(t, e)
        phi_series = mach.phi.taylor(H.degree)
        total = total + series_multiply(phi_series, inner)
    return total


def _coefficients(mach: _Machine, it: Iteration) -> tuple[np.ndarray, np.ndarray]:
    S = mach.S
    G = S.m.gram
    r, p, m = mach.r, S.p, it.m
    c = np.zeros((r, m + 1), dtype=complex)
    d = np.zeros((p, m), dtype=complex)
    for step in it.steps:
        if r:
            c[:, step.k] = mach.g.conj().T @ G @ step.q[: S.d]
        if p and step.k >= 1:
            d[:, step.k - 1] = step.l[S.d:]
    return c, d


def _factor_element(mach: _Machine, x_m: np.ndarray, g_basis, defect_basis,
                    m_max: int, eps: float) -> FactorizationReport:
    S = mach.S
    D = S.ambient.degree
    x = S.embed_m(x_m)
    it = _run(mach, x, m_max, eps)
    c, d = _coefficients(mach, it)
    f_list = _compose_rows(c, mach.phi, D)
    t_list = _compose_rows(d, mach.phi, D) if S.p else []
    h = S.m.element(x_m)
    recon = _assemble(mach, g_basis, defect_basis, f_list, t_list)
    diff = (h - recon).window()
    h_scale = max(float(np.linalg.norm(h.window())), 1e-300)
    recon_res = float(np.max(np.abs(diff))) / h_scale if diff.size else 0.0
    left = float(np.sum(np.abs(c) ** 2) + np.sum(np.abs(d) ** 2))
    return FactorizationReport(
        h=h, h_coords=np.asarray(x_m, dtype=complex), g_basis=tuple(g_basis),
        defect_basis=tuple(defect_basis), coeffs_c=c, coeffs_d=d,
        f_series=tuple(f_list), t_series=tuple(t_list), tail_norm=it.tail_norm,
        norm_budget=(left, it.h_norm ** 2), reconstruction_residual=recon_res, iteration=it)


def _shifted_element(mach: _Machine, rep: FactorizationReport) -> TruncatedSeries:
    """``sum g_i T*(f_i) + phi sum e_j T*(t_j)``: coefficient rows shifted by one level."""
    D = mach.S.ambient.degree
    c_shift = rep.coeffs_c[:, 1:]
    d_shift = rep.coeffs_d[:, 1:]
    f_list = _compose_rows(c_shift, mach.phi, D) if c_shift.shape[1] else [
        TruncatedSeries.zeros(D) for _ in range(c_shift.shape[0])]
    t_list = []
    if mach.S.p:
        t_list = _compose_rows(d_shift, mach.phi, D) if d_shift.shape[1] else [
            TruncatedSeries.zeros(D) for _ in range(d_shift.shape[0])]
    return _assemble(mach, rep.g_basis, rep.defect_basis, f_list, t_list)


def _invariance_residual(mach: _Machine, rep: FactorizationReport) -> float:
    """Relative membership residual in ``M`` of the shifted generator's image."""
    S = mach.S
    elem = _shifted_element(mach, rep)
    x, rel = membership(S.ambient, S.m.basis_matrix, elem)
    bn = float(np.linalg.norm(elem.window()))
    h_scale = float(np.linalg.norm(rep.h.window()))
    if bn <= 1e-14 * max(h_scale, 1e-300):
        return 0.0
    return rel


def _extraction_residual(mach: _Machine, rep: FactorizationReport) -> float:
    """Re-extract ``c_ki = <Q R^k h', g_i>`` from the reconstruction ``h'`` and compare."""
    S = mach.S
    recon = _assemble(mach, rep.g_basis, rep.defect_basis, rep.f_series, rep.t_series)
    x, _ = membership(S.ambient, S.m.basis_matrix, recon)
    it = _run(mach, S.embed_m(x), rep.iteration.m, 0.0)
    c, d = _coefficients(mach, it)
    scale = max(np.sqrt(rep.norm_budget[1]), 1e-300)
    k = min(c.shape[1], rep.coeffs_c.shape[1])
    err = float(np.max(np.abs(c[:, :k] - rep.coeffs_c[:, :k]), initial=0.0))
    kd = min(d.shape[1], rep.coeffs_d.shape[1])
    err = max(err, float(np.max(np.abs(d[:, :kd] - rep.coeffs_d[:, :kd]), initial=0.0)))
    return err / scale


# -- the three factorizations ----------------------------------------------------------


def _factorize(space, phi: InnerFunction, kind: str, m_max, eps, check: bool) -> Factorization:
    if not phi.vanishes_at_zero():
        raise ValueError("factorization requires an inner function with phi(0) = 0")
    S = as_sum_space(space)
    mach = _Machine(S, phi)
    contained = mach.K.shape[1] == S.d
    if contained and S.p == 0:
        raise ContainedInPhiH(
            "every element of M lies in phi*H: a nonzero space of this kind cannot be nearly "
            "invariant under division by phi (only the zero subspace qualifies)")
    cert = check_nearly_invariant(S, phi)
    ratio = check_norm_hypothesis(S, phi)
    if check:
        if not cert.passed:
            raise HypothesisError(f"not nearly invariant under division by phi (worst residual "
                                  f"{cert.residuals.max():.2e})")
        if ratio < NORM_FLOOR:
            raise HypothesisError(f"norm hypothesis fails: min ||phi h||^2/||h||^2 = {ratio:.12g}")
    if m_max is None:
        m_max = default_m_max(S.ambient.degree)
    g_basis = tuple(S.m.element(mach.g[:, i]) for i in range(mach.r))
    defect_basis = S.f.basis
    reports = tuple(_factor_element(mach, np.eye(S.d)[:, j], g_basis, defect_basis, m_max, eps)
                    for j in range(S.d))
    inv = np.array([_invariance_residual(mach, rep) for rep in reports])
    ext = np.array([_extraction_residual(mach, rep) for rep in reports])
    return Factorization(kind, "contained" if contained else "full", S, phi, mach.g, g_basis,
                         defect_basis, reports, inv, ext, ratio, cert, mach)


def hardy_vector_factorize(M: ContractiveSpace, m_max: int | None = None,
                           eps: float = DEFAULT_EPS, check: bool = True) -> Factorization:
    """Factor a nearly backward-shift-invariant space inside ``H^2(D, C^n)``.

    Each element becomes ``h = G f`` with ``G`` the columns ``g_1..g_r`` (``r <= n``)
    and ``f`` in ``H^2(D, C^r)`` satisfying ``||f||_2 <= ||h||_M``.
    """
    if M.ambient.kind != "hardy":
        raise ValueError("hardy_vector_factorize needs a Hardy ambient; use branges_factorize")
    return _factorize(M, InnerFunction.z_power(1), "hardy_vector", m_max, eps, check)


def branges_factorize(M: ContractiveSpace, phi: InnerFunction, m_max: int | None = None,
                      eps: float = DEFAULT_EPS, check: bool = True) -> Factorization:
    """Factor a space nearly invariant under division by an inner `phi` with ``phi(0) = 0``.

    Each element becomes ``h = sum_i g_i f_i`` with ``f_i = sum_k c_ki phi^k``.
    """
    return _factorize(M, phi, "branges", m_max, eps, check)


def defect_factorize(M: ContractiveSpace, F: DefectSpace, phi: InnerFunction,
                     m_max: int | None = None, eps: float = DEFAULT_EPS,
                     check: bool = True) -> Factorization:
    """Finite-defect factorization ``h = sum g_i f_i + phi sum e_j t_j``.

    When ``M`` lies inside ``phi H`` there is no ``g`` part and the branch is
    reported as ``"contained"``.
    """
    return _factorize(SumSpace(M, F), phi, "defect", m_max, eps, check)


# -- diagnostics used by the acceptance checks ---------------------------------------------


def kernel_bound(fact: Factorization, rep: FactorizationReport, w: complex) -> tuple[float, float]:
    """Both sides of ``sum |g_i(w) f_i(w)| <= ||Q k_w|| ||h|| / sqrt(1 - |phi(w)|^2)``.

    ``f_i(w)`` is evaluated from the full coefficient rows as a power series in
    ``phi(w)``, not from its truncated Taylor expansion.
    """
    M = fact.space.m
    if M.ambient.n != 1:
        raise ValueError("kernel bound is stated for scalar-valued spaces")
    kw = kernel_vector(M, w)[:, 0]
    g = fact.g_coords
    Qkw = g @ (g.conj().T @ M.gram @ kw)
    qk_norm = np.sqrt(max((Qkw.conj() @ M.gram @ Qkw).real, 0.0))
    pw = fact.phi.evaluate(w)
    rhs = qk_norm * np.sqrt(rep.norm_budget[1]) / np.sqrt(1 - abs(pw) ** 2)
    lhs = 0.0
    for i, gs in enumerate(fact.g_basis):
        fi = np.polyval(rep.coeffs_c[i, ::-1], pw)
        lhs += abs(gs.evaluate(w)[0] * fi)
    return float(lhs), float(rhs)


def dense_coefficients(g_basis, defect_basis, phi: InnerFunction, h: TruncatedSeries,
                       levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force coefficients from one dense least-squares solve.

    Unknowns are ``c_ki`` (``k < levels``) multiplying ``phi^k g_i`` and ``d_kj``
    (``1 <= k < levels``) multiplying ``phi^k e_j``; the system is
    ``h = sum c_ki phi^k g_i + sum d_kj phi^k e_j`` on the coefficient window.
    """
    D = h.degree
    pw = [TruncatedSeries.monomial(0, D)]
    p = phi.taylor(D)
    for _ in range(1, levels):
        pw.append(series_multiply(p, pw[-1]))
    cols = []
    for k in range(levels):
        for g in g_basis:
            cols.append(series_multiply(pw[k], g).flat())
    for k in range(1, levels):
        for e in defect_basis:
            cols.append(series_multiply(pw[k], e).flat())
    A = np.column_stack(cols)
    sol, *_ = np.linalg.lstsq(A, h.flat(), rcond=None)
    r, p_ = len(g_basis), len(defect_basis)
    c = sol[: r * levels].reshape(levels, r).T
    d = sol[r * levels:].reshape(levels - 1, p_).T if p_ else np.zeros((0, levels - 1), complex)
    return c, d


__all__ = [
    "NearInvarianceCertificate", "check_nearly_invariant", "check_norm_hypothesis",
    "IterationStep", "Iteration", "contraction_iteration", "FactorizationReport",
    "Factorization", "hardy_vector_factorize", "branges_factorize", "defect_factorize",
    "kernel_bound", "dense_coefficients", "default_m_max",
]
