"""Worked examples, negative cases, and random spaces that satisfy the hypotheses.

Random spaces are built as ``span{u * w_i * phi^k}`` where ``w_i`` spans the
model space ``(phi H^2)^perp`` and ``u`` does not vanish at the zeros of ``phi``.
Dividing by ``phi`` then just lowers ``k``, so near invariance holds exactly at
truncation.  Metrics are the true (untruncated) Hardy Gram plus nonnegative
terms that do not decrease with ``k``, which keeps both contractive
containment and the norm hypothesis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import InnerFunction, TruncatedSeries, series_multiply
from .spaces import AmbientSpace, ContractiveSpace, DefectSpace

WORKING_DEGREE = 32
HIGH_DEGREE = 256


@dataclass(frozen=True, eq=False)
class Fixture:
    name: str
    space: ContractiveSpace
    phi: InnerFunction
    defect: DefectSpace | None = None
    description: str = ""


def _poly(coeffs, degree):
    return TruncatedSeries.scalar(coeffs, degree)


def eh1_space(degree: int = WORKING_DEGREE) -> ContractiveSpace:
    """``span{1+z, z+z^2}`` with ``||f||_M = ||U f||`` and ``U = diag(1, sqrt2, sqrt2)`` on ``1, z, z^2``."""
    H = AmbientSpace.hardy(degree)
    basis = [_poly([1, 1], degree), _poly([0, 1, 1], degree)]
    U = np.diag([1.0, np.sqrt(2), np.sqrt(2)])
    return ContractiveSpace.from_injection(H, basis, U)


def eh1(degree: int = WORKING_DEGREE) -> Fixture:
    return Fixture("eh1", eh1_space(degree), InnerFunction.z_power(1),
                   description="two-dimensional space whose factorization loses norm")


def theta_half() -> InnerFunction:
    """Blaschke factor with zero ``1/2``, so ``theta(0) = 1/2``."""
    return InnerFunction((0.5,))


def eh2(degree: int = WORKING_DEGREE, levels: int = 7) -> Fixture:
    """``theta * (Dirichlet polynomials of degree < levels)`` with ``||theta z^k||^2 = k + 1``."""
    H = AmbientSpace.hardy(degree)
    th = theta_half().taylor(degree)
    basis = [series_multiply(TruncatedSeries.monomial(k, degree), th) for k in range(levels)]
    G = np.diag(np.arange(1, levels + 1, dtype=float))
    return Fixture("eh2", ContractiveSpace.from_gram(H, basis, G), InnerFunction.z_power(1),
                   description="Blaschke multiple of a Dirichlet-space truncation")


def defect_basic(degree: int = WORKING_DEGREE) -> Fixture:
    """``M = span{z}`` with the Hardy norm, ``F = span{1}``, ``phi = z``."""
    H = AmbientSpace.hardy(degree)
    M = ContractiveSpace.with_ambient_metric(H, [TruncatedSeries.monomial(1, degree)])
    F = DefectSpace(H, [TruncatedSeries.monomial(0, degree)])
    return Fixture("defect-basic", M, InnerFunction.z_power(1), F,
                   description="space inside phi*H absorbed by a one-dimensional defect")


def dirichlet_alpha(degree: int = WORKING_DEGREE, alpha: float = 0.5, levels: int = 5) -> Fixture:
    """``(1 + z/3) * span{z^k : k < levels}`` in ``D_alpha`` with the ambient metric, ``phi = z^2``."""
    H = AmbientSpace.dirichlet(alpha, degree)
    u = _poly([1, 1 / 3], degree)
    basis = [series_multiply(u, TruncatedSeries.monomial(k, degree)) for k in range(levels)]
    return Fixture("dirichlet-alpha", ContractiveSpace.with_ambient_metric(H, basis),
                   InnerFunction.z_power(2), description="weighted ambient with phi = z^2")


def full_hardy(degree: int = WORKING_DEGREE, dim: int = 8) -> ContractiveSpace:
    """``span{1, z, ..., z^(dim-1)}`` with the Hardy norm."""
    H = AmbientSpace.hardy(degree)
    return ContractiveSpace.with_ambient_metric(
        H, [TruncatedSeries.monomial(k, degree) for k in range(dim)])


def not_nearly_invariant(degree: int = WORKING_DEGREE) -> Fixture:
    H = AmbientSpace.hardy(degree)
    M = ContractiveSpace.with_ambient_metric(H, [TruncatedSeries.monomial(1, degree)])
    return Fixture("span-z", M, InnerFunction.z_power(1))


def defect_failure(degree: int = WORKING_DEGREE) -> Fixture:
    """``span{z+z^2, z^2+z^3}`` with ``F = span{1}``: the quotient ``1+z`` escapes ``M (+) F``."""
    H = AmbientSpace.hardy(degree)
    M = ContractiveSpace.with_ambient_metric(H, [_poly([0, 1, 1], degree),
                                                 _poly([0, 0, 1, 1], degree)])
    F = DefectSpace(H, [TruncatedSeries.monomial(0, degree)])
    return Fixture("defect-failure", M, InnerFunction.z_power(1), F)


FIXTURES = {"eh1": eh1, "eh2": eh2, "dirichlet-alpha": dirichlet_alpha,
            "defect-basic": defect_basic}


# -- random spaces -------------------------------------------------------------------


def model_space_basis(phi: InnerFunction, degree: int) -> list[TruncatedSeries]:
    """Basis of ``(phi H^2)^perp``: ``z^j`` below each zero at the origin, Szego kernels elsewhere."""
    out = []
    k = np.arange(degree + 1)
    for a, mult in phi.zero_multiplicities():
        for j in range(mult):
            if a == 0:
                out.append(TruncatedSeries.monomial(j, degree))
            else:
                # j-th derivative in conj(a) of 1/(1 - conj(a) z), up to scale
                fall = np.ones(degree + 1)
                for i in range(j):
                    fall = fall * (k - i)
                expo = np.maximum(k - j, 0)
                c = fall * np.conj(a) ** expo
                c[k < j] = 0
                out.append(TruncatedSeries(c[:, None]))
    return out


def _random_unit_poly(rng, phi: InnerFunction, n: int, degree: int, max_deg: int = 2):
    """Random ``C^n``-valued polynomial whose value stays away from 0 at every zero of `phi`."""
    while True:
        c = (rng.standard_normal((max_deg + 1, n)) + 1j * rng.standard_normal((max_deg + 1, n)))
        c[0] += 2.0 * np.sign(c[0].real + (c[0].real == 0))
        u = np.zeros((degree + 1, n), dtype=complex)
        u[: max_deg + 1] = c
        s = TruncatedSeries(u)
        if all(np.linalg.norm(s.evaluate(a)) > 0.5 for a, _ in phi.zero_multiplicities()):
            return s


def _times(u: TruncatedSeries, w: TruncatedSeries) -> TruncatedSeries:
    """Product of a ``C^n``-valued `u` and a scalar `w`."""
    return series_multiply(w, u)


def orthonormal_model_basis(phi: InnerFunction, degree: int) -> list[TruncatedSeries]:
    """:func:`model_space_basis` made Hardy-orthonormal (computed at a high degree, then cut)."""
    ws = model_space_basis(phi, HIGH_DEGREE)
    B = np.column_stack([w.flat() for w in ws])
    Q, R = np.linalg.qr(B)
    Q = Q * (np.sign(np.diag(R).real) + (np.diag(R).real == 0))
    return [TruncatedSeries(Q[:, j, None]).with_degree(degree) for j in range(Q.shape[1])]


def _blocks(phi, levels, units, start=0):
    """Columns ``u * w_i * phi^k`` (k from `start`) at high degree, one list per unit ``u``."""
    ws_hi = orthonormal_model_basis(phi, HIGH_DEGREE)
    p_hi = phi.taylor(HIGH_DEGREE)
    pw = [TruncatedSeries.monomial(0, HIGH_DEGREE)]
    for _ in range(levels):
        pw.append(series_multiply(p_hi, pw[-1]))
    index = [(k, i) for k in range(start, levels) for i in range(len(ws_hi))]
    hi = [[_times(u, series_multiply(pw[k], ws_hi[i])) for (k, i) in index] for u in units]
    return index, hi


def _true_gram(cols: list[TruncatedSeries]) -> np.ndarray:
    B = np.column_stack([c.flat() for c in cols])
    return B.conj().T @ B


def _level_weights(rng, index, size):
    """Block-diagonal PSD term whose blocks do not decrease with the level ``k``."""
    levels = sorted({k for k, _ in index})
    Delta = np.zeros((len(index), len(index)), dtype=complex)
    block = np.zeros((size, size), dtype=complex)
    for k in levels:
        X = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
        block = block + rng.uniform(0, 0.5) * (X @ X.conj().T) / size
        pos = [j for j, (kk, _) in enumerate(index) if kk == k]
        if len(pos) == size:
            # a level split between M and F gets no term: its cross terms would be unbounded
            Delta[np.ix_(pos, pos)] = block
    return Delta


def random_nearly_invariant(rng: np.random.Generator, phi: InnerFunction,
                            degree: int = WORKING_DEGREE, n: int = 1, levels: int | None = None,
                            ambient_metric: bool = False) -> ContractiveSpace:
    """Random space nearly invariant under division by `phi` satisfying the norm hypothesis.

    With ``ambient_metric=True`` the Hardy metric is used as is, otherwise the
    Gram matrix is the true Hardy Gram plus a random mixture of other unit
    multiples and level-monotone positive terms.  The plain metric needs
    polynomial members (all zeros of `phi` at the origin): truncating ``phi h``
    otherwise drops enough tail to break the norm hypothesis.
    """
    if ambient_metric and any(a != 0 for a in phi.zeros):
        raise ValueError("ambient_metric requires phi = z^s")
    r = len(model_space_basis(phi, 1)) * n
    if levels is None:
        levels = max(1, min(8 // r, int(rng.integers(2, 6))))
    H = AmbientSpace.hardy(degree, n)
    if n > 1:
        # components: u_i * phi^k where u_1..u_n have independent values at the zeros
        while True:
            us = [_random_unit_poly(rng, phi, n, HIGH_DEGREE) for _ in range(n)]
            V = np.column_stack([u.evaluate(0.0) for u in us])
            if np.linalg.svd(V, compute_uv=False)[-1] > 0.3:
                break
        pw = [TruncatedSeries.monomial(0, HIGH_DEGREE)]
        p_hi = phi.taylor(HIGH_DEGREE)
        for _ in range(levels):
            pw.append(series_multiply(p_hi, pw[-1]))
        cols = [_times(u, pw[k]) for k in range(levels) for u in us]
        index = [(k, i) for k in range(levels) for i in range(n)]
        extra = []
    else:
        units = [_random_unit_poly(rng, phi, n, HIGH_DEGREE) for _ in range(3)]
        index, hi = _blocks(phi, levels, units)
        cols, extra = hi[0], hi[1:]
    basis = [c.with_degree(degree) for c in cols]
    if ambient_metric:
        return ContractiveSpace.with_ambient_metric(H, basis)
    G = _true_gram(cols)
    for other in extra:
        G = G + rng.uniform(0, 1) * _true_gram(other)
    G = G + _level_weights(rng, index, len({i for _, i in index}))
    return ContractiveSpace.from_gram(H, basis, (G + G.conj().T) / 2)


def random_defect(rng: np.random.Generator, phi: InnerFunction, degree: int = WORKING_DEGREE,
                  levels: int | None = None, contained: bool = True
                  ) -> tuple[ContractiveSpace, DefectSpace]:
    """Random ``(M, F)`` nearly invariant with defect.

    ``M`` keeps the levels ``k >= 1`` of a random construction and ``F`` takes
    over level 0.  The model functions are Hardy-orthonormal and the Gram
    perturbation is level-block-diagonal, which keeps the (+)-norm hypothesis.  With ``contained=False`` and two model functions, the first
    level-0 function stays in ``M`` and only the second goes to ``F``.
    """
    ws = model_space_basis(phi, 1)
    if levels is None:
        levels = int(rng.integers(2, 2 + max(1, 6 // len(ws))))
    H = AmbientSpace.hardy(degree)
    # unit multiplier 1 keeps the levels Hardy-orthogonal, so M and F carry no cross terms
    index, hi = _blocks(phi, levels, [TruncatedSeries.monomial(0, HIGH_DEGREE)])
    keep_zero = set() if contained or len(ws) < 2 else {0}
    m_pos = [j for j, (k, i) in enumerate(index) if k >= 1 or i in keep_zero]
    f_pos = [j for j, (k, i) in enumerate(index) if k == 0 and i not in keep_zero]
    cols = [hi[0][j] for j in m_pos]
    basis = [c.with_degree(degree) for c in cols]
    m_index = [index[j] for j in m_pos]
    G = _true_gram(cols) + _level_weights(rng, m_index, len(ws))
    M = ContractiveSpace.from_gram(H, basis, (G + G.conj().T) / 2)
    F = DefectSpace(H, [hi[0][j].with_degree(degree) for j in f_pos])
    return M, F


__all__ = [
    "Fixture", "FIXTURES", "eh1", "eh1_space", "eh2", "defect_basic", "dirichlet_alpha",
    "full_hardy", "not_nearly_invariant", "defect_failure", "theta_half", "model_space_basis",
    "orthonormal_model_basis",
    "random_nearly_invariant", "random_defect",
]
