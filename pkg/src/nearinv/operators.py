"""Matrix realizations of shift, multiplication, Toeplitz-adjoint and projection operators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NotDivisible, SpaceError
from .series import InnerFunction, TruncatedSeries, blaschke_taylor
from .spaces import (RANK_TOL, AmbientSpace, ContractiveSpace, SumSpace,
                     evaluation_matrix, m_orthonormalize)


@dataclass(frozen=True, eq=False)
class OpMatrix:
    """A linear map stored as a dense matrix between tagged coordinate spaces.

    `degree_loss` counts how many trusted coefficient rows one application
    consumes; composition adds them.
    """

    matrix: np.ndarray
    domain: str
    codomain: str
    degree_loss: int = 0
    note: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, other):
        if isinstance(other, OpMatrix):
            if other.codomain != self.domain:
                raise ValueError(f"cannot compose {self.domain} <- {other.codomain}")
            return OpMatrix(self.matrix @ other.matrix, other.domain, self.codomain,
                            self.degree_loss + other.degree_loss)
        return self.matrix @ np.asarray(other)

    def __call__(self, x):
        if isinstance(x, TruncatedSeries):
            out = self.matrix @ x.flat()
            valid = max(x.valid_degree - self.degree_loss, 0)
            return TruncatedSeries.from_flat(out, x.n, valid)
        return self.matrix @ np.asarray(x, dtype=complex)


def _tag(H: AmbientSpace) -> str:
    label = H.kind if H.alpha is None else f"{H.kind}({H.alpha:g})"
    return f"{label}[D={H.degree},n={H.n}]"


def shift_matrices(H: AmbientSpace) -> tuple[OpMatrix, OpMatrix]:
    """Forward shift ``f -> z f`` and backward shift ``f -> (f - f(0)) / z``."""
    down = np.eye(H.degree + 1, k=-1)
    S = np.kron(down, np.eye(H.n))
    t = _tag(H)
    return OpMatrix(S, t, t, 0), OpMatrix(S.T, t, t, 1)


def toeplitz_matrix(phi: InnerFunction, degree: int) -> np.ndarray:
    """Lower-triangular Toeplitz matrix of multiplication by `phi` (scalar)."""
    c = blaschke_taylor(phi, degree).coeffs[:, 0]
    return sla.toeplitz(c, np.zeros(degree + 1, dtype=complex))


def mult_by_inner(H: AmbientSpace, phi: InnerFunction) -> OpMatrix:
    """``h -> phi h`` on the truncation.

    The Cauchy product is exact on every retained row, so no trusted rows are
    lost (``degree_loss = 0``).
    """
    T = np.kron(toeplitz_matrix(phi, H.degree), np.eye(H.n))
    t = _tag(H)
    return OpMatrix(T, t, t, 0, note=f"M_phi, {phi.num_zeros} zeros")


def weighted_lower_bound(H: AmbientSpace, op: OpMatrix, window: int) -> float:
    """Smallest singular value, in the weighted metric, of `op` on inputs of degree <= window."""
    sw = np.sqrt(H.flat_weights)
    A = sw[:, None] * op.matrix / sw[None, :]
    cols = H.window_rows(window)
    return float(np.linalg.svd(A[:, :cols], compute_uv=False)[-1])


def toeplitz_adjoint(H: AmbientSpace, phi: InnerFunction) -> OpMatrix:
    """Adjoint of :func:`mult_by_inner` in the ambient metric, ``W^-1 T^H W``.

    On a Hardy ambient this is the Toeplitz adjoint; on other ambients the
    `note` says the weighted adjoint was returned.
    """
    T = mult_by_inner(H, phi).matrix
    w = H.flat_weights
    A = (T.conj().T * w[None, :]) / w[:, None]
    kind = "hardy" if H.kind == "hardy" else "weighted"
    t = _tag(H)
    return OpMatrix(A, t, t, phi.num_zeros, note=f"{kind} adjoint of M_phi")


DIVISION_AMPLIFICATION = 1e4


def division_window(phi: InnerFunction, valid_degree: int) -> int:
    """Last quotient coefficient that division by `phi` can still resolve.

    Each zero ``a != 0`` amplifies rounding in coefficient ``m`` of the
    quotient by about ``|a|^-m``; coefficients whose amplification exceeds
    ``DIVISION_AMPLIFICATION`` are left untrusted.
    """
    valid = valid_degree - phi.order_at_zero
    rate = sum(-np.log(abs(a)) for a in phi.zeros if a != 0)
    if rate > 0:
        valid = min(valid, int(np.log(DIVISION_AMPLIFICATION) / rate))
    return max(valid, 0)


def distance_to_phiH(h: TruncatedSeries, phi: InnerFunction) -> float:
    """Hardy-norm distance from the polynomial `h` (trusted window) to ``phi H^2``.

    This is the norm of the projection of `h` onto the model space, computed
    from the values (and derivatives) of `h` at the zeros of `phi`.
    """
    if not phi.zeros:
        return 0.0
    w = h.window()
    n = h.n
    r = max(abs(a) for a in phi.zeros)
    N = h.valid_degree if r == 0 else max(h.valid_degree, int(np.ceil(-40 / np.log10(r))) + 1)
    C_hi = constraint_matrix(AmbientSpace.hardy(N, n), phi)
    C = C_hi[:, : w.size]
    v = C @ w.reshape(-1)
    gamma = C_hi @ C_hi.conj().T
    return float(np.sqrt(max((v.conj() @ np.linalg.solve(gamma, v)).real, 0.0)))


def divide_by_inner(H: AmbientSpace, h: TruncatedSeries, phi: InnerFunction,
                    tol: float = 1e-8, rcond: float | None = None) -> TruncatedSeries:
    """Solve ``phi x = h`` on the trusted window of `h`.

    Divisibility is judged by the Hardy distance from `h` to ``phi H``
    relative to ``||h||``; :class:`NotDivisible` is raised above `tol`.  The
    quotient comes from a full-precision least-squares solve and is trusted
    up to :func:`division_window`.
    """
    h = H.check_series(h)
    dist = distance_to_phiH(h, phi)
    hn = float(np.linalg.norm(h.window()))
    rel = dist / hn if hn > 0 else 0.0
    if rel > tol:
        raise NotDivisible(dist, rel)
    rows = H.window_rows(h.valid_degree)
    sw = np.sqrt(H.flat_weights)
    T = mult_by_inner(H, phi).matrix
    A = (sw[:, None] * T / sw[None, :])[:rows]
    b = (sw * h.flat())[:rows]
    u, *_ = np.linalg.lstsq(A, b, rcond=rcond)
    return H.series(u / sw, division_window(phi, h.valid_degree))


def constraint_matrix(H: AmbientSpace, phi: InnerFunction) -> np.ndarray:
    """Rows encoding ``h^(j)(a) = 0`` for each zero ``a`` of `phi` with multiplicity > j."""
    I = np.eye(H.dim, dtype=complex)
    rows = []
    for a, mult in phi.zero_multiplicities():
        for j in range(mult):
            rows.append(evaluation_matrix(H, I, a, j))
    if not rows:
        return np.zeros((0, H.dim), dtype=complex)
    return np.vstack(rows)


def _whitened_split(M: ContractiveSpace, phi: InnerFunction, tol: float):
    C = constraint_matrix(M.ambient, phi)
    Linv_H = sla.solve_triangular(M.chol, np.eye(M.dim), lower=True).conj().T
    A = C @ M.basis_matrix @ Linv_H
    if A.shape[0] == 0:
        return C, Linv_H, np.eye(M.dim, dtype=complex), np.zeros((M.dim, 0), complex)
    _, s, Vh = np.linalg.svd(A)
    scale = np.linalg.norm(C, 2) * np.linalg.norm(M.basis_matrix @ Linv_H, 2)
    rank = int(np.sum(s > tol * scale)) if scale > 0 else 0
    V = Vh.conj().T
    return C, Linv_H, V[:, rank:], V[:, :rank]


def intersect_with_phiH(M: ContractiveSpace, phi: InnerFunction,
                        tol: float = RANK_TOL) -> np.ndarray:
    """M-orthonormal coordinates of a basis of ``M cap phi H``.

    Membership in ``phi H`` is the vanishing of each element (and its
    derivatives, for repeated zeros) at the zeros of `phi`.
    """
    _, Linv_H, null, _ = _whitened_split(M, phi, tol)
    return Linv_H @ null


def complement_basis(M: ContractiveSpace, phi: InnerFunction, tol: float = RANK_TOL) -> np.ndarray:
    """M-orthonormal basis of ``M minus (M cap phi H)`` in a deterministic order.

    Built from the Riesz representers of the zero constraints, orthonormalized
    in order, each rotated so its first nonzero Taylor coefficient is positive.
    """
    C, Linv_H, null, rng = _whitened_split(M, phi, tol)
    r = M.dim - null.shape[1]
    if r == 0:
        return np.zeros((M.dim, 0), dtype=complex)
    reps = M.solve_gram((C @ M.basis_matrix).conj().T)
    K = Linv_H @ null
    reps = reps - K @ (K.conj().T @ M.gram @ reps)
    Q = m_orthonormalize(M.gram, reps, tol, limit=r)
    if Q.shape[1] < r:
        # representers lost rank numerically; complete from the SVD range
        Q = m_orthonormalize(M.gram, np.hstack([Q, Linv_H @ rng]), tol, limit=r)
    for j in range(Q.shape[1]):
        Q[:, j] *= _first_coeff_phase(M.basis_matrix @ Q[:, j])
    return Q


def _first_coeff_phase(v: np.ndarray, tol: float = 1e-10) -> complex:
    scale = np.max(np.abs(v))
    for c in v:
        if abs(c) > tol * scale:
            return abs(c) / c
    return 1.0


def project_in_M(space, target: np.ndarray) -> OpMatrix:
    """Orthogonal projection onto the span of `target` coordinates, in the space's metric.

    `space` is a :class:`ContractiveSpace` or a :class:`SumSpace`; targets with
    fewer rows than the space dimension are taken as M-coordinates and padded.
    """
    G = space.gram
    K = np.asarray(target, dtype=complex)
    if K.ndim == 1:
        K = K[:, None]
    if K.shape[0] < G.shape[0]:
        K = np.vstack([K, np.zeros((G.shape[0] - K.shape[0], K.shape[1]), complex)])
    if K.shape[1] == 0:
        return OpMatrix(np.zeros_like(G), "M", "M")
    KGK = K.conj().T @ G @ K
    ev = np.linalg.eigvalsh((KGK + KGK.conj().T) / 2)
    if ev[0] <= RANK_TOL * ev[-1]:
        raise SpaceError("projection target basis is rank deficient")
    P = K @ np.linalg.solve(KGK, K.conj().T @ G)
    return OpMatrix(P, "M", "M")


def project_onto_defect(space: SumSpace) -> OpMatrix:
    """Projection ``L`` of ``M (+) F`` onto ``F``; in (+)-coordinates it keeps the F block."""
    L = np.zeros((space.dim, space.dim), dtype=complex)
    L[space.d:, space.d:] = np.eye(space.p)
    return OpMatrix(L, "M+F", "M+F")


__all__ = [
    "OpMatrix", "shift_matrices", "mult_by_inner", "toeplitz_adjoint", "divide_by_inner",
    "intersect_with_phiH", "complement_basis", "project_in_M", "project_onto_defect",
    "constraint_matrix", "toeplitz_matrix", "weighted_lower_bound", "division_window",
    "distance_to_phiH",
]
