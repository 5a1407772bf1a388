"""Ambient weighted-coefficient spaces and the spaces contractively contained in them.

Coordinates
-----------
An ambient vector is a coefficient block flattened degree-major (index
``m * n + c``).  A contractive space ``M`` is stored extrinsically: a basis
matrix ``B`` (ambient coordinates, one column per basis element) plus a Gram
matrix ``G`` with ``G[i, j] = <b_j, b_i>_M``, so that
``<x, y>_M = y^H G x`` for coordinate vectors ``x, y``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import SpaceError
from .series import TruncatedSeries

HERMITIAN_TOL = 1e-12
CONTRACTIVE_FLOOR = -1e-10
INDEPENDENCE_TOL = 1e-10
RANK_TOL = 1e-9
MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class AmbientSpace:
    """Weighted Hardy-type space ``<f, g> = sum_m w_m <A_m, B_m>`` at degree D."""

    n: int
    degree: int
    weights: np.ndarray
    kind: str = "custom"
    alpha: float | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if self.n < 1:
            raise SpaceError("component count must be >= 1", "ambient.components")
        if self.degree < 0:
            raise SpaceError("degree must be >= 0", "ambient.degree")
        if w.shape != (self.degree + 1,):
            raise SpaceError(f"expected {self.degree + 1} weights, got {w.size}", "ambient.weights")
        if not np.all(w > 0):
            raise SpaceError("weights must be positive", "ambient.weights")
        if np.any(np.diff(w) < 0):
            raise SpaceError("weights must be nondecreasing (||h|| <= ||zh|| fails otherwise)",
                             "ambient.weights")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def hardy(cls, degree: int, n: int = 1) -> "AmbientSpace":
        return cls(n, degree, np.ones(degree + 1), "hardy")

    @classmethod
    def dirichlet(cls, alpha: float, degree: int, n: int = 1) -> "AmbientSpace":
        if not 0 <= alpha <= 1:
            raise SpaceError(f"alpha={alpha} outside [0, 1]; weights (m+1)^alpha must be "
                             "nondecreasing", "ambient.alpha")
        w = (np.arange(degree + 1) + 1.0) ** alpha
        return cls(n, degree, w, "dirichlet_alpha", float(alpha))

    @property
    def dim(self) -> int:
        return (self.degree + 1) * self.n

    @property
    def flat_weights(self) -> np.ndarray:
        return np.repeat(self.weights, self.n)

    def check_series(self, f: TruncatedSeries, path: str = "series") -> TruncatedSeries:
        if f.n != self.n:
            raise SpaceError(f"expected {self.n} components, got {f.n}", path)
        if f.degree != self.degree:
            f = f.with_degree(self.degree)
        return f

    def inner(self, f: TruncatedSeries, g: TruncatedSeries) -> complex:
        k = min(f.valid_degree, g.valid_degree) + 1
        w = self.weights[:k, None]
        return complex(np.sum(w * f.coeffs[:k] * np.conj(g.coeffs[:k])))

    def norm(self, f: TruncatedSeries) -> float:
        return float(np.sqrt(max(self.inner(f, f).real, 0.0)))

    def basis_matrix(self, basis: Sequence[TruncatedSeries]) -> np.ndarray:
        cols = [self.check_series(b, f"basis[{i}]").flat() for i, b in enumerate(basis)]
        if not cols:
            return np.zeros((self.dim, 0), dtype=complex)
        return np.column_stack(cols)

    def gram(self, B: np.ndarray) -> np.ndarray:
        """Ambient Gram ``B^H W B`` of a basis matrix."""
        return B.conj().T @ (self.flat_weights[:, None] * B)

    def series(self, flat: np.ndarray, valid_degree: int = -1) -> TruncatedSeries:
        return TruncatedSeries.from_flat(flat, self.n, valid_degree)

    def window_rows(self, valid_degree: int) -> int:
        """Number of flattened rows covering coefficients ``0 .. valid_degree``."""
        return (valid_degree + 1) * self.n


def _hermitian_checked(G: np.ndarray, path: str) -> np.ndarray:
    G = np.array(G, dtype=complex)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise SpaceError(f"gram must be square, got shape {G.shape}", path)
    scale = max(1.0, float(np.linalg.norm(G, 2))) if G.size else 1.0
    if G.size and np.max(np.abs(G - G.conj().T)) > HERMITIAN_TOL * scale:
        raise SpaceError("gram matrix is not Hermitian", path)
    return (G + G.conj().T) / 2


def m_orthonormalize(G: np.ndarray, X: np.ndarray, tol: float = RANK_TOL,
                     limit: int | None = None) -> np.ndarray:
    """Modified Gram-Schmidt (twice) of the columns of `X` in the metric `G`.

    Columns whose residual falls below ``tol`` times their original norm are
    dropped, so the output is an orthonormal basis of the span, in input order.
    """
    out: list[np.ndarray] = []
    for j in range(X.shape[1]):
        v = X[:, j].astype(complex)
        n0 = np.sqrt(max((v.conj() @ G @ v).real, 0.0))
        if n0 == 0:
            continue
        for _ in range(2):
            for q in out:
                v = v - (q.conj() @ G @ v) * q
        nv = np.sqrt(max((v.conj() @ G @ v).real, 0.0))
        if nv <= tol * n0:
            continue
        out.append(v / nv)
        if limit is not None and len(out) >= limit:
            break
    if not out:
        return np.zeros((X.shape[0], 0), dtype=complex)
    return np.column_stack(out)


class ContractiveSpace:
    """Finite-dimensional Hilbert space ``M`` sitting contractively inside an ambient.

    Use :meth:`from_gram`, :meth:`from_injection` or :meth:`with_ambient_metric`.
    All invariants are validated at construction and the object is not mutated
    afterwards.
    """

    def __init__(self, ambient: AmbientSpace, basis: Sequence[TruncatedSeries],
                 gram: np.ndarray, injection: np.ndarray | None = None,
                 path: str = "space"):
        self.ambient = ambient
        basis = tuple(ambient.check_series(b, f"{path}.basis[{i}]") for i, b in enumerate(basis))
        if not basis:
            raise SpaceError("space needs at least one basis element", f"{path}.basis")
        self.basis = basis
        B = ambient.basis_matrix(basis)
        s = np.linalg.svd(B, compute_uv=False)
        if s[-1] <= INDEPENDENCE_TOL * s[0]:
            raise SpaceError(f"basis is numerically dependent (sigma_min/sigma_max = "
                             f"{s[-1] / s[0]:.2e})", f"{path}.basis")
        G = _hermitian_checked(gram, f"{path}.metric")
        if G.shape[0] != len(basis):
            raise SpaceError(f"gram is {G.shape[0]}x{G.shape[0]} but basis has "
                             f"{len(basis)} elements", f"{path}.metric")
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            raise SpaceError("gram matrix is not positive definite", f"{path}.metric") from None
        defect = np.linalg.eigvalsh(G - ambient.gram(B))
        self.containment_margin = float(defect[0])
        if defect[0] < CONTRACTIVE_FLOOR * max(1.0, float(np.linalg.norm(G, 2))):
            raise SpaceError(f"not contractively contained: min eigenvalue of G - B*WB is "
                             f"{defect[0]:.3e}", f"{path}.metric")
        B.setflags(write=False)
        G.setflags(write=False)
        L.setflags(write=False)
        self.basis_matrix = B
        self.gram = G
        self.chol = L
        self.injection = injection

    # -- constructors --------------------------------------------------------

    @classmethod
    def from_gram(cls, ambient, basis, gram, path: str = "space") -> "ContractiveSpace":
        return cls(ambient, basis, gram, path=path)

    @classmethod
    def from_injection(cls, ambient, basis, U, path: str = "space") -> "ContractiveSpace":
        basis = [ambient.check_series(b) for b in basis]
        G = gram_of_injection(U, basis, ambient)
        inj = None if callable(U) else np.asarray(U, dtype=complex)
        return cls(ambient, basis, G, injection=inj, path=path)

    @classmethod
    def with_ambient_metric(cls, ambient, basis) -> "ContractiveSpace":
        basis = [ambient.check_series(b) for b in basis]
        return cls(ambient, basis, ambient.gram(ambient.basis_matrix(basis)))

    # -- geometry --------------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.basis)

    def inner(self, x, y) -> complex:
        return inner_product_M(self, x, y)

    def norm(self, x) -> float:
        return float(np.sqrt(max(self.inner(x, x).real, 0.0)))

    def element(self, x: np.ndarray) -> TruncatedSeries:
        x = np.asarray(x, dtype=complex)
        valid = min(b.valid_degree for b in self.basis)
        return self.ambient.series(self.basis_matrix @ x, valid)

    def coords(self, f: TruncatedSeries, window: int | None = None) -> tuple[np.ndarray, float]:
        """Least-squares coordinates of `f` and the relative residual on the window."""
        return membership(self.ambient, self.basis_matrix, f, window)

    def to_coords(self, f, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        if not isinstance(f, TruncatedSeries):
            return np.asarray(f, dtype=complex)
        x, rel = self.coords(f)
        if rel > tol:
            raise SpaceError(f"series is not a member of the space (relative residual {rel:.2e})")
        return x

    def scaled(self, s: float) -> "ContractiveSpace":
        return ContractiveSpace(self.ambient, self.basis, s * self.gram)

    def solve_gram(self, rhs: np.ndarray) -> np.ndarray:
        return sla.cho_solve((self.chol, True), rhs)


def membership(ambient: AmbientSpace, B: np.ndarray, f: TruncatedSeries,
               window: int | None = None) -> tuple[np.ndarray, float]:
    """Solve ``B y ~ f`` on coefficient rows ``0 .. window``; return ``(y, rel_residual)``."""
    f = ambient.check_series(f)
    if window is None:
        window = f.valid_degree
    window = min(window, f.valid_degree)
    rows = ambient.window_rows(window)
    sw = np.sqrt(ambient.flat_weights[:rows])
    A = sw[:, None] * B[:rows]
    b = sw * f.flat()[:rows]
    bn = np.linalg.norm(b)
    if B.shape[1] == 0:
        return np.zeros(0, dtype=complex), (0.0 if bn == 0 else 1.0)
    y, *_ = np.linalg.lstsq(A, b, rcond=None)
    if bn == 0:
        return y, 0.0
    return y, float(np.linalg.norm(A @ y - b) / bn)


def inner_product_M(M: ContractiveSpace, x, y) -> complex:
    """``<x, y>_M``; arguments are M-coordinates or member series."""
    x = M.to_coords(x)
    y = M.to_coords(y)
    if x.shape != (M.dim,) or y.shape != (M.dim,):
        raise SpaceError(f"coordinate vectors must have length {M.dim}")
    return complex(y.conj() @ M.gram @ x)


def _apply_injection(U, f: TruncatedSeries, ambient: AmbientSpace) -> np.ndarray:
    if callable(U):
        return ambient.check_series(U(f)).flat()
    U = np.asarray(U, dtype=complex)
    v = f.flat().copy()
    k = U.shape[0]
    if U.shape != (k, k) or k > v.size:
        raise SpaceError(f"injection matrix must be square of size <= {v.size}, got {U.shape}",
                         "space.metric.injection")
    v[:k] = U @ v[:k]
    return v


def gram_of_injection(U, basis: Sequence[TruncatedSeries], ambient: AmbientSpace) -> np.ndarray:
    """Gram matrix of ``<f, g>_M := <U f, U g>_H`` on `basis`.

    `U` is a callable on series or a square matrix acting on the leading
    flattened ambient coordinates (identity on the rest).
    """
    UB = np.column_stack([_apply_injection(U, b, ambient) for b in basis])
    G = ambient.gram(UB)
    G = (G + G.conj().T) / 2
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= 1e-12 * max(ev[-1], 1e-300):
        raise SpaceError("injection is not injective on span(basis)", "space.metric.injection")
    return G


def kernel_vector(M: ContractiveSpace, w: complex) -> np.ndarray:
    """Reproducing kernel of `M` at `w`: column ``c`` reproduces component ``c``.

    Returns M-coordinates of shape ``(dim, n)`` with ``<h, k[:, c]>_M = h_c(w)``.
    """
    w = complex(w)
    if abs(w) >= 1:
        raise ValueError(f"{w} is not inside the unit disc")
    cond = np.linalg.cond(M.gram)
    if cond > 1e14:
        raise SpaceError(f"gram matrix is ill-conditioned (cond ~ {cond:.2e})")
    E = evaluation_matrix(M.ambient, M.basis_matrix, w)
    return M.solve_gram(E.conj().T)


def evaluation_matrix(ambient: AmbientSpace, B: np.ndarray, w: complex,
                      derivative: int = 0) -> np.ndarray:
    """``n x d`` matrix of the `derivative`-th derivative of each basis column at `w`."""
    D, n = ambient.degree, ambient.n
    m = np.arange(D + 1)
    if derivative == 0:
        row = np.power(complex(w), m)
    else:
        fall = np.ones(D + 1)
        for j in range(derivative):
            fall = fall * (m - j)
        expo = np.maximum(m - derivative, 0)
        row = fall * np.power(complex(w), expo)
        row[m < derivative] = 0
    C = np.kron(row[None, :], np.eye(n))
    return C @ B


def eval_adjoint_basis(M: ContractiveSpace, tol: float = RANK_TOL) -> list[TruncatedSeries]:
    """Independent members of ``{E_0^* e_i}``; they span ``M minus (M cap zH)``.

    Their number is at most the component count.  An empty list means every
    element of `M` vanishes at the origin.
    """
    K = kernel_vector(M, 0.0)
    scale = max(np.sqrt(max((K[:, i].conj() @ M.gram @ K[:, i]).real, 0.0))
                for i in range(K.shape[1]))
    keep: list[np.ndarray] = []
    Q = np.zeros((M.dim, 0), dtype=complex)
    for i in range(K.shape[1]):
        v = K[:, i]
        nv = np.sqrt(max((v.conj() @ M.gram @ v).real, 0.0))
        if nv <= tol * scale:
            continue
        cand = m_orthonormalize(M.gram, np.column_stack([Q, v]), tol)
        if cand.shape[1] > Q.shape[1]:
            Q = cand
            keep.append(v)
    return [M.element(v) for v in keep]


class DefectSpace:
    """Finite-dimensional ambient subspace ``F``, orthonormalized in the ambient metric."""

    def __init__(self, ambient: AmbientSpace, basis: Sequence[TruncatedSeries] = (),
                 path: str = "defect"):
        self.ambient = ambient
        self.input_basis = tuple(ambient.check_series(b, f"{path}.basis[{i}]")
                                 for i, b in enumerate(basis))
        raw = ambient.basis_matrix(list(basis)) if basis else np.zeros((ambient.dim, 0), complex)
        W = np.diag(ambient.flat_weights)
        E = m_orthonormalize(W, raw, INDEPENDENCE_TOL)
        if E.shape[1] != raw.shape[1]:
            raise SpaceError("defect basis is linearly dependent", f"{path}.basis")
        E.setflags(write=False)
        self.basis_matrix = E
        valid = min((b.valid_degree for b in basis), default=ambient.degree)
        self.basis = tuple(ambient.series(E[:, j], valid) for j in range(E.shape[1]))

    @property
    def dim(self) -> int:
        return self.basis_matrix.shape[1]


class SumSpace:
    """``M (+) F`` with ``||h + f||^2 = ||h||_M^2 + ||f||_H^2``.

    Coordinates are ``(x_M, x_F)``; the Gram matrix is block diagonal.  With an
    empty ``F`` this is just ``M``.
    """

    def __init__(self, m: ContractiveSpace, f: DefectSpace | None = None,
                 angle_tol: float = 1e-8):
        if f is None:
            f = DefectSpace(m.ambient)
        if f.ambient.dim != m.ambient.dim:
            raise SpaceError("defect space lives in a different ambient", "defect")
        self.m = m
        self.f = f
        self.d = m.dim
        self.p = f.dim
        self.ambient = m.ambient
        self.min_angle = np.pi / 2
        if self.p:
            sw = np.sqrt(m.ambient.flat_weights)[:, None]
            ang = sla.subspace_angles(sw * m.basis_matrix, sw * f.basis_matrix)
            self.min_angle = float(np.min(ang))
            if self.min_angle <= angle_tol:
                raise SpaceError(f"M and F intersect (smallest principal angle "
                                 f"{self.min_angle:.2e})", "defect")
        self.basis_matrix = np.hstack([m.basis_matrix, f.basis_matrix])
        G = np.zeros((self.d + self.p, self.d + self.p), dtype=complex)
        G[: self.d, : self.d] = m.gram
        G[self.d:, self.d:] = np.eye(self.p)
        self.gram = G
        self.chol = np.linalg.cholesky(G)

    @property
    def dim(self) -> int:
        return self.d + self.p

    def inner(self, x: np.ndarray, y: np.ndarray) -> complex:
        return complex(np.asarray(y).conj() @ self.gram @ np.asarray(x))

    def norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(x, x).real, 0.0)))

    def element(self, x: np.ndarray) -> TruncatedSeries:
        valid = min([b.valid_degree for b in self.m.basis] + [b.valid_degree for b in self.f.basis])
        return self.ambient.series(self.basis_matrix @ np.asarray(x, dtype=complex), valid)

    def embed_m(self, x_m: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim, dtype=complex)
        out[: self.d] = x_m
        return out

    def embed_f(self, x_f: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim, dtype=complex)
        out[self.d:] = x_f
        return out


def as_sum_space(space) -> SumSpace:
    if isinstance(space, SumSpace):
        return space
    if isinstance(space, ContractiveSpace):
        return SumSpace(space)
    raise TypeError(f"expected ContractiveSpace or SumSpace, got {type(space).__name__}")


__all__ = [
    "AmbientSpace", "ContractiveSpace", "DefectSpace", "SumSpace", "as_sum_space",
    "inner_product_M", "gram_of_injection", "kernel_vector", "eval_adjoint_basis",
    "evaluation_matrix", "membership", "m_orthonormalize",
]
