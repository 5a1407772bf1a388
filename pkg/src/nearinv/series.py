"""Truncated Taylor series on the unit disc and finite Blaschke products.

A :class:`TruncatedSeries` stores the coefficient block ``A_0 .. A_D`` of a
``C^n``-valued analytic function together with ``valid_degree``, the last
coefficient index that is still trusted after operations that lose degree
(backshift, division).  Everything downstream reads coefficients only up to
``valid_degree``.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TruncatedSeries:
    """Coefficient block of a vector-valued analytic function.

    Parameters
    ----------
    coeffs : ndarray, shape (D+1, n)
        Row ``m`` holds the Taylor coefficient ``A_m`` in ``C^n``.
    valid_degree : int, optional
        Highest trusted coefficient index; defaults to ``D``.
    """

    coeffs: np.ndarray
    valid_degree: int = -1

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError(f"coefficient block must have shape (D+1, n), got {c.shape}")
        object.__setattr__(self, "coeffs", _frozen(c))
        v = self.valid_degree
        if v == -1:
            v = c.shape[0] - 1
        if not 0 <= v <= c.shape[0] - 1:
            raise ValueError(f"valid_degree {v} outside [0, {c.shape[0] - 1}]")
        object.__setattr__(self, "valid_degree", int(v))

    # -- constructors -------------------------------------------------

    @classmethod
    def scalar(cls, coeffs: Sequence[complex], degree: int | None = None,
               valid_degree: int | None = None) -> "TruncatedSeries":
        """Scalar series from a coefficient list, zero-padded or cut at `degree`."""
        c = np.asarray(coeffs, dtype=complex).ravel()
        if degree is None:
            degree = len(c) - 1
        out = np.zeros(degree + 1, dtype=complex)
        k = min(len(c), degree + 1)
        out[:k] = c[:k]
        return cls(out[:, None], -1 if valid_degree is None else valid_degree)

    @classmethod
    def zeros(cls, degree: int, n: int = 1) -> "TruncatedSeries":
        return cls(np.zeros((degree + 1, n), dtype=complex))

    @classmethod
    def monomial(cls, k: int, degree: int, n: int = 1, component: int = 0,
                 value: complex = 1.0) -> "TruncatedSeries":
        c = np.zeros((degree + 1, n), dtype=complex)
        if k <= degree:
            c[k, component] = value
        return cls(c)

    @classmethod
    def from_flat(cls, flat: np.ndarray, n: int, valid_degree: int = -1) -> "TruncatedSeries":
        flat = np.asarray(flat, dtype=complex)
        return cls(flat.reshape(-1, n), valid_degree)

    # -- shape ----------------------------------------------------------

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    def flat(self) -> np.ndarray:
        """Coefficients flattened degree-major: index ``m * n + c``."""
        return self.coeffs.reshape(-1)

    def scalar_coeffs(self) -> np.ndarray:
        if self.n != 1:
            raise ValueError("not a scalar series")
        return self.coeffs[:, 0]

    def with_degree(self, degree: int) -> "TruncatedSeries":
        """Cut or zero-pad to working degree `degree`."""
        c = np.zeros((degree + 1, self.n), dtype=complex)
        k = min(degree, self.degree) + 1
        c[:k] = self.coeffs[:k]
        return TruncatedSeries(c, min(self.valid_degree, degree))

    def with_valid(self, valid_degree: int) -> "TruncatedSeries":
        return TruncatedSeries(self.coeffs, min(valid_degree, self.valid_degree))

    def window(self) -> np.ndarray:
        """Trusted coefficient rows ``0 .. valid_degree``."""
        return self.coeffs[: self.valid_degree + 1]

    # -- linear structure ----------------------------------------------

    def _check_compatible(self, other: "TruncatedSeries"):
        if self.coeffs.shape != other.coeffs.shape:
            raise ValueError(f"shape mismatch {self.coeffs.shape} vs {other.coeffs.shape}")

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check_compatible(other)
        return TruncatedSeries(self.coeffs + other.coeffs,
                               min(self.valid_degree, other.valid_degree))

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check_compatible(other)
        return TruncatedSeries(self.coeffs - other.coeffs,
                               min(self.valid_degree, other.valid_degree))

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries(-self.coeffs, self.valid_degree)

    def __mul__(self, scalar: complex) -> "TruncatedSeries":
        if isinstance(scalar, TruncatedSeries):
            return series_multiply(self, scalar)
        return TruncatedSeries(complex(scalar) * self.coeffs, self.valid_degree)

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "TruncatedSeries":
        return TruncatedSeries(self.coeffs / complex(scalar), self.valid_degree)

    # -- analysis ---------------------------------------------------------

    def norm2(self) -> float:
        """Hardy-space coefficient norm over the trusted window."""
        return float(np.linalg.norm(self.window()))

    def evaluate(self, w: complex) -> np.ndarray:
        return evaluate(self, w)

    def allclose(self, other: "TruncatedSeries", atol: float = 1e-12) -> bool:
        k = min(self.valid_degree, other.valid_degree) + 1
        return bool(np.allclose(self.coeffs[:k], other.coeffs[:k], rtol=0, atol=atol))

    def __repr__(self):
        return (f"TruncatedSeries(degree={self.degree}, n={self.n}, "
                f"valid_degree={self.valid_degree})")


def series_multiply(f: TruncatedSeries, g: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product of a scalar series `f` with `g`, truncated at `g`'s degree.

    Every output coefficient ``m`` only needs input coefficients ``<= m``, so
    the trusted window is the smaller of the two inputs' windows.
    """
    if f.n != 1:
        raise ValueError("left factor must be scalar-valued")
    D = g.degree
    fc = f.with_degree(D)
    a = fc.coeffs[:, 0]
    out = np.empty_like(g.coeffs)
    for c in range(g.n):
        out[:, c] = np.convolve(a, g.coeffs[:, c])[: D + 1]
    return TruncatedSeries(out, min(fc.valid_degree, g.valid_degree))


def evaluate(f: TruncatedSeries, w: complex) -> np.ndarray:
    """Horner evaluation of the coefficient block at ``|w| < 1``."""
    w = complex(w)
    if abs(w) >= 1:
        raise ValueError(f"evaluation point {w} is not inside the unit disc")
    acc = np.zeros(f.n, dtype=complex)
    for row in f.coeffs[::-1]:
        acc = acc * w + row
    return acc


@dataclass(frozen=True, eq=False)
class InnerFunction:
    """Finite Blaschke product ``phase * prod b_a(z)``.

    Each factor is ``b_0(z) = z`` and ``b_a(z) = (|a|/a) (a - z) / (1 - conj(a) z)``
    for ``a != 0``, so every factor is positive at the origin when ``a != 0``.
    """

    zeros: tuple = ()
    phase: complex = 1.0

    def __post_init__(self):
        zs = tuple(complex(a) for a in self.zeros)
        for a in zs:
            if not abs(a) < 1:
                raise ValueError(f"Blaschke zero {a} must lie strictly inside the unit disc")
        ph = complex(self.phase)
        if abs(abs(ph) - 1) > 1e-14:
            raise ValueError(f"phase {ph} is not unimodular")
        object.__setattr__(self, "zeros", zs)
        object.__setattr__(self, "phase", ph)

    @classmethod
    def z_power(cls, s: int = 1) -> "InnerFunction":
        return cls((0.0,) * s)

    @property
    def num_zeros(self) -> int:
        return len(self.zeros)

    def vanishes_at_zero(self) -> bool:
        return any(a == 0 for a in self.zeros)

    @property
    def order_at_zero(self) -> int:
        return sum(1 for a in self.zeros if a == 0)

    def is_z(self) -> bool:
        return self.zeros == (0j,) and self.phase == 1

    def zero_multiplicities(self, tol: float = 1e-12) -> list[tuple[complex, int]]:
        """Distinct zeros with their multiplicities."""
        groups: list[list] = []
        for a in self.zeros:
            for g in groups:
                if abs(g[0] - a) <= tol:
                    g[1] += 1
                    break
            else:
                groups.append([a, 1])
        return [(a, m) for a, m in groups]

    def evaluate(self, w: complex) -> complex:
        """Exact value; ``|w| <= 1`` allowed (unimodular on the circle)."""
        w = complex(w)
        if abs(w) > 1 + 1e-15:
            raise ValueError(f"{w} lies outside the closed unit disc")
        val = self.phase
        for a in self.zeros:
            if a == 0:
                val *= w
            else:
                val *= _unit_conj(a) * (a - w) / (1 - a.conjugate() * w)
        return val

    def __call__(self, w: complex) -> complex:
        return self.evaluate(w)

    def taylor(self, degree: int) -> TruncatedSeries:
        return blaschke_taylor(self, degree)

    def to_json(self) -> dict:
        return {"zeros": [[a.real, a.imag] for a in self.zeros],
                "phase": [self.phase.real, self.phase.imag]}


def _unit_conj(a: complex) -> complex:
    # |a|/a from the argument: stays unimodular even for subnormal a
    return cmath.exp(-1j * cmath.phase(a))


def blaschke_taylor(phi: InnerFunction, degree: int) -> TruncatedSeries:
    """Taylor coefficients of `phi` at the origin up to `degree`.

    Coefficients of an inner function are bounded by 1 in modulus, hence
    ``|phi(w) - series(w)| <= |w|**(degree+1) / (1 - |w|)``.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    acc = np.zeros(degree + 1, dtype=complex)
    acc[0] = phi.phase
    k = np.arange(degree + 1)
    for a in phi.zeros:
        if a == 0:
            fac = np.zeros(degree + 1, dtype=complex)
            if degree >= 1:
                fac[1] = 1.0
        else:
            geo = a.conjugate() ** k
            fac = a * geo
            fac[1:] -= geo[:-1]
            fac *= _unit_conj(a)
        acc = np.convolve(acc, fac)[: degree + 1]
    return TruncatedSeries(acc[:, None])


def blaschke_tail_bound(w: complex, degree: int) -> float:
    r = abs(w)
    return r ** (degree + 1) / (1 - r)


def compose_with_inner(q: TruncatedSeries, phi: InnerFunction) -> TruncatedSeries:
    """``sum_k q_k phi^k`` truncated at ``q.degree``; requires ``phi(0) = 0``.

    With ``phi(0) = 0`` the power ``phi^k`` starts at ``z^(k * ord)``, so the
    result is trusted up to ``(valid + 1) * ord - 1`` (capped at the degree).
    """
    if not phi.vanishes_at_zero():
        raise ValueError("composition requires an inner function vanishing at 0")
    if q.n != 1:
        raise ValueError("composition is defined for scalar series")
    D = q.degree
    p = blaschke_taylor(phi, D).coeffs[:, 0]
    qc = q.coeffs[:, 0]
    # Horner in phi: ((q_D phi + q_{D-1}) phi + ...) + q_0
    acc = np.zeros(D + 1, dtype=complex)
    for c in qc[::-1]:
        acc = np.convolve(acc, p)[: D + 1]
        acc[0] += c
    valid = min(D, (q.valid_degree + 1) * phi.order_at_zero - 1)
    return TruncatedSeries(acc[:, None], valid)


def phi_powers(phi: InnerFunction, degree: int, count: int) -> list[TruncatedSeries]:
    """``[phi^0, phi^1, ..., phi^(count-1)]`` truncated at `degree`."""
    p = blaschke_taylor(phi, degree)
    out = [TruncatedSeries.monomial(0, degree)]
    for _ in range(1, count):
        out.append(series_multiply(p, out[-1]))
    return out


def stack_components(parts: Iterable[TruncatedSeries]) -> TruncatedSeries:
    """Join scalar series into one vector-valued series."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to stack")
    valid = min(p.valid_degree for p in parts)
    return TruncatedSeries(np.hstack([p.coeffs for p in parts]), valid)


def phase_normalize(coeffs: np.ndarray, tol: float = 1e-12) -> complex:
    """Unimodular factor making the first non-negligible entry real positive."""
    flat = np.asarray(coeffs).reshape(-1)
    scale = np.max(np.abs(flat)) if flat.size else 0.0
    if scale == 0:
        return 1.0
    for v in flat:
        if abs(v) > tol * scale:
            return abs(v) / v
    return 1.0


def unimodular_ratio(a: TruncatedSeries, b: TruncatedSeries) -> complex:
    """Best unimodular ``u`` with ``a ~ u b`` (least squares on the windows)."""
    k = min(a.valid_degree, b.valid_degree) + 1
    x = a.coeffs[:k].reshape(-1)
    y = b.coeffs[:k].reshape(-1)
    ip = np.vdot(y, x)
    return ip / abs(ip) if ip != 0 else 1.0 + 0j


__all__ = [
    "TruncatedSeries", "InnerFunction", "series_multiply", "blaschke_taylor",
    "blaschke_tail_bound", "compose_with_inner", "evaluate", "phi_powers",
    "stack_components", "phase_normalize", "unimodular_ratio",
]
