"""Symmetric 3x3 matrices and SPD elastic stiffness maps acting on them.

Symmetric matrices are stored by their six independent entries, so symmetry
is structural.  The stiffness map is stored as a 6x6 matrix in the
orthonormal (Mandel) basis of the symmetric matrices, in which the Frobenius
scalar product of two matrices is the plain dot product of their coordinate
vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class SymMatrix3:
    """Symmetric 3x3 real matrix, stored as (a11, a22, a33, a12, a13, a23)."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.shape != (6,):
            raise ValueError("SymMatrix3 needs 6 entries (a11, a22, a33, a12, a13, a23)")
        if not np.all(np.isfinite(e)):
            raise ValueError("SymMatrix3 entries must be finite")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def zero(cls) -> "SymMatrix3":
        return cls(np.zeros(6))

    @classmethod
    def identity(cls) -> "SymMatrix3":
        return cls(np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def diag(cls, d1: float, d2: float, d3: float) -> "SymMatrix3":
        return cls(np.array([d1, d2, d3, 0.0, 0.0, 0.0]))

    @classmethod
    def from_matrix(cls, m, tol: float = 1e-12) -> "SymMatrix3":
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("expected a 3x3 matrix")
        scale = max(1.0, float(np.max(np.abs(m))))
        if float(np.max(np.abs(m - m.T))) > tol * scale:
            raise ValueError("matrix is not symmetric")
        return cls(np.array([m[0, 0], m[1, 1], m[2, 2],
                             0.5 * (m[0, 1] + m[1, 0]),
                             0.5 * (m[0, 2] + m[2, 0]),
                             0.5 * (m[1, 2] + m[2, 1])]))

    @classmethod
    def sym_grad_e1(cls, u) -> "SymMatrix3":
        """Symmetric part of the rank-one gradient (u, 0, 0), i.e. sym(u x e1)."""
        u = np.asarray(u, dtype=float)
        return cls(np.array([u[0], 0.0, 0.0, 0.5 * u[1], 0.5 * u[2], 0.0]))

    @classmethod
    def from_mandel(cls, v) -> "SymMatrix3":
        v = np.asarray(v, dtype=float)
        return cls(np.array([v[0], v[1], v[2],
                             v[3] / _SQRT2, v[4] / _SQRT2, v[5] / _SQRT2]))

    def mandel(self) -> np.ndarray:
        """Coordinates in the orthonormal basis: (a11, a22, a33, sqrt2*a12, ...)."""
        e = self.entries
        return np.array([e[0], e[1], e[2],
                         _SQRT2 * e[3], _SQRT2 * e[4], _SQRT2 * e[5]])

    def as_matrix(self) -> np.ndarray:
        a11, a22, a33, a12, a13, a23 = self.entries
        return np.array([[a11, a12, a13], [a12, a22, a23], [a13, a23, a33]])

    def first_column(self) -> np.ndarray:
        e = self.entries
        return np.array([e[0], e[3], e[4]])

    def dot(self, other: "SymMatrix3") -> float:
        """Frobenius scalar product sum_ij a_ij b_ij."""
        return float(self.mandel() @ other.mandel())

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    def __add__(self, other: "SymMatrix3") -> "SymMatrix3":
        return SymMatrix3(np.asarray(self.entries) + np.asarray(other.entries))

    def __sub__(self, other: "SymMatrix3") -> "SymMatrix3":
        return SymMatrix3(np.asarray(self.entries) - np.asarray(other.entries))

    def __mul__(self, s: float) -> "SymMatrix3":
        return SymMatrix3(np.asarray(self.entries) * float(s))

    __rmul__ = __mul__

    def __neg__(self) -> "SymMatrix3":
        return SymMatrix3(-np.asarray(self.entries))


@dataclass(frozen=True)
class ElasticTensor:
    """Symmetric positive definite linear map on SymMatrix3.

    ``matrix`` is the 6x6 representation in the Mandel basis.  Symmetry of the
    entries is required exactly; positive definiteness is checked at
    construction with a Cholesky factorization, so invalid stiffness input is
    rejected early.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (6, 6):
            raise ValueError("ElasticTensor needs a 6x6 matrix in the Mandel basis")
        if not np.all(np.isfinite(m)):
            raise ValueError("ElasticTensor entries must be finite")
        if not np.array_equal(m, m.T):
            raise ValueError("ElasticTensor matrix must be exactly symmetric")
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError as exc:
            raise ValueError("ElasticTensor must be positive definite") from exc
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "ElasticTensor":
        return cls(np.eye(6))

    @classmethod
    def isotropic(cls, lam: float, mu: float) -> "ElasticTensor":
        """Isotropic map eps -> lam*tr(eps)*I + 2*mu*eps."""
        m = np.zeros((6, 6))
        m[:3, :3] = lam
        m[np.diag_indices(3)] += 2.0 * mu
        m[3:, 3:] = 2.0 * mu * np.eye(3)
        return cls(m)

    def apply(self, a: SymMatrix3) -> SymMatrix3:
        return SymMatrix3.from_mandel(self.matrix @ a.mandel())

    def apply_mandel(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)
