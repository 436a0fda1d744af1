"""Linear operators for the two solver formulations and design-matrix diagnostics.

Two designs appear throughout:

* ``DesignX`` -- lower-triangular matrix of ones. ``X @ v`` is the prefix sum
  of ``v``, so a piecewise-constant slope vector maps to a piecewise-linear
  mean vector.
* ``DesignZ`` -- column 1 is all ones; column j >= 2 ramps 1, 2, 3, ...
  starting at row j. ``Z @ b`` reconstructs the mean vector from
  (level, first slope, slope changes).

Both expose matrix-free products; dense materialization is allowed at desk
scale only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DENSE_LIMIT = 2000


class InvalidDimensionError(ValueError):
    pass


class SingularDesignError(np.linalg.LinAlgError):
    pass


class InvalidIndexError(IndexError):
    pass


def second_diff(mu: np.ndarray) -> np.ndarray:
    """Second differences mu[t] - 2*mu[t-1] + mu[t-2], one per t in {3..n} (1-based).

    Entry k (0-based) is the slope change located at time k+2 (1-based);
    affine inputs map to exactly zero.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or mu.size < 3:
        raise InvalidDimensionError(f"need a 1-d vector of length >= 3, got shape {mu.shape}")
    return mu[2:] + mu[:-2] - 2.0 * mu[1:-1]


def second_diff_adjoint(g: np.ndarray, n: int) -> np.ndarray:
    """Adjoint of :func:`second_diff`: maps length n-2 to length n."""
    g = np.asarray(g, dtype=float)
    if g.size != n - 2:
        raise InvalidDimensionError(f"expected length {n - 2}, got {g.size}")
    out = np.zeros(n)
    out[:-2] += g
    out[1:-1] -= 2.0 * g
    out[2:] += g
    return out


@dataclass(frozen=True)
class DesignX:
    """Cumulative-sum operator: x_tj = 1 for j <= t, else 0."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidDimensionError("n must be >= 1")

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.size != self.n:
            raise InvalidDimensionError(f"expected length {self.n}, got {v.size}")
        return np.cumsum(v)

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.size != self.n:
            raise InvalidDimensionError(f"expected length {self.n}, got {v.size}")
        return np.cumsum(v[::-1])[::-1]

    def dense(self) -> np.ndarray:
        if self.n > DENSE_LIMIT:
            raise InvalidDimensionError(f"dense X capped at n={DENSE_LIMIT}")
        return np.tril(np.ones((self.n, self.n)))


@dataclass(frozen=True)
class DesignZ:
    """Reconstruction operator: z_t1 = 1; z_tj = t - j + 1 for 2 <= j <= t; else 0."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidDimensionError("n must be >= 1")

    def matvec(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.size != self.n:
            raise InvalidDimensionError(f"expected length {self.n}, got {b.size}")
        # mu_t = b_1 + sum_{j<=t} (t-j+1) b_j over j >= 2: a double prefix sum.
        out = np.cumsum(np.cumsum(b))
        out -= np.arange(self.n) * b[0]
        return out

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.size != self.n:
            raise InvalidDimensionError(f"expected length {self.n}, got {v.size}")
        suf = np.cumsum(v[::-1])[::-1]
        out = np.cumsum(suf[::-1])[::-1]
        out[0] = suf[0]
        return out

    def encode(self, mu: np.ndarray) -> np.ndarray:
        """Exact inverse of :meth:`matvec`: (mu_1, mu_2 - mu_1, second differences)."""
        mu = np.asarray(mu, dtype=float)
        if mu.size != self.n:
            raise InvalidDimensionError(f"expected length {self.n}, got {mu.size}")
        b = np.empty(self.n)
        b[0] = mu[0]
        if self.n >= 2:
            b[1] = mu[1] - mu[0]
        if self.n >= 3:
            b[2:] = second_diff(mu)
        return b

    def column_norms_sq(self) -> np.ndarray:
        """||z_j||^2 in closed form: n for j=1, sum of 1..(n-j+1) squares for j>=2."""
        n = self.n
        out = np.empty(n)
        out[0] = float(n)
        m = np.arange(n - 1, 0, -1, dtype=float)  # n-j+1 for j=2..n
        out[1:] = m * (m + 1) * (2 * m + 1) / 6.0
        return out

    def dense(self) -> np.ndarray:
        if self.n > DENSE_LIMIT:
            raise InvalidDimensionError(f"dense Z capped at n={DENSE_LIMIT}")
        n = self.n
        Z = np.zeros((n, n))
        Z[:, 0] = 1.0
        for j in range(2, n + 1):
            Z[j - 1:, j - 1] = np.arange(1, n - j + 2)
        return Z


def build_design_X(n: int) -> DesignX:
    return DesignX(n)


def build_design_Z(n: int) -> DesignZ:
    return DesignZ(n)


def spectral_check(n: int) -> tuple[float, float]:
    """(smallest eigenvalue of Z'Z/n, max row energy z_t'z_t/n).

    Dense symmetric eigensolve; intended for desk-scale diagnostics only.
    """
    if n < 2:
        raise InvalidDimensionError("n must be >= 2")
    Z = DesignZ(n).dense()
    rho1 = float(np.linalg.eigvalsh(Z.T @ Z / n)[0])
    max_row_energy = float(np.max(np.einsum("ij,ij->i", Z, Z)) / n)
    return rho1, max_row_energy


@dataclass(frozen=True)
class IrrepSystem:
    """Rows of M = Z2' Z1 (Z1'Z1)^-1, one per excluded column of Z."""

    n: int
    z1_columns: tuple[int, ...]  # 1-based: (1, 2) + kink columns
    z2_columns: tuple[int, ...]  # 1-based, ascending
    M: np.ndarray


def irrepresentable_vectors(n: int, kink_columns) -> IrrepSystem:
    """Cross-correlation rows used by the componentwise sign-recovery condition.

    ``kink_columns`` are 1-based column indices of Z in {3..n}; columns 1 and 2
    (the affine part) always belong to the retained block Z1.
    """
    kinks = sorted(int(c) for c in kink_columns)
    for c in kinks:
        if not 3 <= c <= n:
            raise InvalidIndexError(f"kink column {c} outside 3..{n}")
    if len(set(kinks)) != len(kinks):
        raise InvalidIndexError("duplicate kink columns")
    Z = DesignZ(n).dense()
    z1 = [1, 2] + kinks
    z2 = [j for j in range(1, n + 1) if j not in z1]
    Z1 = Z[:, [j - 1 for j in z1]]
    Z2 = Z[:, [j - 1 for j in z2]]
    G = Z1.T @ Z1
    try:
        M = np.linalg.solve(G, Z1.T @ Z2).T
    except np.linalg.LinAlgError as e:
        raise SingularDesignError(str(e)) from e
    return IrrepSystem(n=n, z1_columns=tuple(z1), z2_columns=tuple(z2), M=M)


def irrepresentable_holds(M: np.ndarray, s1) -> tuple[bool, list[tuple[int, float]]]:
    """Strict componentwise test |M @ s1| < 1.

    Returns (holds, violations); each violation is (0-based row of M, value).
    Equality |value| = 1 counts as a violation.
    """
    M = np.asarray(M, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    if s1.ndim != 1 or M.ndim != 2 or M.shape[1] != s1.size:
        raise InvalidDimensionError(f"shape mismatch: M {M.shape} vs s1 {s1.shape}")
    if not np.all(np.isin(s1, (-1.0, 1.0))):
        raise ValueError("s1 entries must be -1 or +1")
    v = M @ s1
    bad = [(int(i), float(v[i])) for i in np.flatnonzero(np.abs(v) >= 1.0 - 1e-12)]
    return (len(bad) == 0), bad
