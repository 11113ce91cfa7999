"""Core types and primitive operations for SO(n).

Points are n x n rotation matrices (orthogonal, determinant +1), tangent
vectors at a point T are matrices X = W T with W skew-symmetric, and the
metric is the Frobenius inner product of the skew coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissionError, BaseMismatch, SingularInput

DEFAULT_ORTHO_TOL = 1e-10

# Taylor degree and scaling threshold for the skew matrix exponential.
# Degree 13 at spectral norm <= 0.5 keeps the truncation error below 1e-15.
_EXPM_THETA = 0.5
_EXPM_DEGREE = 13


def _as_square(entries, name: str) -> np.ndarray:
    a = np.asarray(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise AdmissionError(f"{name} must be a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise AdmissionError(f"{name} must be at least 1x1")
    if not np.all(np.isfinite(a)):
        raise AdmissionError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class RotationMatrix:
    """An n x n matrix certified to lie on SO(n) within `ortho_tol`.

    Invariants checked at construction:
      * ||T^t T - I||_F <= ortho_tol
      * det(T) >= 0.5 (the +1 determinant branch)
    """

    entries: np.ndarray
    ortho_tol: float = DEFAULT_ORTHO_TOL

    def __post_init__(self):
        a = _as_square(self.entries, "rotation matrix")
        if self.ortho_tol < 0:
            raise AdmissionError("ortho_tol must be nonnegative")
        n = a.shape[0]
        residual = np.linalg.norm(a.T @ a - np.eye(n))
        if residual > self.ortho_tol:
            raise AdmissionError(
                f"orthogonality residual {residual:.3e} exceeds tolerance "
                f"{self.ortho_tol:.3e}"
            )
        det = np.linalg.det(a)
        if det < 0.5:
            raise AdmissionError(f"determinant {det:.6f} is not on the +1 branch")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, n: int) -> "RotationMatrix":
        return cls(np.eye(n))


@dataclass(frozen=True)
class SkewMatrix:
    """An n x n real skew-symmetric matrix (tangent coordinate W)."""

    entries: np.ndarray

    def __post_init__(self):
        a = _as_square(self.entries, "skew matrix")
        norm = np.linalg.norm(a)
        if np.linalg.norm(a + a.T) > 1e-12 * max(1.0, norm):
            raise AdmissionError("matrix is not skew-symmetric within tolerance")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def zero(cls, n: int) -> "SkewMatrix":
        return cls(np.zeros((n, n)))

    def norm(self) -> float:
        """Frobenius norm, i.e. the metric norm of the tangent vector W T."""
        return float(np.linalg.norm(self.entries))


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector X = W T at the base point T."""

    base: RotationMatrix
    coord: SkewMatrix

    def __post_init__(self):
        if self.base.n != self.coord.n:
            raise AdmissionError(
                f"base dimension {self.base.n} != coordinate dimension {self.coord.n}"
            )

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def matrix(self) -> np.ndarray:
        """The ambient matrix X = W T."""
        return self.coord.entries @ self.base.entries


# --------------------------------------------------------------------------
# Skew coordinate helpers: the free entries of a skew matrix are the strictly
# upper ones, ordered lexicographically by (row, col).
# --------------------------------------------------------------------------

def skew_pairs(n: int) -> list[tuple[int, int]]:
    """Index pairs (k, l), k < l, enumerating the skew coordinate axes."""
    return [(k, l) for k in range(n) for l in range(k + 1, n)]


def skew_dim(n: int) -> int:
    return n * (n - 1) // 2


def skew_to_coords(omega: np.ndarray) -> np.ndarray:
    """Strictly upper entries of a skew matrix, in `skew_pairs` order."""
    n = omega.shape[0]
    iu = np.triu_indices(n, k=1)
    return np.asarray(omega)[iu]


def coords_to_skew(coords: np.ndarray, n: int) -> np.ndarray:
    """Inverse of `skew_to_coords`."""
    omega = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    omega[iu] = coords
    return omega - omega.T


def pair_basis_matrix(n: int, k: int, l: int) -> np.ndarray:
    """The elementary skew generator with +1 at (k, l) and -1 at (l, k)."""
    e = np.zeros((n, n))
    e[k, l] = 1.0
    e[l, k] = -1.0
    return e


# --------------------------------------------------------------------------
# Matrix exponential for skew input, batched.
# --------------------------------------------------------------------------

def expm_skew(omega: np.ndarray) -> np.ndarray:
    """exp(omega) for skew-symmetric `omega`, shape (..., n, n).

    Scaling-and-squaring with a degree-13 Taylor core.  Each slice is scaled
    by its own power of two, so results are bitwise independent of how slices
    are grouped into batches.  Relative accuracy is ~1e-14 for spectral norms
    up to 20.
    """
    a = np.asarray(omega, dtype=float)
    norms = np.linalg.norm(a, axis=(-2, -1))  # Frobenius bounds the 2-norm
    s = np.zeros(np.shape(norms), dtype=np.int64)
    big = norms > _EXPM_THETA
    if np.any(big):
        s = np.where(big, np.ceil(np.log2(norms / _EXPM_THETA)).astype(np.int64), 0)
    x = a * np.ldexp(1.0, -s)[..., None, None]
    n = a.shape[-1]
    eye = np.broadcast_to(np.eye(n), a.shape).copy()
    acc = eye + x / _EXPM_DEGREE
    for j in range(_EXPM_DEGREE - 1, 0, -1):
        acc = eye + (x @ acc) / j
    smax = int(s.max()) if s.size else 0
    if a.ndim == 2:
        for _ in range(smax):
            acc = acc @ acc
    else:
        for j in range(smax):
            m = s > j
            acc[m] = acc[m] @ acc[m]
    return acc


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------

def project_to_group(m: np.ndarray, ortho_tol: float = DEFAULT_ORTHO_TOL) -> RotationMatrix:
    """Closest rotation to `m`: the polar factor, det repaired onto SO(n).

    If the polar factor has determinant -1, the column paired with the
    smallest singular value gets its sign flipped, which is the minimal
    perturbation staying orthogonal.

    Raises:
        SingularInput: smallest singular value below 1e-12 times the largest.
    """
    m = _as_square(m, "projection input")
    u, sv, vt = np.linalg.svd(m)
    if sv[-1] < 1e-12 * sv[0] or sv[0] == 0.0:
        raise SingularInput(
            f"smallest singular value {sv[-1]:.3e} is below 1e-12 * ||M||"
        )
    r = u @ vt
    if np.linalg.det(r) < 0:
        u = u.copy()
        u[:, -1] *= -1.0  # numpy sorts singular values descending
        r = u @ vt
    return RotationMatrix(r, ortho_tol=ortho_tol)


def metric(x: TangentVector, y: TangentVector) -> float:
    """Riemannian inner product tr(Wx^t Wy) of two vectors at the same base.

    Raises:
        BaseMismatch: the base points differ by more than 1e-12 entrywise.
    """
    if x.n != y.n or np.max(np.abs(x.base.entries - y.base.entries)) > 1e-12:
        raise BaseMismatch("tangent vectors are attached to different base points")
    return float(np.sum(x.coord.entries * y.coord.entries))


def group_exp(omega: SkewMatrix, ortho_tol: float | None = None) -> RotationMatrix:
    """Group exponential exp(W) of a skew coordinate, landing on SO(n)."""
    r = expm_skew(omega.entries)
    tol = DEFAULT_ORTHO_TOL if ortho_tol is None else ortho_tol
    return RotationMatrix(r, ortho_tol=tol)


def group_log(theta: RotationMatrix) -> SkewMatrix:
    """A real skew logarithm of a rotation, principal wherever it exists.

    Uses the real Schur form.  Eigenvalue pairs (-1, -1), where the principal
    branch breaks down, are grouped into planar blocks of angle pi, so the
    result always satisfies exp(log(T)) = T.  Accuracy near angle pi is
    limited to ~1e-6 by the conditioning of the invariant plane.
    """
    from scipy.linalg import schur

    a = theta.entries
    n = theta.n
    t, q = schur(a, output="real")
    log_t = np.zeros((n, n))
    minus_ones: list[int] = []
    i = 0
    while i < n:
        # real-eigenvalue pairs deflate to exact-zero subdiagonals, so any
        # entry above round-off marks a genuine rotation block
        if i + 1 < n and abs(t[i + 1, i]) > 1e-13:
            # 2x2 rotation block [[c, -s], [s, c]]
            c = 0.5 * (t[i, i] + t[i + 1, i + 1])
            s = 0.5 * (t[i + 1, i] - t[i, i + 1])
            angle = float(np.arctan2(s, c))
            log_t[i, i + 1] = -angle
            log_t[i + 1, i] = angle
            i += 2
        else:
            if t[i, i] < 0.0:
                minus_ones.append(i)
            i += 1
    if len(minus_ones) % 2 != 0:
        raise AdmissionError("odd number of -1 eigenvalues; input is not on SO(n)")
    for a_idx, b_idx in zip(minus_ones[0::2], minus_ones[1::2]):
        # diag(-1, -1) in the (a, b) plane is a rotation by pi
        log_t[a_idx, b_idx] = -np.pi
        log_t[b_idx, a_idx] = np.pi
    omega = q @ log_t @ q.T
    return SkewMatrix(0.5 * (omega - omega.T))


def haar_sample(n: int, seed: int) -> RotationMatrix:
    """A Haar-distributed rotation, deterministic for a fixed seed.

    QR of a standard normal matrix with the diagonal of R forced positive,
    then the last column negated if the determinant is -1.
    """
    if n < 2:
        raise AdmissionError("haar_sample requires n >= 2")
    return RotationMatrix(haar_sample_batch(n, 1, seed)[0])


def haar_sample_batch(n: int, count: int, seed: int) -> np.ndarray:
    """`count` independent Haar rotations as a (count, n, n) array."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((count, n, n))
    q, r = np.linalg.qr(a)
    diag = np.einsum("...ii->...i", r)
    signs = np.where(diag >= 0, 1.0, -1.0)
    q = q * signs[..., None, :]
    det = np.linalg.det(q)
    q[det < 0, :, -1] *= -1.0
    return q


def random_tangent(theta: RotationMatrix, seed: int) -> TangentVector:
    """Random tangent vector at `theta`: standard normal strictly upper
    entries of the skew coordinate, antisymmetrized."""
    rng = np.random.default_rng(seed)
    n = theta.n
    upper = np.triu(rng.standard_normal((n, n)), k=1)
    return TangentVector(theta, SkewMatrix(upper - upper.T))
