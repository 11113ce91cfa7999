"""Critical components of the trace cost.

The critical points are the symmetric rotations.  They split into components
indexed by k, the number of (-1, -1) eigenvalue pairs: each point factors as
T0 = P^t D P with D = diag(-1 x 2k, +1 x (n-2k)) and orthogonal P, has trace
n - 4k, and the component is a compact submanifold of dimension 2k(n-2k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissionError, AmbiguousTrace, BadIndex, ComponentMismatch
from .manifold import (
    RotationMatrix,
    expm_skew,
    group_log,
    haar_sample_batch,
    pair_basis_matrix,
    skew_dim,
    skew_pairs,
    skew_to_coords,
)
from .objective import gradient_norm

CLASSIFY_TOL = 1e-8

# Round-trip tolerance for exp(log(P)) = P when extracting frame logarithms;
# beyond it the gauge is re-randomized.
_LOG_ROUNDTRIP_TOL = 1e-9


def component_dimension(n: int, k: int) -> int:
    """Dimension 2k(n-2k) of the component with index k."""
    _check_index(n, k)
    return 2 * k * (n - 2 * k)


def _check_index(n: int, k: int) -> None:
    if n < 1:
        raise BadIndex(f"dimension must be positive, got {n}")
    if not 0 <= k <= n // 2:
        raise BadIndex(f"component index {k} outside 0..{n // 2} for n={n}")


def canonical_signs(n: int, k: int) -> np.ndarray:
    """The sign pattern diag(-1 x 2k, +1 x (n-2k))."""
    return np.concatenate([-np.ones(2 * k), np.ones(n - 2 * k)])


@dataclass(frozen=True)
class CriticalPointInfo:
    """A critical point together with its eigenstructure.

    theta: the symmetric rotation T0.
    k: component index (number of -1 eigenvalue pairs).
    frame: orthogonal P, det +1, whose rows are eigenvectors: T0 = P^t D P.
    signs: the diagonal of D, +-1 entries with exactly 2k equal to -1.
    """

    theta: RotationMatrix
    k: int
    frame: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        n = self.theta.n
        _check_index(n, self.k)
        frame = np.asarray(self.frame, dtype=float)
        signs = np.asarray(self.signs, dtype=float)
        if frame.shape != (n, n) or signs.shape != (n,):
            raise AdmissionError("frame/signs shapes do not match the point")
        if np.linalg.norm(frame.T @ frame - np.eye(n)) > 1e-9:
            raise AdmissionError("frame is not orthogonal")
        if not np.all(np.abs(np.abs(signs) - 1.0) < 1e-12):
            raise AdmissionError("signs must be +-1")
        if int(np.sum(signs < 0)) != 2 * self.k:
            raise AdmissionError("sign pattern does not have 2k entries equal to -1")
        t0 = self.theta.entries
        if np.linalg.norm(t0 - t0.T) > 1e-10:
            raise AdmissionError("critical point is not symmetric")
        if np.linalg.norm(frame.T @ np.diag(signs) @ frame - t0) > 1e-9:
            raise AdmissionError("frame does not diagonalize the point")
        if abs(np.trace(t0) - (n - 4 * self.k)) > 1e-9:
            raise AdmissionError("trace does not match n - 4k")
        if gradient_norm(self.theta) > 1e-10:
            raise AdmissionError("gradient does not vanish at the point")
        frame = frame.copy()
        frame.flags.writeable = False
        signs = signs.copy()
        signs.flags.writeable = False
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "signs", signs)

    @property
    def n(self) -> int:
        return self.theta.n


def make_critical(n: int, k: int, frame: np.ndarray | int | None = None) -> CriticalPointInfo:
    """Construct a point of the component with index k.

    `frame` selects the conjugating orthogonal matrix P: an explicit matrix,
    an integer seed for a Haar draw, or None for the identity frame.  The
    determinant sign of P is irrelevant (it is absorbed without changing the
    point) and is normalized to +1 so the frame admits a skew logarithm.

    Raises:
        BadIndex: k outside 0..floor(n/2).
    """
    _check_index(n, k)
    if frame is None:
        p = np.eye(n)
    elif isinstance(frame, (int, np.integer)):
        p = haar_sample_batch(n, 1, int(frame))[0]
    else:
        p = np.asarray(frame, dtype=float)
        if p.shape != (n, n):
            raise AdmissionError(f"frame must be {n}x{n}, got {p.shape}")
        if np.linalg.norm(p.T @ p - np.eye(n)) > 1e-10:
            raise AdmissionError("frame is not orthogonal")
        p = p.copy()
    if np.linalg.det(p) < 0:
        # flipping one row of P leaves P^t D P unchanged
        p[-1, :] *= -1.0
    signs = canonical_signs(n, k)
    theta = p.T @ np.diag(signs) @ p
    return CriticalPointInfo(
        theta=RotationMatrix(theta), k=k, frame=p, signs=signs
    )


def classify(theta: RotationMatrix, tol: float = CLASSIFY_TOL) -> int | None:
    """Component index of a near-critical rotation, or None if not critical.

    A point is admitted as critical when it is symmetric and an involution
    within `tol`; the index is then recovered from the trace.

    Raises:
        AmbiguousTrace: the trace is not within 0.5 of any admissible value.
    """
    t = theta.entries
    n = theta.n
    if np.linalg.norm(t - t.T) > tol:
        return None
    if np.linalg.norm(t @ t - np.eye(n)) > tol:
        return None
    trace = float(np.trace(t))
    k = int(round((n - trace) / 4.0))
    if abs(trace - (n - 4 * k)) > 0.5:
        raise AmbiguousTrace(f"trace {trace:.6f} is not near any n - 4k")
    if not 0 <= k <= n // 2:
        raise AmbiguousTrace(f"recovered index {k} outside 0..{n // 2}")
    return k


def _canonicalize(info: CriticalPointInfo) -> np.ndarray:
    """Frame P' with P'^t diag(canonical signs) P' equal to the point."""
    signs = info.signs
    order = np.concatenate([np.where(signs < 0)[0], np.where(signs >= 0)[0]])
    p = info.frame[order, :].copy()
    if np.linalg.det(p) < 0:
        p[-1, :] *= -1.0
    return p


def _frame_log(p: np.ndarray, d_signs: np.ndarray, seed: int) -> np.ndarray:
    """Skew logarithm of the frame, re-gauging when the log is ill-conditioned.

    The frame is Haar-generic, so the principal branch almost surely applies;
    if the round trip exp(log(P)) = P fails, P is replaced by Q P with Q
    block-orthogonal commuting with diag(d_signs), which leaves the critical
    point unchanged.
    """
    n = p.shape[0]
    k2 = int(np.sum(d_signs < 0))
    best: tuple[float, np.ndarray] | None = None
    rng = np.random.default_rng(seed)
    candidate = p
    for _ in range(8):
        omega = group_log(RotationMatrix(candidate, ortho_tol=1e-8)).entries
        err = float(np.linalg.norm(expm_skew(omega) - candidate))
        if best is None or err < best[0]:
            best = (err, omega)
        if err <= _LOG_ROUNDTRIP_TOL:
            return omega
        # block-orthogonal gauge commuting with diag(d_signs); 2k >= 2 here
        q = np.eye(n)
        if k2 >= 2:
            q[:k2, :k2] = haar_sample_batch(k2, 1, int(rng.integers(2**32)))[0]
        if n - k2 >= 2:
            q[k2:, k2:] = haar_sample_batch(n - k2, 1, int(rng.integers(2**32)))[0]
        candidate = q @ p
        if np.linalg.det(candidate) < 0:
            candidate[-1, :] *= -1.0
    return best[1]


def connect_in_component(
    a: CriticalPointInfo, b: CriticalPointInfo, steps: int
) -> list[RotationMatrix]:
    """Sample a smooth curve inside the component joining `a` to `b`.

    The curve is exp(W1^t (1-t)) exp(W2^t t) D exp(W2 t) exp(W1 (1-t)) with
    W1, W2 skew logarithms of the two frames; every sample stays in the
    component and the endpoints reproduce a.theta and b.theta.

    Raises:
        ComponentMismatch: the points lie in different components.
    """
    if a.k != b.k or a.n != b.n:
        raise ComponentMismatch(f"components differ: k={a.k} vs k={b.k}")
    if steps < 1:
        raise AdmissionError("steps must be at least 1")
    n = a.n
    d_signs = canonical_signs(n, a.k)
    d = np.diag(d_signs)
    omega1 = _frame_log(_canonicalize(a), d_signs, seed=101)
    omega2 = _frame_log(_canonicalize(b), d_signs, seed=202)
    out = []
    for i in range(steps + 1):
        t = i / steps
        e1 = expm_skew(omega1 * (1.0 - t))
        e2 = expm_skew(omega2 * t)
        sample = e1.T @ e2.T @ d @ e2 @ e1
        out.append(RotationMatrix(sample))
    return out


def tangent_projector_at(info: CriticalPointInfo) -> np.ndarray:
    """Orthogonal projector, in pair coordinates, onto the component tangent.

    The tangent space at T0 consists of skew W with W T0 symmetric; in the
    eigenframe these are the skew matrices supported on index pairs with
    opposite signs, so the projector has rank 2k(n-2k).
    """
    n = info.n
    p = info.frame
    pairs = skew_pairs(n)
    m = skew_dim(n)
    conj = np.empty((m, m))
    for alpha, (i, j) in enumerate(pairs):
        e = pair_basis_matrix(n, i, j)
        conj[:, alpha] = skew_to_coords(p @ e @ p.T)
    mask = np.array(
        [1.0 if info.signs[i] * info.signs[j] < 0 else 0.0 for (i, j) in pairs]
    )
    return conj.T @ (mask[:, None] * conj)
