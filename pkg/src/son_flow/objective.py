"""The trace cost on SO(n): value, differential, gradient, and the Hessian
bilinear form at critical points.

The cost is f(T) = n - tr(T).  Its Riemannian gradient at T is the tangent
vector with skew coordinate (T - T^t)/2, and at a critical point T0 (which is
symmetric) the Hessian acting on tangent vectors W1 T0, W2 T0 is

    H(W1 T0, W2 T0) = tr(W1^t T0 W2 + W2^t T0 W1) / 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .errors import BaseMismatch, NotCritical
from .manifold import (
    RotationMatrix,
    SkewMatrix,
    TangentVector,
    pair_basis_matrix,
    skew_dim,
    skew_pairs,
)

if TYPE_CHECKING:  # pragma: no cover
    from .critical import CriticalPointInfo

CRITICAL_GRAD_TOL = 1e-10


def cost(theta: RotationMatrix) -> float:
    """f(T) = n - tr(T); zero exactly at the identity, at most 2n."""
    return float(theta.n - np.trace(theta.entries))


def gradient_coord(entries: np.ndarray) -> np.ndarray:
    """Skew coordinate of the Riemannian gradient, (T - T^t)/2, on raw arrays."""
    return 0.5 * (entries - np.swapaxes(entries, -2, -1))


def gradient(theta: RotationMatrix) -> TangentVector:
    """Riemannian gradient of the cost at `theta`.

    The ambient matrix is (T - T^t)/2 @ T; it vanishes exactly on the
    symmetric rotations, which are the critical points.
    """
    return TangentVector(theta, SkewMatrix(gradient_coord(theta.entries)))


def gradient_norm(theta: RotationMatrix) -> float:
    """Metric norm of the gradient, i.e. ||(T - T^t)/2||_F."""
    return float(np.linalg.norm(gradient_coord(theta.entries)))


def differential(theta: RotationMatrix, x: TangentVector) -> float:
    """Differential of the cost at `theta` applied to the tangent vector `x`.

    Equals -tr(W T) and, by construction, metric(gradient(theta), x).

    Raises:
        BaseMismatch: `x` is not attached to `theta`.
    """
    if x.n != theta.n or np.max(np.abs(x.base.entries - theta.entries)) > 1e-12:
        raise BaseMismatch("tangent vector is not attached to the given point")
    return float(-np.trace(x.coord.entries @ theta.entries))


@dataclass(frozen=True)
class HessianForm:
    """Hessian of the cost at a critical point, as a bilinear form.

    `evaluator` maps two skew coordinates (arrays) to the form value.
    `matrix` is the representation in the pair coordinates W_kl, k < l
    (basis of elementary generators E_kl - E_lk): in the eigenframe of the
    critical point it is diagonal with entries D_kk + D_ll, so its spectrum
    lies in {-2, 0, +2}.
    """

    base: "CriticalPointInfo"
    evaluator: Callable[[np.ndarray, np.ndarray], float]
    matrix: np.ndarray


def hessian_at(info: "CriticalPointInfo") -> HessianForm:
    """Assemble the Hessian form at a critical point.

    Raises:
        NotCritical: the gradient norm at `info.theta` is not below 1e-10.
    """
    theta = info.theta
    if gradient_norm(theta) >= CRITICAL_GRAD_TOL:
        raise NotCritical("Hessian is defined only at critical points")
    t0 = theta.entries

    def evaluator(omega1: np.ndarray, omega2: np.ndarray) -> float:
        omega1 = np.asarray(omega1, dtype=float)
        omega2 = np.asarray(omega2, dtype=float)
        return float(
            0.5 * np.trace(omega1.T @ t0 @ omega2 + omega2.T @ t0 @ omega1)
        )

    n = theta.n
    pairs = skew_pairs(n)
    m = skew_dim(n)
    basis = [pair_basis_matrix(n, k, l) for (k, l) in pairs]
    matrix = np.empty((m, m))
    for a in range(m):
        for b in range(a, m):
            val = evaluator(basis[a], basis[b])
            matrix[a, b] = val
            matrix[b, a] = val
    matrix.flags.writeable = False
    return HessianForm(base=info, evaluator=evaluator, matrix=matrix)


def hessian_kernel_dimension(form: HessianForm, threshold: float = 1e-8) -> int:
    """Number of singular values of the form matrix below `threshold`.

    Equals 2k(n-2k) on the component with index k.
    """
    sv = np.linalg.svd(form.matrix, compute_uv=False)
    return int(np.sum(sv < threshold))
