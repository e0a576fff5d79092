"""Pseudo-inertia algebra for single rigid bodies.

A rigid body's ten inertial parameters are packed into the symmetric 4x4
pseudo-inertia matrix

    J = [[Sigma, h],
         [h^T,   m]],   Sigma = 0.5 * tr(Ibar) * I3 - Ibar

where ``Ibar`` is the rotational inertia about the body-frame origin and
``h = m * c`` the first mass moment. The parameters describe a physically
realizable body iff ``J`` is positive definite. Randomization works on the
upper-triangular Cholesky factor of ``J``: left-multiplying it by any
upper-triangular matrix with positive diagonal keeps ``J`` positive
definite, and such matrices are in one-to-one correspondence with
unconstrained 10-vectors (:class:`ThetaInert`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import (
    NonPositiveDiagonal,
    NonSymmetric,
    NotPositiveDefinite,
    NotUpperTriangular,
    ZeroMass,
)

# J is accepted as positive definite when lambda_min(J) > PD_RTOL * tr(J).
PD_RTOL = 1e-12
SYM_RTOL = 1e-12

__all__ = [
    "InertialParams",
    "ThetaInert",
    "PrincipalMoments",
    "ConsistencyReport",
    "pseudo_from_params",
    "params_from_pseudo",
    "check_consistency",
    "principal_moments",
    "upper_cholesky",
    "build_U",
    "theta_from_U",
    "perturb",
    "is_positive_definite",
    "skew",
    "symmetric_eig3",
    "symmetric_eigvals3",
]


def skew(v):
    """Return the 3x3 cross-product matrix S(v) with S(v) @ w == v x w."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _is_symmetric(a, rtol=SYM_RTOL):
    a = np.asarray(a, dtype=float)
    scale = max(np.max(np.abs(a)), 1.0e-300)
    return np.max(np.abs(a - a.T)) <= rtol * scale


@dataclass
class InertialParams:
    """Mass, first mass moment and origin-frame rotational inertia of a body.

    ``to_vector`` / ``from_vector`` use the layout
    ``[m, hx, hy, hz, Ixx, Iyy, Izz, Ixy, Ixz, Iyz]``.
    """

    m: float
    h: np.ndarray
    Ibar: np.ndarray

    def __post_init__(self):
        self.m = float(self.m)
        self.h = np.asarray(self.h, dtype=float).reshape(3)
        self.Ibar = np.asarray(self.Ibar, dtype=float).reshape(3, 3)

    @property
    def com(self):
        if self.m <= 0.0:
            raise ZeroMass(f"center of mass undefined for mass {self.m}")
        return self.h / self.m

    def to_vector(self):
        I = self.Ibar
        return np.array(
            [self.m, *self.h, I[0, 0], I[1, 1], I[2, 2], I[0, 1], I[0, 2], I[1, 2]]
        )

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (10,):
            raise ValueError(f"expected a 10-vector, got shape {v.shape}")
        m, hx, hy, hz, ixx, iyy, izz, ixy, ixz, iyz = v
        Ibar = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])
        return cls(m, np.array([hx, hy, hz]), Ibar)

    @classmethod
    def from_com(cls, m, com, I_com, R=None):
        """Build origin-frame parameters from CoM-frame data (parallel axis).

        ``I_com`` is expressed in a frame rotated by ``R`` relative to the body
        frame, as in a URDF ``<inertial>`` block.
        """
        c = np.asarray(com, dtype=float).reshape(3)
        I_c = np.asarray(I_com, dtype=float).reshape(3, 3)
        if R is not None:
            R = np.asarray(R, dtype=float)
            I_c = R @ I_c @ R.T
        S = skew(c)
        Ibar = I_c + m * (S @ S.T)
        return cls(m, m * c, 0.5 * (Ibar + Ibar.T))

    def com_inertia(self):
        """Rotational inertia about the CoM, axes parallel to the body frame."""
        c = self.com
        S = skew(c)
        Ic = self.Ibar - self.m * (S @ S.T)
        return 0.5 * (Ic + Ic.T)

    def copy(self):
        return InertialParams(self.m, self.h.copy(), self.Ibar.copy())


@dataclass(frozen=True)
class ThetaInert:
    """Unconstrained 10-parameter deformation of a rigid body.

    ``alpha`` scales density by ``exp(2 * alpha)``, ``d*`` stretch the body
    along its axes by ``exp(d_i)``, ``s*`` shear it and ``t*`` translate it.
    """

    alpha: float = 0.0
    d1: float = 0.0
    d2: float = 0.0
    d3: float = 0.0
    s12: float = 0.0
    s23: float = 0.0
    s13: float = 0.0
    t1: float = 0.0
    t2: float = 0.0
    t3: float = 0.0

    def as_array(self):
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def from_array(cls, v):
        v = np.asarray(v, dtype=float).reshape(10)
        return cls(*(float(x) for x in v))

    def to_dict(self):
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class PrincipalMoments:
    D: np.ndarray  # ascending eigenvalues of the CoM-frame inertia
    R: np.ndarray  # columns are the matching unit eigenvectors

    @property
    def D1(self):
        return float(self.D[0])

    @property
    def D2(self):
        return float(self.D[1])

    @property
    def D3(self):
        return float(self.D[2])


@dataclass
class ConsistencyReport:
    mass_positive: bool
    moments_positive: bool
    triangle_ok: bool
    pd_ok: bool
    min_eigenvalue_J: float
    consistent: bool

    @property
    def routes_agree(self):
        explicit = self.mass_positive and self.moments_positive and self.triangle_ok
        return explicit == self.pd_ok

    def to_dict(self):
        return {
            "mass_positive": self.mass_positive,
            "moments_positive": self.moments_positive,
            "triangle_ok": self.triangle_ok,
            "pd_ok": self.pd_ok,
            "min_eigenvalue_J": self.min_eigenvalue_J,
            "consistent": self.consistent,
        }


def pseudo_from_params(p: InertialParams) -> np.ndarray:
    Sigma = 0.5 * np.trace(p.Ibar) * np.eye(3) - p.Ibar
    J = np.empty((4, 4))
    J[:3, :3] = Sigma
    J[:3, 3] = p.h
    J[3, :3] = p.h
    J[3, 3] = p.m
    return J


def params_from_pseudo(J) -> InertialParams:
    J = np.asarray(J, dtype=float)
    if J.shape != (4, 4):
        raise ValueError(f"pseudo-inertia must be 4x4, got {J.shape}")
    if not _is_symmetric(J):
        raise NonSymmetric("pseudo-inertia matrix is not symmetric")
    Sigma = 0.5 * (J[:3, :3] + J[:3, :3].T)
    Ibar = np.trace(Sigma) * np.eye(3) - Sigma
    return InertialParams(J[3, 3], J[:3, 3].copy(), Ibar)


def _cross(a, b):
    return np.array(
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    )


def _closed_form_eigvals(A):
    """Trigonometric closed form; returns (ascending eigenvalues, spread p)."""
    p1 = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    q = (A[0, 0] + A[1, 1] + A[2, 2]) / 3.0
    p2 = (A[0, 0] - q) ** 2 + (A[1, 1] - q) ** 2 + (A[2, 2] - q) ** 2 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    scale = np.max(np.abs(A))
    if p <= 1e-12 * scale:
        return np.full(3, q), 0.0
    B = (A - q * np.eye(3)) / p
    det = (
        B[0, 0] * (B[1, 1] * B[2, 2] - B[1, 2] * B[2, 1])
        - B[0, 1] * (B[1, 0] * B[2, 2] - B[1, 2] * B[2, 0])
        + B[0, 2] * (B[1, 0] * B[2, 1] - B[1, 1] * B[2, 0])
    )
    r = min(max(det / 2.0, -1.0), 1.0)
    phi = math.acos(r) / 3.0
    hi = q + 2.0 * p * math.cos(phi)
    lo = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    return np.array([lo, 3.0 * q - hi - lo, hi]), p


def symmetric_eigvals3(A):
    """Ascending eigenvalues of a symmetric 3x3 matrix (closed form)."""
    A = np.asarray(A, dtype=float)
    return _closed_form_eigvals(0.5 * (A + A.T))[0]


def symmetric_eig3(A):
    """Eigen-decomposition of a symmetric 3x3 matrix, eigenvalues ascending.

    Eigenvalues come from the trigonometric closed form; eigenvectors from
    cross products of rows of ``A - lambda*I``. Near-repeated eigenvalues
    fall back to LAPACK's tridiagonal solver.
    """
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    if not np.any(A):
        return np.zeros(3), np.eye(3)
    evals, p = _closed_form_eigvals(A)
    if p == 0.0:
        return evals, np.eye(3)
    lo, mid, hi = evals
    if min(mid - lo, hi - mid) <= 1e-6 * p:
        w, V = np.linalg.eigh(A)
        return w, _proper(V)

    def _vec(lam):
        M = A - lam * np.eye(3)
        cands = [_cross(M[0], M[1]), _cross(M[0], M[2]), _cross(M[1], M[2])]
        v = max(cands, key=lambda c: c @ c)
        return v / math.sqrt(v @ v)

    v_lo = _vec(lo)
    v_hi = _vec(hi)
    v_hi = v_hi - (v_hi @ v_lo) * v_lo
    v_hi /= math.sqrt(v_hi @ v_hi)
    v_mid = _cross(v_hi, v_lo)
    return evals, np.column_stack([v_lo, v_mid, v_hi])


def _proper(V):
    if np.linalg.det(V) < 0.0:
        V = V.copy()
        V[:, 2] *= -1.0
    return V


def principal_moments(p: InertialParams) -> PrincipalMoments:
    if not p.m > 0.0:
        raise ZeroMass(f"principal moments need positive mass, got {p.m}")
    D, R = symmetric_eig3(p.com_inertia())
    return PrincipalMoments(D, _proper(R))


def is_positive_definite(J, rtol=PD_RTOL):
    """Eigenvalue test used throughout: lambda_min(J) > rtol * tr(J)."""
    J = np.asarray(J, dtype=float)
    lam = np.linalg.eigvalsh(0.5 * (J + J.T))
    tr = np.trace(J)
    return bool(tr > 0.0 and lam[0] > rtol * tr), float(lam[0])


def check_consistency(p: InertialParams) -> ConsistencyReport:
    """Check physical consistency by explicit constraints and by J > 0.

    Route (a) tests ``m > 0``, ``D_i > 0`` and ``D1 + D2 + D3 > 2 D_i`` on the
    CoM-frame principal moments; route (b) tests the smallest eigenvalue of
    the pseudo-inertia. Both use the same scale-relative tolerance.
    """
    J = pseudo_from_params(p)
    pd_ok, lam_min = is_positive_definite(J)
    tol = PD_RTOL * max(abs(np.trace(J)), 1e-300)

    mass_positive = bool(p.m > tol)
    if mass_positive:
        D = symmetric_eigvals3(p.com_inertia())
        moments_positive = bool(np.all(D > tol))
        half_trace = 0.5 * D.sum()
        triangle_ok = bool(np.all(half_trace - D > tol))
    else:
        moments_positive = False
        triangle_ok = False

    consistent = mass_positive and moments_positive and triangle_ok and pd_ok
    return ConsistencyReport(
        mass_positive=mass_positive,
        moments_positive=moments_positive,
        triangle_ok=triangle_ok,
        pd_ok=pd_ok,
        min_eigenvalue_J=lam_min,
        consistent=consistent,
    )


def _lower_cholesky(A):
    n = A.shape[0]
    L = np.zeros_like(A)
    floor = PD_RTOL * max(np.trace(A), 0.0)
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if not d > floor:
            raise NotPositiveDefinite(f"non-positive pivot {d!r} at index {j}", pivot=j)
        L[j, j] = math.sqrt(d)
        for i in range(j + 1, n):
            L[i, j] = (A[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


def upper_cholesky(J) -> np.ndarray:
    """Return the unique upper-triangular ``L`` with positive diagonal, J = L L^T.

    Computed as a lower Cholesky factorization of the index-reversed matrix.
    On failure the reported pivot index refers to ``J``'s own ordering.
    """
    J = np.asarray(J, dtype=float)
    if not _is_symmetric(J):
        raise NonSymmetric("pseudo-inertia matrix is not symmetric")
    n = J.shape[0]
    rev = slice(None, None, -1)
    try:
        Lr = _lower_cholesky(J[rev, rev])
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(
            f"matrix is not positive definite (pivot index {n - 1 - exc.pivot})",
            pivot=n - 1 - exc.pivot,
        ) from None
    return Lr[rev, rev].copy()


def build_U(theta: ThetaInert) -> np.ndarray:
    t = theta
    U = np.array(
        [
            [math.exp(t.d1), t.s12, t.s13, t.t1],
            [0.0, math.exp(t.d2), t.s23, t.t2],
            [0.0, 0.0, math.exp(t.d3), t.t3],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    return math.exp(t.alpha) * U


def theta_from_U(U) -> ThetaInert:
    U = np.asarray(U, dtype=float)
    if U.shape != (4, 4):
        raise ValueError(f"U must be 4x4, got {U.shape}")
    lower = np.tril(U, -1)
    if np.any(np.abs(lower) > 1e-12 * np.max(np.abs(U))):
        raise NotUpperTriangular("U has non-zero entries below the diagonal")
    diag = np.diag(U)
    if not np.all(diag > 0.0):
        raise NonPositiveDiagonal(f"U diagonal must be positive, got {diag}")
    scale = U[3, 3]
    V = U / scale
    return ThetaInert(
        alpha=math.log(scale),
        d1=math.log(V[0, 0]),
        d2=math.log(V[1, 1]),
        d3=math.log(V[2, 2]),
        s12=V[0, 1],
        s23=V[1, 2],
        s13=V[0, 2],
        t1=V[0, 3],
        t2=V[1, 3],
        t3=V[2, 3],
    )


def perturb(J, theta: ThetaInert) -> np.ndarray:
    """Deform ``J`` by ``theta``: J' = (U L)(U L)^T with L = upper_cholesky(J)."""
    L = upper_cholesky(J)
    UL = build_U(theta) @ L
    Jp = UL @ UL.T
    return 0.5 * (Jp + Jp.T)


def perturb_params(p: InertialParams, theta: ThetaInert) -> InertialParams:
    return params_from_pseudo(perturb(pseudo_from_params(p), theta))
