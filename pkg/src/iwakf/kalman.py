"""Kalman filter recursions and steady-state (Riccati) quantities.

The same forecast/assimilate pair serves the plain plant and any augmented
system; callers pass the full-size effective process-noise covariance
(B_aug Qw B_aug^T for augmented plants).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NoConvergence,
    SingularInnovationCovariance,
)
from .model import LtiSystem, spectral_radius

_COND_LIMIT = 1e12

DEFAULT_P0_SCALE = 10.0


@dataclass(frozen=True)
class FilterState:
    """Posterior mean and covariance after data assimilation."""

    x_da: np.ndarray
    P_da: np.ndarray

    @staticmethod
    def initial(n: int, p0_scale: float = DEFAULT_P0_SCALE) -> "FilterState":
        return FilterState(np.zeros(n), p0_scale * np.eye(n))


@dataclass(frozen=True)
class StepRecord:
    """Everything produced by one forecast + assimilation step."""

    x_fc: np.ndarray
    P_fc: np.ndarray
    z: np.ndarray
    S: np.ndarray
    K: np.ndarray
    x_da: np.ndarray
    P_da: np.ndarray


def _sym(P: np.ndarray) -> np.ndarray:
    return (P + P.T) / 2.0


def forecast(state: FilterState, system: LtiSystem, Q_effective, u=None):
    """Propagate mean and covariance one step forward.

    x_fc = A x_da + B u;  P_fc = A P_da A^T + Q_effective.
    """
    A = system.A
    Q_effective = np.atleast_2d(np.asarray(Q_effective, dtype=float))
    if Q_effective.shape != A.shape:
        raise DimensionMismatch(
            f"Q_effective shape {Q_effective.shape} != state dimension {A.shape}"
        )
    x_fc = A @ state.x_da
    if u is not None:
        x_fc = x_fc + (system.B @ np.atleast_1d(u))
    P_fc = _sym(A @ state.P_da @ A.T + Q_effective)
    return x_fc, P_fc


def assimilate(x_fc, P_fc, y, C, R) -> StepRecord:
    """Measurement update via the innovation z = y - C x_fc."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = y - C @ x_fc
    S = _sym(C @ P_fc @ C.T + R)
    eig = np.linalg.eigvalsh(S)
    if eig[0] <= 0 or eig[-1] / eig[0] > _COND_LIMIT:
        raise SingularInnovationCovariance(
            f"innovation covariance not invertible to tolerance (eigs {eig})"
        )
    # Solve S K^T = C P_fc via Cholesky rather than inverting S.
    L = np.linalg.cholesky(S)
    Kt = np.linalg.solve(L.T, np.linalg.solve(L, C @ P_fc))
    K = Kt.T
    x_da = x_fc + K @ z
    n = P_fc.shape[0]
    P_da = _sym((np.eye(n) - K @ C) @ P_fc)
    return StepRecord(x_fc, P_fc, z, S, K, x_da, P_da)


def kf_step(state: FilterState, system: LtiSystem, Q_effective, R, u, y):
    """One full filter cycle; returns the new state and the step record."""
    x_fc, P_fc = forecast(state, system, Q_effective, u)
    rec = assimilate(x_fc, P_fc, y, system.C, R)
    return FilterState(rec.x_da, rec.P_da), rec


def steady_state(
    system: LtiSystem,
    Q_effective,
    R,
    tol: float = 1e-10,
    max_iter: int = 10000,
):
    """Iterate the Riccati recursion to its fixed point.

    Returns (P_fc_ss, K_ss, F_ss) with F = A(I - K C).  Raises NoConvergence
    if the forecast-covariance residual stays above `tol`.
    """
    A, C = system.A, system.C
    Q_effective = np.atleast_2d(np.asarray(Q_effective, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n = A.shape[0]
    P = Q_effective + np.eye(n)
    for _ in range(max_iter):
        S = _sym(C @ P @ C.T + R)
        K = np.linalg.solve(S, C @ P).T
        P_da = _sym((np.eye(n) - K @ C) @ P)
        P_next = _sym(A @ P_da @ A.T + Q_effective)
        residual = np.max(np.abs(P_next - P))
        P = P_next
        if residual < tol:
            break
    else:
        raise NoConvergence(
            f"Riccati iteration residual {residual:.3e} > {tol} after {max_iter} steps"
        )
    S = _sym(C @ P @ C.T + R)
    K = np.linalg.solve(S, C @ P).T
    F = A @ (np.eye(n) - K @ C)
    if spectral_radius(F) >= 1.0:
        raise NoConvergence("closed-loop matrix A(I-KC) is not stable at the fixed point")
    return P, K, F
