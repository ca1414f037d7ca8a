"""Plant, coloring filter, state augmentation, and the pendulum benchmark model.

The coloring filter is a second-order strictly proper transfer function

    H(z) = (g3*z + g2) / (z^2 + g1*z + g0)

realized in controllable canonical form.  Appending its two states to the
plant state turns a colored-process-noise estimation problem into a standard
white-noise Kalman filtering problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, PoleEvaluation, UnstableFilter

_POLE_EVAL_EPS = 1e-12

# Jury shrink factor used when projecting parameters back to stability.
JURY_MARGIN = 0.005


def spectral_radius(M) -> float:
    """Largest absolute eigenvalue of a square matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {M.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(M))))


@dataclass(frozen=True)
class LtiSystem:
    """Discrete-time plant x_{k} = A x_{k-1} + B v_{k-1},  y_k = C x_k + n_k."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if B.shape[0] != A.shape[0] and B.shape[1] == A.shape[0]:
            B = B.T
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionMismatch(f"B rows {B.shape[0]} != n {n}")
        if C.shape[1] != n:
            raise DimensionMismatch(f"C cols {C.shape[1]} != n {n}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def l(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def stable(self) -> bool:
        return spectral_radius(self.A) < 1.0


def jury_stable(gamma0: float, gamma1: float, margin: float = 0.0) -> bool:
    """Jury conditions for z^2 + g1*z + g0: |g0| < 1 and |g1| < 1 + g0.

    With a positive `margin` the region is shrunk, giving strict stability
    with headroom.
    """
    lim0 = 1.0 - margin
    return abs(gamma0) < lim0 and abs(gamma1) < (1.0 + gamma0) * (1.0 - margin)


@dataclass(frozen=True)
class ColoringFilter:
    """Second-order shaping filter with its canonical state-space realization.

    A_H = [[-g1, -g0], [1, 0]], B_H = [1, 0]^T, C_H = [g3, g2].  The C_H
    ordering is the one for which C_H (zI - A_H)^{-1} B_H reproduces H(z)
    exactly; the resolvent of the companion form produces [z, 1]^T / den(z),
    so the numerator coefficients pair as (g3 with z, g2 with 1).
    """

    gamma0: float
    gamma1: float
    gamma2: float
    gamma3: float
    A_H: np.ndarray = field(repr=False, default=None)
    B_H: np.ndarray = field(repr=False, default=None)
    C_H: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not jury_stable(self.gamma0, self.gamma1):
            raise UnstableFilter(
                f"denominator z^2 + {self.gamma1}*z + {self.gamma0} fails Jury conditions"
            )
        object.__setattr__(
            self, "A_H", np.array([[-self.gamma1, -self.gamma0], [1.0, 0.0]])
        )
        object.__setattr__(self, "B_H", np.array([[1.0], [0.0]]))
        object.__setattr__(self, "C_H", np.array([[self.gamma3, self.gamma2]]))

    @property
    def gamma(self) -> np.ndarray:
        return np.array([self.gamma0, self.gamma1, self.gamma2, self.gamma3])

    @property
    def poles(self) -> np.ndarray:
        return np.roots([1.0, self.gamma1, self.gamma0])

    def h2_norm_sq(self) -> float:
        """Squared H2 norm, i.e. output variance under unit-variance white input.

        Computed from the stationary Lyapunov solution of the realization.
        """
        sigma = stationary_state_covariance(self.A_H, self.B_H, 1.0)
        return float((self.C_H @ sigma @ self.C_H.T).item())


def stationary_state_covariance(A, B, Qw) -> np.ndarray:
    """Solve Sigma = A Sigma A^T + B Qw B^T for a stable A."""
    import scipy.linalg

    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    W = B @ np.atleast_2d(np.asarray(Qw, dtype=float)) @ B.T
    sigma = scipy.linalg.solve_discrete_lyapunov(A, W)
    return (sigma + sigma.T) / 2.0


def make_coloring_filter(gamma0, gamma1, gamma2, gamma3) -> ColoringFilter:
    """Build a stable second-order coloring filter from transfer coefficients."""
    return ColoringFilter(float(gamma0), float(gamma1), float(gamma2), float(gamma3))


def filter_from_poles_zero(
    pole_radius: float, pole_angle_deg: float, zero_location: float, gain: float = 1.0
) -> ColoringFilter:
    """Coloring filter with conjugate poles r*e^{+-j*angle} and one real zero.

    Denominator (z - r e^{j a})(z - r e^{-j a}) = z^2 - 2 r cos(a) z + r^2;
    numerator gain*(z - zero).
    """
    if pole_radius >= 1.0 or pole_radius < 0.0:
        raise UnstableFilter(f"pole radius {pole_radius} outside [0, 1)")
    if gain == 0.0:
        raise ValueError("gain must be nonzero")
    a = math.radians(pole_angle_deg)
    gamma1 = -2.0 * pole_radius * math.cos(a)
    gamma0 = pole_radius**2
    gamma3 = float(gain)
    gamma2 = -float(gain) * float(zero_location)
    return make_coloring_filter(gamma0, gamma1, gamma2, gamma3)


def evaluate_transfer(filt: ColoringFilter, z: complex) -> complex:
    """Evaluate H(z) = (g3*z + g2)/(z^2 + g1*z + g0)."""
    den = z * z + filt.gamma1 * z + filt.gamma0
    if abs(den) < _POLE_EVAL_EPS:
        raise PoleEvaluation(f"z={z} is within {_POLE_EVAL_EPS} of a pole")
    return (filt.gamma3 * z + filt.gamma2) / den


@dataclass(frozen=True)
class AugmentedSystem:
    """Plant with the coloring-filter states appended.

    A_aug = [[A, B C_H], [0, A_H]], B_aug = [0; B_H], C_aug = [C, 0]; the
    driving white noise w enters only through B_aug.
    """

    base: LtiSystem
    filter: ColoringFilter
    A_aug: np.ndarray
    B_aug: np.ndarray
    C_aug: np.ndarray

    @property
    def n(self) -> int:
        return self.A_aug.shape[0]

    def as_system(self) -> LtiSystem:
        return LtiSystem(self.A_aug, self.B_aug, self.C_aug)


def augment(system: LtiSystem, filt: ColoringFilter) -> AugmentedSystem:
    """Assemble the block-triangular augmented system."""
    if system.l != 1:
        raise DimensionMismatch(
            f"augmentation requires a scalar process-noise channel, got l={system.l}"
        )
    n, m = system.n, system.m
    A_aug = np.zeros((n + 2, n + 2))
    A_aug[:n, :n] = system.A
    A_aug[:n, n:] = system.B @ filt.C_H
    A_aug[n:, n:] = filt.A_H
    B_aug = np.zeros((n + 2, 1))
    B_aug[n:, :] = filt.B_H
    C_aug = np.zeros((m, n + 2))
    C_aug[:, :n] = system.C
    return AugmentedSystem(system, filt, A_aug, B_aug, C_aug)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise covariances for an experiment.

    sigma_v_sq is the target stationary variance of the colored process noise
    v_k; Q_w is the driving-noise variance that achieves it through the given
    coloring filter.
    """

    Q: np.ndarray
    R: np.ndarray
    sigma_v_sq: float = 1.0
    Q_w: float = 1.0

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        if not np.allclose(Q, Q.T):
            raise ValueError("Q must be symmetric")
        if not np.allclose(R, R.T):
            raise ValueError("R must be symmetric")
        if np.min(np.linalg.eigvalsh(Q)) < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(R)) <= 0:
            raise ValueError("R must be positive definite")
        if self.sigma_v_sq < 0 or self.Q_w < 0:
            raise ValueError("variances must be nonnegative")


def driving_variance(filt: ColoringFilter, sigma_v_sq: float) -> float:
    """Q_w giving the colored output v a stationary variance of sigma_v_sq.

    Q_w = sigma_v_sq / ||H||_2^2, with the squared H2 norm from the discrete
    Lyapunov equation of the realization.
    """
    h2 = filt.h2_norm_sq()
    if h2 <= 0:
        raise ValueError("filter has zero H2 norm; cannot normalize variance")
    return float(sigma_v_sq) / h2


def expm_series(M: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring of the truncated series.

    Deterministic fixed-tolerance scheme; intended for the small dense
    matrices used here.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    norm = np.linalg.norm(M, ord=np.inf)
    s = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    Ms = M / (2**s)
    n = M.shape[0]
    term = np.eye(n)
    result = np.eye(n)
    k = 1
    while True:
        term = term @ Ms / k
        result = result + term
        if np.linalg.norm(term, ord=np.inf) <= rel_tol * np.linalg.norm(
            result, ord=np.inf
        ):
            break
        k += 1
        if k > 200:
            break
    for _ in range(s):
        result = result @ result
    return result


def discretize_pendulum(
    mass: float = 1.0,
    length: float = 1.0,
    damping_b: float = 0.2,
    gravity: float = 9.81,
    sample_time: float = 0.05,
    matrix_convention: str = "paper",
) -> LtiSystem:
    """Linearized damped pendulum, sampled with a zero-order-hold state map.

    States are (angle, angular rate).  phi_n = sqrt(g/L) is the undamped
    natural frequency and zeta = b / (2 m L^2 phi_n) the damping ratio.
    `matrix_convention` selects the stiffness entry of the continuous-time
    dynamics: "paper" uses -phi_n, "physical" the standard -phi_n^2.
    """
    if min(mass, length, gravity) <= 0 or damping_b <= 0 or sample_time < 0:
        raise ValueError("physical parameters must be positive")
    if matrix_convention not in ("paper", "physical"):
        raise ValueError(f"unknown matrix_convention {matrix_convention!r}")
    phi_n = math.sqrt(gravity / length)
    zeta = damping_b / (2.0 * mass * length**2 * phi_n)
    stiffness = -phi_n if matrix_convention == "paper" else -(phi_n**2)
    A_c = np.array([[0.0, 1.0], [stiffness, -2.0 * zeta * phi_n]])
    A = expm_series(A_c * sample_time)
    B = np.array([[0.0], [1.0]])
    C = np.array([[1.0, 0.0]])
    return LtiSystem(A, B, C)


# Table of benchmark coloring filters: conjugate poles at radius 0.8 with
# angles 100, 130, 145 degrees, single zero at 3, unit gain.
SHAPING_FILTERS = {
    "sf1": (0.8, 100.0, 3.0, 1.0),
    "sf2": (0.8, 130.0, 3.0, 1.0),
    "sf3": (0.8, 145.0, 3.0, 1.0),
}


def shaping_filter(name: str) -> ColoringFilter:
    """Look up one of the benchmark coloring filters by shortcut name."""
    key = name.lower()
    if key not in SHAPING_FILTERS:
        raise KeyError(f"unknown shaping filter {name!r}; choose from {sorted(SHAPING_FILTERS)}")
    return filter_from_poles_zero(*SHAPING_FILTERS[key])
