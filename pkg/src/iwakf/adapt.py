"""Online adaptation of the coloring filter by innovations whitening.

The adaptive filter runs an augmented KF with its current coloring-filter
guess.  Periodically it replays the filter over a window of recent
measurements for candidate parameters, scores each candidate by the
whiteness cost of the replayed innovations, and lets a derivative-free
simplex search pick the parameters that whiten best.  A candidate is
accepted only if it strictly improves the cost on the same window.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import kernels
from .errors import InsufficientData
from .kalman import DEFAULT_P0_SCALE, FilterState
from .model import (
    JURY_MARGIN,
    ColoringFilter,
    LtiSystem,
    augment,
    filter_from_poles_zero,
    make_coloring_filter,
)

_RADIUS_MAX = 0.995
_LOG_QW_LIM = 20.0


@dataclass(frozen=True)
class AdaptationConfig:
    """Tuning knobs for the adaptation loop."""

    window_length: int = 4000
    lag_count: int = 10
    reopt_period: int = 500
    max_evals: int = 200
    simplex_init_scale: float = 1.0
    tolerance: float = 1e-4
    parameterization: str = "pole_zero"
    burn_in_frac: float = 0.2
    p0_scale: float = DEFAULT_P0_SCALE
    # Adaptation may start once this many samples are buffered; the window
    # then grows until it reaches window_length.  None means wait for a full
    # window.
    min_window: int = 1000
    # Skip re-optimization while the incumbent's cost on the current window
    # stays below skip_factor * lag_count / n_effective, the expected cost
    # level of a white sequence (0 disables skipping).
    skip_factor: float = 1.5

    def __post_init__(self):
        if self.window_length <= self.lag_count:
            raise ValueError("window_length must exceed lag_count")
        if self.min_window is not None and self.min_window > self.window_length:
            raise ValueError("min_window cannot exceed window_length")
        if self.reopt_period < 1:
            raise ValueError("reopt_period must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.parameterization not in ("pole_zero", "direct_gamma"):
            raise ValueError(f"unknown parameterization {self.parameterization!r}")

    @property
    def start_window(self) -> int:
        return self.window_length if self.min_window is None else self.min_window


def project_to_stable(params, parameterization: str = "pole_zero") -> np.ndarray:
    """Clamp a parameter vector into the stable feasible region.

    pole_zero: radius into [0, 0.995]; direct_gamma: (g0, g1) into the Jury
    triangle shrunk by the stability margin.  Idempotent on interior points.
    """
    p = np.array(params, dtype=float)
    if parameterization == "pole_zero":
        p[0] = min(max(p[0], 0.0), _RADIUS_MAX)
        p[1] = min(max(p[1], 0.0), math.pi)
        if p.size > 3:
            p[3] = min(max(p[3], -_LOG_QW_LIM), _LOG_QW_LIM)
    else:
        lim0 = 1.0 - JURY_MARGIN
        p[0] = min(max(p[0], -lim0), lim0)
        lim1 = (1.0 + p[0]) * (1.0 - JURY_MARGIN)
        p[1] = min(max(p[1], -lim1), lim1)
        if p.size > 4:
            p[4] = min(max(p[4], -_LOG_QW_LIM), _LOG_QW_LIM)
    return p


def params_to_filter(params, parameterization: str = "pole_zero"):
    """Decode a (projected) parameter vector into (filter, Q_w multiplier).

    pole_zero vectors are [radius, angle_rad, zero, log_qw] with the filter
    gain pinned to 1; direct_gamma vectors are [g0, g1, g2, g3, log_qw].
    """
    p = np.asarray(params, dtype=float)
    if parameterization == "pole_zero":
        filt = filter_from_poles_zero(p[0], math.degrees(p[1]), p[2], 1.0)
        log_qw = p[3] if p.size > 3 else 0.0
    else:
        filt = make_coloring_filter(p[0], p[1], p[2], p[3])
        log_qw = p[4] if p.size > 4 else 0.0
    return filt, math.exp(log_qw)


def initial_params(parameterization: str = "pole_zero") -> np.ndarray:
    """Neutral starting point: mild coloring guess, unit Q_w multiplier."""
    if parameterization == "pole_zero":
        return np.array([0.5, math.pi / 2.0, 0.0, 0.0])
    return np.array([0.0, 0.0, 0.0, 1.0, 0.0])


def _window_cost(innov, lag_count: int, burn: int) -> float:
    """Whiteness cost of a replayed innovation window after burn-in."""
    from .whiteness import InnovationsLog, whiteness_cost

    kept = innov[burn:]
    if kept.size <= lag_count:
        raise InsufficientData("window too short after burn-in")
    return whiteness_cost(InnovationsLog(kept), max_lag=lag_count)


def evaluate_objective(
    params,
    buffer,
    base_system: LtiSystem,
    Q_w: float,
    R,
    config: AdaptationConfig,
    x_plant=None,
) -> float:
    """Whiteness cost J of the augmented KF replayed over the buffer.

    Deterministic: the replay always restarts from the supplied plant
    estimate (zeros by default) with a diffuse covariance, and the leading
    burn-in fraction of the window is discarded before scoring.
    """
    p = project_to_stable(params, config.parameterization)
    filt, qw_mult = params_to_filter(p, config.parameterization)
    aug = augment(base_system, filt)
    qw = Q_w * qw_mult
    Q_eff = aug.B_aug @ aug.B_aug.T * qw
    y = np.asarray(buffer, dtype=float).ravel()
    if y.size < config.start_window:
        raise InsufficientData(
            f"buffer holds {y.size} samples; at least {config.start_window} needed"
        )
    n_aug = aug.n
    x0 = np.zeros(n_aug)
    if x_plant is not None:
        x0[: base_system.n] = np.asarray(x_plant, dtype=float).ravel()
    P0 = config.p0_scale * np.eye(n_aug)
    r = float(np.atleast_2d(np.asarray(R, dtype=float))[0, 0])
    innov, _, _ = kernels.kf_run(aug.A_aug, aug.C_aug[0], Q_eff, r, x0, P0, y)
    burn = int(config.burn_in_frac * y.size)
    return _window_cost(innov, config.lag_count, burn)


@dataclass
class OptimizationResult:
    params: np.ndarray
    cost: float
    eval_count: int
    converged: bool
    budget_exhausted: bool


_SIMPLEX_STEPS = {
    "pole_zero": np.array([0.15, 0.4, 0.75, 0.75]),
    "direct_gamma": np.array([0.2, 0.2, 0.5, 0.5, 0.75]),
}


def optimize_gamma(
    objective, params_init, config: AdaptationConfig
) -> OptimizationResult:
    """Nelder-Mead search over the filter parameters.

    Every candidate is projected to the stable region before evaluation.
    On stagnation without convergence, one restart from the incumbent with a
    shrunk simplex spends the remaining budget.
    """
    params_init = project_to_stable(params_init, config.parameterization)
    evals = 0

    def wrapped(p):
        nonlocal evals
        evals += 1
        return objective(project_to_stable(p, config.parameterization))

    def run(x0, scale, budget):
        steps = _SIMPLEX_STEPS[config.parameterization][: x0.size] * scale
        simplex = np.vstack([x0] + [x0 + steps[i] * np.eye(x0.size)[i] for i in range(x0.size)])
        return scipy.optimize.minimize(
            wrapped,
            x0,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "maxfev": budget,
                "xatol": config.tolerance,
                "fatol": config.tolerance,
                "adaptive": False,
            },
        )

    res = run(params_init, config.simplex_init_scale, config.max_evals)
    if not res.success and evals < config.max_evals:
        res2 = run(
            project_to_stable(res.x, config.parameterization),
            0.25 * config.simplex_init_scale,
            config.max_evals - evals,
        )
        if res2.fun < res.fun:
            res = res2
    best = project_to_stable(res.x, config.parameterization)
    budget_exhausted = evals >= config.max_evals and not res.success
    return OptimizationResult(best, float(res.fun), evals, bool(res.success), budget_exhausted)


@dataclass
class AdaptationState:
    """Mutable state of one streaming adaptation run."""

    base_system: LtiSystem
    config: AdaptationConfig
    params: np.ndarray
    current_filter: ColoringFilter
    qw_mult: float
    kf_state: FilterState
    aug_system: LtiSystem
    Q_eff: np.ndarray
    buffer: deque
    step: int = 0
    current_cost: float = math.inf
    cost_history: list = field(default_factory=list)
    gamma_history: list = field(default_factory=list)


def init_adaptation(
    base_system: LtiSystem, config: AdaptationConfig, params0=None
) -> AdaptationState:
    params0 = (
        initial_params(config.parameterization)
        if params0 is None
        else project_to_stable(params0, config.parameterization)
    )
    filt, qw_mult = params_to_filter(params0, config.parameterization)
    aug = augment(base_system, filt)
    return AdaptationState(
        base_system=base_system,
        config=config,
        params=np.asarray(params0, dtype=float),
        current_filter=filt,
        qw_mult=qw_mult,
        kf_state=FilterState.initial(aug.n, config.p0_scale),
        aug_system=aug.as_system(),
        Q_eff=np.zeros((aug.n, aug.n)),
        buffer=deque(maxlen=config.window_length),
        gamma_history=[filt.gamma],
    )


def _swap_filter(state: AdaptationState, params, Q_w: float):
    """Install new filter parameters, preserving the plant-state estimate.

    Filter-state entries restart at zero with their stationary covariance
    under the new parameters; plant and cross covariance blocks with the old
    filter states are discarded.
    """
    from .model import stationary_state_covariance

    n = state.base_system.n
    filt, qw_mult = params_to_filter(params, state.config.parameterization)
    aug = augment(state.base_system, filt)
    x = np.zeros(aug.n)
    x[:n] = state.kf_state.x_da[:n]
    P = np.zeros((aug.n, aug.n))
    P[:n, :n] = state.kf_state.P_da[:n, :n]
    P[n:, n:] = stationary_state_covariance(filt.A_H, filt.B_H, Q_w * qw_mult)
    state.params = np.asarray(params, dtype=float)
    state.current_filter = filt
    state.qw_mult = qw_mult
    state.aug_system = aug.as_system()
    state.Q_eff = aug.B_aug @ aug.B_aug.T * (Q_w * qw_mult)
    state.kf_state = FilterState(x, P)
    state.gamma_history.append(filt.gamma)


def _maybe_reoptimize(state: AdaptationState, Q_w: float, R) -> None:
    cfg = state.config
    if len(state.buffer) < cfg.start_window:
        return
    window = np.array(state.buffer, dtype=float)
    x_plant = state.kf_state.x_da[: state.base_system.n]

    def objective(p):
        return evaluate_objective(p, window, state.base_system, Q_w, R, cfg, x_plant)

    j_current = objective(state.params)
    # Re-validated on fresh data every event: skip the search only while the
    # incumbent still scores at white-noise level on the current window.
    n_eff = int((1.0 - cfg.burn_in_frac) * len(window))
    if cfg.skip_factor > 0 and j_current < cfg.skip_factor * cfg.lag_count / n_eff:
        state.current_cost = j_current
        state.cost_history.append((state.step, j_current, False))
        return
    result = optimize_gamma(objective, state.params, cfg)
    accepted = result.cost < j_current
    if accepted:
        _swap_filter(state, result.params, Q_w)
        state.current_cost = result.cost
    else:
        state.current_cost = j_current
    state.cost_history.append(
        (state.step, result.cost if accepted else j_current, accepted)
    )


def adapt_step(
    state: AdaptationState, y_k: float, Q_w: float, R, u=None
):
    """Process one measurement; periodically re-optimize the coloring filter.

    Returns the step record of the augmented KF step taken with the filter
    that was current when the measurement arrived.
    """
    from .kalman import kf_step

    if not state.Q_eff.any():
        aug = augment(state.base_system, state.current_filter)
        state.Q_eff = aug.B_aug @ aug.B_aug.T * (Q_w * state.qw_mult)
    new_state, rec = kf_step(state.kf_state, state.aug_system, state.Q_eff, R, u, y_k)
    state.kf_state = new_state
    state.buffer.append(float(np.atleast_1d(y_k)[0]))
    state.step += 1
    if state.step % state.config.reopt_period == 0:
        _maybe_reoptimize(state, Q_w, R)
    return rec


def adapt_run(
    state: AdaptationState, measurements, Q_w: float, R
):
    """Fast batch equivalent of repeated `adapt_step` calls.

    Between re-optimization boundaries the filter is fixed, so each segment
    is replayed through the compiled kernel in one call.  Returns the
    innovation sequence and the plant-block posterior means.
    """
    y = np.asarray(measurements, dtype=float).ravel()
    cfg = state.config
    n = state.base_system.n
    r = float(np.atleast_2d(np.asarray(R, dtype=float))[0, 0])
    innov = np.empty(y.size)
    x_plant = np.empty((y.size, n))
    pos = 0
    while pos < y.size:
        until_reopt = cfg.reopt_period - (state.step % cfg.reopt_period)
        seg = min(until_reopt, y.size - pos)
        if not state.Q_eff.any():
            aug = augment(state.base_system, state.current_filter)
            state.Q_eff = aug.B_aug @ aug.B_aug.T * (Q_w * state.qw_mult)
        zi, xda, P = kernels.kf_run(
            state.aug_system.A,
            state.aug_system.C[0],
            state.Q_eff,
            r,
            state.kf_state.x_da,
            state.kf_state.P_da,
            y[pos : pos + seg],
        )
        innov[pos : pos + seg] = zi
        x_plant[pos : pos + seg] = xda[:, :n]
        state.kf_state = FilterState(xda[-1], P)
        state.buffer.extend(y[pos : pos + seg])
        state.step += seg
        pos += seg
        if state.step % cfg.reopt_period == 0:
            _maybe_reoptimize(state, Q_w, R)
    return innov, x_plant
