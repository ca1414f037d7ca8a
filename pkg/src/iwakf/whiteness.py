"""Whiteness diagnostics for innovation sequences.

Covers the empirical side (lagged autocorrelation, the scalar whiteness cost,
Bartlett confidence bounds, Welch spectra) and the theoretical side: the
closed-loop transfer operators from noise inputs to innovations and the
resulting innovations power spectral density, used as a numerical check that
white process noise gives a flat innovations spectrum and vice versa.

PSD convention: Phi(phi) is normalized so that a unit-variance white sequence
has Phi == 1 at every frequency, i.e. variance = (1/2pi) * integral of Phi
over (-pi, pi].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.signal
import scipy.stats

from .errors import InsufficientData, RankDeficient, UnstableClosedLoop
from .model import LtiSystem, spectral_radius

_DEGENERATE_EIG = 1e-14


@dataclass(frozen=True)
class InnovationsLog:
    """Time-ordered innovation samples, shape (N, m)."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] < 1:
            raise InsufficientData(f"need an (N, m) sample array, got shape {s.shape}")
        object.__setattr__(self, "samples", s)

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    @property
    def m(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class AutocorrEstimate:
    """Sample covariance at lag 0 plus lagged cross-covariances.

    `normalized[l]` is D^{-1/2} Gamma(l) D^{-1/2} with D = diag(Gamma(0));
    in the scalar case simply Gamma(l)/Gamma(0).  `degenerate` flags a
    near-zero lag-0 variance, in which case normalized values are zeroed.
    """

    lag0: np.ndarray
    lags: dict = field(repr=False)
    normalized: dict = field(repr=False)
    degenerate: bool = False

    def normalized_scalar(self, lag: int) -> float:
        v = self.normalized[lag]
        return float(np.atleast_2d(v)[0, 0])


@dataclass(frozen=True)
class PsdCurve:
    """PSD samples on a frequency grid in [0, pi]; values shape (n_freq, m, m)."""

    frequencies: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v[:, None, None]
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)

    def scalar(self) -> np.ndarray:
        return self.values[:, 0, 0].real


def empirical_autocorrelation(
    log: InnovationsLog, max_lag: int, remove_mean: bool = True
) -> AutocorrEstimate:
    """Biased lagged autocovariance estimator, normalized by the lag-0 variance.

    Gamma(l) = (1/N) sum_{k=l+1}^{N} (z_k - zbar)(z_{k-l} - zbar)^T.
    """
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if log.N <= max_lag:
        raise InsufficientData(f"N={log.N} too short for max_lag={max_lag}")
    z = log.samples
    if remove_mean:
        z = z - z.mean(axis=0)
    N = log.N
    lag0 = (z.T @ z) / N
    d = np.diag(lag0).copy()
    degenerate = bool(np.any(d < _DEGENERATE_EIG))
    lags, normalized = {}, {}
    if not degenerate:
        dinv = 1.0 / np.sqrt(d)
        scale = np.outer(dinv, dinv)
    for lag in range(1, max_lag + 1):
        g = (z[lag:].T @ z[:-lag]) / N
        lags[lag] = g
        normalized[lag] = np.zeros_like(g) if degenerate else g * scale
    return AutocorrEstimate(lag0, lags, normalized, degenerate)


def whiteness_cost(
    log: InnovationsLog, lags=None, max_lag: int = 10, remove_mean: bool = True
) -> float:
    """J = sum over the lag set of ||normalized Gamma(l)||_F^2.

    Invariant under rescaling of the sequence; zero for an empty lag set.
    """
    if lags is None:
        lags = range(1, max_lag + 1)
    lags = sorted(set(int(l) for l in lags))
    if not lags:
        return 0.0
    est = empirical_autocorrelation(log, max(lags), remove_mean=remove_mean)
    return float(sum(np.sum(np.abs(est.normalized[l]) ** 2) for l in lags))


def whiteness_bound(N: int, confidence: float = 0.95) -> float:
    """Bartlett bound q/sqrt(N) with q the two-sided Gaussian quantile."""
    if N < 30:
        raise ValueError("bound is asymptotic; need N >= 30")
    q = scipy.stats.norm.ppf(0.5 + confidence / 2.0)
    return float(q / np.sqrt(N))


def _closed_loop_operators(system: LtiSystem, K_ss, F_ss, phi: float):
    """G and H evaluated at z = e^{j phi}.

    From the steady-state error recursion, the innovation is
    z_k = (I - G(q^{-1})) n_k + H(q^{-1}) B v_k with
    G = C (zI - F)^{-1} A K and H = C (zI - F)^{-1} z (direct term included).
    """
    z = np.exp(1j * phi)
    n = F_ss.shape[0]
    resolvent = np.linalg.inv(z * np.eye(n) - F_ss)
    G = system.C @ resolvent @ system.A @ K_ss
    H = system.C @ resolvent * z
    return G, H


def innovations_psd_theoretical(
    system: LtiSystem,
    K_ss,
    F_ss,
    R,
    phi_v,
    grid=None,
) -> PsdCurve:
    """Innovations PSD Phi_z = (I-G) R (I-G)* + (H B) Phi_v (H B)*.

    `phi_v` is either a constant l x l covariance (white process noise) or a
    PsdCurve sampled on the same grid.
    """
    if spectral_radius(F_ss) >= 1.0:
        raise UnstableClosedLoop("spectral radius of A(I-KC) >= 1")
    K_ss = np.atleast_2d(np.asarray(K_ss, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if grid is None:
        grid = (
            phi_v.frequencies
            if isinstance(phi_v, PsdCurve)
            else np.linspace(0.0, np.pi, 256)
        )
    grid = np.asarray(grid, dtype=float)
    m = system.m
    values = np.empty((grid.size, m, m), dtype=complex)
    Im = np.eye(m)
    for i, phi in enumerate(grid):
        G, H = _closed_loop_operators(system, K_ss, F_ss, phi)
        HB = H @ system.B
        Sv = (
            phi_v.values[i]
            if isinstance(phi_v, PsdCurve)
            else np.atleast_2d(np.asarray(phi_v, dtype=float))
        )
        values[i] = (Im - G) @ R @ (Im - G).conj().T + HB @ Sv @ HB.conj().T
    return PsdCurve(grid, values)


def recover_phi_v(phi_z: PsdCurve, system: LtiSystem, K_ss, F_ss, R) -> PsdCurve:
    """Invert the innovations PSD back to the process-noise PSD.

    Phi_v = (HB)^+ (Phi_z - (I-G) R (I-G)*) (HB)^{+*}, pointwise on the grid.
    """
    if spectral_radius(F_ss) >= 1.0:
        raise UnstableClosedLoop("spectral radius of A(I-KC) >= 1")
    K_ss = np.atleast_2d(np.asarray(K_ss, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    l = system.l
    m = system.m
    Im = np.eye(m)
    out = np.empty((phi_z.frequencies.size, l, l), dtype=complex)
    for i, phi in enumerate(phi_z.frequencies):
        G, H = _closed_loop_operators(system, K_ss, F_ss, phi)
        HB = H @ system.B
        smin = np.linalg.svd(HB, compute_uv=False)[-1]
        if smin < 1e-8:
            raise RankDeficient(
                f"noise-to-innovation operator nearly rank deficient at phi={phi:.4f}"
            )
        pinv = np.linalg.pinv(HB)
        residual = phi_z.values[i] - (Im - G) @ R @ (Im - G).conj().T
        out[i] = pinv @ residual @ pinv.conj().T
    return PsdCurve(phi_z.frequencies, out)


def flatness_ratio(curve: PsdCurve) -> float:
    """Max over min of the scalar PSD trace across the grid."""
    tr = np.trace(curve.values, axis1=1, axis2=2).real
    return float(tr.max() / tr.min())


def welch_psd(series, segment_length: int = 1024, overlap: float = 0.5) -> PsdCurve:
    """Averaged Hann-windowed periodogram on the one-sided grid [0, pi].

    Scaled so that unit-variance white noise has mean level 1.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 2 * segment_length:
        raise InsufficientData(
            f"N={x.size} too short for segment_length={segment_length}"
        )
    noverlap = int(segment_length * overlap)
    freqs, pxx = scipy.signal.welch(
        x,
        fs=2.0 * np.pi,
        window="hann",
        nperseg=segment_length,
        noverlap=noverlap,
        detrend="constant",
        return_onesided=False,
        scaling="density",
    )
    # Keep the [0, pi] half of the two-sided density; scale so variance-1
    # white noise sits at level 1.
    keep = (freqs >= 0) & (freqs <= np.pi)
    order = np.argsort(freqs[keep])
    return PsdCurve(freqs[keep][order], 2.0 * np.pi * pxx[keep][order])


def autocorr_csv_rows(est: AutocorrEstimate, bound: float = None):
    """Rows (lag, normalized value[, bound]) for CSV serialization."""
    rows = []
    for lag in sorted(est.normalized):
        row = [lag, est.normalized_scalar(lag)]
        if bound is not None:
            row.append(bound)
        rows.append(row)
    return rows
