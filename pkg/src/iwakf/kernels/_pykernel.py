"""Pure-numpy fallback for the scalar-measurement KF replay kernel."""

import numpy as np

BACKEND = "python"


def kf_run(A, c, Q, r, x0, P0, y):
    """Run the KF recursion over a measurement window (m = 1).

    Parameters are the dense dynamics A (n x n), output row c (n,), effective
    process-noise covariance Q (n x n), scalar measurement variance r,
    initial posterior (x0, P0) and the measurement sequence y (N,).

    Returns (innovations (N,), posterior means (N, n), final posterior
    covariance (n, n)).
    """
    A = np.ascontiguousarray(A, dtype=float)
    c = np.ascontiguousarray(c, dtype=float).ravel()
    Q = np.ascontiguousarray(Q, dtype=float)
    y = np.ascontiguousarray(y, dtype=float).ravel()
    x = np.array(x0, dtype=float).ravel().copy()
    P = np.array(P0, dtype=float).copy()
    n = A.shape[0]
    N = y.size
    innov = np.empty(N)
    xda = np.empty((N, n))
    for k in range(N):
        x = A @ x
        P = A @ P @ A.T + Q
        P = (P + P.T) / 2.0
        Pc = P @ c
        s = float(c @ Pc + r)
        z = y[k] - float(c @ x)
        K = Pc / s
        x = x + K * z
        P = P - np.outer(K, Pc)
        P = (P + P.T) / 2.0
        innov[k] = z
        xda[k] = x
    return innov, xda, P
