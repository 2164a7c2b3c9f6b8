"""Independent reference implementations used as test oracles."""

import numpy as np


def riccati_finite(A, B, Q, R, QT, T):
    """Finite-horizon discrete LQR: gains K_t with u_t = K_t x_t, t = 0..T-1."""
    P = QT.copy()
    gains = [None] * T
    for t in range(T - 1, -1, -1):
        K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        gains[t] = K
        P = Q + A.T @ P @ (A + B @ K)
    return np.array(gains), P


def riccati_infinite(A, B, Q, R, iters=20_000, tol=1e-14):
    """Stationary LQR gain by fixed-point iteration of the Riccati map."""
    P = Q.copy()
    for _ in range(iters):
        K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        Pn = Q + A.T @ P @ (A + B @ K)
        if np.max(np.abs(Pn - P)) < tol:
            P = Pn
            break
        P = Pn
    K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    return K, P


def simulate_linear(A, B, gains, x0):
    x = np.asarray(x0, float)
    xs, us = [x], []
    for K in gains:
        u = K @ x
        x = A @ x + B @ u
        us.append(u)
        xs.append(x)
    return np.array(xs), np.array(us)


def central_diff(f, x, h=1e-6):
    """Central-difference Jacobian of f: R^n -> R^m (or scalar)."""
    x = np.asarray(x, float)
    f0 = np.atleast_1d(f(x))
    J = np.zeros((f0.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        J[:, i] = (np.atleast_1d(f(x + e)) - np.atleast_1d(f(x - e))) / (2 * h)
    return J
