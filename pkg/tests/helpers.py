"""Shared test oracles: finite differences and gradient comparison."""

import numpy as np


def central_fd(f, x, h=1e-6):
    """Coordinate-wise central finite differences of a scalar function.

    f takes an array shaped like x and returns a float.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_grad = grad.reshape(-1)
    flat = x.reshape(-1)
    for i in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += h
        xm[i] -= h
        flat_grad[i] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2.0 * h)
    return grad


def central_fd_subset(f, x, coords, h=1e-5):
    """Central differences at a subset of flat coordinate indices."""
    x = np.asarray(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = np.zeros(len(coords))
    for k, i in enumerate(coords):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += h
        xm[i] -= h
        out[k] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2.0 * h)
    return out


def grad_errors(analytic, numeric, small=1e-3):
    """(max relative error on large coords, max absolute error on small ones).

    A coordinate counts as small when both estimates are below `small`.
    """
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    assert a.shape == n.shape
    scale = np.maximum(np.abs(a), np.abs(n))
    big = scale >= small
    rel = np.abs(a - n)[big] / scale[big] if big.any() else np.zeros(1)
    abs_err = np.abs(a - n)[~big] if (~big).any() else np.zeros(1)
    return float(rel.max()), float(abs_err.max())


def assert_grad_close(analytic, numeric, rel_tol=1e-4, abs_tol=1e-6, small=1e-3):
    rel, abs_err = grad_errors(analytic, numeric, small=small)
    assert rel <= rel_tol, f"relative gradient error {rel:.3e} > {rel_tol:.0e}"
    assert abs_err <= abs_tol, f"absolute gradient error {abs_err:.3e} > {abs_tol:.0e}"
