"""Rational B-spline trajectories over the unit parameter interval.

Curves are clamped (endpoint-interpolating) with uniform interior knots.
Basis functions follow the Cox-de Boor recursion with the 0/0 := 0
convention; the parameter end u = 1 belongs to the last non-empty span so
the basis still sums to one there.

Because control weights stay fixed during optimization, sampling a curve at
fixed parameters is a constant coefficient matrix times the control points,
which keeps curve evaluation differentiable with a single matmul.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad


def clamped_uniform_knots(n_controls: int, degree: int) -> np.ndarray:
    if n_controls < degree + 1:
        raise ValueError(
            f"need at least degree+1={degree + 1} control points, got {n_controls}")
    interior = n_controls - degree - 1
    inner = np.arange(1, interior + 1) / (interior + 1)
    return np.concatenate([np.zeros(degree + 1), inner, np.ones(degree + 1)])


def basis_function(i: int, p: int, u: float, knots: np.ndarray) -> float:
    """Cox-de Boor recursion for N_{i,p}(u)."""
    if p == 0:
        if knots[i] <= u < knots[i + 1]:
            return 1.0
        # close the final span so u = 1 is covered
        if u == knots[-1] and knots[i] < knots[i + 1] == knots[-1]:
            return 1.0
        return 0.0
    total = 0.0
    left_den = knots[i + p] - knots[i]
    if left_den > 0.0:
        total += (u - knots[i]) / left_den * basis_function(i, p - 1, u, knots)
    right_den = knots[i + p + 1] - knots[i + 1]
    if right_den > 0.0:
        total += (knots[i + p + 1] - u) / right_den \
            * basis_function(i + 1, p - 1, u, knots)
    return total


def basis_row(u: float, n_controls: int, degree: int, knots: np.ndarray) -> np.ndarray:
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"curve parameter {u} outside [0, 1]")
    return np.array([basis_function(i, degree, u, knots)
                     for i in range(n_controls)])


@dataclass
class NurbsCurve:
    """One rational curve: (K+1, dims) control points with positive weights."""

    controls: np.ndarray
    weights: np.ndarray
    degree: int = 3
    knots: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.controls = np.asarray(self.controls, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.controls.ndim != 2:
            raise ValueError("controls must be (K+1, dims)")
        if self.weights.shape != (len(self.controls),):
            raise ValueError("one weight per control point required")
        if np.any(self.weights <= 0.0):
            raise ValueError("control weights must be strictly positive")
        if self.knots is None:
            self.knots = clamped_uniform_knots(len(self.controls), self.degree)

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    def coefficient_row(self, u: float) -> np.ndarray:
        """Rational blending coefficients at u; they sum to one."""
        basis = basis_row(u, self.n_controls, self.degree, self.knots)
        weighted = basis * self.weights
        return weighted / weighted.sum()

    def coefficient_matrix(self, s_values) -> np.ndarray:
        return np.stack([self.coefficient_row(float(s)) for s in s_values])

    def evaluate(self, s_values) -> np.ndarray:
        """Curve points at the given parameters, (S, dims)."""
        return self.coefficient_matrix(s_values) @ self.controls


def sample_controls(coeff_matrix: np.ndarray, controls) -> ad.Tensor:
    """Differentiable sampling: constant coefficients times (tracked) controls."""
    controls = controls if isinstance(controls, ad.Tensor) else ad.constant(controls)
    return ad.matmul(ad.constant(coeff_matrix), controls)


def projection_indices(t_frames: int, n_controls: int, closed: bool) -> np.ndarray:
    """Dense-sample index for each control point.

    Open curves spread controls over [0, T-1]; closed curves over [0, T]
    where index T refers to a repeat of sample 0.
    """
    k = n_controls - 1
    span = t_frames if closed else t_frames - 1
    return np.rint(np.arange(n_controls) * span / k).astype(int)


def project_trajectory(dense: np.ndarray, n_controls: int, degree: int = 3,
                       closed: bool = False,
                       control_weights=None) -> NurbsCurve:
    """Fit a curve to a dense (T, dims) trajectory by sampling control points.

    Control points are taken at uniform indices of the dense array; a closed
    projection appends the first sample again as the final control point so
    the clamped curve returns to its start at s = 1.
    """
    dense = np.asarray(dense, dtype=np.float64)
    if dense.ndim != 2:
        raise ValueError("dense trajectory must be (T, dims)")
    t_frames = len(dense)
    idx = projection_indices(t_frames, n_controls, closed)
    if closed:
        padded = np.concatenate([dense, dense[:1]], axis=0)
        controls = padded[idx]
    else:
        controls = dense[idx]
    if control_weights is None:
        control_weights = np.ones(n_controls)
    return NurbsCurve(controls.copy(), np.asarray(control_weights, dtype=np.float64),
                      degree=degree)
