"""Manufactured solutions and test fields on the unit square.

The main pair is u* = sin(t) curl Psi with Psi = x^2(1-x)^2 y^2(1-y)^2 and
p* = sin(t)(x - 1/2); u* is divergence free and vanishes together with its
gradient on the boundary, and p* has zero mean.  The forcing
f = du*/dt + (u*.grad)u* - lap(u*) + grad p* is coded in closed form from
the partial derivatives of Psi.

``curl_bump_field`` is the t-independent curl(Psi).  ``spline_bump_field``
is a genuinely compactly supported divergence-free field (a C^2 cubic
B-spline stream bump supported in [1/4, 3/4]^2, piecewise polynomial with
knots at multiples of 1/8, so it is cell aligned on the structured meshes
with n a multiple of 8 and all its interpolation integrals are exact).
"""

import numpy as np

from .interp import AnalyticVectorField

__all__ = [
    "velocity", "velocity_gradient", "pressure", "forcing", "initial_velocity",
    "curl_bump_field", "spline_bump_field",
]


def _g(s):
    return s * s * (1.0 - s) ** 2


def _dg(s):
    return 2.0 * s - 6.0 * s ** 2 + 4.0 * s ** 3


def _d2g(s):
    return 2.0 - 12.0 * s + 12.0 * s ** 2


def _d3g(s):
    return -12.0 + 24.0 * s


def velocity(points, t):
    """u*(x, t) = sin(t) (g(x) g'(y), -g'(x) g(y)); shape (m, 2)."""
    p = np.asarray(points, dtype=float)
    x, y = p[..., 0], p[..., 1]
    s = np.sin(t)
    return np.stack([s * _g(x) * _dg(y), -s * _dg(x) * _g(y)], axis=-1)


def velocity_gradient(points, t):
    """Jacobian d u_i / d x_j, shape (m, 2, 2)."""
    p = np.asarray(points, dtype=float)
    x, y = p[..., 0], p[..., 1]
    s = np.sin(t)
    out = np.empty(p.shape[:-1] + (2, 2))
    out[..., 0, 0] = s * _dg(x) * _dg(y)
    out[..., 0, 1] = s * _g(x) * _d2g(y)
    out[..., 1, 0] = -s * _d2g(x) * _g(y)
    out[..., 1, 1] = -s * _dg(x) * _dg(y)
    return out


def pressure(points, t):
    p = np.asarray(points, dtype=float)
    return np.sin(t) * (p[..., 0] - 0.5)


def forcing(points, t):
    """Momentum residual of (u*, p*): du/dt + (u.grad)u - lap u + grad p."""
    p = np.asarray(points, dtype=float)
    x, y = p[..., 0], p[..., 1]
    s, c = np.sin(t), np.cos(t)
    gx, gy = _g(x), _g(y)
    dgx, dgy = _dg(x), _dg(y)
    d2gx, d2gy = _d2g(x), _d2g(y)
    d3gx, d3gy = _d3g(x), _d3g(y)

    u1 = s * gx * dgy
    u2 = -s * dgx * gy
    du1dx = s * dgx * dgy
    du1dy = s * gx * d2gy
    du2dx = -s * d2gx * gy
    du2dy = -s * dgx * dgy

    f1 = (c * gx * dgy
          + u1 * du1dx + u2 * du1dy
          - s * (d2gx * dgy + gx * d3gy)
          + s)
    f2 = (-c * dgx * gy
          + u1 * du2dx + u2 * du2dy
          + s * (d3gx * gy + dgx * d2gy))
    return np.stack([f1, f2], axis=-1)


def initial_velocity(points):
    return velocity(points, 0.0)


def curl_bump_field():
    """curl(Psi): divergence free, zero trace and gradient on the boundary.

    Polynomial of total degree 7, so its interpolation-correction integrals
    are exact under the degree-10 rule.  Not compactly supported: it is
    nonzero arbitrarily close to the boundary.
    """

    def value(points):
        return velocity(points, np.pi / 2.0)

    def gradient(points):
        return velocity_gradient(points, np.pi / 2.0)

    return AnalyticVectorField(value=value, gradient=gradient,
                               support=(0.0, 1.0, 0.0, 1.0),
                               divergence_free=True)


# cubic B-spline on [0, 4]
def _b3(t):
    t = np.asarray(t, dtype=float)
    return np.select(
        [(t >= 0) & (t < 1), (t >= 1) & (t < 2), (t >= 2) & (t < 3),
         (t >= 3) & (t <= 4)],
        [t ** 3 / 6.0,
         (-3.0 * t ** 3 + 12.0 * t ** 2 - 12.0 * t + 4.0) / 6.0,
         (3.0 * t ** 3 - 24.0 * t ** 2 + 60.0 * t - 44.0) / 6.0,
         (4.0 - t) ** 3 / 6.0],
        0.0)


def _db3(t):
    t = np.asarray(t, dtype=float)
    return np.select(
        [(t >= 0) & (t < 1), (t >= 1) & (t < 2), (t >= 2) & (t < 3),
         (t >= 3) & (t <= 4)],
        [t ** 2 / 2.0,
         (-9.0 * t ** 2 + 24.0 * t - 12.0) / 6.0,
         (9.0 * t ** 2 - 48.0 * t + 60.0) / 6.0,
         -((4.0 - t) ** 2) / 2.0],
        0.0)


def _d2b3(t):
    t = np.asarray(t, dtype=float)
    return np.select(
        [(t >= 0) & (t < 1), (t >= 1) & (t < 2), (t >= 2) & (t < 3),
         (t >= 3) & (t <= 4)],
        [t, 4.0 - 3.0 * t, 3.0 * t - 8.0, 4.0 - t],
        0.0)


def _spline(x):
    return _b3(8.0 * x - 2.0)


def _dspline(x):
    return 8.0 * _db3(8.0 * x - 2.0)


def _d2spline(x):
    return 64.0 * _d2b3(8.0 * x - 2.0)


def spline_bump_field():
    """curl(S(x) S(y)) with S a cubic B-spline bump on [1/4, 3/4]."""

    def value(points):
        p = np.asarray(points, dtype=float)
        x, y = p[..., 0], p[..., 1]
        return np.stack([_spline(x) * _dspline(y), -_dspline(x) * _spline(y)],
                        axis=-1)

    def gradient(points):
        p = np.asarray(points, dtype=float)
        x, y = p[..., 0], p[..., 1]
        out = np.empty(p.shape[:-1] + (2, 2))
        out[..., 0, 0] = _dspline(x) * _dspline(y)
        out[..., 0, 1] = _spline(x) * _d2spline(y)
        out[..., 1, 0] = -_d2spline(x) * _spline(y)
        out[..., 1, 1] = -_dspline(x) * _dspline(y)
        return out

    return AnalyticVectorField(value=value, gradient=gradient,
                               support=(0.25, 0.75, 0.25, 0.75),
                               divergence_free=True)
