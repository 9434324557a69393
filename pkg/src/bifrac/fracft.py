r"""Fractional Fourier transform kernel and its quadrature.

The kernel is

.. math::
    \Delta(x, y; \theta) = \sqrt{\frac{1 + i\cot\theta}{2\pi}}
    \exp\left[-\tfrac{i}{2}(x^2 + y^2)\cot\theta + \frac{i x y}{\sin\theta}\right]

with the principal square root.  With that branch the kernel is the position
representation of ``exp(i theta a^dag a)``: Hermite function ``n`` picks up the
phase ``exp(i n theta)`` (the ground state is mapped to itself with phase 1) and
the composition law holds for every pair of angles, including sums that wrap
around ``pi``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AsymmetricGrid, QuadratureDivergence, SpecialAngle, TailTooFat

__all__ = [
    "EPS_ANGLE",
    "FracAngle",
    "SampledFunction",
    "reduce_angle",
    "special_value",
    "kernel_value",
    "apply_fracft",
    "compose_kernels",
    "hermite_function",
]

EPS_ANGLE = 1e-9
EPS_TAIL = 1e-8

_SPECIALS = (0.0, np.pi / 2, np.pi, -np.pi / 2)


def reduce_angle(theta):
    """Map an angle to the interval (-pi, pi]."""
    if -np.pi < theta <= np.pi:
        return float(theta)
    r = np.mod(theta + np.pi, 2 * np.pi) - np.pi
    if r <= -np.pi:
        r += 2 * np.pi
    # values just below -pi after rounding belong to +pi
    if abs(r + np.pi) < 1e-15:
        r = np.pi
    return float(r)


def special_value(theta, eps=EPS_ANGLE):
    """Return the special angle that `theta` sits on, or None.

    The angle is reduced to (-pi, pi] first; ``-pi`` and ``pi`` are the same
    special point.
    """
    t = reduce_angle(theta)
    for s in _SPECIALS:
        if abs(t - s) < eps:
            return s
    if abs(t + np.pi) < eps:
        return np.pi
    return None


@dataclass(frozen=True)
class FracAngle:
    """An angle reduced to (-pi, pi] together with its classification."""

    theta: float
    eps: float = EPS_ANGLE

    def __post_init__(self):
        object.__setattr__(self, "theta", reduce_angle(float(self.theta)))

    @property
    def special(self):
        return special_value(self.theta, self.eps)

    @property
    def is_regular(self):
        return self.special is None

    def __float__(self):
        return self.theta


def _theta(theta):
    return theta.theta if isinstance(theta, FracAngle) else reduce_angle(float(theta))


@dataclass(frozen=True)
class SampledFunction:
    """Complex samples on the uniform grid ``x0 + step * arange(count)``."""

    x0: float
    step: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("need at least two samples on a 1-D grid")
        if not self.step > 0:
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, func, lo=-8.0, hi=8.0, count=512):
        x = np.linspace(lo, hi, count)
        return cls(float(lo), float(x[1] - x[0]), func(x))

    @property
    def count(self):
        return self.values.size

    @property
    def x(self):
        return self.x0 + self.step * np.arange(self.count)

    def norm(self):
        """Discrete L2 norm (trapezoid weights)."""
        w = np.full(self.count, self.step)
        w[[0, -1]] *= 0.5
        return float(np.sqrt(np.sum(w * np.abs(self.values) ** 2)))

    def with_values(self, values):
        return SampledFunction(self.x0, self.step, values)


def _kernel(x, y, theta):
    # complex-safe: y may lie on a rotated integration contour
    cot = np.cos(theta) / np.sin(theta)
    pref = np.sqrt((1 + 1j * cot) / (2 * np.pi))
    return pref * np.exp(-0.5j * (x * x + y * y) * cot + 1j * x * y / np.sin(theta))


def kernel_value(x, y, theta):
    """Kernel value at a regular angle.

    Parameters
    ----------
    x, y : float or array_like
    theta : float or FracAngle

    Raises
    ------
    SpecialAngle
        If theta is within ``EPS_ANGLE`` of 0, +-pi/2 or pi.  The cases 0 and
        pi are delta functions; +-pi/2 are rejected too so that the caller
        goes through :func:`apply_fracft`, which treats them exactly.
    """
    t = _theta(theta)
    s = special_value(t)
    if s is not None:
        raise SpecialAngle(f"kernel is distributional or special at theta={t!r} (special {s:.6g})")
    return _kernel(np.asarray(x, float), np.asarray(y, float), t)


def _trapezoid_weights(n, h):
    w = np.full(n, h)
    w[[0, -1]] *= 0.5
    return w


def apply_fracft(f, theta, tail=EPS_TAIL):
    """Transform a sampled function by trapezoidal quadrature.

    The output lives on the input grid.  Special angles are handled exactly:
    identity at 0, reversal at pi, and the plain Fourier kernel at +-pi/2.

    Raises
    ------
    TailTooFat
        If the boundary samples exceed ``tail`` times the peak modulus.
    AsymmetricGrid
        If theta is pi and the grid is not symmetric about zero.
    """
    t = _theta(theta)
    v = f.values
    peak = np.max(np.abs(v))
    edge = max(abs(v[0]), abs(v[-1]))
    if peak == 0 or edge > tail * peak:
        raise TailTooFat(f"boundary modulus {edge:.3g} vs peak {peak:.3g} exceeds relative {tail:g}")
    s = special_value(t)
    if s == 0.0:
        return f
    if s == np.pi:
        x = f.x
        if abs(x[0] + x[-1]) > 1e-9 * max(1.0, abs(x[0])):
            raise AsymmetricGrid(f"grid [{x[0]:g}, {x[-1]:g}] is not symmetric about 0")
        return f.with_values(v[::-1])
    x = f.x
    w = _trapezoid_weights(f.count, f.step)
    if s is not None:
        sign = 1.0 if s > 0 else -1.0
        K = np.exp(sign * 1j * np.outer(x, x)) / np.sqrt(2 * np.pi)
    else:
        K = _kernel(x[:, None], x[None, :], t)
    return f.with_values(K @ (w * v))


def compose_kernels(theta1, theta2, x, z, tol=1e-12, n0=32, half_width=7.0, max_doublings=8):
    r"""Integrate ``Delta(x, y; theta1) Delta(y, z; theta2)`` over y.

    The integrand has constant modulus on the real line, so the integral is
    evaluated on the steepest-descent line through the stationary point,
    ``y = y0 + exp(-i sign(c) pi/4) u / sqrt|c|`` with ``c`` the chirp rate.
    The integrand is entire, so the value is unchanged, and on that line it
    decays like ``exp(-u^2)``.  The trapezoid point count is doubled until two
    successive values agree to ``tol``.

    Raises
    ------
    SpecialAngle
        If either angle is special, or their sum is 0 or pi (the composed
        kernel is then a delta function).
    QuadratureDivergence
        If the doubling sequence does not settle.
    """
    t1, t2 = _theta(theta1), _theta(theta2)
    for name, t in (("theta1", t1), ("theta2", t2)):
        if special_value(t) is not None:
            raise SpecialAngle(f"{name}={t!r} is special")
    if special_value(t1 + t2) in (0.0, np.pi):
        raise SpecialAngle(f"theta1+theta2={t1 + t2!r} gives a delta kernel")
    c = 0.5 * (np.cos(t1) / np.sin(t1) + np.cos(t2) / np.sin(t2))
    b = x / np.sin(t1) + z / np.sin(t2)
    y0 = b / (2 * c)
    e = np.exp(-0.25j * np.pi * np.sign(c)) / np.sqrt(abs(c))

    def trap(n):
        u = np.linspace(-half_width, half_width, n)
        y = y0 + e * u
        vals = _kernel(x, y, t1) * _kernel(y, z, t2) * e
        return np.sum(_trapezoid_weights(n, u[1] - u[0]) * vals), vals

    prev, vals = trap(n0 + 1)
    tail = float(max(abs(vals[0]), abs(vals[-1])) / np.max(np.abs(vals)))
    n = n0
    for _ in range(max_doublings):
        n *= 2
        cur, vals = trap(n + 1)
        change = abs(cur - prev)
        if change < tol * max(1.0, abs(cur)):
            return complex(cur)
        prev = cur
    raise QuadratureDivergence(
        "kernel composition did not converge",
        {"last_change": float(change), "tail_mass": tail, "points": n + 1},
    )


def hermite_function(n, x):
    """Normalized Hermite function ``psi_n(x)`` via the stable recurrence."""
    x = np.asarray(x, float)
    p0 = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n == 0:
        return p0
    p1 = np.sqrt(2.0) * x * p0
    for k in range(1, n):
        p0, p1 = p1, np.sqrt(2.0 / (k + 1)) * x * p1 - np.sqrt(k / (k + 1)) * p0
    return p1
