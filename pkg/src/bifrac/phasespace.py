"""Weyl, Wigner, bifractional Wigner, Q and P functions on phase-space grids.

Definitions (``Theta`` is a truncated operator):

    Weyl            W~(alpha, beta) = Tr[Theta D(alpha, beta)]
    Wigner          W(alpha, beta)  = Tr[Theta Pi(alpha, beta)]
    bifractional    A(alpha, beta; ta, tb) = Tr[Theta U(alpha, beta; ta, tb)]
    Q               Q(alpha, beta; ta, tb) = <alpha, beta; ta, tb|Theta|alpha, beta; ta, tb>
    P               (1/pi) e^{alpha^2+beta^2} iint e^{2i(beta g - alpha d)} e^{g^2+d^2}
                        <-g, -d; ta, tb|Theta|g, d; ta, tb> dg dd
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import PNotSmooth, QuadratureDivergence
from .fock import EPS_EDGE, FockOperator, displacement_elements, edge_rows
from .fracft import hermite_function
from .operators import (
    HALF_HALF,
    PI_PI,
    ZERO_ZERO,
    BifracAngles,
    _angles,
    _gaussian_block,
    _heisenberg,
    coherent_columns,
    double_transform_quadrature,
)

__all__ = [
    "WEYL",
    "WIGNER",
    "BIFRAC_WIGNER",
    "Q",
    "BIFRAC_Q",
    "BIFRAC_P",
    "WIGNER_MARGINAL_CONSTANT",
    "PhaseSpaceGrid",
    "axis",
    "weyl_function",
    "wigner_function",
    "bifrac_wigner",
    "bifrac_wigner_grid",
    "bifrac_wigner_oracle",
    "compare_with_oracle",
    "fourier_relation_check",
    "q_function",
    "trace_identity",
    "coherent_overlap",
    "bifrac_p_function",
    "p_function_grid",
    "wigner_marginal",
    "position_density",
    "thermal_operator",
    "grid_to_csv",
    "grid_to_json",
]

WEYL = "WEYL"
WIGNER = "WIGNER"
BIFRAC_WIGNER = "BIFRAC_WIGNER"
Q = "Q"
BIFRAC_Q = "BIFRAC_Q"
BIFRAC_P = "BIFRAC_P"

# (1/pi) int W(alpha, beta) dbeta = C * <x|Theta|x> at x = alpha/sqrt2, measured for the vacuum
WIGNER_MARGINAL_CONSTANT = np.sqrt(2.0)


def axis(lo, hi, count):
    """Uniform axis; a range symmetric about 0 gives an exactly antisymmetric axis."""
    if count < 2:
        raise ValueError("an axis needs at least two points")
    x = np.linspace(float(lo), float(hi), int(count))
    if lo == -hi:
        x = 0.5 * (x - x[::-1])
    return x


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Samples ``values[i, j]`` at ``(alpha_axis[i], beta_axis[j])``."""

    alpha_axis: np.ndarray
    beta_axis: np.ndarray
    values: np.ndarray
    kind: str
    angles: BifracAngles | None
    fock_dim: int
    trusted: bool
    meta: dict = field(default_factory=dict)

    def value_at(self, alpha, beta):
        i = int(np.argmin(np.abs(self.alpha_axis - alpha)))
        j = int(np.argmin(np.abs(self.beta_axis - beta)))
        return self.values[i, j]


def _op(theta_op):
    return theta_op.matrix if isinstance(theta_op, FockOperator) else np.asarray(theta_op, complex)


def _support(T, rel=1e-15):
    # levels beyond the last row/column above rel * max|T| are dropped
    big = np.abs(T) > rel * np.max(np.abs(T))
    nz = np.nonzero(np.any(big, axis=0) | np.any(big, axis=1))[0]
    return int(nz[-1]) + 1 if nz.size else 1


def _op_edge(T):
    return float(np.sum(np.abs(T[edge_rows(T.shape[0])])) + np.sum(np.abs(T[:, edge_rows(T.shape[0])])))


def _trace_elements(T, a, b, k, parity):
    # exact <m|D|n> on Theta's support; Tr[Theta D Pi0] flips odd columns
    D = displacement_elements(a, b, k)
    Tt = T[:k, :k].T
    if parity:
        Tt = Tt * (-1.0) ** np.arange(k)
    return (D * Tt).sum(axis=(-2, -1))


def _grid(values, theta_op, alpha_axis, beta_axis, kind, angles=None, chunk=128):
    """Trace-type function on a grid, batched over points.

    All matrix elements involved are exact, so the grid inherits only the
    truncation of Theta itself.
    """
    T = _op(theta_op)
    k = _support(T)
    alpha_axis = np.asarray(alpha_axis, float)
    beta_axis = np.asarray(beta_axis, float)
    A, B = (x.ravel() for x in np.meshgrid(alpha_axis, beta_axis, indexing="ij"))
    vals = np.empty(A.size, complex)
    for i in range(0, A.size, chunk):
        vals[i:i + chunk] = values(T, A[i:i + chunk], B[i:i + chunk], k)
    edge = _op_edge(T)
    return PhaseSpaceGrid(alpha_axis, beta_axis, vals.reshape(alpha_axis.size, beta_axis.size), kind, angles,
                          T.shape[0], edge < EPS_EDGE, {"edge_weight": edge})


def weyl_function(theta_op, alpha_axis, beta_axis):
    """``Tr[Theta D]`` per grid point."""
    return _grid(lambda T, a, b, k: _trace_elements(T, a, b, k, False), theta_op, alpha_axis, beta_axis, WEYL)


def wigner_function(theta_op, alpha_axis, beta_axis):
    """``Tr[Theta Pi]`` per grid point."""
    return _grid(lambda T, a, b, k: _trace_elements(T, a, b, k, True), theta_op, alpha_axis, beta_axis, WIGNER)


def _bifrac_values(T, a, b, ang, k):
    """Bifractional traces at flat point arrays; special pairs are relabelings."""
    which = ang.special_case
    if which == ZERO_ZERO:
        return _trace_elements(T, b, -a, k, False)
    if which == HALF_HALF:
        return _trace_elements(T, a, b, k, True)
    if which == PI_PI:
        return _trace_elements(T, -b, a, k, False)
    return _bifrac_columns_trace(T, a, b, ang, k)


def _bifrac_columns_trace(T, a, b, ang, k):
    # the Gaussian recursion gives exact elements of the untruncated U
    S, d, amp = _heisenberg(a, b, ang)
    G = _gaussian_block(S, d, amp, k, k)
    return (G * T[:k, :k].T).sum(axis=(-2, -1))


def bifrac_wigner(theta_op, alpha, beta, angles, N=None):
    """``Tr[Theta U(alpha, beta; angles)]``; special angle pairs are dispatched exactly.

    Only the block of U on Theta's support enters, and its elements are
    exact, so ``N`` (if given) must equal the operator dimension.
    """
    ang = _angles(angles)
    T = _op(theta_op)
    if N is not None and N != T.shape[0]:
        raise ValueError("N must equal the operator dimension")
    return complex(_bifrac_values(T, np.array([float(alpha)]), np.array([float(beta)]), ang, _support(T))[0])


def bifrac_wigner_grid(theta_op, alpha_axis, beta_axis, angles):
    """Grid version of :func:`bifrac_wigner`; values match the pointwise function."""
    ang = _angles(angles)
    return _grid(lambda T, a, b, k: _bifrac_values(T, a, b, ang, k), theta_op, alpha_axis, beta_axis,
                 BIFRAC_WIGNER, ang)


def _exact_weyl(T, k):
    Tk = T[:k, :k]

    def fn(a, b):
        # Tr[Theta D] = sum_mn Theta_nm D_mn
        return np.einsum("...mn,nm->...", displacement_elements(a, b, k), Tk)

    return fn


def bifrac_wigner_oracle(theta_op, alpha, beta, angles, tol=1e-9):
    """Fractional transform of the exact Weyl function in both arguments.

    Uses the untruncated displacement matrix elements on Theta's support and
    the certified double quadrature of :func:`bifrac.operators.double_transform_quadrature`.
    """
    T = _op(theta_op)
    return complex(double_transform_quadrature(alpha, beta, angles, _exact_weyl(T, _support(T)), tol=tol))


def compare_with_oracle(theta_op, points, angles, tol=1e-9):
    """Max deviation between trace and oracle values after one fitted global phase.

    With principal-branch kernels the double-integral form equals the
    product form only up to a constant power of ``i`` that depends on the
    angle pair, so the phase is fitted once over all ``points``.

    Returns
    -------
    deviation : float
    phase : complex
    """
    ang = _angles(angles)
    direct = np.array([bifrac_wigner(theta_op, a, b, ang) for a, b in points])
    oracle = np.array([bifrac_wigner_oracle(theta_op, a, b, ang, tol=tol) for a, b in points])
    c = np.vdot(oracle, direct)
    c = c / abs(c) if abs(c) > 0 else 1.0
    return float(np.max(np.abs(direct - c * oracle))), complex(c)


def fourier_relation_check(theta_op, point, half_width=8.0, count=161, tol=1e-8, max_levels=4):
    """Wigner value at ``point`` against the Fourier transform of the Weyl function.

    ``rhs = (1/2pi) iint W~(a', b') exp(i(beta a' - b' alpha)) da' db'`` on the
    real plane.  The untruncated Weyl function is used for the integrand.  The
    trapezoid grid is refined (points doubled, half-width +25%) until two
    levels agree to ``tol``.

    Returns
    -------
    lhs, rhs : complex
    """
    T = _op(theta_op)
    k = _support(T)
    alpha, beta = point
    lhs = bifrac_wigner(T, alpha, beta, (np.pi / 2, np.pi / 2))
    weyl = _exact_weyl(T, k)

    def level(n, L):
        ax = np.linspace(-L, L, n)
        w = np.full(n, ax[1] - ax[0]); w[[0, -1]] *= 0.5
        A, B = np.meshgrid(ax, ax, indexing="ij")
        F = weyl(A, B) * np.exp(1j * (beta * A - B * alpha))
        return complex(np.einsum("i,j,ij->", w, w, F) / (2 * np.pi))

    n, L = count, half_width
    prev = level(n, L)
    for _ in range(max_levels):
        n, L = 2 * (n - 1) + 1, 1.25 * L
        cur = level(n, L)
        if abs(cur - prev) < tol:
            return lhs, cur
        prev = cur
    raise QuadratureDivergence("Weyl-to-Wigner Fourier integral did not converge",
                               {"last_change": abs(cur - prev), "half_width": L, "points": n})


def q_function(theta_op, alpha_axis, beta_axis, angles, N=None, eps_edge=EPS_EDGE):
    """``<psi|Theta|psi>`` for bifractional coherent states on a grid.

    The coherent columns are exact amplitudes on the truncated basis, so the
    values are exact for Theta padded with zeros; trust is decided by
    Theta's own edge weight.  ``column_leak`` in the metadata is the largest
    norm a column loses beyond ``N``.
    """
    ang = _angles(angles)
    T = _op(theta_op)
    N = T.shape[0] if N is None else N
    if N != T.shape[0]:
        raise ValueError("N must equal the operator dimension")
    alpha_axis = np.asarray(alpha_axis, float)
    beta_axis = np.asarray(beta_axis, float)
    A, B = np.meshgrid(alpha_axis, beta_axis, indexing="ij")
    psi = coherent_columns(A, B, ang, N)
    vals = np.einsum("...m,mn,...n->...", psi.conj(), T, psi)
    leak = 1 - np.sum(np.abs(psi) ** 2, axis=-1)
    edge = _op_edge(T)
    kind = Q if ang.special_case == HALF_HALF else BIFRAC_Q
    return PhaseSpaceGrid(alpha_axis, beta_axis, vals, kind, ang, N, edge < eps_edge,
                          {"edge_weight": edge, "column_leak": float(np.max(leak))})


def trace_identity(theta_op, angles, half_width=5.0, count=101):
    """Trapezoid value of ``(1/2pi) iint Q dalpha dbeta`` on ``[-L, L]^2``."""
    ax = axis(-half_width, half_width, count)
    g = q_function(theta_op, ax, ax, angles)
    w = np.full(count, ax[1] - ax[0]); w[[0, -1]] *= 0.5
    return complex(np.einsum("i,j,ij->", w, w, g.values) / (2 * np.pi))


def coherent_overlap(gamma, delta, alpha, beta, angles, N):
    """``<gamma, delta; angles|alpha, beta; angles>`` in the truncated basis."""
    ang = _angles(angles)
    u = coherent_columns(float(gamma), float(delta), ang, N)
    v = coherent_columns(float(alpha), float(beta), ang, N)
    return complex(np.vdot(u, v))


def _p_kernel(T, ang, L, step):
    # square lattice with the kernel zeroed outside the disc of radius L
    n = 2 * int(np.ceil(L / step)) + 1
    ax = np.linspace(-L, L, n)
    G, D = np.meshgrid(ax, ax, indexing="ij")
    inside = G**2 + D**2 <= L * L
    g, d = G[inside], D[inside]
    psi = coherent_columns(g, d, ang, T.shape[0])
    psim = coherent_columns(-g, -d, ang, T.shape[0])
    growth = np.exp(g * g + d * d)
    h2 = (ax[1] - ax[0]) ** 2
    K = np.zeros((n, n), complex)
    K[inside] = np.sum((psim.conj() @ T) * psi, axis=-1) * growth * h2
    # the sum cancels by up to e^{|mu|^2}; this estimates its rounding error
    noise = np.zeros((n, n))
    noise[inside] = np.finfo(float).eps * growth * h2 * np.sum((np.abs(psim) @ np.abs(T)) * np.abs(psi), axis=-1)
    return ax, K, noise


def _p_sum(ax, K, alpha, beta):
    # exp(2i(b g - a d)) factorizes, so the sum is two matrix products over
    # the distinct alpha and beta values
    al, be = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    ua, ia = np.unique(al, return_inverse=True)
    ub, ib = np.unique(be, return_inverse=True)
    M = np.exp(2j * np.outer(ub, ax)) @ K @ np.exp(-2j * np.outer(ax, ua))
    return M[ib.reshape(al.shape), ia.reshape(al.shape)]


def p_function_grid(theta_op, alpha, beta, angles, half_width=None, step=0.1,
                    tail_tol=1e-6, change_tol=1e-3, max_half_width=12.0):
    """Bifractional P function at arrays of points, with a convergence certificate.

    The integrand kernel ``e^{g^2+d^2} <-g,-d|Theta|g,d>`` is sampled on a
    disc of radius ``L``.  ``L`` grows in steps of 0.25 until the kernel
    modulus on the outer 5% of the radius is below ``tail_tol`` times its peak.
    The result is then recomputed with half the step on a disc up to 25%
    larger and must change by less than ``change_tol`` relative to the
    integrated modulus.

    Two things limit the disc.  For finite-rank Theta the kernel eventually
    grows like a polynomial of degree ``2(N-1)``, and the Fock sum behind it
    cancels by a factor up to ``e^{g^2+d^2}``, so beyond some radius it is
    rounding noise.  The refinement disc is clipped where the estimated noise
    reaches ``tail_tol`` of the peak; the certificate fails if that leaves
    less than 5% of headroom beyond ``L``.

    Raises
    ------
    PNotSmooth
        When a test fails; the diagnostics name the failing quantity.
    """
    ang = _angles(angles)
    T = _op(theta_op)
    alpha = np.asarray(alpha, float)
    beta = np.asarray(beta, float)
    radii = [float(half_width)] if half_width is not None else list(np.arange(3.0, max_half_width + 0.125, 0.25))
    # coarse scan to pick the radius; the outer samples may be overflowing
    # noise, so the peak is taken near the origin
    outer = 1.25 * radii[-1]
    ax, K, noise = _p_kernel(T, ang, outer, max(step, 0.2))
    r = np.hypot(*np.meshgrid(ax, ax, indexing="ij"))
    r[r > outer] = np.inf
    mag = np.abs(K)
    noisy = noise > tail_tol * mag[r <= radii[0]].max()
    r_res = float(r[noisy].min()) if noisy.any() else outer
    tail, L = np.inf, radii[0]
    for L in radii:
        if L >= r_res:
            break
        disc = r <= L
        peak = float(mag[disc].max())
        tail = float(mag[disc & (r > 0.95 * L)].max()) / peak if peak > 0 else np.inf
        if tail < tail_tol:
            break
    diag = {"tail_mass": tail, "half_width": float(L), "resolved_radius": r_res}
    if not tail < tail_tol:
        raise PNotSmooth("P-function kernel does not decay inside the resolvable disc", diag)
    L2 = min(1.25 * L, r_res)
    if L2 < 1.05 * L:
        raise PNotSmooth("no resolvable headroom beyond the quadrature disc", diag)
    ax1, K1, _ = _p_kernel(T, ang, L, step)
    I1 = _p_sum(ax1, K1, alpha, beta)
    ax2, K2, _ = _p_kernel(T, ang, L2, step / 2)
    I2 = _p_sum(ax2, K2, alpha, beta)
    change = float(np.max(np.abs(I2 - I1))) / float(np.abs(K1).sum())
    diag.update(relative_change=change, refined_half_width=float(L2))
    if not change < change_tol:
        raise PNotSmooth("P-function integral changes under refinement", diag)
    vals = np.exp(alpha**2 + beta**2) * I2 / np.pi
    return vals, diag


def bifrac_p_function(theta_op, alpha, beta, angles, **quadrature):
    """Single-point :func:`p_function_grid`."""
    vals, _ = p_function_grid(theta_op, float(alpha), float(beta), angles, **quadrature)
    return complex(vals)


def position_density(theta_op, x):
    """``<x|Theta|x>`` from Hermite functions."""
    T = _op(theta_op)
    x = np.asarray(x, float)
    H = np.stack([hermite_function(n, x) for n in range(T.shape[0])], axis=-1)
    return np.einsum("...m,mn,...n->...", H, T, H).real


def wigner_marginal(theta_op, alpha, beta_axis):
    """``(1/pi) int W(alpha, beta) dbeta`` by the trapezoid rule on ``beta_axis``."""
    g = wigner_function(theta_op, [alpha], beta_axis)
    w = np.full(len(beta_axis), beta_axis[1] - beta_axis[0]); w[[0, -1]] *= 0.5
    return complex(np.sum(w * g.values[0]) / np.pi)


def thermal_operator(s, N):
    """``(1 - s) sum_n s^n |n><n|`` truncated at ``N``."""
    return FockOperator(np.diag((1 - s) * s ** np.arange(N)).astype(complex))


def _fmt(v):
    return format(float(v), ".17g")


def grid_to_csv(grid, stream=None):
    """``alpha,beta,re,im`` rows, alpha-major, 17 significant digits."""
    out = io.StringIO() if stream is None else stream
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["alpha", "beta", "re", "im"])
    for i, a in enumerate(grid.alpha_axis):
        for j, b in enumerate(grid.beta_axis):
            v = grid.values[i, j]
            w.writerow([_fmt(a), _fmt(b), _fmt(v.real), _fmt(v.imag)])
    return out.getvalue() if stream is None else None


def grid_metadata(grid):
    return {
        "kind": grid.kind,
        "angles": None if grid.angles is None else [grid.angles.theta_alpha, grid.angles.theta_beta],
        "fock_dim": grid.fock_dim,
        "trusted": bool(grid.trusted),
        **{k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in grid.meta.items()},
    }


def grid_to_json(grid):
    """``{axes, kind, angles, fock_dim, trusted, values}`` with 17-digit floats."""
    doc = {
        "axes": {"alpha": [float(a) for a in grid.alpha_axis], "beta": [float(b) for b in grid.beta_axis]},
        **grid_metadata(grid),
        "values": [[[float(v.real), float(v.imag)] for v in row] for row in grid.values],
    }
    return json.dumps(doc, indent=None)
