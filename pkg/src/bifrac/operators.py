r"""Bifractional displacement operators.

``U(alpha, beta; theta_a, theta_b)`` is built from the closed operator-product
form

.. math::
    U = e^{i\varphi}\, e^{i\tau(\hat p - \tan\theta_\alpha \hat x + \sigma)^2}
        \, e^{i\tan\theta_\alpha \hat x^2 - i\sqrt2\,\alpha\hat x/\cos\theta_\alpha}

and, as an oracle, from the double fractional-Fourier integral over
displacement operators.

Two numerically stable routes evaluate the product form in a truncated
basis.  Both use the rearrangement (``sigma`` is a c-number)

    tau (Y + sigma)^2 = tau Y^2 + 2 tau sigma Y + tau sigma^2,  Y = p - tan(theta_a) x,

whose coefficients stay finite at ``theta_b = 0, pi`` and ``theta_a = 0``:

``"gaussian"`` (default)
    Both factors are Gaussian unitaries.  Their Heisenberg action and the
    vacuum amplitude are computed in closed form, and the number-basis
    matrix elements follow from the Bargmann-kernel recurrence.  The result
    is the exact ``N x N`` block of the infinite-dimensional operator.
``"expm"``
    Each exponential is formed from a real tridiagonal eigendecomposition
    in a padded working dimension ``M > N``, and the product is projected
    back to ``N x N``.  ``M`` is doubled until the block stops changing.

Exponentiating the ``N x N`` truncations of ``x^2`` and ``(p - t x)^2``
directly is not offered.  Those matrices have spurious large eigenvalues at
the cutoff, and the resulting product is wrong even in its lowest elements.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import (
    ForbiddenBand,
    NotGaussian,
    QuadratureDivergence,
    SpecialAngleNeedsLimit,
    UntrustedTruncation,
)
from .fock import (
    EPS_EDGE,
    FockOperator,
    _check_dim,
    displacement,
    glauber_column,
    displacement_elements,
    operator_report,
    parity,
    quadrature_ops,
)
from .fracft import EPS_ANGLE, _kernel, reduce_angle

__all__ = [
    "EPS_C",
    "NEAR_SINGULAR_COS",
    "BifracAngles",
    "BtoParams",
    "GaussianUnitary",
    "ZERO_ZERO",
    "HALF_HALF",
    "PI_PI",
    "bto_params",
    "bto_gaussian",
    "bifrac_operator",
    "special_case_operator",
    "bifrac_operator_integral",
    "double_transform_quadrature",
    "coherent_columns",
    "gaussian_fingerprint",
]

EPS_C = 1e-3
# |cos theta_a| below this is rejected: the 1/cos terms cancel catastrophically
NEAR_SINGULAR_COS = 2e-6
EPS_INTERIOR = 1e-10

ZERO_ZERO = "ZERO_ZERO"
HALF_HALF = "HALF_HALF"
PI_PI = "PI_PI"

_J = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _near(t, s, eps=EPS_ANGLE):
    return abs(reduce_angle(t - s)) < eps


@dataclass(frozen=True)
class BifracAngles:
    """Angle pair ``(theta_alpha, theta_beta)``, each reduced to (-pi, pi].

    Raises
    ------
    ForbiddenBand
        If ``|cos(theta_alpha - theta_beta)| < eps_c``.
    """

    theta_alpha: float
    theta_beta: float
    eps_c: float = EPS_C

    def __post_init__(self):
        ta, tb = reduce_angle(float(self.theta_alpha)), reduce_angle(float(self.theta_beta))
        object.__setattr__(self, "theta_alpha", ta)
        object.__setattr__(self, "theta_beta", tb)
        c = np.cos(ta - tb)
        if abs(c) < self.eps_c:
            raise ForbiddenBand(
                f"|cos(theta_alpha - theta_beta)| = {abs(c):.3g} < {self.eps_c:g} "
                f"at ({ta:.6g}, {tb:.6g})"
            )

    @property
    def cos_diff(self):
        return float(np.cos(self.theta_alpha - self.theta_beta))

    @property
    def special_case(self):
        ta, tb = self.theta_alpha, self.theta_beta
        for which, s in ((ZERO_ZERO, 0.0), (HALF_HALF, np.pi / 2), (PI_PI, np.pi)):
            if _near(ta, s) and _near(tb, s):
                return which
        return None

    def negated(self):
        return BifracAngles(-self.theta_alpha, -self.theta_beta, self.eps_c)

    def as_tuple(self):
        return (self.theta_alpha, self.theta_beta)


def _angles(angles):
    return angles if isinstance(angles, BifracAngles) else BifracAngles(*angles)


@dataclass(frozen=True)
class BtoParams:
    tau: float
    sigma: float
    phi: float


def bto_params(alpha, beta, angles):
    """Printed closed-form parameters ``tau``, ``sigma`` and ``phi``.

    Raises
    ------
    SpecialAngleNeedsLimit
        Naming the singular term when an angle makes one of the printed
        quotients ill-defined and its numerator does not vanish.
    """
    ang = _angles(angles)
    ta, tb = ang.theta_alpha, ang.theta_beta
    ca, sa, cb, sb = np.cos(ta), np.sin(ta), np.cos(tb), np.sin(tb)

    def need(cond, term):
        if cond:
            raise SpecialAngleNeedsLimit(f"term {term} is singular at ({ta:.6g}, {tb:.6g})")

    need(abs(ca) < EPS_ANGLE and alpha != 0, "alpha/(sqrt2 cos theta_alpha)")
    need(abs(sb) < EPS_ANGLE and beta != 0, "beta/(sqrt2 sin theta_beta)")
    need(abs(sa) < EPS_ANGLE and alpha != 0, "alpha^2 cot theta_alpha")
    need(abs(sb) < EPS_ANGLE and beta != 0, "beta^2 cot theta_beta")
    need(abs(np.sin(2 * ta)) < EPS_ANGLE and alpha != 0, "alpha^2/sin 2theta_alpha")
    tau = ca * sb / ang.cos_diff
    sigma = (alpha / (np.sqrt(2) * ca) if alpha else 0.0) - (beta / (np.sqrt(2) * sb) if beta else 0.0)
    phi = -(ta + tb) / 2
    if alpha:
        phi += -alpha**2 * ca / (2 * sa) + alpha**2 / np.sin(2 * ta)
    if beta:
        phi += -beta**2 * cb / (2 * sb)
    return BtoParams(float(tau), float(sigma), float(phi))


def _stable_params(alpha, beta, ang):
    """``t, tau, tau*sigma, Phi, c`` of the rearranged product form.

    ``Phi`` collects ``phi + tau sigma^2``; ``c = sqrt2 alpha / cos theta_a``.
    Works for array ``alpha``/``beta``.
    """
    ta, tb = ang.theta_alpha, ang.theta_beta
    ca, sa, sb = np.cos(ta), np.sin(ta), np.sin(tb)
    if abs(ca) < NEAR_SINGULAR_COS:
        raise SpecialAngleNeedsLimit(
            f"tan(theta_alpha) and 1/cos(theta_alpha) are singular near theta_alpha={ta:.10g}; "
            "use the exact special case or move away from +-pi/2"
        )
    cd = ang.cos_diff
    t = sa / ca
    tau = ca * sb / cd
    ks = (alpha * sb - beta * ca) / (np.sqrt(2) * cd)
    Phi = (
        -(ta + tb) / 2
        + alpha**2 * t / 2
        + (alpha**2 * sb - 2 * alpha * beta * ca - beta**2 * ca * np.sin(ta - tb)) / (2 * ca * cd)
    )
    c = np.sqrt(2) * alpha / ca
    return t, tau, ks, Phi, c


@dataclass(frozen=True)
class GaussianUnitary:
    """Heisenberg action ``U^dag (x, p) U = S (x, p) + d`` plus a phase.

    ``phase`` is ``<0|U|0>/|<0|U|0>|``.
    """

    S: np.ndarray
    d: np.ndarray
    phase: complex
    residual: float = 0.0

    @property
    def det(self):
        return float(np.linalg.det(self.S))


def _flow(A, b):
    # exp of the nilpotent affine generator [[A, b], [0, 0]] with A @ A = 0
    I = np.eye(2)
    return I + A, np.einsum("ij,...j->...i", I + A / 2, b)


def _heisenberg(alpha, beta, ang):
    t, tau, ks, Phi, c = _stable_params(alpha, beta, ang)
    c = np.asarray(c, float)
    ks = np.asarray(ks, float)
    zero = np.zeros_like(c)
    # right factor exp(i(t x^2 - c x))
    A_R = -_J @ np.diag([2 * t, 0.0])
    b_R = -np.stack([zero, c], axis=-1)  # -J (-c, 0)
    S_R, d_R = _flow(A_R, b_R)
    # left factor exp(i(tau Y^2 + 2 ks Y)), Y = v . (x, p)
    v = np.array([-t, 1.0])
    A_L = -2 * tau * _J @ np.outer(v, v)
    b_L = -2 * ks[..., None] * (_J @ v)
    S_L, d_L = _flow(A_L, b_L)
    S = S_L @ S_R
    d = np.einsum("ij,...j->...i", S_L, d_R) + d_L
    q = 1 - 1j * t
    P = 1 / q - 1j * tau
    Q = c / q - 2j * ks
    amp = np.exp(1j * Phi) / (q * np.sqrt(P)) * np.exp(Q**2 / (4 * P) - c**2 / (2 * q))
    return S, d, amp


def bto_gaussian(alpha, beta, angles):
    """Analytic :class:`GaussianUnitary` of the product form (no truncation)."""
    ang = _angles(angles)
    S, d, amp = _heisenberg(float(alpha), float(beta), ang)
    return GaussianUnitary(S, np.asarray(d, float), complex(amp / abs(amp)))


def _bargmann_coefficients(S, d):
    # U^dag a U = mu a + nu a^dag + gam
    mu = 0.5 * (S[0, 0] + S[1, 1] + 1j * (S[1, 0] - S[0, 1]))
    nu = 0.5 * (S[0, 0] - S[1, 1] + 1j * (S[1, 0] + S[0, 1]))
    gam = (d[..., 0] + 1j * d[..., 1]) / np.sqrt(2)
    mc = np.conj(mu)
    return nu / mc, 1 / mc, -np.conj(nu) / mc, gam - nu * np.conj(gam) / mc, -np.conj(gam) / mc


def _gaussian_block(S, d, amp, N, ncols=None):
    # batched over the leading shape of amp; rows are filled one at a time
    A11, A12, A22, b1, b2 = (np.asarray(c)[..., None] for c in _bargmann_coefficients(S, d))
    amp = np.asarray(amp, complex)
    ncols = N if ncols is None else ncols
    sq = np.sqrt(np.arange(max(N, ncols) + 1))
    G = np.zeros(amp.shape + (N, ncols), complex)
    G[..., 0, 0] = amp
    for n in range(1, ncols):
        v = b2[..., 0] * G[..., 0, n - 1]
        if n > 1:
            v = v + A22[..., 0] * sq[n - 1] * G[..., 0, n - 2]
        G[..., 0, n] = v / sq[n]
    for m in range(1, N):
        v = b1 * G[..., m - 1, :]
        if m > 1:
            v = v + A11 * sq[m - 1] * G[..., m - 2, :]
        v[..., 1:] += A12 * sq[1:ncols] * G[..., m - 1, :-1]
        G[..., m, :] = v / sq[m]
    return G


def _gaussian_route(alpha, beta, ang, N):
    S, d, amp = _heisenberg(alpha, beta, ang)
    return _gaussian_block(S, d, complex(amp), N)


def _expm_route(alpha, beta, ang, N, M):
    t, tau, ks, Phi, c = _stable_params(alpha, beta, ang)
    off = np.sqrt(np.arange(1, M) / 2)
    lx, Vx = eigh_tridiagonal(np.zeros(M), off)
    R = (Vx * np.exp(1j * (t * lx**2 - c * lx))) @ Vx[:N].T
    # Y = p - t x has off-diagonal (-i - t) sqrt(n+1)/sqrt2; a diagonal gauge makes it real
    z = -1j - t
    ly, Vy = eigh_tridiagonal(np.zeros(M), abs(z) * off)
    g = np.exp(-1j * np.angle(z) * np.arange(M))
    Vy = g[:, None] * Vy
    Lrows = (Vy[:N] * np.exp(1j * (tau * ly**2 + 2 * ks * ly))) @ Vy.conj().T
    return np.exp(1j * Phi) * (Lrows @ R)


def special_case_operator(alpha, beta, which, N):
    """Exact special cases: ``D(beta, -alpha)``, ``Pi(alpha, beta)`` or ``D(-beta, alpha)``."""
    if which == ZERO_ZERO:
        return displacement(beta, -alpha, N)
    if which == HALF_HALF:
        return parity(alpha, beta, N)
    if which == PI_PI:
        return displacement(-beta, alpha, N)
    raise ValueError(f"unknown special case {which!r}")


def bifrac_operator(alpha, beta, angles, N, method="gaussian", eps_edge=EPS_EDGE, max_work_dim=4096):
    """Truncated bifractional displacement operator and its truncation report.

    Parameters
    ----------
    alpha, beta : float
    angles : BifracAngles or (theta_alpha, theta_beta)
    N : int
    method : {"gaussian", "expm"}
        See the module docstring.  Exact special angles always go through
        :func:`special_case_operator`.
    eps_edge : float
        Trust threshold for the report.

    Returns
    -------
    FockOperator, TruncationReport
        The report's ``edge_weight`` includes the norm each column loses past
        the cutoff.  ``interior`` counts the leading columns whose loss is
        below 1e-10.  On those columns the block is unitary to that level.

    Raises
    ------
    SpecialAngleNeedsLimit
        For ``|cos theta_alpha| < 2e-6`` away from the exact special cases.
    """
    N = _check_dim(N)
    ang = _angles(angles)
    which = ang.special_case
    if which is not None:
        op = special_case_operator(alpha, beta, which, N)
        rep = operator_report(op.matrix, eps_edge=eps_edge, method=f"special:{which}")
        return FockOperator(op.matrix, report=rep), rep
    work = N
    if method == "gaussian":
        M = _gaussian_route(float(alpha), float(beta), ang, N)
    elif method == "expm":
        work = max(4 * N, 128)
        M = _expm_route(alpha, beta, ang, N, work)
        while True:
            if 2 * work > max_work_dim:
                raise UntrustedTruncation(
                    f"padded exponential did not settle below working dimension {max_work_dim}"
                )
            work *= 2
            M2 = _expm_route(alpha, beta, ang, N, work)
            done = np.max(np.abs(M2 - M)) < 1e-11
            M = M2
            if done:
                break
    else:
        raise ValueError(f"unknown method {method!r}")
    leak = 1 - np.sum(np.abs(M) ** 2, axis=0)
    rep = _report_with_interior(M, leak, eps_edge, work, method)
    return FockOperator(M, report=rep), rep


def _report_with_interior(M, leak, eps_edge, work, method):
    rep = operator_report(M, leak=leak, eps_edge=eps_edge, work_dim=work, method=method)
    e = np.sum(np.abs(M[-max(1, int(np.ceil(0.1 * M.shape[0]))):]) ** 2, axis=0) + np.maximum(leak, 0)
    bad = np.nonzero(e >= EPS_INTERIOR)[0]
    interior = int(bad[0]) if bad.size else M.shape[0]
    return type(rep)(rep.edge_weight, rep.trusted, interior, rep.work_dim, rep.method, rep.eps_edge)


def coherent_columns(alpha, beta, angles, N):
    """``U(alpha, beta; angles)|0>`` for arrays of points, shape ``(..., N)``.

    Every column holds exact amplitudes ``<n|U|0>``, ``n < N``, of the
    untruncated operator.  Special angle pairs use the Glauber closed form
    evaluated at relabelled arguments, so grid relabelings between special
    cases are exact.  Other angles use the Gaussian recurrence.
    """
    N = _check_dim(N)
    ang = _angles(angles)
    al, be = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    which = ang.special_case
    if which == ZERO_ZERO:
        return glauber_column(be, -al, N)
    if which == HALF_HALF:
        return glauber_column(al, be, N)
    if which == PI_PI:
        return glauber_column(-be, al, N)
    S, d, amp = _heisenberg(al, be, ang)
    A11, _, _, b1, _ = _bargmann_coefficients(S, d)
    out = np.empty(al.shape + (N,), complex)
    out[..., 0] = amp
    if N > 1:
        out[..., 1] = b1 * amp
    for m in range(2, N):
        out[..., m] = (b1 * out[..., m - 1] + A11 * np.sqrt(m - 1) * out[..., m - 2]) / np.sqrt(m)
    return out


def double_transform_quadrature(alpha, beta, angles, values_fn, tol=1e-9, contour="steepest", n0=48,
                   max_levels=5, chunk=64):
    r"""Evaluate ``|cos(ta - tb)|^{1/2} \iint Delta(beta, a'; tb) Delta(alpha, -b'; ta) F(a', b')``.

    ``values_fn(ap, bp)`` returns the integrand factor ``F`` at arrays of
    (possibly complex) points, with shape ``ap.shape + value_shape``.  It must
    be the analytic continuation of an entire function of ``(a', b')`` that
    carries the factor ``exp(-(a'^2 + b'^2)/2)``, as displacement matrix
    elements do.

    contour : {"steepest", "real"}
        ``"steepest"`` shifts each axis to the saddle of its Gaussian factor
        and rotates it onto the steepest-descent line, where the integrand
        decays like ``exp(-u^2/2)`` without oscillating.  This is valid by
        Cauchy's theorem because the integrand is entire and decays in the
        swept sector.  ``"real"`` integrates on the real axes with half-width
        ``max(6, 3 + 2 max(|alpha|, |beta|))``.

    Each refinement level doubles the points per axis and widens the domain
    by 25%.  The result is accepted when two successive levels agree to
    ``tol`` relative to the largest value.

    Raises
    ------
    QuadratureDivergence
        With the last change, boundary tail mass and an oscillation estimate.
    """
    ang = _angles(angles)
    ta, tb = ang.theta_alpha, ang.theta_beta
    for t in (ta, tb):
        if min(abs(reduce_angle(t)), abs(abs(reduce_angle(t)) - np.pi)) < EPS_ANGLE:
            raise SpecialAngleNeedsLimit(f"kernel angle {t:.6g} is a delta function; use the special cases")
    pref = np.sqrt(abs(ang.cos_diff))

    def axis(theta_k, lin):
        # Gaussian factor exp(-zeta s^2 / 2 + i lin s) of this axis
        zeta = 1 + 1j * np.cos(theta_k) / np.sin(theta_k)
        if contour == "steepest":
            center = 1j * lin / zeta
            direction = np.exp(-0.5j * np.angle(zeta)) / np.sqrt(abs(zeta))
            return center, direction, 7.5
        if contour == "real":
            return 0.0, 1.0, max(6.0, 3 + 2 * max(abs(alpha), abs(beta)))
        raise ValueError(f"unknown contour {contour!r}")

    ca, da, Ua = axis(tb, beta / np.sin(tb))
    cb, db, Ub = axis(ta, -alpha / np.sin(ta))

    def level(n, growth):
        ua = np.linspace(-Ua * growth, Ua * growth, n)
        ub = np.linspace(-Ub * growth, Ub * growth, n)
        wa = np.full(n, ua[1] - ua[0]); wa[[0, -1]] *= 0.5
        wb = np.full(n, ub[1] - ub[0]); wb[[0, -1]] *= 0.5
        ap = ca + da * ua
        bp = cb + db * ub
        ka = _kernel(beta, ap, tb) * da * wa
        kb = _kernel(alpha, -bp, ta) * db * wb
        total = None
        edge = 0.0
        peak = 0.0
        for i0 in range(0, n, chunk):
            A, B = np.meshgrid(ap[i0:i0 + chunk], bp, indexing="ij")
            F = values_fn(A, B)
            extra = F.ndim - 2
            w = (ka[i0:i0 + chunk, None] * kb[None, :]).reshape(A.shape + (1,) * extra)
            G = w * F
            part = G.sum(axis=(0, 1))
            total = part if total is None else total + part
            mag = np.abs(G).reshape(A.shape + (-1,)).max(axis=-1)
            peak = max(peak, float(mag.max()))
            edge = max(edge, float(mag[:, 0].max()), float(mag[:, -1].max()))
            if i0 == 0:
                edge = max(edge, float(mag[0].max()))
            if i0 + chunk >= n:
                edge = max(edge, float(mag[-1].max()))
        return pref * total, edge / peak if peak else 0.0

    n, growth = n0 + 1, 1.0
    prev, tail = level(n, growth)
    change = np.inf
    for _ in range(max_levels):
        n, growth = 2 * (n - 1) + 1, growth * 1.25
        cur, tail = level(n, growth)
        scale = max(1.0, float(np.max(np.abs(cur))))
        change = float(np.max(np.abs(cur - prev)))
        if change < tol * scale and tail < tol:
            return cur
        prev = cur
    osc = float(max(abs(beta / np.sin(tb)), abs(alpha / np.sin(ta)))
                + max(abs(np.cos(ta) / np.sin(ta)), abs(np.cos(tb) / np.sin(tb))) * max(Ua, Ub))
    raise QuadratureDivergence(
        "double fractional-transform quadrature did not converge",
        {"last_change": change, "tail_mass": tail, "oscillation": osc, "points_per_axis": n},
    )


def bifrac_operator_integral(alpha, beta, angles, K=9, tol=1e-9, contour="steepest", max_levels=5):
    """Oracle: the defining double integral over displacement operators.

    Returns the ``K x K`` block ``<m|U|n>``, ``m, n < K``, computed from the
    exact (untruncated) displacement matrix elements, as a FockOperator of
    dimension ``K`` (``K >= 4``).
    """
    K = _check_dim(K)
    vals = double_transform_quadrature(alpha, beta, angles, lambda a, b: displacement_elements(a, b, K),
                          tol=tol, contour=contour, max_levels=max_levels)
    return FockOperator(vals)


def _interior_for_fit(U, cutoff=1e-14):
    N = U.shape[0]
    e = np.sum(np.abs(U[N - max(1, int(np.ceil(0.1 * N))):]) ** 2, axis=0)
    e = e + np.abs(1 - np.sum(np.abs(U) ** 2, axis=0))
    bad = np.nonzero(e >= cutoff)[0]
    k = int(bad[0]) if bad.size else N
    return min(k, int(np.floor(0.9 * N)) + 1)


def gaussian_fingerprint(U, interior=None, tol=1e-6):
    """Fit ``U^dag x U`` and ``U^dag p U`` as affine combinations of x, p, 1.

    The fit uses the leading ``interior`` columns (default: those whose mass
    near or past the cutoff is below 1e-14).

    Raises
    ------
    NotGaussian
        If the max-abs fit residual reaches ``tol``.
    UntrustedTruncation
        If fewer than four columns are usable.
    """
    M = U.matrix if isinstance(U, FockOperator) else np.asarray(U, complex)
    N = M.shape[0]
    k = _interior_for_fit(M) if interior is None else int(interior)
    if k < 4:
        raise UntrustedTruncation(f"only {k} usable columns for the Heisenberg fit")
    x, p = quadrature_ops(N)
    xk, pk = x.matrix[:k, :k], p.matrix[:k, :k]
    basis = np.stack([xk.ravel(), pk.ravel(), np.eye(k).ravel()], axis=1)
    S = np.empty((2, 2))
    d = np.empty(2)
    resid = 0.0
    Md = M.conj().T
    for row, Q in enumerate((x.matrix, p.matrix)):
        target = (Md @ Q @ M)[:k, :k].ravel()
        coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
        coef_r = coef.real
        resid = max(resid, float(np.max(np.abs(basis @ coef_r - target))))
        S[row] = coef_r[:2]
        d[row] = coef_r[2]
    if resid >= tol:
        raise NotGaussian(f"Heisenberg fit residual {resid:.3g} >= {tol:g}")
    u00 = M[0, 0]
    phase = complex(u00 / abs(u00)) if abs(u00) > 0 else complex(np.nan)
    return GaussianUnitary(S, d, phase, resid)
