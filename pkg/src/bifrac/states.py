"""Bifractional coherent states, their Bargmann functions and statistics.

For ``theta_beta = 0`` the coherent state ``U(alpha, beta; theta_a, 0)|0>`` has
the Gaussian Bargmann function

    B(z) = |cos theta_a|^{1/2} exp(A z^2 + B z + Gamma),

    A = -1 / (2 (1 + i cot theta_a)) = (i/2) sin theta_a e^{i theta_a},
    B = beta + alpha / (sin theta_a (1 + i cot theta_a)) = beta - i alpha e^{i theta_a},
    Gamma = -(alpha^2 + beta^2)/2.

The right-hand forms are used for evaluation; they are finite at
``theta_a = 0`` and ``pi``, where the state reduces to a Glauber coherent
state.  ``B(z) = sum_n a_n z^n / sqrt(n!)`` with ``a_n = <n|psi>``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import DegenerateGaussian, ForbiddenBand, NormLoss, QuadratureDivergence, SpecialAngleNeedsLimit
from .fock import EPS_EDGE, FockState, _check_dim, quadrature_ops, state_report
from .fracft import _kernel, reduce_angle, special_value
from .operators import EPS_C, BifracAngles, _angles, bifrac_operator, coherent_columns

__all__ = [
    "BargmannParams",
    "SqueezeParams",
    "PhotonStats",
    "Moments",
    "bifrac_coherent",
    "coherent_family",
    "bargmann_params",
    "bargmann_eval",
    "squeeze_bargmann",
    "squeeze_from_bargmann",
    "wavefunction",
    "wavefunction_integral",
    "moments_from_wavefunction",
    "fock_moments",
    "photon_stats",
    "fock_photon_stats",
    "analysis_coefficients",
    "family_transform",
    "fig1_rows",
]


def bifrac_coherent(alpha, beta, angles, N, method="gaussian", eps_edge=EPS_EDGE):
    """``|alpha, beta; theta_a, theta_b> = U|0>`` in the truncated basis.

    With ``method="gaussian"`` only the first column is generated (exactly);
    ``"expm"`` builds the full operator through the padded exponential route.

    Returns
    -------
    FockState, TruncationReport
        The state is flagged normalized only when the report is trusted.
    """
    N = _check_dim(N)
    ang = _angles(angles)
    if method == "gaussian":
        v = coherent_columns(float(alpha), float(beta), ang, N)
    else:
        U, _ = bifrac_operator(alpha, beta, ang, N, method=method)
        v = U.matrix[:, 0]
    leak = 1 - float(np.sum(np.abs(v) ** 2))
    rep = state_report(v, eps_edge=eps_edge, method=method, leak=leak)
    return FockState(v, normalized=rep.trusted, report=rep), rep


def coherent_family(alpha_axis, beta_axis, angles, N):
    """Coherent states on a tensor grid, shape ``(len(alpha_axis), len(beta_axis), N)``."""
    A, B = np.meshgrid(np.asarray(alpha_axis, float), np.asarray(beta_axis, float), indexing="ij")
    return coherent_columns(A, B, _angles(angles), N)


@dataclass(frozen=True)
class BargmannParams:
    A: complex
    B: complex
    Gamma: complex
    prefactor: float

    def __post_init__(self):
        if self.A.real > 0 or (self.A.real == 0 and self.A != 0):
            raise ValueError("Bargmann Gaussian must have Re(A) < 0 or A = 0")


def bargmann_params(alpha, beta, theta_alpha, literal=False):
    """Gaussian parameters of the ``theta_beta = 0`` coherent state.

    Parameters
    ----------
    literal : bool
        Evaluate the ``cot``/``sin`` form verbatim, which raises
        SpecialAngleNeedsLimit at ``theta_alpha`` in {0, pi}.  The default
        uses the algebraically identical form that is finite there.

    Raises
    ------
    ForbiddenBand
        If ``(theta_alpha, 0)`` is not an admissible angle pair
        (``|cos theta_alpha| < 1e-3``).
    """
    ta = reduce_angle(float(theta_alpha))
    if abs(np.cos(ta)) < EPS_C:
        raise ForbiddenBand(f"(theta_alpha, 0) = ({ta:.6g}, 0) lies in the forbidden band")
    if literal:
        if special_value(ta) in (0.0, np.pi):
            raise SpecialAngleNeedsLimit(f"cot and 1/sin are singular at theta_alpha={ta:.6g}")
        k = 1 + 1j * np.cos(ta) / np.sin(ta)
        A = -1 / (2 * k)
        B = beta + alpha / (np.sin(ta) * k)
    else:
        e = np.exp(1j * ta)
        A = 0.5j * np.sin(ta) * e
        B = beta - 1j * alpha * e
    return BargmannParams(complex(A), complex(B), complex(-(alpha**2 + beta**2) / 2),
                          float(np.sqrt(abs(np.cos(ta)))))


def bargmann_eval(z, params):
    z = np.asarray(z, complex)
    return params.prefactor * np.exp(params.A * z * z + params.B * z + params.Gamma)


@dataclass(frozen=True)
class SqueezeParams:
    """Squeezed-state Bargmann parameters ``w``, ``r`` and ``phi_sq``."""

    w: complex
    r: float
    phi_sq: float

    def __post_init__(self):
        if not (self.r >= 0 and abs(np.tanh(self.r / 2)) < 1):
            raise ValueError("need r >= 0 with |tanh(r/2)| < 1")

    @property
    def a(self):
        return -np.tanh(self.r / 2) * np.exp(-1j * self.phi_sq)

    @property
    def b(self):
        return self.w * np.sqrt(1 - abs(self.a) ** 2)

    @property
    def c(self):
        return -np.conj(self.a) * self.w**2 / 2 - abs(self.w) ** 2 / 2


def squeeze_bargmann(params, z):
    """``(1 - |a|^2)^{1/4} exp(a z^2/2 + b z + c)``."""
    z = np.asarray(z, complex)
    a = params.a
    return (1 - abs(a) ** 2) ** 0.25 * np.exp(a * z * z / 2 + params.b * z + params.c)


def squeeze_from_bargmann(params):
    """Solve ``a = 2A`` and ``b = B`` for ``(w, r, phi_sq)``.

    ``c`` is then fixed by ``w`` and ``a``.  Its real part equals ``Gamma``;
    its imaginary part only contributes a global phase to the state.

    Returns
    -------
    SqueezeParams, complex
        The parameters and ``c - Gamma``.
    """
    a = 2 * params.A
    r = 2 * np.arctanh(abs(a))
    phi = -np.angle(-a) if a != 0 else 0.0
    w = params.B / np.sqrt(1 - abs(a) ** 2)
    sp = SqueezeParams(complex(w), float(r), float(phi))
    return sp, complex(sp.c - params.Gamma)


def _gauss_coeffs(params):
    A, B, G = params.A, params.B, params.Gamma
    s = 1 + 2 * A
    if abs(s) <= 1e-9:
        raise DegenerateGaussian(f"|1 + 2A| = {abs(s):.3g}")
    kappa = 2 * A - 1
    lam = 2 * G + 4 * A * G - B * B
    C = params.prefactor * np.pi**-0.25 * np.sqrt(1 / s)
    den = 2 + 4 * A
    return C, kappa / den, 2**1.5 * B / den, lam / den


def wavefunction(x, params):
    """Closed-form position wavefunction of the Bargmann state.

    ``f(x) = C exp(a x^2 + b x + l)`` with ``a = (2A - 1)/(2 + 4A)``,
    ``b = 2^{3/2} B/(2 + 4A)``, ``l = (2 Gamma + 4 A Gamma - B^2)/(2 + 4A)``
    and ``C = prefactor pi^{-1/4} (1 + 2A)^{-1/2}`` (principal branch).

    Raises
    ------
    DegenerateGaussian
        If ``|1 + 2A| <= 1e-9``.
    """
    C, a, b, l = _gauss_coeffs(params)
    x = np.asarray(x, float)
    return C * np.exp(a * x * x + b * x + l)


def wavefunction_integral(x, params, epsabs=1e-13, epsrel=1e-13):
    """``pi^{-3/4} e^{-x^2/2} int dp B((x + i p) sqrt2) e^{-p^2}`` by adaptive quadrature."""
    A, B, G = params.A, params.B, params.Gamma

    def integrand(p):
        z = (x + 1j * p) * np.sqrt(2)
        return np.exp(A * z * z + B * z + G - p * p - x * x / 2)

    val, err = quad(integrand, -np.inf, np.inf, complex_func=True, epsabs=epsabs, epsrel=epsrel, limit=200)
    return params.prefactor * np.pi**-0.75 * val


@dataclass(frozen=True)
class Moments:
    mean_x: float
    mean_p: float
    sxx: float
    spp: float
    sxp: float
    mean_x2: float = float("nan")
    norm: float = 1.0

    def __post_init__(self):
        if not (self.sxx > 0 and self.spp > 0):
            raise ValueError("variances must be positive")
        if self.sxx * self.spp - self.sxp**2 < 0.25 - 1e-6:
            raise ValueError("moments violate the uncertainty bound")

    @property
    def rs_determinant(self):
        return self.sxx * self.spp - self.sxp**2


def moments_from_wavefunction(params, nodes=40, tol=1e-12):
    """First and second moments of the closed-form wavefunction.

    Derivatives are analytic (``f' = (2 a x + b) f``).  The integrals use
    Gauss-Hermite quadrature centred on the ``|f|^2`` envelope.  They are
    exact for these polynomial-times-Gaussian integrands, and an ``n`` vs
    ``2n`` comparison certifies that.  Moments are normalized by the computed
    ``int |f|^2``.

    Raises
    ------
    QuadratureDivergence
        If the two node counts disagree by more than ``tol``.
    """
    C, a, b, l = _gauss_coeffs(params)
    if not a.real < 0:
        raise QuadratureDivergence("wavefunction is not square integrable", {"re_a": float(a.real)})
    var = -1 / (4 * a.real)
    mu = -b.real / (2 * a.real)

    def integrals(n):
        xi, w = np.polynomial.hermite.hermgauss(n)
        x = mu + np.sqrt(2 * var) * xi
        f = C * np.exp(a * x * x + b * x + l)
        dens = np.abs(f) ** 2 * np.exp(xi * xi) * w * np.sqrt(2 * var)
        g = 2 * a * x + b
        vals = np.array([
            np.sum(dens),
            np.sum(dens * x),
            np.sum(dens * x * x),
            np.sum(dens * (-1j) * g),
            np.sum(dens * -(2 * a + g * g)),
            np.sum(dens * (-1j) * x * g),
        ])
        return vals

    v1, v2 = integrals(nodes), integrals(2 * nodes)
    change = float(np.max(np.abs(v2 - v1)))
    if change > tol * max(1.0, float(np.max(np.abs(v2)))):
        raise QuadratureDivergence("Gauss-Hermite moments not converged", {"last_change": change})
    norm = v2[0].real
    mx, mx2, mp, mp2, mxp = (v2[1:] / norm)
    sym = -0.5j + mxp
    mean_x, mean_p = mx.real, mp.real
    return Moments(
        mean_x=float(mean_x),
        mean_p=float(mean_p),
        sxx=float(mx2.real - mean_x**2),
        spp=float(mp2.real - mean_p**2),
        sxp=float(sym.real - mean_x * mean_p),
        mean_x2=float(mx2.real),
        norm=float(norm),
    )


def fock_moments(state):
    """Moments from number-basis expectation values (state is renormalized)."""
    v = state.amplitudes if isinstance(state, FockState) else np.asarray(state, complex)
    v = v / np.linalg.norm(v)
    x, p = quadrature_ops(v.size)
    X, P = x.matrix, p.matrix

    def ev(M):
        return np.vdot(v, M @ v)

    mx, mp = ev(X).real, ev(P).real
    mx2, mp2 = ev(X @ X).real, ev(P @ P).real
    sym = 0.5 * ev(X @ P + P @ X).real
    return Moments(float(mx), float(mp), float(mx2 - mx**2), float(mp2 - mp**2),
                   float(sym - mx * mp), float(mx2))


@dataclass(frozen=True)
class PhotonStats:
    a_n: np.ndarray
    mean_n: float
    mean_n2: float
    g2: float
    norm_captured: float

    def __post_init__(self):
        if self.norm_captured > 1 + 1e-9:
            raise ValueError(f"norm_captured {self.norm_captured} exceeds 1")
        if self.g2 < 0:
            raise ValueError("g2 must be non-negative")


def _stats_from_amplitudes(a):
    prob = np.abs(a) ** 2
    n = np.arange(a.size)
    norm = float(prob.sum())
    mean_n = float(np.sum(n * prob))
    mean_n2 = float(np.sum(n * n * prob))
    g2 = float("nan") if mean_n == 0 else (mean_n2 - mean_n) / mean_n**2
    return norm, mean_n, mean_n2, g2


def photon_stats(params, n_max=30, warn_below=0.99):
    """Number-basis amplitudes from the Taylor series of the Bargmann function.

    With ``d_n = c_n sqrt(n!)`` for the Taylor coefficients ``c_n`` of
    ``exp(A z^2 + B z)``, the recurrence
    ``d_{n+1} = (B d_n + 2 A sqrt(n) d_{n-1}) / sqrt(n + 1)`` never forms a
    factorial.  Moments are truncated at ``n_max`` and are not renormalized.
    """
    if n_max < 10:
        raise ValueError("n_max must be at least 10")
    d = np.zeros(n_max + 1, complex)
    d[0] = 1.0
    d[1] = params.B
    for n in range(1, n_max):
        d[n + 1] = (params.B * d[n] + 2 * params.A * np.sqrt(n) * d[n - 1]) / np.sqrt(n + 1)
    a = params.prefactor * np.exp(params.Gamma) * d
    norm, mean_n, mean_n2, g2 = _stats_from_amplitudes(a)
    if norm < warn_below:
        warnings.warn(f"norm captured by n <= {n_max} is {norm:.4f}", NormLoss, stacklevel=2)
    return PhotonStats(a, mean_n, mean_n2, g2, norm)


def fock_photon_stats(state):
    """Photon statistics of a truncated state (general angle pairs)."""
    v = state.amplitudes if isinstance(state, FockState) else np.asarray(state, complex)
    norm, mean_n, mean_n2, g2 = _stats_from_amplitudes(v)
    return PhotonStats(v.copy(), mean_n, mean_n2, g2, norm)


def analysis_coefficients(g, alpha, beta, angles, N=None):
    """``(1/2pi) <alpha, beta; angles | g>``."""
    N = g.dim if N is None else N
    psi, _ = bifrac_coherent(alpha, beta, angles, N)
    return complex(np.vdot(psi.amplitudes, g.amplitudes[:N]) / (2 * np.pi))


def _axis_weights(axis):
    axis = np.asarray(axis, float)
    w = np.full(axis.size, axis[1] - axis[0])
    w[[0, -1]] *= 0.5
    return w


def _axis_map(values, axis, phi, coord):
    """Apply the 1-D kernel of angle ``phi`` along axis 0 of ``values`` at ``coord``."""
    s = special_value(phi)
    if s == 0.0 or s == np.pi:
        target = coord if s == 0.0 else -coord
        idx = np.nonzero(np.abs(axis - target) < 1e-9 * max(1.0, abs(target)))[0]
        if idx.size == 0:
            raise ValueError(f"delta kernel needs {target:g} on the sampling axis")
        return values[idx[0]]
    k = _kernel(coord, axis, reduce_angle(phi)) * _axis_weights(axis)
    return np.tensordot(k, values, axes=(0, 0))


def family_transform(family, alpha_axis, beta_axis, phi_alpha, phi_beta, angles, points):
    """Map a sampled coherent-state family to shifted angles.

    ``family[i, j]`` holds ``|alpha_axis[i], beta_axis[j]; angles>``.  For each
    target point ``(alpha, beta)`` this returns

        r * sum_ij w_i w_j Delta(beta, b_j; phi_beta) Delta(alpha, a_i; phi_alpha) family[i, j]

    with ``r = |cos(ta + phi_a - tb - phi_b)|^{1/2} / |cos(ta - tb)|^{1/2}``.
    Zero and pi shifts are exact delta maps (the target coordinate must lie on
    the axis).

    Raises
    ------
    ForbiddenBand
        If the base or the shifted angle pair is inadmissible.
    """
    base = _angles(angles)
    target = BifracAngles(base.theta_alpha + phi_alpha, base.theta_beta + phi_beta, base.eps_c)
    ratio = np.sqrt(abs(target.cos_diff) / abs(base.cos_diff))
    alpha_axis = np.asarray(alpha_axis, float)
    beta_axis = np.asarray(beta_axis, float)
    out = []
    for al, be in points:
        # contract beta first: family[:, j] -> (n_alpha, N)
        inner = _axis_map(np.moveaxis(family, 1, 0), beta_axis, phi_beta, be)
        out.append(ratio * _axis_map(inner, alpha_axis, phi_alpha, al))
    return np.array(out)


def fig1_rows(alpha, beta, thetas, n_max=30):
    """Rows ``(theta_alpha, sigma_pp, mean_n, g2, norm_captured, rs_residual)`` for a sweep."""
    rows = []
    for ta in thetas:
        bp = bargmann_params(alpha, beta, ta)
        m = moments_from_wavefunction(bp)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NormLoss)
            st = photon_stats(bp, n_max)
        rows.append((float(ta), m.spp, st.mean_n, st.g2, st.norm_captured, m.rs_determinant - 0.25))
    return rows
