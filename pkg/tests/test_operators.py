import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bifrac.errors import (
    ForbiddenBand,
    NotGaussian,
    QuadratureDivergence,
    SpecialAngleNeedsLimit,
)
from bifrac.fock import displacement, parity
from bifrac.operators import (
    HALF_HALF,
    PI_PI,
    ZERO_ZERO,
    BifracAngles,
    bifrac_operator,
    bifrac_operator_integral,
    bto_gaussian,
    bto_params,
    coherent_columns,
    double_transform_quadrature,
    gaussian_fingerprint,
    special_case_operator,
)


def interior_dev(A, B, k):
    return float(np.max(np.abs(A[:k, :k] - B[:k, :k])))


def mp_bto(alpha, beta, ta, tb):
    mpmath.mp.dps = 40
    a, b, ta, tb = (mpmath.mpf(v) for v in (alpha, beta, ta, tb))
    tau = mpmath.cos(ta) * mpmath.sin(tb) / mpmath.cos(ta - tb)
    sigma = a / (mpmath.sqrt(2) * mpmath.cos(ta)) - b / (mpmath.sqrt(2) * mpmath.sin(tb))
    phi = -(ta + tb) / 2 - a**2 * mpmath.cot(ta) / 2 + a**2 / mpmath.sin(2 * ta) - b**2 * mpmath.cot(tb) / 2
    return float(tau), float(sigma), float(phi)


class TestAngles:
    def test_forbidden_band(self):
        with pytest.raises(ForbiddenBand):
            BifracAngles(np.pi / 2, 0.0)
        with pytest.raises(ForbiddenBand):
            BifracAngles(1.0, 1.0 + np.pi / 2 + 5e-4)
        BifracAngles(1.0, 1.0 + np.pi / 2 + 2e-3)

    @pytest.mark.parametrize("pair, which", [((0, 0), ZERO_ZERO), ((np.pi / 2, np.pi / 2), HALF_HALF),
                                             ((np.pi, -np.pi), PI_PI), ((0.3, 0.3), None)])
    def test_special_case(self, pair, which):
        assert BifracAngles(*pair).special_case == which


class TestBtoParams:
    def test_quarter_angles_at_origin(self):
        p = bto_params(0, 0, (np.pi / 4, np.pi / 4))
        assert p.tau == pytest.approx(0.5)
        assert p.sigma == 0
        assert p.phi == pytest.approx(-np.pi / 4)

    @pytest.mark.parametrize("theta", [0.2, 0.9, 2.5])
    def test_equal_angles_tau(self, theta):
        assert bto_params(0.3, 0.4, (theta, theta)).tau == pytest.approx(np.sin(2 * theta) / 2)

    def test_against_high_precision(self):
        p = bto_params(1, 1, (0.3, 0.1))
        assert (p.tau, p.sigma, p.phi) == pytest.approx(mp_bto(1, 1, 0.3, 0.1), rel=1e-13)

    @pytest.mark.parametrize("alpha, beta, angles", [(1, 0, (np.pi / 2 - 1e-12, 0.3)), (0, 1, (0.3, 0.0))])
    def test_singular_terms_named(self, alpha, beta, angles):
        with pytest.raises(SpecialAngleNeedsLimit, match="term"):
            bto_params(alpha, beta, angles)


class TestOperator:
    def test_half_half_is_displaced_parity(self):
        U, _ = bifrac_operator(1, 1, (np.pi / 2, np.pi / 2), 64)
        assert interior_dev(U.matrix, parity(1, 1, 64).matrix, 40) < 1e-6

    def test_squeeze_only_unitary(self):
        U, rep = bifrac_operator(0, 0, (0.4, 0.4), 64)
        G = U.matrix @ U.matrix.conj().T
        assert interior_dev(G, np.eye(64), rep.interior) < 1e-8

    def test_adjoint(self):
        U, r1 = bifrac_operator(1, 0.5, (0.3, 0.2), 64)
        V, r2 = bifrac_operator(-1, -0.5, (-0.3, -0.2), 64)
        assert interior_dev(U.dag().matrix, V.matrix, min(r1.interior, r2.interior)) < 1e-6

    def test_special_cases(self):
        np.testing.assert_allclose(special_case_operator(0, 0, ZERO_ZERO, 8).matrix, np.eye(8), atol=1e-14)
        np.testing.assert_allclose(special_case_operator(0, 0, HALF_HALF, 8).matrix,
                                   np.diag((-1.0) ** np.arange(8)))
        np.testing.assert_allclose(special_case_operator(1, 2, PI_PI, 32).matrix, displacement(-2, 1, 32).matrix)

    def test_gaussian_and_padded_routes_agree(self):
        G, _ = bifrac_operator(0.7, -0.4, (0.5, -0.3), 24)
        E, rep = bifrac_operator(0.7, -0.4, (0.5, -0.3), 24, method="expm")
        assert rep.work_dim > 24
        assert np.max(np.abs(G.matrix - E.matrix)) < 1e-9

    def test_near_singular_refused(self):
        with pytest.raises(SpecialAngleNeedsLimit):
            bifrac_operator(0.3, 0.2, (np.pi / 2 - 1e-6, np.pi / 2), 16)

    @pytest.mark.parametrize("eps", [1e-4, 1e-3])
    def test_continuity_towards_parity(self, eps):
        U, _ = bifrac_operator(1, 1, (np.pi / 2 - eps, np.pi / 2 - eps), 64)
        assert interior_dev(U.matrix, parity(1, 1, 64).matrix, 20) < 100 * eps

    def test_report_counts_leaky_columns(self):
        _, rep = bifrac_operator(2.5, 2.5, (0.6, 0.3), 24)
        assert not rep.trusted
        assert rep.interior < 24

    @settings(max_examples=15, deadline=None)
    @given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-3, 3), st.floats(-3, 3))
    def test_unitary_interior(self, alpha, beta, ta, tb):
        assume(abs(np.cos(ta - tb)) > 0.15 and abs(np.cos(ta)) > 0.15)
        U, rep = bifrac_operator(alpha, beta, (ta, tb), 48)
        assume(rep.interior >= 8)
        k = rep.interior
        G = U.matrix.conj().T @ U.matrix
        assert interior_dev(G, np.eye(48), k) < 1e-6


class TestOracle:
    def test_matches_product_form_up_to_phase(self):
        O = bifrac_operator_integral(0.5, 0.5, (0.6, 0.3), K=9).matrix
        U = bifrac_operator(0.5, 0.5, (0.6, 0.3), 24)[0].matrix[:9, :9]
        phase = np.vdot(O.ravel(), U.ravel())
        phase /= abs(phase)
        assert np.max(np.abs(U - phase * O)) < 1e-3
        # the offset in the central region is exactly 1
        assert phase == pytest.approx(1, abs=1e-9)

    def test_relative_phase_is_power_of_i(self):
        O = bifrac_operator_integral(0.3, -0.2, (2.8, 0.3), K=5).matrix
        U = bifrac_operator(0.3, -0.2, (2.8, 0.3), 24)[0].matrix[:5, :5]
        ratio = U[0, 0] / O[0, 0]
        assert min(abs(ratio - z) for z in (1, 1j, -1, -1j)) < 1e-9
        assert np.max(np.abs(U - ratio * O)) < 1e-9

    def test_real_contour_agrees(self):
        a = bifrac_operator_integral(0.4, 0.2, (0.7, 0.3), K=5).matrix
        b = bifrac_operator_integral(0.4, 0.2, (0.7, 0.3), K=5, contour="real", max_levels=6).matrix
        assert np.max(np.abs(a - b)) < 1e-6

    def test_near_parity_limit(self):
        eps = 1e-4
        O = bifrac_operator_integral(0.5, 0.5, (np.pi / 2 - eps, np.pi / 2 - eps), K=9).matrix
        assert np.max(np.abs(O - parity(0.5, 0.5, 48).matrix[:9, :9])) < 1e-3

    def test_small_angle_limit_is_identity(self):
        O = bifrac_operator_integral(0, 0, (1e-4, 1e-4), K=9).matrix
        assert np.max(np.abs(O - np.eye(9))) < 2e-3

    def test_delta_kernel_refused(self):
        with pytest.raises(SpecialAngleNeedsLimit):
            bifrac_operator_integral(0.1, 0.1, (0.0, 0.3))

    def test_divergence_diagnostics(self):
        with pytest.raises(QuadratureDivergence) as info:
            double_transform_quadrature(0.3, 0.2, (0.7, 0.3), lambda a, b: np.exp(a * a + b * b), max_levels=1)
        assert "last_change" in info.value.diagnostics


class TestFingerprint:
    def test_displacement_shift(self):
        g = gaussian_fingerprint(displacement(1, 0, 48))
        np.testing.assert_allclose(g.S, np.eye(2), atol=1e-8)
        np.testing.assert_allclose(g.d, [np.sqrt(2), 0], atol=1e-8)

    def test_parity(self):
        g = gaussian_fingerprint(parity(0, 0, 16))
        np.testing.assert_allclose(g.S, -np.eye(2), atol=1e-12)
        np.testing.assert_allclose(g.d, 0, atol=1e-12)

    def test_determinant_and_analytic_action(self):
        U, _ = bifrac_operator(1, 1, (0.4, 0.2), 64)
        g = gaussian_fingerprint(U)
        assert g.det == pytest.approx(1, abs=1e-6)
        exact = bto_gaussian(1, 1, (0.4, 0.2))
        np.testing.assert_allclose(g.S, exact.S, atol=1e-8)
        np.testing.assert_allclose(g.d, exact.d, atol=1e-8)

    def test_non_gaussian_rejected(self):
        M = np.eye(32, dtype=complex)
        M[:4, :4] = np.linalg.qr(np.arange(16).reshape(4, 4) + 1j * np.eye(4))[0]
        with pytest.raises(NotGaussian):
            gaussian_fingerprint(M)


def test_coherent_columns_match_operator():
    U, _ = bifrac_operator(0.6, -0.2, (0.9, 0.4), 32)
    np.testing.assert_allclose(coherent_columns(0.6, -0.2, (0.9, 0.4), 32), U.matrix[:, 0], atol=1e-14)


@pytest.mark.parametrize("pair, glauber", [((0, 0), lambda a, b: (b, -a)), ((np.pi / 2, np.pi / 2), lambda a, b: (a, b)),
                                           ((np.pi, np.pi), lambda a, b: (-b, a))])
def test_coherent_columns_special(pair, glauber):
    col = coherent_columns(0.7, 0.2, pair, 24)
    np.testing.assert_allclose(col, displacement(*glauber(0.7, 0.2), 24).matrix[:, 0], atol=1e-12)
