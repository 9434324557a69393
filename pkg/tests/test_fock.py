from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.special import eval_genlaguerre

from bifrac.errors import DimTooSmall, Overflow
from bifrac.fock import (
    FockOperator,
    FockState,
    TruncationReport,
    displacement,
    displacement_column,
    displacement_elements,
    dumps,
    glauber_column,
    ladder_ops,
    loads,
    matrix_exp,
    number_op,
    parity,
    quadrature_ops,
)


def test_ladder_action():
    a, ad = ladder_ops(4)
    one, vac = FockState.basis(1, 4), FockState.basis(0, 4)
    np.testing.assert_allclose((a @ one).amplitudes, vac.amplitudes)
    np.testing.assert_allclose((a @ vac).amplitudes, 0)
    np.testing.assert_allclose(np.diag((ad @ a).matrix).real, [0, 1, 2, 3])
    np.testing.assert_allclose(np.diag(number_op(4).matrix).real, [0, 1, 2, 3])


def test_commutator_truncation_artifact():
    a, ad = ladder_ops(16)
    c = (a @ ad).matrix - (ad @ a).matrix
    np.testing.assert_allclose(np.diag(c)[:15], 1)
    assert c[15, 15] == pytest.approx(-15)


@pytest.mark.parametrize("N", [4, 9, 32])
def test_vacuum_quadratures(N):
    x, p = quadrature_ops(N)
    assert (x @ x).matrix[0, 0] == pytest.approx(0.5)
    assert x.matrix[0, 0] == 0
    assert (p @ p).matrix[0, 0] == pytest.approx(0.5)


def test_canonical_commutator_ground():
    x, p = quadrature_ops(32)
    c = (x @ p).matrix - (p @ x).matrix
    assert c[0, 0] == pytest.approx(1j)


@pytest.mark.parametrize("N", [0, 1, 3])
def test_dim_too_small(N):
    with pytest.raises(DimTooSmall):
        ladder_ops(N)


def test_matrix_exp_trivial():
    np.testing.assert_allclose(matrix_exp(np.zeros((5, 5))), np.eye(5))
    A = np.zeros((5, 5), complex)
    A[0, 0] = 1j * np.pi
    assert matrix_exp(A)[0, 0] == pytest.approx(-1)


def test_matrix_exp_against_taylor():
    x, _ = quadrature_ops(16)
    A = 0.3j * x.matrix
    taylor = np.eye(16, dtype=complex)
    term = np.eye(16, dtype=complex)
    for k in range(1, 40):
        term = term @ A / k
        taylor += term
    assert np.max(np.abs(matrix_exp(A) - taylor)) < 1e-10


def test_matrix_exp_general_matches_scipy():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    np.testing.assert_allclose(matrix_exp(A), expm(A), rtol=1e-12, atol=1e-12)


def test_matrix_exp_overflow():
    with pytest.raises(Overflow):
        matrix_exp(np.diag([800.0, 0, 0, 0]))


def test_displacement_identity_and_vacuum_overlap():
    np.testing.assert_allclose(displacement(0, 0, 8).matrix, np.eye(8), atol=1e-14)
    assert displacement(1, 0, 32).matrix[0, 0] == pytest.approx(np.exp(-0.5), abs=1e-12)


def test_displacement_matches_direct_exponential():
    x, p = quadrature_ops(24)
    gen = 1j * np.sqrt(2) * (0.7 * x.matrix - 0.4 * p.matrix)
    np.testing.assert_allclose(displacement(0.4, 0.7, 24).matrix, expm(gen), atol=1e-12)


def test_displacement_inverse_interior():
    prod = displacement(1, 2, 48) @ displacement(-1, -2, 48)
    assert np.max(np.abs(prod.block(20) - np.eye(20))) < 1e-8


def test_parity_identities():
    P0 = parity(0, 0, 16).matrix
    np.testing.assert_allclose(P0 @ np.eye(16)[:, 0], np.eye(16)[:, 0])
    np.testing.assert_allclose(P0 @ P0, np.eye(16))


def test_displaced_parity_two_forms():
    N = 48
    half = displacement(0.5, 0.5, N).matrix
    sym = half @ parity(0, 0, N).matrix @ half.conj().T
    k = 20
    assert np.max(np.abs(parity(1, 1, N).matrix[:k, :k] - sym[:k, :k])) < 1e-8


def test_glauber_and_truncated_columns():
    g = glauber_column(0.6, -0.3, 40)
    d = displacement_column(0.6, -0.3, 40)
    assert np.max(np.abs(g - d)) < 1e-12
    lam = 0.6 - 0.3j
    assert g[3] == pytest.approx(np.exp(-abs(lam) ** 2 / 2) * lam**3 / np.sqrt(6))


@pytest.mark.parametrize("m, n", [(0, 0), (1, 1), (3, 1), (1, 4)])
def test_displacement_elements_laguerre(m, n):
    alpha, beta = 0.7, -0.4
    lam = alpha + 1j * beta
    x = abs(lam) ** 2
    lo, hi = min(m, n), max(m, n)
    c = np.sqrt(factorial(lo) / factorial(hi)) * np.exp(-x / 2) * eval_genlaguerre(lo, hi - lo, x)
    expected = c * (lam ** (m - n) if m >= n else (-np.conj(lam)) ** (n - m))
    assert displacement_elements(alpha, beta, 6)[m, n] == pytest.approx(expected, abs=1e-13)


def test_fock1_weyl_element():
    # <1|D|1> = (1 - |lam|^2) e^{-|lam|^2/2} vanishes at |lam| = 1
    assert abs(displacement_elements(1.0, 0.0, 3)[1, 1]) < 1e-15


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_elements_match_truncated_exponential(alpha, beta):
    exact = displacement_elements(alpha, beta, 8)
    trunc = displacement(alpha, beta, 64).matrix[:8, :8]
    assert np.max(np.abs(exact - trunc)) < 1e-10


def test_json_roundtrip_operator_and_state():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    back = loads(dumps(FockOperator(M)))
    assert np.max(np.abs(back.matrix - M)) <= 1e-15 * np.max(np.abs(M))
    v = glauber_column(0.3, 0.1, 8)
    sb = loads(FockState(v / np.linalg.norm(v)).to_json())
    np.testing.assert_array_equal(sb.amplitudes, v / np.linalg.norm(v))


def test_state_norm_check():
    with pytest.raises(ValueError):
        FockState(np.ones(4))
    FockState(np.ones(4), normalized=False)


def test_report_flags_edge_mass():
    assert not displacement(3.0, 0.0, 12).report.trusted
    assert displacement(0.2, 0.0, 32).report.trusted
    r = TruncationReport.combine([displacement(0.2, 0, 32).report, displacement(3, 0, 12).report])
    assert not r.trusted
