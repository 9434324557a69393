"""Truncated number-basis operators.

Conventions: ``hbar = 1``, ``a = (x + i p)/sqrt(2)``, and

    D(alpha, beta) = exp(i sqrt(2) beta x - i sqrt(2) alpha p)
                   = exp(lam a^dag - conj(lam) a),   lam = alpha + i beta.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal, expm
from scipy.special import gammaln

from .errors import DimTooSmall, Overflow

__all__ = [
    "EPS_EDGE",
    "EPS_NORM",
    "FockOperator",
    "FockState",
    "TruncationReport",
    "ladder_ops",
    "quadrature_ops",
    "number_op",
    "matrix_exp",
    "displacement",
    "displacement_column",
    "displacement_elements",
    "glauber_column",
    "parity",
    "interior_size",
    "edge_rows",
    "state_report",
    "operator_report",
    "dumps",
    "loads",
]

EPS_EDGE = 1e-6
EPS_NORM = 1e-3
MIN_DIM = 4
EXP_NORM_LIMIT = 700.0


def _check_dim(N):
    if int(N) != N or N < MIN_DIM:
        raise DimTooSmall(f"Fock dimension must be an integer >= {MIN_DIM}, got {N!r}")
    return int(N)


def interior_size(N):
    """Number of basis states in the interior block ``0..floor(0.9 N)``."""
    return min(N, int(np.floor(0.9 * N)) + 1)


def edge_rows(N):
    """Index slice of the top 10% of the basis."""
    return slice(N - max(1, int(np.ceil(0.1 * N))), N)


@dataclass(frozen=True)
class TruncationReport:
    """How much of a truncated object sits near the cutoff.

    Attributes
    ----------
    edge_weight : float
        Squared modulus in the top 10% of the basis plus any norm that has
        already leaked past the cutoff.  For operators this is the worst
        column among the trust-region columns ``n < N/4``.
    trusted : bool
        ``edge_weight < eps_edge``.
    interior : int
        Number of leading columns that individually pass the edge test.
    work_dim : int
        Working dimension used to build the object (equal to the output
        dimension unless a padded construction was used).
    method : str
    """

    edge_weight: float
    trusted: bool
    interior: int = 0
    work_dim: int = 0
    method: str = ""
    eps_edge: float = EPS_EDGE

    def as_dict(self):
        return {
            "edge_weight": float(self.edge_weight),
            "trusted": bool(self.trusted),
            "interior": int(self.interior),
            "work_dim": int(self.work_dim),
            "method": self.method,
        }

    @staticmethod
    def combine(reports):
        reports = list(reports)
        worst = max(reports, key=lambda r: r.edge_weight)
        return TruncationReport(
            edge_weight=worst.edge_weight,
            trusted=all(r.trusted for r in reports),
            interior=min(r.interior for r in reports),
            work_dim=max(r.work_dim for r in reports),
            method=worst.method,
            eps_edge=worst.eps_edge,
        )


def _column_edge(M, leak=None):
    N = M.shape[0]
    e = np.sum(np.abs(M[edge_rows(N)]) ** 2, axis=0)
    if leak is not None:
        e = e + np.maximum(leak, 0.0)
    return e


def operator_report(M, leak=None, eps_edge=EPS_EDGE, work_dim=None, method=""):
    """Build a :class:`TruncationReport` for an ``N x N`` block."""
    M = np.asarray(M)
    N = M.shape[0]
    e = _column_edge(M, leak)
    k = max(1, int(np.ceil(N / 4)))
    bad = np.nonzero(e >= eps_edge)[0]
    interior = int(bad[0]) if bad.size else N
    w = float(np.max(e[:k]))
    return TruncationReport(w, w < eps_edge, interior, work_dim or N, method, eps_edge)


def state_report(v, eps_edge=EPS_EDGE, work_dim=None, method="", leak=None):
    v = np.asarray(v)
    N = v.size
    w = float(np.sum(np.abs(v[edge_rows(N)]) ** 2))
    if leak is not None:
        w += max(float(leak), 0.0)
    return TruncationReport(w, w < eps_edge, N if w < eps_edge else 0, work_dim or N, method, eps_edge)


@dataclass(frozen=True)
class FockOperator:
    """Square complex matrix in the truncated number basis."""

    matrix: np.ndarray
    report: TruncationReport | None = field(default=None, compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        _check_dim(m.shape[0])
        if not np.all(np.isfinite(m)):
            raise ValueError("operator has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def dag(self):
        return FockOperator(self.matrix.conj().T)

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            return FockOperator(self.matrix @ other.matrix)
        if isinstance(other, FockState):
            return FockState(self.matrix @ other.amplitudes, normalized=False)
        return NotImplemented

    def block(self, k=None):
        k = interior_size(self.dim) if k is None else k
        return self.matrix[:k, :k]

    def trace(self):
        return complex(np.trace(self.matrix))

    def to_json(self):
        return dumps(self)


@dataclass(frozen=True)
class FockState:
    """Complex amplitude vector in the truncated number basis.

    Physical states (``normalized=True``) must have norm in
    ``[1 - eps_norm, 1 + 1e-12]``; raw vectors skip the check.
    """

    amplitudes: np.ndarray
    normalized: bool = True
    eps_norm: float = EPS_NORM
    report: TruncationReport | None = field(default=None, compare=False)

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).ravel()
        _check_dim(v.size)
        if not np.all(np.isfinite(v)):
            raise ValueError("state has non-finite amplitudes")
        if self.normalized:
            n = np.linalg.norm(v)
            if not (1 - self.eps_norm <= n <= 1 + 1e-12):
                raise ValueError(f"state norm {n:.6g} outside [1-{self.eps_norm:g}, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @classmethod
    def basis(cls, n, N):
        v = np.zeros(_check_dim(N), complex)
        v[n] = 1.0
        return cls(v)

    @property
    def dim(self):
        return self.amplitudes.size

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other):
        """``<self|other>``."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self):
        v = self.amplitudes
        return FockOperator(np.outer(v, v.conj()))

    def to_json(self):
        return dumps(self)


def dumps(obj):
    """Serialize a FockOperator or FockState as ``{dim, rows}`` JSON.

    Operators store ``rows`` as a list of rows of ``[re, im]`` pairs; states
    store a single list of pairs.  Python's float repr round-trips exactly.
    """
    if isinstance(obj, FockOperator):
        rows = [[[float(z.real), float(z.imag)] for z in row] for row in obj.matrix]
        return json.dumps({"kind": "operator", "dim": obj.dim, "rows": rows})
    if isinstance(obj, FockState):
        rows = [[float(z.real), float(z.imag)] for z in obj.amplitudes]
        return json.dumps({"kind": "state", "dim": obj.dim, "rows": rows})
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def loads(text):
    d = json.loads(text)
    arr = np.asarray(d["rows"], float)
    values = arr[..., 0] + 1j * arr[..., 1]
    if d.get("kind", "operator" if values.ndim == 2 else "state") == "state":
        if values.size != d["dim"]:
            raise ValueError("dim does not match the number of amplitudes")
        return FockState(values, normalized=False)
    if values.shape != (d["dim"], d["dim"]):
        raise ValueError("dim does not match the matrix shape")
    return FockOperator(values)


def ladder_ops(N):
    """Annihilation and creation operators."""
    N = _check_dim(N)
    a = np.diag(np.sqrt(np.arange(1, N, dtype=float)), 1).astype(complex)
    return FockOperator(a), FockOperator(a.conj().T)


def quadrature_ops(N):
    """Position and momentum ``x = (a + a^dag)/sqrt2``, ``p = (a - a^dag)/(i sqrt2)``."""
    N = _check_dim(N)
    s = np.sqrt(np.arange(1, N, dtype=float) / 2)
    x = (np.diag(s, 1) + np.diag(s, -1)).astype(complex)
    p = -1j * np.diag(s, 1) + 1j * np.diag(s, -1)
    return FockOperator(x), FockOperator(p)


def number_op(N):
    N = _check_dim(N)
    return FockOperator(np.diag(np.arange(N, dtype=complex)))


def matrix_exp(A):
    """Matrix exponential of a FockOperator (or plain square array).

    Anti-Hermitian input goes through a Hermitian eigendecomposition, so the
    result is unitary to rounding for any norm.  Other input uses scaling and
    squaring (``scipy.linalg.expm``), documented accurate to ~1e-12 relative
    for ``||A|| <= 50``.

    Raises
    ------
    Overflow
        If a non-anti-Hermitian argument has 2-norm above 700 or the result
        is not finite.
    """
    M = A.matrix if isinstance(A, FockOperator) else np.asarray(A, complex)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix_exp input has non-finite entries")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if scale == 0:
        out = np.eye(M.shape[0], dtype=complex)
    elif np.max(np.abs(M + M.conj().T)) <= 1e-14 * scale:
        w, V = np.linalg.eigh(-1j * M)
        out = (V * np.exp(1j * w)) @ V.conj().T
    else:
        nrm = np.linalg.norm(M, 2)
        if nrm > EXP_NORM_LIMIT:
            raise Overflow(f"||A||_2 = {nrm:.4g} exceeds the supported {EXP_NORM_LIMIT:g}")
        out = expm(M)
        if not np.all(np.isfinite(out)):
            raise Overflow("matrix exponential overflowed")
    return FockOperator(out) if isinstance(A, FockOperator) else out


@lru_cache(maxsize=32)
def _x_eig(N):
    # truncated position operator: real symmetric tridiagonal
    w, V = eigh_tridiagonal(np.zeros(N), np.sqrt(np.arange(1, N) / 2))
    w.setflags(write=False)
    V.setflags(write=False)
    return w, V


def _rotation(alpha, beta, N):
    # beta x - alpha p = r R x R^dag with R = diag(exp(-i phi n)), beta + i alpha = r e^{i phi}
    z = complex(beta, alpha)
    r, phi = abs(z), np.angle(z)
    return r, np.exp(-1j * phi * np.arange(N))


def displacement(alpha, beta, N):
    """Truncated ``D(alpha, beta) = matrix_exp(i sqrt2 (beta x - alpha p))``.

    The anti-Hermitian generator is a phase rotation of the truncated ``x``, so
    the exponential is formed from a cached eigendecomposition of ``x``; this
    is the same matrix as a direct exponential of the truncated generator.
    """
    N = _check_dim(N)
    r, R = _rotation(alpha, beta, N)
    w, V = _x_eig(N)
    W = R[:, None] * V
    M = (W * np.exp(1j * np.sqrt(2) * r * w)) @ W.conj().T
    return FockOperator(M, report=operator_report(M, method="eig"))


def displacement_column(alpha, beta, N):
    """``D(alpha, beta)|0>`` from the same truncated exponential, for arrays of points.

    Returns an array of shape ``np.broadcast(alpha, beta).shape + (N,)``.
    """
    N = _check_dim(N)
    al, be = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    z = be + 1j * al
    r, phi = np.abs(z), np.angle(z)
    w, V = _x_eig(N)
    # R^dag |0> = |0>, so only V[0] enters on the right
    E = np.exp(1j * np.sqrt(2) * r[..., None] * w) * V[0]
    cols = E @ V.T
    return cols * np.exp(-1j * phi[..., None] * np.arange(N))


def glauber_column(alpha, beta, N):
    """Exact amplitudes ``<n|D(alpha, beta)|0> = e^{-|lam|^2/2} lam^n / sqrt(n!)``, ``n < N``.

    Unlike :func:`displacement_column` this is not a column of a truncated
    unitary: the norm lost past the cutoff is visible as ``1 - ||v||^2``.
    """
    al, be = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    lam = al + 1j * be
    out = np.empty(al.shape + (N,), complex)
    out[..., 0] = np.exp(-0.5 * np.abs(lam) ** 2)
    for n in range(1, N):
        out[..., n] = out[..., n - 1] * lam / np.sqrt(n)
    return out


def displacement_elements(alpha, beta, K):
    """Exact matrix elements ``<m|D(alpha, beta)|n>`` for ``m, n < K``.

    Uses the associated-Laguerre closed form.  ``alpha`` and ``beta`` may be
    complex arrays; the formula is then the analytic continuation in which
    ``conj(lam)`` is replaced by ``alpha - i beta``.  Output shape is
    ``broadcast_shape + (K, K)``.
    """
    al, be = np.broadcast_arrays(np.asarray(alpha, complex), np.asarray(beta, complex))
    lam, lamb = al + 1j * be, al - 1j * be
    x = lam * lamb
    g = np.exp(-0.5 * x)
    out = np.empty(al.shape + (K, K), complex)
    lf = gammaln(np.arange(K) + 1.0)
    for k in range(K):
        # L_j^{(k)}(x) for j = 0..K-k-1 by the three-term recurrence
        Lm1 = np.zeros_like(x)
        L = np.ones_like(x)
        pk, qk = lam ** k, (-lamb) ** k
        for j in range(K - k):
            m = j + k
            c = np.exp(0.5 * (lf[j] - lf[m]))
            out[..., m, j] = c * pk * g * L
            out[..., j, m] = c * qk * g * L
            Lm1, L = L, ((2 * j + 1 + k - x) * L - (j + k) * Lm1) / (j + 1)
    return out


def parity(alpha, beta, N):
    """``Pi(alpha, beta) = D(alpha, beta) Pi(0, 0)`` with ``Pi(0,0) = diag((-1)^n)``."""
    N = _check_dim(N)
    sign = (-1.0) ** np.arange(N)
    if alpha == 0 and beta == 0:
        M = np.diag(sign).astype(complex)
    else:
        M = displacement(alpha, beta, N).matrix * sign
    return FockOperator(M, report=operator_report(M, method="eig"))
