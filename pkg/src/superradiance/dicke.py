"""Collective angular-momentum structure of N pseudo-spin-1/2 emitters.

Basis convention on the ``2**N`` emitter space: emitter 1 is the most
significant bit and ``|1>`` is the excited state, so the fully inverted state
is the last basis vector.

Half-integer quantum numbers are stored as doubled integers ``(2j, 2m)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ParameterError

MAX_EXPLICIT_EMITTERS = 12
EIGENVALUE_TOL = 1e-9


@dataclass(frozen=True, order=True)
class JMLabel:
    """Sector ``(j, m)`` of ``N`` emitters, stored as ``(2j, 2m)``."""

    n: int
    two_j: int
    two_m: int

    def __post_init__(self):
        n, tj, tm = self.n, self.two_j, self.two_m
        if n < 1:
            raise ParameterError(f"N must be >= 1, got {n}")
        if tj < 0 or tj > n or (n - tj) % 2:
            raise ParameterError(f"j={tj / 2} is not a valid total spin for N={n}")
        if abs(tm) > tj or (tj - tm) % 2:
            raise ParameterError(f"m={tm / 2} is not a valid projection for j={tj / 2}")

    @classmethod
    def of(cls, j, m, n) -> "JMLabel":
        """Build from (half-)integer ``j``, ``m``; rejects non half-integers."""
        tj, tm = Fraction(j) * 2, Fraction(m) * 2
        if tj.denominator != 1 or tm.denominator != 1:
            raise ParameterError(f"(j, m) = ({j}, {m}) are not half-integers")
        return cls(int(n), int(tj), int(tm))

    @property
    def j(self) -> float:
        return self.two_j / 2

    @property
    def m(self) -> float:
        return self.two_m / 2

    @property
    def excitations(self) -> int:
        """Number of excited emitters ``k = m + N/2``."""
        return (self.two_m + self.n) // 2

    def __str__(self):
        return f"(j={_half(self.two_j)}, m={_half(self.two_m)})"


def _half(two_x):
    return str(two_x // 2) if two_x % 2 == 0 else f"{two_x}/2"


def all_labels(n: int) -> list[JMLabel]:
    """Every sector for ``N`` emitters, ``j`` descending from ``N/2``, ``m`` descending."""
    return [JMLabel(n, tj, tm)
            for tj in range(n, -1, -2)
            for tm in range(tj, -tj - 1, -2)]


def multiplicity(j, n: int) -> int:
    """Degeneracy ``d_j = (2j+1)/(N+1) * binom(N+1, N/2 - j)``; independent of ``m``."""
    label = j if isinstance(j, JMLabel) else JMLabel.of(j, j, n)
    tj, n = label.two_j, label.n
    num = (tj + 1) * comb(n + 1, (n - tj) // 2)
    assert num % (n + 1) == 0
    return num // (n + 1)


def _require_pairs(label):
    if label.n < 2:
        raise ParameterError("pair correlations need N >= 2")


def c0_of_jm(label: JMLabel) -> float:
    """``<sigma_i^+ sigma_j^->`` of the uniform sector state, ``(j(j+1) - m^2 - N/2) / (N(N-1))``."""
    _require_pairs(label)
    j, m, n = label.j, label.m, label.n
    return (j * (j + 1) - m * m - n / 2) / (n * (n - 1))


def czz_of_jm(label: JMLabel) -> float:
    """``<sigma_i^z sigma_j^z>`` of the uniform sector state, ``(4m^2 - N) / (N(N-1))``."""
    _require_pairs(label)
    m, n = label.m, label.n
    return (4 * m * m - n) / (n * (n - 1))


def dicke_emission_rates(n: int, k: int, i0: float) -> tuple[float, float]:
    """Spontaneous and correlated emission rates ``(I0 k, I0 (N-k) k)`` of ``|D_{N,k}>``."""
    if not 0 <= k <= n:
        raise ParameterError(f"k={k} outside [0, {n}]")
    return i0 * k, i0 * (n - k) * k


# --- explicit operators (small N) ---------------------------------------------

def _check_explicit(n):
    if n < 1:
        raise ParameterError(f"N must be >= 1, got {n}")
    if n > MAX_EXPLICIT_EMITTERS:
        raise CapacityError(
            f"explicit 2^N construction limited to N <= {MAX_EXPLICIT_EMITTERS}, got {n}")


_SP = sp.csr_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]))   # |1><0|
_SZ = sp.csr_matrix(np.diag([-1.0, 1.0]))


def _embed(op, site, n):
    """``op`` acting on emitter ``site`` (0-based, 0 = most significant)."""
    left = sp.identity(2 ** site, format="csr")
    right = sp.identity(2 ** (n - site - 1), format="csr")
    return sp.kron(sp.kron(left, op), right, format="csr")


@dataclass(frozen=True)
class CollectiveOperators:
    """Sparse single-emitter and collective spin operators on ``2**N`` states."""

    n: int
    sigma_plus: tuple
    sigma_minus: tuple
    sigma_z: tuple
    jz: sp.csr_matrix
    j_plus: sp.csr_matrix
    j2: sp.csr_matrix

    @property
    def dim(self):
        return 2 ** self.n

    def sigma_x(self, i):
        return self.sigma_plus[i] + self.sigma_minus[i]

    def sigma_y(self, i):
        return -1j * (self.sigma_plus[i] - self.sigma_minus[i])


@lru_cache(maxsize=16)
def collective_operators(n: int) -> CollectiveOperators:
    _check_explicit(n)
    sps = tuple(_embed(_SP, i, n) for i in range(n))
    sms = tuple(s.T.tocsr() for s in sps)
    szs = tuple(_embed(_SZ, i, n) for i in range(n))
    jz = 0.5 * sum(szs)
    jp = sum(sps)
    j2 = (jp @ jp.T + jz @ jz - jz).tocsr()
    return CollectiveOperators(n, sps, sms, szs, jz.tocsr(), jp.tocsr(), j2)


@lru_cache(maxsize=16)
def excitation_numbers(n: int) -> np.ndarray:
    """Number of excited emitters in each computational basis state."""
    idx = np.arange(2 ** n)
    return np.array([bin(i).count("1") for i in idx])


def dicke_state(n: int, k: int) -> np.ndarray:
    """Symmetric Dicke state ``|D_{N,k}>`` with ``k`` excitations as a state vector."""
    _check_explicit(n)
    if not 0 <= k <= n:
        raise ParameterError(f"k={k} outside [0, {n}]")
    vec = (excitation_numbers(n) == k).astype(float)
    return vec / np.sqrt(comb(n, k))


@lru_cache(maxsize=16)
def sector_bases(n: int) -> dict:
    """Orthonormal basis (columns) of every ``(j, m)`` eigenspace.

    ``J_z`` is diagonal in the computational basis, so ``J^2`` is
    diagonalized inside each fixed-``m`` block and its eigenvectors grouped
    by eigenvalue ``j(j+1)``.
    """
    ops = collective_operators(n)
    j2 = ops.j2.toarray()
    exc = excitation_numbers(n)
    bases = {}
    for k in range(n + 1):
        idx = np.flatnonzero(exc == k)
        vals, vecs = np.linalg.eigh(j2[np.ix_(idx, idx)])
        two_m = 2 * k - n
        found = 0
        for tj in range(abs(two_m), n + 1, 2):
            target = tj / 2 * (tj / 2 + 1)
            sel = np.abs(vals - target) < EIGENVALUE_TOL * max(1.0, target)
            if not sel.any():
                continue
            full = np.zeros((2 ** n, int(sel.sum())))
            full[idx] = vecs[:, sel]
            bases[(tj, two_m)] = full
            found += int(sel.sum())
        if found != len(idx):
            raise RuntimeError(f"J^2 spectrum in m-block k={k} not resolved")
    return bases


def sector_basis(label: JMLabel) -> np.ndarray:
    _check_explicit(label.n)
    return sector_bases(label.n)[(label.two_j, label.two_m)]


def projector(label: JMLabel) -> np.ndarray:
    """Projector onto the ``(j, m)`` eigenspace."""
    basis = sector_basis(label)
    return basis @ basis.T


def rho_jm(label: JMLabel) -> np.ndarray:
    """Uniform mixture over the degenerate ``(j, m)`` eigenspace, trace one."""
    return projector(label) / multiplicity(label, label.n)


def permutation_operator(n: int, perm) -> sp.csr_matrix:
    """Unitary that moves emitter ``i`` to position ``perm[i]`` (0-based)."""
    _check_explicit(n)
    perm = list(perm)
    if sorted(perm) != list(range(n)):
        raise ParameterError(f"{perm} is not a permutation of {n} emitters")
    idx = np.arange(2 ** n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))) & 1
    target = np.zeros_like(idx)
    for i in range(n):
        target |= bits[:, i] << (n - 1 - perm[i])
    return sp.csr_matrix((np.ones(2 ** n), (target, idx)), shape=(2 ** n, 2 ** n))
