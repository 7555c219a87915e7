"""Independent dense-matrix oracles shared by the tests.

Everything here is built from scratch with ``np.kron`` so that it does not
share code paths with the package under test.
"""
import itertools
import warnings

import numpy as np
import pytest

SP = np.array([[0.0, 0.0], [1.0, 0.0]])  # |0> ground, |1> excited
SM = SP.T
SZ = np.diag([-1.0, 1.0])
I2 = np.eye(2)


def site_op(op, i, n):
    """``op`` on emitter ``i`` (0-based, emitter 0 is the most significant bit)."""
    mats = [I2] * n
    mats[i] = op
    out = np.array([[1.0]])
    for m in mats:
        out = np.kron(out, m)
    return out


def collective(n):
    jz = sum(site_op(SZ, i, n) for i in range(n)) / 2
    jp = sum(site_op(SP, i, n) for i in range(n))
    jx = (jp + jp.T) / 2
    jy = (jp - jp.T) / 2j
    j2 = jx @ jx + jy @ jy + jz @ jz
    return jz, jp, j2


def brute_sectors(n):
    """``{(2j, 2m): orthonormal basis}`` from simultaneous diagonalization of ``J^2 + eps Jz``."""
    jz, _, j2 = collective(n)
    vals, vecs = np.linalg.eigh(j2 + 1e-3 * jz)
    sectors = {}
    for val, vec in zip(vals, vecs.T):
        m = float(np.real(vec.conj() @ jz @ vec))
        jj = float(np.real(vec.conj() @ j2 @ vec))
        j = (-1 + np.sqrt(1 + 4 * jj)) / 2
        key = (int(round(2 * j)), int(round(2 * m)))
        sectors.setdefault(key, []).append(vec)
    return {k: np.array(v).T for k, v in sectors.items()}


def brute_rho_jm(n, two_j, two_m):
    basis = brute_sectors(n)[(two_j, two_m)]
    return basis @ basis.conj().T / basis.shape[1]


def brute_dicke(n, k):
    psi = np.zeros(2 ** n)
    for idx in range(2 ** n):
        if bin(idx).count("1") == k:
            psi[idx] = 1.0
    return psi / np.linalg.norm(psi)


def brute_pair(rho, n, i=0, j=1):
    c0 = np.trace(rho @ site_op(SP, i, n) @ site_op(SM, j, n))
    czz = np.trace(rho @ site_op(SZ, i, n) @ site_op(SZ, j, n)).real
    return c0, czz


def brute_partial_transpose(rho, n, subset):
    """Partial transpose by explicit index bookkeeping."""
    d = 2 ** n
    out = np.zeros_like(rho)
    bits = lambda x: [(x >> (n - 1 - q)) & 1 for q in range(n)]
    to_int = lambda b: sum(v << (n - 1 - q) for q, v in enumerate(b))
    for a, b in itertools.product(range(d), repeat=2):
        ba, bb = bits(a), bits(b)
        for q in subset:
            ba[q], bb[q] = bb[q], ba[q]
        out[to_int(ba), to_int(bb)] = rho[a, b]
    return out


@pytest.fixture(autouse=True)
def _quiet_weak_coupling():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*weak.coupling.*")
        yield
