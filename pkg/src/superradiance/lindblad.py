"""Exact master-equation solver for N emitters in a lossy cavity.

The joint space is ``emitters (x) photon Fock levels 0..n_max``; the emitter
index is the slow one.  The Hamiltonian is written in the frame rotating at
the cavity frequency, so only the detuning ``omega_q - omega_c`` survives:

    H = (Delta/2) sum_i sz_i + g sum_i (sp_i a + sm_i a^dag)

Dissipators: ``kappa D[a] + gamma sum_i D[sm_i] + (gamma_phi/2) sum_i D[sz_i]``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _ode
from .dicke import collective_operators, dicke_state, excitation_numbers
from .errors import CapacityError, NumericalQualityError, ParameterError
from .model import (DickeState, FullyInverted, FullySeparableHalfInverted,
                    PhotonFock, SystemParams, TimeGrid)

log = logging.getLogger(__name__)

DEFAULT_DIM_LIMIT = 4096
CUTOFF_POPULATION_TOL = 1e-6
POSITIVITY_TOL = 1e-8
TRACE_TOL = 1e-8


def destroy(n_max):
    """Photon annihilation operator on Fock levels ``0..n_max``."""
    return sp.diags(np.sqrt(np.arange(1, n_max + 1)), 1, format="csr")


def default_cutoff(n_emitters, initial_photons=0):
    return n_emitters + initial_photons + 4


class Generator:
    """Lindblad generator for fixed parameters and photon cutoff.

    Calling the instance on a density matrix returns ``d rho / dt``.
    """

    def __init__(self, params: SystemParams, n_max: int, dim_limit=DEFAULT_DIM_LIMIT):
        n = params.n_emitters
        if n_max < 0:
            raise ParameterError(f"photon cutoff must be >= 0, got {n_max}")
        dim = 2 ** n * (n_max + 1)
        if dim > dim_limit:
            raise CapacityError(
                f"Hilbert space dimension 2^{n}*{n_max + 1} = {dim} exceeds limit {dim_limit}")
        self.params = params
        self.n_max = n_max
        self.n_emitters = n
        self.dim = dim

        ops = collective_operators(n)
        idq = sp.identity(2 ** n, format="csr")
        idf = sp.identity(n_max + 1, format="csr")
        a_f = destroy(n_max)
        self.a = sp.kron(idq, a_f, format="csr")
        self.num = (self.a.T @ self.a).tocsr()
        self.jp_a = sp.kron(ops.j_plus, a_f, format="csr")
        sm = [sp.kron(s, idf, format="csr") for s in ops.sigma_minus]

        g, kappa = params.coupling_g, params.cavity_loss_kappa
        gamma, gphi = params.emitter_decay_gamma, params.pure_dephasing_gamma_phi
        jz = sp.kron(ops.jz, idf, format="csr")
        self.hamiltonian = (params.detuning_delta * jz
                            + g * (self.jp_a + self.jp_a.T)).tocsr()

        # (rate, collapse operator) pairs except dephasing, which is diagonal
        self.jumps = []
        if kappa > 0:
            self.jumps.append((kappa, self.a))
        if gamma > 0:
            self.jumps.extend((gamma, s) for s in sm)
        decay = sum((r * (c.T @ c) for r, c in self.jumps), sp.csr_matrix((dim, dim)))
        self.h_eff = (self.hamiltonian - 0.5j * decay).tocsr()
        self.h_eff_dag = self.h_eff.conj().T.tocsr()

        # (gamma_phi/2) D[sz_i] rho = (gamma_phi/2) (z_i z_i^T - 1) * rho elementwise
        self.dephasing = None
        if gphi > 0:
            bits = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
            z = np.repeat(2 * bits - 1, n_max + 1, axis=0).astype(float)
            self.dephasing = 0.5 * gphi * (z @ z.T - n)

    def __call__(self, rho):
        out = -1j * (self.h_eff @ rho - (self.h_eff_dag.T @ rho.T).T)
        for rate, c in self.jumps:
            out += rate * (c @ (c @ rho).conj().T).conj().T
        if self.dephasing is not None:
            out += self.dephasing * rho
        return out

    def excitations(self) -> np.ndarray:
        """Total excitation (emitters + photons) of every joint basis state."""
        return (np.repeat(excitation_numbers(self.n_emitters), self.n_max + 1)
                + np.tile(np.arange(self.n_max + 1), 2 ** self.n_emitters))

    def balanced_indices(self) -> np.ndarray:
        """Row-major positions ``(a, b)`` of ``rho`` with equal excitation in ket and bra.

        The generator maps this subspace into itself; every supported initial
        state lies in it.
        """
        exc = self.excitations()
        return np.flatnonzero((exc[:, None] == exc[None, :]).ravel())

    def superoperator(self, indices=None) -> sp.csr_matrix:
        """Matrix ``L`` with ``vec(d rho/dt) = L vec(rho)`` for row-major ``vec``.

        With ``indices`` the operator is restricted to those entries of
        ``vec(rho)``, which must span an invariant subspace.
        """
        d = self.dim
        eye = sp.identity(d, format="csr")
        terms = [-1j * sp.kron(self.h_eff, eye), 1j * sp.kron(eye, self.h_eff_dag.T)]
        terms += [rate * sp.kron(c, c.conj()) for rate, c in self.jumps]
        if self.dephasing is not None:
            terms.append(sp.diags(self.dephasing.ravel()))
        if indices is None:
            return sum(terms[1:], terms[0]).tocsr()
        pos = np.full(d * d, -1)
        pos[indices] = np.arange(len(indices))
        rows, cols, vals = [], [], []
        for term in terms:
            term = term.tocoo()
            keep = (pos[term.row] >= 0) & (pos[term.col] >= 0)
            rows.append(pos[term.row[keep]])
            cols.append(pos[term.col[keep]])
            vals.append(term.data[keep])
        size = len(indices)
        return sp.csr_matrix((np.concatenate(vals).astype(complex),
                              (np.concatenate(rows), np.concatenate(cols))),
                             shape=(size, size))


def build_generator(params: SystemParams, n_max: int, dim_limit=DEFAULT_DIM_LIMIT) -> Generator:
    return Generator(params, n_max, dim_limit)


# --- states -------------------------------------------------------------------

def initial_emitter_state(initial, n_emitters) -> np.ndarray:
    problems = initial.check(n_emitters)
    if problems:
        raise ParameterError(problems)
    d = 2 ** n_emitters
    if isinstance(initial, FullyInverted):
        rho = np.zeros((d, d))
        rho[-1, -1] = 1.0
    elif isinstance(initial, FullySeparableHalfInverted):
        rho = np.eye(d) / d
    elif isinstance(initial, DickeState):
        psi = dicke_state(n_emitters, initial.k)
        rho = np.outer(psi, psi)
    elif isinstance(initial, PhotonFock):
        rho = np.zeros((d, d))
        rho[0, 0] = 1.0
    else:
        raise ParameterError(f"unsupported initial condition {initial!r}")
    return rho.astype(complex)


def initial_density_matrix(initial, n_emitters, n_max) -> np.ndarray:
    n_p = initial.initial_photons()
    if n_p > n_max:
        raise ParameterError(f"initial photon number {n_p} exceeds cutoff {n_max}")
    field_state = np.zeros((n_max + 1, n_max + 1))
    field_state[n_p, n_p] = 1.0
    return np.kron(initial_emitter_state(initial, n_emitters), field_state)


def reduce_to_emitters(rho, n_emitters) -> np.ndarray:
    """Partial trace over the photon mode."""
    dq = 2 ** n_emitters
    nf = rho.shape[0] // dq
    return np.einsum("aibi->ab", rho.reshape(dq, nf, dq, nf))


def photon_distribution(rho, n_emitters) -> np.ndarray:
    dq = 2 ** n_emitters
    nf = rho.shape[0] // dq
    return np.real(np.einsum("aiai->i", rho.reshape(dq, nf, dq, nf)))


def purity(rho) -> float:
    return float(np.real(np.vdot(rho, rho)))


def clipped_eigenvalues(rho, tol=POSITIVITY_TOL) -> np.ndarray:
    """Eigenvalues with ``[-tol, 0)`` set to zero; larger violations raise."""
    vals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if vals.min() < -tol:
        raise NumericalQualityError(f"density matrix eigenvalue {vals.min():.3e} < -{tol}")
    return np.where(vals < 0, 0.0, vals)


# --- emitter observables ----------------------------------------------------------

def pair_correlations(rho_q, n_emitters) -> tuple[np.ndarray, np.ndarray]:
    """Matrices of ``<sp_i sm_j>`` and ``<sz_i sz_j>`` for every emitter pair."""
    ops = collective_operators(n_emitters)
    c0 = np.zeros((n_emitters, n_emitters), dtype=complex)
    czz = np.zeros((n_emitters, n_emitters))
    rt = rho_q.T
    for i in range(n_emitters):
        for j in range(n_emitters):
            if i == j:
                continue
            c0[i, j] = np.sum((ops.sigma_plus[i] @ ops.sigma_minus[j]).multiply(rt))
            czz[i, j] = np.real(np.sum((ops.sigma_z[i] @ ops.sigma_z[j]).multiply(rt)))
    return c0, czz


def emitter_moments(rho_q, n_emitters):
    """``(s_z, C0, C_zz)`` averaged over emitters / ordered pairs.

    Uses ``sum_{i!=j} sp_i sm_j = J+ J- - (N/2 + Jz)`` and
    ``sum_{i!=j} sz_i sz_j = 4 Jz^2 - N``.
    """
    n = n_emitters
    ops = collective_operators(n)
    pop = np.real(np.diag(rho_q))
    mz = excitation_numbers(n) - n / 2
    sz = float(pop @ (2 * mz) / n)
    if n < 2:
        return sz, complex("nan"), float("nan")
    jpjm = ops.j_plus @ ops.j_plus.T
    pair_sum = np.sum(jpjm.multiply(rho_q.T)) - pop @ (n / 2 + mz)
    c0 = complex(pair_sum / (n * (n - 1)))
    czz = float((pop @ (4 * mz ** 2) - n) / (n * (n - 1)))
    return sz, c0, czz


def dicke_overlap(rho_q, n_emitters, k=None) -> float:
    """``<D_{N,k}| rho_q |D_{N,k}>``, by default ``k = N // 2``."""
    k = n_emitters // 2 if k is None else k
    psi = dicke_state(n_emitters, k)
    return float(np.real(psi @ rho_q @ psi))


@dataclass(frozen=True)
class ObservableRecord:
    time: float
    sz: float
    n: float
    c0: complex
    czz: float
    purity: float | None = None
    dicke_overlap: float | None = None


def observables(rho, n_emitters, time=0.0) -> ObservableRecord:
    """Observables of a joint emitter-photon density matrix."""
    rho_q = reduce_to_emitters(rho, n_emitters)
    pn = photon_distribution(rho, n_emitters)
    sz, c0, czz = emitter_moments(rho_q, n_emitters)
    return ObservableRecord(time=float(time), sz=sz, n=float(pn @ np.arange(len(pn))),
                            c0=c0, czz=czz, purity=purity(rho_q),
                            dicke_overlap=dicke_overlap(rho_q, n_emitters))


# --- negativity -------------------------------------------------------------------

def partial_transpose(rho_q, n_emitters, subset) -> np.ndarray:
    """Partial transpose over the emitters in ``subset`` (0-based indices)."""
    n = n_emitters
    t = rho_q.reshape((2,) * (2 * n))
    axes = list(range(2 * n))
    for i in subset:
        axes[i], axes[n + i] = axes[n + i], axes[i]
    return t.transpose(axes).reshape(2 ** n, 2 ** n)


def negativity(rho_q, subset, n_emitters=None) -> float:
    """Sum of absolute negative eigenvalues of the partial transpose.

    ``subset`` lists the (0-based) emitters on one side of the bipartition.
    """
    n = n_emitters or int(round(np.log2(rho_q.shape[0])))
    if n > 8:
        raise CapacityError(f"negativity limited to N <= 8, got {n}")
    subset = sorted(set(int(i) for i in subset))
    if not subset or len(subset) >= n or subset[0] < 0 or subset[-1] >= n:
        raise ParameterError(f"bipartition {subset} must be a proper non-empty subset of 0..{n - 1}")
    vals = np.linalg.eigvalsh(partial_transpose(rho_q, n, subset))
    return float(-vals[vals < 0].sum())


# --- integration --------------------------------------------------------------------

class _Propagation:
    """Vectorized generator, restricted to the excitation-balanced subspace when possible."""

    def __init__(self, generator: Generator, rho0):
        d = generator.dim
        if rho0.shape != (d, d):
            raise ParameterError(
                f"initial state shape {rho0.shape} does not match generator dimension {d}")
        self.dim = d
        vec0 = np.asarray(rho0, dtype=complex).ravel()
        idx = generator.balanced_indices()
        outside = np.ones(d * d, dtype=bool)
        outside[idx] = False
        if np.any(vec0[outside] != 0):
            self.indices = None
            self.L = generator.superoperator()
            self.vec0 = vec0
        else:
            self.indices = idx
            self.L = generator.superoperator(idx)
            self.vec0 = vec0[idx]

    def expand(self, v):
        if self.indices is None:
            return v.reshape(self.dim, self.dim)
        full = np.zeros(self.dim * self.dim, dtype=complex)
        full[self.indices] = v
        return full.reshape(self.dim, self.dim)

    def rate_functional(self, op):
        """Row vector ``r`` with ``d<op>/dt = r @ v``."""
        row = np.asarray(op.T.todense() if sp.issparse(op) else op.T).ravel()
        if self.indices is not None:
            row = row[self.indices]
        return self.L.T @ row

    def samples(self, grid):
        return _ode.iterate(lambda t, v: self.L @ v, self.vec0, grid.times,
                            grid.rel_tol, grid.abs_tol)


def integrate(generator: Generator, rho0, grid: TimeGrid):
    """Yield ``(t, rho(t))`` at every grid time."""
    prop = _Propagation(generator, rho0)
    return ((t, prop.expand(v)) for t, v in prop.samples(grid))


def _min_eigenvalue(rho, blocks):
    if blocks is None:
        return np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    return min(np.linalg.eigvalsh(rho[np.ix_(b, b)]).min() for b in blocks)


@dataclass
class ExactRun:
    """Sampled trajectory of the exact solver."""

    params: SystemParams
    n_max: int
    records: list
    emitter_states: np.ndarray
    dn_dt: np.ndarray
    emission_flux: np.ndarray
    j2: np.ndarray
    max_trace_drift: float
    max_cutoff_population: float
    min_eigenvalue: float
    flags: list = field(default_factory=list)

    @property
    def cutoff_ok(self):
        return self.max_cutoff_population < CUTOFF_POPULATION_TOL

    @property
    def times(self):
        return np.array([r.time for r in self.records])

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])


def run_exact(params: SystemParams, initial, grid: TimeGrid, n_max=None,
              dim_limit=DEFAULT_DIM_LIMIT, auto_extend=True) -> ExactRun:
    """Integrate the master equation and collect observables at every sample.

    With the default cutoff, a run whose top Fock level gets populated above
    ``1e-6`` is repeated with four more levels while the dimension allows.
    """
    explicit = n_max is not None
    if n_max is None:
        n_max = default_cutoff(params.n_emitters, initial.initial_photons())
    while True:
        run = _run_once(params, initial, grid, n_max, dim_limit)
        if run.cutoff_ok or explicit or not auto_extend:
            break
        bigger = n_max + 4
        if 2 ** params.n_emitters * (bigger + 1) > dim_limit:
            break
        log.info("photon cutoff %d inadequate (top population %.2e); retrying with %d",
                 n_max, run.max_cutoff_population, bigger)
        n_max = bigger
    if not run.cutoff_ok:
        run.flags.append(f"photon cutoff {n_max} inadequate: top-level population "
                         f"{run.max_cutoff_population:.2e}")
    return run


def _run_once(params, initial, grid, n_max, dim_limit):
    n = params.n_emitters
    gen = build_generator(params, n_max, dim_limit)
    prop = _Propagation(gen, initial_density_matrix(initial, n, n_max))
    j2_q = collective_operators(n).j2
    dn_row = prop.rate_functional(gen.num)
    if prop.indices is not None:
        exc = gen.excitations()
        blocks = [np.flatnonzero(exc == e) for e in np.unique(exc)]
    else:
        blocks = None

    records, states, dn_dt, flux, j2 = [], [], [], [], []
    drift = top = 0.0
    min_eig = np.inf
    for t, v in prop.samples(grid):
        rho = prop.expand(v)
        drift = max(drift, abs(np.trace(rho) - 1.0))
        rec = observables(rho, n, t)
        rho_q = reduce_to_emitters(rho, n)
        top = max(top, photon_distribution(rho, n)[-1])
        min_eig = min(min_eig, _min_eigenvalue(rho, blocks))
        records.append(rec)
        states.append(rho_q)
        dn_dt.append(float(np.real(dn_row @ v)))
        flux.append(-2.0 * params.coupling_g * np.imag(np.sum(gen.jp_a.multiply(rho.T))))
        j2.append(np.real(np.sum(j2_q.multiply(rho_q.T))))

    run = ExactRun(params=params, n_max=n_max, records=records,
                   emitter_states=np.array(states), dn_dt=np.array(dn_dt),
                   emission_flux=np.array(flux), j2=np.array(j2),
                   max_trace_drift=float(drift), max_cutoff_population=float(top),
                   min_eigenvalue=float(min_eig))
    if drift > TRACE_TOL:
        run.flags.append(f"trace drift {drift:.2e} exceeds {TRACE_TOL}")
    if min_eig < -POSITIVITY_TOL:
        run.flags.append(f"negative eigenvalue {min_eig:.2e} below -{POSITIVITY_TOL}")
    return run
