"""Doublet-level cluster-expansion equations of motion for large N.

Variables per emitter / per pair: inversion ``s_z = <sz>``, photon number
``n``, pair correlations ``C0 = <sp_i sm_j>`` and ``C_zz = <sz_i sz_j>``.
The photon-assisted polarizations are adiabatically eliminated with the
linewidth ``kappa + gamma + 2 gamma_phi``, which produces the Purcell rate
``I0`` in front of every emission term:

    dn/dt    = I0 [N n s_z + N (1+s_z)/2 + N(N-1) C0] - kappa n
    ds_z/dt  = -gamma (1+s_z) - (2/N) I0 [N n s_z + N (1+s_z)/2 + N(N-1) C0]
    dC0/dt   = -(gamma + 2 gamma_phi) C0 + I0' B
    dC_zz/dt = -2 gamma (s_z + C_zz) - 4 I0' B

    B   = (s_z + C_zz)/2 + n C_zz - (1 + 2n) C0 + (N-2) s_z C0 - (2 gamma / w) E
    E   = n s_z + (1 + s_z)/2 + (N-1) C0
    I0' = 4 g^2 / (w + 2 gamma),   w = kappa + gamma + 2 gamma_phi

``B`` comes from eliminating ``<sp_i a sz_j>``, which decays at ``(w + 2 gamma)/2``
because ``sz_j`` relaxes at ``gamma``; that relaxation also feeds
``-gamma <sp_i a>`` into it, giving the ``E`` term.  Three-emitter averages are
factorized as ``<sp_k sz_i sm_j> ~ s_z C0`` and photon-spin-spin averages as
``<sz_i sz_j a^dag a> ~ C_zz n``.  Everything stays real at zero detuning.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _ode
from .dicke import JMLabel, c0_of_jm, czz_of_jm
from .errors import ParameterError
from .model import (DickeState, FullyInverted, FullySeparableHalfInverted,
                    PhotonFock, SystemParams, TimeGrid, single_emitter_rate)

CLUSTER_REL_TOL = 1e-9
CLUSTER_ABS_TOL = 1e-12


@dataclass(frozen=True)
class ClusterState:
    s_z: float
    n: float
    c0: complex
    c_zz: float

    def as_array(self):
        return np.array([self.s_z, self.n, np.real(self.c0), self.c_zz])

    @classmethod
    def from_array(cls, y):
        return cls(float(y[0]), float(max(y[1], 0.0) if y[1] > -1e-9 else y[1]),
                   complex(y[2]), float(y[3]))


@dataclass(frozen=True)
class EmissionRates:
    gamma_se: float
    gamma_ste: float
    gamma_ce: float
    cavity_loss: float

    @property
    def gamma_tot(self):
        return self.gamma_se + self.gamma_ste + self.gamma_ce


def _rate_terms(s_z, n, c0, n_emitters, i0):
    N = n_emitters
    return (i0 * N / 2 * (1 + s_z), i0 * N * n * s_z, i0 * N * (N - 1) * np.real(c0))


def rates(state: ClusterState, params: SystemParams) -> EmissionRates:
    """Spontaneous, stimulated and correlated emission rates plus cavity loss."""
    i0 = single_emitter_rate(params)
    se, ste, ce = _rate_terms(state.s_z, state.n, state.c0, params.n_emitters, i0)
    return EmissionRates(float(se), float(ste), float(ce),
                         params.cavity_loss_kappa * state.n)


def _rhs(y, N, i0, kappa, gamma, gamma_phi, correlations_on):
    s_z, n, c0, czz = y
    if not correlations_on:
        c0, czz = 0.0, s_z * s_z
    per_emitter = n * s_z + (1 + s_z) / 2 + (N - 1) * c0
    emission = i0 * N * per_emitter
    dn = emission - kappa * n
    ds = -gamma * (1 + s_z) - 2 * emission / N
    if not correlations_on:
        return np.array([ds, dn, 0.0, 2 * s_z * ds])
    width = kappa + gamma + 2 * gamma_phi
    i0_pair = i0 * width / (width + 2 * gamma)
    b = ((s_z + czz) / 2 + n * czz - (1 + 2 * n) * c0 + (N - 2) * s_z * c0
         - 2 * gamma / width * per_emitter)
    dc0 = -(gamma + 2 * gamma_phi) * c0 + i0_pair * b
    dczz = -2 * gamma * (s_z + czz) - 4 * i0_pair * b
    return np.array([ds, dn, dc0, dczz])


def derivative(state: ClusterState, params: SystemParams,
               correlations_on: bool = True) -> ClusterState:
    """Time derivative of the cluster variables.

    With ``correlations_on=False`` the pair correlation ``C0`` is held at
    zero; ``C_zz`` then follows ``s_z**2`` exactly.
    """
    if params.detuning_delta != 0:
        raise ParameterError("the cluster solver requires zero detuning")
    if not params.weak_coupling():
        warnings.warn("cluster expansion used outside the weak-coupling regime", stacklevel=2)
    d = _rhs(state.as_array(), params.n_emitters, single_emitter_rate(params),
             params.cavity_loss_kappa, params.emitter_decay_gamma,
             params.pure_dephasing_gamma_phi, correlations_on)
    return ClusterState(float(d[0]), float(d[1]), complex(d[2]), float(d[3]))


def initial_cluster_state(initial, n_emitters, correlations_on=True) -> ClusterState:
    """Map an initial condition to cluster variables.

    Without correlations the pair averages are factorized: ``C0 = 0`` and
    ``C_zz = s_z**2``.
    """
    problems = initial.check(n_emitters)
    if problems:
        raise ParameterError(problems)
    N = n_emitters
    if isinstance(initial, FullyInverted):
        state = ClusterState(1.0, 0.0, 0j, 1.0)
    elif isinstance(initial, FullySeparableHalfInverted):
        state = ClusterState(0.0, 0.0, 0j, 0.0)
    elif isinstance(initial, DickeState):
        s_z = 2 * initial.k / N - 1
        if N >= 2:
            label = JMLabel(N, N, 2 * initial.k - N)
            state = ClusterState(s_z, 0.0, complex(c0_of_jm(label)), czz_of_jm(label))
        else:
            state = ClusterState(s_z, 0.0, 0j, s_z ** 2)
    elif isinstance(initial, PhotonFock):
        raise ParameterError("photon Fock initial states belong to the exact solver "
                             "(strong coupling); the cluster solver does not support them")
    else:
        raise ParameterError(f"unsupported initial condition {initial!r}")
    if not correlations_on:
        state = ClusterState(state.s_z, state.n, 0j, state.s_z ** 2)
    return state


@dataclass
class ClusterRun:
    params: SystemParams
    correlations_on: bool
    times: np.ndarray
    states: list
    rates: list

    def column(self, name):
        if name in ("gamma_se", "gamma_ste", "gamma_ce", "gamma_tot", "cavity_loss"):
            return np.array([getattr(r, name) for r in self.rates])
        return np.array([getattr(s, name) for s in self.states])

    def derivatives(self):
        return [derivative(s, self.params, self.correlations_on) for s in self.states]


def run(params: SystemParams, initial, grid: TimeGrid, correlations_on=True,
        rel_tol=CLUSTER_REL_TOL, abs_tol=CLUSTER_ABS_TOL) -> ClusterRun:
    """Integrate the cluster equations and evaluate the rates at every sample."""
    if params.detuning_delta != 0:
        raise ParameterError("the cluster solver requires zero detuning")
    if not params.weak_coupling():
        warnings.warn(
            f"cluster expansion outside the weak-coupling regime "
            f"(g^2/(gamma+kappa) = {params.coupling_ratio():.3g})", stacklevel=2)
    y0 = initial_cluster_state(initial, params.n_emitters, correlations_on).as_array()
    args = (params.n_emitters, single_emitter_rate(params), params.cavity_loss_kappa,
            params.emitter_decay_gamma, params.pure_dephasing_gamma_phi, correlations_on)
    times = grid.times
    ys = _ode.integrate(lambda t, y: _rhs(y, *args), y0, times, rel_tol, abs_tol)
    states = [ClusterState.from_array(y) for y in ys]
    return ClusterRun(params, correlations_on, times, states,
                      [rates(s, params) for s in states])


def max_se_rate_scaling(n_list, params: SystemParams, initial=None, grid=None,
                        correlations_on=True):
    """Least-squares slope of ``log max_t(G_SE + G_CE)`` against ``log N``.

    Returns ``(exponent, peaks)`` where ``peaks`` holds the maxima per ``N``.
    """
    n_list = sorted(set(int(n) for n in n_list))
    if len(n_list) < 3:
        raise ParameterError("scaling fit needs at least three emitter numbers")
    initial = initial or FullyInverted()
    grid = grid or TimeGrid(t_end=4.0, n_samples=801)
    peaks = []
    for N in n_list:
        r = run(params.replace(n_emitters=N), initial, grid, correlations_on)
        se_ce = r.column("gamma_se") + r.column("gamma_ce")
        peaks.append(float(se_ce.max()))
    slope = np.polyfit(np.log(n_list), np.log(peaks), 1)[0]
    return float(slope), dict(zip(n_list, peaks))
