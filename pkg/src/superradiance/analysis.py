"""Entanglement and state-structure analysis on solver output.

The structure-factor witness only needs the pair correlations ``C0`` and
``C_zz``, so it applies equally to cluster-expansion and exact trajectories.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dicke import (JMLabel, all_labels, c0_of_jm, czz_of_jm, multiplicity,
                    permutation_operator, projector)
from .errors import ParameterError
from .model import PhotonFock, SystemParams, TimeGrid

log = logging.getLogger(__name__)

NEUTRAL_TOL = 1e-12
SYMMETRY_TOL = 1e-6


def witness(c0, c_zz):
    """``<W> = 1 - 4 Re[C0] + C_zz``; works elementwise on arrays."""
    return 1.0 - 4.0 * np.real(c0) + c_zz


def witness_minimum(n_emitters: int) -> float:
    """Smallest value the witness can take, reached by ``|D_{N,N/2}>``."""
    return -2.0 / (n_emitters - 1)


def refined_minimum(times, values) -> tuple[float, float]:
    """Minimum of a sampled curve with a parabola through the lowest sample and its neighbours."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    i = int(np.argmin(values))
    if 0 < i < len(values) - 1:
        x, y = times[i - 1:i + 2], values[i - 1:i + 2]
        a, b, c = np.polyfit(x - x[1], y, 2)
        if a > 0:
            dx = -b / (2 * a)
            if x[0] - x[1] <= dx <= x[2] - x[1]:
                return float(c - b * b / (4 * a)), float(x[1] + dx)
    return float(values[i]), float(times[i])


@dataclass(frozen=True)
class WitnessTrace:
    times: np.ndarray
    values: np.ndarray
    min_value: float
    min_time: float

    @property
    def detected(self) -> bool:
        return bool(np.any(self.values < 0) or self.min_value < 0)

    @classmethod
    def from_correlations(cls, times, c0, c_zz) -> "WitnessTrace":
        values = witness(np.asarray(c0), np.asarray(c_zz, dtype=float))
        vmin, tmin = refined_minimum(times, values)
        return cls(np.asarray(times, dtype=float), values, vmin, tmin)


# --- (j, m) decomposition -------------------------------------------------------

@dataclass(frozen=True)
class JMComponent:
    label: JMLabel
    weight: float
    multiplicity: int

    @property
    def classification(self) -> str:
        if self.label.n < 2:
            return "neutral"
        c0 = c0_of_jm(self.label)
        if abs(c0) < NEUTRAL_TOL:
            return "neutral"
        return "superradiant" if c0 > 0 else "subradiant"


def _is_symmetric(rho_q, n):
    for i in range(n - 1):
        perm = list(range(n))
        perm[i], perm[i + 1] = i + 1, i
        P = permutation_operator(n, perm)
        if np.abs(P @ rho_q @ P.T - rho_q).max() > SYMMETRY_TOL:
            return False
    return True


def decompose(rho_q, n_emitters=None) -> list[JMComponent]:
    """Weights ``p_jm = d_jm Tr[rho_q rho_jm] = Tr[rho_q P_jm]`` for every sector.

    Warns if ``rho_q`` is not invariant under emitter exchange, since the
    weights then do not reconstruct the state.
    """
    dim = rho_q.shape[0]
    n = n_emitters or int(round(np.log2(dim)))
    if rho_q.shape != (2 ** n, 2 ** n):
        raise ParameterError(f"state of shape {rho_q.shape} does not match N={n} emitters")
    if n > 1 and not _is_symmetric(rho_q, n):
        warnings.warn("emitter state is not permutation symmetric", stacklevel=2)
    out = []
    for label in all_labels(n):
        weight = float(np.real(np.sum(projector(label) * rho_q.T)))
        out.append(JMComponent(label, weight, multiplicity(label, n)))
    return out


def reconstructed_moments(components) -> tuple[float, float]:
    """``(sum p C0(j,m), sum p C_zz(j,m))``; equals the state's own pair averages."""
    c0 = sum(c.weight * c0_of_jm(c.label) for c in components)
    czz = sum(c.weight * czz_of_jm(c.label) for c in components)
    return c0, czz


def radiance_split(components) -> tuple[float, float]:
    """Superradiant (``C0(j,m) > 0``) and subradiant (``C0(j,m) < 0``) parts of ``C0``."""
    sup = sub = 0.0
    for comp in components:
        kind = comp.classification
        if kind == "superradiant":
            sup += comp.weight * c0_of_jm(comp.label)
        elif kind == "subradiant":
            sub += comp.weight * c0_of_jm(comp.label)
    return sup, sub


def block_uniform_purity(components) -> float:
    """``sum p^2 / d``: purity of the block-uniform state with the same weights."""
    return sum(c.weight ** 2 / c.multiplicity for c in components)


# --- gamma threshold for Fock-state Dicke preparation -------------------------------

FOCK_KAPPA_OVER_G = 0.1
FOCK_GRID = TimeGrid(t_end=10.0, n_samples=401)


def min_witness(params: SystemParams, grid: TimeGrid = FOCK_GRID, n_photons=None) -> float:
    """``min_t <W>`` after starting from ``N/2`` cavity photons and ground-state emitters."""
    from .lindblad import run_exact

    n = params.n_emitters
    n_photons = n // 2 if n_photons is None else n_photons
    run = run_exact(params, PhotonFock(n_photons), grid)
    trace = WitnessTrace.from_correlations(run.times, run.column("c0"), run.column("czz"))
    return trace.min_value


def _min_witness_at(args):
    params, gamma, grid = args
    return min_witness(params.replace(emitter_decay_gamma=gamma), grid)


@dataclass(frozen=True)
class ThresholdResult:
    n_emitters: int
    critical_gamma: float
    gammas: np.ndarray
    min_witness: np.ndarray
    monotone: bool


def threshold_sweep(params_base: SystemParams, n_emitters: int, gamma_range,
                    grid: TimeGrid = FOCK_GRID, resolution=0.01, jobs=1) -> ThresholdResult:
    """Emitter decay rate at which ``min_t <W>`` turns from negative to positive.

    ``gamma_range`` is a sequence of sample points (in units of ``g``) that
    must bracket the sign change; the bracketing interval is then bisected
    down to ``resolution``.
    """
    gammas = np.asarray(sorted(gamma_range), dtype=float)
    if len(gammas) < 2:
        raise ParameterError("gamma range needs at least two points")
    params = params_base.replace(n_emitters=n_emitters)
    tasks = [(params, g, grid) for g in gammas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            values = np.array(list(pool.map(_min_witness_at, tasks)))
    else:
        values = np.array([_min_witness_at(t) for t in tasks])
    monotone = bool(np.all(np.diff(values) >= -1e-9))
    if not monotone:
        log.warning("min <W> is not monotone in gamma for N=%d", n_emitters)

    crossing = np.flatnonzero((values[:-1] < 0) & (values[1:] >= 0))
    if len(crossing) == 0:
        raise ParameterError(
            f"min <W> has no sign change on gamma/g in [{gammas[0]}, {gammas[-1]}] for N={n_emitters}")
    i = crossing[0]
    lo, hi = gammas[i], gammas[i + 1]
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if _min_witness_at((params, mid, grid)) < 0:
            lo = mid
        else:
            hi = mid
    return ThresholdResult(n_emitters, 0.5 * (lo + hi), gammas, values, monotone)
