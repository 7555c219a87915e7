"""Physical parameters, initial conditions and time grids.

All rates are measured in units of the light-matter coupling ``g``; the
helpers :meth:`SystemParams.from_ratios` and the configuration loader take
ratios ``kappa/g``, ``gamma/g`` and ``gamma_phi/g`` directly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

WEAK_COUPLING_THRESHOLD = 0.05


@dataclass(frozen=True)
class SystemParams:
    """Tavis-Cummings system with photon loss, emitter decay and dephasing.

    Parameters
    ----------
    n_emitters : int
        Number of identical two-level emitters ``N``.
    coupling_g : float
        Light-matter coupling ``g`` (hbar = 1).
    cavity_loss_kappa : float
        Photon loss rate ``kappa``.
    emitter_decay_gamma : float
        Radiative decay of each emitter into non-lasing modes.
    pure_dephasing_gamma_phi : float
        Pure dephasing rate; adds ``2 gamma_phi`` to the polarization
        linewidth.
    detuning_delta : float
        ``omega_q - omega_c``. Only the exact solver accepts a nonzero value.
    """

    n_emitters: int
    coupling_g: float = 1.0
    cavity_loss_kappa: float = 0.0
    emitter_decay_gamma: float = 0.0
    pure_dephasing_gamma_phi: float = 0.0
    detuning_delta: float = 0.0

    def __post_init__(self):
        problems = []
        n = self.n_emitters
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            problems.append(f"n_emitters must be an integer, got {n!r}")
        elif n < 1:
            problems.append(f"n_emitters must be >= 1, got {n}")
        for name in ("coupling_g", "cavity_loss_kappa", "emitter_decay_gamma",
                     "pure_dephasing_gamma_phi", "detuning_delta"):
            value = getattr(self, name)
            if not math.isfinite(value):
                problems.append(f"{name} must be finite, got {value!r}")
        if math.isfinite(self.coupling_g) and self.coupling_g <= 0:
            problems.append(f"coupling_g must be > 0, got {self.coupling_g}")
        for name in ("cavity_loss_kappa", "emitter_decay_gamma",
                     "pure_dephasing_gamma_phi"):
            value = getattr(self, name)
            if math.isfinite(value) and value < 0:
                problems.append(f"{name} must be >= 0, got {value}")
        if problems:
            raise ParameterError(problems)

    @classmethod
    def from_ratios(cls, n_emitters, kappa_over_g, gamma_over_g,
                    gamma_phi_over_g=0.0, detuning_over_g=0.0):
        """Build parameters in units where ``g = 1``."""
        return cls(n_emitters=n_emitters, coupling_g=1.0,
                   cavity_loss_kappa=float(kappa_over_g),
                   emitter_decay_gamma=float(gamma_over_g),
                   pure_dephasing_gamma_phi=float(gamma_phi_over_g),
                   detuning_delta=float(detuning_over_g))

    @property
    def polarization_linewidth(self) -> float:
        """Full decay rate ``kappa + gamma + 2 gamma_phi`` of the photon-assisted polarization."""
        return (self.cavity_loss_kappa + self.emitter_decay_gamma
                + 2.0 * self.pure_dephasing_gamma_phi)

    def coupling_ratio(self) -> float:
        """``g^2 / (gamma + kappa)``; infinite for a lossless system."""
        loss = self.emitter_decay_gamma + self.cavity_loss_kappa
        if loss == 0:
            return math.inf
        return self.coupling_g ** 2 / loss

    def weak_coupling(self, threshold: float = WEAK_COUPLING_THRESHOLD) -> bool:
        return self.coupling_ratio() < threshold

    def replace(self, **changes) -> "SystemParams":
        from dataclasses import replace
        return replace(self, **changes)


def single_emitter_rate(params: SystemParams) -> float:
    """Purcell rate ``I0 = 4 g^2 / (kappa + gamma + 2 gamma_phi)``.

    Raises
    ------
    ParameterError
        If all three dissipation rates vanish.
    """
    width = params.polarization_linewidth
    if width <= 0:
        raise ParameterError("single-emitter rate undefined: kappa + gamma + 2 gamma_phi = 0")
    return 4.0 * params.coupling_g ** 2 / width


# --- initial conditions -----------------------------------------------------

@dataclass(frozen=True)
class InitialCondition:
    """Base class; use one of the concrete variants below."""

    def check(self, n_emitters: int) -> list[str]:
        return []

    def initial_photons(self) -> int:
        return 0

    def label(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class FullyInverted(InitialCondition):
    def label(self):
        return "fi"


@dataclass(frozen=True)
class FullySeparableHalfInverted(InitialCondition):
    """Product of maximally mixed emitters, ``(|0><0| + |1><1|)/2`` each."""

    def label(self):
        return "fshi"


@dataclass(frozen=True)
class DickeState(InitialCondition):
    k: int

    def check(self, n_emitters):
        if not 0 <= self.k <= n_emitters:
            return [f"Dicke excitation count k={self.k} outside [0, {n_emitters}]"]
        return []

    def label(self):
        return f"dicke:{self.k}"


@dataclass(frozen=True)
class PhotonFock(InitialCondition):
    """``n_p`` photons in the cavity, all emitters in the ground state."""

    n_photons: int

    def check(self, n_emitters):
        if self.n_photons < 0:
            return [f"photon number must be >= 0, got {self.n_photons}"]
        return []

    def initial_photons(self):
        return self.n_photons

    def label(self):
        return f"fock:{self.n_photons}"


def parse_initial_condition(text: str, n_emitters: int | None = None) -> InitialCondition:
    """Parse ``fi``, ``fshi``, ``dicke:<k>``, ``dicke:half``, ``fock:<n>`` or ``fock:half``.

    ``half`` resolves to ``N // 2`` and needs ``n_emitters``.
    """
    name, _, arg = str(text).strip().lower().partition(":")

    def count():
        if arg == "half":
            if n_emitters is None:
                raise ParameterError(f"'{text}' needs the emitter count")
            return n_emitters // 2
        try:
            return int(arg)
        except ValueError:
            raise ParameterError(f"bad integer in initial condition '{text}'") from None

    if name in ("fi", "fully_inverted") and not arg:
        return FullyInverted()
    if name in ("fshi", "fully_separable_half_inverted") and not arg:
        return FullySeparableHalfInverted()
    if name == "dicke":
        return DickeState(count())
    if name == "fock":
        return PhotonFock(count())
    raise ParameterError(f"unknown initial condition '{text}'")


# --- time grid ----------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid on ``[0, t_end]`` in units of ``1/g``."""

    t_end: float
    n_samples: int = 401
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10

    def __post_init__(self):
        problems = []
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            problems.append(f"t_end must be > 0, got {self.t_end}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            problems.append(f"n_samples must be an integer >= 2, got {self.n_samples}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            problems.append("integrator tolerances must be > 0")
        if problems:
            raise ParameterError(problems)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, int(self.n_samples))


# --- validation ---------------------------------------------------------------

SOLVERS = ("exact", "cluster", "both")


@dataclass(frozen=True)
class ValidatedConfig:
    params: SystemParams
    initial: InitialCondition
    grid: TimeGrid
    solver: str
    weak_coupling: bool
    warnings: tuple[str, ...] = field(default=())


def validate(params, initial, grid, solver="cluster",
             weak_threshold=WEAK_COUPLING_THRESHOLD) -> ValidatedConfig:
    """Check a full run configuration.

    Fatal problems raise :class:`ParameterError` listing every problem found.
    Using the cluster solver outside the weak-coupling regime only warns.
    """
    problems = []
    if not isinstance(params, SystemParams):
        problems.append("params must be a SystemParams")
    if not isinstance(initial, InitialCondition):
        problems.append("initial condition must be an InitialCondition")
    if not isinstance(grid, TimeGrid):
        problems.append("grid must be a TimeGrid")
    if solver not in SOLVERS:
        problems.append(f"solver must be one of {SOLVERS}, got {solver!r}")
    if problems:
        raise ParameterError(problems)

    problems.extend(initial.check(params.n_emitters))
    if solver in ("cluster", "both"):
        if isinstance(initial, PhotonFock):
            problems.append("the cluster solver does not support photon Fock initial states")
        if params.detuning_delta != 0:
            problems.append("the cluster solver requires zero detuning")
        if params.polarization_linewidth <= 0:
            problems.append("the cluster solver needs kappa + gamma + 2 gamma_phi > 0")
    if problems:
        raise ParameterError(problems)

    weak = params.weak_coupling(weak_threshold)
    notes = []
    if solver in ("cluster", "both") and not weak:
        notes.append(
            f"cluster solver outside weak coupling: g^2/(gamma+kappa) = "
            f"{params.coupling_ratio():.3g} >= {weak_threshold}")
        for note in notes:
            warnings.warn(note, stacklevel=2)
    return ValidatedConfig(params, initial, grid, solver, weak, tuple(notes))
