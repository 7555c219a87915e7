"""Thin wrappers over scipy's embedded Runge-Kutta integrators."""
import numpy as np
from scipy.integrate import DOP853, RK45

from .errors import IntegrationError

_METHODS = {"DOP853": DOP853, "RK45": RK45}


def iterate(rhs, y0, times, rel_tol, abs_tol, method="DOP853"):
    """Yield ``(t, y(t))`` for every sample time, keeping only one state in memory.

    The stepper lands exactly on each sample time; the continuous extension
    is not used because its error is not controlled by the tolerances.
    The last accepted step size carries over between samples.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    y0 = np.asarray(y0)
    shape = y0.shape

    def flat_rhs(t, y):
        return np.ravel(rhs(t, y.reshape(shape)))

    y = y0.ravel().copy()
    yield times[0], y.reshape(shape)
    step = None
    for t0, t1 in zip(times[:-1], times[1:]):
        solver = _METHODS[method](flat_rhs, t0, y, t1, rtol=rel_tol, atol=abs_tol,
                                  first_step=None if step is None else min(step, t1 - t0))
        while solver.status == "running":
            message = solver.step()
            if solver.status == "failed":
                raise IntegrationError(message or "integration step failed")
            if solver.status == "running" or step is None:
                step = solver.step_size
        y = solver.y
        if not np.all(np.isfinite(y)):
            raise IntegrationError("non-finite values in the integrated state")
        yield t1, y.reshape(shape)


def integrate(rhs, y0, times, rel_tol, abs_tol, method="DOP853"):
    """Stacked samples, shape ``(len(times),) + y0.shape``."""
    return np.array([y for _, y in iterate(rhs, y0, times, rel_tol, abs_tol, method)])
