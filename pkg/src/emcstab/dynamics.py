"""Fixed-step integrators and conservation bookkeeping.

Two methods: classical fourth-order Runge-Kutta and the implicit midpoint
rule (stages solved to 1e-12).  Steps are never adapted and conserved
quantities are never projected; drift is measured and reported instead so
that the empirical stability checks can budget for it honestly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, DimensionMismatchError, StepFailureError
from .phase import PhaseSpaceSystem, hamiltonian_vector_field

METHODS = ("rk4", "implicit_midpoint")
BLOW_UP_NORM = 1e8
_STAGE_TOL = 1e-12


@dataclass
class Trajectory:
    """Sampled solution: ``states[k]`` is the state at ``times[k]``."""

    times: np.ndarray
    states: np.ndarray
    method: str
    step: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape[0] != self.times.shape[0]:
            raise DimensionMismatchError(
                "trajectory length", self.times.shape[0], self.states.shape[0]
            )
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must increase")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            n = self.states.shape[1]
            writer.writerow(["t"] + [f"z{i + 1}" for i in range(n)])
            for t, z in zip(self.times, self.states):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in z])


def _field_for(sys: PhaseSpaceSystem):
    if sys.vector_field is not None and sys.batch_arrays:
        return sys.vector_field
    return lambda z: hamiltonian_vector_field(sys, z)


def _rk4_step(field, z, h):
    k1 = field(z)
    k2 = field(z + 0.5 * h * k1)
    k3 = field(z + 0.5 * h * k2)
    k4 = field(z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _midpoint_step(field, z, h):
    # solve for the midpoint state w with w = z + (h/2) field(w)
    w = z + 0.5 * h * field(z)
    for _ in range(100):
        w_next = z + 0.5 * h * field(w)
        if np.max(np.abs(w_next - w)) <= _STAGE_TOL * max(1.0, float(np.max(np.abs(w_next)))):
            return 2.0 * w_next - z
        w = w_next
    # Newton fallback for the stage equation, finite-differenced
    w = np.atleast_1d(w)
    flat = w.ndim == 1
    if not flat:
        raise StepFailureError("midpoint stage did not converge for batched states")
    n = w.size
    for _ in range(50):
        g = w - z - 0.5 * h * field(w)
        if np.max(np.abs(g)) <= _STAGE_TOL * max(1.0, float(np.max(np.abs(w)))):
            return 2.0 * w - z
        jac = np.eye(n)
        eps = 1e-7
        for i in range(n):
            wp = w.copy()
            wp[i] += eps
            jac[:, i] = (wp - z - 0.5 * h * field(wp) - g) / eps
        w = w - np.linalg.solve(jac, g)
    raise StepFailureError("midpoint stage did not converge")


def _stepper(method: str):
    if method == "rk4":
        return _rk4_step
    if method == "implicit_midpoint":
        return _midpoint_step
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def integrate(
    sys: PhaseSpaceSystem, z0, t_final: float, step: float, method: str = "rk4"
) -> Trajectory:
    """Integrate from ``z0`` for ``t_final`` with a fixed step.

    The horizon is rounded to a whole number of steps.  Raises on state
    blow-up with the time it happened.
    """
    z0 = sys.point(z0)
    times, states = _run(sys, z0, t_final, step, method)
    return Trajectory(times=times, states=states, method=method, step=step)


def integrate_batch(
    sys: PhaseSpaceSystem, z0_batch, t_final: float, step: float, method: str = "rk4"
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate a stack of initial states; returns (times, states).

    ``states`` has shape ``(n_times, n_samples, n)``.  Vectorised when the
    system evaluates on stacked arrays, otherwise runs sample by sample.
    """
    z0_batch = np.atleast_2d(np.asarray(z0_batch, dtype=float))
    if sys.batch_arrays and sys.vector_field is not None:
        times, states = _run(sys, z0_batch, t_final, step, method)
        return times, states
    runs = [integrate(sys, z, t_final, step, method) for z in z0_batch]
    times = runs[0].times
    return times, np.stack([r.states for r in runs], axis=1)


def _run(sys, z0, t_final, step, method):
    if step <= 0 or t_final <= 0:
        raise ValueError("step and horizon must be positive")
    stepper = _stepper(method)
    field = _field_for(sys)
    n_steps = max(1, int(round(t_final / step)))
    times = step * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1,) + np.shape(z0))
    states[0] = z0
    z = np.array(z0, dtype=float)
    for k in range(1, n_steps + 1):
        z = stepper(field, z, step)
        norm = float(np.max(np.abs(z)))
        if not np.isfinite(norm) or norm > BLOW_UP_NORM:
            raise BlowUpError(time=float(times[k]), norm=norm)
        states[k] = z
    return times, states


@dataclass
class DriftReport:
    """Worst-case deviation of the conserved quantities from their start."""

    energy: float
    momentum: float
    conserved: float

    def worst(self) -> float:
        return max(self.energy, self.momentum, self.conserved)


def conservation_drift(sys: PhaseSpaceSystem, traj: Trajectory | np.ndarray) -> DriftReport:
    """Maximum drift of energy, momentum (dual norm) and conserved functions."""
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    if sys.batch_arrays:
        h = np.asarray(sys.hamiltonian(states), dtype=float)
        j = np.asarray(sys.momentum_map(states), dtype=float)
        c = np.asarray(sys.casimirs(states), dtype=float)
    else:
        h = np.array([sys.hamiltonian(z) for z in states])
        j = np.array([np.atleast_1d(sys.momentum_map(z)) for z in states])
        c = np.array([np.atleast_1d(sys.casimirs(z)) for z in states])
    d_energy = float(np.max(np.abs(h - h[0])))
    if sys.group.dim:
        dj = j - j[0]
        w_inv = sys.group._w_inv
        d_mom = float(np.sqrt(np.max(np.einsum("ti,ij,tj->t", dj, w_inv, dj))))
    else:
        d_mom = 0.0
    if sys.dim_conserved:
        dc = c - c[0]
        w = sys.inner_product_conserved
        d_cas = float(np.sqrt(np.max(np.einsum("ti,ij,tj->t", dc, w, dc))))
    else:
        d_cas = 0.0
    return DriftReport(energy=d_energy, momentum=d_mom, conserved=d_cas)
