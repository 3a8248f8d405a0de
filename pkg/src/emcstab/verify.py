"""Empirical corroboration of certificates.

A certificate asserts stability relative to the momentum-isotropy group, so
the empirical protocol measures distance to that group's orbit, evaluates
the certified monitor function f along integrated trajectories, and checks
it against the conserved-quantity bound that makes f a trajectory invariant
up to integrator drift.  The experiment never proves anything; it reports
"consistent with" or a concrete escape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import emc, lie
from .dynamics import integrate_batch
from .errors import BlowUpError, OutOfNeighborhoodError
from .phase import PhaseSpaceSystem
from .releq import RelativeEquilibrium

DEFAULT_DELTAS = (1e-4, 1e-3, 1e-2)
ESCAPE_RADIUS = 0.5
_SMALL_DELTA = 1e-2  # escapes above this perturbation size do not count
_MONITOR_TARGET = 2000  # strided-monitoring budget when no fast path exists
_ORBIT_SAMPLES = 256


def orbit_distance(sys: PhaseSpaceSystem, z, re: RelativeEquilibrium, gmu=None) -> float:
    """Distance from z to the momentum-isotropy orbit through the equilibrium.

    Falls back to the distance to the equilibrium point itself (always an
    upper bound, the orbit passes through it) if the projection stalls.
    """
    if gmu is None:
        gmu = lie.momentum_isotropy_algebra(sys.group, re.mu)
    fit = emc.nearest_orbit_point(sys, re.z_e, gmu, z)
    fallback = float(np.linalg.norm(sys.point(z) - sys.point(re.z_e)))
    if not fit.locally_minimal:
        return min(fit.distance, fallback)
    return fit.distance


def ls3_bound(
    sys: PhaseSpaceSystem,
    re: RelativeEquilibrium,
    certificate: emc.EmcCertificate,
    z0,
) -> float:
    """Conserved upper bound for f along the trajectory from z0.

    Every term is built from constants of motion evaluated at z0, so the
    bound is itself constant and valid for either sign branch and any
    penalty weight.
    """
    z0 = sys.point(z0)
    z_e = sys.point(re.z_e)
    lam = np.asarray(certificate.lam, dtype=float)
    xi = lie.AlgebraElement(sys.group, np.asarray(certificate.xi_used, dtype=float))
    sigma = 1.0 if certificate.sigma is None else float(certificate.sigma)

    bound = abs(float(sys.hamiltonian(z0)) - float(sys.hamiltonian(z_e)))
    f2 = 0.0
    if sys.group.dim:
        dj = np.atleast_1d(sys.momentum_map(z0)) - re.mu.coeffs
        dj_norm = lie.dual_norm(lie.DualElement(sys.group, dj))
        bound += dj_norm * lie.algebra_norm(xi)
        f2 += float(dj @ sys.group._w_inv @ dj)
    if sys.dim_conserved:
        dc = np.atleast_1d(sys.casimirs(z0)) - np.atleast_1d(sys.casimirs(z_e))
        bound += abs(float(dc @ lam))
        f2 += float(dc @ sys.inner_product_conserved @ dc)
    return bound + sigma * f2


@dataclass
class StabilityExperimentReport:
    """Aggregated outcome of randomized perturbation runs."""

    system: str
    certificate_verdict: str
    deltas: list
    samples_per_delta: int
    t_final: float
    step: float
    method: str
    escape_radius: float
    seed: int
    monitor_stride: int
    distance_monitor: str
    max_orbit_distance: list
    max_f: list
    violations: int
    blow_ups: int
    degraded_distance_points: int
    verdict: str
    samples: list = field(default_factory=list)
    # per-sample monitored arrays for CSV export; deliberately kept out of
    # the JSON document (bulk data, not part of the report schema)
    series: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if any(d < 0 for d in self.max_orbit_distance):
            raise ValueError("orbit distances must be nonnegative")
        if self.violations < 0:
            raise ValueError("violation count must be nonnegative")

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "stability_experiment",
            "system": self.system,
            "certificate_verdict": self.certificate_verdict,
            "deltas": [float(d) for d in self.deltas],
            "samples_per_delta": int(self.samples_per_delta),
            "t_final": float(self.t_final),
            "step": float(self.step),
            "method": self.method,
            "escape_radius": float(self.escape_radius),
            "seed": int(self.seed),
            "monitor_stride": int(self.monitor_stride),
            "distance_monitor": self.distance_monitor,
            "max_orbit_distance": [float(v) for v in self.max_orbit_distance],
            "max_f": [None if v is None else float(v) for v in self.max_f],
            "violations": int(self.violations),
            "blow_ups": int(self.blow_ups),
            "degraded_distance_points": int(self.degraded_distance_points),
            "verdict": self.verdict,
            "samples": self.samples,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "StabilityExperimentReport":
        keys = [
            "system", "certificate_verdict", "deltas", "samples_per_delta",
            "t_final", "step", "method", "escape_radius", "seed",
            "monitor_stride", "distance_monitor", "max_orbit_distance",
            "max_f", "violations", "blow_ups", "degraded_distance_points",
            "verdict", "samples",
        ]
        return cls(**{k: doc[k] for k in keys})


# ---------------------------------------------------------------------------
# fast monitoring paths


def _is_abelian_with(group: lie.LieGroupSpec, gmu, xi_coeffs) -> bool:
    """True when the transported generator is constant: the isotropy algebra
    commutes and the generator lies inside it."""
    if not gmu:
        return True
    q = np.column_stack([z.coeffs for z in gmu])
    for za in gmu:
        for zb in gmu:
            if lie.algebra_norm(lie.bracket(za, zb)) > 1e-12:
                return False
    resid = xi_coeffs - q @ np.linalg.lstsq(q, xi_coeffs, rcond=None)[0]
    if np.linalg.norm(resid) > 1e-10 * max(1.0, np.linalg.norm(xi_coeffs)):
        return False
    return True


def _batch_f(sys, re, certificate, states):
    """Vectorized (f, f1, f2) over a (..., n) stack, valid when the
    transported generator is constant."""
    lam = np.asarray(certificate.lam, dtype=float)
    xi = np.asarray(certificate.xi_used, dtype=float)
    sigma = 1.0 if certificate.sigma is None else float(certificate.sigma)
    sign = -1.0 if certificate.sign_branch == "negative" else 1.0
    z_e = sys.point(re.z_e)

    h = np.asarray(sys.hamiltonian(states), dtype=float)
    f1 = h - float(sys.hamiltonian(z_e))
    f2 = np.zeros_like(f1)
    if sys.group.dim:
        j = np.asarray(sys.momentum_map(states), dtype=float)
        f1 = f1 - (j - re.mu.coeffs) @ xi
        dj = j - re.mu.coeffs
        f2 = f2 + np.einsum("...i,ij,...j->...", dj, sys.group._w_inv, dj)
    if sys.dim_conserved:
        c = np.asarray(sys.casimirs(states), dtype=float)
        c_e = np.atleast_1d(sys.casimirs(z_e))
        f1 = f1 + (c - c_e) @ lam
        dc = c - c_e
        f2 = f2 + np.einsum("...i,ij,...j->...", dc, sys.inner_product_conserved, dc)
    return sign * f1 + sigma * f2, f1, f2


def _orbit_curve(sys, z_e, zeta, n_theta=_ORBIT_SAMPLES):
    thetas = np.linspace(-np.pi, np.pi, n_theta, endpoint=False)
    return np.stack(
        [
            sys.action(lie.exponential(lie.AlgebraElement(sys.group, t * zeta.coeffs)), z_e)
            for t in thetas
        ]
    )


def _batch_distance_to_curve(states, curve):
    """Min distance from each state row to a sampled closed curve, with a
    parabolic refinement of the sampled squared-distance minimum."""
    flat = states.reshape(-1, states.shape[-1])
    d2 = (
        np.sum(flat**2, axis=1)[:, None]
        + np.sum(curve**2, axis=1)[None, :]
        - 2.0 * flat @ curve.T
    )
    idx = np.argmin(d2, axis=1)
    m = curve.shape[0]
    rows = np.arange(flat.shape[0])
    f0 = d2[rows, idx]
    fm = d2[rows, (idx - 1) % m]
    fp = d2[rows, (idx + 1) % m]
    denom = fp + fm - 2.0 * f0
    refined = f0 - np.where(denom > 1e-300, (fp - fm) ** 2 / (8.0 * np.maximum(denom, 1e-300)), 0.0)
    return np.sqrt(np.maximum(refined, 0.0)).reshape(states.shape[:-1])


# ---------------------------------------------------------------------------
# the experiment


def _unit_directions(rng, count, n):
    u = rng.standard_normal((count, n))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def _drift_slack(sys, re, certificate, states):
    """Propagate worst-case conservation drift through the terms of f,
    scaled by 10 to stay clear of benign rounding."""
    lam = np.asarray(certificate.lam, dtype=float)
    xi = lie.AlgebraElement(sys.group, np.asarray(certificate.xi_used, dtype=float))
    sigma = 1.0 if certificate.sigma is None else float(certificate.sigma)
    h = np.asarray(sys.hamiltonian(states), dtype=float)
    slack = np.max(np.abs(h - h[0]))
    if sys.group.dim:
        j = np.asarray(sys.momentum_map(states), dtype=float)
        dj = j - j[0]
        w_inv = sys.group._w_inv
        drift_j = float(np.sqrt(np.max(np.einsum("ti,ij,tj->t", dj, w_inv, dj))))
        dev0 = lie.dual_norm(lie.DualElement(sys.group, j[0] - re.mu.coeffs))
        slack += drift_j * lie.algebra_norm(xi)
        slack += sigma * (2.0 * dev0 + drift_j) * drift_j
    if sys.dim_conserved:
        c = np.asarray(sys.casimirs(states), dtype=float)
        dc = c - c[0]
        w_v = sys.inner_product_conserved
        drift_c = float(np.sqrt(np.max(np.einsum("ti,ij,tj->t", dc, w_v, dc))))
        c_e = np.atleast_1d(sys.casimirs(sys.point(re.z_e)))
        dev0 = float(np.sqrt((c[0] - c_e) @ w_v @ (c[0] - c_e)))
        slack += float(np.linalg.norm(lam)) * float(np.max(np.linalg.norm(dc, axis=-1)))
        slack += sigma * (2.0 * dev0 + drift_c) * drift_c
    return 10.0 * slack


def stability_experiment(
    sys: PhaseSpaceSystem,
    re: RelativeEquilibrium,
    certificate: emc.EmcCertificate,
    deltas=DEFAULT_DELTAS,
    samples_per_delta: int = 6,
    t_final: float = 20.0,
    step: float = 1e-3,
    method: str = "rk4",
    escape_radius: float = ESCAPE_RADIUS,
    seed: int = 0,
    monitor_stride: int | None = None,
    keep_series: bool = False,
) -> StabilityExperimentReport:
    """Randomized perturbation runs around the equilibrium.

    For each perturbation size, integrates a batch of perturbed states,
    tracks the orbit distance and the monitor function f, and counts
    violations of the conserved bound (with drift slack).  Blow-ups are
    recorded per sample and count as escapes.
    """
    deltas = [float(d) for d in deltas]
    if any(d < 0 for d in deltas):
        raise ValueError("perturbation sizes must be nonnegative")
    rng = np.random.default_rng(seed)
    z_e = sys.point(re.z_e)
    gmu = lie.momentum_isotropy_algebra(sys.group, re.mu)
    orbit = emc.orbit_tangent_basis(sys, z_e, gmu)
    point_orbit = orbit.shape[1] == 0
    xi_coeffs = np.asarray(certificate.xi_used, dtype=float)

    f_fast = sys.batch_arrays and (point_orbit or _is_abelian_with(sys.group, gmu, xi_coeffs))
    if point_orbit:
        distance_monitor = "point"
    elif len(gmu) == 1 and sys.batch_arrays:
        distance_monitor = "sampled_orbit"
    else:
        distance_monitor = "exact_strided"
    curve = _orbit_curve(sys, z_e, gmu[0]) if distance_monitor == "sampled_orbit" else None

    n_steps = max(1, int(round(t_final / step)))
    if monitor_stride is None:
        if f_fast and distance_monitor != "exact_strided":
            monitor_stride = 1
        else:
            monitor_stride = max(1, n_steps // _MONITOR_TARGET)

    per_delta_dist: list = []
    per_delta_f: list = []
    samples: list = []
    series: list = []
    violations = 0
    blow_ups = 0
    degraded = 0
    escape_small_delta = False

    for delta in deltas:
        dirs = _unit_directions(rng, samples_per_delta, sys.n)
        z0s = z_e + delta * dirs
        batch_states = None
        batch_times = None
        try:
            batch_times, batch_states = integrate_batch(sys, z0s, t_final, step, method)
        except BlowUpError:
            pass  # refine per sample below
        delta_dist = 0.0
        delta_f: float | None = None
        for s in range(samples_per_delta):
            record = {"delta": delta, "sample": s, "blow_up_time": None}
            if batch_states is not None:
                states = batch_states[::monitor_stride, s]
                times = batch_times[::monitor_stride]
            else:
                try:
                    from .dynamics import integrate

                    traj = integrate(sys, z0s[s], t_final, step, method)
                    states = traj.states[::monitor_stride]
                    times = traj.times[::monitor_stride]
                except BlowUpError as err:
                    blow_ups += 1
                    record.update(
                        blow_up_time=float(err.time),
                        escaped=True,
                        max_orbit_distance=float(10.0 * escape_radius),
                        max_f=None,
                        ls3_bound=float(ls3_bound(sys, re, certificate, z0s[s])),
                        violations=0,
                    )
                    samples.append(record)
                    delta_dist = max(delta_dist, 10.0 * escape_radius)
                    if delta <= _SMALL_DELTA:
                        escape_small_delta = True
                    continue

            if distance_monitor == "point":
                dists = np.linalg.norm(states - z_e, axis=-1)
            elif distance_monitor == "sampled_orbit":
                dists = _batch_distance_to_curve(states, curve)
            else:
                dists = []
                for z in states:
                    fit = emc.nearest_orbit_point(sys, z_e, gmu, z)
                    if not fit.locally_minimal:
                        degraded += 1
                    dists.append(
                        min(fit.distance, float(np.linalg.norm(z - z_e)))
                        if not fit.locally_minimal
                        else fit.distance
                    )
                dists = np.asarray(dists)
            max_dist = float(np.max(dists))

            if f_fast:
                f_vals, _, _ = _batch_f(sys, re, certificate, states)
                max_f = float(np.max(f_vals))
            else:
                f_list = []
                for z in states:
                    try:
                        f_val, _, _ = emc.liapunov_eval(sys, re, certificate, z, gmu=gmu)
                    except OutOfNeighborhoodError:
                        break  # trajectory left the tube; stop monitoring f
                    f_list.append(f_val)
                f_vals = np.asarray(f_list)
                max_f = float(np.max(f_vals)) if f_vals.size else None

            bound = float(ls3_bound(sys, re, certificate, z0s[s]))
            slack = _drift_slack(sys, re, certificate, states)
            n_viol = int(np.sum(np.asarray(f_vals) > bound + slack)) if max_f is not None else 0
            violations += n_viol
            escaped = max_dist > escape_radius
            if escaped and delta <= _SMALL_DELTA:
                escape_small_delta = True
            record.update(
                escaped=bool(escaped),
                max_orbit_distance=max_dist,
                max_f=max_f,
                ls3_bound=bound,
                slack=float(slack),
                violations=n_viol,
            )
            samples.append(record)
            if keep_series:
                n_f = len(np.atleast_1d(f_vals))
                series.append(
                    {
                        "delta": delta,
                        "sample": s,
                        "times": np.asarray(times),
                        "orbit_distance": np.asarray(dists),
                        "f": np.concatenate(
                            [np.atleast_1d(f_vals), np.full(len(dists) - n_f, np.nan)]
                        ),
                    }
                )
            delta_dist = max(delta_dist, max_dist)
            if max_f is not None:
                delta_f = max_f if delta_f is None else max(delta_f, max_f)
        per_delta_dist.append(delta_dist)
        per_delta_f.append(delta_f)

    if escape_small_delta:
        verdict = "escape_observed"
    elif violations == 0 and blow_ups == 0:
        verdict = "consistent_with_stable"
    else:
        verdict = "inconclusive"

    return StabilityExperimentReport(
        system=sys.name,
        certificate_verdict=certificate.verdict,
        deltas=deltas,
        samples_per_delta=samples_per_delta,
        t_final=t_final,
        step=step,
        method=method,
        escape_radius=escape_radius,
        seed=seed,
        monitor_stride=monitor_stride,
        distance_monitor=distance_monitor,
        max_orbit_distance=per_delta_dist,
        max_f=per_delta_f,
        violations=violations,
        blow_ups=blow_ups,
        degraded_distance_points=degraded,
        verdict=verdict,
        samples=samples,
        series=series,
    )
