"""Catalog of built-in example systems.

Each entry bundles a parameter schema, a builder producing a fully wired
``PhaseSpaceSystem`` (analytic derivatives included, all evaluation maps
accepting stacked arrays), and a list of known equilibrium seeds.  Units are
desk scale throughout; nothing here is stiff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import lie
from .errors import ParameterError, UnknownSystemError
from .phase import PhaseSpaceSystem


def _hat(v: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def _rot_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _block_diag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[: a.shape[0], : a.shape[1]] = a
    out[a.shape[0] :, a.shape[1] :] = b
    return out


@dataclass(frozen=True)
class ParamSpec:
    default: tuple | float
    size: int = 1
    low: float | None = None
    high: float | None = None
    help: str = ""


@dataclass(frozen=True)
class EquilibriumSeed:
    label: str
    z: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    description: str
    params: dict
    build: Callable[[dict], PhaseSpaceSystem]
    equilibria: Callable[[dict], list]


def _resolve_params(entry: CatalogEntry, params: dict | None) -> dict:
    params = dict(params or {})
    resolved = {}
    for key, spec in entry.params.items():
        value = params.pop(key, spec.default)
        arr = np.atleast_1d(np.asarray(value, dtype=float))
        if arr.size != spec.size:
            raise ParameterError(
                f"{entry.name}: parameter {key!r} needs {spec.size} value(s), got {arr.size}"
            )
        for v in arr:
            if spec.low is not None and v <= spec.low:
                raise ParameterError(
                    f"{entry.name}: parameter {key!r} must be > {spec.low}, got {v}"
                )
            if spec.high is not None and v >= spec.high:
                raise ParameterError(
                    f"{entry.name}: parameter {key!r} must be < {spec.high}, got {v}"
                )
        resolved[key] = float(arr[0]) if spec.size == 1 else tuple(float(v) for v in arr)
    if params:
        admissible = ", ".join(sorted(entry.params)) or "(none)"
        raise ParameterError(
            f"{entry.name}: unknown parameter(s) {sorted(params)}; admissible: {admissible}"
        )
    return resolved


# ---------------------------------------------------------------------------
# free rigid body


def _build_rigid_body(p: dict) -> PhaseSpaceSystem:
    inertia = np.asarray(p["I"], dtype=float)
    inv_i = 1.0 / inertia
    group = lie.builtin_group("trivial")

    def hamiltonian(z):
        z = np.asarray(z, dtype=float)
        return 0.5 * np.sum(z**2 * inv_i, axis=-1)

    def vector_field(z):
        z = np.asarray(z, dtype=float)
        return np.cross(z * inv_i, z)

    def casimirs(z):
        z = np.asarray(z, dtype=float)
        return np.sum(z**2, axis=-1, keepdims=True)

    def momentum_map(z):
        z = np.asarray(z, dtype=float)
        return np.zeros(z.shape[:-1] + (0,))

    return PhaseSpaceSystem(
        name="rigid_body",
        n=3,
        group=group,
        poisson_tensor=lambda z: -_hat(np.asarray(z, dtype=float)),
        hamiltonian=hamiltonian,
        momentum_map=momentum_map,
        casimirs=casimirs,
        dim_conserved=1,
        action=lambda g, z: np.asarray(z, dtype=float),
        generator_matrices=[],
        grad_hamiltonian=lambda z: np.asarray(z, dtype=float) * inv_i,
        hess_hamiltonian=lambda z: np.diag(inv_i),
        jac_momentum=lambda z: np.zeros((0, 3)),
        hess_momentum=lambda z: np.zeros((0, 3, 3)),
        jac_casimirs=lambda z: 2.0 * np.asarray(z, dtype=float).reshape(1, 3),
        hess_casimirs=lambda z: 2.0 * np.eye(3).reshape(1, 3, 3),
        vector_field=vector_field,
        batch_arrays=True,
        parameters={"I": tuple(inertia)},
    )


def _rigid_body_seeds(p: dict) -> list:
    seeds = []
    for k, sign in ((2, 1.0), (0, 1.0), (1, 1.0), (2, -1.0), (0, -1.0), (1, -1.0)):
        z = np.zeros(3)
        z[k] = sign
        tag = "plus" if sign > 0 else "minus"
        seeds.append(EquilibriumSeed(f"axis{k + 1}_{tag}", z, np.zeros(0)))
    return seeds


# ---------------------------------------------------------------------------
# heavy symmetric top with gravity


def _build_lagrange_top(p: dict) -> PhaseSpaceSystem:
    mgl, i1, i3 = p["Mgl"], p["I1"], p["I3"]
    inv_i = np.array([1.0 / i1, 1.0 / i1, 1.0 / i3])
    e3 = np.array([0.0, 0.0, 1.0])
    group = lie.builtin_group("torus1")

    def hamiltonian(z):
        z = np.asarray(z, dtype=float)
        pi, ga = z[..., :3], z[..., 3:]
        return 0.5 * np.sum(pi**2 * inv_i, axis=-1) + mgl * ga[..., 2]

    def gradient(z):
        z = np.asarray(z, dtype=float)
        g = np.zeros(6)
        g[:3] = z[:3] * inv_i
        g[5] = mgl
        return g

    def hessian(z):
        h = np.zeros((6, 6))
        h[0, 0], h[1, 1], h[2, 2] = inv_i
        return h

    def vector_field(z):
        z = np.asarray(z, dtype=float)
        pi, ga = z[..., :3], z[..., 3:]
        omega = pi * inv_i
        dpi = -np.cross(pi, omega) - mgl * np.cross(ga, e3)
        dga = -np.cross(ga, omega)
        return np.concatenate([dpi, dga], axis=-1)

    def poisson_tensor(z):
        z = np.asarray(z, dtype=float)
        pi_hat, ga_hat = _hat(z[:3]), _hat(z[3:])
        top = np.concatenate([-pi_hat, -ga_hat], axis=1)
        bottom = np.concatenate([-ga_hat, np.zeros((3, 3))], axis=1)
        return np.concatenate([top, bottom], axis=0)

    def momentum_map(z):
        z = np.asarray(z, dtype=float)
        return z[..., 2:3]

    def casimirs(z):
        z = np.asarray(z, dtype=float)
        pi, ga = z[..., :3], z[..., 3:]
        return np.stack(
            [np.sum(ga**2, axis=-1), np.sum(pi * ga, axis=-1)], axis=-1
        )

    def jac_casimirs(z):
        z = np.asarray(z, dtype=float)
        pi, ga = z[:3], z[3:]
        return np.array(
            [np.concatenate([np.zeros(3), 2.0 * ga]), np.concatenate([ga, pi])]
        )

    cross_block = np.zeros((6, 6))
    cross_block[:3, 3:] = np.eye(3)
    cross_block[3:, :3] = np.eye(3)
    hess_c = np.stack(
        [np.diag([0.0, 0.0, 0.0, 2.0, 2.0, 2.0]), cross_block]
    )

    def action(g: lie.GroupElement, z):
        theta = np.arctan2(g.matrix[1, 0], g.matrix[0, 0])
        r = _rot_z(theta)
        z = np.asarray(z, dtype=float)
        return np.concatenate([r @ z[:3], r @ z[3:]])

    gen = _block_diag(_hat(e3), _hat(e3))

    return PhaseSpaceSystem(
        name="lagrange_top",
        n=6,
        group=group,
        poisson_tensor=poisson_tensor,
        hamiltonian=hamiltonian,
        momentum_map=momentum_map,
        casimirs=casimirs,
        dim_conserved=2,
        action=action,
        generator_matrices=[gen],
        grad_hamiltonian=gradient,
        hess_hamiltonian=hessian,
        jac_momentum=lambda z: np.array([[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]]),
        hess_momentum=lambda z: np.zeros((1, 6, 6)),
        jac_casimirs=jac_casimirs,
        hess_casimirs=lambda z: hess_c,
        vector_field=vector_field,
        batch_arrays=True,
        parameters={"Mgl": mgl, "I1": i1, "I3": i3, "omega": p["omega"]},
    )


def _lagrange_top_seeds(p: dict) -> list:
    omega = p["omega"]
    z = np.array([0.0, 0.0, p["I3"] * omega, 0.0, 0.0, 1.0])
    return [EquilibriumSeed("sleeping", z, np.array([omega]))]


# ---------------------------------------------------------------------------
# three-dimensional isotropic oscillator with diagonal rotation symmetry


_EPS = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _EPS[_i, _j, _k] = 1.0
    _EPS[_i, _k, _j] = -1.0


def _build_symmetric_oscillator(p: dict) -> PhaseSpaceSystem:
    group = lie.builtin_group("so3")
    b = np.zeros((6, 6))
    b[:3, 3:] = np.eye(3)
    b[3:, :3] = -np.eye(3)

    def hamiltonian(z):
        z = np.asarray(z, dtype=float)
        return 0.5 * np.sum(z**2, axis=-1)

    def momentum_map(z):
        z = np.asarray(z, dtype=float)
        return np.cross(z[..., :3], z[..., 3:])

    def jac_momentum(z):
        z = np.asarray(z, dtype=float)
        q, mom = z[:3], z[3:]
        cols_q = np.stack([np.cross(mom, e) for e in np.eye(3)], axis=0)
        cols_p = np.stack([np.cross(e, q) for e in np.eye(3)], axis=0)
        return np.concatenate([cols_q, cols_p], axis=1)

    hess_j = np.zeros((3, 6, 6))
    for a in range(3):
        hess_j[a, :3, 3:] = _EPS[a]
        hess_j[a, 3:, :3] = _EPS[a].T

    def casimirs(z):
        z = np.asarray(z, dtype=float)
        return np.zeros(z.shape[:-1] + (0,))

    def action(g: lie.GroupElement, z):
        z = np.asarray(z, dtype=float)
        return np.concatenate([g.matrix @ z[:3], g.matrix @ z[3:]])

    def vector_field(z):
        z = np.asarray(z, dtype=float)
        return np.concatenate([z[..., 3:], -z[..., :3]], axis=-1)

    gens = [_block_diag(_hat(e), _hat(e)) for e in np.eye(3)]

    return PhaseSpaceSystem(
        name="symmetric_oscillator",
        n=6,
        group=group,
        poisson_tensor=lambda z: b,
        hamiltonian=hamiltonian,
        momentum_map=momentum_map,
        casimirs=casimirs,
        dim_conserved=0,
        action=action,
        generator_matrices=gens,
        grad_hamiltonian=lambda z: np.asarray(z, dtype=float),
        hess_hamiltonian=lambda z: np.eye(6),
        jac_momentum=jac_momentum,
        hess_momentum=lambda z: hess_j,
        jac_casimirs=lambda z: np.zeros((0, 6)),
        hess_casimirs=lambda z: np.zeros((0, 6, 6)),
        vector_field=vector_field,
        batch_arrays=True,
        parameters={},
    )


def _oscillator_seeds(p: dict) -> list:
    z = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    return [EquilibriumSeed("circular_orbit", z, np.array([0.0, 0.0, 1.0]))]


# ---------------------------------------------------------------------------
# planar oscillator whose Hamiltonian is its own momentum map


def _build_harmonic_s1(p: dict) -> PhaseSpaceSystem:
    group = lie.builtin_group("torus1")
    b = np.array([[0.0, 1.0], [-1.0, 0.0]])

    def energy(z):
        z = np.asarray(z, dtype=float)
        return 0.5 * np.sum(z**2, axis=-1)

    def momentum_map(z):
        z = np.asarray(z, dtype=float)
        return 0.5 * np.sum(z**2, axis=-1, keepdims=True)

    def casimirs(z):
        z = np.asarray(z, dtype=float)
        return np.zeros(z.shape[:-1] + (0,))

    return PhaseSpaceSystem(
        name="harmonic_s1",
        n=2,
        group=group,
        poisson_tensor=lambda z: b,
        hamiltonian=energy,
        momentum_map=momentum_map,
        casimirs=casimirs,
        dim_conserved=0,
        # the flow direction itself: clockwise rotation in the (q, p) plane
        action=lambda g, z: g.matrix.T @ np.asarray(z, dtype=float),
        generator_matrices=[np.array([[0.0, 1.0], [-1.0, 0.0]])],
        grad_hamiltonian=lambda z: np.asarray(z, dtype=float),
        hess_hamiltonian=lambda z: np.eye(2),
        jac_momentum=lambda z: np.asarray(z, dtype=float).reshape(1, 2),
        hess_momentum=lambda z: np.eye(2).reshape(1, 2, 2),
        jac_casimirs=lambda z: np.zeros((0, 2)),
        hess_casimirs=lambda z: np.zeros((0, 2, 2)),
        vector_field=lambda z: np.stack(
            [np.asarray(z, dtype=float)[..., 1], -np.asarray(z, dtype=float)[..., 0]], axis=-1
        ),
        batch_arrays=True,
        parameters={},
    )


def _harmonic_seeds(p: dict) -> list:
    return [EquilibriumSeed("unit_circle", np.array([1.0, 0.0]), np.array([1.0]))]


_CATALOG = {
    "rigid_body": CatalogEntry(
        name="rigid_body",
        description=(
            "Free rigid body in body angular momentum coordinates. The symmetry "
            "group is trivial, so certification reduces to the energy plus "
            "conserved-function test on the momentum sphere."
        ),
        params={"I": ParamSpec(default=(1.0, 2.0, 3.0), size=3, low=0.0,
                               help="principal moments of inertia")},
        build=_build_rigid_body,
        equilibria=_rigid_body_seeds,
    ),
    "lagrange_top": CatalogEntry(
        name="lagrange_top",
        description=(
            "Heavy symmetric top in body coordinates (angular momentum and "
            "vertical axis). Circle symmetry about the vertical; the sleeping "
            "state spins upright at rate omega."
        ),
        params={
            "Mgl": ParamSpec(default=1.0, low=0.0, help="weight times lever arm"),
            "I1": ParamSpec(default=1.0, low=0.0, help="transverse moment of inertia"),
            "I3": ParamSpec(default=1.0, low=0.0, help="axial moment of inertia"),
            "omega": ParamSpec(default=2.5, help="spin rate of the sleeping seed"),
        },
        build=_build_lagrange_top,
        equilibria=_lagrange_top_seeds,
    ),
    "symmetric_oscillator": CatalogEntry(
        name="symmetric_oscillator",
        description=(
            "Isotropic three-dimensional oscillator with the diagonal rotation "
            "action; angular momentum is the momentum map, no extra conserved "
            "functions. Circular orbits are the interesting equilibria."
        ),
        params={},
        build=_build_symmetric_oscillator,
        equilibria=_oscillator_seeds,
    ),
    "harmonic_s1": CatalogEntry(
        name="harmonic_s1",
        description=(
            "Planar oscillator whose Hamiltonian equals its own momentum map; "
            "every point is a relative equilibrium with unit generator. Useful "
            "as the smallest end-to-end smoke test."
        ),
        params={},
        build=_build_harmonic_s1,
        equilibria=_harmonic_seeds,
    ),
}


def catalog() -> dict:
    """Mapping of system name to its catalog entry."""
    return dict(_CATALOG)


def instantiate_system(name: str, params: dict | None = None) -> PhaseSpaceSystem:
    """Build a catalog system after validating parameters against its schema."""
    entry = _CATALOG.get(name)
    if entry is None:
        raise UnknownSystemError(name, _CATALOG)
    return entry.build(_resolve_params(entry, params))


def known_equilibria(name: str, params: dict | None = None) -> list:
    """Documented equilibrium seeds of a catalog system."""
    entry = _CATALOG.get(name)
    if entry is None:
        raise UnknownSystemError(name, _CATALOG)
    return entry.equilibria(_resolve_params(entry, params))
