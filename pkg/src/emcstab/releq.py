"""Relative equilibria: points whose Hamiltonian drift is a group motion.

A chart point ``z`` with generator ``xi`` is a relative equilibrium when the
Hamiltonian vector field at ``z`` equals the infinitesimal generator of
``xi`` there.  The generator is determined only up to the isotropy
subalgebra of the point, so solvers report the minimal-norm representative
and flag nontrivial isotropy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lie
from .errors import NonConvergenceError, StructuralError
from .phase import (
    PhaseSpaceSystem,
    fd_jacobian,
    generator_map_matrix,
    hamiltonian_vector_field,
)

TOL_RE = 1e-9
_MU_TOL = 1e-10


@dataclass
class RelativeEquilibrium:
    """A validated relative equilibrium with its generator and momentum."""

    z_e: np.ndarray
    xi: lie.AlgebraElement
    mu: lie.DualElement
    residual_norm: float
    isotropy_dim: int = 0
    iterations: int = 0

    def __post_init__(self):
        self.z_e = np.asarray(self.z_e, dtype=float)


def relative_equilibrium_residual(sys: PhaseSpaceSystem, z, xi) -> float:
    """Norm of the defect between the flow and the group motion at ``z``."""
    z = sys.point(z)
    coeffs = xi.coeffs if isinstance(xi, lie.AlgebraElement) else np.atleast_1d(xi)
    field = hamiltonian_vector_field(sys, z)
    gen = generator_map_matrix(sys, z) @ coeffs if sys.group.dim else np.zeros(sys.n)
    return float(np.linalg.norm(field - gen))


def point_isotropy_algebra(
    sys: PhaseSpaceSystem, z, tol_null: float = 1e-8
) -> list[lie.AlgebraElement]:
    """Orthonormal basis of the subalgebra whose generators vanish at ``z``.

    Computed from the singular values of the generator map; directions with
    singular value at most ``tol_null`` times the largest (or absolutely
    small when the whole map vanishes) count as isotropy.
    """
    z = sys.point(z)
    g = sys.group
    if g.dim == 0:
        return []
    a = generator_map_matrix(sys, z) @ g._w_inv_sqrt
    _, s, vt = np.linalg.svd(a)
    smax = s[0] if s.size else 0.0
    cutoff = tol_null * smax if smax > 1e-12 else 1e-12
    rank = int(np.sum(s > cutoff))
    cols = g._w_inv_sqrt @ vt[rank:].T
    return [lie.AlgebraElement(g, cols[:, j]) for j in range(cols.shape[1])]


def minimal_norm_generator(
    sys: PhaseSpaceSystem, z, xi_coeffs: np.ndarray
) -> tuple[np.ndarray, int]:
    """Remove the isotropy component of a generator, metric-orthogonally.

    Falls back to the input when the projection measurably worsens the
    equilibrium defect (borderline isotropy detection).
    """
    xi_coeffs = np.asarray(xi_coeffs, dtype=float)
    iso = point_isotropy_algebra(sys, z)
    if not iso:
        return xi_coeffs, 0
    w = sys.group.inner_product
    basis = np.stack([b.coeffs for b in iso], axis=1)
    out = xi_coeffs - basis @ (basis.T @ w @ xi_coeffs)
    before = relative_equilibrium_residual(sys, z, xi_coeffs)
    after = relative_equilibrium_residual(sys, z, out)
    if after > max(before, TOL_RE):
        return xi_coeffs, len(iso)
    return out, len(iso)


def solve_generator(sys: PhaseSpaceSystem, z) -> tuple[np.ndarray, float]:
    """Least-squares generator for a fixed point: the defect is linear in xi."""
    z = sys.point(z)
    field = hamiltonian_vector_field(sys, z)
    if sys.group.dim == 0:
        return np.zeros(0), float(np.linalg.norm(field))
    a = generator_map_matrix(sys, z)
    coeffs, *_ = np.linalg.lstsq(a, field, rcond=None)
    return coeffs, float(np.linalg.norm(field - a @ coeffs))


def make_relative_equilibrium(
    sys: PhaseSpaceSystem, z, xi=None, tol: float = TOL_RE
) -> RelativeEquilibrium:
    """Validate a candidate point (solving for the generator when omitted)."""
    z = sys.point(z)
    if xi is None:
        coeffs, _ = solve_generator(sys, z)
    else:
        coeffs = xi.coeffs if isinstance(xi, lie.AlgebraElement) else np.atleast_1d(xi)
    residual = relative_equilibrium_residual(sys, z, coeffs)
    if residual > tol:
        raise StructuralError(
            f"point is not a relative equilibrium (residual {residual:.3e} > {tol:g})"
        )
    coeffs, iso_dim = minimal_norm_generator(sys, z, coeffs)
    mu = sys.momentum_dual(z)
    re = RelativeEquilibrium(
        z_e=z,
        xi=lie.AlgebraElement(sys.group, coeffs),
        mu=mu,
        residual_norm=residual,
        isotropy_dim=iso_dim,
    )
    _check_momentum_consistency(sys, re)
    return re


def _check_momentum_consistency(sys: PhaseSpaceSystem, re: RelativeEquilibrium):
    j = np.atleast_1d(sys.momentum_map(re.z_e))
    err = float(np.max(np.abs(j - re.mu.coeffs))) if j.size else 0.0
    if err > _MU_TOL:
        raise StructuralError(f"stored momentum disagrees with the map by {err:.3e}")


def find_relative_equilibrium(
    sys: PhaseSpaceSystem,
    z0,
    xi0=None,
    tol: float = TOL_RE,
    max_iter: int = 200,
) -> RelativeEquilibrium:
    """Damped least-squares search for a relative equilibrium near a seed.

    Minimises the squared defect over the point and the generator jointly.
    Steps solve the normal equations with an adaptive damping weight, which
    keeps the iteration well defined along the neutral directions every
    symmetric problem has (group orbits, generator isotropy).  Returns the
    minimal-norm generator and flags nontrivial point isotropy.
    """
    z0 = sys.point(z0)
    dim_g = sys.group.dim
    if xi0 is None:
        xi_c = solve_generator(sys, z0)[0]
    else:
        xi_c = np.array(
            xi0.coeffs if isinstance(xi0, lie.AlgebraElement) else np.atleast_1d(xi0),
            dtype=float,
        )
    v = np.concatenate([z0, xi_c])

    def residual_vec(vv):
        z, xi = vv[: sys.n], vv[sys.n :]
        field = hamiltonian_vector_field(sys, z)
        gen = generator_map_matrix(sys, z) @ xi if dim_g else np.zeros(sys.n)
        return field - gen

    r = residual_vec(v)
    iterations = 0
    damping = 1e-3
    while np.linalg.norm(r) > tol and iterations < max_iter:
        jac = fd_jacobian(residual_vec, v, sys.n)
        a = jac.T @ jac
        g = jac.T @ r
        step = np.linalg.solve(a + damping * np.eye(a.shape[0]), -g)
        v_new = v + step
        r_new = residual_vec(v_new)
        if np.linalg.norm(r_new) < np.linalg.norm(r):
            v, r = v_new, r_new
            damping = max(damping / 3.0, 1e-12)
        else:
            damping *= 4.0
            if damping > 1e12:
                raise NonConvergenceError(
                    "damping exhausted in equilibrium search",
                    residual=float(np.linalg.norm(r)),
                )
        iterations += 1
    res_norm = float(np.linalg.norm(r))
    if res_norm > tol:
        raise NonConvergenceError(
            f"no relative equilibrium within {max_iter} iterations", residual=res_norm
        )
    z_e, xi_c = v[: sys.n], v[sys.n :]
    xi_c, iso_dim = minimal_norm_generator(sys, z_e, xi_c)
    re = RelativeEquilibrium(
        z_e=z_e,
        xi=lie.AlgebraElement(sys.group, xi_c),
        mu=sys.momentum_dual(z_e),
        residual_norm=relative_equilibrium_residual(sys, z_e, xi_c),
        isotropy_dim=iso_dim,
        iterations=iterations,
    )
    _check_momentum_consistency(sys, re)
    return re
