"""Poisson phase spaces with a symmetry group.

A system couples a chart R^n carrying a state-dependent Poisson tensor and a
Hamiltonian with a matrix Lie group acting on the chart.  The momentum map
and the conserved functions are plain callables returning coefficient
vectors; analytic derivatives are optional and finite differences fill in
whatever is missing.

All evaluation callables take a single chart point.  Systems that also
accept stacked arrays of points (shape ``(..., n)``) should set
``batch_arrays=True`` so that the integrators and monitors can vectorise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import lie
from .errors import DimensionMismatchError, StructuralError

# central-difference base steps, scaled per coordinate by max(1, |z_i|)
FD_STEP_ORDER1 = 1e-5
FD_STEP_ORDER2 = 1e-4


@dataclass
class PhaseSpaceSystem:
    """Phase space, Hamiltonian, conserved maps and group action.

    ``poisson_tensor(z)`` must return an antisymmetric ``(n, n)`` matrix.
    ``momentum_map(z)`` returns dual coefficients of length ``group.dim`` and
    ``casimirs(z)`` a vector of length ``dim_conserved``.  ``action(g, z)``
    applies a group element to a chart point.  ``generator_matrices`` holds
    one ``(n, n)`` matrix per algebra basis element for linear actions; when
    absent the infinitesimal generator falls back to differencing the action
    along one-parameter subgroups.
    """

    name: str
    n: int
    group: lie.LieGroupSpec
    poisson_tensor: Callable[[np.ndarray], np.ndarray]
    hamiltonian: Callable[[np.ndarray], float]
    momentum_map: Callable[[np.ndarray], np.ndarray]
    casimirs: Callable[[np.ndarray], np.ndarray]
    dim_conserved: int
    action: Callable[[lie.GroupElement, np.ndarray], np.ndarray]
    inner_product_conserved: np.ndarray | None = None
    generator_matrices: Sequence[np.ndarray] | None = None
    grad_hamiltonian: Callable | None = None
    hess_hamiltonian: Callable | None = None
    jac_momentum: Callable | None = None
    hess_momentum: Callable | None = None
    jac_casimirs: Callable | None = None
    hess_casimirs: Callable | None = None
    vector_field: Callable | None = None
    batch_arrays: bool = False
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.inner_product_conserved is None:
            self.inner_product_conserved = np.eye(self.dim_conserved)
        self.inner_product_conserved = np.asarray(self.inner_product_conserved, dtype=float)
        if self.inner_product_conserved.shape != (self.dim_conserved, self.dim_conserved):
            raise DimensionMismatchError(
                "conserved inner product",
                (self.dim_conserved, self.dim_conserved),
                self.inner_product_conserved.shape,
            )
        if self.generator_matrices is not None:
            self.generator_matrices = [np.asarray(m, dtype=float) for m in self.generator_matrices]
            if len(self.generator_matrices) != self.group.dim:
                raise DimensionMismatchError(
                    "generator matrices", self.group.dim, len(self.generator_matrices)
                )
        self._spot_check()

    def _spot_check(self):
        rng = np.random.default_rng(12345)
        for _ in range(3):
            z = rng.normal(size=self.n)
            b = np.asarray(self.poisson_tensor(z), dtype=float)
            if b.shape != (self.n, self.n):
                raise DimensionMismatchError("poisson tensor", (self.n, self.n), b.shape)
            if np.max(np.abs(b + b.T)) > 1e-12 * max(1.0, float(np.max(np.abs(b)))):
                raise StructuralError(f"poisson tensor not antisymmetric at {z}")
            moved = self.action(self.group.identity(), z)
            if np.max(np.abs(moved - z)) > 1e-12:
                raise StructuralError("group identity does not act as the identity map")

    def point(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n,):
            raise DimensionMismatchError("chart point", (self.n,), z.shape)
        return z

    def momentum_dual(self, z) -> lie.DualElement:
        return lie.DualElement(self.group, np.atleast_1d(self.momentum_map(self.point(z))))

    def casimir_norm(self, values: np.ndarray) -> float:
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if self.dim_conserved == 0:
            return 0.0
        return float(np.sqrt(values @ self.inner_product_conserved @ values))


def _fd_steps(z: np.ndarray, base: float) -> np.ndarray:
    return base * np.maximum(1.0, np.abs(z))


def fd_gradient(fn, z: np.ndarray, base: float = FD_STEP_ORDER1) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    z = np.asarray(z, dtype=float)
    h = _fd_steps(z, base)
    g = np.zeros_like(z)
    for i in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[i] += h[i]
        zm[i] -= h[i]
        g[i] = (fn(zp) - fn(zm)) / (2 * h[i])
    return g


def fd_jacobian(fn, z: np.ndarray, m: int, base: float = FD_STEP_ORDER1) -> np.ndarray:
    """Central-difference Jacobian of a map into R^m, shape (m, n)."""
    z = np.asarray(z, dtype=float)
    h = _fd_steps(z, base)
    out = np.zeros((m, z.size))
    for i in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[i] += h[i]
        zm[i] -= h[i]
        out[:, i] = (np.atleast_1d(fn(zp)) - np.atleast_1d(fn(zm))) / (2 * h[i])
    return out


def fd_hessian(fn, z: np.ndarray, base: float = FD_STEP_ORDER2) -> np.ndarray:
    """Central-difference Hessian of a scalar function, symmetrised."""
    z = np.asarray(z, dtype=float)
    n = z.size
    h = _fd_steps(z, base)
    out = np.zeros((n, n))
    f0 = fn(z)
    for i in range(n):
        zp, zm = z.copy(), z.copy()
        zp[i] += h[i]
        zm[i] -= h[i]
        out[i, i] = (fn(zp) - 2 * f0 + fn(zm)) / h[i] ** 2
    for i in range(n):
        for j in range(i + 1, n):
            zpp, zpm, zmp, zmm = z.copy(), z.copy(), z.copy(), z.copy()
            zpp[[i, j]] += [h[i], h[j]]
            zpm[i] += h[i]
            zpm[j] -= h[j]
            zmp[i] -= h[i]
            zmp[j] += h[j]
            zmm[[i, j]] -= [h[i], h[j]]
            out[i, j] = (fn(zpp) - fn(zpm) - fn(zmp) + fn(zmm)) / (4 * h[i] * h[j])
            out[j, i] = out[i, j]
    return 0.5 * (out + out.T)


_FIELD_ALIASES = {
    "H": "hamiltonian",
    "hamiltonian": "hamiltonian",
    "J": "momentum",
    "momentum": "momentum",
    "C": "casimirs",
    "casimirs": "casimirs",
}


def differentiate(sys: PhaseSpaceSystem, fld, z, order: int = 1):
    """Derivatives of the Hamiltonian, momentum map, conserved functions or
    a custom scalar.

    ``fld`` is one of ``"hamiltonian"``, ``"momentum"``, ``"casimirs"`` (or
    the short names ``"H"``, ``"J"``, ``"C"``) or a scalar callable.  Order 1
    returns a gradient or a Jacobian, order 2 a Hessian or a stack of
    component Hessians.  Analytic derivatives are used when the system
    provides them; central differences otherwise.
    """
    z = sys.point(z)
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if callable(fld):
        return fd_gradient(fld, z) if order == 1 else fd_hessian(fld, z)
    kind = _FIELD_ALIASES.get(fld)
    if kind is None:
        raise ValueError(f"unknown field {fld!r}")
    if kind == "hamiltonian":
        if order == 1:
            if sys.grad_hamiltonian is not None:
                return np.asarray(sys.grad_hamiltonian(z), dtype=float)
            return fd_gradient(sys.hamiltonian, z)
        if sys.hess_hamiltonian is not None:
            return np.asarray(sys.hess_hamiltonian(z), dtype=float)
        return fd_hessian(sys.hamiltonian, z)
    if kind == "momentum":
        m = sys.group.dim
        if order == 1:
            if sys.jac_momentum is not None:
                return np.asarray(sys.jac_momentum(z), dtype=float).reshape(m, sys.n)
            return fd_jacobian(sys.momentum_map, z, m)
        if sys.hess_momentum is not None:
            return np.asarray(sys.hess_momentum(z), dtype=float).reshape(m, sys.n, sys.n)
        return np.stack(
            [fd_hessian(lambda p, a=a: np.atleast_1d(sys.momentum_map(p))[a], z) for a in range(m)]
        ) if m else np.zeros((0, sys.n, sys.n))
    m = sys.dim_conserved
    if order == 1:
        if sys.jac_casimirs is not None:
            return np.asarray(sys.jac_casimirs(z), dtype=float).reshape(m, sys.n)
        return fd_jacobian(sys.casimirs, z, m)
    if sys.hess_casimirs is not None:
        return np.asarray(sys.hess_casimirs(z), dtype=float).reshape(m, sys.n, sys.n)
    return np.stack(
        [fd_hessian(lambda p, k=k: np.atleast_1d(sys.casimirs(p))[k], z) for k in range(m)]
    ) if m else np.zeros((0, sys.n, sys.n))


def hamiltonian_vector_field(sys: PhaseSpaceSystem, z) -> np.ndarray:
    """Poisson tensor applied to the Hamiltonian gradient."""
    z = sys.point(z)
    if sys.vector_field is not None:
        return np.asarray(sys.vector_field(z), dtype=float)
    grad = differentiate(sys, "hamiltonian", z, order=1)
    return np.asarray(sys.poisson_tensor(z), dtype=float) @ grad


def infinitesimal_generator(sys: PhaseSpaceSystem, zeta, z) -> np.ndarray:
    """Velocity of the one-parameter group through ``exp(t zeta)`` at ``z``."""
    z = sys.point(z)
    coeffs = zeta.coeffs if isinstance(zeta, lie.AlgebraElement) else np.atleast_1d(zeta)
    if coeffs.shape != (sys.group.dim,):
        raise DimensionMismatchError("generator coefficients", (sys.group.dim,), coeffs.shape)
    if sys.group.dim == 0:
        return np.zeros(sys.n)
    if sys.generator_matrices is not None:
        out = np.zeros(sys.n)
        for c, m in zip(coeffs, sys.generator_matrices):
            out += c * (m @ z)
        return out
    t = 1e-6
    gp = lie.exponential(lie.AlgebraElement(sys.group, t * coeffs))
    gm = lie.exponential(lie.AlgebraElement(sys.group, -t * coeffs))
    return (sys.action(gp, z) - sys.action(gm, z)) / (2 * t)


def generator_map_matrix(sys: PhaseSpaceSystem, z) -> np.ndarray:
    """Matrix whose columns are the generator fields of the basis elements."""
    z = sys.point(z)
    cols = [infinitesimal_generator(sys, e, z) for e in np.eye(sys.group.dim)]
    if not cols:
        return np.zeros((sys.n, 0))
    return np.stack(cols, axis=1)


@dataclass
class StructureReport:
    """Maxima of the structural consistency checks, all normalised."""

    system: str
    n_samples: int
    poisson_antisymmetry: float
    poisson_jacobi: float
    hamiltonian_invariance: float
    casimir_invariance: float
    casimir_bracket: float
    momentum_equivariance: float
    generator_match: float
    tol: float

    def worst(self) -> float:
        return max(
            self.poisson_antisymmetry,
            self.poisson_jacobi,
            self.hamiltonian_invariance,
            self.casimir_invariance,
            self.casimir_bracket,
            self.momentum_equivariance,
            self.generator_match,
        )

    @property
    def ok(self) -> bool:
        return self.worst() <= self.tol

    def failures(self) -> list[str]:
        out = []
        for name in (
            "poisson_antisymmetry",
            "poisson_jacobi",
            "hamiltonian_invariance",
            "casimir_invariance",
            "casimir_bracket",
            "momentum_equivariance",
            "generator_match",
        ):
            if getattr(self, name) > self.tol:
                out.append(f"{name} = {getattr(self, name):.3e}")
        return out


def _poisson_jacobi_residual(sys: PhaseSpaceSystem, z: np.ndarray) -> float:
    """Cyclic-sum residual of the bracket on coordinate triples, differenced."""
    n = sys.n
    h = _fd_steps(z, FD_STEP_ORDER1)
    db = np.zeros((n, n, n))  # db[l, i, j] = d B_ij / d z_l
    for l in range(n):
        zp, zm = z.copy(), z.copy()
        zp[l] += h[l]
        zm[l] -= h[l]
        db[l] = (np.asarray(sys.poisson_tensor(zp)) - np.asarray(sys.poisson_tensor(zm))) / (
            2 * h[l]
        )
    b = np.asarray(sys.poisson_tensor(z), dtype=float)
    term = np.einsum("il,ljk->ijk", b, db)
    total = term + np.transpose(term, (1, 2, 0)) + np.transpose(term, (2, 0, 1))
    scale = max(1.0, float(np.max(np.abs(b))) ** 2)
    return float(np.max(np.abs(total))) / scale


def check_structure(
    sys: PhaseSpaceSystem,
    n_samples: int = 8,
    seed: int = 0,
    tol: float = 1e-6,
    strict: bool = False,
) -> StructureReport:
    """Verify the declared structure at sampled points and group elements.

    Checks, each reported as a normalised maximum over the samples:
    antisymmetry and the cyclic bracket identity for the Poisson tensor,
    invariance of the Hamiltonian under sampled group elements, invariance
    of the conserved functions under the momentum-isotropy subgroup at each
    point, the vanishing bracket of conserved functions with coordinates,
    equivariance of the momentum map, and agreement of the momentum-induced
    vector fields with the group generators.

    The report is advisory; ``strict=True`` raises on failure instead.
    """
    rng = np.random.default_rng(seed)
    g = sys.group
    r_anti = r_jac = r_ham = r_cas = r_bra = r_equ = r_gen = 0.0
    for _ in range(n_samples):
        z = rng.normal(size=sys.n)
        b = np.asarray(sys.poisson_tensor(z), dtype=float)
        scale_b = max(1.0, float(np.max(np.abs(b))))
        r_anti = max(r_anti, float(np.max(np.abs(b + b.T))) / scale_b)
        r_jac = max(r_jac, _poisson_jacobi_residual(sys, z))

        h0 = float(sys.hamiltonian(z))
        j0 = np.atleast_1d(sys.momentum_map(z))
        c0 = np.atleast_1d(sys.casimirs(z))

        if sys.dim_conserved:
            jac_c = differentiate(sys, "casimirs", z, order=1)
            for k in range(sys.dim_conserved):
                resid = np.linalg.norm(b @ jac_c[k])
                r_bra = max(r_bra, resid / max(1.0, np.linalg.norm(jac_c[k]) * scale_b))

        if g.dim:
            for _ in range(2):
                ge = lie.exponential(lie.AlgebraElement(g, rng.normal(size=g.dim)))
                gz = sys.action(ge, z)
                r_ham = max(r_ham, abs(float(sys.hamiltonian(gz)) - h0) / max(1.0, abs(h0)))
                expected = lie.coadjoint_group(ge.inverse(), lie.DualElement(g, j0)).coeffs
                got = np.atleast_1d(sys.momentum_map(gz))
                r_equ = max(
                    r_equ, float(np.max(np.abs(got - expected))) / max(1.0, np.linalg.norm(j0))
                )
            if sys.dim_conserved:
                iso = lie.momentum_isotropy_algebra(g, j0)
                for zeta in iso:
                    gi = lie.exponential(
                        lie.AlgebraElement(g, rng.normal() * zeta.coeffs)
                    )
                    cz = np.atleast_1d(sys.casimirs(sys.action(gi, z)))
                    r_cas = max(
                        r_cas, float(np.max(np.abs(cz - c0))) / max(1.0, np.linalg.norm(c0))
                    )
            jac_j = differentiate(sys, "momentum", z, order=1)
            for a in range(g.dim):
                xj = b @ jac_j[a]
                gen = infinitesimal_generator(sys, np.eye(g.dim)[a], z)
                r_gen = max(
                    r_gen, float(np.max(np.abs(xj - gen))) / max(1.0, np.linalg.norm(gen))
                )
        for sample in g.discrete_samples:
            ge = lie.GroupElement(g, sample)
            gz = sys.action(ge, z)
            r_ham = max(r_ham, abs(float(sys.hamiltonian(gz)) - h0) / max(1.0, abs(h0)))

    report = StructureReport(
        sys.name, n_samples, r_anti, r_jac, r_ham, r_cas, r_bra, r_equ, r_gen, tol
    )
    if strict and not report.ok:
        raise StructuralError(
            f"structure checks failed for {sys.name}: " + "; ".join(report.failures())
        )
    return report
