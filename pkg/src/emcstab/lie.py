"""Matrix Lie groups and their algebras.

A group is described by a generator basis of d x d matrices together with
structure constants, an inner product on the algebra, and optionally a list
of discrete sample elements (for groups with disconnected pieces that matter
to the application).  Algebra and dual elements are coefficient vectors with
respect to the generator basis and its dual basis; group elements are the
matrices themselves.

Convention used throughout: the infinitesimal coadjoint map is defined by
``<coadjoint_algebra(zeta, mu), eta> = -<mu, bracket(zeta, eta)>``, which is
the derivative at the identity of ``g -> coadjoint_group(inverse(g), mu)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    BasisExpansionError,
    DimensionMismatchError,
    GroupConstraintError,
    StructureConstantError,
)

_STRUCTURE_TOL = 1e-12
_GROUP_TOL = 1e-9
_EXPANSION_TOL = 1e-9


def _orthogonal_constraint(matrix: np.ndarray) -> float:
    """Residual of orthogonality plus unit determinant."""
    d = matrix.shape[0]
    ortho = np.linalg.norm(matrix.T @ matrix - np.eye(d))
    return float(ortho + abs(np.linalg.det(matrix) - 1.0))


@dataclass
class LieGroupSpec:
    """A matrix Lie group given by its algebra basis and structure constants.

    ``structure_constants[i, j, k]`` is the coefficient of basis element k in
    the bracket of basis elements i and j.  ``inner_product`` is a symmetric
    positive definite matrix on algebra coefficients; the dual norm uses its
    inverse.  ``constraint`` maps a candidate group matrix to a residual that
    must stay below 1e-9.
    """

    name: str
    dim: int
    basis: Sequence[np.ndarray]
    structure_constants: np.ndarray
    inner_product: np.ndarray
    matrix_dim: int = 0
    discrete_samples: Sequence[np.ndarray] = ()
    constraint: Callable[[np.ndarray], float] | None = _orthogonal_constraint

    def __post_init__(self):
        self.basis = [np.asarray(b, dtype=float) for b in self.basis]
        self.structure_constants = np.asarray(self.structure_constants, dtype=float)
        self.inner_product = np.asarray(self.inner_product, dtype=float)
        if len(self.basis) != self.dim:
            raise DimensionMismatchError("algebra basis size", self.dim, len(self.basis))
        if self.dim > 0:
            self.matrix_dim = self.basis[0].shape[0]
        elif self.matrix_dim <= 0:
            self.matrix_dim = 1
        for b in self.basis:
            if b.shape != (self.matrix_dim, self.matrix_dim):
                raise DimensionMismatchError(
                    "basis matrix shape", (self.matrix_dim, self.matrix_dim), b.shape
                )
        if self.structure_constants.shape != (self.dim, self.dim, self.dim):
            raise DimensionMismatchError(
                "structure constants shape",
                (self.dim, self.dim, self.dim),
                self.structure_constants.shape,
            )
        if self.inner_product.shape != (self.dim, self.dim):
            raise DimensionMismatchError(
                "inner product shape", (self.dim, self.dim), self.inner_product.shape
            )
        self._validate_structure()
        self.discrete_samples = [np.asarray(g, dtype=float) for g in self.discrete_samples]

    def _validate_structure(self):
        c = self.structure_constants
        if c.size:
            anti = np.max(np.abs(c + np.transpose(c, (1, 0, 2))))
            if anti > _STRUCTURE_TOL:
                raise StructureConstantError(
                    f"structure constants not antisymmetric (max {anti:.2e})"
                )
            jac = np.einsum("ijm,mkl->ijkl", c, c)
            jacobi = jac + np.transpose(jac, (1, 2, 0, 3)) + np.transpose(jac, (2, 0, 1, 3))
            worst = np.max(np.abs(jacobi))
            if worst > _STRUCTURE_TOL:
                raise StructureConstantError(f"Jacobi identity fails (max {worst:.2e})")
            for i in range(self.dim):
                for j in range(self.dim):
                    comm = self.basis[i] @ self.basis[j] - self.basis[j] @ self.basis[i]
                    expand = sum(c[i, j, k] * self.basis[k] for k in range(self.dim))
                    if np.max(np.abs(comm - expand)) > _STRUCTURE_TOL:
                        raise StructureConstantError(
                            f"bracket of basis elements ({i},{j}) disagrees with "
                            "structure constants"
                        )
        w = self.inner_product
        if w.size:
            if np.max(np.abs(w - w.T)) > _STRUCTURE_TOL:
                raise StructureConstantError("inner product not symmetric")
            if np.min(np.linalg.eigvalsh(w)) <= 0:
                raise StructureConstantError("inner product not positive definite")

    @cached_property
    def _basis_stack(self) -> np.ndarray:
        # columns are vectorised basis matrices, shape (matrix_dim**2, dim)
        if self.dim == 0:
            return np.zeros((self.matrix_dim**2, 0))
        return np.stack([b.ravel() for b in self.basis], axis=1)

    @cached_property
    def _basis_pinv(self) -> np.ndarray:
        return np.linalg.pinv(self._basis_stack)

    @cached_property
    def _w_sqrt(self) -> np.ndarray:
        if self.dim == 0:
            return np.zeros((0, 0))
        vals, vecs = np.linalg.eigh(self.inner_product)
        return vecs @ np.diag(np.sqrt(vals)) @ vecs.T

    @cached_property
    def _w_inv_sqrt(self) -> np.ndarray:
        if self.dim == 0:
            return np.zeros((0, 0))
        vals, vecs = np.linalg.eigh(self.inner_product)
        return vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.T

    @cached_property
    def _w_inv(self) -> np.ndarray:
        if self.dim == 0:
            return np.zeros((0, 0))
        return np.linalg.inv(self.inner_product)

    def identity(self) -> "GroupElement":
        return GroupElement(self, np.eye(self.matrix_dim))

    def algebra_matrix(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        m = np.zeros((self.matrix_dim, self.matrix_dim))
        for c, b in zip(coeffs, self.basis):
            m += c * b
        return m


@dataclass
class AlgebraElement:
    group: LieGroupSpec
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if self.coeffs.shape != (self.group.dim,):
            raise DimensionMismatchError(
                "algebra coefficients", (self.group.dim,), self.coeffs.shape
            )

    def matrix(self) -> np.ndarray:
        return self.group.algebra_matrix(self.coeffs)


@dataclass
class DualElement:
    group: LieGroupSpec
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if self.coeffs.shape != (self.group.dim,):
            raise DimensionMismatchError(
                "dual coefficients", (self.group.dim,), self.coeffs.shape
            )


@dataclass
class GroupElement:
    group: LieGroupSpec
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        d = self.group.matrix_dim
        if self.matrix.shape != (d, d):
            raise DimensionMismatchError("group matrix shape", (d, d), self.matrix.shape)
        if self.group.constraint is not None:
            residual = self.group.constraint(self.matrix)
            if residual > _GROUP_TOL:
                raise GroupConstraintError(
                    f"matrix violates {self.group.name} constraints "
                    f"(residual {residual:.2e})"
                )

    def inverse(self) -> "GroupElement":
        return GroupElement(self.group, np.linalg.inv(self.matrix))


def _same_group(a, b, what: str):
    if a.group is not b.group and a.group.name != b.group.name:
        raise DimensionMismatchError(what, a.group.name, b.group.name)
    if a.group.dim != b.group.dim:
        raise DimensionMismatchError(what, a.group.dim, b.group.dim)


def bracket(zeta: AlgebraElement, eta: AlgebraElement) -> AlgebraElement:
    """Lie bracket through the structure constants."""
    _same_group(zeta, eta, "bracket operands")
    g = zeta.group
    out = np.einsum("ijk,i,j->k", g.structure_constants, zeta.coeffs, eta.coeffs)
    return AlgebraElement(g, out)


def exponential(zeta: AlgebraElement) -> GroupElement:
    """Matrix exponential of an algebra element (scaling and squaring)."""
    g = zeta.group
    if g.dim == 0:
        return g.identity()
    return GroupElement(g, scipy.linalg.expm(zeta.matrix()))


def expand_in_basis(group: LieGroupSpec, matrix: np.ndarray) -> np.ndarray:
    """Coefficients of ``matrix`` in the algebra basis, least squares.

    Raises when the residual exceeds 1e-9 relative to the matrix size, which
    means the matrix does not lie in the algebra.
    """
    if group.dim == 0:
        if np.max(np.abs(matrix)) > _EXPANSION_TOL:
            raise BasisExpansionError("nonzero matrix in zero-dimensional algebra")
        return np.zeros(0)
    coeffs = group._basis_pinv @ matrix.ravel()
    residual = np.linalg.norm(group._basis_stack @ coeffs - matrix.ravel())
    scale = max(1.0, float(np.linalg.norm(matrix)))
    if residual > _EXPANSION_TOL * scale:
        raise BasisExpansionError(
            f"matrix not in the span of the {group.name} basis "
            f"(residual {residual:.2e})"
        )
    return coeffs


def adjoint(g: GroupElement, zeta: AlgebraElement) -> AlgebraElement:
    """Adjoint action, conjugation of the algebra matrix by the group matrix."""
    _same_group(g, zeta, "adjoint operands")
    spec = zeta.group
    if spec.dim == 0:
        return AlgebraElement(spec, np.zeros(0))
    conj = g.matrix @ zeta.matrix() @ np.linalg.inv(g.matrix)
    return AlgebraElement(spec, expand_in_basis(spec, conj))


def adjoint_matrix(group: LieGroupSpec, g: GroupElement) -> np.ndarray:
    """Matrix of the adjoint action on algebra coefficients."""
    cols = [adjoint(g, AlgebraElement(group, e)).coeffs for e in np.eye(group.dim)]
    if not cols:
        return np.zeros((0, 0))
    return np.stack(cols, axis=1)


def coadjoint_group(g: GroupElement, alpha: DualElement) -> DualElement:
    """Dual pairing transpose of the adjoint: <out, zeta> = <alpha, Ad_g zeta>."""
    _same_group(g, alpha, "coadjoint operands")
    spec = alpha.group
    a = adjoint_matrix(spec, g)
    return DualElement(spec, a.T @ alpha.coeffs)


def coadjoint_algebra(zeta: AlgebraElement, mu: DualElement) -> DualElement:
    """Infinitesimal coadjoint map, <out, eta> = -<mu, [zeta, eta]>."""
    _same_group(zeta, mu, "coadjoint operands")
    g = zeta.group
    if g.dim == 0:
        return DualElement(g, np.zeros(0))
    out = -np.einsum("ijk,i,k->j", g.structure_constants, zeta.coeffs, mu.coeffs)
    return DualElement(g, out)


def coadjoint_map_matrix(group: LieGroupSpec, mu: np.ndarray) -> np.ndarray:
    """Matrix of ``zeta -> coadjoint_algebra(zeta, mu)`` on coefficients."""
    mu = np.asarray(mu, dtype=float)
    if group.dim == 0:
        return np.zeros((0, 0))
    return -np.einsum("ijk,k->ji", group.structure_constants, mu)


def pairing(alpha: DualElement, zeta: AlgebraElement) -> float:
    _same_group(alpha, zeta, "pairing operands")
    return float(alpha.coeffs @ zeta.coeffs)


def algebra_norm(zeta: AlgebraElement) -> float:
    w = zeta.group.inner_product
    return float(np.sqrt(zeta.coeffs @ w @ zeta.coeffs)) if zeta.group.dim else 0.0


def dual_norm(alpha: DualElement) -> float:
    w_inv = alpha.group._w_inv
    return float(np.sqrt(alpha.coeffs @ w_inv @ alpha.coeffs)) if alpha.group.dim else 0.0


def null_space(a: np.ndarray, rtol: float = 1e-8, atol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of the null space of ``a``, columns.

    The cutoff is ``rtol`` times the largest singular value, or ``atol`` when
    the matrix is numerically zero.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    m, n = a.shape
    if n == 0:
        return np.zeros((0, 0))
    if m == 0 or not np.any(a):
        return np.eye(n)
    _, s, vt = np.linalg.svd(a)
    cutoff = max(rtol * s[0], atol) if s.size else atol
    rank = int(np.sum(s > cutoff))
    return vt[rank:].T


def momentum_isotropy_algebra(
    group: LieGroupSpec, mu: DualElement | np.ndarray, tol_null: float = 1e-8
) -> list[AlgebraElement]:
    """Orthonormal basis of the subalgebra whose coadjoint map kills ``mu``.

    Membership criterion: the dual norm of ``coadjoint_algebra(zeta, mu)`` is
    at most ``tol_null`` times the dual norm of ``mu`` times the algebra norm
    of ``zeta``.  For ``mu = 0`` this is the whole algebra.  The basis is
    orthonormal with respect to the algebra inner product.
    """
    mu_c = mu.coeffs if isinstance(mu, DualElement) else np.asarray(mu, dtype=float)
    if group.dim == 0:
        return []
    mu_norm = dual_norm(DualElement(group, mu_c))
    if mu_norm == 0.0:
        cols = group._w_inv_sqrt
        return [AlgebraElement(group, cols[:, j]) for j in range(group.dim)]
    m = coadjoint_map_matrix(group, mu_c)
    weighted = group._w_inv_sqrt @ m @ group._w_inv_sqrt
    _, s, vt = np.linalg.svd(weighted)
    keep = s <= tol_null * mu_norm
    rank = int(np.sum(~keep))
    raw = vt[rank:].T
    cols = group._w_inv_sqrt @ raw
    return [AlgebraElement(group, cols[:, j]) for j in range(cols.shape[1])]


def orthonormalize_in_metric(group: LieGroupSpec, vectors: np.ndarray) -> np.ndarray:
    """Orthonormalize algebra coefficient columns in the group inner product."""
    if vectors.size == 0:
        return vectors.reshape(group.dim, 0)
    y = group._w_sqrt @ vectors
    q, r = np.linalg.qr(y)
    keep = np.abs(np.diag(r)) > 1e-12 * max(1.0, float(np.max(np.abs(r))))
    return group._w_inv_sqrt @ q[:, keep]


@dataclass
class InvarianceReport:
    group: str
    n_samples: int
    max_adjoint_violation: float
    max_coadjoint_violation: float
    max_pairing_violation: float
    worst_sample: np.ndarray | None
    tol: float

    @property
    def ok(self) -> bool:
        worst = max(
            self.max_adjoint_violation,
            self.max_coadjoint_violation,
            self.max_pairing_violation,
        )
        return worst <= self.tol


def check_invariant_inner_products(
    group: LieGroupSpec, n_samples: int = 32, seed: int = 0, tol: float = 1e-8
) -> InvarianceReport:
    """Verify the inner product is invariant under sampled adjoint actions.

    Samples group elements as exponentials of random algebra elements plus
    any discrete samples, and checks that algebra norms, dual norms and the
    pairing are preserved.  Returns a report naming the worst sample; does
    not raise.
    """
    rng = np.random.default_rng(seed)
    worst = (0.0, 0.0, 0.0)
    worst_sample = None
    if group.dim == 0:
        return InvarianceReport(group.name, 0, 0.0, 0.0, 0.0, None, tol)
    elements = []
    for _ in range(n_samples):
        elements.append(exponential(AlgebraElement(group, rng.normal(size=group.dim))))
    elements.extend(GroupElement(group, m) for m in group.discrete_samples)
    for g in elements:
        a = adjoint_matrix(group, g)
        w = group.inner_product
        adj_violation = float(np.max(np.abs(a.T @ w @ a - w)))
        w_inv = group._w_inv
        coadj_violation = float(np.max(np.abs(a @ w_inv @ a.T - w_inv)))
        zeta = rng.normal(size=group.dim)
        alpha = rng.normal(size=group.dim)
        lhs = (a.T @ alpha) @ (np.linalg.solve(a, zeta))
        pair_violation = abs(lhs - alpha @ zeta)
        score = max(adj_violation, coadj_violation, pair_violation)
        if score > max(worst):
            worst_sample = g.matrix
        worst = (
            max(worst[0], adj_violation),
            max(worst[1], coadj_violation),
            max(worst[2], pair_violation),
        )
    return InvarianceReport(
        group.name, len(elements), worst[0], worst[1], worst[2], worst_sample, tol
    )


def _hat(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _so3() -> LieGroupSpec:
    basis = [_hat(e) for e in np.eye(3)]
    c = np.zeros((3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                c[i, j, k] = (
                    1.0 if (i, j, k) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)) else 0.0
                )
                if (i, j, k) in ((1, 0, 2), (2, 1, 0), (0, 2, 1)):
                    c[i, j, k] = -1.0
    return LieGroupSpec("so3", 3, basis, c, np.eye(3))


def _rotation_generator_2d() -> np.ndarray:
    return np.array([[0.0, -1.0], [1.0, 0.0]])


def _torus(k: int) -> LieGroupSpec:
    j = _rotation_generator_2d()
    basis = []
    for i in range(k):
        b = np.zeros((2 * k, 2 * k))
        b[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = j
        basis.append(b)
    return LieGroupSpec(
        f"torus{k}", k, basis, np.zeros((k, k, k)), np.eye(k)
    )


def builtin_group(name: str) -> LieGroupSpec:
    """Construct one of the built-in groups.

    ``trivial`` is the one-element group, ``so3`` the rotation group with the
    cross-product basis, ``torus1`` and ``torus2`` are products of planar
    rotation blocks.  All use the Euclidean inner product on the algebra.
    """
    if name == "trivial":
        return LieGroupSpec(
            "trivial", 0, [], np.zeros((0, 0, 0)), np.zeros((0, 0)), matrix_dim=1
        )
    if name == "so3":
        return _so3()
    if name == "torus1":
        return _torus(1)
    if name == "torus2":
        return _torus(2)
    raise KeyError(f"no built-in group named {name!r}")
