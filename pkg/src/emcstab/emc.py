"""Energy-momentum-Casimir stability certificates.

Pipeline: pick a generator representative compatible with the isotropy of the
equilibrium point (``project_generator``), choose multipliers making the point
critical (``solve_lambda``), restrict the second variation to the joint kernel
of the conserved-quantity derivatives (``constraint_space``,
``restricted_hessian_classify``), and when a definite branch emerges, make
f = sign*f1 + sigma*f2 definite transverse to the group orbit
(``select_sigma``).  ``certify`` runs the whole thing, searching the available
generator and multiplier freedom for the best definiteness margin, and
``liapunov_eval`` evaluates the resulting function so trajectories can be
monitored against it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from . import lie
from .errors import (
    InvariantInnerProductError,
    OutOfNeighborhoodError,
    SigmaCapError,
    StructuralError,
)
from .phase import PhaseSpaceSystem, differentiate, infinitesimal_generator
from .releq import RelativeEquilibrium, point_isotropy_algebra

VERDICTS = (
    "CertifiedStable",
    "Inconclusive_Indefinite",
    "Inconclusive_KernelMismatch",
    "Failed_EM1",
    "Failed_EM3",
    "Failed_SigmaCap",
)

_ORBIT_IN_K_TOL = 1e-8
_EM3_TOL = 1e-8
_GEN_RANK_TOL = 1e-10


@dataclass(frozen=True)
class EmcTolerances:
    """Clustering and acceptance thresholds for the certificate pipeline.

    tol_zero and tol_pos are relative to the spectral radius of the matrix
    they are applied to; tol_angle is absolute (radians); tol_crit is
    relative to the gradient scale at the equilibrium.
    """

    tol_zero: float = 1e-7
    tol_pos: float = 1e-6
    tol_angle: float = 1e-4
    tol_crit: float = 1e-8

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class EmcProblem:
    sys: PhaseSpaceSystem
    re: RelativeEquilibrium
    tolerances: EmcTolerances = field(default_factory=EmcTolerances)
    sigma_max: float = 1e8
    xi_search_budget: int = 48
    tube_radius: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_max < 1:
            raise ValueError("sigma_max must be at least 1")
        if self.xi_search_budget < 1:
            raise ValueError("xi_search_budget must be positive")
        if not self.tube_radius > 0:
            raise ValueError("tube_radius must be positive")


@dataclass
class EmcCertificate:
    """Outcome of a certification run, serializable to a flat JSON document."""

    system: str
    parameters: dict
    z_e: list
    mu: list
    xi_used: list
    lam: list
    lambda_nullspace_dim: int
    sign_branch: Optional[str]
    sigma: Optional[float]
    K_dim: int
    orbit_dim_in_K: int
    spectrum: list
    zero_cluster_dim: int
    kernel_principal_angle: float
    verdict: str
    criticality_residual: float
    em3_violation: float
    margin: float
    slice_spectrum_min: Optional[float]
    tolerances: EmcTolerances
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.sign_branch not in (None, "positive", "negative"):
            raise ValueError(f"unknown sign branch {self.sign_branch!r}")

    @property
    def sign(self) -> float:
        if self.sign_branch == "negative":
            return -1.0
        return 1.0

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "emc_certificate",
            "system": self.system,
            "parameters": dict(self.parameters),
            "z_e": [float(v) for v in self.z_e],
            "mu": [float(v) for v in self.mu],
            "xi_used": [float(v) for v in self.xi_used],
            "lambda": [float(v) for v in self.lam],
            "lambda_nullspace_dim": int(self.lambda_nullspace_dim),
            "sign_branch": self.sign_branch,
            "sigma": None if self.sigma is None else float(self.sigma),
            "K_dim": int(self.K_dim),
            "orbit_dim_in_K": int(self.orbit_dim_in_K),
            "spectrum": [float(v) for v in self.spectrum],
            "zero_cluster_dim": int(self.zero_cluster_dim),
            "kernel_principal_angle": float(self.kernel_principal_angle),
            "verdict": self.verdict,
            "criticality_residual": float(self.criticality_residual),
            "em3_violation": float(self.em3_violation),
            "margin": float(self.margin),
            "slice_spectrum_min": None
            if self.slice_spectrum_min is None
            else float(self.slice_spectrum_min),
            "tolerances": asdict(self.tolerances),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "EmcCertificate":
        return cls(
            system=doc["system"],
            parameters=doc["parameters"],
            z_e=doc["z_e"],
            mu=doc["mu"],
            xi_used=doc["xi_used"],
            lam=doc["lambda"],
            lambda_nullspace_dim=doc["lambda_nullspace_dim"],
            sign_branch=doc["sign_branch"],
            sigma=doc["sigma"],
            K_dim=doc["K_dim"],
            orbit_dim_in_K=doc["orbit_dim_in_K"],
            spectrum=doc["spectrum"],
            zero_cluster_dim=doc["zero_cluster_dim"],
            kernel_principal_angle=doc["kernel_principal_angle"],
            verdict=doc["verdict"],
            criticality_residual=doc["criticality_residual"],
            em3_violation=doc["em3_violation"],
            margin=doc["margin"],
            slice_spectrum_min=doc["slice_spectrum_min"],
            tolerances=EmcTolerances(**doc["tolerances"]),
            diagnostics=doc.get("diagnostics", {}),
        )


# ---------------------------------------------------------------------------
# augmented function and its derivatives


def emc_value(sys: PhaseSpaceSystem, z, lam, xi: lie.AlgebraElement) -> float:
    """H(z) - <J(z), xi> + <lam, C(z)>."""
    z = sys.point(z)
    lam = np.asarray(lam, dtype=float)
    value = float(sys.hamiltonian(z))
    if sys.group.dim:
        value -= float(np.atleast_1d(sys.momentum_map(z)) @ xi.coeffs)
    if sys.dim_conserved:
        value += float(np.atleast_1d(sys.casimirs(z)) @ lam)
    return value


def emc_gradient(sys: PhaseSpaceSystem, z, lam, xi: lie.AlgebraElement) -> np.ndarray:
    grad = differentiate(sys, "H", z, 1).copy()
    if sys.group.dim:
        grad -= differentiate(sys, "J", z, 1).T @ xi.coeffs
    if sys.dim_conserved:
        grad += differentiate(sys, "C", z, 1).T @ np.asarray(lam, dtype=float)
    return grad


def emc_hessian(sys: PhaseSpaceSystem, z, lam, xi: lie.AlgebraElement) -> np.ndarray:
    hess = differentiate(sys, "H", z, 2).copy()
    if sys.group.dim:
        hess -= np.einsum("a,aij->ij", xi.coeffs, differentiate(sys, "J", z, 2))
    if sys.dim_conserved:
        lam = np.asarray(lam, dtype=float)
        hess += np.einsum("a,aij->ij", lam, differentiate(sys, "C", z, 2))
    return hess


# ---------------------------------------------------------------------------
# generator representative (EM3)


def _isotropy_fixing_samples(sys, z_e, tol=1e-9):
    scale = max(1.0, float(np.linalg.norm(z_e)))
    return [
        g
        for g in sys.group.discrete_samples
        if np.linalg.norm(sys.action(g, z_e) - z_e) <= tol * scale
    ]


def _em3_violation(sys, z_e, iso, xi: lie.AlgebraElement) -> float:
    group = sys.group
    scale = max(1.0, lie.algebra_norm(xi))
    worst = 0.0
    for zeta in iso:
        worst = max(worst, lie.algebra_norm(lie.bracket(zeta, xi)) / scale)
    for g in _isotropy_fixing_samples(sys, z_e):
        moved = lie.adjoint(g, xi)
        worst = max(worst, lie.algebra_norm(
            lie.AlgebraElement(group, moved.coeffs - xi.coeffs)) / scale)
    return worst


def project_generator(
    sys: PhaseSpaceSystem,
    z_e,
    xi: lie.AlgebraElement,
    n_samples: int = 16,
    seed: int = 0,
    tol: float = _EM3_TOL,
):
    """Split off the isotropy component of the generator and test compatibility.

    Returns (xi_perp, em3_ok, violation).  The projection is orthogonal in
    the algebra inner product, which must itself be invariant under the
    isotropy subgroup for the complement to be well defined; that invariance
    is spot-checked on sampled elements before projecting.
    """
    group = sys.group
    z_e = sys.point(z_e)
    iso = point_isotropy_algebra(sys, z_e)
    if not iso:
        return xi, True, 0.0

    w = group.inner_product
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n_samples):
        coeffs = np.zeros(group.dim)
        mix = rng.standard_normal(len(iso))
        for c, zeta in zip(mix, iso):
            coeffs += c * zeta.coeffs
        samples.append(lie.exponential(lie.AlgebraElement(group, coeffs)))
    samples.extend(_isotropy_fixing_samples(sys, z_e))
    for g in samples:
        a = lie.adjoint_matrix(group, g)
        if np.linalg.norm(a.T @ w @ a - w) > 1e-8 * max(1.0, np.linalg.norm(w)):
            raise InvariantInnerProductError(
                "algebra inner product is not invariant under the isotropy "
                "subgroup of the equilibrium; supply an invariant product "
                "(one exists because that subgroup is compact)"
            )

    q = np.column_stack([zeta.coeffs for zeta in iso])
    gram = q.T @ w @ q
    comp = xi.coeffs - q @ np.linalg.solve(gram, q.T @ w @ xi.coeffs)
    xi_perp = lie.AlgebraElement(group, comp)
    violation = _em3_violation(sys, z_e, iso, xi_perp)
    return xi_perp, violation <= tol, violation


def _em3_repair(sys, z_e, iso, xi_perp: lie.AlgebraElement):
    """Least-squares shift of the generator inside the isotropy algebra that
    minimizes the bracket defect.  Returns the shifted generator."""
    group = sys.group
    q = np.column_stack([zeta.coeffs for zeta in iso])
    rows = []
    rhs = []
    for zeta in iso:
        ad = np.einsum("ijk,i->kj", group.structure_constants, zeta.coeffs)
        rows.append(ad @ q)
        rhs.append(-ad @ xi_perp.coeffs)
    a = np.vstack(rows)
    b = np.concatenate(rhs)
    t, *_ = np.linalg.lstsq(a, b, rcond=None)
    return lie.AlgebraElement(group, xi_perp.coeffs + q @ t)


# ---------------------------------------------------------------------------
# multipliers (EM1)


def solve_lambda(sys: PhaseSpaceSystem, z_e, xi: lie.AlgebraElement):
    """Minimal-norm multipliers making z_e critical for the augmented function.

    Returns (lam, residual, nullspace_dim) where residual is the gradient
    norm after the solve and nullspace_dim counts the multiplier directions
    that leave criticality intact.  A large residual is reported, not raised,
    so callers can try other generators.
    """
    z_e = sys.point(z_e)
    rhs = -differentiate(sys, "H", z_e, 1)
    if sys.group.dim:
        rhs = rhs + differentiate(sys, "J", z_e, 1).T @ xi.coeffs
    if sys.dim_conserved == 0:
        return np.zeros(0), float(np.linalg.norm(rhs)), 0
    dct = differentiate(sys, "C", z_e, 1).T
    lam, *_ = np.linalg.lstsq(dct, rhs, rcond=None)
    residual = float(np.linalg.norm(dct @ lam - rhs))
    svals = np.linalg.svd(dct, compute_uv=False)
    rank = int(np.sum(svals > 1e-10 * max(1.0, svals[0])))
    return lam, residual, sys.dim_conserved - rank


# ---------------------------------------------------------------------------
# subspaces


def constraint_space(sys: PhaseSpaceSystem, z_e, tol_null: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of ker DJ(z_e) ∩ ker DC(z_e), shape (n, K_dim)."""
    z_e = sys.point(z_e)
    rows = []
    if sys.group.dim:
        rows.append(differentiate(sys, "J", z_e, 1))
    if sys.dim_conserved:
        rows.append(differentiate(sys, "C", z_e, 1))
    if not rows:
        return np.eye(sys.n)
    return lie.null_space(np.vstack(rows), rtol=tol_null)


def orbit_tangent_basis(sys: PhaseSpaceSystem, z_e, subalgebra) -> np.ndarray:
    """Orthonormal basis of the tangent to the subalgebra orbit at z_e.

    Directions whose generator vanishes at z_e drop out, so the result can
    be lower-dimensional than the subalgebra (or empty)."""
    z_e = sys.point(z_e)
    if not subalgebra:
        return np.zeros((sys.n, 0))
    vs = np.column_stack([infinitesimal_generator(sys, zeta, z_e) for zeta in subalgebra])
    u, s, _ = np.linalg.svd(vs, full_matrices=False)
    scale = max(s[0], 1.0) if s.size else 1.0
    keep = s > _GEN_RANK_TOL * scale
    return u[:, keep]


def _orthogonal_complement(columns: np.ndarray, n: int) -> np.ndarray:
    if columns.shape[1] == 0:
        return np.eye(n)
    return lie.null_space(columns.T, rtol=1e-12)


# ---------------------------------------------------------------------------
# restricted second variation (EM2)


@dataclass
class HessianClassification:
    spectrum: np.ndarray
    scale: float
    zero_cluster_dim: int
    orbit_dim_in_K: int
    kernel_principal_angle: float
    sign_branch: Optional[str]
    definite_ok: bool
    kernel_ok: bool
    margin: float


def _project_orbit_into_K(k_basis: np.ndarray, orbit_basis: np.ndarray) -> np.ndarray:
    """Coordinates of the orbit tangent inside K; fails loudly if it pokes out."""
    if orbit_basis.shape[1] == 0:
        return np.zeros((k_basis.shape[1], 0))
    inside = k_basis @ (k_basis.T @ orbit_basis)
    defect = float(np.max(np.linalg.norm(orbit_basis - inside, axis=0)))
    if defect > _ORBIT_IN_K_TOL:
        raise StructuralError(
            "group-orbit tangent is not contained in the constraint kernel "
            f"(defect {defect:.3e}); momentum map or isotropy algebra is wrong"
        )
    coords = k_basis.T @ orbit_basis
    u, s, _ = np.linalg.svd(coords, full_matrices=False)
    return u[:, s > 1e-10 * max(1.0, s[0] if s.size else 1.0)]


def _spectral_margin(h_k: np.ndarray, orbit_in_k: np.ndarray, ref: float) -> float:
    """Definiteness margin of h_k transverse to the orbit directions,
    normalized and sign-agnostic: positive iff definite of either sign."""
    comp = _orthogonal_complement(orbit_in_k, h_k.shape[0])
    if comp.shape[1] == 0:
        return 0.0
    evals = np.linalg.eigvalsh(comp.T @ h_k @ comp)
    return float(max(evals[0], -evals[-1]) / ref)


def restricted_hessian_classify(
    sys: PhaseSpaceSystem,
    z_e,
    lam,
    xi: lie.AlgebraElement,
    k_basis: np.ndarray,
    orbit_basis: np.ndarray,
    tolerances: EmcTolerances,
) -> HessianClassification:
    """Eigenstructure of the augmented Hessian on K and the EM2 checks.

    The numerically-zero eigenvalue cluster must coincide, as a subspace,
    with the orbit tangent; remaining eigenvalues must share a strict sign.
    """
    z_e = sys.point(z_e)
    d2 = emc_hessian(sys, z_e, lam, xi)
    k_dim = k_basis.shape[1]
    orbit_in_k = _project_orbit_into_K(k_basis, orbit_basis)
    orbit_dim = orbit_in_k.shape[1]
    if k_dim == 0:
        return HessianClassification(
            spectrum=np.zeros(0),
            scale=1.0,
            zero_cluster_dim=0,
            orbit_dim_in_K=orbit_dim,
            kernel_principal_angle=0.0,
            sign_branch="positive",
            definite_ok=True,
            kernel_ok=orbit_dim == 0,
            margin=0.0,
        )
    h_k = k_basis.T @ d2 @ k_basis
    h_k = 0.5 * (h_k + h_k.T)
    evals, evecs = np.linalg.eigh(h_k)
    # the reference scale keeps the relative tolerances meaningful even when
    # the restricted block degenerates to (near) zero while the ambient
    # Hessian does not
    d2_radius = float(np.linalg.norm(d2, 2)) if sys.n else 0.0
    ref = max(float(np.max(np.abs(evals))), 1e-6 * max(1.0, d2_radius))
    zero_mask = np.abs(evals) <= tolerances.tol_zero * ref
    zero_dim = int(np.sum(zero_mask))

    nonzero = evals[~zero_mask]
    thr = tolerances.tol_pos * ref
    if nonzero.size == 0:
        sign_branch = "positive"
        definite_ok = True
    elif np.all(nonzero > thr):
        sign_branch = "positive"
        definite_ok = True
    elif np.all(nonzero < -thr):
        sign_branch = "negative"
        definite_ok = True
    else:
        sign_branch = None
        definite_ok = False

    if zero_dim == orbit_dim:
        if zero_dim == 0:
            angle = 0.0
        else:
            overlap = evecs[:, zero_mask].T @ orbit_in_k
            svals = np.clip(np.linalg.svd(overlap, compute_uv=False), -1.0, 1.0)
            angle = float(np.arccos(np.min(svals)))
        kernel_ok = angle <= tolerances.tol_angle
    else:
        angle = float(np.pi / 2)
        kernel_ok = False

    return HessianClassification(
        spectrum=evals,
        scale=ref,
        zero_cluster_dim=zero_dim,
        orbit_dim_in_K=orbit_dim,
        kernel_principal_angle=angle,
        sign_branch=sign_branch,
        definite_ok=definite_ok,
        kernel_ok=kernel_ok,
        margin=_spectral_margin(h_k, orbit_in_k, ref),
    )


# ---------------------------------------------------------------------------
# sigma (slice definiteness of f)


def _penalty_hessian(sys: PhaseSpaceSystem, z_e) -> np.ndarray:
    """Second derivative at z_e of the momentum/conserved penalty f2.

    Both residuals vanish at z_e, so only the Gauss-Newton term survives."""
    d2 = np.zeros((sys.n, sys.n))
    if sys.group.dim:
        dj = differentiate(sys, "J", z_e, 1)
        d2 += 2.0 * dj.T @ sys.group._w_inv @ dj
    if sys.dim_conserved:
        dc = differentiate(sys, "C", z_e, 1)
        d2 += 2.0 * dc.T @ sys.inner_product_conserved @ dc
    return d2


def select_sigma(
    sys: PhaseSpaceSystem,
    re: RelativeEquilibrium,
    lam,
    xi: lie.AlgebraElement,
    sign_branch: str,
    tolerances: EmcTolerances | None = None,
    sigma_max: float = 1e8,
):
    """Smallest-overshoot sigma making sign*f1 + sigma*f2 definite off the orbit.

    The minimum eigenvalue on the slice is monotone in sigma (the penalty
    Hessian is positive semi-definite), so doubling finds a bracket and
    bisection finds the threshold; 2x the threshold is returned to leave a
    working margin.  Raises SigmaCapError when no sigma up to sigma_max works.
    """
    tolerances = tolerances or EmcTolerances()
    z_e = sys.point(re.z_e)
    sign = -1.0 if sign_branch == "negative" else 1.0
    gmu = lie.momentum_isotropy_algebra(sys.group, re.mu)
    orbit = orbit_tangent_basis(sys, z_e, gmu)
    slice_basis = _orthogonal_complement(orbit, sys.n)
    d2f1 = sign * emc_hessian(sys, z_e, lam, xi)
    d2f2 = _penalty_hessian(sys, z_e)
    a1 = slice_basis.T @ (d2f1 + d2f2) @ slice_basis
    ref = max(float(np.linalg.norm(a1, 2)), 1e-12)
    thr = tolerances.tol_pos * ref

    def min_eig(sigma: float) -> float:
        a = slice_basis.T @ (d2f1 + sigma * d2f2) @ slice_basis
        return float(np.linalg.eigvalsh(0.5 * (a + a.T))[0])

    if min_eig(1.0) > thr:
        return 1.0, min_eig(1.0)
    lo, hi = 1.0, 2.0
    while min_eig(hi) <= thr:
        lo = hi
        hi *= 2.0
        if hi > sigma_max:
            raise SigmaCapError(sigma_max, min_eig(sigma_max))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if min_eig(mid) > thr:
            hi = mid
        else:
            lo = mid
    sigma = min(2.0 * hi, sigma_max)
    return sigma, min_eig(sigma)


# ---------------------------------------------------------------------------
# velocity map and the monitored function


@dataclass
class OrbitFit:
    """Nearest point of the subalgebra orbit through z_e, in exp coordinates."""

    eta: np.ndarray
    distance: float
    locally_minimal: bool


def nearest_orbit_point(sys: PhaseSpaceSystem, z_e, basis, z) -> OrbitFit:
    """Minimize |exp(eta).z_e - z| over eta in the span of basis.

    Coarse periodic seeding plus a simplex refinement; the landscape is
    periodic for compact directions, so the grid keeps the local solver out
    of the wrong well once z wanders along the orbit.
    """
    z_e = sys.point(z_e)
    z = sys.point(z)
    d = len(basis)
    if d == 0:
        return OrbitFit(np.zeros(0), float(np.linalg.norm(z - z_e)), True)
    q = np.column_stack([zeta.coeffs for zeta in basis])
    gen_norms = [
        float(np.linalg.norm(infinitesimal_generator(sys, zeta, z_e))) for zeta in basis
    ]
    if max(gen_norms) <= 1e-12 * max(1.0, float(np.linalg.norm(z_e))):
        # the orbit through z_e is the single point z_e
        return OrbitFit(np.zeros(d), float(np.linalg.norm(z - z_e)), True)

    def objective(t: np.ndarray) -> float:
        g = lie.exponential(lie.AlgebraElement(sys.group, q @ t))
        return float(np.sum((sys.action(g, z_e) - z) ** 2))

    per_dim = {1: 16, 2: 8}.get(d, 5)
    grid_1d = np.linspace(-np.pi, np.pi, per_dim, endpoint=False)
    seeds = [np.zeros(d)]
    mesh = np.meshgrid(*([grid_1d] * d), indexing="ij")
    seeds.extend(np.stack([m.ravel() for m in mesh], axis=1))
    best_t, best_val = None, np.inf
    for t0 in seeds:
        val = objective(np.asarray(t0, dtype=float))
        if val < best_val:
            best_t, best_val = np.asarray(t0, dtype=float), val
    res = optimize.minimize(
        objective,
        best_t,
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 2000},
    )
    t_star = res.x if res.fun <= best_val else best_t
    f_star = min(float(res.fun), best_val)
    locally_minimal = True
    probe = 1e-6 * max(1.0, float(np.linalg.norm(t_star)))
    for i in range(d):
        for s in (-1.0, 1.0):
            tp = t_star.copy()
            tp[i] += s * probe
            if objective(tp) < f_star - 1e-10 * (1.0 + f_star):
                locally_minimal = False
    return OrbitFit(q @ t_star, float(np.sqrt(max(f_star, 0.0))), locally_minimal)


def patrick_velocity(
    sys: PhaseSpaceSystem,
    re: RelativeEquilibrium,
    z,
    tube_radius: float = 1.0,
    gmu=None,
) -> lie.AlgebraElement:
    """Transport the generator to z along the nearest orbit point.

    Only defined near the orbit; outside the tube the transported generator
    is meaningless and an error is raised instead.
    """
    if gmu is None:
        gmu = lie.momentum_isotropy_algebra(sys.group, re.mu)
    fit = nearest_orbit_point(sys, re.z_e, gmu, z)
    if fit.distance > tube_radius:
        raise OutOfNeighborhoodError(
            f"point is {fit.distance:.3e} from the orbit, outside the "
            f"tube of radius {tube_radius:g}"
        )
    if not fit.locally_minimal:
        raise OutOfNeighborhoodError("orbit projection did not reach a local minimum")
    if len(gmu) == 0:
        return re.xi
    g = lie.exponential(lie.AlgebraElement(sys.group, fit.eta))
    return lie.adjoint(g, re.xi)


def liapunov_eval(
    sys: PhaseSpaceSystem,
    re: RelativeEquilibrium,
    certificate: EmcCertificate,
    z,
    tube_radius: float | None = None,
    gmu=None,
):
    """Evaluate (f, f1, f2) at z for the certificate's branch and sigma.

    f1 pairs the momentum with the transported generator so that f is
    invariant along the orbit; f2 penalizes leaving the momentum and
    conserved-quantity level sets.  Certificates without a sigma (failed
    runs) are monitored with sigma = 1 on the positive branch.
    """
    if tube_radius is None:
        tube_radius = float(certificate.diagnostics.get("tube_radius", 1.0))
    z = sys.point(z)
    z_e = sys.point(re.z_e)
    lam = np.asarray(certificate.lam, dtype=float)
    xi_used = lie.AlgebraElement(sys.group, np.asarray(certificate.xi_used, dtype=float))
    re_used = RelativeEquilibrium(
        z_e=z_e, xi=xi_used, mu=re.mu, residual_norm=re.residual_norm
    )
    xi_z = patrick_velocity(sys, re_used, z, tube_radius=tube_radius, gmu=gmu)

    c_e = np.atleast_1d(sys.casimirs(z_e)) if sys.dim_conserved else np.zeros(0)
    value_e = float(sys.hamiltonian(z_e))
    if sys.group.dim:
        value_e -= lie.pairing(re.mu, xi_used)
    if sys.dim_conserved:
        value_e += float(c_e @ lam)

    f1 = float(sys.hamiltonian(z)) - value_e
    f2 = 0.0
    if sys.group.dim:
        j = np.atleast_1d(sys.momentum_map(z))
        f1 -= float(j @ xi_z.coeffs)
        dj = j - re.mu.coeffs
        f2 += float(dj @ sys.group._w_inv @ dj)
    if sys.dim_conserved:
        dc = np.atleast_1d(sys.casimirs(z)) - c_e
        f1 += float(np.atleast_1d(sys.casimirs(z)) @ lam)
        f2 += float(dc @ sys.inner_product_conserved @ dc)
    sigma = 1.0 if certificate.sigma is None else float(certificate.sigma)
    sign = certificate.sign if certificate.sign_branch is not None else 1.0
    return sign * f1 + sigma * f2, f1, f2


# ---------------------------------------------------------------------------
# the full pipeline


def _center_of(group: lie.LieGroupSpec, iso) -> np.ndarray:
    """Coefficient basis (dim x d) of the center of the isotropy algebra."""
    if not iso:
        return np.zeros((group.dim, 0))
    q = np.column_stack([zeta.coeffs for zeta in iso])
    rows = [np.einsum("ijk,i->kj", group.structure_constants, z.coeffs) @ q for z in iso]
    stacked = np.vstack(rows)
    if np.linalg.norm(stacked) <= 1e-14:
        return q
    null = lie.null_space(stacked, rtol=1e-10)
    return q @ null


def certify(problem: EmcProblem) -> EmcCertificate:
    """Run the certification pipeline, searching the generator and multiplier
    freedom for the largest definiteness margin before classifying."""
    sys = problem.sys
    re = problem.re
    tolerances = problem.tolerances
    z_e = sys.point(re.z_e)
    group = sys.group

    iso = point_isotropy_algebra(sys, z_e)
    xi_perp, em3_ok, em3_viol = project_generator(sys, z_e, re.xi, seed=problem.seed)
    if not em3_ok and iso:
        repaired = _em3_repair(sys, z_e, iso, xi_perp)
        viol = _em3_violation(sys, z_e, iso, repaired)
        if viol < em3_viol:
            xi_perp, em3_viol = repaired, viol
            em3_ok = viol <= _EM3_TOL

    # constant ingredients of the search
    k_basis = constraint_space(sys, z_e)
    gmu = lie.momentum_isotropy_algebra(group, re.mu)
    orbit = orbit_tangent_basis(sys, z_e, gmu)
    orbit_in_k = _project_orbit_into_K(k_basis, orbit)

    hk_h = k_basis.T @ differentiate(sys, "H", z_e, 2) @ k_basis
    hk_j = (
        np.einsum("pi,aij,jq->apq", k_basis.T, differentiate(sys, "J", z_e, 2), k_basis)
        if group.dim
        else np.zeros((0,) + (k_basis.shape[1],) * 2)
    )
    hk_c = (
        np.einsum("pi,aij,jq->apq", k_basis.T, differentiate(sys, "C", z_e, 2), k_basis)
        if sys.dim_conserved
        else np.zeros((0,) + (k_basis.shape[1],) * 2)
    )
    d2_full_radius = float(
        np.linalg.norm(emc_hessian(sys, z_e, np.zeros(sys.dim_conserved), xi_perp), 2)
    )

    grad_h = differentiate(sys, "H", z_e, 1)
    dj_t = differentiate(sys, "J", z_e, 1).T if group.dim else np.zeros((sys.n, 0))
    dct = differentiate(sys, "C", z_e, 1).T if sys.dim_conserved else np.zeros((sys.n, 0))
    dct_pinv = np.linalg.pinv(dct) if sys.dim_conserved else np.zeros((0, sys.n))
    lam_null = lie.null_space(dct, rtol=1e-10) if sys.dim_conserved else np.zeros((0, 0))

    center = _center_of(group, iso)
    d_xi, d_lam = center.shape[1], lam_null.shape[1]

    def lambda_for(xi_coeffs: np.ndarray):
        rhs = -(grad_h - dj_t @ xi_coeffs)
        lam = dct_pinv @ rhs
        residual = float(np.linalg.norm(dct @ lam - rhs))
        return lam, residual

    crit_scale = max(1.0, float(np.linalg.norm(grad_h)))

    def margin_of(x: np.ndarray):
        xi_c = xi_perp.coeffs + (center @ x[:d_xi] if d_xi else 0.0)
        lam_c, residual = lambda_for(xi_c)
        if residual > tolerances.tol_crit * crit_scale:
            return -np.inf, xi_c, lam_c, residual
        if d_lam:
            lam_c = lam_c + lam_null @ x[d_xi:]
        h_k = hk_h.copy()
        if group.dim:
            h_k = h_k - np.einsum("a,apq->pq", xi_c, hk_j)
        if sys.dim_conserved:
            h_k = h_k + np.einsum("a,apq->pq", lam_c, hk_c)
        ref = max(float(np.max(np.abs(np.linalg.eigvalsh(h_k)))) if h_k.size else 0.0,
                  1e-6 * max(1.0, d2_full_radius))
        return _spectral_margin(h_k, orbit_in_k, ref), xi_c, lam_c, residual

    dims = d_xi + d_lam
    evaluations = 1
    best_x = np.zeros(dims)
    best = margin_of(best_x)
    if dims:
        radius_xi = 2.0 * (1.0 + lie.algebra_norm(xi_perp) + lie.dual_norm(re.mu))
        lam0, _ = lambda_for(xi_perp.coeffs)
        radius_lam = 2.0 * (1.0 + float(np.linalg.norm(lam0)))
        if dims == 1:
            pts = max(problem.xi_search_budget, 5)
        else:
            pts = max(3, int(round(problem.xi_search_budget ** (1.0 / dims))))
        axes = [
            np.linspace(-radius_xi, radius_xi, pts) for _ in range(d_xi)
        ] + [np.linspace(-radius_lam, radius_lam, pts) for _ in range(d_lam)]
        mesh = np.meshgrid(*axes, indexing="ij")
        candidates = np.stack([m.ravel() for m in mesh], axis=1)
        for x in candidates:
            trial = margin_of(x)
            evaluations += 1
            if trial[0] > best[0]:
                best, best_x = trial, x
        if np.isfinite(best[0]):
            res = optimize.minimize(
                lambda x: -margin_of(x)[0],
                best_x,
                method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400},
            )
            evaluations += res.nfev
            refined = margin_of(res.x)
            if refined[0] > best[0]:
                best, best_x = refined, res.x

    margin, xi_coeffs, lam, residual = best
    if not np.isfinite(margin):
        # no candidate achieved criticality; report the base attempt
        xi_coeffs = xi_perp.coeffs
        lam, residual = lambda_for(xi_coeffs)
        margin = -np.inf
    xi_used = lie.AlgebraElement(group, xi_coeffs)
    _, _, lam_nullspace_dim = solve_lambda(sys, z_e, xi_used)

    cls = restricted_hessian_classify(sys, z_e, lam, xi_used, k_basis, orbit, tolerances)

    em1_ok = residual <= tolerances.tol_crit * crit_scale
    sigma = None
    slice_min = None
    if not em3_ok:
        verdict = "Failed_EM3"
    elif not em1_ok:
        verdict = "Failed_EM1"
    elif not cls.definite_ok:
        verdict = "Inconclusive_Indefinite"
    elif not cls.kernel_ok:
        verdict = "Inconclusive_KernelMismatch"
    else:
        try:
            sigma, slice_min = select_sigma(
                sys, RelativeEquilibrium(z_e=z_e, xi=xi_used, mu=re.mu,
                                         residual_norm=re.residual_norm),
                lam, xi_used, cls.sign_branch,
                tolerances=tolerances, sigma_max=problem.sigma_max,
            )
            verdict = "CertifiedStable"
        except SigmaCapError as err:
            slice_min = err.min_eig
            verdict = "Failed_SigmaCap"

    diagnostics = {
        "search_dims": {"xi": d_xi, "lambda": d_lam},
        "search_evaluations": int(evaluations),
        "spectral_scale": float(cls.scale),
        "isotropy_dim": len(iso),
        "tube_radius": float(problem.tube_radius),
        "seed": int(problem.seed),
        "sigma_max": float(problem.sigma_max),
        "xi_search_budget": int(problem.xi_search_budget),
    }
    finite_margin = float(margin) if np.isfinite(margin) else -1.0
    return EmcCertificate(
        system=sys.name,
        parameters=dict(sys.parameters),
        z_e=[float(v) for v in z_e],
        mu=[float(v) for v in re.mu.coeffs],
        xi_used=[float(v) for v in xi_coeffs],
        lam=[float(v) for v in lam],
        lambda_nullspace_dim=int(lam_nullspace_dim),
        sign_branch=cls.sign_branch,
        sigma=sigma,
        K_dim=int(k_basis.shape[1]),
        orbit_dim_in_K=int(cls.orbit_dim_in_K),
        spectrum=[float(v) for v in cls.spectrum],
        zero_cluster_dim=int(cls.zero_cluster_dim),
        kernel_principal_angle=float(cls.kernel_principal_angle),
        verdict=verdict,
        criticality_residual=float(residual),
        em3_violation=float(em3_viol),
        margin=finite_margin,
        slice_spectrum_min=None if slice_min is None else float(slice_min),
        tolerances=tolerances,
        diagnostics=diagnostics,
    )
