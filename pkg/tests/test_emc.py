import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emcstab import emc, lie, releq
from emcstab.errors import (
    InvariantInnerProductError,
    OutOfNeighborhoodError,
    SigmaCapError,
    StructuralError,
)
from emcstab.phase import PhaseSpaceSystem, differentiate
from emcstab.systems import instantiate_system, known_equilibria

RIGID = instantiate_system("rigid_body")
OSC = instantiate_system("symmetric_oscillator")
HARM = instantiate_system("harmonic_s1")

E3 = np.array([0.0, 0.0, 1.0])
CIRCULAR = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


def top_system(omega: float = 2.5, mgl: float = 1.0, i1: float = 1.0, i3: float = 1.0):
    return instantiate_system(
        "lagrange_top", {"Mgl": mgl, "I1": i1, "I3": i3, "omega": omega}
    )


def sleeping_state(omega: float, i3: float = 1.0) -> np.ndarray:
    return np.array([0.0, 0.0, i3 * omega, 0.0, 0.0, 1.0])


def top_re(sys, omega: float) -> releq.RelativeEquilibrium:
    xi = lie.AlgebraElement(sys.group, np.array([omega]))
    return releq.make_relative_equilibrium(sys, sleeping_state(omega), xi)


def rigid_re(axis: int, sign: float = 1.0) -> releq.RelativeEquilibrium:
    z = np.zeros(3)
    z[axis] = sign
    return releq.make_relative_equilibrium(RIGID, z)


def osc_re() -> releq.RelativeEquilibrium:
    return releq.make_relative_equilibrium(OSC, CIRCULAR, lie.AlgebraElement(OSC.group, E3))


# --- independent oracles, frozen from hand computation -----------------------


def sleeping_block(mgl, i1, i3, omega, xi) -> np.ndarray:
    """2x2 block of the restricted second variation in a (dPi_1, dGamma_1)
    plane of the sleeping state; the full 4x4 is two copies of it."""
    lam2 = xi - omega
    lam1 = -(mgl + lam2 * i3 * omega) / 2.0
    return np.array([[1.0 / i1, lam2], [lam2, 2.0 * lam1]])


def sleeping_best_q(mgl, i1, i3, omega) -> float:
    """Minimum over the multiplier freedom of q = i1*l2^2 + i3*omega*l2 + mgl.

    The block is positive definite for some multiplier exactly when this
    minimum is negative (trace/determinant analysis of sleeping_block)."""
    return mgl - (i3 * omega) ** 2 / (4.0 * i1)


def rigid_axis_spectrum(inertia, axis: int) -> np.ndarray:
    others = [j for j in range(3) if j != axis]
    return np.sort([1.0 / inertia[j] - 1.0 / inertia[axis] for j in others])


class TestEmcValue:
    def test_reduces_to_hamiltonian(self):
        z = np.array([0.3, -0.2, 0.9])
        xi0 = lie.AlgebraElement(RIGID.group, np.zeros(0))
        assert emc.emc_value(RIGID, z, np.zeros(1), xi0) == pytest.approx(
            float(RIGID.hamiltonian(z))
        )

    def test_rigid_axis_value_zero(self):
        # 1/(2*3) + (-1/6)*1 = 0
        xi0 = lie.AlgebraElement(RIGID.group, np.zeros(0))
        assert emc.emc_value(RIGID, E3, [-1.0 / 6.0], xi0) == pytest.approx(0.0, abs=1e-15)

    @given(st.floats(-3, 3), st.floats(-3, 3))
    @settings(max_examples=25, deadline=None)
    def test_linearity_in_multiplier(self, a, b):
        z = np.array([0.4, 0.1, -0.7])
        xi0 = lie.AlgebraElement(RIGID.group, np.zeros(0))
        va = emc.emc_value(RIGID, z, [a], xi0)
        vb = emc.emc_value(RIGID, z, [b], xi0)
        c = float(RIGID.casimirs(z)[0])
        assert va - vb == pytest.approx((a - b) * c, rel=1e-12, abs=1e-12)


class TestProjectGenerator:
    def test_free_point_passes_through(self):
        xi = lie.AlgebraElement(OSC.group, E3)
        out, ok, violation = emc.project_generator(OSC, CIRCULAR, xi)
        assert ok and violation == 0.0
        assert np.array_equal(out.coeffs, E3)

    def test_sleeping_top_projects_to_zero(self):
        sys = top_system()
        xi = lie.AlgebraElement(sys.group, np.array([2.5]))
        out, ok, violation = emc.project_generator(sys, sleeping_state(2.5), xi)
        # isotropy is the whole 1-dim algebra, so the complement is trivial
        assert ok and violation <= 1e-14
        assert np.linalg.norm(out.coeffs) <= 1e-12

    def test_noninvariant_inner_product_rejected(self):
        group = dataclasses.replace(
            lie.builtin_group("so3"), inner_product=np.diag([1.0, 2.0, 4.0])
        )
        sys = dataclasses.replace(OSC, group=group)
        z_e = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 2.0])  # isotropy = e3 rotations
        xi = lie.AlgebraElement(group, np.array([0.2, 0.0, 1.0]))
        with pytest.raises(InvariantInnerProductError):
            emc.project_generator(sys, z_e, xi)


class TestSolveLambda:
    def test_rigid_axis(self):
        xi0 = lie.AlgebraElement(RIGID.group, np.zeros(0))
        lam, residual, null_dim = emc.solve_lambda(RIGID, E3, xi0)
        assert lam == pytest.approx([-1.0 / 6.0], abs=1e-12)
        assert residual <= 1e-10
        assert null_dim == 0

    @pytest.mark.parametrize("xi", [0.0, 1.0, 1.7, 2.5, -0.4])
    def test_sleeping_top_formula(self, xi):
        sys = top_system()
        lam, residual, null_dim = emc.solve_lambda(
            sys, sleeping_state(2.5), lie.AlgebraElement(sys.group, np.array([xi]))
        )
        lam2 = xi - 2.5
        lam1 = -(1.0 + lam2 * 2.5) / 2.0
        assert lam == pytest.approx([lam1, lam2], abs=1e-10)
        assert residual <= 1e-10
        assert null_dim == 0

    def test_no_conserved_functions(self):
        lam, residual, null_dim = emc.solve_lambda(
            OSC, CIRCULAR, lie.AlgebraElement(OSC.group, E3)
        )
        assert lam.shape == (0,)
        assert residual <= 1e-10
        assert null_dim == 0

    def test_infeasible_point_reported_not_raised(self):
        z = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
        xi0 = lie.AlgebraElement(RIGID.group, np.zeros(0))
        _, residual, _ = emc.solve_lambda(RIGID, z, xi0)
        assert residual > 1e-3


class TestConstraintSpace:
    def test_rigid_tangent_plane(self):
        k = emc.constraint_space(RIGID, E3)
        assert k.shape == (3, 2)
        assert np.max(np.abs(k.T @ E3)) <= 1e-12

    def test_sleeping_top_four_directions(self):
        sys = top_system()
        k = emc.constraint_space(sys, sleeping_state(2.5))
        assert k.shape == (6, 4)
        # the Pi_3 and Gamma_3 coordinates are pinned by the constraints
        assert np.max(np.abs(k[2])) <= 1e-10
        assert np.max(np.abs(k[5])) <= 1e-10

    def test_oscillator(self):
        k = emc.constraint_space(OSC, CIRCULAR)
        assert k.shape == (6, 3)

    def test_columns_annihilate_jacobians(self):
        for sys, z in [
            (RIGID, E3),
            (top_system(), sleeping_state(2.5)),
            (OSC, CIRCULAR),
            (HARM, np.array([1.0, 0.0])),
        ]:
            k = emc.constraint_space(sys, z)
            if sys.group.dim:
                dj = differentiate(sys, "J", z, 1)
                assert np.max(np.abs(dj @ k)) <= 1e-8
            if sys.dim_conserved:
                dc = differentiate(sys, "C", z, 1)
                assert np.max(np.abs(dc @ k)) <= 1e-8

    def test_unconstrained_system_is_full_space(self):
        free = dataclasses.replace(RIGID, dim_conserved=0, inner_product_conserved=None)
        assert np.array_equal(emc.constraint_space(free, E3), np.eye(3))


class TestOrbitTangent:
    def test_sleeping_top_orbit_is_a_point(self):
        sys = top_system()
        gmu = lie.momentum_isotropy_algebra(sys.group, sys.momentum_dual(sleeping_state(2.5)))
        basis = emc.orbit_tangent_basis(sys, sleeping_state(2.5), gmu)
        assert basis.shape == (6, 0)

    def test_circular_orbit_direction(self):
        gmu = lie.momentum_isotropy_algebra(OSC.group, OSC.momentum_dual(CIRCULAR))
        basis = emc.orbit_tangent_basis(OSC, CIRCULAR, gmu)
        assert basis.shape == (6, 1)
        expected = np.array([0.0, 1.0, 0.0, -1.0, 0.0, 0.0]) / np.sqrt(2.0)
        assert min(
            np.linalg.norm(basis[:, 0] - expected), np.linalg.norm(basis[:, 0] + expected)
        ) <= 1e-12

    def test_trivial_group_empty(self):
        assert emc.orbit_tangent_basis(RIGID, E3, []).shape == (3, 0)


class TestRestrictedHessian:
    def classify(self, sys, z, lam, xi_coeffs, mu=None):
        xi = lie.AlgebraElement(sys.group, np.asarray(xi_coeffs, dtype=float))
        k = emc.constraint_space(sys, z)
        gmu = lie.momentum_isotropy_algebra(sys.group, mu if mu is not None else sys.momentum_dual(z))
        orbit = emc.orbit_tangent_basis(sys, z, gmu)
        return emc.restricted_hessian_classify(
            sys, z, np.asarray(lam, dtype=float), xi, k, orbit, emc.EmcTolerances()
        )

    @pytest.mark.parametrize(
        "axis,branch",
        [(2, "positive"), (0, "negative"), (1, None)],
    )
    def test_rigid_axes_frozen_spectra(self, axis, branch):
        z = np.zeros(3)
        z[axis] = 1.0
        lam = [-1.0 / (2.0 * [1.0, 2.0, 3.0][axis])]
        cls = self.classify(RIGID, z, lam, np.zeros(0))
        assert np.allclose(cls.spectrum, rigid_axis_spectrum((1.0, 2.0, 3.0), axis), atol=1e-12)
        assert cls.sign_branch == branch
        assert cls.definite_ok == (branch is not None)
        assert cls.zero_cluster_dim == 0

    def test_sleeping_top_matches_block_oracle(self):
        sys = top_system()
        for xi in (1.7, 2.5, 0.9):
            lam2 = xi - 2.5
            lam1 = -(1.0 + lam2 * 2.5) / 2.0
            cls = self.classify(sys, sleeping_state(2.5), [lam1, lam2], [xi])
            block_eigs = np.linalg.eigvalsh(sleeping_block(1.0, 1.0, 1.0, 2.5, xi))
            expected = np.sort(np.concatenate([block_eigs, block_eigs]))
            assert np.allclose(cls.spectrum, expected, atol=1e-9)

    def test_oscillator_zero_cluster_is_orbit(self):
        cls = self.classify(OSC, CIRCULAR, np.zeros(0), E3)
        assert np.allclose(cls.spectrum, [0.0, 2.0, 2.0], atol=1e-9)
        assert cls.zero_cluster_dim == 1
        assert cls.orbit_dim_in_K == 1
        assert cls.kernel_principal_angle <= 1e-4
        assert cls.sign_branch == "positive" and cls.kernel_ok

    def test_orbit_outside_kernel_is_structural(self):
        k = emc.constraint_space(RIGID, E3)
        bogus_orbit = E3.reshape(3, 1)  # normal direction, not in K
        xi0 = lie.AlgebraElement(RIGID.group, np.zeros(0))
        with pytest.raises(StructuralError):
            emc.restricted_hessian_classify(
                RIGID, E3, np.array([-1.0 / 6.0]), xi0, k, bogus_orbit, emc.EmcTolerances()
            )


class TestSelectSigma:
    def test_rigid_axis_small_sigma(self):
        re = rigid_re(2)
        sigma, slice_min = emc.select_sigma(RIGID, re, [-1.0 / 6.0], re.xi, "positive")
        assert sigma <= 64.0
        assert slice_min > 0.0

    def test_negative_branch(self):
        re = rigid_re(0)
        sigma, slice_min = emc.select_sigma(RIGID, re, [-0.5], re.xi, "negative")
        assert sigma <= 64.0
        assert slice_min > 0.0

    def test_slice_minimum_recomputed_independently(self):
        re = osc_re()
        sigma, slice_min = emc.select_sigma(OSC, re, np.zeros(0), re.xi, "positive")
        gmu = lie.momentum_isotropy_algebra(OSC.group, re.mu)
        orbit = emc.orbit_tangent_basis(OSC, re.z_e, gmu)
        q, _ = np.linalg.qr(np.eye(6) - orbit @ orbit.T)
        # drop the near-zero column that qr keeps for the orbit direction
        keep = [i for i in range(6) if np.abs(orbit[:, 0] @ q[:, i]) < 0.5]
        s = q[:, keep[:5]]
        d2 = emc.emc_hessian(OSC, re.z_e, np.zeros(0), re.xi)
        dj = differentiate(OSC, "J", re.z_e, 1)
        d2f2 = 2.0 * dj.T @ dj
        evals = np.linalg.eigvalsh(s.T @ (d2 + sigma * d2f2) @ s)
        assert evals[0] > 0.0
        assert slice_min == pytest.approx(evals[0], rel=1e-6)

    def test_indefinite_direction_hits_cap(self):
        re = rigid_re(1)
        with pytest.raises(SigmaCapError):
            emc.select_sigma(RIGID, re, [-0.25], re.xi, "positive", sigma_max=1e4)


class TestPatrickVelocity:
    def test_at_equilibrium_returns_generator(self):
        re = osc_re()
        out = emc.patrick_velocity(OSC, re, CIRCULAR)
        assert np.allclose(out.coeffs, E3, atol=1e-12)

    def test_transported_generator_matches_rotation(self):
        # z_e on the symmetry axis, generator along the same axis: the
        # transported generator is the rotated axis vector
        group = lie.builtin_group("so3")
        sys = dataclasses.replace(
            OSC,
            momentum_map=lambda z: np.zeros(z.shape[:-1] + (3,)),
            jac_momentum=lambda z: np.zeros((3, 6)),
            hess_momentum=lambda z: np.zeros((3, 6, 6)),
        )
        z_e = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 2.0])
        xi = lie.AlgebraElement(group, 0.7 * E3)
        mu = lie.DualElement(group, np.zeros(3))
        re = releq.RelativeEquilibrium(z_e=z_e, xi=xi, mu=mu, residual_norm=0.0)
        eta = lie.AlgebraElement(group, np.array([0.1, -0.2, 0.15]))
        g = lie.exponential(eta)
        out = emc.patrick_velocity(sys, re, sys.action(g, z_e))
        expected = g.matrix @ (0.7 * E3)
        assert np.linalg.norm(out.coeffs - expected) <= 1e-8

    def test_abelian_group_keeps_generator(self):
        sys = top_system()
        re = top_re(sys, 2.5)
        z = sleeping_state(2.5) + np.array([0.05, -0.02, 0.0, 0.01, 0.0, 0.0])
        out = emc.patrick_velocity(sys, re, z)
        assert np.allclose(out.coeffs, re.xi.coeffs, atol=1e-12)

    def test_outside_tube_raises(self):
        sys = top_system()
        re = top_re(sys, 2.5)
        with pytest.raises(OutOfNeighborhoodError):
            emc.patrick_velocity(sys, re, sleeping_state(2.5) + np.array([0, 0, 0, 2.0, 0, 0]))


class TestLiapunovEval:
    def test_zero_at_equilibrium(self):
        re = osc_re()
        cert = emc.certify(emc.EmcProblem(sys=OSC, re=re))
        f, f1, f2 = emc.liapunov_eval(OSC, re, cert, CIRCULAR)
        assert abs(f) <= 1e-13 and abs(f1) <= 1e-13 and abs(f2) <= 1e-13

    def test_vanishes_along_orbit(self):
        re = osc_re()
        cert = emc.certify(emc.EmcProblem(sys=OSC, re=re))
        for angle in (0.3, -1.1, 2.0):
            g = lie.exponential(lie.AlgebraElement(OSC.group, angle * E3))
            f, _, f2 = emc.liapunov_eval(OSC, re, cert, OSC.action(g, CIRCULAR))
            assert abs(f) <= 1e-8
            assert f2 <= 1e-12

    def test_slice_value_is_augmented_energy(self):
        re = osc_re()
        cert = emc.certify(emc.EmcProblem(sys=OSC, re=re))
        gmu = lie.momentum_isotropy_algebra(OSC.group, re.mu)
        orbit = emc.orbit_tangent_basis(OSC, CIRCULAR, gmu)
        rng = np.random.default_rng(7)
        lam = np.asarray(cert.lam, dtype=float)
        xi = lie.AlgebraElement(OSC.group, np.asarray(cert.xi_used))
        h_e = emc.emc_value(OSC, CIRCULAR, lam, xi)
        for _ in range(5):
            v = rng.standard_normal(6)
            v -= orbit @ (orbit.T @ v)
            z = CIRCULAR + 0.01 * v / np.linalg.norm(v)
            _, f1, _ = emc.liapunov_eval(OSC, re, cert, z)
            assert abs(f1 - (emc.emc_value(OSC, z, lam, xi) - h_e)) <= 1e-8

    def test_invariance_under_momentum_isotropy(self):
        re = osc_re()
        cert = emc.certify(emc.EmcProblem(sys=OSC, re=re))
        rng = np.random.default_rng(3)
        for _ in range(4):
            z = CIRCULAR + 0.05 * rng.standard_normal(6)
            f, _, _ = emc.liapunov_eval(OSC, re, cert, z)
            angle = rng.uniform(-np.pi, np.pi)
            g = lie.exponential(lie.AlgebraElement(OSC.group, angle * E3))
            f_moved, _, _ = emc.liapunov_eval(OSC, re, cert, OSC.action(g, z))
            assert abs(f_moved - f) <= 1e-7

    def test_failed_certificate_monitored_with_unit_sigma(self):
        re = rigid_re(1)
        cert = emc.certify(emc.EmcProblem(sys=RIGID, re=re))
        assert cert.sigma is None
        z = np.array([0.02, 0.999, 0.01])
        f, f1, f2 = emc.liapunov_eval(RIGID, re, cert, z)
        assert np.isfinite(f) and f2 >= 0.0
        assert f == pytest.approx(f1 + f2, rel=1e-12)


class TestCertify:
    @pytest.mark.parametrize(
        "axis,verdict,branch",
        [
            (2, "CertifiedStable", "positive"),
            (0, "CertifiedStable", "negative"),
            (1, "Inconclusive_Indefinite", None),
        ],
    )
    def test_rigid_axes(self, axis, verdict, branch):
        cert = emc.certify(emc.EmcProblem(sys=RIGID, re=rigid_re(axis)))
        assert cert.verdict == verdict
        assert cert.sign_branch == branch
        assert np.allclose(
            cert.spectrum, rigid_axis_spectrum((1.0, 2.0, 3.0), axis), atol=1e-9
        )
        if verdict == "CertifiedStable":
            assert cert.sigma is not None and cert.slice_spectrum_min > 0.0

    @pytest.mark.parametrize(
        "omega,verdict",
        [(2.5, "CertifiedStable"), (2.1, "CertifiedStable"),
         (1.9, "Inconclusive_Indefinite"), (1.5, "Inconclusive_Indefinite")],
    )
    def test_sleeping_top_threshold(self, omega, verdict):
        # certifiable exactly when the best multiplier makes q negative
        sys = top_system(omega)
        cert = emc.certify(emc.EmcProblem(sys=sys, re=top_re(sys, omega)))
        assert cert.verdict == verdict
        oracle = sleeping_best_q(1.0, 1.0, 1.0, omega)
        assert (oracle < 0) == (verdict == "CertifiedStable")

    def test_oscillator_certificate(self):
        cert = emc.certify(emc.EmcProblem(sys=OSC, re=osc_re()))
        assert cert.verdict == "CertifiedStable"
        assert cert.K_dim == 3 and cert.orbit_dim_in_K == 1 and cert.zero_cluster_dim == 1
        assert np.allclose(cert.spectrum, [0.0, 2.0, 2.0], atol=1e-9)

    def test_harmonic_trivial_complement(self):
        re = releq.make_relative_equilibrium(
            HARM, np.array([1.0, 0.0]), lie.AlgebraElement(HARM.group, np.array([1.0]))
        )
        cert = emc.certify(emc.EmcProblem(sys=HARM, re=re))
        assert cert.verdict == "CertifiedStable"
        assert cert.K_dim == 1 and cert.zero_cluster_dim == 1

    def test_isotropic_inertia_kernel_mismatch(self):
        iso = instantiate_system("rigid_body", {"I": (1.0, 1.0, 1.0)})
        re = releq.make_relative_equilibrium(iso, E3)
        cert = emc.certify(emc.EmcProblem(sys=iso, re=re))
        assert cert.verdict == "Inconclusive_KernelMismatch"
        assert np.allclose(cert.spectrum, [0.0, 0.0], atol=1e-12)

    def test_criticality_invariant(self):
        for sys, re in [
            (RIGID, rigid_re(2)),
            (top_system(), top_re(top_system(), 2.5)),
            (OSC, osc_re()),
        ]:
            cert = emc.certify(emc.EmcProblem(sys=sys, re=re))
            xi = lie.AlgebraElement(sys.group, np.asarray(cert.xi_used))
            grad = emc.emc_gradient(sys, re.z_e, np.asarray(cert.lam), xi)
            assert np.linalg.norm(grad) <= 1e-8

    def test_penalty_hessian_kernel_matches_constraints_on_slice(self):
        re = osc_re()
        gmu = lie.momentum_isotropy_algebra(OSC.group, re.mu)
        orbit = emc.orbit_tangent_basis(OSC, re.z_e, gmu)
        slice_basis = emc._orthogonal_complement(orbit, 6)
        d2f2 = emc._penalty_hessian(OSC, re.z_e)
        evals, evecs = np.linalg.eigh(slice_basis.T @ d2f2 @ slice_basis)
        assert evals[0] >= -1e-10
        zero = evecs[:, np.abs(evals) <= 1e-7 * np.max(np.abs(evals))]
        k = emc.constraint_space(OSC, re.z_e)
        k_in_slice = slice_basis.T @ k
        u, s, _ = np.linalg.svd(k_in_slice, full_matrices=False)
        k_slice_basis = u[:, s > 1e-10]
        assert zero.shape[1] == k_slice_basis.shape[1]
        overlap = np.linalg.svd(zero.T @ k_slice_basis, compute_uv=False)
        assert np.arccos(np.clip(np.min(overlap), -1, 1)) <= 1e-4

    def test_equivariance_of_certificates(self):
        base = emc.certify(emc.EmcProblem(sys=OSC, re=osc_re()))
        rng = np.random.default_rng(11)
        for _ in range(3):
            angle = rng.uniform(-np.pi, np.pi)
            g = lie.exponential(lie.AlgebraElement(OSC.group, angle * E3))
            z_new = OSC.action(g, CIRCULAR)
            xi_new = lie.adjoint(g, lie.AlgebraElement(OSC.group, E3))
            re_new = releq.make_relative_equilibrium(OSC, z_new, xi_new)
            cert = emc.certify(emc.EmcProblem(sys=OSC, re=re_new))
            assert cert.verdict == base.verdict
            assert np.allclose(cert.spectrum, base.spectrum, atol=1e-6)

    def test_search_recovers_definiteness_from_bad_seed_generator(self):
        # seed the sleeping top with xi = 0; the definite window requires
        # lam2 = xi - omega in (-2, -0.5), so the search must move xi
        sys = top_system(2.5)
        re = releq.make_relative_equilibrium(
            sys, sleeping_state(2.5), lie.AlgebraElement(sys.group, np.array([0.0]))
        )
        cert = emc.certify(emc.EmcProblem(sys=sys, re=re))
        assert cert.verdict == "CertifiedStable"
        lam2 = cert.lam[1]
        assert -2.0 < lam2 < -0.5

    def test_json_round_trip(self):
        cert = emc.certify(emc.EmcProblem(sys=OSC, re=osc_re()))
        doc = json.loads(json.dumps(cert.to_json_dict(), sort_keys=True))
        back = emc.EmcCertificate.from_json_dict(doc)
        assert back.verdict == cert.verdict
        assert back.sigma == cert.sigma
        assert np.allclose(back.spectrum, cert.spectrum)
        assert back.tolerances == cert.tolerances

    def test_verdict_validated(self):
        cert = emc.certify(emc.EmcProblem(sys=OSC, re=osc_re()))
        with pytest.raises(ValueError):
            dataclasses.replace(cert, verdict="TotallyFine")


class TestProblemValidation:
    def test_bad_tolerances(self):
        with pytest.raises(ValueError):
            emc.EmcTolerances(tol_zero=0.0)

    def test_bad_sigma_max(self):
        with pytest.raises(ValueError):
            emc.EmcProblem(sys=RIGID, re=rigid_re(2), sigma_max=0.5)
