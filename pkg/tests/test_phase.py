import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emcstab import lie, phase, systems
from emcstab.errors import DimensionMismatchError, StructuralError


RIGID = systems.instantiate_system("rigid_body")
TOP = systems.instantiate_system("lagrange_top")
OSC = systems.instantiate_system("symmetric_oscillator")
HARM = systems.instantiate_system("harmonic_s1")


def counterclockwise_plane_system():
    """Planar test system whose circle action is mathematically positive."""
    group = lie.builtin_group("torus1")
    b = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return phase.PhaseSpaceSystem(
        name="ccw_plane",
        n=2,
        group=group,
        poisson_tensor=lambda z: b,
        hamiltonian=lambda z: 0.5 * float(np.sum(np.asarray(z) ** 2)),
        momentum_map=lambda z: np.zeros(1),
        casimirs=lambda z: np.zeros(0),
        dim_conserved=0,
        action=lambda g, z: g.matrix @ np.asarray(z, dtype=float),
        generator_matrices=None,  # force the differenced path
    )


class TestHamiltonianVectorField:
    def test_canonical_oscillator_hand_value(self):
        out = phase.hamiltonian_vector_field(HARM, [1.0, 0.0])
        np.testing.assert_allclose(out, [0.0, -1.0], atol=1e-12)

    def test_zero_gradient_point_is_stationary(self):
        out = phase.hamiltonian_vector_field(HARM, [0.0, 0.0])
        np.testing.assert_allclose(out, 0.0, atol=1e-15)

    def test_rigid_body_principal_axis_is_stationary(self):
        out = phase.hamiltonian_vector_field(RIGID, [0.0, 0.0, 1.0])
        np.testing.assert_allclose(out, 0.0, atol=1e-13)

    def test_euler_equations_oracle(self):
        # independent oracle: angular momentum evolves by its own cross product
        inertia = np.array([1.0, 2.0, 3.0])
        z = np.array([0.4, -1.1, 0.7])
        expected = np.cross(z / inertia, z)
        np.testing.assert_allclose(
            phase.hamiltonian_vector_field(RIGID, z), expected, atol=1e-12
        )

    def test_scaling_hamiltonian_scales_field(self):
        doubled = dataclasses.replace(
            RIGID,
            hamiltonian=lambda z: 2.0 * RIGID.hamiltonian(z),
            grad_hamiltonian=None,
            hess_hamiltonian=None,
            vector_field=None,
        )
        z = np.array([0.3, 0.8, -0.2])
        np.testing.assert_allclose(
            phase.hamiltonian_vector_field(doubled, z),
            2.0 * phase.hamiltonian_vector_field(RIGID, z),
            atol=1e-12,
        )


class TestInfinitesimalGenerator:
    def test_zero_element_gives_zero_field(self):
        out = phase.infinitesimal_generator(OSC, np.zeros(3), np.ones(6))
        np.testing.assert_allclose(out, 0.0, atol=1e-15)

    def test_positive_rotation_on_plane(self):
        sys = counterclockwise_plane_system()
        out = phase.infinitesimal_generator(sys, np.array([1.0]), np.array([1.0, 0.0]))
        np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-8)

    def test_sleeping_top_point_is_fixed(self):
        z = np.array([0.0, 0.0, 2.5, 0.0, 0.0, 1.0])
        out = phase.infinitesimal_generator(TOP, np.array([1.7]), z)
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_matrix_path_matches_differenced_path(self):
        z = np.array([0.3, -0.2, 0.9, 0.1, 0.4, 0.8])
        zeta = np.array([0.6])
        fast = phase.infinitesimal_generator(TOP, zeta, z)
        slow = phase.infinitesimal_generator(
            dataclasses.replace(TOP, generator_matrices=None), zeta, z
        )
        np.testing.assert_allclose(fast, slow, atol=1e-7)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            phase.infinitesimal_generator(OSC, np.zeros(2), np.ones(6))


class TestDifferentiate:
    def test_quadratic_gradient_recovered(self):
        a = np.array([[2.0, 0.5], [0.5, 1.0]])
        fn = lambda z: 0.5 * z @ a @ z
        z = np.array([0.7, -0.4])
        np.testing.assert_allclose(phase.differentiate(HARM, fn, z, 1), a @ z, atol=1e-9)
        np.testing.assert_allclose(phase.differentiate(HARM, fn, z, 2), a, atol=1e-6)

    def test_rigid_body_hand_gradient(self):
        g = phase.differentiate(RIGID, "hamiltonian", [0.0, 0.0, 1.0], 1)
        np.testing.assert_allclose(g, [0.0, 0.0, 1.0 / 3.0], atol=1e-12)

    def test_linear_momentum_jacobian_constant(self):
        j1 = phase.differentiate(TOP, "momentum", np.zeros(6), 1)
        j2 = phase.differentiate(TOP, "momentum", np.ones(6), 1)
        np.testing.assert_allclose(j1, j2, atol=1e-12)
        np.testing.assert_allclose(j1, [[0, 0, 1, 0, 0, 0]], atol=1e-12)

    @pytest.mark.parametrize("sys", [RIGID, TOP, OSC, HARM], ids=lambda s: s.name)
    def test_finite_differences_match_analytic(self, sys):
        bare = dataclasses.replace(
            sys,
            grad_hamiltonian=None,
            hess_hamiltonian=None,
            jac_momentum=None,
            hess_momentum=None,
            jac_casimirs=None,
            hess_casimirs=None,
        )
        rng = np.random.default_rng(7)
        for _ in range(20):
            z = rng.normal(size=sys.n)
            for fld in ("hamiltonian", "momentum", "casimirs"):
                exact = phase.differentiate(sys, fld, z, 1)
                approx = phase.differentiate(bare, fld, z, 1)
                scale = max(1.0, float(np.max(np.abs(exact))) if exact.size else 1.0)
                assert np.max(np.abs(exact - approx)) / scale <= 1e-5 if exact.size else True
            h_exact = phase.differentiate(sys, "hamiltonian", z, 2)
            h_approx = phase.differentiate(bare, "hamiltonian", z, 2)
            assert np.max(np.abs(h_exact - h_approx)) <= 1e-3 * max(
                1.0, float(np.max(np.abs(h_exact)))
            )

    def test_rejects_bad_order(self):
        with pytest.raises(ValueError):
            phase.differentiate(RIGID, "hamiltonian", np.zeros(3), 3)


class TestCheckStructure:
    def test_harmonic_all_checks_tight(self):
        report = phase.check_structure(HARM, n_samples=12, seed=0)
        assert report.ok
        assert report.worst() <= 1e-9

    def test_lagrange_top_passes(self):
        report = phase.check_structure(TOP, n_samples=10, seed=1)
        assert report.ok
        assert report.worst() <= 1e-8

    @pytest.mark.parametrize("sys", [RIGID, OSC], ids=lambda s: s.name)
    def test_remaining_catalog_passes(self, sys):
        report = phase.check_structure(sys, n_samples=8, seed=2)
        assert report.ok
        assert report.worst() <= 1e-8

    def test_sign_flipped_momentum_detected(self):
        flipped = dataclasses.replace(
            TOP,
            momentum_map=lambda z: -np.asarray(z, dtype=float)[..., 2:3],
            jac_momentum=lambda z: -np.array([[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]]),
            hess_momentum=lambda z: np.zeros((1, 6, 6)),
        )
        report = phase.check_structure(flipped, n_samples=6, seed=3)
        assert not report.ok
        assert report.generator_match > 1e-2
        with pytest.raises(StructuralError):
            phase.check_structure(flipped, n_samples=6, seed=3, strict=True)

    def test_spot_check_rejects_symmetric_tensor(self):
        with pytest.raises(StructuralError):
            dataclasses.replace(HARM, poisson_tensor=lambda z: np.eye(2))


@given(
    st.lists(st.floats(-2.0, 2.0, allow_nan=False), min_size=2, max_size=2).map(np.array)
)
@settings(max_examples=25, deadline=None)
def test_field_is_poisson_tensor_times_gradient(z):
    b = np.asarray(HARM.poisson_tensor(z))
    grad = phase.differentiate(HARM, "hamiltonian", z, 1)
    np.testing.assert_allclose(
        phase.hamiltonian_vector_field(HARM, z), b @ grad, atol=1e-10
    )
