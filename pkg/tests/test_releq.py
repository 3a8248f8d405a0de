import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emcstab import lie, phase, releq, systems
from emcstab.errors import StructuralError


RIGID = systems.instantiate_system("rigid_body")
TOP = systems.instantiate_system("lagrange_top")
OSC = systems.instantiate_system("symmetric_oscillator")
HARM = systems.instantiate_system("harmonic_s1")

SLEEPING = np.array([0.0, 0.0, 2.5, 0.0, 0.0, 1.0])
CIRCULAR = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


def rotation_chart_system():
    """Rotations acting on a three-dimensional chart with a frozen bracket."""
    group = lie.builtin_group("so3")
    return phase.PhaseSpaceSystem(
        name="rotation_chart",
        n=3,
        group=group,
        poisson_tensor=lambda z: np.zeros((3, 3)),
        hamiltonian=lambda z: 0.0,
        momentum_map=lambda z: np.zeros(3),
        casimirs=lambda z: np.zeros(0),
        dim_conserved=0,
        action=lambda g, z: g.matrix @ np.asarray(z, dtype=float),
        generator_matrices=[systems._hat(e) for e in np.eye(3)],
    )


class TestResidual:
    def test_rigid_axis_is_equilibrium(self):
        assert releq.relative_equilibrium_residual(RIGID, [0, 0, 1], np.zeros(0)) <= 1e-14

    def test_sleeping_top_residual_zero_for_every_generator(self):
        for xi in (0.0, 1.0, 2.5, -17.3):
            r = releq.relative_equilibrium_residual(TOP, SLEEPING, np.array([xi]))
            assert r <= 1e-12

    def test_circular_orbit_with_axis_generator(self):
        r = releq.relative_equilibrium_residual(OSC, CIRCULAR, np.array([0, 0, 1.0]))
        assert r <= 1e-12

    def test_wrong_generator_leaves_defect(self):
        r = releq.relative_equilibrium_residual(OSC, CIRCULAR, np.array([0, 0, 2.0]))
        assert r > 0.5

    @given(st.floats(-2.0, 2.0, allow_nan=False), st.floats(-2.0, 2.0, allow_nan=False))
    @settings(max_examples=25)
    def test_every_harmonic_point_is_equilibrium_with_unit_generator(self, q, p):
        r = releq.relative_equilibrium_residual(HARM, np.array([q, p]), np.array([1.0]))
        assert r <= 1e-12


class TestPointIsotropy:
    def test_free_point_on_rotation_chart(self):
        sys = rotation_chart_system()
        iso = releq.point_isotropy_algebra(sys, np.array([1.0, 0.0, 0.0]))
        assert len(iso) == 1
        np.testing.assert_allclose(np.abs(iso[0].coeffs), [1, 0, 0], atol=1e-10)

    def test_sleeping_top_has_full_isotropy(self):
        iso = releq.point_isotropy_algebra(TOP, SLEEPING)
        assert len(iso) == 1

    def test_circular_orbit_is_free(self):
        assert releq.point_isotropy_algebra(OSC, CIRCULAR) == []

    def test_trivial_group_empty(self):
        assert releq.point_isotropy_algebra(RIGID, np.ones(3)) == []


class TestFindRelativeEquilibrium:
    def test_converges_to_principal_axis(self):
        re = releq.find_relative_equilibrium(RIGID, np.array([0.1, 0.05, 0.98]))
        assert re.residual_norm <= 1e-9
        direction = re.z_e / np.linalg.norm(re.z_e)
        alignment = max(abs(direction @ e) for e in np.eye(3))
        assert alignment >= 1.0 - 1e-6

    def test_exact_start_returns_immediately(self):
        re = releq.find_relative_equilibrium(OSC, CIRCULAR, np.array([0, 0, 1.0]))
        assert re.iterations <= 1
        np.testing.assert_allclose(re.z_e, CIRCULAR, atol=1e-12)
        np.testing.assert_allclose(re.xi.coeffs, [0, 0, 1], atol=1e-10)

    def test_sleeping_top_minimal_norm_generator(self):
        re = releq.find_relative_equilibrium(TOP, SLEEPING, np.array([0.7]))
        assert re.residual_norm <= 1e-12
        np.testing.assert_allclose(re.xi.coeffs, [0.0], atol=1e-10)
        assert re.isotropy_dim == 1

    def test_momentum_recorded(self):
        re = releq.find_relative_equilibrium(TOP, SLEEPING)
        np.testing.assert_allclose(re.mu.coeffs, [2.5], atol=1e-12)


class TestMakeRelativeEquilibrium:
    def test_solves_generator_when_omitted(self):
        re = releq.make_relative_equilibrium(OSC, CIRCULAR)
        np.testing.assert_allclose(re.xi.coeffs, [0, 0, 1], atol=1e-10)

    def test_rejects_non_equilibrium(self):
        with pytest.raises(StructuralError):
            releq.make_relative_equilibrium(OSC, np.array([1.0, 0, 0, 0, 0, 0]))

    def test_residual_invariant_under_isotropy_shift(self):
        # shifting the generator inside the isotropy subalgebra changes nothing
        base = releq.relative_equilibrium_residual(TOP, SLEEPING, np.array([1.3]))
        shifted = releq.relative_equilibrium_residual(TOP, SLEEPING, np.array([1.3 + 5.0]))
        assert abs(base - shifted) <= 1e-12


def test_flow_follows_group_orbit():
    # the trajectory from a relative equilibrium is the one-parameter orbit
    from emcstab import dynamics

    re = releq.make_relative_equilibrium(OSC, CIRCULAR)
    t_final = 1.0
    traj = dynamics.integrate(OSC, CIRCULAR, t_final, 1e-3)
    g = lie.exponential(lie.AlgebraElement(OSC.group, t_final * re.xi.coeffs))
    expected = OSC.action(g, CIRCULAR)
    np.testing.assert_allclose(traj.states[-1], expected, atol=1e-9)
