import numpy as np
import numpy.testing as npt
import pytest

from spinmid.core import eval_vector_field, make_model, ray_extension
from spinmid.errors import ConfigurationError, SingularRayError
from spinmid.quat import (
    QI,
    QJ,
    QK,
    QONE,
    collective_model,
    double_cover,
    hopf,
    hopf_section,
    hopf_tangent,
    hopf_tangent_adjoint,
    phase_align,
    qconj,
    qinv,
    qmul,
    qnorm,
    quat_hamiltonian_vf,
)

from conftest import random_spins, random_unit_spins


def random_quats(rng, n, scale=1.0):
    return rng.normal(size=(n, 4)) * scale


def fibre_phase(rng, n):
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    out = np.zeros((n, 4))
    out[:, 0] = np.cos(theta)
    out[:, 3] = np.sin(theta)
    return out


class TestAlgebra:
    def test_defining_relations(self):
        npt.assert_allclose(qmul(QI, QJ), QK)
        npt.assert_allclose(qmul(QJ, QK), QI)
        npt.assert_allclose(qmul(QK, QI), QJ)
        npt.assert_allclose(qmul(QI, QI), -QONE)

    def test_identity(self, rng):
        q = random_quats(rng, 5)
        npt.assert_allclose(qmul(np.broadcast_to(QONE, q.shape), q), q)

    def test_hand_expansion(self):
        npt.assert_allclose(qmul(QONE + QI, QONE + QJ), QONE + QI + QJ + QK)

    def test_norm_multiplicative(self, rng):
        a, b = random_quats(rng, 10), random_quats(rng, 10)
        npt.assert_allclose(qnorm(qmul(a, b)), qnorm(a) * qnorm(b), rtol=1e-13)

    def test_associativity_sampled(self, rng):
        a, b, c = (random_quats(rng, 20) for _ in range(3))
        npt.assert_allclose(qmul(qmul(a, b), c), qmul(a, qmul(b, c)), rtol=1e-12, atol=1e-12)

    def test_inverse(self, rng):
        a = random_quats(rng, 10)
        prod = qmul(a, qinv(a))
        npt.assert_allclose(prod, np.broadcast_to(QONE, prod.shape), atol=1e-14)

    def test_inverse_of_zero(self):
        with pytest.raises(SingularRayError):
            qinv(np.zeros(4))


class TestHopf:
    def test_unit_quaternion(self):
        npt.assert_allclose(hopf(QONE), [[0.0, 0.0, 0.25]], atol=1e-16)

    def test_scaled_quaternion(self):
        npt.assert_allclose(hopf(2.0 * QONE), [[0.0, 0.0, 1.0]], atol=1e-15)

    def test_homogeneity(self, rng):
        z = random_quats(rng, 6)
        lam = rng.uniform(0.3, 3.0, size=(6, 1))
        npt.assert_allclose(hopf(lam * z), lam**2 * hopf(z), rtol=1e-12)

    def test_norm_identity(self, rng):
        z = random_quats(rng, 10)
        npt.assert_allclose(np.linalg.norm(hopf(z), axis=1), qnorm(z) ** 2 / 4.0, rtol=1e-13)

    def test_fibre_invariance(self, rng):
        z = random_quats(rng, 8)
        for _ in range(5):
            diff = hopf(qmul(z, fibre_phase(rng, 8))) - hopf(z)
            assert np.max(np.abs(diff)) <= 1e-13 * max(1.0, np.max(qnorm(z) ** 2))

    def test_zero_error(self):
        with pytest.raises(SingularRayError):
            hopf(np.zeros((1, 4)))

    def test_restriction_is_double_cover(self, rng):
        # on span{1, i} components, four times the image equals the squared
        # complex number under (k <-> 1, j <-> -i)
        xy = rng.normal(size=(6, 2))
        z = np.zeros((6, 4))
        z[:, 0], z[:, 1] = xy[:, 0], xy[:, 1]
        w = hopf(z)
        npt.assert_allclose(w[:, 0], 0.0, atol=1e-15)
        identified = w[:, 2] - 1j * w[:, 1]
        npt.assert_allclose(4.0 * identified, double_cover(xy[:, 0] + 1j * xy[:, 1]), rtol=1e-13, atol=1e-13)


class TestDoubleCover:
    def test_examples(self):
        npt.assert_allclose(double_cover([1.0]), [1.0])
        npt.assert_allclose(double_cover([1j]), [-1.0])
        npt.assert_allclose(double_cover([1 + 1j, 2.0]), [2j, 4.0])

    def test_norm(self, rng):
        z = rng.normal(size=5) + 1j * rng.normal(size=5)
        npt.assert_allclose(np.abs(double_cover(z)), np.abs(z) ** 2, rtol=1e-14)


class TestHopfTangent:
    def test_zero_direction(self, rng):
        z = random_quats(rng, 4)
        npt.assert_allclose(hopf_tangent(z, np.zeros_like(z)), np.zeros((4, 3)))

    def test_hand_example(self):
        npt.assert_allclose(hopf_tangent(QONE, QI), [[0.0, -0.5, 0.0]], atol=1e-16)

    def test_against_finite_differences(self, rng):
        z = random_quats(rng, 5)
        u = random_quats(rng, 5)
        h = 1e-6
        fd = (hopf(z + h * u) - hopf(z - h * u)) / (2.0 * h)
        npt.assert_allclose(hopf_tangent(z, u), fd, rtol=1e-6, atol=1e-8)

    def test_linearity(self, rng):
        z = random_quats(rng, 3)
        u, v = random_quats(rng, 3), random_quats(rng, 3)
        lhs = hopf_tangent(z, 2.0 * u - 3.0 * v)
        rhs = 2.0 * hopf_tangent(z, u) - 3.0 * hopf_tangent(z, v)
        npt.assert_allclose(lhs, rhs, rtol=1e-13, atol=1e-13)


class TestHopfTangentAdjoint:
    def test_zero(self, rng):
        z = random_quats(rng, 4)
        npt.assert_allclose(hopf_tangent_adjoint(z, np.zeros((4, 3))), np.zeros((4, 4)))

    def test_adjoint_identity(self, rng):
        for _ in range(100):
            z = random_quats(rng, 3)
            u = random_quats(rng, 3)
            v = rng.normal(size=(3, 3))
            lhs = float(np.sum(hopf_tangent(z, u) * v))
            rhs = float(np.sum(u * hopf_tangent_adjoint(z, v)))
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_matches_matrix_route(self, rng):
        # assemble the 3x4 tangent matrix column by column and transpose it
        z = random_quats(rng, 2)
        v = rng.normal(size=(2, 3))
        direct = hopf_tangent_adjoint(z, v)
        for i in range(2):
            T = np.zeros((3, 4))
            for col in range(4):
                e = np.zeros((2, 4))
                e[i, col] = 1.0
                T[:, col] = hopf_tangent(z, e)[i]
            npt.assert_allclose(direct[i], T.T @ v[i], rtol=1e-13, atol=1e-13)

    def test_gradient_chain_rule(self, rng):
        model = make_model("chain", n=3)
        F = collective_model(model)
        z = random_quats(rng, 3)
        h = 1e-6
        fd = np.zeros_like(z)
        for i in range(3):
            for j in range(4):
                plus, minus = z.copy(), z.copy()
                plus[i, j] += h
                minus[i, j] -= h
                fd[i, j] = (F.value(plus) - F.value(minus)) / (2.0 * h)
        npt.assert_allclose(F.gradient(z), fd, rtol=1e-6, atol=1e-8)


class TestCollectiveModel:
    def test_value_composition(self, rng):
        F = collective_model(make_model("chain", n=4))
        z = random_quats(rng, 4)
        assert abs(F.value(z) - F.base.value(hopf(z))) <= 1e-14 * max(1.0, abs(F.value(z)))

    def test_homogeneity_for_ray_constant_base(self, rng):
        F = collective_model(ray_extension(make_model("chain", n=4)))
        z = random_quats(rng, 4)
        lam = rng.uniform(0.4, 2.5, size=(4, 1))
        assert abs(F.value(lam * z) - F.value(z)) <= 1e-12 * max(1.0, abs(F.value(z)))


class TestQuatHamiltonianField:
    def test_constant_hamiltonian(self, rng):
        from spinmid.core import HamiltonianModel

        const = HamiltonianModel("const", 2, lambda a: 1.0, lambda a: np.zeros_like(a))
        F = collective_model(const)
        z = random_quats(rng, 2)
        npt.assert_allclose(quat_hamiltonian_vf(F, z), np.zeros((2, 4)))

    def test_tangency_and_orthogonality_for_ray_constant_lift(self, rng):
        F = collective_model(ray_extension(make_model("chain", n=4)))
        worst_tan, worst_orth = 0.0, 0.0
        for _ in range(100):
            z = hopf_section(random_spins(rng, 4))
            z = qmul(z, fibre_phase(rng, 4))
            X = quat_hamiltonian_vf(F, z)
            t = qmul(qinv(z), X)
            worst_tan = max(worst_tan, float(np.max(np.abs(t[:, 0]))))
            o = qmul(np.broadcast_to(QK, t.shape), t)
            worst_orth = max(worst_orth, float(np.max(np.abs(o[:, 0]))))
        assert worst_tan <= 1e-10
        assert worst_orth <= 1e-10

    def test_orthogonality_fails_for_non_ray_constant(self, rng):
        # the dichotomy: without ray constancy the lift acquires a fibre
        # component bounded away from zero
        F = collective_model(make_model("chain", n=4))
        z = hopf_section(random_unit_spins(rng, 4))
        X = quat_hamiltonian_vf(F, z)
        o = qmul(np.broadcast_to(QK, z.shape), qmul(qinv(z), X))
        assert np.max(np.abs(o[:, 0])) >= 1e-2

    def test_projection_intertwines_fields(self, rng):
        model = ray_extension(make_model("chain", n=4))
        F = collective_model(model)
        worst = 0.0
        for _ in range(20):
            z = qmul(hopf_section(random_spins(rng, 4)), fibre_phase(rng, 4))
            lhs = hopf_tangent(z, quat_hamiltonian_vf(F, z))
            rhs = eval_vector_field(model, hopf(z))
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        assert worst <= 1e-10


class TestHopfSection:
    def test_north_pole(self):
        npt.assert_allclose(hopf_section([[0.0, 0.0, 1.0]]), [[2.0, 0.0, 0.0, 0.0]], atol=1e-15)

    def test_norm_scaling(self):
        z = hopf_section([[0.0, 0.0, 2.5]])
        assert qnorm(z)[0] == pytest.approx(2.0 * np.sqrt(2.5), rel=1e-14)

    def test_round_trip_random(self, rng):
        w = random_spins(rng, 1000, (0.2, 5.0))
        err = np.abs(hopf(hopf_section(w)) - w)
        assert np.max(err / np.linalg.norm(w, axis=1)[:, None]) <= 1e-12

    def test_south_pole_branch(self):
        w = np.array([[0.0, 0.0, -1.0], [1e-8, -1e-8, -2.0]])
        npt.assert_allclose(hopf(hopf_section(w)), w, atol=1e-14)

    def test_origin_error(self):
        with pytest.raises(SingularRayError):
            hopf_section([[0.0, 0.0, 1e-9]])


class TestPhaseAlign:
    def test_aligned_is_identity(self, rng):
        z = hopf_section(random_spins(rng, 4))
        npt.assert_allclose(phase_align(z, z), z, rtol=1e-13, atol=1e-14)

    def test_alignment_minimizes_distance(self, rng):
        z = hopf_section(random_spins(rng, 4))
        Z0 = qmul(hopf_section(random_spins(rng, 4)), fibre_phase(rng, 4))
        Z = phase_align(z, Z0)
        best = np.linalg.norm(Z - z, axis=1)
        for theta in np.linspace(0.0, 2.0 * np.pi, 37):
            ph = np.zeros((4, 4))
            ph[:, 0], ph[:, 3] = np.cos(theta), np.sin(theta)
            assert np.all(best <= np.linalg.norm(qmul(Z0, ph) - z, axis=1) + 1e-12)
