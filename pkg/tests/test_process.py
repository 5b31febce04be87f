"""Core four-point process: recurrence, invariants, classical reference."""

import math

import numpy as np
import pytest

import zitterlab as zl
from zitterlab.process import VERTICES


def params(eps, hbar=1.0, mass=1.0, **kw):
    return zl.PhysParams(hbar=hbar, mass=mass, epsilon=eps, **kw)


class TestGamma:
    def test_unit_values(self):
        assert zl.gamma(params(1.0)) == 0.5 + 0.5j
        assert zl.gamma(params(4.0)) == 1.0 + 1.0j

    def test_physical_constants(self):
        # electron-scale numbers, checked against the closed form
        p = params(1e-20, hbar=1.0546e-34, mass=9.109e-31)
        g = zl.gamma(p)
        expected = math.sqrt(1.0546e-34 * 1e-20 / (4 * 9.109e-31))
        assert g == (1 + 1j) * expected
        assert g.real == pytest.approx(5.3797e-13, rel=1e-3)

    def test_modulus_squared(self):
        p = params(0.37, mass=2.5)
        assert abs(zl.gamma(p)) ** 2 == pytest.approx(p.hbar * p.epsilon / (2 * p.mass), rel=1e-14)


class TestPermutation:
    def test_vertex_listing(self):
        assert VERTICES.tolist() == [[1, 1], [1, -1], [-1, -1], [-1, 1]]

    def test_period_four(self):
        for sense in (zl.Sense.S_PLUS, zl.Sense.S_MINUS):
            p = zl.Permutation(sense)
            for j in range(1, 5):
                for n in range(9):
                    np.testing.assert_array_equal(p.apply(n + 4, j), p.apply(n, j))
                np.testing.assert_array_equal(p.apply(4, j), VERTICES[j - 1])

    def test_shifted_sum_is_zero(self):
        p = zl.Permutation()
        for n in range(8):
            total = sum(p.apply(n, j) for j in range(1, 5))
            np.testing.assert_array_equal(total, [0, 0])

    def test_s_minus_is_inverse(self):
        plus, minus = zl.Permutation(), zl.Permutation(zl.Sense.S_MINUS)
        for j in range(1, 5):
            fwd = plus.apply(1, j)
            k = 1 + next(i for i in range(4) if np.array_equal(VERTICES[i], fwd))
            np.testing.assert_array_equal(minus.apply(1, k), VERTICES[j - 1])


class TestVertexOffset:
    def test_boundary_offset_vanishes(self):
        for j in range(1, 5):
            np.testing.assert_array_equal(zl.vertex_offset(4, j, zl.Permutation()), [0, 0])
            np.testing.assert_array_equal(zl.vertex_offset(8, j, zl.Permutation()), [0, 0])

    def test_listed_values(self):
        p = zl.Permutation()
        np.testing.assert_array_equal(zl.vertex_offset(1, 1, p), [0, -2])
        # s^2 is the central inversion, so the offset is -2 u^3
        np.testing.assert_array_equal(zl.vertex_offset(2, 3, p), [2, 2])

    def test_components_in_allowed_set(self):
        p = zl.Permutation(zl.Sense.S_MINUS)
        for n in range(8):
            for j in range(1, 5):
                assert set(zl.vertex_offset(n, j, p).tolist()) <= {-2, 0, 2}

    def test_rejects_negative_step(self):
        with pytest.raises(ValueError):
            zl.vertex_offset(-1, 1, zl.Permutation())


class TestStep:
    def test_four_steps_close_the_cycle(self):
        state = zl.initial_state(params(0.3), zl.Permutation(), (0.2 + 0.1j, -0.4))
        s = state
        for _ in range(4):
            s = zl.step(s, zl.zero_velocity())
        np.testing.assert_allclose(s.vertices, state.vertices, atol=1e-15)
        assert s.step_index == 4

    def test_mean_is_euler_step(self):
        vel = zl.ConstantVelocity(1.0, 0.0)
        s = zl.initial_state(params(0.25), zl.Permutation(), (0, 0))
        for _ in range(4):
            s = zl.step(s, vel)
        np.testing.assert_allclose(s.mean, [1.0, 0.0], atol=1e-15)

    def test_single_vertex_hop(self):
        # gamma (s u^1 - u^1) = (1+i) * 0.5 * (0, -2) = (0, -1-i)
        s0 = zl.initial_state(params(1.0), zl.Permutation(), (0, 0))
        s1 = zl.step(s0, zl.zero_velocity())
        np.testing.assert_allclose(s1.vertices[0], [0.0, -1.0 - 1.0j], atol=1e-15)

    def test_nonfinite_velocity_rejected(self):
        bad = zl.ConstantVelocity(float("nan"), 0.0)
        s0 = zl.initial_state(params(0.1), zl.Permutation(), (0, 0))
        with pytest.raises(zl.NonFiniteVelocity):
            zl.step(s0, bad)


def offset_identity_deviation(run):
    """Vertices minus (mean + gamma * offset table), for every step."""
    g = (1 + 1j) * np.sqrt(run.params.hbar * run.epsilons / (4 * run.params.mass))
    offsets = run.perm.offset_table()[np.arange(len(run)) % 4]
    return np.abs(run.vertices - run.means[:, None, :] - g[:, None, None] * offsets)


class TestRunProcess:
    def test_boundary_states_repeat_for_zero_drift(self):
        run = zl.run_process(params(0.05), zl.Permutation(), zl.zero_velocity(), (1, 2), 2.0)
        for n in range(0, len(run), 4):
            np.testing.assert_allclose(run.vertices[n], run.vertices[0], atol=1e-15)

    def test_offset_identity_exact(self):
        run = zl.run_process(
            params(0.01), zl.Permutation(zl.Sense.S_MINUS), zl.CircularVelocity(), (0, 0), 1.0
        )
        # re-evaluating the identity costs one rounding of (mean + hop) - mean
        assert np.max(offset_identity_deviation(run)) <= 1e-13

    def test_mean_is_average_of_vertices(self):
        run = zl.run_process(params(0.01), zl.Permutation(), zl.CircularVelocity(), (0, 0), 1.0)
        dev = np.abs(run.vertices.mean(axis=1) - run.means)
        assert np.max(dev) <= 1e-13

    def test_circular_drift_tracks_exact_integral(self):
        # closed-form antiderivative of (cos t, sin t) from 0
        eps = 1e-3
        run = zl.run_process(params(eps), zl.Permutation(), zl.CircularVelocity(), (0, 0), 1.0)
        exact = np.stack([np.sin(run.times), 1.0 - np.cos(run.times)], axis=1)
        err = np.max(np.abs(run.means - exact))
        assert err < 5 * eps
        # first-order shrinkage
        run2 = zl.run_process(params(eps / 10), zl.Permutation(), zl.CircularVelocity(), (0, 0), 1.0)
        exact2 = np.stack([np.sin(run2.times), 1.0 - np.cos(run2.times)], axis=1)
        assert np.max(np.abs(run2.means - exact2)) < err / 5

    def test_complex_drift_components_decouple(self):
        run = zl.run_process(
            params(1e-2), zl.Permutation(), zl.ConstantVelocity(1.0, 1.0j), (0, 0), 0.1
        )
        assert np.max(np.abs(run.means[:, 0].imag)) == 0.0
        assert np.max(np.abs(run.means[:, 1].real)) == 0.0
        assert run.means[-1, 0].real == pytest.approx(0.1, rel=1e-12)
        assert run.means[-1, 1].imag == pytest.approx(0.1, rel=1e-12)

    def test_determinism(self):
        a = zl.run_process(params(1e-2), zl.Permutation(), zl.CircularVelocity(), (0.1, 0.2), 0.5)
        b = zl.run_process(params(1e-2), zl.Permutation(), zl.CircularVelocity(), (0.1, 0.2), 0.5)
        assert np.array_equal(a.vertices, b.vertices)
        assert np.array_equal(a.means, b.means)

    def test_sequence_protocol_matches_step(self):
        run = zl.run_process(params(0.2), zl.Permutation(), zl.CircularVelocity(), (0, 0), 2.0)
        s = zl.initial_state(params(0.2), zl.Permutation(), (0, 0))
        for n in range(1, 9):
            s = zl.step(s, zl.CircularVelocity())
            np.testing.assert_allclose(run[n].vertices, s.vertices, atol=1e-13)
        assert len(run) == 11

    def test_figure_pattern_of_real_positions(self):
        # relative to the center: edge midpoints at r=1,3, corners at r=2
        eps, a = 0.04, math.sqrt(0.04 / 4)
        run = zl.run_process(params(eps), zl.Permutation(), zl.CircularVelocity(), (0, 0), 1.0)
        rel = run.real_vertices() - run.real_means()[:, None, :]
        for n in range(8):
            got = {tuple(np.round(v / a).astype(int)) for v in rel[n]}
            if n % 4 == 0:
                assert got == {(0, 0)}
            elif n % 4 == 2:
                assert got == {(2, 2), (2, -2), (-2, 2), (-2, -2)}
            else:
                assert got == {(0, 2), (0, -2), (2, 0), (-2, 0)}


class TestEpsilonModes:
    def test_compton_epsilon_is_constant(self):
        p = zl.PhysParams(
            epsilon=123.0, epsilon_mode=zl.EpsilonMode.COMPTON, light_speed=2.0, mass=3.0
        )
        expected = 2 * math.pi / (4 * 3.0 * 4.0)
        assert p.compton_epsilon() == pytest.approx(expected, rel=1e-15)
        run = zl.run_process(p, zl.Permutation(), zl.zero_velocity(), (0, 0), 10 * expected)
        assert np.all(run.epsilons == run.epsilons[0])
        assert run.epsilons[0] == pytest.approx(expected, rel=1e-15)

    def test_de_broglie_refresh_follows_speed(self):
        # h/(4 m v^2) with v = |Re V| at the cycle boundary
        p = zl.PhysParams(epsilon=1.0, epsilon_mode=zl.EpsilonMode.DE_BROGLIE)
        vel = zl.ConstantVelocity(2.0, 0.0)
        run = zl.run_process(p, zl.Permutation(), vel, (0, 0), 2.0)
        expected = 2 * math.pi / (4 * 4.0)
        assert run.epsilons[1] == pytest.approx(expected, rel=1e-14)
        assert np.max(offset_identity_deviation(run)) <= 1e-13
        # cycle structure intact: boundary coincidence at every 4th step
        for n in range(0, len(run), 4):
            assert np.max(np.abs(run.vertices[n] - run.means[n])) <= 1e-14

    def test_de_broglie_varying_speed_changes_epsilon(self):
        p = zl.PhysParams(epsilon=1.0, epsilon_mode=zl.EpsilonMode.DE_BROGLIE)
        vel = zl.PolynomialVelocity((2.0, 3.0), (0.0,))
        run = zl.run_process(p, zl.Permutation(), vel, (0, 0), 3.0)
        assert len(set(np.round(run.epsilons[1:], 12))) > 1

    def test_epsilon_underflow(self):
        p = zl.PhysParams(
            epsilon=1.0, epsilon_mode=zl.EpsilonMode.DE_BROGLIE, epsilon_floor=1e-3
        )
        with pytest.raises(zl.EpsilonUnderflow):
            zl.run_process(p, zl.Permutation(), zl.ConstantVelocity(1e4, 0.0), (0, 0), 1.0)

    def test_zero_speed_rejected(self):
        p = zl.PhysParams(epsilon=1.0, epsilon_mode=zl.EpsilonMode.DE_BROGLIE)
        with pytest.raises(zl.EpsilonUnderflow):
            zl.run_process(p, zl.Permutation(), zl.zero_velocity(), (0, 0), 1.0)

    def test_invalid_params_rejected(self):
        for kw in (dict(hbar=-1.0), dict(mass=0.0), dict(epsilon=-0.1), dict(light_speed=0.0)):
            with pytest.raises(ValueError):
                zl.PhysParams(**kw)


class TestClassicalTrajectory:
    def test_zero_velocity_is_constant(self):
        path = zl.classical_trajectory(zl.zero_velocity(), (1, 2j), 1.0, 0.01)
        np.testing.assert_array_equal(path.positions[-1], path.positions[0])

    def test_circular_against_antiderivative(self):
        path = zl.classical_trajectory(zl.CircularVelocity(), (0, 0), math.pi, 1e-3)
        np.testing.assert_allclose(path.positions[-1], [0.0, 2.0], atol=1e-10)
        exact = np.stack([np.sin(path.times), 1 - np.cos(path.times)], axis=1)
        assert np.max(np.abs(path.positions - exact)) < 1e-10

    def test_polynomial_integral(self):
        vel = zl.PolynomialVelocity((0.0, 1.0), (0.0,))  # V_x = t
        path = zl.classical_trajectory(vel, (0, 0), 2.0, 1e-3)
        np.testing.assert_allclose(path.positions[-1], [2.0, 0.0], atol=1e-12)

    def test_sampled_table_interpolation(self):
        ts = np.linspace(0, 1, 11)
        vel = zl.SampledVelocity(ts, np.stack([ts, np.zeros_like(ts)], axis=1))
        path = zl.classical_trajectory(vel, (0, 0), 1.0, 1e-3)
        assert path.positions[-1][0] == pytest.approx(0.5, abs=1e-9)


def test_run_csv_format(tmp_path):
    run = zl.run_process(params(0.25), zl.Permutation(), zl.CircularVelocity(), (0, 0), 1.0)
    path = tmp_path / "run.csv"
    run.to_csv(path)
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    assert header[:2] == ["n", "t"]
    assert header[2:6] == ["re_z1_1", "im_z1_1", "re_z2_1", "im_z2_1"]
    assert header[-4:] == ["re_mean1", "im_mean1", "re_mean2", "im_mean2"]
    assert len(lines) == len(run) + 1
    # 17 significant digits survive a round trip
    row = lines[2].split(",")
    assert float(row[1]) == run.times[1]
    run.to_csv(tmp_path / "run2.csv")
    assert (tmp_path / "run2.csv").read_bytes() == path.read_bytes()
