"""Split-step solver, analytic packets, gradient fields, frame exports."""

import math

import numpy as np
import pytest

import zitterlab as zl
from zitterlab import schrodinger as sch
from zitterlab.fileio import read_zlab_frame


@pytest.fixture(scope="module")
def grid128():
    return zl.Grid2D(128, 10.0)


def l2_diff(grid, a, b):
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2) * grid.cell_area()))


class TestGrid:
    def test_geometry(self, grid128):
        assert grid128.spacing == pytest.approx(20.0 / 128)
        assert grid128.axis[0] == -10.0
        assert grid128.axis[-1] == pytest.approx(10.0 - grid128.spacing)
        assert grid128.nyquist == pytest.approx(math.pi / grid128.spacing)

    @pytest.mark.parametrize("n", [8, 100, 15])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError):
            zl.Grid2D(n, 10.0)


class TestInitGaussian:
    def test_normalized(self, grid128):
        psi = zl.init_gaussian(grid128, (0.5, -0.25), 1.0, (1.0, 0.0))
        assert abs(psi.norm() - 1.0) < 1e-9

    def test_even_symmetry_without_boost(self, grid128):
        psi = zl.init_gaussian(grid128, (0, 0), 1.0, (0, 0))
        v = psi.values
        assert np.max(np.abs(v.imag)) == 0.0
        # x -> -x mirror (axis excludes +L, so compare away from row 0)
        assert np.max(np.abs(v[1:, :] - v[:0:-1, :])) < 1e-12

    def test_boundary_amplitude_tiny(self):
        grid = zl.Grid2D(256, 20.0)
        psi = zl.init_gaussian(grid, (0, 0), 1.0, (0, 0))
        edge = np.abs(psi.values[0, :]).max()
        assert edge < 1e-40

    def test_too_narrow_rejected(self, grid128):
        with pytest.raises(zl.PacketTooNarrow):
            zl.init_gaussian(grid128, (0, 0), 0.5, (0, 0))

    def test_boundary_leak_rejected(self, grid128):
        with pytest.raises(zl.PacketTouchesBoundary):
            zl.init_gaussian(grid128, (9.0, 0), 1.0, (0, 0))

    def test_fast_boost_rejected(self, grid128):
        with pytest.raises(zl.ResolutionLoss):
            zl.init_gaussian(grid128, (0, 0), 1.0, (0.6 * grid128.nyquist, 0))


class TestAnalyticFreeGaussian:
    def test_matches_init_at_t0(self, grid128):
        psi = zl.init_gaussian(grid128, (0.5, 0), 1.0, (1.0, -0.5))
        exact = zl.analytic_free_gaussian(grid128, 1.0, (1.0, -0.5), (0.5, 0), 0.0)
        assert l2_diff(grid128, psi.values, exact.values) < 1e-12

    def test_dispersion_width(self, grid128):
        t = 1.5
        psi = zl.analytic_free_gaussian(grid128, 1.0, (0, 0), (0, 0), t)
        _, _, sx, sy = zl.moments(psi)
        expected = math.sqrt(1.0 + (t / 2.0) ** 2)
        assert sx == pytest.approx(expected, rel=1e-9)
        assert sy == pytest.approx(expected, rel=1e-9)

    def test_centroid_translates_with_boost(self, grid128):
        psi = zl.analytic_free_gaussian(grid128, 1.0, (1.0, 0.0), (0, 0), 1.0)
        x_mean, y_mean, _, _ = zl.moments(psi)
        assert x_mean == pytest.approx(1.0, abs=1e-9)
        assert y_mean == pytest.approx(0.0, abs=1e-9)

    def test_solves_schrodinger_spectrally(self, grid128):
        # i hbar dPsi/dt + (hbar^2/2m) Lap Psi == 0, time derivative by
        # central difference of analytic frames
        dt = 1e-5
        minus, here, plus = (
            zl.analytic_free_gaussian(grid128, 1.0, (0.5, 0), (0, 0), 0.4 + k * dt)
            for k in (-1, 0, 1)
        )
        dpsi_dt = (plus.values - minus.values) / (2 * dt)
        rhs = 0.5j * sch.spectral_laplacian(grid128, here.values)
        assert np.max(np.abs(dpsi_dt - rhs)) < 1e-7


class TestSplitStep:
    def test_free_evolution_matches_analytic(self, grid128):
        psi0 = zl.init_gaussian(grid128, (0, 0), 1.0, (1.0, 0.0))
        psi = zl.split_step_evolve(psi0, zl.free_potential(), 1e-3, 250)
        exact = zl.analytic_free_gaussian(grid128, 1.0, (1.0, 0.0), (0, 0), psi.time)
        assert l2_diff(grid128, psi.values, exact.values) < 1e-6

    def test_norm_conserved(self, grid128):
        psi0 = zl.init_gaussian(grid128, (2.0, 0), math.sqrt(0.5), (0, 0))
        psi = zl.split_step_evolve(psi0, zl.harmonic_potential(1.0), 1e-3, 1000)
        assert abs(psi.norm() - 1.0) < 1e-12

    def test_coherent_state_returns_after_period(self, grid128):
        omega = 1.0
        psi0 = zl.init_gaussian(grid128, (2.0, 0), math.sqrt(0.5 / omega), (0, 0))
        n_steps = 3142
        dt = 2 * math.pi / omega / n_steps
        psi = zl.split_step_evolve(psi0, zl.harmonic_potential(omega), dt, n_steps)
        assert l2_diff(grid128, psi.values, psi0.values) < 1e-5

    def test_second_order_in_dt(self, grid128):
        omega = 1.0
        psi0 = zl.init_gaussian(grid128, (2.0, 0), math.sqrt(0.5), (0, 0))
        pot = zl.harmonic_potential(omega)
        errs = []
        for n_steps in (157, 314, 628):
            dt = 1.0 / n_steps
            psi = zl.split_step_evolve(psi0, pot, dt, n_steps)
            ref = zl.split_step_evolve(psi0, pot, 1.0 / 5024, 5024)
            errs.append(l2_diff(grid128, psi.values, ref.values))
        rate = zl.fit_rate([1.0 / 157, 1.0 / 314, 1.0 / 628], errs)
        assert rate == pytest.approx(2.0, abs=0.2)

    def test_eigenstate_energy_conserved(self, grid128):
        pot = zl.harmonic_potential(1.0)
        psi0 = zl.harmonic_ground_state(grid128, 1.0)
        e0 = zl.energy(psi0, pot)
        assert e0 == pytest.approx(1.0, rel=1e-10)  # hbar*omega in 2D
        psi = zl.split_step_evolve(psi0, pot, 1e-3, 1000)
        assert abs(zl.energy(psi, pot) - e0) / e0 < 1e-8

    def test_free_packet_energy_conserved(self, grid128):
        pot = zl.free_potential()
        psi0 = zl.init_gaussian(grid128, (0, 0), 1.0, (1.0, 0.0))
        e0 = zl.energy(psi0, pot)
        psi = zl.split_step_evolve(psi0, pot, 1e-3, 1000)
        assert abs(zl.energy(psi, pot) - e0) / abs(e0) < 1e-8

    def test_grid_sampled_potential_matches_closed_form(self, grid128):
        X, Y = grid128.mesh()
        sampled = sch.Potential(sch.PotentialKind.GRID_SAMPLED, samples=0.5 * (X**2 + Y**2))
        psi0 = zl.init_gaussian(grid128, (2.0, 0), math.sqrt(0.5), (0, 0))
        a = zl.split_step_evolve(psi0, sampled, 1e-3, 200)
        b = zl.split_step_evolve(psi0, zl.harmonic_potential(1.0), 1e-3, 200)
        assert np.array_equal(a.values, b.values)

    def test_grid_sampled_potential_shape_checked(self, grid128):
        bad = sch.Potential(sch.PotentialKind.GRID_SAMPLED, samples=np.zeros((4, 4)))
        psi0 = zl.init_gaussian(grid128, (0, 0), 1.0, (0, 0))
        with pytest.raises(ValueError):
            zl.split_step_evolve(psi0, bad, 1e-3, 1)

    def test_alias_guard_trips_on_noise(self, grid128):
        rng = np.random.default_rng(1)
        noise = rng.standard_normal((128, 128)) + 1j * rng.standard_normal((128, 128))
        noise /= math.sqrt(np.sum(np.abs(noise) ** 2) * grid128.cell_area())
        with pytest.raises(zl.ResolutionLoss):
            zl.split_step_evolve(zl.WaveFunction(grid128, noise, 0.0), zl.free_potential(), 1e-3, 1)

    def test_evolve_frames_timestamps(self, grid128):
        psi0 = zl.init_gaussian(grid128, (0, 0), 1.0, (0, 0))
        frames = zl.evolve_frames(psi0, zl.free_potential(), 1e-3, 100, 20)
        assert len(frames) == 6
        assert [round(f.time, 9) for f in frames] == [0.0, 0.02, 0.04, 0.06, 0.08, 0.1]
        with pytest.raises(ValueError):
            zl.evolve_frames(psi0, zl.free_potential(), 1e-3, 100, 30)


class TestGradientFields:
    def test_plane_phase_gradient(self, grid128):
        # grad S = hbar k0 wherever the density supports the ratio; at the
        # deep tail the 1/|Psi| amplification of FFT roundoff takes over
        k0 = (1.25, -0.75)
        psi = zl.init_gaussian(grid128, (0, 0), 1.2, k0)
        fields = zl.density_and_phase_gradients(psi)
        bulk = fields.rho > 1e-6 * fields.rho.max()
        assert np.allclose(fields.grad_s[bulk][:, 0], k0[0], atol=1e-5)
        assert np.allclose(fields.grad_s[bulk][:, 1], k0[1], atol=1e-5)
        assert abs(fields.grad_s[64, 64, 0] - k0[0]) < 1e-8

    def test_harmonic_ground_log_density_slope(self, grid128):
        omega, mass, hbar = 1.0, 1.0, 1.0
        psi = zl.harmonic_ground_state(grid128, omega)
        fields = zl.density_and_phase_gradients(psi, rho_floor=1e-6)
        X, Y = grid128.mesh()
        bulk = ~fields.node_mask
        expected = -2.0 * mass * omega / hbar * X
        assert np.max(np.abs(fields.grad_log_rho[..., 0][bulk] - expected[bulk])) < 1e-6
        assert np.max(np.abs(fields.grad_s[bulk])) < 1e-10

    def test_mask_flags_low_density(self, grid128):
        psi = zl.init_gaussian(grid128, (0, 0), 1.0, (0, 0))
        fields = zl.density_and_phase_gradients(psi, rho_floor=1e-4)
        assert fields.node_mask.any() and not fields.node_mask.all()
        assert np.all(fields.grad_s[fields.node_mask] == 0.0)

    def test_spectral_matches_fd4_at_h4(self):
        devs = []
        for n in (128, 256):
            grid = zl.Grid2D(n, 10.0)
            psi = zl.analytic_free_gaussian(grid, 1.0, (1.0, 0.5), (0, 0), 0.4)
            gx, _ = sch.spectral_gradient(grid, psi.values)
            h = grid.spacing
            v = psi.values
            fd4 = (
                -np.roll(v, -2, axis=0)
                + 8 * np.roll(v, -1, axis=0)
                - 8 * np.roll(v, 1, axis=0)
                + np.roll(v, 2, axis=0)
            ) / (12 * h)
            bulk = psi.density() > 1e-4 * psi.density().max()
            devs.append(np.max(np.abs((gx - fd4)[bulk])))
        assert devs[0] / devs[1] == pytest.approx(16.0, rel=0.25)


class TestExports:
    def test_zlab_roundtrip(self, grid128, tmp_path):
        psi = zl.init_gaussian(grid128, (0.5, 0), 1.0, (1.0, 0))
        psi.time = 0.625
        path = tmp_path / "frame.zlab"
        sch.export_frame(path, psi)
        values, half_width, time = read_zlab_frame(path)
        assert half_width == 10.0
        assert time == 0.625
        assert np.array_equal(values, psi.values)

    def test_summary_csv(self, grid128, tmp_path):
        psi0 = zl.init_gaussian(grid128, (0, 0), 1.0, (0, 0))
        frames = zl.evolve_frames(psi0, zl.free_potential(), 1e-3, 40, 20)
        path = tmp_path / "summary.csv"
        sch.frames_summary_csv(path, frames, zl.free_potential())
        lines = path.read_text().splitlines()
        assert lines[0] == "t,norm,energy,x_mean,y_mean,sigma_x,sigma_y"
        assert len(lines) == 4
        norm = float(lines[1].split(",")[1])
        assert norm == pytest.approx(1.0, abs=1e-9)
