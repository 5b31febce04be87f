"""2D time-dependent Schrodinger solver on a periodic grid.

Strang-split spectral scheme: half potential kick, exact kinetic phase in
Fourier space, half potential kick.  Packets must stay well away from the box
boundary; guards reject under-resolved or boundary-touching initial data and
an aliasing check aborts evolutions that fill the top of the spectrum.

i hbar dPsi/dt = -(hbar^2/2m) Lap Psi + V(x) Psi
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import PacketTooNarrow, PacketTouchesBoundary, ResolutionLoss
from .fileio import write_csv, write_zlab_frame

# fraction of max rho below which a cell counts as a node
DEFAULT_RHO_FLOOR = 1e-12
# spectral band |k|_inf >= ALIAS_BAND_FRACTION * k_max watched by the aliasing guard
ALIAS_BAND_FRACTION = 0.75
ALIAS_MASS_LIMIT = 1e-8


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid on [-L, L)^2 with n points per axis (power of two)."""

    n: int
    half_width: float

    def __post_init__(self):
        if self.n < 16 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not (math.isfinite(self.half_width) and self.half_width > 0):
            raise ValueError(f"half_width must be finite and > 0, got {self.half_width}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n)

    def mesh(self):
        """(X, Y) with array index [ix, iy] at position (x[ix], y[iy])."""
        x = self.axis
        return np.meshgrid(x, x, indexing="ij")

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)

    @property
    def nyquist(self) -> float:
        return np.pi / self.spacing

    def cell_area(self) -> float:
        return self.spacing**2


@dataclass
class WaveFunction:
    """Complex field on a Grid2D at one instant; values indexed [ix, iy]."""

    grid: Grid2D
    values: np.ndarray
    time: float = 0.0

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_area()))

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.values.copy(), self.time)


class PotentialKind(Enum):
    FREE = "free"
    HARMONIC = "harmonic"
    GRID_SAMPLED = "grid_sampled"


@dataclass(frozen=True)
class Potential:
    """Real potential energy V(x) on the grid.

    harmonic: V = (m/2)(wx^2 x^2 + wy^2 y^2); the periodic wrap of V only
    matters where packets never go (boundary guard keeps them inside).
    """

    kind: PotentialKind = PotentialKind.FREE
    omega: tuple = (1.0, 1.0)
    samples: np.ndarray | None = None

    def values(self, grid: Grid2D, mass: float) -> np.ndarray:
        if self.kind is PotentialKind.FREE:
            return np.zeros((grid.n, grid.n))
        if self.kind is PotentialKind.HARMONIC:
            X, Y = grid.mesh()
            wx, wy = self.omega
            return 0.5 * mass * ((wx * X) ** 2 + (wy * Y) ** 2)
        v = np.asarray(self.samples, dtype=float)
        if v.shape != (grid.n, grid.n):
            raise ValueError(f"sampled potential shape {v.shape} != grid {(grid.n, grid.n)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("sampled potential contains non-finite values")
        return v


def free_potential() -> Potential:
    return Potential(PotentialKind.FREE)


def harmonic_potential(omega_x: float, omega_y: float | None = None) -> Potential:
    return Potential(PotentialKind.HARMONIC, (omega_x, omega_x if omega_y is None else omega_y))


def _tail_mass_outside_box(grid: Grid2D, center, sigma0: float) -> float:
    """Probability mass of the density Gaussian outside [-L, L]^2 (upper bound)."""
    total = 0.0
    for c in center:
        lo = (grid.half_width + c) / (math.sqrt(2.0) * sigma0)
        hi = (grid.half_width - c) / (math.sqrt(2.0) * sigma0)
        total += 0.5 * (math.erfc(hi) + math.erfc(lo))
    return total


def init_gaussian(grid: Grid2D, center, sigma0: float, k0) -> WaveFunction:
    """Normalized Gaussian packet sqrt(rho0) e^{i k0.x}, rho0 ~ exp(-|x-c|^2/2 sigma0^2)."""
    center = np.asarray(center, dtype=float).reshape(2)
    k0 = np.asarray(k0, dtype=float).reshape(2)
    if sigma0 < 4.0 * grid.spacing:
        raise PacketTooNarrow(
            f"sigma0 = {sigma0:g} is below 4 grid spacings ({4 * grid.spacing:g})"
        )
    if _tail_mass_outside_box(grid, center, sigma0) > 1e-12:
        raise PacketTouchesBoundary(
            f"packet at {tuple(center)} with sigma0 = {sigma0:g} leaks over the box edge"
        )
    if np.max(np.abs(k0)) >= 0.5 * grid.nyquist:
        raise ResolutionLoss(
            f"|k0| = {np.max(np.abs(k0)):g} exceeds half the Nyquist wavenumber {grid.nyquist:g}"
        )
    X, Y = grid.mesh()
    envelope = np.exp(-((X - center[0]) ** 2 + (Y - center[1]) ** 2) / (4.0 * sigma0**2))
    values = envelope * np.exp(1j * (k0[0] * X + k0[1] * Y))
    values = values / np.sqrt(np.sum(np.abs(values) ** 2) * grid.cell_area())
    return WaveFunction(grid, values, 0.0)


def _alias_band_mass(grid: Grid2D, spectrum: np.ndarray) -> float:
    k = np.abs(grid.wavenumbers)
    band = np.maximum.outer(k, k) >= ALIAS_BAND_FRACTION * grid.nyquist
    total = float(np.sum(np.abs(spectrum) ** 2))
    if total == 0.0:
        return 0.0
    return float(np.sum(np.abs(spectrum[band]) ** 2)) / total


def split_step_evolve(
    psi: WaveFunction,
    pot: Potential,
    dt: float,
    n_steps: int,
    hbar: float = 1.0,
    mass: float = 1.0,
) -> WaveFunction:
    """Advance by n_steps of dt with the Strang-split spectral scheme.

    Second-order accurate in dt; each factor is unitary so the discrete norm
    is conserved to roundoff.  Raises ResolutionLoss if more than 1e-8 of the
    spectral mass ends up in the top quarter of the wavenumber range.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    grid = psi.grid
    v = pot.values(grid, mass)
    half_kick = np.exp(-0.5j * dt * v / hbar)
    k = grid.wavenumbers
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    kinetic_phase = np.exp(-0.5j * hbar * dt * k2 / mass)
    values = psi.values
    spectrum = None
    for _ in range(n_steps):
        spectrum = np.fft.fft2(values * half_kick) * kinetic_phase
        values = np.fft.ifft2(spectrum) * half_kick
    if spectrum is not None and _alias_band_mass(grid, np.fft.fft2(values)) > ALIAS_MASS_LIMIT:
        raise ResolutionLoss("spectral mass reached the aliasing band; refine the grid")
    return WaveFunction(grid, values, psi.time + n_steps * dt)


def evolve_frames(
    psi: WaveFunction,
    pot: Potential,
    dt: float,
    n_steps: int,
    frame_stride: int,
    hbar: float = 1.0,
    mass: float = 1.0,
) -> list[WaveFunction]:
    """Evolve and snapshot every frame_stride steps (the t = 0 frame included)."""
    if n_steps % frame_stride != 0:
        raise ValueError("n_steps must be a multiple of frame_stride")
    frames = [psi.copy()]
    current = psi
    for _ in range(n_steps // frame_stride):
        current = split_step_evolve(current, pot, dt, frame_stride, hbar, mass)
        frames.append(current)
    return frames


def analytic_free_gaussian(
    grid: Grid2D, sigma0: float, k0, center, t: float, hbar: float = 1.0, mass: float = 1.0
) -> WaveFunction:
    """Exact free evolution of the init_gaussian packet, sampled on the grid.

    Per axis, with alpha = 1 + i hbar t/(2 m sigma0^2) and v0 = hbar k0/m:
    psi = (2 pi sigma0^2)^(-1/4) alpha^(-1/2)
          exp[-(x - c - v0 t)^2/(4 sigma0^2 alpha) + i k0 x - i hbar k0^2 t/(2m)],
    so the density width grows as sigma(t) = sigma0 |alpha|.
    """
    center = np.asarray(center, dtype=float).reshape(2)
    k0 = np.asarray(k0, dtype=float).reshape(2)
    alpha = 1.0 + 1j * hbar * t / (2.0 * mass * sigma0**2)
    X, Y = grid.mesh()
    values = np.ones((grid.n, grid.n), dtype=complex)
    for axis_coord, c, kk in ((X, center[0], k0[0]), (Y, center[1], k0[1])):
        shifted = axis_coord - c - (hbar * kk / mass) * t
        values = values * (
            (2.0 * np.pi * sigma0**2) ** (-0.25)
            * alpha ** (-0.5)
            * np.exp(
                -(shifted**2) / (4.0 * sigma0**2 * alpha)
                + 1j * kk * axis_coord
                - 0.5j * hbar * kk**2 * t / mass
            )
        )
    return WaveFunction(grid, values, t)


def harmonic_ground_state(grid: Grid2D, omega: float, hbar: float = 1.0, mass: float = 1.0) -> WaveFunction:
    """Real ground state of the isotropic harmonic well, normalized on the grid."""
    X, Y = grid.mesh()
    values = np.exp(-0.5 * mass * omega * (X**2 + Y**2) / hbar).astype(complex)
    values /= np.sqrt(np.sum(np.abs(values) ** 2) * grid.cell_area())
    return WaveFunction(grid, values, 0.0)


def spectral_gradient(grid: Grid2D, values: np.ndarray):
    """(d/dx, d/dy) of a periodic field via FFT; returns two arrays."""
    k = grid.wavenumbers
    spectrum = np.fft.fft2(values)
    gx = np.fft.ifft2(1j * k[:, None] * spectrum)
    gy = np.fft.ifft2(1j * k[None, :] * spectrum)
    return gx, gy


def spectral_laplacian(grid: Grid2D, values: np.ndarray) -> np.ndarray:
    k = grid.wavenumbers
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    return np.fft.ifft2(-k2 * np.fft.fft2(values))


@dataclass
class GradientFields:
    """rho, grad log rho, grad S (both real (n, n, 2) arrays) and the node mask.

    Gradients come from the spectral ratio grad(Psi)/Psi, which needs no phase
    unwrapping: grad S = hbar Im(grad Psi/Psi), grad log rho = 2 Re(grad Psi/Psi).
    node_mask is True where rho < rho_floor * max(rho); gradients there are 0
    and must not be used.
    """

    rho: np.ndarray
    grad_log_rho: np.ndarray
    grad_s: np.ndarray
    node_mask: np.ndarray


def density_and_phase_gradients(
    psi: WaveFunction, hbar: float = 1.0, rho_floor: float = DEFAULT_RHO_FLOOR
) -> GradientFields:
    rho = psi.density()
    mask = rho < rho_floor * float(rho.max())
    gx, gy = spectral_gradient(psi.grid, psi.values)
    safe = np.where(mask, 1.0, psi.values)
    ratio = np.stack([gx, gy], axis=-1) / safe[..., None]
    ratio[mask] = 0.0
    return GradientFields(
        rho=rho,
        grad_log_rho=2.0 * ratio.real,
        grad_s=hbar * ratio.imag,
        node_mask=mask,
    )


def energy(psi: WaveFunction, pot: Potential, hbar: float = 1.0, mass: float = 1.0) -> float:
    """<Psi| -hbar^2/2m Lap + V |Psi> with the kinetic part summed in k-space."""
    grid = psi.grid
    spectrum = np.fft.fft2(psi.values)
    k = grid.wavenumbers
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    kinetic = np.sum(0.5 * hbar**2 * k2 / mass * np.abs(spectrum) ** 2) * grid.cell_area() / grid.n**2
    potential = np.sum(pot.values(grid, mass) * psi.density()) * grid.cell_area()
    return float(kinetic + potential)


def moments(psi: WaveFunction):
    """(x_mean, y_mean, sigma_x, sigma_y) of the density."""
    grid = psi.grid
    rho = psi.density() * grid.cell_area()
    total = float(rho.sum())
    x = grid.axis
    px = rho.sum(axis=1) / total
    py = rho.sum(axis=0) / total
    x_mean = float(np.dot(px, x))
    y_mean = float(np.dot(py, x))
    sigma_x = float(np.sqrt(np.dot(px, (x - x_mean) ** 2)))
    sigma_y = float(np.sqrt(np.dot(py, (x - y_mean) ** 2)))
    return x_mean, y_mean, sigma_x, sigma_y


def frames_summary_csv(path, frames, pot: Potential, hbar: float = 1.0, mass: float = 1.0) -> None:
    header = ["t", "norm", "energy", "x_mean", "y_mean", "sigma_x", "sigma_y"]
    rows = []
    for frame in frames:
        x_mean, y_mean, sigma_x, sigma_y = moments(frame)
        rows.append(
            [frame.time, frame.norm(), energy(frame, pot, hbar, mass), x_mean, y_mean, sigma_x, sigma_y]
        )
    write_csv(path, header, rows)


def export_frame(path, psi: WaveFunction) -> None:
    write_zlab_frame(path, psi.values, psi.grid.half_width, psi.time)
