"""Guidance of trajectories and of the four-point process by a wave function.

The complex guiding velocity is V = -i (hbar/m) grad(Psi)/Psi.  Its real part
(grad S)/m drives de Broglie-Bohm trajectories of the gravity center; its
imaginary part is the osmotic component -(hbar/2m) grad(log rho).  Cells where
rho falls below a floor are masked as nodes: velocity queries there are
errors, not extrapolations, because the guidance law is genuinely singular at
wave-function zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EnsembleFailure, LeftDomain, NodeRegion, NonFiniteVelocity
from .fileio import write_csv, write_json
from .process import PhysParams, Permutation, ProcessRun, gamma
from .schrodinger import DEFAULT_RHO_FLOOR, Grid2D, WaveFunction, spectral_gradient


@dataclass
class VelocityField:
    """Complex guiding velocity sampled on the grid at one instant.

    v has shape (n, n, 2); node_mask is True where the field is invalid.
    At every unmasked node m*v = grad S - i (hbar/2) grad log rho.
    """

    grid: Grid2D
    v: np.ndarray
    node_mask: np.ndarray
    time: float


def velocity_field(
    psi: WaveFunction, hbar: float = 1.0, mass: float = 1.0, rho_floor: float = DEFAULT_RHO_FLOOR
) -> VelocityField:
    rho = psi.density()
    mask = rho < rho_floor * float(rho.max())
    gx, gy = spectral_gradient(psi.grid, psi.values)
    safe = np.where(mask, 1.0, psi.values)
    ratio = np.stack([gx, gy], axis=-1) / safe[..., None]
    ratio[mask] = 0.0
    return VelocityField(psi.grid, -1j * (hbar / mass) * ratio, mask, psi.time)


def _bilinear(fld: VelocityField, pts: np.ndarray):
    """Bilinear sample of the complex field at pts (M, 2) on the periodic grid.

    Returns (values (M, 2) complex, ok (M,) bool); ok is False where a point
    is outside [-L, L) or any of its four surrounding nodes is masked.
    """
    grid = fld.grid
    n, h, L = grid.n, grid.spacing, grid.half_width
    inside = np.all((pts >= -L) & (pts < L), axis=1)
    fx = (pts[:, 0] + L) / h
    fy = (pts[:, 1] + L) / h
    i0 = np.floor(fx).astype(np.int64)
    j0 = np.floor(fy).astype(np.int64)
    tx = (fx - i0)[:, None]
    ty = (fy - j0)[:, None]
    i0 = np.clip(i0, 0, n - 1)
    j0 = np.clip(j0, 0, n - 1)
    i1 = (i0 + 1) % n
    j1 = (j0 + 1) % n
    m = fld.node_mask
    ok = inside & ~(m[i0, j0] | m[i1, j0] | m[i0, j1] | m[i1, j1])
    v = fld.v
    vals = (
        (1 - tx) * (1 - ty) * v[i0, j0]
        + tx * (1 - ty) * v[i1, j0]
        + (1 - tx) * ty * v[i0, j1]
        + tx * ty * v[i1, j1]
    )
    return vals, ok


def bohm_velocity_at(fld: VelocityField, x) -> np.ndarray:
    """Re V interpolated at one position; the Bohmian velocity grad(S)/m."""
    pts = np.asarray(x, dtype=float).reshape(1, 2)
    L = fld.grid.half_width
    if not np.all((pts >= -L) & (pts < L)):
        raise LeftDomain(f"query {tuple(pts[0])} is outside the box [-{L}, {L})^2")
    vals, ok = _bilinear(fld, pts)
    if not ok[0]:
        raise NodeRegion(f"query {tuple(pts[0])} touches masked wave-function nodes")
    return vals[0].real


class FrameInterpolator:
    """Linear-in-time interpolation between velocity-field frames."""

    def __init__(self, frames):
        if len(frames) < 1:
            raise ValueError("need at least one frame")
        self.frames = list(frames)
        self.times = np.array([f.time for f in self.frames])
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("frames must be strictly increasing in time")
        self.grid = self.frames[0].grid

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def spacing(self) -> float:
        if len(self.frames) == 1:
            return math.inf
        return float(self.times[1] - self.times[0])

    def complex_at(self, t: float, pts: np.ndarray):
        if len(self.frames) == 1:
            return _bilinear(self.frames[0], pts)
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.frames) - 2))
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        w = float(np.clip(w, 0.0, 1.0))
        v0, ok0 = _bilinear(self.frames[i], pts)
        if w == 0.0:
            return v0, ok0
        v1, ok1 = _bilinear(self.frames[i + 1], pts)
        return (1.0 - w) * v0 + w * v1, ok0 & ok1

    def real_at(self, t: float, pts: np.ndarray):
        vals, ok = self.complex_at(t, pts)
        return vals.real, ok


@dataclass
class Trajectory:
    """Time-stamped gravity-center path; positions stay inside the box."""

    times: np.ndarray
    positions: np.ndarray  # (M, 2) real
    seed_point: np.ndarray
    dt: float

    def final_position(self) -> np.ndarray:
        return self.positions[-1]


def _rk4_batch(interp: FrameInterpolator, x0: np.ndarray, dt: float, n_steps: int, keep_history: bool):
    """Vectorized RK4 transport of a batch of points through the frame stack.

    Failed points (masked cells or outside the box) freeze in place; their
    first bad step index is recorded in fail_step.
    """
    x = np.array(x0, dtype=float)
    m = x.shape[0]
    alive = np.ones(m, dtype=bool)
    fail_step = np.full(m, -1, dtype=np.int64)
    left_box = np.zeros(m, dtype=bool)
    history = np.empty((n_steps + 1, m, 2)) if keep_history else None
    if keep_history:
        history[0] = x
    for s in range(n_steps):
        t = s * dt
        k1, ok1 = interp.real_at(t, x)
        k2, ok2 = interp.real_at(t + dt / 2, x + (dt / 2) * k1)
        k3, ok3 = interp.real_at(t + dt / 2, x + (dt / 2) * k2)
        k4, ok4 = interp.real_at(t + dt, x + dt * k3)
        ok_field = ok1 & ok2 & ok3 & ok4
        x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ok_domain = np.all(np.abs(x_new) < interp.grid.half_width, axis=1)
        newly_dead = alive & ~(ok_field & ok_domain)
        fail_step[newly_dead] = s
        left_box[newly_dead & ok_field] = True
        alive &= ok_field & ok_domain
        x = np.where(alive[:, None], x_new, x)
        if keep_history:
            history[s + 1] = x
    return x, alive, fail_step, left_box, history


def integrate_trajectory(frames, x0, dt: float, T: float | None = None) -> Trajectory:
    """RK4 integration of dX/dt = Re V(X, t) with linear-in-time frames.

    dt must not exceed the frame spacing; position error is O(dt^4) plus
    O(frame spacing^2) from the time interpolation.
    """
    interp = frames if isinstance(frames, FrameInterpolator) else FrameInterpolator(frames)
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if dt > interp.spacing * (1 + 1e-9):
        raise ValueError(f"dt = {dt:g} exceeds the frame spacing {interp.spacing:g}")
    if T is None:
        T = interp.t_end
    n_steps = max(1, int(round(T / dt)))
    dt = T / n_steps
    x0 = np.asarray(x0, dtype=float).reshape(1, 2)
    finals, alive, fail_step, left_box, history = _rk4_batch(interp, x0, dt, n_steps, keep_history=True)
    if not alive[0]:
        s = int(fail_step[0])
        pos = history[s, 0]
        where = f"t = {s * dt:g}, position ({pos[0]:g}, {pos[1]:g})"
        if left_box[0]:
            raise LeftDomain(f"trajectory from {tuple(x0[0])} left the box at {where}")
        raise NodeRegion(f"trajectory from {tuple(x0[0])} hit a masked region at {where}")
    times = np.arange(n_steps + 1) * dt
    return Trajectory(times, history[:, 0, :], x0[0].copy(), dt)


def guide_process(frames, params: PhysParams, perm: Permutation, x0, T: float):
    """Drive the four-point process with the wave field along its own path.

    At every cycle boundary t = 4q*eps the full complex field is read at the
    current real gravity center and held for the cycle's four steps (velocity
    decisions happen only at creation/annihilation instants).  Returns the
    process record together with the Bohmian reference trajectory from the
    same seed; their real parts agree to O(eps) plus interpolation error.
    """
    interp = frames if isinstance(frames, FrameInterpolator) else FrameInterpolator(frames)
    eps = params.epsilon
    if eps > interp.spacing * (1 + 1e-9):
        raise ValueError(f"eps = {eps:g} exceeds the frame spacing {interp.spacing:g}")
    n_cycles = int(math.floor(T / (4.0 * eps) + 1e-9))
    if n_cycles < 1:
        raise ValueError("T does not cover a single 4-step cycle")
    x0 = np.asarray(x0, dtype=float).reshape(2)
    g = gamma(params)
    offsets = perm.offset_table()
    n_steps = 4 * n_cycles
    means = np.empty((n_steps + 1, 2), dtype=complex)
    means[0] = x0.astype(complex)
    mean = means[0].copy()
    for q in range(n_cycles):
        t_q = 4 * q * eps
        center = mean.real.reshape(1, 2)
        vals, ok = interp.complex_at(t_q, center)
        if not ok[0]:
            raise NodeRegion(
                f"gravity center ({center[0, 0]:g}, {center[0, 1]:g}) entered a masked "
                f"region at t = {t_q:g}"
            )
        if not np.all(np.isfinite(vals.view(float))):
            raise NonFiniteVelocity("guiding field produced a non-finite value")
        v_q = vals[0]
        for r in range(1, 5):
            mean = mean + v_q * eps
            means[4 * q + r] = mean
    times = np.arange(n_steps + 1) * eps
    vertices = means[:, None, :] + g * offsets[np.arange(n_steps + 1) % 4]
    run = ProcessRun(times, vertices, means, np.full(n_steps + 1, eps), params, perm)
    reference = integrate_trajectory(interp, x0, dt=eps, T=n_steps * eps)
    return run, reference


# ---------------------------------------------------------------------------
# ensembles and equivariance
# ---------------------------------------------------------------------------


def sample_from_density(psi: WaveFunction, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sample of |Psi|^2 on the grid, jittered uniformly per cell.

    The sampled measure is the piecewise-constant density on grid cells, the
    same measure :func:`coarse_density_histogram` integrates, so the T = 0
    total-variation distance against it is pure multinomial noise.
    """
    grid = psi.grid
    weights = psi.density().ravel()
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    cells = np.searchsorted(cdf, rng.random(n_samples), side="right")
    ix, iy = np.unravel_index(np.clip(cells, 0, weights.size - 1), (grid.n, grid.n))
    axis = grid.axis
    jitter = (rng.random((n_samples, 2)) - 0.5) * grid.spacing
    return np.column_stack([axis[ix], axis[iy]]) + jitter


def _axis_bin_split(grid: Grid2D, bins: int):
    """Per-cell coarse-bin index and in-bin fraction for the cell's span.

    Each grid cell [x - h/2, x + h/2) may straddle one coarse-bin edge; the
    returned (b0, frac) give the lower bin and the fraction of the cell lying
    in it (the rest belongs to b0 + 1).  Ends are clipped into the box bins.
    """
    h = grid.spacing
    w = 2.0 * grid.half_width / bins
    lo = grid.axis - 0.5 * h
    b0 = np.floor((lo + grid.half_width) / w).astype(np.int64)
    upper_edge = -grid.half_width + (b0 + 1) * w
    frac = np.clip((upper_edge - lo) / h, 0.0, 1.0)
    b1 = np.clip(b0 + 1, 0, bins - 1)
    b0 = np.clip(b0, 0, bins - 1)
    return b0, b1, frac


def coarse_density_histogram(psi: WaveFunction, bins: int) -> np.ndarray:
    """|Psi|^2 integrated over a bins x bins coarse grid, normalized to 1.

    Integrates the piecewise-constant cell measure exactly, splitting cells
    that straddle a coarse-bin edge by their overlap fractions.
    """
    grid = psi.grid
    rho = psi.density()
    bx0, bx1, fx = _axis_bin_split(grid, bins)
    by0, by1, fy = _axis_bin_split(grid, bins)
    hist = np.zeros((bins, bins))
    for bx, wx in ((bx0, fx), (bx1, 1.0 - fx)):
        for by, wy in ((by0, fy), (by1, 1.0 - fy)):
            np.add.at(hist, (bx[:, None], by[None, :]), rho * wx[:, None] * wy[None, :])
    return hist / hist.sum()


@dataclass
class EquivarianceReport:
    n_samples: int
    seed: int
    T: float
    tv_distance: float
    bins: int
    failures: int
    empirical: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)

    def to_json(self, path) -> None:
        write_json(
            path,
            {
                "N": self.n_samples,
                "seed": self.seed,
                "T": self.T,
                "tv_distance": self.tv_distance,
                "bins": self.bins,
                "failures": self.failures,
            },
        )


def ensemble_equivariance(
    psi_frames,
    n_samples: int,
    seed: int,
    T: float | None = None,
    bins: int = 32,
    dt: float | None = None,
    hbar: float = 1.0,
    mass: float = 1.0,
    rho_floor: float = DEFAULT_RHO_FLOOR,
    max_failure_fraction: float = 1e-3,
) -> EquivarianceReport:
    """Transport a rho_0 sample along Bohmian trajectories and compare with
    |Psi(T)|^2 on a coarse grid (total-variation distance).

    A transported ensemble keeping the quantum density is exactly the content
    of the continuity equation d(rho)/dt + div(rho grad(S)/m) = 0.
    """
    if n_samples < 1000:
        raise ValueError(f"need at least 1e3 samples, got {n_samples}")
    frame_times = np.array([f.time for f in psi_frames])
    if T is None:
        T = float(frame_times[-1])
    i_target = int(np.argmin(np.abs(frame_times - T)))
    if abs(frame_times[i_target] - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"no frame at T = {T}")
    rng = np.random.default_rng(seed)
    seeds = sample_from_density(psi_frames[0], n_samples, rng)
    failures = 0
    if T > 0:
        fields = [velocity_field(f, hbar, mass, rho_floor) for f in psi_frames]
        interp = FrameInterpolator(fields)
        if dt is None:
            dt = interp.spacing
        n_steps = max(1, int(round(T / dt)))
        dt = T / n_steps
        finals, alive, _, _, _ = _rk4_batch(interp, seeds, dt, n_steps, keep_history=False)
        failures = int(np.sum(~alive))
        if failures > max_failure_fraction * n_samples:
            raise EnsembleFailure(
                f"{failures}/{n_samples} trajectories terminated early "
                f"(limit {max_failure_fraction:.1%})"
            )
        finals = finals[alive]
    else:
        finals = seeds
    grid = psi_frames[0].grid
    edges = np.linspace(-grid.half_width, grid.half_width, bins + 1)
    hist, _, _ = np.histogram2d(finals[:, 0], finals[:, 1], bins=[edges, edges])
    empirical = hist / hist.sum()
    target = coarse_density_histogram(psi_frames[i_target], bins)
    tv = 0.5 * float(np.abs(empirical - target).sum())
    return EquivarianceReport(n_samples, seed, float(T), tv, bins, failures, empirical, target)


def trajectories_to_csv(path, trajectories) -> None:
    header = ["seed_index", "t", "x", "y"]
    rows = []
    for idx, tr in enumerate(trajectories):
        for t, pos in zip(tr.times, tr.positions):
            rows.append([idx, t, pos[0], pos[1]])
    write_csv(path, header, rows)
