"""Deterministic four-point vibration process and its classical limit.

An extended particle is carried by four complex processes Z^j(n*eps) in C^2,
one per vertex of the unit square.  Each step adds a common drift V(4q*eps)*eps
plus an internal hop gamma*(s^n u^j - s^(n-1) u^j), where s cycles the square's
vertices and gamma = (1+i)*sqrt(hbar*eps/(4m)).  After every four steps the
vertices re-coincide with their gravity center (the mean process), so the real
parts trace a closed string that is created and annihilated once per cycle.

The drift velocity is a prescribed function of time here; position-dependent
guidance from a wave function lives in :mod:`zitterlab.pilot`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import EpsilonUnderflow, NonFiniteVelocity
from .fileio import atomic_write_text, fmt17

# Unit-square vertices u^1..u^4 in the fixed listing order.
VERTICES = np.array([[1, 1], [1, -1], [-1, -1], [-1, 1]], dtype=np.int64)


class Sense(Enum):
    """Orientation of the vertex 4-cycle; selects the sign of the spin."""

    S_PLUS = "s_plus"
    S_MINUS = "s_minus"


@dataclass(frozen=True)
class Permutation:
    """One of the two circular permutations of the unit-square vertices.

    s_plus maps u1 -> u2 -> u3 -> u4 -> u1 (sum_j u^j ^ s u^j = -8, hence
    intrinsic spin -hbar/2); s_minus is its inverse.  s^4 is the identity and
    sum_j s^n u^j = 0 for every n.
    """

    sense: Sense = Sense.S_PLUS

    def shift(self) -> int:
        return 1 if self.sense is Sense.S_PLUS else -1

    def apply(self, n: int, j: int) -> np.ndarray:
        """s^n u^j for j in 1..4, as an integer 2-vector."""
        if not 1 <= j <= 4:
            raise ValueError(f"vertex index j must be in 1..4, got {j}")
        return VERTICES[(j - 1 + self.shift() * n) % 4]

    def offset_table(self) -> np.ndarray:
        """(4, 4, 2) int array: [n mod 4, j-1] -> s^n u^j - u^j."""
        tab = np.empty((4, 4, 2), dtype=np.int64)
        for r in range(4):
            for j0 in range(4):
                tab[r, j0] = VERTICES[(j0 + self.shift() * r) % 4] - VERTICES[j0]
        return tab

    def inverse(self) -> "Permutation":
        return Permutation(Sense.S_MINUS if self.sense is Sense.S_PLUS else Sense.S_PLUS)


class EpsilonMode(Enum):
    FIXED = "fixed"
    DE_BROGLIE = "de_broglie"
    COMPTON = "compton"


@dataclass(frozen=True)
class PhysParams:
    """Physical constants of one run.

    epsilon is the time step of the internal vibration; the cycle period is
    4*epsilon.  In de_broglie mode epsilon is refreshed at cycle boundaries
    from the current drift speed v as h/(4 m v^2); in compton mode it is the
    constant h/(4 m c^2), with h = 2*pi*hbar.
    """

    hbar: float = 1.0
    mass: float = 1.0
    epsilon: float = 0.01
    epsilon_mode: EpsilonMode = EpsilonMode.FIXED
    light_speed: float = 1.0
    epsilon_floor: float = 1e-12

    def __post_init__(self):
        for name in ("hbar", "mass", "epsilon", "light_speed", "epsilon_floor"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"PhysParams.{name} must be finite and > 0, got {value}")

    def compton_epsilon(self) -> float:
        return 2.0 * math.pi * self.hbar / (4.0 * self.mass * self.light_speed**2)

    def de_broglie_epsilon(self, speed: float) -> float:
        if speed <= 0.0:
            raise EpsilonUnderflow("de_broglie mode needs a nonzero drift speed")
        eps = 2.0 * math.pi * self.hbar / (4.0 * self.mass * speed**2)
        if eps < self.epsilon_floor:
            raise EpsilonUnderflow(
                f"de_broglie epsilon {eps:.3e} fell below floor {self.epsilon_floor:.3e}"
            )
        return eps


def gamma(params: PhysParams) -> complex:
    """Internal hop amplitude (1+i)*sqrt(hbar*eps/(4m)); |gamma|^2 = hbar*eps/2m."""
    return (1.0 + 1.0j) * math.sqrt(params.hbar * params.epsilon / (4.0 * params.mass))


def vertex_offset(n: int, j: int, perm: Permutation) -> np.ndarray:
    """s^n u^j - u^j as an integer 2-vector; (0, 0) whenever n = 0 mod 4."""
    if n < 0:
        raise ValueError(f"step index must be >= 0, got {n}")
    return perm.apply(n, j) - VERTICES[j - 1]


# ---------------------------------------------------------------------------
# velocity programs
# ---------------------------------------------------------------------------


class VelocityProgram:
    """Continuous complex drift velocity t -> V(t) in C^2.

    Subclasses evaluate vectorized over an array of times, returning an array
    of shape t.shape + (2,).
    """

    def __call__(self, t):
        raise NotImplementedError

    def describe(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class ConstantVelocity(VelocityProgram):
    vx: complex = 0.0
    vy: complex = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (2,), dtype=complex)
        out[..., 0] = self.vx
        out[..., 1] = self.vy
        return out

    def describe(self) -> str:
        return f"constant({self.vx}, {self.vy})"


def zero_velocity() -> ConstantVelocity:
    return ConstantVelocity(0.0, 0.0)


@dataclass(frozen=True)
class CircularVelocity(VelocityProgram):
    """V(t) = amplitude * (cos(omega t), sin(omega t))."""

    omega: float = 1.0
    amplitude: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (2,), dtype=complex)
        out[..., 0] = self.amplitude * np.cos(self.omega * t)
        out[..., 1] = self.amplitude * np.sin(self.omega * t)
        return out

    def describe(self) -> str:
        return f"circular(omega={self.omega}, amplitude={self.amplitude})"


@dataclass(frozen=True)
class PolynomialVelocity(VelocityProgram):
    """Per-component polynomial in t, low order first: V_k(t) = sum_i c_ki t^i."""

    coeffs_x: tuple = (0.0,)
    coeffs_y: tuple = (0.0,)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (2,), dtype=complex)
        out[..., 0] = np.polynomial.polynomial.polyval(t, np.asarray(self.coeffs_x, dtype=complex))
        out[..., 1] = np.polynomial.polynomial.polyval(t, np.asarray(self.coeffs_y, dtype=complex))
        return out

    def describe(self) -> str:
        return f"polynomial({list(self.coeffs_x)}, {list(self.coeffs_y)})"


class SampledVelocity(VelocityProgram):
    """Tabulated velocity with linear interpolation in time."""

    def __init__(self, times, values):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=complex)
        if times.ndim != 1 or values.shape != (times.size, 2):
            raise ValueError("SampledVelocity needs times (M,) and values (M, 2)")
        if times.size < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("SampledVelocity times must be strictly increasing, M >= 2")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
            raise NonFiniteVelocity("SampledVelocity table contains non-finite entries")
        self.times = times
        self.values = values

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (2,), dtype=complex)
        for k in range(2):
            out[..., k] = np.interp(t, self.times, self.values[:, k].real) + 1j * np.interp(
                t, self.times, self.values[:, k].imag
            )
        return out

    def describe(self) -> str:
        return f"sampled({self.times[0]}..{self.times[-1]}, {self.times.size} knots)"


def _eval_velocity(vel: VelocityProgram, t) -> np.ndarray:
    v = np.asarray(vel(t), dtype=complex)
    if not np.all(np.isfinite(v.view(float))):
        raise NonFiniteVelocity(f"velocity program {vel.describe()} returned a non-finite value")
    return v


# ---------------------------------------------------------------------------
# process state and stepping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProcessState:
    """Snapshot of the four vertex processes at one step.

    vertices has shape (4, 2) complex (rows j = 1..4), mean shape (2,).
    The decomposition vertices[j] = mean + gamma * (s^n u^j - u^j) holds
    exactly at every step, so at n = 0 mod 4 all vertices equal the mean.
    """

    step_index: int
    time: float
    vertices: np.ndarray
    mean: np.ndarray
    params: PhysParams
    perm: Permutation = field(default_factory=Permutation)

    def __post_init__(self):
        self.vertices.setflags(write=False)
        self.mean.setflags(write=False)

    def real_vertices(self) -> np.ndarray:
        return self.vertices.real

    def real_mean(self) -> np.ndarray:
        return self.mean.real


def initial_state(params: PhysParams, perm: Permutation, z0) -> ProcessState:
    z0 = np.asarray(z0, dtype=complex).reshape(2)
    vertices = np.repeat(z0[None, :], 4, axis=0)
    return ProcessState(0, 0.0, vertices, z0.copy(), params, perm)


def step(state: ProcessState, vel: VelocityProgram) -> ProcessState:
    """Advance all four vertices and the mean by one step of eps.

    The drift is sampled at the cycle-boundary time 4q*eps with q = n//4 of
    the new step index n, i.e. the step landing on a boundary reads the
    velocity at that boundary.  The new state is built from the offset
    decomposition, which therefore holds to the last bit.
    """
    params, perm = state.params, state.perm
    eps = params.epsilon
    n_new = state.step_index + 1
    t_new = state.time + eps
    t_boundary = t_new - (n_new % 4) * eps
    v = _eval_velocity(vel, t_boundary)
    mean = state.mean + v * eps
    offsets = perm.offset_table()[n_new % 4]
    vertices = mean[None, :] + gamma(params) * offsets
    return ProcessState(n_new, t_new, vertices, mean, params, perm)


class ProcessRun:
    """Record of a full run: one state per step n = 0..n_steps.

    Behaves as a sequence of :class:`ProcessState`; bulk arrays are exposed
    for vectorized consumers (times (M,), means (M, 2), vertices (M, 4, 2),
    epsilons (M,) giving the eps in effect for the step ending at each index).
    """

    def __init__(self, times, vertices, means, epsilons, params, perm):
        self.times = np.asarray(times, dtype=float)
        self.vertices = np.asarray(vertices, dtype=complex)
        self.means = np.asarray(means, dtype=complex)
        self.epsilons = np.asarray(epsilons, dtype=float)
        self.params = params
        self.perm = perm
        for arr in (self.times, self.vertices, self.means, self.epsilons):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, n: int) -> ProcessState:
        if isinstance(n, slice):
            return [self[i] for i in range(*n.indices(len(self)))]
        if n < 0:
            n += len(self)
        if not 0 <= n < len(self):
            raise IndexError(n)
        params = self.params
        if self.epsilons[n] != params.epsilon:
            params = replace(params, epsilon=float(self.epsilons[n]))
        return ProcessState(
            n, float(self.times[n]), self.vertices[n].copy(), self.means[n].copy(), params, self.perm
        )

    @property
    def n_cycles(self) -> int:
        # a cycle needs the closing state at n = 4q + 4
        return (len(self) - 1) // 4

    def real_vertices(self) -> np.ndarray:
        return self.vertices.real

    def real_means(self) -> np.ndarray:
        return self.means.real

    def to_csv(self, path) -> None:
        """Write the run record; floats carry 17 significant digits."""
        header = ["n", "t"]
        for j in range(1, 5):
            header += [f"re_z1_{j}", f"im_z1_{j}", f"re_z2_{j}", f"im_z2_{j}"]
        header += ["re_mean1", "im_mean1", "re_mean2", "im_mean2"]
        lines = [",".join(header)]
        for n in range(len(self)):
            row = [str(n), fmt17(self.times[n])]
            for j in range(4):
                z = self.vertices[n, j]
                row += [fmt17(z[0].real), fmt17(z[0].imag), fmt17(z[1].real), fmt17(z[1].imag)]
            m = self.means[n]
            row += [fmt17(m[0].real), fmt17(m[0].imag), fmt17(m[1].real), fmt17(m[1].imag)]
            lines.append(",".join(row))
        atomic_write_text(path, "\n".join(lines) + "\n")


def run_process(params: PhysParams, perm: Permutation, vel: VelocityProgram, z0, T: float) -> ProcessRun:
    """Run the four-point process over [0, T].

    fixed/compton modes take n = floor(T/eps) uniform steps.  de_broglie mode
    marches whole cycles, refreshing eps at every cycle boundary from the
    current |Re V|, and stops at the first boundary reaching T.
    """
    if T <= 0:
        raise ValueError(f"T must be > 0, got {T}")
    z0 = np.asarray(z0, dtype=complex).reshape(2)

    if params.epsilon_mode is EpsilonMode.COMPTON:
        params = replace(params, epsilon=params.compton_epsilon())
    if params.epsilon_mode in (EpsilonMode.FIXED, EpsilonMode.COMPTON):
        return _run_fixed(params, perm, vel, z0, T)
    return _run_de_broglie(params, perm, vel, z0, T)


def _run_fixed(params, perm, vel, z0, T) -> ProcessRun:
    eps = params.epsilon
    n_steps = int(math.floor(T / eps + 1e-9))
    n = np.arange(n_steps + 1)
    times = n * eps
    # velocity for the step landing at n is sampled at t = 4*(n//4)*eps
    boundary_times = 4 * (n[1:] // 4) * eps
    v = _eval_velocity(vel, boundary_times)  # (n_steps, 2)
    means = np.empty((n_steps + 1, 2), dtype=complex)
    means[0] = z0
    np.cumsum(v * eps, axis=0, out=means[1:])
    means[1:] += z0
    offsets = perm.offset_table()[n % 4]  # (M, 4, 2)
    vertices = means[:, None, :] + gamma(params) * offsets
    epsilons = np.full(n_steps + 1, eps)
    return ProcessRun(times, vertices, means, epsilons, params, perm)


def _run_de_broglie(params, perm, vel, z0, T) -> ProcessRun:
    times = [0.0]
    means = [z0]
    epsilons = [math.nan]  # placeholder; patched to the first cycle's eps below
    tab = perm.offset_table()
    mean = z0.copy()
    t = 0.0
    rows_offsets = [np.zeros((4, 2))]
    first_eps = None
    guard = 0
    while t < T - 1e-12:
        v_boundary = _eval_velocity(vel, t)
        speed = float(np.linalg.norm(v_boundary.real))
        eps = params.de_broglie_epsilon(speed)
        if first_eps is None:
            first_eps = eps
        g = gamma(replace(params, epsilon=eps))
        for r in range(1, 5):
            # literal indexing: the step landing on the next boundary (r = 4)
            # reads the velocity at that boundary
            v_step = v_boundary if r < 4 else _eval_velocity(vel, t + 4 * eps)
            mean = mean + v_step * eps
            times.append(t + r * eps)
            means.append(mean)
            rows_offsets.append(g * tab[r % 4])
            epsilons.append(eps)
        t += 4 * eps
        guard += 1
        if guard > 10_000_000:
            raise MemoryError("de_broglie run exceeded the step budget")
    epsilons[0] = first_eps if first_eps is not None else params.epsilon
    means_arr = np.asarray(means)
    vertices = means_arr[:, None, :] + np.asarray(rows_offsets)
    return ProcessRun(np.asarray(times), vertices, means_arr, np.asarray(epsilons), params, perm)


@dataclass(frozen=True)
class ClassicalPath:
    """High-accuracy solution of dZ/dt = V(t) used as the convergence reference."""

    times: np.ndarray
    positions: np.ndarray  # (M, 2) complex

    def at(self, t: float) -> np.ndarray:
        i = int(round((t - self.times[0]) / (self.times[1] - self.times[0])))
        if not (0 <= i < self.times.size and abs(self.times[i] - t) < 1e-9 * max(1.0, abs(t))):
            raise ValueError(f"time {t} is not on the path grid")
        return self.positions[i]


def classical_trajectory(vel: VelocityProgram, z0, T: float, dt: float) -> ClassicalPath:
    """Integrate dZ/dt = V(t) with 4th-order accuracy (Simpson accumulation).

    For a pure time integrand the classic one-step RK4 rule reduces to
    Simpson's rule over each substep, so the whole path is a cumulative sum.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    z0 = np.asarray(z0, dtype=complex).reshape(2)
    n_steps = max(1, int(round(T / dt)))
    dt = T / n_steps
    t = np.arange(n_steps + 1) * dt
    v_nodes = _eval_velocity(vel, t)
    v_mid = _eval_velocity(vel, t[:-1] + dt / 2)
    increments = (dt / 6.0) * (v_nodes[:-1] + 4.0 * v_mid + v_nodes[1:])
    positions = np.empty((n_steps + 1, 2), dtype=complex)
    positions[0] = z0
    np.cumsum(increments, axis=0, out=positions[1:])
    positions[1:] += z0
    return ClassicalPath(t, positions)
