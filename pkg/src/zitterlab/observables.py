"""Cycle-averaged observables of the real-part process.

All quantities average the four vertices over the four instants of one cycle
(16 terms).  The vertex fluctuations around the gravity center contribute an
intrinsic angular momentum of exactly -hbar/2 (s_plus) or +hbar/2 (s_minus)
and position/momentum spreads whose product is exactly hbar/2, independent of
eps, mass and the drift program.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MisalignedCycle
from .fileio import write_csv
from .process import Permutation, ProcessRun, ProcessState, VERTICES


def _wedge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """2D wedge a_x b_y - a_y b_x on the last axis."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True)
class CycleObservables:
    cycle_index: int
    t_start: float
    sigma_z: float
    sigma_orbital: float
    sigma_intrinsic: float
    delta_x: float
    delta_px: float
    heisenberg_product: float
    string_lengths: tuple  # lengths at n = 4q .. 4q+3


def _cycle_window(states: Sequence[ProcessState]):
    if len(states) != 5:
        raise MisalignedCycle(f"need the 5 states n = 4q..4q+4, got {len(states)}")
    n0 = states[0].step_index
    if n0 % 4 != 0:
        raise MisalignedCycle(f"cycle must start at n = 0 mod 4, got n = {n0}")
    for k, st in enumerate(states):
        if st.step_index != n0 + k:
            raise MisalignedCycle("states are not consecutive")
    r = np.stack([st.real_vertices() for st in states])  # (5, 4, 2)
    rm = np.stack([st.real_mean() for st in states])  # (5, 2)
    eps = states[1].params.epsilon  # eps in effect for the cycle's steps
    mass = states[0].params.mass
    return r, rm, eps, mass


def cycle_spin(states: Sequence[ProcessState]):
    """(sigma_z, sigma_orbital, sigma_intrinsic) for one cycle.

    sigma_z is the 16-term average of r^j_n ^ p^j_n with forward-difference
    momenta p^j_n = m (r^j_{n+1} - r^j_n)/eps.  The orbital part is the same
    average for the gravity center itself, so the intrinsic part is carried
    entirely by the vertex fluctuations and is +-hbar/2 to roundoff.
    """
    r, rm, eps, mass = _cycle_window(states)
    p = mass * np.diff(r, axis=0) / eps  # (4, 4, 2)
    pm = mass * np.diff(rm, axis=0) / eps  # (4, 2)
    sigma_total = float(np.mean(_wedge(r[:4], p)))
    sigma_orbital = float(np.mean(_wedge(rm[:4], pm)))
    return sigma_total, sigma_orbital, sigma_total - sigma_orbital


def intrinsic_spin_closed_form(perm: Permutation, hbar: float) -> float:
    """(hbar/16) sum_j u^j ^ s u^j; -hbar/2 for s_plus, +hbar/2 for s_minus."""
    shifted = VERTICES[(np.arange(4) + perm.shift()) % 4]
    return hbar / 16.0 * float(np.sum(_wedge(VERTICES.astype(float), shifted.astype(float))))


def cycle_uncertainties(states: Sequence[ProcessState]):
    """(delta_x, delta_px) along the x axis from the 16-term spreads."""
    r, rm, eps, mass = _cycle_window(states)
    p = mass * np.diff(r, axis=0) / eps
    pm = mass * np.diff(rm, axis=0) / eps
    dx2 = float(np.mean((r[:4, :, 0] - rm[:4, None, 0]) ** 2))
    dp2 = float(np.mean((p[:, :, 0] - pm[:, None, 0]) ** 2))
    return np.sqrt(dx2), np.sqrt(dp2)


def string_length(state: ProcessState) -> float:
    """Perimeter of the closed quadrilateral through the real vertices 1-2-3-4-1.

    Zero at cycle boundaries, maximal (corner configuration) at n = 4q+2.
    """
    r = state.real_vertices()
    return float(np.sum(np.linalg.norm(np.roll(r, -1, axis=0) - r, axis=1)))


def measure_cycle(states: Sequence[ProcessState], cycle_index: int | None = None) -> CycleObservables:
    sigma_z, sigma_orb, sigma_int = cycle_spin(states)
    delta_x, delta_px = cycle_uncertainties(states)
    lengths = tuple(string_length(st) for st in states[:4])
    q = states[0].step_index // 4 if cycle_index is None else cycle_index
    return CycleObservables(
        cycle_index=q,
        t_start=states[0].time,
        sigma_z=sigma_z,
        sigma_orbital=sigma_orb,
        sigma_intrinsic=sigma_int,
        delta_x=delta_x,
        delta_px=delta_px,
        heisenberg_product=delta_x * delta_px,
        string_lengths=lengths,
    )


def measure_run(run: ProcessRun) -> list[CycleObservables]:
    """Observables for every complete cycle of a run (vectorized)."""
    q_max = run.n_cycles
    out = []
    r_all = run.real_vertices()
    rm_all = run.real_means()
    for q in range(q_max):
        lo = 4 * q
        r = r_all[lo : lo + 5]
        rm = rm_all[lo : lo + 5]
        eps = run.epsilons[lo + 1]
        mass = run.params.mass
        p = mass * np.diff(r, axis=0) / eps
        pm = mass * np.diff(rm, axis=0) / eps
        sigma_total = float(np.mean(_wedge(r[:4], p)))
        sigma_orbital = float(np.mean(_wedge(rm[:4], pm)))
        dx2 = float(np.mean((r[:4, :, 0] - rm[:4, None, 0]) ** 2))
        dp2 = float(np.mean((p[:, :, 0] - pm[:, None, 0]) ** 2))
        sides = np.linalg.norm(np.roll(r[:4], -1, axis=1) - r[:4], axis=2)  # (4 steps, 4 sides)
        out.append(
            CycleObservables(
                cycle_index=q,
                t_start=float(run.times[lo]),
                sigma_z=sigma_total,
                sigma_orbital=sigma_orbital,
                sigma_intrinsic=sigma_total - sigma_orbital,
                delta_x=float(np.sqrt(dx2)),
                delta_px=float(np.sqrt(dp2)),
                heisenberg_product=float(np.sqrt(dx2) * np.sqrt(dp2)),
                string_lengths=tuple(float(s) for s in sides.sum(axis=1)),
            )
        )
    return out


def observables_to_csv(path, cycles: Sequence[CycleObservables]) -> None:
    header = [
        "q",
        "t_start",
        "sigma_z",
        "sigma_orbital",
        "sigma_intrinsic",
        "delta_x",
        "delta_px",
        "product",
        "len0",
        "len1",
        "len2",
        "len3",
    ]
    rows = [
        [
            c.cycle_index,
            c.t_start,
            c.sigma_z,
            c.sigma_orbital,
            c.sigma_intrinsic,
            c.delta_x,
            c.delta_px,
            c.heisenberg_product,
            *c.string_lengths,
        ]
        for c in cycles
    ]
    write_csv(path, header, rows)
