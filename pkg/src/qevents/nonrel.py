"""Schrodinger evolution oracle, time projection and the nonrelativistic limit study.

The oracle integrates ``i dPsi/dt = H(t) Psi`` with
``H(t) = (p - A(t, x))^2 / (2m) + U(t, x) + E_offset`` on a uniform spatial grid,
using either a Strang split-step Fourier scheme (scalar potential only, periodic
box) or Crank-Nicolson with Peierls-phase hopping (d = 1, Dirichlet box). The
Hamiltonian at each step is sampled at the midpoint time.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import GridMismatch, StabilityError
from .massshell import Propagator, transition_probability
from .packets import GaussianEventPacket
from .quadrature import ShellQuadrature

STEPPERS = ("split_step_fourier", "crank_nicolson")


def kappa(mass: float, hbar: float = 1.0) -> float:
    """Prefactor hbar / (4 pi m) relating shell amplitudes to Schrodinger matrix elements."""
    return hbar / (4.0 * math.pi * mass)


@dataclass(frozen=True, eq=False)
class TimeProjectedState:
    """Spatial wavefunction at a fixed time, sampled on a uniform grid (one axis array per dimension)."""

    time: float
    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        vals = np.array(self.values, dtype=complex)
        if vals.shape != tuple(a.size for a in axes):
            raise GridMismatch(f"values of shape {vals.shape} do not match the axes")
        for a in axes:
            if a.size < 4 or np.any(np.diff(a) <= 0):
                raise ValueError("spatial axes must be increasing with at least 4 points")
            if not np.allclose(np.diff(a), a[1] - a[0], rtol=1e-9, atol=0):
                raise ValueError("spatial axes must be uniform")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)

    @property
    def dim_space(self) -> int:
        return len(self.axes)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([a[1] - a[0] for a in self.axes])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.cell_volume)

    def same_grid(self, other: "TimeProjectedState") -> bool:
        return len(self.axes) == len(other.axes) and all(
            a.size == b.size and np.allclose(a, b, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(a))))
            for a, b in zip(self.axes, other.axes)
        )

    def with_values(self, values, time: Optional[float] = None) -> "TimeProjectedState":
        return TimeProjectedState(self.time if time is None else time, self.axes, values)


def overlap(phi: TimeProjectedState, psi: TimeProjectedState) -> complex:
    """<Phi|Psi> on the shared grid."""
    if not phi.same_grid(psi):
        raise GridMismatch("states live on different grids")
    return complex(np.sum(np.conj(phi.values) * psi.values) * psi.cell_volume)


def time_project(psi: GaussianEventPacket, t: float, axes: Sequence[np.ndarray]) -> TimeProjectedState:
    """Slice the spacetime wavefunction of an event packet at time ``t``."""
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    if len(axes) != psi.dim_space:
        raise GridMismatch(f"packet has d={psi.dim_space}, grid has {len(axes)} axes")
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([np.full(mesh[0].shape, float(t))] + list(mesh), axis=-1)
    return TimeProjectedState(t, axes, psi.spacetime_amplitude(pts))


@dataclass(frozen=True, eq=False)
class SchrodingerOracle:
    """Time stepper for the nonrelativistic Schrodinger equation.

    ``scalar_potential(t, *x)`` and ``vector_potential(t, x)`` are optional
    callables returning arrays broadcast over the spatial grid. The vector
    potential is only supported by the Crank-Nicolson stepper in d = 1.
    """

    axes: tuple
    mass: float
    dt: float
    stepper: str = "split_step_fourier"
    scalar_potential: Optional[Callable] = None
    vector_potential: Optional[Callable] = None
    energy_offset: float = 0.0
    hbar: float = 1.0
    _k2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        object.__setattr__(self, "axes", axes)
        if self.stepper not in STEPPERS:
            raise ValueError(f"stepper must be one of {STEPPERS}")
        if not (self.mass > 0 and np.isfinite(self.mass)):
            raise ValueError("mass must be positive")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise StabilityError("time step must be positive and finite")
        if self.stepper == "crank_nicolson" and len(axes) != 1:
            raise ValueError("the Crank-Nicolson stepper supports d = 1 only")
        if self.stepper == "split_step_fourier" and self.vector_potential is not None:
            raise ValueError("vector potentials need the crank_nicolson stepper")
        ks = [2.0 * np.pi * np.fft.fftfreq(a.size, d=a[1] - a[0]) for a in axes]
        kmesh = np.meshgrid(*ks, indexing="ij")
        object.__setattr__(self, "_k2", sum(k * k for k in kmesh))

    @property
    def spacing(self) -> np.ndarray:
        return np.array([a[1] - a[0] for a in self.axes])

    def _mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def potential_at(self, t: float) -> np.ndarray:
        shape = tuple(a.size for a in self.axes)
        if self.scalar_potential is None:
            return np.zeros(shape)
        return np.broadcast_to(np.asarray(self.scalar_potential(t, *self._mesh()), dtype=float), shape)

    def hamiltonian_apply(self, state: TimeProjectedState) -> TimeProjectedState:
        """H(t) applied to a single time slice (spectral kinetic term unless a vector potential is set)."""
        self._check_grid(state)
        t = state.time
        psi = state.values
        if self.vector_potential is None:
            kin = np.fft.ifftn(self._k2 * np.fft.fftn(psi)) * (self.hbar**2 / (2.0 * self.mass))
        else:
            kin = self._lattice_hamiltonian_apply(t, psi)
        out = kin + (self.potential_at(t) + self.energy_offset) * psi
        return state.with_values(out)

    def _check_grid(self, state: TimeProjectedState) -> None:
        if len(state.axes) != len(self.axes) or any(
            a.size != b.size or not np.allclose(a, b) for a, b in zip(state.axes, self.axes)
        ):
            raise GridMismatch("state grid differs from the oracle grid")

    # -- steppers -------------------------------------------------------------

    def _split_step(self, psi: np.ndarray, t: float, dt: float) -> np.ndarray:
        v = self.potential_at(t + 0.5 * dt) + self.energy_offset
        half = np.exp(-0.5j * dt * v / self.hbar)
        kinetic = np.exp(-0.5j * dt * self.hbar * self._k2 / self.mass)
        psi = half * psi
        psi = np.fft.ifftn(kinetic * np.fft.fftn(psi))
        return half * psi

    def _cn_bands(self, t: float):
        x = self.axes[0]
        h = x[1] - x[0]
        n = x.size
        c = self.hbar**2 / (2.0 * self.mass * h * h)
        diag = 2.0 * c + self.potential_at(t)
        if self.vector_potential is None:
            link = np.ones(n - 1, dtype=complex)
        else:
            xm = 0.5 * (x[1:] + x[:-1])
            a_mid = np.broadcast_to(np.asarray(self.vector_potential(t, xm), dtype=float), xm.shape)
            link = np.exp(-1j * a_mid * h / self.hbar)
        upper = -c * link  # H[j, j+1]
        lower = np.conj(upper)  # H[j+1, j]
        return diag.astype(complex), upper, lower

    def _lattice_hamiltonian_apply(self, t, psi):
        diag, upper, lower = self._cn_bands(t)
        out = (diag - self.potential_at(t)) * psi
        out[:-1] += upper * psi[1:]
        out[1:] += lower * psi[:-1]
        return out

    def _crank_nicolson(self, psi: np.ndarray, t: float, dt: float) -> np.ndarray:
        diag, upper, lower = self._cn_bands(t + 0.5 * dt)
        f = 0.5j * dt / self.hbar
        rhs = (1.0 - f * diag) * psi
        rhs[:-1] -= f * upper * psi[1:]
        rhs[1:] -= f * lower * psi[:-1]
        n = psi.size
        ab = np.zeros((3, n), dtype=complex)
        ab[0, 1:] = f * upper
        ab[1, :] = 1.0 + f * diag
        ab[2, :-1] = f * lower
        # a constant energy offset commutes with everything: apply it as an exact phase
        return solve_banded((1, 1), ab, rhs) * np.exp(-1j * dt * self.energy_offset / self.hbar)

    def check_stability(self, dt: float) -> None:
        if self.stepper == "split_step_fourier" and self.scalar_potential is not None:
            # the potential phase per half step must stay below pi to avoid aliasing in time
            vmax = float(np.max(np.abs(self.potential_at(0.0))))
            if 0.5 * dt * vmax / self.hbar > np.pi:
                raise StabilityError(
                    f"time step {dt} too large for potential magnitude {vmax}: phase per half step exceeds pi"
                )


def evolve(oracle: SchrodingerOracle, psi0: TimeProjectedState, t0: float, t1: float) -> TimeProjectedState:
    """U(t1, t0) psi0 with steps no longer than ``oracle.dt``."""
    if t1 < t0:
        raise ValueError("evolution runs forward in time only (t1 >= t0)")
    oracle._check_grid(psi0)
    if t1 == t0:
        return psi0.with_values(psi0.values.copy(), time=t1)
    n = max(1, int(math.ceil((t1 - t0) / oracle.dt - 1e-12)))
    dt = (t1 - t0) / n
    oracle.check_stability(dt)
    psi = psi0.values.copy()
    step = oracle._split_step if oracle.stepper == "split_step_fourier" else oracle._crank_nicolson
    for i in range(n):
        psi = step(psi, t0 + i * dt, dt)
    return psi0.with_values(psi, time=t1)


def nonrel_amplitude(Phi: TimeProjectedState, Psi: TimeProjectedState, oracle: SchrodingerOracle) -> complex:
    """kappa <Phi|U(t1, t0)|Psi> with t0 = Psi.time and t1 = Phi.time."""
    if not Phi.same_grid(Psi):
        raise GridMismatch("states live on different grids")
    evolved = evolve(oracle, Psi, Psi.time, Phi.time)
    return kappa(oracle.mass, oracle.hbar) * overlap(Phi, evolved)


def sharp_time_probability(
    Phi: TimeProjectedState,
    Psi: TimeProjectedState,
    oracle: SchrodingerOracle,
    t0: Optional[float] = None,
    t1: Optional[float] = None,
) -> float:
    """|<Phi|U(t1, t0)|Psi>|^2 / (<Phi|Phi><Psi|Psi>); kappa cancels."""
    t0 = Psi.time if t0 is None else t0
    t1 = Phi.time if t1 is None else t1
    n_phi, n_psi = Phi.norm_sq(), Psi.norm_sq()
    if n_phi <= 0 or n_psi <= 0:
        raise ValueError("zero-norm state")
    evolved = evolve(oracle, Psi.with_values(Psi.values, time=t0), t0, t1)
    return abs(overlap(Phi, evolved)) ** 2 / (n_phi * n_psi)


# -- limit study ------------------------------------------------------------------


@dataclass(frozen=True)
class LimitRow:
    v: float
    dt_width: float
    P_relativistic: float
    P_nonrel: float
    rel_error: float


LIMIT_COLUMNS = ("v", "dt_width", "P_relativistic", "P_nonrel", "rel_error")


def limit_packets(
    v: float,
    dt_width: float,
    mass: float = 1.0,
    travel_time: float = 1.0,
    width_ratio: float = 0.5,
    offset: float = 0.5,
):
    """Initial and final d = 1 event packets for a given velocity scale and temporal width.

    Both packets carry momentum v*m with spread ``width_ratio * v * m`` and are
    centered on the mass shell. The final event sits at time
    ``T = travel_time / (v^2 m)`` near the classical position v*T, displaced by
    ``offset`` initial position widths. All nonrelativistic quantities are then
    independent of v, and relativistic corrections enter as powers of v.
    """
    if not (0 < v <= 0.5):
        raise ValueError(f"velocity scale must lie in (0, 0.5], got {v}")
    if not dt_width > 0:
        raise ValueError("temporal width must be positive: time eigenvectors are not normalizable events")
    w0 = 1.0 / (2.0 * dt_width)
    if w0 > 0.25 * mass:
        raise ValueError(
            f"temporal width {dt_width} too small: energy spread {w0} must stay below m/4 to keep the antiparticle shell negligible"
        )
    p = v * mass
    sigma_p = width_ratio * v * mass
    sigma_x = 1.0 / (2.0 * sigma_p)
    energy = math.sqrt(p * p + mass * mass)
    T = travel_time / (v * v * mass)
    psi = GaussianEventPacket.from_widths([0.0, 0.0], [energy, p], [w0, sigma_p])
    phi = GaussianEventPacket.from_widths([T, v * T + offset * sigma_x], [energy, p], [w0, sigma_p])
    return psi, phi


def _nonrel_grid(psi: GaussianEventPacket, phi: GaussianEventPacket, mass: float, points_per_wavelength: float = 4.0):
    T = phi.center_x[0] - psi.center_x[0]
    sx0 = psi.widths_x[1]
    spread = sx0 * math.sqrt(1.0 + (T / (2.0 * mass * sx0 * sx0)) ** 2)
    margin = 12.0 * max(spread, phi.widths_x[1])
    lo = min(psi.center_x[1], phi.center_x[1]) - margin
    hi = max(psi.center_x[1], phi.center_x[1]) + margin
    kmax = abs(psi.center_p[1]) + 12.0 * psi.widths_p[1]
    dx = 2.0 * math.pi / (points_per_wavelength * kmax)
    n = 1 << int(math.ceil(math.log2(max((hi - lo) / dx, 64))))
    return np.linspace(lo, hi, n, endpoint=False)


def limit_convergence_study(
    velocities: Sequence[float],
    time_widths: Sequence[float],
    mass: float = 1.0,
    travel_time: float = 1.0,
    width_ratio: float = 0.5,
    offset: float = 0.5,
    scalar_potential: float = 0.0,
    quadrature: Optional[ShellQuadrature] = None,
    workers: int = 1,
) -> list:
    """Relativistic shell probability vs the Schrodinger sharp-time probability.

    For every (v, dt) pair the event packets from :func:`limit_packets` are
    compared: the relativistic side uses the mass-shell quadrature (with a
    constant scalar potential if given), the nonrelativistic side slices both
    packets at their central times and propagates the earlier slice with the
    split-step oracle. Each (v, dt) pair is an independent deterministic run;
    ``workers > 1`` evaluates them on a thread pool, rows stay in input order.
    """
    velocities = list(velocities)
    time_widths = list(time_widths)
    if not velocities or not time_widths:
        raise ValueError("need at least one velocity and one temporal width")
    q = quadrature or ShellQuadrature()
    potential = None if scalar_potential == 0 else [scalar_potential, 0.0]
    G = Propagator(mass, potential, shell_selector="both")
    u0 = float(scalar_potential)
    # validate every parameter pair before starting any work
    for v in velocities:
        for dtw in time_widths:
            limit_packets(v, dtw, mass, travel_time, width_ratio, offset)

    def run(v, dtw):
        psi, phi = limit_packets(v, dtw, mass, travel_time, width_ratio, offset)
        if potential is not None:
            shift = np.array([u0, 0.0])
            psi = psi.replace(center_p=psi.center_p + shift)
            phi = phi.replace(center_p=phi.center_p + shift)
        p_rel = transition_probability(phi, psi, G, q)
        axes = (_nonrel_grid(psi, phi, mass),)
        t0, t1 = psi.center_x[0], phi.center_x[0]
        oracle = SchrodingerOracle(
            axes,
            mass,
            dt=(t1 - t0) if not u0 else min(t1 - t0, math.pi / abs(u0)),
            scalar_potential=(lambda t, x: np.full_like(x, u0)) if u0 else None,
        )
        Psi = time_project(psi, t0, axes)
        Phi = time_project(phi, t1, axes)
        p_nr = sharp_time_probability(Phi, Psi, oracle)
        return LimitRow(v, dtw, p_rel, p_nr, abs(p_rel - p_nr) / p_nr)

    jobs = [(v, dtw) for v in velocities for dtw in time_widths]
    if workers <= 1:
        rows = [run(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda job: run(*job), jobs))
    return rows


def observed_orders(rows: Sequence[LimitRow], dt_width: Optional[float] = None) -> list:
    """log(err_i / err_{i+1}) / log(v_i / v_{i+1}) along the velocity axis at fixed temporal width."""
    if dt_width is None:
        dt_width = rows[0].dt_width
    sel = [r for r in rows if r.dt_width == dt_width]
    out = []
    for a, b in zip(sel, sel[1:]):
        out.append(math.log(a.rel_error / b.rel_error) / math.log(a.v / b.v))
    return out


def monotone_violations(rows: Sequence[LimitRow], rel_tol: float = 0.01) -> list:
    """Pairs of rows where the deviation grows while a parameter shrinks.

    Along the velocity axis (fixed temporal width) and along the temporal-width
    axis (fixed velocity) the deviation must not increase by more than
    ``rel_tol`` relative. At fixed v the deviation tends to a v-dependent
    plateau as the temporal width shrinks; changes within ``rel_tol`` of that
    plateau are treated as noise.
    """
    out = []
    by_width = {}
    by_v = {}
    for r in rows:
        by_width.setdefault(r.dt_width, []).append(r)
        by_v.setdefault(r.v, []).append(r)
    for group, key in ((by_width, "v"), (by_v, "dt_width")):
        for sel in group.values():
            sel = sorted(sel, key=lambda r: -getattr(r, key))
            for a, b in zip(sel, sel[1:]):
                if b.rel_error > a.rel_error * (1.0 + rel_tol):
                    out.append((a, b))
    return out


def write_study_csv(path, rows: Sequence[LimitRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LIMIT_COLUMNS)
        for r in rows:
            writer.writerow([repr(float(getattr(r, c))) for c in LIMIT_COLUMNS])
