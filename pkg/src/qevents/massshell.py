"""Propagators, transition amplitudes and probabilities on the mass shell.

The propagator ``delta((p - A)^2 - m^2)`` for a constant potential ``A`` is
realized exactly as the shell measure ``d^d p / (2 E(p - A))`` summed over the
two energy branches. No smearing parameter is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, PhysicallyDisallowed
from .geometry import as_components, minkowski_dot
from .packets import (
    EnergyProjected,
    GaussianEventPacket,
    PacketLike,
    log_inner_product,
    split_projection,
)
from .quadrature import ShellIntegrand, ShellQuadrature, ShellSum, branch_signs, integrate_shell

SHELL_SELECTORS = ("both", "positive_only", "negative_only")
DEFAULT_ALLOWED_THRESHOLD = 1e-12
LOG_2PI = math.log(2.0 * math.pi)


def shell_energy(p_spatial, m: float):
    """E_p = sqrt(|p|^2 + m^2)."""
    if m < 0:
        raise ValueError("mass must be non-negative")
    p = np.asarray(p_spatial, dtype=float)
    return np.sqrt(np.sum(p * p, axis=-1) + m * m)


@dataclass(frozen=True)
class Propagator:
    """delta((p - qA)^2 - m^2) with constant 4-potential ``A`` and charge sign ``q``."""

    mass: float
    constant_potential: Optional[np.ndarray] = None
    shell_selector: str = "both"
    charge_sign: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.mass) and self.mass > 0):
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.shell_selector not in SHELL_SELECTORS:
            raise ValueError(f"shell_selector must be one of {SHELL_SELECTORS}")
        if self.charge_sign not in (1, -1):
            raise ValueError("charge_sign must be +1 or -1")
        if self.constant_potential is not None:
            a = np.array(as_components(self.constant_potential), dtype=float)
            if a.ndim != 1 or not np.all(np.isfinite(a)):
                raise ValueError("constant_potential must be a finite 4-vector")
            a.flags.writeable = False
            object.__setattr__(self, "constant_potential", a)

    def potential(self, dim: int) -> np.ndarray:
        """Effective potential q*A entering the kinetic momentum, as a length-``dim`` vector."""
        if self.constant_potential is None:
            return np.zeros(dim)
        if self.constant_potential.size != dim:
            raise DimensionMismatch(
                f"propagator potential has {self.constant_potential.size} components, packets have {dim}"
            )
        return self.charge_sign * self.constant_potential

    @property
    def is_free(self) -> bool:
        return self.constant_potential is None or not np.any(self.constant_potential)

    @property
    def branches(self) -> tuple:
        return branch_signs(self.shell_selector)

    def with_potential(self, potential) -> "Propagator":
        return Propagator(self.mass, potential, self.shell_selector, self.charge_sign)

    def charge_conjugate(self) -> "Propagator":
        """Same propagator for the opposite charge."""
        return Propagator(self.mass, self.constant_potential, self.shell_selector, -self.charge_sign)


def _as_packet_and_filter(v: PacketLike):
    packet, restriction = split_projection(v)
    return packet, restriction


def _pair_integrand(phi: GaussianEventPacket, psi: GaussianEventPacket, sign_filter) -> ShellIntegrand:
    q1, q2 = phi.precision, psi.precision
    qs = q1 + q2
    cbar = np.linalg.solve(qs, q1 @ phi.center_p + q2 @ psi.center_p)
    eta = psi.metric.diagonal
    # conj(log phi) + log psi as a single quadratic form in k
    lin = qs @ cbar + 1j * eta * (psi.center_x - phi.center_x)
    const = (
        np.conj(phi.log_amplitude)
        + psi.log_amplitude
        - 0.5 * (phi.center_p @ q1 @ phi.center_p + psi.center_p @ q2 @ psi.center_p)
    )

    def log_numerator(k):
        return -0.5 * np.sum((k @ qs) * k, axis=-1) + k @ lin + const

    return ShellIntegrand(
        log_numerator=log_numerator,
        precision=qs,
        center=cbar,
        separation=np.abs(psi.center_x - phi.center_x),
        sign_filter=sign_filter,
    )


def log_transition_amplitude(phi: PacketLike, psi: PacketLike, G: Propagator, q: Optional[ShellQuadrature] = None) -> ShellSum:
    """tau(phi, psi) as a :class:`ShellSum` (value times exp(log_scale))."""
    q = q or ShellQuadrature()
    p1, s1 = _as_packet_and_filter(phi)
    p2, s2 = _as_packet_and_filter(psi)
    if p1.dim != p2.dim:
        raise DimensionMismatch(f"packets live in different dimensions: {p1.dim} vs {p2.dim}")
    zero = ShellSum(-np.inf, 0j, 0.0 if q.scheme == "monte_carlo" else None)
    if s1 == 0 or s2 == 0 or (s1 is not None and s2 is not None and s1 != s2):
        return zero
    if p1.amplitude == 0 or p2.amplitude == 0:
        return zero
    sign_filter = s1 if s1 is not None else s2
    integrand = _pair_integrand(p1, p2, sign_filter)
    return integrate_shell(integrand, G.mass, G.potential(p1.dim), G.branches, q)


def transition_amplitude(phi: PacketLike, psi: PacketLike, G: Propagator, q: Optional[ShellQuadrature] = None) -> complex:
    """tau(phi, psi) = <phi|G|psi> summed over the selected shell branches."""
    return complex(log_transition_amplitude(phi, psi, G, q).total())


def transition_amplitude_with_error(phi, psi, G: Propagator, q: ShellQuadrature):
    """Monte Carlo estimate of tau together with its standard error."""
    if q.scheme != "monte_carlo":
        raise ValueError("standard errors are only produced by the monte_carlo scheme")
    res = log_transition_amplitude(phi, psi, G, q)
    if not np.isfinite(res.log_scale):
        return 0j, 0.0
    scale = math.exp(res.log_scale)
    return complex(scale * res.value), float(scale * res.stderr)


def _log_abs(s: ShellSum) -> float:
    v = abs(complex(s.value))
    if v == 0 or not np.isfinite(s.log_scale):
        return -np.inf
    return s.log_scale + math.log(v)


def log_self_amplitude(psi: PacketLike, G: Propagator, q: Optional[ShellQuadrature] = None) -> float:
    """log tau(psi, psi); tau(psi, psi) is real and non-negative."""
    s = log_transition_amplitude(psi, psi, G, q)
    v = complex(s.value).real
    if v <= 0 or not np.isfinite(s.log_scale):
        return -np.inf
    return s.log_scale + math.log(v)


def _log_norm_sq(psi: PacketLike) -> float:
    return float(log_inner_product(psi, psi).real)


def is_physically_allowed(
    psi: PacketLike,
    G: Propagator,
    q: Optional[ShellQuadrature] = None,
    threshold: float = DEFAULT_ALLOWED_THRESHOLD,
) -> bool:
    """tau(psi, psi) / <psi|psi> > threshold, compared in the log domain."""
    log_tau = log_self_amplitude(psi, G, q)
    if not np.isfinite(log_tau):
        return False
    if threshold <= 0:
        return True
    return log_tau - _log_norm_sq(psi) > math.log(threshold)


def _require_allowed(log_tau: float, psi: PacketLike, threshold: float, label: str) -> None:
    if not np.isfinite(log_tau):
        raise PhysicallyDisallowed(f"{label}: self-amplitude vanishes")
    if threshold > 0:
        ratio = log_tau - _log_norm_sq(psi)
        if ratio <= math.log(threshold):
            raise PhysicallyDisallowed(
                f"{label}: tau/<psi|psi> = {math.exp(ratio):.3e} does not exceed threshold {threshold:.3e}"
            )


def transition_probability(
    phi: PacketLike,
    psi: PacketLike,
    G: Propagator,
    q: Optional[ShellQuadrature] = None,
    threshold: float = DEFAULT_ALLOWED_THRESHOLD,
) -> float:
    """P(phi, psi) = |tau(phi, psi)|^2 / (tau(phi, phi) tau(psi, psi))."""
    log_pp = log_self_amplitude(phi, G, q)
    log_ss = log_self_amplitude(psi, G, q)
    _require_allowed(log_pp, phi, threshold, "final event")
    _require_allowed(log_ss, psi, threshold, "initial event")
    log_cross = _log_abs(log_transition_amplitude(phi, psi, G, q))
    if not np.isfinite(log_cross):
        return 0.0
    return float(math.exp(2.0 * log_cross - log_pp - log_ss))


def energy_sign_project(psi: PacketLike, sign: int) -> EnergyProjected:
    """Apply theta(sign * E) to a packet; projections compose by intersection."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if isinstance(psi, EnergyProjected):
        return psi.project(sign)
    return EnergyProjected(psi, frozenset({int(sign)}))


# -- orbits -----------------------------------------------------------------


def _orbit_integrand(psi: GaussianEventPacket, points: np.ndarray, sign_filter) -> ShellIntegrand:
    d_total = psi.dim
    log_pref = -0.5 * d_total * LOG_2PI + psi.log_amplitude

    def log_numerator(k):
        phase = -1j * minkowski_dot(k[:, None, :], points[None, :, :])
        return (psi.log_shape(k) + log_pref)[:, None] + phase

    sep = np.max(np.abs(points - psi.center_x), axis=0)
    return ShellIntegrand(
        log_numerator=log_numerator,
        precision=psi.precision,
        center=psi.center_p,
        separation=sep,
        sign_filter=sign_filter,
        out_shape=(points.shape[0],),
    )


def evaluate_orbit(
    psi: PacketLike,
    G: Propagator,
    points,
    q: Optional[ShellQuadrature] = None,
    batch: int = 64,
) -> np.ndarray:
    """Psi(x) = <x|G|psi> at each spacetime point (array of shape (P, D))."""
    q = q or ShellQuadrature()
    packet, restriction = split_projection(psi)
    pts = np.atleast_2d(np.asarray([as_components(x) for x in points], dtype=float))
    if pts.shape[-1] != packet.dim:
        raise DimensionMismatch(f"points have {pts.shape[-1]} components, packet has {packet.dim}")
    out = np.zeros(pts.shape[0], dtype=complex)
    if restriction == 0 or packet.amplitude == 0:
        return out
    for start in range(0, pts.shape[0], batch):
        chunk = pts[start : start + batch]
        integrand = _orbit_integrand(packet, chunk, restriction)
        res = integrate_shell(integrand, G.mass, G.potential(packet.dim), G.branches, q)
        out[start : start + batch] = res.total()
    return out


def orbit_wave_residual(values: np.ndarray, spacing: Sequence[float], mass: float, potential) -> np.ndarray:
    """((i d - A)^2 - m^2) Psi on a (1+d)-dimensional grid by central differences.

    ``values`` has one axis per spacetime coordinate; the result covers the
    interior points only (one cell trimmed on each side).
    """
    psi = np.asarray(values, dtype=complex)
    D = psi.ndim
    a = np.asarray(potential, dtype=float)
    h = np.asarray(spacing, dtype=float)
    if a.size != D or h.size != D:
        raise DimensionMismatch("potential and spacing must match the grid dimension")
    core = tuple(slice(1, -1) for _ in range(D))
    center = psi[core]
    box = np.zeros_like(center)
    first = []
    for ax in range(D):
        lo = [slice(1, -1)] * D
        hi = [slice(1, -1)] * D
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        plus, minus = psi[tuple(hi)], psi[tuple(lo)]
        second = (plus - 2.0 * center + minus) / h[ax] ** 2
        box += second if ax == 0 else -second
        first.append((plus - minus) / (2.0 * h[ax]))
    # (i d_mu - A_mu)(i d^mu - A^mu) = -box - 2i A^mu d_mu + A^2, with A^mu d_mu = A^0 d_t + A^k d_k
    drift = a[0] * first[0] + sum(a[k] * first[k] for k in range(1, D))
    a_sq = float(minkowski_dot(a, a))
    return -box - 2j * drift + (a_sq - mass**2) * center


def monte_carlo_amplitude(phi: PacketLike, psi: PacketLike, G: Propagator, samples: int = 1_000_000, seed: int = 0):
    """Importance-sampled shell estimate of tau with its standard error."""
    q = ShellQuadrature(scheme="monte_carlo", sample_count=samples, seed=seed)
    return transition_amplitude_with_error(phi, psi, G, q)
