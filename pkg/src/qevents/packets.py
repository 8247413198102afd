"""Gaussian event packets, their scalar products and observable moments.

A packet is parametrized in momentum space as::

    psi(p) = a * exp(-1/2 (p - c)^T Q (p - c)) * exp(+i p.X)

with ``p.X`` the Minkowski product, ``c`` the momentum centroid, ``X`` the
spacetime centroid and ``Q`` a real symmetric positive-definite matrix. An
axis-aligned packet with momentum standard deviations ``w`` has
``Q = diag(1 / (2 w**2))``. General ``Q`` arises once a Lorentz matrix mixes
axes; the family is closed under every Poincare map.

Spacetime wavefunctions follow the Fourier convention
``<x|p> = (2 pi)^(-D/2) exp(-i p.x)`` with ``D = d + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.special import wofz

from .errors import DimensionMismatch
from .geometry import MetricSignature, as_components, minkowski_dot

LOG_2PI = np.log(2.0 * np.pi)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GaussianEventPacket:
    center_x: np.ndarray
    center_p: np.ndarray
    precision: np.ndarray
    amplitude: complex = 1.0 + 0.0j
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cx = _frozen(as_components(self.center_x))
        cp = _frozen(as_components(self.center_p))
        q = np.array(self.precision, dtype=float)
        dim = cx.shape[-1]
        if cx.shape != (dim,) or cp.shape != (dim,) or q.shape != (dim, dim):
            raise DimensionMismatch(
                f"inconsistent packet shapes: center_x {cx.shape}, center_p {cp.shape}, precision {q.shape}"
            )
        MetricSignature(dim - 1)
        if not (np.all(np.isfinite(cx)) and np.all(np.isfinite(cp)) and np.all(np.isfinite(q))):
            raise ValueError("packet parameters must be finite")
        q = 0.5 * (q + q.T)
        try:
            chol = np.linalg.cholesky(q)
        except np.linalg.LinAlgError:
            raise ValueError("precision matrix must be positive definite (zero widths are improper)") from None
        q.flags.writeable = False
        chol.flags.writeable = False
        amp = complex(self.amplitude)
        if not np.isfinite(amp):
            raise ValueError("amplitude must be finite")
        object.__setattr__(self, "center_x", cx)
        object.__setattr__(self, "center_p", cp)
        object.__setattr__(self, "precision", q)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def from_widths(cls, center_x, center_p, widths_p, amplitude: complex = 1.0) -> "GaussianEventPacket":
        """Axis-aligned packet with momentum-space standard deviations ``widths_p``."""
        w = np.asarray(widths_p, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError(f"widths_p must be strictly positive and finite, got {widths_p!r}")
        return cls(center_x, center_p, np.diag(1.0 / (2.0 * w**2)), amplitude)

    # -- basic geometry ---------------------------------------------------

    @property
    def dim(self) -> int:
        return self.center_x.shape[0]

    @property
    def dim_space(self) -> int:
        return self.dim - 1

    @property
    def metric(self) -> MetricSignature:
        return MetricSignature(self.dim_space)

    @property
    def covariance_p(self) -> np.ndarray:
        """Covariance of the momentum density |psi(p)|^2."""
        return 0.5 * np.linalg.inv(self.precision)

    @property
    def covariance_x(self) -> np.ndarray:
        """Covariance of the spacetime density |psi(x)|^2."""
        eta = self.metric.diagonal
        return 0.5 * eta[:, None] * self.precision * eta[None, :]

    @property
    def widths_p(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance_p))

    @property
    def widths_x(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance_x))

    @property
    def is_axis_aligned(self) -> bool:
        q = self.precision
        return bool(np.all(q == np.diag(np.diag(q))))

    @property
    def log_amplitude(self) -> complex:
        if self.amplitude == 0:
            return complex(-np.inf, 0.0)
        return complex(np.log(self.amplitude))

    @property
    def log_det_precision(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self._chol))))

    # -- evaluation -------------------------------------------------------

    def log_shape(self, p) -> np.ndarray:
        """log(psi(p)/a) for points ``p`` of shape (..., D)."""
        p = np.asarray(p, dtype=float)
        u = p - self.center_p
        quad = np.sum((u @ self.precision) * u, axis=-1)
        return -0.5 * quad + 1j * minkowski_dot(p, self.center_x)

    def momentum_amplitude(self, p) -> np.ndarray:
        if self.amplitude == 0:
            return np.zeros(np.asarray(p).shape[:-1], dtype=complex)
        return self.amplitude * np.exp(self.log_shape(p))

    __call__ = momentum_amplitude

    def log_gradient(self, p) -> np.ndarray:
        """Gradient of log psi with respect to the contravariant momentum components."""
        p = np.asarray(p, dtype=float)
        eta = self.metric.diagonal
        return -(p - self.center_p) @ self.precision + 1j * (eta * self.center_x)

    def momentum_gradient(self, p) -> np.ndarray:
        return self.log_gradient(p) * self.momentum_amplitude(p)[..., None]

    def momentum_hessian(self, p) -> np.ndarray:
        g = self.log_gradient(p)
        psi = self.momentum_amplitude(p)
        return (-self.precision + g[..., :, None] * g[..., None, :]) * psi[..., None, None]

    def spacetime_amplitude(self, x) -> np.ndarray:
        """psi(x) = (2 pi)^(-D/2) int d^Dp exp(-i p.x) psi(p), in closed form."""
        x = np.asarray(x, dtype=float)
        eta = self.metric.diagonal
        y = (self.center_x - x) * eta
        cov = np.linalg.inv(self.precision)
        quad = np.einsum("...i,ij,...j->...", y, cov, y)
        phase = y @ self.center_p
        pref = self.amplitude * np.exp(-0.5 * self.log_det_precision)
        return pref * np.exp(1j * phase - 0.5 * quad)

    def norm_sq(self) -> float:
        return float(inner_product(self, self).real)

    # -- derived packets --------------------------------------------------

    def replace(self, **changes) -> "GaussianEventPacket":
        kwargs = dict(
            center_x=self.center_x,
            center_p=self.center_p,
            precision=self.precision,
            amplitude=self.amplitude,
        )
        kwargs.update(changes)
        return GaussianEventPacket(**kwargs)

    def scaled(self, factor: complex) -> "GaussianEventPacket":
        return self.replace(amplitude=self.amplitude * complex(factor))

    def normalized(self) -> "GaussianEventPacket":
        n = self.norm_sq()
        if not n > 0:
            raise ValueError("cannot normalize a zero-norm packet")
        return self.scaled(1.0 / np.sqrt(n))

    def translated(self, a) -> "GaussianEventPacket":
        """Spacetime translation: psi(x) -> psi(x - a)."""
        a = as_components(a)
        return self.replace(center_x=self.center_x + a)

    def transformed(self, lorentz, translation=None) -> "GaussianEventPacket":
        """Apply U_T(a) U_Lambda: psi(p) -> exp(i p.a) psi(Lambda^-1 p)."""
        lam = np.asarray(lorentz, dtype=float)
        inv = np.linalg.inv(lam)
        q = inv.T @ self.precision @ inv
        cx = lam @ self.center_x
        if translation is not None:
            cx = cx + as_components(translation)
        return self.replace(center_x=cx, center_p=lam @ self.center_p, precision=q)

    def conjugate(self) -> "GaussianEventPacket":
        """Packet whose spacetime wavefunction is the complex conjugate psi*(x)."""
        return self.replace(center_p=-self.center_p, amplitude=np.conj(self.amplitude))

    def gauge_phase(self, b) -> "GaussianEventPacket":
        """Multiply the spacetime wavefunction by exp(i b.x) for a constant covector shift b."""
        b = as_components(b)
        phase = np.exp(1j * minkowski_dot(b, self.center_x))
        return self.replace(center_p=self.center_p - b, amplitude=self.amplitude * phase)


@dataclass(frozen=True, eq=False)
class EnergyProjected:
    """A packet restricted to one sign of p^0 by the projectors theta(+/- E)."""

    packet: GaussianEventPacket
    signs: frozenset

    @property
    def dim(self) -> int:
        return self.packet.dim

    @property
    def is_zero(self) -> bool:
        return len(self.signs) > 1

    @property
    def sign(self) -> Optional[int]:
        if self.is_zero:
            return None
        (s,) = tuple(self.signs)
        return s

    def mask(self, p) -> np.ndarray:
        p0 = np.asarray(p, dtype=float)[..., 0]
        if self.is_zero:
            return np.zeros(p0.shape)
        return (self.sign * p0 >= 0).astype(float)

    def momentum_amplitude(self, p) -> np.ndarray:
        return self.packet.momentum_amplitude(p) * self.mask(p)

    __call__ = momentum_amplitude

    def project(self, sign: int) -> "EnergyProjected":
        return EnergyProjected(self.packet, self.signs | {int(sign)})


PacketLike = Union[GaussianEventPacket, EnergyProjected]


def split_projection(v: PacketLike):
    """Return (packet, sign restriction) where restriction is None, +1, -1 or 0 (zero vector)."""
    if isinstance(v, EnergyProjected):
        return v.packet, (0 if v.is_zero else v.sign)
    return v, None


# -- Gaussian integrals -----------------------------------------------------


def _log_gaussian_integral(A: np.ndarray, b: np.ndarray, c: complex) -> complex:
    """log of int exp(-1/2 p^T A p + b^T p + c) d^Dp over R^D (A real SPD, b complex)."""
    chol = np.linalg.cholesky(A)
    y = np.linalg.solve(chol, b)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    d = A.shape[0]
    return c + 0.5 * np.sum(y * y) + 0.5 * d * LOG_2PI - 0.5 * logdet


def _log_half_line(a: float, b: complex, sign: int) -> complex:
    """log of int_{sign*p>=0} exp(-a p^2 + b p) dp for a > 0 and complex b."""
    if sign < 0:
        b = -b
    z = b / (2.0 * np.sqrt(a))
    base = np.log(0.5 * np.sqrt(np.pi / a))
    if z.real <= 0:
        return base + np.log(wofz(-1j * z))
    z2 = z * z
    if z2.real < 0:
        return base + np.log(2.0 * np.exp(z2) - wofz(1j * z))
    return base + z2 + np.log(2.0 - np.exp(-z2) * wofz(1j * z))


def _log_half_space_integral(A: np.ndarray, b: np.ndarray, c: complex, sign: int) -> complex:
    """Same as _log_gaussian_integral restricted to sign * p^0 >= 0."""
    d = A.shape[0]
    if d == 1:
        return c + _log_half_line(0.5 * A[0, 0], b[0], sign)
    arr = A[1:, 1:]
    ar0 = A[1:, 0]
    sol_a = np.linalg.solve(arr, ar0)
    sol_b = np.linalg.solve(arr, b[1:])
    schur = A[0, 0] - ar0 @ sol_a
    b0 = b[0] - ar0 @ sol_b
    chol = np.linalg.cholesky(arr)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    rest = 0.5 * (b[1:] @ sol_b) + 0.5 * (d - 1) * LOG_2PI - 0.5 * logdet
    return c + rest + _log_half_line(0.5 * schur, b0, sign)


def _linear_terms(packet: GaussianEventPacket):
    """Return (b, c) with log(psi/a) = -1/2 p^T Q p + b^T p + c."""
    q = packet.precision
    eta = packet.metric.diagonal
    b = q @ packet.center_p + 1j * eta * packet.center_x
    c = -0.5 * packet.center_p @ q @ packet.center_p
    return b, c


def log_inner_product(phi: PacketLike, psi: PacketLike) -> complex:
    """Complex logarithm of <phi|psi>; real part -inf for an exactly vanishing product."""
    p1, s1 = split_projection(phi)
    p2, s2 = split_projection(psi)
    if p1.dim != p2.dim:
        raise DimensionMismatch(f"packets live in different dimensions: {p1.dim} vs {p2.dim}")
    if s1 == 0 or s2 == 0 or (s1 is not None and s2 is not None and s1 != s2):
        return complex(-np.inf, 0.0)
    if p1.amplitude == 0 or p2.amplitude == 0:
        return complex(-np.inf, 0.0)
    b1, c1 = _linear_terms(p1)
    b2, c2 = _linear_terms(p2)
    A = p1.precision + p2.precision
    b = np.conj(b1) + b2
    c = c1 + c2 + np.conj(p1.log_amplitude) + p2.log_amplitude
    sign = s1 if s1 is not None else s2
    if sign is None:
        return complex(_log_gaussian_integral(A, b, c))
    return complex(_log_half_space_integral(A, b, c, sign))


def inner_product(phi: PacketLike, psi: PacketLike) -> complex:
    """<phi|psi> = int d^Dx phi*(x) psi(x), evaluated in closed form in momentum space."""
    return complex(np.exp(log_inner_product(phi, psi)))


# -- observables ------------------------------------------------------------

_COORD = {"t": 0, "x": 1, "y": 2, "z": 3}
_MOM = {"E": 0, "px": 1, "py": 2, "pz": 3}


def _parse_observable(obs: str, dim: int):
    """Return ('x', axis), ('p', axis) or ('M', alpha, beta) for a Lorentz generator."""
    name = obs.strip()
    if name in _COORD:
        kind, axis = "x", _COORD[name]
    elif name in _MOM:
        kind, axis = "p", _MOM[name]
    elif len(name) == 2 and name[0] in "xp" and name[1].isdigit():
        kind, axis = name[0], int(name[1])
        if axis == 0:
            raise ValueError(f"use 't' or 'E' for the temporal component, got {obs!r}")
    elif len(name) == 2 and name[0] in "LK" and name[1].isdigit():
        i = int(name[1])
        if name[0] == "K":
            if not 1 <= i < dim:
                raise ValueError(f"boost component {obs!r} not available for D={dim}")
            return ("M", 0, i)
        pairs = {1: (2, 3), 2: (3, 1), 3: (1, 2)}
        if i not in pairs or max(pairs[i]) >= dim:
            raise ValueError(f"angular momentum component {obs!r} not available for D={dim}")
        return ("M",) + pairs[i]
    else:
        raise ValueError(f"unknown observable {obs!r}")
    if axis >= dim:
        raise ValueError(f"observable {obs!r} not available for D={dim}")
    return (kind, axis)


def generator_bilinear(alpha: int, beta: int, dim: int) -> np.ndarray:
    """Matrix M with M^{ab} = x^a p^b - x^b p^a written as sum_ij M_ij x^i p^j."""
    m = np.zeros((dim, dim))
    m[alpha, beta] += 1.0
    m[beta, alpha] -= 1.0
    return m


def observable_center_and_uncertainty(psi: GaussianEventPacket, obs: str):
    """Center <A> and uncertainty Delta A of an observable for a Gaussian packet.

    Supported observables: ``t``, ``x1``..``x3`` (or ``x``, ``y``, ``z``), ``E``,
    ``p1``..``p3``, angular momenta ``L1``..``L3`` and boosts ``K1``..``K3``.
    Coordinate and momentum moments are read off the quadratic form; the
    bilinear generators use the Wigner function of the packet, which factorizes
    into independent Gaussians in position and canonical momentum because the
    momentum-space profile is real up to a linear phase.
    """
    if psi.amplitude == 0:
        raise ValueError("zero-norm packet has no observable moments")
    dim = psi.dim
    parsed = _parse_observable(obs, dim)
    if parsed[0] == "x":
        ax = parsed[1]
        return float(psi.center_x[ax]), float(np.sqrt(psi.covariance_x[ax, ax]))
    if parsed[0] == "p":
        ax = parsed[1]
        return float(psi.center_p[ax]), float(np.sqrt(psi.covariance_p[ax, ax]))
    _, alpha, beta = parsed
    m = generator_bilinear(alpha, beta, dim)
    # canonical momenta pi with [x^a, pi^a] = i: pi^0 = -p^0, pi^k = p^k
    s = -psi.metric.diagonal
    m_c = m * s[None, :]
    mu_x = psi.center_x
    mu_pi = s * psi.center_p
    cov_x = psi.covariance_x
    cov_pi = s[:, None] * psi.covariance_p * s[None, :]
    mean = float(mu_x @ m_c @ mu_pi)
    second_x = cov_x + np.outer(mu_x, mu_x)
    second_pi = cov_pi + np.outer(mu_pi, mu_pi)
    weyl_sq = float(np.trace(m_c @ second_pi @ m_c.T @ second_x)) + 0.25 * float(np.trace(m_c @ m_c))
    var = max(weyl_sq - mean**2, 0.0)
    return mean, float(np.sqrt(var))
