"""Poincare transformations of event packets and the invariance harness.

A transformation ``x -> Lambda x + a`` acts on momentum-space wavefunctions as
``psi(p) -> exp(i p.a) psi(Lambda^-1 p)`` (translation applied after the
Lorentz part). Infinitesimally, translations along axis ``alpha`` act as
``1 + i eps p_alpha``, rotations as ``1 - i phi L`` and boosts built by
:func:`boost` as ``1 + i theta K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DimensionMismatch
from .geometry import MetricSignature, as_components, minkowski_dot
from .massshell import Propagator, transition_amplitude
from .packets import GaussianEventPacket, generator_bilinear, _parse_observable
from .quadrature import ShellQuadrature

DEFAULT_RAPIDITY_CAP = 3.0


@dataclass(frozen=True, eq=False)
class PoincareElement:
    lorentz: np.ndarray
    translation: np.ndarray = field(default=None)

    def __post_init__(self):
        lam = np.array(self.lorentz, dtype=float)
        if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
            raise ValueError("lorentz must be a square matrix")
        g = MetricSignature(lam.shape[0] - 1).matrix
        if not np.allclose(lam.T @ g @ lam, g, rtol=0, atol=1e-12 * max(1.0, float(np.max(np.abs(lam))) ** 2)):
            raise ValueError("matrix does not preserve the Minkowski metric")
        a = np.zeros(lam.shape[0]) if self.translation is None else np.array(as_components(self.translation), dtype=float)
        if a.shape != (lam.shape[0],):
            raise DimensionMismatch("translation length does not match the Lorentz matrix")
        lam.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "lorentz", lam)
        object.__setattr__(self, "translation", a)

    @classmethod
    def from_parts(cls, lorentz, translation=None, parity: bool = False, time_reversal: bool = False) -> "PoincareElement":
        """x -> Lambda D x + a, where D applies the requested discrete flips first."""
        lam = np.asarray(lorentz, dtype=float)
        flips = np.ones(lam.shape[0])
        if parity:
            flips[1:] = -1.0
        if time_reversal:
            flips[0] = -1.0
        return cls(lam @ np.diag(flips), translation)

    @property
    def dim(self) -> int:
        return self.lorentz.shape[0]

    @property
    def time_reversal(self) -> bool:
        return bool(self.lorentz[0, 0] < 0)

    @property
    def parity(self) -> bool:
        improper = np.linalg.det(self.lorentz) < 0
        return bool(improper != self.time_reversal)

    @property
    def rapidity(self) -> float:
        return float(math.acosh(max(abs(self.lorentz[0, 0]), 1.0)))

    def compose(self, other: "PoincareElement") -> "PoincareElement":
        """self o other: x -> L1 (L2 x + a2) + a1."""
        return PoincareElement(self.lorentz @ other.lorentz, self.lorentz @ other.translation + self.translation)

    __matmul__ = compose

    def inverse(self) -> "PoincareElement":
        inv = np.linalg.inv(self.lorentz)
        return PoincareElement(inv, -inv @ self.translation)

    def transform_potential(self, potential):
        """Constant 4-potentials transform as A -> Lambda A."""
        if potential is None:
            return None
        return self.lorentz @ as_components(potential)


def identity(dim_space: int) -> PoincareElement:
    return PoincareElement(np.eye(dim_space + 1))


def translation(a) -> PoincareElement:
    a = as_components(a)
    return PoincareElement(np.eye(a.size), a)


def boost(rapidity) -> PoincareElement:
    """Pure boost with rapidity vector theta (direction n, magnitude |theta|).

    A particle at rest is mapped to ``(cosh|theta|, -sinh|theta| n)``.
    """
    theta = np.atleast_1d(np.asarray(rapidity, dtype=float))
    d = theta.size
    MetricSignature(d)
    lam = np.eye(d + 1)
    mag = float(np.linalg.norm(theta))
    if mag == 0:
        return PoincareElement(lam)
    n = theta / mag
    ch, sh = math.cosh(mag), math.sinh(mag)
    lam[0, 0] = ch
    lam[0, 1:] = -sh * n
    lam[1:, 0] = -sh * n
    lam[1:, 1:] += (ch - 1.0) * np.outer(n, n)
    return PoincareElement(lam)


def rotation(angle, dim_space: Optional[int] = None) -> PoincareElement:
    """Rotation by ``angle``: a scalar for d = 2, an axis-angle 3-vector for d = 3."""
    ang = np.atleast_1d(np.asarray(angle, dtype=float))
    if ang.size == 1 and (dim_space in (None, 2)):
        c, s = math.cos(ang[0]), math.sin(ang[0])
        lam = np.eye(3)
        lam[1:, 1:] = [[c, -s], [s, c]]
        return PoincareElement(lam)
    if ang.size != 3:
        raise ValueError("rotations need a scalar angle (d=2) or an axis-angle 3-vector (d=3)")
    mag = float(np.linalg.norm(ang))
    lam = np.eye(4)
    if mag == 0:
        return PoincareElement(lam)
    n = ang / mag
    k = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    lam[1:, 1:] = np.eye(3) + math.sin(mag) * k + (1 - math.cos(mag)) * (k @ k)
    return PoincareElement(lam)


def parity(dim_space: int) -> PoincareElement:
    return PoincareElement.from_parts(np.eye(dim_space + 1), parity=True)


def time_reversal(dim_space: int) -> PoincareElement:
    return PoincareElement.from_parts(np.eye(dim_space + 1), time_reversal=True)


def apply(g: PoincareElement, psi: GaussianEventPacket) -> GaussianEventPacket:
    """Closed-form image of a packet; anisotropy from mixing axes lands in the precision matrix."""
    if g.dim != psi.dim:
        raise DimensionMismatch(f"element acts on D={g.dim}, packet has D={psi.dim}")
    return psi.transformed(g.lorentz, g.translation)


def apply_pointwise(g: PoincareElement, psi: GaussianEventPacket, p) -> np.ndarray:
    """exp(i p.a) psi(Lambda^-1 p) evaluated directly at momenta ``p``."""
    p = np.asarray(p, dtype=float)
    inv = np.linalg.inv(g.lorentz)
    return np.exp(1j * minkowski_dot(p, g.translation)) * psi.momentum_amplitude(p @ inv.T)


# -- generators -------------------------------------------------------------


def generator_velocity(alpha: int, beta: int, dim: int) -> np.ndarray:
    """Matrix V such that M^{ab} acts on momentum wavefunctions as (V p) . grad."""
    eta = MetricSignature(dim - 1).diagonal
    v = np.zeros((dim, dim), dtype=complex)
    v[alpha, beta] += -1j * eta[alpha]
    v[beta, alpha] += 1j * eta[beta]
    return v


def _generator_indices(kind: str, dim: int):
    parsed = _parse_observable(kind, dim)
    if parsed[0] != "M":
        raise ValueError(f"{kind!r} is not a Lorentz generator")
    return parsed[1], parsed[2]


def generator_action(psi: GaussianEventPacket, kind: str, p) -> np.ndarray:
    """Exact action of a generator on the packet at momenta ``p``.

    ``kind`` is ``L1..L3``, ``K1..K3`` or a translation generator ``p0..p3``
    (the covariant component p_alpha, acting multiplicatively).
    """
    p = np.asarray(p, dtype=float)
    if kind[0] == "p" and kind[1:].isdigit():
        ax = int(kind[1:])
        if ax >= psi.dim:
            raise ValueError(f"{kind!r} not available for D={psi.dim}")
        eta = psi.metric.diagonal
        return eta[ax] * p[..., ax] * psi.momentum_amplitude(p)
    alpha, beta = _generator_indices(kind, psi.dim)
    v = p @ generator_velocity(alpha, beta, psi.dim).T
    return np.sum(v * psi.momentum_gradient(p), axis=-1)


def commutator_action(psi: GaussianEventPacket, kind1: str, kind2: str, p) -> np.ndarray:
    """[G1, G2] psi at momenta ``p`` for two Lorentz generators, from exact derivatives."""
    p = np.asarray(p, dtype=float)
    a1, b1 = _generator_indices(kind1, psi.dim)
    a2, b2 = _generator_indices(kind2, psi.dim)
    v1m = generator_velocity(a1, b1, psi.dim)
    v2m = generator_velocity(a2, b2, psi.dim)
    grad = psi.momentum_gradient(p)
    hess = psi.momentum_hessian(p)

    def ordered(va, vb):
        # D_a D_b psi = sum_k va_k (sum_j Vb_jk d_j psi + sum_j vb_j d_k d_j psi)
        wa = p @ va.T
        wb = p @ vb.T
        first = np.einsum("...k,jk,...j->...", wa, vb, grad)
        second = np.einsum("...k,...j,...kj->...", wa, wb, hess)
        return first + second

    return ordered(v1m, v2m) - ordered(v2m, v1m)


def infinitesimal(kind: str, epsilon: float, dim: int) -> tuple:
    """Group element for parameter ``epsilon`` along ``kind`` and the sign s in 1 + i s eps G."""
    d = dim - 1
    if kind[0] == "p" and kind[1:].isdigit():
        a = np.zeros(dim)
        a[int(kind[1:])] = epsilon
        return translation(a), 1
    alpha, beta = _generator_indices(kind, dim)
    if alpha == 0:
        theta = np.zeros(d)
        theta[beta - 1] = epsilon
        return boost(theta), 1
    # rotation in the (alpha, beta) plane taking e_alpha towards e_beta
    lam = np.eye(dim)
    c, s = math.cos(epsilon), math.sin(epsilon)
    lam[alpha, alpha] = c
    lam[beta, beta] = c
    lam[alpha, beta] = -s
    lam[beta, alpha] = s
    return PoincareElement(lam), -1


def sample_grid(psi: GaussianEventPacket, n: int = 5, span: float = 2.0) -> np.ndarray:
    """Tensor grid of momenta within ``span`` standard deviations of the packet centroid."""
    axes = [np.linspace(c - span * w, c + span * w, n) for c, w in zip(psi.center_p, psi.widths_p)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def generator_check(psi: GaussianEventPacket, kind: str, epsilon: float = 1e-4, points=None) -> float:
    """Max relative deviation between U(eps) psi and (1 + i s eps G) psi on sample momenta."""
    pts = sample_grid(psi) if points is None else np.asarray(points, dtype=float)
    g, s = infinitesimal(kind, epsilon, psi.dim)
    exact = apply(g, psi).momentum_amplitude(pts)
    base = psi.momentum_amplitude(pts)
    linear = base + 1j * s * epsilon * generator_action(psi, kind, pts)
    return float(np.max(np.abs(exact - linear)) / np.max(np.abs(base)))


def commutator_check(psi: GaussianEventPacket, points=None) -> float:
    """Max relative deviation of [L1, L2] psi from i L3 psi (d = 3)."""
    if psi.dim != 4:
        raise DimensionMismatch("angular momentum commutators need d = 3")
    pts = sample_grid(psi) if points is None else np.asarray(points, dtype=float)
    lhs = commutator_action(psi, "L1", "L2", pts)
    rhs = 1j * generator_action(psi, "L3", pts)
    return float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(rhs)), np.max(np.abs(lhs)), 1e-300))


# -- invariance ---------------------------------------------------------------


def transformed_propagator(G: Propagator, g: PoincareElement) -> Propagator:
    if G.constant_potential is None:
        return G
    return replace(G, constant_potential=g.transform_potential(G.constant_potential))


@dataclass(frozen=True)
class InvarianceReport:
    tau_before: complex
    tau_after: complex
    relative_error: float


def invariance_report(
    phi: GaussianEventPacket,
    psi: GaussianEventPacket,
    G: Propagator,
    g: PoincareElement,
    q: Optional[ShellQuadrature] = None,
    rapidity_cap: float = DEFAULT_RAPIDITY_CAP,
) -> InvarianceReport:
    """tau(phi, psi) before and after transforming packets and potential together.

    Beyond ``rapidity_cap`` the truncation box is widened and the quadrature
    self-verifies; a failed verification raises QuadratureFailure.
    """
    q = q or ShellQuadrature()
    before = transition_amplitude(phi, psi, G, q)
    q_after = q
    if g.rapidity > rapidity_cap:
        q_after = replace(q, truncation_sigmas=1.5 * q.truncation_sigmas, verify=True)
    after = transition_amplitude(apply(g, phi), apply(g, psi), transformed_propagator(G, g), q_after)
    if before == after:
        err = 0.0
    else:
        err = abs(after - before) / max(abs(before), 1e-300)
    return InvarianceReport(before, after, float(err))
