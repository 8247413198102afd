"""Numerical integration over the (shifted) mass shell.

Every shell integral in the library has the form::

    sum_s  int d^d p / (2 E(p - A)) * f(k_s(p)),   k_s(p) = (A^0 + s E(p - A), p)

where ``f`` is a product of Gaussian packets (possibly with a plane wave for
orbit evaluation). The envelope ``|f|`` is always a Gaussian in the full
momentum ``k`` with some precision ``Qs`` and centroid ``cbar``; the engine uses
that envelope to locate the peak of each branch, to choose a truncation box
and to size the tensor Gauss-Legendre grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import QuadratureFailure

SCHEMES = ("tensor_gauss_legendre", "monte_carlo")
DEFAULT_NODES = {1: 64, 2: 32, 3: 24}
DEFAULT_MAX_NODES = {1: 20000, 2: 800, 3: 160}
# branches whose peak lies this far (in log) below the dominant branch are dropped
BRANCH_LOG_CUTOFF = 41.5
CHUNK = 1 << 17


@dataclass(frozen=True)
class ShellQuadrature:
    """Quadrature settings for shell integrals.

    ``nodes_per_axis`` is a floor: the grid is refined automatically when the
    integrand envelope is narrow compared with the truncation box or when the
    spacetime separation of the packets makes the integrand oscillate.
    """

    scheme: str = "tensor_gauss_legendre"
    nodes_per_axis: Optional[int] = None
    sample_count: int = 200_000
    truncation_sigmas: float = 8.0
    verify: bool = False
    tolerance: float = 1e-8
    max_nodes_per_axis: Optional[int] = None
    max_total_nodes: int = 4_000_000
    seed: int = 0
    node_scale: float = 1.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.nodes_per_axis is not None and self.nodes_per_axis <= 0:
            raise ValueError("nodes_per_axis must be positive")
        if self.sample_count <= 0:
            raise ValueError("sample_count must be positive")
        if not self.truncation_sigmas > 0:
            raise ValueError("truncation_sigmas must be positive")

    def min_nodes(self, dim_space: int) -> int:
        return self.nodes_per_axis if self.nodes_per_axis is not None else DEFAULT_NODES[dim_space]

    def max_nodes(self, dim_space: int) -> int:
        return self.max_nodes_per_axis if self.max_nodes_per_axis is not None else DEFAULT_MAX_NODES[dim_space]

    def refined(self) -> "ShellQuadrature":
        """Settings with a wider box and denser grid, used for self-verification."""
        return replace(self, truncation_sigmas=1.25 * self.truncation_sigmas, node_scale=1.6 * self.node_scale, verify=False)


@lru_cache(maxsize=256)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@dataclass(frozen=True)
class ShellSum:
    """A shell integral stored as ``exp(log_scale) * value``; value may be an array."""

    log_scale: float
    value: object
    stderr: object = None

    def total(self):
        if not np.isfinite(self.log_scale):
            return np.zeros_like(np.asarray(self.value, dtype=complex))
        return np.exp(self.log_scale) * np.asarray(self.value)

    @staticmethod
    def combine(parts: Sequence["ShellSum"], template_shape=()) -> "ShellSum":
        parts = [p for p in parts if np.isfinite(p.log_scale)]
        if not parts:
            return ShellSum(-np.inf, np.zeros(template_shape, dtype=complex))
        top = max(p.log_scale for p in parts)
        value = sum(np.asarray(p.value) * np.exp(p.log_scale - top) for p in parts)
        if all(p.stderr is not None for p in parts):
            var = sum((np.asarray(p.stderr) * np.exp(p.log_scale - top)) ** 2 for p in parts)
            return ShellSum(top, value, np.sqrt(var))
        return ShellSum(top, value)


@dataclass(frozen=True)
class ShellIntegrand:
    """Description of a shell integrand.

    ``log_numerator(k)`` maps momenta of shape (N, D) to the complex logarithm of
    the numerator, with shape (N,) or (N, P). ``precision``/``center`` describe
    the Gaussian envelope of its modulus, ``separation`` bounds the spacetime
    displacement entering its phase (absolute value per component) and
    ``sign_filter`` optionally restricts the total energy sign.
    """

    log_numerator: Callable[[np.ndarray], np.ndarray]
    precision: np.ndarray
    center: np.ndarray
    separation: np.ndarray
    sign_filter: Optional[int] = None
    out_shape: tuple = ()


@dataclass(frozen=True)
class _Branch:
    sign: int
    minima: tuple  # tuples (p_star, h_star, sd)
    box_lo: np.ndarray
    box_hi: np.ndarray
    omega: np.ndarray


class _ShellGeometry:
    def __init__(self, mass: float, potential: np.ndarray):
        self.mass = float(mass)
        self.a0 = float(potential[0])
        self.a_sp = np.asarray(potential[1:], dtype=float)

    def energy(self, p: np.ndarray) -> np.ndarray:
        q = p - self.a_sp
        return np.sqrt(np.sum(q * q, axis=-1) + self.mass**2)

    def lift(self, p: np.ndarray, sign: int):
        e = self.energy(p)
        k0 = self.a0 + sign * e
        return np.concatenate([k0[..., None], p], axis=-1), e


def _envelope_objective(geom: _ShellGeometry, sign: int, qs: np.ndarray, cbar: np.ndarray):
    """h(p) = 1/2 (k - cbar)^T Qs (k - cbar) + log 2E with gradient and Hessian."""

    def parts(p):
        k, e = geom.lift(p, sign)
        u = (p - geom.a_sp) / e
        diff = k - cbar
        g = qs @ diff
        jac = np.vstack([sign * u[None, :], np.eye(p.size)])
        return k, e, u, diff, g, jac

    def fun(p):
        k, e, u, diff, g, jac = parts(p)
        return 0.5 * diff @ g + math.log(2.0 * e)

    def grad(p):
        k, e, u, diff, g, jac = parts(p)
        return jac.T @ g + u / e

    def hess(p):
        k, e, u, diff, g, jac = parts(p)
        n = p.size
        eye = np.eye(n)
        uu = np.outer(u, u)
        return jac.T @ qs @ jac + sign * g[0] * (eye - uu) / e + (eye - 2.0 * uu) / e**2

    return fun, grad, hess


def _starting_points(geom: _ShellGeometry, cbar: np.ndarray) -> list:
    d = geom.a_sp.size
    c_sp = cbar[1:]
    starts = [c_sp.copy(), geom.a_sp.copy()]
    r2 = (cbar[0] - geom.a0) ** 2 - geom.mass**2
    if r2 > 0:
        r = math.sqrt(r2)
        rel = c_sp - geom.a_sp
        norm = np.linalg.norm(rel)
        dirs = [rel / norm] if norm > 0 else [np.eye(d)[i] for i in range(d)]
        for v in dirs:
            starts.append(geom.a_sp + r * v)
            starts.append(geom.a_sp - r * v)
    return starts


def _find_minima(geom, sign, qs, cbar, log_window: float):
    fun, grad, hess = _envelope_objective(geom, sign, qs, cbar)
    found = []
    for x0 in _starting_points(geom, cbar):
        res = optimize.minimize(fun, x0, jac=grad, hess=hess, method="trust-exact", options={"gtol": 1e-10})
        found.append((float(res.fun), np.asarray(res.x, dtype=float)))
    found.sort(key=lambda t: t[0])
    best = found[0][0]
    minima = []
    for h, p in found:
        if h > best + log_window:
            continue
        H = hess(p)
        try:
            var = np.diag(np.linalg.inv(H))
            if not np.all(np.isfinite(var)) or np.any(var <= 0):
                raise np.linalg.LinAlgError
            sd = np.sqrt(var)
        except np.linalg.LinAlgError:
            sd = np.sqrt(np.diag(np.linalg.inv(qs)))[1:]
        if any(np.all(np.abs(p - q) <= 0.5 * s) for q, _, s in minima):
            continue
        minima.append((p, h, sd))
    return tuple(minima)


def _velocity_range(lo, hi, mass, a_sp):
    """Bounds of each component of (p - A)/E over the box [lo, hi]."""
    lo = lo - a_sp
    hi = hi - a_sp
    d = lo.size
    umin = np.empty(d)
    umax = np.empty(d)
    sq_max = np.maximum(lo**2, hi**2)
    sq_min = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(lo**2, hi**2))
    for j in range(d):
        others = [i for i in range(d) if i != j]
        r_small = float(np.sum(sq_min[others])) if others else 0.0
        r_big = float(np.sum(sq_max[others])) if others else 0.0
        vals = [
            x / math.sqrt(x * x + mass**2 + r)
            for x in (lo[j], hi[j])
            for r in (r_small, r_big)
        ]
        umin[j], umax[j] = min(vals), max(vals)
    return umin, umax


def _plan_branch(geom, sign, integrand: ShellIntegrand, quad: ShellQuadrature) -> _Branch:
    qs = integrand.precision
    cbar = integrand.center
    T = quad.truncation_sigmas
    minima = _find_minima(geom, sign, qs, cbar, 0.5 * T * T)
    p_best, h_best, _ = minima[0]
    e_best = float(geom.energy(p_best))
    # rigorous box: outside of it the envelope is below exp(-T^2/2) of the peak
    t_rig = math.sqrt(T * T + 2.0 * max(h_best - math.log(2.0 * e_best), 0.0) + 2.0 * max(math.log(e_best / geom.mass), 0.0))
    half = t_rig * np.sqrt(np.diag(np.linalg.inv(qs)))[1:]
    rig_lo = cbar[1:] - half
    rig_hi = cbar[1:] + half
    lap_lo = np.min([p - 1.25 * T * s for p, _, s in minima], axis=0)
    lap_hi = np.max([p + 1.25 * T * s for p, _, s in minima], axis=0)
    lo = np.maximum(lap_lo, rig_lo)
    hi = np.minimum(lap_hi, rig_hi)
    bad = lo >= hi
    lo = np.where(bad, lap_lo, lo)
    hi = np.where(bad, lap_hi, hi)
    umin, umax = _velocity_range(lo, hi, geom.mass, geom.a_sp)
    sep = np.asarray(integrand.separation, dtype=float)
    dx0 = sep[0]
    dxs = sep[1:]
    omega = dxs + dx0 * np.maximum(np.abs(umin), np.abs(umax))
    return _Branch(sign, minima, lo, hi, omega)


def _node_counts(branch: _Branch, quad: ShellQuadrature, d: int) -> np.ndarray:
    width = branch.box_hi - branch.box_lo
    s_min = np.min([s for _, _, s in branch.minima], axis=0)
    n = np.ceil(quad.node_scale * (2.0 * width / s_min + 0.6 * branch.omega * width)) + 8
    n = np.maximum(n, math.ceil(quad.node_scale * quad.min_nodes(d))).astype(int)
    cap = quad.max_nodes(d)
    if np.any(n > cap) or int(np.prod(n.astype(float))) > quad.max_total_nodes:
        raise QuadratureFailure(
            f"shell quadrature needs {n.tolist()} nodes per axis, beyond the budget "
            f"({cap} per axis, {quad.max_total_nodes} total); the integrand is too narrow or too oscillatory"
        )
    return n


class _Accumulator:
    """Running sum of exp(log_terms) with a shared rescalable exponent."""

    def __init__(self):
        self.scale = -np.inf
        self.acc = None

    def add(self, log_terms: np.ndarray):
        m = float(np.max(log_terms.real))
        if not np.isfinite(m):
            return
        if m > self.scale:
            if self.acc is not None:
                self.acc = self.acc * math.exp(self.scale - m)
            self.scale = m
        part = np.sum(np.exp(log_terms - self.scale), axis=0)
        self.acc = part if self.acc is None else self.acc + part

    def result(self, out_shape) -> ShellSum:
        if self.acc is None:
            return ShellSum(-np.inf, np.zeros(out_shape, dtype=complex))
        return ShellSum(self.scale, self.acc)


def _sign_mask_log(k0: np.ndarray, sign_filter: Optional[int]) -> Optional[np.ndarray]:
    if sign_filter is None:
        return None
    return np.where(sign_filter * k0 >= 0, 0.0, -np.inf)


def _gl_branch(geom, branch: _Branch, integrand: ShellIntegrand, quad: ShellQuadrature) -> ShellSum:
    d = branch.box_lo.size
    counts = _node_counts(branch, quad, d)
    rules = []
    for j in range(d):
        x, w = gauss_legendre(int(counts[j]))
        mid = 0.5 * (branch.box_hi[j] + branch.box_lo[j])
        rad = 0.5 * (branch.box_hi[j] - branch.box_lo[j])
        rules.append((mid + rad * x, np.log(rad * w)))
    total = int(np.prod(counts))
    acc = _Accumulator()
    for start in range(0, total, CHUNK):
        idx = np.unravel_index(np.arange(start, min(start + CHUNK, total)), tuple(counts))
        p = np.stack([rules[j][0][idx[j]] for j in range(d)], axis=-1)
        logw = sum(rules[j][1][idx[j]] for j in range(d))
        k, e = geom.lift(p, branch.sign)
        logw = logw - np.log(2.0 * e)
        mask = _sign_mask_log(k[:, 0], integrand.sign_filter)
        if mask is not None:
            logw = logw + mask
        terms = integrand.log_numerator(k)
        terms = terms + logw.reshape(logw.shape + (1,) * (terms.ndim - 1))
        acc.add(terms)
    return acc.result(integrand.out_shape)


def _mc_branch(geom, branch: _Branch, integrand: ShellIntegrand, quad: ShellQuadrature, rng) -> ShellSum:
    """Importance sampling with a Student-t mixture centered on the branch peaks."""
    d = branch.box_lo.size
    n = quad.sample_count
    dof = 5.0
    comps = branch.minima
    which = rng.integers(0, len(comps), size=n)
    z = rng.standard_t(dof, size=(n, d))
    centers = np.array([c for c, _, _ in comps])
    scales = np.array([1.5 * s for _, _, s in comps])
    p = centers[which] + scales[which] * z
    log_q_parts = []
    from scipy.stats import t as student_t

    for c, s in zip(centers, scales):
        log_q_parts.append(np.sum(student_t.logpdf((p - c) / s, dof) - np.log(s), axis=-1))
    log_q = np.logaddexp.reduce(np.array(log_q_parts), axis=0) - math.log(len(comps))
    k, e = geom.lift(p, branch.sign)
    logw = -log_q - np.log(2.0 * e)
    mask = _sign_mask_log(k[:, 0], integrand.sign_filter)
    if mask is not None:
        logw = logw + mask
    terms = integrand.log_numerator(k)
    terms = terms + logw.reshape(logw.shape + (1,) * (terms.ndim - 1))
    m = float(np.max(terms.real))
    if not np.isfinite(m):
        zero = np.zeros(integrand.out_shape, dtype=complex)
        return ShellSum(-np.inf, zero, np.zeros(integrand.out_shape))
    vals = np.exp(terms - m)
    mean = np.mean(vals, axis=0)
    se_re = np.std(vals.real, axis=0, ddof=1) / math.sqrt(n)
    se_im = np.std(vals.imag, axis=0, ddof=1) / math.sqrt(n)
    return ShellSum(m, mean, np.sqrt(se_re**2 + se_im**2))


def branch_signs(selector: str) -> tuple:
    return {"both": (1, -1), "positive_only": (1,), "negative_only": (-1,)}[selector]


def _branch_excluded(geom: _ShellGeometry, sign: int, sign_filter: Optional[int]) -> bool:
    """True when the energy-sign filter removes the whole branch."""
    if sign_filter is None:
        return False
    if sign > 0:
        k0_lo, k0_hi = geom.a0 + geom.mass, np.inf
    else:
        k0_lo, k0_hi = -np.inf, geom.a0 - geom.mass
    if sign_filter > 0:
        return k0_hi < 0
    return k0_lo > 0


def integrate_shell(
    integrand: ShellIntegrand,
    mass: float,
    potential,
    branches: Sequence[int],
    quad: ShellQuadrature,
) -> ShellSum:
    """Integrate ``integrand`` over the requested branches of the shell (k - A)^2 = m^2."""
    geom = _ShellGeometry(mass, np.asarray(potential, dtype=float))
    plans = []
    for s in branches:
        if _branch_excluded(geom, s, integrand.sign_filter):
            continue
        plans.append(_plan_branch(geom, s, integrand, quad))
    if not plans:
        return ShellSum(-np.inf, np.zeros(integrand.out_shape, dtype=complex))
    peaks = [-b.minima[0][1] for b in plans]
    top = max(peaks)
    plans = [b for b, pk in zip(plans, peaks) if pk >= top - BRANCH_LOG_CUTOFF]
    if quad.scheme == "monte_carlo":
        rng = np.random.Generator(np.random.Philox(quad.seed))
        parts = [_mc_branch(geom, b, integrand, quad, rng) for b in plans]
    else:
        parts = [_gl_branch(geom, b, integrand, quad) for b in plans]
    result = ShellSum.combine(parts, integrand.out_shape)
    if quad.verify and quad.scheme == "tensor_gauss_legendre":
        finer = quad.refined()
        check = integrate_shell(integrand, mass, potential, branches, finer)
        a, b = result.total(), check.total()
        scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-300)
        diff = float(np.max(np.abs(a - b)))
        if diff > quad.tolerance * scale:
            raise QuadratureFailure(
                f"shell quadrature not converged: refined estimate differs by {diff / scale:.3e} (relative)"
            )
    return result
