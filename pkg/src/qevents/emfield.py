"""Field tensor, Maxwell identities, currents and gauge transformations on a grid.

All derivatives are second-order central differences. Points whose stencil
would leave the grid are set to NaN, so every derived quantity carries its own
invalid boundary layer and residuals are taken over finite entries only.
Indices are contravariant; a raised derivative is ``d^a = g^{aa} d_a``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, GridMismatch
from .geometry import MetricSignature, SUPPORTED_DIMS

MIN_POINTS = 4


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of a (multi-component) field on a uniform (1+d)-dimensional lattice.

    ``values`` has shape ``shape + (ncomp,)``; axis order is (t, x, y, z).
    """

    origin: np.ndarray
    spacing: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        origin = np.array(self.origin, dtype=float)
        spacing = np.array(self.spacing, dtype=float)
        D = spacing.size
        if D - 1 not in SUPPORTED_DIMS or origin.shape != (D,) or spacing.shape != (D,):
            raise DimensionMismatch("origin and spacing must have 2, 3 or 4 entries")
        if np.any(~np.isfinite(spacing)) or np.any(spacing <= 0):
            raise ValueError("grid spacing must be positive")
        values = np.asarray(self.values)
        if values.ndim == D:
            values = values[..., None]
        if values.ndim != D + 1:
            raise DimensionMismatch(f"values must have {D} grid axes plus a component axis")
        if any(n < MIN_POINTS for n in values.shape[:D]):
            raise ValueError(f"grid needs at least {MIN_POINTS} samples per axis, got {values.shape[:D]}")
        values = np.array(values, dtype=complex if np.iscomplexobj(values) else float)
        for arr in (origin, spacing, values):
            arr.flags.writeable = False
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.spacing.size

    @property
    def shape(self) -> tuple:
        return self.values.shape[: self.dim]

    @property
    def ncomp(self) -> int:
        return self.values.shape[-1]

    @property
    def metric(self) -> MetricSignature:
        return MetricSignature(self.dim - 1)

    def component(self, i: int) -> np.ndarray:
        return self.values[..., i]

    def axes(self) -> list:
        return [o + h * np.arange(n) for o, h, n in zip(self.origin, self.spacing, self.shape)]

    def coordinates(self) -> list:
        """Broadcastable coordinate arrays, one per axis."""
        return np.meshgrid(*self.axes(), indexing="ij", sparse=True)

    def with_values(self, values) -> "GridField":
        return GridField(self.origin, self.spacing, values)

    def same_geometry(self, other: "GridField") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.origin, other.origin)
            and np.array_equal(self.spacing, other.spacing)
        )

    @classmethod
    def sample(cls, func: Callable, origin, spacing, shape) -> "GridField":
        """Evaluate ``func(t, x, ...)`` on the lattice; a sequence return value gives components."""
        axes = [o + h * np.arange(n) for o, h, n in zip(origin, spacing, shape)]
        coords = np.meshgrid(*axes, indexing="ij")
        out = func(*coords)
        if isinstance(out, (list, tuple)):
            out = np.stack([np.broadcast_to(np.asarray(c), coords[0].shape) for c in out], axis=-1)
        else:
            out = np.broadcast_to(np.asarray(out), coords[0].shape)[..., None]
        return cls(origin, spacing, out)


def tensor_pairs(dim: int) -> list:
    return [(a, b) for a in range(dim) for b in range(a + 1, dim)]


@dataclass(frozen=True, eq=False)
class FieldTensorGrid:
    """Antisymmetric F^{ab} on a grid; only a < b is stored."""

    base: GridField

    def __post_init__(self):
        if self.base.ncomp != len(tensor_pairs(self.base.dim)):
            raise DimensionMismatch("field tensor needs one component per index pair a < b")

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def pairs(self) -> list:
        return tensor_pairs(self.dim)

    def component(self, a: int, b: int) -> np.ndarray:
        if a == b:
            return np.zeros(self.base.shape)
        if a < b:
            return self.base.values[..., self.pairs.index((a, b))]
        return -self.base.values[..., self.pairs.index((b, a))]

    @classmethod
    def from_function(cls, func: Callable, origin, spacing, shape) -> "FieldTensorGrid":
        """``func(t, x, ...)`` returns the components F^{ab} for a < b in lexicographic order."""
        return cls(GridField.sample(func, origin, spacing, shape))


def central_difference(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """d f / d x^axis with NaN where the stencil leaves the grid."""
    f = np.asarray(f)
    out = np.full(f.shape, np.nan, dtype=np.result_type(f.dtype, float))
    n = f.shape[axis]
    hi = [slice(None)] * f.ndim
    lo = [slice(None)] * f.ndim
    mid = [slice(None)] * f.ndim
    hi[axis] = slice(2, n)
    lo[axis] = slice(0, n - 2)
    mid[axis] = slice(1, n - 1)
    out[tuple(mid)] = (f[tuple(hi)] - f[tuple(lo)]) / (2.0 * h)
    return out


def _raised(f: np.ndarray, axis: int, grid: GridField) -> np.ndarray:
    return grid.metric.diagonal[axis] * central_difference(f, axis, grid.spacing[axis])


def field_tensor(A: GridField) -> FieldTensorGrid:
    """F^{ab} = d^a A^b - d^b A^a."""
    D = A.dim
    if A.ncomp != D:
        raise DimensionMismatch(f"a 4-potential on a D={D} grid needs {D} components, got {A.ncomp}")
    comps = []
    for a, b in tensor_pairs(D):
        comps.append(_raised(A.component(b), a, A) - _raised(A.component(a), b, A))
    return FieldTensorGrid(A.with_values(np.stack(comps, axis=-1)))


def _finite_max(arrays) -> float:
    best = 0.0
    for arr in arrays:
        mag = np.abs(arr)
        finite = mag[np.isfinite(mag)]
        if finite.size:
            best = max(best, float(finite.max()))
    return best


def _cyclic_terms(F: FieldTensorGrid):
    grid = F.base
    for g, a, b in itertools.combinations(range(F.dim), 3):
        yield (
            _raised(F.component(a, b), g, grid),
            _raised(F.component(b, g), a, grid),
            _raised(F.component(g, a), b, grid),
        )


def homogeneous_maxwell_residual(F: FieldTensorGrid, relative: bool = False) -> float:
    """max |d^g F^{ab} + d^a F^{bg} + d^b F^{ga}| over interior points and index triples.

    With ``relative=True`` the residual is divided by the largest individual
    term, which is the natural scale for rounding errors. For d = 1 there are
    no index triples and the residual is zero.
    """
    sums = []
    terms = []
    for t1, t2, t3 in _cyclic_terms(F):
        sums.append(t1 + t2 + t3)
        terms.extend((t1, t2, t3))
    res = _finite_max(sums)
    if relative:
        scale = _finite_max(terms)
        return res / scale if scale > 0 else res
    return res


def cyclic_sum(F: FieldTensorGrid, g: int, a: int, b: int) -> np.ndarray:
    """The cyclic combination for a single index triple, as a grid array."""
    grid = F.base
    return (
        _raised(F.component(a, b), g, grid)
        + _raised(F.component(b, g), a, grid)
        + _raised(F.component(g, a), b, grid)
    )


@dataclass(frozen=True)
class CurrentResult:
    current: GridField
    continuity_residual: float
    scale: float

    @property
    def relative_residual(self) -> float:
        return self.continuity_residual / self.scale if self.scale > 0 else self.continuity_residual

    def __iter__(self):
        # allows ``J, residual = current_and_continuity(F)``
        return iter((self.current, self.continuity_residual))


def current_and_continuity(F: FieldTensorGrid) -> CurrentResult:
    """J^a = d_b F^{ab} and max |d_a J^a| over the interior."""
    grid = F.base
    D = F.dim
    J = []
    for a in range(D):
        acc = np.zeros(grid.shape)
        for b in range(D):
            if b != a:
                acc = acc + central_difference(F.component(a, b), b, grid.spacing[b])
        J.append(acc)
    div_terms = [central_difference(J[a], a, grid.spacing[a]) for a in range(D)]
    div = sum(div_terms)
    return CurrentResult(
        current=grid.with_values(np.stack(J, axis=-1)),
        continuity_residual=_finite_max([div]),
        scale=_finite_max(div_terms),
    )


_LEVI = {(1, 2, 3): 1, (2, 3, 1): 1, (3, 1, 2): 1, (1, 3, 2): -1, (3, 2, 1): -1, (2, 1, 3): -1}


def extract_EB(F: FieldTensorGrid):
    """Electric field E^i = F^{i0} and magnetic field B = curl A.

    With F^{jk} = d^j A^k - d^k A^j the curl of the vector potential is
    B^i = -1/2 eps^{ijk} F^{jk}. For d = 2 only B^3 exists and for d = 1
    B is None.
    """
    grid = F.base
    D = F.dim
    E = np.stack([F.component(i, 0) for i in range(1, D)], axis=-1)
    if D == 2:
        return grid.with_values(E), None
    if D == 3:
        return grid.with_values(E), grid.with_values(-F.component(1, 2)[..., None])
    B = []
    for i in (1, 2, 3):
        acc = np.zeros(grid.shape)
        for (a, b, c), eps in _LEVI.items():
            if a == i:
                acc = acc - 0.5 * eps * F.component(b, c)
        B.append(acc)
    return grid.with_values(E), grid.with_values(np.stack(B, axis=-1))


def field_tensor_from_EB(E: GridField, B: Optional[GridField]) -> FieldTensorGrid:
    """Inverse of :func:`extract_EB`: F^{0i} = -E^i and F^{ij} = -eps^{ijk} B^k."""
    D = E.ncomp + 1
    comps = []
    for a, b in tensor_pairs(D):
        if a == 0:
            comps.append(-E.component(b - 1))
        elif D == 3:
            comps.append(-B.component(0))
        else:
            k = 6 - a - b
            comps.append(-_LEVI[(a, b, k)] * B.component(k - 1))
    return FieldTensorGrid(E.with_values(np.stack(comps, axis=-1)))


def gauge_transform(A: GridField, chi: GridField) -> GridField:
    """A' = A - d chi with the raised gradient taken by central differences."""
    if not A.same_geometry(chi):
        raise GridMismatch("potential and gauge function live on different grids")
    if chi.ncomp != 1:
        raise DimensionMismatch("gauge function must be scalar")
    if A.ncomp != A.dim:
        raise DimensionMismatch("potential needs one component per spacetime axis")
    c = chi.component(0)
    comps = [A.component(a) - _raised(c, a, A) for a in range(A.dim)]
    return A.with_values(np.stack(comps, axis=-1))


def gauge_transform_exact(A: GridField, grad_chi: Callable) -> GridField:
    """A' = A - d^a chi with the covariant gradient ``grad_chi(t, x, ...)`` known in closed form.

    The discrete field tensor of the result differs from the original by the
    stencil's truncation error, which vanishes as O(h^2) under refinement.
    """
    if A.ncomp != A.dim:
        raise DimensionMismatch("potential needs one component per spacetime axis")
    coords = np.meshgrid(*A.axes(), indexing="ij")
    lower = grad_chi(*coords)
    eta = A.metric.diagonal
    comps = [A.component(a) - eta[a] * np.broadcast_to(lower[a], A.shape) for a in range(A.dim)]
    return A.with_values(np.stack(comps, axis=-1))


def field_difference(F1: FieldTensorGrid, F2: FieldTensorGrid) -> float:
    """max |F1 - F2| over points where both are defined."""
    if not F1.base.same_geometry(F2.base):
        raise GridMismatch("field tensors live on different grids")
    return _finite_max([F1.base.values - F2.base.values])
