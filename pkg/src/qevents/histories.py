"""Seeded jump-process sampler over a finite candidate lattice.

At each step the candidate events are generated relative to the current event,
their transition probabilities ``P(candidate, current)`` are computed on the
mass shell and a successor is drawn. Turning the individual probabilities into
a distribution over a finite candidate set is an interpretation layer of this
library: by default the probabilities are normalized over the candidates; the
``thinning`` mode instead accepts candidates by independent Bernoulli trials.

Random numbers come from numpy's Philox counter-based generator; history ``i``
of an ensemble uses the seed ``seed + i``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import AllCandidatesDisallowed, PhysicallyDisallowed
from .massshell import DEFAULT_ALLOWED_THRESHOLD, Propagator, is_physically_allowed, transition_probability
from .packets import GaussianEventPacket
from .quadrature import ShellQuadrature

PROBABILITY_FLOOR = 1e-300
MODES = ("normalize", "thinning")
MAX_THINNING_ROUNDS = 100_000


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) % (1 << 64)))


@dataclass(frozen=True, eq=False)
class CandidateLattice:
    """Displacements that generate candidate events around the current one.

    In ``offset`` energy mode a candidate has center_p = current + dp. In
    ``shell`` mode only the spatial part of dp is used and the energy is put
    on the requested kinetic branches of the shell ``(p - A)^2 = m^2``; the
    potential and mass are taken from the propagator at sampling time.
    """

    spacetime_offsets: tuple
    momentum_offsets: tuple
    widths: np.ndarray
    energy_mode: str = "offset"
    shell_branches: tuple = (1, -1)

    def __post_init__(self):
        dx = tuple(np.asarray(v, dtype=float) for v in self.spacetime_offsets)
        dp = tuple(np.asarray(v, dtype=float) for v in self.momentum_offsets)
        w = np.asarray(self.widths, dtype=float)
        if not dx or not dp:
            raise ValueError("candidate lattice needs at least one spacetime and one momentum offset")
        dim = w.size
        if any(v.shape != (dim,) for v in dx + dp):
            raise ValueError("all offsets must have the same length as the widths")
        if np.any(w <= 0):
            raise ValueError("candidate widths must be positive")
        if self.energy_mode not in ("offset", "shell"):
            raise ValueError("energy_mode must be 'offset' or 'shell'")
        if not set(self.shell_branches) <= {1, -1} or not self.shell_branches:
            raise ValueError("shell_branches must be a non-empty subset of {+1, -1}")
        object.__setattr__(self, "spacetime_offsets", dx)
        object.__setattr__(self, "momentum_offsets", dp)
        object.__setattr__(self, "widths", w)
        object.__setattr__(self, "shell_branches", tuple(self.shell_branches))

    @property
    def dim(self) -> int:
        return self.widths.size

    def momenta(self, current_p: np.ndarray, G: Propagator) -> list:
        out = []
        if self.energy_mode == "offset":
            for dp in self.momentum_offsets:
                out.append(current_p + dp)
            return out
        a = G.potential(self.dim)
        for dp in self.momentum_offsets:
            p_sp = current_p[1:] + dp[1:]
            e = math.sqrt(float(np.sum((p_sp - a[1:]) ** 2)) + G.mass**2)
            for s in self.shell_branches:
                out.append(np.concatenate([[a[0] + s * e], p_sp]))
        return out

    def candidates(self, current: GaussianEventPacket, G: Propagator) -> list:
        out = []
        for dx in self.spacetime_offsets:
            for p in self.momenta(current.center_p, G):
                out.append(GaussianEventPacket.from_widths(current.center_x + dx, p, self.widths))
        return out


@dataclass(frozen=True)
class HistoryStep:
    step: int
    center_x: tuple
    center_p: tuple
    energy_sign: int
    p_norm: float
    p_raw: float
    flip_probability: float


@dataclass(frozen=True)
class EventHistory:
    seed: int
    steps: tuple

    @property
    def energy_signs(self) -> list:
        return [s.energy_sign for s in self.steps]

    def flips(self) -> int:
        signs = self.energy_signs
        return sum(1 for a, b in zip(signs, signs[1:]) if a != b)

    def transitions(self) -> int:
        return max(len(self.steps) - 1, 0)


def energy_sign(packet: GaussianEventPacket) -> int:
    e = packet.center_p[0]
    if e == 0:
        raise ValueError("energy sign undefined for a packet centered at E = 0")
    return 1 if e > 0 else -1


@dataclass(eq=False)
class TransitionTable:
    """Cache of step distributions keyed by the current momentum and precision.

    Transition probabilities are invariant under a common spacetime
    translation, so each table is computed with the current event moved to the
    origin. The cached values are therefore a pure function of the key, which
    keeps ensembles bit-reproducible regardless of evaluation order.
    """

    lattice: CandidateLattice
    G: Propagator
    quadrature: Optional[ShellQuadrature] = None
    threshold: float = DEFAULT_ALLOWED_THRESHOLD
    _cache: dict = field(default_factory=dict)

    def lookup(self, current: GaussianEventPacket):
        key = (current.center_p.tobytes(), current.precision.tobytes(), complex(current.amplitude))
        hit = self._cache.get(key)
        if hit is None:
            origin = current.replace(center_x=np.zeros(current.dim))
            cands = self.lattice.candidates(origin, self.G)
            raw = np.array([self._probability(c, origin) for c in cands])
            hit = ([(c.center_x.copy(), c.center_p.copy()) for c in cands], raw)
            self._cache[key] = hit
        return hit

    def _probability(self, cand: GaussianEventPacket, current: GaussianEventPacket) -> float:
        try:
            return transition_probability(cand, current, self.G, self.quadrature, self.threshold)
        except PhysicallyDisallowed:
            return 0.0


def _draw(rng: np.random.Generator, probs: np.ndarray) -> int:
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), probs.size - 1))


def _draw_thinning(rng: np.random.Generator, raw: np.ndarray) -> int:
    for _ in range(MAX_THINNING_ROUNDS):
        hits = np.nonzero(rng.random(raw.size) < raw)[0]
        if hits.size:
            return int(hits[0])
    raise AllCandidatesDisallowed("Bernoulli thinning accepted no candidate")


def sample_history(
    start: GaussianEventPacket,
    lattice: CandidateLattice,
    G: Propagator,
    n_steps: int,
    seed: int,
    q: Optional[ShellQuadrature] = None,
    mode: str = "normalize",
    threshold: float = DEFAULT_ALLOWED_THRESHOLD,
    table: Optional[TransitionTable] = None,
) -> EventHistory:
    """Draw ``n_steps`` successive events starting from ``start`` (recorded as step 0)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    if start.dim != lattice.dim:
        raise ValueError("start packet and lattice have different dimensions")
    if not is_physically_allowed(start, G, q, threshold):
        raise PhysicallyDisallowed("start event is not physically allowed")
    table = table or TransitionTable(lattice, G, q, threshold)
    rng = make_rng(seed)
    current = start
    sign = energy_sign(start)
    steps = [HistoryStep(0, tuple(start.center_x), tuple(start.center_p), sign, 1.0, 1.0, 0.0)]
    for k in range(1, n_steps + 1):
        rel, raw = table.lookup(current)
        total = float(np.sum(raw))
        if not total > PROBABILITY_FLOOR:
            raise AllCandidatesDisallowed(f"step {k}: every candidate has negligible transition probability")
        probs = raw / total
        signs = np.array([1 if p[0] > 0 else -1 for _, p in rel])
        flip_p = float(np.sum(probs[signs != sign]))
        idx = _draw(rng, probs) if mode == "normalize" else _draw_thinning(rng, raw)
        dx, p = rel[idx]
        current = GaussianEventPacket.from_widths(current.center_x + dx, p, lattice.widths)
        sign = int(signs[idx])
        steps.append(HistoryStep(k, tuple(current.center_x), tuple(p), sign, float(probs[idx]), float(raw[idx]), flip_p))
    return EventHistory(int(seed), tuple(steps))


def sample_ensemble(
    start: GaussianEventPacket,
    lattice: CandidateLattice,
    G: Propagator,
    n_steps: int,
    n_histories: int,
    seed: int,
    q: Optional[ShellQuadrature] = None,
    mode: str = "normalize",
    threshold: float = DEFAULT_ALLOWED_THRESHOLD,
    threads: int = 1,
) -> list:
    """Independent histories with seeds seed, seed + 1, ...; results do not depend on ``threads``."""
    table = TransitionTable(lattice, G, q, threshold)

    def run(i):
        return sample_history(start, lattice, G, n_steps, seed + i, q, mode, threshold, table)

    if threads <= 1:
        return [run(i) for i in range(n_histories)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, range(n_histories)))


def pair_transition_frequency(histories: Sequence[EventHistory]) -> float:
    """Fraction of transitions whose energy sign differs from the previous event's."""
    if not histories:
        raise ValueError("need at least one history")
    transitions = sum(h.transitions() for h in histories)
    if transitions == 0:
        return 0.0
    return sum(h.flips() for h in histories) / transitions


def flip_statistics(histories: Sequence[EventHistory]):
    """Observed flips, expected flips and the z-score of their difference.

    The expectation sums the per-step flip probabilities recorded during
    sampling; the variance is the corresponding sum of Bernoulli variances.
    """
    observed = sum(h.flips() for h in histories)
    probs = np.array([s.flip_probability for h in histories for s in h.steps[1:]])
    expected = float(np.sum(probs))
    var = float(np.sum(probs * (1.0 - probs)))
    if var == 0:
        z = 0.0 if observed == expected else math.inf
    else:
        z = (observed - expected) / math.sqrt(var)
    return observed, expected, z


@dataclass(frozen=True)
class FrequencyReport:
    empirical: float
    analytic: float
    z_score: float
    n_trials: int


def frequency_consistency_check(
    current: GaussianEventPacket,
    candidates: Sequence[GaussianEventPacket],
    G: Propagator,
    n_trials: int,
    seed: int,
    target: int = 0,
    q: Optional[ShellQuadrature] = None,
    threshold: float = DEFAULT_ALLOWED_THRESHOLD,
) -> FrequencyReport:
    """Repeated single-step draws from ``current`` versus the normalized probability of ``candidates[target]``.

    ``n_trials`` must be positive; zero trials carry no frequency and raise ValueError.
    """
    if n_trials <= 0:
        raise ValueError("n_trials must be positive")
    if not candidates:
        raise ValueError("need at least one candidate")
    raw = np.array([transition_probability(c, current, G, q, threshold) for c in candidates])
    total = float(np.sum(raw))
    if not total > PROBABILITY_FLOOR:
        raise AllCandidatesDisallowed("every candidate has negligible transition probability")
    probs = raw / total
    rng = make_rng(seed)
    cdf = np.cumsum(probs)
    draws = np.minimum(np.searchsorted(cdf, rng.random(n_trials) * cdf[-1], side="right"), probs.size - 1)
    empirical = float(np.mean(draws == target))
    p = float(probs[target])
    var = p * (1.0 - p) / n_trials
    if var > 0:
        z = (empirical - p) / math.sqrt(var)
    else:
        z = 0.0 if empirical == p else math.inf
    return FrequencyReport(empirical, p, float(z), n_trials)


def write_histories_jsonl(path, histories: Sequence[EventHistory]) -> None:
    """One JSON object per step; floats are written with round-trip precision."""
    with open(path, "w") as fh:
        for i, h in enumerate(histories):
            for s in h.steps:
                rec = {
                    "history": i,
                    "step": s.step,
                    "t": s.center_x[0],
                    "x": list(s.center_x[1:]),
                    "E": s.center_p[0],
                    "p": list(s.center_p[1:]),
                    "energy_sign": s.energy_sign,
                    "p_norm": s.p_norm,
                    "p_raw": s.p_raw,
                }
                fh.write(json.dumps(rec) + "\n")
