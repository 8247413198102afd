"""End-to-end acceptance criteria, one test per criterion with a PASS/FAIL line each."""

import math
import time

import numpy as np

from oracles import shell_monte_carlo_1d
from qevents.cli import main
from qevents.emfield import GridField, current_and_continuity, field_tensor, homogeneous_maxwell_residual
from qevents.histories import CandidateLattice, flip_statistics, pair_transition_frequency, sample_ensemble
from qevents.massshell import Propagator, energy_sign_project, transition_amplitude, transition_probability
from qevents.nonrel import limit_convergence_study, observed_orders
from qevents.packets import GaussianEventPacket, observable_center_and_uncertainty
from qevents.poincare import boost, invariance_report, translation

FREE = Propagator(1.0)


def shell_packet(rng, d, w_lo=0.25, w_hi=0.5, spread=1.0):
    p = rng.normal(0, 0.6, d)
    e = math.sqrt(float(p @ p) + 1.0)
    amp = complex(rng.normal(), rng.normal())
    return GaussianEventPacket.from_widths(rng.normal(0, spread, d + 1), [e, *p], rng.uniform(w_lo, w_hi, d + 1), amp)


def test_probability_axioms(criterion):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst_cs, bad_p, n = 0.0, 0, 0
    for d in (1, 2, 3):
        for _ in range(334):
            phi, psi = shell_packet(rng, d), shell_packet(rng, d)
            tau = transition_amplitude(phi, psi, FREE)
            t_phi = transition_amplitude(phi, phi, FREE).real
            t_psi = transition_amplitude(psi, psi, FREE).real
            worst_cs = max(worst_cs, abs(tau) ** 2 / (t_phi * t_psi))
            P = abs(tau) ** 2 / (t_phi * t_psi)
            bad_p += not (0.0 <= P <= 1.0)
            n += 1
    elapsed = time.perf_counter() - start
    ok = n >= 1000 and bad_p == 0 and worst_cs <= 1 + 1e-10 and elapsed < 120
    assert criterion(1, ok, f"{n} pairs, max |tau|^2/(tau_phi tau_psi) = {worst_cs:.3e}, P out of [0,1]: {bad_p}, {elapsed:.1f}s < 120s")


def test_superselection(criterion):
    rng = np.random.default_rng(102)
    worst = 0.0
    for k in range(100):
        d = 1 + k % 3
        phi, psi = shell_packet(rng, d), shell_packet(rng, d)
        phi = phi.replace(center_p=phi.center_p * np.r_[-1.0, np.ones(d)])
        tau = transition_amplitude(energy_sign_project(phi, -1), energy_sign_project(psi, 1), FREE)
        scale = math.sqrt(transition_amplitude(phi, phi, FREE).real * transition_amplitude(psi, psi, FREE).real)
        worst = max(worst, abs(tau) / scale)
    assert criterion(2, worst < 1e-8, f"100 pairs, max |tau(P- phi, P+ psi)| / shell scale = {worst:.3e} < 1e-8")


def test_poincare_invariance(criterion):
    rng = np.random.default_rng(103)
    worst_t, worst_b = 0.0, 0.0
    for d in (1, 3):
        for _ in range(50):
            phi, psi = shell_packet(rng, d, 0.3, 0.5, 0.5), shell_packet(rng, d, 0.3, 0.5, 0.5)
            g = translation(rng.normal(0, 2.0, d + 1))
            worst_t = max(worst_t, invariance_report(phi, psi, FREE, g).relative_error)
        for _ in range(20):
            phi, psi = shell_packet(rng, d, 0.3, 0.5, 0.5), shell_packet(rng, d, 0.3, 0.5, 0.5)
            n = rng.normal(size=d)
            theta = rng.uniform(0, 1.0) * n / np.linalg.norm(n)
            worst_b = max(worst_b, invariance_report(phi, psi, FREE, boost(theta)).relative_error)
    ok = worst_t < 1e-8 and worst_b < 1e-6
    assert criterion(3, ok, f"d=1,3: translations max rel err {worst_t:.2e} < 1e-8, boosts (|theta| <= 1) max rel err {worst_b:.2e} < 1e-6")


def test_monte_carlo_oracle(criterion):
    rng = np.random.default_rng(104)
    worst = 0.0
    for case in range(50):
        phi = shell_packet(rng, 1, 0.25, 0.5, 0.5)
        psi = shell_packet(rng, 1, 0.25, 0.5, 0.5)
        tau = transition_amplitude(phi, psi, FREE)
        params = lambda k: (k.center_x, k.center_p, k.widths_p, k.amplitude)
        est, se = shell_monte_carlo_1d(params(phi), params(psi), 1.0, 400_000, seed=1000 + case)
        worst = max(worst, abs(tau - est) / se)
    assert criterion(4, worst < 3, f"50 d=1 cases, max |tau - MC| / SE = {worst:.2f} < 3")


def test_maxwell_identities(criterion):
    start = time.perf_counter()

    def pot(t, x, y, z):
        return [
            np.sin(t + x) * np.cos(y) + 0.3 * z * z,
            np.cos(0.5 * t) * y * z,
            np.sin(x * y) + t * z,
            np.exp(-0.5 * (x * x + y * y)) * np.cos(t),
        ]

    A = GridField.sample(pot, [0, -1, -1, -1], [1 / 16] * 4, [32] * 4)
    F = field_tensor(A)
    cyc = homogeneous_maxwell_residual(F, relative=True)
    cont = current_and_continuity(F).relative_residual
    elapsed = time.perf_counter() - start
    ok = cyc < 1e-12 and cont < 1e-12 and elapsed < 60
    assert criterion(5, ok, f"32^4 grid: cyclic {cyc:.2e}, continuity {cont:.2e} (relative, < 1e-12), {elapsed:.1f}s < 60s")


def test_gauge_covariance(criterion):
    rng = np.random.default_rng(106)
    worst = 0.0
    for k in range(50):
        d = 1 + k % 3
        a = rng.normal(0, 0.4, d + 1)
        b = rng.normal(0, 0.4, d + 1)
        G = Propagator(1.0, a)
        packets = []
        for w in (0.3, 0.35):
            p = rng.normal(0, 0.4, d)
            e = a[0] + math.sqrt(float(np.sum((p - a[1:]) ** 2)) + 1.0)
            packets.append(GaussianEventPacket.from_widths(rng.normal(0, 0.5, d + 1), [e, *p], [w] * (d + 1)))
        phi, psi = packets
        P = transition_probability(phi, psi, G)
        P2 = transition_probability(phi.gauge_phase(b), psi.gauge_phase(b), G.with_potential(a - b))
        worst = max(worst, abs(P2 - P))
    assert criterion(6, worst < 1e-8, f"50 constant-shift configurations, max |dP| = {worst:.2e} < 1e-8")


def test_nonrelativistic_limit(criterion):
    start = time.perf_counter()
    rows = limit_convergence_study([0.2, 0.1, 0.05, 0.01], [2.0])
    elapsed = time.perf_counter() - start
    dev = next(r.rel_error for r in rows if r.v == 0.01)
    orders = observed_orders([r for r in rows if r.v >= 0.05], 2.0)
    ok = dev < 1e-3 and min(orders) >= 1.5 and elapsed < 300
    assert criterion(
        7, ok, f"deviation at v=0.01 {dev:.2e} < 1e-3, orders over (0.2, 0.1, 0.05) {[round(o, 3) for o in orders]} >= 1.5, {elapsed:.1f}s"
    )


def test_uncertainty_relation(criterion):
    rng = np.random.default_rng(108)
    worst_low, worst_eq = math.inf, 0.0
    for k in range(1000):
        d = 1 + k % 3
        psi = GaussianEventPacket.from_widths(rng.normal(size=d + 1), rng.normal(size=d + 1), rng.uniform(0.2, 2.0, d + 1))
        _, de = observable_center_and_uncertainty(psi, "E")
        _, dt = observable_center_and_uncertainty(psi, "t")
        worst_eq = max(worst_eq, abs(de * dt - 0.5))
        # boosted packets correlate energy with momentum and are no longer minimal in (t, E)
        theta = rng.uniform(-1, 1, d)
        mixed = psi.transformed(boost(theta).lorentz)
        _, de = observable_center_and_uncertainty(mixed, "E")
        _, dt = observable_center_and_uncertainty(mixed, "t")
        worst_low = min(worst_low, de * dt)
    ok = worst_low >= 0.5 - 1e-12 and worst_eq < 1e-10
    assert criterion(8, ok, f"1000 boosted packets min dE*dt = {worst_low:.12f} >= 0.5 - 1e-12; axis-aligned max |dE*dt - 0.5| = {worst_eq:.1e}")


def test_pair_transition_demonstration(criterion):
    w = [0.25, 0.25]
    free_start = GaussianEventPacket.from_widths([0, 0], [math.sqrt(1.25), 0.5], w)
    free_lattice = CandidateLattice([[0.5, 0.3]], [[0, -0.1], [0, 0], [0, 0.1]], w, energy_mode="shell")
    free = sample_ensemble(free_start, free_lattice, FREE, 50, 1000, seed=9)
    f_free = pair_transition_frequency(free)

    G = Propagator(1.0, [3.0, 0.0])
    p = 2.8484271247461903
    start = GaussianEventPacket.from_widths([0, 0], [3.0 - math.sqrt(p * p + 1), p], [0.3, 0.3])
    lattice = CandidateLattice([[0.5, 0.3]], [[0, -0.05], [0, 0], [0, 0.05]], [0.3, 0.3], energy_mode="shell")
    pair = sample_ensemble(start, lattice, G, 50, 1000, seed=9)
    f_pair = pair_transition_frequency(pair)
    observed, expected, z = flip_statistics(pair)
    ok = f_free < 1e-6 and f_pair > 0.01 and abs(z) < 4
    assert criterion(
        9, ok, f"free flip frequency {f_free:.1e} < 1e-6; A0=3m flip frequency {f_pair:.4f} > 0.01, {observed} flips vs {expected:.1f} expected, z = {z:.2f}"
    )


def test_determinism(criterion, tmp_path, capsys):
    G = Propagator(1.0, [3.0, 0.0])
    p = 2.8484271247461903
    start = GaussianEventPacket.from_widths([0, 0], [3.0 - math.sqrt(p * p + 1), p], [0.3, 0.3])
    lattice = CandidateLattice([[0.5, 0.3]], [[0, -0.05], [0, 0], [0, 0.05]], [0.3, 0.3], energy_mode="shell")
    same_histories = sample_ensemble(start, lattice, G, 30, 20, seed=77) == sample_ensemble(start, lattice, G, 30, 20, seed=77, threads=4)

    cfg = tmp_path / "run.ini"
    cfg.write_text(
        "[packet.psi]\ncenter_x = 0, 0\ncenter_p = -0.018863541962413688, 2.8484271247461903\nwidths_p = 0.3, 0.3\n"
        "[propagator]\nmass = 1.0\npotential = 3.0, 0.0\n"
        "[lattice]\nspacetime_offsets = 0.5, 0.3\nmomentum_offsets = 0, -0.05; 0, 0; 0, 0.05\nwidths = 0.3, 0.3\nenergy_mode = shell\n"
        "[history]\nn_steps = 20\nn_histories = 10\n"
    )
    outputs = []
    for run in ("a", "b"):
        code = main(["history", "--config", str(cfg), "--out", str(tmp_path / run), "--seed", "3"])
        outputs.append(code)
    capsys.readouterr()
    same_files = all(
        (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        for name in ("histories.jsonl", "history_summary.csv")
    )
    ok = same_histories and same_files and outputs == [0, 0]
    assert criterion(10, ok, f"histories identical across runs and thread counts: {same_histories}; CLI outputs byte-identical: {same_files}")
