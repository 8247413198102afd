import math

import numpy as np
import pytest

from oracles import shell_amplitude_1d, shell_monte_carlo_1d
from qevents.errors import DimensionMismatch, PhysicallyDisallowed
from qevents.massshell import (
    Propagator,
    energy_sign_project,
    evaluate_orbit,
    is_physically_allowed,
    log_self_amplitude,
    monte_carlo_amplitude,
    orbit_wave_residual,
    shell_energy,
    transition_amplitude,
    transition_probability,
)
from qevents.packets import GaussianEventPacket
from qevents.quadrature import ShellQuadrature

FREE = Propagator(1.0)


def on_shell(cx, p_spatial, w, amp=1.0, sign=1, mass=1.0):
    e = sign * math.sqrt(float(np.sum(np.square(p_spatial))) + mass * mass)
    return GaussianEventPacket.from_widths(cx, [e, *p_spatial], w, amp)


def params(packet):
    return (packet.center_x, packet.center_p, packet.widths_p, packet.amplitude)


@pytest.mark.parametrize("p, m, e", [(0.0, 1.0, 1.0), (3.0, 4.0, 5.0), (0.0, 0.0, 0.0)])
def test_shell_energy(p, m, e):
    assert shell_energy([p], m) == e
    assert shell_energy([0.0, p, 0.0], m) == e


def test_propagator_validation():
    with pytest.raises(ValueError):
        Propagator(0.0)
    with pytest.raises(ValueError):
        Propagator(1.0, shell_selector="upper")
    with pytest.raises(ValueError):
        Propagator(1.0, charge_sign=2)
    with pytest.raises(DimensionMismatch):
        Propagator(1.0, [1.0, 0.0, 0.0]).potential(2)


def test_self_amplitude_positive_real():
    psi = on_shell([0, 0, 0], [0.4, -0.2], [0.3, 0.3, 0.3])
    tau = transition_amplitude(psi, psi, FREE)
    assert tau.imag == 0.0 or abs(tau.imag) < 1e-15 * abs(tau)
    assert tau.real > 0


@pytest.mark.parametrize(
    "phi, psi, G",
    [
        (([0.0, 0.0], [1.2, 0.4], [0.3, 0.35], 1.0), ([0.0, 0.0], [1.1, 0.5], [0.25, 0.3], 1.0), FREE),
        (([1.5, 0.7], [1.4, 0.9], [0.3, 0.3], 0.5 + 0.5j), ([0.0, 0.0], [1.3, 0.8], [0.4, 0.2], 1.0), FREE),
        (([0.2, -0.3], [0.1, 0.3], [0.6, 0.4], 1.0), ([0.0, 0.1], [-0.2, 0.1], [0.5, 0.5], 1j), FREE),
        (([0.5, 0.2], [1.8, 0.6], [0.3, 0.3], 1.0), ([0.0, 0.0], [1.6, 0.5], [0.3, 0.3], 1.0), Propagator(1.0, [0.5, 0.2])),
        (([0.5, 0.2], [1.2, 0.4], [0.3, 0.3], 1.0), ([0.0, 0.0], [1.2, 0.4], [0.3, 0.3], 1.0), Propagator(1.0, shell_selector="positive_only")),
        (([0.5, 0.2], [-1.2, 0.4], [0.3, 0.3], 1.0), ([0.0, 0.0], [-1.2, 0.4], [0.3, 0.3], 1.0), Propagator(1.0, shell_selector="negative_only")),
    ],
)
def test_amplitude_matches_adaptive_quadrature(phi, psi, G):
    a = GaussianEventPacket.from_widths(*phi)
    b = GaussianEventPacket.from_widths(*psi)
    pot = tuple(G.potential(2))
    ref = shell_amplitude_1d(phi, psi, G.mass, pot, G.branches)
    got = transition_amplitude(a, b, G)
    assert abs(got - ref) <= 1e-10 * abs(ref)


def test_amplitude_matches_independent_monte_carlo():
    rng = np.random.default_rng(7)
    for case in range(5):
        phi = on_shell(rng.normal(0, 0.5, 2), rng.normal(0, 0.6, 1), rng.uniform(0.25, 0.5, 2))
        psi = on_shell(rng.normal(0, 0.5, 2), rng.normal(0, 0.6, 1), rng.uniform(0.25, 0.5, 2))
        tau = transition_amplitude(phi, psi, FREE)
        est, se = shell_monte_carlo_1d(params(phi), params(psi), 1.0, 1_000_000, seed=case)
        assert abs(tau - est) < 3 * se


def test_builtin_monte_carlo_scheme_agrees():
    phi = on_shell([0.3, 0.2], [0.5], [0.3, 0.3])
    psi = on_shell([0.0, 0.0], [0.4], [0.35, 0.3])
    tau = transition_amplitude(phi, psi, FREE)
    est, se = monte_carlo_amplitude(phi, psi, FREE, samples=200_000, seed=11)
    assert se > 0
    assert abs(tau - est) < 3 * se


def test_quadrature_convergence_under_node_doubling():
    rng = np.random.default_rng(21)
    for d in (1, 2, 3):
        phi = on_shell(rng.normal(0, 0.5, d + 1), rng.normal(0, 0.5, d), np.full(d + 1, 0.3))
        psi = on_shell(rng.normal(0, 0.5, d + 1), rng.normal(0, 0.5, d), np.full(d + 1, 0.3))
        base = ShellQuadrature()
        doubled = ShellQuadrature(nodes_per_axis=2 * base.min_nodes(d), node_scale=2.0)
        a = transition_amplitude(phi, psi, FREE, base)
        b = transition_amplitude(phi, psi, FREE, doubled)
        assert abs(a - b) < 1e-8 * abs(b)


def test_probability_identity_and_symmetry():
    rng = np.random.default_rng(5)
    for d in (1, 2, 3):
        psi = on_shell(rng.normal(size=d + 1), rng.normal(0, 0.5, d), np.full(d + 1, 0.3))
        phi = on_shell(rng.normal(0, 0.3, d + 1), rng.normal(0, 0.5, d), np.full(d + 1, 0.35))
        assert abs(transition_probability(psi, psi, FREE) - 1.0) < 1e-14
        p1 = transition_probability(phi, psi, FREE)
        p2 = transition_probability(psi, phi, FREE)
        assert 0 <= p1 <= 1
        assert abs(p1 - p2) < 1e-12


def test_free_no_conversion_between_energy_signs():
    psi = on_shell([0, 0], [0.3], [0.3, 0.3])
    phi = on_shell([0.5, 0.2], [0.3], [0.3, 0.3], sign=-1)
    assert transition_amplitude(energy_sign_project(phi, -1), energy_sign_project(psi, 1), FREE) == 0
    # unprojected packets only overlap through Gaussian tails across the 2E gap
    narrow_psi = on_shell([0, 0], [0.3], [0.15, 0.15])
    narrow_phi = on_shell([0.5, 0.2], [0.3], [0.15, 0.15], sign=-1)
    assert transition_probability(narrow_phi, narrow_psi, FREE) < 1e-12


def test_physically_allowed():
    good = on_shell([0, 0, 0, 0], [0.2, 0.1, 0.0], [0.1, 0.1, 0.1, 0.1])
    assert is_physically_allowed(good, FREE)
    far = GaussianEventPacket.from_widths([0, 0], [10.0, 0.0], [0.05, 0.05])
    assert not is_physically_allowed(far, FREE)
    assert is_physically_allowed(far, FREE, threshold=0.0)
    # the closest shell point to (10, 0) is (5, sqrt 24) at Euclidean distance 7
    log_tau = log_self_amplitude(far, FREE)
    assert abs(log_tau / (-49.0 / (2 * 0.05**2)) - 1.0) < 1e-2
    with pytest.raises(PhysicallyDisallowed):
        transition_probability(good.replace(center_x=[0, 0, 0, 0], center_p=[10, 0, 0, 0]), good, FREE)


def test_sesquilinearity():
    phi = on_shell([0.2, 0.1], [0.3], [0.3, 0.3])
    psi = on_shell([0.0, 0.0], [0.2], [0.3, 0.3])
    a, b = 0.3 - 1.2j, -0.7 + 0.4j
    base = transition_amplitude(phi, psi, FREE)
    scaled = transition_amplitude(phi.scaled(a), psi.scaled(b), FREE)
    assert abs(scaled - np.conj(a) * b * base) < 1e-13 * abs(scaled)


def test_pair_creation_possible_in_strong_potential():
    G = Propagator(1.0, [3.0, 0.0], shell_selector="both")
    p = math.sqrt(8) + 0.02
    e_low = 3.0 - math.sqrt(p * p + 1)
    psi = GaussianEventPacket.from_widths([0, 0], [e_low, p], [0.3, 0.3])
    phi = GaussianEventPacket.from_widths([0.5, 0.3], [3.0 - math.sqrt((p - 0.05) ** 2 + 1), p - 0.05], [0.3, 0.3])
    assert psi.center_p[0] < 0 < phi.center_p[0]
    assert transition_probability(phi, psi, G) > 1e-3


def test_orbit_satisfies_wave_equation():
    psi = on_shell([0, 0], [0.75], [0.3, 0.3])
    h = np.array([0.05, 0.05])
    for G in (FREE, Propagator(1.0, [0.4, -0.3])):
        residuals = []
        for scale in (1.0, 0.5):
            hh = h * scale
            axes = [np.arange(-3, 4) * hh[0], np.arange(-3, 4) * hh[1]]
            pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1)
            vals = evaluate_orbit(psi, G, pts).reshape(7, 7)
            res = orbit_wave_residual(vals, hh, 1.0, G.potential(2))
            residuals.append(np.max(np.abs(res)) / np.max(np.abs(vals)))
        order = math.log(residuals[0] / residuals[1], 2)
        assert residuals[1] < 1e-3
        assert 1.8 < order < 2.2


def test_orbit_charge_conjugation_kernel_symmetry():
    psi = on_shell([0.2, 0.1, -0.1], [0.4, 0.2], [0.3, 0.3, 0.3], amp=0.7 + 0.2j)
    G = Propagator(1.0, [0.6, 0.2, -0.1])
    pts = np.array([[0.0, 0.0, 0.0], [0.7, 0.3, -0.2], [1.5, -0.4, 0.8]])
    direct = evaluate_orbit(psi, G, pts)
    reversed_role = np.conj(evaluate_orbit(psi.conjugate(), G.charge_conjugate(), pts))
    np.testing.assert_allclose(direct, reversed_role, rtol=1e-10, atol=0)


def test_amplitude_charge_conjugation():
    G = Propagator(1.0, [0.6, 0.2])
    phi = on_shell([0.4, 0.3], [0.3], [0.3, 0.3], amp=0.5j)
    psi = on_shell([0.0, 0.0], [0.5], [0.35, 0.3])
    a = transition_amplitude(phi, psi, G)
    b = transition_amplitude(psi.conjugate(), phi.conjugate(), G.charge_conjugate())
    assert abs(a - b) < 1e-12 * abs(a)


def test_orbit_decays_far_outside_lightcone():
    psi = on_shell([0, 0], [0.3], [0.3, 0.3])
    sx = psi.widths_x[1]
    peak = abs(evaluate_orbit(psi, FREE, [[0.0, 0.0]])[0])
    far = abs(evaluate_orbit(psi, FREE, [[0.0, 50 * sx * 2]])[0])
    assert far < 1e-8 * peak
