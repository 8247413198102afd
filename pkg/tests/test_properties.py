"""Randomized invariants over packets, amplitudes, symmetries, units and fields."""

import math

import numpy as np
from hypothesis import given, strategies as st

from qevents.emfield import GridField, field_tensor
from qevents.massshell import Propagator, transition_amplitude, transition_probability
from qevents.packets import GaussianEventPacket, inner_product, observable_center_and_uncertainty
from qevents.poincare import apply, boost, parity, rotation, sample_grid, time_reversal, translation
from qevents.units import SI, Quantity, ROLES, convert_units

FREE = Propagator(1.0)
coord = st.floats(-2.0, 2.0, allow_nan=False)
width = st.floats(0.25, 1.5)
phase = st.complex_numbers(min_magnitude=0.1, max_magnitude=3.0, allow_nan=False, allow_infinity=False)


@st.composite
def packets(draw, D=None, shell=False, w_range=(0.25, 1.5)):
    D = D or draw(st.integers(2, 4))
    cx = [draw(coord) for _ in range(D)]
    w = [draw(st.floats(*w_range)) for _ in range(D)]
    amp = draw(phase)
    if shell:
        p = [draw(st.floats(-1.0, 1.0)) for _ in range(D - 1)]
        cp = [math.sqrt(sum(v * v for v in p) + 1.0)] + p
    else:
        cp = [draw(coord) for _ in range(D)]
    return GaussianEventPacket.from_widths(cx, cp, w, amp)


@st.composite
def packet_pairs(draw, shell=False, w_range=(0.25, 1.5)):
    D = draw(st.integers(2, 4))
    return draw(packets(D, shell, w_range)), draw(packets(D, shell, w_range))


@given(packet_pairs())
def test_inner_product_conjugate_symmetric(pair):
    a, b = pair
    ab, ba = inner_product(a, b), inner_product(b, a)
    assert abs(ab - np.conj(ba)) <= 1e-12 * max(abs(ab), 1e-300)


@given(packets())
def test_heisenberg_relation(psi):
    names = ["t", "E"] + [n for k in range(1, psi.dim) for n in (f"x{k}", f"p{k}")]
    for q, p in zip(names[::2], names[1::2]):
        _, dq = observable_center_and_uncertainty(psi, q)
        _, dp = observable_center_and_uncertainty(psi, p)
        assert dq * dp >= 0.5 - 1e-12
        assert abs(dq * dp - 0.5) < 1e-10  # axis-aligned minimal Gaussians saturate it


@given(st.sampled_from(ROLES), st.floats(-1e6, 1e6, allow_nan=False))
def test_unit_round_trip(role, value):
    q = Quantity(value, role, SI)
    back = convert_units(convert_units(q, "natural"), "si")
    assert back.units == SI
    assert abs(back.value - value) <= 1e-15 * abs(value)


@given(packet_pairs(shell=True, w_range=(0.25, 0.5)))
def test_cauchy_schwarz_and_probability_bounds(pair):
    phi, psi = pair
    tau = transition_amplitude(phi, psi, FREE)
    t_phi = transition_amplitude(phi, phi, FREE).real
    t_psi = transition_amplitude(psi, psi, FREE).real
    assert abs(tau) ** 2 <= t_phi * t_psi * (1 + 1e-10)
    P = transition_probability(phi, psi, FREE, threshold=0.0)
    assert 0.0 <= P <= 1.0


@given(packet_pairs(shell=True, w_range=(0.25, 0.5)), phase, phase)
def test_sesquilinearity(pair, a, b):
    phi, psi = pair
    base = transition_amplitude(phi, psi, FREE)
    scaled = transition_amplitude(phi.scaled(a), psi.scaled(b), FREE)
    assert abs(scaled - np.conj(a) * b * base) <= 1e-12 * abs(scaled) + 1e-300


def random_element(draw, d):
    kind = draw(st.sampled_from(["boost", "rotation", "translation"] if d in (2, 3) else ["boost", "translation"]))
    if kind == "boost":
        return boost([draw(st.floats(-0.8, 0.8)) for _ in range(d)])
    if kind == "translation":
        return translation([draw(coord) for _ in range(d + 1)])
    if d == 2:
        return rotation(draw(st.floats(-3.0, 3.0)))
    return rotation([draw(st.floats(-2.0, 2.0)) for _ in range(3)])


@st.composite
def elements_and_packet(draw):
    d = draw(st.integers(1, 3))
    psi = draw(packets(d + 1))
    return random_element(draw, d), random_element(draw, d), psi


@given(elements_and_packet())
def test_group_law_pointwise(data):
    g1, g2, psi = data
    pts = sample_grid(psi, n=3)
    lhs = apply(g1, apply(g2, psi)).momentum_amplitude(pts)
    rhs = apply(g1.compose(g2), psi).momentum_amplitude(pts)
    scale = np.max(np.abs(lhs)) + 1e-300
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * scale


@given(elements_and_packet(), st.data())
def test_unitarity(data, extra):
    g, _, psi = data
    phi = extra.draw(packets(psi.dim))
    before = inner_product(phi, psi)
    after = inner_product(apply(g, phi), apply(g, psi))
    assert abs(after - before) <= 1e-10 * math.sqrt(phi.norm_sq() * psi.norm_sq())


@given(packets())
def test_discrete_symmetries_square_to_identity(psi):
    d = psi.dim - 1
    pts = sample_grid(psi, n=3)
    ref = psi.momentum_amplitude(pts)
    for g in (parity(d), time_reversal(d)):
        twice = apply(g, apply(g, psi)).momentum_amplitude(pts)
        np.testing.assert_allclose(twice, ref, rtol=1e-12, atol=1e-14 * np.max(np.abs(ref)))


@given(packets(), st.lists(coord, min_size=4, max_size=4))
def test_translation_multiplies_by_plane_wave(psi, a):
    a = np.asarray(a[: psi.dim])
    pts = sample_grid(psi, n=3)
    moved = apply(translation(a), psi).momentum_amplitude(pts)
    dot = pts[:, 0] * a[0] - pts[:, 1:] @ a[1:]
    np.testing.assert_allclose(moved, np.exp(1j * dot) * psi.momentum_amplitude(pts), rtol=1e-11, atol=0)


@given(st.lists(st.floats(-1.0, 1.0), min_size=6, max_size=6))
def test_field_tensor_antisymmetric(c):
    def pot(t, x, y):
        return [c[0] * x * y + c[1] * np.sin(t), c[2] * t * y, c[3] * np.cos(x) + c[4] * t * t + c[5] * y]

    A = GridField.sample(pot, [0, 0, 0], [0.1, 0.1, 0.1], [6, 6, 6])
    F = field_tensor(A)
    for a in range(3):
        np.testing.assert_array_equal(F.component(a, a), 0)
        for b in range(3):
            np.testing.assert_array_equal(F.component(a, b), -F.component(b, a))
