import math

import pytest
from hypothesis import given, strategies as st
from scipy import constants as C
from scipy.special import gamma as gamma_fn

from dipolar_mqc.estimators import (
    VaporComponent,
    VaporComposition,
    collision_rate,
    doppler_rms,
    mean_distance,
    pulse_area,
    table_ii_composition,
    velocity_class_density,
    velocity_class_probability,
    velocity_spread,
)

AMU = C.physical_constants["atomic mass constant"][0]


@given(st.floats(1e6, 1e12), st.floats(1e-14, 1e-12))
def test_pulse_area_scaling(intensity, duration):
    a = pulse_area(intensity, duration, 2.46e-29)
    assert pulse_area(4 * intensity, duration, 2.46e-29) == pytest.approx(2 * a, rel=1e-12)
    assert pulse_area(intensity, 2 * duration, 2.46e-29) == pytest.approx(2 * a, rel=1e-12)


def test_pulse_area_value():
    # field amplitude and Gaussian time integral evaluated by hand
    E = math.sqrt(2 * 3.5e10 / (C.c * C.epsilon_0))
    ref = 2.46e-29 * E / C.hbar * 190e-15 * math.sqrt(math.pi / (2 * math.log(2)))
    assert pulse_area(3.5e10, 190e-15, 2.46e-29) == pytest.approx(ref, rel=1e-12)
    assert pulse_area(0.0, 190e-15, 2.46e-29) == 0.0
    with pytest.raises(ValueError):
        pulse_area(-1.0, 1e-13, 1e-29)


def test_velocity_spread():
    m = 39.0983 * AMU
    assert velocity_spread(295.15, m) == pytest.approx(math.sqrt(C.k * 295.15 / m), rel=1e-14)
    with pytest.raises(ValueError):
        velocity_spread(0, m)


@given(st.floats(1e-6, 1e-3))
def test_class_probability_small_window(dv):
    # erf(x) ~ 2 x / sqrt(pi) for small x
    v = 247.0
    assert velocity_class_probability(dv, v) == pytest.approx(2 * dv / (math.sqrt(2 * math.pi) * v), rel=1e-8)


@given(st.floats(1e-4, 0.02))
def test_class_density_cubic_in_window(f):
    n = velocity_class_density(5e14, 247.0, 767e-9, 26e-9, f)
    n2 = velocity_class_density(5e14, 247.0, 767e-9, 26e-9, f / 2)
    assert n / n2 == pytest.approx(8.0, rel=1e-3)


def test_class_density_validation():
    with pytest.raises(ValueError):
        velocity_class_density(5e14, 247.0, 767e-9, 26e-9, 1.5)
    with pytest.raises(ValueError):
        velocity_class_probability(1.0, 0.0)


@given(st.floats(1e10, 1e24))
def test_mean_distance_matches_poisson_nearest_neighbour(n):
    exact = gamma_fn(4 / 3) * (3 / (4 * math.pi * n)) ** (1 / 3)
    assert mean_distance(n) == pytest.approx(exact, rel=1e-3)


def test_single_partner_collision_rate():
    m = 40 * AMU
    comp = VaporComposition((VaporComponent("A", 1e20, 2e-10, m),), temperature=300.0)
    r = collision_rate(comp, "A")
    mu = m / 2
    ref = 1e20 * math.pi * (4e-10) ** 2 * math.sqrt(8 * C.k * 300 / (math.pi * mu))
    assert r.total == pytest.approx(ref, rel=1e-14)
    assert r.collision_time == pytest.approx(1 / ref)


@given(st.floats(0.1, 10))
def test_collision_rate_linear_in_density(s):
    comp = table_ii_composition()
    base = collision_rate(comp, "K").total
    scaled = VaporComposition(tuple(VaporComponent(c.name, c.density * s, c.radius, c.mass)
                                    for c in comp.components), comp.temperature)
    assert collision_rate(scaled, "K").total == pytest.approx(s * base, rel=1e-12)


def test_composition_errors():
    with pytest.raises(KeyError):
        table_ii_composition()["Na"]
    with pytest.raises(ValueError):
        VaporComponent("X", -1.0, 1e-10, 1e-26)
    zero = VaporComposition((VaporComponent("A", 0.0, 1e-10, 1e-26),))
    assert collision_rate(zero, "A").collision_time == math.inf


def test_doppler_width():
    w = doppler_rms(295.15, 39.0983 * AMU, 2 * math.pi / 767e-9)
    assert w.fwhm / w.rms == pytest.approx(2 * math.sqrt(2 * math.log(2)))
    with pytest.raises(ValueError):
        doppler_rms(295.15, 1e-26, 0.0)
