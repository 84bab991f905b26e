import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from dipolar_mqc.kernel import (
    PairGeometry,
    SYM_INDEX,
    coupling_phase,
    coupling_tensor,
    envelope_tensor,
    green_tensor,
    orientation_moments,
    pair_orientation_average,
    sphere_quadrature,
    to_symmetric,
)

GAMMA = 1 / 26.37e-9


def unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


vec3 = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1).map(unit)


def reference_full(u, n, gamma):
    # textbook retarded dipole field propagator, written out independently
    nn = np.outer(n, n)
    return 0.75 * gamma * np.exp(1j * u) * (
        (np.eye(3) - nn) / u + (np.eye(3) - 3 * nn) * (1j / u**2 - 1 / u**3))


@given(st.floats(0.05, 500), vec3)
def test_full_tensor_matches_reference(u, n):
    T = green_tensor(PairGeometry(u, tuple(n), 1.0), GAMMA, "full").matrix
    ref = reference_full(u, n, GAMMA)
    assert np.allclose(T, ref, rtol=1e-12, atol=1e-13 * np.abs(ref).max())


@given(st.floats(0.05, 500), vec3)
def test_mode_pieces(u, n):
    g = PairGeometry(u, tuple(n), 1.0)
    nn = np.outer(n, n)
    near = green_tensor(g, GAMMA, "near").matrix
    far = green_tensor(g, GAMMA, "far").matrix
    stat = green_tensor(g, GAMMA, "near", electrostatic=True).matrix
    def close(a, b):
        return np.allclose(a, b, rtol=1e-12, atol=1e-13 * np.abs(b).max())

    assert close(stat, -0.75 * GAMMA * (np.eye(3) - 3 * nn) / u**3)
    assert close(near, np.exp(1j * u) * stat)
    assert close(far, 0.75 * GAMMA * np.exp(1j * u) * (np.eye(3) - nn) / u)
    assert not green_tensor(g, GAMMA, "off").matrix.any()
    full = green_tensor(g, GAMMA, "full").matrix
    assert np.array_equal(full, full.T)


def test_coincident_limit_gives_single_atom_rate():
    # Im T -> (gamma / 2) I as the separation vanishes
    T = green_tensor(PairGeometry(1e-3, (0.0, 0.6, 0.8), 1.0), 2.0, "full").matrix
    assert np.allclose(T.imag, np.eye(3), atol=1e-5)


def test_convention_factor():
    g = PairGeometry(1e-3, (0.0, 0.6, 0.8), 1.0)
    T = coupling_tensor(g, 2.0, "full")
    # lindblad: real part is half the collective decay rate, -> gamma/2
    assert np.allclose(T.real, np.eye(3), atol=1e-5)
    assert np.array_equal(coupling_tensor(g, 2.0, "full", convention="as_printed"),
                          green_tensor(g, 2.0, "full").matrix)
    with pytest.raises(ValueError):
        coupling_phase("other")


@given(st.floats(0.5, 100), vec3)
def test_envelope_strips_phase(u, n):
    g = PairGeometry(u, tuple(n), 1.0)
    T = green_tensor(g, GAMMA, "full").matrix
    assert np.allclose(envelope_tensor(g, GAMMA, "full") * np.exp(1j * u), T, rtol=1e-12)
    stat = green_tensor(g, GAMMA, "near", True).matrix
    assert np.array_equal(envelope_tensor(g, GAMMA, "near", True), stat)


def test_geometry_validation():
    with pytest.raises(ValueError):
        PairGeometry(1.0, (1.0, 1.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        PairGeometry(0.0, (1.0, 0.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        green_tensor(PairGeometry(1.0, (1.0, 0.0, 0.0), 1.0), 1.0, "sideways")
    with pytest.raises(ValueError):
        sphere_quadrature(4, 32)


def _double_factorial(k):
    return math.prod(range(k, 0, -2)) if k > 0 else 1


@given(st.integers(0, 8), st.integers(0, 8), st.integers(0, 8))
def test_quadrature_exact_on_monomials(a, b, c):
    if a + b + c > 8:
        return
    q = sphere_quadrature(5, 9)
    x, y, z = q.nodes.T
    got = q.average(x**a * y**b * z**c)
    if a % 2 or b % 2 or c % 2:
        ref = 0.0
    else:
        ref = (_double_factorial(a - 1) * _double_factorial(b - 1) * _double_factorial(c - 1)
               / _double_factorial(a + b + c + 1))
    assert got == pytest.approx(ref, abs=1e-14)


def test_pair_average_of_projector():
    avg = pair_orientation_average(lambda n: np.outer(n, n))
    assert np.allclose(avg, np.eye(3) / 3, atol=1e-15)


def test_to_symmetric_order():
    M = np.arange(9.0).reshape(3, 3)
    assert list(to_symmetric(M)) == [M[k, l] for k, l in SYM_INDEX]


@pytest.mark.parametrize("mode,stat", [("full", False), ("near", True), ("near", False)])
def test_moments_against_adaptive_quadrature(mode, stat):
    u = 7.0
    mom = orientation_moments(u, GAMMA, mode, stat)

    def channel(theta, phi, s, t, conj_t):
        n = (math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta))
        m = to_symmetric(envelope_tensor(PairGeometry(u, n, 1.0), GAMMA, mode, stat))
        g = np.conj(m[t]) if conj_t else m[t]
        return m[s] * g * math.sin(theta) / (4 * math.pi)

    for key, conj_t, (s, t) in (("mm", False, (0, 0)), ("mc", True, (0, 3)), ("mm", False, (3, 3)),
                                ("mc", True, (2, 2))):
        re = integrate.dblquad(lambda th, ph: channel(th, ph, s, t, conj_t).real, 0, 2 * math.pi, 0, math.pi,
                               epsabs=1e-14 * GAMMA**2 / u**6, epsrel=1e-11)[0]
        im = integrate.dblquad(lambda th, ph: channel(th, ph, s, t, conj_t).imag, 0, 2 * math.pi, 0, math.pi,
                               epsabs=1e-14 * GAMMA**2 / u**6, epsrel=1e-11)[0]
        ref = re + 1j * im
        assert abs(mom[key][s, t] - ref) <= 1e-9 * max(abs(ref), np.abs(mom[key]).max())


def test_moment_symmetries():
    mom = orientation_moments(5.0, GAMMA, "full")
    scale = np.abs(mom["mm"]).max()
    assert np.allclose(mom["cc"], mom["mm"].conj(), atol=1e-13 * scale)
    assert np.allclose(mom["cm"], mom["mc"].T, atol=1e-13 * scale)
    assert np.allclose(mom["mc"], mom["mc"].conj().T, atol=1e-13 * scale)


def test_far_field_trace_moment():
    """<Tr(M M^dagger)> of the transverse term is 2 (3 gamma / 4)^2 / u^2."""
    u = 1e3
    mom = orientation_moments(u, GAMMA, "far")
    # channels 3..5 are off-diagonal and appear twice in the trace
    tr = sum(mom["mc"][s, s] for s in range(3)) + 2 * sum(mom["mc"][s, s] for s in range(3, 6))
    assert tr.real == pytest.approx(2 * (0.75 * GAMMA) ** 2 / u**2, rel=1e-12)


def test_rotational_covariance():
    from scipy.spatial.transform import Rotation

    R = Rotation.random(random_state=3).as_matrix()
    n = np.array([0.36, 0.48, 0.8])
    T = green_tensor(PairGeometry(3.0, tuple(n), 1.0), GAMMA, "full").matrix
    TR = green_tensor(PairGeometry(3.0, tuple(R @ n), 1.0), GAMMA, "full").matrix
    assert np.allclose(TR, R @ T @ R.T, rtol=1e-10, atol=1e-12 * np.abs(T).max())
