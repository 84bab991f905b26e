import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dipolar_mqc.engine import ClassifiedTerm
from dipolar_mqc.spectra import (
    PeakTerm,
    SpectrumConfig,
    anisotropy,
    default_grid,
    demodulate_select,
    doppler_average,
    dumps,
    faddeeva,
    fwhm,
    lorentzian,
    order_weight,
    rescale_and_assemble,
    summary_dict,
    write_csv,
)

mp.mp.dps = 40
W1, W2 = 2 * np.pi * 389.3e12, 2 * np.pi * 391.0e12
GAM = 1 / 26.37e-9
DELTA = 2 * np.pi * 326.9e6


def w_reference(z):
    z = mp.mpc(z.real, z.imag)
    return complex(mp.exp(-z * z) * mp.erfc(-1j * z))


@given(st.floats(0, 5), st.floats(-np.pi, np.pi))
def test_faddeeva_against_high_precision(r, phi):
    z = r * np.exp(1j * phi)
    ref = w_reference(z)
    assert abs(faddeeva(z) - ref) <= 1e-10 * abs(ref)


def test_faddeeva_special_values():
    assert faddeeva(0) == 1
    assert faddeeva(1j) == pytest.approx(math.e * math.erfc(1), rel=1e-14)
    assert faddeeva(1j).real == pytest.approx(0.4275835761558070, rel=1e-14)
    z = np.array([30 + 5j, -40 + 1j, 1e3j])
    assert np.allclose(faddeeva(z), 1j / (np.sqrt(np.pi) * z), rtol=1e-3)
    with pytest.raises(ValueError):
        faddeeva(np.inf)


def line(peak="D2", kappa=1, order=0, amp=1.0 + 0j, center=W2, gamma=GAM, nu=None):
    return PeakTerm(peak, kappa, order, amp, center, gamma, nu or kappa)


def test_vanishing_doppler_width_recovers_lorentzian():
    t = line()
    om = W2 + np.linspace(-20, 20, 41) * GAM
    prof = doppler_average(t, 1e-4 * GAM, "exact")(om)
    assert np.allclose(prof, lorentzian(t, om), rtol=1e-6)
    printed = doppler_average(t, 1e-4 * GAM)(om)
    assert np.allclose(printed, prof / 2, rtol=1e-14)


@given(st.floats(-5, 5))
def test_doppler_profile_is_gaussian_when_doppler_dominated(x):
    t = line(kappa=2, peak="2D2", center=2 * W2, gamma=1e-6 * DELTA)
    prof = doppler_average(t, DELTA, "exact")
    om = 2 * W2 + x * DELTA
    s = 2 * DELTA
    gauss = math.sqrt(math.pi / 2) / s * math.exp(-(om - 2 * W2) ** 2 / (2 * s * s))
    assert prof(om).real == pytest.approx(gauss, rel=1e-4, abs=1e-6 * gauss + 1e-30)


def test_doppler_profile_area_matches_lorentzian():
    # integrating over omega: Gaussian smearing conserves the line area
    t = line()
    om = np.linspace(W2 - 12 * DELTA, W2 + 12 * DELTA, 200001)
    area = np.trapezoid(doppler_average(t, DELTA, "exact")(om).real, om)
    assert area == pytest.approx(math.pi, rel=1e-3)


def test_two_quantum_lines_twice_as_wide():
    om = np.linspace(2 * W2 - 10 * DELTA, 2 * W2 + 10 * DELTA, 20001)
    o1 = np.linspace(W2 - 10 * DELTA, W2 + 10 * DELTA, 20001)
    p1 = doppler_average(line(), DELTA)(o1)
    p2 = doppler_average(line("2D2", 2, center=2 * W2), DELTA)(om)
    assert fwhm(om, p2, 2 * W2) / fwhm(o1, p1, W2) == pytest.approx(2.0, rel=0.01)
    # the absorptive part alone has the Gaussian width
    assert fwhm(o1, p1.real, W2) == pytest.approx(2 * math.sqrt(2 * math.log(2)) * DELTA, rel=0.01)


def test_fwhm_of_lorentzian():
    t = line(gamma=1.0, center=0.0)
    om = np.linspace(-50, 50, 100001)
    assert fwhm(om, lorentzian(t, om), 0.0) == pytest.approx(2 * math.sqrt(3), rel=1e-6)


def test_peak_term_validation():
    with pytest.raises(ValueError):
        line(gamma=0.0)
    with pytest.raises(ValueError):
        line(nu=3)
    with pytest.raises(ValueError):
        doppler_average(line(), 0.0)
    with pytest.raises(ValueError):
        doppler_average(line(), DELTA, "other")


@given(st.sampled_from([0, 2, 4]), st.floats(1, 1e12), st.floats(1e-4, 1e-1))
def test_order_weight(order, N, r):
    s = order // 2 + 1
    cfg = SpectrumConfig(N_det=N, r_bar=r, k0=8.18e4)
    assert order_weight(order, cfg) == pytest.approx(N ** s, rel=1e-12)
    bare = SpectrumConfig(N_det=N, r_bar=r, k0=8.18e4, distance_convention="bare")
    assert order_weight(order, bare) == pytest.approx(N ** s / (8.18e4 * r) ** order, rel=1e-12)
    with pytest.raises(ValueError):
        order_weight(1, cfg)


def synthetic_terms(scale_y=1.0):
    mk = lambda kappa, peak, order, amp, coeffs: ClassifiedTerm(  # noqa: E731
        kappa, peak, order, amp, GAM, float(np.dot(coeffs, (W1, W2))), kappa)
    return [
        mk(1, "D1", 0, 1e-11, (1, 0)), mk(1, "D2", 0, 2e-11 * scale_y, (0, 1)),
        mk(1, "D2", 2, 3e-22, (0, 1)),
        mk(2, "2D1", 2, 1e-21, (2, 0)), mk(2, "D1D2", 2, 2e-21, (1, 1)), mk(2, "2D2", 2, 4e-21, (0, 2)),
        mk(2, "2D1", 0, 0.0, (2, 0)),
    ]


def test_demodulate_select():
    sel = demodulate_select(synthetic_terms(), 2)
    assert {t.peak for t in sel} == {"2D1", "D1D2", "2D2"}
    assert all(t.nu == 2 for t in sel)
    with pytest.raises(ValueError):
        demodulate_select([], 3)


def test_four_pulse_equivalence_doubles_pure_two_quantum_peaks():
    def spec(flag):
        cfg = SpectrumConfig(kappa=2, four_pulse_equivalence=flag, delta_bar=DELTA)
        return rescale_and_assemble(synthetic_terms(), cfg)
    on, off = spec(True), spec(False)
    assert on.amplitude("2D2") / off.amplitude("2D2") == pytest.approx(2, rel=1e-3)
    assert on.peaks["2D1"]["amplitude_at_center"] / off.peaks["2D1"]["amplitude_at_center"] == pytest.approx(2, rel=1e-3)


@settings(max_examples=10)
@given(st.floats(0.1, 10), st.floats(1e-3, 1e3))
def test_anisotropy_invariant_under_common_scale(ratio, scale):
    grid = default_grid((W1, W2), 1, DELTA, 400)

    def spec(terms):
        cfg = SpectrumConfig(kappa=1, delta_bar=DELTA, grid=grid)
        return rescale_and_assemble(terms, cfg)
    x = spec(synthetic_terms())
    y = spec(synthetic_terms(ratio))
    ys = spec([ClassifiedTerm(t.kappa, t.peak, t.order, t.amplitude * scale, t.gamma_tau, t.center,
                              t.doppler_multiplier) for t in synthetic_terms(ratio)])
    xs = spec([ClassifiedTerm(t.kappa, t.peak, t.order, t.amplitude * scale, t.gamma_tau, t.center,
                              t.doppler_multiplier) for t in synthetic_terms()])
    assert anisotropy("D2", xs, ys) == pytest.approx(anisotropy("D2", x, y), rel=1e-9)
    assert anisotropy("D1", x, y, exact=True) == pytest.approx(1.0, rel=1e-12)
    assert anisotropy("D2", x, y, exact=True) == pytest.approx(
        (2e-11 * 1e9 * ratio + 3e-22 * 1e18) / (2e-11 * 1e9 + 3e-22 * 1e18), rel=1e-9)


def test_default_grid():
    g = default_grid((W1, W2), 2, DELTA, 101)
    assert g[0] == pytest.approx(2 * W1 - 20 * DELTA)
    assert g[-1] == pytest.approx(2 * W2 + 20 * DELTA)
    assert len(g) == 101


def test_spectrum_config_validation():
    with pytest.raises(ValueError):
        SpectrumConfig(kappa=3)
    with pytest.raises(ValueError):
        SpectrumConfig(distance_convention="odd")
    with pytest.raises(ValueError):
        SpectrumConfig(grid=np.array([2.0, 1.0]))


def test_outputs(tmp_path):
    cfg = SpectrumConfig(kappa=1, delta_bar=DELTA, n_grid=50)
    s = rescale_and_assemble(synthetic_terms(), cfg)
    p = tmp_path / "s.csv"
    write_csv(s, p, ["run a"])
    lines = p.read_text().splitlines()
    assert lines[0] == "# run a" and lines[1] == "omega_rad_s,re,im,abs" and len(lines) == 52
    doc = json.loads(dumps(summary_dict(s, {"D2": 1.5})))
    assert doc["peaks"]["D2"]["ratio_y_over_x"] == 1.5
    assert set(doc["peaks"]) == {"D1", "D2"}
