"""Order-of-magnitude numbers for a warm potassium cell.

Shows why the spectra are Doppler broadened, why partners that share a
velocity class sit centimetres apart, and why collisions play no role
on the time scale of spontaneous decay.
"""

from dipolar_mqc.cli import estimate_table
from dipolar_mqc.config import load_config

rc = load_config(preset="tableII")
t = estimate_table(rc)
print(f"pulse area                : {t['pulse_area']:.3f} rad")
for v in t["velocity_classes"]:
    print(f"drift fraction {v['displacement_fraction']:<5g}      : n_vc = {v['n_vc_m3']:.3e} m^-3, "
          f"mean distance {v['r_bar_m'] * 100:.2f} cm")
d = t["doppler"]
print(f"Doppler width (rms/2pi)   : {d['rms_hz'] / 1e6:.0f} MHz, FWHM/2pi {d['fwhm_hz'] / 1e6:.0f} MHz")
c = t["collisions"]
for p in c["partners"]:
    print(f"K-{p['partner']:<3s} collisions      : {p['rate_hz']:.3f} Hz")
print(f"total                     : {c['total_rate_hz']:.2f} Hz, one every {c['collision_time_s'] * 1e3:.0f} ms")
print(f"natural lifetime          : {rc.species.tau_spont * 1e9:.2f} ns")
