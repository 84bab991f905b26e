"""Angular fluorescence of the two potassium excited manifolds.

A linearly polarized pulse fills the excited Zeeman sublevels unevenly.
The J=1/2 level still radiates isotropically, while the J=3/2 level
favours emission perpendicular to the polarization. This asymmetry is
what makes the single-atom D2 anisotropy differ from one.
"""

import numpy as np

from dipolar_mqc.atoms import emission_pattern, linear_excitation_populations, potassium39

k39 = potassium39()
theta = np.radians([0, 30, 60, 90])
for mf in (1, 2):
    pops = linear_excitation_populations(k39, mf)
    i_pi, i_sigma, i_tot = emission_pattern(k39, mf, pops)(theta)
    name = k39.excited[mf - 1].name
    print(f"{name}: sublevel populations {np.round(pops, 4)}")
    for t, v in zip(np.degrees(theta), i_tot):
        print(f"   theta={t:4.0f} deg  I={v:.5f}")
    print(f"   ratio I(90)/I(0) = {i_tot[-1] / i_tot[0]:.3f}")
