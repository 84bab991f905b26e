"""How two delta pulses label density-matrix components.

Each component of the pulsed state carries integer harmonics of the two
pulse phases. After the detection window only components whose position
phases cancel survive the average over atom positions; they are grouped
by their net last-pulse harmonic, which fixes the peak they feed.
"""

from collections import Counter

from dipolar_mqc.atoms import potassium39
from dipolar_mqc.engine import EngineConfig, class_states, peak_name, propagate_pulses

cfg = EngineConfig(potassium39(), n_atoms=2, area=0.3, driven_atoms=(0, 1))
state = propagate_pulses(cfg)
print(f"tagged components per atom: {[len(a) for a in state.atoms]}")
classes = class_states(state)
count = Counter()
for key, terms in classes.items():
    count[(key.kappa, peak_name(key.coeffs))] += len(terms)
for (kappa, name), n in sorted(count.items()):
    print(f"kappa={kappa}  peak {name:<5s} {n:4d} product terms")
