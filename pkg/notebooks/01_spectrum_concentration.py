# %% [markdown]
# # Where does the energy of a control signal live?
#
# Smooth physical trajectories put almost all of their energy into the
# lowest few DFT modes of a sliding window. This script measures that on
# generated data and contrasts it with white noise.

# %%
import numpy as np

from fcnet import data
from fcnet.profile import spectrum_report

rng = np.random.default_rng(0)

# %% a rotor under constant angular acceleration
rotor = data.gen_accel_rotor(0.0, 0.4, 1.2, 1024, 0.01)
rep = spectrum_report(rotor, channel=0, n=256)
print(f"rotor angle: lowest 10 of {len(rep.density_pct)} modes hold {rep.low_mode_coverage:.2f}%")

# %% PD tracking, every channel ([x, v, x_ref, u])
pd = data.masspring_dataset(10, 512, seed=1)
for ch, name in enumerate(["x", "v", "x_ref", "u"]):
    rep = spectrum_report(pd, channel=ch, n=256, stride=8)
    print(f"PD {name:>5}: {rep.low_mode_coverage:6.2f}%  peak mode {rep.peak_mode}")

# %% white noise spreads evenly
noise = data.Trajectory(rng.standard_normal((25600, 1)), np.zeros((25600, 0)), 0.01)
rep = spectrum_report(noise, n=256, stride=256)
print(f"noise: top-10 {rep.low_mode_coverage:.2f}%, largest single mode {rep.density_pct.max():.2f}%")

# %% cumulative curve for the rotor, first 12 modes
rep = spectrum_report(rotor, channel=0, n=256)
for k in range(12):
    bar = "#" * int(rep.density_pct[k] / 2)
    print(f"{k:2d} {rep.cumulative_pct[k]:7.3f}% {bar}")
