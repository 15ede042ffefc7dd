# %% [markdown]
# # One layer, three ways to run it
#
# A CSC layer can be evaluated by re-transforming each window (direct), as a
# long convolution over the whole sequence (parallel, used for training), or
# one step at a time with a sliding DFT (streaming, used for control).
# They agree to rounding error.

# %%
import time

import numpy as np

from fcnet import csc, model

rng = np.random.default_rng(0)
cfg = csc.CscConfig(n=16, m=5, d=8)
w = csc.init_weights(cfg, rng)
x = rng.standard_normal((48, 8))

# %%
direct = csc.forward_direct(x, w, cfg)
par = csc.forward_parallel(x, w, cfg)
fused = csc.forward_parallel(x, w, cfg, fused=True)
state = csc.new_cache(cfg)
stream = np.stack([csc.forward_step(row, w, state, cfg) for row in x])
for name, y in [("parallel", par), ("fused", fused), ("streaming", stream)]:
    print(f"{name:>9} vs direct: {np.abs(y - direct).max():.2e}")

# %% the whole stack behaves the same way
mc = model.FcnetConfig(d_s=3, d_a=1, d_h=32, layers=3, n=16, m=5)
p = model.init_params(mc, 0)
xs = rng.standard_normal((40, 3))
s = model.new_stream(p)
steps = np.stack([model.forward_step(row, p, s) for row in xs])
print(f"stack parallel vs streaming: {np.abs(model.forward_parallel(xs, p) - steps).max():.2e}")

# %% the layer is a causal FIR filter of length n
g = csc.time_kernel(w, cfg)
print("kernel taps (shared by every channel):", g.shape[0])

# %% streaming cost does not depend on how much history has passed
state = csc.new_cache(cfg)
t0 = time.perf_counter()
for row in rng.standard_normal((2000, 8)):
    csc.forward_step(row, w, state, cfg)
print(f"{(time.perf_counter() - t0) / 2000 * 1e6:.1f} us per step")
