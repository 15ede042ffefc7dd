# %% [markdown]
# # Imitating a PD controller
#
# A small model learns the action of a PD controller driving a mass-spring
# system toward a moving reference. The run is short; raise ``EPOCHS`` to 50
# and ``D_H`` to 128 for the full configuration.

# %%
import numpy as np

from fcnet import data, model, training

EPOCHS, D_H, COUNT = 6, 32, 200

trajs = data.masspring_dataset(COUNT, 64, seed=0)
tr, va = data.split_train_val(trajs)
stats = data.fit_norm(tr)
train_b = data.windows_to_batch(data.window_dataset(tr, 64, stats=stats))
val_b = data.windows_to_batch(data.window_dataset(va, 64, stats=stats))
print(len(train_b), "train windows,", len(val_b), "validation windows")

# %%
mc = model.FcnetConfig(d_s=3, d_a=1, d_h=D_H, layers=2)
res = training.train(train_b, training.TrainConfig(epochs=EPOCHS, batch_size=32), mc, val_b)
for row in res.history:
    print(f"epoch {row['epoch']:2d}  train {row['train_loss']:.3e}  val {row['val_loss']:.3e}")

# %% roll the trained policy forward one step at a time
s = model.new_stream(res.params)
states = val_b.states[0]
pred = np.stack([model.forward_step(row, res.params, s) for row in states])
err = np.abs(pred - model.forward_parallel(states, res.params)).max()
print(f"streaming vs parallel on a validation window: {err:.2e}")
