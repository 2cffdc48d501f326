# %% [markdown]
# # Reordering risk in a block
#
# A block of trades is sandwiched one by one. Shuffling the order changes
# each user's loss; the cost of feudalism compares the worst user's change
# with the average change, over random orders.

# %%
import numpy as np

from mevsim.cfmm_core import Cfmm
from mevsim.reorder import cof_estimate, cof_scaling_study, make_sequence, substream

pool = Cfmm.constant_product(10.0, 10.0)
dist = {"kind": "alternating", "low": 0.5, "high": 1.5, "eta": 0.05}
s = make_sequence(dist, 5, substream(1))
exact = cof_estimate(pool, s, 0, seed=0, exhaustive=True)
mc = cof_estimate(pool, s, 120, seed=3, replace=False)
print("all 120 orders:", exact.cof, "sampled without replacement:", mc.cof)

# %% [markdown]
# Growth with block size on a deep pool. A small K keeps this quick; the
# acceptance run uses K = 500 and n up to 256.

# %%
study = cof_scaling_study(pool, dist, [4, 8, 16, 32, 64], 100, seed=7, depth=1e4)
for n, c in zip(study.n_values, study.cof):
    print(f"n={n:3d}  cof={c:.4f}  cof/log2(n)={c / np.log2(n):.4f}")
print("spread", study.ratio_spread, "R2 log", study.log_r2, "R2 linear", study.lin_r2)
