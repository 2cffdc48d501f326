# %% [markdown]
# # Routing under sandwich attacks
#
# Two small networks. In the two-pool instance a constant product pool sits
# next to a deep constant sum pool. The square instance has square-root and
# linear legs, with an optional constant product shortcut in the middle.
# For each slippage limit we compare the best split with the split selfish
# users settle on.

# %%
import math

import numpy as np

from mevsim import cli
from mevsim.routing import Network, braess_graph, optimal_route, pigou_graph, selfish_route

net = Network(pigou_graph(), "A", "B")
opt = optimal_route(net, 1.0)
eq = selfish_route(net, 1.0)
print("optimal split", opt.alpha, "output", opt.total, "vs 4 - 2*sqrt(2) =", 4 - 2 * math.sqrt(2))
print("selfish split", eq.alpha, "output", eq.total)

# %% [markdown]
# Without an attacker everyone piles onto the constant product pool. Once
# trades get sandwiched, a looser limit means worse prices there, so flow
# moves to the constant sum pool and the gap to the optimum closes.

# %%
sc = cli.load_scenario(None, "pigou", grid="lin:0:0.9:10")
for r in cli.run_pigou_sweep(sc):
    print(f"eta={r['eta']:.1f}  PoA={r['poa']:.6f}  attacker PNL={r['pnl']:.6f}  eq share={r['eq_frac_cfmm1']:.3f}")

# %% [markdown]
# The square network. The shortcut makes selfish routing worse than having
# no shortcut at all, and attacks on the shortcut push users off it again.

# %%
plain = Network(braess_graph(middle=False), "A", "B")
print("no shortcut:", optimal_route(plain, 1.0).total, selfish_route(plain, 1.0).total)
sc = cli.load_scenario(None, "braess", grid="0,0.3,0.6,0.9")
rows, base = cli.run_braess_sweep(sc)
for r in rows:
    print(f"eta={r['eta']:.1f}  opt={r['opt_out']:.6f}  eq={r['eq_out']:.6f}  PoA={r['poa']:.6f}")
print("PoA decreasing:", bool(np.all(np.diff([r["poa"] for r in rows]) <= 1e-9)))
