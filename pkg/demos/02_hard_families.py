# %% [markdown]
# Hard instances. The linear-function family puts k = m centers at equal
# pairwise distance in m(m-1) dimensions, with 2d points per center at unit
# distance; any threshold tree pays a factor that grows with k. The
# min-cut-fooling family adds k tail dimensions and duplicated points so that
# a greedy fewest-mistakes tree keeps taking tail cuts.

# %%
import numpy as np

from xcluster import rng_stream
from xcluster.builders import build_imm_min_cut, build_lp, build_uniform
from xcluster.core import cost_of_tree
from xcluster.instances import gen_adversarial, gen_lower_bound
from xcluster.oracle import delta_p

# %%
print("lower-bound family, p = 2, lp builder, 100 seeds")
for m in (3, 5, 7, 11):
    inst = gen_lower_bound(m)
    ratios = [cost_of_tree(inst.points, build_lp(inst.centers, 2.0, rng_stream(s))[0], inst.centers, 2)
              .ratio_to_reference for s in range(100)]
    print(f"  m={m:>2} k={inst.k:>2} d={inst.d:>3} delta={delta_p(m, 2):8.3f} "
          f"median ratio {np.median(ratios):6.3f}")

# %%
print("min-cut-fooling family, p = 1")
for m in (3, 5, 7, 11):
    inst = gen_adversarial(m)
    X, C, opt = inst.points, inst.centers, inst.meta["opt_cost"]
    imm = build_imm_min_cut(X, C)
    uni = [cost_of_tree(X, build_uniform(C, rng_stream(s))[0], C, 1).cost / opt for s in range(100)]
    tail = sum(1 for n in imm.internal_nodes() if n.dim >= inst.d - inst.k)
    print(f"  m={m:>2}  imm/OPT {cost_of_tree(X, imm, C, 1).cost / opt:6.3f} (depth {imm.depth()}, "
          f"{tail} tail cuts)   median uniform/OPT {np.median(uni):6.3f}")

# %% [markdown]
# The greedy ratio rises with m, but at these sizes it is still close to the
# uniform builder's; the gap is an asymptotic statement.
