# %% [markdown]
# The fast builder keeps per-leaf sorted coordinate lists, a cover-count
# segment tree for the union of open-leaf extents, and a weighted segment tree
# for D_p interval sampling. Its running time grows close to linearly in k.

# %%
import time

import numpy as np

from xcluster import rng_stream
from xcluster.fast_structures import build_fast

build_fast(rng_stream(0).random((64, 10)), 1.0, rng_stream(0))  # compile once

# %%
sizes = [2 ** e for e in range(10, 15)]
for variant in ("uniform", "modified", "lp"):
    times = []
    for k in sizes:
        C = rng_stream(k).random((k, 10))
        t0 = time.perf_counter()
        build_fast(C, 2.0, rng_stream(1), variant)
        times.append(time.perf_counter() - t0)
    slope = np.polyfit(np.log(sizes), np.log(times), 1)[0]
    print(f"{variant:>9}: " + "  ".join(f"k={k}: {t:.2f}s" for k, t in zip(sizes, times))
          + f"   exponent {slope:.2f}")
