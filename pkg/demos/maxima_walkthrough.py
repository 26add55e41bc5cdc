"""Learn a product distribution, then watch the maxima engine settle in.

Run: python3 demos/maxima_walkthrough.py
"""

import math

from selfimproving.bench import baseline_maxima
from selfimproving.certificates import verify_maxima_certificate
from selfimproving.distributions import make_family
from selfimproving.maxima import learn_maxima_structures, run_maxima

n = 1024
d = make_family("maxima_easy", n, seed=3)
print(f"distribution: maxima_easy with {n} independent point sources")

# Learning: a few instances give the slab boundaries, more give one search
# tree per index, shaped by how often that index lands in each slab.
st = learn_maxima_structures(d)
print(f"learned {st.slabs.leaf_count} leaf slabs and {len(st.trees)} trees")

for k in range(5):
    pts = d.sample(2**40 + k)
    cert, m = run_maxima(pts, st)
    assert verify_maxima_certificate(pts, cert) is None
    _, base = baseline_maxima(pts)
    print(f"instance {k}: {len(cert.maximal_indices):3d} maxima, "
          f"{m.rounds / n:.2f} rounds per point, {m.comparisons / n:.2f} comparisons per point, "
          f"sort-and-sweep {base / (n * math.log2(n)):.2f} x n log n")

# Points that get dominated early stop searching; the histogram shows how
# many tree steps each point needed.
print("steps per point:", dict(sorted(m.per_point_steps.items())))
