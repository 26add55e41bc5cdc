"""Upper hull in the limiting phase, with the certificate checked at the end.

Run: python3 demos/hull_walkthrough.py
"""

import math

from selfimproving.bench import baseline_hull
from selfimproving.certificates import verify_hull_certificate
from selfimproving.distributions import make_family
from selfimproving.geometry import upper_hull_monotone
from selfimproving.hull import learn_hull_structures, run_hull

n = 1024
d = make_family("bad_hull_easy", n, seed=3)
st = learn_hull_structures(d)
ch = st.hull
print(f"canonical hull: {len(ch.slopes)} lines, {ch.slabs.leaf_count} slabs")

for k in range(5):
    pts = d.sample(2**40 + k)
    cert, m = run_hull(pts, st)
    assert verify_hull_certificate(pts, cert) is None
    assert cert.extremal_indices == upper_hull_monotone(pts)
    _, base = baseline_hull(pts)
    print(f"instance {k}: {len(cert.extremal_indices):3d} hull vertices, "
          f"{m.rounds / n:.2f} rounds per point, fallback {m.extra['fallback_used']}, "
          f"location cases {m.extra['case_histogram']}, "
          f"monotone chain {base / (n * math.log2(n)):.2f} x n log n")
