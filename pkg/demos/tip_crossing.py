"""Scan across the O(2) transition at the tip of the first Mott lobe.

At mu/U = sqrt(2) - 1 the density stays close to one and the rate keeps
oscillating through the transition: R stays near 0.5 on both sides and
lambda passes smoothly through a maximum instead of kinking.

Run: python3 demos/tip_crossing.py [output_dir]
"""
import sys

import numpy as np

from bhdephasing.model import mott_boundary
from bhdephasing.scan import ScanConfig, run_scan

mu = np.sqrt(2) - 1
jc = mott_boundary(mu)
hops = tuple(jc + np.array([-3e-2, -1e-2, -1e-4, 1e-4, 1e-2, 3e-2]))
out = sys.argv[1] if len(sys.argv) > 1 else "runs/demo-tip"
records, _ = run_scan(ScanConfig("tip-path", hops, Ls=64, output=out), log=print)
print(f"\n2dJ_c/U = {jc:.6f}")
for r in records:
    print(f"2dJ/U = {r.two_d_J:.5f}  psi = {r.psi:.4f}  n0 = {r.density:.4f}  "
          f"lambda = {r.lam:.4e}  R = {r.R:.4f}")
