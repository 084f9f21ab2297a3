"""Scan the commensurate-incommensurate edge of the first Mott lobe.

Crosses 2dJ/U_c at mu/U = 0.8 and prints lambda and the BLP ratio R per
point. R drops from about 0.8 in the Mott insulator to zero a few 1e-4
above the boundary, where the rate settles onto a Markovian plateau.
Further into the superfluid the Goldstone oscillations make gamma dip
below zero again and R grows back.

Run: python3 demos/edge_crossing.py [output_dir]
"""
import sys

import numpy as np

from bhdephasing.model import mott_boundary
from bhdephasing.plotting import emit_plots
from bhdephasing.scan import ScanConfig, run_scan

jc = mott_boundary(0.8)
offsets = np.array([-2e-2, -1e-3, -1e-4, 1e-4, 3e-4, 1e-3, 1e-2, 5e-2])
out = sys.argv[1] if len(sys.argv) > 1 else "runs/demo-edge"
cfg = ScanConfig("edge-path", tuple(jc + offsets), Ls=64, output=out)
records, index = run_scan(cfg, log=print)
print(f"\n2dJ_c/U = {jc:.6f}")
print(f"{'2dJ/U - 2dJ_c/U':>16} {'psi':>8} {'lambda':>10} {'R':>8} {'eta':>10}")
for off, r in zip(offsets, records):
    eta = f"{r.eta:.3e}" if r.eta is not None else "-"
    print(f"{off:>16.1e} {r.psi:>8.4f} {r.lam:>10.4e} {r.R:>8.4f} {eta:>10}")
for path in emit_plots(index.parent):
    print(path)
