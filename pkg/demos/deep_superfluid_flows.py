"""Information flows deep in the superfluid.

Evaluates N-, N+ and R on the recurrence-free window of an Ls = 128 lattice
for 2dJ/U in [1, 4] at mu/U = 0.8. Both flows fall off as (J/U)^-1 while
their ratio stays fixed. Takes about five minutes on one core.

Run: python3 demos/deep_superfluid_flows.py
"""
import math

import numpy as np

from bhdephasing.correlators import compute_rates, compute_weights, time_grid
from bhdephasing.excitations import compute_spectrum
from bhdephasing.model import BathParams, adequate_n_max, solve_ground_state
from bhdephasing.open_system import blp_measures, loschmidt_echo

hops = (1.0, 1.5, 2.0, 3.0, 4.0)
params = [adequate_n_max(BathParams.from_hopping(x, 0.8, Ls=128)) for x in hops]
spectra = [compute_spectrum(solve_ground_state(p)) for p in params]
t_end = min(sp.recurrence_time() for sp in spectra)
t = time_grid(math.floor(t_end / 0.01) * 0.01)
print(f"recurrence-free window: t <= {t[-1]:.2f}")
flows = []
for x, p, sp in zip(hops, params, spectra):
    series = compute_rates(compute_weights(sp), t)
    rep = blp_measures(t, series.gamma, loschmidt_echo(series.Gamma, p.g), p.g)
    flows.append((rep.N_minus, rep.N_plus))
    print(f"2dJ/U = {x:<4} n_max = {p.n_max:<3} N- = {rep.N_minus:.4e}  N+ = {rep.N_plus:.4e}  "
          f"R = {rep.R:.4f}")
J = np.array(hops) / 4
Nm, Np = np.array(flows).T
print(f"exponents: N- {np.polyfit(np.log(J), np.log(Nm), 1)[0]:.3f}, "
      f"N+ {np.polyfit(np.log(J), np.log(Np), 1)[0]:.3f}")
