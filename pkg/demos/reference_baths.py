"""Reference baths with known power laws.

Tabulates gamma and Gamma for the free and weakly interacting Bose gases and
prints the fitted long-time exponents next to the expected ones.

Run: python3 demos/reference_baths.py [output_dir]
"""
import sys

from bhdephasing.scan import run_oracle_suite

out = sys.argv[1] if len(sys.argv) > 1 else "runs/demo-oracle"
for s in run_oracle_suite(out):
    fitted = (f"gamma {s['gamma_exponent']:.3f}, Gamma {s['Gamma_exponent']:.3f}"
              if s.get("gamma_exponent") is not None else "no power law on the window")
    print(f"{s['kind']:>30} d={s['d']:g}: expected {s['expected']}; fitted {fitted}")
