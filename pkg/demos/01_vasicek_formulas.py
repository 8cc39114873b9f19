"""
Conditional PDs and the worst-case default rate
===============================================

A portfolio with a long-run PD of 2% and asset correlation 15% behaves very
differently in a recession (f = -2) and a boom (f = +2).
"""

import numpy as np

from ttcpd import CORPORATE, RETAIL, basel_rho, pit_pd, wcdr

p, rho = 0.02, 0.15
for f in (-2.0, -1.0, 0.0, 1.0, 2.0):
    print(f"f = {f:+.1f}   PIT PD = {pit_pd(p, rho, f):.4%}")

# the regulatory 99.9% worst case is the PIT PD in the 1-in-1000 bad year
print(f"\nWCDR(99.9%) = {wcdr(p, rho):.4%}")

# Basel ties the correlation to the PD itself
pds = np.array([0.001, 0.005, 0.02, 0.05, 0.1, 0.2])
print("\n   PD     rho corporate   rho retail")
for pd_, rc, rr in zip(pds, basel_rho(pds, CORPORATE), basel_rho(pds, RETAIL)):
    print(f"{pd_:6.3f}   {rc:13.5f}   {rr:10.5f}")
