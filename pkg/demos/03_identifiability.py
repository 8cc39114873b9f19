"""
When does a missing-data pattern pin down the model?
====================================================

Two portfolios seen in disjoint periods cannot be told apart: a lower PD in
the first period is indistinguishable from a worse economy. Overlapping
coverage fixes this.
"""

import numpy as np

from ttcpd import check_identifiability

disjoint = np.array([
    [1, 1, 1, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 1, 1, 1],
], dtype=bool)
print(check_identifiability(disjoint).summary())

print()
overlap = disjoint.copy()
overlap[1, 3] = True   # one shared year is enough
print(check_identifiability(overlap).summary())

# A year nobody observes leaves a common shift of the observed years free,
# even though the mean constraint still holds.
print()
gap = np.ones((3, 6), dtype=bool)
gap[:, 2] = False
print(check_identifiability(gap).summary())
