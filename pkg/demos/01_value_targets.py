"""Walk through off-policy corrected value targets on a tiny segment.

Two things are shown here.  First, a worked example small enough to check
by hand: three bootstrap values, two rewards, and two importance ratios
produce a corrected target and policy-gradient advantage whose exact
decimal values we can predict.  Second, the on-policy sanity check: when
the behaviour and target policies agree (all ratios are 1), the corrected
targets collapse to ordinary n-step returns.
"""

import numpy as np

from rlforge.vtrace import VTraceConfig, compute_vtrace

# ----------------------------------------------------------------------
# Part 1: a worked example.
#
# Segment of length 2 with a bootstrap value at the end.  The second
# ratio is clipped at rho_bar = 1, the first is clipped from 2.0 down
# to 1.0 as well, so both temporal-difference terms enter at weight 1
# while the trace coefficient c_0 also clips to 1.

values = np.array([1.0, 0.5, 0.0])
rewards = np.array([1.0, 2.0])
ratios = np.array([2.0, 0.5])
cfg = VTraceConfig(rho_bar=1.0, c_bar=1.0, gamma=0.9)

res = compute_vtrace(values, rewards, ratios, cfg)
print("corrected targets   ", res.targets)
print("pg advantages       ", res.pg_advantages)

# By hand: delta_1 = 0.5 * (2.0 + 0.9*0.0 - 0.5) = 0.75, so v_1 = 1.25.
# delta_0 = 1.0 * (1.0 + 0.9*0.5 - 1.0) = 0.45, and the trace carries
# gamma * c_0 * (v_1 - V(s_1)) = 0.9 * 1.0 * 0.75 = 0.675 back, giving
# v_0 = 1.0 + 0.45 + 0.675 = 2.125.  The advantage at t=0 bootstraps
# through v_1: 1.0 + 0.9 * 1.25 - 1.0 = 1.125.
assert res.targets[0] == 2.125
assert res.pg_advantages[0] == 1.125
print("hand-worked values match exactly")

# ----------------------------------------------------------------------
# Part 2: the on-policy reduction.
#
# With every ratio equal to 1 nothing is clipped and nothing is traced
# away, so target t must equal the discounted n-step return from t.

rng = np.random.default_rng(7)
n = 8
values = rng.normal(size=n + 1)
rewards = rng.normal(size=n)
ones = np.ones(n)

res = compute_vtrace(values, rewards, ones, VTraceConfig(1.0, 1.0, 0.95))

expected = np.empty(n + 1)
expected[n] = values[n]
for t in reversed(range(n)):
    expected[t] = rewards[t] + 0.95 * expected[t + 1]

gap = np.max(np.abs(res.targets - expected))
print(f"on-policy reduction: max gap to n-step returns = {gap:.3e}")
assert gap < 1e-12
