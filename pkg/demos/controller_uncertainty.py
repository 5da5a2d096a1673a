"""
What the controller's uncertainty measures
==========================================

The controller outputs Dirichlet evidence over {normal, anomalous}. Its
uncertainty is the mutual information of that Dirichlet, so it is large only
when the evidence is both balanced and scarce. Here we look at the raw
quantity first and then at a trained controller facing familiar and shifted
inputs.
"""

import numpy as np

from hyperdrift import RunConfig
from hyperdrift.iec import concept_uncertainty, evidence, expected_probability, train_iec
from hyperdrift.scd import train_scd

# balanced evidence: uncertainty falls as evidence accumulates
for a in (0.01, 0.5, 1.0, 5.0, 100.0):
    print(f"alpha=({a}, {a}): uncertainty {concept_uncertainty(np.array([a, a])):.4f}")

# confident evidence stays certain however little of it there is
print(f"alpha=(50, 0.01): uncertainty {concept_uncertainty(np.array([50.0, 0.01])):.4f}")
print(f"upper bound ln 2 = {np.log(2):.4f}")

# train on one cluster
rng = np.random.default_rng(1)
familiar = rng.normal(size=(2000, 6))
cfg = RunConfig(seed=1)
scd = train_scd(familiar, cfg, rng)
ctrl = train_iec(scd, familiar, cfg, rng)

# the same cluster, then the cluster moved further and further away
for shift in (0.0, 2.0, 5.0, 10.0):
    x = rng.normal(size=(500, 6)) + shift
    alpha = evidence(ctrl, x)
    u = concept_uncertainty(alpha)
    p = expected_probability(alpha)[:, 1]
    print(f"shift {shift:4.1f}: mean uncertainty {u.mean():.4f}, "
          f"mean P(anomalous) {p.mean():.3f}, median total evidence {np.median(alpha.sum(1)):.3g}")

# Far shifts drain the evidence but leave it one-sided: the controller calls
# them anomalous, and a lopsided Dirichlet carries little mutual information
# however scarce it is. Only inputs whose evidence vanishes on both classes
# reach the ln 2 ceiling and get routed to the dynamic detector.
