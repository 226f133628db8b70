"""tdlab: a policy-optimization workbench.

Implements target-distribution learning (direct, evolution-strategies style,
and revised-noise variants), a clipped-surrogate PPO baseline, and a
move-toward-action ablation, plus numerical verification of the update
theory: KL budget bounds, expected-update identities, and fixed points.
"""

__version__ = "0.1.0"
