"""Similarity-weighted mixing vs. weight merging vs. output averaging.

Per-layer mixing adds each adapter's low-rank contribution at
pre-activation with weight S_i; merging materializes a single model with
W + sum_i S_i * (alpha_i/r_i) * B_i A_i. For a dense stack the two are
equivalent up to float reassociation, and uniform-weight mixing is the
classic output-averaging baseline.
"""

import numpy as np

from acserve import MixPlan, ReferenceModel, merge_weights
from acserve.bench import make_topic_adapter

model = ReferenceModel.seeded([(32, 32), (32, 32), (32, 8)], seed=1)
adapters = [make_topic_adapter(f"zone{i}", model.signature, rank=4, scale=0.2) for i in range(3)]

weights = [0.5, 0.3, 0.2]
plan = MixPlan(tuple(zip(adapters, weights)))
merged = merge_weights(model, adapters, weights)

rng = np.random.default_rng(2)
worst = 0.0
for _ in range(100):
    x = rng.normal(size=32)
    mixed_out = model.forward_mixed(x, plan)
    merged_out = merged.forward_base(x)
    rel = np.linalg.norm(mixed_out - merged_out) / np.linalg.norm(merged_out)
    worst = max(worst, rel)
print(f"mixing vs merging, worst relative difference over 100 inputs: {worst:.2e}")

# output averaging is just the uniform plan
x = rng.normal(size=32)
avg = model.forward_avg(x, adapters)
uniform = model.forward_mixed(x, MixPlan(tuple((a, 1.0 / 3.0) for a in adapters)))
print("averaging == uniform mixing:", np.array_equal(avg, uniform))

# the empty plan is the base model, bit for bit
print(
    "empty plan == base model:",
    model.forward_mixed(x, MixPlan.empty()).tobytes() == model.forward_base(x).tobytes(),
)

# weights tilt the output toward the heavier adapter
solo = [model.forward_mixed(x, MixPlan(((a, 1.0),))) for a in adapters]
for w0 in (0.9, 0.5, 0.1):
    tilted = model.forward_mixed(
        x, MixPlan(((adapters[0], w0), (adapters[1], 1.0 - w0)))
    )
    d0 = np.linalg.norm(tilted - solo[0])
    d1 = np.linalg.norm(tilted - solo[1])
    print(f"S_0={w0:.1f}: distance to adapter0 output {d0:.4f}, to adapter1 output {d1:.4f}")
