"""Graph-attention feature selection on tabular data.

Subjects become nodes of a cosine-similarity graph; a small multi-head
attention network is trained transductively to classify them, and each
feature's importance is the validation-AUROC drop when its column is
zeroed. Informative columns should surface at the top of the ranking.
"""

import numpy as np

from cardiofuse import gat

rng = np.random.default_rng(0)

# 5 informative + 44 noise columns; ~40% prevalence.
n = 400
labels = (rng.random(n) < 0.4).astype(int)
x = np.empty((n, 49))
for j in range(5):
    x[:, j] = 1.5 * labels + rng.normal(0, 1, n)
x[:, 5:] = rng.normal(0, 1, (n, 44))
names = [f"informative_{j}" for j in range(5)] + \
        [f"noise_{j}" for j in range(44)]

train_mask = np.zeros(n, dtype=bool)
train_mask[: int(0.6 * n)] = True
val_mask = ~train_mask

graph = gat.build_graph(x, target_degree=10, labels=labels,
                        train_mask=train_mask, val_mask=val_mask,
                        feature_names=names)
print(f"graph: {graph.n_nodes} nodes, threshold {graph.threshold:.3f}, "
      f"mean degree {gat.mean_degree(graph):.1f}")

config = gat.GatConfig(epochs=250, seed=0)
model = gat.train(graph, config)
print(f"training loss: {model.loss_history[0]:.3f} -> "
      f"{model.loss_history[-1]:.3f}")

report = gat.ablation_importance(model, graph, theta=15)
print(f"\nbaseline validation AUROC: {report.baseline_auroc:.3f}")
print("rank  feature          delta AUROC when zeroed")
for r, j in enumerate(report.ranking[:15], start=1):
    print(f"{r:4d}  {report.feature_names[j]:<15s}  {report.deltas[j]:+.4f}")

recovered = sum(1 for name in report.selected if name.startswith("informative"))
print(f"\ninformative features inside the top {report.theta}: {recovered}/5")
