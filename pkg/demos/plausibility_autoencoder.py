"""Reconstruction error as a plausibility signal.

A small autoencoder is trained on the encoded training rows. Instances that
look like the training data reconstruct well (low error); far-away points
reconstruct badly. The plausibility-reward search uses that signal to prefer
counterfactuals on the data manifold.
"""

import numpy as np

from nicecf.explainers import RewardKind, SearchContext, explain_nice
from nicecf.model import train_logistic
from nicecf.plausibility import AEConfig, ae_scorer, train_autoencoder
from nicecf.synthetic import make_dataset
from nicecf.tabular import fit_stats

data = make_dataset(300, 3, 1, seed=5, noise=0.02)
stats = fit_stats(data)

ae = train_autoencoder(data, AEConfig(epochs=200, step=0.05, seed=0), stats)
losses = ae.loss_history
print(f"trained {len(losses)} epochs; loss {losses[0]:.4f} -> {losses[-1]:.4f}")
# full-batch gradient descent at a sane step never increases the loss
assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))

scorer = ae_scorer(ae, stats)

# training rows score low, a fabricated far-away point scores high
inlier_errors = [scorer(row) for row in data.rows[:50]]
outlier = (1e4, -1e4, 1e4, data.rows[0][3])
print(f"mean inlier error:  {np.mean(inlier_errors):.4f}")
print(f"outlier error:      {scorer(outlier):.4f}")

# compare search variants: the plausibility reward tends to land on
# counterfactuals with reconstruction error closer to the inlier level
model = train_logistic(stats, data)
ctx = SearchContext(data, stats, model, scorer=scorer)
ctx.warm()

plain, plaus = [], []
for x0 in data.rows[:40]:
    plain.append(scorer(explain_nice(x0, RewardKind.SPARSITY, ctx).counterfactual))
    plaus.append(scorer(explain_nice(x0, RewardKind.PLAUSIBILITY, ctx).counterfactual))
print(f"mean counterfactual error, sparsity reward:     {np.mean(plain):.4f}")
print(f"mean counterfactual error, plausibility reward: {np.mean(plaus):.4f}")
