"""Run every explainer on the same instance and compare what they change.

Grid-quantized numerics keep the case base non-empty, so the case-based
explainer has material to work with too.
"""

from nicecf.evaluation import compute_metrics
from nicecf.explainers import (
    RewardKind,
    SearchContext,
    explain_cbr,
    explain_nice,
    explain_sedc,
    explain_wit,
)
from nicecf.model import train_logistic
from nicecf.plausibility import AEConfig, ae_scorer, train_autoencoder
from nicecf.synthetic import make_dataset
from nicecf.tabular import fit_stats, split

data = make_dataset(400, 2, 3, seed=11, noise=0.02, quantize=0.5, n_categories=2)
train, test = split(data, 0.2, seed=0)
stats = fit_stats(train)
model = train_logistic(stats, train)
ae = train_autoencoder(train, AEConfig(seed=0), stats)
ctx = SearchContext(train, stats, model, scorer=ae_scorer(ae, stats))
ctx.warm(include_case_base=True)

x0 = test.rows[0]
print(f"source instance: {x0}")
print(f"predicted class: {model.predict(x0)} (p = {model.score(x0):.3f})\n")


def show(expl):
    rec = compute_metrics(expl, ctx)
    if not expl.valid:
        print(f"{expl.explainer_id:>10}: no valid counterfactual")
        return
    changes = ", ".join(
        f"{train.schema[j].name}: {x0[j]} -> {expl.counterfactual[j]}"
        for j in sorted(expl.changed_features)
    )
    print(f"{expl.explainer_id:>10}: {changes}")
    print(f"{'':>10}  sparsity {rec.sparsity}, proximity {rec.proximity:.3f}, "
          f"ae_error {rec.ae_error:.4f}, knn5 {rec.knn5:.3f}")


for kind in RewardKind:
    show(explain_nice(x0, kind, ctx))
show(explain_wit(x0, ctx))
show(explain_sedc(x0, ctx))
show(explain_cbr(x0, ctx))

# the search trace shows each greedy step: which feature was copied and the
# signed model score afterward (negative means the class has flipped)
expl = explain_nice(x0, RewardKind.SPARSITY, ctx)
print("\nsparsity-reward search trace:")
for step in expl.trace:
    print(f"  copied {train.schema[step.feature].name:>6}  "
          f"reward {step.reward:+.4f}  signed score {step.score:+.4f}")
