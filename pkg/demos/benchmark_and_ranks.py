"""A miniature benchmark: metrics, per-instance ranks, and the rank tests."""

from nicecf.evaluation import (
    compute_metrics,
    friedman_test,
    nemenyi_cd,
    rank_table,
    render_report,
    summarize_records,
)
from nicecf.explainers import (
    RewardKind,
    SearchContext,
    explain_nice,
    explain_sedc,
    explain_wit,
)
from nicecf.model import train_logistic
from nicecf.plausibility import AEConfig, ae_scorer, train_autoencoder
from nicecf.synthetic import make_dataset
from nicecf.tabular import fit_stats, split

data = make_dataset(500, 3, 2, seed=23, noise=0.05)
train, test = split(data, 0.2, seed=0)
stats = fit_stats(train)
model = train_logistic(stats, train)
ae = train_autoencoder(train, AEConfig(seed=0), stats)
ctx = SearchContext(train, stats, model, scorer=ae_scorer(ae, stats))
ctx.warm()

explainers = {
    "nice-spars": lambda x: explain_nice(x, RewardKind.SPARSITY, ctx),
    "nice-prox": lambda x: explain_nice(x, RewardKind.PROXIMITY, ctx),
    "wit": lambda x: explain_wit(x, ctx),
    "sedc": lambda x: explain_sedc(x, ctx),
}

records = []
for iid, x0 in enumerate(test.rows):
    for eid, fn in explainers.items():
        records.append(compute_metrics(fn(x0), ctx, iid))
print(f"collected {len(records)} records over {len(test)} instances")

# rank explainers per instance; failures share the worst ranks
table = rank_table(records, "sparsity")
for eid, mr in zip(table.explainer_ids, table.mean_ranks()):
    print(f"  mean sparsity rank {eid:>10}: {mr:.3f}")

stat, reject = friedman_test(table, alpha=0.05)
print(f"friedman statistic {stat:.2f}, reject equal ranks: {reject}")
cd = nemenyi_cd(len(table.explainer_ids), len(test), alpha=0.05)
print(f"critical mean-rank difference: {cd:.3f}")

# the full text report aggregates every metric at once
print()
print(render_report(summarize_records(records)))
