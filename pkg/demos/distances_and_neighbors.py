"""How the mixed-type distance behaves, feature by feature."""

from nicecf.distance import heom, heom_feature, k_nearest, nearest_unlike_neighbor
from nicecf.model import train_logistic
from nicecf.synthetic import make_dataset
from nicecf.tabular import fit_stats

data = make_dataset(120, 2, 2, seed=7, noise=0.05)
stats = fit_stats(data)

# numerical features: absolute difference over the training range
s_num = stats[0]
print(f"{s_num.name} spans [{s_num.min:.2f}, {s_num.max:.2f}]")
a, b = data.rows[0], data.rows[1]
print(f"  |{a[0]:.2f} - {b[0]:.2f}| / range = "
      f"{heom_feature(s_num, a[0], b[0]):.4f}")

# categorical features: 0 when equal, 1 otherwise
s_cat = stats[2]
print(f"{s_cat.name}: d('{a[2]}', '{b[2]}') = {heom_feature(s_cat, a[2], b[2])}")
print(f"{s_cat.name}: d('{a[2]}', '{a[2]}') = {heom_feature(s_cat, a[2], a[2])}")

# the full distance is the weighted sum of the per-feature terms
print(f"heom(a, b) = {heom(stats, a, b):.4f}")
weighted = heom(stats, a, b, weights=[5.0, 1.0, 1.0, 1.0])
print(f"heom(a, b) with feature 0 upweighted 5x = {weighted:.4f}")

# nearest rows to a probe instance (ties break to the lower row index)
probe = data.rows[0]
nearest = k_nearest(stats, probe, data, k=4)
print(f"4 nearest rows to row 0: {nearest}")

# the anchor of the hybrid search: nearest row that the model predicts as
# the other class AND predicts correctly
model = train_logistic(stats, data)
preds = model.predict_batch(data.rows)
c0 = model.predict(probe)
nn = nearest_unlike_neighbor(stats, probe, data, preds, c0)
print(f"row 0 is predicted {c0}; its nearest unlike neighbor is row {nn} "
      f"(predicted {preds[nn]}, labeled {data.labels[nn]})")
