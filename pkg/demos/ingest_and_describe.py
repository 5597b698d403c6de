"""Round-trip a dataset through the schema+CSV format and summarize it."""

import tempfile
from pathlib import Path

from nicecf.synthetic import make_dataset, save_dataset
from nicecf.tabular import FeatureKind, fit_stats, load_dataset, split

# generate a mixed dataset: 2 numerical + 2 categorical features
data = make_dataset(200, 2, 2, seed=42, noise=0.05)
print(f"generated {len(data)} rows, {data.n_features} features")

# persist as schema.json + data.csv, then read it back
workdir = Path(tempfile.mkdtemp())
save_dataset(data, workdir / "schema.json", workdir / "data.csv")
reloaded = load_dataset(workdir / "schema.json", workdir / "data.csv")
assert reloaded.rows == data.rows
print(f"round-tripped through {workdir}")

# per-feature statistics drive distances, encodings and replacements
for s in fit_stats(reloaded):
    if s.kind is FeatureKind.NUMERICAL:
        print(f"  {s.name}: range [{s.min:.2f}, {s.max:.2f}], "
              f"mean {s.mean:.2f}, std {s.std:.2f}")
    else:
        print(f"  {s.name}: categories {list(s.categories)}, mode '{s.mode}'")

# deterministic shuffled split; the same seed gives the same partition
train, test = split(reloaded, test_fraction=0.2, seed=0)
print(f"split into {len(train)} train / {len(test)} test rows")
ones = sum(train.labels)
print(f"train label balance: {len(train) - ones} vs {ones}")
