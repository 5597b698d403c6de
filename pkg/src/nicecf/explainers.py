"""Counterfactual explainers for binary classifiers over mixed tabular data.

The main family is a nearest-neighbor hybrid search: find the nearest
correctly-predicted training instance of the opposite class (the anchor),
then greedily copy one anchor value at a time into the source instance,
each iteration keeping the candidate that maximizes a reward, until the
predicted class flips. Because the anchor itself is a class-flipping hybrid,
the search always terminates with a valid counterfactual.

Reward kinds, with s(x) = 2 p(x) - 1 the signed score of class 1 and
y_hat = +1 when the source is predicted class 1, else -1:

- none:        no search; the anchor is returned directly.
- spars:       y_hat * (s(prev) - s(cand)); since each step changes exactly
               one feature, maximizing score drop per step favors sparsity.
- prox:        the same score drop divided by the weighted distance increase
               of the step (guarded below by a small epsilon).
- plaus:       the score drop multiplied by the reconstruction-error drop
               of a plausibility scorer. Note the product form can reward a
               candidate whose score change AND plausibility change are both
               negative (two negative factors); this follows the reward's
               definition literally and is not repaired here.

Three reference baselines are included: a nearest opposite-predicted
training row without any correctness filter and with per-std numeric
scaling (wit), a greedy mean/mode replacement search (sedc), and a
case-based explainer reusing pairs of training rows that differ in at most
two features (cbr).
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .distance import check_weights, heom_feature, heom_to_rows, nearest_unlike_neighbor
from .errors import ConfigError, NoUnlikeNeighborError
from .model import ClassifierHandle
from .plausibility import PlausibilityScorer
from .tabular import Dataset, FeatureKind, FeatureStats, Instance


class RewardKind(Enum):
    NONE = "none"
    SPARSITY = "spars"
    PROXIMITY = "prox"
    PLAUSIBILITY = "plaus"


@dataclass(frozen=True)
class TraceStep:
    """One search iteration: the feature copied, its reward, the resulting signed score."""

    feature: int
    reward: float
    score: float


@dataclass(frozen=True)
class Explanation:
    """Result of one explainer run.

    ``anchor``/``anchor_index`` identify the training row the search moved
    toward (None for explainers without a row anchor). ``changed_features``
    holds exactly the positions where the counterfactual differs from the
    source. ``valid`` is True when the predicted class actually flipped.
    """

    explainer_id: str
    source: Instance
    counterfactual: Instance
    valid: bool
    changed_features: frozenset[int]
    trace: tuple[TraceStep, ...]
    elapsed_ms: float
    anchor: Instance | None = None
    anchor_index: int | None = None

    @property
    def sparsity(self) -> int:
        return len(self.changed_features)


class SearchContext:
    """Shared read-only state for a batch of explanations.

    Bundles the training data, fitted statistics, the model handle, feature
    cost weights, an optional plausibility scorer, and the proximity-reward
    denominator guard. Derived state (training-set predictions, the
    mean/mode instance, the case base of near-duplicate cross-class pairs)
    is computed lazily under a lock, so one context can serve many threads.
    """

    def __init__(
        self,
        train: Dataset,
        stats: Sequence[FeatureStats],
        model: ClassifierHandle,
        weights: Sequence[float] | None = None,
        scorer: PlausibilityScorer | None = None,
        epsilon: float = 1e-9,
    ):
        if epsilon <= 0.0:
            raise ConfigError(f"epsilon must be > 0, got {epsilon}")
        if len(stats) != train.n_features:
            raise ConfigError("statistics do not match the training schema")
        self.train = train
        self.stats: tuple[FeatureStats, ...] = tuple(stats)
        self.model = model
        self.weights = check_weights(stats, weights)
        self.scorer = scorer
        self.epsilon = float(epsilon)
        self._lock = threading.Lock()
        self._train_predictions: np.ndarray | None = None
        self._mean_mode: Instance | None = None
        self._case_base: tuple[tuple[int, int, tuple[int, ...]], ...] | None = None

    def train_predictions(self) -> np.ndarray:
        """Model predictions for every training row, cached after first use."""
        with self._lock:
            if self._train_predictions is None:
                self._train_predictions = self.model.predict_batch(self.train.rows)
            return self._train_predictions

    def mean_mode_instance(self) -> Instance:
        """The instance holding each feature's training mean (numeric) or mode."""
        with self._lock:
            if self._mean_mode is None:
                self._mean_mode = tuple(
                    s.mean if s.kind is FeatureKind.NUMERICAL else s.mode
                    for s in self.stats
                )
            return self._mean_mode

    def case_base(self) -> tuple[tuple[int, int, tuple[int, ...]], ...]:
        """Pairs of training rows predicted as different classes differing in <= 2 features.

        Each entry is (low_row_index, high_row_index, differing feature
        indices), sorted by row-index pair. Building the base compares the
        two predicted-class groups feature by feature, so cost is one
        |group0| x |group1| matrix per feature.
        """
        preds = self.train_predictions()
        with self._lock:
            if self._case_base is None:
                self._case_base = _build_case_base(self.train, self.stats, preds)
            return self._case_base

    def warm(self, include_case_base: bool = False) -> None:
        """Populate the lazy caches up front (before handing the context to threads)."""
        self.train_predictions()
        self.mean_mode_instance()
        if include_case_base:
            self.case_base()


def _build_case_base(
    train: Dataset, stats: Sequence[FeatureStats], preds: np.ndarray
) -> tuple[tuple[int, int, tuple[int, ...]], ...]:
    idx0 = np.flatnonzero(preds == 0)
    idx1 = np.flatnonzero(preds == 1)
    if len(idx0) == 0 or len(idx1) == 0:
        return ()
    counts = np.zeros((len(idx0), len(idx1)), dtype=np.int16)
    cols = train.columns()
    for j, stat in enumerate(stats):
        if stat.kind is FeatureKind.CATEGORICAL:
            codes, _ = cols[j]
            a, b = codes[idx0], codes[idx1]
        else:
            col = cols[j]
            a, b = col[idx0], col[idx1]
        counts += a[:, None] != b[None, :]
    pairs = []
    for i, j in np.argwhere((counts >= 1) & (counts <= 2)):
        a, b = int(idx0[i]), int(idx1[j])
        lo, hi = (a, b) if a < b else (b, a)
        row_lo, row_hi = train.rows[lo], train.rows[hi]
        diffs = tuple(f for f in range(train.n_features) if row_lo[f] != row_hi[f])
        pairs.append((lo, hi, diffs))
    pairs.sort(key=lambda p: (p[0], p[1]))
    return tuple(pairs)


def _signed(p: float) -> float:
    return 2.0 * p - 1.0


def _predicted(p: float) -> int:
    return 1 if p >= 0.5 else 0


def _reward_core(
    kind: RewardKind,
    ctx: SearchContext,
    y_hat: int,
    p_prev: float,
    p_cand: float,
    j: int,
    prev_j,
    cand_j,
    ae_prev: float | None,
    ae_cand: float | None,
) -> float:
    # Single source of truth for the reward arithmetic: both the public
    # reward() and the search loop call this with identically computed parts,
    # so an independent recomputation reproduces search decisions bit for bit.
    delta = y_hat * (_signed(p_prev) - _signed(p_cand))
    if kind is RewardKind.SPARSITY:
        return delta
    if kind is RewardKind.PROXIMITY:
        step = ctx.weights[j] * heom_feature(ctx.stats[j], prev_j, cand_j)
        return delta / max(step, ctx.epsilon)
    if kind is RewardKind.PLAUSIBILITY:
        return delta * (ae_prev - ae_cand)
    raise ConfigError("reward is undefined for kind 'none'")


def reward(
    kind: RewardKind,
    prev: Instance,
    cand: Instance,
    ctx: SearchContext,
    y_hat: int,
) -> float:
    """Reward of moving from ``prev`` to ``cand`` (which must differ in one feature).

    ``prev`` is assumed to still hold the source's value at the changed
    position, which is always true inside the search (a feature is copied at
    most once); the proximity denominator relies on it.
    """
    if y_hat not in (-1, 1):
        raise ConfigError(f"y_hat must be +1 or -1, got {y_hat}")
    diffs = [j for j in range(len(prev)) if prev[j] != cand[j]]
    if len(diffs) != 1:
        raise ConfigError(f"candidate differs from prev in {len(diffs)} features, expected 1")
    j = diffs[0]
    if kind is RewardKind.PLAUSIBILITY:
        if ctx.scorer is None:
            raise ConfigError("plausibility reward requires a scorer on the context")
        ae_prev, ae_cand = ctx.scorer(prev), ctx.scorer(cand)
    else:
        ae_prev = ae_cand = None
    p_prev = ctx.model.score(prev)
    p_cand = ctx.model.score(cand)
    return _reward_core(kind, ctx, y_hat, p_prev, p_cand, j, prev[j], cand[j], ae_prev, ae_cand)


def explain_nice(x0: Instance, kind: RewardKind, ctx: SearchContext) -> Explanation:
    """Hybrid search from ``x0`` toward its nearest unlike neighbor.

    With kind none the anchor is returned as-is. Otherwise each iteration
    builds one candidate per still-uncopied anchor feature, scores them in a
    single batch, keeps the reward argmax (ties to the smallest feature
    index), and stops as soon as the predicted class flips. Termination is
    guaranteed because the last remaining candidate is the anchor itself.
    """
    t0 = time.perf_counter()
    if kind is RewardKind.PLAUSIBILITY and ctx.scorer is None:
        raise ConfigError("plausibility search requires a scorer on the context")
    c0 = ctx.model.predict(x0)
    y_hat = 1 if c0 == 1 else -1
    preds = ctx.train_predictions()
    nn_index = nearest_unlike_neighbor(ctx.stats, x0, ctx.train, preds, c0, ctx.weights)
    x_nn = ctx.train.rows[nn_index]
    explainer_id = f"nice-{kind.value}"

    if kind is RewardKind.NONE:
        counterfactual = x_nn
        trace: tuple[TraceStep, ...] = ()
        valid = True
    else:
        current = list(x0)
        p_prev = ctx.model.score(x0)
        ae_prev = ctx.scorer(x0) if kind is RewardKind.PLAUSIBILITY else None
        steps: list[TraceStep] = []
        valid = False
        while True:
            remaining = [j for j in range(len(current)) if current[j] != x_nn[j]]
            if not remaining:
                break
            candidates = []
            for j in remaining:
                hybrid = list(current)
                hybrid[j] = x_nn[j]
                candidates.append(tuple(hybrid))
            p_cands = ctx.model.score_batch(candidates)
            if kind is RewardKind.PLAUSIBILITY:
                ae_cands = [ctx.scorer(c) for c in candidates]
            else:
                ae_cands = [None] * len(candidates)
            best = 0
            best_reward = None
            for i, j in enumerate(remaining):
                r = _reward_core(
                    kind, ctx, y_hat, p_prev, float(p_cands[i]), j,
                    current[j], x_nn[j], ae_prev, ae_cands[i],
                )
                if best_reward is None or r > best_reward:
                    best, best_reward = i, r
            chosen_j = remaining[best]
            p_prev = float(p_cands[best])
            ae_prev = ae_cands[best]
            current[chosen_j] = x_nn[chosen_j]
            steps.append(TraceStep(chosen_j, best_reward, _signed(p_prev)))
            if _predicted(p_prev) != c0:
                valid = True
                break
        counterfactual = tuple(current)
        trace = tuple(steps)

    changed = frozenset(j for j in range(len(x0)) if counterfactual[j] != x0[j])
    return Explanation(
        explainer_id=explainer_id,
        source=tuple(x0),
        counterfactual=counterfactual,
        valid=valid,
        changed_features=changed,
        trace=trace,
        elapsed_ms=(time.perf_counter() - t0) * 1000.0,
        anchor=x_nn,
        anchor_index=nn_index,
    )


def _wit_distances(ctx: SearchContext, x0: Instance) -> np.ndarray:
    """Distances used by the nearest-neighbor baseline: per-std numeric scaling.

    Categorical features use the 0/1 overlap; numeric differences are divided
    by the training standard deviation (zero std degenerates to overlap).
    Accumulated feature by feature like the main metric, times the same
    per-feature weights.
    """
    cols = ctx.train.columns()
    total = np.zeros(len(ctx.train), dtype=np.float64)
    for j, (stat, w) in enumerate(zip(ctx.stats, ctx.weights)):
        if stat.kind is FeatureKind.CATEGORICAL:
            codes, mapping = cols[j]
            code = mapping.get(x0[j], -1)
            term = (codes != code).astype(np.float64)
        else:
            col = cols[j]
            if stat.std == 0.0:
                term = (col != float(x0[j])).astype(np.float64)
            else:
                term = np.abs(float(x0[j]) - col) / stat.std
        total += w * term
    return total


def explain_wit(x0: Instance, ctx: SearchContext) -> Explanation:
    """Return the nearest training row predicted as the other class.

    No correctness filter: a misclassified training row qualifies. Distance
    ties break toward the smaller row index.
    """
    t0 = time.perf_counter()
    c0 = ctx.model.predict(x0)
    preds = ctx.train_predictions()
    eligible = preds != c0
    if not bool(eligible.any()):
        raise NoUnlikeNeighborError("no training instance is predicted as the opposite class")
    d = np.where(eligible, _wit_distances(ctx, x0), np.inf)
    index = int(np.argmin(d))
    counterfactual = ctx.train.rows[index]
    changed = frozenset(j for j in range(len(x0)) if counterfactual[j] != x0[j])
    return Explanation(
        explainer_id="wit",
        source=tuple(x0),
        counterfactual=counterfactual,
        valid=True,
        changed_features=changed,
        trace=(),
        elapsed_ms=(time.perf_counter() - t0) * 1000.0,
        anchor=counterfactual,
        anchor_index=index,
    )


def explain_sedc(
    x0: Instance, ctx: SearchContext, max_iters: int | None = None
) -> Explanation:
    """Greedy search replacing features with their training mean or mode.

    Same loop as the sparsity-reward hybrid search, but values are copied
    from the all-mean/mode instance instead of a training row, so there is
    no flip guarantee: when every feature has been replaced (or ``max_iters``
    is exhausted) without a class change, the result has ``valid=False``.
    Consequence: whenever the all-mean/mode instance is predicted as class
    c, every instance predicted as the other class is explained successfully,
    because the search terminates at that instance in the worst case.
    """
    t0 = time.perf_counter()
    if max_iters is not None and max_iters < 1:
        raise ConfigError(f"max_iters must be >= 1, got {max_iters}")
    c0 = ctx.model.predict(x0)
    y_hat = 1 if c0 == 1 else -1
    replacement = ctx.mean_mode_instance()
    current = list(x0)
    p_prev = ctx.model.score(x0)
    steps: list[TraceStep] = []
    valid = False
    while max_iters is None or len(steps) < max_iters:
        remaining = [j for j in range(len(current)) if current[j] != replacement[j]]
        if not remaining:
            break
        candidates = []
        for j in remaining:
            hybrid = list(current)
            hybrid[j] = replacement[j]
            candidates.append(tuple(hybrid))
        p_cands = ctx.model.score_batch(candidates)
        best = 0
        best_reward = None
        for i, j in enumerate(remaining):
            r = _reward_core(
                RewardKind.SPARSITY, ctx, y_hat, p_prev, float(p_cands[i]), j,
                current[j], replacement[j], None, None,
            )
            if best_reward is None or r > best_reward:
                best, best_reward = i, r
        chosen_j = remaining[best]
        p_prev = float(p_cands[best])
        current[chosen_j] = replacement[chosen_j]
        steps.append(TraceStep(chosen_j, best_reward, _signed(p_prev)))
        if _predicted(p_prev) != c0:
            valid = True
            break
    counterfactual = tuple(current)
    changed = frozenset(j for j in range(len(x0)) if counterfactual[j] != x0[j])
    return Explanation(
        explainer_id="sedc",
        source=tuple(x0),
        counterfactual=counterfactual,
        valid=valid,
        changed_features=changed,
        trace=tuple(steps),
        elapsed_ms=(time.perf_counter() - t0) * 1000.0,
    )


def explain_cbr(x0: Instance, ctx: SearchContext) -> Explanation:
    """Reuse a near-duplicate cross-class training pair as the explanation.

    Among all training pairs predicted as different classes and differing in
    at most two features, pick the one whose member sharing the source's
    predicted class is nearest to the source, then copy the pair's differing
    values from the opposite member into the source. An empty case base, or
    a copy that fails to flip the class, yields ``valid=False``.
    """
    t0 = time.perf_counter()
    c0 = ctx.model.predict(x0)
    base = ctx.case_base()
    if not base:
        return Explanation(
            explainer_id="cbr",
            source=tuple(x0),
            counterfactual=tuple(x0),
            valid=False,
            changed_features=frozenset(),
            trace=(),
            elapsed_ms=(time.perf_counter() - t0) * 1000.0,
        )
    preds = ctx.train_predictions()
    d = heom_to_rows(ctx.stats, x0, ctx.train, ctx.weights)
    best_pair = None
    best_d = None
    for lo, hi, diffs in base:
        same = lo if int(preds[lo]) == c0 else hi
        if best_d is None or d[same] < best_d:
            best_pair, best_d = (lo, hi, diffs), float(d[same])
    lo, hi, diffs = best_pair
    other = hi if int(preds[lo]) == c0 else lo
    other_row = ctx.train.rows[other]
    result = list(x0)
    for j in diffs:
        result[j] = other_row[j]
    counterfactual = tuple(result)
    valid = ctx.model.predict(counterfactual) != c0
    changed = frozenset(j for j in range(len(x0)) if counterfactual[j] != x0[j])
    return Explanation(
        explainer_id="cbr",
        source=tuple(x0),
        counterfactual=counterfactual,
        valid=valid,
        changed_features=changed,
        trace=(),
        elapsed_ms=(time.perf_counter() - t0) * 1000.0,
    )


def explanation_to_dict(
    expl: Explanation,
    feature_names: Sequence[str],
    metrics: dict | None = None,
) -> dict:
    """JSON-ready representation of an explanation.

    Changed features are reported with their names and old/new values;
    ``metrics`` (already a plain dict) is attached verbatim when given.
    """
    doc = {
        "explainer": expl.explainer_id,
        "valid": expl.valid,
        "elapsed_ms": expl.elapsed_ms,
        "source": list(expl.source),
        "counterfactual": list(expl.counterfactual),
        "changes": [
            {
                "feature": feature_names[j],
                "index": j,
                "old": expl.source[j],
                "new": expl.counterfactual[j],
            }
            for j in sorted(expl.changed_features)
        ],
        "trace": [
            {
                "feature": feature_names[s.feature],
                "index": s.feature,
                "reward": s.reward,
                "score": s.score,
            }
            for s in expl.trace
        ],
    }
    if expl.anchor_index is not None:
        doc["anchor_index"] = expl.anchor_index
    if metrics is not None:
        doc["metrics"] = metrics
    return doc
