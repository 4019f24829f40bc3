"""Ranked-list construction and the top-n metric suite.

All metrics use binary relevance.  Candidate lists exclude a user's
training positives and are ordered by score descending with ties broken
by ascending item index, so results are reproducible across runs.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .validation import check_positive_int

METRIC_KEYS = ("P@5", "P@10", "R@5", "R@10", "MAP", "MRR", "NDCG")


@dataclass(frozen=True)
class RankedList:
    """One user's candidate items, best first."""

    user: int
    items: np.ndarray
    candidate_count: int


@dataclass
class RankingReport:
    """Per-user metric values and their unweighted means.

    Users without test positives, and users whose training row is empty
    (nothing to feed a model), are skipped; both counts are recorded so
    ``evaluated + skipped`` always equals the user total.
    """

    aggregates: dict
    evaluated_user_count: int
    skipped_user_count: int
    skipped_no_test_count: int
    skipped_cold_start_count: int
    per_user: dict = field(default_factory=dict)

    def to_dict(self, include_per_user=True):
        out = {
            "aggregates": dict(self.aggregates),
            "evaluated_user_count": self.evaluated_user_count,
            "skipped_user_count": self.skipped_user_count,
            "skipped_no_test_count": self.skipped_no_test_count,
            "skipped_cold_start_count": self.skipped_cold_start_count,
        }
        if include_per_user and self.per_user:
            out["per_user"] = {str(u): vals for u, vals in self.per_user.items()}
        return out

    def to_json(self, include_per_user=True):
        return json.dumps(self.to_dict(include_per_user), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        per_user = {int(u): vals for u, vals in data.get("per_user", {}).items()}
        return cls(
            aggregates=dict(data["aggregates"]),
            evaluated_user_count=data["evaluated_user_count"],
            skipped_user_count=data["skipped_user_count"],
            skipped_no_test_count=data["skipped_no_test_count"],
            skipped_cold_start_count=data["skipped_cold_start_count"],
            per_user=per_user,
        )


def rank_candidates(scores, train_positives, user=0):
    """Order every non-training item by score descending, ties by index."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError(f"non-finite score for user {user}")
    mask = np.ones(len(scores), dtype=bool)
    positives = np.asarray(list(train_positives), dtype=np.int64)
    if positives.size:
        mask[positives] = False
    candidates = np.flatnonzero(mask)
    order = np.argsort(-scores[candidates], kind="stable")
    items = candidates[order]
    items.setflags(write=False)
    return RankedList(user=int(user), items=items, candidate_count=len(items))


def _as_items(ranked):
    return ranked.items if isinstance(ranked, RankedList) else np.asarray(ranked)


def _require_relevant(relevant):
    relevant = set(int(i) for i in relevant)
    if not relevant:
        raise ValueError("metric undefined for an empty relevant set")
    return relevant


def precision_at_k(ranked, relevant, k):
    """Hits among the top k, divided by k (even when fewer candidates exist)."""
    check_positive_int("k", k)
    items = _as_items(ranked)
    relevant = set(int(i) for i in relevant)
    hits = sum(1 for i in items[:k] if int(i) in relevant)
    return hits / k


def recall_at_k(ranked, relevant, k):
    """Hits among the top k, divided by the relevant-set size."""
    check_positive_int("k", k)
    relevant = _require_relevant(relevant)
    items = _as_items(ranked)
    hits = sum(1 for i in items[:k] if int(i) in relevant)
    return hits / len(relevant)


def average_precision(ranked, relevant):
    """Mean of precision@rank over the ranks holding relevant items,
    normalized by the relevant-set size; full candidate list, no cutoff.
    """
    relevant = _require_relevant(relevant)
    items = _as_items(ranked)
    hits = 0
    total = 0.0
    for rank, item in enumerate(items, start=1):
        if int(item) in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def reciprocal_rank(ranked, relevant):
    """1 / (1-based rank of the first relevant item); 0 if none appears."""
    relevant = _require_relevant(relevant)
    for rank, item in enumerate(_as_items(ranked), start=1):
        if int(item) in relevant:
            return 1.0 / rank
    return 0.0


def ndcg(ranked, relevant):
    """Binary-gain DCG over the full list with 1/log2(rank+1) discount,
    normalized by the ideal ordering's DCG.
    """
    relevant = _require_relevant(relevant)
    dcg = 0.0
    for rank, item in enumerate(_as_items(ranked), start=1):
        if int(item) in relevant:
            dcg += 1.0 / math.log2(rank + 1)
    idcg = sum(1.0 / math.log2(r + 1) for r in range(1, len(relevant) + 1))
    return dcg / idcg


def evaluate_model(score_fn, split, cutoffs=(5, 10), include_per_user=False):
    """Score every evaluable user and aggregate the metric suite.

    ``score_fn(u)`` must return a length-N score vector over all items.
    Users with no test positives, or with an empty training row, are
    skipped and counted.  Aggregation uses exact (fsum) summation so the
    result is independent of user order.
    """
    train = split.train
    num_users, num_items = train.num_users, train.num_items
    test_by_user = split.test_items_by_user()
    train_counts = train.row_counts()
    keys = [f"P@{k}" for k in cutoffs] + [f"R@{k}" for k in cutoffs] + ["MAP", "MRR", "NDCG"]
    per_user = {}
    sums = {key: [] for key in keys}
    skipped_no_test = 0
    skipped_cold = 0
    for u in range(num_users):
        relevant = test_by_user.get(u)
        if relevant is None or len(relevant) == 0:
            skipped_no_test += 1
            continue
        if train_counts[u] == 0:
            skipped_cold += 1
            continue
        scores = np.asarray(score_fn(u), dtype=np.float64)
        if scores.shape != (num_items,):
            raise ValueError(
                f"scoring function returned shape {scores.shape}, expected ({num_items},)"
            )
        ranked = rank_candidates(scores, train.row_items(u), u)
        rel = set(int(i) for i in relevant)
        values = {}
        for k in cutoffs:
            values[f"P@{k}"] = precision_at_k(ranked, rel, k)
            values[f"R@{k}"] = recall_at_k(ranked, rel, k)
        values["MAP"] = average_precision(ranked, rel)
        values["MRR"] = reciprocal_rank(ranked, rel)
        values["NDCG"] = ndcg(ranked, rel)
        for key in keys:
            sums[key].append(values[key])
        if include_per_user:
            per_user[u] = values
    evaluated = num_users - skipped_no_test - skipped_cold
    if evaluated == 0:
        raise ValueError("no users are evaluable: every user lacks test or train items")
    aggregates = {key: math.fsum(sums[key]) / evaluated for key in keys}
    return RankingReport(
        aggregates=aggregates,
        evaluated_user_count=evaluated,
        skipped_user_count=skipped_no_test + skipped_cold,
        skipped_no_test_count=skipped_no_test,
        skipped_cold_start_count=skipped_cold,
        per_user=per_user,
    )
