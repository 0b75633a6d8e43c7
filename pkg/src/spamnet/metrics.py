"""Ranking quality of a spamicity ranking against (partial) ground truth.

Unlabeled users are dropped before any metric is computed; the relative
order of the remaining users is kept.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, UndefinedMetricError

DEFAULT_KS = (10, 50, 100)


@dataclass
class EvalReport:
    ap: float
    auc: float
    precision_at: dict = field(default_factory=dict)
    ndcg_at: dict = field(default_factory=dict)
    n_positive: int = 0
    n_negative: int = 0
    ap_variant: str = "non-interpolated"

    def as_items(self):
        items = [("ap", self.ap), ("auc", self.auc)]
        items += [(f"precision@{k}", v) for k, v in sorted(self.precision_at.items())]
        items += [(f"ndcg@{k}", v) for k, v in sorted(self.ndcg_at.items())]
        items += [("n_positive", self.n_positive), ("n_negative", self.n_negative),
                  ("ap_variant", self.ap_variant)]
        return items

    def to_text(self):
        items = self.as_items()
        width = max(len(k) for k, _ in items)
        lines = []
        for key, value in items:
            shown = f"{value:.4f}" if isinstance(value, float) else str(value)
            lines.append(f"{key.ljust(width)}  {shown}")
        return "\n".join(lines) + "\n"

    def to_kv(self):
        return "".join(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n" for k, v in self.as_items())


def _labeled(ranking, labels):
    """(relevance list, score list) for labeled users in ranking order."""
    rel, scores = [], []
    for user, score in ranking:
        if user in labels:
            rel.append(int(labels[user]))
            scores.append(score)
    return rel, scores


def average_precision(ranking, labels):
    rel, _ = _labeled(ranking, labels)
    n_pos = sum(rel)
    if n_pos == 0:
        raise UndefinedMetricError("average precision needs at least one labeled positive")
    hits = 0
    total = 0.0
    for pos, r in enumerate(rel, start=1):
        if r:
            hits += 1
            total += hits / pos
    return total / n_pos


def auc(ranking, labels):
    """P(random positive outscores random negative); tied scores earn half credit."""
    rel, scores = _labeled(ranking, labels)
    rel = np.array(rel, dtype=bool)
    n_pos, n_neg = int(rel.sum()), int((~rel).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both labeled positives and negatives")
    ranks = rankdata(scores)  # average ranks for ties
    wins = ranks[rel].sum() - n_pos * (n_pos + 1) / 2
    return float(wins / (n_pos * n_neg))


def precision_at_k(ranking, labels, k):
    if k < 1:
        raise ConfigError("k must be >= 1")
    rel, _ = _labeled(ranking, labels)
    if not rel:
        raise UndefinedMetricError("no labeled users in ranking")
    if len(rel) < k:
        warnings.warn(f"only {len(rel)} labeled users for precision@{k}", RuntimeWarning)
    top = rel[:k]
    return sum(top) / len(top)


def ndcg_at_k(ranking, labels, k):
    """Binary-gain NDCG: (2^rel - 1) / log2(position + 1), normalised by the ideal order."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    rel, _ = _labeled(ranking, labels)
    n_pos = sum(rel)
    if n_pos == 0:
        raise UndefinedMetricError("NDCG needs at least one labeled positive")
    dcg = sum((2 ** r - 1) / math.log2(i + 1) for i, r in enumerate(rel[:k], start=1))
    ideal = sum(1.0 / math.log2(i + 1) for i in range(1, min(k, n_pos) + 1))
    return dcg / ideal


def evaluate(ranking, labels, ks=DEFAULT_KS):
    rel, _ = _labeled(ranking, labels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        precision = {k: precision_at_k(ranking, labels, k) for k in ks}
    return EvalReport(
        ap=average_precision(ranking, labels),
        auc=auc(ranking, labels),
        precision_at=precision,
        ndcg_at={k: ndcg_at_k(ranking, labels, k) for k in ks},
        n_positive=sum(rel),
        n_negative=len(rel) - sum(rel),
    )


def read_report_kv(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                key, value = line.rstrip("\n").split("=", 1)
                try:
                    out[key] = float(value)
                except ValueError:
                    out[key] = value
    return out
