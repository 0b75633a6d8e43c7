"""Spamicity scores from direct embeddings.

A pair of users scores ``exp(-||u_i - u_j||^2)``; a user's spamicity is the
mean of its ``n`` highest pair scores against every other user.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UndefinedScoreError

# float64 entries of the (block x n x K) difference tensor kept in memory at once
_BLOCK_BUDGET = 2_000_000


@dataclass(frozen=True)
class SpamicityRanking:
    user_ids: tuple
    scores: np.ndarray
    n: int

    def __len__(self):
        return len(self.user_ids)

    def __iter__(self):
        return iter(zip(self.user_ids, self.scores.tolist()))

    def as_dict(self):
        return dict(zip(self.user_ids, self.scores.tolist()))


def pair_score(U, i, j):
    if i == j:
        raise UndefinedScoreError("pair score of a user with itself is undefined")
    diff = U[i] - U[j]
    return math.exp(-float(np.dot(diff, diff)))


def _clamp_n(n, user_count):
    if user_count < 2:
        raise UndefinedScoreError("spamicity needs at least two users")
    if n < 1:
        raise ConfigError("n must be >= 1")
    if n > user_count - 1:
        warnings.warn(f"n={n} exceeds the {user_count - 1} other users; clamping", RuntimeWarning)
        n = user_count - 1
    return n


def _score_rows(U, rows):
    """Pair-score matrix for ``rows`` against all users, with -inf on the self entries."""
    diff = U[rows, None, :] - U[None, :, :]
    s = np.exp(-np.sum(diff * diff, axis=2))
    s[np.arange(len(rows)), rows] = -np.inf
    return s


def _top_n_mean(s, n):
    top = np.partition(s, s.shape[1] - n, axis=1)[:, s.shape[1] - n:]
    return np.sort(top, axis=1).sum(axis=1) / n


def spamicity(U, i, n):
    U = np.asarray(U, dtype=np.float64)
    n = _clamp_n(n, U.shape[0])
    return float(_top_n_mean(_score_rows(U, np.array([i])), n)[0])


def spamicity_all(U, n):
    U = np.asarray(U, dtype=np.float64)
    m, K = U.shape
    n = _clamp_n(n, m)
    block = max(1, _BLOCK_BUDGET // max(1, m * K))
    out = np.empty(m)
    for start in range(0, m, block):
        rows = np.arange(start, min(m, start + block))
        out[rows] = _top_n_mean(_score_rows(U, rows), n)
    return out


def rank_users(U, user_ids, n=25):
    """All users sorted by descending spamicity; ties broken by ascending id."""
    user_ids = list(user_ids)
    if len(user_ids) != np.shape(U)[0]:
        raise ConfigError("one user id per embedding row required")
    n_eff = _clamp_n(n, len(user_ids))
    scores = spamicity_all(U, n_eff)
    order = sorted(range(len(user_ids)), key=lambda k: (-scores[k], user_ids[k]))
    return SpamicityRanking(tuple(user_ids[k] for k in order), scores[order], n_eff)


def write_ranking(ranking, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rank, (user, score) in enumerate(ranking, start=1):
            fh.write(f"{rank}\t{user}\t{score!r}\n")


def read_ranking(path, n=0):
    ids, scores = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            _, user, score = line.rstrip("\n").split("\t")
            ids.append(user)
            scores.append(float(score))
    return SpamicityRanking(tuple(ids), np.array(scores), n)
