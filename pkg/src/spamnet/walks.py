"""Positive-link truncated random walks, skip-gram context pairs and the
negative-sampling distribution."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, EmptyTableError


@dataclass(frozen=True)
class WalkConfig:
    walks_per_node: int = 30
    walk_length: int = 8
    window: int = 5
    seed: int = 0

    def __post_init__(self):
        for name in ("walks_per_node", "walk_length", "window"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass(eq=False)
class WalkCorpus:
    users: tuple
    sequences: list
    context_pairs: np.ndarray

    def __len__(self):
        return len(self.sequences)


class _Transitions:
    """Cumulative positive-edge weights per node, CSR layout."""

    def __init__(self, network):
        adj = network.positive_adjacency.tocsr()
        adj.sort_indices()
        self.indptr = adj.indptr
        self.indices = adj.indices
        cum = np.empty_like(adj.data)
        for u in range(network.n_users):
            s, e = adj.indptr[u], adj.indptr[u + 1]
            cum[s:e] = np.cumsum(adj.data[s:e])
        self.cum = cum

    def walk(self, start, length, rng):
        seq = [start]
        cur = start
        for x in rng.random(length - 1):
            s, e = self.indptr[cur], self.indptr[cur + 1]
            if s == e:
                break
            c = self.cum[s:e]
            cur = int(self.indices[s + np.searchsorted(c, x * c[-1], side="right")])
            seq.append(cur)
        return np.array(seq, dtype=np.int64)


def _walks_for(transitions, config, starts):
    out = []
    for u in starts:
        for w in range(config.walks_per_node):
            rng = np.random.default_rng((config.seed, u, w))
            out.append(transitions.walk(u, config.walk_length, rng))
    return out


def _walks_chunk(args):
    transitions, config, starts = args
    return _walks_for(transitions, config, starts)


def generate_walks(network, config=WalkConfig(), workers=1):
    """``walks_per_node`` walks from every user along positive edges only.

    The next node is drawn proportionally to the positive edge weight; a walk
    stops early at a node without positive neighbours. Every (user, walk)
    has its own RNG stream seeded from ``(seed, user, walk)`` so the corpus is
    identical regardless of ``workers``. Sequences are ordered pass by pass
    (all users' first walk, then all users' second walk, ...).
    """
    trans = _Transitions(network)
    n = network.n_users
    if workers > 1 and n > workers:
        chunks = np.array_split(np.arange(n), workers)
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_walks_chunk, [(trans, config, c.tolist()) for c in chunks]))
        by_user = [w for part in parts for w in part]
    else:
        by_user = _walks_for(trans, config, range(n))
    r = config.walks_per_node
    sequences = [by_user[u * r + w] for w in range(r) for u in range(n)]
    return WalkCorpus(network.users, sequences, extract_context_pairs(sequences, config.window))


@lru_cache(maxsize=None)
def _window_template(length, omega):
    centers, contexts = [], []
    for i in range(length):
        for j in range(max(0, i - omega + 1), min(length, i + omega)):
            if j != i:
                centers.append(i)
                contexts.append(j)
    return np.array(centers, dtype=np.int64), np.array(contexts, dtype=np.int64)


def extract_context_pairs(sequences, omega):
    """(center, context) pairs with ``0 < |i - j| < omega`` inside each sequence.

    Accepts a WalkCorpus or a list of sequences; returns an ``(m, 2)`` array
    ordered by sequence, then center position, then context position.
    """
    if omega < 1:
        raise ConfigError("window must be >= 1")
    if isinstance(sequences, WalkCorpus):
        sequences = sequences.sequences
    parts = []
    for seq in sequences:
        seq = np.asarray(seq, dtype=np.int64)
        ci, cj = _window_template(len(seq), omega)
        if ci.size:
            parts.append(np.stack([seq[ci], seq[cj]], axis=1))
    if not parts:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(parts)


@dataclass(frozen=True, eq=False)
class NegativeSamplingTable:
    probabilities: np.ndarray

    @property
    def cdf(self):
        return np.cumsum(self.probabilities)

    def draw(self, rng, size):
        cdf = self.cdf
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        return np.minimum(idx, cdf.size - 1)


def build_sampling_table(network, power=0.75):
    """Unigram-style noise distribution over users, proportional to positive degree^0.75."""
    deg = network.positive_degree.astype(np.float64)
    if not np.any(deg > 0):
        raise EmptyTableError("network has no positive edges to sample from")
    weights = deg ** power
    return NegativeSamplingTable(weights / weights.sum())


def write_corpus(corpus, path):
    with open(path, "w", encoding="utf-8") as fh:
        for seq in corpus.sequences:
            fh.write(" ".join(corpus.users[k] for k in seq) + "\n")
