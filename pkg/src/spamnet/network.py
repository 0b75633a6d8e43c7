"""User-user signed network and its (gated) Laplacian."""

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np
from scipy import sparse

from .errors import ConfigError, DegenerateNetworkError, ValidationError
from .features import FeatureConfig, pair_features, with_threshold


@dataclass(frozen=True, eq=False)
class SignedNetwork:
    """Sparse symmetric weighted graph over users.

    Each undirected edge is stored once with ``rows < cols``; ``users`` fixes
    the row order shared with the embedding matrices.
    """

    users: tuple
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if not (rows.shape == cols.shape == weights.shape):
            raise ValidationError("edge arrays differ in length")
        if np.any(rows >= cols):
            raise ValidationError("edges must satisfy row < col (no self-loops, stored once)")
        if rows.size and (rows.min() < 0 or cols.max() >= len(self.users)):
            raise ValidationError("edge endpoint out of range")
        if np.any(weights == 0) or not np.all(np.isfinite(weights)):
            raise ValidationError("stored edge weights must be finite and non-zero")
        if len(set(zip(rows.tolist(), cols.tolist()))) != rows.size:
            raise ValidationError("duplicate edge")
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "weights", weights)

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_edges(self):
        return self.weights.size

    @cached_property
    def index(self):
        return {u: i for i, u in enumerate(self.users)}

    @cached_property
    def positive_edges(self):
        """Positions (into the edge arrays) of edges with w > 0."""
        return np.flatnonzero(self.weights > 0)

    @cached_property
    def negative_edges(self):
        return np.flatnonzero(self.weights < 0)

    @cached_property
    def positive_degree(self):
        """Number of positive neighbours per user."""
        pos = self.positive_edges
        return np.bincount(
            np.concatenate([self.rows[pos], self.cols[pos]]), minlength=self.n_users
        ).astype(np.int64)

    @cached_property
    def W(self):
        """Full symmetric weight matrix in CSR form."""
        return _symmetric(self.rows, self.cols, self.weights, self.n_users)

    @cached_property
    def positive_adjacency(self):
        pos = self.positive_edges
        return _symmetric(self.rows[pos], self.cols[pos], self.weights[pos], self.n_users)

    def weight(self, u_i, u_j):
        return float(self.W[self.index[u_i], self.index[u_j]])


def _symmetric(rows, cols, values, n):
    r = np.concatenate([rows, cols])
    c = np.concatenate([cols, rows])
    v = np.concatenate([values, values])
    return sparse.csr_matrix((v, (r, c)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class IndicatorState:
    """Negative edges currently switched off; positions into the edge arrays."""

    deactivated: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def active_mask(self, network):
        mask = np.ones(network.n_edges, dtype=bool)
        mask[self.deactivated] = False
        return mask


def network_from_edges(users, edges):
    """Build a network from ``(user_i, user_j, weight)`` triples.

    Zero weights are dropped; each unordered pair may appear only once.
    """
    users = tuple(users)
    index = {u: i for i, u in enumerate(users)}
    rows, cols, weights = [], [], []
    for u_i, u_j, w in edges:
        i, j = index[u_i], index[u_j]
        if i == j:
            raise ValidationError(f"self-loop on {u_i!r}")
        if w == 0:
            continue
        if i > j:
            i, j = j, i
        rows.append(i)
        cols.append(j)
        weights.append(float(w))
    return SignedNetwork(users, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(weights))


def candidate_pairs(dataset, min_co_reviews=1):
    """Pairs sharing at least ``min_co_reviews`` products, found via the product index."""
    if min_co_reviews < 1:
        raise ConfigError("min_co_reviews must be >= 1")
    counts = Counter()
    for reviewers in dataset.product_index.values():
        counts.update(combinations(sorted(reviewers), 2))
    return sorted(pair for pair, c in counts.items() if c >= min_co_reviews)


_WORKER_DATASET = None


def _init_worker(dataset, config):
    global _WORKER_DATASET
    _WORKER_DATASET = (dataset, config)


def _features_chunk(pairs):
    dataset, config = _WORKER_DATASET
    return [pair_features(dataset, u_i, u_j, config, zeta=0.0) for u_i, u_j in pairs]


def compute_pair_features(dataset, config=FeatureConfig(), min_co_reviews=1, workers=1):
    """Features for every candidate pair, thresholded by the configured zeta.

    Returns ``(rows, zeta)`` where rows are ``(user_i, user_j, PairFeatures)``
    and ``zeta`` is the threshold actually applied.
    """
    pairs = candidate_pairs(dataset, min_co_reviews)
    if workers > 1 and len(pairs) > 1000:
        chunks = [pairs[k:k + 2000] for k in range(0, len(pairs), 2000)]
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(dataset, config)) as pool:
            raw = [f for part in pool.map(_features_chunk, chunks) for f in part]
    else:
        raw = [pair_features(dataset, u_i, u_j, config, zeta=0.0) for u_i, u_j in pairs]
    if config.zeta == "mean":
        zeta = float(np.mean([f.h_bar for f in raw])) if raw else 0.0
    else:
        zeta = config.zeta
    return [(u_i, u_j, with_threshold(f, zeta)) for (u_i, u_j), f in zip(pairs, raw)], zeta


def build_network(dataset, config=FeatureConfig(), min_co_reviews=1, workers=1, return_features=False):
    """Materialise the signed network of a dataset.

    Only co-reviewing pairs are scored; every other pair has zero confidence
    and therefore zero weight. Users without any edge are still rows of the
    network so embeddings cover every reviewer.
    """
    users = dataset.users
    if len(users) < 2:
        raise DegenerateNetworkError(f"need at least 2 users, got {len(users)}")
    rows, zeta = compute_pair_features(dataset, config, min_co_reviews, workers)
    net = network_from_edges(users, ((u_i, u_j, f.weight) for u_i, u_j, f in rows))
    if return_features:
        return net, rows, zeta
    return net


def laplacian(network, indicator=None):
    """``D - I*W`` with the indicator gating negative edges."""
    n = network.n_users
    w = network.weights
    if indicator is not None and indicator.deactivated.size:
        w = w * indicator.active_mask(network)
    gated = _symmetric(network.rows, network.cols, w, n)
    degree = np.asarray(gated.sum(axis=1)).ravel()
    return (sparse.diags(degree) - gated).tocsr()


def update_indicator(network, U, delta):
    """Switch off negative edges already farther apart than their margin ``-delta/w``."""
    if delta <= 0:
        raise ConfigError("delta must be positive")
    neg = network.negative_edges
    if neg.size == 0:
        return IndicatorState()
    diff = U[network.rows[neg]] - U[network.cols[neg]]
    dist2 = np.einsum("ij,ij->i", diff, diff)
    margin = -delta / network.weights[neg]
    return IndicatorState(neg[dist2 > margin])


def save_network(network, edges_path, manifest_path):
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for u in network.users:
            fh.write(f"{u}\n")
    with open(edges_path, "w", encoding="utf-8") as fh:
        for i, j, w in zip(network.rows.tolist(), network.cols.tolist(), network.weights.tolist()):
            fh.write(f"{network.users[i]}\t{network.users[j]}\t{w!r}\n")


def read_manifest(manifest_path):
    with open(manifest_path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def load_network(edges_path, manifest_path):
    users = read_manifest(manifest_path)
    edges = []
    with open(edges_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ValidationError(f"{edges_path}:{line_no}: expected 3 tab-separated fields")
            edges.append((parts[0], parts[1], float(parts[2])))
    return network_from_edges(users, edges)
