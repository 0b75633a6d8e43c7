"""Joint optimisation of direct and indirect user embeddings.

Two matrices are learned. ``U`` (direct embeddings) is pulled together across
positive edges and pushed apart across active negative edges of the signed
network, and also acts as the skip-gram "center" matrix. ``Phi`` (indirect
embeddings) is the skip-gram "context" matrix fed by positive-link walks.

Each epoch runs, in order: indicator refresh and Laplacian rebuild, one
full-matrix gradient step on the direct loss (weight ``beta``), one step on
the Frobenius regulariser, then a skip-gram pass over all context pairs
(weight ``1 - beta``).
"""

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, DivergenceError
from .network import IndicatorState, laplacian, update_indicator
from .walks import build_sampling_table

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class TrainConfig:
    beta: float = 0.6
    psi_reg: float = 0.01
    delta: float = 1.0
    kappa: int = 8
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    lr_schedule: str = "linear"
    epochs: int = 100
    dim: int = 64
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError("beta must lie in [0, 1]")
        if self.psi_reg < 0:
            raise ConfigError("psi_reg must be >= 0")
        if self.delta <= 0:
            raise ConfigError("delta must be > 0")
        if self.kappa < 0:
            raise ConfigError("kappa must be >= 0")
        if self.learning_rate <= 0 or self.min_learning_rate < 0:
            raise ConfigError("learning rates must be positive")
        if self.lr_schedule not in ("linear", "constant"):
            raise ConfigError("lr_schedule must be 'linear' or 'constant'")
        if self.epochs < 0 or self.dim < 1 or self.workers < 1 or self.seed < 0:
            raise ConfigError("epochs, dim, workers and seed must be non-negative (dim, workers >= 1)")

    def learning_rate_at(self, epoch):
        if self.lr_schedule == "constant" or self.epochs <= 1:
            return self.learning_rate
        frac = epoch / (self.epochs - 1)
        return self.learning_rate + frac * (self.min_learning_rate - self.learning_rate)


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    learning_rate: float
    direct: float
    indirect: float
    regularization: float
    total: float
    deactivated: int


@dataclass(eq=False)
class EmbeddingState:
    U: np.ndarray
    Phi: np.ndarray
    history: list = field(default_factory=list)

    @property
    def K(self):
        return self.U.shape[1]

    def copy(self):
        return EmbeddingState(self.U.copy(), self.Phi.copy(), list(self.history))


def init_embeddings(user_count, K, seed=0):
    """Both matrices i.i.d. uniform on [-0.5/K, 0.5/K]."""
    if user_count < 1 or K < 1:
        raise ConfigError("user_count and K must be positive")
    rng = np.random.default_rng(seed)
    half = 0.5 / K
    U = rng.uniform(-half, half, size=(user_count, K))
    Phi = rng.uniform(-half, half, size=(user_count, K))
    return EmbeddingState(U, Phi)


def _active_edges(network, indicator):
    if indicator is None:
        return network.rows, network.cols, network.weights
    mask = indicator.active_mask(network)
    return network.rows[mask], network.cols[mask], network.weights[mask]


def direct_loss(network, indicator, U):
    """Sum of ``I_ij * w_ij * ||u_i - u_j||^2`` over ordered pairs, i.e. ``2 tr(U^T L U)``.

    Every undirected edge contributes twice because ``W`` is symmetric.
    """
    rows, cols, w = _active_edges(network, indicator)
    diff = U[rows] - U[cols]
    return 2.0 * float(np.dot(w, np.einsum("ij,ij->i", diff, diff)))


def direct_gradient(network, indicator, U):
    """``2 (L + L^T) U`` for the gated Laplacian."""
    L = laplacian(network, indicator)
    return 2.0 * (L @ U + L.T @ U)


def regularization_loss(U):
    return float(np.sum(U * U))


def regularization_gradient(U):
    return 2.0 * U


def negative_sampling_loss(state, centers, contexts, negatives):
    """``-[log s(u_c.phi_o) + sum_n log s(-u_c.phi_n)]`` summed over pairs (no update)."""
    U, Phi = state.U, state.Phi
    centers = np.asarray(centers)
    pos = np.einsum("ij,ij->i", U[centers], Phi[np.asarray(contexts)])
    neg = np.einsum("ik,ijk->ij", U[centers], Phi[np.asarray(negatives)])
    keep = np.asarray(negatives) != np.asarray(contexts)[:, None]
    return float(np.sum(np.logaddexp(0.0, -pos)) + np.sum(np.logaddexp(0.0, neg) * keep))


def softmax_indirect_loss(state, centers, contexts):
    """Full-softmax skip-gram loss; a reference evaluator for small networks only."""
    logits = state.U[np.asarray(centers)] @ state.Phi.T
    lse = np.logaddexp.reduce(logits, axis=1)
    return float(np.sum(lse - logits[np.arange(len(centers)), np.asarray(contexts)]))


def indirect_pair_update(state, center, context, sampling_table=None, kappa=0, lr=0.025,
                         rng=None, negatives=None):
    """One negative-sampling step for a (center, context) pair, in place.

    ``negatives`` may be passed explicitly; otherwise ``kappa`` are drawn from
    ``sampling_table`` with ``rng``. Returns the state.
    """
    if center == context:
        raise ConfigError("center and context must differ")
    if negatives is None:
        if kappa > 0:
            if sampling_table is None:
                raise ConfigError("sampling_table required to draw negatives")
            negatives = sampling_table.draw(rng or np.random.default_rng(), kappa)
        else:
            negatives = np.empty(0, dtype=np.int64)
    negatives = np.asarray(negatives, dtype=np.int64).reshape(1, -1)
    _kernels.sgns_pass(
        state.U, state.Phi,
        np.array([center], dtype=np.int64), np.array([context], dtype=np.int64),
        negatives, float(lr),
    )
    return state


def direct_step(network, U, lr, beta, psi_reg, delta):
    """Refresh the indicator, then take the direct and regularisation steps on ``U`` in place.

    Returns ``(direct_loss, regularization_loss, indicator)`` measured before the step.
    """
    indicator = update_indicator(network, U, delta) if network.n_edges else IndicatorState()
    L = laplacian(network, indicator)
    LU = L @ U
    d_loss = 2.0 * float(np.sum(U * LU))
    r_loss = regularization_loss(U)
    if beta > 0:
        # L is symmetric, so 2 (L + L^T) U = 4 L U
        U -= lr * beta * 4.0 * LU
    if psi_reg > 0:
        U -= lr * psi_reg * regularization_gradient(U)
    return d_loss, r_loss, indicator


def _check_finite(state, epoch):
    for name, M in (("U", state.U), ("Phi", state.Phi)):
        if not np.all(np.isfinite(M)):
            raise DivergenceError(epoch, f"non-finite entries in {name}")
        if np.max(np.abs(M), initial=0.0) > DIVERGENCE_LIMIT:
            raise DivergenceError(epoch, f"|{name}| exceeded {DIVERGENCE_LIMIT:g}")


def train(network, corpus, config=TrainConfig(), state=None, callback=None):
    """Learn embeddings for every network user; returns an EmbeddingState.

    ``state.history`` holds one EpochLog per epoch with the unified loss
    ``(1-beta)*L_id + beta*L_d + psi*||U||^2`` where ``L_d`` and the
    regulariser are measured at the start of the epoch and ``L_id`` is the
    sampled objective accumulated during the skip-gram pass.
    """
    n = network.n_users
    if state is None:
        state = init_embeddings(n, config.dim, config.seed)
    elif state.U.shape[0] != n:
        raise ConfigError("state rows do not match network users")

    pairs = np.empty((0, 2), dtype=np.int64) if corpus is None else np.asarray(corpus.context_pairs)
    if pairs.size:
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    use_indirect = config.beta < 1.0
    table = None
    if use_indirect:
        if pairs.size == 0 or not np.any(network.positive_degree > 0):
            warnings.warn("no skip-gram context pairs; training the direct term only", RuntimeWarning)
            use_indirect = False
        else:
            table = build_sampling_table(network)
    centers = np.ascontiguousarray(pairs[:, 0])
    contexts = np.ascontiguousarray(pairs[:, 1])
    rng = np.random.default_rng((config.seed, 1))
    workers = config.workers

    for epoch in range(config.epochs):
        lr = config.learning_rate_at(epoch)
        d_loss, r_loss, indicator = direct_step(network, state.U, lr, config.beta, config.psi_reg, config.delta)
        U = state.U

        id_loss = 0.0
        if use_indirect:
            negatives = table.draw(rng, (centers.size, config.kappa)) if config.kappa else \
                np.empty((centers.size, 0), dtype=np.int64)
            step = lr * (1.0 - config.beta)
            if workers > 1:
                id_loss = _kernels.sgns_pass_parallel(U, state.Phi, centers, contexts, negatives, step, workers * 4)
            else:
                id_loss = _kernels.sgns_pass(U, state.Phi, centers, contexts, negatives, step)

        _check_finite(state, epoch)
        total = (1.0 - config.beta) * id_loss + config.beta * d_loss + config.psi_reg * r_loss
        entry = EpochLog(epoch, lr, d_loss, float(id_loss), r_loss, total, int(indicator.deactivated.size))
        state.history.append(entry)
        if not math.isfinite(total):
            raise DivergenceError(epoch, "non-finite loss")
        log.debug("epoch %d lr=%.5f total=%.6g", epoch, lr, total)
        if callback is not None:
            callback(entry, state)
    return state


def save_embeddings(matrix, users, path, binary=False):
    """Text: header ``n K`` then ``user v1 .. vK`` rows. Binary: little-endian
    uint32 ``n, K`` followed by float32 rows in manifest order."""
    matrix = np.asarray(matrix)
    n, K = matrix.shape
    if len(users) != n:
        raise ConfigError("user manifest length differs from matrix rows")
    if binary:
        with open(path, "wb") as fh:
            fh.write(np.array([n, K], dtype="<u4").tobytes())
            fh.write(matrix.astype("<f4").tobytes())
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n} {K}\n")
        for u, row in zip(users, matrix):
            fh.write(u + " " + " ".join(repr(float(v)) for v in row) + "\n")


def load_embeddings(path, binary=False, users=None):
    """Inverse of save_embeddings; returns ``(user_ids, matrix)``.

    Binary files carry no ids, so ``users`` (the manifest) must be supplied.
    """
    if binary:
        raw = open(path, "rb").read()
        n, K = np.frombuffer(raw[:8], dtype="<u4")
        matrix = np.frombuffer(raw[8:], dtype="<f4").astype(np.float64).reshape(int(n), int(K))
        if users is None or len(users) != n:
            raise ConfigError("binary embeddings need a manifest with one id per row")
        return list(users), matrix
    with open(path, encoding="utf-8") as fh:
        n, K = (int(x) for x in fh.readline().split())
        ids, rows = [], []
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            ids.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    matrix = np.array(rows, dtype=np.float64).reshape(n, K)
    if len(ids) != n:
        raise ConfigError(f"{path}: header says {n} rows, found {len(ids)}")
    return ids, matrix
