"""JIT-compiled inner loops for skip-gram with negative sampling."""

import numpy as np
from numba import njit, prange


@njit(cache=True, inline="always")
def _log_sigmoid(x):
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@njit(cache=True, inline="always")
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    z = np.exp(x)
    return z / (1.0 + z)


@njit(cache=True, inline="always")
def _pair_step(U, Phi, c, ctx, negs, lr, coefs, grad_u):
    """One ascent step on log s(u.phi_ctx) + sum log s(-u.phi_n).

    All gradients are taken at the pre-update point; negatives equal to the
    context are skipped. Returns the pair's negative log-likelihood.
    """
    K = U.shape[1]
    kappa = negs.shape[0]
    u = U[c]
    loss = 0.0
    for t in range(kappa + 1):
        z = ctx if t == 0 else negs[t - 1]
        if t > 0 and z == ctx:
            coefs[t] = 0.0
            continue
        phi = Phi[z]
        s = 0.0
        for k in range(K):
            s += u[k] * phi[k]
        if t == 0:
            coefs[t] = lr * (1.0 - _sigmoid(s))
            loss -= _log_sigmoid(s)
        else:
            coefs[t] = -lr * _sigmoid(s)
            loss -= _log_sigmoid(-s)
    grad_u[:] = 0.0
    for t in range(kappa + 1):
        g = coefs[t]
        if g == 0.0:
            continue
        phi = Phi[ctx if t == 0 else negs[t - 1]]
        for k in range(K):
            grad_u[k] += g * phi[k]
    for t in range(kappa + 1):
        g = coefs[t]
        if g == 0.0:
            continue
        phi = Phi[ctx if t == 0 else negs[t - 1]]
        for k in range(K):
            phi[k] += g * u[k]
    for k in range(K):
        u[k] += grad_u[k]
    return loss


@njit(cache=True)
def sgns_pass(U, Phi, centers, contexts, negatives, lr):
    """Sequential pass over pairs in the given order (deterministic)."""
    kappa = negatives.shape[1]
    coefs = np.empty(kappa + 1)
    grad_u = np.empty(U.shape[1])
    total = 0.0
    for p in range(centers.shape[0]):
        total += _pair_step(U, Phi, centers[p], contexts[p], negatives[p], lr, coefs, grad_u)
    return total


@njit(cache=True, parallel=True)
def sgns_pass_parallel(U, Phi, centers, contexts, negatives, lr, n_chunks):
    """Lock-free pass: chunks of pairs update shared rows concurrently."""
    kappa = negatives.shape[1]
    m = centers.shape[0]
    partial = np.zeros(n_chunks)
    for ch in prange(n_chunks):
        coefs = np.empty(kappa + 1)
        grad_u = np.empty(U.shape[1])
        lo = ch * m // n_chunks
        hi = (ch + 1) * m // n_chunks
        acc = 0.0
        for p in range(lo, hi):
            acc += _pair_step(U, Phi, centers[p], contexts[p], negatives[p], lr, coefs, grad_u)
        partial[ch] = acc
    return partial.sum()
