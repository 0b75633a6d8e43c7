import numpy as np

from spamnet.network import network_from_edges
from spamnet.reviews import Dataset, ReviewRecord, Schema

# (name, passed, detail) rows printed after the session by conftest
ACCEPTANCE_RESULTS = []


def make_dataset(rows, **schema_kw):
    """Dataset from ``(user, product, category, rating, timestamp)`` tuples."""
    return Dataset([ReviewRecord(*r) for r in rows], Schema(**schema_kw) if schema_kw else None)


def random_network(rng, n_users, density=0.4, neg_fraction=0.4):
    users = [f"u{k:02d}" for k in range(n_users)]
    edges = []
    for i in range(n_users):
        for j in range(i + 1, n_users):
            if rng.random() < density:
                w = rng.uniform(0.05, 1.0)
                edges.append((users[i], users[j], -w if rng.random() < neg_fraction else w))
    return network_from_edges(users, edges)
