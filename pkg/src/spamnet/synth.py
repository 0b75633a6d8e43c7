"""Labeled synthetic review logs with planted collusive campaigns.

Normal users review random products at random times with ratings scattered
around a per-product base rating. Each campaign picks target products, a
short time window and a group of colluders; every colluder posts the policy
rating (max for promotion, min for demotion) on a random subset of the
targets inside the window. Colluders additionally post camouflage reviews
drawn exactly like normal ones.
"""

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError
from .reviews import Dataset, ReviewRecord, Schema

DAY = 86400


@dataclass(frozen=True)
class CampaignSpec:
    n_normal_users: int = 160
    n_colluders: int = 40
    n_campaigns: int = 4
    targets_per_campaign: int = 10
    campaign_window: int = 7 * DAY
    workload_balance: float = 0.5
    camouflage_rate: float = 5.0
    rating_policy: str = "promote"
    n_products: int = 400
    n_categories: int = 10
    observation_span: int = 365 * DAY
    seed: int = 0
    normal_reviews_mean: float = 8.0
    rating_noise: int = 1
    rating_min: int = 1
    rating_max: int = 5
    start_time: int = 1_600_000_000

    def __post_init__(self):
        if self.n_normal_users < 0 or self.n_colluders < 0:
            raise ConfigError("user counts must be >= 0")
        if self.n_normal_users + self.n_colluders < 1:
            raise ConfigError("need at least one user")
        if self.n_products < 1 or self.n_categories < 1:
            raise ConfigError("n_products and n_categories must be >= 1")
        if self.n_colluders > 0:
            if self.n_campaigns < 1 or self.targets_per_campaign < 1:
                raise ConfigError("colluders need n_campaigns >= 1 and targets_per_campaign >= 1")
            if self.targets_per_campaign > self.n_products:
                raise ConfigError("targets_per_campaign exceeds n_products")
        if not 0.0 <= self.workload_balance <= 1.0:
            raise ConfigError("workload_balance must lie in [0, 1]")
        if self.camouflage_rate < 0 or self.normal_reviews_mean < 1:
            raise ConfigError("camouflage_rate must be >= 0 and normal_reviews_mean >= 1")
        if self.rating_policy not in ("promote", "demote"):
            raise ConfigError("rating_policy must be 'promote' or 'demote'")
        if not 0 < self.campaign_window <= self.observation_span:
            raise ConfigError("campaign_window must lie in (0, observation_span]")
        if self.rating_min >= self.rating_max or self.rating_noise < 0 or self.start_time < 0:
            raise ConfigError("invalid rating scale, noise or start time")

    @property
    def schema(self):
        return Schema(rating_min=self.rating_min, rating_max=self.rating_max)

    @property
    def policy_rating(self):
        return self.rating_max if self.rating_policy == "promote" else self.rating_min


@dataclass(frozen=True)
class Campaign:
    targets: tuple
    start: int
    members: tuple


def campaign_workload(spec):
    """Number of campaign targets each colluder reviews (at least one)."""
    return max(1, int(math.floor(spec.workload_balance * spec.targets_per_campaign + 0.5)))


def _in_envelope(campaigns_by_product, product, t, rating, spec):
    if rating != spec.policy_rating:
        return False
    for c in campaigns_by_product.get(product, ()):
        if c.start <= t <= c.start + spec.campaign_window:
            return True
    return False


def generate(spec=CampaignSpec(), return_campaigns=False):
    """Build ``(Dataset, labels)``; labels map every user id to 1 (colluder) or 0."""
    rng = np.random.default_rng(spec.seed)
    n_users = spec.n_normal_users + spec.n_colluders
    ids = [f"u{k:05d}" for k in rng.permutation(n_users)]
    normal_ids, colluder_ids = ids[:spec.n_normal_users], ids[spec.n_normal_users:]
    products = [f"p{j:05d}" for j in range(spec.n_products)]
    category = {p: f"c{k:03d}" for p, k in zip(products, rng.integers(0, spec.n_categories, spec.n_products))}
    base = dict(zip(products, rng.integers(spec.rating_min, spec.rating_max + 1, spec.n_products)))

    campaigns = []
    if colluder_ids:
        groups = np.array_split(rng.permutation(len(colluder_ids)), spec.n_campaigns)
        latest = spec.observation_span - spec.campaign_window
        for g in groups:
            targets = tuple(products[j] for j in rng.choice(spec.n_products, spec.targets_per_campaign, replace=False))
            start = spec.start_time + int(rng.integers(0, latest + 1))
            campaigns.append(Campaign(targets, start, tuple(colluder_ids[k] for k in g)))
    by_product = {}
    for c in campaigns:
        for p in c.targets:
            by_product.setdefault(p, []).append(c)

    records = []

    def organic_review(user):
        p = products[int(rng.integers(spec.n_products))]
        r = int(np.clip(base[p] + rng.integers(-spec.rating_noise, spec.rating_noise + 1),
                        spec.rating_min, spec.rating_max))
        while True:
            t = spec.start_time + int(rng.integers(0, spec.observation_span + 1))
            if not _in_envelope(by_product, p, t, r, spec):
                break
        records.append(ReviewRecord(user, p, category[p], float(r), t))

    for user in normal_ids:
        for _ in range(1 + rng.poisson(spec.normal_reviews_mean - 1)):
            organic_review(user)

    workload = campaign_workload(spec)
    for c in campaigns:
        for user in c.members:
            for j in rng.choice(len(c.targets), workload, replace=False):
                p = c.targets[j]
                t = c.start + int(rng.integers(0, spec.campaign_window + 1))
                records.append(ReviewRecord(user, p, category[p], float(spec.policy_rating), t))
    for user in colluder_ids:
        for _ in range(rng.poisson(spec.camouflage_rate)):
            organic_review(user)

    records.sort(key=lambda r: (r.timestamp, r.user_id, r.product_id))
    labels = {u: 0 for u in normal_ids}
    labels.update({u: 1 for u in colluder_ids})
    dataset = Dataset(records, spec.schema)
    if return_campaigns:
        return dataset, labels, campaigns
    return dataset, labels


def write_spec(spec, path):
    with open(path, "w", encoding="utf-8") as fh:
        for f in fields(spec):
            fh.write(f"{f.name}={getattr(spec, f.name)}\n")


def read_spec(path):
    """Parse ``key=value`` lines; unknown keys are an error, missing keys keep defaults."""
    types = {f.name: f.type for f in fields(CampaignSpec)}
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
            kind = types[key]
            try:
                values[key] = value if kind in (str, "str") else (
                    float(value) if kind in (float, "float") else int(float(value)))
            except ValueError:
                raise ConfigError(f"{path}:{line_no}: bad value for {key}: {value!r}") from None
    return CampaignSpec(**values)
