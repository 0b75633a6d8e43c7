"""Pairwise spam-campaign proximities between two reviewers.

Four proximities are computed from co-reviewed products and categories:
rating agreement and timing agreement, each at product and at category
granularity. They are mixed into the agreement score ``h_bar`` and scaled by
the co-review confidence into a signed edge weight.
"""

import math
from dataclasses import dataclass, astuple

from .errors import ConfigError, NoOverlapError, UndefinedConfidenceError
from .reviews import category_mean_rating, category_mean_time, mean_rating, mean_time

TIME_UNITS = {"span": None, "day": 86400.0, "hour": 3600.0, "second": 1.0}


@dataclass(frozen=True)
class FeatureConfig:
    alpha: tuple = (0.25, 0.25, 0.25, 0.25)
    # a float threshold, or "mean" to use the mean h_bar over candidate pairs
    zeta: object = 0.35
    gamma_tradeoff: float = 20.0
    smoothing_c: float = 1.0
    time_unit: str = "span"

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        check_alpha(self.alpha)
        if self.gamma_tradeoff <= 0:
            raise ConfigError("gamma_tradeoff must be positive")
        if self.smoothing_c <= 0:
            raise ConfigError("smoothing_c must be positive")
        if self.time_unit not in TIME_UNITS:
            raise ConfigError(f"time_unit must be one of {sorted(TIME_UNITS)}")
        if self.zeta != "mean":
            try:
                object.__setattr__(self, "zeta", float(self.zeta))
            except (TypeError, ValueError):
                raise ConfigError(f"zeta must be a number or 'mean', got {self.zeta!r}") from None


@dataclass(frozen=True)
class PairFeatures:
    psi_pr: float
    psi_pt: float
    psi_cr: float
    psi_ct: float
    h_bar: float
    eta_pi: float
    weight: float

    @property
    def psi(self):
        return (self.psi_pr, self.psi_pt, self.psi_cr, self.psi_ct)

    def as_tuple(self):
        return astuple(self)


def check_alpha(alpha):
    if len(alpha) != 4:
        raise ConfigError(f"alpha needs 4 weights, got {len(alpha)}")
    if any(a < 0 for a in alpha) or not math.isclose(sum(alpha), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ConfigError(f"alpha must be non-negative and sum to 1, got {alpha}")


def _logistic_proximity(gamma):
    try:
        return 2.0 / (1.0 + math.exp(gamma))
    except OverflowError:
        return 0.0


def _time_scale(dataset, config):
    unit = TIME_UNITS[config.time_unit]
    if unit is None:
        unit = float(dataset.span_length)
    return unit


def _mean_abs_deviation(keys, value_i, value_j):
    if not keys:
        raise NoOverlapError("pair has nothing in common")
    return sum(abs(value_i(k) - value_j(k)) for k in keys) / len(keys)


def _shared_products(dataset, u_i, u_j):
    shared = sorted(dataset.products_of(u_i) & dataset.products_of(u_j))
    if not shared:
        raise NoOverlapError(f"{u_i!r} and {u_j!r} share no product")
    return shared


def _shared_categories(dataset, u_i, u_j):
    shared = sorted(dataset.categories_of(u_i) & dataset.categories_of(u_j))
    if not shared:
        raise NoOverlapError(f"{u_i!r} and {u_j!r} share no category")
    return shared


def product_rating_deviation(dataset, u_i, u_j):
    return _mean_abs_deviation(
        _shared_products(dataset, u_i, u_j),
        lambda p: mean_rating(dataset, u_i, p),
        lambda p: mean_rating(dataset, u_j, p),
    )


def product_time_deviation(dataset, u_i, u_j, config):
    """Mean absolute gap of per-product mean review times, in ``config.time_unit``."""
    shared = _shared_products(dataset, u_i, u_j)
    scale = _time_scale(dataset, config)
    if scale <= 0:
        return 0.0
    raw = _mean_abs_deviation(
        shared,
        lambda p: mean_time(dataset, u_i, p),
        lambda p: mean_time(dataset, u_j, p),
    )
    return raw / scale


def category_rating_deviation(dataset, u_i, u_j):
    return _mean_abs_deviation(
        _shared_categories(dataset, u_i, u_j),
        lambda c: category_mean_rating(dataset, u_i, c),
        lambda c: category_mean_rating(dataset, u_j, c),
    )


def category_time_deviation(dataset, u_i, u_j, config):
    shared = _shared_categories(dataset, u_i, u_j)
    scale = _time_scale(dataset, config)
    if scale <= 0:
        return 0.0
    raw = _mean_abs_deviation(
        shared,
        lambda c: category_mean_time(dataset, u_i, c),
        lambda c: category_mean_time(dataset, u_j, c),
    )
    return raw / scale


def product_rating_proximity(dataset, u_i, u_j):
    return _logistic_proximity(product_rating_deviation(dataset, u_i, u_j))


def product_time_proximity(dataset, u_i, u_j, config=FeatureConfig()):
    gamma = product_time_deviation(dataset, u_i, u_j, config)
    return 1.0 / (config.smoothing_c + config.gamma_tradeoff * gamma)


def category_rating_proximity(dataset, u_i, u_j):
    return _logistic_proximity(category_rating_deviation(dataset, u_i, u_j))


def category_time_proximity(dataset, u_i, u_j, config=FeatureConfig()):
    gamma = category_time_deviation(dataset, u_i, u_j, config)
    return 1.0 / (config.smoothing_c + config.gamma_tradeoff * gamma)


def combine(psi, alpha):
    """Convex combination of the four proximities."""
    check_alpha(alpha)
    if len(psi) != 4:
        raise ConfigError(f"expected 4 proximities, got {len(psi)}")
    return sum(a * p for a, p in zip(alpha, psi))


def confidence(dataset, u_i, u_j):
    """Co-review overlap normalised by the geometric mean of both item counts."""
    p_i, p_j = dataset.products_of(u_i), dataset.products_of(u_j)
    if not p_i or not p_j:
        raise UndefinedConfidenceError(f"{u_i!r} or {u_j!r} has no reviews")
    # sqrt of the product is correctly rounded, so identical sets give exactly 1
    return len(p_i & p_j) / math.sqrt(len(p_i) * len(p_j))


def edge_weight(h_bar, eta_pi, zeta):
    return (h_bar - zeta) * eta_pi


def pair_features(dataset, u_i, u_j, config=FeatureConfig(), zeta=None):
    """All features of a co-reviewing pair.

    ``zeta`` overrides ``config.zeta``; it must be given when the config uses
    the ``"mean"`` threshold mode, since that mean depends on every pair.
    """
    if zeta is None:
        if config.zeta == "mean":
            raise ConfigError("zeta='mean' needs an explicit threshold per call")
        zeta = config.zeta
    psi = (
        product_rating_proximity(dataset, u_i, u_j),
        product_time_proximity(dataset, u_i, u_j, config),
        category_rating_proximity(dataset, u_i, u_j),
        category_time_proximity(dataset, u_i, u_j, config),
    )
    h_bar = combine(psi, config.alpha)
    eta = confidence(dataset, u_i, u_j)
    return PairFeatures(*psi, h_bar, eta, edge_weight(h_bar, eta, zeta))


def with_threshold(features, zeta):
    """Recompute the weight of already-computed features under a new threshold."""
    return PairFeatures(*features.psi, features.h_bar, features.eta_pi, edge_weight(features.h_bar, features.eta_pi, zeta))


def write_feature_dump(rows, path):
    """Write ``(user_i, user_j, PairFeatures)`` rows as comma-separated text."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user_i,user_j,psi_pr,psi_pt,psi_cr,psi_ct,h_bar,eta_pi,weight\n")
        for u_i, u_j, f in rows:
            fh.write(",".join([u_i, u_j] + [repr(v) for v in f.as_tuple()]) + "\n")
