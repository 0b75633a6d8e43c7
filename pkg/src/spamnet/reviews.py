"""Review log ingestion and the per-user / per-product indexes built from it.

A review is a ``(user, product, category, rating, timestamp)`` tuple. A user
may review the same product several times (repeat purchases), so the user
index groups reviews per ``(user, product)`` pair and every downstream mean
is taken over such a group first.
"""

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    EmptyDatasetError,
    NotFoundError,
    ReviewParseError,
    ValidationError,
)

FIELDS = ("user_id", "product_id", "category_id", "rating", "timestamp")


@dataclass(frozen=True)
class ReviewRecord:
    user_id: str
    product_id: str
    category_id: str
    rating: float
    timestamp: int


@dataclass(frozen=True)
class Schema:
    """How to read a review file: rating scale, column order, delimiter."""

    rating_min: float = 1.0
    rating_max: float = 5.0
    columns: tuple = FIELDS
    delimiter: str = ","

    def __post_init__(self):
        if sorted(self.columns) != sorted(FIELDS):
            raise ValidationError(f"columns must be a permutation of {FIELDS}, got {self.columns}")
        if not self.rating_min < self.rating_max:
            raise ValidationError("rating_min must be below rating_max")


class Dataset:
    """Immutable set of reviews plus the indexes every feature reads.

    Attributes
    ----------
    records : tuple of ReviewRecord
    user_index : dict user -> dict product -> tuple of record positions
    product_index : dict product -> frozenset of reviewers
    category_index : dict product -> category
    time_span : (t_min, t_max)
    """

    def __init__(self, records, schema=None):
        schema = schema or Schema()
        self.schema = schema
        self.records = tuple(records)
        if not self.records:
            raise EmptyDatasetError("dataset has no reviews")

        user_index = defaultdict(lambda: defaultdict(list))
        product_index = defaultdict(set)
        category_index = {}
        for pos, rec in enumerate(self.records):
            _check_record(rec, schema, pos)
            known = category_index.setdefault(rec.product_id, rec.category_id)
            if known != rec.category_id:
                raise ValidationError(
                    f"product {rec.product_id!r} listed under categories {known!r} and {rec.category_id!r}"
                )
            user_index[rec.user_id][rec.product_id].append(pos)
            product_index[rec.product_id].add(rec.user_id)

        self.user_index = {u: {p: tuple(g) for p, g in groups.items()} for u, groups in user_index.items()}
        self.product_index = {p: frozenset(us) for p, us in product_index.items()}
        self.category_index = category_index
        stamps = [r.timestamp for r in self.records]
        self.time_span = (min(stamps), max(stamps))

        self._rating_mean = {}
        self._time_mean = {}
        self._user_categories = {}
        for u, groups in self.user_index.items():
            by_cat = defaultdict(list)
            for p, group in groups.items():
                self._rating_mean[u, p] = sum(self.records[k].rating for k in group) / len(group)
                self._time_mean[u, p] = sum(self.records[k].timestamp for k in group) / len(group)
                by_cat[category_index[p]].append(p)
            self._user_categories[u] = {c: tuple(ps) for c, ps in by_cat.items()}

    def __len__(self):
        return len(self.records)

    def __repr__(self):
        return f"Dataset({len(self.records)} reviews, {len(self.user_index)} users, {len(self.product_index)} products)"

    @property
    def users(self):
        """User ids in sorted order; this order defines network row indices."""
        return sorted(self.user_index)

    @property
    def products(self):
        return sorted(self.product_index)

    @property
    def span_length(self):
        return self.time_span[1] - self.time_span[0]

    def products_of(self, user):
        try:
            return self.user_index[user].keys()
        except KeyError:
            raise NotFoundError(f"unknown user {user!r}") from None

    def categories_of(self, user):
        try:
            return self._user_categories[user].keys()
        except KeyError:
            raise NotFoundError(f"unknown user {user!r}") from None

    def group(self, user, product):
        """Records posted by ``user`` on ``product``."""
        try:
            return [self.records[k] for k in self.user_index[user][product]]
        except KeyError:
            raise NotFoundError(f"user {user!r} never reviewed product {product!r}") from None


def _check_record(rec, schema, pos):
    for name in ("user_id", "product_id", "category_id"):
        if not getattr(rec, name):
            raise ValidationError(f"record {pos}: empty {name}")
    if not schema.rating_min <= rec.rating <= schema.rating_max:
        raise ValidationError(
            f"record {pos}: rating {rec.rating} outside [{schema.rating_min}, {schema.rating_max}]"
        )
    if rec.timestamp < 0:
        raise ValidationError(f"record {pos}: negative timestamp {rec.timestamp}")


def load_reviews(path, schema=None):
    """Read a delimiter-separated review file (first line is a header)."""
    schema = schema or Schema()
    path = Path(path)
    if not path.exists():
        raise NotFoundError(f"no such review file: {path}")
    order = {name: schema.columns.index(name) for name in FIELDS}
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        for line_no, row in enumerate(reader, start=1):
            if line_no == 1 or not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(FIELDS):
                raise ReviewParseError(line_no, f"expected {len(FIELDS)} fields, got {len(row)}")
            row = [f.strip() for f in row]
            try:
                rating = float(row[order["rating"]])
                timestamp = int(row[order["timestamp"]])
            except ValueError as exc:
                raise ReviewParseError(line_no, str(exc)) from None
            rec = ReviewRecord(
                row[order["user_id"]], row[order["product_id"]], row[order["category_id"]], rating, timestamp
            )
            try:
                _check_record(rec, schema, len(records))
            except ValidationError as exc:
                raise ValidationError(f"line {line_no}: {exc}") from None
            records.append(rec)
    if not records:
        raise EmptyDatasetError(f"{path} contains no reviews")
    return Dataset(records, schema)


def write_reviews(records, path, schema=None):
    schema = schema or Schema()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=schema.delimiter, lineterminator="\n")
        writer.writerow(schema.columns)
        for rec in records:
            values = {
                "user_id": rec.user_id,
                "product_id": rec.product_id,
                "category_id": rec.category_id,
                "rating": _fmt_rating(rec.rating),
                "timestamp": rec.timestamp,
            }
            writer.writerow([values[c] for c in schema.columns])


def _fmt_rating(r):
    return str(int(r)) if float(r).is_integer() else repr(float(r))


def load_labels(path, delimiter=","):
    """Read ``user_id,label`` lines into a dict user -> 0/1. A header is optional."""
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if not row:
                continue
            if len(row) != 2:
                raise ReviewParseError(line_no, f"expected 2 fields, got {len(row)}")
            user, value = row[0].strip(), row[1].strip()
            if value not in ("0", "1"):
                if line_no == 1:
                    continue
                raise ReviewParseError(line_no, f"label must be 0 or 1, got {value!r}")
            labels[user] = int(value)
    return labels


def write_labels(labels, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user_id,label\n")
        for user in sorted(labels):
            fh.write(f"{user},{int(labels[user])}\n")


def validate_labels(labels, dataset):
    missing = [u for u in labels if u not in dataset.user_index]
    if missing:
        raise ValidationError(f"{len(missing)} labeled users absent from dataset, e.g. {missing[:3]}")


def mean_rating(dataset, user, product):
    try:
        return dataset._rating_mean[user, product]
    except KeyError:
        raise NotFoundError(f"user {user!r} never reviewed product {product!r}") from None


def mean_time(dataset, user, product):
    try:
        return dataset._time_mean[user, product]
    except KeyError:
        raise NotFoundError(f"user {user!r} never reviewed product {product!r}") from None


def _category_mean(dataset, user, category, means):
    try:
        products = dataset._user_categories[user][category]
    except KeyError:
        raise NotFoundError(f"user {user!r} never reviewed category {category!r}") from None
    return sum(means[user, p] for p in products) / len(products)


def category_mean_rating(dataset, user, category):
    """Mean over the user's products in ``category`` of per-product mean ratings."""
    return _category_mean(dataset, user, category, dataset._rating_mean)


def category_mean_time(dataset, user, category):
    return _category_mean(dataset, user, category, dataset._time_mean)
