"""Transaction datasets: CSV ingestion, region partitioning, splits, synthesis.

The canonical record schema is a flat tabular row (ids, timestamp, amount,
category, location, label) plus three latent signal columns. The latent
columns exist so that synthetic datasets keep their planted class signal
when round-tripped through CSV; ingested foreign data leaves them at zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

import numpy as np

from .errors import ConfigError, DuplicateIdError, RowError, SchemaError
from .seeding import derive_rng

FEATURE_DIM = 8

CANONICAL_COLUMNS = (
    "txn_id",
    "card_holder_id",
    "merchant_id",
    "timestamp",
    "amount",
    "category",
    "latitude",
    "longitude",
    "label",
    "latent_0",
    "latent_1",
    "latent_2",
)

_REQUIRED_FIELDS = CANONICAL_COLUMNS[:9]
_LATENT_FIELDS = CANONICAL_COLUMNS[9:]

# Synthetic generator constants. The class signal has a region-stable part
# (amount scale, category skew, fraud hour concentration) and a region-drifting
# part (latent class means rotated per region).
_N_CATEGORIES = 12
_CATEGORY_SCALE = _N_CATEGORIES - 1
_FRAUD_SLICE_BOOST = 4.0
_AMOUNT_LOG_MEAN_LEGIT = 3.3
_AMOUNT_LOG_MEAN_FRAUD = 4.2
_AMOUNT_LOG_STD = 0.8
_LATENT_SEP = 2.0
_ROTATION_PER_UNIT = math.pi / 2.0


@dataclass
class TransactionRecord:
    """One tabular transaction row."""

    txn_id: str
    card_holder_id: str
    merchant_id: str
    timestamp: datetime
    amount: float
    category: int
    latitude: float
    longitude: float
    label: int
    latent: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def hour_slice(self) -> int:
        """Hour-of-day time slice index in [0, 23]."""
        return self.timestamp.hour


@dataclass(frozen=True)
class RegionSpec:
    """A geographic box; latitudes in degrees north, longitudes in degrees west.

    Containment is half-open on the upper edge so adjacent boxes stay disjoint.
    """

    region_id: int
    lat_range: tuple[float, float]
    lon_range: tuple[float, float]

    def __post_init__(self):
        if not self.lat_range[0] < self.lat_range[1]:
            raise ConfigError(f"region {self.region_id}: lat_range min must be < max")
        if not self.lon_range[0] < self.lon_range[1]:
            raise ConfigError(f"region {self.region_id}: lon_range min must be < max")

    def contains(self, latitude: float, longitude: float) -> bool:
        lon_west = -longitude
        return (
            self.lat_range[0] <= latitude < self.lat_range[1]
            and self.lon_range[0] <= lon_west < self.lon_range[1]
        )


@dataclass
class Dataset:
    """An ordered list of records with provenance."""

    records: list[TransactionRecord]
    provenance: str = "ingested"
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.records)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def feature_matrix(self) -> np.ndarray:
        return featurize_records(self.records)


@dataclass(frozen=True)
class SyntheticConfig:
    n_regions: int = 3
    txns_per_region: int = 2000
    n_card_holders: int = 100
    n_merchants: int = 300
    fraud_rate: float = 0.1
    fraud_time_slices: frozenset[int] = frozenset({22, 23})
    region_shift_strength: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        for name in ("n_regions", "txns_per_region", "n_card_holders", "n_merchants"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 < self.fraud_rate < 1.0:
            raise ConfigError("fraud_rate must lie in (0, 1)")
        for h in self.fraud_time_slices:
            if not 0 <= int(h) <= 23:
                raise ConfigError("fraud_time_slices entries must be hours in [0, 23]")
        if self.region_shift_strength < 0:
            raise ConfigError("region_shift_strength must be nonnegative")


@dataclass
class RegionPartition:
    """Result of partitioning a dataset over region boxes."""

    regions: dict[int, Dataset]
    dropped: int


def _fractional_hour(ts: datetime) -> float:
    return ts.hour + ts.minute / 60.0 + ts.second / 3600.0


def featurize_record(record: TransactionRecord) -> np.ndarray:
    """Fixed 8-dim feature vector for one transaction.

    Layout: scaled amount, scaled log-amount, category score, hour-of-day
    sine/cosine, three latent signal dims.
    """
    h = _fractional_hour(record.timestamp)
    angle = 2.0 * math.pi * h / 24.0
    return np.array(
        [
            record.amount / 1000.0,
            math.log1p(record.amount) / 5.0,
            record.category / _CATEGORY_SCALE,
            math.sin(angle),
            math.cos(angle),
            record.latent[0],
            record.latent[1],
            record.latent[2],
        ],
        dtype=np.float64,
    )


def featurize_records(records: list[TransactionRecord]) -> np.ndarray:
    if not records:
        return np.zeros((0, FEATURE_DIM), dtype=np.float64)
    return np.stack([featurize_record(r) for r in records])


def _validate_record(rec: TransactionRecord, line: int) -> None:
    if rec.amount < 0:
        raise RowError(line, f"amount must be nonnegative, got {rec.amount}")
    if not -90.0 <= rec.latitude <= 90.0:
        raise RowError(line, f"latitude out of bounds: {rec.latitude}")
    if not -180.0 <= rec.longitude <= 180.0:
        raise RowError(line, f"longitude out of bounds: {rec.longitude}")
    if rec.label not in (0, 1):
        raise RowError(line, f"label must be 0 or 1, got {rec.label}")


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise RowError(line, f"cannot parse {column} value {text!r} as a number") from None


def _parse_int(text: str, line: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise RowError(line, f"cannot parse {column} value {text!r} as an integer") from None


def _parse_timestamp(text: str, line: int) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise RowError(line, f"cannot parse timestamp {text!r}") from None


def parse_transactions_csv(path, schema: dict[str, str] | None = None) -> Dataset:
    """Read a UTF-8 CSV with header into a Dataset.

    `schema` maps canonical field names to column names in the file; identity
    by default. The three latent columns are optional and default to zero.
    """
    mapping = {name: name for name in CANONICAL_COLUMNS}
    if schema:
        mapping.update(schema)

    records: list[TransactionRecord] = []
    seen_ids: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for canonical in _REQUIRED_FIELDS:
            if mapping[canonical] not in header:
                raise SchemaError(
                    f"column {mapping[canonical]!r} (for field {canonical!r}) missing from header"
                )
        have_latent = all(mapping[f] in header for f in _LATENT_FIELDS)
        for row in reader:
            line = reader.line_num
            latent = (0.0, 0.0, 0.0)
            if have_latent:
                latent = tuple(
                    _parse_float(row[mapping[f]], line, f) for f in _LATENT_FIELDS
                )
            rec = TransactionRecord(
                txn_id=row[mapping["txn_id"]],
                card_holder_id=row[mapping["card_holder_id"]],
                merchant_id=row[mapping["merchant_id"]],
                timestamp=_parse_timestamp(row[mapping["timestamp"]], line),
                amount=_parse_float(row[mapping["amount"]], line, "amount"),
                category=_parse_int(row[mapping["category"]], line, "category"),
                latitude=_parse_float(row[mapping["latitude"]], line, "latitude"),
                longitude=_parse_float(row[mapping["longitude"]], line, "longitude"),
                label=_parse_int(row[mapping["label"]], line, "label"),
                latent=latent,
            )
            _validate_record(rec, line)
            if rec.txn_id in seen_ids:
                raise DuplicateIdError(f"duplicate txn_id {rec.txn_id!r} at line {line}")
            seen_ids.add(rec.txn_id)
            records.append(rec)
    return Dataset(records=records, provenance="ingested")


def write_transactions_csv(ds: Dataset, path) -> None:
    """Serialize a dataset with the canonical schema; floats round-trip exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CANONICAL_COLUMNS)
        for r in ds.records:
            writer.writerow(
                [
                    r.txn_id,
                    r.card_holder_id,
                    r.merchant_id,
                    f"{r.timestamp:%Y-%m-%d %H:%M:%S}",
                    repr(r.amount),
                    r.category,
                    repr(r.latitude),
                    repr(r.longitude),
                    r.label,
                    repr(r.latent[0]),
                    repr(r.latent[1]),
                    repr(r.latent[2]),
                ]
            )


def _boxes_overlap(a: RegionSpec, b: RegionSpec) -> bool:
    lat = a.lat_range[0] < b.lat_range[1] and b.lat_range[0] < a.lat_range[1]
    lon = a.lon_range[0] < b.lon_range[1] and b.lon_range[0] < a.lon_range[1]
    return lat and lon


def partition_by_region(ds: Dataset, regions: list[RegionSpec]) -> RegionPartition:
    """Assign each record to the unique box containing it; count the rest as dropped."""
    for i, a in enumerate(regions):
        for b in regions[i + 1 :]:
            if _boxes_overlap(a, b):
                raise ConfigError(
                    f"regions {a.region_id} and {b.region_id} overlap"
                )
    buckets: dict[int, list[TransactionRecord]] = {r.region_id: [] for r in regions}
    dropped = 0
    for rec in ds.records:
        for spec in regions:
            if spec.contains(rec.latitude, rec.longitude):
                buckets[spec.region_id].append(rec)
                break
        else:
            dropped += 1
    out = {
        rid: Dataset(records=recs, provenance=ds.provenance, seed=ds.seed)
        for rid, recs in buckets.items()
    }
    return RegionPartition(regions=out, dropped=dropped)


def largest_remainder_sizes(n: int, ratios: tuple[float, ...]) -> list[int]:
    """Integer shares of n by the given ratios, exact cover, largest remainder."""
    raw = [n * r for r in ratios]
    base = [int(math.floor(x)) for x in raw]
    short = n - sum(base)
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def split_indices(
    n: int, ratios: tuple[float, float, float], seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sorted disjoint index sets covering range(n), sized by largest remainder."""
    if n == 0:
        raise ConfigError("cannot split an empty dataset")
    if any(r <= 0 for r in ratios):
        raise ConfigError("split ratios must be positive")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)}")
    sizes = largest_remainder_sizes(n, ratios)
    rng = derive_rng(seed, "split")
    perm = rng.permutation(n)
    cut1, cut2 = sizes[0], sizes[0] + sizes[1]
    return np.sort(perm[:cut1]), np.sort(perm[cut1:cut2]), np.sort(perm[cut2:])


def take(ds: Dataset, indices) -> Dataset:
    """Sub-dataset at the given record indices, order preserved."""
    return Dataset(
        records=[ds.records[int(i)] for i in indices],
        provenance=ds.provenance,
        seed=ds.seed,
    )


def split_train_val_test(
    ds: Dataset, ratios: tuple[float, float, float], seed: int
) -> tuple[Dataset, Dataset, Dataset]:
    """Random disjoint train/val/test cover with largest-remainder sizes."""
    train_idx, val_idx, test_idx = split_indices(len(ds), ratios, seed)
    return take(ds, train_idx), take(ds, val_idx), take(ds, test_idx)


def synthetic_region_specs(n_regions: int) -> list[RegionSpec]:
    """Disjoint latitude bands used by the synthetic generator."""
    return [
        RegionSpec(region_id=l, lat_range=(30.0 + 2 * l, 32.0 + 2 * l), lon_range=(90.0, 95.0))
        for l in range(n_regions)
    ]


def _fraud_probability_by_hour(cfg: SyntheticConfig) -> np.ndarray:
    """Per-hour fraud probability, boosted on the configured slices.

    Calibrated so the marginal over a uniform hour draw equals fraud_rate.
    """
    hours = np.arange(24)
    hot = np.isin(hours, sorted(cfg.fraud_time_slices))
    f = hot.mean()
    if f == 0.0:
        return np.full(24, cfg.fraud_rate)
    p_base = cfg.fraud_rate / (f * _FRAUD_SLICE_BOOST + (1.0 - f))
    p = np.where(hot, _FRAUD_SLICE_BOOST * p_base, p_base)
    return np.clip(p, 0.0, 1.0)


def _latent_class_means(region: int, shift_strength: float) -> tuple[np.ndarray, np.ndarray]:
    """Class means in latent space for one region.

    The fraud/legit separation direction starts at the x axis and, per
    region step, rotates by strength * 90 degrees through a cycling sequence
    of coordinate planes. Strength 0 keeps every region identical; strength
    1 makes consecutive regions' signal directions orthogonal, so training
    on a new region prunes the previous regions' signal pathways without
    ever reversing them.
    """
    theta = shift_strength * _ROTATION_PER_UNIT
    direction = np.array([1.0, 0.0, 0.0])
    for step in range(region):
        i, j = step % 3, (step + 1) % 3
        rotated = direction.copy()
        rotated[i] = math.cos(theta) * direction[i] - math.sin(theta) * direction[j]
        rotated[j] = math.sin(theta) * direction[i] + math.cos(theta) * direction[j]
        direction = rotated
    fraud_mean = _LATENT_SEP * direction
    return -fraud_mean, fraud_mean


def generate_synthetic(cfg: SyntheticConfig) -> list[Dataset]:
    """One dataset per region with planted, region-drifting class signal.

    Region-stable signal: fraud amounts run higher, fraud categories skew to
    high-score codes, fraud concentrates on the configured hour slices. The
    drifting signal lives in the latent dims, whose class means rotate by
    region so a model fit on one region degrades on the next.
    """
    cfg.validate()
    p_by_hour = _fraud_probability_by_hour(cfg)
    boxes = synthetic_region_specs(cfg.n_regions)
    scores = np.arange(_N_CATEGORIES) / _CATEGORY_SCALE
    fraud_cat_w = scores**2 + 0.05
    fraud_cat_w /= fraud_cat_w.sum()

    datasets: list[Dataset] = []
    for l in range(cfg.n_regions):
        rng = derive_rng(cfg.seed, "synth", l)
        n = cfg.txns_per_region
        holders = rng.integers(0, cfg.n_card_holders, size=n)
        merchants = rng.integers(0, cfg.n_merchants, size=n)
        days = rng.integers(0, 364, size=n)
        hours = rng.integers(0, 24, size=n)
        minutes = rng.integers(0, 60, size=n)
        seconds = rng.integers(0, 60, size=n)
        labels = (rng.random(n) < p_by_hour[hours]).astype(int)

        log_mean = np.where(labels == 1, _AMOUNT_LOG_MEAN_FRAUD, _AMOUNT_LOG_MEAN_LEGIT)
        amounts = np.exp(rng.normal(log_mean, _AMOUNT_LOG_STD))

        cats_legit = rng.integers(0, _N_CATEGORIES, size=n)
        cats_fraud = rng.choice(_N_CATEGORIES, size=n, p=fraud_cat_w)
        cats = np.where(labels == 1, cats_fraud, cats_legit)

        legit_mean, fraud_mean = _latent_class_means(l, cfg.region_shift_strength)
        means = np.where(labels[:, None] == 1, fraud_mean, legit_mean)
        latents = means + rng.standard_normal((n, 3))

        box = boxes[l]
        lats = rng.uniform(box.lat_range[0], box.lat_range[1], size=n)
        lons = -rng.uniform(box.lon_range[0], box.lon_range[1], size=n)

        base = datetime(2019, 1, 1)
        records = [
            TransactionRecord(
                txn_id=f"r{l}t{k:06d}",
                card_holder_id=f"r{l}c{holders[k]:04d}",
                merchant_id=f"r{l}m{merchants[k]:04d}",
                timestamp=base
                + timedelta(
                    days=int(days[k]),
                    hours=int(hours[k]),
                    minutes=int(minutes[k]),
                    seconds=int(seconds[k]),
                ),
                amount=float(amounts[k]),
                category=int(cats[k]),
                latitude=float(lats[k]),
                longitude=float(lons[k]),
                label=int(labels[k]),
                latent=(float(latents[k, 0]), float(latents[k, 1]), float(latents[k, 2])),
            )
            for k in range(n)
        ]
        datasets.append(Dataset(records=records, provenance="synthetic", seed=cfg.seed))
    return datasets


def emit_temporal_profile(ds: Dataset) -> np.ndarray:
    """24x2 contingency counts of (hour slice, label)."""
    counts = np.zeros((24, 2), dtype=np.int64)
    for r in ds.records:
        counts[r.hour_slice(), r.label] += 1
    return counts


def write_temporal_profile_csv(counts: np.ndarray, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour", "label", "count"])
        for hour in range(24):
            for label in (0, 1):
                writer.writerow([hour, label, int(counts[hour, label])])
