"""Log ingestion and data preparation.

Raw CSV logs (five columns: Timestamp, CAN_ID, DLC, Data_Field, Label) are
parsed into records with per-field missing flags, cleaned, and turned into
length-16 feature vectors with deterministic train/validation/test splits.
Preparation runs in the fixed order cleaning -> integration -> transformation,
and normalization statistics always come from the training partition alone.

Feature layout (all components in [0, 1]):
  position 0      identifier, min-max normalized over the training split
  position 1      DLC, min-max normalized over the training split
  positions 2-9   first eight payload bytes scaled by 1/255 (zero padded)
  positions 10-15 zero padding up to the model input width
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .canbus import TrafficRecord

N_FEATURES = 16
PAYLOAD_WIDTH = 8

CONTAINER_MAGIC = b"CANIDS1"

IMPUTE_POLICIES = ("droprow", "fieldmean")


class EmptyInput(ValueError):
    """No data rows in the input."""


class InvalidHexDigit(ValueError):
    """String contains a character outside [0-9A-Fa-f]."""


class TooFewValues(ValueError):
    """Sample too small for the outlier test."""


class AllRowsMissing(ValueError):
    """A column required for mean imputation has no observed values."""


class LengthMismatch(ValueError):
    """Paired sequences differ in length."""


class ZeroVariance(ValueError):
    """Correlation undefined for a constant sequence."""


class EmptyColumn(ValueError):
    """Normalization fit needs at least one value per feature."""


class UnnormalizedInput(ValueError):
    """Normalization parameters do not cover the feature layout."""


class CorruptContainer(ValueError):
    """Dataset container fails structural validation."""


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RawRecord:
    """One parsed log row; ``None`` marks a missing/malformed field."""

    timestamp: float | None
    can_id_hex: str | None
    dlc: int | None
    data_hex: str | None
    label_text: str | None

    def missing_fields(self) -> frozenset[str]:
        missing = {
            name
            for name in ("timestamp", "can_id_hex", "dlc", "data_hex", "label_text")
            if getattr(self, name) is None
        }
        return frozenset(missing)


def _parse_timestamp(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def _parse_can_id(cell: str) -> str | None:
    cell = cell.strip()
    if cell.lower().startswith("0x"):
        cell = cell[2:]
    if not cell:
        return None
    try:
        int(cell, 16)
    except ValueError:
        return None
    return cell.upper()


def _parse_dlc(cell: str) -> int | None:
    try:
        value = int(cell)
    except ValueError:
        return None
    return value if value >= 0 else None


def _parse_data(cell: str, dlc: int | None) -> str | None:
    cell = cell.strip()
    if not cell:
        # an empty data field is legitimate only for a zero-length payload
        return "" if dlc == 0 else None
    tokens = cell.split()
    for tok in tokens:
        if len(tok) > 2:
            return None
        try:
            int(tok, 16)
        except ValueError:
            return None
    return " ".join(t.upper().zfill(2) for t in tokens)


def _parse_label(cell: str) -> str | None:
    cell = cell.strip()
    if cell in ("0", "1"):
        return cell
    if cell.lower() == "normal":
        return "0"
    if cell.lower() == "attack":
        return "1"
    return None


def parse_log(source: str | Iterable[str]) -> list[RawRecord]:
    """Parse comma-separated rows into RawRecords, row order preserved.

    The header row is optional. Malformed cells become missing flags instead
    of aborting; rows with neither an identifier nor a data field are dropped.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    records = []
    for i, row in enumerate(csv.reader(source)):
        if not row or all(not c.strip() for c in row):
            continue
        if i == 0 and row[0].strip().lower() == "timestamp":
            continue
        cells = [row[j] if j < len(row) else "" for j in range(5)]
        dlc = _parse_dlc(cells[2])
        rec = RawRecord(
            timestamp=_parse_timestamp(cells[0]),
            can_id_hex=_parse_can_id(cells[1]),
            dlc=dlc,
            data_hex=_parse_data(cells[3], dlc),
            label_text=_parse_label(cells[4]),
        )
        if rec.can_id_hex is None and not rec.data_hex:
            continue
        records.append(rec)
    if not records:
        raise EmptyInput("no data rows found")
    return records


_HEX_DIGITS = frozenset("0123456789abcdefABCDEF")


def hex_to_dec(text: str) -> int:
    """Exact base-16 value of a hex string, ignoring internal spaces.

    Arbitrary precision: payload fields of up to 19 bytes (152 bits) and
    beyond convert without loss. Only bare hex digits are accepted (no
    signs or 0x prefixes), so the result is always nonnegative.
    """
    cleaned = text.replace(" ", "")
    if not cleaned or not set(cleaned) <= _HEX_DIGITS:
        raise InvalidHexDigit(f"invalid hex string {text!r}")
    return int(cleaned, 16)


def dec_to_hex(value: int) -> str:
    """Canonical uppercase hex (no prefix, no leading zeros) of a nonnegative int."""
    if value < 0:
        raise ValueError("negative values have no hex representation here")
    return format(value, "X")


# ---------------------------------------------------------------------------
# Cleaning
# ---------------------------------------------------------------------------


def rosner_outliers(values: Sequence[float], max_outliers: int, alpha: float = 0.05) -> set[int]:
    """Indices flagged by the generalized extreme Studentized deviate test.

    Iteratively removes the point with the largest |x - mean| / sd, compares
    each test statistic against the Student-t critical value, and flags the
    largest prefix of removals whose statistic exceeds it. A sample with zero
    variance yields the empty set.
    """
    x = np.asarray(values, dtype=np.float64)
    n = len(x)
    if n < 25:
        raise TooFewValues(f"need at least 25 values, got {n}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not 1 <= max_outliers <= n - 2:
        raise ValueError("max_outliers must lie in [1, n - 2]")

    remaining = list(range(n))
    removed: list[int] = []
    statistics: list[tuple[float, float]] = []
    for i in range(1, max_outliers + 1):
        sub = x[remaining]
        sd = sub.std(ddof=1)
        if sd == 0:
            break
        dev = np.abs(sub - sub.mean())
        j = int(np.argmax(dev))
        r_i = dev[j] / sd
        m = n - i + 1  # sample size the statistic was computed on
        p = 1 - alpha / (2 * m)
        t = stats.t.ppf(p, m - 2)
        lam = (m - 1) * t / math.sqrt((m - 2 + t * t) * m)
        statistics.append((r_i, lam))
        removed.append(remaining.pop(j))

    flagged = 0
    for i, (r_i, lam) in enumerate(statistics, start=1):
        if r_i > lam:
            flagged = i
    return set(removed[:flagged])


def _label_int(text: str | None) -> int | None:
    if text in ("0", "1"):
        return int(text)
    return None


def _mean_or_raise(values: list[float], column: str) -> float:
    if not values:
        raise AllRowsMissing(f"cannot impute {column}: no observed values")
    return float(np.mean(values))


def impute_missing(records: Sequence[RawRecord], policy: str = "droprow") -> list[RawRecord]:
    """Resolve missing flags: drop flagged rows, or fill them with column means.

    ``fieldmean`` imputes the timestamp, identifier, DLC, and label from
    rounded column means, and the data field byte-wise from per-position
    means (positions never observed fall back to zero).
    """
    if policy not in IMPUTE_POLICIES:
        raise ValueError(f"unknown imputation policy {policy!r}")
    if policy == "droprow":
        return [r for r in records if not r.missing_fields()]

    if not any(r.missing_fields() for r in records):
        return list(records)

    ts = [r.timestamp for r in records if r.timestamp is not None]
    ids = [hex_to_dec(r.can_id_hex) for r in records if r.can_id_hex is not None]
    dlcs = [r.dlc for r in records if r.dlc is not None]
    labels = [v for r in records if (v := _label_int(r.label_text)) is not None]
    position_values: dict[int, list[int]] = {}
    for r in records:
        if r.data_hex:
            for pos, tok in enumerate(r.data_hex.split()):
                position_values.setdefault(pos, []).append(int(tok, 16))

    out = []
    for r in records:
        if not r.missing_fields():
            out.append(r)
            continue
        dlc = r.dlc if r.dlc is not None else round(_mean_or_raise(dlcs, "DLC"))
        data_hex = r.data_hex
        if data_hex is None:
            if dlc > 0 and not position_values:
                raise AllRowsMissing("cannot impute Data_Field: no observed values")
            means = [
                round(np.mean(position_values[p])) if p in position_values else 0
                for p in range(dlc)
            ]
            data_hex = " ".join(f"{int(b):02X}" for b in means)
        label_text = r.label_text
        if label_text is None:
            label_text = "1" if _mean_or_raise(labels, "Label") >= 0.5 else "0"
        can_id_hex = r.can_id_hex
        if can_id_hex is None:
            can_id_hex = dec_to_hex(round(_mean_or_raise(ids, "CAN_ID")))
        timestamp = r.timestamp
        if timestamp is None:
            timestamp = _mean_or_raise(ts, "Timestamp")
        out.append(RawRecord(timestamp, can_id_hex, dlc, data_hex, label_text))
    return out


# ---------------------------------------------------------------------------
# Integration (correlation analysis)
# ---------------------------------------------------------------------------


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation sum((x-mx)(y-my)) / sqrt(ssx * ssy)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"lengths differ: {x.shape} vs {y.shape}")
    if len(x) < 2:
        raise LengthMismatch("need at least two observations")
    dx = x - x.mean()
    dy = y - y.mean()
    ssx = float(dx @ dx)
    ssy = float(dy @ dy)
    if ssx == 0 or ssy == 0:
        raise ZeroVariance("correlation undefined for a constant sequence")
    return float(dx @ dy) / math.sqrt(ssx * ssy)


@dataclass(frozen=True)
class CorrelationResult:
    names: tuple[str, ...]
    r: np.ndarray  # symmetric, unit diagonal
    p: np.ndarray  # two-sided t-test p-values, zero diagonal
    significant: np.ndarray  # p < alpha, diagonal excluded


def correlation_matrix(columns: Mapping[str, Sequence[float]], alpha: float = 0.05) -> CorrelationResult:
    """Pairwise correlations with two-sided significance flags (p < alpha)."""
    names = tuple(columns)
    arrays = [np.asarray(columns[name], dtype=np.float64) for name in names]
    k = len(names)
    n = len(arrays[0]) if arrays else 0
    r = np.eye(k)
    p = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            rij = pearson(arrays[i], arrays[j])
            t = rij * math.sqrt((n - 2) / max(1 - rij * rij, 1e-300))
            pij = 2 * float(stats.t.sf(abs(t), n - 2))
            r[i, j] = r[j, i] = rij
            p[i, j] = p[j, i] = pij
    significant = (p < alpha) & ~np.eye(k, dtype=bool)
    return CorrelationResult(names, r, p, significant)


# ---------------------------------------------------------------------------
# Transformation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizationParams:
    """Per-feature (min, max) pairs for min-max scaling."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mins", np.asarray(self.mins, dtype=np.float64))
        object.__setattr__(self, "maxs", np.asarray(self.maxs, dtype=np.float64))
        if self.mins.shape != self.maxs.shape:
            raise ValueError("mins and maxs must have matching shapes")
        if np.any(self.maxs < self.mins):
            raise ValueError("feature max must be >= feature min")


def fit_minmax(columns: np.ndarray) -> NormalizationParams:
    """Column-wise (min, max) over a 2-D sample array."""
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim != 2 or columns.shape[0] == 0:
        raise EmptyColumn("fit requires a non-empty 2-D array")
    return NormalizationParams(columns.min(axis=0), columns.max(axis=0))


def apply_minmax(values: np.ndarray, params: NormalizationParams) -> np.ndarray:
    """(x - min) / (max - min), clamped into [0, 1]; degenerate features map to 0."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] != params.mins.shape[0]:
        raise UnnormalizedInput(
            f"params cover {params.mins.shape[0]} features, input has {values.shape[-1]}"
        )
    span = params.maxs - params.mins
    safe = np.where(span == 0, 1.0, span)
    out = (values - params.mins) / safe
    out = np.where(span == 0, 0.0, out)
    return np.clip(out, 0.0, 1.0)


@dataclass
class RecordTable:
    """Columnar view of cleaned records; payload truncated/padded to 8 bytes.

    ``data_value`` keeps the full data field as one decimal number (float64)
    for correlation analysis, independent of the truncated byte matrix.
    """

    timestamp: np.ndarray
    can_id: np.ndarray
    dlc: np.ndarray
    payload: np.ndarray
    data_value: np.ndarray
    label: np.ndarray
    kind: np.ndarray

    def __len__(self) -> int:
        return len(self.label)

    @classmethod
    def from_raw(cls, records: Sequence[RawRecord], kinds: Sequence[str] | None = None) -> "RecordTable":
        if not records:
            raise EmptyInput("no records to tabulate")
        if kinds is not None and len(kinds) != len(records):
            raise LengthMismatch("kinds sidecar length differs from record count")
        n = len(records)
        timestamp = np.zeros(n)
        can_id = np.zeros(n, dtype=np.int64)
        dlc = np.zeros(n, dtype=np.int64)
        payload = np.zeros((n, PAYLOAD_WIDTH), dtype=np.uint8)
        data_value = np.zeros(n)
        label = np.zeros(n, dtype=np.uint8)
        for i, rec in enumerate(records):
            if rec.missing_fields():
                raise ValueError("records must be cleaned before tabulation")
            timestamp[i] = rec.timestamp
            can_id[i] = hex_to_dec(rec.can_id_hex)
            dlc[i] = rec.dlc
            if rec.data_hex:
                data = bytes(int(t, 16) for t in rec.data_hex.split())
                payload[i, : min(len(data), PAYLOAD_WIDTH)] = list(data[:PAYLOAD_WIDTH])
                data_value[i] = float(hex_to_dec(rec.data_hex))
            label[i] = _label_int(rec.label_text)
        kind = np.array(
            ["" if k == "normal" else k for k in kinds] if kinds is not None else [""] * n,
            dtype="<U8",
        )
        return cls(timestamp, can_id, dlc, payload, data_value, label, kind)

    @classmethod
    def from_traffic(cls, records: Sequence[TrafficRecord]) -> "RecordTable":
        if not records:
            raise EmptyInput("no records to tabulate")
        n = len(records)
        payload = np.zeros((n, PAYLOAD_WIDTH), dtype=np.uint8)
        data_value = np.zeros(n)
        for i, rec in enumerate(records):
            payload[i, : min(len(rec.payload), PAYLOAD_WIDTH)] = list(rec.payload[:PAYLOAD_WIDTH])
            if rec.payload:
                data_value[i] = float(int.from_bytes(rec.payload, "big"))
        return cls(
            timestamp=np.array([r.timestamp for r in records]),
            can_id=np.array([r.can_id for r in records], dtype=np.int64),
            dlc=np.array([r.dlc for r in records], dtype=np.int64),
            payload=payload,
            data_value=data_value,
            label=np.array([r.label for r in records], dtype=np.uint8),
            kind=np.array([r.kind for r in records], dtype="<U8"),
        )

    def take(self, idx: np.ndarray) -> "RecordTable":
        return RecordTable(
            self.timestamp[idx],
            self.can_id[idx],
            self.dlc[idx],
            self.payload[idx],
            self.data_value[idx],
            self.label[idx],
            self.kind[idx],
        )

    def feature_columns(self) -> dict[str, np.ndarray]:
        """Numeric columns for correlation analysis (data field as one decimal)."""
        return {
            "Timestamp": self.timestamp,
            "CAN_ID": self.can_id.astype(np.float64),
            "DLC": self.dlc.astype(np.float64),
            "Data_Field": self.data_value,
        }


def fit_feature_params(table: RecordTable) -> NormalizationParams:
    """Normalization for the 16-wide layout, fitted on the given (training) rows.

    Identifier and DLC ranges come from the data; payload byte positions are
    pinned to (0, 255) and the padding positions to (0, 1).
    """
    if len(table) == 0:
        raise EmptyColumn("cannot fit normalization on an empty table")
    mins = np.concatenate(
        ([table.can_id.min(), table.dlc.min()], np.zeros(PAYLOAD_WIDTH), np.zeros(6))
    )
    maxs = np.concatenate(
        ([table.can_id.max(), table.dlc.max()], np.full(PAYLOAD_WIDTH, 255.0), np.ones(6))
    )
    return NormalizationParams(mins, maxs)


def encode_table(table: RecordTable, params: NormalizationParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized record encoding: (n, 16) float64 features plus uint8 labels."""
    if params.mins.shape[0] != N_FEATURES:
        raise UnnormalizedInput(f"params must cover {N_FEATURES} features")
    n = len(table)
    raw = np.zeros((n, N_FEATURES))
    raw[:, 0] = table.can_id
    raw[:, 1] = table.dlc
    raw[:, 2 : 2 + PAYLOAD_WIDTH] = table.payload
    return apply_minmax(raw, params), table.label.copy()


def encode_record(record: TrafficRecord, params: NormalizationParams) -> tuple[np.ndarray, int]:
    """Single-record version of :func:`encode_table`."""
    table = RecordTable.from_traffic([record])
    x, y = encode_table(table, params)
    return x[0], int(y[0])


@dataclass
class PreparedDataset:
    """Encoded, normalized partitions plus the parameters that produced them."""

    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    norm: NormalizationParams
    provenance: str = ""
    seed: int = 0
    train_kind: np.ndarray = field(default_factory=lambda: np.array([], dtype="<U8"))
    val_kind: np.ndarray = field(default_factory=lambda: np.array([], dtype="<U8"))
    test_kind: np.ndarray = field(default_factory=lambda: np.array([], dtype="<U8"))

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train_y), len(self.val_y), len(self.test_y)

    def has_kinds(self) -> bool:
        return len(self.train_kind) == len(self.train_y) and len(self.train_y) > 0


def split_dataset(
    table: RecordTable,
    test_fraction: float = 0.2,
    val_fraction: float = 0.2,
    seed: int = 0,
    provenance: str = "",
) -> PreparedDataset:
    """Seeded shuffle, then floor-sized test split and validation re-split.

    The first floor(test_fraction * N) shuffled rows form the test set; the
    remainder is the training block, whose first floor(val_fraction * size)
    rows become validation. Normalization is fitted on the final training
    rows only and applied to all partitions.
    """
    n = len(table)
    if n == 0:
        raise EmptyInput("cannot split an empty table")
    if not 0 <= test_fraction < 1 or not 0 <= val_fraction < 1:
        raise ValueError("fractions must lie in [0, 1)")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = math.floor(test_fraction * n)
    test_idx = perm[:n_test]
    rest = perm[n_test:]
    n_val = math.floor(val_fraction * len(rest))
    val_idx = rest[:n_val]
    train_idx = rest[n_val:]

    train = table.take(train_idx)
    val = table.take(val_idx)
    test = table.take(test_idx)
    params = fit_feature_params(train)
    train_x, train_y = encode_table(train, params)
    val_x, val_y = encode_table(val, params)
    test_x, test_y = encode_table(test, params)
    return PreparedDataset(
        train_x,
        train_y,
        val_x,
        val_y,
        test_x,
        test_y,
        norm=params,
        provenance=provenance,
        seed=seed,
        train_kind=train.kind,
        val_kind=val.kind,
        test_kind=test.kind,
    )


# ---------------------------------------------------------------------------
# Container I/O
# ---------------------------------------------------------------------------


def save_dataset(ds: PreparedDataset, path: str | Path) -> None:
    """Write the flat binary container, a manifest, and (if known) a kinds sidecar.

    Container layout: magic "CANIDS1"; u64 feature count; u64 sizes of the
    train/validation/test partitions; per partition the row-major float64
    feature matrix followed by a uint8 label array; 16 (min, max) float64
    pairs of the normalization parameters. All integers little-endian.
    """
    path = Path(path)
    parts = [
        (ds.train_x, ds.train_y),
        (ds.val_x, ds.val_y),
        (ds.test_x, ds.test_y),
    ]
    with open(path, "wb") as fh:
        fh.write(CONTAINER_MAGIC)
        fh.write(struct.pack("<4Q", N_FEATURES, *(len(y) for _, y in parts)))
        for x, y in parts:
            fh.write(np.ascontiguousarray(x, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(y, dtype=np.uint8).tobytes())
        pairs = np.column_stack([ds.norm.mins, ds.norm.maxs]).ravel()
        fh.write(np.ascontiguousarray(pairs, dtype="<f8").tobytes())

    manifest = path.with_name(path.name + ".manifest")
    sizes = ds.sizes()
    manifest.write_text(
        "format=CANIDS1\n"
        f"source={ds.provenance}\n"
        f"seed={ds.seed}\n"
        f"features={N_FEATURES}\n"
        f"train={sizes[0]}\nvalidation={sizes[1]}\ntest={sizes[2]}\n"
    )
    if ds.has_kinds():
        with open(path.with_name(path.name + ".kinds"), "w") as fh:
            for partition, kinds in (
                ("train", ds.train_kind),
                ("validation", ds.val_kind),
                ("test", ds.test_kind),
            ):
                for kind in kinds:
                    fh.write(f"{partition},{kind or 'normal'}\n")


def load_dataset(path: str | Path) -> PreparedDataset:
    path = Path(path)
    blob = path.read_bytes()
    if blob[: len(CONTAINER_MAGIC)] != CONTAINER_MAGIC:
        raise CorruptContainer(f"{path} has no CANIDS1 magic")
    off = len(CONTAINER_MAGIC)
    try:
        n_feat, n_train, n_val, n_test = struct.unpack_from("<4Q", blob, off)
    except struct.error as exc:
        raise CorruptContainer(str(exc)) from None
    off += 32
    if n_feat != N_FEATURES:
        raise CorruptContainer(f"unexpected feature width {n_feat}")
    expected = off + sum(n * (8 * n_feat + 1) for n in (n_train, n_val, n_test)) + 16 * n_feat
    if len(blob) != expected:
        raise CorruptContainer(f"size mismatch: {len(blob)} bytes, expected {expected}")

    def read_part(count: int) -> tuple[np.ndarray, np.ndarray]:
        nonlocal off
        x = np.frombuffer(blob, dtype="<f8", count=count * n_feat, offset=off)
        off += 8 * count * n_feat
        y = np.frombuffer(blob, dtype=np.uint8, count=count, offset=off)
        off += count
        return x.reshape(count, n_feat).copy(), y.copy()

    train_x, train_y = read_part(n_train)
    val_x, val_y = read_part(n_val)
    test_x, test_y = read_part(n_test)
    pairs = np.frombuffer(blob, dtype="<f8", count=2 * n_feat, offset=off).reshape(n_feat, 2)
    norm = NormalizationParams(pairs[:, 0].copy(), pairs[:, 1].copy())

    ds = PreparedDataset(train_x, train_y, val_x, val_y, test_x, test_y, norm=norm)
    manifest = path.with_name(path.name + ".manifest")
    if manifest.exists():
        meta = dict(
            line.split("=", 1) for line in manifest.read_text().splitlines() if "=" in line
        )
        ds.provenance = meta.get("source", "")
        ds.seed = int(meta.get("seed", 0))
    kinds_path = path.with_name(path.name + ".kinds")
    if kinds_path.exists():
        per_part: dict[str, list[str]] = {"train": [], "validation": [], "test": []}
        for line in kinds_path.read_text().splitlines():
            partition, kind = line.split(",", 1)
            per_part[partition].append("" if kind == "normal" else kind)
        ds.train_kind = np.array(per_part["train"], dtype="<U8")
        ds.val_kind = np.array(per_part["validation"], dtype="<U8")
        ds.test_kind = np.array(per_part["test"], dtype="<U8")
        if ds.sizes() != tuple(len(per_part[p]) for p in ("train", "validation", "test")):
            raise CorruptContainer("kinds sidecar does not match partition sizes")
    return ds


def prepare_records(
    records: Sequence[TrafficRecord],
    test_fraction: float = 0.2,
    val_fraction: float = 0.2,
    seed: int = 0,
    provenance: str = "",
) -> PreparedDataset:
    """Convenience path from simulator records straight to a prepared dataset."""
    return split_dataset(
        RecordTable.from_traffic(records),
        test_fraction=test_fraction,
        val_fraction=val_fraction,
        seed=seed,
        provenance=provenance,
    )
