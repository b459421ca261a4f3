"""Tabular data pipeline: parse, encode, split and scale IDS corpora.

Two corpus formats are supported: the headerless 43-field NSL-KDD record
format and headered CIC-IDS flow CSVs. Both are encoded into a
:class:`FeatureTable` (float64 matrix + binary labels) driven by a
:class:`FeatureSchema` so that train/test encoding is deterministic and
leakage-free.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaError, SplitError

logger = logging.getLogger(__name__)

TABLE_FORMAT_VERSION = 1

# Canonical NSL-KDD feature order (41 features; label and difficulty follow).
NSLKDD_COLUMNS = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate",
    "srv_rerror_rate", "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate",
    "dst_host_count", "dst_host_srv_count", "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate", "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
)
NSLKDD_CATEGORICAL = ("protocol_type", "service", "flag")
NSLKDD_FIELD_COUNT = 43  # 41 features + attack name + difficulty


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # "numeric" | "categorical"
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")
        if self.kind == "categorical" and not self.categories:
            raise SchemaError(f"categorical column {self.name!r} has no categories")
        if self.kind == "numeric" and self.categories:
            raise SchemaError(f"numeric column {self.name!r} must not list categories")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered column descriptions; fixes the one-hot encoding layout."""

    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")

    @property
    def encoded_names(self) -> tuple[str, ...]:
        """Names of encoded matrix columns; one-hot members as ``col=cat``."""
        out: list[str] = []
        for col in self.columns:
            if col.kind == "numeric":
                out.append(col.name)
            else:
                out.extend(f"{col.name}={cat}" for cat in col.categories)
        return tuple(out)

    @property
    def encoded_width(self) -> int:
        return sum(1 if c.kind == "numeric" else len(c.categories) for c in self.columns)

    def numeric_mask(self) -> np.ndarray:
        """Boolean mask over encoded columns: True where the origin column is numeric."""
        mask: list[bool] = []
        for col in self.columns:
            if col.kind == "numeric":
                mask.append(True)
            else:
                mask.extend([False] * len(col.categories))
        return np.array(mask, dtype=bool)

    def to_dict(self) -> dict:
        return {
            "format_version": TABLE_FORMAT_VERSION,
            "columns": [
                {"name": c.name, "kind": c.kind, "categories": list(c.categories)}
                for c in self.columns
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(tuple(
            Column(c["name"], c["kind"], tuple(c.get("categories", ())))
            for c in d["columns"]
        ))


@dataclass(frozen=True)
class FeatureTable:
    """Encoded dataset: N x D float matrix, binary labels, original row ids.

    Immutable after construction; ``rows`` is marked read-only so tables can
    be shared across threads.
    """

    schema: FeatureSchema
    rows: np.ndarray
    labels: np.ndarray
    row_ids: np.ndarray

    def __post_init__(self):
        rows = np.ascontiguousarray(np.asarray(self.rows, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64)
        row_ids = np.asarray(self.row_ids, dtype=np.int64)
        if rows.ndim != 2:
            raise SchemaError("rows must be a 2-D matrix")
        if rows.shape[0] != labels.shape[0] or rows.shape[0] != row_ids.shape[0]:
            raise SchemaError("rows, labels and row_ids must have equal length")
        if rows.shape[1] != self.schema.encoded_width:
            raise SchemaError(
                f"row width {rows.shape[1]} != schema encoded width {self.schema.encoded_width}"
            )
        if rows.size and not np.isfinite(rows).all():
            raise SchemaError("table contains non-finite values")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise SchemaError("labels must be binary 0/1")
        rows.flags.writeable = False
        labels.flags.writeable = False
        row_ids.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "row_ids", row_ids)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def width(self) -> int:
        return self.rows.shape[1]

    def column_index(self, encoded_name: str) -> int:
        try:
            return self.schema.encoded_names.index(encoded_name)
        except ValueError:
            raise SchemaError(f"no encoded column named {encoded_name!r}") from None

    def column(self, encoded_name: str) -> np.ndarray:
        return self.rows[:, self.column_index(encoded_name)]

    def select(self, mask: np.ndarray) -> "FeatureTable":
        """Row subset; mask may be boolean or an index array."""
        return FeatureTable(self.schema, self.rows[mask], self.labels[mask], self.row_ids[mask])

    def with_rows(self, rows: np.ndarray) -> "FeatureTable":
        """Same labels/ids with a replaced value matrix (e.g. after perturbation)."""
        return FeatureTable(self.schema, rows, self.labels, self.row_ids)

    def benign(self) -> "FeatureTable":
        return self.select(self.labels == 0)

    def malicious(self) -> "FeatureTable":
        return self.select(self.labels == 1)


@dataclass(frozen=True)
class SplitSpec:
    mode: str  # "ordered-halves" | "canonical-train-test" | "stratified-random"
    fraction: float = 0.5
    seed: int = 0

    _MODES = ("ordered-halves", "canonical-train-test", "stratified-random")

    def __post_init__(self):
        if self.mode not in self._MODES:
            raise SplitError(f"unknown split mode {self.mode!r}")
        if not (0.0 < self.fraction < 1.0):
            raise SplitError(f"fraction must be in (0, 1), got {self.fraction}")


@dataclass(frozen=True)
class ScalerParams:
    """Per-encoded-column affine transform fitted on training data."""

    offset: np.ndarray  # subtracted
    scale: np.ndarray   # divided by (1.0 where the column passes through)

    def apply(self, rows: np.ndarray) -> np.ndarray:
        return (rows - self.offset) / self.scale


def split(table: FeatureTable, spec: SplitSpec) -> tuple[FeatureTable, FeatureTable]:
    """Partition a table into two disjoint parts per the split spec.

    ordered-halves takes the first ceil(fraction * N) rows in row_id order
    with no shuffling; stratified-random samples each class separately with
    the configured seed so class proportions in each part stay within one
    row of the overall proportion. canonical-train-test is a two-file
    protocol and cannot be produced from a single table.
    """
    if table.n == 0:
        raise SplitError("cannot split an empty table")
    if spec.mode == "canonical-train-test":
        raise SplitError("canonical-train-test uses separate train/test files, not split()")

    if spec.mode == "ordered-halves":
        order = np.argsort(table.row_ids, kind="stable")
        n_first = math.ceil(spec.fraction * table.n)
        first_idx, second_idx = order[:n_first], order[n_first:]
    else:  # stratified-random
        rng = np.random.default_rng(spec.seed)
        first_parts: list[np.ndarray] = []
        second_parts: list[np.ndarray] = []
        for cls in (0, 1):
            cls_idx = np.flatnonzero(table.labels == cls)
            if cls_idx.size == 0:
                continue
            take = int(round(spec.fraction * cls_idx.size))
            perm = rng.permutation(cls_idx.size)
            first_parts.append(cls_idx[perm[:take]])
            second_parts.append(cls_idx[perm[take:]])
        first_idx = np.sort(np.concatenate(first_parts))
        second_idx = np.sort(np.concatenate(second_parts))

    if first_idx.size == 0 or second_idx.size == 0:
        raise SplitError(
            f"split would produce an empty part (N={table.n}, fraction={spec.fraction})"
        )
    return table.select(first_idx), table.select(second_idx)


def standardize(
    train: FeatureTable, others: list[FeatureTable] | None = None
) -> tuple[FeatureTable, list[FeatureTable], ScalerParams]:
    """Scale numeric columns to (x - mean) / std using train statistics only.

    One-hot columns and zero-variance columns pass through unchanged. The
    same fitted params are applied to every table in ``others``.
    """
    if train.n == 0:
        raise SchemaError("cannot standardize an empty training table")
    others = others or []
    for other in others:
        if other.schema.encoded_names != train.schema.encoded_names:
            raise SchemaError("standardize: schema mismatch between tables")

    numeric = train.schema.numeric_mask()
    mean = train.rows.mean(axis=0)
    std = train.rows.std(axis=0)
    active = numeric & (std > 0.0)
    offset = np.where(active, mean, 0.0)
    scale = np.where(active, std, 1.0)
    params = ScalerParams(offset=offset, scale=scale)

    scaled_train = train.with_rows(params.apply(train.rows))
    scaled_others = [t.with_rows(params.apply(t.rows)) for t in others]
    return scaled_train, scaled_others, params


# ---------------------------------------------------------------------------
# NSL-KDD loader
# ---------------------------------------------------------------------------

def _read_lines(path: str | Path) -> list[str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return [ln for ln in text.splitlines() if ln.strip()]


def _fit_nslkdd_schema(records: list[list[str]]) -> FeatureSchema:
    columns: list[Column] = []
    for i, name in enumerate(NSLKDD_COLUMNS):
        if name in NSLKDD_CATEGORICAL:
            cats = tuple(sorted({rec[i] for rec in records}))
            columns.append(Column(name, "categorical", cats))
        else:
            columns.append(Column(name, "numeric"))
    return FeatureSchema(tuple(columns))


def _encode_records(
    records: list[list[str]],
    schema: FeatureSchema,
    path: str | Path,
) -> np.ndarray:
    n = len(records)
    rows = np.zeros((n, schema.encoded_width), dtype=np.float64)
    unseen = 0
    j = 0
    for i, col in enumerate(schema.columns):
        if col.kind == "numeric":
            for r, rec in enumerate(records):
                try:
                    rows[r, j] = float(rec[i])
                except ValueError:
                    raise ParseError(
                        f"{path}: line {r + 1}: bad numeric value {rec[i]!r} in column {col.name!r}"
                    ) from None
            j += 1
        else:
            index = {cat: j + k for k, cat in enumerate(col.categories)}
            for r, rec in enumerate(records):
                pos = index.get(rec[i])
                if pos is None:
                    unseen += 1  # unseen category encodes as all-zeros
                else:
                    rows[r, pos] = 1.0
            j += len(col.categories)
    if unseen:
        logger.warning("%s: %d categorical values unseen at schema fit; encoded as zeros",
                       path, unseen)
    return rows


def load_nslkdd(path: str | Path, schema: FeatureSchema | None = None) -> FeatureTable:
    """Load a headerless 43-field NSL-KDD file into an encoded table.

    Args:
        path: CSV file with 41 features, an attack-name label and a
            difficulty score per line.
        schema: pass the schema fitted on training data to encode a test
            file identically (unseen categories become all-zero one-hots);
            None fits a fresh schema from this file.

    Returns:
        FeatureTable with protocol_type/service/flag one-hot encoded, the
        label mapped to 0 for "normal" and 1 otherwise, and the difficulty
        column dropped.
    """
    lines = _read_lines(path)
    records: list[list[str]] = []
    labels = np.zeros(len(lines), dtype=np.int64)
    for ln_no, line in enumerate(lines, start=1):
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != NSLKDD_FIELD_COUNT:
            raise ParseError(
                f"{path}: line {ln_no}: expected {NSLKDD_FIELD_COUNT} fields, got {len(fields)}"
            )
        records.append(fields[:41])
        labels[ln_no - 1] = 0 if fields[41] == "normal" else 1

    if schema is None:
        schema = _fit_nslkdd_schema(records)
    else:
        names = tuple(c.name for c in schema.columns)
        if names != NSLKDD_COLUMNS:
            raise SchemaError("schema does not match the NSL-KDD column set")
    rows = _encode_records(records, schema, path)
    return FeatureTable(schema, rows, labels, np.arange(len(records), dtype=np.int64))


# ---------------------------------------------------------------------------
# CIC-IDS loader
# ---------------------------------------------------------------------------

_CICIDS_NAN_TOKENS = {"nan", ""}
_CICIDS_POS_INF_TOKENS = {"infinity", "inf"}
_CICIDS_NEG_INF_TOKENS = {"-infinity", "-inf"}


def load_cicids(path: str | Path, schema: FeatureSchema | None = None) -> FeatureTable:
    """Load a headered CIC-IDS flow CSV into an encoded table.

    All non-label columns are numeric. "Infinity" cells become the column's
    finite maximum, "-Infinity" the finite minimum, and "NaN"/empty cells the
    column median of finite values; the "Label" column maps BENIGN to 0 and
    everything else to 1. Column names are stripped of surrounding
    whitespace.
    """
    lines = _read_lines(path)
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if "Label" not in header:
        raise SchemaError(f"{path}: missing required 'Label' column")
    label_pos = header.index("Label")
    feature_names = [h for i, h in enumerate(header) if i != label_pos]

    if schema is None:
        schema = FeatureSchema(tuple(Column(name, "numeric") for name in feature_names))
    else:
        if tuple(c.name for c in schema.columns) != tuple(feature_names):
            raise SchemaError(f"{path}: header does not match the provided schema")

    n = len(lines) - 1
    rows = np.zeros((n, len(feature_names)), dtype=np.float64)
    labels = np.zeros(n, dtype=np.int64)
    for r, line in enumerate(lines[1:]):
        fields = line.split(",")
        if len(fields) != len(header):
            raise ParseError(
                f"{path}: line {r + 2}: expected {len(header)} fields, got {len(fields)}"
            )
        labels[r] = 0 if fields[label_pos].strip() == "BENIGN" else 1
        c = 0
        for i, tok in enumerate(fields):
            if i == label_pos:
                continue
            t = tok.strip()
            low = t.lower()
            if low in _CICIDS_NAN_TOKENS:
                rows[r, c] = np.nan
            elif low in _CICIDS_POS_INF_TOKENS:
                rows[r, c] = np.inf
            elif low in _CICIDS_NEG_INF_TOKENS:
                rows[r, c] = -np.inf
            else:
                try:
                    rows[r, c] = float(t)
                except ValueError:
                    raise ParseError(
                        f"{path}: line {r + 2}: bad numeric value {tok!r} "
                        f"in column {feature_names[c]!r}"
                    ) from None
            c += 1

    # Sentinel replacement per column: median for NaN, finite extrema for +-Inf.
    for c in range(rows.shape[1]):
        col = rows[:, c]
        finite = col[np.isfinite(col)]
        if finite.size == 0:
            rows[:, c] = 0.0
            continue
        col[np.isnan(col)] = float(np.median(finite))
        col[col == np.inf] = float(finite.max())
        col[col == -np.inf] = float(finite.min())

    return FeatureTable(schema, rows, labels, np.arange(n, dtype=np.int64))


# ---------------------------------------------------------------------------
# Canonical table serialization: CSV + JSON schema sidecar
# ---------------------------------------------------------------------------

def _schema_sidecar(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".schema.json")


def save_table(table: FeatureTable, path: str | Path) -> None:
    """Write the canonical serialized form: a CSV plus a schema sidecar.

    The CSV holds row_id, label and every encoded column with full
    round-trip float precision; ``<path>.schema.json`` records the schema
    and format version. Output is byte-deterministic for a given table.
    """
    path = Path(path)
    names = table.schema.encoded_names
    lines = ["row_id,label," + ",".join(names)]
    for i in range(table.n):
        vals = ",".join(repr(float(v)) for v in table.rows[i])
        lines.append(f"{int(table.row_ids[i])},{int(table.labels[i])},{vals}")
    path.write_text("\n".join(lines) + "\n")
    _schema_sidecar(path).write_text(json.dumps(table.schema.to_dict(), indent=2) + "\n")


def load_table(path: str | Path) -> FeatureTable:
    """Load a table written by :func:`save_table`."""
    path = Path(path)
    try:
        meta = json.loads(_schema_sidecar(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {_schema_sidecar(path)}: {exc}") from exc
    if meta.get("format_version") != TABLE_FORMAT_VERSION:
        raise SchemaError(f"{path}: unsupported table format version {meta.get('format_version')}")
    schema = FeatureSchema.from_dict(meta)
    lines = _read_lines(path)
    expected_header = "row_id,label," + ",".join(schema.encoded_names)
    if not lines or lines[0] != expected_header:
        raise ParseError(f"{path}: header does not match schema sidecar")
    n = len(lines) - 1
    rows = np.zeros((n, schema.encoded_width), dtype=np.float64)
    labels = np.zeros(n, dtype=np.int64)
    row_ids = np.zeros(n, dtype=np.int64)
    for r, line in enumerate(lines[1:]):
        fields = line.split(",")
        if len(fields) != schema.encoded_width + 2:
            raise ParseError(f"{path}: line {r + 2}: wrong field count")
        row_ids[r] = int(fields[0])
        labels[r] = int(fields[1])
        rows[r] = [float(tok) for tok in fields[2:]]
    return FeatureTable(schema, rows, labels, row_ids)
