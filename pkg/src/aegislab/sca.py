"""Side-channel leakage lab: synthetic power traces and leakage recovery.

Traces model a device computing the first AES S-box lookup: each trace is
Gaussian noise plus bumps at fixed points of interest whose amplitude is
proportional to the Hamming weight of the handled intermediate byte.
Recovery runs the standard pipeline: SNR-based point-of-interest
detection, then a small MLP classifying the 9 Hamming-weight classes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, TrainingError
from .learners import MLP, MLPConfig, TrainingCurves

logger = logging.getLogger(__name__)

_GEN_STREAM = 17     # substream tags under the config seed
_SPLIT_STREAM = 23
_GEN_CHUNK = 4096

AES_SBOX = (
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
)


def _gf_mul(a: int, b: int) -> int:
    """Multiplication in GF(2^8) modulo the AES polynomial x^8+x^4+x^3+x+1."""
    p = 0
    while b:
        if b & 1:
            p ^= a
        a <<= 1
        if a & 0x100:
            a ^= 0x11B
        b >>= 1
    return p


def _gf_inv(a: int) -> int:
    # a^254 = a^-1 in GF(2^8)*
    r, base, e = 1, a, 254
    while e:
        if e & 1:
            r = _gf_mul(r, base)
        base = _gf_mul(base, base)
        e >>= 1
    return r


def sbox_from_field_arithmetic() -> tuple[int, ...]:
    """Rebuild the S-box from first principles: GF(2^8) inverse + affine map."""
    out = []
    for x in range(256):
        b = _gf_inv(x) if x else 0
        s = 0
        for i in range(8):
            bit = (
                (b >> i) ^ (b >> ((i + 4) % 8)) ^ (b >> ((i + 5) % 8))
                ^ (b >> ((i + 6) % 8)) ^ (b >> ((i + 7) % 8)) ^ (0x63 >> i)
            ) & 1
            s |= bit << i
        out.append(s)
    return tuple(out)


assert AES_SBOX == sbox_from_field_arithmetic(), "S-box table corrupted"

_SBOX_ARR = np.array(AES_SBOX, dtype=np.uint8)
_HW_TABLE = np.array([v.bit_count() for v in range(256)], dtype=np.int64)


def hamming_weight(value):
    """Number of set bits of byte value(s); accepts an int or an array."""
    if isinstance(value, (int, np.integer)):
        v = int(value)
        if not 0 <= v <= 255:
            raise ValueError(f"byte value out of range: {v}")
        return v.bit_count()
    arr = np.asarray(value)
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError("hamming_weight expects integer values")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError("byte values out of range [0, 255]")
    return _HW_TABLE[arr]


def intermediate_value(plaintext, key: int, leak_model: str = "sbox_out"):
    """The leaking intermediate: SubBytes output (or plain XOR) of p ^ key."""
    if leak_model not in ("sbox_out", "identity"):
        raise ValueError(f"unknown leak model {leak_model!r}")
    if not 0 <= int(key) <= 255:
        raise ValueError(f"key byte out of range: {key}")
    if isinstance(plaintext, (int, np.integer)):
        x = int(plaintext) ^ int(key)
        if not 0 <= int(plaintext) <= 255:
            raise ValueError(f"plaintext byte out of range: {plaintext}")
        return AES_SBOX[x] if leak_model == "sbox_out" else x
    arr = np.asarray(plaintext)
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError("plaintext bytes out of range [0, 255]")
    x = arr.astype(np.uint8) ^ np.uint8(key)
    return _SBOX_ARR[x] if leak_model == "sbox_out" else x


@dataclass(frozen=True)
class LeakageConfig:
    """Synthetic trace generator settings."""

    n_traces: int = 50000
    trace_len: int = 400
    pois: tuple[int, ...] = (100, 200, 300)
    poi_width: float = 5.0
    alpha: float = 0.25   # per-Hamming-weight-bit bump amplitude
    sigma: float = 1.0    # additive Gaussian noise level
    key_byte: int = 0x2B
    leak_model: str = "sbox_out"
    seed: int = 0

    def __post_init__(self):
        if self.n_traces < 1:
            raise ValueError("n_traces must be >= 1")
        if self.trace_len < 1:
            raise ValueError("trace_len must be >= 1")
        if any(not 0 <= p < self.trace_len for p in self.pois):
            raise ValueError("pois must lie inside the trace")
        if self.poi_width <= 0 or self.sigma < 0:
            raise ValueError("poi_width must be > 0 and sigma >= 0")
        if not 0 <= self.key_byte <= 255:
            raise ValueError("key_byte out of range")


@dataclass(frozen=True)
class TraceSet:
    """Generated traces with their plaintexts and Hamming-weight labels."""

    traces: np.ndarray      # (n, trace_len) float64
    plaintexts: np.ndarray  # (n,) uint8
    labels: np.ndarray      # (n,) int64 in 0..8
    config: LeakageConfig

    @property
    def n(self) -> int:
        return self.traces.shape[0]


def poi_shape(config: LeakageConfig) -> np.ndarray:
    """Unit-amplitude leakage profile: sum of Gaussian bumps at the POIs."""
    t = np.arange(config.trace_len, dtype=np.float64)
    shape = np.zeros(config.trace_len, dtype=np.float64)
    for center in config.pois:
        shape += np.exp(-0.5 * ((t - center) / config.poi_width) ** 2)
    return shape


def generate_traces(config: LeakageConfig) -> TraceSet:
    """Simulate traces in fixed-size chunks with per-chunk RNG substreams.

    Each chunk draws from its own (seed, chunk index) stream, so output is
    bitwise reproducible for a given config, chunks could be generated in
    parallel without changing it, and whole chunks are unaffected by how
    many chunks follow them.
    """
    shape = poi_shape(config)
    traces = np.empty((config.n_traces, config.trace_len), dtype=np.float64)
    plaintexts = np.empty(config.n_traces, dtype=np.uint8)
    for chunk, start in enumerate(range(0, config.n_traces, _GEN_CHUNK)):
        stop = min(start + _GEN_CHUNK, config.n_traces)
        rng = np.random.default_rng([config.seed, _GEN_STREAM, chunk])
        pts = rng.integers(0, 256, size=stop - start, dtype=np.uint8)
        noise = rng.standard_normal((stop - start, config.trace_len))
        iv = intermediate_value(pts, config.key_byte, config.leak_model)
        hw = hamming_weight(iv).astype(np.float64)
        traces[start:stop] = config.sigma * noise
        traces[start:stop] += (config.alpha * hw)[:, None] * shape[None, :]
        plaintexts[start:stop] = pts
    labels = hamming_weight(intermediate_value(plaintexts, config.key_byte,
                                               config.leak_model))
    return TraceSet(traces=traces, plaintexts=plaintexts,
                    labels=labels.astype(np.int64), config=config)


@dataclass(frozen=True)
class PoiResult:
    snr: np.ndarray
    top_indices: np.ndarray

    def to_dict(self) -> dict:
        return {"snr": self.snr.tolist(), "top_indices": self.top_indices.tolist()}


def detect_pois(traces: np.ndarray, labels: np.ndarray, top_k: int = 10) -> PoiResult:
    """Per-sample SNR: variance of class means over within-class variance.

    Both terms weight classes by their trace counts, so signal and noise
    decompose the total per-sample variance and a uniform-byte set yields
    SNR of about alpha^2 * Var(HW) / sigma^2 at a leak point. Classes with
    fewer than 2 traces are excluded (with a warning) since their
    within-class variance is undefined. Ties in the top-k ranking go to
    the lower time index.
    """
    traces = np.asarray(traces, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if traces.ndim != 2 or labels.shape[0] != traces.shape[0]:
        raise ValueError("traces must be (n, t) with one label per trace")
    classes = np.unique(labels)
    keep = []
    for c in classes:
        if np.sum(labels == c) < 2:
            logger.warning("class %d has fewer than 2 traces; excluded from SNR", c)
        else:
            keep.append(c)
    if len(keep) < 2:
        raise ValueError("SNR needs at least 2 classes with 2+ traces")
    counts = np.array([np.sum(labels == c) for c in keep], dtype=np.float64)
    weights = counts / counts.sum()
    means = np.stack([traces[labels == c].mean(axis=0) for c in keep])
    variances = np.stack([traces[labels == c].var(axis=0) for c in keep])
    grand = weights @ means
    signal = weights @ (means - grand) ** 2
    noise = weights @ variances
    snr = np.divide(signal, noise, out=np.zeros_like(signal), where=noise > 0.0)
    order = np.argsort(-snr, kind="stable")
    return PoiResult(snr=snr, top_indices=order[:top_k])


def _stratified_indices(
    labels: np.ndarray, fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    first: list[np.ndarray] = []
    second: list[np.ndarray] = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        take = int(round(fraction * idx.size))
        perm = rng.permutation(idx.size)
        first.append(idx[perm[:take]])
        second.append(idx[perm[take:]])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(second))


def leakage_confusion(y_true, y_pred, n_classes: int = 9) -> np.ndarray:
    """Confusion counts, rows true class and columns predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have the same shape")
    if y_true.size and not (
        0 <= y_true.min() and y_true.max() < n_classes
        and 0 <= y_pred.min() and y_pred.max() < n_classes
    ):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    flat = np.bincount(y_true * n_classes + y_pred, minlength=n_classes * n_classes)
    return flat.reshape(n_classes, n_classes)


@dataclass
class LeakageReport:
    """Outcome of a leakage-classifier training run."""

    model: MLP
    curves: TrainingCurves
    train_accuracy: float
    val_accuracy: float
    val_prevalence: float  # majority-class share of the validation labels
    confusion: np.ndarray
    scaler_mean: np.ndarray
    scaler_scale: np.ndarray

    def to_dict(self) -> dict:
        return {
            "train_accuracy": self.train_accuracy,
            "val_accuracy": self.val_accuracy,
            "val_prevalence": self.val_prevalence,
            "confusion": self.confusion.tolist(),
            "curves": self.curves.to_dict(),
        }


def train_leakage_classifier(
    ts: TraceSet,
    val_fraction: float = 0.2,
    mlp_config: MLPConfig | None = None,
) -> LeakageReport:
    """Fit the 9-class Hamming-weight MLP on standardized traces.

    Traces split stratified by class; per-sample standardization is fitted
    on the training part only. The MLP seed defaults to the trace set's
    generation seed so one config pins the full experiment. The default
    weight decay keeps a zero-leakage set at the majority-class prior
    instead of letting the network memorize noise.
    """
    if not (0.0 < val_fraction < 1.0):
        raise TrainingError(f"val_fraction must be in (0, 1), got {val_fraction}")
    cfg = mlp_config or MLPConfig(hidden=(64, 32), n_classes=9, l2=0.01,
                                  seed=ts.config.seed)
    if cfg.n_classes != 9:
        raise TrainingError("leakage classifier needs 9 Hamming-weight classes")
    split_rng = np.random.default_rng([ts.config.seed, _SPLIT_STREAM])
    train_idx, val_idx = _stratified_indices(ts.labels, 1.0 - val_fraction, split_rng)
    if train_idx.size == 0 or val_idx.size == 0:
        raise TrainingError("stratified split produced an empty part")

    X_train = ts.traces[train_idx]
    y_train = ts.labels[train_idx]
    X_val = ts.traces[val_idx]
    y_val = ts.labels[val_idx]
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    scale = np.where(std > 0.0, std, 1.0)
    X_train = (X_train - mean) / scale
    X_val = (X_val - mean) / scale

    model = MLP(cfg).fit(X_train, y_train, X_val, y_val)
    val_pred = model.predict(X_val)
    confusion = leakage_confusion(y_val, val_pred)
    counts = np.bincount(y_val, minlength=9)
    return LeakageReport(
        model=model,
        curves=model.curves,
        train_accuracy=model.curves.train_accuracy[-1],
        val_accuracy=float((val_pred == y_val).mean()),
        val_prevalence=float(counts.max() / y_val.size),
        confusion=confusion,
        scaler_mean=mean,
        scaler_scale=scale,
    )

# ---------------------------------------------------------------------------
# Trace persistence
# ---------------------------------------------------------------------------

_TRACES_MAGIC = b"aegislab-traces v1"


def save_traces(ts: TraceSet, path: str | Path) -> None:
    """Write a trace set as a versioned binary file.

    Layout: a magic line, one JSON header line (config plus array shapes),
    then the raw bytes of traces (float64), plaintexts (uint8) and labels
    (int64), each in C order. No timestamps, so identical sets produce
    identical files.
    """
    header = {
        "config": asdict(ts.config),
        "n": int(ts.n),
        "trace_len": int(ts.traces.shape[1]),
    }
    blob = json.dumps(header, sort_keys=True).encode("ascii")
    with open(path, "wb") as fh:
        fh.write(_TRACES_MAGIC + b"\n")
        fh.write(blob + b"\n")
        fh.write(np.ascontiguousarray(ts.traces, dtype=np.float64).tobytes())
        fh.write(np.ascontiguousarray(ts.plaintexts, dtype=np.uint8).tobytes())
        fh.write(np.ascontiguousarray(ts.labels, dtype=np.int64).tobytes())


def load_traces(path: str | Path) -> TraceSet:
    """Read a trace set written by :func:`save_traces`."""
    try:
        fh_ctx = open(path, "rb")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    with fh_ctx as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic != _TRACES_MAGIC:
            raise ParseError(f"{path}: not a trace-set file")
        try:
            header = json.loads(fh.readline().decode("ascii"))
            n = int(header["n"])
            trace_len = int(header["trace_len"])
            raw = dict(header["config"])
            raw["pois"] = tuple(raw["pois"])
            config = LeakageConfig(**raw)
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}: bad trace-set header: {exc}") from exc
        traces = np.frombuffer(fh.read(n * trace_len * 8), dtype=np.float64)
        plaintexts = np.frombuffer(fh.read(n), dtype=np.uint8)
        labels = np.frombuffer(fh.read(n * 8), dtype=np.int64)
    if traces.size != n * trace_len or plaintexts.size != n or labels.size != n:
        raise ParseError(f"{path}: truncated trace-set payload")
    return TraceSet(
        traces=traces.reshape(n, trace_len).copy(),
        plaintexts=plaintexts.copy(),
        labels=labels.copy(),
        config=config,
    )
