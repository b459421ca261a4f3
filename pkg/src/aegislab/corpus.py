"""Synthetic corpus generator emitting the 43-field NSL-KDD record format.

Produces a train/test file pair with the canonical column layout so the
standard loaders work unchanged. The generator plants a family structure
designed to exercise the full detector lifecycle:

* ten attack families, each blatant in exactly one numeric feature and
  separated from benign traffic by a clean value gap, so a detector reaches
  near-perfect scores and importance ranks those ten features on top;
* attack rows draw every non-signature feature from a narrowed copy of the
  benign distribution whose support sits strictly inside the benign 5th-95th
  percentile band, so envelope clipping of a non-signature feature is an
  exact no-op;
* a test file with half benign traffic and a majority of novel attack
  families that sit in value regions no training family occupies.

All family and mixture-component counts are allocated exactly (largest
remainder) so corpus statistics are stable across seeds.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .data import NSLKDD_COLUMNS

BENIGN_TRAIN_FRACTION = 0.53
BENIGN_TEST_FRACTION = 0.50
KNOWN_TEST_FRACTION = 0.45  # share of test attacks drawn from training families

_PROTOCOLS = (("tcp", 0.78), ("udp", 0.17), ("icmp", 0.05))
_SERVICES = (("http", 0.55), ("smtp", 0.12), ("domain_u", 0.10),
             ("ftp_data", 0.08), ("private", 0.10), ("other", 0.05))
_SERVICES_TEST = (("http", 0.547), ("smtp", 0.12), ("domain_u", 0.10),
                  ("ftp_data", 0.08), ("private", 0.10), ("other", 0.05),
                  ("pm_dump", 0.003))
_FLAGS = (("SF", 0.93), ("REJ", 0.04), ("S0", 0.02), ("RSTO", 0.01))

_RATE_COLUMNS = frozenset(c for c in NSLKDD_COLUMNS if c.endswith("_rate"))


def _exact_counts(weights: list[float], n: int) -> list[int]:
    """Integer allocation of n by weights, largest remainder method."""
    total = sum(weights)
    raw = [w / total * n for w in weights]
    counts = [int(math.floor(r)) for r in raw]
    short = n - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: raw[i] - counts[i], reverse=True)
    for i in order[:short]:
        counts[i] += 1
    return counts


def _const(v: float):
    def fn(rng, n):
        return np.full(n, float(v))
    return fn


def _unif(lo: float, hi: float):
    def fn(rng, n):
        return rng.uniform(lo, hi, n)
    return fn


def _unif_int(lo: int, hi: int):
    def fn(rng, n):
        return rng.integers(lo, hi + 1, size=n).astype(np.float64)
    return fn


def _bern(p: float):
    def fn(rng, n):
        return (rng.random(n) < p).astype(np.float64)
    return fn


def _lognormal_int(mu: float, sigma: float, cap: float):
    """Rounded lognormal, truncated below cap by redrawing the tail."""
    def fn(rng, n):
        z = rng.normal(mu, sigma, n)
        limit = math.log(cap)
        for _ in range(6):
            bad = z > limit
            if not bad.any():
                break
            z[bad] = rng.normal(mu, sigma, int(bad.sum()))
        return np.rint(np.exp(np.minimum(z, limit)))
    return fn


def _lognormal_band(mu: float, sigma: float, lo: float, hi: float):
    """Rounded lognormal confined to [lo, hi] by redrawing, then clamping."""
    def fn(rng, n):
        z = rng.normal(mu, sigma, n)
        z_lo, z_hi = math.log(lo), math.log(hi)
        for _ in range(6):
            bad = (z < z_lo) | (z > z_hi)
            if not bad.any():
                break
            z[bad] = rng.normal(mu, sigma, int(bad.sum()))
        return np.rint(np.exp(np.clip(z, z_lo, z_hi)))
    return fn


def _mix(*parts):
    """Mixture with exact component allocation, shuffled into the rows."""
    weights = [w for w, _ in parts]
    samplers = [s for _, s in parts]
    def fn(rng, n):
        counts = _exact_counts(weights, n)
        chunks = [s(rng, c) for s, c in zip(samplers, counts)]
        values = np.concatenate(chunks) if chunks else np.empty(0)
        return values[rng.permutation(n)]
    return fn


# Ten columns carry the family signatures and keep a rich benign shape; the
# rest are dominated by a single benign value (>=96% mass) so the benign
# 5th-95th percentile band collapses onto that value.
BENIGN_SAMPLERS = {
    "duration": _mix((0.70, _const(0)), (0.30, _lognormal_int(4.0, 1.0, 2000))),
    "src_bytes": _mix((0.20, _const(0)), (0.80, _lognormal_int(5.2, 1.2, 8000))),
    "dst_bytes": _mix((0.965, _const(0)), (0.035, _lognormal_int(6.2, 1.0, 5000))),
    "land": _const(0),
    "wrong_fragment": _const(0),
    "urgent": _const(0),
    "hot": _mix((0.90, _const(0)), (0.10, _unif_int(1, 6))),
    "num_failed_logins": _mix((0.97, _const(0)), (0.03, _const(1))),
    "logged_in": _bern(0.7),
    "num_compromised": _mix((0.98, _const(0)), (0.02, _unif_int(1, 2))),
    "root_shell": _mix((0.99, _const(0)), (0.01, _const(1))),
    "su_attempted": _mix((0.995, _const(0)), (0.005, _unif_int(1, 2))),
    "num_root": _mix((0.97, _const(0)), (0.03, _unif_int(1, 3))),
    "num_file_creations": _mix((0.97, _const(0)), (0.03, _unif_int(1, 2))),
    "num_shells": _mix((0.99, _const(0)), (0.01, _const(1))),
    "num_access_files": _mix((0.975, _const(0)), (0.025, _unif_int(1, 2))),
    "num_outbound_cmds": _const(0),
    "is_host_login": _const(0),
    "is_guest_login": _bern(0.06),
    "count": _lognormal_int(3.0, 0.9, 170),
    "srv_count": _mix((0.97, _const(0)), (0.03, _unif_int(1, 40))),
    "serror_rate": _mix((0.92, _const(0)), (0.08, _unif(0.0, 0.15))),
    "srv_serror_rate": _mix((0.975, _const(0)), (0.025, _unif(0.0, 0.6))),
    "rerror_rate": _mix((0.90, _const(0)), (0.10, _unif(0.0, 0.20))),
    "srv_rerror_rate": _mix((0.975, _const(0)), (0.025, _unif(0.0, 0.6))),
    "same_srv_rate": _mix((0.60, _const(1.0)), (0.40, _unif(0.70, 1.0))),
    "diff_srv_rate": _mix((0.97, _const(0)), (0.03, _unif(0.0, 0.5))),
    "srv_diff_host_rate": _mix((0.965, _const(0)), (0.035, _unif(0.0, 0.7))),
    "dst_host_count": _mix((0.965, _const(0)), (0.035, _unif_int(1, 90))),
    "dst_host_srv_count": _mix((0.965, _const(0)), (0.035, _unif_int(1, 80))),
    "dst_host_same_srv_rate": _mix((0.97, _const(1.0)), (0.03, _unif(0.2, 0.9))),
    "dst_host_diff_srv_rate": _mix((0.97, _const(0)), (0.03, _unif(0.0, 0.6))),
    "dst_host_same_src_port_rate": _unif(0.0, 0.30),
    "dst_host_srv_diff_host_rate": _mix((0.97, _const(0)), (0.03, _unif(0.0, 0.5))),
    "dst_host_serror_rate": _mix((0.975, _const(0)), (0.025, _unif(0.0, 0.6))),
    "dst_host_srv_serror_rate": _mix((0.975, _const(0)), (0.025, _unif(0.0, 0.6))),
    "dst_host_rerror_rate": _mix((0.97, _const(0)), (0.03, _unif(0.0, 0.6))),
    "dst_host_srv_rerror_rate": _mix((0.97, _const(0)), (0.03, _unif(0.0, 0.6))),
}

# Baseline for attack rows. Signature columns reuse the full benign shape;
# the dominated columns pin attack rows to the dominant benign value, which
# always sits inside the benign 5th-95th percentile band.
ATTACK_BASE_SAMPLERS = dict(
    BENIGN_SAMPLERS,
    dst_bytes=_const(0),
    num_compromised=_const(0),
    root_shell=_const(0),
    su_attempted=_const(0),
    num_root=_const(0),
    num_file_creations=_const(0),
    num_shells=_const(0),
    num_access_files=_const(0),
    srv_count=_const(0),
    srv_serror_rate=_const(0),
    srv_rerror_rate=_const(0),
    diff_srv_rate=_const(0),
    srv_diff_host_rate=_const(0),
    dst_host_count=_const(0),
    dst_host_srv_count=_const(0),
    dst_host_same_srv_rate=_const(1.0),
    dst_host_diff_srv_rate=_const(0),
    dst_host_srv_diff_host_rate=_const(0),
    dst_host_serror_rate=_const(0),
    dst_host_srv_serror_rate=_const(0),
    dst_host_rerror_rate=_const(0),
    dst_host_srv_rerror_rate=_const(0),
)

# (family, share of attack rows, feature overrides)
TRAIN_FAMILIES = (
    ("smurf", 0.14, {"src_bytes": _unif_int(25000, 64000)}),
    ("neptune", 0.12, {"serror_rate": _unif(0.82, 1.0)}),
    ("satan", 0.11, {"same_srv_rate": _unif(0.0, 0.28)}),
    ("portsweep", 0.10, {"rerror_rate": _unif(0.80, 1.0)}),
    ("back", 0.10, {"count": _unif_int(300, 511)}),
    ("teardrop", 0.09, {"wrong_fragment": _unif_int(1, 3)}),
    ("guess_passwd", 0.09, {"num_failed_logins": _unif_int(2, 6)}),
    ("warezclient", 0.09, {"hot": _unif_int(15, 30)}),
    ("ipsweep", 0.08, {"dst_host_same_src_port_rate": _unif(0.90, 1.0)}),
    ("multihop", 0.08, {"duration": _unif_int(3000, 30000)}),
)

NOVEL_FAMILIES = (
    ("snmpgetattack", 0.16, {}),
    ("snmpguess", 0.10, {"num_failed_logins": _const(1)}),
    ("mailbomb", 0.10, {"srv_count": _unif_int(60, 120)}),
    ("apache2", 0.12, {"count": _unif_int(180, 300)}),
    ("processtable", 0.12, {"duration": _unif_int(1200, 2800)}),
    ("mscan", 0.12, {"dst_host_same_src_port_rate": _unif(0.35, 0.65)}),
    ("saint", 0.14, {"rerror_rate": _unif(0.35, 0.65)}),
    ("httptunnel", 0.14, {"src_bytes": _unif_int(6000, 15000)}),
)


def _numeric_block(
    rng: np.random.Generator, n: int, samplers=BENIGN_SAMPLERS
) -> dict[str, np.ndarray]:
    return {name: sampler(rng, n) for name, sampler in samplers.items()}


def _family_rows(
    rng: np.random.Generator, n: int, families
) -> tuple[dict[str, np.ndarray], list[str]]:
    """Attack rows: narrowed benign baseline, per-family overrides on top."""
    shares = [share for _, share, _ in families]
    counts = _exact_counts(shares, n)
    block = _numeric_block(rng, n, ATTACK_BASE_SAMPLERS)
    names: list[str] = []
    start = 0
    for (family, _, overrides), c in zip(families, counts):
        for col, sampler in overrides.items():
            block[col][start:start + c] = sampler(rng, c)
        names.extend([family] * c)
        start += c
    return block, names


def _categorical(rng: np.random.Generator, n: int, table) -> np.ndarray:
    values = [v for v, _ in table]
    probs = np.array([p for _, p in table])
    return rng.choice(values, size=n, p=probs / probs.sum())


def _format_value(col: str, v: float) -> str:
    if col in _RATE_COLUMNS:
        return f"{v:.2f}"
    return str(int(round(v)))


def _render(
    rng: np.random.Generator,
    block: dict[str, np.ndarray],
    labels: list[str],
    n: int,
    service_table,
) -> list[str]:
    protocol = _categorical(rng, n, _PROTOCOLS)
    service = _categorical(rng, n, service_table)
    flag = _categorical(rng, n, _FLAGS)
    difficulty = rng.integers(0, 22, size=n)
    lines = []
    for i in range(n):
        fields = []
        for col in NSLKDD_COLUMNS:
            if col == "protocol_type":
                fields.append(protocol[i])
            elif col == "service":
                fields.append(service[i])
            elif col == "flag":
                fields.append(flag[i])
            else:
                fields.append(_format_value(col, block[col][i]))
        fields.append(labels[i])
        fields.append(str(difficulty[i]))
        lines.append(",".join(fields))
    return lines


def generate_train_lines(n: int = 13000, seed: int = 0) -> list[str]:
    rng = np.random.default_rng([seed, 0])
    n_benign = round(BENIGN_TRAIN_FRACTION * n)
    n_attack = n - n_benign
    benign = _numeric_block(rng, n_benign)
    attack, attack_names = _family_rows(rng, n_attack, TRAIN_FAMILIES)
    block = {c: np.concatenate([benign[c], attack[c]]) for c in BENIGN_SAMPLERS}
    labels = ["normal"] * n_benign + attack_names
    lines = _render(rng, block, labels, n, _SERVICES)
    order = rng.permutation(n)
    return [lines[i] for i in order]


def generate_test_lines(n: int = 7000, seed: int = 0) -> list[str]:
    rng = np.random.default_rng([seed, 1])
    n_benign = round(BENIGN_TEST_FRACTION * n)
    n_attack = n - n_benign
    n_known = round(KNOWN_TEST_FRACTION * n_attack)
    benign = _numeric_block(rng, n_benign)
    known, known_names = _family_rows(rng, n_known, TRAIN_FAMILIES)
    novel, novel_names = _family_rows(rng, n_attack - n_known, NOVEL_FAMILIES)
    block = {
        c: np.concatenate([benign[c], known[c], novel[c]]) for c in BENIGN_SAMPLERS
    }
    labels = ["normal"] * n_benign + known_names + novel_names
    lines = _render(rng, block, labels, n, _SERVICES_TEST)
    order = rng.permutation(n)
    return [lines[i] for i in order]


def write_corpus(
    out_dir: str | Path,
    n_train: int = 13000,
    n_test: int = 7000,
    seed: int = 0,
) -> tuple[Path, Path]:
    """Write the train/test file pair; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_path = out_dir / "train.csv"
    test_path = out_dir / "test.csv"
    train_path.write_text("\n".join(generate_train_lines(n_train, seed)) + "\n")
    test_path.write_text("\n".join(generate_test_lines(n_test, seed)) + "\n")
    return train_path, test_path
