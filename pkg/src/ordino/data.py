"""Dataset loading, target discretization, splitting and simplex sampling."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ordino.errors import ConfigurationError

log = logging.getLogger(__name__)


@dataclass
class Dataset:
    """Features ``(n, d)`` and 1-based integer labels in ``1..K``."""

    features: np.ndarray
    labels: np.ndarray
    K: int
    name: str = "dataset"
    label_map: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be (n, d) with one label per row")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")
        if self.labels.size and (self.labels.min() < 1 or self.labels.max() > self.K):
            raise ValueError(f"labels must lie in 1..{self.K}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.features[idx], self.labels[idx], self.K, self.name, self.label_map)


def remap_labels(raw) -> tuple[np.ndarray, dict]:
    """Order-preserving map of arbitrary integer labels onto ``1..K``."""
    raw = np.asarray(raw)
    uniq = np.unique(raw)
    mapping = {int(v): i + 1 for i, v in enumerate(uniq)}
    if not np.array_equal(uniq, np.arange(1, len(uniq) + 1)):
        log.info("remapped labels %s", mapping)
    return np.searchsorted(uniq, raw) + 1, mapping


def _read_rows(path, header: bool) -> list[list[float]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: cannot parse {cell!r} as a number (row {lineno}, column {col})"
                    ) from None
            if rows and len(vals) != len(rows[0]):
                raise ValueError(f"{path}: row {lineno} has {len(vals)} columns, expected {len(rows[0])}")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def load_csv(path, label_column: int = -1, header: bool = False, bins: int | None = None,
             name: str | None = None) -> Dataset:
    """Read a numeric CSV; one column holds the target.

    The target must be integer-valued unless ``bins`` is given, in which case
    a real-valued target is discretized with :func:`equal_frequency_bins`.
    """
    table = np.asarray(_read_rows(path, header))
    if not np.all(np.isfinite(table)):
        raise ValueError(f"{path}: non-finite values")
    ncol = table.shape[1]
    col = label_column % ncol
    target = table[:, col]
    X = np.delete(table, col, axis=1)
    if bins is not None:
        y = equal_frequency_bins(target, bins)
        mapping = {}
        K = bins
    else:
        if not np.all(target == np.round(target)):
            bad = int(np.flatnonzero(target != np.round(target))[0])
            raise ValueError(f"{path}: non-integer label {target[bad]} (data row {bad + 1}, column {col + 1})")
        y, mapping = remap_labels(target.astype(int))
        K = len(mapping)
    return Dataset(X, y, K, name or Path(path).stem, mapping)


def load_manifest(path) -> Dataset:
    """Load a dataset described by a JSON manifest.

    Keys: ``path`` (relative to the manifest), optional ``name``,
    ``label_column``, ``header``, ``bins``.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    csv_path = path.parent / doc["path"]
    return load_csv(csv_path, label_column=doc.get("label_column", -1),
                    header=doc.get("header", False), bins=doc.get("bins"),
                    name=doc.get("name"))


def load_dataset(path) -> Dataset:
    """Dispatch on extension: ``.json`` manifests or plain CSV."""
    return load_manifest(path) if str(path).endswith(".json") else load_csv(path)


def write_csv(dataset: Dataset, path, header: bool = False) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{j + 1}" for j in range(dataset.d)] + ["y"])
        for x, y in zip(dataset.features, dataset.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def equal_frequency_bins(values, bins: int) -> np.ndarray:
    """Rank-based discretization into ``bins`` classes of (nearly) equal size.

    Sorted position ``i`` falls in bin ``j`` when
    ``floor(n*(j-1)/bins) <= i < floor(n*j/bins)``.  A run of tied values
    takes the bin of its first element (the lower bin), then labels are
    adjusted so that consecutive distinct values never skip a bin and every
    bin is used whenever there are at least ``bins`` distinct values.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if bins < 2:
        raise ValueError("need at least 2 bins")
    if n < bins:
        raise ValueError(f"need at least {bins} values, got {n}")
    if np.all(v == v[0]):
        raise ValueError("cannot discretize a constant vector")
    order = np.argsort(v, kind="stable")
    sv = v[order]
    cuts = (n * np.arange(bins + 1)) // bins
    rank_label = np.searchsorted(cuts, np.arange(n), side="right")
    starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
    G = starts.size
    group_label = np.empty(G, dtype=int)
    fill = G >= bins
    prev = 0
    for g, s in enumerate(starts):
        lab = min(rank_label[s], prev + 1)
        if fill:
            lab = max(lab, bins - (G - 1 - g))
        group_label[g] = prev = lab
    sizes = np.diff(np.r_[starts, n])
    sorted_labels = np.repeat(group_label, sizes)
    out = np.empty(n, dtype=int)
    out[order] = sorted_labels
    return out


@dataclass(frozen=True)
class SplitSpec:
    n_tra: int
    n_val: int = 100
    seed: int = 0


def split(n: int, spec: SplitSpec):
    """Seeded disjoint train/validation/test index sets; test is the remainder."""
    if spec.n_tra < 1 or spec.n_val < 1:
        raise ConfigurationError("train and validation splits must be nonempty")
    if spec.n_tra + spec.n_val >= n:
        raise ConfigurationError(
            f"n_tra + n_val = {spec.n_tra + spec.n_val} leaves no test data (n = {n})")
    perm = np.random.default_rng(spec.seed).permutation(n)
    return (np.sort(perm[: spec.n_tra]),
            np.sort(perm[spec.n_tra: spec.n_tra + spec.n_val]),
            np.sort(perm[spec.n_tra + spec.n_val:]))


@dataclass
class Standardizer:
    """Per-column affine scaling fitted on a training split."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        # zero-variance columns are shifted only
        scale = np.where(std > 0, std, 1.0)
        return cls(mean, scale)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["scale"], dtype=float))


def sample_uniform_simplex(K: int, n: int, seed=None) -> np.ndarray:
    """``n`` uniform draws on the simplex: normalized unit-rate gamma variates."""
    if K < 2:
        raise ValueError("K must be at least 2")
    rng = np.random.default_rng(seed)
    Z = rng.standard_gamma(1.0, size=(n, K))
    return Z / Z.sum(axis=1, keepdims=True)


# --- synthetic ordinal data -------------------------------------------------

def unimodal_cpd(score, K: int, sharpness: float) -> np.ndarray:
    """Discretized-Gaussian PMFs centred at ``score`` (on the 1..K scale); log-concave, hence unimodal."""
    k = np.arange(1, K + 1)
    logits = -sharpness * (k[None, :] - np.asarray(score)[:, None]) ** 2
    logits -= logits.max(axis=1, keepdims=True)
    P = np.exp(logits)
    return P / P.sum(axis=1, keepdims=True)


def low_ud_cpd(X, K: int, sharpness: float = 0.6, bump: float = 0.15, seed=0) -> np.ndarray:
    """Known conditional distributions that are mostly unimodal with small deviations.

    A smooth score of the first features places a unimodal bump; a small,
    feature-dependent share of mass is moved to a class two steps away from
    the centre, which breaks unimodality at some points but keeps the
    deviation from the unimodal set small.
    """
    rng = np.random.default_rng(seed)
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    w = rng.normal(size=d) / np.sqrt(d)
    s = X @ w + 0.5 * np.sin(X[:, 0] * 1.5)
    s = (s - s.mean()) / (s.std() + 1e-12)
    centre = 1 + (K - 1) / (1 + np.exp(-1.2 * s))
    P = unimodal_cpd(centre, K, sharpness)
    eta = bump / (1 + np.exp(-2.0 * X[:, min(1, d - 1)]))
    target = np.clip(np.rint(centre).astype(int) + np.where(X[:, 0] > 0, 2, -2), 1, K)
    Q = np.zeros_like(P)
    Q[np.arange(len(P)), target - 1] = 1.0
    return (1 - eta[:, None]) * P + eta[:, None] * Q


def sample_labels(P, seed=None) -> np.ndarray:
    """Draw one 1-based label per row of ``P``."""
    rng = np.random.default_rng(seed)
    u = rng.random(P.shape[0])
    cdf = np.cumsum(P, axis=1)
    return np.minimum((u[:, None] > cdf).sum(axis=1), P.shape[1] - 1) + 1


def make_low_ud_dataset(n: int, d: int, K: int, seed: int = 0, name: str | None = None,
                        **cpd_kwargs) -> tuple[Dataset, np.ndarray]:
    """Synthetic ordinal dataset drawn from :func:`low_ud_cpd`; returns ``(dataset, true_cpd)``."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    P = low_ud_cpd(X, K, seed=seed + 1, **cpd_kwargs)
    y = sample_labels(P, seed=seed + 2)
    return Dataset(X, y, K, name or f"lowud_k{K}_d{d}_s{seed}"), P


def make_separable_dataset(n: int, K: int = 3, seed: int = 0) -> tuple[Dataset, np.ndarray]:
    """Two features, labels determined (up to a sharp CPD) by a linear score."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    s = X[:, 0] + 0.5 * X[:, 1]
    centre = 1 + (K - 1) / (1 + np.exp(-3.0 * s))
    P = unimodal_cpd(centre, K, sharpness=25.0)
    y = sample_labels(P, seed=seed + 1)
    return Dataset(X, y, K, f"separable_k{K}_s{seed}"), P
