"""Objective, optimizer, learning-rate schedule and validation-based model selection."""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ordino import learner
from ordino.data import Dataset, Standardizer
from ordino.errors import ConfigurationError
from ordino.inference import MetricsReport, metrics_from_probs
from ordino.links import LikelihoodSpec, clamp_probs, clamp_vjp, link_probs, link_vjp
from ordino.model import OrdinalModel
from ordino.simplex import hausdorff_batch

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

R_GRID = tuple(round(0.05 * i, 2) for i in range(21))
LAMBDA_GRID = tuple(float(10.0 ** (0.5 * i - 4)) for i in range(17))
METRICS = ("nll", "mze", "mae", "mse")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 16
    metric: str = "nll"
    seed: int = 0
    r_grid: tuple = R_GRID
    # None disables the regularizer; otherwise a grid of λ values to select from
    lambda_grid: tuple | None = None
    delta: float = 0.05
    # sweep (r, λ) jointly instead of fixing r first and then sweeping λ
    joint: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ConfigurationError(f"unknown validation metric {self.metric!r}")
        if not self.r_grid:
            raise ConfigurationError("r_grid must be nonempty")
        if self.lambda_grid is not None and not self.lambda_grid:
            raise ConfigurationError("lambda_grid must be nonempty when given")
        if self.delta < 0:
            raise ConfigurationError("delta must be nonnegative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["r_grid"] = list(self.r_grid)
        d["lambda_grid"] = None if self.lambda_grid is None else list(self.lambda_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if "r_grid" in d:
            d["r_grid"] = tuple(float(r) for r in d["r_grid"])
        if d.get("lambda_grid") is not None:
            d["lambda_grid"] = tuple(float(v) for v in d["lambda_grid"])
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        """Read a JSON or TOML file; keys mirror the dataclass fields."""
        text = Path(path).read_text()
        doc = tomllib.loads(text) if str(path).endswith(".toml") else json.loads(text)
        return cls.from_dict(doc.get("train", doc))


# --- schedule and optimizer -------------------------------------------------

def lr_at(t: int, epochs: int = 300) -> float:
    """Ascending schedule ``10^(2t/epochs - 4)`` for the 0-based epoch ``t``."""
    if not 0 <= t <= epochs:
        raise ValueError(f"epoch index {t} outside 0..{epochs}")
    return float(10.0 ** (2.0 * t / epochs - 4.0))


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_arrays(cls, arrays, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays],
                   0, beta1, beta2, eps)


def adam_step(arrays: list[np.ndarray], grads: list[np.ndarray], state: AdamState, lr: float) -> None:
    """Bias-corrected Adam update, applied in place to ``arrays``."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


# --- objective --------------------------------------------------------------

def nll(model: OrdinalModel, X, y) -> float:
    """Mean negative log likelihood with clamped probabilities."""
    P = clamp_probs(model.predict_proba(X))
    y = np.asarray(y, dtype=int)
    return float(-np.mean(np.log(P[np.arange(len(y)), y - 1])))


def _uprl_hinges(P, y, delta):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=int))
    K = P.shape[1]
    k = np.arange(1, K)[None, :]
    rising = k < y[:, None]
    # rising side penalizes drops, falling side penalizes rises
    diff = P[:, :-1] - P[:, 1:]
    arg = delta + np.where(rising, diff, -diff)
    return arg, rising


def uprl_regularizer(P, y, delta: float = 0.05) -> float:
    """Hinge penalty on likelihood shapes that are not unimodal around the label."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    arg, _ = _uprl_hinges(P, y, delta)
    return float(np.maximum(arg, 0.0).sum(axis=1).mean())


def uprl_grad(P, y, delta: float = 0.05) -> np.ndarray:
    """Gradient of :func:`uprl_regularizer` w.r.t. the probabilities (hinge kink -> 0)."""
    arg, rising = _uprl_hinges(P, y, delta)
    n, K = arg.shape[0], arg.shape[1] + 1
    s = np.where(arg > 0, np.where(rising, 1.0, -1.0), 0.0) / n
    G = np.zeros((n, K))
    G[:, :-1] += s
    G[:, 1:] -= s
    return G


def objective_and_grad(model: OrdinalModel, X, y, lam: float = 0.0, delta: float = 0.05,
                       cache=None):
    """``NLL + lam * UPRL`` on a batch and its gradients w.r.t. ``model.arrays()``."""
    X = np.atleast_2d(X)
    y = np.asarray(y, dtype=int)
    n = len(y)
    acts = cache if cache is not None else learner._forward_cache(model.net, X)
    z = acts[-1]
    spec = model.spec
    P = link_probs(spec, z, model.po_bias)
    Pc = clamp_probs(P)
    rows = np.arange(n)
    value = float(-np.mean(np.log(Pc[rows, y - 1])))
    Gc = np.zeros_like(P)
    Gc[rows, y - 1] = -1.0 / (n * Pc[rows, y - 1])
    G = clamp_vjp(P, Gc)
    if lam != 0.0:
        value += lam * uprl_regularizer(P, y, delta)
        G = G + lam * uprl_grad(P, y, delta)
    dz, db = link_vjp(spec, z, model.po_bias, G)
    buf = learner.backward(model.net, X, dz, cache=acts)
    grads = buf.arrays()
    if model.po_bias is not None:
        grads.append(db)
    return value, grads


def batch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    """Mini-batch permutation as a deterministic function of ``(seed, epoch)``."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def validation_error(model: OrdinalModel, X, y, metric: str) -> float:
    return metrics_from_probs(model.predict_proba(X), y).get(metric)


@dataclass
class GridResult:
    r: float
    lam: float
    best_epoch: int
    best_val: float
    model: OrdinalModel
    train_nll: list[float] = field(default_factory=list)
    val_curve: list[float] = field(default_factory=list)


def train_one(spec: LikelihoodSpec, Xtr, ytr, Xval, yval, config: TrainConfig,
              seed: int, lam: float = 0.0) -> GridResult:
    """Train one model for ``config.epochs`` epochs, keeping the best validation epoch.

    Ties in validation error keep the earliest epoch.
    """
    model = OrdinalModel.initialize(spec, Xtr.shape[1], seed)
    arrays = model.arrays()
    state = AdamState.for_arrays(arrays, config.beta1, config.beta2, config.adam_eps)
    n = len(ytr)
    best_val, best_epoch, best_model = np.inf, 0, model.copy()
    train_curve, val_curve = [], []
    for t in range(config.epochs):
        lr = lr_at(t, config.epochs)
        order = batch_order(n, seed, t)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start: start + config.batch_size]
            value, grads = objective_and_grad(model, Xtr[idx], ytr[idx], lam, config.delta)
            adam_step(arrays, grads, state, lr)
            total += value * len(idx)
        train_curve.append(total / n)
        err = validation_error(model, Xval, yval, config.metric)
        val_curve.append(err)
        if err < best_val:
            best_val, best_epoch, best_model = err, t + 1, model.copy()
    return GridResult(spec.mixture_rate, lam, best_epoch, float(best_val), best_model,
                      train_curve, val_curve)


@dataclass
class TrialReport:
    """Outcome of one trial: the selected (grid point, epoch) and its test metrics."""

    dataset: str
    trial: int
    seed: int
    model: str
    spec: dict
    selected_epoch: int
    selected_r: float | None
    selected_lambda: float | None
    val_error: float
    val_metric: str
    test: MetricsReport
    test_mdh: float
    test_ur: float
    n_tra: int
    n_val: int
    n_test: int
    grid: list = field(default_factory=list)
    preprocessing: str = "features standardized with train-split mean/std"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["test"] = self.test.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialReport":
        d = dict(d)
        d["test"] = MetricsReport(**d["test"])
        d = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**d)


@dataclass
class FitResult:
    model: OrdinalModel
    report: TrialReport
    standardizer: Standardizer
    grid_results: list[GridResult]


def _grid_points(spec: LikelihoodSpec, config: TrainConfig):
    rates = list(config.r_grid) if spec.link == "MAUL" else [spec.mixture_rate]
    lams = [0.0] if config.lambda_grid is None else list(config.lambda_grid)
    return rates, lams


def _select(results: list[GridResult]) -> GridResult:
    best = results[0]
    for res in results[1:]:
        if res.best_val < best.best_val:
            best = res
    return best


def fit(dataset: Dataset, splits, spec: LikelihoodSpec, config: TrainConfig,
        trial: int = 0, model_name: str | None = None) -> FitResult:
    """Train over the (r, λ) grid and select by validation error.

    For MAUL with an active λ grid, ``config.joint=False`` first selects r
    with the plain NLL and then sweeps λ at that rate.
    """
    tr, va, te = (np.asarray(s, dtype=int) for s in splits)
    if min(len(tr), len(va), len(te)) == 0:
        raise ConfigurationError("train, validation and test splits must be nonempty")
    if len(set(tr) & set(va)) or len(set(tr) & set(te)) or len(set(va) & set(te)):
        raise ConfigurationError("splits must be disjoint")
    if dataset.K != spec.K:
        raise ConfigurationError(f"dataset has K={dataset.K}, spec has K={spec.K}")
    std = Standardizer.fit(dataset.features[tr])
    Xtr, Xva, Xte = (std.transform(dataset.features[s]) for s in (tr, va, te))
    ytr, yva, yte = (dataset.labels[s] for s in (tr, va, te))
    seed = config.seed

    def run(r, lam):
        log.debug("training %s r=%s lambda=%s", spec.link, r, lam)
        return train_one(spec.with_rate(r), Xtr, ytr, Xva, yva, config, seed, lam)

    rates, lams = _grid_points(spec, config)
    if config.joint or config.lambda_grid is None or len(rates) == 1:
        results = [run(r, lam) for r in rates for lam in lams]
        best = _select(results)
    else:
        stage1 = [run(r, 0.0) for r in rates]
        r_bar = _select(stage1).r
        stage2 = [run(r_bar, lam) for lam in lams]
        results = stage1 + stage2
        best = _select(stage2)

    chosen = best.model
    P_test = chosen.predict_proba(Xte)
    test = metrics_from_probs(P_test, yte)
    hd, _, _ = hausdorff_batch(P_test / P_test.sum(axis=1, keepdims=True))
    report = TrialReport(
        dataset=dataset.name,
        trial=trial,
        seed=seed,
        model=model_name or spec.link.lower(),
        spec=chosen.spec.to_dict(),
        selected_epoch=best.best_epoch,
        selected_r=best.r if spec.link == "MAUL" else None,
        selected_lambda=best.lam if config.lambda_grid is not None else None,
        val_error=best.best_val,
        val_metric=config.metric,
        test=test,
        test_mdh=float(hd.mean()),
        test_ur=float(np.mean(hd < 1e-8)),
        n_tra=len(tr), n_val=len(va), n_test=len(te),
        grid=[{"r": g.r, "lambda": g.lam, "epoch": g.best_epoch, "val": g.best_val}
              for g in results],
    )
    return FitResult(chosen, report, std, results)


def replay_test_metrics(model: OrdinalModel, standardizer: Standardizer, dataset: Dataset,
                        test_idx) -> MetricsReport:
    """Recompute test metrics from a stored model (used to audit reports)."""
    X = standardizer.transform(dataset.features[np.asarray(test_idx, dtype=int)])
    return metrics_from_probs(model.predict_proba(X), dataset.labels[np.asarray(test_idx, dtype=int)])

