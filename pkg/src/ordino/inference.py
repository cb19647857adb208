"""Likelihood-based classifiers and evaluation metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ordino.links import clamp_probs

TASK_LOSSES = ("zero_one", "absolute", "squared")


def loss_matrix(K: int, loss: str) -> np.ndarray:
    """``L[k, y] = loss(k, y)`` for 0-based ``k, y``."""
    k = np.arange(K)[:, None]
    y = np.arange(K)[None, :]
    if loss == "zero_one":
        return (k != y).astype(float)
    if loss == "absolute":
        return np.abs(k - y).astype(float)
    if loss == "squared":
        return ((k - y) ** 2).astype(float)
    raise ValueError(f"unknown task loss {loss!r}; expected one of {TASK_LOSSES}")


def expected_losses(P, loss: str) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    return P @ loss_matrix(P.shape[-1], loss).T


TIE_TOL = 1e-9


def bayes_label(P, loss: str = "zero_one", tie_tol: float = TIE_TOL):
    """Label (1-based) minimizing expected task loss; ties go to the smallest label.

    Expected losses within ``tie_tol`` of the minimum count as ties, so that
    rounding in the loss sums cannot reorder equal candidates.  Accepts a
    single PMF or a batch of rows.
    """
    E = expected_losses(P, loss)
    near = E <= E.min(axis=-1, keepdims=True) + tie_tol
    return np.argmax(near, axis=-1) + 1


@dataclass(frozen=True)
class MetricsReport:
    nll: float
    mze: float
    mae: float
    mse: float
    n_test: int

    def to_dict(self) -> dict:
        return asdict(self)

    def get(self, name: str) -> float:
        return getattr(self, name.lower())


def nll_from_probs(P, y) -> float:
    """Mean negative log likelihood of 1-based labels ``y`` under clamped ``P``."""
    P = clamp_probs(np.atleast_2d(P))
    y = np.asarray(y, dtype=int)
    return float(-np.mean(np.log(P[np.arange(len(y)), y - 1])))


def metrics_from_probs(P, y) -> MetricsReport:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    y = np.asarray(y, dtype=int)
    if len(y) == 0:
        raise ValueError("cannot evaluate on an empty split")
    mze = np.mean(bayes_label(P, "zero_one") != y)
    mae = np.mean(np.abs(bayes_label(P, "absolute") - y))
    mse = np.mean((bayes_label(P, "squared") - y) ** 2)
    return MetricsReport(nll_from_probs(P, y), float(mze), float(mae), float(mse), int(len(y)))


def evaluate(model, X, y) -> MetricsReport:
    """NLL and task risks of ``model`` on features ``X`` with labels ``y``."""
    return metrics_from_probs(model.predict_proba(X), y)
