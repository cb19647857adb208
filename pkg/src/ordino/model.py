"""A likelihood model: network learner plus link function."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ordino import learner
from ordino.links import LikelihoodSpec, link_probs

CHECKPOINT_FORMAT = "ordino-model"
CHECKPOINT_VERSION = 1


@dataclass
class OrdinalModel:
    """Network ``net`` producing link inputs, plus the free thresholds of PO models."""

    spec: LikelihoodSpec
    net: learner.MlpParams
    po_bias: np.ndarray | None = None

    @classmethod
    def initialize(cls, spec: LikelihoodSpec, d: int, seed) -> "OrdinalModel":
        net = learner.init(seed, learner.layer_sizes(d, spec.head_dim))
        po_bias = np.zeros(spec.bias_dim) if spec.bias_dim else None
        return cls(spec, net, po_bias)

    def arrays(self) -> list[np.ndarray]:
        """Trainable arrays in a fixed order (network weights, biases, thresholds)."""
        arrs = self.net.arrays()
        if self.po_bias is not None:
            arrs.append(self.po_bias)
        return arrs

    def copy(self) -> "OrdinalModel":
        return OrdinalModel(self.spec, self.net.copy(),
                            None if self.po_bias is None else self.po_bias.copy())

    def link_inputs(self, X) -> np.ndarray:
        return learner.forward(self.net, np.atleast_2d(X))

    def predict_proba(self, X) -> np.ndarray:
        """Predicted PMFs, one row per sample."""
        return link_probs(self.spec, self.link_inputs(X), self.po_bias)

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "spec": self.spec.to_dict(),
            "net": self.net.to_dict(),
            "po_bias": None if self.po_bias is None else self.po_bias.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OrdinalModel":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a model checkpoint")
        if d.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('version')}")
        po_bias = d.get("po_bias")
        return cls(LikelihoodSpec.from_dict(d["spec"]),
                   learner.MlpParams.from_dict(d["net"]),
                   None if po_bias is None else np.asarray(po_bias, dtype=float))


def save_checkpoint(model: OrdinalModel, path, **extra) -> None:
    """Write ``model`` (and any JSON-serializable ``extra`` fields) as JSON."""
    doc = model.to_dict()
    doc.update(extra)
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_checkpoint(path) -> tuple[OrdinalModel, dict]:
    doc = json.loads(Path(path).read_text())
    return OrdinalModel.from_dict(doc), doc
