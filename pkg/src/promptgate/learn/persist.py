"""Model persistence: a single JSON envelope for all classifier families.

Envelope fields: format_version, family, feature_dim, provider_tag, params
(the training config echo), payload (family-specific). Floats survive the
JSON round trip bit-exactly, so a reloaded model scores identically.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from pathlib import Path

from .forest import ForestConfig, ForestModel
from .gbt import GbtConfig, GbtModel
from .logreg import LogRegConfig, LogRegModel
from .tree import tree_from_list, tree_to_list

import numpy as np

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1

_CONFIG_TYPES = {"logreg": LogRegConfig, "forest": ForestConfig, "gbt": GbtConfig}


class ModelEnvelopeError(ValueError):
    """Model file is missing fields, malformed, or an unsupported version."""


def _payload(model) -> dict:
    if isinstance(model, LogRegModel):
        return {"weights": [float(v) for v in model.weights], "bias": float(model.bias)}
    if isinstance(model, ForestModel):
        return {"trees": [tree_to_list(t) for t in model.trees]}
    if isinstance(model, GbtModel):
        return {
            "base_score": float(model.base_score),
            "trees": [tree_to_list(t) for t in model.trees],
        }
    raise TypeError(f"unsupported model type: {type(model).__name__}")


def save_model(model, path: str | Path) -> None:
    path = Path(path)
    envelope = {
        "format_version": MODEL_FORMAT_VERSION,
        "family": model.family,
        "feature_dim": int(model.feature_dim),
        "provider_tag": model.provider_tag,
        "params": dataclasses.asdict(model.config),
        "payload": _payload(model),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(envelope, fh, sort_keys=True)
        fh.write("\n")
    logger.debug("saved %s model to %s", model.family, path)


def load_model(path: str | Path):
    """Load a model envelope; raises ModelEnvelopeError, never a partial model."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelEnvelopeError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ModelEnvelopeError(f"{path}: envelope must be a JSON object")
    try:
        version = raw["format_version"]
        family = raw["family"]
        feature_dim = int(raw["feature_dim"])
        provider_tag = raw["provider_tag"]
        params = raw["params"]
        payload = raw["payload"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelEnvelopeError(f"{path}: missing or malformed envelope field: {exc}") from None
    if version != MODEL_FORMAT_VERSION:
        raise ModelEnvelopeError(
            f"{path}: unsupported format_version {version!r}, this build reads {MODEL_FORMAT_VERSION}"
        )
    if family not in _CONFIG_TYPES:
        raise ModelEnvelopeError(f"{path}: unknown model family {family!r}")
    if feature_dim < 1:
        raise ModelEnvelopeError(f"{path}: feature_dim must be positive, got {feature_dim}")
    try:
        config = _CONFIG_TYPES[family](**params)
    except (TypeError, ValueError) as exc:
        raise ModelEnvelopeError(f"{path}: params do not match {family} config: {exc}") from None

    try:
        if family == "logreg":
            weights = np.asarray(payload["weights"], dtype=np.float64)
            if weights.shape != (feature_dim,):
                raise ValueError(f"weights length {weights.shape} != feature_dim {feature_dim}")
            return LogRegModel(
                weights=weights,
                bias=float(payload["bias"]),
                config=config,
                feature_dim=feature_dim,
                provider_tag=provider_tag,
            )
        trees = [tree_from_list(items) for items in payload["trees"]]
        if not trees:
            raise ValueError("model has no trees")
        if family == "forest":
            return ForestModel(
                trees=trees, config=config, feature_dim=feature_dim, provider_tag=provider_tag
            )
        return GbtModel(
            base_score=float(payload["base_score"]),
            trees=trees,
            config=config,
            feature_dim=feature_dim,
            provider_tag=provider_tag,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelEnvelopeError(f"{path}: malformed {family} payload: {exc}") from None
